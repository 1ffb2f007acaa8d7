#include "gda/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gda/error.hpp"
#include "gda/random.hpp"

namespace gda::corpus {

namespace {

constexpr std::string_view kDetachable = ".,;:?!";

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_detachable(std::string_view token) {
  return token.size() == 1 && kDetachable.find(token[0]) != std::string::npos;
}

struct Tag {
  char prefix = 'O';  // 'O', 'B' or 'I'
  std::string type;
};

// Returns nullopt when the tag is not O / B-<type> / I-<type>.
std::optional<Tag> parse_tag(std::string_view tag) {
  if (tag == "O") return Tag{};
  if (tag.size() < 3 || tag[1] != '-') return std::nullopt;
  if (tag[0] != 'B' && tag[0] != 'I') return std::nullopt;
  return Tag{tag[0], std::string(tag.substr(2))};
}

// Decodes tags into spans; on failure reports the offending position.
struct DecodeFailure {
  std::size_t position;
  std::string message;
};

std::vector<EntitySpan> decode_tags(const std::vector<std::string>& tags,
                                    std::optional<DecodeFailure>& failure) {
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto tag = parse_tag(tags[i]);
    if (!tag) {
      failure = DecodeFailure{i, "unknown tag syntax '" + tags[i] + "'"};
      return {};
    }
    if (tag->prefix == 'I') {
      if (!open) {
        failure = DecodeFailure{i, "I-" + tag->type + " cannot follow O"};
        return {};
      }
      if (open->entity_type != tag->type) {
        failure = DecodeFailure{i, "I-" + tag->type + " cannot continue " +
                                       "B-" + open->entity_type};
        return {};
      }
      open->end = i + 1;
      continue;
    }
    if (open) spans.push_back(*std::exchange(open, std::nullopt));
    if (tag->prefix == 'B') open = EntitySpan{i, i + 1, tag->type};
  }
  if (open) spans.push_back(*open);
  return spans;
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kSeed:
      return "seed";
    case Method::kEda:
      return "eda";
    case Method::kWordnet:
      return "wordnet";
    case Method::kNaive:
      return "naive";
    case Method::kGda:
      return "gda";
  }
  return "seed";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kSeed, Method::kEda, Method::kWordnet,
                   Method::kNaive, Method::kGda}) {
    if (method_name(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::vector<std::string> Sentence::words() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> Sentence::span_text(const EntitySpan& span) const {
  std::vector<std::string> out;
  for (std::size_t i = span.start; i < span.end && i < tokens.size(); ++i) {
    out.push_back(tokens[i].text);
  }
  return out;
}

Inventory::Inventory(std::vector<std::string> labels) {
  for (auto& l : labels) add(l);
}

bool Inventory::add(const std::string& label) {
  if (contains(label)) return false;
  labels_.push_back(label);
  return true;
}

bool Inventory::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::optional<std::string> check_sentence(const Sentence& sentence,
                                          const Inventory* inventory) {
  const std::size_t n = sentence.tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tok = sentence.tokens[i];
    if (tok.text.empty()) return "token " + std::to_string(i) + " is empty";
    if (std::any_of(tok.text.begin(), tok.text.end(), is_space)) {
      return "token " + std::to_string(i) + " contains whitespace";
    }
    if (tok.index != i) {
      return "token " + std::to_string(i) + " has index " +
             std::to_string(tok.index);
    }
  }
  std::size_t previous_end = 0;
  for (const auto& span : sentence.entities) {
    if (span.start >= span.end || span.end > n) {
      return "span [" + std::to_string(span.start) + "," +
             std::to_string(span.end) + ") out of range";
    }
    if (span.start < previous_end) {
      return "span [" + std::to_string(span.start) + "," +
             std::to_string(span.end) + ") overlaps or is out of order";
    }
    if (span.entity_type.empty()) return "span with empty entity type";
    if (inventory && !inventory->contains(span.entity_type)) {
      return "entity type '" + span.entity_type + "' not in inventory";
    }
    previous_end = span.end;
  }
  const auto& prov = sentence.provenance;
  switch (prov.method) {
    case Method::kSeed:
      if (prov.parent_id) return "seed sentence with a parent id";
      break;
    case Method::kEda:
    case Method::kWordnet:
    case Method::kNaive:
      if (!prov.parent_id) return "augmented sentence without a parent id";
      break;
    case Method::kGda:
      break;
  }
  return std::nullopt;
}

std::vector<Sentence> parse_conll(std::string_view text,
                                  std::string_view id_prefix) {
  std::vector<Sentence> out;
  std::vector<std::string> words;
  std::vector<std::string> tags;
  std::vector<std::size_t> line_of;

  auto flush = [&]() {
    if (words.empty()) return;
    std::optional<DecodeFailure> failure;
    auto spans = decode_tags(tags, failure);
    if (failure) throw ParseError(line_of[failure->position], failure->message);
    Sentence s;
    s.id = std::string(id_prefix) + std::to_string(out.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      s.tokens.push_back(Token{std::move(words[i]), i});
    }
    s.entities = std::move(spans);
    out.push_back(std::move(s));
    words.clear();
    tags.clear();
    line_of.clear();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::vector<std::string> columns;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      std::size_t start = i;
      while (i < line.size() && !is_space(line[i])) ++i;
      if (i > start) columns.emplace_back(line.substr(start, i - start));
    }
    if (columns.empty()) {
      flush();
      continue;
    }
    if (columns[0] == "-DOCSTART-") {
      flush();
      continue;
    }
    if (columns.size() != 2) {
      throw ParseError(line_no, "expected 2 columns (token, tag), found " +
                                    std::to_string(columns.size()));
    }
    if (!parse_tag(columns[1])) {
      throw ParseError(line_no, "unknown tag syntax '" + columns[1] + "'");
    }
    words.push_back(std::move(columns[0]));
    tags.push_back(std::move(columns[1]));
    line_of.push_back(line_no);
  }
  flush();
  return out;
}

std::string serialize_conll(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    const auto tags = encode_bio(s);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i].text;
      out += ' ';
      out += tags[i];
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

TagSequence encode_bio(const Sentence& sentence) {
  TagSequence tags(sentence.tokens.size(), "O");
  for (const auto& span : sentence.entities) {
    for (std::size_t i = span.start; i < span.end && i < tags.size(); ++i) {
      tags[i] = (i == span.start ? "B-" : "I-") + span.entity_type;
    }
  }
  return tags;
}

std::vector<EntitySpan> decode_bio(std::size_t token_count,
                                   const TagSequence& tags) {
  if (tags.size() != token_count) {
    throw InvalidArgument("tag count " + std::to_string(tags.size()) +
                          " does not match token count " +
                          std::to_string(token_count));
  }
  std::optional<DecodeFailure> failure;
  auto spans = decode_tags(tags, failure);
  if (failure) {
    throw InvalidArgument("tag " + std::to_string(failure->position) + ": " +
                          failure->message);
  }
  return spans;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, std::string name) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.name = std::move(name);

  auto load_split = [&](const fs::path& file, const char* split) {
    try {
      return parse_conll(read_file(file), ds.name + ":" + split + ":");
    } catch (const ParseError& e) {
      throw ParseError(e.line(), file.string() + ": " + e.detail());
    }
  };

  if (fs::is_directory(path)) {
    struct Slot {
      const char* split;
      std::vector<Sentence>* target;
    };
    for (Slot slot : {Slot{"train", &ds.train}, Slot{"dev", &ds.dev},
                      Slot{"test", &ds.test}}) {
      for (const char* ext : {".conll", ".txt"}) {
        fs::path file = path / (std::string(slot.split) + ext);
        if (fs::exists(file)) {
          *slot.target = load_split(file, slot.split);
          break;
        }
      }
    }
  } else {
    ds.train = load_split(path, "train");
  }

  for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
    for (const auto& s : *split) {
      for (const auto& e : s.entities) ds.inventory.add(e.entity_type);
    }
  }
  return ds;
}

std::vector<Sentence> sample_seeds(const Dataset& dataset, std::size_t n,
                                   std::uint64_t rng_seed) {
  const std::size_t size = dataset.train.size();
  if (n > size) {
    throw InvalidArgument("requested " + std::to_string(n) +
                          " seeds from a train split of " +
                          std::to_string(size));
  }
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(order[i], order[i + rng.index(size - i)]);
  }
  order.resize(n);
  std::sort(order.begin(), order.end());

  std::vector<Sentence> seeds;
  seeds.reserve(n);
  for (std::size_t idx : order) {
    Sentence s = dataset.train[idx];
    s.provenance = Provenance{};
    seeds.push_back(std::move(s));
  }
  return seeds;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i == start) continue;
    std::string_view word = text.substr(start, i - start);
    std::size_t core = word.size();
    while (core > 0 && kDetachable.find(word[core - 1]) != std::string::npos) {
      --core;
    }
    if (core > 0) out.emplace_back(word.substr(0, core));
    for (std::size_t k = core; k < word.size(); ++k) {
      out.emplace_back(1, word[k]);
    }
  }
  return out;
}

std::string sentence_text(const Sentence& sentence) {
  std::string out;
  for (const auto& tok : sentence.tokens) {
    if (!out.empty() && !is_detachable(tok.text)) out += ' ';
    out += tok.text;
  }
  return out;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

}  // namespace gda::corpus
