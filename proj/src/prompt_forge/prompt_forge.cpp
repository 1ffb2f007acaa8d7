#include "gda/prompt_forge.hpp"

#include <algorithm>
#include <set>

#include "gda/error.hpp"

namespace gda::prompt {

using corpus::Sentence;
using nlohmann::json;

// Generated from templates/*.tmpl at configure time.
extern const char* const kDefaultSeedGenerationTemplate;
extern const char* const kDefaultAbstractionTemplate;
extern const char* const kDefaultGuidanceTemplate;
extern const char* const kDefaultNaiveTemplate;

const std::string kCandidateFormat =
    "Reply with one fenced JSON block and nothing else inside the fence:\n"
    "```json\n"
    "[{\"sentence\": \"<sentence>\", \"entities\": [{\"text\": \"<entity as "
    "written in the sentence>\", \"type\": \"<entity type>\"}]}]\n"
    "```\n"
    "Every entity text must appear verbatim in its sentence.";

const std::string kAbstractionFormat =
    "Reply with one fenced JSON block and nothing else inside the fence:\n"
    "```json\n"
    "{\"context\": \"<common context>\", \"structure\": \"<sentence "
    "structure>\", \"roles\": {\"<entity type>\": \"<role>\"}}\n"
    "```";

namespace {

constexpr PromptKind kAllKinds[] = {PromptKind::kSeedGeneration,
                                    PromptKind::kAbstraction,
                                    PromptKind::kGuidance, PromptKind::kNaive};

bool is_placeholder_name(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || c == '_';
  });
}

std::string strip_newlines(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && (text[b] == '\n' || text[b] == '\r')) ++b;
  while (e > b && (text[e - 1] == '\n' || text[e - 1] == '\r')) --e;
  return std::string(text.substr(b, e - b));
}

std::string trim(std::string_view text) {
  const auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(b, e - b + 1));
}

std::string join_span(const Sentence& s, const corpus::EntitySpan& span) {
  Sentence part;
  for (std::size_t i = span.start; i < span.end; ++i) {
    part.tokens.push_back(s.tokens[i]);
  }
  return corpus::sentence_text(part);
}

std::string entity_lines(const Sentence& s) {
  std::string out;
  for (const auto& span : s.entities) {
    if (!out.empty()) out += '\n';
    out += "- \"" + join_span(s, span) + "\" (" + span.entity_type + ")";
  }
  return out;
}

std::string entity_inline(const Sentence& s) {
  std::string out;
  for (const auto& span : s.entities) {
    if (!out.empty()) out += ", ";
    out += "\"" + join_span(s, span) + "\" (" + span.entity_type + ")";
  }
  return out.empty() ? "none" : out;
}

std::string inventory_line(const corpus::Inventory& inventory) {
  std::string out;
  for (const auto& label : inventory.labels()) {
    if (!out.empty()) out += ", ";
    out += label;
  }
  return out;
}

void require_entities(const Sentence& seed) {
  if (seed.entities.empty()) {
    throw InvalidArgument("sentence " + seed.id +
                          " has no entities to build a prompt from");
  }
}

void require_inventory(const Sentence& s, const corpus::Inventory& inventory) {
  for (const auto& span : s.entities) {
    if (!inventory.contains(span.entity_type)) {
      throw InvalidArgument("sentence " + s.id + " uses entity type '" +
                            span.entity_type + "' outside the inventory");
    }
  }
}

}  // namespace

std::string_view kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::kSeedGeneration:
      return "seed_generation";
    case PromptKind::kAbstraction:
      return "abstraction";
    case PromptKind::kGuidance:
      return "guidance";
    case PromptKind::kNaive:
      return "naive";
  }
  return "naive";
}

std::vector<std::string> find_placeholders(std::string_view text) {
  std::set<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    const auto close = text.find("}}", pos + 2);
    if (close == std::string_view::npos) break;
    const auto name = text.substr(pos + 2, close - pos - 2);
    if (is_placeholder_name(name)) {
      names.emplace(name);
      pos = close + 2;
    } else {
      pos += 2;
    }
  }
  return {names.begin(), names.end()};
}

std::string render_text(std::string_view text, const Bindings& bindings) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const auto name = text.substr(open + 2, close - open - 2);
    if (!is_placeholder_name(name)) {
      out.append(text.substr(pos, open + 2 - pos));
      pos = open + 2;
      continue;
    }
    auto it = bindings.find(std::string(name));
    if (it == bindings.end()) {
      throw InvalidArgument("unbound placeholder {{" + std::string(name) +
                            "}}");
    }
    out.append(text.substr(pos, open - pos));
    out += it->second;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

std::vector<std::string> PromptTemplate::required_for(PromptKind kind) {
  switch (kind) {
    case PromptKind::kSeedGeneration:
      return {"entities", "format", "sentence"};
    case PromptKind::kAbstraction:
      return {"format", "inventory", "sentences"};
    case PromptKind::kGuidance:
      return {"conditions", "count", "format", "inventory"};
    case PromptKind::kNaive:
      return {"count", "entities", "format"};
  }
  return {};
}

PromptTemplate::PromptTemplate(PromptKind kind, std::string system_text,
                               std::string user_text)
    : kind_(kind),
      system_text_(std::move(system_text)),
      user_text_(std::move(user_text)) {
  std::set<std::string> names;
  for (const auto& n : find_placeholders(system_text_)) names.insert(n);
  for (const auto& n : find_placeholders(user_text_)) names.insert(n);
  required_.assign(names.begin(), names.end());
  for (const auto& need : required_for(kind_)) {
    if (!names.count(need)) {
      throw InvalidArgument(std::string(kind_name(kind_)) +
                            " template lacks placeholder {{" + need + "}}");
    }
  }
  hash_ = llm::sha256_hex(serialize());
}

PromptTemplate PromptTemplate::parse(PromptKind kind, std::string_view text) {
  const auto sys = text.find("[system]\n");
  const auto usr = text.find("[user]\n");
  if (usr == std::string_view::npos) {
    throw InvalidArgument(std::string(kind_name(kind)) +
                          " template has no [user] section");
  }
  std::string system;
  if (sys != std::string_view::npos) {
    if (sys > usr) {
      throw InvalidArgument(std::string(kind_name(kind)) +
                            " template: [system] must precede [user]");
    }
    system = strip_newlines(text.substr(sys + 9, usr - sys - 9));
  }
  return PromptTemplate(kind, std::move(system),
                        strip_newlines(text.substr(usr + 7)));
}

std::string PromptTemplate::serialize() const {
  std::string out;
  if (!system_text_.empty()) out += "[system]\n" + system_text_ + "\n";
  out += "[user]\n" + user_text_ + "\n";
  return out;
}

std::vector<llm::Message> PromptTemplate::render(
    const Bindings& bindings) const {
  std::vector<llm::Message> out;
  if (!system_text_.empty()) {
    out.push_back({"system", render_text(system_text_, bindings)});
  }
  out.push_back({"user", render_text(user_text_, bindings)});
  return out;
}

TemplateSet TemplateSet::defaults() {
  static const TemplateSet set = [] {
    TemplateSet s;
    const std::pair<PromptKind, const char*> sources[] = {
        {PromptKind::kSeedGeneration, kDefaultSeedGenerationTemplate},
        {PromptKind::kAbstraction, kDefaultAbstractionTemplate},
        {PromptKind::kGuidance, kDefaultGuidanceTemplate},
        {PromptKind::kNaive, kDefaultNaiveTemplate}};
    for (const auto& [kind, text] : sources) {
      s.templates_.emplace(kind, PromptTemplate::parse(kind, text));
    }
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet s;
  for (PromptKind kind : kAllKinds) {
    const auto file = dir / (std::string(kind_name(kind)) + ".tmpl");
    s.templates_.emplace(kind,
                         PromptTemplate::parse(kind, corpus::read_file(file)));
  }
  return s;
}

const PromptTemplate& TemplateSet::get(PromptKind kind) const {
  return templates_.at(kind);
}

std::string TemplateSet::hash() const {
  std::string joined;
  for (const auto& [kind, tmpl] : templates_) {
    joined += std::string(kind_name(kind)) + "=" + tmpl.hash() + "\n";
  }
  return llm::sha256_hex(joined);
}

// ---------------------------------------------------------------------------

std::vector<llm::Message> build_seed_generation_prompt(
    const Sentence& seed, std::size_t variants, const TemplateSet& templates) {
  require_entities(seed);
  if (variants == 0) throw InvalidArgument("variant count must be >= 1");
  return templates.get(PromptKind::kSeedGeneration)
      .render({{"sentence", corpus::sentence_text(seed)},
               {"entities", entity_lines(seed)},
               {"count", std::to_string(variants)},
               {"format", kCandidateFormat}});
}

std::vector<llm::Message> build_abstraction_prompt(
    const Sentence& seed, const std::vector<Sentence>& variants,
    const corpus::Inventory& inventory, const TemplateSet& templates) {
  if (variants.empty()) {
    throw InvalidArgument("abstraction prompt needs at least one variant");
  }
  require_inventory(seed, inventory);
  for (const auto& v : variants) require_inventory(v, inventory);

  std::string block = "Original: " + corpus::sentence_text(seed) +
                      "\n  Entities: " + entity_inline(seed);
  for (std::size_t i = 0; i < variants.size(); ++i) {
    block += "\nVariant " + std::to_string(i + 1) + ": " +
             corpus::sentence_text(variants[i]) +
             "\n  Entities: " + entity_inline(variants[i]);
  }
  return templates.get(PromptKind::kAbstraction)
      .render({{"sentences", block},
               {"inventory", inventory_line(inventory)},
               {"format", kAbstractionFormat}});
}

std::vector<llm::Message> build_guidance_prompt(
    const AbstractionRecord& record, const corpus::Inventory& inventory,
    std::size_t m, const TemplateSet& templates) {
  if (m == 0) throw InvalidArgument("guidance prompt needs m >= 1");
  if (record.context_summary.empty() || record.structure_description.empty() ||
      record.entity_roles.empty()) {
    throw InvalidArgument("abstraction record is incomplete");
  }
  std::string conditions = "1. Context: " + record.context_summary +
                           "\n2. Structure: " + record.structure_description;
  std::size_t n = 3;
  for (const auto& label : inventory.labels()) {
    auto it = record.entity_roles.find(label);
    if (it == record.entity_roles.end()) continue;
    conditions += "\n" + std::to_string(n++) + ". Entities of type " + label +
                  " must play this role: " + it->second;
  }
  for (const auto& [type, role] : record.entity_roles) {
    if (!inventory.contains(type)) {
      throw InvalidArgument("abstraction role for unknown type '" + type +
                            "'");
    }
  }
  return templates.get(PromptKind::kGuidance)
      .render({{"conditions", conditions},
               {"inventory", inventory_line(inventory)},
               {"count", std::to_string(m)},
               {"format", kCandidateFormat}});
}

std::vector<llm::Message> build_naive_prompt(const Sentence& seed,
                                             std::size_t m,
                                             const TemplateSet& templates) {
  require_entities(seed);
  if (m == 0) throw InvalidArgument("naive prompt needs m >= 1");
  return templates.get(PromptKind::kNaive)
      .render({{"entities", entity_lines(seed)},
               {"count", std::to_string(m)},
               {"format", kCandidateFormat}});
}

// ---------------------------------------------------------------------------

std::optional<json> extract_json(std::string_view reply) {
  const auto open = reply.find("```");
  if (open != std::string_view::npos) {
    auto body_start = reply.find('\n', open + 3);
    if (body_start == std::string_view::npos) return std::nullopt;
    const auto tag = trim(reply.substr(open + 3, body_start - open - 3));
    if (!tag.empty() && tag != "json" && tag != "JSON") return std::nullopt;
    ++body_start;
    const auto close = reply.find("```", body_start);
    if (close == std::string_view::npos) return std::nullopt;
    json j = json::parse(reply.substr(body_start, close - body_start), nullptr,
                         false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  }
  json j = json::parse(trim(reply), nullptr, false);
  if (j.is_discarded() || !(j.is_object() || j.is_array())) {
    return std::nullopt;
  }
  return j;
}

AbstractionRecord parse_abstraction(std::string_view text,
                                    const corpus::Inventory& inventory) {
  const auto payload = extract_json(text);
  if (!payload || !payload->is_object()) {
    throw ReplyFormatError("format", "abstraction reply is not a JSON object");
  }
  const json& j = *payload;
  AbstractionRecord rec;
  auto text_field = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_string() ||
        trim(j[name].get<std::string>()).empty()) {
      throw ReplyFormatError(name, std::string("abstraction reply is missing '") +
                                       name + "'");
    }
    return trim(j[name].get<std::string>());
  };
  rec.context_summary = text_field("context");
  rec.structure_description = text_field("structure");
  if (!j.contains("roles") || !j["roles"].is_object()) {
    throw ReplyFormatError("roles", "abstraction reply is missing 'roles'");
  }
  for (const auto& [type, role] : j["roles"].items()) {
    if (!role.is_string() || trim(role.get<std::string>()).empty()) {
      throw ReplyFormatError("roles", "role for '" + type + "' is not text");
    }
    if (!inventory.contains(type)) {
      rec.warnings.push_back("dropped role for unknown entity type '" + type +
                             "'");
      continue;
    }
    rec.entity_roles[type] = trim(role.get<std::string>());
  }
  if (rec.entity_roles.empty()) {
    throw ReplyFormatError("roles",
                           "abstraction reply has no role for a known type");
  }
  return rec;
}

Alignment align_entities(
    const std::vector<std::string>& tokens,
    const std::vector<std::pair<std::string, std::string>>& claims) {
  Alignment out;
  std::vector<std::vector<std::string>> surfaces;
  std::vector<std::vector<std::size_t>> occurrences;
  for (const auto& [surface, type] : claims) {
    auto words = corpus::tokenize(surface);
    std::vector<std::size_t> starts;
    if (!words.empty() && words.size() <= tokens.size()) {
      for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i) {
        if (std::equal(words.begin(), words.end(), tokens.begin() + i)) {
          starts.push_back(i);
        }
      }
    }
    if (starts.empty()) {
      out.reason = kReasonSurfaceMissing;
      return out;
    }
    surfaces.push_back(std::move(words));
    occurrences.push_back(std::move(starts));
  }

  std::vector<bool> taken(tokens.size(), false);
  for (std::size_t c = 0; c < claims.size(); ++c) {
    const std::size_t len = surfaces[c].size();
    bool placed = false;
    for (std::size_t start : occurrences[c]) {
      if (std::any_of(taken.begin() + start, taken.begin() + start + len,
                      [](bool t) { return t; })) {
        continue;
      }
      std::fill(taken.begin() + start, taken.begin() + start + len, true);
      out.spans.push_back({start, start + len, claims[c].second});
      placed = true;
      break;
    }
    if (!placed) {
      out.spans.clear();
      out.reason = kReasonOverlap;
      return out;
    }
  }
  std::sort(out.spans.begin(), out.spans.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  return out;
}

std::vector<Candidate> parse_candidates(std::string_view text,
                                        const corpus::Inventory& inventory,
                                        corpus::Method method,
                                        std::string_view id_stem,
                                        std::optional<std::string> parent) {
  auto rejected = [](std::string raw, std::string_view reason) {
    Candidate c;
    c.raw_text = std::move(raw);
    c.reason = reason;
    return c;
  };

  const auto payload = extract_json(text);
  std::vector<json> items;
  if (payload && payload->is_array()) {
    items.assign(payload->begin(), payload->end());
  } else if (payload && payload->is_object() && payload->contains("sentence")) {
    items.push_back(*payload);
  } else {
    return {rejected(std::string(text), kReasonFormat)};
  }

  std::vector<Candidate> out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const json& item = items[k];
    if (!item.is_object() || !item.contains("sentence") ||
        !item["sentence"].is_string()) {
      out.push_back(rejected(item.dump(), kReasonFormat));
      continue;
    }
    Candidate cand;
    cand.raw_text = item["sentence"].get<std::string>();
    bool malformed = false;
    if (item.contains("entities")) {
      const json& ents = item["entities"];
      if (!ents.is_array()) malformed = true;
      for (const auto& e : ents.is_array() ? ents : json::array()) {
        if (!e.is_object() || !e.contains("text") || !e["text"].is_string() ||
            !e.contains("type") || !e["type"].is_string()) {
          malformed = true;
          break;
        }
        cand.claimed_entities.emplace_back(e["text"].get<std::string>(),
                                           e["type"].get<std::string>());
      }
    }
    const auto words = corpus::tokenize(cand.raw_text);
    if (malformed || words.empty()) {
      cand.reason = kReasonFormat;
      out.push_back(std::move(cand));
      continue;
    }
    if (cand.claimed_entities.empty()) {
      cand.reason = kReasonNoEntities;
      out.push_back(std::move(cand));
      continue;
    }
    if (std::any_of(cand.claimed_entities.begin(), cand.claimed_entities.end(),
                    [&](const auto& c) { return !inventory.contains(c.second); })) {
      cand.reason = kReasonUnknownType;
      out.push_back(std::move(cand));
      continue;
    }
    auto alignment = align_entities(words, cand.claimed_entities);
    if (!alignment.reason.empty()) {
      cand.reason = alignment.reason;
      out.push_back(std::move(cand));
      continue;
    }
    Sentence& s = cand.sentence;
    s.id = std::string(corpus::method_name(method)) + ":" +
           std::string(id_stem) + ":" + std::to_string(k);
    for (std::size_t i = 0; i < words.size(); ++i) {
      s.tokens.push_back({words[i], i});
    }
    s.entities = std::move(alignment.spans);
    s.provenance = corpus::Provenance{method, parent};
    if (auto problem = corpus::check_sentence(s, &inventory)) {
      // Accepted candidates must form a valid Sentence.
      cand.reason = kReasonFormat;
      cand.sentence = {};
      out.push_back(std::move(cand));
      continue;
    }
    cand.verdict = Verdict::kAccepted;
    out.push_back(std::move(cand));
  }
  return out;
}

}  // namespace gda::prompt
