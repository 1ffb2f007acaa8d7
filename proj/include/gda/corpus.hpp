#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gda::corpus {

struct Token {
  std::string text;
  std::size_t index = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

// Half-open token range [start, end) carrying an entity label.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string entity_type;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

enum class Method { kSeed, kEda, kWordnet, kNaive, kGda };

std::string_view method_name(Method method);
// Throws InvalidArgument for names outside {seed, eda, wordnet, naive, gda}.
Method parse_method(std::string_view name);

struct Provenance {
  Method method = Method::kSeed;
  std::optional<std::string> parent_id;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::vector<EntitySpan> entities;  // sorted by start
  Provenance provenance;

  std::size_t size() const { return tokens.size(); }
  std::vector<std::string> words() const;
  std::vector<std::string> span_text(const EntitySpan& span) const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

// Ordered unique label list.
class Inventory {
 public:
  Inventory() = default;
  explicit Inventory(std::vector<std::string> labels);

  // Appends when absent; returns true if added.
  bool add(const std::string& label);
  bool contains(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  friend bool operator==(const Inventory&, const Inventory&) = default;

 private:
  std::vector<std::string> labels_;
};

struct Dataset {
  std::string name;
  Inventory inventory;
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
};

using TagSequence = std::vector<std::string>;

// Returns a description of the first violated Sentence invariant, if any.
// When inventory is given, entity types must belong to it.
std::optional<std::string> check_sentence(const Sentence& sentence,
                                          const Inventory* inventory = nullptr);

// Two-column CoNLL (token, BIO tag), sentences separated by blank lines.
// Sentence ids are id_prefix followed by the 0-based ordinal.
std::vector<Sentence> parse_conll(std::string_view text,
                                  std::string_view id_prefix = "");
std::string serialize_conll(const std::vector<Sentence>& sentences);

TagSequence encode_bio(const Sentence& sentence);
std::vector<EntitySpan> decode_bio(std::size_t token_count,
                                   const TagSequence& tags);

// Reads a dataset from a CoNLL file (loaded as the train split) or from a
// directory holding {train,dev,test}.{conll,txt}. Ids are
// <name>:<split>:<ordinal>. The inventory lists labels in first-seen order.
Dataset load_dataset(const std::filesystem::path& path, std::string name);

std::vector<Sentence> sample_seeds(const Dataset& dataset, std::size_t n,
                                   std::uint64_t rng_seed);

// Whitespace split, then trailing .,;:?! peeled into their own tokens.
std::vector<std::string> tokenize(std::string_view text);

// Space-joined tokens with .,;:?! attached to the preceding token.
std::string sentence_text(const Sentence& sentence);

// Lowercase, whitespace-collapsed text; the dedupe key for generated output.
std::string normalize_text(std::string_view text);

std::string ascii_lower(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace gda::corpus
