#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gda/corpus.hpp"

namespace gda::rules {

// Lowercase lemma -> ordered synonyms. Lookups are case-insensitive.
class SynonymLexicon {
 public:
  // Merges into an existing entry, keeping first-seen order and dropping
  // duplicates and self-synonyms.
  void add(std::string_view lemma, const std::vector<std::string>& synonyms);

  // Empty span when the word is unknown.
  std::span<const std::string> lookup(std::string_view word) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, std::vector<std::string>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

// TSV rows `lemma<TAB>syn1|syn2|...`. Blank lines and lines starting with
// '#' are skipped. Rows with an empty synonym list are accepted and ignored.
SynonymLexicon parse_lexicon(std::string_view text);
SynonymLexicon load_lexicon(const std::filesystem::path& path);

struct EdaConfig {
  double alpha_sr = 0.1;
  double alpha_ri = 0.1;
  double alpha_rs = 0.1;
  double p_rd = 0.1;
  std::size_t synonym_pool = 10;
  std::size_t n_aug = 3;

  // Throws InvalidArgument when a fraction leaves [0, 1] or the pool is 0.
  void validate() const;
};

struct RuleVariant {
  corpus::Sentence sentence;
  // Set when the output is a verbatim copy of the seed (nothing eligible).
  bool unchanged = false;
};

// Easy Data Augmentation: synonym replacement, random insertion, random swap
// and random deletion, restricted to tokens outside entity spans. Outputs are
// ids eda:<seed-id>:<k>; results depend only on (seed, lexicon, cfg, rng_seed).
std::vector<RuleVariant> eda_augment(const corpus::Sentence& seed,
                                     const SynonymLexicon& lexicon,
                                     const EdaConfig& cfg,
                                     std::uint64_t rng_seed);

// Synonym replacement only. Each output replaces
// max(1, floor(replace_fraction * non-entity tokens)) distinct words.
std::vector<RuleVariant> wordnet_augment(const corpus::Sentence& seed,
                                         const SynonymLexicon& lexicon,
                                         std::size_t n_aug, std::size_t pool,
                                         std::uint64_t rng_seed,
                                         double replace_fraction = 0.1);

enum class RuleMethod { kEda, kWordnet };

struct RuleJob {
  const corpus::Sentence* seed = nullptr;
  std::size_t n_aug = 0;
};

// Runs one augmentation per job. The parallel kernel spreads jobs over an
// OpenMP team; the serial version is the reference it is tested against.
std::vector<std::vector<RuleVariant>> augment_batch(
    std::span<const RuleJob> jobs, RuleMethod method,
    const SynonymLexicon& lexicon, const EdaConfig& cfg,
    std::uint64_t rng_seed, int threads = 0);
std::vector<std::vector<RuleVariant>> augment_batch_serial(
    std::span<const RuleJob> jobs, RuleMethod method,
    const SynonymLexicon& lexicon, const EdaConfig& cfg,
    std::uint64_t rng_seed);

}  // namespace gda::rules
