#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gda/corpus.hpp"
#include "gda/llm_gateway.hpp"

namespace gda::testing {

struct CorpusShape {
  std::size_t sentences = 50;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 20;
  double entity_rate = 0.3;  // chance that a position opens a span
  std::size_t max_span = 3;
  std::vector<std::string> inventory{"PER", "ORG", "LOC", "MISC"};
};

// Random sentences over a small vocabulary. Entity words are drawn from the
// same vocabulary as context words, so surfaces can repeat outside spans.
std::vector<corpus::Sentence> random_sentences(std::mt19937_64& rng,
                                               const CorpusShape& shape,
                                               const std::string& id_prefix);

corpus::Dataset random_dataset(std::mt19937_64& rng, const CorpusShape& shape,
                               const std::string& name);

// Synonym lexicon covering part of the random vocabulary, including
// multi-word synonyms.
std::string random_lexicon_tsv(std::mt19937_64& rng);

// Stand-in LLM: answers every stage of the GDA and naive chains with
// well-formed replies derived from the seed named in the request tag.
// Candidate sentences are unique per (seed, attempt, k).
class SyntheticLlm {
 public:
  explicit SyntheticLlm(const corpus::Dataset& dataset);
  std::string operator()(const llm::CompletionRequest& request) const;

 private:
  std::map<std::string, const corpus::Sentence*> by_id_;
};

}  // namespace gda::testing
