#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gda/corpus.hpp"
#include "gda/llm_gateway.hpp"
#include "gda/prompt_forge.hpp"
#include "gda/rule_augment.hpp"
#include "json.hpp"

namespace gda::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitShortfall = 2;
inline constexpr int kExitBackendFailure = 3;

struct RunConfig {
  corpus::Method method = corpus::Method::kGda;
  std::size_t seed_count = 200;
  std::size_t target_augmented = 600;
  std::size_t candidates_per_seed = 3;  // m: sentences requested per prompt
  std::size_t variants_per_seed = 3;    // seed-generation rewrites (GDA)
  std::size_t max_retries = 2;          // extra attempts per LLM stage
  std::string model_id = "gpt-3.5-turbo-0125";
  double temperature = 1.0;
  std::optional<int> max_tokens;
  std::uint64_t rng_seed = 42;
  llm::BackendKind backend = llm::BackendKind::kReplay;
  rules::EdaConfig eda;
  int jobs = 1;  // worker threads; never affects outputs

  void validate() const;
  // Snapshot stored in the manifest. Omits jobs.
  nlohmann::json to_json() const;
};

struct RunInputs {
  const corpus::Dataset* dataset = nullptr;
  llm::CompletionBackend* backend = nullptr;       // gda, naive
  const prompt::TemplateSet* templates = nullptr;  // gda, naive
  const rules::SynonymLexicon* lexicon = nullptr;  // eda, wordnet
};

enum class RunStatus { kOk, kShortfall };

struct RunResult {
  RunStatus status = RunStatus::kOk;
  std::vector<corpus::Sentence> seeds;
  std::vector<corpus::Sentence> selected;  // the augmentation delta
  nlohmann::json manifest;
  std::string message;  // shortfall description
  std::chrono::milliseconds wall_clock{0};
};

class ShortfallError : public Error {
 public:
  ShortfallError(std::size_t available, std::size_t target)
      : Error("shortfall: " + std::to_string(available) +
              " usable sentences for a target of " + std::to_string(target)),
        available_(available),
        target_(target) {}
  std::size_t available() const { return available_; }
  std::size_t target() const { return target_; }

 private:
  std::size_t available_;
  std::size_t target_;
};

// Per seed: seed-generation -> abstraction -> guidance. Backend errors
// (transport, replay miss, mock exhausted) propagate as llm::BackendError.
RunResult run_gda(const RunConfig& config, const RunInputs& inputs);
// Per seed: one naive prompt with entity surfaces and types only.
RunResult run_naive(const RunConfig& config, const RunInputs& inputs);
// EDA or WordNet-style replacement; no LLM stages.
RunResult run_rule(const RunConfig& config, const RunInputs& inputs);
// Dispatches on config.method.
RunResult run(const RunConfig& config, const RunInputs& inputs);

// Accepted candidates of one seed, in generation order.
struct SeedPool {
  std::string seed_id;
  std::vector<corpus::Sentence> candidates;
};

// Dedupes by normalized text (first occurrence wins in seed order, then
// generation order), then takes candidates round-robin across seeds until
// target is reached. Throws ShortfallError when too few remain.
std::vector<corpus::Sentence> select_responses(
    const std::vector<SeedPool>& pool, std::size_t target);

// Seeds followed by the delta as CoNLL. Every sentence is re-validated;
// eda/wordnet outputs must keep their parent's entity surfaces verbatim.
std::string training_set_text(const std::vector<corpus::Sentence>& seeds,
                              const std::vector<corpus::Sentence>& delta,
                              const corpus::Inventory& inventory);
void export_training_set(const std::vector<corpus::Sentence>& seeds,
                         const std::vector<corpus::Sentence>& delta,
                         const corpus::Inventory& inventory,
                         const std::filesystem::path& path);

// Structural and cross-reference checks on a manifest; empty when valid.
std::vector<std::string> validate_manifest(const nlohmann::json& manifest);

// Canonical manifest bytes (2-space indent, trailing newline).
std::string manifest_text(const nlohmann::json& manifest);

}  // namespace gda::pipeline
