#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace gda::diversity {

enum class Smoothing { kNone, kAddEpsilon, kFloorCounts };

std::string_view smoothing_name(Smoothing s);
Smoothing parse_smoothing(std::string_view name);

inline constexpr int kMaxOrder = 8;

struct BleuConfig {
  int max_n = 4;
  Smoothing smoothing = Smoothing::kAddEpsilon;
  double epsilon = 1e-9;

  // Uniform weights 1/max_n.
  double weight() const { return 1.0 / max_n; }
  // Throws InvalidArgument unless 1 <= max_n <= kMaxOrder and epsilon > 0.
  void validate() const;
};

// Clipped n-gram matches and candidate n-gram totals per order.
struct BleuStats {
  std::array<std::int64_t, kMaxOrder> matches{};
  std::array<std::int64_t, kMaxOrder> totals{};
  std::int64_t candidate_length = 0;
  std::int64_t reference_length = 0;

  friend bool operator==(const BleuStats&, const BleuStats&) = default;
};

// Score from stats. Smoothing applies only to orders with zero matches:
// add_epsilon uses epsilon / max(total, 1), floor_counts uses 1 / (2^k total)
// for the k-th such order. Zero unigram matches always score 0.
double score_from_stats(const BleuStats& stats, const BleuConfig& cfg);

// Straightforward counter over token strings; the reference the fast kernel
// is checked against. Throws InvalidArgument on empty input.
BleuStats bleu_stats(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference, int max_n = 4);

double bleu4(const std::vector<std::string>& candidate,
             const std::vector<std::string>& reference,
             const BleuConfig& cfg = {});

// Corpus tokenizer, lowercased.
std::vector<std::string> scoring_tokens(std::string_view text);

// Sorted n-gram ids of one sentence, per order.
struct Profile {
  std::int64_t length = 0;
  std::array<std::vector<std::uint32_t>, kMaxOrder> grams;
};

// Interns tokens and n-grams to dense ids so that profiles compare by a
// merge of sorted integer lists. Not thread-safe; build profiles first,
// then match them from any number of threads.
class NgramIndex {
 public:
  explicit NgramIndex(int max_n = 4);
  Profile profile(const std::vector<std::string>& tokens);
  int max_n() const { return max_n_; }

 private:
  int max_n_;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  // orders 2..max_n: (prefix gram id, last token id) -> gram id
  std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> grams_;
};

BleuStats match_profiles(const Profile& candidate, const Profile& reference,
                         int max_n);

struct PairRecord {
  std::string method;
  std::string seed_id;
  std::string aug_id;
  std::string seed;       // reference text
  std::string augmented;  // candidate text
};

// Scores every pair; the parallel kernel interns once and spreads the
// profile matching over an OpenMP team. threads <= 0 uses the runtime default.
std::vector<double> score_pairs(const std::vector<PairRecord>& pairs,
                                const BleuConfig& cfg, int threads = 0);
// One pair at a time through bleu_stats.
std::vector<double> score_pairs_serial(const std::vector<PairRecord>& pairs,
                                       const BleuConfig& cfg);

struct ReportRow {
  std::string method;
  std::string seed_id;
  std::string aug_id;
  double bleu4 = 0.0;
};

struct MethodSummary {
  std::string method;
  std::size_t pairs = 0;
  double mean = 0.0;
  double median = 0.0;
};

struct MethodDelta {
  std::string method;
  std::string baseline;
  double relative = 0.0;  // (mean(method) - mean(baseline)) / mean(baseline)
};

struct DiversityReport {
  BleuConfig config;
  std::vector<ReportRow> rows;
  std::vector<MethodSummary> methods;  // first-seen order
  std::vector<MethodDelta> deltas;     // every ordered pair of methods
  std::vector<std::string> warnings;
};

// Pairs with empty text are omitted with a warning. Deltas against a
// baseline whose mean is 0 are omitted with a warning.
DiversityReport diversity_report(const std::vector<PairRecord>& pairs,
                                 const BleuConfig& cfg = {}, int threads = 0);

std::string report_csv(const DiversityReport& report);
nlohmann::json report_json(const DiversityReport& report);

// Pairs every selected sentence of a run manifest with its seed. Entries
// whose seed is not listed are skipped and reported in `warnings`.
std::vector<PairRecord> pairs_from_manifest(const nlohmann::json& manifest,
                                            std::vector<std::string>* warnings);
// JSON lines of {method, seed_id, aug_id, seed, augmented}.
std::vector<PairRecord> parse_pairs_jsonl(std::string_view text);
std::vector<PairRecord> load_pairs(const std::filesystem::path& path);

}  // namespace gda::diversity
