#include "gda/diversity.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "gda/corpus.hpp"
#include "gda/error.hpp"

namespace gda::diversity {

using nlohmann::json;

std::string_view smoothing_name(Smoothing s) {
  switch (s) {
    case Smoothing::kNone:
      return "none";
    case Smoothing::kAddEpsilon:
      return "add_epsilon";
    case Smoothing::kFloorCounts:
      return "floor_counts";
  }
  return "none";
}

Smoothing parse_smoothing(std::string_view name) {
  if (name == "none") return Smoothing::kNone;
  if (name == "add_epsilon") return Smoothing::kAddEpsilon;
  if (name == "floor_counts") return Smoothing::kFloorCounts;
  throw InvalidArgument("unknown smoothing '" + std::string(name) +
                        "' (expected none, add_epsilon or floor_counts)");
}

void BleuConfig::validate() const {
  if (max_n < 1 || max_n > kMaxOrder) {
    throw InvalidArgument("max_n must be in [1, " + std::to_string(kMaxOrder) +
                          "]");
  }
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
}

double score_from_stats(const BleuStats& stats, const BleuConfig& cfg) {
  if (stats.candidate_length <= 0 || stats.reference_length <= 0) {
    throw InvalidArgument("BLEU needs non-empty candidate and reference");
  }
  if (stats.matches[0] == 0) return 0.0;
  const double w = cfg.weight();
  double log_sum = 0.0;
  int zeros = 0;
  for (int n = 0; n < cfg.max_n; ++n) {
    const auto m = stats.matches[n];
    const auto t = std::max<std::int64_t>(stats.totals[n], 1);
    double p = 0.0;
    if (m > 0) {
      p = static_cast<double>(m) / static_cast<double>(stats.totals[n]);
    } else {
      switch (cfg.smoothing) {
        case Smoothing::kNone:
          return 0.0;
        case Smoothing::kAddEpsilon:
          p = cfg.epsilon / static_cast<double>(t);
          break;
        case Smoothing::kFloorCounts:
          ++zeros;
          p = 1.0 / (std::ldexp(1.0, zeros) * static_cast<double>(t));
          break;
      }
    }
    log_sum += w * std::log(p);
  }
  const double c = static_cast<double>(stats.candidate_length);
  const double r = static_cast<double>(stats.reference_length);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

BleuStats bleu_stats(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference, int max_n) {
  if (candidate.empty() || reference.empty()) {
    throw InvalidArgument("BLEU needs non-empty candidate and reference");
  }
  if (max_n < 1 || max_n > kMaxOrder) throw InvalidArgument("bad max_n");
  BleuStats s;
  s.candidate_length = static_cast<std::int64_t>(candidate.size());
  s.reference_length = static_cast<std::int64_t>(reference.size());
  for (int n = 1; n <= max_n; ++n) {
    auto count = [n](const std::vector<std::string>& toks) {
      std::map<std::vector<std::string>, std::int64_t> c;
      for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        ++c[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
      }
      return c;
    };
    const auto cand = count(candidate);
    const auto ref = count(reference);
    for (const auto& [gram, k] : cand) {
      s.totals[n - 1] += k;
      auto it = ref.find(gram);
      if (it != ref.end()) s.matches[n - 1] += std::min(k, it->second);
    }
  }
  return s;
}

double bleu4(const std::vector<std::string>& candidate,
             const std::vector<std::string>& reference, const BleuConfig& cfg) {
  cfg.validate();
  return score_from_stats(bleu_stats(candidate, reference, cfg.max_n), cfg);
}

std::vector<std::string> scoring_tokens(std::string_view text) {
  auto tokens = corpus::tokenize(text);
  for (auto& t : tokens) t = corpus::ascii_lower(t);
  return tokens;
}

NgramIndex::NgramIndex(int max_n) : max_n_(max_n) {
  if (max_n < 1 || max_n > kMaxOrder) throw InvalidArgument("bad max_n");
  grams_.resize(static_cast<std::size_t>(max_n - 1));
}

Profile NgramIndex::profile(const std::vector<std::string>& tokens) {
  Profile p;
  p.length = static_cast<std::int64_t>(tokens.size());
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto [it, fresh] =
        vocab_.try_emplace(t, static_cast<std::uint32_t>(vocab_.size()));
    ids.push_back(it->second);
  }
  std::vector<std::uint32_t> prev = ids;
  p.grams[0] = ids;
  std::sort(p.grams[0].begin(), p.grams[0].end());
  for (int n = 2; n <= max_n_ && static_cast<std::size_t>(n) <= ids.size();
       ++n) {
    auto& table = grams_[static_cast<std::size_t>(n - 2)];
    std::vector<std::uint32_t> cur(ids.size() - n + 1);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const std::uint64_t key =
          (static_cast<std::uint64_t>(prev[i]) << 32) | ids[i + n - 1];
      auto [it, fresh] =
          table.try_emplace(key, static_cast<std::uint32_t>(table.size()));
      cur[i] = it->second;
    }
    prev = cur;
    std::sort(cur.begin(), cur.end());
    p.grams[static_cast<std::size_t>(n - 1)] = std::move(cur);
  }
  return p;
}

BleuStats match_profiles(const Profile& candidate, const Profile& reference,
                         int max_n) {
  BleuStats s;
  s.candidate_length = candidate.length;
  s.reference_length = reference.length;
  for (int n = 0; n < max_n; ++n) {
    const auto& a = candidate.grams[n];
    const auto& b = reference.grams[n];
    s.totals[n] = static_cast<std::int64_t>(a.size());
    std::size_t i = 0, j = 0;
    std::int64_t m = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) {
        ++i;
      } else if (b[j] < a[i]) {
        ++j;
      } else {
        const auto v = a[i];
        std::int64_t ca = 0, cb = 0;
        while (i < a.size() && a[i] == v) ++i, ++ca;
        while (j < b.size() && b[j] == v) ++j, ++cb;
        m += std::min(ca, cb);
      }
    }
    s.matches[n] = m;
  }
  return s;
}

namespace {

std::pair<std::vector<std::string>, std::vector<std::string>> pair_tokens(
    const PairRecord& p) {
  auto cand = scoring_tokens(p.augmented);
  auto ref = scoring_tokens(p.seed);
  if (cand.empty() || ref.empty()) {
    throw InvalidArgument("pair " + p.aug_id + " has an empty sentence");
  }
  return {std::move(cand), std::move(ref)};
}

}  // namespace

std::vector<double> score_pairs(const std::vector<PairRecord>& pairs,
                                const BleuConfig& cfg, int threads) {
  cfg.validate();
  NgramIndex index(cfg.max_n);
  std::vector<Profile> cand(pairs.size()), ref(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [c, r] = pair_tokens(pairs[i]);
    cand[i] = index.profile(c);
    ref[i] = index.profile(r);
  }
  std::vector<double> out(pairs.size());
  const int team = threads > 0 ? threads : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static) num_threads(team)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = score_from_stats(match_profiles(cand[i], ref[i], cfg.max_n), cfg);
  }
  return out;
}

std::vector<double> score_pairs_serial(const std::vector<PairRecord>& pairs,
                                       const BleuConfig& cfg) {
  cfg.validate();
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto [c, r] = pair_tokens(p);
    out.push_back(score_from_stats(bleu_stats(c, r, cfg.max_n), cfg));
  }
  return out;
}

DiversityReport diversity_report(const std::vector<PairRecord>& pairs,
                                 const BleuConfig& cfg, int threads) {
  cfg.validate();
  DiversityReport report;
  report.config = cfg;
  std::vector<PairRecord> usable;
  for (const auto& p : pairs) {
    if (scoring_tokens(p.augmented).empty() || scoring_tokens(p.seed).empty()) {
      report.warnings.push_back("pair " + p.method + "/" + p.aug_id +
                                " omitted: empty sentence");
      continue;
    }
    usable.push_back(p);
  }
  const auto scores = score_pairs(usable, cfg, threads);

  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> by_method;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const auto& p = usable[i];
    report.rows.push_back({p.method, p.seed_id, p.aug_id, scores[i]});
    auto [it, fresh] = by_method.try_emplace(p.method);
    if (fresh) order.push_back(p.method);
    it->second.push_back(scores[i]);
  }
  for (const auto& name : order) {
    auto values = by_method[name];
    double sum = 0.0;
    for (double v : values) sum += v;
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size();
    const double median =
        k % 2 ? values[k / 2] : (values[k / 2 - 1] + values[k / 2]) / 2.0;
    report.methods.push_back(
        {name, k, sum / static_cast<double>(k), median});
  }
  for (const auto& a : report.methods) {
    for (const auto& b : report.methods) {
      if (a.method == b.method) continue;
      if (b.mean == 0.0) {
        report.warnings.push_back("delta " + a.method + " vs " + b.method +
                                  " omitted: baseline mean is 0");
        continue;
      }
      report.deltas.push_back({a.method, b.method, (a.mean - b.mean) / b.mean});
    }
  }
  return report;
}

std::string report_csv(const DiversityReport& report) {
  std::string out = "method,seed_id,aug_id,bleu4\n";
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{:.17g}\n", field(r.method), field(r.seed_id),
                       field(r.aug_id), r.bleu4);
  }
  return out;
}

json report_json(const DiversityReport& report) {
  json weights = json::array();
  for (int n = 0; n < report.config.max_n; ++n) {
    weights.push_back(report.config.weight());
  }
  json methods = json::array();
  for (const auto& m : report.methods) {
    methods.push_back({{"method", m.method},
                       {"pairs", m.pairs},
                       {"mean", m.mean},
                       {"median", m.median}});
  }
  json deltas = json::array();
  for (const auto& d : report.deltas) {
    deltas.push_back({{"method", d.method},
                      {"baseline", d.baseline},
                      {"relative", d.relative}});
  }
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", r.method},
                    {"seed_id", r.seed_id},
                    {"aug_id", r.aug_id},
                    {"bleu4", r.bleu4}});
  }
  return json{{"schema", "gda-diversity-report/1"},
              {"config",
               {{"max_n", report.config.max_n},
                {"smoothing", smoothing_name(report.config.smoothing)},
                {"epsilon", report.config.epsilon},
                {"weights", weights}}},
              {"methods", methods},
              {"deltas", deltas},
              {"rows", rows},
              {"warnings", report.warnings}};
}

std::vector<PairRecord> pairs_from_manifest(const json& manifest,
                                            std::vector<std::string>* warnings) {
  if (!manifest.is_object() || !manifest.contains("seeds") ||
      !manifest.contains("selected") || !manifest.contains("config")) {
    throw InvalidArgument("not a run manifest (needs config, seeds, selected)");
  }
  const std::string method = manifest["config"].value("method", "");
  std::map<std::string, std::string> seed_text;
  for (const auto& s : manifest["seeds"]) {
    seed_text[s.at("id").get<std::string>()] = s.at("text").get<std::string>();
  }
  std::vector<PairRecord> out;
  for (const auto& s : manifest["selected"]) {
    const std::string id = s.value("id", "");
    const std::string seed_id = s.value("seed_id", "");
    auto it = seed_text.find(seed_id);
    if (it == seed_text.end()) {
      if (warnings) {
        warnings->push_back("sentence " + id + " omitted: no linked seed");
      }
      continue;
    }
    out.push_back({method, seed_id, id, it->second, s.value("text", "")});
  }
  return out;
}

std::vector<PairRecord> parse_pairs_jsonl(std::string_view text) {
  std::vector<PairRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ParseError(lineno, "pairs line is not a JSON object");
    }
    PairRecord p;
    for (auto [key, dest] :
         {std::pair{"method", &p.method}, std::pair{"seed_id", &p.seed_id},
          std::pair{"aug_id", &p.aug_id}, std::pair{"seed", &p.seed},
          std::pair{"augmented", &p.augmented}}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw ParseError(lineno, std::string("missing string field '") + key +
                                     "'");
      }
      *dest = j[key].get<std::string>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PairRecord> load_pairs(const std::filesystem::path& path) {
  const std::string text = corpus::read_file(path);
  try {
    return parse_pairs_jsonl(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

}  // namespace gda::diversity
