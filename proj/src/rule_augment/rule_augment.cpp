#include "gda/rule_augment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>

#include "gda/error.hpp"
#include "gda/random.hpp"

namespace gda::rules {

using corpus::Sentence;

namespace {

constexpr int kOutside = -1;

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t' || text[b] == '\r')) ++b;
  while (e > b &&
         (text[e - 1] == ' ' || text[e - 1] == '\t' || text[e - 1] == '\r')) {
    --e;
  }
  return std::string(text.substr(b, e - b));
}

// Token list where each position remembers the entity span that owns it.
struct Draft {
  std::vector<std::string> words;
  std::vector<int> owner;

  explicit Draft(const Sentence& s) : owner(s.tokens.size(), kOutside) {
    words = s.words();
    for (std::size_t j = 0; j < s.entities.size(); ++j) {
      for (std::size_t i = s.entities[j].start; i < s.entities[j].end; ++i) {
        owner[i] = static_cast<int>(j);
      }
    }
  }

  std::vector<std::size_t> free_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (owner[i] == kOutside) out.push_back(i);
    }
    return out;
  }

  void replace(std::size_t pos, const std::vector<std::string>& with) {
    words.erase(words.begin() + static_cast<std::ptrdiff_t>(pos));
    owner.erase(owner.begin() + static_cast<std::ptrdiff_t>(pos));
    insert(pos, with);
  }

  void insert(std::size_t pos, const std::vector<std::string>& with) {
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos),
                 with.begin(), with.end());
    owner.insert(owner.begin() + static_cast<std::ptrdiff_t>(pos),
                 with.size(), kOutside);
  }

  // Boundaries where an insertion does not split an entity span.
  std::vector<std::size_t> insertion_points() const {
    std::vector<std::size_t> out;
    for (std::size_t b = 0; b <= words.size(); ++b) {
      if (b > 0 && b < words.size() && owner[b] != kOutside &&
          owner[b - 1] == owner[b]) {
        continue;
      }
      out.push_back(b);
    }
    return out;
  }

  Sentence to_sentence(const Sentence& seed, corpus::Method method,
                       std::size_t k) const {
    Sentence s;
    s.id = std::string(corpus::method_name(method)) + ":" + seed.id + ":" +
           std::to_string(k);
    for (std::size_t i = 0; i < words.size(); ++i) {
      s.tokens.push_back(corpus::Token{words[i], i});
    }
    for (std::size_t j = 0; j < seed.entities.size(); ++j) {
      corpus::EntitySpan span{words.size(), 0, seed.entities[j].entity_type};
      for (std::size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] != static_cast<int>(j)) continue;
        span.start = std::min(span.start, i);
        span.end = std::max(span.end, i + 1);
      }
      s.entities.push_back(std::move(span));
    }
    std::sort(s.entities.begin(), s.entities.end(),
              [](const auto& a, const auto& b) { return a.start < b.start; });
    s.provenance = corpus::Provenance{method, seed.id};
    return s;
  }
};

std::span<const std::string> pooled(const SynonymLexicon& lexicon,
                                    std::string_view word, std::size_t pool) {
  auto syns = lexicon.lookup(word);
  return syns.first(std::min(pool, syns.size()));
}

std::vector<std::string> pick_synonym(std::span<const std::string> syns,
                                      Rng& rng) {
  return split_ws(syns[rng.index(syns.size())]);
}

// Replaces every free occurrence of up to n distinct words that have synonyms.
void synonym_replacement(Draft& d, const SynonymLexicon& lexicon,
                         std::size_t pool, std::size_t n, Rng& rng) {
  std::vector<std::string> candidates;
  for (std::size_t pos : d.free_positions()) {
    std::string key = corpus::ascii_lower(d.words[pos]);
    if (lexicon.lookup(key).empty()) continue;
    if (std::find(candidates.begin(), candidates.end(), key) ==
        candidates.end()) {
      candidates.push_back(std::move(key));
    }
  }
  rng.shuffle(candidates);
  std::size_t replaced = 0;
  for (const auto& key : candidates) {
    if (replaced >= n) break;
    const auto with = pick_synonym(pooled(lexicon, key, pool), rng);
    if (with.empty()) continue;
    // Walk from the back so earlier positions stay valid after expansion.
    for (std::size_t i = d.words.size(); i-- > 0;) {
      if (d.owner[i] == kOutside && corpus::ascii_lower(d.words[i]) == key) {
        d.replace(i, with);
      }
    }
    ++replaced;
  }
}

void random_insertion(Draft& d, const SynonymLexicon& lexicon,
                      std::size_t pool, std::size_t n, Rng& rng) {
  for (std::size_t step = 0; step < n; ++step) {
    std::vector<std::size_t> sources;
    for (std::size_t pos : d.free_positions()) {
      if (!lexicon.lookup(d.words[pos]).empty()) sources.push_back(pos);
    }
    if (sources.empty()) return;
    const std::string& word = d.words[sources[rng.index(sources.size())]];
    const auto with = pick_synonym(pooled(lexicon, word, pool), rng);
    if (with.empty()) continue;
    const auto points = d.insertion_points();
    d.insert(points[rng.index(points.size())], with);
  }
}

void random_swap(Draft& d, std::size_t n, Rng& rng) {
  for (std::size_t step = 0; step < n; ++step) {
    const auto free = d.free_positions();
    if (free.size() < 2) return;
    const std::size_t a = rng.index(free.size());
    std::size_t b = rng.index(free.size() - 1);
    if (b >= a) ++b;
    std::swap(d.words[free[a]], d.words[free[b]]);
  }
}

void random_deletion(Draft& d, double p, Rng& rng) {
  const auto free = d.free_positions();
  if (free.empty()) return;
  std::vector<bool> drop(d.words.size(), false);
  std::size_t dropped = 0;
  for (std::size_t pos : free) {
    if (rng.bernoulli(p)) {
      drop[pos] = true;
      ++dropped;
    }
  }
  if (dropped == free.size()) drop[free[rng.index(free.size())]] = false;
  for (std::size_t i = d.words.size(); i-- > 0;) {
    if (!drop[i]) continue;
    d.words.erase(d.words.begin() + static_cast<std::ptrdiff_t>(i));
    d.owner.erase(d.owner.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

std::size_t op_count(double alpha, std::size_t free_words) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(alpha * free_words)));
}

std::vector<RuleVariant> finish(const Sentence& seed,
                                const std::vector<Draft>& drafts,
                                corpus::Method method) {
  std::vector<RuleVariant> out;
  out.reserve(drafts.size());
  const auto seed_words = seed.words();
  for (std::size_t k = 0; k < drafts.size(); ++k) {
    out.push_back(RuleVariant{drafts[k].to_sentence(seed, method, k),
                              drafts[k].words == seed_words});
  }
  return out;
}

}  // namespace

void SynonymLexicon::add(std::string_view lemma,
                         const std::vector<std::string>& synonyms) {
  const std::string key = corpus::ascii_lower(lemma);
  auto& list = entries_[key];
  for (const auto& raw : synonyms) {
    std::string syn = trim(raw);
    if (syn.empty() || corpus::ascii_lower(syn) == key) continue;
    if (std::find(list.begin(), list.end(), syn) == list.end()) {
      list.push_back(std::move(syn));
    }
  }
  if (list.empty()) entries_.erase(key);
}

std::span<const std::string> SynonymLexicon::lookup(
    std::string_view word) const {
  auto it = entries_.find(corpus::ascii_lower(word));
  if (it == entries_.end()) return {};
  return it->second;
}

SynonymLexicon parse_lexicon(std::string_view text) {
  SynonymLexicon lex;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;

    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError(line_no, "expected lemma<TAB>synonyms");
    }
    if (line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(line_no, "more than one tab");
    }
    const std::string lemma = trim(line.substr(0, tab));
    if (lemma.empty()) throw ParseError(line_no, "empty lemma");

    std::vector<std::string> synonyms;
    std::string_view rest = line.substr(tab + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      std::size_t bar = rest.find('|', start);
      if (bar == std::string_view::npos) bar = rest.size();
      synonyms.push_back(trim(rest.substr(start, bar - start)));
      start = bar + 1;
    }
    lex.add(lemma, synonyms);
  }
  return lex;
}

SynonymLexicon load_lexicon(const std::filesystem::path& path) {
  const std::string text = corpus::read_file(path);
  try {
    return parse_lexicon(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

void EdaConfig::validate() const {
  for (double f : {alpha_sr, alpha_ri, alpha_rs, p_rd}) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw InvalidArgument("EDA fractions must lie in [0, 1]");
    }
  }
  if (synonym_pool < 1) throw InvalidArgument("synonym_pool must be >= 1");
}

std::vector<RuleVariant> eda_augment(const Sentence& seed,
                                     const SynonymLexicon& lexicon,
                                     const EdaConfig& cfg,
                                     std::uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed, seed.id);
  const Draft original(seed);
  const std::size_t free_words = original.free_positions().size();

  std::vector<Draft> drafts;
  if (free_words > 0) {
    const std::size_t per_op = cfg.n_aug / 4 + 1;
    if (cfg.alpha_sr > 0) {
      const std::size_t n = op_count(cfg.alpha_sr, free_words);
      for (std::size_t i = 0; i < per_op; ++i) {
        Draft d = original;
        synonym_replacement(d, lexicon, cfg.synonym_pool, n, rng);
        drafts.push_back(std::move(d));
      }
    }
    if (cfg.alpha_ri > 0) {
      const std::size_t n = op_count(cfg.alpha_ri, free_words);
      for (std::size_t i = 0; i < per_op; ++i) {
        Draft d = original;
        random_insertion(d, lexicon, cfg.synonym_pool, n, rng);
        drafts.push_back(std::move(d));
      }
    }
    if (cfg.alpha_rs > 0) {
      const std::size_t n = op_count(cfg.alpha_rs, free_words);
      for (std::size_t i = 0; i < per_op; ++i) {
        Draft d = original;
        random_swap(d, n, rng);
        drafts.push_back(std::move(d));
      }
    }
    if (cfg.p_rd > 0) {
      for (std::size_t i = 0; i < per_op; ++i) {
        Draft d = original;
        random_deletion(d, cfg.p_rd, rng);
        drafts.push_back(std::move(d));
      }
    }
    rng.shuffle(drafts);
  }
  if (drafts.size() > cfg.n_aug) {
    drafts.erase(drafts.begin() + static_cast<std::ptrdiff_t>(cfg.n_aug),
                 drafts.end());
  }
  while (drafts.size() < cfg.n_aug) drafts.push_back(original);
  return finish(seed, drafts, corpus::Method::kEda);
}

std::vector<RuleVariant> wordnet_augment(const Sentence& seed,
                                         const SynonymLexicon& lexicon,
                                         std::size_t n_aug, std::size_t pool,
                                         std::uint64_t rng_seed,
                                         double replace_fraction) {
  if (pool < 1) throw InvalidArgument("synonym pool must be >= 1");
  if (!(replace_fraction >= 0.0 && replace_fraction <= 1.0)) {
    throw InvalidArgument("replace_fraction must lie in [0, 1]");
  }
  Rng rng(rng_seed, seed.id);
  const Draft original(seed);
  const std::size_t free_words = original.free_positions().size();
  const std::size_t n = op_count(replace_fraction, free_words);

  std::vector<Draft> drafts;
  drafts.reserve(n_aug);
  for (std::size_t k = 0; k < n_aug; ++k) {
    Draft d = original;
    if (free_words > 0) synonym_replacement(d, lexicon, pool, n, rng);
    drafts.push_back(std::move(d));
  }
  return finish(seed, drafts, corpus::Method::kWordnet);
}

namespace {

std::vector<RuleVariant> run_job(const RuleJob& job, RuleMethod method,
                                 const SynonymLexicon& lexicon,
                                 const EdaConfig& cfg, std::uint64_t rng_seed) {
  if (method == RuleMethod::kEda) {
    EdaConfig c = cfg;
    c.n_aug = job.n_aug;
    return eda_augment(*job.seed, lexicon, c, rng_seed);
  }
  return wordnet_augment(*job.seed, lexicon, job.n_aug, cfg.synonym_pool,
                         rng_seed, cfg.alpha_sr);
}

}  // namespace

std::vector<std::vector<RuleVariant>> augment_batch(
    std::span<const RuleJob> jobs, RuleMethod method,
    const SynonymLexicon& lexicon, const EdaConfig& cfg,
    std::uint64_t rng_seed, int threads) {
  cfg.validate();
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
  std::vector<std::vector<RuleVariant>> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const int team = threads > 0 ? threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 8) num_threads(team)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = run_job(jobs[i], method, lexicon, cfg, rng_seed);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<std::vector<RuleVariant>> augment_batch_serial(
    std::span<const RuleJob> jobs, RuleMethod method,
    const SynonymLexicon& lexicon, const EdaConfig& cfg,
    std::uint64_t rng_seed) {
  cfg.validate();
  std::vector<std::vector<RuleVariant>> out;
  out.reserve(jobs.size());
  for (const auto& job : jobs) {
    out.push_back(run_job(job, method, lexicon, cfg, rng_seed));
  }
  return out;
}

}  // namespace gda::rules
