#include "gda/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>
#include <map>
#include <set>
#include <unordered_set>

#include "gda/error.hpp"

namespace gda::pipeline {

using corpus::Method;
using corpus::Sentence;
using nlohmann::json;

namespace {

constexpr const char* kSchema = "gda-run-manifest/1";

json sentence_json(const Sentence& s) {
  json entities = json::array();
  for (const auto& e : s.entities) {
    entities.push_back(
        {{"start", e.start}, {"end", e.end}, {"type", e.entity_type}});
  }
  return json{{"id", s.id},
              {"text", corpus::sentence_text(s)},
              {"entities", std::move(entities)}};
}

json messages_json(const std::vector<llm::Message>& messages) {
  json out = json::array();
  for (const auto& m : messages) {
    out.push_back({{"role", m.role}, {"content", m.content}});
  }
  return out;
}

json verdicts_json(const std::vector<prompt::Candidate>& candidates) {
  json out = json::array();
  for (const auto& c : candidates) {
    json v{{"text", c.raw_text},
           {"verdict", c.accepted() ? "accepted" : "rejected"}};
    if (!c.accepted()) v["reason"] = c.reason;
    out.push_back(std::move(v));
  }
  return out;
}

struct SeedOutcome {
  json log;
  std::vector<Sentence> accepted;
  std::vector<std::string> warnings;
  llm::Usage usage;
  std::size_t calls = 0;
};

// Runs one prompt stage with up to max_retries extra attempts. `accept`
// inspects the reply, annotates the stage log and reports success.
template <typename Accept>
bool run_stage(const RunConfig& cfg, llm::CompletionBackend& backend,
               SeedOutcome& out, const std::string& stage,
               const std::string& seed_id,
               const std::vector<llm::Message>& messages, Accept&& accept) {
  for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    llm::CompletionRequest req;
    req.model_id = cfg.model_id;
    req.messages = messages;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    req.request_tag = stage + ":" + seed_id + "#" + std::to_string(attempt);

    const llm::CompletionResult result = backend.complete(req);
    ++out.calls;
    out.usage.prompt_tokens += result.usage.prompt_tokens;
    out.usage.completion_tokens += result.usage.completion_tokens;
    out.usage.total_tokens += result.usage.total_tokens;

    json log{{"stage", stage},
             {"attempt", attempt},
             {"request_tag", req.request_tag},
             {"fingerprint", llm::fingerprint(req)},
             {"messages", messages_json(messages)},
             {"completion", result.text}};
    const bool ok = accept(result.text, log);
    log["accepted"] = ok;
    out.log["stages"].push_back(std::move(log));
    if (ok) return true;
  }
  return false;
}

void skip(SeedOutcome& out, const std::string& reason) {
  out.log["status"] = "skipped";
  out.log["reason"] = reason;
  out.accepted.clear();
}

SeedOutcome start_outcome(const Sentence& seed) {
  SeedOutcome out;
  out.log = json{{"seed_id", seed.id}, {"status", "ok"},
                 {"stages", json::array()}, {"candidates", json::array()}};
  return out;
}

std::vector<Sentence> accepted_of(const std::vector<prompt::Candidate>& cands) {
  std::vector<Sentence> out;
  for (const auto& c : cands) {
    if (c.accepted()) out.push_back(c.sentence);
  }
  return out;
}

void finish_candidates(SeedOutcome& out, const Sentence& seed, Method method) {
  for (std::size_t k = 0; k < out.accepted.size(); ++k) {
    out.accepted[k].id = std::string(corpus::method_name(method)) + ":" +
                         seed.id + ":" + std::to_string(k);
    out.log["candidates"].push_back(sentence_json(out.accepted[k]));
  }
}

bool leaks_seed(const prompt::AbstractionRecord& rec, const Sentence& seed) {
  const std::string needle = corpus::normalize_text(corpus::sentence_text(seed));
  auto contains = [&](const std::string& text) {
    return corpus::normalize_text(text).find(needle) != std::string::npos;
  };
  if (contains(rec.context_summary) || contains(rec.structure_description)) {
    return true;
  }
  return std::any_of(rec.entity_roles.begin(), rec.entity_roles.end(),
                     [&](const auto& kv) { return contains(kv.second); });
}

SeedOutcome process_gda(const Sentence& seed, const RunConfig& cfg,
                        const RunInputs& in) {
  SeedOutcome out = start_outcome(seed);
  const auto& inventory = in.dataset->inventory;
  const auto& templates = *in.templates;
  if (seed.entities.empty()) {
    skip(out, "no-entities");
    return out;
  }

  std::vector<Sentence> variants;
  const bool have_variants = run_stage(
      cfg, *in.backend, out, "seed_generation", seed.id,
      prompt::build_seed_generation_prompt(seed, cfg.variants_per_seed,
                                           templates),
      [&](const std::string& reply, json& log) {
        const auto cands = prompt::parse_candidates(
            reply, inventory, Method::kGda, seed.id + "/variant");
        log["verdicts"] = verdicts_json(cands);
        variants = accepted_of(cands);
        return !variants.empty();
      });
  if (!have_variants) {
    skip(out, "seed_generation: retries exhausted");
    return out;
  }

  prompt::AbstractionRecord record;
  const bool have_record = run_stage(
      cfg, *in.backend, out, "abstraction", seed.id,
      prompt::build_abstraction_prompt(seed, variants, inventory, templates),
      [&](const std::string& reply, json& log) {
        try {
          record = prompt::parse_abstraction(reply, inventory);
        } catch (const prompt::ReplyFormatError& e) {
          log["error"] = {{"field", e.field()}, {"message", e.what()}};
          return false;
        }
        if (leaks_seed(record, seed)) {
          log["error"] = {{"field", "seed-text"},
                          {"message", "abstraction repeats the seed sentence"}};
          return false;
        }
        record.source_seed_ids = {seed.id};
        log["abstraction"] = {{"context", record.context_summary},
                              {"structure", record.structure_description},
                              {"roles", record.entity_roles},
                              {"source_seed_ids", record.source_seed_ids}};
        for (const auto& w : record.warnings) {
          out.warnings.push_back(seed.id + ": " + w);
        }
        log["warnings"] = record.warnings;
        return true;
      });
  if (!have_record) {
    skip(out, "abstraction: retries exhausted");
    return out;
  }

  const bool have_candidates = run_stage(
      cfg, *in.backend, out, "guidance", seed.id,
      prompt::build_guidance_prompt(record, inventory, cfg.candidates_per_seed,
                                    templates),
      [&](const std::string& reply, json& log) {
        const auto cands =
            prompt::parse_candidates(reply, inventory, Method::kGda, seed.id);
        log["verdicts"] = verdicts_json(cands);
        out.accepted = accepted_of(cands);
        return !out.accepted.empty();
      });
  if (!have_candidates) {
    skip(out, "guidance: retries exhausted");
    return out;
  }
  finish_candidates(out, seed, Method::kGda);
  return out;
}

SeedOutcome process_naive(const Sentence& seed, const RunConfig& cfg,
                          const RunInputs& in) {
  SeedOutcome out = start_outcome(seed);
  if (seed.entities.empty()) {
    skip(out, "no-entities");
    return out;
  }
  const bool ok = run_stage(
      cfg, *in.backend, out, "naive", seed.id,
      prompt::build_naive_prompt(seed, cfg.candidates_per_seed, *in.templates),
      [&](const std::string& reply, json& log) {
        const auto cands = prompt::parse_candidates(
            reply, in.dataset->inventory, Method::kNaive, seed.id, seed.id);
        log["verdicts"] = verdicts_json(cands);
        out.accepted = accepted_of(cands);
        return !out.accepted.empty();
      });
  if (!ok) {
    skip(out, "naive: retries exhausted");
    return out;
  }
  finish_candidates(out, seed, Method::kNaive);
  return out;
}

json dataset_json(const corpus::Dataset& ds) {
  return json{{"name", ds.name},
              {"inventory", ds.inventory.labels()},
              {"train_size", ds.train.size()},
              {"train_sha256",
               llm::sha256_hex(corpus::serialize_conll(ds.train))}};
}

json seeds_json(const std::vector<Sentence>& seeds) {
  json out = json::array();
  for (const auto& s : seeds) {
    out.push_back({{"id", s.id}, {"text", corpus::sentence_text(s)}});
  }
  return out;
}

json selected_json(const std::vector<Sentence>& selected,
                   const std::map<std::string, std::string>& seed_of) {
  json out = json::array();
  for (const auto& s : selected) {
    out.push_back({{"id", s.id},
                   {"seed_id", seed_of.at(s.id)},
                   {"parent_id", s.provenance.parent_id
                                     ? json(*s.provenance.parent_id)
                                     : json(nullptr)},
                   {"text", corpus::sentence_text(s)}});
  }
  return out;
}

json base_manifest(const RunConfig& cfg, const RunInputs& in,
                   const std::vector<Sentence>& seeds) {
  return json{{"schema", kSchema},
              {"status", "ok"},
              {"config", cfg.to_json()},
              {"dataset", dataset_json(*in.dataset)},
              {"seeds", seeds_json(seeds)},
              {"seed_logs", json::array()},
              {"selected", json::array()},
              {"usage",
               {{"calls", 0},
                {"prompt_tokens", 0},
                {"completion_tokens", 0},
                {"total_tokens", 0}}},
              {"warnings", json::array()},
              {"shortfall", nullptr}};
}

template <typename Process>
RunResult run_llm(const RunConfig& cfg, const RunInputs& in, Process&& process) {
  cfg.validate();
  if (!in.dataset || !in.backend || !in.templates) {
    throw InvalidArgument("LLM methods need a dataset, backend and templates");
  }
  RunResult result;
  result.seeds = corpus::sample_seeds(*in.dataset, cfg.seed_count, cfg.rng_seed);
  const auto& seeds = result.seeds;

  std::vector<SeedOutcome> outcomes(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  const auto n = static_cast<std::ptrdiff_t>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, cfg.jobs))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      outcomes[i] = process(seeds[i], cfg, in);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json manifest = base_manifest(cfg, in, seeds);
  manifest["templates"] = {{"set", in.templates->hash()}};
  for (auto kind : {prompt::PromptKind::kSeedGeneration,
                    prompt::PromptKind::kAbstraction,
                    prompt::PromptKind::kGuidance, prompt::PromptKind::kNaive}) {
    manifest["templates"][std::string(prompt::kind_name(kind))] =
        in.templates->get(kind).hash();
  }

  std::vector<SeedPool> pool;
  std::map<std::string, std::string> seed_of;
  json& usage = manifest["usage"];
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    usage["calls"] = usage["calls"].get<std::size_t>() + o.calls;
    usage["prompt_tokens"] =
        usage["prompt_tokens"].get<std::int64_t>() + o.usage.prompt_tokens;
    usage["completion_tokens"] = usage["completion_tokens"].get<std::int64_t>() +
                                 o.usage.completion_tokens;
    usage["total_tokens"] =
        usage["total_tokens"].get<std::int64_t>() + o.usage.total_tokens;
    for (auto& w : o.warnings) manifest["warnings"].push_back(w);
    if (o.log["status"] == "skipped") {
      manifest["warnings"].push_back(seeds[i].id + " skipped: " +
                                     o.log["reason"].get<std::string>());
    }
    for (const auto& c : o.accepted) seed_of[c.id] = seeds[i].id;
    pool.push_back({seeds[i].id, std::move(o.accepted)});
    manifest["seed_logs"].push_back(std::move(o.log));
  }

  try {
    result.selected = select_responses(pool, cfg.target_augmented);
  } catch (const ShortfallError& e) {
    result.status = RunStatus::kShortfall;
    result.message = e.what();
    manifest["status"] = "shortfall";
    manifest["shortfall"] = {{"available", e.available()},
                             {"target", e.target()}};
  }
  manifest["selected"] = selected_json(result.selected, seed_of);
  result.manifest = std::move(manifest);
  return result;
}

template <typename F>
RunResult timed(F&& f) {
  const auto started = std::chrono::steady_clock::now();
  RunResult r = f();
  r.wall_clock = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return r;
}

}  // namespace

void RunConfig::validate() const {
  if (method == Method::kSeed) {
    throw InvalidArgument("method must be one of gda, naive, eda, wordnet");
  }
  if (candidates_per_seed < 1) throw InvalidArgument("m must be >= 1");
  if (variants_per_seed < 1) {
    throw InvalidArgument("variants_per_seed must be >= 1");
  }
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  if (max_tokens && *max_tokens <= 0) {
    throw InvalidArgument("max_tokens must be positive");
  }
  eda.validate();
}

json RunConfig::to_json() const {
  return json{
      {"method", corpus::method_name(method)},
      {"seed_count", seed_count},
      {"target_augmented", target_augmented},
      {"candidates_per_seed", candidates_per_seed},
      {"variants_per_seed", variants_per_seed},
      {"max_retries", max_retries},
      {"model_id", model_id},
      {"temperature", temperature},
      {"max_tokens", max_tokens ? json(*max_tokens) : json(nullptr)},
      {"rng_seed", rng_seed},
      {"backend", llm::backend_name(backend)},
      {"eda",
       {{"alpha_sr", eda.alpha_sr},
        {"alpha_ri", eda.alpha_ri},
        {"alpha_rs", eda.alpha_rs},
        {"p_rd", eda.p_rd},
        {"synonym_pool", eda.synonym_pool}}}};
}

RunResult run_gda(const RunConfig& config, const RunInputs& inputs) {
  return timed([&] {
    if (config.method != Method::kGda) {
      throw InvalidArgument("run_gda needs method gda");
    }
    return run_llm(config, inputs, process_gda);
  });
}

RunResult run_naive(const RunConfig& config, const RunInputs& inputs) {
  return timed([&] {
    if (config.method != Method::kNaive) {
      throw InvalidArgument("run_naive needs method naive");
    }
    return run_llm(config, inputs, process_naive);
  });
}

RunResult run_rule(const RunConfig& config, const RunInputs& inputs) {
  return timed([&] {
    config.validate();
    if (config.method != Method::kEda && config.method != Method::kWordnet) {
      throw InvalidArgument("run_rule needs method eda or wordnet");
    }
    if (!inputs.dataset || !inputs.lexicon) {
      throw InvalidArgument("rule methods need a dataset and a lexicon");
    }
    RunResult result;
    result.seeds =
        corpus::sample_seeds(*inputs.dataset, config.seed_count, config.rng_seed);
    const auto& seeds = result.seeds;
    json manifest = base_manifest(config, inputs, seeds);
    manifest["lexicon_entries"] = inputs.lexicon->size();

    if (seeds.empty()) {
      if (config.target_augmented > 0) {
        ShortfallError e(0, config.target_augmented);
        result.status = RunStatus::kShortfall;
        result.message = e.what();
        manifest["status"] = "shortfall";
        manifest["shortfall"] = {{"available", 0},
                                 {"target", config.target_augmented}};
      }
      result.manifest = std::move(manifest);
      return result;
    }

    const std::size_t base = config.target_augmented / seeds.size();
    const std::size_t extra = config.target_augmented % seeds.size();
    std::vector<rules::RuleJob> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      jobs.push_back({&seeds[i], base + (i < extra ? 1 : 0)});
    }
    const auto method = config.method == Method::kEda ? rules::RuleMethod::kEda
                                                      : rules::RuleMethod::kWordnet;
    const auto variants = rules::augment_batch(
        jobs, method, *inputs.lexicon, config.eda, config.rng_seed, config.jobs);

    std::map<std::string, std::string> seed_of;
    std::size_t unchanged = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      json log{{"seed_id", seeds[i].id},
               {"status", "ok"},
               {"variants", json::array()}};
      for (const auto& v : variants[i]) {
        json entry = sentence_json(v.sentence);
        entry["unchanged"] = v.unchanged;
        log["variants"].push_back(std::move(entry));
        unchanged += v.unchanged ? 1 : 0;
        seed_of[v.sentence.id] = seeds[i].id;
        result.selected.push_back(v.sentence);
      }
      manifest["seed_logs"].push_back(std::move(log));
    }
    if (unchanged > 0) {
      manifest["warnings"].push_back(
          std::to_string(unchanged) + " of " +
          std::to_string(result.selected.size()) +
          " outputs are unchanged copies of their seed");
    }
    manifest["selected"] = selected_json(result.selected, seed_of);
    result.manifest = std::move(manifest);
    return result;
  });
}

RunResult run(const RunConfig& config, const RunInputs& inputs) {
  switch (config.method) {
    case Method::kGda:
      return run_gda(config, inputs);
    case Method::kNaive:
      return run_naive(config, inputs);
    case Method::kEda:
    case Method::kWordnet:
      return run_rule(config, inputs);
    case Method::kSeed:
      break;
  }
  throw InvalidArgument("method must be one of gda, naive, eda, wordnet");
}

std::vector<Sentence> select_responses(const std::vector<SeedPool>& pool,
                                       std::size_t target) {
  std::unordered_set<std::string> seen;
  std::vector<std::vector<const Sentence*>> lanes;
  std::size_t available = 0;
  for (const auto& seed : pool) {
    auto& lane = lanes.emplace_back();
    for (const auto& c : seed.candidates) {
      if (!seen.insert(corpus::normalize_text(corpus::sentence_text(c))).second) {
        continue;
      }
      lane.push_back(&c);
      ++available;
    }
  }
  if (available < target) throw ShortfallError(available, target);

  std::vector<Sentence> out;
  out.reserve(target);
  for (std::size_t round = 0; out.size() < target; ++round) {
    for (const auto& lane : lanes) {
      if (out.size() == target) break;
      if (round < lane.size()) out.push_back(*lane[round]);
    }
  }
  return out;
}

std::string training_set_text(const std::vector<Sentence>& seeds,
                              const std::vector<Sentence>& delta,
                              const corpus::Inventory& inventory) {
  std::map<std::string, const Sentence*> by_id;
  auto admit = [&](const Sentence& s) {
    if (auto problem = corpus::check_sentence(s, &inventory)) {
      throw Error("export: sentence " + s.id + " is invalid: " + *problem);
    }
    if (!by_id.emplace(s.id, &s).second) {
      throw Error("export: duplicate sentence id " + s.id);
    }
  };
  for (const auto& s : seeds) {
    if (s.provenance.method != Method::kSeed) {
      throw Error("export: " + s.id + " is not a seed");
    }
    admit(s);
  }
  for (const auto& s : delta) {
    if (s.provenance.method == Method::kSeed) {
      throw Error("export: seed " + s.id + " listed as augmented");
    }
    admit(s);
    if (!s.provenance.parent_id) continue;
    auto parent = by_id.find(*s.provenance.parent_id);
    if (parent == by_id.end()) {
      throw Error("export: " + s.id + " references unknown parent " +
                  *s.provenance.parent_id);
    }
    if (s.provenance.method == Method::kEda ||
        s.provenance.method == Method::kWordnet) {
      const Sentence& p = *parent->second;
      bool same = p.entities.size() == s.entities.size();
      for (std::size_t i = 0; same && i < p.entities.size(); ++i) {
        same = p.entities[i].entity_type == s.entities[i].entity_type &&
               p.span_text(p.entities[i]) == s.span_text(s.entities[i]);
      }
      if (!same) {
        throw Error("export: " + s.id + " altered an entity of " + p.id);
      }
    }
  }
  std::vector<Sentence> all = seeds;
  all.insert(all.end(), delta.begin(), delta.end());
  return corpus::serialize_conll(all);
}

void export_training_set(const std::vector<Sentence>& seeds,
                         const std::vector<Sentence>& delta,
                         const corpus::Inventory& inventory,
                         const std::filesystem::path& path) {
  corpus::write_file(path, training_set_text(seeds, delta, inventory));
}

std::string manifest_text(const json& manifest) {
  return manifest.dump(2) + "\n";
}

std::vector<std::string> validate_manifest(const json& m) {
  std::vector<std::string> problems;
  auto need = [&](const json& obj, const char* key, auto&& is_type,
                  const char* what, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key) || !is_type(obj[key])) {
      problems.push_back(where + "." + key + " must be " + what);
      return false;
    }
    return true;
  };
  auto is_string = [](const json& j) { return j.is_string(); };
  auto is_array = [](const json& j) { return j.is_array(); };
  auto is_object = [](const json& j) { return j.is_object(); };
  auto is_count = [](const json& j) { return j.is_number_unsigned(); };
  auto is_count_or_zero = [](const json& j) {
    return j.is_number_integer() && j.get<std::int64_t>() >= 0;
  };

  if (!m.is_object()) return {"manifest must be a JSON object"};
  if (!need(m, "schema", is_string, "a string", "$")) return problems;
  if (m["schema"] != kSchema) problems.push_back("$.schema is not " + std::string(kSchema));
  if (need(m, "status", is_string, "a string", "$") && m["status"] != "ok" &&
      m["status"] != "shortfall") {
    problems.push_back("$.status must be ok or shortfall");
  }
  const bool has_config = need(m, "config", is_object, "an object", "$");
  if (has_config) {
    need(m["config"], "method", is_string, "a string", "$.config");
    need(m["config"], "target_augmented", is_count, "a count", "$.config");
    need(m["config"], "seed_count", is_count, "a count", "$.config");
    need(m["config"], "model_id", is_string, "a string", "$.config");
  }
  if (need(m, "dataset", is_object, "an object", "$")) {
    need(m["dataset"], "name", is_string, "a string", "$.dataset");
    need(m["dataset"], "inventory", is_array, "an array", "$.dataset");
    need(m["dataset"], "train_size", is_count, "a count", "$.dataset");
  }
  if (need(m, "usage", is_object, "an object", "$")) {
    for (const char* k :
         {"calls", "prompt_tokens", "completion_tokens", "total_tokens"}) {
      need(m["usage"], k, is_count_or_zero, "a non-negative integer", "$.usage");
    }
  }
  need(m, "warnings", is_array, "an array", "$");

  std::set<std::string> seed_ids;
  if (need(m, "seeds", is_array, "an array", "$")) {
    for (std::size_t i = 0; i < m["seeds"].size(); ++i) {
      const auto& s = m["seeds"][i];
      const std::string where = "$.seeds[" + std::to_string(i) + "]";
      if (need(s, "id", is_string, "a string", where) &&
          !seed_ids.insert(s["id"].get<std::string>()).second) {
        problems.push_back(where + " duplicates a seed id");
      }
      need(s, "text", is_string, "a string", where);
    }
  }
  std::set<std::string> produced;
  if (need(m, "seed_logs", is_array, "an array", "$")) {
    for (std::size_t i = 0; i < m["seed_logs"].size(); ++i) {
      const auto& log = m["seed_logs"][i];
      const std::string where = "$.seed_logs[" + std::to_string(i) + "]";
      if (need(log, "seed_id", is_string, "a string", where) &&
          !seed_ids.count(log["seed_id"].get<std::string>())) {
        problems.push_back(where + ".seed_id is not a listed seed");
      }
      if (need(log, "status", is_string, "a string", where) &&
          log["status"] != "ok" && log["status"] != "skipped") {
        problems.push_back(where + ".status must be ok or skipped");
      }
      for (const char* list : {"candidates", "variants"}) {
        if (!log.is_object() || !log.contains(list)) continue;
        if (!log[list].is_array()) {
          problems.push_back(where + "." + list + " must be an array");
          continue;
        }
        for (const auto& c : log[list]) {
          if (need(c, "id", is_string, "a string", where + "." + list + "[]")) {
            produced.insert(c["id"].get<std::string>());
          }
        }
      }
    }
  }
  if (need(m, "selected", is_array, "an array", "$")) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < m["selected"].size(); ++i) {
      const auto& s = m["selected"][i];
      const std::string where = "$.selected[" + std::to_string(i) + "]";
      if (need(s, "id", is_string, "a string", where)) {
        const auto id = s["id"].get<std::string>();
        if (!seen.insert(id).second) problems.push_back(where + " duplicates " + id);
        if (!produced.count(id)) {
          problems.push_back(where + " (" + id +
                             ") does not resolve to an accepted output");
        }
      }
      if (need(s, "seed_id", is_string, "a string", where) &&
          !seed_ids.count(s["seed_id"].get<std::string>())) {
        problems.push_back(where + ".seed_id is not a listed seed");
      }
      need(s, "text", is_string, "a string", where);
      if (!s.contains("parent_id") ||
          !(s["parent_id"].is_null() || s["parent_id"].is_string())) {
        problems.push_back(where + ".parent_id must be a string or null");
      }
    }
    if (has_config && m["status"] == "ok" &&
        m["config"].contains("target_augmented") &&
        m["config"]["target_augmented"].is_number_unsigned() &&
        m["selected"].size() != m["config"]["target_augmented"].get<std::size_t>()) {
      problems.push_back("$.selected has " + std::to_string(m["selected"].size()) +
                         " entries but the target is " +
                         m["config"]["target_augmented"].dump());
    }
  }
  return problems;
}

}  // namespace gda::pipeline
