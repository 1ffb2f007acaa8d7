#include "gda/cli.hpp"

#include <functional>
#include <map>
#include <set>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "gda/diversity.hpp"
#include "gda/error.hpp"
#include "toml.hpp"

namespace gda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t node_line(const toml::node& node) {
  return static_cast<std::size_t>(node.source().begin.line);
}

std::string as_string(const toml::node& node, const std::string& key) {
  if (auto v = node.value<std::string>(); v && node.is_string()) return *v;
  throw ParseError(node_line(node), "'" + key + "' must be a string");
}

std::uint64_t as_count(const toml::node& node, const std::string& key) {
  if (node.is_integer()) {
    const auto v = *node.value<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  throw ParseError(node_line(node),
                   "'" + key + "' must be a non-negative integer");
}

double as_number(const toml::node& node, const std::string& key) {
  if (node.is_floating_point() || node.is_integer()) {
    return *node.value<double>();
  }
  throw ParseError(node_line(node), "'" + key + "' must be a number");
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

template <typename Table, typename Handlers>
void apply_table(const Table& table, const Handlers& handlers,
                 const std::string& prefix) {
  for (auto&& [key, node] : table) {
    const std::string name(key.str());
    auto it = handlers.find(name);
    if (it == handlers.end()) {
      throw ParseError(node_line(node), "unknown key '" + prefix + name + "'");
    }
    it->second(node, prefix + name);
  }
}

using Handler = std::function<void(const toml::node&, const std::string&)>;

struct BackendFailure : Error {
  using Error::Error;
};

std::unique_ptr<llm::CompletionBackend> make_backend(const CliConfig& cfg) {
  try {
    switch (cfg.run.backend) {
      case llm::BackendKind::kReplay:
        if (!cfg.cassette) throw InvalidArgument("replay needs --cassette");
        return llm::open_replay(*cfg.cassette);
      case llm::BackendKind::kMock:
        if (!cfg.mock_script) throw InvalidArgument("mock needs --mock-script");
        return std::make_unique<llm::MockBackend>(
            llm::MockBackend::load_script(*cfg.mock_script));
      case llm::BackendKind::kLive:
        return std::make_unique<llm::LiveBackend>(cfg.live);
      case llm::BackendKind::kRecord:
        if (!cfg.cassette) throw InvalidArgument("record needs --cassette");
        return llm::record_session(std::make_unique<llm::LiveBackend>(cfg.live),
                                   *cfg.cassette);
    }
  } catch (const Error& e) {
    throw BackendFailure(std::string(llm::backend_name(cfg.run.backend)) +
                         " backend: " + e.what());
  }
  throw BackendFailure("unknown backend");
}

json split_stats(const std::vector<corpus::Sentence>& split,
                 const corpus::Inventory& inventory) {
  std::size_t tokens = 0, entities = 0;
  json by_type = json::object();
  for (const auto& label : inventory.labels()) by_type[label] = 0;
  for (const auto& s : split) {
    tokens += s.tokens.size();
    entities += s.entities.size();
    for (const auto& e : s.entities) {
      by_type[e.entity_type] = by_type[e.entity_type].get<std::size_t>() + 1;
    }
  }
  return json{{"sentences", split.size()},
              {"tokens", tokens},
              {"entities", entities},
              {"by_type", by_type}};
}

std::string default_name(const fs::path& path) {
  const fs::path trimmed =
      path.has_filename() ? path : path.parent_path();
  return trimmed.stem().string();
}

int cmd_ingest(const fs::path& path, const std::string& name, bool stats,
               std::ostream& out) {
  const auto ds = corpus::load_dataset(path, name.empty() ? default_name(path)
                                                          : name);
  json j{{"dataset", ds.name},
         {"inventory", ds.inventory.labels()},
         {"splits",
          {{"train", split_stats(ds.train, ds.inventory)},
           {"dev", split_stats(ds.dev, ds.inventory)},
           {"test", split_stats(ds.test, ds.inventory)}}}};
  if (stats) {
    out << j.dump(2) << "\n";
    return 0;
  }
  out << "dataset: " << ds.name << "\n";
  out << "inventory: " << fmt::format("{}", fmt::join(ds.inventory.labels(), ", "))
      << "\n";
  for (const char* split : {"train", "dev", "test"}) {
    const auto& s = j["splits"][split];
    out << fmt::format("{}: {} sentences, {} tokens, {} entities\n", split,
                       s["sentences"].get<std::size_t>(),
                       s["tokens"].get<std::size_t>(),
                       s["entities"].get<std::size_t>());
  }
  return 0;
}

int cmd_augment(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.run.validate();
  if (!cfg.dataset) throw InvalidArgument("--dataset is required");
  const auto ds = corpus::load_dataset(
      *cfg.dataset,
      cfg.dataset_name.empty() ? default_name(*cfg.dataset) : cfg.dataset_name);

  pipeline::RunInputs in;
  in.dataset = &ds;
  std::optional<prompt::TemplateSet> templates;
  std::optional<rules::SynonymLexicon> lexicon;
  std::unique_ptr<llm::CompletionBackend> backend;
  const auto method = cfg.run.method;
  if (method == corpus::Method::kGda || method == corpus::Method::kNaive) {
    templates = cfg.templates ? prompt::TemplateSet::load(*cfg.templates)
                              : prompt::TemplateSet::defaults();
    in.templates = &*templates;
    backend = make_backend(cfg);
    in.backend = backend.get();
  } else {
    if (!cfg.lexicon) throw InvalidArgument("--lexicon is required for eda and wordnet");
    lexicon = rules::load_lexicon(*cfg.lexicon);
    in.lexicon = &*lexicon;
  }

  const auto result = pipeline::run(cfg.run, in);
  const auto problems = pipeline::validate_manifest(result.manifest);
  if (!problems.empty()) {
    throw Error("internal: manifest failed validation: " + problems.front());
  }

  fs::create_directories(cfg.out_dir);
  corpus::write_file(cfg.out_dir / "manifest.json",
                     pipeline::manifest_text(result.manifest));
  corpus::write_file(cfg.out_dir / "timing.json",
                     json{{"wall_clock_ms", result.wall_clock.count()}}.dump(2) +
                         "\n");
  for (const auto& w : result.manifest["warnings"]) {
    err << "warning: " << w.get<std::string>() << "\n";
  }
  if (result.status == pipeline::RunStatus::kShortfall) {
    err << "error: " << result.message << "\n";
    return pipeline::kExitShortfall;
  }
  pipeline::export_training_set(result.seeds, result.selected, ds.inventory,
                                cfg.out_dir / "export.conll");
  out << fmt::format("{}: {} seeds + {} augmented -> {}\n",
                     corpus::method_name(method), result.seeds.size(),
                     result.selected.size(),
                     (cfg.out_dir / "export.conll").string());
  return pipeline::kExitOk;
}

int cmd_diversity(const std::vector<fs::path>& manifests,
                  const std::vector<fs::path>& pair_files,
                  const diversity::BleuConfig& bleu, const fs::path& out_dir,
                  int jobs, std::ostream& out, std::ostream& err) {
  if (manifests.empty() && pair_files.empty()) {
    throw InvalidArgument("give at least one --manifest or --pairs file");
  }
  std::vector<diversity::PairRecord> pairs;
  std::vector<std::string> warnings;
  for (const auto& path : manifests) {
    const json m = json::parse(corpus::read_file(path), nullptr, false);
    if (m.is_discarded()) throw ParseError(0, path.string() + ": invalid JSON");
    auto got = diversity::pairs_from_manifest(m, &warnings);
    pairs.insert(pairs.end(), got.begin(), got.end());
  }
  for (const auto& path : pair_files) {
    auto got = diversity::load_pairs(path);
    pairs.insert(pairs.end(), got.begin(), got.end());
  }
  auto report = diversity::diversity_report(pairs, bleu, jobs);
  report.warnings.insert(report.warnings.begin(), warnings.begin(),
                         warnings.end());
  fs::create_directories(out_dir);
  corpus::write_file(out_dir / "diversity.csv", diversity::report_csv(report));
  corpus::write_file(out_dir / "diversity.json",
                     diversity::report_json(report).dump(2) + "\n");
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  out << fmt::format("{:<10} {:>6} {:>10} {:>10}\n", "method", "pairs", "mean",
                     "median");
  for (const auto& m : report.methods) {
    out << fmt::format("{:<10} {:>6} {:>10.4f} {:>10.4f}\n", m.method, m.pairs,
                       m.mean, m.median);
  }
  for (const auto& d : report.deltas) {
    out << fmt::format("{} vs {}: {:+.1f}%\n", d.method, d.baseline,
                       100.0 * d.relative);
  }
  return 0;
}

int cmd_export_lexicon_template(const fs::path& path, const fs::path& dest,
                                std::ostream& out) {
  const auto ds = corpus::load_dataset(path, default_name(path));
  std::set<std::string> words;
  for (const auto& s : ds.train) {
    std::vector<bool> inside(s.tokens.size(), false);
    for (const auto& e : s.entities) {
      for (auto i = e.start; i < e.end; ++i) inside[i] = true;
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto& t = s.tokens[i].text;
      const bool wordlike = std::any_of(t.begin(), t.end(), [](unsigned char c) {
        return std::isalpha(c) != 0;
      });
      if (!inside[i] && wordlike) words.insert(corpus::ascii_lower(t));
    }
  }
  std::string text = "# lemma<TAB>synonym|synonym ...\n";
  for (const auto& w : words) text += w + "\t\n";
  if (dest.empty()) {
    out << text;
  } else {
    corpus::write_file(dest, text);
  }
  return 0;
}

}  // namespace

CliConfig parse_config(std::string_view toml_text, const fs::path& base_dir,
                       CliConfig cfg) {
  toml::table table;
  try {
    table = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw ParseError(static_cast<std::size_t>(e.source().begin.line),
                     std::string(e.description()));
  }
  auto& run = cfg.run;
  const std::map<std::string, Handler> eda{
      {"alpha_sr", [&](auto& n, auto& k) { run.eda.alpha_sr = as_number(n, k); }},
      {"alpha_ri", [&](auto& n, auto& k) { run.eda.alpha_ri = as_number(n, k); }},
      {"alpha_rs", [&](auto& n, auto& k) { run.eda.alpha_rs = as_number(n, k); }},
      {"p_rd", [&](auto& n, auto& k) { run.eda.p_rd = as_number(n, k); }},
      {"synonym_pool",
       [&](auto& n, auto& k) { run.eda.synonym_pool = as_count(n, k); }},
  };
  auto path_of = [&](std::optional<fs::path>& dest) {
    return [&dest, &base_dir](const toml::node& n, const std::string& k) {
      dest = resolve(base_dir, as_string(n, k));
    };
  };
  const std::map<std::string, Handler> top{
      {"method",
       [&](auto& n, auto& k) { run.method = corpus::parse_method(as_string(n, k)); }},
      {"seed_count", [&](auto& n, auto& k) { run.seed_count = as_count(n, k); }},
      {"target", [&](auto& n, auto& k) { run.target_augmented = as_count(n, k); }},
      {"m", [&](auto& n, auto& k) { run.candidates_per_seed = as_count(n, k); }},
      {"variants", [&](auto& n, auto& k) { run.variants_per_seed = as_count(n, k); }},
      {"max_retries", [&](auto& n, auto& k) { run.max_retries = as_count(n, k); }},
      {"model", [&](auto& n, auto& k) { run.model_id = as_string(n, k); }},
      {"temperature", [&](auto& n, auto& k) { run.temperature = as_number(n, k); }},
      {"max_tokens",
       [&](auto& n, auto& k) { run.max_tokens = static_cast<int>(as_count(n, k)); }},
      {"rng_seed", [&](auto& n, auto& k) { run.rng_seed = as_count(n, k); }},
      {"backend",
       [&](auto& n, auto& k) { run.backend = llm::parse_backend(as_string(n, k)); }},
      {"jobs", [&](auto& n, auto& k) { run.jobs = static_cast<int>(as_count(n, k)); }},
      {"dataset", path_of(cfg.dataset)},
      {"dataset_name", [&](auto& n, auto& k) { cfg.dataset_name = as_string(n, k); }},
      {"lexicon", path_of(cfg.lexicon)},
      {"templates", path_of(cfg.templates)},
      {"cassette", path_of(cfg.cassette)},
      {"mock_script", path_of(cfg.mock_script)},
      {"out_dir",
       [&](auto& n, auto& k) { cfg.out_dir = resolve(base_dir, as_string(n, k)); }},
      {"base_url", [&](auto& n, auto& k) { cfg.live.base_url = as_string(n, k); }},
      {"api_key_env", [&](auto& n, auto& k) { cfg.live.api_key_env = as_string(n, k); }},
      {"timeout_s",
       [&](auto& n, auto& k) { cfg.live.timeout = std::chrono::seconds(as_count(n, k)); }},
      {"max_in_flight",
       [&](auto& n, auto& k) { cfg.live.max_in_flight = static_cast<int>(as_count(n, k)); }},
      {"eda",
       [&](auto& n, auto& k) {
         if (!n.is_table()) throw ParseError(node_line(n), "'" + k + "' must be a table");
         apply_table(*n.as_table(), eda, "eda.");
       }},
  };
  try {
    apply_table(table, top, "");
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(0, e.what());
  }
  return cfg;
}

CliConfig load_config(const fs::path& path) {
  const std::string text = corpus::read_file(path);
  try {
    return parse_config(text, path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guidance-driven data augmentation for NER corpora", "gda"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gda 0.1.0");

  auto* ingest = app.add_subcommand("ingest", "Parse a CoNLL dataset and summarize it");
  fs::path ingest_path;
  std::string ingest_name;
  bool ingest_stats = false;
  ingest->add_option("path", ingest_path, "CoNLL file or split directory")->required();
  ingest->add_option("--name", ingest_name, "Dataset name (default: file stem)");
  ingest->add_flag("--stats", ingest_stats, "Emit JSON statistics");

  auto* augment = app.add_subcommand("augment", "Run one augmentation method");
  fs::path config_path;
  std::string method, backend;
  std::size_t seed_count = 0, target = 0, m = 0, variants = 0, max_retries = 0;
  std::string model;
  double temperature = 0;
  int max_tokens = 0, jobs = 0;
  std::uint64_t rng_seed = 0;
  fs::path dataset, lexicon, templates, cassette, mock_script, out_dir;
  std::string dataset_name, base_url;
  augment->add_option("--config", config_path, "TOML config file")
      ->check(CLI::ExistingFile);
  auto* o_method = augment->add_option("--method", method, "gda | naive | eda | wordnet");
  auto* o_backend = augment->add_option("--backend,--llm-backend", backend,
                                        "live | record | replay | mock");
  auto* o_seed_count = augment->add_option("--seed-count", seed_count, "Seeds sampled from train");
  auto* o_target = augment->add_option("--target", target, "Augmented sentences to keep");
  auto* o_m = augment->add_option("-m,--candidates", m, "Sentences requested per prompt");
  auto* o_variants = augment->add_option("--variants", variants, "Seed rewrites per seed (gda)");
  auto* o_retries = augment->add_option("--max-retries", max_retries,
                                        "Extra attempts per LLM stage");
  auto* o_model = augment->add_option("--model", model, "Model id");
  auto* o_temperature = augment->add_option("--temperature", temperature, "Sampling temperature");
  auto* o_max_tokens = augment->add_option("--max-tokens", max_tokens, "Completion token cap");
  auto* o_rng = augment->add_option("--rng-seed", rng_seed, "Seed for sampling and rules");
  auto* o_jobs = augment->add_option("--jobs", jobs, "Worker threads");
  auto* o_dataset = augment->add_option("--dataset", dataset, "CoNLL file or split directory");
  auto* o_dataset_name = augment->add_option("--dataset-name", dataset_name, "Dataset name");
  auto* o_lexicon = augment->add_option("--lexicon", lexicon, "Synonym lexicon TSV");
  auto* o_templates = augment->add_option("--templates", templates, "Prompt template directory");
  auto* o_cassette = augment->add_option("--cassette", cassette, "Cassette JSONL (replay, record)");
  auto* o_mock = augment->add_option("--mock-script", mock_script, "Mock reply script JSON");
  auto* o_out = augment->add_option("--out-dir", out_dir, "Output directory");
  auto* o_base_url = augment->add_option("--base-url", base_url,
                                         "Chat-completions endpoint prefix");

  auto* div = app.add_subcommand("diversity", "BLEU-4 diversity report");
  std::vector<fs::path> manifests, pair_files;
  std::string smoothing = "add_epsilon";
  diversity::BleuConfig bleu;
  fs::path div_out = "gda-out";
  int div_jobs = 0;
  div->add_option("--manifest", manifests, "Run manifest (repeatable)")
      ->check(CLI::ExistingFile);
  div->add_option("--pairs", pair_files, "Pairs JSONL (repeatable)")
      ->check(CLI::ExistingFile);
  div->add_option("--smoothing", smoothing, "none | add_epsilon | floor_counts")
      ->capture_default_str();
  div->add_option("--epsilon", bleu.epsilon, "add_epsilon constant")
      ->capture_default_str();
  div->add_option("--out-dir", div_out, "Output directory")->capture_default_str();
  div->add_option("--jobs", div_jobs, "Worker threads (0 = runtime default)");

  auto* lex = app.add_subcommand("export-lexicon-template",
                                 "List non-entity words as an empty lexicon");
  fs::path lex_dataset, lex_out;
  lex->add_option("dataset", lex_dataset, "CoNLL file or split directory")->required();
  lex->add_option("--out", lex_out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_path, ingest_name, ingest_stats, out);
    if (*lex) return cmd_export_lexicon_template(lex_dataset, lex_out, out);
    if (*div) {
      bleu.smoothing = diversity::parse_smoothing(smoothing);
      return cmd_diversity(manifests, pair_files, bleu, div_out, div_jobs, out, err);
    }

    CliConfig cfg = config_path.empty() ? CliConfig{} : load_config(config_path);
    auto& run = cfg.run;
    if (o_method->count()) run.method = corpus::parse_method(method);
    if (o_backend->count()) run.backend = llm::parse_backend(backend);
    if (o_seed_count->count()) run.seed_count = seed_count;
    if (o_target->count()) run.target_augmented = target;
    if (o_m->count()) run.candidates_per_seed = m;
    if (o_variants->count()) run.variants_per_seed = variants;
    if (o_retries->count()) run.max_retries = max_retries;
    if (o_model->count()) run.model_id = model;
    if (o_temperature->count()) run.temperature = temperature;
    if (o_max_tokens->count()) run.max_tokens = max_tokens;
    if (o_rng->count()) run.rng_seed = rng_seed;
    if (o_jobs->count()) run.jobs = jobs;
    if (o_dataset->count()) cfg.dataset = dataset;
    if (o_dataset_name->count()) cfg.dataset_name = dataset_name;
    if (o_lexicon->count()) cfg.lexicon = lexicon;
    if (o_templates->count()) cfg.templates = templates;
    if (o_cassette->count()) cfg.cassette = cassette;
    if (o_mock->count()) cfg.mock_script = mock_script;
    if (o_out->count()) cfg.out_dir = out_dir;
    if (o_base_url->count()) cfg.live.base_url = base_url;
    return cmd_augment(cfg, out, err);
  } catch (const BackendFailure& e) {
    err << "error: " << e.what() << "\n";
    return pipeline::kExitBackendFailure;
  } catch (const llm::BackendError& e) {
    err << "error: backend failure: " << e.what() << "\n";
    return pipeline::kExitBackendFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gda::cli
