#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "gda/pipeline.hpp"

namespace gda::cli {

// Everything `gda augment` needs: the run parameters plus input and output
// locations. Loaded from TOML, then overridden by flags.
struct CliConfig {
  pipeline::RunConfig run;
  std::optional<std::filesystem::path> dataset;
  std::string dataset_name;  // defaults to the dataset file stem
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> templates;
  std::optional<std::filesystem::path> cassette;
  std::optional<std::filesystem::path> mock_script;
  std::filesystem::path out_dir = "gda-out";
  llm::LiveConfig live;
};

// Top-level keys: method, seed_count, target, m, variants, max_retries,
// model, temperature, max_tokens, rng_seed, backend, jobs, dataset,
// dataset_name, lexicon, templates, cassette, mock_script, out_dir,
// base_url, api_key_env, timeout_s, max_in_flight; table [eda] with
// alpha_sr, alpha_ri, alpha_rs, p_rd, synonym_pool. Unknown keys and
// mistyped values throw ParseError. Relative paths resolve against base_dir.
CliConfig parse_config(std::string_view toml_text,
                       const std::filesystem::path& base_dir,
                       CliConfig defaults = {});
CliConfig load_config(const std::filesystem::path& path);

// Entry point of the `gda` binary. Returns the process exit code.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gda::cli
