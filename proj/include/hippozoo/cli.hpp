#pragma once

// Experiment configs as flat key/value maps, report writers and the
// subcommand dispatcher behind the hippozoo binary.

#include "hippozoo/assoc.hpp"
#include "hippozoo/forecast.hpp"
#include "hippozoo/multiscale.hpp"
#include "hippozoo/salience.hpp"
#include "hippozoo/volterra.hpp"

#include "json.hpp"

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hippozoo::cli {

using Json = nlohmann::ordered_json;

/// Bad config file, unknown key or type mismatch (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& experiments();
bool is_experiment(const std::string& name);

/// A JSON object, or `key = value` lines where value is a JSON literal or a
/// bare string; '#' starts a comment.
Json parse_config_text(const std::string& text);
Json load_config_file(const std::filesystem::path& path);

/// "key=value" strings merged over `params`.
void apply_overrides(Json& params, const std::vector<std::string>& overrides);

/// Every key of the experiment with its default value.
Json default_params(const std::string& experiment);

/// Defaults merged under `params`; unknown keys and type mismatches throw.
Json resolve_params(const std::string& experiment, const Json& params);

VolterraConfig volterra_config(const Json& params);
SelectiveCopyConfig selective_copy_config(const Json& params);
AssocRecallConfig assoc_config(const Json& params);
MultiscaleConfig multiscale_config(const Json& params);
ForecastConfig forecast_config(const Json& params);

/// Shortest round-trip decimal form ("%.17g" then trimmed) for CSV cells.
std::string format_number(double v);

/// Header row then one row per matrix row; LF endings.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Mat& rows);

struct RunOptions {
  std::string experiment;
  Json params;  // resolved
  std::filesystem::path output_dir;
};

/// Runs the experiment and writes its reports under output_dir. Returns the
/// list of files written (relative names).
std::vector<std::string> run_experiment(const RunOptions& options, std::ostream& log);

struct PropertyResult {
  std::string name;
  bool pass;
  std::string detail;
};

/// Fast invariant checks across all modules.
std::vector<PropertyResult> property_suite();

/// Full command line: subcommand, --config, --out, key=value overrides.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hippozoo::cli
