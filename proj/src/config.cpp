#include "hippozoo/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hippozoo::cli {

const std::vector<std::string>& experiments() {
  static const std::vector<std::string> names{"volterra", "selective-copy", "assoc-recall", "multiscale",
                                              "forecast"};
  return names;
}

bool is_experiment(const std::string& name) {
  const auto& e = experiments();
  return std::find(e.begin(), e.end(), name) != e.end();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// JSON literal if it parses, otherwise the raw text as a string.
Json parse_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) return Json(text);
  return v;
}

/// Reads or writes config fields against a flat JSON object.
class Binder {
 public:
  Binder(Json& j, bool reading) : j_(j), reading_(reading) {}

  void operator()(const char* key, double& v) {
    if (!reading_) { j_[key] = v; return; }
    const Json& x = at(key);
    if (!x.is_number()) mismatch(key, "number");
    v = x.get<double>();
  }
  void operator()(const char* key, int& v) { integer(key, v); }
  void operator()(const char* key, long& v) { integer(key, v); }
  void operator()(const char* key, std::uint64_t& v) {
    if (!reading_) { j_[key] = v; return; }
    const Json& x = at(key);
    if (!x.is_number_integer() || (x.is_number_integer() && !x.is_number_unsigned() && x.get<long long>() < 0))
      mismatch(key, "non-negative integer");
    v = x.get<std::uint64_t>();
  }
  void operator()(const char* key, bool& v) {
    if (!reading_) { j_[key] = v; return; }
    const Json& x = at(key);
    if (!x.is_boolean()) mismatch(key, "boolean");
    v = x.get<bool>();
  }
  void operator()(const char* key, std::vector<double>& v) {
    if (!reading_) { j_[key] = v; return; }
    v.clear();
    for (const Json& e : list(key)) {
      if (!e.is_number()) mismatch(key, "array of numbers");
      v.push_back(e.get<double>());
    }
  }
  void operator()(const char* key, std::vector<int>& v) {
    if (!reading_) { j_[key] = v; return; }
    v.clear();
    for (const Json& e : list(key)) {
      if (!e.is_number_integer()) mismatch(key, "array of integers");
      v.push_back(e.get<int>());
    }
  }
  void operator()(const char* key, std::vector<MsVariant>& v) {
    if (!reading_) {
      Json arr = Json::array();
      for (MsVariant m : v) arr.push_back(variant_name(m));
      j_[key] = arr;
      return;
    }
    v.clear();
    for (const Json& e : list(key)) {
      if (!e.is_string()) mismatch(key, "array of variant names");
      try {
        v.push_back(parse_variant(e.get<std::string>()));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string(key) + ": " + ex.what());
      }
    }
  }

 private:
  const Json& at(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(std::string("missing key: ") + key);
    return j_.at(key);
  }

  /// Arrays, or a comma-separated string from a command-line override.
  Json list(const char* key) const {
    const Json& x = at(key);
    if (x.is_array()) return x;
    if (x.is_number()) return Json::array({x});
    if (x.is_string()) {
      Json arr = Json::array();
      std::stringstream ss(x.get<std::string>());
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(parse_value(trim(item)));
      return arr;
    }
    mismatch(key, "array");
  }

  template <typename I>
  void integer(const char* key, I& v) {
    if (!reading_) { j_[key] = v; return; }
    const Json& x = at(key);
    if (!x.is_number_integer()) mismatch(key, "integer");
    v = x.get<I>();
  }

  [[noreturn]] static void mismatch(const char* key, const char* want) {
    throw ConfigError(std::string("type mismatch for key '") + key + "': expected " + want);
  }

  Json& j_;
  bool reading_;
};

void bind(Binder& b, VolterraConfig& c) {
  b("T", c.steps);
  b("dt", c.dt);
  b("cutoff", c.cutoff);
  b("N", c.n);
  b("alpha", c.alpha);
  b("lr_linear", c.lr_linear);
  b("lr_quad", c.lr_quad);
  b("lr_mlp", c.lr_mlp);
  b("mlp_hidden", c.mlp_hidden);
  b("log_every", c.log_every);
  b("trailing", c.trailing);
  b("kernel_size", c.kernel_size);
  b("wg_a", c.wg.a);
  b("wg_m", c.wg.m);
  b("wg_k", c.wg.k);
  b("wg_tau_max", c.wg.tau_max);
  b("wg_alpha", c.wg.alpha);
  b("wg_dt", c.wg_dt);
  b("seed", c.seed);
}

void bind(Binder& b, SelectiveCopyConfig& c) {
  b("token_dim", c.token_dim);
  b("informative", c.layout.informative);
  b("per_episode", c.layout.per_episode);
  b("distractors", c.layout.distractors);
  b("d_model", c.d_model);
  b("N", c.n);
  b("timescale", c.timescale);
  b("dt", c.dt);
  b("g_max", c.g_max);
  b("pool_dim", c.pool_dim);
  b("hidden", c.hidden);
  b("lr", c.lr);
  b("weight_decay", c.weight_decay);
  b("episodes", c.episodes);
  b("eval_every", c.eval_every);
  b("eval_episodes", c.eval_episodes);
  b("exp_cache_bins", c.exp_cache_bins);
  b("g_lo", c.g_lo);
  b("seed", c.seed);
}

void bind(Binder& b, AssocRecallConfig& c) {
  b("token_dim", c.token_dim);
  b("set_size", c.layout.set_size);
  b("T", c.layout.length);
  b("max_retries", c.layout.max_retries);
  b("d_model", c.d_model);
  b("n_hippo", c.n_hippo);
  b("timescale", c.timescale);
  b("dt", c.dt);
  b("n_assoc", c.n_assoc);
  b("gate_hidden", c.gate_hidden);
  b("eps", c.eps);
  b("lr", c.lr);
  b("weight_decay", c.weight_decay);
  b("iterations", c.iterations);
  b("eval_every", c.eval_every);
  b("eval_episodes", c.eval_episodes);
  b("seed", c.seed);
}

void bind(Binder& b, MultiscaleConfig& c) {
  b("trials", c.trials);
  b("T", c.length);
  b("ou_components", c.ou_components);
  b("ou_tau_lo", c.ou_tau_lo);
  b("ou_tau_hi", c.ou_tau_hi);
  b("N", c.n);
  b("M", c.m);
  b("tau0", c.tau0);
  b("eps", c.eps);
  b("dt", c.dt);
  b("variants", c.variants);
  b("baselines", c.baselines);
  b("horizon_lo_exp", c.horizon_lo_exp);
  b("horizon_step", c.horizon_step);
  b("horizon_count", c.horizon_count);
  b("grid_points", c.grid_points);
  b("dump_horizons", c.dump_horizons);
  b("seed", c.seed);
  b("threads", c.threads);
}

/// The two-horizon comparison maps onto H_short / H_long.
struct ForecastBinding {
  ForecastConfig& c;
  double h_short = 4.0, h_long = 32.0;
};

void bind(Binder& b, ForecastBinding& f) {
  ForecastConfig& c = f.c;
  b("T", c.length);
  b("H_short", f.h_short);
  b("H_long", f.h_long);
  b("N", c.n);
  b("sys23_timescale", c.history_timescale);
  b("rank", c.rank);
  b("rank_sweep", c.rank_sweep);
  b("ridge", c.ridge);
  b("floor_rel", c.floor_rel);
  b("center", c.center);
  b("warmup", c.warmup);
  b("dt", c.dt);
  b("lengthscales", c.lengthscales);
  b("weights", c.weights);
  b("lag_points", c.lag_points);
  b("eigen_count", c.eigen_count);
  b("seed", c.seed);
}

template <typename Config>
Json to_json(Config c) {
  Json j = Json::object();
  Binder b(j, false);
  bind(b, c);
  return j;
}

template <typename Config>
Config from_json(const Json& params) {
  Config c;
  Json j = params;
  Binder b(j, true);
  bind(b, c);
  return c;
}

template <typename Config>
Config validated(Config c) {
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

Json parse_config_text(const std::string& text) {
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '{') {
    Json j = Json::parse(t, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config: malformed JSON object");
    return j;
  }
  Json j = Json::object();
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    j[key] = parse_value(trim(line.substr(eq + 1)));
  }
  return j;
}

Json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_overrides(Json& params, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + o);
    params[trim(o.substr(0, eq))] = parse_value(trim(o.substr(eq + 1)));
  }
}

Json default_params(const std::string& experiment) {
  if (experiment == "volterra") return to_json(VolterraConfig{});
  if (experiment == "selective-copy") return to_json(SelectiveCopyConfig{});
  if (experiment == "assoc-recall") return to_json(AssocRecallConfig{});
  if (experiment == "multiscale") return to_json(MultiscaleConfig{});
  if (experiment == "forecast") {
    ForecastConfig c;
    ForecastBinding f{c};
    Json j = Json::object();
    Binder b(j, false);
    bind(b, f);
    return j;
  }
  throw ConfigError("unknown experiment: " + experiment);
}

Json resolve_params(const std::string& experiment, const Json& params) {
  if (!params.is_object()) throw ConfigError("config must be a key/value object");
  Json merged = default_params(experiment);
  for (const auto& [key, value] : params.items()) {
    if (!merged.contains(key)) throw ConfigError("unknown key '" + key + "' for " + experiment);
    merged[key] = value;
  }
  // Type and range checks.
  if (experiment == "volterra") volterra_config(merged);
  else if (experiment == "selective-copy") selective_copy_config(merged);
  else if (experiment == "assoc-recall") assoc_config(merged);
  else if (experiment == "multiscale") multiscale_config(merged);
  else forecast_config(merged);
  return merged;
}

VolterraConfig volterra_config(const Json& params) { return validated(from_json<VolterraConfig>(params)); }
SelectiveCopyConfig selective_copy_config(const Json& params) {
  return validated(from_json<SelectiveCopyConfig>(params));
}
AssocRecallConfig assoc_config(const Json& params) { return validated(from_json<AssocRecallConfig>(params)); }
MultiscaleConfig multiscale_config(const Json& params) { return validated(from_json<MultiscaleConfig>(params)); }

ForecastConfig forecast_config(const Json& params) {
  ForecastConfig c;
  ForecastBinding f{c};
  Json j = params;
  Binder b(j, true);
  bind(b, f);
  c.horizons = {f.h_short, f.h_long};
  return validated(c);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace hippozoo::cli
