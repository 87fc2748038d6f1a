#include "hippozoo/cli.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>

namespace hippozoo::cli {

namespace fs = std::filesystem;

namespace {

void write_rows(const fs::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Json vec_json(const Vec& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

struct Writer {
  fs::path dir;
  std::vector<std::string> files;

  void csv(const std::string& name, const std::vector<std::string>& header, const Mat& m) {
    write_csv(dir / name, header, m);
    files.push_back(name);
  }
  void rows(const std::string& name, const std::vector<std::string>& header,
            const std::vector<std::vector<std::string>>& r) {
    write_rows(dir / name, header, r);
    files.push_back(name);
  }
  void json(const std::string& name, const Json& j) {
    write_json(dir / name, j);
    files.push_back(name);
  }
};

void run_volterra_reports(const Json& params, Writer& w) {
  const VolterraResult r = run_volterra(volterra_config(params));
  w.csv("volterra.csv", {"step", "cum_err_linear", "cum_err_quadratic", "cum_err_mlp"}, r.cumulative);
  std::vector<std::vector<std::string>> kernel;
  for (Eigen::Index i = 0; i < r.true_kernel.rows(); ++i)
    for (Eigen::Index j = 0; j < r.true_kernel.cols(); ++j)
      kernel.push_back({std::to_string(i), std::to_string(j), format_number(r.inferred_kernel(i, j)),
                        format_number(r.true_kernel(i, j))});
  w.rows("kernel.csv", {"lag_i", "lag_j", "inferred", "true"}, kernel);
  w.json("summary.json", {{"trailing_mse", {{"linear", r.trailing_mse(0)},
                                            {"quadratic", r.trailing_mse(1)},
                                            {"mlp", r.trailing_mse(2)}}},
                          {"trailing_ratio_quadratic_over_linear", r.trailing_mse(1) / r.trailing_mse(0)},
                          {"kernel_correlation", r.kernel_correlation}});
}

void run_selective_copy_reports(const Json& params, Writer& w) {
  const SelectiveCopyConfig cfg = selective_copy_config(params);
  SelectiveCopyResult r = run_selective_copy(cfg);
  Mat rows(static_cast<Eigen::Index>(r.rows.size()), 5);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    rows.row(static_cast<Eigen::Index>(i)) << static_cast<double>(row.episode), row.train_loss, row.accuracy,
        row.mean_g_informative, row.mean_g_uninformative;
  }
  w.csv("selective_copy.csv", {"episode", "train_loss", "accuracy", "mean_g_informative", "mean_g_uninformative"},
        rows);
  for (const auto& d : r.dumps)
    w.csv("dump_episode_" + std::to_string(d.episode) + ".csv",
          concat({"time", "g", "density"}, numbered("functional_slot", d.table.cols() - 3)), d.table);
  const SalienceEval& e = r.final_eval;
  w.json("summary.json", {{"accuracy", e.accuracy},
                          {"mean_g_informative", e.mean_g_informative},
                          {"mean_g_uninformative", e.mean_g_uninformative},
                          {"mean_g_write", e.mean_g_write},
                          {"functional_argmax_hits", e.functional_argmax_hits}});
  nn::save_checkpoint((w.dir / "model.ckpt").string(), r.model.params());
  w.files.push_back("model.ckpt");
}

void run_assoc_reports(const Json& params, Writer& w) {
  AssocRecallResult r = run_assoc_recall(assoc_config(params));
  Mat rows(static_cast<Eigen::Index>(r.rows.size()), 3);
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    rows.row(static_cast<Eigen::Index>(i)) << static_cast<double>(r.rows[i].iteration), r.rows[i].loss,
        r.rows[i].recall_accuracy;
  w.csv("assoc_recall.csv", {"iteration", "loss", "recall_accuracy"}, rows);
  w.csv("address_dump.csv", {"step", "x_key", "x_query", "g_write", "g_out"}, r.address_dump);
  const Eigen::Index d = (r.memory_dump.cols() - 1) / 2;
  w.csv("memory_dump.csv", concat(concat({"x"}, numbered("before_", d)), numbered("after_", d)), r.memory_dump);
  w.json("summary.json", {{"recall_accuracy", r.final_accuracy}});
  nn::save_checkpoint((w.dir / "model.ckpt").string(), r.model.params());
  w.files.push_back("model.ckpt");
}

void run_multiscale_reports(const Json& params, Writer& w) {
  const MultiscaleResult r = run_multiscale(multiscale_config(params));
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows)
    rows.push_back({format_number(row.horizon), row.system, format_number(row.mse_mean), format_number(row.mse_sem)});
  w.rows("multiscale.csv", {"horizon", "system", "mse_mean", "mse_sem"}, rows);
  for (const auto& d : r.dumps)
    w.csv("reconstruction_L" + format_number(d.horizon) + ".csv", concat({"s", "time", "truth"}, d.systems), d.table);
}

void run_forecast_reports(const Json& params, Writer& w) {
  const ForecastResult r = run_forecast(forecast_config(params));
  Json summary = {{"signal_std", r.signal_std}, {"floored_mass", r.floored_mass}, {"horizons", Json::array()}};
  std::vector<std::vector<std::string>> overview;
  for (const auto& h : r.horizons) {
    const std::string tag = "forecast_H" + format_number(h.horizon);
    Mat sweep(static_cast<Eigen::Index>(h.rank_errors.size()), 2);
    for (std::size_t i = 0; i < h.rank_errors.size(); ++i)
      sweep.row(static_cast<Eigen::Index>(i)) << h.rank_errors[i].first, h.rank_errors[i].second;
    w.csv(tag + "_rank_sweep.csv", {"rank", "train_error"}, sweep);
    w.csv(tag + "_forecast.csv", {"tau", "truth", "forecast"}, h.forecast);
    w.csv(tag + "_memory.csv", {"lag", "truth", "system3", "predictive_memory"}, h.memory);
    Mat eig(h.lags.size(), 1 + h.metric.eigenfunctions.cols());
    eig << h.lags, h.metric.eigenfunctions;
    w.csv(tag + "_eigenfunctions.csv", concat({"lag"}, numbered("f", h.metric.eigenfunctions.cols())), eig);
    w.csv(tag + "_lag_kernel.csv", numbered("lag", h.lags.size()), h.metric.lag_kernel);
    summary["horizons"].push_back({{"horizon", h.horizon},
                                   {"rank", h.map.rank},
                                   {"lag_rmse", h.lag_rmse},
                                   {"top_dirichlet_energy", h.top_dirichlet},
                                   {"q_eigenvalues", vec_json(h.metric.eigenvalues)},
                                   {"singular_values", vec_json(h.map.singular)}});
    for (const auto& [d, err] : h.rank_errors)
      overview.push_back({format_number(h.horizon), std::to_string(d), format_number(err)});
  }
  w.rows("forecast.csv", {"horizon", "rank", "train_error"}, overview);
  w.json("summary.json", summary);
}

}  // namespace

void write_csv(const fs::path& path, const std::vector<std::string>& header, const Mat& m) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols())
    throw std::invalid_argument("write_csv: header width does not match the table");
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i].push_back(format_number(m(i, j)));
  write_rows(path, header, rows);
}

std::vector<std::string> run_experiment(const RunOptions& options, std::ostream& log) {
  fs::create_directories(options.output_dir);
  Writer w{options.output_dir, {}};
  log << "experiment: " << options.experiment << "\nresolved config:\n" << options.params.dump(2) << '\n';
  w.json("config.json", options.params);
  const std::string& e = options.experiment;
  if (e == "volterra") run_volterra_reports(options.params, w);
  else if (e == "selective-copy") run_selective_copy_reports(options.params, w);
  else if (e == "assoc-recall") run_assoc_reports(options.params, w);
  else if (e == "multiscale") run_multiscale_reports(options.params, w);
  else if (e == "forecast") run_forecast_reports(options.params, w);
  else throw ConfigError("unknown experiment: " + e);
  for (const auto& f : w.files) log << "wrote " << (options.output_dir / f).string() << '\n';
  return w.files;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"HiPPO memory-system experiments"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  for (const std::string& name : experiments()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config,-c", config_path, "config file (JSON object or key = value lines)");
    sub->add_option("--out,-o", out_dir, "output directory");
    sub->add_option("overrides", overrides, "key=value overrides");
  }
  app.add_subcommand("verify", "run the property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  if (name == "verify") {
    bool ok = true;
    for (const auto& r : property_suite()) {
      out << (r.pass ? "PASS " : "FAIL ") << r.name;
      if (!r.detail.empty()) out << " (" << r.detail << ")";
      out << '\n';
      ok = ok && r.pass;
    }
    return ok ? 0 : 1;
  }

  RunOptions options;
  options.experiment = name;
  try {
    Json params = config_path.empty() ? Json::object() : load_config_file(config_path);
    apply_overrides(params, overrides);
    options.params = resolve_params(name, params);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }
  if (!out_dir.empty()) {
    options.output_dir = out_dir;
  } else {
    const char* env = std::getenv("HIPPOZOO_OUTPUT_DIR");
    options.output_dir = fs::path(env && *env ? env : "results") / name;
  }
  try {
    run_experiment(options, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hippozoo::cli
