#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "matchsim/csv.hpp"
#include "matchsim/harness.hpp"
#include "matchsim/rng.hpp"

namespace fs = std::filesystem;
using namespace matchsim;

namespace {

struct Invocation {
  std::string config_path;
  std::string profile = "desk";
  std::map<std::string, std::string> overrides;
};

Settings resolve(const Invocation& inv) {
  Settings s = Settings::profile(inv.profile);
  if (!inv.config_path.empty()) s.merge(Settings::load(inv.config_path));
  if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env != '\0') s.set("experiment.seed", env);
  for (const auto& [k, v] : inv.overrides) s.set(k, v);
  return s;
}

std::unique_ptr<GapModel> load_model(const Settings& s, bool required) {
  const auto path = s.find("model.path");
  if (!path || path->empty()) {
    if (required) throw ConfigError("this command needs a trained model: set model.path");
    return nullptr;
  }
  if (!fs::exists(*path)) throw ConfigError("model file not found: " + *path);
  return std::make_unique<GapModel>(GapModel::load(*path));
}

fs::path output_path(const Settings& s, const std::string& fallback) {
  const auto p = s.find("output.path");
  return p && !p->empty() ? fs::path(*p) : fs::path(fallback);
}

void emit(const Settings& s, const std::string& text) {
  const auto p = s.find("output.path");
  if (p && !p->empty()) {
    write_text(*p, text);
  } else {
    std::cout << text;
  }
}

int cmd_simulate(const Settings& s) {
  const ExperimentConfig cfg = experiment_from_settings(s);
  const auto model = load_model(s, cfg.needs_model());
  MarketConfig m = cfg.market_at(0);
  m.seed = derive_run_seed(cfg.seed, 0, 0);
  const PolicySpec& spec = cfg.policies.front();
  auto policy = make_policy(spec, cfg.hybrid_at(0, spec), model.get());
  const TraceSummary trace = simulate(m, *policy);
  nlohmann::json j = to_json(trace);
  j["fingerprint"] = cfg.fingerprint;
  j["policy"] = spec.label();
  const MetricsReport r = compute_metrics(trace, m.density());
  j["metrics"] = {{"loss", r.loss},
                  {"mean_wait", r.mean_wait},
                  {"congestion", r.congestion},
                  {"usage_patient", r.usage.patient},
                  {"usage_greedy", r.usage.greedy},
                  {"switch_count", r.usage.switch_count}};
  emit(s, j.dump() + "\n");
  std::cerr << spec.label() << ": loss " << r.loss << ", mean wait " << r.mean_wait << ", congestion "
            << r.congestion << '\n';
  return 0;
}

int cmd_sweep(const Settings& s) {
  const ExperimentConfig cfg = experiment_from_settings(s);
  const auto model = load_model(s, cfg.needs_model());
  emit(s, sweep_csv(run_experiment(cfg, model.get()), cfg.fingerprint));
  return 0;
}

int cmd_heatmap(const Settings& s) {
  const auto model = load_model(s, true);
  const fs::path dir = output_path(s, "heatmap_out");
  run_heatmap(grid_from_settings(s), oracle_from_settings(s), s.get_doubles("heatmap.taus"), model.get(), dir,
              s.fingerprint());
  std::cerr << "wrote heatmap.csv, contours_oracle.csv, contours_fitted.csv to " << dir << '\n';
  return 0;
}

int cmd_calibrate(const Settings& s) {
  const fs::path dir = output_path(s, "calibration_out");
  const auto mp = s.find("model.path");
  const fs::path model_path = mp && !mp->empty() ? fs::path(*mp) : dir / "model.json";
  const auto res = run_calibration(grid_from_settings(s), oracle_from_settings(s), train_from_settings(s), model_path,
                                   dir / "dataset.csv", s.fingerprint());
  std::cerr << "held-out accuracy " << res.trained.report.holdout_accuracy << " after " << res.trained.report.epochs
            << " epochs; model written to " << model_path << '\n';
  return 0;
}

int cmd_schedule(const Settings& s) {
  const ExperimentConfig cfg = experiment_from_settings(s);
  const auto model = load_model(s, true);
  const double T = cfg.market.horizon;
  const double from = s.has("schedule.from") ? s.get_double("schedule.from") : std::max(0.0, T - 5.0);
  const double to = s.has("schedule.to") ? s.get_double("schedule.to") : T;
  const TraceSummary trace = run_schedule_report(cfg, *model, from, to, {});
  emit(s, schedule_csv(schedule_rows(trace, from, to), cfg.fingerprint));
  return 0;
}

std::string join_values(const std::vector<double>& xs) {
  std::vector<std::string> parts;
  for (double x : xs) parts.push_back(csv::num(x));
  return csv::join(parts);
}

int cmd_reproduce(Settings s) {
  const fs::path dir = output_path(s, "reproduce_out");
  fs::create_directories(dir);
  const GridSpec grid = grid_from_settings(s);
  const OracleConfig oracle = oracle_from_settings(s);
  const auto taus = s.get_doubles("reproduce.taus");

  std::vector<GapSample> samples;
  std::unique_ptr<GapModel> model = load_model(s, false);
  if (model) {
    std::cerr << "labeling grid (" << grid.size() << " points)\n";
    samples = build_training_grid(grid, oracle);
    write_dataset(dir / "dataset.csv", samples, s.fingerprint());
  } else {
    std::cerr << "calibrating on " << grid.size() << " grid points\n";
    auto res = run_calibration(grid, oracle, train_from_settings(s), dir / "model.json", dir / "dataset.csv",
                               s.fingerprint());
    samples = std::move(res.dataset);
    model = std::make_unique<GapModel>(std::move(res.trained.model));
    s.set("model.path", (dir / "model.json").string());
  }
  run_heatmap(grid, oracle, s.get_doubles("heatmap.taus"), model.get(), dir, s.fingerprint(), &samples);

  std::string policies = "greedy,patient";
  for (double t : taus) policies += ",hybrid@" + csv::num(t);

  Settings density = s;
  density.set("experiment.policies", policies);
  density.set("sweep.axis", "d");
  density.set("sweep.values", join_values(s.get_doubles("reproduce.d_values")));
  std::cerr << "density sweep\n";
  {
    const auto cfg = experiment_from_settings(density);
    write_sweep_csv(dir / "sweep_density.csv", run_experiment(cfg, model.get()), cfg.fingerprint);
  }

  Settings window = s;
  window.set("experiment.policies", "greedy,patient,hybrid");
  window.set("sweep.axis", "w");
  window.set("sweep.values", join_values(s.get_doubles("reproduce.w_values")));
  std::cerr << "window sweep\n";
  {
    const auto cfg = experiment_from_settings(window);
    write_sweep_csv(dir / "sweep_window.csv", run_experiment(cfg, model.get()), cfg.fingerprint);
  }

  std::cerr << "schedule\n";
  {
    const auto cfg = experiment_from_settings(s);
    const double T = cfg.market.horizon;
    const double from = s.has("schedule.from") ? s.get_double("schedule.from") : std::max(0.0, T - 5.0);
    const double to = s.has("schedule.to") ? s.get_double("schedule.to") : T;
    run_schedule_report(cfg, *model, from, to, dir / "schedule.csv");
  }
  std::cerr << "outputs in " << dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic matching market simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Invocation inv;
  std::vector<std::string> sets;
  app.add_option("--config", inv.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--profile", inv.profile, "desk (T=50, T0=25) or paper (T=100, T0=50)")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--set", sets, "override as key=value (repeatable)");
  for (const auto& [key, help] : Settings::known_keys()) {
    app.add_option_function<std::string>(
        "--" + key, [&inv, key = key](const std::string& v) { inv.overrides[key] = v; }, help);
  }
  app.footer(std::string("Environment: ") + kSeedEnvVar + " overrides experiment.seed.");

  std::string chosen;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"simulate", "one run of the first policy; JSON trace to output.path or stdout"},
           {"sweep", "k runs per (sweep point, policy); CSV to output.path or stdout"},
           {"heatmap", "oracle and fitted gap surface plus contours into the output.path directory"},
           {"calibrate", "label the grid and train the gap model into the output.path directory"},
           {"schedule", "per-window hybrid decisions over [schedule.from, schedule.to]"},
           {"reproduce", "full figure pipeline into the output.path directory"}}) {
    app.add_subcommand(name, help)->callback([&chosen, name = name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      inv.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    const Settings s = resolve(inv);
    if (chosen == "simulate") return cmd_simulate(s);
    if (chosen == "sweep") return cmd_sweep(s);
    if (chosen == "heatmap") return cmd_heatmap(s);
    if (chosen == "calibrate") return cmd_calibrate(s);
    if (chosen == "schedule") return cmd_schedule(s);
    return cmd_reproduce(s);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
