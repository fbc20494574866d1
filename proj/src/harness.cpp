#include "matchsim/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "matchsim/csv.hpp"
#include "matchsim/parallel.hpp"
#include "matchsim/rng.hpp"

namespace matchsim {

std::string PolicySpec::label() const {
  switch (selector) {
    case PolicySelector::Greedy:
      return "greedy";
    case PolicySelector::Patient:
      return "patient";
    case PolicySelector::Hybrid:
      break;
  }
  return "hybrid";
}

PolicySpec PolicySpec::parse(const std::string& text) {
  if (text == "greedy") return {PolicySelector::Greedy, std::nullopt};
  if (text == "patient") return {PolicySelector::Patient, std::nullopt};
  if (text == "hybrid") return {PolicySelector::Hybrid, std::nullopt};
  if (text.rfind("hybrid@", 0) == 0) {
    const std::string v = text.substr(7);
    try {
      std::size_t used = 0;
      const double tau = std::stod(v, &used);
      if (used == v.size() && tau >= 0.0 && std::isfinite(tau)) return {PolicySelector::Hybrid, tau};
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid hybrid threshold in '" + text + "'");
  }
  throw ConfigError("unknown policy '" + text + "' (expected greedy, patient, hybrid or hybrid@<tau>)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::None:
      return "none";
    case SweepAxis::Density:
      return "d";
    case SweepAxis::Tau:
      return "tau";
    case SweepAxis::Window:
      return "w";
    case SweepAxis::Mu:
      return "mu";
    case SweepAxis::Sigma:
      return "sigma";
  }
  return "none";
}

SweepAxis parse_sweep_axis(const std::string& text) {
  for (auto a : {SweepAxis::None, SweepAxis::Density, SweepAxis::Tau, SweepAxis::Window, SweepAxis::Mu,
                 SweepAxis::Sigma}) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown sweep axis '" + text + "' (expected none, d, tau, w, mu or sigma)");
}

MarketConfig ExperimentConfig::market_at(std::size_t point) const {
  MarketConfig m = market;
  double d = density.value_or(market.density());
  if (axis == SweepAxis::Density) d = sweep_values.at(point);
  if (axis == SweepAxis::Mu) m.departure.mu = sweep_values.at(point);
  if (axis == SweepAxis::Sigma) m.departure.sigma = sweep_values.at(point);
  if (density || axis == SweepAxis::Density) m.p = m.lambda > 0.0 ? d / m.lambda : 0.0;
  return m;
}

HybridSettings ExperimentConfig::hybrid_at(std::size_t point, const PolicySpec& spec) const {
  HybridSettings h = hybrid;
  if (axis == SweepAxis::Tau) h.tau = sweep_values.at(point);
  if (axis == SweepAxis::Window) h.window = sweep_values.at(point);
  if (spec.tau) h.tau = *spec.tau;
  return h;
}

bool ExperimentConfig::needs_model() const {
  return std::any_of(policies.begin(), policies.end(),
                     [](const PolicySpec& s) { return s.selector == PolicySelector::Hybrid; });
}

void ExperimentConfig::validate() const {
  if (k < 1) throw ConfigError("experiment.k must be at least 1");
  if (policies.empty()) throw ConfigError("experiment.policies must name at least one policy");
  if (density && !(*density > 0.0 && std::isfinite(*density))) throw ConfigError("market.d must be positive");
  if (axis != SweepAxis::None && sweep_values.empty()) throw ConfigError("sweep.values is empty");
  for (double v : sweep_values) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    if (axis == SweepAxis::Density && !(v > 0.0)) throw ConfigError("density sweep values must be positive");
    if (axis == SweepAxis::Tau && v < 0.0) throw ConfigError("tau sweep values must be non-negative");
    if (axis == SweepAxis::Window && !(v > 0.0)) throw ConfigError("window sweep values must be positive");
    if (axis == SweepAxis::Sigma && v < 0.0) throw ConfigError("sigma sweep values must be non-negative");
  }
  if (usage_from && usage_to && *usage_from > *usage_to) throw ConfigError("usage.from exceeds usage.to");
  const ConstantGap placeholder(0.0);
  for (std::size_t i = 0; i < points(); ++i) {
    market_at(i).validate();
    for (const auto& spec : policies) {
      const HybridSettings h = hybrid_at(i, spec);
      HybridConfig hc{h.tau, h.window, &placeholder, h.min_samples, h.initial, h.source};
      hc.validate();
    }
  }
}

ExperimentConfig experiment_from_settings(const Settings& s) {
  ExperimentConfig cfg;
  cfg.market.lambda = s.get_double("market.lambda");
  cfg.market.horizon = s.get_double("market.T");
  cfg.market.mixing = s.get_double("market.T0");
  cfg.market.departure = {s.get_double("market.mu"), s.get_double("market.sigma")};
  if (s.has("market.p")) {
    cfg.market.p = s.get_double("market.p");
  } else {
    cfg.density = s.get_double("market.d");
  }
  cfg.policies.clear();
  for (const auto& name : s.get_strings("experiment.policies")) cfg.policies.push_back(PolicySpec::parse(name));
  cfg.hybrid.tau = s.get_double("hybrid.tau");
  cfg.hybrid.window = s.get_double("hybrid.w");
  cfg.hybrid.min_samples = s.get_size("hybrid.min_samples");
  const std::string source = s.get_string("hybrid.source");
  if (source == "reported") {
    cfg.hybrid.source = SampleSource::ReportedSojourn;
  } else if (source == "observed") {
    cfg.hybrid.source = SampleSource::ObservedDeparture;
  } else {
    throw ConfigError("hybrid.source must be reported or observed, got '" + source + "'");
  }
  cfg.hybrid.initial = parse_policy_kind(s.get_string("hybrid.initial"));
  cfg.k = s.get_size("experiment.k");
  cfg.seed = s.get_u64("experiment.seed");
  cfg.workers = s.get_size("experiment.workers");
  if (cfg.workers == 0) cfg.workers = default_workers();
  cfg.axis = parse_sweep_axis(s.get_string("sweep.axis"));
  if (cfg.axis != SweepAxis::None) cfg.sweep_values = s.get_doubles("sweep.values");
  if (s.has("usage.from")) cfg.usage_from = s.get_double("usage.from");
  if (s.has("usage.to")) cfg.usage_to = s.get_double("usage.to");
  cfg.fingerprint = s.fingerprint();
  cfg.validate();
  return cfg;
}

GridSpec grid_from_settings(const Settings& s) {
  GridSpec g{s.get_double("grid.mu_min"),    s.get_double("grid.mu_max"),    s.get_double("grid.mu_step"),
             s.get_double("grid.sigma_min"), s.get_double("grid.sigma_max"), s.get_double("grid.sigma_step")};
  g.validate();
  return g;
}

OracleConfig oracle_from_settings(const Settings& s) {
  OracleConfig o;
  o.lambda = s.get_double("market.lambda");
  o.horizon = s.get_double("market.T");
  o.mixing = s.get_double("market.T0");
  o.density = s.get_double("oracle.d");
  o.runs = s.get_size("oracle.k");
  o.seed = s.get_u64("experiment.seed");
  o.workers = s.get_size("experiment.workers");
  if (o.workers == 0) o.workers = default_workers();
  o.validate();
  return o;
}

TrainHyperparams train_from_settings(const Settings& s) {
  TrainHyperparams hp;
  hp.layer_sizes.clear();
  for (double v : s.get_doubles("train.layers")) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("train.layers expects positive integers");
    hp.layer_sizes.push_back(static_cast<std::size_t>(v));
  }
  hp.learning_rate = s.get_double("train.lr");
  hp.max_epochs = s.get_size("train.epochs");
  hp.holdout_fraction = s.get_double("train.holdout");
  hp.mode = parse_model_mode(s.get_string("train.mode"));
  hp.link = parse_target_link(s.get_string("train.link"));
  hp.link_scale = s.get_double("train.link_scale");
  hp.tau = s.get_double("train.tau");
  hp.seed = s.get_u64("train.seed");
  if (hp.layer_sizes.size() < 2 || hp.layer_sizes.front() != 2 || hp.layer_sizes.back() != 1) {
    throw ConfigError("train.layers must start with 2 and end with 1");
  }
  if (!(hp.learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(hp.holdout_fraction >= 0.0 && hp.holdout_fraction < 1.0)) throw ConfigError("train.holdout must be in [0, 1)");
  if (!(hp.link_scale > 0.0)) throw ConfigError("train.link_scale must be positive");
  return hp;
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  if (xs.empty()) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  return r;
}

std::unique_ptr<MatchingPolicy> make_policy(const PolicySpec& spec, const HybridSettings& hybrid,
                                            const GapPredictor* model) {
  switch (spec.selector) {
    case PolicySelector::Greedy:
      return std::make_unique<GreedyPolicy>();
    case PolicySelector::Patient:
      return std::make_unique<PatientPolicy>();
    case PolicySelector::Hybrid:
      break;
  }
  if (model == nullptr) throw ConfigError("hybrid policy requires a gap model (model.path)");
  HybridConfig hc{hybrid.tau, hybrid.window, model, hybrid.min_samples, hybrid.initial, hybrid.source};
  return std::make_unique<HybridPolicy>(hc);
}

namespace {

MetricsReport run_one(const ExperimentConfig& cfg, std::size_t point, const PolicySpec& spec,
                      const GapPredictor* model, std::size_t run) {
  MarketConfig m = cfg.market_at(point);
  m.seed = derive_run_seed(cfg.seed, point, run);
  auto policy = make_policy(spec, cfg.hybrid_at(point, spec), model);
  const TraceSummary trace = simulate(m, *policy);
  MetricsReport r = compute_metrics(trace, m.density());
  if (cfg.usage_from || cfg.usage_to) {
    r.usage = compute_usage(trace, cfg.usage_from.value_or(m.mixing), cfg.usage_to.value_or(m.horizon));
  }
  return r;
}

SweepRow aggregate(const ExperimentConfig& cfg, std::size_t point, const PolicySpec& spec,
                   const std::vector<MetricsReport>& runs) {
  const MarketConfig m = cfg.market_at(point);
  SweepRow row;
  row.policy = spec.label();
  if (spec.selector == PolicySelector::Hybrid) {
    const HybridSettings h = cfg.hybrid_at(point, spec);
    row.tau = h.tau;
    row.w = h.window;
  }
  row.d = m.density();
  row.lambda = m.lambda;
  row.T = m.horizon;
  row.T0 = m.mixing;
  row.k = runs.size();
  row.mu = m.departure.mu;
  row.sigma = m.departure.sigma;
  std::vector<double> loss, wait, cong;
  double patient = 0.0, greedy = 0.0, switches = 0.0;
  for (const auto& r : runs) {
    loss.push_back(r.loss);
    wait.push_back(r.mean_wait);
    cong.push_back(r.congestion);
    patient += r.usage.patient;
    greedy += r.usage.greedy;
    switches += static_cast<double>(r.usage.switch_count);
  }
  const double n = static_cast<double>(runs.size());
  const auto l = mean_se(loss), w = mean_se(wait), c = mean_se(cong);
  row.loss_mean = l.mean;
  row.loss_se = l.se;
  row.wait_mean = w.mean;
  row.wait_se = w.se;
  row.congestion_mean = c.mean;
  row.congestion_se = c.se;
  row.usage_patient = patient / n;
  row.usage_greedy = greedy / n;
  row.switch_count_mean = switches / n;
  return row;
}

}  // namespace

std::vector<MetricsReport> run_cell(const ExperimentConfig& cfg, std::size_t point, const PolicySpec& spec,
                                    const GapPredictor* model) {
  std::vector<MetricsReport> out(cfg.k);
  parallel_for(cfg.k, cfg.workers, [&](std::size_t r) { out[r] = run_one(cfg, point, spec, model, r); });
  return out;
}

std::vector<SweepRow> run_experiment(const ExperimentConfig& cfg, const GapPredictor* model) {
  cfg.validate();
  if (cfg.needs_model() && model == nullptr) throw ConfigError("hybrid policy requires a gap model (model.path)");
  const std::size_t points = cfg.points();
  const std::size_t policies = cfg.policies.size();
  std::vector<MetricsReport> reports(points * policies * cfg.k);
  parallel_for(reports.size(), cfg.workers, [&](std::size_t i) {
    const std::size_t run = i % cfg.k;
    const std::size_t pol = (i / cfg.k) % policies;
    const std::size_t point = i / (cfg.k * policies);
    reports[i] = run_one(cfg, point, cfg.policies[pol], model, run);
  });
  std::vector<std::size_t> order(points);
  for (std::size_t i = 0; i < points; ++i) order[i] = i;
  if (cfg.axis != SweepAxis::None) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cfg.sweep_values[a] < cfg.sweep_values[b]; });
  }
  std::vector<SweepRow> rows;
  for (std::size_t point : order) {
    for (std::size_t pol = 0; pol < policies; ++pol) {
      const auto first = reports.begin() + static_cast<std::ptrdiff_t>((point * policies + pol) * cfg.k);
      rows.push_back(aggregate(cfg, point, cfg.policies[pol], {first, first + static_cast<std::ptrdiff_t>(cfg.k)}));
    }
  }
  return rows;
}

const char* const kSweepHeader =
    "policy,tau,w,d,lambda,T,T0,k,loss_mean,loss_se,wait_mean,wait_se,congestion_mean,congestion_se,"
    "usage_patient,usage_greedy,switch_count_mean,mu,sigma";

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& fingerprint) {
  std::string out = csv::fingerprint_line(fingerprint) + "\n" + kSweepHeader + "\n";
  for (const auto& r : rows) {
    out += csv::join({r.policy, r.tau ? csv::num(*r.tau) : "", r.w ? csv::num(*r.w) : "", csv::num(r.d),
                      csv::num(r.lambda), csv::num(r.T), csv::num(r.T0), csv::num(r.k), csv::num(r.loss_mean),
                      csv::num(r.loss_se), csv::num(r.wait_mean), csv::num(r.wait_se), csv::num(r.congestion_mean),
                      csv::num(r.congestion_se), csv::num(r.usage_patient), csv::num(r.usage_greedy),
                      csv::num(r.switch_count_mean), csv::num(r.mu), csv::num(r.sigma)});
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::string& fingerprint) {
  write_text(path, sweep_csv(rows, fingerprint));
}

namespace {

std::string contours_csv(const std::vector<std::pair<double, ContourPoint>>& points, const std::string& fingerprint) {
  std::string out = csv::fingerprint_line(fingerprint) + "\ntau,sigma,mu\n";
  for (const auto& [tau, p] : points) out += csv::join({csv::num(tau), csv::num(p.sigma), csv::num(p.mu)}) + "\n";
  return out;
}

}  // namespace

HeatmapResult run_heatmap(const GridSpec& grid, const OracleConfig& oracle, const std::vector<double>& taus,
                          const GapPredictor* model, const std::filesystem::path& out_dir,
                          const std::string& fingerprint, const std::vector<GapSample>* precomputed) {
  if (model == nullptr) throw ConfigError("heatmap requires a gap model (model.path)");
  if (taus.empty()) throw ConfigError("heatmap.taus is empty");
  HeatmapResult res;
  res.samples = precomputed ? *precomputed : build_training_grid(grid, oracle);
  if (res.samples.size() != grid.size()) throw ConfigError("precomputed samples do not match the grid");
  for (double tau : taus) {
    for (const auto& p : oracle_boundary(res.samples, tau, grid)) res.oracle_contours.emplace_back(tau, p);
    for (const auto& p : extract_decision_boundary(*model, tau, grid)) res.fitted_contours.emplace_back(tau, p);
  }
  std::string heat = csv::fingerprint_line(fingerprint) + "\nmu,sigma,score,capped,score_fitted\n";
  for (const auto& s : res.samples) {
    heat += csv::join({csv::num(s.mu), csv::num(s.sigma), csv::num(s.score), s.capped ? "1" : "0",
                       csv::num(model->score({s.mu, s.sigma}))}) +
            "\n";
  }
  write_text(out_dir / "heatmap.csv", heat);
  write_text(out_dir / "contours_oracle.csv", contours_csv(res.oracle_contours, fingerprint));
  write_text(out_dir / "contours_fitted.csv", contours_csv(res.fitted_contours, fingerprint));
  return res;
}

nlohmann::json to_json(const TrainReport& r) {
  return {{"final_loss", r.final_loss},       {"holdout_accuracy", r.holdout_accuracy},
          {"holdout_rmse", r.holdout_rmse},   {"epochs", r.epochs},
          {"gradient_check_error", r.gradient_check_error}, {"train_count", r.train_count},
          {"holdout_count", r.holdout_count}};
}

CalibrationResult run_calibration(const GridSpec& grid, const OracleConfig& oracle, const TrainHyperparams& hp,
                                  const std::filesystem::path& model_path,
                                  const std::filesystem::path& dataset_path, const std::string& fingerprint) {
  CalibrationResult res{build_training_grid(grid, oracle), {}};
  if (!dataset_path.empty()) {
    if (dataset_path.has_parent_path()) std::filesystem::create_directories(dataset_path.parent_path());
    write_dataset(dataset_path, res.dataset, fingerprint);
  }
  const auto examples = to_training_examples(res.dataset);
  res.trained = train(examples, hp);
  if (!model_path.empty()) {
    if (model_path.has_parent_path()) std::filesystem::create_directories(model_path.parent_path());
    res.trained.model.save(model_path);
    auto report_path = model_path;
    report_path.replace_extension(".report.json");
    write_text(report_path, to_json(res.trained.report).dump(2) + "\n");
  }
  return res;
}

const char* const kScheduleHeader = "window_index,start,policy,mu_hat,sigma_hat,score_hat,batch_size,estimated";

std::vector<WindowRecord> schedule_rows(const TraceSummary& trace, double from, double to) {
  std::vector<WindowRecord> out;
  for (std::size_t i : select_windows(trace, from, to)) out.push_back(trace.policy_schedule[i]);
  return out;
}

std::string schedule_csv(const std::vector<WindowRecord>& rows, const std::string& fingerprint) {
  std::string out = csv::fingerprint_line(fingerprint) + "\n" + kScheduleHeader + "\n";
  for (const auto& w : rows) {
    out += csv::join({csv::num(w.index), csv::num(w.start), to_string(w.kind), csv::num(w.mu_hat),
                      csv::num(w.sigma_hat), csv::num(w.score_hat), csv::num(w.batch_size), w.estimated ? "1" : "0"});
    out += '\n';
  }
  return out;
}

TraceSummary run_schedule_report(const ExperimentConfig& cfg, const GapPredictor& model, double from, double to,
                                 const std::filesystem::path& out_path) {
  if (from > to) throw ConfigError("schedule interval is empty");
  MarketConfig m = cfg.market_at(0);
  m.seed = derive_run_seed(cfg.seed, 0, 0);
  const PolicySpec spec{PolicySelector::Hybrid, std::nullopt};
  auto policy = make_policy(spec, cfg.hybrid_at(0, spec), &model);
  TraceSummary trace = simulate(m, *policy);
  if (!out_path.empty()) write_text(out_path, schedule_csv(schedule_rows(trace, from, to), cfg.fingerprint));
  return trace;
}

namespace {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Matched:
      return "matched";
    case Outcome::Perished:
      return "perished";
    case Outcome::Unresolved:
      break;
  }
  return "unresolved";
}

nlohmann::json counters_json(const Counters& c) {
  return {{"arrivals", c.arrivals}, {"matched", c.matched}, {"perished", c.perished}, {"remaining", c.remaining}};
}

}  // namespace

nlohmann::json to_json(const TraceSummary& t) {
  nlohmann::json j;
  j["horizon"] = t.horizon;
  j["mixing"] = t.mixing;
  j["full"] = counters_json(t.full);
  j["cohort"] = counters_json(t.cohort);
  j["static_policy"] = t.static_policy ? nlohmann::json(to_string(*t.static_policy)) : nlohmann::json(nullptr);
  auto& pools = j["pool_sizes"] = nlohmann::json::array();
  for (const auto& p : t.pool_sizes) pools.push_back({p.time, p.size});
  auto& agents = j["agents"] = nlohmann::json::array();
  for (const auto& a : t.per_agent) {
    agents.push_back({{"id", a.id},
                      {"arrival", a.arrival},
                      {"sojourn", a.sojourn},
                      {"resolution", a.resolution},
                      {"outcome", outcome_name(a.outcome)},
                      {"partner", a.partner == kNoAgent ? nlohmann::json(nullptr) : nlohmann::json(a.partner)}});
  }
  auto& windows = j["windows"] = nlohmann::json::array();
  for (const auto& w : t.policy_schedule) {
    windows.push_back({{"index", w.index},
                       {"start", w.start},
                       {"policy", to_string(w.kind)},
                       {"estimated", w.estimated},
                       {"mu_hat", w.mu_hat},
                       {"sigma_hat", w.sigma_hat},
                       {"score_hat", w.score_hat},
                       {"batch_size", w.batch_size}});
  }
  return j;
}

std::string metrics_csv_header() {
  return "loss,mean_wait,congestion,usage_patient,usage_greedy,switch_count,windows,density,T0,T,empty_cohort";
}

std::string metrics_csv_row(const MetricsReport& m) {
  return csv::join({csv::num(m.loss), csv::num(m.mean_wait), csv::num(m.congestion), csv::num(m.usage.patient),
                    csv::num(m.usage.greedy), csv::num(m.usage.switch_count), csv::num(m.usage.windows),
                    csv::num(m.density), csv::num(m.window_begin), csv::num(m.window_end),
                    m.empty_cohort ? "1" : "0"});
}

}  // namespace matchsim
