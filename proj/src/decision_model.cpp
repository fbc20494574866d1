#include "matchsim/decision_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "matchsim/csv.hpp"
#include "matchsim/metrics.hpp"
#include "matchsim/parallel.hpp"
#include "matchsim/policies.hpp"

namespace matchsim {

MarketConfig OracleConfig::market(const LogNormalParams& departure, std::uint64_t run_seed) const {
  MarketConfig m;
  m.lambda = lambda;
  m.p = lambda > 0.0 ? std::min(1.0, density / lambda) : 0.0;
  m.horizon = horizon;
  m.mixing = mixing;
  m.seed = run_seed;
  m.departure = departure;
  return m;
}

void OracleConfig::validate() const {
  if (runs < 1) throw ConfigError("oracle needs at least one run");
  if (!(density >= 0.0)) throw ConfigError("density must be >= 0");
  if (lambda > 0.0 && density > lambda) throw ConfigError("density cannot exceed lambda (p would exceed 1)");
  market({0.0, 0.0}, seed).validate();
}

std::uint64_t oracle_run_seed(const OracleConfig& cfg, std::size_t run) {
  return derive_run_seed(cfg.seed, 0, run);
}

GapSample score_oracle(const LogNormalParams& params, const OracleConfig& cfg) {
  cfg.validate();
  GapSample s;
  s.mu = params.mu;
  s.sigma = params.sigma;
  s.k = cfg.runs;
  s.d = cfg.density;
  double greedy = 0.0;
  double patient = 0.0;
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    const MarketConfig m = cfg.market(params, oracle_run_seed(cfg, r));
    GreedyPolicy g;
    PatientPolicy p;
    greedy += compute_loss(simulate(m, g));
    patient += compute_loss(simulate(m, p));
  }
  s.loss_greedy = greedy / static_cast<double>(cfg.runs);
  s.loss_patient = patient / static_cast<double>(cfg.runs);
  if (s.loss_patient > 0.0) {
    s.score = s.loss_greedy / s.loss_patient - 1.0;
  } else {
    s.score = s.loss_greedy > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return s;
}

namespace {

std::vector<double> axis(double lo, double hi, double step) {
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = lo + static_cast<double>(i) * step;
  return v;
}

}  // namespace

void GridSpec::validate() const {
  if (!(mu_step > 0.0) || !(sigma_step > 0.0)) throw ConfigError("grid steps must be > 0");
  if (!(mu_max >= mu_min) || !(sigma_max >= sigma_min)) throw ConfigError("grid ranges must be non-empty");
  if (!(sigma_min >= 0.0)) throw ConfigError("grid sigma must be >= 0");
}

std::vector<double> GridSpec::mu_values() const { return axis(mu_min, mu_max, mu_step); }
std::vector<double> GridSpec::sigma_values() const { return axis(sigma_min, sigma_max, sigma_step); }

std::vector<GapSample> build_training_grid(const GridSpec& grid, const OracleConfig& cfg) {
  grid.validate();
  cfg.validate();
  const auto mus = grid.mu_values();
  const auto sigmas = grid.sigma_values();
  std::vector<GapSample> out(mus.size() * sigmas.size());
  parallel_for(out.size(), cfg.workers, [&](std::size_t i) {
    GapSample s = score_oracle({mus[i / sigmas.size()], sigmas[i % sigmas.size()]}, cfg);
    if (!(s.score < kScoreCap)) {
      s.score = kScoreCap;
      s.capped = true;
    }
    out[i] = s;
  });
  return out;
}

std::vector<TrainingExample> to_training_examples(std::span<const GapSample> samples) {
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({{s.mu, s.sigma}, std::min(s.score, kScoreCap)});
  return out;
}

static const char* kDatasetHeader = "mu,sigma,loss_greedy,loss_patient,score,k,d,capped_flag";

void write_dataset(const std::filesystem::path& path, std::span<const GapSample> samples,
                   const std::string& fingerprint) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  if (!fingerprint.empty()) out << csv::fingerprint_line(fingerprint) << '\n';
  out << kDatasetHeader << '\n';
  for (const auto& s : samples) {
    out << csv::join({csv::num(s.mu), csv::num(s.sigma), csv::num(s.loss_greedy), csv::num(s.loss_patient),
                      csv::num(s.score), csv::num(s.k), csv::num(s.d), s.capped ? "1" : "0"})
        << '\n';
  }
  if (!out) throw std::runtime_error("error writing dataset file " + path.string());
}

std::vector<GapSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  std::vector<GapSample> out;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kDatasetHeader) throw ConfigError("dataset " + path.string() + " has an unexpected header");
      header_seen = true;
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 8) throw ConfigError("dataset line " + std::to_string(line_no) + " has " +
                                         std::to_string(f.size()) + " fields, expected 8");
    try {
      GapSample s;
      s.mu = std::stod(f[0]);
      s.sigma = std::stod(f[1]);
      s.loss_greedy = std::stod(f[2]);
      s.loss_patient = std::stod(f[3]);
      s.score = std::stod(f[4]);
      s.k = std::stoul(f[5]);
      s.d = std::stod(f[6]);
      s.capped = f[7] == "1";
      out.push_back(s);
    } catch (const std::exception&) {
      throw ConfigError("dataset line " + std::to_string(line_no) + " is not numeric");
    }
  }
  if (!header_seen) throw ConfigError("dataset " + path.string() + " has no header");
  return out;
}

std::vector<ContourPoint> contour_crossings(const GridSpec& grid, double tau,
                                            const std::function<double(double, double)>& value) {
  const auto mus = grid.mu_values();
  const auto sigmas = grid.sigma_values();
  std::vector<ContourPoint> out;
  for (double sigma : sigmas) {
    double prev = value(mus[0], sigma);
    for (std::size_t i = 1; i < mus.size(); ++i) {
      const double cur = value(mus[i], sigma);
      const bool below_prev = prev < tau;
      const bool below_cur = cur < tau;
      if (below_prev != below_cur) {
        const double t = (tau - prev) / (cur - prev);
        out.push_back({sigma, mus[i - 1] + t * (mus[i] - mus[i - 1])});
      }
      prev = cur;
    }
  }
  return out;
}

std::vector<ContourPoint> extract_decision_boundary(const GapPredictor& model, double tau, const GridSpec& grid) {
  return contour_crossings(grid, tau, [&](double mu, double sigma) { return model.score({mu, sigma}); });
}

std::vector<ContourPoint> oracle_boundary(std::span<const GapSample> samples, double tau, const GridSpec& grid) {
  const auto mus = grid.mu_values();
  const auto sigmas = grid.sigma_values();
  if (samples.size() != mus.size() * sigmas.size()) {
    throw ConfigError("oracle samples do not match the grid size");
  }
  auto index_of = [&](const std::vector<double>& values, double x) {
    const auto it = std::min_element(values.begin(), values.end(),
                                     [x](double a, double b) { return std::abs(a - x) < std::abs(b - x); });
    return static_cast<std::size_t>(it - values.begin());
  };
  return contour_crossings(grid, tau, [&](double mu, double sigma) {
    return std::min(samples[index_of(mus, mu) * sigmas.size() + index_of(sigmas, sigma)].score, kScoreCap);
  });
}

BoundaryComparison compare_boundaries(std::span<const ContourPoint> reference, std::span<const ContourPoint> candidate) {
  BoundaryComparison c;
  std::vector<double> lines;
  for (const auto& p : reference) lines.push_back(p.sigma);
  for (const auto& p : candidate) lines.push_back(p.sigma);
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());

  double total = 0.0;
  std::size_t pairs = 0;
  for (double sigma : lines) {
    std::vector<double> ref, cand;
    for (const auto& p : reference) if (p.sigma == sigma) ref.push_back(p.mu);
    for (const auto& p : candidate) if (p.sigma == sigma) cand.push_back(p.mu);
    if (ref.empty() || cand.empty()) {
      ++c.unmatched_lines;
      continue;
    }
    ++c.compared_lines;
    for (double r : ref) {
      double best = std::numeric_limits<double>::infinity();
      for (double m : cand) best = std::min(best, std::abs(r - m));
      total += best;
      ++pairs;
    }
  }
  if (pairs > 0) c.mean_abs_mu_displacement = total / static_cast<double>(pairs);
  return c;
}

}  // namespace matchsim
