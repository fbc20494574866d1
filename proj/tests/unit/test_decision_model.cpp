#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "matchsim/decision_model.hpp"
#include "matchsim/metrics.hpp"

using namespace matchsim;

namespace {

OracleConfig paper_oracle() {
  OracleConfig cfg;
  cfg.lambda = 100.0;
  cfg.horizon = 100.0;
  cfg.mixing = 50.0;
  cfg.density = 8.0;
  cfg.runs = 10;
  cfg.workers = 4;
  return cfg;
}

OracleConfig small_oracle() {
  OracleConfig cfg;
  cfg.lambda = 50.0;
  cfg.horizon = 10.0;
  cfg.mixing = 5.0;
  cfg.density = 4.0;
  cfg.runs = 2;
  return cfg;
}

class Surface final : public GapPredictor {
 public:
  explicit Surface(double (*f)(double, double)) : f_(f) {}
  double score(const LogNormalParams& x) const override { return f_(x.mu, x.sigma); }

 private:
  double (*f_)(double, double);
};

}  // namespace

TEST_CASE("oracle without edges scores zero") {
  OracleConfig cfg = small_oracle();
  cfg.density = 0.0;
  const GapSample s = score_oracle({0.0, 0.5}, cfg);
  CHECK(s.loss_greedy == s.loss_patient);
  CHECK(s.loss_patient > 0.5);
  CHECK(s.score == 0.0);
  CHECK(s.k == 2);
}

TEST_CASE("oracle runs are paired") {
  const OracleConfig cfg = small_oracle();
  const MarketConfig m = cfg.market({-0.5, 1.0}, oracle_run_seed(cfg, 1));
  GreedyPolicy g;
  PatientPolicy p;
  const auto tg = simulate(m, g);
  const auto tp = simulate(m, p);
  REQUIRE(tg.per_agent.size() == tp.per_agent.size());
  for (std::size_t i = 0; i < tg.per_agent.size(); ++i) {
    CHECK(tg.per_agent[i].arrival == tp.per_agent[i].arrival);
    CHECK(tg.per_agent[i].sojourn == tp.per_agent[i].sojourn);
  }
  CHECK(tg.full.arrivals == tp.full.arrivals);
}

TEST_CASE("heavy tails open a gap") {
  const OracleConfig cfg = paper_oracle();
  const GapSample heavy = score_oracle({0.0, 1.5}, cfg);
  const GapSample unit = score_oracle({0.0, 0.0}, cfg);
  CHECK(heavy.score > 0.10);
  CHECK(unit.score < heavy.score);
  CHECK(unit.loss_patient < 0.01);
  CHECK(unit.loss_greedy < 0.05);
}

TEST_CASE("oracle is deterministic") {
  const OracleConfig cfg = small_oracle();
  const GapSample a = score_oracle({0.2, 0.7}, cfg);
  const GapSample b = score_oracle({0.2, 0.7}, cfg);
  CHECK(a.score == b.score);
  CHECK(a.loss_greedy == b.loss_greedy);
}

TEST_CASE("grid sizes") {
  CHECK(GridSpec{}.size() == 840);
  CHECK(GridSpec{}.mu_values().size() == 21);
  CHECK(GridSpec{}.sigma_values().size() == 40);
  const GridSpec one{0.5, 0.5, 0.1, 1.0, 1.0, 0.1};
  const auto samples = build_training_grid(one, small_oracle());
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].mu == 0.5);
  CHECK(samples[0].sigma == 1.0);
  CHECK(samples[0].score == std::min(score_oracle({0.5, 1.0}, small_oracle()).score, kScoreCap));
  CHECK_THROWS_AS((GridSpec{0, 1, 0, 0.1, 1, 0.1}.validate()), ConfigError);
}

TEST_CASE("grid layout is mu-major and infinite scores are capped") {
  OracleConfig cfg = small_oracle();
  cfg.density = 8.0;
  const GridSpec grid{1.6, 2.0, 0.4, 0.05, 0.10, 0.05};
  const auto samples = build_training_grid(grid, cfg);
  REQUIRE(samples.size() == 4);
  CHECK(samples[1].mu == 1.6);
  CHECK(samples[1].sigma == doctest::Approx(0.10));
  CHECK(samples[2].mu == 2.0);
  for (const auto& s : samples) {
    CHECK(s.score <= kScoreCap);
    if (s.loss_patient == 0.0 && s.loss_greedy > 0.0) {
      CHECK(s.capped);
      CHECK(s.score == kScoreCap);
    } else {
      CHECK_FALSE(s.capped);
    }
  }
}

TEST_CASE("dataset round trip") {
  std::vector<GapSample> samples{{-2.0, 0.05, 0.1, 0.05, 1.0, 10, 8.0, false},
                                 {0.2, 1.55, 0.3, 0.0, kScoreCap, 10, 8.0, true},
                                 {1.0 / 3.0, 0.1, 0.0, 0.0, 0.0, 3, 2.5, false}};
  const auto path = std::filesystem::temp_directory_path() / "matchsim_dataset_roundtrip.csv";
  write_dataset(path, samples, "abc");
  const auto back = read_dataset(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].mu == samples[i].mu);
    CHECK(back[i].sigma == samples[i].sigma);
    CHECK(back[i].loss_greedy == samples[i].loss_greedy);
    CHECK(back[i].score == samples[i].score);
    CHECK(back[i].k == samples[i].k);
    CHECK(back[i].capped == samples[i].capped);
  }
  CHECK(to_training_examples(samples)[1].score == kScoreCap);
}

TEST_CASE("decision boundary extraction") {
  const GridSpec grid{-2.0, 2.0, 0.5, 0.1, 1.0, 0.3};
  SUBCASE("constant below tau") {
    CHECK(extract_decision_boundary(ConstantGap(0.05), 0.1, grid).empty());
  }
  SUBCASE("monotone along each line: one crossing per line, exact for linear values") {
    const Surface s([](double mu, double sigma) { return mu + sigma; });
    const auto c = extract_decision_boundary(s, 0.1, grid);
    REQUIRE(c.size() == grid.sigma_values().size());
    for (const auto& p : c) CHECK(p.mu == doctest::Approx(0.1 - p.sigma));
  }
  SUBCASE("non-monotone values cross twice") {
    const Surface s([](double mu, double) { return mu * mu; });
    const auto c = extract_decision_boundary(s, 1.0, grid);
    CHECK(c.size() == 2 * grid.sigma_values().size());
  }
}

TEST_CASE("tabulated oracle contour and comparison") {
  const GridSpec grid{-1.0, 1.0, 0.5, 0.2, 0.4, 0.2};
  std::vector<GapSample> samples;
  for (double mu : grid.mu_values()) {
    for (double sigma : grid.sigma_values()) samples.push_back({mu, sigma, 0, 0, mu + sigma, 1, 8.0, false});
  }
  const auto oracle = oracle_boundary(samples, 0.5, grid);
  REQUIRE(oracle.size() == 2);
  CHECK(oracle[0].mu == doctest::Approx(0.3));
  CHECK(oracle[1].mu == doctest::Approx(0.1));

  std::vector<ContourPoint> shifted = oracle;
  for (auto& p : shifted) p.mu += 0.2;
  const auto cmp = compare_boundaries(oracle, shifted);
  CHECK(cmp.mean_abs_mu_displacement == doctest::Approx(0.2));
  CHECK(cmp.compared_lines == 2);
  CHECK(cmp.unmatched_lines == 0);

  const auto partial = compare_boundaries(oracle, std::vector<ContourPoint>{shifted[0]});
  CHECK(partial.compared_lines == 1);
  CHECK(partial.unmatched_lines == 1);

  samples.pop_back();
  CHECK_THROWS_AS(oracle_boundary(samples, 0.5, grid), ConfigError);
}
