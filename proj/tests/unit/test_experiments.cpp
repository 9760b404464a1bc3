#include <cmath>
#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "greedytrap/experiments.hpp"

using namespace greedytrap;

TEST_SUITE("experiments") {

TEST_CASE("Wilson interval basics") {
  const auto a = wilson_interval(0, 100);
  CHECK(a.lo == 0.0);
  CHECK(a.hi > 0.0);
  const auto b = wilson_interval(100, 100);
  CHECK(b.hi == doctest::Approx(1.0));
  const auto c = wilson_interval(30, 100);
  CHECK(c.lo <= 0.3);
  CHECK(c.hi >= 0.3);
}

TEST_CASE("Wilson interval coverage") {
  RngStream rng(1, 0);
  for (double p : {0.05, 0.3, 0.5}) {
    int covered = 0;
    for (int m = 0; m < 1000; ++m) {
      std::size_t k = 0;
      for (int i = 0; i < 200; ++i) k += rng.uniform() < p;
      const auto ci = wilson_interval(k, 200);
      covered += ci.lo <= p && p <= ci.hi;
    }
    CHECK(covered >= 930);
  }
}

TEST_CASE("stuck estimate needs a decoy") {
  const auto f = fixture_mab_success();
  ExperimentConfig cfg;
  CHECK_THROWS_AS(estimate_stuck_probability(f.instance, std::nullopt, cfg), PreconditionError);
}

TEST_CASE("forced E1 at sigma zero is always stuck") {
  const auto f = fixture_mab_failure();
  ExperimentConfig cfg;
  cfg.horizon = 100;
  cfg.trials = 20;
  cfg.force_e1 = true;
  const auto r = estimate_stuck_probability(f.instance.with_sigma(0.0), f.decoy, cfg);
  REQUIRE(r.stuck);
  CHECK(r.stuck->p_hat == 1.0);
  CHECK(r.stuck->conditional_check == 1.0);
  CHECK(r.invariant_violations == 0);
}

TEST_CASE("results do not depend on the thread count") {
  const auto f = fixture_cb_failure();
  ExperimentConfig cfg;
  cfg.horizon = 300;
  cfg.trials = 500;
  cfg.master_seed = 77;
  cfg.checkpoints = {100, 300};
  cfg.threads = 1;
  const auto one = estimate_stuck_probability(f.instance, f.decoy, cfg);
  cfg.threads = 4;
  const auto four = estimate_stuck_probability(f.instance, f.decoy, cfg);
  CHECK(trials_csv(one, cfg.checkpoints) == trials_csv(four, cfg.checkpoints));
  CHECK(curve_csv(one.curve) == curve_csv(four.curve));
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  ::setenv("GREEDYTRAP_THREADS", "5", 1);
  CHECK(resolve_threads(0) == 5);
  ::unsetenv("GREEDYTRAP_THREADS");
  CHECK(resolve_threads(0) == 1);
}

TEST_CASE("always-optimal run has zero main-stage regret") {
  const auto inst = make_mab_instance({{0.5, 0.9}}, 0, 0.0);
  ExperimentConfig cfg;
  cfg.horizon = 50;
  cfg.trials = 3;
  const auto c = regret_curve(inst, cfg);
  for (std::size_t t = 2; t < 50; ++t) CHECK(c.mean[t] == c.mean[1]);
}

TEST_CASE("failure regret is at least the stuck share") {
  const auto f = fixture_mab_failure();
  ExperimentConfig cfg;
  cfg.horizon = 1000;
  cfg.trials = 4000;
  cfg.threads = 4;
  cfg.master_seed = 3;
  // a larger noise scale makes stuck trials common enough for a small ensemble
  const auto inst = f.instance.with_sigma(0.3);
  const auto r = estimate_stuck_probability(inst, f.decoy, cfg);
  const double p = r.stuck->p_hat;
  CHECK(p > 0.0);
  const double lower = p * r.decoy_regret_per_round * static_cast<double>(cfg.horizon - r.warmup_rounds);
  CHECK(r.curve.mean.back() >= lower * 0.9);
  CHECK(r.invariant_violations == 0);
}

TEST_CASE("growth fit separates log and linear curves") {
  std::vector<double> lg(10000), ln(10000);
  for (std::size_t t = 0; t < lg.size(); ++t) {
    lg[t] = 5 * std::log(static_cast<double>(t + 1));
    ln[t] = 0.1 * static_cast<double>(t + 1);
  }
  const auto a = fit_growth(lg, 2);
  CHECK(a.sublinear);
  CHECK(a.r2_log > a.r2_linear);
  const auto b = fit_growth(ln, 2);
  CHECK_FALSE(b.sublinear);
  CHECK(b.ratio >= 5.0);
  CHECK(b.r2_linear > b.r2_log);
  CHECK(fit_growth(std::vector<double>(100, 0.0), 2).ratio == 1.0);
  CHECK_THROWS(fit_growth(std::vector<double>(5, 1.0), 1));
}

TEST_CASE("info-aware baseline at sigma zero excludes after one pull") {
  const auto inst = make_mab_instance({{0.5, 0.7, 0.9}, {0.8, 0.3, 0.6}, {0.1, 0.2, 0.3}}, 0, 0.0);
  RngStream rng(2, 0);
  const auto ep = run_info_aware_episode(inst, 100, rng);
  REQUIRE(ep.exclusion_pulls.size() == 3);
  CHECK_FALSE(ep.exclusion_pulls[2].has_value());
  CHECK(ep.exclusion_pulls[0] == 1);
  CHECK(ep.exclusion_pulls[1] == 1);
  CHECK(ep.excluded_plays == 0);
  CHECK(ep.suboptimal_pulls == 0);
}

TEST_CASE("info-aware baseline excludes within the pull cap") {
  const auto f = fixture_mab_success();
  const double gap = function_gap(f.instance.truth(), f.instance.function_class()).gap;
  const std::size_t T = 5000;
  int ok = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    RngStream rng(3, i);
    const auto ep = run_info_aware_episode(f.instance, T, rng, std::nullopt, false);
    CHECK(ep.excluded_plays == 0);
    // suboptimal arms usually stop being played before their bands are narrow
    // enough for a formal exclusion; the cap applies to pulls either way
    const double cap = 64 * std::log(static_cast<double>(T)) / (gap * gap);
    bool all = static_cast<double>(ep.suboptimal_pulls) <= cap;
    for (std::size_t a = 0; a < 2; ++a) {
      const auto& e = ep.exclusion_pulls[a];
      all = all && (!e || static_cast<double>(*e) <= cap);
    }
    ok += all;
  }
  CHECK(ok >= 48);
}

TEST_CASE("info-aware baseline is sublinear where greedy gets stuck") {
  const auto f = fixture_mab_failure();
  ExperimentConfig cfg;
  cfg.horizon = 5000;
  cfg.trials = 100;
  cfg.threads = 4;
  const auto r = info_aware_baseline(f.instance, cfg);
  CHECK(fit_growth(r.curve.mean, r.warmup_rounds).sublinear);
  CHECK(r.invariant_violations == 0);
}

TEST_CASE("ghost-ratio bound on a small class") {
  OutcomeSpace space({0.0, 1.0}, {"o"});
  const ModelClass cls(space, {Model{{{0.5, 0.5}, {0.2, 0.8}}}, Model{{{0.5, 0.5}, {0.7, 0.3}}}}, 0);
  const auto r = dmso_failure_experiment(cls, 1, 4, 20000, 9, 2);
  const double scale = r.ratio_bound / std::max(r.q_e1, 1e-300);
  const double joint = std::sqrt(r.p_stderr * r.p_stderr + scale * scale * r.q_stderr * r.q_stderr);
  CHECK(r.p_e1 >= r.ratio_bound - 3 * joint);
  CHECK(r.q_e1 >= r.p_e1);
  CHECK(r.exponent == 8);
}

TEST_CASE("dmso trials with both events are stuck") {
  OutcomeSpace space({0.0, 1.0}, {"o"});
  const ModelClass cls(space, {Model{{{0.5, 0.5}, {0.2, 0.8}}}, Model{{{0.5, 0.5}, {0.7, 0.3}}}}, 0);
  ExperimentConfig cfg;
  cfg.horizon = 200;
  cfg.trials = 2000;
  cfg.threads = 2;
  const auto r = run_dmso_experiment(cls, 1, 4, cfg);
  REQUIRE(r.stuck);
  CHECK(r.stuck->p_hat > 0.0);
  CHECK(r.stuck->invariant_ok());
  CHECK(r.invariant_violations == 0);
}

TEST_CASE("trial CSV layout") {
  const auto f = fixture_mab_failure();
  ExperimentConfig cfg;
  cfg.horizon = 20;
  cfg.trials = 2;
  cfg.checkpoints = {10, 20};
  const auto r = estimate_stuck_probability(f.instance, f.decoy, cfg);
  const auto csv = trials_csv(r, cfg.checkpoints);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "trial_id,stuck,e1,e2_through,first_deviation,final_regret,suboptimal_pulls,regret_at_10,regret_at_20");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 2);
  CHECK(curve_csv(r.curve).rfind("t,mean_regret,stderr\n", 0) == 0);
}

TEST_CASE("format_double round-trips") {
  RngStream rng(4, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.index(20)) - 10);
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

}  // TEST_SUITE
