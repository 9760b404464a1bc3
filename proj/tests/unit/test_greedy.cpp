#include <cmath>
#include <numbers>

#include "doctest.h"
#include "greedytrap/greedy.hpp"

using namespace greedytrap;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

ProblemInstance decoy_instance(double sigma) { return make_mab_instance({{0.5, 0.9}, {0.5, 0.3}}, 0, sigma); }

}  // namespace

TEST_SUITE("greedy") {

TEST_CASE("mse hand example") {
  History h(1, 2);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.4);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.6);
  h.record(ContextIndex{0}, ArmIndex{1}, 0.2);
  CHECK(mse(h, RewardTable::mab({0.5, 0.3})) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(mse(h, RewardTable::mab({0.5, 0.2})) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("mse equals residual sum minus its constant part") {
  RngStream rng(5, 5);
  for (int it = 0; it < 100; ++it) {
    const std::size_t K = 2 + rng.index(4);
    History h(1, K);
    const std::size_t n = 1 + rng.index(40);
    for (std::size_t i = 0; i < n; ++i) h.record(ContextIndex{0}, ArmIndex{rng.index(K)}, rng.normal());
    std::vector<double> fv(K);
    for (auto& v : fv) v = rng.uniform();
    const auto f = RewardTable::mab(fv);
    double resid = 0.0, within = 0.0;
    for (const auto& r : h.rounds()) {
      resid += (r.reward - f(0, r.arm)) * (r.reward - f(0, r.arm));
      const double m = *h.mean(0, r.arm);
      within += (r.reward - m) * (r.reward - m);
    }
    CHECK(std::abs(mse(h, f) - (resid - within)) <= 1e-9);
  }
}

TEST_CASE("regression oracle") {
  const FunctionClass cls({RewardTable::mab({0.5, 0.9}), RewardTable::mab({0.5, 0.3})});
  History h(1, 2);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  h.record(ContextIndex{0}, ArmIndex{1}, 0.3);
  CHECK(regression_oracle(h, cls).member == 1);
  CHECK(regression_oracle(History(1, 2), cls).member == 0);
}

TEST_CASE("regression oracle matches an exhaustive scan") {
  RngStream rng(8, 1);
  for (int it = 0; it < 200; ++it) {
    std::vector<RewardTable> members;
    const std::size_t nf = 1 + rng.index(6);
    while (members.size() < nf) {
      auto t = RewardTable::mab({static_cast<double>(rng.index(5)) / 4, static_cast<double>(rng.index(5)) / 4,
                                 static_cast<double>(rng.index(5)) / 4});
      if (std::find(members.begin(), members.end(), t) == members.end()) members.push_back(t);
    }
    const FunctionClass cls(members);
    History h(1, 3);
    for (int i = 0; i < 6; ++i) h.record(ContextIndex{0}, ArmIndex{rng.index(3)}, static_cast<double>(rng.index(5)) / 4);
    std::size_t best = 0;
    double best_v = INFINITY;
    for (std::size_t m = 0; m < cls.size(); ++m) {
      double v = 0.0;
      for (std::size_t a = 0; a < 3; ++a)
        if (h.count(0, a) > 0) {
          const double d = *h.mean(0, a) - cls[m](0, a);
          v += static_cast<double>(h.count(0, a)) * d * d;
        }
      if (v < best_v) best_v = v, best = m;
    }
    CHECK(regression_oracle(h, cls).member == best);
  }
}

TEST_CASE("greedy step plays the fitted member's optimal arm") {
  const auto inst = decoy_instance(0.1);
  History h(1, 2);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  h.record(ContextIndex{0}, ArmIndex{1}, 0.3);
  GreedyState st(inst, h);
  RngStream rng(1, 1);
  const auto s = greedy_step(st, ContextIndex{0}, rng);
  CHECK(s.arm.value == 0);
  CHECK(s.member == 1);
}

TEST_CASE("randomized tie breaking frequency") {
  const auto inst = make_mab_instance({{0.5, 0.5}}, 0, 0.1);
  GreedyState st(inst, History(1, 2), TieMode::randomized(0.5));
  RngStream rng(2, 2);
  std::size_t ones = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ones += greedy_step(st, ContextIndex{0}, rng).arm.value;
  CHECK(static_cast<double>(ones) / n >= 0.48);
  CHECK(static_cast<double>(n - ones) / n >= 0.48);

  GreedyState strict(inst, History(1, 2), TieMode::strict());
  CHECK_THROWS_AS(greedy_step(strict, ContextIndex{0}, rng), TieError);
}

TEST_CASE("warm-up sizes") {
  RngStream rng(3, 3);
  const auto three = make_mab_instance({{0.1, 0.2, 0.3}}, 0, 0.1);
  const auto h = run_warmup(three, rng);
  CHECK(h.size() == 3);
  CHECK(h.warmup_rounds() == 3);
  for (std::size_t a = 0; a < 3; ++a) CHECK(h.count(0, a) == 1);

  const auto none = three.with_warmup(uniform_warmup(1, 3, 0));
  CHECK(run_warmup(none, rng).size() == 0);

  const FunctionClass cb({RewardTable::from_rows({{0.1, 0.2}, {0.3, 0.4}})});
  const ProblemInstance cbi(cb, 0, 0.1, {0.5, 0.5}, uniform_warmup(2, 2, 1));
  CHECK(run_warmup(cbi, rng).size() == 4);
}

TEST_CASE("sigma zero on a self-identifiable instance makes no main-stage mistakes") {
  const auto inst = make_mab_instance({{0.5, 0.7, 0.9}, {0.8, 0.3, 0.6}}, 0, 0.0);
  RngStream rng(4, 4);
  const auto ep = run_episode(inst, 200, TieMode::strict(), rng);
  CHECK(ep.suboptimal_pulls == 0);
  CHECK(ep.final_regret == ep.warmup_regret);
}

TEST_CASE("forced E1 at sigma zero is stuck for every horizon") {
  const auto inst = decoy_instance(0.0);
  const auto cert = find_decoys(inst).front();
  for (std::size_t T : {3u, 10u, 100u, 1000u}) {
    RngStream rng(5, T);
    EpisodeOptions o;
    o.decoy = &cert;
    o.force_e1 = true;
    const auto ep = run_episode(inst, T, TieMode::strict(), rng, o);
    REQUIRE(ep.diagnostics);
    CHECK(ep.diagnostics->e1_held);
    CHECK(ep.diagnostics->stuck_on_decoy);
    CHECK(ep.diagnostics->e2_held_through == T);
    CHECK(ep.final_regret == doctest::Approx(ep.warmup_regret + 0.4 * static_cast<double>(T - 2)));
  }
}

TEST_CASE("always-optimal trajectory has zero regret") {
  const auto inst = make_mab_instance({{0.5, 0.9}}, 0, 0.0);
  RngStream rng(6, 0);
  const auto ep = run_episode(inst, 50, TieMode::strict(), rng);
  CHECK(ep.final_regret == ep.warmup_regret);
  for (std::size_t t = ep.warmup_rounds; t < 50; ++t) CHECK(ep.cumulative_regret[t] == ep.warmup_regret);
}

TEST_CASE("E1 boundary is strict") {
  const auto inst = decoy_instance(0.1);
  const auto cert = find_decoys(inst).front();
  History h(1, 2);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  h.record(ContextIndex{0}, ArmIndex{1}, 0.3);
  CHECK(check_event_e1(h, cert));
  History b(1, 2);
  b.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  b.record(ContextIndex{0}, ArmIndex{1}, 0.3 + cert.decoy_gap / 2);
  CHECK_FALSE(check_event_e1(b, cert));
}

TEST_CASE("E1 frequency matches the Gaussian interval probability") {
  const auto base = decoy_instance(0.0);
  const auto cert = find_decoys(base).front();
  const double gap = cert.decoy_gap, sigma = gap;
  const auto inst = base.with_sigma(sigma);
  const int n = 20000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(7, static_cast<std::uint64_t>(i));
    hits += check_event_e1(run_warmup(inst, rng), cert);
  }
  const double freq = static_cast<double>(hits) / n;
  // warm-up mean of arm 1 is N(0.9, sigma^2); band is (0.3 - gap/2, 0.3 + gap/2)
  const double exact = normal_cdf((0.3 + gap / 2 - 0.9) / sigma) - normal_cdf((0.3 - gap / 2 - 0.9) / sigma);
  const double se = std::sqrt(exact * (1 - exact) / n);
  CHECK(std::abs(freq - exact) <= 4 * se);
  const double bound = gap / std::sqrt(2 * std::numbers::pi * sigma * sigma) * std::exp(-2 / (sigma * sigma));
  CHECK(freq >= bound);
}

TEST_CASE("E2 at sigma zero holds through the horizon") {
  const auto inst = decoy_instance(0.0);
  const auto cert = find_decoys(inst).front();
  EpisodeOptions o;
  o.decoy = &cert;
  RngStream rng(8, 0);
  const auto ep = run_episode(inst, 100, TieMode::strict(), rng, o);
  CHECK(ep.diagnostics->e2_held_through == 100);
}

TEST_CASE("E2 fails at the first violating round") {
  const auto inst = decoy_instance(0.1);
  const auto cert = find_decoys(inst).front();
  History h(1, 2);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  h.record(ContextIndex{0}, ArmIndex{1}, 0.9);
  h.close_warmup();
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  CHECK(check_event_e2(h, cert) == 3);
  // mean of the decoy arm jumps to 1.1, off by gap from f*(a)
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5 + 3 * cert.decoy_gap);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.5);
  CHECK(check_event_e2(h, cert) == 3);

  History bad(1, 2);
  bad.record(ContextIndex{0}, ArmIndex{0}, 0.5 + cert.decoy_gap);
  bad.record(ContextIndex{0}, ArmIndex{1}, 0.9);
  bad.close_warmup();
  CHECK(check_event_e2(bad, cert) == 1);
}

TEST_CASE("E2 probability under the noise rule") {
  const auto base = decoy_instance(0.0);
  const auto cert = find_decoys(base).front();
  const double sigma = e2_sigma(cert.decoy_gap / 2, 1);
  const int n = 3000;
  const std::size_t T = 1000;
  int held = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(9, static_cast<std::uint64_t>(i));
    History h(1, 2);
    h.record(ContextIndex{0}, ArmIndex{1}, 0.9);
    h.record(ContextIndex{0}, ArmIndex{0}, 0.5 + sigma * rng.normal());
    h.close_warmup();
    while (h.size() < T) h.record(ContextIndex{0}, ArmIndex{0}, 0.5 + sigma * rng.normal());
    held += check_event_e2(h, cert) == T;
  }
  CHECK(static_cast<double>(held) / n >= 0.9 - 0.03);
}

TEST_CASE("beta") {
  CHECK(beta(8, 2, 1, 0.1) == doctest::Approx(1.4443).epsilon(1e-4));
  CHECK(beta(8, 2, 1, 0.1) ==
        doctest::Approx(std::sqrt(0.25 * std::log(std::numbers::pi * std::numbers::pi * 2 * 64 / 0.3))));
  for (std::size_t n = 3; n <= 1000000; n = n * 3 / 2 + 1) CHECK(beta(4 * n, 2, 1, 0.1) < beta(n, 2, 1, 0.1));
  CHECK_THROWS_AS(beta(0, 2, 1, 0.1), PreconditionError);
}

TEST_CASE("e2 sigma solves the union bound") {
  const double r = 0.3;
  for (std::size_t pairs : {1u, 2u, 5u}) {
    const double s = e2_sigma(r, pairs, 0.1);
    const double u = std::exp(-r * r / (2 * s * s));
    CHECK(static_cast<double>(pairs) * 2 * u / (1 - u) == doctest::Approx(0.1).epsilon(1e-9));
  }
}

}  // TEST_SUITE
