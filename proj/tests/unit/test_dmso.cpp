#include <cmath>

#include "doctest.h"
#include "greedytrap/analysis.hpp"
#include "greedytrap/dmso.hpp"

using namespace greedytrap;

namespace {

// Binary reward, single observation; M* prefers policy 0, the decoy prefers 1.
ModelClass decoy_class() {
  OutcomeSpace space({0.0, 1.0}, {"o"});
  Model truth{{{0.2, 0.8}, {0.5, 0.5}}};
  Model decoy{{{0.7, 0.3}, {0.5, 0.5}}};
  return ModelClass(space, {truth, decoy}, 0, {"p0", "p1"});
}

}  // namespace

TEST_SUITE("dmso") {

TEST_CASE("log-likelihood accumulates masses") {
  OutcomeSpace space({0.0, 1.0}, {"o"});
  const ModelClass cls(space, {Model{{{0.5, 0.5}}}, Model{{{0.8, 0.2}}}}, 0);
  auto st = LikelihoodState::initial(cls);
  st = log_likelihood_update(st, cls, 0, 0);
  st = log_likelihood_update(st, cls, 0, 1);
  CHECK(st.log_likelihood[1] == doctest::Approx(std::log(0.8 * 0.2)));
  CHECK(st.round == 2);

  const ModelClass z(space, {Model{{{0.5, 0.5}}}, Model{{{1.0, 0.0}}}}, 0);
  CHECK(std::isinf(z.bound_b()));
  CHECK_THROWS_AS(default_n0(z), PreconditionError);
  auto s2 = log_likelihood_update(LikelihoodState::initial(z), z, 0, 1);
  CHECK(std::isinf(s2.log_likelihood[1]));
  s2 = log_likelihood_update(s2, z, 0, 0);
  CHECK(std::isinf(s2.log_likelihood[1]));
  CHECK(mle_greedy_step(s2, z).model == 0);
}

TEST_CASE("two-round product example") {
  OutcomeSpace space({0.0, 1.0}, {"o"});
  const ModelClass cls(space, {Model{{{0.5, 0.5}, {0.8, 0.2}}}, Model{{{0.1, 0.9}, {0.3, 0.7}}}}, 1);
  auto st = LikelihoodState::initial(cls);
  st = log_likelihood_update(st, cls, 0, 0);
  st = log_likelihood_update(st, cls, 1, 1);
  CHECK(st.log_likelihood[0] == doctest::Approx(std::log(0.1)));
}

TEST_CASE("log-likelihood matches the direct product over a trace") {
  const auto cls = decoy_class();
  RngStream rng(3, 0);
  auto st = LikelihoodState::initial(cls);
  std::vector<double> prod(cls.size(), 1.0);
  for (int t = 0; t < 10; ++t) {
    const std::size_t pi = rng.index(2), o = rng.index(2);
    st = log_likelihood_update(st, cls, pi, o);
    for (std::size_t m = 0; m < cls.size(); ++m) prod[m] *= cls[m].dist[pi][o];
  }
  for (std::size_t m = 0; m < cls.size(); ++m)
    CHECK(std::abs(std::exp(st.log_likelihood[m]) - prod[m]) <= 1e-10 * prod[m]);
}

TEST_CASE("KL and model gap") {
  CHECK(kl_divergence({0.5, 0.5}, {0.75, 0.25}) == doctest::Approx(0.143841).epsilon(1e-6));
  CHECK(std::isinf(kl_divergence({0.5, 0.5}, {1.0, 0.0})));
  OutcomeSpace space({0.0, 1.0}, {"o"});
  const ModelClass one(space, {Model{{{0.5, 0.5}}}, Model{{{0.75, 0.25}}}}, 0);
  CHECK(model_gap(one) == doctest::Approx(0.5 * std::log(2.0 / 3.0) + 0.5 * std::log(2.0)));
  const ModelClass same(space, {Model{{{0.5, 0.5}}}}, 0);
  CHECK(std::isinf(model_gap(same)));
}

TEST_CASE("model gap matches a double loop") {
  RngStream rng(4, 1);
  for (int it = 0; it < 100; ++it) {
    OutcomeSpace space({0.0, 1.0}, {"a", "b"});
    const std::size_t P = 1 + rng.index(3), nm = 2 + rng.index(3);
    std::vector<Model> ms;
    for (std::size_t m = 0; m < nm; ++m) {
      Model md;
      for (std::size_t p = 0; p < P; ++p) {
        std::vector<double> d(4);
        double s = 0;
        for (auto& v : d) s += v = 0.05 + rng.uniform();
        for (auto& v : d) v /= s;
        md.dist.push_back(d);
      }
      ms.push_back(md);
    }
    const ModelClass cls(space, ms, 0);
    double best = INFINITY;
    for (std::size_t m = 1; m < nm; ++m)
      for (std::size_t p = 0; p < P; ++p) best = std::min(best, kl_divergence(ms[0].dist[p], ms[m].dist[p]));
    CHECK(model_gap(cls) == best);
    for (std::size_t m = 1; m < nm; ++m) CHECK(decoy_renyi_constant(cls, m) <= cls.log_b() + 1e-12);
  }
}

TEST_CASE("renyi infinity divergence") {
  CHECK(renyi_inf({0.5, 0.5}, {0.25, 0.75}) == doctest::Approx(std::log(2.0)));
  CHECK(renyi_inf({0.3, 0.7}, {0.3, 0.7}) == 0.0);
}

TEST_CASE("phi expected dichotomy") {
  const auto cls = decoy_class();
  CHECK(phi_expected(cls[1], cls[0], 1) == 0.0);
  const double v = phi_expected(cls[1], cls[0], 0);
  CHECK(v == kl_divergence(cls[0].dist[0], cls[1].dist[0]));
  CHECK(v >= model_gap(cls));
}

TEST_CASE("MLE greedy step") {
  const auto cls = decoy_class();
  auto st = LikelihoodState::initial(cls);
  st = log_likelihood_update(st, cls, 0, 0);  // reward 0 under policy 0 favours the decoy
  const auto s = mle_greedy_step(st, cls);
  CHECK(s.model == 1);
  CHECK(s.policy == 1);

  // repeated evidence for member 1 makes its optimal policy the choice
  OutcomeSpace space({0.0, 1.0}, {"o"});
  const ModelClass sep(space, {Model{{{0.9, 0.1}, {0.5, 0.5}}}, Model{{{0.1, 0.9}, {0.9, 0.1}}}}, 0);
  auto e = LikelihoodState::initial(sep);
  for (int i = 0; i < 5; ++i) e = log_likelihood_update(e, sep, 0, 1);
  CHECK(mle_greedy_step(e, sep).model == 1);
  CHECK(mle_greedy_step(e, sep).policy == 0);
}

TEST_CASE("model decoys") {
  const auto cls = decoy_class();
  const auto d = find_model_decoys(cls);
  REQUIRE(d.size() == 1);
  CHECK(d[0].member == 1);
  CHECK(d[0].policy == 1);
  CHECK(d[0].regret_per_round == doctest::Approx(0.3));
  CHECK_FALSE(is_model_self_identifiable(cls));
}

TEST_CASE("warm-up order moves half the decoy samples to the end") {
  const auto o = dmso_warmup_order(2, 4, 1);
  REQUIRE(o.size() == 8);
  CHECK(o[6] == 1);
  CHECK(o[7] == 1);
  std::size_t ones = 0;
  for (auto p : o) ones += p;
  CHECK(ones == 4);
}

TEST_CASE("E1 and E2 imply the decoy policy throughout") {
  const auto cls = decoy_class();
  std::size_t both = 0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    RngStream rng(12, i);
    DmsoOptions o;
    o.decoy = 1;
    const auto ep = run_dmso_episode(cls, 200, 4, rng, o);
    REQUIRE(ep.diagnostics);
    const auto& d = *ep.diagnostics;
    if (d.e1_held && d.e2_held_through >= 200) {
      ++both;
      for (std::size_t t = ep.warmup_rounds; t < ep.policies.size(); ++t) CHECK(ep.policies[t] == 1);
    }
  }
  CHECK(both > 0);
}

TEST_CASE("chosen model attains the running max likelihood") {
  const auto cls = decoy_class();
  RngStream rng(13, 0);
  const auto ep = run_dmso_episode(cls, 100, 2, rng);
  auto st = LikelihoodState::initial(cls);
  for (std::size_t t = 0; t < ep.policies.size(); ++t) {
    if (t >= ep.warmup_rounds) {
      const std::size_t m = ep.chosen_model[t - ep.warmup_rounds];
      for (double v : st.log_likelihood) CHECK(st.log_likelihood[m] >= v);
    }
    st = log_likelihood_update(st, cls, ep.policies[t], ep.outcomes[t]);
  }
}

TEST_CASE("ghost warm-up with large N0 triggers E1 often") {
  const auto cls = decoy_class();
  const std::size_t n0 = default_n0(cls);
  int hits = 0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    RngStream rng(14, i);
    hits += sample_warmup_e1(cls, n0, 1, true, rng);
  }
  CHECK(hits >= 0.9 * 2000);
}

TEST_CASE("log-likelihood increments are bounded by ln B") {
  const auto cls = decoy_class();
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t o = 0; o < 2; ++o) {
      const double d = std::log(cls[0].dist[p][o]) - std::log(cls[1].dist[p][o]);
      CHECK(std::abs(d) <= cls.log_b() + 1e-12);
    }
}

TEST_CASE("contextual embedding keeps expected rewards") {
  const auto inst = make_mab_instance({{0.5, 0.9}, {0.5, 0.3}}, 0, 0.1);
  const auto cls = embed_contextual(inst);
  CHECK(cls.policies() == 2);
  CHECK(cls.expected_reward(0, 1) == doctest::Approx(0.9));
  CHECK(find_model_decoys(cls).size() == find_decoys(inst).size());
}

}  // TEST_SUITE
