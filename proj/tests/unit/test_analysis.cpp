#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "greedytrap/analysis.hpp"

using namespace greedytrap;

namespace {

// Random instance on the {0, 1/4, ..., 1} grid; optionally without exact ties.
ProblemInstance random_instance(RngStream& rng, std::size_t max_k, std::size_t max_x, std::size_t max_f,
                                bool unique_best) {
  const std::size_t K = 2 + rng.index(max_k - 1);
  const std::size_t X = 1 + rng.index(max_x);
  const std::size_t nf = 1 + rng.index(max_f);
  std::vector<RewardTable> members;
  for (int tries = 0; members.size() < nf && tries < 200; ++tries) {
    std::vector<double> v(X * K);
    for (auto& e : v) e = static_cast<double>(rng.index(5)) / 4.0;
    RewardTable t(X, K, v);
    if (unique_best) {
      bool tie = false;
      for (const auto& s : optimal_arm_sets(t)) tie = tie || s.size() > 1;
      if (tie) continue;
    }
    if (std::find(members.begin(), members.end(), t) != members.end()) continue;
    members.push_back(t);
  }
  const std::size_t truth = rng.index(members.size());
  return ProblemInstance(FunctionClass(members, unique_best), truth, 0.1,
                         std::vector<double>(X, 1.0 / static_cast<double>(X)), uniform_warmup(X, K, 1));
}

std::vector<Policy> all_policies(std::size_t X, std::size_t K) {
  std::vector<Policy> out;
  std::size_t total = 1;
  for (std::size_t x = 0; x < X; ++x) total *= K;
  for (std::size_t code = 0; code < total; ++code) {
    Policy p;
    std::size_t c = code;
    for (std::size_t x = 0; x < X; ++x) {
      p.arms.push_back(c % K);
      c /= K;
    }
    out.push_back(p);
  }
  return out;
}

bool policy_is_optimal(const RewardTable& f, const Policy& p) {
  for (std::size_t x = 0; x < f.contexts(); ++x) {
    const auto r = f.row(x);
    if (r[p(x)] != *std::max_element(r.begin(), r.end())) return false;
  }
  return true;
}

// Ties variant brute force: member f is a decoy iff every optimal selection
// agrees with f* and is suboptimal for f*.
bool brute_tie_decoy(const RewardTable& truth, const RewardTable& f) {
  if (f == truth) return false;
  for (const auto& p : all_policies(f.contexts(), f.arms())) {
    if (!policy_is_optimal(f, p)) continue;
    for (std::size_t x = 0; x < f.contexts(); ++x)
      if (f(x, p(x)) != truth(x, p(x))) return false;
    if (policy_is_optimal(truth, p)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("function gap example") {
  const FunctionClass cls({RewardTable::mab({0.5, 0.9}), RewardTable::mab({0.5, 0.3})});
  const auto g = function_gap(cls[0], cls);
  CHECK(g.gap == doctest::Approx(0.6).epsilon(1e-15));
  REQUIRE(g.witness);
  CHECK(g.witness->member == 1);
  CHECK(g.witness->arm == 1);
}

TEST_CASE("function gap of a singleton is infinite") {
  const FunctionClass cls({RewardTable::mab({0.5, 0.9})});
  const auto g = function_gap(cls[0], cls);
  CHECK(std::isinf(g.gap));
  CHECK(g.infinite());
}

TEST_CASE("function gap matches a double loop") {
  RngStream rng(17, 0);
  for (int it = 0; it < 300; ++it) {
    const auto inst = random_instance(rng, 4, 1, 8, false);
    const auto& cls = inst.function_class();
    double best = kInfiniteGap;
    for (const auto& g : cls.members())
      for (std::size_t a = 0; a < g.arms(); ++a) {
        const double d = std::abs(inst.truth()(0, a) - g(0, a));
        if (d > 0 && d < best) best = d;
      }
    CHECK(function_gap(inst.truth(), cls).gap == best);
  }
}

TEST_CASE("optimal policy") {
  CHECK(optimal_policy(RewardTable::mab({0.1, 0.7})).arms == std::vector<std::size_t>{1});
  try {
    optimal_policy(RewardTable::mab({0.5, 0.5}));
    FAIL("expected a tie error");
  } catch (const TieError& e) {
    CHECK(e.arms == std::vector<std::size_t>{0, 1});
  }
  const auto cb = RewardTable::from_rows({{0.2, 0.9}, {0.8, 0.1}});
  CHECK(optimal_policy(cb).arms == std::vector<std::size_t>{1, 0});
}

TEST_CASE("self-identifiability examples") {
  const auto inst = make_mab_instance({{0.5, 0.9}, {0.5, 0.3}}, 0, 0.1);
  const auto r = is_self_identifiable(inst);
  CHECK_FALSE(r.self_identifiable);
  REQUIRE(r.witness);
  CHECK(r.witness->member == 1);
  CHECK(r.witness->policy.arms == std::vector<std::size_t>{0});

  CHECK(is_self_identifiable(make_mab_instance({{0.5, 0.9}}, 0, 0.1)).self_identifiable);
}

TEST_CASE("find_decoys example") {
  const auto inst = make_mab_instance({{0.5, 0.9}, {0.5, 0.3}}, 0, 0.1);
  const auto d = find_decoys(inst);
  REQUIRE(d.size() == 1);
  CHECK(d[0].member == 1);
  CHECK(d[0].decoy == RewardTable::mab({0.5, 0.3}));
  CHECK(d[0].decoy_policy.arms == std::vector<std::size_t>{0});
  CHECK(d[0].regret_per_round == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(d[0].decoy_gap == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(verify_certificate(inst, d[0]).empty());

  const auto si = make_mab_instance({{0.5, 0.7, 0.9}, {0.8, 0.3, 0.6}}, 0, 0.1);
  CHECK(find_decoys(si).empty());
}

TEST_CASE("tampered certificate fails verification") {
  const auto inst = make_mab_instance({{0.5, 0.9}, {0.5, 0.3}}, 0, 0.1);
  auto c = find_decoys(inst).front();
  c.regret_per_round = 0.5;
  CHECK_FALSE(verify_certificate(inst, c).empty());
}

TEST_CASE("strict handling throws on a tied member") {
  const auto inst = make_mab_instance({{0.5, 0.9}, {0.5, 0.5}}, 0, 0.1);
  CHECK_THROWS_AS(is_self_identifiable(inst, TieHandling::Strict), TieError);
}

TEST_CASE("equivalence with exhaustive policy enumeration") {
  RngStream rng(2024, 1);
  for (int it = 0; it < 1000; ++it) {
    const auto inst = random_instance(rng, 3, 2, 6, true);
    const auto& f = inst.truth();
    bool oracle = true;
    for (const auto& p : all_policies(inst.contexts(), inst.arms())) {
      if (policy_is_optimal(f, p)) continue;
      for (const auto& g : inst.function_class().members())
        if (agrees_on_policy(f, g, p) && policy_is_optimal(g, p)) oracle = false;
    }
    const bool si = is_self_identifiable(inst).self_identifiable;
    CHECK(si == oracle);
    CHECK(si == find_decoys(inst).empty());
  }
}

TEST_CASE("decoy under ties") {
  const auto inst = make_mab_instance({{0.5, 0.5, 1.0}, {0.5, 0.5, 0.25}}, 0, 0.1);
  const auto d = find_decoys_with_ties(inst);
  REQUIRE(d.size() == 1);
  CHECK(d[0].member == 1);
  CHECK(d[0].optimal_sets == std::vector<std::vector<std::size_t>>{{0, 1}});
  CHECK(verify_certificate(inst, d[0], TieHandling::Ties).empty());
}

TEST_CASE("a tie member with one optimal arm off f* is not a decoy") {
  // (2,2,1)/4 ties arms 0 and 1; arm 1 differs from f* = (2,3,4)/4.
  const auto inst = make_mab_instance({{0.5, 0.75, 1.0}, {0.5, 0.5, 0.25}}, 0, 0.1);
  CHECK(find_decoys_with_ties(inst).empty());
  // Randomized tie-breaking still fails the relaxed check.
  CHECK_FALSE(is_self_identifiable(inst, TieHandling::Ties).self_identifiable);
}

TEST_CASE("a member whose optimal arm matches f*'s optimal arm is not a decoy") {
  const auto inst = make_mab_instance({{0.5, 0.5, 1.0}, {0.2, 0.3, 1.0}}, 0, 0.1);
  CHECK(find_decoys_with_ties(inst).empty());
}

TEST_CASE("ties decoys match brute force over optimal selections") {
  RngStream rng(99, 4);
  for (int it = 0; it < 400; ++it) {
    const auto inst = random_instance(rng, 3, 2, 5, false);
    std::set<std::size_t> expected;
    for (std::size_t m = 0; m < inst.function_class().size(); ++m)
      if (brute_tie_decoy(inst.truth(), inst.function_class()[m])) expected.insert(m);
    std::set<std::size_t> got;
    for (const auto& c : find_decoys_with_ties(inst)) {
      got.insert(c.member);
      CHECK(verify_certificate(inst, c, TieHandling::Ties).empty());
    }
    CHECK(got == expected);
  }
}

TEST_CASE("policy value helpers") {
  const auto f = RewardTable::from_rows({{0.2, 0.9}, {0.8, 0.1}});
  const std::vector<double> p{0.25, 0.75};
  CHECK(policy_value(f, Policy{{1, 0}}, p) == doctest::Approx(0.25 * 0.9 + 0.75 * 0.8));
  CHECK(optimal_value(f, p) == doctest::Approx(0.825));
  CHECK(is_suboptimal(f, Policy{{0, 0}}));
  CHECK_FALSE(is_suboptimal(f, Policy{{1, 0}}));
}

}  // TEST_SUITE
