#include <cmath>

#include "doctest.h"
#include "greedytrap/core.hpp"

using namespace greedytrap;

TEST_SUITE("core") {

TEST_CASE("record_round single sample") {
  History h(1, 2);
  h = record_round(h, ContextIndex{0}, ArmIndex{1}, 0.2);
  CHECK(h.count(0, 1) == 1);
  CHECK(*h.mean(0, 1) == 0.2);
  CHECK_FALSE(h.mean(0, 0).has_value());
}

TEST_CASE("record_round two-point and constant means") {
  History h(1, 2);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.4);
  h.record(ContextIndex{0}, ArmIndex{0}, 0.6);
  CHECK(h.count(0, 0) == 2);
  CHECK(*h.mean(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  History g(1, 1);
  for (int i = 0; i < 1000; ++i) g.record(ContextIndex{0}, ArmIndex{0}, 1.0);
  CHECK(*g.mean(0, 0) == 1.0);
}

TEST_CASE("history rejects out-of-range indices") {
  History h(2, 2);
  CHECK_THROWS_AS(h.record(ContextIndex{2}, ArmIndex{0}, 0.0), ShapeError);
  CHECK_THROWS_AS(h.record(ContextIndex{0}, ArmIndex{5}, 0.0), ShapeError);
}

TEST_CASE("history replay matches incremental state") {
  RngStream rng(7, 0);
  History h(2, 3);
  for (int i = 0; i < 500; ++i)
    h.record(ContextIndex{rng.index(2)}, ArmIndex{rng.index(3)}, rng.normal());
  const History r = h.replayed();
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(r.count(x, a) == h.count(x, a));
      CHECK(r.sum(x, a) == h.sum(x, a));
    }
}

TEST_CASE("class construction validates shapes and duplicates") {
  CHECK_THROWS_AS(FunctionClass({RewardTable::mab({0.1, 0.2}), RewardTable::mab({0.1, 0.2, 0.3})}), ShapeError);
  CHECK_THROWS(FunctionClass({RewardTable::mab({0.1, 0.2}), RewardTable::mab({0.1, 0.2})}));
  CHECK_THROWS(FunctionClass({RewardTable::mab({0.5, 0.5})}, true));
  const FunctionClass ok({RewardTable::mab({0.1, 0.2}), RewardTable::mab({0.3, 0.2})}, true);
  CHECK(ok.index_of(RewardTable::mab({0.3, 0.2})) == 1);
}

TEST_CASE("instance validation") {
  const FunctionClass cls({RewardTable::from_rows({{0.1, 0.2}, {0.3, 0.4}})});
  CHECK_THROWS(ProblemInstance(cls, 1, 0.1, {0.5, 0.5}, uniform_warmup(2, 2, 1)));
  CHECK_THROWS(ProblemInstance(cls, 0, -0.1, {0.5, 0.5}, uniform_warmup(2, 2, 1)));
  CHECK_THROWS(ProblemInstance(cls, 0, 0.1, {0.6, 0.6}, uniform_warmup(2, 2, 1)));
  const ProblemInstance inst(cls, 0, 0.1, {0.25, 0.75}, uniform_warmup(2, 2, 2));
  CHECK(inst.warmup_total() == 8);
  CHECK(inst.p0() == 0.25);
}

TEST_CASE("sample_reward is exact at sigma zero") {
  const auto inst = make_mab_instance({{0.3, 0.7}}, 0, 0.0);
  RngStream rng(1, 2);
  for (int i = 0; i < 10; ++i) CHECK(sample_reward(inst, ContextIndex{0}, ArmIndex{1}, rng) == 0.7);
}

TEST_CASE("sample_reward mean of 1e6 draws") {
  const double sigma = 0.5;
  const auto inst = make_mab_instance({{0.3, 0.7}}, 0, sigma);
  RngStream rng(11, 3);
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += sample_reward(inst, ContextIndex{0}, ArmIndex{0}, rng);
  CHECK(std::abs(s / n - 0.3) <= 4.0 * sigma / 1000.0);
}

TEST_CASE("equal keys give identical streams, different keys differ") {
  RngStream a(42, 5), b(42, 5), c(42, 6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    if (x != c.normal()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("sample_context") {
  RngStream rng(3, 0);
  const auto single = make_mab_instance({{0.3, 0.7}}, 0, 0.1);
  for (int i = 0; i < 100; ++i) CHECK(sample_context(single, rng).value == 0);

  const std::vector<double> degenerate{1.0, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(sample_context(degenerate, rng).value == 0);

  const std::vector<double> half{0.5, 0.5};
  std::size_t zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) zeros += sample_context(half, rng).value == 0;
  const double freq = static_cast<double>(zeros) / n;
  CHECK(freq >= 0.48);
  CHECK(freq <= 0.52);
}

}  // TEST_SUITE
