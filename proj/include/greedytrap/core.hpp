#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace greedytrap {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Table shapes or indices that do not agree with the owning instance.
struct ShapeError : Error {
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
struct PreconditionError : Error {
  using Error::Error;
};

/// Exact tie in an argmax that was required to be unique.
struct TieError : Error {
  TieError(std::size_t context, std::vector<std::size_t> arms,
           std::optional<std::size_t> round = std::nullopt);

  std::size_t context;
  std::vector<std::size_t> arms;
  std::optional<std::size_t> round;
};

// ---------------------------------------------------------------------------
// Indices
// ---------------------------------------------------------------------------

struct ArmIndex {
  std::size_t value = 0;
  friend auto operator<=>(const ArmIndex&, const ArmIndex&) = default;
};

struct ContextIndex {
  std::size_t value = 0;
  friend auto operator<=>(const ContextIndex&, const ContextIndex&) = default;
};

// ---------------------------------------------------------------------------
// Reward tables and classes
// ---------------------------------------------------------------------------

/// Expected reward per (context, arm); a multi-armed bandit is the X = 1 case.
class RewardTable {
 public:
  RewardTable() = default;
  RewardTable(std::size_t contexts, std::size_t arms, std::vector<double> values);

  static RewardTable mab(std::vector<double> values);
  static RewardTable from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t contexts() const { return contexts_; }
  std::size_t arms() const { return arms_; }

  double operator()(std::size_t x, std::size_t a) const { return values_[x * arms_ + a]; }
  double& operator()(std::size_t x, std::size_t a) { return values_[x * arms_ + a]; }

  std::span<const double> row(std::size_t x) const {
    return {values_.data() + x * arms_, arms_};
  }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const RewardTable& other) const {
    return contexts_ == other.contexts_ && arms_ == other.arms_;
  }

  /// Exact (bitwise-value) equality of every entry.
  friend bool operator==(const RewardTable&, const RewardTable&) = default;

 private:
  std::size_t contexts_ = 0;
  std::size_t arms_ = 0;
  std::vector<double> values_;
};

/// Deterministic mapping from contexts to arms.
struct Policy {
  std::vector<std::size_t> arms;

  std::size_t operator()(std::size_t x) const { return arms[x]; }
  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Finite, duplicate-free, shape-homogeneous set of reward tables.
class FunctionClass {
 public:
  FunctionClass() = default;
  explicit FunctionClass(std::vector<RewardTable> members, bool best_arm_unique = false);

  std::size_t size() const { return members_.size(); }
  const RewardTable& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<RewardTable>& members() const { return members_; }
  std::size_t contexts() const { return members_.front().contexts(); }
  std::size_t arms() const { return members_.front().arms(); }
  bool best_arm_unique() const { return best_arm_unique_; }

  std::optional<std::size_t> index_of(const RewardTable& f) const;

 private:
  std::vector<RewardTable> members_;
  bool best_arm_unique_ = false;
};

/// Number of warm-up samples per (context, arm).
using WarmupSpec = std::vector<std::vector<std::size_t>>;

WarmupSpec uniform_warmup(std::size_t contexts, std::size_t arms, std::size_t per_pair);

/// (f*, F) plus Gaussian noise scale, context distribution and warm-up plan.
class ProblemInstance {
 public:
  ProblemInstance() = default;
  ProblemInstance(FunctionClass cls, std::size_t true_index, double sigma,
                  std::vector<double> context_probs, WarmupSpec warmup,
                  bool bounded_rewards = true);

  const FunctionClass& function_class() const { return class_; }
  const RewardTable& truth() const { return class_[true_index_]; }
  std::size_t true_index() const { return true_index_; }
  double sigma() const { return sigma_; }
  const std::vector<double>& context_probs() const { return context_probs_; }
  double p0() const { return p0_; }
  const WarmupSpec& warmup() const { return warmup_; }
  std::size_t warmup_total() const;
  bool bounded_rewards() const { return bounded_rewards_; }
  std::size_t contexts() const { return class_.contexts(); }
  std::size_t arms() const { return class_.arms(); }

  std::optional<double> grid_eps;
  std::optional<std::size_t> decoy_hint;

  ProblemInstance with_sigma(double sigma) const;
  ProblemInstance with_warmup(WarmupSpec warmup) const;

 private:
  FunctionClass class_;
  std::size_t true_index_ = 0;
  double sigma_ = 0.0;
  std::vector<double> context_probs_;
  double p0_ = 1.0;
  WarmupSpec warmup_;
  bool bounded_rewards_ = true;
};

/// Convenience: single-context instance with uniform one-sample warm-up.
ProblemInstance make_mab_instance(std::vector<std::vector<double>> members,
                                  std::size_t true_index, double sigma,
                                  std::size_t warmup_per_arm = 1);

// ---------------------------------------------------------------------------
// History
// ---------------------------------------------------------------------------

struct Round {
  std::size_t context;
  std::size_t arm;
  double reward;
};

/// Per-pair counts and reward sums plus the raw round log. Means are derived
/// on read as sum / count.
class History {
 public:
  History() = default;
  History(std::size_t contexts, std::size_t arms);

  void record(ContextIndex context, ArmIndex arm, double reward);

  /// Marks the current length as the end of warm-up (T0).
  void close_warmup() { warmup_rounds_ = rounds_.size(); }

  std::size_t contexts() const { return contexts_; }
  std::size_t arms() const { return arms_; }
  std::size_t count(std::size_t x, std::size_t a) const { return counts_[x * arms_ + a]; }
  double sum(std::size_t x, std::size_t a) const { return sums_[x * arms_ + a]; }
  std::optional<double> mean(std::size_t x, std::size_t a) const;

  const std::vector<Round>& rounds() const { return rounds_; }
  std::size_t size() const { return rounds_.size(); }
  std::size_t warmup_rounds() const { return warmup_rounds_; }

  /// Rebuilds counts and sums from the round log.
  History replayed() const;

 private:
  std::size_t contexts_ = 0;
  std::size_t arms_ = 0;
  std::vector<Round> rounds_;
  std::vector<std::size_t> counts_;
  std::vector<double> sums_;
  std::size_t warmup_rounds_ = 0;
};

/// Free-function form of History::record; returns the updated history.
History record_round(History history, ContextIndex context, ArmIndex arm, double reward);

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// Deterministic stream keyed by (master_seed, stream_id). Two streams with the
/// same key produce identical draw sequences.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double normal();
  double uniform();
  std::size_t index(std::size_t n);
  std::size_t discrete(std::span<const double> probs);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t stream_id);

double sample_reward(const ProblemInstance& instance, ContextIndex context, ArmIndex arm,
                     RngStream& rng);
ContextIndex sample_context(const ProblemInstance& instance, RngStream& rng);
ContextIndex sample_context(std::span<const double> probs, RngStream& rng);

}  // namespace greedytrap
