#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "greedytrap/core.hpp"

namespace greedytrap {

inline constexpr double kInfiniteGap = std::numeric_limits<double>::infinity();

struct GapWitness {
  std::size_t member;
  std::size_t context;
  std::size_t arm;
};

/// Smallest nonzero per-entry difference between f and the rest of the class.
/// `gap` is kInfiniteGap (and `witness` empty) when no member differs from f.
struct GapReport {
  double gap = kInfiniteGap;
  std::optional<GapWitness> witness;

  bool infinite() const { return !witness.has_value(); }
};

GapReport function_gap(const RewardTable& f, const FunctionClass& cls);

/// Arms attaining the exact maximum of f at each context.
std::vector<std::vector<std::size_t>> optimal_arm_sets(const RewardTable& f);

/// Per-context argmax. Throws TieError on an exact tie.
Policy optimal_policy(const RewardTable& f);

/// Expected reward of a policy under the context distribution.
double policy_value(const RewardTable& f, const Policy& policy, std::span<const double> context_probs);

/// Largest achievable policy value, sum_x p(x) max_a f(x, a).
double optimal_value(const RewardTable& f, std::span<const double> context_probs);

/// True iff f(x, pi(x)) is below max_a f(x, a) at some context (all contexts
/// have positive probability, so this is the exact "strictly suboptimal" test).
bool is_suboptimal(const RewardTable& f, const Policy& policy);

/// f and g coincide on the graph {(x, pi(x))} of the policy.
bool agrees_on_policy(const RewardTable& f, const RewardTable& g, const Policy& policy);

enum class TieHandling { Strict, Ties };

struct SelfIdViolation {
  std::size_t member;
  Policy policy;
};

struct SelfIdReport {
  bool self_identifiable = true;
  std::optional<SelfIdViolation> witness;
};

/// Checks whether every suboptimal policy is identified as suboptimal once its
/// true rewards are fixed. Runs in O(|F| X K) without enumerating policies.
/// With TieHandling::Strict a tied member throws TieError; with Ties a member
/// violates if any of its optimal policies agrees with f* and is suboptimal.
SelfIdReport is_self_identifiable(const ProblemInstance& instance,
                                  TieHandling ties = TieHandling::Strict);

struct DecoyCertificate {
  std::size_t member;
  RewardTable decoy;
  Policy decoy_policy;
  /// Optimal arms of the decoy per context (singletons unless ties).
  std::vector<std::vector<std::size_t>> optimal_sets;
  double decoy_gap;
  double regret_per_round;
};

/// All decoys of f* in the class, ordered by descending decoy gap (member index
/// breaks ties). Empty iff the instance is self-identifiable.
std::vector<DecoyCertificate> find_decoys(const ProblemInstance& instance);

/// Decoys under randomized tie-breaking: every optimal policy of the decoy
/// agrees with f* on its graph and is suboptimal for f*. `decoy_policy` is the
/// lowest-index selection and `regret_per_round` its regret.
std::vector<DecoyCertificate> find_decoys_with_ties(const ProblemInstance& instance);

/// Re-checks every certificate field against the definitions. Returns an empty
/// string when valid, otherwise a description of the first failure.
std::string verify_certificate(const ProblemInstance& instance, const DecoyCertificate& cert,
                               TieHandling ties = TieHandling::Strict);

}  // namespace greedytrap
