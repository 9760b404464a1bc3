#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "greedytrap/core.hpp"

namespace greedytrap {

/// Raised when a parametric class lacks the requested capability.
struct UnsupportedError : Error {
  using Error::Error;
};

struct EpsViolation {
  std::size_t arm;     // suboptimal arm of f* made (weakly) optimal
  RewardTable member;  // class member within eps of f* on that arm
};

/// Infinite (or wrapped finite) class over single-context tables. Capabilities
/// that a class does not support are left empty.
struct ParametricClass {
  std::string description;
  std::size_t arms = 0;
  std::function<bool(const RewardTable&)> contains;
  std::function<bool(const RewardTable&, double)> interior;
  std::function<std::optional<EpsViolation>(const RewardTable&, double)> violation_search;
  /// Least-squares fit weighted by pull counts, for tables outside the class.
  std::function<RewardTable(const History&)> projection;

  // Parameters of the built-in L2 ball (empty otherwise), kept for serialization.
  std::optional<RewardTable> ball_center;
  double ball_radius = 0.0;
};

/// {f : ||f - center||_2 <= radius}; interior is exact and uses the closed
/// eps-ball, so distance R - eps counts as interior.
ParametricClass l2_ball(RewardTable center, double radius);

/// Finite class viewed through the parametric interface (for cross-checks).
ParametricClass finite_class_view(FunctionClass cls);

/// {f : |f(a) - f(b)| <= D(a,b)}. Membership only.
ParametricClass lipschitz_cone(std::vector<std::vector<double>> metric);

bool is_interior(const RewardTable& f, const ParametricClass& cls, double eps);

struct EpsSelfIdReport {
  bool holds = true;
  std::optional<EpsViolation> witness;
};

/// True iff no member within eps of f* on a suboptimal arm a has a among its
/// optimal arms.
EpsSelfIdReport is_eps_self_identifiable(const RewardTable& truth, const ParametricClass& cls, double eps);

/// Empirical means if they form a class member, otherwise nullopt.
std::optional<RewardTable> empirical_fit_oracle(const History& history, const ParametricClass& cls);

/// Empirical means as a table; every arm must have a sample.
RewardTable empirical_table(const History& history);

/// Weighted constrained least squares onto an L2 ball: f_a = (w_a r_a + l c_a)/(w_a + l).
RewardTable project_onto_ball(const History& history, const RewardTable& center, double radius);

struct ContinuumDecoy {
  RewardTable decoy;
  std::size_t arm = 0;
};

/// Checks membership, eps-interior, agreement on the decoy arm, unique best
/// arm, and suboptimality for f*. Empty string when valid.
std::string verify_continuum_decoy(const RewardTable& truth, const ContinuumDecoy& decoy,
                                   const ParametricClass& cls, double eps);

/// E1 band centre f_dec(a) - eps/(2 sqrt K), strict radius eps/(4 sqrt K).
bool check_event_e1_inf(const History& warmup, const ContinuumDecoy& decoy, double eps);

/// Same convention as the finite check with radius eps/(4 sqrt K).
std::size_t check_event_e2_inf(const History& history, const ContinuumDecoy& decoy, double eps);

/// eps / (4 sqrt K).
double inf_event_radius(double eps, std::size_t arms);

struct ContinuumInstance {
  ParametricClass cls;
  RewardTable truth;
  double sigma = 0.0;
  std::size_t warmup_per_arm = 1;
  double eps = 0.0;
  std::optional<ContinuumDecoy> decoy;
};

struct ContinuumDiagnostics {
  bool e1_held = false;
  std::size_t e2_held_through = 0;
  bool stuck_on_decoy = false;
  std::optional<std::size_t> first_deviation_round;
  std::size_t chain_violations = 0;     // rounds under the events where the stuck chain failed
  std::size_t distance_violations = 0;  // rounds under the events with ||f_emp - f_dec|| > 3 eps / 4
};

struct ContinuumOptions {
  bool force_e1 = false;
  bool keep_regret_curve = true;
};

struct ContinuumEpisode {
  History history;
  std::vector<double> cumulative_regret;
  double final_regret = 0.0;
  std::size_t suboptimal_pulls = 0;
  std::size_t warmup_rounds = 0;
  std::size_t fit_changes = 0;        // rounds whose fitted table differs from the previous one
  std::size_t projection_rounds = 0;  // rounds that fell back to projection (outside the class)
  std::optional<ContinuumDiagnostics> diagnostics;
};

/// Warm-up then Greedy with the empirical-fit oracle; strict argmax ties throw.
ContinuumEpisode run_continuum_episode(const ContinuumInstance& instance, std::size_t horizon,
                                       RngStream& rng, const ContinuumOptions& options = {});

}  // namespace greedytrap
