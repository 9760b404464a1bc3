#pragma once

#include <optional>
#include <vector>

#include "greedytrap/analysis.hpp"
#include "greedytrap/core.hpp"

namespace greedytrap {

/// How Greedy resolves an exact argmax tie. Randomized mode draws uniformly
/// among the tied arms; construction checks that 1/|tied| >= q0 can be met
/// for up to `arms` tied arms.
struct TieMode {
  enum class Kind { Strict, Randomized };
  Kind kind = Kind::Strict;
  double q0 = 0.0;

  static TieMode strict() { return {}; }
  static TieMode randomized(double q0);
};

struct GreedyState {
  const ProblemInstance* instance = nullptr;
  History history;
  TieMode tie_mode;
  std::size_t round = 0;

  GreedyState(const ProblemInstance& inst, History h, TieMode mode = TieMode::strict());
};

/// sum over pairs of N(x,a) * (mean(x,a) - f(x,a))^2; unsampled pairs add 0.
double mse(const History& history, const RewardTable& f);

struct OracleResult {
  std::size_t member;
  double mse;
};

/// Least-squares fit over the class. Exact MSE ties go to the lowest index.
OracleResult regression_oracle(const History& history, const FunctionClass& cls);

struct StepResult {
  ArmIndex arm;
  std::size_t member;
};

/// One main-stage Greedy decision at the given context. Advances state.round
/// but does not record a reward.
StepResult greedy_step(GreedyState& state, ContextIndex context, RngStream& rng);

/// Draws the exogenous warm-up data. When `plant` is given, warm-up rewards of
/// every pair outside the decoy's optimal arms are set to the decoy value (the
/// centre of the E1 band); draws are still consumed so streams stay aligned.
History run_warmup(const ProblemInstance& instance, RngStream& rng,
                   const DecoyCertificate* plant = nullptr);

struct EventDiagnostics {
  bool e1_held = false;
  std::size_t e2_held_through = 0;
  bool stuck_on_decoy = false;
  std::optional<std::size_t> first_deviation_round;
};

struct EpisodeOptions {
  const DecoyCertificate* decoy = nullptr;
  bool force_e1 = false;
  bool keep_regret_curve = true;
};

struct EpisodeResult {
  History history;
  std::vector<std::size_t> chosen_member;   // one entry per main-stage round
  std::vector<double> cumulative_regret;    // R(t) for t = 1..horizon
  double warmup_regret = 0.0;
  double final_regret = 0.0;
  std::size_t suboptimal_pulls = 0;         // main stage only
  std::size_t warmup_rounds = 0;
  std::optional<EventDiagnostics> diagnostics;
};

/// Warm-up followed by Greedy through round `horizon` (total rounds, > T0).
/// Regret is pseudo-regret: per main round f*(pi*) minus the expected value of
/// the chosen member's optimal policy (uniform over tied arms).
EpisodeResult run_episode(const ProblemInstance& instance, std::size_t horizon, TieMode tie_mode,
                          RngStream& rng, const EpisodeOptions& options = {});

/// Strict band check of the warm-up means around the decoy, for every pair
/// outside the decoy's optimal arm sets: |mean - f_dec| < gap(f_dec) / 2.
bool check_event_e1(const History& warmup, const DecoyCertificate& decoy);

/// Largest t in [T0, T] such that, after warm-up and after every round up to
/// t, each decoy pair's mean is within gap(f_dec)/2 of f*. Returns T0 - 1 if
/// the warm-up means already violate (or lack) the bound.
std::size_t check_event_e2(const History& history, const DecoyCertificate& decoy);

/// Confidence radius sqrt((2/n) ln(pi^2 X K n^2 / (3 delta))) for 1-subgaussian
/// rewards; multiply by sigma for sigma-subgaussian noise.
double beta(std::size_t n, std::size_t arms, std::size_t contexts, double delta);

/// Noise scale at which the union bound over `pairs` decoy pairs keeps every
/// empirical mean within `radius` forever with probability >= 1 - budget:
/// pairs * 2u/(1-u) = budget with u = exp(-radius^2 / (2 sigma^2)).
double e2_sigma(double radius, std::size_t pairs = 1, double budget = 0.1);

}  // namespace greedytrap
