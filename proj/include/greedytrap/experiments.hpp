#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "greedytrap/analysis.hpp"
#include "greedytrap/continuum.hpp"
#include "greedytrap/core.hpp"
#include "greedytrap/dmso.hpp"
#include "greedytrap/greedy.hpp"

namespace greedytrap {

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959964);

struct StuckEstimate {
  double p_hat = 0.0;
  WilsonInterval ci;
  std::size_t trials = 0;
  std::size_t stuck = 0;
  std::size_t e1e2_trials = 0;  // trials with E1 and E2 through the horizon
  std::size_t e1e2_stuck = 0;
  /// Fraction of E1-and-E2 trials that were stuck; absent when there were none.
  std::optional<double> conditional_check;

  bool invariant_ok() const { return e1e2_stuck == e1e2_trials; }
};

struct ExperimentConfig {
  std::size_t horizon = 1000;
  std::size_t trials = 100;
  std::uint64_t master_seed = 0;
  TieMode tie_mode = TieMode::strict();
  bool force_e1 = false;
  unsigned threads = 1;
  bool keep_curve = true;
  /// Rounds at which per-trial regret is reported.
  std::vector<std::size_t> checkpoints;
};

struct TrialRecord {
  std::size_t trial = 0;
  bool stuck = false;
  bool e1 = false;
  std::size_t e2_through = 0;
  std::optional<std::size_t> first_deviation;
  double final_regret = 0.0;
  double warmup_regret = 0.0;
  std::size_t suboptimal_pulls = 0;
  std::vector<double> regret_at_checkpoints;
};

/// Per-round mean and standard error of cumulative regret, index t-1.
struct RegretCurve {
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  RegretCurve curve;
  std::optional<StuckEstimate> stuck;
  std::size_t warmup_rounds = 0;
  double decoy_regret_per_round = 0.0;  // f*(pi*) - f*(pi_dec), if a decoy is designated
  std::size_t invariant_violations = 0;  // E1-and-E2 trials that deviated, and other hard failures
};

/// Output of one trial: its record plus (optionally) the regret curve.
struct TrialOutcome {
  TrialRecord record;
  std::vector<double> curve;
  std::size_t invariant_violations = 0;
};

/// Runs trials in fixed-size blocks on up to `threads` workers. Curves are
/// summed per block and blocks are reduced in order, so results do not depend
/// on the thread count.
ExperimentResult run_trials(std::size_t trials, unsigned threads, bool keep_curve,
                            const std::function<TrialOutcome(std::size_t)>& trial);

/// Worker count: explicit value if nonzero, else GREEDYTRAP_THREADS, else 1.
unsigned resolve_threads(unsigned requested);

/// Greedy on a finite instance; stuck statistics are filled when `decoy` is given.
ExperimentResult run_greedy_experiment(const ProblemInstance& instance, const DecoyCertificate* decoy,
                                       const ExperimentConfig& config);

/// Requires a decoy certificate; throws PreconditionError otherwise.
ExperimentResult estimate_stuck_probability(const ProblemInstance& instance,
                                            const std::optional<DecoyCertificate>& decoy,
                                            const ExperimentConfig& config);

ExperimentResult run_continuum_experiment(const ContinuumInstance& instance, const ExperimentConfig& config);

ExperimentResult run_dmso_experiment(const ModelClass& cls, std::optional<std::size_t> decoy, std::size_t n0,
                                     const ExperimentConfig& config);

RegretCurve regret_curve(const ProblemInstance& instance, const ExperimentConfig& config);

// -- information-aware baseline -------------------------------------------------------

struct InfoAwareEpisode {
  std::vector<double> cumulative_regret;
  double final_regret = 0.0;
  std::size_t suboptimal_pulls = 0;
  /// Per policy (MAB: per arm), summed pulls of its graph when it was first
  /// identified as suboptimal; absent if never excluded. Empty when the
  /// policy set is too large to enumerate (more than 256 policies).
  std::vector<std::optional<std::size_t>> exclusion_pulls;
  /// Plays of a policy that is identified-and-suboptimal in that same round,
  /// outside fallback rounds. Must stay 0.
  std::size_t excluded_plays = 0;
  std::size_t fallback_rounds = 0; // rounds where no member fit every band
};

/// Confidence radius of the baseline: sqrt((2/n) ln(10 K X t n^2 / (3 delta))).
double beta_t(std::size_t n, std::size_t t, std::size_t arms, std::size_t contexts, double delta);

/// Plays, least-played first, among optimal policies of members consistent
/// with every closed band sigma * beta_t(N). delta defaults to 1/horizon.
InfoAwareEpisode run_info_aware_episode(const ProblemInstance& instance, std::size_t horizon, RngStream& rng,
                                        std::optional<double> delta = std::nullopt, bool keep_curve = true);

ExperimentResult info_aware_baseline(const ProblemInstance& instance, const ExperimentConfig& config);

// -- growth diagnostics --------------------------------------------------------------------

struct GrowthFit {
  double r2_log = 0.0;     // R(t) ~ a + b ln t
  double r2_linear = 0.0;  // R(t) ~ a + b t
  double slope_log = 0.0;
  double slope_linear = 0.0;
  double ratio = 0.0;      // R(T) / R(T/10); 1 if both are 0, inf if only R(T/10) is
  bool sublinear = false;  // ratio <= 2.5
};

/// Fits over geometrically spaced rounds in (t0, T] of a cumulative curve.
GrowthFit fit_growth(const std::vector<double>& curve, std::size_t t0);

// -- DMSO ghost process -------------------------------------------------------------------------

struct DmsoFailureResult {
  double q_e1 = 0.0;  // E1 frequency under ghost warm-up
  double p_e1 = 0.0;  // E1 frequency under true warm-up
  double q_stderr = 0.0;
  double p_stderr = 0.0;
  std::size_t draws = 0;
  double log_b = 0.0;
  std::size_t exponent = 0;     // |Pi| N0
  double ratio_bound = 0.0;     // Q / B^{|Pi| N0}, evaluated in log space
  std::optional<ExperimentResult> episodes;
};

DmsoFailureResult dmso_failure_experiment(const ModelClass& cls, std::size_t decoy, std::size_t n0,
                                          std::size_t draws, std::uint64_t master_seed, unsigned threads,
                                          const std::optional<ExperimentConfig>& episodes = std::nullopt);

// -- standard fixtures -----------------------------------------------------------------------------

struct FiniteFixture {
  std::string name;
  ProblemInstance instance;
  std::optional<DecoyCertificate> decoy;
};

FiniteFixture fixture_mab_failure();
FiniteFixture fixture_cb_failure();
FiniteFixture fixture_mab_success();
FiniteFixture fixture_cb_success();
ContinuumInstance fixture_continuum_failure();
ContinuumInstance fixture_continuum_success();

/// Noise scale from the E2 union-bound rule for a finite decoy certificate.
double e2_sigma_for(const DecoyCertificate& decoy);
/// Noise scale from the continuum E2 rule, radius eps / (4 sqrt K).
double e2_sigma_continuum(double eps, std::size_t arms);

// -- output --------------------------------------------------------------------------------------

/// One row per trial: trial_id, stuck, e1, e2_through, first_deviation,
/// final_regret, suboptimal_pulls, regret_at_<t>...
std::string trials_csv(const ExperimentResult& result, const std::vector<std::size_t>& checkpoints);

/// t, mean_regret, stderr.
std::string curve_csv(const RegretCurve& curve);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace greedytrap
