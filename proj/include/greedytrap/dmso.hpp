#pragma once

#include <optional>
#include <string>
#include <vector>

#include "greedytrap/core.hpp"

namespace greedytrap {

/// Finite reward values x opaque observation labels. Outcome index is
/// reward_index * observations.size() + observation_index.
struct OutcomeSpace {
  std::vector<double> rewards;
  std::vector<std::string> observations;

  OutcomeSpace() = default;
  OutcomeSpace(std::vector<double> rewards, std::vector<std::string> observations);

  std::size_t size() const { return rewards.size() * observations.size(); }
  std::size_t outcome(std::size_t reward_index, std::size_t observation_index) const {
    return reward_index * observations.size() + observation_index;
  }
  double reward_of(std::size_t outcome) const { return rewards[outcome / observations.size()]; }
  std::size_t observation_of(std::size_t outcome) const { return outcome % observations.size(); }
};

/// One outcome distribution per policy.
struct Model {
  std::vector<std::vector<double>> dist;

  std::size_t policies() const { return dist.size(); }
  friend bool operator==(const Model&, const Model&) = default;
};

class ModelClass {
 public:
  ModelClass() = default;
  ModelClass(OutcomeSpace space, std::vector<Model> members, std::size_t true_index,
             std::vector<std::string> policy_names = {});

  const OutcomeSpace& space() const { return space_; }
  const std::vector<Model>& members() const { return members_; }
  const Model& operator[](std::size_t i) const { return members_[i]; }
  std::size_t size() const { return members_.size(); }
  std::size_t policies() const { return members_.front().policies(); }
  std::size_t true_index() const { return true_index_; }
  const Model& truth() const { return members_[true_index_]; }
  const std::vector<std::string>& policy_names() const { return policy_names_; }

  /// Largest mass ratio M(pi)(o) / M'(pi)(o) over outcomes with positive mass;
  /// +infinity when members disagree on which outcomes have zero mass.
  double bound_b() const { return bound_b_; }
  double log_b() const { return log_b_; }

  /// f(pi | M): expected reward of a policy under a member.
  double expected_reward(std::size_t member, std::size_t policy) const;

 private:
  OutcomeSpace space_;
  std::vector<Model> members_;
  std::size_t true_index_ = 0;
  std::vector<std::string> policy_names_;
  double bound_b_ = 1.0;
  double log_b_ = 0.0;
};

struct LikelihoodState {
  std::vector<double> log_likelihood;
  std::size_t round = 0;

  static LikelihoodState initial(const ModelClass& cls);
};

/// Adds log M(pi)(outcome) to every member; zero mass gives -infinity.
LikelihoodState log_likelihood_update(LikelihoodState state, const ModelClass& cls,
                                      std::size_t policy, std::size_t outcome);

/// KL(p || q) in nats; +infinity when p puts mass where q has none.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// max over outcomes of ln(p/q); +infinity on a support violation.
double renyi_inf(const std::vector<double>& p, const std::vector<double>& q);

/// min over M' and pi with M(pi) != M'(pi) of KL(M(pi), M'(pi)); +infinity if
/// no member differs from M.
double model_gap(const ModelClass& cls, std::size_t member);
inline double model_gap(const ModelClass& cls) { return model_gap(cls, cls.true_index()); }

/// max_pi D_inf(M_dec(pi) || M*(pi)).
double decoy_renyi_constant(const ModelClass& cls, std::size_t decoy);

/// E over outcomes of reference(pi) of [log reference - log M] = KL(reference(pi), M(pi)).
double phi_expected(const Model& member, const Model& reference, std::size_t policy);

/// Unique optimal policy of a member; TieError (context 0, tied policies) otherwise.
std::size_t model_optimal_policy(const ModelClass& cls, std::size_t member);

struct MleStep {
  std::size_t policy;
  std::size_t model;
};

/// Max-likelihood member (lowest index on exact ties) and its optimal policy.
MleStep mle_greedy_step(const LikelihoodState& state, const ModelClass& cls);

struct ModelDecoy {
  std::size_t member;
  std::size_t policy;
  double regret_per_round;
};

/// Members whose optimal policy has the same outcome distribution as under M*
/// and is suboptimal for M*.
std::vector<ModelDecoy> find_model_decoys(const ModelClass& cls);

/// Self-identifiability for model classes, checked per member's optimal policy.
bool is_model_self_identifiable(const ModelClass& cls);

struct DmsoDiagnostics {
  bool e1_held = false;
  std::size_t e2_held_through = 0;  // round index, same convention as the finite greedy check
  bool stuck_on_decoy = false;
  std::optional<std::size_t> first_deviation_round;
};

struct DmsoOptions {
  std::optional<std::size_t> decoy;  // member index of M_dec
  bool ghost = false;                // warm-up outcomes drawn from M_dec
};

struct DmsoEpisode {
  std::vector<std::size_t> policies;
  std::vector<std::size_t> outcomes;
  std::vector<std::size_t> chosen_model;  // main stage only
  std::vector<double> cumulative_regret;
  std::size_t warmup_rounds = 0;
  double final_regret = 0.0;
  std::optional<DmsoDiagnostics> diagnostics;
};

/// Warm-up order: N0 samples per policy round-robin. With a decoy, the decoy
/// policy's last N0/2 samples are moved to the end of the warm-up.
std::vector<std::size_t> dmso_warmup_order(std::size_t policies, std::size_t n0,
                                           std::optional<std::size_t> decoy_policy);

/// Warm-up followed by MLE-Greedy through round `horizon` (> |Pi| N0).
DmsoEpisode run_dmso_episode(const ModelClass& cls, std::size_t horizon, std::size_t n0,
                             RngStream& rng, const DmsoOptions& options = {});

/// Draws only the warm-up prefix H_warm (decoy policy's last N0/2 samples
/// excluded) and reports whether E1 held.
bool sample_warmup_e1(const ModelClass& cls, std::size_t n0, std::size_t decoy, bool ghost,
                      RngStream& rng);

/// N0 = c0 (ln B / gap)^2 ln|M|, rounded up, at least 1.
std::size_t default_n0(const ModelClass& cls, double c0 = 4.0);

/// Bernoulli embedding of a finite contextual instance: reward in {0,1} with
/// mean f(x, pi(x)), observation = context label. Policies are all maps from
/// contexts to arms; refuses when there are more than `max_policies`.
ModelClass embed_contextual(const ProblemInstance& instance, std::size_t max_policies = 4096);

}  // namespace greedytrap
