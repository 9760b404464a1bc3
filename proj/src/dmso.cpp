#include "greedytrap/dmso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace greedytrap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

OutcomeSpace::OutcomeSpace(std::vector<double> rewards_, std::vector<std::string> observations_)
    : rewards(std::move(rewards_)), observations(std::move(observations_)) {
  if (rewards.empty() || observations.empty())
    throw PreconditionError("outcome space needs at least one reward and one observation");
  if (std::set<double>(rewards.begin(), rewards.end()).size() != rewards.size())
    throw PreconditionError("duplicate reward values in outcome space");
  if (std::set<std::string>(observations.begin(), observations.end()).size() != observations.size())
    throw PreconditionError("duplicate observation labels in outcome space");
}

ModelClass::ModelClass(OutcomeSpace space, std::vector<Model> members, std::size_t true_index,
                       std::vector<std::string> policy_names)
    : space_(std::move(space)),
      members_(std::move(members)),
      true_index_(true_index),
      policy_names_(std::move(policy_names)) {
  if (members_.empty()) throw PreconditionError("model class must be nonempty");
  if (true_index_ >= members_.size()) throw PreconditionError("true_index outside the model class");
  const std::size_t P = members_.front().policies();
  const std::size_t O = space_.size();
  if (P == 0) throw ShapeError("models need at least one policy");
  if (policy_names_.empty())
    for (std::size_t p = 0; p < P; ++p) policy_names_.push_back("pi" + std::to_string(p));
  if (policy_names_.size() != P) throw ShapeError("policy_names length differs from policy count");

  for (std::size_t m = 0; m < members_.size(); ++m) {
    const Model& M = members_[m];
    if (M.policies() != P) throw ShapeError("all models must cover the same policies");
    for (std::size_t p = 0; p < P; ++p) {
      if (M.dist[p].size() != O) throw ShapeError("outcome table size differs from the outcome space");
      double total = 0.0;
      for (double v : M.dist[p]) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("outcome probabilities must be finite and >= 0");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "model " << m << " policy " << p << " probabilities sum to " << total;
        throw PreconditionError(os.str());
      }
    }
    for (std::size_t j = 0; j < m; ++j)
      if (members_[j] == M) {
        std::ostringstream os;
        os << "duplicate models " << j << " and " << m;
        throw PreconditionError(os.str());
      }
  }

  double b = 1.0;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t o = 0; o < O; ++o) {
      double lo = kInf, hi = 0.0;
      bool any_zero = false, any_pos = false;
      for (const Model& M : members_) {
        const double v = M.dist[p][o];
        if (v == 0.0) {
          any_zero = true;
        } else {
          any_pos = true;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      if (any_zero && any_pos) b = kInf;  // support mismatch: unbounded likelihood ratio
      if (any_pos) b = std::max(b, hi / lo);
    }
  bound_b_ = b;
  log_b_ = std::log(b);
}

double ModelClass::expected_reward(std::size_t member, std::size_t policy) const {
  const auto& d = members_[member].dist[policy];
  double v = 0.0;
  for (std::size_t o = 0; o < d.size(); ++o) v += d[o] * space_.reward_of(o);
  return v;
}

LikelihoodState LikelihoodState::initial(const ModelClass& cls) {
  return {std::vector<double>(cls.size(), 0.0), 0};
}

LikelihoodState log_likelihood_update(LikelihoodState state, const ModelClass& cls,
                                      std::size_t policy, std::size_t outcome) {
  if (policy >= cls.policies()) throw ShapeError("policy index outside the model class");
  if (outcome >= cls.space().size()) throw ShapeError("outcome outside the outcome space");
  bool any = false;
  for (const Model& M : cls.members()) any = any || M.dist[policy][outcome] > 0.0;
  if (!any) throw PreconditionError("outcome has zero mass under every model");
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const double v = cls[m].dist[policy][outcome];
    state.log_likelihood[m] += v > 0.0 ? std::log(v) : -kInf;
  }
  state.round += 1;
  return state;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: size mismatch");
  double v = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInf;
    v += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(v, 0.0);
}

double renyi_inf(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("renyi_inf: size mismatch");
  double v = -kInf;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInf;
    v = std::max(v, std::log(p[i] / q[i]));
  }
  return v;
}

double model_gap(const ModelClass& cls, std::size_t member) {
  const Model& M = cls[member];
  double gap = kInf;
  for (std::size_t j = 0; j < cls.size(); ++j) {
    if (j == member) continue;
    for (std::size_t p = 0; p < cls.policies(); ++p) {
      if (M.dist[p] == cls[j].dist[p]) continue;
      gap = std::min(gap, kl_divergence(M.dist[p], cls[j].dist[p]));
    }
  }
  return gap;
}

double decoy_renyi_constant(const ModelClass& cls, std::size_t decoy) {
  double c = 0.0;
  for (std::size_t p = 0; p < cls.policies(); ++p)
    c = std::max(c, renyi_inf(cls[decoy].dist[p], cls.truth().dist[p]));
  return c;
}

double phi_expected(const Model& member, const Model& reference, std::size_t policy) {
  if (policy >= member.policies() || policy >= reference.policies())
    throw ShapeError("phi_expected: policy index out of range");
  if (member.dist[policy] == reference.dist[policy]) return 0.0;
  return kl_divergence(reference.dist[policy], member.dist[policy]);
}

std::size_t model_optimal_policy(const ModelClass& cls, std::size_t member) {
  std::vector<double> v(cls.policies());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = cls.expected_reward(member, p);
  const double top = *std::max_element(v.begin(), v.end());
  std::vector<std::size_t> tied;
  for (std::size_t p = 0; p < v.size(); ++p)
    if (v[p] == top) tied.push_back(p);
  if (tied.size() > 1) throw TieError(0, std::move(tied));
  return tied.front();
}

MleStep mle_greedy_step(const LikelihoodState& state, const ModelClass& cls) {
  std::size_t best = 0;
  for (std::size_t m = 1; m < cls.size(); ++m)
    if (state.log_likelihood[m] > state.log_likelihood[best]) best = m;
  return {model_optimal_policy(cls, best), best};
}

std::vector<ModelDecoy> find_model_decoys(const ModelClass& cls) {
  const std::size_t star = model_optimal_policy(cls, cls.true_index());
  const double best = cls.expected_reward(cls.true_index(), star);
  std::vector<ModelDecoy> out;
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const std::size_t p = model_optimal_policy(cls, m);
    if (cls[m].dist[p] != cls.truth().dist[p]) continue;
    const double v = cls.expected_reward(cls.true_index(), p);
    if (!(v < best)) continue;
    out.push_back({m, p, best - v});
  }
  return out;
}

bool is_model_self_identifiable(const ModelClass& cls) {
  const std::size_t star = model_optimal_policy(cls, cls.true_index());
  const double best = cls.expected_reward(cls.true_index(), star);
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const std::size_t p = model_optimal_policy(cls, m);
    if (cls[m].dist[p] == cls.truth().dist[p] && cls.expected_reward(cls.true_index(), p) < best)
      return false;
  }
  return true;
}

std::vector<std::size_t> dmso_warmup_order(std::size_t policies, std::size_t n0,
                                           std::optional<std::size_t> decoy_policy) {
  const std::size_t tail = decoy_policy ? n0 / 2 : 0;
  std::vector<std::size_t> order;
  order.reserve(policies * n0);
  for (std::size_t k = 0; k < n0; ++k)
    for (std::size_t p = 0; p < policies; ++p) {
      if (decoy_policy && p == *decoy_policy && k >= n0 - tail) continue;
      order.push_back(p);
    }
  for (std::size_t k = 0; k < tail; ++k) order.push_back(*decoy_policy);
  return order;
}

namespace {

std::size_t checked_decoy_policy(const ModelClass& cls, std::size_t decoy) {
  if (decoy >= cls.size()) throw PreconditionError("decoy model index out of range");
  for (const auto& d : find_model_decoys(cls))
    if (d.member == decoy) return d.policy;
  throw PreconditionError("designated model is not a decoy of the true model");
}

bool e1_from(const LikelihoodState& s, std::size_t decoy) {
  for (std::size_t m = 0; m < s.log_likelihood.size(); ++m)
    if (m != decoy && !(s.log_likelihood[decoy] > s.log_likelihood[m])) return false;
  return true;
}

}  // namespace

DmsoEpisode run_dmso_episode(const ModelClass& cls, std::size_t horizon, std::size_t n0,
                             RngStream& rng, const DmsoOptions& options) {
  if (n0 == 0) throw PreconditionError("N0 must be at least 1");
  const std::size_t P = cls.policies();
  const std::size_t T0 = P * n0;
  if (horizon <= T0) throw PreconditionError("horizon must exceed the warm-up length");
  if (options.ghost && !options.decoy) throw PreconditionError("ghost mode requires a decoy model");

  std::optional<std::size_t> decoy_policy;
  if (options.decoy) decoy_policy = checked_decoy_policy(cls, *options.decoy);
  const auto order = dmso_warmup_order(P, n0, decoy_policy);
  const std::size_t warm_prefix = T0 - (decoy_policy ? n0 / 2 : 0);

  const std::size_t star = model_optimal_policy(cls, cls.true_index());
  const double best = cls.expected_reward(cls.true_index(), star);
  std::vector<double> value(P);
  for (std::size_t p = 0; p < P; ++p) value[p] = cls.expected_reward(cls.true_index(), p);

  DmsoEpisode ep;
  ep.warmup_rounds = T0;
  ep.policies.reserve(horizon);
  ep.outcomes.reserve(horizon);
  ep.cumulative_regret.reserve(horizon);

  LikelihoodState state = LikelihoodState::initial(cls);
  DmsoDiagnostics diag;
  std::vector<double> psi(cls.size(), 0.0);
  bool e2_alive = true;
  double regret = 0.0;

  auto add_psi = [&](std::size_t policy, std::size_t outcome) {
    const double dd = std::log(cls[*options.decoy].dist[policy][outcome]);
    for (std::size_t m = 0; m < cls.size(); ++m) {
      if (m == *options.decoy) continue;
      const double v = cls[m].dist[policy][outcome];
      psi[m] += v > 0.0 ? dd - std::log(v) : kInf;
    }
  };
  auto e2_ok = [&] {
    for (std::size_t m = 0; m < cls.size(); ++m)
      if (m != *options.decoy && !(psi[m] >= 0.0)) return false;
    return true;
  };

  const std::size_t source = options.ghost ? *options.decoy : cls.true_index();
  for (std::size_t i = 0; i < T0; ++i) {
    const std::size_t p = order[i];
    const std::size_t o = rng.discrete(cls[source].dist[p]);
    state = log_likelihood_update(std::move(state), cls, p, o);
    ep.policies.push_back(p);
    ep.outcomes.push_back(o);
    regret += best - value[p];
    ep.cumulative_regret.push_back(regret);
    if (options.decoy) {
      if (i + 1 == warm_prefix) diag.e1_held = e1_from(state, *options.decoy);
      if (i >= warm_prefix) add_psi(p, o);
    }
  }
  if (options.decoy && warm_prefix == 0) diag.e1_held = e1_from(LikelihoodState::initial(cls), *options.decoy);
  if (options.decoy && !e2_ok()) {
    e2_alive = false;
    diag.e2_held_through = T0 - 1;
  }

  for (std::size_t t = T0 + 1; t <= horizon; ++t) {
    const MleStep step = mle_greedy_step(state, cls);
    const std::size_t o = rng.discrete(cls.truth().dist[step.policy]);
    state = log_likelihood_update(std::move(state), cls, step.policy, o);
    ep.policies.push_back(step.policy);
    ep.outcomes.push_back(o);
    ep.chosen_model.push_back(step.model);
    regret += best - value[step.policy];
    ep.cumulative_regret.push_back(regret);
    if (options.decoy) {
      if (step.policy != *decoy_policy && !diag.first_deviation_round) diag.first_deviation_round = t;
      if (e2_alive && step.policy == *decoy_policy) {
        add_psi(step.policy, o);
        if (!e2_ok()) {
          e2_alive = false;
          diag.e2_held_through = t - 1;
        }
      }
    }
  }
  ep.final_regret = regret;
  if (options.decoy) {
    if (e2_alive) diag.e2_held_through = horizon;
    diag.stuck_on_decoy = !diag.first_deviation_round.has_value();
    ep.diagnostics = diag;
  }
  return ep;
}

bool sample_warmup_e1(const ModelClass& cls, std::size_t n0, std::size_t decoy, bool ghost,
                      RngStream& rng) {
  const std::size_t decoy_policy = checked_decoy_policy(cls, decoy);
  const auto order = dmso_warmup_order(cls.policies(), n0, decoy_policy);
  const std::size_t prefix = order.size() - n0 / 2;
  const Model& source = ghost ? cls[decoy] : cls.truth();
  LikelihoodState state = LikelihoodState::initial(cls);
  for (std::size_t i = 0; i < prefix; ++i) {
    const std::size_t o = rng.discrete(source.dist[order[i]]);
    state = log_likelihood_update(std::move(state), cls, order[i], o);
  }
  return e1_from(state, decoy);
}

std::size_t default_n0(const ModelClass& cls, double c0) {
  const double gap = model_gap(cls);
  if (!std::isfinite(cls.log_b())) throw PreconditionError("default N0 needs a finite likelihood-ratio bound B");
  if (!std::isfinite(gap) || cls.log_b() == 0.0 || cls.size() < 2) return 1;
  const double r = cls.log_b() / gap;
  const double n = std::ceil(c0 * r * r * std::log(static_cast<double>(cls.size())));
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

ModelClass embed_contextual(const ProblemInstance& instance, std::size_t max_policies) {
  const std::size_t X = instance.contexts();
  const std::size_t K = instance.arms();
  double count = 1.0;
  for (std::size_t x = 0; x < X; ++x) count *= static_cast<double>(K);
  if (count > static_cast<double>(max_policies))
    throw PreconditionError("too many deterministic policies to enumerate for the embedding");
  const std::size_t P = static_cast<std::size_t>(count);

  std::vector<std::string> obs;
  for (std::size_t x = 0; x < X; ++x) obs.push_back("x" + std::to_string(x));
  OutcomeSpace space({0.0, 1.0}, obs);

  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> maps(P, std::vector<std::size_t>(X));
  for (std::size_t p = 0; p < P; ++p) {
    std::size_t code = p;
    std::string name = "(";
    for (std::size_t x = 0; x < X; ++x) {
      maps[p][x] = code % K;
      code /= K;
      name += (x ? "," : "") + std::to_string(maps[p][x]);
    }
    names.push_back(name + ")");
  }

  const auto& probs = instance.context_probs();
  std::vector<Model> models;
  for (const RewardTable& f : instance.function_class().members()) {
    Model M;
    M.dist.assign(P, std::vector<double>(space.size(), 0.0));
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t x = 0; x < X; ++x) {
        const double mu = f(x, maps[p][x]);
        if (mu < 0.0 || mu > 1.0) throw PreconditionError("Bernoulli embedding needs means in [0,1]");
        M.dist[p][space.outcome(1, x)] = probs[x] * mu;
        M.dist[p][space.outcome(0, x)] = probs[x] * (1.0 - mu);
      }
    models.push_back(std::move(M));
  }
  return ModelClass(std::move(space), std::move(models), instance.true_index(), std::move(names));
}

}  // namespace greedytrap
