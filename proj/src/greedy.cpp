#include "greedytrap/greedy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace greedytrap {

TieMode TieMode::randomized(double q0) {
  if (!(q0 > 0.0 && q0 <= 1.0)) throw PreconditionError("q0 must lie in (0, 1]");
  return {Kind::Randomized, q0};
}

GreedyState::GreedyState(const ProblemInstance& inst, History h, TieMode mode)
    : instance(&inst), history(std::move(h)), tie_mode(mode), round(history.size()) {}

double mse(const History& history, const RewardTable& f) {
  if (history.contexts() != f.contexts() || history.arms() != f.arms())
    throw ShapeError("mse: history and table shapes differ");
  double total = 0.0;
  for (std::size_t x = 0; x < f.contexts(); ++x)
    for (std::size_t a = 0; a < f.arms(); ++a) {
      const std::size_t n = history.count(x, a);
      if (n == 0) continue;
      const double d = history.sum(x, a) / static_cast<double>(n) - f(x, a);
      total += static_cast<double>(n) * d * d;
    }
  return total;
}

OracleResult regression_oracle(const History& history, const FunctionClass& cls) {
  OracleResult best{0, mse(history, cls[0])};
  for (std::size_t m = 1; m < cls.size(); ++m) {
    const double v = mse(history, cls[m]);
    if (v < best.mse) best = {m, v};
  }
  return best;
}

StepResult greedy_step(GreedyState& state, ContextIndex context, RngStream& rng) {
  const FunctionClass& cls = state.instance->function_class();
  const OracleResult fit = regression_oracle(state.history, cls);
  const RewardTable& f = cls[fit.member];
  state.round += 1;

  auto row = f.row(context.value);
  const double top = *std::max_element(row.begin(), row.end());
  std::vector<std::size_t> tied;
  for (std::size_t a = 0; a < row.size(); ++a)
    if (row[a] == top) tied.push_back(a);

  if (tied.size() == 1) return {{tied.front()}, fit.member};
  if (state.tie_mode.kind == TieMode::Kind::Strict)
    throw TieError(context.value, std::move(tied), state.round);
  if (1.0 / static_cast<double>(tied.size()) < state.tie_mode.q0)
    throw PreconditionError("uniform tie-breaking cannot give every tied arm probability q0");
  return {{tied[rng.index(tied.size())]}, fit.member};
}

History run_warmup(const ProblemInstance& instance, RngStream& rng, const DecoyCertificate* plant) {
  const std::size_t X = instance.contexts();
  const std::size_t K = instance.arms();
  History h(X, K);
  std::size_t passes = 0;
  for (const auto& row : instance.warmup())
    for (std::size_t c : row) passes = std::max(passes, c);

  for (std::size_t p = 0; p < passes; ++p)
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t a = 0; a < K; ++a) {
        if (instance.warmup()[x][a] <= p) continue;
        double r = sample_reward(instance, {x}, {a}, rng);
        if (plant) {
          const auto& opt = plant->optimal_sets[x];
          if (std::find(opt.begin(), opt.end(), a) == opt.end()) r = plant->decoy(x, a);
        }
        h.record({x}, {a}, r);
      }
  h.close_warmup();
  return h;
}

namespace {

double row_max(const RewardTable& f, std::size_t x) {
  auto row = f.row(x);
  return *std::max_element(row.begin(), row.end());
}

// Expected f*-value of a member's greedy policy with uniform tie-breaking.
double expected_greedy_value(const RewardTable& member, const RewardTable& truth,
                             std::span<const double> probs) {
  const auto sets = optimal_arm_sets(member);
  double v = 0.0;
  for (std::size_t x = 0; x < sets.size(); ++x) {
    double s = 0.0;
    for (std::size_t a : sets[x]) s += truth(x, a);
    v += probs[x] * s / static_cast<double>(sets[x].size());
  }
  return v;
}

bool sets_within(const std::vector<std::vector<std::size_t>>& inner,
                 const std::vector<std::vector<std::size_t>>& outer) {
  for (std::size_t x = 0; x < inner.size(); ++x)
    for (std::size_t a : inner[x])
      if (std::find(outer[x].begin(), outer[x].end(), a) == outer[x].end()) return false;
  return true;
}

}  // namespace

EpisodeResult run_episode(const ProblemInstance& instance, std::size_t horizon, TieMode tie_mode,
                          RngStream& rng, const EpisodeOptions& options) {
  const std::size_t T0 = instance.warmup_total();
  if (horizon <= T0) throw PreconditionError("horizon must exceed the warm-up length");
  if (options.force_e1 && !options.decoy) throw PreconditionError("force_e1 requires a decoy certificate");

  const FunctionClass& cls = instance.function_class();
  const RewardTable& truth = instance.truth();
  const auto& probs = instance.context_probs();
  const double best = optimal_value(truth, probs);

  std::vector<double> member_value(cls.size());
  std::vector<char> on_decoy(cls.size(), 0);
  for (std::size_t m = 0; m < cls.size(); ++m) {
    member_value[m] = expected_greedy_value(cls[m], truth, probs);
    if (options.decoy) on_decoy[m] = sets_within(optimal_arm_sets(cls[m]), options.decoy->optimal_sets);
  }

  EpisodeResult result;
  result.warmup_rounds = T0;
  History warm = run_warmup(instance, rng, options.force_e1 ? options.decoy : nullptr);

  double regret = 0.0;
  if (options.keep_regret_curve) result.cumulative_regret.reserve(horizon);
  for (const Round& r : warm.rounds()) {
    regret += row_max(truth, r.context) - truth(r.context, r.arm);
    if (options.keep_regret_curve) result.cumulative_regret.push_back(regret);
  }
  result.warmup_regret = regret;

  EventDiagnostics diag;
  if (options.decoy) diag.e1_held = check_event_e1(warm, *options.decoy);

  GreedyState state(instance, std::move(warm), tie_mode);
  result.chosen_member.reserve(horizon - T0);
  for (std::size_t t = T0 + 1; t <= horizon; ++t) {
    const ContextIndex x = sample_context(instance, rng);
    const StepResult step = greedy_step(state, x, rng);
    const double reward = sample_reward(instance, x, step.arm, rng);
    state.history.record(x, step.arm, reward);
    result.chosen_member.push_back(step.member);
    regret += best - member_value[step.member];
    if (truth(x.value, step.arm.value) < row_max(truth, x.value)) ++result.suboptimal_pulls;
    if (options.keep_regret_curve) result.cumulative_regret.push_back(regret);
    if (options.decoy && !diag.first_deviation_round && !on_decoy[step.member])
      diag.first_deviation_round = t;
  }
  result.final_regret = regret;
  result.history = std::move(state.history);

  if (options.decoy) {
    diag.e2_held_through = check_event_e2(result.history, *options.decoy);
    diag.stuck_on_decoy = !diag.first_deviation_round.has_value();
    result.diagnostics = diag;
  }
  return result;
}

bool check_event_e1(const History& warmup, const DecoyCertificate& decoy) {
  const double half_gap = decoy.decoy_gap / 2.0;
  bool held = true;
  for (std::size_t x = 0; x < warmup.contexts(); ++x)
    for (std::size_t a = 0; a < warmup.arms(); ++a) {
      const auto& opt = decoy.optimal_sets[x];
      if (std::find(opt.begin(), opt.end(), a) != opt.end()) continue;
      const auto m = warmup.mean(x, a);
      if (!m) throw PreconditionError("E1 check needs a warm-up sample for every off-decoy pair");
      if (!(std::abs(*m - decoy.decoy(x, a)) < half_gap)) held = false;
    }
  return held;
}

std::size_t check_event_e2(const History& history, const DecoyCertificate& decoy) {
  const std::size_t X = history.contexts();
  const std::size_t K = history.arms();
  const std::size_t T0 = history.warmup_rounds();
  const double half_gap = decoy.decoy_gap / 2.0;
  const std::size_t failed = T0 == 0 ? 0 : T0 - 1;

  std::vector<char> tracked(X * K, 0);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a : decoy.optimal_sets[x]) tracked[x * K + a] = 1;

  std::vector<double> sums(X * K, 0.0);
  std::vector<std::size_t> counts(X * K, 0);
  const auto& rounds = history.rounds();
  for (std::size_t s = 0; s < T0; ++s) {
    const std::size_t i = rounds[s].context * K + rounds[s].arm;
    sums[i] += rounds[s].reward;
    counts[i] += 1;
  }
  auto within = [&](std::size_t i) {
    if (counts[i] == 0) return false;
    const double m = sums[i] / static_cast<double>(counts[i]);
    return std::abs(m - decoy.decoy(i / K, i % K)) <= half_gap;
  };
  for (std::size_t i = 0; i < X * K; ++i)
    if (tracked[i] && !within(i)) return failed;

  for (std::size_t s = T0; s < rounds.size(); ++s) {
    const std::size_t i = rounds[s].context * K + rounds[s].arm;
    sums[i] += rounds[s].reward;
    counts[i] += 1;
    if (tracked[i] && !within(i)) return s;  // held through round s (1-based s)
  }
  return rounds.size();
}

double beta(std::size_t n, std::size_t arms, std::size_t contexts, double delta) {
  if (n == 0) throw PreconditionError("beta needs n >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("beta needs delta in (0, 1)");
  const double nn = static_cast<double>(n);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double arg = pi2 * static_cast<double>(contexts * arms) * nn * nn / (3.0 * delta);
  return std::sqrt((2.0 / nn) * std::log(arg));
}

double e2_sigma(double radius, std::size_t pairs, double budget) {
  if (!(radius > 0.0)) throw PreconditionError("e2_sigma needs a positive radius");
  if (pairs == 0 || !(budget > 0.0 && budget < 1.0)) throw PreconditionError("e2_sigma: bad pairs/budget");
  const double m2 = 2.0 * static_cast<double>(pairs);
  const double u = budget / (m2 + budget);  // m2 u / (1 - u) = budget
  return radius / std::sqrt(2.0 * std::log(1.0 / u));
}

}  // namespace greedytrap
