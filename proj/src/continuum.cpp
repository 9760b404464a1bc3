#include "greedytrap/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace greedytrap {

namespace {

double l2_distance(const RewardTable& f, const RewardTable& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    const double d = f.values()[i] - g.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void require_single_context(const RewardTable& f) {
  if (f.contexts() != 1) throw ShapeError("continuum classes are defined over single-context tables");
}

double table_max(const RewardTable& f) {
  return *std::max_element(f.values().begin(), f.values().end());
}

// Closest point of the ball-free problem: min (v - c_a)^2 + sum_b max(0, c_b - v)^2.
double push_value(const RewardTable& center, std::size_t a) {
  std::vector<double> others;
  for (std::size_t b = 0; b < center.arms(); ++b)
    if (b != a) others.push_back(center(0, b));
  std::sort(others.rbegin(), others.rend());
  double sum = center(0, a);
  for (std::size_t m = 0; m <= others.size(); ++m) {
    if (m > 0) sum += others[m - 1];
    const double v = sum / static_cast<double>(m + 1);
    const bool above_next = m == others.size() || others[m] <= v;
    const bool below_last = m == 0 || others[m - 1] > v;
    if (above_next && below_last) return v;
  }
  return sum / static_cast<double>(others.size() + 1);
}

}  // namespace

ParametricClass l2_ball(RewardTable center, double radius) {
  require_single_context(center);
  if (!(radius > 0.0)) throw PreconditionError("ball radius must be positive");
  ParametricClass cls;
  cls.description = "L2 ball";
  cls.arms = center.arms();
  cls.ball_center = center;
  cls.ball_radius = radius;
  cls.contains = [center, radius](const RewardTable& f) {
    return f.same_shape(center) && l2_distance(f, center) <= radius;
  };
  cls.interior = [center, radius](const RewardTable& f, double eps) {
    return f.same_shape(center) && l2_distance(f, center) <= radius - eps;
  };
  cls.violation_search = [center, radius](const RewardTable& truth, double eps) -> std::optional<EpsViolation> {
    const double best = table_max(truth);
    const std::size_t K = truth.arms();
    for (std::size_t a = 0; a < K; ++a) {
      if (!(truth(0, a) < best)) continue;
      const double v = std::clamp(push_value(center, a), truth(0, a) - eps, truth(0, a) + eps);
      std::vector<double> f(K);
      double g = 0.0;
      for (std::size_t b = 0; b < K; ++b) {
        f[b] = b == a ? v : std::min(center(0, b), v);
        const double d = f[b] - center(0, b);
        g += d * d;
      }
      if (g <= radius * radius) return EpsViolation{a, RewardTable::mab(std::move(f))};
    }
    return std::nullopt;
  };
  cls.projection = [center, radius](const History& h) { return project_onto_ball(h, center, radius); };
  return cls;
}

ParametricClass finite_class_view(FunctionClass members) {
  ParametricClass cls;
  cls.description = "finite class";
  cls.arms = members.arms();
  require_single_context(members[0]);
  cls.contains = [members](const RewardTable& f) { return members.index_of(f).has_value(); };
  // a finite set contains no eps-ball for eps > 0
  cls.interior = [members](const RewardTable& f, double eps) {
    return eps == 0.0 && members.index_of(f).has_value();
  };
  cls.violation_search = [members](const RewardTable& truth, double eps) -> std::optional<EpsViolation> {
    const double best = table_max(truth);
    for (std::size_t a = 0; a < truth.arms(); ++a) {
      if (!(truth(0, a) < best)) continue;
      for (const RewardTable& f : members.members())
        if (std::abs(f(0, a) - truth(0, a)) <= eps && f(0, a) == table_max(f)) return EpsViolation{a, f};
    }
    return std::nullopt;
  };
  return cls;
}

ParametricClass lipschitz_cone(std::vector<std::vector<double>> metric) {
  ParametricClass cls;
  cls.description = "Lipschitz cone";
  cls.arms = metric.size();
  cls.contains = [metric](const RewardTable& f) {
    if (f.contexts() != 1 || f.arms() != metric.size()) return false;
    for (std::size_t a = 0; a < metric.size(); ++a)
      for (std::size_t b = 0; b < metric.size(); ++b)
        if (std::abs(f(0, a) - f(0, b)) > metric[a][b]) return false;
    return true;
  };
  return cls;
}

bool is_interior(const RewardTable& f, const ParametricClass& cls, double eps) {
  if (!cls.interior) throw UnsupportedError(cls.description + ": interior test is not supported");
  if (!(eps >= 0.0)) throw PreconditionError("eps must be >= 0");
  return cls.interior(f, eps);
}

EpsSelfIdReport is_eps_self_identifiable(const RewardTable& truth, const ParametricClass& cls, double eps) {
  if (!cls.violation_search) throw UnsupportedError(cls.description + ": violation search is not supported");
  if (!(eps >= 0.0)) throw PreconditionError("eps must be >= 0");
  require_single_context(truth);
  EpsSelfIdReport report;
  if (auto v = cls.violation_search(truth, eps)) {
    report.holds = false;
    report.witness = std::move(v);
  }
  return report;
}

RewardTable empirical_table(const History& history) {
  if (history.contexts() != 1) throw ShapeError("continuum histories have a single context");
  std::vector<double> v(history.arms());
  for (std::size_t a = 0; a < v.size(); ++a) {
    const auto m = history.mean(0, a);
    if (!m) throw PreconditionError("empirical fit needs a sample of every arm");
    v[a] = *m;
  }
  return RewardTable::mab(std::move(v));
}

std::optional<RewardTable> empirical_fit_oracle(const History& history, const ParametricClass& cls) {
  RewardTable emp = empirical_table(history);
  if (cls.contains(emp)) return emp;
  return std::nullopt;
}

RewardTable project_onto_ball(const History& history, const RewardTable& center, double radius) {
  const RewardTable r = empirical_table(history);
  if (l2_distance(r, center) <= radius) return r;
  const std::size_t K = r.arms();
  auto at = [&](double lambda) {
    std::vector<double> f(K);
    for (std::size_t a = 0; a < K; ++a) {
      const double w = static_cast<double>(history.count(0, a));
      f[a] = (w * r(0, a) + lambda * center(0, a)) / (w + lambda);
    }
    return RewardTable::mab(std::move(f));
  };
  double lo = 0.0, hi = 1.0;
  while (l2_distance(at(hi), center) > radius) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (l2_distance(at(mid), center) > radius ? lo : hi) = mid;
  }
  return at(hi);
}

double inf_event_radius(double eps, std::size_t arms) {
  return eps / (4.0 * std::sqrt(static_cast<double>(arms)));
}

std::string verify_continuum_decoy(const RewardTable& truth, const ContinuumDecoy& decoy,
                                   const ParametricClass& cls, double eps) {
  const RewardTable& f = decoy.decoy;
  if (!f.same_shape(truth) || f.contexts() != 1) return "decoy shape differs from f*";
  if (decoy.arm >= f.arms()) return "decoy arm out of range";
  if (!cls.contains(f)) return "decoy is not in the class";
  if (!is_interior(f, cls, eps)) return "decoy is not in the eps-interior";
  const double top = table_max(f);
  for (std::size_t a = 0; a < f.arms(); ++a)
    if (a != decoy.arm && !(f(0, a) < top)) return "decoy arm is not the unique best arm of the decoy";
  if (f(0, decoy.arm) != top) return "decoy arm is not optimal for the decoy";
  if (f(0, decoy.arm) != truth(0, decoy.arm)) return "decoy disagrees with f* on the decoy arm";
  if (!(truth(0, decoy.arm) < table_max(truth))) return "decoy arm is optimal for f*";
  return {};
}

bool check_event_e1_inf(const History& warmup, const ContinuumDecoy& decoy, double eps) {
  const std::size_t K = decoy.decoy.arms();
  const double r = inf_event_radius(eps, K);
  const double shift = 2.0 * r;  // eps / (2 sqrt K)
  bool held = true;
  for (std::size_t a = 0; a < K; ++a) {
    if (a == decoy.arm) continue;
    const auto m = warmup.mean(0, a);
    if (!m) throw PreconditionError("E1 check needs a warm-up sample of every off-decoy arm");
    if (!(std::abs(*m - (decoy.decoy(0, a) - shift)) < r)) held = false;
  }
  return held;
}

std::size_t check_event_e2_inf(const History& history, const ContinuumDecoy& decoy, double eps) {
  const double r = inf_event_radius(eps, decoy.decoy.arms());
  const double target = decoy.decoy(0, decoy.arm);
  const std::size_t T0 = history.warmup_rounds();
  const std::size_t failed = T0 == 0 ? 0 : T0 - 1;
  double sum = 0.0;
  std::size_t n = 0;
  const auto& rounds = history.rounds();
  for (std::size_t s = 0; s < T0; ++s)
    if (rounds[s].arm == decoy.arm) {
      sum += rounds[s].reward;
      ++n;
    }
  if (n == 0 || !(std::abs(sum / static_cast<double>(n) - target) <= r)) return failed;
  for (std::size_t s = T0; s < rounds.size(); ++s) {
    if (rounds[s].arm != decoy.arm) continue;
    sum += rounds[s].reward;
    ++n;
    if (!(std::abs(sum / static_cast<double>(n) - target) <= r)) return s;
  }
  return rounds.size();
}

ContinuumEpisode run_continuum_episode(const ContinuumInstance& inst, std::size_t horizon, RngStream& rng,
                                       const ContinuumOptions& options) {
  const RewardTable& truth = inst.truth;
  require_single_context(truth);
  const std::size_t K = truth.arms();
  if (!inst.cls.contains(truth)) throw PreconditionError("f* is not a member of the class");
  if (inst.warmup_per_arm == 0) throw PreconditionError("the empirical-fit oracle needs warm-up samples of every arm");
  const std::size_t T0 = K * inst.warmup_per_arm;
  if (horizon <= T0) throw PreconditionError("horizon must exceed the warm-up length");
  if (options.force_e1 && !inst.decoy) throw PreconditionError("force_e1 requires a decoy");

  const double best = table_max(truth);
  const double r = inst.decoy ? inf_event_radius(inst.eps, K) : 0.0;
  ContinuumEpisode ep;
  ep.warmup_rounds = T0;
  History h(1, K);
  double regret = 0.0;
  for (std::size_t p = 0; p < inst.warmup_per_arm; ++p)
    for (std::size_t a = 0; a < K; ++a) {
      const double z = rng.normal();
      double reward = inst.sigma == 0.0 ? truth(0, a) : truth(0, a) + inst.sigma * z;
      if (options.force_e1 && a != inst.decoy->arm) reward = inst.decoy->decoy(0, a) - 2.0 * r;
      h.record({0}, {a}, reward);
      regret += best - truth(0, a);
      if (options.keep_regret_curve) ep.cumulative_regret.push_back(regret);
    }
  h.close_warmup();

  ContinuumDiagnostics diag;
  bool e2_alive = false;
  std::size_t darm = 0;
  double target = 0.0;
  if (inst.decoy) {
    darm = inst.decoy->arm;
    target = inst.decoy->decoy(0, darm);
    diag.e1_held = check_event_e1_inf(h, *inst.decoy, inst.eps);
    e2_alive = std::abs(*h.mean(0, darm) - target) <= r;
  }

  std::optional<RewardTable> previous;
  for (std::size_t t = T0 + 1; t <= horizon; ++t) {
    auto fit = empirical_fit_oracle(h, inst.cls);
    const bool in_class = fit.has_value();
    if (!fit) {
      if (!inst.cls.projection)
        throw PreconditionError("empirical table left the class and no projection is available");
      fit = inst.cls.projection(h);
      ++ep.projection_rounds;
    }
    if (previous && !(*previous == *fit)) ++ep.fit_changes;
    previous = fit;

    const double top = table_max(*fit);
    std::vector<std::size_t> tied;
    for (std::size_t a = 0; a < K; ++a)
      if ((*fit)(0, a) == top) tied.push_back(a);
    if (tied.size() > 1) throw TieError(0, std::move(tied), t);
    const std::size_t arm = tied.front();

    if (inst.decoy && diag.e1_held && e2_alive) {
      const RewardTable emp = empirical_table(h);
      bool chain = in_class && emp(0, darm) >= target - r;
      for (std::size_t a = 0; a < K && chain; ++a)
        if (a != darm && !(target - r > emp(0, a))) chain = false;
      if (!chain || arm != darm) ++diag.chain_violations;
      if (l2_distance(emp, inst.decoy->decoy) > 0.75 * inst.eps) ++diag.distance_violations;
    }

    const double z = rng.normal();
    const double reward = inst.sigma == 0.0 ? truth(0, arm) : truth(0, arm) + inst.sigma * z;
    h.record({0}, {arm}, reward);
    regret += best - truth(0, arm);
    if (truth(0, arm) < best) ++ep.suboptimal_pulls;
    if (options.keep_regret_curve) ep.cumulative_regret.push_back(regret);
    if (inst.decoy) {
      if (arm != darm && !diag.first_deviation_round) diag.first_deviation_round = t;
      if (e2_alive && arm == darm) e2_alive = std::abs(*h.mean(0, darm) - target) <= r;
    }
  }
  ep.final_regret = regret;
  if (inst.decoy) {
    diag.e2_held_through = check_event_e2_inf(h, *inst.decoy, inst.eps);
    diag.stuck_on_decoy = !diag.first_deviation_round.has_value();
    ep.diagnostics = diag;
  }
  ep.history = std::move(h);
  return ep;
}

}  // namespace greedytrap
