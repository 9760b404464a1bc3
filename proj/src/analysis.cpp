#include "greedytrap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace greedytrap {

GapReport function_gap(const RewardTable& f, const FunctionClass& cls) {
  if (!f.same_shape(cls[0])) throw ShapeError("function_gap: table shape differs from class");
  GapReport report;
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const RewardTable& g = cls[m];
    if (g == f) continue;
    for (std::size_t x = 0; x < f.contexts(); ++x)
      for (std::size_t a = 0; a < f.arms(); ++a) {
        if (g(x, a) == f(x, a)) continue;
        const double d = std::abs(f(x, a) - g(x, a));
        if (!report.witness || d < report.gap) {
          report.gap = d;
          report.witness = GapWitness{m, x, a};
        }
      }
  }
  return report;
}

std::vector<std::vector<std::size_t>> optimal_arm_sets(const RewardTable& f) {
  std::vector<std::vector<std::size_t>> sets(f.contexts());
  for (std::size_t x = 0; x < f.contexts(); ++x) {
    auto row = f.row(x);
    const double top = *std::max_element(row.begin(), row.end());
    for (std::size_t a = 0; a < row.size(); ++a)
      if (row[a] == top) sets[x].push_back(a);
  }
  return sets;
}

Policy optimal_policy(const RewardTable& f) {
  Policy pi;
  pi.arms.reserve(f.contexts());
  auto sets = optimal_arm_sets(f);
  for (std::size_t x = 0; x < sets.size(); ++x) {
    if (sets[x].size() > 1) throw TieError(x, sets[x]);
    pi.arms.push_back(sets[x].front());
  }
  return pi;
}

double policy_value(const RewardTable& f, const Policy& policy, std::span<const double> probs) {
  double v = 0.0;
  for (std::size_t x = 0; x < f.contexts(); ++x) v += probs[x] * f(x, policy(x));
  return v;
}

double optimal_value(const RewardTable& f, std::span<const double> probs) {
  double v = 0.0;
  for (std::size_t x = 0; x < f.contexts(); ++x) {
    auto row = f.row(x);
    v += probs[x] * *std::max_element(row.begin(), row.end());
  }
  return v;
}

bool is_suboptimal(const RewardTable& f, const Policy& policy) {
  for (std::size_t x = 0; x < f.contexts(); ++x) {
    auto row = f.row(x);
    if (f(x, policy(x)) < *std::max_element(row.begin(), row.end())) return true;
  }
  return false;
}

bool agrees_on_policy(const RewardTable& f, const RewardTable& g, const Policy& policy) {
  for (std::size_t x = 0; x < f.contexts(); ++x)
    if (f(x, policy(x)) != g(x, policy(x))) return false;
  return true;
}

namespace {

double row_max(const RewardTable& f, std::size_t x) {
  auto row = f.row(x);
  return *std::max_element(row.begin(), row.end());
}

// Violation search for a single member under ties: pick, per context, an
// optimal arm of f that agrees with f*, preferring one that is suboptimal for
// f*. Returns the policy if the selection is suboptimal for f*.
std::optional<Policy> tie_violation(const RewardTable& f, const RewardTable& truth) {
  Policy pi;
  pi.arms.resize(f.contexts());
  bool any_suboptimal = false;
  const auto sets = optimal_arm_sets(f);
  for (std::size_t x = 0; x < f.contexts(); ++x) {
    const double best_true = row_max(truth, x);
    std::optional<std::size_t> agreeing;
    std::optional<std::size_t> agreeing_bad;
    for (std::size_t a : sets[x]) {
      if (f(x, a) != truth(x, a)) continue;
      if (!agreeing) agreeing = a;
      if (!agreeing_bad && truth(x, a) < best_true) agreeing_bad = a;
    }
    if (!agreeing) return std::nullopt;
    if (agreeing_bad) {
      pi.arms[x] = *agreeing_bad;
      any_suboptimal = true;
    } else {
      pi.arms[x] = *agreeing;
    }
  }
  if (!any_suboptimal) return std::nullopt;
  return pi;
}

}  // namespace

SelfIdReport is_self_identifiable(const ProblemInstance& instance, TieHandling ties) {
  const FunctionClass& cls = instance.function_class();
  const RewardTable& truth = instance.truth();
  SelfIdReport report;
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const RewardTable& f = cls[m];
    if (ties == TieHandling::Strict) {
      const Policy pi = optimal_policy(f);
      if (agrees_on_policy(f, truth, pi) && is_suboptimal(truth, pi)) {
        report.self_identifiable = false;
        report.witness = SelfIdViolation{m, pi};
        return report;
      }
    } else if (auto pi = tie_violation(f, truth)) {
      report.self_identifiable = false;
      report.witness = SelfIdViolation{m, *pi};
      return report;
    }
  }
  return report;
}

namespace {

void sort_certificates(std::vector<DecoyCertificate>& certs) {
  std::stable_sort(certs.begin(), certs.end(), [](const auto& l, const auto& r) {
    return l.decoy_gap > r.decoy_gap;
  });
}

}  // namespace

std::vector<DecoyCertificate> find_decoys(const ProblemInstance& instance) {
  const FunctionClass& cls = instance.function_class();
  const RewardTable& truth = instance.truth();
  const auto& probs = instance.context_probs();
  const double best = optimal_value(truth, probs);
  std::vector<DecoyCertificate> certs;
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const RewardTable& f = cls[m];
    const Policy pi = optimal_policy(f);
    if (!agrees_on_policy(f, truth, pi) || !is_suboptimal(truth, pi)) continue;
    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t a : pi.arms) sets.push_back({a});
    certs.push_back(DecoyCertificate{m, f, pi, std::move(sets), function_gap(f, cls).gap,
                                     best - policy_value(truth, pi, probs)});
  }
  sort_certificates(certs);
  return certs;
}

std::vector<DecoyCertificate> find_decoys_with_ties(const ProblemInstance& instance) {
  const FunctionClass& cls = instance.function_class();
  const RewardTable& truth = instance.truth();
  const auto& probs = instance.context_probs();
  const double best = optimal_value(truth, probs);
  std::vector<DecoyCertificate> certs;
  for (std::size_t m = 0; m < cls.size(); ++m) {
    const RewardTable& f = cls[m];
    auto sets = optimal_arm_sets(f);
    bool agrees = true;
    bool some_context_all_bad = false;
    for (std::size_t x = 0; x < f.contexts() && agrees; ++x) {
      const double best_true = row_max(truth, x);
      bool all_bad = true;
      for (std::size_t a : sets[x]) {
        if (f(x, a) != truth(x, a)) agrees = false;
        if (!(truth(x, a) < best_true)) all_bad = false;
      }
      some_context_all_bad = some_context_all_bad || all_bad;
    }
    if (!agrees || !some_context_all_bad) continue;
    Policy pi;
    for (const auto& s : sets) pi.arms.push_back(s.front());
    certs.push_back(DecoyCertificate{m, f, pi, std::move(sets), function_gap(f, cls).gap,
                                     best - policy_value(truth, pi, probs)});
  }
  sort_certificates(certs);
  return certs;
}

std::string verify_certificate(const ProblemInstance& instance, const DecoyCertificate& cert,
                               TieHandling ties) {
  const FunctionClass& cls = instance.function_class();
  const RewardTable& truth = instance.truth();
  std::ostringstream err;
  auto idx = cls.index_of(cert.decoy);
  if (!idx) return "decoy is not a member of the class";
  if (*idx != cert.member) return "decoy member index does not match its table";
  const auto sets = optimal_arm_sets(cert.decoy);
  if (sets != cert.optimal_sets) return "optimal arm sets do not match the decoy";
  if (ties == TieHandling::Strict) {
    for (const auto& s : sets)
      if (s.size() != 1) return "decoy has tied optimal arms in strict mode";
  }
  for (std::size_t x = 0; x < sets.size(); ++x) {
    if (std::find(sets[x].begin(), sets[x].end(), cert.decoy_policy(x)) == sets[x].end())
      return "decoy policy is not optimal for the decoy";
    for (std::size_t a : sets[x])
      if (cert.decoy(x, a) != truth(x, a)) {
        err << "decoy disagrees with f* at (" << x << "," << a << ")";
        return err.str();
      }
  }
  if (!is_suboptimal(truth, cert.decoy_policy)) return "decoy policy is optimal for f*";
  if (ties == TieHandling::Ties) {
    bool some_all_bad = false;
    for (std::size_t x = 0; x < sets.size(); ++x) {
      bool all_bad = true;
      for (std::size_t a : sets[x]) all_bad = all_bad && truth(x, a) < row_max(truth, x);
      some_all_bad = some_all_bad || all_bad;
    }
    if (!some_all_bad) return "some optimal policy of the decoy is optimal for f*";
  }
  if (function_gap(cert.decoy, cls).gap != cert.decoy_gap) return "decoy gap mismatch";
  const auto& probs = instance.context_probs();
  const double regret = optimal_value(truth, probs) - policy_value(truth, cert.decoy_policy, probs);
  if (regret != cert.regret_per_round) return "regret per round mismatch";
  if (!(regret > 0.0)) return "regret per round must be positive";
  return {};
}

}  // namespace greedytrap
