#include "greedytrap/families.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace greedytrap {

namespace {

__extension__ typedef __int128 i128;

std::int64_t units(double eps) {
  return static_cast<std::int64_t>(std::floor(1.0 / eps + 1e-9));
}

bool has_ties(const FunctionClass& cls) {
  for (const auto& f : cls.members())
    for (const auto& s : optimal_arm_sets(f))
      if (s.size() > 1) return true;
  return false;
}

std::optional<DecoyCertificate> certificate_for(const ProblemInstance& inst, std::size_t member) {
  const bool ties = has_ties(inst.function_class());
  const auto certs = ties ? find_decoys_with_ties(inst) : find_decoys(inst);
  for (const auto& c : certs)
    if (c.member == member) {
      const std::string err = verify_certificate(inst, c, ties ? TieHandling::Ties : TieHandling::Strict);
      if (!err.empty()) throw Error("constructed certificate failed verification: " + err);
      return c;
    }
  return std::nullopt;
}

FamilyInstance make_family(std::string name, std::vector<RewardTable> tables, double value_step,
                           bool bounded, std::vector<double> probs = {}) {
  const bool with_decoy = tables.size() > 1;
  const std::size_t X = tables.front().contexts();
  const std::size_t K = tables.front().arms();
  FunctionClass cls(std::move(tables));
  ProblemInstance inst(std::move(cls), 0, 0.0, std::move(probs), uniform_warmup(X, K, 1), bounded);
  if (value_step > 0.0) inst.grid_eps = value_step;
  FamilyInstance out;
  out.family = std::move(name);
  out.value_step = value_step;
  if (with_decoy) {
    out.certificate = certificate_for(inst, 1);
    if (!out.certificate) throw Error("constructed table is not a decoy of f*");
    inst.decoy_hint = 1;
  }
  out.instance = std::move(inst);
  return out;
}

std::vector<double> to_doubles(const std::vector<std::int64_t>& v, double scale) {
  std::vector<double> out;
  for (auto n : v) out.push_back(static_cast<double>(n) * scale);
  return out;
}

std::int64_t uniform_int(RngStream& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
}

}  // namespace

std::int64_t GridSpec::min_numerator() const {
  return static_cast<std::int64_t>(std::ceil(lo / eps - 1e-9));
}

std::int64_t GridSpec::max_numerator() const {
  return static_cast<std::int64_t>(std::floor(hi / eps + 1e-9));
}

std::optional<std::int64_t> grid_numerator(double v, double step) {
  if (!(step > 0.0)) return std::nullopt;
  const double r = v / step;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r))) return std::nullopt;
  return static_cast<std::int64_t>(n);
}

// ---------------------------------------------------------------------------
// linear bandit

std::vector<int> hypercube_arm(std::size_t d, std::size_t k) {
  std::vector<int> a(d);
  for (std::size_t i = 0; i < d; ++i) a[i] = ((k >> i) & 1U) ? -1 : 1;
  return a;
}

FamilyInstance linear_bandit_from(const std::vector<std::int64_t>& theta_num, double eps) {
  const std::size_t d = theta_num.size();
  if (d < 2 || d > 16) throw PreconditionError("linear bandit needs 2 <= d <= 16");
  if (!(eps > 0.0 && eps <= 0.25)) throw PreconditionError("linear bandit needs eps in (0, 1/4]");
  const std::int64_t M = units(eps);
  for (auto n : theta_num)
    if (n == 0 || std::abs(n) > M) throw PreconditionError("theta* must lie in ([-1,1]_eps minus 0)^d");

  const std::size_t K = std::size_t{1} << d;
  auto table = [&](const std::vector<std::int64_t>& th) {
    std::vector<double> v(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto a = hypercube_arm(d, k);
      std::int64_t s = 0;
      for (std::size_t i = 0; i < d; ++i) s += th[i] * a[i];
      v[k] = eps * static_cast<double>(s);
    }
    return RewardTable::mab(std::move(v));
  };

  std::int64_t l1 = 0;
  std::size_t i_min = 0;
  for (std::size_t i = 0; i < d; ++i) {
    l1 += std::abs(theta_num[i]);
    if (std::abs(theta_num[i]) < std::abs(theta_num[i_min])) i_min = i;
  }
  const std::int64_t target = l1 - 2 * std::abs(theta_num[i_min]);

  std::vector<RewardTable> tables{table(theta_num)};
  FamilyInstance out;
  std::vector<std::int64_t> dec;
  std::vector<double> a_dec;
  if (target >= static_cast<std::int64_t>(d)) {
    std::vector<int> sign(d);
    for (std::size_t i = 0; i < d; ++i) sign[i] = theta_num[i] > 0 ? 1 : -1;
    sign[i_min] = -sign[i_min];
    dec.assign(d, 1);
    std::int64_t rem = target - static_cast<std::int64_t>(d);
    for (std::size_t i = 0; i < d && rem > 0; ++i) {
      const std::int64_t add = std::min(rem, M - 1);
      dec[i] += add;
      rem -= add;
    }
    if (rem > 0) throw Error("cannot realize the decoy l1 mass on the grid");
    for (std::size_t i = 0; i < d; ++i) {
      dec[i] *= sign[i];
      a_dec.push_back(sign[i]);
    }
    tables.push_back(table(dec));
  }
  out = make_family("linear", std::move(tables), eps, false);
  out.parameters["theta_star"] = to_doubles(theta_num, eps);
  out.parameters["eps"] = {eps};
  if (!dec.empty()) {
    out.parameters["theta_dec"] = to_doubles(dec, eps);
    out.parameters["a_dec"] = a_dec;
  }
  return out;
}

FamilyInstance gen_linear_bandit(std::size_t d, double eps, RngStream& rng) {
  if (!(eps > 0.0 && eps <= 0.25)) throw PreconditionError("linear bandit needs eps in (0, 1/4]");
  const std::int64_t M = units(eps);
  std::vector<std::int64_t> th(d);
  for (auto& n : th) {
    const std::int64_t idx = uniform_int(rng, 0, 2 * M - 1);
    n = idx < M ? -(idx + 1) : idx - M + 1;
  }
  return linear_bandit_from(th, eps);
}

// ---------------------------------------------------------------------------
// linear CB, negative family

FamilyInstance linear_cb_negative_from(double eps, const std::vector<std::int64_t>& theta_num,
                                       const std::vector<std::vector<std::vector<std::int64_t>>>& sets,
                                       std::size_t max_contexts) {
  const std::size_t d = theta_num.size();
  if (d < 2) throw PreconditionError("linear CB negative family needs d >= 2");
  if (!(eps > 0.0 && eps <= 0.5)) throw PreconditionError("linear CB negative family needs eps in (0, 1/2]");
  const std::int64_t M = units(eps);
  if (std::abs(static_cast<double>(M) * eps - 1.0) > 1e-12) throw PreconditionError("1/eps must be an integer");
  if (sets.empty()) throw PreconditionError("need at least one arm besides the fixed last arm");
  if (theta_num[d - 1] != M) throw PreconditionError("theta*_d must equal 1");
  std::int64_t head = 0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    if (std::abs(theta_num[i]) > M) throw PreconditionError("theta* must lie in [-1,1]^d");
    head += std::abs(theta_num[i]);
  }
  if (head >= M) throw PreconditionError("need ||theta*||_1 < 2");

  const std::size_t K = sets.size() + 1;
  std::size_t X = 1;
  for (const auto& s : sets) {
    if (s.empty()) throw PreconditionError("per-arm context sets must be nonempty");
    for (const auto& v : s) {
      if (v.size() != d - 1) throw ShapeError("per-arm context vectors need d-1 leading coordinates");
      for (auto c : v)
        if (std::abs(c) > M) throw PreconditionError("context coordinates must lie in [-1,1]");
    }
    X *= s.size();
    if (X > max_contexts) throw PreconditionError("product context set exceeds the configured limit");
  }

  std::vector<std::int64_t> dec = theta_num;
  dec[d - 1] = -M;
  const double e2 = eps * eps;
  auto table = [&](const std::vector<std::int64_t>& th) {
    std::vector<double> v(X * K);
    for (std::size_t x = 0; x < X; ++x) {
      std::size_t code = x;
      for (std::size_t a = 0; a + 1 < K; ++a) {
        const auto& vec = sets[a][code % sets[a].size()];
        code /= sets[a].size();
        std::int64_t s = 0;
        for (std::size_t i = 0; i + 1 < d; ++i) s += th[i] * vec[i];
        v[x * K + a] = e2 * static_cast<double>(s);
      }
      v[x * K + K - 1] = e2 * static_cast<double>(th[d - 1] * M);
    }
    return RewardTable(X, K, std::move(v));
  };
  FamilyInstance out = make_family("linear-cb-neg", {table(theta_num), table(dec)}, e2, false);
  out.parameters["theta_star"] = to_doubles(theta_num, eps);
  out.parameters["theta_dec"] = to_doubles(dec, eps);
  out.parameters["eps"] = {eps};
  return out;
}

FamilyInstance gen_linear_cb_negative(std::size_t d, double eps, std::size_t arms, RngStream& rng,
                                      std::size_t set_size, std::size_t max_contexts) {
  if (arms < 2) throw PreconditionError("need at least two arms");
  if (!(eps > 0.0 && eps <= 0.5)) throw PreconditionError("linear CB negative family needs eps in (0, 1/2]");
  const std::int64_t M = units(eps);
  std::vector<std::int64_t> th(d, 0);
  std::int64_t rem = M - 1;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    th[i] = uniform_int(rng, -rem, rem);
    rem -= std::abs(th[i]);
  }
  th[d - 1] = M;
  std::vector<std::vector<std::vector<std::int64_t>>> sets(arms - 1);
  for (auto& s : sets) {
    std::set<std::vector<std::int64_t>> seen;
    std::size_t guard = 0;
    while (s.size() < set_size && guard++ < 1000) {
      std::vector<std::int64_t> v(d - 1);
      for (auto& c : v) c = uniform_int(rng, -M, M);
      if (seen.insert(v).second) s.push_back(v);
    }
  }
  return linear_cb_negative_from(eps, th, sets, max_contexts);
}

// ---------------------------------------------------------------------------
// linear CB, positive family

namespace {

std::size_t rank_of(const std::vector<std::vector<double>>& rows, std::size_t d) {
  if (rows.empty()) return 0;
  Eigen::MatrixXd m(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-10);
  return static_cast<std::size_t>(lu.rank());
}

double snap32(double v) {
  constexpr double scale = 4294967296.0;
  return std::round(v * scale) / scale;
}

}  // namespace

std::vector<std::size_t> product_context(const ContextSets& sets, std::size_t index) {
  std::vector<std::size_t> elems(sets.size());
  for (std::size_t a = 0; a < sets.size(); ++a) {
    elems[a] = index % sets[a].size();
    index /= sets[a].size();
  }
  return elems;
}

std::vector<std::size_t> span_witness(const ContextSets& sets, const std::vector<std::size_t>& policy) {
  const std::size_t d = sets.front().front().size();
  std::vector<std::vector<double>> chosen;
  std::vector<std::size_t> witness;
  while (rank_of(chosen, d) < d) {
    const std::size_t r = rank_of(chosen, d);
    std::size_t index = 0, radix = 1;
    for (std::size_t a = 0; a < sets.size(); ++a) {
      std::optional<std::size_t> pick;
      for (std::size_t e = 0; e < sets[a].size() && !pick; ++e) {
        auto trial = chosen;
        trial.push_back(sets[a][e]);
        if (rank_of(trial, d) > r) pick = e;
      }
      if (!pick) throw PreconditionError("per-arm context set does not span R^d");
      index += *pick * radix;
      radix *= sets[a].size();
    }
    const auto elems = product_context(sets, index);
    const std::size_t arm = policy.at(index);
    chosen.push_back(sets[arm][elems[arm]]);
    witness.push_back(index);
  }
  return witness;
}

ContextSets perturbation_sets(const std::vector<std::vector<double>>& base, double eps) {
  ContextSets sets;
  for (const auto& x : base) {
    std::vector<std::vector<double>> s;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto v = x;
      v[i] += eps;
      s.push_back(v);
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

LinearCbPositive gen_linear_cb_positive(const ContextSets& sets,
                                        const std::vector<std::vector<double>>& thetas,
                                        std::size_t true_index, std::size_t max_contexts) {
  if (sets.empty() || sets.front().empty()) throw PreconditionError("need nonempty per-arm context sets");
  const std::size_t d = sets.front().front().size();
  const std::size_t K = sets.size();
  std::size_t X = 1;
  for (std::size_t a = 0; a < K; ++a) {
    for (const auto& v : sets[a]) {
      if (v.size() != d) throw ShapeError("context vectors must all have dimension d");
      for (double c : v)
        if (c < -1.0 || c > 1.0) throw PreconditionError("context coordinates must lie in [-1,1]");
    }
    if (rank_of(sets[a], d) < d) {
      std::ostringstream os;
      os << "context set S_" << a << " does not span R^" << d << " (rank " << rank_of(sets[a], d) << ")";
      throw PreconditionError(os.str());
    }
    X *= sets[a].size();
    if (X > max_contexts) throw PreconditionError("product context set exceeds the configured limit");
  }
  if (thetas.empty() || true_index >= thetas.size()) throw PreconditionError("true_index outside the parameter set");

  std::vector<RewardTable> tables;
  for (const auto& th : thetas) {
    if (th.size() != d) throw ShapeError("parameter vectors must have dimension d");
    std::vector<double> v(X * K);
    for (std::size_t x = 0; x < X; ++x) {
      const auto elems = product_context(sets, x);
      for (std::size_t a = 0; a < K; ++a) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += th[i] * sets[a][elems[a]][i];
        v[x * K + a] = snap32(s);
      }
    }
    tables.push_back(RewardTable(X, K, std::move(v)));
  }
  std::swap(tables[0], tables[true_index]);

  LinearCbPositive out;
  FunctionClass cls(std::move(tables));
  ProblemInstance inst(cls, 0, 0.0, {}, uniform_warmup(X, K, 1), false);
  inst.grid_eps = 1.0 / 4294967296.0;
  out.family.family = "linear-cb-pos";
  out.family.value_step = *inst.grid_eps;
  for (const auto& f : cls.members()) {
    std::vector<std::size_t> pol;
    for (const auto& s : optimal_arm_sets(f)) pol.push_back(s.front());
    out.span_witness.push_back(span_witness(sets, pol));
  }
  out.family.instance = std::move(inst);
  out.family.parameters["theta_star"] = thetas[true_index];
  return out;
}

LinearCbPositive gen_linear_cb_positive_random(std::size_t d, std::size_t arms, double eps, RngStream& rng) {
  const std::int64_t M = units(eps);
  std::vector<std::vector<double>> base(arms, std::vector<double>(d));
  for (auto& x : base)
    for (auto& c : x) c = eps * static_cast<double>(uniform_int(rng, -M / 2, M / 2));
  ContextSets sets = perturbation_sets(base, eps);
  for (std::size_t a = 0; a < arms; ++a)
    if (rank_of(sets[a], d) < d) sets[a].push_back(std::vector<double>(d, 0.0)), sets[a].back()[0] = eps;
  std::set<std::vector<std::int64_t>> seen;
  std::vector<std::vector<double>> thetas;
  while (thetas.size() < 4) {
    std::vector<std::int64_t> n(d);
    for (auto& c : n) c = uniform_int(rng, -M, M);
    if (!seen.insert(n).second) continue;
    thetas.push_back(to_doubles(n, eps));
  }
  return gen_linear_cb_positive(sets, thetas, 0);
}

// ---------------------------------------------------------------------------
// Lipschitz

namespace {

void check_metric(const std::vector<std::vector<std::int64_t>>& D, std::int64_t M) {
  const std::size_t n = D.size();
  for (const auto& row : D)
    if (row.size() != n) throw ShapeError("metric must be a square matrix");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (D[i][j] != D[j][i]) throw PreconditionError("metric must be symmetric");
      if (i == j && D[i][j] != 0) throw PreconditionError("metric must vanish on the diagonal");
      if (i != j && D[i][j] <= 0) throw PreconditionError("distinct points need positive distance");
      if (D[i][j] > M) throw PreconditionError("metric values must lie in [0,1]");
      for (std::size_t k = 0; k < n; ++k)
        if (D[i][k] > D[i][j] + D[j][k]) throw PreconditionError("metric violates the triangle inequality");
    }
}

bool is_lipschitz(const std::vector<std::int64_t>& f, const std::vector<std::vector<std::int64_t>>& D) {
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j)
      if (std::abs(f[i] - f[j]) > D[i][j]) return false;
  return true;
}

std::optional<std::size_t> unique_argmax(const std::int64_t* v, std::size_t n) {
  std::size_t best = 0;
  bool tie = false;
  for (std::size_t i = 1; i < n; ++i) {
    if (v[i] > v[best]) {
      best = i;
      tie = false;
    } else if (v[i] == v[best]) {
      tie = true;
    }
  }
  if (tie) return std::nullopt;
  return best;
}

std::vector<std::vector<std::int64_t>> linf_metric(const std::vector<std::pair<std::int64_t, std::int64_t>>& pts) {
  std::vector<std::vector<std::int64_t>> D(pts.size(), std::vector<std::int64_t>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      D[i][j] = std::max(std::abs(pts[i].first - pts[j].first), std::abs(pts[i].second - pts[j].second));
  return D;
}

std::vector<std::pair<std::int64_t, std::int64_t>> random_points(std::size_t n, std::int64_t M, RngStream& rng) {
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::vector<std::pair<std::int64_t, std::int64_t>> pts;
  while (pts.size() < n) {
    std::pair<std::int64_t, std::int64_t> p{uniform_int(rng, 0, M), uniform_int(rng, 0, M)};
    if (seen.insert(p).second) pts.push_back(p);
  }
  return pts;
}

// Largest Lipschitz minorant of random values: f(i) = min_j g(j) + D(i,j).
std::vector<std::int64_t> random_lipschitz(const std::vector<std::vector<std::int64_t>>& D,
                                           std::int64_t M, RngStream& rng) {
  std::vector<std::int64_t> g(D.size());
  for (auto& v : g) v = uniform_int(rng, 0, M);
  std::vector<std::int64_t> f(D.size());
  for (std::size_t i = 0; i < D.size(); ++i) {
    f[i] = g[i];
    for (std::size_t j = 0; j < D.size(); ++j) f[i] = std::min(f[i], g[j] + D[i][j]);
  }
  return f;
}

}  // namespace

FamilyInstance lipschitz_decoy(const std::vector<std::vector<std::int64_t>>& metric, double eps,
                               const std::vector<std::int64_t>& f, std::optional<std::size_t> arm) {
  if (!(eps > 0.0 && eps <= 1.0)) throw PreconditionError("eps must lie in (0, 1]");
  const std::int64_t M = units(eps);
  const std::size_t n = f.size();
  if (n < 2 || metric.size() != n) throw ShapeError("metric and reward vector sizes differ");
  check_metric(metric, M);
  for (auto v : f)
    if (v < 0 || v > M) throw PreconditionError("rewards must lie in [0,1]_eps");
  if (!is_lipschitz(f, metric)) throw PreconditionError("f is not Lipschitz for the metric");
  const auto best = unique_argmax(f.data(), n);
  if (!best) throw PreconditionError("f must have a unique best arm");

  auto qualifies = [&](std::size_t a) { return f[a] > 0 && f[a] < f[*best]; };
  if (arm) {
    if (*arm >= n || !qualifies(*arm)) throw PreconditionError("chosen arm is not a qualifying decoy arm");
  } else {
    for (std::size_t a = 0; a < n && !arm; ++a)
      if (qualifies(a)) arm = a;
    if (!arm) throw PreconditionError("no qualifying decoy arm");
  }

  std::vector<std::int64_t> dec(n);
  for (std::size_t b = 0; b < n; ++b) dec[b] = std::max<std::int64_t>(0, f[*arm] - metric[*arm][b]);
  if (!is_lipschitz(dec, metric)) throw Error("decoy violates the Lipschitz condition");
  const auto dbest = unique_argmax(dec.data(), n);
  if (!dbest || *dbest != *arm) throw Error("decoy does not have the decoy arm as unique best arm");

  FamilyInstance out = make_family(
      "lipschitz", {RewardTable::mab(to_doubles(f, eps)), RewardTable::mab(to_doubles(dec, eps))}, eps, true);
  out.parameters["f"] = to_doubles(f, eps);
  out.parameters["f_dec"] = to_doubles(dec, eps);
  out.parameters["decoy_arm"] = {static_cast<double>(*arm)};
  out.parameters["eps"] = {eps};
  return out;
}

FamilyInstance gen_lipschitz(std::size_t points, double eps, RngStream& rng) {
  const std::int64_t M = units(eps);
  if (static_cast<std::int64_t>(points) > (M + 1) * (M + 1)) throw PreconditionError("too many points for the grid");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const auto D = linf_metric(random_points(points, M, rng));
    const auto f = random_lipschitz(D, M, rng);
    const auto best = unique_argmax(f.data(), f.size());
    if (!best) continue;
    bool ok = false;
    for (auto v : f) ok = ok || (v > 0 && v < f[*best]);
    if (!ok) continue;
    FamilyInstance out = lipschitz_decoy(D, eps, f);
    std::vector<double> flat;
    for (const auto& row : D)
      for (auto v : row) flat.push_back(static_cast<double>(v) * eps);
    out.parameters["metric"] = flat;
    return out;
  }
  throw Error("could not draw a qualifying Lipschitz function");
}

FamilyInstance lipschitz_cb_decoy(std::size_t contexts, std::size_t arms,
                                  const std::vector<std::vector<std::int64_t>>& metric, double eps,
                                  const std::vector<std::int64_t>& f,
                                  std::optional<std::vector<std::size_t>> policy) {
  if (!(eps > 0.0 && eps <= 1.0)) throw PreconditionError("eps must lie in (0, 1]");
  const std::int64_t M = units(eps);
  const std::size_t n = contexts * arms;
  if (arms < 2 || f.size() != n || metric.size() != n) throw ShapeError("metric/reward sizes must be contexts x arms");
  check_metric(metric, M);
  for (auto v : f)
    if (v < 0 || v > M) throw PreconditionError("rewards must lie in [0,1]_eps");
  if (!is_lipschitz(f, metric)) throw PreconditionError("f is not Lipschitz for the metric");

  std::vector<std::size_t> best(contexts);
  for (std::size_t x = 0; x < contexts; ++x) {
    const auto b = unique_argmax(f.data() + x * arms, arms);
    if (!b) throw PreconditionError("f must have a unique best arm in every context");
    best[x] = *b;
  }
  auto qualifies = [&](std::size_t x, std::size_t a) {
    return f[x * arms + a] > 0 && f[x * arms + a] < f[x * arms + best[x]];
  };
  std::vector<std::size_t> pi(contexts);
  if (policy) {
    if (policy->size() != contexts) throw ShapeError("policy needs one arm per context");
    pi = *policy;
    for (std::size_t x = 0; x < contexts; ++x)
      if (pi[x] >= arms || !qualifies(x, pi[x])) throw PreconditionError("policy arm is not a qualifying decoy arm");
  } else {
    for (std::size_t x = 0; x < contexts; ++x) {
      std::optional<std::size_t> pick;
      for (std::size_t a = 0; a < arms && !pick; ++a)
        if (qualifies(x, a)) pick = a;
      if (!pick) throw PreconditionError("no qualifying decoy arm");
      pi[x] = *pick;
    }
  }

  std::vector<std::int64_t> dec(n);
  for (std::size_t x = 0; x < contexts; ++x) {
    const std::size_t u = x * arms + pi[x];
    for (std::size_t a = 0; a < arms; ++a)
      dec[x * arms + a] = std::max<std::int64_t>(0, f[u] - metric[u][x * arms + a]);
  }
  if (!is_lipschitz(dec, metric)) throw Error("decoy violates the Lipschitz condition across contexts");
  for (std::size_t x = 0; x < contexts; ++x) {
    const auto b = unique_argmax(dec.data() + x * arms, arms);
    if (!b || *b != pi[x]) throw Error("decoy does not have the decoy policy as unique best arms");
  }
  FamilyInstance out = make_family("lipschitz-cb",
                                   {RewardTable(contexts, arms, to_doubles(f, eps)),
                                    RewardTable(contexts, arms, to_doubles(dec, eps))},
                                   eps, true);
  out.parameters["f"] = to_doubles(f, eps);
  out.parameters["f_dec"] = to_doubles(dec, eps);
  std::vector<double> pid(pi.begin(), pi.end());
  out.parameters["decoy_policy"] = pid;
  out.parameters["eps"] = {eps};
  return out;
}

FamilyInstance gen_lipschitz_cb(std::size_t contexts, std::size_t arms, double eps, RngStream& rng) {
  const std::int64_t M = units(eps);
  const std::size_t n = contexts * arms;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    // within-context l_inf geometry, cross-context distance 1
    std::vector<std::vector<std::int64_t>> D(n, std::vector<std::int64_t>(n, M));
    std::vector<std::int64_t> f(n);
    bool ok = true;
    for (std::size_t x = 0; x < contexts && ok; ++x) {
      const auto Dx = linf_metric(random_points(arms, M, rng));
      for (std::size_t a = 0; a < arms; ++a)
        for (std::size_t b = 0; b < arms; ++b) D[x * arms + a][x * arms + b] = Dx[a][b];
      const auto fx = random_lipschitz(Dx, M, rng);
      const auto best = unique_argmax(fx.data(), arms);
      if (!best) ok = false;
      bool q = false;
      for (std::size_t a = 0; a < arms && ok; ++a) q = q || (fx[a] > 0 && fx[a] < fx[*best]);
      ok = ok && q;
      std::copy(fx.begin(), fx.end(), f.begin() + static_cast<std::ptrdiff_t>(x * arms));
    }
    if (!ok) continue;
    return lipschitz_cb_decoy(contexts, arms, D, eps, f);
  }
  throw Error("could not draw a qualifying Lipschitz contextual function");
}

// ---------------------------------------------------------------------------
// polynomial

namespace {

i128 binom(std::size_t i, std::size_t q) {
  i128 r = 1;
  for (std::size_t k = 1; k <= q; ++k) r = r * static_cast<i128>(i - q + k) / static_cast<i128>(k);
  return r;
}

i128 poly_int(const std::vector<std::int64_t>& n, std::int64_t k) {
  i128 v = 0, pw = 1;
  for (std::size_t q = 0; q < n.size(); ++q) {
    v += static_cast<i128>(n[q]) * pw;
    pw *= k;
  }
  return v;
}

double to_exact_double(i128 v) {
  constexpr i128 lim = i128{1} << 53;
  if (v >= lim || v <= -lim) throw PreconditionError("polynomial value exceeds exact double range");
  return static_cast<double>(static_cast<std::int64_t>(v));
}

double coefficient_bound(std::size_t q) { return q == 0 ? 1.0 : 1.0 / static_cast<double>(q); }

}  // namespace

double polynomial_value(const std::vector<double>& theta, double a) {
  double v = 0.0;
  for (std::size_t q = theta.size(); q-- > 0;) v = v * a + theta[q];
  return v;
}

std::vector<double> polynomial_decoy_coefficients(const std::vector<double>& theta, double eps, double a_star) {
  const std::size_t p = theta.size() - 1;
  std::vector<double> dec(p + 1, 0.0);
  dec[p] = theta[p];
  for (std::size_t q = 1; q < p; ++q)
    for (std::size_t i = q; i <= p; ++i)
      dec[q] += theta[i] * static_cast<double>(binom(i, q)) * std::pow(eps, static_cast<double>(i - q));
  double s = 0.0;
  for (std::size_t i = 0; i <= p; ++i) s += theta[i] * std::pow(eps, static_cast<double>(i));
  dec[0] = s - (polynomial_value(theta, a_star) - polynomial_value(theta, a_star - eps));
  return dec;
}

PolynomialDecoy polynomial_decoy(std::size_t p, double eps, const std::vector<std::int64_t>& theta_num,
                                 std::optional<std::size_t> ray_points) {
  if (p < 2) throw PreconditionError("polynomial family needs p >= 2");
  if (!(eps > 0.0 && eps < 1.0 / (2.0 * static_cast<double>(p)))) throw PreconditionError("need eps in (0, 1/(2p))");
  if (theta_num.size() != p + 1) throw ShapeError("need p+1 coefficients");
  if (theta_num[p] == 0) throw PreconditionError("leading coefficient must be nonzero");

  std::vector<double> delta(p + 1);
  for (std::size_t q = 0; q <= p; ++q) delta[q] = std::pow(eps, static_cast<double>(p + 1 - q));
  const double tol = 1e-12;
  if (std::abs(static_cast<double>(theta_num[p]) * eps) > 1.0 / static_cast<double>(p) + tol)
    throw PreconditionError("leading coefficient outside [-1/p, 1/p]");
  for (std::size_t q = 0; q < p; ++q)
    if (std::abs(static_cast<double>(theta_num[q]) * delta[q]) > coefficient_bound(q) - 5.0 * eps + tol) {
      std::ostringstream os;
      os << "coefficient " << q << " is not 5 eps inside its bound";
      throw PreconditionError(os.str());
    }

  const std::int64_t kmax = static_cast<std::int64_t>(std::floor(0.5 / eps + 1e-9));
  const std::int64_t ray = static_cast<std::int64_t>(ray_points.value_or(static_cast<std::size_t>(std::ceil(4.0 / eps))));
  std::vector<i128> val(static_cast<std::size_t>(kmax + ray + 2));
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(val.size()); ++k) val[static_cast<std::size_t>(k)] = poly_int(theta_num, k);

  std::int64_t kstar = 0;
  bool tie = false;
  for (std::int64_t k = 1; k <= kmax; ++k) {
    if (val[static_cast<std::size_t>(k)] > val[static_cast<std::size_t>(kstar)]) {
      kstar = k;
      tie = false;
    } else if (val[static_cast<std::size_t>(k)] == val[static_cast<std::size_t>(kstar)]) {
      tie = true;
    }
  }
  if (tie) throw PreconditionError("best arm in A is not unique");
  if (kstar < 2) throw PreconditionError("need best arm a* > eps");
  for (std::int64_t k = kmax + 1; k <= kmax + ray; ++k)
    if (!(val[static_cast<std::size_t>(k)] < val[static_cast<std::size_t>(kstar)]))
      throw PreconditionError("f is not well-shaped (a larger grid arm is at least as good)");

  const i128 dstar = val[static_cast<std::size_t>(kstar)] - val[static_cast<std::size_t>(kstar - 1)];
  std::vector<std::int64_t> dec(p + 1);
  dec[p] = theta_num[p];
  for (std::size_t q = 1; q < p; ++q) {
    i128 s = 0;
    for (std::size_t i = q; i <= p; ++i) s += static_cast<i128>(theta_num[i]) * binom(i, q);
    dec[q] = static_cast<std::int64_t>(s);
  }
  i128 s0 = 0;
  for (auto n : theta_num) s0 += n;
  dec[0] = static_cast<std::int64_t>(s0 - dstar);

  PolynomialDecoy out;
  out.theta_num = theta_num;
  out.decoy_num = dec;
  out.best_arm = static_cast<std::size_t>(kstar);
  for (std::size_t q = 0; q <= p; ++q) {
    out.theta.push_back(static_cast<double>(theta_num[q]) * delta[q]);
    out.decoy_theta.push_back(static_cast<double>(dec[q]) * delta[q]);
  }
  for (std::size_t q = 0; q < p; ++q) {
    if (std::abs(out.decoy_theta[q]) > coefficient_bound(q) + tol) throw Error("decoy coefficient leaves its box");
    const double drift = std::abs(out.decoy_theta[q] - out.theta[q]);
    if (drift > (q == 0 ? 5.0 : 3.0) * eps + tol) throw Error("decoy coefficient drift exceeds the bound");
  }

  // integer identity f_dec(k) = f(k+1) - D*, plus the real-valued check
  const double ep1 = delta[0];
  const double dstar_real = out.theta.empty() ? 0.0
                                              : polynomial_value(out.theta, static_cast<double>(kstar) * eps) -
                                                    polynomial_value(out.theta, static_cast<double>(kstar - 1) * eps);
  std::vector<double> fs, fd;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    const i128 vd = poly_int(dec, k);
    if (vd != val[static_cast<std::size_t>(k + 1)] - dstar) throw Error("shift identity failed on the grid");
    fs.push_back(ep1 * to_exact_double(val[static_cast<std::size_t>(k)]));
    fd.push_back(ep1 * to_exact_double(vd));
    const double a = static_cast<double>(k) * eps;
    const double lhs = polynomial_value(out.decoy_theta, a);
    const double rhs = polynomial_value(out.theta, a + eps) - dstar_real;
    out.max_identity_error = std::max(out.max_identity_error, std::abs(lhs - rhs));
  }
  for (std::int64_t k = kmax + 1; k <= kmax + ray - 1; ++k)
    if (!(poly_int(dec, k) < poly_int(dec, kstar - 1))) throw Error("decoy is not well-shaped on the scanned ray");

  out.family = make_family("polynomial", {RewardTable::mab(fs), RewardTable::mab(fd)}, ep1, false);
  out.family.parameters["theta"] = out.theta;
  out.family.parameters["theta_dec"] = out.decoy_theta;
  out.family.parameters["eps"] = {eps};
  out.family.parameters["best_arm"] = {static_cast<double>(kstar) * eps};
  return out;
}

PolynomialDecoy gen_polynomial(std::size_t p, double eps, double gamma, const std::vector<double>& theta) {
  if (theta.size() != p + 1) throw ShapeError("need p+1 coefficients");
  if (theta[p] != gamma) throw PreconditionError("leading coefficient must equal gamma");
  std::vector<std::int64_t> n(p + 1);
  for (std::size_t q = 0; q <= p; ++q) {
    const auto g = grid_numerator(theta[q], std::pow(eps, static_cast<double>(p + 1 - q)));
    if (!g) {
      std::ostringstream os;
      os << "coefficient " << q << " is off its grid";
      throw PreconditionError(os.str());
    }
    n[q] = *g;
  }
  return polynomial_decoy(p, eps, n);
}

PolynomialDecoy gen_polynomial_random(std::size_t p, double eps, RngStream& rng, std::size_t max_tries) {
  if (p < 2) throw PreconditionError("polynomial family needs p >= 2");
  const std::int64_t gmax = static_cast<std::int64_t>(std::floor(1.0 / (static_cast<double>(p) * eps) + 1e-9));
  for (std::size_t t = 0; t < max_tries; ++t) {
    std::vector<std::int64_t> n(p + 1);
    n[p] = -uniform_int(rng, 1, gmax);
    for (std::size_t q = 0; q < p; ++q) {
      const double delta = std::pow(eps, static_cast<double>(p + 1 - q));
      const std::int64_t lim = static_cast<std::int64_t>(std::floor((coefficient_bound(q) - 5.0 * eps) / delta + 1e-9));
      if (lim < 0) throw PreconditionError("eps too large for the coefficient margin");
      n[q] = uniform_int(rng, -lim, lim);
    }
    try {
      return polynomial_decoy(p, eps, n);
    } catch (const PreconditionError&) {
    }
  }
  throw Error("no well-shaped polynomial found within the try budget");
}

// ---------------------------------------------------------------------------
// quadratic

QuadraticDecoy quadratic_decoy(double eps, std::int64_t g, std::int64_t j, std::int64_t n) {
  if (!(eps > 0.0 && eps <= 0.5)) throw PreconditionError("quadratic family needs eps in (0, 1/2]");
  const std::int64_t M = units(eps);
  const GridSpec gamma_grid{-1.0, -0.5, eps};
  if (!gamma_grid.contains_numerator(g)) throw PreconditionError("gamma must lie in [-1,-0.5]_eps");
  if (j < 0 || j > M) throw PreconditionError("mu must lie in [0,1]_eps");
  const double e3 = eps * eps * eps;
  const std::int64_t nmax = static_cast<std::int64_t>(std::floor(1.0 / e3 + 1e-9));
  if (n < 0 || n > nmax) throw PreconditionError("c must lie in [0,1]_{eps^3}");
  if (j < 1) throw PreconditionError("need mu >= eps");
  if (n < -g) throw PreconditionError("need c >= |gamma| eps^2");

  auto table = [&](std::int64_t jj, std::int64_t nn) {
    std::vector<double> v;
    for (std::int64_t k = 0; k <= M; ++k) v.push_back(e3 * static_cast<double>(g * (k - jj) * (k - jj) + nn));
    return RewardTable::mab(std::move(v));
  };
  QuadraticDecoy out;
  out.g = g;
  out.j = j;
  out.n = n;
  out.decoy_j = j - 1;
  out.decoy_n = n + g;
  out.family = make_family("quadratic", {table(j, n), table(out.decoy_j, out.decoy_n)}, e3, false);
  out.family.parameters["gamma"] = {static_cast<double>(g) * eps};
  out.family.parameters["mu"] = {static_cast<double>(j) * eps};
  out.family.parameters["c"] = {static_cast<double>(n) * e3};
  out.family.parameters["mu_dec"] = {static_cast<double>(out.decoy_j) * eps};
  out.family.parameters["c_dec"] = {static_cast<double>(out.decoy_n) * e3};
  out.family.parameters["eps"] = {eps};
  return out;
}

QuadraticDecoy gen_quadratic(double eps, double gamma, double mu, double c) {
  const auto g = grid_numerator(gamma, eps);
  const auto j = grid_numerator(mu, eps);
  const auto n = grid_numerator(c, eps * eps * eps);
  if (!g || !j || !n) throw PreconditionError("quadratic parameters must lie on their grids");
  return quadratic_decoy(eps, *g, *j, *n);
}

QuadraticDecoy gen_quadratic_random(double eps, RngStream& rng) {
  const GridSpec gamma_grid{-1.0, -0.5, eps};
  const std::int64_t M = units(eps);
  const double e3 = eps * eps * eps;
  const std::int64_t nmax = static_cast<std::int64_t>(std::floor(1.0 / e3 + 1e-9));
  const std::int64_t g = uniform_int(rng, gamma_grid.min_numerator(), gamma_grid.max_numerator());
  const std::int64_t j = uniform_int(rng, 1, M);
  const std::int64_t n = uniform_int(rng, -g, nmax);
  return quadratic_decoy(eps, g, j, n);
}

// ---------------------------------------------------------------------------

FunctionClass materialize_finite_class(const FamilyInstance& family, const std::vector<RewardTable>& extra) {
  std::vector<RewardTable> members = family.instance.function_class().members();
  for (const auto& f : extra) {
    if (family.value_step > 0.0)
      for (double v : f.values())
        if (!grid_numerator(v, family.value_step)) throw PreconditionError("extra member is off the value grid");
    members.push_back(f);
  }
  return FunctionClass(std::move(members));
}

FamilyInstance with_distractors(const FamilyInstance& family, const std::vector<RewardTable>& extra) {
  FunctionClass cls = materialize_finite_class(family, extra);
  const ProblemInstance& old = family.instance;
  ProblemInstance inst(std::move(cls), old.true_index(), old.sigma(), old.context_probs(), old.warmup(),
                       old.bounded_rewards());
  inst.grid_eps = old.grid_eps;
  FamilyInstance out = family;
  out.certificate.reset();
  if (family.certificate) {
    const auto idx = inst.function_class().index_of(family.certificate->decoy);
    out.certificate = certificate_for(inst, *idx);
    inst.decoy_hint = *idx;
  }
  out.instance = std::move(inst);
  return out;
}

}  // namespace greedytrap
