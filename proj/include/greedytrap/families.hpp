#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "greedytrap/analysis.hpp"
#include "greedytrap/core.hpp"

namespace greedytrap {

/// {eps * n in [lo, hi] : n integer}.
struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  double eps = 0.1;

  std::int64_t min_numerator() const;
  std::int64_t max_numerator() const;
  bool contains_numerator(std::int64_t n) const { return n >= min_numerator() && n <= max_numerator(); }
  double value(std::int64_t n) const { return eps * static_cast<double>(n); }
};

/// Integer n with |v/step - n| <= 1e-9, if any.
std::optional<std::int64_t> grid_numerator(double v, double step);

/// A generated instance: class {f*, f_dec} (member 0 is f*, member 1 the decoy
/// when one exists), a certificate, and the grid step of all reward values.
struct FamilyInstance {
  std::string family;
  ProblemInstance instance;
  std::optional<DecoyCertificate> certificate;
  double value_step = 0.0;
  std::map<std::string, std::vector<double>> parameters;
};

// -- linear bandit over the hypercube {-1,1}^d ---------------------------------

/// Arm k has coordinate i equal to -1 iff bit i of k is set.
std::vector<int> hypercube_arm(std::size_t d, std::size_t k);

/// theta* = eps * theta_num. The certificate is absent when the l1 margin
/// condition fails.
FamilyInstance linear_bandit_from(const std::vector<std::int64_t>& theta_num, double eps);
FamilyInstance gen_linear_bandit(std::size_t d, double eps, RngStream& rng);

// -- linear contextual bandits --------------------------------------------------

/// Negative family. `theta_num` has d entries (last must equal 1/eps); each of
/// the K-1 sets holds vectors of d-1 numerators (last coordinate implicitly 0);
/// arm K-1 always sees e_d. Certificates use the ties variant.
FamilyInstance linear_cb_negative_from(double eps, const std::vector<std::int64_t>& theta_num,
                                       const std::vector<std::vector<std::vector<std::int64_t>>>& sets,
                                       std::size_t max_contexts = 4096);
FamilyInstance gen_linear_cb_negative(std::size_t d, double eps, std::size_t arms, RngStream& rng,
                                      std::size_t set_size = 2, std::size_t max_contexts = 4096);

using ContextSets = std::vector<std::vector<std::vector<double>>>;  // [arm][element][coordinate]

struct LinearCbPositive {
  FamilyInstance family;
  /// For each member's (lowest-index) optimal policy, contexts whose chosen
  /// vectors span R^d.
  std::vector<std::vector<std::size_t>> span_witness;
};

/// Contexts are the product of the per-arm sets; values are snapped to a
/// 2^-32 grid. Throws if some S_a does not span R^d.
LinearCbPositive gen_linear_cb_positive(const ContextSets& sets,
                                        const std::vector<std::vector<double>>& thetas,
                                        std::size_t true_index, std::size_t max_contexts = 4096);

/// S_a = {base[a] + eps e_i : i < d}.
ContextSets perturbation_sets(const std::vector<std::vector<double>>& base, double eps);

/// Decodes a product-context index into one element index per arm.
std::vector<std::size_t> product_context(const ContextSets& sets, std::size_t index);

/// Greedy span construction for a policy given as one arm per context.
std::vector<std::size_t> span_witness(const ContextSets& sets, const std::vector<std::size_t>& policy);

LinearCbPositive gen_linear_cb_positive_random(std::size_t d, std::size_t arms, double eps, RngStream& rng);

// -- Lipschitz ------------------------------------------------------------------

/// Metric and rewards are numerators on the eps grid of [0,1]. `arm` defaults
/// to the lowest-index arm with 0 < f(a) < max f.
FamilyInstance lipschitz_decoy(const std::vector<std::vector<std::int64_t>>& metric, double eps,
                               const std::vector<std::int64_t>& f,
                               std::optional<std::size_t> arm = std::nullopt);
FamilyInstance gen_lipschitz(std::size_t points, double eps, RngStream& rng);

/// Contextual variant: metric over (x,a) pairs indexed x*K + a; `policy`
/// defaults per context to the lowest qualifying arm.
FamilyInstance lipschitz_cb_decoy(std::size_t contexts, std::size_t arms,
                                  const std::vector<std::vector<std::int64_t>>& metric, double eps,
                                  const std::vector<std::int64_t>& f,
                                  std::optional<std::vector<std::size_t>> policy = std::nullopt);
FamilyInstance gen_lipschitz_cb(std::size_t contexts, std::size_t arms, double eps, RngStream& rng);

// -- polynomial and quadratic -----------------------------------------------------

struct PolynomialDecoy {
  FamilyInstance family;
  std::vector<std::int64_t> theta_num;      // theta_q = n_q eps^(p+1-q)
  std::vector<std::int64_t> decoy_num;
  std::vector<double> theta;
  std::vector<double> decoy_theta;
  std::size_t best_arm = 0;                 // index k of a* = k eps
  bool well_shaped_heuristic = true;        // finite ray scan only
  double max_identity_error = 0.0;          // pointwise check of the shift identity
};

/// Arms [0, 1/2]_eps; ray_points extra grid points are scanned past max A
/// (default 4/eps) for the well-shapedness check.
PolynomialDecoy polynomial_decoy(std::size_t p, double eps, const std::vector<std::int64_t>& theta_num,
                                 std::optional<std::size_t> ray_points = std::nullopt);
PolynomialDecoy gen_polynomial(std::size_t p, double eps, double gamma, const std::vector<double>& theta);
PolynomialDecoy gen_polynomial_random(std::size_t p, double eps, RngStream& rng, std::size_t max_tries = 20000);

/// Real-valued decoy coefficients by the closed form, for cross-checks.
std::vector<double> polynomial_decoy_coefficients(const std::vector<double>& theta, double eps,
                                                  double a_star);
double polynomial_value(const std::vector<double>& theta, double a);

struct QuadraticDecoy {
  FamilyInstance family;
  std::int64_t g = 0, j = 0, n = 0;        // gamma = g eps, mu = j eps, c = n eps^3
  std::int64_t decoy_j = 0, decoy_n = 0;
};

QuadraticDecoy quadratic_decoy(double eps, std::int64_t g, std::int64_t j, std::int64_t n);
QuadraticDecoy gen_quadratic(double eps, double gamma, double mu, double c);
QuadraticDecoy gen_quadratic_random(double eps, RngStream& rng);

// -- materialization ------------------------------------------------------------------

/// {f*, f_dec} plus extra members, all required to lie on the value grid.
FunctionClass materialize_finite_class(const FamilyInstance& family,
                                       const std::vector<RewardTable>& extra = {});

/// Rebuilds the instance over the materialized class and recomputes the
/// certificate for the same decoy table.
FamilyInstance with_distractors(const FamilyInstance& family, const std::vector<RewardTable>& extra);

}  // namespace greedytrap
