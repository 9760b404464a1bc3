// greedytrap command-line front end: analyze, generate, simulate, estimate-pdec, version.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "greedytrap/analysis.hpp"
#include "greedytrap/continuum.hpp"
#include "greedytrap/dmso.hpp"
#include "greedytrap/experiments.hpp"
#include "greedytrap/families.hpp"
#include "greedytrap/greedy.hpp"
#include "greedytrap/instance_io.hpp"

namespace gt = greedytrap;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvariant = 2;

struct UsageError : gt::Error {
  using gt::Error::Error;
};

json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

bool has_ties(const gt::FunctionClass& cls) {
  for (const auto& f : cls.members())
    for (const auto& s : gt::optimal_arm_sets(f))
      if (s.size() > 1) return true;
  return false;
}

std::vector<gt::DecoyCertificate> decoys_of(const gt::ProblemInstance& inst) {
  return has_ties(inst.function_class()) ? gt::find_decoys_with_ties(inst) : gt::find_decoys(inst);
}

/// decoy_hint if present (must be a decoy), else the decoy with the largest gap.
std::optional<gt::DecoyCertificate> pick_decoy(const gt::ProblemInstance& inst) {
  const auto all = decoys_of(inst);
  if (inst.decoy_hint) {
    for (const auto& d : all)
      if (d.member == *inst.decoy_hint) return d;
    throw UsageError("decoy_hint " + std::to_string(*inst.decoy_hint) + " is not a decoy of the true member");
  }
  if (all.empty()) return std::nullopt;
  return all.front();
}

json policy_json(const gt::Policy& p) { return p.arms; }

json certificate_json(const gt::DecoyCertificate& c) {
  return json{{"member", c.member},
              {"decoy_policy", policy_json(c.decoy_policy)},
              {"optimal_sets", c.optimal_sets},
              {"decoy_gap", num(c.decoy_gap)},
              {"regret_per_round", c.regret_per_round}};
}

std::string fmt(double v) { return gt::format_double(v); }

// -- analyze ----------------------------------------------------------------------------

json analyze_finite(const gt::ProblemInstance& inst, std::ostream& out) {
  const bool ties = has_ties(inst.function_class());
  const auto gap = gt::function_gap(inst.truth(), inst.function_class());
  const auto sid = gt::is_self_identifiable(inst, ties ? gt::TieHandling::Ties : gt::TieHandling::Strict);
  const auto decoys = decoys_of(inst);

  json r;
  r["members"] = inst.function_class().size();
  r["contexts"] = inst.contexts();
  r["arms"] = inst.arms();
  r["tie_handling"] = ties ? "ties" : "strict";
  r["function_gap"] = num(gap.gap);
  if (gap.witness)
    r["gap_witness"] = {{"member", gap.witness->member}, {"context", gap.witness->context}, {"arm", gap.witness->arm}};
  r["self_identifiable"] = sid.self_identifiable;
  if (sid.witness) r["witness"] = {{"member", sid.witness->member}, {"policy", policy_json(sid.witness->policy)}};
  json dl = json::array();
  for (const auto& d : decoys) {
    json c = certificate_json(d);
    c["verified"] = gt::verify_certificate(inst, d, ties ? gt::TieHandling::Ties : gt::TieHandling::Strict).empty();
    dl.push_back(c);
  }
  r["decoys"] = dl;
  r["verdict"] = sid.self_identifiable ? "self-identifiable" : "not self-identifiable";
  r["branch"] = sid.self_identifiable ? "Greedy succeeds" : "Greedy fails for some warm-up data";
  if (inst.decoy_hint) {
    bool ok = false;
    for (const auto& d : decoys) ok = ok || d.member == *inst.decoy_hint;
    r["decoy_hint"] = *inst.decoy_hint;
    r["decoy_hint_verified"] = ok;
  }

  out << "instance: " << inst.function_class().size() << " members, " << inst.contexts() << " context(s), "
      << inst.arms() << " arms\n";
  out << "function gap of f*: " << (gap.infinite() ? std::string("+inf") : fmt(gap.gap)) << "\n";
  out << "verdict: " << r["verdict"].get<std::string>();
  if (sid.witness) {
    out << " (witness: member " << sid.witness->member << ", policy [";
    for (std::size_t i = 0; i < sid.witness->policy.arms.size(); ++i)
      out << (i ? "," : "") << sid.witness->policy.arms[i];
    out << "])";
  }
  out << "\n";
  out << "decoys: " << decoys.size() << "\n";
  for (const auto& d : decoys) {
    out << "  member " << d.member << ": policy [";
    for (std::size_t i = 0; i < d.decoy_policy.arms.size(); ++i) out << (i ? "," : "") << d.decoy_policy.arms[i];
    out << "], decoy gap " << (std::isinf(d.decoy_gap) ? std::string("+inf") : fmt(d.decoy_gap))
        << ", regret per round " << fmt(d.regret_per_round) << "\n";
  }
  out << "branch: " << r["branch"].get<std::string>() << "\n";
  return r;
}

json analyze_continuum(const gt::ContinuumInstance& c, std::ostream& out) {
  json r;
  const auto rep = gt::is_eps_self_identifiable(c.truth, c.cls, c.eps);
  r["arms"] = c.truth.arms();
  r["eps"] = c.eps;
  r["class"] = c.cls.description;
  r["eps_self_identifiable"] = rep.holds;
  if (rep.witness) r["witness"] = {{"arm", rep.witness->arm}, {"member", rep.witness->member.values()}};
  out << "continuum instance: " << c.truth.arms() << " arms, eps " << fmt(c.eps) << ", class " << c.cls.description
      << "\n";
  out << "eps-self-identifiable: " << (rep.holds ? "yes" : "no");
  if (rep.witness) out << " (witness arm " << rep.witness->arm << ")";
  out << "\n";
  if (c.decoy) {
    const std::string why = gt::verify_continuum_decoy(c.truth, *c.decoy, c.cls, c.eps);
    r["decoy"] = {{"arm", c.decoy->arm}, {"table", c.decoy->decoy.values()}, {"verified", why.empty()}};
    if (!why.empty()) r["decoy"]["problem"] = why;
    out << "decoy on arm " << c.decoy->arm << ": " << (why.empty() ? "verified" : why) << "\n";
  }
  r["branch"] = rep.holds ? "Greedy succeeds" : (c.decoy ? "Greedy fails for some warm-up data" : "undecided");
  out << "branch: " << r["branch"].get<std::string>() << "\n";
  return r;
}

json analyze_dmso(const gt::ModelClass& m, std::optional<std::size_t> hint, std::ostream& out) {
  json r;
  const double gap = gt::model_gap(m);
  const auto decoys = gt::find_model_decoys(m);
  r["members"] = m.size();
  r["policies"] = m.policies();
  r["outcomes"] = m.space().size();
  r["model_gap"] = num(gap);
  r["bound_b"] = num(m.bound_b());
  if (std::isfinite(m.log_b()))
    r["default_n0"] = gt::default_n0(m);
  else
    r["default_n0"] = nullptr;
  r["self_identifiable"] = decoys.empty();
  json dl = json::array();
  for (const auto& d : decoys)
    dl.push_back({{"member", d.member}, {"policy", d.policy}, {"regret_per_round", d.regret_per_round}});
  r["decoys"] = dl;
  r["verdict"] = decoys.empty() ? "self-identifiable" : "not self-identifiable";
  r["branch"] = decoys.empty() ? "Greedy succeeds" : "Greedy fails for some warm-up data";
  if (hint) {
    bool ok = false;
    for (const auto& d : decoys) ok = ok || d.member == *hint;
    r["decoy_hint"] = *hint;
    r["decoy_hint_verified"] = ok;
  }
  out << "model class: " << m.size() << " members, " << m.policies() << " policies, " << m.space().size()
      << " outcomes\n";
  out << "model gap: " << (std::isinf(gap) ? std::string("+inf") : fmt(gap)) << ", B = " << fmt(m.bound_b()) << "\n";
  out << "verdict: " << r["verdict"].get<std::string>() << "\n";
  out << "decoys: " << decoys.size() << "\n";
  for (const auto& d : decoys)
    out << "  member " << d.member << ": policy " << d.policy << ", regret per round " << fmt(d.regret_per_round)
        << "\n";
  out << "branch: " << r["branch"].get<std::string>() << "\n";
  return r;
}

json analyze(const gt::InstanceFile& f, std::ostream& out) {
  json r;
  switch (f.kind) {
    case gt::InstanceKind::Mab:
    case gt::InstanceKind::Cb: r = analyze_finite(*f.finite, out); break;
    case gt::InstanceKind::Continuum: r = analyze_continuum(*f.continuum, out); break;
    case gt::InstanceKind::Dmso: r = analyze_dmso(*f.models, f.decoy_hint, out); break;
  }
  r["kind"] = gt::kind_name(f.kind);
  return r;
}

// -- generate ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string family;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<double> eps, sigma, gamma, mu, c, radius;
  std::optional<std::size_t> d, arms, contexts, points, degree;
  std::vector<std::int64_t> f_values;
  std::string metric_json;
};

std::vector<std::vector<std::int64_t>> parse_metric(const std::string& text, std::size_t n) {
  json m;
  try {
    m = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("--metric is not valid JSON: ") + e.what());
  }
  if (!m.is_array() || m.size() != n) throw UsageError("--metric must be an n x n integer matrix");
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& row : m) {
    if (!row.is_array() || row.size() != n) throw UsageError("--metric must be an n x n integer matrix");
    std::vector<std::int64_t> r;
    for (const auto& v : row) {
      if (!v.is_number_integer()) throw UsageError("--metric entries must be integers");
      r.push_back(v.get<std::int64_t>());
    }
    out.push_back(r);
  }
  return out;
}

gt::ContinuumInstance gen_l2ball(std::size_t K, double eps, double R, gt::RngStream& rng) {
  if (K < 2) throw gt::PreconditionError("l2ball family needs at least 2 arms");
  if (!(R > eps)) throw gt::PreconditionError("l2ball family needs radius > eps");
  const double s = (R - eps) / (2.0 * std::sqrt(static_cast<double>(K)));
  std::vector<double> centre(K, 0.5), truth(K);
  for (std::size_t a = 0; a < K; ++a) truth[a] = 0.5 + s * (2.0 * rng.uniform() - 1.0);
  std::size_t lo = 0;
  for (std::size_t a = 1; a < K; ++a)
    if (truth[a] < truth[lo]) lo = a;
  std::vector<double> dec(K, truth[lo] - 0.5 * s);
  dec[lo] = truth[lo];
  gt::ContinuumInstance c;
  c.cls = gt::l2_ball(gt::RewardTable::mab(centre), R);
  c.truth = gt::RewardTable::mab(truth);
  c.eps = eps;
  c.decoy = gt::ContinuumDecoy{gt::RewardTable::mab(dec), lo};
  const std::string why = gt::verify_continuum_decoy(c.truth, *c.decoy, c.cls, eps);
  if (!why.empty()) throw gt::Error("l2ball decoy failed verification: " + why);
  c.sigma = gt::e2_sigma_continuum(eps, K);
  return c;
}

int cmd_generate(const GenerateArgs& a) {
  gt::RngStream rng(a.seed, 0);
  const std::string& fam = a.family;
  if (fam == "l2ball") {
    gt::ContinuumInstance c = gen_l2ball(a.arms.value_or(3), a.eps.value_or(0.05), a.radius.value_or(0.3), rng);
    if (a.sigma) c.sigma = *a.sigma;
    gt::save_instance(gt::continuum_file(c), a.out);
    std::cout << "wrote " << a.out << "\n";
    std::cout << "decoy on arm " << c.decoy->arm << ", sigma " << fmt(c.sigma) << "\n";
    return kExitOk;
  }

  gt::FamilyInstance fi;
  if (fam == "linear") {
    fi = gt::gen_linear_bandit(a.d.value_or(3), a.eps.value_or(0.125), rng);
  } else if (fam == "linear-cb-neg") {
    fi = gt::gen_linear_cb_negative(a.d.value_or(3), a.eps.value_or(0.25), a.arms.value_or(3), rng);
  } else if (fam == "linear-cb-pos") {
    fi = gt::gen_linear_cb_positive_random(a.d.value_or(2), a.arms.value_or(2), a.eps.value_or(0.1), rng).family;
  } else if (fam == "lipschitz") {
    const double eps = a.eps.value_or(0.1);
    if (!a.f_values.empty()) {
      const std::size_t n = a.f_values.size();
      std::vector<std::vector<std::int64_t>> metric;
      if (!a.metric_json.empty()) {
        metric = parse_metric(a.metric_json, n);
      } else {
        const auto full = static_cast<std::int64_t>(std::floor(1.0 / eps + 1e-9));
        metric.assign(n, std::vector<std::int64_t>(n, full));
        for (std::size_t i = 0; i < n; ++i) metric[i][i] = 0;
      }
      fi = gt::lipschitz_decoy(metric, eps, a.f_values);
    } else {
      fi = gt::gen_lipschitz(a.points.value_or(5), eps, rng);
    }
  } else if (fam == "lipschitz-cb") {
    fi = gt::gen_lipschitz_cb(a.contexts.value_or(2), a.arms.value_or(3), a.eps.value_or(0.1), rng);
  } else if (fam == "polynomial") {
    fi = gt::gen_polynomial_random(a.degree.value_or(2), a.eps.value_or(0.05), rng).family;
  } else if (fam == "quadratic") {
    const double eps = a.eps.value_or(0.25);
    if (a.gamma || a.mu || a.c) {
      if (!(a.gamma && a.mu && a.c)) throw UsageError("quadratic needs all of --gamma, --mu and --c");
      fi = gt::gen_quadratic(eps, *a.gamma, *a.mu, *a.c).family;
    } else {
      fi = gt::gen_quadratic_random(eps, rng).family;
    }
  } else {
    throw UsageError("unknown family \"" + fam + "\"");
  }

  double sigma = 0.1;
  if (a.sigma) sigma = *a.sigma;
  else if (fi.certificate) sigma = gt::e2_sigma_for(*fi.certificate);
  gt::ProblemInstance inst = fi.instance.with_sigma(sigma);
  gt::save_instance(gt::finite_file(inst), a.out);
  std::cout << "wrote " << a.out << " (" << fi.family << ", " << inst.function_class().size() << " members, "
            << inst.contexts() << " context(s), " << inst.arms() << " arms)\n";
  if (fi.certificate) std::cout << "certificate: " << certificate_json(*fi.certificate).dump() << "\n";
  else std::cout << "no decoy certificate\n";
  return kExitOk;
}

// -- simulate / estimate-pdec --------------------------------------------------------------

gt::TieMode parse_tie_mode(const std::string& s) {
  if (s == "strict") return gt::TieMode::strict();
  if (s.rfind("randomized", 0) == 0) {
    double q0 = 0.0;
    if (s.size() > 10) {
      if (s[10] != ':') throw UsageError("--tie-mode must be strict or randomized[:q0]");
      try {
        q0 = std::stod(s.substr(11));
      } catch (const std::exception&) {
        throw UsageError("--tie-mode randomized:q0 needs a number");
      }
    }
    return gt::TieMode::randomized(q0);
  }
  throw UsageError("--tie-mode must be strict or randomized[:q0]");
}

struct RunArgs {
  std::string instance;
  std::size_t horizon = 1000;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::string algo = "greedy";
  std::string tie_mode = "strict";
  bool force_e1 = false;
  std::string out;
  std::string trajectory_out;
  unsigned threads = 0;
  std::vector<std::size_t> checkpoints;
  std::optional<std::size_t> n0;
  std::string sigma_rule;
  std::optional<double> sigma;
};

json stuck_json(const gt::StuckEstimate& s) {
  json j{{"p_hat", s.p_hat},
         {"wilson_ci_95", {s.ci.lo, s.ci.hi}},
         {"trials", s.trials},
         {"stuck", s.stuck},
         {"e1e2_trials", s.e1e2_trials},
         {"e1e2_stuck", s.e1e2_stuck}};
  j["conditional_check"] = s.conditional_check ? json(*s.conditional_check) : json(nullptr);
  return j;
}

json regret_summary(const gt::ExperimentResult& r) {
  double sum = 0.0, sumsq = 0.0;
  std::size_t pulls = 0;
  for (const auto& t : r.trials) {
    sum += t.final_regret;
    sumsq += t.final_regret * t.final_regret;
    pulls += t.suboptimal_pulls;
  }
  const double n = static_cast<double>(r.trials.size());
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sumsq - n * mean * mean) / (n - 1)) : 0.0;
  return {{"mean_final_regret", mean},
          {"stderr_final_regret", std::sqrt(var / n)},
          {"mean_suboptimal_pulls", static_cast<double>(pulls) / n}};
}

json growth_json(const gt::ExperimentResult& r) {
  if (r.curve.mean.size() < 10 || r.warmup_rounds + 2 > r.curve.mean.size()) return nullptr;
  const auto g = gt::fit_growth(r.curve.mean, r.warmup_rounds);
  return {{"r2_log", g.r2_log},
          {"r2_linear", g.r2_linear},
          {"slope_log", g.slope_log},
          {"slope_linear", g.slope_linear},
          {"ratio_T_over_T10", num(g.ratio)},
          {"verdict", g.sublinear ? "sublinear" : "linear"}};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw gt::Error("cannot create output directory " + dir + ": " + ec.message());
}

std::string version_string() {
  return std::string("greedytrap ") + GREEDYTRAP_VERSION;
}

gt::ExperimentConfig config_from(const RunArgs& a) {
  gt::ExperimentConfig c;
  c.horizon = a.horizon;
  c.trials = a.trials;
  c.master_seed = a.seed;
  c.tie_mode = parse_tie_mode(a.tie_mode);
  c.force_e1 = a.force_e1;
  c.threads = gt::resolve_threads(a.threads);
  c.checkpoints = a.checkpoints;
  c.keep_curve = true;
  if (c.trials == 0) throw UsageError("--trials must be at least 1");
  return c;
}

json config_echo(const RunArgs& a, const gt::ExperimentConfig& c) {
  return {{"instance", std::filesystem::path(a.instance).filename().string()},
          {"horizon", c.horizon},
          {"trials", c.trials},
          {"seed", c.master_seed},
          {"algo", a.algo},
          {"tie_mode", a.tie_mode},
          {"force_e1", a.force_e1},
          {"checkpoints", c.checkpoints}};
}

/// Runs the requested algorithm; returns the result plus descriptive JSON.
struct RunOutcome {
  gt::ExperimentResult result;
  json info;
};

RunOutcome run_algorithm(const gt::InstanceFile& f, const RunArgs& a, const gt::ExperimentConfig& c) {
  RunOutcome o;
  if (f.kind == gt::InstanceKind::Mab || f.kind == gt::InstanceKind::Cb) {
    gt::ProblemInstance inst = *f.finite;
    if (a.sigma) inst = inst.with_sigma(*a.sigma);
    o.info["sigma"] = inst.sigma();
    if (a.algo == "greedy") {
      const auto decoy = pick_decoy(inst);
      if (a.force_e1 && !decoy) throw UsageError("--force-e1 needs a decoy");
      o.result = gt::run_greedy_experiment(inst, decoy ? &*decoy : nullptr, c);
      if (decoy) o.info["decoy"] = certificate_json(*decoy);
    } else if (a.algo == "info-aware") {
      if (a.force_e1) throw UsageError("--force-e1 applies to greedy only");
      o.result = gt::info_aware_baseline(inst, c);
    } else if (a.algo == "greedy-mle") {
      if (a.force_e1) throw UsageError("--force-e1 applies to greedy only");
      const gt::ModelClass m = gt::embed_contextual(inst);
      std::optional<std::size_t> decoy;
      if (const auto d = pick_decoy(inst)) {
        for (const auto& md : gt::find_model_decoys(m))
          if (md.member == d->member) decoy = md.member;
      }
      const std::size_t n0 = a.n0.value_or(gt::default_n0(m));
      o.info["n0"] = n0;
      if (decoy) o.info["decoy_model"] = *decoy;
      o.result = gt::run_dmso_experiment(m, decoy, n0, c);
    } else {
      throw UsageError("unknown --algo \"" + a.algo + "\"");
    }
  } else if (f.kind == gt::InstanceKind::Continuum) {
    if (a.algo != "greedy") throw UsageError("continuum instances support --algo greedy only");
    gt::ContinuumInstance inst = *f.continuum;
    if (a.sigma) inst.sigma = *a.sigma;
    o.info["sigma"] = inst.sigma;
    if (a.force_e1 && !inst.decoy) throw UsageError("--force-e1 needs a decoy");
    o.result = gt::run_continuum_experiment(inst, c);
    if (inst.decoy) o.info["decoy"] = {{"arm", inst.decoy->arm}, {"table", inst.decoy->decoy.values()}};
  } else {
    if (a.algo != "greedy-mle" && a.algo != "greedy")
      throw UsageError("dmso instances support --algo greedy-mle only");
    if (a.force_e1) throw UsageError("--force-e1 is not available for dmso instances");
    const gt::ModelClass& m = *f.models;
    std::optional<std::size_t> decoy = f.decoy_hint;
    if (!decoy) {
      const auto ds = gt::find_model_decoys(m);
      if (!ds.empty()) decoy = ds.front().member;
    }
    const std::size_t n0 = a.n0 ? *a.n0 : f.n0 ? *f.n0 : gt::default_n0(m);
    o.info["n0"] = n0;
    if (decoy) o.info["decoy_model"] = *decoy;
    o.result = gt::run_dmso_experiment(m, decoy, n0, c);
  }
  return o;
}

int cmd_simulate(const RunArgs& a) {
  if (a.out.empty()) throw UsageError("--out is required");
  const gt::InstanceFile f = gt::load_instance(a.instance);
  const gt::ExperimentConfig c = config_from(a);
  RunOutcome run = run_algorithm(f, a, c);
  const auto& r = run.result;

  json summary;
  summary["schema_version"] = gt::kSchemaVersion;
  summary["version"] = version_string();
  summary["command"] = "simulate";
  summary["config"] = config_echo(a, c);
  summary["run"] = run.info;
  summary["warmup_rounds"] = r.warmup_rounds;
  summary["regret"] = regret_summary(r);
  summary["growth"] = growth_json(r);
  if (r.stuck) {
    summary["stuck"] = stuck_json(*r.stuck);
    summary["stuck_fraction"] = r.stuck->p_hat;
    summary["decoy_regret_per_round"] = r.decoy_regret_per_round;
  }
  summary["invariant_violations"] = r.invariant_violations;

  ensure_dir(a.out);
  const std::filesystem::path dir(a.out);
  gt::write_text_file((dir / "trials.csv").string(), gt::trials_csv(r, c.checkpoints));
  gt::write_text_file(a.trajectory_out.empty() ? (dir / "curve.csv").string() : a.trajectory_out,
                      gt::curve_csv(r.curve));
  gt::write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");

  std::cout << "trials " << r.trials.size() << ", mean final regret "
            << fmt(summary["regret"]["mean_final_regret"].get<double>());
  if (r.stuck) std::cout << ", stuck " << r.stuck->stuck << "/" << r.stuck->trials;
  if (!summary["growth"].is_null()) std::cout << ", growth " << summary["growth"]["verdict"].get<std::string>();
  std::cout << "\n";
  if (r.invariant_violations > 0) {
    std::cerr << "invariant violation: " << r.invariant_violations
              << " trial(s) broke a deterministic guarantee (see trials.csv)\n";
    return kExitInvariant;
  }
  return kExitOk;
}

int cmd_estimate_pdec(const RunArgs& a) {
  const gt::InstanceFile f = gt::load_instance(a.instance);
  RunArgs args = a;
  args.algo = f.kind == gt::InstanceKind::Dmso ? "greedy-mle" : "greedy";
  std::string rule = a.sigma_rule;
  json decoy_json;

  if (f.kind == gt::InstanceKind::Mab || f.kind == gt::InstanceKind::Cb) {
    const auto decoy = pick_decoy(*f.finite);
    if (!decoy) throw UsageError("no decoy");
    if (rule.empty()) rule = "paper-mab";
    if (rule == "paper-mab") args.sigma = gt::e2_sigma_for(*decoy);
    else if (rule == "paper-inf") throw UsageError("--sigma-rule paper-inf applies to continuum instances");
  } else if (f.kind == gt::InstanceKind::Continuum) {
    if (!f.continuum->decoy) throw UsageError("no decoy");
    if (rule.empty()) rule = "paper-inf";
    if (rule == "paper-inf") args.sigma = gt::e2_sigma_continuum(f.continuum->eps, f.continuum->truth.arms());
    else if (rule == "paper-mab") throw UsageError("--sigma-rule paper-mab applies to finite instances");
  } else {
    bool any = f.decoy_hint.has_value() || !gt::find_model_decoys(*f.models).empty();
    if (!any) throw UsageError("no decoy");
    if (rule.empty()) rule = "model";
    else if (rule != "model") throw UsageError("dmso instances have no noise scale; omit --sigma-rule");
  }
  if (rule.rfind("fixed:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double v = std::stod(rule.substr(6), &used);
      if (used != rule.size() - 6 || !(v >= 0.0)) throw std::invalid_argument("bad");
      args.sigma = v;
    } catch (const std::exception&) {
      throw UsageError("--sigma-rule fixed:v needs a nonnegative number");
    }
  } else if (rule != "paper-mab" && rule != "paper-inf" && rule != "model") {
    throw UsageError("--sigma-rule must be paper-mab, paper-inf or fixed:v");
  }

  const gt::ExperimentConfig c = config_from(args);
  RunOutcome run = run_algorithm(f, args, c);
  const auto& r = run.result;
  if (!r.stuck) throw UsageError("no decoy");

  json j;
  j["schema_version"] = gt::kSchemaVersion;
  j["version"] = version_string();
  j["command"] = "estimate-pdec";
  j["config"] = config_echo(args, c);
  j["sigma_rule"] = rule;
  if (run.info.contains("sigma")) j["sigma"] = run.info["sigma"];
  if (run.info.contains("decoy")) j["decoy"] = run.info["decoy"];
  if (run.info.contains("decoy_model")) j["decoy"] = {{"member", run.info["decoy_model"]}};
  const json s = stuck_json(*r.stuck);
  for (auto it = s.begin(); it != s.end(); ++it) j[it.key()] = it.value();
  j["invariant_violations"] = r.invariant_violations;

  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) std::cout << text;
  else gt::write_text_file(a.out, text);
  if (r.invariant_violations > 0) {
    std::cerr << "invariant violation: an E1-and-E2 trial was not stuck\n";
    return kExitInvariant;
  }
  return kExitOk;
}

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("instance", a.instance, "Instance JSON file")->required()->check(CLI::ExistingFile);
  sub->add_option("--horizon", a.horizon, "Total rounds T including warm-up")->capture_default_str();
  sub->add_option("--trials", a.trials, "Independent episodes")->capture_default_str();
  sub->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  sub->add_option("--tie-mode", a.tie_mode, "strict or randomized[:q0]")->capture_default_str();
  sub->add_flag("--force-e1", a.force_e1, "Plant warm-up rewards at the E1 band centres");
  sub->add_option("--threads", a.threads, "Worker threads (default: GREEDYTRAP_THREADS or 1)");
  sub->add_option("--checkpoints", a.checkpoints, "Rounds at which per-trial regret is reported")->delimiter(',');
  sub->add_option("--n0", a.n0, "Warm-up samples per policy for MLE-Greedy");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greedytrap: when does Greedy get stuck? Analysis, generators and Monte Carlo experiments"};
  app.require_subcommand(1);

  std::string analyze_path, analyze_json;
  auto* an = app.add_subcommand("analyze", "Gap, self-identifiability verdict and decoy list for an instance");
  an->add_option("instance", analyze_path, "Instance JSON file")->required()->check(CLI::ExistingFile);
  an->add_option("--json", analyze_json, "Also write the report as JSON to this path");

  GenerateArgs gen;
  auto* ge = app.add_subcommand("generate", "Generate an instance from a structured family");
  ge->add_option("--family", gen.family, "linear, linear-cb-pos, linear-cb-neg, lipschitz, lipschitz-cb, polynomial, quadratic, l2ball")
      ->required();
  ge->add_option("--seed", gen.seed, "Generator seed");
  ge->add_option("--out", gen.out, "Output instance path")->required();
  ge->add_option("--eps", gen.eps, "Grid resolution / interior radius");
  ge->add_option("--sigma", gen.sigma, "Noise scale written to the file");
  ge->add_option("--d", gen.d, "Dimension (linear families)");
  ge->add_option("--arms", gen.arms, "Number of arms");
  ge->add_option("--contexts", gen.contexts, "Number of contexts (lipschitz-cb)");
  ge->add_option("--points", gen.points, "Number of arms in the metric space (lipschitz)");
  ge->add_option("--degree", gen.degree, "Polynomial degree p");
  ge->add_option("--gamma", gen.gamma, "Quadratic curvature");
  ge->add_option("--mu", gen.mu, "Quadratic peak location");
  ge->add_option("--c", gen.c, "Quadratic offset");
  ge->add_option("--radius", gen.radius, "Ball radius (l2ball)");
  ge->add_option("--f", gen.f_values, "Lipschitz rewards as eps-grid numerators")->delimiter(',');
  ge->add_option("--metric", gen.metric_json, "Lipschitz metric as a JSON integer matrix (eps units)");

  RunArgs sim;
  auto* si = app.add_subcommand("simulate", "Run Greedy (or a baseline) for many trials");
  add_run_options(si, sim);
  si->add_option("--algo", sim.algo, "greedy, greedy-mle or info-aware")->capture_default_str();
  si->add_option("--out", sim.out, "Output directory for trials.csv, curve.csv and summary.json")->required();
  si->add_option("--trajectory-out", sim.trajectory_out, "Override path of the regret curve CSV");
  si->add_option("--sigma", sim.sigma, "Override the instance noise scale");

  RunArgs est;
  est.trials = 10000;
  auto* es = app.add_subcommand("estimate-pdec", "Estimate the stuck probability with a Wilson interval");
  add_run_options(es, est);
  es->add_option("--sigma-rule", est.sigma_rule, "paper-mab, paper-inf or fixed:v");
  es->add_option("--out", est.out, "Write the JSON estimate here instead of stdout");

  auto* ve = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*an) {
      const gt::InstanceFile f = gt::load_instance(analyze_path);
      const json report = analyze(f, std::cout);
      if (!analyze_json.empty()) gt::write_text_file(analyze_json, report.dump(2) + "\n");
      return kExitOk;
    }
    if (*ge) return cmd_generate(gen);
    if (*si) return cmd_simulate(sim);
    if (*es) return cmd_estimate_pdec(est);
    if (*ve) {
      std::cout << version_string() << "\n";
      return kExitOk;
    }
  } catch (const gt::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
