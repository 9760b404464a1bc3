#include "greedytrap/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace greedytrap {

namespace {

constexpr std::size_t kBlock = 64;

struct BlockResult {
  std::vector<TrialRecord> records;
  std::vector<double> sum, sumsq;
  std::size_t violations = 0;
};

std::vector<double> pick_checkpoints(const std::vector<double>& curve, const std::vector<std::size_t>& cps) {
  std::vector<double> out;
  out.reserve(cps.size());
  for (std::size_t t : cps)
    out.push_back(t >= 1 && t <= curve.size() ? curve[t - 1] : std::numeric_limits<double>::quiet_NaN());
  return out;
}

StuckEstimate summarize_stuck(const std::vector<TrialRecord>& records, std::size_t horizon) {
  StuckEstimate s;
  s.trials = records.size();
  for (const auto& r : records) {
    if (r.stuck) ++s.stuck;
    if (r.e1 && r.e2_through >= horizon) {
      ++s.e1e2_trials;
      if (r.stuck) ++s.e1e2_stuck;
    }
  }
  s.p_hat = s.trials ? static_cast<double>(s.stuck) / static_cast<double>(s.trials) : 0.0;
  s.ci = wilson_interval(s.stuck, s.trials);
  if (s.e1e2_trials)
    s.conditional_check = static_cast<double>(s.e1e2_stuck) / static_cast<double>(s.e1e2_trials);
  return s;
}

void check_config(const ExperimentConfig& c) {
  if (c.trials == 0) throw PreconditionError("trials must be at least 1");
}

double row_max(const RewardTable& f, std::size_t x) {
  const auto r = f.row(x);
  return *std::max_element(r.begin(), r.end());
}

std::size_t first_argmax(std::span<const double> r) {
  return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

}  // namespace

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  if (successes > trials) throw PreconditionError("successes exceed trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // Pin the degenerate ends so lo <= p_hat <= hi holds exactly.
  double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  lo = std::min(lo, p);
  hi = std::max(hi, p);
  return {lo, hi};
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GREEDYTRAP_THREADS")) {
    unsigned v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [p, ec] = std::from_chars(env, end, v);
    if (ec == std::errc() && p == end && v > 0) return v;
  }
  return 1;
}

ExperimentResult run_trials(std::size_t trials, unsigned threads, bool keep_curve,
                            const std::function<TrialOutcome(std::size_t)>& trial) {
  const std::size_t blocks = (trials + kBlock - 1) / kBlock;
  std::vector<BlockResult> out(blocks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        BlockResult& br = out[b];
        const std::size_t end = std::min(trials, (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) {
          TrialOutcome o = trial(i);
          br.violations += o.invariant_violations;
          if (keep_curve) {
            if (br.sum.empty()) {
              br.sum.assign(o.curve.size(), 0.0);
              br.sumsq.assign(o.curve.size(), 0.0);
            }
            if (o.curve.size() != br.sum.size()) throw Error("trials produced regret curves of different lengths");
            for (std::size_t t = 0; t < o.curve.size(); ++t) {
              br.sum[t] += o.curve[t];
              br.sumsq[t] += o.curve[t] * o.curve[t];
            }
          }
          br.records.push_back(std::move(o.record));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult res;
  res.trials.reserve(trials);
  std::vector<double> sum, sumsq;
  for (auto& br : out) {
    res.invariant_violations += br.violations;
    for (auto& r : br.records) res.trials.push_back(std::move(r));
    if (!keep_curve || br.sum.empty()) continue;
    if (sum.empty()) {
      sum.assign(br.sum.size(), 0.0);
      sumsq.assign(br.sum.size(), 0.0);
    }
    if (br.sum.size() != sum.size()) throw Error("trials produced regret curves of different lengths");
    for (std::size_t t = 0; t < sum.size(); ++t) {
      sum[t] += br.sum[t];
      sumsq[t] += br.sumsq[t];
    }
  }
  if (keep_curve && trials > 0) {
    const double m = static_cast<double>(trials);
    res.curve.mean.resize(sum.size());
    res.curve.stderr_.resize(sum.size());
    for (std::size_t t = 0; t < sum.size(); ++t) {
      const double mean = sum[t] / m;
      res.curve.mean[t] = mean;
      double var = trials > 1 ? (sumsq[t] - m * mean * mean) / (m - 1.0) : 0.0;
      if (var < 0.0) var = 0.0;
      res.curve.stderr_[t] = std::sqrt(var / m);
    }
  }
  return res;
}

ExperimentResult run_greedy_experiment(const ProblemInstance& instance, const DecoyCertificate* decoy,
                                       const ExperimentConfig& config) {
  check_config(config);
  const bool need_curve = config.keep_curve || !config.checkpoints.empty();
  auto trial = [&](std::size_t i) {
    RngStream rng(config.master_seed, i);
    EpisodeOptions opts;
    opts.decoy = decoy;
    opts.force_e1 = config.force_e1;
    opts.keep_regret_curve = need_curve;
    EpisodeResult ep = run_episode(instance, config.horizon, config.tie_mode, rng, opts);
    TrialOutcome o;
    o.record.trial = i;
    o.record.final_regret = ep.final_regret;
    o.record.warmup_regret = ep.warmup_regret;
    o.record.suboptimal_pulls = ep.suboptimal_pulls;
    o.record.regret_at_checkpoints = pick_checkpoints(ep.cumulative_regret, config.checkpoints);
    if (ep.diagnostics) {
      const auto& d = *ep.diagnostics;
      o.record.stuck = d.stuck_on_decoy;
      o.record.e1 = d.e1_held;
      o.record.e2_through = d.e2_held_through;
      o.record.first_deviation = d.first_deviation_round;
      if (d.e1_held && d.e2_held_through >= config.horizon && !d.stuck_on_decoy) o.invariant_violations = 1;
    }
    if (config.keep_curve) o.curve = std::move(ep.cumulative_regret);
    return o;
  };
  ExperimentResult res = run_trials(config.trials, resolve_threads(config.threads), config.keep_curve, trial);
  res.warmup_rounds = instance.warmup_total();
  if (decoy) {
    res.stuck = summarize_stuck(res.trials, config.horizon);
    res.decoy_regret_per_round = decoy->regret_per_round;
  }
  return res;
}

ExperimentResult estimate_stuck_probability(const ProblemInstance& instance,
                                            const std::optional<DecoyCertificate>& decoy,
                                            const ExperimentConfig& config) {
  if (!decoy) throw PreconditionError("no decoy");
  return run_greedy_experiment(instance, &*decoy, config);
}

ExperimentResult run_continuum_experiment(const ContinuumInstance& instance, const ExperimentConfig& config) {
  check_config(config);
  if (instance.decoy) {
    const std::string why = verify_continuum_decoy(instance.truth, *instance.decoy, instance.cls, instance.eps);
    if (!why.empty()) throw PreconditionError("invalid continuum decoy: " + why);
  }
  const bool need_curve = config.keep_curve || !config.checkpoints.empty();
  auto trial = [&](std::size_t i) {
    RngStream rng(config.master_seed, i);
    ContinuumOptions opts;
    opts.force_e1 = config.force_e1;
    opts.keep_regret_curve = need_curve;
    ContinuumEpisode ep = run_continuum_episode(instance, config.horizon, rng, opts);
    TrialOutcome o;
    o.record.trial = i;
    o.record.final_regret = ep.final_regret;
    o.record.warmup_regret = ep.warmup_rounds ? ep.cumulative_regret.empty() ? 0.0 : ep.cumulative_regret[ep.warmup_rounds - 1] : 0.0;
    o.record.suboptimal_pulls = ep.suboptimal_pulls;
    o.record.regret_at_checkpoints = pick_checkpoints(ep.cumulative_regret, config.checkpoints);
    if (ep.diagnostics) {
      const auto& d = *ep.diagnostics;
      o.record.stuck = d.stuck_on_decoy;
      o.record.e1 = d.e1_held;
      o.record.e2_through = d.e2_held_through;
      o.record.first_deviation = d.first_deviation_round;
      o.invariant_violations = d.chain_violations + d.distance_violations;
      if (d.e1_held && d.e2_held_through >= config.horizon && !d.stuck_on_decoy) ++o.invariant_violations;
    }
    if (config.keep_curve) o.curve = std::move(ep.cumulative_regret);
    return o;
  };
  ExperimentResult res = run_trials(config.trials, resolve_threads(config.threads), config.keep_curve, trial);
  res.warmup_rounds = instance.warmup_per_arm * instance.truth.arms();
  if (instance.decoy) {
    res.stuck = summarize_stuck(res.trials, config.horizon);
    const double best = *std::max_element(instance.truth.values().begin(), instance.truth.values().end());
    res.decoy_regret_per_round = best - instance.truth(0, instance.decoy->arm);
  }
  return res;
}

ExperimentResult run_dmso_experiment(const ModelClass& cls, std::optional<std::size_t> decoy, std::size_t n0,
                                     const ExperimentConfig& config) {
  check_config(config);
  std::optional<ModelDecoy> md;
  if (decoy) {
    for (const auto& d : find_model_decoys(cls))
      if (d.member == *decoy) md = d;
    if (!md) throw PreconditionError("designated model is not a decoy of the true model");
  }
  auto trial = [&](std::size_t i) {
    RngStream rng(config.master_seed, i);
    DmsoOptions opts;
    opts.decoy = decoy;
    DmsoEpisode ep = run_dmso_episode(cls, config.horizon, n0, rng, opts);
    TrialOutcome o;
    o.record.trial = i;
    o.record.final_regret = ep.final_regret;
    o.record.warmup_regret = ep.cumulative_regret[ep.warmup_rounds - 1];
    const std::size_t star = model_optimal_policy(cls, cls.true_index());
    for (std::size_t t = ep.warmup_rounds; t < ep.policies.size(); ++t)
      if (ep.policies[t] != star) ++o.record.suboptimal_pulls;
    o.record.regret_at_checkpoints = pick_checkpoints(ep.cumulative_regret, config.checkpoints);
    if (ep.diagnostics) {
      const auto& d = *ep.diagnostics;
      o.record.stuck = d.stuck_on_decoy;
      o.record.e1 = d.e1_held;
      o.record.e2_through = d.e2_held_through;
      o.record.first_deviation = d.first_deviation_round;
      if (d.e1_held && d.e2_held_through >= config.horizon && !d.stuck_on_decoy) o.invariant_violations = 1;
    }
    if (config.keep_curve) o.curve = std::move(ep.cumulative_regret);
    return o;
  };
  ExperimentResult res = run_trials(config.trials, resolve_threads(config.threads), config.keep_curve, trial);
  res.warmup_rounds = cls.policies() * n0;
  if (md) {
    res.stuck = summarize_stuck(res.trials, config.horizon);
    res.decoy_regret_per_round = md->regret_per_round;
  }
  return res;
}

RegretCurve regret_curve(const ProblemInstance& instance, const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.keep_curve = true;
  return run_greedy_experiment(instance, nullptr, c).curve;
}

// -- information-aware baseline ----------------------------------------------------------

double beta_t(std::size_t n, std::size_t t, std::size_t arms, std::size_t contexts, double delta) {
  if (n == 0 || t == 0) throw PreconditionError("beta_t needs n >= 1 and t >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("beta_t needs delta in (0, 1)");
  const double nn = static_cast<double>(n);
  const double arg = 10.0 * static_cast<double>(arms * contexts) * static_cast<double>(t) * nn * nn / (3.0 * delta);
  return std::sqrt((2.0 / nn) * std::log(arg));
}

InfoAwareEpisode run_info_aware_episode(const ProblemInstance& instance, std::size_t horizon, RngStream& rng,
                                        std::optional<double> delta, bool keep_curve) {
  const std::size_t T0 = instance.warmup_total();
  if (horizon <= T0) throw PreconditionError("horizon must exceed the warm-up length");
  const double d = delta.value_or(1.0 / static_cast<double>(horizon));
  const FunctionClass& cls = instance.function_class();
  const RewardTable& truth = instance.truth();
  const std::size_t X = instance.contexts(), K = instance.arms(), F = cls.size();
  const double sigma = instance.sigma();

  // Per-member lowest-index optimal policy.
  std::vector<std::vector<std::size_t>> member_policy(F, std::vector<std::size_t>(X));
  for (std::size_t m = 0; m < F; ++m)
    for (std::size_t x = 0; x < X; ++x) member_policy[m][x] = first_argmax(cls[m].row(x));

  // Policy enumeration for exclusion tracking (mixed radix, context 0 least significant).
  double count = 1.0;
  for (std::size_t x = 0; x < X; ++x) count *= static_cast<double>(K);
  const bool track = count <= 256.0;
  const std::size_t P = track ? static_cast<std::size_t>(count) : 0;
  std::vector<std::vector<std::size_t>> policies(P, std::vector<std::size_t>(X));
  for (std::size_t p = 0; p < P; ++p) {
    std::size_t code = p;
    for (std::size_t x = 0; x < X; ++x) {
      policies[p][x] = code % K;
      code /= K;
    }
  }
  auto encode = [&](const std::vector<std::size_t>& pol) {
    std::size_t code = 0;
    for (std::size_t x = X; x-- > 0;) code = code * K + pol[x];
    return code;
  };

  InfoAwareEpisode ep;
  ep.exclusion_pulls.assign(P, std::nullopt);
  History h = run_warmup(instance, rng);
  double regret = 0.0;
  if (keep_curve) ep.cumulative_regret.reserve(horizon);
  for (const Round& r : h.rounds()) {
    regret += row_max(truth, r.context) - truth(r.context, r.arm);
    if (keep_curve) ep.cumulative_regret.push_back(regret);
  }

  std::vector<char> consistent(F);
  std::vector<std::optional<double>> identified(X * K);
  std::vector<char> excluded_now(P, 0);  // identified-and-suboptimal at the current round
  for (std::size_t t = T0 + 1; t <= horizon; ++t) {
    // Band consistency at the start of round t.
    auto radius = [&](std::size_t n) { return sigma * beta_t(n, t, K, X, d); };
    bool any = false;
    for (std::size_t m = 0; m < F; ++m) {
      bool ok = true;
      for (std::size_t x = 0; x < X && ok; ++x)
        for (std::size_t a = 0; a < K && ok; ++a) {
          const std::size_t n = h.count(x, a);
          if (n == 0) continue;
          if (std::abs(*h.mean(x, a) - cls[m](x, a)) > radius(n)) ok = false;
        }
      consistent[m] = ok;
      any = any || ok;
    }

    if (track) {
      for (std::size_t x = 0; x < X; ++x)
        for (std::size_t a = 0; a < K; ++a) {
          auto& id = identified[x * K + a];
          id.reset();
          const std::size_t n = h.count(x, a);
          if (n == 0) continue;
          const double mean = *h.mean(x, a), r = radius(n);
          std::optional<double> only;
          bool unique = true;
          for (std::size_t m = 0; m < F && unique; ++m) {
            const double v = cls[m](x, a);
            if (std::abs(mean - v) > r) continue;
            if (only && *only != v) unique = false;
            only = v;
          }
          if (unique && only) id = only;
        }
      for (std::size_t p = 0; p < P; ++p) {
        excluded_now[p] = 0;
        bool all_id = true;
        for (std::size_t x = 0; x < X && all_id; ++x)
          if (!identified[x * K + policies[p][x]]) all_id = false;
        if (!all_id) continue;
        Policy pol{policies[p]};
        bool excluded = true;
        for (std::size_t m = 0; m < F && excluded; ++m) {
          bool agrees = true;
          for (std::size_t x = 0; x < X && agrees; ++x)
            if (cls[m](x, pol(x)) != *identified[x * K + pol(x)]) agrees = false;
          if (agrees && !is_suboptimal(cls[m], pol)) excluded = false;
        }
        excluded_now[p] = excluded;
        if (excluded && !ep.exclusion_pulls[p]) {
          std::size_t pulls = 0;
          for (std::size_t x = 0; x < X; ++x) pulls += h.count(x, pol(x));
          ep.exclusion_pulls[p] = pulls;
        }
      }
    }

    const ContextIndex x = sample_context(instance, rng);
    std::size_t arm = 0, via = 0;
    if (any) {
      bool found = false;
      for (std::size_t m = 0; m < F; ++m) {
        if (!consistent[m]) continue;
        const std::size_t a = member_policy[m][x.value];
        if (!found || h.count(x.value, a) < h.count(x.value, arm) ||
            (h.count(x.value, a) == h.count(x.value, arm) && a < arm)) {
          arm = a;
          via = m;
          found = true;
        }
      }
    } else {
      ++ep.fallback_rounds;
      via = regression_oracle(h, cls).member;
      arm = member_policy[via][x.value];
    }
    if (track && any && excluded_now[encode(member_policy[via])]) ++ep.excluded_plays;

    const double reward = sample_reward(instance, x, ArmIndex{arm}, rng);
    h.record(x, ArmIndex{arm}, reward);
    const double gap = row_max(truth, x.value) - truth(x.value, arm);
    regret += gap;
    if (gap > 0.0) ++ep.suboptimal_pulls;
    if (keep_curve) ep.cumulative_regret.push_back(regret);
  }
  ep.final_regret = regret;
  return ep;
}

ExperimentResult info_aware_baseline(const ProblemInstance& instance, const ExperimentConfig& config) {
  check_config(config);
  const bool need_curve = config.keep_curve || !config.checkpoints.empty();
  auto trial = [&](std::size_t i) {
    RngStream rng(config.master_seed, i);
    InfoAwareEpisode ep = run_info_aware_episode(instance, config.horizon, rng, std::nullopt, need_curve);
    TrialOutcome o;
    o.record.trial = i;
    o.record.final_regret = ep.final_regret;
    o.record.suboptimal_pulls = ep.suboptimal_pulls;
    o.record.regret_at_checkpoints = pick_checkpoints(ep.cumulative_regret, config.checkpoints);
    if (need_curve && instance.warmup_total() > 0)
      o.record.warmup_regret = ep.cumulative_regret[instance.warmup_total() - 1];
    o.invariant_violations = ep.excluded_plays;
    if (config.keep_curve) o.curve = std::move(ep.cumulative_regret);
    return o;
  };
  ExperimentResult res = run_trials(config.trials, resolve_threads(config.threads), config.keep_curve, trial);
  res.warmup_rounds = instance.warmup_total();
  return res;
}

// -- growth diagnostics -------------------------------------------------------------------

namespace {

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LineFit f;
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

}  // namespace

GrowthFit fit_growth(const std::vector<double>& curve, std::size_t t0) {
  const std::size_t T = curve.size();
  if (T < 10 || t0 + 2 > T) throw PreconditionError("fit_growth needs a curve extending past the warm-up");
  GrowthFit g;
  const double at_tenth = curve[T / 10 - 1];
  const double at_end = curve[T - 1];
  g.ratio = at_tenth > 0.0 ? at_end / at_tenth : (at_end == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  g.sublinear = g.ratio <= 2.5;

  // Geometric grid over (t0, T].
  std::vector<std::size_t> grid;
  const double lo = std::log(static_cast<double>(t0 + 1)), hi = std::log(static_cast<double>(T));
  constexpr int points = 40;
  for (int i = 0; i <= points; ++i) {
    const auto t = static_cast<std::size_t>(std::llround(std::exp(lo + (hi - lo) * i / points)));
    const std::size_t c = std::clamp<std::size_t>(t, t0 + 1, T);
    if (grid.empty() || grid.back() != c) grid.push_back(c);
  }
  std::vector<double> lt, tt, ys;
  for (std::size_t t : grid) {
    lt.push_back(std::log(static_cast<double>(t)));
    tt.push_back(static_cast<double>(t));
    ys.push_back(curve[t - 1]);
  }
  const LineFit a = least_squares(lt, ys), b = least_squares(tt, ys);
  g.r2_log = a.r2;
  g.slope_log = a.slope;
  g.r2_linear = b.r2;
  g.slope_linear = b.slope;
  return g;
}

// -- DMSO ghost process ------------------------------------------------------------------------

DmsoFailureResult dmso_failure_experiment(const ModelClass& cls, std::size_t decoy, std::size_t n0,
                                          std::size_t draws, std::uint64_t master_seed, unsigned threads,
                                          const std::optional<ExperimentConfig>& episodes) {
  if (draws == 0) throw PreconditionError("draws must be at least 1");
  const std::uint64_t ghost_seed = mix_seed(master_seed, 0x6768u);
  const std::uint64_t true_seed = mix_seed(master_seed, 0x7472u);
  auto trial = [&](std::size_t i) {
    TrialOutcome o;
    o.record.trial = i;
    RngStream g(ghost_seed, i), p(true_seed, i);
    o.record.e1 = sample_warmup_e1(cls, n0, decoy, true, g);     // ghost
    o.record.stuck = sample_warmup_e1(cls, n0, decoy, false, p); // true process
    return o;
  };
  const ExperimentResult r = run_trials(draws, resolve_threads(threads), false, trial);
  std::size_t q = 0, pp = 0;
  for (const auto& rec : r.trials) {
    q += rec.e1;
    pp += rec.stuck;
  }
  DmsoFailureResult res;
  const double n = static_cast<double>(draws);
  res.draws = draws;
  res.q_e1 = static_cast<double>(q) / n;
  res.p_e1 = static_cast<double>(pp) / n;
  res.q_stderr = std::sqrt(res.q_e1 * (1.0 - res.q_e1) / n);
  res.p_stderr = std::sqrt(res.p_e1 * (1.0 - res.p_e1) / n);
  res.log_b = cls.log_b();
  res.exponent = cls.policies() * n0;
  res.ratio_bound = res.q_e1 * std::exp(-static_cast<double>(res.exponent) * res.log_b);
  if (episodes) res.episodes = run_dmso_experiment(cls, decoy, n0, *episodes);
  return res;
}

// -- standard fixtures -----------------------------------------------------------------------

double e2_sigma_for(const DecoyCertificate& decoy) {
  std::size_t pairs = 0;
  for (const auto& s : decoy.optimal_sets) pairs += s.size();
  return e2_sigma(decoy.decoy_gap / 2.0, pairs);
}

double e2_sigma_continuum(double eps, std::size_t arms) { return e2_sigma(inf_event_radius(eps, arms), 1); }

namespace {

FiniteFixture finite_fixture(std::string name, std::vector<RewardTable> members, bool with_decoy,
                             std::optional<double> sigma) {
  const std::size_t X = members.front().contexts(), K = members.front().arms();
  FunctionClass cls(std::move(members), true);
  ProblemInstance probe(cls, 0, 0.0, std::vector<double>(X, 1.0 / static_cast<double>(X)),
                        uniform_warmup(X, K, 1));
  FiniteFixture f{std::move(name), probe, std::nullopt};
  if (with_decoy) {
    const auto decoys = find_decoys(probe);
    if (decoys.empty()) throw Error("fixture " + f.name + " has no decoy");
    f.decoy = decoys.front();
    f.instance = probe.with_sigma(sigma.value_or(e2_sigma_for(*f.decoy)));
    f.instance.decoy_hint = f.decoy->member;
  } else {
    f.instance = probe.with_sigma(*sigma);
  }
  return f;
}

}  // namespace

FiniteFixture fixture_mab_failure() {
  return finite_fixture("mab-failure", {RewardTable::mab({0.5, 0.9}), RewardTable::mab({0.5, 0.3})}, true,
                        std::nullopt);
}

FiniteFixture fixture_cb_failure() {
  return finite_fixture("cb-failure",
                        {RewardTable::from_rows({{0.5, 0.9}, {0.8, 0.2}}),
                         RewardTable::from_rows({{0.5, 0.3}, {0.8, 0.2}})},
                        true, std::nullopt);
}

FiniteFixture fixture_mab_success() {
  return finite_fixture("mab-success", {RewardTable::mab({0.5, 0.7, 0.9}), RewardTable::mab({0.8, 0.3, 0.6})},
                        false, 0.5);
}

FiniteFixture fixture_cb_success() {
  return finite_fixture("cb-success",
                        {RewardTable::from_rows({{0.5, 0.7}, {0.6, 0.2}}),
                         RewardTable::from_rows({{0.9, 0.4}, {0.3, 0.8}})},
                        false, 0.5);
}

ContinuumInstance fixture_continuum_failure() {
  ContinuumInstance c;
  c.cls = l2_ball(RewardTable::mab({0.5, 0.5}), 0.5);
  c.truth = RewardTable::mab({0.5, 0.502});
  c.eps = 0.2;
  c.decoy = ContinuumDecoy{RewardTable::mab({0.5, 0.498}), 0};
  c.sigma = e2_sigma_continuum(c.eps, 2);
  c.warmup_per_arm = 1;
  return c;
}

ContinuumInstance fixture_continuum_success() {
  ContinuumInstance c;
  c.cls = l2_ball(RewardTable::mab({0.5, 0.6}), 0.2);
  c.truth = RewardTable::mab({0.35, 0.65});
  c.eps = 0.05;
  c.sigma = 0.1;
  c.warmup_per_arm = 1;
  return c;
}

// -- output ---------------------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, p);
}

std::string trials_csv(const ExperimentResult& result, const std::vector<std::size_t>& checkpoints) {
  std::ostringstream os;
  os << "trial_id,stuck,e1,e2_through,first_deviation,final_regret,suboptimal_pulls";
  for (std::size_t t : checkpoints) os << ",regret_at_" << t;
  os << '\n';
  for (const auto& r : result.trials) {
    os << r.trial << ',' << (r.stuck ? 1 : 0) << ',' << (r.e1 ? 1 : 0) << ',' << r.e2_through << ',';
    if (r.first_deviation) os << *r.first_deviation;
    os << ',' << format_double(r.final_regret) << ',' << r.suboptimal_pulls;
    for (double v : r.regret_at_checkpoints) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

std::string curve_csv(const RegretCurve& curve) {
  std::ostringstream os;
  os << "t,mean_regret,stderr\n";
  for (std::size_t t = 0; t < curve.mean.size(); ++t)
    os << (t + 1) << ',' << format_double(curve.mean[t]) << ',' << format_double(curve.stderr_[t]) << '\n';
  return os.str();
}

}  // namespace greedytrap
