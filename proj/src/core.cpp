#include "greedytrap/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace greedytrap {

namespace {

std::string tie_message(std::size_t context, const std::vector<std::size_t>& arms,
                        std::optional<std::size_t> round) {
  std::ostringstream os;
  os << "tie in argmax at context " << context << " between arms [";
  for (std::size_t i = 0; i < arms.size(); ++i) os << (i ? "," : "") << arms[i];
  os << "]";
  if (round) os << " in round " << *round;
  return os.str();
}

}  // namespace

TieError::TieError(std::size_t context_, std::vector<std::size_t> arms_,
                   std::optional<std::size_t> round_)
    : Error(tie_message(context_, arms_, round_)),
      context(context_),
      arms(std::move(arms_)),
      round(round_) {}

// ---------------------------------------------------------------------------

RewardTable::RewardTable(std::size_t contexts, std::size_t arms, std::vector<double> values)
    : contexts_(contexts), arms_(arms), values_(std::move(values)) {
  if (contexts_ == 0 || arms_ == 0) throw ShapeError("reward table needs at least one context and one arm");
  if (values_.size() != contexts_ * arms_) throw ShapeError("reward table size does not match contexts x arms");
  for (double v : values_)
    if (!std::isfinite(v)) throw PreconditionError("reward table entries must be finite");
}

RewardTable RewardTable::mab(std::vector<double> values) {
  const std::size_t k = values.size();
  return RewardTable(1, k, std::move(values));
}

RewardTable RewardTable::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ShapeError("reward table needs at least one row");
  const std::size_t k = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * k);
  for (const auto& r : rows) {
    if (r.size() != k) throw ShapeError("reward table rows must be rectangular");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return RewardTable(rows.size(), k, std::move(flat));
}

// ---------------------------------------------------------------------------

FunctionClass::FunctionClass(std::vector<RewardTable> members, bool best_arm_unique)
    : members_(std::move(members)), best_arm_unique_(best_arm_unique) {
  if (members_.empty()) throw PreconditionError("function class must be nonempty");
  for (std::size_t i = 1; i < members_.size(); ++i)
    if (!members_[i].same_shape(members_[0]))
      throw ShapeError("function class members must share one shape");
  for (std::size_t i = 0; i < members_.size(); ++i)
    for (std::size_t j = i + 1; j < members_.size(); ++j)
      if (members_[i] == members_[j]) {
        std::ostringstream os;
        os << "duplicate function class members " << i << " and " << j;
        throw PreconditionError(os.str());
      }
  if (best_arm_unique_) {
    for (std::size_t i = 0; i < members_.size(); ++i) {
      const auto& f = members_[i];
      for (std::size_t x = 0; x < f.contexts(); ++x) {
        auto row = f.row(x);
        const double top = *std::max_element(row.begin(), row.end());
        if (std::count(row.begin(), row.end(), top) > 1) {
          std::ostringstream os;
          os << "member " << i << " has a tied best arm at context " << x
             << " but the class is declared best-arm-unique";
          throw PreconditionError(os.str());
        }
      }
    }
  }
}

std::optional<std::size_t> FunctionClass::index_of(const RewardTable& f) const {
  for (std::size_t i = 0; i < members_.size(); ++i)
    if (members_[i] == f) return i;
  return std::nullopt;
}

WarmupSpec uniform_warmup(std::size_t contexts, std::size_t arms, std::size_t per_pair) {
  return WarmupSpec(contexts, std::vector<std::size_t>(arms, per_pair));
}

// ---------------------------------------------------------------------------

ProblemInstance::ProblemInstance(FunctionClass cls, std::size_t true_index, double sigma,
                                 std::vector<double> context_probs, WarmupSpec warmup,
                                 bool bounded_rewards)
    : class_(std::move(cls)),
      true_index_(true_index),
      sigma_(sigma),
      context_probs_(std::move(context_probs)),
      warmup_(std::move(warmup)),
      bounded_rewards_(bounded_rewards) {
  if (true_index_ >= class_.size()) throw PreconditionError("true_index outside the function class");
  if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw PreconditionError("sigma must be finite and >= 0");
  const std::size_t X = class_.contexts();
  const std::size_t K = class_.arms();
  if (context_probs_.empty()) context_probs_.assign(X, 1.0 / static_cast<double>(X));
  if (context_probs_.size() != X) throw ShapeError("context_probs length differs from number of contexts");
  double total = 0.0;
  for (double p : context_probs_) {
    if (!(p > 0.0)) throw PreconditionError("every context probability must be > 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw PreconditionError("context_probs must sum to 1");
  p0_ = *std::min_element(context_probs_.begin(), context_probs_.end());
  if (warmup_.empty()) warmup_ = uniform_warmup(X, K, 0);
  if (warmup_.size() != X) throw ShapeError("warm-up spec must have one row per context");
  for (const auto& row : warmup_)
    if (row.size() != K) throw ShapeError("warm-up spec rows must have one count per arm");
  if (bounded_rewards_) {
    for (const auto& f : class_.members())
      for (double v : f.values())
        if (v < 0.0 || v > 1.0)
          throw PreconditionError("bounded_rewards instance has a mean outside [0,1]");
  }
}

std::size_t ProblemInstance::warmup_total() const {
  std::size_t total = 0;
  for (const auto& row : warmup_) total = std::accumulate(row.begin(), row.end(), total);
  return total;
}

ProblemInstance ProblemInstance::with_sigma(double sigma) const {
  ProblemInstance copy = *this;
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw PreconditionError("sigma must be finite and >= 0");
  copy.sigma_ = sigma;
  return copy;
}

ProblemInstance ProblemInstance::with_warmup(WarmupSpec warmup) const {
  ProblemInstance copy(class_, true_index_, sigma_, context_probs_, std::move(warmup), bounded_rewards_);
  copy.grid_eps = grid_eps;
  copy.decoy_hint = decoy_hint;
  return copy;
}

ProblemInstance make_mab_instance(std::vector<std::vector<double>> members,
                                  std::size_t true_index, double sigma,
                                  std::size_t warmup_per_arm) {
  std::vector<RewardTable> tables;
  tables.reserve(members.size());
  for (auto& m : members) tables.push_back(RewardTable::mab(std::move(m)));
  const std::size_t K = tables.front().arms();
  return ProblemInstance(FunctionClass(std::move(tables)), true_index, sigma, {1.0},
                         uniform_warmup(1, K, warmup_per_arm));
}

// ---------------------------------------------------------------------------

History::History(std::size_t contexts, std::size_t arms)
    : contexts_(contexts), arms_(arms), counts_(contexts * arms, 0), sums_(contexts * arms, 0.0) {}

void History::record(ContextIndex context, ArmIndex arm, double reward) {
  if (context.value >= contexts_ || arm.value >= arms_)
    throw ShapeError("history record outside the (context, arm) grid");
  const std::size_t i = context.value * arms_ + arm.value;
  counts_[i] += 1;
  sums_[i] += reward;
  rounds_.push_back({context.value, arm.value, reward});
}

std::optional<double> History::mean(std::size_t x, std::size_t a) const {
  const std::size_t i = x * arms_ + a;
  if (counts_[i] == 0) return std::nullopt;
  return sums_[i] / static_cast<double>(counts_[i]);
}

History History::replayed() const {
  History h(contexts_, arms_);
  for (const auto& r : rounds_) h.record({r.context}, {r.arm}, r.reward);
  h.warmup_rounds_ = warmup_rounds_;
  return h;
}

History record_round(History history, ContextIndex context, ArmIndex arm, double reward) {
  history.record(context, arm, reward);
  return history;
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t stream_id) {
  // splitmix64 finalizer over the combined key
  auto splitmix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return splitmix(splitmix(master_seed) ^ (stream_id * 0xd1342543de82ef95ULL + 1));
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id), engine_(mix_seed(master_seed, stream_id)) {}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

std::size_t RngStream::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

std::size_t RngStream::discrete(std::span<const double> probs) {
  const double u = uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

double sample_reward(const ProblemInstance& instance, ContextIndex context, ArmIndex arm,
                     RngStream& rng) {
  if (context.value >= instance.contexts() || arm.value >= instance.arms())
    throw ShapeError("sample_reward index outside the instance");
  const double z = rng.normal();
  const double mean = instance.truth()(context.value, arm.value);
  if (instance.sigma() == 0.0) return mean;
  return mean + instance.sigma() * z;
}

ContextIndex sample_context(std::span<const double> probs, RngStream& rng) {
  if (probs.size() <= 1) return {0};
  return {rng.discrete(probs)};
}

ContextIndex sample_context(const ProblemInstance& instance, RngStream& rng) {
  return sample_context(std::span<const double>(instance.context_probs()), rng);
}

}  // namespace greedytrap
