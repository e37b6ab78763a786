#include "absopf/active.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "absopf/errors.hpp"

namespace absopf::active {

std::vector<Bucket> partition(std::vector<sampling::Sample> validation, std::size_t k,
                              sampling::Interval range) {
  const std::size_t n = validation.size();
  if (k == 0) throw ValidationError("partition", "bucket count must be at least 1");
  if (k > n)
    throw ValidationError("partition", "more buckets (" + std::to_string(k) + ") than validation samples (" +
                                           std::to_string(n) + ")");
  for (const auto& s : validation)
    if (s.load_factor < range.lo || s.load_factor > range.hi)
      throw ValidationError("partition", "validation load factor " + std::to_string(s.load_factor) +
                                             " outside range");
  std::stable_sort(validation.begin(), validation.end(),
                   [](const auto& a, const auto& b) { return a.load_factor < b.load_factor; });

  const std::size_t per = n / k;
  std::vector<Bucket> buckets(k);
  std::size_t next = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t take = (i + 1 == k) ? n - next : per;
    buckets[i].index = i;
    buckets[i].validation.assign(std::make_move_iterator(validation.begin() + static_cast<long>(next)),
                                 std::make_move_iterator(validation.begin() + static_cast<long>(next + take)));
    next += take;
  }
  for (std::size_t i = 0; i < k; ++i) {
    buckets[i].interval.lo = i == 0 ? range.lo : buckets[i].validation.front().load_factor;
    buckets[i].interval.hi = i + 1 == k ? range.hi : buckets[i + 1].validation.front().load_factor;
  }
  for (auto& b : buckets)
    for (auto& s : b.validation) s.bucket = static_cast<int>(b.index);
  return buckets;
}

int bucket_of(std::span<const Bucket> buckets, double load_factor) {
  if (buckets.empty() || load_factor < buckets.front().interval.lo) return -1;
  for (const auto& b : buckets)
    if (load_factor < b.interval.hi) return static_cast<int>(b.index);
  return static_cast<int>(buckets.back().index);
}

const char* to_string(Metric m) noexcept {
  switch (m) {
    case Metric::LE: return "LE";
    case Metric::McvP: return "MCV-P";
    case Metric::McvL: return "MCV-L";
    case Metric::IG: return "IG";
    case Metric::LG: return "LG";
  }
  return "?";
}

const char* to_string(Distributor d) noexcept { return d == Distributor::MD ? "MD" : "PD"; }

Metric parse_metric(std::string_view s) {
  for (Metric m : {Metric::LE, Metric::McvP, Metric::McvL, Metric::IG, Metric::LG})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown acquisition metric '" + std::string(s) + "'");
}

Distributor parse_distributor(std::string_view s) {
  if (s == "MD") return Distributor::MD;
  if (s == "PD") return Distributor::PD;
  throw ConfigError("unknown distributor '" + std::string(s) + "'");
}

double sample_metric(Metric metric, const nn::Mlp& net, const nn::VectorXd& x,
                     const nn::VectorXd& y, int tau, CounterRng& rng) {
  switch (metric) {
    case Metric::LE: return nn::l1_loss(nn::forward(net, x), y);
    case Metric::IG: return nn::backward(net, x, y).input.norm();
    case Metric::LG: return nn::backward(net, x, y).weight.back().norm();
    case Metric::McvP:
    case Metric::McvL: break;
  }
  if (tau < 2) throw ValidationError("score_bucket", "Monte-Carlo metrics need tau >= 2");
  const auto passes = nn::mc_passes(net, x, tau, rng);
  const double inv = 1.0 / static_cast<double>(tau);
  if (metric == Metric::McvP) {
    return nn::pass_variance(passes).mean();
  }
  std::vector<double> losses;
  losses.reserve(passes.size());
  for (const auto& p : passes) losses.push_back(nn::l1_loss(p, y));
  double shift = 0.0;
  for (double l : losses) shift += l - losses.front();
  shift *= inv;
  double var = 0.0;
  for (double l : losses) var += (l - losses.front() - shift) * (l - losses.front() - shift);
  return var * inv;
}

double score_bucket(Metric metric, const nn::Mlp& net, const Bucket& bucket, int tau,
                    const CounterRng& rng) {
  if (bucket.validation.empty()) throw ValidationError("score_bucket", "bucket is empty");
  if ((metric == Metric::McvP || metric == Metric::McvL) && tau < 2)
    throw ValidationError("score_bucket", "Monte-Carlo metrics need tau >= 2");
  double total = 0.0;
  for (std::size_t j = 0; j < bucket.validation.size(); ++j) {
    const auto& s = bucket.validation[j];
    CounterRng sub = rng.substream(j);
    total += sample_metric(metric, net, net.x_scale.scale(s.x), net.y_scale.scale(s.y), tau, sub);
  }
  return total / static_cast<double>(bucket.validation.size());
}

Allocation distribute(Distributor dist, std::span<const double> scores, long budget) {
  if (budget < 0) throw ValidationError("distribute", "budget must be non-negative");
  if (scores.empty()) throw ValidationError("distribute", "no bucket scores");
  Allocation out;
  std::vector<double> s(scores.begin(), scores.end());
  for (double& v : s) {
    if (!std::isfinite(v)) throw ValidationError("distribute", "non-finite bucket score");
    if (v < 0.0) {
      v = 0.0;
      ++out.clamped;
    }
  }
  const std::size_t k = s.size();
  const auto total_budget = static_cast<std::size_t>(budget);
  out.counts.assign(k, 0);

  if (dist == Distributor::MD) {
    const auto best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    out.counts[best] = total_budget;
    return out;
  }

  const double sum = std::accumulate(s.begin(), s.end(), 0.0);
  if (sum == 0.0) {
    for (std::size_t i = 0; i < k; ++i) out.counts[i] = total_budget / k + (i < total_budget % k ? 1 : 0);
    return out;
  }

  // Proportional shares are compared with a small tolerance so that
  // rescaling the scores cannot flip a floor or a remainder tie through
  // last-bit rounding.
  constexpr double kTol = 1e-9;
  std::vector<double> frac(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double share = static_cast<double>(budget) * (s[i] / sum);
    const double fl = std::floor(share + kTol);
    out.counts[i] = static_cast<std::size_t>(fl);
    frac[i] = share - fl;
    assigned += out.counts[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frac[a] > frac[b] + kTol;
  });
  for (std::size_t r = 0; assigned + r < total_budget; ++r) ++out.counts[order[r % k]];
  return out;
}

TrainState TrainState::from(const LrSchedule& s) {
  TrainState st;
  st.lr = std::clamp(s.lr0, s.lr_min, s.lr_max);
  st.lr_min = s.lr_min;
  st.lr_max = s.lr_max;
  st.rho1_max = s.rho1_max;
  st.rho2_max = s.rho2_max;
  st.gamma1 = s.gamma1;
  st.gamma2 = s.gamma2;
  return st;
}

void lr_update(TrainState& st, double val_loss) {
  if (val_loss >= st.best_val) {
    ++st.rho1;
    ++st.rho2;
  } else {
    st.best_val = val_loss;
    st.rho1 = 0;
    st.rho2 = 0;
  }
  if (st.rho1_max != kNever && st.rho1 > st.rho1_max) {
    st.lr = std::min(std::max(st.gamma1 * st.lr, st.lr_min), st.lr_max);
    st.rho1 = 0;
  }
  if (st.rho2_max != kNever && st.rho2 > st.rho2_max)
    st.lr = std::min(std::max(st.gamma2 * st.lr, st.lr_min), st.lr_max);
}

void tally_buckets(SampleBatch& batch, std::span<const Bucket> buckets) {
  batch.per_bucket.assign(buckets.size(), {});
  for (auto& s : batch.samples) {
    if (s.bucket < 0) s.bucket = bucket_of(buckets, s.load_factor);
    if (s.bucket < 0) continue;
    auto& log = batch.per_bucket[static_cast<std::size_t>(s.bucket)];
    ++log.drawn;
    ++(s.feasible ? log.feasible : log.infeasible);
    log.label_time += s.label_time;
  }
}

SampleBatch active_sample(const nn::Mlp& net, std::span<const Bucket> buckets, Metric metric,
                          Distributor dist, std::size_t n_new, int tau,
                          const SamplerContext& ctx, const CounterRng& rng) {
  SampleBatch batch;
  if (buckets.empty()) throw ValidationError("active_sample", "no buckets");
  const CounterRng score_rng = rng.substream(0);
  for (const auto& b : buckets)
    batch.scores.push_back(score_bucket(metric, net, b, tau, score_rng.substream(b.index)));
  batch.allocation = distribute(dist, batch.scores, static_cast<long>(n_new)).counts;

  const CounterRng draw_rng = rng.substream(1);
  std::vector<sampling::Draw> draws;
  std::vector<int> owner;
  for (const auto& b : buckets) {
    const CounterRng bucket_rng = draw_rng.substream(b.index);
    for (std::size_t j = 0; j < batch.allocation[b.index]; ++j) {
      CounterRng r = bucket_rng.substream(j);
      draws.push_back(sampling::draw_input(ctx.spec, b.interval, r));
      owner.push_back(static_cast<int>(b.index));
    }
  }
  batch.samples = sampling::label_draws(ctx.labeler, draws, ctx.label_threads);
  for (std::size_t i = 0; i < batch.samples.size(); ++i) batch.samples[i].bucket = owner[i];
  tally_buckets(batch, buckets);
  return batch;
}

}  // namespace absopf::active
