#include "absopf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absopf/errors.hpp"

namespace absopf::baselines {

RunResult run_is(const LoopConfig& cfg, std::size_t n, nn::Mlp net, std::span<const Bucket> buckets,
                 const sampling::PerturbSpec& spec, const Labeler& labeler,
                 const Evaluator& evaluate, const CounterRng& stream, const Budget& budget) {
  active::BudgetMeter meter(budget);
  const auto draws = sampling::perturb_draws(spec, n, stream.substream(streams::kInactiveSet));
  std::vector<sampling::Sample> upfront = sampling::label_draws(labeler, draws, cfg.label_threads);
  std::size_t n_feasible = 0;
  std::vector<sampling::Sample> train;
  for (auto& s : upfront) {
    s.label_time = meter.charge_label(s);
    s.bucket = active::bucket_of(buckets, s.load_factor);
    if (s.feasible) {
      ++n_feasible;
      train.push_back(s);
    }
  }
  const std::size_t n_infeasible = upfront.size() - n_feasible;

  active::NoAcquirer none;
  RunResult res = active::run_loop(cfg, std::move(net), train, buckets, spec, labeler, none, evaluate,
                                   stream, meter);
  res.n_feasible += n_feasible;
  res.n_infeasible += n_infeasible;
  for (auto& row : res.rows) {
    row.n_feasible_total += n_feasible;
    row.n_infeasible_total += n_infeasible;
  }
  upfront.insert(upfront.end(), std::make_move_iterator(res.labeled.begin()),
                std::make_move_iterator(res.labeled.end()));
  res.labeled = std::move(upfront);
  return res;
}

active::SampleBatch RandomAcquirer::acquire(const active::AcquireContext& ctx) {
  std::vector<sampling::Draw> draws;
  draws.reserve(ctx.n_new);
  for (std::size_t j = 0; j < ctx.n_new; ++j) {
    CounterRng r = ctx.rng.substream(j);
    draws.push_back(sampling::draw_input(ctx.spec, std::nullopt, r));
  }
  active::SampleBatch batch;
  batch.samples = sampling::label_draws(ctx.labeler, draws, ctx.label_threads);
  active::tally_buckets(batch, ctx.buckets);
  return batch;
}

RunResult run_rad(const LoopConfig& cfg, nn::Mlp net, std::span<const sampling::Sample> d0,
                  std::span<const Bucket> buckets, const sampling::PerturbSpec& spec,
                  const Labeler& labeler, const Evaluator& evaluate, const CounterRng& stream,
                  const Budget& budget) {
  RandomAcquirer acq;
  active::BudgetMeter meter(budget);
  return active::run_loop(cfg, std::move(net), d0, buckets, spec, labeler, acq, evaluate, stream, meter);
}

std::vector<double> mcdue_uncertainty(const nn::Mlp& net, std::span<const std::vector<double>> pool,
                                      int tau, const CounterRng& rng) {
  if (tau < 2) throw ValidationError("mcdue", "tau must be at least 2");
  std::vector<double> u(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CounterRng r = rng.substream(i);
    const auto passes = nn::mc_passes(net, net.x_scale.scale(pool[i]), tau, r);
    u[i] = nn::pass_variance(passes).cwiseSqrt().mean();
  }
  return u;
}

std::vector<std::size_t> mcdue_select(std::span<const double> uncertainty, std::size_t n) {
  if (n > uncertainty.size()) throw ValidationError("mcdue", "selection larger than the pool");
  std::vector<std::size_t> idx(uncertainty.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return uncertainty[a] > uncertainty[b]; });
  idx.resize(n);
  return idx;
}

McdueAcquirer::McdueAcquirer(PoolSpec pool) : pool_(pool) {
  if (pool_.tau < 2) throw ValidationError("mcdue", "tau must be at least 2");
}

active::SampleBatch McdueAcquirer::acquire(const active::AcquireContext& ctx) {
  if (ctx.n_new > pool_.pool_size) throw ValidationError("mcdue", "pool smaller than the selection size");
  const CounterRng pool_rng = ctx.rng.substream(0);
  std::vector<sampling::Draw> pool;
  pool.reserve(pool_.pool_size);
  for (std::size_t i = 0; i < pool_.pool_size; ++i) {
    CounterRng r = pool_rng.substream(i);
    pool.push_back(sampling::draw_input(ctx.spec, std::nullopt, r));
  }
  std::vector<std::vector<double>> xs;
  xs.reserve(pool.size());
  for (const auto& d : pool) xs.push_back(d.x);
  const auto u = mcdue_uncertainty(ctx.net, xs, pool_.tau, ctx.rng.substream(1));
  auto chosen = mcdue_select(u, ctx.n_new);
  std::sort(chosen.begin(), chosen.end());

  std::vector<sampling::Draw> picked;
  picked.reserve(chosen.size());
  for (auto i : chosen) picked.push_back(std::move(pool[i]));
  active::SampleBatch batch;
  batch.samples = sampling::label_draws(ctx.labeler, picked, ctx.label_threads);
  active::tally_buckets(batch, ctx.buckets);
  return batch;
}

RunResult run_mcdue(const LoopConfig& cfg, const PoolSpec& pool, nn::Mlp net,
                    std::span<const sampling::Sample> d0, std::span<const Bucket> buckets,
                    const sampling::PerturbSpec& spec, const Labeler& labeler,
                    const Evaluator& evaluate, const CounterRng& stream, const Budget& budget) {
  McdueAcquirer acq(pool);
  active::BudgetMeter meter(budget);
  return active::run_loop(cfg, std::move(net), d0, buckets, spec, labeler, acq, evaluate, stream, meter);
}

}  // namespace absopf::baselines
