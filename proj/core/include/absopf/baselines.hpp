#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "absopf/training.hpp"

namespace absopf::baselines {

using active::Budget;
using active::Bucket;
using active::Evaluator;
using active::LoopConfig;
using active::RunResult;

/// Inactive sampling: label `n` uniform draws up front (charged to the
/// budget, draw i from stream.substream(kInactiveSet).substream(i)), then
/// train on them with the LR schedule only.
RunResult run_is(const LoopConfig& cfg, std::size_t n, nn::Mlp net, std::span<const Bucket> buckets,
                 const sampling::PerturbSpec& spec, const Labeler& labeler,
                 const Evaluator& evaluate, const CounterRng& stream, const Budget& budget);

/// Random active sampling: draws n_new inputs from the full range per event.
class RandomAcquirer final : public active::Acquirer {
 public:
  std::string_view name() const override { return "rad"; }
  active::SampleBatch acquire(const active::AcquireContext& ctx) override;
};

RunResult run_rad(const LoopConfig& cfg, nn::Mlp net, std::span<const sampling::Sample> d0,
                  std::span<const Bucket> buckets, const sampling::PerturbSpec& spec,
                  const Labeler& labeler, const Evaluator& evaluate, const CounterRng& stream,
                  const Budget& budget);

struct PoolSpec {
  std::size_t pool_size = 5000;
  int tau = 25;
};

/// Mean over outputs of the population standard deviation across tau
/// dropout passes, for every pool column. Item i uses rng.substream(i).
std::vector<double> mcdue_uncertainty(const nn::Mlp& net, std::span<const std::vector<double>> pool,
                                      int tau, const CounterRng& rng);

/// Indices of the n largest values, ties to the lower index, in rank order.
std::vector<std::size_t> mcdue_select(std::span<const double> uncertainty, std::size_t n);

class McdueAcquirer final : public active::Acquirer {
 public:
  explicit McdueAcquirer(PoolSpec pool);
  std::string_view name() const override { return "mcdue"; }
  active::SampleBatch acquire(const active::AcquireContext& ctx) override;

 private:
  PoolSpec pool_;
};

RunResult run_mcdue(const LoopConfig& cfg, const PoolSpec& pool, nn::Mlp net,
                    std::span<const sampling::Sample> d0, std::span<const Bucket> buckets,
                    const sampling::PerturbSpec& spec, const Labeler& labeler,
                    const Evaluator& evaluate, const CounterRng& stream, const Budget& budget);

}  // namespace absopf::baselines
