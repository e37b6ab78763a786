#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absopf/active.hpp"

namespace absopf::active {

enum class BudgetMode { Epochs, Seconds };

struct Budget {
  BudgetMode mode = BudgetMode::Epochs;
  double limit = 0.0;
  // Simulated cost per label, in epochs (epoch mode) or seconds.
  double label_cost = 0.0;
  // Cost of an infeasible label; negative means "same as label_cost".
  double label_cost_infeasible = -1.0;
};

/// Tracks budget consumption. In epoch mode every epoch costs 1 and every
/// label its simulated cost, so runs are reproducible. In seconds mode real
/// elapsed time is measured and the simulated label cost is added on top.
class BudgetMeter {
 public:
  explicit BudgetMeter(Budget budget);

  void charge_epoch() noexcept;
  /// Charges one label and returns the label time to record for it.
  double charge_label(const sampling::Sample& s) noexcept;

  double spent() const noexcept;
  bool exhausted() const noexcept { return spent() >= budget_.limit; }
  double elapsed_seconds() const noexcept;
  /// Time axis for reports: the budget clock in epoch mode, real time otherwise.
  double report_time() const noexcept;
  const Budget& budget() const noexcept { return budget_; }

 private:
  Budget budget_;
  double simulated_ = 0.0;
  std::chrono::steady_clock::time_point start_;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double wall_time = 0.0;
  double budget_spent = 0.0;
  double train_loss = 0.0;
  double val_loss_sum = 0.0;
  double val_loss_mean = 0.0;
  double test_l1 = std::numeric_limits<double>::quiet_NaN();
  double test_violation = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
  std::size_t rho1 = 0;
  std::size_t rho2 = 0;
  std::size_t n_train = 0;
  std::size_t n_feasible_total = 0;
  std::size_t n_infeasible_total = 0;
  std::vector<double> scores;  // NaN when no bucket scoring happened this epoch
  std::vector<std::size_t> drawn;
  std::vector<std::size_t> feasible;
};

struct AcquireContext {
  const nn::Mlp& net;
  std::span<const Bucket> buckets;
  const sampling::PerturbSpec& spec;
  const Labeler& labeler;
  unsigned label_threads = 1;
  std::size_t n_new = 0;
  CounterRng rng;
};

/// The step that differs between methods: what to label when a plateau
/// triggers a sampling event.
class Acquirer {
 public:
  virtual ~Acquirer() = default;
  virtual std::string_view name() const = 0;
  virtual SampleBatch acquire(const AcquireContext& ctx) = 0;
};

class AbsAcquirer final : public Acquirer {
 public:
  AbsAcquirer(Metric metric, Distributor dist, int tau) : metric_(metric), dist_(dist), tau_(tau) {}
  std::string_view name() const override { return "abs"; }
  SampleBatch acquire(const AcquireContext& ctx) override;

 private:
  Metric metric_;
  Distributor dist_;
  int tau_;
};

/// Never samples; a crossing still boosts the LR and resets rho2.
class NoAcquirer final : public Acquirer {
 public:
  std::string_view name() const override { return "none"; }
  SampleBatch acquire(const AcquireContext&) override { return {}; }
};

struct EpochEval {
  double test_l1 = std::numeric_limits<double>::quiet_NaN();
  double test_violation = std::numeric_limits<double>::quiet_NaN();
};
using Evaluator = std::function<EpochEval(const nn::Mlp&)>;

struct LoopConfig {
  LrSchedule schedule;
  std::size_t batch_size = 128;
  nn::AdamwConfig adamw;
  std::size_t n_new = 64;
  unsigned label_threads = 1;
  std::size_t eval_every = 1;  // also evaluated on the final epoch
};

struct RunResult {
  nn::Mlp net;
  std::vector<MetricsRow> rows;
  std::vector<sampling::Sample> labeled;  // every label paid from the budget
  TrainState state;
  std::size_t epochs = 0;
  std::size_t sampling_events = 0;
  std::size_t n_feasible = 0;
  std::size_t n_infeasible = 0;
};

/// Budgeted loop: train one epoch, validate on every bucket's samples,
/// update the LR, and on a rho2 crossing ask the acquirer for new labels,
/// then reset rho2. `stream` seeds shuffling/dropout (substream kTraining)
/// and acquisition (substream kAcquisition, one sub-substream per event).
RunResult run_loop(const LoopConfig& cfg, nn::Mlp net, std::span<const sampling::Sample> train,
                   std::span<const Bucket> buckets, const sampling::PerturbSpec& spec,
                   const Labeler& labeler, Acquirer& acquirer, const Evaluator& evaluate,
                   const CounterRng& stream, BudgetMeter& meter);

/// ABS: run_loop with AbsAcquirer.
RunResult run_abs(const LoopConfig& cfg, Metric metric, Distributor dist, int tau, nn::Mlp net,
                  std::span<const sampling::Sample> d0, std::span<const Bucket> buckets,
                  const sampling::PerturbSpec& spec, const Labeler& labeler,
                  const Evaluator& evaluate, const CounterRng& stream, const Budget& budget);

/// Sum and mean of the per-sample L1 loss over scaled samples.
struct SetLoss {
  double sum = 0.0;
  double mean = 0.0;
};
SetLoss set_loss(const nn::Mlp& net, const nn::MatrixXd& X, const nn::MatrixXd& Y);

/// Stacks the samples' scaled inputs/outputs as columns.
void scaled_matrices(const nn::Mlp& net, std::span<const sampling::Sample> samples, nn::MatrixXd& X,
                     nn::MatrixXd& Y);

}  // namespace absopf::active
