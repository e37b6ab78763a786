#include "absopf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absopf/errors.hpp"

namespace absopf::active {

BudgetMeter::BudgetMeter(Budget budget) : budget_(budget), start_(std::chrono::steady_clock::now()) {}

void BudgetMeter::charge_epoch() noexcept {
  if (budget_.mode == BudgetMode::Epochs) simulated_ += 1.0;
}

double BudgetMeter::charge_label(const sampling::Sample& s) noexcept {
  const double cost = (!s.feasible && budget_.label_cost_infeasible >= 0.0) ? budget_.label_cost_infeasible
                                                                             : budget_.label_cost;
  simulated_ += cost;
  return budget_.mode == BudgetMode::Epochs ? cost : s.label_time + cost;
}

double BudgetMeter::elapsed_seconds() const noexcept {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

double BudgetMeter::spent() const noexcept {
  return budget_.mode == BudgetMode::Epochs ? simulated_ : elapsed_seconds() + simulated_;
}

double BudgetMeter::report_time() const noexcept {
  return budget_.mode == BudgetMode::Epochs ? simulated_ : elapsed_seconds();
}

SampleBatch AbsAcquirer::acquire(const AcquireContext& ctx) {
  const SamplerContext sc{ctx.spec, ctx.labeler, ctx.label_threads};
  return active_sample(ctx.net, ctx.buckets, metric_, dist_, ctx.n_new, tau_, sc, ctx.rng);
}

void scaled_matrices(const nn::Mlp& net, std::span<const sampling::Sample> samples, nn::MatrixXd& X,
                     nn::MatrixXd& Y) {
  X.resize(static_cast<long>(net.input_dim()), static_cast<long>(samples.size()));
  Y.resize(static_cast<long>(net.output_dim()), static_cast<long>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    X.col(static_cast<long>(j)) = net.x_scale.scale(samples[j].x);
    Y.col(static_cast<long>(j)) = net.y_scale.scale(samples[j].y);
  }
}

SetLoss set_loss(const nn::Mlp& net, const nn::MatrixXd& X, const nn::MatrixXd& Y) {
  SetLoss out;
  if (X.cols() == 0) return out;
  const nn::MatrixXd P = nn::forward_batch(net, X);
  out.sum = ((P - Y).cwiseAbs().colwise().sum() / static_cast<double>(Y.rows())).sum();
  out.mean = out.sum / static_cast<double>(X.cols());
  return out;
}

namespace {

void append_columns(nn::MatrixXd& M, const nn::VectorXd& v) {
  M.conservativeResize(Eigen::NoChange, M.cols() + 1);
  M.col(M.cols() - 1) = v;
}

}  // namespace

RunResult run_loop(const LoopConfig& cfg, nn::Mlp net, std::span<const sampling::Sample> train,
                   std::span<const Bucket> buckets, const sampling::PerturbSpec& spec,
                   const Labeler& labeler, Acquirer& acquirer, const Evaluator& evaluate,
                   const CounterRng& stream, BudgetMeter& meter) {
  if (cfg.batch_size == 0) throw ValidationError("run_loop", "batch_size must be positive");
  RunResult res;
  res.state = TrainState::from(cfg.schedule);
  const std::size_t k = buckets.size();

  nn::MatrixXd X, Y;
  scaled_matrices(net, train, X, Y);
  std::vector<sampling::Sample> val;
  for (const auto& b : buckets) val.insert(val.end(), b.validation.begin(), b.validation.end());
  nn::MatrixXd XV, YV;
  scaled_matrices(net, val, XV, YV);

  nn::AdamwState opt(net, cfg.adamw);
  const CounterRng train_rng = stream.substream(streams::kTraining);
  const CounterRng acq_rng = stream.substream(streams::kAcquisition);
  const std::size_t eval_every = std::max<std::size_t>(cfg.eval_every, 1);

  std::vector<long> order;
  while (!meter.exhausted()) {
    ++res.epochs;
    CounterRng erng = train_rng.substream(res.epochs);

    // Training pass over D in shuffled mini-batches.
    const auto n = static_cast<std::size_t>(X.cols());
    order.resize(n);
    std::iota(order.begin(), order.end(), 0L);
    shuffle(std::span<long>(order), erng);
    double train_loss = 0.0;
    nn::MatrixXd XB, YB;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t m = std::min(cfg.batch_size, n - start);
      XB.resize(X.rows(), static_cast<long>(m));
      YB.resize(Y.rows(), static_cast<long>(m));
      for (std::size_t j = 0; j < m; ++j) {
        XB.col(static_cast<long>(j)) = X.col(order[start + j]);
        YB.col(static_cast<long>(j)) = Y.col(order[start + j]);
      }
      const auto g = nn::batch_backward(net, XB, YB, &erng);
      nn::adamw_step(net, g, opt, res.state.lr);
      train_loss += g.loss * static_cast<double>(m);
    }
    if (n > 0) train_loss /= static_cast<double>(n);
    meter.charge_epoch();

    const SetLoss vl = set_loss(net, XV, YV);
    lr_update(res.state, vl.sum);

    MetricsRow row;
    row.scores.assign(k, std::numeric_limits<double>::quiet_NaN());
    row.drawn.assign(k, 0);
    row.feasible.assign(k, 0);

    if (res.state.sampling_due()) {
      AcquireContext ctx{net, buckets, spec, labeler, cfg.label_threads, cfg.n_new,
                         acq_rng.substream(res.sampling_events)};
      SampleBatch batch = acquirer.acquire(ctx);
      ++res.sampling_events;
      if (!batch.scores.empty()) row.scores = batch.scores;
      for (std::size_t i = 0; i < std::min(k, batch.per_bucket.size()); ++i) {
        row.drawn[i] = batch.per_bucket[i].drawn;
        row.feasible[i] = batch.per_bucket[i].feasible;
      }
      for (auto& s : batch.samples) {
        s.label_time = meter.charge_label(s);
        if (s.feasible) {
          ++res.n_feasible;
          append_columns(X, net.x_scale.scale(s.x));
          append_columns(Y, net.y_scale.scale(s.y));
        } else {
          ++res.n_infeasible;
        }
        res.labeled.push_back(std::move(s));
      }
      res.state.rho2 = 0;
    }

    row.epoch = res.epochs;
    row.wall_time = meter.report_time();
    row.budget_spent = meter.spent();
    row.train_loss = train_loss;
    row.val_loss_sum = vl.sum;
    row.val_loss_mean = vl.mean;
    row.lr = res.state.lr;
    row.rho1 = res.state.rho1;
    row.rho2 = res.state.rho2;
    row.n_train = static_cast<std::size_t>(X.cols());
    row.n_feasible_total = res.n_feasible;
    row.n_infeasible_total = res.n_infeasible;
    if (evaluate && (res.epochs % eval_every == 0 || meter.exhausted())) {
      const EpochEval ev = evaluate(net);
      row.test_l1 = ev.test_l1;
      row.test_violation = ev.test_violation;
    }
    res.rows.push_back(std::move(row));
  }
  res.net = std::move(net);
  return res;
}

RunResult run_abs(const LoopConfig& cfg, Metric metric, Distributor dist, int tau, nn::Mlp net,
                  std::span<const sampling::Sample> d0, std::span<const Bucket> buckets,
                  const sampling::PerturbSpec& spec, const Labeler& labeler,
                  const Evaluator& evaluate, const CounterRng& stream, const Budget& budget) {
  if ((metric == Metric::McvP || metric == Metric::McvL) && tau < 2)
    throw ValidationError("run_abs", "Monte-Carlo metrics need tau >= 2");
  AbsAcquirer acq(metric, dist, tau);
  BudgetMeter meter(budget);
  return run_loop(cfg, std::move(net), d0, buckets, spec, labeler, acq, evaluate, stream, meter);
}

}  // namespace absopf::active
