#include "absopf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "absopf/baselines.hpp"
#include "absopf/errors.hpp"
#include "absopf/opf_oracle.hpp"

namespace absopf::harness {

namespace fs = std::filesystem;
using active::MetricsRow;
using sampling::Sample;

EvalResult evaluate(const nn::Mlp& net, std::span<const Sample> test, const grid::GridCase* grid_case) {
  if (test.empty()) throw ValidationError("evaluate", "empty test set");
  nn::MatrixXd X, Y;
  active::scaled_matrices(net, test, X, Y);
  const nn::MatrixXd P = nn::forward_batch(net, X);

  EvalResult r;
  r.n = test.size();
  r.l1_mean = ((P - Y).cwiseAbs().colwise().sum() / static_cast<double>(Y.rows())).mean();
  if (grid_case == nullptr) return r;

  double total = 0.0, worst = 0.0;
  std::vector<double> y(static_cast<std::size_t>(P.rows()));
  for (std::size_t j = 0; j < test.size(); ++j) {
    const nn::VectorXd raw = net.y_scale.unscale(P.col(static_cast<long>(j)));
    std::copy(raw.data(), raw.data() + raw.size(), y.begin());
    const auto rep = grid::constraint_violation(*grid_case, test[j].x, y);
    total += rep.mean();
    worst = std::max(worst, rep.max());
  }
  r.violation_mean = total / static_cast<double>(test.size());
  r.violation_max = worst;
  return r;
}

std::unique_ptr<Labeler> make_labeler(const ExperimentConfig& cfg) {
  if (cfg.synthetic) return std::make_unique<opf::SyntheticOracle>(cfg.synth);
  return std::make_unique<opf::AcopfLabeler>(grid::parse_case(cfg.case_path), cfg.solver);
}

sampling::PerturbSpec perturb_spec(const ExperimentConfig& cfg, const Labeler& labeler) {
  sampling::PerturbSpec spec;
  if (const auto* c = labeler.grid_case()) {
    spec.nominal_x = c->nominal_input();
  } else {
    spec.nominal_x = cfg.synth.nominal.empty() ? std::vector<double>(labeler.input_dim(), 1.0) : cfg.synth.nominal;
  }
  spec.lo = cfg.load_lo;
  spec.hi = cfg.load_hi;
  spec.noise_mu = cfg.noise_mu;
  spec.noise_sigma = cfg.noise_sigma;
  spec.validate();
  return spec;
}

void fit_scalers(nn::Mlp& net, std::span<const Sample> d0, const Labeler& labeler) {
  std::vector<std::vector<double>> xs, ys;
  xs.reserve(d0.size());
  ys.reserve(d0.size());
  for (const auto& s : d0) {
    xs.push_back(s.x);
    ys.push_back(s.y);
  }
  net.x_scale = nn::FeatureScaler::fit(xs);
  net.y_scale = nn::FeatureScaler::fit(ys);
  const auto* c = labeler.grid_case();
  if (c == nullptr) return;

  const grid::OutputLayout lay(*c);
  auto bound = [&](std::size_t idx, double lo, double hi) {
    if (hi > lo) {
      net.y_scale.lo(static_cast<long>(idx)) = lo;
      net.y_scale.hi(static_cast<long>(idx)) = hi;
    }
  };
  for (std::size_t g = 0; g < c->generators.size(); ++g) {
    bound(lay.pg + g, c->generators[g].pg_min, c->generators[g].pg_max);
    bound(lay.qg + g, c->generators[g].qg_min, c->generators[g].qg_max);
  }
  for (std::size_t i = 0; i < c->buses.size(); ++i) bound(lay.vm + i, c->buses[i].vm_min, c->buses[i].vm_max);
}

namespace {

MetricsRow initial_row(const nn::Mlp& net, std::span<const active::Bucket> buckets, const EvalResult& ev,
                       const ExperimentConfig& cfg, std::size_t n_train) {
  std::vector<Sample> val;
  for (const auto& b : buckets) val.insert(val.end(), b.validation.begin(), b.validation.end());
  nn::MatrixXd XV, YV;
  active::scaled_matrices(net, val, XV, YV);
  const auto vl = active::set_loss(net, XV, YV);

  MetricsRow row;
  row.epoch = 0;
  row.train_loss = std::numeric_limits<double>::quiet_NaN();
  row.val_loss_sum = vl.sum;
  row.val_loss_mean = vl.mean;
  row.test_l1 = ev.l1_mean;
  row.test_violation = ev.violation_mean;
  row.lr = active::TrainState::from(cfg.schedule).lr;
  row.n_train = n_train;
  row.scores.assign(buckets.size(), std::numeric_limits<double>::quiet_NaN());
  row.drawn.assign(buckets.size(), 0);
  row.feasible.assign(buckets.size(), 0);
  return row;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& cfg, const Labeler& labeler, std::size_t t) {
  TrialResult tr;
  tr.trial = t;
  tr.seed = cfg.seed + t;
  const CounterRng stream(tr.seed);
  const auto spec = perturb_spec(cfg, labeler);
  const unsigned lt = cfg.label_threads;

  auto d0 = sampling::collect_feasible(spec, cfg.n_init, labeler, stream.substream(streams::kInitialSet), lt);
  auto dv = sampling::collect_feasible(spec, cfg.n_val, labeler, stream.substream(streams::kValidationSet), lt);
  auto test = sampling::collect_feasible(spec, cfg.n_test, labeler, stream.substream(streams::kTestSet), lt);
  const auto buckets = active::partition(std::move(dv.samples), cfg.buckets, spec.range());

  nn::MlpShape shape;
  shape.input_dim = labeler.input_dim();
  shape.output_dim = labeler.output_dim();
  shape.hidden_width = cfg.hidden_width == 0 ? labeler.output_dim() : cfg.hidden_width;
  shape.hidden_layers = cfg.hidden_layers;
  CounterRng init_rng = stream.substream(streams::kNetworkInit);
  nn::Mlp net = nn::make_mlp(shape, cfg.dropout, init_rng);
  fit_scalers(net, d0.samples, labeler);

  const grid::GridCase* gc = labeler.grid_case();
  const std::span<const Sample> test_view(test.samples);
  const active::Evaluator ev = [&](const nn::Mlp& n) {
    const auto r = evaluate(n, test_view, gc);
    return active::EpochEval{r.l1_mean, r.violation_mean};
  };
  tr.initial = evaluate(net, test_view, gc);

  active::LoopConfig loop;
  loop.schedule = cfg.schedule;
  loop.batch_size = cfg.batch_size;
  loop.adamw = cfg.adamw;
  loop.n_new = cfg.n_new;
  loop.label_threads = lt;
  loop.eval_every = cfg.eval_every;

  const bool is = cfg.method == Method::Is;
  tr.rows.push_back(initial_row(net, buckets, tr.initial, cfg, is ? 0 : d0.samples.size()));

  active::RunResult res;
  switch (cfg.method) {
    case Method::Abs:
      res = active::run_abs(loop, cfg.metric, cfg.distributor, cfg.tau, std::move(net), d0.samples, buckets,
                            spec, labeler, ev, stream, cfg.budget);
      break;
    case Method::Is:
      res = baselines::run_is(loop, cfg.is_size, std::move(net), buckets, spec, labeler, ev, stream, cfg.budget);
      break;
    case Method::Rad:
      res = baselines::run_rad(loop, std::move(net), d0.samples, buckets, spec, labeler, ev, stream, cfg.budget);
      break;
    case Method::Mcdue:
      res = baselines::run_mcdue(loop, baselines::PoolSpec{cfg.pool_size, cfg.tau}, std::move(net), d0.samples,
                                 buckets, spec, labeler, ev, stream, cfg.budget);
      break;
  }

  tr.rows.insert(tr.rows.end(), res.rows.begin(), res.rows.end());
  tr.final_eval = evaluate(res.net, test_view, gc);
  tr.net = std::move(res.net);
  tr.labeled = std::move(res.labeled);
  tr.test = std::move(test.samples);
  tr.epochs = res.epochs;
  tr.sampling_events = res.sampling_events;
  tr.n_feasible = res.n_feasible;
  tr.n_infeasible = res.n_infeasible;
  return tr;
}

// ---- persistence ------------------------------------------------------------

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

void write_metrics_csv(const fs::path& path, Method method, std::span<const MetricsRow> rows,
                       std::size_t buckets) {
  fmt::memory_buffer out;
  auto it = std::back_inserter(out);
  fmt::format_to(it,
                 "method,epoch,wall_time_s,budget_spent_s,train_loss,val_loss_sum,val_loss_mean,test_l1_mean,"
                 "lr,rho1,rho2,n_train,n_feasible_total,n_infeasible_total");
  for (const char* kind : {"score", "drawn", "feasible"})
    for (std::size_t i = 0; i < buckets; ++i) fmt::format_to(it, ",{}_b{}", kind, i);
  fmt::format_to(it, ",test_violation_mean\n");
  for (const auto& r : rows) {
    fmt::format_to(it, "{},{},{},{},{},{},{},{},{},{},{},{},{},{}", to_string(method), r.epoch, num(r.wall_time),
                   num(r.budget_spent), num(r.train_loss), num(r.val_loss_sum), num(r.val_loss_mean),
                   num(r.test_l1), num(r.lr), r.rho1, r.rho2, r.n_train,
                   r.n_feasible_total, r.n_infeasible_total);
    for (std::size_t i = 0; i < buckets; ++i) fmt::format_to(it, ",{}", num(i < r.scores.size() ? r.scores[i] : NAN));
    for (std::size_t i = 0; i < buckets; ++i) fmt::format_to(it, ",{}", i < r.drawn.size() ? r.drawn[i] : 0);
    for (std::size_t i = 0; i < buckets; ++i) fmt::format_to(it, ",{}", i < r.feasible.size() ? r.feasible[i] : 0);
    fmt::format_to(it, ",{}\n", num(r.test_violation));
  }
  write_text(path, fmt::to_string(out));
}

void write_samples_csv(const fs::path& path, std::span<const Sample> samples) {
  fmt::memory_buffer out;
  auto it = std::back_inserter(out);
  fmt::format_to(it, "bucket_id,load_factor,feasible,label_time\n");
  for (const auto& s : samples)
    fmt::format_to(it, "{},{},{},{}\n", s.bucket, num(s.load_factor), s.feasible ? 1 : 0, num(s.label_time));
  write_text(path, fmt::to_string(out));
}

void write_dataset_csv(const fs::path& path, std::span<const Sample> samples) {
  if (samples.empty()) throw ValidationError("dataset", "no samples to write");
  fmt::memory_buffer out;
  auto it = std::back_inserter(out);
  const std::size_t n = samples.front().x.size(), m = samples.front().y.size();
  for (std::size_t j = 0; j < n; ++j) fmt::format_to(it, "{}x{}", j == 0 ? "" : ",", j);
  for (std::size_t j = 0; j < m; ++j) fmt::format_to(it, ",y{}", j);
  fmt::format_to(it, "\n");
  for (const auto& s : samples) {
    if (s.x.size() != n || s.y.size() != m) throw DimensionError("dataset row", n + m, s.x.size() + s.y.size());
    for (std::size_t j = 0; j < n; ++j) fmt::format_to(it, "{}{}", j == 0 ? "" : ",", num(s.x[j]));
    for (double v : s.y) fmt::format_to(it, ",{}", num(v));
    fmt::format_to(it, "\n");
  }
  write_text(path, fmt::to_string(out));
}

std::vector<Sample> read_dataset_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(f, line)) throw ParseError(path.string(), 1, "missing header");
  std::size_t n = 0, m = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (!col.empty() && col[0] == 'x' && m == 0) ++n;
      else if (!col.empty() && col[0] == 'y') ++m;
      else throw ParseError(path.string(), 1, "unexpected header column '" + col + "'");
    }
  }
  if (n == 0 || m == 0) throw ParseError(path.string(), 1, "header needs x and y columns");
  std::vector<Sample> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Sample s;
    s.feasible = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        (s.x.size() < n ? s.x : s.y).push_back(v);
      } catch (const std::exception&) {
        throw ParseError(path.string(), lineno, "bad number '" + cell + "'");
      }
    }
    if (s.x.size() != n || s.y.size() != m)
      throw ParseError(path.string(), lineno, fmt::format("expected {} values", n + m));
    out.push_back(std::move(s));
  }
  return out;
}

// ---- aggregation ------------------------------------------------------------

namespace {

std::vector<double> checkpoint_times(const ExperimentConfig& cfg) {
  if (!cfg.checkpoints.empty()) {
    auto t = cfg.checkpoints;
    std::sort(t.begin(), t.end());
    return t;
  }
  std::vector<double> t;
  for (int i = 0; i <= 10; ++i) t.push_back(cfg.budget.limit * i / 10.0);
  return t;
}

// Last evaluated row at or before `time`; row 0 is always evaluated.
const MetricsRow& row_at(std::span<const MetricsRow> rows, double time) {
  const MetricsRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.wall_time > time) break;
    if (!std::isnan(r.test_l1)) best = &r;
  }
  return *best;
}

nlohmann::json mean_std(const std::vector<double>& v) {
  if (v.empty()) return {{"mean", nullptr}, {"std", nullptr}};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  auto val = [](double d) { return std::isfinite(d) ? nlohmann::json(d) : nlohmann::json(nullptr); };
  return {{"mean", val(mean)}, {"std", val(sd)}};
}

}  // namespace

std::string aggregate_json(const ExperimentConfig& cfg, std::span<const TrialResult> trials) {
  using nlohmann::json;
  const bool grid = !cfg.synthetic;
  json doc;
  doc["method"] = to_string(cfg.method);
  if (cfg.method == Method::Abs) {
    doc["metric"] = active::to_string(cfg.metric);
    doc["distributor"] = active::to_string(cfg.distributor);
  }
  doc["trials"] = trials.size();
  doc["base_seed"] = cfg.seed;
  doc["buckets"] = cfg.buckets;
  doc["budget"] = {{"mode", cfg.budget.mode == active::BudgetMode::Epochs ? "epochs" : "seconds"},
                   {"limit", cfg.budget.limit},
                   {"label_cost", cfg.budget.label_cost}};

  json cps = json::array();
  for (double t : checkpoint_times(cfg)) {
    std::vector<double> l1, viol;
    for (const auto& tr : trials) {
      const auto& r = row_at(tr.rows, t);
      l1.push_back(r.test_l1);
      viol.push_back(r.test_violation);
    }
    json cp = {{"time", t}, {"test_l1", mean_std(l1)}};
    if (grid) cp["test_violation"] = mean_std(viol);
    cps.push_back(cp);
  }
  doc["checkpoints"] = cps;

  std::vector<double> l1_init, l1_final, viol_init, viol_final, feas, infeas;
  std::vector<double> drawn(cfg.buckets, 0.0), feasible(cfg.buckets, 0.0);
  json per_trial = json::array();
  for (const auto& tr : trials) {
    const auto& first = tr.rows.front();
    const auto& last = row_at(tr.rows, std::numeric_limits<double>::infinity());
    l1_init.push_back(first.test_l1);
    l1_final.push_back(last.test_l1);
    viol_init.push_back(first.test_violation);
    viol_final.push_back(last.test_violation);
    feas.push_back(static_cast<double>(tr.rows.back().n_feasible_total));
    infeas.push_back(static_cast<double>(tr.rows.back().n_infeasible_total));
    for (const auto& r : tr.rows)
      for (std::size_t i = 0; i < cfg.buckets; ++i) {
        drawn[i] += static_cast<double>(r.drawn[i]);
        feasible[i] += static_cast<double>(r.feasible[i]);
      }
    per_trial.push_back({{"trial", tr.trial},
                         {"seed", tr.seed},
                         {"epochs", tr.rows.size() - 1},
                         {"final_test_l1", last.test_l1},
                         {"n_feasible", tr.rows.back().n_feasible_total},
                         {"n_infeasible", tr.rows.back().n_infeasible_total}});
  }
  for (auto& d : drawn) d /= static_cast<double>(trials.size());
  for (auto& d : feasible) d /= static_cast<double>(trials.size());

  doc["initial_test_l1"] = mean_std(l1_init);
  doc["final_test_l1"] = mean_std(l1_final);
  if (grid) {
    doc["initial_test_violation"] = mean_std(viol_init);
    doc["final_test_violation"] = mean_std(viol_final);
  }
  doc["bucket_histogram"] = {{"drawn_mean", drawn}, {"feasible_mean", feasible}};
  doc["labels"] = {{"feasible", mean_std(feas)}, {"infeasible", mean_std(infeas)}};
  doc["per_trial"] = per_trial;
  return doc.dump(2) + "\n";
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto labeler = make_labeler(cfg);
  (void)perturb_spec(cfg, *labeler);

  // Probe the output directory before any work so a bad path fails early.
  std::error_code ec;
  const bool existed = fs::exists(cfg.out, ec);
  fs::create_directories(cfg.out, ec);
  const fs::path probe = cfg.out / ".absopf_write_probe";
  {
    std::ofstream f(probe);
    if (ec || !f) throw Error("output directory '" + cfg.out.string() + "' is not writable");
  }
  fs::remove(probe, ec);
  if (!existed) fs::remove(cfg.out, ec);

  ExperimentSummary sum;
  sum.out = cfg.out;
  sum.trials.resize(cfg.trials);
  std::vector<std::exception_ptr> errors(cfg.trials);
  {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t t;
        {
          std::lock_guard lock(mu);
          if (next >= cfg.trials) return;
          t = next++;
        }
        try {
          sum.trials[t] = run_trial(cfg, *labeler, t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      }
    };
    const unsigned n = std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.trials));
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  fs::create_directories(cfg.out);
  for (const auto& tr : sum.trials) {
    write_metrics_csv(cfg.out / fmt::format("metrics_t{}.csv", tr.trial), cfg.method, tr.rows, cfg.buckets);
    write_samples_csv(cfg.out / fmt::format("samples_t{}.csv", tr.trial), tr.labeled);
    write_dataset_csv(cfg.out / fmt::format("test_t{}.csv", tr.trial), tr.test);
    nn::save_mlp(tr.net, cfg.out / fmt::format("model_t{}.json", tr.trial));
  }
  write_text(cfg.out / "aggregate.json", aggregate_json(cfg, sum.trials));
  return sum;
}

}  // namespace absopf::harness
