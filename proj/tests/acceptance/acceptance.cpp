// Acceptance driver: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Each check computes its reference values independently of
// the code under test where a reference is needed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "absopf/active.hpp"
#include "absopf/baselines.hpp"
#include "absopf/config.hpp"
#include "absopf/errors.hpp"
#include "absopf/grid.hpp"
#include "absopf/harness.hpp"
#include "absopf/nn.hpp"
#include "absopf/opf_oracle.hpp"
#include "oracles/mlp_reference.hpp"
#include "oracles/opf_brute.hpp"

using namespace absopf;
namespace fs = std::filesystem;
using LD = long double;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kData = ABSOPF_TEST_DATA;

std::vector<double> random_unit(std::size_t n, CounterRng& rng, double lo = 0.05, double hi = 0.95) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

nn::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const nn::VectorXd>(v.data(), static_cast<long>(v.size()));
}

// Central difference of the long-double reference loss with respect to one
// double parameter. The step actually taken is used as the denominator.
template <class F>
double fd(double& p, F&& loss, double h = 1e-6) {
  const double p0 = p;
  const double up_p = p0 + h, dn_p = p0 - h;
  p = up_p;
  const LD up = loss();
  p = dn_p;
  const LD dn = loss();
  p = p0;
  return static_cast<double>((up - dn) / (static_cast<LD>(up_p) - static_cast<LD>(dn_p)));
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6}); }

// ---- 1 -------------------------------------------------------------------------

Outcome gradient_correctness() {
  CounterRng rng(101);
  double worst = 0.0;
  std::size_t checked = 0, skipped_nets = 0;
  for (int t = 0; t < 20; ++t) {
    CounterRng r = rng.substream(static_cast<std::uint64_t>(t));
    const std::size_t hidden = 3 + r.below(3);
    const std::size_t in = 1 + r.below(16), out = 1 + r.below(16), width = 1 + r.below(16);
    CounterRng init = r.substream(1);
    nn::Mlp net = nn::make_mlp({in, out, width, hidden}, 0.0, init);
    // Spread the weights so deep layers see non-trivial gradients.
    for (auto& l : net.layers) {
      for (long i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.uniform(-2.0, 2.0);
      for (long i = 0; i < l.bias.size(); ++i) l.bias(i) = r.uniform(-1.0, 1.0);
    }
    std::vector<double> x = random_unit(in, r);
    const std::vector<double> y = random_unit(out, r);
    const nn::VectorXd yhat = nn::forward(net, to_vec(x));
    if ((yhat - to_vec(y)).cwiseAbs().minCoeff() < 1e-8) {
      ++skipped_nets;
      continue;
    }
    const nn::Gradients g = nn::backward(net, to_vec(x), to_vec(y));
    auto plain = oracle::copy_layers(net);
    auto loss = [&] { return oracle::l1_as<LD>(oracle::forward_as<LD>(plain, x), y); };
    for (std::size_t l = 0; l < plain.size(); ++l) {
      auto& P = plain[l];
      for (std::size_t rr = 0; rr < P.rows; ++rr) {
        for (std::size_t c = 0; c < P.cols; ++c) {
          const double num = fd(P.w[rr * P.cols + c], loss);
          worst = std::max(worst, rel_err(g.weight[l](static_cast<long>(rr), static_cast<long>(c)), num));
          ++checked;
        }
        const double num = fd(P.b[rr], loss);
        worst = std::max(worst, rel_err(g.bias[l](static_cast<long>(rr)), num));
        ++checked;
      }
    }
    for (std::size_t i = 0; i < in; ++i) {
      const double num = fd(x[i], loss);
      worst = std::max(worst, rel_err(g.input(static_cast<long>(i)), num));
      ++checked;
    }
  }
  return {worst <= 1e-5 && checked > 0,
          fmt::format("{} coordinates, worst relative error {:.3e}, {} nets skipped", checked, worst, skipped_nets)};
}

// ---- 2 -------------------------------------------------------------------------

Outcome ig_lg_equivalence() {
  CounterRng rng(202);
  double worst_ig = 0.0, worst_lg = 0.0;
  for (int t = 0; t < 10; ++t) {
    CounterRng r = rng.substream(static_cast<std::uint64_t>(t));
    const std::size_t in = 2 + r.below(8), out = 2 + r.below(8);
    CounterRng init = r.substream(1);
    nn::Mlp net = nn::make_mlp({in, out, 2 + r.below(10), 3}, 0.1, init);
    for (auto& l : net.layers)
      for (long i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = r.uniform(-2.0, 2.0);
    sampling::Sample s;
    s.x = random_unit(in, r);
    s.y = random_unit(out, r);
    s.feasible = true;
    active::Bucket b;
    b.validation = {s};
    const double ig = active::score_bucket(active::Metric::IG, net, b, 25, CounterRng(1));
    const double lg = active::score_bucket(active::Metric::LG, net, b, 25, CounterRng(1));

    auto plain = oracle::copy_layers(net);
    std::vector<double> x = s.x;
    auto loss = [&] { return oracle::l1_as<LD>(oracle::forward_as<LD>(plain, x), s.y); };
    LD ig_ref = 0, lg_ref = 0;
    for (std::size_t i = 0; i < in; ++i) {
      const LD d = fd(x[i], loss);
      ig_ref += d * d;
    }
    for (auto& w : plain.back().w) {
      const LD d = fd(w, loss);
      lg_ref += d * d;
    }
    worst_ig = std::max(worst_ig, std::fabs(ig - static_cast<double>(std::sqrt(ig_ref))));
    worst_lg = std::max(worst_lg, std::fabs(lg - static_cast<double>(std::sqrt(lg_ref))));
  }
  return {worst_ig <= 1e-5 && worst_lg <= 1e-5,
          fmt::format("10 one-sample buckets, max |IG - FD| {:.3e}, max |LG - FD| {:.3e}", worst_ig, worst_lg)};
}

// ---- 3 -------------------------------------------------------------------------

double max_balance(const grid::GridCase& c, const grid::GridState& s, std::span<const double> x) {
  double m = 0.0;
  for (const auto& r : grid::power_balance_residuals(c, s, x)) m = std::max({m, std::fabs(r.dp), std::fabs(r.dq)});
  return m;
}

Outcome acopf_vs_brute_force() {
  bool ok = true;
  std::string detail;
  double worst_res = 0.0;
  const auto c2 = grid::two_bus_fixture();
  for (double f : {0.9, 1.0, 1.1}) {
    auto x = c2.nominal_input();
    for (auto& v : x) v *= f;
    const auto r = opf::solve_acopf(c2, x);
    const auto brute = oracle::two_bus_search(c2, x[0], x[1]);
    if (r.status != opf::SolveStatus::Feasible || !std::isfinite(brute.objective)) {
      detail += fmt::format("2-bus f={} not solved ({}); ", f, opf::to_string(r.status));
      ok = false;
      continue;
    }
    const double gap = std::fabs(r.objective - brute.objective);
    const double res = std::max(max_balance(c2, *r.state, x), grid::state_violation(c2, x, *r.state).max());
    worst_res = std::max(worst_res, res);
    ok = ok && gap <= 1e-3 && res <= 1e-6;
    detail += fmt::format("2-bus f={} gap {:.2e}; ", f, gap);
  }
  const auto c3 = grid::three_bus_fixture();
  const auto x3 = c3.nominal_input();
  const auto r3 = opf::solve_acopf(c3, x3);
  const auto best = oracle::ThreeBus(c3, x3).search();
  if (r3.status != opf::SolveStatus::Feasible || !std::isfinite(best.objective)) {
    detail += "3-bus not solved; ";
    ok = false;
  } else {
    const double gap = std::fabs(r3.objective - best.objective);
    const double res = std::max(max_balance(c3, *r3.state, x3), grid::state_violation(c3, x3, *r3.state).max());
    worst_res = std::max(worst_res, res);
    ok = ok && gap <= 5e-3 && res <= 1e-6;
    detail += fmt::format("3-bus gap {:.2e}; ", gap);
  }
  detail += fmt::format("worst residual {:.2e}", worst_res);
  return {ok, detail};
}

// ---- 4 -------------------------------------------------------------------------

Outcome distributor_suite() {
  using active::Distributor;
  using active::distribute;
  std::vector<std::string> fails;
  auto counts = [](Distributor d, std::vector<double> s, long n) { return distribute(d, s, n).counts; };

  if (counts(Distributor::MD, {0.1, 0.5, 0.2}, 10) != std::vector<std::size_t>{0, 10, 0}) fails.push_back("MD example");
  if (counts(Distributor::PD, {1, 1, 2}, 8) != std::vector<std::size_t>{2, 2, 4}) fails.push_back("PD example 1");
  if (counts(Distributor::PD, {1, 1, 1}, 10) != std::vector<std::size_t>{4, 3, 3}) fails.push_back("PD example 2");
  if (counts(Distributor::MD, {0.3, 0.9, 0.9, 0.2}, 7) != std::vector<std::size_t>{0, 7, 0, 0})
    fails.push_back("MD tie");

  CounterRng rng(404);
  std::size_t sum_fail = 0, mono_fail = 0, scale_fail = 0, md_fail = 0;
  for (int t = 0; t < 1000; ++t) {
    CounterRng r = rng.substream(static_cast<std::uint64_t>(t));
    const std::size_t k = 1 + r.below(12);
    const long n = static_cast<long>(r.below(500));
    std::vector<double> s(k);
    for (auto& v : s) v = r.bernoulli(0.1) ? 0.0 : r.uniform(0.0, 10.0);
    if (t % 50 == 0 && k > 1) s[1] = s[0];  // exact ties now and then
    const auto a = counts(Distributor::PD, s, n);
    if (std::accumulate(a.begin(), a.end(), std::size_t{0}) != static_cast<std::size_t>(n)) ++sum_fail;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (s[i] > s[j] && a[i] < a[j]) ++mono_fail;
    for (double c : {0.5, 3.0, 100.0}) {
      std::vector<double> cs(s);
      for (auto& v : cs) v *= c;
      if (counts(Distributor::PD, cs, n) != a) ++scale_fail;
    }
    const auto m = counts(Distributor::MD, s, n);
    const auto arg = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    for (std::size_t i = 0; i < k; ++i)
      if (m[i] != (i == arg ? static_cast<std::size_t>(n) : 0u)) {
        ++md_fail;
        break;
      }
  }
  if (sum_fail) fails.push_back(fmt::format("{} PD sums off", sum_fail));
  if (mono_fail) fails.push_back(fmt::format("{} monotonicity violations", mono_fail));
  if (scale_fail) fails.push_back(fmt::format("{} scale changes", scale_fail));
  if (md_fail) fails.push_back(fmt::format("{} MD placements", md_fail));
  std::string detail = "worked examples, 1000 random vectors, scales {0.5, 3, 100}";
  for (const auto& f : fails) detail += "; " + f;
  return {fails.empty(), detail};
}

// ---- 5 -------------------------------------------------------------------------

Outcome partition_suite() {
  std::vector<std::string> fails;
  const sampling::Interval range{0.8, 1.2};
  for (auto [n, k] : std::vector<std::pair<std::size_t, std::size_t>>{{1024, 8}, {10, 3}, {7, 7}}) {
    CounterRng r(500 + n);
    std::vector<sampling::Sample> v(n);
    for (auto& s : v) {
      s.load_factor = r.uniform(range.lo, range.hi);
      s.x = {s.load_factor};
      s.y = {0.0};
      s.feasible = true;
    }
    std::vector<double> sorted;
    for (const auto& s : v) sorted.push_back(s.load_factor);
    std::sort(sorted.begin(), sorted.end());
    const auto b = active::partition(v, k, range);
    bool ok = b.size() == k;
    std::size_t pos = 0;
    for (std::size_t i = 0; ok && i < k; ++i) {
      const std::size_t want = i + 1 < k ? n / k : n - (k - 1) * (n / k);
      ok = b[i].validation.size() == want && b[i].index == i;
      for (const auto& s : b[i].validation) {
        ok = ok && s.load_factor == sorted[pos++];
        ok = ok && s.load_factor >= b[i].interval.lo && s.load_factor <= b[i].interval.hi;
      }
      const double lo = i == 0 ? range.lo : b[i].validation.front().load_factor;
      const double hi = i + 1 == k ? range.hi : b[i + 1].validation.front().load_factor;
      ok = ok && b[i].interval.lo == lo && b[i].interval.hi == hi;
    }
    if (!ok) fails.push_back(fmt::format("({}, {})", n, k));
  }
  std::string detail = "(1024,8) (10,3) (7,7): sizes, ordering, tiling";
  for (const auto& f : fails) detail += "; failed " + f;
  return {fails.empty(), detail};
}

// ---- 6 -------------------------------------------------------------------------

Outcome lr_truth_table() {
  using active::TrainState;
  struct Case {
    const char* name;
    double lr, best;
    std::size_t r1, r2;
    double val;
    double want_lr, want_best;
    std::size_t want_r1, want_r2;
  };
  // rho1_max = 5, rho2_max = 10, gamma1 = 0.5, gamma2 = 4, bounds [1e-5, 1e-2].
  const std::vector<Case> cases = {
      {"improve", 1e-3, 1.0, 3, 7, 0.5, 1e-3, 0.5, 0, 0},
      {"plateau below rho1_max", 1e-3, 1.0, 2, 2, 1.0, 1e-3, 1.0, 3, 3},
      {"cross rho1_max", 1e-3, 1.0, 5, 5, 1.2, 5e-4, 1.0, 0, 6},
      {"cross rho2_max", 1e-3, 1.0, 0, 10, 1.0, 4e-3, 1.0, 1, 11},
      {"clamp at lower bound", 1.5e-5, 1.0, 5, 0, 1.0, 1e-5, 1.0, 0, 1},
      {"clamp at upper bound", 5e-3, 1.0, 1, 10, 1.0, 1e-2, 1.0, 2, 11},
  };
  std::vector<std::string> fails;
  for (const auto& c : cases) {
    active::LrSchedule s;  // defaults: lr_min 1e-5, lr_max 1e-2, rho1_max 5, rho2_max 10
    s.lr0 = c.lr;
    TrainState st = TrainState::from(s);
    st.best_val = c.best;
    st.rho1 = c.r1;
    st.rho2 = c.r2;
    active::lr_update(st, c.val);
    if (st.lr != c.want_lr || st.best_val != c.want_best || st.rho1 != c.want_r1 || st.rho2 != c.want_r2)
      fails.push_back(fmt::format("{} (lr {} rho1 {} rho2 {})", c.name, st.lr, st.rho1, st.rho2));
  }
  std::string detail = "six scenarios";
  for (const auto& f : fails) detail += "; failed " + f;
  return {fails.empty(), detail};
}

// ---- 7 -------------------------------------------------------------------------

Outcome mc_dropout() {
  bool ok = true;
  CounterRng init(701);
  const nn::Mlp net0 = nn::make_mlp({6, 5, 12, 3}, 0.0, init);
  const nn::VectorXd x = nn::VectorXd::Constant(6, 0.4);
  CounterRng r(702);
  const auto passes = nn::mc_passes(net0, x, 25, r);
  for (const auto& p : passes) ok = ok && p == passes.front() && p == nn::forward(net0, x);

  active::Bucket b;
  CounterRng dr(703);
  for (int i = 0; i < 16; ++i) {
    sampling::Sample s;
    s.x = random_unit(6, dr);
    s.y = random_unit(5, dr);
    s.feasible = true;
    b.validation.push_back(s);
  }
  const double mp = active::score_bucket(active::Metric::McvP, net0, b, 25, CounterRng(9));
  const double ml = active::score_bucket(active::Metric::McvL, net0, b, 25, CounterRng(9));
  ok = ok && mp == 0.0 && ml == 0.0;

  init = CounterRng(704);
  const nn::Mlp net = nn::make_mlp({6, 5, 12, 3}, 0.3, init);
  CounterRng a(705), c(705), d(706);
  const auto pa = nn::mc_passes(net, x, 25, a);
  const auto pc = nn::mc_passes(net, x, 25, c);
  const auto pd = nn::mc_passes(net, x, 25, d);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    same = same && pa[i] == pc[i];
    differs = differs || pa[i] != pd[i];
  }
  const double s1 = active::score_bucket(active::Metric::McvP, net, b, 25, CounterRng(9));
  const double s2 = active::score_bucket(active::Metric::McvP, net, b, 25, CounterRng(9));
  ok = ok && same && differs && s1 == s2 && s1 > 0.0;
  return {ok, fmt::format("rate 0: 25 identical passes, MCV-P {} MCV-L {}; rate 0.3: seeded passes {}", mp, ml,
                          same ? "reproducible" : "NOT reproducible")};
}

// ---- 8 and 9 -----------------------------------------------------------------------

struct MethodStats {
  double final_l1 = 0.0;
  double infeasible = 0.0;
  double seconds = 0.0;
};

MethodStats run_method(const std::string& method) {
  auto cfg = harness::load_config(kData / "synthetic_efficiency.cfg");
  cfg.method = harness::parse_method(method);
  const auto labeler = harness::make_labeler(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  MethodStats st;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto tr = harness::run_trial(cfg, *labeler, t);
    st.final_l1 += tr.final_eval.l1_mean;
    st.infeasible += static_cast<double>(tr.n_infeasible);
  }
  st.final_l1 /= static_cast<double>(cfg.trials);
  st.infeasible /= static_cast<double>(cfg.trials);
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return st;
}

// ---- 10 ------------------------------------------------------------------------

Outcome mcdue_selection() {
  CounterRng init(1001);
  const nn::Mlp net = nn::make_mlp({8, 8, 16, 3}, 0.2, init);
  sampling::PerturbSpec spec;
  spec.nominal_x.assign(8, 1.0);
  const CounterRng pool_rng(1002);
  std::vector<std::vector<double>> pool;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    CounterRng ri = pool_rng.substream(i);
    pool.push_back(sampling::draw_input(spec, std::nullopt, ri).x);
  }
  const CounterRng urng(1003);
  const int tau = 25;
  const std::size_t n = 64;
  const auto u = baselines::mcdue_uncertainty(net, pool, tau, urng);
  const auto sel = baselines::mcdue_select(u, n);

  // Independent recompute: same mask stream, straight-line forward, long
  // double statistics.
  const auto plain = oracle::copy_layers(net);
  std::vector<double> ref(pool.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CounterRng ri = urng.substream(i);
    const nn::VectorXd xs = net.x_scale.scale(pool[i]);
    const std::vector<double> xv(xs.data(), xs.data() + xs.size());
    std::vector<std::vector<double>> outs;
    for (int t = 0; t < tau; ++t) {
      const auto m = nn::sample_mask(net, ri);
      std::vector<std::vector<double>> keep;
      for (const auto& h : m.hidden) keep.emplace_back(h.data(), h.data() + h.size());
      outs.push_back(oracle::forward(plain, xv, &keep));
    }
    LD acc = 0;
    for (std::size_t k = 0; k < outs.front().size(); ++k) {
      LD mean = 0, var = 0;
      for (const auto& o : outs) mean += o[k];
      mean /= tau;
      for (const auto& o : outs) var += (o[k] - mean) * (o[k] - mean);
      acc += std::sqrt(var / tau);
    }
    ref[i] = static_cast<double>(acc / static_cast<LD>(outs.front().size()));
    worst = std::max(worst, std::fabs(ref[i] - u[i]));
  }
  std::vector<std::size_t> idx(ref.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ref[a] > ref[b]; });
  idx.resize(n);
  const bool ok = idx == sel && worst <= 1e-12;
  return {ok, fmt::format("pool 5000, top {} by independent recompute {}, max |du| {:.2e}", n,
                          idx == sel ? "matches" : "DIFFERS", worst)};
}

// ---- 11 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
#ifndef ABSOPF_CLI
  return {false, "CLI target not built"};
#else
  const fs::path root = fs::temp_directory_path() / "absopf_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = kData / "fixture.cfg";
  for (const char* sub : {"a", "b"}) {
    const std::string cmd = fmt::format("\"{}\" run --config \"{}\" --seed 7 --out \"{}\" > \"{}\" 2>&1", ABSOPF_CLI,
                                        cfg.string(), (root / sub).string(), (root / (std::string(sub) + ".log")).string());
    if (std::system(cmd.c_str()) != 0) return {false, "run failed: " + slurp(root / (std::string(sub) + ".log"))};
  }
  std::size_t compared = 0;
  bool ok = true;
  std::string bad;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const auto name = e.path().filename().string();
    if (!name.starts_with("metrics_t") && !name.starts_with("samples_t")) continue;
    ++compared;
    if (!fs::exists(root / "b" / name) || slurp(e.path()) != slurp(root / "b" / name)) {
      ok = false;
      bad += " " + name;
    }
  }
  fs::remove_all(root);
  return {ok && compared >= 4, fmt::format("{} CSV files compared{}", compared, ok ? ", byte-identical" : "; differ:" + bad)};
#endif
}

// ---- 12 ------------------------------------------------------------------------

Outcome acopf_smoke() {
  auto cfg = harness::load_config(kData / "case3_smoke.cfg");
  const auto labeler = harness::make_labeler(cfg);
  const auto tr = harness::run_trial(cfg, *labeler, 0);
  const double v0 = tr.rows.front().test_violation;
  const double v1 = tr.final_eval.violation_mean;
  const double spent = tr.rows.back().budget_spent;
  const bool ok = std::isfinite(v0) && std::isfinite(v1) && v1 < v0 && spent >= cfg.budget.limit && tr.sampling_events > 0;
  return {ok, fmt::format("{} epochs, {} sampling events, budget spent {:.2f}, violation {:.4e} -> {:.4e}", tr.epochs,
                          tr.sampling_events, spent, v0, v1)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    fmt::print("{} criterion {:>2} {}: {} ({:.1f} s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail, s);
    std::fflush(stdout);
  };

  report(1, "gradient correctness", gradient_correctness);
  report(2, "IG/LG metric equivalence", ig_lg_equivalence);
  report(3, "ACOPF oracle vs brute force", acopf_vs_brute_force);
  report(4, "distributor suite", distributor_suite);
  report(5, "partition suite", partition_suite);
  report(6, "LR update truth table", lr_truth_table);
  report(7, "MC dropout", mc_dropout);

  MethodStats abs, rad, mcdue;
  bool synth_ok = true;
  std::string synth_err;
  try {
    abs = run_method("abs");
    rad = run_method("rad");
    mcdue = run_method("mcdue");
  } catch (const std::exception& e) {
    synth_ok = false;
    synth_err = e.what();
  }
  report(8, "directional efficiency", [&]() -> Outcome {
    if (!synth_ok) return {false, "exception: " + synth_err};
    return {abs.final_l1 <= rad.final_l1 && abs.final_l1 <= mcdue.final_l1,
            fmt::format("mean final test L1 over 10 seeds: ABS-IG {:.5f}, RAD {:.5f}, MCDUE {:.5f} ({:.0f}/{:.0f}/{:.0f} s)",
                        abs.final_l1, rad.final_l1, mcdue.final_l1, abs.seconds, rad.seconds, mcdue.seconds)};
  });
  report(9, "feasibility avoidance", [&]() -> Outcome {
    if (!synth_ok) return {false, "exception: " + synth_err};
    return {abs.infeasible < rad.infeasible && abs.infeasible < mcdue.infeasible,
            fmt::format("mean infeasible labels over 10 seeds: ABS-IG {:.1f}, RAD {:.1f}, MCDUE {:.1f}", abs.infeasible,
                        rad.infeasible, mcdue.infeasible)};
  });
  report(10, "MCDUE selection", mcdue_selection);
  report(11, "end-to-end determinism", cli_determinism);
  report(12, "ACOPF end-to-end smoke", acopf_smoke);

  fmt::print("{} of 12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
