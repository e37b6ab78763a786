#include "absopf/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "absopf/errors.hpp"

namespace absopf::harness {

const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::Abs: return "abs";
    case Method::Is: return "is";
    case Method::Rad: return "rad";
    case Method::Mcdue: return "mcdue";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::Abs, Method::Is, Method::Rad, Method::Mcdue})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

namespace {

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t to_count_or_never(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "infinity" || v == "never") return active::kNever;
  return static_cast<std::size_t>(to_uint(key, v));
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::vector<std::string>&)>;

const std::string& single(const std::string& key, const std::vector<std::string>& in) {
  if (in.size() != 1) throw ConfigError("key '" + key + "' takes exactly one value");
  return in.front();
}

template <class F>
Setter one(F f) {
  return [f](ExperimentConfig& c, const std::string& k, const std::vector<std::string>& in) {
    f(c, k, single(k, in));
  };
}

#define ABS_DOUBLE(name, field) \
  {name, one([](ExperimentConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); })}
#define ABS_SIZE(name, field)                                                                       \
  {name, one([](ExperimentConfig& c, const std::string& k, const std::string& v) {                 \
     c.field = static_cast<decltype(c.field)>(to_uint(k, v));                                       \
   })}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"case", one([](ExperimentConfig& c, const std::string&, const std::string& v) { c.case_path = v; })},
      {"oracle", one([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "synthetic") c.synthetic = true;
         else if (v == "acopf") c.synthetic = false;
         else throw ConfigError("key '" + k + "': expected synthetic or acopf, got '" + v + "'");
       })},
      ABS_SIZE("synth_input_dim", synth.input_dim),
      ABS_SIZE("synth_output_dim", synth.output_dim),
      ABS_DOUBLE("synth_threshold", synth.feasibility_threshold),
      ABS_DOUBLE("synth_sharpness", synth.sharpness),
      ABS_DOUBLE("synth_bump_center", synth.bump_center),
      ABS_DOUBLE("synth_bump_width", synth.bump_width),
      ABS_SIZE("synth_seed", synth.seed),
      {"synth_nominal", [](ExperimentConfig& c, const std::string& k, const std::vector<std::string>& in) {
         c.synth.nominal.clear();
         for (const auto& v : in) c.synth.nominal.push_back(to_double(k, v));
       }},
      {"method", one([](ExperimentConfig& c, const std::string&, const std::string& v) { c.method = parse_method(v); })},
      {"metric", one([](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.metric = active::parse_metric(v);
       })},
      {"distributor", one([](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.distributor = active::parse_distributor(v);
       })},
      ABS_SIZE("buckets", buckets),
      ABS_SIZE("n_new", n_new),
      {"tau", one([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.tau = static_cast<int>(to_uint(k, v));
       })},
      {"rho1_max", one([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.schedule.rho1_max = to_count_or_never(k, v);
       })},
      {"rho2_max", one([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.schedule.rho2_max = to_count_or_never(k, v);
       })},
      ABS_DOUBLE("gamma1", schedule.gamma1),
      ABS_DOUBLE("gamma2", schedule.gamma2),
      ABS_DOUBLE("lr0", schedule.lr0),
      ABS_DOUBLE("lr_min", schedule.lr_min),
      ABS_DOUBLE("lr_max", schedule.lr_max),
      ABS_SIZE("n_init", n_init),
      ABS_SIZE("n_val", n_val),
      ABS_SIZE("n_test", n_test),
      ABS_SIZE("is_size", is_size),
      ABS_SIZE("pool_size", pool_size),
      ABS_DOUBLE("load_lo", load_lo),
      ABS_DOUBLE("load_hi", load_hi),
      ABS_DOUBLE("noise_mu", noise_mu),
      ABS_DOUBLE("noise_sigma", noise_sigma),
      ABS_SIZE("hidden_layers", hidden_layers),
      ABS_SIZE("hidden_width", hidden_width),
      ABS_DOUBLE("dropout", dropout),
      ABS_SIZE("batch_size", batch_size),
      ABS_DOUBLE("weight_decay", adamw.weight_decay),
      ABS_DOUBLE("beta1", adamw.beta1),
      ABS_DOUBLE("beta2", adamw.beta2),
      ABS_DOUBLE("adam_eps", adamw.eps),
      {"budget_mode", one([](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "epochs") c.budget.mode = active::BudgetMode::Epochs;
         else if (v == "seconds") c.budget.mode = active::BudgetMode::Seconds;
         else throw ConfigError("key '" + k + "': expected epochs or seconds, got '" + v + "'");
       })},
      ABS_DOUBLE("budget", budget.limit),
      ABS_DOUBLE("label_cost", budget.label_cost),
      ABS_DOUBLE("label_cost_infeasible", budget.label_cost_infeasible),
      ABS_SIZE("trials", trials),
      ABS_SIZE("seed", seed),
      {"out", one([](ExperimentConfig& c, const std::string&, const std::string& v) { c.out = v; })},
      ABS_SIZE("threads", threads),
      ABS_SIZE("label_threads", label_threads),
      ABS_SIZE("eval_every", eval_every),
      {"checkpoints", [](ExperimentConfig& c, const std::string& k, const std::vector<std::string>& in) {
         c.checkpoints.clear();
         for (const auto& v : in) c.checkpoints.push_back(to_double(k, v));
       }},
      ABS_DOUBLE("tol_residual", solver.tol_residual),
      ABS_DOUBLE("tol_stationarity", solver.tol_stationarity),
      ABS_SIZE("max_outer", solver.max_outer),
      ABS_SIZE("max_newton", solver.max_newton),
      ABS_DOUBLE("penalty_init", solver.penalty_init),
      ABS_DOUBLE("penalty_growth", solver.penalty_growth),
  };
  return table;
}

#undef ABS_DOUBLE
#undef ABS_SIZE

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigBase().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ExperimentConfig cfg;
  std::map<std::string, bool> seen;
  for (const auto& item : items) {
    const std::string key = item.fullname();
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown key '" + key + "'");
    if (seen[key]) throw ConfigError("duplicate key '" + key + "'");
    seen[key] = true;
    it->second(cfg, key, item.inputs);
  }
  if (!cfg.case_path.empty() && cfg.case_path.is_relative() && !base_dir.empty())
    cfg.case_path = base_dir / cfg.case_path;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void validate(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.synthetic || !c.case_path.empty(), "either 'case' or 'oracle = synthetic' is required");
  need(!(c.synthetic && !c.case_path.empty()), "'case' and 'oracle = synthetic' are mutually exclusive");
  if (c.synthetic) {
    need(c.synth.input_dim > 0 && c.synth.output_dim > 0, "synthetic dimensions must be positive");
    need(c.synth.bump_width > 0.0, "synth_bump_width must be positive");
    need(c.synth.nominal.empty() || c.synth.nominal.size() == c.synth.input_dim,
         "synth_nominal length must equal synth_input_dim");
  }
  need(c.buckets >= 1, "buckets must be at least 1");
  need(c.n_init > 0 && c.n_val > 0 && c.n_test > 0, "n_init, n_val and n_test must be positive");
  need(c.buckets <= c.n_val, "buckets must not exceed n_val");
  need(c.trials > 0, "trials must be positive");
  need(c.batch_size > 0, "batch_size must be positive");
  need(c.hidden_layers >= 2, "hidden_layers must be at least 2");
  need(c.dropout >= 0.0 && c.dropout < 1.0, "dropout must lie in [0, 1)");
  need(c.load_lo > 0.0 && c.load_lo <= c.load_hi, "need 0 < load_lo <= load_hi");
  need(c.noise_sigma >= 0.0, "noise_sigma must be non-negative");
  need(c.schedule.lr_min > 0.0 && c.schedule.lr_min <= c.schedule.lr_max, "need 0 < lr_min <= lr_max");
  need(c.schedule.lr0 >= c.schedule.lr_min && c.schedule.lr0 <= c.schedule.lr_max,
       "lr0 must lie in [lr_min, lr_max]");
  need(c.schedule.gamma1 > 0.0 && c.schedule.gamma1 < 1.0, "gamma1 must lie in (0, 1)");
  need(c.schedule.gamma2 > 1.0, "gamma2 must exceed 1");
  need(std::isfinite(c.budget.limit) && c.budget.limit >= 0.0, "budget must be finite and non-negative");
  need(c.budget.label_cost >= 0.0, "label_cost must be non-negative");
  need(c.threads >= 1 && c.label_threads >= 1, "thread counts must be positive");
  const bool mc = c.metric == active::Metric::McvP || c.metric == active::Metric::McvL;
  if (c.method == Method::Mcdue || (c.method == Method::Abs && mc)) need(c.tau >= 2, "tau must be at least 2");
  if (c.method == Method::Mcdue) need(c.pool_size >= c.n_new, "pool_size must be at least n_new");
  for (double t : c.checkpoints) need(std::isfinite(t) && t >= 0.0, "checkpoints must be finite and non-negative");
}

}  // namespace absopf::harness
