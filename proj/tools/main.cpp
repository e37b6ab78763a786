#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "absopf/errors.hpp"
#include "absopf/grid.hpp"
#include "absopf/harness.hpp"
#include "absopf/nn.hpp"

namespace {

using namespace absopf;

int cmd_run(const std::string& config, std::optional<std::size_t> trials, std::optional<std::uint64_t> seed,
            std::optional<std::string> out) {
  auto cfg = harness::load_config(config);
  if (trials) cfg.trials = *trials;
  if (seed) cfg.seed = *seed;
  if (out) cfg.out = *out;
  const auto summary = harness::run_experiment(cfg);
  for (const auto& tr : summary.trials) {
    fmt::print("trial {} seed {}: epochs {}, events {}, labels {}/{} feasible, test L1 {:.6g} -> {:.6g}",
               tr.trial, tr.seed, tr.epochs, tr.sampling_events, tr.n_feasible, tr.n_feasible + tr.n_infeasible,
               tr.initial.l1_mean, tr.final_eval.l1_mean);
    if (!std::isnan(tr.final_eval.violation_mean))
      fmt::print(", violation {:.6g} -> {:.6g}", tr.initial.violation_mean, tr.final_eval.violation_mean);
    fmt::print("\n");
  }
  fmt::print("artifacts written to {}\n", summary.out.string());
  return 0;
}

int cmd_evaluate(const std::string& model, const std::string& test, const std::string& case_path) {
  const nn::Mlp net = nn::load_mlp(model);
  const auto samples = harness::read_dataset_csv(test);
  std::optional<grid::GridCase> gc;
  if (!case_path.empty()) gc = grid::parse_case(case_path);
  const auto r = harness::evaluate(net, samples, gc ? &*gc : nullptr);
  fmt::print("samples {}\nmean_l1 {}\n", r.n, r.l1_mean);
  if (gc) fmt::print("violation_mean {}\nviolation_max {}\n", r.violation_mean, r.violation_max);
  return 0;
}

int cmd_gen_case(const std::string& fixture) {
  const grid::GridCase c = fixture == "2bus" ? grid::two_bus_fixture() : grid::three_bus_fixture();
  std::cout << grid::to_json(c) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active bucketized sampling for ACOPF neural proxies"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a multi-trial experiment");
  std::string config;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  run->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--trials", trials, "Override the trial count");
  run->add_option("--seed", seed, "Override the base seed");
  run->add_option("--out", out, "Override the output directory");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a model checkpoint on a test set");
  std::string model, test, case_path;
  eval->add_option("--model", model, "Model checkpoint (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", test, "Test set CSV (x0..,y0..)")->required()->check(CLI::ExistingFile);
  eval->add_option("--case", case_path, "Grid case for constraint violations")->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("gen-case", "Print a built-in fixture case as JSON");
  std::string fixture;
  gen->add_option("--fixture", fixture, "Fixture name")->required()->check(CLI::IsMember({"2bus", "3bus"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, trials, seed, out);
    if (*eval) return cmd_evaluate(model, test, case_path);
    if (*gen) return cmd_gen_case(fixture);
  } catch (const absopf::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "unexpected error: {}\n", e.what());
    return 3;
  }
  return 1;
}
