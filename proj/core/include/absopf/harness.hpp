#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "absopf/config.hpp"
#include "absopf/grid.hpp"
#include "absopf/labeler.hpp"
#include "absopf/training.hpp"

namespace absopf::harness {

struct EvalResult {
  double l1_mean = 0.0;
  double violation_mean = std::numeric_limits<double>::quiet_NaN();
  double violation_max = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

/// L1 on scaled outputs; with a case, also the constraint violation of the
/// unscaled predictions averaged (and maximized) over the test set.
EvalResult evaluate(const nn::Mlp& net, std::span<const sampling::Sample> test,
                    const grid::GridCase* grid_case = nullptr);

std::unique_ptr<Labeler> make_labeler(const ExperimentConfig& cfg);
sampling::PerturbSpec perturb_spec(const ExperimentConfig& cfg, const Labeler& labeler);

/// Input scaler from the initial set; output scaler from case bounds for
/// pg/qg/vm (data range where bounds are degenerate) and data elsewhere.
void fit_scalers(nn::Mlp& net, std::span<const sampling::Sample> d0, const Labeler& labeler);

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<active::MetricsRow> rows;  // epoch 0 (initial net) first
  std::vector<sampling::Sample> labeled;
  std::vector<sampling::Sample> test;
  nn::Mlp net;
  EvalResult initial;
  EvalResult final_eval;
  std::size_t epochs = 0;
  std::size_t sampling_events = 0;
  std::size_t n_feasible = 0;
  std::size_t n_infeasible = 0;
};

/// One trial with seed = cfg.seed + t. Deterministic in (cfg, t) under
/// epoch budgets.
TrialResult run_trial(const ExperimentConfig& cfg, const Labeler& labeler, std::size_t t);

struct ExperimentSummary {
  std::vector<TrialResult> trials;
  std::filesystem::path out;
};

/// Validates the config and the output directory, runs every trial, then
/// writes metrics_t{n}.csv, samples_t{n}.csv, test_t{n}.csv,
/// model_t{n}.json and aggregate.json. Nothing is written on failure.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

void write_metrics_csv(const std::filesystem::path& path, Method method,
                       std::span<const active::MetricsRow> rows, std::size_t buckets);
void write_samples_csv(const std::filesystem::path& path, std::span<const sampling::Sample> samples);
/// Feasible (x, y) pairs: header x0..x{n-1},y0..y{m-1}.
void write_dataset_csv(const std::filesystem::path& path, std::span<const sampling::Sample> samples);
std::vector<sampling::Sample> read_dataset_csv(const std::filesystem::path& path);

/// Aggregate document (as JSON text) built from the per-trial rows only.
std::string aggregate_json(const ExperimentConfig& cfg, std::span<const TrialResult> trials);

}  // namespace absopf::harness
