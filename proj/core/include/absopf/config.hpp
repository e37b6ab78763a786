#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "absopf/active.hpp"
#include "absopf/opf_oracle.hpp"
#include "absopf/training.hpp"

namespace absopf::harness {

enum class Method { Abs, Is, Rad, Mcdue };
const char* to_string(Method m) noexcept;
Method parse_method(std::string_view s);

// Flat `key = value` experiment description. Keys match the field names
// below; see README for the full table.
struct ExperimentConfig {
  // labeler: either a case file or oracle = synthetic
  std::filesystem::path case_path;
  bool synthetic = false;
  opf::SyntheticSpec synth;
  opf::SolverOptions solver;

  Method method = Method::Abs;
  active::Metric metric = active::Metric::IG;
  active::Distributor distributor = active::Distributor::PD;
  std::size_t buckets = 8;
  std::size_t n_new = 64;
  int tau = 25;
  active::LrSchedule schedule;

  std::size_t n_init = 256;
  std::size_t n_val = 1024;
  std::size_t n_test = 5000;
  std::size_t is_size = 512;
  std::size_t pool_size = 5000;

  double load_lo = 0.8;
  double load_hi = 1.2;
  double noise_mu = 0.0;
  double noise_sigma = 0.05;

  std::size_t hidden_layers = 3;
  std::size_t hidden_width = 0;  // 0: output dimension
  double dropout = 0.15;
  std::size_t batch_size = 128;
  nn::AdamwConfig adamw;

  active::Budget budget{active::BudgetMode::Epochs, 100.0, 0.0, -1.0};

  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  unsigned threads = 1;        // trials run concurrently
  unsigned label_threads = 1;  // labeling workers inside a trial
  std::size_t eval_every = 1;
  std::vector<double> checkpoints;  // empty: 0, 0.1, ..., 1.0 times the budget
};

/// Reads a config file; relative case paths resolve against its directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
/// Throws ConfigError for the first invalid field.
void validate(const ExperimentConfig& cfg);

}  // namespace absopf::harness
