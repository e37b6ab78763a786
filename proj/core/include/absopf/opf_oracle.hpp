#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absopf/grid.hpp"
#include "absopf/labeler.hpp"

namespace absopf::opf {

enum class SolveStatus { Feasible, Infeasible, IterationLimit };

const char* to_string(SolveStatus s) noexcept;

struct SolverOptions {
  double tol_residual = 1e-6;     // max |balance| and thermal excess, p.u.
  double tol_stationarity = 1e-6; // projected Lagrangian gradient, inf-norm
  int max_outer = 8;
  int max_newton = 200;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  /// Residual level above which two stalled rounds declare infeasibility.
  double stall_residual = 1e-4;
};

struct SolveResult {
  SolveStatus status = SolveStatus::IterationLimit;
  std::optional<grid::GridState> state;  // set iff Feasible
  double objective = 0.0;
  double solve_time = 0.0;  // seconds
  int iterations = 0;       // Newton steps over all rounds
  double residual = 0.0;
  double stationarity = 0.0;
  std::vector<double> round_residuals;
  std::string diagnostics;
};

/// Local ACOPF solution for loads x = (pd..., qd...).
///
/// Augmented-Lagrangian penalty on the balance equations and on the thermal
/// limits (squared hinge on pf^2 + qf^2 - s_max^2), minimized by projected
/// Newton steps with box bounds enforced by clipping. Starts flat (vm = 1
/// clipped into bounds, va = 0, generation at mid-range). The penalty grows
/// by `penalty_growth` after every round.
SolveResult solve_acopf(const grid::GridCase& c, std::span<const double> x,
                        const SolverOptions& opts = {});

class AcopfLabeler final : public Labeler {
 public:
  explicit AcopfLabeler(grid::GridCase c, SolverOptions opts = {});

  std::size_t input_dim() const override { return case_.input_dim(); }
  std::size_t output_dim() const override { return case_.output_dim(); }
  LabelOutcome label(std::span<const double> x, double load_factor) const override;
  const grid::GridCase* grid_case() const noexcept override { return &case_; }

  const SolverOptions& options() const noexcept { return opts_; }

 private:
  grid::GridCase case_;
  SolverOptions opts_;
};

// ---- synthetic oracle ----------------------------------------------------

struct SyntheticSpec {
  std::size_t input_dim = 8;
  std::size_t output_dim = 8;
  double feasibility_threshold = 1.0;
  double sharpness = 1.0;
  double bump_center = 0.925;
  double bump_width = 0.01;
  std::uint64_t seed = 1;
  /// Nominal input; empty means all ones.
  std::vector<double> nominal;
};

/// Analytic stand-in for an OPF labeler:
///   u_j = x_j / nominal_j - 1,   s = mean_j(x_j / nominal_j)
///   y_k = sigmoid((A u)_k + c_k) + sharpness * w_k * exp(-(s - center)^2 / (2 width^2))
/// with A, c, w fixed by `seed`. Infeasible iff the load factor exceeds the
/// threshold.
class SyntheticOracle final : public Labeler {
 public:
  explicit SyntheticOracle(SyntheticSpec spec);

  std::size_t input_dim() const override { return spec_.input_dim; }
  std::size_t output_dim() const override { return spec_.output_dim; }
  LabelOutcome label(std::span<const double> x, double load_factor) const override;

  std::vector<double> map(std::span<const double> x) const;
  /// Row-major output_dim x input_dim.
  std::vector<double> jacobian(std::span<const double> x) const;

  const SyntheticSpec& spec() const noexcept { return spec_; }

 private:
  SyntheticSpec spec_;
  std::vector<double> a_;  // row-major output x input
  std::vector<double> c_;
  std::vector<double> w_;
};

/// Synthetic labeling as a SolveResult-like outcome.
LabelOutcome synth_label(const SyntheticOracle& oracle, std::span<const double> x,
                         double load_factor);

}  // namespace absopf::opf
