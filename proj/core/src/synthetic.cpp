#include <cmath>

#include "absopf/errors.hpp"
#include "absopf/opf_oracle.hpp"
#include "absopf/rng.hpp"

namespace absopf::opf {

SyntheticOracle::SyntheticOracle(SyntheticSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0)
    throw ValidationError("synthetic oracle", "dimensions must be positive");
  if (!(spec_.bump_width > 0.0)) throw ValidationError("synthetic oracle", "bump_width must be positive");
  if (spec_.nominal.empty()) spec_.nominal.assign(spec_.input_dim, 1.0);
  if (spec_.nominal.size() != spec_.input_dim)
    throw DimensionError("synthetic nominal input", spec_.input_dim, spec_.nominal.size());
  for (double v : spec_.nominal)
    if (v == 0.0) throw ValidationError("synthetic oracle", "nominal input has a zero entry");

  CounterRng rng(spec_.seed);
  const double gain = 3.0 / std::sqrt(static_cast<double>(spec_.input_dim));
  a_.resize(spec_.output_dim * spec_.input_dim);
  for (double& v : a_) v = gain * rng.normal();
  c_.resize(spec_.output_dim);
  for (double& v : c_) v = 0.5 * rng.normal();
  w_.resize(spec_.output_dim);
  for (double& v : w_) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 0.3);
}

std::vector<double> SyntheticOracle::map(std::span<const double> x) const {
  if (x.size() != spec_.input_dim) throw DimensionError("synthetic input", spec_.input_dim, x.size());
  const std::size_t d = spec_.input_dim;
  std::vector<double> u(d);
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double ratio = x[j] / spec_.nominal[j];
    u[j] = ratio - 1.0;
    s += ratio;
  }
  s /= static_cast<double>(d);
  const double z = (s - spec_.bump_center) / spec_.bump_width;
  const double bump = spec_.sharpness * std::exp(-0.5 * z * z);

  std::vector<double> y(spec_.output_dim);
  for (std::size_t k = 0; k < spec_.output_dim; ++k) {
    double act = c_[k];
    for (std::size_t j = 0; j < d; ++j) act += a_[k * d + j] * u[j];
    y[k] = 1.0 / (1.0 + std::exp(-act)) + w_[k] * bump;
  }
  return y;
}

std::vector<double> SyntheticOracle::jacobian(std::span<const double> x) const {
  if (x.size() != spec_.input_dim) throw DimensionError("synthetic input", spec_.input_dim, x.size());
  const std::size_t d = spec_.input_dim;
  std::vector<double> u(d);
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    u[j] = x[j] / spec_.nominal[j] - 1.0;
    s += x[j] / spec_.nominal[j];
  }
  s /= static_cast<double>(d);
  const double z = (s - spec_.bump_center) / spec_.bump_width;
  // d bump / d s
  const double dbump = -spec_.sharpness * std::exp(-0.5 * z * z) * z / spec_.bump_width;

  std::vector<double> jac(spec_.output_dim * d);
  for (std::size_t k = 0; k < spec_.output_dim; ++k) {
    double act = c_[k];
    for (std::size_t j = 0; j < d; ++j) act += a_[k * d + j] * u[j];
    const double sig = 1.0 / (1.0 + std::exp(-act));
    const double dsig = sig * (1.0 - sig);
    for (std::size_t j = 0; j < d; ++j)
      jac[k * d + j] = (dsig * a_[k * d + j] + w_[k] * dbump / static_cast<double>(d)) /
                       spec_.nominal[j];
  }
  return jac;
}

LabelOutcome SyntheticOracle::label(std::span<const double> x, double load_factor) const {
  LabelOutcome out;
  if (x.size() != spec_.input_dim) throw DimensionError("synthetic input", spec_.input_dim, x.size());
  if (load_factor > spec_.feasibility_threshold) return out;
  out.feasible = true;
  out.y = map(x);
  return out;
}

LabelOutcome synth_label(const SyntheticOracle& oracle, std::span<const double> x,
                         double load_factor) {
  return oracle.label(x, load_factor);
}

}  // namespace absopf::opf
