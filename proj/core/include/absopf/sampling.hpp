#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "absopf/labeler.hpp"
#include "absopf/rng.hpp"

namespace absopf::sampling {

/// Half-open load-factor interval [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double b) const noexcept { return b >= lo && b < hi; }
  double width() const noexcept { return hi - lo; }
};

/// Regional factor b ~ Uniform(lo, hi) applied to every load component, and
/// per-component noise eps ~ LogNormal(noise_mu, noise_sigma).
struct PerturbSpec {
  std::vector<double> nominal_x;
  double lo = 0.8;
  double hi = 1.2;
  double noise_mu = 0.0;
  double noise_sigma = 0.05;

  /// lo == hi is allowed and pins the factor.
  void validate() const;
  Interval range() const noexcept { return {lo, hi}; }
};

struct Draw {
  std::vector<double> x;
  double load_factor = 0.0;
};

struct Sample {
  std::vector<double> x;
  std::vector<double> y;  // empty when infeasible
  double load_factor = 0.0;
  bool feasible = false;
  double label_time = 0.0;
  int bucket = -1;  // bucket the draw was attributed to, -1 if none
};

/// x = b * nominal (.) eps. With `interval`, b is drawn from the uniform
/// restricted to it; a point interval (lo == hi) yields that factor, lo > hi throws.
Draw draw_input(const PerturbSpec& spec, std::optional<Interval> interval, CounterRng& rng);

/// Labels draws in order. With threads > 1 labeling is spread over workers;
/// the result order is always the draw order.
std::vector<Sample> label_draws(const Labeler& labeler, std::span<const Draw> draws,
                                unsigned threads = 1);

struct LabelTally {
  std::size_t drawn = 0;
  std::size_t feasible = 0;
  std::size_t infeasible = 0;
  double feasible_time = 0.0;
  double infeasible_time = 0.0;

  void add(const Sample& s) noexcept;
};

struct PerturbResult {
  std::vector<Sample> samples;  // feasible only, in draw order
  LabelTally tally;
  std::vector<Sample> infeasible;
};

/// Draw i uses `stream.substream(i)`, so the sequence depends only on
/// (spec, n, stream) and not on labeling order or thread count.
/// The n full-range draws load_perturb labels; draw i uses stream.substream(i).
std::vector<Draw> perturb_draws(const PerturbSpec& spec, std::size_t n, const CounterRng& stream);

PerturbResult load_perturb(const PerturbSpec& spec, std::size_t n, const Labeler& labeler,
                           const CounterRng& stream, unsigned threads = 1);

/// Labels full-range draws (draw i from stream.substream(i)) until `n`
/// feasible samples are collected, keeping them in draw order. Throws
/// ValidationError when `max_draws` draws do not yield enough.
struct FeasibleSet {
  std::vector<Sample> samples;
  LabelTally tally;
};
FeasibleSet collect_feasible(const PerturbSpec& spec, std::size_t n, const Labeler& labeler,
                             const CounterRng& stream, unsigned threads = 1, std::size_t max_draws = 0);

}  // namespace absopf::sampling
