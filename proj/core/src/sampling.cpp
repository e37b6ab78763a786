#include "absopf/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "absopf/errors.hpp"

namespace absopf::sampling {

void PerturbSpec::validate() const {
  if (!(lo <= hi)) throw ValidationError("load factor range", "lo > hi");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise distribution", "sigma < 0");
  if (nominal_x.empty()) throw ValidationError("nominal input", "empty");
}

Draw draw_input(const PerturbSpec& spec, std::optional<Interval> interval, CounterRng& rng) {
  double lo = spec.lo, hi = spec.hi;
  if (interval) {
    if (!(interval->lo <= interval->hi))
      throw ValidationError("sampling interval", "empty interval [" + std::to_string(interval->lo) +
                                                     ", " + std::to_string(interval->hi) + ")");
    lo = interval->lo;
    hi = interval->hi;
  }
  Draw d;
  d.load_factor = lo == hi ? lo : rng.uniform(lo, hi);
  d.x.resize(spec.nominal_x.size());
  for (std::size_t j = 0; j < d.x.size(); ++j) {
    const double eps =
        spec.noise_sigma == 0.0 ? std::exp(spec.noise_mu)
                                : std::exp(spec.noise_mu + spec.noise_sigma * rng.normal());
    d.x[j] = d.load_factor * spec.nominal_x[j] * eps;
  }
  return d;
}

namespace {

Sample label_one(const Labeler& labeler, const Draw& d) {
  LabelOutcome out = labeler.label(d.x, d.load_factor);
  Sample s;
  s.x = d.x;
  s.load_factor = d.load_factor;
  s.feasible = out.feasible;
  s.y = std::move(out.y);
  s.label_time = out.seconds;
  if (s.feasible && s.y.size() != labeler.output_dim())
    throw DimensionError("labeler output", labeler.output_dim(), s.y.size());
  return s;
}

}  // namespace

std::vector<Sample> label_draws(const Labeler& labeler, std::span<const Draw> draws,
                                unsigned threads) {
  std::vector<Sample> out(draws.size());
  if (threads <= 1 || draws.size() < 2) {
    for (std::size_t i = 0; i < draws.size(); ++i) out[i] = label_one(labeler, draws[i]);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(draws.size()));
    for (unsigned t = 0; t < count; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < draws.size(); i = next++) {
          try {
            out[i] = label_one(labeler, draws[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = draws.size();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void LabelTally::add(const Sample& s) noexcept {
  ++drawn;
  if (s.feasible) {
    ++feasible;
    feasible_time += s.label_time;
  } else {
    ++infeasible;
    infeasible_time += s.label_time;
  }
}

std::vector<Draw> perturb_draws(const PerturbSpec& spec, std::size_t n, const CounterRng& stream) {
  spec.validate();
  std::vector<Draw> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng = stream.substream(i);
    draws.push_back(draw_input(spec, std::nullopt, rng));
  }
  return draws;
}

PerturbResult load_perturb(const PerturbSpec& spec, std::size_t n, const Labeler& labeler,
                           const CounterRng& stream, unsigned threads) {
  spec.validate();
  if (spec.nominal_x.size() != labeler.input_dim())
    throw DimensionError("nominal input", labeler.input_dim(), spec.nominal_x.size());

  const std::vector<Draw> draws = perturb_draws(spec, n, stream);
  PerturbResult result;
  for (Sample& s : label_draws(labeler, draws, threads)) {
    result.tally.add(s);
    (s.feasible ? result.samples : result.infeasible).push_back(std::move(s));
  }
  return result;
}

FeasibleSet collect_feasible(const PerturbSpec& spec, std::size_t n, const Labeler& labeler,
                             const CounterRng& stream, unsigned threads, std::size_t max_draws) {
  spec.validate();
  if (spec.nominal_x.size() != labeler.input_dim())
    throw DimensionError("nominal input", labeler.input_dim(), spec.nominal_x.size());
  if (max_draws == 0) max_draws = 100 * n + 1000;

  FeasibleSet out;
  std::size_t next = 0;
  while (out.samples.size() < n) {
    if (next >= max_draws)
      throw ValidationError("sampling", "only " + std::to_string(out.samples.size()) + " of " + std::to_string(n) +
                                            " feasible samples after " + std::to_string(next) + " draws");
    const std::size_t chunk = std::min(max_draws - next, std::max<std::size_t>(64, 2 * (n - out.samples.size())));
    std::vector<Draw> draws;
    draws.reserve(chunk);
    for (std::size_t i = 0; i < chunk; ++i) {
      CounterRng rng = stream.substream(next + i);
      draws.push_back(draw_input(spec, std::nullopt, rng));
    }
    next += chunk;
    for (Sample& s : label_draws(labeler, draws, threads)) {
      if (out.samples.size() == n) break;
      out.tally.add(s);
      if (s.feasible) out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace absopf::sampling
