#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "absopf/labeler.hpp"
#include "absopf/nn.hpp"
#include "absopf/rng.hpp"
#include "absopf/sampling.hpp"

namespace absopf::active {

// ---- buckets -------------------------------------------------------------

/// A load-factor sub-interval with the validation samples that fall in it.
struct Bucket {
  std::size_t index = 0;
  sampling::Interval interval;
  std::vector<sampling::Sample> validation;
};

/// Sorts by load factor (stable) and cuts into k buckets of floor(n/k)
/// samples, the last bucket taking the remainder. Bucket i spans from its
/// first sample's factor (range.lo for i = 0) to the next bucket's first
/// factor (range.hi for the last), so the intervals tile the range.
std::vector<Bucket> partition(std::vector<sampling::Sample> validation, std::size_t k,
                              sampling::Interval range);

/// Index of the bucket whose interval holds `load_factor`; factors at or
/// beyond the top edge map to the last bucket, below the bottom to -1.
int bucket_of(std::span<const Bucket> buckets, double load_factor);

// ---- acquisition ---------------------------------------------------------

enum class Metric { LE, McvP, McvL, IG, LG };
enum class Distributor { MD, PD };

const char* to_string(Metric m) noexcept;
const char* to_string(Distributor d) noexcept;
Metric parse_metric(std::string_view s);
Distributor parse_distributor(std::string_view s);

/// Per-sample metric on scaled (x, y):
///   LE    l1 loss
///   MCV-P mean over outputs of the variance across tau dropout passes
///   MCV-L variance of the loss across tau dropout passes
///   IG    L2 norm of the loss gradient w.r.t. the input
///   LG    Frobenius norm of the loss gradient w.r.t. the output-layer weights
/// Variances are population variances. MCV metrics need tau >= 2.
double sample_metric(Metric metric, const nn::Mlp& net, const nn::VectorXd& x,
                     const nn::VectorXd& y, int tau, CounterRng& rng);

/// Mean of sample_metric over the bucket; raw samples are scaled with the
/// net's scalers. Sample j draws its dropout masks from rng.substream(j).
double score_bucket(Metric metric, const nn::Mlp& net, const Bucket& bucket, int tau,
                    const CounterRng& rng);

struct Allocation {
  std::vector<std::size_t> counts;
  std::size_t clamped = 0;  // negative scores treated as zero
};

/// MD: whole budget to the lowest-index argmax. PD: floor of the
/// proportional share plus largest remainder (ties to lower index), so the
/// counts sum to `budget`; all-zero scores split uniformly.
Allocation distribute(Distributor dist, std::span<const double> scores, long budget);

// ---- learning rate -------------------------------------------------------

inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

struct LrSchedule {
  double lr0 = 1e-3;
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  std::size_t rho1_max = 5;
  std::size_t rho2_max = 10;
  double gamma1 = 0.5;
  double gamma2 = 4.0;
};

struct TrainState {
  double lr = 1e-3;
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  std::size_t rho1 = 0;
  std::size_t rho2 = 0;
  std::size_t rho1_max = 5;
  std::size_t rho2_max = 10;
  double gamma1 = 0.5;
  double gamma2 = 4.0;
  double best_val = std::numeric_limits<double>::infinity();

  static TrainState from(const LrSchedule& s);
  bool sampling_due() const noexcept { return rho2_max != kNever && rho2 > rho2_max; }
};

/// Dual-patience update: rho1 drives decay by gamma1, rho2 drives a boost by
/// gamma2; both counters reset on a new best validation loss.
void lr_update(TrainState& st, double val_loss);

// ---- active sampling -----------------------------------------------------

struct BucketLog {
  std::size_t drawn = 0;
  std::size_t feasible = 0;
  std::size_t infeasible = 0;
  double label_time = 0.0;
};

struct SampleBatch {
  std::vector<sampling::Sample> samples;  // every labeled draw, in draw order
  std::vector<BucketLog> per_bucket;
  std::vector<double> scores;  // empty when the acquirer does not score buckets
  std::vector<std::size_t> allocation;
};

struct SamplerContext {
  const sampling::PerturbSpec& spec;
  const Labeler& labeler;
  unsigned label_threads = 1;
};

/// Scores every bucket, distributes `n_new` draws, samples each bucket's
/// interval and labels the draws. Bucket i is scored with
/// rng.substream(0).substream(i); its j-th draw uses
/// rng.substream(1).substream(i).substream(j).
SampleBatch active_sample(const nn::Mlp& net, std::span<const Bucket> buckets, Metric metric,
                          Distributor dist, std::size_t n_new, int tau,
                          const SamplerContext& ctx, const CounterRng& rng);

/// Fills per_bucket from the samples' load factors.
void tally_buckets(SampleBatch& batch, std::span<const Bucket> buckets);

}  // namespace absopf::active
