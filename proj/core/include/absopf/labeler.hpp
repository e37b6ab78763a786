#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace absopf {

namespace grid {
struct GridCase;
}

struct LabelOutcome {
  bool feasible = false;
  std::vector<double> y;  // empty unless feasible
  double seconds = 0.0;   // measured labeling time
};

/// Maps an input load vector to an optimal output vector, or reports that
/// none was found. Implementations must be safe to call concurrently.
class Labeler {
 public:
  virtual ~Labeler() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  /// `load_factor` is the scalar regional factor the input was drawn with.
  virtual LabelOutcome label(std::span<const double> x, double load_factor) const = 0;
  /// Network behind the labels, when there is one.
  virtual const grid::GridCase* grid_case() const noexcept { return nullptr; }
};

}  // namespace absopf
