#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "absopf/rng.hpp"

namespace absopf::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Layer {
  MatrixXd weight;  // out x in
  VectorXd bias;
};

/// Per-feature affine map raw -> (raw - lo) / (hi - lo).
struct FeatureScaler {
  VectorXd lo;
  VectorXd hi;

  std::size_t size() const noexcept { return static_cast<std::size_t>(lo.size()); }
  VectorXd scale(std::span<const double> raw) const;
  VectorXd unscale(const VectorXd& scaled) const;
  /// Throws unless hi - lo is finite and nonzero everywhere.
  void validate() const;

  static FeatureScaler identity(std::size_t n);
  /// Feature-wise min/max of `rows`, widened by `pad` times the range on each
  /// side. Degenerate features get a unit-wide range centred on the value.
  static FeatureScaler fit(std::span<const std::vector<double>> rows, double pad = 0.05);
};

/// Fully connected net, sigmoid on every layer including the output.
/// Layers 0..t-1 are hidden, the last layer is the output layer.
struct Mlp {
  std::vector<Layer> layers;
  double dropout_rate = 0.0;
  FeatureScaler x_scale;
  FeatureScaler y_scale;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(layers.front().weight.cols()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(layers.back().weight.rows()); }
  std::size_t hidden_layers() const noexcept { return layers.size() - 1; }
  void validate() const;
};

struct MlpShape {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t hidden_width = 0;
  std::size_t hidden_layers = 3;
};

/// Glorot-uniform weights, zero biases, identity scalers.
Mlp make_mlp(const MlpShape& shape, double dropout_rate, CounterRng& rng);

/// Per hidden layer, 0 for dropped units and 1/(1-rate) for kept ones.
struct DropoutMask {
  std::vector<VectorXd> hidden;
};

DropoutMask sample_mask(const Mlp& net, CounterRng& rng);

/// Inference on a scaled input. Without a mask dropout is disabled.
VectorXd forward(const Mlp& net, const VectorXd& x, const DropoutMask* mask = nullptr);

/// Mean absolute error over output coordinates.
double l1_loss(const VectorXd& yhat, const VectorXd& y);

struct Gradients {
  std::vector<MatrixXd> weight;
  std::vector<VectorXd> bias;
  VectorXd input;  // empty for batch gradients
  double loss = 0.0;
};

/// Exact gradients of l1_loss(forward(net, x, mask), y); the subgradient of
/// |.| at 0 is taken as 0.
Gradients backward(const Mlp& net, const VectorXd& x, const VectorXd& y,
                   const DropoutMask* mask = nullptr);

/// Gradients of the batch-mean loss over the columns of X (in x B) and
/// Y (out x B). With `rng`, a fresh dropout mask is drawn per column.
Gradients batch_backward(const Mlp& net, const MatrixXd& X, const MatrixXd& Y,
                         CounterRng* rng = nullptr);

/// Batch forward without dropout; columns are samples.
MatrixXd forward_batch(const Mlp& net, const MatrixXd& X);

struct AdamwConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamwState {
  AdamwConfig config;
  std::vector<MatrixXd> m_weight, v_weight;
  std::vector<VectorXd> m_bias, v_bias;
  long step = 0;

  AdamwState(const Mlp& net, AdamwConfig cfg);
};

/// Decoupled weight decay (weights only), then the bias-corrected Adam step.
void adamw_step(Mlp& net, const Gradients& grads, AdamwState& state, double lr);

/// tau forward passes, each with its own mask drawn from `rng` in order.
std::vector<VectorXd> mc_passes(const Mlp& net, const VectorXd& x, int tau, CounterRng& rng);

/// Per-coordinate population variance of the passes. Deviations are taken
/// relative to the first pass, so identical passes give exact zeros.
VectorXd pass_variance(std::span<const VectorXd> passes);

// ---- checkpoints ---------------------------------------------------------

std::string to_json(const Mlp& net);
Mlp mlp_from_json(std::string_view text);
void save_mlp(const Mlp& net, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace absopf::nn
