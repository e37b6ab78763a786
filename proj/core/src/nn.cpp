#include "absopf/nn.hpp"

#include <cmath>
#include <limits>

#include "absopf/errors.hpp"

namespace absopf::nn {

// ---- scaling -------------------------------------------------------------

VectorXd FeatureScaler::scale(std::span<const double> raw) const {
  if (raw.size() != size()) throw DimensionError("scaler input", size(), raw.size());
  VectorXd out(lo.size());
  for (long i = 0; i < lo.size(); ++i) out[i] = (raw[static_cast<std::size_t>(i)] - lo[i]) / (hi[i] - lo[i]);
  return out;
}

VectorXd FeatureScaler::unscale(const VectorXd& scaled) const {
  if (static_cast<std::size_t>(scaled.size()) != size())
    throw DimensionError("scaler input", size(), static_cast<std::size_t>(scaled.size()));
  return lo + scaled.cwiseProduct(hi - lo);
}

void FeatureScaler::validate() const {
  if (lo.size() != hi.size()) throw ValidationError("feature scaler", "lo/hi size mismatch");
  for (long i = 0; i < lo.size(); ++i) {
    const double w = hi[i] - lo[i];
    if (!std::isfinite(w) || w == 0.0)
      throw ValidationError("feature scaler", "zero or non-finite range at feature " + std::to_string(i));
  }
}

FeatureScaler FeatureScaler::identity(std::size_t n) {
  return {VectorXd::Zero(static_cast<long>(n)), VectorXd::Ones(static_cast<long>(n))};
}

FeatureScaler FeatureScaler::fit(std::span<const std::vector<double>> rows, double pad) {
  if (rows.empty()) throw ValidationError("feature scaler", "no rows to fit");
  const long n = static_cast<long>(rows.front().size());
  VectorXd lo = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  VectorXd hi = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  for (const auto& r : rows) {
    if (static_cast<long>(r.size()) != n) throw DimensionError("scaler fit row", static_cast<std::size_t>(n), r.size());
    for (long i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], r[static_cast<std::size_t>(i)]);
      hi[i] = std::max(hi[i], r[static_cast<std::size_t>(i)]);
    }
  }
  for (long i = 0; i < n; ++i) {
    const double w = hi[i] - lo[i];
    if (w <= 1e-12 * std::max(1.0, std::abs(lo[i]))) {
      const double mid = 0.5 * (lo[i] + hi[i]);
      lo[i] = mid - 0.5;
      hi[i] = mid + 0.5;
    } else {
      lo[i] -= pad * w;
      hi[i] += pad * w;
    }
  }
  return {lo, hi};
}

// ---- network -------------------------------------------------------------

void Mlp::validate() const {
  if (layers.size() < 3) throw ValidationError("mlp", "needs at least two hidden layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows())
      throw ValidationError("mlp layer " + std::to_string(l), "bias size does not match weight rows");
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows())
      throw ValidationError("mlp layer " + std::to_string(l), "input size does not match previous layer");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ValidationError("mlp", "dropout rate must be in [0, 1)");
  if (x_scale.size() != input_dim()) throw ValidationError("mlp", "input scaler dimension mismatch");
  if (y_scale.size() != output_dim()) throw ValidationError("mlp", "output scaler dimension mismatch");
  x_scale.validate();
  y_scale.validate();
}

Mlp make_mlp(const MlpShape& shape, double dropout_rate, CounterRng& rng) {
  if (shape.input_dim == 0 || shape.output_dim == 0 || shape.hidden_width == 0)
    throw ValidationError("mlp shape", "dimensions must be positive");
  if (shape.hidden_layers < 2) throw ValidationError("mlp shape", "needs at least two hidden layers");
  Mlp net;
  net.dropout_rate = dropout_rate;
  std::size_t fan_in = shape.input_dim;
  for (std::size_t l = 0; l <= shape.hidden_layers; ++l) {
    const std::size_t fan_out = l == shape.hidden_layers ? shape.output_dim : shape.hidden_width;
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{MatrixXd(static_cast<long>(fan_out), static_cast<long>(fan_in)),
                VectorXd::Zero(static_cast<long>(fan_out))};
    for (long r = 0; r < layer.weight.rows(); ++r)
      for (long c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-a, a);
    net.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  net.x_scale = FeatureScaler::identity(shape.input_dim);
  net.y_scale = FeatureScaler::identity(shape.output_dim);
  net.validate();
  return net;
}

DropoutMask sample_mask(const Mlp& net, CounterRng& rng) {
  DropoutMask m;
  const double keep = 1.0 - net.dropout_rate;
  for (std::size_t l = 0; l < net.hidden_layers(); ++l) {
    VectorXd v(net.layers[l].weight.rows());
    for (long i = 0; i < v.size(); ++i) v[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    m.hidden.push_back(std::move(v));
  }
  return m;
}

namespace {

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

/// Activations of a batch pass; `post[l]` is the input to layer l (post[0] is
/// X), `pre_mask[l]` the sigmoid output of hidden layer l before masking.
struct Pass {
  std::vector<MatrixXd> post;
  std::vector<MatrixXd> pre_mask;
  std::vector<MatrixXd> masks;
  MatrixXd out;
};

Pass run_forward(const Mlp& net, const MatrixXd& X, std::vector<MatrixXd> masks) {
  if (static_cast<std::size_t>(X.rows()) != net.input_dim())
    throw DimensionError("mlp input", net.input_dim(), static_cast<std::size_t>(X.rows()));
  Pass p;
  p.masks = std::move(masks);
  p.post.push_back(X);
  const std::size_t t = net.hidden_layers();
  for (std::size_t l = 0; l < t; ++l) {
    MatrixXd z = net.layers[l].weight * p.post.back();
    z.colwise() += net.layers[l].bias;
    MatrixXd s = sigmoid(z);
    p.pre_mask.push_back(s);
    if (!p.masks.empty()) s = s.cwiseProduct(p.masks[l]);
    p.post.push_back(std::move(s));
  }
  MatrixXd z = net.layers[t].weight * p.post.back();
  z.colwise() += net.layers[t].bias;
  p.out = sigmoid(z);
  return p;
}

/// Reverse pass for loss = sum of |out - Y| scaled by `weight`.
Gradients run_backward(const Mlp& net, const Pass& p, const MatrixXd& Y, double weight,
                       bool want_input) {
  if (Y.rows() != p.out.rows() || Y.cols() != p.out.cols())
    throw DimensionError("mlp target", static_cast<std::size_t>(p.out.rows()), static_cast<std::size_t>(Y.rows()));
  const std::size_t t = net.hidden_layers();
  Gradients g;
  g.weight.resize(t + 1);
  g.bias.resize(t + 1);
  const MatrixXd diff = p.out - Y;
  g.loss = weight * diff.cwiseAbs().sum();
  MatrixXd dz = (weight * diff.array().sign()).matrix().cwiseProduct(
      p.out.cwiseProduct((1.0 - p.out.array()).matrix()));
  for (std::size_t l = t + 1; l-- > 0;) {
    g.weight[l] = dz * p.post[l].transpose();
    g.bias[l] = dz.rowwise().sum();
    if (l == 0 && !want_input) break;
    MatrixXd da = net.layers[l].weight.transpose() * dz;
    if (l == 0) {
      g.input = da.col(0);
      break;
    }
    const MatrixXd& s = p.pre_mask[l - 1];
    if (!p.masks.empty()) da = da.cwiseProduct(p.masks[l - 1]);
    dz = da.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  }
  return g;
}

std::vector<MatrixXd> single_mask(const DropoutMask* mask) {
  std::vector<MatrixXd> out;
  if (mask)
    for (const auto& v : mask->hidden) out.emplace_back(v);
  return out;
}

}  // namespace

VectorXd forward(const Mlp& net, const VectorXd& x, const DropoutMask* mask) {
  return run_forward(net, x, single_mask(mask)).out.col(0);
}

MatrixXd forward_batch(const Mlp& net, const MatrixXd& X) { return run_forward(net, X, {}).out; }

double l1_loss(const VectorXd& yhat, const VectorXd& y) {
  if (yhat.size() != y.size())
    throw DimensionError("l1_loss", static_cast<std::size_t>(y.size()), static_cast<std::size_t>(yhat.size()));
  if (y.size() == 0) return 0.0;
  return (yhat - y).cwiseAbs().sum() / static_cast<double>(y.size());
}

Gradients backward(const Mlp& net, const VectorXd& x, const VectorXd& y, const DropoutMask* mask) {
  const Pass p = run_forward(net, x, single_mask(mask));
  return run_backward(net, p, y, 1.0 / static_cast<double>(y.size()), true);
}

Gradients batch_backward(const Mlp& net, const MatrixXd& X, const MatrixXd& Y, CounterRng* rng) {
  std::vector<MatrixXd> masks;
  if (rng && net.dropout_rate > 0.0) {
    const double keep = 1.0 - net.dropout_rate;
    for (std::size_t l = 0; l < net.hidden_layers(); ++l) {
      MatrixXd m(net.layers[l].weight.rows(), X.cols());
      for (long c = 0; c < m.cols(); ++c)
        for (long r = 0; r < m.rows(); ++r) m(r, c) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      masks.push_back(std::move(m));
    }
  }
  const Pass p = run_forward(net, X, std::move(masks));
  const double weight = 1.0 / static_cast<double>(Y.rows() * std::max<long>(1, X.cols()));
  return run_backward(net, p, Y, weight, false);
}

// ---- optimizer -----------------------------------------------------------

AdamwState::AdamwState(const Mlp& net, AdamwConfig cfg) : config(cfg) {
  for (const auto& l : net.layers) {
    m_weight.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    v_weight.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    m_bias.push_back(VectorXd::Zero(l.bias.size()));
    v_bias.push_back(VectorXd::Zero(l.bias.size()));
  }
}

void adamw_step(Mlp& net, const Gradients& grads, AdamwState& st, double lr) {
  const auto& c = st.config;
  ++st.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l].weight *= 1.0 - lr * c.weight_decay;
    update(net.layers[l].weight, grads.weight[l], st.m_weight[l], st.v_weight[l]);
    update(net.layers[l].bias, grads.bias[l], st.m_bias[l], st.v_bias[l]);
  }
}

std::vector<VectorXd> mc_passes(const Mlp& net, const VectorXd& x, int tau, CounterRng& rng) {
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(std::max(tau, 0)));
  for (int p = 0; p < tau; ++p) {
    const DropoutMask m = sample_mask(net, rng);
    out.push_back(forward(net, x, &m));
  }
  return out;
}

VectorXd pass_variance(std::span<const VectorXd> passes) {
  if (passes.empty()) throw ValidationError("pass_variance", "no passes");
  const double inv = 1.0 / static_cast<double>(passes.size());
  const VectorXd& ref = passes.front();
  VectorXd shift = VectorXd::Zero(ref.size());
  for (const auto& p : passes) shift += p - ref;
  shift *= inv;
  VectorXd var = VectorXd::Zero(ref.size());
  for (const auto& p : passes) var += (p - ref - shift).cwiseAbs2();
  return var * inv;
}

}  // namespace absopf::nn
