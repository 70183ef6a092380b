#include "edlab/nnet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace edlab {

namespace {

void check_input(const MlpModel& model, const VectorX& x) {
  if (x.size() != model.input_dim())
    throw std::invalid_argument("mlp: input has length " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.input_dim()));
}

Real activate(Real z, Activation a) {
  // ReLU subgradient at 0 is taken as 0.
  return a == Activation::ReLU ? (z > 0 ? z : 0.0) : std::tanh(z);
}

Real activate_derivative(Real z, Activation a) {
  if (a == Activation::ReLU) return z > 0 ? 1.0 : 0.0;
  const Real t = std::tanh(z);
  return 1.0 - t * t;
}

}  // namespace

Index MlpModel::parameter_count() const {
  Index count = 0;
  for (const auto& w : weights) count += w.size();
  for (const auto& b : biases) count += b.size();
  return count;
}

GradientSet GradientSet::zeros_like(const MlpModel& model) {
  GradientSet g;
  g.weights.reserve(model.weights.size());
  g.biases.reserve(model.biases.size());
  for (const auto& w : model.weights) g.weights.push_back(MatrixX::Zero(w.rows(), w.cols()));
  for (const auto& b : model.biases) g.biases.push_back(VectorX::Zero(b.size()));
  return g;
}

void GradientSet::add_scaled(const GradientSet& other, Real scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

void GradientSet::scale(Real factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

MlpModel mlp_init(const std::vector<Index>& layer_dims, Activation activation,
                  std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("mlp_init: need at least input and output dims");
  for (Index d : layer_dims)
    if (d < 1) throw std::invalid_argument("mlp_init: all layer dims must be >= 1");

  MlpModel model;
  model.layer_dims = layer_dims;
  model.activation = activation;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const Index fan_in = layer_dims[l];
    const Index fan_out = layer_dims[l + 1];
    const Real limit = std::sqrt(3.0 / static_cast<Real>(fan_in));
    std::uniform_real_distribution<Real> dist(-limit, limit);
    MatrixX w(fan_out, fan_in);
    for (Index i = 0; i < fan_out; ++i)
      for (Index j = 0; j < fan_in; ++j) w(i, j) = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(VectorX::Zero(fan_out));
  }
  return model;
}

VectorX mlp_forward(const MlpModel& model, const VectorX& x) {
  check_input(model, x);
  VectorX a = x;
  const Index layers = model.layer_count();
  for (Index l = 0; l < layers; ++l) {
    VectorX z = model.weights[l] * a + model.biases[l];
    if (l + 1 == layers) return z;  // linear output layer
    a.resize(z.size());
    for (Index i = 0; i < z.size(); ++i) a[i] = activate(z[i], model.activation);
  }
  return a;  // degenerate zero-layer model: identity
}

VectorX softmax(const VectorX& logits) {
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty logits");
  if (!logits.allFinite()) throw std::invalid_argument("softmax: non-finite logits");
  const Real shift = logits.maxCoeff();
  VectorX e = (logits.array() - shift).exp();
  return e / e.sum();
}

GradientSet mlp_backward(const MlpModel& model, const VectorX& x,
                         const VectorX& upstream) {
  check_input(model, x);
  if (upstream.size() != model.output_dim())
    throw std::invalid_argument("mlp_backward: upstream length mismatch");

  const Index layers = model.layer_count();
  std::vector<VectorX> activations;  // activations[l]: input to layer l
  std::vector<VectorX> pre;          // pre[l]: pre-activation of layer l
  activations.reserve(layers + 1);
  pre.reserve(layers);
  activations.push_back(x);
  for (Index l = 0; l < layers; ++l) {
    VectorX z = model.weights[l] * activations.back() + model.biases[l];
    pre.push_back(z);
    if (l + 1 == layers) break;
    VectorX a(z.size());
    for (Index i = 0; i < z.size(); ++i) a[i] = activate(z[i], model.activation);
    activations.push_back(std::move(a));
  }

  GradientSet grads = GradientSet::zeros_like(model);
  if (layers == 0) return grads;

  VectorX delta = upstream;  // output layer is linear
  for (Index l = layers - 1; l >= 0; --l) {
    grads.weights[l] = delta * activations[l].transpose();
    grads.biases[l] = delta;
    if (l == 0) break;
    VectorX back = model.weights[l].transpose() * delta;
    delta.resize(back.size());
    for (Index i = 0; i < back.size(); ++i)
      delta[i] = back[i] * activate_derivative(pre[l - 1][i], model.activation);
  }
  return grads;
}

VectorX flatten_parameters(const MlpModel& model) {
  VectorX flat(model.parameter_count());
  Index pos = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const MatrixX& w = model.weights[l];
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) flat[pos++] = w(i, j);
    const VectorX& b = model.biases[l];
    for (Index i = 0; i < b.size(); ++i) flat[pos++] = b[i];
  }
  return flat;
}

void set_parameters(MlpModel& model, const VectorX& flat) {
  if (flat.size() != model.parameter_count())
    throw std::invalid_argument("set_parameters: length mismatch");
  Index pos = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    MatrixX& w = model.weights[l];
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = flat[pos++];
    VectorX& b = model.biases[l];
    for (Index i = 0; i < b.size(); ++i) b[i] = flat[pos++];
  }
}

VectorX flatten_gradients(const GradientSet& grads) {
  Index total = 0;
  for (const auto& w : grads.weights) total += w.size();
  for (const auto& b : grads.biases) total += b.size();
  VectorX flat(total);
  Index pos = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    const MatrixX& w = grads.weights[l];
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) flat[pos++] = w(i, j);
    const VectorX& b = grads.biases[l];
    for (Index i = 0; i < b.size(); ++i) flat[pos++] = b[i];
  }
  return flat;
}

Real grad_check(const MlpModel& model,
                const std::function<Real(const MlpModel&)>& objective,
                const GradientSet& analytic, Real step) {
  const VectorX theta = flatten_parameters(model);
  const VectorX g = flatten_gradients(analytic);
  if (theta.size() != g.size())
    throw std::invalid_argument("grad_check: gradient shape mismatch");

  MlpModel probe = model;
  Real worst = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    VectorX shifted = theta;
    shifted[i] = theta[i] + step;
    set_parameters(probe, shifted);
    const Real up = objective(probe);
    shifted[i] = theta[i] - step;
    set_parameters(probe, shifted);
    const Real down = objective(probe);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error("grad_check: non-finite objective");
    const Real numeric = (up - down) / (2.0 * step);
    const Real err = std::abs(g[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

MlpModel nudge_relu_preactivations(MlpModel model, const VectorX& x, Real margin) {
  if (model.activation != Activation::ReLU) return model;
  check_input(model, x);
  VectorX a = x;
  const Index layers = model.layer_count();
  for (Index l = 0; l + 1 < layers; ++l) {
    VectorX z = model.weights[l] * a + model.biases[l];
    for (Index i = 0; i < z.size(); ++i) {
      if (std::abs(z[i]) < margin) {
        const Real target = z[i] >= 0 ? margin : -margin;
        model.biases[l][i] += target - z[i];
        z[i] = target;
      }
    }
    a.resize(z.size());
    for (Index i = 0; i < z.size(); ++i) a[i] = activate(z[i], model.activation);
  }
  return model;
}

}  // namespace edlab
