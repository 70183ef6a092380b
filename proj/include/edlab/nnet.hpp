#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "edlab/types.hpp"

namespace edlab {

enum class Activation { ReLU, Tanh };

/// Fully connected feed-forward network. Hidden layers apply `activation`,
/// the output layer is linear (regression value or classification logits).
struct MlpModel {
  std::vector<Index> layer_dims;   // input dim, hidden widths..., output dim
  std::vector<MatrixX> weights;    // weights[l]: layer_dims[l+1] x layer_dims[l]
  std::vector<VectorX> biases;     // biases[l]: layer_dims[l+1]
  Activation activation = Activation::Tanh;

  Index input_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
  Index output_dim() const { return layer_dims.empty() ? 0 : layer_dims.back(); }
  Index layer_count() const { return static_cast<Index>(weights.size()); }
  Index parameter_count() const;
};

/// Per-parameter partial derivatives, shape-congruent with an MlpModel.
struct GradientSet {
  std::vector<MatrixX> weights;
  std::vector<VectorX> biases;

  static GradientSet zeros_like(const MlpModel& model);
  void add_scaled(const GradientSet& other, Real scale);
  void scale(Real factor);
};

/// Uniform init on +-sqrt(3/fan_in) per layer (sd 1/sqrt(fan_in)), zero biases.
/// Draws come from std::mt19937_64 seeded with `seed`, layer by layer,
/// row-major within each weight matrix; identical (dims, seed) inputs give
/// bit-identical models.
MlpModel mlp_init(const std::vector<Index>& layer_dims, Activation activation,
                  std::uint64_t seed);

VectorX mlp_forward(const MlpModel& model, const VectorX& x);

/// Numerically stable softmax (max-subtracted). Output sums to 1.
VectorX softmax(const VectorX& logits);

/// Exact vector-Jacobian product: d(upstream . output)/d(params).
GradientSet mlp_backward(const MlpModel& model, const VectorX& x,
                         const VectorX& upstream);

/// Parameters flattened layer by layer, weights row-major then bias.
VectorX flatten_parameters(const MlpModel& model);
void set_parameters(MlpModel& model, const VectorX& flat);
VectorX flatten_gradients(const GradientSet& grads);

/// Max over parameters of |analytic - numeric| / max(1, |numeric|), where
/// numeric is the central finite difference of `objective` with the given step.
/// An empty parameter set yields 0.
Real grad_check(const MlpModel& model,
                const std::function<Real(const MlpModel&)>& objective,
                const GradientSet& analytic, Real step = 1e-4);

/// Shifts hidden-layer biases so no ReLU pre-activation at `x` sits within
/// `margin` of zero. Keeps finite differencing away from the kink.
MlpModel nudge_relu_preactivations(MlpModel model, const VectorX& x,
                                   Real margin = 1e-3);

}  // namespace edlab
