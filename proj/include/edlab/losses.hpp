#pragma once

#include <string>
#include <vector>

#include "edlab/nnet.hpp"
#include "edlab/types.hpp"

namespace edlab {

enum class LossKind { SquaredError, CrossEntropy, ZeroOne };

struct Task {
  enum class Kind { Regression, Classification };
  Kind kind = Kind::Regression;
  int num_classes = 0;

  static Task regression() { return {Kind::Regression, 0}; }
  static Task classification(int num_classes) { return {Kind::Classification, num_classes}; }
  bool is_classification() const { return kind == Kind::Classification; }
  bool operator==(const Task& other) const = default;
};

/// Fixed data sample: features row-per-sample, one target per row.
/// Classification targets are class indices stored as reals.
struct Dataset {
  MatrixX features;  // n x d
  VectorX targets;   // n
  Task task;
  std::vector<std::string> feature_names;  // empty means f0..f{d-1}
  std::string target_name = "target";

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  int label(Index i) const { return static_cast<int>(targets[i]); }
};

/// K models sharing one architecture, mixed by a simplex weight vector.
struct Ensemble {
  std::vector<MlpModel> models;
  VectorX rho;
  Task task;

  Index size() const { return static_cast<Index>(models.size()); }
};

Ensemble make_uniform_ensemble(std::vector<MlpModel> models, Task task);

/// Throws invalid_argument on simplex / shape violations.
void validate_ensemble(const Ensemble& ensemble);
void validate_dataset(const Dataset& dataset);

bool loss_compatible(LossKind kind, const Task& task);
const char* loss_kind_name(LossKind kind);

/// Probabilities fed into logs are clamped to [kProbabilityFloor, 1].
inline constexpr Real kProbabilityFloor = 1e-12;

/// Argmax over logits; ties resolve to the smallest class index.
int predicted_class(const MlpModel& model, const VectorX& x);

/// Clamped softmax probability of class y.
Real class_probability(const MlpModel& model, const VectorX& x, int y);

Real individual_loss(const MlpModel& model, const VectorX& x, Real y, LossKind kind);

/// Regression: rho-weighted average output. Classification: rho-weighted
/// average of the member softmax distributions.
VectorX ensemble_predict_average(const Ensemble& ensemble, const VectorX& x);

/// Class maximizing the rho-weighted count of member hard votes;
/// ties resolve to the smallest class index.
int ensemble_predict_mv(const Ensemble& ensemble, const VectorX& x);

Real empirical_loss(const MlpModel& model, const Dataset& data, LossKind kind);

/// Ensemble empirical loss: squared error of the averaged output, -log of the
/// averaged probability, or the 0-1 error of the majority vote.
Real empirical_loss(const Ensemble& ensemble, const Dataset& data, LossKind kind);

}  // namespace edlab
