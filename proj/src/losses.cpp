#include "edlab/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace edlab {

namespace {

void check_kind(LossKind kind, const Task& task) {
  if (!loss_compatible(kind, task))
    throw std::invalid_argument(std::string("loss kind '") + loss_kind_name(kind) +
                                "' is incompatible with the task");
}

void check_regression_output(const MlpModel& model) {
  if (model.output_dim() != 1)
    throw std::invalid_argument("squared-error loss expects a scalar model output");
}

void check_class_index(const MlpModel& model, int y) {
  if (y < 0 || y >= model.output_dim())
    throw std::invalid_argument("class index " + std::to_string(y) + " out of range");
}

}  // namespace

Ensemble make_uniform_ensemble(std::vector<MlpModel> models, Task task) {
  Ensemble e;
  e.rho = VectorX::Constant(static_cast<Index>(models.size()), 1.0 / static_cast<Real>(models.size()));
  e.models = std::move(models);
  e.task = task;
  validate_ensemble(e);
  return e;
}

void validate_ensemble(const Ensemble& ensemble) {
  const Index k = ensemble.size();
  if (k < 1) throw std::invalid_argument("ensemble: needs at least one model");
  if (ensemble.rho.size() != k)
    throw std::invalid_argument("ensemble: rho length does not match model count");
  if (ensemble.rho.minCoeff() < 0)
    throw std::invalid_argument("ensemble: rho has negative entries");
  if (std::abs(ensemble.rho.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("ensemble: rho does not sum to 1");
  const auto& dims = ensemble.models.front().layer_dims;
  for (const auto& m : ensemble.models)
    if (m.layer_dims != dims)
      throw std::invalid_argument("ensemble: members must share layer dims");
}

void validate_dataset(const Dataset& dataset) {
  if (dataset.size() < 1) throw std::invalid_argument("dataset: empty");
  if (dataset.targets.size() != dataset.size())
    throw std::invalid_argument("dataset: target length does not match feature rows");
  if (!dataset.features.allFinite())
    throw std::invalid_argument("dataset: non-finite features");
  if (dataset.task.is_classification()) {
    for (Index i = 0; i < dataset.size(); ++i) {
      const int y = dataset.label(i);
      if (y < 0 || y >= dataset.task.num_classes)
        throw std::invalid_argument("dataset: class index out of range at row " +
                                    std::to_string(i));
    }
  }
}

bool loss_compatible(LossKind kind, const Task& task) {
  if (kind == LossKind::SquaredError) return !task.is_classification();
  return task.is_classification();
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::SquaredError: return "sq";
    case LossKind::CrossEntropy: return "ce";
    case LossKind::ZeroOne: return "01";
  }
  return "?";
}

int predicted_class(const MlpModel& model, const VectorX& x) {
  const VectorX logits = mlp_forward(model, x);
  int best = 0;
  for (Index c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = static_cast<int>(c);
  return best;
}

Real class_probability(const MlpModel& model, const VectorX& x, int y) {
  check_class_index(model, y);
  const VectorX probs = softmax(mlp_forward(model, x));
  return std::min(1.0, std::max(kProbabilityFloor, probs[y]));
}

Real individual_loss(const MlpModel& model, const VectorX& x, Real y, LossKind kind) {
  switch (kind) {
    case LossKind::SquaredError: {
      check_regression_output(model);
      const Real h = mlp_forward(model, x)[0];
      const Real r = y - h;
      return r * r;
    }
    case LossKind::CrossEntropy:
      return -std::log(class_probability(model, x, static_cast<int>(y)));
    case LossKind::ZeroOne: {
      const int target = static_cast<int>(y);
      check_class_index(model, target);
      return predicted_class(model, x) != target ? 1.0 : 0.0;
    }
  }
  throw std::invalid_argument("individual_loss: unknown loss kind");
}

VectorX ensemble_predict_average(const Ensemble& ensemble, const VectorX& x) {
  validate_ensemble(ensemble);
  VectorX acc;
  for (Index k = 0; k < ensemble.size(); ++k) {
    VectorX out = mlp_forward(ensemble.models[k], x);
    if (ensemble.task.is_classification()) out = softmax(out);
    if (k == 0)
      acc = ensemble.rho[k] * out;
    else
      acc += ensemble.rho[k] * out;
  }
  return acc;
}

int ensemble_predict_mv(const Ensemble& ensemble, const VectorX& x) {
  validate_ensemble(ensemble);
  if (!ensemble.task.is_classification())
    throw std::invalid_argument("majority vote requires a classification task");
  VectorX votes = VectorX::Zero(ensemble.models.front().output_dim());
  for (Index k = 0; k < ensemble.size(); ++k)
    votes[predicted_class(ensemble.models[k], x)] += ensemble.rho[k];
  int best = 0;
  for (Index c = 1; c < votes.size(); ++c)
    if (votes[c] > votes[best]) best = static_cast<int>(c);
  return best;
}

Real empirical_loss(const MlpModel& model, const Dataset& data, LossKind kind) {
  validate_dataset(data);
  check_kind(kind, data.task);
  Real total = 0.0;
  for (Index i = 0; i < data.size(); ++i)
    total += individual_loss(model, data.features.row(i).transpose(), data.targets[i], kind);
  return total / static_cast<Real>(data.size());
}

Real empirical_loss(const Ensemble& ensemble, const Dataset& data, LossKind kind) {
  validate_dataset(data);
  check_kind(kind, data.task);
  validate_ensemble(ensemble);
  Real total = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const VectorX x = data.features.row(i).transpose();
    switch (kind) {
      case LossKind::SquaredError: {
        const Real h = ensemble_predict_average(ensemble, x)[0];
        const Real r = data.targets[i] - h;
        total += r * r;
        break;
      }
      case LossKind::CrossEntropy: {
        // Average of the clamped member probabilities for the true class,
        // so the decomposition sees the same numbers as the loss.
        Real mu = 0.0;
        for (Index k = 0; k < ensemble.size(); ++k)
          mu += ensemble.rho[k] *
                class_probability(ensemble.models[k], x, data.label(i));
        total += -std::log(mu);
        break;
      }
      case LossKind::ZeroOne:
        total += ensemble_predict_mv(ensemble, x) != data.label(i) ? 1.0 : 0.0;
        break;
    }
  }
  return total / static_cast<Real>(data.size());
}

}  // namespace edlab
