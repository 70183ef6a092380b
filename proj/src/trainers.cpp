#include "edlab/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "edlab/diversity.hpp"

namespace edlab {

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  // splitmix-style spreading so epoch streams do not overlap
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset take_rows(const Dataset& data, const std::vector<Index>& rows) {
  Dataset out;
  out.task = data.task;
  out.feature_names = data.feature_names;
  out.target_name = data.target_name;
  out.features.resize(static_cast<Index>(rows.size()), data.dim());
  out.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Index>(r)) = data.features.row(rows[r]);
    out.targets[static_cast<Index>(r)] = data.targets[rows[r]];
  }
  return out;
}

Real learning_rate_at(const TrainConfig& config, int epoch) {
  Real lr = config.base_learning_rate;
  for (int decay : config.learning_rate_decay_epochs)
    if (epoch >= decay) lr *= config.learning_rate_decay_factor;
  return lr;
}

using StepObjective =
    std::function<std::vector<GradientSet>(const Ensemble&, const Dataset&)>;

Ensemble run_sgd(const TrainConfig& config, const Dataset& data,
                 const StepObjective& step, const EpochLogger& log,
                 Real diversity_weight) {
  const Index out_dim = data.task.is_classification() ? data.task.num_classes : 1;
  std::vector<Index> dims;
  dims.push_back(data.dim());
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(out_dim);

  std::vector<MlpModel> models;
  models.reserve(config.ensemble_size);
  for (int k = 0; k < config.ensemble_size; ++k) {
    const std::uint64_t seed =
        config.debug_identical_inits ? config.seed : config.seed + static_cast<std::uint64_t>(k);
    models.push_back(mlp_init(dims, config.activation, seed));
  }
  Ensemble ensemble = make_uniform_ensemble(std::move(models), data.task);

  const Index n = data.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});

  const GaussianPrior prior{config.prior_variance,
                            ensemble.models.front().parameter_count()};

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Real lr = learning_rate_at(config, epoch);
    if (!config.full_batch) {
      std::mt19937_64 rng(epoch_seed(config.seed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    const Index batch_size =
        config.full_batch ? n : std::min<Index>(config.batch_size, n);
    for (Index start = 0; start < n; start += batch_size) {
      const Index stop = std::min(start + batch_size, n);
      std::vector<Index> rows(order.begin() + start, order.begin() + stop);
      const Dataset batch = take_rows(data, rows);
      const std::vector<GradientSet> grads = step(ensemble, batch);
      for (Index k = 0; k < ensemble.size(); ++k) {
        for (std::size_t l = 0; l < ensemble.models[k].weights.size(); ++l) {
          ensemble.models[k].weights[l] -= lr * grads[k].weights[l];
          ensemble.models[k].biases[l] -= lr * grads[k].biases[l];
        }
      }
    }
    if (log) {
      EpochLogEntry entry;
      entry.epoch = epoch;
      if (config.objective == TrainObjective::NegativeCorrelation) {
        entry.objective = nc_objective(ensemble, data, config.lambda_nc).value;
      } else {
        entry.objective = p2b_objective(ensemble, data, prior, config.lambda, n,
                                        config.loss_kind, false, diversity_weight)
                              .value;
      }
      entry.avg_loss = 0.0;
      for (Index k = 0; k < ensemble.size(); ++k)
        entry.avg_loss +=
            ensemble.rho[k] * empirical_loss(ensemble.models[k], data, config.loss_kind);
      entry.diversity = diversity_variance_form(ensemble, data, config.loss_kind);
      entry.kl_term = kl_mixture_delta(
          mixture_from_ensemble(ensemble, config.mixture_sigma2), prior);
      log(entry);
    }
  }
  return ensemble;
}

}  // namespace

void validate_config(const TrainConfig& config) {
  if (config.ensemble_size < 1)
    throw std::invalid_argument("train config: ensemble_size must be >= 1");
  if (config.epochs < 0) throw std::invalid_argument("train config: negative epochs");
  if (!(config.base_learning_rate > 0))
    throw std::invalid_argument("train config: learning rate must be positive");
  if (config.batch_size < 1)
    throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(config.lambda > 0)) throw std::invalid_argument("train config: lambda must be positive");
  if (config.lambda_nc < 0 || config.lambda_nc > 1)
    throw std::invalid_argument("train config: lambda_nc must lie in [0, 1]");
  if (!(config.prior_variance > 0))
    throw std::invalid_argument("train config: prior variance must be positive");
  if (!(config.mixture_sigma2 > 0))
    throw std::invalid_argument("train config: mixture sigma2 must be positive");
  if (config.loss_kind == LossKind::ZeroOne)
    throw std::invalid_argument(
        "train config: the 0-1 loss is non-differentiable; train with the "
        "cross-entropy loss instead");
}

Ensemble train_independent(const TrainConfig& config, const Dataset& data,
                           const EpochLogger& log) {
  validate_config(config);
  validate_dataset(data);
  const Index n = data.size();
  auto step = [&config, n](const Ensemble& ensemble, const Dataset& batch) {
    const GaussianPrior p{config.prior_variance,
                          ensemble.models.front().parameter_count()};
    return p2b_objective(ensemble, batch, p, config.lambda, n, config.loss_kind,
                         false, 0.0)
        .gradients;
  };
  return run_sgd(config, data, step, log, 0.0);
}

Ensemble train_p2b(const TrainConfig& config, const Dataset& data,
                   const EpochLogger& log) {
  validate_config(config);
  validate_dataset(data);
  const Index n = data.size();
  auto step = [&config, n](const Ensemble& ensemble, const Dataset& batch) {
    const GaussianPrior p{config.prior_variance,
                          ensemble.models.front().parameter_count()};
    return p2b_objective(ensemble, batch, p, config.lambda, n, config.loss_kind,
                         false, config.diversity_weight)
        .gradients;
  };
  return run_sgd(config, data, step, log, config.diversity_weight);
}

Ensemble train(const TrainConfig& config, const Dataset& data, const EpochLogger& log) {
  switch (config.objective) {
    case TrainObjective::Independent:
      return train_independent(config, data, log);
    case TrainObjective::P2B:
      return train_p2b(config, data, log);
    case TrainObjective::NegativeCorrelation: {
      validate_config(config);
      validate_dataset(data);
      if (config.loss_kind != LossKind::SquaredError)
        throw std::invalid_argument("negative correlation training needs squared error");
      auto step = [&config](const Ensemble& ensemble, const Dataset& batch) {
        NcResult r = nc_objective(ensemble, batch, config.lambda_nc);
        if (config.l2_coefficient != 0.0) {
          const Real coeff =
              2.0 * config.l2_coefficient / static_cast<Real>(ensemble.size());
          for (Index k = 0; k < ensemble.size(); ++k)
            for (std::size_t l = 0; l < ensemble.models[k].weights.size(); ++l) {
              r.gradients[k].weights[l] += coeff * ensemble.models[k].weights[l];
              r.gradients[k].biases[l] += coeff * ensemble.models[k].biases[l];
            }
        }
        return r.gradients;
      };
      return run_sgd(config, data, step, log, config.lambda_nc);
    }
  }
  throw std::invalid_argument("train: unknown objective");
}

NcResult nc_objective(const Ensemble& ensemble, const Dataset& minibatch,
                      Real lambda_nc) {
  validate_ensemble(ensemble);
  validate_dataset(minibatch);
  if (minibatch.task.is_classification())
    throw std::invalid_argument("nc_objective: needs a regression task");
  if (ensemble.models.front().output_dim() != 1)
    throw std::invalid_argument("nc_objective: needs scalar model outputs");
  const Real uniform = 1.0 / static_cast<Real>(ensemble.size());
  for (Index k = 0; k < ensemble.size(); ++k)
    if (std::abs(ensemble.rho[k] - uniform) > 1e-12)
      throw std::invalid_argument("nc_objective: rho must be uniform");

  const Index k_count = ensemble.size();
  const Index n = minibatch.size();
  const Real k_real = static_cast<Real>(k_count);
  const Real n_real = static_cast<Real>(n);

  MatrixX outputs(n, k_count);
  for (Index b = 0; b < n; ++b) {
    const VectorX x = minibatch.features.row(b).transpose();
    for (Index k = 0; k < k_count; ++k)
      outputs(b, k) = mlp_forward(ensemble.models[k], x)[0];
  }

  NcResult result;
  Real avg_loss = 0.0;
  Real nc = 0.0;
  for (Index b = 0; b < n; ++b) {
    const Real mean = ensemble.rho.dot(outputs.row(b).transpose());
    for (Index k = 0; k < k_count; ++k) {
      const Real r = minibatch.targets[b] - outputs(b, k);
      avg_loss += ensemble.rho[k] * r * r;
      Real others = 0.0;
      for (Index j = 0; j < k_count; ++j)
        if (j != k) others += outputs(b, j) - mean;
      nc += (outputs(b, k) - mean) * others / k_real;
    }
  }
  avg_loss /= n_real;
  nc /= n_real;

  const Real diversity = diversity_variance_form(ensemble, minibatch, LossKind::SquaredError);
  if (std::abs(nc + diversity) > 1e-10)
    throw std::logic_error("nc_objective: correlation term does not match -diversity");

  result.nc = nc;
  result.value = avg_loss + lambda_nc * nc;

  result.gradients.reserve(k_count);
  for (Index k = 0; k < k_count; ++k)
    result.gradients.push_back(GradientSet::zeros_like(ensemble.models[k]));
  for (Index b = 0; b < n; ++b) {
    const VectorX x = minibatch.features.row(b).transpose();
    const Real mean = ensemble.rho.dot(outputs.row(b).transpose());
    for (Index k = 0; k < k_count; ++k) {
      Real u = (outputs(b, k) - minibatch.targets[b]) -
               lambda_nc * (outputs(b, k) - mean);
      u *= 2.0 / (k_real * n_real);
      VectorX upstream(1);
      upstream[0] = u;
      result.gradients[k].add_scaled(mlp_backward(ensemble.models[k], x, upstream), 1.0);
    }
  }
  return result;
}

}  // namespace edlab
