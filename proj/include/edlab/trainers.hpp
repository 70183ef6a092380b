#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "edlab/losses.hpp"
#include "edlab/pacbayes.hpp"
#include "edlab/types.hpp"

namespace edlab {

enum class TrainObjective { Independent, P2B, NegativeCorrelation };

struct TrainConfig {
  LossKind loss_kind = LossKind::SquaredError;
  int ensemble_size = 4;
  int epochs = 250;
  Real base_learning_rate = 1e-3;
  int batch_size = 32;
  Real l2_coefficient = 2e-4;  // used by the negative-correlation objective
  std::vector<int> learning_rate_decay_epochs = {60, 120, 160};
  Real learning_rate_decay_factor = 0.1;
  std::uint64_t seed = 0;
  TrainObjective objective = TrainObjective::Independent;
  Real lambda_nc = 0.5;        // in [0, 1]
  Real lambda = 2.0;
  Real prior_variance = 1.0;
  Real mixture_sigma2 = 1e-4;
  std::vector<Index> hidden_dims = {50};
  Activation activation = Activation::Tanh;
  // Debug switches used by the reproducibility checks.
  bool debug_identical_inits = false;
  bool full_batch = false;
  Real diversity_weight = 1.0;  // 0 reduces the joint objective to independent
};

void validate_config(const TrainConfig& config);

struct EpochLogEntry {
  int epoch = 0;
  Real objective = 0.0;
  Real avg_loss = 0.0;
  Real diversity = 0.0;
  Real kl_term = 0.0;
};

using EpochLogger = std::function<void(const EpochLogEntry&)>;

/// Each member minimizes its own loss plus the prior pull; members differ
/// only through their seeds (seed + k).
Ensemble train_independent(const TrainConfig& config, const Dataset& data,
                           const EpochLogger& log = {});

/// Joint minimization of the bound objective over all members at once; same
/// initialization scheme as train_independent so seeds pair up.
Ensemble train_p2b(const TrainConfig& config, const Dataset& data,
                   const EpochLogger& log = {});

/// Dispatch on config.objective.
Ensemble train(const TrainConfig& config, const Dataset& data,
               const EpochLogger& log = {});

struct NcResult {
  Real value = 0.0;
  Real nc = 0.0;  // the negative-correlation double sum; equals -diversity
  std::vector<GradientSet> gradients;
};

/// Negative-correlation objective for regression ensembles:
///   value = avg member loss - lambda_nc * squared-error diversity.
/// The double-sum form of the correlation term is computed and checked
/// against -diversity on every call.
NcResult nc_objective(const Ensemble& ensemble, const Dataset& minibatch, Real lambda_nc);

}  // namespace edlab
