#pragma once

#include <optional>

#include "edlab/losses.hpp"
#include "edlab/types.hpp"

namespace edlab {

/// One loss-decomposition evaluation: ensemble loss, rho-average of the
/// individual losses, diversity, and the resulting bound.
/// rhs = alpha * (avg_individual_loss - diversity); for squared error the
/// bound is an identity. rhs_alpha1 drops the alpha factor and is
/// informational for the 0-1 loss, where alpha is 4.
struct DecompositionReport {
  LossKind kind = LossKind::SquaredError;
  Real ensemble_loss = 0.0;
  Real avg_individual_loss = 0.0;
  Real diversity = 0.0;
  Real alpha = 1.0;
  Real rhs = 0.0;
  Real gap = 0.0;        // avg_individual_loss - ensemble_loss
  Real rhs_alpha1 = 0.0; // avg_individual_loss - diversity
  bool tight_ce = false;
};

/// Split of the model-and-data variance of f into diversity plus the
/// rho-pair-averaged covariance across the data:
/// diversity = total_variance - avg_covariance.
struct CovarianceReport {
  Real total_variance = 0.0;
  Real avg_covariance = 0.0;
  Real diversity = 0.0;
};

Real loss_alpha(LossKind kind);  // 1 for sq/ce, 4 for 0-1

/// Weighted variance through the symmetric difference form
/// 1/2 sum_kl rho_k rho_l (f_k - f_l)^2: exactly zero for constant values
/// or a point-mass rho, and never negative in floating point.
Real rho_variance(const VectorX& rho, const VectorX& values);

/// The scalar whose per-sample rho-variance, averaged over the data, is the
/// diversity. Squared error: the model output. Cross entropy: p(y|x) scaled
/// by 1/(sqrt(2) * max over members of p(y|x)). Zero-one: the error
/// indicator of the member's hard prediction.
Real f_value(LossKind kind, const Ensemble& ensemble, const VectorX& x, Real y,
             Index model_index);

/// f values of all K members at one sample.
VectorX f_values(LossKind kind, const Ensemble& ensemble, const VectorX& x, Real y);

/// n x K matrix of f values over a dataset.
MatrixX f_matrix(LossKind kind, const Ensemble& ensemble, const Dataset& data);

/// Mean over samples of the rho-variance of f. Evaluated through the
/// symmetric pairwise-difference form of the variance, which returns an
/// exact 0 for identical members or a point-mass rho.
Real diversity_variance_form(const Ensemble& ensemble, const Dataset& data,
                             LossKind kind);

/// Same quantity via the rho-pair expectation of E_data[f^2 - f f'].
Real diversity_pairwise_form(const Ensemble& ensemble, const Dataset& data,
                             LossKind kind);

/// Sharpened cross-entropy diversity: mean over samples of
/// h(m, mu) * E_rho[(p - mu)^2] with m the member max of p(y|x) and mu its
/// rho-mean. Never smaller than the plain cross-entropy diversity.
Real diversity_tight_ce(const Ensemble& ensemble, const Dataset& data);

/// h(m, mu) = (ln mu - ln m)/(m - mu)^2 + 1/(mu (m - mu)); the removable
/// singularity at mu = m is replaced by its limit 1/(2 m^2) when
/// |m - mu| < 1e-8.
Real tight_ce_h(Real m, Real mu);

DecompositionReport decompose(const Ensemble& ensemble, const Dataset& data,
                              LossKind kind, bool tight_ce = false);

/// Needs n >= 2; all data moments use the 1/n normalizer so the identity
/// holds exactly.
CovarianceReport covariance_decomposition(const Ensemble& ensemble,
                                          const Dataset& data, LossKind kind);

/// diversity <= avg_individual_loss - ensemble_loss / alpha (+1e-9 slack);
/// for squared error the two sides must agree within 1e-9.
bool gap_check(const DecompositionReport& report);

struct SingleModelCheck {
  bool condition_met = false;        // avg - loss(best)/alpha < diversity
  bool ensemble_beats_single = false;  // ensemble loss < loss(best)
};

SingleModelCheck single_model_check(const Ensemble& ensemble, const Dataset& data,
                                    LossKind kind, Index best_model_index);

/// Pairwise loss whose rho x rho average equals
/// avg_individual_loss - diversity.
Real tandem_loss(const Ensemble& ensemble, Index i, Index j, const Dataset& data,
                 LossKind kind);

/// First sample index where two positive-weight members disagree beyond
/// 1e-12: raw outputs for squared error, hard predictions for 0-1,
/// softmax distributions for cross entropy. Empty when all agree.
std::optional<Index> positivity_witness(const Ensemble& ensemble,
                                        const Dataset& data, LossKind kind);

}  // namespace edlab
