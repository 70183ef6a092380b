#pragma once

#include "edlab/types.hpp"

namespace edlab {

/// Categorical distribution over K outcomes parametrized by the K-1 free
/// probabilities; the last probability is implied.
struct CategoricalWeights {
  VectorX p;  // length K-1, every entry > 0, sum < 1

  Index categories() const { return p.size() + 1; }
  Real last() const { return 1.0 - p.sum(); }
};

void validate_weights(const CategoricalWeights& weights);

/// J, the score vector a, the quadratic-form lower bound a' J^-1 a and the
/// exact weighted variance it bounds.
struct FisherReport {
  MatrixX fisher;      // (K-1) x (K-1), symmetric positive definite
  VectorX score;       // a_i = f_i - f_K
  Real lower_bound = 0.0;
  Real exact_variance = 0.0;
};

/// Fisher information of the categorical weights:
/// J_ij = delta_ij / p_i + 1 / p_K (the score outer-product expectation).
MatrixX fisher_information(const CategoricalWeights& weights);

/// a_i = f_i - f_K; also the gradient of E[f] in the free probabilities.
VectorX score_vector(const CategoricalWeights& weights, const VectorX& f);

/// Solves J x = a rather than inverting. For the categorical family the
/// bound coincides with the exact variance.
FisherReport variance_lower_bound(const CategoricalWeights& weights, const VectorX& f);

}  // namespace edlab
