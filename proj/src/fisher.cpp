#include "edlab/fisher.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>

namespace edlab {

void validate_weights(const CategoricalWeights& weights) {
  if (weights.p.size() < 1)
    throw std::invalid_argument("categorical weights: need at least 2 categories");
  for (Index i = 0; i < weights.p.size(); ++i)
    if (!(weights.p[i] > 0.0))
      throw std::invalid_argument("categorical weights: probabilities must be positive");
  if (!(weights.last() > 0.0))
    throw std::invalid_argument("categorical weights: implied last probability must be positive");
}

MatrixX fisher_information(const CategoricalWeights& weights) {
  validate_weights(weights);
  const Index m = weights.p.size();
  const Real inv_last = 1.0 / weights.last();
  MatrixX j = MatrixX::Constant(m, m, inv_last);
  for (Index i = 0; i < m; ++i) j(i, i) += 1.0 / weights.p[i];
  return j;
}

VectorX score_vector(const CategoricalWeights& weights, const VectorX& f) {
  validate_weights(weights);
  if (f.size() != weights.categories())
    throw std::invalid_argument("score_vector: f must have one value per category");
  return f.head(f.size() - 1).array() - f[f.size() - 1];
}

FisherReport variance_lower_bound(const CategoricalWeights& weights, const VectorX& f) {
  FisherReport report;
  report.fisher = fisher_information(weights);
  report.score = score_vector(weights, f);

  Eigen::LLT<MatrixX> llt(report.fisher);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("variance_lower_bound: Fisher matrix factorization failed");
  report.lower_bound = report.score.dot(llt.solve(report.score));

  const Index k = weights.categories();
  Real mean = 0.0, mean_sq = 0.0;
  for (Index i = 0; i < k; ++i) {
    const Real w = i + 1 < k ? weights.p[i] : weights.last();
    mean += w * f[i];
    mean_sq += w * f[i] * f[i];
  }
  report.exact_variance = mean_sq - mean * mean;
  return report;
}

}  // namespace edlab
