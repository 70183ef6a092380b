#pragma once

#include <string>
#include <vector>

#include "edlab/diversity.hpp"
#include "edlab/losses.hpp"
#include "edlab/types.hpp"

namespace edlab {

/// Isotropic Gaussian prior over the flattened model parameters.
struct GaussianPrior {
  Real sigma2 = 1.0;
  Index dimension = 0;
};

Real log_density(const GaussianPrior& prior, const VectorX& theta);

/// Uniform mixture of sharp Gaussians centered at the member parameter
/// vectors; the differentiable stand-in for a discrete ensemble.
struct MixtureSpec {
  std::vector<VectorX> component_means;
  Real mixture_sigma2 = 1e-4;

  Index count() const { return static_cast<Index>(component_means.size()); }
  Index dimension() const {
    return component_means.empty() ? 0 : component_means.front().size();
  }
};

MixtureSpec mixture_from_ensemble(const Ensemble& ensemble, Real mixture_sigma2);

/// Closed-form sharp-mixture approximation of KL(mixture || prior):
///   -1/K sum_k ln pi(theta_k) + ln(1/K) - M/2 ln(2 pi sigma2).
/// The constant terms are kept so values are comparable across runs with
/// fixed K, M and sigma2. The peak-density treatment of the mixture's own
/// log-density overstates the exact KL by M/2 nats plus a small curvature
/// term; see the unit tests for the measured gap.
Real kl_mixture_delta(const MixtureSpec& mixture, const GaussianPrior& prior);

/// How the data-dependent slack of the bound is obtained. Hoeffding needs a
/// bounded tandem loss (range r); unbounded losses must supply a value or
/// omit the term, which flags the report as underestimated.
struct EpsilonMode {
  enum class Kind { HoeffdingBounded, UserSupplied, Omit };
  Kind kind = Kind::Omit;
  Real value = 0.0;  // range r, or the supplied moment term

  static EpsilonMode hoeffding(Real range) { return {Kind::HoeffdingBounded, range}; }
  static EpsilonMode user_supplied(Real v) { return {Kind::UserSupplied, v}; }
  static EpsilonMode omit() { return {Kind::Omit, 0.0}; }
};

const char* epsilon_mode_name(EpsilonMode::Kind kind);

Real pac_epsilon(LossKind kind, Real lambda, Index n, Real xi, const EpsilonMode& mode);

/// bound = alpha (avg_empirical_loss - empirical_diversity
///                + (2 kl + epsilon) / (lambda n)).
struct PacBoundReport {
  LossKind kind = LossKind::ZeroOne;
  Real alpha = 4.0;
  Real avg_empirical_loss = 0.0;
  Real empirical_diversity = 0.0;
  Real kl = 0.0;
  Real epsilon = 0.0;
  Real lambda = 2.0;
  Real xi = 0.05;
  Index n = 0;
  Real bound = 0.0;
  std::string epsilon_mode = "omit";
  bool underestimated = false;
};

/// Requires uniform rho (the mixture construction assumes it).
PacBoundReport pac_bound(const Ensemble& ensemble, const Dataset& data,
                         const GaussianPrior& prior, Real mixture_sigma2,
                         Real lambda, Real xi, LossKind kind,
                         const EpsilonMode& mode);

struct P2bResult {
  Real value = 0.0;
  std::vector<GradientSet> gradients;
};

/// Joint ensemble objective
///   1/K sum_k L(theta_k, batch) - w_div * diversity(batch)
///   + 2/(lambda n_total) * (-1/K sum_k ln pi(theta_k)),
/// with exact gradients through every term, including the member-max inside
/// the cross-entropy diversity (ties take the first maximizer). The
/// parameter-independent mixture constant is omitted from the value.
/// Requires uniform rho and a differentiable loss (0-1 is rejected).
/// tight_ce swaps the cross-entropy diversity for its sharpened variant.
P2bResult p2b_objective(const Ensemble& ensemble, const Dataset& minibatch,
                        const GaussianPrior& prior, Real lambda, Index n_total,
                        LossKind kind, bool tight_ce = false,
                        Real diversity_weight = 1.0);

}  // namespace edlab
