#include "edlab/pacbayes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace edlab {

namespace {

constexpr Real kTightBranch = 1e-8;

void check_uniform_rho(const Ensemble& ensemble) {
  const Real uniform = 1.0 / static_cast<Real>(ensemble.size());
  for (Index k = 0; k < ensemble.size(); ++k)
    if (std::abs(ensemble.rho[k] - uniform) > 1e-12)
      throw std::invalid_argument("pacbayes: rho must be uniform");
}

// Partials of the sharpened cross-entropy weight h(m, mu); the removable
// singularity at mu = m uses the series limits.
void tight_h_partials(Real m, Real mu, Real& h, Real& dh_dm, Real& dh_dmu) {
  if (std::abs(m - mu) < kTightBranch) {
    h = 1.0 / (2.0 * m * m);
    dh_dm = -1.0 / (3.0 * m * m * m);
    dh_dmu = -2.0 / (3.0 * m * m * m);
    return;
  }
  const Real diff = m - mu;
  const Real inv2 = 1.0 / (diff * diff);
  const Real inv3 = inv2 / diff;
  const Real log_ratio = std::log(mu) - std::log(m);
  h = log_ratio * inv2 + 1.0 / (mu * diff);
  dh_dm = -inv2 / m - 2.0 * log_ratio * inv3 - inv2 / mu;
  dh_dmu = inv2 / mu + 2.0 * log_ratio * inv3 - 1.0 / (mu * mu * diff) + inv2 / mu;
}

}  // namespace

Real log_density(const GaussianPrior& prior, const VectorX& theta) {
  if (!(prior.sigma2 > 0)) throw std::invalid_argument("prior: sigma2 must be positive");
  if (theta.size() != prior.dimension)
    throw std::invalid_argument("prior: parameter dimension mismatch");
  const Real m = static_cast<Real>(prior.dimension);
  return -0.5 * m * std::log(2.0 * std::numbers::pi * prior.sigma2) -
         theta.squaredNorm() / (2.0 * prior.sigma2);
}

MixtureSpec mixture_from_ensemble(const Ensemble& ensemble, Real mixture_sigma2) {
  MixtureSpec spec;
  spec.mixture_sigma2 = mixture_sigma2;
  spec.component_means.reserve(ensemble.models.size());
  for (const auto& model : ensemble.models)
    spec.component_means.push_back(flatten_parameters(model));
  return spec;
}

Real kl_mixture_delta(const MixtureSpec& mixture, const GaussianPrior& prior) {
  if (mixture.count() < 1) throw std::invalid_argument("mixture: no components");
  if (!(mixture.mixture_sigma2 > 0))
    throw std::invalid_argument("mixture: sigma2 must be positive");
  if (mixture.dimension() != prior.dimension)
    throw std::invalid_argument("mixture: dimension does not match the prior");

  const Real k = static_cast<Real>(mixture.count());
  Real cross = 0.0;
  for (const auto& mean : mixture.component_means) cross -= log_density(prior, mean);
  cross /= k;
  const Real m = static_cast<Real>(mixture.dimension());
  return cross + std::log(1.0 / k) -
         0.5 * m * std::log(2.0 * std::numbers::pi * mixture.mixture_sigma2);
}

const char* epsilon_mode_name(EpsilonMode::Kind kind) {
  switch (kind) {
    case EpsilonMode::Kind::HoeffdingBounded: return "hoeffding";
    case EpsilonMode::Kind::UserSupplied: return "user";
    case EpsilonMode::Kind::Omit: return "omit";
  }
  return "?";
}

Real pac_epsilon(LossKind kind, Real lambda, Index n, Real xi, const EpsilonMode& mode) {
  if (!(lambda > 0)) throw std::invalid_argument("pac_epsilon: lambda must be positive");
  if (!(xi > 0 && xi < 1)) throw std::invalid_argument("pac_epsilon: xi must lie in (0,1)");
  if (n < 1) throw std::invalid_argument("pac_epsilon: n must be positive");
  const Real confidence = std::log(1.0 / xi);
  switch (mode.kind) {
    case EpsilonMode::Kind::HoeffdingBounded:
      if (!(mode.value > 0))
        throw std::invalid_argument("pac_epsilon: Hoeffding range must be positive");
      if (kind != LossKind::ZeroOne)
        throw std::invalid_argument(
            "pac_epsilon: Hoeffding mode needs a bounded tandem loss");
      return lambda * lambda * mode.value * mode.value / (8.0 * static_cast<Real>(n)) +
             confidence;
    case EpsilonMode::Kind::UserSupplied:
      return mode.value + confidence;
    case EpsilonMode::Kind::Omit:
      return confidence;
  }
  throw std::invalid_argument("pac_epsilon: unknown mode");
}

PacBoundReport pac_bound(const Ensemble& ensemble, const Dataset& data,
                         const GaussianPrior& prior, Real mixture_sigma2,
                         Real lambda, Real xi, LossKind kind,
                         const EpsilonMode& mode) {
  validate_ensemble(ensemble);
  validate_dataset(data);
  check_uniform_rho(ensemble);

  PacBoundReport report;
  report.kind = kind;
  report.alpha = loss_alpha(kind);
  report.lambda = lambda;
  report.xi = xi;
  report.n = data.size();
  report.epsilon_mode = epsilon_mode_name(mode.kind);
  report.underestimated = mode.kind == EpsilonMode::Kind::Omit;

  report.avg_empirical_loss = 0.0;
  for (Index k = 0; k < ensemble.size(); ++k)
    report.avg_empirical_loss +=
        ensemble.rho[k] * empirical_loss(ensemble.models[k], data, kind);
  report.empirical_diversity = diversity_variance_form(ensemble, data, kind);
  report.kl = kl_mixture_delta(mixture_from_ensemble(ensemble, mixture_sigma2), prior);
  report.epsilon = pac_epsilon(kind, lambda, data.size(), xi, mode);
  report.bound =
      report.alpha * (report.avg_empirical_loss - report.empirical_diversity +
                      (2.0 * report.kl + report.epsilon) /
                          (lambda * static_cast<Real>(data.size())));
  return report;
}

P2bResult p2b_objective(const Ensemble& ensemble, const Dataset& minibatch,
                        const GaussianPrior& prior, Real lambda, Index n_total,
                        LossKind kind, bool tight_ce, Real diversity_weight) {
  validate_ensemble(ensemble);
  validate_dataset(minibatch);
  check_uniform_rho(ensemble);
  if (kind == LossKind::ZeroOne)
    throw std::invalid_argument(
        "p2b_objective: the 0-1 loss is non-differentiable; train with the "
        "cross-entropy loss instead");
  if (!loss_compatible(kind, minibatch.task))
    throw std::invalid_argument("p2b_objective: loss kind incompatible with task");
  if (!(lambda > 0)) throw std::invalid_argument("p2b_objective: lambda must be positive");
  if (n_total < 1) throw std::invalid_argument("p2b_objective: n_total must be positive");

  const Index k_count = ensemble.size();
  const Index batch = minibatch.size();
  const Real k_real = static_cast<Real>(k_count);
  const Real batch_real = static_cast<Real>(batch);
  const Real prior_coeff = 2.0 / (lambda * static_cast<Real>(n_total));

  P2bResult result;
  result.gradients.reserve(k_count);
  for (Index k = 0; k < k_count; ++k)
    result.gradients.push_back(GradientSet::zeros_like(ensemble.models[k]));

  Real loss_term = 0.0;
  Real diversity_term = 0.0;

  if (kind == LossKind::SquaredError) {
    MatrixX outputs(batch, k_count);
    for (Index b = 0; b < batch; ++b) {
      const VectorX x = minibatch.features.row(b).transpose();
      for (Index k = 0; k < k_count; ++k)
        outputs(b, k) = mlp_forward(ensemble.models[k], x)[0];
    }
    for (Index b = 0; b < batch; ++b) {
      const Real y = minibatch.targets[b];
      for (Index k = 0; k < k_count; ++k) {
        const Real r = y - outputs(b, k);
        loss_term += r * r;
      }
      if (diversity_weight != 0.0)
        diversity_term += rho_variance(ensemble.rho, outputs.row(b).transpose());
    }
    loss_term /= k_real * batch_real;
    diversity_term /= batch_real;

    for (Index b = 0; b < batch; ++b) {
      const VectorX x = minibatch.features.row(b).transpose();
      const Real mean = outputs.row(b).mean();
      for (Index k = 0; k < k_count; ++k) {
        Real u = (outputs(b, k) - minibatch.targets[b]);
        if (diversity_weight != 0.0)
          u -= diversity_weight * (outputs(b, k) - mean);
        u *= 2.0 / (k_real * batch_real);
        VectorX upstream(1);
        upstream[0] = u;
        result.gradients[k].add_scaled(mlp_backward(ensemble.models[k], x, upstream), 1.0);
      }
    }
  } else {  // CrossEntropy
    std::vector<MatrixX> probs(k_count);    // raw softmax rows per member
    MatrixX true_prob(batch, k_count);      // clamped p(y|x) per (sample, member)
    for (Index k = 0; k < k_count; ++k) probs[k].resize(batch, minibatch.task.num_classes);
    for (Index b = 0; b < batch; ++b) {
      const VectorX x = minibatch.features.row(b).transpose();
      const int y = minibatch.label(b);
      for (Index k = 0; k < k_count; ++k) {
        const VectorX p = softmax(mlp_forward(ensemble.models[k], x));
        probs[k].row(b) = p.transpose();
        true_prob(b, k) = std::min(1.0, std::max(kProbabilityFloor, p[y]));
      }
    }

    for (Index b = 0; b < batch; ++b)
      for (Index k = 0; k < k_count; ++k) loss_term += -std::log(true_prob(b, k));
    loss_term /= k_real * batch_real;

    for (Index b = 0; b < batch; ++b) {
      const VectorX x = minibatch.features.row(b).transpose();
      const int y = minibatch.label(b);

      Index argmax = 0;
      for (Index k = 1; k < k_count; ++k)
        if (true_prob(b, k) > true_prob(b, argmax)) argmax = k;
      const Real m = true_prob(b, argmax);
      const Real mu = true_prob.row(b).mean();
      Real spread = 0.0;  // E_rho[(p - mu)^2]
      for (Index k = 0; k < k_count; ++k) {
        const Real d = true_prob(b, k) - mu;
        spread += d * d;
      }
      spread /= k_real;

      Real h = 0.0, dh_dm = 0.0, dh_dmu = 0.0;
      if (diversity_weight != 0.0) {
        if (tight_ce) {
          tight_h_partials(m, mu, h, dh_dm, dh_dmu);
          diversity_term += h * spread;
        } else {
          diversity_term += spread / (2.0 * m * m);
        }
      }

      for (Index k = 0; k < k_count; ++k) {
        // d objective / d p(y|x, theta_k); zero when the floor clamp is active.
        Real dp = 0.0;
        const bool clamped = probs[k](b, y) < kProbabilityFloor;
        if (!clamped) {
          dp = -1.0 / (true_prob(b, k) * k_real * batch_real);  // loss term
          if (diversity_weight != 0.0) {
            Real dd;
            if (tight_ce) {
              dd = h * 2.0 / k_real * (true_prob(b, k) - mu) + dh_dmu / k_real * spread;
              if (k == argmax) dd += dh_dm * spread;
            } else {
              dd = (true_prob(b, k) - mu) / (k_real * m * m);
              if (k == argmax) dd -= spread / (m * m * m);
            }
            dp -= diversity_weight * dd / batch_real;
          }
        }
        VectorX upstream = VectorX::Zero(minibatch.task.num_classes);
        if (dp != 0.0) {
          const Real py = probs[k](b, y);
          for (Index c = 0; c < upstream.size(); ++c) {
            const Real indicator = c == y ? 1.0 : 0.0;
            upstream[c] = dp * py * (indicator - probs[k](b, c));
          }
        }
        result.gradients[k].add_scaled(mlp_backward(ensemble.models[k], x, upstream), 1.0);
      }
    }
    diversity_term /= batch_real;
  }

  Real prior_term = 0.0;
  for (Index k = 0; k < k_count; ++k) {
    const VectorX theta = flatten_parameters(ensemble.models[k]);
    prior_term += -log_density(prior, theta);
    // gradient of -ln pi is theta / sigma2
    const Real coeff = prior_coeff / (k_real * prior.sigma2);
    for (std::size_t l = 0; l < ensemble.models[k].weights.size(); ++l) {
      result.gradients[k].weights[l] += coeff * ensemble.models[k].weights[l];
      result.gradients[k].biases[l] += coeff * ensemble.models[k].biases[l];
    }
  }
  prior_term /= k_real;

  result.value = loss_term - diversity_weight * diversity_term + prior_coeff * prior_term;
  return result;
}

}  // namespace edlab
