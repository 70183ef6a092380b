#include "edlab/diversity.hpp"

#include <cmath>
#include <stdexcept>

namespace edlab {

namespace {

constexpr Real kTightBranch = 1e-8;

void check_inputs(const Ensemble& ensemble, const Dataset& data, LossKind kind) {
  validate_ensemble(ensemble);
  validate_dataset(data);
  if (!loss_compatible(kind, data.task) || !loss_compatible(kind, ensemble.task))
    throw std::invalid_argument("diversity: loss kind incompatible with task");
}

Real rho_mean(const VectorX& rho, const VectorX& f) { return rho.dot(f); }

// Clamped member probabilities of the true class at one sample.
VectorX member_probs(const Ensemble& ensemble, const VectorX& x, int y) {
  VectorX p(ensemble.size());
  for (Index k = 0; k < ensemble.size(); ++k)
    p[k] = class_probability(ensemble.models[k], x, y);
  return p;
}

}  // namespace

Real loss_alpha(LossKind kind) { return kind == LossKind::ZeroOne ? 4.0 : 1.0; }

Real rho_variance(const VectorX& rho, const VectorX& values) {
  Real acc = 0.0;
  for (Index k = 0; k < values.size(); ++k)
    for (Index l = k + 1; l < values.size(); ++l) {
      const Real d = values[k] - values[l];
      acc += rho[k] * rho[l] * d * d;
    }
  return acc;
}

VectorX f_values(LossKind kind, const Ensemble& ensemble, const VectorX& x, Real y) {
  const Index k_count = ensemble.size();
  VectorX f(k_count);
  switch (kind) {
    case LossKind::SquaredError:
      for (Index k = 0; k < k_count; ++k)
        f[k] = mlp_forward(ensemble.models[k], x)[0];
      break;
    case LossKind::CrossEntropy: {
      const VectorX p = member_probs(ensemble, x, static_cast<int>(y));
      const Real scale = std::sqrt(2.0) * p.maxCoeff();
      f = p / scale;
      break;
    }
    case LossKind::ZeroOne:
      for (Index k = 0; k < k_count; ++k)
        f[k] = predicted_class(ensemble.models[k], x) != static_cast<int>(y) ? 1.0 : 0.0;
      break;
  }
  return f;
}

Real f_value(LossKind kind, const Ensemble& ensemble, const VectorX& x, Real y,
             Index model_index) {
  if (model_index < 0 || model_index >= ensemble.size())
    throw std::invalid_argument("f_value: model index out of range");
  return f_values(kind, ensemble, x, y)[model_index];
}

MatrixX f_matrix(LossKind kind, const Ensemble& ensemble, const Dataset& data) {
  MatrixX f(data.size(), ensemble.size());
  for (Index i = 0; i < data.size(); ++i)
    f.row(i) =
        f_values(kind, ensemble, data.features.row(i).transpose(), data.targets[i])
            .transpose();
  return f;
}

Real diversity_variance_form(const Ensemble& ensemble, const Dataset& data,
                             LossKind kind) {
  check_inputs(ensemble, data, kind);
  const MatrixX f = f_matrix(kind, ensemble, data);
  Real acc = 0.0;
  for (Index i = 0; i < data.size(); ++i)
    acc += rho_variance(ensemble.rho, f.row(i).transpose());
  return acc / static_cast<Real>(data.size());
}

Real diversity_pairwise_form(const Ensemble& ensemble, const Dataset& data,
                             LossKind kind) {
  check_inputs(ensemble, data, kind);
  const MatrixX f = f_matrix(kind, ensemble, data);
  // A(k,l) = data mean of f_k f_l; diversity = sum_kl rho_k rho_l (A_kk - A_kl)
  const MatrixX a = f.transpose() * f / static_cast<Real>(data.size());
  Real acc = 0.0;
  for (Index k = 0; k < ensemble.size(); ++k)
    for (Index l = 0; l < ensemble.size(); ++l)
      acc += ensemble.rho[k] * ensemble.rho[l] * (a(k, k) - a(k, l));
  return acc;
}

Real tight_ce_h(Real m, Real mu) {
  if (!(mu > 0.0) || mu > m || m > 1.0)
    throw std::invalid_argument("tight_ce_h: need 0 < mu <= m <= 1");
  if (std::abs(m - mu) < kTightBranch) return 1.0 / (2.0 * m * m);
  const Real diff = m - mu;
  return (std::log(mu) - std::log(m)) / (diff * diff) + 1.0 / (mu * diff);
}

Real diversity_tight_ce(const Ensemble& ensemble, const Dataset& data) {
  check_inputs(ensemble, data, LossKind::CrossEntropy);
  Real acc = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const VectorX x = data.features.row(i).transpose();
    const VectorX p = member_probs(ensemble, x, data.label(i));
    const Real m = p.maxCoeff();
    const Real mu = rho_mean(ensemble.rho, p);
    Real spread = 0.0;
    for (Index k = 0; k < ensemble.size(); ++k) {
      const Real d = p[k] - mu;
      spread += ensemble.rho[k] * d * d;
    }
    acc += tight_ce_h(m, mu) * spread;
  }
  const Real value = acc / static_cast<Real>(data.size());
  if (!std::isfinite(value))
    throw std::runtime_error("diversity_tight_ce: non-finite value");
  return value;
}

DecompositionReport decompose(const Ensemble& ensemble, const Dataset& data,
                              LossKind kind, bool tight_ce) {
  check_inputs(ensemble, data, kind);
  if (tight_ce && kind != LossKind::CrossEntropy)
    throw std::invalid_argument("decompose: tight variant applies to cross entropy only");
  DecompositionReport r;
  r.kind = kind;
  r.tight_ce = tight_ce;
  r.alpha = loss_alpha(kind);
  r.ensemble_loss = empirical_loss(ensemble, data, kind);
  r.avg_individual_loss = 0.0;
  for (Index k = 0; k < ensemble.size(); ++k)
    r.avg_individual_loss +=
        ensemble.rho[k] * empirical_loss(ensemble.models[k], data, kind);
  r.diversity = tight_ce ? diversity_tight_ce(ensemble, data)
                         : diversity_variance_form(ensemble, data, kind);
  r.rhs = r.alpha * (r.avg_individual_loss - r.diversity);
  r.rhs_alpha1 = r.avg_individual_loss - r.diversity;
  r.gap = r.avg_individual_loss - r.ensemble_loss;
  return r;
}

CovarianceReport covariance_decomposition(const Ensemble& ensemble,
                                          const Dataset& data, LossKind kind) {
  check_inputs(ensemble, data, kind);
  if (data.size() < 2)
    throw std::invalid_argument("covariance_decomposition: needs at least 2 samples");
  const MatrixX f = f_matrix(kind, ensemble, data);
  const Real n = static_cast<Real>(data.size());

  CovarianceReport r;
  // Joint (sample, model) variance with weights rho_k / n.
  Real mean = 0.0, mean_sq = 0.0;
  for (Index i = 0; i < data.size(); ++i)
    for (Index k = 0; k < ensemble.size(); ++k) {
      const Real w = ensemble.rho[k] / n;
      mean += w * f(i, k);
      mean_sq += w * f(i, k) * f(i, k);
    }
  r.total_variance = mean_sq - mean * mean;

  const VectorX data_means = f.colwise().mean();
  const MatrixX second = f.transpose() * f / n;
  r.avg_covariance = 0.0;
  for (Index k = 0; k < ensemble.size(); ++k)
    for (Index l = 0; l < ensemble.size(); ++l)
      r.avg_covariance += ensemble.rho[k] * ensemble.rho[l] *
                          (second(k, l) - data_means[k] * data_means[l]);

  r.diversity = diversity_variance_form(ensemble, data, kind);
  return r;
}

bool gap_check(const DecompositionReport& report) {
  const Real slack = 1e-9;
  const Real limit = report.avg_individual_loss - report.ensemble_loss / report.alpha;
  if (report.diversity > limit + slack) return false;
  if (report.kind == LossKind::SquaredError && !report.tight_ce)
    return std::abs(report.diversity - limit) <= slack;
  return true;
}

SingleModelCheck single_model_check(const Ensemble& ensemble, const Dataset& data,
                                    LossKind kind, Index best_model_index) {
  check_inputs(ensemble, data, kind);
  if (best_model_index < 0 || best_model_index >= ensemble.size())
    throw std::invalid_argument("single_model_check: model index out of range");
  const Real alpha = loss_alpha(kind);
  Real avg = 0.0;
  for (Index k = 0; k < ensemble.size(); ++k)
    avg += ensemble.rho[k] * empirical_loss(ensemble.models[k], data, kind);
  const Real best = empirical_loss(ensemble.models[best_model_index], data, kind);
  const Real diversity = diversity_variance_form(ensemble, data, kind);

  SingleModelCheck result;
  result.condition_met = avg - best / alpha < diversity;
  result.ensemble_beats_single = empirical_loss(ensemble, data, kind) < best;
  return result;
}

Real tandem_loss(const Ensemble& ensemble, Index i, Index j, const Dataset& data,
                 LossKind kind) {
  check_inputs(ensemble, data, kind);
  if (i < 0 || i >= ensemble.size() || j < 0 || j >= ensemble.size())
    throw std::invalid_argument("tandem_loss: model index out of range");
  const Real n = static_cast<Real>(data.size());
  const MatrixX f = f_matrix(kind, ensemble, data);
  Real correction = 0.0;
  for (Index s = 0; s < data.size(); ++s) {
    if (kind == LossKind::ZeroOne)
      correction += (1.0 - f(s, i)) * f(s, j);  // i correct while j errs
    else
      correction += f(s, i) * f(s, i) - f(s, i) * f(s, j);
  }
  correction /= n;
  return empirical_loss(ensemble.models[i], data, kind) - correction;
}

std::optional<Index> positivity_witness(const Ensemble& ensemble,
                                        const Dataset& data, LossKind kind) {
  check_inputs(ensemble, data, kind);
  if (ensemble.size() < 2) return std::nullopt;
  const Real tol = 1e-12;
  std::vector<Index> active;  // members rho actually mixes
  for (Index k = 0; k < ensemble.size(); ++k)
    if (ensemble.rho[k] > 0) active.push_back(k);
  if (active.size() < 2) return std::nullopt;

  for (Index s = 0; s < data.size(); ++s) {
    const VectorX x = data.features.row(s).transpose();
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const MlpModel& ma = ensemble.models[active[a]];
        const MlpModel& mb = ensemble.models[active[b]];
        bool differ = false;
        switch (kind) {
          case LossKind::SquaredError:
            differ = (mlp_forward(ma, x) - mlp_forward(mb, x)).cwiseAbs().maxCoeff() > tol;
            break;
          case LossKind::ZeroOne:
            differ = predicted_class(ma, x) != predicted_class(mb, x);
            break;
          case LossKind::CrossEntropy:
            differ = (softmax(mlp_forward(ma, x)) - softmax(mlp_forward(mb, x)))
                         .cwiseAbs()
                         .maxCoeff() > tol;
            break;
        }
        if (differ) return s;
      }
    }
  }
  return std::nullopt;
}

}  // namespace edlab
