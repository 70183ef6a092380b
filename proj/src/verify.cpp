#include "edlab/verify.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "edlab/data.hpp"
#include "edlab/diversity.hpp"
#include "edlab/fisher.hpp"
#include "edlab/losses.hpp"
#include "edlab/nnet.hpp"
#include "edlab/pacbayes.hpp"
#include "edlab/trainers.hpp"

namespace edlab {

namespace {

struct Check {
  const char* name;
  std::function<void(std::ostringstream&)> body;  // throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

struct Instance {
  Ensemble ensemble;
  Dataset data;
};

// Small random ensembles over random data; classification and regression.
Instance random_instance(std::mt19937_64& rng, bool classification,
                         bool uniform_rho = false) {
  std::uniform_int_distribution<int> k_dist(1, 5);
  std::uniform_int_distribution<int> n_dist(2, 25);
  std::uniform_int_distribution<int> d_dist(1, 3);
  std::uniform_int_distribution<int> h_dist(2, 5);
  std::uniform_int_distribution<int> c_dist(2, 4);
  const int k = k_dist(rng);
  const int n = n_dist(rng);
  const int d = d_dist(rng);
  const int classes = classification ? c_dist(rng) : 1;

  Instance inst;
  inst.data.task = classification ? Task::classification(classes) : Task::regression();
  inst.data.features.resize(n, d);
  inst.data.targets.resize(n);
  std::normal_distribution<Real> feat(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) inst.data.features(i, j) = feat(rng);
    inst.data.targets[i] = classification ? label(rng) : feat(rng);
  }

  std::vector<Index> dims = {d, static_cast<Index>(h_dist(rng)),
                             static_cast<Index>(classes)};
  std::vector<MlpModel> models;
  for (int m = 0; m < k; ++m)
    models.push_back(mlp_init(dims, m % 2 ? Activation::ReLU : Activation::Tanh, rng()));
  inst.ensemble = make_uniform_ensemble(std::move(models), inst.data.task);
  if (!uniform_rho) {
    std::uniform_real_distribution<Real> w(0.05, 1.0);
    VectorX rho(k);
    for (int m = 0; m < k; ++m) rho[m] = w(rng);
    inst.ensemble.rho = rho / rho.sum();
  }
  return inst;
}

LossKind pick_kind(const Instance& inst, std::mt19937_64& rng) {
  if (!inst.data.task.is_classification()) return LossKind::SquaredError;
  return rng() % 2 ? LossKind::CrossEntropy : LossKind::ZeroOne;
}

void check_gradients(std::ostringstream& detail) {
  std::mt19937_64 rng(11);
  Real worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const bool relu = trial % 2;
    std::vector<Index> dims = {3, 4, 2};
    MlpModel model = mlp_init(dims, relu ? Activation::ReLU : Activation::Tanh, rng());
    VectorX x(3), upstream(2);
    std::normal_distribution<Real> g(0.0, 1.0);
    for (int i = 0; i < 3; ++i) x[i] = g(rng);
    for (int i = 0; i < 2; ++i) upstream[i] = g(rng);
    if (relu) model = nudge_relu_preactivations(model, x);
    const GradientSet analytic = mlp_backward(model, x, upstream);
    const Real err = grad_check(
        model, [&](const MlpModel& m) { return upstream.dot(mlp_forward(m, x)); },
        analytic);
    worst = std::max(worst, err);
  }
  detail << "max rel err " << worst;
  require(worst <= 1e-5, "backward/fd mismatch");
}

void check_p2b_gradients(std::ostringstream& detail) {
  std::mt19937_64 rng(12);
  Real worst = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const bool classification = trial % 2;
    Instance inst = random_instance(rng, classification, /*uniform_rho=*/true);
    const LossKind kind =
        classification ? LossKind::CrossEntropy : LossKind::SquaredError;
    const bool tight = classification && trial % 4 == 1;
    const GaussianPrior prior{1.5, inst.ensemble.models.front().parameter_count()};
    const P2bResult result =
        p2b_objective(inst.ensemble, inst.data, prior, 2.0, 100, kind, tight);
    for (Index k = 0; k < inst.ensemble.size(); ++k) {
      Ensemble probe = inst.ensemble;
      const Real err = grad_check(
          probe.models[k],
          [&](const MlpModel& m) {
            Ensemble e = inst.ensemble;
            e.models[k] = m;
            return p2b_objective(e, inst.data, prior, 2.0, 100, kind, tight).value;
          },
          result.gradients[k]);
      worst = std::max(worst, err);
    }
  }
  detail << "max rel err " << worst;
  require(worst <= 1e-5, "p2b gradient/fd mismatch");
}

void check_softmax(std::ostringstream&) {
  std::mt19937_64 rng(13);
  std::normal_distribution<Real> g(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    VectorX logits(3);
    for (int i = 0; i < 3; ++i) logits[i] = g(rng);
    const VectorX p = softmax(logits);
    require(std::abs(p.sum() - 1.0) <= 1e-12, "softmax does not sum to 1");
    const VectorX shifted = softmax(logits.array() + 123.5);
    require((p - shifted).cwiseAbs().maxCoeff() <= 1e-12, "softmax shift variance");
  }
  VectorX extreme(2);
  extreme << 1000.0, 0.0;
  require(softmax(extreme).allFinite(), "softmax overflow");
}

void check_decomposition(std::ostringstream& detail) {
  std::mt19937_64 rng(14);
  Real worst_eq = 0.0, worst_slack = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool classification = trial % 2;
    Instance inst = random_instance(rng, classification);
    if (!classification) {
      const DecompositionReport r = decompose(inst.ensemble, inst.data, LossKind::SquaredError);
      worst_eq = std::max(worst_eq, std::abs(r.ensemble_loss - r.rhs));
      require(gap_check(r), "squared-error gap identity failed");
    } else {
      for (LossKind kind : {LossKind::CrossEntropy, LossKind::ZeroOne}) {
        const DecompositionReport r = decompose(inst.ensemble, inst.data, kind);
        worst_slack = std::max(worst_slack, r.ensemble_loss - r.rhs);
        require(r.ensemble_loss <= r.rhs + 1e-9, "decomposition bound violated");
        require(gap_check(r), "gap bound violated");
      }
    }
  }
  detail << "sq |loss-rhs| " << worst_eq << ", max bound slack " << worst_slack;
  require(worst_eq <= 1e-9, "squared-error decomposition not exact");
}

void check_tight_ce(std::ostringstream& detail) {
  std::mt19937_64 rng(15);
  Real worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = random_instance(rng, true);
    const Real plain = diversity_variance_form(inst.ensemble, inst.data, LossKind::CrossEntropy);
    const Real tight = diversity_tight_ce(inst.ensemble, inst.data);
    require(tight >= plain - 1e-9, "sharpened diversity below the plain one");
    const DecompositionReport r = decompose(inst.ensemble, inst.data, LossKind::CrossEntropy, true);
    worst = std::max(worst, r.ensemble_loss - r.rhs);
    require(r.ensemble_loss <= r.rhs + 1e-9, "sharpened bound violated");
  }
  detail << "max slack " << worst;
}

void check_variance_forms(std::ostringstream& detail) {
  std::mt19937_64 rng(16);
  Real worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool classification = trial % 2;
    Instance inst = random_instance(rng, classification);
    const LossKind kind = pick_kind(inst, rng);
    const Real a = diversity_variance_form(inst.ensemble, inst.data, kind);
    const Real b = diversity_pairwise_form(inst.ensemble, inst.data, kind);
    worst = std::max(worst, std::abs(a - b));
  }
  detail << "max |variance - pairwise| " << worst;
  require(worst <= 1e-12, "variance and pairwise forms disagree");
}

void check_covariance_identity(std::ostringstream& detail) {
  std::mt19937_64 rng(17);
  Real worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool classification = trial % 2;
    Instance inst = random_instance(rng, classification);
    const LossKind kind = pick_kind(inst, rng);
    const CovarianceReport r = covariance_decomposition(inst.ensemble, inst.data, kind);
    worst = std::max(worst, std::abs(r.diversity - (r.total_variance - r.avg_covariance)));
  }
  detail << "max identity gap " << worst;
  require(worst <= 1e-9, "covariance identity violated");
}

void check_diversity_properties(std::ostringstream&) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const bool classification = trial % 2;
    Instance inst = random_instance(rng, classification);
    const LossKind kind = pick_kind(inst, rng);
    const Real diversity = diversity_variance_form(inst.ensemble, inst.data, kind);
    Real avg = 0.0;
    for (Index k = 0; k < inst.ensemble.size(); ++k)
      avg += inst.ensemble.rho[k] *
             empirical_loss(inst.ensemble.models[k], inst.data, kind);
    require(diversity >= 0.0, "negative diversity");
    require(diversity <= avg + 1e-9, "diversity above the average loss");

    // identical members: exactly zero
    Ensemble clones = inst.ensemble;
    for (Index k = 1; k < clones.size(); ++k) clones.models[k] = clones.models[0];
    require(diversity_variance_form(clones, inst.data, kind) == 0.0,
            "identical members should have zero diversity");

    // point mass: exactly zero
    Ensemble point = inst.ensemble;
    point.rho.setZero();
    point.rho[0] = 1.0;
    require(diversity_variance_form(point, inst.data, kind) == 0.0,
            "point mass should have zero diversity");
  }
}

void check_tandem_identity(std::ostringstream& detail) {
  std::mt19937_64 rng(19);
  Real worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    const bool classification = trial % 2;
    Instance inst = random_instance(rng, classification);
    const LossKind kind = pick_kind(inst, rng);
    Real pair_avg = 0.0;
    for (Index i = 0; i < inst.ensemble.size(); ++i)
      for (Index j = 0; j < inst.ensemble.size(); ++j)
        pair_avg += inst.ensemble.rho[i] * inst.ensemble.rho[j] *
                    tandem_loss(inst.ensemble, i, j, inst.data, kind);
    Real avg = 0.0;
    for (Index k = 0; k < inst.ensemble.size(); ++k)
      avg += inst.ensemble.rho[k] *
             empirical_loss(inst.ensemble.models[k], inst.data, kind);
    const Real diversity = diversity_variance_form(inst.ensemble, inst.data, kind);
    worst = std::max(worst, std::abs(pair_avg - (avg - diversity)));
  }
  detail << "max identity gap " << worst;
  require(worst <= 1e-9, "tandem identity violated");
}

void check_nc(std::ostringstream& detail) {
  std::mt19937_64 rng(20);
  Real worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = random_instance(rng, false, /*uniform_rho=*/true);
    const NcResult r = nc_objective(inst.ensemble, inst.data, 1.0);
    const Real ensemble_loss = empirical_loss(inst.ensemble, inst.data, LossKind::SquaredError);
    worst = std::max(worst, std::abs(r.value - ensemble_loss));
  }
  detail << "max |nc(1) - ensemble loss| " << worst;
  require(worst <= 1e-9, "unit-weight correlation objective is not the ensemble loss");
}

void check_fisher(std::ostringstream& detail) {
  std::mt19937_64 rng(21);
  Real worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> k_dist(2, 6);
    const int k = k_dist(rng);
    std::uniform_real_distribution<Real> u(0.02, 1.0);
    VectorX full(k);
    for (int i = 0; i < k; ++i) full[i] = u(rng);
    full /= full.sum();
    CategoricalWeights weights{full.head(k - 1)};
    VectorX f(k);
    std::normal_distribution<Real> g(0.0, 2.0);
    for (int i = 0; i < k; ++i) f[i] = g(rng);
    const FisherReport report = variance_lower_bound(weights, f);
    require(report.lower_bound <= report.exact_variance + 1e-9, "bound above variance");
    worst = std::max(worst, std::abs(report.lower_bound - report.exact_variance));

    // brute-force score outer products
    MatrixX brute = MatrixX::Zero(k - 1, k - 1);
    for (int outcome = 0; outcome < k; ++outcome) {
      VectorX score = VectorX::Zero(k - 1);
      Real prob;
      if (outcome < k - 1) {
        score[outcome] = 1.0 / weights.p[outcome];
        prob = weights.p[outcome];
      } else {
        score.setConstant(-1.0 / weights.last());
        prob = weights.last();
      }
      brute += prob * score * score.transpose();
    }
    require((brute - report.fisher).cwiseAbs().maxCoeff() <= 1e-12,
            "information matrix differs from the brute-force expectation");
  }
  detail << "max |bound - variance| " << worst;
  require(worst <= 1e-9, "categorical bound should be tight");
}

void check_kl_and_epsilon(std::ostringstream&) {
  MixtureSpec one;
  one.component_means = {VectorX::Zero(1)};
  one.mixture_sigma2 = 0.01;
  require(std::abs(kl_mixture_delta(one, {1.0, 1}) - std::log(10.0)) <= 1e-12,
          "single-component mixture KL off");

  MixtureSpec two;
  two.component_means = {VectorX::Constant(1, -5.0), VectorX::Constant(1, 5.0)};
  two.mixture_sigma2 = 0.01;
  const Real expected = 0.5 * std::log(2.0 * 3.14159265358979323846) + 12.5 +
                        std::log(0.5) -
                        0.5 * std::log(2.0 * 3.14159265358979323846 * 0.01);
  require(std::abs(kl_mixture_delta(two, {1.0, 1}) - expected) <= 1e-12,
          "two-component mixture KL off");

  require(std::abs(pac_epsilon(LossKind::ZeroOne, 2.0, 100, 0.05,
                               EpsilonMode::hoeffding(1.0)) -
                   (4.0 / 800.0 + std::log(20.0))) <= 1e-12,
          "hoeffding epsilon off");
  require(std::abs(pac_epsilon(LossKind::CrossEntropy, 2.0, 100, 0.05,
                               EpsilonMode::omit()) -
                   std::log(20.0)) <= 1e-12,
          "omit epsilon off");
}

void check_data(std::ostringstream&) {
  SyntheticSpec spec{SineRegressionSpec{5.0, 0.1}, 40, 7};
  const Dataset a = generate(spec);
  const Dataset b = generate(spec);
  require(a.features.cwiseEqual(b.features).all() && a.targets.cwiseEqual(b.targets).all(),
          "generator is not deterministic");

  const std::string path = "/tmp/edlab_verify_roundtrip.csv";
  write_csv(a, path, ',');
  const Dataset back = load_csv(path, ',', a.target_name, a.task);
  require(back.features.cwiseEqual(a.features).all() &&
              back.targets.cwiseEqual(a.targets).all(),
          "csv round trip changed values");

  const SplitResult parts = split(a, 0.5, 3);
  require(parts.train.size() == 20 && parts.test.size() == 20, "bad split sizes");
}

}  // namespace

int run_verify(std::ostream& out) {
  const std::vector<Check> checks = {
      {"backward gradients vs finite differences", check_gradients},
      {"joint objective gradients vs finite differences", check_p2b_gradients},
      {"softmax normalization and shift invariance", check_softmax},
      {"loss decompositions (exactness and bounds)", check_decomposition},
      {"sharpened cross-entropy diversity", check_tight_ce},
      {"variance form vs pairwise form", check_variance_forms},
      {"covariance split identity", check_covariance_identity},
      {"diversity range and exact zeros", check_diversity_properties},
      {"tandem pair-average identity", check_tandem_identity},
      {"negative-correlation identity", check_nc},
      {"categorical variance lower bound", check_fisher},
      {"mixture KL and epsilon values", check_kl_and_epsilon},
      {"data generation, csv round trip, split", check_data},
  };

  int failures = 0;
  for (const auto& check : checks) {
    std::ostringstream detail;
    try {
      check.body(detail);
      out << "[ok]   " << check.name;
      if (!detail.str().empty()) out << " (" << detail.str() << ")";
      out << '\n';
    } catch (const std::exception& e) {
      ++failures;
      out << "[FAIL] " << check.name << ": " << e.what() << '\n';
    }
  }
  out << (failures == 0 ? "verify: all checks passed" : "verify: FAILURES") << '\n';
  return failures == 0 ? 0 : 1;
}

}  // namespace edlab
