#include "edlab/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace edlab {

namespace {

Json flat_row_major(const MatrixX& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Json vector_json(const VectorX& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

VectorX vector_from_json(const Json& j) {
  VectorX v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& item : j) v[i++] = item.get<Real>();
  return v;
}

const char* activation_name(Activation a) {
  return a == Activation::ReLU ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

}  // namespace

Json to_json(const MlpModel& model) {
  Json j;
  j["layer_dims"] = model.layer_dims;
  j["activation"] = activation_name(model.activation);
  Json weights = Json::array();
  for (const auto& w : model.weights) weights.push_back(flat_row_major(w));
  j["weights"] = weights;
  Json biases = Json::array();
  for (const auto& b : model.biases) biases.push_back(vector_json(b));
  j["biases"] = biases;
  return j;
}

MlpModel model_from_json(const Json& j) {
  MlpModel model;
  model.layer_dims = j.at("layer_dims").get<std::vector<Index>>();
  model.activation = activation_from_name(j.at("activation").get<std::string>());
  if (model.layer_dims.size() < 2)
    throw std::invalid_argument("model json: need at least two layer dims");
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (weights.size() + 1 != model.layer_dims.size() || biases.size() != weights.size())
    throw std::invalid_argument("model json: layer count mismatch");
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const Index rows = model.layer_dims[l + 1];
    const Index cols = model.layer_dims[l];
    const auto& flat = weights[l];
    if (static_cast<Index>(flat.size()) != rows * cols)
      throw std::invalid_argument("model json: weight size mismatch at layer " +
                                  std::to_string(l));
    MatrixX w(rows, cols);
    Index pos = 0;
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) w(r, c) = flat[pos++].get<Real>();
    model.weights.push_back(std::move(w));
    VectorX b = vector_from_json(biases[l]);
    if (b.size() != rows)
      throw std::invalid_argument("model json: bias size mismatch at layer " +
                                  std::to_string(l));
    model.biases.push_back(std::move(b));
  }
  return model;
}

Json to_json(const Task& task) {
  Json j;
  j["kind"] = task.is_classification() ? "classification" : "regression";
  if (task.is_classification()) j["num_classes"] = task.num_classes;
  return j;
}

Task task_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "regression") return Task::regression();
  if (kind == "classification") return Task::classification(j.at("num_classes").get<int>());
  throw std::invalid_argument("unknown task kind '" + kind + "'");
}

Json to_json(const Ensemble& ensemble) {
  Json j;
  j["task"] = to_json(ensemble.task);
  j["rho"] = vector_json(ensemble.rho);
  Json models = Json::array();
  for (const auto& m : ensemble.models) models.push_back(to_json(m));
  j["models"] = models;
  return j;
}

Ensemble ensemble_from_json(const Json& j) {
  Ensemble e;
  e.task = task_from_json(j.at("task"));
  e.rho = vector_from_json(j.at("rho"));
  for (const auto& m : j.at("models")) e.models.push_back(model_from_json(m));
  validate_ensemble(e);
  return e;
}

Json to_json(const DecompositionReport& report) {
  Json j;
  j["kind"] = loss_kind_name(report.kind);
  j["ensemble_loss"] = report.ensemble_loss;
  j["avg_individual_loss"] = report.avg_individual_loss;
  j["diversity"] = report.diversity;
  j["alpha"] = report.alpha;
  j["rhs"] = report.rhs;
  j["gap"] = report.gap;
  j["rhs_alpha1"] = report.rhs_alpha1;
  j["tight_ce"] = report.tight_ce;
  return j;
}

Json to_json(const CovarianceReport& report) {
  Json j;
  j["total_variance"] = report.total_variance;
  j["avg_covariance"] = report.avg_covariance;
  j["diversity"] = report.diversity;
  return j;
}

Json to_json(const PacBoundReport& report) {
  Json j;
  j["kind"] = loss_kind_name(report.kind);
  j["alpha"] = report.alpha;
  j["avg_empirical_loss"] = report.avg_empirical_loss;
  j["empirical_diversity"] = report.empirical_diversity;
  j["kl"] = report.kl;
  j["epsilon"] = report.epsilon;
  j["lambda"] = report.lambda;
  j["xi"] = report.xi;
  j["n"] = report.n;
  j["bound"] = report.bound;
  j["epsilon_mode"] = report.epsilon_mode;
  j["underestimated"] = report.underestimated;
  return j;
}

Json to_json(const FisherReport& report) {
  Json j;
  Json rows = Json::array();
  for (Index i = 0; i < report.fisher.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < report.fisher.cols(); ++c) row.push_back(report.fisher(i, c));
    rows.push_back(row);
  }
  j["fisher"] = rows;
  j["score"] = vector_json(report.score);
  j["lower_bound"] = report.lower_bound;
  j["exact_variance"] = report.exact_variance;
  return j;
}

Json to_json(const EpochLogEntry& entry) {
  Json j;
  j["epoch"] = entry.epoch;
  j["objective"] = entry.objective;
  j["avg_loss"] = entry.avg_loss;
  j["diversity"] = entry.diversity;
  j["kl_term"] = entry.kl_term;
  return j;
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "sq") return LossKind::SquaredError;
  if (name == "ce") return LossKind::CrossEntropy;
  if (name == "01") return LossKind::ZeroOne;
  throw std::invalid_argument("unknown loss kind '" + name + "' (expected sq, ce or 01)");
}

TrainObjective objective_from_name(const std::string& name) {
  if (name == "independent") return TrainObjective::Independent;
  if (name == "p2b") return TrainObjective::P2B;
  if (name == "nc") return TrainObjective::NegativeCorrelation;
  throw std::invalid_argument("unknown algorithm '" + name +
                              "' (expected independent, p2b or nc)");
}

const char* objective_name(TrainObjective objective) {
  switch (objective) {
    case TrainObjective::Independent: return "independent";
    case TrainObjective::P2B: return "p2b";
    case TrainObjective::NegativeCorrelation: return "nc";
  }
  return "?";
}

Json to_json(const TrainConfig& config) {
  Json j;
  j["loss"] = loss_kind_name(config.loss_kind);
  j["algorithm"] = objective_name(config.objective);
  j["ensemble_size"] = config.ensemble_size;
  j["epochs"] = config.epochs;
  j["base_learning_rate"] = config.base_learning_rate;
  j["batch_size"] = config.batch_size;
  j["l2_coefficient"] = config.l2_coefficient;
  j["learning_rate_decay_epochs"] = config.learning_rate_decay_epochs;
  j["learning_rate_decay_factor"] = config.learning_rate_decay_factor;
  j["seed"] = config.seed;
  j["lambda_nc"] = config.lambda_nc;
  j["lambda"] = config.lambda;
  j["prior_variance"] = config.prior_variance;
  j["mixture_sigma2"] = config.mixture_sigma2;
  j["hidden_dims"] = config.hidden_dims;
  j["activation"] = config.activation == Activation::ReLU ? "relu" : "tanh";
  j["full_batch"] = config.full_batch;
  j["diversity_weight"] = config.diversity_weight;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig config;
  auto maybe = [&j](const char* key) { return j.contains(key); };
  if (maybe("loss")) config.loss_kind = loss_kind_from_name(j["loss"].get<std::string>());
  if (maybe("algorithm"))
    config.objective = objective_from_name(j["algorithm"].get<std::string>());
  if (maybe("ensemble_size")) config.ensemble_size = j["ensemble_size"].get<int>();
  if (maybe("epochs")) config.epochs = j["epochs"].get<int>();
  if (maybe("base_learning_rate"))
    config.base_learning_rate = j["base_learning_rate"].get<Real>();
  if (maybe("batch_size")) config.batch_size = j["batch_size"].get<int>();
  if (maybe("l2_coefficient")) config.l2_coefficient = j["l2_coefficient"].get<Real>();
  if (maybe("learning_rate_decay_epochs"))
    config.learning_rate_decay_epochs =
        j["learning_rate_decay_epochs"].get<std::vector<int>>();
  if (maybe("learning_rate_decay_factor"))
    config.learning_rate_decay_factor = j["learning_rate_decay_factor"].get<Real>();
  if (maybe("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (maybe("lambda_nc")) config.lambda_nc = j["lambda_nc"].get<Real>();
  if (maybe("lambda")) config.lambda = j["lambda"].get<Real>();
  if (maybe("prior_variance")) config.prior_variance = j["prior_variance"].get<Real>();
  if (maybe("mixture_sigma2")) config.mixture_sigma2 = j["mixture_sigma2"].get<Real>();
  if (maybe("hidden_dims")) config.hidden_dims = j["hidden_dims"].get<std::vector<Index>>();
  if (maybe("activation"))
    config.activation = activation_from_name(j["activation"].get<std::string>());
  if (maybe("full_batch")) config.full_batch = j["full_batch"].get<bool>();
  if (maybe("diversity_weight")) config.diversity_weight = j["diversity_weight"].get<Real>();
  return config;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << j.dump(2) << '\n';
}

Json read_json_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "'");
  Json j;
  file >> j;
  return j;
}

}  // namespace edlab
