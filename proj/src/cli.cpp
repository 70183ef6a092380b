#include "edlab/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edlab/data.hpp"
#include "edlab/serialize.hpp"
#include "edlab/verify.hpp"

namespace edlab::cli {

namespace {

namespace fs = std::filesystem;

std::string format_real(Real v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

char delimiter_from_name(const std::string& name) {
  if (name == "comma") return ',';
  if (name == "semicolon") return ';';
  throw std::invalid_argument("delimiter must be 'comma' or 'semicolon'");
}

/// Data specs name either a synthetic generator or a CSV file:
///   {"type":"sine","n":200,"seed":1,"freq":6.0,"noise_sd":0.1}
///   {"type":"blobs","n":100,"seed":1,"num_classes":2,"sd":0.5,"centers":[[..],..]}
///   {"type":"csv","path":"x.csv","delimiter":"semicolon","target":"quality",
///    "task":"regression","num_classes":0}
Dataset dataset_from_spec(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "sine") {
    SineRegressionSpec sine;
    if (j.contains("freq")) sine.freq = j["freq"].get<Real>();
    if (j.contains("noise_sd")) sine.noise_sd = j["noise_sd"].get<Real>();
    return generate({sine, j.at("n").get<Index>(), j.value("seed", std::uint64_t{0})});
  }
  if (type == "blobs") {
    GaussianBlobsSpec blobs;
    blobs.num_classes = j.at("num_classes").get<int>();
    blobs.sd = j.value("sd", 1.0);
    const auto& centers = j.at("centers");
    const Index rows = static_cast<Index>(centers.size());
    const Index cols = static_cast<Index>(centers.at(0).size());
    blobs.centers.resize(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) blobs.centers(r, c) = centers[r][c].get<Real>();
    return generate({blobs, j.at("n").get<Index>(), j.value("seed", std::uint64_t{0})});
  }
  if (type == "csv") {
    const std::string task_name = j.value("task", std::string("regression"));
    const Task task = task_name == "regression"
                          ? Task::regression()
                          : Task::classification(j.value("num_classes", 0));
    Dataset data = load_csv(j.at("path").get<std::string>(),
                            delimiter_from_name(j.value("delimiter", std::string("comma"))),
                            j.at("target").get<std::string>(), task);
    if (task.is_classification() && task.num_classes == 0) {
      int max_label = 0;
      for (Index i = 0; i < data.size(); ++i) max_label = std::max(max_label, data.label(i));
      data.task = Task::classification(max_label + 1);
    }
    return data;
  }
  throw std::invalid_argument("unknown data type '" + type + "'");
}

struct CsvFlags {
  std::string delimiter = "comma";
  std::string target = "target";
  std::string task = "regression";
  int num_classes = 0;
};

// --data accepts either a JSON data spec or a raw .csv path driven by the
// csv flags.
Dataset load_data_argument(const std::string& data_path, const CsvFlags& flags) {
  if (data_path.size() > 4 && data_path.substr(data_path.size() - 4) == ".csv") {
    Json spec;
    spec["type"] = "csv";
    spec["path"] = data_path;
    spec["delimiter"] = flags.delimiter;
    spec["target"] = flags.target;
    spec["task"] = flags.task;
    spec["num_classes"] = flags.num_classes;
    return dataset_from_spec(spec);
  }
  return dataset_from_spec(read_json_file(data_path));
}

struct SplitSpec {
  Real train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  bool standardize = true;
};

SplitSpec split_spec_from_json(const Json& j) {
  SplitSpec spec;
  if (j.contains("train_fraction")) spec.train_fraction = j["train_fraction"].get<Real>();
  if (j.contains("split_seed")) spec.split_seed = j["split_seed"].get<std::uint64_t>();
  if (j.contains("standardize")) spec.standardize = j["standardize"].get<bool>();
  return spec;
}

struct PreparedData {
  Dataset train;
  Dataset test;
};

PreparedData prepare(const Json& config) {
  const Dataset full = dataset_from_spec(config.at("data"));
  const SplitSpec spec = split_spec_from_json(config);
  SplitResult parts = split(full, spec.train_fraction, spec.split_seed);
  if (spec.standardize) {
    const Standardizer standardizer = fit_standardizer(parts.train);
    parts.train = apply_standardizer(standardizer, parts.train);
    parts.test = apply_standardizer(standardizer, parts.test);
  }
  return {std::move(parts.train), std::move(parts.test)};
}

EpsilonMode default_epsilon_mode(LossKind kind) {
  return kind == LossKind::ZeroOne ? EpsilonMode::hoeffding(1.0) : EpsilonMode::omit();
}

struct MetricRow {
  std::string algorithm;
  std::uint64_t seed;
  std::string split;
  std::string metric;
  Real value;
};

void append_metrics(std::vector<MetricRow>& rows, const std::string& algorithm,
                    std::uint64_t seed, const std::string& split_name,
                    const Ensemble& ensemble, const Dataset& data, LossKind kind,
                    const TrainConfig& config) {
  const DecompositionReport d = decompose(ensemble, data, kind);
  const GaussianPrior prior{config.prior_variance,
                            ensemble.models.front().parameter_count()};
  const PacBoundReport b =
      pac_bound(ensemble, data, prior, config.mixture_sigma2, config.lambda, 0.05,
                kind, default_epsilon_mode(kind));
  rows.push_back({algorithm, seed, split_name, "ensemble_loss", d.ensemble_loss});
  rows.push_back({algorithm, seed, split_name, "avg_individual_loss", d.avg_individual_loss});
  rows.push_back({algorithm, seed, split_name, "diversity", d.diversity});
  rows.push_back({algorithm, seed, split_name, "gap", d.gap});
  rows.push_back({algorithm, seed, split_name, "pac_bound", b.bound});
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const Json& overrides) {
  Json config = read_json_file(config_path);
  config.update(overrides);
  TrainConfig train_config = train_config_from_json(config);
  const PreparedData data = prepare(config);

  fs::create_directories(out_dir);
  const std::string prefix = std::string(objective_name(train_config.objective)) +
                             "_seed" + std::to_string(train_config.seed);
  std::ofstream log_file(fs::path(out_dir) / (prefix + ".log.jsonl"));
  EpochLogger logger = [&log_file](const EpochLogEntry& entry) {
    log_file << to_json(entry).dump() << '\n';
  };

  const Ensemble ensemble = train(train_config, data.train, logger);
  write_json_file(to_json(ensemble), (fs::path(out_dir) / (prefix + ".model.json")).string());

  const DecompositionReport train_report =
      decompose(ensemble, data.train, train_config.loss_kind);
  const DecompositionReport test_report =
      decompose(ensemble, data.test, train_config.loss_kind);
  Json summary;
  summary["config"] = config;
  summary["train"] = to_json(train_report);
  summary["test"] = to_json(test_report);
  write_json_file(summary, (fs::path(out_dir) / (prefix + ".report.json")).string());
  std::cout << "wrote " << (fs::path(out_dir) / (prefix + ".model.json")).string() << '\n';
  return 0;
}

int cmd_decompose(const std::string& models_path, const std::string& data_path,
                  const CsvFlags& csv, const std::string& loss, bool tight_ce,
                  const std::string& out_path) {
  const Ensemble ensemble = ensemble_from_json(read_json_file(models_path));
  const Dataset data = load_data_argument(data_path, csv);
  const DecompositionReport report =
      decompose(ensemble, data, loss_kind_from_name(loss), tight_ce);
  const Json j = to_json(report);
  if (out_path.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(j, out_path);
  return 0;
}

int cmd_bound(const std::string& models_path, const std::string& data_path,
              const CsvFlags& csv, const std::string& loss, Real lambda, Real xi,
              Real prior_variance, Real mixture_sigma2, const std::string& epsilon_mode,
              Real epsilon_value, const std::string& out_path) {
  const Ensemble ensemble = ensemble_from_json(read_json_file(models_path));
  const Dataset data = load_data_argument(data_path, csv);
  const LossKind kind = loss_kind_from_name(loss);
  EpsilonMode mode = EpsilonMode::omit();
  if (epsilon_mode == "hoeffding")
    mode = EpsilonMode::hoeffding(epsilon_value > 0 ? epsilon_value : 1.0);
  else if (epsilon_mode == "user")
    mode = EpsilonMode::user_supplied(epsilon_value);
  else if (epsilon_mode != "omit")
    throw std::invalid_argument("epsilon mode must be hoeffding, user or omit");
  const GaussianPrior prior{prior_variance,
                            ensemble.models.front().parameter_count()};
  const PacBoundReport report =
      pac_bound(ensemble, data, prior, mixture_sigma2, lambda, xi, kind, mode);
  const Json j = to_json(report);
  if (out_path.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(j, out_path);
  return 0;
}

int cmd_fisher(const std::string& p_text, const std::string& f_text,
               const std::string& models_path, const std::string& data_path,
               const CsvFlags& csv, const std::string& loss, Index sample,
               const std::string& out_path) {
  VectorX p, f;
  auto parse_list = [](const std::string& text) {
    std::vector<Real> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) values.push_back(std::stod(item));
    VectorX v(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Index>(i)] = values[i];
    return v;
  };

  if (!p_text.empty()) {
    if (f_text.empty()) throw std::invalid_argument("--f is required with --p");
    p = parse_list(p_text);
    f = parse_list(f_text);
  } else {
    if (models_path.empty() || data_path.empty())
      throw std::invalid_argument("fisher needs either --p/--f or --models/--data");
    const Ensemble ensemble = ensemble_from_json(read_json_file(models_path));
    const Dataset data = load_data_argument(data_path, csv);
    if (sample < 0 || sample >= data.size())
      throw std::invalid_argument("--sample out of range");
    f = f_values(loss_kind_from_name(loss), ensemble,
                 data.features.row(sample).transpose(), data.targets[sample]);
    p = ensemble.rho.head(ensemble.size() - 1);
  }
  const FisherReport report = variance_lower_bound(CategoricalWeights{p}, f);
  const Json j = to_json(report);
  if (out_path.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(j, out_path);
  return 0;
}

int cmd_report(const std::string& config_path, const std::string& out_dir) {
  const Json config = read_json_file(config_path);
  const PreparedData data = prepare(config);

  std::vector<std::string> algorithms =
      config.value("algorithms", std::vector<std::string>{"independent", "p2b"});
  std::vector<std::uint64_t> seeds =
      config.value("seeds", std::vector<std::uint64_t>{0, 1, 2});

  std::vector<MetricRow> rows;
  Json runs = Json::array();
  for (const std::string& algorithm : algorithms) {
    for (std::uint64_t seed : seeds) {
      Json run_config = config;
      run_config["algorithm"] = algorithm;
      run_config["seed"] = seed;
      TrainConfig train_config = train_config_from_json(run_config);
      const Ensemble ensemble = train(train_config, data.train);
      append_metrics(rows, algorithm, seed, "train", ensemble, data.train,
                     train_config.loss_kind, train_config);
      append_metrics(rows, algorithm, seed, "test", ensemble, data.test,
                     train_config.loss_kind, train_config);
      Json run;
      run["algorithm"] = algorithm;
      run["seed"] = seed;
      for (const MetricRow& row : rows)
        if (row.algorithm == algorithm && row.seed == seed)
          run[row.split][row.metric] = row.value;
      runs.push_back(run);
    }
  }

  // aggregate mean and sd per (algorithm, split, metric)
  Json aggregate;
  for (const std::string& algorithm : algorithms) {
    for (const std::string split_name : {"train", "test"}) {
      for (const std::string metric :
           {"ensemble_loss", "avg_individual_loss", "diversity", "gap", "pac_bound"}) {
        std::vector<Real> values;
        for (const MetricRow& row : rows)
          if (row.algorithm == algorithm && row.split == split_name && row.metric == metric)
            values.push_back(row.value);
        Real mean = 0.0;
        for (Real v : values) mean += v;
        mean /= static_cast<Real>(values.size());
        Real var = 0.0;
        for (Real v : values) var += (v - mean) * (v - mean);
        var /= static_cast<Real>(values.size());
        aggregate[algorithm][split_name][metric] = {{"mean", mean},
                                                    {"sd", std::sqrt(var)}};
      }
    }
  }

  fs::create_directories(out_dir);
  Json report;
  report["config"] = config;
  report["generated_at"] = std::chrono::duration_cast<std::chrono::seconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
  report["runs"] = runs;
  report["aggregate"] = aggregate;
  write_json_file(report, (fs::path(out_dir) / "experiment.report.json").string());

  std::ofstream csv(fs::path(out_dir) / "experiment.table.csv");
  csv << "algorithm,seed,split,metric,value\n";
  for (const MetricRow& row : rows)
    csv << row.algorithm << ',' << row.seed << ',' << row.split << ',' << row.metric
        << ',' << format_real(row.value) << '\n';
  std::cout << "wrote " << (fs::path(out_dir) / "experiment.table.csv").string() << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"ensemble diversity laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", out_file;
  std::string models_path, data_path, loss = "sq";
  CsvFlags csv;
  bool tight_ce = false;
  Json overrides = Json::object();

  auto* train_cmd = app.add_subcommand("train", "train an ensemble from a JSON config");
  train_cmd->add_option("--config", config_path, "experiment config file")->required();
  train_cmd->add_option("--out", out_dir, "output directory");
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  std::string loss_override, algorithm_override;
  train_cmd->add_option("--seed", seed_override, "seed override")
      ->each([&](const std::string&) { has_seed = true; });
  train_cmd->add_option("--loss", loss_override, "loss override (sq|ce|01)");
  train_cmd->add_option("--algorithm", algorithm_override,
                        "algorithm override (independent|p2b|nc)");

  auto* decompose_cmd =
      app.add_subcommand("decompose", "evaluate the loss decomposition of an ensemble");
  decompose_cmd->add_option("--models", models_path, "ensemble JSON file")->required();
  decompose_cmd->add_option("--data", data_path, "data spec JSON file")->required();
  decompose_cmd->add_option("--loss", loss, "loss kind (sq|ce|01)");
  decompose_cmd->add_flag("--tight-ce", tight_ce, "use the sharpened cross-entropy diversity");
  decompose_cmd->add_option("--out", out_file, "output file (stdout when omitted)");

  auto add_csv_flags = [&csv](CLI::App* cmd) {
    cmd->add_option("--delimiter", csv.delimiter, "csv delimiter (comma|semicolon)");
    cmd->add_option("--target", csv.target, "csv target column");
    cmd->add_option("--task", csv.task, "csv task (regression|classification)");
    cmd->add_option("--num-classes", csv.num_classes, "csv class count (0 = infer)");
  };
  add_csv_flags(decompose_cmd);

  Real lambda = 2.0, xi = 0.05, prior_variance = 1.0, mixture_sigma2 = 1e-4;
  Real epsilon_value = 0.0;
  std::string epsilon_mode = "omit";
  auto* bound_cmd = app.add_subcommand("bound", "evaluate the generalization bound");
  bound_cmd->add_option("--models", models_path, "ensemble JSON file")->required();
  bound_cmd->add_option("--data", data_path, "data spec JSON file")->required();
  bound_cmd->add_option("--loss", loss, "loss kind (sq|ce|01)");
  bound_cmd->add_option("--lambda", lambda, "bound temperature");
  bound_cmd->add_option("--xi", xi, "confidence level in (0,1)");
  bound_cmd->add_option("--prior-variance", prior_variance, "prior variance");
  bound_cmd->add_option("--mixture-sigma2", mixture_sigma2, "mixture component variance");
  bound_cmd->add_option("--epsilon-mode", epsilon_mode, "hoeffding|user|omit");
  bound_cmd->add_option("--epsilon-value", epsilon_value, "range r or supplied value");
  bound_cmd->add_option("--out", out_file, "output file (stdout when omitted)");
  add_csv_flags(bound_cmd);

  std::string p_text, f_text;
  Index sample = 0;
  auto* fisher_cmd =
      app.add_subcommand("fisher", "variance lower bound from categorical weights");
  fisher_cmd->add_option("--p", p_text, "free probabilities, comma separated");
  fisher_cmd->add_option("--f", f_text, "per-category values, comma separated");
  fisher_cmd->add_option("--models", models_path, "ensemble JSON file");
  fisher_cmd->add_option("--data", data_path, "data spec JSON file");
  fisher_cmd->add_option("--loss", loss, "loss kind (sq|ce|01)");
  fisher_cmd->add_option("--sample", sample, "sample index for the f values");
  fisher_cmd->add_option("--out", out_file, "output file (stdout when omitted)");
  add_csv_flags(fisher_cmd);

  auto* verify_cmd = app.add_subcommand("verify", "run the invariant battery");
  (void)verify_cmd;

  auto* report_cmd =
      app.add_subcommand("report", "run per-seed experiments and tabulate results");
  report_cmd->add_option("--config", config_path, "experiment config file")->required();
  report_cmd->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("train")) {
      if (has_seed) overrides["seed"] = seed_override;
      if (!loss_override.empty()) overrides["loss"] = loss_override;
      if (!algorithm_override.empty()) overrides["algorithm"] = algorithm_override;
      return cmd_train(config_path, out_dir, overrides);
    }
    if (app.got_subcommand("decompose"))
      return cmd_decompose(models_path, data_path, csv, loss, tight_ce, out_file);
    if (app.got_subcommand("bound"))
      return cmd_bound(models_path, data_path, csv, loss, lambda, xi, prior_variance,
                       mixture_sigma2, epsilon_mode, epsilon_value, out_file);
    if (app.got_subcommand("fisher"))
      return cmd_fisher(p_text, f_text, models_path, data_path, csv, loss, sample,
                        out_file);
    if (app.got_subcommand("verify")) return run_verify(std::cout);
    if (app.got_subcommand("report")) return cmd_report(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace edlab::cli
