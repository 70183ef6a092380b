#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "edlab/cli.hpp"
#include "edlab/serialize.hpp"

using namespace edlab;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("edlab");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "edlab_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

MlpModel constant_regressor(Real value) {
  MlpModel m;
  m.layer_dims = {1, 1};
  m.weights = {MatrixX::Zero(1, 1)};
  m.biases = {VectorX::Constant(1, value)};
  return m;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("verify battery exits zero") {
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int code = run_cli({"verify"});
  std::cout.rdbuf(old);
  CHECK(code == 0);
  CHECK(captured.str().find("all checks passed") != std::string::npos);
}

TEST_CASE("decompose accepts a raw csv path with delimiter flags") {
  TempDir dir;
  const Ensemble ensemble = make_uniform_ensemble(
      {constant_regressor(0.0), constant_regressor(2.0)}, Task::regression());
  write_json_file(to_json(ensemble), dir.file("pair.model.json"));
  {
    std::ofstream csv(dir.file("ones.csv"));
    csv << "x;y\n0;1\n0;1\n";
  }
  const int code = run_cli({"decompose", "--models", dir.file("pair.model.json"),
                            "--data", dir.file("ones.csv"), "--delimiter", "semicolon",
                            "--target", "y", "--loss", "sq", "--out",
                            dir.file("out.report.json")});
  CHECK(code == 0);
  CHECK(read_json_file(dir.file("out.report.json")).at("diversity").get<Real>() == 1.0);
}

TEST_CASE("decompose on the two-constant fixture") {
  TempDir dir;

  const Ensemble ensemble = make_uniform_ensemble(
      {constant_regressor(0.0), constant_regressor(2.0)}, Task::regression());
  write_json_file(to_json(ensemble), dir.file("pair.model.json"));

  {
    std::ofstream csv(dir.file("ones.csv"));
    csv << "x,y\n0,1\n0,1\n0,1\n";
  }
  Json data_spec;
  data_spec["type"] = "csv";
  data_spec["path"] = dir.file("ones.csv");
  data_spec["delimiter"] = "comma";
  data_spec["target"] = "y";
  data_spec["task"] = "regression";
  write_json_file(data_spec, dir.file("data.json"));

  const int code = run_cli({"decompose", "--models", dir.file("pair.model.json"),
                            "--data", dir.file("data.json"), "--loss", "sq", "--out",
                            dir.file("out.report.json")});
  CHECK(code == 0);

  const Json report = read_json_file(dir.file("out.report.json"));
  CHECK(report.at("diversity").get<Real>() == 1.0);
  CHECK(report.at("rhs").get<Real>() == 0.0);
  CHECK(report.at("ensemble_loss").get<Real>() == 0.0);
  CHECK(report.at("gap").get<Real>() == 1.0);
}

TEST_CASE("train with a missing config exits 2 and names the path") {
  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  const int code = run_cli({"train", "--config", "/tmp/edlab_missing_config.json"});
  std::cerr.rdbuf(old);
  CHECK(code == 2);
  CHECK(captured.str().find("/tmp/edlab_missing_config.json") != std::string::npos);
}

TEST_CASE("unknown subcommands exit 2") {
  std::ostringstream captured;
  auto* old_err = std::cerr.rdbuf(captured.rdbuf());
  auto* old_out = std::cout.rdbuf(captured.rdbuf());
  const int code = run_cli({"frobnicate"});
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  CHECK(code == 2);
}

TEST_CASE("model json round trip is bit exact") {
  const MlpModel model = mlp_init({2, 5, 3}, Activation::Tanh, 123456);
  const Ensemble ensemble = make_uniform_ensemble({model, mlp_init({2, 5, 3}, Activation::Tanh, 7)},
                                                  Task::classification(3));
  const Json j = to_json(ensemble);
  const Ensemble back = ensemble_from_json(Json::parse(j.dump()));
  for (Index k = 0; k < ensemble.size(); ++k)
    CHECK(flatten_parameters(back.models[k])
              .cwiseEqual(flatten_parameters(ensemble.models[k]))
              .all());
  CHECK(back.rho.cwiseEqual(ensemble.rho).all());
}

TEST_CASE("train emits model, log and report files") {
  TempDir dir;
  Json config;
  config["loss"] = "sq";
  config["algorithm"] = "p2b";
  config["ensemble_size"] = 2;
  config["epochs"] = 2;
  config["base_learning_rate"] = 0.05;
  config["batch_size"] = 16;
  config["hidden_dims"] = {4};
  config["seed"] = 3;
  config["prior_variance"] = 100.0;
  config["data"] = {{"type", "sine"}, {"n", 30}, {"seed", 4}, {"freq", 6.0}, {"noise_sd", 0.1}};
  config["train_fraction"] = 0.8;
  write_json_file(config, dir.file("config.json"));

  const int code =
      run_cli({"train", "--config", dir.file("config.json"), "--out", dir.file("run")});
  CHECK(code == 0);
  CHECK(fs::exists(dir.file("run/p2b_seed3.model.json")));
  CHECK(fs::exists(dir.file("run/p2b_seed3.log.jsonl")));
  CHECK(fs::exists(dir.file("run/p2b_seed3.report.json")));

  // the emitted ensemble re-parses and is evaluable
  const Ensemble back =
      ensemble_from_json(read_json_file(dir.file("run/p2b_seed3.model.json")));
  CHECK(back.size() == 2);

  // every log line parses as JSON with the expected fields
  std::ifstream log(dir.file("run/p2b_seed3.log.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const Json entry = Json::parse(line);
    CHECK(entry.contains("objective"));
    CHECK(entry.contains("diversity"));
    CHECK(entry.contains("kl_term"));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("seed and loss overrides reach the trainer") {
  TempDir dir;
  Json config;
  config["loss"] = "sq";
  config["algorithm"] = "independent";
  config["ensemble_size"] = 1;
  config["epochs"] = 1;
  config["hidden_dims"] = {3};
  config["seed"] = 3;
  config["data"] = {{"type", "sine"}, {"n", 20}, {"seed", 4}};
  write_json_file(config, dir.file("config.json"));

  const int code = run_cli({"train", "--config", dir.file("config.json"), "--out",
                            dir.file("run"), "--seed", "9"});
  CHECK(code == 0);
  CHECK(fs::exists(dir.file("run/independent_seed9.model.json")));
}

TEST_CASE("fisher subcommand from raw vectors") {
  TempDir dir;
  const int code = run_cli({"fisher", "--p", "0.25", "--f", "3,1", "--out",
                            dir.file("fisher.report.json")});
  CHECK(code == 0);
  const Json report = read_json_file(dir.file("fisher.report.json"));
  CHECK(report.at("lower_bound").get<Real>() == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(report.at("exact_variance").get<Real>() == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("bound subcommand emits a full report") {
  TempDir dir;
  GaussianBlobsSpec blobs;
  blobs.num_classes = 2;
  blobs.centers = (MatrixX(2, 1) << -1.0, 1.0).finished();
  blobs.sd = 0.5;
  const Dataset data = generate({blobs, 20, 5});
  write_csv(data, dir.file("blobs.csv"), ',');

  Json data_spec;
  data_spec["type"] = "csv";
  data_spec["path"] = dir.file("blobs.csv");
  data_spec["delimiter"] = "comma";
  data_spec["target"] = "target";
  data_spec["task"] = "classification";
  data_spec["num_classes"] = 2;
  write_json_file(data_spec, dir.file("data.json"));

  const Ensemble ensemble = make_uniform_ensemble(
      {mlp_init({1, 3, 2}, Activation::Tanh, 1), mlp_init({1, 3, 2}, Activation::Tanh, 2)},
      Task::classification(2));
  write_json_file(to_json(ensemble), dir.file("ens.model.json"));

  const int code = run_cli({"bound", "--models", dir.file("ens.model.json"), "--data",
                            dir.file("data.json"), "--loss", "01", "--epsilon-mode",
                            "hoeffding", "--epsilon-value", "1", "--out",
                            dir.file("bound.report.json")});
  CHECK(code == 0);
  const Json report = read_json_file(dir.file("bound.report.json"));
  CHECK(report.at("kind").get<std::string>() == "01");
  CHECK(report.at("alpha").get<Real>() == 4.0);
  CHECK(report.at("underestimated").get<bool>() == false);
  CHECK(report.at("bound").get<Real>() >=
        4.0 * (report.at("avg_empirical_loss").get<Real>() -
               report.at("empirical_diversity").get<Real>()));
}

TEST_CASE("report output is stable across reruns") {
  TempDir dir;
  Json config;
  config["loss"] = "sq";
  config["ensemble_size"] = 2;
  config["epochs"] = 2;
  config["base_learning_rate"] = 0.05;
  config["hidden_dims"] = {4};
  config["prior_variance"] = 100.0;
  config["data"] = {{"type", "sine"}, {"n", 30}, {"seed", 4}};
  config["algorithms"] = {"independent", "p2b"};
  config["seeds"] = {0, 1};
  write_json_file(config, dir.file("config.json"));

  CHECK(run_cli({"report", "--config", dir.file("config.json"), "--out",
                 dir.file("a")}) == 0);
  CHECK(run_cli({"report", "--config", dir.file("config.json"), "--out",
                 dir.file("b")}) == 0);

  CHECK(slurp(dir.file("a/experiment.table.csv")) ==
        slurp(dir.file("b/experiment.table.csv")));

  Json ra = read_json_file(dir.file("a/experiment.report.json"));
  Json rb = read_json_file(dir.file("b/experiment.report.json"));
  ra.erase("generated_at");
  rb.erase("generated_at");
  CHECK(ra.dump() == rb.dump());

  // the table has one row per (algorithm, seed, split, metric)
  std::istringstream table(slurp(dir.file("a/experiment.table.csv")));
  std::string line;
  int rows = 0;
  while (std::getline(table, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + 2 * 2 * 2 * 5);
}
