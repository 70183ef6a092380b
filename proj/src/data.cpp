#include "edlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace edlab {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.push_back("");
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

Real parse_cell(const std::string& cell, Index row, const std::string& column) {
  const std::string text = trim(cell);
  std::size_t consumed = 0;
  Real value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != text.size() || text.empty())
    throw std::runtime_error("csv: cannot parse '" + text + "' at row " +
                             std::to_string(row) + ", column '" + column + "'");
  return value;
}

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("generate: n must be >= 1");
  std::mt19937_64 rng(spec.seed);
  Dataset data;

  if (const auto* sine = std::get_if<SineRegressionSpec>(&spec.kind)) {
    if (sine->noise_sd < 0) throw std::invalid_argument("generate: negative noise sd");
    data.task = Task::regression();
    data.features.resize(spec.n, 1);
    data.targets.resize(spec.n);
    std::uniform_real_distribution<Real> x_dist(-1.0, 1.0);
    std::normal_distribution<Real> noise(0.0, 1.0);
    for (Index i = 0; i < spec.n; ++i) {
      const Real x = x_dist(rng);
      data.features(i, 0) = x;
      Real y = std::sin(sine->freq * x);
      if (sine->noise_sd > 0) y += sine->noise_sd * noise(rng);
      data.targets[i] = y;
    }
  } else {
    const auto& blobs = std::get<GaussianBlobsSpec>(spec.kind);
    if (blobs.num_classes < 2)
      throw std::invalid_argument("generate: blobs need at least 2 classes");
    if (blobs.centers.rows() != blobs.num_classes)
      throw std::invalid_argument("generate: one center row per class required");
    if (blobs.sd < 0) throw std::invalid_argument("generate: negative blob sd");
    data.task = Task::classification(blobs.num_classes);
    const Index d = blobs.centers.cols();
    data.features.resize(spec.n, d);
    data.targets.resize(spec.n);
    std::uniform_int_distribution<int> label_dist(0, blobs.num_classes - 1);
    std::normal_distribution<Real> noise(0.0, 1.0);
    for (Index i = 0; i < spec.n; ++i) {
      const int label = label_dist(rng);
      for (Index j = 0; j < d; ++j) {
        Real v = blobs.centers(label, j);
        if (blobs.sd > 0) v += blobs.sd * noise(rng);
        data.features(i, j) = v;
      }
      data.targets[i] = label;
    }
  }
  return data;
}

Dataset load_csv(const std::string& path, char delimiter,
                 const std::string& target_column, const Task& task) {
  if (delimiter != ',' && delimiter != ';')
    throw std::invalid_argument("csv: delimiter must be ',' or ';'");
  std::ifstream file(path);
  if (!file) throw std::invalid_argument("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw std::invalid_argument("csv: '" + path + "' is empty");
  std::vector<std::string> header = split_line(line, delimiter);
  for (auto& h : header) h = trim(h);

  Index target_index = -1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == target_column) target_index = static_cast<Index>(c);
  if (target_index < 0)
    throw std::runtime_error("csv: no column named '" + target_column + "' in '" + path + "'");

  std::vector<std::vector<Real>> rows;
  Index row_number = 0;
  while (std::getline(file, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line, delimiter);
    if (cells.size() != header.size())
      throw std::runtime_error("csv: row " + std::to_string(row_number) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    std::vector<Real> parsed(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      parsed[c] = parse_cell(cells[c], row_number, header[c]);
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) throw std::invalid_argument("csv: '" + path + "' has no data rows");

  Dataset data;
  data.task = task;
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(header.size()) - 1;
  data.features.resize(n, d);
  data.targets.resize(n);
  data.target_name = target_column;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<Index>(c) != target_index)
      data.feature_names.push_back(header[c]);
  for (Index i = 0; i < n; ++i) {
    Index col = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<Index>(c) == target_index)
        data.targets[i] = rows[i][c];
      else
        data.features(i, col++) = rows[i][c];
    }
  }

  if (task.is_classification()) {
    for (Index i = 0; i < n; ++i) {
      if (data.targets[i] != std::floor(data.targets[i]))
        throw std::runtime_error("csv: classification target at data row " +
                                 std::to_string(i + 1) + " is not integral");
    }
    if (task.num_classes > 0) validate_dataset(data);
  }
  return data;
}

void write_csv(const Dataset& data, const std::string& path, char delimiter) {
  if (delimiter != ',' && delimiter != ';')
    throw std::invalid_argument("csv: delimiter must be ',' or ';'");
  std::ofstream file(path);
  if (!file) throw std::invalid_argument("csv: cannot open '" + path + "' for writing");

  char buffer[64];
  auto format = [&buffer](Real v) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return std::string(buffer);
  };

  for (Index j = 0; j < data.dim(); ++j) {
    const std::string name = j < static_cast<Index>(data.feature_names.size())
                                 ? data.feature_names[j]
                                 : "f" + std::to_string(j);
    file << name << delimiter;
  }
  file << data.target_name << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) file << format(data.features(i, j)) << delimiter;
    file << format(data.targets[i]) << '\n';
  }
}

SplitResult split(const Dataset& data, Real train_fraction, std::uint64_t seed) {
  validate_dataset(data);
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: fraction must lie strictly between 0 and 1");
  const Index n = data.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const Index train_n =
      static_cast<Index>(std::ceil(train_fraction * static_cast<Real>(n)));

  auto gather = [&data](const std::vector<Index>& rows) {
    Dataset out;
    out.task = data.task;
    out.feature_names = data.feature_names;
    out.target_name = data.target_name;
    out.features.resize(static_cast<Index>(rows.size()), data.dim());
    out.targets.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.features.row(static_cast<Index>(r)) = data.features.row(rows[r]);
      out.targets[static_cast<Index>(r)] = data.targets[rows[r]];
    }
    return out;
  };

  SplitResult result;
  result.train = gather({order.begin(), order.begin() + train_n});
  result.test = gather({order.begin() + train_n, order.end()});
  return result;
}

Standardizer fit_standardizer(const Dataset& train) {
  validate_dataset(train);
  Standardizer s;
  s.mean = train.features.colwise().mean();
  s.scale.resize(train.dim());
  for (Index j = 0; j < train.dim(); ++j) {
    const Real var =
        (train.features.col(j).array() - s.mean[j]).square().mean();
    const Real sd = std::sqrt(var);
    s.scale[j] = sd > 0 ? sd : 1.0;
  }
  return s;
}

Dataset apply_standardizer(const Standardizer& standardizer, const Dataset& data) {
  if (standardizer.mean.size() != data.dim())
    throw std::invalid_argument("standardizer: feature dimension mismatch");
  Dataset out = data;
  for (Index j = 0; j < data.dim(); ++j)
    out.features.col(j) =
        (data.features.col(j).array() - standardizer.mean[j]) / standardizer.scale[j];
  return out;
}

}  // namespace edlab
