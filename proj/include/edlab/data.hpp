#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "edlab/losses.hpp"
#include "edlab/types.hpp"

namespace edlab {

/// y = sin(freq * x) + noise_sd * N(0,1), x uniform on [-1, 1].
struct SineRegressionSpec {
  Real freq = 6.0;
  Real noise_sd = 0.1;
};

/// Isotropic Gaussian clusters; the label is the generating center.
struct GaussianBlobsSpec {
  int num_classes = 2;
  MatrixX centers;  // num_classes x d
  Real sd = 1.0;
};

struct SyntheticSpec {
  std::variant<SineRegressionSpec, GaussianBlobsSpec> kind;
  Index n = 1;
  std::uint64_t seed = 0;
};

/// Deterministic in (spec, seed): one mt19937_64 stream, samples drawn in
/// row order (features first, then noise / label as applicable).
Dataset generate(const SyntheticSpec& spec);

/// Header row required; all feature columns numeric; the target column is
/// picked by name. Classification targets must be integral.
Dataset load_csv(const std::string& path, char delimiter,
                 const std::string& target_column, const Task& task);

/// Doubles printed with %.17g so a round trip is value-identical.
void write_csv(const Dataset& data, const std::string& path, char delimiter);

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Seeded shuffle; train gets ceil(fraction * n) rows, test the rest.
SplitResult split(const Dataset& data, Real train_fraction, std::uint64_t seed);

/// Per-column affine map fitted on training features only.
struct Standardizer {
  VectorX mean;
  VectorX scale;  // columns with zero spread keep scale 1
};

Standardizer fit_standardizer(const Dataset& train);
Dataset apply_standardizer(const Standardizer& standardizer, const Dataset& data);

}  // namespace edlab
