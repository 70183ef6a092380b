#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "edlab/data.hpp"

using namespace edlab;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/edlab_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("noiseless sine targets are exact") {
  SyntheticSpec spec{SineRegressionSpec{4.0, 0.0}, 25, 11};
  const Dataset d = generate(spec);
  for (Index i = 0; i < d.size(); ++i)
    CHECK(d.targets[i] == std::sin(4.0 * d.features(i, 0)));
}

TEST_CASE("degenerate blobs are separated by their centers") {
  GaussianBlobsSpec blobs;
  blobs.num_classes = 3;
  blobs.centers = (MatrixX(3, 2) << 0.0, 0.0, 5.0, 0.0, 0.0, 5.0).finished();
  blobs.sd = 0.0;
  const Dataset d = generate({blobs, 60, 5});
  for (Index i = 0; i < d.size(); ++i) {
    Index nearest = 0;
    Real best = (d.features.row(i).transpose() - blobs.centers.row(0).transpose()).norm();
    for (Index c = 1; c < 3; ++c) {
      const Real dist =
          (d.features.row(i).transpose() - blobs.centers.row(c).transpose()).norm();
      if (dist < best) {
        best = dist;
        nearest = c;
      }
    }
    CHECK(static_cast<int>(nearest) == d.label(i));
  }
}

TEST_CASE("generation is deterministic") {
  SyntheticSpec spec{SineRegressionSpec{6.0, 0.1}, 50, 123};
  const Dataset a = generate(spec);
  const Dataset b = generate(spec);
  CHECK(a.features.cwiseEqual(b.features).all());
  CHECK(a.targets.cwiseEqual(b.targets).all());

  spec.seed = 124;
  const Dataset c = generate(spec);
  CHECK_FALSE(a.features.cwiseEqual(c.features).all());
}

TEST_CASE("csv loading") {
  TempFile file("fixture.csv");
  {
    std::ofstream out(file.path);
    out << "acid;sugar;quality\n";
    out << "1.5;0.2;5\n";
    out << "2.5;0.1;6\n";
    out << "0.5;0.9;5\n";
  }
  const Dataset d = load_csv(file.path, ';', "quality", Task::regression());
  CHECK(d.size() == 3);
  CHECK(d.dim() == 2);
  CHECK(d.targets[1] == 6.0);
  CHECK(d.features(2, 1) == 0.9);
  CHECK(d.feature_names[0] == "acid");
  CHECK(d.target_name == "quality");

  CHECK_THROWS_WITH_AS(load_csv(file.path, ';', "flavor", Task::regression()),
                       doctest::Contains("flavor"), std::runtime_error);
}

TEST_CASE("csv parse errors cite the cell") {
  TempFile file("broken.csv");
  {
    std::ofstream out(file.path);
    out << "a,b,target\n";
    out << "1,2,3\n";
    out << "4,abc,6\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(file.path, ',', "target", Task::regression()),
                       doctest::Contains("row 2"), std::runtime_error);
}

TEST_CASE("csv rejects empty and missing files") {
  TempFile file("empty.csv");
  { std::ofstream out(file.path); }
  CHECK_THROWS_AS(load_csv(file.path, ',', "y", Task::regression()), std::invalid_argument);
  CHECK_THROWS_AS(load_csv("/tmp/edlab_no_such_file.csv", ',', "y", Task::regression()),
                  std::invalid_argument);
}

TEST_CASE("csv round trip is value-identical") {
  SyntheticSpec spec{SineRegressionSpec{6.0, 0.3}, 40, 77};
  const Dataset d = generate(spec);
  TempFile file("roundtrip.csv");
  write_csv(d, file.path, ',');
  const Dataset back = load_csv(file.path, ',', d.target_name, d.task);
  CHECK(back.features.cwiseEqual(d.features).all());
  CHECK(back.targets.cwiseEqual(d.targets).all());
}

TEST_CASE("classification targets must be integral") {
  TempFile file("labels.csv");
  {
    std::ofstream out(file.path);
    out << "x,y\n";
    out << "0.5,0\n";
    out << "0.25,1.5\n";
  }
  CHECK_THROWS_AS(load_csv(file.path, ',', "y", Task::classification(2)),
                  std::runtime_error);
}

TEST_CASE("split partitions the rows") {
  SyntheticSpec spec{SineRegressionSpec{6.0, 0.1}, 10, 3};
  const Dataset d = generate(spec);
  const SplitResult parts = split(d, 0.5, 21);
  CHECK(parts.train.size() == 5);
  CHECK(parts.test.size() == 5);

  // disjoint and exhaustive on the feature values (all distinct w.p. 1)
  std::multiset<Real> seen;
  for (Index i = 0; i < parts.train.size(); ++i) seen.insert(parts.train.features(i, 0));
  for (Index i = 0; i < parts.test.size(); ++i) seen.insert(parts.test.features(i, 0));
  std::multiset<Real> original;
  for (Index i = 0; i < d.size(); ++i) original.insert(d.features(i, 0));
  CHECK(seen == original);

  const SplitResult again = split(d, 0.5, 21);
  CHECK(again.train.features.cwiseEqual(parts.train.features).all());

  CHECK_THROWS_AS(split(d, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(d, 1.0, 1), std::invalid_argument);
}

TEST_CASE("uneven split takes the ceiling for the training part") {
  SyntheticSpec spec{SineRegressionSpec{6.0, 0.1}, 7, 3};
  const SplitResult parts = split(generate(spec), 0.6, 2);
  CHECK(parts.train.size() == 5);  // ceil(4.2)
  CHECK(parts.test.size() == 2);
}

TEST_CASE("standardizer normalizes the training columns") {
  SyntheticSpec spec{SineRegressionSpec{6.0, 0.2}, 200, 9};
  Dataset d = generate(spec);
  d.features.col(0) = d.features.col(0).array() * 3.0 + 10.0;
  const Standardizer s = fit_standardizer(d);
  const Dataset normalized = apply_standardizer(s, d);
  CHECK(std::abs(normalized.features.col(0).mean()) <= 1e-12);
  const Real sd = std::sqrt(
      (normalized.features.col(0).array() - normalized.features.col(0).mean())
          .square()
          .mean());
  CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));

  // constant columns pass through unscaled
  Dataset flat = d;
  flat.features.col(0).setConstant(4.0);
  const Standardizer fs = fit_standardizer(flat);
  CHECK(fs.scale[0] == 1.0);
  CHECK(apply_standardizer(fs, flat).features.col(0).cwiseAbs().maxCoeff() == 0.0);
}
