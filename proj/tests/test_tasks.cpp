// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "loranlab/analysis.hpp"
#include "loranlab/rng.hpp"
#include "loranlab/tasks.hpp"
#include "oracles.hpp"

using namespace loran;

TEST_CASE("blobs are reproducible by seed") {
  BlobsTask task;
  const Dataset a = gen_blobs(task), b = gen_blobs(task);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.features.bit_equal(b.features));
  task.seed = 2;
  CHECK(gen_blobs(task).fingerprint() != a.fingerprint());
  CHECK(a.size() == 200);
  CHECK(a.dim() == 16);
  for (int c = 0; c < 4; ++c) CHECK(std::count(a.labels.begin(), a.labels.end(), c) == 50);
}

TEST_CASE("blobs validation") {
  BlobsTask t;
  t.classes = 1;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = BlobsTask{};
  t.spread = -1;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("default blobs are separable by a logistic regression oracle") {
  const Dataset data = gen_blobs(BlobsTask{});
  CHECK(oracle::logistic_regression_accuracy(data, 4, 300, 0.5) >= 0.99);
}

TEST_CASE("spread zero leaves nothing to learn") {
  BlobsTask task;
  task.spread = 0.0;
  task.per_class = 500;
  const Dataset data = gen_blobs(task);
  CHECK(oracle::logistic_regression_accuracy(data, 4, 300, 0.5) <= 0.25 + 0.1);
}

TEST_CASE("dataset csv export") {
  BlobsTask task;
  task.per_class = 2;
  task.dim = 3;
  std::ostringstream os;
  write_csv(gen_blobs(task), os);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 9);
  CHECK(s.rfind("label,x0,x1,x2\n", 0) == 0);
}

TEST_CASE("subset keeps columns and labels") {
  const Dataset data = gen_blobs(BlobsTask{});
  const std::size_t idx[] = {5, 0, 9};
  const Dataset s = data.subset(idx);
  CHECK(s.size() == 3);
  CHECK(s.labels[0] == data.labels[5]);
  for (std::size_t r = 0; r < data.dim(); ++r) CHECK(s.features(r, 2) == data.features(r, 9));
}

TEST_CASE("toy classifier is deterministic and frozen") {
  const ToyClassifier a = ToyClassifier::make(16, 32, 4, 7), b = ToyClassifier::make(16, 32, 4, 7);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.hidden.weight.rows() == 32);
  CHECK(a.head.weight.rows() == 4);
  const Dataset data = gen_blobs(BlobsTask{});
  const Adapter ad = init_adapter(32, 16, 8, 16.0, 1);
  CHECK(a.predict(ad, data.features) == b.predict(ad, data.features));
  const double acc = a.accuracy(ad, data);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("teacher target has exact rank t") {
  for (std::size_t t : {1, 4, 16}) {
    TeacherTask task;
    task.target_rank = t;
    const Tensor w = make_teacher_target(task);
    CHECK(numerical_rank(svd_values(w), 1e-10) == t);
    CHECK(w.bit_equal(make_teacher_target(task)));
  }
  TeacherTask bad;
  bad.target_rank = 33;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("teacher loss values") {
  const TeacherTask task;
  const Tensor target = make_teacher_target(task);
  const Adapter fresh = init_adapter(32, 32, 4, 4.0, 1);
  CHECK(teacher_loss(fresh, target) == doctest::Approx(frobenius_norm_squared(target) / (32.0 * 32.0)).epsilon(1e-14));
  Tape t;
  CHECK(teacher_loss(t.leaf(target), target).value().data()[0] == 0.0);
  CHECK_THROWS_AS(teacher_loss(t.leaf(Tensor::zeros(3, 3)), target), DimensionError);
}
