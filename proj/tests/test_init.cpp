#include "adabasis/init.hpp"

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace adabasis;

namespace {

// Max of every unit over all corners of [0, m]^d, by enumeration.
Vector corner_max(const DenseLayer& layer, double m) {
  const Matrix corners = oracle::box_corners(static_cast<int>(layer.weight.cols()), m);
  Matrix z = corners * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  return z.unaryExpr(&oracle::relu).colwise().maxCoeff().transpose();
}

Vector brute_force_corner(const Vector& n, double m) {
  const int d = static_cast<int>(n.size());
  const Matrix corners = oracle::box_corners(d, m);
  Eigen::Index best = 0;
  double best_v = -INFINITY;
  for (Eigen::Index r = 0; r < corners.rows(); ++r) {
    const double v = corners.row(r).dot(n.transpose());
    // ties go to the corner with fewer nonzero coordinates
    if (v > best_v + 1e-15 || (std::abs(v - best_v) <= 1e-15 && corners.row(r).sum() < corners.row(best).sum())) {
      best = r;
      best_v = v;
    }
  }
  return corners.row(best).transpose();
}

}  // namespace

TEST_CASE("max_corner examples") {
  Vector n(2);
  n << 1, 1;
  CHECK(max_corner(n, 1.0) == Vector::Ones(2));
  n << 0.6, -0.8;
  Vector expect(2);
  expect << 1, 0;
  CHECK(max_corner(n, 1.0) == expect);
  n << 0, -1;
  CHECK(max_corner(n, 1.0) == Vector::Zero(2));
  n << 0.5, 0.5;
  CHECK(max_corner(n, 2.5) == Vector::Constant(2, 2.5));
  CHECK_THROWS_AS(max_corner(Vector::Zero(3), 1.0), InvalidArgument);
}

TEST_CASE("max_corner agrees with brute-force argmax over corners") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + trial % 12;
    const Vector n = rng_normal(rng, d, 1).col(0);
    CHECK(max_corner(n, 1.0) == brute_force_corner(n, 1.0));
  }
  // d = 16 is slower to enumerate; fewer draws.
  for (int trial = 0; trial < 10; ++trial) {
    const Vector n = rng_normal(rng, 16, 1).col(0);
    CHECK(max_corner(n, 1.0) == brute_force_corner(n, 1.0));
  }
}

TEST_CASE("CutPlane construction") {
  const Vector p = Vector::Constant(1, 0.5);
  const Vector n = Vector::Constant(1, 1.0);
  const auto plane = CutPlane::fit(p, n, 1.0, 1.0);
  REQUIRE(plane);
  CHECK(plane->k == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(plane->weight_row()(0) == doctest::Approx(2.0));
  CHECK(plane->bias() == doctest::Approx(-1.0));
  // sigma(2x - 1) peaks at 1 on [0,1]
  CHECK(oracle::relu(plane->weight_row()(0) * 1.0 + plane->bias()) == doctest::Approx(1.0));

  CHECK_FALSE(CutPlane::fit(Vector::Constant(1, 1.0), n, 1.0, 1.0));
  CHECK_FALSE(CutPlane::fit(Vector::Zero(1), -n, 1.0, 1.0));
}

TEST_CASE("plain box init: peak 1 at the corners, zero at p, unit normals") {
  Rng rng(1);
  for (int d = 1; d <= 12; ++d) {
    const DenseLayer layer = box_init_plain(d, 5, rng);
    const Vector mx = corner_max(layer, 1.0);
    for (Eigen::Index i = 0; i < mx.size(); ++i) {
      CHECK(std::abs(mx(i) - 1.0) <= 1e-12);
      // k = |row| for unit n
      const double k = layer.weight.row(i).norm();
      CHECK(k > 0.0);
    }
  }
  // Same draws, reconstructed: the unit vanishes at its own p.
  Rng a(2), b(2);
  const DenseLayer layer = box_init_layer(3, 1, 1.0, 1.0, a);
  Vector p(3);
  for (int j = 0; j < 3; ++j) p(j) = b.uniform();
  const double z = layer.weight.row(0).dot(p.transpose()) + layer.bias(0);
  CHECK(std::abs(z) <= 1e-15);
}

TEST_CASE("box init respects arbitrary box and peak") {
  Rng rng(3);
  const DenseLayer layer = box_init_layer(4, 20, 2.5, 0.3, rng);
  const Vector mx = corner_max(layer, 2.5);
  for (Eigen::Index i = 0; i < mx.size(); ++i) CHECK(std::abs(mx(i) - 0.3) <= 1e-12);
}

TEST_CASE("resnet box schedule") {
  auto [m3, peak3] = resnet_box_scale(3, 4, ResnetSchedule::scaled_box);
  CHECK(m3 == doctest::Approx(1.5625).epsilon(1e-15));
  CHECK(peak3 == doctest::Approx(0.390625).epsilon(1e-15));
  auto [m1, peak1] = resnet_box_scale(1, 4, ResnetSchedule::scaled_box);
  CHECK(m1 == 1.0);
  CHECK(peak1 == 1.0);
  auto [ma, pa] = resnet_box_scale(3, 4, ResnetSchedule::uniform_peak);
  CHECK(ma == doctest::Approx(std::pow(4.0 / 3.0, 3)).epsilon(1e-15));
  CHECK(pa == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(resnet_box_scale(5, 4, ResnetSchedule::scaled_box), InvalidArgument);

  Rng rng(4);
  const Architecture arch{ArchKind::resnet, Activation::relu, 3, 6, 4, 1};
  const auto layers = box_init_resnet(arch, rng);
  REQUIRE(layers.size() == 4);
  const Vector mx = corner_max(layers[2], 1.5625);
  for (Eigen::Index i = 0; i < mx.size(); ++i) CHECK(std::abs(mx(i) - 0.390625) <= 1e-12);
  CHECK_THROWS_AS(box_init_resnet({ArchKind::plain, Activation::relu, 3, 6, 4, 1}, rng), InvalidArgument);
}

TEST_CASE("resnet of depth 1 draws exactly what plain box init draws") {
  Rng a(5), b(5);
  const auto res = box_init_resnet({ArchKind::resnet, Activation::relu, 2, 7, 1, 1}, a);
  const DenseLayer plain = box_init_plain(2, 7, b);
  CHECK(res[0].weight == plain.weight);
  CHECK(res[0].bias == plain.bias);
}

TEST_CASE("box-init resnet stays inside [0, e]^w") {
  Rng rng(6);
  for (int depth : {2, 8, 32}) {
    const Architecture arch{ArchKind::resnet, Activation::relu, 3, 8, depth, 1};
    const NetworkParams p = initialize(arch, InitKind::box, rng);
    Matrix x = rng_uniform(rng, 0, 1, 2000, 3);
    for (int l = 0; l < depth; ++l) {
      x = apply_hidden_layer(p.hidden[l], Activation::relu, l > 0, x);
      CHECK(x.minCoeff() >= 0.0);
      CHECK(x.maxCoeff() <= std::numbers::e);
    }
  }
}

TEST_CASE("He and Glorot bounds") {
  Rng rng(7);
  const DenseLayer he = he_uniform(6, 1000, rng);
  CHECK(he.weight.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(he.weight.cwiseAbs().maxCoeff() > 0.99);
  CHECK(he.bias.cwiseAbs().maxCoeff() == 0.0);
  const DenseLayer gl = glorot_uniform(3, 3, rng);
  CHECK(gl.weight.cwiseAbs().maxCoeff() <= 1.0);
  const DenseLayer gl_big = glorot_uniform(3, 3000, rng);
  CHECK(gl_big.weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 3003.0));

  Rng big(8);
  const DenseLayer many = he_uniform(6, 1000000 / 6, big);
  const double mean = many.weight.mean();
  const double var = (many.weight.array() - mean).square().mean();
  CHECK(std::abs(var - 1.0 / 3.0) < 0.01);
}

TEST_CASE("initialize is deterministic and zeroes the linear layer") {
  for (auto kind : {InitKind::box, InitKind::he, InitKind::glorot})
    for (auto ak : {ArchKind::plain, ArchKind::resnet}) {
      const Architecture arch{ak, Activation::relu, 2, 5, 3, 2};
      Rng a(9), b(9);
      const NetworkParams p = initialize(arch, kind, a);
      const NetworkParams q = initialize(arch, kind, b);
      CHECK(p.fingerprint() == q.fingerprint());
      CHECK(p.linear == Matrix::Zero(5, 2));
      CHECK_NOTHROW(p.validate(arch));
    }
  CHECK(parse_init_kind("glorot") == InitKind::glorot);
  CHECK_THROWS_AS(parse_init_kind("orthogonal"), InvalidArgument);
}
