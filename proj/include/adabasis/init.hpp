#pragma once

#include "adabasis/linalg.hpp"
#include "adabasis/network.hpp"

#include <string>
#include <utility>

namespace adabasis {

enum class InitKind { box, he, glorot };

/// Layer-scale schedule for ResNet box initialization.
///   scaled_box: layer l > 1 samples p in [0, m]^w with m = (1 + 1/L)^(l-1)
///               and caps each unit's max over that box at m / L. This
///               schedule carries the [0, e]^w containment bound.
///   uniform_peak: m = (1 + 1/(L-1))^l with unit max 1/(L-1). Requires L >= 2.
enum class ResnetSchedule { scaled_box, uniform_peak };

std::string to_string(InitKind kind);
InitKind parse_init_kind(const std::string& s);

/// A ReLU unit sigma(k (x - p) . n) over the box [0, m]^d.
struct CutPlane {
  Vector p;
  Vector n;  // unit normal
  double k = 1.0;

  /// Scale k so that the unit peaks at `peak` over [0, m]^d. Returns
  /// nullopt when p is (numerically) at the maximal corner.
  static std::optional<CutPlane> fit(const Vector& p, const Vector& n, double box_size, double peak);

  /// Row k n^T and bias -k n . p, so the affine map W x + b reproduces
  /// k (x - p) . n.
  Eigen::RowVectorXd weight_row() const { return k * n.transpose(); }
  double bias() const { return -k * n.dot(p); }
};

/// Corner of [0, m]^d furthest along n: m * max(sgn(n_i), 0).
Vector max_corner(const Vector& n, double box_size = 1.0);

DenseLayer box_init_plain(int d_in, int d_out, Rng& rng);
/// Box layer with cut planes scattered in [0, box_size]^d_in and per-unit
/// maximum `peak` over that box.
DenseLayer box_init_layer(int d_in, int d_out, double box_size, double peak, Rng& rng);

std::vector<DenseLayer> box_init_resnet(const Architecture& arch, Rng& rng,
                                        ResnetSchedule schedule = ResnetSchedule::scaled_box);

/// (box size m, unit peak) used for hidden layer `layer` (1-based) of a
/// depth-L ResNet under the given schedule.
std::pair<double, double> resnet_box_scale(int layer, int depth, ResnetSchedule schedule);

DenseLayer he_uniform(int d_in, int d_out, Rng& rng);
DenseLayer glorot_uniform(int d_in, int d_out, Rng& rng);

/// Hidden layers for the requested initializer; linear coefficients zero.
NetworkParams initialize(const Architecture& arch, InitKind kind, Rng& rng,
                         ResnetSchedule schedule = ResnetSchedule::scaled_box);

}  // namespace adabasis
