#include "adabasis/init.hpp"

#include <cmath>

namespace adabasis {

namespace {

// Resample budget for a single unit; a degenerate draw has probability ~0
// so this only trips on a broken generator.
constexpr int kMaxResample = 1000;
constexpr double kDegenerate = 1e-12;

Vector random_unit_normal(int dim, Rng& rng) {
  for (;;) {
    Vector n(dim);
    for (int i = 0; i < dim; ++i) n(i) = rng.normal();
    const double norm = n.norm();
    if (norm > 1e-300) return n / norm;
  }
}

}  // namespace

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::box: return "box";
    case InitKind::he: return "he";
    case InitKind::glorot: return "glorot";
  }
  return "?";
}

InitKind parse_init_kind(const std::string& s) {
  if (s == "box") return InitKind::box;
  if (s == "he") return InitKind::he;
  if (s == "glorot") return InitKind::glorot;
  throw InvalidArgument("unknown initializer '" + s + "' (expected box|he|glorot)");
}

Vector max_corner(const Vector& n, double box_size) {
  if (n.size() == 0 || n.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("max_corner: zero direction");
  Vector c(n.size());
  for (Eigen::Index i = 0; i < n.size(); ++i) c(i) = n(i) > 0.0 ? box_size : 0.0;
  return c;
}

std::optional<CutPlane> CutPlane::fit(const Vector& p, const Vector& n, double box_size, double peak) {
  if (p.size() != n.size()) throw InvalidArgument("CutPlane::fit: p and n differ in dimension");
  if (!(peak > 0.0) || !(box_size > 0.0)) throw InvalidArgument("CutPlane::fit: peak and box size must be positive");
  const double reach = (max_corner(n, box_size) - p).dot(n);
  if (!(reach > kDegenerate)) return std::nullopt;
  return CutPlane{p, n, peak / reach};
}

DenseLayer box_init_layer(int d_in, int d_out, double box_size, double peak, Rng& rng) {
  if (d_in < 1 || d_out < 1) throw InvalidArgument("box_init: dimensions must be >= 1");
  DenseLayer layer{Matrix(d_out, d_in), Vector(d_out)};
  for (int i = 0; i < d_out; ++i) {
    std::optional<CutPlane> plane;
    for (int attempt = 0; attempt < kMaxResample && !plane; ++attempt) {
      Vector p(d_in);
      for (int j = 0; j < d_in; ++j) p(j) = box_size * rng.uniform();
      const Vector n = random_unit_normal(d_in, rng);
      plane = CutPlane::fit(p, n, box_size, peak);
    }
    if (!plane) throw std::runtime_error("box_init: could not draw a non-degenerate cut plane");
    layer.weight.row(i) = plane->weight_row();
    layer.bias(i) = plane->bias();
  }
  return layer;
}

DenseLayer box_init_plain(int d_in, int d_out, Rng& rng) { return box_init_layer(d_in, d_out, 1.0, 1.0, rng); }

std::pair<double, double> resnet_box_scale(int layer, int depth, ResnetSchedule schedule) {
  if (layer < 1 || layer > depth) throw InvalidArgument("resnet_box_scale: layer out of range");
  if (layer == 1) return {1.0, 1.0};
  const double big_l = depth;
  if (schedule == ResnetSchedule::scaled_box) {
    const double m = std::pow(1.0 + 1.0 / big_l, layer - 1);
    return {m, m / big_l};
  }
  const double m = std::pow(1.0 + 1.0 / (big_l - 1.0), layer);
  return {m, 1.0 / (big_l - 1.0)};
}

std::vector<DenseLayer> box_init_resnet(const Architecture& arch, Rng& rng, ResnetSchedule schedule) {
  arch.validate();
  if (arch.kind != ArchKind::resnet) throw InvalidArgument("box_init_resnet: architecture is not a resnet");
  std::vector<DenseLayer> layers;
  layers.reserve(static_cast<std::size_t>(arch.depth));
  layers.push_back(box_init_plain(arch.input_dim, arch.width, rng));
  for (int l = 2; l <= arch.depth; ++l) {
    const auto [m, peak] = resnet_box_scale(l, arch.depth, schedule);
    layers.push_back(box_init_layer(arch.width, arch.width, m, peak, rng));
  }
  return layers;
}

namespace {

DenseLayer uniform_layer(int d_in, int d_out, double bound, Rng& rng) {
  if (d_in < 1 || d_out < 1) throw InvalidArgument("initializer: dimensions must be >= 1");
  return {rng_uniform(rng, -bound, bound, d_out, d_in), Vector::Zero(d_out)};
}

}  // namespace

DenseLayer he_uniform(int d_in, int d_out, Rng& rng) {
  return uniform_layer(d_in, d_out, std::sqrt(6.0 / d_in), rng);
}

DenseLayer glorot_uniform(int d_in, int d_out, Rng& rng) {
  return uniform_layer(d_in, d_out, std::sqrt(6.0 / (d_in + d_out)), rng);
}

NetworkParams initialize(const Architecture& arch, InitKind kind, Rng& rng, ResnetSchedule schedule) {
  arch.validate();
  NetworkParams params;
  if (kind == InitKind::box && arch.kind == ArchKind::resnet) {
    params.hidden = box_init_resnet(arch, rng, schedule);
  } else {
    for (int l = 0; l < arch.depth; ++l) {
      const int d_in = l == 0 ? arch.input_dim : arch.width;
      switch (kind) {
        case InitKind::box: params.hidden.push_back(box_init_plain(d_in, arch.width, rng)); break;
        case InitKind::he: params.hidden.push_back(he_uniform(d_in, arch.width, rng)); break;
        case InitKind::glorot: params.hidden.push_back(glorot_uniform(d_in, arch.width, rng)); break;
      }
    }
  }
  params.linear = Matrix::Zero(arch.width, arch.outputs);
  return params;
}

}  // namespace adabasis
