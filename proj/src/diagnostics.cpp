#include "adabasis/diagnostics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace adabasis {

ImageTrace propagate_box(const NetworkParams& params, const Architecture& arch, int samples, std::uint64_t seed,
                         TraceDomain domain) {
  params.validate(arch);
  if (samples < 2) throw InvalidArgument("propagate_box: need at least two samples");
  const std::size_t first = domain == TraceDomain::input ? 0 : 1;
  const int dim = domain == TraceDomain::input ? arch.input_dim : arch.width;

  Rng rng(seed);
  ImageTrace trace;
  Matrix state = rng_uniform(rng, 0.0, 1.0, samples, dim);
  auto record = [&trace](Matrix m) {
    trace.lower.push_back(m.colwise().minCoeff().transpose());
    trace.upper.push_back(m.colwise().maxCoeff().transpose());
    trace.images.push_back(std::move(m));
  };
  record(state);
  for (std::size_t l = first; l < params.hidden.size(); ++l) {
    const bool skip = arch.kind == ArchKind::resnet && l > 0;
    state = apply_hidden_layer(params.hidden[l], arch.activation, skip, state);
    record(state);
  }
  return trace;
}

std::vector<EigRatios> eig_ratio_profile(const ImageTrace& trace) {
  std::vector<EigRatios> out;
  out.reserve(trace.images.size());
  for (const auto& image : trace.images) {
    EigRatios r;
    // Ratios are scale invariant; normalizing keeps blown-up images in range.
    const double scale = image.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      r.degenerate = true;
      out.push_back(r);
      continue;
    }
    const auto eig = sym_eig_desc(covariance(image / scale));
    const double top = eig.values.front();
    if (!(top > 0.0)) {
      r.degenerate = true;
    } else {
      const double second = eig.values.size() > 1 ? eig.values[1] : top;
      r.second_over_first = std::clamp(second / top, 0.0, 1.0);
      r.min_over_first = std::clamp(eig.values.back() / top, 0.0, 1.0);
    }
    out.push_back(r);
  }
  return out;
}

double collapse_score(const NetworkParams& params, const Architecture& arch, const Matrix& grid) {
  const Matrix phi = forward_basis(params, arch, grid).phi;
  return (phi.colwise().maxCoeff() - phi.colwise().minCoeff()).maxCoeff();
}

Matrix unit_grid(int n, int d) {
  if (n < 2 || d < 1) throw InvalidArgument("unit_grid: need n >= 2 and d >= 1");
  Eigen::Index total = 1;
  for (int k = 0; k < d; ++k) total *= n;
  Matrix grid(total, d);
  for (Eigen::Index row = 0; row < total; ++row) {
    Eigen::Index rem = row;
    for (int k = 0; k < d; ++k) {
      const Eigen::Index i = rem % n;
      rem /= n;
      grid(row, k) = i == n - 1 ? 1.0 : static_cast<double>(i) / (n - 1);
    }
  }
  return grid;
}

void export_basis(std::ostream& os, const NetworkParams& params, const Architecture& arch, const Matrix& grid) {
  const Matrix phi = forward_basis(params, arch, grid).phi;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) os << (k ? "," : "") << "x_" << k + 1;
  for (Eigen::Index i = 0; i < phi.cols(); ++i) os << ",phi_" << i + 1;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index k = 0; k < grid.cols(); ++k) os << (k ? "," : "") << grid(r, k);
    for (Eigen::Index i = 0; i < phi.cols(); ++i) os << ',' << phi(r, i);
    os << '\n';
  }
}

void export_cutplanes(std::ostream& os, const NetworkParams& params, const Architecture& arch) {
  params.validate(arch);
  if (arch.depth != 1) throw InvalidArgument("export_cutplanes: cut planes are only defined for a single hidden layer");
  const auto& layer = params.hidden.front();
  for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) os << (k ? "," : "") << "n_" << k + 1;
  os << ",offset\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
    for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) os << (k ? "," : "") << layer.weight(i, k);
    os << ',' << layer.bias(i) << '\n';
  }
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

void export_basis(const std::filesystem::path& path, const NetworkParams& params, const Architecture& arch,
                  const Matrix& grid) {
  auto os = open_out(path);
  export_basis(os, params, arch, grid);
}

void export_cutplanes(const std::filesystem::path& path, const NetworkParams& params, const Architecture& arch) {
  auto os = open_out(path);
  export_cutplanes(os, params, arch);
}

}  // namespace adabasis
