#pragma once

#include "adabasis/network.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace adabasis {

/// Where the trace draws its samples:
///   input:      U[0,1]^d pushed through every hidden layer;
///   hidden_box: U[0,1]^w pushed through layers 2..L, i.e. the image of the
///               unit box under the hidden-to-hidden maps.
enum class TraceDomain { input, hidden_box };

struct ImageTrace {
  std::vector<Matrix> images;  // images[0] = samples, images[l] = after traced layer l
  std::vector<Vector> lower;   // componentwise min per entry of images
  std::vector<Vector> upper;   // componentwise max
};

ImageTrace propagate_box(const NetworkParams& params, const Architecture& arch, int samples, std::uint64_t seed,
                         TraceDomain domain = TraceDomain::input);

struct EigRatios {
  double second_over_first = 0.0;
  double min_over_first = 0.0;
  bool degenerate = false;  // largest eigenvalue was zero
};

/// Covariance eigenvalue ratios of every image in the trace.
std::vector<EigRatios> eig_ratio_profile(const ImageTrace& trace);

/// max_i (max_x Phi_i - min_x Phi_i) over the grid.
double collapse_score(const NetworkParams& params, const Architecture& arch, const Matrix& grid);

/// Score below which a basis counts as collapsed (constant) on a 256-point grid.
inline constexpr double kCollapseThreshold = 1e-6;

/// n evenly spaced points on [0,1] per axis, tensor product over d axes.
Matrix unit_grid(int n, int d = 1);

/// CSV with header x_1..x_d,phi_1..phi_w and one row per grid point.
void export_basis(std::ostream& os, const NetworkParams& params, const Architecture& arch, const Matrix& grid);
void export_basis(const std::filesystem::path& path, const NetworkParams& params, const Architecture& arch,
                  const Matrix& grid);

/// CSV with header n_1..n_d,offset; row i describes W_i . x + b_i = 0.
/// Only defined for single-hidden-layer networks.
void export_cutplanes(std::ostream& os, const NetworkParams& params, const Architecture& arch);
void export_cutplanes(const std::filesystem::path& path, const NetworkParams& params, const Architecture& arch);

}  // namespace adabasis
