#pragma once

#include "adabasis/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace adabasis {

enum class ArchKind { plain, resnet };
enum class Activation { relu, tanh };

std::string to_string(ArchKind kind);
std::string to_string(Activation act);
ArchKind parse_arch_kind(const std::string& s);
Activation parse_activation(const std::string& s);

struct Architecture {
  ArchKind kind = ArchKind::plain;
  Activation activation = Activation::relu;
  int input_dim = 1;
  int width = 1;
  int depth = 1;
  int outputs = 1;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// One affine map T(x) = W x + b; W is (out x in).
struct DenseLayer {
  Matrix weight;
  Vector bias;
};

/// Hidden parameters (one DenseLayer per hidden layer) plus the linear
/// output coefficients, a (width x outputs) matrix.
struct NetworkParams {
  std::vector<DenseLayer> hidden;
  Matrix linear;

  /// Throws unless shapes match arch and every entry is finite.
  void validate(const Architecture& arch) const;
  std::uint64_t fingerprint() const;
};

using HiddenGrad = std::vector<DenseLayer>;

/// Layer-wise zero structure shaped like params.hidden.
HiddenGrad zeros_like_hidden(const NetworkParams& params);
Eigen::Index hidden_param_count(const NetworkParams& params);
Vector flatten_hidden(const std::vector<DenseLayer>& layers);
void unflatten_hidden(const Vector& flat, std::vector<DenseLayer>& layers);

double activate(Activation act, double z);
double activate_d1(Activation act, double z);
double activate_d2(Activation act, double z);

/// Basis values on a point set, optionally with their input Jacobian, plus
/// the per-layer cache a single reverse sweep needs.
struct BasisEval {
  Matrix phi;                // N x w, row j = (Phi_1(x_j), ..., Phi_w(x_j))
  std::vector<Matrix> jac;   // jac[k](j, i) = dPhi_i/dx_k at x_j; empty if not requested

  struct LayerCache {
    Matrix input;                    // x_l, N x d_l
    Matrix preact;                   // z_l = x_l W^T + b, N x w
    std::vector<Matrix> tangents;    // dx_l/dx_k, one N x d_l block per input dim
  };
  std::vector<LayerCache> layers;
  std::uint64_t params_fingerprint = 0;
  bool has_jacobian() const { return !jac.empty(); }
};

/// One hidden layer without caching: sigma(x W^T + b), plus x when `skip`.
Matrix apply_hidden_layer(const DenseLayer& layer, Activation act, bool skip, const Matrix& x);

BasisEval forward_basis(const NetworkParams& params, const Architecture& arch, const Matrix& x,
                        bool with_jacobian = false);

Matrix forward_output(const NetworkParams& params, const Architecture& arch, const Matrix& x);

std::vector<Matrix> input_jacobian_basis(const NetworkParams& params, const Architecture& arch,
                                         const Matrix& x);

/// Gradient w.r.t. hidden parameters of
///   <g_phi, Phi(X)> + sum_k <g_jac[k], dPhi/dx_k(X)>
/// using the cache of a forward pass at the same params. g_jac may be
/// empty, in which case the cache need not carry tangents.
HiddenGrad param_vjp(const BasisEval& eval, const NetworkParams& params, const Architecture& arch,
                     const Matrix& g_phi, const std::vector<Matrix>& g_jac);

/// JSON checkpoint: architecture header followed by layer-ordered
/// row-major weight, bias and linear-coefficient arrays.
std::string checkpoint_to_json(const Architecture& arch, const NetworkParams& params);
void checkpoint_from_json(const std::string& text, Architecture& arch, NetworkParams& params);
void save_checkpoint(const std::filesystem::path& path, const Architecture& arch, const NetworkParams& params);
void load_checkpoint(const std::filesystem::path& path, Architecture& arch, NetworkParams& params);

}  // namespace adabasis
