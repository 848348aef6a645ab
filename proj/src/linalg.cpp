#include "adabasis/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace adabasis {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw InvalidArgument(what + ": non-finite entry");
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  if (!(lo < hi)) throw InvalidArgument("uniform: require lo < hi");
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t stream_id) const {
  return Rng(mix64(mix64(seed_) ^ mix64((stream_id + 1) * kGolden + 0xD1B54A32D192ED03ULL)));
}

Matrix rng_uniform(Rng& rng, double lo, double hi, Eigen::Index rows, Eigen::Index cols) {
  if (!(lo < hi)) throw InvalidArgument("rng_uniform: require lo < hi");
  if (rows < 0 || cols < 0) throw InvalidArgument("rng_uniform: negative shape");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = lo + (hi - lo) * rng.uniform();
  return out;
}

Matrix rng_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0) throw InvalidArgument("rng_normal: negative shape");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.normal();
  return out;
}

Matrix lstsq_minnorm(const Matrix& a, const Matrix& b, std::optional<double> rank_tol) {
  if (a.rows() < 1 || a.cols() < 1) throw InvalidArgument("lstsq_minnorm: empty system matrix");
  if (b.rows() != a.rows()) throw InvalidArgument("lstsq_minnorm: row count of A and B differ");
  require_finite(a, "lstsq_minnorm: A");
  require_finite(b, "lstsq_minnorm: B");

  const double tol = rank_tol.value_or(static_cast<double>(std::max(a.rows(), a.cols())) *
                                       std::numeric_limits<double>::epsilon());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  const double cutoff = sigma.size() > 0 ? tol * sigma(0) : 0.0;

  // X = V diag(1/sigma_r) U^T B over the retained singular triplets.
  Eigen::MatrixXd utb = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0)
      utb.row(i) /= sigma(i);
    else
      utb.row(i).setZero();
  }
  Matrix x = svd.matrixV() * utb;
  return x;
}

Matrix covariance(const Matrix& x) {
  if (x.rows() < 2) throw InvalidArgument("covariance: need at least two samples");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  Matrix c = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  // exact symmetry for downstream eigensolves
  return 0.5 * (c + c.transpose());
}

SymEig sym_eig_desc(const Matrix& c, bool with_vectors) {
  if (c.rows() != c.cols()) throw InvalidArgument("sym_eig_desc: matrix not square");
  require_finite(c, "sym_eig_desc");
  const double scale = std::max(c.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidArgument("sym_eig_desc: matrix not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      c, with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("sym_eig_desc: eigensolver failed");

  // Eigen returns ascending order.
  const Eigen::Index n = c.rows();
  SymEig out;
  out.values.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out.values[static_cast<std::size_t>(i)] = solver.eigenvalues()(n - 1 - i);
  if (with_vectors) out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace adabasis
