#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adabasis {

/// Dense row-major matrix of doubles. Row j of a sample matrix holds point j.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Raised for malformed arguments anywhere in the library (shape mismatch,
/// non-finite input, out-of-domain evaluation).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const std::string& what);

/// Counter-based generator: draw i of a stream is a SplitMix64 hash of
/// (seed, i), so a (seed, draw index) pair fixes every sample and streams
/// can be split without sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller; consumes two draws).
  double normal();

  /// Independent child stream; children with distinct ids never overlap
  /// with each other or with the parent.
  Rng split(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

Matrix rng_uniform(Rng& rng, double lo, double hi, Eigen::Index rows, Eigen::Index cols);
Matrix rng_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Minimum-norm least-squares solution of A X = B via a truncated SVD.
/// Singular values at or below rank_tol * sigma_max count as zero; the
/// default tolerance is max(N, w) * machine epsilon.
Matrix lstsq_minnorm(const Matrix& a, const Matrix& b, std::optional<double> rank_tol = std::nullopt);

/// Unbiased sample covariance of the rows of x (N >= 2).
Matrix covariance(const Matrix& x);

struct SymEig {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]; empty unless requested
};

/// Eigenvalues of a symmetric matrix, sorted descending.
SymEig sym_eig_desc(const Matrix& c, bool with_vectors = false);

}  // namespace adabasis
