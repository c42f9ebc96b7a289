#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qi {

using Complex = std::complex<double>;
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;

// Tolerances shared across the numeric layer.
inline constexpr double kHermitianTol = 1e-10;   // entrywise |H - H^dag|
inline constexpr double kEigenClipTol = 1e-10;   // eigenvalues in (-tol, 0] -> 0
inline constexpr double kSupportRelTol = 1e-10;  // support cutoff, relative to lambda_max

bool is_hermitian(const ComplexMatrix& m, double tol = kHermitianTol);

// Dense complex square matrix checked Hermitian on construction.
class HermitianOperator {
 public:
  explicit HermitianOperator(ComplexMatrix m);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const ComplexMatrix& matrix() const { return mat_; }

 private:
  ComplexMatrix mat_;
};

// Positive semidefinite, unit trace (or trace <= 1 for the subnormalized kind).
class DensityOperator {
 public:
  explicit DensityOperator(ComplexMatrix m);
  static DensityOperator subnormalized(ComplexMatrix m);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const ComplexMatrix& matrix() const { return mat_; }
  bool is_subnormalized() const { return subnormalized_; }

 private:
  DensityOperator(ComplexMatrix m, bool subnormalized);
  ComplexMatrix mat_;
  bool subnormalized_ = false;
};

struct EighResult {
  RealVector eigenvalues;      // descending
  ComplexMatrix eigenvectors;  // columns match eigenvalue order
};

EighResult eigh(const ComplexMatrix& h);
EighResult eigh(const HermitianOperator& h);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

enum class Subsystem { A, B };

// Two-party wrappers over the general n-party versions below.
ComplexMatrix partial_trace(const ComplexMatrix& m, int dim_a, int dim_b,
                            Subsystem keep);
ComplexMatrix partial_transpose(const ComplexMatrix& m, int dim_a, int dim_b,
                                Subsystem which);

// General forms over a tensor factorization given by `dims`.
// keep/transposed flags select the factors kept (traced-out otherwise) or
// transposed. The identity prod(dims) == m.rows() is required.
ComplexMatrix partial_trace(const ComplexMatrix& m,
                            const std::vector<int>& dims,
                            const std::vector<bool>& keep);
ComplexMatrix partial_transpose(const ComplexMatrix& m,
                                const std::vector<int>& dims,
                                const std::vector<bool>& transposed);
ComplexMatrix permute_systems(const ComplexMatrix& m,
                              const std::vector<int>& dims,
                              const std::vector<int>& perm);

// Hermitian matrix functions via eigendecomposition. Eigenvalues in
// (-kEigenClipTol, 0] are clipped to zero; negative powers and logarithms act
// on the support only (pseudo-inverse semantics, cutoff kSupportRelTol
// relative to the largest eigenvalue).
ComplexMatrix matrix_power_psd(const ComplexMatrix& h, double t);
ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& h);
ComplexMatrix matrix_log_psd(const ComplexMatrix& h);  // natural log on support
ComplexMatrix pseudo_inverse_psd(const ComplexMatrix& h);
ComplexMatrix support_projector(const ComplexMatrix& h);

// Weighted matrix geometric mean
//   G_t(X, Y) = X^{1/2} (X^{-1/2} Y X^{-1/2})^t X^{1/2} = G_{1-t}(Y, X)
// evaluated with the pivot chosen so the inner exponent is nonnegative
// (X for t >= 0, Y for t < 0); this is the extension to singular operators
// that is continuous in the non-pivot argument. Finiteness conditions are
// the caller's concern (the divergence layer checks support inclusion).
ComplexMatrix weighted_geometric_mean(const ComplexMatrix& x,
                                      const ComplexMatrix& y, double t);

double operator_norm(const ComplexMatrix& h);  // Hermitian input: max |eigenvalue|
double trace_norm(const ComplexMatrix& m);     // sum of singular values
double max_eigenvalue(const ComplexMatrix& h);

}  // namespace qi
