#include "qi/linalg.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace qi {

namespace {

void require_square(const ComplexMatrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix is not square (" +
                                std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ")");
  }
}

void require_dims(const ComplexMatrix& m, const std::vector<int>& dims,
                  const char* who) {
  require_square(m, who);
  long prod = 1;
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument(std::string(who) + ": nonpositive factor dimension");
    prod *= d;
  }
  if (prod != m.rows()) {
    throw std::invalid_argument(std::string(who) + ": factor dimensions multiply to " +
                                std::to_string(prod) + ", matrix has dim " +
                                std::to_string(m.rows()));
  }
}

// Row-major multi-index helpers over a fixed factorization.
struct MultiIndex {
  explicit MultiIndex(const std::vector<int>& dims) : dims_(dims) {
    strides_.resize(dims.size());
    long s = 1;
    for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
      strides_[k] = s;
      s *= dims[k];
    }
    total_ = s;
  }

  long total() const { return total_; }

  void decode(long flat, std::vector<int>& out) const {
    for (size_t k = 0; k < dims_.size(); ++k) {
      out[k] = static_cast<int>(flat / strides_[k]);
      flat %= strides_[k];
    }
  }

  long encode(const std::vector<int>& idx) const {
    long flat = 0;
    for (size_t k = 0; k < dims_.size(); ++k) flat += idx[k] * strides_[k];
    return flat;
  }

 private:
  std::vector<int> dims_;
  std::vector<long> strides_;
  long total_ = 0;
};

}  // namespace

bool is_hermitian(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

HermitianOperator::HermitianOperator(ComplexMatrix m) : mat_(std::move(m)) {
  require_square(mat_, "HermitianOperator");
  if (!is_hermitian(mat_)) {
    throw std::invalid_argument("HermitianOperator: input is not Hermitian within 1e-10");
  }
}

DensityOperator::DensityOperator(ComplexMatrix m)
    : DensityOperator(std::move(m), /*subnormalized=*/false) {}

DensityOperator DensityOperator::subnormalized(ComplexMatrix m) {
  return DensityOperator(std::move(m), /*subnormalized=*/true);
}

DensityOperator::DensityOperator(ComplexMatrix m, bool subnormalized)
    : mat_(std::move(m)), subnormalized_(subnormalized) {
  require_square(mat_, "DensityOperator");
  if (!is_hermitian(mat_)) {
    throw std::invalid_argument("DensityOperator: input is not Hermitian within 1e-10");
  }
  const double tr = mat_.trace().real();
  if (subnormalized_) {
    if (tr > 1.0 + kHermitianTol || tr < -kHermitianTol) {
      throw std::invalid_argument("DensityOperator: trace must lie in [0, 1], got " +
                                  std::to_string(tr));
    }
  } else if (std::abs(tr - 1.0) > kHermitianTol) {
    throw std::invalid_argument("DensityOperator: trace must equal 1, got " +
                                std::to_string(tr));
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(mat_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kEigenClipTol) {
    throw std::invalid_argument("DensityOperator: minimum eigenvalue " +
                                std::to_string(es.eigenvalues().minCoeff()) +
                                " below -1e-10");
  }
}

EighResult eigh(const ComplexMatrix& h) {
  require_square(h, "eigh");
  if (!is_hermitian(h)) {
    throw std::invalid_argument("eigh: input is not Hermitian within 1e-10");
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigh: eigendecomposition failed to converge");
  }
  const int n = static_cast<int>(h.rows());
  EighResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  // Eigen returns ascending order; the contract here is descending.
  for (int i = 0; i < n; ++i) {
    out.eigenvalues(i) = es.eigenvalues()(n - 1 - i);
    out.eigenvectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

EighResult eigh(const HermitianOperator& h) { return eigh(h.matrix()); }

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

ComplexMatrix partial_trace(const ComplexMatrix& m, int dim_a, int dim_b,
                            Subsystem keep) {
  return partial_trace(m, {dim_a, dim_b},
                       {keep == Subsystem::A, keep == Subsystem::B});
}

ComplexMatrix partial_transpose(const ComplexMatrix& m, int dim_a, int dim_b,
                                Subsystem which) {
  return partial_transpose(m, {dim_a, dim_b},
                           {which == Subsystem::A, which == Subsystem::B});
}

ComplexMatrix partial_trace(const ComplexMatrix& m,
                            const std::vector<int>& dims,
                            const std::vector<bool>& keep) {
  require_dims(m, dims, "partial_trace");
  if (keep.size() != dims.size()) {
    throw std::invalid_argument("partial_trace: keep mask size mismatch");
  }
  std::vector<int> kept_dims, traced_dims;
  for (size_t k = 0; k < dims.size(); ++k) {
    (keep[k] ? kept_dims : traced_dims).push_back(dims[k]);
  }
  MultiIndex full(dims);
  MultiIndex kept(kept_dims.empty() ? std::vector<int>{1} : kept_dims);
  MultiIndex traced(traced_dims.empty() ? std::vector<int>{1} : traced_dims);

  ComplexMatrix out = ComplexMatrix::Zero(kept.total(), kept.total());
  std::vector<int> row(dims.size()), col(dims.size());
  std::vector<int> krow(kept_dims.size()), kcol(kept_dims.size());
  std::vector<int> tidx(traced_dims.size());
  for (long i = 0; i < kept.total(); ++i) {
    kept.decode(i, krow);
    for (long j = 0; j < kept.total(); ++j) {
      kept.decode(j, kcol);
      Complex acc = 0.0;
      for (long t = 0; t < traced.total(); ++t) {
        traced.decode(t, tidx);
        size_t ik = 0, it = 0;
        for (size_t k = 0; k < dims.size(); ++k) {
          if (keep[k]) {
            row[k] = krow[ik];
            col[k] = kcol[ik];
            ++ik;
          } else {
            row[k] = tidx[it];
            col[k] = tidx[it];
            ++it;
          }
        }
        acc += m(full.encode(row), full.encode(col));
      }
      out(i, j) = acc;
    }
  }
  return out;
}

ComplexMatrix partial_transpose(const ComplexMatrix& m,
                                const std::vector<int>& dims,
                                const std::vector<bool>& transposed) {
  require_dims(m, dims, "partial_transpose");
  if (transposed.size() != dims.size()) {
    throw std::invalid_argument("partial_transpose: mask size mismatch");
  }
  MultiIndex full(dims);
  ComplexMatrix out(m.rows(), m.cols());
  std::vector<int> row(dims.size()), col(dims.size());
  std::vector<int> trow(dims.size()), tcol(dims.size());
  for (long i = 0; i < full.total(); ++i) {
    full.decode(i, row);
    for (long j = 0; j < full.total(); ++j) {
      full.decode(j, col);
      for (size_t k = 0; k < dims.size(); ++k) {
        trow[k] = transposed[k] ? col[k] : row[k];
        tcol[k] = transposed[k] ? row[k] : col[k];
      }
      out(full.encode(trow), full.encode(tcol)) = m(i, j);
    }
  }
  return out;
}

ComplexMatrix permute_systems(const ComplexMatrix& m,
                              const std::vector<int>& dims,
                              const std::vector<int>& perm) {
  require_dims(m, dims, "permute_systems");
  if (perm.size() != dims.size()) {
    throw std::invalid_argument("permute_systems: permutation size mismatch");
  }
  // perm[k] = source factor placed at position k of the output.
  std::vector<bool> seen(dims.size(), false);
  std::vector<int> new_dims(dims.size());
  for (size_t k = 0; k < perm.size(); ++k) {
    if (perm[k] < 0 || perm[k] >= static_cast<int>(dims.size()) || seen[perm[k]]) {
      throw std::invalid_argument("permute_systems: not a permutation");
    }
    seen[perm[k]] = true;
    new_dims[k] = dims[perm[k]];
  }
  MultiIndex full(dims);
  MultiIndex out_idx(new_dims);
  ComplexMatrix out(m.rows(), m.cols());
  std::vector<int> row(dims.size()), col(dims.size());
  std::vector<int> prow(dims.size()), pcol(dims.size());
  for (long i = 0; i < full.total(); ++i) {
    full.decode(i, row);
    for (long j = 0; j < full.total(); ++j) {
      full.decode(j, col);
      for (size_t k = 0; k < dims.size(); ++k) {
        prow[k] = row[perm[k]];
        pcol[k] = col[perm[k]];
      }
      out(out_idx.encode(prow), out_idx.encode(pcol)) = m(i, j);
    }
  }
  return out;
}

namespace {

// Shared eigenbasis transform f(H) = V f(clip(lambda)) V^dag. `f` sees only
// eigenvalues above the support cutoff; the rest map to `off_support`.
ComplexMatrix hermitian_function(const ComplexMatrix& h,
                                 const std::function<double(double)>& f,
                                 double off_support) {
  EighResult e = eigh(h);
  const int n = static_cast<int>(h.rows());
  const double lmax = n > 0 ? std::abs(e.eigenvalues(0)) : 0.0;
  const double cutoff = std::max(lmax * kSupportRelTol, 0.0);
  RealVector fv(n);
  for (int i = 0; i < n; ++i) {
    double lam = e.eigenvalues(i);
    if (lam > -kEigenClipTol && lam <= 0.0) lam = 0.0;
    fv(i) = (lam > cutoff) ? f(lam) : off_support;
  }
  return e.eigenvectors * fv.asDiagonal() * e.eigenvectors.adjoint();
}

}  // namespace

ComplexMatrix matrix_power_psd(const ComplexMatrix& h, double t) {
  if (t == 0.0) return support_projector(h);
  // Negative powers act on the support only.
  return hermitian_function(h, [t](double x) { return std::pow(x, t); }, 0.0);
}

ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& h) {
  return matrix_power_psd(h, 0.5);
}

ComplexMatrix matrix_log_psd(const ComplexMatrix& h) {
  return hermitian_function(h, [](double x) { return std::log(x); }, 0.0);
}

ComplexMatrix pseudo_inverse_psd(const ComplexMatrix& h) {
  return matrix_power_psd(h, -1.0);
}

ComplexMatrix support_projector(const ComplexMatrix& h) {
  return hermitian_function(h, [](double) { return 1.0; }, 0.0);
}

ComplexMatrix weighted_geometric_mean(const ComplexMatrix& x,
                                      const ComplexMatrix& y, double t) {
  require_square(x, "weighted_geometric_mean");
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument("weighted_geometric_mean: dimension mismatch");
  }
  // Pick the pivot so the inner exponent stays nonnegative. G_t(X,Y) equals
  // G_{1-t}(Y,X), and conjugating by the pivot's pseudo-inverse square root
  // is only a continuous extension to singular operators when the other
  // argument enters through a nonnegative power.
  const ComplexMatrix& pivot = (t < 0.0) ? y : x;
  const ComplexMatrix& other = (t < 0.0) ? x : y;
  const double exponent = (t < 0.0) ? 1.0 - t : t;
  const ComplexMatrix ph = matrix_sqrt_psd(pivot);
  const ComplexMatrix pih = matrix_power_psd(pivot, -0.5);
  const ComplexMatrix mid = pih * other * pih;
  // Round off the conjugation noise so the eigensolver sees a Hermitian matrix.
  const ComplexMatrix mid_h = 0.5 * (mid + mid.adjoint());
  return ph * matrix_power_psd(mid_h, exponent) * ph;
}

double operator_norm(const ComplexMatrix& h) {
  require_square(h, "operator_norm");
  if (!is_hermitian(h)) {
    throw std::invalid_argument("operator_norm: input is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double trace_norm(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().sum();
}

double max_eigenvalue(const ComplexMatrix& h) {
  require_square(h, "max_eigenvalue");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace qi
