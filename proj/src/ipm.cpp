#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "conic_internal.hpp"

namespace qi {
namespace internal {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Row-major to match ComplexMatrix/RealMatrix, so conversions are no-ops.
template <typename Scalar>
using Mat =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Per-block data and state. Blocks with real data run in double arithmetic,
// complex blocks in complex arithmetic; the formulas are identical.

template <typename Scalar>
struct SparseEntry {
  int row;
  int col;
  Scalar coeff;
};

template <typename Scalar>
struct BlockCoeff {
  int param;
  std::vector<SparseEntry<Scalar>> entries;
};

template <typename Scalar>
struct Block {
  int dim = 0;
  int original = -1;  // index in the lowered block list
  bool embedded = false;
  Mat<Scalar> constant;
  std::vector<BlockCoeff<Scalar>> coeffs;

  Mat<Scalar> S, Z;           // cone iterates
  Mat<Scalar> E;              // primal residual S - C - F[x]
  Mat<Scalar> Ls, Lz;         // Cholesky factors of S and Z
  Mat<Scalar> R, Rinv, Winv;  // Nesterov-Todd scaling
  VectorXd lam;               // scaling spectrum
  Mat<Scalar> Rt;             // corrector complementarity target
  Mat<Scalar> dS, dZ, dSaff, dZaff;
};

template <typename Scalar>
void symmetrize(Mat<Scalar>* m) {
  *m = (Scalar(0.5) * (*m + m->adjoint())).eval();
}

// Projects an iterate of a real-embedded block back onto the image of the
// embedding ([[A, B], [-B, A]] structure). The projection averages the block
// with its conjugation by the rotation J = [[0, -I], [I, 0]]; both halves are
// feasible whenever the iterate is, and every pairing with embedded data
// matrices is unchanged, so residuals are preserved exactly while the
// unstructured roundoff component is removed.
void j_project(Mat<double>* m) {
  const int n = static_cast<int>(m->rows()) / 2;
  const Mat<double> a =
      0.5 * (m->topLeftCorner(n, n) + m->bottomRightCorner(n, n));
  const Mat<double> b =
      0.5 * (m->topRightCorner(n, n) - m->bottomLeftCorner(n, n));
  m->topLeftCorner(n, n) = a;
  m->bottomRightCorner(n, n) = a;
  m->topRightCorner(n, n) = b;
  m->bottomLeftCorner(n, n) = -b;
}

// Frobenius inner product; real for a Hermitian pair and equal to tr(a b).
template <typename Scalar>
double frob_inner(const Mat<Scalar>& a, const Mat<Scalar>& b) {
  return std::real(a.cwiseProduct(b.conjugate()).sum());
}

// tr(m f) for a sparse Hermitian coefficient f.
template <typename Scalar>
double sparse_dot(const Mat<Scalar>& m,
                  const std::vector<SparseEntry<Scalar>>& entries) {
  double out = 0.0;
  for (const auto& e : entries) out += std::real(m(e.col, e.row) * e.coeff);
  return out;
}

template <typename Scalar>
bool safe_cholesky(const Mat<Scalar>& m, Mat<Scalar>* lower) {
  Eigen::LLT<Mat<Scalar>> llt(m);
  if (llt.info() == Eigen::Success) {
    *lower = llt.matrixL();
    return true;
  }
  const int n = static_cast<int>(m.rows());
  double ridge = 1e-14 * std::max(1.0, std::real(m.trace()) / n);
  for (int attempt = 0; attempt < 6; ++attempt, ridge *= 100.0) {
    Eigen::LLT<Mat<Scalar>> retry(
        m + ridge * Mat<Scalar>::Identity(n, n));
    if (retry.info() == Eigen::Success) {
      *lower = retry.matrixL();
      return true;
    }
  }
  return false;
}

// E = S - C - F[x].
template <typename Scalar>
void block_residual(Block<Scalar>* b, const VectorXd& x) {
  b->E = b->S - b->constant;
  for (const auto& c : b->coeffs) {
    const double v = x(c.param);
    for (const auto& e : c.entries) b->E(e.row, e.col) -= e.coeff * v;
  }
}

// Nesterov-Todd scaling: with S = Ls Ls+, Z = Lz Lz+ and the SVD
// Lz+ Ls = U diag(lam) V+, set R = Ls V lam^-1/2 so that R+ Z R and
// R^-1 S R^-+ both equal diag(lam).
template <typename Scalar>
bool block_scaling(Block<Scalar>* b) {
  if (!safe_cholesky(b->S, &b->Ls)) return false;
  if (!safe_cholesky(b->Z, &b->Lz)) return false;
  const Mat<Scalar> prod = b->Lz.adjoint() * b->Ls;
  Eigen::JacobiSVD<Mat<Scalar>> svd(prod,
                                    Eigen::ComputeFullU | Eigen::ComputeFullV);
  b->lam = svd.singularValues();
  if (b->lam.minCoeff() <= 0.0) return false;
  const VectorXd sqrt_lam = b->lam.cwiseSqrt();
  b->R = b->Ls * svd.matrixV() * sqrt_lam.cwiseInverse().asDiagonal();
  const Mat<Scalar> ls_inv =
      b->Ls.template triangularView<Eigen::Lower>().solve(
          Mat<Scalar>::Identity(b->dim, b->dim));
  b->Rinv = sqrt_lam.asDiagonal() * svd.matrixV().adjoint() * ls_inv;
  b->Winv = b->Rinv.adjoint() * b->Rinv;
  symmetrize(&b->Winv);
  return true;
}

// H(p, q) += tr(Winv F_p Winv F_q) over the block's parameter pairs.
template <typename Scalar>
void block_hessian(const Block<Scalar>& b, MatrixXd* h) {
  const int np = static_cast<int>(b.coeffs.size());
  Mat<Scalar> y(b.dim, b.dim);
  for (int a = 0; a < np; ++a) {
    const auto& ca = b.coeffs[a];
    y.setZero();
    for (const auto& e : ca.entries) {
      y.noalias() += e.coeff * (b.Winv.col(e.row) * b.Winv.row(e.col));
    }
    for (int q = a; q < np; ++q) {
      const auto& cq = b.coeffs[q];
      const double v = sparse_dot(y, cq.entries);
      (*h)(ca.param, cq.param) += v;
      if (q != a) (*h)(cq.param, ca.param) += v;
    }
  }
}

// g_p += <Winv (Rt + E) Winv, F_p>.
template <typename Scalar>
void block_gradient(const Block<Scalar>& b, const Mat<Scalar>& rt,
                    VectorXd* g) {
  const Mat<Scalar> t = b.Winv * (rt + b.E) * b.Winv;
  for (const auto& c : b.coeffs) (*g)(c.param) += sparse_dot(t, c.entries);
}

// out_p += <Z, F_p>.
template <typename Scalar>
void block_dual_pairing(const Block<Scalar>& b, VectorXd* out) {
  for (const auto& c : b.coeffs) (*out)(c.param) += sparse_dot(b.Z, c.entries);
}

template <typename Scalar>
Mat<Scalar> block_affine_image(const Block<Scalar>& b, const VectorXd& dx) {
  Mat<Scalar> out = Mat<Scalar>::Zero(b.dim, b.dim);
  for (const auto& c : b.coeffs) {
    const double v = dx(c.param);
    for (const auto& e : c.entries) out(e.row, e.col) += e.coeff * v;
  }
  return out;
}

// dS = F[dx] - E, dZ = Winv (Rt - dS) Winv.
template <typename Scalar>
void block_direction(Block<Scalar>* b, const VectorXd& dx, const Mat<Scalar>& rt,
                     bool affine) {
  const Mat<Scalar> ds = block_affine_image(*b, dx) - b->E;
  Mat<Scalar> dz = b->Winv * (rt - ds) * b->Winv;
  symmetrize(&dz);
  if (affine) {
    b->dSaff = ds;
    b->dZaff = dz;
  } else {
    b->dS = ds;
    b->dZ = dz;
  }
}

// Largest step with chol(M) = L L+ keeping M + alpha dM in the cone.
template <typename Scalar>
double block_max_step(const Mat<Scalar>& lower, const Mat<Scalar>& dm) {
  Mat<Scalar> t =
      lower.template triangularView<Eigen::Lower>().solve(dm);
  Mat<Scalar> m =
      lower.template triangularView<Eigen::Lower>().solve(t.adjoint());
  symmetrize(&m);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(m, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return kInf;
  return -1.0 / lmin;
}

// Mehrotra corrector target: in the scaled space solve
// sym(lam Rt~) = sigma mu I - lam^2 - sym(dS~ dZ~), which is the entrywise
// division Rt~_ij = 2 rhs_ij / (lam_i + lam_j); then Rt = R Rt~ R+.
template <typename Scalar>
void block_corrector_target(Block<Scalar>* b, double sigma_mu) {
  const Mat<Scalar> ds_bar = b->Rinv * b->dSaff * b->Rinv.adjoint();
  const Mat<Scalar> dz_bar = b->R.adjoint() * b->dZaff * b->R;
  const Mat<Scalar> prod = ds_bar * dz_bar;
  Mat<Scalar> rhs = Scalar(-0.5) * (prod + prod.adjoint());
  for (int i = 0; i < b->dim; ++i) {
    rhs(i, i) += sigma_mu - b->lam(i) * b->lam(i);
  }
  for (int i = 0; i < b->dim; ++i) {
    for (int j = 0; j < b->dim; ++j) {
      rhs(i, j) *= 2.0 / (b->lam(i) + b->lam(j));
    }
  }
  b->Rt = b->R * rhs * b->R.adjoint();
  symmetrize(&b->Rt);
}

// ---------------------------------------------------------------------------
// Newton-system factorization: slack-group elimination followed by a dense
// Cholesky of the reduced core Hessian.

struct KktFactor {
  int nc = 0;
  int ns = 0;
  const std::vector<std::vector<int>>* groups = nullptr;
  std::vector<Eigen::LLT<MatrixXd>> group_llt;
  MatrixXd w;     // nc x ns; per group the columns equal Hcs_g L_g^-T
  MatrixXd heff;  // reduced core Hessian (lower triangle), for refinement
  Eigen::LLT<MatrixXd> core_llt;
  Eigen::LDLT<MatrixXd> core_ldlt;
  bool use_ldlt = false;

  // Consumes the assembled pieces. h_cs columns are indexed by slack offset.
  bool build(MatrixXd* h_cc, MatrixXd* h_cs, std::vector<MatrixXd>* h_ss,
             const std::vector<std::vector<int>>& group_list) {
    nc = static_cast<int>(h_cc->rows());
    ns = static_cast<int>(h_cs->cols());
    groups = &group_list;
    group_llt.clear();
    group_llt.reserve(group_list.size());
    w = std::move(*h_cs);
    for (size_t g = 0; g < group_list.size(); ++g) {
      MatrixXd& hg = (*h_ss)[g];
      const int m = static_cast<int>(hg.rows());
      Eigen::LLT<MatrixXd> llt(hg);
      if (llt.info() != Eigen::Success) {
        double ridge = 1e-12 * std::max(1.0, hg.trace() / m);
        bool ok = false;
        for (int attempt = 0; attempt < 5; ++attempt, ridge *= 100.0) {
          hg.diagonal().array() += ridge;
          llt.compute(hg);
          if (llt.info() == Eigen::Success) {
            ok = true;
            break;
          }
        }
        if (!ok) return false;
      }
      group_llt.push_back(llt);
      // Transform the nc x m slice: W_g = Hcs_g L^-T, done on the transpose.
      MatrixXd slice(m, nc);
      const auto& members = group_list[g];
      for (int k = 0; k < m; ++k) slice.row(k) = w.col(members[k] - nc);
      group_llt[g].matrixL().solveInPlace(slice);
      for (int k = 0; k < m; ++k) w.col(members[k] - nc) = slice.row(k);
    }
    if (ns > 0) {
      h_cc->selfadjointView<Eigen::Lower>().rankUpdate(w, -1.0);
    }
    // Factor the reduced core Hessian (lower triangle is authoritative).
    core_llt.compute(*h_cc);
    if (core_llt.info() != Eigen::Success) {
      double ridge =
          1e-12 * std::max(1.0, h_cc->diagonal().sum() / std::max(nc, 1));
      bool ok = false;
      for (int attempt = 0; attempt < 5; ++attempt, ridge *= 100.0) {
        h_cc->diagonal().array() += ridge;
        core_llt.compute(*h_cc);
        if (core_llt.info() == Eigen::Success) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        core_ldlt.compute(*h_cc);
        if (core_ldlt.info() != Eigen::Success) return false;
        use_ldlt = true;
      }
    }
    heff = std::move(*h_cc);
    return true;
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd rc = rhs.head(nc);
    VectorXd y = VectorXd::Zero(ns);
    for (size_t g = 0; g < groups->size(); ++g) {
      const auto& members = (*groups)[g];
      const int m = static_cast<int>(members.size());
      VectorXd yg(m);
      for (int k = 0; k < m; ++k) yg(k) = rhs(members[k]);
      group_llt[g].matrixL().solveInPlace(yg);
      for (int k = 0; k < m; ++k) {
        y(members[k] - nc) = yg(k);
        rc.noalias() -= w.col(members[k] - nc) * yg(k);
      }
    }
    VectorXd out(nc + ns);
    if (use_ldlt) {
      out.head(nc) = core_ldlt.solve(rc);
    } else {
      out.head(nc) = core_llt.solve(rc);
    }
    // One round of iterative refinement; the core system carries the cone
    // Hessian whose conditioning degrades as the iterates approach the
    // boundary, and a cheap correction buys a few digits of direction
    // accuracy there.
    {
      VectorXd resid = rc;
      resid.noalias() -= heff.selfadjointView<Eigen::Lower>() * out.head(nc);
      if (use_ldlt) {
        out.head(nc) += core_ldlt.solve(resid);
      } else {
        out.head(nc) += core_llt.solve(resid);
      }
    }
    for (size_t g = 0; g < groups->size(); ++g) {
      const auto& members = (*groups)[g];
      const int m = static_cast<int>(members.size());
      VectorXd vg(m);
      for (int k = 0; k < m; ++k) {
        const int col = members[k] - nc;
        vg(k) = y(col) - w.col(col).dot(out.head(nc));
      }
      group_llt[g].matrixU().solveInPlace(vg);
      for (int k = 0; k < m; ++k) out(members[k]) = vg(k);
    }
    return out;
  }
};

std::string format_metrics(double gap, double pres, double dres) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "gap %.2e, primal %.2e, dual %.2e", gap,
                pres, dres);
  return buf;
}

}  // namespace

SolveReport run_interior_point(const LoweredProgram& low,
                               const SolveOptions& opt) {
  SolveReport rep;
  const int np = low.num_params;
  const int nc = low.num_core;
  const int ns = np - nc;
  rep.parameters = VectorXd::Zero(np);
  if (np == 0) {
    rep.status = SolveStatus::kInaccurate;
    rep.message = "program has no parameters";
    return rep;
  }

  // Split the blocks into real and complex lists.
  std::vector<Block<double>> rblocks;
  std::vector<Block<Complex>> cblocks;
  // (is_real, index in its list) per lowered block
  std::vector<std::pair<bool, int>> block_loc;
  for (size_t j = 0; j < low.blocks.size(); ++j) {
    const PsdBlockData& data = low.blocks[j];
    bool real_data = data.constant.imag().cwiseAbs().maxCoeff() <= 1e-14;
    if (real_data) {
      for (const auto& c : data.coeffs) {
        for (const auto& e : c.entries) {
          if (std::abs(e.coeff.imag()) > 1e-14) {
            real_data = false;
            break;
          }
        }
        if (!real_data) break;
      }
    }
    if (real_data) {
      Block<double> b;
      b.dim = data.dim;
      b.original = static_cast<int>(j);
      b.embedded = data.embedded;
      b.constant = data.constant.real();
      for (const auto& c : data.coeffs) {
        BlockCoeff<double> bc;
        bc.param = c.param;
        for (const auto& e : c.entries) {
          bc.entries.push_back({e.row, e.col, e.coeff.real()});
        }
        b.coeffs.push_back(std::move(bc));
      }
      block_loc.push_back({true, static_cast<int>(rblocks.size())});
      rblocks.push_back(std::move(b));
    } else {
      Block<Complex> b;
      b.dim = data.dim;
      b.original = static_cast<int>(j);
      b.embedded = data.embedded;
      b.constant = data.constant;
      for (const auto& c : data.coeffs) {
        BlockCoeff<Complex> bc;
        bc.param = c.param;
        for (const auto& e : c.entries) {
          bc.entries.push_back({e.row, e.col, e.coeff});
        }
        b.coeffs.push_back(std::move(bc));
      }
      block_loc.push_back({false, static_cast<int>(cblocks.size())});
      cblocks.push_back(std::move(b));
    }
  }

  // Inequality rows: sparse rows first, dense rows after.
  const int n_sparse = static_cast<int>(low.sparse_rows.size());
  const int n_dense = low.dense_rows.size();
  const int nr = n_sparse + n_dense;
  VectorXd row_const(nr);
  for (int i = 0; i < n_sparse; ++i) row_const(i) = low.sparse_rows[i].constant;
  if (n_dense > 0) row_const.tail(n_dense) = low.dense_rows.constants;

  const int neq = static_cast<int>(low.eq_a.rows());
  const MatrixXd a_core = low.eq_a.leftCols(nc);

  double cone_size = nr;
  for (const auto& b : rblocks) cone_size += b.dim;
  for (const auto& b : cblocks) cone_size += b.dim;
  if (cone_size == 0.0) {
    rep.status = SolveStatus::kInaccurate;
    rep.message = "program has no conic constraints";
    return rep;
  }

  // Slack bookkeeping.
  std::vector<int> slack_group(ns, -1), slack_local(ns, -1);
  for (size_t g = 0; g < low.slack_groups.size(); ++g) {
    for (size_t k = 0; k < low.slack_groups[g].size(); ++k) {
      slack_group[low.slack_groups[g][k] - nc] = static_cast<int>(g);
      slack_local[low.slack_groups[g][k] - nc] = static_cast<int>(k);
    }
  }

  // Initial point: identity cone iterates scaled to the data.
  double data_scale = 1.0;
  for (const auto& b : rblocks) {
    data_scale = std::max(data_scale, b.constant.cwiseAbs().maxCoeff());
  }
  for (const auto& b : cblocks) {
    data_scale = std::max(data_scale, b.constant.cwiseAbs().maxCoeff());
  }
  if (nr > 0) {
    data_scale = std::max(data_scale, row_const.cwiseAbs().maxCoeff());
  }
  if (neq > 0) {
    data_scale = std::max(data_scale, low.eq_b.cwiseAbs().maxCoeff());
  }
  const double cost_scale =
      std::max(1.0, (np > 0) ? low.cost.cwiseAbs().maxCoeff() : 0.0);

  VectorXd x = VectorXd::Zero(np);
  VectorXd lam = VectorXd::Zero(neq);
  VectorXd wr = VectorXd::Constant(nr, data_scale);
  VectorXd zr = VectorXd::Constant(nr, cost_scale);
  for (auto& b : rblocks) {
    b.S = MatrixXd::Identity(b.dim, b.dim) * data_scale;
    b.Z = MatrixXd::Identity(b.dim, b.dim) * cost_scale;
  }
  for (auto& b : cblocks) {
    b.S = ComplexMatrix::Identity(b.dim, b.dim) * data_scale;
    b.Z = ComplexMatrix::Identity(b.dim, b.dim) * cost_scale;
  }

  // Row helpers.
  auto row_affine = [&](const VectorXd& v) {
    VectorXd out = row_const;
    for (int i = 0; i < n_sparse; ++i) {
      for (const auto& [p, c] : low.sparse_rows[i].terms) out(i) += c * v(p);
    }
    if (n_dense > 0) {
      out.tail(n_dense).noalias() += low.dense_rows.gradients * v.head(nc);
      for (int i = 0; i < n_dense; ++i) {
        for (const auto& [p, c] : low.dense_rows.slack_terms[i]) {
          out(n_sparse + i) += c * v(p);
        }
      }
    }
    return out;
  };
  auto row_linear = [&](const VectorXd& v) {
    // g_i . v without the constants
    VectorXd out = row_affine(v);
    out -= row_const;
    return out;
  };
  // out_p += sum_i weights_i g_{i,p}
  auto add_row_combination = [&](const VectorXd& weights, VectorXd* out) {
    for (int i = 0; i < n_sparse; ++i) {
      const double wi = weights(i);
      if (wi == 0.0) continue;
      for (const auto& [p, c] : low.sparse_rows[i].terms) (*out)(p) += wi * c;
    }
    if (n_dense > 0) {
      out->head(nc).noalias() +=
          low.dense_rows.gradients.transpose() * weights.tail(n_dense);
      for (int i = 0; i < n_dense; ++i) {
        const double wi = weights(n_sparse + i);
        if (wi == 0.0) continue;
        for (const auto& [p, c] : low.dense_rows.slack_terms[i]) {
          (*out)(p) += wi * c;
        }
      }
    }
  };

  const double accept_gap = std::max(1e-6, opt.gap_tolerance);
  const double accept_feas = std::max(1e-6, opt.feasibility_tolerance);

  double mu = 0.0, gap = 0.0, pres = 0.0, dres = 0.0;
  double pobj = 0.0, dobj = 0.0;
  bool status_set = false;
  int stall_count = 0, no_improve = 0, mu_floor = 0;
  double best_metric = kInf;
  VectorXd e_rows(nr), e_b(neq), e_c(np);

  // Iterates degrade once mu falls below what double-precision Newton steps
  // can support, so the best point seen is kept for the final report.
  struct Snapshot {
    bool valid = false;
    double metric = kInf;
    double gap = 0.0, pres = 0.0, dres = 0.0, pobj = 0.0, dobj = 0.0;
    VectorXd x;
    std::vector<Mat<double>> z_real;
    std::vector<Mat<Complex>> z_complex;
  } best;

  int iter = 0;
  for (;; ++iter) {
    // Residuals and merit quantities.
    for (auto& b : rblocks) block_residual(&b, x);
    for (auto& b : cblocks) block_residual(&b, x);
    const VectorXd row_vals = row_affine(x);
    e_rows = wr - row_vals;
    e_b = a_core * x.head(nc) - low.eq_b;
    VectorXd dual_pairing = VectorXd::Zero(np);
    for (const auto& b : rblocks) block_dual_pairing(b, &dual_pairing);
    for (const auto& b : cblocks) block_dual_pairing(b, &dual_pairing);
    add_row_combination(zr, &dual_pairing);
    e_c = low.cost - dual_pairing;
    if (neq > 0) e_c.head(nc).noalias() -= a_core.transpose() * lam;

    pobj = low.cost.dot(x);
    dobj = (neq > 0 ? low.eq_b.dot(lam) : 0.0) - row_const.dot(zr);
    for (const auto& b : rblocks) dobj -= frob_inner(b.constant, b.Z);
    for (const auto& b : cblocks) dobj -= frob_inner(b.constant, b.Z);

    double comp = wr.dot(zr);
    for (const auto& b : rblocks) comp += frob_inner(b.S, b.Z);
    for (const auto& b : cblocks) comp += frob_inner(b.S, b.Z);
    mu = comp / cone_size;

    gap = std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj),
                                                  std::abs(dobj)));
    pres = 0.0;
    for (const auto& b : rblocks) {
      pres = std::max(pres, b.E.cwiseAbs().maxCoeff());
    }
    for (const auto& b : cblocks) {
      pres = std::max(pres, b.E.cwiseAbs().maxCoeff());
    }
    if (nr > 0) pres = std::max(pres, e_rows.cwiseAbs().maxCoeff());
    if (neq > 0) pres = std::max(pres, e_b.cwiseAbs().maxCoeff());
    pres /= 1.0 + data_scale;
    dres = e_c.cwiseAbs().maxCoeff() / (1.0 + cost_scale);

    if (!std::isfinite(mu) || !std::isfinite(pres) || !std::isfinite(dres) ||
        !std::isfinite(pobj) || !std::isfinite(dobj)) {
      rep.status = SolveStatus::kInaccurate;
      rep.message = "numerical breakdown (non-finite iterate)";
      status_set = true;
      break;
    }

    if (opt.verbose) {
      std::fprintf(stderr,
                   "ipm %3d  mu %9.2e  pobj %+.9e  dobj %+.9e  gap %8.2e  "
                   "pres %8.2e  dres %8.2e\n",
                   iter, mu, pobj, dobj, gap, pres, dres);
    }

    const double metric = std::max({gap, pres, dres});
    // Snapshot merit mirrors the shape of the acceptance test, so the kept
    // iterate is the one closest to passing it.
    const double snap_merit = std::max(
        {gap / accept_gap, pres / accept_feas, dres / accept_feas});
    if (snap_merit < best.metric) {
      best.valid = true;
      best.metric = snap_merit;
      best.gap = gap;
      best.pres = pres;
      best.dres = dres;
      best.pobj = pobj;
      best.dobj = dobj;
      best.x = x;
      best.z_real.clear();
      best.z_complex.clear();
      for (const auto& b : rblocks) best.z_real.push_back(b.Z);
      for (const auto& b : cblocks) best.z_complex.push_back(b.Z);
    }

    if (gap <= opt.gap_tolerance && pres <= opt.feasibility_tolerance &&
        dres <= opt.feasibility_tolerance) {
      rep.status = SolveStatus::kOptimal;
      rep.message = "optimal";
      status_set = true;
      break;
    }

    // Primal-infeasibility certificate: a dual improving ray. The current
    // duals prove infeasibility when they are (nearly) homogeneous-feasible
    // with positive dual objective.
    if (dobj > 0.0) {
      const double hom = (low.cost - e_c).cwiseAbs().maxCoeff();
      if (hom <= 1e-9 * dobj) {
        rep.status = SolveStatus::kInfeasible;
        rep.message = "primal infeasible (dual improving ray)";
        status_set = true;
        break;
      }
    }
    // Unboundedness certificate: the primal iterate is a (nearly)
    // homogeneous-feasible improving ray.
    const double xnorm = x.cwiseAbs().maxCoeff();
    if (xnorm > 1e7) {
      const double ray_tol = 1e-8 * xnorm;
      bool ray = pobj <= -ray_tol;
      if (ray && neq > 0) {
        ray = (a_core * x.head(nc)).cwiseAbs().maxCoeff() <= ray_tol;
      }
      if (ray && nr > 0) ray = row_linear(x).minCoeff() >= -ray_tol;
      if (ray) {
        for (const auto& b : rblocks) {
          Eigen::SelfAdjointEigenSolver<MatrixXd> es(
              block_affine_image(b, x), Eigen::EigenvaluesOnly);
          if (es.eigenvalues().minCoeff() < -ray_tol) {
            ray = false;
            break;
          }
        }
      }
      if (ray) {
        for (const auto& b : cblocks) {
          Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(
              block_affine_image(b, x), Eigen::EigenvaluesOnly);
          if (es.eigenvalues().minCoeff() < -ray_tol) {
            ray = false;
            break;
          }
        }
      }
      if (ray) {
        rep.status = SolveStatus::kUnbounded;
        rep.message = "unbounded (primal improving ray)";
        status_set = true;
        break;
      }
    }

    if (metric < 0.9 * best_metric) {
      best_metric = metric;
      no_improve = 0;
    } else {
      ++no_improve;
    }
    // Once complementarity sits far below the feasibility-limited accuracy,
    // further centering steps only amplify roundoff in the dual updates.
    const double mu_rel =
        mu * cone_size / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
    if (metric <= 1e-3 && mu_rel < 1e-2 * metric) {
      ++mu_floor;
    } else {
      mu_floor = 0;
    }
    if (iter >= opt.max_iterations || stall_count >= 3 || no_improve >= 15 ||
        mu_floor >= 2) {
      break;
    }

    // Scalings.
    bool scaling_ok = true;
    for (auto& b : rblocks) scaling_ok = scaling_ok && block_scaling(&b);
    for (auto& b : cblocks) scaling_ok = scaling_ok && block_scaling(&b);
    if (!scaling_ok) {
      rep.status = SolveStatus::kInaccurate;
      rep.message = "numerical breakdown (cone scaling failed)";
      status_set = true;
      break;
    }
    const VectorXd row_scale = zr.cwiseQuotient(wr);

    // Assemble the Hessian pieces.
    MatrixXd h_cc = MatrixXd::Zero(nc, nc);
    MatrixXd h_cs = MatrixXd::Zero(nc, ns);
    std::vector<MatrixXd> h_ss;
    h_ss.reserve(low.slack_groups.size());
    for (const auto& group : low.slack_groups) {
      h_ss.push_back(MatrixXd::Zero(static_cast<int>(group.size()),
                                    static_cast<int>(group.size())));
    }
    if (n_dense > 0) {
      MatrixXd scaled = low.dense_rows.gradients;
      for (int i = 0; i < n_dense; ++i) {
        scaled.row(i) *= std::sqrt(row_scale(n_sparse + i));
      }
      h_cc.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
      for (int i = 0; i < nc; ++i) {
        for (int j = i + 1; j < nc; ++j) h_cc(i, j) = h_cc(j, i);
      }
      for (int i = 0; i < n_dense; ++i) {
        const auto& tail = low.dense_rows.slack_terms[i];
        if (tail.empty()) continue;
        const double s = row_scale(n_sparse + i);
        for (const auto& [p, c] : tail) {
          h_cs.col(p - nc).noalias() +=
              (s * c) * low.dense_rows.gradients.row(i).transpose();
          for (const auto& [q, cq] : tail) {
            if (q < p) continue;
            const int g = slack_group[p - nc];
            const double v = s * c * cq;
            h_ss[g](slack_local[p - nc], slack_local[q - nc]) += v;
            if (q != p) h_ss[g](slack_local[q - nc], slack_local[p - nc]) += v;
          }
        }
      }
    }
    for (int i = 0; i < n_sparse; ++i) {
      const double s = row_scale(i);
      const auto& terms = low.sparse_rows[i].terms;
      for (size_t a = 0; a < terms.size(); ++a) {
        const auto& [pa, ca] = terms[a];
        for (size_t q = a; q < terms.size(); ++q) {
          const auto& [pq, cq] = terms[q];
          const double v = s * ca * cq;
          if (pq < nc) {
            h_cc(pa, pq) += v;
            if (pq != pa) h_cc(pq, pa) += v;
          } else if (pa < nc) {
            h_cs(pa, pq - nc) += v;
          } else {
            const int g = slack_group[pa - nc];
            h_ss[g](slack_local[pa - nc], slack_local[pq - nc]) += v;
            if (pq != pa) {
              h_ss[g](slack_local[pq - nc], slack_local[pa - nc]) += v;
            }
          }
        }
      }
    }
    for (const auto& b : rblocks) block_hessian(b, &h_cc);
    for (const auto& b : cblocks) block_hessian(b, &h_cc);

    KktFactor kkt;
    if (!kkt.build(&h_cc, &h_cs, &h_ss, low.slack_groups)) {
      rep.status = SolveStatus::kInaccurate;
      rep.message = "numerical breakdown (Newton factorization failed)";
      status_set = true;
      break;
    }

    // Equality elimination data: V = H^-1 A^T and K = A H^-1 A^T.
    MatrixXd v_eq(np, neq);
    Eigen::LDLT<MatrixXd> k_ldlt;
    if (neq > 0) {
      VectorXd col = VectorXd::Zero(np);
      for (int r = 0; r < neq; ++r) {
        col.setZero();
        col.head(nc) = a_core.row(r).transpose();
        v_eq.col(r) = kkt.solve(col);
      }
      MatrixXd k = a_core * v_eq.topRows(nc);
      k_ldlt.compute(0.5 * (k + k.transpose()));
      if (k_ldlt.info() != Eigen::Success) {
        rep.status = SolveStatus::kInaccurate;
        rep.message = "numerical breakdown (equality system factorization)";
        status_set = true;
        break;
      }
    }
    auto solve_direction = [&](const VectorXd& rhs1, VectorXd* dx,
                               VectorXd* dlam) {
      VectorXd u = kkt.solve(rhs1);
      if (neq > 0) {
        const VectorXd rhs_l = -e_b - a_core * u.head(nc);
        *dlam = k_ldlt.solve(rhs_l);
        *dx = u + v_eq * (*dlam);
      } else {
        dlam->resize(0);
        *dx = std::move(u);
      }
    };

    // Predictor (affine scaling) direction: target complementarity zero.
    VectorXd g = VectorXd::Zero(np);
    for (const auto& b : rblocks) block_gradient(b, Mat<double>(-b.S), &g);
    for (const auto& b : cblocks) block_gradient(b, Mat<Complex>(-b.S), &g);
    {
      const VectorXd weights = row_scale.cwiseProduct(-wr + e_rows);
      add_row_combination(weights, &g);
    }
    VectorXd dx_aff, dlam_aff;
    solve_direction(g - e_c, &dx_aff, &dlam_aff);
    for (auto& b : rblocks) {
      block_direction(&b, dx_aff, Mat<double>(-b.S), true);
    }
    for (auto& b : cblocks) {
      block_direction(&b, dx_aff, Mat<Complex>(-b.S), true);
    }
    const VectorXd dw_aff = row_linear(dx_aff) - e_rows;
    const VectorXd dz_aff = row_scale.cwiseProduct(-wr - dw_aff);

    double ap = kInf, ad = kInf;
    for (const auto& b : rblocks) {
      ap = std::min(ap, block_max_step(b.Ls, b.dSaff));
      ad = std::min(ad, block_max_step(b.Lz, b.dZaff));
    }
    for (const auto& b : cblocks) {
      ap = std::min(ap, block_max_step(b.Ls, b.dSaff));
      ad = std::min(ad, block_max_step(b.Lz, b.dZaff));
    }
    for (int i = 0; i < nr; ++i) {
      if (dw_aff(i) < 0.0) ap = std::min(ap, -wr(i) / dw_aff(i));
      if (dz_aff(i) < 0.0) ad = std::min(ad, -zr(i) / dz_aff(i));
    }
    const double ap_aff = std::min(1.0, ap);
    const double ad_aff = std::min(1.0, ad);

    double comp_aff = (wr + ap_aff * dw_aff).dot(zr + ad_aff * dz_aff);
    for (const auto& b : rblocks) {
      comp_aff += frob_inner(b.S, b.Z) + ad_aff * frob_inner(b.S, b.dZaff) +
                  ap_aff * frob_inner(b.dSaff, b.Z) +
                  ap_aff * ad_aff * frob_inner(b.dSaff, b.dZaff);
    }
    for (const auto& b : cblocks) {
      comp_aff += frob_inner(b.S, b.Z) + ad_aff * frob_inner(b.S, b.dZaff) +
                  ap_aff * frob_inner(b.dSaff, b.Z) +
                  ap_aff * ad_aff * frob_inner(b.dSaff, b.dZaff);
    }
    const double mu_aff = std::max(comp_aff, 0.0) / cone_size;
    double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
    // Keep complementarity tracking the feasibility-limited accuracy: once
    // mu undercuts the residual level, smaller targets only worsen the
    // conditioning of the scaled system, so lean on centering instead.
    if (mu_rel > 0.0) {
      sigma = std::max(sigma, 1e-2 * metric / mu_rel);
    }
    sigma = std::min(1.0, std::max(0.0, sigma));
    const double sigma_mu = sigma * mu;

    // Corrector direction.
    for (auto& b : rblocks) block_corrector_target(&b, sigma_mu);
    for (auto& b : cblocks) block_corrector_target(&b, sigma_mu);
    const VectorXd rt_rows =
        (VectorXd::Constant(nr, sigma_mu) - wr.cwiseProduct(zr) -
         dw_aff.cwiseProduct(dz_aff))
            .cwiseQuotient(zr);
    g.setZero();
    for (const auto& b : rblocks) block_gradient(b, b.Rt, &g);
    for (const auto& b : cblocks) block_gradient(b, b.Rt, &g);
    add_row_combination(row_scale.cwiseProduct(rt_rows + e_rows), &g);
    VectorXd dx, dlam;
    solve_direction(g - e_c, &dx, &dlam);
    for (auto& b : rblocks) block_direction(&b, dx, b.Rt, false);
    for (auto& b : cblocks) block_direction(&b, dx, b.Rt, false);
    const VectorXd dw = row_linear(dx) - e_rows;
    const VectorXd dz = row_scale.cwiseProduct(rt_rows - dw);

    ap = kInf;
    ad = kInf;
    for (const auto& b : rblocks) {
      ap = std::min(ap, block_max_step(b.Ls, b.dS));
      ad = std::min(ad, block_max_step(b.Lz, b.dZ));
    }
    for (const auto& b : cblocks) {
      ap = std::min(ap, block_max_step(b.Ls, b.dS));
      ad = std::min(ad, block_max_step(b.Lz, b.dZ));
    }
    for (int i = 0; i < nr; ++i) {
      if (dw(i) < 0.0) ap = std::min(ap, -wr(i) / dw(i));
      if (dz(i) < 0.0) ad = std::min(ad, -zr(i) / dz(i));
    }
    const double step_p = std::min(1.0, 0.99 * ap);
    const double step_d = std::min(1.0, 0.99 * ad);
    if (std::min(step_p, step_d) < 1e-3) {
      ++stall_count;
    } else {
      stall_count = 0;
    }

    x += step_p * dx;
    wr += step_p * dw;
    if (neq > 0) lam += step_d * dlam;
    zr += step_d * dz;
    for (auto& b : rblocks) {
      b.S += step_p * b.dS;
      b.Z += step_d * b.dZ;
      symmetrize(&b.S);
      symmetrize(&b.Z);
      if (b.embedded) {
        j_project(&b.S);
        j_project(&b.Z);
      }
    }
    for (auto& b : cblocks) {
      b.S += step_p * b.dS;
      b.Z += step_d * b.dZ;
      symmetrize(&b.S);
      symmetrize(&b.Z);
    }
  }

  // Fall back to the best iterate unless the run ended with a definite
  // optimality or certificate status on the current one.
  const bool definitive = status_set && rep.status != SolveStatus::kInaccurate;
  double current_metric = kInf;
  if (std::isfinite(gap) && std::isfinite(pres) && std::isfinite(dres)) {
    current_metric = std::max(
        {gap / accept_gap, pres / accept_feas, dres / accept_feas});
  }
  if (!definitive && best.valid && best.metric < current_metric) {
    gap = best.gap;
    pres = best.pres;
    dres = best.dres;
    pobj = best.pobj;
    dobj = best.dobj;
    x = best.x;
    for (size_t j = 0; j < rblocks.size(); ++j) rblocks[j].Z = best.z_real[j];
    for (size_t j = 0; j < cblocks.size(); ++j) {
      cblocks[j].Z = best.z_complex[j];
    }
    status_set = false;
  }

  // Classification when the loop ended without a definite status.
  if (!status_set) {
    if (gap <= accept_gap && pres <= accept_feas && dres <= accept_feas) {
      rep.status = SolveStatus::kOptimal;
      rep.message = "optimal (reduced precision, " +
                    format_metrics(gap, pres, dres) + ")";
    } else {
      rep.status = SolveStatus::kInaccurate;
      rep.message = "no convergence (" + format_metrics(gap, pres, dres) + ")";
    }
  }

  rep.iterations = iter;
  rep.gap = gap;
  rep.primal_residual = pres;
  rep.dual_residual = dres;
  rep.parameters = x;
  if (rep.status == SolveStatus::kOptimal) {
    rep.objective = low.maximize ? (low.cost_constant - pobj)
                                 : (low.cost_constant + pobj);
  } else {
    rep.objective = std::numeric_limits<double>::quiet_NaN();
  }
  rep.block_duals.resize(low.blocks.size());
  rep.block_embedded.resize(low.blocks.size());
  for (const auto& b : rblocks) {
    rep.block_duals[b.original] = b.Z.cast<Complex>();
    rep.block_embedded[b.original] = b.embedded;
  }
  for (const auto& b : cblocks) {
    rep.block_duals[b.original] = b.Z;
    rep.block_embedded[b.original] = b.embedded;
  }
  return rep;
}

}  // namespace internal
}  // namespace qi
