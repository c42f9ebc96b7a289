#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qi/conic.hpp"
#include "qi/linalg.hpp"

namespace qi {
namespace conic_detail {

// Internal constructor access used by the lowering pass to rebuild
// expressions after parameter substitution.
struct ExprFactory {
  static MatExpr make(ComplexMatrix constant, std::vector<Term> terms) {
    MatExpr expr(std::move(constant));
    expr.terms_ = std::move(terms);
    return expr;
  }
  static ScalarExpr make_scalar(Complex constant,
                                std::vector<std::pair<int, Complex>> terms) {
    ScalarExpr expr;
    expr.constant_ = constant;
    expr.terms_ = std::move(terms);
    return expr;
  }
};

}  // namespace conic_detail

namespace internal {

// One Hermitian coefficient matrix of a PSD block, stored as its full sparse
// pattern (mirror entries included).
struct BlockCoefficient {
  int param = -1;
  std::vector<conic_detail::Term> entries;  // param field unused here
};

struct PsdBlockData {
  int dim = 0;
  ComplexMatrix constant;
  std::vector<BlockCoefficient> coeffs;  // sorted by param
  bool embedded = false;
};

// Scalar inequality row constant + g . x >= 0 with a sparse gradient.
struct SparseRow {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;
};

// Rows whose gradient over the core parameters is dense. Kept as a matrix so
// per-iteration work runs through GEMM/SYRK. slack_terms holds the sparse
// tail over eliminated (slack) parameters.
struct DenseRowSet {
  Eigen::VectorXd constants;
  Eigen::MatrixXd gradients;  // num_rows x num_core
  std::vector<std::vector<std::pair<int, double>>> slack_terms;

  int size() const { return static_cast<int>(constants.size()); }
};

struct LoweredProgram {
  int num_params = 0;  // core parameters first, slack parameters after
  int num_core = 0;
  std::vector<PsdBlockData> blocks;
  std::vector<SparseRow> sparse_rows;
  DenseRowSet dense_rows;
  Eigen::MatrixXd eq_a;  // num_eq x num_params, zero on slack columns
  Eigen::VectorXd eq_b;
  Eigen::VectorXd cost;  // minimization sense
  double cost_constant = 0.0;
  bool maximize = false;
  // Disjoint groups of slack parameters; within a group, rows may couple the
  // parameters to each other and to core parameters, but no row touches two
  // different groups.
  std::vector<std::vector<int>> slack_groups;
};

SolveReport run_interior_point(const LoweredProgram& prog,
                               const SolveOptions& options);

}  // namespace internal
}  // namespace qi
