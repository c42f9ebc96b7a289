#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qi/linalg.hpp"

namespace qi {

/// Symmetry domain of a conic-program variable. Real domains restrict the
/// feasible set; declaring them is valid whenever every constant in the
/// program is real, because conjugating a feasible point then yields another
/// feasible point with the same objective and the optimum can be taken real.
enum class VarDomain {
  kHermitian,      // n x n complex Hermitian, n^2 real parameters
  kRealSymmetric,  // n x n real symmetric, n(n+1)/2 parameters
  kGeneralLinear,  // r x c complex, 2 r c real parameters
  kRealGeneral,    // r x c real, r c parameters
  kRealScalar,     // single real parameter
};

struct VarId {
  int index = -1;
};

namespace conic_detail {
struct Term {
  int param = -1;  // real parameter index; -1 marks a pure constant entry
  int row = 0;
  int col = 0;
  Complex coeff;
};
struct ExprFactory;  // internal constructor access for the lowering pass
struct LoweringAccess;  // internal lowering entry points
}  // namespace conic_detail

/// Affine matrix-valued expression in the real parameters of a program:
/// constant matrix plus a sparse list of (parameter, position, coefficient)
/// terms. All transformations below are exact linear maps on the terms.
class MatExpr {
 public:
  MatExpr() = default;
  explicit MatExpr(ComplexMatrix constant);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  MatExpr operator+(const MatExpr& other) const;
  MatExpr operator-(const MatExpr& other) const;
  MatExpr operator-() const;
  MatExpr scaled(Complex factor) const;
  MatExpr adjoint() const;

  const ComplexMatrix& constant() const { return constant_; }
  const std::vector<conic_detail::Term>& terms() const { return terms_; }

  /// Evaluates the expression at a full parameter vector.
  ComplexMatrix evaluate(const Eigen::VectorXd& params) const;

 private:
  friend class ConicProgram;
  friend struct conic_detail::ExprFactory;
  friend MatExpr kron(const ComplexMatrix&, const MatExpr&);
  friend MatExpr kron(const MatExpr&, const ComplexMatrix&);
  friend MatExpr congruence(const ComplexMatrix&, const MatExpr&,
                            const ComplexMatrix&);
  friend MatExpr partial_trace(const MatExpr&, const std::vector<int>&,
                               const std::vector<bool>&);
  friend MatExpr partial_transpose(const MatExpr&, const std::vector<int>&,
                                   const std::vector<bool>&);
  friend MatExpr block_matrix(const std::vector<std::vector<MatExpr>>&);

  MatExpr(int rows, int cols);

  int rows_ = 0;
  int cols_ = 0;
  ComplexMatrix constant_;
  std::vector<conic_detail::Term> terms_;
};

MatExpr operator*(double factor, const MatExpr& expr);

/// Affine real-valued expression; coefficients are validated to be real
/// (within roundoff) when the program is lowered.
class ScalarExpr {
 public:
  ScalarExpr() = default;
  explicit ScalarExpr(double constant);

  ScalarExpr operator+(const ScalarExpr& other) const;
  ScalarExpr operator-(const ScalarExpr& other) const;
  ScalarExpr operator-() const;
  ScalarExpr scaled(Complex factor) const;

  Complex constant() const { return constant_; }
  const std::vector<std::pair<int, Complex>>& terms() const { return terms_; }

  double evaluate(const Eigen::VectorXd& params) const;

 private:
  friend class ConicProgram;
  friend struct conic_detail::ExprFactory;
  friend ScalarExpr trace(const MatExpr&);
  friend ScalarExpr trace_product(const ComplexMatrix&, const MatExpr&);

  Complex constant_{0.0, 0.0};
  std::vector<std::pair<int, Complex>> terms_;
};

ScalarExpr operator*(double factor, const ScalarExpr& expr);

/// Kronecker products with a fixed matrix on either side.
MatExpr kron(const ComplexMatrix& left, const MatExpr& right);
MatExpr kron(const MatExpr& left, const ComplexMatrix& right);

/// left * expr * right with fixed outer factors.
MatExpr congruence(const ComplexMatrix& left, const MatExpr& expr,
                   const ComplexMatrix& right);

/// Same subsystem conventions as the linalg overloads: dims lists the local
/// dimensions and the boolean mask selects which subsystems are kept
/// (partial_trace) or transposed (partial_transpose).
MatExpr partial_trace(const MatExpr& expr, const std::vector<int>& dims,
                      const std::vector<bool>& keep);
MatExpr partial_transpose(const MatExpr& expr, const std::vector<int>& dims,
                          const std::vector<bool>& transposed);

/// Assembles a block matrix from a rectangular grid of expressions.
MatExpr block_matrix(const std::vector<std::vector<MatExpr>>& blocks);

ScalarExpr trace(const MatExpr& expr);

/// tr(fixed * expr) as a scalar expression.
ScalarExpr trace_product(const ComplexMatrix& fixed, const MatExpr& expr);

/// kOptimal is returned when the requested tolerances were met, or when the
/// best iterate still lands within a fixed acceptance floor of 1e-6 on the
/// gap and residuals; the report always carries the achieved values.
enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kInaccurate };

struct SolveOptions {
  double gap_tolerance = 1e-8;          // relative duality gap target
  double feasibility_tolerance = 1e-8;  // scaled primal/dual residual target
  int max_iterations = 100;
  /// Lower complex Hermitian blocks to real symmetric blocks of twice the
  /// size via [[Re, -Im], [Im, Re]]. Off by default; the solver handles
  /// Hermitian blocks natively. Kept as a tested alternate path.
  bool force_real_embedding = false;
  bool verbose = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kInaccurate;
  double objective = 0.0;  // in the requested sense, constants included
  double gap = 0.0;        // relative duality gap at exit
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  Eigen::VectorXd parameters;  // full parameter vector (eliminated vars filled)
  /// Dual multipliers of the PSD blocks in lowering order. Blocks lowered via
  /// the real embedding are reported raw (2n x 2n, real entries).
  std::vector<ComplexMatrix> block_duals;
  std::vector<bool> block_embedded;
  std::string message;
};

/// Conic modeling layer: named matrix variables, PSD blocks assembled from
/// affine expressions, equality and entrywise-inequality constraints, and an
/// affine objective. Variables enter constraints only through their real
/// parameters, so every lowered coefficient matrix is Hermitian.
class ConicProgram {
 public:
  VarId add_variable(const std::string& name, VarDomain domain, int rows,
                     int cols = 0);

  /// Expression view of a matrix variable (1 x 1 for kRealScalar).
  MatExpr var(VarId id) const;
  /// Scalar expression view of a kRealScalar variable.
  ScalarExpr scalar(VarId id) const;

  void add_psd(const MatExpr& expr);
  void add_nonneg(const ScalarExpr& expr);
  /// Entrywise nonnegativity; every entry must be real-valued.
  void add_entrywise_nonneg(const MatExpr& expr);
  void add_equality(const ScalarExpr& lhs, const ScalarExpr& rhs);
  /// Defines var := rhs and eliminates the variable before lowering.
  /// rhs must not reference var, and may reference other defined variables
  /// only when those were created earlier than var.
  void add_defining_equality(VarId var, const MatExpr& rhs);
  /// Marks a variable's parameters for block elimination in the Newton
  /// system. Eliminable parameters may appear only in scalar inequality
  /// rows (and the objective), not in PSD blocks or equalities.
  void mark_eliminable(VarId var);

  void minimize(const ScalarExpr& objective);
  void maximize(const ScalarExpr& objective);

  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_parameters() const { return num_params_; }
  const std::string& variable_name(VarId id) const;

  /// Reconstructs a variable's matrix value from a solve report.
  ComplexMatrix value(VarId id, const SolveReport& report) const;
  double scalar_value(VarId id, const SolveReport& report) const;

 private:
  friend SolveReport solve(const ConicProgram&, const SolveOptions&);
  friend void dump_lowered(const ConicProgram&, const SolveOptions&,
                           const std::string&);
  friend struct conic_detail::LoweringAccess;

  struct VarRecord {
    std::string name;
    VarDomain domain;
    int rows = 0;
    int cols = 0;
    int first_param = 0;
    int num_params = 0;
    bool eliminable = false;
    bool defined = false;  // eliminated via a defining equality
    MatExpr definition;
  };

  const VarRecord& record(VarId id) const;

  std::vector<VarRecord> vars_;
  int num_params_ = 0;
  std::vector<MatExpr> psd_;
  std::vector<ScalarExpr> nonneg_;
  std::vector<ScalarExpr> equalities_;  // expr == 0
  ScalarExpr objective_;
  bool maximize_ = false;
  bool has_objective_ = false;
};

struct GeomeanOptions {
  /// Relative eigenvalue cutoff deciding the numerical rank of X.
  double rank_tolerance = 1e-9;
  /// Shrink the chain blocks onto range(X) when X is rank-deficient.
  bool allow_reduction = true;
  /// Optional strict-feasibility mixing: replaces X by X + mixing * I.
  /// Alternative to the reduction for keeping fixed data off the boundary.
  double mixing = 0.0;
  /// Declare the chain matrices real symmetric instead of Hermitian. Valid
  /// whenever X, Y and every other constant in the program are real.
  bool real_symmetric = false;
};

struct GeomeanEpigraph {
  /// Full-size affine expression for the epigraph head M. On the reduced
  /// path M = V M~ V+ with M~ supported on range(X); this head is optimal
  /// only for uses monotone in M (minimizing tr M, or bounding tr_B M from
  /// above), which covers every program in this library.
  MatExpr head;
  int psd_blocks = 0;
  int reduced_rank = 0;  // equals dim(X) when no reduction happened
};

/// Appends the dyadic epigraph of the weighted matrix geometric mean:
/// constraints equivalent to M >= G_{1-alpha}(X, Y) with alpha = 1 + 2^-level.
/// X is fixed PSD data; Y is an affine expression (fixed or variable). Emits
/// level+1 PSD blocks; the trailing chain matrix is identified with Y
/// directly instead of adding an equality.
GeomeanEpigraph add_geomean_epigraph(ConicProgram& prog, const ComplexMatrix& x,
                                     const MatExpr& y, int level,
                                     const GeomeanOptions& options = {});

SolveReport solve(const ConicProgram& prog, const SolveOptions& options = {});

/// Writes the lowered problem data (parameters, blocks, rows, equalities,
/// objective) as a plain-text sparse-triplet listing for offline debugging.
void dump_lowered(const ConicProgram& prog, const SolveOptions& options,
                  const std::string& path);

/// [[Re M, -Im M], [Im M, Re M]] real embedding of a Hermitian matrix.
Eigen::MatrixXd embed_hermitian(const ComplexMatrix& m);

/// Inverse of embed_hermitian on structured matrices: averages the two real
/// copies, (M11 + M22)/2 + i (M21 - M12)/2. Dual multipliers of embedded
/// blocks carry twice the native weight (traces double under embedding), so
/// the native dual is 2 * hermitian_from_embedded(dual).
ComplexMatrix hermitian_from_embedded(const Eigen::MatrixXd& m);

/// Deviation of a 2n x 2n matrix from the embedding structure:
/// max(max|M11 - M22|, max|M12 + M21|).
double embedding_asymmetry(const Eigen::MatrixXd& m);

}  // namespace qi
