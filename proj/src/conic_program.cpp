#include "qi/conic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "conic_internal.hpp"

namespace qi {

namespace {

constexpr double kHermitizeTol = 1e-10;
constexpr double kRealTol = 1e-10;
constexpr double kDropTol = 1e-15;
constexpr int kDenseRowThreshold = 48;
constexpr int kMaxSlackGroup = 2048;

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument("conic: " + message);
}

double real_or_throw(Complex z, const std::string& what) {
  require(std::abs(z.imag()) <= kRealTol * (1.0 + std::abs(z)),
          what + " has a non-real coefficient");
  return z.real();
}

// Per-parameter coefficient sums of a scalar expression. Individual terms of
// a Hermitian pairing carry conjugate imaginary parts, so realness holds for
// the sums, not for the terms.
std::map<int, double> real_term_sums(
    const std::vector<std::pair<int, Complex>>& terms,
    const std::string& what) {
  std::map<int, Complex> acc;
  for (const auto& [param, coeff] : terms) acc[param] += coeff;
  std::map<int, double> out;
  for (const auto& [param, sum] : acc) {
    const double w = real_or_throw(sum, what);
    if (w != 0.0) out[param] = w;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// MatExpr

MatExpr::MatExpr(ComplexMatrix constant)
    : rows_(static_cast<int>(constant.rows())),
      cols_(static_cast<int>(constant.cols())),
      constant_(std::move(constant)) {}

MatExpr::MatExpr(int rows, int cols)
    : rows_(rows), cols_(cols), constant_(ComplexMatrix::Zero(rows, cols)) {}

MatExpr MatExpr::operator+(const MatExpr& other) const {
  require(rows_ == other.rows_ && cols_ == other.cols_,
          "shape mismatch in expression sum");
  MatExpr out(*this);
  out.constant_ += other.constant_;
  out.terms_.insert(out.terms_.end(), other.terms_.begin(),
                    other.terms_.end());
  return out;
}

MatExpr MatExpr::operator-(const MatExpr& other) const {
  return *this + other.scaled(Complex(-1.0, 0.0));
}

MatExpr MatExpr::operator-() const { return scaled(Complex(-1.0, 0.0)); }

MatExpr MatExpr::scaled(Complex factor) const {
  MatExpr out(*this);
  out.constant_ *= factor;
  for (auto& term : out.terms_) term.coeff *= factor;
  return out;
}

MatExpr MatExpr::adjoint() const {
  MatExpr out(cols_, rows_);
  out.constant_ = ComplexMatrix(constant_.adjoint());
  out.terms_.reserve(terms_.size());
  for (const auto& term : terms_) {
    out.terms_.push_back(
        {term.param, term.col, term.row, std::conj(term.coeff)});
  }
  return out;
}

ComplexMatrix MatExpr::evaluate(const Eigen::VectorXd& params) const {
  ComplexMatrix out = constant_;
  for (const auto& term : terms_) {
    out(term.row, term.col) += term.coeff * params(term.param);
  }
  return out;
}

MatExpr operator*(double factor, const MatExpr& expr) {
  return expr.scaled(Complex(factor, 0.0));
}

// ---------------------------------------------------------------------------
// ScalarExpr

ScalarExpr::ScalarExpr(double constant) : constant_(constant, 0.0) {}

ScalarExpr ScalarExpr::operator+(const ScalarExpr& other) const {
  ScalarExpr out(*this);
  out.constant_ += other.constant_;
  out.terms_.insert(out.terms_.end(), other.terms_.begin(),
                    other.terms_.end());
  return out;
}

ScalarExpr ScalarExpr::operator-(const ScalarExpr& other) const {
  return *this + other.scaled(Complex(-1.0, 0.0));
}

ScalarExpr ScalarExpr::operator-() const {
  return scaled(Complex(-1.0, 0.0));
}

ScalarExpr ScalarExpr::scaled(Complex factor) const {
  ScalarExpr out(*this);
  out.constant_ *= factor;
  for (auto& term : out.terms_) term.second *= factor;
  return out;
}

double ScalarExpr::evaluate(const Eigen::VectorXd& params) const {
  Complex value = constant_;
  for (const auto& [param, coeff] : terms_) value += coeff * params(param);
  return value.real();
}

ScalarExpr operator*(double factor, const ScalarExpr& expr) {
  return expr.scaled(Complex(factor, 0.0));
}

// ---------------------------------------------------------------------------
// Expression transforms

MatExpr kron(const ComplexMatrix& left, const MatExpr& right) {
  const int lr = static_cast<int>(left.rows());
  const int lc = static_cast<int>(left.cols());
  MatExpr out(lr * right.rows(), lc * right.cols());
  out.constant_ = qi::kron(left, right.constant());
  for (int i = 0; i < lr; ++i) {
    for (int j = 0; j < lc; ++j) {
      const Complex weight = left(i, j);
      if (weight == Complex(0.0, 0.0)) continue;
      for (const auto& term : right.terms()) {
        out.terms_.push_back({term.param, i * right.rows() + term.row,
                              j * right.cols() + term.col,
                              weight * term.coeff});
      }
    }
  }
  return out;
}

MatExpr kron(const MatExpr& left, const ComplexMatrix& right) {
  const int rr = static_cast<int>(right.rows());
  const int rc = static_cast<int>(right.cols());
  MatExpr out(left.rows() * rr, left.cols() * rc);
  out.constant_ = qi::kron(left.constant(), right);
  for (const auto& term : left.terms()) {
    for (int i = 0; i < rr; ++i) {
      for (int j = 0; j < rc; ++j) {
        const Complex weight = right(i, j);
        if (weight == Complex(0.0, 0.0)) continue;
        out.terms_.push_back({term.param, term.row * rr + i, term.col * rc + j,
                              term.coeff * weight});
      }
    }
  }
  return out;
}

MatExpr congruence(const ComplexMatrix& left, const MatExpr& expr,
                   const ComplexMatrix& right) {
  require(left.cols() == expr.rows() && expr.cols() == right.rows(),
          "shape mismatch in congruence");
  MatExpr out(static_cast<int>(left.rows()), static_cast<int>(right.cols()));
  out.constant_ = left * expr.constant() * right;
  for (const auto& term : expr.terms()) {
    for (int i = 0; i < left.rows(); ++i) {
      const Complex lw = left(i, term.row);
      if (lw == Complex(0.0, 0.0)) continue;
      for (int j = 0; j < right.cols(); ++j) {
        const Complex rw = right(term.col, j);
        if (rw == Complex(0.0, 0.0)) continue;
        out.terms_.push_back({term.param, i, j, lw * term.coeff * rw});
      }
    }
  }
  return out;
}

namespace {

// Splits a flat index into per-subsystem indices (row-major composites).
std::vector<int> split_index(int flat, const std::vector<int>& dims) {
  std::vector<int> idx(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    idx[k] = flat % dims[k];
    flat /= dims[k];
  }
  return idx;
}

int join_index(const std::vector<int>& idx, const std::vector<int>& dims) {
  int flat = 0;
  for (size_t k = 0; k < dims.size(); ++k) flat = flat * dims[k] + idx[k];
  return flat;
}

int product_of(const std::vector<int>& dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
}

}  // namespace

MatExpr partial_trace(const MatExpr& expr, const std::vector<int>& dims,
                      const std::vector<bool>& keep) {
  require(dims.size() == keep.size(), "dims/keep size mismatch");
  const int total = product_of(dims);
  require(expr.rows() == total && expr.cols() == total,
          "expression shape does not match dims");
  std::vector<int> kept_dims;
  for (size_t k = 0; k < dims.size(); ++k) {
    if (keep[k]) kept_dims.push_back(dims[k]);
  }
  const int kept_total = product_of(kept_dims);
  MatExpr out(kept_total, kept_total);
  out.constant_ = qi::partial_trace(expr.constant(), dims, keep);
  for (const auto& term : expr.terms()) {
    const std::vector<int> ri = split_index(term.row, dims);
    const std::vector<int> ci = split_index(term.col, dims);
    bool diagonal_on_traced = true;
    std::vector<int> rk, ck;
    for (size_t k = 0; k < dims.size(); ++k) {
      if (keep[k]) {
        rk.push_back(ri[k]);
        ck.push_back(ci[k]);
      } else if (ri[k] != ci[k]) {
        diagonal_on_traced = false;
        break;
      }
    }
    if (!diagonal_on_traced) continue;
    out.terms_.push_back({term.param, join_index(rk, kept_dims),
                          join_index(ck, kept_dims), term.coeff});
  }
  return out;
}

MatExpr partial_transpose(const MatExpr& expr, const std::vector<int>& dims,
                          const std::vector<bool>& transposed) {
  require(dims.size() == transposed.size(), "dims/transposed size mismatch");
  const int total = product_of(dims);
  require(expr.rows() == total && expr.cols() == total,
          "expression shape does not match dims");
  MatExpr out(total, total);
  out.constant_ = qi::partial_transpose(expr.constant(), dims, transposed);
  for (const auto& term : expr.terms()) {
    std::vector<int> ri = split_index(term.row, dims);
    std::vector<int> ci = split_index(term.col, dims);
    for (size_t k = 0; k < dims.size(); ++k) {
      if (transposed[k]) std::swap(ri[k], ci[k]);
    }
    out.terms_.push_back({term.param, join_index(ri, dims),
                          join_index(ci, dims), term.coeff});
  }
  return out;
}

MatExpr block_matrix(const std::vector<std::vector<MatExpr>>& blocks) {
  require(!blocks.empty() && !blocks.front().empty(), "empty block grid");
  const size_t grid_cols = blocks.front().size();
  std::vector<int> row_heights(blocks.size(), -1);
  std::vector<int> col_widths(grid_cols, -1);
  for (size_t i = 0; i < blocks.size(); ++i) {
    require(blocks[i].size() == grid_cols, "ragged block grid");
    for (size_t j = 0; j < grid_cols; ++j) {
      const MatExpr& b = blocks[i][j];
      if (row_heights[i] < 0) row_heights[i] = b.rows();
      if (col_widths[j] < 0) col_widths[j] = b.cols();
      require(b.rows() == row_heights[i] && b.cols() == col_widths[j],
              "inconsistent block shapes");
    }
  }
  std::vector<int> row_offsets(blocks.size() + 1, 0);
  for (size_t i = 0; i < blocks.size(); ++i) {
    row_offsets[i + 1] = row_offsets[i] + row_heights[i];
  }
  std::vector<int> col_offsets(grid_cols + 1, 0);
  for (size_t j = 0; j < grid_cols; ++j) {
    col_offsets[j + 1] = col_offsets[j] + col_widths[j];
  }
  MatExpr out(row_offsets.back(), col_offsets.back());
  for (size_t i = 0; i < blocks.size(); ++i) {
    for (size_t j = 0; j < grid_cols; ++j) {
      const MatExpr& b = blocks[i][j];
      out.constant_.block(row_offsets[i], col_offsets[j], b.rows(), b.cols()) =
          b.constant();
      for (const auto& term : b.terms()) {
        out.terms_.push_back({term.param, row_offsets[i] + term.row,
                              col_offsets[j] + term.col, term.coeff});
      }
    }
  }
  return out;
}

ScalarExpr trace(const MatExpr& expr) {
  require(expr.rows() == expr.cols(), "trace of a non-square expression");
  ScalarExpr out;
  out.constant_ = expr.constant().trace();
  for (const auto& term : expr.terms()) {
    if (term.row == term.col) out.terms_.push_back({term.param, term.coeff});
  }
  return out;
}

ScalarExpr trace_product(const ComplexMatrix& fixed, const MatExpr& expr) {
  require(fixed.rows() == expr.cols() && fixed.cols() == expr.rows(),
          "shape mismatch in trace_product");
  ScalarExpr out;
  out.constant_ = (fixed * expr.constant()).trace();
  for (const auto& term : expr.terms()) {
    const Complex weight = fixed(term.col, term.row);
    if (weight != Complex(0.0, 0.0)) {
      out.terms_.push_back({term.param, weight * term.coeff});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ConicProgram: variables

VarId ConicProgram::add_variable(const std::string& name, VarDomain domain,
                                 int rows, int cols) {
  require(rows >= 1, "variable must have at least one row");
  VarRecord rec;
  rec.name = name;
  rec.domain = domain;
  rec.rows = rows;
  switch (domain) {
    case VarDomain::kHermitian:
      rec.cols = rows;
      rec.num_params = rows * rows;
      break;
    case VarDomain::kRealSymmetric:
      rec.cols = rows;
      rec.num_params = rows * (rows + 1) / 2;
      break;
    case VarDomain::kGeneralLinear:
      require(cols >= 1, "general variable needs explicit columns");
      rec.cols = cols;
      rec.num_params = 2 * rows * cols;
      break;
    case VarDomain::kRealGeneral:
      require(cols >= 1, "general variable needs explicit columns");
      rec.cols = cols;
      rec.num_params = rows * cols;
      break;
    case VarDomain::kRealScalar:
      require(rows == 1 && cols <= 1, "scalar variable must be 1 x 1");
      rec.cols = 1;
      rec.num_params = 1;
      break;
  }
  rec.first_param = num_params_;
  num_params_ += rec.num_params;
  vars_.push_back(std::move(rec));
  return VarId{static_cast<int>(vars_.size()) - 1};
}

const ConicProgram::VarRecord& ConicProgram::record(VarId id) const {
  require(id.index >= 0 && id.index < static_cast<int>(vars_.size()),
          "invalid variable id");
  return vars_[id.index];
}

const std::string& ConicProgram::variable_name(VarId id) const {
  return record(id).name;
}

MatExpr ConicProgram::var(VarId id) const {
  const VarRecord& rec = record(id);
  MatExpr out(rec.rows, rec.cols);
  int p = rec.first_param;
  const Complex one(1.0, 0.0);
  const Complex im(0.0, 1.0);
  switch (rec.domain) {
    case VarDomain::kHermitian:
      for (int i = 0; i < rec.rows; ++i) {
        out.terms_.push_back({p++, i, i, one});
        for (int j = i + 1; j < rec.rows; ++j) {
          const int pre = p++;
          const int pim = p++;
          out.terms_.push_back({pre, i, j, one});
          out.terms_.push_back({pre, j, i, one});
          out.terms_.push_back({pim, i, j, im});
          out.terms_.push_back({pim, j, i, -im});
        }
      }
      break;
    case VarDomain::kRealSymmetric:
      for (int i = 0; i < rec.rows; ++i) {
        out.terms_.push_back({p++, i, i, one});
        for (int j = i + 1; j < rec.rows; ++j) {
          const int ps = p++;
          out.terms_.push_back({ps, i, j, one});
          out.terms_.push_back({ps, j, i, one});
        }
      }
      break;
    case VarDomain::kGeneralLinear:
      for (int i = 0; i < rec.rows; ++i) {
        for (int j = 0; j < rec.cols; ++j) {
          out.terms_.push_back({p++, i, j, one});
          out.terms_.push_back({p++, i, j, im});
        }
      }
      break;
    case VarDomain::kRealGeneral:
      for (int i = 0; i < rec.rows; ++i) {
        for (int j = 0; j < rec.cols; ++j) {
          out.terms_.push_back({p++, i, j, one});
        }
      }
      break;
    case VarDomain::kRealScalar:
      out.terms_.push_back({p, 0, 0, one});
      break;
  }
  return out;
}

ScalarExpr ConicProgram::scalar(VarId id) const {
  const VarRecord& rec = record(id);
  require(rec.domain == VarDomain::kRealScalar,
          "scalar() requires a kRealScalar variable");
  ScalarExpr out;
  out.terms_.push_back({rec.first_param, Complex(1.0, 0.0)});
  return out;
}

// ---------------------------------------------------------------------------
// ConicProgram: constraints and objective

void ConicProgram::add_psd(const MatExpr& expr) {
  require(expr.rows() == expr.cols() && expr.rows() >= 1,
          "PSD constraint must be square and nonempty");
  psd_.push_back(expr);
}

void ConicProgram::add_nonneg(const ScalarExpr& expr) {
  nonneg_.push_back(expr);
}

void ConicProgram::add_entrywise_nonneg(const MatExpr& expr) {
  for (int i = 0; i < expr.rows(); ++i) {
    for (int j = 0; j < expr.cols(); ++j) {
      ScalarExpr entry;
      entry.constant_ = expr.constant()(i, j);
      for (const auto& term : expr.terms()) {
        if (term.row == i && term.col == j) {
          entry.terms_.push_back({term.param, term.coeff});
        }
      }
      nonneg_.push_back(std::move(entry));
    }
  }
}

void ConicProgram::add_equality(const ScalarExpr& lhs, const ScalarExpr& rhs) {
  equalities_.push_back(lhs - rhs);
}

void ConicProgram::add_defining_equality(VarId id, const MatExpr& rhs) {
  record(id);  // validates the index
  VarRecord& rec = vars_[id.index];
  require(!rec.defined, "variable already defined");
  require(!rec.eliminable, "an eliminable variable cannot be defined");
  require(rhs.rows() == rec.rows && rhs.cols() == rec.cols,
          "defining equality shape mismatch");
  for (const auto& term : rhs.terms()) {
    require(term.param < rec.first_param ||
                term.param >= rec.first_param + rec.num_params,
            "defining equality references the variable it defines");
  }
  rec.defined = true;
  rec.definition = rhs;
}

void ConicProgram::mark_eliminable(VarId id) {
  require(!record(id).defined, "a defined variable cannot be eliminable");
  vars_[id.index].eliminable = true;
}

void ConicProgram::minimize(const ScalarExpr& objective) {
  objective_ = objective;
  maximize_ = false;
  has_objective_ = true;
}

void ConicProgram::maximize(const ScalarExpr& objective) {
  objective_ = objective;
  maximize_ = true;
  has_objective_ = true;
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

using conic_detail::ExprFactory;
using conic_detail::Term;

struct Substitution {
  struct Entry {
    bool active = false;
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;
  };
  std::vector<Entry> entries;

  bool active(int param) const {
    return param >= 0 && param < static_cast<int>(entries.size()) &&
           entries[param].active;
  }
};

MatExpr rewrite_mat(const MatExpr& expr, const Substitution& subst) {
  ComplexMatrix constant = expr.constant();
  std::vector<Term> kept;
  kept.reserve(expr.terms().size());
  for (const auto& term : expr.terms()) {
    if (!subst.active(term.param)) {
      kept.push_back(term);
      continue;
    }
    const auto& entry = subst.entries[term.param];
    constant(term.row, term.col) += term.coeff * entry.constant;
    for (const auto& [q, w] : entry.terms) {
      kept.push_back({q, term.row, term.col, term.coeff * w});
    }
  }
  return ExprFactory::make(std::move(constant), std::move(kept));
}

ScalarExpr rewrite_scalar(const ScalarExpr& expr, const Substitution& subst) {
  Complex constant = expr.constant();
  std::vector<std::pair<int, Complex>> kept;
  kept.reserve(expr.terms().size());
  for (const auto& [param, coeff] : expr.terms()) {
    if (!subst.active(param)) {
      kept.push_back({param, coeff});
      continue;
    }
    const auto& entry = subst.entries[param];
    constant += coeff * entry.constant;
    for (const auto& [q, w] : entry.terms) {
      kept.push_back({q, coeff * w});
    }
  }
  return ExprFactory::make_scalar(constant, std::move(kept));
}

// Real-linear functional reading off Re (which == 0) or Im (which == 1) of a
// definition's (i, j) entry.
Substitution::Entry functional_of_entry(const MatExpr& def, int i, int j,
                                        int which) {
  Substitution::Entry out;
  out.active = true;
  const Complex c = def.constant()(i, j);
  out.constant = (which == 0) ? c.real() : c.imag();
  std::map<int, double> acc;
  for (const auto& term : def.terms()) {
    if (term.row != i || term.col != j) continue;
    const double w = (which == 0) ? term.coeff.real() : term.coeff.imag();
    if (w != 0.0) acc[term.param] += w;
  }
  out.terms.assign(acc.begin(), acc.end());
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

struct LoweringResult {
  internal::LoweredProgram prog;
  std::vector<int> orig_to_low;  // -1 when dropped
  std::vector<int> low_to_orig;
  Substitution subst;
  std::vector<int> defined_params;  // original indices, definition order
};

}  // namespace

namespace conic_detail {

// Full lowering pass; declared here so the solve()/dump_lowered() friends can
// share it without widening the public surface.
struct LoweringAccess {
  static LoweringResult lower(const ConicProgram& prog,
                              const SolveOptions& options);
  static void expand_parameters(const ConicProgram& prog,
                                const LoweringResult& lowered,
                                const Eigen::VectorXd& low_params,
                                Eigen::VectorXd* full_params);
};

LoweringResult LoweringAccess::lower(const ConicProgram& prog,
                                     const SolveOptions& options) {
  require(prog.has_objective_, "program has no objective");
  LoweringResult out;
  Substitution& subst = out.subst;
  subst.entries.resize(prog.num_params_);

  // Defining equalities, processed in variable order. Definitions may
  // reference earlier-defined variables; those references are substituted
  // away here, so each functional refers to surviving parameters only.
  for (const auto& rec : prog.vars_) {
    if (!rec.defined) continue;
    const MatExpr def = rewrite_mat(rec.definition, subst);
    for (const auto& term : def.terms()) {
      require(term.param < rec.first_param ||
                  term.param >= rec.first_param + rec.num_params,
              "cyclic defining equality for variable " + rec.name);
    }
    int p = rec.first_param;
    switch (rec.domain) {
      case VarDomain::kHermitian:
        for (int i = 0; i < rec.rows; ++i) {
          subst.entries[p++] = functional_of_entry(def, i, i, 0);
          for (int j = i + 1; j < rec.rows; ++j) {
            subst.entries[p++] = functional_of_entry(def, i, j, 0);
            subst.entries[p++] = functional_of_entry(def, i, j, 1);
          }
        }
        break;
      case VarDomain::kRealSymmetric:
        for (int i = 0; i < rec.rows; ++i) {
          subst.entries[p++] = functional_of_entry(def, i, i, 0);
          for (int j = i + 1; j < rec.rows; ++j) {
            subst.entries[p++] = functional_of_entry(def, i, j, 0);
          }
        }
        break;
      case VarDomain::kGeneralLinear:
        for (int i = 0; i < rec.rows; ++i) {
          for (int j = 0; j < rec.cols; ++j) {
            subst.entries[p++] = functional_of_entry(def, i, j, 0);
            subst.entries[p++] = functional_of_entry(def, i, j, 1);
          }
        }
        break;
      case VarDomain::kRealGeneral:
        for (int i = 0; i < rec.rows; ++i) {
          for (int j = 0; j < rec.cols; ++j) {
            subst.entries[p++] = functional_of_entry(def, i, j, 0);
          }
        }
        break;
      case VarDomain::kRealScalar:
        subst.entries[p] = functional_of_entry(def, 0, 0, 0);
        break;
    }
    for (int q = rec.first_param; q < rec.first_param + rec.num_params; ++q) {
      out.defined_params.push_back(q);
    }
  }
  // Definitions are resolved in variable order, so a functional may only
  // reference parameters that are never substituted themselves. Anything
  // else is a forward or cyclic reference.
  for (int defined : out.defined_params) {
    for (const auto& [q, weight] : subst.entries[defined].terms) {
      require(!subst.entries[q].active,
              "defining equality references a variable defined later");
    }
  }

  // Rewrite every expression through the substitution.
  std::vector<MatExpr> psd;
  psd.reserve(prog.psd_.size());
  for (const auto& e : prog.psd_) psd.push_back(rewrite_mat(e, subst));
  std::vector<ScalarExpr> nonneg;
  nonneg.reserve(prog.nonneg_.size());
  for (const auto& e : prog.nonneg_) nonneg.push_back(rewrite_scalar(e, subst));
  std::vector<ScalarExpr> equalities;
  equalities.reserve(prog.equalities_.size());
  for (const auto& e : prog.equalities_) {
    equalities.push_back(rewrite_scalar(e, subst));
  }
  const ScalarExpr objective = rewrite_scalar(prog.objective_, subst);

  // Usage scan over the surviving parameters.
  std::vector<bool> used(prog.num_params_, false);
  auto mark_mat = [&](const MatExpr& e) {
    for (const auto& term : e.terms()) used[term.param] = true;
  };
  auto mark_scalar = [&](const ScalarExpr& e) {
    for (const auto& [param, coeff] : e.terms()) used[param] = true;
  };
  for (const auto& e : psd) mark_mat(e);
  for (const auto& e : nonneg) mark_scalar(e);
  for (const auto& e : equalities) mark_scalar(e);
  mark_scalar(objective);

  std::vector<bool> is_slack(prog.num_params_, false);
  for (const auto& rec : prog.vars_) {
    if (!rec.eliminable) continue;
    for (int q = rec.first_param; q < rec.first_param + rec.num_params; ++q) {
      is_slack[q] = true;
    }
  }

  out.orig_to_low.assign(prog.num_params_, -1);
  for (int q = 0; q < prog.num_params_; ++q) {
    if (used[q] && !is_slack[q]) {
      out.orig_to_low[q] = static_cast<int>(out.low_to_orig.size());
      out.low_to_orig.push_back(q);
    }
  }
  const int num_core = static_cast<int>(out.low_to_orig.size());
  for (int q = 0; q < prog.num_params_; ++q) {
    if (used[q] && is_slack[q]) {
      out.orig_to_low[q] = static_cast<int>(out.low_to_orig.size());
      out.low_to_orig.push_back(q);
    }
  }
  const int num_params = static_cast<int>(out.low_to_orig.size());

  internal::LoweredProgram& low = out.prog;
  low.num_params = num_params;
  low.num_core = num_core;

  // PSD blocks: accumulate per-parameter sparse patterns, validate and
  // enforce Hermitian coefficients, then optionally apply the real embedding.
  for (const auto& e : psd) {
    const int dim = e.rows();
    ComplexMatrix constant = e.constant();
    const double const_scale = 1.0 + constant.cwiseAbs().maxCoeff();
    require((constant - ComplexMatrix(constant.adjoint())).cwiseAbs().maxCoeff()
                <= kHermitizeTol * const_scale,
            "PSD block constant is not Hermitian");
    constant = 0.5 * (constant + ComplexMatrix(constant.adjoint()));

    std::map<int, std::map<std::pair<int, int>, Complex>> per_param;
    for (const auto& term : e.terms()) {
      per_param[term.param][{term.row, term.col}] += term.coeff;
    }
    internal::PsdBlockData block;
    block.dim = dim;
    block.constant = std::move(constant);
    bool block_complex = block.constant.imag().cwiseAbs().maxCoeff() > 1e-13;
    for (auto& [orig_param, pattern] : per_param) {
      const int lowp = out.orig_to_low[orig_param];
      require(lowp >= 0 && lowp < num_core,
              "eliminable parameter appears in a PSD block");
      double scale = 0.0;
      for (const auto& [pos, z] : pattern) scale = std::max(scale, std::abs(z));
      internal::BlockCoefficient coeff;
      coeff.param = lowp;
      std::map<std::pair<int, int>, Complex> hermitized;
      for (const auto& [pos, z] : pattern) {
        auto mirror = pattern.find({pos.second, pos.first});
        const Complex zm =
            (mirror == pattern.end()) ? Complex(0.0, 0.0) : mirror->second;
        require(std::abs(z - std::conj(zm)) <= kHermitizeTol * (1.0 + scale),
                "PSD block coefficient is not Hermitian");
        hermitized[pos] = 0.5 * (z + std::conj(zm));
      }
      for (const auto& [pos, z] : hermitized) {
        if (std::abs(z) <= kDropTol * (1.0 + scale)) continue;
        coeff.entries.push_back({-1, pos.first, pos.second, z});
        if (std::abs(z.imag()) > 1e-13) block_complex = true;
      }
      if (!coeff.entries.empty()) block.coeffs.push_back(std::move(coeff));
    }

    if (options.force_real_embedding && block_complex) {
      internal::PsdBlockData emb;
      emb.dim = 2 * dim;
      emb.embedded = true;
      emb.constant = embed_hermitian(block.constant).cast<Complex>();
      for (const auto& coeff : block.coeffs) {
        internal::BlockCoefficient ec;
        ec.param = coeff.param;
        for (const auto& t : coeff.entries) {
          const double re = t.coeff.real();
          const double im = t.coeff.imag();
          if (re != 0.0) {
            ec.entries.push_back({-1, t.row, t.col, Complex(re, 0.0)});
            ec.entries.push_back({-1, t.row + dim, t.col + dim,
                                  Complex(re, 0.0)});
          }
          if (im != 0.0) {
            ec.entries.push_back({-1, t.row + dim, t.col, Complex(im, 0.0)});
            ec.entries.push_back({-1, t.row, t.col + dim, Complex(-im, 0.0)});
          }
        }
        emb.coeffs.push_back(std::move(ec));
      }
      low.blocks.push_back(std::move(emb));
    } else {
      low.blocks.push_back(std::move(block));
    }
  }

  // Scalar inequality rows, split into sparse rows and the dense row set.
  struct PendingDense {
    double constant;
    std::vector<std::pair<int, double>> core;   // lowered core indices
    std::vector<std::pair<int, double>> slack;  // lowered slack indices
  };
  std::vector<PendingDense> dense_rows;
  for (const auto& e : nonneg) {
    const double constant = real_or_throw(e.constant(), "inequality row");
    std::vector<std::pair<int, double>> core, slack;
    for (const auto& [param, w] : real_term_sums(e.terms(), "inequality row")) {
      const int lowp = out.orig_to_low[param];
      require(lowp >= 0, "internal: unused parameter in a row");
      if (lowp < num_core) {
        core.push_back({lowp, w});
      } else {
        slack.push_back({lowp, w});
      }
    }
    if (static_cast<int>(core.size()) >= kDenseRowThreshold) {
      dense_rows.push_back({constant, std::move(core), std::move(slack)});
    } else {
      internal::SparseRow row;
      row.constant = constant;
      row.terms = std::move(core);
      row.terms.insert(row.terms.end(), slack.begin(), slack.end());
      low.sparse_rows.push_back(std::move(row));
    }
  }
  if (!dense_rows.empty()) {
    const int nrows = static_cast<int>(dense_rows.size());
    low.dense_rows.constants.resize(nrows);
    low.dense_rows.gradients = Eigen::MatrixXd::Zero(nrows, num_core);
    low.dense_rows.slack_terms.resize(nrows);
    for (int i = 0; i < nrows; ++i) {
      low.dense_rows.constants(i) = dense_rows[i].constant;
      for (const auto& [p, w] : dense_rows[i].core) {
        low.dense_rows.gradients(i, p) = w;
      }
      low.dense_rows.slack_terms[i] = std::move(dense_rows[i].slack);
    }
  } else {
    low.dense_rows.constants.resize(0);
    low.dense_rows.gradients.resize(0, num_core);
  }

  // Scalar equalities: core parameters only.
  low.eq_a = Eigen::MatrixXd::Zero(static_cast<int>(equalities.size()),
                                   num_params);
  low.eq_b = Eigen::VectorXd::Zero(static_cast<int>(equalities.size()));
  for (size_t r = 0; r < equalities.size(); ++r) {
    const auto& e = equalities[r];
    low.eq_b(static_cast<int>(r)) =
        -real_or_throw(e.constant(), "equality row");
    for (const auto& [param, w] : real_term_sums(e.terms(), "equality row")) {
      const int lowp = out.orig_to_low[param];
      require(lowp >= 0 && lowp < num_core,
              "eliminable parameter appears in an equality");
      low.eq_a(static_cast<int>(r), lowp) += w;
    }
  }

  // Objective (stored in minimization sense).
  low.cost = Eigen::VectorXd::Zero(num_params);
  low.cost_constant = real_or_throw(objective.constant(), "objective");
  low.maximize = prog.maximize_;
  for (const auto& [param, w] : real_term_sums(objective.terms(), "objective")) {
    const int lowp = out.orig_to_low[param];
    if (lowp >= 0) low.cost(lowp) += w;
  }
  if (prog.maximize_) {
    low.cost = -low.cost;
  }

  // Slack groups: connected components induced by row co-occurrence.
  const int num_slack = num_params - num_core;
  if (num_slack > 0) {
    UnionFind uf(num_slack);
    auto unite_row = [&](const std::vector<std::pair<int, double>>& terms) {
      int first = -1;
      for (const auto& [p, w] : terms) {
        if (p < num_core) continue;
        if (first < 0) {
          first = p - num_core;
        } else {
          uf.unite(first, p - num_core);
        }
      }
    };
    for (const auto& row : low.sparse_rows) unite_row(row.terms);
    for (const auto& tail : low.dense_rows.slack_terms) unite_row(tail);
    std::map<int, std::vector<int>> components;
    for (int s = 0; s < num_slack; ++s) {
      components[uf.find(s)].push_back(num_core + s);
    }
    for (auto& [root, members] : components) {
      require(static_cast<int>(members.size()) <= kMaxSlackGroup,
              "slack elimination group too large");
      low.slack_groups.push_back(std::move(members));
    }
  }
  return out;
}

void LoweringAccess::expand_parameters(const ConicProgram& prog,
                                       const LoweringResult& lowered,
                                       const Eigen::VectorXd& low_params,
                                       Eigen::VectorXd* full_params) {
  full_params->setZero(prog.num_params_);
  for (size_t lowp = 0; lowp < lowered.low_to_orig.size(); ++lowp) {
    (*full_params)(lowered.low_to_orig[lowp]) =
        low_params(static_cast<int>(lowp));
  }
  for (int defined : lowered.defined_params) {
    const auto& entry = lowered.subst.entries[defined];
    double value = entry.constant;
    for (const auto& [q, w] : entry.terms) value += w * (*full_params)(q);
    (*full_params)(defined) = value;
  }
}

}  // namespace conic_detail

// ---------------------------------------------------------------------------
// Geometric-mean epigraph

GeomeanEpigraph add_geomean_epigraph(ConicProgram& prog, const ComplexMatrix& x,
                                     const MatExpr& y, int level,
                                     const GeomeanOptions& options) {
  require(x.rows() == x.cols(), "X must be square");
  require(y.rows() == x.rows() && y.cols() == x.cols(),
          "Y must match the shape of X");
  require(level >= 0 && level <= 30, "level out of range");
  const int n = static_cast<int>(x.rows());
  ComplexMatrix xh = 0.5 * (x + ComplexMatrix(x.adjoint()));
  if (options.mixing > 0.0) {
    xh += options.mixing * ComplexMatrix::Identity(n, n);
  }

  const auto [evals, evecs] = eigh(xh);
  require(evals.minCoeff() >= -1e-9 * std::max(1.0, evals.maxCoeff()),
          "X must be positive semidefinite");
  const double cutoff =
      options.rank_tolerance * std::max(evals.maxCoeff(), 0.0);
  int rank = 0;
  for (int i = 0; i < n; ++i) {
    if (evals(i) > cutoff) ++rank;
  }

  const VarDomain aux_domain = options.real_symmetric
                                   ? VarDomain::kRealSymmetric
                                   : VarDomain::kHermitian;
  const std::string tag = "_gm" + std::to_string(prog.num_variables());
  GeomeanEpigraph out;

  if (rank == 0) {
    // X = 0 forces G = 0; the zero head is trivially optimal.
    out.head = MatExpr(ComplexMatrix::Zero(n, n));
    out.psd_blocks = 0;
    out.reduced_rank = 0;
    return out;
  }

  const bool reduce = options.allow_reduction && rank < n;
  if (!reduce) {
    const MatExpr xe(xh);
    const VarId m = prog.add_variable(tag + "_head", aux_domain, n);
    std::vector<MatExpr> chain;  // N_level .. N_1, then Y as N_0
    std::vector<VarId> aux;
    for (int i = level; i >= 1; --i) {
      aux.push_back(prog.add_variable(tag + "_n" + std::to_string(i),
                                      aux_domain, n));
      chain.push_back(prog.var(aux.back()));
    }
    chain.push_back(y);
    prog.add_psd(block_matrix({{prog.var(m), xe}, {xe, chain.front()}}));
    for (size_t i = 0; i + 1 < chain.size(); ++i) {
      prog.add_psd(block_matrix({{xe, chain[i]}, {chain[i], chain[i + 1]}}));
    }
    out.head = prog.var(m);
    out.psd_blocks = level + 1;
    out.reduced_rank = n;
    return out;
  }

  // Facial reduction onto range(X): X = V Xh V+ with V an isometry. M and the
  // interior chain matrices live on the range; only the block touching Y
  // keeps full size.
  ComplexMatrix v(n, rank);
  for (int i = 0; i < rank; ++i) v.col(i) = evecs.col(i);
  const ComplexMatrix xr = v.adjoint() * xh * v;  // rank x rank, full rank
  const MatExpr xre(xr);
  const ComplexMatrix vxh = v.adjoint() * xh;  // Xr V+ = V+ X
  const VarId m = prog.add_variable(tag + "_head", aux_domain, rank);

  if (level == 0) {
    prog.add_psd(block_matrix(
        {{prog.var(m), MatExpr(vxh)},
         {MatExpr(ComplexMatrix(vxh.adjoint())), y}}));
  } else {
    std::vector<VarId> aux;  // N_level .. N_1 on the reduced space
    for (int i = level; i >= 1; --i) {
      aux.push_back(prog.add_variable(tag + "_n" + std::to_string(i),
                                      aux_domain, rank));
    }
    prog.add_psd(block_matrix(
        {{prog.var(m), xre}, {xre, prog.var(aux.front())}}));
    for (size_t i = 0; i + 1 < aux.size(); ++i) {
      prog.add_psd(block_matrix({{xre, prog.var(aux[i])},
                                 {prog.var(aux[i]), prog.var(aux[i + 1])}}));
    }
    // Bottom block couples the reduced N_1 to the full-size Y.
    const MatExpr n1 = prog.var(aux.back());
    prog.add_psd(block_matrix(
        {{xre, congruence(ComplexMatrix::Identity(rank, rank), n1,
                          ComplexMatrix(v.adjoint()))},
         {congruence(v, n1, ComplexMatrix::Identity(rank, rank)), y}}));
  }
  out.head = congruence(v, prog.var(m), ComplexMatrix(v.adjoint()));
  out.psd_blocks = level + 1;
  out.reduced_rank = rank;
  return out;
}

// ---------------------------------------------------------------------------
// Value extraction

ComplexMatrix ConicProgram::value(VarId id, const SolveReport& report) const {
  require(report.parameters.size() == num_params_,
          "report does not match this program");
  return var(id).evaluate(report.parameters);
}

double ConicProgram::scalar_value(VarId id, const SolveReport& report) const {
  const VarRecord& rec = record(id);
  require(rec.domain == VarDomain::kRealScalar,
          "scalar_value() requires a kRealScalar variable");
  require(report.parameters.size() == num_params_,
          "report does not match this program");
  return report.parameters(rec.first_param);
}

// ---------------------------------------------------------------------------
// Solve and dump entry points

SolveReport solve(const ConicProgram& prog, const SolveOptions& options) {
  const LoweringResult lowered =
      conic_detail::LoweringAccess::lower(prog, options);
  SolveReport report = internal::run_interior_point(lowered.prog, options);
  Eigen::VectorXd low_params = report.parameters;
  conic_detail::LoweringAccess::expand_parameters(prog, lowered, low_params,
                                                  &report.parameters);
  return report;
}

void dump_lowered(const ConicProgram& prog, const SolveOptions& options,
                  const std::string& path) {
  const LoweringResult lowered =
      conic_detail::LoweringAccess::lower(prog, options);
  const internal::LoweredProgram& low = lowered.prog;
  std::ofstream out(path);
  require(out.good(), "cannot open dump file " + path);
  out.precision(17);
  out << "params " << low.num_params << " core " << low.num_core << "\n";
  out << "maximize " << (low.maximize ? 1 : 0) << " objconst "
      << low.cost_constant << "\n";
  for (int p = 0; p < low.num_params; ++p) {
    if (low.cost(p) != 0.0) out << "cost " << p << " " << low.cost(p) << "\n";
  }
  for (size_t j = 0; j < low.blocks.size(); ++j) {
    const auto& block = low.blocks[j];
    out << "block " << j << " dim " << block.dim << " embedded "
        << (block.embedded ? 1 : 0) << "\n";
    for (int r = 0; r < block.dim; ++r) {
      for (int c = 0; c < block.dim; ++c) {
        const Complex z = block.constant(r, c);
        if (z != Complex(0.0, 0.0)) {
          out << "  const " << r << " " << c << " " << z.real() << " "
              << z.imag() << "\n";
        }
      }
    }
    for (const auto& coeff : block.coeffs) {
      for (const auto& t : coeff.entries) {
        out << "  coef " << coeff.param << " " << t.row << " " << t.col << " "
            << t.coeff.real() << " " << t.coeff.imag() << "\n";
      }
    }
  }
  for (const auto& row : low.sparse_rows) {
    out << "row " << row.constant;
    for (const auto& [p, w] : row.terms) out << " " << p << ":" << w;
    out << "\n";
  }
  for (int i = 0; i < low.dense_rows.size(); ++i) {
    out << "row " << low.dense_rows.constants(i);
    for (int p = 0; p < low.num_core; ++p) {
      const double w = low.dense_rows.gradients(i, p);
      if (w != 0.0) out << " " << p << ":" << w;
    }
    for (const auto& [p, w] : low.dense_rows.slack_terms[i]) {
      out << " " << p << ":" << w;
    }
    out << "\n";
  }
  for (int r = 0; r < low.eq_a.rows(); ++r) {
    out << "eq " << low.eq_b(r);
    for (int p = 0; p < low.num_params; ++p) {
      if (low.eq_a(r, p) != 0.0) out << " " << p << ":" << low.eq_a(r, p);
    }
    out << "\n";
  }
  for (const auto& group : low.slack_groups) {
    out << "group";
    for (int p : group) out << " " << p;
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Real embedding helpers

Eigen::MatrixXd embed_hermitian(const ComplexMatrix& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = m.real();
  out.bottomRightCorner(n, n) = m.real();
  out.bottomLeftCorner(n, n) = m.imag();
  out.topRightCorner(n, n) = -m.imag();
  return out;
}

ComplexMatrix hermitian_from_embedded(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows()) / 2;
  ComplexMatrix out(n, n);
  out.real() = 0.5 * (m.topLeftCorner(n, n) + m.bottomRightCorner(n, n));
  out.imag() = 0.5 * (m.bottomLeftCorner(n, n) - m.topRightCorner(n, n));
  return out;
}

double embedding_asymmetry(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows()) / 2;
  const double d1 =
      (m.topLeftCorner(n, n) - m.bottomRightCorner(n, n)).cwiseAbs().maxCoeff();
  const double d2 =
      (m.topRightCorner(n, n) + m.bottomLeftCorner(n, n)).cwiseAbs().maxCoeff();
  return std::max(d1, d2);
}

}  // namespace qi
