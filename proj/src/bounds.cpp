#include "qi/bounds.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qi {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

ComplexMatrix identity(int dim) { return ComplexMatrix::Identity(dim, dim); }

// l * 2^l - (2^l + 1) log2(2^l + 1), the constant part of the dyadic
// maximization forms.
double dyadic_prefactor(int level) {
  const double pw = std::pow(2.0, level);
  return level * pw - (pw + 1.0) * std::log2(pw + 1.0);
}

void check_level(int level) {
  if (level < 0 || level > 30)
    throw std::invalid_argument("bounds: level must be in [0, 30]");
}

void check_sep_dims(const QuantumChannel& n, const char* what) {
  if (n.dim_a() * n.dim_b() > 6)
    throw std::invalid_argument(
        std::string("bounds: ") + what +
        " requires |A||B| <= 6; the separability cone has no exact "
        "semidefinite form beyond that");
}

// log2 of the optimum of a min program whose objective is a positive scale
// factor, NaN when the solve did not reach an optimal point.
BoundResult log_of_objective(BoundKind kind, int level, SolveReport report,
                             double scale) {
  BoundResult out;
  out.bound_kind = kind;
  out.level = level;
  out.bits = (report.status == SolveStatus::kOptimal && report.objective > 0.0)
                 ? scale * std::log2(report.objective)
                 : kNan;
  out.report = std::move(report);
  return out;
}

// Prefactor form of the maximization programs: l*2^l - (2^l+1)log2(2^l+1)
// + (2^l+1) log2(S) with S the reported maximum.
BoundResult log_of_max_form(BoundKind kind, int level, SolveReport report) {
  const double pw = std::pow(2.0, level);
  BoundResult out;
  out.bound_kind = kind;
  out.level = level;
  out.bits = (report.status == SolveStatus::kOptimal && report.objective > 0.0)
                 ? dyadic_prefactor(level) +
                       (pw + 1.0) * std::log2(report.objective)
                 : kNan;
  out.report = std::move(report);
  return out;
}

// Shared scaffold of the minimization chain programs: a Hermitian tail
// variable n0 closing the dyadic chain on the Choi matrix, and a scalar y
// bounding the input-side partial trace of the head.
struct ChainCore {
  ConicProgram prog;
  VarId n0;
  VarId y;
};

ChainCore make_chain_core(const ComplexMatrix& choi,
                          const std::vector<int>& dims,
                          const std::vector<bool>& keep_in, int level) {
  ChainCore core;
  const int d = static_cast<int>(choi.rows());
  int d_in = 1;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (keep_in[i]) d_in *= dims[i];
  }
  core.n0 = core.prog.add_variable("n0", VarDomain::kHermitian, d);
  const GeomeanEpigraph epi =
      add_geomean_epigraph(core.prog, choi, core.prog.var(core.n0), level);
  core.y = core.prog.add_variable("y", VarDomain::kRealScalar, 1);
  core.prog.add_psd(kron(core.prog.var(core.y), identity(d_in)) -
                    partial_trace(epi.head, dims, keep_in));
  core.prog.minimize(core.prog.scalar(core.y));
  return core;
}

// Shared scaffold of the maximization programs: free K and {Z_i}, Hermitian
// {W_i} and rho, the head and interior chain blocks, the normalization
// tr rho = 1, and the objective tr[(K + K^dag - sum W_i) J]. The caller adds
// the cone constraint tying rho tensor I to Z_0 + Z_0^dag.
struct MaxFormCore {
  ConicProgram prog;
  MatExpr rho_ext;   // rho tensor I_B
  MatExpr z0_herm;   // Z_0 + Z_0^dag
};

MaxFormCore make_max_form_core(const ComplexMatrix& choi, int da, int db,
                               int level) {
  MaxFormCore core;
  ConicProgram& prog = core.prog;
  const int d = da * db;
  const VarId rho = prog.add_variable("rho", VarDomain::kHermitian, da);
  const VarId k = prog.add_variable("k", VarDomain::kGeneralLinear, d, d);
  std::vector<VarId> z(level + 1);
  for (int i = 0; i <= level; ++i) {
    z[i] = prog.add_variable("z" + std::to_string(i),
                             VarDomain::kGeneralLinear, d, d);
  }
  std::vector<VarId> w(level + 1);  // w[0] unused
  for (int i = 1; i <= level; ++i) {
    w[i] = prog.add_variable("w" + std::to_string(i), VarDomain::kHermitian, d);
  }

  core.rho_ext = kron(prog.var(rho), identity(db));
  core.z0_herm = prog.var(z[0]) + prog.var(z[0]).adjoint();
  auto herm = [&](VarId id) { return prog.var(id) + prog.var(id).adjoint(); };

  prog.add_psd(block_matrix({{core.rho_ext, prog.var(k)},
                             {prog.var(k).adjoint(), herm(z[level])}}));
  for (int i = 1; i <= level; ++i) {
    prog.add_psd(block_matrix({{prog.var(w[i]), prog.var(z[i])},
                               {prog.var(z[i]).adjoint(), herm(z[i - 1])}}));
  }
  prog.add_equality(trace(prog.var(rho)), ScalarExpr(1.0));

  MatExpr payoff = prog.var(k) + prog.var(k).adjoint();
  for (int i = 1; i <= level; ++i) payoff = payoff - prog.var(w[i]);
  prog.maximize(trace_product(choi, payoff));
  return core;
}

}  // namespace

BoundResult holevo_werner(const QuantumChannel& n, const SolveOptions& opts) {
  const int da = n.dim_a(), db = n.dim_b();
  const ComplexMatrix jt =
      partial_transpose(n.choi(), da, db, Subsystem::B);
  ConicProgram prog;
  const VarId yop = prog.add_variable("Y", VarDomain::kHermitian, da * db);
  const VarId y = prog.add_variable("y", VarDomain::kRealScalar, 1);
  prog.add_psd(prog.var(yop) - MatExpr(jt));
  prog.add_psd(prog.var(yop) + MatExpr(jt));
  prog.add_psd(kron(prog.var(y), identity(da)) -
               partial_trace(prog.var(yop), {da, db}, {true, false}));
  prog.minimize(prog.scalar(y));
  return log_of_objective(BoundKind::kHolevoWerner, kNoLevel,
                          solve(prog, opts), 1.0);
}

BoundResult max_rains(const QuantumChannel& n, const SolveOptions& opts) {
  const int da = n.dim_a(), db = n.dim_b();
  ConicProgram prog;
  const VarId v = prog.add_variable("V", VarDomain::kHermitian, da * db);
  const VarId y = prog.add_variable("Y", VarDomain::kHermitian, da * db);
  const VarId mu = prog.add_variable("mu", VarDomain::kRealScalar, 1);
  prog.add_psd(prog.var(v));
  prog.add_psd(prog.var(y));
  prog.add_psd(partial_transpose(prog.var(v) - prog.var(y), {da, db},
                                 {false, true}) -
               MatExpr(n.choi()));
  prog.add_psd(kron(prog.var(mu), identity(da)) -
               partial_trace(prog.var(v) + prog.var(y), {da, db},
                             {true, false}));
  prog.minimize(prog.scalar(mu));
  return log_of_objective(BoundKind::kMaxRains, kNoLevel, solve(prog, opts),
                          1.0);
}

BoundResult max_rains_theta_form(const QuantumChannel& n,
                                 const SolveOptions& opts) {
  const int da = n.dim_a(), db = n.dim_b();
  ConicProgram prog;
  const VarId g = prog.add_variable("G", VarDomain::kHermitian, da * db);
  const VarId yop = prog.add_variable("Y", VarDomain::kHermitian, da * db);
  const VarId mu = prog.add_variable("mu", VarDomain::kRealScalar, 1);
  const MatExpr gt =
      partial_transpose(prog.var(g), {da, db}, {false, true});
  prog.add_psd(prog.var(g) - MatExpr(n.choi()));
  prog.add_psd(prog.var(yop) - gt);
  prog.add_psd(prog.var(yop) + gt);
  prog.add_psd(kron(prog.var(mu), identity(da)) -
               partial_trace(prog.var(yop), {da, db}, {true, false}));
  prog.minimize(prog.scalar(mu));
  return log_of_objective(BoundKind::kMaxRainsThetaForm, kNoLevel,
                          solve(prog, opts), 1.0);
}

BoundResult rains_geometric(const QuantumChannel& n, int level,
                            const SolveOptions& opts) {
  check_level(level);
  const int da = n.dim_a(), db = n.dim_b();
  MaxFormCore core = make_max_form_core(n.choi(), da, db, level);
  const MatExpr z0t =
      partial_transpose(core.z0_herm, {da, db}, {false, true});
  core.prog.add_psd(core.rho_ext - z0t);
  core.prog.add_psd(core.rho_ext + z0t);
  return log_of_max_form(BoundKind::kRainsGeometric, level,
                         solve(core.prog, opts));
}

BoundResult rains_state_geometric(const DensityOperator& rho, int dim_a,
                                  int dim_b, int level,
                                  const SolveOptions& opts) {
  check_level(level);
  if (dim_a < 1 || dim_b < 1 || dim_a * dim_b != rho.dim())
    throw std::invalid_argument(
        "bounds: state dimension must equal dim_a * dim_b");
  const int d = rho.dim();
  ConicProgram prog;
  const VarId n0 = prog.add_variable("n0", VarDomain::kHermitian, d);
  const GeomeanEpigraph epi =
      add_geomean_epigraph(prog, rho.matrix(), prog.var(n0), level);
  const VarId y = prog.add_variable("Y", VarDomain::kHermitian, d);
  const VarId x = prog.add_variable("X", VarDomain::kHermitian, d);
  prog.add_defining_equality(
      x, partial_transpose(prog.var(n0), {dim_a, dim_b}, {false, true}) +
             prog.var(y));
  prog.add_psd(prog.var(x));
  prog.add_psd(prog.var(y));
  prog.add_nonneg(ScalarExpr(1.0) - trace(prog.var(x)) -
                  trace(prog.var(y)));
  prog.minimize(trace(epi.head));
  return log_of_objective(BoundKind::kRainsStateGeometric, level,
                          solve(prog, opts), std::pow(2.0, level));
}

BoundResult theta_info_geometric(const QuantumChannel& n, int level,
                                 const SolveOptions& opts) {
  check_level(level);
  const int da = n.dim_a(), db = n.dim_b();
  const std::vector<int> dims{da, db};
  ChainCore core = make_chain_core(n.choi(), dims, {true, false}, level);
  ConicProgram& prog = core.prog;
  const VarId r = prog.add_variable("R", VarDomain::kHermitian, da * db);
  const MatExpr n0t =
      partial_transpose(prog.var(core.n0), dims, {false, true});
  prog.add_psd(prog.var(r) - n0t);
  prog.add_psd(prog.var(r) + n0t);
  prog.add_psd(MatExpr(identity(da)) -
               partial_trace(prog.var(r), dims, {true, false}));
  return log_of_objective(BoundKind::kThetaInfoGeometric, level,
                          solve(prog, opts), std::pow(2.0, level));
}

BoundResult bi_holevo_werner(const BidirectionalChannel& n,
                             const SolveOptions& opts) {
  const auto& [a1, b1, a2, b2] = n.dims();
  const std::vector<int> dims{a1, b1, a2, b2};
  const int d = a1 * b1 * a2 * b2, d_in = a1 * b1;
  const ComplexMatrix jt =
      partial_transpose(n.choi(), dims, {false, true, false, true});
  ConicProgram prog;
  const VarId yop = prog.add_variable("Y", VarDomain::kHermitian, d);
  const VarId y = prog.add_variable("y", VarDomain::kRealScalar, 1);
  prog.add_psd(prog.var(yop) - MatExpr(jt));
  prog.add_psd(prog.var(yop) + MatExpr(jt));
  prog.add_psd(kron(prog.var(y), identity(d_in)) -
               partial_trace(prog.var(yop), dims,
                             {true, true, false, false}));
  prog.minimize(prog.scalar(y));
  return log_of_objective(BoundKind::kBiHolevoWerner, kNoLevel,
                          solve(prog, opts), 1.0);
}

BoundResult bi_max_rains(const BidirectionalChannel& n,
                         const SolveOptions& opts) {
  const auto& [a1, b1, a2, b2] = n.dims();
  const std::vector<int> dims{a1, b1, a2, b2};
  const int d = a1 * b1 * a2 * b2, d_in = a1 * b1;
  ConicProgram prog;
  const VarId v = prog.add_variable("V", VarDomain::kHermitian, d);
  const VarId y = prog.add_variable("Y", VarDomain::kHermitian, d);
  const VarId mu = prog.add_variable("mu", VarDomain::kRealScalar, 1);
  prog.add_psd(prog.var(v));
  prog.add_psd(prog.var(y));
  prog.add_psd(partial_transpose(prog.var(v) - prog.var(y), dims,
                                 {false, true, false, true}) -
               MatExpr(n.choi()));
  prog.add_psd(kron(prog.var(mu), identity(d_in)) -
               partial_trace(prog.var(v) + prog.var(y), dims,
                             {true, true, false, false}));
  prog.minimize(prog.scalar(mu));
  return log_of_objective(BoundKind::kBiMaxRains, kNoLevel, solve(prog, opts),
                          1.0);
}

BoundResult bi_theta_geometric(const BidirectionalChannel& n, int level,
                               const SolveOptions& opts) {
  check_level(level);
  const auto& [a1, b1, a2, b2] = n.dims();
  const std::vector<int> dims{a1, b1, a2, b2};
  const int d = a1 * b1 * a2 * b2, d_in = a1 * b1;
  ChainCore core =
      make_chain_core(n.choi(), dims, {true, true, false, false}, level);
  ConicProgram& prog = core.prog;
  const VarId r = prog.add_variable("R", VarDomain::kHermitian, d);
  const MatExpr n0t = partial_transpose(prog.var(core.n0), dims,
                                        {false, true, false, true});
  prog.add_psd(prog.var(r) - n0t);
  prog.add_psd(prog.var(r) + n0t);
  prog.add_psd(MatExpr(identity(d_in)) -
               partial_trace(prog.var(r), dims, {true, true, false, false}));
  return log_of_objective(BoundKind::kBiThetaGeometric, level,
                          solve(prog, opts), std::pow(2.0, level));
}

BoundResult e_max(const QuantumChannel& n, const SolveOptions& opts) {
  check_sep_dims(n, "e_max");
  const int da = n.dim_a(), db = n.dim_b();
  ConicProgram prog;
  const VarId yop = prog.add_variable("Y", VarDomain::kHermitian, da * db);
  const VarId mu = prog.add_variable("mu", VarDomain::kRealScalar, 1);
  prog.add_psd(prog.var(yop) - MatExpr(n.choi()));
  prog.add_psd(prog.var(yop));
  prog.add_psd(partial_transpose(prog.var(yop), {da, db}, {false, true}));
  prog.add_psd(kron(prog.var(mu), identity(da)) -
               partial_trace(prog.var(yop), {da, db}, {true, false}));
  prog.minimize(prog.scalar(mu));
  return log_of_objective(BoundKind::kEMax, kNoLevel, solve(prog, opts), 1.0);
}

BoundResult e_max_dual_form(const QuantumChannel& n, const SolveOptions& opts) {
  check_sep_dims(n, "e_max_dual_form");
  const int da = n.dim_a(), db = n.dim_b();
  ConicProgram prog;
  const VarId p = prog.add_variable("P", VarDomain::kHermitian, da * db);
  const VarId q = prog.add_variable("Q", VarDomain::kHermitian, da * db);
  const VarId rho = prog.add_variable("rho", VarDomain::kHermitian, da);
  prog.add_psd(prog.var(p));
  prog.add_psd(prog.var(q));
  prog.add_psd(prog.var(rho));
  prog.add_psd(kron(prog.var(rho), identity(db)) - prog.var(p) -
               partial_transpose(prog.var(q), {da, db}, {false, true}));
  prog.add_equality(trace(prog.var(rho)), ScalarExpr(1.0));
  prog.maximize(trace_product(n.choi(), prog.var(p)));
  return log_of_objective(BoundKind::kEMaxDualForm, kNoLevel,
                          solve(prog, opts), 1.0);
}

BoundResult e_alpha(const QuantumChannel& n, int level,
                    const SolveOptions& opts) {
  check_level(level);
  check_sep_dims(n, "e_alpha");
  const int da = n.dim_a(), db = n.dim_b();
  MaxFormCore core = make_max_form_core(n.choi(), da, db, level);
  const VarId y =
      core.prog.add_variable("bp_y", VarDomain::kHermitian, da * db);
  core.prog.add_psd(core.prog.var(y));
  core.prog.add_psd(core.rho_ext - core.z0_herm -
                    partial_transpose(core.prog.var(y), {da, db},
                                      {false, true}));
  return log_of_max_form(BoundKind::kEAlpha, level, solve(core.prog, opts));
}

BoundResult e_alpha_sigma(const QuantumChannel& n, int level,
                          const SolveOptions& opts) {
  check_level(level);
  check_sep_dims(n, "e_alpha_sigma");
  const int da = n.dim_a(), db = n.dim_b();
  const std::vector<int> dims{da, db};
  ChainCore core = make_chain_core(n.choi(), dims, {true, false}, level);
  ConicProgram& prog = core.prog;
  prog.add_psd(prog.var(core.n0));
  prog.add_psd(partial_transpose(prog.var(core.n0), dims, {false, true}));
  prog.add_psd(MatExpr(identity(da)) -
               partial_trace(prog.var(core.n0), dims, {true, false}));
  return log_of_objective(BoundKind::kEAlphaSigma, level, solve(prog, opts),
                          std::pow(2.0, level));
}

BoundResult c_beta(const QuantumChannel& n, const SolveOptions& opts) {
  const int da = n.dim_a(), db = n.dim_b();
  const std::vector<int> dims{da, db};
  const ComplexMatrix jt =
      partial_transpose(n.choi(), da, db, Subsystem::B);
  ConicProgram prog;
  const VarId r = prog.add_variable("R", VarDomain::kHermitian, da * db);
  const VarId s = prog.add_variable("S", VarDomain::kHermitian, db);
  const MatExpr rt = partial_transpose(prog.var(r), dims, {false, true});
  const MatExpr s_ext = kron(identity(da), prog.var(s));
  prog.add_psd(prog.var(r) - MatExpr(jt));
  prog.add_psd(prog.var(r) + MatExpr(jt));
  prog.add_psd(s_ext - rt);
  prog.add_psd(s_ext + rt);
  prog.minimize(trace(prog.var(s)));
  return log_of_objective(BoundKind::kCBeta, kNoLevel, solve(prog, opts), 1.0);
}

BoundResult c_zeta(const QuantumChannel& n, const SolveOptions& opts) {
  const int da = n.dim_a(), db = n.dim_b();
  const std::vector<int> dims{da, db};
  ConicProgram prog;
  const VarId k = prog.add_variable("K", VarDomain::kHermitian, da * db);
  const VarId s = prog.add_variable("S", VarDomain::kHermitian, db);
  const MatExpr kt = partial_transpose(prog.var(k), dims, {false, true});
  const MatExpr s_ext = kron(identity(da), prog.var(s));
  prog.add_psd(prog.var(k) - MatExpr(n.choi()));
  prog.add_psd(s_ext - kt);
  prog.add_psd(s_ext + kt);
  prog.minimize(trace(prog.var(s)));
  return log_of_objective(BoundKind::kCZeta, kNoLevel, solve(prog, opts), 1.0);
}

BoundResult upsilon_max(const QuantumChannel& n, const SolveOptions& opts) {
  const int da = n.dim_a(), db = n.dim_b();
  const std::vector<int> dims{da, db};
  ConicProgram prog;
  const VarId k = prog.add_variable("K", VarDomain::kHermitian, da * db);
  const VarId r = prog.add_variable("R", VarDomain::kHermitian, da * db);
  const VarId s = prog.add_variable("S", VarDomain::kHermitian, db);
  const MatExpr kt = partial_transpose(prog.var(k), dims, {false, true});
  const MatExpr rt = partial_transpose(prog.var(r), dims, {false, true});
  const MatExpr s_ext = kron(identity(da), prog.var(s));
  prog.add_psd(prog.var(k) - MatExpr(n.choi()));
  prog.add_psd(prog.var(r) - kt);
  prog.add_psd(prog.var(r) + kt);
  prog.add_psd(s_ext - rt);
  prog.add_psd(s_ext + rt);
  prog.minimize(trace(prog.var(s)));
  return log_of_objective(BoundKind::kUpsilonMax, kNoLevel, solve(prog, opts),
                          1.0);
}

BoundResult upsilon_geometric(const QuantumChannel& n, int level,
                              const SolveOptions& opts) {
  check_level(level);
  const int da = n.dim_a(), db = n.dim_b();
  const std::vector<int> dims{da, db};
  ChainCore core = make_chain_core(n.choi(), dims, {true, false}, level);
  ConicProgram& prog = core.prog;
  const VarId r = prog.add_variable("R", VarDomain::kHermitian, da * db);
  const VarId s = prog.add_variable("S", VarDomain::kHermitian, db);
  const MatExpr n0t =
      partial_transpose(prog.var(core.n0), dims, {false, true});
  const MatExpr rt = partial_transpose(prog.var(r), dims, {false, true});
  const MatExpr s_ext = kron(identity(da), prog.var(s));
  prog.add_psd(prog.var(r) - n0t);
  prog.add_psd(prog.var(r) + n0t);
  prog.add_psd(s_ext - rt);
  prog.add_psd(s_ext + rt);
  prog.add_nonneg(ScalarExpr(1.0) - trace(prog.var(s)));
  return log_of_objective(BoundKind::kUpsilonGeometric, level,
                          solve(prog, opts), std::pow(2.0, level));
}

DivergenceValue discrimination_bound(const QuantumChannel& n,
                                     const QuantumChannel& m, double alpha) {
  return channel_geometric_divergence(n, m, alpha);
}

}  // namespace qi
