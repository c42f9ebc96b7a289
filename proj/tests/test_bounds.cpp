#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "qi/bounds.hpp"
#include "qi/channels.hpp"
#include "qi/conic.hpp"
#include "qi/linalg.hpp"

using namespace qi;

namespace {

ComplexMatrix random_gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = Complex(gauss(rng), gauss(rng));
  return m;
}

DensityOperator random_state(std::mt19937_64& rng, int dim) {
  ComplexMatrix a = random_gaussian(rng, dim, dim);
  ComplexMatrix p = a * a.adjoint() + 0.02 * ComplexMatrix::Identity(dim, dim);
  return DensityOperator(ComplexMatrix(p / p.trace().real()));
}

QuantumChannel random_channel(std::mt19937_64& rng, int dim_a, int dim_b,
                              int env) {
  ComplexMatrix g = random_gaussian(rng, dim_b * env, dim_a);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix v =
      qr.householderQ() * ComplexMatrix::Identity(dim_b * env, dim_a);
  std::vector<ComplexMatrix> kraus;
  for (int k = 0; k < env; ++k)
    kraus.push_back(v.block(k * dim_b, 0, dim_b, dim_a));
  return from_kraus(kraus);
}

// Every bound accepted by a test must come from a converged solve.
void require_optimal(const BoundResult& r) {
  REQUIRE_MESSAGE(r.report.status == SolveStatus::kOptimal, r.report.message);
  CHECK(r.report.gap <= 1e-6);
  CHECK(r.report.primal_residual <= 1e-6);
  CHECK(r.report.dual_residual <= 1e-6);
  CHECK(std::isfinite(r.bits));
}

double checked_bits(const BoundResult& r) {
  require_optimal(r);
  return r.bits;
}

QuantumChannel qubit_replacer() {
  DensityOperator mixed(ComplexMatrix(ComplexMatrix::Identity(2, 2) / 2.0));
  return replacer(mixed);
}

BidirectionalChannel embed_point_to_point(const QuantumChannel& n) {
  return BidirectionalChannel({n.dim_a(), 1, 1, n.dim_b()}, n.choi());
}

DensityOperator bell_state() {
  ComplexMatrix b = ComplexMatrix::Zero(4, 4);
  b(0, 0) = b(0, 3) = b(3, 0) = b(3, 3) = 0.5;
  return DensityOperator(std::move(b));
}

// Chain program for the channel divergence with both Choi matrices fixed,
// kept independent of the closed form it is checked against.
double divergence_chain_sdp(const QuantumChannel& n, const QuantumChannel& m,
                            int level) {
  ConicProgram prog;
  const GeomeanEpigraph epi =
      add_geomean_epigraph(prog, n.choi(), MatExpr(m.choi()), level);
  const VarId y = prog.add_variable("y", VarDomain::kRealScalar, 1);
  prog.add_psd(
      kron(prog.var(y), ComplexMatrix::Identity(n.dim_a(), n.dim_a())) -
      partial_trace(epi.head, {n.dim_a(), n.dim_b()}, {true, false}));
  prog.minimize(prog.scalar(y));
  const SolveReport rep = solve(prog, {});
  REQUIRE(rep.status == SolveStatus::kOptimal);
  return std::pow(2.0, level) * std::log2(rep.objective);
}

}  // namespace

TEST_CASE("holevo werner bound on reference channels") {
  CHECK(checked_bits(holevo_werner(identity_channel(2))) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(checked_bits(holevo_werner(qubit_replacer())) ==
        doctest::Approx(0.0).epsilon(1e-6));

  double prev = 2.0;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double v = checked_bits(holevo_werner(erasure(p)));
    CHECK(v <= prev + 1e-7);
    prev = v;
  }
  CHECK(checked_bits(holevo_werner(erasure(0.0))) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("max rains formulations agree on random channels") {
  CHECK(checked_bits(max_rains(identity_channel(2))) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(checked_bits(max_rains(qubit_replacer())) ==
        doctest::Approx(0.0).epsilon(1e-6));

  std::mt19937_64 rng(13001);
  for (int i = 0; i < 20; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, i % 2 ? 3 : 2);
    const double direct = checked_bits(max_rains(n));
    const double scaled = checked_bits(max_rains_theta_form(n));
    CHECK(std::fabs(direct - scaled) <= 1e-6);
  }
}

TEST_CASE("rains geometric bound on reference channels") {
  for (int level : {0, 2}) {
    CHECK(checked_bits(rains_geometric(qubit_replacer(), level)) ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
  CHECK(checked_bits(rains_geometric(identity_channel(2), 3)) ==
        doctest::Approx(1.0).epsilon(3e-6));

  std::mt19937_64 rng(13002);
  for (int i = 0; i < 6; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, 2);
    CHECK(checked_bits(rains_geometric(n, 3)) <=
          checked_bits(max_rains(n)) + 1e-6);
  }

  double prev = 10.0;
  for (int level : {0, 1, 2, 3, 4}) {
    const double v = checked_bits(rains_geometric(gad(0.4, 0.3), level));
    CHECK(v <= prev + 1e-7);
    prev = v;
  }

  CHECK(checked_bits(max_rains(gad(0.3, 0.3))) -
            checked_bits(rains_geometric(gad(0.3, 0.3), 5)) >
        1e-3);
}

TEST_CASE("theta information geometric sits between rains and max rains") {
  CHECK(checked_bits(theta_info_geometric(qubit_replacer(), 2)) ==
        doctest::Approx(0.0).epsilon(1e-6));
  CHECK(checked_bits(theta_info_geometric(identity_channel(2), 3)) ==
        doctest::Approx(1.0).epsilon(1e-6));

  std::mt19937_64 rng(13003);
  for (int i = 0; i < 6; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, 2);
    const double rains = checked_bits(rains_geometric(n, 3));
    const double theta = checked_bits(theta_info_geometric(n, 3));
    const double rmax = checked_bits(max_rains(n));
    CHECK(rains <= theta + 1e-6);
    CHECK(theta <= rmax + 1e-6);
  }

  double prev = 10.0;
  for (int level : {0, 1, 2, 3, 4}) {
    const double v = checked_bits(theta_info_geometric(gad(0.4, 0.3), level));
    CHECK(v <= prev + 1e-7);
    prev = v;
  }
}

TEST_CASE("state level rains bound and amortization") {
  CHECK(checked_bits(rains_state_geometric(bell_state(), 2, 2, 3)) ==
        doctest::Approx(1.0).epsilon(1e-6));

  std::mt19937_64 rng(13004);
  const DensityOperator prod(ComplexMatrix(
      kron(random_state(rng, 2).matrix(), random_state(rng, 2).matrix())));
  CHECK(std::fabs(checked_bits(rains_state_geometric(prod, 2, 2, 3))) <=
        1e-6);

  CHECK_THROWS_AS(rains_state_geometric(bell_state(), 3, 2, 2),
                  std::invalid_argument);

  // One channel use can raise the state bound by at most the channel bound:
  // omega = (id tensor N tensor id)(rho) on A' A : B' with N acting on A.
  const int level = 2;
  for (int i = 0; i < 3; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, 2);
    const QuantumChannel ext =
        tensor(tensor(identity_channel(2), n), identity_channel(2));
    const DensityOperator rho = random_state(rng, 8);
    const DensityOperator omega = apply(ext, rho);
    const double lhs = checked_bits(rains_state_geometric(omega, 2, 4, level));
    const double state = checked_bits(rains_state_geometric(rho, 4, 2, level));
    const double channel = checked_bits(theta_info_geometric(n, level));
    CHECK(lhs <= state + channel + 1e-6);
  }
}

TEST_CASE("bidirectional bounds reduce to point to point on embeddings") {
  std::mt19937_64 rng(13005);
  for (int i = 0; i < 3; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, 2);
    const BidirectionalChannel bi = embed_point_to_point(n);
    CHECK(std::fabs(checked_bits(bi_holevo_werner(bi)) -
                    checked_bits(holevo_werner(n))) <= 1e-7);
    CHECK(std::fabs(checked_bits(bi_max_rains(bi)) -
                    checked_bits(max_rains(n))) <= 1e-7);
    CHECK(std::fabs(checked_bits(bi_theta_geometric(bi, 3)) -
                    checked_bits(theta_info_geometric(n, 3))) <= 1e-7);
  }
}

TEST_CASE("bidirectional bounds on the swap family") {
  const BidirectionalChannel swap = make_bidirectional_swap_dephase(1.0, 0.0);
  CHECK(checked_bits(bi_max_rains(swap)) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(checked_bits(bi_holevo_werner(swap)) ==
        doctest::Approx(2.0).epsilon(1e-6));
  CHECK(checked_bits(bi_theta_geometric(swap, 3)) ==
        doctest::Approx(2.0).epsilon(1e-6));

  // With no dephasing the mixing parameter is invisible.
  const double base = checked_bits(
      bi_max_rains(make_bidirectional_swap_dephase(0.3, 0.0)));
  CHECK(std::fabs(base - checked_bits(bi_max_rains(
                             make_bidirectional_swap_dephase(0.8, 0.0)))) <=
        1e-7);
  CHECK(base == doctest::Approx(2.0).epsilon(1e-6));

  // Full dephasing separates the geometric bound from the max bound.
  const BidirectionalChannel sd =
      make_bidirectional_swap_dephase(0.2, std::numbers::pi);
  const double geo = checked_bits(bi_theta_geometric(sd, 5));
  const double max = checked_bits(bi_max_rains(sd));
  CHECK(geo <= max + 1e-6);
  CHECK(max - geo > 1e-3);
}

TEST_CASE("private bounds on reference channels") {
  CHECK(checked_bits(e_max(identity_channel(2))) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(checked_bits(e_max(qubit_replacer())) ==
        doctest::Approx(0.0).epsilon(1e-6));
  CHECK(checked_bits(e_alpha(qubit_replacer(), 2)) ==
        doctest::Approx(0.0).epsilon(1e-6));
  CHECK(checked_bits(e_alpha_sigma(qubit_replacer(), 2)) ==
        doctest::Approx(0.0).epsilon(1e-6));

  std::mt19937_64 rng(13006);
  for (int i = 0; i < 6; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, 2);
    const double ea = checked_bits(e_alpha(n, 3));
    CHECK(ea <= checked_bits(e_max(n)) + 1e-6);
    CHECK(ea <= checked_bits(e_alpha_sigma(n, 3)) + 1e-6);
  }

  // Entanglement-breaking relaxation strictly beats the max bound somewhere.
  CHECK(checked_bits(e_max(gad(0.5, 0.3))) -
            checked_bits(e_alpha_sigma(gad(0.5, 0.3), 5)) >
        1e-3);
}

TEST_CASE("private two form equality on random channels") {
  std::mt19937_64 rng(13007);
  for (int i = 0; i < 20; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, i % 2 ? 3 : 2);
    const double primal = checked_bits(e_max(n));
    const double dual = checked_bits(e_max_dual_form(n));
    CHECK(std::fabs(primal - dual) <= 1e-6);
  }
}

TEST_CASE("separability cone functions refuse large dimensions") {
  std::mt19937_64 rng(13008);
  const QuantumChannel wide = random_channel(rng, 2, 4, 2);
  CHECK_THROWS_AS(e_max(wide), std::invalid_argument);
  CHECK_THROWS_AS(e_max_dual_form(wide), std::invalid_argument);
  CHECK_THROWS_AS(e_alpha(wide, 2), std::invalid_argument);
  CHECK_THROWS_AS(e_alpha_sigma(wide, 2), std::invalid_argument);
}

TEST_CASE("classical bounds reproduce the damping formula") {
  for (double gamma : {0.25, 0.75}) {
    const double want = std::log2(1.0 + std::sqrt(1.0 - gamma));
    for (double nbar : {0.0, 0.5}) {
      const QuantumChannel n = gad(gamma, nbar);
      CHECK(checked_bits(c_beta(n)) == doctest::Approx(want).epsilon(1e-6));
      CHECK(checked_bits(c_zeta(n)) == doctest::Approx(want).epsilon(1e-6));
    }
  }

  std::mt19937_64 rng(13009);
  for (int i = 0; i < 6; ++i) {
    const QuantumChannel n = random_channel(rng, 2, 2, 2);
    const double um = checked_bits(upsilon_max(n));
    CHECK(um <= std::min(checked_bits(c_beta(n)), checked_bits(c_zeta(n))) +
                    1e-6);
    CHECK(checked_bits(upsilon_geometric(n, 3)) <= um + 1e-6);
  }
}

TEST_CASE("classical geometric bound approaches the erasure capacity") {
  // The finite-level value sits above 1-p and halves its excess per level;
  // level 10 lands within 1e-4 of the limit.
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double v5 = checked_bits(upsilon_geometric(erasure(p), 5));
    const double v10 = checked_bits(upsilon_geometric(erasure(p), 10));
    CHECK(v5 - (1.0 - p) >= -1e-6);
    CHECK(v5 - (1.0 - p) <= 3e-3);
    CHECK(std::fabs(v10 - (1.0 - p)) <= 1e-3);
  }
  const double dep = checked_bits(upsilon_geometric(dephrasure(0.5, 0.25), 10));
  CHECK(std::fabs(dep - 0.75) <= 1e-3);
}

TEST_CASE("upsilon geometric is sub-additive under tensor products") {
  std::mt19937_64 rng(13010);
  const QuantumChannel n1 = gad(0.3, 0.2);
  const QuantumChannel n2 = random_channel(rng, 2, 2, 2);
  const QuantumChannel joint = tensor(n1, n2);
  for (int level : {1, 2}) {
    const double sum = checked_bits(upsilon_geometric(n1, level)) +
                       checked_bits(upsilon_geometric(n2, level));
    CHECK(checked_bits(upsilon_geometric(joint, level)) <= sum + 1e-5);
  }
}

TEST_CASE("discrimination bound matches its chain program") {
  const QuantumChannel n = gad(0.8, 0.2);
  const QuantumChannel m = gad(0.7, 0.6);
  for (int level : {0, 3}) {
    const double alpha = 1.0 + std::pow(2.0, -level);
    const double closed = discrimination_bound(n, m, alpha).bits();
    CHECK(std::fabs(closed - divergence_chain_sdp(n, m, level)) <= 1e-6);
  }

  CHECK(discrimination_bound(n, n, 1.5).bits() ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(discrimination_bound(n, m, 2.0).bits() <=
        channel_dmax(n, m).bits() + 1e-9);

  // Monotone in alpha.
  double prev = -1.0;
  for (double alpha : {1.03125, 1.25, 1.5, 2.0}) {
    const double v = discrimination_bound(n, m, alpha).bits();
    CHECK(v >= prev - 1e-9);
    prev = v;
  }

  // The identity Choi has rank one, so most channels escape its support.
  CHECK(discrimination_bound(depolarizing(2, 0.5), identity_channel(2), 1.5)
            .is_infinite());
}

TEST_CASE("bound results carry their provenance") {
  const BoundResult r = theta_info_geometric(identity_channel(2), 3);
  CHECK(r.bound_kind == BoundKind::kThetaInfoGeometric);
  CHECK(r.level == 3);
  const BoundResult flat = max_rains(identity_channel(2));
  CHECK(flat.bound_kind == BoundKind::kMaxRains);
  CHECK(flat.level == kNoLevel);

  // A starved solve must surface as non-optimal with NaN bits.
  SolveOptions starved;
  starved.max_iterations = 1;
  const BoundResult bad = max_rains(identity_channel(2), starved);
  CHECK(bad.report.status != SolveStatus::kOptimal);
  CHECK(std::isnan(bad.bits));

  CHECK_THROWS_AS(theta_info_geometric(identity_channel(2), -1),
                  std::invalid_argument);
  CHECK_THROWS_AS(rains_geometric(identity_channel(2), 31),
                  std::invalid_argument);
}
