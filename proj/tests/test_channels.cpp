#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "qi/channels.hpp"
#include "qi/divergences.hpp"
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

// Random channel from a Stinespring isometry with the given environment size.
QuantumChannel random_channel(std::mt19937_64& rng, int dim_a, int dim_b,
                              int env) {
  ComplexMatrix g = random_gaussian(rng, dim_b * env, dim_a);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix v =
      qr.householderQ() * ComplexMatrix::Identity(dim_b * env, dim_a);
  std::vector<ComplexMatrix> kraus;
  for (int k = 0; k < env; ++k) kraus.push_back(v.block(k * dim_b, 0, dim_b, dim_a));
  return from_kraus(kraus);
}

// Mix a channel toward the fully depolarizing one; keeps the Choi full rank.
QuantumChannel depolarize_choi(const QuantumChannel& n, double eps) {
  int da = n.dim_a(), db = n.dim_b();
  ComplexMatrix mixed = ComplexMatrix::Identity(da * db, da * db) / db;
  ComplexMatrix j = (1.0 - eps) * n.choi() + eps * mixed;
  return QuantumChannel(da, db, std::move(j), n.kind());
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

ComplexMatrix basis_matrix(int dim, int i, int j) {
  ComplexMatrix e = ComplexMatrix::Zero(dim, dim);
  e(i, j) = 1.0;
  return e;
}

// Choi built directly from the map action on basis matrices.
ComplexMatrix choi_from_action(
    int dim_a, int dim_b,
    const std::function<ComplexMatrix(const ComplexMatrix&)>& action) {
  ComplexMatrix j = ComplexMatrix::Zero(dim_a * dim_b, dim_a * dim_b);
  for (int i = 0; i < dim_a; ++i)
    for (int k = 0; k < dim_a; ++k) {
      ComplexMatrix out = action(basis_matrix(dim_a, i, k));
      j.block(i * dim_b, k * dim_b, dim_b, dim_b) = out;
    }
  return j;
}

}  // namespace

TEST_CASE("channel family invariants") {
  std::vector<QuantumChannel> zoo{
      identity_channel(2),     identity_channel(3),
      depolarizing(2, 0.3),    depolarizing(3, 0.7),
      erasure(0.4),            dephasing(0.25),
      dephrasure(0.3, 0.1),    gad(0.5, 0.2),
      qutrit_t_depolarizing(0.2)};
  for (const auto& n : zoo) {
    ComplexMatrix marginal =
        partial_trace(n.choi(), n.dim_a(), n.dim_b(), Subsystem::A);
    CHECK(max_abs_diff(marginal,
                       ComplexMatrix::Identity(n.dim_a(), n.dim_a())) < 1e-9);
    CHECK(eigh(n.choi()).eigenvalues.minCoeff() > -1e-9);
  }
}

TEST_CASE("depolarizing extremes") {
  QuantumChannel full = depolarizing(2, 1.0);
  CHECK(max_abs_diff(full.choi(), ComplexMatrix(ComplexMatrix::Identity(4, 4) / 2.0)) <
        1e-14);
  QuantumChannel none = depolarizing(2, 0.0);
  CHECK(max_abs_diff(none.choi(), identity_channel(2).choi()) < 1e-14);
}

TEST_CASE("erasure embeds isometrically at p=0") {
  QuantumChannel e0 = erasure(0.0);
  CHECK(e0.dim_b() == 3);
  // The p=0 Choi is the projector onto the embedded entangled vector.
  ComplexMatrix phi = ComplexMatrix::Zero(6, 1);
  phi(0, 0) = 1.0;  // |0>|0>
  phi(4, 0) = 1.0;  // |1>|1>
  CHECK(max_abs_diff(e0.choi(), ComplexMatrix(phi * phi.adjoint())) < 1e-12);

  QuantumChannel e1 = erasure(1.0);
  std::mt19937_64 rng(11);
  auto rho = random_state(rng, 2);
  ComplexMatrix out = apply(e1, rho).matrix();
  CHECK(std::abs(out(2, 2) - Complex(1.0, 0.0)) < 1e-12);
}

TEST_CASE("gad kraus completeness and known marginal") {
  for (double gamma : {0.0, 0.3, 0.75, 1.0})
    for (double n : {0.0, 0.5, 1.0}) {
      QuantumChannel c = gad(gamma, n);
      ComplexMatrix marginal =
          partial_trace(c.choi(), 2, 2, Subsystem::A);
      CHECK(max_abs_diff(marginal, ComplexMatrix::Identity(2, 2)) < 1e-12);
    }
}

TEST_CASE("apply basics") {
  std::mt19937_64 rng(11001);
  auto rho = random_state(rng, 2);
  CHECK(max_abs_diff(apply(identity_channel(2), rho).matrix(), rho.matrix()) <
        1e-13);

  double p = 0.35;
  ComplexMatrix expect =
      (1.0 - p) * rho.matrix() + (p / 2.0) * ComplexMatrix::Identity(2, 2);
  CHECK(max_abs_diff(apply(depolarizing(2, p), rho).matrix(), expect) < 1e-13);

  // Choi contraction agrees with direct Kraus application.
  QuantumChannel c = gad(0.4, 0.3);
  ComplexMatrix a1 = ComplexMatrix::Zero(2, 2), a2 = ComplexMatrix::Zero(2, 2),
                a3 = ComplexMatrix::Zero(2, 2), a4 = ComplexMatrix::Zero(2, 2);
  double gamma = 0.4, n = 0.3;
  a1(0, 0) = std::sqrt(1 - n);
  a1(1, 1) = std::sqrt(1 - n) * std::sqrt(1 - gamma);
  a2(0, 1) = std::sqrt(gamma * (1 - n));
  a3(0, 0) = std::sqrt(n) * std::sqrt(1 - gamma);
  a3(1, 1) = std::sqrt(n);
  a4(1, 0) = std::sqrt(gamma * n);
  ComplexMatrix direct = ComplexMatrix::Zero(2, 2);
  for (const auto& k : {a1, a2, a3, a4}) direct += k * rho.matrix() * k.adjoint();
  CHECK(max_abs_diff(apply(c, rho).matrix(), direct) < 1e-12);

  // Acting on the A factor of a bipartite state preserves the R marginal.
  auto rho_ra = random_state(rng, 4);
  DensityOperator out = apply(depolarizing(2, 0.5), rho_ra, 2);
  CHECK(max_abs_diff(partial_trace(out.matrix(), 2, 2, Subsystem::A),
                     partial_trace(rho_ra.matrix(), 2, 2, Subsystem::A)) < 1e-12);
}

TEST_CASE("compose and tensor") {
  std::mt19937_64 rng(11002);
  QuantumChannel n = gad(0.3, 0.1);
  QuantumChannel composed_id = compose(identity_channel(2), n);
  CHECK(max_abs_diff(composed_id.choi(), n.choi()) < 1e-14);

  // Composition Choi matches state-by-state application on a basis.
  QuantumChannel z = dephasing(0.2);
  QuantumChannel a = gad(0.2, 0.0);
  QuantumChannel za = compose(z, a);
  ComplexMatrix oracle = choi_from_action(2, 2, [&](const ComplexMatrix& e) {
    return apply_to_block(z, apply_to_block(a, e, 1), 1);
  });
  CHECK(max_abs_diff(za.choi(), oracle) < 1e-12);

  QuantumChannel t = tensor(gad(0.3, 0.1), dephrasure(0.2, 0.1));
  CHECK(t.dim_a() == 4);
  CHECK(t.dim_b() == 6);
  // Tensor acts factor-wise on product states.
  auto r1 = random_state(rng, 2);
  auto r2 = random_state(rng, 2);
  ComplexMatrix lhs = apply(t, DensityOperator(kron(r1.matrix(), r2.matrix()))).matrix();
  ComplexMatrix rhs = kron(apply(gad(0.3, 0.1), r1).matrix(),
                           apply(dephrasure(0.2, 0.1), r2).matrix());
  CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("bidirectional swap dephase") {
  BidirectionalChannel pure = make_bidirectional_swap_dephase(1.0, 1.234);
  ComplexMatrix swap = ComplexMatrix::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
  ComplexMatrix swap_choi = choi_from_action(
      4, 4, [&](const ComplexMatrix& e) { return ComplexMatrix(swap * e * swap); });
  CHECK(max_abs_diff(pure.choi(), swap_choi) < 1e-12);

  BidirectionalChannel zero_phase = make_bidirectional_swap_dephase(0.37, 0.0);
  CHECK(max_abs_diff(zero_phase.choi(), swap_choi) < 1e-12);

  double p = 0.5, phi = std::numbers::pi;
  BidirectionalChannel mixed = make_bidirectional_swap_dephase(p, phi);
  ComplexMatrix u = ComplexMatrix::Zero(4, 4);
  u(0, 0) = 1.0;
  u(1, 1) = u(2, 2) = std::exp(Complex(0.0, phi));
  u(3, 3) = std::exp(Complex(0.0, 2.0 * phi));
  ComplexMatrix oracle = choi_from_action(4, 4, [&](const ComplexMatrix& e) {
    ComplexMatrix s = swap * e * swap;
    return ComplexMatrix(p * s + (1.0 - p) * u * s * u.adjoint());
  });
  CHECK(max_abs_diff(mixed.choi(), oracle) < 1e-12);

  ComplexMatrix marginal = partial_trace(mixed.choi(), 4, 4, Subsystem::A);
  CHECK(max_abs_diff(marginal, ComplexMatrix::Identity(4, 4)) < 1e-12);
}

TEST_CASE("channel divergences: self, ordering, depolarizing pair") {
  QuantumChannel n = gad(0.35, 0.2);
  CHECK(channel_geometric_divergence(n, n, 1.5).bits() ==
        doctest::Approx(0.0).epsilon(1e-10));
  CHECK(channel_dmax(n, n).bits() == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(std::abs(channel_bs_divergence(n, n).bits()) < 1e-9);

  QuantumChannel d1 = depolarizing(2, 0.1);
  QuantumChannel d2 = depolarizing(2, 0.2);
  double bs = channel_bs_divergence(d1, d2).bits();
  double geo15 = channel_geometric_divergence(d1, d2, 1.5).bits();
  double geo2 = channel_geometric_divergence(d1, d2, 2.0).bits();
  double dmax = channel_dmax(d1, d2).bits();
  CHECK(std::isfinite(bs));
  CHECK(bs <= geo15 + 1e-9);
  CHECK(geo15 <= geo2 + 1e-9);
  CHECK(geo2 <= dmax + 1e-9);
  CHECK(dmax > 0.0);
}

TEST_CASE("channel divergence ordering on random pairs") {
  std::mt19937_64 rng(11003);
  for (int trial = 0; trial < 10; ++trial) {
    QuantumChannel n = random_channel(rng, 2, 2, 2);
    QuantumChannel m = depolarize_choi(random_channel(rng, 2, 2, 2), 0.3);
    double bs = channel_bs_divergence(n, m).bits();
    double geo = channel_geometric_divergence(n, m, 1.5).bits();
    double dmax = channel_dmax(n, m).bits();
    CHECK(bs <= geo + 1e-8);
    CHECK(geo <= dmax + 1e-8);
  }
}

TEST_CASE("geometric channel divergence is additive under tensor") {
  std::mt19937_64 rng(11004);
  for (int trial = 0; trial < 5; ++trial) {
    QuantumChannel n1 = random_channel(rng, 2, 2, 2);
    QuantumChannel n2 = random_channel(rng, 2, 2, 2);
    QuantumChannel m1 = depolarize_choi(n1, 0.25);
    QuantumChannel m2 = depolarize_choi(n2, 0.4);
    for (double alpha : {1.25, 2.0}) {
      double joint =
          channel_geometric_divergence(tensor(n1, n2), tensor(m1, m2), alpha)
              .bits();
      double split = channel_geometric_divergence(n1, m1, alpha).bits() +
                     channel_geometric_divergence(n2, m2, alpha).bits();
      CHECK(std::abs(joint - split) < 1e-8);
    }
  }
}

TEST_CASE("chain rule for the geometric channel divergence") {
  std::mt19937_64 rng(11005);
  for (int trial = 0; trial < 10; ++trial) {
    auto rho = random_state(rng, 4);
    auto sigma = random_state(rng, 4);
    QuantumChannel n = random_channel(rng, 2, 2, 2);
    QuantumChannel m = depolarize_choi(random_channel(rng, 2, 2, 2), 0.3);
    for (double alpha : {1.25, 2.0}) {
      double state_div = geometric_renyi(rho, sigma, alpha).bits();
      double chan_div = channel_geometric_divergence(n, m, alpha).bits();
      DensityOperator out_n = apply(n, rho, 2);
      ComplexMatrix out_m_raw = apply_to_block(m, sigma.matrix(), 2);
      auto out_m = DensityOperator::subnormalized(
          ComplexMatrix(0.5 * (out_m_raw + out_m_raw.adjoint())));
      double after = geometric_renyi(out_n, out_m, alpha).bits();
      CHECK(after <= state_div + chan_div + 1e-8);
    }
  }
}

TEST_CASE("sub-additivity under composition") {
  std::mt19937_64 rng(11006);
  for (int trial = 0; trial < 10; ++trial) {
    QuantumChannel n1 = random_channel(rng, 2, 2, 2);
    QuantumChannel n2 = random_channel(rng, 2, 2, 2);
    QuantumChannel m1 = depolarize_choi(random_channel(rng, 2, 2, 2), 0.3);
    QuantumChannel m2 = depolarize_choi(random_channel(rng, 2, 2, 2), 0.3);
    for (double alpha : {1.5, 2.0}) {
      double composed = channel_geometric_divergence(compose(n2, n1),
                                                     compose(m2, m1), alpha)
                            .bits();
      double split = channel_geometric_divergence(n1, m1, alpha).bits() +
                     channel_geometric_divergence(n2, m2, alpha).bits();
      CHECK(composed <= split + 1e-8);
    }
  }
}

TEST_CASE("support violation yields the infinite sentinel") {
  // Replacer channels at orthogonal pure states have orthogonal Choi supports.
  ComplexMatrix zero = ComplexMatrix::Zero(2, 2);
  zero(0, 0) = 1.0;
  ComplexMatrix one = ComplexMatrix::Zero(2, 2);
  one(1, 1) = 1.0;
  QuantumChannel rz = replacer(DensityOperator(zero));
  QuantumChannel ro = replacer(DensityOperator(one));
  CHECK(channel_geometric_divergence(rz, ro, 2.0).is_infinite());
  CHECK(channel_dmax(rz, ro).is_infinite());
  CHECK(channel_bs_divergence(rz, ro).is_infinite());
}

TEST_CASE("channel spec parsing") {
  QuantumChannel g = parse_channel_spec("kind=gad gamma=0.3 N=0.5");
  CHECK(max_abs_diff(g.choi(), gad(0.3, 0.5).choi()) == 0.0);

  QuantumChannel d = parse_channel_spec("kind=depolarizing d=3 p=0.25");
  CHECK(max_abs_diff(d.choi(), depolarizing(3, 0.25).choi()) == 0.0);

  QuantumChannel nested = parse_channel_spec(
      "kind=compose first={kind=gad gamma=0.2 N=0} second={kind=dephasing p=0.3}");
  CHECK(max_abs_diff(nested.choi(), compose(dephasing(0.3), gad(0.2, 0.0)).choi()) ==
        0.0);

  QuantumChannel rep = parse_channel_spec("kind=replacer diag=0.5,0.5");
  CHECK(rep.dim_a() == 2);

  CHECK_THROWS_AS(parse_channel_spec("kind=unknown"), std::invalid_argument);
  CHECK_THROWS_AS(parse_channel_spec("kind=gad gamma=0.3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_channel_spec("kind=gad gamma=2 N=0"), std::invalid_argument);
}
