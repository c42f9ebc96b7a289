#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qi/linalg.hpp"

using namespace qi;

namespace {

ComplexMatrix random_hermitian(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = Complex(gauss(rng), gauss(rng));
  return ComplexMatrix(0.5 * (m + m.adjoint()));
}

ComplexMatrix random_psd(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ComplexMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = Complex(gauss(rng), gauss(rng));
  return ComplexMatrix(m * m.adjoint());
}

ComplexMatrix random_density(std::mt19937_64& rng, int dim) {
  ComplexMatrix p = random_psd(rng, dim);
  return ComplexMatrix(p / p.trace().real());
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

ComplexMatrix pauli_x() {
  ComplexMatrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

ComplexMatrix pauli_z() {
  ComplexMatrix z(2, 2);
  z << 1, 0, 0, -1;
  return z;
}

}  // namespace

TEST_CASE("eigh orders descending and reconstructs") {
  EighResult r = eigh(pauli_x());
  CHECK(r.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(r.eigenvalues(1) == doctest::Approx(-1.0));
  const double s = 1.0 / std::sqrt(2.0);
  // Eigenvectors are defined up to phase; compare projectors.
  ComplexMatrix v0 = r.eigenvectors.col(0) * r.eigenvectors.col(0).adjoint();
  ComplexMatrix p0(2, 2);
  p0 << s * s, s * s, s * s, s * s;
  CHECK(max_abs_diff(v0, p0) < 1e-12);

  ComplexMatrix d(2, 2);
  d << 3, 0, 0, 1;
  EighResult rd = eigh(d);
  CHECK(rd.eigenvalues(0) == doctest::Approx(3.0));
  CHECK(rd.eigenvalues(1) == doctest::Approx(1.0));
}

TEST_CASE("eigh reconstruction on random Hermitians") {
  std::mt19937_64 rng(7001);
  for (int trial = 0; trial < 100; ++trial) {
    int dim = 2 + static_cast<int>(rng() % 15);
    ComplexMatrix h = random_hermitian(rng, dim);
    EighResult r = eigh(h);
    ComplexMatrix rebuilt = r.eigenvectors *
                            r.eigenvalues.cast<Complex>().asDiagonal() *
                            r.eigenvectors.adjoint();
    CHECK(max_abs_diff(rebuilt, h) <= 1e-9 * dim);
    for (int i = 0; i + 1 < dim; ++i)
      CHECK(r.eigenvalues(i) >= r.eigenvalues(i + 1));
  }
}

TEST_CASE("kron basics") {
  ComplexMatrix i2 = ComplexMatrix::Identity(2, 2);
  CHECK(max_abs_diff(kron(i2, i2), ComplexMatrix::Identity(4, 4)) == 0.0);

  ComplexMatrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 2;
  b << 3, 0, 0, 4;
  ComplexMatrix expect(4, 4);
  expect.setZero();
  expect(0, 0) = 3;
  expect(1, 1) = 4;
  expect(2, 2) = 6;
  expect(3, 3) = 8;
  CHECK(max_abs_diff(kron(a, b), expect) == 0.0);

  ComplexMatrix xz = kron(pauli_x(), pauli_z());
  ComplexMatrix xz_expect(4, 4);
  xz_expect.setZero();
  xz_expect(0, 2) = 1;
  xz_expect(1, 3) = -1;
  xz_expect(2, 0) = 1;
  xz_expect(3, 1) = -1;
  CHECK(max_abs_diff(xz, xz_expect) == 0.0);
}

TEST_CASE("partial trace on products and entangled states") {
  std::mt19937_64 rng(7002);
  ComplexMatrix a = random_density(rng, 3);
  ComplexMatrix b = random_density(rng, 4);
  ComplexMatrix ab = kron(a, b);
  CHECK(max_abs_diff(partial_trace(ab, 3, 4, Subsystem::A), a) < 1e-12);
  CHECK(max_abs_diff(partial_trace(ab, 3, 4, Subsystem::B), b) < 1e-12);

  // Unnormalized maximally entangled pair: both marginals are the identity.
  int d = 3;
  ComplexMatrix phi = ComplexMatrix::Zero(d * d, 1);
  for (int i = 0; i < d; ++i) phi(i * d + i, 0) = 1;
  ComplexMatrix proj = phi * phi.adjoint();
  CHECK(max_abs_diff(partial_trace(proj, d, d, Subsystem::A),
                     ComplexMatrix::Identity(d, d)) < 1e-12);
  CHECK(max_abs_diff(partial_trace(proj, d, d, Subsystem::B),
                     ComplexMatrix::Identity(d, d)) < 1e-12);

  // Index oracle: (tr_B M)[i,j] = sum_k M[(i,k),(j,k)].
  ComplexMatrix m = random_hermitian(rng, 6);
  ComplexMatrix tb = partial_trace(m, 2, 3, Subsystem::A);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Complex s = 0;
      for (int k = 0; k < 3; ++k) s += m(i * 3 + k, j * 3 + k);
      CHECK(std::abs(tb(i, j) - s) < 1e-13);
    }
}

TEST_CASE("partial trace of a product scales by the traced factor") {
  std::mt19937_64 rng(7003);
  for (int trial = 0; trial < 20; ++trial) {
    int da = 2 + static_cast<int>(rng() % 3);
    int db = 2 + static_cast<int>(rng() % 3);
    ComplexMatrix a = random_hermitian(rng, da);
    ComplexMatrix b = random_hermitian(rng, db);
    ComplexMatrix lhs = partial_trace(kron(a, b), da, db, Subsystem::A);
    ComplexMatrix rhs = a * b.trace();
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("partial transpose") {
  std::mt19937_64 rng(7004);
  ComplexMatrix a = random_density(rng, 2);
  ComplexMatrix b = random_density(rng, 3);
  ComplexMatrix ab = kron(a, b);
  CHECK(max_abs_diff(partial_transpose(ab, 2, 3, Subsystem::B),
                     kron(a, b.transpose())) < 1e-13);

  // PT of the unnormalized maximally entangled projector is the swap.
  ComplexMatrix phi = ComplexMatrix::Zero(4, 1);
  phi(0, 0) = 1;
  phi(3, 0) = 1;
  ComplexMatrix proj = phi * phi.adjoint();
  ComplexMatrix swapped = partial_transpose(proj, 2, 2, Subsystem::B);
  ComplexMatrix swap_expect(4, 4);
  swap_expect.setZero();
  swap_expect(0, 0) = 1;
  swap_expect(1, 2) = 1;
  swap_expect(2, 1) = 1;
  swap_expect(3, 3) = 1;
  CHECK(max_abs_diff(swapped, swap_expect) < 1e-13);
  // Swap has eigenvalues +1 (x3) and -1; the normalized state gives 2.
  CHECK(trace_norm(swapped) == doctest::Approx(4.0));
  CHECK(trace_norm(ComplexMatrix(0.5 * swapped)) == doctest::Approx(2.0));

  ComplexMatrix m = random_hermitian(rng, 6);
  ComplexMatrix twice =
      partial_transpose(partial_transpose(m, 2, 3, Subsystem::B), 2, 3,
                        Subsystem::B);
  CHECK(max_abs_diff(twice, m) == 0.0);
}

TEST_CASE("permute systems") {
  std::mt19937_64 rng(7005);
  ComplexMatrix a = random_density(rng, 2);
  ComplexMatrix b = random_density(rng, 3);
  ComplexMatrix c = random_density(rng, 2);
  ComplexMatrix abc = kron(kron(a, b), c);
  ComplexMatrix cab = kron(kron(c, a), b);
  CHECK(max_abs_diff(permute_systems(abc, {2, 3, 2}, {2, 0, 1}), cab) < 1e-13);
}

TEST_CASE("matrix functions on psd inputs") {
  std::mt19937_64 rng(7006);
  ComplexMatrix p = random_psd(rng, 4);
  ComplexMatrix s = matrix_sqrt_psd(p);
  CHECK(max_abs_diff(s * s, p) < 1e-10);

  // Logarithm is natural-log on the support.
  ComplexMatrix d(2, 2);
  d.setZero();
  d(0, 0) = std::exp(2.0);
  d(1, 1) = 1.0;
  ComplexMatrix ld = matrix_log_psd(d);
  CHECK(std::abs(ld(0, 0) - Complex(2.0, 0.0)) < 1e-12);
  CHECK(std::abs(ld(1, 1)) < 1e-12);

  // Pseudo-inverse on a rank-deficient operator.
  ComplexMatrix r(2, 2);
  r.setZero();
  r(0, 0) = 4.0;
  ComplexMatrix ri = pseudo_inverse_psd(r);
  CHECK(std::abs(ri(0, 0) - Complex(0.25, 0.0)) < 1e-13);
  CHECK(std::abs(ri(1, 1)) == 0.0);

  ComplexMatrix pr = support_projector(r);
  CHECK(std::abs(pr(0, 0) - Complex(1.0, 0.0)) < 1e-13);
  CHECK(std::abs(pr(1, 1)) == 0.0);

  // Fractional and negative powers through the same eigenbasis.
  ComplexMatrix half = matrix_power_psd(p, 0.5);
  CHECK(max_abs_diff(half, s) < 1e-10);
  ComplexMatrix inv = matrix_power_psd(p, -1.0);
  CHECK(max_abs_diff(ComplexMatrix(inv * p), support_projector(p)) < 1e-9);
}

TEST_CASE("weighted geometric mean oracles") {
  std::mt19937_64 rng(7007);
  ComplexMatrix x = random_psd(rng, 4);
  for (double t : {-1.0, -0.5, 0.0, 0.25, 0.5, 1.0}) {
    CHECK(max_abs_diff(weighted_geometric_mean(x, x, t), x) < 1e-9);
  }

  ComplexMatrix d1(2, 2), d2(2, 2);
  d1.setZero();
  d2.setZero();
  d1(0, 0) = 1;
  d1(1, 1) = 2;
  d2(0, 0) = 4;
  d2(1, 1) = 3;
  ComplexMatrix g = weighted_geometric_mean(d1, d2, -1.0);
  CHECK(std::abs(g(0, 0) - Complex(0.25, 0.0)) < 1e-12);
  CHECK(std::abs(g(1, 1) - Complex(4.0 / 3.0, 0.0)) < 1e-12);

  ComplexMatrix y = random_psd(rng, 4);
  ComplexMatrix gid = weighted_geometric_mean(ComplexMatrix::Identity(4, 4), y, 0.5);
  CHECK(max_abs_diff(gid, matrix_sqrt_psd(y)) < 1e-9);
}

TEST_CASE("weighted geometric mean is multiplicative under tensor products") {
  std::mt19937_64 rng(7008);
  for (double t : {-1.0, -0.5, -0.03125, 0.5}) {
    ComplexMatrix x1 = random_psd(rng, 2), y1 = random_psd(rng, 2);
    ComplexMatrix x2 = random_psd(rng, 3), y2 = random_psd(rng, 3);
    ComplexMatrix lhs =
        weighted_geometric_mean(kron(x1, x2), kron(y1, y2), t);
    ComplexMatrix rhs = kron(weighted_geometric_mean(x1, y1, t),
                             weighted_geometric_mean(x2, y2, t));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("weighted geometric mean transformer equality") {
  std::mt19937_64 rng(7009);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double t : {-1.0, -0.5, -0.03125}) {
    for (int trial = 0; trial < 5; ++trial) {
      int dim = 2 + static_cast<int>(rng() % 3);
      ComplexMatrix x = random_psd(rng, dim);
      ComplexMatrix y = random_psd(rng, dim);
      ComplexMatrix k(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) k(i, j) = Complex(gauss(rng), gauss(rng));
      // Shift toward identity so K stays comfortably invertible.
      k = ComplexMatrix(k + 3.0 * ComplexMatrix::Identity(dim, dim));
      ComplexMatrix lhs = weighted_geometric_mean(
          ComplexMatrix(k * x * k.adjoint()), ComplexMatrix(k * y * k.adjoint()), t);
      ComplexMatrix rhs = k * weighted_geometric_mean(x, y, t) * k.adjoint();
      CHECK(max_abs_diff(lhs, rhs) <= 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("norms") {
  ComplexMatrix h(2, 2);
  h << 3, 0, 0, -5;
  CHECK(operator_norm(h) == doctest::Approx(5.0));
  CHECK(trace_norm(h) == doctest::Approx(8.0));
  CHECK(max_eigenvalue(h) == doctest::Approx(3.0));
}

TEST_CASE("validated wrappers reject bad input") {
  ComplexMatrix notherm(2, 2);
  notherm << 1, Complex(0, 1), Complex(0, 1), 1;
  CHECK_THROWS_AS(HermitianOperator{notherm}, std::invalid_argument);

  ComplexMatrix traceless(2, 2);
  traceless << 0.5, 0, 0, 0.4;
  CHECK_THROWS_AS(DensityOperator{traceless}, std::invalid_argument);
  CHECK_NOTHROW(DensityOperator::subnormalized(traceless));

  ComplexMatrix negative(2, 2);
  negative << 1.5, 0, 0, -0.5;
  CHECK_THROWS_AS(DensityOperator{negative}, std::invalid_argument);
}
