#include "qi/divergences.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qi {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void require_same_dim(const DensityOperator& rho, const DensityOperator& sigma) {
  if (rho.dim() != sigma.dim())
    throw std::invalid_argument("divergence: dimension mismatch (" +
                                std::to_string(rho.dim()) + " vs " +
                                std::to_string(sigma.dim()) + ")");
}

double log2_trace(const ComplexMatrix& m) { return std::log2(m.trace().real()); }

}  // namespace

double DivergenceValue::bits() const {
  if (infinite_) throw std::logic_error("DivergenceValue: infinite has no bits");
  return bits_;
}

bool support_contained(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
  const int dim = static_cast<int>(rho.rows());
  ComplexMatrix off = ComplexMatrix::Identity(dim, dim) - support_projector(sigma);
  return operator_norm(ComplexMatrix(off * rho * off)) <= kSupportViolationTol;
}

DivergenceValue umegaki(const DensityOperator& rho, const DensityOperator& sigma) {
  require_same_dim(rho, sigma);
  if (!support_contained(rho.matrix(), sigma.matrix()))
    return DivergenceValue::infinite();
  ComplexMatrix diff = matrix_log_psd(rho.matrix()) - matrix_log_psd(sigma.matrix());
  double nats = (rho.matrix() * diff).trace().real();
  return DivergenceValue::finite(nats / kLn2);
}

DivergenceValue max_relative(const DensityOperator& rho, const DensityOperator& sigma) {
  require_same_dim(rho, sigma);
  if (!support_contained(rho.matrix(), sigma.matrix()))
    return DivergenceValue::infinite();
  ComplexMatrix sinv_half = matrix_power_psd(sigma.matrix(), -0.5);
  double t = operator_norm(ComplexMatrix(sinv_half * rho.matrix() * sinv_half));
  return DivergenceValue::finite(std::log2(t));
}

DivergenceValue min_relative(const DensityOperator& rho, const DensityOperator& sigma) {
  require_same_dim(rho, sigma);
  double overlap = (support_projector(rho.matrix()) * sigma.matrix()).trace().real();
  if (overlap <= 0.0) return DivergenceValue::infinite();
  return DivergenceValue::finite(-std::log2(overlap));
}

DivergenceValue petz(const DensityOperator& rho, const DensityOperator& sigma,
                     double alpha) {
  require_same_dim(rho, sigma);
  if (!((alpha > 0.0 && alpha < 1.0) || (alpha > 1.0 && alpha <= 2.0)))
    throw std::invalid_argument("petz: alpha must lie in (0,1) or (1,2]");
  if (alpha > 1.0 && !support_contained(rho.matrix(), sigma.matrix()))
    return DivergenceValue::infinite();
  ComplexMatrix prod = matrix_power_psd(rho.matrix(), alpha) *
                       matrix_power_psd(sigma.matrix(), 1.0 - alpha);
  double tr = prod.trace().real();
  if (tr <= 0.0) return DivergenceValue::infinite();
  return DivergenceValue::finite(std::log2(tr) / (alpha - 1.0));
}

DivergenceValue sandwiched(const DensityOperator& rho, const DensityOperator& sigma,
                           double alpha) {
  require_same_dim(rho, sigma);
  if (alpha <= 1.0) throw std::invalid_argument("sandwiched: alpha must exceed 1");
  if (!support_contained(rho.matrix(), sigma.matrix()))
    return DivergenceValue::infinite();
  ComplexMatrix pivot = matrix_power_psd(sigma.matrix(), (1.0 - alpha) / (2.0 * alpha));
  ComplexMatrix inner = pivot * rho.matrix() * pivot;
  double tr = matrix_power_psd(ComplexMatrix(0.5 * (inner + inner.adjoint())), alpha)
                  .trace()
                  .real();
  if (tr <= 0.0) return DivergenceValue::infinite();
  return DivergenceValue::finite(std::log2(tr) / (alpha - 1.0));
}

DivergenceValue geometric_renyi(const DensityOperator& rho,
                                const DensityOperator& sigma, double alpha) {
  require_same_dim(rho, sigma);
  if (!(alpha > 1.0 && alpha <= 2.0))
    throw std::invalid_argument("geometric_renyi: alpha must lie in (1,2]");
  if (!support_contained(rho.matrix(), sigma.matrix()))
    return DivergenceValue::infinite();
  ComplexMatrix g = weighted_geometric_mean(rho.matrix(), sigma.matrix(), 1.0 - alpha);
  return DivergenceValue::finite(log2_trace(g) / (alpha - 1.0));
}

DivergenceValue belavkin_staszewski(const DensityOperator& rho,
                                    const DensityOperator& sigma) {
  require_same_dim(rho, sigma);
  if (!support_contained(rho.matrix(), sigma.matrix()))
    return DivergenceValue::infinite();
  ComplexMatrix rho_half = matrix_sqrt_psd(rho.matrix());
  ComplexMatrix mid =
      rho_half * pseudo_inverse_psd(sigma.matrix()) * rho_half;
  ComplexMatrix logmid = matrix_log_psd(ComplexMatrix(0.5 * (mid + mid.adjoint())));
  double nats = (rho.matrix() * logmid).trace().real();
  return DivergenceValue::finite(nats / kLn2);
}

}  // namespace qi
