#pragma once

#include "qi/linalg.hpp"

namespace qi {

// A divergence in bits, or an infinite sentinel when the relevant support
// condition fails. Never a large float: callers must branch on is_infinite().
class DivergenceValue {
 public:
  static DivergenceValue finite(double bits) { return DivergenceValue(bits, false); }
  static DivergenceValue infinite() { return DivergenceValue(0.0, true); }

  bool is_infinite() const { return infinite_; }
  double bits() const;  // throws std::logic_error when infinite

 private:
  DivergenceValue(double bits, bool inf) : bits_(bits), infinite_(inf) {}
  double bits_;
  bool infinite_;
};

inline constexpr double kSupportViolationTol = 1e-9;

// True when support(rho) is contained in support(sigma), tested as
// ||(I - P_sigma) rho (I - P_sigma)||_inf <= kSupportViolationTol.
bool support_contained(const ComplexMatrix& rho, const ComplexMatrix& sigma);

// All divergences take a state rho and a (possibly sub-normalized) sigma
// and return bits.
DivergenceValue umegaki(const DensityOperator& rho, const DensityOperator& sigma);
DivergenceValue max_relative(const DensityOperator& rho, const DensityOperator& sigma);
DivergenceValue min_relative(const DensityOperator& rho, const DensityOperator& sigma);

// alpha in (0,1) or (1,2]
DivergenceValue petz(const DensityOperator& rho, const DensityOperator& sigma,
                     double alpha);
// alpha > 1
DivergenceValue sandwiched(const DensityOperator& rho, const DensityOperator& sigma,
                           double alpha);
// alpha in (1,2]
DivergenceValue geometric_renyi(const DensityOperator& rho,
                                const DensityOperator& sigma, double alpha);
DivergenceValue belavkin_staszewski(const DensityOperator& rho,
                                    const DensityOperator& sigma);

}  // namespace qi
