#pragma once

#include "qi/channels.hpp"
#include "qi/conic.hpp"
#include "qi/divergences.hpp"
#include "qi/linalg.hpp"

namespace qi {

enum class BoundKind {
  kHolevoWerner,
  kMaxRains,
  kMaxRainsThetaForm,
  kRainsGeometric,
  kRainsStateGeometric,
  kThetaInfoGeometric,
  kBiHolevoWerner,
  kBiMaxRains,
  kBiThetaGeometric,
  kEMax,
  kEMaxDualForm,
  kEAlpha,
  kEAlphaSigma,
  kCBeta,
  kCZeta,
  kUpsilonMax,
  kUpsilonGeometric,
};

/// Sentinel for bounds that carry no dyadic level.
inline constexpr int kNoLevel = -1;

/// A capacity bound in bits together with the solve it came from. bits is
/// NaN whenever the solver did not reach an optimal point; callers branch on
/// report.status. Level-carrying bounds use alpha = 1 + 2^-level.
struct BoundResult {
  double bits = 0.0;
  int level = kNoLevel;
  SolveReport report;
  BoundKind bound_kind = BoundKind::kHolevoWerner;
};

/// Transpose-map diamond norm bound, log min{y | Y +- J^{T_B} >= 0,
/// tr_B Y <= y I_A}.
BoundResult holevo_werner(const QuantumChannel& n, const SolveOptions& opts = {});

/// Direct form, log min{mu | (V - Y)^{T_B} >= J, tr_B(V + Y) <= mu I_A,
/// V, Y >= 0}.
BoundResult max_rains(const QuantumChannel& n, const SolveOptions& opts = {});

/// Same quantity through the scaled zero-set program, log min{mu | G >= J,
/// Y +- G^{T_B} >= 0, tr_B Y <= mu I_A}. Kept as an independent formulation
/// for equality testing against max_rains.
BoundResult max_rains_theta_form(const QuantumChannel& n,
                                 const SolveOptions& opts = {});

/// Geometric-divergence Rains bound of a channel via the maximization form
/// with free K, {Z_i} and Hermitian {W_i}, rho, including the prefactor
/// l*2^l - (2^l+1)log(2^l+1) + (2^l+1)log S.
BoundResult rains_geometric(const QuantumChannel& n, int level,
                            const SolveOptions& opts = {});

/// Geometric-divergence Rains bound of a bipartite state on A tensor B,
/// minimizing 2^l log tr M over the chain with the partial-transpose
/// trace-norm ball written as sigma^{T_B} = X - Y, tr(X + Y) <= 1.
BoundResult rains_state_geometric(const DensityOperator& rho, int dim_a,
                                  int dim_b, int level,
                                  const SolveOptions& opts = {});

/// Geometric divergence to the zero set of the transpose-map diamond norm:
/// 2^l log min y with chain blocks on J, R +- N_0^{T_B} >= 0, tr_B R <= I,
/// tr_B M <= y I.
BoundResult theta_info_geometric(const QuantumChannel& n, int level,
                                 const SolveOptions& opts = {});

/// Bidirectional variants of the three quantities above. Partial transposes
/// act on B1 and B2, partial traces on the output pair A2 B2.
BoundResult bi_holevo_werner(const BidirectionalChannel& n,
                             const SolveOptions& opts = {});
BoundResult bi_max_rains(const BidirectionalChannel& n,
                         const SolveOptions& opts = {});
BoundResult bi_theta_geometric(const BidirectionalChannel& n, int level,
                               const SolveOptions& opts = {});

/// Max-relative entanglement of a channel, log min{||tr_B Y||_inf | J <= Y,
/// Y separable}. The separability cone is realized as the PPT cone, which is
/// exact only for |A||B| <= 6; larger dimensions are refused.
BoundResult e_max(const QuantumChannel& n, const SolveOptions& opts = {});

/// Same quantity through the Lagrangian dual, max tr(J P) over P >= 0 with
/// rho tensor I - P block-positive and tr rho = 1. Kept as an independent
/// formulation for equality testing against e_max.
BoundResult e_max_dual_form(const QuantumChannel& n,
                            const SolveOptions& opts = {});

/// Geometric-divergence entanglement of a channel via the maximization form
/// with the block-positive cone {X + Y^{T_B} | X, Y >= 0}; |A||B| <= 6 only.
BoundResult e_alpha(const QuantumChannel& n, int level,
                    const SolveOptions& opts = {});

/// Geometric divergence to the entanglement-breaking subchannels, with the
/// separable-Choi condition realized as the PPT cone; |A||B| <= 6 only.
BoundResult e_alpha_sigma(const QuantumChannel& n, int level,
                          const SolveOptions& opts = {});

/// log min{tr S | R +- J^{T_B} >= 0, I tensor S +- R^{T_B} >= 0}.
BoundResult c_beta(const QuantumChannel& n, const SolveOptions& opts = {});

/// log min{tr S | J <= K, I tensor S +- K^{T_B} >= 0}.
BoundResult c_zeta(const QuantumChannel& n, const SolveOptions& opts = {});

/// log min{tr S | J <= K, R +- K^{T_B} >= 0, I tensor S +- R^{T_B} >= 0}.
BoundResult upsilon_max(const QuantumChannel& n, const SolveOptions& opts = {});

/// Geometric divergence to the constant-bounded subchannel relaxation:
/// 2^l log min y with chain blocks on J, R +- N_0^{T_B} >= 0,
/// I tensor S +- R^{T_B} >= 0, tr S <= 1, tr_B M <= y I.
BoundResult upsilon_geometric(const QuantumChannel& n, int level,
                              const SolveOptions& opts = {});

/// Strong converse rate for adaptive discrimination of n against m in the
/// hypothesis-testing setting; equals the closed-form geometric channel
/// divergence. Infinite when the Choi support condition fails.
DivergenceValue discrimination_bound(const QuantumChannel& n,
                                     const QuantumChannel& m, double alpha);

}  // namespace qi
