#pragma once

#include <string>
#include <vector>

#include "qi/divergences.hpp"
#include "qi/linalg.hpp"

namespace qi {

enum class ChannelKind { kTracePreserving, kSubchannel };

// A completely positive map A -> B stored as its Choi operator on A tensor B,
// built from the unnormalized maximally entangled state |Phi> = sum_i |ii>.
// Trace-preserving channels satisfy tr_B J = I_A; subchannels tr_B J <= I_A.
class QuantumChannel {
 public:
  QuantumChannel(int dim_a, int dim_b, ComplexMatrix choi,
                 ChannelKind kind = ChannelKind::kTracePreserving);

  int dim_a() const { return dim_a_; }
  int dim_b() const { return dim_b_; }
  const ComplexMatrix& choi() const { return choi_; }
  ChannelKind kind() const { return kind_; }

 private:
  int dim_a_;
  int dim_b_;
  ComplexMatrix choi_;
  ChannelKind kind_;
};

struct BidirectionalDims {
  int a1, b1, a2, b2;
};

// A bipartite channel A1 B1 -> A2 B2 whose Choi operator orders the
// subsystems as A1, B1, A2, B2.
class BidirectionalChannel {
 public:
  BidirectionalChannel(BidirectionalDims dims, ComplexMatrix choi);

  const BidirectionalDims& dims() const { return dims_; }
  const ComplexMatrix& choi() const { return choi_; }

  // Flatten to a plain channel (A1 B1) -> (A2 B2).
  QuantumChannel as_channel() const;

 private:
  BidirectionalDims dims_;
  ComplexMatrix choi_;
};

// Channel families. Parameters live in [0,1]; dimensions are >= 2.
QuantumChannel identity_channel(int dim);
QuantumChannel depolarizing(int dim, double p);
QuantumChannel erasure(double p, int dim = 2);  // output dim+1, flag at index dim
QuantumChannel dephasing(double p);
QuantumChannel dephrasure(double p, double q);  // qubit in, qutrit out
QuantumChannel gad(double gamma, double n);
QuantumChannel replacer(const DensityOperator& sigma);
QuantumChannel from_kraus(const std::vector<ComplexMatrix>& kraus);
QuantumChannel qutrit_t_depolarizing(double p);

BidirectionalChannel make_bidirectional_swap_dephase(double p, double phi);

// Apply the channel to the A factor of an operator on R tensor A. Use
// dim_r = 1 to act on a bare A operator. Works on any operator, not just
// states, so it also drives Choi-level composition.
ComplexMatrix apply_to_block(const QuantumChannel& n, const ComplexMatrix& rho,
                             int dim_r);
DensityOperator apply(const QuantumChannel& n, const DensityOperator& rho,
                      int dim_r = 1);

QuantumChannel compose(const QuantumChannel& second, const QuantumChannel& first);
QuantumChannel tensor(const QuantumChannel& n1, const QuantumChannel& n2);

// Closed-form channel divergences (bits). Infinite when the Choi support
// condition fails.
DivergenceValue channel_geometric_divergence(const QuantumChannel& n,
                                             const QuantumChannel& m,
                                             double alpha);
DivergenceValue channel_dmax(const QuantumChannel& n, const QuantumChannel& m);
DivergenceValue channel_bs_divergence(const QuantumChannel& n,
                                      const QuantumChannel& m);

// Text format used by the CLI, e.g. "kind=gad gamma=0.3 N=0.5" or
// "kind=compose first={kind=dephasing p=0.2} second={kind=gad gamma=0.1 N=0}".
// Supported kinds: identity, depolarizing, erasure, dephasing, dephrasure,
// gad, qutrit-t-depolarizing, replacer (diag=p0,p1,...), compose, tensor.
QuantumChannel parse_channel_spec(const std::string& text);

}  // namespace qi
