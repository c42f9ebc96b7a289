#include "qi/channels.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qi {

namespace {

constexpr double kChoiPsdTol = 1e-9;
constexpr double kMarginalTol = 1e-9;
constexpr double kKrausCompletenessTol = 1e-9;
constexpr double kLn2 = 0.6931471805599453;

void require_param_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) {
    throw std::invalid_argument(std::string("channel parameter ") + name +
                                " out of range [" + std::to_string(lo) + "," +
                                std::to_string(hi) + "]: " + std::to_string(v));
  }
}

ComplexMatrix max_entangled_projector(int dim) {
  ComplexMatrix phi = ComplexMatrix::Zero(dim * dim, 1);
  for (int i = 0; i < dim; ++i) phi(i * dim + i, 0) = 1.0;
  return phi * phi.adjoint();
}

}  // namespace

QuantumChannel::QuantumChannel(int dim_a, int dim_b, ComplexMatrix choi,
                               ChannelKind kind)
    : dim_a_(dim_a), dim_b_(dim_b), choi_(std::move(choi)), kind_(kind) {
  if (dim_a_ < 1 || dim_b_ < 1)
    throw std::invalid_argument("QuantumChannel: dimensions must be positive");
  if (choi_.rows() != static_cast<long>(dim_a_) * dim_b_ ||
      choi_.cols() != choi_.rows())
    throw std::invalid_argument("QuantumChannel: Choi dimension mismatch");
  if (!is_hermitian(choi_))
    throw std::invalid_argument("QuantumChannel: Choi operator not Hermitian");
  EighResult er = eigh(choi_);
  if (er.eigenvalues.size() > 0 && er.eigenvalues.minCoeff() < -kChoiPsdTol)
    throw std::invalid_argument("QuantumChannel: Choi operator not PSD");
  ComplexMatrix marginal = partial_trace(choi_, dim_a_, dim_b_, Subsystem::A);
  ComplexMatrix gap = ComplexMatrix::Identity(dim_a_, dim_a_) - marginal;
  if (kind_ == ChannelKind::kTracePreserving) {
    if (gap.cwiseAbs().maxCoeff() > kMarginalTol)
      throw std::invalid_argument(
          "QuantumChannel: marginal of a trace-preserving Choi must be the "
          "identity");
  } else {
    EighResult eg = eigh(ComplexMatrix(0.5 * (gap + gap.adjoint())));
    if (eg.eigenvalues.minCoeff() < -kMarginalTol)
      throw std::invalid_argument(
          "QuantumChannel: subchannel marginal exceeds the identity");
  }
}

BidirectionalChannel::BidirectionalChannel(BidirectionalDims dims,
                                           ComplexMatrix choi)
    : dims_(dims), choi_(std::move(choi)) {
  long expected = static_cast<long>(dims_.a1) * dims_.b1 * dims_.a2 * dims_.b2;
  if (choi_.rows() != expected || choi_.cols() != expected)
    throw std::invalid_argument("BidirectionalChannel: Choi dimension mismatch");
  // Reuse the channel checks with input A1B1 and output A2B2.
  QuantumChannel check(dims_.a1 * dims_.b1, dims_.a2 * dims_.b2, choi_,
                       ChannelKind::kTracePreserving);
}

QuantumChannel BidirectionalChannel::as_channel() const {
  return QuantumChannel(dims_.a1 * dims_.b1, dims_.a2 * dims_.b2, choi_,
                        ChannelKind::kTracePreserving);
}

QuantumChannel identity_channel(int dim) {
  if (dim < 2) throw std::invalid_argument("identity_channel: dim must be >= 2");
  return QuantumChannel(dim, dim, max_entangled_projector(dim));
}

QuantumChannel depolarizing(int dim, double p) {
  if (dim < 2) throw std::invalid_argument("depolarizing: dim must be >= 2");
  require_param_range(p, 0.0, 1.0, "p");
  ComplexMatrix j = (1.0 - p) * max_entangled_projector(dim) +
                    (p / dim) * ComplexMatrix::Identity(dim * dim, dim * dim);
  return QuantumChannel(dim, dim, std::move(j));
}

QuantumChannel erasure(double p, int dim) {
  if (dim < 2) throw std::invalid_argument("erasure: dim must be >= 2");
  require_param_range(p, 0.0, 1.0, "p");
  std::vector<ComplexMatrix> kraus;
  ComplexMatrix embed = ComplexMatrix::Zero(dim + 1, dim);
  for (int i = 0; i < dim; ++i) embed(i, i) = std::sqrt(1.0 - p);
  kraus.push_back(embed);
  for (int i = 0; i < dim; ++i) {
    ComplexMatrix flag = ComplexMatrix::Zero(dim + 1, dim);
    flag(dim, i) = std::sqrt(p);
    kraus.push_back(flag);
  }
  return from_kraus(kraus);
}

QuantumChannel dephasing(double p) {
  require_param_range(p, 0.0, 1.0, "p");
  ComplexMatrix id = ComplexMatrix::Identity(2, 2);
  ComplexMatrix z = id;
  z(1, 1) = -1.0;
  return from_kraus({ComplexMatrix(std::sqrt(1.0 - p) * id),
                     ComplexMatrix(std::sqrt(p) * z)});
}

QuantumChannel dephrasure(double p, double q) {
  require_param_range(p, 0.0, 1.0, "p");
  require_param_range(q, 0.0, 1.0, "q");
  ComplexMatrix embed = ComplexMatrix::Zero(3, 2);
  embed(0, 0) = embed(1, 1) = 1.0;
  ComplexMatrix embed_z = embed;
  embed_z(1, 1) = -1.0;
  std::vector<ComplexMatrix> kraus{
      ComplexMatrix(std::sqrt((1.0 - q) * (1.0 - p)) * embed),
      ComplexMatrix(std::sqrt((1.0 - q) * p) * embed_z)};
  for (int i = 0; i < 2; ++i) {
    ComplexMatrix flag = ComplexMatrix::Zero(3, 2);
    flag(2, i) = std::sqrt(q);
    kraus.push_back(flag);
  }
  return from_kraus(kraus);
}

QuantumChannel gad(double gamma, double n) {
  require_param_range(gamma, 0.0, 1.0, "gamma");
  require_param_range(n, 0.0, 1.0, "N");
  ComplexMatrix a1 = ComplexMatrix::Zero(2, 2), a2 = ComplexMatrix::Zero(2, 2),
                a3 = ComplexMatrix::Zero(2, 2), a4 = ComplexMatrix::Zero(2, 2);
  a1(0, 0) = std::sqrt(1.0 - n);
  a1(1, 1) = std::sqrt(1.0 - n) * std::sqrt(1.0 - gamma);
  a2(0, 1) = std::sqrt(gamma * (1.0 - n));
  a3(0, 0) = std::sqrt(n) * std::sqrt(1.0 - gamma);
  a3(1, 1) = std::sqrt(n);
  a4(1, 0) = std::sqrt(gamma * n);
  return from_kraus({a1, a2, a3, a4});
}

QuantumChannel replacer(const DensityOperator& sigma) {
  int d = sigma.dim();
  ComplexMatrix j = kron(ComplexMatrix::Identity(d, d), sigma.matrix());
  ChannelKind kind = std::abs(sigma.matrix().trace().real() - 1.0) <= 1e-10
                         ? ChannelKind::kTracePreserving
                         : ChannelKind::kSubchannel;
  return QuantumChannel(d, d, std::move(j), kind);
}

QuantumChannel from_kraus(const std::vector<ComplexMatrix>& kraus) {
  if (kraus.empty()) throw std::invalid_argument("from_kraus: empty Kraus list");
  const long dim_b = kraus.front().rows();
  const long dim_a = kraus.front().cols();
  ComplexMatrix completeness = ComplexMatrix::Zero(dim_a, dim_a);
  ComplexMatrix j = ComplexMatrix::Zero(dim_a * dim_b, dim_a * dim_b);
  for (const ComplexMatrix& k : kraus) {
    if (k.rows() != dim_b || k.cols() != dim_a)
      throw std::invalid_argument("from_kraus: inconsistent Kraus shapes");
    completeness += k.adjoint() * k;
    ComplexMatrix v = ComplexMatrix::Zero(dim_a * dim_b, 1);
    for (int i = 0; i < dim_a; ++i) v.block(i * dim_b, 0, dim_b, 1) = k.col(i);
    j += v * v.adjoint();
  }
  ComplexMatrix gap =
      completeness - ComplexMatrix::Identity(dim_a, dim_a);
  if (gap.cwiseAbs().maxCoeff() > kKrausCompletenessTol)
    throw std::invalid_argument("from_kraus: Kraus operators are not complete");
  return QuantumChannel(static_cast<int>(dim_a), static_cast<int>(dim_b),
                        std::move(j));
}

QuantumChannel qutrit_t_depolarizing(double p) {
  const Complex xi = std::exp(Complex(0.0, 2.0 * std::numbers::pi / 9.0));
  ComplexMatrix t = ComplexMatrix::Zero(3, 3);
  t(0, 0) = xi;
  t(1, 1) = 1.0;
  t(2, 2) = 1.0 / xi;
  return compose(depolarizing(3, p), from_kraus({t}));
}

BidirectionalChannel make_bidirectional_swap_dephase(double p, double phi) {
  require_param_range(p, 0.0, 1.0, "p");
  ComplexMatrix swap = ComplexMatrix::Zero(4, 4);
  swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
  ComplexMatrix u = ComplexMatrix::Zero(4, 4);
  u(0, 0) = 1.0;
  u(1, 1) = std::exp(Complex(0.0, phi));
  u(2, 2) = std::exp(Complex(0.0, phi));
  u(3, 3) = std::exp(Complex(0.0, 2.0 * phi));
  QuantumChannel flat = from_kraus({ComplexMatrix(std::sqrt(p) * swap),
                                    ComplexMatrix(std::sqrt(1.0 - p) * u * swap)});
  return BidirectionalChannel({2, 2, 2, 2}, flat.choi());
}

ComplexMatrix apply_to_block(const QuantumChannel& n, const ComplexMatrix& rho,
                             int dim_r) {
  const int da = n.dim_a(), db = n.dim_b();
  if (dim_r < 1 || rho.rows() != static_cast<long>(dim_r) * da ||
      rho.cols() != rho.rows())
    throw std::invalid_argument("apply_to_block: dimension mismatch");
  const ComplexMatrix& j = n.choi();
  ComplexMatrix out = ComplexMatrix::Zero(dim_r * db, dim_r * db);
  for (int r = 0; r < dim_r; ++r)
    for (int rp = 0; rp < dim_r; ++rp)
      for (int i = 0; i < da; ++i)
        for (int jj = 0; jj < da; ++jj) {
          Complex amp = rho(r * da + i, rp * da + jj);
          if (amp == Complex(0.0, 0.0)) continue;
          for (int k = 0; k < db; ++k)
            for (int l = 0; l < db; ++l)
              out(r * db + k, rp * db + l) += amp * j(i * db + k, jj * db + l);
        }
  return out;
}

DensityOperator apply(const QuantumChannel& n, const DensityOperator& rho,
                      int dim_r) {
  ComplexMatrix out = apply_to_block(n, rho.matrix(), dim_r);
  ComplexMatrix herm = 0.5 * (out + out.adjoint());
  return n.kind() == ChannelKind::kTracePreserving
             ? DensityOperator(std::move(herm))
             : DensityOperator::subnormalized(std::move(herm));
}

QuantumChannel compose(const QuantumChannel& second, const QuantumChannel& first) {
  if (first.dim_b() != second.dim_a())
    throw std::invalid_argument("compose: inner dimensions do not match");
  ComplexMatrix j = apply_to_block(second, first.choi(), first.dim_a());
  ChannelKind kind = (first.kind() == ChannelKind::kTracePreserving &&
                      second.kind() == ChannelKind::kTracePreserving)
                         ? ChannelKind::kTracePreserving
                         : ChannelKind::kSubchannel;
  return QuantumChannel(first.dim_a(), second.dim_b(),
                        ComplexMatrix(0.5 * (j + j.adjoint())), kind);
}

QuantumChannel tensor(const QuantumChannel& n1, const QuantumChannel& n2) {
  // kron yields A1 B1 A2 B2 ordering; regroup to (A1 A2)(B1 B2).
  ComplexMatrix j = permute_systems(
      kron(n1.choi(), n2.choi()),
      {n1.dim_a(), n1.dim_b(), n2.dim_a(), n2.dim_b()}, {0, 2, 1, 3});
  ChannelKind kind = (n1.kind() == ChannelKind::kTracePreserving &&
                      n2.kind() == ChannelKind::kTracePreserving)
                         ? ChannelKind::kTracePreserving
                         : ChannelKind::kSubchannel;
  return QuantumChannel(n1.dim_a() * n2.dim_a(), n1.dim_b() * n2.dim_b(),
                        std::move(j), kind);
}

namespace {

void require_comparable(const QuantumChannel& n, const QuantumChannel& m) {
  if (n.dim_a() != m.dim_a() || n.dim_b() != m.dim_b())
    throw std::invalid_argument("channel divergence: dimension mismatch");
}

}  // namespace

DivergenceValue channel_geometric_divergence(const QuantumChannel& n,
                                             const QuantumChannel& m,
                                             double alpha) {
  require_comparable(n, m);
  if (!(alpha > 1.0 && alpha <= 2.0))
    throw std::invalid_argument(
        "channel_geometric_divergence: alpha must lie in (1,2]");
  if (!support_contained(n.choi(), m.choi())) return DivergenceValue::infinite();
  ComplexMatrix g = weighted_geometric_mean(n.choi(), m.choi(), 1.0 - alpha);
  ComplexMatrix tb = partial_trace(g, n.dim_a(), n.dim_b(), Subsystem::A);
  return DivergenceValue::finite(std::log2(operator_norm(tb)) / (alpha - 1.0));
}

DivergenceValue channel_dmax(const QuantumChannel& n, const QuantumChannel& m) {
  require_comparable(n, m);
  if (!support_contained(n.choi(), m.choi())) return DivergenceValue::infinite();
  ComplexMatrix mih = matrix_power_psd(m.choi(), -0.5);
  double t = operator_norm(ComplexMatrix(mih * n.choi() * mih));
  return DivergenceValue::finite(std::log2(t));
}

DivergenceValue channel_bs_divergence(const QuantumChannel& n,
                                      const QuantumChannel& m) {
  require_comparable(n, m);
  if (!support_contained(n.choi(), m.choi())) return DivergenceValue::infinite();
  ComplexMatrix nh = matrix_sqrt_psd(n.choi());
  ComplexMatrix mid = nh * pseudo_inverse_psd(m.choi()) * nh;
  ComplexMatrix logmid = matrix_log_psd(ComplexMatrix(0.5 * (mid + mid.adjoint())));
  ComplexMatrix x =
      partial_trace(ComplexMatrix(nh * logmid * nh), n.dim_a(), n.dim_b(),
                    Subsystem::A);
  return DivergenceValue::finite(max_eigenvalue(x) / kLn2);
}

namespace {

// key=value tokens; a value is either a bare word or a braced block that may
// itself contain nested braces.
std::map<std::string, std::string> tokenize_spec(const std::string& text) {
  std::map<std::string, std::string> fields;
  size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  };
  skip_ws();
  while (pos < text.size()) {
    size_t eq = text.find('=', pos);
    if (eq == std::string::npos)
      throw std::invalid_argument("channel spec: expected key=value near '" +
                                  text.substr(pos) + "'");
    std::string key = text.substr(pos, eq - pos);
    pos = eq + 1;
    std::string value;
    if (pos < text.size() && text[pos] == '{') {
      int depth = 0;
      size_t start = ++pos;
      for (; pos < text.size(); ++pos) {
        if (text[pos] == '{') ++depth;
        if (text[pos] == '}') {
          if (depth == 0) break;
          --depth;
        }
      }
      if (pos >= text.size())
        throw std::invalid_argument("channel spec: unbalanced braces");
      value = text.substr(start, pos - start);
      ++pos;
    } else {
      size_t end = pos;
      while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])))
        ++end;
      value = text.substr(pos, end - pos);
      pos = end;
    }
    fields[key] = value;
    skip_ws();
  }
  return fields;
}

double parse_double_field(const std::map<std::string, std::string>& fields,
                          const std::string& key) {
  auto it = fields.find(key);
  if (it == fields.end())
    throw std::invalid_argument("channel spec: missing parameter '" + key + "'");
  size_t used = 0;
  double v = std::stod(it->second, &used);
  if (used != it->second.size())
    throw std::invalid_argument("channel spec: bad number for '" + key + "'");
  return v;
}

int parse_int_field(const std::map<std::string, std::string>& fields,
                    const std::string& key, int fallback) {
  auto it = fields.find(key);
  if (it == fields.end()) return fallback;
  return static_cast<int>(std::stol(it->second));
}

std::string require_field(const std::map<std::string, std::string>& fields,
                          const std::string& key) {
  auto it = fields.find(key);
  if (it == fields.end())
    throw std::invalid_argument("channel spec: missing parameter '" + key + "'");
  return it->second;
}

}  // namespace

QuantumChannel parse_channel_spec(const std::string& text) {
  auto fields = tokenize_spec(text);
  std::string kind = require_field(fields, "kind");
  if (kind == "identity") {
    return identity_channel(parse_int_field(fields, "d", 2));
  } else if (kind == "depolarizing") {
    return depolarizing(parse_int_field(fields, "d", 2),
                        parse_double_field(fields, "p"));
  } else if (kind == "erasure") {
    return erasure(parse_double_field(fields, "p"),
                   parse_int_field(fields, "d", 2));
  } else if (kind == "dephasing") {
    return dephasing(parse_double_field(fields, "p"));
  } else if (kind == "dephrasure") {
    return dephrasure(parse_double_field(fields, "p"),
                      parse_double_field(fields, "q"));
  } else if (kind == "gad") {
    return gad(parse_double_field(fields, "gamma"),
               parse_double_field(fields, "N"));
  } else if (kind == "qutrit-t-depolarizing") {
    return qutrit_t_depolarizing(parse_double_field(fields, "p"));
  } else if (kind == "replacer") {
    std::string diag = require_field(fields, "diag");
    std::vector<double> entries;
    std::stringstream ss(diag);
    std::string item;
    while (std::getline(ss, item, ',')) entries.push_back(std::stod(item));
    if (entries.size() < 2)
      throw std::invalid_argument("channel spec: replacer diag needs >= 2 entries");
    ComplexMatrix m = ComplexMatrix::Zero(static_cast<int>(entries.size()),
                                          static_cast<int>(entries.size()));
    for (size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
    return replacer(DensityOperator(std::move(m)));
  } else if (kind == "compose") {
    QuantumChannel first = parse_channel_spec(require_field(fields, "first"));
    QuantumChannel second = parse_channel_spec(require_field(fields, "second"));
    return compose(second, first);
  } else if (kind == "tensor") {
    QuantumChannel first = parse_channel_spec(require_field(fields, "first"));
    QuantumChannel second = parse_channel_spec(require_field(fields, "second"));
    return tensor(first, second);
  }
  throw std::invalid_argument("channel spec: unknown kind '" + kind + "'");
}

}  // namespace qi
