#include "gradflow/invariants.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gradflow::invariants {

namespace {

void check_indices(const IndexPairSequence& seq, int n) {
  for (const auto& [i, j] : seq.pairs) {
    if (i < 1 || i > n || j < 1 || j > n || i == j) {
      throw std::invalid_argument("index pair (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") out of range for n = " + std::to_string(n));
    }
  }
}

template <typename Scalar>
std::vector<Scalar> newton_coeffs(const std::vector<Scalar>& a) {
  const size_t n = a.size();
  if (n == 0) throw std::invalid_argument("char_coeffs_from_power_sums: empty power-sum list");
  std::vector<Scalar> q(n + 1);
  q[0] = Scalar{1};
  for (size_t k = 1; k <= n; ++k) {
    Scalar s = a[k - 1];
    for (size_t i = 1; i < k; ++i) s += q[i] * a[k - i - 1];
    q[k] = -s / static_cast<double>(k);
  }
  return q;
}

}  // namespace

std::vector<IndexPairSequence> build_index_sequences(int n) {
  if (n < 2 || n > kMaxDimension) {
    throw std::invalid_argument("build_index_sequences: n out of range: " + std::to_string(n));
  }
  const int count = n / 2;
  std::vector<IndexPairSequence> seqs;
  seqs.reserve(static_cast<size_t>(count));

  IndexPairSequence base;
  if (n % 2 == 0) {
    base.multiplier = 1;
    for (int i = 1; i < n; i += 2) base.pairs.emplace_back(i, i + 1);
  } else {
    base.multiplier = 2;
    for (int i = 1; i < n; ++i) base.pairs.emplace_back(i, i + 1);
    base.pairs.emplace_back(n, 1);
  }
  seqs.push_back(base);

  for (int k = 2; k <= count; ++k) {
    IndexPairSequence seq = base;
    if (n % 2 == 0) {
      // Pairs (2k-3,2k-2),(2k-1,2k) sit at positions k-2 and k-1.
      seq.pairs[static_cast<size_t>(k - 2)] = {2 * k - 3, 2 * k - 1};
      seq.pairs[static_cast<size_t>(k - 1)] = {2 * k - 2, 2 * k};
    } else {
      // In the cycle, pair (p,p+1) sits at position p-1.
      seq.pairs[static_cast<size_t>(2 * k - 4)] = {2 * k - 3, 2 * k - 1};
      seq.pairs[static_cast<size_t>(2 * k - 2)] = {2 * k - 2, 2 * k};
    }
    seqs.push_back(std::move(seq));
  }
  return seqs;
}

double pair_sum_residual(const IndexPairSequence& seq, const std::vector<Complex>& lambdas) {
  const int n = static_cast<int>(lambdas.size());
  check_indices(seq, n);
  Complex pair_sum{0.0, 0.0}, total{0.0, 0.0};
  for (const auto& [i, j] : seq.pairs) {
    pair_sum += lambdas[static_cast<size_t>(i - 1)] + lambdas[static_cast<size_t>(j - 1)];
  }
  for (const Complex& l : lambdas) total += l;
  return std::abs(pair_sum - static_cast<double>(seq.multiplier) * total);
}

std::optional<int> uniform_multiplicity(const std::vector<std::pair<int, int>>& pairs, int n) {
  if (n < 1) return std::nullopt;
  std::vector<int> count(static_cast<size_t>(n), 0);
  for (const auto& [i, j] : pairs) {
    if (i < 1 || i > n || j < 1 || j > n || i == j) return std::nullopt;
    ++count[static_cast<size_t>(i - 1)];
    ++count[static_cast<size_t>(j - 1)];
  }
  for (int c : count) {
    if (c != count[0]) return std::nullopt;
  }
  return count[0];
}

Complex eval_invariant_product(const IndexPairSequence& seq, const std::vector<Complex>& lambdas) {
  check_indices(seq, static_cast<int>(lambdas.size()));
  Complex prod{1.0, 0.0};
  for (const auto& [i, j] : seq.pairs) {
    prod *= lambdas[static_cast<size_t>(i - 1)] - lambdas[static_cast<size_t>(j - 1)];
  }
  return prod;
}

Complex eval_rep_invariant(const IndexPairSequence& seq, double rho,
                           const std::vector<Complex>& lambdas) {
  if (!(rho > 0.0)) {
    throw std::domain_error("eval_rep_invariant: density must be positive, got " +
                            std::to_string(rho));
  }
  return eval_invariant_product(seq, lambdas) / std::pow(rho, seq.multiplier);
}

std::vector<double> char_coeffs_from_power_sums(const std::vector<double>& a) {
  return newton_coeffs(a);
}

std::vector<Complex> char_coeffs_from_power_sums(const std::vector<Complex>& a) {
  return newton_coeffs(a);
}

TraceVector::TraceVector(int dim, std::vector<double> values) : n(dim), m(std::move(values)) {
  if (n < 3) {
    throw std::invalid_argument("TraceVector: trace dynamics requires n >= 3, got " +
                                std::to_string(n));
  }
  if (n > kMaxDimension) {
    throw std::invalid_argument("TraceVector: n exceeds dimension cap");
  }
  if (static_cast<int>(m.size()) != n - 1) {
    throw std::invalid_argument("TraceVector: expected " + std::to_string(n - 1) +
                                " components m_2..m_n, got " + std::to_string(m.size()));
  }
}

double TraceVector::at(int k) const {
  if (k < 1 || k > n) {
    throw std::invalid_argument("TraceVector: m_" + std::to_string(k) + " out of range");
  }
  return k == 1 ? 0.0 : m[static_cast<size_t>(k - 2)];
}

double close_trace(const TraceVector& tv) {
  std::vector<double> a(static_cast<size_t>(tv.n));
  for (int k = 1; k <= tv.n; ++k) a[static_cast<size_t>(k - 1)] = tv.at(k);
  const std::vector<double> q = newton_coeffs(a);
  // tr of M * (Cayley-Hamilton) gives m_{n+1} + sum_i q_i m_{n+1-i} = 0.
  double s = 0.0;
  for (int i = 1; i <= tv.n; ++i) {
    const int k = tv.n + 1 - i;
    if (k >= 1) s += q[static_cast<size_t>(i)] * tv.at(k);
  }
  return -s;
}

std::vector<double> eval_trace_invariants(const TraceVector& tv) {
  const double m2 = tv.at(2), m3 = tv.at(3);
  if (tv.n == 3) {
    return {6.0 * m3 * m3 - m2 * m2 * m2};
  }
  if (tv.n == 4) {
    const double m4 = tv.at(4);
    const double c1 = 12.0 * m4 - 7.0 * m2 * m2;
    const double c2 = 3.0 * m3 * m3 - m2 * m2 * m2 - 0.75 * c1 * m2;
    return {c1, c2};
  }
  throw std::invalid_argument("eval_trace_invariants: closed invariants known for n = 3, 4 only");
}

}  // namespace gradflow::invariants
