#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "gradflow/spectral.hpp"

namespace gradflow::invariants {

/// A multiset of index pairs over 1..n together with the integer N such that
/// the pair sums satisfy  sum_{(i,j)} (l_i + l_j) = N * sum_k l_k  for every
/// vector l. Each such sequence defines one conserved product of eigenvalue
/// differences for the isotropically forced spectral flows.
struct IndexPairSequence {
  std::vector<std::pair<int, int>> pairs;  ///< 1-based, i != j
  int multiplier = 0;                      ///< N in the defining identity
};

/// The floor(n/2) canonical sequences for dimension n >= 2. For even n the
/// first sequence chains disjoint neighbours (1,2)(3,4)...; sequence k >= 2
/// swaps the two pairs around position 2k-2 into (2k-3,2k-1)(2k-2,2k).
/// For odd n the first sequence is the full cycle (1,2)(2,3)...(n,1) with
/// N = 2, and sequence k >= 2 applies the analogous local exchange.
std::vector<IndexPairSequence> build_index_sequences(int n);

/// |sum_{(i,j)} (l_i + l_j) - N sum_k l_k| for a candidate sequence.
double pair_sum_residual(const IndexPairSequence& seq, const std::vector<Complex>& lambdas);

/// The uniform per-index multiplicity when `pairs` covers every index 1..n
/// equally often, otherwise nullopt. A sequence satisfies the defining
/// identity exactly when this is non-null.
std::optional<int> uniform_multiplicity(const std::vector<std::pair<int, int>>& pairs, int n);

/// prod_{(i,j) in seq} (l_i - l_j), first index minus second.
Complex eval_invariant_product(const IndexPairSequence& seq, const std::vector<Complex>& lambdas);

/// eval_invariant_product / rho^N; throws std::domain_error when rho <= 0.
Complex eval_rep_invariant(const IndexPairSequence& seq, double rho,
                           const std::vector<Complex>& lambdas);

/// Monic characteristic coefficients [q0=1, q1, ..., qn] from the power sums
/// a_k = tr A^k, k = 1..n, via the Newton recurrence
/// q_k = -(a_k + sum_{i=1}^{k-1} q_i a_{k-i}) / k.
std::vector<double> char_coeffs_from_power_sums(const std::vector<double>& a);
std::vector<Complex> char_coeffs_from_power_sums(const std::vector<Complex>& a);

/// Trace state (m_2, ..., m_n) of a traceless n-dimensional tensor.
struct TraceVector {
  int n = 0;
  std::vector<double> m;  ///< m[k-2] holds m_k

  TraceVector() = default;
  TraceVector(int dim, std::vector<double> values);

  /// m_k for k in [1, n]; m_1 is identically zero.
  double at(int k) const;
};

/// m_{n+1} expressed through (m_2..m_n) by taking the trace of the
/// Cayley-Hamilton identity multiplied by the tensor.
double close_trace(const TraceVector& tv);

/// Conserved combinations of the trace flow: {6 m3^2 - m2^3} for n = 3;
/// {C1, 3 m3^2 - m2^3 - (3 C1/4) m2} with C1 = 12 m4 - 7 m2^2 for n = 4.
/// Other dimensions are unsupported and throw std::invalid_argument.
std::vector<double> eval_trace_invariants(const TraceVector& tv);

}  // namespace gradflow::invariants
