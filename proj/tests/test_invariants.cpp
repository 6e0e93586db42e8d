#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gradflow/invariants.hpp"

using gradflow::Complex;
namespace invariants = gradflow::invariants;
using invariants::IndexPairSequence;

namespace {

std::vector<Complex> random_lambdas(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<Complex> v(static_cast<size_t>(n));
  for (auto& z : v) z = Complex{dist(rng), dist(rng)};
  return v;
}

}  // namespace

TEST_CASE("canonical sequences satisfy the pair-sum identity for n = 2..10") {
  std::mt19937 rng(9001);
  for (int n = 2; n <= 10; ++n) {
    const auto seqs = invariants::build_index_sequences(n);
    REQUIRE(static_cast<int>(seqs.size()) == n / 2);
    for (const auto& seq : seqs) {
      CHECK(seq.multiplier == (n % 2 == 0 ? 1 : 2));
      const auto mult = invariants::uniform_multiplicity(seq.pairs, n);
      REQUIRE(mult.has_value());
      CHECK(*mult == seq.multiplier);
      for (int trial = 0; trial < 100; ++trial) {
        const auto l = random_lambdas(n, rng);
        double sup = 0.0;
        for (const Complex& z : l) sup = std::max(sup, std::abs(z));
        CHECK(invariants::pair_sum_residual(seq, l) <= 1e-10 * std::max(1.0, sup));
      }
    }
  }
}

TEST_CASE("first sequences are the neighbour chain and the odd cycle") {
  const auto even = invariants::build_index_sequences(6);
  CHECK(even[0].pairs ==
        std::vector<std::pair<int, int>>{{1, 2}, {3, 4}, {5, 6}});
  const auto odd = invariants::build_index_sequences(5);
  CHECK(odd[0].pairs ==
        std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 1}});
  CHECK(odd[0].multiplier == 2);
}

TEST_CASE("uniform multiplicity rejects unbalanced or malformed pair lists") {
  CHECK(invariants::uniform_multiplicity({{1, 2}, {3, 4}}, 4) == 1);
  CHECK(invariants::uniform_multiplicity({{1, 2}, {2, 3}, {3, 1}}, 3) == 2);
  CHECK_FALSE(invariants::uniform_multiplicity({{1, 2}, {1, 3}}, 3).has_value());
  CHECK_FALSE(invariants::uniform_multiplicity({{1, 1}}, 2).has_value());
  CHECK_FALSE(invariants::uniform_multiplicity({{0, 2}}, 2).has_value());
}

TEST_CASE("invariant product uses first-minus-second differences") {
  // The two-component density-scaled invariant at lambda = (0, 1), rho = 1
  // evaluates to (lambda_1 - lambda_2)/rho = -1 with this orientation.
  const auto seqs = invariants::build_index_sequences(2);
  REQUIRE(seqs.size() == 1);
  const Complex v = invariants::eval_rep_invariant(seqs[0], 1.0, {{0.0, 0.0}, {1.0, 0.0}});
  CHECK(v.real() == doctest::Approx(-1.0));
  CHECK(v.imag() == 0.0);

  CHECK_THROWS_AS(invariants::eval_rep_invariant(seqs[0], 0.0, {{0.0, 0.0}, {1.0, 0.0}}),
                  std::domain_error);
  CHECK_THROWS_AS(invariants::eval_rep_invariant(seqs[0], -1.0, {{0.0, 0.0}, {1.0, 0.0}}),
                  std::domain_error);
}

TEST_CASE("density scaling divides by rho to the sequence multiplier") {
  std::mt19937 rng(9002);
  const auto l = random_lambdas(5, rng);
  const auto seqs = invariants::build_index_sequences(5);
  for (const auto& seq : seqs) {
    const Complex plain = invariants::eval_invariant_product(seq, l);
    const Complex scaled = invariants::eval_rep_invariant(seq, 2.0, l);
    CHECK(std::abs(scaled - plain / 4.0) < 1e-12 * std::abs(plain));
  }
}

TEST_CASE("the third 4-D product equals the difference of the first two, up to sign") {
  std::mt19937 rng(9003);
  const IndexPairSequence seq3{{{1, 4}, {2, 3}}, 1};
  for (int trial = 0; trial < 50; ++trial) {
    const auto l = random_lambdas(4, rng);
    const auto seqs = invariants::build_index_sequences(4);
    const Complex p1 = invariants::eval_invariant_product(seqs[0], l);
    const Complex p2 = invariants::eval_invariant_product(seqs[1], l);
    const Complex p3 = invariants::eval_invariant_product(seq3, l);
    const double scale = std::max({1.0, std::abs(p1), std::abs(p2)});
    CHECK(std::abs(std::abs(p3) - std::abs(p1 - p2)) < 1e-12 * scale);
    // With first-minus-second orientation the signed relation is p2 = p1 + p3.
    CHECK(std::abs(p2 - (p1 + p3)) < 1e-12 * scale);
  }
}

TEST_CASE("degenerate-pair probe separates the products") {
  // Setting lambda_{2k-3} = lambda_{2k-2} with everything else generic kills
  // every product whose pair list still contains (2k-3, 2k-2). For two
  // sequences (n = 4) the only survivor is the k-th product; from three
  // sequences up, the (k-1)-th survives as well because the swap at k-1
  // also removed that pair.
  std::mt19937 rng(9004);

  SUBCASE("n = 4 keeps the single-survivor pattern") {
    auto l = random_lambdas(4, rng);
    l[1] = l[0];  // probe k = 2
    const auto seqs = invariants::build_index_sequences(4);
    CHECK(std::abs(invariants::eval_invariant_product(seqs[0], l)) < 1e-14);
    CHECK(std::abs(invariants::eval_invariant_product(seqs[1], l)) > 1e-3);
  }

  SUBCASE("n = 8 survivors are the probed product and its predecessor") {
    const auto seqs = invariants::build_index_sequences(8);
    REQUIRE(seqs.size() == 4);
    for (int k = 2; k <= 4; ++k) {
      auto l = random_lambdas(8, rng);
      l[static_cast<size_t>(2 * k - 3)] = l[static_cast<size_t>(2 * k - 4)];
      for (int j = 1; j <= 4; ++j) {
        const double mag =
            std::abs(invariants::eval_invariant_product(seqs[static_cast<size_t>(j - 1)], l));
        const bool survives = j == k || (k >= 3 && j == k - 1);
        if (survives) {
          CHECK(mag > 1e-3);
        } else {
          CHECK(mag < 1e-14);
        }
      }
    }
  }
}

TEST_CASE("8-component products obey the factorised nonlinear relation") {
  std::mt19937 rng(9005);
  const IndexPairSequence p1{{{1, 2}, {3, 4}, {5, 6}, {7, 8}}, 1};
  const IndexPairSequence p2{{{1, 3}, {2, 4}, {5, 6}, {7, 8}}, 1};
  const IndexPairSequence p3{{{1, 2}, {3, 4}, {5, 7}, {6, 8}}, 1};
  const IndexPairSequence p4{{{1, 3}, {2, 4}, {5, 7}, {6, 8}}, 1};
  for (const auto& seq : {p1, p2, p3, p4}) {
    CHECK(invariants::uniform_multiplicity(seq.pairs, 8) == 1);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto l = random_lambdas(8, rng);
    const Complex v1 = invariants::eval_invariant_product(p1, l);
    const Complex v2 = invariants::eval_invariant_product(p2, l);
    const Complex v3 = invariants::eval_invariant_product(p3, l);
    const Complex v4 = invariants::eval_invariant_product(p4, l);
    const double scale = std::max(1.0, std::abs(v1 * v4));
    CHECK(std::abs(v1 * v4 - v2 * v3) < 1e-10 * scale);
  }
}

TEST_CASE("index bounds are validated") {
  std::mt19937 rng(9006);
  const IndexPairSequence bad{{{1, 5}}, 1};
  CHECK_THROWS_AS(invariants::eval_invariant_product(bad, random_lambdas(4, rng)),
                  std::invalid_argument);
  CHECK_THROWS_AS(invariants::build_index_sequences(1), std::invalid_argument);
  CHECK_THROWS_AS(invariants::build_index_sequences(17), std::invalid_argument);
}

TEST_CASE("power sums (0, 2, 3) give monic coefficients (1, 0, -1, -1)") {
  const auto q = invariants::char_coeffs_from_power_sums(std::vector<double>{0.0, 2.0, 3.0});
  REQUIRE(q.size() == 4);
  CHECK(q[0] == 1.0);
  CHECK(q[1] == 0.0);
  CHECK(q[2] == doctest::Approx(-1.0));
  CHECK(q[3] == doctest::Approx(-1.0));
}

TEST_CASE("complex power-sum recursion matches the real one on real data") {
  const std::vector<Complex> a{{0.5, 0.0}, {1.5, 0.0}, {-2.0, 0.0}};
  const auto qc = invariants::char_coeffs_from_power_sums(a);
  const auto qr = invariants::char_coeffs_from_power_sums(std::vector<double>{0.5, 1.5, -2.0});
  REQUIRE(qc.size() == qr.size());
  for (size_t i = 0; i < qr.size(); ++i) {
    CHECK(qc[i].real() == doctest::Approx(qr[i]).epsilon(1e-14));
    CHECK(std::abs(qc[i].imag()) < 1e-14);
  }
}

TEST_CASE("trace vector validates and indexes m_1..m_n") {
  CHECK_THROWS_AS(invariants::TraceVector(2, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(invariants::TraceVector(3, {1.0}), std::invalid_argument);
  const invariants::TraceVector tv(4, {2.0, 3.0, 1.0});
  CHECK(tv.at(1) == 0.0);
  CHECK(tv.at(2) == 2.0);
  CHECK(tv.at(4) == 1.0);
  CHECK_THROWS_AS(tv.at(5), std::invalid_argument);
}

TEST_CASE("closure reproduces the low-dimensional trace identities exactly") {
  // n = 3: m4 = m2^2 / 2, independent of m3.
  CHECK(invariants::close_trace(invariants::TraceVector(3, {2.0, 1.0})) == 2.0);
  CHECK(invariants::close_trace(invariants::TraceVector(3, {3.5, -4.0})) == 3.5 * 3.5 / 2.0);
  // n = 4: m5 = (5/6) m2 m3 with dyadic-friendly fixtures.
  CHECK(invariants::close_trace(invariants::TraceVector(4, {6.0, 6.0, 18.0})) == 30.0);
  CHECK(invariants::close_trace(invariants::TraceVector(4, {12.0, 3.0, 18.0})) == 30.0);
}

TEST_CASE("trace invariants evaluate the closed combinations") {
  const auto v3 = invariants::eval_trace_invariants(invariants::TraceVector(3, {2.0, 1.0}));
  REQUIRE(v3.size() == 1);
  CHECK(v3[0] == doctest::Approx(-2.0));

  const auto v0 = invariants::eval_trace_invariants(invariants::TraceVector(3, {0.0, 0.0}));
  CHECK(v0[0] == 0.0);

  const auto v4 = invariants::eval_trace_invariants(invariants::TraceVector(4, {2.0, 3.0, 1.0}));
  REQUIRE(v4.size() == 2);
  CHECK(v4[0] == doctest::Approx(-16.0));
  CHECK(v4[1] == doctest::Approx(43.0));

  CHECK_THROWS_AS(invariants::eval_trace_invariants(invariants::TraceVector(5, {1.0, 0.0, 0.0, 0.0})),
                  std::invalid_argument);
}
