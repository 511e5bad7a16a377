#include "doctest.h"

#include "butterfly/error.hpp"
#include "butterfly/resample.hpp"
#include "butterfly/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>

using namespace butterfly;

namespace {

std::vector<double> seeded_weights(std::size_t n, std::uint64_t seed) {
  Substream s({seed, 0, 0}, Purpose::InputGeneration, 0);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.2 + s.uniform(i);
  return w;
}

std::vector<double> index_values(std::size_t n) {
  std::vector<double> phi(n);
  std::iota(phi.begin(), phi.end(), 1.0);
  return phi;
}

}  // namespace

TEST_CASE("V table") {
  std::vector<double> g{1, 2, 3, 4};
  auto v = v_table(g, Schedule::radix(2, 2));
  REQUIRE(v.size() == 3);
  CHECK(v[1] == std::vector<double>{1.5, 1.5, 3.5, 3.5});
  CHECK(v[2] == std::vector<double>{2.5, 2.5, 2.5, 2.5});
  auto u = v_table(std::vector<double>{1, 3}, Schedule::multinomial(2));
  CHECK(u[1] == std::vector<double>{2, 2});
  auto c = v_table(std::vector<double>(27, 0.7), Schedule::radix(3, 3));
  for (const auto& row : c)
    for (double x : row) CHECK(x == doctest::Approx(0.7).epsilon(1e-15));
  // final stage is the global mean for any schedule
  auto w = seeded_weights(24, 3);
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / 24;
  const auto table = v_table(w, Schedule::mixed_radix(2, 12));
  for (double x : table.back()) CHECK(x == doctest::Approx(mean));
}

TEST_CASE("weight validation") {
  auto s = Schedule::multinomial(3);
  CHECK_THROWS_AS(check_weights(std::vector<double>{1, 0, 1}), Error);
  CHECK_THROWS_AS(check_weights(std::vector<double>{1, -1, 1}), Error);
  CHECK_THROWS_AS(check_weights(std::vector<double>{1, std::numeric_limits<double>::quiet_NaN(), 1}), Error);
  CHECK_THROWS_AS(check_weights(std::vector<double>{1e-310, 1e-310, 1e-310}), Error);
  std::vector<ParticleIndex> origin(3);
  AugmentedResampler engine;
  CHECK_THROWS_AS(engine.resample(s, std::vector<double>{1, 1}, {}, origin), Error);
}

TEST_CASE("exact output marginals") {
  auto two = exact_output_distribution(std::vector<double>{1, 3}, Schedule::multinomial(2));
  CHECK(two.marginal(0, 1) == Rational(3, 4));
  auto law = exact_output_distribution(std::vector<double>{1, 2, 3, 4}, Schedule::radix(2, 2));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(law.marginal(i, j) == Rational(j + 1, 10));
  auto flat = exact_output_distribution(std::vector<double>(4, 2.0), Schedule::radix(2, 2));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(flat.marginal(i, j) == Rational(1, 4));
  auto single = exact_output_distribution(std::vector<double>{5.0}, Schedule::multinomial(1));
  REQUIRE(single.outcomes.size() == 1);
  CHECK(single.outcomes[0].second == 1);
  Rational total = 0;
  for (const auto& [o, p] : law.outcomes) total += p;
  CHECK(total == 1);
}

TEST_CASE("exact lack of bias") {
  auto s = Schedule::radix(2, 2);
  std::vector<double> g{1, 2, 3, 4};
  auto b = lack_of_bias_exact(g, std::vector<double>{0, 0, 0, 1}, s);
  CHECK(b.lhs == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(b.rhs == doctest::Approx(0.4).epsilon(1e-15));
  auto one = lack_of_bias_exact(g, std::vector<double>(4, 1.0), s);
  CHECK(one.lhs == 1.0);
  CHECK(one.rhs == 1.0);
  auto m3 = lack_of_bias_exact(std::vector<double>{1, 1, 2}, index_values(3), Schedule::multinomial(3));
  CHECK(m3.rhs == doctest::Approx(2.25));
  CHECK(m3.abs_diff < 1e-12);
}

TEST_CASE("Monte Carlo lack of bias") {
  auto w = seeded_weights(64, 8);
  auto b = lack_of_bias_monte_carlo(w, index_values(64), Schedule::radix(2, 6), 17, 4000);
  CHECK(b.abs_diff <= 4 * b.se);
  CHECK(b.replicates == 4000);
}

TEST_CASE("resampling is a pure function of the key") {
  auto s = Schedule::radix(3, 4);
  auto w = seeded_weights(s.size(), 1);
  std::vector<ParticleIndex> a(s.size()), b(s.size()), c(s.size());
  AugmentedResampler e1, e2;
  e1.resample(s, w, {4, 5, 6}, a);
  std::vector<ParticleIndex> small(8);
  e1.resample(Schedule::radix(2, 3), seeded_weights(8, 2), {0, 0, 0}, small);  // scratch reuse
  e1.resample(s, w, {4, 5, 6}, c);
  e2.resample(s, w, {4, 5, 6}, b);
  CHECK(a == b);
  CHECK(a == c);
  e2.resample(s, w, {4, 5, 7}, b);
  CHECK(a != b);
}

TEST_CASE("trace bookkeeping") {
  auto s = Schedule::mixed_radix(2, 8);
  auto w = seeded_weights(16, 4);
  std::vector<ParticleIndex> origin(16);
  ResampleTrace t;
  AugmentedResampler().resample(s, w, {1, 2, 3}, origin, &t);
  REQUIRE(t.ancestors.size() == 3);
  for (std::size_t k = 1; k <= 2; ++k)
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(stage_row(s, k, i).entries.size() > 0);
      const auto j = t.ancestors[k][i];
      bool neighbour = false;
      for (const auto& e : stage_row(s, k, i).entries) neighbour |= e.column == j;
      CHECK(neighbour);
      CHECK(t.origins[k][i] == t.origins[k - 1][j]);
    }
  for (std::size_t i = 0; i < 16; ++i) CHECK(origin[i] == t.origins[2][i]);
  CHECK(t.v == v_table(w, s));
}

TEST_CASE("particle system wrapper") {
  ParticleSystem<int> ps{{10, 20, 30, 40}, [](const int& x) { return x / 10.0; }};
  auto [out, trace] = augmented_resample(ps, Schedule::radix(2, 2), {9, 0, 0});
  REQUIRE(out.values.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.values[i] == ps.values[trace.origins[2][i]]);
}

TEST_CASE("single-stage augmented resampling is multinomial resampling") {
  // Two independent implementations compared in law by a two-sample KS test
  // on the mean of phi over the outputs.
  const std::size_t n = 16, reps = 2000;
  auto w = seeded_weights(n, 21);
  auto phi = index_values(n);
  auto s = Schedule::multinomial(n);
  std::vector<double> a(reps), b(reps);
  std::vector<ParticleIndex> origin(n);
  AugmentedResampler engine;
  for (std::size_t r = 0; r < reps; ++r) {
    engine.resample(s, w, {101, r, 0}, origin);
    double sa = 0;
    for (auto o : origin) sa += phi[o];
    a[r] = sa / n;
    multinomial_resample(w, {202, r, 0}, origin);
    double sb = 0;
    for (auto o : origin) sb += phi[o];
    b[r] = sb / n;
  }
  auto ks = stats::ks_two_sample(a, b);
  CHECK(ks.p_value > 0.01);
  // with a shared key the two draws coincide
  std::vector<ParticleIndex> x(n), y(n);
  engine.resample(s, w, {5, 5, 5}, x);
  multinomial_resample(w, {5, 5, 5}, y);
  CHECK(x == y);
}

TEST_CASE("martingale identity and bounds") {
  struct Case {
    Schedule s;
    std::size_t d;
  };
  std::vector<Case> cases{{Schedule::radix(2, 3), 1}, {Schedule::radix(2, 3), 2}, {Schedule::radix(3, 3), 3},
                          {Schedule::mixed_radix(2, 4), 1}, {Schedule::mixed_radix(2, 4), 2}};
  for (const auto& [s, d] : cases) {
    auto part = build_partition(s, d);
    std::vector<std::size_t> reps;
    for (const auto& b : part.blocks) reps.push_back(b.back());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto w = seeded_weights(s.size(), seed);
      auto phi = seeded_weights(s.size(), seed + 1000);
      std::vector<ParticleIndex> origin(s.size());
      ResampleTrace t;
      AugmentedResampler().resample(s, w, {seed, 0, 0}, origin, &t);
      auto mt = martingale_increments(t, s, part, reps, phi);
      CHECK(mt.increments.size() == (s.stages() - d) * s.size() + part.blocks.size());
      CHECK(std::abs(mt.decomposition - mt.target) <= 1e-10);
      CHECK(mt.bounds_hold);
    }
  }
  // constant phi: every increment vanishes
  auto s = Schedule::radix(2, 2);
  std::vector<ParticleIndex> origin(4);
  ResampleTrace t;
  AugmentedResampler().resample(s, std::vector<double>{1, 2, 3, 4}, {1, 1, 1}, origin, &t);
  auto part = build_partition(s, 2);
  std::vector<std::size_t> reps{0, 1};
  auto mt = martingale_increments(t, s, part, reps, std::vector<double>(4, 3.0));
  for (double x : mt.increments) CHECK(std::abs(x) < 1e-14);
  CHECK(std::abs(mt.target) < 1e-14);
  // representative outside its block
  std::vector<std::size_t> wrong{1, 0};
  CHECK_THROWS_AS(martingale_increments(t, s, part, wrong, std::vector<double>(4, 1.0)), Error);
}

TEST_CASE("conditional second moment") {
  for (const auto& s : {Schedule::radix(2, 2), Schedule::multinomial(2), Schedule::multinomial(3),
                        Schedule::mixed_radix(2, 2)}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto w = seeded_weights(s.size(), seed);
      auto phi = index_values(s.size());
      const double closed = conditional_second_moment_closed_form(w, phi, s);
      const double enumerated = conditional_second_moment_enumerated(w, phi, s);
      CHECK(std::abs(closed - enumerated) <= 1e-10);
    }
  }
  auto s = Schedule::radix(2, 2);
  std::vector<double> g{1, 2, 3, 4};
  CHECK(conditional_second_moment_closed_form(g, std::vector<double>(4, 2.0), s) == doctest::Approx(0.0));
  CHECK(std::abs(conditional_second_moment_closed_form(g, index_values(4), s) -
                 conditional_second_moment_enumerated(g, index_values(4), s)) <= 1e-10);
}

TEST_CASE("one multinomial stage: second moment is the weighted variance") {
  // m = 1, singleton blocks: sum X = sqrt(N) gbar (mean phi(out) - mu) with N
  // iid outputs, so (m/N) E[(sum X)^2] = gbar^2 Var_g(phi) / N.
  std::vector<double> g{1, 3};
  std::vector<double> phi{0, 1};
  const double gbar = 2.0, var = 0.75 * 0.25;
  const double direct = gbar * gbar * var / 2.0;
  CHECK(conditional_second_moment_enumerated(g, phi, Schedule::multinomial(2)) == doctest::Approx(direct));
  CHECK(conditional_second_moment_closed_form(g, phi, Schedule::multinomial(2)) == doctest::Approx(direct));
}

TEST_CASE("enumeration cap") {
  CHECK(count_assignments(Schedule::radix(2, 2)) == 256);
  CHECK_THROWS_AS(exact_output_distribution(std::vector<double>(64, 1.0), Schedule::radix(2, 6)), Error);
}
