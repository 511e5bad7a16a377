#include "doctest.h"

#include "butterfly/error.hpp"
#include "butterfly/hmm.hpp"

#include <cmath>

using namespace butterfly;

namespace {

void check_close(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    REQUIRE(a[n].size() == b[n].size());
    for (std::size_t x = 0; x < a[n].size(); ++x) CHECK(std::abs(a[n][x] - b[n][x]) <= tol);
  }
}

}  // namespace

TEST_CASE("model validation") {
  Emission e;
  e.table = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(FiniteHmm({0.6, 0.6}, {{1, 0}, {0, 1}}, e), Error);
  CHECK_THROWS_AS(FiniteHmm({0.5, 0.5}, {{0.9, 0.2}, {0, 1}}, e), Error);
  e.table = {{0.5, 0.0}, {0.5, 0.5}};
  CHECK_THROWS_AS(FiniteHmm({0.5, 0.5}, {{1, 0}, {0, 1}}, e), Error);
  Emission gauss;
  gauss.kind = Emission::Kind::Gaussian;
  gauss.means = {0, 1};
  gauss.sds = {1, 0};
  CHECK_THROWS_AS(FiniteHmm({0.5, 0.5}, {{1, 0}, {0, 1}}, gauss), Error);
  auto hmm = binary_symmetric(0.1, 0.25);
  CHECK_THROWS_AS(hmm.check_observation(2), Error);
  CHECK_THROWS_AS(hmm.check_observation(0.5), Error);
}

TEST_CASE("binary symmetric model") {
  auto hmm = binary_symmetric(0.1, 0.25);
  CHECK(hmm.initial() == std::vector<double>{0.5, 0.5});
  CHECK(hmm.transition()[0][1] == doctest::Approx(0.1));
  CHECK(hmm.weights(1) == std::vector<double>{0.25, 0.75});
  CHECK(hmm.apply_kernel(std::vector<double>{0, 1})[0] == doctest::Approx(0.1));
}

TEST_CASE("gaussian emission density") {
  Emission e;
  e.kind = Emission::Kind::Gaussian;
  e.means = {0, 2};
  e.sds = {1, 0.5};
  FiniteHmm hmm({0.5, 0.5}, {{0.9, 0.1}, {0.1, 0.9}}, e);
  const double pi = std::acos(-1.0);
  CHECK(hmm.density(0, 1.0) == doctest::Approx(std::exp(-0.5) / std::sqrt(2 * pi)));
  CHECK(hmm.density(1, 1.0) == doctest::Approx(std::exp(-2.0) / (0.5 * std::sqrt(2 * pi))));
  std::vector<double> y{0.3, -1.2, 2.5, 1.9};
  check_close(exact_filter(hmm, y).filter, enumerate_trajectories(hmm, y).filter, 1e-12);
}

TEST_CASE("simulation") {
  Emission e;
  e.table = {{0.5, 0.5}, {0.5, 0.5}};
  FiniteHmm stuck({1, 0}, {{1, 0}, {0, 1}}, e);
  auto t = simulate(stuck, 20, 3);
  for (auto x : t.states) CHECK(x == 0);
  CHECK(t.observations.size() == 21);
  auto hmm = binary_symmetric(0.2, 0.1);
  auto a = simulate(hmm, 30, 9), b = simulate(hmm, 30, 9);
  CHECK(a.states == b.states);
  CHECK(a.observations == b.observations);
  // uniform is stationary for a symmetric flip
  auto half = binary_symmetric(0.5, 0.1);
  std::size_t ones = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    auto tr = simulate(half, 5, seed);
    for (auto x : tr.states) ones += x, ++total;
  }
  CHECK(std::abs(double(ones) / total - 0.5) < 4 * std::sqrt(0.25 / total));
}

TEST_CASE("exact filter examples") {
  auto hmm = binary_symmetric(0.1, 0.25);
  std::vector<double> y{1};
  auto ef = exact_filter(hmm, y);
  CHECK(ef.filter[0][0] == doctest::Approx(0.25));
  CHECK(ef.filter[0][1] == doctest::Approx(0.75));
  Emission e;
  e.table = {{0.3, 0.7}, {0.6, 0.4}, {0.2, 0.8}};
  std::vector<std::vector<double>> flat(3, std::vector<double>(3, 1.0 / 3));
  FiniteHmm mixing({0.7, 0.2, 0.1}, flat, e);
  auto f = exact_filter(mixing, std::vector<double>{0, 1, 1, 0});
  for (std::size_t n = 1; n <= 3; ++n)
    for (double p : f.predictor[n]) CHECK(p == doctest::Approx(1.0 / 3));
}

TEST_CASE("exact filter matches trajectory enumeration") {
  for (std::size_t states = 2; states <= 4; ++states) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto hmm = random_instance(states, 3, seed);
      auto y = simulate(hmm, 5, seed + 50).observations;
      auto a = exact_filter(hmm, y), b = enumerate_trajectories(hmm, y);
      check_close(a.predictor, b.predictor, 1e-12);
      check_close(a.filter, b.filter, 1e-12);
    }
  }
}

TEST_CASE("random instances are valid and seeded") {
  auto a = random_instance(3, 4, 8), b = random_instance(3, 4, 8);
  CHECK(a.transition() == b.transition());
  CHECK(a.emission().table == b.emission().table);
  double sum = 0;
  for (double p : a.initial()) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
}
