#include "doctest.h"

#include "butterfly/error.hpp"
#include "butterfly/filter.hpp"

#include <cmath>

using namespace butterfly;

TEST_CASE("test function parsing") {
  CHECK(parse_test_function("indicator:2", 3).values == std::vector<double>{0, 1, 0});
  CHECK(parse_test_function("identity", 3).values == std::vector<double>{1, 2, 3});
  CHECK(parse_test_function("constant:2.5", 2).values == std::vector<double>{2.5, 2.5});
  CHECK(parse_test_function("values:1,-1", 2).values == std::vector<double>{1, -1});
  CHECK_THROWS_AS(parse_test_function("indicator:4", 3), Error);
  CHECK_THROWS_AS(parse_test_function("values:1", 2), Error);
  CHECK_THROWS_AS(parse_test_function("cubic", 2), Error);
}

TEST_CASE("single particle follows one trajectory") {
  auto hmm = binary_symmetric(0.3, 0.2);
  auto y = simulate(hmm, 4, 1).observations;
  FilterOptions opt;
  opt.keep_particles = true;
  auto run = run_filter(hmm, y, Schedule::multinomial(1), 4, {parse_test_function("identity", 2)}, opt);
  for (std::size_t n = 0; n <= 4; ++n) {
    CHECK(run.predicted[n][0] == run.particles[n][0] + 1.0);
    CHECK(run.filtered[n][0] == run.predicted[n][0]);
  }
}

TEST_CASE("deterministic model keeps the initial state") {
  Emission e;
  e.table = {{0.2, 0.8}, {0.6, 0.4}, {0.5, 0.5}};
  std::vector<std::vector<double>> id{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  FiniteHmm hmm({0, 1, 0}, id, e);
  std::vector<double> y{0, 1, 1, 0};
  auto run = run_filter(hmm, y, Schedule::radix(2, 5), 3, {parse_test_function("identity", 3)}, {});
  for (std::size_t n = 0; n <= 3; ++n) {
    CHECK(run.predicted[n][0] == 2.0);
    CHECK(run.filtered[n][0] == 2.0);
  }
}

TEST_CASE("runs are reproducible and keyed by replicate") {
  auto hmm = binary_symmetric(0.1, 0.25);
  auto y = simulate(hmm, 5, 11).observations;
  std::vector<TestFunction> f{parse_test_function("indicator:1", 2)};
  FilterOptions opt;
  opt.seed = 3;
  opt.replicate = 1;
  auto s = Schedule::mixed_radix(2, 32);
  auto a = run_filter(hmm, y, s, 5, f, opt);
  auto b = run_filter(hmm, y, s, 5, f, opt);
  CHECK(a.predicted == b.predicted);
  CHECK(a.filtered == b.filtered);
  opt.replicate = 2;
  auto c = run_filter(hmm, y, s, 5, f, opt);
  CHECK(a.filtered != c.filtered);
}

TEST_CASE("block averages") {
  auto hmm = binary_symmetric(0.1, 0.25);
  auto y = simulate(hmm, 3, 2).observations;
  auto s = Schedule::radix(2, 6);
  std::vector<TestFunction> f{parse_test_function("indicator:1", 2), parse_test_function("constant:1", 2)};
  auto part = build_partition(s, 2);
  std::vector<std::size_t> reps;
  for (const auto& blk : part.blocks) reps.push_back(blk.front());
  std::vector<std::size_t> everyone(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) everyone[i] = i;
  FilterOptions opt;
  opt.seed = 5;
  opt.keep_particles = true;
  opt.block_representatives = {reps, everyone};
  auto run = run_filter(hmm, y, s, 3, f, opt);
  for (std::size_t n = 0; n <= 3; ++n) {
    // direct recomputation from the stored particles
    double direct = 0;
    for (auto j : reps) direct += run.particles[n][j] == 0 ? 1.0 : 0.0;
    CHECK(run.block_predicted[0][n][0] == doctest::Approx(direct / reps.size()));
    CHECK(block_functional(run.particles[n], reps, f[0].values) == run.block_predicted[0][n][0]);
    CHECK(run.block_predicted[1][n][0] == doctest::Approx(run.predicted[n][0]));
    CHECK(run.block_filtered[1][n][0] == doctest::Approx(run.filtered[n][0]));
    CHECK(run.block_predicted[0][n][1] == 1.0);
    CHECK(run.block_filtered[0][n][1] == 1.0);
  }
}

TEST_CASE("filter estimates are close to the exact filter") {
  auto hmm = binary_symmetric(0.1, 0.25);
  auto y = simulate(hmm, 5, 11).observations;
  auto ef = exact_filter(hmm, y);
  std::vector<TestFunction> f{parse_test_function("indicator:1", 2)};
  FilterOptions opt;
  opt.seed = 77;
  for (auto s : {Schedule::multinomial(4096), Schedule::radix(2, 12), Schedule::mixed_radix(2, 2048)}) {
    auto run = run_filter(hmm, y, s, 5, f, opt);
    for (std::size_t n = 0; n <= 5; ++n) {
      CHECK(std::abs(run.predicted[n][0] - ef.predictor[n][0]) < 0.05);
      CHECK(std::abs(run.filtered[n][0] - ef.filter[n][0]) < 0.05);
    }
  }
}

TEST_CASE("observations must cover the horizon") {
  auto hmm = binary_symmetric(0.1, 0.25);
  std::vector<double> y{0, 1};
  CHECK_THROWS_AS(run_filter(hmm, y, Schedule::multinomial(8), 3, {parse_test_function("identity", 2)}, {}), Error);
}
