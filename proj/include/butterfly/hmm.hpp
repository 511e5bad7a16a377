#pragma once

// Finite-state hidden Markov models and the exact forward recursion.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace butterfly {

using Matrix = std::vector<std::vector<double>>;

struct Emission {
  enum class Kind { Table, Gaussian };
  Kind kind = Kind::Table;
  // Table: table[x][y] = g(x, y) for integer symbols y in [0, symbols).
  Matrix table;
  // Gaussian: y ~ N(means[x], sds[x]^2).
  std::vector<double> means;
  std::vector<double> sds;
};

class FiniteHmm {
 public:
  // Validates: initial sums to 1, rows of transition sum to 1 (1e-12),
  // all table entries strictly positive, all sds strictly positive.
  FiniteHmm(std::vector<double> initial, Matrix transition, Emission emission);

  std::size_t states() const noexcept { return initial_.size(); }
  const std::vector<double>& initial() const noexcept { return initial_; }
  const Matrix& transition() const noexcept { return transition_; }
  const Emission& emission() const noexcept { return emission_; }
  // 0 for Gaussian emissions.
  std::size_t symbols() const noexcept;

  // g(x, y) > 0.
  double density(std::size_t state, double y) const;
  // (g(0, y), ..., g(S - 1, y))
  std::vector<double> weights(double y) const;
  // Throws unless y is a valid observation for this model.
  void check_observation(double y) const;

  // (f psi)(x) = sum_x' f(x, x') psi(x')
  std::vector<double> apply_kernel(std::span<const double> psi) const;

 private:
  std::vector<double> initial_;
  Matrix transition_;
  Emission emission_;
};

struct Trajectory {
  std::vector<std::size_t> states;
  std::vector<double> observations;
};

// Uses Purpose::Simulate substreams keyed by (seed, 0, n).
Trajectory simulate(const FiniteHmm& hmm, std::size_t horizon, std::uint64_t seed);

struct ExactFilter {
  std::vector<std::vector<double>> predictor;  // pi_n, n = 0..T
  std::vector<std::vector<double>> filter;     // pi^_n
  std::vector<std::vector<double>> g;          // g_n(x) = g(x, y_n)
  std::vector<double> normalizer;              // pi_n(g_n)

  std::size_t horizon() const noexcept { return predictor.empty() ? 0 : predictor.size() - 1; }
};

ExactFilter exact_filter(const FiniteHmm& hmm, std::span<const double> observations);

// Brute force over all S^(T+1) state trajectories. Capped at 10^7 paths.
ExactFilter enumerate_trajectories(const FiniteHmm& hmm, std::span<const double> observations);

double evaluate(std::span<const double> law, std::span<const double> phi);

// Flip probability p, emission confusion q: g(x, y) = 1 - q if y == x else q.
FiniteHmm binary_symmetric(double p, double q);

// Seeded random model: strictly positive initial law, transition rows and
// emission table, entries bounded away from 0.
FiniteHmm random_instance(std::size_t states, std::size_t symbols, std::uint64_t seed);

}  // namespace butterfly
