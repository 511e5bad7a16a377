#pragma once

// Particle filter: mutation plus augmented resampling at every step.

#include "butterfly/hmm.hpp"
#include "butterfly/resample.hpp"
#include "butterfly/schedule.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace butterfly {

// Test function phi: state -> real, tabulated on the S states.
struct TestFunction {
  std::string name;
  std::vector<double> values;
};

// "indicator:k" (state k, 1-based), "identity" (state index, 1-based),
// "constant:c", "values:a,b,...".
TestFunction parse_test_function(const std::string& spec, std::size_t states);

using State = std::uint32_t;

enum class Resampler {
  Augmented,          // Algorithm driven by the schedule
  DirectMultinomial,  // plain weighted multinomial draw, ignores the schedule stages
};

struct FilterOptions {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  bool keep_particles = false;
  Resampler resampler = Resampler::Augmented;
  // Each entry is a choice of representatives J, one per partition block;
  // block averages of every functional are recorded at every step.
  std::vector<std::vector<std::size_t>> block_representatives;
};

struct FilterRun {
  std::size_t horizon = 0;
  std::size_t n_particles = 0;
  std::vector<std::string> functionals;
  // [n][f]: pi_n^N(phi_f) and pi^_n^N(phi_f)
  std::vector<std::vector<double>> predicted;
  std::vector<std::vector<double>> filtered;
  // [b][n][f] block averages for options.block_representatives[b]
  std::vector<std::vector<std::vector<double>>> block_predicted;
  std::vector<std::vector<std::vector<double>>> block_filtered;
  // [n][i], only with keep_particles
  std::vector<std::vector<State>> particles;
  std::vector<std::vector<State>> resampled;
};

// Runs steps n = 0..horizon; observations must cover them.
FilterRun run_filter(const FiniteHmm& hmm, std::span<const double> observations, const Schedule& s,
                     std::size_t horizon, const std::vector<TestFunction>& functionals,
                     const FilterOptions& options);

// |J|^-1 sum_u phi(particles[J(u)])
double block_functional(std::span<const State> particles, std::span<const std::size_t> representatives,
                        std::span<const double> phi);

}  // namespace butterfly
