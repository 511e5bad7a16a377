#pragma once

// JSON model, observation and experiment configuration.

#include "butterfly/hmm.hpp"
#include "butterfly/schedule.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace butterfly {

// {"initial": [...], "transition": [[...]], "emission": {"type": "table", "table": [[...]]}}
// {"initial": [...], "transition": [[...]], "emission": {"type": "gaussian", "means": [...], "sds": [...]}}
// {"builtin": "binary_symmetric", "p": 0.1, "q": 0.25}
// {"builtin": "random", "states": 3, "symbols": 2, "seed": 1}
FiniteHmm model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const FiniteHmm& hmm);

// Either a bare array or {"observations": [...]}.
std::vector<double> observations_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

inline constexpr double kParticleOperationBudget = 5e9;

struct ExperimentConfig {
  nlohmann::json model;  // resolved model description
  // Observation source: explicit values, or simulated from the model.
  std::vector<double> observations;
  std::optional<std::uint64_t> observation_seed;

  Family family = Family::Multinomial;
  std::size_t r = 2;
  // m for radix, c for mixed, N for multinomial
  std::vector<std::size_t> grid;
  std::size_t replicates = 1000;
  std::size_t horizon = 5;
  std::vector<std::string> functionals{"indicator:1"};
  std::uint64_t seed = 1;
  double rel_tol = 0.10;
  std::size_t threads = 1;  // 0: hardware concurrency
  bool force = false;
  std::string csv_path;
  std::string json_path;

  std::size_t d = 2;             // moment decay block depth
  double p = 2.0;                // moment decay exponent
  std::optional<std::size_t> discrimination_step;  // radix scaling regression at this n

  nlohmann::json raw;  // input echo
};

// Applies defaults, resolves model/observation file references relative to
// base_dir, and honours BUTTERFLY_SEED.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

Schedule schedule_for(Family family, std::size_t r, std::size_t grid_value);

// Resolved model and observations (simulated when a seed is configured).
FiniteHmm config_model(const ExperimentConfig& cfg);
std::vector<double> config_observations(const ExperimentConfig& cfg, const FiniteHmm& hmm);

}  // namespace butterfly
