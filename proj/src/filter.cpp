#include "butterfly/filter.hpp"

#include "butterfly/error.hpp"
#include "butterfly/rng.hpp"

#include <cmath>
#include <sstream>

namespace butterfly {

namespace {

double parse_number(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::Parse, "not a number: '" + text + "'");
}

}  // namespace

TestFunction parse_test_function(const std::string& spec, std::size_t states) {
  TestFunction out;
  out.name = spec;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "indicator") {
    const double k = parse_number(arg);
    require(k >= 1 && k <= static_cast<double>(states) && k == std::floor(k), ErrorCode::OutOfRange,
            "indicator state outside [1, S]");
    out.values.assign(states, 0.0);
    out.values[static_cast<std::size_t>(k) - 1] = 1.0;
  } else if (kind == "identity") {
    require(arg.empty(), ErrorCode::Parse, "identity takes no argument");
    for (std::size_t x = 0; x < states; ++x) out.values.push_back(static_cast<double>(x + 1));
  } else if (kind == "constant") {
    out.values.assign(states, parse_number(arg));
  } else if (kind == "values") {
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) out.values.push_back(parse_number(item));
    require(out.values.size() == states, ErrorCode::InvalidArgument,
            "values: expected " + std::to_string(states) + " entries");
  } else {
    fail(ErrorCode::Parse, "unknown test function '" + spec + "'");
  }
  return out;
}

double block_functional(std::span<const State> particles, std::span<const std::size_t> representatives,
                        std::span<const double> phi) {
  require(!representatives.empty(), ErrorCode::InvalidArgument, "empty block representative set");
  double sum = 0.0;
  for (std::size_t i : representatives) {
    require(i < particles.size(), ErrorCode::OutOfRange, "representative outside population");
    sum += phi[particles[i]];
  }
  return sum / static_cast<double>(representatives.size());
}

FilterRun run_filter(const FiniteHmm& hmm, std::span<const double> observations, const Schedule& s,
                     std::size_t horizon, const std::vector<TestFunction>& functionals,
                     const FilterOptions& options) {
  require(observations.size() > horizon, ErrorCode::InvalidArgument,
          "observations do not cover the horizon");
  const std::size_t n = s.size();
  const std::size_t states = hmm.states();
  for (const auto& f : functionals) {
    require(f.values.size() == states, ErrorCode::InvalidArgument,
            "test function '" + f.name + "' has wrong length");
  }
  for (const auto& reps : options.block_representatives) {
    for (std::size_t i : reps) require(i < n, ErrorCode::OutOfRange, "block representative outside population");
  }

  FilterRun run;
  run.horizon = horizon;
  run.n_particles = n;
  for (const auto& f : functionals) run.functionals.push_back(f.name);
  run.block_predicted.resize(options.block_representatives.size());
  run.block_filtered.resize(options.block_representatives.size());

  // Cumulative rows for inverse-CDF mutation and initialization.
  std::vector<double> init_cdf(states);
  std::vector<std::vector<double>> trans_cdf(states, std::vector<double>(states));
  {
    double acc = 0.0;
    for (std::size_t x = 0; x < states; ++x) init_cdf[x] = acc += hmm.initial()[x];
    for (std::size_t x = 0; x < states; ++x) {
      acc = 0.0;
      for (std::size_t z = 0; z < states; ++z) trans_cdf[x][z] = acc += hmm.transition()[x][z];
    }
  }
  const auto draw = [states](const std::vector<double>& cdf, double u) {
    for (std::size_t z = 0; z < states; ++z) {
      if (u < cdf[z]) return static_cast<State>(z);
    }
    return static_cast<State>(states - 1);
  };

  std::vector<State> particles(n);
  std::vector<State> resampled(n);
  std::vector<double> weights(n);
  std::vector<ParticleIndex> origin(n);
  AugmentedResampler engine;

  const auto record = [&](const std::vector<State>& pop, std::vector<std::vector<double>>& sink,
                          std::vector<std::vector<std::vector<double>>>& block_sink) {
    std::vector<std::size_t> counts(states, 0);
    for (State x : pop) ++counts[x];
    std::vector<double> row;
    for (const auto& f : functionals) {
      double sum = 0.0;
      for (std::size_t x = 0; x < states; ++x) sum += static_cast<double>(counts[x]) * f.values[x];
      row.push_back(sum / static_cast<double>(n));
    }
    sink.push_back(std::move(row));
    for (std::size_t b = 0; b < options.block_representatives.size(); ++b) {
      std::vector<double> brow;
      for (const auto& f : functionals) {
        brow.push_back(block_functional(pop, options.block_representatives[b], f.values));
      }
      block_sink[b].push_back(std::move(brow));
    }
  };

  for (std::size_t step = 0; step <= horizon; ++step) {
    const StreamKey key{options.seed, options.replicate, step};
    if (step == 0) {
      const Substream init(key, Purpose::Initialize, 0);
      for (std::size_t i = 0; i < n; ++i) particles[i] = draw(init_cdf, init.uniform(i));
    } else {
      const Substream mutate(key, Purpose::Mutate, 0);
      for (std::size_t i = 0; i < n; ++i) particles[i] = draw(trans_cdf[resampled[i]], mutate.uniform(i));
    }
    record(particles, run.predicted, run.block_predicted);

    const std::vector<double> g = hmm.weights(observations[step]);
    for (std::size_t i = 0; i < n; ++i) weights[i] = g[particles[i]];
    if (options.resampler == Resampler::Augmented) {
      engine.resample(s, weights, key, origin);
    } else {
      multinomial_resample(weights, key, origin);
    }
    for (std::size_t i = 0; i < n; ++i) resampled[i] = particles[origin[i]];
    record(resampled, run.filtered, run.block_filtered);

    if (options.keep_particles) {
      run.particles.push_back(particles);
      run.resampled.push_back(resampled);
    }
  }
  return run;
}

}  // namespace butterfly
