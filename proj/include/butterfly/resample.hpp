#pragma once

// Augmented resampling: m stages, each drawing particle i from the
// V-weighted mixture over its stage-(k-1) neighbours in row i of A_k.

#include "butterfly/graph.hpp"
#include "butterfly/rational.hpp"
#include "butterfly/rng.hpp"
#include "butterfly/schedule.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace butterfly {

using ParticleIndex = std::uint32_t;

// Genealogy and weights of one resampling call.
struct ResampleTrace {
  std::size_t n = 0;
  std::size_t m = 0;
  // ancestors[k][i] = j such that xi_k^i = xi_{k-1}^j, k in [1, m]; ancestors[0] empty
  std::vector<std::vector<ParticleIndex>> ancestors;
  // origins[k][i] = input index that xi_k^i descends from, k in [0, m]
  std::vector<std::vector<ParticleIndex>> origins;
  // v[k][i] = V_k^i, k in [0, m]
  std::vector<std::vector<double>> v;
};

// Smallest total input weight accepted before declaring underflow.
inline constexpr double kMinTotalWeight = 1e-300;

// Throws unless every weight is finite and strictly positive and the total
// is at least kMinTotalWeight.
void check_weights(std::span<const double> weights);

// V_k^i for k = 0..m from the input weights, using sparse rows.
std::vector<std::vector<double>> v_table(std::span<const double> weights, const Schedule& s);

// Reusable engine. Draw for (stage k, output i) uses uniform
// Substream(key, Purpose::Resample, k).uniform(i), with inverse-CDF over the
// ascending neighbour list (ties resolved toward the lowest index).
class AugmentedResampler {
 public:
  // origin[i] receives the input index of output particle i.
  void resample(const Schedule& s, std::span<const double> weights, const StreamKey& key,
                std::span<ParticleIndex> origin, ResampleTrace* trace = nullptr);

 private:
  std::vector<double> v_prev_;
  std::vector<double> v_next_;
  std::vector<ParticleIndex> origin_prev_;
  std::vector<ParticleIndex> origin_next_;
  std::vector<double> cumulative_;
};

// Standard multinomial resampling drawn directly from the normalized weights
// (no stage machinery); uses the same substream as stage 1 above.
void multinomial_resample(std::span<const double> weights, const StreamKey& key,
                          std::span<ParticleIndex> origin);

template <class T>
struct ParticleSystem {
  std::vector<T> values;
  std::function<double(const T&)> weight;
};

template <class T>
std::pair<ParticleSystem<T>, ResampleTrace> augmented_resample(const ParticleSystem<T>& in,
                                                               const Schedule& s,
                                                               const StreamKey& key) {
  std::vector<double> weights(in.values.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = in.weight(in.values[i]);
  std::vector<ParticleIndex> origin(in.values.size());
  ResampleTrace trace;
  AugmentedResampler engine;
  engine.resample(s, weights, key, origin, &trace);
  ParticleSystem<T> out{{}, in.weight};
  out.values.reserve(origin.size());
  for (ParticleIndex o : origin) out.values.push_back(in.values[o]);
  return {std::move(out), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Exact enumeration oracles. The total number of ancestral assignments,
// prod_k prod_i |P_k(i)|, must not exceed kEnumerationCap.

inline constexpr std::uint64_t kEnumerationCap = 1'000'000;

std::uint64_t count_assignments(const Schedule& s);

using TraceVisitor = std::function<void(const ResampleTrace&, const Rational& probability)>;

// Visits every ancestral assignment with its exact probability.
void for_each_trace(std::span<const double> weights, const Schedule& s, const TraceVisitor& visit);

struct OutputLaw {
  std::size_t n = 0;
  // distinct output origin vectors with their probabilities
  std::vector<std::pair<std::vector<ParticleIndex>, Rational>> outcomes;
  // marginal(i, j) = P(xi_out^i = xi_in^j)
  RationalMatrix marginal;

  // P(xi_out^a = xi_in^j and xi_out^b = xi_in^l)
  Rational pair_marginal(std::size_t a, std::size_t b, std::size_t j, std::size_t l) const;
};

OutputLaw exact_output_distribution(std::span<const double> weights, const Schedule& s);

struct BiasCheck {
  double lhs = 0.0;   // E[N^-1 sum phi(xi_out) | xi_in]
  double rhs = 0.0;   // sum g phi / sum g
  double abs_diff = 0.0;
  double se = 0.0;    // Monte Carlo standard error (0 in exact mode)
  std::size_t replicates = 0;
};

// phi_in[i] = phi(xi_in^i).
BiasCheck lack_of_bias_exact(std::span<const double> weights, std::span<const double> phi_in,
                             const Schedule& s);
BiasCheck lack_of_bias_monte_carlo(std::span<const double> weights, std::span<const double> phi_in,
                                   const Schedule& s, std::uint64_t seed, std::size_t replicates);

// ---------------------------------------------------------------------------
// Block-wise martingale decomposition of the resampling error.

struct MartingaleTrace {
  std::size_t d = 1;
  Partition partition;
  std::vector<std::size_t> representatives;  // J(u), one per block
  std::vector<double> increments;            // X_rho, rho in [(m - d) N + |I|]
  double scale = 0.0;                        // S = ((m - d)/N + 1/|I|)^(-1/2)
  double decomposition = 0.0;                // S^-1 sum_rho X_rho
  double target = 0.0;  // (N^-1 sum g)(|I|^-1 sum phi(xi_out^J)) - N^-1 sum g phi(xi_in)
  bool bounds_hold = false;
};

MartingaleTrace martingale_increments(const ResampleTrace& trace, const Schedule& s,
                                      const Partition& partition,
                                      std::span<const std::size_t> representatives,
                                      std::span<const double> phi_in);

// Collision-analysis formula for (m/N) E[(sum_rho X_rho)^2 | xi_in] with
// singleton blocks, d = 1.
double conditional_second_moment_closed_form(std::span<const double> weights,
                                             std::span<const double> phi_in, const Schedule& s);

// Same quantity by enumerating every ancestral assignment and summing the
// squared martingale increments exactly weighted.
double conditional_second_moment_enumerated(std::span<const double> weights,
                                            std::span<const double> phi_in, const Schedule& s);

}  // namespace butterfly
