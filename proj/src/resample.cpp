#include "butterfly/resample.hpp"

#include "butterfly/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace butterfly {

void check_weights(std::span<const double> weights) {
  require(!weights.empty(), ErrorCode::InvalidArgument, "empty weight vector");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    require(std::isfinite(w) && w > 0.0, ErrorCode::Numeric,
            "weight " + std::to_string(i + 1) + " is not strictly positive and finite");
    total += w;
  }
  require(std::isfinite(total) && total >= kMinTotalWeight, ErrorCode::Numeric,
          "total weight underflow");
}

std::vector<std::vector<double>> v_table(std::span<const double> weights, const Schedule& s) {
  require(weights.size() == s.size(), ErrorCode::InvalidArgument, "weight count differs from N");
  check_weights(weights);
  std::vector<std::vector<double>> v(s.stages() + 1);
  v[0].assign(weights.begin(), weights.end());
  for (std::size_t k = 1; k <= s.stages(); ++k) {
    v[k].resize(s.size());
    s.for_each_class(k, [&](const StageClass& c) {
      double total = 0.0;
      for (std::size_t q = 0; q < c.count; ++q) total += v[k - 1][c.member(q)];
      const double mean = total / static_cast<double>(c.count);
      for (std::size_t q = 0; q < c.count; ++q) v[k][c.member(q)] = mean;
    });
  }
  return v;
}

void AugmentedResampler::resample(const Schedule& s, std::span<const double> weights,
                                  const StreamKey& key, std::span<ParticleIndex> origin,
                                  ResampleTrace* trace) {
  const std::size_t n = s.size();
  const std::size_t m = s.stages();
  require(weights.size() == n && origin.size() == n, ErrorCode::InvalidArgument,
          "weight/origin length differs from N");
  check_weights(weights);

  v_prev_.assign(weights.begin(), weights.end());
  origin_prev_.resize(n);
  std::iota(origin_prev_.begin(), origin_prev_.end(), ParticleIndex{0});
  v_next_.resize(n);
  origin_next_.resize(n);

  if (trace) {
    trace->n = n;
    trace->m = m;
    trace->ancestors.assign(m + 1, {});
    trace->origins.assign(m + 1, {});
    trace->v.assign(m + 1, {});
    trace->origins[0] = origin_prev_;
    trace->v[0] = v_prev_;
  }

  for (std::size_t k = 1; k <= m; ++k) {
    const Substream stream(key, Purpose::Resample, k);
    std::vector<ParticleIndex>* anc = nullptr;
    if (trace) {
      trace->ancestors[k].resize(n);
      anc = &trace->ancestors[k];
    }
    const double* v_prev = v_prev_.data();
    double* v_next = v_next_.data();
    const ParticleIndex* o_prev = origin_prev_.data();
    ParticleIndex* o_next = origin_next_.data();
    ParticleIndex* anc_out = anc ? anc->data() : nullptr;
    s.visit_classes(k, [&](const StageClass& c) {
      if (cumulative_.size() < c.count) cumulative_.resize(c.count);
      double* cum = cumulative_.data();
      const std::size_t count = c.count;
      double total = 0.0;
      for (std::size_t q = 0; q < count; ++q) {
        total += v_prev[c.start + q * c.stride];
        cum[q] = total;
      }
      const double mean = total / static_cast<double>(count);
      // Rows sharing a class are exactly the class members.
      for (std::size_t q = 0; q < count; ++q) {
        const std::size_t i = c.start + q * c.stride;
        const double u = stream.uniform(i) * total;
        // first position with cum > u, clamped to the last member
        std::size_t pos = 0;
        if (count <= 8) {
          for (std::size_t t = 0; t + 1 < count; ++t) pos += cum[t] <= u;
        } else {
          pos = static_cast<std::size_t>(std::upper_bound(cum, cum + count, u) - cum);
          if (pos >= count) pos = count - 1;
        }
        const std::size_t j = c.start + pos * c.stride;
        v_next[i] = mean;
        o_next[i] = o_prev[j];
        if (anc_out) anc_out[i] = static_cast<ParticleIndex>(j);
      }
    });
    std::swap(v_prev_, v_next_);
    std::swap(origin_prev_, origin_next_);
    if (trace) {
      trace->origins[k] = origin_prev_;
      trace->v[k] = v_prev_;
    }
  }
  std::copy(origin_prev_.begin(), origin_prev_.end(), origin.begin());
}

void multinomial_resample(std::span<const double> weights, const StreamKey& key,
                          std::span<ParticleIndex> origin) {
  check_weights(weights);
  require(origin.size() == weights.size(), ErrorCode::InvalidArgument,
          "origin length differs from weight length");
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.back();
  const Substream stream(key, Purpose::Resample, 1);
  for (std::size_t i = 0; i < origin.size(); ++i) {
    const double u = stream.uniform(i) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    origin[i] = static_cast<ParticleIndex>(it - cumulative.begin());
  }
}

// ---------------------------------------------------------------------------

std::uint64_t count_assignments(const Schedule& s) {
  const long double cap = static_cast<long double>(std::numeric_limits<std::uint64_t>::max());
  long double total = 1.0L;
  for (std::size_t k = 1; k <= s.stages(); ++k) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      total *= static_cast<long double>(s.row_count(k));
      if (total > cap) return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(total);
}

namespace {

struct Choice {
  std::size_t column;
  Rational probability;
};

class TraceEnumerator {
 public:
  TraceEnumerator(std::span<const double> weights, const Schedule& s, const TraceVisitor& visit)
      : s_(s), visit_(visit), n_(s.size()), m_(s.stages()) {
    trace_.n = n_;
    trace_.m = m_;
    trace_.v = v_table(weights, s);
    trace_.ancestors.assign(m_ + 1, {});
    trace_.origins.assign(m_ + 1, std::vector<ParticleIndex>(n_));
    for (std::size_t k = 1; k <= m_; ++k) trace_.ancestors[k].resize(n_);
    std::iota(trace_.origins[0].begin(), trace_.origins[0].end(), ParticleIndex{0});

    // Exact V table, then per-(k, i) choice lists.
    std::vector<Rational> v_prev(n_);
    for (std::size_t i = 0; i < n_; ++i) v_prev[i] = Rational(weights[i]);
    choices_.assign(m_ + 1, std::vector<std::vector<Choice>>(n_));
    for (std::size_t k = 1; k <= m_; ++k) {
      std::vector<Rational> v_next(n_);
      for (std::size_t i = 0; i < n_; ++i) {
        const StageClass c = s.stage_class(k, i);
        Rational total = 0;
        for (std::size_t q = 0; q < c.count; ++q) total += v_prev[c.member(q)];
        v_next[i] = total / c.count;
        for (std::size_t q = 0; q < c.count; ++q) {
          const std::size_t j = c.member(q);
          choices_[k][i].push_back({j, v_prev[j] / total});
        }
      }
      v_prev = std::move(v_next);
    }
  }

  void run() { descend(0, Rational(1)); }

 private:
  void descend(std::size_t position, const Rational& probability) {
    if (position == n_ * m_) {
      visit_(trace_, probability);
      return;
    }
    const std::size_t k = position / n_ + 1;
    const std::size_t i = position % n_;
    for (const Choice& ch : choices_[k][i]) {
      trace_.ancestors[k][i] = static_cast<ParticleIndex>(ch.column);
      trace_.origins[k][i] = trace_.origins[k - 1][ch.column];
      descend(position + 1, probability * ch.probability);
    }
  }

  const Schedule& s_;
  const TraceVisitor& visit_;
  std::size_t n_;
  std::size_t m_;
  ResampleTrace trace_;
  std::vector<std::vector<std::vector<Choice>>> choices_;
};

}  // namespace

void for_each_trace(std::span<const double> weights, const Schedule& s, const TraceVisitor& visit) {
  require(weights.size() == s.size(), ErrorCode::InvalidArgument, "weight count differs from N");
  require(count_assignments(s) <= kEnumerationCap, ErrorCode::CapacityExceeded,
          "ancestral assignments exceed enumeration cap of " + std::to_string(kEnumerationCap));
  TraceEnumerator(weights, s, visit).run();
}

Rational OutputLaw::pair_marginal(std::size_t a, std::size_t b, std::size_t j,
                                  std::size_t l) const {
  require(a < n && b < n && j < n && l < n, ErrorCode::OutOfRange, "pair marginal index");
  Rational out = 0;
  for (const auto& [origins, p] : outcomes) {
    if (origins[a] == j && origins[b] == l) out += p;
  }
  return out;
}

OutputLaw exact_output_distribution(std::span<const double> weights, const Schedule& s) {
  std::map<std::vector<ParticleIndex>, Rational> law;
  for_each_trace(weights, s, [&](const ResampleTrace& t, const Rational& p) {
    law[t.origins[t.m]] += p;
  });
  OutputLaw out;
  out.n = s.size();
  out.marginal = RationalMatrix(out.n);
  out.outcomes.reserve(law.size());
  for (auto& [origins, p] : law) {
    for (std::size_t i = 0; i < out.n; ++i) out.marginal(i, origins[i]) += p;
    out.outcomes.emplace_back(origins, p);
  }
  return out;
}

namespace {

Rational weighted_mean(std::span<const double> weights, std::span<const double> phi_in) {
  Rational num = 0;
  Rational den = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    num += Rational(weights[i]) * Rational(phi_in[i]);
    den += Rational(weights[i]);
  }
  return num / den;
}

}  // namespace

BiasCheck lack_of_bias_exact(std::span<const double> weights, std::span<const double> phi_in,
                             const Schedule& s) {
  require(phi_in.size() == s.size(), ErrorCode::InvalidArgument, "phi length differs from N");
  std::vector<Rational> phi(phi_in.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = Rational(phi_in[i]);
  Rational lhs = 0;
  for_each_trace(weights, s, [&](const ResampleTrace& t, const Rational& p) {
    Rational sum = 0;
    for (ParticleIndex o : t.origins[t.m]) sum += phi[o];
    lhs += p * sum;
  });
  lhs /= static_cast<std::int64_t>(s.size());
  const Rational rhs = weighted_mean(weights, phi_in);
  Rational diff = lhs - rhs;
  if (diff < 0) diff = -diff;
  BiasCheck out;
  out.lhs = to_double(lhs);
  out.rhs = to_double(rhs);
  out.abs_diff = to_double(diff);
  return out;
}

BiasCheck lack_of_bias_monte_carlo(std::span<const double> weights, std::span<const double> phi_in,
                                   const Schedule& s, std::uint64_t seed,
                                   std::size_t replicates) {
  require(phi_in.size() == s.size(), ErrorCode::InvalidArgument, "phi length differs from N");
  require(replicates >= 2, ErrorCode::InvalidArgument, "need at least two replicates");
  AugmentedResampler engine;
  std::vector<ParticleIndex> origin(s.size());
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t r = 0; r < replicates; ++r) {
    engine.resample(s, weights, StreamKey{seed, r, 0}, origin);
    double sum = 0.0;
    for (ParticleIndex o : origin) sum += phi_in[o];
    const double x = sum / static_cast<double>(s.size());
    const double delta = x - mean;
    mean += delta / static_cast<double>(r + 1);
    m2 += delta * (x - mean);
  }
  BiasCheck out;
  out.lhs = mean;
  out.rhs = to_double(weighted_mean(weights, phi_in));
  out.abs_diff = std::abs(out.lhs - out.rhs);
  out.se = std::sqrt(m2 / static_cast<double>(replicates - 1) / static_cast<double>(replicates));
  out.replicates = replicates;
  return out;
}

// ---------------------------------------------------------------------------

MartingaleTrace martingale_increments(const ResampleTrace& trace, const Schedule& s,
                                      const Partition& partition,
                                      std::span<const std::size_t> representatives,
                                      std::span<const double> phi_in) {
  const std::size_t n = s.size();
  const std::size_t m = s.stages();
  const std::size_t d = partition.d;
  require(trace.n == n && trace.m == m && trace.origins.size() == m + 1, ErrorCode::InvalidArgument,
          "trace does not belong to this schedule");
  require(phi_in.size() == n, ErrorCode::InvalidArgument, "phi length differs from N");
  require(d >= 1 && d <= m, ErrorCode::OutOfRange, "d outside [1, m]");
  require(representatives.size() == partition.blocks.size(), ErrorCode::InvalidArgument,
          "need one representative per block");
  for (std::size_t u = 0; u < partition.blocks.size(); ++u) {
    require(contains(partition.blocks[u], representatives[u]), ErrorCode::InvalidArgument,
            "representative not in its block");
  }
  require(partition_structure_holds(s, partition), ErrorCode::AssumptionViolation,
          "partition does not satisfy the block structure for this schedule");

  const std::size_t blocks = partition.blocks.size();
  const auto& g = trace.v[0];
  double g_total = 0.0;
  double g_phi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g_total += g[i];
    g_phi += g[i] * phi_in[i];
  }
  const double centre = g_phi / g_total;
  const auto phibar = [&](std::size_t k, std::size_t i) {
    return phi_in[trace.origins[k][i]] - centre;
  };
  const double g_max = *std::max_element(g.begin(), g.end());
  const auto [lo, hi] = std::minmax_element(phi_in.begin(), phi_in.end());
  const double osc = *hi - *lo;

  MartingaleTrace out;
  out.d = d;
  out.partition = partition;
  out.representatives.assign(representatives.begin(), representatives.end());
  out.scale = 1.0 / std::sqrt(static_cast<double>(m - d) / static_cast<double>(n) +
                              1.0 / static_cast<double>(blocks));
  const double S = out.scale;
  out.increments.reserve((m - d) * n + blocks);
  out.bounds_hold = true;
  const auto check_bound = [&](double x, double denom) {
    const double bound = S / denom * g_max * osc;
    if (std::abs(x) > bound * (1.0 + 1e-12) + 1e-15) out.bounds_hold = false;
  };

  for (std::size_t q = 1; q + d <= m; ++q) {
    for (std::size_t i = 0; i < n; ++i) {
      const StageClass c = s.stage_class(q, i);
      double mix = 0.0;
      for (std::size_t p = 0; p < c.count; ++p) {
        const std::size_t j = c.member(p);
        mix += trace.v[q - 1][j] * phibar(q - 1, j);
      }
      mix /= static_cast<double>(c.count);
      const double vi = trace.v[q][i];
      const double x = S * vi / static_cast<double>(n) * (phibar(q, i) - mix / vi);
      check_bound(x, static_cast<double>(n));
      out.increments.push_back(x);
    }
  }

  double sum_out = 0.0;
  for (std::size_t u = 0; u < blocks; ++u) {
    const std::size_t i = representatives[u];
    double mix = 0.0;
    for (const auto& [j, w] : tail_product_row(s, d, i)) mix += w * trace.v[m - d][j] * phibar(m - d, j);
    const double vi = trace.v[m][i];
    const double x = S * vi / static_cast<double>(blocks) * (phibar(m, i) - mix / vi);
    check_bound(x, static_cast<double>(blocks));
    out.increments.push_back(x);
    sum_out += phi_in[trace.origins[m][i]];
  }

  double total = 0.0;
  for (double x : out.increments) total += x;
  out.decomposition = total / S;
  out.target = g_total / static_cast<double>(n) * (sum_out / static_cast<double>(blocks)) -
               g_phi / static_cast<double>(n);
  return out;
}

double conditional_second_moment_closed_form(std::span<const double> weights,
                                             std::span<const double> phi_in, const Schedule& s) {
  const std::size_t n = s.size();
  require(weights.size() == n && phi_in.size() == n, ErrorCode::InvalidArgument,
          "input length differs from N");
  check_weights(weights);
  double g_total = 0.0;
  double g_phi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g_total += weights[i];
    g_phi += weights[i] * phi_in[i];
  }
  const double centre = g_phi / g_total;
  std::vector<double> phibar(n);
  for (std::size_t i = 0; i < n; ++i) phibar[i] = phi_in[i] - centre;

  const double nn = static_cast<double>(n);
  double diag = 0.0;
  double colliding = 0.0;
  double non_colliding = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag += weights[i] * weights[i] * phibar[i] * phibar[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const CollisionCounts cc = collision_cardinalities(s, i, j);
      colliding += weights[i] * phibar[i] * phibar[i] * weights[j] *
                   static_cast<double>(cc.colliding);
      non_colliding += weights[i] * phibar[i] * weights[j] * phibar[j] *
                       static_cast<double>(cc.non_colliding);
    }
  }
  const double n4 = nn * nn * nn * nn;
  return diag / (nn * nn) + colliding / n4 + non_colliding / n4;
}

double conditional_second_moment_enumerated(std::span<const double> weights,
                                            std::span<const double> phi_in, const Schedule& s) {
  const std::size_t n = s.size();
  require(phi_in.size() == n, ErrorCode::InvalidArgument, "phi length differs from N");
  const Partition singletons = singleton_partition(n);
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  const double factor = static_cast<double>(s.stages()) / static_cast<double>(n);
  double total = 0.0;
  for_each_trace(weights, s, [&](const ResampleTrace& t, const Rational& p) {
    const MartingaleTrace mt = martingale_increments(t, s, singletons, identity, phi_in);
    double sum = 0.0;
    for (double x : mt.increments) sum += x;
    total += to_double(p) * factor * sum * sum;
  });
  return total;
}

}  // namespace butterfly
