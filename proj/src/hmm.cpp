#include "butterfly/hmm.hpp"

#include "butterfly/error.hpp"
#include "butterfly/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace butterfly {

namespace {

void check_law(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, what + " has a negative entry");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::InvalidArgument, what + " does not sum to 1");
}

std::size_t draw(std::span<const double> p, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    acc += p[j];
    if (u < acc) return j;
  }
  return p.size() - 1;
}

}  // namespace

FiniteHmm::FiniteHmm(std::vector<double> initial, Matrix transition, Emission emission)
    : initial_(std::move(initial)), transition_(std::move(transition)), emission_(std::move(emission)) {
  const std::size_t s = initial_.size();
  require(s >= 1, ErrorCode::InvalidArgument, "model needs at least one state");
  check_law(initial_, "initial law");
  require(transition_.size() == s, ErrorCode::InvalidArgument, "transition must be S x S");
  for (std::size_t x = 0; x < s; ++x) {
    require(transition_[x].size() == s, ErrorCode::InvalidArgument, "transition must be S x S");
    check_law(transition_[x], "transition row " + std::to_string(x + 1));
  }
  if (emission_.kind == Emission::Kind::Table) {
    require(emission_.table.size() == s && !emission_.table[0].empty(), ErrorCode::InvalidArgument,
            "emission table must have one non-empty row per state");
    for (const auto& row : emission_.table) {
      require(row.size() == emission_.table[0].size(), ErrorCode::InvalidArgument,
              "emission rows differ in length");
      for (double v : row) {
        require(std::isfinite(v) && v > 0.0, ErrorCode::InvalidArgument,
                "emission weights must be strictly positive");
      }
    }
  } else {
    require(emission_.means.size() == s && emission_.sds.size() == s, ErrorCode::InvalidArgument,
            "gaussian emission needs one mean and sd per state");
    for (double sd : emission_.sds) {
      require(std::isfinite(sd) && sd > 0.0, ErrorCode::InvalidArgument, "sd must be positive");
    }
  }
}

std::size_t FiniteHmm::symbols() const noexcept {
  return emission_.kind == Emission::Kind::Table ? emission_.table[0].size() : 0;
}

void FiniteHmm::check_observation(double y) const {
  require(std::isfinite(y), ErrorCode::InvalidArgument, "non-finite observation");
  if (emission_.kind == Emission::Kind::Table) {
    require(y >= 0.0 && y == std::floor(y) && y < static_cast<double>(symbols()),
            ErrorCode::InvalidArgument, "observation " + std::to_string(y) + " is not a valid symbol");
  }
}

double FiniteHmm::density(std::size_t state, double y) const {
  require(state < states(), ErrorCode::OutOfRange, "state out of range");
  if (emission_.kind == Emission::Kind::Table) {
    check_observation(y);
    return emission_.table[state][static_cast<std::size_t>(y)];
  }
  const double z = (y - emission_.means[state]) / emission_.sds[state];
  return std::exp(-0.5 * z * z) / (emission_.sds[state] * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<double> FiniteHmm::weights(double y) const {
  std::vector<double> g(states());
  for (std::size_t x = 0; x < states(); ++x) g[x] = density(x, y);
  return g;
}

std::vector<double> FiniteHmm::apply_kernel(std::span<const double> psi) const {
  require(psi.size() == states(), ErrorCode::InvalidArgument, "function length differs from S");
  std::vector<double> out(states(), 0.0);
  for (std::size_t x = 0; x < states(); ++x) {
    for (std::size_t z = 0; z < states(); ++z) out[x] += transition_[x][z] * psi[z];
  }
  return out;
}

Trajectory simulate(const FiniteHmm& hmm, std::size_t horizon, std::uint64_t seed) {
  Trajectory out;
  out.states.resize(horizon + 1);
  out.observations.resize(horizon + 1);
  for (std::size_t n = 0; n <= horizon; ++n) {
    const Substream stream(StreamKey{seed, 0, n}, Purpose::Simulate, 0);
    const double u = stream.uniform(0);
    out.states[n] = n == 0 ? draw(hmm.initial(), u) : draw(hmm.transition()[out.states[n - 1]], u);
    const std::size_t x = out.states[n];
    const Emission& e = hmm.emission();
    if (e.kind == Emission::Kind::Table) {
      std::vector<double> row = e.table[x];
      const double total = std::accumulate(row.begin(), row.end(), 0.0);
      for (double& v : row) v /= total;
      out.observations[n] = static_cast<double>(draw(row, stream.uniform(1)));
    } else {
      const double u1 = 1.0 - stream.uniform(1);  // (0, 1]
      const double u2 = stream.uniform(2);
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      out.observations[n] = e.means[x] + e.sds[x] * z;
    }
  }
  return out;
}

ExactFilter exact_filter(const FiniteHmm& hmm, std::span<const double> observations) {
  require(!observations.empty(), ErrorCode::InvalidArgument, "need at least one observation");
  const std::size_t s = hmm.states();
  ExactFilter ef;
  std::vector<double> pred = hmm.initial();
  for (std::size_t n = 0; n < observations.size(); ++n) {
    if (n > 0) {
      std::vector<double> next(s, 0.0);
      const auto& prev = ef.filter.back();
      for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t z = 0; z < s; ++z) next[z] += prev[x] * hmm.transition()[x][z];
      }
      pred = std::move(next);
    }
    std::vector<double> g = hmm.weights(observations[n]);
    double norm = 0.0;
    for (std::size_t x = 0; x < s; ++x) norm += pred[x] * g[x];
    require(std::isfinite(norm) && norm > 0.0, ErrorCode::Numeric,
            "zero normalizer at step " + std::to_string(n));
    std::vector<double> filt(s);
    for (std::size_t x = 0; x < s; ++x) filt[x] = pred[x] * g[x] / norm;
    ef.predictor.push_back(pred);
    ef.filter.push_back(std::move(filt));
    ef.g.push_back(std::move(g));
    ef.normalizer.push_back(norm);
  }
  return ef;
}

ExactFilter enumerate_trajectories(const FiniteHmm& hmm, std::span<const double> observations) {
  require(!observations.empty(), ErrorCode::InvalidArgument, "need at least one observation");
  const std::size_t s = hmm.states();
  const std::size_t len = observations.size();
  double paths = 1.0;
  for (std::size_t n = 0; n < len; ++n) paths *= static_cast<double>(s);
  require(paths <= 1e7, ErrorCode::CapacityExceeded, "too many trajectories to enumerate");

  std::vector<std::vector<double>> g(len);
  for (std::size_t n = 0; n < len; ++n) g[n] = hmm.weights(observations[n]);

  // Unnormalized marginals of x_n under pi_0 f ... with weights g_0..g_{n-1}
  // (predictor) and g_0..g_n (filter), summed over whole paths.
  std::vector<std::vector<double>> pred(len, std::vector<double>(s, 0.0));
  std::vector<std::vector<double>> filt(len, std::vector<double>(s, 0.0));
  std::vector<std::size_t> path(len, 0);
  const std::size_t total = static_cast<std::size_t>(paths);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t n = 0; n < len; ++n) {
      path[n] = c % s;
      c /= s;
    }
    double prior = hmm.initial()[path[0]];
    for (std::size_t n = 1; n < len; ++n) prior *= hmm.transition()[path[n - 1]][path[n]];
    double like = 1.0;
    for (std::size_t n = 0; n < len; ++n) {
      pred[n][path[n]] += prior * like;
      like *= g[n][path[n]];
      filt[n][path[n]] += prior * like;
    }
  }
  ExactFilter ef;
  for (std::size_t n = 0; n < len; ++n) {
    const double zp = std::accumulate(pred[n].begin(), pred[n].end(), 0.0);
    const double zf = std::accumulate(filt[n].begin(), filt[n].end(), 0.0);
    for (double& v : pred[n]) v /= zp;
    for (double& v : filt[n]) v /= zf;
    ef.normalizer.push_back(zf / zp);
    ef.predictor.push_back(pred[n]);
    ef.filter.push_back(filt[n]);
    ef.g.push_back(g[n]);
  }
  return ef;
}

double evaluate(std::span<const double> law, std::span<const double> phi) {
  require(law.size() == phi.size(), ErrorCode::InvalidArgument, "law/function length mismatch");
  double out = 0.0;
  for (std::size_t x = 0; x < law.size(); ++x) out += law[x] * phi[x];
  return out;
}

FiniteHmm binary_symmetric(double p, double q) {
  require(p >= 0.0 && p <= 1.0, ErrorCode::InvalidArgument, "flip probability outside [0, 1]");
  require(q > 0.0 && q < 1.0, ErrorCode::InvalidArgument, "confusion outside (0, 1)");
  Emission e;
  e.table = {{1.0 - q, q}, {q, 1.0 - q}};
  return FiniteHmm({0.5, 0.5}, {{1.0 - p, p}, {p, 1.0 - p}}, e);
}

FiniteHmm random_instance(std::size_t states, std::size_t symbols, std::uint64_t seed) {
  require(states >= 1 && symbols >= 1, ErrorCode::InvalidArgument, "need states and symbols >= 1");
  std::uint64_t stage = 0;
  const auto random_law = [&](std::size_t len) {
    const Substream stream(StreamKey{seed, 0, 0}, Purpose::ModelGeneration, stage++);
    std::vector<double> p(len);
    for (std::size_t j = 0; j < len; ++j) p[j] = 0.1 + stream.uniform(j);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= total;
    // Absorb rounding so the law sums to 1 within 1e-12.
    p.back() = 1.0 - std::accumulate(p.begin(), p.end() - 1, 0.0);
    return p;
  };
  std::vector<double> initial = random_law(states);
  Matrix trans(states);
  for (auto& row : trans) row = random_law(states);
  Emission e;
  e.table.resize(states);
  for (auto& row : e.table) row = random_law(symbols);
  return FiniteHmm(std::move(initial), std::move(trans), std::move(e));
}

}  // namespace butterfly
