#include "butterfly/harness.hpp"

#include "butterfly/error.hpp"
#include "butterfly/filter.hpp"
#include "butterfly/graph.hpp"
#include "butterfly/resample.hpp"
#include "butterfly/variance.hpp"
#include "butterfly/version.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace butterfly {

namespace {

using nlohmann::json;

constexpr double kDegenerate = 1e-12;

struct GridPoint {
  std::size_t index;
  std::size_t m_or_c;
  Schedule schedule;
};

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg) {
  std::vector<GridPoint> out;
  for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    Schedule s = schedule_for(cfg.family, cfg.r, cfg.grid[gi]);
    const std::size_t m_or_c = cfg.family == Family::Multinomial ? 1 : cfg.grid[gi];
    out.push_back({gi, m_or_c, std::move(s)});
  }
  return out;
}

// Replicate ids are disjoint across grid points so their streams never overlap.
std::uint64_t replicate_id(std::size_t grid_index, std::size_t rep) {
  return (static_cast<std::uint64_t>(grid_index) << 32) | static_cast<std::uint64_t>(rep);
}

std::vector<TestFunction> parse_functionals(const ExperimentConfig& cfg, std::size_t states) {
  std::vector<TestFunction> out;
  for (const auto& spec : cfg.functionals) out.push_back(parse_test_function(spec, states));
  require(!out.empty(), ErrorCode::InvalidArgument, "no functionals configured");
  return out;
}

std::vector<FilterRun> run_replicates(const FiniteHmm& hmm, const std::vector<double>& obs,
                                      const GridPoint& point, const ExperimentConfig& cfg,
                                      const std::vector<TestFunction>& functionals,
                                      const std::vector<std::vector<std::size_t>>& blocks = {}) {
  std::vector<FilterRun> runs(cfg.replicates);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
    FilterOptions opt;
    opt.seed = cfg.seed;
    opt.replicate = replicate_id(point.index, rep);
    opt.block_representatives = blocks;
    runs[rep] = run_filter(hmm, obs, point.schedule, cfg.horizon, functionals, opt);
  });
  return runs;
}

VarianceFlavor flavor_for(Family family) {
  switch (family) {
    case Family::Multinomial: return VarianceFlavor::Bpf;
    case Family::Radix: return VarianceFlavor::Radix;
    case Family::MixedRadix: return VarianceFlavor::Mixed;
  }
  return VarianceFlavor::Bpf;
}

double clt_scale(Family family, const Schedule& s, std::size_t step, bool filtered) {
  const double n = static_cast<double>(s.size());
  if (family != Family::Radix) return std::sqrt(n);
  if (step == 0 && !filtered) return std::sqrt(n);
  return std::sqrt(n / static_cast<double>(s.stages()));
}

void tally(ExperimentOutcome& out, Verdict v) {
  switch (v) {
    case Verdict::Pass: ++out.passed; break;
    case Verdict::Fail: ++out.failed; break;
    case Verdict::Skip: ++out.skipped; break;
  }
}

std::string fmt(std::size_t v) { return std::to_string(v); }

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "true";
    case Verdict::Fail: return "false";
    case Verdict::Skip: return "skip";
  }
  return "skip";
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + row[c];
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLT

Verdict clt_verdict(double emp_var, double emp_se, double theo_var, double rel_tol) {
  require(std::isfinite(emp_var) && std::isfinite(theo_var), ErrorCode::Numeric,
          "non-finite variance estimate");
  if (theo_var < kDegenerate || emp_var < kDegenerate) return Verdict::Skip;
  const double band = std::max(3.0 * emp_se, rel_tol * theo_var);
  return std::abs(emp_var - theo_var) <= band ? Verdict::Pass : Verdict::Fail;
}

CltResult run_clt_experiment(const ExperimentConfig& cfg) {
  const FiniteHmm hmm = config_model(cfg);
  const std::vector<double> obs = config_observations(cfg, hmm);
  const auto functionals = parse_functionals(cfg, hmm.states());
  const ExactFilter ef = exact_filter(hmm, std::span(obs).first(cfg.horizon + 1));

  std::vector<VarianceSeries> theory;
  for (const auto& f : functionals) {
    switch (flavor_for(cfg.family)) {
      case VarianceFlavor::Bpf: theory.push_back(bpf_variance(ef, hmm, f.values)); break;
      case VarianceFlavor::Radix: theory.push_back(radix_variance(ef, hmm, f.values, cfg.r)); break;
      case VarianceFlavor::Mixed: theory.push_back(mixed_variance(ef, hmm, f.values, cfg.r)); break;
    }
  }

  CltResult result;
  std::vector<double> errors(cfg.replicates);
  for (const GridPoint& point : expand_grid(cfg)) {
    const auto runs = run_replicates(hmm, obs, point, cfg, functionals);
    for (std::size_t n = 0; n <= cfg.horizon; ++n) {
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        for (const bool filtered : {false, true}) {
          const double exact = evaluate(filtered ? ef.filter[n] : ef.predictor[n], functionals[f].values);
          const double scale = clt_scale(cfg.family, point.schedule, n, filtered);
          for (std::size_t rep = 0; rep < runs.size(); ++rep) {
            const double est = filtered ? runs[rep].filtered[n][f] : runs[rep].predicted[n][f];
            errors[rep] = scale * (est - exact);
          }
          const stats::Moments mom = stats::moments(errors);
          CltRow row;
          row.family = cfg.family;
          row.r = cfg.family == Family::Multinomial ? 0 : cfg.r;
          row.m_or_c = point.m_or_c;
          row.n_particles = point.schedule.size();
          row.step = n;
          row.functional = functionals[f].name;
          row.kind = filtered ? "filt" : "pred";
          row.scale = scale;
          row.emp_var = mom.variance;
          row.emp_se = mom.variance_se;
          row.theo_var = filtered ? theory[f].sigma_filt[n] : theory[f].sigma_pred[n];
          row.verdict = clt_verdict(row.emp_var, row.emp_se, row.theo_var, cfg.rel_tol);
          result.rows.push_back(std::move(row));
        }
      }
    }
  }

  if (cfg.discrimination_step) {
    require(cfg.family == Family::Radix, ErrorCode::InvalidArgument,
            "scaling discrimination applies to the radix family");
    require(cfg.grid.size() >= 3, ErrorCode::InvalidArgument, "scaling discrimination needs >= 3 grid points");
    require(*cfg.discrimination_step <= cfg.horizon, ErrorCode::OutOfRange, "discrimination step beyond horizon");
    ScalingAnalysis sa;
    sa.step = *cfg.discrimination_step;
    sa.functional = functionals.front().name;
    for (const CltRow& row : result.rows) {
      if (row.step != sa.step || row.kind != "filt" || row.functional != sa.functional) continue;
      const double m = static_cast<double>(row.m_or_c);
      sa.m.push_back(m);
      sa.var_log.push_back(row.emp_var);
      sa.var_sqrt_n.push_back(row.emp_var * m);
    }
    sa.sqrt_n_fit = stats::ols(sa.m, sa.var_sqrt_n);
    sa.log_fit = stats::ols(sa.m, sa.var_log);
    sa.grows = sa.sqrt_n_fit.slope > 0.0 && sa.sqrt_n_fit.p_greater < 0.01;
    sa.flat = sa.log_fit.p_two_sided > 0.05;
    result.scaling = std::move(sa);
  }
  return result;
}

ExperimentOutcome to_outcome(const CltResult& result) {
  ExperimentOutcome out;
  out.kind = "clt";
  out.table.columns = {"family", "r", "m_or_c", "N", "n", "functional", "kind", "scale",
                       "emp_var", "emp_se", "theo_var", "pass"};
  for (const CltRow& row : result.rows) {
    out.table.rows.push_back({to_string(row.family), fmt(row.r), fmt(row.m_or_c), fmt(row.n_particles),
                              fmt(row.step), row.functional, row.kind, format_double(row.scale),
                              format_double(row.emp_var), format_double(row.emp_se),
                              format_double(row.theo_var), to_string(row.verdict)});
    tally(out, row.verdict);
  }
  if (result.scaling) {
    const ScalingAnalysis& sa = *result.scaling;
    out.details["scaling"] = {
        {"n", sa.step},
        {"functional", sa.functional},
        {"m", sa.m},
        {"var_sqrt_n", sa.var_sqrt_n},
        {"var_sqrt_n_over_log", sa.var_log},
        {"sqrt_n_slope", sa.sqrt_n_fit.slope},
        {"sqrt_n_p_greater", sa.sqrt_n_fit.p_greater},
        {"log_slope", sa.log_fit.slope},
        {"log_p_two_sided", sa.log_fit.p_two_sided},
        {"sqrt_n_grows", sa.grows},
        {"log_scaled_flat", sa.flat}};
    tally(out, sa.grows ? Verdict::Pass : Verdict::Fail);
    tally(out, sa.flat ? Verdict::Pass : Verdict::Fail);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bias

std::vector<BiasRow> run_bias_experiment(const ExperimentConfig& cfg) {
  const FiniteHmm hmm = config_model(cfg);
  const std::vector<double> obs = config_observations(cfg, hmm);
  const auto functionals = parse_functionals(cfg, hmm.states());
  const std::vector<double> g = hmm.weights(obs.front());

  std::vector<double> init_cdf(hmm.states());
  double acc = 0.0;
  for (std::size_t x = 0; x < hmm.states(); ++x) init_cdf[x] = acc += hmm.initial()[x];

  std::vector<BiasRow> rows;
  for (const GridPoint& point : expand_grid(cfg)) {
    const std::size_t n = point.schedule.size();
    const Substream input(StreamKey{cfg.seed, point.index, 0}, Purpose::InputGeneration, 0);
    std::vector<std::size_t> states(n);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = input.uniform(i);
      states[i] = static_cast<std::size_t>(std::upper_bound(init_cdf.begin(), init_cdf.end(), u) -
                                           init_cdf.begin());
      states[i] = std::min(states[i], hmm.states() - 1);
      weights[i] = g[states[i]];
    }
    // means[rep][f]
    std::vector<std::vector<double>> means(cfg.replicates, std::vector<double>(functionals.size()));
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
      AugmentedResampler engine;
      std::vector<ParticleIndex> origin(n);
      engine.resample(point.schedule, weights, StreamKey{cfg.seed, replicate_id(point.index, rep), 0}, origin);
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        double sum = 0.0;
        for (ParticleIndex o : origin) sum += functionals[f].values[states[o]];
        means[rep][f] = sum / static_cast<double>(n);
      }
    });
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      std::vector<double> x(cfg.replicates);
      for (std::size_t rep = 0; rep < cfg.replicates; ++rep) x[rep] = means[rep][f];
      const stats::Moments mom = stats::moments(x);
      double gphi = 0.0, gsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        gphi += weights[i] * functionals[f].values[states[i]];
        gsum += weights[i];
      }
      BiasRow row;
      row.family = cfg.family;
      row.r = cfg.family == Family::Multinomial ? 0 : cfg.r;
      row.m_or_c = point.m_or_c;
      row.n_particles = n;
      row.functional = functionals[f].name;
      row.lhs = mom.mean;
      row.rhs = gphi / gsum;
      row.abs_diff = std::abs(row.lhs - row.rhs);
      row.se = std::sqrt(mom.variance / static_cast<double>(cfg.replicates));
      if (row.se == 0.0) {
        row.verdict = row.abs_diff <= 1e-12 ? Verdict::Pass : Verdict::Fail;
      } else {
        row.verdict = row.abs_diff <= 4.0 * row.se ? Verdict::Pass : Verdict::Fail;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

ExperimentOutcome to_outcome(const std::vector<BiasRow>& rows) {
  ExperimentOutcome out;
  out.kind = "bias";
  out.table.columns = {"family", "r", "m_or_c", "N", "functional", "lhs", "rhs", "abs_diff", "se", "pass"};
  for (const BiasRow& row : rows) {
    out.table.rows.push_back({to_string(row.family), fmt(row.r), fmt(row.m_or_c), fmt(row.n_particles),
                              row.functional, format_double(row.lhs), format_double(row.rhs),
                              format_double(row.abs_diff), format_double(row.se), to_string(row.verdict)});
    tally(out, row.verdict);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sub-population moments

MomentResult run_moment_decay(const ExperimentConfig& cfg) {
  require(cfg.family != Family::Multinomial, ErrorCode::InvalidArgument,
          "moment decay needs the radix or mixed family");
  const FiniteHmm hmm = config_model(cfg);
  const std::vector<double> obs = config_observations(cfg, hmm);
  const auto functionals = parse_functionals(cfg, hmm.states());
  const ExactFilter ef = exact_filter(hmm, std::span(obs).first(cfg.horizon + 1));

  MomentResult result;
  std::vector<double> values(cfg.replicates);
  for (const GridPoint& point : expand_grid(cfg)) {
    const Schedule& s = point.schedule;
    const Partition part = build_partition(s, cfg.d);
    require(partition_structure_holds(s, part), ErrorCode::AssumptionViolation,
            "partition violates the block structure");
    std::vector<std::size_t> reps;
    for (const auto& block : part.blocks) reps.push_back(block.front());
    const auto runs = run_replicates(hmm, obs, point, cfg, functionals, {reps});
    const double nn = static_cast<double>(s.size());
    const double rate = static_cast<double>(s.stages() - cfg.d) / nn +
                        1.0 / static_cast<double>(part.blocks.size());
    const double norm = std::pow(rate, cfg.p / 2.0);
    for (std::size_t n = 0; n <= cfg.horizon; ++n) {
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        for (const bool filtered : {false, true}) {
          const double exact = evaluate(filtered ? ef.filter[n] : ef.predictor[n], functionals[f].values);
          for (std::size_t rep = 0; rep < runs.size(); ++rep) {
            const double est = filtered ? runs[rep].block_filtered[0][n][f] : runs[rep].block_predicted[0][n][f];
            values[rep] = std::pow(std::abs(est - exact), cfg.p);
          }
          const stats::Moments mom = stats::moments(values);
          MomentRow row;
          row.family = cfg.family;
          row.r = cfg.r;
          row.m_or_c = point.m_or_c;
          row.n_particles = s.size();
          row.d = cfg.d;
          row.blocks = part.blocks.size();
          row.step = n;
          row.functional = functionals[f].name;
          row.kind = filtered ? "filt" : "pred";
          row.moment = mom.mean;
          row.moment_se = std::sqrt(mom.variance / static_cast<double>(cfg.replicates));
          row.normalized = mom.mean / norm;
          result.rows.push_back(std::move(row));
        }
      }
    }
  }

  // One trend test per (n, functional, kind); Bonferroni across the family.
  const std::size_t series = (cfg.horizon + 1) * functionals.size() * 2;
  for (std::size_t n = 0; n <= cfg.horizon; ++n) {
    for (const auto& f : functionals) {
      for (const std::string kind : {"pred", "filt"}) {
        std::vector<double> y;
        for (const MomentRow& row : result.rows) {
          if (row.step == n && row.functional == f.name && row.kind == kind) y.push_back(row.normalized);
        }
        MomentTrend trend;
        trend.step = n;
        trend.functional = f.name;
        trend.kind = kind;
        trend.alpha = 0.05 / static_cast<double>(series);
        const bool degenerate = std::all_of(y.begin(), y.end(), [](double v) { return v < kDegenerate; });
        if (degenerate || y.size() < 3) {
          trend.verdict = Verdict::Skip;
        } else {
          trend.test = stats::mann_kendall(y);
          trend.verdict = trend.test.p_upward > trend.alpha ? Verdict::Pass : Verdict::Fail;
        }
        result.trends.push_back(std::move(trend));
      }
    }
  }
  return result;
}

ExperimentOutcome to_outcome(const MomentResult& result) {
  ExperimentOutcome out;
  out.kind = "moments";
  out.table.columns = {"family", "r", "m_or_c", "N", "d", "blocks", "n", "functional", "kind",
                       "moment", "moment_se", "normalized"};
  for (const MomentRow& row : result.rows) {
    out.table.rows.push_back({to_string(row.family), fmt(row.r), fmt(row.m_or_c), fmt(row.n_particles),
                              fmt(row.d), fmt(row.blocks), fmt(row.step), row.functional, row.kind,
                              format_double(row.moment), format_double(row.moment_se),
                              format_double(row.normalized)});
  }
  json trends = json::array();
  for (const MomentTrend& t : result.trends) {
    trends.push_back({{"n", t.step}, {"functional", t.functional}, {"kind", t.kind},
                      {"mann_kendall_s", t.test.s}, {"z", t.test.z}, {"p_upward", t.test.p_upward},
                      {"alpha", t.alpha}, {"pass", to_string(t.verdict)}});
    tally(out, t.verdict);
  }
  out.details["trends"] = std::move(trends);
  return out;
}

// ---------------------------------------------------------------------------
// LLN

LlnResult run_lln_experiment(const ExperimentConfig& cfg) {
  const FiniteHmm hmm = config_model(cfg);
  const std::vector<double> obs = config_observations(cfg, hmm);
  const auto functionals = parse_functionals(cfg, hmm.states());
  const ExactFilter ef = exact_filter(hmm, std::span(obs).first(cfg.horizon + 1));
  require(cfg.grid.size() >= 3, ErrorCode::InvalidArgument, "LLN rate fit needs >= 3 grid points");

  LlnResult result;
  for (const GridPoint& point : expand_grid(cfg)) {
    const auto runs = run_replicates(hmm, obs, point, cfg, functionals);
    const double nn = static_cast<double>(point.schedule.size());
    const double rate_x = cfg.family == Family::Radix ? nn / static_cast<double>(point.schedule.stages()) : nn;
    for (std::size_t n = 0; n <= cfg.horizon; ++n) {
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        const double exact = evaluate(ef.filter[n], functionals[f].values);
        std::vector<double> sq(runs.size());
        for (std::size_t rep = 0; rep < runs.size(); ++rep) {
          const double e = runs[rep].filtered[n][f] - exact;
          sq[rep] = e * e;
        }
        LlnRow row;
        row.family = cfg.family;
        row.r = cfg.family == Family::Multinomial ? 0 : cfg.r;
        row.m_or_c = point.m_or_c;
        row.n_particles = point.schedule.size();
        row.step = n;
        row.functional = functionals[f].name;
        row.rate_x = rate_x;
        row.rmse = std::sqrt(stats::pairwise_sum(sq) / static_cast<double>(sq.size()));
        result.rows.push_back(std::move(row));
      }
    }
  }

  for (std::size_t n = 0; n <= cfg.horizon; ++n) {
    for (const auto& f : functionals) {
      std::vector<double> x, y;
      for (const LlnRow& row : result.rows) {
        if (row.step == n && row.functional == f.name && row.rmse > 0.0) {
          x.push_back(std::log(row.rate_x));
          y.push_back(std::log(row.rmse));
        }
      }
      LlnFit fit;
      fit.step = n;
      fit.functional = f.name;
      if (x.size() < 3) {
        fit.verdict = Verdict::Skip;
      } else {
        fit.fit = stats::ols(x, y);
        fit.verdict = fit.fit.slope >= kLlnSlopeLow && fit.fit.slope <= kLlnSlopeHigh ? Verdict::Pass
                                                                                       : Verdict::Fail;
      }
      result.fits.push_back(std::move(fit));
    }
  }
  return result;
}

ExperimentOutcome to_outcome(const LlnResult& result) {
  ExperimentOutcome out;
  out.kind = "lln";
  out.table.columns = {"family", "r", "m_or_c", "N", "n", "functional", "rate_x", "rmse"};
  for (const LlnRow& row : result.rows) {
    out.table.rows.push_back({to_string(row.family), fmt(row.r), fmt(row.m_or_c), fmt(row.n_particles),
                              fmt(row.step), row.functional, format_double(row.rate_x),
                              format_double(row.rmse)});
  }
  json fits = json::array();
  for (const LlnFit& f : result.fits) {
    fits.push_back({{"n", f.step}, {"functional", f.functional}, {"slope", f.fit.slope},
                    {"slope_se", f.fit.slope_se}, {"pass", to_string(f.verdict)}});
    tally(out, f.verdict);
  }
  out.details["fits"] = std::move(fits);
  out.details["slope_band"] = {kLlnSlopeLow, kLlnSlopeHigh};
  return out;
}

// ---------------------------------------------------------------------------

ExperimentOutcome run_experiment(const std::string& kind, const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  if (kind == "clt") {
    out = to_outcome(run_clt_experiment(cfg));
  } else if (kind == "bias") {
    out = to_outcome(run_bias_experiment(cfg));
  } else if (kind == "moments") {
    out = to_outcome(run_moment_decay(cfg));
  } else if (kind == "lln") {
    out = to_outcome(run_lln_experiment(cfg));
  } else {
    fail(ErrorCode::InvalidArgument, "unknown experiment kind '" + kind + "'");
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

json summary_json(const ExperimentOutcome& outcome, const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = outcome.kind;
  j["version"] = version_string();
  j["config"] = cfg.raw;
  j["seed"] = cfg.seed;
  j["wall_time_seconds"] = outcome.wall_seconds;
  j["rows"] = outcome.table.rows.size();
  j["passed"] = outcome.passed;
  j["failed"] = outcome.failed;
  j["skipped"] = outcome.skipped;
  j["all_pass"] = outcome.all_pass();
  j["details"] = outcome.details;
  return j;
}

void emit_results(const ExperimentOutcome& outcome, const ExperimentConfig& cfg) {
  if (!cfg.csv_path.empty()) write_text_file(cfg.csv_path, outcome.table.to_csv());
  if (!cfg.json_path.empty()) write_text_file(cfg.json_path, summary_json(outcome, cfg).dump(2) + "\n");
}

}  // namespace butterfly
