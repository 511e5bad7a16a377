#pragma once

// Monte Carlo experiment runner: CLT scaling, lack of bias, sub-population
// moment decay and LLN rates, with CSV/JSON emission.

#include "butterfly/config.hpp"
#include "butterfly/stats.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace butterfly {

enum class Verdict { Pass, Fail, Skip };
std::string to_string(Verdict v);

// Runs body(0..count-1) on up to `threads` workers (0: hardware
// concurrency). Each index must write only to its own output slot.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

// Shortest round-trip decimal form.
std::string format_double(double x);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

struct ExperimentOutcome {
  std::string kind;
  Table table;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  nlohmann::json details = nlohmann::json::object();
  double wall_seconds = 0.0;

  bool all_pass() const noexcept { return failed == 0; }
};

// ---------------------------------------------------------------------------

struct CltRow {
  Family family = Family::Multinomial;
  std::size_t r = 0;
  std::size_t m_or_c = 0;
  std::size_t n_particles = 0;
  std::size_t step = 0;
  std::string functional;
  std::string kind;  // "pred" or "filt"
  double scale = 0.0;
  double emp_var = 0.0;
  double emp_se = 0.0;
  double theo_var = 0.0;
  Verdict verdict = Verdict::Skip;
};

struct ScalingAnalysis {
  std::size_t step = 0;
  std::string functional;
  std::vector<double> m;
  std::vector<double> var_sqrt_n;  // Var(sqrt(N) (estimate - exact))
  std::vector<double> var_log;     // Var(sqrt(N / log_r N) (estimate - exact))
  stats::Regression sqrt_n_fit;
  stats::Regression log_fit;
  bool grows = false;  // sqrt_n_fit slope > 0 with p < 0.01
  bool flat = false;   // log_fit slope p > 0.05
};

struct CltResult {
  std::vector<CltRow> rows;
  std::optional<ScalingAnalysis> scaling;
};

// |emp - theo| <= max(3 SE, rel_tol theo); skipped when either variance is 0.
Verdict clt_verdict(double emp_var, double emp_se, double theo_var, double rel_tol);

CltResult run_clt_experiment(const ExperimentConfig& cfg);
ExperimentOutcome to_outcome(const CltResult& result);

struct BiasRow {
  Family family = Family::Multinomial;
  std::size_t r = 0;
  std::size_t m_or_c = 0;
  std::size_t n_particles = 0;
  std::string functional;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
  double se = 0.0;
  Verdict verdict = Verdict::Skip;
};

// One resampling call on fixed inputs drawn from the initial law, weighted by
// g_0; replicate mean of N^-1 sum phi(xi_out) against sum g phi / sum g.
std::vector<BiasRow> run_bias_experiment(const ExperimentConfig& cfg);
ExperimentOutcome to_outcome(const std::vector<BiasRow>& rows);

struct MomentRow {
  Family family = Family::Multinomial;
  std::size_t r = 0;
  std::size_t m_or_c = 0;
  std::size_t n_particles = 0;
  std::size_t d = 1;
  std::size_t blocks = 0;
  std::size_t step = 0;
  std::string functional;
  std::string kind;
  double moment = 0.0;     // E|block average - exact|^p
  double moment_se = 0.0;
  double normalized = 0.0;  // moment / ((m - d)/N + 1/|I|)^(p/2)
};

struct MomentTrend {
  std::size_t step = 0;
  std::string functional;
  std::string kind;
  stats::TrendTest test;
  double alpha = 0.05;
  Verdict verdict = Verdict::Skip;
};

struct MomentResult {
  std::vector<MomentRow> rows;
  std::vector<MomentTrend> trends;
};

MomentResult run_moment_decay(const ExperimentConfig& cfg);
ExperimentOutcome to_outcome(const MomentResult& result);

struct LlnRow {
  Family family = Family::Multinomial;
  std::size_t r = 0;
  std::size_t m_or_c = 0;
  std::size_t n_particles = 0;
  std::size_t step = 0;
  std::string functional;
  double rate_x = 0.0;  // N, or N / log_r N for radix
  double rmse = 0.0;
};

struct LlnFit {
  std::size_t step = 0;
  std::string functional;
  stats::Regression fit;  // log rmse on log rate_x
  Verdict verdict = Verdict::Skip;
};

struct LlnResult {
  std::vector<LlnRow> rows;
  std::vector<LlnFit> fits;
};

inline constexpr double kLlnSlopeLow = -0.65;
inline constexpr double kLlnSlopeHigh = -0.35;

LlnResult run_lln_experiment(const ExperimentConfig& cfg);
ExperimentOutcome to_outcome(const LlnResult& result);

// kind: "clt", "bias", "moments" or "lln". Records wall time.
ExperimentOutcome run_experiment(const std::string& kind, const ExperimentConfig& cfg);

nlohmann::json summary_json(const ExperimentOutcome& outcome, const ExperimentConfig& cfg);

// Writes cfg.csv_path / cfg.json_path when set.
void emit_results(const ExperimentOutcome& outcome, const ExperimentConfig& cfg);

}  // namespace butterfly
