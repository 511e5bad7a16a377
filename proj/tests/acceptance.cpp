// Acceptance suite: one PASS/FAIL line per criterion.

#include "butterfly/config.hpp"
#include "butterfly/graph.hpp"
#include "butterfly/harness.hpp"
#include "butterfly/hmm.hpp"
#include "butterfly/resample.hpp"
#include "butterfly/schedule.hpp"
#include "butterfly/variance.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace butterfly;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t out = 1;
  while (e--) out *= b;
  return out;
}

// Radix r in {2,3}, m <= 5 and mixed r in {2,3}, c <= 8.
std::vector<Schedule> matrix_grid() {
  std::vector<Schedule> out;
  for (std::size_t r : {2, 3})
    for (std::size_t m = 1; m <= 5; ++m) out.push_back(Schedule::radix(r, m));
  for (std::size_t r : {2, 3})
    for (std::size_t c = 1; c <= 8; ++c) out.push_back(Schedule::mixed_radix(r, c));
  return out;
}

std::vector<double> positive_values(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  Substream s({seed, stream, 0}, Purpose::InputGeneration, 0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.1 + s.uniform(i);
  return v;
}

// ---------------------------------------------------------------------------

Outcome matrix_identities() {
  const auto t0 = Clock::now();
  std::size_t ok = 0, total = 0;
  std::string first_bad;
  for (const auto& s : matrix_grid()) {
    ++total;
    const auto rep = verify_assumptions(s);
    const bool good = rep.double_stochastic && rep.symmetric && rep.idempotent && rep.commuting &&
                      rep.product_uniform;
    if (good) ++ok;
    else if (first_bad.empty()) first_bad = s.describe();
  }
  const double t = seconds_since(t0);
  Outcome v{ok == total && t < 5.0, std::to_string(ok) + "/" + std::to_string(total) + " instances, " +
                                        fmt(t, 3) + " s"};
  if (!first_bad.empty()) v.detail += ", first failure " + first_bad;
  return v;
}

Outcome set_formulas() {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0, checks = 0;
  for (const auto& s : matrix_grid()) {
    SupportOracle oracle(s);
    const std::size_t r = s.radix(), m = s.stages();
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<int> hits(s.size(), 0);
      for (std::size_t k = 0; k <= m; ++k) {
        const auto kk = prime_parent_set(s, k, i);
        checks += 1;
        mismatches += kk != oracle.prime_parent_set(k, i);
        if (k >= 1) {
          const std::size_t expect = s.family() == Family::Radix ? ipow(r, k) : s.width() * ipow(r, k - 1);
          checks += 1;
          mismatches += kk.size() != expect;
          const auto c = collision_start_set(s, k, i);
          checks += 3;
          mismatches += parent_set(s, k, i) != oracle.parent_set(k, i);
          mismatches += c != oracle.collision_start_set(k, i);
          mismatches += tail_product_set(s, k, i) != oracle.tail_product_set(k, i);
          for (auto j : c) ++hits[j];
        }
      }
      for (std::size_t j = 0; j < s.size(); ++j) {
        ++checks;
        mismatches += hits[j] != (j == i ? 0 : 1);
      }
    }
  }
  // Worked example, 1-based: C1(5) = {6}, C2(5) = {7,8}, C3(5) = {1,2,3,4}.
  const auto fig = Schedule::radix(2, 3);
  const bool worked = collision_start_set(fig, 1, 4) == IndexSet{5} &&
                      collision_start_set(fig, 2, 4) == IndexSet{6, 7} &&
                      collision_start_set(fig, 3, 4) == IndexSet{0, 1, 2, 3};
  const double t = seconds_since(t0);
  return {mismatches == 0 && worked && t < 5.0,
          std::to_string(checks) + " checks, " + std::to_string(mismatches) + " mismatches, worked example C(5) " +
              (worked ? "reproduced" : "WRONG") + ", " + fmt(t, 3) + " s"};
}

Outcome edge_statistics() {
  std::size_t bad = 0, total = 0;
  auto check = [&](const Schedule& s, std::vector<std::size_t> per_stage, std::uint64_t edges) {
    ++total;
    const auto a = edge_stats(s);
    const auto b = count_edges(s);
    if (a.incoming_per_stage != per_stage || a.total_edges != edges || b.incoming_per_stage != per_stage ||
        b.total_edges != edges)
      ++bad;
  };
  for (std::size_t n = 1; n <= 8; ++n) check(Schedule::multinomial(n), {n}, n * n);
  for (std::size_t r : {2, 3})
    for (std::size_t m = 1; m <= 5; ++m) {
      const std::size_t n = ipow(r, m);
      check(Schedule::radix(r, m), std::vector<std::size_t>(m, r), r * n * m);
    }
  for (std::size_t r : {2, 3})
    for (std::size_t c = 1; c <= 8; ++c) {
      const std::size_t n = r * c;
      check(Schedule::mixed_radix(r, c), {n / r, r}, r * n + n * n / r);
    }
  return {bad == 0, std::to_string(total - bad) + "/" + std::to_string(total) + " instances match the table"};
}

Outcome collision_counts() {
  const auto t0 = Clock::now();
  std::vector<Schedule> cases;
  for (std::size_t m = 1; m <= 3; ++m) cases.push_back(Schedule::radix(2, m));
  for (std::size_t c = 1; c <= 4; ++c) cases.push_back(Schedule::mixed_radix(2, c));
  std::size_t pairs = 0, bad = 0;
  for (const auto& s : cases) {
    SupportOracle oracle(s);
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (i == j) continue;
        ++pairs;
        bad += !(collision_cardinalities(s, i, j) == oracle.enumerate_collision_pairs(i, j));
      }
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 30.0,
          std::to_string(pairs) + " pairs, " + std::to_string(bad) + " mismatches, " + fmt(t, 3) + " s"};
}

Outcome lack_of_bias() {
  const std::vector<double> g{1, 2, 3, 4};
  std::vector<std::vector<double>> phis;
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> ind(4, 0.0);
    ind[k] = 1.0;
    phis.push_back(ind);
  }
  phis.push_back({1, 2, 3, 4});
  double worst = 0.0;
  for (const auto& s : {Schedule::radix(2, 2), Schedule::multinomial(4)})
    for (const auto& phi : phis) {
      const auto b = lack_of_bias_exact(g, phi, s);
      double direct = 0.0;
      for (std::size_t j = 0; j < 4; ++j) direct += g[j] * phi[j];
      direct /= 10.0;
      worst = std::max({worst, b.abs_diff, std::abs(b.lhs - direct)});
    }
  return {worst <= 1e-12, "max |lhs - rhs| = " + fmt(worst, 3)};
}

Outcome martingale_identity() {
  struct Case {
    Schedule s;
    std::size_t d;
  };
  const std::vector<Case> cases{{Schedule::radix(2, 3), 1}, {Schedule::radix(2, 3), 2},
                                {Schedule::radix(2, 3), 3}, {Schedule::mixed_radix(2, 4), 1},
                                {Schedule::mixed_radix(2, 4), 2}};
  double worst = 0.0;
  std::size_t realizations = 0, bound_failures = 0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& [s, d] = cases[c];
    const auto part = build_partition(s, d);
    AugmentedResampler engine;
    std::vector<ParticleIndex> origin(s.size());
    for (std::uint64_t rep = 0; rep < 200; ++rep) {
      const auto g = positive_values(s.size(), 600 + c, 2 * rep);
      const auto phi = positive_values(s.size(), 600 + c, 2 * rep + 1);
      // representatives drawn uniformly inside each block
      Substream pick({700 + c, rep, 0}, Purpose::InputGeneration, 1);
      std::vector<std::size_t> reps;
      for (std::size_t u = 0; u < part.blocks.size(); ++u) {
        const auto& blk = part.blocks[u];
        reps.push_back(blk[std::min(blk.size() - 1, static_cast<std::size_t>(pick.uniform(u) * blk.size()))]);
      }
      ResampleTrace trace;
      engine.resample(s, g, {800 + c, rep, 0}, origin, &trace);
      const auto mt = martingale_increments(trace, s, part, reps, phi);
      worst = std::max(worst, std::abs(mt.decomposition - mt.target));
      bound_failures += !mt.bounds_hold;
      ++realizations;
    }
  }
  return {worst <= 1e-10 && bound_failures == 0,
          std::to_string(realizations) + " realizations, max |lhs - rhs| = " + fmt(worst, 3) +
              ", increment bound failures " + std::to_string(bound_failures)};
}

Outcome second_moment() {
  double worst = 0.0;
  std::size_t runs = 0;
  for (const auto& s : {Schedule::radix(2, 2), Schedule::multinomial(2), Schedule::multinomial(3)})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto g = positive_values(s.size(), 900 + seed, s.size());
      std::vector<double> phi(s.size());
      for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = static_cast<double>(i + 1);
      const double a = conditional_second_moment_closed_form(g, phi, s);
      const double b = conditional_second_moment_enumerated(g, phi, s);
      worst = std::max(worst, std::abs(a - b));
      ++runs;
    }
  return {worst <= 1e-10, std::to_string(runs) + " instances, max |closed - enumerated| = " + fmt(worst, 3)};
}

double max_abs_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double out = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n)
    for (std::size_t x = 0; x < a[n].size(); ++x) out = std::max(out, std::abs(a[n][x] - b[n][x]));
  return out;
}

Outcome exact_filter_oracle() {
  double worst = 0.0;
  std::size_t runs = 0;
  for (std::size_t states = 1; states <= 4; ++states)
    for (std::size_t horizon = 0; horizon <= 5; ++horizon)
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto hmm = random_instance(states, 3, 31 * seed + states);
        const auto y = simulate(hmm, horizon, seed).observations;
        const auto a = exact_filter(hmm, y);
        const auto b = enumerate_trajectories(hmm, y);
        worst = std::max({worst, max_abs_diff(a.predictor, b.predictor), max_abs_diff(a.filter, b.filter)});
        ++runs;
      }
  return {worst <= 1e-12, std::to_string(runs) + " models, max deviation " + fmt(worst, 3)};
}

Outcome variance_recursions() {
  const auto hmm = binary_symmetric(0.1, 0.25);  // pi0 = (.5, .5), g_0 proportional to (1, 3) at y = 1
  const std::vector<double> y{1};
  const auto ef = exact_filter(hmm, y);
  const std::vector<double> phi{0, 1};
  const double bpf = bpf_variance(ef, hmm, phi).sigma_filt[0];
  const double rad = radix_variance(ef, hmm, phi, 2).sigma_filt[0];
  const double mix = mixed_variance(ef, hmm, phi, 2).sigma_filt[0];
  const bool spots = std::abs(bpf - 0.328125) <= 1e-12 && std::abs(rad - 0.09375) <= 1e-12 &&
                     std::abs(mix - 0.421875) <= 1e-12;

  std::size_t violations = 0, checks = 0;
  const double tol = 1e-12;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto model = random_instance(2, 2, 5000 + seed);
    const auto obs = simulate(model, 10, 6000 + seed).observations;
    const auto f = exact_filter(model, obs);
    for (std::size_t r : {2, 3, 4}) {
      const auto b = bpf_variance(f, model, phi);
      const auto rr = radix_variance(f, model, phi, r);
      const auto mm = mixed_variance(f, model, phi, r);
      const double cap = 2.0 - 1.0 / static_cast<double>(r);
      for (std::size_t n = 0; n <= 10; ++n) {
        for (int which = 0; which < 2; ++which) {
          const double sb = which ? b.sigma_filt[n] : b.sigma_pred[n];
          const double sr = which ? rr.sigma_filt[n] : rr.sigma_pred[n];
          const double sm = which ? mm.sigma_filt[n] : mm.sigma_pred[n];
          checks += 3;
          violations += sr > sb + tol;
          violations += sb > sm + tol;
          violations += sm > cap * sb + tol;
        }
      }
    }
  }
  return {spots && violations == 0, "spot values " + fmt(bpf, 8) + ", " + fmt(rad, 8) + ", " + fmt(mix, 8) +
                                        "; ordering " + std::to_string(checks - violations) + "/" +
                                        std::to_string(checks)};
}

// ---------------------------------------------------------------------------
// Statistical criteria. Every run writes its CSV so the determinism check can
// compare bytes.

struct Runner {
  fs::path configs;
  fs::path work;
  std::map<std::string, std::string> csv;  // config name -> serial CSV

  ExperimentConfig load(const std::string& name, std::size_t threads) const {
    auto cfg = load_experiment_config((configs / (name + ".json")).string());
    cfg.threads = threads;
    return cfg;
  }

  void keep(const std::string& name, const ExperimentOutcome& out, const ExperimentConfig& cfg,
            const std::string& suffix = "") {
    auto copy = cfg;
    copy.csv_path = (work / (name + suffix + ".csv")).string();
    copy.json_path = (work / (name + suffix + ".json")).string();
    emit_results(out, copy);
    if (suffix.empty()) csv[name] = out.table.to_csv();
  }
};

const CltRow* find_row(const CltResult& res, std::size_t n_particles, std::size_t step, const std::string& kind) {
  for (const auto& row : res.rows)
    if (row.n_particles == n_particles && row.step == step && row.kind == kind) return &row;
  return nullptr;
}

std::string describe(const CltRow* row) {
  if (!row) return "missing";
  return "emp " + fmt(row->emp_var) + " +- " + fmt(row->emp_se, 2) + " vs theo " + fmt(row->theo_var) + " " +
         to_string(row->verdict);
}

Outcome clt_reproduction(Runner& run) {
  const auto t0 = Clock::now();
  std::string detail;
  bool pass = true;

  auto sub = [&](const std::string& name, std::size_t n_particles, const std::string& label) -> CltResult {
    const auto cfg = run.load(name, 1);
    auto res = run_clt_experiment(cfg);
    run.keep(name, to_outcome(res), cfg);
    const auto* row = find_row(res, n_particles, 3, "filt");
    const bool ok = row && row->verdict == butterfly::Verdict::Pass;
    pass = pass && ok;
    detail += label + ": " + describe(row) + "; ";
    return res;
  };
  sub("clt_bpf", 4096, "bpf N=4096");
  sub("clt_mixed", 4096, "mixed c=2048");
  const auto radix = sub("clt_radix", 16384, "radix m=14");
  if (radix.scaling) {
    const auto& sc = *radix.scaling;
    const bool ok = sc.grows && sc.flat;
    pass = pass && ok;
    detail += "scaling sqrt(N) slope " + fmt(sc.sqrt_n_fit.slope, 3) + " p=" + fmt(sc.sqrt_n_fit.p_greater, 3) +
              ", log-scaled slope " + fmt(sc.log_fit.slope, 3) + " p=" + fmt(sc.log_fit.p_two_sided, 3) +
              (ok ? " discriminated" : " NOT discriminated");
  } else {
    pass = false;
    detail += "scaling analysis missing";
  }
  return {pass, detail + ", " + fmt(seconds_since(t0), 3) + " s"};
}

Outcome lln_decay(Runner& run) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  for (const std::string name : {"lln_bpf", "lln_mixed", "lln_radix"}) {
    const auto cfg = run.load(name, 1);
    const auto res = run_lln_experiment(cfg);
    run.keep(name, to_outcome(res), cfg);
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    bool ok = !res.fits.empty();
    for (const auto& f : res.fits) {
      ok = ok && f.verdict == butterfly::Verdict::Pass;
      lo = std::min(lo, f.fit.slope);
      hi = std::max(hi, f.fit.slope);
    }
    pass = pass && ok;
    detail += name.substr(4) + " slopes [" + fmt(lo, 3) + ", " + fmt(hi, 3) + "]; ";
  }
  return {pass, detail + fmt(seconds_since(t0), 3) + " s"};
}

Outcome moment_boundedness(Runner& run) {
  const auto t0 = Clock::now();
  const auto cfg = run.load("moments_radix", 1);
  const auto res = run_moment_decay(cfg);
  run.keep("moments_radix", to_outcome(res), cfg);
  bool pass = !res.trends.empty();
  double min_p = 1.0;
  for (const auto& t : res.trends) {
    pass = pass && t.verdict == butterfly::Verdict::Pass;
    min_p = std::min(min_p, t.test.p_upward);
  }
  return {pass, std::to_string(res.trends.size()) + " series, smallest upward-trend p = " + fmt(min_p, 3) +
                    " (alpha " + fmt(res.trends.empty() ? 0.0 : res.trends.front().alpha, 3) + "), " +
                    fmt(seconds_since(t0), 3) + " s"};
}

Outcome determinism(Runner& run) {
  const auto t0 = Clock::now();
  const std::vector<std::pair<std::string, std::string>> jobs{
      {"clt_bpf", "clt"},   {"clt_mixed", "clt"},   {"clt_radix", "clt"},      {"lln_bpf", "lln"},
      {"lln_mixed", "lln"}, {"lln_radix", "lln"},   {"moments_radix", "moments"}};
  std::size_t identical = 0, compared = 0;
  std::string mismatched;
  for (const auto& [name, kind] : jobs) {
    auto it = run.csv.find(name);
    if (it == run.csv.end()) {
      // serial reference was not produced by an earlier criterion in this run
      const auto cfg = run.load(name, 1);
      run.keep(name, run_experiment(kind, cfg), cfg);
      it = run.csv.find(name);
    }
    const auto cfg = run.load(name, 4);
    const auto out = run_experiment(kind, cfg);
    run.keep(name, out, cfg, "_threads4");
    ++compared;
    if (out.table.to_csv() == it->second) ++identical;
    else mismatched += " " + name;
  }
  // a second serial run of the cheapest job
  const auto cfg = run.load("moments_radix", 1);
  const bool repeat = run_experiment("moments", cfg).table.to_csv() == run.csv["moments_radix"];
  return {identical == compared && repeat,
          std::to_string(identical) + "/" + std::to_string(compared) +
              " configs byte-identical serial vs 4 threads, serial repeat " + (repeat ? "identical" : "DIFFERS") +
              (mismatched.empty() ? "" : ", differing:" + mismatched) + ", " + fmt(seconds_since(t0), 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string configs = "configs", work = "acceptance_out";
  std::vector<int> only;
  app.add_option("--configs", configs, "directory with the experiment configs")->capture_default_str();
  app.add_option("--work", work, "output directory for CSV and JSON")->capture_default_str();
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(work);
  Runner runner{configs, work, {}};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"matrix identities", matrix_identities},
      {"set formulas vs brute force", set_formulas},
      {"edge statistics", edge_statistics},
      {"collision cardinalities", collision_counts},
      {"lack of bias", lack_of_bias},
      {"martingale identity", martingale_identity},
      {"conditional second moment", second_moment},
      {"exact filter oracle", exact_filter_oracle},
      {"variance recursion spot values and ordering", variance_recursions},
      {"CLT reproduction", [&] { return clt_reproduction(runner); }},
      {"LLN decay", [&] { return lln_decay(runner); }},
      {"subpopulation moments", [&] { return moment_boundedness(runner); }},
      {"determinism", [&] { return determinism(runner); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = static_cast<int>(c + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome v;
    try {
      v = criteria[c].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("[%s] %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[c].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
