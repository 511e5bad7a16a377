#include "butterfly/butterfly.h"

#include "butterfly/config.hpp"
#include "butterfly/error.hpp"
#include "butterfly/filter.hpp"
#include "butterfly/graph.hpp"
#include "butterfly/harness.hpp"
#include "butterfly/hmm.hpp"
#include "butterfly/resample.hpp"
#include "butterfly/schedule.hpp"
#include "butterfly/variance.hpp"
#include "butterfly/version.hpp"

#include <json.hpp>

#include <limits>
#include <new>
#include <optional>
#include <sstream>
#include <string>

struct bfly_schedule {
  butterfly::Schedule schedule;
};

struct bfly_hmm {
  butterfly::FiniteHmm hmm;
};

struct bfly_string {
  std::string text;
};

namespace {

using butterfly::ErrorCode;
using nlohmann::json;

thread_local std::string last_error;

bfly_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return BFLY_ERR_INVALID_ARGUMENT;
    case ErrorCode::OutOfRange: return BFLY_ERR_OUT_OF_RANGE;
    case ErrorCode::CapacityExceeded: return BFLY_ERR_CAPACITY;
    case ErrorCode::AssumptionViolation: return BFLY_ERR_ASSUMPTION;
    case ErrorCode::Numeric: return BFLY_ERR_NUMERIC;
    case ErrorCode::Io: return BFLY_ERR_IO;
    case ErrorCode::Parse: return BFLY_ERR_PARSE;
  }
  return BFLY_ERR_INTERNAL;
}

template <class Fn>
bfly_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return BFLY_OK;
  } catch (const butterfly::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    last_error = e.what();
    return BFLY_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return BFLY_ERR_CAPACITY;
  } catch (const std::exception& e) {
    last_error = e.what();
    return BFLY_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  butterfly::require(p != nullptr, ErrorCode::InvalidArgument, std::string("null ") + what);
}

void emit(bfly_string** out, std::string text) {
  need(out, "output");
  *out = new bfly_string{std::move(text)};
}

std::span<const double> view(const double* p, std::size_t n, const char* what) {
  need(p, what);
  return {p, n};
}

json one_based(const butterfly::IndexSet& set) {
  json arr = json::array();
  for (std::size_t v : set) arr.push_back(v + 1);
  return arr;
}

std::string fmt(double x) { return butterfly::format_double(x); }

}  // namespace

extern "C" {

const char* bfly_version(void) { return butterfly::version_string(); }

const char* bfly_last_error(void) { return last_error.c_str(); }

const char* bfly_status_name(bfly_status status) {
  switch (status) {
    case BFLY_OK: return "ok";
    case BFLY_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BFLY_ERR_OUT_OF_RANGE: return "out of range";
    case BFLY_ERR_CAPACITY: return "capacity exceeded";
    case BFLY_ERR_ASSUMPTION: return "assumption violation";
    case BFLY_ERR_NUMERIC: return "numeric failure";
    case BFLY_ERR_IO: return "i/o failure";
    case BFLY_ERR_PARSE: return "parse error";
    case BFLY_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bfly_string_data(const bfly_string* s) { return s ? s->text.c_str() : ""; }
size_t bfly_string_size(const bfly_string* s) { return s ? s->text.size() : 0; }
void bfly_string_free(bfly_string* s) { delete s; }

// ---- schedules -------------------------------------------------------------

bfly_status bfly_schedule_create(bfly_family family, size_t a, size_t b, bfly_schedule** out) {
  return guard([&] {
    need(out, "output");
    switch (family) {
      case BFLY_MULTINOMIAL: *out = new bfly_schedule{butterfly::Schedule::multinomial(a)}; return;
      case BFLY_RADIX: *out = new bfly_schedule{butterfly::Schedule::radix(a, b)}; return;
      case BFLY_MIXED_RADIX: *out = new bfly_schedule{butterfly::Schedule::mixed_radix(a, b)}; return;
    }
    butterfly::fail(ErrorCode::InvalidArgument, "unknown family");
  });
}

bfly_status bfly_schedule_create_named(const char* family, size_t a, size_t b, bfly_schedule** out) {
  return guard([&] {
    need(family, "family");
    need(out, "output");
    const auto fam = butterfly::parse_family(family);
    *out = new bfly_schedule{
        butterfly::schedule_for(fam, a, fam == butterfly::Family::Multinomial ? a : b)};
  });
}

void bfly_schedule_destroy(bfly_schedule* s) { delete s; }

bfly_status bfly_schedule_info(const bfly_schedule* s, bfly_family* family, size_t* r, size_t* width,
                               size_t* n_particles, size_t* n_stages) {
  return guard([&] {
    need(s, "schedule");
    const auto& sc = s->schedule;
    if (family) *family = static_cast<bfly_family>(sc.family());
    if (r) *r = sc.radix();
    if (width) *width = sc.width();
    if (n_particles) *n_particles = sc.size();
    if (n_stages) *n_stages = sc.stages();
  });
}

bfly_status bfly_schedule_row(const bfly_schedule* s, size_t k, size_t i, size_t* columns,
                              int64_t* numerators, int64_t* denominators, size_t capacity, size_t* count) {
  return guard([&] {
    need(s, "schedule");
    need(count, "count");
    const butterfly::StageRow row = butterfly::stage_row(s->schedule, k, i);
    *count = row.entries.size();
    for (std::size_t e = 0; e < row.entries.size() && e < capacity; ++e) {
      const auto& w = row.entries[e].weight;
      const auto num = boost::multiprecision::numerator(w);
      const auto den = boost::multiprecision::denominator(w);
      butterfly::require(num <= std::numeric_limits<int64_t>::max() &&
                             den <= std::numeric_limits<int64_t>::max(),
                         ErrorCode::CapacityExceeded, "weight does not fit in 64 bits");
      if (columns) columns[e] = row.entries[e].column;
      if (numerators) numerators[e] = static_cast<int64_t>(num);
      if (denominators) denominators[e] = static_cast<int64_t>(den);
    }
  });
}

bfly_status bfly_schedule_row_json(const bfly_schedule* s, size_t k, size_t i, bfly_string** out) {
  return guard([&] {
    need(s, "schedule");
    const butterfly::StageRow row = butterfly::stage_row(s->schedule, k, i);
    json entries = json::array();
    for (const auto& e : row.entries) {
      entries.push_back({{"column", e.column + 1},
                         {"weight", butterfly::to_string(e.weight)},
                         {"value", butterfly::to_double(e.weight)}});
    }
    json j = {{"schedule", s->schedule.describe()}, {"stage", k}, {"row", i + 1}, {"entries", entries}};
    emit(out, j.dump(2));
  });
}

bfly_status bfly_schedule_verify(const bfly_schedule* s, int* all_hold, bfly_string** report_json) {
  return guard([&] {
    need(s, "schedule");
    const auto rep = butterfly::verify_assumptions(s->schedule);
    const bool multinomial = s->schedule.family() == butterfly::Family::Multinomial;
    // Multinomial is only required to be doubly stochastic with uniform product.
    const bool ok = multinomial ? rep.double_stochastic && rep.product_uniform : rep.all();
    if (all_hold) *all_hold = ok ? 1 : 0;
    if (report_json) {
      json j = {{"schedule", s->schedule.describe()},
                {"double_stochastic", rep.double_stochastic},
                {"product_uniform", rep.product_uniform},
                {"symmetric", rep.symmetric},
                {"commuting", rep.commuting},
                {"idempotent", rep.idempotent},
                {"equal_row_counts", rep.equal_row_counts},
                {"unique_paths", rep.unique_paths},
                {"unique_paths_checked", rep.unique_paths_checked},
                {"pass", ok}};
      emit(report_json, j.dump(2));
    }
  });
}

// ---- graph -----------------------------------------------------------------

bfly_status bfly_index_set(const bfly_schedule* s, bfly_set_kind kind, size_t k, size_t i, size_t* out,
                           size_t capacity, size_t* count) {
  return guard([&] {
    need(s, "schedule");
    need(count, "count");
    butterfly::IndexSet set;
    switch (kind) {
      case BFLY_SET_PARENT: set = butterfly::parent_set(s->schedule, k, i); break;
      case BFLY_SET_PRIME_PARENT: set = butterfly::prime_parent_set(s->schedule, k, i); break;
      case BFLY_SET_COLLISION_START: set = butterfly::collision_start_set(s->schedule, k, i); break;
      case BFLY_SET_TAIL_PRODUCT: set = butterfly::tail_product_set(s->schedule, k, i); break;
      default: butterfly::fail(ErrorCode::InvalidArgument, "unknown set kind");
    }
    *count = set.size();
    for (std::size_t e = 0; e < set.size() && e < capacity && out; ++e) out[e] = set[e];
  });
}

bfly_status bfly_sets_json(const bfly_schedule* s, size_t i, bfly_string** out) {
  return guard([&] {
    need(s, "schedule");
    const auto& sc = s->schedule;
    std::optional<butterfly::SupportOracle> oracle;
    if (sc.size() <= butterfly::kDenseCap) oracle.emplace(sc);
    json stages = json::array();
    bool agree = true;
    for (std::size_t k = 0; k <= sc.stages(); ++k) {
      json entry = {{"k", k}};
      const auto kk = butterfly::prime_parent_set(sc, k, i);
      entry["K"] = one_based(kk);
      entry["paths_from"] = butterfly::path_count_from(sc, k, i);
      if (oracle) agree = agree && kk == oracle->prime_parent_set(k, i);
      if (k >= 1) {
        const auto p = butterfly::parent_set(sc, k, i);
        const auto c = butterfly::collision_start_set(sc, k, i);
        const auto q = butterfly::tail_product_set(sc, k, i);
        entry["P"] = one_based(p);
        entry["C"] = one_based(c);
        entry["Q"] = one_based(q);
        if (oracle) {
          agree = agree && p == oracle->parent_set(k, i) && c == oracle->collision_start_set(k, i) &&
                  q == oracle->tail_product_set(k, i);
        }
      }
      stages.push_back(std::move(entry));
    }
    json j = {{"schedule", sc.describe()}, {"index", i + 1}, {"stages", stages}};
    if (oracle) j["brute_force_agrees"] = agree;
    emit(out, j.dump(2));
  });
}

bfly_status bfly_path_count(const bfly_schedule* s, size_t k, size_t u, uint64_t* out) {
  return guard([&] {
    need(s, "schedule");
    need(out, "output");
    *out = butterfly::path_count_from(s->schedule, k, u);
  });
}

bfly_status bfly_collision_cardinalities(const bfly_schedule* s, size_t i, size_t j, uint64_t* colliding,
                                         uint64_t* non_colliding) {
  return guard([&] {
    need(s, "schedule");
    const auto cc = butterfly::collision_cardinalities(s->schedule, i, j);
    if (colliding) *colliding = cc.colliding;
    if (non_colliding) *non_colliding = cc.non_colliding;
  });
}

bfly_status bfly_edge_stats_json(const bfly_schedule* s, bfly_string** out) {
  return guard([&] {
    need(s, "schedule");
    const auto table = butterfly::edge_stats(s->schedule);
    const auto counted = butterfly::count_edges(s->schedule);
    json j = {{"schedule", s->schedule.describe()},
              {"incoming_per_stage", table.incoming_per_stage},
              {"total_edges", table.total_edges},
              {"counted_total_edges", counted.total_edges},
              {"agree", table.incoming_per_stage == counted.incoming_per_stage &&
                            table.total_edges == counted.total_edges}};
    emit(out, j.dump(2));
  });
}

bfly_status bfly_partition_json(const bfly_schedule* s, size_t d, bfly_string** out) {
  return guard([&] {
    need(s, "schedule");
    const auto part = butterfly::build_partition(s->schedule, d);
    json blocks = json::array();
    for (const auto& b : part.blocks) blocks.push_back(one_based(b));
    json j = {{"schedule", s->schedule.describe()},
              {"d", part.d},
              {"block_size", part.block_size},
              {"blocks", blocks},
              {"structure_holds", butterfly::partition_structure_holds(s->schedule, part)}};
    emit(out, j.dump(2));
  });
}

// ---- resampling --------------------------------------------------------------

bfly_status bfly_v_table(const bfly_schedule* s, const double* weights, double* out) {
  return guard([&] {
    need(s, "schedule");
    need(out, "output");
    const auto v = butterfly::v_table(view(weights, s->schedule.size(), "weights"), s->schedule);
    std::size_t pos = 0;
    for (const auto& stage : v) {
      for (double x : stage) out[pos++] = x;
    }
  });
}

bfly_status bfly_resample(const bfly_schedule* s, const double* weights, uint64_t seed, uint64_t replicate,
                          uint64_t step, uint32_t* origin) {
  return guard([&] {
    need(s, "schedule");
    need(origin, "origin");
    butterfly::AugmentedResampler engine;
    engine.resample(s->schedule, view(weights, s->schedule.size(), "weights"),
                    butterfly::StreamKey{seed, replicate, step}, std::span(origin, s->schedule.size()));
  });
}

bfly_status bfly_resample_trace_json(const bfly_schedule* s, const double* weights, uint64_t seed,
                                     bfly_string** out) {
  return guard([&] {
    need(s, "schedule");
    const std::size_t n = s->schedule.size();
    std::vector<butterfly::ParticleIndex> origin(n);
    butterfly::ResampleTrace trace;
    butterfly::AugmentedResampler engine;
    engine.resample(s->schedule, view(weights, n, "weights"), butterfly::StreamKey{seed, 0, 0}, origin, &trace);
    json ancestors = json::array();
    json origins = json::array();
    for (std::size_t k = 0; k <= trace.m; ++k) {
      json o = json::array();
      for (auto x : trace.origins[k]) o.push_back(x + 1);
      origins.push_back(std::move(o));
      if (k == 0) continue;
      json a = json::array();
      for (auto x : trace.ancestors[k]) a.push_back(x + 1);
      ancestors.push_back(std::move(a));
    }
    json j = {{"schedule", s->schedule.describe()},
              {"seed", seed},
              {"v", trace.v},
              {"ancestors", ancestors},
              {"origins", origins}};
    emit(out, j.dump(2));
  });
}

bfly_status bfly_lack_of_bias(const bfly_schedule* s, const double* weights, const double* phi, int exact,
                              uint64_t seed, size_t replicates, double* lhs, double* rhs, double* se) {
  return guard([&] {
    need(s, "schedule");
    const std::size_t n = s->schedule.size();
    const auto res = exact ? butterfly::lack_of_bias_exact(view(weights, n, "weights"), view(phi, n, "phi"),
                                                           s->schedule)
                           : butterfly::lack_of_bias_monte_carlo(view(weights, n, "weights"),
                                                                 view(phi, n, "phi"), s->schedule, seed,
                                                                 replicates);
    if (lhs) *lhs = res.lhs;
    if (rhs) *rhs = res.rhs;
    if (se) *se = res.se;
  });
}

bfly_status bfly_second_moment(const bfly_schedule* s, const double* weights, const double* phi,
                               double* closed_form, double* enumerated) {
  return guard([&] {
    need(s, "schedule");
    const std::size_t n = s->schedule.size();
    const auto w = view(weights, n, "weights");
    const auto p = view(phi, n, "phi");
    if (closed_form) *closed_form = butterfly::conditional_second_moment_closed_form(w, p, s->schedule);
    if (enumerated) *enumerated = butterfly::conditional_second_moment_enumerated(w, p, s->schedule);
  });
}

// ---- models ----------------------------------------------------------------

bfly_status bfly_hmm_from_json(const char* text, bfly_hmm** out) {
  return guard([&] {
    need(text, "json");
    need(out, "output");
    *out = new bfly_hmm{butterfly::model_from_json(json::parse(text))};
  });
}

bfly_status bfly_hmm_binary_symmetric(double p, double q, bfly_hmm** out) {
  return guard([&] {
    need(out, "output");
    *out = new bfly_hmm{butterfly::binary_symmetric(p, q)};
  });
}

bfly_status bfly_hmm_random(size_t states, size_t symbols, uint64_t seed, bfly_hmm** out) {
  return guard([&] {
    need(out, "output");
    *out = new bfly_hmm{butterfly::random_instance(states, symbols, seed)};
  });
}

void bfly_hmm_destroy(bfly_hmm* hmm) { delete hmm; }

bfly_status bfly_hmm_states(const bfly_hmm* hmm, size_t* states) {
  return guard([&] {
    need(hmm, "model");
    need(states, "output");
    *states = hmm->hmm.states();
  });
}

bfly_status bfly_hmm_to_json(const bfly_hmm* hmm, bfly_string** out) {
  return guard([&] {
    need(hmm, "model");
    emit(out, butterfly::model_to_json(hmm->hmm).dump(2));
  });
}

bfly_status bfly_simulate_json(const bfly_hmm* hmm, size_t horizon, uint64_t seed, bfly_string** out) {
  return guard([&] {
    need(hmm, "model");
    const auto traj = butterfly::simulate(hmm->hmm, horizon, seed);
    json states = json::array();
    for (auto x : traj.states) states.push_back(x + 1);
    json j = {{"seed", seed}, {"states", states}, {"observations", traj.observations}};
    emit(out, j.dump(2));
  });
}

bfly_status bfly_exact_filter_csv(const bfly_hmm* hmm, const double* observations, size_t count,
                                  bfly_string** out) {
  return guard([&] {
    need(hmm, "model");
    const auto ef = butterfly::exact_filter(hmm->hmm, view(observations, count, "observations"));
    std::string csv = "n,state,predictor,filter\n";
    for (std::size_t n = 0; n < ef.predictor.size(); ++n) {
      for (std::size_t x = 0; x < hmm->hmm.states(); ++x) {
        csv += std::to_string(n) + "," + std::to_string(x + 1) + "," + fmt(ef.predictor[n][x]) + "," +
               fmt(ef.filter[n][x]) + "\n";
      }
    }
    emit(out, std::move(csv));
  });
}

bfly_status bfly_variance_csv(const bfly_hmm* hmm, const double* observations, size_t count, const char* phi,
                              size_t r, const char* flavor, bfly_string** out) {
  return guard([&] {
    need(hmm, "model");
    need(phi, "phi");
    const std::string which = flavor ? flavor : "all";
    const auto& model = hmm->hmm;
    const auto ef = butterfly::exact_filter(model, view(observations, count, "observations"));
    const auto f = butterfly::parse_test_function(phi, model.states());
    std::vector<butterfly::VarianceSeries> series;
    if (which == "bpf" || which == "all") series.push_back(butterfly::bpf_variance(ef, model, f.values));
    if (which == "radix" || which == "all") series.push_back(butterfly::radix_variance(ef, model, f.values, r));
    if (which == "mixed" || which == "all") series.push_back(butterfly::mixed_variance(ef, model, f.values, r));
    butterfly::require(!series.empty(), ErrorCode::InvalidArgument, "unknown flavor '" + which + "'");
    std::string csv = "n,flavor,sigma_pred,sigma_filt\n";
    for (std::size_t n = 0; n < ef.predictor.size(); ++n) {
      for (const auto& v : series) {
        csv += std::to_string(n) + "," + butterfly::to_string(v.flavor) + "," + fmt(v.sigma_pred[n]) + "," +
               fmt(v.sigma_filt[n]) + "\n";
      }
    }
    emit(out, std::move(csv));
  });
}

bfly_status bfly_filter_csv(const bfly_hmm* hmm, const double* observations, size_t count,
                            const bfly_schedule* s, size_t horizon, const char* const* functionals,
                            size_t n_functionals, uint64_t seed, bfly_string** out, bfly_string** particles) {
  return guard([&] {
    need(hmm, "model");
    need(s, "schedule");
    const auto& model = hmm->hmm;
    const auto obs = view(observations, count, "observations");
    std::vector<butterfly::TestFunction> fs;
    for (std::size_t f = 0; f < n_functionals; ++f) {
      need(functionals, "functionals");
      need(functionals[f], "functional");
      fs.push_back(butterfly::parse_test_function(functionals[f], model.states()));
    }
    butterfly::FilterOptions opt;
    opt.seed = seed;
    opt.keep_particles = particles != nullptr;
    const auto run = butterfly::run_filter(model, obs, s->schedule, horizon, fs, opt);
    const auto ef = butterfly::exact_filter(model, obs.first(horizon + 1));
    std::string csv = "n,functional,predicted,filtered,exact_predicted,exact_filtered\n";
    for (std::size_t n = 0; n <= horizon; ++n) {
      for (std::size_t f = 0; f < fs.size(); ++f) {
        csv += std::to_string(n) + "," + fs[f].name + "," + fmt(run.predicted[n][f]) + "," +
               fmt(run.filtered[n][f]) + "," + fmt(butterfly::evaluate(ef.predictor[n], fs[f].values)) + "," +
               fmt(butterfly::evaluate(ef.filter[n], fs[f].values)) + "\n";
      }
    }
    emit(out, std::move(csv));
    if (particles) {
      std::string pcsv = "index,particle,resampled\n";
      for (std::size_t i = 0; i < run.n_particles; ++i) {
        pcsv += std::to_string(i + 1) + "," + std::to_string(run.particles.back()[i] + 1) + "," +
                std::to_string(run.resampled.back()[i] + 1) + "\n";
      }
      emit(particles, std::move(pcsv));
    }
  });
}

// ---- experiments -------------------------------------------------------------

bfly_status bfly_experiment(const char* kind, const char* config_json, const char* base_dir, bfly_string** csv,
                            bfly_string** summary, int* all_pass) {
  return guard([&] {
    need(kind, "kind");
    need(config_json, "config");
    const auto cfg = butterfly::parse_experiment_config(json::parse(config_json), base_dir ? base_dir : ".");
    const auto outcome = butterfly::run_experiment(kind, cfg);
    butterfly::emit_results(outcome, cfg);
    if (csv) emit(csv, outcome.table.to_csv());
    if (summary) emit(summary, butterfly::summary_json(outcome, cfg).dump(2));
    if (all_pass) *all_pass = outcome.all_pass() ? 1 : 0;
  });
}

}  // extern "C"
