#ifndef BUTTERFLY_BUTTERFLY_H
#define BUTTERFLY_BUTTERFLY_H

/* C interface to the butterfly resampling library.
 *
 * Objects are opaque handles released with the matching *_destroy call.
 * Every fallible function returns a bfly_status; on failure a message is
 * available from bfly_last_error() (thread-local, valid until the next call
 * on the same thread).
 *
 * Numeric index arguments and outputs are 0-based. JSON and CSV documents
 * produced by the library use 1-based particle and state indices. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BFLY_BUILDING_LIBRARY)
#    define BFLY_API __declspec(dllexport)
#  else
#    define BFLY_API __declspec(dllimport)
#  endif
#else
#  define BFLY_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bfly_status {
  BFLY_OK = 0,
  BFLY_ERR_INVALID_ARGUMENT = 1,
  BFLY_ERR_OUT_OF_RANGE = 2,
  BFLY_ERR_CAPACITY = 3,
  BFLY_ERR_ASSUMPTION = 4,
  BFLY_ERR_NUMERIC = 5,
  BFLY_ERR_IO = 6,
  BFLY_ERR_PARSE = 7,
  BFLY_ERR_INTERNAL = 99
} bfly_status;

typedef enum bfly_family {
  BFLY_MULTINOMIAL = 0,
  BFLY_RADIX = 1,
  BFLY_MIXED_RADIX = 2
} bfly_family;

typedef enum bfly_set_kind {
  BFLY_SET_PARENT = 0,          /* P_k(i), k in [1, m] */
  BFLY_SET_PRIME_PARENT = 1,    /* K_k(i), k in [0, m] */
  BFLY_SET_COLLISION_START = 2, /* K_k(i) \ K_{k-1}(i), k in [1, m] */
  BFLY_SET_TAIL_PRODUCT = 3     /* support of row i of A_m ... A_{m-k+1} */
} bfly_set_kind;

typedef struct bfly_schedule bfly_schedule;
typedef struct bfly_hmm bfly_hmm;
typedef struct bfly_string bfly_string;

BFLY_API const char* bfly_version(void);
BFLY_API const char* bfly_last_error(void);
BFLY_API const char* bfly_status_name(bfly_status status);

/* Owned text buffers (JSON, CSV). */
BFLY_API const char* bfly_string_data(const bfly_string* s);
BFLY_API size_t bfly_string_size(const bfly_string* s);
BFLY_API void bfly_string_free(bfly_string* s);

/* ---- schedules ---------------------------------------------------------- */

/* multinomial: a = N. radix: a = r, b = m. mixed radix: a = r, b = c. */
BFLY_API bfly_status bfly_schedule_create(bfly_family family, size_t a, size_t b, bfly_schedule** out);
/* family: "multinomial" (or "bpf"), "radix", "mixed". */
BFLY_API bfly_status bfly_schedule_create_named(const char* family, size_t a, size_t b,
                                                bfly_schedule** out);
BFLY_API void bfly_schedule_destroy(bfly_schedule* s);
BFLY_API bfly_status bfly_schedule_info(const bfly_schedule* s, bfly_family* family, size_t* r,
                                        size_t* width, size_t* n_particles, size_t* n_stages);

/* Row i of A_k as exact fractions. Writes up to `capacity` entries and the
 * full entry count to *count. Fails with BFLY_ERR_CAPACITY when the
 * weights do not fit in 64-bit integers. */
BFLY_API bfly_status bfly_schedule_row(const bfly_schedule* s, size_t k, size_t i, size_t* columns,
                                       int64_t* numerators, int64_t* denominators, size_t capacity,
                                       size_t* count);
BFLY_API bfly_status bfly_schedule_row_json(const bfly_schedule* s, size_t k, size_t i, bfly_string** out);
BFLY_API bfly_status bfly_schedule_verify(const bfly_schedule* s, int* all_hold, bfly_string** report_json);

/* ---- graph combinatorics ----------------------------------------------- */

BFLY_API bfly_status bfly_index_set(const bfly_schedule* s, bfly_set_kind kind, size_t k, size_t i,
                                    size_t* out, size_t capacity, size_t* count);
/* Closed-form and brute-force P/K/C~/Q tables for particle i. */
BFLY_API bfly_status bfly_sets_json(const bfly_schedule* s, size_t i, bfly_string** out);
BFLY_API bfly_status bfly_path_count(const bfly_schedule* s, size_t k, size_t u, uint64_t* out);
BFLY_API bfly_status bfly_collision_cardinalities(const bfly_schedule* s, size_t i, size_t j,
                                                  uint64_t* colliding, uint64_t* non_colliding);
BFLY_API bfly_status bfly_edge_stats_json(const bfly_schedule* s, bfly_string** out);
BFLY_API bfly_status bfly_partition_json(const bfly_schedule* s, size_t d, bfly_string** out);

/* ---- resampling --------------------------------------------------------- */

/* out has (m + 1) * N entries, stage-major. */
BFLY_API bfly_status bfly_v_table(const bfly_schedule* s, const double* weights, double* out);
/* origin[i] = input index of output particle i. */
BFLY_API bfly_status bfly_resample(const bfly_schedule* s, const double* weights, uint64_t seed,
                                   uint64_t replicate, uint64_t step, uint32_t* origin);
BFLY_API bfly_status bfly_resample_trace_json(const bfly_schedule* s, const double* weights,
                                              uint64_t seed, bfly_string** out);
/* exact != 0: enumeration oracle (se = 0). Otherwise `replicates` Monte
 * Carlo runs. */
BFLY_API bfly_status bfly_lack_of_bias(const bfly_schedule* s, const double* weights, const double* phi,
                                       int exact, uint64_t seed, size_t replicates, double* lhs,
                                       double* rhs, double* se);
/* enumerated may be NULL to skip the enumeration oracle. */
BFLY_API bfly_status bfly_second_moment(const bfly_schedule* s, const double* weights, const double* phi,
                                        double* closed_form, double* enumerated);

/* ---- models ------------------------------------------------------------- */

BFLY_API bfly_status bfly_hmm_from_json(const char* json, bfly_hmm** out);
BFLY_API bfly_status bfly_hmm_binary_symmetric(double p, double q, bfly_hmm** out);
BFLY_API bfly_status bfly_hmm_random(size_t states, size_t symbols, uint64_t seed, bfly_hmm** out);
BFLY_API void bfly_hmm_destroy(bfly_hmm* hmm);
BFLY_API bfly_status bfly_hmm_states(const bfly_hmm* hmm, size_t* states);
BFLY_API bfly_status bfly_hmm_to_json(const bfly_hmm* hmm, bfly_string** out);
/* {"states": [...], "observations": [...]} with 1-based states. */
BFLY_API bfly_status bfly_simulate_json(const bfly_hmm* hmm, size_t horizon, uint64_t seed, bfly_string** out);

/* Columns n, state, predictor, filter. */
BFLY_API bfly_status bfly_exact_filter_csv(const bfly_hmm* hmm, const double* observations, size_t count,
                                           bfly_string** out);
/* flavor: "bpf", "radix", "mixed" or "all". Columns n, flavor, sigma_pred, sigma_filt. */
BFLY_API bfly_status bfly_variance_csv(const bfly_hmm* hmm, const double* observations, size_t count,
                                       const char* phi, size_t r, const char* flavor, bfly_string** out);
/* Columns n, functional, predicted, filtered, exact_predicted, exact_filtered.
 * particles may be NULL; otherwise receives the final-step particles as CSV
 * (index, particle, resampled). */
BFLY_API bfly_status bfly_filter_csv(const bfly_hmm* hmm, const double* observations, size_t count,
                                     const bfly_schedule* s, size_t horizon, const char* const* functionals,
                                     size_t n_functionals, uint64_t seed, bfly_string** out,
                                     bfly_string** particles);

/* ---- experiments -------------------------------------------------------- */

/* kind: "clt", "bias", "moments" or "lln". config_json is an experiment
 * configuration; relative paths in it resolve against base_dir (NULL: ".").
 * Output files named in the configuration are written. csv/summary may be
 * NULL. */
BFLY_API bfly_status bfly_experiment(const char* kind, const char* config_json, const char* base_dir,
                                     bfly_string** csv, bfly_string** summary, int* all_pass);

#ifdef __cplusplus
}
#endif

#endif
