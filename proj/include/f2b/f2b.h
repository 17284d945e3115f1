/*
 * f2b: face-embedding to BMI regression, evaluation and bias audit.
 *
 * C interface over the C++ core. Every object is an opaque handle created by
 * a *_load / *_generate / *_train call and released with the matching *_free.
 * Functions that can fail return an f2b_status; on failure f2b_last_error()
 * holds a message for the calling thread until its next f2b call.
 *
 * Strings handed out through char** parameters are heap-allocated and must be
 * released with f2b_string_free.
 */
#ifndef F2B_H
#define F2B_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(F2B_BUILDING)
#    define F2B_API __declspec(dllexport)
#  else
#    define F2B_API __declspec(dllimport)
#  endif
#else
#  define F2B_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Codes below 20 are input faults, 20 and above are algorithmic non-success. */
typedef enum f2b_status {
  F2B_OK = 0,
  F2B_E_DOMAIN = 1,
  F2B_E_PARSE = 2,
  F2B_E_INTEGRITY = 3,
  F2B_E_FORMAT = 4,
  F2B_E_CORRUPTION = 5,
  F2B_E_VALIDATION = 6,
  F2B_E_IO = 7,
  F2B_E_CONVERGENCE = 20,
  F2B_E_CAPACITY = 21,
  F2B_E_UNDEFINED_CORRELATION = 22,
  F2B_E_INTERNAL = 99
} f2b_status;

typedef enum f2b_kernel { F2B_KERNEL_LINEAR = 0, F2B_KERNEL_RBF = 1 } f2b_kernel;
typedef enum f2b_protocol { F2B_ACROSS_PEOPLE = 0, F2B_WITHIN_PERSON = 1 } f2b_protocol;
typedef enum f2b_group_attr { F2B_GROUP_GENDER = 0, F2B_GROUP_RACE = 1 } f2b_group_attr;

typedef struct f2b_dataset f2b_dataset;
typedef struct f2b_split f2b_split;
typedef struct f2b_model f2b_model;
typedef struct f2b_pairs f2b_pairs;

F2B_API const char* f2b_version(void);
F2B_API const char* f2b_last_error(void);
F2B_API const char* f2b_status_name(f2b_status status);
F2B_API int f2b_status_is_algorithmic(f2b_status status);
F2B_API void f2b_string_free(char* s);

/* ---- data ---------------------------------------------------------------- */

/* Joins the metadata CSV with an F2BE embedding file. Orphans and incomplete
 * persons are excluded and listed by f2b_dataset_report_json. */
F2B_API f2b_status f2b_dataset_load(const char* metadata_csv, const char* embeddings_f2be, int normalize,
                                    f2b_dataset** out);
F2B_API void f2b_dataset_free(f2b_dataset* ds);
F2B_API size_t f2b_dataset_size(const f2b_dataset* ds);
F2B_API size_t f2b_dataset_dim(const f2b_dataset* ds);
F2B_API f2b_status f2b_dataset_report_json(const f2b_dataset* ds, char** out_json);

/* Writes a synthetic cohort (metadata CSV + F2BE) with BMI linear in the
 * embedding plus Gaussian noise. */
F2B_API f2b_status f2b_synth_write(size_t persons, size_t dim, double noise_sd, uint64_t seed,
                                   const char* metadata_out, const char* embeddings_out);

/* ---- splits -------------------------------------------------------------- */

F2B_API f2b_status f2b_split_across_people(const f2b_dataset* ds, double test_fraction, uint64_t seed,
                                           f2b_split** out);
F2B_API f2b_status f2b_split_across_people_count(const f2b_dataset* ds, size_t test_records, uint64_t seed,
                                                 f2b_split** out);
F2B_API f2b_status f2b_split_within_person(const f2b_dataset* ds, size_t n_test, uint64_t seed,
                                           f2b_split** out);
F2B_API f2b_status f2b_split_load(const char* path, f2b_split** out);
F2B_API f2b_status f2b_split_save(const f2b_split* split, const char* path);
F2B_API void f2b_split_free(f2b_split* split);
F2B_API size_t f2b_split_train_size(const f2b_split* split);
F2B_API size_t f2b_split_test_size(const f2b_split* split);
F2B_API f2b_protocol f2b_split_protocol(const f2b_split* split);
/* F2B_E_VALIDATION with the violation in f2b_last_error when an invariant fails. */
F2B_API f2b_status f2b_split_check(const f2b_dataset* ds, const f2b_split* split);

/* ---- regression ---------------------------------------------------------- */

typedef struct f2b_train_options {
  f2b_kernel kernel;
  double gamma;        /* rbf only; 0 selects 1/dim */
  double c;
  double epsilon;
  double tolerance;
  uint64_t max_passes; /* 0 selects 10 * n */
  uint64_t seed;
} f2b_train_options;

F2B_API void f2b_train_options_default(f2b_train_options* opts);

/* Trains on the split's training side, or on every record when split is NULL. */
F2B_API f2b_status f2b_train(const f2b_dataset* ds, const f2b_split* split, const f2b_train_options* opts,
                             f2b_model** out);
F2B_API f2b_status f2b_model_load(const char* path, f2b_model** out);
F2B_API f2b_status f2b_model_save(const f2b_model* model, const char* path);
F2B_API void f2b_model_free(f2b_model* model);
F2B_API size_t f2b_model_dim(const f2b_model* model);
F2B_API size_t f2b_model_support_size(const f2b_model* model);
F2B_API double f2b_model_bias(const f2b_model* model);
/* Whether the model expects unit-normalized features (load datasets to match). */
F2B_API int f2b_model_normalized(const f2b_model* model);

/* x is a raw embedding; it is unit-normalized first when the model was
 * trained on normalized features. */
F2B_API f2b_status f2b_model_predict(const f2b_model* model, const double* x, size_t dim, double* out_bmi);

/* Writes `record_id,predicted_bmi` for every vector of an F2BE file. */
F2B_API f2b_status f2b_predict_embeddings(const f2b_model* model, const char* embeddings_f2be,
                                          const char* out_csv);

/* Pearson r on the split's test side, overall and per gender, as JSON. */
F2B_API f2b_status f2b_evaluate(const f2b_model* model, const f2b_dataset* ds, const f2b_split* split,
                                char** out_json);

/* ---- comparison task ----------------------------------------------------- */

/* Draws from the split's test side, or from every record when split is NULL. */
F2B_API f2b_status f2b_pairs_generate(const f2b_dataset* ds, const f2b_split* split, size_t per_category,
                                      uint64_t seed, f2b_pairs** out);
F2B_API void f2b_pairs_free(f2b_pairs* pairs);
F2B_API size_t f2b_pairs_size(const f2b_pairs* pairs);
F2B_API f2b_status f2b_pairs_to_json(const f2b_pairs* pairs, char** out_json);
F2B_API f2b_status f2b_pairs_export_questionnaire(const f2b_pairs* pairs, const char* path, uint64_t seed);

/* Machine accuracy when model is given and, when answer_key and human_answers
 * are both given, the human accuracy overlay. */
F2B_API f2b_status f2b_pairs_report(const f2b_pairs* pairs, const f2b_dataset* ds, const f2b_model* model,
                                    const char* answer_key, const char* human_answers, char** out_json);

/* ---- bias audit ---------------------------------------------------------- */

typedef struct f2b_audit_options {
  f2b_group_attr group_attr;
  const char* group_x;
  const char* group_y;
  size_t n_pairs;
  int include_train; /* pool = test side plus training side */
  uint64_t seed;
} f2b_audit_options;

/* out_summary may be NULL. */
F2B_API f2b_status f2b_bias_audit(const f2b_dataset* ds, const f2b_split* split, const f2b_model* model,
                                  const f2b_audit_options* opts, char** out_json, char** out_summary);

F2B_API f2b_status f2b_binomial_test(uint64_t k, uint64_t n, double p0, double* p_one_sided,
                                     double* p_two_sided);

#ifdef __cplusplus
}
#endif

#endif /* F2B_H */
