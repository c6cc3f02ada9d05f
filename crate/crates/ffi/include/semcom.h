#ifndef SEMCOM_H
#define SEMCOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all functions.
 */
typedef enum SemcomStatus {
  SEMCOM_STATUS_OK = 0,
  SEMCOM_STATUS_NULL_POINTER = 1,
  SEMCOM_STATUS_INVALID_STRING = 2,
  SEMCOM_STATUS_PARSE = 3,
  SEMCOM_STATUS_VALIDATION = 4,
  SEMCOM_STATUS_DOMAIN = 5,
  SEMCOM_STATUS_SHAPE = 6,
  SEMCOM_STATUS_IO = 7,
  SEMCOM_STATUS_BUFFER_TOO_SMALL = 8,
  SEMCOM_STATUS_INTERNAL = 9,
} SemcomStatus;

/**
 * A simplicial complex together with the corpus it was built from and its
 * Hodge Laplacians.
 */
typedef struct SemcomComplex SemcomComplex;

/**
 * A coauthorship corpus.
 */
typedef struct SemcomGraph SemcomGraph;

/**
 * A trained autoencoder checkpoint.
 */
typedef struct SemcomModel SemcomModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last failure message on this thread, or null. The
 * returned copy must be released with [`semcom_string_free`].
 */
char *semcom_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void semcom_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *semcom_version(void);

/**
 * Reads a JSON Lines corpus.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_graph` a valid pointer.
 */
enum SemcomStatus semcom_graph_load(const char *path, struct SemcomGraph **out_graph);

/**
 * Generates a synthetic corpus.
 *
 * # Safety
 * `out_graph` must be a valid pointer.
 */
enum SemcomStatus semcom_graph_synth(size_t n_authors,
                                     size_t n_papers,
                                     size_t max_coauthors,
                                     uint64_t cite_max,
                                     uint64_t seed,
                                     struct SemcomGraph **out_graph);

/**
 * # Safety
 * `graph` must be a live handle and `out_count` a valid pointer.
 */
enum SemcomStatus semcom_graph_paper_count(const struct SemcomGraph *graph, size_t *out_count);

/**
 * # Safety
 * `graph` must be null or a handle not freed before.
 */
void semcom_graph_free(struct SemcomGraph *graph);

/**
 * Builds the complex of `graph`. The graph handle stays owned by the
 * caller.
 *
 * # Safety
 * `graph` must be a live handle and `out_complex` a valid pointer.
 */
enum SemcomStatus semcom_complex_build(const struct SemcomGraph *graph,
                                       struct SemcomComplex **out_complex);

/**
 * # Safety
 * `complex` must be a live handle and `out_orders` a valid pointer.
 */
enum SemcomStatus semcom_complex_num_orders(const struct SemcomComplex *complex,
                                            size_t *out_orders);

/**
 * Number of simplices of order `k`; zero past the top order.
 *
 * # Safety
 * `complex` must be a live handle and `out_count` a valid pointer.
 */
enum SemcomStatus semcom_complex_count(const struct SemcomComplex *complex,
                                       size_t k,
                                       size_t *out_count);

/**
 * Copies the order-`k` cochain into `buf`. `out_written` always receives
 * the required length, so a call with a null buffer and `len == 0` sizes
 * the buffer.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes; the other pointers must be
 * valid.
 */
enum SemcomStatus semcom_complex_cochain(const struct SemcomComplex *complex,
                                         size_t k,
                                         double *buf,
                                         size_t len,
                                         size_t *out_written);

/**
 * Exact citation count of the papers whose author set contains all of
 * `authors`.
 *
 * # Safety
 * `authors` must point to `n_authors` NUL-terminated strings.
 */
enum SemcomStatus semcom_complex_query(const struct SemcomComplex *complex,
                                       const char *const *authors,
                                       size_t n_authors,
                                       double *out_value);

/**
 * # Safety
 * `complex` must be null or a handle not freed before.
 */
void semcom_complex_free(struct SemcomComplex *complex);

/**
 * Loads a checkpoint written by `semcom train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_model` a valid pointer.
 */
enum SemcomStatus semcom_model_load(const char *path, struct SemcomModel **out_model);

/**
 * Runs the model on the full cochains of `complex` and copies the order-`k`
 * reconstruction into `buf`, with the sizing rules of
 * [`semcom_complex_cochain`].
 *
 * # Safety
 * As for [`semcom_complex_cochain`]; `model` must be a live handle.
 */
enum SemcomStatus semcom_model_reconstruct(const struct SemcomModel *model,
                                           const struct SemcomComplex *complex,
                                           size_t k,
                                           double *buf,
                                           size_t len,
                                           size_t *out_written);

/**
 * # Safety
 * `model` must be null or a handle not freed before.
 */
void semcom_model_free(struct SemcomModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMCOM_H */
