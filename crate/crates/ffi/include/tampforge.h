#ifndef TAMPFORGE_H
#define TAMPFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TfStatus {
  TF_OK = 0,
  TF_NULL_POINTER = 1,
  TF_INVALID_UTF8 = 2,
  TF_INVALID_ARGUMENT = 3,
  TF_PARSE_ERROR = 4,
  TF_GENERATION_FAILED = 5,
  TF_PANIC = 6,
} TfStatus;

/**
 * Mirrors the verifier's failure reasons, in priority order.
 */
typedef enum TfFailureReason {
  TF_EXEC_TIMEOUT = 0,
  TF_PARSE_FAILURE = 1,
  TF_ILLEGAL_ACTION = 2,
  TF_VELOCITY_VIOLATION = 3,
  TF_TIME_LIMIT_VIOLATION = 4,
  TF_COLLISION_VIOLATION = 5,
  TF_SAFE_DISTANCE_VIOLATION = 6,
  TF_ORDER_VIOLATION = 7,
  TF_GOAL_NOT_REACHED = 8,
  TF_NONE = 9,
} TfFailureReason;

typedef enum TfClassification {
  TF_TRIVIAL = 0,
  TF_MODERATE = 1,
  TF_SYMBOLIC = 2,
} TfClassification;

/**
 * A generated or loaded task instance.
 */
typedef struct TfInstance TfInstance;

/**
 * The verifier's judgement of one program output.
 */
typedef struct TfVerdict TfVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *tf_last_error(void);

/**
 * Number of default difficulty buckets per environment.
 */
uint32_t tf_difficulty_buckets(void);

/**
 * Generates an instance of `env` (e.g. "blocksworld") from a default
 * difficulty bucket.
 *
 * # Safety
 * `env` must be a valid C string and `out` a writable pointer.
 */
enum TfStatus tf_instance_generate(const char *env,
                                   uint32_t bucket,
                                   uint64_t seed,
                                   struct TfInstance **out);

/**
 * Generates an instance from explicit difficulty parameters given as JSON.
 *
 * # Safety
 * `difficulty_json` must be a valid C string and `out` a writable pointer.
 */
enum TfStatus tf_instance_generate_with(const char *difficulty_json,
                                        uint64_t seed,
                                        struct TfInstance **out);

/**
 * Loads an instance from its JSON form.
 *
 * # Safety
 * `json` must be a valid C string and `out` a writable pointer.
 */
enum TfStatus tf_instance_from_json(const char *json, struct TfInstance **out);

/**
 * Pretty JSON for an instance. Free the result with `tf_string_free`.
 *
 * # Safety
 * `inst` must come from this library; `out` must be writable.
 */
enum TfStatus tf_instance_to_json(const struct TfInstance *inst, char **out);

/**
 * Prompt text a model sees for this instance. Free with
 * `tf_string_free`.
 *
 * # Safety
 * `inst` must come from this library; `out` must be writable.
 */
enum TfStatus tf_instance_description(const struct TfInstance *inst, char **out);

/**
 * # Safety
 * `inst` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void tf_instance_free(struct TfInstance *inst);

/**
 * Judges `len` bytes of program output against `inst`, as if the program
 * exited cleanly within the time limit.
 *
 * # Safety
 * `output` must point to `len` readable bytes (or be null with `len` 0);
 * `inst` must come from this library; `out` must be writable.
 */
enum TfStatus tf_verify(const struct TfInstance *inst,
                        const uint8_t *output,
                        size_t len,
                        struct TfVerdict **out);

/**
 * # Safety
 * `v` must be a live verdict handle or null.
 */
bool tf_verdict_success(const struct TfVerdict *v);

/**
 * Failure reason of a verdict; `TF_NONE` on success. A null handle reads
 * as `TF_PARSE_FAILURE`.
 *
 * # Safety
 * `v` must be a live verdict handle or null.
 */
enum TfFailureReason tf_verdict_failure_reason(const struct TfVerdict *v);

/**
 * Full verdict as JSON. Free with `tf_string_free`.
 *
 * # Safety
 * `v` must come from this library; `out` must be writable.
 */
enum TfStatus tf_verdict_to_json(const struct TfVerdict *v, char **out);

/**
 * # Safety
 * `v` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void tf_verdict_free(struct TfVerdict *v);

/**
 * Scores a Python program with the built-in pattern table. Either output
 * pointer may be null.
 *
 * # Safety
 * `source` must be a valid C string.
 */
enum TfStatus tf_complexity(const char *source, uint32_t *score, enum TfClassification *class_);

/**
 * Full complexity report for a Python program as JSON. Free with
 * `tf_string_free`.
 *
 * # Safety
 * `source` must be a valid C string; `out` must be writable.
 */
enum TfStatus tf_complexity_json(const char *source, char **out);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void tf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAMPFORGE_H */
