#ifndef SUGMINE_H
#define SUGMINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible function.
 */
typedef enum SugmineStatus {
  SUGMINE_STATUS_OK = 0,
  SUGMINE_STATUS_NULL_POINTER = 1,
  SUGMINE_STATUS_INVALID_UTF8 = 2,
  SUGMINE_STATUS_IO = 3,
  SUGMINE_STATUS_CONFIG = 4,
  SUGMINE_STATUS_MODEL = 5,
  SUGMINE_STATUS_FINGERPRINT = 6,
  SUGMINE_STATUS_PANIC = 7,
} SugmineStatus;

/*
 Opaque handle to a loaded model.
 */
typedef struct SugmineModel SugmineModel;

/*
 Opaque normalizer handle.
 */
typedef struct SugmineNormalizer SugmineNormalizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next sugmine call on the same thread.
 */
const char *sugmine_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sugmine_version(void);

/*
 Normalizer with the shipped default tables and all rules enabled.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
int sugmine_normalizer_new_default(struct SugmineNormalizer **out);

/*
 Normalizer built from a TOML run configuration file.

 # Safety
 `config_path` must be NULL or a NUL-terminated string; `out` must be
 writable.
 */
int sugmine_normalizer_from_config(const char *config_path, struct SugmineNormalizer **out);

/*
 # Safety
 `handle` must be NULL or come from a `sugmine_normalizer_*` constructor
 and not have been freed.
 */
void sugmine_normalizer_free(struct SugmineNormalizer *handle);

/*
 Normalizes `text`; the result is written to `*out` and must be released
 with `sugmine_string_free`.

 # Safety
 `handle` must be a live normalizer, `text` a NUL-terminated string and
 `out` writable.
 */
int sugmine_preprocess(const struct SugmineNormalizer *handle, const char *text, char **out);

/*
 Hex fingerprint of the normalizer configuration.

 # Safety
 As for [`sugmine_preprocess`].
 */
int sugmine_normalizer_fingerprint(const struct SugmineNormalizer *handle, char **out);

/*
 Loads a model file and its companion feature file.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
int sugmine_model_load(const char *path, struct SugmineModel **out);

/*
 # Safety
 `handle` must be NULL or come from `sugmine_model_load` and not have been
 freed.
 */
void sugmine_model_free(struct SugmineModel *handle);

/*
 Model kind name: "nb", "logreg", "svm" or "lstm".

 # Safety
 `handle` must be a live model and `out` writable.
 */
int sugmine_model_kind(const struct SugmineModel *handle, char **out);

/*
 Classifies raw `text`. Writes 1 (suggestion) or 0 to `*label` and the
 decision value to `*score` when `score` is not NULL. The normalizer must
 be the one the model was trained with, else `SUGMINE_STATUS_FINGERPRINT`.

 # Safety
 `model` and `normalizer` must be live handles, `text` a NUL-terminated
 string, `label` writable and `score` NULL or writable.
 */
int sugmine_model_predict(const struct SugmineModel *model,
                          const struct SugmineNormalizer *normalizer,
                          const char *text,
                          int *label,
                          double *score);

/*
 # Safety
 `s` must be NULL or a string returned by this library, not yet freed.
 */
void sugmine_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUGMINE_H */
