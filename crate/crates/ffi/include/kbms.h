#ifndef KBMS_H
#define KBMS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call. Values match the command-line exit codes where
 * both have the same meaning.
 */
typedef enum KbmsStatus {
  KBMS_STATUS_OK = 0,
  KBMS_STATUS_INVALID_ARGUMENT = 2,
  KBMS_STATUS_PROTOCOL_VIOLATION = 3,
  KBMS_STATUS_SYNTAX = 4,
  KBMS_STATUS_TRANSPORT = 5,
  KBMS_STATUS_NOT_FOUND = 6,
  KBMS_STATUS_JOURNAL_CORRUPT = 7,
  KBMS_STATUS_NULL_POINTER = 8,
  KBMS_STATUS_INVALID_UTF8 = 9,
  KBMS_STATUS_PANIC = 10,
} KbmsStatus;

/**
 * Opaque KB handle.
 */
typedef struct KbmsHandle KbmsHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens a KB. `journal_path` may be null for an in-memory KB; otherwise
 * the journal is replayed and later edits are appended to it.
 */
enum KbmsStatus kbms_open(const char *journal_path, struct KbmsHandle **out);

/**
 * Releases a handle. Null is ignored.
 */
void kbms_close(struct KbmsHandle *h);

/**
 * Frees a string returned by this library. Null is ignored.
 */
void kbms_string_free(char *s);

/**
 * Description of the last failed call on `h` (JSON for service errors),
 * or null. Valid until the next call on `h`.
 */
const char *kbms_last_error(const struct KbmsHandle *h);

/**
 * Sends one JSON request and stores the JSON response in `out`.
 */
enum KbmsStatus kbms_call(struct KbmsHandle *h, const char *request_json, char **out);

/**
 * Adds an FL statement by `author`; its id (32 hex digits) goes to `out_id`.
 */
enum KbmsStatus kbms_submit(struct KbmsHandle *h,
                            const char *author,
                            const char *fl,
                            char **out_id);

/**
 * Removes a statement owned by `author`. Sets `cloned` to 1 when others
 * relied on it and ownership passed to them instead.
 */
enum KbmsStatus kbms_remove(struct KbmsHandle *h,
                            const char *author,
                            const char *id,
                            int32_t *cloned);

/**
 * Records a rating in [-1, 1].
 */
enum KbmsStatus kbms_rate(struct KbmsHandle *h,
                          const char *rater,
                          const char *id,
                          const char *criterion,
                          double value);

/**
 * Current usefulness of a statement.
 */
enum KbmsStatus kbms_score(struct KbmsHandle *h, const char *id, double *out);

/**
 * Canonical form of an FL statement. Needs no handle.
 */
enum KbmsStatus kbms_parse(const char *fl, char **out);

/**
 * Logic translation of an FL statement. Needs no handle.
 */
enum KbmsStatus kbms_export_logic(const char *fl, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KBMS_H */
