#ifndef PIDE_H
#define PIDE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum PideStatus {
  PIDE_STATUS_OK = 0,
  PIDE_STATUS_NULL_ARGUMENT = 1,
  PIDE_STATUS_INVALID_UTF8 = 2,
  PIDE_STATUS_CONFIG = 3,
  PIDE_STATUS_BAD_EDIT = 4,
  PIDE_STATUS_TRANSPORT = 5,
  PIDE_STATUS_TIMEOUT = 6,
  PIDE_STATUS_SCRIPT = 7,
  PIDE_STATUS_ASSERTION = 8,
  PIDE_STATUS_IO = 9,
  PIDE_STATUS_PANIC = 10,
} PideStatus;

// Opaque handle for a session with its own back-end.
typedef struct PideSession PideSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *pide_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void pide_string_free(char *s);

// Starts a session with an in-process back-end. `config_toml` may be null
// for defaults.
//
// # Safety
// Pointers must be valid; `out` receives a handle to free with
// [`pide_session_free`].
enum PideStatus pide_session_new(const char *config_toml, struct PideSession **out);

// Closes the session and stops its back-end. Null is ignored.
//
// # Safety
// `s` must come from [`pide_session_new`] and not have been freed.
void pide_session_free(struct PideSession *s);

// Inserts `text` into `node` at byte `offset`, creating the node if needed.
//
// # Safety
// Pointers must be valid NUL-terminated strings and a live session.
enum PideStatus pide_session_insert(struct PideSession *s,
                                    const char *node_name,
                                    size_t offset,
                                    const char *text);

// Removes `len` bytes of `node` starting at `offset`.
//
// # Safety
// Pointers must be valid.
enum PideStatus pide_session_remove(struct PideSession *s,
                                    const char *node_name,
                                    size_t offset,
                                    size_t len);

// Sets the visible ranges of `node`. `bounds` holds `count` start/end
// pairs; `full` marks the whole node as required.
//
// # Safety
// `bounds` must point to `2 * count` values unless `count` is 0.
enum PideStatus pide_session_set_perspective(struct PideSession *s,
                                             const char *node_name,
                                             const size_t *bounds,
                                             size_t count,
                                             bool full);

// Blocks until every assigned task of visible nodes has finished.
//
// # Safety
// `s` must be a live session.
enum PideStatus pide_session_wait(struct PideSession *s);

// Markup dump of `node`, or of all nodes when `node` is null.
//
// # Safety
// `out` receives a string to release with [`pide_string_free`].
enum PideStatus pide_session_dump(struct PideSession *s,
                                  const char *node_name,
                                  bool eval_only,
                                  char **out);

// Current text of `node`.
//
// # Safety
// `out` receives a string to release with [`pide_string_free`].
enum PideStatus pide_session_text(struct PideSession *s, const char *node_name, char **out);

// Runs a session script in process and returns what it printed. A failed
// assertion returns [`PideStatus::Assertion`] and still fills `out`.
//
// # Safety
// `config_toml` may be null; `out` receives a string to release with
// [`pide_string_free`].
enum PideStatus pide_run_script(const char *script, const char *config_toml, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIDE_H */
