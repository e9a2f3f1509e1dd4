#ifndef TABFORGE_H
#define TABFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TABFORGE_STATUS_OK = 0,
  TABFORGE_STATUS_NULL_ARGUMENT = 1,
  TABFORGE_STATUS_INVALID_UTF8 = 2,
  TABFORGE_STATUS_INVALID_JSON = 3,
  /**
   * A domain error; see `tabforge_last_error_code`.
   */
  TABFORGE_STATUS_FAILED = 4,
  TABFORGE_STATUS_PANICKED = 5,
} TabforgeStatus;

/**
 * Opaque: an in-memory chain, document store and signing identity.
 */
typedef struct TabforgeSession TabforgeSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a session signing as `actor` with a 32-byte Ed25519 seed.
 * Returns null if either pointer is null or `actor` is not UTF-8.
 *
 * # Safety
 * `actor` is a NUL-terminated string; `seed` points at 32 readable bytes.
 */
TabforgeSession *tabforge_session_new(const char *actor, const uint8_t *seed);

/**
 * # Safety
 * `session` is null or came from `tabforge_session_new` and is not used afterwards.
 */
void tabforge_session_free(TabforgeSession *session);

/**
 * Compile BPMN XML plus DMN XML documents into canonical package JSON.
 *
 * # Safety
 * String arguments are NUL-terminated; `dmn_xml` holds `dmn_count` of them.
 */
TabforgeStatus tabforge_compile(const char *bpmn_xml,
                                const char *const *dmn_xml,
                                size_t dmn_count,
                                char **package_out);

/**
 * # Safety
 * `session` is live; strings are NUL-terminated.
 */
TabforgeStatus tabforge_deploy(const TabforgeSession *session,
                               const char *package_json,
                               char **contract_out);

/**
 * # Safety
 * `session` is live; strings are NUL-terminated.
 */
TabforgeStatus tabforge_start(const TabforgeSession *session,
                              const char *contract,
                              char **instance_out);

/**
 * Complete `task`. `params_json` is null or a JSON object of scalars;
 * `doc_cids` lists `doc_count` cids previously stored with `tabforge_cas_put`.
 * Writes the transaction digest.
 *
 * # Safety
 * `session` is live; strings are NUL-terminated; `doc_cids` holds `doc_count` strings.
 */
TabforgeStatus tabforge_complete(const TabforgeSession *session,
                                 const char *instance,
                                 const char *task,
                                 const char *params_json,
                                 const char *const *doc_cids,
                                 size_t doc_count,
                                 char **tx_digest_out);

/**
 * Enabled task ids as a JSON array.
 *
 * # Safety
 * `session` is live; strings are NUL-terminated.
 */
TabforgeStatus tabforge_enabled_tasks(const TabforgeSession *session,
                                      const char *instance,
                                      char **tasks_json_out);

/**
 * # Safety
 * `session` is live; strings are NUL-terminated.
 */
TabforgeStatus tabforge_instance_json(const TabforgeSession *session,
                                      const char *instance,
                                      char **instance_json_out);

/**
 * Store `len` bytes; writes their cid.
 *
 * # Safety
 * `session` is live; `bytes` points at `len` readable bytes (or is null with `len` 0).
 */
TabforgeStatus tabforge_cas_put(const TabforgeSession *session,
                                const uint8_t *bytes,
                                size_t len,
                                char **cid_out);

/**
 * # Safety
 * `session` is live.
 */
TabforgeStatus tabforge_state_hash(const TabforgeSession *session, char **hash_out);

/**
 * Error code of the last failed call on this thread, or null. Valid until
 * the next call on this thread.
 */
const char *tabforge_last_error_code(void);

/**
 * Message of the last failed call on this thread, or null.
 */
const char *tabforge_last_error_message(void);

/**
 * # Safety
 * `s` is null or a string returned through a `*_out` pointer, freed once.
 */
void tabforge_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TABFORGE_H */
