#ifndef SIMPLENORMAL_H
#define SIMPLENORMAL_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes shared by every entry point.
typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_INVALID_ARGUMENT = 1,
  SN_STATUS_PROFILE = 2,
  SN_STATUS_TOO_LARGE = 3,
  SN_STATUS_BUDGET_EXHAUSTED = 4,
  SN_STATUS_PARSE = 5,
  SN_STATUS_IO = 6,
  SN_STATUS_INTERNAL = 7,
  SN_STATUS_NULL_POINTER = 8,
  SN_STATUS_UTF8 = 9,
  SN_STATUS_PANIC = 10,
} SnStatus;

// A digit alphabet built by [`sn_alphabet_new`].
typedef struct SnAlphabet SnAlphabet;

// A finished construction: the stage log and the final point.
typedef struct SnConstruction SnConstruction;

// A validated normality profile.
typedef struct SnProfile SnProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// owned by the library and stays valid until the next call.
const char *sn_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void sn_string_free(char *s);

// Euler's totient of `n`.
//
// # Safety
// `out` must be valid for writes.
enum SnStatus sn_euler_phi(uint64_t n, uint64_t *out);

// Signed subset-sum count behind the Haiman identity, as a decimal string.
//
// # Safety
// `out` must be valid for writes; free the result with [`sn_string_free`].
enum SnStatus sn_haiman_difference(uint64_t n, uint64_t k, char **out);

// Number of ways to write `sigma` as `v` summands drawn from `{1..n-1}`,
// each value available `k` times, as a decimal string.
//
// # Safety
// `out` must be valid for writes; free the result with [`sn_string_free`].
enum SnStatus sn_partition_count(uint64_t n, uint64_t sigma, uint64_t v, uint64_t k, char **out);

// Least `n` with `r^n >= e^b`.
//
// # Safety
// `out` must be valid for writes.
enum SnStatus sn_nat_pos(uint64_t b, uint64_t r, uint64_t *out);

// Parses and validates a profile given as JSON text.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be valid for writes.
enum SnStatus sn_profile_parse(const char *json, struct SnProfile **out);

// Replaces the seed of a profile.
//
// # Safety
// `profile` must be a live handle from [`sn_profile_parse`].
enum SnStatus sn_profile_set_seed(struct SnProfile *profile, uint64_t seed);

// # Safety
// `profile` must be null or a live handle from [`sn_profile_parse`].
void sn_profile_free(struct SnProfile *profile);

// Builds the alphabet for base `s`, exponents `ms[0..ms_len]`, excluded
// exponent `n` and multiplicity `c`.
//
// # Safety
// `ms` must point to `ms_len` values (or be null with `ms_len == 0`);
// `out` must be valid for writes.
enum SnStatus sn_alphabet_new(uint32_t s,
                              const uint64_t *ms,
                              uintptr_t ms_len,
                              uint64_t n,
                              uint64_t c,
                              struct SnAlphabet **out);

// The alphabet as a JSON document.
//
// # Safety
// `alphabet` must be a live handle; free the result with [`sn_string_free`].
enum SnStatus sn_alphabet_json(const struct SnAlphabet *alphabet, char **out);

// Length of each alphabet symbol in base-`s` digits, as a decimal string.
//
// # Safety
// `alphabet` must be a live handle; free the result with [`sn_string_free`].
enum SnStatus sn_alphabet_ell_u(const struct SnAlphabet *alphabet, char **out);

// # Safety
// `alphabet` must be null or a live handle from [`sn_alphabet_new`].
void sn_alphabet_free(struct SnAlphabet *alphabet);

// Runs the construction for `profile` to its stopping position.
//
// # Safety
// `profile` must be a live handle; `out` must be valid for writes.
enum SnStatus sn_construct(const struct SnProfile *profile, struct SnConstruction **out);

// Number of stages in a construction.
//
// # Safety
// `run` must be a live handle; `out` must be valid for writes.
enum SnStatus sn_construction_stage_count(const struct SnConstruction *run, uintptr_t *out);

// The stage log, one JSON record per line.
//
// # Safety
// `run` must be a live handle; free the result with [`sn_string_free`].
enum SnStatus sn_construction_stages_jsonl(const struct SnConstruction *run, char **out);

// The final point and position as JSON.
//
// # Safety
// `run` must be a live handle; free the result with [`sn_string_free`].
enum SnStatus sn_construction_final_json(const struct SnConstruction *run, char **out);

// # Safety
// `run` must be null or a live handle from [`sn_construct`].
void sn_construction_free(struct SnConstruction *run);

// Replays a stage log against `profile`. `*ok` reports the verdict; when
// it is false, `*failed_stage` holds the first rejected stage (or the
// stage count when the log stops short) and the reason is available from
// [`sn_last_error`]. `failed_stage` may be null.
//
// # Safety
// `stages_jsonl` must be a nul-terminated string, `profile` a live handle
// and `ok` valid for writes.
enum SnStatus sn_verify(const char *stages_jsonl,
                        const struct SnProfile *profile,
                        bool *ok,
                        uint64_t *failed_stage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMPLENORMAL_H */
