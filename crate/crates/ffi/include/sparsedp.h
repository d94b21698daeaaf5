/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SPARSEDP_H
#define SPARSEDP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SDP_OK 0

#define SDP_ERR_NULL 1

#define SDP_ERR_DOMAIN 2

#define SDP_ERR_NUMERICAL 3

#define SDP_ERR_INFEASIBLE 4

#define SDP_ERR_IO 5

#define SDP_ERR_BUFFER 6

#define SDP_ERR_PANIC 7

#define SDP_MECHANISM_GAUSSIAN 0

#define SDP_MECHANISM_CSGM 1

#define SDP_MECHANISM_SGMF 2

#define SDP_METHOD_TRIVIAL_B 0

#define SDP_METHOD_TRIVIAL_C 1

#define SDP_METHOD_SQRT 2

#define SDP_METHOD_OPTIMAL 3

// Opaque factorization handle.
typedef struct SdpFactorization SdpFactorization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *sdp_last_error(void);

// Gaussian RDP `α·Δ2²/(2σ²)`.
//
// # Safety
// `out` must be valid for writes.
int32_t sdp_gaussian_rdp(uint32_t alpha, double delta2, double sigma, double *out);

// L2 sparsified-Gaussian RDP bound at order `alpha`.
//
// # Safety
// `out` must be valid for writes.
int32_t sdp_csgm_rdp(uint32_t alpha,
                     double delta2,
                     double delta_inf,
                     size_t dim,
                     double gamma,
                     double sigma,
                     double *out);

// Streaming bound at factor sensitivity `sens_c`.
//
// # Safety
// `out` must be valid for writes.
int32_t sdp_sgmf_rdp(uint32_t alpha,
                     double delta2,
                     double delta_inf,
                     size_t dim,
                     double sens_c,
                     double gamma,
                     double sigma,
                     double *out);

// Converts an RDP profile of `len` orders to `(ε, δ)`.
//
// # Safety
// `orders` and `epsilons` must point to `len` readable values; the out
// pointers must be valid for writes.
int32_t sdp_rdp_to_dp(const uint32_t *orders,
                      const double *epsilons,
                      size_t len,
                      double delta,
                      double *epsilon_out,
                      uint32_t *alpha_out);

// Smallest σ meeting `(epsilon, delta)` over orders 2..=256.
//
// # Safety
// `out` must be valid for writes.
int32_t sdp_calibrate_sigma(int32_t mechanism_id,
                            double epsilon,
                            double delta,
                            double delta2,
                            double delta_inf,
                            size_t dim,
                            double gamma,
                            double sens_c,
                            double *out);

// Randomized Hadamard rotation in place; `len` must be a power of two.
//
// # Safety
// `data` must point to `len` writable values.
int32_t sdp_hadamard_rotate(double *data, size_t len, uint64_t seed, bool inverse);

// Factorizes the prefix-sum workload of size `rounds`.
//
// # Safety
// `out` must be valid for writes; the handle must be released with
// `sdp_factorization_free`.
int32_t sdp_factorization_build(int32_t method_id,
                                size_t rounds,
                                bool normalize,
                                struct SdpFactorization **out);

// Loads a factorization JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
int32_t sdp_factorization_load(const char *path, struct SdpFactorization **out);

// # Safety
// `handle` must come from this library; `path` must be NUL-terminated.
int32_t sdp_factorization_save(const struct SdpFactorization *handle, const char *path);

// Number of rounds `T`, or 0 for a null handle.
//
// # Safety
// `handle` must be null or come from this library.
size_t sdp_factorization_rounds(const struct SdpFactorization *handle);

// Writes `Δ(C)`, `‖B‖_F²` and the converged flag.
//
// # Safety
// `handle` must come from this library; out pointers must be valid.
int32_t sdp_factorization_info(const struct SdpFactorization *handle,
                               double *sens_c,
                               double *objective,
                               bool *converged);

// Copies `B` row-major into `buf` (`T²` values).
//
// # Safety
// `handle` must come from this library; `buf` must hold `len` values.
int32_t sdp_factorization_copy_b(const struct SdpFactorization *handle, double *buf, size_t len);

// Copies `C` row-major into `buf` (`T²` values).
//
// # Safety
// `handle` must come from this library; `buf` must hold `len` values.
int32_t sdp_factorization_copy_c(const struct SdpFactorization *handle, double *buf, size_t len);

// Releases a handle. Null is ignored.
//
// # Safety
// `handle` must be null or come from this library and not be used again.
void sdp_factorization_free(struct SdpFactorization *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSEDP_H */
