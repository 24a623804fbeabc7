#ifndef ZNLGT_H
#define ZNLGT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZnStatus {
  ZN_STATUS_OK = 0,
  ZN_STATUS_NULL_POINTER = 1,
  ZN_STATUS_INVALID_ARGUMENT = 2,
  ZN_STATUS_OUT_OF_RANGE = 3,
  ZN_STATUS_DIMENSION_MISMATCH = 4,
  ZN_STATUS_CAPACITY = 5,
  ZN_STATUS_BUFFER_TOO_SMALL = 6,
  ZN_STATUS_EMPTY_SECTOR = 7,
  ZN_STATUS_PANIC = 8,
  ZN_STATUS_INTERNAL = 9,
} ZnStatus;

typedef enum ZnCounterterm {
  ZN_COUNTERTERM_OFF = 0,
  ZN_COUNTERTERM_AUTO = 1,
  ZN_COUNTERTERM_MANUAL = 2,
} ZnCounterterm;

/*
 Chain geometry.
 */
typedef struct ZnLattice ZnLattice;

/*
 Sparse Hermitian operator.
 */
typedef struct ZnOperator ZnOperator;

typedef struct ZnModelParams {
  double t;
  double m;
  double g2;
  bool chiral;
} ZnModelParams;

typedef struct ZnPenaltyParams {
  double t_tilde;
  double w_tilde;
  double u;
  enum ZnCounterterm counterterm;
  /*
   Used only with `ZnCounterterm::Manual`.
   */
  double manual_coefficient;
} ZnPenaltyParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL after a
 successful call. Valid until the next call on the same thread.
 */
const char *zn_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *zn_version(void);

/*
 Creates a chain. With `periodic` set the backgrounds are ignored.

 # Safety
 `out_lattice` must be a valid pointer to writable storage.
 */
enum ZnStatus zn_lattice_new(size_t sites,
                             size_t n,
                             bool periodic,
                             size_t left_background,
                             size_t right_background,
                             struct ZnLattice **out_lattice);

/*
 # Safety
 `lattice` must come from [`zn_lattice_new`] and not be freed twice.
 */
void zn_lattice_free(struct ZnLattice *lattice);

/*
 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_lattice_dims(const struct ZnLattice *lattice,
                              size_t *out_full_dim,
                              size_t *out_num_links);

/*
 Reference-basis indices of the physical sector, ascending. Call with
 `cap = 0` to query the length.

 # Safety
 `indices` must hold `cap` writable entries (may be NULL when `cap = 0`).
 */
enum ZnStatus zn_lattice_physical_sector(const struct ZnLattice *lattice,
                                         uint64_t *indices,
                                         size_t cap,
                                         size_t *out_len);

/*
 Gauge Hamiltonian on the full space.

 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_build_gauge_hamiltonian(const struct ZnLattice *lattice,
                                         const struct ZnModelParams *params,
                                         struct ZnOperator **out_op);

/*
 Uncorrelated implementation Hamiltonian on the full space.

 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_build_uncoupled_hamiltonian(const struct ZnLattice *lattice,
                                             const struct ZnModelParams *params,
                                             const struct ZnPenaltyParams *pen,
                                             struct ZnOperator **out_op);

/*
 Penalty operator, diagonal in the reference basis.

 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_build_gamma(const struct ZnLattice *lattice, struct ZnOperator **out_op);

/*
 Restriction of a full-space operator to the physical sector.

 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_operator_restrict_physical(const struct ZnLattice *lattice,
                                            const struct ZnOperator *op,
                                            struct ZnOperator **out_op);

/*
 # Safety
 `op` must come from this library and not be freed twice.
 */
void zn_operator_free(struct ZnOperator *op);

/*
 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_operator_dims(const struct ZnOperator *op, size_t *out_dim, size_t *out_nnz);

/*
 Stored entries in row-major order as `(row, col, re, im)` arrays of
 length `nnz`. Any of the four buffers may be NULL when `cap = 0`.

 # Safety
 Each non-NULL buffer must hold `cap` writable entries.
 */
enum ZnStatus zn_operator_triplets(const struct ZnOperator *op,
                                   uint64_t *rows,
                                   uint64_t *cols,
                                   double *re,
                                   double *im,
                                   size_t cap,
                                   size_t *out_len);

/*
 Ascending eigenvalues of a Hermitian operator of dimension at most
 `dense_cap` (0 selects the default cap).

 # Safety
 `eigenvalues` must hold `cap` writable entries.
 */
enum ZnStatus zn_operator_eigenvalues(const struct ZnOperator *op,
                                      size_t dense_cap,
                                      double *eigenvalues,
                                      size_t cap,
                                      size_t *out_len);

/*
 Discrepancy, after removing a constant offset, between the projected
 second-order effective Hamiltonian and its closed form.

 # Safety
 Pointers must be valid.
 */
enum ZnStatus zn_effective_residual(const struct ZnLattice *lattice,
                                    const struct ZnModelParams *params,
                                    const struct ZnPenaltyParams *pen,
                                    double *out_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZNLGT_H */
