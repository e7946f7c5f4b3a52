#ifndef IHJ_H
#define IHJ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IhjStatus {
  IHJ_STATUS_OK = 0,
  IHJ_STATUS_NULL_POINTER = 1,
  IHJ_STATUS_INVALID_UTF8 = 2,
  IHJ_STATUS_PARSE_ERROR = 3,
  IHJ_STATUS_EVAL_ERROR = 4,
  IHJ_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The system file is malformed or lacks a section the command needs.
   */
  IHJ_STATUS_INPUT_ERROR = 6,
  IHJ_STATUS_PANIC = 99,
} IhjStatus;

typedef enum IhjCommand {
  IHJ_COMMAND_CHECK = 0,
  IHJ_COMMAND_INTEGRABILITY = 1,
  IHJ_COMMAND_HJ_VERIFY = 2,
  IHJ_COMMAND_HJ_SEARCH = 3,
  IHJ_COMMAND_GOTAY_NESTER = 4,
  IHJ_COMMAND_COMPLETE = 5,
} IhjCommand;

/**
 * A parsed expression.
 */
typedef struct IhjExpr IhjExpr;

/**
 * A validated system file.
 */
typedef struct IhjSystem IhjSystem;

/**
 * Optional overrides for [`ihj_system_run`].
 */
typedef struct IhjRunOptions {
  bool use_seed;
  uint64_t seed;
  /**
   * Residual tolerance; values `<= 0` keep the file's setting.
   */
  double tol;
  /**
   * Polynomial degree for `IhjCommand::HjSearch`.
   */
  uint32_t search_degree;
} IhjRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ihj_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ihj_version(void);

/**
 * Free a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ihj_string_free(char *s);

/**
 * Parse an expression.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum IhjStatus ihj_expr_parse(const char *text, struct IhjExpr **out);

/**
 * # Safety
 * `expr` must be null or a handle from [`ihj_expr_parse`].
 */
void ihj_expr_free(struct IhjExpr *expr);

/**
 * Canonical text of an expression. Free with [`ihj_string_free`].
 *
 * # Safety
 * `expr` must be a live handle; `out` must be writable.
 */
enum IhjStatus ihj_expr_to_string(const struct IhjExpr *expr, char **out);

/**
 * Number of free variables.
 *
 * # Safety
 * `expr` must be a live handle; `out` must be writable.
 */
enum IhjStatus ihj_expr_var_count(const struct IhjExpr *expr, size_t *out);

/**
 * Name of the `index`-th free variable. Free with [`ihj_string_free`].
 *
 * # Safety
 * `expr` must be a live handle; `out` must be writable.
 */
enum IhjStatus ihj_expr_var_name(const struct IhjExpr *expr, size_t index, char **out);

/**
 * Evaluate at the point `names[i] = values[i]`.
 *
 * # Safety
 * `names` and `values` must hold `len` entries; `out` must be writable.
 */
enum IhjStatus ihj_expr_eval(const struct IhjExpr *expr,
                             const char *const *names,
                             const double *values,
                             size_t len,
                             double *out);

/**
 * Value, gradient and Hessian with respect to all `len` given variables,
 * in the order given. `grad` holds `len` entries and `hess` holds
 * `len * len` entries in row-major order.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum IhjStatus ihj_expr_jet2(const struct IhjExpr *expr,
                             const char *const *names,
                             const double *values,
                             size_t len,
                             double *value,
                             double *grad,
                             double *hess);

/**
 * Poisson bracket `{f, g}` on TT*Q of dimension `4n`, at `x` given in
 * `(q, p, qd, pd)` order.
 *
 * # Safety
 * `x` must hold `4 * n` entries; `out` must be writable.
 */
enum IhjStatus ihj_bracket(size_t n,
                           const struct IhjExpr *f,
                           const struct IhjExpr *g,
                           const double *x,
                           double *out);

/**
 * Parse and validate a system file given as text.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum IhjStatus ihj_system_load(const char *text, struct IhjSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from [`ihj_system_load`].
 */
void ihj_system_free(struct IhjSystem *sys);

/**
 * Run a command on a loaded system. On success `report` receives the
 * machine-readable report (free with [`ihj_string_free`]) and
 * `exit_code` the command-line exit code: 0 when every check passed,
 * 1 otherwise. `options` may be null.
 *
 * # Safety
 * `sys` must be a live handle; `report` and `exit_code` must be writable.
 */
enum IhjStatus ihj_system_run(const struct IhjSystem *sys,
                              enum IhjCommand command,
                              const struct IhjRunOptions *options,
                              char **report,
                              int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IHJ_H */
