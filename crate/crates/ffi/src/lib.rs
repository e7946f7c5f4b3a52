//! C ABI for ihj-core.
//!
//! Every function returns an [`IhjStatus`]. On failure a message is kept
//! per thread and can be read with [`ihj_last_error_message`]. Handles are
//! opaque and owned by the caller until passed to the matching `_free`.
//! Strings returned through out-parameters are freed with
//! [`ihj_string_free`].

use ihj_core::cli::{run_text, Overrides, Task};
use ihj_core::expr::{eval_jet2, parse, Expression, Point};
use ihj_core::geometry::{poisson_bracket, PhaseSpace};
use ihj_core::sysfile::parse_system;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IhjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    EvalError = 4,
    InvalidArgument = 5,
    /// The system file is malformed or lacks a section the command needs.
    InputError = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IhjCommand {
    Check = 0,
    Integrability = 1,
    HjVerify = 2,
    HjSearch = 3,
    GotayNester = 4,
    Complete = 5,
}

/// Optional overrides for [`ihj_system_run`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct IhjRunOptions {
    pub use_seed: bool,
    pub seed: u64,
    /// Residual tolerance; values `<= 0` keep the file's setting.
    pub tol: f64,
    /// Polynomial degree for `IhjCommand::HjSearch`.
    pub search_degree: u32,
}

/// A parsed expression.
pub struct IhjExpr(Expression);

/// A validated system file.
pub struct IhjSystem {
    text: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (IhjStatus, String);

fn guard<F>(f: F) -> IhjStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IhjStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IhjStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (IhjStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IhjStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn c_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

unsafe fn named_point(names: *const *const c_char, values: *const f64, len: usize) -> Result<(Vec<String>, Point), Failure> {
    if len == 0 {
        return Ok((Vec::new(), Point::new()));
    }
    if names.is_null() {
        return Err(null("names"));
    }
    if values.is_null() {
        return Err(null("values"));
    }
    let names = std::slice::from_raw_parts(names, len);
    let values = std::slice::from_raw_parts(values, len);
    let mut order = Vec::with_capacity(len);
    let mut point = Point::new();
    for (i, (&n, &v)) in names.iter().zip(values).enumerate() {
        let n = str_arg(n, &format!("names[{i}]"))?.to_string();
        point.insert(n.clone(), v);
        order.push(n);
    }
    Ok((order, point))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ihj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ihj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Free a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ihj_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse an expression.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_parse(text: *const c_char, out: *mut *mut IhjExpr) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let e = parse(text).map_err(|e| (IhjStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(IhjExpr(e)));
        Ok(())
    })
}

/// # Safety
/// `expr` must be null or a handle from [`ihj_expr_parse`].
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_free(expr: *mut IhjExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Canonical text of an expression. Free with [`ihj_string_free`].
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_to_string(expr: *const IhjExpr, out: *mut *mut c_char) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = expr.as_ref().ok_or_else(|| null("expr"))?;
        *out = c_string(&e.0.to_string());
        Ok(())
    })
}

/// Number of free variables.
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_var_count(expr: *const IhjExpr, out: *mut usize) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = expr.as_ref().ok_or_else(|| null("expr"))?;
        *out = e.0.free_vars().len();
        Ok(())
    })
}

/// Name of the `index`-th free variable. Free with [`ihj_string_free`].
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_var_name(expr: *const IhjExpr, index: usize, out: *mut *mut c_char) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = expr.as_ref().ok_or_else(|| null("expr"))?;
        let name = e.0.free_vars().get(index).ok_or_else(|| {
            (IhjStatus::InvalidArgument, format!("index {index} out of range"))
        })?;
        *out = c_string(name);
        Ok(())
    })
}

/// Evaluate at the point `names[i] = values[i]`.
///
/// # Safety
/// `names` and `values` must hold `len` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_eval(
    expr: *const IhjExpr,
    names: *const *const c_char,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = expr.as_ref().ok_or_else(|| null("expr"))?;
        let (_, point) = named_point(names, values, len)?;
        *out = ihj_core::expr::eval(&e.0, &point).map_err(|e| (IhjStatus::EvalError, e.to_string()))?;
        Ok(())
    })
}

/// Value, gradient and Hessian with respect to all `len` given variables,
/// in the order given. `grad` holds `len` entries and `hess` holds
/// `len * len` entries in row-major order.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ihj_expr_jet2(
    expr: *const IhjExpr,
    names: *const *const c_char,
    values: *const f64,
    len: usize,
    value: *mut f64,
    grad: *mut f64,
    hess: *mut f64,
) -> IhjStatus {
    guard(|| {
        let value = out_arg(value, "value")?;
        if len > 0 && (grad.is_null() || hess.is_null()) {
            return Err(null("grad or hess"));
        }
        let e = expr.as_ref().ok_or_else(|| null("expr"))?;
        let (order, point) = named_point(names, values, len)?;
        let jet = eval_jet2(&e.0, &point, &order).map_err(|e| (IhjStatus::EvalError, e.to_string()))?;
        *value = jet.value;
        if len > 0 {
            std::slice::from_raw_parts_mut(grad, len).copy_from_slice(jet.grad());
            let h = std::slice::from_raw_parts_mut(hess, len * len);
            for i in 0..len {
                for j in 0..len {
                    h[i * len + j] = jet.hess(i, j);
                }
            }
        }
        Ok(())
    })
}

/// Poisson bracket `{f, g}` on TT*Q of dimension `4n`, at `x` given in
/// `(q, p, qd, pd)` order.
///
/// # Safety
/// `x` must hold `4 * n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_bracket(
    n: usize,
    f: *const IhjExpr,
    g: *const IhjExpr,
    x: *const f64,
    out: *mut f64,
) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        let g = g.as_ref().ok_or_else(|| null("g"))?;
        if n == 0 {
            return Err((IhjStatus::InvalidArgument, "n must be positive".into()));
        }
        if x.is_null() {
            return Err(null("x"));
        }
        let space = PhaseSpace::new(n);
        let xs = std::slice::from_raw_parts(x, 4 * n);
        let point: Point = space.tulczyjew().into_iter().zip(xs.iter().copied()).collect();
        *out = poisson_bracket(&space, &f.0, &g.0, &point).map_err(|e| (IhjStatus::EvalError, e.to_string()))?;
        Ok(())
    })
}

/// Parse and validate a system file given as text.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_system_load(text: *const c_char, out: *mut *mut IhjSystem) -> IhjStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        parse_system(text).map_err(|e| (IhjStatus::InputError, e.to_string()))?;
        *out = Box::into_raw(Box::new(IhjSystem { text: text.to_string() }));
        Ok(())
    })
}

/// # Safety
/// `sys` must be null or a handle from [`ihj_system_load`].
#[no_mangle]
pub unsafe extern "C" fn ihj_system_free(sys: *mut IhjSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Run a command on a loaded system. On success `report` receives the
/// machine-readable report (free with [`ihj_string_free`]) and
/// `exit_code` the command-line exit code: 0 when every check passed,
/// 1 otherwise. `options` may be null.
///
/// # Safety
/// `sys` must be a live handle; `report` and `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihj_system_run(
    sys: *const IhjSystem,
    command: IhjCommand,
    options: *const IhjRunOptions,
    report: *mut *mut c_char,
    exit_code: *mut i32,
) -> IhjStatus {
    guard(|| {
        let report = out_arg(report, "report")?;
        *report = ptr::null_mut();
        let exit_code = out_arg(exit_code, "exit_code")?;
        let sys = sys.as_ref().ok_or_else(|| null("sys"))?;
        let opts = options.as_ref();
        let task = match command {
            IhjCommand::Check => Task::Check,
            IhjCommand::Integrability => Task::Integrability,
            IhjCommand::HjVerify => Task::Hj {
                search_degree: None,
                verify: true,
            },
            IhjCommand::HjSearch => Task::Hj {
                search_degree: Some(opts.map_or(0, |o| o.search_degree as usize)),
                verify: false,
            },
            IhjCommand::GotayNester => Task::GotayNester,
            IhjCommand::Complete => Task::Complete,
        };
        let ov = Overrides {
            seed: opts.filter(|o| o.use_seed).map(|o| o.seed),
            tol: opts.map(|o| o.tol).filter(|t| *t > 0.0),
        };
        let out = run_text(&task, &sys.text, &ov).map_err(|e| (IhjStatus::InputError, e.to_string()))?;
        *report = c_string(&out.render());
        *exit_code = out.exit_code;
        Ok(())
    })
}
