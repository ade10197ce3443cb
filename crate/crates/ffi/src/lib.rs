//! C ABI over the `graphssl` library.
//!
//! Graphs and solutions cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns a [`GsStatus`]; on failure a description is available from
//! [`gs_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use graphssl::diagnostics::{auc, commute_time};
use graphssl::{
    laplace_learn, laplace_regularize, load_graph, poisson_learn, Error, Graph, LabelSet, MaskMode,
    PinvNormalization, SolverConfig, SslSolution,
};

/// Version of this ABI. Bumped on any incompatible change.
pub const GS_ABI_VERSION: u32 = 1;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    InvalidArgument = 1,
    /// Disconnected graph, unreachable nodes or solver non-convergence.
    NumericFailure = 2,
    Io = 3,
    NullPointer = 4,
    Panic = 5,
}

/// Pseudoinverse representative.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsPinvNormalization {
    MeanZero = 0,
    DegreeMeanZero = 1,
}

/// Solver settings. `max_iter == 0` selects the default cap of 10 n.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsSolverConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub pinv_normalization: GsPinvNormalization,
}

/// Opaque graph handle.
pub struct GsGraph(Graph);

/// Opaque solution handle.
pub struct GsSolution(SslSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GsStatus {
    match err {
        Error::Io(_) => GsStatus::Io,
        e if e.is_numeric() => GsStatus::NumericFailure,
        _ => GsStatus::InvalidArgument,
    }
}

struct Fail(GsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F>(f: F) -> GsStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GsStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn config(cfg: *const GsSolverConfig) -> Result<SolverConfig, Fail> {
    let Some(c) = cfg.as_ref() else {
        return Ok(SolverConfig::default());
    };
    let out = SolverConfig {
        rel_tol: c.rel_tol,
        max_iter: (c.max_iter > 0).then_some(c.max_iter),
        pinv_normalization: match c.pinv_normalization {
            GsPinvNormalization::MeanZero => PinvNormalization::MeanZero,
            GsPinvNormalization::DegreeMeanZero => PinvNormalization::DegreeMeanZero,
        },
    };
    out.validate()?;
    Ok(out)
}

unsafe fn labels(n: usize, idx: *const usize, vals: *const f64, m: usize) -> Result<LabelSet, Fail> {
    let idx = slice(idx, m, "label indices")?;
    let vals = slice(vals, m, "label values")?;
    Ok(LabelSet::from_slices(n, idx, vals)?)
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Returns [`GS_ABI_VERSION`].
#[no_mangle]
pub extern "C" fn gs_abi_version() -> u32 {
    GS_ABI_VERSION
}

/// Default solver settings (relative tolerance 1e-10, cap 10 n, mean-zero).
#[no_mangle]
pub extern "C" fn gs_solver_config_default() -> GsSolverConfig {
    let d = SolverConfig::default();
    GsSolverConfig {
        rel_tol: d.rel_tol,
        max_iter: 0,
        pinv_normalization: GsPinvNormalization::MeanZero,
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a graph from an edge-list file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_load(path: *const c_char, out: *mut *mut GsGraph) -> GsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(GsStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
        store(out, GsGraph(load_graph(path)?));
        Ok(())
    })
}

/// Builds a graph from `m` undirected edges `(src[k], dst[k], weight[k])`.
///
/// # Safety
/// The three arrays must hold `m` elements each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_from_edges(
    n: usize,
    src: *const usize,
    dst: *const usize,
    weight: *const f64,
    m: usize,
    out: *mut *mut GsGraph,
) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = slice(src, m, "src")?;
        let dst = slice(dst, m, "dst")?;
        let weight = slice(weight, m, "weight")?;
        let edges = (0..m).map(|k| (src[k], dst[k], weight[k]));
        store(out, GsGraph(Graph::from_edges(n, edges)?));
        Ok(())
    })
}

/// Releases a graph. Null is ignored.
///
/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_free(graph: *mut GsGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_node_count(graph: *const GsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

unsafe fn learn<F>(
    graph: *const GsGraph,
    idx: *const usize,
    vals: *const f64,
    m: usize,
    cfg: *const GsSolverConfig,
    out: *mut *mut GsSolution,
    run: F,
) -> GsStatus
where
    F: FnOnce(&Graph, &LabelSet, &SolverConfig) -> graphssl::Result<SslSolution>,
{
    guard(|| {
        let g = &graph.as_ref().ok_or_else(|| null("graph"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config(cfg)?;
        let labels = labels(g.n(), idx, vals, m)?;
        store(out, GsSolution(run(g, &labels, &cfg)?));
        Ok(())
    })
}

/// Harmonic extension of the `m` labels. `cfg` may be null for defaults.
///
/// # Safety
/// `label_idx` and `label_val` must hold `m` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_laplace_learn(
    graph: *const GsGraph,
    label_idx: *const usize,
    label_val: *const f64,
    m: usize,
    cfg: *const GsSolverConfig,
    out: *mut *mut GsSolution,
) -> GsStatus {
    learn(graph, label_idx, label_val, m, cfg, out, laplace_learn)
}

/// Soft-constrained fit with data weight `lambda`. A nonzero `full_mask`
/// applies the loss to every node instead of the labeled ones only.
///
/// # Safety
/// As for [`gs_laplace_learn`].
#[no_mangle]
pub unsafe extern "C" fn gs_laplace_regularize(
    graph: *const GsGraph,
    label_idx: *const usize,
    label_val: *const f64,
    m: usize,
    lambda: f64,
    full_mask: i32,
    cfg: *const GsSolverConfig,
    out: *mut *mut GsSolution,
) -> GsStatus {
    let mask = if full_mask != 0 { MaskMode::Full } else { MaskMode::LabeledOnly };
    learn(graph, label_idx, label_val, m, cfg, out, |g, l, c| {
        laplace_regularize(g, l, lambda, mask, c)
    })
}

/// Poisson scores: pseudoinverse applied to centered label sources.
///
/// # Safety
/// As for [`gs_laplace_learn`].
#[no_mangle]
pub unsafe extern "C" fn gs_poisson_learn(
    graph: *const GsGraph,
    label_idx: *const usize,
    label_val: *const f64,
    m: usize,
    cfg: *const GsSolverConfig,
    out: *mut *mut GsSolution,
) -> GsStatus {
    learn(graph, label_idx, label_val, m, cfg, out, poisson_learn)
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `sol` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_solution_free(sol: *mut GsSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Number of scores, or 0 for a null handle.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_solution_len(sol: *const GsSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.u.len())
}

/// Additive constant of the kernel form, or NaN for a null handle.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_solution_offset(sol: *const GsSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.offset)
}

/// Solver iterations used, or 0 for a null handle.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_solution_iterations(sol: *const GsSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.report.iterations)
}

/// Copies the scores into `out`, which must have room for `len` values;
/// `len` must equal [`gs_solution_len`].
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_solution_scores(sol: *const GsSolution, out: *mut f64, len: usize) -> GsStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.0;
        if len != s.u.len() {
            return Err(Error::DimensionMismatch {
                expected: s.u.len(),
                actual: len,
            }
            .into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&s.u);
        Ok(())
    })
}

/// Serializes the solution to JSON. Release the string with
/// [`gs_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_solution_to_json(sol: *const GsSolution, out: *mut *mut c_char) -> GsStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json_string(s)?;
        *out = CString::new(text)
            .map_err(|_| Fail(GsStatus::Panic, "JSON contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

fn serde_json_string(s: &SslSolution) -> Result<String, Fail> {
    serde_json::to_string(&s.to_json()).map_err(|e| Fail::from(Error::from(e)))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Commute time between nodes `i` and `j`.
///
/// # Safety
/// `out` must be writable; `cfg` may be null.
#[no_mangle]
pub unsafe extern "C" fn gs_commute_time(
    graph: *const GsGraph,
    i: usize,
    j: usize,
    cfg: *const GsSolverConfig,
    out: *mut f64,
) -> GsStatus {
    guard(|| {
        let g = &graph.as_ref().ok_or_else(|| null("graph"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = commute_time(g, i, j, &config(cfg)?)?;
        Ok(())
    })
}

/// Area under the ROC curve of `scores` against `truth` (nonzero = positive).
///
/// # Safety
/// Both arrays must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_auc(scores: *const f64, truth: *const u8, len: usize, out: *mut f64) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scores = slice(scores, len, "scores")?;
        let truth: Vec<bool> = slice(truth, len, "truth")?.iter().map(|&t| t != 0).collect();
        *out = auc(scores, &truth)?;
        Ok(())
    })
}
