//! C interface to `semcom-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`SemcomStatus`]; on failure [`semcom_last_error_message`] describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use semcom_core::complex::exact_query;
use semcom_core::dataset::{load_corpus, synth_corpus, BipartiteGraph};
use semcom_core::scae::ScaeModel;
use semcom_core::{Error, LaplacianSet, Simplex, SimplicialComplex};

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemcomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Parse = 3,
    Validation = 4,
    Domain = 5,
    Shape = 6,
    Io = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// A coauthorship corpus.
pub struct SemcomGraph {
    inner: BipartiteGraph,
}

/// A simplicial complex together with the corpus it was built from and its
/// Hodge Laplacians.
pub struct SemcomComplex {
    complex: SimplicialComplex,
    graph: BipartiteGraph,
    laps: LaplacianSet,
}

/// A trained autoencoder checkpoint.
pub struct SemcomModel {
    inner: ScaeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> SemcomStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => SemcomStatus::Parse,
        Error::Validation(_) | Error::EmptySample | Error::Config(_) => SemcomStatus::Validation,
        Error::Domain(_) | Error::UndefinedMetric => SemcomStatus::Domain,
        Error::Shape { .. } => SemcomStatus::Shape,
        Error::Io { .. } => SemcomStatus::Io,
        _ => SemcomStatus::Internal,
    }
}

struct Fail(SemcomStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SemcomStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SemcomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SemcomStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SemcomStatus::Internal
        }
    }
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(SemcomStatus::InvalidString, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn give<T>(slot: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = out(slot, "output handle")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copy of the last failure message on this thread, or null. The
/// returned copy must be released with [`semcom_string_free`].
#[no_mangle]
pub extern "C" fn semcom_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(s) => s.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn semcom_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn semcom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a JSON Lines corpus.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_graph` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_graph_load(path: *const c_char, out_graph: *mut *mut SemcomGraph) -> SemcomStatus {
    guard(|| {
        let path = PathBuf::from(string_arg(path, "path")?);
        give(out_graph, SemcomGraph { inner: load_corpus(path)? })
    })
}

/// Generates a synthetic corpus.
///
/// # Safety
/// `out_graph` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_graph_synth(
    n_authors: usize,
    n_papers: usize,
    max_coauthors: usize,
    cite_max: u64,
    seed: u64,
    out_graph: *mut *mut SemcomGraph,
) -> SemcomStatus {
    guard(|| {
        let inner = synth_corpus(n_authors, n_papers, max_coauthors, cite_max, seed)?;
        give(out_graph, SemcomGraph { inner })
    })
}

/// # Safety
/// `graph` must be a live handle and `out_count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_graph_paper_count(graph: *const SemcomGraph, out_count: *mut usize) -> SemcomStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(graph, "graph")?.inner.papers().len();
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn semcom_graph_free(graph: *mut SemcomGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Builds the complex of `graph`. The graph handle stays owned by the
/// caller.
///
/// # Safety
/// `graph` must be a live handle and `out_complex` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_complex_build(
    graph: *const SemcomGraph,
    out_complex: *mut *mut SemcomComplex,
) -> SemcomStatus {
    guard(|| {
        let graph = handle(graph, "graph")?.inner.clone();
        let complex = SimplicialComplex::build(&graph);
        let laps = LaplacianSet::from_complex(&complex)?;
        give(out_complex, SemcomComplex { complex, graph, laps })
    })
}

/// # Safety
/// `complex` must be a live handle and `out_orders` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_complex_num_orders(
    complex: *const SemcomComplex,
    out_orders: *mut usize,
) -> SemcomStatus {
    guard(|| {
        *out(out_orders, "out_orders")? = handle(complex, "complex")?.complex.num_orders();
        Ok(())
    })
}

/// Number of simplices of order `k`; zero past the top order.
///
/// # Safety
/// `complex` must be a live handle and `out_count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_complex_count(
    complex: *const SemcomComplex,
    k: usize,
    out_count: *mut usize,
) -> SemcomStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(complex, "complex")?.complex.count(k);
        Ok(())
    })
}

fn copy_out(values: &[f64], buf: *mut f64, len: usize, written: *mut usize) -> Result<(), Fail> {
    // SAFETY: the caller guarantees `written` is valid for writes.
    *unsafe { out(written, "out_written") }? = values.len();
    if buf.is_null() && len == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < values.len() {
        return Err(Fail(
            SemcomStatus::BufferTooSmall,
            format!("buffer holds {len} values but {} are needed", values.len()),
        ));
    }
    // SAFETY: `buf` is non-null and the caller guarantees `len` writable slots.
    unsafe { std::slice::from_raw_parts_mut(buf, values.len()) }.copy_from_slice(values);
    Ok(())
}

/// Copies the order-`k` cochain into `buf`. `out_written` always receives
/// the required length, so a call with a null buffer and `len == 0` sizes
/// the buffer.
///
/// # Safety
/// `buf` must be null or valid for `len` writes; the other pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn semcom_complex_cochain(
    complex: *const SemcomComplex,
    k: usize,
    buf: *mut f64,
    len: usize,
    out_written: *mut usize,
) -> SemcomStatus {
    guard(|| {
        let c = handle(complex, "complex")?;
        if k >= c.complex.num_orders() {
            return Err(Fail(SemcomStatus::Domain, format!("no simplices of order {k}")));
        }
        copy_out(c.complex.cochain(k), buf, len, out_written)
    })
}

/// Exact citation count of the papers whose author set contains all of
/// `authors`.
///
/// # Safety
/// `authors` must point to `n_authors` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn semcom_complex_query(
    complex: *const SemcomComplex,
    authors: *const *const c_char,
    n_authors: usize,
    out_value: *mut f64,
) -> SemcomStatus {
    guard(|| {
        let c = handle(complex, "complex")?;
        if authors.is_null() {
            return Err(null("authors"));
        }
        let names = std::slice::from_raw_parts(authors, n_authors)
            .iter()
            .map(|&p| string_arg(p, "author"))
            .collect::<Result<Vec<_>, _>>()?;
        let q = Simplex::new(names)?;
        *out(out_value, "out_value")? = exact_query(&c.complex, &c.graph, &q)?;
        Ok(())
    })
}

/// # Safety
/// `complex` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn semcom_complex_free(complex: *mut SemcomComplex) {
    if !complex.is_null() {
        drop(Box::from_raw(complex));
    }
}

/// Loads a checkpoint written by `semcom train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn semcom_model_load(path: *const c_char, out_model: *mut *mut SemcomModel) -> SemcomStatus {
    guard(|| {
        let path = PathBuf::from(string_arg(path, "path")?);
        give(out_model, SemcomModel { inner: ScaeModel::load_json(path)? })
    })
}

/// Runs the model on the full cochains of `complex` and copies the order-`k`
/// reconstruction into `buf`, with the sizing rules of
/// [`semcom_complex_cochain`].
///
/// # Safety
/// As for [`semcom_complex_cochain`]; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn semcom_model_reconstruct(
    model: *const SemcomModel,
    complex: *const SemcomComplex,
    k: usize,
    buf: *mut f64,
    len: usize,
    out_written: *mut usize,
) -> SemcomStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let c = handle(complex, "complex")?;
        if k >= c.complex.num_orders() {
            return Err(Fail(SemcomStatus::Domain, format!("no simplices of order {k}")));
        }
        let field = m.inner.reconstruct(&c.laps, &c.complex.cochains())?;
        copy_out(&field[k], buf, len, out_written)
    })
}

/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn semcom_model_free(model: *mut SemcomModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
