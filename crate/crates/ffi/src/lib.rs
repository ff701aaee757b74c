//! C ABI over the `graph-annotate` core.
//!
//! Every function returns a [`GaStatus`]; on failure a message is available
//! from [`ga_last_error`] on the same thread. Graphs are opaque handles
//! created by [`ga_graph_load`] and released with [`ga_graph_free`].
//! Output arrays are caller-allocated: functions take a capacity and report
//! the required length, returning `GA_STATUS_BUFFER_TOO_SMALL` when it does
//! not fit.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use graph_annotate::annotator::parse_response;
use graph_annotate::dataset::{assemble, parse_cites, parse_content, parse_texts, EdgeSemantics};
use graph_annotate::filter::pagerank::{pagerank, PageRankConfig};
use graph_annotate::theory::{dominance_gap, q_power_closed_form, HomophilyParams};
use graph_annotate::{DirectedTag, Error, Role};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NoConvergence = 5,
    BufferTooSmall = 6,
    Panic = 7,
    Other = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaEdgeSemantics {
    CitingToCited = 0,
    CitedToCiting = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaRole {
    Center = 0,
    Pred = 1,
    Succ = 2,
    PredOfPred = 3,
    PredOfSucc = 4,
    SuccOfPred = 5,
    SuccOfSucc = 6,
}

impl From<Role> for GaRole {
    fn from(r: Role) -> Self {
        match r {
            Role::Center => GaRole::Center,
            Role::Pred => GaRole::Pred,
            Role::Succ => GaRole::Succ,
            Role::PredOfPred => GaRole::PredOfPred,
            Role::PredOfSucc => GaRole::PredOfSucc,
            Role::SuccOfPred => GaRole::SuccOfPred,
            Role::SuccOfSucc => GaRole::SuccOfSucc,
        }
    }
}

/// Opaque graph handle.
pub struct GaGraph {
    inner: DirectedTag,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> GaStatus {
    match e {
        Error::Io { .. } => GaStatus::Io,
        Error::Parse { .. } | Error::EmptyFile(_) | Error::UnparseableResponse | Error::Json(_) => GaStatus::Parse,
        Error::NoConvergence { .. } => GaStatus::NoConvergence,
        Error::Validation(_) | Error::UnknownNode(_) | Error::ConfigOutOfRange(_) | Error::Dimension(_) => {
            GaStatus::InvalidArgument
        }
        _ => GaStatus::Other,
    }
}

struct Fail(GaStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Fail(status_of(&e))
    }
}

fn fail(status: GaStatus, msg: &str) -> Fail {
    set_error(msg);
    Fail(status)
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GaStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(_) => {
            set_error("internal panic");
            GaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(GaStatus::NullPointer, &format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GaStatus::InvalidArgument, &format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(fail(GaStatus::NullPointer, &format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ga_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads `.content` and `.cites` files (and optionally a texts file, which may
/// be null) into a new graph handle stored in `*out`.
///
/// # Safety
/// Path arguments must be null or valid NUL-terminated strings; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ga_graph_load(
    content_path: *const c_char,
    cites_path: *const c_char,
    texts_path: *const c_char,
    semantics: GaEdgeSemantics,
    out: *mut *mut GaGraph,
) -> GaStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let content = parse_content(PathBuf::from(str_arg(content_path, "content_path")?))?;
        let cites = parse_cites(PathBuf::from(str_arg(cites_path, "cites_path")?))?;
        let texts = if texts_path.is_null() {
            None
        } else {
            Some(parse_texts(PathBuf::from(str_arg(texts_path, "texts_path")?))?)
        };
        let sem = match semantics {
            GaEdgeSemantics::CitingToCited => EdgeSemantics::CitingToCited,
            GaEdgeSemantics::CitedToCiting => EdgeSemantics::CitedToCiting,
        };
        let (inner, _) = assemble(&content, &cites, sem, texts.as_ref())?;
        *out = Box::into_raw(Box::new(GaGraph { inner }));
        Ok(())
    })
}

/// Releases a handle from [`ga_graph_load`]. Null is ignored.
///
/// # Safety
/// `graph` must come from [`ga_graph_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ga_graph_free(graph: *mut GaGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

unsafe fn graph_ref<'a>(g: *const GaGraph) -> Result<&'a DirectedTag, Fail> {
    non_null(g, "graph")?;
    Ok(&(*g).inner)
}

/// Node, edge, class and feature counts. Any output pointer may be null.
///
/// # Safety
/// `graph` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ga_graph_counts(
    graph: *const GaGraph,
    nodes: *mut usize,
    edges: *mut usize,
    classes: *mut usize,
    feature_dim: *mut usize,
) -> GaStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        for (p, v) in [
            (nodes, g.num_nodes()),
            (edges, g.num_edges()),
            (classes, g.num_classes()),
            (feature_dim, g.feature_dim()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Members and roles of homophily tie `k` (0..=7) around `node`. Writes
/// `*len`; fills `members`/`roles` only when `len <= cap`.
///
/// # Safety
/// `graph` must be live; `members` and `roles` must hold `cap` elements
/// (they may be null when `cap` is 0); `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ga_graph_tie(
    graph: *const GaGraph,
    node: usize,
    k: usize,
    members: *mut usize,
    roles: *mut GaRole,
    cap: usize,
    len: *mut usize,
) -> GaStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        non_null(len, "len")?;
        let tie = g.homophily_tie(node, k)?;
        *len = tie.len();
        if tie.len() > cap {
            return Err(fail(GaStatus::BufferTooSmall, "member buffer too small"));
        }
        non_null(members, "members")?;
        non_null(roles, "roles")?;
        for (i, (&m, &r)) in tie.members.iter().zip(&tie.roles).enumerate() {
            *members.add(i) = m;
            *roles.add(i) = r.into();
        }
        Ok(())
    })
}

/// PageRank with the given damping (tolerance 1e-8, at most 1000
/// iterations). `out` must hold one value per node.
///
/// # Safety
/// `graph` must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ga_pagerank(graph: *const GaGraph, damping: f64, out: *mut f64, len: usize) -> GaStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        if len < g.num_nodes() {
            return Err(fail(GaStatus::BufferTooSmall, "output shorter than node count"));
        }
        non_null(out, "out")?;
        if !(damping > 0.0 && damping < 1.0) {
            return Err(fail(GaStatus::InvalidArgument, "damping must be in (0, 1)"));
        }
        let cfg = PageRankConfig {
            damping,
            ..PageRankConfig::default()
        };
        for (i, p) in pagerank(g, &cfg)?.into_iter().enumerate() {
            *out.add(i) = p;
        }
        Ok(())
    })
}

/// Diagonal and off-diagonal entries of the h-step label transition matrix.
///
/// # Safety
/// `diag` and `off_diag` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ga_q_power(alpha: f64, classes: usize, h: u32, diag: *mut f64, off_diag: *mut f64) -> GaStatus {
    guard(|| {
        non_null(diag, "diag")?;
        non_null(off_diag, "off_diag")?;
        let q = q_power_closed_form(&HomophilyParams::new(alpha, classes)?, h);
        *diag = q[(0, 0)];
        *off_diag = q[(0, 1)];
        Ok(())
    })
}

/// `(alpha - beta)^h` and whether it is strictly positive.
///
/// # Safety
/// `gap` and `dominant` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ga_dominance_gap(alpha: f64, classes: usize, h: u32, gap: *mut f64, dominant: *mut bool) -> GaStatus {
    guard(|| {
        non_null(gap, "gap")?;
        non_null(dominant, "dominant")?;
        let d = dominance_gap(&HomophilyParams::new(alpha, classes)?, h);
        *gap = d.gap;
        *dominant = d.dominant;
        Ok(())
    })
}

/// Parses a model reply into ranked guesses. `labels[i]` is the class index
/// into `class_names`, `confidences[i]` the 0..=100 confidence. Writes
/// `*len`; fills the arrays only when `len <= cap`.
///
/// # Safety
/// `text` and each of the `num_classes` entries of `class_names` must be valid
/// NUL-terminated strings; output arrays must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn ga_parse_response(
    text: *const c_char,
    class_names: *const *const c_char,
    num_classes: usize,
    labels: *mut usize,
    confidences: *mut u32,
    cap: usize,
    len: *mut usize,
) -> GaStatus {
    guard(|| {
        non_null(len, "len")?;
        non_null(class_names, "class_names")?;
        let raw = str_arg(text, "text")?;
        let names = (0..num_classes)
            .map(|i| str_arg(*class_names.add(i), "class name").map(String::from))
            .collect::<Result<Vec<_>, _>>()?;
        let guesses = parse_response(raw, &names)?;
        *len = guesses.len();
        if guesses.len() > cap {
            return Err(fail(GaStatus::BufferTooSmall, "guess buffer too small"));
        }
        non_null(labels, "labels")?;
        non_null(confidences, "confidences")?;
        for (i, g) in guesses.iter().enumerate() {
            *labels.add(i) = names.iter().position(|n| *n == g.label).unwrap_or(usize::MAX);
            *confidences.add(i) = g.confidence;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_arguments_are_reported() {
        let mut out = ptr::null_mut();
        let s = unsafe { ga_graph_load(ptr::null(), ptr::null(), ptr::null(), GaEdgeSemantics::CitingToCited, &mut out) };
        assert_eq!(s, GaStatus::NullPointer);
        assert!(out.is_null());
        let msg = unsafe { CStr::from_ptr(ga_last_error()) }.to_str().unwrap();
        assert!(msg.contains("content_path"));
    }

    #[test]
    fn q_power_reference() {
        let (mut d, mut o) = (0.0, 0.0);
        assert_eq!(unsafe { ga_q_power(0.7, 3, 2, &mut d, &mut o) }, GaStatus::Ok);
        assert!((d - 0.535).abs() < 1e-12 && (o - 0.2325).abs() < 1e-12);
        assert!(ga_last_error().is_null());
        assert_eq!(unsafe { ga_q_power(1.5, 3, 2, &mut d, &mut o) }, GaStatus::InvalidArgument);
    }
}
