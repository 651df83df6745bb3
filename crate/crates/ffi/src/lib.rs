//! C ABI for the shadowing library: opaque handles for flows and chains,
//! integer status codes, JSON strings for structured results, and a
//! thread-local last-error message. The header is generated by cbindgen into
//! include/shadowlab.h at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use shadowlab::error::Error;
use shadowlab::flow::FlowSpec;
use shadowlab::pseudo::{self, JumpModel, StepPseudotrajectory};
use shadowlab::search::{self, SearchGrid, ShadowingCertificate};

/// Status codes returned by the C API.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SlStatus {
    SlOk = 0,
    SlNullPointer = 1,
    SlInvalidUtf8 = 2,
    SlJson = 3,
    SlDomain = 4,
    SlParam = 5,
    SlWindow = 6,
    SlGrid = 7,
    SlNotFound = 8,
    SlInternal = 9,
}

/// Opaque flow handle.
pub struct SlFlow {
    inner: FlowSpec,
}

/// Opaque chain handle.
pub struct SlChain {
    inner: StepPseudotrajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> SlStatus {
    match err {
        Error::Domain(_) => SlStatus::SlDomain,
        Error::Param(_) => SlStatus::SlParam,
        Error::Window(_) => SlStatus::SlWindow,
        Error::Grid(_) | Error::Size(_) | Error::Resolution(_) => SlStatus::SlGrid,
        Error::Json(_) => SlStatus::SlJson,
        _ => SlStatus::SlInternal,
    }
}

fn fail(err: &Error) -> SlStatus {
    set_error(&err.to_string());
    status_of(err)
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, SlStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(SlStatus::SlNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        SlStatus::SlInvalidUtf8
    })
}

fn to_cstring(text: String) -> *mut c_char {
    CString::new(text)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Library version string; static storage, do not free.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread; valid until the next API call
/// on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn sl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Free a string returned by this API.
///
/// # Safety
/// `s` must be a pointer returned by an sl_* function that documents caller
/// ownership, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a flow descriptor from JSON. Returns null on error (see
/// sl_last_error); free with sl_flow_free.
///
/// # Safety
/// `json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sl_flow_from_json(json: *const c_char) -> *mut SlFlow {
    let Ok(text) = cstr_arg(json) else {
        return ptr::null_mut();
    };
    match serde_json::from_str::<FlowSpec>(text) {
        Ok(inner) => Box::into_raw(Box::new(SlFlow { inner })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Serialize a flow to JSON; caller frees with sl_string_free.
///
/// # Safety
/// `flow` must be a live handle from sl_flow_from_json.
#[no_mangle]
pub unsafe extern "C" fn sl_flow_to_json(flow: *const SlFlow) -> *mut c_char {
    if flow.is_null() {
        set_error("null flow");
        return ptr::null_mut();
    }
    match serde_json::to_string(&(*flow).inner) {
        Ok(s) => to_cstring(s),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `flow` must be a handle from sl_flow_from_json, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_flow_free(flow: *mut SlFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Dimension of the flow's space; 0 on null input.
///
/// # Safety
/// `flow` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sl_flow_dim(flow: *const SlFlow) -> usize {
    if flow.is_null() {
        return 0;
    }
    (*flow).inner.dim()
}

/// Evaluate the flow at time t from x into out (dim doubles).
///
/// # Safety
/// `x` and `out` must point to `dim` readable/writable doubles; `flow` must
/// be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_flow_evaluate(
    flow: *const SlFlow,
    t: f64,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> SlStatus {
    if flow.is_null() || x.is_null() || out.is_null() {
        set_error("null pointer");
        return SlStatus::SlNullPointer;
    }
    let f = &(*flow).inner;
    if dim != f.dim() {
        set_error("dimension mismatch");
        return SlStatus::SlParam;
    }
    let xs = std::slice::from_raw_parts(x, dim);
    let point = match f.point(xs.to_vec()) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    match f.evaluate(t, &point) {
        Ok(p) => {
            std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&p.coords);
            SlStatus::SlOk
        }
        Err(e) => fail(&e),
    }
}

/// Metric distance between two coordinate vectors.
///
/// # Safety
/// `a`, `b` must point to `dim` readable doubles and `out` to one writable
/// double; `flow` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_flow_distance(
    flow: *const SlFlow,
    a: *const f64,
    b: *const f64,
    dim: usize,
    out: *mut f64,
) -> SlStatus {
    if flow.is_null() || a.is_null() || b.is_null() || out.is_null() {
        set_error("null pointer");
        return SlStatus::SlNullPointer;
    }
    let f = &(*flow).inner;
    if dim != f.dim() {
        set_error("dimension mismatch");
        return SlStatus::SlParam;
    }
    *out = f.distance(
        std::slice::from_raw_parts(a, dim),
        std::slice::from_raw_parts(b, dim),
    );
    SlStatus::SlOk
}

/// Parse a chain from JSON; free with sl_chain_free.
///
/// # Safety
/// `json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sl_chain_from_json(json: *const c_char) -> *mut SlChain {
    let Ok(text) = cstr_arg(json) else {
        return ptr::null_mut();
    };
    match serde_json::from_str::<StepPseudotrajectory>(text) {
        Ok(inner) => Box::into_raw(Box::new(SlChain { inner })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Serialize a chain to JSON; caller frees with sl_string_free.
///
/// # Safety
/// `chain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_chain_to_json(chain: *const SlChain) -> *mut c_char {
    if chain.is_null() {
        set_error("null chain");
        return ptr::null_mut();
    }
    match serde_json::to_string(&(*chain).inner) {
        Ok(s) => to_cstring(s),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `chain` must be a handle from this API, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_chain_free(chain: *mut SlChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Generate a uniform-noise chain from x0 over anchor window
/// [n_min, n_max]. Returns null on error; free with sl_chain_free.
///
/// # Safety
/// `flow` must be a live handle and `x0` point to `dim` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_generate_chain(
    flow: *const SlFlow,
    x0: *const f64,
    dim: usize,
    d: f64,
    t0: f64,
    n_min: i64,
    n_max: i64,
    seed: u64,
) -> *mut SlChain {
    if flow.is_null() || x0.is_null() {
        set_error("null pointer");
        return ptr::null_mut();
    }
    let f = &(*flow).inner;
    if dim != f.dim() {
        set_error("dimension mismatch");
        return ptr::null_mut();
    }
    let xs = std::slice::from_raw_parts(x0, dim);
    let point = match f.point(xs.to_vec()) {
        Ok(p) => p,
        Err(e) => {
            set_error(&e.to_string());
            return ptr::null_mut();
        }
    };
    match pseudo::generate_pt(f, &point, d, t0, (n_min, n_max), seed, JumpModel::UniformBall) {
        Ok(inner) => Box::into_raw(Box::new(SlChain { inner })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Continuous-form defect of a chain; writes one double.
///
/// # Safety
/// `flow`, `chain` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_chain_defect(
    flow: *const SlFlow,
    chain: *const SlChain,
    out: *mut f64,
) -> SlStatus {
    if flow.is_null() || chain.is_null() || out.is_null() {
        set_error("null pointer");
        return SlStatus::SlNullPointer;
    }
    match pseudo::validate_ps(&(*flow).inner, &pseudo::PseudoInput::Step(&(*chain).inner)) {
        Ok(v) => {
            *out = v;
            SlStatus::SlOk
        }
        Err(e) => fail(&e),
    }
}

/// Evaluate the chain at a time inside its window.
///
/// # Safety
/// `out` must point to `dim` writable doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn sl_chain_eval(
    flow: *const SlFlow,
    chain: *const SlChain,
    t: f64,
    out: *mut f64,
) -> SlStatus {
    if flow.is_null() || chain.is_null() || out.is_null() {
        set_error("null pointer");
        return SlStatus::SlNullPointer;
    }
    match (*chain).inner.eval(&(*flow).inner, t) {
        Ok(v) => {
            std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(&v);
            SlStatus::SlOk
        }
        Err(e) => fail(&e),
    }
}

fn do_search(
    flow: &FlowSpec,
    chain: &StepPseudotrajectory,
    eps: f64,
    eps_rep: Option<f64>,
    per_ball: usize,
    status: &mut SlStatus,
) -> Option<ShadowingCertificate> {
    let grid = SearchGrid::defaults_for(chain);
    let candidates = search::default_candidates(flow, chain, eps, per_ball);
    let result = match eps_rep {
        None => search::search_oriented(flow, chain, eps, &candidates, &grid),
        Some(r) => search::search_standard(flow, chain, eps, r, &candidates, &grid),
    };
    match result {
        Ok(Some(cert)) => {
            *status = SlStatus::SlOk;
            Some(cert)
        }
        Ok(None) => {
            set_error("no certificate at this eps");
            *status = SlStatus::SlNotFound;
            None
        }
        Err(e) => {
            *status = fail(&e);
            None
        }
    }
}

/// Oriented shadowing search with the default grid; returns the certificate
/// as JSON (caller frees) or null with *status set (SlNotFound when the
/// search ran but found nothing).
///
/// # Safety
/// Handles must be live; `status` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_search_oriented(
    flow: *const SlFlow,
    chain: *const SlChain,
    eps: f64,
    per_ball: usize,
    status: *mut SlStatus,
) -> *mut c_char {
    if flow.is_null() || chain.is_null() || status.is_null() {
        set_error("null pointer");
        if !status.is_null() {
            *status = SlStatus::SlNullPointer;
        }
        return ptr::null_mut();
    }
    match do_search(&(*flow).inner, &(*chain).inner, eps, None, per_ball, &mut *status) {
        Some(cert) => to_cstring(serde_json::to_string(&cert).unwrap_or_default()),
        None => ptr::null_mut(),
    }
}

/// Slope-constrained search; see sl_search_oriented.
///
/// # Safety
/// Handles must be live; `status` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_search_standard(
    flow: *const SlFlow,
    chain: *const SlChain,
    eps: f64,
    eps_rep: f64,
    per_ball: usize,
    status: *mut SlStatus,
) -> *mut c_char {
    if flow.is_null() || chain.is_null() || status.is_null() {
        set_error("null pointer");
        if !status.is_null() {
            *status = SlStatus::SlNullPointer;
        }
        return ptr::null_mut();
    }
    match do_search(
        &(*flow).inner,
        &(*chain).inner,
        eps,
        Some(eps_rep),
        per_ball,
        &mut *status,
    ) {
        Some(cert) => to_cstring(serde_json::to_string(&cert).unwrap_or_default()),
        None => ptr::null_mut(),
    }
}

/// Recompute a JSON certificate's grid sup against the chain; writes it to
/// `out_sup`.
///
/// # Safety
/// Handles must be live, `cert_json` a valid string, `out_sup` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_verify_certificate(
    flow: *const SlFlow,
    chain: *const SlChain,
    cert_json: *const c_char,
    out_sup: *mut f64,
) -> SlStatus {
    if flow.is_null() || chain.is_null() || out_sup.is_null() {
        set_error("null pointer");
        return SlStatus::SlNullPointer;
    }
    let text = match cstr_arg(cert_json) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let cert: ShadowingCertificate = match serde_json::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return SlStatus::SlJson;
        }
    };
    match search::verify_certificate(&(*flow).inner, &(*chain).inner, &cert) {
        Ok(sup) => {
            *out_sup = sup;
            SlStatus::SlOk
        }
        Err(e) => fail(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(text: &str) -> CString {
        CString::new(text).unwrap()
    }

    #[test]
    fn flow_roundtrip_and_evaluate() {
        unsafe {
            let flow = sl_flow_from_json(c(r#"{"kind":"disk"}"#).as_ptr());
            assert!(!flow.is_null());
            assert_eq!(sl_flow_dim(flow), 2);
            let x = [0.5f64, 0.0];
            let mut out = [0.0f64; 2];
            let st = sl_flow_evaluate(flow, 1.0, x.as_ptr(), 2, out.as_mut_ptr());
            assert_eq!(st, SlStatus::SlOk);
            let r = (out[0] * out[0] + out[1] * out[1]).sqrt();
            assert!((r - 0.5).abs() < 1e-12, "the circle r = 1/2 is invariant");
            let json = sl_flow_to_json(flow);
            assert!(!json.is_null());
            let back = sl_flow_from_json(json);
            assert!(!back.is_null());
            sl_string_free(json);
            sl_flow_free(back);
            sl_flow_free(flow);
        }
    }

    #[test]
    fn bad_inputs_set_errors() {
        unsafe {
            assert!(sl_flow_from_json(c("{\"kind\":\"nope\"}").as_ptr()).is_null());
            let msg = CStr::from_ptr(sl_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());
            let flow = sl_flow_from_json(c(r#"{"kind":"disk"}"#).as_ptr());
            let x = [2.0f64, 0.0]; // outside the disk
            let mut out = [0.0f64; 2];
            let st = sl_flow_evaluate(flow, 1.0, x.as_ptr(), 2, out.as_mut_ptr());
            assert_eq!(st, SlStatus::SlDomain);
            let st = sl_flow_evaluate(flow, 1.0, x.as_ptr(), 3, out.as_mut_ptr());
            assert_eq!(st, SlStatus::SlParam);
            sl_flow_free(flow);
        }
    }

    #[test]
    fn chain_generate_search_verify() {
        unsafe {
            let flow = sl_flow_from_json(c(r#"{"kind":"north_south"}"#).as_ptr());
            let x0 = [2.0f64];
            let chain = sl_generate_chain(flow, x0.as_ptr(), 1, 0.005, 0.5, -10, 10, 7);
            assert!(!chain.is_null());
            let mut defect = 0.0;
            assert_eq!(sl_chain_defect(flow, chain, &mut defect), SlStatus::SlOk);
            assert!(defect > 0.0 && defect < 0.05);
            let mut status = SlStatus::SlInternal;
            let cert = sl_search_oriented(flow, chain, 0.2, 5, &mut status);
            assert_eq!(status, SlStatus::SlOk);
            assert!(!cert.is_null());
            let mut sup = 0.0;
            assert_eq!(
                sl_verify_certificate(flow, chain, cert, &mut sup),
                SlStatus::SlOk
            );
            assert!(sup < 0.2);
            // an impossible eps reports not-found, not an error
            let mut status = SlStatus::SlOk;
            let none = sl_search_oriented(flow, chain, 1e-9, 2, &mut status);
            assert!(none.is_null());
            assert_eq!(status, SlStatus::SlNotFound);
            sl_string_free(cert);
            sl_chain_free(chain);
            sl_flow_free(flow);
        }
    }
}
