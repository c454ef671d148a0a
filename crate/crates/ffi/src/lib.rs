//! C ABI for snowglobe.
//!
//! Every handle is opaque and owned by the caller once returned; free it
//! with the matching `sg_*_free`. Functions returning [`SgStatus`] leave a
//! message for [`sg_last_error`] on failure. Nothing here unwinds across the
//! boundary: panics become `SG_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use snowglobe::analysis::{run_audit, AuditOptions};
use snowglobe::io::{events_text, numbering, parse_input, write_output, OutputPaths, RunManifest};
use snowglobe::quality::{InsertionMode, PlacementMode};
use snowglobe::{refine, Dim, IoError, Plc, RefineError, RefineOutput, RefinementConfig};

/// Result of every fallible call.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgStatus {
    SG_OK = 0,
    SG_ERR_NULL = 1,
    SG_ERR_ARGUMENT = 2,
    SG_ERR_INVALID_PLC = 3,
    SG_ERR_CONFIG = 4,
    SG_ERR_PARSE = 5,
    SG_ERR_IO = 6,
    SG_ERR_INSERTION_CAP = 7,
    SG_ERR_INTERNAL = 8,
    SG_ERR_PANIC = 9,
    SG_ERR_BUFFER_TOO_SMALL = 10,
}
use SgStatus::*;

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgPlacement {
    SG_PLACEMENT_DISTANCE = 0,
    SG_PLACEMENT_ANGLE = 1,
    SG_PLACEMENT_CIRCUMCENTER = 2,
}

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgMode {
    SG_MODE_SINGLE = 0,
    SG_MODE_MULTI = 1,
}

/// Input geometry under construction.
pub struct SgPlc(Plc);
/// Refinement parameters.
pub struct SgConfig(RefinementConfig);
/// A finished refinement.
pub struct SgResult(RefineOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(code: SgStatus, msg: impl Into<String>) -> SgStatus {
    set_error(msg);
    code
}

fn guard(f: impl FnOnce() -> SgStatus) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SG_ERR_PANIC, msg)
        }
    }
}

fn refine_status(e: &RefineError) -> SgStatus {
    match e {
        RefineError::Plc(_) => SG_ERR_INVALID_PLC,
        RefineError::Config(_) => SG_ERR_CONFIG,
        RefineError::InsertionCap { .. } => SG_ERR_INSERTION_CAP,
        _ => SG_ERR_INTERNAL,
    }
}

fn io_status(e: &IoError) -> SgStatus {
    match e {
        IoError::Parse { .. } => SG_ERR_PARSE,
        IoError::Plc(_) => SG_ERR_INVALID_PLC,
        _ => SG_ERR_IO,
    }
}

fn dim_of(d: c_int) -> Option<Dim> {
    match d {
        2 => Some(Dim::Two),
        3 => Some(Dim::Three),
        _ => None,
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, SgStatus> {
    if p.is_null() {
        return Err(fail(SG_ERR_NULL, "null path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SG_ERR_ARGUMENT, "path is not UTF-8"))
}

unsafe fn point_arg(xyz: *const c_double, dim: Dim) -> [f64; 3] {
    let mut p = [0.0; 3];
    for (i, c) in p.iter_mut().enumerate().take(dim.n()) {
        *c = *xyz.add(i);
    }
    p
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Empty PLC of dimension 2 or 3; NULL for any other value.
#[no_mangle]
pub extern "C" fn sg_plc_new(dim: c_int) -> *mut SgPlc {
    match dim_of(dim) {
        Some(Dim::Two) => Box::into_raw(Box::new(SgPlc(Plc::new_2d(vec![], vec![], vec![])))),
        Some(Dim::Three) => Box::into_raw(Box::new(SgPlc(Plc::new_3d(vec![], vec![], vec![])))),
        None => {
            set_error(format!("dimension must be 2 or 3, got {dim}"));
            ptr::null_mut()
        }
    }
}

/// Reads a `.poly` or `.smesh` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_read(path: *const c_char, out: *mut *mut SgPlc) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return fail(SG_ERR_NULL, "null output pointer");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match parse_input(std::path::Path::new(path)) {
            Ok(input) => {
                *out = Box::into_raw(Box::new(SgPlc(input.plc)));
                SG_OK
            }
            Err(e) => fail(io_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `plc` must come from `sg_plc_new`/`sg_plc_read` and not be used after.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_free(plc: *mut SgPlc) {
    if !plc.is_null() {
        drop(Box::from_raw(plc));
    }
}

/// Appends a vertex; `xyz` holds `dim` coordinates. Its index is written to
/// `index` when non-NULL.
///
/// # Safety
/// `plc` must be a live handle and `xyz` point at `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_add_vertex(plc: *mut SgPlc, xyz: *const c_double, index: *mut usize) -> SgStatus {
    if plc.is_null() || xyz.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    let plc = &mut (*plc).0;
    plc.vertices.push(point_arg(xyz, plc.dim));
    if !index.is_null() {
        *index = plc.vertices.len() - 1;
    }
    SG_OK
}

/// Adds a segment between two existing vertices.
///
/// # Safety
/// `plc` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_add_segment(plc: *mut SgPlc, a: usize, b: usize) -> SgStatus {
    if plc.is_null() {
        return fail(SG_ERR_NULL, "null plc");
    }
    let plc = &mut (*plc).0;
    let n = plc.vertices.len();
    if a >= n || b >= n {
        return fail(SG_ERR_ARGUMENT, format!("segment ({a}, {b}) references a missing vertex (have {n})"));
    }
    plc.segments.push([a, b]);
    SG_OK
}

/// Adds a planar polygonal facet (3D only) given as a vertex loop.
///
/// # Safety
/// `plc` must be a live handle and `loop_` point at `n` indices.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_add_facet(plc: *mut SgPlc, loop_: *const usize, n: usize) -> SgStatus {
    if plc.is_null() || loop_.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    let plc = &mut (*plc).0;
    if plc.dim != Dim::Three {
        return fail(SG_ERR_ARGUMENT, "facets need a 3D PLC");
    }
    let ids = std::slice::from_raw_parts(loop_, n).to_vec();
    if n < 3 || ids.iter().any(|&v| v >= plc.vertices.len()) {
        return fail(SG_ERR_ARGUMENT, "facet needs at least 3 existing vertices");
    }
    plc.facets.push(ids);
    SG_OK
}

/// Marks the region containing `xyz` as a hole.
///
/// # Safety
/// `plc` must be a live handle and `xyz` point at `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_add_hole(plc: *mut SgPlc, xyz: *const c_double) -> SgStatus {
    if plc.is_null() || xyz.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    let plc = &mut (*plc).0;
    let p = point_arg(xyz, plc.dim);
    plc.holes.push(p);
    SG_OK
}

/// Checks the PLC without refining it.
///
/// # Safety
/// `plc` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_plc_validate(plc: *const SgPlc) -> SgStatus {
    if plc.is_null() {
        return fail(SG_ERR_NULL, "null plc");
    }
    guard(|| match (*plc).0.validate() {
        Ok(()) => SG_OK,
        Err(e) => fail(SG_ERR_INVALID_PLC, e.to_string()),
    })
}

/// Default parameters for dimension 2 or 3; NULL otherwise.
#[no_mangle]
pub extern "C" fn sg_config_new(dim: c_int) -> *mut SgConfig {
    match dim_of(dim) {
        Some(d) => Box::into_raw(Box::new(SgConfig(RefinementConfig::for_dim(d)))),
        None => {
            set_error(format!("dimension must be 2 or 3, got {dim}"));
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `cfg` must come from `sg_config_new` and not be used after.
#[no_mangle]
pub unsafe extern "C" fn sg_config_free(cfg: *mut SgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn update(cfg: *mut SgConfig, f: impl FnOnce(RefinementConfig) -> RefinementConfig) -> SgStatus {
    if cfg.is_null() {
        return fail(SG_ERR_NULL, "null config");
    }
    let next = f((*cfg).0.clone());
    match next.validate() {
        Ok(()) => {
            (*cfg).0 = next;
            SG_OK
        }
        Err(e) => fail(SG_ERR_CONFIG, e.to_string()),
    }
}

/// Target radius-edge ratio; also resets the derived band and sliver
/// limits. The config is left unchanged if the result is inconsistent.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_rho_star(cfg: *mut SgConfig, rho_star: c_double) -> SgStatus {
    update(cfg, |c| c.with_rho_star(rho_star))
}

/// Sizing slack; also resets the band's upper end.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_alpha(cfg: *mut SgConfig, alpha: c_double) -> SgStatus {
    update(cfg, |c| c.with_alpha(alpha))
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_sigma_star(cfg: *mut SgConfig, sigma_star: c_double) -> SgStatus {
    update(cfg, |c| RefinementConfig { sigma_star, ..c })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_max_insertions(cfg: *mut SgConfig, max_insertions: usize) -> SgStatus {
    update(cfg, |c| RefinementConfig { max_insertions, ..c })
}

/// Nonzero enables the input preprocessing pass.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_preprocess(cfg: *mut SgConfig, on: c_int) -> SgStatus {
    update(cfg, |c| RefinementConfig { preprocess: on != 0, ..c })
}

/// # Safety
/// `cfg` must be a live handle and the value one of the declared enumerators.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_placement(cfg: *mut SgConfig, placement: SgPlacement) -> SgStatus {
    let placement = match placement {
        SgPlacement::SG_PLACEMENT_DISTANCE => PlacementMode::Distance,
        SgPlacement::SG_PLACEMENT_ANGLE => PlacementMode::Angle,
        SgPlacement::SG_PLACEMENT_CIRCUMCENTER => PlacementMode::Circumcenter,
    };
    update(cfg, |c| RefinementConfig { placement, ..c })
}

/// # Safety
/// `cfg` must be a live handle and the value one of the declared enumerators.
#[no_mangle]
pub unsafe extern "C" fn sg_config_set_mode(cfg: *mut SgConfig, mode: SgMode) -> SgStatus {
    let insertion = match mode {
        SgMode::SG_MODE_SINGLE => InsertionMode::Single,
        SgMode::SG_MODE_MULTI => InsertionMode::Multi,
    };
    update(cfg, |c| RefinementConfig { insertion, ..c })
}

/// Refines `plc` under `cfg`. On success `*out` receives a result handle.
///
/// # Safety
/// `plc` and `cfg` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_refine(plc: *const SgPlc, cfg: *const SgConfig, out: *mut *mut SgResult) -> SgStatus {
    if plc.is_null() || cfg.is_null() || out.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    guard(|| {
        let (plc, cfg) = (&(*plc).0, &(*cfg).0);
        if plc.dim != cfg.dim {
            return fail(SG_ERR_CONFIG, "configuration and PLC dimensions differ");
        }
        match refine(plc, cfg) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(SgResult(r)));
                SG_OK
            }
            Err(e) => fail(refine_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `res` must come from `sg_refine` and not be used after.
#[no_mangle]
pub unsafe extern "C" fn sg_result_free(res: *mut SgResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of output vertices (0 for NULL).
///
/// # Safety
/// `res` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_result_vertex_count(res: *const SgResult) -> usize {
    res.as_ref().map_or(0, |r| numbering(&r.0).0.len())
}

/// Number of output elements (0 for NULL).
///
/// # Safety
/// `res` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_result_element_count(res: *const SgResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.elements.len())
}

/// Copies vertex coordinates, `dim` per vertex, into `buf` (capacity `len`
/// doubles). Order matches the `.node` output.
///
/// # Safety
/// `res` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_result_vertices(res: *const SgResult, buf: *mut c_double, len: usize) -> SgStatus {
    if res.is_null() || buf.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    let out = &(*res).0;
    let d = out.plc.dim.n();
    let (ids, _) = numbering(out);
    if len < ids.len() * d {
        return fail(SG_ERR_BUFFER_TOO_SMALL, format!("need {} doubles", ids.len() * d));
    }
    let dst = std::slice::from_raw_parts_mut(buf, ids.len() * d);
    for (chunk, &v) in dst.chunks_mut(d).zip(&ids) {
        chunk.copy_from_slice(&out.mesh.point(v)[..d]);
    }
    SG_OK
}

/// Copies element vertex indices (0-based, into the vertex array),
/// `dim + 1` per element.
///
/// # Safety
/// `res` must be a live handle and `buf` hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn sg_result_elements(res: *const SgResult, buf: *mut usize, len: usize) -> SgStatus {
    if res.is_null() || buf.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    let out = &(*res).0;
    let k = out.plc.dim.arity();
    let need = out.elements.len() * k;
    if len < need {
        return fail(SG_ERR_BUFFER_TOO_SMALL, format!("need {need} indices"));
    }
    let (_, map) = numbering(out);
    let dst = std::slice::from_raw_parts_mut(buf, need);
    for (chunk, e) in dst.chunks_mut(k).zip(&out.elements) {
        for (slot, v) in chunk.iter_mut().zip(e) {
            *slot = map[v];
        }
    }
    SG_OK
}

/// Insertion log as JSON lines. Free with `sg_string_free`.
///
/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_result_events_jsonl(res: *const SgResult, out: *mut *mut c_char) -> SgStatus {
    if res.is_null() || out.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    guard(|| {
        *out = into_c_string((*res).0.events.to_jsonl());
        SG_OK
    })
}

/// Writes `<stem>.node`, `<stem>.ele` and, if `events` is non-NULL, the
/// event log with its manifest line.
///
/// # Safety
/// `res` and `cfg` must be live handles; paths NUL-terminated or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_result_write(
    res: *const SgResult,
    cfg: *const SgConfig,
    stem: *const c_char,
    events: *const c_char,
) -> SgStatus {
    if res.is_null() || cfg.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    guard(|| {
        let stem = match path_arg(stem) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let events = if events.is_null() {
            None
        } else {
            match path_arg(events) {
                Ok(s) => Some(s.into()),
                Err(s) => return s,
            }
        };
        let (out, cfg) = (&(*res).0, &(*cfg).0);
        let paths = OutputPaths {
            mesh: Some(stem.into()),
            events,
            ..OutputPaths::default()
        };
        let mut m = RunManifest::new(Vec::new(), cfg.clone());
        paths.record(&mut m);
        match write_output::<()>(out, cfg, &m, &paths, 1, None) {
            Ok(()) => SG_OK,
            Err(e) => fail(io_status(&e), e.to_string()),
        }
    })
}

/// Runs the audit suite. `*pass` is set to 1 or 0; when `report` is
/// non-NULL it receives the JSON report (free with `sg_string_free`).
///
/// # Safety
/// Handles must be live; `pass` writable; `report` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn sg_result_audit(
    plc: *const SgPlc,
    res: *const SgResult,
    cfg: *const SgConfig,
    baseline: c_int,
    pass: *mut c_int,
    report: *mut *mut c_char,
) -> SgStatus {
    if plc.is_null() || res.is_null() || cfg.is_null() || pass.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    guard(|| {
        let opts = AuditOptions { baseline: baseline != 0 };
        match run_audit(&(*plc).0, &(*res).0, &(*cfg).0, &opts) {
            Ok(r) => {
                *pass = c_int::from(r.pass);
                if !report.is_null() {
                    *report = into_c_string(serde_json::to_string_pretty(&r).expect("report serializes"));
                }
                SG_OK
            }
            Err(e) => fail(refine_status(&e), e.to_string()),
        }
    })
}

/// The event log with a manifest header line, as written by the CLI.
///
/// # Safety
/// `res` and `cfg` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_result_events_with_manifest(
    res: *const SgResult,
    cfg: *const SgConfig,
    out: *mut *mut c_char,
) -> SgStatus {
    if res.is_null() || cfg.is_null() || out.is_null() {
        return fail(SG_ERR_NULL, "null argument");
    }
    guard(|| {
        let m = RunManifest::new(Vec::new(), (*cfg).0.clone());
        *out = into_c_string(events_text(&(*res).0.events, &m));
        SG_OK
    })
}
