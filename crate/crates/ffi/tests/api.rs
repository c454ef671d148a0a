use std::ffi::{CStr, CString};
use std::ptr;

use snowglobe_ffi::*;
use SgStatus::*;

fn last_error() -> String {
    let p = sg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn rectangle(w: f64) -> *mut SgPlc {
    let plc = sg_plc_new(2);
    assert!(!plc.is_null());
    for p in [[0.0, 0.0], [w, 0.0], [w, 1.0], [0.0, 1.0]] {
        assert_eq!(sg_plc_add_vertex(plc, p.as_ptr(), ptr::null_mut()), SG_OK);
    }
    for i in 0..4 {
        assert_eq!(sg_plc_add_segment(plc, i, (i + 1) % 4), SG_OK);
    }
    plc
}

#[test]
fn refine_a_rectangle_through_the_c_api() {
    unsafe {
        let plc = rectangle(6.0);
        assert_eq!(sg_plc_validate(plc), SG_OK);
        let cfg = sg_config_new(2);
        let mut res = ptr::null_mut();
        assert_eq!(sg_refine(plc, cfg, &mut res), SG_OK);
        let nv = sg_result_vertex_count(res);
        let ne = sg_result_element_count(res);
        assert!(nv > 4 && ne > 2);

        let mut xy = vec![0.0; nv * 2];
        assert_eq!(sg_result_vertices(res, xy.as_mut_ptr(), 1), SG_ERR_BUFFER_TOO_SMALL);
        assert_eq!(sg_result_vertices(res, xy.as_mut_ptr(), xy.len()), SG_OK);
        let mut tri = vec![0usize; ne * 3];
        assert_eq!(sg_result_elements(res, tri.as_mut_ptr(), tri.len()), SG_OK);
        assert!(tri.iter().all(|&v| v < nv));
        // triangles tile the rectangle
        let area: f64 = tri
            .chunks(3)
            .map(|t| {
                let p = |i: usize| [xy[2 * t[i]], xy[2 * t[i] + 1]];
                let (a, b, c) = (p(0), p(1), p(2));
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
            })
            .sum();
        assert!((area - 6.0).abs() < 1e-9, "{area}");

        let mut pass = 0;
        let mut report = ptr::null_mut();
        assert_eq!(sg_result_audit(plc, res, cfg, 0, &mut pass, &mut report), SG_OK);
        assert_eq!(pass, 1);
        let json = CStr::from_ptr(report).to_str().unwrap();
        assert!(json.contains("\"pass\": true"));
        sg_string_free(report);

        let mut events = ptr::null_mut();
        assert_eq!(sg_result_events_jsonl(res, &mut events), SG_OK);
        assert!(CStr::from_ptr(events).to_str().unwrap().lines().count() > 0);
        sg_string_free(events);

        let dir = tempfile::tempdir().unwrap();
        let stem = CString::new(dir.path().join("rect.1").to_str().unwrap()).unwrap();
        assert_eq!(sg_result_write(res, cfg, stem.as_ptr(), ptr::null()), SG_OK);
        assert!(dir.path().join("rect.1.node").exists());
        assert!(dir.path().join("rect.1.ele").exists());

        sg_result_free(res);
        sg_config_free(cfg);
        sg_plc_free(plc);
    }
}

#[test]
fn bad_inputs_report_status_and_message() {
    unsafe {
        assert!(sg_plc_new(4).is_null());
        assert!(last_error().contains("dimension"));

        let plc = rectangle(1.0);
        assert_eq!(sg_plc_add_segment(plc, 0, 17), SG_ERR_ARGUMENT);
        assert!(last_error().contains("17"));

        let cfg = sg_config_new(2);
        assert_eq!(sg_config_set_alpha(cfg, 50.0), SG_ERR_CONFIG);
        assert!(last_error().contains("alpha"));
        assert_eq!(sg_config_set_alpha(cfg, 1.1), SG_OK);
        assert_eq!(sg_config_set_placement(cfg, SgPlacement::SG_PLACEMENT_CIRCUMCENTER), SG_OK);
        assert_eq!(sg_config_set_mode(cfg, SgMode::SG_MODE_MULTI), SG_OK);

        let cfg3 = sg_config_new(3);
        let mut res = ptr::null_mut();
        assert_eq!(sg_refine(plc, cfg3, &mut res), SG_ERR_CONFIG);
        assert!(res.is_null());
        assert_eq!(sg_refine(ptr::null(), cfg, &mut res), SG_ERR_NULL);

        let crossing = sg_plc_new(2);
        for p in [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]] {
            sg_plc_add_vertex(crossing, p.as_ptr(), ptr::null_mut());
        }
        sg_plc_add_segment(crossing, 0, 1);
        sg_plc_add_segment(crossing, 2, 3);
        assert_eq!(sg_refine(crossing, cfg, &mut res), SG_ERR_INVALID_PLC);

        sg_plc_free(crossing);
        sg_config_free(cfg3);
        sg_config_free(cfg);
        sg_plc_free(plc);
    }
}

#[test]
fn insertion_cap_and_missing_file() {
    unsafe {
        let plc = rectangle(10.0);
        let cfg = sg_config_new(2);
        assert_eq!(sg_config_set_max_insertions(cfg, 1), SG_OK);
        let mut res = ptr::null_mut();
        assert_eq!(sg_refine(plc, cfg, &mut res), SG_ERR_INSERTION_CAP);
        sg_config_free(cfg);
        sg_plc_free(plc);

        let path = CString::new("/nonexistent/input.poly").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(sg_plc_read(path.as_ptr(), &mut p), SG_ERR_IO);
        assert!(p.is_null());
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/snowglobe.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(
        &src,
        format!("#include \"{header}\"\nint main(void) {{ SgStatus s = SG_OK; (void)s; return 0; }}\n"),
    )
    .unwrap();
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
