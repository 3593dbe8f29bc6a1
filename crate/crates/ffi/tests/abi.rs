use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use crosskerr_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ck_last_error()) }.to_string_lossy().into_owned()
}

/// Two-call pattern: query the size, then fill.
fn read_string(f: impl Fn(*mut c_char, usize, *mut usize) -> CkStatus) -> String {
    let mut need = 0usize;
    assert_eq!(f(ptr::null_mut(), 0, &mut need), CkStatus::BufferTooSmall);
    let mut buf = vec![0u8; need];
    assert_eq!(f(buf.as_mut_ptr().cast(), buf.len(), &mut need), CkStatus::Ok);
    CStr::from_bytes_with_nul(&buf).unwrap().to_str().unwrap().to_owned()
}

fn config(json: &str, overrides: &[&str]) -> (CkStatus, *mut CkConfig) {
    let json = CString::new(json).unwrap();
    let ov: Vec<CString> = overrides.iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs: Vec<*const c_char> = ov.iter().map(|s| s.as_ptr()).collect();
    let mut out = ptr::null_mut();
    let st = unsafe { ck_config_new(json.as_ptr(), ptrs.as_ptr(), ptrs.len(), &mut out) };
    (st, out)
}

const SMALL: &str = r#"{"scenario":"fidelity-scan","knobs":{"checkpoint_only":true},
    "axes":[{"name":"beta_ss_mag","values":[100,200]}]}"#;

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ck_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_run_and_csv_roundtrip() {
    let (st, cfg) = config(SMALL, &["params.chi=0.002"]);
    assert_eq!(st, CkStatus::Ok, "{}", last_error());
    let json = read_string(|b, c, n| unsafe { ck_config_json(cfg, b, c, n) });
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["params"]["chi"], 0.002);
    let hash = read_string(|b, c, n| unsafe { ck_config_hash(cfg, b, c, n) });
    assert_eq!(hash.len(), 64);

    let mut run = ptr::null_mut();
    assert_eq!(unsafe { ck_run(cfg, 1, &mut run) }, CkStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { ck_run_exit_code(run) }, 0);
    let (mut nt, mut nw) = (0usize, 0usize);
    assert_eq!(unsafe { ck_run_counts(run, &mut nt, &mut nw) }, CkStatus::Ok);
    assert_eq!((nt, nw), (1, 0));
    let name = read_string(|b, c, n| unsafe { ck_run_output_name(run, 0, b, c, n) });
    assert_eq!(name, "fidelity_scan");
    let mut need = 0;
    assert_eq!(unsafe { ck_run_output_name(run, 1, ptr::null_mut(), 0, &mut need) }, CkStatus::NotFound);

    let cname = CString::new(name).unwrap();
    let csv = read_string(|b, c, n| unsafe { ck_run_csv(run, cname.as_ptr(), b, c, n) });
    assert!(csv.starts_with("# {"));
    assert!(csv.contains(&hash));
    // header plus one checkpoint row per point
    assert_eq!(csv.lines().count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ck_run_write(run, d.as_ptr()) }, CkStatus::Ok, "{}", last_error());
    assert_eq!(std::fs::read_to_string(dir.path().join("fidelity_scan.csv")).unwrap(), csv);
    assert!(dir.path().join("manifest.json").exists());

    unsafe {
        ck_run_free(run);
        ck_config_free(cfg);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let (st, cfg) = config("{not json", &[]);
    assert_eq!(st, CkStatus::Config);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());

    let (st, _) = config(r#"{"scenario":"fidelity-scan","bogus":1}"#, &[]);
    assert_eq!(st, CkStatus::Config);
    assert!(last_error().contains("bogus"), "{}", last_error());

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ck_config_new(ptr::null(), ptr::null(), 0, &mut out) }, CkStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { ck_config_new(bad.as_ptr().cast(), ptr::null(), 0, &mut out) },
        CkStatus::InvalidUtf8
    );
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ck_run(ptr::null(), 1, &mut r) }, CkStatus::NullPointer);
    assert_eq!(unsafe { ck_run_exit_code(ptr::null()) }, -1);

    let mut f = 0.0;
    assert_eq!(unsafe { ck_fidelity_closed_form(1, 0.001, 100.0, 0.0, 1.0, &mut f) }, CkStatus::Numerical);
    assert_eq!(unsafe { ck_fidelity_closed_form(1, 0.001, 100.0, 1.0, 0.0, &mut f) }, CkStatus::Ok);
    assert_eq!(last_error(), "");
    assert!((f - 1.0).abs() < 1e-15);

    unsafe {
        ck_config_free(ptr::null_mut());
        ck_run_free(ptr::null_mut());
    }
}

#[test]
fn plus_minus_probabilities_sum_to_one() {
    let (mut p, mut m) = (0.0, 0.0);
    assert_eq!(unsafe { ck_plus_minus_probabilities(1.5, -0.3, 0.7, &mut p, &mut m) }, CkStatus::Ok);
    let expect = 0.5 * (1.0 + (-(1.5f64.powi(2) + 0.09) / 2.0).exp() * 0.7f64.cos());
    assert!((p - expect).abs() < 1e-15);
    assert!((p + m - 1.0).abs() < 1e-15);
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/crosskerr.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["ck_config_new", "ck_run", "ck_run_csv", "ck_last_error", "CK_STATUS_BUFFER_TOO_SMALL"] {
        assert!(text.contains(sym), "{sym} missing from the header");
    }
    let Ok(st) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(st.success());
}
