use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use linfx_ffi::*;

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { lx_string_free(p) };
    s
}

#[test]
fn diagonal_round_trip() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(lx_gen_diagonal(8, 8, 1.0, &mut inst), LxStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(lx_run(inst, ptr::null(), &mut res), LxStatus::Ok);
        assert_eq!(lx_result_m(res), 8);
        assert_eq!(lx_result_distance(res), 1.0);
        assert_eq!((lx_result_upper(res), lx_result_lower_cert(res)), (1.0, 1.0));
        let json = take_string(lx_result_to_json(res));
        assert!(json.contains("\"L_exact\": 1.0"));
        lx_result_free(res);
        lx_instance_free(inst);
    }
}

#[test]
fn instance_json_survives_the_boundary() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(lx_gen_prop1(20, 32, 0.5, 0.2, 3, &mut inst), LxStatus::Ok);
        let text = take_string(lx_instance_to_json(inst));
        let c = CString::new(text.clone()).unwrap();
        let mut again = ptr::null_mut();
        assert_eq!(lx_instance_from_json(c.as_ptr(), &mut again), LxStatus::Ok);
        assert_eq!(take_string(lx_instance_to_json(again)), text);
        lx_instance_free(inst);
        lx_instance_free(again);
    }
}

#[test]
fn failures_set_status_and_last_error() {
    unsafe {
        let mut inst = ptr::null_mut();
        assert_eq!(lx_gen_diagonal(4, 4, 0.5, &mut inst), LxStatus::Ok);
        let mut cfg = lx_config_default();
        cfg.eta = 0.7;
        let mut res = ptr::null_mut();
        assert_eq!(lx_run(inst, &cfg, &mut res), LxStatus::Invalid);
        assert!(res.is_null());
        let err = take_string(lx_last_error_json());
        let v: serde_json::Value = serde_json::from_str(&err).unwrap();
        assert_eq!(v["stage"], "extract");
        assert_eq!(v["kind"], "precondition");
        assert!(take_string(lx_last_error_message()).contains("eta"));
        lx_instance_free(inst);

        assert_eq!(lx_run(ptr::null(), ptr::null(), &mut res), LxStatus::NullPointer);
        assert_eq!(lx_instance_from_json(ptr::null(), &mut inst), LxStatus::NullPointer);
        assert_eq!(lx_result_m(ptr::null()), 0);
        assert!(lx_result_distance(ptr::null()).is_nan());
        lx_result_free(ptr::null_mut());
        lx_instance_free(ptr::null_mut());
        lx_string_free(ptr::null_mut());
    }
}

#[test]
fn defaults_match_the_cli() {
    let c = lx_config_default();
    assert_eq!((c.eta, c.gamma_cut, c.c, c.budget), (0.1, 0.3, 4.0, 64));
    assert!(c.full_set_first && c.exact);
}

/// `target/<profile>` of the running test binary.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = profile_dir().join("liblinfx_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = std::env::temp_dir().join(format!("linfx_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "smoke exited with {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
