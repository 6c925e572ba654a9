use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use bistab::fpe::{fpe_first_moment, hyp0f2};
use bistab::master::{model_steady_state, observables};
use bistab::models::{device_preset, fig2_params, ghz, Model};
use bistab_ffi::*;
use num_complex::Complex64;

fn preset(name: &str) -> *mut BistabParams {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { bistab_params_preset(name.as_ptr(), &mut p) }, BistabStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { bistab_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn critical_photon_number_matches_library() {
    let p = preset("FIG2");
    let mut n = 0.0;
    assert_eq!(unsafe { bistab_critical_photon_number(p, &mut n) }, BistabStatus::Ok);
    assert!((n - 1.0 / (4.0 * 0.14f64.powi(2))).abs() < 1e-9);
    unsafe { bistab_params_free(p) };
}

#[test]
fn meanfield_roots_report_an_unstable_middle_branch() {
    let p = preset("FIG2");
    let mut count = 0;
    let status = unsafe { bistab_meanfield_roots(p, ptr::null_mut(), ptr::null_mut(), 0, &mut count) };
    assert_eq!(status, BistabStatus::BufferTooSmall);
    assert_eq!(count, 3);
    let (mut n, mut s) = ([0.0; 3], [0i32; 3]);
    let status = unsafe { bistab_meanfield_roots(p, n.as_mut_ptr(), s.as_mut_ptr(), 3, &mut count) };
    assert_eq!(status, BistabStatus::Ok);
    assert_eq!(s, [1, 0, 1]);
    assert!(n[0] < n[1] && n[1] < n[2]);
    unsafe { bistab_params_free(p) };
}

#[test]
fn steady_observables_match_library() {
    let p = preset("FIG2");
    let mut o = BistabObservables::default();
    assert_eq!(unsafe { bistab_steady_observables(p, BistabModel::Jc, 0, 20, &mut o) }, BistabStatus::Ok);
    let (spec, rho) = model_steady_state(&fig2_params(), Model::Jc, 20).unwrap();
    let r = observables(&rho, &spec).unwrap();
    assert_eq!(o.n_photon, r.n_photon);
    assert_eq!(o.re_a, r.alpha.re);
    assert_eq!(o.sigma_z, r.sigma_z.unwrap());

    assert_eq!(unsafe { bistab_steady_observables(p, BistabModel::Duffing, 0, 20, &mut o) }, BistabStatus::Ok);
    assert!(o.abs_sigma_minus.is_nan());
    unsafe { bistab_params_free(p) };
}

#[test]
fn drive_setter_and_fpe_match_library() {
    let p = preset("D2");
    assert_eq!(unsafe { bistab_params_set_drive(p, 10.59, 2.0) }, BistabStatus::Ok);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { bistab_fpe_first_moment(p, &mut re, &mut im) }, BistabStatus::Ok);
    let want = fpe_first_moment(&device_preset("D2").unwrap().with_drive_frequency(ghz(10.59)).with_drive_scale(2.0))
        .unwrap();
    assert_eq!((re, im), (want.re, want.im));
    unsafe { bistab_params_free(p) };
}

#[test]
fn hyp0f2_matches_library_and_reports_poles() {
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { bistab_hyp0f2(1.5, 0.2, 2.0, -0.3, 3.0, 1.0, &mut re, &mut im) }, BistabStatus::Ok);
    let want = hyp0f2(Complex64::new(1.5, 0.2), Complex64::new(2.0, -0.3), Complex64::new(3.0, 1.0)).unwrap();
    assert_eq!((re, im), (want.re, want.im));
    assert_eq!(unsafe { bistab_hyp0f2(-2.0, 0.0, 1.0, 0.0, 1.0, 0.0, &mut re, &mut im) }, BistabStatus::Numerical);
    assert!(last_error().contains("Pochhammer"));
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    let name = CString::new("D9").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { bistab_params_preset(name.as_ptr(), &mut p) }, BistabStatus::UnknownPreset);
    assert!(p.is_null());
    assert!(last_error().contains("D9"));

    assert_eq!(unsafe { bistab_params_preset(ptr::null(), &mut p) }, BistabStatus::NullPointer);
    let mut n = 0.0;
    assert_eq!(unsafe { bistab_critical_photon_number(ptr::null(), &mut n) }, BistabStatus::NullPointer);

    let status = unsafe { bistab_params_new(10.0, 9.0, 0.1, -0.2, -1e-3, 1e-3, 0.0, 0.0, &mut p) };
    assert_eq!(status, BistabStatus::InvalidArgument);
    let status = unsafe { bistab_params_new(10.0, 9.0, 0.1, -0.2, 1e-3, 1e-3, 0.0, 0.0, &mut p) };
    assert_eq!(status, BistabStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { bistab_params_free(p) };
    unsafe { bistab_params_free(ptr::null_mut()) };
}

#[test]
fn last_error_truncates_to_the_buffer() {
    let name = CString::new("nope").unwrap();
    let mut p = ptr::null_mut();
    unsafe { bistab_params_preset(name.as_ptr(), &mut p) };
    let mut buf = [1 as c_char; 4];
    let n = unsafe { bistab_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 3);
    assert_eq!(buf[3], 0);
}

/// The static library cargo built alongside this test binary.
fn static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().join("libbistab_ffi.a")
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/bistab.h")).unwrap();
    for f in ["bistab_params_preset", "bistab_steady_observables", "bistab_hyp0f2", "bistab_last_error"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    let lib = static_lib();
    if !lib.exists() {
        eprintln!("static library not built at {}; skipping link step", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("no C compiler `{cc}`; skipping link step");
        return;
    };
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("12.755102 3 0"), "{text}");
}
