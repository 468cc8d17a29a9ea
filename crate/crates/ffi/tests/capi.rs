use std::ffi::{CStr, CString};
use std::ptr;

use ration_lab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rl_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn closed_forms() {
    assert!((rl_kappa_p(1.0, 4) - 0.6).abs() < 1e-15);
    assert!((rl_kappa_a(1.0, 9) - 0.75).abs() < 1e-15);
    assert!((rl_kappa_tfr(1.0) - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-15);
    let mut g = RlGuarantees::default();
    assert_eq!(unsafe { rl_guarantees(2.0, 2, &mut g) }, RlStatus::Ok);
    assert_eq!(g.n, 2);
    assert!((g.kappa_p - 0.75).abs() < 1e-15 && (g.w_bar - 0.5).abs() < 1e-15);
    assert!((rl_ppa_decide(4.0 / 3.0, 1.0, 2.0 / 3.0) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(rl_tfr_decide(1.0, 4.0 / 3.0, 1.0), 1.0);
}

#[test]
fn hard_instance_round_trip() {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { rl_instance_hard(2, 2.0, &mut inst) }, RlStatus::Ok);
    assert!((unsafe { rl_instance_mu(inst) } - 2.0).abs() < 1e-12);
    assert_eq!(unsafe { rl_instance_agents(inst) }, 2);

    let spec = CString::new("ppa").unwrap();
    let mut pol = ptr::null_mut();
    assert_eq!(unsafe { rl_policy_build(spec.as_ptr(), inst, &mut pol) }, RlStatus::Ok);
    let mut rep = RlReport::default();
    assert_eq!(unsafe { rl_evaluate(inst, pol, 1, 0, &mut rep) }, RlStatus::Ok);
    assert!(rep.exact);
    assert!((rep.ex_post - 3.0 / 8.0).abs() < 1e-12);
    assert!((rep.ex_post_fairness - 0.75).abs() < 1e-12);
    assert!((rep.offline_ex_post - 9.0 / 16.0).abs() < 1e-12);
    unsafe {
        rl_policy_free(pol);
        rl_instance_free(inst);
    }
}

#[test]
fn json_instances_and_errors() {
    let json = CString::new(
        r#"{"agents":3,"supply":1,"model":{"finite_support":[{"prob":1.0,"demands":[0.5,0.3,0.4]}]}}"#,
    )
    .unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { rl_instance_from_json(json.as_ptr(), ptr::null(), &mut inst) },
        RlStatus::Ok
    );
    let spec = CString::new("ppa").unwrap();
    let mut pol = ptr::null_mut();
    assert_eq!(unsafe { rl_policy_build(spec.as_ptr(), inst, &mut pol) }, RlStatus::Ok);
    let mut rep = RlReport::default();
    assert_eq!(unsafe { rl_evaluate(inst, pol, 1, 0, &mut rep) }, RlStatus::Ok);
    assert!((rep.ex_post - 1.0 / 1.2).abs() < 1e-12);

    let bad = CString::new("tfr:7").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(
        unsafe { rl_policy_build(bad.as_ptr(), inst, &mut none) },
        RlStatus::InvalidArgument
    );
    assert!(none.is_null());
    assert!(last_error().contains("tau"));

    let broken = CString::new("{\"agents\":").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(
        unsafe { rl_instance_from_json(broken.as_ptr(), ptr::null(), &mut other) },
        RlStatus::InvalidInstance
    );
    assert_eq!(
        unsafe { rl_evaluate(ptr::null(), pol, 1, 0, &mut rep) },
        RlStatus::NullPointer
    );
    unsafe {
        rl_policy_free(pol);
        rl_instance_free(inst);
        rl_instance_free(ptr::null_mut());
    }
}

#[test]
fn lp_certificate() {
    let (mut p, mut c) = (0.0, 0.0);
    assert_eq!(unsafe { rl_lp_verify(3, 2.0, &mut p, &mut c) }, RlStatus::Ok);
    assert!((p - 1.0 / 3.0).abs() < 1e-9 && (c - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ration_lab.h"))
        .expect("header generated by the build script");
    for name in [
        "typedef struct RlInstance RlInstance;",
        "typedef struct RlPolicy RlPolicy;",
        "RL_STATUS_OK = 0",
        "rl_instance_from_json(",
        "rl_policy_build(",
        "rl_evaluate(",
        "rl_lp_verify(",
        "rl_last_error_message(void)",
        "rl_instance_free(",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Compiles `tests/c/smoke.c` against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let dir = env!("CARGO_MANIFEST_DIR");
    // Integration test binaries live in <target>/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libration_lab_ffi.a");
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let out = tempfile_path("rl_smoke");
    let status = std::process::Command::new("cc")
        .arg(format!("{dir}/tests/c/smoke.c"))
        .arg(format!("-I{dir}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = std::process::Command::new(&out).output().unwrap();
    assert!(run.status.success(), "smoke program exited with {:?}", run.status);
    assert!(!run.stdout.is_empty(), "error message should be printed");
    let _ = std::fs::remove_file(out);
}

fn tempfile_path(stem: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("{stem}_{}", std::process::id()))
}
