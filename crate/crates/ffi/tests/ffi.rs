use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use oufreq_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(oufreq_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn reference(eps: f64, seed: u64) -> *mut OufreqModel {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(oufreq_model_new_reference(eps, &mut m), OufreqStatus::Ok);
        assert_eq!(oufreq_model_set_seed(m, seed), OufreqStatus::Ok);
    }
    m
}

#[test]
fn round_trip_matches_library() {
    let model = reference(0.05, 11);
    let mut path = ptr::null_mut();
    unsafe {
        assert_eq!(oufreq_simulate(model, &mut path), OufreqStatus::Ok);
        let n = oufreq_path_len(path);
        assert_eq!(n, 12001);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        assert_eq!(oufreq_path_copy_x(path, x.as_mut_ptr(), n), OufreqStatus::Ok);
        assert_eq!(oufreq_path_copy_y(path, y.as_mut_ptr(), n), OufreqStatus::Ok);

        let cfg = oufreq::ModelConfig::reference(0.05).with_seed(11);
        let spec = oufreq::SignalSpec::default();
        let direct = oufreq::simulate(&cfg, &spec).unwrap();
        assert_eq!(x, direct.obs.x);
        assert_eq!(y, direct.y);
        assert_eq!(oufreq_path_step(path), cfg.step);

        let mut ll = 0.0;
        assert_eq!(oufreq_log_likelihood(model, path, 1.02, &mut ll), OufreqStatus::Ok);
        let expected = oufreq::inference::log_likelihood(1.02, &direct.obs, &cfg, &spec).unwrap();
        assert_eq!(ll, expected);

        let (mut sc, mut fi, mut i0) = (0.0, 0.0, 0.0);
        assert_eq!(oufreq_score(model, path, 1.0, &mut sc), OufreqStatus::Ok);
        assert_eq!(oufreq_fisher_eps(model, path, 1.0, &mut fi), OufreqStatus::Ok);
        assert_eq!(oufreq_fisher_limit(model, 1.0, &mut i0), OufreqStatus::Ok);
        assert!(sc.is_finite() && fi > 0.0);
        assert!((i0 - 3288.618).abs() < 1e-2);

        let mut est = OufreqEstimate::default();
        assert_eq!(oufreq_mle(model, path, &mut est), OufreqStatus::Ok);
        assert!((est.theta_hat - 1.0).abs() < 0.05);
        assert!(est.se_hat > 0.0);
        assert_eq!(last_error(), "");

        oufreq_path_free(path);
        oufreq_model_free(model);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(oufreq_model_new_reference(-1.0, &mut m), OufreqStatus::InvalidConfig);
        assert!(m.is_null());
        assert!(last_error().contains("epsilon"));

        assert_eq!(oufreq_model_new_reference(0.05, ptr::null_mut()), OufreqStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(oufreq_fisher_limit(ptr::null(), 1.0, &mut out), OufreqStatus::NullPointer);

        let bad = CString::new(r#"{"model": {"oops": 1}}"#).unwrap();
        assert_eq!(oufreq_model_from_json(bad.as_ptr(), &mut m), OufreqStatus::InvalidConfig);
        assert!(last_error().contains("oops"));

        let good = CString::new(r#"{"model": {"epsilon": 0.1, "seed": 3}}"#).unwrap();
        assert_eq!(oufreq_model_from_json(good.as_ptr(), &mut m), OufreqStatus::Ok, "{}", last_error());
        let mut p = ptr::null_mut();
        assert_eq!(oufreq_simulate(m, &mut p), OufreqStatus::Ok);
        let mut small = [0.0; 4];
        assert_eq!(
            oufreq_path_copy_x(p, small.as_mut_ptr(), small.len()),
            OufreqStatus::BufferTooSmall
        );

        // a path from a different grid is rejected
        let other = reference(0.05, 1);
        assert_eq!(oufreq_log_likelihood(other, p, 1.0, &mut out), OufreqStatus::InvalidConfig);

        assert_eq!(oufreq_path_len(ptr::null()), 0);
        oufreq_path_free(ptr::null_mut());
        oufreq_model_free(ptr::null_mut());
        oufreq_path_free(p);
        oufreq_model_free(m);
        oufreq_model_free(other);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(oufreq_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    })
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/oufreq.h");
    for lang in ["c", "c++"] {
        let status = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
            .unwrap();
        assert!(status.success(), "{lang}");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liboufreq_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("demo");
    let status = Command::new(cc)
        .arg(dir.join("examples/demo.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("points 12001 "), "{text}");
}
