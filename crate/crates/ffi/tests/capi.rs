use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use bansim_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn last_error() -> String {
    let mut buf = vec![0 as libc::c_char; 512];
    unsafe { bansim_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn small_config(json: &str) -> *mut BansimConfig {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { bansim_config_from_json(text.as_ptr(), &mut cfg) }, BansimStatus::Ok);
    cfg
}

#[test]
fn scalar_functions() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(bansim_link_sinr(0.0, -60.0, ptr::null(), 0, -100.0, &mut v), BansimStatus::Ok);
        assert_eq!(v, 40.0);
        let g = [-60.0];
        assert_eq!(bansim_link_sinr(0.0, -60.0, g.as_ptr(), 1, -100.0, &mut v), BansimStatus::Ok);
        assert!((v - 10.0 * (1e-6f64 / (1e-6 + 1e-10)).log10()).abs() < 1e-12);
        assert_eq!(bansim_etx(0.0, &mut v), BansimStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(bansim_etx(1.0, &mut v), BansimStatus::Ok);
        assert!(v.is_infinite());
        assert_eq!(bansim_etx(1.5, &mut v), BansimStatus::InvalidArgument);
        assert_eq!(bansim_cdf(BansimFamily::Lognormal, 1.74, 1.22, 0.0, 5.7, &mut v), BansimStatus::Ok);
        assert!((v - 0.5).abs() < 1e-3);
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(bansim_etx(0.5, ptr::null_mut()), BansimStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(bansim_link_sinr(0.0, -60.0, ptr::null(), 3, -100.0, &mut 0.0), BansimStatus::NullPointer);
        assert_eq!(bansim_config_set_seed(ptr::null_mut(), 3), BansimStatus::NullPointer);
        assert_eq!(bansim_results_len(ptr::null()), 0);
        bansim_config_free(ptr::null_mut());
        bansim_results_free(ptr::null_mut());
    }
}

#[test]
fn config_round_trip_through_json() {
    let cfg = bansim_config_default();
    unsafe {
        assert_eq!(bansim_config_set_seed(cfg, 99), BansimStatus::Ok);
        let mut needed = 0;
        assert_eq!(bansim_config_to_json(cfg, ptr::null_mut(), 0, &mut needed), BansimStatus::BufferTooSmall);
        let mut buf = vec![0 as libc::c_char; needed + 1];
        assert_eq!(bansim_config_to_json(cfg, buf.as_mut_ptr(), buf.len(), &mut needed), BansimStatus::Ok);
        let json = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        let parsed = bansim::scenario::ScenarioConfig::from_json_str(json).unwrap();
        assert_eq!(parsed.seed, 99);
        bansim_config_free(cfg);
    }
}

#[test]
fn invalid_config_is_a_config_error() {
    let cfg = small_config(r#"{"duty_cycles_percent": [0.0]}"#);
    unsafe {
        assert_eq!(bansim_config_validate(cfg), BansimStatus::ConfigError);
        assert!(last_error().contains("duty cycle out of range"));
        let mut res = ptr::null_mut();
        assert_eq!(bansim_run(cfg, 0, 1, &mut res), BansimStatus::ConfigError);
        assert!(res.is_null());
        bansim_config_free(cfg);
    }
    let text = CString::new("{\"nope\": 1}").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { bansim_config_from_json(text.as_ptr(), &mut cfg) }, BansimStatus::ConfigError);
}

#[test]
fn run_matches_the_library() {
    let json = r#"{"trials": 3, "seed": 5, "time": {"total_time_ms": 6000}}"#;
    let cfg = small_config(json);
    let mut res = ptr::null_mut();
    unsafe {
        assert_eq!(bansim_run(cfg, 0, 1, &mut res), BansimStatus::Ok);
        assert_eq!(bansim_results_len(res), 10);
    }
    let direct = bansim::run::run_experiment(
        bansim::scenario::ScenarioConfig::from_json_str(json).unwrap(),
        bansim::run::RunOptions::default(),
    )
    .unwrap();
    for (i, want) in direct.iter().enumerate() {
        let mut e = std::mem::MaybeUninit::<BansimEntry>::uninit();
        let mut g = vec![0.0; 200];
        let mut p = vec![0.0; 200];
        let mut n = 0;
        unsafe {
            assert_eq!(bansim_results_entry(res, i, e.as_mut_ptr()), BansimStatus::Ok);
            let e = e.assume_init();
            assert_eq!(e.duty_cycle_percent, want.duty_cycle_percent);
            assert_eq!(e.has_fit, want.fit.is_ok());
            assert_eq!(bansim_results_outage(res, i, g.as_mut_ptr(), p.as_mut_ptr(), 200, &mut n), BansimStatus::Ok);
        }
        assert_eq!(n, want.outage.points.len());
        for (k, pt) in want.outage.points.iter().enumerate() {
            assert_eq!((g[k], p[k]), (pt.gamma_th_db, pt.p_out));
        }
    }
    unsafe {
        let mut e = std::mem::MaybeUninit::<BansimEntry>::uninit();
        assert_eq!(bansim_results_entry(res, 10, e.as_mut_ptr()), BansimStatus::InvalidArgument);
        let mut n = 0;
        assert_eq!(
            bansim_results_pdr(res, 0, ptr::null_mut(), ptr::null_mut(), 0, &mut n),
            BansimStatus::BufferTooSmall
        );
        assert_eq!(n, 15);
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(bansim_results_write(res, path.as_ptr()), BansimStatus::Ok);
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("outage_cmr_8.3.csv").exists());
        bansim_results_free(res);
        bansim_config_free(cfg);
    }
}

#[test]
fn fitting_through_the_c_api() {
    let truth = bansim::distfit::ModelKind::Lognormal { mu: 1.304, sigma: 1.11 };
    let xs = truth.sample_n(&mut ChaCha8Rng::seed_from_u64(1), 20_000);
    let mut fit = std::mem::MaybeUninit::<BansimFit>::uninit();
    unsafe {
        assert_eq!(bansim_fit(BansimFamily::Lognormal, xs.as_ptr(), xs.len(), fit.as_mut_ptr()), BansimStatus::Ok);
        let fit = fit.assume_init();
        assert!((fit.params[0] - 1.304).abs() < 0.03 && (fit.params[1] - 1.11).abs() < 0.03);
        assert_eq!(fit.params[2], 0.0);
        assert_eq!(fit.n_samples, xs.len());

        let mut best = std::mem::MaybeUninit::<BansimFit>::uninit();
        let mask = BANSIM_FAMILY_MASK_LOGNORMAL | BANSIM_FAMILY_MASK_INVERSE_GAUSSIAN;
        assert_eq!(bansim_best_fit(xs.as_ptr(), xs.len(), mask, best.as_mut_ptr()), BansimStatus::Ok);
        assert_eq!(best.assume_init().family, BansimFamily::Lognormal);

        let bad = [1.0, -1.0, 2.0];
        let mut out = std::mem::MaybeUninit::<BansimFit>::uninit();
        assert_eq!(bansim_fit(BansimFamily::Lognormal, bad.as_ptr(), 3, out.as_mut_ptr()), BansimStatus::InvalidArgument);
        let same = [2.0; 12];
        assert_eq!(bansim_fit(BansimFamily::InverseGaussian, same.as_ptr(), 12, out.as_mut_ptr()), BansimStatus::FitError);
        assert!(last_error().contains("degenerate"));
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(bansim_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/bansim.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "bansim_config_default",
        "bansim_config_from_json",
        "bansim_run",
        "bansim_results_outage",
        "bansim_results_free",
        "bansim_link_sinr",
        "bansim_best_fit",
        "typedef struct BansimConfig BansimConfig;",
        "BANSIM_STATUS_INVARIANT_VIOLATION = 5",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C client against the static library when a C
/// compiler and the archive are available.
#[test]
fn c_client_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = profile_dir.join("libbansim_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&archive)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
