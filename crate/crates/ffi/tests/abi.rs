use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use oss_lifecycle::learners::{train, Hyperparams, ModelDocument, Provenance, SvmParams, TreeParams};
use oss_lifecycle::Dataset;
use oss_lifecycle_ffi::*;

fn minirepo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/minirepo")
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = olc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two-feature model over `stars_count` and `fork_count`.
fn model_json(hp: Hyperparams) -> String {
    let rows: Vec<[f64; 2]> = (0..30).map(|i| [(i % 10) as f64 * 100.0, (i / 10) as f64]).collect();
    let y: Vec<usize> = (0..30).map(|i| i / 10).collect();
    let ds = Dataset::from_rows(&rows, y).unwrap();
    let model = train(&ds, &hp, 0).unwrap();
    ModelDocument::new(model, hp, vec!["stars_count".into(), "fork_count".into()], Provenance::default())
        .to_json()
        .unwrap()
}

fn load(json: &str) -> *mut OlcModel {
    let text = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { olc_model_from_json(text.as_ptr(), &mut m) }, OlcStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn version_and_metric_names() {
    let v = unsafe { CStr::from_ptr(olc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert_eq!(olc_metric_count(), 21);
    for i in 0..olc_metric_count() {
        assert!(!olc_metric_name(i).is_null());
    }
    assert!(olc_metric_name(21).is_null());
}

#[test]
fn features_from_archive() {
    let mut out = vec![f64::NAN; olc_metric_count()];
    let dir = cstr(&minirepo());
    assert_eq!(unsafe { olc_features_from_archive(dir.as_ptr(), ptr::null(), 365, out.as_mut_ptr()) }, OlcStatus::Ok);
    let get = |name: &str| {
        let i = (0..olc_metric_count())
            .find(|&i| unsafe { CStr::from_ptr(olc_metric_name(i)) }.to_str().unwrap() == name)
            .unwrap();
        out[i]
    };
    assert_eq!(get("commits"), 6.0);
    assert_eq!(get("stars_count"), 12.0);
    assert_eq!(get("bus_factor"), 1.0);

    let missing = cstr(&minirepo().join("nope"));
    let st = unsafe { olc_features_from_archive(missing.as_ptr(), ptr::null(), 365, out.as_mut_ptr()) };
    assert_eq!(st, OlcStatus::DataError);
    assert!(last_error().contains("nope"));

    let bad_time = CString::new("yesterday").unwrap();
    let st = unsafe { olc_features_from_archive(dir.as_ptr(), bad_time.as_ptr(), 365, out.as_mut_ptr()) };
    assert_eq!(st, OlcStatus::DataError);
}

#[test]
fn bus_factor_and_null_checks() {
    let counts = [50u64, 30, 20];
    let mut out = 0u64;
    assert_eq!(unsafe { olc_bus_factor(counts.as_ptr(), 3, 0.5, &mut out) }, OlcStatus::Ok);
    assert_eq!(out, 1);
    assert_eq!(unsafe { olc_bus_factor(counts.as_ptr(), 3, 0.0, &mut out) }, OlcStatus::DataError);
    assert_eq!(unsafe { olc_bus_factor(ptr::null(), 3, 0.5, &mut out) }, OlcStatus::NullPointer);
    assert_eq!(unsafe { olc_bus_factor(counts.as_ptr(), 3, 0.5, ptr::null_mut()) }, OlcStatus::NullPointer);
    assert_eq!(unsafe { olc_bus_factor(ptr::null(), 0, 0.5, &mut out) }, OlcStatus::Ok);
    assert_eq!(out, 0);
}

#[test]
fn model_handle_round_trip() {
    let m = load(&model_json(Hyperparams::DecisionTree(TreeParams::default())));
    unsafe {
        assert_eq!(olc_model_n_features(m), 2);
        assert_eq!(olc_model_n_classes(m), 3);
        assert_eq!(olc_model_class_code(m, 2), 2);
        assert_eq!(olc_model_class_code(m, 3), -1);
        assert_eq!(CStr::from_ptr(olc_model_feature_name(m, 0)).to_str().unwrap(), "stars_count");
        assert!(olc_model_feature_name(m, 2).is_null());

        let x = [0.0, 0.0, 300.0, 2.0];
        let mut pred = [9u32; 2];
        assert_eq!(olc_model_predict(m, x.as_ptr(), 2, 2, pred.as_mut_ptr()), OlcStatus::Ok);
        assert_eq!(pred, [0, 2]);
        let mut proba = [0.0f64; 6];
        assert_eq!(olc_model_predict_proba(m, x.as_ptr(), 2, 2, proba.as_mut_ptr()), OlcStatus::Ok);
        for row in proba.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(olc_model_predict(m, x.as_ptr(), 1, 3, pred.as_mut_ptr()), OlcStatus::DimensionMismatch);
        assert!(last_error().contains("dimension"));
        assert_eq!(olc_model_predict(ptr::null(), x.as_ptr(), 1, 2, pred.as_mut_ptr()), OlcStatus::NullPointer);
        olc_model_free(m);
        olc_model_free(ptr::null_mut());
    }
}

#[test]
fn svm_has_no_probabilities() {
    let m = load(&model_json(Hyperparams::Svm(SvmParams::default())));
    let x = [0.0, 0.0];
    let mut proba = [0.0f64; 3];
    unsafe {
        assert_eq!(olc_model_predict_proba(m, x.as_ptr(), 1, 2, proba.as_mut_ptr()), OlcStatus::Unsupported);
        olc_model_free(m);
    }
}

#[test]
fn bad_model_text_is_a_data_error() {
    let text = CString::new("{\"format_version\": 1}").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { olc_model_from_json(text.as_ptr(), &mut m) }, OlcStatus::DataError);
    assert!(m.is_null());
    let bytes = [0xffu8, 0xfe, 0];
    let st = unsafe { olc_model_from_json(bytes.as_ptr().cast(), &mut m) };
    assert_eq!(st, OlcStatus::InvalidUtf8);
}

#[test]
fn report_json_from_counts() {
    let labels = [2u32, 1, 0];
    let counts = [3u64, 0, 1, 0, 5, 1, 0, 1, 20];
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { olc_report_json(labels.as_ptr(), counts.as_ptr(), 3, &mut out) }, OlcStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { olc_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["accuracy"].as_f64().unwrap() - 28.0 / 31.0).abs() < 1e-12);
    assert_eq!(v["classes"][0]["name"], "graduated");
    let zeros = [0u64; 9];
    assert_eq!(unsafe { olc_report_json(labels.as_ptr(), zeros.as_ptr(), 3, &mut out) }, OlcStatus::DataError);
}

#[test]
fn errors_are_per_thread() {
    let counts = [1u64];
    let mut out = 0;
    assert_eq!(unsafe { olc_bus_factor(counts.as_ptr(), 1, 2.0, &mut out) }, OlcStatus::DataError);
    std::thread::spawn(|| assert!(olc_last_error_message().is_null())).join().unwrap();
    assert!(!olc_last_error_message().is_null());
    assert_eq!(unsafe { olc_bus_factor(counts.as_ptr(), 1, 0.5, &mut out) }, OlcStatus::Ok);
    assert!(olc_last_error_message().is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/oss_lifecycle.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

/// Builds tests/c/smoke.c against the static library and runs it.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liboss_lifecycle_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    std::fs::write(&model, model_json(Hyperparams::DecisionTree(TreeParams::default()))).unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).arg(minirepo()).arg(&model).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("commits=6\n"), "{stdout}");
    assert!(stdout.contains("bus_factor=1\n"));
    // the toy model splits on fork_count; 3 forks is past the class-2 training value
    assert!(stdout.contains("stage=2"), "{stdout}");
    assert!(stdout.contains("wrong_width=4"));
    assert!(stdout.contains("report_has_accuracy=1"));
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}
