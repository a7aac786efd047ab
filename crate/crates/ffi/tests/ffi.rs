use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use identik::synth::{generate, SynthGroup, SynthSpec};
use identik_ffi::*;

fn dataset_files(dir: &Path) -> (CString, CString) {
    let spec = SynthSpec {
        groups: vec![SynthGroup::new("C", "F", 30, 3), SynthGroup::new("C", "M", 20, 2)],
        dimension: 16,
        within_subject_concentration: 2.0,
        between_subject_concentration: 0.0,
        rng_seed: 5,
    };
    let (records, store) = generate(&spec).unwrap();
    let m = dir.join("manifest.csv");
    let e = dir.join("embeddings.emb");
    identik::ingest::write_manifest(&records, &m).unwrap();
    identik::ingest::write_embeddings(&store, &e).unwrap();
    (
        CString::new(m.to_str().unwrap()).unwrap(),
        CString::new(e.to_str().unwrap()).unwrap(),
    )
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(identik_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn full_pipeline_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = dataset_files(dir.path());
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(identik_dataset_open(m.as_ptr(), e.as_ptr(), &mut ds), IdentikStatus::Ok);
        assert_eq!(identik_dataset_image_count(ds), 130);

        let mut split = ptr::null_mut();
        assert_eq!(identik_split_full(ds, &mut split), IdentikStatus::Ok);
        assert_eq!(identik_split_probe_count(split), 50);
        assert_eq!(identik_split_gallery_count(split), 80);

        let mut results = ptr::null_mut();
        assert_eq!(identik_rank_one(ds, split, 2, &mut results), IdentikStatus::Ok);
        assert_eq!(identik_results_len(results), 50);
        let mut pair = IdentikScorePair::default();
        assert_eq!(identik_results_scores(results, 0, &mut pair), IdentikStatus::Ok);
        assert!(pair.has_mated && pair.has_nonmated && pair.mated > pair.nonmated);
        assert_eq!(
            identik_results_scores(results, 50, &mut pair),
            IdentikStatus::OutOfRange
        );

        let (race, gender) = (CString::new("C").unwrap(), CString::new("F").unwrap());
        let mut json = ptr::null_mut();
        let status = identik_results_report_json(results, race.as_ptr(), gender.as_ptr(), 0.001, &mut json);
        assert_eq!(status, IdentikStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["schema"], "identik-report/1");
        assert_eq!(v["n_probes"], 30);
        identik_string_free(json);

        identik_results_free(results);
        identik_split_free(split);
        identik_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = dataset_files(dir.path());
    let missing = CString::new("/nonexistent/manifest.csv").unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            identik_dataset_open(missing.as_ptr(), e.as_ptr(), &mut ds),
            IdentikStatus::Io
        );
        assert!(last_error().contains("nonexistent"));
        assert_eq!(
            identik_dataset_open(ptr::null(), e.as_ptr(), &mut ds),
            IdentikStatus::NullArgument
        );
        assert!(ds.is_null());

        std::fs::write(dir.path().join("manifest.csv"), "wrong,header\n").unwrap();
        assert_eq!(
            identik_dataset_open(m.as_ptr(), e.as_ptr(), &mut ds),
            IdentikStatus::DataError
        );

        let (m, e) = dataset_files(dir.path());
        assert_eq!(identik_dataset_open(m.as_ptr(), e.as_ptr(), &mut ds), IdentikStatus::Ok);
        let mut split = ptr::null_mut();
        assert_eq!(
            identik_split_balanced(ds, 21, 1, 0, &mut split),
            IdentikStatus::Insufficient
        );
        assert!(last_error().contains("C M"));
        assert_eq!(identik_split_balanced(ds, 20, 1, 0, &mut split), IdentikStatus::Ok);
        assert_eq!(identik_split_probe_count(split), 40);
        identik_split_free(split);
        identik_dataset_free(ds);

        identik_dataset_free(ptr::null_mut());
        assert_eq!(identik_dataset_image_count(ptr::null()), 0);
    }
}

#[test]
fn metric_functions_over_arrays() {
    let a = [0.9, 0.8, 0.7];
    let b = [0.3, 0.2, 0.1];
    let mut out = 0.0;
    unsafe {
        assert_eq!(
            identik_d_prime(a.as_ptr(), 3, b.as_ptr(), 3, &mut out),
            IdentikStatus::Ok
        );
        let sd = (2.0f64 / 300.0).sqrt();
        assert!((out - 0.6 / sd).abs() < 1e-12);

        let flat = [0.5, 0.5];
        assert_eq!(
            identik_d_prime(flat.as_ptr(), 2, flat.as_ptr(), 2, &mut out),
            IdentikStatus::MetricUndefined
        );

        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(identik_quantile(s.as_ptr(), 100, 0.07, &mut out), IdentikStatus::Ok);
        assert_eq!(out, 7.0);
        assert_eq!(
            identik_quantile(ptr::null(), 0, 0.5, &mut out),
            IdentikStatus::MetricUndefined
        );
        assert_eq!(
            identik_quantile(s.as_ptr(), 100, 1.5, &mut out),
            IdentikStatus::InvalidArgument
        );

        assert_eq!(
            identik_delta_tail(a.as_ptr(), 3, b.as_ptr(), 3, 0.001, &mut out),
            IdentikStatus::Ok
        );
        assert!((out - 0.4).abs() < 1e-12);

        assert_eq!(
            identik_threshold_for_fmr(s.as_ptr(), 100, 0.1, &mut out),
            IdentikStatus::Ok
        );
        assert_eq!(out, 91.0);
        assert_eq!(
            identik_d_prime(a.as_ptr(), 3, b.as_ptr(), 3, ptr::null_mut()),
            IdentikStatus::NullArgument
        );
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(identik_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("identik.h")).unwrap();
    for name in [
        "identik_dataset_open",
        "identik_rank_one",
        "identik_results_report_json",
        "IDENTIK_STATUS_OK",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let lib = target_dir().join("libidentik_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let (m, e) = dataset_files(dir.path());
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "identik.h"
int main(int argc, char **argv) {
    IdentikDataset *ds = NULL;
    IdentikSplit *split = NULL;
    IdentikResults *res = NULL;
    if (identik_dataset_open(argv[1], argv[2], &ds) != IDENTIK_STATUS_OK) {
        fprintf(stderr, "%s\n", identik_last_error_message());
        return 1;
    }
    if (identik_split_full(ds, &split) != IDENTIK_STATUS_OK) return 2;
    if (identik_rank_one(ds, split, 0, &res) != IDENTIK_STATUS_OK) return 3;
    printf("%zu\n", identik_results_len(res));
    identik_results_free(res);
    identik_split_free(split);
    identik_dataset_free(ds);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler (cc) is required for this test");
    assert!(status.success());
    let out = Command::new(&exe)
        .arg(m.to_str().unwrap())
        .arg(e.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "50");
}
