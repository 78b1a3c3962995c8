//! Exercises the C entry points from Rust: a full run against a synthetic
//! panel, the accessor surface, and the error statuses.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use pricelab_ffi::*;

fn text(ptr: *const c_char) -> String {
    assert!(!ptr.is_null());
    unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_string()
}

fn write_panel(dir: &std::path::Path) -> CString {
    let recipe = pricelab::synth::PanelRecipe::constant(6, 2, 8, 42);
    let records = pricelab::synth::generate(&recipe).unwrap();
    let mut buffer = Vec::new();
    pricelab::synth::write_transactions(&records, &mut buffer).unwrap();
    let path = dir.join("panel.csv");
    std::fs::write(&path, buffer).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn run_round_trip_through_the_handles() {
    let dir = tempfile::TempDir::new().unwrap();
    let input = write_panel(dir.path());
    let inputs = [input.as_ptr()];
    let out_dir = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let options = CString::new(r#"{"aggregate": "subgroup"}"#).unwrap();

    let mut run: *mut PlRun = ptr::null_mut();
    let status = unsafe {
        pl_run(inputs.as_ptr(), inputs.len(), out_dir.as_ptr(), options.as_ptr(), &mut run)
    };
    assert_eq!(status, PlStatus::Ok);
    assert!(!run.is_null());

    unsafe {
        assert_eq!(pl_run_series_count(run), 4);
        let names: Vec<String> = (0..4).map(|i| text(pl_run_series_name(run, i))).collect();
        assert_eq!(names, ["g1", "g2", "g3", "total"]);

        let manifest = text(pl_run_manifest_json(run));
        assert!(manifest.contains("\"rejected\": 0"), "{manifest}");
        assert!(manifest.contains("\"aggregate\": \"subgroup\""), "{manifest}");

        let mut series: *mut PlSeries = ptr::null_mut();
        assert_eq!(pl_run_open_series(run, 3, &mut series), PlStatus::Ok);
        pl_run_free(run);

        // The copy outlives the run it came from.
        assert_eq!(text(pl_series_name(series)), "total");
        assert_eq!(pl_series_len(series), 8);
        assert_eq!(text(pl_series_month(series, 0)), "2020-01");
        assert_eq!(text(pl_series_month(series, 7)), "2020-08");
        for i in 0..8 {
            let mut value = f64::NAN;
            assert_eq!(pl_series_value(series, i, &mut value), PlStatus::Ok);
            assert_eq!(value, 1.0, "constant panel point {i}");
        }
        pl_series_free(series);
    }

    // The run also left its artifacts on disk.
    for artifact in ["series.csv", "manifest.json", "rejects.csv"] {
        assert!(dir.path().join("out").join(artifact).exists(), "{artifact}");
    }
}

#[test]
fn statuses_cover_the_failure_modes() {
    let dir = tempfile::TempDir::new().unwrap();
    let input = write_panel(dir.path());
    let inputs = [input.as_ptr()];
    let out_dir = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let mut run: *mut PlRun = ptr::null_mut();

    unsafe {
        // Null pointers.
        let status = pl_run(ptr::null(), 0, out_dir.as_ptr(), ptr::null(), &mut run);
        assert_eq!(status, PlStatus::NullArgument);
        assert!(text(pl_last_error()).contains("inputs"));
        assert_eq!(
            pl_run(inputs.as_ptr(), 1, out_dir.as_ptr(), ptr::null(), ptr::null_mut()),
            PlStatus::NullArgument
        );

        // Malformed and invalid options.
        let garbled = CString::new("not json").unwrap();
        let status = pl_run(inputs.as_ptr(), 1, out_dir.as_ptr(), garbled.as_ptr(), &mut run);
        assert_eq!(status, PlStatus::Usage);
        assert!(text(pl_last_error()).contains("options"));
        let unknown = CString::new(r#"{"index": "median"}"#).unwrap();
        let status = pl_run(inputs.as_ptr(), 1, out_dir.as_ptr(), unknown.as_ptr(), &mut run);
        assert_eq!(status, PlStatus::Usage);

        // Unreadable input.
        let missing = CString::new(dir.path().join("absent.csv").to_str().unwrap()).unwrap();
        let gone = [missing.as_ptr()];
        let status = pl_run(gone.as_ptr(), 1, out_dir.as_ptr(), ptr::null(), &mut run);
        assert_eq!(status, PlStatus::Data);
        assert!(text(pl_last_error()).contains("absent.csv"));

        // Non-UTF-8 argument.
        let latin1 = CString::new(vec![0xffu8, 0xfe]).unwrap();
        let status = pl_run(inputs.as_ptr(), 1, latin1.as_ptr(), ptr::null(), &mut run);
        assert_eq!(status, PlStatus::InvalidUtf8);

        // Accessors on null handles stay inert.
        assert_eq!(pl_run_series_count(ptr::null()), 0);
        assert!(pl_run_series_name(ptr::null(), 0).is_null());
        assert!(pl_run_manifest_json(ptr::null()).is_null());
        assert_eq!(pl_series_len(ptr::null()), 0);
        assert!(pl_series_month(ptr::null(), 0).is_null());
        pl_run_free(ptr::null_mut());
        pl_series_free(ptr::null_mut());

        // A successful default run, then out-of-range accesses.
        let status = pl_run(inputs.as_ptr(), 1, out_dir.as_ptr(), ptr::null(), &mut run);
        assert_eq!(status, PlStatus::Ok);
        assert_eq!(pl_run_series_count(run), 1);
        assert_eq!(text(pl_run_series_name(run, 0)), "all");
        let mut series: *mut PlSeries = ptr::null_mut();
        assert_eq!(pl_run_open_series(run, 5, &mut series), PlStatus::Usage);
        assert!(text(pl_last_error()).contains("out of range"));
        assert_eq!(pl_run_open_series(run, 0, &mut series), PlStatus::Ok);
        let mut value = f64::NAN;
        assert_eq!(pl_series_value(series, 99, &mut value), PlStatus::Usage);
        assert_eq!(pl_series_value(series, 0, ptr::null_mut()), PlStatus::NullArgument);
        pl_series_free(series);
        pl_run_free(run);
    }
}

#[test]
fn version_matches_the_crate() {
    assert_eq!(text(pl_version()), env!("CARGO_PKG_VERSION"));
}
