use std::ffi::{c_char, CString};
use std::ptr;

use qndlab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { qnd_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

const SMALL: &str = "[synth]\nsegment_length = 65536\nn_segments = 8\n[estimate]\nchannels = [\"meter\"]\n";

#[test]
fn vacuum_quadratures_are_one() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(qnd_system_new_default(&mut sys), QndStatus::Ok);
        assert_eq!(qnd_system_set_vacuum_only(sys), QndStatus::Ok);
        let f = [160e3, 169.334e3, 175e3];
        let mut sxx = [0.0; 3];
        let mut syy = [0.0; 3];
        let mut res = [0.0; 3];
        let st = qnd_system_spectra(sys, f.as_ptr(), 3, sxx.as_mut_ptr(), syy.as_mut_ptr(), ptr::null_mut(), res.as_mut_ptr());
        assert_eq!(st, QndStatus::Ok);
        for v in sxx.iter().chain(&syy) {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
        // Signal and meter read non-orthogonal quadratures of the same vacuum,
        // so conditioning removes η_s·η_m·sin²(φ_s − φ_R).
        let system = qndlab::config::RunConfig::default().system().unwrap().vacuum_only();
        let model = qndlab::om::OmModel::new(&system).unwrap();
        let d = &system.detection;
        let tilt = (model.phases.phi_s - model.phases.phi_r).sin();
        let want = 1.0 - d.eta_signal * d.eta_meter * tilt * tilt;
        assert!(want < 1.0 - 1e-7);
        for v in &res {
            assert!((v - want).abs() < 1e-9, "{v} vs {want}");
        }
        qnd_system_free(sys);
    }
}

#[test]
fn synthesize_estimate_roundtrip() {
    let toml = CString::new(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.qndl").to_str().unwrap()).unwrap();
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(qnd_system_from_toml(toml.as_ptr(), &mut sys), QndStatus::Ok);
        let mut ds = ptr::null_mut();
        assert_eq!(qnd_dataset_synthesize(sys, 5, 0, &mut ds), QndStatus::Ok);
        assert_eq!(qnd_dataset_n_segments(ds), 8);
        assert_eq!(qnd_dataset_write(ds, path.as_ptr()), QndStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(qnd_dataset_read(path.as_ptr(), &mut back), QndStatus::Ok);
        assert_eq!(qnd_dataset_n_segments(back), 8);

        let mut rep = ptr::null_mut();
        assert_eq!(qnd_pipeline_run(sys, back, &mut rep), QndStatus::Ok);
        assert_eq!(qnd_report_kept_fraction(rep), 1.0);
        assert!(qnd_report_sql_reference(rep) > 0.9);
        let n = qnd_report_n_bins(rep);
        assert!(n > 100);
        let mut f = vec![0.0; n];
        let mut v = vec![0.0; n];
        assert_eq!(qnd_report_residual(rep, f.as_mut_ptr(), v.as_mut_ptr(), ptr::null_mut(), n), QndStatus::Ok);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(
            qnd_report_residual(rep, f.as_mut_ptr(), v.as_mut_ptr(), ptr::null_mut(), n - 1),
            QndStatus::InvalidArgument
        );
        let (mut bf, mut bv) = (0.0, 0.0);
        assert_eq!(qnd_report_band_minimum(rep, 150.0, &mut bf, &mut bv, ptr::null_mut()), QndStatus::Ok);
        assert!(bf >= 160e3 && bf <= 180e3);
        assert_eq!(qnd_report_band_minimum(rep, 77.0, &mut bf, &mut bv, ptr::null_mut()), QndStatus::InvalidArgument);
        let len = qnd_report_summary(rep, ptr::null_mut(), 0);
        assert!(len > 0);

        qnd_report_free(rep);
        qnd_dataset_free(back);
        qnd_dataset_free(ds);
        qnd_system_free(sys);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut sys = ptr::null_mut();
        let bad = CString::new("[cavity]\nfinesse = 1\n").unwrap();
        assert_eq!(qnd_system_from_toml(bad.as_ptr(), &mut sys), QndStatus::Config);
        assert!(sys.is_null());
        assert!(last_error().contains("finesse"));

        assert_eq!(qnd_system_from_toml(ptr::null(), &mut sys), QndStatus::NullPointer);
        assert_eq!(qnd_system_new_default(ptr::null_mut()), QndStatus::NullPointer);

        let missing = CString::new("/nonexistent/x.qndl").unwrap();
        let mut ds = ptr::null_mut();
        assert_eq!(qnd_dataset_read(missing.as_ptr(), &mut ds), QndStatus::Io);

        let mut rep = ptr::null_mut();
        assert_eq!(qnd_pipeline_run(ptr::null(), ptr::null(), &mut rep), QndStatus::NullPointer);
        assert!(qnd_report_kept_fraction(ptr::null()).is_nan());
        assert_eq!(qnd_dataset_n_segments(ptr::null()), 0);
        // freeing null is a no-op
        qnd_system_free(ptr::null_mut());
        qnd_dataset_free(ptr::null_mut());
        qnd_report_free(ptr::null_mut());
    }
}

#[test]
fn truncated_error_copy_is_terminated() {
    unsafe {
        let mut sys = ptr::null_mut();
        let bad = CString::new("[nonsense]\n").unwrap();
        assert_eq!(qnd_system_from_toml(bad.as_ptr(), &mut sys), QndStatus::Config);
        let mut buf = [1 as c_char; 4];
        let full = qnd_last_error(buf.as_mut_ptr(), buf.len());
        assert!(full > 3);
        assert_eq!(buf[3], 0);
    }
}

#[test]
fn header_lists_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qndlab.h")).unwrap();
    for name in [
        "qnd_last_error",
        "qnd_system_new_default",
        "qnd_system_from_toml",
        "qnd_system_spectra",
        "qnd_dataset_synthesize",
        "qnd_dataset_read",
        "qnd_pipeline_run",
        "qnd_report_band_minimum",
        "qnd_report_free",
        "typedef struct QndReport QndReport",
        "QND_STATUS_PIPELINE = 7",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}
