//! C ABI over `qndlab`.
//!
//! Objects are opaque handles created by `*_new`/`*_read`/`*_run` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`QndStatus`]; on failure the message is kept per thread and can be
//! copied out with [`qnd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use qndlab::config::RunConfig;
use qndlab::pipeline::{self, PipelineReport};
use qndlab::synth::{read_dataset, synthesize, write_dataset, DataSet};
use qndlab::theory::full_output_cross_spectra;
use qndlab::units::hz_to_rad;
use qndlab::{Error, SystemParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QndStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    Model = 6,
    Pipeline = 7,
    Fit = 8,
    Panic = 9,
}

/// Physical parameters together with the synthesis and pipeline settings
/// of a run configuration.
pub struct QndSystem {
    config: RunConfig,
    system: SystemParams,
}

pub struct QndDataset {
    inner: DataSet,
}

pub struct QndReport {
    inner: PipelineReport,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> QndStatus {
    match qndlab::cli::exit_code(e) {
        qndlab::cli::EXIT_CONFIG => QndStatus::Config,
        qndlab::cli::EXIT_IO => QndStatus::Io,
        qndlab::cli::EXIT_FORMAT => QndStatus::Format,
        qndlab::cli::EXIT_MODEL => QndStatus::Model,
        qndlab::cli::EXIT_FIT => QndStatus::Fit,
        _ => QndStatus::Pipeline,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (QndStatus, String)>) -> QndStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QndStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            QndStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (QndStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QndStatus, String) {
    (QndStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QndStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QndStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn qnd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Reference-device parameters and default settings.
#[no_mangle]
pub unsafe extern "C" fn qnd_system_new_default(out: *mut *mut QndSystem) -> QndStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::default();
        let system = config.system().map_err(lib_err)?;
        put(out, QndSystem { config, system });
        Ok(())
    })
}

/// Parameters from the text of a TOML run configuration.
#[no_mangle]
pub unsafe extern "C" fn qnd_system_from_toml(toml: *const c_char, out: *mut *mut QndSystem) -> QndStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let config = RunConfig::parse(text).map_err(lib_err)?;
        let system = config.system().map_err(lib_err)?;
        put(out, QndSystem { config, system });
        Ok(())
    })
}

/// Switch off the drive and all classical noise, keeping the detection chain.
#[no_mangle]
pub unsafe extern "C" fn qnd_system_set_vacuum_only(sys: *mut QndSystem) -> QndStatus {
    guard(|| {
        let s = sys.as_mut().ok_or_else(|| null("sys"))?;
        s.system = s.system.vacuum_only();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qnd_system_free(sys: *mut QndSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Full-model spectra at `n` frequencies (Hz). Any output pointer may be
/// null to skip that quantity.
#[no_mangle]
pub unsafe extern "C" fn qnd_system_spectra(
    sys: *const QndSystem,
    frequencies_hz: *const f64,
    n: usize,
    s_xx: *mut f64,
    s_yy: *mut f64,
    msc: *mut f64,
    residual: *mut f64,
) -> QndStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if frequencies_hz.is_null() {
            return Err(null("frequencies_hz"));
        }
        if n == 0 {
            return Ok(());
        }
        let f = std::slice::from_raw_parts(frequencies_hz, n);
        let grid: Vec<f64> = f.iter().map(|&v| hz_to_rad(v)).collect();
        let sp = full_output_cross_spectra(&s.system, &grid).map_err(lib_err)?;
        let c = sp.coherence().map_err(lib_err)?;
        let r = sp.residual().map_err(lib_err)?;
        for (dst, src) in [(s_xx, &sp.s_xx), (s_yy, &sp.s_yy), (msc, &c), (residual, &r)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, n).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Synthesize a dataset with the system's synthesis settings. `n_segments`
/// of 0 keeps the configured count.
#[no_mangle]
pub unsafe extern "C" fn qnd_dataset_synthesize(
    sys: *const QndSystem,
    seed: u64,
    n_segments: usize,
    out: *mut *mut QndDataset,
) -> QndStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = s.config.synth_config();
        cfg.seed = seed;
        if n_segments > 0 {
            cfg.n_segments = n_segments;
        }
        let ds = synthesize(&s.system, &cfg).map_err(lib_err)?;
        put(out, QndDataset { inner: ds });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qnd_dataset_read(path: *const c_char, out: *mut *mut QndDataset) -> QndStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = str_arg(path, "path")?;
        let ds = read_dataset(Path::new(p)).map_err(lib_err)?;
        put(out, QndDataset { inner: ds });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qnd_dataset_write(ds: *const QndDataset, path: *const c_char) -> QndStatus {
    guard(|| {
        let d = ds.as_ref().ok_or_else(|| null("ds"))?;
        let p = str_arg(path, "path")?;
        write_dataset(&d.inner, Path::new(p)).map_err(lib_err)
    })
}

/// Number of segments, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn qnd_dataset_n_segments(ds: *const QndDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.meta.n_segments)
}

#[no_mangle]
pub unsafe extern "C" fn qnd_dataset_free(ds: *mut QndDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Run the estimation pipeline with the system's estimator settings.
#[no_mangle]
pub unsafe extern "C" fn qnd_pipeline_run(
    sys: *const QndSystem,
    ds: *const QndDataset,
    out: *mut *mut QndReport,
) -> QndStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        let d = ds.as_ref().ok_or_else(|| null("ds"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = pipeline::run(&d.inner, &s.config.estimate).map_err(lib_err)?;
        put(out, QndReport { inner: r });
        Ok(())
    })
}

/// Fraction of segments kept by the selection, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn qnd_report_kept_fraction(rep: *const QndReport) -> f64 {
    rep.as_ref().map_or(f64::NAN, |r| r.inner.kept_fraction)
}

/// Raw-unit shot-noise reference, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn qnd_report_sql_reference(rep: *const QndReport) -> f64 {
    rep.as_ref().map_or(f64::NAN, |r| r.inner.calibration.sql_reference)
}

/// Number of frequency bins of the residual, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn qnd_report_n_bins(rep: *const QndReport) -> usize {
    rep.as_ref().map_or(0, |r| r.inner.residual_normalized.values.len())
}

/// Copy the normalized residual into arrays of length `len`, which must be
/// at least `qnd_report_n_bins`.
#[no_mangle]
pub unsafe extern "C" fn qnd_report_residual(
    rep: *const QndReport,
    frequencies_hz: *mut f64,
    values: *mut f64,
    stderr: *mut f64,
    len: usize,
) -> QndStatus {
    guard(|| {
        let r = &rep.as_ref().ok_or_else(|| null("rep"))?.inner.residual_normalized;
        let n = r.values.len();
        if len < n {
            return Err((QndStatus::InvalidArgument, format!("buffers hold {len} values, {n} needed")));
        }
        for (dst, src) in [(frequencies_hz, &r.frequencies_hz), (values, &r.values), (stderr, &r.stderr)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, n).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Banded residual minimum for one of the configured band widths.
#[no_mangle]
pub unsafe extern "C" fn qnd_report_band_minimum(
    rep: *const QndReport,
    width_hz: f64,
    frequency_hz: *mut f64,
    value: *mut f64,
    stderr: *mut f64,
) -> QndStatus {
    guard(|| {
        let r = &rep.as_ref().ok_or_else(|| null("rep"))?.inner;
        let b = r
            .banded
            .iter()
            .find(|b| (b.width_hz - width_hz).abs() < 1e-9)
            .ok_or_else(|| (QndStatus::InvalidArgument, format!("no band of {width_hz} Hz in the report")))?;
        let m = b
            .minimum
            .ok_or_else(|| (QndStatus::Pipeline, "no banded value in the search range".to_string()))?;
        for (dst, v) in [(frequency_hz, m.frequency_hz), (value, m.value), (stderr, m.stderr)] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// Copy the plain-text summary into `buf`; returns the full length
/// excluding the NUL, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn qnd_report_summary(rep: *const QndReport, buf: *mut c_char, len: usize) -> usize {
    let Some(r) = rep.as_ref() else { return 0 };
    let s = r.inner.summary();
    if !buf.is_null() && len > 0 {
        let n = s.len().min(len - 1);
        std::ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    }
    s.len()
}

#[no_mangle]
pub unsafe extern "C" fn qnd_report_free(rep: *mut QndReport) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}
