//! C ABI over `cochlea-core`.
//!
//! Objects are opaque handles created by `cb_*_new`/`cb_*_read`-style calls
//! and released with the matching `cb_*_free`. Every fallible call returns a
//! [`CbStatus`]; on failure `cb_last_error()` describes it. Outputs are only
//! written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cochlea_core::membrane::{self, DisplacementPattern, FeatureMode, MembraneModel};
use cochlea_core::nn::{self, Network};
use cochlea_core::signals::{self, ToneSpec, Waveform};
use cochlea_core::spectral::{self, Spectrum};
use cochlea_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// Arguments violate a documented precondition.
    InvalidArgument = 2,
    /// The computation itself failed (overdamped channel, divergence, ...).
    Compute = 3,
    /// File system or file format error.
    Io = 4,
    /// Output buffer too small; the required length was written.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Feature reduction applied per frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbFeatureMode {
    Rms = 0,
    MeanAbs = 1,
    RawDecimate = 2,
}

pub struct CbWaveform(Waveform);
pub struct CbModel(MembraneModel);
pub struct CbPattern(DisplacementPattern);
pub struct CbSpectrum(Spectrum);
pub struct CbNetwork(Network);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(e: &Error) -> CbStatus {
    match e {
        _ if e.is_io() => CbStatus::Io,
        Error::InvalidSpec(_) | Error::InvalidInput(_) | Error::Range(_) | Error::Shape(_) => CbStatus::InvalidArgument,
        _ => CbStatus::Compute,
    }
}

struct Fail(CbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(CbStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CbStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail(CbStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies into a caller buffer; `out_len` receives the full length either way.
unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, out_len: *mut usize) -> Result<(), Fail> {
    if !out_len.is_null() {
        *out_len = src.len();
    }
    if cap < src.len() {
        return Err(Fail(CbStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// Waveforms

/// # Safety
/// `samples` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_new(samples: *const f64, len: usize, sample_rate_hz: f64, out: *mut *mut CbWaveform) -> CbStatus {
    guard(|| {
        let s = slice(samples, len, "samples")?;
        put(out, CbWaveform(Waveform::new(s.to_vec(), sample_rate_hz)?))
    })
}

/// Sum of `count` sinusoids plus seeded white noise of standard deviation `noise_rms`.
/// `amplitudes` and `phases_rad` may be null for 1 and 0.
///
/// # Safety
/// Non-null arrays must hold `count` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_tones(
    freqs_hz: *const f64,
    amplitudes: *const f64,
    phases_rad: *const f64,
    count: usize,
    duration_s: f64,
    sample_rate_hz: f64,
    noise_rms: f64,
    seed: u64,
    out: *mut *mut CbWaveform,
) -> CbStatus {
    guard(|| {
        let f = slice(freqs_hz, count, "freqs_hz")?;
        let a = if amplitudes.is_null() { None } else { Some(slice(amplitudes, count, "amplitudes")?) };
        let p = if phases_rad.is_null() { None } else { Some(slice(phases_rad, count, "phases_rad")?) };
        let specs: Vec<ToneSpec> = (0..count)
            .map(|i| ToneSpec::new(f[i], a.map_or(1.0, |a| a[i]), p.map_or(0.0, |p| p[i])))
            .collect();
        put(out, CbWaveform(signals::synth_tones(&specs, duration_s, sample_rate_hz, noise_rms, seed)?))
    })
}

/// Reads `.wav` (16-bit PCM) or raw f64.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_read(path_: *const c_char, out: *mut *mut CbWaveform) -> CbStatus {
    guard(|| put(out, CbWaveform(signals::read_waveform(&path(path_)?)?)))
}

/// Writes `.wav` (16-bit PCM) or raw f64 by extension.
///
/// # Safety
/// `w` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_write(w: *const CbWaveform, path_: *const c_char) -> CbStatus {
    guard(|| {
        let w = &obj(w, "waveform")?.0;
        let p = path(path_)?;
        if signals::has_wav_extension(&p) {
            signals::write_wav(&p, w)?;
        } else {
            signals::write_raw_f64(&p, w)?;
        }
        Ok(())
    })
}

/// Sample count, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_len(w: *const CbWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// Sample rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_sample_rate(w: *const CbWaveform) -> f64 {
    w.as_ref().map_or(0.0, |w| w.0.sample_rate_hz())
}

/// # Safety
/// `buf` must hold `cap` doubles; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_samples(w: *const CbWaveform, buf: *mut f64, cap: usize, out_len: *mut usize) -> CbStatus {
    guard(|| copy_out(obj(w, "waveform")?.0.samples(), buf, cap, out_len))
}

/// # Safety
/// `w` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_waveform_free(w: *mut CbWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

// Membrane

/// Log-spaced channels over `[f_low, f_high]` with memory time `q_time_s`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_model_new(channels: usize, f_low_hz: f64, f_high_hz: f64, q_time_s: f64, out: *mut *mut CbModel) -> CbStatus {
    guard(|| put(out, CbModel(membrane::default_model(channels, f_low_hz, f_high_hz, q_time_s)?)))
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_model_read_json(path_: *const c_char, out: *mut *mut CbModel) -> CbStatus {
    guard(|| put(out, CbModel(MembraneModel::read_json(&path(path_)?)?)))
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_model_channels(m: *const CbModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// Channel resonances in Hz.
///
/// # Safety
/// `buf` must hold `cap` doubles; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn cb_model_frequencies(m: *const CbModel, buf: *mut f64, cap: usize, out_len: *mut usize) -> CbStatus {
    guard(|| copy_out(&obj(m, "model")?.0.channel_freqs_hz(), buf, cap, out_len))
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_model_free(m: *mut CbModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Per-sample displacement of every channel.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_respond(m: *const CbModel, w: *const CbWaveform, out: *mut *mut CbPattern) -> CbStatus {
    guard(|| {
        let p = membrane::respond(&obj(m, "model")?.0, &obj(w, "waveform")?.0)?;
        put(out, CbPattern(p))
    })
}

/// Frames of `frame_ms` reduced by `mode`.
///
/// # Safety
/// `p` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_pattern_features(p: *const CbPattern, frame_ms: f64, mode: CbFeatureMode, out: *mut *mut CbPattern) -> CbStatus {
    guard(|| {
        let mode = match mode {
            CbFeatureMode::Rms => FeatureMode::Rms,
            CbFeatureMode::MeanAbs => FeatureMode::MeanAbs,
            CbFeatureMode::RawDecimate => FeatureMode::RawDecimate,
        };
        put(out, CbPattern(membrane::features(&obj(p, "pattern")?.0, frame_ms, mode)?))
    })
}

/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_pattern_channels(p: *const CbPattern) -> usize {
    p.as_ref().map_or(0, |p| p.0.channel_count())
}

/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_pattern_frames(p: *const CbPattern) -> usize {
    p.as_ref().map_or(0, |p| p.0.frame_count())
}

/// Row-major channels x frames.
///
/// # Safety
/// `buf` must hold `cap` doubles; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn cb_pattern_values(p: *const CbPattern, buf: *mut f64, cap: usize, out_len: *mut usize) -> CbStatus {
    guard(|| copy_out(obj(p, "pattern")?.0.values(), buf, cap, out_len))
}

/// Body at `path`, JSON header at `path.json`.
///
/// # Safety
/// `p` must be live; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cb_pattern_write(p: *const CbPattern, path_: *const c_char) -> CbStatus {
    guard(|| Ok(obj(p, "pattern")?.0.write(&path(path_)?)?))
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_pattern_free(p: *mut CbPattern) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// Spectra

/// `X_j = (1/N) sum_k s_k exp(+i 2 pi j k / N)`.
///
/// # Safety
/// `w` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_dft(w: *const CbWaveform, out: *mut *mut CbSpectrum) -> CbStatus {
    guard(|| put(out, CbSpectrum(spectral::dft(&obj(w, "waveform")?.0)?)))
}

/// `points` bins from `f_start_hz` to `f_end_hz` inclusive.
///
/// # Safety
/// `w` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_czt(w: *const CbWaveform, f_start_hz: f64, f_end_hz: f64, points: usize, out: *mut *mut CbSpectrum) -> CbStatus {
    guard(|| put(out, CbSpectrum(spectral::czt(&obj(w, "waveform")?.0, f_start_hz, f_end_hz, points)?)))
}

/// Zoom transform around `center_hz` with decimation `decimation` and `pad` output bins.
///
/// # Safety
/// `w` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_zfft(w: *const CbWaveform, center_hz: f64, decimation: usize, pad: usize, out: *mut *mut CbSpectrum) -> CbStatus {
    guard(|| put(out, CbSpectrum(spectral::zfft(&obj(w, "waveform")?.0, center_hz, decimation, pad)?)))
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_spectrum_len(s: *const CbSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Frequency of bin 0 and the bin spacing, in Hz.
///
/// # Safety
/// `s` must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_spectrum_grid(s: *const CbSpectrum, f_start_hz: *mut f64, f_step_hz: *mut f64) -> CbStatus {
    guard(|| {
        let s = &obj(s, "spectrum")?.0;
        if f_start_hz.is_null() || f_step_hz.is_null() {
            return Err(null("grid output"));
        }
        *f_start_hz = s.f_start_hz;
        *f_step_hz = s.f_step_hz;
        Ok(())
    })
}

/// Interleaved `re, im` pairs; `out_len` receives `2 * len`.
///
/// # Safety
/// `buf` must hold `cap` doubles; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn cb_spectrum_bins(s: *const CbSpectrum, buf: *mut f64, cap: usize, out_len: *mut usize) -> CbStatus {
    guard(|| {
        let flat: Vec<f64> = obj(s, "spectrum")?.0.bins.iter().flat_map(|c| [c.re, c.im]).collect();
        copy_out(&flat, buf, cap, out_len)
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_spectrum_free(s: *mut CbSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

// Networks

/// Loads a CBNN checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cb_network_load(path_: *const c_char, out: *mut *mut CbNetwork) -> CbStatus {
    guard(|| put(out, CbNetwork(nn::load_checkpoint(&path(path_)?)?)))
}

/// # Safety
/// `n` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_network_input_len(n: *const CbNetwork) -> usize {
    n.as_ref().map_or(0, |n| n.0.input_len())
}

/// # Safety
/// `n` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_network_output_len(n: *const CbNetwork) -> usize {
    n.as_ref().map_or(0, |n| n.0.output_len())
}

/// Forward pass over `count` samples laid out back to back.
///
/// # Safety
/// `input` must hold `count * input_len` doubles, `buf` `cap` doubles; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn cb_network_predict(
    n: *const CbNetwork,
    input: *const f64,
    count: usize,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> CbStatus {
    guard(|| {
        let net = &obj(n, "network")?.0;
        let x = slice(input, count * net.input_len(), "input")?;
        let y = net.predict_many(x, count)?;
        copy_out(&y, buf, cap, out_len)
    })
}

/// # Safety
/// `n` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_network_free(n: *mut CbNetwork) {
    if !n.is_null() {
        drop(Box::from_raw(n));
    }
}
