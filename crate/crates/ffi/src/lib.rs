//! C ABI over the anxsense pipeline.
//!
//! Every function returns an [`AnxStatus`]; on failure a message is kept per
//! thread and can be read with [`anx_last_error`]. Objects crossing the
//! boundary are opaque handles released by their `_free` function. Output
//! buffers are caller-allocated.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use anxsense::dsp::{lomb_scargle_default, DspError, PsdEstimate};
use anxsense::featureset::{build_table_from_dir, FeatureError, WindowMode};
use anxsense::ingest::{DatasetDir, IngestError, Manifest};
use anxsense::ppg::{analyze_bvp, clean_bvp, hrv_all, nn_track, HrvFeatures, NnSeries, PpgError, NN_TRACK_RATE};
use anxsense::synth::gen_cohort;

/// Number of HRV indices in [`AnxHrv`].
pub const ANX_HRV_FEATURES: usize = 32;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    Io = 4,
    Computation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnxWindow {
    Averaged = 0,
    Whole = 1,
}

/// HRV indices in catalogue order (see [`anx_hrv_feature_name`]); NaN marks
/// an index that is undefined for the input.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AnxHrv {
    pub values: [f64; ANX_HRV_FEATURES],
}

/// Periodogram handle.
pub struct AnxPsd {
    psd: PsdEstimate,
}

/// Dataset directory handle with its validated manifest.
pub struct AnxDataset {
    dir: DatasetDir,
    manifest: Manifest,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AnxStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<T>(status: AnxStatus, msg: impl Into<String>) -> Outcome<T> {
    Err(Failure(status, msg.into()))
}

fn set_error(msg: Option<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default()));
}

fn guard(body: impl FnOnce() -> Outcome<()>) -> AnxStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(None);
            AnxStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(Some(format!("internal error: {msg}")));
            AnxStatus::Panic
        }
    }
}

fn ppg_status(e: &PpgError) -> AnxStatus {
    match e {
        PpgError::InsufficientBeats { .. }
        | PpgError::NoBeatsDetected
        | PpgError::SignalTooShort { .. }
        | PpgError::Dsp(DspError::InsufficientPoints { .. } | DspError::SignalTooShort { .. }) => AnxStatus::InsufficientData,
        _ => AnxStatus::InvalidArgument,
    }
}

impl From<PpgError> for Failure {
    fn from(e: PpgError) -> Self {
        Failure(ppg_status(&e), e.to_string())
    }
}

impl From<DspError> for Failure {
    fn from(e: DspError) -> Self {
        let status = match e {
            DspError::InsufficientPoints { .. } | DspError::SignalTooShort { .. } => AnxStatus::InsufficientData,
            _ => AnxStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::Io { .. } => AnxStatus::Io,
            _ => AnxStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Ingest(i) => i.into(),
            other => Failure(AnxStatus::Computation, other.to_string()),
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, n: usize) -> Outcome<&'a [f64]> {
    if ptr.is_null() {
        return fail(AnxStatus::NullPointer, "input buffer is null");
    }
    Ok(std::slice::from_raw_parts(ptr, n))
}

unsafe fn path(ptr: *const c_char) -> Outcome<PathBuf> {
    if ptr.is_null() {
        return fail(AnxStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(AnxStatus::InvalidArgument, "path is not valid UTF-8"),
    }
}

fn out_ref<'a, T>(ptr: *mut T) -> Outcome<&'a mut T> {
    // SAFETY: non-null output pointers are required to be valid for writes.
    unsafe { ptr.as_mut() }.map_or_else(|| fail(AnxStatus::NullPointer, "output pointer is null"), Ok)
}

fn pack(h: &HrvFeatures) -> AnxHrv {
    let mut values = [f64::NAN; ANX_HRV_FEATURES];
    for (slot, (_, v)) in values.iter_mut().zip(h.named()) {
        *slot = v.unwrap_or(f64::NAN);
    }
    AnxHrv { values }
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(v) => v,
    Err(_) => panic!("version string"),
};

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn anx_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn anx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |m| m.as_ptr()))
}

/// Name of HRV index `i` (static string), or NULL when out of range.
#[no_mangle]
pub extern "C" fn anx_hrv_feature_name(i: usize) -> *const c_char {
    static NAMES: std::sync::OnceLock<Vec<CString>> = std::sync::OnceLock::new();
    let names = NAMES.get_or_init(|| {
        let empty = HrvFeatures { time: None, frequency: None, nonlinear: None };
        empty.named().into_iter().map(|(n, _)| CString::new(n).expect("ascii name")).collect()
    });
    names.get(i).map_or(std::ptr::null(), |n| n.as_ptr())
}

/// Zero-phase 0.5-8 Hz Butterworth cleaning of a BVP signal; writes `n`
/// samples to `out`.
///
/// # Safety
/// `bvp` must point to `n` readable and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn anx_bvp_clean(bvp: *const f64, n: usize, rate: f64, out: *mut f64) -> AnxStatus {
    guard(|| {
        let x = slice(bvp, n)?;
        if out.is_null() {
            return fail(AnxStatus::NullPointer, "output buffer is null");
        }
        let y = clean_bvp(x, rate)?;
        std::ptr::copy_nonoverlapping(y.as_ptr(), out, n);
        Ok(())
    })
}

/// HRV indices of a series of `n` NN intervals (ms). Frequency indices use
/// the 100 Hz NN track of the series.
///
/// # Safety
/// `nn_ms` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn anx_hrv_from_intervals(nn_ms: *const f64, n: usize, out: *mut AnxHrv) -> AnxStatus {
    guard(|| {
        let nn = slice(nn_ms, n)?;
        let out = out_ref(out)?;
        let series = NnSeries::from_intervals(0.0, nn)?;
        let duration = series.beat_times[series.beat_times.len() - 1];
        let track = nn_track(&series, 0.0, NN_TRACK_RATE, (duration * NN_TRACK_RATE) as usize + 1)?;
        let (t, v) = track.window(0.0, f64::INFINITY);
        let psd = lomb_scargle_default(&t, &v).ok();
        *out = pack(&hrv_all(&series, psd.as_ref())?);
        Ok(())
    })
}

/// Clean a BVP recording, detect beats and compute HRV over all of it.
///
/// # Safety
/// `bvp` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn anx_hrv_from_bvp(bvp: *const f64, n: usize, rate: f64, out: *mut AnxHrv) -> AnxStatus {
    guard(|| {
        use anxsense::ingest::{Channel, Samples, SensorRecording};
        let x = slice(bvp, n)?;
        let out = out_ref(out)?;
        let rec = SensorRecording::new(Channel::Bvp, 0.0, rate, Samples::Scalar(x.to_vec()))?;
        let analysis = analyze_bvp(&rec)?;
        *out = pack(&analysis.window(0.0, rec.end_time() + 1.0)?);
        Ok(())
    })
}

/// Lomb–Scargle periodogram on the default 500-point grid over
/// [0.01, 0.5] Hz. Release with [`anx_psd_free`].
///
/// # Safety
/// `times` and `values` must each point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn anx_psd_compute(times: *const f64, values: *const f64, n: usize, out: *mut *mut AnxPsd) -> AnxStatus {
    guard(|| {
        let (t, v) = (slice(times, n)?, slice(values, n)?);
        let out = out_ref(out)?;
        *out = std::ptr::null_mut();
        let psd = lomb_scargle_default(t, v)?;
        *out = Box::into_raw(Box::new(AnxPsd { psd }));
        Ok(())
    })
}

/// Number of frequency bins, 0 for a NULL handle.
///
/// # Safety
/// `psd` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn anx_psd_len(psd: *const AnxPsd) -> usize {
    psd.as_ref().map_or(0, |p| p.psd.freqs.len())
}

/// Copy frequencies (Hz) and power into buffers of `capacity` doubles;
/// either buffer may be NULL to skip it.
///
/// # Safety
/// `psd` must be a live handle; non-NULL buffers must hold `capacity`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn anx_psd_copy(psd: *const AnxPsd, freqs: *mut f64, power: *mut f64, capacity: usize) -> AnxStatus {
    guard(|| {
        let Some(p) = psd.as_ref() else { return fail(AnxStatus::NullPointer, "psd handle is null") };
        let n = p.psd.freqs.len();
        if capacity < n {
            return fail(AnxStatus::BufferTooSmall, format!("{n} bins do not fit in {capacity}"));
        }
        if !freqs.is_null() {
            std::ptr::copy_nonoverlapping(p.psd.freqs.as_ptr(), freqs, n);
        }
        if !power.is_null() {
            std::ptr::copy_nonoverlapping(p.psd.power.as_ptr(), power, n);
        }
        Ok(())
    })
}

/// Integrated power over `[lo, hi)`, or `[lo, hi]` when `inclusive_hi` is
/// non-zero.
///
/// # Safety
/// `psd` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn anx_psd_band_power(psd: *const AnxPsd, lo: f64, hi: f64, inclusive_hi: c_int, out: *mut f64) -> AnxStatus {
    guard(|| {
        let Some(p) = psd.as_ref() else { return fail(AnxStatus::NullPointer, "psd handle is null") };
        let out = out_ref(out)?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return fail(AnxStatus::InvalidArgument, format!("band [{lo}, {hi}]"));
        }
        *out = p.psd.band_power(lo, hi, inclusive_hi != 0);
        Ok(())
    })
}

/// Release a periodogram handle; NULL is ignored.
///
/// # Safety
/// `psd` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn anx_psd_free(psd: *mut AnxPsd) {
    if !psd.is_null() {
        drop(Box::from_raw(psd));
    }
}

/// Open a dataset directory and validate its manifest. Release with
/// [`anx_dataset_free`].
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn anx_dataset_open(dir: *const c_char, out: *mut *mut AnxDataset) -> AnxStatus {
    guard(|| {
        let root = path(dir)?;
        let out = out_ref(out)?;
        *out = std::ptr::null_mut();
        let dir = DatasetDir::new(root);
        let manifest = dir.load_manifest()?;
        *out = Box::into_raw(Box::new(AnxDataset { dir, manifest }));
        Ok(())
    })
}

/// Number of participants in the manifest, 0 for a NULL handle.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn anx_dataset_participants(ds: *const AnxDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.manifest.participants.len())
}

/// Extract the feature table and write it as CSV to `csv_path`.
///
/// # Safety
/// `ds` must be a live handle and `csv_path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn anx_dataset_write_features(ds: *const AnxDataset, window: AnxWindow, csv_path: *const c_char) -> AnxStatus {
    guard(|| {
        let Some(d) = ds.as_ref() else { return fail(AnxStatus::NullPointer, "dataset handle is null") };
        let target = path(csv_path)?;
        let mode = match window {
            AnxWindow::Averaged => WindowMode::Averaged,
            AnxWindow::Whole => WindowMode::Whole,
        };
        let table = build_table_from_dir(&d.dir, mode)?;
        let file = std::fs::File::create(&target)
            .or_else(|e| fail(AnxStatus::Io, format!("{}: {e}", target.display())))?;
        table
            .write_csv(std::io::BufWriter::new(file))
            .or_else(|e| fail(AnxStatus::Io, format!("{}: {e}", target.display())))
    })
}

/// Release a dataset handle; NULL is ignored.
///
/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn anx_dataset_free(ds: *mut AnxDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Write a synthetic cohort of `n` participants with effect profile
/// `profile` ("null", "moderate" or "strong") to `dir`.
///
/// # Safety
/// `dir` and `profile` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn anx_synth_write(dir: *const c_char, n: usize, seed: u64, profile: *const c_char) -> AnxStatus {
    guard(|| {
        let root = path(dir)?;
        let name = path(profile)?;
        let profile = anxsense::cli::profile_by_name(&name.to_string_lossy())
            .or_else(|e| fail(AnxStatus::InvalidArgument, e.to_string()))?;
        if n == 0 {
            return fail(AnxStatus::InvalidArgument, "cohort size must be positive");
        }
        gen_cohort(n, &profile, seed).write(&root).or_else(|e| fail(AnxStatus::Io, format!("{}: {e}", root.display())))
    })
}

/// Run the command-line interface with `argc` arguments (`argv[0]` is the
/// program name) and return its exit code: 0 success, 1 invalid input,
/// 2 runtime failure.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn anx_cli_run(argc: c_int, argv: *const *const c_char) -> c_int {
    let mut args = Vec::new();
    if argc < 0 || (argc > 0 && argv.is_null()) {
        set_error(Some("invalid argument vector".into()));
        return 1;
    }
    for i in 0..argc as usize {
        let p = *argv.add(i);
        if p.is_null() {
            set_error(Some(format!("argument {i} is null")));
            return 1;
        }
        args.push(std::ffi::OsString::from(CStr::from_ptr(p).to_string_lossy().into_owned()));
    }
    match catch_unwind(AssertUnwindSafe(|| anxsense::cli::run(args))) {
        Ok(code) => {
            set_error(None);
            code
        }
        Err(_) => {
            set_error(Some("internal error in command execution".into()));
            2
        }
    }
}
