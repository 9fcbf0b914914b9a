//! C ABI for the `nlpr` denoiser.
//!
//! Images cross the boundary as opaque [`NlprImage`] handles that must be
//! released with [`nlpr_image_free`]. Every fallible call returns an
//! [`NlprStatus`]; on failure a message is kept per thread and can be copied
//! out with [`nlpr_last_error_message`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nlpr::harness::MIN_H;
use nlpr::irls::{irls_solve, nlm_estimate, IrlsConfig, WeightedPatches};
use nlpr::{Error, Image, NoiseSpec, SearchParams};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlprStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    OutOfBounds = 3,
    Degenerate = 4,
    Numerical = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

/// Opaque image handle.
pub struct NlprImage(Image);

/// Denoising parameters. Intensities and `h` are on the `[0, 1]` scale.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlprDenoiseParams {
    /// Search window side `S` (odd).
    pub window: usize,
    /// Patch side `k` (odd).
    pub patch_side: usize,
    pub h: f64,
    /// Regression index in `(0, 2]`.
    pub p: f64,
    /// Keep only the nearest half of the neighbors.
    pub knn_truncation: bool,
    /// `0` selects the default cap for `p`.
    pub max_iters: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlprDenoiseStats {
    pub mean_iterations: f64,
    pub converged_fraction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> NlprStatus {
    match err {
        Error::Parameter(_) => NlprStatus::InvalidParameter,
        Error::OutOfBounds { .. } => NlprStatus::OutOfBounds,
        Error::Degenerate(_) => NlprStatus::Degenerate,
        Error::NonFinite { .. } => NlprStatus::Numerical,
        Error::AtPixel { source, .. } => status_of(source),
        Error::Format(_) => NlprStatus::Format,
        Error::Io(_) => NlprStatus::Io,
    }
}

/// Runs `f`, recording errors and trapping panics.
fn guard(f: impl FnOnce() -> Result<(), (NlprStatus, String)>) -> NlprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlprStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NlprStatus::Panic
        }
    }
}

fn lift<T>(r: nlpr::Result<T>) -> Result<T, (NlprStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (NlprStatus, String) {
    (NlprStatus::NullPointer, format!("{what} is null"))
}

unsafe fn image_ref<'a>(img: *const NlprImage, what: &str) -> Result<&'a Image, (NlprStatus, String)> {
    img.as_ref().map(|h| &h.0).ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (NlprStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed(img: Image) -> *mut NlprImage {
    Box::into_raw(Box::new(NlprImage(img)))
}

unsafe fn path_arg(path: *const c_char) -> Result<String, (NlprStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (NlprStatus::InvalidParameter, "path is not valid UTF-8".into()))
}

/// Human-readable name of a status code. The returned string is static.
#[no_mangle]
pub extern "C" fn nlpr_status_str(status: NlprStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        NlprStatus::Ok => b"ok\0",
        NlprStatus::NullPointer => b"null pointer\0",
        NlprStatus::InvalidParameter => b"invalid parameter\0",
        NlprStatus::OutOfBounds => b"out of bounds\0",
        NlprStatus::Degenerate => b"degenerate input\0",
        NlprStatus::Numerical => b"numerical error\0",
        NlprStatus::Io => b"i/o error\0",
        NlprStatus::Format => b"malformed file\0",
        NlprStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nlpr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates an image from `width * height` row-major samples (copied).
///
/// # Safety
/// `data` must point to `width * height` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut NlprImage,
) -> NlprStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let n = width.checked_mul(height).ok_or((NlprStatus::InvalidParameter, "size overflow".into()))?;
        let img = lift(Image::new(width, height, slice::from_raw_parts(data, n).to_vec()))?;
        write_out(out, boxed(img), "out")
    })
}

/// Releases an image handle. Null is ignored.
///
/// # Safety
/// `img` must be null or a handle returned by this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_free(img: *mut NlprImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_width(img: *const NlprImage) -> usize {
    img.as_ref().map_or(0, |h| h.0.width())
}

/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_height(img: *const NlprImage) -> usize {
    img.as_ref().map_or(0, |h| h.0.height())
}

/// Copies the samples into `out`, which must hold `len >= width * height` doubles.
///
/// # Safety
/// `img` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_copy_data(img: *const NlprImage, out: *mut f64, len: usize) -> NlprStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < img.len() {
            return Err((NlprStatus::InvalidParameter, format!("buffer holds {len} samples, need {}", img.len())));
        }
        ptr::copy_nonoverlapping(img.data().as_ptr(), out, img.len());
        Ok(())
    })
}

/// Reads an 8-bit binary PGM; samples are scaled to `[0, 1]`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_read_pgm(path: *const c_char, out: *mut *mut NlprImage) -> NlprStatus {
    guard(|| {
        let path = path_arg(path)?;
        let img = lift(nlpr::pgm::read_pgm(path))?;
        write_out(out, boxed(img), "out")
    })
}

/// Writes an 8-bit binary PGM, clamping to `[0, 1]` and rounding.
///
/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nlpr_image_write_pgm(img: *const NlprImage, path: *const c_char) -> NlprStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let path = path_arg(path)?;
        lift(nlpr::pgm::write_pgm(path, img))
    })
}

/// Adds seeded Gaussian noise of standard deviation `sigma` (`[0, 1]` scale).
///
/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpr_add_noise(
    img: *const NlprImage,
    sigma: f64,
    seed: u64,
    out: *mut *mut NlprImage,
) -> NlprStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let spec = lift(NoiseSpec::new(sigma, seed))?;
        write_out(out, boxed(nlpr::add_gaussian_noise(img, spec)), "out")
    })
}

/// PSNR in dB of `estimate` against `reference`; `+inf` when they are equal.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpr_psnr(reference: *const NlprImage, estimate: *const NlprImage, out: *mut f64) -> NlprStatus {
    guard(|| {
        let a = image_ref(reference, "reference")?;
        let b = image_ref(estimate, "estimate")?;
        write_out(out, lift(nlpr::psnr(a, b))?, "out")
    })
}

/// Default parameters for noise level `sigma` (`[0, 1]` scale): `S = 21`,
/// `k = 7`, `h = 10 sigma`, `p = 0.1`, truncation on.
#[no_mangle]
pub extern "C" fn nlpr_default_params(sigma: f64) -> NlprDenoiseParams {
    NlprDenoiseParams {
        window: 21,
        patch_side: 7,
        h: (10.0 * sigma).max(MIN_H),
        p: 0.1,
        knn_truncation: true,
        max_iters: 0,
    }
}

fn to_params(p: &NlprDenoiseParams) -> nlpr::Result<nlpr::DenoiseParams> {
    let search = SearchParams::new(p.window, p.patch_side, p.h)?;
    let mut params = nlpr::DenoiseParams::new(search, p.p, p.knn_truncation)?;
    if p.max_iters > 0 {
        params.irls = params.irls.with_max_iters(p.max_iters);
    }
    Ok(params)
}

/// Denoises `img`. `stats` may be null.
///
/// # Safety
/// `img` must be a live handle, `params` readable, `out` writable and `stats` null or writable.
#[no_mangle]
pub unsafe extern "C" fn nlpr_denoise(
    img: *const NlprImage,
    params: *const NlprDenoiseParams,
    out: *mut *mut NlprImage,
    stats: *mut NlprDenoiseStats,
) -> NlprStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let params = lift(to_params(params.as_ref().ok_or_else(|| null("params"))?))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = lift(nlpr::denoise(img, &params))?;
        if !stats.is_null() {
            stats.write(NlprDenoiseStats {
                mean_iterations: report.mean_iterations,
                converged_fraction: report.per_pixel_converged_fraction,
            });
        }
        write_out(out, boxed(report.output), "out")
    })
}

/// Closed-form non-local means over the full search window.
///
/// # Safety
/// `img` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpr_nlm(
    img: *const NlprImage,
    window: usize,
    patch_side: usize,
    h: f64,
    out: *mut *mut NlprImage,
) -> NlprStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let search = lift(SearchParams::new(window, patch_side, h))?;
        write_out(out, boxed(lift(nlpr::nlm_closed_form(img, &search))?), "out")
    })
}

/// Weighted lp regression of `count` points of dimension `dim`, started from their
/// weighted mean. `patches` is `count * dim` row-major; `estimate` receives `dim` values.
/// `iterations` and `converged` may be null. `max_iters = 0` selects the default cap.
///
/// # Safety
/// All non-null pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn nlpr_irls_solve(
    patches: *const f64,
    weights: *const f64,
    count: usize,
    dim: usize,
    p: f64,
    max_iters: usize,
    estimate: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> NlprStatus {
    guard(|| {
        if patches.is_null() || weights.is_null() || estimate.is_null() {
            return Err(null("patches, weights or estimate"));
        }
        if count == 0 || dim == 0 {
            return Err((NlprStatus::Degenerate, "need at least one point of positive dimension".into()));
        }
        let data = slice::from_raw_parts(patches, count * dim);
        let w = slice::from_raw_parts(weights, count);
        if let Some(bad) = w.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err((NlprStatus::InvalidParameter, format!("weights must be finite and nonnegative, got {bad}")));
        }
        let mut cloud = WeightedPatches::with_capacity(dim, dim, count);
        for (row, &wj) in data.chunks_exact(dim).zip(w) {
            cloud.push(row, wj);
        }
        let mut cfg = lift(IrlsConfig::for_patch(p, 1))?;
        cfg.tol = 1e-6 * (dim as f64).sqrt();
        if max_iters > 0 {
            cfg = cfg.with_max_iters(max_iters);
        }
        let init = lift(nlm_estimate(&cloud))?;
        let res = lift(irls_solve(&cloud, &cfg, init.values()))?;
        ptr::copy_nonoverlapping(res.estimate.values().as_ptr(), estimate, dim);
        if !iterations.is_null() {
            iterations.write(res.iterations);
        }
        if !converged.is_null() {
            converged.write(res.converged);
        }
        Ok(())
    })
}
