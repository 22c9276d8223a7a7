//! C ABI over the `dehaze` library.
//!
//! Images and configurations are opaque heap handles created and released
//! through this interface. Every fallible call returns a [`DhStatus`]; on
//! failure the message is available from [`dh_last_error_message`] on the
//! same thread until the next failing call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dehaze::metrics::{FLAG_EMPTY_EDGE_MASK, FLAG_NO_ORIGINAL_EDGES};
use dehaze::{DehazeError, ImageRgb, PipelineConfig};

/// Result code of every fallible call. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Decode = 4,
    Io = 5,
    Shape = 6,
    DegenerateImage = 7,
    Range = 8,
    SizeGuard = 9,
    Solver = 10,
    Config = 11,
    Panic = 12,
}

/// Set in [`DhReport::flags`] when the original has no visible edges.
pub const DH_FLAG_NO_ORIGINAL_EDGES: u32 = 1;
/// Set in [`DhReport::flags`] when the restored image has no visible edges.
pub const DH_FLAG_EMPTY_EDGE_MASK: u32 = 2;

/// Blind quality metrics of a restored image against its original.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DhReport {
    pub e: f64,
    pub sigma: f64,
    pub r_bar: f64,
    /// Bitwise OR of `DH_FLAG_*` values.
    pub flags: u32,
}

/// Opaque RGB image with samples in [0, 1].
pub struct DhImage {
    inner: ImageRgb,
}

/// Opaque pipeline configuration.
pub struct DhConfig {
    inner: PipelineConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).unwrap_or_default()));
}

fn status_of(err: &DehazeError) -> DhStatus {
    match err {
        DehazeError::NotFound { .. } => DhStatus::NotFound,
        DehazeError::Decode { .. } => DhStatus::Decode,
        DehazeError::Io { .. } => DhStatus::Io,
        DehazeError::Shape(_) => DhStatus::Shape,
        DehazeError::DegenerateImage(_) => DhStatus::DegenerateImage,
        DehazeError::Range(_) => DhStatus::Range,
        DehazeError::SizeGuard { .. } => DhStatus::SizeGuard,
        DehazeError::Solver { .. } => DhStatus::Solver,
        DehazeError::Config(_) => DhStatus::Config,
    }
}

fn fail(status: DhStatus, msg: impl Into<String>) -> DhStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (DhStatus, String)>) -> DhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DhStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(DhStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: DehazeError) -> (DhStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DhStatus, String) {
    (DhStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DhStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DhStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn image_ref<'a>(p: *const DhImage, what: &str) -> Result<&'a ImageRgb, (DhStatus, String)> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn sample_count(width: usize, height: usize) -> Result<usize, (DhStatus, String)> {
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| (DhStatus::InvalidArgument, "image dimensions overflow".into()))
}

/// Message of the last failing call on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn dh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates an image from interleaved 8-bit RGB, row-major, `len` bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_image_from_rgb8(
    width: usize,
    height: usize,
    data: *const u8,
    len: usize,
    out: *mut *mut DhImage,
) -> DhStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if len != sample_count(width, height)? {
            return Err((DhStatus::Shape, format!("expected {} bytes, got {len}", width * height * 3)));
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let inner = ImageRgb::from_rgb8(width, height, bytes).map_err(lib_err)?;
        put(out, DhImage { inner });
        Ok(())
    })
}

/// Creates an image from interleaved RGB samples in [0, 1], row-major.
///
/// # Safety
/// `data` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_image_from_f64(
    width: usize,
    height: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut DhImage,
) -> DhStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if len != sample_count(width, height)? {
            return Err((DhStatus::Shape, format!("expected {} samples, got {len}", width * height * 3)));
        }
        let samples = std::slice::from_raw_parts(data, len).to_vec();
        let inner = ImageRgb::from_vec(width, height, samples).map_err(lib_err)?;
        put(out, DhImage { inner });
        Ok(())
    })
}

/// Loads a PNG, JPEG or binary PPM file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_image_load(path: *const c_char, out: *mut *mut DhImage) -> DhStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = dehaze::load_image(path).map_err(lib_err)?;
        put(out, DhImage { inner });
        Ok(())
    })
}

/// Writes the image as an 8-bit PNG.
///
/// # Safety
/// `img` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dh_image_save(img: *const DhImage, path: *const c_char) -> DhStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let path = str_arg(path, "path")?;
        dehaze::save_image(img, path).map_err(lib_err)
    })
}

/// Width in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dh_image_width(img: *const DhImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.width())
}

/// Height in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dh_image_height(img: *const DhImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.height())
}

/// Copies the interleaved samples into `out`, which must hold exactly
/// `width * height * 3` doubles.
///
/// # Safety
/// `img` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dh_image_copy_f64(img: *const DhImage, out: *mut f64, len: usize) -> DhStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let src = img.as_slice();
        if len != src.len() {
            return Err((DhStatus::Shape, format!("expected {} samples, got {len}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
        Ok(())
    })
}

/// Copies the image quantized to 8 bits into `out` (`width * height * 3` bytes).
///
/// # Safety
/// `img` must be a live handle; `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dh_image_copy_rgb8(img: *const DhImage, out: *mut u8, len: usize) -> DhStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let bytes = img.to_rgb8();
        if len != bytes.len() {
            return Err((DhStatus::Shape, format!("expected {} bytes, got {len}", bytes.len())));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, len);
        Ok(())
    })
}

/// Releases an image. Null is ignored.
///
/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dh_image_free(img: *mut DhImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Default configuration: constant λ = 0.35 with CLAHE.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_config_default(out: *mut *mut DhConfig) -> DhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, DhConfig { inner: PipelineConfig::default() });
        Ok(())
    })
}

/// Parses a JSON pipeline configuration (same schema as the CLI `--config`
/// file) and validates it.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_config_from_json(json: *const c_char, out: *mut *mut DhConfig) -> DhStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner: PipelineConfig =
            serde_json::from_str(text).map_err(|e| (DhStatus::Config, format!("invalid config: {e}")))?;
        inner.validate().map_err(lib_err)?;
        put(out, DhConfig { inner });
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dh_config_free(cfg: *mut DhConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the full pipeline and stores the final image in `*out`.
///
/// # Safety
/// `img` and `cfg` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_run(img: *const DhImage, cfg: *const DhConfig, out: *mut *mut DhImage) -> DhStatus {
    guard(|| {
        let img = image_ref(img, "img")?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let result = dehaze::run_pipeline(img, &cfg.inner).map_err(lib_err)?.result;
        put(out, DhImage { inner: result });
        Ok(())
    })
}

/// Computes e, Σ and r̄ of `restored` against `original`.
///
/// # Safety
/// Both images must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dh_evaluate(
    original: *const DhImage,
    restored: *const DhImage,
    out: *mut DhReport,
) -> DhStatus {
    guard(|| {
        let original = image_ref(original, "original")?;
        let restored = image_ref(restored, "restored")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = dehaze::evaluate(original, restored).map_err(lib_err)?;
        let mut flags = 0;
        for f in &report.flags {
            if f == FLAG_NO_ORIGINAL_EDGES {
                flags |= DH_FLAG_NO_ORIGINAL_EDGES;
            } else if f == FLAG_EMPTY_EDGE_MASK {
                flags |= DH_FLAG_EMPTY_EDGE_MASK;
            }
        }
        *out = DhReport {
            e: report.e,
            sigma: report.sigma,
            r_bar: report.r_bar,
            flags,
        };
        Ok(())
    })
}
