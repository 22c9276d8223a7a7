use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use dehaze_ffi::*;

fn gradient(w: usize, h: usize) -> Vec<u8> {
    (0..w * h)
        .flat_map(|i| {
            let (x, y) = (i % w, i / w);
            [(x * 255 / (w - 1)) as u8, (y * 255 / (h - 1)) as u8, ((x ^ y) * 7 % 256) as u8]
        })
        .collect()
}

fn last_error() -> String {
    let p = dh_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_and_evaluate_through_handles() {
    let (w, h) = (24, 16);
    let bytes = gradient(w, h);
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(dh_image_from_rgb8(w, h, bytes.as_ptr(), bytes.len(), &mut img), DhStatus::Ok);
        assert_eq!((dh_image_width(img), dh_image_height(img)), (w, h));

        let mut back = vec![0u8; bytes.len()];
        assert_eq!(dh_image_copy_rgb8(img, back.as_mut_ptr(), back.len()), DhStatus::Ok);
        assert_eq!(back, bytes);

        let json = CString::new(r#"{"frontend": {"lambda_mode": "inverted"}, "lce": "hist_eq"}"#).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(dh_config_from_json(json.as_ptr(), &mut cfg), DhStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(dh_run(img, cfg, &mut out), DhStatus::Ok);
        let mut samples = vec![0.0f64; w * h * 3];
        assert_eq!(dh_image_copy_f64(out, samples.as_mut_ptr(), samples.len()), DhStatus::Ok);
        assert!(samples.iter().all(|v| (0.0..=1.0).contains(v)));

        let mut report = DhReport::default();
        assert_eq!(dh_evaluate(img, img, &mut report), DhStatus::Ok);
        assert_eq!((report.e, report.sigma), (0.0, 0.0));
        assert!((report.r_bar - 1.0).abs() <= 1e-3);
        assert_eq!(dh_evaluate(img, out, &mut report), DhStatus::Ok);
        assert!(report.sigma >= 0.0 && report.sigma <= 1.0);

        dh_image_free(out);
        dh_config_free(cfg);
        dh_image_free(img);
    }
}

#[test]
fn default_config_matches_library_default() {
    let bytes = gradient(16, 16);
    unsafe {
        let mut img = ptr::null_mut();
        let mut cfg = ptr::null_mut();
        let mut out = ptr::null_mut();
        assert_eq!(dh_image_from_rgb8(16, 16, bytes.as_ptr(), bytes.len(), &mut img), DhStatus::Ok);
        assert_eq!(dh_config_default(&mut cfg), DhStatus::Ok);
        assert_eq!(dh_run(img, cfg, &mut out), DhStatus::Ok);
        let mut got = vec![0.0; 16 * 16 * 3];
        dh_image_copy_f64(out, got.as_mut_ptr(), got.len());

        let lib_img = dehaze::ImageRgb::from_rgb8(16, 16, &bytes).unwrap();
        let expected = dehaze::run_pipeline(&lib_img, &dehaze::PipelineConfig::default()).unwrap().result;
        assert_eq!(got.as_slice(), expected.as_slice());
        dh_image_free(out);
        dh_config_free(cfg);
        dh_image_free(img);
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("x.png").to_str().unwrap()).unwrap();
    let samples: Vec<f64> = (0..8 * 6 * 3).map(|i| (i % 11) as f64 / 10.0).collect();
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(dh_image_from_f64(8, 6, samples.as_ptr(), samples.len(), &mut img), DhStatus::Ok);
        assert_eq!(dh_image_save(img, path.as_ptr()), DhStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(dh_image_load(path.as_ptr(), &mut loaded), DhStatus::Ok);
        let mut back = vec![0.0; samples.len()];
        dh_image_copy_f64(loaded, back.as_mut_ptr(), back.len());
        assert!(back.iter().zip(&samples).all(|(a, b)| (a - b).abs() <= 1.0 / 255.0));
        dh_image_free(loaded);
        dh_image_free(img);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut img = ptr::null_mut();
        assert_eq!(dh_image_from_rgb8(2, 2, ptr::null(), 12, &mut img), DhStatus::NullPointer);
        assert!(last_error().contains("data"));

        let bytes = [0u8; 11];
        assert_eq!(dh_image_from_rgb8(2, 2, bytes.as_ptr(), 11, &mut img), DhStatus::Shape);

        let bad = [0.5, 2.0, 0.1];
        assert_eq!(dh_image_from_f64(1, 1, bad.as_ptr(), 3, &mut img), DhStatus::Range);

        let missing = CString::new("/nonexistent/dir/x.png").unwrap();
        assert_eq!(dh_image_load(missing.as_ptr(), &mut img), DhStatus::NotFound);
        assert!(img.is_null());

        let mut cfg = ptr::null_mut();
        let json = CString::new(r#"{"lce": {"gamma": -1}}"#).unwrap();
        assert_eq!(dh_config_from_json(json.as_ptr(), &mut cfg), DhStatus::Config);
        let json = CString::new("not json").unwrap();
        assert_eq!(dh_config_from_json(json.as_ptr(), &mut cfg), DhStatus::Config);

        let flat = [128u8; 4 * 4 * 3];
        assert_eq!(dh_image_from_rgb8(4, 4, flat.as_ptr(), flat.len(), &mut img), DhStatus::Ok);
        assert_eq!(dh_config_default(&mut cfg), DhStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(dh_run(img, cfg, &mut out), DhStatus::DegenerateImage);
        assert!(out.is_null());
        assert_eq!(dh_run(img, ptr::null(), &mut out), DhStatus::NullPointer);
        assert_eq!(dh_image_width(ptr::null()), 0);

        dh_config_free(cfg);
        dh_image_free(img);
        dh_image_free(ptr::null_mut());
        dh_config_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_interface() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dehaze.h")).unwrap();
    for symbol in [
        "typedef struct DhImage DhImage;",
        "typedef struct DhConfig DhConfig;",
        "DH_STATUS_OK = 0",
        "dh_image_from_rgb8",
        "dh_run",
        "dh_evaluate",
        "dh_last_error_message",
    ] {
        assert!(header.contains(symbol), "missing {symbol}");
    }
}

#[test]
fn generated_header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"dehaze.h\"\nint main(void) { DhImage *img = 0; DhReport r; (void)r;\n\
         return dh_image_width(img) == 0 && dh_last_error_message() != (const char *)1 ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
