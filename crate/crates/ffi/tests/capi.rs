use std::ffi::{CStr, CString};
use std::ptr;

use cvlearn_ffi::*;

fn last_error() -> String {
    let p = cv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn planner_matches_reference_count() {
    let mut n = 0u64;
    assert_eq!(unsafe { cv_plan_pairs(0.1, 0.05, 1, &mut n) }, CvStatus::CV_OK);
    assert_eq!(n, 3506);
    let (mut n1, mut n2, mut q) = (0u64, 0u64, 0u64);
    assert_eq!(unsafe { cv_plan_learn(0.2, 0.1, 100, &mut n1, &mut n2, &mut q) }, CvStatus::CV_OK);
    assert_eq!((n1, n2), (14_559_259, 29_859));
    assert_eq!(q, 2 * n1 + 2 * n2);
}

#[test]
fn handle_lifecycle_and_characteristic() {
    let mut s: *mut CvState = ptr::null_mut();
    assert_eq!(unsafe { cv_state_vacuum(1, &mut s) }, CvStatus::CV_OK);
    assert!(!s.is_null());
    assert_eq!(unsafe { cv_state_modes(s) }, 1);
    let (mut re, mut im) = (0.0, 0.0);
    let alpha = [1.0, 0.0];
    assert_eq!(unsafe { cv_characteristic(s, alpha.as_ptr(), &mut re, &mut im) }, CvStatus::CV_OK);
    assert!((re - (-0.5f64).exp()).abs() < 1e-14 && im.abs() < 1e-15);
    unsafe { cv_state_free(s) };
    unsafe { cv_state_free(ptr::null_mut()) };
}

#[test]
fn toml_constructor_and_parse_errors() {
    let spec = CString::new("family = \"cat\"\namplitude = [1.0, 0.0]\nparity = 1\n").unwrap();
    let mut s: *mut CvState = ptr::null_mut();
    assert_eq!(unsafe { cv_state_from_toml(spec.as_ptr(), &mut s) }, CvStatus::CV_OK);
    unsafe { cv_state_free(s) };

    let bad = CString::new("family = \"cat\"\nparity = 1\n").unwrap();
    let mut s: *mut CvState = ptr::null_mut();
    assert_eq!(unsafe { cv_state_from_toml(bad.as_ptr(), &mut s) }, CvStatus::CV_PARSE);
    assert!(s.is_null());
    assert!(last_error().contains("amplitude"));
}

#[test]
fn null_and_invalid_arguments_are_reported() {
    assert_eq!(unsafe { cv_state_vacuum(1, ptr::null_mut()) }, CvStatus::CV_NULL_POINTER);
    assert!(last_error().contains("out"));
    let mut n = 0u64;
    assert_eq!(unsafe { cv_plan_pairs(0.0, 0.05, 1, &mut n) }, CvStatus::CV_INVALID_ARGUMENT);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { cv_characteristic(ptr::null(), [0.0, 0.0].as_ptr(), &mut re, &mut im) }, CvStatus::CV_NULL_POINTER);
    let mut s: *mut CvState = ptr::null_mut();
    assert_eq!(unsafe { cv_state_cat(1.0, 0.0, 3, &mut s) }, CvStatus::CV_INVALID_ARGUMENT);
}

#[test]
fn learn_points_through_the_abi() {
    let mut s: *mut CvState = ptr::null_mut();
    assert_eq!(unsafe { cv_state_vacuum(1, &mut s) }, CvStatus::CV_OK);
    let pts = [0.0, 0.0, 0.5, 0.0, 0.0, 0.8];
    let mut out = [0.0; 6];
    let mut branch = [9u8; 3];
    let mut copies = 0u64;
    let status = unsafe {
        cv_learn_points(s, pts.as_ptr(), 3, 0.3, 0.1, ptr::null(), 11, out.as_mut_ptr(), branch.as_mut_ptr(), &mut copies)
    };
    assert_eq!(status, CvStatus::CV_OK, "{}", last_error());
    for (k, a) in pts.chunks(2).enumerate() {
        let truth = (-(a[0] * a[0] + a[1] * a[1]) / 2.0).exp();
        assert!((out[2 * k] - truth).abs() <= 0.3 && out[2 * k + 1].abs() <= 0.3);
        assert!(branch[k] <= CV_BRANCH_IMAG_SIGN);
    }
    assert_eq!(branch[0], CV_BRANCH_REAL_SIGN);
    assert!(copies > 0);

    let tag = CString::new("no-such-backend").unwrap();
    let status = unsafe { cv_estimate_square(s, pts.as_ptr(), 3, 100, tag.as_ptr(), 1, out.as_mut_ptr()) };
    assert_eq!(status, CvStatus::CV_INVALID_ARGUMENT);
    unsafe { cv_state_free(s) };
}

#[test]
fn square_estimates_are_seed_deterministic() {
    let mut s: *mut CvState = ptr::null_mut();
    assert_eq!(unsafe { cv_state_fock(1, &mut s) }, CvStatus::CV_OK);
    let pts = [0.4, 0.1, -0.7, 0.3];
    let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
    unsafe {
        assert_eq!(cv_estimate_square(s, pts.as_ptr(), 2, 5000, ptr::null(), 3, a.as_mut_ptr()), CvStatus::CV_OK);
        assert_eq!(cv_estimate_square(s, pts.as_ptr(), 2, 5000, ptr::null(), 3, b.as_mut_ptr()), CvStatus::CV_OK);
        cv_state_free(s);
    }
    assert_eq!(a, b);
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cvlearn.h")).unwrap();
    for name in ["typedef struct CvState CvState", "CV_PANIC", "cv_learn_points", "cv_state_free", "cv_last_error", "size_t n_points"] {
        assert!(header.contains(name), "missing {name}");
    }
    assert!(!unsafe { CStr::from_ptr(cv_version()) }.to_bytes().is_empty());
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempdir();
    let src = dir.join("smoke.c");
    std::fs::write(&src, "#include \"cvlearn.h\"\nint main(void) { CvState *s = 0; return cv_state_modes(s) == 0 ? 0 : 1; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("cvlearn-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
