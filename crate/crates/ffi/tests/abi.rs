use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sparsedp_ffi::*;

fn last_error() -> String {
    let p = sdp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn accountant_values() {
    let mut v = 0.0;
    assert_eq!(unsafe { sdp_gaussian_rdp(2, 1.0, 1.0, &mut v) }, SDP_OK);
    assert_eq!(v, 1.0);
    assert_eq!(unsafe { sdp_csgm_rdp(2, 1.0, 1.0, 1, 0.5, 1.0, &mut v) }, SDP_OK);
    let expected = (1.0 + 0.25 * (1f64.exp() - 1.0)).ln();
    assert!((v - expected).abs() < 1e-14);
    let mut w = 0.0;
    assert_eq!(unsafe { sdp_sgmf_rdp(2, 1.0, 1.0, 1, 1.0, 0.5, 1.0, &mut w) }, SDP_OK);
    assert_eq!(v, w);
}

#[test]
fn conversion_and_calibration_agree() {
    let mut sigma = 0.0;
    let rc = unsafe { sdp_calibrate_sigma(SDP_MECHANISM_CSGM, 5.0, 1e-8, 1.0, 0.05, 400, 0.1, 1.0, &mut sigma) };
    assert_eq!(rc, SDP_OK);
    let orders: Vec<u32> = (2..=256).collect();
    let eps: Vec<f64> = orders
        .iter()
        .map(|&a| {
            let mut e = 0.0;
            assert_eq!(unsafe { sdp_csgm_rdp(a, 1.0, 0.05, 400, 0.1, sigma, &mut e) }, SDP_OK);
            e
        })
        .collect();
    let (mut e, mut a) = (0.0, 0u32);
    assert_eq!(
        unsafe { sdp_rdp_to_dp(orders.as_ptr(), eps.as_ptr(), orders.len(), 1e-8, &mut e, &mut a) },
        SDP_OK
    );
    assert!(e <= 5.0 && e > 4.99, "{e}");
}

#[test]
fn errors_set_codes_and_messages() {
    let mut v = 0.0;
    assert_eq!(unsafe { sdp_gaussian_rdp(1, 1.0, 1.0, &mut v) }, SDP_ERR_DOMAIN);
    assert!(last_error().contains("order"));
    assert_eq!(unsafe { sdp_gaussian_rdp(2, 1.0, 1.0, ptr::null_mut()) }, SDP_ERR_NULL);
    let rc = unsafe { sdp_calibrate_sigma(9, 1.0, 1e-5, 1.0, 1.0, 1, 1.0, 1.0, &mut v) };
    assert_eq!(rc, SDP_ERR_DOMAIN);
    let rc = unsafe { sdp_calibrate_sigma(SDP_MECHANISM_GAUSSIAN, 1e-12, 1e-300, 1.0, 1.0, 1, 1.0, 1.0, &mut v) };
    assert_eq!(rc, SDP_ERR_INFEASIBLE);
    assert_eq!(unsafe { sdp_gaussian_rdp(2, 1.0, 1.0, &mut v) }, SDP_OK);
    assert!(sdp_last_error().is_null());
}

#[test]
fn rotation_round_trip() {
    let orig: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
    let mut v = orig.clone();
    assert_eq!(unsafe { sdp_hadamard_rotate(v.as_mut_ptr(), v.len(), 42, false) }, SDP_OK);
    assert_ne!(v, orig);
    assert_eq!(unsafe { sdp_hadamard_rotate(v.as_mut_ptr(), v.len(), 42, true) }, SDP_OK);
    for (a, b) in v.iter().zip(&orig) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut odd = vec![1.0; 6];
    assert_eq!(unsafe { sdp_hadamard_rotate(odd.as_mut_ptr(), 6, 1, false) }, SDP_ERR_DOMAIN);
}

#[test]
fn factorization_handle_lifecycle() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sdp_factorization_build(SDP_METHOD_SQRT, 2, false, &mut h) }, SDP_OK);
    assert_eq!(unsafe { sdp_factorization_rounds(h) }, 2);
    let mut c = [0.0; 4];
    assert_eq!(unsafe { sdp_factorization_copy_c(h, c.as_mut_ptr(), 4) }, SDP_OK);
    assert_eq!(c, [1.0, 0.0, 0.5, 1.0]);
    assert_eq!(unsafe { sdp_factorization_copy_b(h, c.as_mut_ptr(), 3) }, SDP_ERR_BUFFER);
    let (mut s, mut o, mut conv) = (0.0, 0.0, false);
    assert_eq!(unsafe { sdp_factorization_info(h, &mut s, &mut o, &mut conv) }, SDP_OK);
    assert!((s - 1.25f64.sqrt()).abs() < 1e-15 && conv);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sdp_factorization_save(h, path.as_ptr()) }, SDP_OK);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { sdp_factorization_load(path.as_ptr(), &mut g) }, SDP_OK);
    let mut c2 = [0.0; 4];
    assert_eq!(unsafe { sdp_factorization_copy_c(g, c2.as_mut_ptr(), 4) }, SDP_OK);
    assert_eq!(c, c2);
    unsafe {
        sdp_factorization_free(h);
        sdp_factorization_free(g);
        sdp_factorization_free(ptr::null_mut());
    }
    assert_eq!(unsafe { sdp_factorization_rounds(ptr::null()) }, 0);
    let missing = CString::new("/nonexistent/f.json").unwrap();
    let mut z = ptr::null_mut();
    assert_eq!(unsafe { sdp_factorization_load(missing.as_ptr(), &mut z) }, SDP_ERR_IO);
    assert!(z.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sparsedp.h")).unwrap();
    for name in [
        "sdp_last_error",
        "sdp_gaussian_rdp",
        "sdp_csgm_rdp",
        "sdp_sgmf_rdp",
        "sdp_rdp_to_dp",
        "sdp_calibrate_sigma",
        "sdp_hadamard_rotate",
        "sdp_factorization_build",
        "sdp_factorization_load",
        "sdp_factorization_save",
        "sdp_factorization_rounds",
        "sdp_factorization_info",
        "sdp_factorization_copy_b",
        "sdp_factorization_copy_c",
        "sdp_factorization_free",
        "typedef struct SdpFactorization SdpFactorization",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libsparsedp_ffi.a");
    lib.exists().then_some(lib)
}

/// Compiles and runs a small C client when a C compiler and the static
/// library are available.
#[test]
fn c_client_links_against_header() {
    let (Some(lib), Ok(cc)) = (static_lib(), which_cc()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(
        &src,
        r#"
#include <math.h>
#include <stdio.h>
#include "sparsedp.h"
int main(void) {
    double eps = 0.0;
    if (sdp_gaussian_rdp(2, 1.0, 1.0, &eps) != SDP_OK || eps != 1.0) return 1;
    if (sdp_gaussian_rdp(0, 1.0, 1.0, &eps) != SDP_ERR_DOMAIN) return 2;
    if (sdp_last_error() == NULL) return 3;
    SdpFactorization *f = NULL;
    if (sdp_factorization_build(SDP_METHOD_SQRT, 4, true, &f) != SDP_OK) return 4;
    double s = 0.0, obj = 0.0; bool conv = false;
    if (sdp_factorization_info(f, &s, &obj, &conv) != SDP_OK) return 5;
    if (fabs(s - 1.0) > 1e-12 || !conv) return 6;
    sdp_factorization_free(f);
    printf("ok\n");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("client");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to compile");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C client exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
