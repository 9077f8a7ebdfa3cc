use aads_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn ads(d: usize) -> *mut AadsModel {
    let spec = CString::new(format!(r#"{{"family": "ads_global", "d": {d}, "R": 1.0}}"#)).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { aads_model_new(spec.as_ptr(), &mut m) }, AadsStatus::Ok);
    m
}

#[test]
fn metric_and_residual_through_the_abi() {
    let m = ads(4);
    unsafe {
        assert_eq!(aads_model_dim(m), 4);
        let x = [0.0, 0.5, 1.0, 1.0];
        let mut g = [0.0; 16];
        assert_eq!(aads_metric_at(m, x.as_ptr(), 4, g.as_mut_ptr()), AadsStatus::Ok);
        assert!((g[0] + 1.25).abs() < 1e-14);
        let mut res = 1.0;
        assert_eq!(aads_einstein_residual(m, x.as_ptr(), 4, -3.0, &mut res), AadsStatus::Ok);
        assert!(res < 1e-10);
        aads_model_free(m);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new(r#"{"family": "schwarzschild_ads", "d": 4, "m": -1.0}"#).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { aads_model_new(bad.as_ptr(), &mut m) };
    assert_eq!(st, AadsStatus::Construction);
    assert!(m.is_null());
    let msg = unsafe { CStr::from_ptr(aads_last_error()) }.to_str().unwrap();
    assert!(msg.contains("mass"), "{msg}");
    let junk = CString::new("{not json").unwrap();
    assert_eq!(unsafe { aads_model_new(junk.as_ptr(), &mut m) }, AadsStatus::InvalidInput);
    assert_eq!(unsafe { aads_metric_at(ptr::null(), ptr::null(), 4, ptr::null_mut()) }, AadsStatus::NullPointer);
    let m = ads(4);
    let mut g = [0.0; 9];
    assert_eq!(unsafe { aads_metric_at(m, [0.0; 3].as_ptr(), 3, g.as_mut_ptr()) }, AadsStatus::Domain);
    unsafe { aads_model_free(m) };
}

#[test]
fn radial_ray_reaches_the_boundary() {
    let spec = CString::new(r#"{"family": "ads_closure", "d": 4}"#).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(aads_model_new(spec.as_ptr(), &mut m), AadsStatus::Ok);
        let x = [0.0, 1.0, 1.5707963267948966, 0.3];
        let mut g = [0.0; 16];
        assert_eq!(aads_metric_at(m, x.as_ptr(), 4, g.as_mut_ptr()), AadsStatus::Ok);
        let v = [1.0 / (-g[0]).sqrt(), -1.0 / g[5].sqrt(), 0.0, 0.0];
        let (mut tau, mut e, mut hit) = (0.0, [0.0; 3], 0);
        let st = aads_geodesic_boundary_hit(m, x.as_ptr(), v.as_ptr(), 4, 100.0, &mut tau, e.as_mut_ptr(), &mut hit);
        assert_eq!(st, AadsStatus::Ok);
        assert_eq!(hit, 1);
        assert!(tau > 0.0);
        aads_model_free(m);
    }
}

#[test]
fn ads_fan_has_no_delay() {
    let m = ads(4);
    let e = [0.0, 1.0, 0.0];
    let (mut lo, mut hi) = (1.0, 1.0);
    unsafe {
        assert_eq!(aads_time_delay(m, 0.0, e.as_ptr(), 3, 6, &mut lo, &mut hi), AadsStatus::Ok);
        aads_model_free(m);
    }
    assert!(lo.abs() < 1e-6 && hi.abs() < 1e-6);
}

#[test]
fn fg_table_round_trips_as_json() {
    let kind = CString::new("esu").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(aads_fg_table_json(kind.as_ptr(), 4, 2, &mut s), AadsStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        aads_string_free(s);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["d"], 4);
    }
}

#[test]
fn header_declares_the_abi() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/aads.h")).unwrap();
    for f in ["aads_model_new", "aads_model_free", "aads_metric_at", "aads_last_error", "aads_fg_table_json", "AADS_STATUS_OK"] {
        assert!(h.contains(f), "{f} missing from header");
    }
}
