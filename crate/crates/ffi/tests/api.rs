use std::ffi::{c_int, c_void, CStr, CString};
use std::ptr;

use rducb_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rducb_last_error()).to_string_lossy().into_owned() }
}

fn options(budget: usize, n_init: usize, seed: u64) -> RducbRunOptions {
    let mut o = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { rducb_run_options_default(o.as_mut_ptr()) }, RducbStatus::Ok);
    let mut o = unsafe { o.assume_init() };
    o.budget = budget;
    o.n_init = n_init;
    o.grid_size = 15;
    o.seed = seed;
    o
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(rducb_beta(3, ptr::null_mut()), RducbStatus::NullPointer);
        assert!(last_error().contains("out"));
        assert_eq!(rducb_decomposition_validate(ptr::null()), RducbStatus::NullPointer);
        let mut b = ptr::null_mut();
        assert_eq!(rducb_benchmark_new(ptr::null(), 3, &mut b), RducbStatus::NullPointer);
        rducb_trace_free(ptr::null_mut());
        rducb_string_free(ptr::null_mut());
    }
}

#[test]
fn scalar_helpers() {
    let mut b = 0.0;
    let mut e = 0;
    unsafe {
        assert_eq!(rducb_beta(1, &mut b), RducbStatus::Ok);
        assert!((b - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(rducb_beta(0, &mut b), RducbStatus::InvalidParameter);
        assert_eq!(rducb_edges_for_dim(250, &mut e), RducbStatus::Ok);
        assert_eq!(e, 50);
        assert_eq!(rducb_edges_for_dim(0, &mut e), RducbStatus::InvalidParameter);
        assert!(!CStr::from_ptr(rducb_version()).to_bytes().is_empty());
    }
}

#[test]
fn decompositions_round_trip_and_validate() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(rducb_decomposition_sample_round(10, 2, 5, 12, &mut g), RducbStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(rducb_decomposition_to_string(g, &mut s), RducbStatus::Ok);
        let text = CStr::from_ptr(s).to_owned();
        rducb_string_free(s);
        let mut n = 0;
        assert_eq!(rducb_decomposition_num_edges(g, &mut n), RducbStatus::Ok);
        assert_eq!(n, 2);
        rducb_decomposition_free(g);

        let mut h = ptr::null_mut();
        assert_eq!(rducb_decomposition_parse(10, text.as_ptr(), &mut h), RducbStatus::Ok);
        assert_eq!(rducb_decomposition_validate(h), RducbStatus::Ok);
        rducb_decomposition_free(h);

        // a cycle
        let bad = CString::new("1,2;2,3;1,3").unwrap();
        assert_eq!(rducb_decomposition_parse(3, bad.as_ptr(), &mut h), RducbStatus::Ok);
        assert_eq!(rducb_decomposition_validate(h), RducbStatus::InvalidParameter);
        rducb_decomposition_free(h);

        let junk = CString::new("1,x").unwrap();
        assert_eq!(rducb_decomposition_parse(3, junk.as_ptr(), &mut h), RducbStatus::Parse);
    }
}

#[test]
fn benchmark_run_and_csv() {
    unsafe {
        let name = CString::new("hartmann6").unwrap();
        let mut b = ptr::null_mut();
        assert_eq!(rducb_benchmark_new(name.as_ptr(), 6, &mut b), RducbStatus::Ok);
        let o = options(14, 4, 9);
        let mut t = ptr::null_mut();
        assert_eq!(rducb_run_benchmark(b, &o, &mut t), RducbStatus::Ok);
        let mut n = 0;
        rducb_trace_len(t, &mut n);
        assert_eq!(n, 14);
        let mut r = std::mem::zeroed::<RducbRound>();
        assert_eq!(rducb_trace_round(t, 13, &mut r), RducbStatus::Ok);
        assert_eq!(r.round, 14);
        assert!(r.best_regret >= 0.0 && r.beta > 0.0);
        assert_eq!(rducb_trace_round(t, 14, &mut r), RducbStatus::InvalidParameter);
        let mut x = [0.0; 6];
        assert_eq!(rducb_trace_x(t, 0, x.as_mut_ptr(), 5), RducbStatus::InvalidParameter);
        assert_eq!(rducb_trace_x(t, 0, x.as_mut_ptr(), 6), RducbStatus::Ok);
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(rducb_trace_write_csv(t, cpath.as_ptr()), RducbStatus::Ok);
        let back = rducb::cli::io::read_trace(std::fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(back.len(), 14);

        let missing = CString::new(dir.path().join("no/such/dir.csv").to_str().unwrap()).unwrap();
        assert_eq!(rducb_trace_write_csv(t, missing.as_ptr()), RducbStatus::Io);
        rducb_trace_free(t);
        rducb_benchmark_free(b);
    }
}

unsafe extern "C" fn fails_after_five(x: *const f64, d: usize, user: *mut c_void, y: *mut f64) -> c_int {
    let calls = &mut *(user as *mut usize);
    *calls += 1;
    if *calls > 5 {
        return 7;
    }
    *y = std::slice::from_raw_parts(x, d).iter().sum();
    0
}

#[test]
fn callback_failure_keeps_partial_trace() {
    unsafe {
        let mut calls = 0usize;
        let lo = [0.0; 3];
        let hi = [1.0; 3];
        let o = options(12, 3, 1);
        let mut t = ptr::null_mut();
        let status = rducb_run_callback(
            Some(fails_after_five),
            &mut calls as *mut usize as *mut c_void,
            lo.as_ptr(),
            hi.as_ptr(),
            3,
            RducbSense::Maximize,
            ptr::null(),
            &o,
            &mut t,
        );
        assert_eq!(status, RducbStatus::BlackBox);
        assert!(last_error().contains("round 6"), "{}", last_error());
        assert!(!t.is_null());
        let mut n = 0;
        rducb_trace_len(t, &mut n);
        assert_eq!(n, 5);
        rducb_trace_free(t);

        let mut t2 = ptr::null_mut();
        assert_eq!(
            rducb_run_callback(None, ptr::null_mut(), lo.as_ptr(), hi.as_ptr(), 3, RducbSense::Minimize, ptr::null(), &o, &mut t2),
            RducbStatus::NullPointer
        );
    }
}
