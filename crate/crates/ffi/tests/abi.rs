//! The C surface exercised from Rust: status codes, error messages, handle
//! lifecycles, and agreement with the underlying library.

use gpchaos_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_message() -> String {
    unsafe { CStr::from_ptr(gpc_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(gpc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn scattering_matches_the_analytic_square_well() {
    let (mut a, mut s_hat, mut tail) = (0.0, 0.0, 0.0);
    let code = unsafe {
        gpc_scatter_square_well(2.0, 1.0, 6.0, 6001, &mut a, &mut s_hat, &mut tail)
    };
    assert_eq!(code, GPC_OK);
    assert!((a - (1.0 - 1.0f64.tanh())).abs() < 1e-9, "a = {a}");
    assert!(s_hat > 0.0 && s_hat <= 1.0);
    assert!(tail < 1e-10);

    let code = unsafe {
        gpc_scatter_square_well(-2.0, 1.0, 6.0, 6001, &mut a, &mut s_hat, &mut tail)
    };
    assert_eq!(code, GPC_INVALID);
    assert!(last_message().contains("depth"), "{}", last_message());

    let code =
        unsafe { gpc_scatter_square_well(2.0, 1.0, 6.0, 6001, ptr::null_mut(), &mut s_hat, &mut tail) };
    assert_eq!(code, GPC_MISUSE);
}

#[test]
fn gp_handle_reports_the_harmonic_ground_state() {
    let mut handle: *mut GpcGp = ptr::null_mut();
    let code = unsafe {
        gpc_gp_solve(1, 129, 6.0, 0, 1.0, 0.0, 1e-10, 200_000, &mut handle)
    };
    assert_eq!(code, GPC_OK, "{}", last_message());
    assert!(!handle.is_null());

    let mut lambda = 0.0;
    assert_eq!(unsafe { gpc_gp_lambda(handle, &mut lambda) }, GPC_OK);
    assert!((lambda - 1.0).abs() < 1e-4, "lambda = {lambda}");

    let (mut k, mut t, mut i, mut tot) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(unsafe { gpc_gp_energy(handle, &mut k, &mut t, &mut i, &mut tot) }, GPC_OK);
    assert!((k + t + i - tot).abs() < 1e-12);
    assert_eq!(i, 0.0);

    let (mut dim, mut n, mut half_width) = (0usize, 0usize, 0.0f64);
    assert_eq!(unsafe { gpc_gp_grid(handle, &mut dim, &mut n, &mut half_width) }, GPC_OK);
    assert_eq!((dim, n), (1, 129));

    let mut rho = vec![0.0; n];
    assert_eq!(unsafe { gpc_gp_density(handle, rho.as_mut_ptr(), rho.len()) }, GPC_OK);
    let h = 2.0 * half_width / (n as f64 - 1.0);
    let mass: f64 = rho.iter().map(|v| v * h).sum();
    assert!((mass - 1.0).abs() < 1e-6, "mass = {mass}");
    assert_eq!(unsafe { gpc_gp_density(handle, rho.as_mut_ptr(), n - 1) }, GPC_MISUSE);

    unsafe { gpc_gp_free(handle) };

    let mut bad: *mut GpcGp = ptr::null_mut();
    let code = unsafe { gpc_gp_solve(1, 129, 6.0, 7, 1.0, 0.0, 1e-10, 200_000, &mut bad) };
    assert_eq!(code, GPC_INVALID);
    assert!(bad.is_null());
    assert_eq!(unsafe { gpc_gp_lambda(ptr::null(), &mut lambda) }, GPC_MISUSE);
}

#[test]
fn nbody_handle_agrees_with_the_free_oracle() {
    let mut handle: *mut GpcNbody = ptr::null_mut();
    // two free particles in a harmonic trap: E0 = 2, components (1/2, 1/2, 0)
    let code = unsafe {
        gpc_nbody_solve(
            2, 1, 65, 5.0, 0, 1.0, 0, 0.0, 0.0, 0.0, 0, 0.0, 1e-8, 200_000, &mut handle,
        )
    };
    assert_eq!(code, GPC_OK, "{}", last_message());

    let mut energy = 0.0;
    assert_eq!(unsafe { gpc_nbody_energy(handle, &mut energy) }, GPC_OK);
    assert!((energy - 2.0).abs() < 1e-4, "E0 = {energy}");

    let (mut k, mut t, mut i, mut tot) = (0.0, 0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { gpc_nbody_components(handle, &mut k, &mut t, &mut i, &mut tot) },
        GPC_OK
    );
    assert!((tot - energy / 2.0).abs() < 1e-10);
    assert_eq!(i, 0.0);
    assert!((k - t).abs() < 1e-3, "virial split {k} vs {t}");

    let mut marg = vec![0.0; 65];
    assert_eq!(unsafe { gpc_nbody_marginal(handle, 1, marg.as_mut_ptr(), 65) }, GPC_OK);
    let h = 10.0 / 64.0;
    let mass: f64 = marg.iter().map(|v| v * h).sum();
    assert!((mass - 1.0).abs() < 1e-6);
    // asking for more particles than solved is an input error, not misuse
    assert_eq!(unsafe { gpc_nbody_marginal(handle, 3, marg.as_mut_ptr(), 65) }, GPC_INVALID);

    let mut residual = 0.0;
    assert_eq!(unsafe { gpc_nbody_residual(handle, &mut residual) }, GPC_OK);
    assert!(residual < 1e-8 * 2.0);

    unsafe { gpc_nbody_free(handle) };
}

#[test]
fn buffer_metrics_match_closed_forms() {
    let n = 201usize;
    let half_width = 8.0;
    let h = 2.0 * half_width / (n as f64 - 1.0);
    let gaussian = |mu: f64, sigma: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = -half_width + i as f64 * h;
                (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp()
            })
            .collect()
    };
    let p = gaussian(0.0, 1.0);
    let q = gaussian(0.5, 1.0);

    let mut tv = 0.0;
    let code = unsafe {
        gpc_total_variation(1, n, half_width, p.as_ptr(), p.as_ptr(), p.len(), &mut tv)
    };
    assert_eq!(code, GPC_OK, "{}", last_message());
    assert_eq!(tv, 0.0);

    // KL of equal-width shifted gaussians: mu^2 / (2 sigma^2) = 1/8
    let mut kl = 0.0;
    let code = unsafe {
        gpc_relative_entropy(1, n, half_width, p.as_ptr(), q.as_ptr(), p.len(), 1, &mut kl)
    };
    assert_eq!(code, GPC_OK, "{}", last_message());
    assert!((kl - 0.125).abs() < 1e-3, "kl = {kl}");

    // relative Fisher of the same pair: mu^2 / sigma^4 = 1/4
    let mut fisher = 0.0;
    let code = unsafe {
        gpc_relative_fisher(1, n, half_width, p.as_ptr(), q.as_ptr(), p.len(), 1, &mut fisher)
    };
    assert_eq!(code, GPC_OK, "{}", last_message());
    assert!((fisher - 0.25).abs() < 2e-3, "rel fisher = {fisher}");

    // entropy of the standard gaussian: ln sqrt(2 pi e)
    let mut ent = 0.0;
    let code = unsafe { gpc_entropy(1, n, half_width, p.as_ptr(), p.len(), 4.0, &mut ent) };
    assert_eq!(code, GPC_OK, "{}", last_message());
    let exact = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    assert!((ent + exact).abs() < 1e-3, "entropy = {ent}, -exact = {}", -exact);

    let mut info = 0.0;
    let code = unsafe { gpc_fisher_information(1, n, half_width, p.as_ptr(), p.len(), &mut info) };
    assert_eq!(code, GPC_OK, "{}", last_message());
    assert!((info - 1.0).abs() < 1e-3, "fisher = {info}");

    // mismatched buffer length is misuse-by-size, reported as invalid input
    let code = unsafe {
        gpc_total_variation(1, n, half_width, p.as_ptr(), q.as_ptr(), p.len() - 1, &mut tv)
    };
    assert_eq!(code, GPC_INVALID);
    assert!(last_message().contains("values"), "{}", last_message());
}

#[test]
fn wasserstein_on_shifted_point_clouds_is_the_shift() {
    let xs: Vec<f64> = (0..32).map(|i| i as f64 * 0.01).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x + 0.125).collect();
    let mut w = 0.0;
    let code = unsafe {
        gpc_wasserstein(1, xs.as_ptr(), ys.as_ptr(), 32, 1, -1.0, 1, &mut w)
    };
    assert_eq!(code, GPC_OK, "{}", last_message());
    assert!((w - 0.125).abs() < 1e-12, "w1 = {w}");

    let code = unsafe {
        gpc_wasserstein(1, xs.as_ptr(), ys.as_ptr(), 32, 2, -1.0, 1, &mut w)
    };
    assert_eq!(code, GPC_OK);
    assert!((w - 0.125).abs() < 1e-12, "w2 = {w}");

    // truncated metric can only shrink distances; overlapping clouds can
    // even beat the truncation by rematching inside the overlap
    let code = unsafe {
        gpc_wasserstein(1, xs.as_ptr(), ys.as_ptr(), 32, 1, 0.05, 1, &mut w)
    };
    assert_eq!(code, GPC_OK);
    assert!(w > 0.0 && w <= 0.05 + 1e-12, "truncated w1 = {w}");

    // far separation saturates the truncation exactly
    let far: Vec<f64> = xs.iter().map(|x| x + 2.0).collect();
    let code = unsafe {
        gpc_wasserstein(1, xs.as_ptr(), far.as_ptr(), 32, 1, 0.05, 1, &mut w)
    };
    assert_eq!(code, GPC_OK);
    assert!((w - 0.05).abs() < 1e-12, "saturated w1 = {w}");

    let code = unsafe {
        gpc_wasserstein(1, ptr::null(), ys.as_ptr(), 32, 1, -1.0, 1, &mut w)
    };
    assert_eq!(code, GPC_INVALID);
    let code = unsafe { gpc_wasserstein(1, xs.as_ptr(), ys.as_ptr(), 32, 7, -1.0, 1, &mut w) };
    assert_eq!(code, GPC_INVALID);
    assert!(last_message().contains("order"), "{}", last_message());
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/gpchaos.h"
    ))
    .expect("build.rs writes the header");
    for symbol in [
        "gpc_version",
        "gpc_last_error_message",
        "gpc_scatter_square_well",
        "gpc_gp_solve",
        "gpc_gp_density",
        "gpc_gp_free",
        "gpc_nbody_solve",
        "gpc_nbody_components",
        "gpc_nbody_free",
        "gpc_entropy",
        "gpc_relative_entropy",
        "gpc_relative_fisher",
        "gpc_fisher_information",
        "gpc_total_variation",
        "gpc_wasserstein",
        "GPC_OK",
        "GPC_NUMERICAL",
        "struct GpcGp GpcGp",
        "struct GpcNbody GpcNbody",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
