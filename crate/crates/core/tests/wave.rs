use approx::assert_relative_eq;
use shockfront::reduced::fast_reduced_rhs;
use shockfront::wave::{
    layer_profile_xi, layer_shock_profile, matching_residual, singular_wavespeed, solve_wave_bvp_with, BvpOptions,
    WaveProfile,
};
use shockfront::Model;

#[test]
fn matching_residual_changes_sign_across_the_speed() {
    let m = Model::default();
    let c0 = singular_wavespeed(&m, (0.17, 0.22)).unwrap();
    let lo = matching_residual(&m, c0 - 1e-3).unwrap();
    let hi = matching_residual(&m, c0 + 1e-3).unwrap();
    assert!(lo * hi < 0.0, "{lo} {hi}");
    assert!(matching_residual(&m, c0).unwrap().abs() < 1e-9);
}

// The cubic potential makes the layer a tanh; the integrated heteroclinic
// must sit on the same curve w(u) in the phase plane.
#[test]
fn integrated_layer_lies_on_closed_form_orbit() {
    let m = Model::default();
    let g = m.singular_geometry().unwrap();
    let (um, up) = (g.u_minus, g.u_plus);
    let (mid, s) = (0.5 * (um + up), 0.5 * (up - um));
    let k = s; // sqrt(a/2) with a = 2
    for (u, w) in layer_shock_profile(&m, g.v_star, 300).unwrap() {
        let exact = -(k / s) * (s * s - (u - mid) * (u - mid));
        assert!((w - exact).abs() < 1e-8, "u = {u}: {w} vs {exact}");
    }
}

// (ū', ū'') along the layer solves the frozen-coefficient fast problem;
// the derivatives of the closed form are taken by central differences.
#[test]
fn layer_derivative_solves_fast_problem() {
    let m = Model::default();
    let h = 1e-3;
    let slope = |x: f64| layer_profile_xi(&m, x).unwrap().1;
    let curvature = |x: f64| (slope(x + h) - slope(x - h)) / (2.0 * h);
    for xi in [-3.0, -1.0, 0.0, 0.5, 2.0] {
        let (ub, up) = layer_profile_xi(&m, xi).unwrap();
        let upp = curvature(xi);
        let uppp = (curvature(xi + h) - curvature(xi - h)) / (2.0 * h);
        let (du, dw) = fast_reduced_rhs(&m, up, upp, ub);
        assert_eq!(du, upp);
        assert!((dw - uppp).abs() < 1e-5, "xi = {xi}: {dw} vs {uppp}");
    }
}

#[test]
fn wave_at_moderate_eps() {
    let m = Model::default();
    let c0 = singular_wavespeed(&m, (0.17, 0.22)).unwrap();
    let w = solve_wave_bvp_with(&m, 1e-2, c0, &BvpOptions::default()).unwrap();
    assert!((w.c - 0.2023383).abs() < 1e-6, "c = {}", w.c);
    assert!(w.residuals.boundary < 1e-6);
    let (a, b) = (w.u[0], *w.u.last().unwrap());
    assert!(a.min(b).abs() < 1e-6 && (a.max(b) - 1.0).abs() < 1e-6);
}

#[test]
fn wavespeed_approaches_singular_limit() {
    let m = Model::default();
    let c0 = singular_wavespeed(&m, (0.17, 0.22)).unwrap();
    let gap = |eps: f64| (solve_wave_bvp_with(&m, eps, c0, &BvpOptions::default()).unwrap().c - c0).abs();
    let (g2, g3, g4) = (gap(1e-2), gap(1e-3), gap(1e-4));
    assert!(g2 > g3 && g3 > g4, "{g2} {g3} {g4}");
}

#[test]
fn wave_csv_round_trip() {
    let m = Model::default();
    let w = solve_wave_bvp_with(&m, 1e-2, 0.2, &BvpOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wave.csv");
    w.write_csv(&path).unwrap();
    let back = WaveProfile::read_csv(&path).unwrap();
    assert_eq!(back.len(), w.len());
    assert_eq!(back.c, w.c);
    for z in [-0.3, 0.0, 0.01, 0.4] {
        assert_relative_eq!(back.u_at(z), w.u_at(z), epsilon = 1e-12);
    }
}
