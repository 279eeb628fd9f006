use proptest::prelude::*;
use shockfront::essential::{dispersion, region_signature, Endpoint, RegionName};
use shockfront::linalg::{eigen4, C64};
use shockfront::riccati::RiccatiEvans;
use shockfront::wave::{linear_matrix, solve_wave_bvp_with, BvpOptions, WaveProfile};
use shockfront::winding::{contour_report, ContourOptions, SpectralContour};
use shockfront::Model;
use std::sync::OnceLock;

fn model() -> Model {
    Model::default().with_eps_c(1e-3, 0.1975)
}

fn wave() -> &'static WaveProfile {
    static W: OnceLock<WaveProfile> = OnceLock::new();
    W.get_or_init(|| solve_wave_bvp_with(&Model::default(), 1e-2, 0.2, &BvpOptions::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // On a border the end-state matrix has the purely imaginary spatial
    // eigenvalue i k.
    #[test]
    fn border_points_carry_imaginary_eigenvalue(k in -15.0f64..15.0, right in any::<bool>()) {
        let m = model();
        let end = if right { Endpoint::Right } else { Endpoint::Left };
        let lambda = dispersion(k, end, &m);
        let a = linear_matrix(&m, end.ubar(), lambda, m.eps(), m.c());
        let e = eigen4(&a).unwrap();
        let target = C64::new(0.0, k);
        let gap = e.values.iter().map(|mu| (mu - target).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(gap < 1e-6 * (1.0 + k.abs()), "k = {k}: gap {gap}");
    }

    #[test]
    fn far_right_half_plane_is_omega(re in 0.5f64..50.0, im in -50.0f64..50.0) {
        let lab = region_signature(C64::new(re, im), &model()).unwrap();
        prop_assert_eq!(lab.name, RegionName::Omega);
    }
}

#[test]
fn translation_eigenvalue_is_a_simple_root() {
    let ev = RiccatiEvans::new(wave());
    let n = contour_report(&ev, SpectralContour::circle(C64::new(0.0, 0.0), 0.05), &ContourOptions::default())
        .unwrap()
        .winding;
    assert_eq!(n, 1);
    let at_zero = ev.eval(C64::new(0.0, 0.0)).unwrap().norm();
    let nearby = ev.eval(C64::new(0.05, 0.0)).unwrap().norm();
    assert!(at_zero < 1e-4 * nearby, "{at_zero} vs {nearby}");
}

#[test]
fn unstable_half_plane_is_root_free() {
    let ev = RiccatiEvans::new(wave());
    let c = SpectralContour::rectangle((0.1, 3.0), (-3.0, 3.0));
    assert_eq!(contour_report(&ev, c, &ContourOptions::default()).unwrap().winding, 0);
}

// Winding over a box equals the sum over its quarters.
#[test]
fn winding_is_additive_over_a_split() {
    let ev = RiccatiEvans::new(wave());
    let opts = ContourOptions::default();
    let w = |re: (f64, f64), im: (f64, f64)| {
        contour_report(&ev, SpectralContour::rectangle(re, im), &opts).unwrap().winding
    };
    let whole = w((-0.2, 0.13), (-0.11, 0.12));
    let parts = w((-0.2, 0.031), (-0.11, 0.017))
        + w((0.031, 0.13), (-0.11, 0.017))
        + w((-0.2, 0.031), (0.017, 0.12))
        + w((0.031, 0.13), (0.017, 0.12));
    assert_eq!(whole, 1);
    assert_eq!(parts, whole);
}
