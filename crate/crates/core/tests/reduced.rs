use shockfront::linalg::C64;
use shockfront::reduced::{
    fast_connection_probe, find_slow_eigenvalues, jump_map, slow_evans, FastClassification, FastProbeOptions,
    SlowOptions,
};
use shockfront::wave::{singular_wavespeed, solve_wave_bvp_with, BvpOptions};
use shockfront::Model;

fn c0(m: &Model) -> f64 {
    singular_wavespeed(m, (0.17, 0.22)).unwrap()
}

// The matching section is an artefact of the shooting; the eigenvalues
// must not depend on which side of the jump it sits.
#[test]
fn slow_eigenvalues_do_not_depend_on_section() {
    let m = Model::default();
    let c = c0(&m);
    let mut sets = Vec::new();
    for section in [0.2, 0.9] {
        let opts = SlowOptions { section, ..SlowOptions::default() };
        sets.push(find_slow_eigenvalues(&m, (-2.0, 0.5), 126, c, &opts).unwrap());
    }
    assert_eq!(sets[0].len(), 2, "{sets:?}");
    assert_eq!(sets[0].len(), sets[1].len());
    for (a, b) in sets[0].iter().zip(&sets[1]) {
        assert!((a - b).abs() < 1e-8, "{sets:?}");
    }
    assert!((sets[0][0] + 0.80031).abs() < 1e-3);
}

#[test]
fn slow_determinant_is_conjugation_symmetric() {
    let m = Model::default();
    let c = c0(&m);
    let l = C64::new(-0.3, 0.4);
    let a = slow_evans(&m, l, c, &SlowOptions::default()).unwrap().det;
    let b = slow_evans(&m, l.conj(), c, &SlowOptions::default()).unwrap().det;
    assert!((a - b.conj()).norm() < 1e-9, "{a} {b}");
}

#[test]
fn jump_map_is_upper_triangular_and_invertible() {
    let m = Model::default();
    let j = jump_map(&m, C64::new(0.7, -0.2), c0(&m)).unwrap();
    let (p, v) = (C64::new(0.3, 1.0), C64::new(-2.0, 0.5));
    let (p1, v1) = j.apply(p, v);
    let (p2, v2) = j.apply_inverse(p1, v1);
    assert!((p2 - p).norm() < 1e-13 && (v2 - v).norm() < 1e-13);
    // V is only rescaled.
    let (_, v0) = j.apply(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    assert_eq!(v0, C64::new(0.0, 0.0));
}

#[test]
fn fast_probe_is_regular_away_from_connections() {
    let m = Model::default();
    let w = solve_wave_bvp_with(&m, 1e-4, c0(&m), &BvpOptions::default()).unwrap();
    let p = fast_connection_probe(&w, C64::new(500.0, 0.0), &FastProbeOptions::default()).unwrap();
    assert!(p.e_f.norm().is_finite() && p.e_f.norm() > 1e-3);
    assert_ne!(p.classification, FastClassification::Undetermined);
}
