use std::sync::OnceLock;

use nlkg::ground_state::{box_ground_state, compute_ground_state, GroundState};
use nlkg::linearization::*;
use nlkg::{BoxGrid, Complex64, RadialGrid};

fn gs() -> &'static GroundState {
    static GS: OnceLock<GroundState> = OnceLock::new();
    GS.get_or_init(|| compute_ground_state(RadialGrid::new(60.0, 4096).unwrap(), 1e-10).unwrap())
}

#[test]
fn k2_agrees_with_finite_difference_oracle_and_gap_holds() {
    let lin = compute_linearization(gs()).unwrap();
    let rep = verify_gap(&lin, &GapOptions::default()).unwrap();
    assert!(rep.k2_rel_diff < 1e-4, "{rep:?}");
    assert_eq!(rep.negative_count, 1);
    assert_eq!(rep.count_in_0_1, 0);
    assert!(rep.resonance.pass, "{:?}", rep.resonance);
    assert!(rep.pass);
}

#[test]
fn resolvent_far_from_spectrum_is_bounded_by_distance() {
    let s = &resolvent_probe(gs(), &[Complex64::new(0.0, 5.0)], &ResolventOptions::default()).unwrap()[0];
    let norm = s.norm.unwrap();
    // The weights <x>^{-1} are at most 1; allow a factor 2 slack.
    assert!(norm <= 2.0 / s.dist, "{s:?}");
}

#[test]
fn projected_resolvent_stays_bounded_toward_continuous_spectrum() {
    let zs: Vec<Complex64> = [1e-1, 1e-2, 1e-3].iter().map(|&e| Complex64::new(1.5, e)).collect();
    let out = resolvent_probe(gs(), &zs, &ResolventOptions::default()).unwrap();
    let norms: Vec<f64> = out.iter().map(|s| s.norm.unwrap()).collect();
    let ratio = norms.iter().cloned().fold(0.0, f64::max) / norms.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(ratio <= 10.0, "{norms:?}");
}

#[test]
fn unprojected_resolvent_has_eigenvalue_pole() {
    let k = compute_linearization(gs()).unwrap().k;
    let zs: Vec<Complex64> = [1e-1, 1e-2, 1e-3].iter().map(|&e| Complex64::new(e, -k)).collect();
    let opts = ResolventOptions { project: false, ..Default::default() };
    let norms: Vec<f64> = resolvent_probe(gs(), &zs, &opts).unwrap().iter().map(|s| s.norm.unwrap()).collect();
    for w in norms.windows(2) {
        let growth = w[1] / w[0];
        assert!(growth > 8.0 && growth < 12.0, "{norms:?}");
    }
}

#[test]
fn weighted_evolution_integral_is_finite_and_saturates() {
    let grid = RadialGrid::new(100.0, 767).unwrap();
    let short = weighted_evolution_probe(gs(), grid, 100.0, 401, 2, 1).unwrap();
    let long = weighted_evolution_probe(gs(), grid, 200.0, 801, 2, 1).unwrap();
    for (a, b) in short.ratios.iter().zip(&long.ratios) {
        assert!(a.is_finite() && *a > 0.0);
        assert!(b >= a && *b < 1.5 * a, "{short:?} {long:?}");
    }
}

#[test]
fn kernel_is_bounded_on_the_light_cone() {
    let vals: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|&t| {
            let (v, err) = kernel_value(2, t, t);
            assert!(err < 1e-8);
            v.norm() * t
        })
        .collect();
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let bottom = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(top < 1.0 && top / bottom < 3.0, "{vals:?}");
}

#[test]
fn kernel_constant_is_uniform_in_j() {
    let c1: Vec<f64> = (0..5)
        .map(|j| kernel_probe(j, &KernelOptions::default()))
        .map(|r| {
            assert_eq!(r.unconverged, 0);
            r.c1
        })
        .collect();
    let ratio = c1.iter().cloned().fold(0.0, f64::max) / c1.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(ratio <= 3.0, "{c1:?}");
}

#[test]
fn translation_modes_are_in_the_box_kernel() {
    let bx = BoxGrid::new(20.0, 64).unwrap();
    let q = box_ground_state(gs(), bx, 1e-9).unwrap();
    let r = box_translation_residual(&q, bx).unwrap();
    assert!(r <= 1e-3, "{r}");
}
