use std::f64::consts::PI;
use std::time::Instant;

use nlkg::ground_state::{compute_ground_state, ground_state_from_samples, residual_samples};
use nlkg::harness::ground_state_identities;
use nlkg::RadialGrid;

#[test]
fn identities_hold_at_production_resolution() {
    let t = Instant::now();
    let gs = compute_ground_state(RadialGrid::new(60.0, 4096).unwrap(), 1e-10).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let id = ground_state_identities(&gs);
    println!("{id:?} in {secs:.2}s");
    assert!(id.worst <= 1e-5, "{id:?}");
    assert!(secs < 10.0, "{secs}");
    assert!(gs.summary().residual <= 1e-10);
}

/// Integrals recomputed from the samples alone: 4th-order finite differences for `Q'`
/// and the trapezoid rule in `r`, which is spectrally accurate for even integrands.
#[test]
fn integrals_agree_with_finite_difference_quadrature() {
    let grid = RadialGrid::new(40.0, 2047).unwrap();
    let gs = compute_ground_state(grid, 1e-10).unwrap();
    let r = grid.nodes();
    let h = grid.dr();
    // Q is even in r, so samples reflect through the origin.
    let q = &gs.q;
    let at = |m: isize| -> f64 {
        if m >= 0 {
            q[m as usize]
        } else if m == -1 {
            gs.summary().q0
        } else {
            q[(-m - 2) as usize]
        }
    };
    let n = q.len();
    let (mut a, mut b, mut c4) = (0.0, 0.0, 0.0);
    for m in 0..n - 2 {
        let i = m as isize;
        let dq = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h);
        let w = 4.0 * PI * r[m] * r[m] * h;
        a += w * dq * dq;
        b += w * q[m] * q[m];
        c4 += w * q[m].powi(4);
    }
    assert!((a / gs.a - 1.0).abs() < 1e-6, "{a} {}", gs.a);
    assert!((b / gs.b - 1.0).abs() < 1e-9, "{b} {}", gs.b);
    assert!((c4 / gs.c4 - 1.0).abs() < 1e-9, "{c4} {}", gs.c4);
    assert!((a / b - 3.0).abs() < 3e-6);
}

#[test]
fn relaxed_center_matches_the_shooting_value() {
    let gs = compute_ground_state(RadialGrid::new(40.0, 1023).unwrap(), 1e-11).unwrap();
    let s = gs.summary();
    assert!((s.q0 - s.shooting_q0).abs() < 1e-6 * s.q0, "{} {}", s.q0, s.shooting_q0);
    assert!((s.q0 - 4.3373877).abs() < 1e-6, "{}", s.q0);
}

#[test]
fn reloaded_samples_reproduce_the_ground_state() {
    let grid = RadialGrid::new(40.0, 511).unwrap();
    let gs = compute_ground_state(grid, 1e-11).unwrap();
    let back = ground_state_from_samples(grid, &gs.q, 1e-11).unwrap();
    let diff = gs.q.iter().zip(&back.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "{diff}");
    let res = residual_samples(&grid, &back.q);
    assert!(res.iter().all(|v| v.is_finite()));
    assert!(ground_state_from_samples(grid, &gs.q[1..], 1e-11).is_err());
}
