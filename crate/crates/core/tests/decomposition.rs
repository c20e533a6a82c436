mod common;

use std::sync::OnceLock;

use nlkg::boosts::{traveling_wave, BoostParams};
use nlkg::decomposition::*;
use nlkg::functionals::{energy, k0};
use nlkg::ground_state::{compute_ground_state, GroundState};
use nlkg::linearization::compute_linearization;
use nlkg::{BoxGrid, Error, Field, RadialGrid};

use common::{basis, radial, random_smooth, rng};

fn th() -> Thresholds {
    Thresholds::default()
}

#[test]
fn ground_state_and_unstable_push() {
    let b = basis();
    let d = decompose(&b.state, b, &th()).unwrap();
    assert_eq!((d.sgn, d.c), (1, [0.0; 3]));
    assert!(d.lamp.abs() < 1e-12 && d.lamm.abs() < 1e-12 && d.gamma_norm < 1e-12 && d.dq < 1e-6);
    let eps = 1e-3;
    let u = b.state.axpy(eps, &b.gplus).unwrap();
    let d = decompose(&u, b, &th()).unwrap();
    assert!((d.lamp - eps).abs() < 1e-10 && d.lamm.abs() < 1e-10);
    assert!((d.dq * d.dq - 0.5 * b.k * eps * eps).abs() < 20.0 * eps.powi(3));
}

#[test]
fn reconstruction_and_orthogonality_on_random_states() {
    let b = basis();
    let g = *b.grid();
    let mut r = rng(7);
    for i in 0..20 {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        let v = random_smooth(g, &mut r).scale(0.05);
        let u = b.state.add(&v).unwrap().scale(s);
        let d = decompose(&u, b, &th()).unwrap();
        assert_eq!(d.sgn as f64, s);
        let back = d.reconstruct(b).unwrap();
        assert!(back.sub(&u).unwrap().norm() <= 1e-10 * u.norm());
        assert!(g.dot(&d.gamma.u1(), &b.rho).abs() < 1e-8);
        assert!(g.dot(&d.gamma.u2(), &b.rho).abs() < 1e-8);
    }
}

#[test]
fn distance_is_equivalent_to_the_energy_distance() {
    let b = basis();
    let g = *b.grid();
    let mut r = rng(11);
    let mut worst: f64 = 1.0;
    for i in 0..100 {
        let amp = 1e-3 * 50f64.powf(i as f64 / 99.0);
        let v = random_smooth(g, &mut r).scale(amp);
        let u = b.state.add(&v).unwrap();
        let d = decompose(&u, b, &th()).unwrap();
        let inf = u.sub(&b.state).unwrap().norm().min(u.add(&b.state).unwrap().norm());
        let ratio = d.dq / inf;
        worst = worst.max(ratio).max(1.0 / ratio);
    }
    println!("equivalence constant C = {worst:.3}");
    assert!(worst < 5.0, "C = {worst}");
}

#[test]
fn outer_region_is_dominated_by_lambda1() {
    let b = basis();
    let g = *b.grid();
    let mut r = rng(13);
    let mut seen = 0;
    let mut worst: f64 = 1.0;
    for i in 0..400 {
        let (a, c) = (((i * 37) % 23) as f64 / 11.0 - 1.0, ((i * 53) % 19) as f64 / 9.0 - 1.0);
        let gam = random_smooth(g, &mut r).scale(2e-3);
        let u = b.state.axpy(0.02 * a, &b.gplus).unwrap().axpy(0.02 * c, &b.gminus).unwrap().add(&gam).unwrap();
        let d = decompose(&u, b, &th()).unwrap();
        let de = 2.0 * (energy(&u) - b.jq);
        if de < d.dq * d.dq && d.dq < th().delta_e {
            seen += 1;
            let ratio = d.lam1.abs() / d.dq;
            worst = worst.max(ratio).max(1.0 / ratio);
        }
    }
    println!("outer-region states {seen}, constant C = {worst:.3}");
    assert!(seen >= 50);
    assert!(worst < 5.0, "C = {worst}");
}

#[test]
fn k0_expansion_is_quadratic() {
    let (_, lin, b) = radial();
    let g = *b.grid();
    let v0 = random_smooth(g, &mut rng(17));
    let q3: Vec<f64> = b.q.iter().map(|q| 2.0 * q * q * q).collect();
    let res = |eps: f64| {
        let u = b.state.add(&v0.scale(eps)).unwrap();
        let d = decompose(&u, b, &th()).unwrap();
        k0(&g, &u.u1()) + b.k * b.k * (2.0 / b.k).sqrt() * lin.q_rho() * d.lam1 + g.dot(&q3, &d.gamma.u1())
    };
    let (r1, r2, r3) = (res(1e-2), res(5e-3), res(2.5e-3));
    println!("K0 expansion residuals {r1:.3e} {r2:.3e} {r3:.3e}");
    for (a, c) in [(r1, r2), (r2, r3)] {
        let f = a / c;
        assert!((3.0..5.0).contains(&f), "ratio {f}");
    }
    assert!((r1 / 1e-4).abs() < 1e3);
}

#[test]
fn sign_functional_examples() {
    let b = basis();
    let g = *b.grid();
    let s = 0.05;
    for (c, want) in [(1.0 - s, 1), (1.0 + s, -1)] {
        let u = Field::static_state(g, &b.q.iter().map(|q| c * q).collect::<Vec<_>>()).unwrap();
        assert_eq!(sign_functional(&u, b, &th()).unwrap().value, want);
        let analytic = 4.0 * b.jq * c * c * (1.0 - c * c);
        assert_eq!(sgn0(analytic), want);
    }
    let u = b.state.axpy(1e-3, &b.gplus).unwrap();
    let rep = sign_functional(&u, b, &th()).unwrap();
    assert_eq!((rep.value, rep.rule), (-1, SignRule::Lambda));
    // Equal and opposite pushes raise E above J by k eps^2, outside the admissible region.
    let u = b.state.axpy(1e-2, &b.gplus).unwrap().axpy(-1e-2, &b.gminus).unwrap();
    assert!(matches!(sign_functional(&u, b, &th()), Err(Error::OutOfRegion(_))));
}

fn box_setup() -> &'static (GroundState, ModeBasis) {
    static CELL: OnceLock<(GroundState, ModeBasis)> = OnceLock::new();
    CELL.get_or_init(|| {
        let gs = compute_ground_state(RadialGrid::new(40.0, 1023).unwrap(), 1e-10).unwrap();
        let lin = compute_linearization(&gs).unwrap();
        let b = ModeBasis::boxed(&gs, &lin, BoxGrid::new(16.0, 32).unwrap(), 1e-9).unwrap();
        (gs, b)
    })
}

#[test]
fn box_center_matches_grid_search_oracle() {
    let (_, b) = box_setup();
    let g = *b.grid();
    let bx = *g.boxed().unwrap();
    let noise: Vec<f64> = (0..bx.len())
        .map(|i| {
            let x = bx.point(i);
            (1.3 * x[0] + 0.7 * x[1] - 0.2 * x[2]).sin() * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 10.0).exp()
        })
        .collect();
    let nf = Field::from_components(g, &noise, &noise).unwrap();
    let nf = nf.scale(1e-3 / nf.norm());
    let c0 = [1.0, 0.0, 0.0];
    let u = translate_field(&b.state, c0).unwrap().scale(-1.0).add(&nf).unwrap();
    let d = decompose(&u, b, &th()).unwrap();
    assert!(d.converged);
    assert_eq!(d.sgn, -1);
    let err = ((d.c[0] - c0[0]).powi(2) + d.c[1].powi(2) + d.c[2].powi(2)).sqrt();
    assert!(err <= 1e-3, "{:?}", d.c);
    // Independent oracle: coarse-to-fine brute force from the origin.
    let mut c = [0.0; 3];
    let mut h = 2.0;
    let mut s = 1;
    for _ in 0..12 {
        let (cn, sn) = center_grid_search(&u, b, c, h, 5).unwrap();
        c = cn;
        s = sn;
        h *= 0.5;
    }
    assert_eq!(s, -1);
    let gap = ((d.c[0] - c[0]).powi(2) + (d.c[1] - c[1]).powi(2) + (d.c[2] - c[2]).powi(2)).sqrt();
    assert!(gap < 2e-3, "newton {:?} oracle {:?}", d.c, c);
    let back = d.reconstruct(b).unwrap();
    assert!(back.sub(&u).unwrap().norm() <= 1e-10 * u.norm());
    let grads = nlkg::functionals::gradient(&g, &b.q);
    for dj in &grads {
        assert!(g.dot(&d.gamma.u1(), dj).abs() < 1e-8);
    }
    assert!(g.dot(&d.gamma.u1(), &b.rho).abs() < 1e-8);
}

#[test]
fn traveling_wave_parameters_are_recovered_and_pairing_is_nondegenerate() {
    let (gs, _) = box_setup();
    let bx = BoxGrid::new(28.0, 64).unwrap();
    let bp = BoostParams::new([0.1, 0.0, 0.0], [2.0, 0.0, 0.0]).unwrap();
    let u = traveling_wave(gs, &bp, bx).unwrap();
    let fit = fit_pq(&u, gs, 1e-8).unwrap();
    assert!(fit.converged && fit.residual <= 1e-8, "{fit:?}");
    for a in 0..3 {
        assert!((fit.params.p[a] - bp.p[a]).abs() < 1e-6 && (fit.params.q[a] - bp.q[a]).abs() < 1e-6, "{fit:?}");
    }
    assert!(fit.condition.is_finite() && fit.condition < 1e3);

    let (pairing, cond) = pairing_at(gs, &BoostParams::at_rest(), BoxGrid::new(28.0, 128).unwrap()).unwrap();
    assert!(cond.is_finite());
    // omega(d_q frak Q, d_p frak Q) = -J delta in the orientation used here.
    for j in 0..3 {
        for k in 0..3 {
            let m = pairing[j][3 + k];
            let want = if j == k { -gs.jq } else { 0.0 };
            assert!((m - want).abs() < 1e-3 * gs.jq, "{j} {k} {m} {}", gs.jq);
        }
    }
}
