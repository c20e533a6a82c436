mod common;

use nlkg::classifier::*;
use nlkg::decomposition::{decompose, Thresholds};
use nlkg::evolution::conjugate;
use nlkg::functionals::evaluate;
use nlkg::harness::audit_initial_data;

use common::{basis, random_smooth, rng};

fn th() -> Thresholds {
    Thresholds::default()
}

#[test]
fn scaled_ground_states_follow_the_virial_sign() {
    let b = basis();
    for (c, want) in [(0.8, Label::Scatter), (0.9, Label::Scatter), (1.1, Label::Blowup), (1.2, Label::Blowup)] {
        let u = b.state.scale(c);
        let k0 = evaluate(&u).k0;
        assert_eq!(k0 > 0.0, want == Label::Scatter, "c = {c}");
        let l = classify_nine(&u, b, &th(), &ClassifyOptions::default()).unwrap();
        assert_eq!((l.forward.label, l.backward.label), (want, want), "c = {c}");
    }
}

#[test]
fn unstable_push_ejects_at_the_eigenvalue_rate() {
    let b = basis();
    for eps in [1e-4, 1e-3] {
        let (tr, d) =
            classify_run(&b.state.axpy(eps, &b.gplus).unwrap(), b, &th(), &ClassifyOptions::default()).unwrap();
        let f = ejection_fit(&tr, &th()).expect("qualifying segment");
        println!("eps {eps:e}: exponent {:.5} vs k {:.5}, label {}", f.exponent, b.k, d.label);
        assert!((f.exponent - b.k).abs() <= 0.05 * b.k);
        assert_eq!(d.label, Label::Blowup);
    }
    let (tr, d) = classify_run(&b.state.axpy(-1e-3, &b.gplus).unwrap(), b, &th(), &ClassifyOptions::default()).unwrap();
    assert_eq!(d.label, Label::Scatter);
    assert!(ejection_fit(&tr, &th()).is_some());
    let (tr, d) = classify_run(&b.state.axpy(1e-3, &b.gminus).unwrap(), b, &th(), &ClassifyOptions::default()).unwrap();
    assert_eq!(d.label, Label::Trapped);
    assert!(ejection_fit(&tr, &th()).is_none());
}

#[test]
fn definite_labels_are_stable_under_tiny_perturbations() {
    let b = basis();
    let co = ClassifyOptions { dt: 5e-3, dt_sample: 0.02, ..ClassifyOptions::default() };
    let cases = [
        b.state.axpy(-0.0095, &b.gplus).unwrap().axpy(0.0095, &b.gminus).unwrap(),
        b.state.axpy(0.0095, &b.gplus).unwrap().axpy(-0.0095, &b.gminus).unwrap(),
        b.state.scale(0.9),
    ];
    for (i, u) in cases.iter().enumerate() {
        let base = classify_nine(u, b, &th(), &co).unwrap();
        assert!(base.forward.label.is_definite() && base.backward.label.is_definite());
        for seed in 0..3 {
            let du = random_smooth(*u.grid(), &mut rng(100 * i as u64 + seed)).scale(1e-9);
            let l = classify_nine(&u.add(&du).unwrap(), b, &th(), &co).unwrap();
            assert_eq!(l.code(), base.code(), "case {i} seed {seed}");
        }
    }
}

#[test]
fn conjugation_exchanges_the_unstable_and_stable_coefficients() {
    let b = basis();
    let u = b.state.axpy(3e-3, &b.gplus).unwrap().axpy(-2e-3, &b.gminus).unwrap();
    let (d, dc) = (decompose(&u, b, &th()).unwrap(), decompose(&conjugate(&u), b, &th()).unwrap());
    assert!((d.lamp - dc.lamm).abs() <= 1e-9 && (d.lamm - dc.lamp).abs() <= 1e-9, "{d:?} {dc:?}");
    let co = ClassifyOptions { dt: 5e-3, dt_sample: 0.02, ..ClassifyOptions::default() };
    let swapped = b.state.axpy(-2e-3, &b.gplus).unwrap().axpy(3e-3, &b.gminus).unwrap();
    let l = classify_nine(&u, b, &th(), &co).unwrap();
    let ls = classify_nine(&swapped, b, &th(), &co).unwrap();
    assert_eq!((l.forward.label, l.backward.label), (ls.backward.label, ls.forward.label));
    assert_eq!(l.code(), "BS");
}

#[test]
fn energy_window_is_enforced() {
    let b = basis();
    assert!(check_energy_window(&b.state.scale(0.9), b, &th()).is_ok());
    let far = b.state.axpy(0.2, &b.gplus).unwrap().axpy(-0.2, &b.gminus).unwrap();
    assert!(evaluate(&far).em > b.jq + th().eps_star.powi(2));
    assert!(matches!(check_energy_window(&far, b, &th()), Err(nlkg::Error::OutOfRegion(_))));
}

#[test]
fn ejected_trajectories_do_not_return() {
    let b = basis();
    let co = ClassifyOptions { dt: 2e-3, dt_sample: 0.02, t_confirm: 10.0, ..ClassifyOptions::default() };
    let mut ejected = 0;
    for i in 0..12 {
        let (u, _, _) = audit_initial_data(b, &th(), 11, i, (1e-3, 5e-3), 1e-3).unwrap();
        let (tr, _) = classify_run(&u, b, &th(), &co).unwrap();
        let rep = one_pass_audit(&tr, 0.05, &th()).unwrap();
        ejected += usize::from(!rep.exits.is_empty());
        assert_eq!(rep.violations(), 0, "run {i}: {rep:?}");
    }
    assert!(ejected >= 10, "{ejected}");
    assert!(one_pass_audit(&classify_run(&b.state, b, &th(), &co).unwrap().0, 0.01, &th()).is_err());
}
