mod common;

use nlkg::evolution::conjugate;
use nlkg::field::{decode, encode, omega};
use nlkg::functionals::{energy, evaluate, quartic};
use nlkg::{Grid, RadialGrid};
use proptest::prelude::*;

use common::{radial, random_smooth, rng};

fn small_grid() -> Grid {
    Grid::Radial(RadialGrid::new(20.0, 127).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_a_quadratic_minus_quartic_polynomial(seed in 0u64..10_000, c in 0.1f64..3.0) {
        let u = random_smooth(small_grid(), &mut rng(seed));
        let n2 = u.norm().powi(2);
        let f4 = quartic(u.grid(), &u.u1());
        let e = energy(&u.scale(c));
        let want = 0.5 * c * c * n2 - 0.25 * c.powi(4) * f4;
        prop_assert!((e - want).abs() <= 1e-12 * (1.0 + want.abs()), "{} {}", e, want);
    }

    #[test]
    fn conjugation_preserves_energy_and_virial(seed in 0u64..10_000) {
        let u = random_smooth(small_grid(), &mut rng(seed)).scale(3.0);
        let (a, b) = (evaluate(&u), evaluate(&conjugate(&u)));
        prop_assert!((a.e - b.e).abs() <= 1e-12 * a.e.abs().max(1.0));
        prop_assert!((a.k0 - b.k0).abs() <= 1e-12 * a.k0.abs().max(1.0));
        prop_assert!((a.k2 - b.k2).abs() <= 1e-12 * a.k2.abs().max(1.0));
    }

    #[test]
    fn symplectic_form_is_antisymmetric(s1 in 0u64..10_000, s2 in 0u64..10_000) {
        let f = random_smooth(small_grid(), &mut rng(s1));
        let g = random_smooth(small_grid(), &mut rng(s2 + 20_000));
        let (fg, gf) = (omega(&f, &g).unwrap(), omega(&g, &f).unwrap());
        prop_assert!((fg + gf).abs() <= 1e-12);
        prop_assert!(omega(&f, &f).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(seed in 0u64..10_000, t in -100.0f64..100.0) {
        let u = random_smooth(small_grid(), &mut rng(seed));
        let bytes = encode(&u, t);
        let s = decode(&bytes).unwrap();
        prop_assert_eq!(s.time.to_bits(), t.to_bits());
        prop_assert_eq!(s.field.grid(), u.grid());
        prop_assert!(s.field.data().iter().zip(u.data()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        prop_assert_eq!(encode(&s.field, s.time), bytes);
    }

    /// On the scaling family `E(cQ) = J (2c^2 - c^4)` and `sign K0(cQ) = sign(1 - c)`.
    #[test]
    fn scaled_ground_state_functionals(c in 0.3f64..1.7) {
        prop_assume!((c - 1.0).abs() > 1e-3);
        let (gs, _, b) = radial();
        let f = evaluate(&b.state.scale(c));
        let want = gs.jq * (2.0 * c * c - c.powi(4));
        prop_assert!((f.e - want).abs() <= 1e-8 * gs.jq, "{} {}", f.e, want);
        prop_assert_eq!(f.k0 > 0.0, c < 1.0);
        prop_assert!(f.e <= gs.jq);
    }
}

#[test]
fn radial_states_carry_no_momentum() {
    let u = random_smooth(small_grid(), &mut rng(3));
    assert_eq!(evaluate(&u).p, [0.0; 3]);
}

#[test]
fn ground_state_is_exactly_at_the_threshold() {
    let (gs, _, b) = radial();
    let f = evaluate(&b.state);
    assert!((f.e - gs.jq).abs() <= 1e-10 * gs.jq);
    assert!(f.k0.abs() <= 1e-8 * gs.jq && f.k2.abs() <= 1e-8 * gs.jq);
}
