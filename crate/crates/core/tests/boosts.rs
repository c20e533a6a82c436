use std::sync::OnceLock;

use nlkg::boosts::{quartic_centroid, traveling_wave, BoostParams};
use nlkg::decomposition::translate_field;
use nlkg::ground_state::{compute_ground_state, GroundState};
use nlkg::harness::tw_statics;
use nlkg::{BoxGrid, RadialGrid};

fn seed() -> &'static GroundState {
    static CELL: OnceLock<GroundState> = OnceLock::new();
    CELL.get_or_init(|| compute_ground_state(RadialGrid::new(40.0, 2047).unwrap(), 1e-10).unwrap())
}

#[test]
fn boosted_profile_carries_the_lorentz_energy_and_momentum() {
    let gs = seed();
    let bp = BoostParams::new([0.2, 0.0, 0.0], [0.0; 3]).unwrap();
    let coarse = tw_statics(&traveling_wave(gs, &bp, BoxGrid::new(28.0, 64).unwrap()).unwrap(), gs.jq, &bp).unwrap();
    let fine = tw_statics(&traveling_wave(gs, &bp, BoxGrid::new(28.0, 128).unwrap()).unwrap(), gs.jq, &bp).unwrap();
    println!("{coarse:?}\n{fine:?}");
    assert!(fine.e_rel <= 1e-3 && fine.p_rel <= 1e-4, "{fine:?}");
    assert!(fine.residual < coarse.residual / 50.0);
    assert!(fine.p[1].abs() < 1e-12 && fine.p[2].abs() < 1e-12);
    assert!((fine.e_expected - gs.jq * (1.0f64 + 0.04).sqrt()).abs() < 1e-12);
}

#[test]
fn momentum_direction_follows_the_boost() {
    let gs = seed();
    let bp = BoostParams::new([0.0, -0.15, 0.1], [0.0; 3]).unwrap();
    let st = tw_statics(&traveling_wave(gs, &bp, BoxGrid::new(28.0, 128).unwrap()).unwrap(), gs.jq, &bp).unwrap();
    assert!(st.p_rel <= 1e-4 && st.e_rel <= 1e-3, "{st:?}");
}

#[test]
fn quartic_centroid_tracks_translations() {
    let gs = seed();
    let bp = BoostParams::new([0.2, 0.0, 0.0], [0.0; 3]).unwrap();
    for (n, tol) in [(64, 1e-6), (128, 1e-6)] {
        let bx = BoxGrid::new(28.0, n).unwrap();
        let u = traveling_wave(gs, &bp, bx).unwrap();
        let c0 = quartic_centroid(&u).unwrap();
        let h = bx.dx();
        // Whole-cell shifts permute the samples.
        let shift = [3.0 * h, -2.0 * h, 5.0 * h];
        let c = quartic_centroid(&translate_field(&u, shift).unwrap()).unwrap();
        for a in 0..3 {
            assert!((c[a] - c0[a] - shift[a]).abs() < tol, "n {n}: {c:?} {c0:?}");
        }
    }
    // Off-grid shifts carry a sampling error that shrinks with resolution.
    let err = |n: usize| {
        let u = traveling_wave(gs, &bp, BoxGrid::new(28.0, n).unwrap()).unwrap();
        let c0 = quartic_centroid(&u).unwrap();
        let c = quartic_centroid(&translate_field(&u, [1.0, 0.0, 0.0]).unwrap()).unwrap();
        (c[0] - c0[0] - 1.0).abs()
    };
    let (e64, e128) = (err(64), err(128));
    println!("off-grid centroid error {e64:.3e} at 64, {e128:.3e} at 128");
    assert!(e128 < 1e-3 && e128 < e64 / 10.0);
}
