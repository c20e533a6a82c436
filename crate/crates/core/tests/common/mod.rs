#![allow(dead_code)]

use std::sync::OnceLock;

use nlkg::decomposition::ModeBasis;
use nlkg::ground_state::{compute_ground_state, GroundState};
use nlkg::linearization::{compute_linearization, Linearization};
use nlkg::{Field, Grid, RadialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dynamics resolution shared by the trajectory tests.
pub fn radial() -> &'static (GroundState, Linearization, ModeBasis) {
    static CELL: OnceLock<(GroundState, Linearization, ModeBasis)> = OnceLock::new();
    CELL.get_or_init(|| {
        let gs = compute_ground_state(RadialGrid::new(40.0, 511).unwrap(), 1e-11).unwrap();
        let lin = compute_linearization(&gs).unwrap();
        let b = ModeBasis::radial(&lin);
        (gs, lin, b)
    })
}

pub fn basis() -> &'static ModeBasis {
    &radial().2
}

/// Random smooth radial state of unit energy norm: a few Gaussian bumps in each component.
pub fn random_smooth(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    let g = *grid.radial().unwrap();
    let mut u1 = vec![0.0; g.n()];
    let mut u2 = vec![0.0; g.n()];
    for _ in 0..3 {
        let (a, b, c0, w) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.0..4.0),
            rng.random_range(0.5..2.0),
        );
        for (m, r) in g.nodes().iter().enumerate() {
            let e = (-((r - c0) / w).powi(2)).exp();
            u1[m] += a * e;
            u2[m] += b * e;
        }
    }
    let f = Field::from_components(grid, &u1, &u2).unwrap();
    let n = f.norm();
    f.scale(1.0 / n)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
