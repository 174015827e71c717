use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{make_partition, GridSpec, Partition};

/// Phase 1 inside the periodic disk, phase 2 outside.
pub fn disk(grid: &GridSpec, centre: (f64, f64), radius: f64) -> Result<Partition> {
    if !(radius > 0.0 && radius < 0.5) {
        return Err(Error::Parameter(format!("disk radius {radius} must lie in (0, 1/2)")));
    }
    make_partition(grid, 2, |x, y| {
        let dx = x - centre.0 - (x - centre.0).round();
        let dy = y - centre.1 - (y - centre.1).round();
        usize::from(dx * dx + dy * dy > radius * radius)
    })
}

/// Phase 1 on `x < split`, phase 2 on the rest.
pub fn half_plane(grid: &GridSpec, split: f64) -> Result<Partition> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Parameter(format!("split {split} must lie in (0, 1)")));
    }
    make_partition(grid, 2, |x, _| usize::from(x >= split))
}

/// Periodic Voronoi tessellation of `n_phases` uniformly random seeds.
pub fn voronoi(grid: &GridSpec, n_phases: usize, seed: u64) -> Result<Partition> {
    if n_phases < 2 {
        return Err(Error::Parameter("voronoi needs at least two phases".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<(f64, f64)> = (0..n_phases).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    make_partition(grid, n_phases, |x, y| {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, &(sx, sy)) in sites.iter().enumerate() {
            let dx = x - sx - (x - sx).round();
            let dy = y - sy - (y - sy).round();
            let d = dx * dx + dy * dy;
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    })
}
