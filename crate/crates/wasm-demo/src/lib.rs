//! Browser demo: evolve a small multiphase network in the page and draw it
//! on a canvas.

use threshold_dynamics::benchmarks::{grim_reaper_initial_partition, presets, GrimReaperSpec};
use threshold_dynamics::tension::{junction_angles, read_shockley_3d, Orientation3D};
use threshold_dynamics::{
    kernel_coefficients, select_alpha_beta, AlphaBetaPolicy, GridSpec, MobilityMatrix, Partition, Simulator,
    StepContext, TensionMatrix,
};
use wasm_bindgen::prelude::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PALETTE: [[u8; 3]; 10] = [
    [0x4e, 0x79, 0xa7],
    [0xf2, 0x8e, 0x2b],
    [0xe1, 0x57, 0x59],
    [0x76, 0xb7, 0xb2],
    [0x59, 0xa1, 0x4f],
    [0xed, 0xc9, 0x48],
    [0xb0, 0x7a, 0xa1],
    [0xff, 0x9d, 0xa7],
    [0x9c, 0x75, 0x5f],
    [0xba, 0xb0, 0xac],
];

struct State {
    sim: Simulator,
    partition: Partition,
    steps: usize,
}

fn es_context(sigma: TensionMatrix, mu: MobilityMatrix, dt: f64) -> Result<StepContext, String> {
    let sel = select_alpha_beta(&sigma, &mu, &AlphaBetaPolicy::default()).map_err(|e| e.to_string())?;
    let k = kernel_coefficients(&sigma, &mu, sel.alpha, sel.beta).map_err(|e| e.to_string())?;
    StepContext::es(sigma, mu, k, dt).map_err(|e| e.to_string())
}

fn build(kind: &str, n: usize, grains: usize, seed: u64, dt: f64) -> Result<State, String> {
    let grid = GridSpec::square(n).map_err(|e| e.to_string())?;
    let (ctx, partition) = match kind {
        "grains" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let orientations: Vec<Orientation3D> = (0..grains).map(|_| Orientation3D::random(&mut rng)).collect();
            let sigma = read_shockley_3d(&orientations, 30f64.to_radians()).map_err(|e| e.to_string())?;
            let mu = MobilityMatrix::equal(grains, 1.0).map_err(|e| e.to_string())?;
            let p = presets::voronoi(&grid, grains, seed).map_err(|e| e.to_string())?;
            (es_context(sigma, mu, dt)?, p)
        }
        "grim" => {
            let spec = GrimReaperSpec::symmetric();
            let (sigma, mu) = spec.tensions_mobilities();
            let p = grim_reaper_initial_partition(&spec, &grid).map_err(|e| e.to_string())?;
            (es_context(sigma, mu, dt)?, p)
        }
        "circle" => {
            let sigma = TensionMatrix::equal(2, 1.0).map_err(|e| e.to_string())?;
            let mu = MobilityMatrix::equal(2, 1.0).map_err(|e| e.to_string())?;
            let k = kernel_coefficients(&sigma, &mu, 2.0, 0.5).map_err(|e| e.to_string())?;
            let ctx = StepContext::es(sigma, mu, k, dt).map_err(|e| e.to_string())?;
            (ctx, presets::disk(&grid, (0.5, 0.5), 0.3).map_err(|e| e.to_string())?)
        }
        other => return Err(format!("unknown scene '{other}'")),
    };
    Ok(State {
        sim: Simulator::new(ctx, &grid),
        partition,
        steps: 0,
    })
}

impl State {
    fn advance(&mut self, count: usize) -> Result<f64, String> {
        for _ in 0..count {
            self.partition = self.sim.step(&self.partition).map_err(|e| e.to_string())?.next;
            self.steps += 1;
        }
        self.sim.energy(&self.partition).map_err(|e| e.to_string())
    }

    /// RGBA pixels, top row first.
    fn rgba(&self) -> Vec<u8> {
        let grid = self.partition.grid();
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut out = Vec::with_capacity(4 * nx * ny);
        for iy in (0..ny).rev() {
            for ix in 0..nx {
                let label = self.partition.label_at(ix, iy);
                let [r, g, b] = PALETTE[label % PALETTE.len()];
                out.extend_from_slice(&[r, g, b, 255]);
            }
        }
        out
    }
}

/// A running simulation on an `n x n` periodic grid.
#[wasm_bindgen]
pub struct Demo {
    state: State,
}

#[wasm_bindgen]
impl Demo {
    /// `kind` is `grains` (Read–Shockley network), `grim` or `circle`.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n: usize, grains: usize, seed: u64, dt: f64) -> Result<Demo, JsError> {
        let state = build(kind, n, grains, seed, dt).map_err(|e| JsError::new(&e))?;
        Ok(Demo { state })
    }

    /// Runs `count` steps and returns the nonlocal energy afterwards.
    pub fn step(&mut self, count: usize) -> Result<f64, JsError> {
        self.state.advance(count).map_err(|e| JsError::new(&e))
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.state.rgba()
    }

    pub fn size(&self) -> usize {
        self.state.partition.grid().nx()
    }

    pub fn steps(&self) -> usize {
        self.state.steps
    }

    pub fn time(&self) -> f64 {
        self.state.steps as f64 * self.state.sim.context().dt
    }

    /// Cell fraction of each phase.
    pub fn volumes(&self) -> Vec<f64> {
        threshold_dynamics::volumes(&self.state.partition)
    }
}

fn young_angles(s12: f64, s13: f64, s23: f64) -> Result<Vec<f64>, String> {
    let sigma = TensionMatrix::from_rows(&[vec![0.0, s12, s13], vec![s12, 0.0, s23], vec![s13, s23, 0.0]])
        .map_err(|e| e.to_string())?;
    let a = junction_angles(&sigma, (0, 1, 2)).map_err(|e| e.to_string())?;
    Ok(a.iter().map(|x| x.to_degrees()).collect())
}

/// Opening angles in degrees of phases 1, 2, 3 at a triple junction.
#[wasm_bindgen]
pub fn junction_angles_deg(s12: f64, s13: f64, s23: f64) -> Result<Vec<f64>, JsError> {
    young_angles(s12, s13, s23).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_build_and_dissipate() {
        for kind in ["grains", "grim", "circle"] {
            let mut s = build(kind, 32, 5, 1, 1e-3).unwrap();
            let e0 = s.sim.energy(&s.partition).unwrap();
            let e1 = s.advance(3).unwrap();
            assert!(e1 <= e0 * (1.0 + 1e-10), "{kind}: {e0} -> {e1}");
            assert_eq!(s.steps, 3);
            assert_eq!(s.rgba().len(), 4 * 32 * 32);
        }
        assert!(build("torus", 32, 5, 1, 1e-3).is_err());
    }

    #[test]
    fn young_angles_of_example_tensions() {
        let a = young_angles(2f64.sqrt(), 1.0, 1.0).unwrap();
        for (x, y) in a.iter().zip([135.0, 135.0, 90.0]) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(young_angles(3.0, 1.0, 1.0).is_err());
    }
}
