use std::f64::consts::PI;

use crate::benchmarks::presets::disk;
use crate::dynamics::{Simulator, StepContext};
use crate::error::{Error, Result};
use crate::grid::{volumes, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CircleSeries {
    /// `|R_measured - R_exact|` after each step, starting at t = 0.
    pub errors: Vec<f64>,
    pub radii: Vec<f64>,
    /// Set when the disk vanished before the requested number of steps.
    pub vanished_at: Option<usize>,
}

impl CircleSeries {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Shrinking disk of phase 1 in phase 2: compares the area-equivalent radius
/// against `R(t) = sqrt(R0^2 - 2 sigma mu t)`. `ctx` must be a two-phase
/// context whose interface has `sigma mu = sigma_mu`.
pub fn shrinking_circle_error(
    r0: f64,
    sigma_mu: f64,
    grid: &GridSpec,
    ctx: &StepContext,
    steps: usize,
) -> Result<CircleSeries> {
    if !(r0 > 0.0 && r0 < 0.5) {
        return Err(Error::Parameter(format!("radius {r0} does not fit in the unit torus")));
    }
    if ctx.n_phases() != 2 {
        return Err(Error::Shape("shrinking circle needs a two-phase context".into()));
    }
    let sm = ctx.sigma.get(0, 1) * ctx.mu.get(0, 1);
    if (sm - sigma_mu).abs() > 1e-9 * sigma_mu.abs().max(1.0) {
        return Err(Error::Parameter(format!(
            "context has sigma*mu = {sm}, expected {sigma_mu}"
        )));
    }
    let sim = Simulator::new(ctx.clone(), grid);
    let mut current = disk(grid, (0.5, 0.5), r0)?;
    let mut errors = Vec::with_capacity(steps + 1);
    let mut radii = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let area = volumes(&current)[0];
        if area == 0.0 {
            return Ok(CircleSeries {
                errors,
                radii,
                vanished_at: Some(k),
            });
        }
        let measured = (area / PI).sqrt();
        let exact = (r0 * r0 - 2.0 * sigma_mu * k as f64 * ctx.dt).max(0.0).sqrt();
        errors.push((measured - exact).abs());
        radii.push(measured);
        if k < steps {
            current = sim.step(&current)?.next;
        }
    }
    Ok(CircleSeries {
        errors,
        radii,
        vanished_at: None,
    })
}
