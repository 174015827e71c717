//! One-dimensional three-phase configuration whose nonlocal energy stays
//! below the sharp-interface limit although every pairwise kernel is positive
//! and the tensions obey the triangle inequality.
//!
//! Phases are `[eps, inf)`, `(-inf, -eps]` and `[-eps, eps]`. Kernels are
//! boxes: `K_12 = 1_[-1,1]`, `K_13 = K_23 = d1 (1_[-11,-9] + 1_[9,11]) + d2 1_[-1,1]`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::dynamics::fmt_f64;
use crate::error::{Error, Result};
use crate::tension::{MobilityMatrix, TensionMatrix};

/// Kernel support is `[-11, 11]`; the window must cover `[-12 eps, 12 eps]`.
pub const MIN_WINDOW_FACTOR: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleSpec {
    pub delta1: f64,
    pub delta2: f64,
    pub epsilons: Vec<f64>,
    /// Quadrature half-width in units of `eps`.
    pub window_factor: f64,
}

impl CounterexampleSpec {
    pub fn new(delta1: f64, delta2: f64, epsilons: Vec<f64>) -> Result<Self> {
        if !(delta1 > 0.0 && delta2 > 0.0) {
            return Err(Error::Parameter(format!(
                "deltas must be positive, got ({delta1}, {delta2})"
            )));
        }
        if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Parameter(
                "epsilons must be a nonempty list of positive values".into(),
            ));
        }
        Ok(Self {
            delta1,
            delta2,
            epsilons,
            window_factor: MIN_WINDOW_FACTOR,
        })
    }

    pub fn reference() -> Self {
        Self::new(1.0 / 64.0, 5.0 / 16.0, vec![0.1, 0.01, 0.001]).expect("valid reference values")
    }

    pub fn tensions(&self) -> TensionMatrix {
        let s = 20.0 * self.delta1 + 0.5 * self.delta2;
        TensionMatrix::from_rows(&[vec![0.0, 0.5, s], vec![0.5, 0.0, s], vec![s, s, 0.0]]).expect("positive tensions")
    }

    pub fn mobilities(&self) -> MobilityMatrix {
        let m = 1.0 / (2.0 * self.delta2);
        MobilityMatrix::from_rows(&[vec![0.0, 0.5, m], vec![0.5, 0.0, m], vec![m, m, 0.0]])
            .expect("positive mobilities")
    }

    /// Piecewise-constant kernel `K_ij` as `(lo, hi, height)` boxes.
    fn kernel(&self, i: usize, j: usize) -> Vec<(f64, f64, f64)> {
        if (i, j) == (0, 1) || (i, j) == (1, 0) {
            vec![(-1.0, 1.0, 1.0)]
        } else {
            vec![
                (-11.0, -9.0, self.delta1),
                (9.0, 11.0, self.delta1),
                (-1.0, 1.0, self.delta2),
            ]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleEnergy {
    pub epsilon: f64,
    pub numeric: f64,
    pub closed_form: f64,
    pub limit: f64,
}

fn phase_interval(phase: usize, eps: f64) -> (f64, f64) {
    match phase {
        0 => (eps, f64::INFINITY),
        1 => (f64::NEG_INFINITY, -eps),
        _ => (-eps, eps),
    }
}

/// Length of `I_j` intersected with `I_i` shifted by `s`.
fn overlap(j: (f64, f64), i: (f64, f64), s: f64) -> f64 {
    let lo = j.0.max(i.0 + s);
    let hi = j.1.min(i.1 + s);
    (hi - lo).max(0.0)
}

/// `(1/eps) ∫ u_j (K_ij)_eps * u_i dx = (1/eps) ∫ K_ij(h) |I_j ∩ (I_i + eps h)| dh`,
/// integrated exactly: the integrand is piecewise linear between the
/// breakpoints collected below.
pub fn cross_term(spec: &CounterexampleSpec, i: usize, j: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {eps}")));
    }
    if spec.window_factor < MIN_WINDOW_FACTOR {
        return Err(Error::Quadrature(format!(
            "window [-{w} eps, {w} eps] does not cover [-12 eps, 12 eps]",
            w = spec.window_factor
        )));
    }
    let (ij, ii) = (phase_interval(j, eps), phase_interval(i, eps));
    let boxes = spec.kernel(i, j);
    let w = spec.window_factor;
    let mut cuts = vec![-w, w];
    for &(lo, hi, _) in &boxes {
        cuts.extend([lo, hi]);
    }
    for a in [ij.0, ij.1] {
        for b in [ii.0, ii.1] {
            let c = (a - b) / eps;
            if c.is_finite() {
                cuts.push(c);
            }
        }
    }
    cuts.retain(|c| (-w..=w).contains(c));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = 0.5 * (a + b);
        let k: f64 = boxes
            .iter()
            .filter(|(lo, hi, _)| mid > *lo && mid < *hi)
            .map(|(_, _, v)| v)
            .sum();
        if k == 0.0 {
            continue;
        }
        let fa = overlap(ij, ii, eps * a);
        let fb = overlap(ij, ii, eps * b);
        total += k * 0.5 * (fa + fb) * (b - a);
    }
    Ok(total / eps)
}

pub fn counterexample_energy(spec: &CounterexampleSpec, epsilon: f64) -> Result<CounterexampleEnergy> {
    let mut numeric = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                numeric += cross_term(spec, i, j, epsilon)?;
            }
        }
    }
    Ok(CounterexampleEnergy {
        epsilon,
        numeric,
        closed_form: 16.0 * spec.delta1 + 2.0 * spec.delta2,
        limit: 2.0 * spec.tensions().get(0, 1),
    })
}

pub fn reciprocal_mobility(spec: &CounterexampleSpec) -> DMatrix<f64> {
    spec.mobilities().reciprocal()
}

/// CSV `epsilon,numeric,closed_form,limit`.
pub fn write_counterexample_csv<W: Write>(rows: &[CounterexampleEnergy], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epsilon,numeric,closed_form,limit")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.epsilon),
            fmt_f64(r.numeric),
            fmt_f64(r.closed_form),
            fmt_f64(r.limit)
        )?;
    }
    Ok(())
}
