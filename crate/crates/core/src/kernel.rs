//! Two-Gaussian convolution kernels `K_ij = a_ij G_sqrt(alpha) + b_ij G_sqrt(beta)`
//! with prescribed surface tension and mobility on every interface, and the
//! rules for choosing the widths `alpha > beta`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::tension::{
    conditional_definiteness, default_tolerance, triangle_margin, Definiteness, MobilityMatrix, TensionMatrix,
};

/// Coefficients of the two Gaussians that make up every interface kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    pub alpha: f64,
    pub beta: f64,
    /// Weights of the wide Gaussian `G_sqrt(alpha)`.
    pub a: DMatrix<f64>,
    /// Weights of the narrow Gaussian `G_sqrt(beta)`.
    pub b: DMatrix<f64>,
}

impl KernelFamily {
    pub fn n_phases(&self) -> usize {
        self.a.nrows()
    }

    /// Surface tension and mobility carried by the kernel of interface `(i, j)`.
    pub fn tension_mobility(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        kernel_to_tension_mobility(self.a[(i, j)], self.b[(i, j)], self.alpha, self.beta)
    }

    /// Largest relative deviation between the (sigma, mu) carried by the
    /// kernels and the given matrices.
    pub fn round_trip_error(&self, sigma: &TensionMatrix, mu: &MobilityMatrix) -> Result<f64> {
        let n = self.n_phases();
        if sigma.n_phases() != n || mu.n_phases() != n {
            return Err(Error::Shape(format!(
                "kernel family has {n} phases, matrices have {} and {}",
                sigma.n_phases(),
                mu.n_phases()
            )));
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (s, m) = self.tension_mobility(i, j)?;
                worst = worst
                    .max((s - sigma.get(i, j)).abs() / sigma.get(i, j))
                    .max((m - mu.get(i, j)).abs() / mu.get(i, j));
            }
        }
        Ok(worst)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            alpha: self.alpha,
            beta: self.beta,
            a: crate::tension::permute_matrix(&self.a, perm),
            b: crate::tension::permute_matrix(&self.b, perm),
        }
    }
}

fn check_widths(alpha: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0 && alpha > beta && alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "kernel widths need alpha > beta > 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(())
}

/// Coefficients `(a, b)` of a single kernel with tension `sigma` and mobility `mu`.
pub fn pair_coefficients(sigma: f64, mu: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    check_widths(alpha, beta)?;
    let sqrt_pi = PI.sqrt();
    let denom = alpha - beta;
    let a = sqrt_pi * alpha.sqrt() / denom * (sigma - beta / mu);
    let b = sqrt_pi * beta.sqrt() / denom * (-sigma + alpha / mu);
    Ok((a, b))
}

pub fn kernel_coefficients(sigma: &TensionMatrix, mu: &MobilityMatrix, alpha: f64, beta: f64) -> Result<KernelFamily> {
    check_widths(alpha, beta)?;
    let n = sigma.n_phases();
    if mu.n_phases() != n {
        return Err(Error::Shape(format!(
            "surface tensions have {n} phases, mobilities have {}",
            mu.n_phases()
        )));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (aij, bij) = pair_coefficients(sigma.get(i, j), mu.get(i, j), alpha, beta)?;
            a[(i, j)] = aij;
            a[(j, i)] = aij;
            b[(i, j)] = bij;
            b[(j, i)] = bij;
        }
    }
    Ok(KernelFamily { alpha, beta, a, b })
}

/// Surface tension and mobility of `a G_sqrt(alpha) + b G_sqrt(beta)`.
pub fn kernel_to_tension_mobility(a: f64, b: f64, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Parameter(format!(
            "kernel widths must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let sqrt_pi = PI.sqrt();
    let sigma = (a * alpha.sqrt() + b * beta.sqrt()) / sqrt_pi;
    let inv_mass = a / alpha.sqrt() + b / beta.sqrt();
    if !(inv_mass > 0.0) {
        return Err(Error::NonpositiveMobility(format!(
            "a/sqrt(alpha) + b/sqrt(beta) = {inv_mass}"
        )));
    }
    Ok((sigma, sqrt_pi / inv_mass))
}

/// Which constraints drive the choice of `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaBetaPolicy {
    /// Nonnegative kernel coefficients.
    pub enforce_positivity: bool,
    /// Unconditional energy dissipation; needs conditionally negative
    /// definite tensions and reciprocal mobilities.
    pub enforce_stability: bool,
    /// Strict triangle inequality of the kernel masses `a_ij + b_ij`.
    pub enforce_no_wetting: bool,
    pub manual_alpha: Option<f64>,
    pub manual_beta: Option<f64>,
}

impl Default for AlphaBetaPolicy {
    fn default() -> Self {
        Self {
            enforce_positivity: true,
            enforce_stability: true,
            enforce_no_wetting: false,
            manual_alpha: None,
            manual_beta: None,
        }
    }
}

impl AlphaBetaPolicy {
    pub fn manual(alpha: f64, beta: f64) -> Self {
        Self {
            enforce_positivity: false,
            enforce_stability: false,
            enforce_no_wetting: false,
            manual_alpha: Some(alpha),
            manual_beta: Some(beta),
        }
    }

    pub fn with_no_wetting(mut self, on: bool) -> Self {
        self.enforce_no_wetting = on;
        self
    }
}

/// Outcome of [`select_alpha_beta`]. `warnings` lists enabled constraints
/// that manual widths violate.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBetaSelection {
    pub alpha: f64,
    pub beta: f64,
    pub warnings: Vec<String>,
}

/// Fraction of the admissible `sqrt(alpha beta) M < eps` budget used when
/// shrinking `beta` for the no-wetting constraint.
pub const NO_WETTING_SAFETY: f64 = 0.5;

#[derive(Debug, Clone)]
struct Bound {
    name: &'static str,
    value: f64,
}

pub fn select_alpha_beta(
    sigma: &TensionMatrix,
    mu: &MobilityMatrix,
    policy: &AlphaBetaPolicy,
) -> Result<AlphaBetaSelection> {
    let n = sigma.n_phases();
    if mu.n_phases() != n {
        return Err(Error::Shape(format!(
            "surface tensions have {n} phases, mobilities have {}",
            mu.n_phases()
        )));
    }
    let any_rule = policy.enforce_positivity || policy.enforce_stability || policy.enforce_no_wetting;
    if !any_rule && (policy.manual_alpha.is_none() || policy.manual_beta.is_none()) {
        return Err(Error::Parameter(
            "policy enables no constraint and does not fix both widths".into(),
        ));
    }

    let mut lower: Vec<Bound> = Vec::new();
    let mut upper: Vec<Bound> = Vec::new();

    if policy.enforce_positivity {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            for j in (i + 1)..n {
                let speed = sigma.get(i, j) * mu.get(i, j);
                lo = lo.max(speed);
                hi = hi.min(speed);
            }
        }
        lower.push(Bound {
            name: "positivity (alpha >= max sigma*mu)",
            value: lo,
        });
        upper.push(Bound {
            name: "positivity (beta <= min sigma*mu)",
            value: hi,
        });
    }

    if policy.enforce_stability {
        let inv_mu = mu.reciprocal();
        let s_rep = conditional_definiteness(sigma.as_matrix(), default_tolerance(sigma.as_matrix()))?;
        let m_rep = conditional_definiteness(&inv_mu, default_tolerance(&inv_mu))?;
        for (what, rep) in [("surface tensions", &s_rep), ("reciprocal mobilities", &m_rep)] {
            if rep.classification != Definiteness::ConditionallyNegativeDefinite {
                return Err(Error::Definiteness(format!(
                    "{what} are {}, stability bounds need conditionally negative definite",
                    rep.classification
                )));
            }
        }
        lower.push(Bound {
            name: "stability (alpha >= min s / max m)",
            value: s_rep.min_nonzero() / m_rep.max_nonzero(),
        });
        upper.push(Bound {
            name: "stability (beta <= max s / min m)",
            value: s_rep.max_nonzero() / m_rep.min_nonzero(),
        });
    }

    let mut warnings = Vec::new();

    let alpha = match policy.manual_alpha {
        Some(alpha) => {
            for bound in lower.iter().filter(|b| alpha < b.value) {
                warnings.push(format!(
                    "manual alpha = {alpha} violates {} = {}",
                    bound.name, bound.value
                ));
            }
            alpha
        }
        None => lower
            .iter()
            .map(|b| b.value)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            .ok_or_else(|| Error::Parameter("no lower bound on alpha enabled and no manual alpha".into()))?,
    };

    if policy.enforce_no_wetting {
        let eps = triangle_margin(sigma.as_matrix());
        if !(eps > 0.0) {
            return Err(Error::Infeasible(vec![format!(
                "no-wetting needs strictly triangular surface tensions (margin = {eps})"
            )]));
        }
        let excess = -triangle_margin(&mu.reciprocal());
        if excess > 0.0 {
            let cap = (NO_WETTING_SAFETY * eps / excess).powi(2) / alpha;
            upper.push(Bound {
                name: "no-wetting (sqrt(alpha*beta) * M < eps)",
                value: cap,
            });
        }
    }

    let beta = match policy.manual_beta {
        Some(beta) => {
            for bound in upper.iter().filter(|b| beta > b.value) {
                warnings.push(format!(
                    "manual beta = {beta} violates {} = {}",
                    bound.name, bound.value
                ));
            }
            beta
        }
        None => upper
            .iter()
            .map(|b| b.value)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            .ok_or_else(|| Error::Parameter("no upper bound on beta enabled and no manual beta".into()))?,
    };

    if !(alpha > beta && beta > 0.0) {
        let mut violated: Vec<String> = Vec::new();
        for b in lower.iter().filter(|b| b.value >= beta) {
            violated.push(format!("{} = {}", b.name, b.value));
        }
        for b in upper.iter().filter(|b| b.value <= alpha) {
            violated.push(format!("{} = {}", b.name, b.value));
        }
        violated.push(format!("alpha = {alpha} must exceed beta = {beta} > 0"));
        return Err(Error::Infeasible(violated));
    }

    Ok(AlphaBetaSelection { alpha, beta, warnings })
}

/// Total kernel masses `a_ij + b_ij`; their strict triangle inequality rules
/// out nucleation of a third phase along an interface.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSum {
    pub matrix: DMatrix<f64>,
    pub strict_triangle: bool,
    /// Largest deviation between the direct sum and the closed form
    /// `sqrt(pi) (sigma + sqrt(alpha beta) / mu) / (sqrt(alpha) + sqrt(beta))`.
    pub closed_form_deviation: f64,
}

pub fn pair_sum_matrix(family: &KernelFamily) -> Result<PairSum> {
    let n = family.n_phases();
    let (sa, sb) = (family.alpha.sqrt(), family.beta.sqrt());
    let mut matrix = DMatrix::zeros(n, n);
    let mut deviation: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let direct = family.a[(i, j)] + family.b[(i, j)];
            let (sigma, mu) = family.tension_mobility(i, j)?;
            let closed = PI.sqrt() * (sigma + sa * sb / mu) / (sa + sb);
            deviation = deviation.max((direct - closed).abs() / (1.0 + direct.abs()));
            matrix[(i, j)] = direct;
            matrix[(j, i)] = direct;
        }
    }
    let strict_triangle = triangle_margin(&matrix) > 1e-12 * (1.0 + matrix.amax());
    Ok(PairSum {
        matrix,
        strict_triangle,
        closed_form_deviation: deviation,
    })
}

/// Fourier multiplier of the Gaussian with `hat G(xi) = exp(-s |xi|^2)` on
/// the unit torus, stored row-major over integer frequencies
/// (index `ky * nx + kx`, FFT ordering).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralArray {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl SpectralArray {
    pub fn at(&self, kx: usize, ky: usize) -> f64 {
        self.values[ky * self.grid.nx() + kx]
    }
}

/// Signed integer frequency of FFT bin `k` on a length-`n` axis.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

pub fn gaussian_multiplier(s: f64, grid: &GridSpec) -> Result<SpectralArray> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Parameter(format!("Gaussian scale must be positive, got {s}")));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let c = 4.0 * PI * PI * s;
    let fy: Vec<f64> = (0..ny).map(|k| (-c * signed_frequency(k, ny).powi(2)).exp()).collect();
    let fx: Vec<f64> = (0..nx).map(|k| (-c * signed_frequency(k, nx).powi(2)).exp()).collect();
    let mut values = Vec::with_capacity(nx * ny);
    for gy in &fy {
        values.extend(fx.iter().map(|gx| gx * gy));
    }
    Ok(SpectralArray {
        grid: grid.clone(),
        values,
    })
}
