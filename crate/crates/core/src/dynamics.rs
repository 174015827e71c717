//! Threshold-dynamics time stepping and the nonlocal energies each step
//! dissipates.
//!
//! Three schemes share one engine. Every scheme convolves phase indicators
//! with one or two Gaussians, combines the results with a coefficient matrix
//! per Gaussian, and assigns each cell to the phase with the smallest
//! comparison value (ties go to the smallest phase index):
//!
//! * `Es`: two Gaussians `G_sqrt(alpha dt)`, `G_sqrt(beta dt)` weighted by the
//!   kernel coefficients `A`, `B`; arbitrary tensions and mobilities.
//! * `Eo`: one Gaussian `G_sqrt(dt)` weighted by the tensions; the implied
//!   mobilities are `1 / sigma`.
//! * `Mbo`: two phases, threshold of `K * 1_phase0` at half the kernel mass.
//!
//! The energy of the partition a step starts from falls out of the same
//! convolutions, so it is reported with every step at no extra cost.

use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{volumes, CosineConvolver, GridSpec, Label, Partition, SpectralConvolver, Spectrum};
use crate::kernel::KernelFamily;
use crate::tension::{MobilityMatrix, TensionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Mbo,
    Eo,
    Es,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Mbo => "mbo",
            Algorithm::Eo => "eo",
            Algorithm::Es => "es",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mbo" => Ok(Algorithm::Mbo),
            "eo" => Ok(Algorithm::Eo),
            "es" => Ok(Algorithm::Es),
            other => Err(Error::Parameter(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Relative tolerance for the kernel/(sigma, mu) consistency check.
const ROUND_TRIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StepContext {
    pub algorithm: Algorithm,
    pub dt: f64,
    pub sigma: TensionMatrix,
    pub mu: MobilityMatrix,
    /// Absent for `Eo`, which convolves with a single Gaussian.
    pub kernels: Option<KernelFamily>,
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

impl StepContext {
    pub fn es(sigma: TensionMatrix, mu: MobilityMatrix, kernels: KernelFamily, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let err = kernels.round_trip_error(&sigma, &mu)?;
        if err > ROUND_TRIP_TOL {
            return Err(Error::Validation(format!(
                "kernels do not reproduce the tensions and mobilities (relative error {err:e})"
            )));
        }
        Ok(Self {
            algorithm: Algorithm::Es,
            dt,
            sigma,
            mu,
            kernels: Some(kernels),
        })
    }

    pub fn eo(sigma: TensionMatrix, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let mu = MobilityMatrix::new(TensionMatrix::reciprocal_of(&sigma))?;
        Ok(Self {
            algorithm: Algorithm::Eo,
            dt,
            sigma,
            mu,
            kernels: None,
        })
    }

    /// Two-phase scheme with kernel `a_01 G_sqrt(alpha) + b_01 G_sqrt(beta)`.
    pub fn mbo(kernels: KernelFamily, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        if kernels.n_phases() != 2 {
            return Err(Error::Shape(format!(
                "the two-phase scheme needs 2 phases, got {}",
                kernels.n_phases()
            )));
        }
        let (s, m) = kernels.tension_mobility(0, 1)?;
        Ok(Self {
            algorithm: Algorithm::Mbo,
            dt,
            sigma: TensionMatrix::equal(2, s)?,
            mu: MobilityMatrix::equal(2, m)?,
            kernels: Some(kernels),
        })
    }

    pub fn n_phases(&self) -> usize {
        self.sigma.n_phases()
    }

    /// `(Gaussian scale, coefficient matrix)` for each convolution width.
    fn terms(&self) -> Vec<(f64, &DMatrix<f64>)> {
        match (&self.algorithm, &self.kernels) {
            (Algorithm::Eo, _) => vec![(self.dt, self.sigma.as_matrix())],
            (_, Some(k)) => vec![(k.alpha * self.dt, &k.a), (k.beta * self.dt, &k.b)],
            (_, None) => unreachable!("constructors attach kernels to es and mbo"),
        }
    }
}

impl TensionMatrix {
    /// Entrywise reciprocal off the diagonal.
    pub fn reciprocal_of(sigma: &TensionMatrix) -> DMatrix<f64> {
        let n = sigma.n_phases();
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / sigma.get(i, j) })
    }
}

/// One step's result together with the energy of the partition it started from.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: Partition,
    pub energy_before: f64,
}

#[derive(Debug)]
enum Backend {
    Periodic(SpectralConvolver),
    Reflecting(CosineConvolver),
}

impl Backend {
    fn grid(&self) -> &GridSpec {
        match self {
            Backend::Periodic(c) => c.grid(),
            Backend::Reflecting(c) => c.grid(),
        }
    }

    fn cell_area(&self) -> f64 {
        match self {
            Backend::Periodic(c) => c.grid().cell_measure(),
            Backend::Reflecting(c) => c.cell_size().powi(c.grid().dim() as i32),
        }
    }

    fn forward(&self, values: &[f64]) -> Spectrum {
        match self {
            Backend::Periodic(c) => c.forward(values),
            Backend::Reflecting(c) => c.forward(values),
        }
    }

    fn forward_pair(&self, u: &[f64], v: &[f64]) -> (Spectrum, Spectrum) {
        match self {
            Backend::Periodic(c) => c.forward_pair(u, v),
            Backend::Reflecting(c) => (c.forward(u), c.forward(v)),
        }
    }

    fn unit_spectrum(&self) -> Spectrum {
        match self {
            Backend::Periodic(c) => c.unit_spectrum(),
            Backend::Reflecting(c) => c.unit_spectrum(),
        }
    }

    fn multiplier(&self, s: f64) -> Result<Arc<Vec<f64>>> {
        match self {
            Backend::Periodic(c) => c.multiplier(s),
            Backend::Reflecting(c) => c.multiplier(s),
        }
    }

    fn inverse_real_pair(&self, a: &Spectrum, b: Option<&Spectrum>) -> (Vec<f64>, Option<Vec<f64>>) {
        match self {
            Backend::Periodic(c) => c.inverse_real_pair(a, b),
            Backend::Reflecting(c) => c.inverse_real_pair(a, b),
        }
    }
}

/// Reusable stepping engine for one context and grid.
#[derive(Debug)]
pub struct Simulator {
    ctx: StepContext,
    conv: Backend,
}

impl Simulator {
    /// Periodic unit torus.
    pub fn new(ctx: StepContext, grid: &GridSpec) -> Self {
        Self {
            conv: Backend::Periodic(SpectralConvolver::new(grid)),
            ctx,
        }
    }

    /// Box of square cells of side `h` with mirror (Neumann) walls.
    pub fn reflecting(ctx: StepContext, grid: &GridSpec, h: f64) -> Result<Self> {
        Ok(Self {
            conv: Backend::Reflecting(CosineConvolver::new(grid, h)?),
            ctx,
        })
    }

    pub fn context(&self) -> &StepContext {
        &self.ctx
    }

    fn check(&self, partition: &Partition) -> Result<()> {
        if partition.n_phases() != self.ctx.n_phases() {
            return Err(Error::Shape(format!(
                "partition has {} phases, context has {}",
                partition.n_phases(),
                self.ctx.n_phases()
            )));
        }
        if partition.grid() != self.conv.grid() {
            return Err(Error::Shape("partition grid differs from the simulator grid".into()));
        }
        Ok(())
    }

    /// Indicator spectra, `None` for phases with no cells. Real fields are
    /// transformed two at a time, and the last nonempty phase is recovered
    /// from the spectrum of the constant field.
    fn indicator_spectra(&self, partition: &Partition) -> Vec<Option<Spectrum>> {
        let n = partition.n_phases();
        let counts = partition.counts();
        let present: Vec<usize> = (0..n).filter(|&j| counts[j] > 0).collect();
        let mut out: Vec<Option<Spectrum>> = vec![None; n];
        let Some((&derived, direct)) = present.split_last() else {
            return out;
        };
        for pair in direct.chunks(2) {
            match *pair {
                [j, k] => {
                    let (a, b) = self.conv.forward_pair(&partition.indicator(j), &partition.indicator(k));
                    out[j] = Some(a);
                    out[k] = Some(b);
                }
                [j] => out[j] = Some(self.conv.forward(&partition.indicator(j))),
                _ => unreachable!(),
            }
        }
        let mut rest = self.conv.unit_spectrum();
        for &j in direct {
            let u = out[j].as_ref().expect("transformed above");
            for (r, v) in rest.data.iter_mut().zip(&u.data) {
                *r -= v;
            }
        }
        out[derived] = Some(rest);
        out
    }

    /// Spectrum of `psi_i`: `sum_t m_t * sum_{j != i} C_t[i][j] u_j`, summed in
    /// ascending `j`.
    fn comparison_spectrum(
        &self,
        i: usize,
        spectra: &[Option<Spectrum>],
        terms: &[(Arc<Vec<f64>>, Vec<f64>)],
    ) -> Spectrum {
        let len = self.conv.grid().len();
        let mut acc = vec![Complex::new(0.0, 0.0); len];
        let used: Vec<(usize, &Spectrum)> = spectra
            .iter()
            .enumerate()
            .filter(|(j, u)| *j != i && u.is_some())
            .map(|(j, u)| (j, u.as_ref().unwrap()))
            .collect();
        for (mult, row) in terms {
            for (k, slot) in acc.iter_mut().enumerate() {
                let mut w = Complex::new(0.0, 0.0);
                for &(j, u) in &used {
                    w += u.data[k] * row[j];
                }
                *slot += w * mult[k];
            }
        }
        Spectrum { data: acc }
    }

    /// `(multiplier, row i of C_t)` for every width, rows flattened per phase.
    fn term_rows(&self, i: usize) -> Result<Vec<(Arc<Vec<f64>>, Vec<f64>)>> {
        self.ctx
            .terms()
            .into_iter()
            .map(|(s, c)| Ok((self.conv.multiplier(s)?, c.row(i).iter().copied().collect())))
            .collect()
    }

    /// Comparison functions `psi_i = sum_{j != i} sum_t C_t[i][j] phi_{t,j}`.
    /// The sum is linear in the indicators, so it is assembled in frequency
    /// space and two `psi` share each inverse transform.
    pub fn comparison_functions(&self, partition: &Partition) -> Result<Vec<Vec<f64>>> {
        self.check(partition)?;
        let n = partition.n_phases();
        let spectra = self.indicator_spectra(partition);
        let mut psi = Vec::with_capacity(n);
        let phases: Vec<usize> = (0..n).collect();
        for pair in phases.chunks(2) {
            let a = self.comparison_spectrum(pair[0], &spectra, &self.term_rows(pair[0])?);
            let b = match pair.get(1) {
                Some(&k) => Some(self.comparison_spectrum(k, &spectra, &self.term_rows(k)?)),
                None => None,
            };
            let (pa, pb) = self.conv.inverse_real_pair(&a, b.as_ref());
            psi.push(pa);
            psi.extend(pb);
        }
        Ok(psi)
    }

    fn energy_scale(&self) -> f64 {
        self.conv.cell_area() / self.ctx.dt.sqrt()
    }

    /// Two-phase kernel convolution `K * 1_phase0` and the kernel mass.
    fn mbo_field(&self, partition: &Partition) -> Result<(Vec<f64>, f64)> {
        let k = self.ctx.kernels.as_ref().expect("mbo carries kernels");
        let (a, b) = (k.a[(0, 1)], k.b[(0, 1)]);
        let len = partition.grid().len();
        if partition.counts()[0] == 0 {
            return Ok((vec![0.0; len], a + b));
        }
        let spectrum = self.conv.forward(&partition.indicator(0));
        let terms = self.ctx.terms();
        let m1 = self.conv.multiplier(terms[0].0)?;
        let m2 = self.conv.multiplier(terms[1].0)?;
        let data = spectrum
            .data
            .iter()
            .zip(m1.iter().zip(m2.iter()))
            .map(|(u, (p, q))| u * (a * p + b * q))
            .collect();
        let (psi, _) = self.conv.inverse_real_pair(&Spectrum { data }, None);
        Ok((psi, a + b))
    }

    pub fn energy(&self, partition: &Partition) -> Result<f64> {
        self.check(partition)?;
        let scale = self.energy_scale();
        let e = match self.ctx.algorithm {
            Algorithm::Mbo => {
                let (psi, _) = self.mbo_field(partition)?;
                let sum: f64 = psi
                    .iter()
                    .zip(partition.labels())
                    .filter(|(_, &l)| l == 1)
                    .map(|(v, _)| v)
                    .sum();
                scale * sum
            }
            Algorithm::Eo | Algorithm::Es => {
                let psi = self.comparison_functions(partition)?;
                scale * own_phase_sum(&psi, partition.labels())
            }
        };
        Ok(e)
    }

    pub fn step(&self, partition: &Partition) -> Result<StepOutcome> {
        self.check(partition)?;
        let scale = self.energy_scale();
        let (labels, energy) = match self.ctx.algorithm {
            Algorithm::Mbo => {
                let (psi, mass) = self.mbo_field(partition)?;
                let half = 0.5 * mass;
                let mut sum = 0.0;
                let labels: Vec<Label> = psi
                    .iter()
                    .zip(partition.labels())
                    .map(|(&v, &l)| {
                        if l == 1 {
                            sum += v;
                        }
                        if v >= half {
                            0
                        } else {
                            1
                        }
                    })
                    .collect();
                (labels, scale * sum)
            }
            Algorithm::Eo | Algorithm::Es => {
                let psi = self.comparison_functions(partition)?;
                let energy = scale * own_phase_sum(&psi, partition.labels());
                (argmin_labels(&psi), energy)
            }
        };
        if !energy.is_finite() {
            return Err(Error::Numerical(format!("energy evaluated to {energy}")));
        }
        Ok(StepOutcome {
            next: Partition::from_labels(partition.grid().clone(), partition.n_phases(), labels)?,
            energy_before: energy,
        })
    }
}

fn own_phase_sum(psi: &[Vec<f64>], labels: &[Label]) -> f64 {
    labels.iter().enumerate().map(|(x, &l)| psi[l as usize][x]).sum()
}

/// Smallest comparison value wins; ties go to the lower phase index.
fn argmin_labels(psi: &[Vec<f64>]) -> Vec<Label> {
    let len = psi[0].len();
    (0..len)
        .map(|x| {
            let mut best = 0;
            let mut best_val = psi[0][x];
            for (i, p) in psi.iter().enumerate().skip(1) {
                if p[x] < best_val {
                    best = i;
                    best_val = p[x];
                }
            }
            best as Label
        })
        .collect()
}

fn expect_algorithm(ctx: &StepContext, alg: Algorithm) -> Result<()> {
    if ctx.algorithm != alg {
        return Err(Error::Parameter(format!(
            "context is configured for {}, not {alg}",
            ctx.algorithm
        )));
    }
    Ok(())
}

pub fn step_es(partition: &Partition, ctx: &StepContext) -> Result<Partition> {
    expect_algorithm(ctx, Algorithm::Es)?;
    Ok(Simulator::new(ctx.clone(), partition.grid()).step(partition)?.next)
}

pub fn step_eo(partition: &Partition, ctx: &StepContext) -> Result<Partition> {
    expect_algorithm(ctx, Algorithm::Eo)?;
    Ok(Simulator::new(ctx.clone(), partition.grid()).step(partition)?.next)
}

pub fn step_mbo(partition: &Partition, ctx: &StepContext) -> Result<Partition> {
    expect_algorithm(ctx, Algorithm::Mbo)?;
    if partition.n_phases() != 2 {
        return Err(Error::Shape(format!(
            "the two-phase scheme needs 2 phases, got {}",
            partition.n_phases()
        )));
    }
    Ok(Simulator::new(ctx.clone(), partition.grid()).step(partition)?.next)
}

pub fn nonlocal_energy(partition: &Partition, ctx: &StepContext) -> Result<f64> {
    Simulator::new(ctx.clone(), partition.grid()).energy(partition)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordOptions {
    pub energy: bool,
    pub volumes: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self {
            energy: true,
            volumes: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dt: f64,
    pub n_phases: usize,
    /// `steps + 1` values, starting with the initial partition; empty when
    /// not recorded.
    pub energies: Vec<f64>,
    pub volumes: Vec<Vec<f64>>,
    pub wall_time: f64,
    pub final_partition: Partition,
}

impl RunReport {
    /// Largest relative increase `(E_{k+1} - E_k) / |E_k|` along the run.
    pub fn max_relative_increase(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `step,time,energy,vol_1,...,vol_N`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "step,time,energy")?;
        for i in 1..=self.n_phases {
            write!(out, ",vol_{i}")?;
        }
        writeln!(out)?;
        let rows = self.energies.len().max(self.volumes.len());
        for k in 0..rows {
            write!(out, "{k},{}", fmt_f64(k as f64 * self.dt))?;
            match self.energies.get(k) {
                Some(e) => write!(out, ",{}", fmt_f64(*e))?,
                None => write!(out, ",")?,
            }
            match self.volumes.get(k) {
                Some(v) => {
                    for x in v {
                        write!(out, ",{}", fmt_f64(*x))?;
                    }
                }
                None => {
                    for _ in 0..self.n_phases {
                        write!(out, ",")?;
                    }
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn run_simulation(
    initial: &Partition,
    ctx: &StepContext,
    steps: usize,
    record: RecordOptions,
) -> Result<RunReport> {
    run_simulation_with(initial, ctx, steps, record, |_, _| Ok(()))
}

/// Like [`run_simulation`], calling `observer(k, partition_k)` for the
/// initial partition and after every step.
pub fn run_simulation_with<F>(
    initial: &Partition,
    ctx: &StepContext,
    steps: usize,
    record: RecordOptions,
    observer: F,
) -> Result<RunReport>
where
    F: FnMut(usize, &Partition) -> Result<()>,
{
    Simulator::new(ctx.clone(), initial.grid()).run(initial, steps, record, observer)
}

impl Simulator {
    /// Runs `steps` steps from `initial`, calling `observer(k, partition_k)`
    /// for the initial partition and after every step.
    pub fn run<F>(&self, initial: &Partition, steps: usize, record: RecordOptions, mut observer: F) -> Result<RunReport>
    where
        F: FnMut(usize, &Partition) -> Result<()>,
    {
        if steps == 0 {
            return Err(Error::Parameter("a run needs at least one step".into()));
        }
        let start = Instant::now();
        let mut energies = Vec::new();
        let mut vols = Vec::new();
        let mut current = initial.clone();
        observer(0, &current)?;
        for k in 0..steps {
            if record.volumes {
                vols.push(volumes(&current));
            }
            let outcome = self.step(&current)?;
            if record.energy {
                energies.push(outcome.energy_before);
            }
            current = outcome.next;
            observer(k + 1, &current)?;
        }
        if record.volumes {
            vols.push(volumes(&current));
        }
        if record.energy {
            let e = self.energy(&current)?;
            if !e.is_finite() {
                return Err(Error::Numerical(format!("energy evaluated to {e}")));
            }
            energies.push(e);
        }
        Ok(RunReport {
            dt: self.ctx.dt,
            n_phases: self.ctx.n_phases(),
            energies,
            volumes: vols,
            wall_time: start.elapsed().as_secs_f64(),
            final_partition: current,
        })
    }
}
