//! Uniform periodic grids on the unit torus, phase partitions, and exact
//! spectral Gaussian convolution.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernel::gaussian_multiplier;

pub const MIN_CELLS: usize = 8;

/// Cell-centred grid on `[0,1)` or `[0,1)^2`. One-dimensional grids have
/// `ny == 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
}

impl GridSpec {
    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::Parameter(format!(
                "grid sizes must be at least {MIN_CELLS}, got {nx}x{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn new_1d(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::Parameter(format!(
                "grid size must be at least {MIN_CELLS}, got {n}"
            )));
        }
        Ok(Self { nx: n, ny: 1 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new_2d(n, n)
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    /// Length (1D) or area (2D) of one cell.
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn center(&self, ix: usize, iy: usize) -> (f64, f64) {
        ((ix as f64 + 0.5) * self.hx(), (iy as f64 + 0.5) * self.hy())
    }
}

pub type Label = u16;

/// Assignment of one phase to every grid cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    grid: GridSpec,
    n_phases: usize,
    labels: Vec<Label>,
}

impl Partition {
    pub fn from_labels(grid: GridSpec, n_phases: usize, labels: Vec<Label>) -> Result<Self> {
        if n_phases < 1 || n_phases > Label::MAX as usize {
            return Err(Error::Parameter(format!("invalid phase count {n_phases}")));
        }
        if labels.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} labels for a grid of {} cells",
                labels.len(),
                grid.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= n_phases) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {n_phases} phases"
            )));
        }
        Ok(Self { grid, n_phases, labels })
    }

    pub fn uniform(grid: GridSpec, n_phases: usize, label: usize) -> Result<Self> {
        let len = grid.len();
        Self::from_labels(grid, n_phases, vec![label as Label; len])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label_at(&self, ix: usize, iy: usize) -> usize {
        self.labels[self.grid.index(ix, iy)] as usize
    }

    pub fn indicator(&self, phase: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l as usize == phase { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_phases];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Cyclic shift by whole cells.
    pub fn shifted(&self, dx: isize, dy: isize) -> Self {
        let (nx, ny) = (self.grid.nx as isize, self.grid.ny as isize);
        let mut labels = vec![0; self.labels.len()];
        for iy in 0..ny {
            for ix in 0..nx {
                let tx = (ix + dx).rem_euclid(nx) as usize;
                let ty = (iy + dy).rem_euclid(ny) as usize;
                labels[self.grid.index(tx, ty)] = self.labels[self.grid.index(ix as usize, iy as usize)];
            }
        }
        Self {
            grid: self.grid.clone(),
            n_phases: self.n_phases,
            labels,
        }
    }

    /// Renames phase `p` to `perm[p]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        Self {
            grid: self.grid.clone(),
            n_phases: self.n_phases,
            labels: self.labels.iter().map(|&l| perm[l as usize] as Label).collect(),
        }
    }
}

/// Samples `labeler` at every cell centre. The labeler returns zero-based
/// phase indices.
pub fn make_partition<F>(grid: &GridSpec, n_phases: usize, labeler: F) -> Result<Partition>
where
    F: Fn(f64, f64) -> usize,
{
    let mut labels = Vec::with_capacity(grid.len());
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = grid.center(ix, iy);
            let l = labeler(x, y);
            if l >= n_phases {
                return Err(Error::Validation(format!(
                    "labeler returned phase {l} at ({x}, {y}); only {n_phases} phases exist"
                )));
            }
            labels.push(l as Label);
        }
    }
    Partition::from_labels(grid.clone(), n_phases, labels)
}

/// Cell-count volume fractions of every phase.
pub fn volumes(partition: &Partition) -> Vec<f64> {
    let total = partition.grid.len() as f64;
    partition.counts().into_iter().map(|c| c as f64 / total).collect()
}

/// Real field sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("field contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Midpoints of every cell edge separating phases `i` and `j`, with periodic
/// adjacency. Two-dimensional grids only.
pub fn extract_interface(partition: &Partition, i: usize, j: usize) -> Result<Vec<(f64, f64)>> {
    if i == j {
        return Err(Error::Parameter(format!(
            "interface needs two distinct phases, got {i} twice"
        )));
    }
    let grid = &partition.grid;
    if grid.dim() != 2 {
        return Err(Error::Parameter("interfaces are extracted on 2D grids only".into()));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.hx(), grid.hy());
    let pair = |a: usize, b: usize| (a == i && b == j) || (a == j && b == i);
    let mut points = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let here = partition.label_at(ix, iy);
            let right = partition.label_at((ix + 1) % nx, iy);
            if pair(here, right) {
                let x = if ix + 1 == nx { 0.0 } else { (ix + 1) as f64 * hx };
                points.push((x, (iy as f64 + 0.5) * hy));
            }
            let up = partition.label_at(ix, (iy + 1) % ny);
            if pair(here, up) {
                let y = if iy + 1 == ny { 0.0 } else { (iy + 1) as f64 * hy };
                points.push(((ix as f64 + 0.5) * hx, y));
            }
        }
    }
    Ok(points)
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Fourier spectrum of a grid field, stored transposed (`kx * ny + ky`).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub(crate) data: Vec<Complex<f64>>,
}

/// FFT plans and a multiplier memo for one grid. Results are independent of
/// how many threads share the convolver.
pub struct SpectralConvolver {
    grid: GridSpec,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    multipliers: RwLock<HashMap<u64, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for SpectralConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralConvolver").field("grid", &self.grid).finish()
    }
}

impl SpectralConvolver {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid: grid.clone(),
            fwd_x: planner.plan_fft_forward(grid.nx),
            inv_x: planner.plan_fft_inverse(grid.nx),
            fwd_y: planner.plan_fft_forward(grid.ny),
            inv_y: planner.plan_fft_inverse(grid.ny),
            multipliers: RwLock::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Gaussian multiplier for scale `s` in the transposed spectral layout.
    pub(crate) fn multiplier(&self, s: f64) -> Result<Arc<Vec<f64>>> {
        let key = s.to_bits();
        if let Some(m) = self.multipliers.read().expect("multiplier memo poisoned").get(&key) {
            return Ok(Arc::clone(m));
        }
        let natural = gaussian_multiplier(s, &self.grid)?;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut t = vec![0.0; nx * ny];
        for ky in 0..ny {
            for kx in 0..nx {
                t[kx * ny + ky] = natural.values[ky * nx + kx];
            }
        }
        let m = Arc::new(t);
        self.multipliers
            .write()
            .expect("multiplier memo poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&m));
        Ok(m)
    }

    fn run(fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex<f64>]) {
        let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
    }

    pub fn forward(&self, values: &[f64]) -> Spectrum {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(values.len(), nx * ny, "field does not match the grid");
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        Self::run(&self.fwd_x, &mut buf);
        let mut t = vec![Complex::default(); nx * ny];
        transpose(&buf, &mut t, ny, nx);
        if ny > 1 {
            Self::run(&self.fwd_y, &mut t);
        }
        Spectrum { data: t }
    }

    /// Transposed-layout index of the frequency `-k`.
    fn mirror_index(&self, idx: usize) -> usize {
        let ny = self.grid.ny;
        let (kx, ky) = (idx / ny, idx % ny);
        ((self.grid.nx - kx) % self.grid.nx) * ny + (ny - ky) % ny
    }

    /// Spectra of two real fields from a single complex transform of
    /// `u + i v`, separated through conjugate symmetry.
    pub fn forward_pair(&self, u: &[f64], v: &[f64]) -> (Spectrum, Spectrum) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert!(
            u.len() == nx * ny && v.len() == nx * ny,
            "field does not match the grid"
        );
        let mut buf: Vec<Complex<f64>> = u.iter().zip(v).map(|(&a, &b)| Complex::new(a, b)).collect();
        Self::run(&self.fwd_x, &mut buf);
        let mut z = vec![Complex::default(); nx * ny];
        transpose(&buf, &mut z, ny, nx);
        if ny > 1 {
            Self::run(&self.fwd_y, &mut z);
        }
        let mut a = vec![Complex::default(); nx * ny];
        let mut b = vec![Complex::default(); nx * ny];
        for idx in 0..nx * ny {
            let zk = z[idx];
            let zm = z[self.mirror_index(idx)].conj();
            a[idx] = (zk + zm) * 0.5;
            let d = (zk - zm) * 0.5;
            b[idx] = Complex::new(d.im, -d.re);
        }
        (Spectrum { data: a }, Spectrum { data: b })
    }

    /// Spectrum of the constant field 1.
    pub fn unit_spectrum(&self) -> Spectrum {
        let mut data = vec![Complex::default(); self.grid.len()];
        data[0] = Complex::new(self.grid.len() as f64, 0.0);
        Spectrum { data }
    }

    /// Real fields whose spectra are `a` and `b`, both assumed Hermitian,
    /// from one complex inverse transform of `a + i b`.
    pub fn inverse_real_pair(&self, a: &Spectrum, b: Option<&Spectrum>) -> (Vec<f64>, Option<Vec<f64>>) {
        let z: Vec<Complex<f64>> = match b {
            Some(b) => a
                .data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| Complex::new(x.re - y.im, x.im + y.re))
                .collect(),
            None => a.data.clone(),
        };
        let out = self.inverse_in_place(z);
        let scale = 1.0 / self.grid.len() as f64;
        let re = out.iter().map(|z| z.re * scale).collect();
        let im = b.map(|_| out.iter().map(|z| z.im * scale).collect());
        (re, im)
    }

    fn inverse_in_place(&self, mut t: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if ny > 1 {
            Self::run(&self.inv_y, &mut t);
        }
        let mut buf = vec![Complex::default(); nx * ny];
        transpose(&t, &mut buf, nx, ny);
        Self::run(&self.inv_x, &mut buf);
        buf
    }

    /// Convolves with the Gaussians of scales `s1` and `s2` in one complex
    /// transform: both products are Hermitian, so the inverse of
    /// `F (m1 + i m2)` carries the two real results in its real and
    /// imaginary parts.
    pub fn convolve_spectrum_pair(&self, spectrum: &Spectrum, s1: f64, s2: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let m1 = self.multiplier(s1)?;
        let m2 = self.multiplier(s2)?;
        let product: Vec<Complex<f64>> = spectrum
            .data
            .iter()
            .zip(m1.iter().zip(m2.iter()))
            .map(|(f, (&a, &b))| f * Complex::new(a, b))
            .collect();
        let out = self.inverse_in_place(product);
        let scale = 1.0 / self.grid.len() as f64;
        Ok(out.iter().map(|z| (z.re * scale, z.im * scale)).unzip())
    }

    pub fn convolve_spectrum(&self, spectrum: &Spectrum, s: f64) -> Result<Vec<f64>> {
        let m = self.multiplier(s)?;
        let product: Vec<Complex<f64>> = spectrum.data.iter().zip(m.iter()).map(|(f, &a)| f * a).collect();
        let out = self.inverse_in_place(product);
        let scale = 1.0 / self.grid.len() as f64;
        Ok(out.iter().map(|z| z.re * scale).collect())
    }

    pub fn convolve(&self, values: &[f64], s: f64) -> Result<Vec<f64>> {
        let spectrum = self.forward(values);
        self.convolve_spectrum(&spectrum, s)
    }
}

/// Convolution with the periodized heat kernel whose transform is
/// `exp(-s |xi|^2)`, i.e. the Gaussian `G_sqrt(s)`.
pub fn gaussian_convolve(field: &ScalarField, s: f64) -> Result<ScalarField> {
    if !(s > 0.0) {
        return Err(Error::Parameter(format!("Gaussian scale must be positive, got {s}")));
    }
    let conv = SpectralConvolver::new(&field.grid);
    Ok(ScalarField {
        grid: field.grid.clone(),
        values: conv.convolve(&field.values, s)?,
    })
}

/// Heat-kernel smoothing of a whole-line half-space indicator, evaluated at
/// distance `d` outside its edge: `erfc(d / (2 sqrt(s))) / 2`.
pub fn half_plane_profile(d: f64, s: f64) -> f64 {
    0.5 * erfc(d / (2.0 * s.sqrt()))
}

/// Complementary error function; Chebyshev fit with relative error below 1.2e-7.
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Binary PGM (P5) phase map. Gray level of zero-based phase `k` is
/// `round(255 k / (N - 1))`; rows are written from the top of the domain so
/// the image shows the origin at the lower left.
pub fn write_pgm<W: Write>(partition: &Partition, mut out: W) -> std::io::Result<()> {
    let grid = partition.grid();
    let n = partition.n_phases();
    let denom = (n.max(2) - 1) as f64;
    writeln!(out, "P5")?;
    writeln!(
        out,
        "# phase map, {} phases, origin lower-left, rows top (y=1) to bottom (y=0)",
        n
    )?;
    writeln!(out, "{} {}", grid.nx(), grid.ny())?;
    writeln!(out, "255")?;
    let mut row = vec![0u8; grid.nx()];
    for iy in (0..grid.ny()).rev() {
        for (ix, px) in row.iter_mut().enumerate() {
            let k = partition.label_at(ix, iy) as f64;
            *px = (255.0 * k / denom).round() as u8;
        }
        out.write_all(&row)?;
    }
    Ok(())
}

/// Unnormalised DCT-II of one length, `X_k = sum_n x_n cos(pi k (2n+1) / 2N)`,
/// and its exact inverse, each through a single complex FFT of length `N`
/// (even samples first, odd samples reversed).
struct Dct {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    twiddle: Vec<Complex<f64>>,
}

impl Dct {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        let twiddle = (0..n)
            .map(|k| Complex::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2 * n) as f64))
            .collect();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            twiddle,
        }
    }

    fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    fn source_index(&self, m: usize) -> usize {
        if 2 * m < self.n {
            2 * m
        } else {
            2 * (self.n - 1 - m) + 1
        }
    }

    fn forward(&self, x: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        for (m, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(x[self.source_index(m)], 0.0);
        }
        self.fwd.process_with_scratch(buf, scratch);
        for (k, out) in x.iter_mut().enumerate() {
            *out = (self.twiddle[k] * buf[k]).re;
        }
    }

    fn inverse(&self, x: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let n = self.n;
        for (k, slot) in buf.iter_mut().enumerate() {
            let mirror = if k == 0 { 0.0 } else { x[n - k] };
            *slot = self.twiddle[k].conj() * Complex::new(x[k], -mirror);
        }
        self.inv.process_with_scratch(buf, scratch);
        let scale = 1.0 / n as f64;
        for (m, v) in buf.iter().enumerate() {
            x[self.source_index(m)] = v.re * scale;
        }
    }

    fn forward_rows(&self, data: &mut [f64]) {
        let mut buf = vec![Complex::default(); self.n];
        let mut scratch = vec![Complex::default(); self.scratch_len()];
        for row in data.chunks_exact_mut(self.n) {
            self.forward(row, &mut buf, &mut scratch);
        }
    }

    fn inverse_rows(&self, data: &mut [f64]) {
        let mut buf = vec![Complex::default(); self.n];
        let mut scratch = vec![Complex::default(); self.scratch_len()];
        for row in data.chunks_exact_mut(self.n) {
            self.inverse(row, &mut buf, &mut scratch);
        }
    }
}

/// Gaussian convolution in a box of `nx x ny` square cells of side `h` with
/// even reflection at all four walls. Spectra use the same transposed layout
/// as [`SpectralConvolver`] and are real.
pub struct CosineConvolver {
    grid: GridSpec,
    h: f64,
    dct_x: Dct,
    dct_y: Dct,
    multipliers: RwLock<HashMap<u64, Arc<Vec<f64>>>>,
}

impl std::fmt::Debug for CosineConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosineConvolver")
            .field("grid", &self.grid)
            .field("h", &self.h)
            .finish()
    }
}

impl CosineConvolver {
    pub fn new(grid: &GridSpec, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parameter(format!("cell size must be positive, got {h}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            grid: grid.clone(),
            h,
            dct_x: Dct::new(&mut planner, grid.nx),
            dct_y: Dct::new(&mut planner, grid.ny),
            multipliers: RwLock::new(HashMap::new()),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cell_size(&self) -> f64 {
        self.h
    }

    pub fn forward(&self, values: &[f64]) -> Spectrum {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(values.len(), nx * ny, "field does not match the grid");
        let mut rows = values.to_vec();
        self.dct_x.forward_rows(&mut rows);
        let mut cols = vec![0.0; nx * ny];
        transpose(&rows, &mut cols, ny, nx);
        self.dct_y.forward_rows(&mut cols);
        Spectrum {
            data: cols.into_iter().map(|v| Complex::new(v, 0.0)).collect(),
        }
    }

    pub fn unit_spectrum(&self) -> Spectrum {
        let mut data = vec![Complex::default(); self.grid.len()];
        data[0] = Complex::new(self.grid.len() as f64, 0.0);
        Spectrum { data }
    }

    fn inverse_real(&self, spectrum: &Spectrum) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut cols: Vec<f64> = spectrum.data.iter().map(|z| z.re).collect();
        self.dct_y.inverse_rows(&mut cols);
        let mut rows = vec![0.0; nx * ny];
        transpose(&cols, &mut rows, nx, ny);
        self.dct_x.inverse_rows(&mut rows);
        rows
    }

    pub fn inverse_real_pair(&self, a: &Spectrum, b: Option<&Spectrum>) -> (Vec<f64>, Option<Vec<f64>>) {
        (self.inverse_real(a), b.map(|b| self.inverse_real(b)))
    }

    /// `exp(-4 pi^2 s |xi|^2)` at the cosine frequencies `xi = k / 2L`.
    pub(crate) fn multiplier(&self, s: f64) -> Result<Arc<Vec<f64>>> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("Gaussian scale must be positive, got {s}")));
        }
        let key = s.to_bits();
        if let Some(m) = self.multipliers.read().expect("multiplier memo poisoned").get(&key) {
            return Ok(Arc::clone(m));
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let c = 4.0 * std::f64::consts::PI.powi(2) * s;
        let factor = |k: usize, n: usize| (-c * (k as f64 / (2.0 * n as f64 * self.h)).powi(2)).exp();
        let fy: Vec<f64> = (0..ny).map(|k| if ny == 1 { 1.0 } else { factor(k, ny) }).collect();
        let mut t = Vec::with_capacity(nx * ny);
        for kx in 0..nx {
            let gx = factor(kx, nx);
            t.extend(fy.iter().map(|gy| gx * gy));
        }
        let m = Arc::new(t);
        self.multipliers
            .write()
            .expect("multiplier memo poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&m));
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn half_plane(n: usize) -> Partition {
        let grid = GridSpec::square(n).unwrap();
        make_partition(&grid, 2, |x, _| usize::from(x >= 0.5)).unwrap()
    }

    fn random_field(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen::<f64>()).collect()
    }

    #[test]
    fn packed_transforms_match_single_ones() {
        let grid = GridSpec::new_2d(24, 16).unwrap();
        let conv = SpectralConvolver::new(&grid);
        let (u, v) = (random_field(grid.len(), 1), random_field(grid.len(), 2));
        let (a, b) = conv.forward_pair(&u, &v);
        for (x, y) in a.data.iter().zip(&conv.forward(&u).data) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-10);
        }
        for (x, y) in b.data.iter().zip(&conv.forward(&v).data) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-10);
        }
        let (u2, v2) = conv.inverse_real_pair(&a, Some(&b));
        for (x, y) in u2.iter().zip(&u).chain(v2.unwrap().iter().zip(&v)) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        let ones = conv.inverse_real_pair(&conv.unit_spectrum(), None).0;
        assert!(ones.iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn dct_matches_cosine_sum() {
        for n in [1usize, 9, 12] {
            let dct = Dct::new(&mut FftPlanner::new(), n);
            let x = random_field(n, n as u64);
            let mut y = x.clone();
            let mut buf = vec![Complex::default(); n];
            let mut scratch = vec![Complex::default(); dct.scratch_len()];
            dct.forward(&mut y, &mut buf, &mut scratch);
            for (k, yk) in y.iter().enumerate() {
                let direct: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(m, xm)| xm * (PI * k as f64 * (2 * m + 1) as f64 / (2 * n) as f64).cos())
                    .sum();
                assert_abs_diff_eq!(*yk, direct, epsilon = 1e-12);
            }
            dct.inverse(&mut y, &mut buf, &mut scratch);
            for (a, b) in y.iter().zip(&x) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn cosine_convolution_equals_reflected_periodic_convolution() {
        let m = 16;
        let half = GridSpec::square(m).unwrap();
        let cosine = CosineConvolver::new(&half, 1.0 / (2 * m) as f64).unwrap();
        let u = random_field(half.len(), 9);
        let big = GridSpec::square(2 * m).unwrap();
        let mut ext = vec![0.0; big.len()];
        for iy in 0..2 * m {
            for ix in 0..2 * m {
                let sx = if ix < m { ix } else { 2 * m - 1 - ix };
                let sy = if iy < m { iy } else { 2 * m - 1 - iy };
                ext[big.index(ix, iy)] = u[half.index(sx, sy)];
            }
        }
        let s = 0.002;
        let periodic = gaussian_convolve(&ScalarField::new(big.clone(), ext).unwrap(), s).unwrap();
        let spectrum = cosine.forward(&u);
        let mult = cosine.multiplier(s).unwrap();
        let data = spectrum.data.iter().zip(mult.iter()).map(|(z, w)| z * w).collect();
        let out = cosine.inverse_real_pair(&Spectrum { data }, None).0;
        for iy in 0..m {
            for ix in 0..m {
                assert_abs_diff_eq!(
                    out[half.index(ix, iy)],
                    periodic.values[big.index(ix, iy)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn cosine_convolution_keeps_mass_in_a_rectangle() {
        let grid = GridSpec::new_2d(12, 20).unwrap();
        let conv = CosineConvolver::new(&grid, 0.05).unwrap();
        let u = random_field(grid.len(), 4);
        let spectrum = conv.forward(&u);
        let mult = conv.multiplier(0.01).unwrap();
        let data = spectrum.data.iter().zip(mult.iter()).map(|(z, w)| z * w).collect();
        let out = conv.inverse_real_pair(&Spectrum { data }, None).0;
        assert_abs_diff_eq!(out.iter().sum::<f64>(), u.iter().sum::<f64>(), epsilon = 1e-10);
        assert!(CosineConvolver::new(&grid, 0.0).is_err());
        assert!(conv.multiplier(-1.0).is_err());
    }

    #[test]
    fn grid_rejects_tiny_sizes() {
        assert!(GridSpec::square(4).is_err());
        assert!(GridSpec::new_1d(7).is_err());
        assert_eq!(GridSpec::new_1d(8).unwrap().dim(), 1);
    }

    #[test]
    fn partition_examples() {
        let grid = GridSpec::square(32).unwrap();
        let p = make_partition(&grid, 3, |_, _| 0).unwrap();
        assert_eq!(volumes(&p), vec![1.0, 0.0, 0.0]);
        assert_eq!(volumes(&half_plane(128)), vec![0.5, 0.5]);
        assert!(matches!(make_partition(&grid, 2, |_, _| 2), Err(Error::Validation(_))));
    }

    #[test]
    fn disk_volume_matches_cell_count() {
        let n = 512;
        let grid = GridSpec::square(n).unwrap();
        let p = make_partition(&grid, 2, |x, y| {
            usize::from((x - 0.5).powi(2) + (y - 0.5).powi(2) >= 0.0625)
        })
        .unwrap();
        let v = volumes(&p)[0];
        assert!((v - PI / 16.0).abs() <= 4.0 / n as f64);
    }

    #[test]
    fn convolution_preserves_constants_and_semigroup() {
        let grid = GridSpec::new_2d(32, 16).unwrap();
        let c = ScalarField::new(grid.clone(), vec![0.7; grid.len()]).unwrap();
        let out = gaussian_convolve(&c, 0.01).unwrap();
        for v in &out.values {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = ScalarField::new(grid.clone(), (0..grid.len()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let twice = gaussian_convolve(&gaussian_convolve(&u, 0.001).unwrap(), 0.002).unwrap();
        let once = gaussian_convolve(&u, 0.003).unwrap();
        for (a, b) in twice.values.iter().zip(&once.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(gaussian_convolve(&u, -1.0).is_err());
    }

    #[test]
    fn half_plane_smoothing_matches_error_function() {
        let n = 256;
        let p = half_plane(n);
        let field = ScalarField::new(p.grid().clone(), p.indicator(1)).unwrap();
        let s = 1e-4;
        let out = gaussian_convolve(&field, s).unwrap();
        let h = 1.0 / n as f64;
        // Column straddling x = 1/2 from the right has centre at 1/2 + h/2.
        let right = out.values[p.grid().index(n / 2, n / 2)];
        let left = out.values[p.grid().index(n / 2 - 1, n / 2)];
        assert_abs_diff_eq!(0.5 * (left + right), 0.5, epsilon = 1e-12);
        let expected = 1.0 - half_plane_profile(0.5 * h, s);
        assert_abs_diff_eq!(right, expected, epsilon = 2e-3);
        assert!(out.values.iter().all(|&v| v > -1e-12 && v < 1.0 + 1e-12));
    }

    #[test]
    fn one_dimensional_convolution() {
        let grid = GridSpec::new_1d(64).unwrap();
        let p = make_partition(&grid, 2, |x, _| usize::from(x > 0.25 && x < 0.75)).unwrap();
        let f = ScalarField::new(grid, p.indicator(1)).unwrap();
        let out = gaussian_convolve(&f, 1e-3).unwrap();
        assert_abs_diff_eq!(out.mean(), f.mean(), epsilon = 1e-14);
        assert_abs_diff_eq!(out.values[0], out.values[63], epsilon = 1e-13);
    }

    #[test]
    fn interface_of_half_plane() {
        let p = half_plane(128);
        let pts = extract_interface(&p, 0, 1).unwrap();
        // x = 1/2 and the periodic seam at x = 0
        assert_eq!(pts.len(), 256);
        assert_eq!(pts.iter().filter(|p| p.0 == 0.5).count(), 128);
        assert_eq!(pts.iter().filter(|p| p.0 == 0.0).count(), 128);
        assert!(extract_interface(&p, 1, 1).is_err());
        let grid = GridSpec::square(16).unwrap();
        let mono = Partition::uniform(grid, 3, 0).unwrap();
        assert!(extract_interface(&mono, 1, 2).unwrap().is_empty());
    }

    #[test]
    fn disk_interface_point_count() {
        let n = 256;
        let grid = GridSpec::square(n).unwrap();
        let r = 0.25;
        let p = make_partition(&grid, 2, |x, y| {
            usize::from((x - 0.5).powi(2) + (y - 0.5).powi(2) >= r * r)
        })
        .unwrap();
        let count = extract_interface(&p, 0, 1).unwrap().len() as f64;
        let ideal = 2.0 * PI * r * n as f64;
        assert!(count >= ideal / 2f64.sqrt() && count <= ideal * 2f64.sqrt());
    }

    #[test]
    fn pgm_layout() {
        let grid = GridSpec::new_2d(8, 9).unwrap();
        let p = make_partition(&grid, 3, |_, y| {
            if y < 0.3 {
                0
            } else if y < 0.6 {
                1
            } else {
                2
            }
        })
        .unwrap();
        let mut bytes = Vec::new();
        write_pgm(&p, &mut bytes).unwrap();
        let text_end = bytes.len() - 72;
        let header = std::str::from_utf8(&bytes[..text_end]).unwrap();
        assert!(header.starts_with("P5\n#"));
        assert!(header.ends_with("8 9\n255\n"));
        let pixels = &bytes[text_end..];
        // first written row is the top of the domain (phase 2)
        assert_eq!(pixels[0], 255);
        assert_eq!(pixels[71], 0);
        assert!(pixels.contains(&128));
    }

    #[test]
    fn erfc_accuracy() {
        assert_abs_diff_eq!(erfc(0.0), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(erfc(1.0), 0.157_299_207_050_285_1, epsilon = 2e-7);
        assert_abs_diff_eq!(erfc(-1.0), 1.842_700_792_949_715, epsilon = 2e-7);
    }
}
