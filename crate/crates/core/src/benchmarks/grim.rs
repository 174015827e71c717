//! Travelling-wave triple-junction ("grim reaper") solutions.
//!
//! Phase 3 lies above two curved graphs that meet at the junction abscissa;
//! phase 1 sits below the left graph and phase 2 below the right one, with a
//! vertical segment between them. The half-domain `x in [0, 1/2]` is
//! reflected about `x = 1/2` to fill the unit square.
//!
//! Runs evolve only the half `[0, 1/2] x [0, 1]` with mirror walls on all
//! four sides. A periodic `y` direction would let phase 3 across the top
//! edge touch phase 1 and 2 at the bottom, which destroys the thin top layer
//! of the asymmetric configuration.

use std::f64::consts::PI;

use crate::dynamics::{RecordOptions, RunReport, Simulator, StepContext};
use crate::error::{Error, Result};
use crate::grid::{make_partition, GridSpec, Partition};
use crate::tension::{MobilityMatrix, TensionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrimVariant {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrimInterface {
    /// Between phase 1 (below) and phase 3 (above).
    Left,
    /// Between phase 2 (below) and phase 3 (above).
    Right,
}

impl GrimInterface {
    /// Zero-based `(below, above)` phases.
    pub fn phases(self) -> (usize, usize) {
        match self {
            GrimInterface::Left => (0, 2),
            GrimInterface::Right => (1, 2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrimReaperSpec {
    pub variant: GrimVariant,
    pub junction_x: f64,
    pub speed: f64,
    pub offset: f64,
}

const DOMAIN_TOL: f64 = 1e-12;

impl GrimReaperSpec {
    pub fn symmetric() -> Self {
        Self {
            variant: GrimVariant::Symmetric,
            junction_x: 0.25,
            speed: PI,
            offset: 7.0 / 8.0,
        }
    }

    pub fn asymmetric() -> Self {
        let s3 = 3f64.sqrt();
        Self {
            variant: GrimVariant::Asymmetric,
            junction_x: 0.375,
            speed: 2.0 * 2f64.sqrt() * PI / (3.0 * (1.0 + s3)),
            offset: 7.0 / 8.0,
        }
    }

    /// Tensions and mobilities for which the profiles are exact.
    /// Asymmetric tensions with `mu_12 = 1/2`. Then `1/mu` violates the
    /// triangle inequality and wide kernels nucleate phase 1 along `Gamma_23`.
    pub fn wetting_matrices() -> (TensionMatrix, MobilityMatrix) {
        let (sigma, mu) = Self::asymmetric().tensions_mobilities();
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i + j == 1 { 0.5 } else { mu.get(i, j) }).collect())
            .collect();
        (sigma, MobilityMatrix::from_rows(&rows).expect("valid mobilities"))
    }

    pub fn tensions_mobilities(&self) -> (TensionMatrix, MobilityMatrix) {
        match self.variant {
            GrimVariant::Symmetric => {
                let r2 = 2f64.sqrt();
                let sigma = TensionMatrix::from_rows(&[vec![0.0, r2, 1.0], vec![r2, 0.0, 1.0], vec![1.0, 1.0, 0.0]])
                    .expect("valid tensions");
                (sigma, MobilityMatrix::equal(3, 1.0).expect("valid mobilities"))
            }
            GrimVariant::Asymmetric => {
                let d = 1.0 + 3f64.sqrt();
                let s13 = 2f64.sqrt() / d;
                let s23 = 2.0 / d;
                let sigma = TensionMatrix::from_rows(&[vec![0.0, 1.0, s13], vec![1.0, 0.0, s23], vec![s13, s23, 0.0]])
                    .expect("valid tensions");
                let m = 1.0 / (4.0 * 2f64.sqrt());
                let mu = MobilityMatrix::from_rows(&[vec![0.0, m, 1.0], vec![m, 0.0, m], vec![1.0, m, 0.0]])
                    .expect("valid mobilities");
                (sigma, mu)
            }
        }
    }

    /// Abscissa range of an interface on the half-domain.
    pub fn x_range(&self, interface: GrimInterface) -> (f64, f64) {
        match interface {
            GrimInterface::Left => (0.0, self.junction_x),
            GrimInterface::Right => (self.junction_x, 0.5),
        }
    }
}

/// Exact height of `interface` at abscissa `x` and time `t`.
pub fn grim_reaper_profile(spec: &GrimReaperSpec, interface: GrimInterface, x: f64, t: f64) -> Result<f64> {
    let (lo, hi) = spec.x_range(interface);
    if !(x >= lo - DOMAIN_TOL && x <= hi + DOMAIN_TOL) {
        return Err(Error::Domain(format!(
            "x = {x} outside [{lo}, {hi}] for the {interface:?} interface"
        )));
    }
    let shape = match (spec.variant, interface) {
        (GrimVariant::Symmetric, GrimInterface::Left) => (PI * x).cos().ln() / PI,
        (GrimVariant::Symmetric, GrimInterface::Right) => (PI * (0.5 - x)).cos().ln() / PI,
        (GrimVariant::Asymmetric, GrimInterface::Left) => 3.0 / (2.0 * PI) * (2.0 * PI * x / 3.0).cos().ln(),
        (GrimVariant::Asymmetric, GrimInterface::Right) => {
            3.0 / (8.0 * PI) * (0.5 * (4.0 * PI * (1.0 - 2.0 * x) / 3.0).cos()).ln()
        }
    };
    Ok(spec.offset + shape - spec.speed * t)
}

fn fold(x: f64) -> f64 {
    if x <= 0.5 {
        x
    } else {
        1.0 - x
    }
}

/// Exact three-phase configuration at time `t`, sampled at cell centers.
pub fn grim_reaper_partition(spec: &GrimReaperSpec, grid: &GridSpec, t: f64) -> Result<Partition> {
    if grid.dim() != 2 || grid.nx() != grid.ny() {
        return Err(Error::Configuration("grim-reaper runs need a square 2D grid".into()));
    }
    for interface in [GrimInterface::Left, GrimInterface::Right] {
        let (lo, hi) = spec.x_range(interface);
        for k in 0..=64 {
            let x = lo + (hi - lo) * k as f64 / 64.0;
            let y = grim_reaper_profile(spec, interface, x, t)?;
            if !(y > 0.0 && y < 1.0) {
                return Err(Error::Configuration(format!(
                    "{interface:?} interface leaves the domain at x = {x}, t = {t} (y = {y})"
                )));
            }
        }
    }
    make_partition(grid, 3, |x, y| {
        let xh = fold(x);
        let interface = if xh <= spec.junction_x {
            GrimInterface::Left
        } else {
            GrimInterface::Right
        };
        let height = grim_reaper_profile(spec, interface, xh, t).expect("folded x is in range");
        if y > height {
            2
        } else {
            interface.phases().0
        }
    })
}

pub fn grim_reaper_initial_partition(spec: &GrimReaperSpec, grid: &GridSpec) -> Result<Partition> {
    grim_reaper_partition(spec, grid, 0.0)
}

/// Column containing the junction abscissa.
fn junction_column(spec: &GrimReaperSpec, grid: &GridSpec) -> usize {
    (spec.junction_x / grid.hx()).floor() as usize
}

/// Heights of the upward `below -> above` label transitions in column `ix`.
fn transition_heights(partition: &Partition, ix: usize, below: usize, above: usize) -> Vec<f64> {
    let grid = partition.grid();
    let ny = grid.ny();
    (0..ny - 1)
        .filter(|&iy| partition.label_at(ix, iy) == below && partition.label_at(ix, iy + 1) == above)
        .map(|iy| (iy + 1) as f64 * grid.hy())
        .collect()
}

/// Largest deviation between the computed and exact graph of `interface`
/// over the half-domain columns, skipping the junction column and its two
/// neighbours. A column with several transitions reports the topmost.
pub fn linf_graph_error(partition: &Partition, spec: &GrimReaperSpec, interface: GrimInterface, t: f64) -> Result<f64> {
    let grid = partition.grid();
    if partition.n_phases() != 3 || grid.dim() != 2 {
        return Err(Error::Shape("graph error needs a three-phase 2D partition".into()));
    }
    let (lo, hi) = spec.x_range(interface);
    let jc = junction_column(spec, grid);
    let (below, above) = interface.phases();
    let mut worst: f64 = 0.0;
    for ix in 0..grid.nx() {
        let x = (ix as f64 + 0.5) * grid.hx();
        if x < lo || x > hi || ix + 1 >= jc && ix <= jc + 1 {
            continue;
        }
        let computed = transition_heights(partition, ix, below, above)
            .into_iter()
            .fold(f64::NAN, f64::max);
        if computed.is_nan() {
            return Err(Error::Measurement(format!(
                "no {interface:?} interface in column {ix} (x = {x})"
            )));
        }
        let exact = grim_reaper_profile(spec, interface, x, t)?;
        worst = worst.max((computed - exact).abs());
    }
    Ok(worst)
}

/// Left half `x < 1/2` of an `n x n` partition.
pub fn fold_half(partition: &Partition) -> Result<Partition> {
    let grid = partition.grid();
    let n = grid.nx();
    if grid.dim() != 2 || grid.ny() != n || n % 2 != 0 {
        return Err(Error::Shape(format!(
            "folding needs an even square grid, got {}x{}",
            n,
            grid.ny()
        )));
    }
    let half = GridSpec::new_2d(n / 2, n)?;
    let mut labels = Vec::with_capacity(half.len());
    for iy in 0..n {
        labels.extend_from_slice(&partition.labels()[iy * n..iy * n + n / 2]);
    }
    Partition::from_labels(half, partition.n_phases(), labels)
}

/// Inverse of [`fold_half`]: mirrors the half about `x = 1/2`.
pub fn unfold_half(half: &Partition) -> Result<Partition> {
    let g = half.grid();
    let (m, n) = (g.nx(), g.ny());
    if g.dim() != 2 || 2 * m != n {
        return Err(Error::Shape(format!("expected an n/2 x n half, got {m}x{n}")));
    }
    let mut labels = Vec::with_capacity(n * n);
    for iy in 0..n {
        let row = &half.labels()[iy * m..(iy + 1) * m];
        labels.extend_from_slice(row);
        labels.extend(row.iter().rev());
    }
    Partition::from_labels(GridSpec::square(n)?, half.n_phases(), labels)
}

/// Evolves the grim-reaper configuration on an `n x n` grid for `steps`
/// steps of `ctx.dt`. `observer` sees the full partition after unfolding.
pub fn run_grim_reaper<F>(
    spec: &GrimReaperSpec,
    ctx: &StepContext,
    n: usize,
    steps: usize,
    record: RecordOptions,
    mut observer: F,
) -> Result<(Partition, RunReport)>
where
    F: FnMut(usize, &Partition) -> Result<()>,
{
    let grid = GridSpec::square(n)?;
    let half = fold_half(&grim_reaper_initial_partition(spec, &grid)?)?;
    let sim = Simulator::reflecting(ctx.clone(), half.grid(), grid.hx())?;
    let report = sim.run(&half, steps, record, |k, p| observer(k, &unfold_half(p)?))?;
    Ok((unfold_half(&report.final_partition)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::volumes;
    use approx::assert_abs_diff_eq;

    #[test]
    fn profile_examples() {
        let s = GrimReaperSpec::symmetric();
        assert_eq!(grim_reaper_profile(&s, GrimInterface::Left, 0.0, 0.0).unwrap(), 0.875);
        let l = grim_reaper_profile(&s, GrimInterface::Left, 0.25, 0.0).unwrap();
        let r = grim_reaper_profile(&s, GrimInterface::Right, 0.25, 0.0).unwrap();
        assert_abs_diff_eq!(l, r, epsilon = 1e-15);

        let a = GrimReaperSpec::asymmetric();
        for t in [0.0, 0.05, 0.096] {
            let l = grim_reaper_profile(&a, GrimInterface::Left, 0.375, t).unwrap();
            let r = grim_reaper_profile(&a, GrimInterface::Right, 0.375, t).unwrap();
            assert_abs_diff_eq!(l, r, epsilon = 1e-14);
            assert_abs_diff_eq!(l, 0.875 - 0.16548 - a.speed * t, epsilon = 1e-5);
        }
        assert!(matches!(
            grim_reaper_profile(&a, GrimInterface::Right, 0.3, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn profiles_are_travelling_waves() {
        for spec in [GrimReaperSpec::symmetric(), GrimReaperSpec::asymmetric()] {
            for interface in [GrimInterface::Left, GrimInterface::Right] {
                let (lo, hi) = spec.x_range(interface);
                for k in 0..=10 {
                    let x = lo + (hi - lo) * k as f64 / 10.0;
                    let d = grim_reaper_profile(&spec, interface, x, 0.07).unwrap()
                        - grim_reaper_profile(&spec, interface, x, 0.0).unwrap();
                    assert_abs_diff_eq!(d, -spec.speed * 0.07, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn profiles_satisfy_curvature_flow() {
        let step = 1e-4;
        for spec in [GrimReaperSpec::symmetric(), GrimReaperSpec::asymmetric()] {
            let (sigma, mu) = spec.tensions_mobilities();
            for interface in [GrimInterface::Left, GrimInterface::Right] {
                let (below, above) = interface.phases();
                let sm = sigma.get(below, above) * mu.get(below, above);
                let (lo, hi) = spec.x_range(interface);
                for k in 1..=20 {
                    let x = lo + (hi - lo) * k as f64 / 21.0;
                    let f = |x: f64| grim_reaper_profile(&spec, interface, x, 0.0).unwrap();
                    let d1 = (f(x + step) - f(x - step)) / (2.0 * step);
                    let d2 = (f(x + step) - 2.0 * f(x) + f(x - step)) / (step * step);
                    let normal_speed = spec.speed / (1.0 + d1 * d1).sqrt();
                    let kappa = -d2 / (1.0 + d1 * d1).powf(1.5);
                    assert_abs_diff_eq!(normal_speed, sm * kappa, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn initial_volumes_match_profile_areas() {
        for spec in [GrimReaperSpec::symmetric(), GrimReaperSpec::asymmetric()] {
            let n = 256;
            let grid = GridSpec::square(n).unwrap();
            let p = grim_reaper_initial_partition(&spec, &grid).unwrap();
            let v = volumes(&p);
            let area = |interface| {
                let (lo, hi) = spec.x_range(interface);
                let m = 2000;
                let w = (hi - lo) / m as f64;
                2.0 * (0..m)
                    .map(|k| grim_reaper_profile(&spec, interface, lo + (k as f64 + 0.5) * w, 0.0).unwrap() * w)
                    .sum::<f64>()
            };
            let h = 1.0 / n as f64;
            assert!((v[0] - area(GrimInterface::Left)).abs() < 2.0 * h);
            assert!((v[1] - area(GrimInterface::Right)).abs() < 2.0 * h);
            assert!(v.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn vertical_segment_sits_at_the_junction() {
        let spec = GrimReaperSpec::asymmetric();
        let grid = GridSpec::square(128).unwrap();
        let p = grim_reaper_initial_partition(&spec, &grid).unwrap();
        assert_eq!(p.label_at(47, 10), 0);
        assert_eq!(p.label_at(48, 10), 1);
        assert_eq!(p.label_at(127 - 47, 10), 0);
        assert_eq!(p.label_at(127 - 48, 10), 1);
    }

    #[test]
    fn exact_partition_has_subcell_graph_error() {
        let grid = GridSpec::square(128).unwrap();
        for spec in [GrimReaperSpec::symmetric(), GrimReaperSpec::asymmetric()] {
            let p = grim_reaper_partition(&spec, &grid, 0.05).unwrap();
            for interface in [GrimInterface::Left, GrimInterface::Right] {
                let e = linf_graph_error(&p, &spec, interface, 0.05).unwrap();
                assert!(e <= grid.hy(), "{e}");
            }
        }
    }

    #[test]
    fn missing_interface_is_reported() {
        let grid = GridSpec::square(32).unwrap();
        let p = Partition::uniform(grid, 3, 2).unwrap();
        let r = linf_graph_error(&p, &GrimReaperSpec::symmetric(), GrimInterface::Left, 0.0);
        assert!(matches!(r, Err(Error::Measurement(_))));
    }

    #[test]
    fn leaving_the_domain_is_a_configuration_error() {
        let grid = GridSpec::square(32).unwrap();
        let r = grim_reaper_partition(&GrimReaperSpec::symmetric(), &grid, 0.5);
        assert!(matches!(r, Err(Error::Configuration(_))));
    }

    #[test]
    fn fold_and_unfold_are_inverse_on_mirror_symmetric_partitions() {
        let grid = GridSpec::square(64).unwrap();
        for spec in [GrimReaperSpec::symmetric(), GrimReaperSpec::asymmetric()] {
            let p = grim_reaper_initial_partition(&spec, &grid).unwrap();
            let half = fold_half(&p).unwrap();
            assert_eq!((half.grid().nx(), half.grid().ny()), (32, 64));
            assert_eq!(unfold_half(&half).unwrap(), p);
        }
        let odd = make_partition(&GridSpec::square(63).unwrap(), 3, |_, _| 0).unwrap();
        assert!(matches!(fold_half(&odd), Err(Error::Shape(_))));
        assert!(matches!(unfold_half(&odd), Err(Error::Shape(_))));
    }

    #[test]
    fn short_run_tracks_the_travelling_wave() {
        use crate::kernel::{kernel_coefficients, select_alpha_beta, AlphaBetaPolicy};
        let spec = GrimReaperSpec::symmetric();
        let (sigma, mu) = spec.tensions_mobilities();
        let sel = select_alpha_beta(&sigma, &mu, &AlphaBetaPolicy::default()).unwrap();
        let k = kernel_coefficients(&sigma, &mu, sel.alpha, sel.beta).unwrap();
        let ctx = StepContext::es(sigma, mu, k, 0.002).unwrap();
        let mut seen = 0;
        let (p, report) = run_grim_reaper(&spec, &ctx, 128, 10, RecordOptions::default(), |_, q| {
            assert_eq!(q.grid().nx(), 128);
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 11);
        assert_eq!(report.energies.len(), 11);
        let err = linf_graph_error(&p, &spec, GrimInterface::Left, 0.02).unwrap();
        assert!(err < 3.0 / 128.0, "error {err}");
    }

    #[test]
    fn wetting_matrices_break_the_reciprocal_triangle_inequality() {
        let (sigma, mu) = GrimReaperSpec::wetting_matrices();
        let (s0, m0) = GrimReaperSpec::asymmetric().tensions_mobilities();
        assert_eq!(sigma, s0);
        assert_eq!(mu.get(0, 1), 0.5);
        assert_eq!(mu.get(1, 2), m0.get(1, 2));
        let inv = |i, j| 1.0 / mu.get(i, j);
        assert!(inv(1, 2) > inv(0, 1) + inv(0, 2));
    }
}
