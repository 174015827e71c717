//! Surface-tension and mobility matrices, junction angles, and the
//! Read–Shockley grain-boundary energy models.
//!
//! Matrices are indexed by zero-based phase index. A surface-tension matrix
//! must be symmetric with zero diagonal and strictly positive off-diagonal
//! entries; the stronger triangle-inequality class is reported separately by
//! [`classify_tension_matrix`].

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance used when checking symmetry and the zero diagonal of user input.
const ENTRY_TOL: f64 = 1e-12;

fn check_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() < 2 {
        return Err(Error::Shape(format!("need at least 2 phases, got {}", m.nrows())));
    }
    Ok(m.nrows())
}

fn check_symmetric_positive(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    let n = check_square(m)?;
    let scale = 1.0 + m.amax();
    for i in 0..n {
        if m[(i, i)].abs() > ENTRY_TOL * scale {
            return Err(Error::Validation(format!(
                "{what}: diagonal entry ({i},{i}) = {} is not zero",
                m[(i, i)]
            )));
        }
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Validation(format!("{what}: entry ({i},{j}) is not finite")));
            }
            if (a - b).abs() > ENTRY_TOL * scale {
                return Err(Error::Validation(format!(
                    "{what}: not symmetric at ({i},{j}): {a} vs {b}"
                )));
            }
            if a <= 0.0 {
                return Err(Error::Validation(format!(
                    "{what}: entry ({i},{j}) = {a} must be strictly positive"
                )));
            }
        }
    }
    Ok(n)
}

/// Copies the strict upper triangle onto the lower one and zeroes the diagonal.
fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Less => m[(i, j)],
        std::cmp::Ordering::Greater => m[(j, i)],
    })
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(Error::Shape(format!("row {r} has {} entries, expected {n}", row.len())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Symmetric matrix of surface tensions `sigma[(i, j)]`, a member of S_N.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionMatrix {
    entries: DMatrix<f64>,
}

impl TensionMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_symmetric_positive(&entries, "surface tension")?;
        Ok(Self {
            entries: symmetrized(&entries),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    /// All interfaces share the same tension.
    pub fn equal(n_phases: usize, value: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(
            n_phases,
            n_phases,
            |i, j| {
                if i == j {
                    0.0
                } else {
                    value
                }
            },
        ))
    }

    pub fn n_phases(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Simultaneous row/column permutation: entry `(p[i], p[j])` of the
    /// result is entry `(i, j)` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            entries: permute_matrix(&self.entries, perm),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }
}

/// Symmetric matrix of interface mobilities `mu[(i, j)] > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix {
    entries: DMatrix<f64>,
}

impl MobilityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_symmetric_positive(&entries, "mobility")?;
        Ok(Self {
            entries: symmetrized(&entries),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn equal(n_phases: usize, value: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(
            n_phases,
            n_phases,
            |i, j| {
                if i == j {
                    0.0
                } else {
                    value
                }
            },
        ))
    }

    pub fn n_phases(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entrywise reciprocal off the diagonal, zero on it.
    pub fn reciprocal(&self) -> DMatrix<f64> {
        let n = self.n_phases();
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / self.entries[(i, j)] })
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            entries: permute_matrix(&self.entries, perm),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }
}

pub(crate) fn permute_matrix(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(perm.len(), n, "permutation length must match matrix size");
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

/// Class membership flags of a candidate tension matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensionClass {
    pub in_s_n: bool,
    pub in_t_n: bool,
    pub strict_triangle: bool,
}

/// Smallest value of `m[i][k] + m[k][j] - m[i][j]` over distinct triples.
/// Positive exactly when the strict triangle inequality holds. Returns
/// `+inf` for two phases, where no distinct triple exists.
pub fn triangle_margin(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut margin = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                margin = margin.min(m[(i, k)] + m[(k, j)] - m[(i, j)]);
            }
        }
    }
    margin
}

pub fn classify_tension_matrix(m: &DMatrix<f64>, tol: f64) -> Result<TensionClass> {
    check_square(m)?;
    let in_s_n = check_symmetric_positive(m, "candidate").is_ok();
    let margin = triangle_margin(m);
    Ok(TensionClass {
        in_s_n,
        in_t_n: in_s_n && margin >= -tol,
        strict_triangle: in_s_n && margin > tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    ConditionallyNegativeDefinite,
    ConditionallyNegativeSemidefinite,
    Indefinite,
}

impl Definiteness {
    pub fn is_semidefinite(self) -> bool {
        !matches!(self, Definiteness::Indefinite)
    }
}

impl std::fmt::Display for Definiteness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Definiteness::ConditionallyNegativeDefinite => "conditionally-negative-definite",
            Definiteness::ConditionallyNegativeSemidefinite => "conditionally-negative-semidefinite",
            Definiteness::Indefinite => "indefinite",
        })
    }
}

/// Spectrum of `J M J` with `J = I - ee^T/N`, the projection onto the
/// hyperplane orthogonal to `e = (1, ..., 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessReport {
    /// All N eigenvalues, ascending.
    pub projected_eigenvalues: Vec<f64>,
    /// Position in `projected_eigenvalues` of the eigenvalue belonging to `e`.
    pub e_index: usize,
    pub classification: Definiteness,
    pub tolerance: f64,
}

impl DefinitenessReport {
    /// The N-1 eigenvalues on `e`'s orthogonal complement, ascending.
    pub fn nonzero_eigenvalues(&self) -> Vec<f64> {
        self.projected_eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.e_index)
            .map(|(_, &v)| v)
            .collect()
    }

    pub fn min_nonzero(&self) -> f64 {
        self.nonzero_eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_nonzero(&self) -> f64 {
        self.nonzero_eigenvalues().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `1e-10 * (1 + max |entry|)`.
pub fn default_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-10 * (1.0 + m.amax())
}

pub fn projector(n: usize) -> DMatrix<f64> {
    let inv_n = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv_n } else { -inv_n })
}

pub fn conditional_definiteness(m: &DMatrix<f64>, tol: f64) -> Result<DefinitenessReport> {
    let n = check_square(m)?;
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::Validation(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    let j = projector(n);
    let projected = &j * m * &j;
    // Exact symmetrization; JMJ is symmetric up to rounding.
    let projected = (&projected + projected.transpose()) * 0.5;
    let eig = projected.symmetric_eigen();

    let e = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e_raw = (0..n)
        .max_by(|&a, &b| {
            let da = eig.eigenvectors.column(a).dot(&e).abs();
            let db = eig.eigenvectors.column(b).dot(&e).abs();
            da.total_cmp(&db)
        })
        .expect("n >= 2");
    let projected_eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let e_index = order.iter().position(|&k| k == e_raw).expect("present");

    let largest = projected_eigenvalues
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != e_index)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let classification = if largest < -tol {
        Definiteness::ConditionallyNegativeDefinite
    } else if largest <= tol {
        Definiteness::ConditionallyNegativeSemidefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(DefinitenessReport {
        projected_eigenvalues,
        e_index,
        classification,
        tolerance: tol,
    })
}

/// Opening angles (radians) of phases `i`, `j`, `k` at a triple junction in
/// equilibrium under Young's law.
///
/// The angle of phase `i` is `pi` minus the interior angle opposite side
/// `sigma[j][k]` of the triangle with sides `(sigma_jk, sigma_ik, sigma_ij)`.
pub fn junction_angles(sigma: &TensionMatrix, triple: (usize, usize, usize)) -> Result<[f64; 3]> {
    let (i, j, k) = triple;
    let n = sigma.n_phases();
    if i >= n || j >= n || k >= n || i == j || j == k || i == k {
        return Err(Error::Parameter(format!(
            "invalid phase triple ({i},{j},{k}) for {n} phases"
        )));
    }
    angles_from_sides(sigma.get(j, k), sigma.get(i, k), sigma.get(i, j))
}

/// Opening angles for a triangle of tensions; `opposite[m]` is the tension of
/// the interface not touching phase `m`.
pub fn angles_from_sides(s_jk: f64, s_ik: f64, s_ij: f64) -> Result<[f64; 3]> {
    let sides = [s_jk, s_ik, s_ij];
    let perimeter: f64 = sides.iter().sum();
    for m in 0..3 {
        let others = perimeter - sides[m];
        if others - sides[m] <= 1e-14 * perimeter {
            return Err(Error::AngleDegeneracy(format!(
                "tensions ({s_jk}, {s_ik}, {s_ij}) violate the strict triangle inequality"
            )));
        }
    }
    let interior = |a: f64, b: f64, c: f64| ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0).acos();
    Ok([
        PI - interior(s_jk, s_ik, s_ij),
        PI - interior(s_ik, s_jk, s_ij),
        PI - interior(s_ij, s_jk, s_ik),
    ])
}

/// Read–Shockley profile saturating at the Brandon angle `theta_star`.
pub fn brandon_f(theta: f64, theta_star: f64) -> Result<f64> {
    if !(theta_star > 0.0) {
        return Err(Error::Parameter(format!(
            "Brandon angle must be positive, got {theta_star}"
        )));
    }
    if !(theta >= 0.0) {
        return Err(Error::Parameter(format!(
            "misorientation must be non-negative, got {theta}"
        )));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    if theta >= theta_star {
        return Ok(1.0);
    }
    let r = theta / theta_star;
    Ok(r * (1.0 - r.ln()))
}

/// Orientation of a square lattice in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation2D {
    theta: f64,
}

impl Orientation2D {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.abs() <= FRAC_PI_4 * (1.0 + 1e-12)) {
            return Err(Error::Validation(format!(
                "2D orientation {theta} outside [-pi/4, pi/4]"
            )));
        }
        Ok(Self { theta })
    }

    /// Reduces any angle into `[-pi/4, pi/4)` modulo the square symmetry.
    pub fn wrapped(theta: f64) -> Self {
        let t = (theta + FRAC_PI_4).rem_euclid(FRAC_PI_2) - FRAC_PI_4;
        Self { theta: t }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Surface tensions for planar square-lattice grains, given a misorientation
/// profile `f` (assumed continuous, zero at zero, non-decreasing and concave).
pub fn read_shockley_2d<F>(orientations: &[Orientation2D], f: F) -> Result<TensionMatrix>
where
    F: Fn(f64) -> f64,
{
    let n = orientations.len();
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 grains, got {n}")));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = orientations[i].theta - orientations[j].theta;
            let s = [-1.0, 0.0, 1.0]
                .iter()
                .map(|k| f((d + k * FRAC_PI_2).abs()))
                .fold(f64::INFINITY, f64::min);
            if !(s > 0.0) {
                return Err(Error::Validation(format!(
                    "grains {i} and {j} have equivalent orientations (zero surface tension)"
                )));
            }
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    TensionMatrix::new(m)
}

/// Lattice orientation of a cubic grain, a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation3D {
    g: Matrix3<f64>,
}

impl Orientation3D {
    pub fn new(g: Matrix3<f64>) -> Result<Self> {
        let defect = (g * g.transpose() - Matrix3::identity()).amax();
        if !(defect <= 1e-12) {
            return Err(Error::Validation(format!(
                "orientation is not orthogonal (|gg^T - I| = {defect:e})"
            )));
        }
        let det = g.determinant();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "orientation has determinant {det}, expected 1"
            )));
        }
        Ok(Self { g })
    }

    pub fn identity() -> Self {
        Self { g: Matrix3::identity() }
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Parameter("rotation axis must be nonzero".into()));
        }
        let [x, y, z] = axis.map(|c| c / norm);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let g = Matrix3::new(
            t * x * x + c,
            t * x * y - s * z,
            t * x * z + s * y,
            t * x * y + s * z,
            t * y * y + c,
            t * y * z - s * x,
            t * x * z - s * y,
            t * y * z + s * x,
            t * z * z + c,
        );
        Self::new(g)
    }

    /// Uniformly distributed rotation (Haar measure) from a unit quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let (w, x, y, z) = (
            a * (2.0 * PI * u2).sin(),
            a * (2.0 * PI * u2).cos(),
            b * (2.0 * PI * u3).sin(),
            b * (2.0 * PI * u3).cos(),
        );
        let g = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        );
        // Re-orthonormalize so the 1e-12 membership test holds after rounding.
        let svd = g.svd(true, true);
        let g = svd.u.expect("u") * svd.v_t.expect("v_t");
        Self { g }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.g
    }
}

/// Rotation angle in `[0, pi]` of a rotation matrix.
///
/// Uses `atan2(|axial|, trace - 1)`, which stays accurate near 0 and pi where
/// an arccos of the trace loses half the digits.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let ax = r[(2, 1)] - r[(1, 2)];
    let ay = r[(0, 2)] - r[(2, 0)];
    let az = r[(1, 0)] - r[(0, 1)];
    let sin2 = (ax * ax + ay * ay + az * az).sqrt();
    let cos2 = r.trace() - 1.0;
    sin2.atan2(cos2)
}

fn generate_octahedral_group() -> Vec<Matrix3<f64>> {
    let rz = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let key = |m: &Matrix3<f64>| -> [i8; 9] {
        let mut k = [0i8; 9];
        for r in 0..3 {
            for c in 0..3 {
                k[3 * r + c] = m[(r, c)].round() as i8;
            }
        }
        k
    };
    let mut elements = vec![Matrix3::identity()];
    let mut keys = vec![key(&Matrix3::identity())];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier];
        for gen in [&rz, &rx] {
            let next = gen * current;
            let k = key(&next);
            if !keys.contains(&k) {
                keys.push(k);
                elements.push(next);
            }
        }
        frontier += 1;
    }
    let mut paired: Vec<([i8; 9], Matrix3<f64>)> = keys.into_iter().zip(elements).collect();
    paired.sort_by(|a, b| a.0.cmp(&b.0));
    paired.into_iter().map(|(_, m)| m).collect()
}

/// The 24 rotational symmetries of the cube, in lexicographic order of their
/// row-major entries.
pub fn octahedral_group() -> &'static [Matrix3<f64>] {
    static GROUP: OnceLock<Vec<Matrix3<f64>>> = OnceLock::new();
    GROUP.get_or_init(generate_octahedral_group)
}

/// Minimal rotation angle relating two cubic lattices.
pub fn misorientation_angle(g_i: &Orientation3D, g_j: &Orientation3D) -> f64 {
    let rel = g_i.g * g_j.g.transpose();
    octahedral_group()
        .iter()
        .map(|r| rotation_angle(&(r * rel)))
        .fold(f64::INFINITY, f64::min)
}

/// Misorientations at or below this are treated as identical orientations.
const DUPLICATE_ANGLE: f64 = 1e-12;

pub fn read_shockley_3d(orientations: &[Orientation3D], theta_star: f64) -> Result<TensionMatrix> {
    let n = orientations.len();
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 grains, got {n}")));
    }
    brandon_f(0.0, theta_star)?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let theta = misorientation_angle(&orientations[i], &orientations[j]);
            if theta <= DUPLICATE_ANGLE {
                return Err(Error::Validation(format!(
                    "grains {i} and {j} have symmetry-equivalent orientations (zero surface tension)"
                )));
            }
            let s = brandon_f(theta, theta_star)?;
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    TensionMatrix::new(m)
}
