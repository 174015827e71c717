use std::f64::consts::PI;

use crate::benchmarks::grim::{GrimReaperSpec, GrimVariant};
use crate::error::{Error, Result};
use crate::grid::{extract_interface, Partition};

pub type Point = (f64, f64);

/// Minimum-image displacement on the unit torus.
fn periodic_delta(a: f64, b: f64) -> f64 {
    let d = b - a;
    d - d.round()
}

fn periodic_dist(p: Point, q: Point) -> f64 {
    periodic_delta(p.0, q.0).hypot(periodic_delta(p.1, q.1))
}

fn directed_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .map(|&p| b.iter().map(|&q| periodic_dist(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Hausdorff distance under the periodic metric of the unit torus.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("Hausdorff distance of an empty point set".into()));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Largest per-phase area of the symmetric difference.
pub fn partition_l1_error(partition: &Partition, reference: &Partition) -> Result<f64> {
    if partition.grid() != reference.grid() || partition.n_phases() != reference.n_phases() {
        return Err(Error::Shape("partitions differ in grid or phase count".into()));
    }
    let mut diff = vec![0usize; partition.n_phases()];
    for (&a, &b) in partition.labels().iter().zip(reference.labels()) {
        if a != b {
            diff[a as usize] += 1;
            diff[b as usize] += 1;
        }
    }
    let cell = partition.grid().cell_measure();
    Ok(diff.into_iter().max().unwrap_or(0) as f64 * cell)
}

/// Area of phase 1 to the right of the vertical interface, beyond a 3-cell
/// margin from the junction abscissa, in both mirror halves.
pub fn wetting_layer_area(partition: &Partition, spec: &GrimReaperSpec) -> Result<f64> {
    if spec.variant != GrimVariant::Asymmetric {
        return Err(Error::Parameter(
            "wetting layers are measured on the asymmetric configuration".into(),
        ));
    }
    let grid = partition.grid();
    let cut = spec.junction_x + 3.0 * grid.hx();
    let mut count = 0usize;
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let x = (ix as f64 + 0.5) * grid.hx();
            let xh = if x <= 0.5 { x } else { 1.0 - x };
            if xh > cut && partition.label_at(ix, iy) == 0 {
                count += 1;
            }
        }
    }
    Ok(count as f64 * grid.cell_measure())
}

/// Grid vertices where at least three phases meet among the four adjacent
/// cells, returned with the phases present.
pub fn find_junctions(partition: &Partition) -> Vec<(Point, Vec<usize>)> {
    let grid = partition.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let mut phases = vec![
                partition.label_at(ix, iy),
                partition.label_at((ix + 1) % nx, iy),
                partition.label_at(ix, (iy + 1) % ny),
                partition.label_at((ix + 1) % nx, (iy + 1) % ny),
            ];
            phases.sort_unstable();
            phases.dedup();
            if phases.len() >= 3 {
                let p = (((ix + 1) % nx) as f64 * grid.hx(), ((iy + 1) % ny) as f64 * grid.hy());
                out.push((p, phases));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionAngles {
    /// The three phases meeting at the junction, ascending.
    pub phases: [usize; 3],
    /// Opening angle of each phase in degrees, in the order of `phases`.
    pub degrees: [f64; 3],
}

impl JunctionAngles {
    pub fn of_phase(&self, phase: usize) -> Option<f64> {
        self.phases.iter().position(|&p| p == phase).map(|k| self.degrees[k])
    }
}

/// Direction of the interface branch between two phases: principal axis of
/// its points in the annulus, oriented away from the junction. Unlike a ray
/// forced through the junction, this is insensitive to the half-cell offset
/// of a staircase and to a junction estimate that is off by a cell.
fn branch_direction(points: &[Point], junction: Point, r_in: f64, r_out: f64) -> Option<(f64, usize)> {
    let d: Vec<Point> = points
        .iter()
        .filter_map(|&p| {
            let dx = periodic_delta(junction.0, p.0);
            let dy = periodic_delta(junction.1, p.1);
            let r = dx.hypot(dy);
            (r >= r_in && r <= r_out).then_some((dx, dy))
        })
        .collect();
    if d.len() < 3 {
        return None;
    }
    let n = d.len() as f64;
    let mx = d.iter().map(|p| p.0).sum::<f64>() / n;
    let my = d.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &d {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let axis = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (ux, uy) = (axis.cos(), axis.sin());
    let dir = if ux * mx + uy * my >= 0.0 { axis } else { axis + PI };
    Some((dir, d.len()))
}

/// Opening angles at a triple junction measured from the interface points
/// in the annulus `r_in <= r <= r_out` around `junction`.
pub fn measure_junction_angles(partition: &Partition, junction: Point, radii: (f64, f64)) -> Result<JunctionAngles> {
    let (r_in, r_out) = radii;
    let h = partition.grid().hx().max(partition.grid().hy());
    if !(r_in >= 5.0 * h - 1e-12 && r_out <= 20.0 * h + 1e-12 && r_in < r_out) {
        return Err(Error::Parameter(format!(
            "annulus [{r_in}, {r_out}] must lie within [5h, 20h] with h = {h}"
        )));
    }
    let n = partition.n_phases();
    let mut branches = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let pts = extract_interface(partition, i, j)?;
            if let Some((dir, count)) = branch_direction(&pts, junction, r_in, r_out) {
                branches.push(((i, j), dir, count));
            }
        }
    }
    branches.sort_by(|a, b| b.2.cmp(&a.2));
    branches.truncate(3);
    if branches.len() < 3 {
        return Err(Error::Topology(format!(
            "found {} interface branches around ({}, {})",
            branches.len(),
            junction.0,
            junction.1
        )));
    }
    let mut phases: Vec<usize> = branches.iter().flat_map(|b| [b.0 .0, b.0 .1]).collect();
    phases.sort_unstable();
    phases.dedup();
    if phases.len() != 3 {
        return Err(Error::Topology(format!(
            "branches do not bound three phases: {phases:?}"
        )));
    }
    branches.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut degrees = [0.0; 3];
    for k in 0..3 {
        let (p, dir_a) = (branches[k].0, branches[k].1);
        let (q, dir_b) = (branches[(k + 1) % 3].0, branches[(k + 1) % 3].1);
        let shared = [p.0, p.1]
            .into_iter()
            .find(|&x| x == q.0 || x == q.1)
            .ok_or_else(|| Error::Topology("adjacent branches share no phase".into()))?;
        let sweep = (dir_b - dir_a).rem_euclid(2.0 * PI);
        let slot = phases
            .iter()
            .position(|&x| x == shared)
            .expect("shared phase is present");
        degrees[slot] = sweep.to_degrees();
    }
    Ok(JunctionAngles {
        phases: [phases[0], phases[1], phases[2]],
        degrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_partition, GridSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hausdorff_examples() {
        let a = vec![(0.1, 0.2), (0.4, 0.7)];
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(
            hausdorff_distance(&[(0.0, 0.0)], &[(0.0, 0.3)]).unwrap(),
            0.3,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            hausdorff_distance(&[(0.0, 0.05)], &[(0.0, 0.95)]).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert!(hausdorff_distance(&[], &a).is_err());
    }

    #[test]
    fn shifted_disk_boundary_is_one_cell_away() {
        let n = 64;
        let grid = GridSpec::square(n).unwrap();
        let disk = make_partition(&grid, 2, |x, y| {
            usize::from((x - 0.5).powi(2) + (y - 0.5).powi(2) > 0.0625)
        })
        .unwrap();
        let a = extract_interface(&disk, 0, 1).unwrap();
        let b = extract_interface(&disk.shifted(1, 0), 0, 1).unwrap();
        assert_abs_diff_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn l1_error_examples() {
        let grid = GridSpec::square(16).unwrap();
        let p = Partition::uniform(grid.clone(), 3, 0).unwrap();
        assert_eq!(partition_l1_error(&p, &p).unwrap(), 0.0);
        let mut labels = p.labels().to_vec();
        labels[37] = 2;
        let q = Partition::from_labels(grid, 3, labels).unwrap();
        assert_abs_diff_eq!(partition_l1_error(&p, &q).unwrap(), 1.0 / 256.0, epsilon = 1e-18);
        let other = Partition::uniform(GridSpec::square(8).unwrap(), 3, 0).unwrap();
        assert!(matches!(partition_l1_error(&p, &other), Err(Error::Shape(_))));
    }

    fn three_rays(n: usize, centre: Point, dirs: [f64; 3]) -> Partition {
        let grid = GridSpec::square(n).unwrap();
        make_partition(&grid, 3, |x, y| {
            let a = (y - centre.1).atan2(x - centre.0).rem_euclid(2.0 * PI);
            dirs.iter().filter(|&&d| a >= d).count() % 3
        })
        .unwrap()
    }

    #[test]
    fn synthetic_equal_angles() {
        let n = 256;
        let h = 1.0 / n as f64;
        let dirs = [0.3, 0.3 + 2.0 * PI / 3.0, 0.3 + 4.0 * PI / 3.0];
        let c = (0.5 + 0.31 * h, 0.5 + 0.17 * h);
        let p = three_rays(n, c, dirs);
        let m = measure_junction_angles(&p, (0.5, 0.5), (5.0 * h, 20.0 * h)).unwrap();
        for d in m.degrees {
            assert!((d - 120.0).abs() < 1.0, "{:?}", m.degrees);
        }
        assert_abs_diff_eq!(m.degrees.iter().sum::<f64>(), 360.0, epsilon = 1e-9);
    }

    #[test]
    fn synthetic_unequal_angles_are_assigned_to_phases() {
        let n = 256;
        let h = 1.0 / n as f64;
        let dirs = [0.0, 90f64.to_radians(), 225f64.to_radians()];
        let c = (0.5 + 0.31 * h, 0.5 + 0.17 * h);
        let p = three_rays(n, c, dirs);
        let m = measure_junction_angles(&p, (0.5, 0.5), (5.0 * h, 20.0 * h)).unwrap();
        assert!((m.of_phase(1).unwrap() - 90.0).abs() < 1.0, "{m:?}");
        assert!((m.of_phase(2).unwrap() - 135.0).abs() < 1.0, "{m:?}");
        assert!((m.of_phase(0).unwrap() - 135.0).abs() < 1.0, "{m:?}");
    }

    #[test]
    fn junction_finder_and_topology_error() {
        let n = 64;
        let h = 1.0 / n as f64;
        let p = three_rays(n, (0.5, 0.5), [0.1, 2.2, 4.3]);
        let found = find_junctions(&p);
        assert!(found.iter().any(|(q, _)| periodic_dist(*q, (0.5, 0.5)) < 2.0 * h));
        let two = make_partition(p.grid(), 3, |x, _| usize::from(x > 0.5)).unwrap();
        assert!(matches!(
            measure_junction_angles(&two, (0.5, 0.5), (5.0 * h, 20.0 * h)),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn exact_no_wetting_partition_has_no_layer() {
        let spec = GrimReaperSpec::asymmetric();
        let grid = GridSpec::square(128).unwrap();
        let p = crate::benchmarks::grim::grim_reaper_initial_partition(&spec, &grid).unwrap();
        assert_eq!(wetting_layer_area(&p, &spec).unwrap(), 0.0);
    }
}
