use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use threshold_dynamics::benchmarks::counterexample::{counterexample_energy, CounterexampleSpec};
use threshold_dynamics::benchmarks::{grim_reaper_profile, hausdorff_distance, presets, GrimInterface, GrimReaperSpec};
use threshold_dynamics::grid::{extract_interface, gaussian_convolve};
use threshold_dynamics::kernel::{kernel_to_tension_mobility, pair_coefficients};
use threshold_dynamics::tension::{
    brandon_f, classify_tension_matrix, conditional_definiteness, default_tolerance, junction_angles,
    misorientation_angle, octahedral_group, read_shockley_2d, read_shockley_3d, Orientation2D, Orientation3D,
};
use threshold_dynamics::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn orientation_set_2d(angles: &[f64]) -> Vec<Orientation2D> {
    angles.iter().map(|&t| Orientation2D::wrapped(t)).collect()
}

fn distinct_enough(angles: &[Orientation2D]) -> bool {
    angles.iter().enumerate().all(|(i, a)| {
        angles[i + 1..].iter().all(|b| {
            let d = (a.theta() - b.theta()).abs();
            d.min(PI / 2.0 - d) > 0.02
        })
    })
}

fn rs_2d(angles: &[f64]) -> Option<TensionMatrix> {
    let o = orientation_set_2d(angles);
    if !distinct_enough(&o) {
        return None;
    }
    read_shockley_2d(&o, |t| brandon_f(t, PI / 6.0).unwrap()).ok()
}

fn es_context(sigma: &TensionMatrix, mu: &MobilityMatrix, dt: f64) -> StepContext {
    let sel = select_alpha_beta(sigma, mu, &AlphaBetaPolicy::default()).unwrap();
    let k = kernel_coefficients(sigma, mu, sel.alpha, sel.beta).unwrap();
    StepContext::es(sigma.clone(), mu.clone(), k, dt).unwrap()
}

/// Cells whose two smallest comparison values are separated by more than
/// `gap`; only these are expected to be insensitive to rounding.
fn decided_cells(psi: &[Vec<f64>], gap: f64) -> Vec<bool> {
    (0..psi[0].len())
        .map(|x| {
            let mut v: Vec<f64> = psi.iter().map(|p| p[x]).collect();
            v.sort_by(f64::total_cmp);
            v[1] - v[0] > gap
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_round_trip(sigma in 0.01f64..10.0, mu in 0.1f64..10.0, up in 0.01f64..3.0, down in 0.01f64..0.99) {
        let p = sigma * mu;
        let (alpha, beta) = (p * (1.0 + up), p * down);
        let (a, b) = pair_coefficients(sigma, mu, alpha, beta).unwrap();
        prop_assert!(a >= -1e-12 && b >= -1e-12);
        let (s2, m2) = kernel_to_tension_mobility(a, b, alpha, beta).unwrap();
        prop_assert!(rel_close(s2, sigma, 1e-12));
        prop_assert!(rel_close(m2, mu, 1e-12));
        let closed = PI.sqrt() * (sigma + (alpha * beta).sqrt() / mu) / (alpha.sqrt() + beta.sqrt());
        prop_assert!(rel_close(a + b, closed, 1e-12));
    }

    #[test]
    fn positivity_bounds_are_scale_consistent(angles in prop::collection::vec(-FRAC_PI_4..FRAC_PI_4, 3..6), c in 0.1f64..10.0) {
        let Some(sigma) = rs_2d(&angles) else { return Ok(()) };
        let n = sigma.n_phases();
        let mu = MobilityMatrix::equal(n, 1.0).unwrap();
        let policy = AlphaBetaPolicy { enforce_stability: false, ..AlphaBetaPolicy::default() };
        let base = select_alpha_beta(&sigma, &mu, &policy).unwrap();
        let scaled = select_alpha_beta(&sigma.scaled(c).unwrap(), &mu.scaled(1.0 / c).unwrap(), &policy).unwrap();
        prop_assert!(rel_close(base.alpha, scaled.alpha, 1e-12));
        prop_assert!(rel_close(base.beta, scaled.beta, 1e-12));
        let again = select_alpha_beta(&sigma, &mu, &policy).unwrap();
        prop_assert_eq!(base, again);
    }

    #[test]
    fn stable_widths_give_semidefinite_coefficient_matrices(angles in prop::collection::vec(-FRAC_PI_4..FRAC_PI_4, 3..6)) {
        let Some(sigma) = rs_2d(&angles) else { return Ok(()) };
        let mu = MobilityMatrix::equal(sigma.n_phases(), 1.0).unwrap();
        let Ok(sel) = select_alpha_beta(&sigma, &mu, &AlphaBetaPolicy::default()) else { return Ok(()) };
        let k = kernel_coefficients(&sigma, &mu, sel.alpha, sel.beta).unwrap();
        for m in [&k.a, &k.b] {
            let tol = default_tolerance(m).max(1e-12);
            prop_assert!(conditional_definiteness(m, tol).unwrap().classification.is_semidefinite());
        }
    }

    #[test]
    fn classification_is_permutation_invariant(entries in prop::collection::vec(0.1f64..2.0, 6), seed in any::<u64>()) {
        let n = 4;
        let mut m = DMatrix::zeros(n, n);
        let mut it = entries.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = *it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let p = DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]);
        prop_assert_eq!(classify_tension_matrix(&m, 1e-12).unwrap(), classify_tension_matrix(&p, 1e-12).unwrap());
        let report = conditional_definiteness(&m, default_tolerance(&m)).unwrap();
        prop_assert!(report.projected_eigenvalues[report.e_index].abs() <= report.tolerance.max(1e-12));
    }

    #[test]
    fn junction_angles_obey_young(s1 in 0.2f64..1.0, s2 in 0.2f64..1.0, s3 in 0.2f64..1.0, c in 0.1f64..10.0) {
        prop_assume!(s1 + s2 > s3 * 1.01 && s2 + s3 > s1 * 1.01 && s1 + s3 > s2 * 1.01);
        let sigma = TensionMatrix::from_rows(&[vec![0.0, s3, s2], vec![s3, 0.0, s1], vec![s2, s1, 0.0]]).unwrap();
        let th = junction_angles(&sigma, (0, 1, 2)).unwrap();
        prop_assert!((th.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-12);
        let ratios = [th[0].sin() / s1, th[1].sin() / s2, th[2].sin() / s3];
        prop_assert!((ratios[0] - ratios[1]).abs() < 1e-12 * ratios[0].abs().max(1.0));
        prop_assert!((ratios[0] - ratios[2]).abs() < 1e-12 * ratios[0].abs().max(1.0));
        let scaled = junction_angles(&sigma.scaled(c).unwrap(), (0, 1, 2)).unwrap();
        for (a, b) in th.iter().zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn misorientation_symmetry(seed in any::<u64>(), o1 in 0usize..24, o2 in 0usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Orientation3D::random(&mut rng);
        let b = Orientation3D::random(&mut rng);
        let m = misorientation_angle(&a, &b);
        prop_assert!((m - misorientation_angle(&b, &a)).abs() < 1e-12);
        let group = octahedral_group();
        let a2 = Orientation3D::new(group[o1] * a.matrix()).unwrap();
        let b2 = Orientation3D::new(group[o2] * b.matrix()).unwrap();
        prop_assert!((m - misorientation_angle(&a2, &b)).abs() < 1e-12);
        prop_assert!((m - misorientation_angle(&a, &b2)).abs() < 1e-12);
        prop_assert!(misorientation_angle(&a, &a2) < 1e-6);
    }

    #[test]
    fn read_shockley_matrices_are_valid(seed in any::<u64>(), n in 2usize..7, angles in prop::collection::vec(-FRAC_PI_4..FRAC_PI_4, 2..7)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grains: Vec<Orientation3D> = (0..n).map(|_| Orientation3D::random(&mut rng)).collect();
        let mut mats = vec![read_shockley_3d(&grains, PI / 6.0).unwrap()];
        mats.extend(rs_2d(&angles));
        for sigma in mats {
            let m = sigma.as_matrix();
            for i in 0..m.nrows() {
                prop_assert_eq!(m[(i, i)], 0.0);
                for j in 0..m.ncols() {
                    prop_assert_eq!(m[(i, j)], m[(j, i)]);
                    prop_assert!((0.0..=1.0).contains(&m[(i, j)]));
                }
            }
        }
    }

    #[test]
    fn hausdorff_is_a_metric(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..30), split1 in 1usize..10, split2 in 1usize..10) {
        let a = &pts[..split1.min(pts.len() - 1)];
        let b = &pts[split1.min(pts.len() - 1)..];
        let c = &pts[..split2.min(pts.len())];
        let dab = hausdorff_distance(a, b).unwrap();
        prop_assert_eq!(dab, hausdorff_distance(b, a).unwrap());
        let dac = hausdorff_distance(a, c).unwrap();
        let dcb = hausdorff_distance(c, b).unwrap();
        prop_assert!(dab <= dac + dcb + 1e-15);
        prop_assert_eq!(hausdorff_distance(a, a).unwrap(), 0.0);
    }

    #[test]
    fn counterexample_energy_is_epsilon_free(d1 in 0.001f64..0.1, d2 in 0.01f64..1.0) {
        let spec = CounterexampleSpec::new(d1, d2, vec![0.1, 0.001]).unwrap();
        let a = counterexample_energy(&spec, 0.1).unwrap();
        let b = counterexample_energy(&spec, 0.001).unwrap();
        prop_assert!((a.numeric - b.numeric).abs() < 1e-8);
        prop_assert!((a.numeric - a.closed_form).abs() < 1e-8);
    }

    #[test]
    fn grim_profiles_meet_at_the_junction(t in 0.0f64..0.1) {
        for spec in [GrimReaperSpec::symmetric(), GrimReaperSpec::asymmetric()] {
            let l = grim_reaper_profile(&spec, GrimInterface::Left, spec.junction_x, t).unwrap();
            let r = grim_reaper_profile(&spec, GrimInterface::Right, spec.junction_x, t).unwrap();
            prop_assert!((l - r).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convolution_mean_translation_and_symmetry(seed in any::<u64>(), s in 1e-4f64..1e-2) {
        use rand::Rng;
        let grid = GridSpec::new_2d(32, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
        let u = ScalarField::new(grid.clone(), vals.clone()).unwrap();
        let out = gaussian_convolve(&u, s).unwrap();
        prop_assert!(rel_close(out.mean(), u.mean(), 1e-13));

        let shift = |v: &[f64]| -> Vec<f64> {
            let mut w = vec![0.0; v.len()];
            for iy in 0..grid.ny() {
                for ix in 0..grid.nx() {
                    w[grid.index((ix + 1) % grid.nx(), iy)] = v[grid.index(ix, iy)];
                }
            }
            w
        };
        let shifted = gaussian_convolve(&ScalarField::new(grid.clone(), shift(&vals)).unwrap(), s).unwrap();
        for (a, b) in shifted.values.iter().zip(shift(&out.values)) {
            prop_assert!((a - b).abs() < 1e-12);
        }

        let mut even = vals.clone();
        for iy in 0..grid.ny() {
            for ix in grid.nx() / 2..grid.nx() {
                even[grid.index(ix, iy)] = vals[grid.index(grid.nx() - 1 - ix, iy)];
            }
        }
        let e = gaussian_convolve(&ScalarField::new(grid.clone(), even).unwrap(), s).unwrap();
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                prop_assert!((e.values[grid.index(ix, iy)] - e.values[grid.index(grid.nx() - 1 - ix, iy)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interface_points_shift_with_the_partition(seed in any::<u64>(), dx in -3isize..4, dy in -3isize..4) {
        let grid = GridSpec::square(32).unwrap();
        let p = presets::voronoi(&grid, 3, seed).unwrap();
        let q = p.shifted(dx, dy);
        let h = grid.hx();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut a: Vec<(i64, i64)> = extract_interface(&p, i, j)
                .unwrap()
                .iter()
                .map(|&(x, y)| (((x + dx as f64 * h).rem_euclid(1.0) / h * 2.0).round() as i64 % 64, ((y + dy as f64 * h).rem_euclid(1.0) / h * 2.0).round() as i64 % 64))
                .collect();
            let mut b: Vec<(i64, i64)> = extract_interface(&q, i, j)
                .unwrap()
                .iter()
                .map(|&(x, y)| ((x / h * 2.0).round() as i64 % 64, (y / h * 2.0).round() as i64 % 64))
                .collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn steps_dissipate_energy_and_keep_volume(seed in any::<u64>(), angles in prop::collection::vec(-FRAC_PI_4..FRAC_PI_4, 3..5)) {
        let Some(sigma) = rs_2d(&angles) else { return Ok(()) };
        let n = sigma.n_phases();
        let mu = MobilityMatrix::equal(n, 1.0).unwrap();
        let ctx = es_context(&sigma, &mu, 1e-3);
        let grid = GridSpec::square(32).unwrap();
        let p0 = presets::voronoi(&grid, n, seed).unwrap();
        let report = run_simulation(&p0, &ctx, 5, RecordOptions::default()).unwrap();
        prop_assert!(report.max_relative_increase() <= 1e-10);
        for row in &report.volumes {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steps_commute_with_relabeling_and_translation(seed in any::<u64>(), angles in prop::collection::vec(-FRAC_PI_4..FRAC_PI_4, 3..4), dx in -5isize..6, dy in -5isize..6) {
        let Some(sigma) = rs_2d(&angles) else { return Ok(()) };
        let n = sigma.n_phases();
        let mu = MobilityMatrix::equal(n, 1.0).unwrap();
        let ctx = es_context(&sigma, &mu, 1e-3);
        let grid = GridSpec::square(32).unwrap();
        let p0 = presets::voronoi(&grid, n, seed).unwrap();
        let sim = Simulator::new(ctx.clone(), &grid);
        let next = sim.step(&p0).unwrap().next;
        let decided = decided_cells(&sim.comparison_functions(&p0).unwrap(), 1e-9);

        let perm: Vec<usize> = (0..n).rev().collect();
        let pctx = es_context(&sigma.permuted(&perm), &mu.permuted(&perm), 1e-3);
        let relabeled = step_es(&p0.relabeled(&perm), &pctx).unwrap();
        let expected = next.relabeled(&perm);
        for (x, ok) in decided.iter().enumerate() {
            if *ok {
                prop_assert_eq!(relabeled.labels()[x], expected.labels()[x]);
            }
        }

        let moved = sim.step(&p0.shifted(dx, dy)).unwrap().next;
        let decided_moved = Partition::from_labels(grid.clone(), 2, decided.iter().map(|&d| u16::from(d)).collect())
            .unwrap()
            .shifted(dx, dy);
        let expected = next.shifted(dx, dy);
        for (x, &ok) in decided_moved.labels().iter().enumerate() {
            if ok == 1 {
                prop_assert_eq!(moved.labels()[x], expected.labels()[x]);
            }
        }
    }
}
