use threshold_dynamics::benchmarks::{
    find_junctions, measure_junction_angles, run_grim_reaper, GrimReaperSpec, JunctionAngles,
};
use threshold_dynamics::*;

fn triple_junction_angles(p: &Partition) -> JunctionAngles {
    let h = 1.0 / p.grid().nx() as f64;
    let js: Vec<_> = find_junctions(p)
        .into_iter()
        .filter(|(q, phases)| phases.len() == 3 && q.0 < 0.5 && q.1 > 0.2)
        .collect();
    assert!(!js.is_empty());
    let jx = js.iter().map(|j| j.0 .0).sum::<f64>() / js.len() as f64;
    let jy = js.iter().map(|j| j.0 .1).sum::<f64>() / js.len() as f64;
    measure_junction_angles(p, (jx, jy), (5.0 * h, 20.0 * h)).unwrap()
}

fn run(mu: Option<MobilityMatrix>, steps: usize, n: usize) -> JunctionAngles {
    let spec = GrimReaperSpec::symmetric();
    let (sigma, default_mu) = spec.tensions_mobilities();
    let mu = mu.unwrap_or(default_mu);
    let sel = select_alpha_beta(&sigma, &mu, &AlphaBetaPolicy::default()).unwrap();
    let k = kernel_coefficients(&sigma, &mu, sel.alpha, sel.beta).unwrap();
    let ctx = StepContext::es(sigma, mu, k, 0.05 / steps as f64).unwrap();
    let (p, _) = run_grim_reaper(
        &spec,
        &ctx,
        n,
        steps,
        RecordOptions {
            energy: false,
            volumes: false,
        },
        |_, _| Ok(()),
    )
    .unwrap();
    triple_junction_angles(&p)
}

fn assert_young(a: &JunctionAngles, tol: f64) {
    let sum: f64 = a.degrees.iter().sum();
    assert!((sum - 360.0).abs() < 2.0, "angles sum to {sum}");
    for (phase, expected) in [(0, 135.0), (1, 135.0), (2, 90.0)] {
        let got = a.of_phase(phase).unwrap();
        assert!((got - expected).abs() < tol, "phase {phase}: {got} vs {expected}");
    }
}

#[test]
fn reciprocal_mobilities_open_at_young_angles() {
    let (sigma, _) = GrimReaperSpec::symmetric().tensions_mobilities();
    let mu = MobilityMatrix::new(TensionMatrix::reciprocal_of(&sigma)).unwrap();
    assert_young(&run(Some(mu), 100, 512), 5.0);
}

// With equal mobilities the junction sits inside a layer of the wide kernel's
// width, so angles read at 5h..20h approach Young's law only as dt shrinks.
#[test]
fn equal_mobility_angles_approach_young_as_dt_shrinks() {
    let deviation: Vec<f64> = [50, 100, 200, 400]
        .iter()
        .map(|&steps| {
            let a = run(None, steps, 512);
            (a.of_phase(2).unwrap() - 90.0).abs()
        })
        .collect();
    assert!(deviation.windows(2).all(|w| w[1] < w[0]), "{deviation:?}");
    assert!(deviation[3] < 10.0, "{deviation:?}");
}
