use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use threshold_dynamics::benchmarks::counterexample::{
    counterexample_energy, write_counterexample_csv, CounterexampleSpec,
};
use threshold_dynamics::benchmarks::{
    convergence_study, find_junctions, grim_reaper_partition, linf_graph_error, measure_junction_angles,
    partition_l1_error, presets, run_grim_reaper, shrinking_circle_error, wetting_layer_area, write_convergence_csv,
    GrimInterface, GrimReaperSpec,
};
use threshold_dynamics::dynamics::fmt_f64;
use threshold_dynamics::grid::write_pgm;
use threshold_dynamics::kernel::pair_sum_matrix;
use threshold_dynamics::tension::{
    classify_tension_matrix, conditional_definiteness, default_tolerance, junction_angles,
};
use threshold_dynamics::{
    kernel_coefficients, select_alpha_beta, Algorithm, AlphaBetaPolicy, AlphaBetaSelection, Error, GridSpec,
    KernelFamily, MobilityMatrix, Partition, RecordOptions, RunReport, Simulator, StepContext, TensionMatrix,
};

use crate::config::{ExperimentConfig, Preset, Width};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) | Error::Definiteness(_) | Error::Validation(_) | Error::NonpositiveMobility(_) => {
                EXIT_VALIDATION
            }
            Error::Configuration(_) | Error::Parameter(_) | Error::Shape(_) | Error::Domain(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_RUNTIME, format!("i/o error: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Validate,
    Kernels,
    BenchGrim1,
    BenchGrim2,
    BenchAngles,
    BenchWetting,
    BenchCounterexample,
    BenchCircle,
}

pub struct Options {
    pub levels: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn execute(command: Command, config: &ExperimentConfig, opts: &Options) -> Result<(), Failure> {
    let out_dir = || opts.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    match command {
        Command::Validate => validate(config),
        Command::Kernels => kernels(config),
        Command::Run => run(config, &out_dir()),
        Command::BenchCounterexample => bench_counterexample(config, &out_dir()),
        bench => {
            let levels = opts.levels.unwrap_or(match bench {
                Command::BenchGrim2 | Command::BenchWetting => 2,
                Command::BenchAngles => 1,
                _ => 3,
            });
            if levels == 0 {
                return Err(Failure::new(EXIT_CONFIG, "--levels must be at least 1"));
            }
            match bench {
                Command::BenchGrim1 => bench_grim(
                    config,
                    GrimReaperSpec::symmetric(),
                    0.1,
                    levels,
                    &out_dir(),
                    "bench_grim1.csv",
                ),
                Command::BenchGrim2 => bench_grim(
                    config,
                    GrimReaperSpec::asymmetric(),
                    0.096,
                    levels,
                    &out_dir(),
                    "bench_grim2.csv",
                ),
                Command::BenchAngles => bench_angles(config, levels, &out_dir()),
                Command::BenchWetting => bench_wetting(config, levels, &out_dir()),
                Command::BenchCircle => bench_circle(config, levels, &out_dir()),
                _ => unreachable!(),
            }
        }
    }
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), Failure>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn policy(config: &ExperimentConfig) -> AlphaBetaPolicy {
    let mut p = AlphaBetaPolicy::default().with_no_wetting(config.kernels.enforce_no_wetting);
    if let Width::Value(a) = config.kernels.alpha {
        p.manual_alpha = Some(a);
    }
    if let Width::Value(b) = config.kernels.beta {
        p.manual_beta = Some(b);
    }
    p
}

/// Automatic widths for the matrices; two phases with both widths on auto
/// fall back to `(2 sigma mu, sigma mu / 2)`, since positivity and stability
/// then pin `alpha = beta`.
fn widths(
    config: &ExperimentConfig,
    sigma: &TensionMatrix,
    mu: &MobilityMatrix,
) -> Result<AlphaBetaSelection, Failure> {
    let k = &config.kernels;
    if sigma.n_phases() == 2 && k.alpha == Width::Auto && k.beta == Width::Auto && !k.enforce_no_wetting {
        let sm = sigma.get(0, 1) * mu.get(0, 1);
        return Ok(AlphaBetaSelection {
            alpha: 2.0 * sm,
            beta: 0.5 * sm,
            warnings: Vec::new(),
        });
    }
    let sel = select_alpha_beta(sigma, mu, &policy(config))?;
    for w in &sel.warnings {
        eprintln!("warning: {w}");
    }
    Ok(sel)
}

fn matrices(config: &ExperimentConfig) -> Result<(TensionMatrix, MobilityMatrix), Failure> {
    let sigma = config
        .tension_matrix()
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let mu = config
        .mobility_matrix()
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    Ok((sigma, mu))
}

fn family(config: &ExperimentConfig, sigma: &TensionMatrix, mu: &MobilityMatrix) -> Result<KernelFamily, Failure> {
    let sel = widths(config, sigma, mu)?;
    Ok(kernel_coefficients(sigma, mu, sel.alpha, sel.beta)?)
}

fn context(
    algorithm: Algorithm,
    config: &ExperimentConfig,
    sigma: &TensionMatrix,
    mu: &MobilityMatrix,
    dt: f64,
) -> Result<StepContext, Failure> {
    Ok(match algorithm {
        Algorithm::Es => StepContext::es(sigma.clone(), mu.clone(), family(config, sigma, mu)?, dt)?,
        Algorithm::Mbo => StepContext::mbo(family(config, sigma, mu)?, dt)?,
        Algorithm::Eo => StepContext::eo(sigma.clone(), dt)?,
    })
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn eigen_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ")
}

fn validate(config: &ExperimentConfig) -> Result<(), Failure> {
    let (sigma, mu) = matrices(config)?;
    let mut failures = Vec::new();
    let mut report = String::new();
    let s = sigma.as_matrix();
    let class = classify_tension_matrix(s, default_tolerance(s))?;
    let _ = writeln!(report, "phases: {}", sigma.n_phases());
    let _ = writeln!(
        report,
        "surface tensions: S_N {}, T_N {}, strict triangle {}",
        yes(class.in_s_n),
        yes(class.in_t_n),
        yes(class.strict_triangle)
    );
    if !class.in_t_n {
        failures.push("surface tensions violate the triangle inequality".to_string());
    }
    let inv = mu.reciprocal();
    for (what, m) in [("surface tensions", s), ("reciprocal mobilities", &inv)] {
        let rep = conditional_definiteness(m, default_tolerance(m))?;
        let _ = writeln!(
            report,
            "{what}: {} (eigenvalues on e-perp: {})",
            rep.classification,
            eigen_list(&rep.nonzero_eigenvalues())
        );
    }
    let inv_class = classify_tension_matrix(&inv, default_tolerance(&inv))?;
    let _ = writeln!(report, "reciprocal mobilities: T_N {}", yes(inv_class.in_t_n));
    match widths(config, &sigma, &mu).and_then(|sel| {
        Ok((
            sel.alpha,
            sel.beta,
            kernel_coefficients(&sigma, &mu, sel.alpha, sel.beta)?,
        ))
    }) {
        Ok((alpha, beta, fam)) => {
            let _ = writeln!(report, "widths: alpha = {}, beta = {}", fmt_f64(alpha), fmt_f64(beta));
            let sums = pair_sum_matrix(&fam)?;
            let _ = writeln!(report, "pair sums a+b: strict triangle {}", yes(sums.strict_triangle));
            if config.kernels.enforce_no_wetting && !sums.strict_triangle {
                failures.push("pair sums a+b are not strictly triangular although no-wetting is enforced".into());
            }
        }
        Err(f) => {
            let _ = writeln!(report, "widths: infeasible");
            failures.push(f.message);
        }
    }
    print!("{report}");
    if failures.is_empty() {
        println!("status: ok");
        Ok(())
    } else {
        println!("status: failed");
        Err(Failure::new(EXIT_VALIDATION, failures.join("; ")))
    }
}

fn matrix_text(name: &str, m: &nalgebra::DMatrix<f64>) -> String {
    let mut s = format!("{name}:\n");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        let _ = writeln!(s, "  {}", row.join(", "));
    }
    s
}

fn kernels(config: &ExperimentConfig) -> Result<(), Failure> {
    let (sigma, mu) = matrices(config)?;
    let fam = family(config, &sigma, &mu)?;
    println!("alpha = {}", fmt_f64(fam.alpha));
    println!("beta = {}", fmt_f64(fam.beta));
    print!("{}", matrix_text("A", &fam.a));
    print!("{}", matrix_text("B", &fam.b));
    Ok(())
}

fn initial_partition(config: &ExperimentConfig, grid: &GridSpec) -> Result<Partition, Failure> {
    let n = config.n_phases();
    Ok(match config.initial {
        Preset::Disk { centre, radius } => presets::disk(grid, centre, radius)?,
        Preset::HalfPlane { split } => presets::half_plane(grid, split)?,
        Preset::Voronoi { seed } => presets::voronoi(grid, n, seed)?,
        Preset::GrimSymmetric | Preset::GrimAsymmetric => unreachable!("grim presets run on the half domain"),
    })
}

fn check_finite(report: &RunReport) -> Result<(), Failure> {
    match report.energies.iter().position(|e| !e.is_finite()) {
        Some(k) => Err(Failure::new(EXIT_RUNTIME, format!("energy is not finite at step {k}"))),
        None => Ok(()),
    }
}

fn snapshot(dir: &Path, k: usize, p: &Partition) -> Result<(), Failure> {
    write_atomic(&dir.join(format!("phase_{k:06}.pgm")), |buf| write_pgm(p, buf))
}

fn run(config: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    let (sigma, mu) = matrices(config)?;
    let e = &config.experiment;
    let ctx = context(e.algorithm, config, &sigma, &mu, e.dt)?;
    fs::create_dir_all(dir)?;
    let every = config.output.snapshot_every;
    let maps = config.output.phase_maps;
    let mut observer = |k: usize, p: &Partition| -> threshold_dynamics::Result<()> {
        if maps && k.is_multiple_of(every) {
            snapshot(dir, k, p).map_err(|f| Error::Numerical(f.message))?;
        }
        Ok(())
    };
    let report = match config.initial {
        Preset::GrimSymmetric | Preset::GrimAsymmetric => {
            let spec = if config.initial == Preset::GrimSymmetric {
                GrimReaperSpec::symmetric()
            } else {
                GrimReaperSpec::asymmetric()
            };
            run_grim_reaper(
                &spec,
                &ctx,
                config.grid.nx,
                e.steps,
                RecordOptions::default(),
                &mut observer,
            )?
            .1
        }
        _ => {
            let grid = GridSpec::new_2d(config.grid.nx, config.grid.ny)?;
            let p0 = initial_partition(config, &grid)?;
            Simulator::new(ctx, &grid).run(&p0, e.steps, RecordOptions::default(), &mut observer)?
        }
    };
    check_finite(&report)?;
    let path = dir.join(&config.output.energy_csv);
    write_atomic(&path, |buf| report.write_csv(buf))?;
    println!(
        "{}: {} steps, energy {} -> {}, wrote {}",
        e.name,
        e.steps,
        fmt_f64(report.energies[0]),
        fmt_f64(*report.energies.last().unwrap()),
        path.display()
    );
    Ok(())
}

fn grim_context(
    config: &ExperimentConfig,
    sigma: &TensionMatrix,
    mu: &MobilityMatrix,
    dt: f64,
) -> Result<StepContext, Failure> {
    context(config.experiment.algorithm, config, sigma, mu, dt)
}

fn base_level(config: &ExperimentConfig) -> Result<(usize, usize), Failure> {
    let n = config.grid.nx;
    if !n.is_multiple_of(2) {
        return Err(Failure::new(EXIT_CONFIG, "benchmarks need an even grid size nx"));
    }
    Ok((config.experiment.steps, n))
}

fn finish_csv(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    write_atomic(&path, |buf| buf.write_all(text.as_bytes()))?;
    print!("{text}");
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn bench_grim(
    config: &ExperimentConfig,
    spec: GrimReaperSpec,
    t: f64,
    levels: usize,
    dir: &Path,
    name: &str,
) -> Result<(), Failure> {
    let (sigma, mu) = spec.tensions_mobilities();
    let (steps, n) = base_level(config)?;
    let runner = |steps: usize, n: usize| -> threshold_dynamics::Result<f64> {
        let ctx = grim_context(config, &sigma, &mu, t / steps as f64).map_err(|f| Error::Validation(f.message))?;
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
        )?;
        let left = linf_graph_error(&p, &spec, GrimInterface::Left, t)?;
        let right = linf_graph_error(&p, &spec, GrimInterface::Right, t)?;
        Ok(left.max(right))
    };
    let rows = if levels == 1 {
        vec![threshold_dynamics::benchmarks::ConvergenceRow {
            steps,
            n,
            error: runner(steps, n)?,
            rate: None,
        }]
    } else {
        convergence_study(steps, n, levels, runner)?
    };
    let mut buf = Vec::new();
    write_convergence_csv(&rows, &mut buf)?;
    finish_csv(dir, name, &String::from_utf8_lossy(&buf))
}

fn junction_near_top(p: &Partition) -> Option<(f64, f64)> {
    let js: Vec<_> = find_junctions(p)
        .into_iter()
        .filter(|(q, phases)| phases.len() == 3 && q.0 < 0.5 && q.1 > 0.2)
        .collect();
    if js.is_empty() {
        return None;
    }
    let k = js.len() as f64;
    Some((
        js.iter().map(|j| j.0 .0).sum::<f64>() / k,
        js.iter().map(|j| j.0 .1).sum::<f64>() / k,
    ))
}

fn bench_angles(config: &ExperimentConfig, levels: usize, dir: &Path) -> Result<(), Failure> {
    let spec = GrimReaperSpec::symmetric();
    let (sigma, mu) = spec.tensions_mobilities();
    let t = 0.05;
    let young = junction_angles(&sigma, (0, 1, 2))?.map(f64::to_degrees);
    let (base_steps, base_n) = base_level(config)?;
    let mut text = String::from("steps,n,phase,measured_deg,young_deg\n");
    for level in 0..levels {
        let (steps, n) = (base_steps << level, base_n << level);
        let ctx = grim_context(config, &sigma, &mu, t / steps as f64)?;
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
        )?;
        let h = 1.0 / n as f64;
        let junction = junction_near_top(&p).ok_or_else(|| Failure::new(EXIT_RUNTIME, "no triple junction found"))?;
        let angles = measure_junction_angles(&p, junction, (5.0 * h, 20.0 * h))?;
        for (phase, expected) in young.iter().enumerate() {
            let got = angles.of_phase(phase).unwrap_or(f64::NAN);
            let _ = writeln!(
                text,
                "{steps},{n},{},{},{}",
                phase + 1,
                fmt_f64(got),
                fmt_f64(*expected)
            );
        }
    }
    finish_csv(dir, "bench_angles.csv", &text)
}

fn bench_wetting(config: &ExperimentConfig, levels: usize, dir: &Path) -> Result<(), Failure> {
    let spec = GrimReaperSpec::asymmetric();
    let (sigma, mu) = GrimReaperSpec::wetting_matrices();
    let t = 0.096;
    let (base_steps, base_n) = base_level(config)?;
    let mut text = String::from("steps,n,layer_area,l1_error,area_rate\n");
    let mut prev: Option<f64> = None;
    for level in 0..levels {
        let (steps, n) = (base_steps << level, base_n << level);
        let ctx = grim_context(config, &sigma, &mu, t / steps as f64)?;
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
        )?;
        let exact = grim_reaper_partition(&spec, &GridSpec::square(n)?, t)?;
        let area = wetting_layer_area(&p, &spec)?;
        let l1 = partition_l1_error(&p, &exact)?;
        let rate = match prev {
            Some(a) if a > 0.0 && area > 0.0 => fmt_f64((a / area).log2()),
            _ => String::new(),
        };
        let _ = writeln!(text, "{steps},{n},{},{},{rate}", fmt_f64(area), fmt_f64(l1));
        prev = Some(area);
    }
    finish_csv(dir, "bench_wetting.csv", &text)
}

fn bench_counterexample(config: &ExperimentConfig, dir: &Path) -> Result<(), Failure> {
    let spec = match &config.counterexample {
        Some(c) => CounterexampleSpec::new(c.delta1, c.delta2, c.epsilons.clone())?,
        None => CounterexampleSpec::reference(),
    };
    let rows = spec
        .epsilons
        .iter()
        .map(|&eps| counterexample_energy(&spec, eps))
        .collect::<threshold_dynamics::Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_counterexample_csv(&rows, &mut buf)?;
    finish_csv(dir, "bench_counterexample.csv", &String::from_utf8_lossy(&buf))
}

fn bench_circle(config: &ExperimentConfig, levels: usize, dir: &Path) -> Result<(), Failure> {
    let (sigma, mu) = matrices(config)?;
    if sigma.n_phases() != 2 {
        return Err(Failure::new(EXIT_CONFIG, "bench-circle needs two phases"));
    }
    let radius = match config.initial {
        Preset::Disk { radius, .. } => radius,
        _ => 0.25,
    };
    let sm = sigma.get(0, 1) * mu.get(0, 1);
    let t = config.experiment.dt * config.experiment.steps as f64;
    let (base_steps, base_n) = base_level(config)?;
    let runner = |steps: usize, n: usize| -> threshold_dynamics::Result<f64> {
        let ctx = context(config.experiment.algorithm, config, &sigma, &mu, t / steps as f64)
            .map_err(|f| Error::Validation(f.message))?;
        let series = shrinking_circle_error(radius, sm, &GridSpec::square(n)?, &ctx, steps)?;
        if let Some(k) = series.vanished_at {
            return Err(Error::Numerical(format!("disk vanished after {k} steps")));
        }
        Ok(series.max_error())
    };
    let rows = if levels == 1 {
        vec![threshold_dynamics::benchmarks::ConvergenceRow {
            steps: base_steps,
            n: base_n,
            error: runner(base_steps, base_n)?,
            rate: None,
        }]
    } else {
        convergence_study(base_steps, base_n, levels, runner)?
    };
    let mut buf = Vec::new();
    write_convergence_csv(&rows, &mut buf)?;
    finish_csv(dir, "bench_circle.csv", &String::from_utf8_lossy(&buf))
}
