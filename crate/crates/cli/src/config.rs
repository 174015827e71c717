//! Experiment configuration: a small INI dialect.
//!
//! `[section]` headers, `key = value` pairs, `#` comments. Matrices are
//! semicolon-separated rows of comma-separated decimals. Angles are in
//! degrees.

use std::collections::BTreeMap;
use std::fmt;

use threshold_dynamics::tension::{Orientation2D, Orientation3D};
use threshold_dynamics::{Algorithm, MobilityMatrix, TensionMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key '{k}': {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "key '{k}': {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.map(str::to_string),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub algorithm: Algorithm,
    pub dt: f64,
    pub steps: usize,
    pub final_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tensions {
    Explicit(Vec<Vec<f64>>),
    ReadShockley2d {
        orientations: Vec<f64>,
        theta_star: f64,
    },
    /// Each orientation is `axis_x, axis_y, axis_z, angle`.
    ReadShockley3d {
        orientations: Vec<[f64; 4]>,
        theta_star: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mobilities {
    Explicit(Vec<Vec<f64>>),
    Equal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Width {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernels {
    pub alpha: Width,
    pub beta: Width,
    pub enforce_no_wetting: bool,
}

impl Default for Kernels {
    fn default() -> Self {
        Self {
            alpha: Width::Auto,
            beta: Width::Auto,
            enforce_no_wetting: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    GrimSymmetric,
    GrimAsymmetric,
    Disk { centre: (f64, f64), radius: f64 },
    HalfPlane { split: f64 },
    Voronoi { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub dir: String,
    pub phase_maps: bool,
    pub energy_csv: String,
    /// Steps between PGM snapshots when `phase_maps` is on.
    pub snapshot_every: usize,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            phase_maps: false,
            energy_csv: "energy.csv".into(),
            snapshot_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub delta1: f64,
    pub delta2: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid: Grid,
    pub tensions: Tensions,
    pub mobilities: Mobilities,
    pub kernels: Kernels,
    pub initial: Preset,
    pub output: Output,
    pub counterexample: Option<Counterexample>,
}

impl ExperimentConfig {
    pub fn n_phases(&self) -> usize {
        match &self.tensions {
            Tensions::Explicit(rows) => rows.len(),
            Tensions::ReadShockley2d { orientations, .. } => orientations.len(),
            Tensions::ReadShockley3d { orientations, .. } => orientations.len(),
        }
    }

    pub fn tension_matrix(&self) -> threshold_dynamics::Result<TensionMatrix> {
        use threshold_dynamics::tension::{brandon_f, read_shockley_2d, read_shockley_3d};
        match &self.tensions {
            Tensions::Explicit(rows) => TensionMatrix::from_rows(rows),
            Tensions::ReadShockley2d {
                orientations,
                theta_star,
            } => {
                let grains = orientations
                    .iter()
                    .map(|d| Orientation2D::new(d.to_radians()))
                    .collect::<threshold_dynamics::Result<Vec<_>>>()?;
                let ts = theta_star.to_radians();
                read_shockley_2d(&grains, |t| brandon_f(t, ts).unwrap_or(f64::NAN))
            }
            Tensions::ReadShockley3d {
                orientations,
                theta_star,
            } => {
                let grains = orientations
                    .iter()
                    .map(|o| Orientation3D::from_axis_angle([o[0], o[1], o[2]], o[3].to_radians()))
                    .collect::<threshold_dynamics::Result<Vec<_>>>()?;
                read_shockley_3d(&grains, theta_star.to_radians())
            }
        }
    }

    pub fn mobility_matrix(&self) -> threshold_dynamics::Result<MobilityMatrix> {
        match &self.mobilities {
            Mobilities::Explicit(rows) => MobilityMatrix::from_rows(rows),
            Mobilities::Equal(v) => MobilityMatrix::equal(self.n_phases(), *v),
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

/// Key/value pairs of one section, consumed as they are read so leftovers
/// can be reported as unknown keys.
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<Entry, ConfigError> {
        self.take(key).ok_or_else(|| {
            err(
                Some(self.line),
                Some(key),
                format!("missing in section [{}]", self.name),
            )
        })
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            Some((key, e)) => Err(err(
                Some(e.line),
                Some(&key),
                format!("unknown key in section [{}]", self.name),
            )),
            None => Ok(()),
        }
    }
}

fn parse_f64(e: &Entry, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| err(Some(e.line), Some(key), format!("malformed number '{}'", e.value)))?;
    if !v.is_finite() {
        return Err(err(Some(e.line), Some(key), "number must be finite"));
    }
    Ok(v)
}

fn parse_positive(e: &Entry, key: &str) -> Result<f64, ConfigError> {
    let v = parse_f64(e, key)?;
    if v <= 0.0 {
        return Err(err(Some(e.line), Some(key), format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn parse_count(e: &Entry, key: &str) -> Result<usize, ConfigError> {
    let v: usize = e
        .value
        .parse()
        .map_err(|_| err(Some(e.line), Some(key), format!("malformed integer '{}'", e.value)))?;
    if v == 0 {
        return Err(err(Some(e.line), Some(key), "must be at least 1"));
    }
    Ok(v)
}

fn parse_bool(e: &Entry, key: &str) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(err(
            Some(e.line),
            Some(key),
            format!("expected true or false, got '{other}'"),
        )),
    }
}

fn parse_list(text: &str, line: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(Some(line), Some(key), format!("malformed number '{s}'")))
        })
        .collect()
}

fn parse_rows(e: &Entry, key: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    e.value.split(';').map(|row| parse_list(row, e.line, key)).collect()
}

fn parse_square(e: &Entry, key: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    let rows = parse_rows(e, key)?;
    let n = rows.len();
    if n < 2 {
        return Err(err(Some(e.line), Some(key), "need at least 2 phases"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(err(
            Some(e.line),
            Some(key),
            format!("row {} has {} entries, expected {n}", i + 1, r.len()),
        ));
    }
    Ok(rows)
}

fn parse_width(e: &Entry, key: &str) -> Result<Width, ConfigError> {
    if e.value == "auto" {
        Ok(Width::Auto)
    } else {
        parse_positive(e, key).map(Width::Value)
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(Some(line), None, "unterminated section header"))?
                .trim()
                .to_string();
            if sections.iter().any(|s| s.name == name) {
                return Err(err(Some(line), None, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name,
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(Some(line), None, "expected 'key = value'"))?;
        let key = key.trim().to_string();
        let section = sections
            .last_mut()
            .ok_or_else(|| err(Some(line), Some(&key), "key outside any section"))?;
        if section.entries.contains_key(&key) {
            return Err(err(Some(line), Some(&key), "duplicate key"));
        }
        section.entries.insert(
            key,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    Ok(sections)
}

const SECTIONS: [&str; 8] = [
    "experiment",
    "grid",
    "tensions",
    "mobilities",
    "kernels",
    "initial",
    "output",
    "counterexample",
];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    for s in split_sections(text)? {
        if !SECTIONS.contains(&s.name.as_str()) {
            return Err(err(Some(s.line), None, format!("unknown section [{}]", s.name)));
        }
        sections.insert(s.name.clone(), s);
    }
    let mut section = |name: &str| {
        sections
            .remove(name)
            .ok_or_else(|| err(None, None, format!("missing section [{name}]")))
    };

    let mut s = section("experiment")?;
    let name = s.required("name")?.value;
    if name.is_empty() {
        return Err(err(Some(s.line), Some("name"), "must not be empty"));
    }
    let e = s.required("algorithm")?;
    let algorithm: Algorithm = e.value.parse().map_err(|_| {
        err(
            Some(e.line),
            Some("algorithm"),
            format!("expected es, eo or mbo, got '{}'", e.value),
        )
    })?;
    let dt = parse_positive(&s.required("dt")?, "dt")?;
    let steps = parse_count(&s.required("steps")?, "steps")?;
    let final_time = match s.take("final_time") {
        Some(e) => {
            let t = parse_positive(&e, "final_time")?;
            if (dt * steps as f64 - t).abs() > 1e-9 * t {
                return Err(err(
                    Some(e.line),
                    Some("final_time"),
                    format!("dt * steps = {} does not match {t}", dt * steps as f64),
                ));
            }
            Some(t)
        }
        None => None,
    };
    s.finish()?;
    let experiment = Experiment {
        name,
        algorithm,
        dt,
        steps,
        final_time,
    };

    let mut s = section("grid")?;
    let grid = Grid {
        nx: parse_count(&s.required("nx")?, "nx")?,
        ny: parse_count(&s.required("ny")?, "ny")?,
    };
    s.finish()?;

    let mut s = section("tensions")?;
    let source = s.required("source")?;
    let tensions = match source.value.as_str() {
        "explicit" => Tensions::Explicit(parse_square(&s.required("matrix")?, "matrix")?),
        "read_shockley_2d" => {
            let e = s.required("orientations")?;
            let orientations = parse_list(&e.value, e.line, "orientations")?;
            if orientations.len() < 2 {
                return Err(err(Some(e.line), Some("orientations"), "need at least 2 grains"));
            }
            if let Some(t) = orientations.iter().find(|t| t.abs() > 45.0) {
                return Err(err(
                    Some(e.line),
                    Some("orientations"),
                    format!("{t} lies outside [-45, 45] degrees"),
                ));
            }
            let theta_star = parse_positive(&s.required("theta_star")?, "theta_star")?;
            Tensions::ReadShockley2d {
                orientations,
                theta_star,
            }
        }
        "read_shockley_3d" => {
            let e = s.required("orientations")?;
            let rows = parse_rows(&e, "orientations")?;
            if rows.len() < 2 {
                return Err(err(Some(e.line), Some("orientations"), "need at least 2 grains"));
            }
            let mut orientations = Vec::with_capacity(rows.len());
            for (i, r) in rows.iter().enumerate() {
                let o: [f64; 4] = r.as_slice().try_into().map_err(|_| {
                    err(
                        Some(e.line),
                        Some("orientations"),
                        format!("grain {} needs axis_x, axis_y, axis_z, angle", i + 1),
                    )
                })?;
                orientations.push(o);
            }
            let theta_star = parse_positive(&s.required("theta_star")?, "theta_star")?;
            Tensions::ReadShockley3d {
                orientations,
                theta_star,
            }
        }
        other => {
            return Err(err(
                Some(source.line),
                Some("source"),
                format!("expected explicit, read_shockley_2d or read_shockley_3d, got '{other}'"),
            ))
        }
    };
    let tension_line = s.line;
    s.finish()?;

    let mut s = section("mobilities")?;
    let source = s.required("source")?;
    let mobilities = match source.value.as_str() {
        "explicit" => Mobilities::Explicit(parse_square(&s.required("matrix")?, "matrix")?),
        "equal" => Mobilities::Equal(match s.take("value") {
            Some(e) => parse_positive(&e, "value")?,
            None => 1.0,
        }),
        other => {
            return Err(err(
                Some(source.line),
                Some("source"),
                format!("expected explicit or equal, got '{other}'"),
            ))
        }
    };
    let mobility_line = s.line;
    s.finish()?;

    let kernels = match sections.remove("kernels") {
        Some(mut s) => {
            let mut k = Kernels::default();
            if let Some(e) = s.take("alpha") {
                k.alpha = parse_width(&e, "alpha")?;
            }
            if let Some(e) = s.take("beta") {
                k.beta = parse_width(&e, "beta")?;
                if let (Width::Value(a), Width::Value(b)) = (k.alpha, k.beta) {
                    if a <= b {
                        return Err(err(
                            Some(e.line),
                            Some("beta"),
                            format!("alpha = {a} must exceed beta = {b}"),
                        ));
                    }
                }
            }
            if let Some(e) = s.take("enforce_no_wetting") {
                k.enforce_no_wetting = parse_bool(&e, "enforce_no_wetting")?;
            }
            s.finish()?;
            k
        }
        None => Kernels::default(),
    };

    let mut s = sections
        .remove("initial")
        .ok_or_else(|| err(None, None, "missing section [initial]"))?;
    let e = s.required("preset")?;
    let initial = match e.value.as_str() {
        "grim_symmetric" => Preset::GrimSymmetric,
        "grim_asymmetric" => Preset::GrimAsymmetric,
        "disk" => {
            let centre = match s.take("centre") {
                Some(c) => match parse_list(&c.value, c.line, "centre")?.as_slice() {
                    &[x, y] => (x, y),
                    _ => return Err(err(Some(c.line), Some("centre"), "expected two coordinates")),
                },
                None => (0.5, 0.5),
            };
            let r = s.required("radius")?;
            let radius = parse_positive(&r, "radius")?;
            if radius >= 0.5 {
                return Err(err(Some(r.line), Some("radius"), "must be below 1/2"));
            }
            Preset::Disk { centre, radius }
        }
        "halfplane" => {
            let split = match s.take("split") {
                Some(x) => {
                    let v = parse_positive(&x, "split")?;
                    if v >= 1.0 {
                        return Err(err(Some(x.line), Some("split"), "must lie in (0, 1)"));
                    }
                    v
                }
                None => 0.5,
            };
            Preset::HalfPlane { split }
        }
        "voronoi" => {
            let seed = match s.take("seed") {
                Some(x) => x
                    .value
                    .parse()
                    .map_err(|_| err(Some(x.line), Some("seed"), format!("malformed integer '{}'", x.value)))?,
                None => 0,
            };
            Preset::Voronoi { seed }
        }
        other => {
            return Err(err(
                Some(e.line),
                Some("preset"),
                format!("expected grim_symmetric, grim_asymmetric, disk, halfplane or voronoi, got '{other}'"),
            ))
        }
    };
    let initial_line = s.line;
    s.finish()?;

    let output = match sections.remove("output") {
        Some(mut s) => {
            let mut o = Output::default();
            if let Some(e) = s.take("dir") {
                o.dir = e.value;
            }
            if let Some(e) = s.take("phase_maps") {
                o.phase_maps = parse_bool(&e, "phase_maps")?;
            }
            if let Some(e) = s.take("energy_csv") {
                if e.value.is_empty() || e.value.contains(['/', '\\']) {
                    return Err(err(Some(e.line), Some("energy_csv"), "must be a plain file name"));
                }
                o.energy_csv = e.value;
            }
            if let Some(e) = s.take("snapshot_every") {
                o.snapshot_every = parse_count(&e, "snapshot_every")?;
            }
            s.finish()?;
            o
        }
        None => Output::default(),
    };

    let counterexample = match sections.remove("counterexample") {
        Some(mut s) => {
            let delta1 = parse_positive(&s.required("delta1")?, "delta1")?;
            let delta2 = parse_positive(&s.required("delta2")?, "delta2")?;
            let epsilons = match s.take("epsilons") {
                Some(e) => {
                    let v = parse_list(&e.value, e.line, "epsilons")?;
                    if v.iter().any(|x| *x <= 0.0) {
                        return Err(err(Some(e.line), Some("epsilons"), "must be positive"));
                    }
                    v
                }
                None => vec![0.1, 0.01, 0.001],
            };
            s.finish()?;
            Some(Counterexample {
                delta1,
                delta2,
                epsilons,
            })
        }
        None => None,
    };

    let config = ExperimentConfig {
        experiment,
        grid,
        tensions,
        mobilities,
        kernels,
        initial,
        output,
        counterexample,
    };
    check_consistency(&config, tension_line, mobility_line, initial_line)?;
    Ok(config)
}

fn check_consistency(
    c: &ExperimentConfig,
    tension_line: usize,
    mobility_line: usize,
    initial_line: usize,
) -> Result<(), ConfigError> {
    let n = c.n_phases();
    c.tension_matrix()
        .map_err(|e| err(Some(tension_line), None, format!("invalid surface tensions: {e}")))?;
    if let Mobilities::Explicit(rows) = &c.mobilities {
        if rows.len() != n {
            return Err(err(
                Some(mobility_line),
                Some("matrix"),
                format!("{} phases, but the surface tensions have {n}", rows.len()),
            ));
        }
    }
    c.mobility_matrix()
        .map_err(|e| err(Some(mobility_line), None, format!("invalid mobilities: {e}")))?;
    if c.experiment.algorithm == Algorithm::Mbo && n != 2 {
        return Err(err(None, Some("algorithm"), format!("mbo needs 2 phases, got {n}")));
    }
    let (needs, what) = match c.initial {
        Preset::GrimSymmetric | Preset::GrimAsymmetric => (Some(3), "grim-reaper presets"),
        Preset::Disk { .. } | Preset::HalfPlane { .. } => (Some(2), "disk and halfplane presets"),
        Preset::Voronoi { .. } => (None, ""),
    };
    if let Some(k) = needs {
        if k != n {
            return Err(err(
                Some(initial_line),
                Some("preset"),
                format!("{what} need {k} phases, got {n}"),
            ));
        }
    }
    if matches!(c.initial, Preset::GrimSymmetric | Preset::GrimAsymmetric)
        && (c.grid.nx != c.grid.ny || !c.grid.nx.is_multiple_of(2))
    {
        return Err(err(
            Some(initial_line),
            Some("preset"),
            "grim-reaper presets need an even square grid",
        ));
    }
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn rows(m: &[Vec<f64>]) -> String {
    m.iter().map(|r| join(r)).collect::<Vec<_>>().join("; ")
}

fn width(w: Width) -> String {
    match w {
        Width::Auto => "auto".into(),
        Width::Value(v) => v.to_string(),
    }
}

/// Canonical text form; [`parse_config`] reads it back unchanged.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.experiment;
        writeln!(f, "[experiment]")?;
        writeln!(f, "name = {}", e.name)?;
        writeln!(f, "algorithm = {}", e.algorithm)?;
        writeln!(f, "dt = {}", e.dt)?;
        writeln!(f, "steps = {}", e.steps)?;
        if let Some(t) = e.final_time {
            writeln!(f, "final_time = {t}")?;
        }
        writeln!(f, "\n[grid]\nnx = {}\nny = {}", self.grid.nx, self.grid.ny)?;
        writeln!(f, "\n[tensions]")?;
        match &self.tensions {
            Tensions::Explicit(m) => writeln!(f, "source = explicit\nmatrix = {}", rows(m))?,
            Tensions::ReadShockley2d {
                orientations,
                theta_star,
            } => writeln!(
                f,
                "source = read_shockley_2d\norientations = {}\ntheta_star = {theta_star}",
                join(orientations)
            )?,
            Tensions::ReadShockley3d {
                orientations,
                theta_star,
            } => {
                let o: Vec<Vec<f64>> = orientations.iter().map(|r| r.to_vec()).collect();
                writeln!(
                    f,
                    "source = read_shockley_3d\norientations = {}\ntheta_star = {theta_star}",
                    rows(&o)
                )?
            }
        }
        writeln!(f, "\n[mobilities]")?;
        match &self.mobilities {
            Mobilities::Explicit(m) => writeln!(f, "source = explicit\nmatrix = {}", rows(m))?,
            Mobilities::Equal(v) => writeln!(f, "source = equal\nvalue = {v}")?,
        }
        let k = &self.kernels;
        writeln!(
            f,
            "\n[kernels]\nalpha = {}\nbeta = {}\nenforce_no_wetting = {}",
            width(k.alpha),
            width(k.beta),
            k.enforce_no_wetting
        )?;
        writeln!(f, "\n[initial]")?;
        match &self.initial {
            Preset::GrimSymmetric => writeln!(f, "preset = grim_symmetric")?,
            Preset::GrimAsymmetric => writeln!(f, "preset = grim_asymmetric")?,
            Preset::Disk { centre, radius } => writeln!(
                f,
                "preset = disk\ncentre = {}, {}\nradius = {radius}",
                centre.0, centre.1
            )?,
            Preset::HalfPlane { split } => writeln!(f, "preset = halfplane\nsplit = {split}")?,
            Preset::Voronoi { seed } => writeln!(f, "preset = voronoi\nseed = {seed}")?,
        }
        let o = &self.output;
        write!(
            f,
            "\n[output]\ndir = {}\nphase_maps = {}\nenergy_csv = {}\nsnapshot_every = {}\n",
            o.dir, o.phase_maps, o.energy_csv, o.snapshot_every
        )?;
        if let Some(c) = &self.counterexample {
            write!(
                f,
                "\n[counterexample]\ndelta1 = {}\ndelta2 = {}\nepsilons = {}\n",
                c.delta1,
                c.delta2,
                join(&c.epsilons)
            )?;
        }
        Ok(())
    }
}
