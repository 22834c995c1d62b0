//! Experiment runner: declarative JSON configs, the reference two-particle
//! scenario presets, time-series generation, locality audits, and CSV/JSON
//! export.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DetectionSchedule, Engine};
use crate::error::{Error, Result};
use crate::hamfun::HamiltonianFunctional;
use crate::measure::{self, Algorithm};
use crate::presets;
use crate::qstate::{re, BlochAxis, CMatrix, Observable, Sign, StateVector, Subsystem};

/// Initial state: a named preset or explicit complex amplitudes as
/// `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

/// One-particle Hamiltonian functional description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    Zero,
    Linear { matrix: Vec<Vec<[f64; 2]>> },
    CurieWeiss { coeff: f64 },
}

/// Measurement axis: a named Cartesian direction or explicit components.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Named(String),
    Components([f64; 3]),
}

impl Default for AxisSpec {
    fn default() -> Self {
        AxisSpec::Named("x".into())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub t1: f64,
    pub t2: f64,
}

/// Declarative description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub initial_state: StateSpec,
    pub functional1: FunctionalSpec,
    pub functional2: FunctionalSpec,
    pub schedule: ScheduleSpec,
    pub observables: Vec<String>,
    pub t_max: f64,
    pub dt: f64,
    pub algorithm: Algorithm,
    pub sample_stride: usize,
    #[serde(default)]
    pub axis1: AxisSpec,
    #[serde(default)]
    pub axis2: AxisSpec,
    /// Dynamics backend; defaults to the closed form when both functionals
    /// are mean-field, the integrator otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
}

impl ExperimentConfig {
    /// The reference scenario: Psi0 from the named preset, mean-field
    /// coefficients A = 8 and B = 1/2, detections at t1 = 3.5 and t2 = 8.
    pub fn vi_c(algorithm: Algorithm) -> Self {
        ExperimentConfig {
            initial_state: StateSpec::Named("vi_c".into()),
            functional1: FunctionalSpec::CurieWeiss { coeff: presets::VI_C_A },
            functional2: FunctionalSpec::CurieWeiss { coeff: presets::VI_C_B },
            schedule: ScheduleSpec { t1: presets::VI_C_T1, t2: presets::VI_C_T2 },
            observables: vec!["XX".into(), "XI".into(), "IX".into()],
            t_max: 10.0,
            dt: 1e-3,
            algorithm,
            sample_stride: 10,
            axis1: AxisSpec::default(),
            axis2: AxisSpec::default(),
            engine: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig {
            field: "<document>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<ValidatedConfig> {
        let psi0 = parse_state(&self.initial_state)?;
        let f1 = parse_functional(&self.functional1, "functional1")?;
        let f2 = parse_functional(&self.functional2, "functional2")?;
        if f1.dim() * f2.dim() != psi0.dim() {
            return Err(Error::InvalidConfig {
                field: "initial_state".into(),
                message: format!(
                    "state dimension {} does not match functional dimensions {}x{}",
                    psi0.dim(),
                    f1.dim(),
                    f2.dim()
                ),
            });
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(Error::InvalidConfig {
                field: "dt".into(),
                message: format!("dt must be in (0, 0.01], got {}", self.dt),
            });
        }
        for (name, t) in [("schedule.t1", self.schedule.t1), ("schedule.t2", self.schedule.t2)] {
            if !(0.0..=self.t_max).contains(&t) {
                return Err(Error::InvalidConfig {
                    field: name.into(),
                    message: format!("detection time {t} outside [0, t_max = {}]", self.t_max),
                });
            }
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig {
                field: "sample_stride".into(),
                message: "sample_stride must be positive".into(),
            });
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidConfig {
                field: "observables".into(),
                message: "at least one observable is required".into(),
            });
        }
        let observables = self
            .observables
            .iter()
            .map(|n| Ok((n.clone(), parse_observable(n)?)))
            .collect::<Result<Vec<_>>>()?;
        let sched = DetectionSchedule::new(self.schedule.t1, self.schedule.t2)?;
        let engine = self.engine.unwrap_or_else(|| dynamics::default_engine(&f1, &f2));
        Ok(ValidatedConfig {
            psi0,
            f1,
            f2,
            sched,
            observables,
            axis1: parse_axis(&self.axis1, "axis1")?,
            axis2: parse_axis(&self.axis2, "axis2")?,
            t_max: self.t_max,
            dt: self.dt,
            algorithm: self.algorithm,
            sample_stride: self.sample_stride,
            engine,
        })
    }
}

/// Parsed and checked form of an `ExperimentConfig`.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub psi0: StateVector,
    pub f1: HamiltonianFunctional,
    pub f2: HamiltonianFunctional,
    pub sched: DetectionSchedule,
    pub observables: Vec<(String, Observable)>,
    pub axis1: BlochAxis,
    pub axis2: BlochAxis,
    pub t_max: f64,
    pub dt: f64,
    pub algorithm: Algorithm,
    pub sample_stride: usize,
    pub engine: Engine,
}

fn parse_state(spec: &StateSpec) -> Result<StateVector> {
    match spec {
        StateSpec::Named(name) => match name.as_str() {
            "vi_c" => Ok(presets::vi_c_state()),
            "singlet" => Ok(presets::singlet()),
            other => Err(Error::InvalidConfig {
                field: "initial_state".into(),
                message: format!("unknown preset `{other}` (expected `vi_c` or `singlet`)"),
            }),
        },
        StateSpec::Amplitudes(pairs) => {
            let amps = pairs
                .iter()
                .map(|[r, i]| num_complex::Complex64::new(*r, *i))
                .collect();
            StateVector::new(amps).map_err(|e| Error::InvalidConfig {
                field: "initial_state".into(),
                message: e.to_string(),
            })
        }
    }
}

fn parse_functional(spec: &FunctionalSpec, field: &str) -> Result<HamiltonianFunctional> {
    match spec {
        FunctionalSpec::Zero => Ok(HamiltonianFunctional::zero(2)),
        FunctionalSpec::CurieWeiss { coeff } => Ok(HamiltonianFunctional::curie_weiss(*coeff)),
        FunctionalSpec::Linear { matrix } => {
            let n = matrix.len();
            if matrix.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidConfig {
                    field: field.into(),
                    message: "linear functional matrix must be square".into(),
                });
            }
            let mut m = CMatrix::zeros(n, n);
            for (i, row) in matrix.iter().enumerate() {
                for (j, [r, im]) in row.iter().enumerate() {
                    m[(i, j)] = num_complex::Complex64::new(*r, *im);
                }
            }
            let h0 = Observable::new(m).map_err(|e| Error::InvalidConfig {
                field: field.into(),
                message: e.to_string(),
            })?;
            Ok(HamiltonianFunctional::linear(h0))
        }
    }
}

fn parse_axis(spec: &AxisSpec, field: &str) -> Result<BlochAxis> {
    match spec {
        AxisSpec::Named(name) => match name.to_ascii_lowercase().as_str() {
            "x" => Ok(BlochAxis::X),
            "y" => Ok(BlochAxis::Y),
            "z" => Ok(BlochAxis::Z),
            other => Err(Error::InvalidConfig {
                field: field.into(),
                message: format!("unknown axis `{other}`"),
            }),
        },
        AxisSpec::Components(v) => {
            BlochAxis::from_unnormalized(*v).map_err(|e| Error::InvalidConfig {
                field: field.into(),
                message: e.to_string(),
            })
        }
    }
}

/// Two-letter Pauli string on the pair, e.g. "XX", "XI", "IZ".
pub fn parse_observable(name: &str) -> Result<Observable> {
    let bad = || Error::InvalidConfig {
        field: "observables".into(),
        message: format!("`{name}` is not a two-letter Pauli string over I, X, Y, Z"),
    };
    let chars: Vec<char> = name.chars().collect();
    if chars.len() != 2 {
        return Err(bad());
    }
    let single = |c: char| -> Result<Observable> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Observable::identity(2)),
            'X' => Ok(Observable::sigma_x()),
            'Y' => Ok(Observable::sigma_y()),
            'Z' => Ok(Observable::sigma_z()),
            _ => Err(bad()),
        }
    };
    single(chars[0])?.tensor(&single(chars[1])?)
}

/// Labelled samples of one observable average over the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub label: String,
    pub samples: Vec<(f64, f64)>,
}

impl TimeSeries {
    fn new(label: String, samples: Vec<(f64, f64)>) -> Result<Self> {
        for w in samples.windows(2) {
            if w[1].0 < w[0].0 {
                return Err(Error::InconsistentTable(format!(
                    "time series `{label}` abscissae decrease at t = {}",
                    w[1].0
                )));
            }
        }
        if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InconsistentTable(format!(
                "time series `{label}` contains non-finite samples"
            )));
        }
        Ok(TimeSeries { label, samples })
    }
}

/// One sample abscissa; `left_limit` marks the pre-measurement copy of a
/// detection time when it is sampled twice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub t: f64,
    pub left_limit: bool,
}

/// Uniform grid t = 0, h, 2h, ..., t_max with the detection times inserted
/// as exact sample points. Projection algorithms sample each detection time
/// twice (left and right limit).
pub fn sample_grid(cfg: &ValidatedConfig) -> Vec<GridPoint> {
    let h = cfg.dt * cfg.sample_stride as f64;
    let n = (cfg.t_max / h).round() as usize;
    let mut base: Vec<f64> = (0..=n).map(|k| k as f64 * h).filter(|&t| t <= cfg.t_max + 1e-12).collect();
    if let Some(last) = base.last() {
        if (cfg.t_max - last).abs() > 1e-9 {
            base.push(cfg.t_max);
        }
    }
    let detections = [cfg.sched.t1, cfg.sched.t2];
    // Snap near-coincident grid points onto the exact detection times.
    base.retain(|&t| detections.iter().all(|&d| (t - d).abs() > 1e-9));
    let twice = cfg.algorithm != Algorithm::Open;
    let mut grid: Vec<GridPoint> =
        base.into_iter().map(|t| GridPoint { t, left_limit: false }).collect();
    let mut seen = Vec::new();
    for d in detections {
        if d < 0.0 || d > cfg.t_max || seen.iter().any(|&s: &f64| (s - d).abs() < 1e-12) {
            continue;
        }
        seen.push(d);
        if twice {
            grid.push(GridPoint { t: d, left_limit: true });
        }
        grid.push(GridPoint { t: d, left_limit: false });
    }
    grid.sort_by(|a, b| {
        a.t.partial_cmp(&b.t)
            .expect("finite grid")
            .then(b.left_limit.cmp(&a.left_limit))
    });
    grid
}

/// Runs one experiment: one series per requested observable, plus, for the
/// projection algorithms, the two single-branch curves per observable.
pub fn run(config: &ExperimentConfig) -> Result<Vec<TimeSeries>> {
    let cfg = config.validate()?;
    let grid = sample_grid(&cfg);
    let branching = cfg.algorithm != Algorithm::Open;
    let mut out = Vec::new();
    for (label, obs) in &cfg.observables {
        let mut main = Vec::with_capacity(grid.len());
        let mut plus = Vec::with_capacity(grid.len());
        let mut minus = Vec::with_capacity(grid.len());
        for gp in &grid {
            let v = measure::ensemble_value(
                &cfg.psi0,
                &cfg.f1,
                &cfg.f2,
                cfg.sched,
                cfg.axis1,
                obs,
                gp.t,
                cfg.algorithm,
                cfg.engine,
                cfg.dt,
                gp.left_limit,
            )?;
            main.push((gp.t, v.value));
            if branching {
                match v.branches {
                    Some(b) => {
                        plus.push((gp.t, b[Sign::Plus.index()].1));
                        minus.push((gp.t, b[Sign::Minus.index()].1));
                    }
                    None => {
                        plus.push((gp.t, v.value));
                        minus.push((gp.t, v.value));
                    }
                }
            }
        }
        out.push(TimeSeries::new(label.clone(), main)?);
        if branching {
            out.push(TimeSeries::new(format!("{label}:+"), plus)?);
            out.push(TimeSeries::new(format!("{label}:-"), minus)?);
        }
    }
    Ok(out)
}

/// A single field override applied to a base config during an audit.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub field: String,
    pub value: String,
}

impl Perturbation {
    /// Parses `field=value`.
    pub fn parse(text: &str) -> Result<Self> {
        let (field, value) = text.split_once('=').ok_or_else(|| Error::InvalidConfig {
            field: "perturb".into(),
            message: format!("`{text}` is not of the form field=value"),
        })?;
        let p = Perturbation { field: field.trim().to_string(), value: value.trim().to_string() };
        p.particle()?;
        Ok(p)
    }

    /// Which particle the perturbed field belongs to.
    pub fn particle(&self) -> Result<Subsystem> {
        match self.field.as_str() {
            "A" | "functional1.coeff" | "t1" | "axis1" => Ok(Subsystem::One),
            "B" | "functional2.coeff" | "t2" | "axis2" => Ok(Subsystem::Two),
            other => Err(Error::InvalidConfig {
                field: "perturb".into(),
                message: format!(
                    "unknown field `{other}` (expected A, B, functional1.coeff, \
                     functional2.coeff, t1, t2, axis1, axis2)"
                ),
            }),
        }
    }

    fn number(&self) -> Result<f64> {
        self.value.parse::<f64>().map_err(|_| Error::InvalidConfig {
            field: self.field.clone(),
            message: format!("`{}` is not a number", self.value),
        })
    }

    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        match self.field.as_str() {
            "A" | "functional1.coeff" => {
                config.functional1 = FunctionalSpec::CurieWeiss { coeff: self.number()? };
            }
            "B" | "functional2.coeff" => {
                config.functional2 = FunctionalSpec::CurieWeiss { coeff: self.number()? };
            }
            "t1" => config.schedule.t1 = self.number()?,
            "t2" => config.schedule.t2 = self.number()?,
            "axis1" => config.axis1 = AxisSpec::Named(self.value.clone()),
            "axis2" => config.axis2 = AxisSpec::Named(self.value.clone()),
            other => {
                return Err(Error::InvalidConfig {
                    field: "perturb".into(),
                    message: format!("unknown field `{other}`"),
                })
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AuditEntry {
    pub description: String,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Outcome of a locality audit: per-perturbation maximal deviation of the
/// audited particle's reduced-density-matrix trajectory.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub target: Subsystem,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let particle = match self.target {
            Subsystem::One => 1,
            Subsystem::Two => 2,
        };
        writeln!(f, "locality audit, particle {particle}:")?;
        for e in &self.entries {
            writeln!(
                f,
                "  {:<28} max deviation {:>12.3e}  {}",
                e.description,
                e.max_deviation,
                if e.pass { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

pub const AUDIT_TOL: f64 = 1e-9;

/// Reruns the base config under each perturbation and reports the maximal
/// absolute deviation of the audited particle's reduced density matrix
/// along the sampling grid. Perturbations touching the audited particle's
/// own fields are rejected.
pub fn locality_audit(
    base: &ExperimentConfig,
    perturbations: &[Perturbation],
    target: Subsystem,
) -> Result<AuditReport> {
    for p in perturbations {
        if p.particle()? == target {
            return Err(Error::SelfPerturbation(format!("{}={}", p.field, p.value)));
        }
    }
    let base_traj = reduced_trajectory(base, target)?;
    let mut entries = Vec::new();
    for p in perturbations {
        let mut perturbed = base.clone();
        p.apply(&mut perturbed)?;
        let traj = reduced_trajectory(&perturbed, target)?;
        let mut dev: f64 = 0.0;
        for (a, b) in base_traj.iter().zip(traj.iter()) {
            dev = dev.max((a - b).iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
        entries.push(AuditEntry {
            description: format!("{} = {}", p.field, p.value),
            max_deviation: dev,
            pass: dev <= AUDIT_TOL,
        });
    }
    Ok(AuditReport { target, entries })
}

/// Reduced density matrix of one particle along the sampling grid, under the
/// config's algorithm (outcome-weighted branch mixture for the projection
/// algorithms). Reconstructed from the Bloch components, each of which is an
/// ensemble average.
fn reduced_trajectory(config: &ExperimentConfig, target: Subsystem) -> Result<Vec<CMatrix>> {
    let cfg = config.validate()?;
    let grid = sample_grid(&cfg);
    let paulis = [Observable::sigma_x(), Observable::sigma_y(), Observable::sigma_z()];
    let i2 = Observable::identity(2);
    let lifted: Vec<Observable> = paulis
        .iter()
        .map(|p| match target {
            Subsystem::One => p.tensor(&i2),
            Subsystem::Two => i2.tensor(p),
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(grid.len());
    for gp in &grid {
        let mut bloch = [0.0; 3];
        for (k, obs) in lifted.iter().enumerate() {
            bloch[k] = measure::ensemble_value(
                &cfg.psi0,
                &cfg.f1,
                &cfg.f2,
                cfg.sched,
                cfg.axis1,
                obs,
                gp.t,
                cfg.algorithm,
                cfg.engine,
                cfg.dt,
                gp.left_limit,
            )?
            .value;
        }
        let mut rho = CMatrix::identity(2, 2) * re(0.5);
        for (k, p) in paulis.iter().enumerate() {
            rho += p.matrix() * re(0.5 * bloch[k]);
        }
        out.push(rho);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Writes series to `path`. CSV: header `t,<label>,...`, 15 significant
/// digits, LF line endings, byte-deterministic for identical configs. JSON:
/// `{config_echo, series}`.
pub fn export(
    series: &[TimeSeries],
    format: ExportFormat,
    path: &Path,
    config_echo: Option<&ExperimentConfig>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::Io { path: path.display().to_string(), source: e };
    match format {
        ExportFormat::Csv => write_csv(series, &mut w).map_err(io_err)?,
        ExportFormat::Json => write_json(series, config_echo, &mut w)?,
    }
    w.flush().map_err(io_err)
}

fn write_csv(series: &[TimeSeries], w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "t")?;
    for s in series {
        write!(w, ",{}", s.label)?;
    }
    write!(w, "\n")?;
    let rows = series.first().map(|s| s.samples.len()).unwrap_or(0);
    for s in series {
        assert_eq!(s.samples.len(), rows, "series must share one grid");
    }
    for i in 0..rows {
        write!(w, "{}", fmt_sig15(series[0].samples[i].0))?;
        for s in series {
            debug_assert_eq!(s.samples[i].0, series[0].samples[i].0);
            write!(w, ",{}", fmt_sig15(s.samples[i].1))?;
        }
        write!(w, "\n")?;
    }
    Ok(())
}

/// 15 significant decimal digits.
fn fmt_sig15(v: f64) -> String {
    format!("{v:.14e}")
}

fn write_json(
    series: &[TimeSeries],
    config_echo: Option<&ExperimentConfig>,
    w: &mut impl Write,
) -> Result<()> {
    #[derive(Serialize)]
    struct SeriesOut<'a> {
        label: &'a str,
        samples: &'a [(f64, f64)],
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        #[serde(skip_serializing_if = "Option::is_none")]
        config_echo: Option<&'a ExperimentConfig>,
        series: Vec<SeriesOut<'a>>,
    }
    let doc = Doc {
        config_echo,
        series: series
            .iter()
            .map(|s| SeriesOut { label: &s.label, samples: &s.samples })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut *w, &doc).map_err(|e| Error::InvalidConfig {
        field: "<export>".into(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| Error::Io { path: "<export>".into(), source: e })
}
