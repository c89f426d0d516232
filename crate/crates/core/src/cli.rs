//! Command-line orchestration: configuration, validation and the run
//! pipeline (load, preprocess, measure, test, export).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cohesion::{self, MemberWeights, SchemeKind, WeightScheme, PAIR_WEIGHT_RULE};
use crate::comovement::{self, classify_phase, SmoothingSpec, PHASE_CONVENTION};
use crate::cwt::{self, make_scale_grid, FieldMeta, MorletParams, ScaleGrid};
use crate::error::{Error, Result};
use crate::export::{self, Column, LongTable};
use crate::matrix::Matrix;
use crate::significance::{
    self, PhaseCi, MIN_BOOTSTRAP_DRAWS, MIN_SIGNIFICANCE_DRAWS,
};
use crate::synth::{self, LagSchedule, SynthKind, SynthSpec, PAPER_SINES_NOISE};
use crate::timeseries::{self, make_panel, Panel, Preprocess, TimeSeries};

pub const POOLING_RULE: &str =
    "per-scale pooling of COI-interior null R^2 over all draws; rows without interior cells pool every cell";
pub const BOOTSTRAP_RULE: &str =
    "additive Gaussian noise with std noise_frac * sample std per series; bounds are type-7 quantiles of the \
     phase deviations from the point estimate, wrapped to [-pi, pi]";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Transform,
    Coherence,
    Phase,
    Rho,
    Cohesion,
    Synth,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Transform => "transform",
            CommandKind::Coherence => "coherence",
            CommandKind::Phase => "phase",
            CommandKind::Rho => "rho",
            CommandKind::Cohesion => "cohesion",
            CommandKind::Synth => "synth",
        }
    }
}

/// Where member weights come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "kebab-case")]
pub enum WeightSource {
    /// Two-column `timestamp,value` file for one member.
    Member { name: String, path: PathBuf },
    /// Timestamp column plus one column per member.
    Wide { path: PathBuf },
}

impl std::str::FromStr for WeightSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once('=') {
            Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok(WeightSource::Member {
                name: name.to_owned(),
                path: path.into(),
            }),
            Some(_) => Err(format!("expected NAME=PATH or PATH, got `{s}`")),
            None => Ok(WeightSource::Wide { path: s.into() }),
        }
    }
}

/// Parsed `--scheme` value.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemeArg {
    Equal,
    Fixed(String),
    TimeVarying,
}

pub fn parse_scheme(s: &str) -> std::result::Result<SchemeArg, String> {
    match s {
        "equal" => Ok(SchemeArg::Equal),
        "tv" | "time-varying" => Ok(SchemeArg::TimeVarying),
        _ => match s.strip_prefix("fixed:") {
            Some(at) if !at.is_empty() => Ok(SchemeArg::Fixed(at.to_owned())),
            _ => Err(format!("unknown scheme `{s}`; use equal, fixed:<timestamp> or tv")),
        },
    }
}

/// Everything a run needs. Serialized verbatim into the sidecar (minus the
/// output directory) so a run can be repeated from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub time_column: Option<String>,
    pub columns: Vec<String>,
    pub weights: Vec<WeightSource>,
    pub scheme: String,
    pub omega0: f64,
    /// Smallest scale in multiples of the sampling interval.
    pub s0: f64,
    pub dj: f64,
    pub smooth_time: f64,
    pub smooth_scale: f64,
    pub preprocess: Preprocess,
    pub mc_draws: Option<usize>,
    pub seed: Option<u64>,
    pub level: f64,
    pub synth: Option<SynthKind>,
    pub synth_n: usize,
    pub grid: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        RunConfig {
            command,
            input: None,
            time_column: None,
            columns: Vec::new(),
            weights: Vec::new(),
            scheme: "equal".into(),
            omega0: 6.0,
            s0: 2.0,
            dj: 1.0 / 12.0,
            smooth_time: 1.0,
            smooth_scale: 0.6,
            preprocess: Preprocess::None,
            mc_draws: None,
            seed: None,
            level: 0.95,
            synth: None,
            synth_n: 512,
            grid: false,
            out: PathBuf::from("."),
        }
    }

    fn pair_command(&self) -> bool {
        matches!(
            self.command,
            CommandKind::Coherence | CommandKind::Phase | CommandKind::Rho
        )
    }

    fn smoothing(&self) -> SmoothingSpec {
        SmoothingSpec {
            time_factor: self.smooth_time,
            scale_octaves: self.smooth_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

fn violation(field: &str, message: impl Into<String>) -> Violation {
    Violation {
        field: field.to_owned(),
        message: message.into(),
    }
}

/// Checks a configuration without touching the filesystem. Empty iff the
/// configuration is well-formed.
pub fn validate(c: &RunConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let positive = |x: f64| x > 0.0 && x.is_finite();
    if c.command == CommandKind::Synth {
        match &c.synth {
            None => v.push(violation("synth.kind", "a generator kind is required")),
            Some(kind) => {
                let random = !matches!(kind, SynthKind::PureSine { .. });
                if random && c.seed.is_none() {
                    v.push(violation("synth.seed", "random generators need --seed"));
                }
                if !matches!(kind, SynthKind::PaperSines { .. }) && c.synth_n < timeseries::MIN_LEN {
                    v.push(violation("synth.n", format!("length must be at least {}", timeseries::MIN_LEN)));
                }
                match kind {
                    SynthKind::PaperSines { noise_std } if !(*noise_std >= 0.0 && noise_std.is_finite()) => {
                        v.push(violation("synth.noise_std", "must be non-negative"))
                    }
                    SynthKind::LaggedNoise { lags } if lags.max_lag() >= c.synth_n => {
                        v.push(violation("synth.lags", "every lag must be below the series length"))
                    }
                    SynthKind::PureSine { period, .. } if !positive(*period) => {
                        v.push(violation("synth.period", "must be positive"))
                    }
                    SynthKind::WhiteNoise { std } if !positive(*std) => v.push(violation("synth.std", "must be positive")),
                    SynthKind::Ar1 { alpha, sigma } => {
                        if !(alpha.abs() < 1.0) {
                            v.push(violation("synth.alpha", "must lie in (-1, 1)"));
                        }
                        if !positive(*sigma) {
                            v.push(violation("synth.sigma", "must be positive"));
                        }
                    }
                    _ => {}
                }
            }
        }
        return v;
    }

    if c.input.is_none() {
        v.push(violation("input", "an input CSV is required"));
    }
    if !(c.omega0 >= 5.0 && c.omega0.is_finite()) {
        v.push(violation("morlet.omega0", "must be at least 5"));
    }
    if !(c.s0 >= 2.0 && c.s0.is_finite()) {
        v.push(violation("scale.s0", "smallest scale must be at least 2 sampling intervals"));
    }
    if !(c.dj > 0.0 && c.dj <= 0.25) {
        v.push(violation("scale.dj", "must lie in (0, 1/4]"));
    }
    if !positive(c.smooth_time) {
        v.push(violation("smoothing.time", "must be positive"));
    }
    if !positive(c.smooth_scale) {
        v.push(violation("smoothing.scale", "must be positive"));
    }
    let n_cols = c.columns.len();
    match c.command {
        CommandKind::Transform if n_cols > 1 => v.push(violation("columns", "transform takes one column")),
        _ if c.pair_command() && n_cols != 0 && n_cols != 2 => {
            v.push(violation("columns", format!("{} takes exactly two columns", c.command.name())))
        }
        CommandKind::Cohesion if n_cols == 1 => v.push(violation("panel.size", "cohesion needs at least two series")),
        _ => {}
    }
    if c.command == CommandKind::Cohesion {
        match parse_scheme(&c.scheme) {
            Err(e) => v.push(violation("cohesion.scheme", e)),
            Ok(SchemeArg::Equal) => {}
            Ok(_) if c.weights.is_empty() => {
                v.push(violation("cohesion.weights", "fixed and time-varying schemes need --weights"))
            }
            Ok(_) => {}
        }
    }
    if let Some(d) = c.mc_draws {
        let min = match c.command {
            CommandKind::Coherence => Some(MIN_SIGNIFICANCE_DRAWS),
            CommandKind::Phase => Some(MIN_BOOTSTRAP_DRAWS),
            _ => None,
        };
        match min {
            None => v.push(violation(
                "significance.draws",
                format!("{} has no Monte Carlo step", c.command.name()),
            )),
            Some(m) if d < m => v.push(violation("significance.draws", format!("need at least {m} draws"))),
            Some(_) => {}
        }
        if c.seed.is_none() {
            v.push(violation("significance.seed", "Monte Carlo runs need --seed"));
        }
    }
    if !(c.level > 0.0 && c.level < 1.0) {
        v.push(violation("significance.level", "must lie in (0, 1)"));
    }
    v
}

/// Files written by a run, relative to the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn write(&mut self, name: String, bytes: &[u8]) -> Result<()> {
        export::write_atomic(&self.dir.join(&name), bytes)?;
        self.files.push(name.into());
        Ok(())
    }
}

fn canonical(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).map_err(|e| Error::io(p, e))
}

/// Echoed configuration with absolute input paths.
fn echo_config(c: &RunConfig) -> Result<RunConfig> {
    let mut e = c.clone();
    if let Some(p) = &c.input {
        e.input = Some(canonical(p)?);
    }
    e.weights = c
        .weights
        .iter()
        .map(|w| {
            Ok(match w {
                WeightSource::Member { name, path } => WeightSource::Member {
                    name: name.clone(),
                    path: canonical(path)?,
                },
                WeightSource::Wide { path } => WeightSource::Wide { path: canonical(path)? },
            })
        })
        .collect::<Result<_>>()?;
    Ok(e)
}

fn load_series(c: &RunConfig) -> Result<Vec<TimeSeries>> {
    let path = c.input.as_ref().ok_or_else(|| Error::Config("missing input".into()))?;
    let raw = timeseries::load_columns_csv(path, c.time_column.as_deref(), &c.columns)?;
    raw.iter().map(|s| timeseries::preprocess(s, c.preprocess)).collect()
}

fn grid_meta_json(meta: &FieldMeta) -> serde_json::Value {
    let a = &meta.axis;
    json!({
        "time_axis": {
            "unit": a.unit,
            "t0": a.t0,
            "step": a.step,
            "n": a.n,
            "first": a.unit.label(a.t0),
            "last": a.unit.label(a.t0 + (a.n as i64 - 1) * a.step),
        },
        "morlet": {
            "omega0": meta.params.omega0,
            "envelope_var": meta.params.envelope_var,
            "fourier_factor": meta.params.fourier_factor(),
        },
        "scale_grid": {
            "s0": meta.grid.s0,
            "dj": meta.grid.dj,
            "steps": meta.grid.steps,
            "dt": meta.grid.dt,
            "scales": meta.grid.scales,
            "periods": meta.periods(),
        },
        "coi": meta.coi,
    })
}

fn period_grid(series: &TimeSeries, c: &RunConfig) -> Result<(MorletParams, ScaleGrid)> {
    let p = MorletParams::new(c.omega0, 0.5)?;
    let dt = series.dt();
    let g = make_scale_grid(series.len(), dt, c.s0 * dt, c.dj)?;
    Ok((p, g))
}

fn two(series: Vec<TimeSeries>, command: CommandKind) -> Result<(TimeSeries, TimeSeries)> {
    if series.len() != 2 {
        return Err(Error::Config(format!(
            "{} needs exactly two series, input provides {}",
            command.name(),
            series.len()
        )));
    }
    let mut it = series.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap()))
}

fn quadrant_labels(phase: &Matrix<f64>) -> Matrix<String> {
    phase.map(|&v| {
        classify_phase(v)
            .ok()
            .and_then(|q| serde_json::to_value(q).ok())
            .and_then(|j| j.as_str().map(str::to_owned))
            .unwrap_or_default()
    })
}

/// Runs a validated configuration and writes its artifacts.
pub fn run(c: &RunConfig) -> Result<RunReport> {
    let problems = validate(c);
    if !problems.is_empty() {
        let text: Vec<String> = problems.iter().map(|p| format!("{}: {}", p.field, p.message)).collect();
        return Err(Error::Config(text.join("; ")));
    }
    let echo = echo_config(c)?;
    let mut out = Outputs {
        dir: &c.out,
        files: Vec::new(),
    };
    let stem = c.command.name();
    let mut sidecar = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": echo,
    });

    if c.command == CommandKind::Synth {
        let spec = SynthSpec {
            kind: c.synth.clone().expect("validated"),
            n: c.synth_n,
            seed: c.seed.unwrap_or(0),
        };
        let series = synth::generate(&spec)?;
        out.write(format!("{stem}.csv"), &export::series_bytes(&series)?)?;
        sidecar["synth"] = serde_json::to_value(&spec)?;
        sidecar["outputs"] = json!(out.files);
        out.write(format!("{stem}.json"), &export::json_bytes(&sidecar)?)?;
        return Ok(RunReport { files: out.files });
    }

    let series = load_series(c)?;
    let (p, g) = period_grid(&series[0], c)?;
    let spec = c.smoothing();
    let draws = c.mc_draws;
    let seed = c.seed.unwrap_or(0);

    let (meta, primary, mut columns) = match c.command {
        CommandKind::Transform => {
            if series.len() != 1 {
                return Err(Error::Config(format!(
                    "transform needs one series, input provides {}; select one with --columns",
                    series.len()
                )));
            }
            let f = cwt::transform(&series[0], &p, &g)?;
            let power = cwt::power(&f);
            let cols = vec![
                ("power".to_owned(), Column::Real(power.clone())),
                ("re".to_owned(), Column::Real(f.values.map(|z| z.re))),
                ("im".to_owned(), Column::Real(f.values.map(|z| z.im))),
            ];
            (f.meta, power, cols)
        }
        CommandKind::Coherence | CommandKind::Phase | CommandKind::Rho => {
            let (x, y) = two(series, c.command)?;
            let f = comovement::pair_fields(&x, &y, &p, &g, &spec)?;
            sidecar["pair"] = json!([x.name(), y.name()]);
            sidecar["phase_convention"] = json!(PHASE_CONVENTION);
            let bounds = match draws {
                Some(d) if c.command != CommandKind::Rho => {
                    let ci = PhaseCi {
                        level: c.level,
                        draws: d,
                        ..PhaseCi::default()
                    };
                    let b = significance::phase_bootstrap(&x, &y, &p, &g, &spec, &ci, seed)?;
                    sidecar["bootstrap"] = json!({
                        "draws": d, "seed": seed, "level": ci.level, "noise_frac": ci.noise_frac, "rule": BOOTSTRAP_RULE,
                    });
                    b.ci
                }
                _ => None,
            };
            match c.command {
                CommandKind::Coherence => {
                    let mut cols = vec![("value".to_owned(), Column::Real(f.coherence.values.clone()))];
                    let mut tail = Vec::new();
                    if let Some(d) = draws {
                        let sig = significance::coherence_significance_at(&x, &y, &p, &g, &spec, d, seed, c.level)?;
                        sidecar["significance"] = json!({
                            "draws": d, "seed": seed, "level": c.level, "null": "independent AR(1) per series",
                            "pooling": POOLING_RULE, "coi_pooled": sig.coi_pooled,
                        });
                        tail.push(("sig_threshold".to_owned(), Column::PerRow(sig.threshold)));
                        tail.push(("significant".to_owned(), Column::Flag(sig.mask)));
                    }
                    tail.push(("phase".to_owned(), Column::Real(f.phase.values.clone())));
                    if let Some(b) = bounds {
                        tail.push(("ci_lo".to_owned(), Column::Real(b.lo)));
                        tail.push(("ci_hi".to_owned(), Column::Real(b.hi)));
                    }
                    cols.push(("in_coi".to_owned(), Column::Flag(f.coherence.meta.coi_mask())));
                    cols.extend(tail);
                    (f.coherence.meta, f.coherence.values, cols)
                }
                CommandKind::Phase => {
                    let mut cols = vec![
                        ("value".to_owned(), Column::Real(f.phase.values.clone())),
                        ("in_coi".to_owned(), Column::Flag(f.phase.meta.coi_mask())),
                        ("quadrant".to_owned(), Column::Text(quadrant_labels(&f.phase.values))),
                    ];
                    if let Some(b) = bounds {
                        cols.push(("ci_lo".to_owned(), Column::Real(b.lo)));
                        cols.push(("ci_hi".to_owned(), Column::Real(b.hi)));
                        cols.push(("ci_width".to_owned(), Column::Real(b.width)));
                    }
                    (f.phase.meta, f.phase.values, cols)
                }
                _ => {
                    let cols = vec![("value".to_owned(), Column::Real(f.rho.values.clone()))];
                    (f.rho.meta, f.rho.values, cols)
                }
            }
        }
        CommandKind::Cohesion => {
            let panel = make_panel(series)?;
            let scheme = build_scheme(c, &panel)?;
            let rho = cohesion::pairwise_rho(&panel, &p, &g, &spec)?;
            let field = cohesion::cohesion_from_rho(&panel, &rho, &scheme)?;
            sidecar["cohesion"] = json!({
                "scheme": scheme.label(&field.meta),
                "members": field.members,
                "pair_weight_rule": PAIR_WEIGHT_RULE,
                "undefined_cells": "pairs with undefined rho are dropped from numerator and denominator",
            });
            let cols = vec![("value".to_owned(), Column::Real(field.values.clone()))];
            (field.meta, field.values, cols)
        }
        CommandKind::Synth => unreachable!(),
    };
    if !columns.iter().any(|(n, _)| n == "in_coi") {
        columns.push(("in_coi".to_owned(), Column::Flag(meta.coi_mask())));
    }
    for (k, v) in grid_meta_json(&meta).as_object().expect("object") {
        sidecar[k] = v.clone();
    }
    LongTable {
        meta: &meta,
        columns,
    }
    .to_bytes()
    .and_then(|b| out.write(format!("{stem}.csv"), &b))?;
    if c.grid {
        out.write(format!("{stem}_grid.csv"), &export::grid_bytes(&meta, &primary)?)?;
    }
    sidecar["outputs"] = json!(out.files);
    out.write(format!("{stem}.json"), &export::json_bytes(&sidecar)?)?;
    Ok(RunReport { files: out.files })
}

fn build_scheme(c: &RunConfig, panel: &Panel) -> Result<WeightScheme> {
    let arg = parse_scheme(&c.scheme).map_err(Error::Config)?;
    if arg == SchemeArg::Equal {
        return Ok(WeightScheme::equal());
    }
    let mut raw = Vec::new();
    for w in &c.weights {
        match w {
            WeightSource::Member { name, path } => raw.push(timeseries::load_weights_csv(path, name)?),
            WeightSource::Wide { path } => raw.extend(timeseries::load_weights_wide(path)?),
        }
    }
    let source = panel
        .members()
        .iter()
        .map(|m| {
            let w = raw
                .iter()
                .find(|w| w.name() == m.name())
                .ok_or_else(|| Error::Config(format!("no weights for `{}`", m.name())))?;
            Ok(MemberWeights {
                name: m.name().to_owned(),
                values: timeseries::resample_weights(w, panel)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match arg {
        SchemeArg::Fixed(at) => {
            let tick = timeseries::stamp_tick(timeseries::parse_stamp(&at)?, panel.first().unit())?;
            WeightScheme::fixed(tick, source)
        }
        _ => WeightScheme {
            kind: SchemeKind::TimeVarying,
            source,
        },
    })
}

/// Reads the configuration echoed in a sidecar.
pub fn config_from_sidecar(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = v
        .get("config")
        .cloned()
        .ok_or_else(|| Error::Config(format!("{}: no `config` entry", path.display())))?;
    Ok(serde_json::from_value(cfg)?)
}

// ---- argument parsing ----

#[derive(Debug, Parser)]
#[command(name = "wavesync", version, about = "Wavelet coherence, phase and cohesion for time series panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Continuous wavelet transform of one series.
    Transform(AnalysisArgs),
    /// Squared wavelet coherence of two series.
    Coherence(AnalysisArgs),
    /// Phase difference of two series.
    Phase(AnalysisArgs),
    /// Real wavelet correlation of two series.
    Rho(AnalysisArgs),
    /// Weighted cohesion of a panel.
    Cohesion(AnalysisArgs),
    /// Generate synthetic series.
    Synth(SynthArgs),
    /// Repeat a run from the configuration stored in its JSON sidecar.
    Rerun {
        sidecar: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Input CSV with a header row; the first column holds timestamps.
    #[arg(long)]
    pub input: PathBuf,
    /// Timestamp column (default: first column).
    #[arg(long)]
    pub time_column: Option<String>,
    /// Value columns, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Weight files: NAME=PATH for a two-column file, or PATH for a wide file.
    #[arg(long)]
    pub weights: Vec<WeightSource>,
    /// equal, fixed:<timestamp> or tv.
    #[arg(long, default_value = "equal")]
    pub scheme: String,
    #[arg(long, default_value_t = 6.0)]
    pub omega0: f64,
    /// Smallest scale in sampling intervals.
    #[arg(long, default_value_t = 2.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 1.0 / 12.0)]
    pub dj: f64,
    /// Gaussian time smoothing std as a multiple of the scale.
    #[arg(long, default_value_t = 1.0)]
    pub smooth_time: f64,
    /// Scale smoothing width in octaves.
    #[arg(long, default_value_t = 0.6)]
    pub smooth_scale: f64,
    #[arg(long, default_value = "none")]
    pub preprocess: Preprocess,
    /// Monte Carlo draws for significance and phase intervals.
    #[arg(long)]
    pub mc_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the primary field as a period × time grid.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKindArg {
    PaperSines,
    LaggedNoise,
    RandomWalkPair,
    PureSine,
    WhiteNoise,
    Ar1,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub kind: SynthKindArg,
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = PAPER_SINES_NOISE)]
    pub noise_std: f64,
    /// Lag schedule as start:lag pairs, e.g. 0:1,201:4,351:8.
    #[arg(long)]
    pub lags: Option<String>,
    #[arg(long, default_value_t = 32.0)]
    pub period: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
    #[arg(long, default_value_t = 1.0)]
    pub std: f64,
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_lags(s: &str) -> Result<LagSchedule> {
    let breaks = s
        .split(',')
        .map(|part| {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("lag entry `{part}` is not start:lag")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("`{x}` in lag entry `{part}` is not a count")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LagSchedule { breaks })
}

impl AnalysisArgs {
    pub fn into_config(self, command: CommandKind) -> RunConfig {
        RunConfig {
            command,
            input: Some(self.input),
            time_column: self.time_column,
            columns: self.columns,
            weights: self.weights,
            scheme: self.scheme,
            omega0: self.omega0,
            s0: self.s0,
            dj: self.dj,
            smooth_time: self.smooth_time,
            smooth_scale: self.smooth_scale,
            preprocess: self.preprocess,
            mc_draws: self.mc_draws,
            seed: self.seed,
            level: self.level,
            synth: None,
            synth_n: 512,
            grid: self.grid,
            out: self.out,
        }
    }
}

impl SynthArgs {
    pub fn into_config(self) -> Result<RunConfig> {
        let kind = match self.kind {
            SynthKindArg::PaperSines => SynthKind::PaperSines {
                noise_std: self.noise_std,
            },
            SynthKindArg::LaggedNoise => SynthKind::LaggedNoise {
                lags: match &self.lags {
                    Some(s) => parse_lags(s)?,
                    None => LagSchedule::default(),
                },
            },
            SynthKindArg::RandomWalkPair => SynthKind::RandomWalkPair,
            SynthKindArg::PureSine => SynthKind::PureSine {
                period: self.period,
                phase: self.phase,
            },
            SynthKindArg::WhiteNoise => SynthKind::WhiteNoise { std: self.std },
            SynthKindArg::Ar1 => SynthKind::Ar1 {
                alpha: self.alpha,
                sigma: self.sigma,
            },
        };
        let mut c = RunConfig::new(CommandKind::Synth);
        c.synth = Some(kind);
        c.synth_n = self.n;
        c.seed = self.seed;
        c.out = self.out;
        Ok(c)
    }
}

impl Cli {
    /// Configuration for an analysis or synth command; `None` for `rerun`.
    pub fn into_config(self) -> Result<RunConfig> {
        let (kind, args) = match self.command {
            CliCommand::Transform(a) => (CommandKind::Transform, a),
            CliCommand::Coherence(a) => (CommandKind::Coherence, a),
            CliCommand::Phase(a) => (CommandKind::Phase, a),
            CliCommand::Rho(a) => (CommandKind::Rho, a),
            CliCommand::Cohesion(a) => (CommandKind::Cohesion, a),
            CliCommand::Synth(s) => return s.into_config(),
            CliCommand::Rerun { sidecar, out } => {
                let mut c = config_from_sidecar(&sidecar)?;
                c.out = out;
                return Ok(c);
            }
        };
        Ok(args.into_config(kind))
    }
}
