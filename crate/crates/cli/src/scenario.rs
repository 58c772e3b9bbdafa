//! Scenario files: TOML with the tables `[grid]`, `[setup]`, `[ladder]`,
//! `[[profile]]` and `[experiment]`. Unknown keys are rejected, and keys that
//! the chosen experiment kind does not read are rejected too.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nls_core::diagnostics::{EpsilonLadder, RunOptions, VerdictThresholds};
use nls_core::evolution::{BlowUpGuard, Nonlinearity};
use nls_core::extraction::ExtractionConfig;
use nls_core::profiles::{ProfileSpec, ScaleExpr, Waveform};
use nls_core::Grid;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    output: Option<String>,
    grid: Option<RawGrid>,
    setup: Option<RawSetup>,
    ladder: Option<RawLadder>,
    #[serde(default)]
    profile: Vec<RawProfile>,
    experiment: RawExperiment,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    points: usize,
    half_width: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSetup {
    lambda: f64,
    epsilon: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLadder {
    values: Option<Vec<f64>>,
    top: Option<f64>,
    ratio: Option<f64>,
    count: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    waveform: String,
    amplitude: Option<f64>,
    h: String,
    t0: Option<String>,
    x0: Option<Vec<String>>,
    xi0: Option<Vec<String>>,
    admissible: Option<bool>,
}

macro_rules! raw_experiment {
    ($($field:ident : $ty:ty),* $(,)?) => {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        #[allow(non_snake_case)]
        struct RawExperiment {
            kind: String,
            $($field: Option<$ty>,)*
        }

        impl RawExperiment {
            /// Names of the optional keys present in the file.
            fn present(&self) -> Vec<&'static str> {
                let mut keys = Vec::new();
                $(if self.$field.is_some() { keys.push(stringify!($field)); })*
                keys
            }
        }
    };
}

raw_experiment! {
    T: f64,
    dt: f64,
    snapshots: usize,
    steps: usize,
    expect: String,
    data: String,
    data_file: String,
    amplitude: f64,
    width: f64,
    center: Vec<f64>,
    frequency: Vec<f64>,
    t0: f64,
    remainder_norm: f64,
    window: [f64; 2],
    samples: usize,
    times: Vec<f64>,
    tolerance: f64,
    slope_threshold: f64,
    criterion_terminal: f64,
    deviation_terminal: f64,
    criterion_slope_range: [f64; 2],
    contrast_slope_range: [f64; 2],
    max_terminal_deviation: f64,
    min_deviation: f64,
    max_criterion_spread: f64,
    min_decrease: f64,
    check_single: bool,
    expect_bubbles: usize,
    max_residual: f64,
    max_defect: f64,
    max_bubbles: usize,
    delta: f64,
    min_dominant_fraction: f64,
    max_scale_spread: f64,
    max_strip_gain: f64,
    max_band: f64,
    max_mass_drift: f64,
    min_order_ratio: f64,
    scenario: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Simulate,
    Linearizability,
    Superposition,
    BlowupRate,
    BlowupDecompose,
    Extract,
    Norms,
    Conservation,
    FreeOracle,
    Soliton,
    Scaling,
    Strichartz,
    Determinism,
}

impl Kind {
    pub const ALL: [Kind; 13] = [
        Kind::Simulate,
        Kind::Linearizability,
        Kind::Superposition,
        Kind::BlowupRate,
        Kind::BlowupDecompose,
        Kind::Extract,
        Kind::Norms,
        Kind::Conservation,
        Kind::FreeOracle,
        Kind::Soliton,
        Kind::Scaling,
        Kind::Strichartz,
        Kind::Determinism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Linearizability => "linearizability",
            Kind::Superposition => "superposition",
            Kind::BlowupRate => "blowup-rate",
            Kind::BlowupDecompose => "blowup-decompose",
            Kind::Extract => "extract",
            Kind::Norms => "norms",
            Kind::Conservation => "conservation",
            Kind::FreeOracle => "free-oracle",
            Kind::Soliton => "soliton",
            Kind::Scaling => "scaling",
            Kind::Strichartz => "strichartz",
            Kind::Determinism => "determinism",
        }
    }

    fn needs_grid(self) -> bool {
        !matches!(self, Kind::Determinism)
    }

    fn uses_data(self) -> bool {
        matches!(
            self,
            Kind::Simulate | Kind::Linearizability | Kind::Extract | Kind::Norms | Kind::Conservation | Kind::Scaling
        )
    }

    /// Optional `[experiment]` keys read by this kind.
    fn keys(self) -> &'static [&'static str] {
        const DATA: [&str; 7] = ["data", "data_file", "amplitude", "width", "center", "frequency", "t0"];
        match self {
            Kind::Simulate => &["data", "data_file", "amplitude", "width", "center", "frequency", "t0", "T", "dt", "snapshots", "expect"],
            Kind::Linearizability => &[
                "data",
                "data_file",
                "amplitude",
                "width",
                "center",
                "frequency",
                "t0",
                "T",
                "dt",
                "snapshots",
                "expect",
                "slope_threshold",
                "criterion_terminal",
                "deviation_terminal",
                "criterion_slope_range",
                "contrast_slope_range",
                "max_terminal_deviation",
                "min_deviation",
                "max_criterion_spread",
            ],
            Kind::Superposition => &["T", "dt", "snapshots", "remainder_norm", "min_decrease", "check_single"],
            Kind::BlowupRate => &["T", "window", "samples", "tolerance", "max_mass_drift"],
            Kind::BlowupDecompose => &[
                "T",
                "times",
                "max_bubbles",
                "delta",
                "min_dominant_fraction",
                "max_scale_spread",
                "max_strip_gain",
            ],
            Kind::Extract => &[
                "data",
                "data_file",
                "amplitude",
                "width",
                "center",
                "frequency",
                "t0",
                "max_bubbles",
                "delta",
                "expect_bubbles",
                "max_residual",
                "max_defect",
            ],
            Kind::Norms => &DATA,
            Kind::Conservation => &[
                "data",
                "data_file",
                "amplitude",
                "width",
                "center",
                "frequency",
                "t0",
                "dt",
                "steps",
                "max_mass_drift",
                "min_order_ratio",
            ],
            Kind::FreeOracle => &["width", "center", "frequency", "times", "tolerance"],
            Kind::Soliton => &["T", "dt", "tolerance"],
            Kind::Scaling => &["data", "data_file", "amplitude", "width", "center", "frequency", "t0", "T", "dt", "tolerance"],
            Kind::Strichartz => &["max_band"],
            Kind::Determinism => &["scenario"],
        }
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
            CliError::validation("experiment.kind", format!("unknown kind '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial data of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Zero,
    /// `a·w^{-n/2}e^{-|x-c|²/(2w²)}e^{iξ·x}`, the same field at every ε.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
        frequency: Vec<f64>,
    },
    /// `a·Q`, the same field at every ε.
    GroundState { amplitude: f64 },
    /// `ε^{-n/4}U(-t₀, x/√ε)` where `U` solves the unit equation with
    /// `U(0) = a·Q`; the grid is the unit-scale grid.
    Concentrating { amplitude: f64, t0: f64 },
    /// Sum of the `[[profile]]` entries, rescaled to ε.
    Profiles,
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct ProfileEntry {
    pub spec: ProfileSpec,
    pub waveform: Waveform,
    pub amplitude: f64,
}

/// Pass criteria attached to an experiment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checks {
    pub tolerance: Option<f64>,
    pub criterion_slope_range: Option<(f64, f64)>,
    pub contrast_slope_range: Option<(f64, f64)>,
    pub max_terminal_deviation: Option<f64>,
    pub min_deviation: Option<f64>,
    pub max_criterion_spread: Option<f64>,
    pub min_decrease: Option<f64>,
    pub check_single: bool,
    pub expect_bubbles: Option<usize>,
    pub max_residual: Option<f64>,
    pub max_defect: Option<f64>,
    pub min_dominant_fraction: Option<f64>,
    pub max_scale_spread: Option<f64>,
    pub max_strip_gain: Option<f64>,
    pub max_band: Option<f64>,
    pub max_mass_drift: Option<f64>,
    pub min_order_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    /// The scenario file itself.
    pub path: PathBuf,
    /// Raw file contents, copied into the output directory.
    pub source: String,
    pub output: PathBuf,
    pub kind: Kind,
    pub grid: Option<Grid>,
    pub nonlinearity: Nonlinearity,
    pub epsilon: f64,
    pub ladder: EpsilonLadder,
    pub profiles: Vec<ProfileEntry>,
    pub data: Option<DataSource>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub snapshots: Option<usize>,
    pub steps: Option<usize>,
    pub expect: Option<String>,
    pub thresholds: VerdictThresholds,
    pub remainder_norm: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub samples: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub extraction: ExtractionConfig,
    pub checks: Checks,
    /// Nested scenario for determinism runs.
    pub nested: Option<PathBuf>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.grid.map_or(1, |g| g.dim())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid
            .ok_or_else(|| CliError::validation("grid", format!("kind '{}' needs a [grid] table", self.kind)))
    }

    pub fn run_options(&self) -> RunOptions {
        let mut opts = RunOptions {
            dt: self.dt,
            guard: BlowUpGuard::default(),
            ..RunOptions::default()
        };
        if let Some(s) = self.snapshots {
            opts.snapshots = s;
        }
        opts
    }
}

fn parse_expr(field: &str, text: &str) -> Result<ScaleExpr> {
    text.parse::<ScaleExpr>()
        .map_err(|e| CliError::validation(field, e.to_string()))
}

fn positive(field: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::validation(field, format!("must be positive, got {x}"))),
        other => Ok(other),
    }
}

fn range(field: &str, v: Option<[f64; 2]>) -> Result<Option<(f64, f64)>> {
    match v {
        Some([a, b]) if !(a <= b) => Err(CliError::validation(field, format!("empty range [{a}, {b}]"))),
        Some([a, b]) => Ok(Some((a, b))),
        None => Ok(None),
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let source = std::fs::read_to_string(path)?;
    parse_scenario_str(&source, path)
}

/// Parses scenario text; relative file references resolve against the
/// directory of `path`.
pub fn parse_scenario_str(source: &str, path: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(source).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let resolve = |p: &str| -> PathBuf {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    if raw.name.is_empty() || !raw.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(CliError::validation("name", "use letters, digits, '_' or '-'"));
    }
    let kind: Kind = raw.experiment.kind.parse()?;
    for key in raw.experiment.present() {
        if !kind.keys().contains(&key) {
            return Err(CliError::validation(
                format!("experiment.{key}"),
                format!("not used by kind '{kind}'"),
            ));
        }
    }
    let e = &raw.experiment;

    let grid = match &raw.grid {
        Some(g) => Some(Grid::new(g.dim, g.points, g.half_width).map_err(|err| CliError::validation("grid", err.to_string()))?),
        None if kind.needs_grid() && e.data_file.is_none() => {
            return Err(CliError::validation("grid", format!("kind '{kind}' needs a [grid] table")))
        }
        None => None,
    };
    let dim = grid.map_or(1, |g| g.dim());

    let (nonlinearity, epsilon) = match &raw.setup {
        Some(s) => {
            let nl = Nonlinearity::from_lambda(s.lambda).map_err(|err| CliError::validation("setup.lambda", err.to_string()))?;
            let eps = s.epsilon.unwrap_or(1.0);
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(CliError::validation("setup.epsilon", format!("must lie in (0, 1], got {eps}")));
            }
            (nl, eps)
        }
        None if kind == Kind::Determinism || kind == Kind::FreeOracle || kind == Kind::Strichartz => {
            (Nonlinearity::Defocusing, 1.0)
        }
        None if kind == Kind::BlowupRate || kind == Kind::BlowupDecompose || kind == Kind::Soliton => {
            (Nonlinearity::Focusing, 1.0)
        }
        None => return Err(CliError::validation("setup", format!("kind '{kind}' needs a [setup] table"))),
    };
    if matches!(kind, Kind::Soliton | Kind::BlowupRate | Kind::BlowupDecompose) && nonlinearity != Nonlinearity::Focusing {
        return Err(CliError::validation("setup.lambda", format!("kind '{kind}' needs lambda = -1")));
    }

    let ladder = match &raw.ladder {
        None => EpsilonLadder::default(),
        Some(l) => {
            let built = match (&l.values, l.top, l.ratio, l.count) {
                (Some(v), None, None, None) => EpsilonLadder::new(v.clone()),
                (None, Some(top), ratio, Some(count)) => EpsilonLadder::geometric(top, ratio.unwrap_or(0.5), count),
                _ => {
                    return Err(CliError::validation(
                        "ladder",
                        "give either `values` or `top` and `count` (with optional `ratio`)",
                    ))
                }
            };
            built.map_err(|err| CliError::validation("ladder", err.to_string()))?
        }
    };

    let mut profiles = Vec::new();
    for (j, p) in raw.profile.iter().enumerate() {
        let field = |k: &str| format!("profile[{j}].{k}");
        let waveform: Waveform = p
            .waveform
            .parse()
            .map_err(|err: nls_core::NlsError| CliError::validation(field("waveform"), err.to_string()))?;
        let amplitude = p.amplitude.unwrap_or(1.0);
        if !amplitude.is_finite() {
            return Err(CliError::validation(field("amplitude"), "must be finite"));
        }
        let mut spec = ProfileSpec::centered(dim);
        spec.h = parse_expr(&field("h"), &p.h)?;
        if let Some(t0) = &p.t0 {
            spec.t0 = parse_expr(&field("t0"), t0)?;
        }
        let vector = |name: &str, v: &Option<Vec<String>>| -> Result<Vec<ScaleExpr>> {
            match v {
                None => Ok(vec![ScaleExpr::zero(); dim]),
                Some(items) if items.len() != dim => Err(CliError::validation(
                    field(name),
                    format!("needs {dim} component(s), got {}", items.len()),
                )),
                Some(items) => items.iter().map(|s| parse_expr(&field(name), s)).collect(),
            }
        };
        spec.x0 = vector("x0", &p.x0)?;
        spec.xi0 = vector("xi0", &p.xi0)?;
        spec.admissible = p.admissible.unwrap_or(false);
        spec.validate(ladder.values())
            .map_err(|err| CliError::validation(field("h"), err.to_string()))?;
        profiles.push(ProfileEntry {
            spec,
            waveform,
            amplitude,
        });
    }
    if kind == Kind::Superposition && profiles.is_empty() {
        return Err(CliError::validation("profile", "superposition needs at least one [[profile]]"));
    }

    let vec_dim = |name: &str, v: &Option<Vec<f64>>| -> Result<Vec<f64>> {
        match v {
            None => Ok(vec![0.0; dim]),
            Some(x) if x.len() != dim => Err(CliError::validation(
                format!("experiment.{name}"),
                format!("needs {dim} component(s), got {}", x.len()),
            )),
            Some(x) => Ok(x.clone()),
        }
    };
    let amplitude = e.amplitude.unwrap_or(1.0);
    let data = if kind.uses_data() {
        let source = match (e.data.as_deref(), &e.data_file) {
            (Some(_), Some(_)) => {
                return Err(CliError::validation("experiment.data", "give either `data` or `data_file`"))
            }
            (None, Some(f)) => {
                let p = resolve(f);
                if !p.exists() {
                    return Err(CliError::MissingFile(p));
                }
                DataSource::File(p)
            }
            (Some("zero"), None) => DataSource::Zero,
            (Some("gaussian"), None) => DataSource::Gaussian {
                amplitude,
                width: positive("experiment.width", e.width)?.unwrap_or(1.0),
                center: vec_dim("center", &e.center)?,
                frequency: vec_dim("frequency", &e.frequency)?,
            },
            (Some("ground_state"), None) => DataSource::GroundState { amplitude },
            (Some("concentrating"), None) => DataSource::Concentrating {
                amplitude,
                t0: e.t0.unwrap_or(0.5),
            },
            (Some("profiles"), None) => {
                if profiles.is_empty() {
                    return Err(CliError::validation("experiment.data", "'profiles' needs at least one [[profile]]"));
                }
                DataSource::Profiles
            }
            (Some(other), None) => {
                return Err(CliError::validation(
                    "experiment.data",
                    format!("unknown source '{other}' (expected zero, gaussian, ground_state, concentrating, profiles)"),
                ))
            }
            (None, None) => return Err(CliError::validation("experiment.data", format!("kind '{kind}' needs initial data"))),
        };
        Some(source)
    } else {
        None
    };
    // the free-oracle Gaussian is described by the data keys
    let data = if kind == Kind::FreeOracle {
        Some(DataSource::Gaussian {
            amplitude: 1.0,
            width: positive("experiment.width", e.width)?.unwrap_or(1.0),
            center: vec_dim("center", &e.center)?,
            frequency: vec_dim("frequency", &e.frequency)?,
        })
    } else {
        data
    };

    let t_final = positive("experiment.T", e.T)?;
    if matches!(kind, Kind::Simulate | Kind::Linearizability | Kind::Superposition | Kind::Soliton) && t_final.is_none() {
        return Err(CliError::validation("experiment.T", format!("kind '{kind}' needs a final time T")));
    }
    let dt = positive("experiment.dt", e.dt)?;
    if let Some(s) = e.snapshots {
        if s < 2 {
            return Err(CliError::validation("experiment.snapshots", "needs at least 2"));
        }
    }
    if let Some(expect) = &e.expect {
        let allowed: &[&str] = match kind {
            Kind::Simulate => &["completed", "blowup"],
            _ => &["linearizable-trend", "non-linearizable-trend", "inconclusive"],
        };
        if !allowed.contains(&expect.as_str()) {
            return Err(CliError::validation(
                "experiment.expect",
                format!("'{expect}' is not one of {}", allowed.join(", ")),
            ));
        }
    }

    let defaults = VerdictThresholds::default();
    let thresholds = VerdictThresholds {
        slope: e.slope_threshold.unwrap_or(defaults.slope),
        criterion_terminal: positive("experiment.criterion_terminal", e.criterion_terminal)?.unwrap_or(defaults.criterion_terminal),
        deviation_terminal: positive("experiment.deviation_terminal", e.deviation_terminal)?.unwrap_or(defaults.deviation_terminal),
    };

    let mut extraction = ExtractionConfig::default();
    if let Some(m) = e.max_bubbles {
        extraction.max_bubbles = m;
    }
    extraction.delta = positive("experiment.delta", e.delta)?;
    extraction
        .validate()
        .map_err(|err| CliError::validation("experiment", err.to_string()))?;

    let window = range("experiment.window", e.window)?;
    if let Some((a, _)) = window {
        if !(a > 0.0) {
            return Err(CliError::validation("experiment.window", "must start above 0"));
        }
    }
    if let Some(times) = &e.times {
        if times.is_empty() {
            return Err(CliError::validation("experiment.times", "is empty"));
        }
    }

    let nested = match &e.scenario {
        Some(s) => {
            let p = resolve(s);
            if !p.exists() {
                return Err(CliError::MissingFile(p));
            }
            Some(p)
        }
        None if kind == Kind::Determinism => {
            return Err(CliError::validation("experiment.scenario", "determinism needs a scenario to rerun"))
        }
        None => None,
    };

    let checks = Checks {
        tolerance: positive("experiment.tolerance", e.tolerance)?,
        criterion_slope_range: range("experiment.criterion_slope_range", e.criterion_slope_range)?,
        contrast_slope_range: range("experiment.contrast_slope_range", e.contrast_slope_range)?,
        max_terminal_deviation: positive("experiment.max_terminal_deviation", e.max_terminal_deviation)?,
        min_deviation: positive("experiment.min_deviation", e.min_deviation)?,
        max_criterion_spread: positive("experiment.max_criterion_spread", e.max_criterion_spread)?,
        min_decrease: positive("experiment.min_decrease", e.min_decrease)?,
        check_single: e.check_single.unwrap_or(false),
        expect_bubbles: e.expect_bubbles,
        max_residual: positive("experiment.max_residual", e.max_residual)?,
        max_defect: positive("experiment.max_defect", e.max_defect)?,
        min_dominant_fraction: positive("experiment.min_dominant_fraction", e.min_dominant_fraction)?,
        max_scale_spread: positive("experiment.max_scale_spread", e.max_scale_spread)?,
        max_strip_gain: positive("experiment.max_strip_gain", e.max_strip_gain)?,
        max_band: positive("experiment.max_band", e.max_band)?,
        max_mass_drift: positive("experiment.max_mass_drift", e.max_mass_drift)?,
        min_order_ratio: positive("experiment.min_order_ratio", e.min_order_ratio)?,
    };

    let output = match &raw.output {
        Some(o) => resolve(o),
        None => PathBuf::from("nls-out").join(&raw.name),
    };

    Ok(Scenario {
        name: raw.name.clone(),
        path: path.to_path_buf(),
        source: source.to_string(),
        output,
        kind,
        grid,
        nonlinearity,
        epsilon,
        ladder,
        profiles,
        data,
        t_final,
        dt,
        snapshots: e.snapshots,
        steps: e.steps,
        expect: e.expect.clone(),
        thresholds,
        remainder_norm: positive("experiment.remainder_norm", e.remainder_norm)?,
        window,
        samples: e.samples,
        times: e.times.clone(),
        extraction,
        checks,
        nested,
    })
}
