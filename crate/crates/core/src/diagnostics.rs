//! Experiments across an ε-ladder: the linearizability dichotomy, nonlinear
//! superposition of orthogonal profiles, blow-up rates and blow-up
//! decomposition, and the refined Strichartz shape test.
//!
//! Every report keeps its raw sequences so verdict thresholds can be
//! re-applied offline. CSV output never contains wall-clock data, so
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::weinstein_blowup;
use crate::error::{NlsError, Result};
use crate::evolution::{
    evolve_guarded, free_propagate, free_trajectory, BlowUpGuard, SemiclassicalSetup, Trajectory,
};
use crate::extraction::{amplitude_cap, decompose, spacetime_core_search, ExtractionConfig};
use crate::functionals::{
    cfg_criterion, deviation_norms, gradient_norm, lgamma_criterion, mass_radius, strichartz_window_witness,
    SpaceTimeAccumulator,
};
use crate::grid::{Field, Grid};
use crate::profiles::{build_profile, fit_slope, orthogonality_gap, ProfileSpec, Waveform};

/// Decreasing list of semiclassical parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonLadder {
    values: Vec<f64>,
}

impl EpsilonLadder {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(NlsError::InvalidArgument("ladder is empty".into()));
        }
        if values.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(NlsError::InvalidArgument("ladder values must lie in (0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(NlsError::InvalidArgument("ladder must be strictly decreasing".into()));
        }
        Ok(EpsilonLadder { values })
    }

    /// `top·ratio^k` for `k = 0..count`.
    pub fn geometric(top: f64, ratio: f64, count: usize) -> Result<Self> {
        EpsilonLadder::new((0..count).map(|k| top * ratio.powi(k as i32)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for EpsilonLadder {
    /// `0.1·2^{-k}`, `k = 0..=5`.
    fn default() -> Self {
        EpsilonLadder::geometric(0.1, 0.5, 6).expect("valid default ladder")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    LinearizableTrend,
    NonLinearizableTrend,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::LinearizableTrend => "linearizable-trend",
            Verdict::NonLinearizableTrend => "non-linearizable-trend",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerdictThresholds {
    /// Minimal fitted log-slope for a decreasing trend.
    pub slope: f64,
    /// Criterion terminal/initial ratio above which it counts as flat.
    pub criterion_terminal: f64,
    /// Deviation terminal value, as a fraction of `‖u₀‖_{L²}`, above which
    /// linearization fails.
    pub deviation_terminal: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            slope: 0.3,
            criterion_terminal: 0.5,
            deviation_terminal: 0.1,
        }
    }
}

/// Time stepping used by the experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Fixed step; `None` uses the setup's default step.
    pub dt: Option<f64>,
    /// Number of equally spaced snapshots, endpoints included.
    pub snapshots: usize,
    pub guard: BlowUpGuard,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            dt: None,
            snapshots: 65,
            guard: BlowUpGuard::default(),
        }
    }
}

impl RunOptions {
    fn snapshot_times(&self, t_final: f64) -> Vec<f64> {
        let m = self.snapshots.max(2);
        (0..m).map(|k| t_final * k as f64 / (m - 1) as f64).collect()
    }

    fn steps(&self, t_final: f64, default_dt: f64) -> usize {
        let dt = self.dt.unwrap_or(default_dt);
        let raw = (t_final.abs() / dt).ceil().max(1.0) as usize;
        // a multiple of the snapshot spacing keeps snapshot times exact
        let m = self.snapshots.max(2) - 1;
        raw.div_ceil(m) * m
    }
}

/// Least-squares line with the standard error of its slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx) * (v - mx)).sum();
    // a degenerate abscissa (constant up to rounding) has no slope
    let scale = x[..n].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if sxx <= (1e-12 * scale).powi(2) * n as f64 {
        return None;
    }
    let slope = fit_slope(&x[..n], &y[..n]);
    let intercept = my - slope * mx;
    let rss: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let slope_stderr = if n > 2 { (rss / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Slope of `log value` against `log ε` over the strictly positive entries.
fn log_slope(eps: &[f64], values: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&e, &v)| (e.ln(), v.ln()))
        .unzip();
    fit_line(&x, &y).map(|f| f.slope)
}

/// One named two-column curve for plotting tools.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotCurve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotCurve {
    /// A `# name` header followed by whitespace-separated `x y` rows.
    pub fn to_text(&self) -> String {
        let mut text = format!("# {}\n", self.name);
        for (x, y) in &self.points {
            let _ = writeln!(text, "{x:e} {y:e}");
        }
        text
    }
}

/// Writes each curve to `<dir>/<name>.dat`.
pub fn write_plot_data(dir: impl AsRef<Path>, curves: &[PlotCurve]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for c in curves {
        let p = dir.as_ref().join(format!("{}.dat", c.name));
        std::fs::write(&p, c.to_text())?;
        paths.push(p);
    }
    Ok(paths)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:e}"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearizabilityRow {
    pub epsilon: f64,
    pub lgamma_criterion: f64,
    pub cfg_criterion: f64,
    /// `sup_t ‖u - v‖_{L²}`; `NaN` when the nonlinear run blew up.
    pub deviation_l2: f64,
    /// `sup_t ‖u - v‖_{H¹_ε}`
    pub deviation_h1eps: f64,
    /// `‖u₀‖_{L²}`
    pub mass: f64,
    /// Wall-clock seconds; excluded from CSV output.
    pub runtime_secs: f64,
    pub blowup: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub t_final: f64,
    pub rows: Vec<LinearizabilityRow>,
    /// Fitted `d log(criterion)/d log ε`.
    pub criterion_slope: Option<f64>,
    /// Fitted `d log(deviation)/d log ε`.
    pub deviation_slope: Option<f64>,
    /// Fitted power in `deviation ∝ criterion^p`.
    pub coupling_exponent: Option<f64>,
    /// `(1 + 4/n)/γ`, the power suggested by the bootstrap estimate.
    pub predicted_coupling: f64,
    pub thresholds: VerdictThresholds,
    pub verdict: Verdict,
}

impl DiagnosticsReport {
    pub fn epsilons(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.epsilon).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("scenario,epsilon,T,lgamma_criterion,cfg_criterion,deviation_l2,deviation_h1eps,mass,blowup\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                self.scenario,
                r.epsilon,
                self.t_final,
                r.lgamma_criterion,
                r.cfg_criterion,
                r.deviation_l2,
                r.deviation_h1eps,
                r.mass,
                r.blowup.as_deref().map_or("none".into(), |s| s.replace(',', ";"))
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "scenario {} verdict {} criterion_slope {} deviation_slope {} coupling_exponent {} predicted_coupling {:e}\n",
            self.scenario,
            self.verdict,
            opt(self.criterion_slope),
            opt(self.deviation_slope),
            opt(self.coupling_exponent),
            self.predicted_coupling
        )
    }

    pub fn plot_curves(&self) -> Vec<PlotCurve> {
        let eps = self.epsilons();
        let curve = |name: &str, f: &dyn Fn(&LinearizabilityRow) -> f64| PlotCurve {
            name: format!("{}_{name}", self.scenario),
            points: eps.iter().zip(&self.rows).map(|(&e, r)| (e, f(r))).collect(),
        };
        let mut curves = vec![
            curve("lgamma_criterion", &|r| r.lgamma_criterion),
            curve("cfg_criterion", &|r| r.cfg_criterion),
            curve("deviation_l2", &|r| r.deviation_l2),
            curve("deviation_h1eps", &|r| r.deviation_h1eps),
        ];
        curves.push(PlotCurve {
            name: format!("{}_coupling", self.scenario),
            points: self.rows.iter().map(|r| (r.lgamma_criterion, r.deviation_l2)).collect(),
        });
        // reference power law through the first point
        if let Some(first) = self.rows.first().filter(|r| r.lgamma_criterion > 0.0) {
            let p = self.predicted_coupling;
            curves.push(PlotCurve {
                name: format!("{}_coupling_predicted", self.scenario),
                points: self
                    .rows
                    .iter()
                    .map(|r| {
                        (
                            r.lgamma_criterion,
                            first.deviation_l2 * (r.lgamma_criterion / first.lgamma_criterion).powf(p),
                        )
                    })
                    .collect(),
            });
        }
        curves
    }
}

fn classify(rows: &[LinearizabilityRow], crit_slope: Option<f64>, dev_slope: Option<f64>, th: &VerdictThresholds) -> Verdict {
    if rows.iter().any(|r| r.blowup.is_some()) {
        return Verdict::NonLinearizableTrend;
    }
    if rows.iter().all(|r| r.lgamma_criterion == 0.0 && r.deviation_l2 == 0.0) {
        return Verdict::LinearizableTrend;
    }
    let decreasing = |s: Option<f64>| s.is_some_and(|v| v > th.slope);
    if decreasing(crit_slope) && decreasing(dev_slope) {
        return Verdict::LinearizableTrend;
    }
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    if last.lgamma_criterion > th.criterion_terminal * first.lgamma_criterion
        && last.deviation_l2 > th.deviation_terminal * last.mass
    {
        return Verdict::NonLinearizableTrend;
    }
    Verdict::Inconclusive
}

fn linearizability_row(
    data: Field,
    epsilon: f64,
    t_final: f64,
    template: &SemiclassicalSetup,
    opts: &RunOptions,
) -> Result<LinearizabilityRow> {
    let start = Instant::now();
    let setup = template.with_epsilon(epsilon)?;
    let times = opts.snapshot_times(t_final);
    let steps = opts.steps(t_final, setup.default_time_step(data.grid()));
    let free = free_trajectory(&data, &setup, &times)?;
    let lgamma = lgamma_criterion(&free, &setup)?;
    let cfg = cfg_criterion(&free, &setup)?;
    let mass = data.l2_norm();
    let (dev_l2, dev_h1, blowup) = match evolve_guarded(&data, t_final, steps, &setup, &times, opts.guard) {
        Ok(nl) => {
            let lin = free_trajectory(&data, &setup, &nl.times())?;
            let d = deviation_norms(&nl, &lin, epsilon)?;
            (d.l2, d.h1eps, None)
        }
        Err(NlsError::BlowUp { time, reason, .. }) => (f64::NAN, f64::NAN, Some(format!("t={time:e}: {reason}"))),
        Err(e) => return Err(e),
    };
    Ok(LinearizabilityRow {
        epsilon,
        lgamma_criterion: lgamma,
        cfg_criterion: cfg,
        deviation_l2: dev_l2,
        deviation_h1eps: dev_h1,
        mass,
        runtime_secs: start.elapsed().as_secs_f64(),
        blowup,
    })
}

/// Runs free and nonlinear evolutions of `data(ε)` on `[0, T]` at every
/// ladder point and classifies the trend.
pub fn linearizability_experiment(
    scenario: &str,
    data: &(dyn Fn(f64) -> Result<Field> + Sync),
    t_final: f64,
    template: &SemiclassicalSetup,
    ladder: &EpsilonLadder,
    opts: &RunOptions,
    thresholds: &VerdictThresholds,
) -> Result<DiagnosticsReport> {
    if !(t_final > 0.0) {
        return Err(NlsError::InvalidArgument(format!("T must be positive, got {t_final}")));
    }
    let fields: Vec<Field> = ladder.values().iter().map(|&e| data(e)).collect::<Result<_>>()?;
    let masses: Vec<f64> = fields.iter().map(Field::l2_norm).collect();
    let (lo, hi) = masses
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    if hi > 0.0 && hi > 1.1 * lo {
        return Err(NlsError::InvalidArgument(format!(
            "data masses vary from {lo:e} to {hi:e} across the ladder (more than 10%)"
        )));
    }
    let rows: Vec<LinearizabilityRow> = fields
        .into_par_iter()
        .zip(ladder.values().par_iter())
        .map(|(f, &e)| linearizability_row(f, e, t_final, template, opts))
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let crit: Vec<f64> = rows.iter().map(|r| r.lgamma_criterion).collect();
    let dev: Vec<f64> = rows.iter().map(|r| r.deviation_l2).collect();
    let criterion_slope = log_slope(&eps, &crit);
    let deviation_slope = log_slope(&eps, &dev);
    let coupling_exponent = log_slope(&crit, &dev);
    let n = template.dim() as f64;
    let verdict = classify(&rows, criterion_slope, deviation_slope, thresholds);
    Ok(DiagnosticsReport {
        scenario: scenario.to_string(),
        t_final,
        rows,
        criterion_slope,
        deviation_slope,
        coupling_exponent,
        predicted_coupling: (1.0 + 4.0 / n) / template.gamma(),
        thresholds: *thresholds,
        verdict,
    })
}

/// Backward unit-scale evolution `U(-t₀)` of `unit_data`; the concentrating
/// family is then `ε ↦ rescale_from_unit(U(-t₀), ε)`.
pub fn concentrating_initial_state(unit_data: &Field, t0: f64, unit: &SemiclassicalSetup, dt: f64) -> Result<Field> {
    if t0 == 0.0 {
        return Ok(unit_data.clone());
    }
    let steps = (t0.abs() / dt).ceil().max(1.0) as usize;
    let traj = evolve_guarded(unit_data, -t0, steps, unit, &[-t0], BlowUpGuard::default())?;
    Ok(traj
        .snapshots
        .into_iter()
        .last()
        .expect("one snapshot requested")
        .field)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastRow {
    pub epsilon: f64,
    /// `cfg/lgamma`; `None` when the ratio is undefined.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastTable {
    pub scenario: String,
    pub rows: Vec<ContrastRow>,
    pub ratio_slope: Option<f64>,
    pub lgamma_slope: Option<f64>,
    pub cfg_slope: Option<f64>,
}

impl ContrastTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,epsilon,cfg_over_lgamma\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:e},{}", self.scenario, r.epsilon, opt(r.ratio));
        }
        out
    }
}

/// Ratio of the supercritical-regime criterion to the `L^γ` criterion per ε.
pub fn criterion_contrast(report: &DiagnosticsReport) -> ContrastTable {
    let rows: Vec<ContrastRow> = report
        .rows
        .iter()
        .map(|r| ContrastRow {
            epsilon: r.epsilon,
            ratio: (r.lgamma_criterion > 0.0).then(|| r.cfg_criterion / r.lgamma_criterion),
        })
        .collect();
    let eps = report.epsilons();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio.unwrap_or(0.0)).collect();
    ContrastTable {
        scenario: report.scenario.clone(),
        ratio_slope: log_slope(&eps, &ratios),
        lgamma_slope: log_slope(&eps, &report.rows.iter().map(|r| r.lgamma_criterion).collect::<Vec<_>>()),
        cfg_slope: log_slope(&eps, &report.rows.iter().map(|r| r.cfg_criterion).collect::<Vec<_>>()),
        rows,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpositionRow {
    pub epsilon: f64,
    /// `sup_t ‖u - Σv_j - e^{itΔ/2}w‖_{L²}`
    pub rho: f64,
    /// Space-time `L^γ` norm of the same difference.
    pub rho_lgamma: f64,
    /// `‖u₀‖_{L²}`
    pub mass: f64,
    /// Smallest profile scale at this ε.
    pub min_scale: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperpositionReport {
    pub scenario: String,
    pub t_final: f64,
    pub rows: Vec<SuperpositionRow>,
    /// Fitted `d log ρ/d log ε`.
    pub rho_slope: Option<f64>,
    /// `ρ(top)/ρ(bottom)`
    pub decrease_factor: Option<f64>,
    pub pass: bool,
}

impl SuperpositionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,epsilon,T,rho,rho_lgamma,mass,min_scale,dt\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.scenario, r.epsilon, self.t_final, r.rho, r.rho_lgamma, r.mass, r.min_scale, r.dt
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "scenario {} pass {} rho_slope {} decrease_factor {}\n",
            self.scenario,
            self.pass,
            opt(self.rho_slope),
            opt(self.decrease_factor)
        )
    }

    pub fn plot_curves(&self) -> Vec<PlotCurve> {
        vec![PlotCurve {
            name: format!("{}_rho", self.scenario),
            points: self.rows.iter().map(|r| (r.epsilon, r.rho)).collect(),
        }]
    }
}

/// Multi-profile datum at unit scale.
#[derive(Clone, Debug)]
pub struct SuperpositionInput {
    pub profiles: Vec<(ProfileSpec, Field)>,
    /// Remainder `w` on the unit grid.
    pub remainder: Option<Field>,
}

/// Superposition time step: `0.05·h_min²`, capped at `10⁻²`.
pub fn superposition_time_step(min_scale: f64) -> f64 {
    (0.05 * min_scale * min_scale).min(1e-2)
}

fn attribute(err: NlsError, who: &str) -> NlsError {
    match err {
        NlsError::BlowUp {
            time,
            reason,
            last_healthy,
        } => NlsError::BlowUp {
            time,
            reason: format!("{who}: {reason}"),
            last_healthy,
        },
        other => other,
    }
}

fn superposition_row(
    input: &SuperpositionInput,
    epsilon: f64,
    t_final: f64,
    unit: &SemiclassicalSetup,
    grid: Grid,
    opts: &RunOptions,
) -> Result<SuperpositionRow> {
    let parts: Vec<Field> = input
        .profiles
        .iter()
        .map(|(spec, phi)| build_profile(spec, phi, 0.0, epsilon, grid))
        .collect::<Result<_>>()?;
    let min_scale = input
        .profiles
        .iter()
        .map(|(s, _)| s.gamma(epsilon).h)
        .fold(f64::INFINITY, f64::min);
    let mut data = match &input.remainder {
        Some(w) => w.to_position(),
        None => Field::zeros(grid, crate::grid::Representation::Position),
    };
    for p in &parts {
        data = data.add(p)?;
    }
    let dt = opts.dt.unwrap_or_else(|| superposition_time_step(min_scale));
    let run_opts = RunOptions { dt: Some(dt), ..*opts };
    let times = run_opts.snapshot_times(t_final);
    let steps = run_opts.steps(t_final, dt);
    let run = |f: &Field, who: &str| -> Result<Trajectory> {
        evolve_guarded(f, t_final, steps, unit, &times, opts.guard).map_err(|e| attribute(e, who))
    };
    let full = run(&data, "superposed datum")?;
    let singles: Vec<Trajectory> = parts
        .iter()
        .enumerate()
        .map(|(j, p)| run(p, &format!("profile {j}")))
        .collect::<Result<_>>()?;
    let remainder = match &input.remainder {
        Some(w) => Some(free_trajectory(w, unit, &full.times())?),
        None => None,
    };
    let mut rho: f64 = 0.0;
    let mut acc = SpaceTimeAccumulator::new(unit.gamma());
    for (k, snap) in full.snapshots.iter().enumerate() {
        let mut diff = snap.field.clone();
        for s in &singles {
            diff = diff.sub(&s.snapshots[k].field)?;
        }
        if let Some(w) = &remainder {
            diff = diff.sub(&w.snapshots[k].field)?;
        }
        rho = rho.max(diff.l2_norm());
        acc.push(snap.time, &diff);
    }
    Ok(SuperpositionRow {
        epsilon,
        rho,
        rho_lgamma: acc.value().powf(1.0 / unit.gamma()),
        mass: data.l2_norm(),
        min_scale,
        dt,
    })
}

/// Compares the nonlinear evolution of a superposition with the sum of the
/// nonlinear evolutions of its profiles and the free evolution of the
/// remainder. Runs at unit scale on `grid`; the semiclassical rescaling
/// preserves every `L²` quantity involved.
pub fn superposition_experiment(
    scenario: &str,
    input: &SuperpositionInput,
    ladder: &EpsilonLadder,
    t_final: f64,
    unit: &SemiclassicalSetup,
    grid: Grid,
    opts: &RunOptions,
) -> Result<SuperpositionReport> {
    if unit.epsilon() != 1.0 {
        return Err(NlsError::InvalidArgument("superposition runs use the unit-scale setup".into()));
    }
    if !(t_final > 0.0) {
        return Err(NlsError::InvalidArgument(format!("T must be positive, got {t_final}")));
    }
    if input.profiles.is_empty() {
        return Err(NlsError::InvalidArgument("no profiles given".into()));
    }
    for (j, (a, _)) in input.profiles.iter().enumerate() {
        a.validate(ladder.values())?;
        for (k, (b, _)) in input.profiles.iter().enumerate().skip(j + 1) {
            let gap = orthogonality_gap(a, b, ladder.values())?;
            if !gap.orthogonal {
                return Err(NlsError::InvalidArgument(format!(
                    "profiles {j} and {k} are not orthogonal (slope {:e}, terminal {:e})",
                    gap.slope,
                    gap.values.last().copied().unwrap_or(0.0)
                )));
            }
        }
    }
    let rows: Vec<SuperpositionRow> = ladder
        .values()
        .par_iter()
        .map(|&e| superposition_row(input, e, t_final, unit, grid, opts))
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let rhos: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    let rho_slope = log_slope(&eps, &rhos);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let decrease_factor = (last.rho > 0.0).then(|| first.rho / last.rho);
    let pass = last.rho < 0.1 * last.mass && (rows.len() == 1 || last.rho < first.rho || first.rho == 0.0);
    Ok(SuperpositionReport {
        scenario: scenario.to_string(),
        t_final,
        rows,
        rho_slope,
        decrease_factor,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupRateRow {
    /// `T - t`
    pub remaining: f64,
    /// `‖U(t)‖_γ^γ`
    pub lgamma_integral: f64,
    /// `‖∇U(t)‖_{L²}`
    pub gradient: f64,
    /// Radius of the origin-centred ball holding half the mass.
    pub width: f64,
    /// `(T - t)/width²`
    pub rate_ratio: f64,
    /// `‖U(t)‖²`
    pub mass_sqr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupRateReport {
    pub blowup_time: f64,
    pub rows: Vec<BlowupRateRow>,
    pub lgamma_fit: LineFit,
    pub gradient_fit: LineFit,
    pub width_fit: LineFit,
    /// `min (T - t)/width²` over the window.
    pub min_rate_ratio: f64,
    pub bound_holds: bool,
    /// `max |‖U‖² - ‖U₀‖²| / ‖U₀‖²`
    pub mass_drift: f64,
    /// Set when the requested window had to be shrunk for resolution.
    pub notice: Option<String>,
}

impl BlowupRateReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T_minus_t,lgamma_integral,gradient_norm,half_mass_width,rate_ratio,mass_sqr\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e}",
                r.remaining, r.lgamma_integral, r.gradient, r.width, r.rate_ratio, r.mass_sqr
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let fit = |f: &LineFit| format!("{:e} +- {:e}", f.slope, 2.0 * f.slope_stderr);
        format!(
            "lgamma_exponent {}\ngradient_exponent {}\nwidth_exponent {}\nmin_rate_ratio {:e}\nbound_holds {}\nmass_drift {:e}\nnotice {}\n",
            fit(&self.lgamma_fit),
            fit(&self.gradient_fit),
            fit(&self.width_fit),
            self.min_rate_ratio,
            self.bound_holds,
            self.mass_drift,
            self.notice.as_deref().unwrap_or("none")
        )
    }

    pub fn plot_curves(&self) -> Vec<PlotCurve> {
        let curve = |name: &str, f: &dyn Fn(&BlowupRateRow) -> f64| PlotCurve {
            name: format!("blowup_{name}"),
            points: self.rows.iter().map(|r| (r.remaining, f(r))).collect(),
        };
        vec![
            curve("lgamma", &|r| r.lgamma_integral),
            curve("gradient", &|r| r.gradient),
            curve("width", &|r| r.width),
            curve("rate_ratio", &|r| r.rate_ratio),
        ]
    }
}

/// Samples the explicit minimal-mass blow-up solution at `samples` values of
/// `T - t` spaced geometrically across `fit_window` and fits power laws.
pub fn blowup_rate_probe(
    blowup_time: f64,
    grid: Grid,
    fit_window: (f64, f64),
    samples: usize,
) -> Result<BlowupRateReport> {
    let (a, b) = fit_window;
    if !(a > 0.0 && b > a) || samples < 3 {
        return Err(NlsError::InvalidArgument(
            "fit window must satisfy 0 < a < b with at least 3 samples".into(),
        ));
    }
    let remaining: Vec<f64> = (0..samples)
        .map(|k| a * (b / a).powf(k as f64 / (samples - 1) as f64))
        .collect();
    let gamma = 2.0 + 4.0 / grid.dim() as f64;
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &s in &remaining {
        match weinstein_blowup(blowup_time - s, blowup_time, grid) {
            Ok(u) => {
                let width = mass_radius(&u, 0.5);
                rows.push(BlowupRateRow {
                    remaining: s,
                    lgamma_integral: u.lp_integral(gamma),
                    gradient: gradient_norm(&u, 1.0),
                    width,
                    rate_ratio: s / (width * width),
                    mass_sqr: u.norm_sqr(),
                });
            }
            Err(NlsError::Resolution { .. }) => dropped.push(s),
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 3 {
        return Err(NlsError::Resolution {
            reason: format!("fewer than 3 resolvable samples in [{a}, {b}]"),
            required_n: grid.points_per_axis() * 2,
        });
    }
    let notice = (!dropped.is_empty()).then(|| {
        format!(
            "fit window shrunk to [{:e}, {:e}]: {} samples below the grid resolution were dropped",
            rows[0].remaining,
            rows[rows.len() - 1].remaining,
            dropped.len()
        )
    });
    let x: Vec<f64> = rows.iter().map(|r| r.remaining.ln()).collect();
    let fit = |f: &dyn Fn(&BlowupRateRow) -> f64| {
        let y: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        fit_line(&x, &y).expect("at least three distinct samples")
    };
    let lgamma_fit = fit(&|r| r.lgamma_integral);
    let gradient_fit = fit(&|r| r.gradient);
    let width_fit = fit(&|r| r.width);
    let min_rate_ratio = rows.iter().map(|r| r.rate_ratio).fold(f64::INFINITY, f64::min);
    let m0 = rows[0].mass_sqr;
    let mass_drift = rows.iter().map(|r| (r.mass_sqr - m0).abs() / m0).fold(0.0, f64::max);
    Ok(BlowupRateReport {
        blowup_time,
        lgamma_fit,
        gradient_fit,
        width_fit,
        bound_holds: min_rate_ratio >= 1.0 - 1e-9,
        min_rate_ratio,
        mass_drift,
        notice,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupDecompositionRow {
    pub time: f64,
    /// `T - t_k`
    pub remaining: f64,
    pub bubbles: usize,
    /// Dominant bubble mass over `‖U(t_k)‖²`.
    pub dominant_fraction: f64,
    pub dominant_scale: f64,
    /// `h / (T - t_k)`
    pub scale_ratio: f64,
    /// `(T - t_k)/h²`
    pub rate_ratio: f64,
    /// Best relative gain in refocused local mass from stripping the
    /// quadratic phase, over the `t*` grid.
    pub strip_gain: f64,
    pub best_t_star: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowupDecompositionReport {
    pub blowup_time: f64,
    pub rows: Vec<BlowupDecompositionRow>,
    /// `max/min` of the scale ratio across `k`.
    pub scale_ratio_spread: f64,
}

impl BlowupDecompositionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t_k,T_minus_t_k,bubbles,dominant_fraction,dominant_scale,scale_over_T_minus_t,rate_ratio,strip_gain,best_t_star\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.time,
                r.remaining,
                r.bubbles,
                r.dominant_fraction,
                r.dominant_scale,
                r.scale_ratio,
                r.rate_ratio,
                r.strip_gain,
                r.best_t_star
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let min_frac = self.rows.iter().map(|r| r.dominant_fraction).fold(f64::INFINITY, f64::min);
        let max_gain = self.rows.iter().map(|r| r.strip_gain).fold(f64::NEG_INFINITY, f64::max);
        format!(
            "min_dominant_fraction {min_frac:e}\nscale_ratio_spread {:e}\nmax_strip_gain {max_gain:e}\n",
            self.scale_ratio_spread
        )
    }
}

/// Default blow-up sampling times `T - 2^{-k}`, `k = 1..=6`.
pub fn default_blowup_times(blowup_time: f64) -> Vec<f64> {
    (1..=6).map(|k| blowup_time - 2f64.powi(-k)).collect()
}

/// Number of `t*` values tried when stripping the quadratic phase.
pub const STRIP_SEARCH_POINTS: usize = 20;

/// Decomposes the explicit blow-up solution at each `t_k` and tests whether
/// removing the quadratic phase `e^{-i|x-x*|²/(2(T-t_k)t*)}` improves the
/// refocused local mass of the dominant bubble.
pub fn blowup_decomposition_probe(
    blowup_time: f64,
    times: &[f64],
    grid: Grid,
    config: &ExtractionConfig,
) -> Result<BlowupDecompositionReport> {
    if times.is_empty() {
        return Err(NlsError::InvalidArgument("no sampling times".into()));
    }
    let rows: Vec<BlowupDecompositionRow> = times
        .par_iter()
        .map(|&t| {
            let u = weinstein_blowup(t, blowup_time, grid)?;
            let s = blowup_time - t;
            let result = decompose(&u, config)?;
            let dominant = result
                .bubbles
                .first()
                .ok_or_else(|| NlsError::InvalidArgument(format!("no bubble extracted at t = {t}")))?;
            let total = u.norm_sqr();
            // the refocused local mass is measured on the capped window
            // piece, as in the extraction step itself
            let local_mass = |f: &Field| -> Result<f64> {
                let (piece, _) = amplitude_cap(f, &dominant.window, result.delta, config.cap_constant)?;
                Ok(spacetime_core_search(&piece, &dominant.window, config)?.local_mass)
            };
            let base = local_mass(&u)?;
            let d = grid.dim();
            let center = dominant.x_star;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for j in 1..=STRIP_SEARCH_POINTS {
                let t_star = j as f64 / STRIP_SEARCH_POINTS as f64;
                let stripped = u.map_indexed(|x, z| {
                    let r2: f64 = (0..d).map(|a| (x[a] - center[a]).powi(2)).sum();
                    z * Complex64::from_polar(1.0, r2 / (2.0 * s * t_star))
                });
                let m = local_mass(&stripped)?;
                let gain = (m - base) / base;
                if gain > best.0 {
                    best = (gain, t_star);
                }
            }
            Ok(BlowupDecompositionRow {
                time: t,
                remaining: s,
                bubbles: result.bubbles.len(),
                dominant_fraction: dominant.mass / total,
                dominant_scale: dominant.h,
                scale_ratio: dominant.h / s,
                rate_ratio: s / (dominant.h * dominant.h),
                strip_gain: best.0,
                best_t_star: best.1,
            })
        })
        .collect::<Result<_>>()?;
    let (lo, hi) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.scale_ratio), b.max(r.scale_ratio)));
    Ok(BlowupDecompositionReport {
        blowup_time,
        rows,
        scale_ratio_spread: hi / lo,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrichartzRow {
    pub waveform: Waveform,
    pub scale: f64,
    /// `‖e^{itΔ/2}f‖_{L⁶(ℝ×ℝ)}⁶` over the sampled time window.
    pub spacetime_l6_pow6: f64,
    /// Window witness with `p = 4/3`.
    pub witness: f64,
    pub l2: f64,
    /// `‖e^{itΔ/2}f‖⁶_{L⁶} / (witness²‖f‖⁴)`
    pub refined_ratio: f64,
    /// `‖e^{itΔ/2}f‖_{L⁶} / ‖f‖`
    pub plain_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrichartzReport {
    pub rows: Vec<StrichartzRow>,
    /// `max/min` of the refined ratio.
    pub refined_band: f64,
    /// `max/min` of the plain ratio.
    pub plain_band: f64,
    pub plain_max: f64,
}

impl StrichartzReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("waveform,h,spacetime_l6_pow6,witness,l2,refined_ratio,plain_ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.waveform.name(),
                r.scale,
                r.spacetime_l6_pow6,
                r.witness,
                r.l2,
                r.refined_ratio,
                r.plain_ratio
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "refined_band {:e}\nplain_band {:e}\nplain_max {:e}\n",
            self.refined_band, self.plain_band, self.plain_max
        )
    }
}

/// The four built-in waveforms at scales `2^{-k}`, `k = 0..=4`.
pub fn concentration_family() -> Vec<(Waveform, f64)> {
    let waves = [Waveform::Gaussian, Waveform::GroundState, Waveform::Ricker, Waveform::Bump];
    waves
        .iter()
        .flat_map(|&w| (0..=4).map(move |k| (w, 2f64.powi(-k))))
        .collect()
}

/// Time half-window, in units of `h²`, used for the space-time integrals.
pub const STRICHARTZ_TIME_WINDOW: f64 = 16.0;
/// Time samples per function.
pub const STRICHARTZ_TIME_SAMPLES: usize = 513;

/// Refined and plain Strichartz ratios over the concentration family on a
/// 1D grid. The `L⁶` space-time norm is integrated over `|t| ≤ 16h²`.
pub fn strichartz_family_probe(grid: Grid) -> Result<StrichartzReport> {
    if grid.dim() != 1 {
        return Err(NlsError::Unsupported("the refined Strichartz probe is one-dimensional".into()));
    }
    let lin = SemiclassicalSetup::unit(crate::evolution::Nonlinearity::Defocusing, 1)?.linear();
    let rows: Vec<StrichartzRow> = concentration_family()
        .par_iter()
        .map(|&(wave, h)| {
            let phi = wave.reference_field(1)?;
            let f = build_profile(&unit_spec(h), &phi, 0.0, 1.0, grid)?;
            let span = STRICHARTZ_TIME_WINDOW * h * h;
            let mut acc = SpaceTimeAccumulator::new(6.0);
            for k in 0..STRICHARTZ_TIME_SAMPLES {
                let t = -span + 2.0 * span * k as f64 / (STRICHARTZ_TIME_SAMPLES - 1) as f64;
                acc.push(t, &free_propagate(&f, t, &lin)?);
            }
            let l6 = acc.value();
            let witness = strichartz_window_witness(&f, 4.0 / 3.0)?.value;
            let l2 = f.l2_norm();
            Ok(StrichartzRow {
                waveform: wave,
                scale: h,
                spacetime_l6_pow6: l6,
                witness,
                l2,
                refined_ratio: l6 / (witness * witness * l2.powi(4)),
                plain_ratio: l6.powf(1.0 / 6.0) / l2,
            })
        })
        .collect::<Result<_>>()?;
    let band = |f: &dyn Fn(&StrichartzRow) -> f64| {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(f(r)), b.max(f(r))));
        (hi / lo, hi)
    };
    let (refined_band, _) = band(&|r| r.refined_ratio);
    let (plain_band, plain_max) = band(&|r| r.plain_ratio);
    Ok(StrichartzReport {
        rows,
        refined_band,
        plain_band,
        plain_max,
    })
}

fn unit_spec(h: f64) -> ProfileSpec {
    let mut spec = ProfileSpec::centered(1);
    spec.h = crate::profiles::ScaleExpr::constant(h);
    spec
}
