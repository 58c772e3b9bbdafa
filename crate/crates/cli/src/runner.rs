//! Preflight, experiment dispatch and artifact assembly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nls_core::analytic::{free_gaussian, ground_state, weinstein_blowup};
use nls_core::diagnostics::{
    blowup_decomposition_probe, blowup_rate_probe, concentrating_initial_state, criterion_contrast,
    default_blowup_times, linearizability_experiment, strichartz_family_probe, superposition_experiment,
    concentration_family, PlotCurve, SuperpositionInput, Verdict,
};
use nls_core::evolution::{
    evolve_guarded, free_propagate, free_trajectory, rescale_from_unit, BlowUpGuard, SemiclassicalSetup,
};
use nls_core::extraction::{decompose, residual_witness, bubble_separation};
use nls_core::functionals::{conserved_ledger, gaussian_field, spacetime_lgamma, spectral_tail};
use nls_core::profiles::{build_profile, Gamma, ProfileSpec, ScaleExpr};
use nls_core::{Field, Grid, NlsError, Representation};
use num_complex::Complex64;

use crate::error::{CliError, CoreContext, Result};
use crate::manifest::{Artifacts, Manifest};
use crate::scenario::{parse_scenario, DataSource, Kind, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    /// 0 pass, 2 fail, 3 inconclusive; software errors exit with 1.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub scenario: String,
    pub kind: Kind,
    pub status: Status,
    /// Experiment-specific result label, e.g. a verdict.
    pub label: String,
    pub failures: Vec<String>,
    pub output: PathBuf,
    pub manifest: Manifest,
}

/// Failed checks, collected in order.
#[derive(Default)]
struct Checks {
    lines: Vec<String>,
    failures: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: String) {
        self.lines.push(format!("{} {what}", if ok { "ok" } else { "FAILED" }));
        if !ok {
            self.failures.push(what);
        }
    }

    fn text(&self) -> String {
        self.lines.iter().map(|l| format!("check {l}\n")).collect()
    }
}

struct KindResult {
    label: String,
    /// Status before the checks are applied.
    status: Status,
    checks: Checks,
    summary: String,
}

/// Evaluates `expect` against a label.
fn expected(scenario: &Scenario, label: &str, default: Status) -> Status {
    match &scenario.expect {
        Some(e) if e == label => Status::Pass,
        Some(_) if label == "inconclusive" => Status::Inconclusive,
        Some(_) => Status::Fail,
        None => default,
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or("NA".into(), |v| format!("{v:e}"))
}

fn grid_of(s: &Scenario) -> Result<Grid> {
    s.grid()
}

fn setup(s: &Scenario, epsilon: f64, dim: usize) -> Result<SemiclassicalSetup> {
    SemiclassicalSetup::new(epsilon, s.nonlinearity, dim).context(&s.name)
}

fn field_bytes(f: &Field) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f.write_to(&mut buf).map_err(|e| CliError::Core {
        scenario: String::new(),
        source: e,
    })?;
    Ok(buf)
}

fn profile_items(s: &Scenario, dim: usize) -> Result<Vec<(ProfileSpec, Field)>> {
    s.profiles
        .iter()
        .map(|p| {
            let phi = p.waveform.reference_field(dim).context(&s.name)?;
            Ok((p.spec.clone(), phi.scaled(Complex64::new(p.amplitude, 0.0))))
        })
        .collect()
}

/// Unit-scale profile sum at `epsilon` on the unit grid.
fn profile_sum(items: &[(ProfileSpec, Field)], epsilon: f64, grid: Grid) -> nls_core::Result<Field> {
    let mut acc = Field::zeros(grid, Representation::Position);
    for (spec, phi) in items {
        acc = acc.add(&build_profile(spec, phi, 0.0, epsilon, grid)?)?;
    }
    Ok(acc)
}

/// Fixed part of the data: the field itself for ε-independent sources, the
/// unit-scale field otherwise.
fn base_field(s: &Scenario, src: &DataSource) -> Result<Field> {
    let amp = |a: f64| Complex64::new(a, 0.0);
    let f = match src {
        DataSource::File(p) => {
            let f = Field::load(p).context(&s.name)?.to_position();
            if let Some(g) = s.grid {
                if g != *f.grid() {
                    return Err(CliError::validation(
                        "experiment.data_file",
                        format!("field grid {:?} differs from [grid] {:?}", f.grid(), g),
                    ));
                }
            }
            f
        }
        DataSource::Zero => Field::zeros(grid_of(s)?, Representation::Position),
        DataSource::Gaussian {
            amplitude,
            width,
            center,
            frequency,
        } => gaussian_field(grid_of(s)?, *width, center, frequency)
            .context(&s.name)?
            .scaled(amp(*amplitude)),
        DataSource::GroundState { amplitude } | DataSource::Concentrating { amplitude, .. } => {
            let g = grid_of(s)?;
            ground_state(g.dim(), g).context(&s.name)?.into_field().scaled(amp(*amplitude))
        }
        DataSource::Profiles => {
            let g = grid_of(s)?;
            profile_sum(&profile_items(s, g.dim())?, 1.0, g).context(&s.name)?
        }
    };
    Ok(f)
}

type Generator = Box<dyn Fn(f64) -> nls_core::Result<Field> + Sync>;

/// Data as a function of ε. Runs the backward evolution of concentrating data.
fn generator(s: &Scenario) -> Result<Generator> {
    let src = s
        .data
        .clone()
        .ok_or_else(|| CliError::validation("experiment.data", "missing"))?;
    let base = base_field(s, &src)?;
    Ok(match src {
        DataSource::Concentrating { t0, .. } => {
            let unit = setup(s, 1.0, base.grid().dim())?;
            let u = concentrating_initial_state(&base, t0, &unit, s.dt.unwrap_or(1e-3)).context(&s.name)?;
            Box::new(move |e| rescale_from_unit(&u, e))
        }
        DataSource::Profiles => {
            let g = *base.grid();
            let items = profile_items(s, g.dim())?;
            Box::new(move |e| rescale_from_unit(&profile_sum(&items, e, g)?, e))
        }
        _ => Box::new(move |_| Ok(base.clone())),
    })
}

/// Builds every initial datum and reference field that the experiment will
/// need, so resolution violations surface before any time stepping.
pub fn preflight(s: &Scenario) -> Result<()> {
    if let Some(src) = &s.data {
        let base = base_field(s, src)?;
        if let DataSource::Profiles = src {
            let items = profile_items(s, base.grid().dim())?;
            let eps: Vec<f64> = match s.kind {
                Kind::Linearizability => s.ladder.values().to_vec(),
                _ => vec![s.epsilon],
            };
            for e in eps {
                profile_sum(&items, e, *base.grid()).context(&s.name)?;
            }
        }
    }
    match s.kind {
        Kind::Superposition => {
            let g = grid_of(s)?;
            let items = profile_items(s, g.dim())?;
            for &e in s.ladder.values() {
                for (spec, phi) in &items {
                    build_profile(spec, phi, 0.0, e, g).context(&s.name)?;
                }
            }
        }
        Kind::BlowupRate => {
            let t = s.t_final.unwrap_or(1.0);
            let (_, b) = s.window.unwrap_or(DEFAULT_RATE_WINDOW);
            weinstein_blowup(t - b, t, grid_of(s)?).context(&s.name)?;
        }
        Kind::BlowupDecompose => {
            let t = s.t_final.unwrap_or(1.0);
            for tk in s.times.clone().unwrap_or_else(|| default_blowup_times(t)) {
                weinstein_blowup(tk, t, grid_of(s)?).context(&s.name)?;
            }
        }
        Kind::Soliton => {
            let g = grid_of(s)?;
            ground_state(g.dim(), g).context(&s.name)?;
        }
        Kind::Strichartz => {
            let g = grid_of(s)?;
            for (w, h) in concentration_family() {
                let mut spec = ProfileSpec::centered(1);
                spec.h = ScaleExpr::constant(h);
                build_profile(&spec, &w.reference_field(1).context(&s.name)?, 0.0, 1.0, g).context(&s.name)?;
            }
        }
        Kind::Determinism => {
            let nested = parse_scenario(s.nested.as_ref().expect("validated"))?;
            if nested.kind == Kind::Determinism {
                return Err(CliError::validation("experiment.scenario", "cannot nest determinism runs"));
            }
            preflight(&nested)?;
        }
        _ => {}
    }
    Ok(())
}

/// Parses, preflights and runs `path`, writing artifacts to the scenario's
/// output directory (or `output` when given).
pub fn run_path(path: impl AsRef<Path>, output: Option<&Path>) -> Result<Outcome> {
    let mut s = parse_scenario(path)?;
    if let Some(o) = output {
        s.output = o.to_path_buf();
    }
    run(&s)
}

pub fn run(s: &Scenario) -> Result<Outcome> {
    preflight(s)?;
    let mut art = Artifacts::default();
    art.text("scenario.toml", s.source.clone());
    let r = match s.kind {
        Kind::Simulate => simulate(s, &mut art)?,
        Kind::Linearizability => linearizability(s, &mut art)?,
        Kind::Superposition => superposition(s, &mut art)?,
        Kind::BlowupRate => blowup_rate(s, &mut art)?,
        Kind::BlowupDecompose => blowup_decompose(s, &mut art)?,
        Kind::Extract => extract(s, &mut art)?,
        Kind::Norms => norms(s, &mut art)?,
        Kind::Conservation => conservation(s, &mut art)?,
        Kind::FreeOracle => free_oracle(s, &mut art)?,
        Kind::Soliton => soliton(s, &mut art)?,
        Kind::Scaling => scaling(s, &mut art)?,
        Kind::Strichartz => strichartz(s, &mut art)?,
        Kind::Determinism => determinism(s, &mut art)?,
    };
    let status = if r.status == Status::Pass && !r.checks.failures.is_empty() {
        Status::Fail
    } else {
        r.status
    };
    let summary = format!(
        "scenario {}\nkind {}\nlabel {}\nstatus {}\n{}{}",
        s.name,
        s.kind,
        r.label,
        status.as_str(),
        r.summary,
        r.checks.text()
    );
    art.text("summary.txt", summary);
    let manifest = art.write(&s.output)?;
    Ok(Outcome {
        scenario: s.name.clone(),
        kind: s.kind,
        status,
        label: r.label,
        failures: r.checks.failures,
        output: s.output.clone(),
        manifest,
    })
}

fn curves(art: &mut Artifacts, curves: &[PlotCurve]) {
    for c in curves {
        art.text(format!("plot/{}.dat", c.name), c.to_text());
    }
}

fn simulate(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let u0 = generator(s)?(s.epsilon).context(&s.name)?;
    let grid = *u0.grid();
    let st = setup(s, s.epsilon, grid.dim())?;
    let t = s.t_final.expect("validated");
    let opts = s.run_options();
    let dt = opts.dt.unwrap_or_else(|| st.default_time_step(&grid));
    let m = opts.snapshots.max(2);
    let times: Vec<f64> = (0..m).map(|k| t * k as f64 / (m - 1) as f64).collect();
    let steps = ((t / dt).ceil() as usize).div_ceil(m - 1) * (m - 1);
    let mut csv = String::from("time,mass,linear_energy,nonlinear_energy,max_abs\n");
    let row = |csv: &mut String, time: f64, f: &Field| -> Result<()> {
        let l = conserved_ledger(f, &st).context(&s.name)?;
        let _ = writeln!(csv, "{time:e},{:e},{:e},{:e},{:e}", l.mass, l.linear_energy, l.nonlinear_energy, f.max_abs());
        Ok(())
    };
    let (label, summary) = match evolve_guarded(&u0, t, steps, &st, &times, BlowUpGuard::default()) {
        Ok(traj) => {
            for snap in &traj.snapshots {
                row(&mut csv, snap.time, &snap.field)?;
            }
            let last = &traj.last().expect("snapshots requested").field;
            art.add("final.nlsf", field_bytes(last)?);
            ("completed".to_string(), format!("steps {steps}\ndt {:e}\n", t / steps as f64))
        }
        Err(NlsError::BlowUp {
            time,
            reason,
            last_healthy,
        }) => {
            row(&mut csv, last_healthy.time, &last_healthy.field)?;
            art.add("last_healthy.nlsf", field_bytes(&last_healthy.field)?);
            ("blowup".to_string(), format!("blowup_time {time:e}\nblowup_reason {reason}\n"))
        }
        Err(e) => return Err(e).context(&s.name),
    };
    art.text("trajectory.csv", csv);
    let default = if label == "completed" { Status::Pass } else { Status::Fail };
    Ok(KindResult {
        status: expected(s, &label, default),
        label,
        checks: Checks::default(),
        summary,
    })
}

fn linearizability(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let gen = generator(s)?;
    let dim = s.dim();
    let template = setup(s, 1.0, dim)?;
    let t = s.t_final.expect("validated");
    let report = linearizability_experiment(&s.name, &*gen, t, &template, &s.ladder, &s.run_options(), &s.thresholds)
        .context(&s.name)?;
    let contrast = criterion_contrast(&report);
    art.text("linearizability.csv", report.to_csv());
    art.text("contrast.csv", contrast.to_csv());
    curves(art, &report.plot_curves());
    let mut checks = Checks::default();
    let c = &s.checks;
    let rows = &report.rows;
    let last = rows.last().expect("nonempty ladder");
    if let Some((a, b)) = c.criterion_slope_range {
        let v = report.criterion_slope;
        checks.check(v.is_some_and(|v| v >= a && v <= b), format!("criterion slope {} in [{a}, {b}]", show(v)));
    }
    if let Some(f) = c.max_terminal_deviation {
        checks.check(
            last.deviation_l2 < f * last.mass,
            format!("terminal deviation {:e} < {f}·mass ({:e})", last.deviation_l2, f * last.mass),
        );
    }
    if let Some(f) = c.min_deviation {
        let worst = rows.iter().map(|r| r.deviation_l2 / r.mass).fold(f64::INFINITY, f64::min);
        checks.check(worst >= f, format!("smallest deviation/mass {worst:e} >= {f}"));
    }
    if let Some(f) = c.max_criterion_spread {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.lgamma_criterion), b.max(r.lgamma_criterion)));
        let spread = hi / lo - 1.0;
        checks.check(spread <= f, format!("criterion spread {spread:e} <= {f}"));
    }
    if let Some((a, b)) = c.contrast_slope_range {
        let v = contrast.ratio_slope;
        checks.check(v.is_some_and(|v| v >= a && v <= b), format!("contrast slope {} in [{a}, {b}]", show(v)));
    }
    let label = report.verdict.as_str().to_string();
    let default = match report.verdict {
        Verdict::LinearizableTrend => Status::Pass,
        Verdict::NonLinearizableTrend => Status::Fail,
        Verdict::Inconclusive => Status::Inconclusive,
    };
    let summary = format!(
        "{}contrast_slope {}\n",
        report.summary(),
        contrast.ratio_slope.map_or("NA".into(), |v| format!("{v:e}"))
    );
    Ok(KindResult {
        status: expected(s, &label, default),
        label,
        checks,
        summary,
    })
}

fn superposition(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let grid = grid_of(s)?;
    let unit = setup(s, 1.0, grid.dim())?;
    let t = s.t_final.expect("validated");
    let opts = s.run_options();
    let remainder = match s.remainder_norm {
        Some(n) => {
            let w = gaussian_field(grid, 2.0, &[3.0, 0.0][..grid.dim()], &[0.0, 0.0][..grid.dim()]).context(&s.name)?;
            let scale = n / w.l2_norm();
            Some(w.scaled(Complex64::new(scale, 0.0)))
        }
        None => None,
    };
    let input = SuperpositionInput {
        profiles: profile_items(s, grid.dim())?,
        remainder,
    };
    let report = superposition_experiment(&s.name, &input, &s.ladder, t, &unit, grid, &opts).context(&s.name)?;
    art.text("superposition.csv", report.to_csv());
    curves(art, &report.plot_curves());
    let mut checks = Checks::default();
    if let Some(f) = s.checks.min_decrease {
        let v = report.decrease_factor;
        checks.check(v.is_some_and(|v| v >= f), format!("rho decrease factor {} >= {f}", show(v)));
    }
    let mut summary = report.summary();
    if s.checks.check_single {
        let single = SuperpositionInput {
            profiles: input.profiles[..1].to_vec(),
            remainder: None,
        };
        let r1 = superposition_experiment(&format!("{}_single", s.name), &single, &s.ladder, t, &unit, grid, &opts)
            .context(&s.name)?;
        let worst = r1.rows.iter().map(|r| r.rho / r.mass).fold(0.0, f64::max);
        let _ = writeln!(summary, "single_profile_rho_over_mass {worst:e}");
        art.text("superposition_single.csv", r1.to_csv());
        checks.check(worst <= 1e-10, format!("single-profile rho/mass {worst:e} <= 1e-10"));
    }
    let label = if report.pass { "pass" } else { "fail" }.to_string();
    Ok(KindResult {
        status: if report.pass { Status::Pass } else { Status::Fail },
        label,
        checks,
        summary,
    })
}

const DEFAULT_RATE_WINDOW: (f64, f64) = (0.04, 0.64);

fn blowup_rate(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let grid = grid_of(s)?;
    let t = s.t_final.unwrap_or(1.0);
    let r = blowup_rate_probe(t, grid, s.window.unwrap_or(DEFAULT_RATE_WINDOW), s.samples.unwrap_or(9)).context(&s.name)?;
    art.text("blowup_rate.csv", r.to_csv());
    curves(art, &r.plot_curves());
    let tol = s.checks.tolerance.unwrap_or(0.05);
    let mut checks = Checks::default();
    for (name, fit, target) in [
        ("lgamma", r.lgamma_fit, -2.0),
        ("gradient", r.gradient_fit, -1.0),
        ("width", r.width_fit, 1.0),
    ] {
        checks.check(
            (fit.slope - target).abs() <= tol,
            format!("{name} exponent {:e} within {tol} of {target}", fit.slope),
        );
    }
    checks.check(r.bound_holds, format!("(T-t)/width^2 >= 1 (min {:e})", r.min_rate_ratio));
    let drift = s.checks.max_mass_drift.unwrap_or(1e-8);
    checks.check(r.mass_drift < drift, format!("mass drift {:e} < {drift:e}", r.mass_drift));
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: r.summary(),
    })
}

fn blowup_decompose(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let grid = grid_of(s)?;
    let t = s.t_final.unwrap_or(1.0);
    let times = s.times.clone().unwrap_or_else(|| default_blowup_times(t));
    let r = blowup_decomposition_probe(t, &times, grid, &s.extraction).context(&s.name)?;
    art.text("blowup_decomposition.csv", r.to_csv());
    let mut checks = Checks::default();
    let frac = s.checks.min_dominant_fraction.unwrap_or(0.8);
    let spread = s.checks.max_scale_spread.unwrap_or(2.0);
    let gain = s.checks.max_strip_gain.unwrap_or(0.05);
    for row in &r.rows {
        checks.check(
            row.dominant_fraction >= frac,
            format!("t={:e}: dominant fraction {:e} >= {frac}", row.time, row.dominant_fraction),
        );
        checks.check(
            row.strip_gain < gain,
            format!("t={:e}: strip gain {:e} < {gain}", row.time, row.strip_gain),
        );
    }
    checks.check(
        r.scale_ratio_spread <= spread,
        format!("scale/(T-t) spread {:e} <= {spread}", r.scale_ratio_spread),
    );
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: r.summary(),
    })
}

fn extract(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let u = generator(s)?(s.epsilon).context(&s.name)?;
    let result = decompose(&u, &s.extraction).context(&s.name)?;
    art.text("extraction.txt", result.report());
    for (j, b) in result.bubbles.iter().enumerate() {
        art.add(format!("bubble_{j}.nlsf"), field_bytes(&b.waveform)?);
    }
    let mut checks = Checks::default();
    let c = &s.checks;
    if let Some(n) = c.expect_bubbles {
        checks.check(result.bubbles.len() == n, format!("{} bubbles, expected {n}", result.bubbles.len()));
    }
    if let Some(f) = c.max_residual {
        let v = result.residual_fraction();
        checks.check(v < f, format!("residual mass fraction {v:e} < {f}"));
    }
    if let Some(f) = c.max_defect {
        let v = result.ledger.relative_defect().abs();
        checks.check(v < f, format!("relative Pythagorean defect {v:e} < {f}"));
    }
    // ground truth is known when the data are built from profiles at ε = 1
    if matches!(s.data, Some(DataSource::Profiles)) && s.epsilon == 1.0 && !result.bubbles.is_empty() {
        for (j, p) in s.profiles.iter().enumerate() {
            let truth: Gamma = p.spec.gamma(1.0);
            let nearest = result
                .bubbles
                .iter()
                .min_by(|a, b| {
                    bubble_separation(&a.gamma(), &truth)
                        .total_cmp(&bubble_separation(&b.gamma(), &truth))
                })
                .expect("nonempty");
            let levels = (nearest.h / truth.h).log2().abs();
            checks.check(levels <= 1.0, format!("profile {j}: scale {:e} vs {:e} within one dyadic level", nearest.h, truth.h));
            let dx: f64 = (0..u.grid().dim())
                .map(|a| (nearest.x_star[a] - truth.x0[a]).powi(2))
                .sum::<f64>()
                .sqrt();
            checks.check(dx <= truth.h, format!("profile {j}: core offset {dx:e} <= scale {:e}", truth.h));
        }
    }
    Ok(KindResult {
        label: format!("{:?}", result.status).to_lowercase(),
        status: Status::Pass,
        checks,
        summary: format!(
            "bubbles {}\nresidual_fraction {:e}\nrelative_defect {:e}\n",
            result.bubbles.len(),
            result.residual_fraction(),
            result.ledger.relative_defect()
        ),
    })
}

fn norms(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let u = generator(s)?(s.epsilon).context(&s.name)?;
    let st = setup(s, s.epsilon, u.grid().dim())?;
    let l = conserved_ledger(&u, &st).context(&s.name)?;
    let text = format!(
        "mass {:e}\nlinear_energy {:e}\nnonlinear_energy {:e}\nlgamma_integral {:e}\nmax_abs {:e}\nspectral_tail_0.9 {:e}\nwindow_witness {:e}\n",
        l.mass,
        l.linear_energy,
        l.nonlinear_energy,
        u.lp_integral(st.gamma()),
        u.max_abs(),
        spectral_tail(&u, 0.9 * u.grid().nyquist()),
        if u.is_zero() { 0.0 } else { residual_witness(&u).context(&s.name)? },
    );
    art.text("norms.txt", text.clone());
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks: Checks::default(),
        summary: text,
    })
}

fn conservation(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let u0 = generator(s)?(s.epsilon).context(&s.name)?;
    let st = setup(s, s.epsilon, u0.grid().dim())?;
    let dt = s.dt.unwrap_or(1e-3);
    let steps = s.steps.unwrap_or(1000);
    let t = dt * steps as f64;
    let e0 = conserved_ledger(&u0, &st).context(&s.name)?;
    let mut csv = String::from("dt,steps,mass_drift,energy_drift\n");
    let mut drifts = Vec::new();
    for k in 0..3 {
        let n = steps << k;
        let traj = evolve_guarded(&u0, t, n, &st, &[t], BlowUpGuard::default()).context(&s.name)?;
        let e = conserved_ledger(&traj.last().expect("one snapshot").field, &st).context(&s.name)?;
        let mass = ((e.mass * e.mass) - (e0.mass * e0.mass)).abs() / (e0.mass * e0.mass);
        let energy = (e.nonlinear_energy - e0.nonlinear_energy).abs();
        let _ = writeln!(csv, "{:e},{n},{mass:e},{energy:e}", t / n as f64);
        drifts.push((mass, energy));
    }
    art.text("conservation.csv", csv);
    let mut checks = Checks::default();
    let max_mass = s.checks.max_mass_drift.unwrap_or(1e-10);
    checks.check(drifts[0].0 < max_mass, format!("relative mass drift {:e} < {max_mass:e}", drifts[0].0));
    let ratio = drifts[0].1 / drifts[1].1;
    let min_ratio = s.checks.min_order_ratio.unwrap_or(3.5);
    checks.check(ratio >= min_ratio, format!("energy drift ratio at dt/2 {ratio:e} >= {min_ratio}"));
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: format!(
            "mass_drift {:e}\nenergy_drift {:e}\nenergy_drift_half {:e}\nenergy_drift_quarter {:e}\norder_ratio {ratio:e}\n",
            drifts[0].0, drifts[0].1, drifts[1].1, drifts[2].1
        ),
    })
}

fn free_oracle(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let grid = grid_of(s)?;
    let Some(DataSource::Gaussian {
        width, center, frequency, ..
    }) = &s.data
    else {
        unreachable!("the parser stores the oracle Gaussian")
    };
    let st = setup(s, s.epsilon, grid.dim())?.linear();
    let u0 = gaussian_field(grid, *width, center, frequency).context(&s.name)?;
    let tol = s.checks.tolerance.unwrap_or(1e-8);
    let times = s.times.clone().unwrap_or_else(|| vec![0.5, 2.0, 10.0]);
    let mut csv = String::from("time,relative_l2_error\n");
    let mut checks = Checks::default();
    for &t in &times {
        let num = free_propagate(&u0, t, &st).context(&s.name)?;
        let exact = free_gaussian(grid, *width, center, frequency, t, s.epsilon).context(&s.name)?;
        let err = num.sub(&exact).context(&s.name)?.l2_norm() / exact.l2_norm();
        let _ = writeln!(csv, "{t:e},{err:e}");
        checks.check(err < tol, format!("t={t:e}: relative error {err:e} < {tol:e}"));
    }
    art.text("free_oracle.csv", csv);
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: String::new(),
    })
}

fn soliton(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let grid = grid_of(s)?;
    let q = ground_state(grid.dim(), grid).context(&s.name)?.into_field();
    let st = setup(s, 1.0, grid.dim())?;
    let t = s.t_final.expect("validated");
    let dt = s.dt.unwrap_or(1e-4);
    let steps = (t / dt).round().max(1.0) as usize;
    let traj = evolve_guarded(&q, t, steps, &st, &[t], BlowUpGuard::default()).context(&s.name)?;
    let exact = q.scaled(Complex64::from_polar(1.0, t));
    let err = traj.last().expect("one snapshot").field.sub(&exact).context(&s.name)?.l2_norm();
    let tol = s.checks.tolerance.unwrap_or(1e-6);
    let mut checks = Checks::default();
    checks.check(err < tol, format!("|u(T) - e^(iT)Q| = {err:e} < {tol:e}"));
    art.text("soliton.csv", format!("dim,T,dt,error\n{},{t:e},{:e},{err:e}\n", grid.dim(), t / steps as f64));
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: format!("error {err:e}\n"),
    })
}

fn scaling(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let src = s.data.clone().expect("validated");
    let unit_field = base_field(s, &src)?;
    let grid = *unit_field.grid();
    let unit = setup(s, 1.0, grid.dim())?;
    let t = s.t_final.unwrap_or(1.0);
    let dt = s.dt.unwrap_or(1e-3);
    let steps = (t / dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=8).map(|k| t * k as f64 / 8.0).collect();
    let gamma = unit.gamma();
    let unit_traj = evolve_guarded(&unit_field, t, steps, &unit, &times, BlowUpGuard::default()).context(&s.name)?;
    let unit_static = unit_field.lp_integral(gamma);
    let unit_st = spacetime_lgamma(&unit_traj, gamma).context(&s.name)?;
    let unit_free = spacetime_lgamma(&free_trajectory(&unit_field, &unit.linear(), &times).context(&s.name)?, gamma)
        .context(&s.name)?;
    let tol = s.checks.tolerance.unwrap_or(1e-8);
    let mut csv = String::from("epsilon,static_rel_error,spacetime_rel_error,free_spacetime_rel_error,commutation_l2\n");
    let mut checks = Checks::default();
    for &e in s.ladder.values() {
        let u = rescale_from_unit(&unit_field, e).context(&s.name)?;
        let st = setup(s, e, grid.dim())?;
        let stat = (e * u.lp_integral(gamma) - unit_static).abs() / unit_static;
        let traj = evolve_guarded(&u, t, steps, &st, &times, BlowUpGuard::default()).context(&s.name)?;
        let sp = (e * spacetime_lgamma(&traj, gamma).context(&s.name)? - unit_st).abs() / unit_st;
        let free = free_trajectory(&u, &st.linear(), &times).context(&s.name)?;
        let fr = (e * spacetime_lgamma(&free, gamma).context(&s.name)? - unit_free).abs() / unit_free;
        let mut comm: f64 = 0.0;
        for (a, b) in traj.snapshots.iter().zip(&unit_traj.snapshots) {
            let back = rescale_from_unit(&b.field, e).context(&s.name)?;
            comm = comm.max(a.field.sub(&back).context(&s.name)?.l2_norm());
        }
        let _ = writeln!(csv, "{e:e},{stat:e},{sp:e},{fr:e},{comm:e}");
        checks.check(stat < tol, format!("eps={e:e}: static identity error {stat:e} < {tol:e}"));
        checks.check(sp < tol, format!("eps={e:e}: nonlinear space-time identity error {sp:e} < {tol:e}"));
        checks.check(fr < tol, format!("eps={e:e}: free space-time identity error {fr:e} < {tol:e}"));
        checks.check(comm < tol, format!("eps={e:e}: commutation error {comm:e} < {tol:e}"));
    }
    art.text("scaling.csv", csv);
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: String::new(),
    })
}

fn strichartz(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let r = strichartz_family_probe(grid_of(s)?).context(&s.name)?;
    art.text("strichartz.csv", r.to_csv());
    let band = s.checks.max_band.unwrap_or(10.0);
    let mut checks = Checks::default();
    checks.check(r.refined_band <= band, format!("refined ratio band {:e} <= {band}", r.refined_band));
    checks.check(r.plain_band <= band, format!("plain ratio band {:e} <= {band}", r.plain_band));
    Ok(KindResult {
        label: "computed".into(),
        status: Status::Pass,
        checks,
        summary: r.summary(),
    })
}

fn determinism(s: &Scenario, art: &mut Artifacts) -> Result<KindResult> {
    let nested = parse_scenario(s.nested.as_ref().expect("validated"))?;
    let mut digests = Vec::new();
    let mut manifests = Vec::new();
    for tag in ["run_a", "run_b"] {
        let mut n = nested.clone();
        n.output = s.output.join(tag);
        let out = run(&n)?;
        digests.push(out.manifest.digest());
        manifests.push(out.manifest);
    }
    let same = manifests[0] == manifests[1];
    art.text(
        "determinism.txt",
        format!("nested {}\nrun_a {}\nrun_b {}\nidentical {same}\n", nested.name, digests[0], digests[1]),
    );
    let mut checks = Checks::default();
    checks.check(same, format!("manifests of two runs of '{}' are identical", nested.name));
    Ok(KindResult {
        label: if same { "identical" } else { "differs" }.into(),
        status: Status::Pass,
        checks,
        summary: format!("manifest_digest {}\n", digests[0]),
    })
}
