//! Greedy bubble extraction from a single datum.
//!
//! Each iteration finds the Fourier window carrying the most concentrated
//! `L^{4/3}` mass, caps its amplitude, locates the space-time core of the
//! capped piece by refocusing it under the free flow, and subtracts the
//! back-transported ball-restricted core. Bubble scales follow the window:
//! a window of half width `τ` yields a bubble of spatial scale `h = 1/τ`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{NlsError, Result};
use crate::fft::{self, Direction};
use crate::functionals::{best_window_1d, strichartz_window_witness, FourierWindow};
use crate::grid::{Field, Grid, Representation};
use crate::profiles::{separation, DecompositionLedger, Gamma, LedgerEntry, ProfileSpec, ScaleExpr};

/// Lebesgue exponent of the 1D window functional.
pub const WINDOW_EXPONENT_1D: f64 = 4.0 / 3.0;
/// Lebesgue exponent of the 2D single-square functional; must exceed 12/7.
pub const WINDOW_EXPONENT_2D: f64 = 1.8;
/// Maximum number of square centres examined per axis and dyadic level.
const MAX_SQUARE_CENTERS: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionConfig {
    /// Residual threshold; `None` means `0.1·‖input‖`.
    pub delta: Option<f64>,
    pub max_bubbles: usize,
    /// Admissible bubble scales `[h_min, h_max]`.
    pub scale_range: (f64, f64),
    /// Unit-scale refocusing times searched for the core.
    pub time_range: (f64, f64),
    pub time_step: f64,
    /// `C′` in the amplitude cap `A = C′/(√τ δ⁶)`.
    pub cap_constant: f64,
    /// Core ball radius in unit-scale coordinates.
    pub ball_radius: f64,
    /// Unit-scale radius inside which the refocused piece is kept whole
    /// when forming the bubble waveform.
    pub capture_radius: f64,
    /// Width of the smooth taper outside `capture_radius`.
    pub capture_taper: f64,
    /// The waveform is cut from the residual restricted to the search
    /// window widened by this factor.
    pub capture_window_factor: f64,
    /// Smallest accepted squared-mass decrement, relative to `‖input‖²`.
    pub min_decrement: f64,
    /// Bubbles closer than this in the separation functional are merged.
    pub merge_threshold: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            delta: None,
            max_bubbles: 16,
            scale_range: (0.0, f64::INFINITY),
            time_range: (-4.0, 4.0),
            time_step: 1.0 / 16.0,
            cap_constant: 1.0,
            ball_radius: 1.0,
            capture_radius: 2.0,
            capture_taper: 1.0,
            capture_window_factor: 3.0,
            min_decrement: 1e-4,
            merge_threshold: 8.0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NlsError::InvalidArgument(m.into()));
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return bad("delta must be positive");
            }
        }
        if self.max_bubbles == 0 {
            return bad("max_bubbles must be at least 1");
        }
        if !(self.scale_range.0 >= 0.0 && self.scale_range.0 < self.scale_range.1) {
            return bad("scale range must satisfy 0 <= h_min < h_max");
        }
        if !(self.time_step > 0.0) || !(self.time_range.0 <= self.time_range.1) {
            return bad("time search range is empty");
        }
        if !(self.cap_constant > 0.0) || !(self.ball_radius > 0.0) || !(self.capture_radius > 0.0) {
            return bad("cap constant and radii must be positive");
        }
        if !(self.capture_window_factor >= 1.0) {
            return bad("capture window factor must be at least 1");
        }
        if !(self.capture_taper >= 0.0) || !(self.min_decrement >= 0.0) {
            return bad("capture taper and decrement floor must be nonnegative");
        }
        Ok(())
    }

    fn search_times(&self) -> Vec<f64> {
        let (a, b) = self.time_range;
        let steps = ((b - a) / self.time_step + 1e-9).floor() as usize;
        (0..=steps).map(|k| a + k as f64 * self.time_step).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSearch {
    /// Bubble scale `1/τ`.
    pub h: f64,
    pub theta: [f64; 2],
    pub score: f64,
    pub window: FourierWindow,
}

impl WindowSearch {
    /// Score normalised to the homogeneity of the `L²` norm.
    pub fn witness(&self, dim: usize) -> f64 {
        match dim {
            1 => self.score.powf(1.0 / WINDOW_EXPONENT_1D),
            _ => self.score.powf(0.25),
        }
    }
}

/// Window search over all resolvable dyadic scales.
pub fn fourier_window_search(field: &Field) -> Result<WindowSearch> {
    fourier_window_search_in(field, (0.0, f64::INFINITY))
}

/// Window search restricted to bubble scales `h ∈ [h_range.0, h_range.1]`.
///
/// 1D maximises `τ^{-1/3} ∫_{[θ-τ,θ+τ]} |û|^{4/3}`; 2D maximises the
/// single-square term `(2τ)⁴((2τ)^{-2}∫_Q |û|^p)^{4/p}` over squares of
/// side `2τ` centred on grid frequencies.
pub fn fourier_window_search_in(field: &Field, h_range: (f64, f64)) -> Result<WindowSearch> {
    if field.is_zero() {
        return Err(NlsError::InvalidArgument("window search on a zero field".into()));
    }
    let tau_range = (1.0 / h_range.1, if h_range.0 > 0.0 { 1.0 / h_range.0 } else { f64::INFINITY });
    let uh = field.to_frequency();
    let (window, score) = match uh.grid().dim() {
        1 => best_window_1d(&uh, WINDOW_EXPONENT_1D, -1.0 / 3.0, tau_range),
        _ => best_square_2d(&uh, WINDOW_EXPONENT_2D, tau_range),
    };
    if !(score > 0.0) {
        return Err(NlsError::InvalidArgument(
            "no window in the requested scale range carries mass".into(),
        ));
    }
    Ok(WindowSearch {
        h: window.scale(),
        theta: window.center,
        score,
        window,
    })
}

/// Summed-area table with `(n+1)²` entries.
struct AreaTable {
    n: usize,
    s: Vec<f64>,
}

impl AreaTable {
    fn new(w: &[f64], n: usize) -> Self {
        let m = n + 1;
        let mut s = vec![0.0; m * m];
        for a in 0..n {
            for b in 0..n {
                s[(a + 1) * m + b + 1] = w[a * n + b] + s[a * m + b + 1] + s[(a + 1) * m + b] - s[a * m + b];
            }
        }
        AreaTable { n, s }
    }

    /// Sum over the inclusive index box `[a0, a1] × [b0, b1]`.
    fn rect(&self, a0: usize, a1: usize, b0: usize, b1: usize) -> f64 {
        let m = self.n + 1;
        self.s[(a1 + 1) * m + b1 + 1] - self.s[a0 * m + b1 + 1] - self.s[(a1 + 1) * m + b0] + self.s[a0 * m + b0]
    }
}

/// Inclusive index ranges with trapezoid weights along one axis.
fn trapezoid_pieces(i: usize, m: usize, n: usize) -> Vec<(usize, usize, f64)> {
    let lo_raw = i as isize - m as isize;
    let hi_raw = i + m;
    let lo = lo_raw.max(0) as usize;
    let hi = hi_raw.min(n - 1);
    let mut out = vec![(lo, hi, 1.0)];
    if lo_raw >= 0 {
        out.push((lo, lo, -0.5));
    }
    if hi_raw < n {
        out.push((hi, hi, -0.5));
    }
    out
}

fn best_square_2d(uh: &Field, p: f64, tau_range: (f64, f64)) -> (FourierWindow, f64) {
    let g = uh.grid();
    let n = g.points_per_axis();
    let dxi = g.dxi();
    let w: Vec<f64> = uh.samples().iter().map(|z| z.norm_sqr().powf(p / 2.0)).collect();
    let table = AreaTable::new(&w, n);
    let stride = n.div_ceil(MAX_SQUARE_CENTERS).max(1);
    let centers: Vec<usize> = (0..n).step_by(stride).collect();
    let mut levels = Vec::new();
    let mut m = 1usize;
    while m <= n {
        let tau = m as f64 * dxi;
        if tau >= tau_range.0 && tau <= tau_range.1 {
            levels.push(m);
        }
        m *= 2;
    }
    let fallback = FourierWindow {
        center: [g.axis_frequency(n / 2), g.axis_frequency(n / 2)],
        half_width: dxi,
    };
    let candidates: Vec<(FourierWindow, f64)> = levels
        .par_iter()
        .map(|&m| {
            let tau = m as f64 * dxi;
            let side = 2.0 * tau;
            let mut best = (fallback, 0.0);
            for &i in &centers {
                let pa = trapezoid_pieces(i, m, n);
                for &j in &centers {
                    let pb = trapezoid_pieces(j, m, n);
                    let mut s = 0.0;
                    for &(a0, a1, ca) in &pa {
                        for &(b0, b1, cb) in &pb {
                            s += ca * cb * table.rect(a0, a1, b0, b1);
                        }
                    }
                    let integral = s * dxi * dxi;
                    let term = side.powi(4) * (integral / (side * side)).max(0.0).powf(4.0 / p);
                    if term > best.1 {
                        best = (
                            FourierWindow {
                                center: [g.axis_frequency(i), g.axis_frequency(j)],
                                half_width: tau,
                            },
                            term,
                        );
                    }
                }
            }
            best
        })
        .collect();
    candidates
        .into_iter()
        .fold((fallback, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc })
}

/// Residual smallness measure: the 1D window witness with `p = 4/3`, or the
/// fourth root of the best single-square term in 2D.
pub fn residual_witness(field: &Field) -> Result<f64> {
    if field.is_zero() {
        return Ok(0.0);
    }
    match field.grid().dim() {
        1 => Ok(strichartz_window_witness(field, WINDOW_EXPONENT_1D)?.value),
        _ => Ok(fourier_window_search(field)?.witness(2)),
    }
}

/// `A = C′/(√τ δ⁶)`.
pub fn amplitude_threshold(window: &FourierWindow, delta: f64, cap_constant: f64) -> f64 {
    cap_constant / (window.half_width.sqrt() * delta.powi(6))
}

/// Splits `field` into `v̂ = û·1_{window ∩ {|û| ≤ A}}` and the leftover.
/// Both parts are returned in position representation.
pub fn amplitude_cap(field: &Field, window: &FourierWindow, delta: f64, cap_constant: f64) -> Result<(Field, Field)> {
    if !(delta > 0.0) {
        return Err(NlsError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let a = amplitude_threshold(window, delta, cap_constant);
    let uh = field.to_frequency();
    let d = uh.grid().dim();
    let g = *uh.grid();
    let mut kept = Vec::with_capacity(g.len());
    let mut rest = Vec::with_capacity(g.len());
    for (i, &z) in uh.samples().iter().enumerate() {
        let k = g.frequency(i);
        if window.contains(&k[..d]) && z.norm() <= a {
            kept.push(z);
            rest.push(Complex64::new(0.0, 0.0));
        } else {
            kept.push(Complex64::new(0.0, 0.0));
            rest.push(z);
        }
    }
    Ok((
        Field::new(g, Representation::Frequency, kept)?.to_position(),
        Field::new(g, Representation::Frequency, rest)?.to_position(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoreSearch {
    pub x_star: [f64; 2],
    /// Unit-scale refocusing time; the physical time is `s*·h²`.
    pub s_star: f64,
    pub local_mass: f64,
}

/// Removes the window modulation: `e^{-iθ·x} u(x)` with `θ` snapped to the grid.
fn demodulate(field: &Field, theta: &[f64; 2], sign: f64) -> Field {
    let d = field.grid().dim();
    field.to_position().map_indexed(|x, z| {
        let phase: f64 = (0..d).map(|a| x[a] * theta[a]).sum();
        z * Complex64::from_polar(1.0, sign * phase)
    })
}

fn snap_to_grid(grid: &Grid, theta: [f64; 2]) -> [f64; 2] {
    let dxi = grid.dxi();
    let mut out = [0.0; 2];
    for a in 0..grid.dim() {
        out[a] = (theta[a] / dxi).round() * dxi;
    }
    out
}

/// Periodic distance from the grid origin of FFT-ordered index `m`.
fn kernel_offset_sq(grid: &Grid, idx: usize) -> f64 {
    let n = grid.points_per_axis();
    let dx = grid.dx();
    let ij = grid.axis_indices(idx);
    (0..grid.dim())
        .map(|a| {
            let s = fft::signed_index(ij[a], n) as f64 * dx;
            s * s
        })
        .sum()
}

/// Free propagation for `unit_time · h²` of FFT-ordered spectrum `spec`.
fn propagate_spectrum(grid: &Grid, spec: &[Complex64], t: f64) -> Vec<Complex64> {
    let inv_n = 1.0 / grid.len() as f64;
    let mut data: Vec<Complex64> = spec
        .iter()
        .enumerate()
        .map(|(i, &z)| z * Complex64::from_polar(inv_n, -t * grid.fft_order_xi_sq(i) / 2.0))
        .collect();
    fft::transform(&mut data, grid.points_per_axis(), grid.dim(), Direction::Inverse);
    data
}

/// Maximises, over `s` in the configured range and `x` on the grid, the
/// mass of the refocused unit-scale piece `e^{isΔ/2}P` in the ball of the
/// configured radius around `x`. Works in physical coordinates: a unit ball
/// at scale `h` is a ball of radius `h`, and unit time `s` is time `s·h²`.
pub fn spacetime_core_search(piece: &Field, window: &FourierWindow, config: &ExtractionConfig) -> Result<CoreSearch> {
    if !(config.time_step > 0.0) || config.time_range.0 > config.time_range.1 {
        return Err(NlsError::InvalidArgument("time search range is empty".into()));
    }
    if piece.is_zero() {
        return Err(NlsError::InvalidArgument("core search on a zero piece".into()));
    }
    let g = *piece.grid();
    let n_total = g.len();
    let h = window.scale();
    let theta = snap_to_grid(&g, window.center);
    let mut spec = demodulate(piece, &theta, -1.0).into_samples();
    fft::transform(&mut spec, g.points_per_axis(), g.dim(), Direction::Forward);

    let radius = config.ball_radius * h;
    let mut kernel: Vec<Complex64> = (0..n_total)
        .map(|i| {
            let inside = kernel_offset_sq(&g, i) <= radius * radius * (1.0 + 1e-12);
            Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    fft::transform(&mut kernel, g.points_per_axis(), g.dim(), Direction::Forward);

    let cell = g.cell_volume();
    let inv_n = 1.0 / n_total as f64;
    let times = config.search_times();
    let results: Vec<(f64, usize, f64)> = times
        .par_iter()
        .map(|&s| {
            let w = propagate_spectrum(&g, &spec, s * h * h);
            let mut rho: Vec<Complex64> = w.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
            fft::transform(&mut rho, g.points_per_axis(), g.dim(), Direction::Forward);
            for (r, k) in rho.iter_mut().zip(kernel.iter()) {
                *r *= k * inv_n;
            }
            fft::transform(&mut rho, g.points_per_axis(), g.dim(), Direction::Inverse);
            let (idx, best) = rho
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, z)| if z.re > acc.1 { (i, z.re) } else { acc });
            (s, idx, best * cell)
        })
        .collect();
    // strict improvement keeps the earliest time on ties, then prefer small |s|
    let mut best = results[0];
    for &r in &results[1..] {
        if r.2 > best.2 * (1.0 + 1e-12) || (r.2 >= best.2 * (1.0 - 1e-12) && r.0.abs() < best.0.abs()) {
            best = r;
        }
    }
    let pos = g.position(best.1);
    Ok(CoreSearch {
        x_star: pos,
        s_star: best.0,
        local_mass: best.2.min(piece.norm_sqr()),
    })
}

#[derive(Clone, Debug)]
pub struct Bubble {
    pub h: f64,
    pub theta: [f64; 2],
    pub x_star: [f64; 2],
    pub s_star: f64,
    pub window: FourierWindow,
    /// Unit-scale waveform `φ` on the grid contracted by `h`.
    pub waveform: Field,
    /// The bubble `H_Γ(φ)(0)` on the input grid.
    pub field: Field,
    /// `‖field‖²`
    pub mass: f64,
    /// Number of greedy pieces merged into this bubble.
    pub members: usize,
}

impl Bubble {
    /// Physical time shift `t₀ = s*·h²`.
    pub fn t0(&self) -> f64 {
        self.s_star * self.h * self.h
    }

    pub fn gamma(&self) -> Gamma {
        Gamma {
            h: self.h,
            t0: self.t0(),
            x0: self.x_star,
            xi0: self.theta,
        }
    }

    pub fn profile_spec(&self) -> ProfileSpec {
        let d = self.field.grid().dim();
        ProfileSpec {
            h: ScaleExpr::constant(self.h),
            t0: ScaleExpr::constant(self.t0()),
            x0: (0..d).map(|a| ScaleExpr::constant(self.x_star[a])).collect(),
            xi0: (0..d).map(|a| ScaleExpr::constant(self.theta[a])).collect(),
            admissible: false,
        }
    }
}

/// Inverse of `φ ↦ H_Γ(φ)(0)` on the grid: demodulate, refocus, centre and
/// dilate to unit scale.
fn unprofile(field: &Field, gamma: &Gamma, setup_free: &FreeFlow) -> Field {
    let g = *field.grid();
    let d = g.dim();
    let refocused = setup_free.propagate(&demodulate(field, &gamma.xi0, -1.0), gamma.t0);
    let centered = refocused.translated(&[-gamma.x0[0], -gamma.x0[1]][..d]);
    let amp = gamma.h.powf(d as f64 / 2.0);
    let unit_grid = g.rescaled(1.0 / gamma.h).unwrap_or(g);
    let samples = centered.into_samples().into_iter().map(|z| z * amp).collect();
    Field::from_parts(unit_grid, Representation::Position, samples)
}

/// Free Schrödinger flow with unit `ε` on a fixed grid.
struct FreeFlow;

impl FreeFlow {
    fn propagate(&self, field: &Field, t: f64) -> Field {
        let g = *field.grid();
        let mut spec = field.to_position().into_samples();
        fft::transform(&mut spec, g.points_per_axis(), g.dim(), Direction::Forward);
        Field::from_parts(g, Representation::Position, propagate_spectrum(&g, &spec, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractionStatus {
    /// Residual witness fell below `δ`.
    Converged,
    /// `max_bubbles` reached with the witness still above `δ`.
    BudgetExhausted,
    /// An iteration removed less than the configured mass floor.
    NoProgress,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub bubbles: Vec<Bubble>,
    pub residual: Field,
    pub ledger: DecompositionLedger,
    pub status: ExtractionStatus,
    pub delta: f64,
    /// Residual witness before each greedy step and at termination.
    pub witness_history: Vec<f64>,
    /// `‖residual‖_{L²}` before each greedy step and at termination.
    pub residual_history: Vec<f64>,
}

impl ExtractionResult {
    /// Sum of bubble fields and the residual.
    pub fn reconstruction(&self) -> Result<Field> {
        let mut acc = self.residual.to_position();
        for b in &self.bubbles {
            acc = acc.add(&b.field)?;
        }
        Ok(acc)
    }

    pub fn residual_fraction(&self) -> f64 {
        if self.ledger.total_mass_sqr == 0.0 {
            0.0
        } else {
            self.residual.norm_sqr() / self.ledger.total_mass_sqr
        }
    }

    /// One line per bubble followed by residual statistics.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let d = self.residual.grid().dim();
        let _ = writeln!(out, "# bubble h theta x_star s_star mass members");
        for (j, b) in self.bubbles.iter().enumerate() {
            let _ = writeln!(
                out,
                "bubble {j} {:e} {} {} {:e} {:e} {}",
                b.h,
                join(&b.theta[..d]),
                join(&b.x_star[..d]),
                b.s_star,
                b.mass,
                b.members
            );
        }
        let _ = writeln!(
            out,
            "residual mass {:e} witness {:e} delta {:e} status {:?}",
            self.residual.norm_sqr(),
            self.witness_history.last().copied().unwrap_or(0.0),
            self.delta,
            self.status
        );
        let _ = writeln!(
            out,
            "ledger total {:e} defect {:e} relative {:e}",
            self.ledger.total_mass_sqr,
            self.ledger.defect,
            self.ledger.relative_defect()
        );
        out
    }

    /// Writes `bubble_<j>.nlsf` for each waveform into `dir`.
    pub fn save_waveforms(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let mut paths = Vec::new();
        for (j, b) in self.bubbles.iter().enumerate() {
            let p = dir.as_ref().join(format!("bubble_{j}.nlsf"));
            b.waveform.save(&p)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

/// Separation used by the merge pass: the orthogonality functional
/// symmetrised over the pair, plus the Fourier-side distance `h|ξ_j - ξ_k|`.
pub fn bubble_separation(a: &Gamma, b: &Gamma) -> f64 {
    let dxi = ((a.xi0[0] - b.xi0[0]).powi(2) + (a.xi0[1] - b.xi0[1]).powi(2)).sqrt();
    separation(a, b).max(separation(b, a)) + a.h.max(b.h) * dxi
}

/// 1 inside `inner`, 0 beyond `inner + taper`, smooth (C^∞) in between.
fn capture_weight(r: f64, inner: f64, taper: f64) -> f64 {
    if r <= inner {
        1.0
    } else if r >= inner + taper {
        0.0
    } else {
        let s = (r - inner) / taper;
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        a / (a + b)
    }
}

/// One greedy extraction step on `residual`; `None` when nothing is captured.
fn extract_one(residual: &Field, delta: f64, config: &ExtractionConfig) -> Result<Option<Bubble>> {
    let search = fourier_window_search_in(residual, config.scale_range)?;
    let (piece, _) = amplitude_cap(residual, &search.window, delta, config.cap_constant)?;
    if piece.is_zero() {
        return Ok(None);
    }
    let core = spacetime_core_search(&piece, &search.window, config)?;
    let g = *residual.grid();
    let d = g.dim();
    let h = search.h;
    let theta = snap_to_grid(&g, search.window.center);
    let t0 = core.s_star * h * h;
    let flow = FreeFlow;
    let wide = FourierWindow {
        center: search.window.center,
        half_width: search.window.half_width * config.capture_window_factor,
    };
    let (captured, _) = amplitude_cap(residual, &wide, delta, config.cap_constant)?;
    let refocused = flow.propagate(&demodulate(&captured, &theta, -1.0), t0);
    let inner = config.capture_radius * h;
    let taper = config.capture_taper * h;
    let restricted = refocused.map_indexed(|x, z| {
        let r: f64 = (0..d).map(|a| (x[a] - core.x_star[a]).powi(2)).sum::<f64>().sqrt();
        z * capture_weight(r, inner, taper)
    });
    let b0 = demodulate(&flow.propagate(&restricted, -t0), &theta, 1.0);
    let nb = b0.norm_sqr();
    if nb == 0.0 {
        return Ok(None);
    }
    // least-squares coefficient makes the residual norm nonincreasing
    let c = residual.to_position().inner(&b0)? / nb;
    let field = b0.scaled(c);
    let gamma = Gamma {
        h,
        t0,
        x0: core.x_star,
        xi0: theta,
    };
    let waveform = unprofile(&field, &gamma, &flow);
    Ok(Some(Bubble {
        h,
        theta,
        x_star: core.x_star,
        s_star: core.s_star,
        window: search.window,
        waveform,
        mass: field.norm_sqr(),
        field,
        members: 1,
    }))
}

fn merge_bubbles(bubbles: Vec<Bubble>, threshold: f64) -> Result<Vec<Bubble>> {
    let n = bubbles.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if bubble_separation(&bubbles[i].gamma(), &bubbles[j].gamma()) < threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    let flow = FreeFlow;
    let mut out = Vec::new();
    for group in groups.into_iter().filter(|g| !g.is_empty()) {
        if group.len() == 1 {
            out.push(bubbles[group[0]].clone());
            continue;
        }
        let lead = *group
            .iter()
            .max_by(|&&a, &&b| bubbles[a].mass.total_cmp(&bubbles[b].mass))
            .expect("nonempty group");
        let mut field = bubbles[group[0]].field.clone();
        for &k in &group[1..] {
            field = field.add(&bubbles[k].field)?;
        }
        let mut merged = bubbles[lead].clone();
        merged.waveform = unprofile(&field, &merged.gamma(), &flow);
        merged.mass = field.norm_sqr();
        merged.field = field;
        merged.members = group.iter().map(|&k| bubbles[k].members).sum();
        out.push(merged);
    }
    out.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    Ok(out)
}

/// Iterated extraction until the residual witness drops below `δ`, the
/// bubble budget is spent, or an iteration stalls; followed by a merge pass.
pub fn decompose(field: &Field, config: &ExtractionConfig) -> Result<ExtractionResult> {
    config.validate()?;
    let input = field.to_position();
    let total = input.norm_sqr();
    let delta = config.delta.unwrap_or(0.1 * total.sqrt());
    let floor = config.min_decrement * total;
    let mut residual = input.clone();
    let mut bubbles = Vec::new();
    let mut witness_history = Vec::new();
    let mut residual_history = Vec::new();
    let status = loop {
        let witness = residual_witness(&residual)?;
        witness_history.push(witness);
        residual_history.push(residual.l2_norm());
        if residual.is_zero() || witness < delta {
            break ExtractionStatus::Converged;
        }
        if bubbles.len() >= config.max_bubbles {
            break ExtractionStatus::BudgetExhausted;
        }
        let Some(bubble) = extract_one(&residual, delta, config)? else {
            break ExtractionStatus::NoProgress;
        };
        let next = residual.sub(&bubble.field)?;
        let decrement = residual.norm_sqr() - next.norm_sqr();
        if !(decrement > floor) {
            break ExtractionStatus::NoProgress;
        }
        residual = next;
        bubbles.push(bubble);
    };
    let bubbles = merge_bubbles(bubbles, config.merge_threshold)?;
    let entries = bubbles
        .iter()
        .map(|b| LedgerEntry {
            spec: b.profile_spec(),
            waveform_mass: b.waveform.l2_norm(),
            built_mass: b.field.l2_norm(),
        })
        .collect();
    let remainder_mass = residual.l2_norm();
    let parts: f64 = bubbles.iter().map(|b| b.mass).sum();
    let ledger = DecompositionLedger {
        entries,
        remainder_mass,
        total_mass_sqr: total,
        defect: (total - parts - remainder_mass * remainder_mass).abs(),
    };
    Ok(ExtractionResult {
        bubbles,
        residual,
        ledger,
        status,
        delta,
        witness_history,
        residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{free_propagate, Nonlinearity, SemiclassicalSetup};
    use crate::functionals::gaussian_field;
    use crate::profiles::{build_profile_gamma, Waveform};

    fn grid1() -> Grid {
        Grid::new(1, 4096, 40.0).unwrap()
    }

    fn free() -> SemiclassicalSetup {
        SemiclassicalSetup::unit(Nonlinearity::Defocusing, 1).unwrap().linear()
    }

    /// Exhaustive oracle for the 1D functional over dyadic widths and all centres.
    fn brute_force_1d(u: &Field) -> (f64, f64, f64) {
        let uh = u.to_frequency();
        let g = uh.grid();
        let n = g.points_per_axis();
        let w: Vec<f64> = uh.samples().iter().map(|z| z.norm().powf(4.0 / 3.0)).collect();
        let mut best = (0.0, 0.0, 0.0);
        let mut m = 1;
        while m <= n {
            let tau = m as f64 * g.dxi();
            for i in 0..n {
                let mut s = 0.0;
                for k in i.saturating_sub(m)..=(i + m).min(n - 1) {
                    let edge = (k as isize - i as isize).unsigned_abs() == m;
                    s += if edge { 0.5 } else { 1.0 } * w[k];
                }
                let v = tau.powf(-1.0 / 3.0) * s * g.dxi();
                if v > best.0 {
                    best = (v, tau, g.axis_frequency(i));
                }
            }
            m *= 2;
        }
        best
    }

    #[test]
    fn window_search_rejects_zero() {
        assert!(fourier_window_search(&Field::zeros(grid1(), Representation::Position)).is_err());
    }

    #[test]
    fn window_search_on_gaussian_matches_exhaustive_scan() {
        let g = Grid::new(1, 1024, 40.0).unwrap();
        let u = gaussian_field(g, 1.0, &[0.0], &[0.0]).unwrap();
        let s = fourier_window_search(&u).unwrap();
        let (v, tau, c) = brute_force_1d(&u);
        assert!((s.score - v).abs() < 1e-12 * v);
        assert_eq!(s.window.half_width, tau);
        assert_eq!(s.theta[0], c);
        assert!(s.h > 0.5 && s.h < 2.0, "h = {}", s.h);
        assert!(s.theta[0].abs() <= g.dxi());
    }

    #[test]
    fn window_search_finds_single_window_support() {
        let g = Grid::new(1, 512, 20.0).unwrap();
        let dxi = g.dxi();
        let center = g.axis_frequency(300);
        let tau = 8.0 * dxi;
        let u = Field::sample_frequency(g, |k| {
            if (k[0] - center).abs() <= tau * (1.0 + 1e-9) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();
        let s = fourier_window_search(&u).unwrap();
        assert!((s.theta[0] - center).abs() < 1e-9);
        assert!((s.window.half_width - tau).abs() < 1e-9);
    }

    #[test]
    fn window_search_dilation_covariance() {
        let g = Grid::new(1, 4096, 80.0).unwrap();
        let base = gaussian_field(g, 1.0, &[0.0], &[0.0]).unwrap();
        let s0 = fourier_window_search(&base).unwrap();
        for h0 in [0.25, 4.0] {
            let u = gaussian_field(g, h0, &[0.0], &[0.0]).unwrap();
            let s = fourier_window_search(&u).unwrap();
            let ratio = s.h / (s0.h * h0);
            assert!((0.5..=2.0).contains(&ratio), "h0={h0} ratio={ratio}");
            let score_ratio = s.score / s0.score;
            let band = 2f64.powf(1.0 / 3.0);
            assert!(score_ratio <= band && score_ratio >= 1.0 / band, "{score_ratio}");
        }
    }

    #[test]
    fn window_search_in_two_dimensions() {
        let g = Grid::new(2, 128, 16.0).unwrap();
        let u = gaussian_field(g, 0.5, &[1.0, -1.0], &[3.0, -2.0]).unwrap();
        let s = fourier_window_search(&u).unwrap();
        assert!((s.theta[0] - 3.0).abs() <= 2.0 * g.dxi() && (s.theta[1] + 2.0).abs() <= 2.0 * g.dxi());
        assert!(s.h > 0.25 && s.h < 1.0, "{}", s.h);
    }

    #[test]
    fn amplitude_cap_splits_exactly() {
        let g = Grid::new(1, 1024, 20.0).unwrap();
        let u = Field::sample(g, |x| {
            let v = (-(x[0] - 1.0).powi(2)).exp() * (3.0 * x[0]).sin() + (-x[0] * x[0] / 8.0).exp();
            Complex64::new(v, 0.3 * x[0] * (-x[0].abs()).exp())
        })
        .unwrap();
        let w = FourierWindow {
            center: [0.5, 0.0],
            half_width: 2.0,
        };
        for delta in [0.05, 1.0, 1e3] {
            let (v, q) = amplitude_cap(&u, &w, delta, 1.0).unwrap();
            let lhs = u.norm_sqr();
            assert!((lhs - v.norm_sqr() - q.norm_sqr()).abs() < 1e-12 * lhs);
            assert!(v.add(&q).unwrap().sub(&u).unwrap().l2_norm() < 1e-12);
        }
        // A above max|û|: the piece is the full window restriction
        let (v, _) = amplitude_cap(&u, &w, 1e-3, 1.0).unwrap();
        let restricted = u.to_frequency().map_indexed(|k, z| if w.contains(k) { z } else { Complex64::new(0.0, 0.0) });
        assert!(v.sub(&restricted).unwrap().l2_norm() < 1e-12);
        // A → 0
        let (v, q) = amplitude_cap(&u, &w, 1e6, 1.0).unwrap();
        assert!(v.is_zero());
        assert!(q.sub(&u).unwrap().l2_norm() < 1e-12);
    }

    fn unit_window() -> FourierWindow {
        FourierWindow {
            center: [0.0, 0.0],
            half_width: 1.0,
        }
    }

    #[test]
    fn core_search_on_centered_gaussian() {
        let g = Grid::new(1, 2048, 40.0).unwrap();
        let p = gaussian_field(g, 1.0, &[0.0], &[0.0]).unwrap();
        let cfg = ExtractionConfig::default();
        let c = spacetime_core_search(&p, &unit_window(), &cfg).unwrap();
        assert!(c.x_star[0].abs() <= g.dx() + 1e-12);
        assert!(c.s_star.abs() <= cfg.time_step + 1e-12);
        assert!(c.local_mass >= 0.6 * p.norm_sqr());
        // oracle: ∫_{|x|≤1} e^{-x²} dx / √π = erf(1)
        assert!((c.local_mass / p.norm_sqr() - 0.842_700_792_949_714_9).abs() < 0.01);
    }

    #[test]
    fn core_search_translation_and_refocusing() {
        let g = Grid::new(1, 2048, 40.0).unwrap();
        let cfg = ExtractionConfig::default();
        let p = gaussian_field(g, 1.0, &[5.0], &[0.0]).unwrap();
        let c = spacetime_core_search(&p, &unit_window(), &cfg).unwrap();
        assert!((c.x_star[0] - 5.0).abs() <= g.dx() + 1e-12);
        let q = free_propagate(&gaussian_field(g, 1.0, &[0.0], &[0.0]).unwrap(), -2.0, &free()).unwrap();
        let c = spacetime_core_search(&q, &unit_window(), &cfg).unwrap();
        assert!((c.s_star - 2.0).abs() <= cfg.time_step + 1e-12, "{}", c.s_star);
        assert!(c.x_star[0].abs() <= g.dx() + 1e-12);
        assert!(c.local_mass <= q.norm_sqr());
    }

    #[test]
    fn core_search_errors() {
        let g = grid1();
        let p = gaussian_field(g, 1.0, &[0.0], &[0.0]).unwrap();
        let cfg = ExtractionConfig {
            time_range: (1.0, -1.0),
            ..ExtractionConfig::default()
        };
        assert!(spacetime_core_search(&p, &unit_window(), &cfg).is_err());
        let zero = Field::zeros(g, Representation::Position);
        assert!(spacetime_core_search(&zero, &unit_window(), &ExtractionConfig::default()).is_err());
    }

    #[test]
    fn zero_field_decomposes_to_nothing() {
        let r = decompose(&Field::zeros(grid1(), Representation::Position), &ExtractionConfig::default()).unwrap();
        assert!(r.bubbles.is_empty());
        assert!(r.residual.is_zero());
        assert_eq!(r.status, ExtractionStatus::Converged);
    }

    #[test]
    fn single_synthetic_bubble() {
        let g = grid1();
        let truth = Gamma {
            h: 0.25,
            t0: 0.0,
            x0: [2.0, 0.0],
            xi0: [8.0, 0.0],
        };
        let phi = Waveform::Gaussian.reference_field(1).unwrap();
        let u = build_profile_gamma(&truth, &phi, 0.0, g).unwrap();
        let r = decompose(&u, &ExtractionConfig::default()).unwrap();
        assert_eq!(r.bubbles.len(), 1, "{}", r.report());
        let b = &r.bubbles[0];
        assert!(b.h / truth.h >= 0.5 && b.h / truth.h <= 2.0, "{}", r.report());
        assert!((b.x_star[0] - 2.0).abs() <= truth.h, "{}", r.report());
        assert!((b.theta[0] - 8.0).abs() <= 1.0 / truth.h, "{}", r.report());
        assert!(r.residual_fraction() < 0.05, "{}", r.report());
        assert!(r.reconstruction().unwrap().sub(&u).unwrap().l2_norm() < 1e-10);
        for w in r.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bubble_field_is_the_profile_of_its_waveform() {
        let g = grid1();
        let truth = Gamma {
            h: 0.5,
            t0: 0.1,
            x0: [-3.0, 0.0],
            xi0: [2.0, 0.0],
        };
        let phi = Waveform::Gaussian.reference_field(1).unwrap();
        let u = build_profile_gamma(&truth, &phi, 0.0, g).unwrap();
        let cfg = ExtractionConfig {
            max_bubbles: 1,
            ..ExtractionConfig::default()
        };
        let r = decompose(&u, &cfg).unwrap();
        let b = &r.bubbles[0];
        let rebuilt = build_profile_gamma(&b.gamma(), &b.waveform, 0.0, g).unwrap();
        // the compactly supported taper leaves a small spectral tail at the band edge
        let err = rebuilt.sub(&b.field).unwrap().l2_norm() / b.field.l2_norm();
        assert!(err < 1e-6, "{err}");
        assert!((b.waveform.norm_sqr() - b.mass).abs() < 1e-10);
        assert!((b.t0() - 0.1).abs() <= cfg.time_step * b.h * b.h + 1e-12, "{}", b.t0());
    }

    #[test]
    fn two_orthogonal_bubbles() {
        let g = Grid::new(1, 4096, 20.0).unwrap();
        let phi = Waveform::Gaussian.reference_field(1).unwrap();
        let a = Gamma {
            h: 1.0,
            t0: 0.0,
            x0: [-4.0, 0.0],
            xi0: [0.0, 0.0],
        };
        let b = Gamma {
            h: 1.0 / 16.0,
            t0: 0.0,
            x0: [4.0, 0.0],
            xi0: [0.0, 0.0],
        };
        let u = build_profile_gamma(&a, &phi, 0.0, g)
            .unwrap()
            .add(&build_profile_gamma(&b, &phi, 0.0, g).unwrap())
            .unwrap();
        let r = decompose(&u, &ExtractionConfig::default()).unwrap();
        assert_eq!(r.bubbles.len(), 2, "{}", r.report());
        assert!(r.ledger.relative_defect() < 0.05, "{}", r.report());
        let mut scales: Vec<f64> = r.bubbles.iter().map(|b| b.h).collect();
        scales.sort_by(f64::total_cmp);
        assert!(scales[0] / b.h >= 0.5 && scales[0] / b.h <= 2.0);
        assert!(scales[1] / a.h >= 0.5 && scales[1] / a.h <= 2.0);
    }

    #[test]
    fn report_and_waveform_files() {
        let g = Grid::new(1, 1024, 20.0).unwrap();
        let u = gaussian_field(g, 1.0, &[0.0], &[0.0]).unwrap();
        let r = decompose(&u, &ExtractionConfig::default()).unwrap();
        let text = r.report();
        assert_eq!(text.lines().filter(|l| l.starts_with("bubble ")).count(), r.bubbles.len());
        assert!(text.contains("residual mass"));
        let dir = std::env::temp_dir().join(format!("nls-extract-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let paths = r.save_waveforms(&dir).unwrap();
        let back = Field::load(&paths[0]).unwrap();
        assert!(back.sub(&r.bubbles[0].waveform).unwrap().l2_norm() == 0.0);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn config_validation() {
        assert!(ExtractionConfig::default().validate().is_ok());
        let bad = [
            ExtractionConfig { delta: Some(0.0), ..Default::default() },
            ExtractionConfig { max_bubbles: 0, ..Default::default() },
            ExtractionConfig { time_step: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
