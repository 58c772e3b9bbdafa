//! Norms, conserved quantities and the linearizability criterion functionals.

use num_complex::Complex64;

use crate::error::{NlsError, Result};
use crate::evolution::{SemiclassicalSetup, Trajectory};
use crate::grid::{Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedLedger {
    /// `‖u‖_{L²}`
    pub mass: f64,
    /// `‖ε∇u‖_{L²}`
    pub linear_energy: f64,
    /// `½‖ε∇u‖² + (2λε²/γ)‖u‖_γ^γ`, the Hamiltonian of the flow
    pub nonlinear_energy: f64,
}

/// `‖ε∇u‖_{L²}` through the spectral multiplier `iξ`.
pub fn gradient_norm(field: &Field, epsilon: f64) -> f64 {
    let uh = field.to_frequency();
    let g = uh.grid();
    let s: f64 = uh
        .samples()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let k = g.frequency(i);
            (k[0] * k[0] + k[1] * k[1]) * z.norm_sqr()
        })
        .sum();
    epsilon * (s * g.frequency_cell_volume()).sqrt()
}

/// `‖a‖_{H¹_ε} = ‖a‖_{L²} + ‖ε∇a‖_{L²}`.
pub fn h1eps_norm(field: &Field, epsilon: f64) -> Result<f64> {
    field.expect_position()?;
    Ok(field.l2_norm() + gradient_norm(field, epsilon))
}

pub fn conserved_ledger(field: &Field, setup: &SemiclassicalSetup) -> Result<ConservedLedger> {
    let eps = setup.epsilon();
    let gamma = setup.gamma();
    let pos = field.to_position();
    let grad = gradient_norm(&pos, eps);
    let potential = 2.0 * setup.lambda() * eps * eps / gamma * pos.lp_integral(gamma);
    Ok(ConservedLedger {
        mass: pos.l2_norm(),
        linear_energy: grad,
        nonlinear_energy: 0.5 * grad * grad + potential,
    })
}

/// Running trapezoid approximation of `∫_I ∫ |u(t,x)|^γ dx dt`.
#[derive(Clone, Debug)]
pub struct SpaceTimeAccumulator {
    gamma: f64,
    total: f64,
    first_time: Option<f64>,
    last: Option<(f64, f64)>,
}

impl SpaceTimeAccumulator {
    pub fn new(gamma: f64) -> Self {
        SpaceTimeAccumulator {
            gamma,
            total: 0.0,
            first_time: None,
            last: None,
        }
    }

    pub fn push(&mut self, time: f64, field: &Field) {
        let value = field.to_position().lp_integral(self.gamma);
        self.push_value(time, value);
    }

    pub fn push_value(&mut self, time: f64, spatial_integral: f64) {
        if let Some((t0, v0)) = self.last {
            self.total += 0.5 * (time - t0).abs() * (v0 + spatial_integral);
        } else {
            self.first_time = Some(time);
        }
        self.last = Some((time, spatial_integral));
    }

    pub fn value(&self) -> f64 {
        self.total
    }

    pub fn interval(&self) -> Option<(f64, f64)> {
        Some((self.first_time?, self.last?.0))
    }
}

/// `∫_I ‖u(t)‖_γ^γ dt` over the trajectory's snapshots.
pub fn spacetime_lgamma(traj: &Trajectory, gamma: f64) -> Result<f64> {
    if traj.snapshots.len() < 2 {
        return Err(NlsError::Trajectory(
            "need at least two snapshots to integrate in time".into(),
        ));
    }
    let mut acc = SpaceTimeAccumulator::new(gamma);
    for s in &traj.snapshots {
        acc.push(s.time, &s.field);
    }
    Ok(acc.value())
}

/// `ε ‖v‖_{L^γ(I×ℝⁿ)}^γ` for a free trajectory `v`.
pub fn lgamma_criterion(traj: &Trajectory, setup: &SemiclassicalSetup) -> Result<f64> {
    Ok(setup.epsilon() * spacetime_lgamma(traj, setup.gamma())?)
}

/// `ε² sup_t ‖v(t)‖_γ^γ`, the supercritical-regime criterion.
pub fn cfg_criterion(traj: &Trajectory, setup: &SemiclassicalSetup) -> Result<f64> {
    if traj.snapshots.len() < 2 {
        return Err(NlsError::Trajectory(
            "need at least two snapshots to form the criterion".into(),
        ));
    }
    let gamma = setup.gamma();
    let sup = traj
        .snapshots
        .iter()
        .map(|s| s.field.lp_integral(gamma))
        .fold(0.0, f64::max);
    Ok(setup.epsilon().powi(2) * sup)
}

/// Fourier-side window: `[c-τ, c+τ]` in 1D, a square of side `2τ` in 2D.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierWindow {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl FourierWindow {
    /// Spatial scale associated with the window, `1/τ`.
    pub fn scale(&self) -> f64 {
        1.0 / self.half_width
    }

    /// Closed-window membership with a small tolerance so grid-aligned
    /// edges are included despite rounding.
    pub fn contains(&self, xi: &[f64]) -> bool {
        let tol = 1e-9 * self.half_width;
        xi.iter()
            .zip(self.center.iter())
            .all(|(&k, &c)| (k - c).abs() <= self.half_width + tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowWitness {
    pub value: f64,
    pub window: FourierWindow,
}

/// Maximum number of window centres examined per dyadic level.
pub const MAX_WINDOW_CENTERS: usize = 4096;

/// Best 1D window for `τ^{a}·∫_{[θ-τ,θ+τ]} |f̂|^p dξ` over dyadic `τ = dξ·2^k`
/// and grid centres `θ`, restricted to `τ ∈ [tau_range.0, tau_range.1]`.
/// Returns the maximiser and the maximal value.
pub(crate) fn best_window_1d(uh: &Field, p: f64, tau_power: f64, tau_range: (f64, f64)) -> (FourierWindow, f64) {
    let g = uh.grid();
    let n = g.points_per_axis();
    let dxi = g.dxi();
    let w: Vec<f64> = uh.samples().iter().map(|z| z.norm_sqr().powf(p / 2.0)).collect();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + w[i];
    }
    let stride = n.div_ceil(MAX_WINDOW_CENTERS).max(1);
    let mut best = (
        FourierWindow {
            center: [g.axis_frequency(n / 2), 0.0],
            half_width: dxi,
        },
        0.0,
    );
    let mut m = 1usize;
    while m <= n {
        let tau = m as f64 * dxi;
        if tau < tau_range.0 || tau > tau_range.1 {
            m *= 2;
            continue;
        }
        let factor = tau.powf(tau_power);
        for i in (0..n).step_by(stride) {
            let lo_raw = i as isize - m as isize;
            let hi_raw = i + m;
            let lo = lo_raw.max(0) as usize;
            let hi = hi_raw.min(n - 1);
            let mut s = prefix[hi + 1] - prefix[lo];
            // trapezoid end corrections where the window edge lies on the grid
            if lo_raw >= 0 {
                s -= 0.5 * w[lo];
            }
            if hi_raw < n {
                s -= 0.5 * w[hi];
            }
            let value = factor * s * dxi;
            if value > best.1 {
                best = (
                    FourierWindow {
                        center: [g.axis_frequency(i), 0.0],
                        half_width: tau,
                    },
                    value,
                );
            }
        }
        m *= 2;
    }
    best
}

/// `sup_{τ, ξ₀} τ^{1/2-1/p} ‖f̂‖_{L^p([ξ₀-τ, ξ₀+τ])}` (1D only).
pub fn strichartz_window_witness(field: &Field, p: f64) -> Result<WindowWitness> {
    if field.grid().dim() != 1 {
        return Err(NlsError::Unsupported(
            "window witness is one-dimensional; use chi_p_norm in 2D".into(),
        ));
    }
    if !(p > 1.0) {
        return Err(NlsError::InvalidArgument(format!("need p > 1, got {p}")));
    }
    let uh = field.to_frequency();
    // maximise τ^{p/2-1} ∫|f̂|^p, then take the p-th root
    let (window, best) = best_window_1d(&uh, p, p / 2.0 - 1.0, (0.0, f64::INFINITY));
    Ok(WindowWitness {
        value: best.powf(1.0 / p),
        window,
    })
}

/// Per-level contribution of the dyadic-square norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiPLevel {
    /// Square side is `2^level`.
    pub level: i32,
    /// `Σ_τ 2^{4j} (2^{-2j} ∫_τ |f|^p)^{4/p}`
    pub sum: f64,
    /// Largest single-square term and the square realizing it.
    pub best_term: f64,
    pub best_square: FourierWindow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiPNorm {
    pub value: f64,
    pub levels: Vec<ChiPLevel>,
    /// Set when `p ≤ 12/7`, outside the range where the inequality is known.
    pub outside_known_range: bool,
}

/// `‖f̂‖_{χ_p} = (Σ_j Σ_{τ∈C_j} 2^{4j}(2^{-2j}∫_τ|f̂|^p)^{4/p})^{1/4}` over
/// origin-anchored dyadic squares resolvable on the grid.
pub fn chi_p_norm(field: &Field, p: f64) -> Result<ChiPNorm> {
    if field.grid().dim() != 2 {
        return Err(NlsError::Unsupported("chi_p norm needs a 2D field".into()));
    }
    if !(p > 0.0) {
        return Err(NlsError::InvalidArgument(format!("need p > 0, got {p}")));
    }
    let uh = field.to_frequency();
    let g = *uh.grid();
    let n = g.points_per_axis();
    let dxi = g.dxi();
    let j_min = dxi.log2().ceil() as i32;
    let j_max = (n as f64 * dxi).log2().floor() as i32;
    let w: Vec<f64> = uh.samples().iter().map(|z| z.norm_sqr().powf(p / 2.0)).collect();
    let cell = g.frequency_cell_volume();
    let xi_min = g.axis_frequency(0);
    let xi_max = g.axis_frequency(n - 1);
    let mut levels = Vec::new();
    let mut total = 0.0;
    for j in j_min..=j_max {
        let side = 2f64.powi(j);
        let m_lo = (xi_min / side).floor() as i64;
        let m_hi = (xi_max / side).floor() as i64;
        let count = (m_hi - m_lo + 1) as usize;
        let mut bins = vec![0.0; count * count];
        for a in 0..n {
            let ma = ((g.axis_frequency(a) / side).floor() as i64 - m_lo) as usize;
            for b in 0..n {
                let mb = ((g.axis_frequency(b) / side).floor() as i64 - m_lo) as usize;
                bins[ma * count + mb] += w[a * n + b];
            }
        }
        let mut sum = 0.0;
        let mut best_term = 0.0;
        let mut best_idx = 0;
        for (idx, &b) in bins.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let term = 2f64.powi(4 * j) * (b * cell / (side * side)).powf(4.0 / p);
            sum += term;
            if term > best_term {
                best_term = term;
                best_idx = idx;
            }
        }
        let ma = (best_idx / count) as i64 + m_lo;
        let mb = (best_idx % count) as i64 + m_lo;
        levels.push(ChiPLevel {
            level: j,
            sum,
            best_term,
            best_square: FourierWindow {
                center: [(ma as f64 + 0.5) * side, (mb as f64 + 0.5) * side],
                half_width: side / 2.0,
            },
        });
        total += sum;
    }
    Ok(ChiPNorm {
        value: total.powf(0.25),
        levels,
        outside_known_range: p <= 12.0 / 7.0,
    })
}

/// `∫_{|ξ|>R} |û|² dξ`. `R ≤ 0` counts every mode.
pub fn spectral_tail(field: &Field, radius: f64) -> f64 {
    let uh = field.to_frequency();
    let g = uh.grid();
    if radius <= 0.0 {
        return uh.norm_sqr();
    }
    let r2 = radius * radius;
    uh.samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let k = g.frequency(*i);
            k[0] * k[0] + k[1] * k[1] > r2
        })
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        * g.frequency_cell_volume()
}

/// Squared L² mass in the outer layer `max_a |x_a| > (1-fraction)·L`.
pub fn boundary_mass(field: &Field, fraction: f64) -> f64 {
    let u = field.to_position();
    let g = u.grid();
    let cut = (1.0 - fraction) * g.half_width();
    u.samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let p = g.position(*i);
            p[0].abs().max(p[1].abs()) > cut
        })
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        * g.cell_volume()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviation {
    /// `sup_t ‖u - v‖_{L²}`
    pub l2: f64,
    /// `sup_t (‖u - v‖_{L²} + ‖ε∇(u - v)‖_{L²})`
    pub h1eps: f64,
}

pub fn deviation_norms(nonlinear: &Trajectory, linear: &Trajectory, epsilon: f64) -> Result<Deviation> {
    if nonlinear.snapshots.len() != linear.snapshots.len() {
        return Err(NlsError::Trajectory(format!(
            "snapshot count mismatch: {} vs {}",
            nonlinear.snapshots.len(),
            linear.snapshots.len()
        )));
    }
    let mut dev = Deviation { l2: 0.0, h1eps: 0.0 };
    for (a, b) in nonlinear.snapshots.iter().zip(&linear.snapshots) {
        if (a.time - b.time).abs() > 1e-9 * (1.0 + a.time.abs()) {
            return Err(NlsError::Trajectory(format!(
                "snapshot times differ: {} vs {}",
                a.time, b.time
            )));
        }
        let d = a.field.sub(&b.field)?;
        let l2 = d.l2_norm();
        dev.l2 = dev.l2.max(l2);
        dev.h1eps = dev.h1eps.max(l2 + gradient_norm(&d, epsilon));
    }
    Ok(dev)
}

/// Mass fraction of `field` within distance `radius` of `center`.
#[cfg(test)]
pub(crate) fn ball_mass(field: &Field, center: &[f64], radius: f64) -> f64 {
    let g = field.grid();
    let r2 = radius * radius;
    field
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let p = g.position(*i);
            let d: f64 = p[..g.dim()].iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            d <= r2
        })
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        * g.cell_volume()
}

/// Radius of the smallest origin-centred ball holding `fraction` of the
/// squared mass. Each sample's mass is credited at the outer edge of its
/// cell and cumulative mass is interpolated linearly between edges.
pub fn mass_radius(field: &Field, fraction: f64) -> f64 {
    let u = field.to_position();
    let g = u.grid();
    let mut pts: Vec<(f64, f64)> = u
        .samples()
        .iter()
        .enumerate()
        .map(|(i, z)| (g.radius(i), z.norm_sqr()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let target = fraction * total;
    let half_cell = 0.5 * g.dx();
    let mut acc = 0.0;
    let mut prev_r = 0.0;
    let mut prev_acc = 0.0;
    // group samples sharing a radius so symmetric pairs enter together
    let mut i = 0;
    while i < pts.len() {
        let r = pts[i].0;
        let edge = r + half_cell;
        let mut w = 0.0;
        while i < pts.len() && (pts[i].0 - r).abs() <= 1e-12 * (1.0 + r) {
            w += pts[i].1;
            i += 1;
        }
        acc += w;
        if acc >= target {
            return prev_r + (edge - prev_r) * (target - prev_acc) / (acc - prev_acc);
        }
        prev_r = edge;
        prev_acc = acc;
    }
    prev_r
}

/// Scalar L^p norm of a field over space only, `(∫|u|^p)^{1/p}`.
pub fn lp_norm(field: &Field, p: f64) -> f64 {
    field.to_position().lp_integral(p).powf(1.0 / p)
}

/// Gaussian helper used across tests and experiments.
pub fn gaussian_field(grid: Grid, width: f64, center: &[f64], frequency: &[f64]) -> Result<Field> {
    let d = grid.dim();
    let norm = width.powf(-(d as f64) / 2.0);
    Field::sample(grid, |x| {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..d {
            let y = x[a] - center.get(a).copied().unwrap_or(0.0);
            r2 += y * y;
            phase += frequency.get(a).copied().unwrap_or(0.0) * x[a];
        }
        Complex64::from_polar(norm * (-r2 / (2.0 * width * width)).exp(), phase)
    })
}
