//! Reference solutions: the ground state `Q`, the explicit minimal-mass
//! blow-up solution, the concentrating family and the free far-field profile.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{NlsError, Result};
use crate::evolution::{evolve, Trajectory};
use crate::fft::{self, signed_index, Direction};
use crate::grid::{Field, Grid};

/// Sup-norm gate on `-½ΔQ + Q - Q^{1+4/n}` at reference-mesh sample points.
pub const RESIDUAL_GATE: f64 = 1e-8;

const REF_POINTS: usize = 8192;
const REF_HALF_WIDTH: f64 = 32.0;
const SHOOT_STEP: f64 = 1e-3;
const SHOOT_MAX_RADIUS: f64 = 40.0;
const MAX_BISECTIONS: usize = 200;
/// Where the integrated profile hands over to the linear far-field tail.
const TAIL_LEVEL: f64 = 1e-4;
const BLEND_WIDTH: f64 = 1.0;

fn nonlinear_power(dim: usize) -> f64 {
    1.0 + 4.0 / dim as f64
}

/// Radial profile produced by shooting, tabulated with derivatives and
/// continued by the decaying solution of `Q'' + (n-1)Q'/r = 2Q`.
#[derive(Debug)]
struct ShotProfile {
    dim: usize,
    dr: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    curvatures: Vec<f64>,
    blend_start: f64,
    tail_coeff: f64,
}

/// `K₀(z)` from its large-argument expansion, accurate to ~e^{-2z} relative.
fn bessel_k0_large(z: f64) -> f64 {
    bessel_k_large(0.0, z)
}

fn bessel_k_large(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() || next.abs() < 1e-18 {
            break;
        }
        term = next;
        sum += term;
    }
    (PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

/// Shape of the decaying linear solution, up to a constant.
fn tail_shape(dim: usize, r: f64) -> f64 {
    let z = 2f64.sqrt() * r;
    match dim {
        1 => (-z).exp(),
        _ => bessel_k0_large(z),
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ShotOutcome {
    /// Crossed zero: initial value too large.
    Overshoot,
    /// Turned upward while positive: initial value too small.
    Undershoot,
    /// Reached the integration limit undecided.
    Undecided,
}

/// Radius up to which the origin power series replaces the integrator.
const SERIES_RADIUS: f64 = 0.2;
const SERIES_TERMS: usize = 16;

/// Coefficients `c_k` of `Q = Σ c_k r^{2k}` with `Q(0) = a`, from
/// `Δ(r^{2k}) = 2k(2k+n-2) r^{2k-2}` and `ΔQ = 2Q - 2Q^p`.
fn series_coefficients(a: f64, dim: usize) -> Vec<f64> {
    let n = dim as f64;
    let p = 1 + 4 / dim;
    let mut c = vec![a];
    for k in 0..SERIES_TERMS - 1 {
        // r^{2k} coefficient of c^p from repeated Cauchy products
        let mut pow = c.clone();
        for _ in 1..p {
            pow = (0..c.len())
                .map(|m| (0..=m).map(|i| pow[i] * c[m - i]).sum())
                .collect();
        }
        let j = (k + 1) as f64;
        c.push((2.0 * c[k] - 2.0 * pow[k]) / (2.0 * j * (2.0 * j + n - 2.0)));
    }
    c
}

fn series_eval(c: &[f64], r: f64) -> (f64, f64) {
    let r2 = r * r;
    let mut q = 0.0;
    let mut dq = 0.0;
    for (k, &ck) in c.iter().enumerate().rev() {
        q = q * r2 + ck;
        if k > 0 {
            dq = dq * r2 + 2.0 * k as f64 * ck;
        }
    }
    (q, dq * r)
}

fn rhs(dim: usize, r: f64, q: f64, dq: f64) -> (f64, f64) {
    let p = nonlinear_power(dim);
    let nl = q.abs().powf(p - 1.0) * q;
    (dq, 2.0 * q - 2.0 * nl - (dim as f64 - 1.0) * dq / r)
}

fn rk4(dim: usize, r: f64, q: f64, dq: f64, h: f64) -> (f64, f64) {
    let (k1q, k1p) = rhs(dim, r, q, dq);
    let (k2q, k2p) = rhs(dim, r + h / 2.0, q + h / 2.0 * k1q, dq + h / 2.0 * k1p);
    let (k3q, k3p) = rhs(dim, r + h / 2.0, q + h / 2.0 * k2q, dq + h / 2.0 * k2p);
    let (k4q, k4p) = rhs(dim, r + h, q + h * k3q, dq + h * k3p);
    (
        q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        dq + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

/// Integrates outward, optionally recording the table, until the orbit leaves
/// the positive decreasing branch.
fn shoot(a: f64, dim: usize, record: Option<(&mut Vec<f64>, &mut Vec<f64>)>) -> ShotOutcome {
    let dr = SHOOT_STEP;
    let steps = (SHOOT_MAX_RADIUS / dr) as usize;
    let start = (SERIES_RADIUS / dr).round() as usize;
    let coeffs = series_coefficients(a, dim);
    let mut rec = record;
    if let Some((v, s)) = rec.as_mut() {
        v.clear();
        s.clear();
        for k in 0..start {
            let (q, dq) = series_eval(&coeffs, k as f64 * dr);
            v.push(q);
            s.push(dq);
        }
    }
    let (mut q, mut dq) = series_eval(&coeffs, start as f64 * dr);
    if let Some((v, s)) = rec.as_mut() {
        v.push(q);
        s.push(dq);
    }
    for k in start..steps {
        let r = k as f64 * dr;
        let (nq, ndq) = rk4(dim, r, q, dq, dr);
        q = nq;
        dq = ndq;
        if q < 0.0 {
            return ShotOutcome::Overshoot;
        }
        if dq > 0.0 {
            return ShotOutcome::Undershoot;
        }
        if let Some((v, s)) = rec.as_mut() {
            v.push(q);
            s.push(dq);
        }
    }
    ShotOutcome::Undecided
}

/// Bisection on `Q(0)` for the positive decaying radial solution.
fn shoot_ground_state(dim: usize, bracket: (f64, f64)) -> Result<ShotProfile> {
    let (mut lo, mut hi) = bracket;
    if shoot(lo, dim, None) != ShotOutcome::Undershoot || shoot(hi, dim, None) != ShotOutcome::Overshoot {
        return Err(NlsError::ShootingFailed {
            iterations: 0,
            lo,
            hi,
        });
    }
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(mid, dim, None) {
            ShotOutcome::Overshoot => hi = mid,
            ShotOutcome::Undershoot => lo = mid,
            ShotOutcome::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
        iterations += 1;
    }
    if hi - lo > 4.0 * f64::EPSILON * hi {
        return Err(NlsError::ShootingFailed { iterations, lo, hi });
    }
    let a = 0.5 * (lo + hi);
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    shoot(a, dim, Some((&mut values, &mut slopes)));
    let dr = SHOOT_STEP;
    let handover = values
        .iter()
        .position(|&q| q < TAIL_LEVEL * a)
        .ok_or(NlsError::ShootingFailed { iterations, lo, hi })?;
    let blend_start = handover as f64 * dr;
    let blend_end_index = ((blend_start + BLEND_WIDTH) / dr).ceil() as usize;
    if blend_end_index + 2 >= values.len() {
        return Err(NlsError::ShootingFailed { iterations, lo, hi });
    }
    values.truncate(blend_end_index + 2);
    slopes.truncate(blend_end_index + 2);
    let curvatures = values
        .iter()
        .zip(&slopes)
        .enumerate()
        .map(|(k, (&q, &dq))| {
            if k == 0 {
                2.0 * (a - a.powf(nonlinear_power(dim))) / dim as f64
            } else {
                rhs(dim, k as f64 * dr, q, dq).1
            }
        })
        .collect();
    let tail_coeff = values[handover] / tail_shape(dim, blend_start);
    Ok(ShotProfile {
        dim,
        dr,
        values,
        slopes,
        curvatures,
        blend_start,
        tail_coeff,
    })
}

impl ShotProfile {
    /// Quintic Hermite interpolation; C² so that spectral second
    /// derivatives of the samples stay clean.
    fn tabulated(&self, r: f64) -> f64 {
        let k = ((r / self.dr) as usize).min(self.values.len() - 2);
        let h = self.dr;
        let s = (r - k as f64 * h) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h20 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
        let h21 = 0.5 * (s3 - 2.0 * s4 + s5);
        let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        h00 * self.values[k]
            + h10 * h * self.slopes[k]
            + h20 * h * h * self.curvatures[k]
            + h21 * h * h * self.curvatures[k + 1]
            + h11 * h * self.slopes[k + 1]
            + h01 * self.values[k + 1]
    }

    fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= self.blend_start {
            return self.tabulated(r);
        }
        let tail = self.tail_coeff * tail_shape(self.dim, r);
        if r >= self.blend_start + BLEND_WIDTH {
            return tail;
        }
        let w = smoothstep((r - self.blend_start) / BLEND_WIDTH);
        (1.0 - w) * self.tabulated(r) + w * tail
    }
}

#[derive(Debug)]
enum Profile {
    /// `3^{1/4} sech^{1/2}(2√2 x)`
    ClosedForm,
    Shot(ShotProfile),
}

impl Profile {
    fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::ClosedForm => 3f64.powf(0.25) / (2.0 * 2f64.sqrt() * r).cosh().sqrt(),
            Profile::Shot(s) => s.eval(r),
        }
    }
}

/// Verified radial profile with its certificate.
#[derive(Debug)]
struct Certified {
    dim: usize,
    profile: Profile,
    residual: f64,
    mass_sqr: f64,
}

/// `sup |-½(Q'' + (n-1)Q'/r) + Q - Q^{1+4/n}|` on an even-extended reference
/// mesh, with derivatives taken spectrally.
fn reference_residual(dim: usize, q: &dyn Fn(f64) -> f64) -> f64 {
    let n = REF_POINTS;
    let half = REF_HALF_WIDTH;
    let dx = 2.0 * half / n as f64;
    let xs: Vec<f64> = (0..n).map(|j| -half + j as f64 * dx).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| q(x.abs())).collect();
    let mut spec: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform(&mut spec, n, 1, Direction::Forward);
    let dxi = PI / half;
    let mut d1 = spec.clone();
    let mut d2 = spec;
    for m in 0..n {
        let k = signed_index(m, n);
        let xi = k as f64 * dxi;
        d1[m] *= if m == n / 2 { Complex64::default() } else { Complex64::new(0.0, xi) };
        d2[m] *= -xi * xi;
    }
    fft::transform(&mut d1, n, 1, Direction::Inverse);
    fft::transform(&mut d2, n, 1, Direction::Inverse);
    let p = nonlinear_power(dim);
    let inv_n = 1.0 / n as f64;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let r = xs[j].abs();
        let qpp = d2[j].re * inv_n;
        let lap = if dim == 1 {
            qpp
        } else if r == 0.0 {
            dim as f64 * qpp
        } else {
            // sign of x turns the even-extension derivative into the radial one
            qpp + (dim as f64 - 1.0) * d1[j].re * inv_n / xs[j]
        };
        let res = -0.5 * lap + vals[j] - vals[j].powf(p);
        worst = worst.max(res.abs());
    }
    worst
}

/// `‖Q‖²` by composite Simpson in the radial variable.
fn radial_mass_sqr(dim: usize, q: &dyn Fn(f64) -> f64) -> f64 {
    let h = SHOOT_STEP;
    let m = (REF_HALF_WIDTH / h) as usize & !1;
    let f = |r: f64| {
        let v = q(r);
        match dim {
            1 => 2.0 * v * v,
            _ => 2.0 * PI * r * v * v,
        }
    };
    let mut s = f(0.0) + f(m as f64 * h);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

fn certify(dim: usize, profile: Profile) -> Result<Certified> {
    let eval = |r: f64| profile.eval(r);
    let residual = reference_residual(dim, &eval);
    if !(residual < RESIDUAL_GATE) {
        return Err(NlsError::ResidualGate {
            residual,
            gate: RESIDUAL_GATE,
        });
    }
    let mass_sqr = radial_mass_sqr(dim, &eval);
    Ok(Certified {
        dim,
        profile,
        residual,
        mass_sqr,
    })
}

static CACHE: Mutex<[Option<Arc<Certified>>; 2]> = Mutex::new([None, None]);

fn certified_profile(dim: usize) -> Result<Arc<Certified>> {
    if dim != 1 && dim != 2 {
        return Err(NlsError::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
    }
    let mut cache = CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(c) = &cache[dim - 1] {
        return Ok(c.clone());
    }
    let profile = match dim {
        1 => Profile::ClosedForm,
        _ => Profile::Shot(shoot_ground_state(2, (1.5, 3.5))?),
    };
    let c = Arc::new(certify(dim, profile)?);
    cache[dim - 1] = Some(c.clone());
    Ok(c)
}

/// Positive radial solution of `-½ΔQ + Q = Q^{1+4/n}` sampled on a grid.
#[derive(Clone, Debug)]
pub struct GroundState {
    certified: Arc<Certified>,
    field: Field,
}

pub fn ground_state(dim: usize, grid: Grid) -> Result<GroundState> {
    if grid.dim() != dim {
        return Err(NlsError::GridMismatch(format!(
            "ground state of dimension {dim} requested on a {}D grid",
            grid.dim()
        )));
    }
    let certified = certified_profile(dim)?;
    let c = certified.clone();
    let field = Field::sample(grid, move |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Complex64::new(c.profile.eval(r), 0.0)
    })?;
    Ok(GroundState { certified, field })
}

impl GroundState {
    pub fn dim(&self) -> usize {
        self.certified.dim
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    /// `Q(r)` at an arbitrary radius.
    pub fn profile(&self, r: f64) -> f64 {
        self.certified.profile.eval(r)
    }

    pub fn peak(&self) -> f64 {
        self.profile(0.0)
    }

    /// `‖Q‖_{L²}` from radial quadrature (independent of the sampling grid).
    pub fn mass(&self) -> f64 {
        self.certified.mass_sqr.sqrt()
    }

    pub fn residual(&self) -> f64 {
        self.certified.residual
    }

    pub fn sidecar_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dimension {}", self.dim());
        let _ = writeln!(s, "mass {}", self.mass());
        let _ = writeln!(s, "mass_squared {}", self.certified.mass_sqr);
        let _ = writeln!(s, "residual {}", self.residual());
        let _ = writeln!(s, "peak {}", self.peak());
        s
    }

    /// Writes the sampled field and a `.txt` sidecar next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.field.save(path)?;
        std::fs::write(path.with_extension("txt"), self.sidecar_text())?;
        Ok(())
    }
}

/// Minimum points per axis for which a width `s` and a quadratic phase
/// `|x|²/(2s)` are both resolved on `[-L, L)`.
fn weinstein_required_points(half_width: f64, s: f64) -> usize {
    let by_width = (2.0 * half_width * 8.0 / s).ceil();
    let by_phase = (2.0 * half_width * half_width / (PI * s)).ceil();
    let n = by_width.max(by_phase) as usize;
    n + (n & 1)
}

/// `U(t,x) = e^{-i|x|²/(2s) + i/s} s^{-n/2} Q(x/s)` with `s = T - t`.
pub fn weinstein_blowup(t: f64, blowup_time: f64, grid: Grid) -> Result<Field> {
    let s = blowup_time - t;
    if !(s > 0.0) {
        return Err(NlsError::InvalidArgument(format!(
            "need t < T, got t = {t}, T = {blowup_time}"
        )));
    }
    let l = grid.half_width();
    let dx = grid.dx();
    if dx > s / 8.0 || l / s > PI / dx {
        return Err(NlsError::Resolution {
            reason: format!("width T - t = {s} on half width {l} with dx = {dx}"),
            required_n: weinstein_required_points(l, s),
        });
    }
    let gs = certified_profile(grid.dim())?;
    let amp = s.powf(-(grid.dim() as f64) / 2.0);
    Field::sample(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let q = gs.profile.eval(r2.sqrt() / s);
        Complex64::from_polar(amp * q, -r2 / (2.0 * s) + 1.0 / s)
    })
}

/// `u^ε(t,x) = ε^{-n/4} U(t - t₀, (x - x₀)/√ε)` from a unit-scale trajectory.
///
/// The output lives on the unit grid contracted by `√ε`. Times between
/// stored snapshots are reached by continuing the nearest snapshot with the
/// trajectory's own step size.
pub fn concentrating_solution(
    t: f64,
    epsilon: f64,
    t0: f64,
    x0: &[f64],
    unit: &Trajectory,
) -> Result<Field> {
    let tau = t - t0;
    let times = unit.times();
    let (lo, hi) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if times.is_empty() || tau < lo - tol || tau > hi + tol {
        return Err(NlsError::Trajectory(format!(
            "time {tau} outside the unit trajectory range [{lo}, {hi}]"
        )));
    }
    let base = unit
        .snapshots
        .iter()
        .min_by(|a, b| (a.time - tau).abs().total_cmp(&(b.time - tau).abs()))
        .ok_or_else(|| NlsError::Trajectory("empty trajectory".into()))?;
    let gap = tau - base.time;
    let field_unit = if gap.abs() <= tol {
        base.field.clone()
    } else {
        let dt = if unit.dt != 0.0 { unit.dt.abs() } else { gap.abs() / 100.0 };
        let steps = (gap.abs() / dt).ceil().max(1.0) as usize;
        let traj = evolve(&base.field, gap, steps, &unit.setup, &[gap])?;
        traj.snapshots
            .into_iter()
            .last()
            .ok_or_else(|| NlsError::Trajectory("continuation produced no snapshot".into()))?
            .field
    };
    let u = crate::evolution::rescale_from_unit(&field_unit, epsilon)?;
    if x0.iter().all(|&v| v == 0.0) {
        Ok(u)
    } else {
        Ok(u.translated(x0))
    }
}

/// `e^{-inπ/4·sgn t} e^{i|x|²/(2t)} |t|^{-n/2} φ̂(x/t)`, the large-|t|
/// asymptotic of `e^{itΔ/2}φ`.
///
/// For `t < 0` the prefactor is `e^{inπ/4}`; for `t > 0` the conjugate
/// convention `e^{-inπ/4}` applies. `φ̂` is evaluated off-grid by direct
/// summation of the discrete transform.
pub fn far_field_asymptotic(phi: &Field, t: f64, grid: Grid) -> Result<Field> {
    if t == 0.0 || !t.is_finite() {
        return Err(NlsError::InvalidArgument(format!("need finite t != 0, got {t}")));
    }
    let src = phi.to_position();
    let sg = *src.grid();
    let d = grid.dim();
    if sg.dim() != d {
        return Err(NlsError::GridMismatch("profile and output grids differ in dimension".into()));
    }
    let l = grid.half_width();
    let dx = grid.dx();
    if l / t.abs() > PI / dx {
        let n = (2.0 * l * l / (PI * t.abs())).ceil() as usize;
        return Err(NlsError::Resolution {
            reason: format!("quadratic phase |x|²/(2t) at t = {t} on half width {l}"),
            required_n: n + (n & 1),
        });
    }
    let axis: Vec<f64> = (0..grid.points_per_axis()).map(|a| grid.axis_position(a) / t).collect();
    let axes = vec![axis; d];
    let hat = src.fourier_at(&axes)?;
    let pref = Complex64::from_polar(t.abs().powf(-(d as f64) / 2.0), -(d as f64) * PI / 4.0 * t.signum());
    let samples: Vec<Complex64> = hat
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            let p = grid.position(i);
            let r2 = p[0] * p[0] + p[1] * p[1];
            pref * Complex64::from_polar(1.0, r2 / (2.0 * t)) * h
        })
        .collect();
    Field::new(grid, crate::grid::Representation::Position, samples)
}

/// Closed-form `e^{iεtΔ/2}` of the Gaussian `w^{-n/2}e^{-|x-c|²/(2w²)}e^{iξ·x}`,
/// summed over periodic images of the box until the added images are below
/// `1e-17` relative.
pub fn free_gaussian(grid: Grid, width: f64, center: &[f64], frequency: &[f64], t: f64, epsilon: f64) -> Result<Field> {
    if !(width > 0.0) {
        return Err(NlsError::InvalidArgument(format!("width must be positive, got {width}")));
    }
    let d = grid.dim();
    let period = 2.0 * grid.half_width();
    let a = Complex64::new(width * width, epsilon * t);
    let amp = (Complex64::new(1.0, epsilon * t / (width * width))).sqrt().inv() / width.sqrt();
    // |exp(-y²/(2a))| = exp(-y² w²/(2|a|²)); images beyond this reach are negligible
    let reach = (2.0 * 40.0 * a.norm_sqr() / (width * width)).sqrt() + period;
    let images = (reach / period).ceil() as i64;
    let axis = |x: f64, c: f64, xi: f64| -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for m in -images..=images {
            let xm = x + period * m as f64;
            let y = xm - c - epsilon * t * xi;
            sum += (-(y * y) / (2.0 * a)).exp() * Complex64::from_polar(1.0, xi * xm - epsilon * t * xi * xi / 2.0);
        }
        amp * sum
    };
    Field::sample(grid, |x| {
        (0..d)
            .map(|k| axis(x[k], center.get(k).copied().unwrap_or(0.0), frequency.get(k).copied().unwrap_or(0.0)))
            .product()
    })
}
