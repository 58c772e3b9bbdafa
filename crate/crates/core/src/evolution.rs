//! Exact spectral free propagator and Strang split-step solver for
//!
//! ```text
//! iε ∂_t u + ½ε² Δu = λ ε² |u|^{4/n} u
//! ```
//!
//! plus the `u(x) = ε^{-n/4} U(x/√ε)` change of variables that maps the
//! semiclassical equation onto the unit-scale one.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{NlsError, Result};
use crate::fft::{self, Direction};
use crate::functionals::{conserved_ledger, ConservedLedger};
use crate::grid::{Field, Grid, Representation};

/// Sign of the nonlinearity: `+1` defocusing, `-1` focusing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nonlinearity {
    Defocusing,
    Focusing,
}

impl Nonlinearity {
    pub fn lambda(self) -> f64 {
        match self {
            Nonlinearity::Defocusing => 1.0,
            Nonlinearity::Focusing => -1.0,
        }
    }

    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if lambda == 1.0 {
            Ok(Nonlinearity::Defocusing)
        } else if lambda == -1.0 {
            Ok(Nonlinearity::Focusing)
        } else {
            Err(NlsError::InvalidArgument(format!(
                "lambda must be +1 or -1, got {lambda}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiclassicalSetup {
    epsilon: f64,
    nonlinearity: Nonlinearity,
    dim: usize,
    nonlinear: bool,
}

impl SemiclassicalSetup {
    pub fn new(epsilon: f64, nonlinearity: Nonlinearity, dim: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(NlsError::InvalidArgument(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        if dim != 1 && dim != 2 {
            return Err(NlsError::InvalidArgument(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        Ok(SemiclassicalSetup {
            epsilon,
            nonlinearity,
            dim,
            nonlinear: true,
        })
    }

    /// The unit-scale equation `i∂_t U + ½ΔU = λ|U|^{4/n}U`.
    pub fn unit(nonlinearity: Nonlinearity, dim: usize) -> Result<Self> {
        Self::new(1.0, nonlinearity, dim)
    }

    /// Same setup with the nonlinear term switched off (free evolution).
    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        let mut s = Self::new(epsilon, self.nonlinearity, self.dim)?;
        s.nonlinear = self.nonlinear;
        Ok(s)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> f64 {
        self.nonlinearity.lambda()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonlinearity_enabled(&self) -> bool {
        self.nonlinear
    }

    /// `σ = 2/n`.
    pub fn sigma(&self) -> f64 {
        2.0 / self.dim as f64
    }

    /// `γ = 2 + 4/n`.
    pub fn gamma(&self) -> f64 {
        2.0 + 4.0 / self.dim as f64
    }

    /// Default step: `min(dx²/(επ), 10⁻²·ε)`.
    pub fn default_time_step(&self, grid: &Grid) -> f64 {
        let dx = grid.dx();
        (dx * dx / (self.epsilon * PI)).min(1e-2 * self.epsilon)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(NlsError::GridMismatch(format!(
                "setup is {}D but field grid is {}D",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

/// Sampled solution curve. Snapshot times are strictly increasing in the
/// direction of integration and all snapshots share one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub setup: SemiclassicalSetup,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub ledger: ConservedLedger,
}

impl Trajectory {
    pub fn grid(&self) -> Option<&Grid> {
        self.snapshots.first().map(|s| s.field.grid())
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// Assembles a trajectory from externally computed snapshots.
    pub fn from_snapshots(setup: SemiclassicalSetup, dt: f64, snapshots: Vec<Snapshot>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| NlsError::Trajectory("no snapshots".into()))?;
        let grid = *first.field.grid();
        for w in snapshots.windows(2) {
            w[1].field.grid().ensure_same(&grid)?;
            if (w[1].time - w[0].time).abs() == 0.0 {
                return Err(NlsError::Trajectory("repeated snapshot time".into()));
            }
        }
        let ledger = conserved_ledger(&snapshots.last().unwrap().field, &setup)?;
        Ok(Trajectory {
            setup,
            dt,
            snapshots,
            ledger,
        })
    }
}

/// Thresholds that turn loss of resolution into an explicit blow-up signal.
///
/// A pseudo-spectral step is unitary, so a collapsing solution never becomes
/// non-finite on its own; it instead outruns the grid. Both conditions below
/// flag that.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowUpGuard {
    /// Largest nonlinear phase rotation `ε|u|^{4/n}|δt|` allowed in one step.
    pub max_phase_per_step: f64,
    /// Largest fraction of `‖û‖²` allowed beyond `shell_fraction` of Nyquist.
    pub max_tail_fraction: f64,
    pub shell_fraction: f64,
}

impl Default for BlowUpGuard {
    fn default() -> Self {
        BlowUpGuard {
            max_phase_per_step: PI / 2.0,
            max_tail_fraction: 1e-6,
            shell_fraction: 0.9,
        }
    }
}

impl BlowUpGuard {
    /// Only non-finite samples abort the run.
    pub fn nan_only() -> Self {
        BlowUpGuard {
            max_phase_per_step: f64::INFINITY,
            max_tail_fraction: f64::INFINITY,
            shell_fraction: 1.0,
        }
    }
}

/// Reusable Strang stepper working on raw position samples.
struct Stepper {
    grid: Grid,
    dim: usize,
    eps: f64,
    lambda: f64,
    nonlinear: bool,
    dt: f64,
    multiplier: Vec<Complex64>,
    tail_mask: Vec<bool>,
    guard: BlowUpGuard,
}

enum StepOutcome {
    Ok,
    Blown(String),
}

impl Stepper {
    fn new(grid: Grid, setup: &SemiclassicalSetup, dt: f64, guard: BlowUpGuard) -> Self {
        let eps = setup.epsilon();
        let inv_n = 1.0 / grid.len() as f64;
        let multiplier = (0..grid.len())
            .map(|i| Complex64::from_polar(inv_n, -eps * dt * grid.fft_order_xi_sq(i) / 2.0))
            .collect();
        let cutoff = guard.shell_fraction * grid.nyquist();
        let tail_mask = (0..grid.len())
            .map(|i| {
                let [a, b] = grid.axis_indices(i);
                let n = grid.points_per_axis();
                let qa = (fft::signed_index(a, n) as f64 * grid.dxi()).abs();
                let qb = if grid.dim() == 2 {
                    (fft::signed_index(b, n) as f64 * grid.dxi()).abs()
                } else {
                    0.0
                };
                qa.max(qb) > cutoff
            })
            .collect();
        Stepper {
            grid,
            dim: setup.dim(),
            eps,
            lambda: setup.lambda(),
            nonlinear: setup.nonlinearity_enabled(),
            dt,
            multiplier,
            tail_mask,
            guard,
        }
    }

    fn half_kick(&self, data: &mut [Complex64]) -> f64 {
        let coef = -self.lambda * self.eps * self.dt / 2.0;
        let half_power = 2.0 / self.dim as f64; // |u|^{4/n} = (|u|²)^{2/n}
        let mut max_rate: f64 = 0.0;
        for z in data.iter_mut() {
            let rate = z.norm_sqr().powf(half_power);
            max_rate = max_rate.max(rate);
            *z *= Complex64::from_polar(1.0, coef * rate);
        }
        max_rate * self.eps * self.dt.abs()
    }

    fn step(&self, data: &mut [Complex64]) -> StepOutcome {
        let n = self.grid.points_per_axis();
        if self.nonlinear {
            let phase = self.half_kick(data);
            if phase > self.guard.max_phase_per_step {
                return StepOutcome::Blown(format!(
                    "nonlinear phase per step {phase:.3e} exceeds {:.3e}",
                    self.guard.max_phase_per_step
                ));
            }
        }
        fft::transform(data, n, self.dim, Direction::Forward);
        if self.guard.max_tail_fraction.is_finite() {
            let mut total = 0.0;
            let mut tail = 0.0;
            for (z, &m) in data.iter().zip(&self.tail_mask) {
                let w = z.norm_sqr();
                total += w;
                if m {
                    tail += w;
                }
            }
            if total > 0.0 && tail > self.guard.max_tail_fraction * total {
                return StepOutcome::Blown(format!(
                    "spectral tail fraction {:.3e} exceeds {:.3e}",
                    tail / total,
                    self.guard.max_tail_fraction
                ));
            }
        }
        for (z, m) in data.iter_mut().zip(&self.multiplier) {
            *z *= m;
        }
        fft::transform(data, n, self.dim, Direction::Inverse);
        if self.nonlinear {
            self.half_kick(data);
        }
        if data.iter().any(|z| !z.is_finite()) {
            return StepOutcome::Blown("non-finite sample".into());
        }
        StepOutcome::Ok
    }
}

/// Exact free evolution: multiplies `û` by `exp(-iεt|ξ|²/2)`.
pub fn free_propagate(field: &Field, t: f64, setup: &SemiclassicalSetup) -> Result<Field> {
    field.expect_position()?;
    setup.check_grid(field.grid())?;
    let eps = setup.epsilon();
    let g = *field.grid();
    let mut data = field.samples().to_vec();
    fft::transform(&mut data, g.points_per_axis(), g.dim(), Direction::Forward);
    let inv_n = 1.0 / g.len() as f64;
    for (i, z) in data.iter_mut().enumerate() {
        *z *= Complex64::from_polar(inv_n, -eps * t * g.fft_order_xi_sq(i) / 2.0);
    }
    fft::transform(&mut data, g.points_per_axis(), g.dim(), Direction::Inverse);
    Ok(Field::from_parts(g, Representation::Position, data))
}

/// One Strang step: half nonlinear phase, exact linear flow, half phase.
pub fn split_step(field: &Field, dt: f64, setup: &SemiclassicalSetup) -> Result<Field> {
    field.expect_position()?;
    setup.check_grid(field.grid())?;
    if !(dt > 0.0) {
        return Err(NlsError::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let stepper = Stepper::new(*field.grid(), setup, dt, BlowUpGuard::nan_only());
    let mut data = field.samples().to_vec();
    match stepper.step(&mut data) {
        StepOutcome::Ok => Ok(Field::from_parts(*field.grid(), Representation::Position, data)),
        StepOutcome::Blown(reason) => Err(NlsError::BlowUp {
            time: dt,
            reason,
            last_healthy: Box::new(Snapshot {
                time: 0.0,
                field: field.clone(),
            }),
        }),
    }
}

/// Integrates to `t_final` (either sign) in `steps` equal steps with the
/// default [`BlowUpGuard`].
pub fn evolve(
    field: &Field,
    t_final: f64,
    steps: usize,
    setup: &SemiclassicalSetup,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    evolve_guarded(field, t_final, steps, setup, snapshot_times, BlowUpGuard::default())
}

pub fn evolve_guarded(
    field: &Field,
    t_final: f64,
    steps: usize,
    setup: &SemiclassicalSetup,
    snapshot_times: &[f64],
    guard: BlowUpGuard,
) -> Result<Trajectory> {
    field.expect_position()?;
    setup.check_grid(field.grid())?;
    if steps == 0 {
        return Err(NlsError::InvalidArgument("steps must be >= 1".into()));
    }
    if t_final == 0.0 || !t_final.is_finite() {
        return Err(NlsError::InvalidArgument(format!("bad final time {t_final}")));
    }
    let dt = t_final / steps as f64;
    let (lo, hi) = if t_final > 0.0 { (0.0, t_final) } else { (t_final, 0.0) };
    let tol = 1e-12 * t_final.abs();
    let mut wanted: Vec<usize> = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        if t < lo - tol || t > hi + tol {
            return Err(NlsError::InvalidArgument(format!(
                "snapshot time {t} outside [{lo}, {hi}]"
            )));
        }
        wanted.push(((t / dt).round() as usize).min(steps));
    }
    wanted.sort_unstable();
    wanted.dedup();

    let grid = *field.grid();
    let stepper = Stepper::new(grid, setup, dt, guard);
    let mut data = field.samples().to_vec();
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let take = |k: usize, data: &[Complex64], snaps: &mut Vec<Snapshot>| {
        snaps.push(Snapshot {
            time: k as f64 * dt,
            field: Field::from_parts(grid, Representation::Position, data.to_vec()),
        });
    };
    if next.peek() == Some(&&0) {
        take(0, &data, &mut snapshots);
        next.next();
    }
    let mut previous = data.clone();
    for k in 1..=steps {
        previous.copy_from_slice(&data);
        if let StepOutcome::Blown(reason) = stepper.step(&mut data) {
            return Err(NlsError::BlowUp {
                time: k as f64 * dt,
                reason,
                last_healthy: Box::new(Snapshot {
                    time: (k - 1) as f64 * dt,
                    field: Field::from_parts(grid, Representation::Position, previous),
                }),
            });
        }
        if next.peek() == Some(&&k) {
            take(k, &data, &mut snapshots);
            next.next();
        }
    }
    let final_field = Field::from_parts(grid, Representation::Position, data);
    let ledger = conserved_ledger(&final_field, setup)?;
    Ok(Trajectory {
        setup: *setup,
        dt,
        snapshots,
        ledger,
    })
}

/// Evolves forward using the setup's default step size.
pub fn evolve_default(
    field: &Field,
    t_final: f64,
    setup: &SemiclassicalSetup,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let dt = setup.default_time_step(field.grid());
    let steps = (t_final.abs() / dt).ceil().max(1.0) as usize;
    evolve(field, t_final, steps, setup, snapshot_times)
}

/// Free trajectory sampled exactly at the given times (no time stepping).
pub fn free_trajectory(field: &Field, setup: &SemiclassicalSetup, times: &[f64]) -> Result<Trajectory> {
    let lin = setup.linear();
    let snapshots = times
        .iter()
        .map(|&t| {
            Ok(Snapshot {
                time: t,
                field: free_propagate(field, t, &lin)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    Trajectory::from_snapshots(lin, dt, snapshots)
}

/// `u ↦ U` with `U(X) = ε^{n/4} u(√ε X)`; the grid half width becomes `L/√ε`.
pub fn rescale_to_unit(field: &Field, epsilon: f64) -> Result<Field> {
    rescale(field, epsilon, true)
}

/// `U ↦ u` with `u(x) = ε^{-n/4} U(x/√ε)`; the grid half width becomes `L√ε`.
pub fn rescale_from_unit(field: &Field, epsilon: f64) -> Result<Field> {
    rescale(field, epsilon, false)
}

fn rescale(field: &Field, epsilon: f64, to_unit: bool) -> Result<Field> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(NlsError::InvalidArgument(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let n = field.grid().dim() as f64;
    let root = epsilon.sqrt();
    let (length_factor, amp) = if to_unit {
        (1.0 / root, epsilon.powf(n / 4.0))
    } else {
        (root, epsilon.powf(-n / 4.0))
    };
    let grid = field.grid().rescaled(length_factor)?;
    // frequency samples scale with the inverse amplitude factor
    let amp = match field.representation() {
        Representation::Position => amp,
        Representation::Frequency => 1.0 / amp,
    };
    Ok(field.scaled(Complex64::new(amp, 0.0)).with_grid(grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(g: Grid) -> Field {
        Field::sample(g, |x| Complex64::new((-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp(), 0.0))
            .unwrap()
    }

    fn setup(eps: f64, lambda: Nonlinearity) -> SemiclassicalSetup {
        SemiclassicalSetup::new(eps, lambda, 1).unwrap()
    }

    #[test]
    fn exponents() {
        let s1 = SemiclassicalSetup::new(0.5, Nonlinearity::Focusing, 1).unwrap();
        let s2 = SemiclassicalSetup::new(0.5, Nonlinearity::Focusing, 2).unwrap();
        assert_eq!(s1.gamma(), 6.0);
        assert_eq!(s2.gamma(), 4.0);
        assert_eq!(s1.sigma() * 1.0, 2.0);
        assert_eq!(s2.sigma() * 2.0, 2.0);
        assert!(SemiclassicalSetup::new(0.0, Nonlinearity::Focusing, 1).is_err());
        assert!(SemiclassicalSetup::new(1.5, Nonlinearity::Focusing, 1).is_err());
    }

    #[test]
    fn free_propagate_identity_and_unitarity() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let u = gaussian(g).map_indexed(|x, z| z * Complex64::from_polar(1.0, 3.0 * x[0]));
        let s = setup(0.3, Nonlinearity::Defocusing);
        let same = free_propagate(&u, 0.0, &s).unwrap();
        assert!(same.sub(&u).unwrap().l2_norm() < 1e-14);
        for t in [0.1, 1.0, 7.5] {
            let v = free_propagate(&u, t, &s).unwrap();
            assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-12 * u.l2_norm());
        }
    }

    #[test]
    fn free_group_property() {
        let g = Grid::new(2, 64, 8.0).unwrap();
        let u = gaussian(g);
        let s = SemiclassicalSetup::new(0.7, Nonlinearity::Focusing, 2).unwrap();
        let a = free_propagate(&free_propagate(&u, 0.4, &s).unwrap(), 0.9, &s).unwrap();
        let b = free_propagate(&u, 1.3, &s).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn linear_split_step_is_free_flow() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let u = gaussian(g);
        let s = setup(0.2, Nonlinearity::Focusing).linear();
        let a = split_step(&u, 0.05, &s).unwrap();
        let b = free_propagate(&u, 0.05, &s).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn split_step_mass_drift() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let u = gaussian(g).scaled(Complex64::new(1.5, 0.0));
        let s = setup(1.0, Nonlinearity::Focusing);
        let v = split_step(&u, 1e-3, &s).unwrap();
        assert!((v.l2_norm() / u.l2_norm() - 1.0).abs() < 1e-13);
        assert!(split_step(&u, 0.0, &s).is_err());
        assert!(split_step(&u, -1e-3, &s).is_err());
    }

    #[test]
    fn evolve_single_step_matches_split_step() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let u = gaussian(g);
        let s = setup(0.5, Nonlinearity::Defocusing);
        let traj = evolve(&u, 0.01, 1, &s, &[0.01]).unwrap();
        let one = split_step(&u, 0.01, &s).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert!(traj.snapshots[0].field.sub(&one).unwrap().l2_norm() < 1e-15);
    }

    #[test]
    fn evolve_snapshots_nearest_step() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let u = gaussian(g);
        let s = setup(0.5, Nonlinearity::Defocusing);
        let traj = evolve(&u, 1.0, 10, &s, &[0.0, 0.33, 0.31, 1.0]).unwrap();
        let times = traj.times();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.3).abs() < 1e-12);
        assert!(evolve(&u, 1.0, 10, &s, &[1.5]).is_err());
        assert!(evolve(&u, 1.0, 0, &s, &[]).is_err());
    }

    #[test]
    fn free_evolve_matches_exact_snapshots() {
        let g = Grid::new(1, 256, 15.0).unwrap();
        let u = gaussian(g);
        let s = setup(0.25, Nonlinearity::Focusing).linear();
        let times = [0.0, 0.5, 1.0, 2.0];
        let traj = evolve(&u, 2.0, 400, &s, &times).unwrap();
        for snap in &traj.snapshots {
            let exact = free_propagate(&u, snap.time, &s).unwrap();
            assert!(snap.field.sub(&exact).unwrap().l2_norm() < 1e-12);
        }
    }

    #[test]
    fn backward_evolution_inverts_forward() {
        let g = Grid::new(1, 256, 15.0).unwrap();
        let u = gaussian(g);
        let s = setup(1.0, Nonlinearity::Defocusing);
        let fwd = evolve(&u, 0.5, 500, &s, &[0.5]).unwrap();
        let back = evolve(&fwd.snapshots[0].field, -0.5, 500, &s, &[-0.5]).unwrap();
        assert!(back.snapshots[0].field.sub(&u).unwrap().l2_norm() < 1e-10);
    }

    #[test]
    fn rescale_is_isometric_and_invertible() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let u = gaussian(g);
        let same = rescale_to_unit(&u, 1.0).unwrap();
        assert_eq!(same.samples(), u.samples());
        for eps in [0.5, 0.25, 0.01] {
            let big = rescale_to_unit(&u, eps).unwrap();
            assert!((big.l2_norm() - u.l2_norm()).abs() < 1e-12);
            assert!((big.grid().half_width() - 10.0 / eps.sqrt()).abs() < 1e-9);
            let back = rescale_from_unit(&big, eps).unwrap();
            assert!(back.sub(&u).unwrap().l2_norm() < 1e-13);
            let freq = rescale_to_unit(&u.to_frequency(), eps).unwrap();
            assert!((freq.l2_norm() - u.l2_norm()).abs() < 1e-12);
            assert!(freq.to_position().sub(&big).unwrap().l2_norm() < 1e-12);
        }
    }

    #[test]
    fn gamma_integral_scaling_identity() {
        // ε ∫|u|⁶ dx = ∫|U|⁶ dX, both sides by direct quadrature
        let g = Grid::new(1, 1024, 20.0).unwrap();
        let u = gaussian(g);
        let eps = 0.25;
        let big = rescale_to_unit(&u, eps).unwrap();
        let lhs = eps * u.lp_integral(6.0);
        let rhs = big.lp_integral(6.0);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn guard_flags_underresolved_focusing() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let u = gaussian(g).scaled(Complex64::new(6.0, 0.0));
        let s = setup(1.0, Nonlinearity::Focusing);
        let err = evolve(&u, 1.0, 100, &s, &[1.0]).unwrap_err();
        match err {
            NlsError::BlowUp { time, last_healthy, .. } => {
                assert!(time > 0.0 && time <= 1.0);
                assert!(last_healthy.field.samples().iter().all(|z| z.is_finite()));
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
