//! Scaled, modulated, translated and time-shifted profiles, the
//! orthogonality functional on their parameter families, and Pythagorean
//! bookkeeping for superpositions.
//!
//! A [`ProfileSpec`] holds unit-scale parameters `Γ(ε) = (h, t₀, x₀, ξ₀)` and
//! builds
//!
//! ```text
//! H(φ)(t,x) = e^{ix·ξ₀ - itξ₀²/2} h^{-n/2} V((t-t₀)/h², (x-x₀-tξ₀)/h),  V(s) = e^{isΔ/2}φ.
//! ```
//!
//! The semiclassical datum `ε^{-n/4} H(φ)(0, x/√ε)` is obtained with
//! [`crate::evolution::rescale_from_unit`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::analytic::ground_state;
use crate::error::{NlsError, Result};
use crate::evolution::rescale_from_unit;
use crate::grid::{Field, Grid, Representation};

/// Finite sum `Σ c_k ε^{k/2}` with `k ∈ {-2, -1, 0, 1, 2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleExpr {
    /// half-power → coefficient
    terms: BTreeMap<i32, f64>,
}

const MIN_HALF_POWER: i32 = -2;
const MAX_HALF_POWER: i32 = 2;

impl ScaleExpr {
    pub fn constant(c: f64) -> Self {
        ScaleExpr::monomial(c, 0)
    }

    /// `c·ε^{half_power/2}`
    pub fn monomial(c: f64, half_power: i32) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(half_power, c);
        }
        ScaleExpr { terms }
    }

    pub fn zero() -> Self {
        ScaleExpr {
            terms: BTreeMap::new(),
        }
    }

    pub fn eval(&self, epsilon: f64) -> f64 {
        let r = epsilon.sqrt();
        self.terms.iter().map(|(&k, &c)| c * r.powi(k)).sum()
    }

    /// Smallest power of `√ε` present (`0` for the zero expression).
    pub fn min_half_power(&self) -> i32 {
        self.terms.keys().next().copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add(mut self, other: &ScaleExpr, sign: f64) -> ScaleExpr {
        for (&k, &c) in &other.terms {
            let e = self.terms.entry(k).or_insert(0.0);
            *e += sign * c;
            if *e == 0.0 {
                self.terms.remove(&k);
            }
        }
        self
    }

    fn mul(&self, other: &ScaleExpr) -> ScaleExpr {
        let mut out = ScaleExpr::zero();
        for (&a, &ca) in &self.terms {
            for (&b, &cb) in &other.terms {
                out = out.add(&ScaleExpr::monomial(ca * cb, a + b), 1.0);
            }
        }
        out
    }
}

impl fmt::Display for ScaleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (&k, &c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if i == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            match k {
                0 => write!(f, "{mag}")?,
                1 => write!(f, "{mag}*sqrt(eps)")?,
                2 => write!(f, "{mag}*eps")?,
                -1 => write!(f, "{mag}/sqrt(eps)")?,
                -2 => write!(f, "{mag}/eps")?,
                _ => unreachable!("powers are validated on construction"),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Eps,
    Sqrt,
    Open,
    Close,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

fn tokenize(s: &str) -> std::result::Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '(' => {
                out.push(Token::Open);
                i += 1
            }
            ')' => {
                out.push(Token::Close);
                i += 1
            }
            '+' => {
                out.push(Token::Plus);
                i += 1
            }
            '-' => {
                out.push(Token::Minus);
                i += 1
            }
            '*' => {
                out.push(Token::Star);
                i += 1
            }
            '/' => {
                out.push(Token::Slash);
                i += 1
            }
            '^' => {
                out.push(Token::Caret);
                i += 1
            }
            'ε' => {
                out.push(Token::Eps);
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || ((chars[i] == 'e' || chars[i] == 'E')
                            && i + 1 < chars.len()
                            && (chars[i + 1].is_ascii_digit() || chars[i + 1] == '-' || chars[i + 1] == '+')))
                {
                    if (chars[i] == 'e' || chars[i] == 'E') && i + 1 < chars.len() {
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token::Num(
                    text.parse().map_err(|_| format!("bad number '{text}'"))?,
                ));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.as_str() {
                    "eps" | "epsilon" => out.push(Token::Eps),
                    "sqrt" => out.push(Token::Sqrt),
                    _ => return Err(format!("unknown identifier '{word}'")),
                }
            }
            _ => return Err(format!("unexpected character '{c}'")),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Token) -> std::result::Result<(), String> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(format!("expected {t:?}, found {got:?}")),
        }
    }

    fn expr(&mut self) -> std::result::Result<ScaleExpr, String> {
        let mut acc = ScaleExpr::zero();
        let mut sign = 1.0;
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                sign = -1.0
            }
            Some(Token::Plus) => self.pos += 1,
            _ => {}
        }
        acc = acc.add(&self.term()?, sign);
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?, 1.0);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?, -1.0);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> std::result::Result<ScaleExpr, String> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.power()?);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let d = self.power()?;
                    if d.terms.len() != 1 {
                        return Err("division is only allowed by a single monomial".into());
                    }
                    let (&k, &c) = d.terms.iter().next().expect("one term");
                    acc = acc.mul(&ScaleExpr::monomial(1.0 / c, -k));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> std::result::Result<ScaleExpr, String> {
        let base = self.atom()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let mut sign = 1.0;
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            sign = -1.0;
        }
        let e = match self.next() {
            Some(Token::Num(v)) => sign * v,
            Some(Token::Open) => {
                let inner = self.expr()?;
                self.expect(Token::Close)?;
                if inner.terms.keys().any(|&k| k != 0) {
                    return Err("exponent must be a constant".into());
                }
                sign * inner.eval(1.0)
            }
            got => return Err(format!("bad exponent {got:?}")),
        };
        if base.terms.len() != 1 {
            return Err("only monomials can be raised to a power".into());
        }
        let (&k, &c) = base.terms.iter().next().expect("one term");
        let half = k as f64 * e;
        if (half - half.round()).abs() > 1e-12 {
            return Err(format!("power {e} leaves the half-integer lattice"));
        }
        Ok(ScaleExpr::monomial(c.powf(e), half.round() as i32))
    }

    fn atom(&mut self) -> std::result::Result<ScaleExpr, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(ScaleExpr::constant(v)),
            Some(Token::Eps) => Ok(ScaleExpr::monomial(1.0, 2)),
            Some(Token::Sqrt) => {
                self.expect(Token::Open)?;
                let inner = self.expr()?;
                self.expect(Token::Close)?;
                if inner.terms.len() != 1 {
                    return Err("sqrt takes a single monomial".into());
                }
                let (&k, &c) = inner.terms.iter().next().expect("one term");
                if k % 2 != 0 || c < 0.0 {
                    return Err("sqrt argument must be c·ε^m with c ≥ 0 and integer m".into());
                }
                Ok(ScaleExpr::monomial(c.sqrt(), k / 2))
            }
            Some(Token::Open) => {
                let e = self.expr()?;
                self.expect(Token::Close)?;
                Ok(e)
            }
            Some(Token::Minus) => Ok(ScaleExpr::zero().add(&self.power()?, -1.0)),
            got => Err(format!("unexpected {got:?}")),
        }
    }
}

impl FromStr for ScaleExpr {
    type Err = NlsError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| NlsError::InvalidArgument(format!("scale expression '{s}': {m}"));
        let tokens = tokenize(s).map_err(bad)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr().map_err(bad)?;
        if p.pos != p.tokens.len() {
            return Err(bad(format!("trailing input at token {}", p.pos)));
        }
        if let Some(k) = e
            .terms
            .keys()
            .find(|&&k| !(MIN_HALF_POWER..=MAX_HALF_POWER).contains(&k))
        {
            return Err(bad(format!(
                "power ε^{} is outside {{ε^-1, ε^-1/2, 1, ε^1/2, ε}}",
                *k as f64 / 2.0
            )));
        }
        Ok(e)
    }
}

/// Numerical parameters of a profile at one `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gamma {
    pub h: f64,
    pub t0: f64,
    pub x0: [f64; 2],
    pub xi0: [f64; 2],
}

impl Gamma {
    pub fn unit() -> Self {
        Gamma {
            h: 1.0,
            t0: 0.0,
            x0: [0.0; 2],
            xi0: [0.0; 2],
        }
    }
}

/// Unit-scale profile parameters as functions of `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSpec {
    pub h: ScaleExpr,
    pub t0: ScaleExpr,
    pub x0: Vec<ScaleExpr>,
    pub xi0: Vec<ScaleExpr>,
    /// Requires `√ε ≤ h ≤ 1` and `|ξ₀|·√ε` bounded on the ladder.
    pub admissible: bool,
}

impl ProfileSpec {
    /// `h = 1` and zero cores in dimension `dim`.
    pub fn centered(dim: usize) -> Self {
        ProfileSpec {
            h: ScaleExpr::constant(1.0),
            t0: ScaleExpr::zero(),
            x0: vec![ScaleExpr::zero(); dim],
            xi0: vec![ScaleExpr::zero(); dim],
            admissible: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn gamma(&self, epsilon: f64) -> Gamma {
        let mut g = Gamma {
            h: self.h.eval(epsilon),
            t0: self.t0.eval(epsilon),
            x0: [0.0; 2],
            xi0: [0.0; 2],
        };
        for (a, e) in self.x0.iter().enumerate().take(2) {
            g.x0[a] = e.eval(epsilon);
        }
        for (a, e) in self.xi0.iter().enumerate().take(2) {
            g.xi0[a] = e.eval(epsilon);
        }
        g
    }

    /// Checks the invariants at every ladder point.
    pub fn validate(&self, ladder: &[f64]) -> Result<()> {
        if self.x0.len() != self.xi0.len() || !(1..=2).contains(&self.x0.len()) {
            return Err(NlsError::InvalidArgument(
                "x0 and xi0 must both have one or two components".into(),
            ));
        }
        for &eps in ladder {
            let h = self.h.eval(eps);
            if !(h > 0.0) {
                return Err(NlsError::InvalidArgument(format!("h({eps}) = {h} is not positive")));
            }
            if self.admissible && !(eps.sqrt() * (1.0 - 1e-12) <= h && h <= 1.0 + 1e-12) {
                return Err(NlsError::InvalidArgument(format!(
                    "admissible profile needs sqrt(eps) <= h <= 1, got h({eps}) = {h}"
                )));
            }
        }
        // |ξ₀|√ε stays bounded as ε → 0 iff no power below ε^{-1/2} appears
        if self.admissible && self.xi0.iter().any(|e| e.min_half_power() < -1) {
            return Err(NlsError::InvalidArgument(
                "admissible profile needs |xi0|·sqrt(eps) bounded".into(),
            ));
        }
        Ok(())
    }
}

/// Built-in decaying waveforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Waveform {
    /// `e^{-|x|²/2}`
    Gaussian,
    /// The ground state `Q`.
    GroundState,
    /// Mean-zero `(n - |x|²) e^{-|x|²/2}`.
    Ricker,
    /// `exp(-1/(1-|x|²))` on the unit ball.
    Bump,
}

impl FromStr for Waveform {
    type Err = NlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Waveform::Gaussian),
            "ground_state" => Ok(Waveform::GroundState),
            "ricker" => Ok(Waveform::Ricker),
            "bump" => Ok(Waveform::Bump),
            _ => Err(NlsError::InvalidArgument(format!(
                "unknown waveform '{s}' (expected gaussian, ground_state, ricker or bump)"
            ))),
        }
    }
}

impl Waveform {
    pub fn name(self) -> &'static str {
        match self {
            Waveform::Gaussian => "gaussian",
            Waveform::GroundState => "ground_state",
            Waveform::Ricker => "ricker",
            Waveform::Bump => "bump",
        }
    }

    /// Grid on which waveforms are sampled before being placed by a profile.
    pub fn reference_grid(dim: usize) -> Result<Grid> {
        match dim {
            1 => Grid::new(1, 1024, 16.0),
            _ => Grid::new(2, 128, 12.0),
        }
    }

    pub fn sample(self, grid: Grid) -> Result<Field> {
        let n = grid.dim() as f64;
        match self {
            Waveform::GroundState => Ok(ground_state(grid.dim(), grid)?.into_field()),
            Waveform::Gaussian => Field::sample(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Complex64::new((-r2 / 2.0).exp(), 0.0)
            }),
            Waveform::Ricker => Field::sample(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Complex64::new((n - r2) * (-r2 / 2.0).exp(), 0.0)
            }),
            Waveform::Bump => Field::sample(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let v = if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 };
                Complex64::new(v, 0.0)
            }),
        }
    }

    pub fn reference_field(self, dim: usize) -> Result<Field> {
        self.sample(Waveform::reference_grid(dim)?)
    }
}

fn check_profile_resolution(gamma: &Gamma, grid: &Grid) -> Result<()> {
    let dx = grid.dx();
    let l = grid.half_width();
    let xi = gamma.xi0[0].abs().max(gamma.xi0[1].abs());
    if dx > gamma.h / 4.0 || xi > PI / (2.0 * dx) {
        let by_scale = (8.0 * l / gamma.h).ceil() as usize;
        let by_freq = (4.0 * l * xi / PI).ceil() as usize;
        return Err(NlsError::Resolution {
            reason: format!(
                "profile with h = {} and |xi0| = {xi} on dx = {dx}",
                gamma.h
            ),
            required_n: by_scale.max(by_freq).next_power_of_two(),
        });
    }
    Ok(())
}

/// `H(φ)(t)` on `grid`, assembled on the Fourier side:
/// `Ĥ(ξ) = e^{-itξ₀²/2} h^{n/2} e^{-i(x₀+tξ₀)·ζ} e^{-i(t-t₀)|ζ|²/2} φ̂(hζ)`, `ζ = ξ - ξ₀`.
pub fn build_profile_gamma(gamma: &Gamma, phi: &Field, t: f64, grid: Grid) -> Result<Field> {
    let d = grid.dim();
    if phi.grid().dim() != d {
        return Err(NlsError::GridMismatch("waveform and output grids differ in dimension".into()));
    }
    if !(gamma.h > 0.0) {
        return Err(NlsError::InvalidArgument(format!("scale must be positive, got {}", gamma.h)));
    }
    check_profile_resolution(gamma, &grid)?;
    let n = grid.points_per_axis();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..n).map(|k| gamma.h * (grid.axis_frequency(k) - gamma.xi0[a])).collect())
        .collect();
    let phi_hat = phi.fourier_at(&axes)?;
    let xi0_sq: f64 = gamma.xi0[..d].iter().map(|v| v * v).sum();
    let amp = gamma.h.powf(d as f64 / 2.0);
    let global = Complex64::from_polar(amp, -t * xi0_sq / 2.0);
    let samples = phi_hat
        .into_iter()
        .enumerate()
        .map(|(i, ph)| {
            let k = grid.frequency(i);
            let mut shift = 0.0;
            let mut zeta_sq = 0.0;
            for a in 0..d {
                let zeta = k[a] - gamma.xi0[a];
                shift += (gamma.x0[a] + t * gamma.xi0[a]) * zeta;
                zeta_sq += zeta * zeta;
            }
            global * Complex64::from_polar(1.0, -shift - (t - gamma.t0) * zeta_sq / 2.0) * ph
        })
        .collect();
    Ok(Field::new(grid, Representation::Frequency, samples)?.to_position())
}

pub fn build_profile(spec: &ProfileSpec, phi: &Field, t: f64, epsilon: f64, grid: Grid) -> Result<Field> {
    if spec.dim() != grid.dim() {
        return Err(NlsError::GridMismatch(format!(
            "profile of dimension {} on a {}D grid",
            spec.dim(),
            grid.dim()
        )));
    }
    build_profile_gamma(&spec.gamma(epsilon), phi, t, grid)
}

/// Semiclassical datum `ε^{-n/4} H(φ)(t, x/√ε)` on `unit_grid` contracted by `√ε`.
pub fn semiclassical_profile(
    spec: &ProfileSpec,
    phi: &Field,
    t: f64,
    epsilon: f64,
    unit_grid: Grid,
) -> Result<Field> {
    rescale_from_unit(&build_profile(spec, phi, t, epsilon, unit_grid)?, epsilon)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub spec: ProfileSpec,
    /// `‖φ_j‖_{L²}`
    pub waveform_mass: f64,
    /// `‖H_j(φ_j)‖_{L²}` on the synthesis grid.
    pub built_mass: f64,
}

/// Pythagorean bookkeeping for `U₀ = Σ H_j(φ_j) + w`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionLedger {
    pub entries: Vec<LedgerEntry>,
    pub remainder_mass: f64,
    /// `‖U₀‖²`
    pub total_mass_sqr: f64,
    /// `|‖U₀‖² - Σ‖φ_j‖² - ‖w‖²|`
    pub defect: f64,
}

impl DecompositionLedger {
    pub fn relative_defect(&self) -> f64 {
        if self.total_mass_sqr == 0.0 {
            0.0
        } else {
            self.defect / self.total_mass_sqr
        }
    }
}

/// `Σ_j H_j(φ_j)(0) + w` on `grid` with its ledger.
pub fn synthesize_data(
    items: &[(ProfileSpec, Field)],
    remainder: Option<&Field>,
    epsilon: f64,
    grid: Grid,
) -> Result<(Field, DecompositionLedger)> {
    let mut total = match remainder {
        Some(w) => {
            w.grid().ensure_same(&grid)?;
            w.to_position()
        }
        None => Field::zeros(grid, Representation::Position),
    };
    let remainder_mass = remainder.map_or(0.0, |w| w.l2_norm());
    let mut entries = Vec::with_capacity(items.len());
    for (spec, phi) in items {
        let part = build_profile(spec, phi, 0.0, epsilon, grid)?;
        entries.push(LedgerEntry {
            spec: spec.clone(),
            waveform_mass: phi.l2_norm(),
            built_mass: part.l2_norm(),
        });
        total = total.add(&part)?;
    }
    let total_mass_sqr = total.norm_sqr();
    let parts: f64 = entries.iter().map(|e| e.waveform_mass * e.waveform_mass).sum();
    let defect = (total_mass_sqr - parts - remainder_mass * remainder_mass).abs();
    Ok((
        total,
        DecompositionLedger {
            entries,
            remainder_mass,
            total_mass_sqr,
            defect,
        },
    ))
}

/// Slope above which the separation functional is deemed divergent.
pub const ORTHOGONALITY_SLOPE: f64 = 0.1;
/// Terminal value above which the separation functional is deemed divergent.
pub const ORTHOGONALITY_TERMINAL: f64 = 1e3;

#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalityReport {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of `log value` against `log(1/ε)`.
    pub slope: f64,
    pub orthogonal: bool,
}

/// Least-squares slope of `y` against `x`; zero for fewer than two points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxy: f64 = (0..n).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let sxx: f64 = (0..n).map(|i| (x[i] - mx) * (x[i] - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// The separation functional
/// `h_j/h_k + h_k/h_j + |t_j-t_k|/h_j² + |(x_j-x_k)/h_j + (t_jξ_j-t_kξ_k)/h_j|`.
pub fn separation(j: &Gamma, k: &Gamma) -> f64 {
    let mut spatial = 0.0;
    for a in 0..2 {
        let v = (j.x0[a] - k.x0[a]) / j.h + (j.t0 * j.xi0[a] - k.t0 * k.xi0[a]) / j.h;
        spatial += v * v;
    }
    j.h / k.h + k.h / j.h + (j.t0 - k.t0).abs() / (j.h * j.h) + spatial.sqrt()
}

pub fn orthogonality_gap(spec_j: &ProfileSpec, spec_k: &ProfileSpec, ladder: &[f64]) -> Result<OrthogonalityReport> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(NlsError::InvalidArgument("ladder must be nonempty and strictly decreasing".into()));
    }
    let values: Vec<f64> = ladder
        .iter()
        .map(|&e| separation(&spec_j.gamma(e), &spec_k.gamma(e)))
        .collect();
    let lx: Vec<f64> = ladder.iter().map(|e| (1.0 / e).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    let terminal = *values.last().expect("nonempty");
    Ok(OrthogonalityReport {
        epsilons: ladder.to_vec(),
        values,
        slope,
        orthogonal: slope > ORTHOGONALITY_SLOPE || terminal > ORTHOGONALITY_TERMINAL,
    })
}

/// `⟨u_j, u_k⟩ = ∫ u_j conj(u_k) dx`.
pub fn inner_product_cross_term(a: &Field, b: &Field) -> Result<Complex64> {
    a.to_position().inner(&b.to_position())
}
