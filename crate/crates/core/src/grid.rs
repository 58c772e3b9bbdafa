//! Uniform periodic grids, sampled complex fields and the unitary Fourier
//! transform `f̂(ξ) = (2π)^{-n/2} ∫ e^{-ix·ξ} f(x) dx`.
//!
//! Frequency samples are stored in monotone order: monotone index `k`
//! corresponds to `ξ = (k - N/2)·dξ` on each axis.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{NlsError, Result};
use crate::fft::{self, Direction};

/// Square periodic grid on `[-L, L)^n`, `n ∈ {1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(NlsError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(NlsError::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(NlsError::InvalidGrid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Grid {
            dim,
            points,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest representable frequency magnitude per axis, `π/dx`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dx()
    }

    /// Total number of samples, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn frequency_cell_volume(&self) -> f64 {
        self.dxi().powi(self.dim as i32)
    }

    pub fn axis_position(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn axis_frequency(&self, k: usize) -> f64 {
        (k as f64 - (self.points / 2) as f64) * self.dxi()
    }

    /// Per-axis indices of a flat row-major index (axis 0 is the slow one).
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.points, idx % self.points],
        }
    }

    /// Position of sample `idx`; only the first `dim` entries are meaningful.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.axis_indices(idx);
        match self.dim {
            1 => [self.axis_position(a), 0.0],
            _ => [self.axis_position(a), self.axis_position(b)],
        }
    }

    /// Frequency of monotone-ordered sample `idx`.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.axis_indices(idx);
        match self.dim {
            1 => [self.axis_frequency(a), 0.0],
            _ => [self.axis_frequency(a), self.axis_frequency(b)],
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let p = self.position(idx);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Squared frequency magnitude of FFT-ordered bin `idx`.
    pub(crate) fn fft_order_xi_sq(&self, idx: usize) -> f64 {
        let [a, b] = self.axis_indices(idx);
        let dxi = self.dxi();
        let qa = fft::signed_index(a, self.points) as f64 * dxi;
        match self.dim {
            1 => qa * qa,
            _ => {
                let qb = fft::signed_index(b, self.points) as f64 * dxi;
                qa * qa + qb * qb
            }
        }
    }

    /// Same grid with the half width multiplied by `factor`; `N` unchanged.
    pub fn rescaled(&self, factor: f64) -> Result<Grid> {
        Grid::new(self.dim, self.points, self.half_width * factor)
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(NlsError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Position,
    Frequency,
}

impl Representation {
    fn code(self) -> u32 {
        match self {
            Representation::Position => 0,
            Representation::Frequency => 1,
        }
    }
}

/// Complex samples on a [`Grid`] in either representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    repr: Representation,
    samples: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, repr: Representation, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(NlsError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if let Some(index) = samples.iter().position(|z| !z.is_finite()) {
            return Err(NlsError::NonFiniteSample { index });
        }
        Ok(Field {
            grid,
            repr,
            samples,
        })
    }

    /// Internal constructor for samples already known to be finite.
    pub(crate) fn from_parts(grid: Grid, repr: Representation, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Field {
            grid,
            repr,
            samples,
        }
    }

    pub fn zeros(grid: Grid, repr: Representation) -> Self {
        Field::from_parts(grid, repr, vec![Complex64::default(); grid.len()])
    }

    /// Samples `f` at every grid position. `f` receives the `dim` coordinates.
    pub fn sample<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let samples: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let p = grid.position(i);
                f(&p[..grid.dim()])
            })
            .collect();
        Field::new(grid, Representation::Position, samples)
    }

    /// Frequency-side analogue of [`Field::sample`].
    pub fn sample_frequency<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let samples: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let k = grid.frequency(i);
                f(&k[..grid.dim()])
            })
            .collect();
        Field::new(grid, Representation::Frequency, samples)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn is_position(&self) -> bool {
        self.repr == Representation::Position
    }

    pub(crate) fn expect_position(&self) -> Result<()> {
        if self.is_position() {
            Ok(())
        } else {
            Err(NlsError::WrongRepresentation {
                expected: "position",
            })
        }
    }

    fn measure(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.cell_volume(),
            Representation::Frequency => self.grid.frequency_cell_volume(),
        }
    }

    /// `Σ|u|² · dV`, the squared L² norm in either representation.
    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.measure()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `∫|u|^p` in the current representation.
    pub fn lp_integral(&self, p: f64) -> f64 {
        let half = p / 2.0;
        self.samples
            .iter()
            .map(|z| z.norm_sqr().powf(half))
            .sum::<f64>()
            * self.measure()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn fourier_transform(&self) -> Result<Field> {
        self.expect_position()?;
        Ok(self.to_frequency())
    }

    pub fn inverse_fourier_transform(&self) -> Result<Field> {
        if self.repr != Representation::Frequency {
            return Err(NlsError::WrongRepresentation {
                expected: "frequency",
            });
        }
        Ok(self.to_position())
    }

    /// Frequency representation (identity when already there).
    pub fn to_frequency(&self) -> Field {
        if self.repr == Representation::Frequency {
            return self.clone();
        }
        let g = self.grid;
        let mut data = self.samples.clone();
        fft::transform(&mut data, g.points, g.dim, Direction::Forward);
        let scale = (g.dx() / (2.0 * PI).sqrt()).powi(g.dim as i32);
        let out = reorder_to_monotone(&g, &data, scale);
        Field::from_parts(g, Representation::Frequency, out)
    }

    /// Position representation (identity when already there).
    pub fn to_position(&self) -> Field {
        if self.repr == Representation::Position {
            return self.clone();
        }
        let g = self.grid;
        let scale = ((2.0 * PI).sqrt() / g.dx()).powi(g.dim as i32) / g.len() as f64;
        let mut data = reorder_to_fft(&g, &self.samples, scale);
        fft::transform(&mut data, g.points, g.dim, Direction::Inverse);
        Field::from_parts(g, Representation::Position, data)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Field {
        let samples = self.samples.iter().map(|&z| f(z)).collect();
        Field::from_parts(self.grid, self.repr, samples)
    }

    /// Pointwise map that also sees the sample coordinates (position or frequency).
    pub fn map_indexed<F: Fn(&[f64], Complex64) -> Complex64>(&self, f: F) -> Field {
        let d = self.grid.dim();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let c = match self.repr {
                    Representation::Position => self.grid.position(i),
                    Representation::Frequency => self.grid.frequency(i),
                };
                f(&c[..d], z)
            })
            .collect();
        Field::from_parts(self.grid, self.repr, samples)
    }

    /// Periodic translation `u(· - shift)` applied exactly on the Fourier side.
    pub fn translated(&self, shift: &[f64]) -> Field {
        let d = self.grid.dim();
        let out = self.to_frequency().map_indexed(|k, z| {
            let phase: f64 = (0..d).map(|a| k[a] * shift.get(a).copied().unwrap_or(0.0)).sum();
            z * Complex64::from_polar(1.0, -phase)
        });
        match self.repr {
            Representation::Position => out.to_position(),
            Representation::Frequency => out,
        }
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        self.map(|z| z * c)
    }

    fn zip_with(&self, other: &Field, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.grid.ensure_same(&other.grid)?;
        let rhs = if other.repr == self.repr {
            std::borrow::Cow::Borrowed(other)
        } else {
            std::borrow::Cow::Owned(match self.repr {
                Representation::Position => other.to_position(),
                Representation::Frequency => other.to_frequency(),
            })
        };
        let samples = self
            .samples
            .iter()
            .zip(rhs.samples.iter())
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(Field::from_parts(self.grid, self.repr, samples))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `⟨self, other⟩ = ∫ self · conj(other)` with the representation's measure.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        let prod = self.zip_with(other, |a, b| a * b.conj())?;
        let s: Complex64 = prod.samples.iter().sum();
        Ok(s * self.measure())
    }

    /// Reinterpret the samples on another grid with the same sample count.
    pub(crate) fn with_grid(self, grid: Grid) -> Field {
        debug_assert_eq!(grid.len(), self.samples.len());
        Field { grid, ..self }
    }

    /// Continuous Fourier transform `(2π)^{-n/2} Σ u(y) e^{-iη·y} dyⁿ` at the
    /// tensor-product points `axes[0] × axes[1]`, zero outside the grid's band.
    pub fn fourier_at(&self, axes: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        let d = self.grid.dim();
        if axes.len() != d {
            return Err(NlsError::InvalidArgument(format!(
                "need {d} axis point lists, got {}",
                axes.len()
            )));
        }
        let src = self.to_position();
        let g = self.grid;
        let n = g.points;
        let band = g.nyquist();
        let weight = g.dx() / (2.0 * PI).sqrt();
        let kernel = |points: &Vec<f64>| -> Vec<Vec<Complex64>> {
            points
                .par_iter()
                .map(|&eta| {
                    if eta.abs() >= band {
                        return vec![Complex64::default(); n];
                    }
                    let step = Complex64::from_polar(1.0, -eta * g.dx());
                    let mut row = Vec::with_capacity(n);
                    let mut z = Complex64::default();
                    for j in 0..n {
                        if j % 64 == 0 {
                            // resynchronise the recurrence to keep rounding bounded
                            z = Complex64::from_polar(weight, -eta * g.axis_position(j));
                        }
                        row.push(z);
                        z *= step;
                    }
                    row
                })
                .collect()
        };
        let data = &src.samples;
        Ok(match d {
            1 => kernel(&axes[0])
                .par_iter()
                .map(|row| row.iter().zip(data).map(|(e, f)| e * f).sum())
                .collect(),
            _ => {
                let e0 = kernel(&axes[0]);
                let e1 = kernel(&axes[1]);
                let (p, q) = (axes[0].len(), axes[1].len());
                // contract the second axis first, then the first
                let partial: Vec<Complex64> = (0..n * q)
                    .into_par_iter()
                    .map(|idx| {
                        let (j, b) = (idx / q, idx % q);
                        e1[b].iter().zip(&data[j * n..(j + 1) * n]).map(|(e, f)| e * f).sum()
                    })
                    .collect();
                (0..p * q)
                    .into_par_iter()
                    .map(|idx| {
                        let (a, b) = (idx / q, idx % q);
                        (0..n).map(|j| e0[a][j] * partial[j * q + b]).sum()
                    })
                    .collect()
            }
        })
    }

    // ----- binary container -------------------------------------------------

    pub const MAGIC: [u8; 4] = *b"NLSF";
    pub const VERSION: u32 = 1;

    /// Writes the `NLSF` container: magic, version, n, N, L, representation,
    /// then interleaved little-endian (re, im) doubles.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim as u32).to_le_bytes())?;
        w.write_all(&(self.grid.points as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        w.write_all(&self.repr.code().to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.samples.len() * 16);
        for z in &self.samples {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Field> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != Self::MAGIC {
            return Err(NlsError::Container(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != Self::VERSION {
            return Err(NlsError::Container(format!(
                "unsupported version {version}"
            )));
        }
        let dim = read_u32(&mut r)? as usize;
        let points = read_u32(&mut r)? as usize;
        let mut l = [0u8; 8];
        r.read_exact(&mut l)?;
        let half_width = f64::from_le_bytes(l);
        let repr = match read_u32(&mut r)? {
            0 => Representation::Position,
            1 => Representation::Frequency,
            other => {
                return Err(NlsError::Container(format!(
                    "unknown representation flag {other}"
                )))
            }
        };
        let grid = Grid::new(dim, points, half_width)?;
        let mut raw = vec![0u8; grid.len() * 16];
        r.read_exact(&mut raw)
            .map_err(|e| NlsError::Container(format!("truncated sample block: {e}")))?;
        let samples = raw
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Field::new(grid, repr, samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Field> {
        let f = std::fs::File::open(path)?;
        Field::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// FFT order → monotone order, applying the `(-1)^q` phase from the `-L`
/// origin and a uniform scale.
fn reorder_to_monotone(g: &Grid, data: &[Complex64], scale: f64) -> Vec<Complex64> {
    let n = g.points;
    let half = n / 2;
    let mut out = vec![Complex64::default(); data.len()];
    let sign = |q: usize| if (q + half).is_multiple_of(2) { 1.0 } else { -1.0 };
    match g.dim {
        1 => {
            for m in 0..n {
                let k = (m + half) % n;
                out[k] = data[m] * (scale * sign(k));
            }
        }
        _ => {
            for a in 0..n {
                let ka = (a + half) % n;
                for b in 0..n {
                    let kb = (b + half) % n;
                    out[ka * n + kb] = data[a * n + b] * (scale * sign(ka) * sign(kb));
                }
            }
        }
    }
    out
}

fn reorder_to_fft(g: &Grid, data: &[Complex64], scale: f64) -> Vec<Complex64> {
    let n = g.points;
    let half = n / 2;
    let mut out = vec![Complex64::default(); data.len()];
    let sign = |k: usize| if (k + half).is_multiple_of(2) { 1.0 } else { -1.0 };
    match g.dim {
        1 => {
            for k in 0..n {
                let m = (k + half) % n;
                out[m] = data[k] * (scale * sign(k));
            }
        }
        _ => {
            for ka in 0..n {
                let a = (ka + half) % n;
                for kb in 0..n {
                    let b = (kb + half) % n;
                    out[a * n + b] = data[ka * n + kb] * (scale * sign(ka) * sign(kb));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(x: &[f64]) -> Complex64 {
        Complex64::new((-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp(), 0.0)
    }

    #[test]
    fn make_grid_spacings() {
        let g = Grid::new(1, 8, PI).unwrap();
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
        assert!((g.dxi() - 1.0).abs() < 1e-15);
        assert!((g.dx() * g.dxi() * 8.0 - 2.0 * PI).abs() < 1e-13);
        assert_eq!(Grid::new(2, 256, 20.0).unwrap().len(), 65536);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(Grid::new(1, 7, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(1, 8, -1.0).is_err());
        assert!(Grid::new(3, 8, 1.0).is_err());
    }

    #[test]
    fn sample_constant_and_zero() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let zero = Field::sample(g, |_| Complex64::default()).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.l2_norm(), 0.0);
        let one = Field::sample(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(one.samples().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!((one.l2_norm() - 6.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sample_reports_non_finite_index() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let err = Field::sample(g, |x| {
            if x[0] == g.axis_position(5) {
                Complex64::new(f64::NAN, 0.0)
            } else {
                Complex64::default()
            }
        })
        .unwrap_err();
        assert!(matches!(err, NlsError::NonFiniteSample { index: 5 }));
    }

    #[test]
    fn gaussian_norm_matches_analytic_integral() {
        let g = Grid::new(1, 1024, 20.0).unwrap();
        let u = Field::sample(g, gaussian).unwrap();
        assert!((u.l2_norm() - PI.powf(0.25)).abs() < 1e-8);
        let uh = u.fourier_transform().unwrap();
        assert!((uh.l2_norm() - PI.powf(0.25)).abs() < 1e-8);
    }

    #[test]
    fn gaussian_is_self_dual() {
        for dim in [1usize, 2] {
            let n = if dim == 1 { 1024 } else { 128 };
            let g = Grid::new(dim, n, 20.0).unwrap();
            let uh = Field::sample(g, gaussian).unwrap().to_frequency();
            let err = uh
                .samples()
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let k = g.frequency(i);
                    (z - gaussian(&k[..dim])).norm()
                })
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "dim {dim}: {err}");
        }
    }

    #[test]
    fn gaussian_transform_matches_quadrature() {
        // independent dense midpoint quadrature of the defining integral
        let g = Grid::new(1, 512, 20.0).unwrap();
        let uh = Field::sample(g, gaussian).unwrap().to_frequency();
        for &k in &[200usize, 250, 256, 260, 300] {
            let xi = g.axis_frequency(k);
            let m = 40_000;
            let h = 24.0 / m as f64;
            let mut acc = Complex64::default();
            for j in 0..m {
                let x = -12.0 + (j as f64 + 0.5) * h;
                acc += Complex64::from_polar((-x * x / 2.0).exp(), -x * xi) * h;
            }
            acc /= (2.0 * PI).sqrt();
            assert!((acc - uh.samples()[k]).norm() < 1e-8);
        }
    }

    #[test]
    fn shift_theorem_on_grid() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let a = 8.0 * g.dx();
        let u = Field::sample(g, gaussian).unwrap();
        let shifted = Field::sample(g, |x| gaussian(&[x[0] - a])).unwrap();
        let expect = u.to_frequency().map_indexed(|k, z| z * Complex64::from_polar(1.0, -a * k[0]));
        let diff = shifted.to_frequency().sub(&expect).unwrap();
        assert!(diff.l2_norm() < 1e-12);
    }

    #[test]
    fn fourier_modes_are_orthonormal() {
        let g = Grid::new(1, 64, PI).unwrap();
        let mode = |m: f64| Field::sample(g, move |x| Complex64::from_polar(1.0, m * x[0])).unwrap();
        let a = mode(3.0);
        let b = mode(5.0);
        assert!(a.inner(&b).unwrap().norm() < 1e-12);
        assert!((a.inner(&a).unwrap().re - a.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn wrong_representation_is_rejected() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let u = Field::zeros(g, Representation::Position);
        assert!(u.inverse_fourier_transform().is_err());
        assert!(u.to_frequency().fourier_transform().is_err());
    }

    #[test]
    fn container_round_trip() {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let u = Field::sample(g, |x| Complex64::new(x[0], x[1] * 2.0)).unwrap().to_frequency();
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"NLSF");
        assert_eq!(buf.len(), 4 + 4 + 4 + 4 + 8 + 4 + 64 * 16);
        let back = Field::read_from(&buf[..]).unwrap();
        assert_eq!(back, u);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Field::read_from(&bad[..]).is_err());
        assert!(Field::read_from(&buf[..buf.len() - 3]).is_err());
    }
}
