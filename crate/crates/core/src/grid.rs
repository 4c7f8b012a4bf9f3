//! Periodic grid, field storage and the discrete Fourier transform.
//!
//! The unit torus `[0,1)^n` is sampled at `N = 2^J` points per axis. Fields
//! are stored row-major (last axis fastest). All integrals are Riemann sums
//! with cell measure `h^n`, so the constant field `1` has every `L^p` norm
//! equal to one.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Largest supported depth per dimension (index 0 is n = 1).
const MAX_DEPTH: [u32; 3] = [14, 10, 6];

/// Magic tag of the binary field format.
pub const FIELD_MAGIC: &[u8; 4] = b"RWL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct TorusGrid {
    n: usize,
    depth: u32,
}

impl TorusGrid {
    pub fn new(n: usize, depth: u32) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::UnsupportedGrid { n, depth, reason: "dimension must be 1, 2 or 3" });
        }
        if depth < 1 {
            return Err(Error::UnsupportedGrid { n, depth, reason: "depth must be at least 1" });
        }
        if depth > MAX_DEPTH[n - 1] {
            return Err(Error::UnsupportedGrid { n, depth, reason: "depth exceeds memory budget" });
        }
        Ok(Self { n, depth })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Samples per axis.
    #[inline]
    pub fn side(&self) -> usize {
        1 << self.depth
    }

    /// Total number of grid points.
    #[inline]
    pub fn len(&self) -> usize {
        1 << (self.depth as usize * self.n)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `h = 1/N`.
    #[inline]
    pub fn mesh(&self) -> f64 {
        1.0 / self.side() as f64
    }

    /// Measure of one grid cell, `h^n`.
    #[inline]
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Stride of `axis` in the flat row-major layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        1 << (self.depth as usize * (self.n - 1 - axis))
    }

    pub fn coords(&self, flat: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mask = self.side() - 1;
        for (a, slot) in c.iter_mut().enumerate().take(self.n) {
            *slot = (flat >> (self.depth as usize * (self.n - 1 - a))) & mask;
        }
        c
    }

    pub fn flat(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for &c in coords.iter().take(self.n) {
            idx = (idx << self.depth) | (c & (self.side() - 1));
        }
        idx
    }

    /// Signed frequency of an FFT position along one axis, in `[-N/2, N/2)`.
    #[inline]
    pub fn frequency(&self, position: usize) -> i64 {
        let side = self.side();
        if position < side / 2 {
            position as i64
        } else {
            position as i64 - side as i64
        }
    }

    /// FFT position of a signed frequency.
    #[inline]
    pub fn position(&self, k: i64) -> usize {
        k.rem_euclid(self.side() as i64) as usize
    }

    /// Frequency vector of every flat spectral index, in storage order.
    pub fn frequencies(&self) -> Vec<[i64; 3]> {
        (0..self.len())
            .map(|i| {
                let c = self.coords(i);
                let mut k = [0i64; 3];
                for a in 0..self.n {
                    k[a] = self.frequency(c[a]);
                }
                k
            })
            .collect()
    }

    /// Largest Euclidean frequency modulus on the grid, `sqrt(n) * N/2`.
    pub fn max_frequency(&self) -> f64 {
        (self.n as f64).sqrt() * (self.side() / 2) as f64
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.n {
            Err(Error::AxisOutOfRange { axis, n: self.n })
        } else {
            Ok(())
        }
    }
}

impl std::fmt::Display for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n={} J={} (N={})", self.n, self.depth, self.side())
    }
}

/// Complex field sampled on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl DiscreteField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: TorusGrid, c: Complex64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: values.len() });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: TorusGrid, values: &[f64]) -> Result<Self> {
        Self::from_values(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples `f` at the grid points `x = h * index`.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let h = grid.mesh();
        let n = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let c = grid.coords(i);
                let mut x = [0.0; 3];
                for a in 0..n {
                    x[a] = c[a] as f64 * h;
                }
                f(&x[..n])
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &DiscreteField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// `<u, v> = h^n * sum u conj(v)`.
    pub fn inner(&self, other: &DiscreteField) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell_measure()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_measure()).sqrt()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_measure()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> DiscreteField {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn scaled_real(&self, c: f64) -> DiscreteField {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &DiscreteField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &DiscreteField) -> DiscreteField {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &DiscreteField) -> DiscreteField {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// Relative L2 distance `||self - other|| / max(||other||, tiny)`.
    pub fn relative_l2_distance(&self, other: &DiscreteField) -> f64 {
        let diff = self.sub(other).l2_norm();
        let base = other.l2_norm().max(f64::MIN_POSITIVE);
        diff / base
    }

    pub fn max_abs_distance(&self, other: &DiscreteField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> DiscreteField {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn real_part(&self) -> DiscreteField {
        Self { grid: self.grid, values: self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect() }
    }

    /// Largest imaginary part in modulus.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Value at integer grid coordinates, wrapping periodically.
    pub fn at(&self, coords: &[i64]) -> Complex64 {
        let side = self.grid.side() as i64;
        let mut c = [0usize; 3];
        for a in 0..self.grid.dim() {
            c[a] = coords[a].rem_euclid(side) as usize;
        }
        self.values[self.grid.flat(&c[..self.grid.dim()])]
    }

    /// Encodes the field in the `RWL1` binary layout.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        w.write_all(FIELD_MAGIC).map_err(io)?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&self.grid.depth().to_le_bytes()).map_err(io)?;
        w.write_all(&0u32.to_le_bytes()).map_err(io)?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes()).map_err(io)?;
            w.write_all(&v.im.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 16 * self.values.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(io)?;
        if &header[..4] != FIELD_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let depth = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let grid = TorusGrid::new(n, depth)?;
        let mut buf = vec![0u8; 16 * grid.len()];
        r.read_exact(&mut buf).map_err(io)?;
        let values = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Self::from_values(grid, values)
    }
}

/// Fourier coefficients indexed by integer frequency, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_coefficients(grid: TorusGrid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: coefficients.len() });
        }
        Ok(Self { grid, coefficients })
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Coefficient at frequency `k` (wrapped onto the grid's frequency box).
    pub fn get(&self, k: &[i64]) -> Complex64 {
        let mut c = [0usize; 3];
        for a in 0..self.grid.dim() {
            c[a] = self.grid.position(k[a]);
        }
        self.coefficients[self.grid.flat(&c[..self.grid.dim()])]
    }

    /// l2 norm over frequencies (equals the field's L2 norm).
    pub fn l2_norm(&self) -> f64 {
        self.coefficients.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
                planner.plan_fft(len, dir)
            })
            .clone()
    })
}

/// In-place n-dimensional DFT normalized as Fourier-series coefficients:
/// forward is `h^n sum u(x) e^{-2 pi i k.x}`, inverse is the plain synthesis sum.
/// This makes `u -> fft(u)` an isometry from `L2(torus)` onto `l2(Z^n)`.
pub(crate) fn fft_in_place(grid: TorusGrid, data: &mut [Complex64], inverse: bool) {
    let side = grid.side();
    let n = grid.dim();
    let fft = plan(side, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    if n == 1 {
        fft.process_with_scratch(data, &mut scratch);
    } else {
        let mut line = vec![Complex64::new(0.0, 0.0); side];
        for axis in 0..n {
            let stride = grid.stride(axis);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(side) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            // Every line along `axis` starts at an index whose `axis` coordinate is zero.
            for start in 0..grid.len() {
                if !(start / stride).is_multiple_of(side) {
                    continue;
                }
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + t * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    data[start + t * stride] = *v;
                }
            }
        }
    }
    if !inverse {
        let scale = grid.cell_measure();
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

pub fn make_grid(n: usize, depth: u32) -> Result<TorusGrid> {
    TorusGrid::new(n, depth)
}

/// Forward transform (Fourier-series normalization).
pub fn fft(u: &DiscreteField) -> SpectralField {
    let mut data = u.values.clone();
    fft_in_place(u.grid, &mut data, false);
    SpectralField { grid: u.grid, coefficients: data }
}

/// Inverse transform.
pub fn ifft(spectrum: &SpectralField) -> DiscreteField {
    let mut data = spectrum.coefficients.clone();
    fft_in_place(spectrum.grid, &mut data, true);
    DiscreteField { grid: spectrum.grid, values: data }
}

/// Riemann-sum `L^p` norm `(h^n sum |u|^p)^(1/p)`.
pub fn lp_norm(u: &DiscreteField, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("lp_norm input"));
    }
    Ok(lp_norm_unchecked(u, p))
}

pub(crate) fn lp_norm_unchecked(u: &DiscreteField, p: f64) -> f64 {
    let scale = u.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    // Normalizing by the sup keeps |v/scale|^p away from overflow for large p.
    let s: f64 = u.values.iter().map(|v| (v.norm() / scale).powf(p)).sum();
    scale * (s * u.grid.cell_measure()).powf(1.0 / p)
}

/// `ifft(m(k) * fft(u)(k))` with `m` evaluated at every grid frequency.
pub fn apply_multiplier(u: &DiscreteField, m: impl Fn(&[i64]) -> Complex64) -> Result<DiscreteField> {
    let grid = u.grid;
    let n = grid.dim();
    let mut data = u.values.clone();
    fft_in_place(grid, &mut data, false);
    for (i, v) in data.iter_mut().enumerate() {
        let c = grid.coords(i);
        let mut k = [0i64; 3];
        for a in 0..n {
            k[a] = grid.frequency(c[a]);
        }
        let factor = m(&k[..n]);
        if !factor.re.is_finite() || !factor.im.is_finite() {
            return Err(Error::NonFinite("multiplier"));
        }
        *v *= factor;
    }
    fft_in_place(grid, &mut data, true);
    Ok(DiscreteField { grid, values: data })
}

/// Applies a precomputed real multiplier stored in FFT order.
pub(crate) fn apply_real_table(u: &DiscreteField, table: &[f64]) -> DiscreteField {
    debug_assert_eq!(table.len(), u.grid.len());
    let mut data = u.values.clone();
    fft_in_place(u.grid, &mut data, false);
    for (v, &m) in data.iter_mut().zip(table) {
        *v *= m;
    }
    fft_in_place(u.grid, &mut data, true);
    DiscreteField { grid: u.grid, values: data }
}
