//! Periodized isotropic discrete wavelet transform in 1, 2 or 3 dimensions.
//!
//! Coefficients live in the Mallat layout on the same `N^n` array as the
//! field: the detail band of scale `j` and direction mask `eps` occupies, on
//! every axis `a`, the range `[eps_a 2^j, eps_a 2^j + 2^j)`. The single
//! coefficient at the origin is the coarse mean (scaled by `N^{n/2}`).
//!
//! The transform is orthonormal on `l2` of the samples for every scale down to
//! `j = 0`, including scales where the filter wraps around the period.

use num_complex::Complex64;

use crate::dyadic::{Direction, DyadicCube};
use crate::filters::Filter;
use crate::grid::{DiscreteField, TorusGrid};

fn analysis_1d(filter: &Filter, line: &[Complex64], out: &mut [Complex64]) {
    let m = line.len();
    let half = m / 2;
    let (h, g) = (filter.lowpass(), filter.highpass());
    for k in 0..half {
        let mut a = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for t in 0..h.len() {
            let x = line[(2 * k + t) % m];
            a += x * h[t];
            d += x * g[t];
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn synthesis_1d(filter: &Filter, coeffs: &[Complex64], out: &mut [Complex64]) {
    let m = coeffs.len();
    let half = m / 2;
    let (h, g) = (filter.lowpass(), filter.highpass());
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for k in 0..half {
        let (a, d) = (coeffs[k], coeffs[half + k]);
        for t in 0..h.len() {
            out[(2 * k + t) % m] += a * h[t] + d * g[t];
        }
    }
}

/// Flat start indices of every line along `axis` inside the block `[0, m)^n`.
fn line_starts(grid: &TorusGrid, m: usize, axis: usize) -> Vec<usize> {
    let n = grid.dim();
    let others: Vec<usize> = (0..n).filter(|&a| a != axis).collect();
    let count = m.pow(others.len() as u32);
    let mut starts = Vec::with_capacity(count);
    let mut coords = [0usize; 3];
    for c in 0..count {
        let mut rem = c;
        for &a in others.iter().rev() {
            coords[a] = rem % m;
            rem /= m;
        }
        coords[axis] = 0;
        starts.push(grid.flat(&coords[..n]));
    }
    starts
}

fn level_pass(grid: &TorusGrid, data: &mut [Complex64], filter: &Filter, level: u32, inverse: bool) {
    let m = 1usize << level;
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let axes: Vec<usize> = if inverse { (0..grid.dim()).rev().collect() } else { (0..grid.dim()).collect() };
    for axis in axes {
        let stride = grid.stride(axis);
        for start in line_starts(grid, m, axis) {
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = data[start + t * stride];
            }
            if inverse {
                synthesis_1d(filter, &line, &mut out);
            } else {
                analysis_1d(filter, &line, &mut out);
            }
            for (t, v) in out.iter().enumerate() {
                data[start + t * stride] = *v;
            }
        }
    }
}

/// Full decomposition down to scale 0, in place.
pub fn forward(grid: &TorusGrid, data: &mut [Complex64], filter: &Filter) {
    forward_to(grid, data, filter, 0);
}

/// Full reconstruction from scale 0, in place.
pub fn inverse(grid: &TorusGrid, data: &mut [Complex64], filter: &Filter) {
    inverse_from(grid, data, filter, 0);
}

/// Decomposition stopped once the detail bands of scale `coarsest` exist;
/// the block `[0, 2^coarsest)^n` then holds approximation coefficients.
pub fn forward_to(grid: &TorusGrid, data: &mut [Complex64], filter: &Filter, coarsest: u32) {
    for level in (coarsest + 1..=grid.depth()).rev() {
        level_pass(grid, data, filter, level, false);
    }
}

/// Inverse of [`forward_to`].
pub fn inverse_from(grid: &TorusGrid, data: &mut [Complex64], filter: &Filter, coarsest: u32) {
    for level in coarsest + 1..=grid.depth() {
        level_pass(grid, data, filter, level, true);
    }
}

/// Band of a Mallat-layout position: `None` for the coarse mean, otherwise
/// `(scale, direction mask, cube ordinal)`.
pub fn band_of(grid: &TorusGrid, flat: usize) -> Option<(u32, usize, usize)> {
    let n = grid.dim();
    let c = grid.coords(flat);
    let top = c[..n].iter().copied().max().unwrap_or(0);
    if top == 0 {
        return None;
    }
    let j = usize::BITS - 1 - top.leading_zeros();
    let size = 1usize << j;
    let mut mask = 0usize;
    let mut ordinal = 0usize;
    for &ca in &c[..n] {
        let bit = (ca >= size) as usize;
        mask = (mask << 1) | bit;
        ordinal = (ordinal << j) | (ca - bit * size);
    }
    Some((j, mask, ordinal))
}

/// Flat position of the coefficient of `(Q, eps)`.
pub fn position(grid: &TorusGrid, cube: &DyadicCube, eps: &Direction) -> usize {
    let n = grid.dim();
    let size = 1usize << cube.scale();
    let mut c = [0usize; 3];
    for a in 0..n {
        c[a] = cube.index()[a] as usize + if eps.is_set(a) { size } else { 0 };
    }
    grid.flat(&c[..n])
}

/// Positions of the `(j, mask)` band in cube-ordinal order.
pub fn band_positions(grid: &TorusGrid, scale: u32, mask: usize) -> Vec<usize> {
    let n = grid.dim();
    let size = 1usize << scale;
    let count = 1usize << (scale as usize * n);
    (0..count)
        .map(|ord| {
            let mut c = [0usize; 3];
            for a in 0..n {
                let idx = (ord >> (scale as usize * (n - 1 - a))) & (size - 1);
                let bit = (mask >> (n - 1 - a)) & 1;
                c[a] = idx + bit * size;
            }
            grid.flat(&c[..n])
        })
        .collect()
}

/// Factor turning a discrete coefficient into `<u, phi_Q>/|Q|`:
/// `N^{-n/2} 2^{nj/2}`.
pub fn coefficient_scale(grid: &TorusGrid, scale: u32) -> f64 {
    let n = grid.dim() as f64;
    ((scale as f64 - grid.depth() as f64) * n / 2.0).exp2()
}

/// Wavelet coefficients of a field in Mallat layout, stored as the raw
/// orthonormal transform output. Accessors return the normalized value
/// `<u, phi_Q>/|Q|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    grid: TorusGrid,
    data: Vec<Complex64>,
}

impl Coefficients {
    pub fn analyze(u: &DiscreteField, filter: &Filter) -> Self {
        let grid = u.grid();
        let mut data = u.values().to_vec();
        forward(&grid, &mut data, filter);
        Self { grid, data }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn synthesize(&self, filter: &Filter) -> DiscreteField {
        let mut data = self.data.clone();
        inverse(&self.grid, &mut data, filter);
        DiscreteField::from_raw(self.grid, data)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn mean(&self) -> Complex64 {
        self.data[0] * coefficient_scale(&self.grid, 0)
    }

    /// `<u, phi_Q^(eps)> / |Q|`.
    pub fn get(&self, cube: &DyadicCube, eps: &Direction) -> Complex64 {
        self.data[position(&self.grid, cube, eps)] * coefficient_scale(&self.grid, cube.scale())
    }

    pub fn set(&mut self, cube: &DyadicCube, eps: &Direction, value: Complex64) {
        let p = position(&self.grid, cube, eps);
        self.data[p] = value / coefficient_scale(&self.grid, cube.scale());
    }

    /// Zeroes every band for which `keep(scale, mask)` is false; the mean
    /// counts as `keep(None)`.
    pub fn retain(&mut self, keep: impl Fn(Option<(u32, usize)>) -> bool) {
        for p in 0..self.data.len() {
            let band = band_of(&self.grid, p).map(|(j, m, _)| (j, m));
            if !keep(band) {
                self.data[p] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `(cube, direction, normalized coefficient)` in band order: scale,
    /// then mask, then cube ordinal. The mean is not included.
    pub fn iter(&self) -> impl Iterator<Item = (DyadicCube, Direction, Complex64)> + '_ {
        let n = self.grid.dim();
        (0..self.grid.depth()).flat_map(move |j| {
            (1..1usize << n).flat_map(move |mask| {
                let eps = Direction::from_mask(n, mask).expect("nonzero mask");
                let scale = coefficient_scale(&self.grid, j);
                band_positions(&self.grid, j, mask)
                    .into_iter()
                    .enumerate()
                    .map(move |(ord, p)| (DyadicCube::from_ordinal(n, j, ord), eps, self.data[p] * scale))
            })
        })
    }

    /// CSV with columns `j, i1..in, epsilon, re, im`; the mean is written as
    /// a row with `j = -1`, zero indices and an all-zero direction.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        let n = self.grid.dim();
        let idx: Vec<String> = (1..=n).map(|a| format!("i{a}")).collect();
        writeln!(w, "j,{},epsilon,re,im", idx.join(","))?;
        let m = self.mean();
        writeln!(w, "-1,{},{},{:e},{:e}", vec!["0"; n].join(","), "0".repeat(n), m.re, m.im)?;
        for (q, eps, c) in self.iter() {
            let ids: Vec<String> = q.index().iter().map(|i| i.to_string()).collect();
            writeln!(w, "{},{},{},{:e},{:e}", q.scale(), ids.join(","), eps, c.re, c.im)?;
        }
        Ok(())
    }
}
