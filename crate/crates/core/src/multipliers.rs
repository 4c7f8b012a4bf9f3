//! Fourier multipliers: Riesz transforms and their restricted inverse,
//! spectral derivatives, sectional integration and the Calderon blocks.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, apply_real_table, fft, DiscreteField, TorusGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative tolerance for spectral mass on a forbidden hyperplane.
pub const HYPERPLANE_TOL: f64 = 1e-12;
/// Absolute tolerance (scaled by `max(1, sup|u|)`) for sectional means.
pub const SECTIONAL_MEAN_TOL: f64 = 1e-10;

fn norm_k(k: &[i64]) -> f64 {
    k.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt()
}

/// Riesz multiplier `-i k_i / |k|`, zero at the origin.
pub fn riesz_symbol(k: &[i64], axis: usize) -> Complex64 {
    let r = norm_k(k);
    if r == 0.0 {
        ZERO
    } else {
        -I * (k[axis] as f64 / r)
    }
}

/// `R_i u`.
pub fn riesz(u: &DiscreteField, axis: usize) -> Result<DiscreteField> {
    u.grid().check_axis(axis)?;
    apply_multiplier(u, |k| riesz_symbol(k, axis))
}

/// Fraction of the spectral `l2` mass of `u` carried by `k_axis = 0`.
pub fn hyperplane_fraction(u: &DiscreteField, axis: usize) -> Result<f64> {
    let grid = u.grid();
    grid.check_axis(axis)?;
    let spec = fft(u);
    let (mut on, mut total) = (0.0, 0.0);
    for (pos, c) in spec.coefficients().iter().enumerate() {
        let w = c.norm_sqr();
        total += w;
        if grid.coords(pos)[axis] == 0 {
            on += w;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { (on / total).sqrt() })
}

/// Removes every Fourier mode with `k_axis = 0`.
pub fn remove_hyperplane(u: &DiscreteField, axis: usize) -> Result<DiscreteField> {
    u.grid().check_axis(axis)?;
    apply_multiplier(u, |k| if k[axis] == 0 { ZERO } else { Complex64::new(1.0, 0.0) })
}

/// Restricted inverse `R_{i0}^{-1}`: multiplier `+i |k| / k_{i0}`.
pub fn riesz_inverse(u: &DiscreteField, axis: usize) -> Result<DiscreteField> {
    let frac = hyperplane_fraction(u, axis)?;
    if frac > HYPERPLANE_TOL {
        return Err(Error::Domain(format!(
            "spectral mass {frac:e} on the hyperplane k_{} = 0",
            axis + 1
        )));
    }
    apply_multiplier(u, |k| if k[axis] == 0 { ZERO } else { I * (norm_k(k) / k[axis] as f64) })
}

/// `d/dx_i`: multiplier `2 pi i k_i`.
pub fn partial_derivative(u: &DiscreteField, axis: usize) -> Result<DiscreteField> {
    u.grid().check_axis(axis)?;
    apply_multiplier(u, |k| I * (2.0 * PI * k[axis] as f64))
}

/// Largest modulus of a mean of `u` along lines parallel to `axis`.
pub fn max_sectional_mean(u: &DiscreteField, axis: usize) -> Result<f64> {
    u.grid().check_axis(axis)?;
    let sections = apply_multiplier(u, |k| if k[axis] == 0 { Complex64::new(1.0, 0.0) } else { ZERO })?;
    Ok(sections.max_abs())
}

/// Periodic antiderivative in `x_{i0}`: multiplier `1 / (2 pi i k_{i0})`.
pub fn sectional_integral(u: &DiscreteField, axis: usize) -> Result<DiscreteField> {
    u.grid().check_axis(axis)?;
    let worst = max_sectional_mean(u, axis)?;
    if worst > SECTIONAL_MEAN_TOL * u.max_abs().max(1.0) {
        return Err(Error::Domain(format!("sectional mean {worst:e} along axis {}", axis + 1)));
    }
    apply_multiplier(u, |k| if k[axis] == 0 { ZERO } else { 1.0 / (I * (2.0 * PI * k[axis] as f64)) })
}

/// Log-scale bump `exp(-1/(1-t^2))` on `(-1, 1)`.
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Radial Calderon pair with `v = w`. The profile lives on
/// `|zeta| in (2^{-w}, 2^{w})`; the default width `w = 1` gives `[1/2, 2]`.
#[derive(Debug, Clone)]
pub struct CalderonPair {
    grid: TorusGrid,
    width: f64,
    m_min: i64,
    m_max: i64,
    tables: Vec<Vec<f64>>,
}

impl CalderonPair {
    pub fn new(grid: TorusGrid) -> Result<Self> {
        Self::with_width(grid, 1.0)
    }

    pub fn with_width(grid: TorusGrid, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("profile width {width}")));
        }
        let m_min = (-width).floor() as i64 + 1;
        let m_max = (grid.max_frequency().log2() + width).ceil() as i64 - 1;
        let probe = Self { grid, width, m_min, m_max, tables: Vec::new() };
        // Every nonzero grid radius must be covered by some band.
        let mut worst = f64::INFINITY;
        for k in grid.frequencies() {
            let r = norm_k(&k[..grid.dim()]);
            if r > 0.0 {
                worst = worst.min(probe.denominator(r.log2()));
            }
        }
        if worst < 1e-14 {
            return Err(Error::DegeneratePartition(worst));
        }
        let tables = (m_min..=m_max)
            .map(|m| {
                grid.frequencies()
                    .iter()
                    .map(|k| {
                        let r = norm_k(&k[..grid.dim()]);
                        if r == 0.0 {
                            0.0
                        } else {
                            probe.product_at_log(r.log2() - m as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { tables, ..probe })
    }

    fn profile(&self, s: f64) -> f64 {
        bump(s / self.width)
    }

    fn denominator(&self, s: f64) -> f64 {
        let lo = (s - self.width).floor() as i64;
        let hi = (s + self.width).ceil() as i64;
        (lo..=hi).map(|l| self.profile(s - l as f64).powi(2)).sum()
    }

    fn product_at_log(&self, s: f64) -> f64 {
        let b = self.profile(s);
        if b == 0.0 {
            return 0.0;
        }
        b * b / self.denominator(s)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Inclusive range of scales `m` for which `Delta_m` touches the grid.
    pub fn scale_range(&self) -> (i64, i64) {
        (self.m_min, self.m_max)
    }

    /// `v-hat(zeta)` for a frequency vector of any length.
    pub fn v_hat(&self, zeta: &[f64]) -> f64 {
        let r = zeta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let s = r.log2();
        let b = self.profile(s);
        if b == 0.0 {
            0.0
        } else {
            b / self.denominator(s).sqrt()
        }
    }

    /// `v-hat w-hat(zeta)`.
    pub fn product(&self, zeta: &[f64]) -> f64 {
        self.v_hat(zeta).powi(2)
    }

    /// `sum_l v-hat w-hat(2^l zeta)` over every band meeting `zeta`.
    pub fn partition_sum(&self, zeta: &[f64]) -> f64 {
        let r = zeta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let s = r.log2();
        let lo = (-s - self.width).floor() as i64;
        let hi = (-s + self.width).ceil() as i64;
        (lo..=hi).map(|l| self.product_at_log(s + l as f64)).sum()
    }

    pub fn check_scale(&self, m: i64) -> Result<()> {
        if m < self.m_min || m > self.m_max {
            return Err(Error::ScaleOutOfRange { scale: m, lo: self.m_min, hi: self.m_max });
        }
        Ok(())
    }

    /// Multiplier of `Delta_m` in FFT storage order.
    pub fn table(&self, m: i64) -> Result<&[f64]> {
        self.check_scale(m)?;
        Ok(&self.tables[(m - self.m_min) as usize])
    }
}

pub fn build_calderon_pair(grid: TorusGrid) -> Result<CalderonPair> {
    CalderonPair::new(grid)
}

/// `Delta_m u`: multiplier `v-hat w-hat(2^{-m} k)`.
pub fn lp_block(pair: &CalderonPair, u: &DiscreteField, m: i64) -> Result<DiscreteField> {
    if u.grid() != pair.grid() {
        return Err(Error::GridMismatch(format!("field on {}, pair on {}", u.grid(), pair.grid())));
    }
    Ok(apply_real_table(u, pair.table(m)?))
}
