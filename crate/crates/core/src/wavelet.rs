//! Tensor-product wavelet systems on the torus, the admissibility sampler,
//! directional projections and their Littlewood-Paley pieces.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dwt::{self, band_positions};
use crate::dyadic::{decay_weight, Direction, DyadicCube};
use crate::error::{Error, Result};
use crate::filters::{Filter, FilterTable};
use crate::grid::{fft_in_place, DiscreteField, TorusGrid};
use crate::multipliers::{max_sectional_mean, riesz, riesz_inverse, CalderonPair, SECTIONAL_MEAN_TOL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Constants `(C, delta, alpha)` of the decay, Hoelder and sectional bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub c: f64,
    pub delta: f64,
    pub alpha: f64,
}

/// Periodized tensor-product wavelets `phi_Q^(eps)` with `<phi_Q, phi_Q> = |Q|`.
#[derive(Debug, Clone)]
pub struct WaveletSystem {
    grid: TorusGrid,
    filter: Filter,
    directions: Vec<Direction>,
    scales: (u32, u32),
    certificate: Certificate,
}

/// Lowest active scale of a projection.
pub const SCALE_MARGIN_COARSE: u32 = 2;
/// Number of finest scales left out of projections.
pub const SCALE_MARGIN_FINE: u32 = 3;

impl WaveletSystem {
    /// System over the active window `[2, J-3]`.
    pub fn new(filter: Filter, grid: TorusGrid, directions: &[Direction]) -> Result<Self> {
        let depth = grid.depth();
        if depth < SCALE_MARGIN_COARSE + SCALE_MARGIN_FINE {
            return Err(Error::DepthMargin(format!(
                "depth {depth} leaves no active scale; need J >= {}",
                SCALE_MARGIN_COARSE + SCALE_MARGIN_FINE
            )));
        }
        Self::with_scales(filter, grid, directions, SCALE_MARGIN_COARSE, depth - SCALE_MARGIN_FINE)
    }

    /// System over an explicit scale window `[lo, hi]`, `hi < J`.
    pub fn with_scales(filter: Filter, grid: TorusGrid, directions: &[Direction], lo: u32, hi: u32) -> Result<Self> {
        if lo > hi || hi >= grid.depth() {
            return Err(Error::DepthMargin(format!("scale window [{lo}, {hi}] invalid for depth {}", grid.depth())));
        }
        for d in directions {
            if d.dim() != grid.dim() {
                return Err(Error::InvalidDirection(format!("direction {d} on a {}-dimensional grid", grid.dim())));
            }
        }
        let mut dirs = directions.to_vec();
        dirs.sort_by_key(|d| d.mask());
        dirs.dedup_by_key(|d| d.mask());
        let mut sys = Self {
            grid,
            filter,
            directions: dirs,
            scales: (lo, hi),
            certificate: Certificate { c: 0.0, delta: 1.0, alpha: 0.0 },
        };
        sys.certificate.alpha = sys.filter.alpha_default();
        let reference = DyadicCube::from_ordinal(grid.dim(), lo, 0);
        let mut c: f64 = 0.0;
        for eps in Direction::all(grid.dim()) {
            let atom = sys.atom(&reference, &eps)?;
            c = c.max(decay_constant(&atom, &reference, sys.certificate.delta));
        }
        sys.certificate.c = c;
        Ok(sys)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.certificate.delta = delta;
        self
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn filter(&self) -> &Filter {
        &self.filter
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn has_direction(&self, eps: &Direction) -> bool {
        self.directions.iter().any(|d| d.mask() == eps.mask())
    }

    /// Active scale window (inclusive).
    pub fn scales(&self) -> (u32, u32) {
        self.scales
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    /// Compactly supported systems; every shipped filter is finite.
    pub fn is_compact(&self) -> bool {
        true
    }

    /// `phi_Q^(eps)` for any scale `0 <= j < J`.
    pub fn atom(&self, cube: &DyadicCube, eps: &Direction) -> Result<DiscreteField> {
        if cube.scale() >= self.grid.depth() {
            return Err(Error::ScaleOutOfRange { scale: cube.scale() as i64, lo: 0, hi: self.grid.depth() as i64 - 1 });
        }
        if cube.dim() != self.grid.dim() || eps.dim() != self.grid.dim() {
            return Err(Error::InvalidCube(format!("{cube} / {eps} on a {}-dimensional grid", self.grid.dim())));
        }
        let mut c = dwt::Coefficients::zeros(self.grid);
        c.set(cube, eps, Complex64::new(1.0, 0.0));
        Ok(c.synthesize(&self.filter))
    }

    pub fn analyze(&self, u: &DiscreteField) -> dwt::Coefficients {
        dwt::Coefficients::analyze(u, &self.filter)
    }

    pub fn synthesize(&self, c: &dwt::Coefficients) -> DiscreteField {
        c.synthesize(&self.filter)
    }

    fn active(&self, j: u32, mask: usize) -> bool {
        j >= self.scales.0 && j <= self.scales.1 && self.directions.iter().any(|d| d.mask() == mask)
    }

    /// Range of `l` for which `T_l` has at least one term.
    pub fn ell_range(&self, pair: &CalderonPair) -> (i64, i64) {
        let (m_lo, m_hi) = pair.scale_range();
        (m_lo - self.scales.1 as i64, m_hi - self.scales.0 as i64)
    }

    fn ell_scales(&self, pair: &CalderonPair, ell: i64) -> Result<Vec<u32>> {
        if pair.grid() != self.grid {
            return Err(Error::GridMismatch(format!("system on {}, pair on {}", self.grid, pair.grid())));
        }
        let (lo, hi) = self.ell_range(pair);
        if ell < lo || ell > hi {
            return Err(Error::ScaleOutOfRange { scale: ell, lo, hi });
        }
        let (m_lo, m_hi) = pair.scale_range();
        Ok((self.scales.0..=self.scales.1)
            .filter(|&j| (m_lo..=m_hi).contains(&(j as i64 + ell)))
            .collect())
    }

    /// Range of `m` for which `T_{l,m}` has at least one term.
    pub fn ell_m_range(&self, pair: &CalderonPair, ell: i64) -> Result<(i64, i64)> {
        let js = self.ell_scales(pair, ell)?;
        let top = self.grid.depth() as i64 - 1;
        let lo = js.iter().map(|&j| -(j as i64) - ell).min().unwrap_or(0);
        let hi = js.iter().map(|&j| top - j as i64 - ell).max().unwrap_or(0);
        Ok((lo, hi))
    }
}

/// Builds a system from the shipped filter table.
pub fn build_wavelet_system(filter: &str, grid: TorusGrid, directions: &[Direction]) -> Result<WaveletSystem> {
    let table = FilterTable::default();
    WaveletSystem::new(table.get(filter)?.clone(), grid, directions)
}

/// Keeps the bands of one direction (and the active scales) of a transform.
fn keep_band(grid: &TorusGrid, data: &mut [Complex64], keep: impl Fn(u32, usize) -> bool) {
    for (p, v) in data.iter_mut().enumerate() {
        match dwt::band_of(grid, p) {
            Some((j, m, _)) if keep(j, m) => {}
            _ => *v = ZERO,
        }
    }
}

/// `W^(eps) u`; zero when `eps` is not one of the system's directions.
pub fn wavelet_projection(sys: &WaveletSystem, u: &DiscreteField, eps: &Direction) -> Result<DiscreteField> {
    check_field(sys, u)?;
    let mask = eps.mask();
    let mut data = u.values().to_vec();
    dwt::forward(&sys.grid, &mut data, &sys.filter);
    keep_band(&sys.grid, &mut data, |j, m| m == mask && sys.active(j, m));
    dwt::inverse(&sys.grid, &mut data, &sys.filter);
    DiscreteField::from_values(sys.grid, data)
}

fn check_field(sys: &WaveletSystem, u: &DiscreteField) -> Result<()> {
    if u.grid() != sys.grid {
        return Err(Error::GridMismatch(format!("system on {}, field on {}", sys.grid, u.grid())));
    }
    Ok(())
}

/// Spectrum of `u` in FFT order.
fn spectrum(u: &DiscreteField) -> Vec<Complex64> {
    let mut s = u.values().to_vec();
    fft_in_place(u.grid(), &mut s, false);
    s
}

/// `ifft(table * spec)`.
fn filtered(grid: TorusGrid, spec: &[Complex64], table: &[f64]) -> Vec<Complex64> {
    let mut d: Vec<Complex64> = spec.iter().zip(table).map(|(c, &m)| c * m).collect();
    fft_in_place(grid, &mut d, true);
    d
}

/// Scatters the `(j, mask)` band of `src` (a transform stopped at scale `j`)
/// into `dst`.
fn copy_band(grid: &TorusGrid, src: &[Complex64], dst: &mut [Complex64], j: u32, mask: usize) {
    for p in band_positions(grid, j, mask) {
        dst[p] += src[p];
    }
}

/// `T_l u = sum_j W_j Delta_{j+l} u` over active scales.
pub fn t_ell(sys: &WaveletSystem, pair: &CalderonPair, u: &DiscreteField, ell: i64, eps: &Direction) -> Result<DiscreteField> {
    check_field(sys, u)?;
    let js = sys.ell_scales(pair, ell)?;
    let grid = sys.grid;
    let mut out = vec![ZERO; grid.len()];
    if sys.has_direction(eps) {
        let spec = spectrum(u);
        for j in js {
            let mut v = filtered(grid, &spec, pair.table(j as i64 + ell)?);
            dwt::forward_to(&grid, &mut v, &sys.filter, j);
            copy_band(&grid, &v, &mut out, j, eps.mask());
        }
    }
    dwt::inverse(&grid, &mut out, &sys.filter);
    DiscreteField::from_values(grid, out)
}

/// Adjoint `sum_j Delta_{j+l} W_j`.
pub fn t_ell_adjoint(
    sys: &WaveletSystem,
    pair: &CalderonPair,
    v: &DiscreteField,
    ell: i64,
    eps: &Direction,
) -> Result<DiscreteField> {
    check_field(sys, v)?;
    let js = sys.ell_scales(pair, ell)?;
    let grid = sys.grid;
    let mut acc = vec![ZERO; grid.len()];
    if sys.has_direction(eps) {
        let mut coeffs = v.values().to_vec();
        dwt::forward(&grid, &mut coeffs, &sys.filter);
        for j in js {
            let mut band = vec![ZERO; grid.len()];
            copy_band(&grid, &coeffs, &mut band, j, eps.mask());
            dwt::inverse(&grid, &mut band, &sys.filter);
            fft_in_place(grid, &mut band, false);
            for ((a, b), &m) in acc.iter_mut().zip(&band).zip(pair.table(j as i64 + ell)?) {
                *a += b * m;
            }
        }
    }
    fft_in_place(grid, &mut acc, true);
    DiscreteField::from_values(grid, acc)
}

/// Projection onto every detail band of scale `s` of `aux`.
fn aux_scale_projection(aux: &WaveletSystem, data: &mut [Complex64], s: u32) {
    let grid = aux.grid;
    dwt::forward_to(&grid, data, &aux.filter, s);
    let side = 1usize << (s + 1);
    let size = 1usize << s;
    for (p, v) in data.iter_mut().enumerate() {
        let c = grid.coords(p);
        let inside = c[..grid.dim()].iter().all(|&x| x < side);
        let detail = c[..grid.dim()].iter().any(|&x| x >= size);
        if !(inside && detail) {
            *v = ZERO;
        }
    }
    dwt::inverse_from(&grid, data, &aux.filter, s);
}

/// Auxiliary system used by `T_{l,m}`: every scale `0..J-1`, every direction.
pub fn auxiliary_system(table: &FilterTable, grid: TorusGrid, name: Option<&str>) -> Result<WaveletSystem> {
    let filter = match name {
        Some(n) => table.get(n)?.clone(),
        None => table
            .shortest_smooth()
            .ok_or_else(|| Error::UnknownFilter("no smooth filter in table".into()))?
            .clone(),
    };
    WaveletSystem::with_scales(filter, grid, &Direction::all(grid.dim()), 0, grid.depth() - 1)
}

/// `T_{l,m} u = sum_j W_j Delta_{j+l} Psi_{j+l+m} u`.
pub fn t_ell_m(
    sys: &WaveletSystem,
    aux: &WaveletSystem,
    pair: &CalderonPair,
    u: &DiscreteField,
    ell: i64,
    m: i64,
    eps: &Direction,
) -> Result<DiscreteField> {
    check_field(sys, u)?;
    let (lo, hi) = sys.ell_m_range(pair, ell)?;
    if m < lo || m > hi {
        return Err(Error::ScaleOutOfRange { scale: m, lo, hi });
    }
    let grid = sys.grid;
    let top = grid.depth() as i64 - 1;
    let mut out = vec![ZERO; grid.len()];
    if sys.has_direction(eps) {
        for j in sys.ell_scales(pair, ell)? {
            let s = j as i64 + ell + m;
            if s < 0 || s > top {
                continue;
            }
            let mut v = u.values().to_vec();
            aux_scale_projection(aux, &mut v, s as u32);
            fft_in_place(grid, &mut v, false);
            let mut w = filtered(grid, &v, pair.table(j as i64 + ell)?);
            dwt::forward_to(&grid, &mut w, &sys.filter, j);
            copy_band(&grid, &w, &mut out, j, eps.mask());
        }
    }
    dwt::inverse(&grid, &mut out, &sys.filter);
    DiscreteField::from_values(grid, out)
}

/// Adjoint of [`t_ell_m`].
pub fn t_ell_m_adjoint(
    sys: &WaveletSystem,
    aux: &WaveletSystem,
    pair: &CalderonPair,
    v: &DiscreteField,
    ell: i64,
    m: i64,
    eps: &Direction,
) -> Result<DiscreteField> {
    check_field(sys, v)?;
    let (lo, hi) = sys.ell_m_range(pair, ell)?;
    if m < lo || m > hi {
        return Err(Error::ScaleOutOfRange { scale: m, lo, hi });
    }
    let grid = sys.grid;
    let top = grid.depth() as i64 - 1;
    let mut acc = vec![ZERO; grid.len()];
    if sys.has_direction(eps) {
        let mut coeffs = v.values().to_vec();
        dwt::forward(&grid, &mut coeffs, &sys.filter);
        for j in sys.ell_scales(pair, ell)? {
            let s = j as i64 + ell + m;
            if s < 0 || s > top {
                continue;
            }
            let mut band = vec![ZERO; grid.len()];
            copy_band(&grid, &coeffs, &mut band, j, eps.mask());
            dwt::inverse(&grid, &mut band, &sys.filter);
            fft_in_place(grid, &mut band, false);
            let mut w = filtered(grid, &band, pair.table(j as i64 + ell)?);
            aux_scale_projection(aux, &mut w, s as u32);
            for (a, b) in acc.iter_mut().zip(&w) {
                *a += b;
            }
        }
    }
    DiscreteField::from_values(grid, acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    F,
    K,
}

/// `f_{Q,l}` or `k_Q^(l,i)` sampled on the grid.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub kind: KernelKind,
    pub cube: DyadicCube,
    pub direction: Direction,
    pub ell: i64,
    /// `(i, i0)` for `k` kernels.
    pub axes: Option<(usize, usize)>,
    pub values: DiscreteField,
}

/// `f_{Q,l} = Delta_{j+l} phi_Q^(eps)`.
pub fn kernel_f(sys: &WaveletSystem, pair: &CalderonPair, cube: &DyadicCube, ell: i64, eps: &Direction) -> Result<KernelField> {
    let m = cube.scale() as i64 + ell;
    let table = pair.table(m)?;
    let atom = sys.atom(cube, eps)?;
    let values = DiscreteField::from_values(sys.grid, filtered(sys.grid, &spectrum(&atom), table))?;
    Ok(KernelField { kind: KernelKind::F, cube: *cube, direction: *eps, ell, axes: None, values })
}

/// `k_Q^(l,i) = Delta_{j+l} E_{i0} d_i phi_Q^(eps)`.
pub fn kernel_k(
    sys: &WaveletSystem,
    pair: &CalderonPair,
    cube: &DyadicCube,
    ell: i64,
    axis: usize,
    i0: usize,
    eps: &Direction,
) -> Result<KernelField> {
    let grid = sys.grid;
    grid.check_axis(axis)?;
    grid.check_axis(i0)?;
    if axis == i0 {
        return Err(Error::InvalidArgument("kernel k needs i != i0".into()));
    }
    if !eps.is_set(i0) {
        return Err(Error::InvalidDirection(format!("eps_{} must be 1", i0 + 1)));
    }
    let m = cube.scale() as i64 + ell;
    let table = pair.table(m)?;
    let atom = sys.atom(cube, eps)?;
    let worst = max_sectional_mean(&atom, i0)?;
    if worst > SECTIONAL_MEAN_TOL * atom.max_abs().max(1.0) {
        return Err(Error::Domain(format!("atom has sectional mean {worst:e}")));
    }
    // E_{i0} d_i has the real multiplier k_i / k_{i0}.
    let mut spec = spectrum(&atom);
    for (p, c) in spec.iter_mut().enumerate() {
        let x = grid.coords(p);
        let (ki, k0) = (grid.frequency(x[axis]), grid.frequency(x[i0]));
        *c *= if k0 == 0 { 0.0 } else { ki as f64 / k0 as f64 * table[p] };
    }
    fft_in_place(grid, &mut spec, true);
    let values = DiscreteField::from_values(grid, spec)?;
    Ok(KernelField { kind: KernelKind::K, cube: *cube, direction: *eps, ell, axes: Some((axis, i0)), values })
}

/// Relative `L2` residual of the Riesz representation of `T_l R_{i0}^{-1} u`,
/// measured against the larger side but never below `1e-9 |R_{i0}^{-1} u|`.
///
/// With `R_i = -i k_i/|k|` and `R_{i0}^{-1} = i|k|/k_{i0}` the multipliers
/// satisfy `R_{i0} + sum_{i != i0} E_{i0} d_i R_i = -R_{i0}^{-1}`, so the
/// comparison is between `-T_l R_{i0}^{-1} u` and the right-hand side.
pub fn riesz_identity_check(
    sys: &WaveletSystem,
    pair: &CalderonPair,
    u: &DiscreteField,
    ell: i64,
    eps: &Direction,
    i0: usize,
) -> Result<f64> {
    let grid = sys.grid;
    grid.check_axis(i0)?;
    if !eps.is_set(i0) {
        return Err(Error::InvalidDirection(format!("eps_{} must be 1", i0 + 1)));
    }
    let inv = riesz_inverse(u, i0)?;
    let lhs = t_ell(sys, pair, &inv, ell, eps)?.scaled_real(-1.0);
    let mut rhs = t_ell(sys, pair, &riesz(u, i0)?, ell, eps)?;
    let kernel_terms = rhs_kernel_terms(sys, pair, u, ell, eps, i0)?;
    rhs = rhs.add(&kernel_terms);
    // floor the scale so that pieces at rounding level are not compared
    // relative to each other
    let scale = lhs.l2_norm().max(rhs.l2_norm()).max(1e-9 * inv.l2_norm());
    let diff = lhs.sub(&rhs).l2_norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// `sum_Q sum_{i != i0} <R_i u, k_Q^(l,i)> phi_Q / |Q|`, evaluated as
/// `T_l (sum_{i != i0} E_{i0} d_i R_i u)`.
pub fn rhs_kernel_terms(
    sys: &WaveletSystem,
    pair: &CalderonPair,
    u: &DiscreteField,
    ell: i64,
    eps: &Direction,
    i0: usize,
) -> Result<DiscreteField> {
    let grid = sys.grid;
    let n = grid.dim();
    let mut spec = spectrum(u);
    for (p, c) in spec.iter_mut().enumerate() {
        let x = grid.coords(p);
        let k: Vec<i64> = (0..n).map(|a| grid.frequency(x[a])).collect();
        let k0 = k[i0];
        let r = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        *c *= if k0 == 0 || r == 0.0 {
            ZERO
        } else {
            // E_{i0} d_i R_i has multiplier (k_i/k_{i0}) (-i k_i/|k|)
            let s: f64 = (0..n).filter(|&a| a != i0).map(|a| (k[a] * k[a]) as f64).sum();
            Complex64::new(0.0, -s / (k0 as f64 * r))
        };
    }
    fft_in_place(grid, &mut spec, true);
    t_ell(sys, pair, &DiscreteField::from_values(grid, spec)?, ell, eps)
}

/// Outcome of one sampled condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub pass: bool,
    /// Smallest constant that works on the samples.
    pub worst_ratio: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub filter: String,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub atoms: Vec<String>,
    pub decay: ConditionReport,
    pub holder: ConditionReport,
    pub sectional: ConditionReport,
    pub effective_alpha: f64,
    /// `log2 C_d` against `d` over the fine half, per sampled atom.
    pub holder_slopes: Vec<f64>,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.decay.pass && self.holder.pass && self.sectional.pass
    }
}

fn point_of(grid: &TorusGrid, p: usize) -> [f64; 3] {
    let c = grid.coords(p);
    let h = grid.mesh();
    [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
}

/// `max |f| / weight`.
fn decay_constant(f: &DiscreteField, q: &DyadicCube, delta: f64) -> f64 {
    let grid = f.grid();
    let n = grid.dim();
    f.values()
        .iter()
        .enumerate()
        .map(|(p, v)| v.norm() / decay_weight(&point_of(&grid, p)[..n], q, delta))
        .fold(0.0, f64::max)
}

/// `M_d = max_x |f(x) - f(x + 2^{-d} s e_a)| / weight(x)` for `d = 0..=D`.
fn increment_maxima(f: &DiscreteField, q: &DyadicCube, delta: f64) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.dim();
    let side = grid.side();
    let depth = grid.depth() - q.scale();
    let weights: Vec<f64> = (0..grid.len())
        .map(|p| decay_weight(&point_of(&grid, p)[..n], q, delta))
        .collect();
    (0..=depth)
        .map(|d| {
            let step = 1usize << (depth - d);
            let mut best = 0.0f64;
            for p in 0..grid.len() {
                let c = grid.coords(p);
                for a in 0..n {
                    let mut t = c;
                    t[a] = (c[a] + step) % side;
                    let other = f.values()[grid.flat(&t[..n])];
                    best = best.max((f.values()[p] - other).norm() / weights[p]);
                }
            }
            best
        })
        .collect()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Hoelder verdict for the increment maxima at exponent `alpha`:
/// `C_d = M_d 2^{d alpha}` must not grow over the fine half of the
/// separations and must stay within twice its coarse-half maximum.
fn holder_verdict(maxima: &[f64], alpha: f64) -> (bool, f64, f64) {
    let depth = maxima.len() - 1;
    let c: Vec<f64> = maxima.iter().enumerate().map(|(d, m)| m * (d as f64 * alpha).exp2()).collect();
    let half = depth / 2;
    let coarse = c[..=half].iter().cloned().fold(0.0, f64::max);
    let fine_pts: Vec<(f64, f64)> = c
        .iter()
        .enumerate()
        .skip(half + 1)
        .filter(|(_, v)| **v > 0.0)
        .map(|(d, v)| (d as f64, v.log2()))
        .collect();
    let fine = c[half + 1..].iter().cloned().fold(0.0, f64::max);
    let s = if fine_pts.len() >= 2 { slope(&fine_pts) } else { 0.0 };
    let worst = c.iter().cloned().fold(0.0, f64::max);
    (s <= 1e-9 && fine <= 2.0 * coarse, worst, s)
}

/// Samples conditions of decay, Hoelder regularity and sectional
/// oscillation on a few atoms per direction.
pub fn verify_admissibility(sys: &WaveletSystem, delta: f64, alpha: f64, seed: u64) -> Result<AdmissibilityReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} not in (0, 1]")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must be positive")));
    }
    let grid = sys.grid;
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = sys.scales;
    // Scales whose atoms fit inside the torus and leave at least four
    // dyadic separations below the cube side.
    let span = (sys.filter.len() - 1) as f64;
    let mut sampled: Vec<u32> = (lo..=hi)
        .filter(|&j| span * (-(j as f64)).exp2() <= 1.0 && grid.depth() >= j + 4)
        .take(3)
        .collect();
    if sampled.is_empty() {
        sampled.push(lo);
    }
    let lo = sampled[0];
    let mut atoms = Vec::new();
    for eps in &sys.directions {
        for &j in &sampled {
            let idx: Vec<u64> = (0..n).map(|_| rng.random_range(0..1u64 << j)).collect();
            let q = DyadicCube::new(j, &idx)?;
            if !atoms.contains(&(q, *eps)) {
                atoms.push((q, *eps));
            }
        }
    }

    // Per-scale constants: a uniform constant must not grow with the scale.
    let scale_count = atoms.iter().map(|(q, _)| q.scale() - lo + 1).max().unwrap_or(1) as usize;
    let mut decay_by_scale = vec![0.0f64; scale_count];
    let mut sect_by_scale = vec![0.0f64; scale_count];
    let (mut holder_c, mut holder_ok) = (0.0f64, true);
    let mut sect_int = 0.0f64;
    let mut slopes = Vec::new();
    let mut alpha_grid: Vec<(f64, bool)> = (1..=20).map(|k| (k as f64 * 0.05, true)).collect();
    for (q, eps) in &atoms {
        let atom = sys.atom(q, eps)?;
        let k = (q.scale() - lo) as usize;
        decay_by_scale[k] = decay_by_scale[k].max(decay_constant(&atom, q, delta));

        let maxima = increment_maxima(&atom, q, delta);
        let (ok, worst, s) = holder_verdict(&maxima, alpha);
        holder_c = holder_c.max(worst);
        holder_ok &= ok;
        slopes.push(s);
        for (a, pass) in alpha_grid.iter_mut() {
            *pass &= holder_verdict(&maxima, *a).0;
        }

        for axis in (0..n).filter(|&a| eps.is_set(a)) {
            let (c, integral) = sectional_profile(&atom, q, axis, delta);
            sect_by_scale[k] = sect_by_scale[k].max(c);
            sect_int = sect_int.max(integral);
        }
    }
    let uniform = |c: &[f64]| c[1..].iter().all(|&x| x <= 2.0 * c[0]);
    let decay_c = decay_by_scale.iter().cloned().fold(0.0, f64::max);
    let decay_ok = uniform(&decay_by_scale);
    let sect_c = sect_by_scale.iter().cloned().fold(0.0, f64::max);
    let sect_ok = uniform(&sect_by_scale) && sect_int <= 1e-9;
    let effective_alpha = alpha_grid.iter().filter(|(_, p)| *p).map(|(a, _)| *a).fold(0.0, f64::max);
    Ok(AdmissibilityReport {
        filter: sys.filter.name().to_string(),
        delta,
        alpha,
        seed,
        atoms: atoms.iter().map(|(q, e)| format!("{q}/{e}")).collect(),
        decay: ConditionReport {
            pass: decay_ok,
            worst_ratio: decay_c,
            detail: format!("per-scale constants {decay_by_scale:?}"),
        },
        holder: ConditionReport {
            pass: holder_ok,
            worst_ratio: holder_c,
            detail: "Hoelder quotient non-increasing over fine separations".into(),
        },
        sectional: ConditionReport {
            pass: sect_ok,
            worst_ratio: sect_c,
            detail: format!("per-scale constants {sect_by_scale:?}, max section integral {sect_int:e}"),
        },
        effective_alpha,
        holder_slopes: slopes,
    })
}

/// Antiderivative along `axis` started at the antipode of the cube centre,
/// returning `(max quotient, max |section integral|)`.
fn sectional_profile(f: &DiscreteField, q: &DyadicCube, axis: usize, delta: f64) -> (f64, f64) {
    let grid = f.grid();
    let n = grid.dim();
    let side = grid.side();
    let h = grid.mesh();
    let stride = grid.stride(axis);
    let start = (((q.center()[axis] + 0.5).rem_euclid(1.0)) * side as f64).floor() as usize % side;
    let mut anti = vec![ZERO; grid.len()];
    let mut worst_integral = 0.0f64;
    for p in 0..grid.len() {
        if grid.coords(p)[axis] != 0 {
            continue;
        }
        let mut acc = ZERO;
        for t in 0..side {
            let pos = (start + t) % side;
            acc += f.values()[p + pos * stride] * h;
            anti[p + pos * stride] = acc;
        }
        worst_integral = worst_integral.max(acc.norm());
    }
    let worst = anti
        .iter()
        .enumerate()
        .map(|(p, v)| v.norm() / (q.side() * decay_weight(&point_of(&grid, p)[..n], q, delta)))
        .fold(0.0, f64::max);
    (worst, worst_integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ifft, make_grid, SpectralField};

    fn dir(s: &str) -> Direction {
        s.parse().unwrap()
    }

    fn band_limited(grid: TorusGrid, radius: f64, seed: u64, avoid: Option<usize>) -> DiscreteField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.dim();
        let coeffs = grid
            .frequencies()
            .iter()
            .map(|k| {
                let r = k[..n].iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                if r == 0.0 || r > radius || avoid.is_some_and(|a| k[a] == 0) {
                    ZERO
                } else {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }
            })
            .collect();
        ifft(&SpectralField::from_coefficients(grid, coeffs).unwrap())
    }

    #[test]
    fn atoms_are_normalized_and_orthogonal() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut atoms = Vec::new();
        for _ in 0..10 {
            let j = rng.random_range(2..=3);
            let q = DyadicCube::new(j, &[rng.random_range(0..1 << j), rng.random_range(0..1 << j)]).unwrap();
            let e = Direction::from_mask(2, rng.random_range(1..4)).unwrap();
            atoms.push((q, e, sys.atom(&q, &e).unwrap()));
        }
        for (qa, ea, a) in &atoms {
            for (qb, eb, b) in &atoms {
                let expected = if qa == qb && ea == eb { qa.volume() } else { 0.0 };
                assert!((a.inner(b).re - expected).abs() < 1e-12);
            }
        }
        let again = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let (q, e, a) = &atoms[0];
        assert_eq!(again.atom(q, e).unwrap().values(), a.values());
    }

    #[test]
    fn haar_atom_matches_definition() {
        let g = make_grid(1, 5).unwrap();
        let sys = build_wavelet_system("haar", g, &[dir("1")]).unwrap();
        let a = sys.atom(&DyadicCube::root(1), &dir("1")).unwrap();
        for (i, v) in a.values().iter().enumerate() {
            assert!((v.re - if i < 16 { 1.0 } else { -1.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_margin_and_unknown_filter() {
        assert!(matches!(
            build_wavelet_system("db2", make_grid(1, 4).unwrap(), &[dir("1")]),
            Err(Error::DepthMargin(_))
        ));
        assert!(matches!(
            build_wavelet_system("sym9", make_grid(1, 8).unwrap(), &[dir("1")]),
            Err(Error::UnknownFilter(_))
        ));
    }

    #[test]
    fn projection_axioms() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db3", g, &Direction::all(2)).unwrap();
        let e = dir("10");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = crate::operator::random_field(g, &mut rng);
        let v = crate::operator::random_field(g, &mut rng);
        let wu = wavelet_projection(&sys, &u, &e).unwrap();
        let wv = wavelet_projection(&sys, &v, &e).unwrap();
        assert!(wavelet_projection(&sys, &wu, &e).unwrap().max_abs_distance(&wu) < 1e-9);
        assert!((wu.inner(&v) - u.inner(&wv)).norm() < 1e-9);
        let rest = u.sub(&wu);
        assert!((wu.l2_norm().powi(2) + rest.l2_norm().powi(2) - u.l2_norm().powi(2)).abs() < 1e-9);
        let q = DyadicCube::new(3, &[2, 5]).unwrap();
        let atom = sys.atom(&q, &e).unwrap();
        assert!(wavelet_projection(&sys, &atom, &e).unwrap().max_abs_distance(&atom) < 1e-9);
        assert!(wavelet_projection(&sys, &atom, &dir("11")).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn littlewood_paley_pieces_sum_to_projection() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let pair = CalderonPair::new(g).unwrap();
        let e = dir("01");
        let u = band_limited(g, 20.0, 3, None);
        let (lo, hi) = sys.ell_range(&pair);
        let mut sum = DiscreteField::zeros(g);
        for ell in lo..=hi {
            sum = sum.add(&t_ell(&sys, &pair, &u, ell, &e).unwrap());
        }
        let w = wavelet_projection(&sys, &u, &e).unwrap();
        assert!(sum.relative_l2_distance(&w) < 1e-7);
        assert!(matches!(t_ell(&sys, &pair, &u, hi + 1, &e), Err(Error::ScaleOutOfRange { .. })));
        assert!(t_ell(&sys, &pair, &DiscreteField::zeros(g), 0, &e).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn t_ell_adjoint_pairs() {
        let g = make_grid(2, 5).unwrap();
        let sys = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let aux = auxiliary_system(&FilterTable::default(), g, None).unwrap();
        let pair = CalderonPair::new(g).unwrap();
        let e = dir("11");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = crate::operator::random_field(g, &mut rng);
        let v = crate::operator::random_field(g, &mut rng);
        for ell in [-2, 0, 1] {
            let a = t_ell(&sys, &pair, &u, ell, &e).unwrap().inner(&v);
            let b = u.inner(&t_ell_adjoint(&sys, &pair, &v, ell, &e).unwrap());
            assert!((a - b).norm() < 1e-10);
            let m = 1;
            let a = t_ell_m(&sys, &aux, &pair, &u, ell, m, &e).unwrap().inner(&v);
            let b = u.inner(&t_ell_m_adjoint(&sys, &aux, &pair, &v, ell, m, &e).unwrap());
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn t_ell_m_sums_to_t_ell() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db3", g, &Direction::all(2)).unwrap();
        let aux = auxiliary_system(&FilterTable::default(), g, None).unwrap();
        let pair = CalderonPair::new(g).unwrap();
        let e = dir("10");
        let u = band_limited(g, 25.0, 7, None);
        for ell in [-1, 0, 2] {
            let (lo, hi) = sys.ell_m_range(&pair, ell).unwrap();
            let mut sum = DiscreteField::zeros(g);
            for m in lo..=hi {
                sum = sum.add(&t_ell_m(&sys, &aux, &pair, &u, ell, m, &e).unwrap());
            }
            let t = t_ell(&sys, &pair, &u, ell, &e).unwrap();
            assert!(sum.relative_l2_distance(&t) < 1e-7);
            assert!(t_ell_m(&sys, &aux, &pair, &u, ell, hi + 1, &e).is_err());
        }
    }

    #[test]
    fn kernels_have_zero_mean_and_resolve_the_atom() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let pair = CalderonPair::new(g).unwrap();
        let e = dir("10");
        let q = DyadicCube::new(3, &[1, 6]).unwrap();
        let u = band_limited(g, 30.0, 5, None);
        let atom = sys.atom(&q, &e).unwrap();
        let (m_lo, m_hi) = pair.scale_range();
        let mut total = Complex64::new(0.0, 0.0);
        for ell in m_lo - 3..=m_hi - 3 {
            let f = kernel_f(&sys, &pair, &q, ell, &e).unwrap();
            assert!(f.values.mean().norm() < 1e-12);
            total += u.inner(&f.values);
        }
        assert!((total - u.inner(&atom)).norm() < 1e-8 * u.l2_norm() * atom.l2_norm());
        let k = kernel_k(&sys, &pair, &q, 1, 1, 0, &e).unwrap();
        assert!(k.values.mean().norm() < 1e-9);
        assert!(kernel_k(&sys, &pair, &q, 1, 0, 0, &e).is_err());
        assert!(kernel_k(&sys, &pair, &q, 1, 0, 1, &e).is_err());
    }

    #[test]
    fn identity_check_small() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let pair = CalderonPair::new(g).unwrap();
        let e = dir("10").with_distinguished(0).unwrap();
        let u = band_limited(g, 20.0, 9, Some(0));
        for ell in 0..3 {
            let r = riesz_identity_check(&sys, &pair, &u, ell, &e, 0).unwrap();
            assert!(r < 1e-10, "{r}");
        }
        let bad = band_limited(g, 20.0, 9, None);
        assert!(matches!(riesz_identity_check(&sys, &pair, &bad, 0, &e, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn admissibility_haar_vs_smooth() {
        let g = make_grid(1, 11).unwrap();
        let haar = build_wavelet_system("haar", g, &[dir("1")]).unwrap();
        let rep = verify_admissibility(&haar, 1.0, 0.5, 0).unwrap();
        assert!(!rep.holder.pass);
        assert!(rep.decay.pass && rep.sectional.pass);
        assert_eq!(rep.effective_alpha, 0.0);
        let smooth = build_wavelet_system("db2", g, &[dir("1")]).unwrap();
        let low = verify_admissibility(&smooth, 1.0, 0.2, 0).unwrap();
        assert!(low.holder.pass && low.decay.pass && low.sectional.pass);
        assert!(!verify_admissibility(&smooth, 1.0, 1.0, 0).unwrap().holder.pass);
        assert!(verify_admissibility(&smooth, 1.0, 1.5, 0).is_err());
        for name in ["db2", "db3", "db4", "db6"] {
            let sys = build_wavelet_system(name, g, &[dir("1")]).unwrap();
            let rep = verify_admissibility(&sys, 1.0, sys.certificate().alpha, 3).unwrap();
            assert!(rep.decay.pass && rep.holder.pass && rep.sectional.pass, "{name}");
        }
    }
}
