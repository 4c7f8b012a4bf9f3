//! Empirical operator norms, exponent fits and the scans built on them.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{Direction, DyadicCube};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, DiscreteField, TorusGrid};
use crate::haar::{haar_projection, predecessor_adjoint, predecessor_rearrange, semenov_rearrange, KernelFamily};
use crate::multipliers::{remove_hyperplane, riesz, riesz_inverse, CalderonPair};
use crate::operator::{random_field, Domain, LinearOperatorHandle};
use crate::wavelet::{t_ell, t_ell_adjoint, t_ell_m, t_ell_m_adjoint, wavelet_projection, WaveletSystem};

/// Below this, a norm counts as zero.
pub const ZERO_NORM: f64 = 1e-13;

/// Independent per-task seed derived from a root seed.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PowerIteration,
    DenseDecomposition,
    GradientAscent,
    RandomProbe,
    StructuralZero,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::PowerIteration => "power-iteration",
            Method::DenseDecomposition => "dense-decomposition",
            Method::GradientAscent => "gradient-ascent",
            Method::RandomProbe => "random-probe",
            Method::StructuralZero => "structural-zero",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub p: f64,
    /// Best observed `|Au|_p / |u|_p`.
    pub lower: f64,
    /// Two-sided value, present only for dense decompositions.
    pub certified: Option<f64>,
    pub method: Method,
    pub probes: usize,
    /// False when the budget ran out before the tolerance was met.
    pub converged: bool,
}

impl NormEstimate {
    pub fn value(&self) -> f64 {
        self.certified.unwrap_or(self.lower)
    }

    fn structural_zero(p: f64) -> Self {
        Self { p, lower: 0.0, certified: Some(0.0), method: Method::StructuralZero, probes: 0, converged: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    /// Random starting fields.
    pub probes: usize,
    /// Best probes refined by ascent when `p != 2`.
    pub restarts: usize,
    /// Iteration cap for power iteration and ascent.
    pub iterations: usize,
    /// Relative tolerance on the iterated quantity.
    pub tolerance: f64,
    /// Largest field length handled by a dense decomposition.
    pub dense_limit: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { probes: 6, restarts: 3, iterations: 400, tolerance: 1e-6, dense_limit: 1024, seed: 0 }
    }
}

impl Budget {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn check(&self) -> Result<()> {
        if self.probes == 0 || self.iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("empty budget {self:?}")));
        }
        Ok(())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// Estimate of `|A|_{p -> p}` on the operator's domain.
pub fn op_norm(a: &LinearOperatorHandle, p: f64, budget: &Budget) -> Result<NormEstimate> {
    check_exponent(p)?;
    budget.check()?;
    a.check_linearity(2, budget.seed ^ 0x5eed)?;
    let grid = a.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let probe = a.domain().project(&random_field(grid, &mut rng));
    if a.apply(&probe)?.max_abs() == 0.0 && a.apply(&a.domain().project(&random_field(grid, &mut rng)))?.max_abs() == 0.0 {
        return Err(Error::DegenerateOperator(format!("{} vanishes on random probes", a.label())));
    }
    if p == 2.0 && grid.len() <= budget.dense_limit {
        dense_norm(a, &mut rng)
    } else if p == 2.0 {
        power_iteration(a, budget, &mut rng)
    } else {
        ascent(a, p, budget, &mut rng)
    }
}

fn ratio(a: &LinearOperatorHandle, x: &DiscreteField, p: f64) -> Result<(f64, DiscreteField)> {
    let y = a.apply(x)?;
    let den = lp_norm(x, p)?;
    if den == 0.0 {
        return Ok((0.0, y));
    }
    Ok((lp_norm(&y, p)? / den, y))
}

fn dense_norm(a: &LinearOperatorHandle, rng: &mut ChaCha8Rng) -> Result<NormEstimate> {
    let grid = a.grid();
    let d = grid.len();
    let columns: Vec<Vec<Complex64>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let mut e = DiscreteField::zeros(grid);
            e.values_mut()[k] = Complex64::new(1.0, 0.0);
            a.apply(&e).map(|c| c.into_values())
        })
        .collect::<Result<_>>()?;
    let m = DMatrix::from_fn(d, d, |i, j| columns[j][i]);
    let sigma = m.singular_values().max();
    // a dense power step gives the matching probe-side bound
    let mut x = nalgebra::DVector::from_iterator(d, random_field(grid, rng).into_values());
    let mut lower: f64 = 0.0;
    let mh = m.adjoint();
    for _ in 0..50 {
        let y = &m * &x;
        let nx = x.norm();
        if nx == 0.0 {
            break;
        }
        lower = lower.max(y.norm() / nx);
        x = &mh * y;
        let n = x.norm();
        if n == 0.0 {
            break;
        }
        x /= Complex64::new(n, 0.0);
    }
    Ok(NormEstimate {
        p: 2.0,
        lower: lower.min(sigma),
        certified: Some(sigma),
        method: Method::DenseDecomposition,
        probes: d,
        converged: true,
    })
}

fn power_iteration(a: &LinearOperatorHandle, budget: &Budget, rng: &mut ChaCha8Rng) -> Result<NormEstimate> {
    if !a.has_adjoint() {
        return Err(Error::MissingAdjoint(a.label().to_string()));
    }
    let x0 = a.domain().project(&random_field(a.grid(), rng));
    let mut x = x0.scaled_real(1.0 / x0.l2_norm());
    let mut best: f64 = 0.0;
    let mut converged = false;
    let mut steps = 0;
    for _ in 0..budget.iterations {
        steps += 1;
        let y = a.apply(&x)?;
        let lambda = y.l2_norm().powi(2);
        best = best.max(lambda.sqrt());
        let z = a.apply_adjoint(&y)?;
        // |A*A x - lambda x| bounds the distance from lambda to the spectrum
        let residual = z.sub(&x.scaled_real(lambda)).l2_norm();
        if residual <= budget.tolerance * lambda {
            converged = true;
            break;
        }
        let nz = z.l2_norm();
        if nz == 0.0 {
            break;
        }
        x = z.scaled_real(1.0 / nz);
    }
    Ok(NormEstimate { p: 2.0, lower: best, certified: None, method: Method::PowerIteration, probes: steps, converged })
}

/// `|v|^{q-2} v`, zero where `v` vanishes.
fn duality_map(v: &DiscreteField, q: f64) -> DiscreteField {
    let scale = v.max_abs();
    let mut out = v.clone();
    if scale == 0.0 {
        return out;
    }
    for z in out.values_mut() {
        let r = z.norm() / scale;
        *z = if r == 0.0 { Complex64::new(0.0, 0.0) } else { *z / scale * r.powf(q - 2.0) };
    }
    out
}

/// Starting fields for `p != 2`: white noise, indicators of random dyadic
/// cubes and random signs constant on the cubes of a random scale.
fn probe_field(grid: TorusGrid, index: usize, rng: &mut ChaCha8Rng) -> DiscreteField {
    let n = grid.dim();
    let depth = grid.depth();
    let one = Complex64::new(1.0, 0.0);
    match index % 3 {
        0 => random_field(grid, rng),
        1 => {
            let scale = rng.random_range(1..depth);
            let q = DyadicCube::from_ordinal(n, scale, rng.random_range(0..1usize << (n * scale as usize)));
            let values = (0..grid.len())
                .map(|p| if q.contains_point(&grid, &grid.coords(p)[..n]) { one } else { Complex64::new(0.0, 0.0) })
                .collect();
            DiscreteField::from_values(grid, values).expect("finite")
        }
        _ => {
            let scale = rng.random_range(1..=depth);
            let signs: Vec<f64> =
                (0..1usize << (n * scale as usize)).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let shift = depth - scale;
            let values = (0..grid.len())
                .map(|p| {
                    let c = grid.coords(p);
                    let ord = c[..n].iter().fold(0usize, |o, &x| (o << scale) | (x >> shift));
                    one * signs[ord]
                })
                .collect();
            DiscreteField::from_values(grid, values).expect("finite")
        }
    }
}

/// Random probes refined by the nonlinear power method for `p -> p` norms.
fn ascent(a: &LinearOperatorHandle, p: f64, budget: &Budget, rng: &mut ChaCha8Rng) -> Result<NormEstimate> {
    let grid = a.grid();
    let domain = a.domain();
    let mut starts = Vec::with_capacity(budget.probes);
    for i in 0..budget.probes {
        let x = domain.project(&probe_field(grid, i, rng));
        let (r, _) = ratio(a, &x, p)?;
        starts.push((r, x));
    }
    starts.sort_by(|u, v| v.0.total_cmp(&u.0));
    let probe_best = starts[0].0;
    let mut best = probe_best;
    let mut count = budget.probes;
    let mut converged = false;
    if a.has_adjoint() {
        let dual = p / (p - 1.0);
        for (r0, x0) in starts.into_iter().take(budget.restarts.max(1)) {
            let mut x = x0;
            let mut r = r0;
            for _ in 0..budget.iterations {
                count += 1;
                let y = a.apply(&x)?;
                let z = a.apply_adjoint(&duality_map(&y, p))?;
                let next = domain.project(&duality_map(&z, dual));
                let (rn, _) = ratio(a, &next, p)?;
                best = best.max(rn);
                let done = (rn - r).abs() <= budget.tolerance * rn.max(f64::MIN_POSITIVE);
                x = next;
                r = rn;
                if done {
                    converged = true;
                    break;
                }
            }
        }
    }
    let method = if best > probe_best { Method::GradientAscent } else { Method::RandomProbe };
    Ok(NormEstimate { p, lower: best, certified: None, method, probes: count, converged })
}

/// Least-squares line through `(x, log2 value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log2` units.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(_, v)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive(v));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(Fit { slope, intercept, residual, points: points.len() })
}

/// Least `M >= 0` with `ratio <= 2^M`.
pub fn threshold_from_ratio(ratio: f64) -> Result<u32> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::NonPositive(ratio));
    }
    let m = ratio.log2().ceil();
    // a ratio like 4(1 + 1e-16) should not push M past 2
    let m = if m > 0.0 && (ratio / (m - 1.0).exp2() - 1.0).abs() < 1e-12 { m - 1.0 } else { m };
    Ok(m.max(0.0) as u32)
}

/// `M` for `u`, with `|R_{i0}|_p` supplied by a grid estimate.
pub fn threshold_m(u: &DiscreteField, p: f64, i0: usize, riesz_norm: &NormEstimate) -> Result<u32> {
    check_exponent(p)?;
    let r = lp_norm(&riesz(u, i0)?, p)?;
    if r <= ZERO_NORM {
        return Err(Error::ZeroDenominator("|R u|_p"));
    }
    threshold_from_ratio(lp_norm(u, p)? * riesz_norm.value() / r)
}

/// Which directional projection is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projector {
    Wavelet,
    Haar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpConfig {
    pub p: f64,
    pub alpha: f64,
    pub i0: usize,
    #[serde(serialize_with = "crate::estimates::serialize_display")]
    pub eps: Direction,
    pub projector: Projector,
}

pub(crate) fn serialize_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl InterpConfig {
    pub fn new(p: f64, alpha: f64, i0: usize, eps: Direction, projector: Projector) -> Result<Self> {
        check_exponent(p)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("interpolation exponent {alpha} outside (0, 1]")));
        }
        check_distinguished(&eps, i0)?;
        Ok(Self { p, alpha, i0, eps, projector })
    }

    pub fn theta(&self) -> f64 {
        (1.0 / self.p).max(0.5)
    }
}

fn check_distinguished(eps: &Direction, i0: usize) -> Result<()> {
    if i0 >= eps.dim() || !eps.is_set(i0) {
        return Err(Error::InvalidDirection(format!("{eps} has no 1 at axis {}", i0 + 1)));
    }
    Ok(())
}

fn project(u: &DiscreteField, eps: &Direction, projector: Projector, sys: &WaveletSystem) -> Result<DiscreteField> {
    match projector {
        Projector::Wavelet => wavelet_projection(sys, u, eps),
        Projector::Haar => haar_projection(u, eps, 0..=u.grid().depth() - 1),
    }
}

/// `|Proj u|_p` over the interpolation denominator for `cfg`.
pub fn interp_ratio(u: &DiscreteField, cfg: &InterpConfig, sys: &WaveletSystem) -> Result<f64> {
    let nu = lp_norm(u, cfg.p)?;
    let nr = lp_norm(&riesz(u, cfg.i0)?, cfg.p)?;
    if nu <= ZERO_NORM {
        return Err(Error::ZeroDenominator("|u|_p"));
    }
    if nr <= ZERO_NORM {
        return Err(Error::ZeroDenominator("|R u|_p"));
    }
    let num = lp_norm(&project(u, &cfg.eps, cfg.projector, sys)?, cfg.p)?;
    let den = match cfg.projector {
        Projector::Wavelet if cfg.alpha == 1.0 => nr * (1.0 + (nu / nr).ln()),
        Projector::Wavelet => nu.powf(1.0 - cfg.alpha) * nr.powf(cfg.alpha),
        Projector::Haar => nu.powf(cfg.theta()) * nr.powf(1.0 - cfg.theta()),
    };
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator("interpolation denominator"));
    }
    Ok(num / den)
}

/// `|v|_p / |R_{i0} v|_p` for `v = Proj u`; `None` when `v` vanishes.
pub fn coercivity_check(
    u: &DiscreteField,
    eps: &Direction,
    i0: usize,
    p: f64,
    projector: Projector,
    sys: &WaveletSystem,
) -> Result<Option<f64>> {
    check_exponent(p)?;
    check_distinguished(eps, i0)?;
    let v = project(u, eps, projector, sys)?;
    let nv = lp_norm(&v, p)?;
    if nv <= ZERO_NORM * lp_norm(u, p)?.max(1.0) {
        return Ok(None);
    }
    let nr = lp_norm(&riesz(&v, i0)?, p)?;
    if nr <= ZERO_NORM {
        return Err(Error::ZeroDenominator("|R v|_p"));
    }
    Ok(Some(nv / nr))
}

/// Parameter swept by a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    Ell,
    M,
    Mu,
    Lambda,
}

impl fmt::Display for ScanAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanAxis::Ell => "ell",
            ScanAxis::M => "m",
            ScanAxis::Mu => "mu",
            ScanAxis::Lambda => "lambda",
        })
    }
}

/// Growth law against which the envelope constant is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Envelope {
    /// `2^{rate x}`.
    Exponential { rate: f64 },
    /// `2^{-|x|} |x|`.
    ExponentialLinear,
    /// `log(2 + |x|)`.
    Logarithmic,
    /// `x^{1/2} 2^{dim x}`.
    SqrtExponential { dim: usize },
}

impl Envelope {
    pub fn weight(&self, x: f64) -> f64 {
        match *self {
            Envelope::Exponential { rate } => (rate * x).exp2(),
            Envelope::ExponentialLinear => (-x.abs()).exp2() * x.abs(),
            Envelope::Logarithmic => (2.0 + x.abs()).ln(),
            Envelope::SqrtExponential { dim } => x.sqrt() * (dim as f64 * x).exp2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub value: i64,
    pub estimate: NormEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanMeta {
    pub n: usize,
    pub depth: u32,
    pub filter: String,
    pub seed: u64,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub label: String,
    pub axis: ScanAxis,
    pub p: f64,
    pub points: Vec<ScanPoint>,
    /// Parameter values used by the fit.
    pub fit_window: Vec<i64>,
    pub fit: Option<Fit>,
    pub envelope: Envelope,
    /// `max estimate / envelope` over nonzero points.
    pub c_fit: f64,
    pub meta: ScanMeta,
}

impl ScanReport {
    fn build(
        label: String,
        axis: ScanAxis,
        p: f64,
        points: Vec<ScanPoint>,
        fit_window: Vec<i64>,
        envelope: Envelope,
        meta: ScanMeta,
    ) -> Self {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .filter(|pt| fit_window.contains(&pt.value) && pt.estimate.value() > 0.0)
            .map(|pt| (pt.value as f64, pt.estimate.value()))
            .collect();
        let fit = fit_exponent(&pts).ok();
        let c_fit = points
            .iter()
            .filter(|pt| pt.estimate.value() > 0.0)
            .map(|pt| pt.estimate.value() / envelope.weight(pt.value as f64))
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max);
        Self { label, axis, p, points, fit_window, fit, envelope, c_fit, meta }
    }

    pub fn estimate_at(&self, value: i64) -> Option<&NormEstimate> {
        self.points.iter().find(|pt| pt.value == value).map(|pt| &pt.estimate)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        writeln!(w, "axis,value,p,estimate,method,probes,slope_fit,residual").map_err(io)?;
        let (slope, residual) = match &self.fit {
            Some(f) => (f.slope.to_string(), f.residual.to_string()),
            None => (String::new(), String::new()),
        };
        for pt in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.axis,
                pt.value,
                self.p,
                pt.estimate.value(),
                pt.estimate.method,
                pt.estimate.probes,
                slope,
                residual
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

fn meta(sys: &WaveletSystem, seed: u64) -> ScanMeta {
    let grid = sys.grid();
    ScanMeta {
        n: grid.dim(),
        depth: grid.depth(),
        filter: sys.filter().name().to_string(),
        seed,
        version: env!("CARGO_PKG_VERSION"),
    }
}

fn run_points<'a, F>(values: &[i64], budget: &Budget, p: f64, build: F) -> Result<Vec<ScanPoint>>
where
    F: Fn(i64) -> Option<LinearOperatorHandle<'a>> + Sync,
{
    values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let estimate = match build(value) {
                None => NormEstimate::structural_zero(p),
                Some(op) => op_norm(&op, p, &budget.with_seed(derive_seed(budget.seed, i as u64)))?,
            };
            Ok(ScanPoint { value, estimate })
        })
        .collect()
}

/// `T_l` handle, or `T_l R_{i0}^{-1}` on the restricted domain.
pub fn t_ell_operator<'a>(
    sys: &'a WaveletSystem,
    pair: &'a CalderonPair,
    ell: i64,
    eps: Direction,
    inverse: Option<usize>,
) -> LinearOperatorHandle<'a> {
    let grid = sys.grid();
    match inverse {
        None => LinearOperatorHandle::new(format!("T_{ell}"), grid, Domain::All, move |u| t_ell(sys, pair, u, ell, &eps))
            .with_adjoint(move |v| t_ell_adjoint(sys, pair, v, ell, &eps)),
        Some(i0) => LinearOperatorHandle::new(format!("T_{ell} R_{}^-1", i0 + 1), grid, Domain::NoHyperplane(i0), move |u| {
            t_ell(sys, pair, &riesz_inverse(u, i0)?, ell, &eps)
        })
        .with_adjoint(move |v| {
            // (R^-1)* has multiplier -i|k|/k_{i0}
            let w = remove_hyperplane(&t_ell_adjoint(sys, pair, v, ell, &eps)?, i0)?;
            Ok(riesz_inverse(&w, i0)?.scaled_real(-1.0))
        }),
    }
}

/// Norms of `T_l` (or `T_l R_{i0}^{-1}`) over `ells`. Values outside the
/// resolvable window are structural zeros; the fit drops them together
/// with the two window endpoints.
pub fn scan_t_ell(
    sys: &WaveletSystem,
    pair: &CalderonPair,
    eps: &Direction,
    p: f64,
    ells: &[i64],
    inverse: Option<usize>,
    budget: &Budget,
) -> Result<ScanReport> {
    if let Some(i0) = inverse {
        check_distinguished(eps, i0)?;
    }
    let (lo, hi) = sys.ell_range(pair);
    let points = run_points(ells, budget, p, |ell| {
        (lo..=hi).contains(&ell).then(|| t_ell_operator(sys, pair, ell, *eps, inverse))
    })?;
    let window = ells.iter().copied().filter(|&l| l > lo && l < hi).collect();
    let alpha = sys.certificate().alpha;
    let envelope = if ells.iter().all(|&l| l < 0) {
        Envelope::ExponentialLinear
    } else if inverse.is_some() {
        Envelope::Exponential { rate: 1.0 - alpha }
    } else {
        Envelope::Exponential { rate: -alpha }
    };
    let label = match inverse {
        None => format!("T_ell eps={eps}"),
        Some(i0) => format!("T_ell R_{}^-1 eps={eps}", i0 + 1),
    };
    Ok(ScanReport::build(label, ScanAxis::Ell, p, points, window, envelope, meta(sys, budget.seed)))
}

/// Norms of `T_{l,m}` over `ms` at fixed `l`.
#[allow(clippy::too_many_arguments)]
pub fn scan_t_ell_m(
    sys: &WaveletSystem,
    aux: &WaveletSystem,
    pair: &CalderonPair,
    eps: &Direction,
    p: f64,
    ell: i64,
    ms: &[i64],
    budget: &Budget,
) -> Result<ScanReport> {
    let (lo, hi) = sys.ell_m_range(pair, ell)?;
    let grid = sys.grid();
    let eps = *eps;
    let points = run_points(ms, budget, p, |m| {
        (lo..=hi).contains(&m).then(|| {
            LinearOperatorHandle::new(format!("T_{ell},{m}"), grid, Domain::All, move |u| {
                t_ell_m(sys, aux, pair, u, ell, m, &eps)
            })
            .with_adjoint(move |v| t_ell_m_adjoint(sys, aux, pair, v, ell, m, &eps))
        })
    })?;
    let window = ms.iter().copied().filter(|&m| m > lo && m < hi).collect();
    let envelope = Envelope::Exponential { rate: -1.0 };
    Ok(ScanReport::build(format!("T_ell,m ell={ell} eps={eps}"), ScanAxis::M, p, points, window, envelope, meta(sys, budget.seed)))
}

/// Norms of the Haar shifts `T_mu` (along the first axis) over `mus`.
pub fn scan_semenov(sys: &WaveletSystem, p: f64, mus: &[i64], budget: &Budget) -> Result<ScanReport> {
    let grid = sys.grid();
    let n = grid.dim();
    let shift = |mu: i64| {
        let mut v = vec![0; n];
        v[0] = mu;
        v
    };
    let points = run_points(mus, budget, p, |mu| {
        let (fwd, back) = (shift(mu), shift(-mu));
        Some(
            LinearOperatorHandle::new(format!("T_mu={mu}"), grid, Domain::All, move |u| semenov_rearrange(u, &fwd, None))
                .with_adjoint(move |v| semenov_rearrange(v, &back, None)),
        )
    })?;
    Ok(ScanReport::build(
        "semenov".into(),
        ScanAxis::Mu,
        p,
        points,
        mus.to_vec(),
        Envelope::Logarithmic,
        meta(sys, budget.seed),
    ))
}

/// Norms of the predecessor transfer with wavelet kernels over `lambdas`.
pub fn scan_predecessor(
    sys: &WaveletSystem,
    eps: &Direction,
    p: f64,
    lambdas: &[i64],
    budget: &Budget,
) -> Result<ScanReport> {
    let grid = sys.grid();
    let families = lambdas
        .iter()
        .map(|&l| {
            let l = u32::try_from(l).map_err(|_| Error::InvalidArgument(format!("depth {l} is negative")))?;
            KernelFamily::wavelets(sys, l, eps, derive_seed(budget.seed, 1000 + l as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let eps = *eps;
    let points = run_points(lambdas, budget, p, |l| {
        let fam = &families[lambdas.iter().position(|&x| x == l).expect("listed depth")];
        Some(
            LinearOperatorHandle::new(format!("S_lambda={l}"), grid, Domain::All, move |u| {
                predecessor_rearrange(u, fam, &eps, sys)
            })
            .with_adjoint(move |v| predecessor_adjoint(v, fam, &eps, sys)),
        )
    })?;
    Ok(ScanReport::build(
        format!("predecessor eps={eps}"),
        ScanAxis::Lambda,
        p,
        points,
        lambdas.to_vec(),
        Envelope::SqrtExponential { dim: grid.dim() },
        meta(sys, budget.seed),
    ))
}
