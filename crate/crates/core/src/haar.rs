//! The isotropic Haar system and the rearrangement operators built on
//! wavelet coefficients: Semenov shifts, block bases and predecessor
//! transfers.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dwt::{self, Coefficients};
use crate::dyadic::{
    canonical_split, cube_distance, cubes_at_scale, decay_weight, predecessor, translate, Direction, DyadicCube,
};
use crate::error::{Error, Result};
use crate::filters::{Filter, FilterTable};
use crate::grid::{DiscreteField, TorusGrid};
use crate::wavelet::{Certificate, WaveletSystem};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients `a_Q^(eps) = <u, h_Q^(eps)>/|Q|` for scales `0..J-1` plus
/// the mean.
pub type HaarCoefficients = Coefficients;

fn haar_filter() -> Filter {
    FilterTable::default().get("haar").expect("haar is shipped").clone()
}

/// `h_Q^(eps)`: `+1` on the left half of `Q` along every axis with
/// `eps_a = 1`, `-1` on the right half, products across axes.
pub fn haar_function(cube: &DyadicCube, eps: &Direction, grid: TorusGrid) -> Result<DiscreteField> {
    if cube.dim() != grid.dim() || eps.dim() != grid.dim() {
        return Err(Error::InvalidCube(format!("{cube} / {eps} on a {}-dimensional grid", grid.dim())));
    }
    if cube.scale() + 1 > grid.depth() {
        return Err(Error::ScaleOutOfRange { scale: cube.scale() as i64, lo: 0, hi: grid.depth() as i64 - 1 });
    }
    let n = grid.dim();
    let shift = grid.depth() - cube.scale();
    let values = (0..grid.len())
        .map(|p| {
            let c = grid.coords(p);
            if !cube.contains_point(&grid, &c[..n]) {
                return ZERO;
            }
            let mut sign = 1.0;
            for a in 0..n {
                let right = (c[a] >> (shift - 1)) & 1 == 1;
                if eps.is_set(a) && right {
                    sign = -sign;
                }
            }
            Complex64::new(sign, 0.0)
        })
        .collect();
    DiscreteField::from_values(grid, values)
}

pub fn haar_coefficients(u: &DiscreteField) -> HaarCoefficients {
    Coefficients::analyze(u, &haar_filter())
}

/// `mean + sum a_Q^(eps) h_Q^(eps)`.
pub fn haar_reconstruct(c: &HaarCoefficients) -> DiscreteField {
    c.synthesize(&haar_filter())
}

/// `P^(eps)` over the given scales.
pub fn haar_projection(u: &DiscreteField, eps: &Direction, scales: RangeInclusive<u32>) -> Result<DiscreteField> {
    let grid = u.grid();
    if *scales.end() >= grid.depth() {
        return Err(Error::ScaleOutOfRange { scale: *scales.end() as i64, lo: 0, hi: grid.depth() as i64 - 1 });
    }
    let mut c = haar_coefficients(u);
    let mask = eps.mask();
    c.retain(|band| matches!(band, Some((j, m)) if m == mask && scales.contains(&j)));
    Ok(haar_reconstruct(&c))
}

/// `(sum_{Q, eps} |a_Q^(eps)|^2 1_Q)^{1/2}`.
pub fn square_function(u: &DiscreteField) -> DiscreteField {
    let grid = u.grid();
    let n = grid.dim();
    let c = haar_coefficients(u);
    let depth = grid.depth();
    // per-scale energy of each cube, summed over directions
    let mut energy: Vec<Vec<f64>> = (0..depth).map(|j| vec![0.0; 1usize << (n * j as usize)]).collect();
    for (q, _, a) in c.iter() {
        energy[q.scale() as usize][q.ordinal()] += a.norm_sqr();
    }
    let values = (0..grid.len())
        .map(|p| {
            let x = grid.coords(p);
            let total: f64 = (0..depth)
                .map(|j| {
                    let shift = depth - j;
                    let ord = x[..n].iter().fold(0usize, |o, &xa| (o << j) | (xa >> shift));
                    energy[j as usize][ord]
                })
                .sum();
            Complex64::new(total.sqrt(), 0.0)
        })
        .collect();
    DiscreteField::from_raw(grid, values)
}

/// `T_mu: h_Q^(eps) -> h_{Q + mu s(Q)}^(eps)` on every Haar coefficient (or
/// only those of direction `eps`), leaving the mean in place.
pub fn semenov_rearrange(u: &DiscreteField, mu: &[i64], eps: Option<&Direction>) -> Result<DiscreteField> {
    let grid = u.grid();
    if mu.len() != grid.dim() {
        return Err(Error::InvalidArgument(format!("shift has {} entries on a {}-dimensional grid", mu.len(), grid.dim())));
    }
    let c = haar_coefficients(u);
    let mut out = c.clone();
    for (q, e, a) in c.iter() {
        if eps.is_some_and(|d| d.mask() != e.mask()) {
            continue;
        }
        out.set(&translate(&q, mu), &e, a);
    }
    Ok(haar_reconstruct(&out))
}

/// Coefficients `c_K(Q)` of a block basis, `Q` of scale `j`, `K` of scale
/// `j + k`, stored row-major by `(K ordinal, Q ordinal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCoefficients {
    dim: usize,
    scale: u32,
    offset: u32,
    values: Vec<Complex64>,
}

impl BlockCoefficients {
    pub fn new(dim: usize, scale: u32, offset: u32, values: Vec<Complex64>) -> Result<Self> {
        let nq = 1usize << (dim * scale as usize);
        let nk = 1usize << (dim * (scale + offset) as usize);
        if values.len() != nq * nk {
            return Err(Error::ShapeMismatch { expected: nq * nk, found: values.len() });
        }
        Ok(Self { dim, scale, offset, values })
    }

    pub fn from_fn(dim: usize, scale: u32, offset: u32, f: impl Fn(&DyadicCube, &DyadicCube) -> Complex64) -> Self {
        let qs: Vec<_> = (0..1usize << (dim * scale as usize)).map(|o| DyadicCube::from_ordinal(dim, scale, o)).collect();
        let ks = (0..1usize << (dim * (scale + offset) as usize)).map(|o| DyadicCube::from_ordinal(dim, scale + offset, o));
        let values = ks.flat_map(|k| qs.iter().map(|q| f(&k, q)).collect::<Vec<_>>()).collect();
        Self { dim, scale, offset, values }
    }

    /// Random coefficients of modulus at most the decay budget.
    pub fn random_admissible(dim: usize, scale: u32, offset: u32, delta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budget = |k: &DyadicCube, q: &DyadicCube| decay_budget(k, q, delta);
        let mut out = Self::from_fn(dim, scale, offset, |k, q| Complex64::new(budget(k, q), 0.0));
        for v in out.values.iter_mut() {
            *v *= rng.random_range(-1.0..1.0);
        }
        out
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    fn q_count(&self) -> usize {
        1usize << (self.dim * self.scale as usize)
    }

    pub fn get(&self, k: usize, q: usize) -> Complex64 {
        self.values[k * self.q_count() + q]
    }

    /// Fails with `CoefficientDecay` at the first entry above the budget.
    pub fn validate(&self, delta: f64) -> Result<()> {
        let nq = self.q_count();
        for (i, v) in self.values.iter().enumerate() {
            let k = DyadicCube::from_ordinal(self.dim, self.scale + self.offset, i / nq);
            let q = DyadicCube::from_ordinal(self.dim, self.scale, i % nq);
            let bound = decay_budget(&k, &q, delta);
            if v.norm() > bound * (1.0 + 1e-12) {
                return Err(Error::CoefficientDecay { q: q.to_string(), k: k.to_string(), value: v.norm(), bound });
            }
        }
        Ok(())
    }
}

/// `(1 + dist(K, Q)/s(Q))^{-n(1+delta)}`.
pub fn decay_budget(k: &DyadicCube, q: &DyadicCube, delta: f64) -> f64 {
    (1.0 + cube_distance(k, q) / q.side()).powf(-(q.dim() as f64) * (1.0 + delta))
}

fn check_block(sys: &WaveletSystem, aux: &WaveletSystem, c: &BlockCoefficients) -> Result<()> {
    if sys.grid() != aux.grid() {
        return Err(Error::GridMismatch("block basis systems on different grids".into()));
    }
    let top = c.scale + c.offset;
    if top >= sys.grid().depth() {
        return Err(Error::ScaleOutOfRange { scale: top as i64, lo: 0, hi: sys.grid().depth() as i64 - 1 });
    }
    Ok(())
}

/// `S_0 u = sum_{Q in S_j} <u, phi_Q> psi~_Q / |Q|` with
/// `psi~_Q = sum_{K in S_{j+k}} c_K(Q) psi_K^(eps)`.
pub fn block_basis_apply(
    u: &DiscreteField,
    c: &BlockCoefficients,
    delta: f64,
    eps: &Direction,
    sys: &WaveletSystem,
    aux: &WaveletSystem,
) -> Result<DiscreteField> {
    check_block(sys, aux, c)?;
    c.validate(delta)?;
    let n = sys.grid().dim();
    let coeffs = sys.analyze(u);
    let a: Vec<Complex64> =
        (0..c.q_count()).map(|o| coeffs.get(&DyadicCube::from_ordinal(n, c.scale, o), eps)).collect();
    let mut out = Coefficients::zeros(sys.grid());
    let fine = c.scale + c.offset;
    for ko in 0..1usize << (n * fine as usize) {
        let b: Complex64 = a.iter().enumerate().map(|(qo, aq)| c.get(ko, qo) * aq).sum();
        out.set(&DyadicCube::from_ordinal(n, fine, ko), eps, b);
    }
    Ok(aux.synthesize(&out))
}

/// Adjoint of [`block_basis_apply`].
pub fn block_basis_adjoint(
    v: &DiscreteField,
    c: &BlockCoefficients,
    delta: f64,
    eps: &Direction,
    sys: &WaveletSystem,
    aux: &WaveletSystem,
) -> Result<DiscreteField> {
    check_block(sys, aux, c)?;
    c.validate(delta)?;
    let n = sys.grid().dim();
    let fine = c.scale + c.offset;
    let coeffs = aux.analyze(v);
    let beta: Vec<Complex64> =
        (0..1usize << (n * fine as usize)).map(|o| coeffs.get(&DyadicCube::from_ordinal(n, fine, o), eps)).collect();
    let ratio = (-((n * c.offset as usize) as f64)).exp2();
    let mut out = Coefficients::zeros(sys.grid());
    for qo in 0..c.q_count() {
        let a: Complex64 = beta.iter().enumerate().map(|(ko, b)| c.get(ko, qo).conj() * b).sum::<Complex64>() * ratio;
        out.set(&DyadicCube::from_ordinal(n, c.scale, qo), eps, a);
    }
    Ok(sys.synthesize(&out))
}

#[derive(Debug, Clone)]
enum Members<'a> {
    Wavelets(&'a WaveletSystem),
    Explicit(HashMap<(usize, DyadicCube), DiscreteField>),
    Zero,
}

/// Kernels `F_W^(k)` indexed by branch and cube, with a certificate
/// `(C, delta, alpha)` for their decay and Hoelder bounds.
#[derive(Debug, Clone)]
pub struct KernelFamily<'a> {
    members: Members<'a>,
    certificate: Certificate,
    lambda: u32,
}

/// Slack allowed between sampled quotients and the certificate.
pub const CERTIFICATE_SLACK: f64 = 2.0;
/// Points sampled per member during validation.
pub const CERTIFICATE_SAMPLES: usize = 10_000;

impl<'a> KernelFamily<'a> {
    /// `F_W^(k) = phi_W^(eps)` for every branch, with a measured certificate.
    pub fn wavelets(sys: &'a WaveletSystem, lambda: u32, eps: &Direction, seed: u64) -> Result<Self> {
        let grid = sys.grid();
        let (lo, hi) = sys.scales();
        let delta = sys.certificate().delta;
        let alpha = sys.certificate().alpha;
        let mut c: f64 = 0.0;
        for j in lo.saturating_sub(lambda)..=hi.saturating_sub(lambda) {
            if j + lambda < lo {
                continue;
            }
            let w = DyadicCube::from_ordinal(grid.dim(), j, 0);
            c = c.max(member_quotient(&sys.atom(&w, eps)?, &w, delta, alpha, None));
        }
        let family = Self { members: Members::Wavelets(sys), certificate: Certificate { c, delta, alpha }, lambda };
        family.validate(sys, eps, seed)?;
        Ok(family)
    }

    /// Explicit members, validated against `certificate`.
    pub fn explicit(
        members: HashMap<(usize, DyadicCube), DiscreteField>,
        certificate: Certificate,
        lambda: u32,
        sys: &WaveletSystem,
        eps: &Direction,
        seed: u64,
    ) -> Result<Self> {
        let family = Self { members: Members::Explicit(members), certificate, lambda };
        family.validate(sys, eps, seed)?;
        Ok(family)
    }

    pub fn zero(lambda: u32) -> Self {
        Self { members: Members::Zero, certificate: Certificate { c: 0.0, delta: 1.0, alpha: 1.0 }, lambda }
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    fn member(&self, branch: usize, w: &DyadicCube, eps: &Direction) -> Result<Option<DiscreteField>> {
        match &self.members {
            Members::Wavelets(sys) => Ok(Some(sys.atom(w, eps)?)),
            Members::Explicit(map) => map
                .get(&(branch, *w))
                .cloned()
                .map(Some)
                .ok_or_else(|| Error::InvalidArgument(format!("kernel family has no member for branch {branch}, cube {w}"))),
            Members::Zero => Ok(None),
        }
    }

    /// Every `(branch, W)` used by the transfer onto `sys`.
    fn used(&self, sys: &WaveletSystem) -> Vec<(DyadicCube, usize, DyadicCube)> {
        let split = canonical_split(sys.grid().dim(), self.lambda);
        let (lo, hi) = sys.scales();
        let mut out = Vec::new();
        for j in lo.max(self.lambda)..=hi {
            for q in cubes_at_scale(&sys.grid(), j).expect("scale below depth") {
                let branch = split.branch_of(&q).expect("scale at least lambda");
                out.push((q, branch, predecessor(&q, self.lambda).expect("scale at least lambda")));
            }
        }
        out
    }

    fn validate(&self, sys: &WaveletSystem, eps: &Direction, seed: u64) -> Result<()> {
        let cert = self.certificate;
        if !(cert.c.is_finite() && cert.c >= 0.0 && cert.delta > 0.0 && cert.alpha >= 0.0 && cert.alpha <= 1.0) {
            return Err(Error::InvalidCertificate(format!("malformed certificate {cert:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let used = self.used(sys);
        let picks: Vec<_> = match self.members {
            Members::Explicit(_) => used.iter().filter(|(_, b, w)| seen.insert((*b, *w))).cloned().collect(),
            _ => (0..8.min(used.len())).map(|_| used[rng.random_range(0..used.len())]).collect(),
        };
        for (_, branch, w) in picks {
            let Some(f) = self.member(branch, &w, eps)? else { continue };
            if f.grid() != sys.grid() {
                return Err(Error::GridMismatch(format!("kernel on {}, system on {}", f.grid(), sys.grid())));
            }
            let mean = f.mean().norm();
            if mean > 1e-9 {
                return Err(Error::InvalidCertificate(format!("member {w} (branch {branch}) has mean {mean:e}")));
            }
            let q = member_quotient(&f, &w, cert.delta, cert.alpha, Some(&mut rng));
            if q > CERTIFICATE_SLACK * cert.c {
                return Err(Error::InvalidCertificate(format!(
                    "member {w} (branch {branch}) needs constant {q:e} > {} x {:e}",
                    CERTIFICATE_SLACK, cert.c
                )));
            }
        }
        Ok(())
    }
}

/// Largest of the sampled decay and Hoelder quotients of one member.
fn member_quotient(f: &DiscreteField, w: &DyadicCube, delta: f64, alpha: f64, rng: Option<&mut ChaCha8Rng>) -> f64 {
    let grid = f.grid();
    let n = grid.dim();
    let h = grid.mesh();
    let side = grid.side();
    let points: Vec<usize> = match rng {
        Some(r) if grid.len() > CERTIFICATE_SAMPLES => (0..CERTIFICATE_SAMPLES).map(|_| r.random_range(0..grid.len())).collect(),
        _ => (0..grid.len()).collect(),
    };
    let max_step = ((w.side() / h) as usize).max(1);
    let mut worst: f64 = 0.0;
    for p in points {
        let c = grid.coords(p);
        let mut x = [0.0; 3];
        for a in 0..n {
            x[a] = c[a] as f64 * h;
        }
        let weight = decay_weight(&x[..n], w, delta);
        let v = f.values()[p];
        worst = worst.max(v.norm() / weight);
        let mut step = 1;
        while step <= max_step {
            for a in 0..n {
                let mut t = c;
                t[a] = (c[a] + step) % side;
                let diff = (v - f.values()[grid.flat(&t[..n])]).norm();
                let scale = (step as f64 * h / w.side()).powf(alpha);
                worst = worst.max(diff / (scale * weight));
            }
            step *= 2;
        }
    }
    worst
}

/// `S g = sum_k sum_{Q in branch k} <g, F_{tau(Q)}^(k)> phi_Q^(eps) / |Q|`
/// over the active scales of `sys` that admit a `lambda`-th predecessor.
pub fn predecessor_rearrange(
    g: &DiscreteField,
    family: &KernelFamily,
    eps: &Direction,
    sys: &WaveletSystem,
) -> Result<DiscreteField> {
    let grid = sys.grid();
    if g.grid() != grid {
        return Err(Error::GridMismatch(format!("field on {}, system on {}", g.grid(), grid)));
    }
    let mut out = Coefficients::zeros(grid);
    let growth = ((grid.dim() * family.lambda as usize) as f64).exp2();
    match &family.members {
        Members::Zero => {}
        Members::Wavelets(src) => {
            let c = src.analyze(g);
            for (q, _, w) in family.used(sys) {
                // <g, phi_W>/|Q| = (<g, phi_W>/|W|) 2^{n lambda}
                out.set(&q, eps, c.get(&w, eps) * growth);
            }
        }
        Members::Explicit(_) => {
            for (q, branch, w) in family.used(sys) {
                if let Some(f) = family.member(branch, &w, eps)? {
                    out.set(&q, eps, g.inner(&f) / q.volume());
                }
            }
        }
    }
    Ok(sys.synthesize(&out))
}

/// Adjoint of [`predecessor_rearrange`]:
/// `S* h = sum_Q <h, phi_Q>/|Q| F_{tau(Q)}`.
pub fn predecessor_adjoint(
    h: &DiscreteField,
    family: &KernelFamily,
    eps: &Direction,
    sys: &WaveletSystem,
) -> Result<DiscreteField> {
    let grid = sys.grid();
    if h.grid() != grid {
        return Err(Error::GridMismatch(format!("field on {}, system on {}", h.grid(), grid)));
    }
    let c = sys.analyze(h);
    match &family.members {
        Members::Zero => Ok(DiscreteField::zeros(grid)),
        Members::Wavelets(src) => {
            let mut acc: HashMap<DyadicCube, Complex64> = HashMap::new();
            for (q, _, w) in family.used(sys) {
                *acc.entry(w).or_insert(ZERO) += c.get(&q, eps);
            }
            let mut out = Coefficients::zeros(grid);
            for (w, a) in acc {
                out.set(&w, eps, a);
            }
            Ok(src.synthesize(&out))
        }
        Members::Explicit(_) => {
            let mut out = DiscreteField::zeros(grid);
            for (q, branch, w) in family.used(sys) {
                if let Some(f) = family.member(branch, &w, eps)? {
                    out.add_scaled(c.get(&q, eps), &f);
                }
            }
            Ok(out)
        }
    }
}

/// Positions of the Haar bands kept by `P^(eps)` over `scales`.
pub fn haar_band_count(grid: &TorusGrid, scales: RangeInclusive<u32>) -> usize {
    scales.map(|j| dwt::band_positions(grid, j, 1).len()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::operator::random_field;
    use crate::wavelet::{build_wavelet_system, wavelet_projection};

    fn dir(s: &str) -> Direction {
        s.parse().unwrap()
    }

    #[test]
    fn haar_function_examples() {
        let g = make_grid(1, 4).unwrap();
        let h = haar_function(&DyadicCube::root(1), &dir("1"), g).unwrap();
        for (i, v) in h.values().iter().enumerate() {
            assert_eq!(v.re, if i < 8 { 1.0 } else { -1.0 });
        }
        let g2 = make_grid(2, 5).unwrap();
        let q = DyadicCube::new(2, &[1, 3]).unwrap();
        let h = haar_function(&q, &dir("11"), g2).unwrap();
        assert!((h.inner(&h).re - q.volume()).abs() < 1e-12);
        assert!(h.mean().norm() < 1e-15);
        let h = haar_function(&DyadicCube::root(2), &dir("10"), g2).unwrap();
        // constant along x2, sign change in x1 only
        for p in 0..g2.len() {
            let c = g2.coords(p);
            assert_eq!(h.values()[p].re, if c[0] < 16 { 1.0 } else { -1.0 });
        }
        assert!(haar_function(&DyadicCube::new(5, &[0, 0]).unwrap(), &dir("10"), g2).is_err());
    }

    #[test]
    fn dwt_haar_atoms_agree_with_direct_construction() {
        let g = make_grid(2, 4).unwrap();
        let sys = WaveletSystem::with_scales(haar_filter(), g, &Direction::all(2), 0, 3).unwrap();
        for j in 0..4 {
            for eps in Direction::all(2) {
                let q = DyadicCube::from_ordinal(2, j, (3 * j as usize + eps.mask()) % (1 << (2 * j)));
                let a = sys.atom(&q, &eps).unwrap();
                let b = haar_function(&q, &eps, g).unwrap();
                assert!(a.max_abs_distance(&b) < 1e-12);
            }
        }
    }

    #[test]
    fn coefficients_reconstruct_and_dump() {
        let g = make_grid(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(g, &mut rng);
        let c = haar_coefficients(&u);
        assert!(haar_reconstruct(&c).relative_l2_distance(&u) < 1e-12);
        let q = DyadicCube::new(3, &[2, 7]).unwrap();
        let e = dir("01");
        let direct = u.inner(&haar_function(&q, &e, g).unwrap()) / q.volume();
        assert!((c.get(&q, &e) - direct).norm() < 1e-12);
        assert!((c.mean() - u.mean()).norm() < 1e-12);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("j,i1,i2,epsilon,re,im"));
        assert_eq!(text.lines().count(), 1 + g.len());
        assert!(text.contains("\n3,2,7,01,"));
    }

    #[test]
    fn projection_properties() {
        let g = make_grid(2, 5).unwrap();
        let e = dir("11");
        let q = DyadicCube::new(2, &[3, 0]).unwrap();
        let h = haar_function(&q, &e, g).unwrap();
        assert!(haar_projection(&h, &e, 0..=4).unwrap().max_abs_distance(&h) < 1e-12);
        assert!(haar_projection(&h, &dir("10"), 0..=4).unwrap().max_abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(g, &mut rng);
        let p = haar_projection(&u, &e, 1..=3).unwrap();
        assert!(p.inner(&u.sub(&p)).norm() < 1e-10);
        assert!(haar_projection(&p, &e, 1..=3).unwrap().max_abs_distance(&p) < 1e-12);
        assert!(p.l2_norm() <= u.l2_norm());
    }

    #[test]
    fn square_function_identity() {
        let g = make_grid(2, 5).unwrap();
        let q = DyadicCube::new(2, &[1, 2]).unwrap();
        let s = square_function(&haar_function(&q, &dir("10"), g).unwrap());
        for p in 0..g.len() {
            let c = g.coords(p);
            let expected = if q.contains_point(&g, &c[..2]) { 1.0 } else { 0.0 };
            assert!((s.values()[p].re - expected).abs() < 1e-12);
        }
        assert!(square_function(&DiscreteField::constant(g, Complex64::new(2.0, 0.0))).max_abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let u = random_field(g, &mut rng);
            let centered = u.sub(&DiscreteField::constant(g, u.mean()));
            assert!((square_function(&u).l2_norm() - centered.l2_norm()).abs() < 1e-8 * centered.l2_norm());
        }
    }

    #[test]
    fn semenov_shifts() {
        let g = make_grid(1, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(g, &mut rng);
        assert!(semenov_rearrange(&u, &[0], None).unwrap().max_abs_distance(&u) < 1e-12);
        let a = semenov_rearrange(&semenov_rearrange(&u, &[3], None).unwrap(), &[5], None).unwrap();
        let b = semenov_rearrange(&u, &[8], None).unwrap();
        assert!(a.max_abs_distance(&b) < 1e-12);
        let t = semenov_rearrange(&u, &[7], None).unwrap();
        assert!((t.l2_norm() - u.l2_norm()).abs() < 1e-10);
        assert!((t.mean() - u.mean()).norm() < 1e-12);
        // h_Q -> h_{Q+1} with wrap
        let q = DyadicCube::new(2, &[3]).unwrap();
        let moved = semenov_rearrange(&haar_function(&q, &dir("1"), g).unwrap(), &[1], None).unwrap();
        let target = haar_function(&DyadicCube::new(2, &[0]).unwrap(), &dir("1"), g).unwrap();
        assert!(moved.max_abs_distance(&target) < 1e-12);
        assert!(semenov_rearrange(&u, &[1, 1], None).is_err());
    }

    #[test]
    fn block_basis_identity_and_zero() {
        let g = make_grid(1, 8).unwrap();
        let sys = build_wavelet_system("db2", g, &[dir("1")]).unwrap();
        let aux = crate::wavelet::auxiliary_system(&FilterTable::default(), g, None).unwrap();
        let e = dir("1");
        let id = BlockCoefficients::from_fn(1, 3, 0, |k, q| if k == q { Complex64::new(1.0, 0.0) } else { ZERO });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_field(g, &mut rng);
        let out = block_basis_apply(&u, &id, 1.0, &e, &sys, &aux).unwrap();
        // aux and sys share the db2 filter, so this is the scale-3 part of W
        let c = sys.analyze(&u);
        let mut only = Coefficients::zeros(g);
        for q in cubes_at_scale(&g, 3).unwrap() {
            only.set(&q, &e, c.get(&q, &e));
        }
        assert!(out.max_abs_distance(&sys.synthesize(&only)) < 1e-12);
        let zero = BlockCoefficients::from_fn(1, 3, 2, |_, _| ZERO);
        assert_eq!(block_basis_apply(&u, &zero, 1.0, &e, &sys, &aux).unwrap().max_abs(), 0.0);
        let bad = BlockCoefficients::from_fn(1, 3, 1, |_, _| Complex64::new(1.0, 0.0));
        assert!(matches!(block_basis_apply(&u, &bad, 1.0, &e, &sys, &aux), Err(Error::CoefficientDecay { .. })));
        let w = wavelet_projection(&sys, &u, &e).unwrap();
        assert!(out.l2_norm() <= w.l2_norm() + 1e-12);
    }

    #[test]
    fn block_basis_adjoint_pairs() {
        let g = make_grid(2, 6).unwrap();
        let sys = build_wavelet_system("db3", g, &Direction::all(2)).unwrap();
        let aux = crate::wavelet::auxiliary_system(&FilterTable::default(), g, None).unwrap();
        let e = dir("10");
        let c = BlockCoefficients::random_admissible(2, 2, 1, 0.5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (u, v) = (random_field(g, &mut rng), random_field(g, &mut rng));
        let a = block_basis_apply(&u, &c, 0.5, &e, &sys, &aux).unwrap().inner(&v);
        let b = u.inner(&block_basis_adjoint(&v, &c, 0.5, &e, &sys, &aux).unwrap());
        assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn predecessor_collapses_to_projection_at_depth_zero() {
        let g = make_grid(1, 8).unwrap();
        let e = dir("1");
        let sys = build_wavelet_system("db2", g, &[e]).unwrap();
        let fam = KernelFamily::wavelets(&sys, 0, &e, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(g, &mut rng);
        let s = predecessor_rearrange(&u, &fam, &e, &sys).unwrap();
        assert!(s.max_abs_distance(&wavelet_projection(&sys, &u, &e).unwrap()) < 1e-9);
        assert_eq!(predecessor_rearrange(&u, &KernelFamily::zero(1), &e, &sys).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn predecessor_expansion_and_adjoint() {
        let g = make_grid(2, 5).unwrap();
        let e = dir("01");
        let sys = build_wavelet_system("db2", g, &Direction::all(2)).unwrap();
        let lambda = 1;
        let fam = KernelFamily::wavelets(&sys, lambda, &e, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (u, v) = (random_field(g, &mut rng), random_field(g, &mut rng));
        let su = predecessor_rearrange(&u, &fam, &e, &sys).unwrap();
        // direct expansion oracle
        let mut expected = Complex64::new(0.0, 0.0);
        let (lo, hi) = sys.scales();
        for j in lo.max(lambda)..=hi {
            for q in cubes_at_scale(&g, j).unwrap() {
                let w = predecessor(&q, lambda).unwrap();
                let phi_q = sys.atom(&q, &e).unwrap();
                expected += u.inner(&sys.atom(&w, &e).unwrap()) * phi_q.inner(&v) / q.volume();
            }
        }
        assert!((su.inner(&v) - expected).norm() < 1e-10 * expected.norm().max(1.0));
        let adj = predecessor_adjoint(&v, &fam, &e, &sys).unwrap();
        assert!((u.inner(&adj) - expected).norm() < 1e-10 * expected.norm().max(1.0));

        // the explicit family with the same members agrees
        let mut members = HashMap::new();
        let split = canonical_split(2, lambda);
        for j in lo.max(lambda)..=hi {
            for q in cubes_at_scale(&g, j).unwrap() {
                let w = predecessor(&q, lambda).unwrap();
                members.insert((split.branch_of(&q).unwrap(), w), sys.atom(&w, &e).unwrap());
            }
        }
        let explicit = KernelFamily::explicit(members.clone(), fam.certificate(), lambda, &sys, &e, 0).unwrap();
        let s2 = predecessor_rearrange(&u, &explicit, &e, &sys).unwrap();
        assert!(s2.max_abs_distance(&su) < 1e-10);
        let adj2 = predecessor_adjoint(&v, &explicit, &e, &sys).unwrap();
        assert!(adj2.max_abs_distance(&adj) < 1e-10);

        let mut tight = fam.certificate();
        tight.c *= 0.1;
        assert!(matches!(
            KernelFamily::explicit(members, tight, lambda, &sys, &e, 0),
            Err(Error::InvalidCertificate(_))
        ));
    }
}
