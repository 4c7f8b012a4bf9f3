//! Test functions defined independently of the grid depth, so the same
//! suite can be sampled at `J` and `J + 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dyadic::{Direction, DyadicCube};
use crate::error::{Error, Result};
use crate::grid::{DiscreteField, TorusGrid};
use crate::multipliers::{remove_hyperplane, riesz_inverse};
use crate::wavelet::WaveletSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    /// Trigonometric polynomials with `|k| <= radius`.
    pub random: usize,
    /// Wavelet atoms at scales 2 and 3.
    pub atoms: usize,
    /// Modulated anisotropic bumps.
    pub packets: usize,
    /// `R_{i0}^{-1}` of atoms.
    pub preimages: usize,
    pub radius: i64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self { random: 40, atoms: 30, packets: 15, preimages: 15, radius: 6 }
    }
}

impl SuiteSpec {
    pub fn total(&self) -> usize {
        self.random + self.atoms + self.packets + self.preimages
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    BandLimited,
    Atom,
    Packet,
    RieszPreimage,
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    pub family: Family,
    pub label: String,
    pub field: DiscreteField,
}

fn band_limited(grid: TorusGrid, radius: i64, avoid: usize, rng: &mut ChaCha8Rng) -> DiscreteField {
    let n = grid.dim();
    let mut modes = Vec::new();
    let side = 2 * radius + 1;
    for idx in 0..side.pow(n as u32) {
        let mut k = [0i64; 3];
        let mut rest = idx;
        for ka in k.iter_mut().take(n) {
            *ka = rest % side - radius;
            rest /= side;
        }
        let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let r2: i64 = k[..n].iter().map(|x| x * x).sum();
        if r2 > 0 && r2 <= radius * radius && k[avoid] != 0 {
            modes.push((k, c));
        }
    }
    DiscreteField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, c)| {
                let phase: f64 = (0..n).map(|a| k[a] as f64 * x[a]).sum();
                c * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum()
    })
}

fn packet(grid: TorusGrid, avoid: usize, rng: &mut ChaCha8Rng) -> DiscreteField {
    let n = grid.dim();
    let mut k = [0i64; 3];
    let mut kappa = [0.0; 3];
    let mut centre = [0.0; 3];
    for a in 0..n {
        k[a] = rng.random_range(-8..=8);
        kappa[a] = rng.random_range(4.0..16.0);
        centre[a] = rng.random_range(0.0..1.0);
    }
    if k[avoid] == 0 {
        k[avoid] = 3;
    }
    DiscreteField::from_fn(grid, |x| {
        let mut env = 1.0;
        let mut phase = 0.0;
        for a in 0..n {
            env *= (kappa[a] * ((2.0 * PI * (x[a] - centre[a])).cos() - 1.0)).exp();
            phase += k[a] as f64 * x[a];
        }
        Complex64::from_polar(env, 2.0 * PI * phase)
    })
}

fn random_atom(sys: &WaveletSystem, rng: &mut ChaCha8Rng, count: usize) -> Result<(DyadicCube, Direction, DiscreteField)> {
    let n = sys.grid().dim();
    let scale = 2 + (count % 2) as u32;
    let index: Vec<u64> = (0..n).map(|_| rng.random_range(0..1u64 << scale)).collect();
    let q = DyadicCube::new(scale, &index)?;
    let dirs = sys.directions();
    let eps = dirs[count % dirs.len()];
    let atom = sys.atom(&q, &eps)?;
    Ok((q, eps, atom))
}

/// The standard suite. Every random draw depends only on `seed`, `spec`,
/// `n` and `i0`, never on the depth.
pub fn standard_suite(sys: &WaveletSystem, spec: &SuiteSpec, i0: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let grid = sys.grid();
    grid.check_axis(i0)?;
    if spec.radius < 1 {
        return Err(Error::InvalidArgument(format!("suite radius {}", spec.radius)));
    }
    let mut out = Vec::with_capacity(spec.total());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..spec.random {
        out.push(TestFunction {
            family: Family::BandLimited,
            label: format!("band-limited-{i}"),
            field: band_limited(grid, spec.radius, i0, &mut rng),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa70);
    for i in 0..spec.atoms {
        let (q, eps, field) = random_atom(sys, &mut rng, i)?;
        out.push(TestFunction { family: Family::Atom, label: format!("atom-{q}-{eps}"), field });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9ac);
    for i in 0..spec.packets {
        out.push(TestFunction { family: Family::Packet, label: format!("packet-{i}"), field: packet(grid, i0, &mut rng) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e1);
    for i in 0..spec.preimages {
        let (q, eps, atom) = random_atom(sys, &mut rng, i)?;
        let field = riesz_inverse(&remove_hyperplane(&atom, i0)?, i0)?;
        out.push(TestFunction { family: Family::RieszPreimage, label: format!("preimage-{q}-{eps}"), field });
    }
    Ok(out)
}
