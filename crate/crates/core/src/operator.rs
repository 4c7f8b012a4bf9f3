//! Opaque linear maps on fields, the unit of norm estimation.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, DiscreteField, TorusGrid};

/// Subspace on which an operator is declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    All,
    MeanZero,
    /// No Fourier mass on `k_axis = 0`.
    NoHyperplane(usize),
}

impl Domain {
    /// Orthogonal projection onto the domain.
    pub fn project(&self, u: &DiscreteField) -> DiscreteField {
        match *self {
            Domain::All => u.clone(),
            Domain::MeanZero => {
                let m = u.mean();
                let mut v = u.clone();
                v.values_mut().iter_mut().for_each(|x| *x -= m);
                v
            }
            Domain::NoHyperplane(axis) => apply_multiplier(u, |k| {
                if k[axis] == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .expect("finite multiplier"),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::All => write!(f, "all"),
            Domain::MeanZero => write!(f, "mean-zero"),
            Domain::NoHyperplane(a) => write!(f, "xi_{} != 0 support", a + 1),
        }
    }
}

type MapFn<'a> = Box<dyn Fn(&DiscreteField) -> Result<DiscreteField> + Send + Sync + 'a>;

/// A field-to-field map with metadata. Inputs are projected onto the
/// declared domain before `apply`, and adjoint outputs after it, so the
/// handle always represents `A P` and its adjoint `P A*`.
pub struct LinearOperatorHandle<'a> {
    label: String,
    grid: TorusGrid,
    domain: Domain,
    linear: bool,
    forward: MapFn<'a>,
    adjoint: Option<MapFn<'a>>,
}

impl<'a> LinearOperatorHandle<'a> {
    pub fn new(
        label: impl Into<String>,
        grid: TorusGrid,
        domain: Domain,
        forward: impl Fn(&DiscreteField) -> Result<DiscreteField> + Send + Sync + 'a,
    ) -> Self {
        Self { label: label.into(), grid, domain, linear: true, forward: Box::new(forward), adjoint: None }
    }

    pub fn with_adjoint(mut self, adjoint: impl Fn(&DiscreteField) -> Result<DiscreteField> + Send + Sync + 'a) -> Self {
        self.adjoint = Some(Box::new(adjoint));
        self
    }

    /// Marks the map as not claimed linear; norm estimation refuses it.
    pub fn nonlinear(mut self) -> Self {
        self.linear = false;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn has_adjoint(&self) -> bool {
        self.adjoint.is_some()
    }

    pub fn apply(&self, u: &DiscreteField) -> Result<DiscreteField> {
        if u.grid() != self.grid {
            return Err(Error::GridMismatch(format!("operator on {}, field on {}", self.grid, u.grid())));
        }
        (self.forward)(&self.domain.project(u))
    }

    pub fn apply_adjoint(&self, v: &DiscreteField) -> Result<DiscreteField> {
        let adj = self.adjoint.as_ref().ok_or_else(|| Error::MissingAdjoint(self.label.clone()))?;
        Ok(self.domain.project(&adj(v)?))
    }

    /// Largest relative defect `|A(au+bv) - aAu - bAv| / (|a||Au| + |b||Av|)`
    /// over `probes` random triples.
    pub fn linearity_defect(&self, probes: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let u = random_field(self.grid, &mut rng);
            let v = random_field(self.grid, &mut rng);
            let a = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let b = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mut comb = u.scaled(a);
            comb.add_scaled(b, &v);
            let (au, av) = (self.apply(&u)?, self.apply(&v)?);
            let mut expected = au.scaled(a);
            expected.add_scaled(b, &av);
            let lhs = self.apply(&comb)?;
            let scale = a.norm() * au.l2_norm() + b.norm() * av.l2_norm();
            let defect = lhs.sub(&expected).l2_norm();
            worst = worst.max(if scale > 0.0 { defect / scale } else { defect });
        }
        Ok(worst)
    }

    /// Fails with `NonLinear` when the defect exceeds `1e-10`.
    pub fn check_linearity(&self, probes: usize, seed: u64) -> Result<()> {
        let defect = self.linearity_defect(probes, seed)?;
        if !self.linear || defect > 1e-10 {
            return Err(Error::NonLinear { label: self.label.clone(), defect });
        }
        Ok(())
    }
}

impl fmt::Debug for LinearOperatorHandle<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperatorHandle")
            .field("label", &self.label)
            .field("grid", &self.grid)
            .field("domain", &self.domain)
            .field("adjoint", &self.adjoint.is_some())
            .finish()
    }
}

/// Gaussian white noise with unit variance per component.
pub fn random_field(grid: TorusGrid, rng: &mut impl Rng) -> DiscreteField {
    use rand_distr::StandardNormal;
    let values = (0..grid.len())
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    DiscreteField::from_values(grid, values).expect("finite samples")
}
