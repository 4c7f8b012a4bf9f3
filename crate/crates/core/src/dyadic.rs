//! Dyadic cubes on the unit torus.
//!
//! A cube of scale `j` has side `2^-j` and an integer index in `[0, 2^j)` per
//! axis. Translates wrap around the torus, so `Q -> Q + mu s(Q)` is a
//! permutation of each scale collection.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    scale: u32,
    dim: usize,
    index: [u64; 3],
}

impl DyadicCube {
    pub fn new(scale: u32, index: &[u64]) -> Result<Self> {
        let dim = index.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidCube(format!("dimension {dim} not in 1..=3")));
        }
        if scale > 40 {
            return Err(Error::InvalidCube(format!("scale {scale} too large")));
        }
        let limit = 1u64 << scale;
        let mut idx = [0u64; 3];
        for (a, &i) in index.iter().enumerate() {
            if i >= limit {
                return Err(Error::InvalidCube(format!("index {i} >= 2^{scale} on axis {a}")));
            }
            idx[a] = i;
        }
        Ok(Self { scale, dim, index: idx })
    }

    /// The whole torus as a scale-0 cube.
    pub fn root(dim: usize) -> Self {
        Self { scale: 0, dim, index: [0; 3] }
    }

    #[inline]
    pub fn scale(&self) -> u32 {
        self.scale
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn index(&self) -> &[u64] {
        &self.index[..self.dim]
    }

    /// Side length `s(Q) = 2^-j`.
    #[inline]
    pub fn side(&self) -> f64 {
        (-(self.scale as f64)).exp2()
    }

    /// Volume `|Q| = 2^{-nj}`.
    #[inline]
    pub fn volume(&self) -> f64 {
        (-((self.scale as usize * self.dim) as f64)).exp2()
    }

    pub fn center(&self) -> [f64; 3] {
        let s = self.side();
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = (self.index[a] as f64 + 0.5) * s;
        }
        c
    }

    /// Lower corner of the cube.
    pub fn corner(&self) -> [f64; 3] {
        let s = self.side();
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = self.index[a] as f64 * s;
        }
        c
    }

    /// Whether `self` contains `other` (as subsets of the torus).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.dim != self.dim || other.scale < self.scale {
            return false;
        }
        let shift = other.scale - self.scale;
        (0..self.dim).all(|a| other.index[a] >> shift == self.index[a])
    }

    /// Whether the grid point with integer coordinates lies in the cube.
    pub fn contains_point(&self, grid: &TorusGrid, coords: &[usize]) -> bool {
        let depth = grid.depth();
        if self.scale > depth {
            return false;
        }
        let shift = depth - self.scale;
        (0..self.dim).all(|a| (coords[a] as u64) >> shift == self.index[a])
    }

    /// Flat row-major position of this cube within its scale collection.
    pub fn ordinal(&self) -> usize {
        let mut o = 0usize;
        for a in 0..self.dim {
            o = (o << self.scale) | self.index[a] as usize;
        }
        o
    }

    pub fn from_ordinal(dim: usize, scale: u32, ordinal: usize) -> Self {
        let mask = (1usize << scale) - 1;
        let mut index = [0u64; 3];
        for a in 0..dim {
            index[a] = ((ordinal >> (scale as usize * (dim - 1 - a))) & mask) as u64;
        }
        Self { scale, dim, index }
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.scale)?;
        for a in 0..self.dim {
            if a > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.index[a])?;
        }
        Ok(())
    }
}

impl FromStr for DyadicCube {
    type Err = Error;

    /// Parses the literal `"j:i1,...,in"`, e.g. `"3:5,2"`.
    fn from_str(s: &str) -> Result<Self> {
        let (scale, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidCube(format!("missing ':' in '{s}'")))?;
        let scale: u32 =
            scale.trim().parse().map_err(|_| Error::InvalidCube(format!("bad scale in '{s}'")))?;
        let index = rest
            .split(',')
            .map(|t| t.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidCube(format!("bad index in '{s}'")))?;
        DyadicCube::new(scale, &index)
    }
}

/// A direction `eps in {0,1}^n \ {0}`, optionally with a distinguished axis
/// `i0` carrying `eps_{i0} = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    dim: usize,
    bits: [bool; 3],
    distinguished: Option<usize>,
}

impl Direction {
    pub fn new(bits: &[u8]) -> Result<Self> {
        let dim = bits.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDirection(format!("dimension {dim} not in 1..=3")));
        }
        let mut b = [false; 3];
        for (a, &v) in bits.iter().enumerate() {
            b[a] = match v {
                0 => false,
                1 => true,
                _ => return Err(Error::InvalidDirection(format!("entry {v} not in {{0,1}}"))),
            };
        }
        if !b.iter().any(|&x| x) {
            return Err(Error::InvalidDirection("direction must be nonzero".into()));
        }
        Ok(Self { dim, bits: b, distinguished: None })
    }

    /// Direction from the bit mask used by the coefficient pyramid
    /// (bit `n-1-a` set means `eps_a = 1`).
    pub fn from_mask(dim: usize, mask: usize) -> Result<Self> {
        let bits: Vec<u8> = (0..dim).map(|a| ((mask >> (dim - 1 - a)) & 1) as u8).collect();
        Self::new(&bits)
    }

    /// All `2^n - 1` directions in increasing mask order.
    pub fn all(dim: usize) -> Vec<Direction> {
        (1..(1usize << dim)).map(|m| Self::from_mask(dim, m).unwrap()).collect()
    }

    pub fn with_distinguished(mut self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange { axis, n: self.dim });
        }
        if !self.bits[axis] {
            return Err(Error::InvalidDirection(format!("eps_{} must be 1 for i0 = {}", axis + 1, axis + 1)));
        }
        self.distinguished = Some(axis);
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn is_set(&self, axis: usize) -> bool {
        self.bits[axis]
    }

    pub fn distinguished(&self) -> Option<usize> {
        self.distinguished
    }

    pub fn mask(&self) -> usize {
        (0..self.dim).fold(0, |m, a| (m << 1) | self.bits[a] as usize)
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.dim).map(|a| self.bits[a] as u8).collect()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.dim {
            write!(f, "{}", self.bits[a] as u8)?;
        }
        Ok(())
    }
}

impl FromStr for Direction {
    type Err = Error;

    /// Parses a bit string such as `"10"`.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::InvalidDirection(format!("bad character '{c}' in '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Direction::new(&bits)
    }
}

/// All `2^{nj}` cubes of scale `j`, in row-major ordinal order.
pub fn cubes_at_scale(grid: &TorusGrid, scale: u32) -> Result<Vec<DyadicCube>> {
    if scale > grid.depth() {
        return Err(Error::ScaleOutOfRange { scale: scale as i64, lo: 0, hi: grid.depth() as i64 });
    }
    let count = 1usize << (scale as usize * grid.dim());
    Ok((0..count).map(|o| DyadicCube::from_ordinal(grid.dim(), scale, o)).collect())
}

/// The `lambda`-th dyadic ancestor of `q`.
pub fn predecessor(q: &DyadicCube, lambda: u32) -> Result<DyadicCube> {
    if lambda > q.scale {
        return Err(Error::InvalidArgument(format!(
            "predecessor depth {lambda} exceeds cube scale {}",
            q.scale
        )));
    }
    let mut index = [0u64; 3];
    for a in 0..q.dim {
        index[a] = q.index[a] >> lambda;
    }
    Ok(DyadicCube { scale: q.scale - lambda, dim: q.dim, index })
}

/// `Q + mu s(Q)`, wrapped onto the torus.
pub fn translate(q: &DyadicCube, mu: &[i64]) -> DyadicCube {
    let modulus = 1i64 << q.scale;
    let mut index = [0u64; 3];
    for a in 0..q.dim {
        let shift = mu.get(a).copied().unwrap_or(0);
        index[a] = (q.index[a] as i64 + shift).rem_euclid(modulus) as u64;
    }
    DyadicCube { scale: q.scale, dim: q.dim, index }
}

/// Splitting of all cubes of scale `>= lambda` into `2^{n lambda}` branches on
/// each of which the `lambda`-th predecessor map is injective.
///
/// The children `W_1(Q), ..., W_{2^{n lambda}}(Q)` of a cube are enumerated in
/// lexicographic order of their offset tuple inside `Q`; branch `k` collects
/// the `k`-th child of every cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitFamily {
    dim: usize,
    lambda: u32,
}

pub fn canonical_split(dim: usize, lambda: u32) -> SplitFamily {
    SplitFamily { dim, lambda }
}

impl SplitFamily {
    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn branch_count(&self) -> usize {
        1 << (self.dim * self.lambda as usize)
    }

    /// Branch of a cube of scale `>= lambda` (zero-based).
    pub fn branch_of(&self, w: &DyadicCube) -> Result<usize> {
        if w.scale < self.lambda {
            return Err(Error::InvalidArgument(format!(
                "cube scale {} below split depth {}",
                w.scale, self.lambda
            )));
        }
        let mask = (1u64 << self.lambda) - 1;
        let mut k = 0usize;
        for a in 0..w.dim {
            k = (k << self.lambda) | (w.index[a] & mask) as usize;
        }
        Ok(k)
    }

    /// `W_k(Q)`: the unique member of branch `k` whose predecessor is `q`.
    pub fn member(&self, branch: usize, q: &DyadicCube) -> DyadicCube {
        let mask = (1usize << self.lambda) - 1;
        let mut index = [0u64; 3];
        for a in 0..q.dim {
            let offset = (branch >> (self.lambda as usize * (q.dim - 1 - a))) & mask;
            index[a] = (q.index[a] << self.lambda) | offset as u64;
        }
        DyadicCube { scale: q.scale + self.lambda, dim: q.dim, index }
    }
}

fn axis_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Torus distance between two cubes: per-axis center gap minus half-sides,
/// floored at zero, combined in the Euclidean norm.
pub fn cube_distance(q: &DyadicCube, k: &DyadicCube) -> f64 {
    let (cq, ck) = (q.center(), k.center());
    let half = 0.5 * (q.side() + k.side());
    (0..q.dim)
        .map(|a| (axis_gap(cq[a], ck[a]) - half).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Torus distance from a point to a cube.
pub fn point_distance(x: &[f64], q: &DyadicCube) -> f64 {
    let c = q.center();
    let half = 0.5 * q.side();
    (0..q.dim)
        .map(|a| (axis_gap(x[a], c[a]) - half).max(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `(1 + dist(x, Q)/s(Q))^{-n(1+delta)}`.
pub fn decay_weight(x: &[f64], q: &DyadicCube, delta: f64) -> f64 {
    (1.0 + point_distance(x, q) / q.side()).powf(-(q.dim as f64) * (1.0 + delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::collections::HashSet;

    #[test]
    fn scale_collections() {
        let g1 = make_grid(1, 4).unwrap();
        let c = cubes_at_scale(&g1, 0).unwrap();
        assert_eq!(c, vec![DyadicCube::root(1)]);
        let g2 = make_grid(2, 4).unwrap();
        let c = cubes_at_scale(&g2, 1).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|q| q.side() == 0.5));
        let g3 = make_grid(3, 4).unwrap();
        let c = cubes_at_scale(&g3, 2).unwrap();
        assert_eq!(c.len(), 64);
        let total: f64 = c.iter().map(|q| q.volume()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // pairwise disjoint: every grid point lies in exactly one cube
        for i in 0..g3.len() {
            let x = g3.coords(i);
            assert_eq!(c.iter().filter(|q| q.contains_point(&g3, &x)).count(), 1);
        }
        assert!(cubes_at_scale(&g1, 5).is_err());
    }

    #[test]
    fn predecessor_examples() {
        let q: DyadicCube = "2:1".parse().unwrap();
        assert_eq!(predecessor(&q, 0).unwrap(), q);
        assert_eq!(predecessor(&q, 1).unwrap(), "1:0".parse().unwrap());
        assert!(predecessor(&q, 3).is_err());
        let q: DyadicCube = "5:19,7".parse().unwrap();
        let p = predecessor(&q, 2).unwrap();
        assert!(p.contains(&q));
        assert!((p.volume() - 16.0 * q.volume()).abs() < 1e-15);
    }

    #[test]
    fn translate_examples() {
        let q: DyadicCube = "2:3".parse().unwrap();
        assert_eq!(translate(&q, &[0]), q);
        assert_eq!(translate(&q, &[1]).index(), &[0]);
        let g = make_grid(2, 3).unwrap();
        let all = cubes_at_scale(&g, 3).unwrap();
        let image: HashSet<_> = all.iter().map(|q| translate(q, &[5, -3])).collect();
        assert_eq!(image.len(), all.len());
        for q in &all {
            assert_eq!(translate(&translate(q, &[2, 7]), &[-1, 4]), translate(q, &[1, 11]));
        }
    }

    #[test]
    fn split_single_branch_at_depth_zero() {
        let s = canonical_split(2, 0);
        assert_eq!(s.branch_count(), 1);
        let q: DyadicCube = "3:4,1".parse().unwrap();
        assert_eq!(s.branch_of(&q).unwrap(), 0);
        assert_eq!(s.member(0, &q), q);
    }

    #[test]
    fn split_one_dim_parity() {
        let s = canonical_split(1, 1);
        assert_eq!(s.branch_count(), 2);
        for i in 0..16u64 {
            let q = DyadicCube::new(4, &[i]).unwrap();
            assert_eq!(s.branch_of(&q).unwrap(), (i % 2) as usize);
        }
    }

    #[test]
    fn split_branches_biject_onto_coarser_scale() {
        // Exhaustive oracle: for each branch, the predecessor image of that
        // branch at scale j enumerates S_{j-lambda} exactly once.
        for dim in 1..=2 {
            let g = make_grid(dim, 5).unwrap();
            for lambda in 0..=2u32 {
                let split = canonical_split(dim, lambda);
                for j in lambda..=5 {
                    let cubes = cubes_at_scale(&g, j).unwrap();
                    let coarse: HashSet<_> = cubes_at_scale(&g, j - lambda).unwrap().into_iter().collect();
                    for k in 0..split.branch_count() {
                        let members: Vec<_> =
                            cubes.iter().filter(|w| split.branch_of(w).unwrap() == k).collect();
                        let images: Vec<_> = members.iter().map(|w| predecessor(w, lambda).unwrap()).collect();
                        let distinct: HashSet<_> = images.iter().copied().collect();
                        assert_eq!(images.len(), coarse.len());
                        assert_eq!(distinct, coarse);
                        for w in members {
                            let p = predecessor(w, lambda).unwrap();
                            assert_eq!(split.member(k, &p), *w);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cube_distance_properties() {
        let a: DyadicCube = "3:0,0".parse().unwrap();
        let b: DyadicCube = "3:7,2".parse().unwrap();
        let c: DyadicCube = "2:2,2".parse().unwrap();
        assert_eq!(cube_distance(&a, &a), 0.0);
        assert_eq!(cube_distance(&a, &b), cube_distance(&b, &a));
        assert_eq!(cube_distance(&a, &c), cube_distance(&c, &a));
        // index 7 wraps next to index 0 on the first axis
        let gap = cube_distance(&a, &b);
        assert!((gap - 0.125).abs() < 1e-15, "{gap}");
        assert_eq!(point_distance(&[0.01, 0.02], &a), 0.0);
    }

    #[test]
    fn literals_roundtrip() {
        let q: DyadicCube = "3:5,2".parse().unwrap();
        assert_eq!(q.scale(), 3);
        assert_eq!(q.index(), &[5, 2]);
        assert_eq!(q.to_string(), "3:5,2");
        assert!("3:8,2".parse::<DyadicCube>().is_err());
        assert!("35,2".parse::<DyadicCube>().is_err());
        let e: Direction = "10".parse().unwrap();
        assert_eq!(e.bits(), vec![1, 0]);
        assert_eq!(e.mask(), 2);
        assert!("00".parse::<Direction>().is_err());
        assert!(e.with_distinguished(1).is_err());
        assert_eq!(e.with_distinguished(0).unwrap().distinguished(), Some(0));
        assert_eq!(Direction::all(2).len(), 3);
    }
}
