//! Regular dyadic partitions of a box.
//!
//! Every node of a `2^d`-ary dyadic tree over a box `X` is identified by its
//! level (the root has level 1) and its offset among the `2^{d(level-1)}`
//! cells of that level. The offset is the child-index path packed with `d`
//! bits per step, most significant step first, so parent and child offsets
//! are related by a shift. Child index `c` of a split has bit `i` set iff the
//! point lies in the upper half along axis `i`.
//!
//! Cells are half-open `[lower, upper)` on every axis except on the upper
//! face of the domain, which is closed so that every point of `X` has exactly
//! one cell per level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension: child indices must fit in a `u16`.
pub const MAX_DIM: usize = 16;

/// An axis-aligned bounded box in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "domain bounds must be non-empty and of equal length, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.len() > MAX_DIM {
            return Err(Error::Config(format!("dimension {} exceeds {MAX_DIM}", lower.len())));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!(
                    "axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0,1]^d`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit cube is a valid domain")
    }

    /// The interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Sup-norm diameter `|X|`, the longest side.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { point: x.to_vec() })
        }
    }

    /// Number of children of every interior node, `2^d`.
    pub fn arity(&self) -> usize {
        1 << self.dim()
    }

    /// Number of nodes of a complete tree of the given depth,
    /// `sum_{m=1}^{depth} 2^{d(m-1)}`.
    pub fn tree_size(&self, depth: u32) -> u128 {
        let d = self.dim() as u32;
        (0..depth).map(|m| 1u128 << (d * m)).sum()
    }

    /// Offsets of the cells containing `x` at levels `1..=max_level`, written
    /// into `out` (cleared first). Assumes `x` is in the domain.
    pub(crate) fn path_offsets_into(&self, x: &[f64], max_level: u32, out: &mut Vec<u128>) {
        let d = self.dim();
        out.clear();
        let mut lo = [0.0f64; MAX_DIM];
        let mut hi = [0.0f64; MAX_DIM];
        lo[..d].copy_from_slice(&self.lower);
        hi[..d].copy_from_slice(&self.upper);
        let mut offset: u128 = 0;
        out.push(offset);
        for _ in 1..max_level {
            let mut child: u128 = 0;
            for i in 0..d {
                let mid = 0.5 * (lo[i] + hi[i]);
                if x[i] >= mid {
                    child |= 1 << i;
                    lo[i] = mid;
                } else {
                    hi[i] = mid;
                }
            }
            offset = (offset << d) | child;
            out.push(offset);
        }
    }

    /// Addresses of the `max_level` nested cells containing `x`, root first.
    pub fn path_of(&self, x: &[f64], max_level: u32) -> Result<Vec<NodeAddress>> {
        if max_level == 0 {
            return Err(Error::Config("max_level must be at least 1".into()));
        }
        check_packable(self.dim(), max_level)?;
        self.check(x)?;
        let mut offsets = Vec::with_capacity(max_level as usize);
        self.path_offsets_into(x, max_level, &mut offsets);
        let dim = self.dim() as u8;
        Ok(offsets
            .into_iter()
            .enumerate()
            .map(|(i, offset)| NodeAddress {
                level: i as u32 + 1,
                offset,
                dim,
            })
            .collect())
    }

    /// Bounds of the cell at `address`.
    pub fn cell_of(&self, address: &NodeAddress) -> Result<Cell> {
        if address.dim as usize != self.dim() {
            return Err(Error::Input(format!(
                "address of dimension {} used on a domain of dimension {}",
                address.dim,
                self.dim()
            )));
        }
        let d = self.dim();
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for child in address.path() {
            for i in 0..d {
                let mid = 0.5 * (lower[i] + upper[i]);
                if child & (1 << i) != 0 {
                    lower[i] = mid;
                } else {
                    upper[i] = mid;
                }
            }
        }
        let closed_upper = upper.iter().zip(&self.upper).map(|(u, du)| u == du).collect();
        Ok(Cell {
            lower,
            upper,
            closed_upper,
        })
    }
}

fn check_packable(dim: usize, level: u32) -> Result<()> {
    let bits = dim as u64 * (level.saturating_sub(1)) as u64;
    if bits > 128 {
        return Err(Error::Config(format!(
            "level {level} in dimension {dim} needs {bits} path bits; at most 128 are supported"
        )));
    }
    Ok(())
}

/// Location of a node in the dyadic tree over some domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeAddress {
    level: u32,
    offset: u128,
    dim: u8,
}

impl NodeAddress {
    pub fn root(dim: usize) -> Self {
        Self {
            level: 1,
            offset: 0,
            dim: dim as u8,
        }
    }

    /// Builds an address from child indices, each in `0..2^dim`.
    pub fn from_path(dim: usize, path: &[usize]) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!("unsupported dimension {dim}")));
        }
        let level = path.len() as u32 + 1;
        check_packable(dim, level)?;
        let mut offset = 0u128;
        for &c in path {
            if c >= 1 << dim {
                return Err(Error::Input(format!(
                    "child index {c} out of range for dimension {dim}"
                )));
            }
            offset = (offset << dim) | c as u128;
        }
        Ok(Self {
            level,
            offset,
            dim: dim as u8,
        })
    }

    pub(crate) fn from_parts(dim: usize, level: u32, offset: u128) -> Self {
        Self {
            level,
            offset,
            dim: dim as u8,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Position among the cells of the same level.
    pub fn offset(&self) -> u128 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn is_root(&self) -> bool {
        self.level == 1
    }

    /// Child indices from the root down; length `level - 1`.
    pub fn path(&self) -> Vec<usize> {
        let d = self.dim as u32;
        let mask = (1u128 << d) - 1;
        (0..self.level - 1)
            .rev()
            .map(|step| ((self.offset >> (d * step)) & mask) as usize)
            .collect()
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 1).then(|| Self {
            level: self.level - 1,
            offset: self.offset >> self.dim,
            dim: self.dim,
        })
    }

    pub fn child(&self, index: usize) -> Self {
        debug_assert!(index < 1 << self.dim);
        Self {
            level: self.level + 1,
            offset: (self.offset << self.dim) | index as u128,
            dim: self.dim,
        }
    }

    pub fn children(&self) -> impl Iterator<Item = Self> + '_ {
        (0..1usize << self.dim).map(move |c| self.child(c))
    }

    /// Whether `self` is `other` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, other: &Self) -> bool {
        other.level >= self.level && other.offset >> (self.dim as u32 * (other.level - self.level)) == self.offset
    }

    /// Index of this node in level order over the complete tree
    /// (root = 0).
    pub fn level_order_index(&self) -> u128 {
        let d = self.dim as u32;
        let before: u128 = (0..self.level - 1).map(|m| 1u128 << (d * m)).sum();
        before + self.offset
    }
}

/// Bounds of one dyadic cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per axis, whether the upper bound is included (domain upper face).
    pub closed_upper: Vec<bool>,
}

impl Cell {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && (0..x.len()).all(|i| {
                x[i] >= self.lower[i] && (x[i] < self.upper[i] || (self.closed_upper[i] && x[i] == self.upper[i]))
            })
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Whether `self` is contained in `other`.
    pub fn is_within(&self, other: &Cell) -> bool {
        (0..self.lower.len()).all(|i| self.lower[i] >= other.lower[i] && self.upper[i] <= other.upper[i])
    }
}

/// Depth giving at least `T` leaves: `max(1, ceil(log2(T) / d))`.
pub fn depth_for_horizon(horizon: u64, dim: usize) -> Result<u32> {
    if horizon == 0 || dim == 0 {
        return Err(Error::Config(format!(
            "horizon and dimension must be positive, got T={horizon}, d={dim}"
        )));
    }
    // ceil(log2 T) computed on integers; ceil(ceil(a)/d) == ceil(a/d).
    let ceil_log2 = if horizon <= 1 {
        0
    } else {
        64 - (horizon - 1).leading_zeros()
    };
    Ok(ceil_log2.div_ceil(dim as u32).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paths(domain: &BoxDomain, x: &[f64], level: u32) -> Vec<Vec<usize>> {
        domain.path_of(x, level).unwrap().iter().map(|a| a.path()).collect()
    }

    #[test]
    fn path_in_unit_interval() {
        let d = BoxDomain::unit(1);
        assert_eq!(paths(&d, &[0.3], 3), vec![vec![], vec![0], vec![0, 1]]);
        let cells: Vec<_> = d
            .path_of(&[0.3], 3)
            .unwrap()
            .iter()
            .map(|a| {
                let c = d.cell_of(a).unwrap();
                (c.lower[0], c.upper[0])
            })
            .collect();
        assert_eq!(cells, vec![(0.0, 1.0), (0.0, 0.5), (0.25, 0.5)]);
    }

    #[test]
    fn upper_face_belongs_to_last_cell() {
        let d = BoxDomain::unit(1);
        assert_eq!(paths(&d, &[1.0], 2), vec![vec![], vec![1]]);
        let leaf = d.path_of(&[1.0], 6).unwrap()[5];
        assert!(d.cell_of(&leaf).unwrap().contains(&[1.0]));
    }

    /// The child index in 2-D is found by brute force over the four cells.
    #[test]
    fn child_index_in_square() {
        let d = BoxDomain::unit(2);
        let x = [0.3, 0.7];
        let root = NodeAddress::root(2);
        let containing: Vec<usize> = (0..4)
            .filter(|&c| d.cell_of(&root.child(c)).unwrap().contains(&x))
            .collect();
        assert_eq!(containing, vec![2]);
        assert_eq!(paths(&d, &x, 2)[1], vec![2]);
    }

    #[test]
    fn cells_of_known_paths() {
        let unit = BoxDomain::unit(1);
        let c = unit.cell_of(&NodeAddress::from_path(1, &[1]).unwrap()).unwrap();
        assert_eq!((c.lower[0], c.upper[0]), (0.5, 1.0));
        let c = unit.cell_of(&NodeAddress::from_path(1, &[0, 0]).unwrap()).unwrap();
        assert_eq!((c.lower[0], c.upper[0]), (0.0, 0.25));
        let sym = BoxDomain::interval(-1.0, 1.0).unwrap();
        let c = sym.cell_of(&NodeAddress::from_path(1, &[1, 0]).unwrap()).unwrap();
        assert_eq!((c.lower[0], c.upper[0]), (0.0, 0.5));
    }

    #[test]
    fn depth_for_horizons() {
        assert_eq!(depth_for_horizon(1024, 1).unwrap(), 10);
        assert_eq!(depth_for_horizon(1024, 2).unwrap(), 5);
        assert_eq!(depth_for_horizon(1000, 1).unwrap(), 10);
        assert_eq!(depth_for_horizon(1, 1).unwrap(), 1);
        assert_eq!(depth_for_horizon(2, 3).unwrap(), 1);
        assert_eq!(depth_for_horizon(1025, 1).unwrap(), 11);
        assert!(depth_for_horizon(0, 1).is_err());
    }

    #[test]
    fn outside_points_are_rejected() {
        let d = BoxDomain::unit(1);
        assert!(matches!(d.path_of(&[1.5], 3), Err(Error::Domain { .. })));
        assert!(matches!(d.path_of(&[f64::NAN], 3), Err(Error::Domain { .. })));
        assert!(matches!(d.path_of(&[0.5, 0.5], 3), Err(Error::Domain { .. })));
    }

    #[test]
    fn invalid_domains() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn address_round_trips_and_relations() {
        let a = NodeAddress::from_path(2, &[3, 0, 2]).unwrap();
        assert_eq!(a.level(), 4);
        assert_eq!(a.path(), vec![3, 0, 2]);
        let p = a.parent().unwrap();
        assert_eq!(p.path(), vec![3, 0]);
        assert_eq!(p.child(2), a);
        assert!(p.is_ancestor_or_self(&a));
        assert!(!a.is_ancestor_or_self(&p));
        assert!(NodeAddress::from_path(1, &[2]).is_err());
        assert_eq!(NodeAddress::root(1).level_order_index(), 0);
        assert_eq!(NodeAddress::from_path(1, &[1, 0]).unwrap().level_order_index(), 5);
    }

    #[test]
    fn exactly_one_cell_per_level_contains_each_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = BoxDomain::interval(-2.0, 3.0).unwrap();
        for level in [1u32, 2, 5, 12] {
            let n = 1usize << (level - 1);
            let cells: Vec<Cell> = (0..n)
                .map(|off| d.cell_of(&NodeAddress::from_parts(1, level, off as u128)).unwrap())
                .collect();
            for _ in 0..10_000 {
                let x = [rng.random_range(-2.0..=3.0)];
                let hits = cells.iter().filter(|c| c.contains(&x)).count();
                assert_eq!(hits, 1, "level {level}, x={x:?}");
            }
            // Boundary points too.
            for x in [[-2.0], [3.0], [0.5]] {
                assert_eq!(cells.iter().filter(|c| c.contains(&x)).count(), 1);
            }
        }
    }

    #[test]
    fn partition_in_two_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = BoxDomain::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        let level = 4;
        let cells: Vec<Cell> = (0..1u128 << (2 * (level - 1)))
            .map(|off| d.cell_of(&NodeAddress::from_parts(2, level, off)).unwrap())
            .collect();
        for _ in 0..10_000 {
            let x = [rng.random_range(0.0..=2.0), rng.random_range(-1.0..=1.0)];
            assert_eq!(cells.iter().filter(|c| c.contains(&x)).count(), 1);
        }
    }

    #[test]
    fn nesting_and_path_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = BoxDomain::new(vec![0.0, 0.0, 0.0], vec![1.0, 4.0, 2.0]).unwrap();
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|i| rng.random_range(d.lower()[i]..=d.upper()[i])).collect();
            let path = d.path_of(&x, 9).unwrap();
            for (i, a) in path.iter().enumerate() {
                let cell = d.cell_of(a).unwrap();
                assert!(cell.contains(&x));
                if i > 0 {
                    assert_eq!(a.parent().unwrap(), path[i - 1]);
                    assert!(cell.is_within(&d.cell_of(&path[i - 1]).unwrap()));
                }
            }
        }
    }

    #[test]
    fn diameter_halves_per_level() {
        let d = BoxDomain::new(vec![0.0, 0.0], vec![3.0, 1.0]).unwrap();
        let mut a = NodeAddress::root(2);
        let mut prev = d.cell_of(&a).unwrap().diameter();
        assert_eq!(prev, d.diameter());
        for step in 0..30 {
            a = a.child(step % 4);
            let diam = d.cell_of(&a).unwrap().diameter();
            assert!((diam - prev / 2.0).abs() <= 1e-15 * prev);
            let expected = d.diameter() * 2f64.powi(-(a.level() as i32 - 1));
            assert!((diam - expected).abs() <= 1e-15 * expected);
            prev = diam;
        }
    }

    #[test]
    fn tree_sizes() {
        assert_eq!(BoxDomain::unit(1).tree_size(2), 3);
        assert_eq!(BoxDomain::unit(2).tree_size(3), 1 + 4 + 16);
    }
}
