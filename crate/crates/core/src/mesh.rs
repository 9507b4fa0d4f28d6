//! Candidate contract sets and dyadic cells of the increment space `[0,1]^m`.
//!
//! A cell at depth `j` with integer corner `k` is the closed cube
//! `∏ [k_i 2^-j, (k_i + 1) 2^-j]`. Membership of mesh points in cells is decided
//! on integer grid indices, so boundary points are never misclassified.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::model::Contract;
use crate::scalar::{dyadic, Scalar};

/// Default depth cap for cells over the full contract space.
pub const DEFAULT_DEPTH_CAP: u32 = 20;
/// Hard limit on cell depth (corner coordinates and scalars stay exact).
pub const MAX_DEPTH: u32 = 48;

/// A closed dyadic cube in increment space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    depth: u32,
    corner: Vec<u64>,
}

impl Cell {
    /// The whole increment space `[0,1]^m`.
    pub fn root(m: usize) -> Self {
        Self { depth: 0, corner: vec![0; m] }
    }

    pub fn new(depth: u32, corner: Vec<u64>) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthCap(MAX_DEPTH));
        }
        if corner.is_empty() || corner.iter().any(|&k| k >> depth != 0) {
            return Err(Error::CandidateSet(format!("corner {corner:?} outside depth {depth} grid")));
        }
        Ok(Self { depth, corner })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn corner(&self) -> &[u64] {
        &self.corner
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn side<S: Scalar>(&self) -> S {
        dyadic(1, self.depth)
    }

    pub fn lower<S: Scalar>(&self) -> Vec<S> {
        self.corner.iter().map(|&k| dyadic(k, self.depth)).collect()
    }

    pub fn upper<S: Scalar>(&self) -> Vec<S> {
        self.corner.iter().map(|&k| dyadic(k + 1, self.depth)).collect()
    }

    /// The `2^m` children of half the side, in lexicographic corner order.
    pub fn quadrants(&self, depth_cap: u32) -> Result<Vec<Cell>> {
        if self.depth >= depth_cap.min(MAX_DEPTH) {
            return Err(Error::DepthCap(depth_cap.min(MAX_DEPTH)));
        }
        let m = self.corner.len();
        Ok((0..1u64 << m)
            .map(|bits| Cell {
                depth: self.depth + 1,
                corner: self
                    .corner
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| 2 * k + ((bits >> (m - 1 - i)) & 1))
                    .collect(),
            })
            .collect())
    }

    /// Closed-cube containment of another cell.
    pub fn contains_cell(&self, other: &Cell) -> bool {
        if other.depth < self.depth || other.dim() != self.dim() {
            return false;
        }
        let shift = other.depth - self.depth;
        self.corner.iter().zip(&other.corner).all(|(&k, &o)| o >> shift == k)
    }

    /// Closed-cube membership of a point.
    pub fn contains_point<S: Scalar>(&self, x: &[S]) -> bool {
        let lo = self.lower::<S>();
        let hi = self.upper::<S>();
        x.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| v >= l && v <= h)
    }

    /// Whether two closed cells share at least one point.
    pub fn intersects(&self, other: &Cell) -> bool {
        let d = self.depth.max(other.depth);
        self.corner.iter().zip(&other.corner).all(|(&a, &b)| {
            let (a0, a1) = (a << (d - self.depth), (a + 1) << (d - self.depth));
            let (b0, b1) = (b << (d - other.depth), (b + 1) << (d - other.depth));
            a0 <= b1 && b0 <= a1
        })
    }

    /// Integer sum of the corner coordinates at the cell's own scale.
    fn corner_sum(&self) -> u128 {
        self.corner.iter().map(|&k| k as u128).sum()
    }
}

impl fmt::Display for Cell {
    /// `j:(k1,…,km)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:(", self.depth)?;
        for (i, k) in self.corner.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Cell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::CandidateSet(format!("bad cell notation {s:?}"));
        let (depth, rest) = s.split_once(':').ok_or_else(bad)?;
        let depth: u32 = depth.trim().parse().map_err(|_| bad())?;
        let inner = rest.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let corner = inner
            .split(',')
            .map(|k| k.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Cell::new(depth, corner)
    }
}

/// Uniform mesh: increment vectors on the `δ`-grid whose coordinates sum to at
/// most one. The step is held as an exact fraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformMesh {
    m: usize,
    step: Ratio<u64>,
}

impl UniformMesh {
    /// Mesh with step `num/den`.
    pub fn from_ratio(m: usize, num: u64, den: u64) -> Result<Self> {
        if m == 0 || num == 0 || den == 0 || num > den {
            return Err(Error::CandidateSet(format!("mesh step {num}/{den} outside (0,1]")));
        }
        Ok(Self { m, step: Ratio::new(num, den) })
    }

    /// Mesh with step `delta`, recovered as the fraction with the smallest
    /// denominator (at most 10^6) that matches `delta` to 1e-12.
    pub fn new(m: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::CandidateSet(format!("mesh step {delta} outside (0,1]")));
        }
        for den in 1..=1_000_000u64 {
            let num = (delta * den as f64).round();
            if num >= 1.0 && (num / den as f64 - delta).abs() <= 1e-12 {
                return Self::from_ratio(m, num as u64, den);
            }
        }
        Err(Error::CandidateSet(format!("mesh step {delta} is not a simple fraction")))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> Ratio<u64> {
        self.step
    }

    pub fn step_f64(&self) -> f64 {
        *self.step.numer() as f64 / *self.step.denom() as f64
    }

    /// Largest grid index budget: `Σ i ≤ K` with `K = ⌊1/δ⌋`.
    pub fn budget(&self) -> u64 {
        self.step.denom() / self.step.numer()
    }

    /// Whether `δ` divides one exactly.
    pub fn divides_one(&self) -> bool {
        self.step.denom().is_multiple_of(*self.step.numer())
    }

    /// Number of candidates: lattice points of the dilated simplex, `C(K + m, m)`.
    pub fn size(&self) -> u128 {
        let k = self.budget() as u128;
        (1..=self.m as u128).fold(1u128, |acc, i| acc * (k + i) / i)
    }

    pub fn contract_at<S: Scalar>(&self, idx: &[u64]) -> Contract<S> {
        let (num, den) = (*self.step.numer() as f64, *self.step.denom() as f64);
        Contract::from_increments_unchecked(idx.iter().map(|&i| S::lit(i as f64 * num / den)).collect())
    }

    /// Inclusive grid index range of the mesh inside the cell, per dimension.
    fn ranges(&self, cell: &Cell) -> Option<Vec<(u64, u64)>> {
        let (num, den) = (*self.step.numer() as u128, *self.step.denom() as u128);
        let scale = 1u128 << cell.depth;
        let budget = self.budget();
        let mut out = Vec::with_capacity(self.m);
        for &k in &cell.corner {
            // i·num/den ≥ k/2^j  ⇔  i ≥ k·den / (2^j·num)
            let lo_num = k as u128 * den;
            let div = scale * num;
            let lo = lo_num.div_ceil(div);
            let hi = ((k as u128 + 1) * den / div).min(budget as u128);
            if lo > hi {
                return None;
            }
            out.push((lo as u64, hi as u64));
        }
        Some(out)
    }

    /// Iterates over all candidates' grid indices in lexicographic order.
    pub fn indices(&self) -> MeshIndices {
        MeshIndices::new(vec![(0, self.budget()); self.m], self.budget())
    }

    /// Grid indices of candidates inside `cell`, lexicographic.
    pub fn indices_in(&self, cell: &Cell) -> MeshIndices {
        match self.ranges(cell) {
            Some(r) => MeshIndices::new(r, self.budget()),
            None => MeshIndices::empty(),
        }
    }
}

/// Odometer over integer boxes restricted to `Σ i ≤ budget`.
#[derive(Debug, Clone)]
pub struct MeshIndices {
    ranges: Vec<(u64, u64)>,
    budget: u64,
    next: Option<Vec<u64>>,
}

impl MeshIndices {
    fn new(ranges: Vec<(u64, u64)>, budget: u64) -> Self {
        let start: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        let next = (start.iter().sum::<u64>() <= budget).then_some(start);
        Self { ranges, budget, next }
    }

    fn empty() -> Self {
        Self { ranges: Vec::new(), budget: 0, next: None }
    }
}

impl Iterator for MeshIndices {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let cur = self.next.take()?;
        let mut idx = cur.clone();
        // advance the last coordinate that can still grow within the budget
        let mut pos = idx.len();
        while pos > 0 {
            pos -= 1;
            let sum: u64 = idx.iter().sum();
            if idx[pos] < self.ranges[pos].1 && sum < self.budget {
                idx[pos] += 1;
                for (later, range) in idx.iter_mut().zip(&self.ranges).skip(pos + 1) {
                    *later = range.0;
                }
                if idx.iter().sum::<u64>() <= self.budget {
                    self.next = Some(idx);
                    break;
                }
            }
            idx[pos] = self.ranges[pos].0;
        }
        Some(cur)
    }
}

/// The set of contracts an algorithm competes against.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSet<S: Scalar> {
    UniformMesh(UniformMesh),
    /// All bounded monotone contracts; cells at `depth_cap` count as atomic.
    FullSpace { m: usize, depth_cap: u32 },
    ExplicitList { m: usize, contracts: Vec<Contract<S>> },
}

/// How many candidates a closed cell holds (counting stops at two).
#[derive(Debug, Clone, PartialEq)]
pub enum CellCount<S: Scalar> {
    Zero,
    One(Contract<S>),
    Many,
}

/// The contracts an algorithm may post from a relevant cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchors<S: Scalar> {
    Composite { lower: Contract<S>, upper: Contract<S> },
    Atomic(Contract<S>),
}

impl<S: Scalar> Anchors<S> {
    pub fn is_atomic(&self) -> bool {
        matches!(self, Anchors::Atomic(_))
    }
}

impl<S: Scalar> CandidateSet<S> {
    pub fn uniform_mesh(m: usize, delta: f64) -> Result<Self> {
        Ok(Self::UniformMesh(UniformMesh::new(m, delta)?))
    }

    pub fn full_space(m: usize) -> Self {
        Self::FullSpace { m, depth_cap: DEFAULT_DEPTH_CAP }
    }

    pub fn explicit(m: usize, contracts: Vec<Contract<S>>) -> Result<Self> {
        if contracts.iter().any(|c| c.dim() != m || !c.is_bounded()) {
            return Err(Error::CandidateSet("explicit candidates must be bounded and of dimension m".into()));
        }
        Ok(Self::ExplicitList { m, contracts })
    }

    pub fn m(&self) -> usize {
        match self {
            Self::UniformMesh(mesh) => mesh.m,
            Self::FullSpace { m, .. } | Self::ExplicitList { m, .. } => *m,
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, Self::FullSpace { .. })
    }

    /// Depth beyond which cells are never split.
    pub fn depth_cap(&self) -> u32 {
        match self {
            Self::FullSpace { depth_cap, .. } => *depth_cap,
            _ => MAX_DEPTH,
        }
    }

    pub fn count_candidates(&self, cell: &Cell) -> CellCount<S> {
        match self {
            Self::UniformMesh(mesh) => {
                let Some(ranges) = mesh.ranges(cell) else {
                    return CellCount::Zero;
                };
                let min_sum: u64 = ranges.iter().map(|r| r.0).sum();
                let budget = mesh.budget();
                if min_sum > budget {
                    CellCount::Zero
                } else if min_sum < budget && ranges.iter().any(|r| r.1 > r.0) {
                    CellCount::Many
                } else {
                    let idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
                    CellCount::One(mesh.contract_at(&idx))
                }
            }
            Self::FullSpace { depth_cap, .. } => {
                // the simplex is downward closed, so the min corner decides
                if cell.corner_sum() > 1u128 << cell.depth {
                    CellCount::Zero
                } else if cell.depth >= *depth_cap {
                    CellCount::One(Contract::from_increments_unchecked(cell.lower()))
                } else {
                    CellCount::Many
                }
            }
            Self::ExplicitList { contracts, .. } => {
                let mut inside = contracts.iter().filter(|c| cell.contains_point(c.increments()));
                match (inside.next(), inside.next()) {
                    (None, _) => CellCount::Zero,
                    (Some(c), None) => CellCount::One(c.clone()),
                    _ => CellCount::Many,
                }
            }
        }
    }

    pub fn is_relevant(&self, cell: &Cell) -> bool {
        !matches!(self.count_candidates(cell), CellCount::Zero)
    }

    pub fn anchors_of(&self, cell: &Cell) -> Result<Anchors<S>> {
        match self.count_candidates(cell) {
            CellCount::Zero => Err(Error::IrrelevantCell(cell.to_string())),
            CellCount::One(c) => Ok(Anchors::Atomic(c)),
            CellCount::Many => Ok(Anchors::Composite {
                lower: Contract::from_increments_unchecked(cell.lower()),
                upper: Contract::from_increments_unchecked(cell.upper()),
            }),
        }
    }

    /// All candidates of a finite set, lexicographic on increments.
    pub fn enumerate(&self) -> Result<Vec<Contract<S>>> {
        match self {
            Self::UniformMesh(mesh) => Ok(mesh.indices().map(|i| mesh.contract_at(&i)).collect()),
            Self::ExplicitList { contracts, .. } => {
                let mut out = contracts.clone();
                out.sort_by(|a, b| crate::model::lex_cmp(a.increments(), b.increments()));
                Ok(out)
            }
            Self::FullSpace { .. } => Err(Error::CandidateSet("full space is not finite".into())),
        }
    }

    /// Candidates inside `cell` (finite sets only).
    pub fn candidates_in(&self, cell: &Cell) -> Result<Vec<Contract<S>>> {
        match self {
            Self::UniformMesh(mesh) => Ok(mesh.indices_in(cell).map(|i| mesh.contract_at(&i)).collect()),
            Self::ExplicitList { contracts, .. } => Ok(contracts
                .iter()
                .filter(|c| cell.contains_point(c.increments()))
                .cloned()
                .collect()),
            Self::FullSpace { .. } => Err(Error::CandidateSet("full space is not finite".into())),
        }
    }
}

/// Every candidate of a uniform mesh, lexicographic.
pub fn mesh_enumerate<S: Scalar>(mesh: &UniformMesh) -> Vec<Contract<S>> {
    mesh.indices().map(|i| mesh.contract_at(&i)).collect()
}

/// `OPT(fine grid) − OPT(coarse mesh)`, both by exhaustive exact search.
pub fn discretization_error<S: Scalar, E: Environment<S>>(
    env: &E,
    fine_step: f64,
    coarse: &UniformMesh,
) -> Result<S> {
    if fine_step > coarse.step_f64() / 10.0 + 1e-15 {
        return Err(Error::CandidateSet("fine step must be at most a tenth of the coarse step".into()));
    }
    let fine = CandidateSet::<S>::UniformMesh(UniformMesh::new(coarse.m(), fine_step)?);
    let (_, opt_fine) = crate::analysis::opt_search(env, &fine)?;
    let (_, opt_coarse) = crate::analysis::opt_search(env, &CandidateSet::UniformMesh(coarse.clone()))?;
    Ok(opt_fine - opt_coarse)
}
