//! Young diagrams, Gelfand–Tsetlin arrays and the diffusive rescaling maps.
//!
//! Row and cell indices are 1-based throughout, matching the usual
//! `(i, j)` notation for boxes of a diagram. Rows beyond the stored length
//! read as zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Young diagram stored as its non-increasing row lengths, trailing zeros trimmed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Partition {
    rows: Vec<u32>,
}

impl Partition {
    pub fn new(mut rows: Vec<u32>) -> Result<Self> {
        if rows.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!(
                "rows {rows:?} are not non-increasing"
            )));
        }
        while rows.last() == Some(&0) {
            rows.pop();
        }
        Ok(Self { rows })
    }

    pub fn empty() -> Self {
        Self { rows: Vec::new() }
    }

    /// Nonzero rows, longest first.
    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    /// Row `i` (1-based); zero past the last nonzero row.
    pub fn row(&self, i: usize) -> u32 {
        debug_assert!(i >= 1);
        self.rows.get(i - 1).copied().unwrap_or(0)
    }

    /// Number of strictly positive rows, ℓ(λ).
    pub fn length(&self) -> usize {
        self.rows.len()
    }

    /// Number of boxes, |λ|.
    pub fn size(&self) -> u64 {
        self.rows.iter().map(|&r| u64::from(r)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column length λ'_j = |{i : λ_i ≥ j}|.
    pub fn column(&self, j: usize) -> usize {
        self.rows.iter().take_while(|&&r| r as usize >= j).count()
    }

    pub fn transpose(&self) -> Partition {
        let width = self.row(1) as usize;
        let rows = (1..=width).map(|j| self.column(j) as u32).collect();
        Partition { rows }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row >= 1 && cell.col >= 1 && self.row(cell.row) as usize >= cell.col
    }

    /// Whether the box `(row, λ_row + 1)` can be added while staying a partition.
    pub fn can_add_to_row(&self, row: usize) -> bool {
        row >= 1 && (row == 1 || self.row(row - 1) > self.row(row))
    }

    pub fn is_addable(&self, cell: Cell) -> bool {
        cell.row >= 1
            && cell.col == self.row(cell.row) as usize + 1
            && self.can_add_to_row(cell.row)
    }

    /// λ ⊔ □ with the box appended to `row`.
    pub fn with_box(&self, row: usize) -> Result<Partition> {
        if !self.can_add_to_row(row) {
            return Err(Error::CellNotAddable {
                row,
                col: self.row(row) as usize + 1,
                diagram: self.to_string(),
            });
        }
        let mut rows = self.rows.clone();
        if rows.len() < row {
            rows.resize(row, 0);
        }
        rows[row - 1] += 1;
        Ok(Partition { rows })
    }

    /// Rows padded with zeros to exactly `len` entries (truncated if longer).
    pub fn padded(&self, len: usize) -> Vec<u32> {
        (1..=len).map(|i| self.row(i)).collect()
    }

    /// All boxes of the diagram in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, &r)| (1..=r as usize).map(move |j| Cell { row: i + 1, col: j }))
    }
}

impl TryFrom<Vec<u32>> for Partition {
    type Error = Error;

    fn try_from(rows: Vec<u32>) -> Result<Self> {
        Partition::new(rows)
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Self {
        p.rows
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rows.is_empty() {
            return f.write_str("0");
        }
        write_rows(f, &self.rows)
    }
}

fn write_rows(f: &mut fmt::Formatter<'_>, rows: &[u32]) -> fmt::Result {
    for (i, r) in rows.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{r}")?;
    }
    Ok(())
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Partition::empty());
        }
        let rows = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("row {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(rows)
    }
}

/// A box `(row, col)` of a diagram, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Arm, leg, co-arm and co-leg lengths of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArmLeg {
    pub arm: usize,
    pub leg: usize,
    pub coarm: usize,
    pub coleg: usize,
}

pub fn arm_leg(lambda: &Partition, cell: Cell) -> Result<ArmLeg> {
    if !lambda.contains(cell) {
        return Err(Error::CellNotInDiagram {
            row: cell.row,
            col: cell.col,
            diagram: lambda.to_string(),
        });
    }
    Ok(ArmLeg {
        arm: lambda.row(cell.row) as usize - cell.col,
        leg: lambda.column(cell.col) - cell.row,
        coarm: cell.col - 1,
        coleg: cell.row - 1,
    })
}

/// Cells `(i, λ_i + 1)` whose addition keeps a partition with at most `max_rows` rows.
pub fn addable_cells(lambda: &Partition, max_rows: usize) -> Vec<Cell> {
    let limit = max_rows.min(lambda.length() + 1);
    (1..=limit)
        .filter(|&i| lambda.can_add_to_row(i))
        .map(|i| Cell::new(i, lambda.row(i) as usize + 1))
        .collect()
}

/// μ ≺ λ: λ_1 ≥ μ_1 ≥ λ_2 ≥ μ_2 ≥ …
pub fn interlaces(mu: &Partition, lambda: &Partition) -> bool {
    let n = lambda.length().max(mu.length()) + 1;
    (1..=n).all(|i| lambda.row(i) >= mu.row(i) && mu.row(i) >= lambda.row(i + 1))
}

/// Discrete Gelfand–Tsetlin array λ¹ ≺ λ² ≺ … ≺ λᴺ with ℓ(λᵏ) ≤ k.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InterlacingArray {
    levels: Vec<Partition>,
}

impl InterlacingArray {
    pub fn new(levels: Vec<Partition>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Interlacing("array needs at least one level".into()));
        }
        for (k, lam) in levels.iter().enumerate() {
            if lam.length() > k + 1 {
                return Err(Error::TooManyRows {
                    diagram: lam.to_string(),
                    level: k + 1,
                });
            }
        }
        for k in 1..levels.len() {
            if !interlaces(&levels[k - 1], &levels[k]) {
                return Err(Error::Interlacing(format!(
                    "level {} ({}) does not interlace level {} ({})",
                    k,
                    levels[k - 1],
                    k + 1,
                    levels[k]
                )));
            }
        }
        Ok(Self { levels })
    }

    /// The all-empty array with `n` levels.
    pub fn empty(n: usize) -> Self {
        Self {
            levels: vec![Partition::empty(); n],
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level `k` (1-based).
    pub fn level(&self, k: usize) -> &Partition {
        &self.levels[k - 1]
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn top(&self) -> &Partition {
        self.levels.last().expect("nonempty array")
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.levels.clone()).is_ok()
    }
}

impl fmt::Display for InterlacingArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, lam) in self.levels.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write_rows(f, &lam.padded(k + 1))?;
        }
        Ok(())
    }
}

impl FromStr for InterlacingArray {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(';')
            .map(Partition::from_str)
            .collect::<Result<Vec<_>>>()?;
        InterlacingArray::new(levels)
    }
}

/// A point of the closed Weyl chamber y₁ ≤ … ≤ y_N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylPoint {
    coords: Vec<f64>,
}

impl WeylPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        if coords.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidPoint(format!("{coords:?} is not sorted")));
        }
        Ok(Self { coords })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coords: vec![0.0; n],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.coords
    }

    /// Smallest gap between consecutive coordinates (∞ for a single point).
    pub fn min_gap(&self) -> f64 {
        self.coords
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// A real Gelfand–Tsetlin array: level k holds k sorted reals and
/// y^{k-1}_{i-1} ≤ y^k_i ≤ y^{k-1}_i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    levels: Vec<Vec<f64>>,
}

impl ConePoint {
    /// Validates cone membership with slack `tol` (0 means the closed cone exactly).
    pub fn with_tolerance(levels: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidPoint(
                "cone point needs at least one level".into(),
            ));
        }
        for (k, lvl) in levels.iter().enumerate() {
            if lvl.len() != k + 1 {
                return Err(Error::InvalidPoint(format!(
                    "level {} has {} entries",
                    k + 1,
                    lvl.len()
                )));
            }
            if lvl.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPoint(format!(
                    "non-finite entry on level {}",
                    k + 1
                )));
            }
        }
        let p = Self { levels };
        if !p.in_cone(tol) {
            return Err(Error::InvalidPoint(format!(
                "{:?} violates interlacing",
                p.levels
            )));
        }
        Ok(p)
    }

    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(levels, 0.0)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            levels: (1..=n).map(|k| vec![0.0; k]).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level `k` (1-based).
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn top(&self) -> &[f64] {
        self.levels.last().expect("nonempty cone point")
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    /// Closed-cone membership with slack `tol`.
    pub fn in_cone(&self, tol: f64) -> bool {
        levels_in_cone(&self.levels, tol)
    }

    /// Open-cone membership: every interlacing inequality strict.
    pub fn in_open_cone(&self) -> bool {
        levels_in_open_cone(&self.levels)
    }

    /// All entries flattened level by level.
    pub fn flatten(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }
}

pub(crate) fn levels_in_cone(levels: &[Vec<f64>], tol: f64) -> bool {
    for k in 1..levels.len() {
        let (lower, upper) = (&levels[k - 1], &levels[k]);
        for (i, &u) in lower.iter().enumerate() {
            if u < upper[i] - tol || u > upper[i + 1] + tol {
                return false;
            }
        }
    }
    levels
        .iter()
        .all(|l| l.windows(2).all(|w| w[0] <= w[1] + tol))
}

pub(crate) fn levels_in_open_cone(levels: &[Vec<f64>]) -> bool {
    for k in 1..levels.len() {
        let (lower, upper) = (&levels[k - 1], &levels[k]);
        for (i, &u) in lower.iter().enumerate() {
            if u <= upper[i] || u >= upper[i + 1] {
                return false;
            }
        }
    }
    levels.iter().all(|l| l.windows(2).all(|w| w[0] < w[1]))
}

/// Diffusive scaling: chain time s = t/(θε), rows shifted by t/ε and scaled by √ε.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    epsilon: f64,
    time: f64,
    theta: f64,
}

impl ScalingParams {
    pub fn new(epsilon: f64, time: f64, theta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "time must be nonnegative, got {time}"
            )));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "theta must be positive, got {theta}"
            )));
        }
        Ok(Self {
            epsilon,
            time,
            theta,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Chain time s = ε⁻¹ t / θ.
    pub fn chain_time(&self) -> f64 {
        self.time / (self.epsilon * self.theta)
    }

    /// Row shift ε⁻¹ t.
    pub fn shift(&self) -> f64 {
        self.time / self.epsilon
    }

    pub fn scale(&self) -> f64 {
        self.epsilon.sqrt()
    }

    pub fn with_time(&self, time: f64) -> Result<Self> {
        Self::new(self.epsilon, time, self.theta)
    }

    /// Inverse map of a single coordinate: ε⁻¹ t + ε^{-1/2} y.
    pub fn unscale(&self, y: f64) -> f64 {
        self.shift() + y / self.scale()
    }
}

/// y_i = √ε (λ_{level+1-i} − t/ε), i = 1..level, nondecreasing.
pub fn rescale_level(lambda: &Partition, p: &ScalingParams, level: usize) -> Result<Vec<f64>> {
    if lambda.length() > level {
        return Err(Error::TooManyRows {
            diagram: lambda.to_string(),
            level,
        });
    }
    let (shift, scale) = (p.shift(), p.scale());
    Ok((1..=level)
        .map(|i| scale * (f64::from(lambda.row(level + 1 - i)) - shift))
        .collect())
}

/// Applies [`rescale_level`] level by level.
pub fn rescale_array(arr: &InterlacingArray, p: &ScalingParams) -> ConePoint {
    let levels = arr
        .levels()
        .iter()
        .enumerate()
        .map(|(k, lam)| rescale_level(lam, p, k + 1).expect("array levels respect row bounds"))
        .collect();
    ConePoint { levels }
}

/// All partitions of `size` with at most `max_rows` rows, in reverse lexicographic order.
pub fn partitions(size: u32, max_rows: usize) -> Vec<Partition> {
    fn rec(
        remaining: u32,
        cap: u32,
        rows_left: usize,
        acc: &mut Vec<u32>,
        out: &mut Vec<Partition>,
    ) {
        if remaining == 0 {
            out.push(Partition { rows: acc.clone() });
            return;
        }
        if rows_left == 0 {
            return;
        }
        for part in (1..=cap.min(remaining)).rev() {
            acc.push(part);
            rec(remaining - part, part, rows_left - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(size, size, max_rows, &mut Vec::new(), &mut out);
    out
}

/// All μ with μ ≺ λ (μ then has at most ℓ(λ) rows, and at most `max_rows`).
pub fn predecessors(lambda: &Partition, max_rows: usize) -> Vec<Partition> {
    let n = lambda.length().min(max_rows);
    let mut out = Vec::new();
    let mut acc = Vec::with_capacity(n);
    fn rec(lambda: &Partition, i: usize, n: usize, acc: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if i > n {
            out.push(Partition::new(acc.clone()).expect("interlacing rows are non-increasing"));
            return;
        }
        for v in lambda.row(i + 1)..=lambda.row(i) {
            acc.push(v);
            rec(lambda, i + 1, n, acc, out);
            acc.pop();
        }
    }
    if lambda.length() > max_rows + 1 {
        return out;
    }
    rec(lambda, 1, n, &mut acc, &mut out);
    out
}
