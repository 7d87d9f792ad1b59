//! Finite point sets in R^d and the metric set operations built on them.
//!
//! A [`CompactSet`] is a finite, nonempty, duplicate-free collection of points
//! kept in lexicographic order. With finite sets every supremum and infimum in
//! the Hausdorff metric is attained over finitely many pairs, so distances,
//! projections, metric pairs and metric chains are all computed exactly.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used to decide projection ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default upper bound on the number of enumerated metric chains.
pub const DEFAULT_CHAIN_CAP: usize = 10_000;

/// The norm `|·|` used on R^d. Fixed for the lifetime of a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Max,
    Sum,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Norm::Max => v.iter().fold(0.0, |m, c| m.max(c.abs())),
            Norm::Sum => v.iter().map(|c| c.abs()).sum(),
        }
    }

    pub fn dist(self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self {
            Norm::Euclidean => u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Norm::Max => u.iter().zip(v).fold(0.0, |m, (a, b)| m.max((a - b).abs())),
            Norm::Sum => u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::Euclidean => "euclidean",
            Norm::Max => "max",
            Norm::Sum => "sum",
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Norm::Euclidean),
            "max" | "linf" => Ok(Norm::Max),
            "sum" | "l1" => Ok(Norm::Sum),
            other => Err(invalid(format!("unknown norm `{other}`"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point of R^d with finite coordinates.
#[derive(Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Point(coords))
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self, norm: Norm) -> f64 {
        norm.of(&self.0)
    }

    pub fn dist(&self, other: &Point, norm: Norm) -> f64 {
        norm.dist(&self.0, &other.0)
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Point) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }

    /// Coordinatewise comparison within an absolute tolerance.
    pub fn approx_eq(&self, other: &Point, tol: f64) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl Eq for Point {}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lex_cmp(other)
    }
}

impl Hash for Point {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for c in &self.0 {
            // +0.0 and -0.0 compare equal, so they must hash equal
            let c = if *c == 0.0 { 0.0f64 } else { *c };
            c.to_bits().hash(state);
        }
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            f.debug_list().entries(&self.0).finish()
        }
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Point::new(coords).map_err(serde::de::Error::custom)
    }
}

/// A finite nonempty set of points of uniform dimension, sorted
/// lexicographically and free of exact duplicates.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CompactSet {
    points: Vec<Point>,
}

impl CompactSet {
    pub fn new(mut points: Vec<Point>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptySet)?.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        points.sort();
        points.dedup();
        Ok(CompactSet { points })
    }

    pub fn singleton(p: Point) -> Self {
        CompactSet { points: vec![p] }
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        let pts = xs
            .iter()
            .map(|&x| Point::new(vec![x]))
            .collect::<Result<Vec<_>>>()?;
        CompactSet::new(pts)
    }

    pub fn from_coords(rows: Vec<Vec<f64>>) -> Result<Self> {
        let pts = rows.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        CompactSet::new(pts)
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.points.binary_search(p).is_ok()
    }

    /// `|A| = haus(A, {0})`
    pub fn magnitude(&self, norm: Norm) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.norm(norm)))
    }

    /// Scalars of a one-dimensional set, in increasing order.
    pub fn scalars(&self) -> Option<Vec<f64>> {
        (self.dim() == 1).then(|| self.points.iter().map(|p| p.0[0]).collect())
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }

    /// Index of the lexicographically smallest nearest point, and its distance.
    pub(crate) fn nearest(&self, p: &Point, norm: Norm) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        let mut dists = Vec::with_capacity(self.points.len());
        for (i, a) in self.points.iter().enumerate() {
            let d = p.dist(a, norm);
            dists.push(d);
            if d < best.1 {
                best = (i, d);
            }
        }
        // first index within the tie band is the lexicographic minimum
        let i = dists
            .iter()
            .position(|&d| d <= best.1 + TIE_TOLERANCE)
            .unwrap_or(best.0);
        (i, best.1)
    }

    /// Indices of `Π_A(p)` in increasing (lexicographic) order.
    pub(crate) fn projection_indices(&self, p: &Point, norm: Norm) -> Vec<usize> {
        let dists: Vec<f64> = self.points.iter().map(|a| p.dist(a, norm)).collect();
        let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
        dists
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= min + TIE_TOLERANCE)
            .map(|(i, _)| i)
            .collect()
    }
}

impl fmt::Debug for CompactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.points).finish()
    }
}

impl Serialize for CompactSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.points.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CompactSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        CompactSet::from_coords(rows).map_err(serde::de::Error::custom)
    }
}

/// A value together with a flag telling whether an enumeration cap cut it short.
#[derive(Debug, Clone, PartialEq)]
pub struct Capped<T> {
    pub value: T,
    pub truncated: bool,
}

/// One point per input set, consecutive entries forming metric pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetricChain {
    pub entries: Vec<Point>,
}

impl MetricChain {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks membership of every entry and the metric-pair condition on
    /// consecutive entries.
    pub fn validate(&self, sets: &[CompactSet], norm: Norm) -> Result<()> {
        if self.entries.len() != sets.len() {
            return Err(Error::InvalidChain(format!(
                "{} entries for {} sets",
                self.entries.len(),
                sets.len()
            )));
        }
        for (i, (p, a)) in self.entries.iter().zip(sets).enumerate() {
            if dist_point_set(p, a, norm)? > TIE_TOLERANCE {
                return Err(Error::InvalidChain(format!("entry {i} is not in its set")));
            }
        }
        for i in 0..self.entries.len().saturating_sub(1) {
            let (a, b) = (&self.entries[i], &self.entries[i + 1]);
            if !is_metric_pair(a, b, &sets[i], &sets[i + 1], norm)? {
                return Err(Error::InvalidChain(format!(
                    "entries {i} and {} are not a metric pair",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

fn check_pair(p: &Point, a: &CompactSet) -> Result<()> {
    a.check_dim(p.dim())
}

fn check_sets(a: &CompactSet, b: &CompactSet) -> Result<()> {
    a.check_dim(b.dim())
}

/// `dist(p, A) = min_{a∈A} |p − a|`
pub fn dist_point_set(p: &Point, a: &CompactSet, norm: Norm) -> Result<f64> {
    check_pair(p, a)?;
    Ok(a.iter().map(|q| p.dist(q, norm)).fold(f64::INFINITY, f64::min))
}

/// The set of nearest points `Π_A(p)`; ties within [`TIE_TOLERANCE`] are kept.
pub fn project(p: &Point, a: &CompactSet, norm: Norm) -> Result<CompactSet> {
    check_pair(p, a)?;
    let pts = a
        .projection_indices(p, norm)
        .into_iter()
        .map(|i| a.points[i].clone())
        .collect();
    Ok(CompactSet { points: pts })
}

/// One-sided Hausdorff excess `sup_{a∈A} dist(a, B)`.
pub fn excess(a: &CompactSet, b: &CompactSet, norm: Norm) -> Result<f64> {
    check_sets(a, b)?;
    Ok(a.iter().fold(0.0, |m, p| {
        m.max(b.iter().map(|q| p.dist(q, norm)).fold(f64::INFINITY, f64::min))
    }))
}

/// Exact Hausdorff distance between two finite sets.
pub fn hausdorff(a: &CompactSet, b: &CompactSet, norm: Norm) -> Result<f64> {
    Ok(excess(a, b, norm)?.max(excess(b, a, norm)?))
}

/// `(a, b)` is a metric pair of `(A, B)` when `a ∈ Π_A(b)` or `b ∈ Π_B(a)`.
pub fn is_metric_pair(
    a: &Point,
    b: &Point,
    set_a: &CompactSet,
    set_b: &CompactSet,
    norm: Norm,
) -> Result<bool> {
    check_pair(a, set_a)?;
    check_pair(b, set_b)?;
    let d = a.dist(b, norm);
    Ok(d <= dist_point_set(b, set_a, norm)? + TIE_TOLERANCE
        || d <= dist_point_set(a, set_b, norm)? + TIE_TOLERANCE)
}

/// For every index of `a`, the sorted indices of `b` forming a metric pair with it.
fn pair_successors(a: &CompactSet, b: &CompactSet, norm: Norm) -> Vec<Vec<usize>> {
    let mut succ: Vec<Vec<usize>> = a
        .iter()
        .map(|p| b.projection_indices(p, norm))
        .collect();
    for (j, q) in b.iter().enumerate() {
        for i in a.projection_indices(q, norm) {
            succ[i].push(j);
        }
    }
    for s in &mut succ {
        s.sort_unstable();
        s.dedup();
    }
    succ
}

/// All metric pairs of `(A, B)`, sorted lexicographically.
pub fn metric_pairs(a: &CompactSet, b: &CompactSet, norm: Norm) -> Result<Vec<(Point, Point)>> {
    check_sets(a, b)?;
    let succ = pair_successors(a, b, norm);
    Ok(succ
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
        .map(|(i, j)| (a.points[i].clone(), b.points[j].clone()))
        .collect())
}

fn check_chain_input(sets: &[CompactSet], cap: usize) -> Result<()> {
    if cap == 0 {
        return Err(invalid("chain cap must be positive"));
    }
    if sets.len() < 2 {
        return Err(invalid("metric chains need at least two sets"));
    }
    let dim = sets[0].dim();
    sets.iter().try_for_each(|s| s.check_dim(dim))
}

/// Depth-first walk over index paths of `CH(A_0, …, A_n)` in lexicographic
/// order. Returns `true` when the cap stopped the walk early.
fn walk_chains(
    sets: &[CompactSet],
    cap: usize,
    norm: Norm,
    mut visit: impl FnMut(&[usize]),
) -> bool {
    let succ: Vec<Vec<Vec<usize>>> = sets
        .windows(2)
        .map(|w| pair_successors(&w[0], &w[1], norm))
        .collect();
    let depth = sets.len();
    let mut path: Vec<usize> = Vec::with_capacity(depth);
    // cursor[k] = position within the candidate list at depth k
    let mut cursor: Vec<usize> = vec![0; depth];
    let mut count = 0usize;
    loop {
        let k = path.len();
        let candidates: &[usize] = if k == 0 {
            // all of A_0
            &[]
        } else {
            &succ[k - 1][path[k - 1]]
        };
        let limit = if k == 0 { sets[0].len() } else { candidates.len() };
        if cursor[k] < limit {
            let next = if k == 0 { cursor[0] } else { candidates[cursor[k]] };
            cursor[k] += 1;
            path.push(next);
            if path.len() == depth {
                if count == cap {
                    return true;
                }
                visit(&path);
                count += 1;
                path.pop();
            } else {
                cursor[path.len()] = 0;
            }
        } else {
            if k == 0 {
                return false;
            }
            path.pop();
        }
    }
}

/// Enumerates `CH(A_0, …, A_n)` depth-first in lexicographic order, stopping
/// after `cap` chains.
pub fn metric_chains(
    sets: &[CompactSet],
    cap: usize,
    norm: Norm,
) -> Result<Capped<Vec<MetricChain>>> {
    check_chain_input(sets, cap)?;
    let mut chains = Vec::new();
    let truncated = walk_chains(sets, cap, norm, |path| {
        chains.push(MetricChain {
            entries: path
                .iter()
                .zip(sets)
                .map(|(&i, s)| s.points[i].clone())
                .collect(),
        })
    });
    Ok(Capped {
        value: chains,
        truncated,
    })
}

/// Builds a metric chain whose `j`-th entry is `a`, extending left and right
/// by greedy projection onto the neighbouring set (lexicographic minimum among
/// ties).
pub fn metric_chain_through(
    sets: &[CompactSet],
    j: usize,
    a: &Point,
    norm: Norm,
) -> Result<MetricChain> {
    check_chain_input(sets, 1)?;
    if j >= sets.len() {
        return Err(invalid(format!("anchor index {j} out of range")));
    }
    check_pair(a, &sets[j])?;
    let (idx, d) = sets[j].nearest(a, norm);
    if d > TIE_TOLERANCE {
        return Err(Error::NotAMember);
    }
    let mut entries = vec![Point::origin(a.dim()); sets.len()];
    entries[j] = sets[j].points[idx].clone();
    for i in j + 1..sets.len() {
        let (k, _) = sets[i].nearest(&entries[i - 1], norm);
        entries[i] = sets[i].points[k].clone();
    }
    for i in (0..j).rev() {
        let (k, _) = sets[i].nearest(&entries[i + 1], norm);
        entries[i] = sets[i].points[k].clone();
    }
    Ok(MetricChain { entries })
}

fn check_combination(lambdas: &[f64], sets: &[CompactSet]) -> Result<()> {
    if lambdas.len() != sets.len() {
        return Err(invalid(format!(
            "{} coefficients for {} sets",
            lambdas.len(),
            sets.len()
        )));
    }
    if sets.is_empty() {
        return Err(Error::EmptySet);
    }
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite);
    }
    let dim = sets[0].dim();
    sets.iter().try_for_each(|s| s.check_dim(dim))
}

/// `⊕ λ_i A_i`: the weighted sums over all (up to `cap`) metric chains.
pub fn metric_linear_combination(
    lambdas: &[f64],
    sets: &[CompactSet],
    cap: usize,
    norm: Norm,
) -> Result<Capped<CompactSet>> {
    check_combination(lambdas, sets)?;
    if sets.len() == 1 {
        let pts = sets[0].iter().map(|p| p.scale(lambdas[0])).collect();
        return Ok(Capped {
            value: CompactSet::new(pts)?,
            truncated: false,
        });
    }
    check_chain_input(sets, cap)?;
    let dim = sets[0].dim();
    let mut sums = Vec::new();
    let truncated = walk_chains(sets, cap, norm, |path| {
        let mut acc = Point::origin(dim);
        for ((&i, s), &l) in path.iter().zip(sets).zip(lambdas) {
            acc.axpy(l, &s.points[i]);
        }
        sums.push(acc);
    });
    Ok(Capped {
        value: CompactSet::new(sums)?,
        truncated,
    })
}

/// `Σ λ_i A_i` over all selections `a_i ∈ A_i` (full Cartesian sum).
pub fn minkowski_linear_combination(lambdas: &[f64], sets: &[CompactSet]) -> Result<CompactSet> {
    check_combination(lambdas, sets)?;
    let dim = sets[0].dim();
    let mut acc = vec![Point::origin(dim)];
    for (s, &l) in sets.iter().zip(lambdas) {
        let mut next = Vec::with_capacity(acc.len() * s.len());
        for base in &acc {
            for p in s.iter() {
                let mut q = base.clone();
                q.axpy(l, p);
                next.push(q);
            }
        }
        next.sort();
        next.dedup();
        acc = next;
    }
    CompactSet::new(acc)
}

/// Finite-sequence surrogate for the upper Kuratowski limit.
///
/// Looks at the last `window` sets; a point of their union survives when it is
/// within `eps` of at least half of them. Diagnostic only.
pub fn kuratowski_limsup(
    sequence: &[CompactSet],
    eps: f64,
    window: usize,
    norm: Norm,
) -> Result<Option<CompactSet>> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if sequence.is_empty() {
        return Err(Error::EmptySet);
    }
    if window == 0 {
        return Err(invalid("window must be positive"));
    }
    let dim = sequence[0].dim();
    sequence.iter().try_for_each(|s| s.check_dim(dim))?;
    let tail = &sequence[sequence.len().saturating_sub(window)..];
    let needed = tail.len().div_ceil(2);
    let mut survivors = Vec::new();
    for p in tail.iter().flat_map(|s| s.iter()) {
        let hits = tail
            .iter()
            .filter(|s| s.iter().any(|q| p.dist(q, norm) <= eps))
            .count();
        if hits >= needed {
            survivors.push(p.clone());
        }
    }
    if survivors.is_empty() {
        Ok(None)
    } else {
        CompactSet::new(survivors).map(Some)
    }
}
