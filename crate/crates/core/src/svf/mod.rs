//! Functions on a compact interval with values in a metric space: set-valued
//! functions, vector functions and step tables, plus the variation machinery
//! and local moduli defined for them.

pub mod catalog;
mod moduli;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sets::{hausdorff, CompactSet, Norm, Point};

pub use moduli::{
    lipschitz_probe, local_modulus, quasi_modulus, quasi_modulus_left, quasi_modulus_right,
    sup_norm, total_variation, variation, variation_function, LipschitzEstimate, LipschitzMode,
    LipschitzProbe, VariationFunction, VARIATION_TOLERANCE,
};

/// A closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(format!("[{a}, {b}] is not a proper interval")));
        }
        Ok(Interval { a, b })
    }

    pub fn unit() -> Self {
        Interval { a: 0.0, b: 1.0 }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.a, self.b)
    }
}

/// A partition `a = x_0 < x_1 < … < x_n = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Partition {
    nodes: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Partition {
    type Error = Error;

    fn try_from(nodes: Vec<f64>) -> Result<Self> {
        Partition::new(nodes)
    }
}

impl From<Partition> for Vec<f64> {
    fn from(p: Partition) -> Self {
        p.nodes
    }
}

/// Hard ceiling on partition sizes produced by refinement loops.
pub const MAX_PARTITION_NODES: usize = (1 << 20) + 1;

impl Partition {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPartition("need at least two nodes".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("nodes must be strictly increasing".into()));
        }
        Ok(Partition { nodes })
    }

    /// `n` equal subintervals of `domain`.
    pub fn uniform(domain: Interval, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("need at least one subinterval".into()));
        }
        let h = domain.len() / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| domain.a + i as f64 * h).collect();
        nodes[n] = domain.b;
        Partition::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> Interval {
        Interval {
            a: self.nodes[0],
            b: *self.nodes.last().unwrap(),
        }
    }

    /// `|χ| = max gap`
    pub fn mesh(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Bisects every subinterval.
    pub fn refine_dyadic(&self) -> Result<Self> {
        if 2 * self.nodes.len() - 1 > MAX_PARTITION_NODES {
            return Err(Error::InvalidPartition(format!(
                "refinement would exceed {MAX_PARTITION_NODES} nodes"
            )));
        }
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        Ok(Partition { nodes })
    }

    /// Adds the given points (clipped to the domain) as extra nodes.
    pub fn with_points(&self, extra: &[f64]) -> Self {
        let dom = self.domain();
        let mut nodes = self.nodes.clone();
        nodes.extend(extra.iter().filter(|x| x.is_finite()).map(|&x| dom.clamp(x)));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Partition { nodes }
    }

    /// Index `i` of the piece `[x_i, x_{i+1})` holding `x`; the last node for
    /// `x ≥ b` and `0` for `x < a`.
    pub fn locate(&self, x: f64) -> usize {
        self.nodes.partition_point(|&t| t <= x).saturating_sub(1)
    }

    /// Index of the last node strictly left of `x` (or `0`).
    pub fn locate_left(&self, x: f64) -> usize {
        self.nodes.partition_point(|&t| t < x).saturating_sub(1)
    }

    /// Index of the node equal to `x`, if any.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.nodes.binary_search_by(|t| t.total_cmp(&x)).ok()
    }
}

/// Abscissa offset used to approximate one-sided limits of closed-form
/// functions: `min(|χ|/2, 1e-6 (b − a))`.
pub fn limit_offset(chi: &Partition) -> f64 {
    (0.5 * chi.mesh()).min(1e-6 * chi.domain().len())
}

/// A function `[a, b] → X` into a metric space, sampled pointwise.
///
/// Outside `[a, b]` every implementation extends by the endpoint values.
pub trait IntervalFunction {
    type Value: Clone;

    fn domain(&self) -> Interval;

    fn value(&self, x: f64) -> Self::Value;

    fn distance(&self, u: &Self::Value, v: &Self::Value, norm: Norm) -> f64;

    /// `|u|`, the distance to the origin of the value space.
    fn magnitude(&self, u: &Self::Value, norm: Norm) -> f64;

    /// `f(x−)`; closed-form implementations evaluate at `x − h_lim`.
    fn left_limit(&self, x: f64, chi: &Partition) -> Self::Value {
        self.value(x - limit_offset(chi))
    }

    /// `f(x+)`; closed-form implementations evaluate at `x + h_lim`.
    fn right_limit(&self, x: f64, chi: &Partition) -> Self::Value {
        self.value(x + limit_offset(chi))
    }

    /// Largest pairwise distance among `values`.
    fn diameter(&self, values: &[Self::Value], norm: Norm) -> f64 {
        let mut d = 0.0f64;
        for (i, u) in values.iter().enumerate() {
            for v in &values[i + 1..] {
                d = d.max(self.distance(u, v, norm));
            }
        }
        d
    }
}

/// Right-continuous step function on a partition: `values[i]` on
/// `[x_i, x_{i+1})` and `values[n]` at `x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<V> {
    partition: Partition,
    values: Vec<V>,
}

impl<V: Clone> Step<V> {
    pub fn new(partition: Partition, values: Vec<V>) -> Result<Self> {
        if partition.len() != values.len() {
            return Err(invalid(format!(
                "{} values for {} nodes",
                values.len(),
                partition.len()
            )));
        }
        Ok(Step { partition, values })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn at(&self, x: f64) -> &V {
        &self.values[self.partition.locate(x)]
    }

    pub fn left_of(&self, x: f64) -> &V {
        &self.values[self.partition.locate_left(x)]
    }
}

impl IntervalFunction for Step<f64> {
    type Value = f64;

    fn domain(&self) -> Interval {
        self.partition.domain()
    }

    fn value(&self, x: f64) -> f64 {
        *self.at(x)
    }

    fn distance(&self, u: &f64, v: &f64, _: Norm) -> f64 {
        (u - v).abs()
    }

    fn magnitude(&self, u: &f64, _: Norm) -> f64 {
        u.abs()
    }

    fn left_limit(&self, x: f64, _: &Partition) -> f64 {
        *self.left_of(x)
    }

    fn right_limit(&self, x: f64, _: &Partition) -> f64 {
        *self.at(x)
    }

    fn diameter(&self, values: &[f64], _: Norm) -> f64 {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if values.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

impl IntervalFunction for Step<Point> {
    type Value = Point;

    fn domain(&self) -> Interval {
        self.partition.domain()
    }

    fn value(&self, x: f64) -> Point {
        self.at(x).clone()
    }

    fn distance(&self, u: &Point, v: &Point, norm: Norm) -> f64 {
        u.dist(v, norm)
    }

    fn magnitude(&self, u: &Point, norm: Norm) -> f64 {
        u.norm(norm)
    }

    fn left_limit(&self, x: f64, _: &Partition) -> Point {
        self.left_of(x).clone()
    }

    fn right_limit(&self, x: f64, _: &Partition) -> Point {
        self.at(x).clone()
    }
}

type PointFn = Arc<dyn Fn(f64) -> Point + Send + Sync>;
type SetFn = Arc<dyn Fn(f64) -> CompactSet + Send + Sync>;

/// A vector-valued function `[a, b] → R^d` given by a closure.
///
/// Scalars are the case `d = 1`. Optional breakpoints mark abscissae where
/// the function is not smooth; quadrature panels are aligned to them.
#[derive(Clone)]
pub struct RealFunction {
    domain: Interval,
    dim: usize,
    f: PointFn,
    breakpoints: Vec<f64>,
    poly_degree: Option<usize>,
}

impl fmt::Debug for RealFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealFunction")
            .field("domain", &self.domain)
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints.len())
            .finish()
    }
}

impl RealFunction {
    pub fn vector(
        domain: Interval,
        dim: usize,
        f: impl Fn(f64) -> Point + Send + Sync + 'static,
    ) -> Self {
        RealFunction {
            domain,
            dim,
            f: Arc::new(f),
            breakpoints: Vec::new(),
            poly_degree: None,
        }
    }

    pub fn scalar(domain: Interval, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::vector(domain, 1, move |x| Point::scalar(f(x)))
    }

    /// `e_i(t) = t^i`
    pub fn monomial(domain: Interval, i: usize) -> Self {
        let mut f = Self::scalar(domain, move |t| t.powi(i as i32));
        f.poly_degree = Some(i);
        f
    }

    pub fn with_breakpoints(mut self, mut bps: Vec<f64>) -> Self {
        bps.retain(|x| x.is_finite());
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        self.breakpoints = bps;
        self
    }

    pub fn with_poly_degree(mut self, degree: usize) -> Self {
        self.poly_degree = Some(degree);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn poly_degree(&self) -> Option<usize> {
        self.poly_degree
    }

    pub fn eval(&self, x: f64) -> Point {
        (self.f)(self.domain.clamp(x))
    }
}

impl From<&Step<Point>> for RealFunction {
    fn from(step: &Step<Point>) -> Self {
        let s = step.clone();
        let dim = s.values[0].dim();
        let bps = s.partition.nodes().to_vec();
        RealFunction::vector(s.partition.domain(), dim, move |x| s.at(x).clone())
            .with_breakpoints(bps)
            .with_poly_degree(0)
    }
}

impl IntervalFunction for RealFunction {
    type Value = Point;

    fn domain(&self) -> Interval {
        self.domain
    }

    fn value(&self, x: f64) -> Point {
        self.eval(x)
    }

    fn distance(&self, u: &Point, v: &Point, norm: Norm) -> f64 {
        u.dist(v, norm)
    }

    fn magnitude(&self, u: &Point, norm: Norm) -> f64 {
        u.norm(norm)
    }
}

#[derive(Clone)]
enum Repr {
    Grid(Step<CompactSet>),
    ClosedForm(SetFn),
}

/// A set-valued function `F: [a, b] → K(R^d)`.
///
/// Grid-backed functions are piecewise constant, `F(x) = F_i` on
/// `[x_i, x_{i+1})`, so their one-sided limits are exact. Closed-form
/// functions are arbitrary pure closures.
#[derive(Clone)]
pub struct SetValuedFunction {
    name: String,
    domain: Interval,
    dim: usize,
    repr: Repr,
}

impl fmt::Debug for SetValuedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetValuedFunction")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("dim", &self.dim)
            .field("grid_backed", &self.is_grid_backed())
            .finish()
    }
}

/// On-disk form of a grid-backed set-valued function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub a: f64,
    pub b: f64,
    pub grid: Vec<f64>,
    pub sets: Vec<CompactSet>,
}

impl SetValuedFunction {
    pub fn closed_form(
        name: impl Into<String>,
        domain: Interval,
        f: impl Fn(f64) -> CompactSet + Send + Sync + 'static,
    ) -> Self {
        let dim = f(domain.a).dim();
        SetValuedFunction {
            name: name.into(),
            domain,
            dim,
            repr: Repr::ClosedForm(Arc::new(f)),
        }
    }

    /// Piecewise-constant function with `F = sets[i]` on `[grid[i], grid[i+1])`.
    /// `grid[0]` must equal `a` and the last grid point must not exceed `b`.
    pub fn grid(
        name: impl Into<String>,
        domain: Interval,
        grid: Vec<f64>,
        sets: Vec<CompactSet>,
    ) -> Result<Self> {
        if grid.first() != Some(&domain.a) {
            return Err(Error::InvalidPartition("grid must start at a".into()));
        }
        if grid.len() != sets.len() {
            return Err(invalid(format!(
                "{} sets for {} grid points",
                sets.len(),
                grid.len()
            )));
        }
        if *grid.last().unwrap() > domain.b {
            return Err(Error::InvalidPartition("grid exceeds b".into()));
        }
        let dim = sets[0].dim();
        if let Some(bad) = sets.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        // a one-point grid still needs a proper partition internally
        let (nodes, values) = if grid.len() == 1 {
            (vec![domain.a, domain.b], vec![sets[0].clone(), sets[0].clone()])
        } else {
            (grid, sets)
        };
        let step = Step::new(Partition::new(nodes)?, values)?;
        Ok(SetValuedFunction {
            name: name.into(),
            domain,
            dim,
            repr: Repr::Grid(step),
        })
    }

    pub fn from_grid_file(name: impl Into<String>, file: GridFile) -> Result<Self> {
        let domain = Interval::new(file.a, file.b)?;
        Self::grid(name, domain, file.grid, file.sets)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: GridFile = serde_json::from_str(&text)?;
        Self::from_grid_file(path.display().to_string(), file)
    }

    pub fn to_grid_file(&self) -> Option<GridFile> {
        match &self.repr {
            Repr::Grid(step) => Some(GridFile {
                a: self.domain.a,
                b: self.domain.b,
                grid: step.partition.nodes().to_vec(),
                sets: step.values.clone(),
            }),
            Repr::ClosedForm(_) => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_grid_backed(&self) -> bool {
        matches!(self.repr, Repr::Grid(_))
    }

    /// Grid points of a grid-backed function.
    pub fn grid_nodes(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Grid(step) => Some(step.partition.nodes()),
            Repr::ClosedForm(_) => None,
        }
    }

    /// The natural partition of a grid-backed function: its grid, closed by `b`.
    pub fn grid_partition(&self) -> Option<Partition> {
        self.grid_nodes().map(|g| {
            let mut nodes = g.to_vec();
            if *nodes.last().unwrap() < self.domain.b {
                nodes.push(self.domain.b);
            }
            Partition { nodes }
        })
    }

    pub fn eval(&self, x: f64) -> CompactSet {
        let x = self.domain.clamp(x);
        match &self.repr {
            Repr::Grid(step) => step.at(x).clone(),
            Repr::ClosedForm(f) => f(x),
        }
    }

    /// The fibers `F(x_0), …, F(x_n)` on a partition.
    pub fn fibers(&self, chi: &Partition) -> Vec<CompactSet> {
        chi.nodes().iter().map(|&x| self.eval(x)).collect()
    }

    /// The singleton-valued function `x ↦ {f(x)}`.
    pub fn from_real(name: impl Into<String>, f: RealFunction) -> Self {
        let domain = f.domain;
        Self::closed_form(name, domain, move |x| CompactSet::singleton(f.eval(x)))
    }
}

impl IntervalFunction for SetValuedFunction {
    type Value = CompactSet;

    fn domain(&self) -> Interval {
        self.domain
    }

    fn value(&self, x: f64) -> CompactSet {
        self.eval(x)
    }

    fn distance(&self, u: &CompactSet, v: &CompactSet, norm: Norm) -> f64 {
        hausdorff(u, v, norm).expect("fibers share one dimension")
    }

    fn magnitude(&self, u: &CompactSet, norm: Norm) -> f64 {
        u.magnitude(norm)
    }

    fn left_limit(&self, x: f64, chi: &Partition) -> CompactSet {
        match &self.repr {
            Repr::Grid(step) => step.left_of(self.domain.clamp(x)).clone(),
            Repr::ClosedForm(_) => self.eval(x - limit_offset(chi)),
        }
    }

    fn right_limit(&self, x: f64, chi: &Partition) -> CompactSet {
        match &self.repr {
            Repr::Grid(step) => step.at(self.domain.clamp(x)).clone(),
            Repr::ClosedForm(_) => self.eval(x + limit_offset(chi)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, f64::NAN]).is_err());
        let p = Partition::uniform(Interval::unit(), 4).unwrap();
        assert_eq!(p.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.mesh(), 0.25);
        assert_eq!(p.locate(0.5), 2);
        assert_eq!(p.locate(0.49), 1);
        assert_eq!(p.locate(1.0), 4);
        assert_eq!(p.locate(-3.0), 0);
        assert_eq!(p.locate_left(0.5), 1);
        assert_eq!(p.node_index(0.75), Some(3));
        assert_eq!(p.node_index(0.7), None);
        let r = p.refine_dyadic().unwrap();
        assert_eq!(r.len(), 9);
        assert_eq!(r.mesh(), 0.125);
    }

    #[test]
    fn grid_backed_evaluation_and_limits() {
        let sets = vec![
            CompactSet::from_scalars(&[0.0]).unwrap(),
            CompactSet::from_scalars(&[-1.0, 1.0]).unwrap(),
            CompactSet::from_scalars(&[2.0]).unwrap(),
        ];
        let f = SetValuedFunction::grid("g", Interval::unit(), vec![0.0, 0.5, 1.0], sets.clone())
            .unwrap();
        let chi = f.grid_partition().unwrap();
        assert_eq!(f.eval(0.2), sets[0]);
        assert_eq!(f.eval(0.5), sets[1]);
        assert_eq!(f.eval(0.99), sets[1]);
        assert_eq!(f.eval(1.0), sets[2]);
        assert_eq!(f.eval(7.0), sets[2]);
        assert_eq!(f.left_limit(0.5, &chi), sets[0]);
        assert_eq!(f.right_limit(0.5, &chi), sets[1]);
        assert_eq!(f.left_limit(1.0, &chi), sets[1]);
    }

    #[test]
    fn grid_validation() {
        let one = CompactSet::from_scalars(&[0.0]).unwrap();
        let unit = Interval::unit();
        assert!(SetValuedFunction::grid("g", unit, vec![0.1, 0.5], vec![one.clone(); 2]).is_err());
        assert!(SetValuedFunction::grid("g", unit, vec![0.0, 1.5], vec![one.clone(); 2]).is_err());
        assert!(SetValuedFunction::grid("g", unit, vec![0.0, 0.5], vec![one.clone()]).is_err());
        let two = CompactSet::from_coords(vec![vec![0.0, 0.0]]).unwrap();
        assert!(SetValuedFunction::grid("g", unit, vec![0.0, 0.5], vec![one, two]).is_err());
    }

    #[test]
    fn grid_file_round_trip() {
        let json = r#"{"a":0.0,"b":1.0,"grid":[0.0,0.5],"sets":[[[0.0]],[[-1.0],[1.0]]]}"#;
        let file: GridFile = serde_json::from_str(json).unwrap();
        let f = SetValuedFunction::from_grid_file("jp", file).unwrap();
        assert_eq!(f.eval(0.7).len(), 2);
        let back = serde_json::to_string(&f.to_grid_file().unwrap()).unwrap();
        assert_eq!(back, json);
    }
}
