//! Quadrature backbone plus the weighted metric Riemann sum and the weighted
//! metric integral of a set-valued function.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::selections::{selection_family, Selection, DEDUP_TOLERANCE};
use crate::sets::{metric_linear_combination, Capped, CompactSet, Norm, Point};
use crate::svf::{Interval, Partition, RealFunction, SetValuedFunction};

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
#[derive(Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    fn compute(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n
            let mut x = ((i as f64 + 0.75) / (n + 0.5) * std::f64::consts::PI).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached Gauss–Legendre rule of the given order.
pub fn gauss_legendre(order: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    cache
        .lock()
        .unwrap()
        .entry(order)
        .or_insert_with(|| Arc::new(GaussRule::compute(order)))
        .clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Composite Gauss–Legendre: `order` nodes on each of `panels` equal
    /// pieces of every breakpoint interval.
    GaussLegendre { order: usize, panels: usize },
    /// One midpoint node per breakpoint interval; exact for integrands that
    /// are constant between breakpoints.
    ExactPiecewise,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::GaussLegendre {
            order: 8,
            panels: 1,
        }
    }
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureRule::GaussLegendre { order, panels } => write!(f, "gl{order}x{panels}"),
            QuadratureRule::ExactPiecewise => f.write_str("exact-piecewise"),
        }
    }
}

/// Sorted breakpoint intervals of `[a, b]`.
pub fn panels(a: f64, b: f64, breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&t| a < t && t < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        out.push((lo, c));
        lo = c;
    }
    out.push((lo, b));
    out
}

impl QuadratureRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureRule::GaussLegendre { order, panels } if order == 0 || panels == 0 => Err(
                invalid("Gauss-Legendre rule needs order ≥ 1 and panels ≥ 1"),
            ),
            _ => Ok(()),
        }
    }

    /// The same rule with at least `order` Gauss nodes per panel.
    pub fn with_min_order(self, order: usize) -> Self {
        match self {
            QuadratureRule::GaussLegendre { order: g, panels } => QuadratureRule::GaussLegendre {
                order: g.max(order),
                panels,
            },
            other => other,
        }
    }

    /// Calls `visit(t, w)` for every quadrature node on `[a, b]`, with panels
    /// aligned to `breakpoints`.
    pub fn for_each_node(&self, a: f64, b: f64, breakpoints: &[f64], mut visit: impl FnMut(f64, f64)) {
        if !(a < b) {
            return;
        }
        match *self {
            QuadratureRule::ExactPiecewise => {
                for (lo, hi) in panels(a, b, breakpoints) {
                    visit(0.5 * (lo + hi), hi - lo);
                }
            }
            QuadratureRule::GaussLegendre { order, panels: m } => {
                let g = gauss_legendre(order);
                for (lo, hi) in panels(a, b, breakpoints) {
                    let h = (hi - lo) / m as f64;
                    for j in 0..m {
                        let left = lo + j as f64 * h;
                        let c = left + 0.5 * h;
                        for (x, w) in g.nodes.iter().zip(&g.weights) {
                            visit(c + 0.5 * h * x, 0.5 * h * w);
                        }
                    }
                }
            }
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, breakpoints: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(a, b, breakpoints, |t, w| acc += w * f(t));
        acc
    }

    pub fn integrate_point(
        &self,
        f: impl Fn(f64) -> Point,
        dim: usize,
        a: f64,
        b: f64,
        breakpoints: &[f64],
    ) -> Point {
        let mut acc = Point::origin(dim);
        self.for_each_node(a, b, breakpoints, |t, w| acc.axpy(w, &f(t)));
        acc
    }
}

/// `∫_a^b f`, componentwise, with panels aligned to `f`'s breakpoints.
pub fn integrate_vector(f: &RealFunction, rule: QuadratureRule) -> Result<Point> {
    rule.validate()?;
    let dom = crate::svf::IntervalFunction::domain(f);
    let rule = match f.poly_degree() {
        Some(d) => rule.with_min_order(d / 2 + 1),
        None => rule,
    };
    Ok(rule.integrate_point(|t| f.eval(t), f.dim(), dom.a, dom.b, f.breakpoints()))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A weight `κ: [a, b] → R` with caller-asserted regularity flags.
#[derive(Clone)]
pub struct WeightFunction {
    domain: Interval,
    f: ScalarFn,
    continuous: bool,
    bv: bool,
    antiderivative: Option<ScalarFn>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("domain", &self.domain)
            .field("continuous", &self.continuous)
            .field("bv", &self.bv)
            .field("exact", &self.antiderivative.is_some())
            .finish()
    }
}

impl WeightFunction {
    pub fn new(
        domain: Interval,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        continuous: bool,
        bv: bool,
    ) -> Self {
        WeightFunction {
            domain,
            f: Arc::new(f),
            continuous,
            bv,
            antiderivative: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn constant(domain: Interval, c: f64) -> Self {
        Self::new(domain, move |_| c, true, true).with_antiderivative(move |t| c * t)
    }

    pub fn with_antiderivative(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.antiderivative = Some(Arc::new(g));
        self
    }

    pub fn with_breakpoints(mut self, bps: Vec<f64>) -> Self {
        self.breakpoints = bps;
        self
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn is_bv(&self) -> bool {
        self.bv
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// `∫_lo^hi κ`, exact when an antiderivative was supplied.
    pub fn integral(&self, lo: f64, hi: f64, rule: QuadratureRule) -> f64 {
        match &self.antiderivative {
            Some(g) => g(hi) - g(lo),
            None => rule.integrate(|t| self.eval(t), lo, hi, &self.breakpoints),
        }
    }
}

/// `⊕ (x_{i+1} − x_i) κ(x_i) F(x_i)` over `i < n`, as a metric linear
/// combination of the fibers.
pub fn weighted_metric_riemann_sum(
    f: &SetValuedFunction,
    kappa: &WeightFunction,
    chi: &Partition,
    cap: usize,
    norm: Norm,
) -> Result<Capped<CompactSet>> {
    let x = chi.nodes();
    let lambdas: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]) * kappa.eval(w[0])).collect();
    let fibers: Vec<CompactSet> = x[..x.len() - 1].iter().map(|&t| f.eval(t)).collect();
    metric_linear_combination(&lambdas, &fibers, cap, norm)
}

/// Points closer than `tol` in every coordinate are merged (first kept).
pub(crate) fn dedup_within(points: Vec<Point>, tol: f64) -> CompactSet {
    let mut kept: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !kept.iter().any(|q| q.approx_eq(&p, tol)) {
            kept.push(p);
        }
    }
    CompactSet::new(kept).expect("at least one point")
}

/// Piece integrals `∫_{x_i}^{x_{i+1}} κ` on a partition.
fn piece_weights(kappa: &WeightFunction, chi: &Partition, rule: QuadratureRule) -> Vec<f64> {
    chi.nodes()
        .windows(2)
        .map(|w| kappa.integral(w[0], w[1], rule))
        .collect()
}

/// `∫ κ s` for a selection, exact on its pieces given the piece weights.
pub(crate) fn integrate_selection(s: &Selection, weights: &[f64]) -> Point {
    let mut acc = Point::origin(s.dim());
    for (w, v) in weights.iter().zip(s.values()) {
        acc.axpy(*w, v);
    }
    acc
}

/// `{ ∫ κ s : s in the selection family on χ }`.
pub fn weighted_metric_integral(
    f: &SetValuedFunction,
    kappa: &WeightFunction,
    chi: &Partition,
    seeds_per_fiber: usize,
    rule: QuadratureRule,
    norm: Norm,
) -> Result<CompactSet> {
    if !kappa.is_bv() {
        return Err(invalid("the weight must be of bounded variation"));
    }
    rule.validate()?;
    let family = selection_family(f, chi, seeds_per_fiber, norm)?;
    let weights = piece_weights(kappa, chi, rule);
    let points = family
        .selections()
        .iter()
        .map(|s| integrate_selection(s, &weights))
        .collect();
    Ok(dedup_within(points, DEDUP_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::hausdorff;
    use crate::svf::catalog;

    #[test]
    fn gauss_rules_are_exact() {
        for order in 1..=40 {
            let g = gauss_legendre(order);
            let total: f64 = g.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "order {order}");
            for deg in 0..2 * order {
                let q: f64 = g
                    .nodes
                    .iter()
                    .zip(&g.weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((q - exact).abs() < 1e-12, "order {order} degree {deg}: {q}");
            }
        }
        let g = gauss_legendre(2);
        assert!((g.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn integrate_vector_examples() {
        let unit = Interval::unit();
        let c = RealFunction::vector(unit, 2, |_| Point::new(vec![1.0, 2.0]).unwrap());
        let v = integrate_vector(&c, QuadratureRule::default()).unwrap();
        assert_eq!(v.coords(), &[1.0, 2.0]);

        let poly = RealFunction::vector(unit, 2, |t| Point::new(vec![t, t * t]).unwrap());
        let rule = QuadratureRule::GaussLegendre { order: 2, panels: 1 };
        let v = integrate_vector(&poly, rule).unwrap();
        assert!((v.coords()[0] - 0.5).abs() < 1e-15);
        assert!((v.coords()[1] - 1.0 / 3.0).abs() < 1e-15);

        let sign = RealFunction::scalar(unit, |t| if t >= 0.5 { 1.0 } else { -1.0 })
            .with_breakpoints(vec![0.5]);
        let v = integrate_vector(&sign, QuadratureRule::ExactPiecewise).unwrap();
        assert_eq!(v.coords(), &[0.0]);

        let bad = QuadratureRule::GaussLegendre { order: 0, panels: 1 };
        assert!(integrate_vector(&sign, bad).is_err());
    }

    #[test]
    fn riemann_sum_examples() {
        let unit = Interval::unit();
        let one = WeightFunction::constant(unit, 1.0);
        let chi = Partition::uniform(unit, 4).unwrap();
        let c = catalog::constant(0.75);
        let r = weighted_metric_riemann_sum(&c, &one, &chi, 100, Norm::Euclidean).unwrap();
        assert_eq!(r.value.scalars().unwrap(), vec![0.75]);

        let r = weighted_metric_riemann_sum(&catalog::jump_pair(), &one, &chi, 100, Norm::Euclidean)
            .unwrap();
        assert_eq!(r.value.scalars().unwrap(), vec![-0.5, 0.5]);
        assert!(!r.truncated);

        let zero = WeightFunction::constant(unit, 0.0);
        let r = weighted_metric_riemann_sum(&catalog::jump_pair(), &zero, &chi, 100, Norm::Euclidean)
            .unwrap();
        assert_eq!(r.value.scalars().unwrap(), vec![0.0]);
    }

    #[test]
    fn metric_integral_examples() {
        let unit = Interval::unit();
        let one = WeightFunction::constant(unit, 1.0);
        let chi = Partition::uniform(unit, 64).unwrap();
        let rule = QuadratureRule::default();
        let got = weighted_metric_integral(&catalog::constant(0.75), &one, &chi, 3, rule, Norm::Euclidean)
            .unwrap();
        assert_eq!(got.scalars().unwrap(), vec![0.75]);

        let got = weighted_metric_integral(&catalog::jump_pair(), &one, &chi, 3, rule, Norm::Euclidean)
            .unwrap();
        assert_eq!(got.scalars().unwrap(), vec![-0.5, 0.5]);

        // left-endpoint steps of ±x integrate to ±(1/2 − h/2)
        let got = weighted_metric_integral(&catalog::branch_pair(), &one, &chi, 2, rule, Norm::Euclidean)
            .unwrap();
        let h = 1.0 / 64.0;
        let want = CompactSet::from_scalars(&[-0.5, 0.5]).unwrap();
        assert!((hausdorff(&got, &want, Norm::Euclidean).unwrap() - h / 2.0).abs() < 1e-14);

        let not_bv = WeightFunction::new(unit, |_| 1.0, true, false);
        assert!(weighted_metric_integral(&catalog::jump_pair(), &not_bv, &chi, 3, rule, Norm::Euclidean)
            .is_err());
    }

    #[test]
    fn quadrature_weight_integrals() {
        let unit = Interval::unit();
        let k = WeightFunction::new(unit, |t| 3.0 * t * t, true, true);
        assert!((k.integral(0.0, 1.0, QuadratureRule::default()) - 1.0).abs() < 1e-15);
        let k = k.with_antiderivative(|t| t * t * t);
        assert_eq!(k.integral(0.0, 0.5, QuadratureRule::default()), 0.125);
    }
}
