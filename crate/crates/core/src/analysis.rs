//! Error bounds for the operators, the jump limit set `A_F(x)`, integral
//! moduli, `λ_n`, and convergence tables.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format_float;
use crate::integral::{dedup_within, gauss_legendre, panels, QuadratureRule};
use crate::operators::{diagnostics, Kernel, KernelFamily};
use crate::selections::{selection_family, SelectionFamily, DEDUP_TOLERANCE};
use crate::sets::{hausdorff, CompactSet, Norm, Point};
use crate::svf::{
    local_modulus, quasi_modulus, sup_norm, variation, variation_function, Interval,
    IntervalFunction, Partition, RealFunction, SetValuedFunction, Step, VariationFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundFlavor {
    Continuity,
    Jump,
}

impl fmt::Display for BoundFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundFlavor::Continuity => "continuity",
            BoundFlavor::Jump => "jump",
        })
    }
}

impl FromStr for BoundFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuity" => Ok(BoundFlavor::Continuity),
            "jump" => Ok(BoundFlavor::Jump),
            other => Err(invalid(format!("unknown mode `{other}`"))),
        }
    }
}

/// A pointwise error bound split into its terms. `total` is their sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseBound {
    pub x: f64,
    pub delta: f64,
    pub flavor: BoundFlavor,
    pub modulus_term: f64,
    pub beta_term: f64,
    pub alpha_term: f64,
    /// Only present for jump bounds.
    pub sign_term: Option<f64>,
    pub total: f64,
    pub observed_error: Option<f64>,
}

impl PointwiseBound {
    fn new(
        x: f64,
        delta: f64,
        flavor: BoundFlavor,
        modulus_term: f64,
        beta_term: f64,
        alpha_term: f64,
        sign_term: Option<f64>,
    ) -> Self {
        PointwiseBound {
            x,
            delta,
            flavor,
            modulus_term,
            beta_term,
            alpha_term,
            sign_term,
            total: modulus_term + beta_term + alpha_term + sign_term.unwrap_or(0.0),
            observed_error: None,
        }
    }

    pub fn with_observed(mut self, err: f64) -> Self {
        self.observed_error = Some(err);
        self
    }

    /// Whether the observed error (if recorded) is at most `total + tol`.
    pub fn dominates(&self, tol: f64) -> Option<bool> {
        self.observed_error.map(|e| e <= self.total + tol)
    }
}

/// The kernel quantities entering the bounds at one `(x, δ)`: `M(x)`,
/// `α_n(x)`, `β_n(x, δ)` and `|T_n(sign(· − x))(x)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelTerms {
    pub mass: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sign: f64,
}

/// Metadata where the kernel provides it (the sign bound only where it is
/// valid for this `n`), numeric diagnostics otherwise.
pub fn kernel_terms<K: Kernel + ?Sized>(kernel: &K, x: f64, delta: f64) -> Result<KernelTerms> {
    let meta = (
        kernel.mass_bound(x),
        kernel.alpha(x),
        kernel.beta_bound(x, delta),
        kernel.sign_bound(x).filter(|s| s.valid).map(|s| s.value),
    );
    if let (Some(mass), Some(alpha), Some(beta), Some(sign)) = meta {
        return Ok(KernelTerms { mass, alpha, beta, sign });
    }
    let rule = if kernel.nonnegative() {
        QuadratureRule::ExactPiecewise
    } else {
        QuadratureRule::default()
    };
    let d = diagnostics(kernel, x, delta, rule)?;
    Ok(KernelTerms {
        mass: meta.0.unwrap_or(d.mass_num),
        alpha: meta.1.unwrap_or(d.alpha_num),
        beta: meta.2.unwrap_or(d.beta_num),
        sign: meta.3.unwrap_or(d.sign_num.abs()),
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

fn check_interior(dom: Interval, x: f64) -> Result<()> {
    if !(dom.a < x && x < dom.b) {
        return Err(invalid(format!(
            "x = {x} must lie inside ({}, {})",
            dom.a, dom.b
        )));
    }
    Ok(())
}

/// `{2^{-j}(b − a) : j = 1..12}`, the δ values tried by optimized bounds.
pub fn delta_grid(domain: Interval) -> Vec<f64> {
    (1..=12).map(|j| domain.len() / (1u64 << j) as f64).collect()
}

/// What the set-valued bounds need from `F` on a partition: its variation
/// function and sup norm, computed once.
#[derive(Debug, Clone)]
pub struct BoundProfile {
    chi: Partition,
    variation: VariationFunction,
    sup: f64,
}

impl BoundProfile {
    pub fn new(f: &SetValuedFunction, chi: &Partition, norm: Norm) -> Self {
        BoundProfile {
            chi: chi.clone(),
            variation: variation_function(f, chi, norm),
            sup: sup_norm(f, chi, norm),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    pub fn variation_function(&self) -> &VariationFunction {
        &self.variation
    }

    /// `ω(v_F, x, 4δ) M(x) + ‖F‖∞ (2β_n(x, δ) + α_n(x))`
    pub fn continuity<K: Kernel + ?Sized>(&self, kernel: &K, x: f64, delta: f64) -> Result<PointwiseBound> {
        check_delta(delta)?;
        let t = kernel_terms(kernel, x, delta)?;
        let omega = local_modulus(&self.variation, x, 4.0 * delta, &self.chi, Norm::Euclidean)?;
        Ok(PointwiseBound::new(
            x,
            delta,
            BoundFlavor::Continuity,
            omega * t.mass,
            2.0 * self.sup * t.beta,
            self.sup * t.alpha,
            None,
        ))
    }

    /// `2ϖ(v_F, x, 2δ) M(x) + ‖F‖∞ (4β_n(x, δ) + α_n(x) + |T_n(sign(· − x))(x)|)`
    pub fn jump<K: Kernel + ?Sized>(&self, kernel: &K, x: f64, delta: f64) -> Result<PointwiseBound> {
        check_delta(delta)?;
        check_interior(self.chi.domain(), x)?;
        let t = kernel_terms(kernel, x, delta)?;
        let varpi = quasi_modulus(&self.variation, x, 2.0 * delta, &self.chi, Norm::Euclidean)?;
        Ok(PointwiseBound::new(
            x,
            delta,
            BoundFlavor::Jump,
            2.0 * varpi * t.mass,
            4.0 * self.sup * t.beta,
            self.sup * t.alpha,
            Some(self.sup * t.sign),
        ))
    }

    pub fn bound<K: Kernel + ?Sized>(
        &self,
        kernel: &K,
        x: f64,
        delta: f64,
        flavor: BoundFlavor,
    ) -> Result<PointwiseBound> {
        match flavor {
            BoundFlavor::Continuity => self.continuity(kernel, x, delta),
            BoundFlavor::Jump => self.jump(kernel, x, delta),
        }
    }

    /// The smallest bound over [`delta_grid`].
    pub fn optimal<K: Kernel + ?Sized>(&self, kernel: &K, x: f64, flavor: BoundFlavor) -> Result<PointwiseBound> {
        let mut best: Option<PointwiseBound> = None;
        for delta in delta_grid(self.chi.domain()) {
            let b = self.bound(kernel, x, delta, flavor)?;
            if best.as_ref().is_none_or(|c| b.total < c.total) {
                best = Some(b);
            }
        }
        Ok(best.expect("nonempty grid"))
    }
}

/// Bound on `haus(T_n F(x), F(x))` at a given `δ`.
pub fn bound_continuity<K: Kernel + ?Sized>(
    kernel: &K,
    f: &SetValuedFunction,
    x: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<PointwiseBound> {
    check_delta(delta)?;
    BoundProfile::new(f, chi, norm).continuity(kernel, x, delta)
}

/// Bound on `haus(T_n F(x), A_F(x))` at a given `δ`.
pub fn bound_jump<K: Kernel + ?Sized>(
    kernel: &K,
    f: &SetValuedFunction,
    x: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<PointwiseBound> {
    check_delta(delta)?;
    check_interior(f.domain(), x)?;
    BoundProfile::new(f, chi, norm).jump(kernel, x, delta)
}

/// Single-valued analogue of [`bound_continuity`]:
/// `ω(f, x, 2δ) M(x) + 2‖f‖∞ β_n(x, δ) + |f(x)| α_n(x)`.
pub fn bound_continuity_scalar<K, F>(
    kernel: &K,
    f: &F,
    x: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<PointwiseBound>
where
    K: Kernel + ?Sized,
    F: IntervalFunction<Value = Point>,
{
    check_delta(delta)?;
    let t = kernel_terms(kernel, x, delta)?;
    let omega = local_modulus(f, x, 2.0 * delta, chi, norm)?;
    let sup = sup_norm(f, chi, norm);
    Ok(PointwiseBound::new(
        x,
        delta,
        BoundFlavor::Continuity,
        omega * t.mass,
        2.0 * sup * t.beta,
        f.value(x).norm(norm) * t.alpha,
        None,
    ))
}

/// Single-valued analogue of [`bound_jump`], bounding
/// `|T_n f(x) − (f(x−) + f(x+))/2|`:
/// `2ϖ(f, x, δ) M(x) + ‖f‖∞ (4β_n(x, δ) + |T_n(sign(· − x))(x)| + α_n(x))`.
pub fn bound_jump_scalar<K, F>(
    kernel: &K,
    f: &F,
    x: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<PointwiseBound>
where
    K: Kernel + ?Sized,
    F: IntervalFunction<Value = Point>,
{
    check_delta(delta)?;
    check_interior(f.domain(), x)?;
    let t = kernel_terms(kernel, x, delta)?;
    let varpi = quasi_modulus(f, x, delta, chi, norm)?;
    let sup = sup_norm(f, chi, norm);
    Ok(PointwiseBound::new(
        x,
        delta,
        BoundFlavor::Jump,
        2.0 * varpi * t.mass,
        4.0 * sup * t.beta,
        sup * t.alpha,
        Some(sup * t.sign),
    ))
}

/// `A_F(x)`: midpoints of the one-sided limits of the selections of `F`
/// on `chi`.
pub fn a_f_set(
    f: &SetValuedFunction,
    x: f64,
    chi: &Partition,
    seeds_per_fiber: usize,
    norm: Norm,
) -> Result<CompactSet> {
    check_interior(f.domain(), x)?;
    let family = selection_family(f, chi, seeds_per_fiber, norm)?;
    family_jump_set(f, &family, x, norm)
}

/// [`a_f_set`] for an existing family.
///
/// Grid-backed `F` use the values on the pieces adjacent to `x`. For
/// closed-form `F` at a partition node, each side is the point of `F(x ∓ h)`
/// (`h` the limit offset) nearest to the selection's value on that side.
pub fn family_jump_set(
    f: &SetValuedFunction,
    family: &SelectionFamily,
    x: f64,
    norm: Norm,
) -> Result<CompactSet> {
    check_interior(f.domain(), x)?;
    let chi = family.partition();
    let node = chi.node_index(x).filter(|_| !f.is_grid_backed());
    let (left_set, right_set) = match node {
        Some(_) => (f.left_limit(x, chi), f.right_limit(x, chi)),
        None => (f.eval(x), f.eval(x)),
    };
    let mids: Vec<Point> = family
        .selections()
        .iter()
        .map(|s| match node {
            Some(_) => {
                let l = &left_set.points()[left_set.nearest(s.left_value(x), norm).0];
                let r = &right_set.points()[right_set.nearest(s.eval(x), norm).0];
                l.midpoint(r)
            }
            None => s.jump_midpoint(x),
        })
        .collect();
    Ok(dedup_within(mids, DEDUP_TOLERANCE))
}

const MODULUS_SAMPLES: usize = 32;

/// Integral modulus of continuity of order 1 or 2, with `f` extended by its
/// endpoint values: the largest of
/// `∫_a^b |f(x+h) − f(x)| dx` resp. `∫_a^b |f(x+h) − 2f(x) + f(x−h)| dx`
/// over `h = δk/32`, `k = 1..32`.
pub fn integral_modulus(f: &RealFunction, delta: f64, order: usize, norm: Norm) -> Result<f64> {
    check_delta(delta)?;
    if !(1..=2).contains(&order) {
        return Err(invalid(format!("integral modulus order must be 1 or 2, got {order}")));
    }
    let dom = f.domain();
    let rule = QuadratureRule::default();
    let mut sup = 0.0f64;
    for k in 1..=MODULUS_SAMPLES {
        let h = delta * k as f64 / MODULUS_SAMPLES as f64;
        let mut bps: Vec<f64> = vec![dom.b - h, dom.a + h];
        for &t in f.breakpoints() {
            bps.extend([t, t - h, t + h]);
        }
        let value = rule.integrate(
            |x| {
                let mut d = f.eval(x + h).sub(&f.eval(x));
                if order == 2 {
                    d = d.sub(&f.eval(x).sub(&f.eval(x - h)));
                }
                d.norm(norm)
            },
            dom.a,
            dom.b,
            &bps,
        );
        sup = sup.max(value);
    }
    Ok(sup)
}

const ABS_SAMPLES: usize = 32;
const ABS_ORDER: usize = 8;

/// `∫_a^b |g|`, splitting at sign changes of `g` located by bisection.
fn abs_integral(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let xs: Vec<f64> = (0..=ABS_SAMPLES)
        .map(|i| a + (b - a) * i as f64 / ABS_SAMPLES as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut cuts = xs.clone();
    for i in 0..ABS_SAMPLES {
        if vals[i] * vals[i + 1] < 0.0 {
            let (mut lo, mut hi, mut glo) = (xs[i], xs[i + 1], vals[i]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if gm * glo > 0.0 {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
    }
    QuadratureRule::GaussLegendre { order: ABS_ORDER, panels: 1 }.integrate(|x| g(x).abs(), a, b, &cuts)
}

/// `(T_n e_0(x), T_n e_1(x))` from the kernel's cumulative mass:
/// `T e_0 = G(b)` and `T e_1 = b G(b) − ∫_a^b G`.
fn image_moments<K: Kernel + ?Sized>(kernel: &K, x: f64, rule: QuadratureRule) -> (f64, f64) {
    let dom = kernel.domain();
    let bps = kernel.breakpoints(x);
    let base = match rule {
        QuadratureRule::ExactPiecewise => QuadratureRule::default(),
        r => r,
    };
    // G is a polynomial of degree t_degree + 1 between breakpoints
    let g_rule = match kernel.t_degree() {
        Some(d) => base.with_min_order(d.div_ceil(2) + 1),
        None => base,
    };
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    g_rule.for_each_node(dom.a, dom.b, &bps, |t, w| {
        ys.push(t);
        ws.push(w);
    });
    ys.push(dom.b);
    let g = kernel.cumulative(x, &ys, rule);
    let total = *g.last().unwrap();
    let integral: f64 = ws.iter().zip(&g).map(|(w, v)| w * v).sum();
    (total, dom.b * total - integral)
}

/// `‖T_n e_i − e_i‖_{L¹}` for `i = 0, 1`. With `use_metadata` the closed-form
/// moments are integrated when the kernel has them.
pub fn moment_l1_errors<K: Kernel + ?Sized>(kernel: &K, rule: QuadratureRule, use_metadata: bool) -> [f64; 2] {
    let dom = kernel.domain();
    let closed = use_metadata && kernel.moment(0, dom.a).is_some() && kernel.moment(1, dom.a).is_some();
    if closed {
        [
            abs_integral(|x| kernel.moment(0, x).unwrap() - 1.0, dom.a, dom.b),
            abs_integral(|x| kernel.moment(1, x).unwrap() - x, dom.a, dom.b),
        ]
    } else {
        [
            abs_integral(|x| image_moments(kernel, x, rule).0 - 1.0, dom.a, dom.b),
            abs_integral(|x| image_moments(kernel, x, rule).1 - x, dom.a, dom.b),
        ]
    }
}

/// `λ_n = (max_{i=0,1} ‖T_n e_i − e_i‖_{L¹})^{1/2}`, integrating closed-form
/// moments when available.
pub fn lambda_n<K: Kernel + ?Sized>(kernel: &K, rule: QuadratureRule) -> f64 {
    let [e0, e1] = moment_l1_errors(kernel, rule, true);
    e0.max(e1).sqrt()
}

/// [`lambda_n`] computed from the kernel itself, ignoring moment metadata.
pub fn lambda_n_quadrature<K: Kernel + ?Sized>(kernel: &K, rule: QuadratureRule) -> f64 {
    let [e0, e1] = moment_l1_errors(kernel, rule, false);
    e0.max(e1).sqrt()
}

/// Tolerance on `|T_n e_0 − 1|` for the global L¹ bound.
pub const MASS_TOLERANCE: f64 = 1e-8;
const L1_GAUSS_ORDER: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct L1Report {
    pub n: usize,
    /// L¹ Hausdorff distance between `{s}` and `{T_n s}` over the family.
    pub observed: f64,
    /// `(λ_n²(b − a) + 2λ_n) V(F, χ)`, without the constant.
    pub bound_shape: f64,
    pub lambda: f64,
    pub variation: f64,
    pub family_size: usize,
}

fn check_unit_mass<K: Kernel + ?Sized>(kernel: &K, rule: QuadratureRule) -> Result<()> {
    let dom = kernel.domain();
    let rule = if kernel.nonnegative() {
        QuadratureRule::ExactPiecewise
    } else {
        rule
    };
    for i in 0..=10 {
        let x = dom.a + dom.len() * i as f64 / 10.0;
        let mass = kernel.cumulative(x, &[dom.b], rule)[0];
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MetadataViolation(format!(
                "{}: T e_0({x}) = {mass}, expected 1",
                kernel.name()
            )));
        }
    }
    Ok(())
}

/// L¹ Hausdorff distance between the selection family of `F` on `chi` and
/// its image under `T_n`, next to the shape of the global bound.
pub fn l1_hausdorff_selection_sets<K: Kernel + ?Sized>(
    kernel: &K,
    f: &SetValuedFunction,
    chi: &Partition,
    seeds_per_fiber: usize,
    rule: QuadratureRule,
    norm: Norm,
) -> Result<L1Report> {
    rule.validate()?;
    check_unit_mass(kernel, rule)?;
    let family = selection_family(f, chi, seeds_per_fiber, norm)?;
    l1_hausdorff_family(kernel, f, &family, rule, norm)
}

/// [`l1_hausdorff_selection_sets`] for an existing family.
pub fn l1_hausdorff_family<K: Kernel + ?Sized>(
    kernel: &K,
    f: &SetValuedFunction,
    family: &SelectionFamily,
    rule: QuadratureRule,
    norm: Norm,
) -> Result<L1Report> {
    let chi = family.partition();
    let dom = chi.domain();
    // T_n s varies on the scale n^{-1/2}; resolve it even on coarse partitions
    let target = dom.len() / (16.0 * (kernel.n().max(1) as f64).sqrt());
    let g = gauss_legendre(L1_GAUSS_ORDER);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for (lo, hi) in panels(dom.a, dom.b, chi.nodes()) {
        let m = ((hi - lo) / target).ceil().max(1.0) as usize;
        let h = (hi - lo) / m as f64;
        for j in 0..m {
            let c = lo + (j as f64 + 0.5) * h;
            for (t, w) in g.nodes.iter().zip(&g.weights) {
                xs.push(c + 0.5 * h * t);
                ws.push(0.5 * h * w);
            }
        }
    }
    let steps: Vec<&Step<Point>> = family.selections().iter().map(|s| s.step()).collect();
    let images = kernel.apply_steps(&steps, &xs, rule)?;
    let m = steps.len();
    let dist: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            images
                .iter()
                .map(|img| {
                    xs.iter()
                        .zip(&ws)
                        .zip(img)
                        .map(|((&x, &w), ty)| w * steps[i].at(x).dist(ty, norm))
                        .sum()
                })
                .collect()
        })
        .collect();
    let rows = (0..m).map(|i| dist[i].iter().copied().fold(f64::INFINITY, f64::min));
    let cols = (0..m).map(|j| (0..m).map(|i| dist[i][j]).fold(f64::INFINITY, f64::min));
    let observed = rows.chain(cols).fold(0.0, f64::max);
    let lambda = lambda_n(kernel, rule);
    let v = variation(f, chi, norm);
    Ok(L1Report {
        n: kernel.n(),
        observed,
        bound_shape: (lambda * lambda * dom.len() + 2.0 * lambda) * v,
        lambda,
        variation: v,
        family_size: m,
    })
}

/// How `δ` is chosen per table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRule {
    Fixed(f64),
    /// `δ = n^{-1/3}`
    PowerThird,
    /// Minimize over [`delta_grid`].
    Optimize,
}

impl DeltaRule {
    pub fn delta(self, n: usize) -> Option<f64> {
        match self {
            DeltaRule::Fixed(d) => Some(d),
            DeltaRule::PowerThird => Some((n as f64).powf(-1.0 / 3.0)),
            DeltaRule::Optimize => None,
        }
    }
}

impl fmt::Display for DeltaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaRule::Fixed(d) => write!(f, "{d}"),
            DeltaRule::PowerThird => f.write_str("n^-1/3"),
            DeltaRule::Optimize => f.write_str("optimize"),
        }
    }
}

impl FromStr for DeltaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimize" | "opt" => Ok(DeltaRule::Optimize),
            "n^-1/3" | "power-third" | "cube-root" => Ok(DeltaRule::PowerThird),
            other => match other.parse::<f64>() {
                Ok(d) if d > 0.0 && d.is_finite() => Ok(DeltaRule::Fixed(d)),
                _ => Err(invalid(format!(
                    "delta rule must be `optimize`, `n^-1/3` or a positive number, got `{other}`"
                ))),
            },
        }
    }
}

/// Inputs of [`convergence_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub family: KernelFamily,
    pub svf: SetValuedFunction,
    pub xs: Vec<f64>,
    pub ns: Vec<usize>,
    pub chi: Partition,
    pub seeds_per_fiber: usize,
    pub mode: BoundFlavor,
    pub delta_rule: DeltaRule,
    pub rule: QuadratureRule,
    pub norm: Norm,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub x: f64,
    pub observed: f64,
    pub bound: PointwiseBound,
    pub delta_star: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub x: f64,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableMetadata {
    pub kernel: String,
    pub svf: String,
    pub chi_size: usize,
    pub seeds: usize,
    pub norm: Norm,
    pub mode: BoundFlavor,
    pub delta_rule: DeltaRule,
    pub family_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub metadata: TableMetadata,
    /// Ordered by `n`, then by `x` in the order given.
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<SlopeFit>,
}

/// Errors at or below this are treated as exact and left out of slope fits.
pub const SLOPE_FLOOR: f64 = 1e-13;

/// Least-squares slope of `log e` against `log n`, over points with
/// `e > SLOPE_FLOOR`. `None` with fewer than two such points.
pub fn loglog_slope(ns: &[f64], errs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .filter(|(n, e)| **n > 0.0 && **e > SLOPE_FLOOR && e.is_finite())
        .map(|(n, e)| (n.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

impl ConvergenceTable {
    pub fn slope_at(&self, x: f64) -> Option<f64> {
        self.slopes.iter().find(|s| s.x == x).and_then(|s| s.slope)
    }

    pub fn rows_at(&self, x: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.x == x)
    }

    /// Rows whose observed error exceeds the bound by more than `tol`.
    pub fn violations(&self, tol: f64) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.observed > r.bound.total + tol).collect()
    }

    /// `n,x,observed,bound,delta_star,slope`, one line per row; `slope` is
    /// the fit for the row's `x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x,observed,bound,delta_star,slope\n");
        for r in &self.rows {
            let slope = self.slope_at(r.x).unwrap_or(f64::NAN);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                format_float(r.x),
                format_float(r.observed),
                format_float(r.bound.total),
                format_float(r.delta_star),
                format_float(slope)
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("table serializes")
    }
}

/// Runs `T_n F(x)` against `F(x)` (continuity) or `A_F(x)` (jump) for every
/// `(n, x)`, with the matching bound. Rows for different `n` are evaluated
/// in parallel.
pub fn convergence_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    if cfg.xs.is_empty() || cfg.ns.is_empty() {
        return Err(invalid("x and n lists must be nonempty"));
    }
    if cfg.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n list must be strictly increasing"));
    }
    let dom = cfg.svf.domain();
    for &x in &cfg.xs {
        match cfg.mode {
            BoundFlavor::Jump => check_interior(dom, x)?,
            BoundFlavor::Continuity if !dom.contains(x) => {
                return Err(invalid(format!("{x} lies outside the domain")))
            }
            _ => {}
        }
    }
    cfg.rule.validate()?;
    let family = selection_family(&cfg.svf, &cfg.chi, cfg.seeds_per_fiber, cfg.norm)?;
    let targets: Vec<CompactSet> = cfg
        .xs
        .iter()
        .map(|&x| match cfg.mode {
            BoundFlavor::Continuity => Ok(cfg.svf.eval(x)),
            BoundFlavor::Jump => family_jump_set(&cfg.svf, &family, x, cfg.norm),
        })
        .collect::<Result<_>>()?;
    let profile = BoundProfile::new(&cfg.svf, &cfg.chi, cfg.norm);
    let steps: Vec<&Step<Point>> = family.selections().iter().map(|s| s.step()).collect();

    let per_n: Vec<Vec<ConvergenceRow>> = cfg
        .ns
        .par_iter()
        .map(|&n| {
            let kernel = cfg.family.kernel(n)?;
            let images = kernel.apply_steps(&steps, &cfg.xs, cfg.rule)?;
            cfg.xs
                .iter()
                .enumerate()
                .map(|(q, &x)| {
                    let set = dedup_within(images.iter().map(|img| img[q].clone()).collect(), DEDUP_TOLERANCE);
                    let observed = hausdorff(&set, &targets[q], cfg.norm)?;
                    let bound = match cfg.delta_rule.delta(n) {
                        Some(d) => profile.bound(kernel.as_ref(), x, d, cfg.mode)?,
                        None => profile.optimal(kernel.as_ref(), x, cfg.mode)?,
                    };
                    Ok(ConvergenceRow {
                        n,
                        x,
                        observed,
                        delta_star: bound.delta,
                        bound: bound.with_observed(observed),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ConvergenceRow> = per_n.into_iter().flatten().collect();

    let slopes = cfg
        .xs
        .iter()
        .map(|&x| {
            let (ns, errs): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.x == x)
                .map(|r| (r.n as f64, r.observed))
                .unzip();
            SlopeFit {
                x,
                slope: loglog_slope(&ns, &errs),
            }
        })
        .collect();
    Ok(ConvergenceTable {
        metadata: TableMetadata {
            kernel: cfg.family.name().to_string(),
            svf: cfg.svf.name().to_string(),
            chi_size: cfg.chi.len(),
            seeds: cfg.seeds_per_fiber,
            norm: cfg.norm,
            mode: cfg.mode,
            delta_rule: cfg.delta_rule,
            family_size: family.len(),
        },
        rows,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::tests::LinearReproducing;
    use crate::operators::{apply_svf, BernsteinDurrmeyer, Kantorovich, Operator};
    use crate::svf::catalog;

    fn uniform(n: usize) -> Partition {
        Partition::uniform(Interval::unit(), n).unwrap()
    }

    #[test]
    fn jump_sets() {
        let chi = uniform(64);
        let a = a_f_set(&catalog::jump_pair(), 0.5, &chi, 4, Norm::Euclidean).unwrap();
        assert_eq!(a, CompactSet::from_scalars(&[-0.5, 0.5]).unwrap());
        let a = a_f_set(&catalog::singleton_jump(), 0.5, &chi, 4, Norm::Euclidean).unwrap();
        assert_eq!(a, CompactSet::from_scalars(&[1.0]).unwrap());
        assert!(a_f_set(&catalog::jump_pair(), 0.0, &chi, 4, Norm::Euclidean).is_err());
        assert!(a_f_set(&catalog::jump_pair(), 1.0, &chi, 4, Norm::Euclidean).is_err());
    }

    #[test]
    fn jump_set_at_continuity_points() {
        let chi = uniform(64);
        let tube = catalog::lipschitz_tube(5).unwrap();
        let family = selection_family(&tube, &chi, 5, Norm::Euclidean).unwrap();
        for &x in &[0.3, 0.71] {
            let a = family_jump_set(&tube, &family, x, Norm::Euclidean).unwrap();
            let h = hausdorff(&a, &family.values_at(x), Norm::Euclidean).unwrap();
            assert!(h < 1e-9, "x = {x}: {h}");
        }
        // at a node of a closed-form function the offset limits stay close
        let a = family_jump_set(&tube, &family, 0.5, Norm::Euclidean).unwrap();
        assert!(hausdorff(&a, &tube.eval(0.5), Norm::Euclidean).unwrap() < 1e-5);
        let jp = catalog::jump_pair();
        let family = selection_family(&jp, &chi, 4, Norm::Euclidean).unwrap();
        let a = family_jump_set(&jp, &family, 0.75, Norm::Euclidean).unwrap();
        assert_eq!(a, jp.eval(0.75));
    }

    #[test]
    fn constant_function_bound() {
        let chi = uniform(32);
        let c = catalog::constant(0.75);
        for n in [10, 100] {
            let k = BernsteinDurrmeyer::new(n).unwrap();
            for &delta in &[0.1, 0.3] {
                let b = bound_continuity(&k, &c, 0.4, delta, &chi, Norm::Euclidean).unwrap();
                assert_eq!(b.modulus_term, 0.0);
                assert_eq!(b.alpha_term, 0.0);
                let cap = 0.75 / (n as f64 * delta * delta);
                assert!((b.total - cap).abs() < 1e-12 && b.total <= cap + 1e-15);
            }
        }
        assert!(bound_continuity(&BernsteinDurrmeyer::new(5).unwrap(), &c, 0.4, 0.0, &chi, Norm::Euclidean).is_err());
    }

    #[test]
    fn tube_bound_dominates() {
        let chi = uniform(256);
        let tube = catalog::lipschitz_tube(5).unwrap();
        let k = BernsteinDurrmeyer::new(100).unwrap();
        let delta = 100f64.powf(-1.0 / 3.0);
        let b = bound_continuity(&k, &tube, 0.5, delta, &chi, Norm::Euclidean).unwrap();
        let image = apply_svf(&k, &tube, 0.5, &chi, 5, QuadratureRule::default(), Norm::Euclidean).unwrap();
        let observed = hausdorff(&image, &tube.eval(0.5), Norm::Euclidean).unwrap();
        assert!(b.modulus_term > 0.0 && b.beta_term > 0.0);
        assert!(b.total >= observed, "{b:?} vs {observed}");
        // M = 1 and α = 0: the bound is ω(v_F, x, 4δ) + 2‖F‖β
        assert_eq!(b.total, b.modulus_term + b.beta_term);
    }

    #[test]
    fn jump_bounds() {
        let chi = uniform(64);
        let jp = catalog::jump_pair();
        let k = Kantorovich::new(400).unwrap();
        let b = bound_jump(&k, &jp, 0.5, 0.25, &chi, Norm::Euclidean).unwrap();
        assert_eq!(b.modulus_term, 0.0);
        // ‖F‖ = 1, sign metadata 12/√(400 · ¼) = 1.2
        assert!((b.sign_term.unwrap() - 1.2).abs() < 1e-12);
        let beta = 1.0 / (4.0 * 400.0 * 0.0625);
        assert!((b.total - (4.0 * beta + 1.2)).abs() < 1e-12);
        assert!(bound_jump(&k, &jp, 0.0, 0.25, &chi, Norm::Euclidean).is_err());

        // singleton-valued: matches the scalar form on the selection
        let sj = catalog::singleton_jump();
        let family = selection_family(&sj, &chi, 1, Norm::Euclidean).unwrap();
        let s = &family.selections()[0];
        for n in [50, 200] {
            let k = BernsteinDurrmeyer::new(n).unwrap();
            let set = bound_jump(&k, &sj, 0.5, 0.2, &chi, Norm::Euclidean).unwrap();
            let scalar = bound_jump_scalar(&k, s, 0.5, 0.2, &chi, Norm::Euclidean).unwrap();
            assert!((set.total - scalar.total).abs() < 1e-12);
            // BD form: ‖f‖(2/(nδ²) + 13/(2√(nx(1−x)))) for n ≥ 100
            if n >= 100 {
                let bd = 2.0 * (2.0 / (n as f64 * 0.04) + 13.0 / (2.0 * (n as f64 * 0.25).sqrt()));
                assert!((scalar.total - bd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scalar_continuity_bound() {
        let chi = uniform(128);
        let f = RealFunction::scalar(Interval::unit(), |x| x * x);
        let k = Kantorovich::new(50).unwrap();
        let b = bound_continuity_scalar(&k, &f, 0.3, 0.1, &chi, Norm::Euclidean).unwrap();
        // ω(f, 0.3, 0.2) = 0.4² − 0.2²
        assert!((b.modulus_term - 0.12).abs() < 1e-12);
        let tf = crate::operators::apply_scalar(&k, &f, 0.3, QuadratureRule::default()).unwrap();
        assert!((tf.coords()[0] - 0.09).abs() <= b.total);
    }

    #[test]
    fn generic_kernel_uses_diagnostics() {
        let t = kernel_terms(&LinearReproducing, 0.3, 0.2).unwrap();
        assert!(t.alpha < 1e-12);
        assert!(t.mass >= 1.0 && t.beta > 0.0);
    }

    #[test]
    fn integral_moduli() {
        let unit = Interval::unit();
        let c = RealFunction::scalar(unit, |_| 3.0);
        for order in [1, 2] {
            assert!(integral_modulus(&c, 0.3, order, Norm::Euclidean).unwrap() < 1e-15);
        }
        // constant extension: ∫_0^1 |min(x+h, 1) − x| dx = h − h²/2 ≤ h V(f)
        let id = RealFunction::scalar(unit, |x| x).with_poly_degree(1);
        for &d in &[0.1, 0.25, 0.5] {
            let v = integral_modulus(&id, d, 1, Norm::Euclidean).unwrap();
            assert!((v - (d - d * d / 2.0)).abs() < 1e-13, "{v}");
            assert!(v <= d);
        }
        assert!(integral_modulus(&id, 0.0, 1, Norm::Euclidean).is_err());
        assert!(integral_modulus(&id, 0.1, 3, Norm::Euclidean).is_err());

        // a step function: ϑ₂ ≤ 2ϑ and ϑ ≤ δ V
        let chi = Partition::new(vec![0.0, 0.2, 0.45, 0.8, 1.0]).unwrap();
        let values = [1.0, -0.5, 2.0, 0.0, 0.0].map(Point::scalar).to_vec();
        let step = Step::new(chi.clone(), values).unwrap();
        let f = RealFunction::from(&step);
        let v = variation(&step, &chi, Norm::Euclidean);
        for &d in &[0.05, 0.15, 0.4] {
            let t1 = integral_modulus(&f, d, 1, Norm::Euclidean).unwrap();
            let t2 = integral_modulus(&f, d, 2, Norm::Euclidean).unwrap();
            assert!(t2 <= 2.0 * t1 + 1e-12);
            assert!(t1 <= d * v + 1e-12);
            // small h: every jump contributes |jump| · h
            if d == 0.05 {
                assert!((t1 - 0.05 * v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_values() {
        let rule = QuadratureRule::default();
        for n in [1, 10, 100] {
            let bd = BernsteinDurrmeyer::new(n).unwrap();
            let exact = (0.5 / (n + 2) as f64).sqrt();
            assert!((lambda_n(&bd, rule) - exact).abs() < 1e-12);
            assert!((lambda_n_quadrature(&bd, rule) - exact).abs() < 1e-10, "n = {n}");
            let k = Kantorovich::new(n).unwrap();
            let exact = (0.25 / (n + 1) as f64).sqrt();
            assert!((lambda_n(&k, rule) - exact).abs() < 1e-12);
            assert!((lambda_n_quadrature(&k, rule) - exact).abs() < 1e-10, "n = {n}");
        }
        assert!(lambda_n(&LinearReproducing, rule) < 1e-7);
    }

    #[test]
    fn l1_distances() {
        let chi = uniform(64);
        let rule = QuadratureRule::default();
        let c = catalog::constant(0.75);
        let k = Kantorovich::new(32).unwrap();
        let r = l1_hausdorff_selection_sets(&k, &c, &chi, 2, rule, Norm::Euclidean).unwrap();
        assert!(r.observed < 1e-12);
        assert_eq!(r.bound_shape, 0.0);

        let jp = catalog::jump_pair();
        let small = l1_hausdorff_selection_sets(&k, &jp, &chi, 2, rule, Norm::Euclidean).unwrap();
        let k = Kantorovich::new(512).unwrap();
        let large = l1_hausdorff_selection_sets(&k, &jp, &chi, 2, rule, Norm::Euclidean).unwrap();
        assert_eq!(small.family_size, 2);
        assert!(large.observed < small.observed);
        assert!(small.bound_shape > large.bound_shape);

        let r = l1_hausdorff_selection_sets(&LinearReproducing, &jp, &chi, 2, rule, Norm::Euclidean).unwrap();
        assert!(r.bound_shape < 1e-6);
    }

    #[test]
    fn l1_rejects_mass_defect() {
        struct Heavy;
        impl Kernel for Heavy {
            fn name(&self) -> String {
                "heavy".into()
            }
            fn n(&self) -> usize {
                1
            }
            fn domain(&self) -> Interval {
                Interval::unit()
            }
            fn eval(&self, _x: f64, _t: f64) -> f64 {
                1.1
            }
        }
        let err = l1_hausdorff_selection_sets(
            &Heavy,
            &catalog::jump_pair(),
            &uniform(8),
            1,
            QuadratureRule::default(),
            Norm::Euclidean,
        );
        assert!(matches!(err, Err(Error::MetadataViolation(_))));
    }

    #[test]
    fn slopes() {
        let ns = [4.0, 16.0, 64.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 / n.sqrt()).collect();
        assert!((loglog_slope(&ns, &errs).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&ns, &[0.0, 0.0, 1e-3]), None);
    }

    fn config(svf: SetValuedFunction, op: Operator, xs: Vec<f64>, ns: Vec<usize>, mode: BoundFlavor) -> ExperimentConfig {
        ExperimentConfig {
            family: op.family(),
            svf,
            xs,
            ns,
            chi: uniform(1024),
            seeds_per_fiber: 5,
            mode,
            delta_rule: DeltaRule::Optimize,
            rule: QuadratureRule::default(),
            norm: Norm::Euclidean,
        }
    }

    #[test]
    fn experiments() {
        let cfg = config(
            catalog::lipschitz_tube(5).unwrap(),
            Operator::BernsteinDurrmeyer,
            vec![0.25, 0.5],
            vec![4, 16, 64, 256],
            BoundFlavor::Continuity,
        );
        let t = convergence_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert!(t.violations(1e-8).is_empty());
        assert!(t.slope_at(0.5).unwrap() <= -0.4);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("n,x,observed,bound,delta_star,slope\n"));
        assert_eq!(t.to_json()["metadata"]["chi_size"], 1025);

        let cfg = config(catalog::constant(0.75), Operator::Kantorovich, vec![0.3], vec![8, 80], BoundFlavor::Continuity);
        let t = convergence_experiment(&cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.observed <= 1e-10));

        let cfg = config(
            catalog::jump_pair(),
            Operator::Kantorovich,
            vec![0.5],
            vec![64, 256, 1024],
            BoundFlavor::Jump,
        );
        let t = convergence_experiment(&cfg).unwrap();
        assert!(t.violations(1e-8).is_empty());
        assert!(t.rows.iter().all(|r| r.observed < 0.1));

        let mut bad = cfg.clone();
        bad.ns = vec![64, 64];
        assert!(convergence_experiment(&bad).is_err());
        bad.ns = vec![];
        assert!(convergence_experiment(&bad).is_err());
        let mut bad = cfg;
        bad.xs = vec![1.0];
        assert!(convergence_experiment(&bad).is_err());
    }

    #[test]
    fn delta_rules() {
        assert_eq!("optimize".parse::<DeltaRule>().unwrap(), DeltaRule::Optimize);
        assert_eq!("n^-1/3".parse::<DeltaRule>().unwrap(), DeltaRule::PowerThird);
        assert_eq!("0.2".parse::<DeltaRule>().unwrap(), DeltaRule::Fixed(0.2));
        assert!("-1".parse::<DeltaRule>().is_err());
        assert!((DeltaRule::PowerThird.delta(1000).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(delta_grid(Interval::unit()).len(), 12);
    }
}
