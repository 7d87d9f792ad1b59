//! Linear integral operators `T_n f(x) = ∫ K_n(x, t) f(t) dt` and their
//! set-valued extension through metric selections.

pub mod bernstein;
mod kernels;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integral::{dedup_within, panels, QuadratureRule};
use crate::selections::{selection_family, SelectionFamily, DEDUP_TOLERANCE};
use crate::sets::{CompactSet, Norm, Point};
use crate::svf::{Interval, Partition, RealFunction, SetValuedFunction, Step};

pub use bernstein::{bernstein_basis, Pmf};
pub use kernels::{BernsteinDurrmeyer, Kantorovich, BD_SIGN_BOUND_MIN_N};

/// Bound on `|T_n(sign(· − x))(x)|`, with a flag telling whether it is
/// asserted for this `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignBound {
    pub value: f64,
    pub valid: bool,
}

/// A kernel `K_n(x, t)` on `[a, b]²` with optional analytic metadata.
pub trait Kernel: Send + Sync {
    fn name(&self) -> String;

    fn n(&self) -> usize;

    fn domain(&self) -> Interval;

    fn eval(&self, x: f64, t: f64) -> f64;

    /// `t ↦ K_n(x, t)`; implementations may precompute the `x` part.
    fn section(&self, x: f64) -> Box<dyn Fn(f64) -> f64 + Send + Sync + '_> {
        Box::new(move |t| self.eval(x, t))
    }

    /// Abscissae where `t ↦ K_n(x, t)` is not smooth.
    fn breakpoints(&self, _x: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Polynomial degree of `t ↦ K_n(x, t)` between breakpoints, if any.
    fn t_degree(&self) -> Option<usize> {
        None
    }

    fn nonnegative(&self) -> bool {
        false
    }

    /// `G(y) = ∫_a^y K_n(x, t) dt` at every `y`.
    fn cumulative(&self, x: f64, ys: &[f64], rule: QuadratureRule) -> Vec<f64> {
        let dom = self.domain();
        let k = self.section(x);
        let bps = self.breakpoints(x);
        let rule = kernel_rule(self, rule, 0);
        let mut order: Vec<usize> = (0..ys.len()).collect();
        order.sort_by(|&i, &j| ys[i].total_cmp(&ys[j]));
        let mut out = vec![0.0; ys.len()];
        let (mut at, mut acc) = (dom.a, 0.0);
        for i in order {
            let y = dom.clamp(ys[i]);
            acc += rule.integrate(&k, at, y, &bps);
            at = y.max(at);
            out[i] = acc;
        }
        out
    }

    /// `T_n s(x)` for step functions on the kernel's domain, for every `x`:
    /// `result[j][i] = T_n s_j(x_i)`. Each piece contributes its value times
    /// the exact piece mass `G(y_{i+1}) − G(y_i)`.
    fn apply_steps(
        &self,
        steps: &[&Step<Point>],
        xs: &[f64],
        rule: QuadratureRule,
    ) -> Result<Vec<Vec<Point>>> {
        let dom = self.domain();
        let mut cuts: Vec<f64> = vec![dom.a, dom.b];
        for s in steps {
            check_step_domain(s, dom)?;
            cuts.extend_from_slice(s.partition().nodes());
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out: Vec<Vec<Point>> = steps.iter().map(|_| Vec::with_capacity(xs.len())).collect();
        for &x in xs {
            let g = self.cumulative(x, &cuts, rule);
            for (j, s) in steps.iter().enumerate() {
                let mut acc = Point::origin(s.values()[0].dim());
                for i in 0..cuts.len() - 1 {
                    acc.axpy(g[i + 1] - g[i], s.at(cuts[i]));
                }
                out[j].push(acc);
            }
        }
        Ok(out)
    }

    /// `α_n(x) = |∫ K_n(x, t) dt − 1|`
    fn alpha(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `M(x) ≥ ∫ |K_n(x, t)| dt`
    fn mass_bound(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Upper bound for `β_n(x, δ) = ∫_{|t−x| ≥ δ} |K_n(x, t)| dt`.
    fn beta_bound(&self, _x: f64, _delta: f64) -> Option<f64> {
        None
    }

    fn sign_bound(&self, _x: f64) -> Option<SignBound> {
        None
    }

    /// `T_n e_i(x)` in closed form.
    fn moment(&self, _i: usize, _x: f64) -> Option<f64> {
        None
    }

    /// `T_n((· − x)²)(x)` in closed form.
    fn second_central_moment(&self, _x: f64) -> Option<f64> {
        None
    }
}

fn check_step_domain(s: &Step<Point>, dom: Interval) -> Result<()> {
    let d = s.partition().domain();
    if (d.a - dom.a).abs() > 1e-12 || (d.b - dom.b).abs() > 1e-12 {
        return Err(invalid(format!(
            "step function lives on [{}, {}], kernel on [{}, {}]",
            d.a, d.b, dom.a, dom.b
        )));
    }
    Ok(())
}

/// `rule` with enough Gauss nodes to integrate `K_n(x, ·)` times a
/// polynomial of degree `extra` exactly, when the kernel is polynomial in `t`.
fn kernel_rule<K: Kernel + ?Sized>(k: &K, rule: QuadratureRule, extra: usize) -> QuadratureRule {
    match k.t_degree() {
        Some(d) => rule.with_min_order((d + extra) / 2 + 1),
        None => rule,
    }
}

/// `T_n f(x) = ∫ K_n(x, t) f(t) dt`, componentwise, with panels aligned to
/// the kernel's and `f`'s breakpoints.
pub fn apply_scalar<K: Kernel + ?Sized>(
    kernel: &K,
    f: &RealFunction,
    x: f64,
    rule: QuadratureRule,
) -> Result<Point> {
    rule.validate()?;
    let dom = kernel.domain();
    if !dom.contains(x) {
        return Err(invalid(format!("{x} lies outside the kernel domain")));
    }
    let mut bps = kernel.breakpoints(x);
    bps.extend_from_slice(f.breakpoints());
    let rule = match f.poly_degree() {
        Some(d) => kernel_rule(kernel, rule, d),
        None => kernel_rule(kernel, rule, 4),
    };
    let k = kernel.section(x);
    Ok(rule.integrate_point(|t| f.eval(t).scale(k(t)), f.dim(), dom.a, dom.b, &bps))
}

/// `{ T_n s(x) : s in the family }`
pub fn apply_family<K: Kernel + ?Sized>(
    kernel: &K,
    family: &SelectionFamily,
    x: f64,
    rule: QuadratureRule,
) -> Result<CompactSet> {
    let steps: Vec<&Step<Point>> = family.selections().iter().map(|s| s.step()).collect();
    let images = kernel.apply_steps(&steps, &[x], rule)?;
    Ok(dedup_within(
        images.into_iter().map(|mut v| v.remove(0)).collect(),
        DEDUP_TOLERANCE,
    ))
}

/// The set-valued operator: `T_n F(x) = { T_n s(x) : s ∈ S(F) }` over the
/// selection family of `F` on `chi`.
pub fn apply_svf<K: Kernel + ?Sized>(
    kernel: &K,
    f: &SetValuedFunction,
    x: f64,
    chi: &Partition,
    seeds_per_fiber: usize,
    rule: QuadratureRule,
    norm: Norm,
) -> Result<CompactSet> {
    if !kernel.domain().contains(x) {
        return Err(invalid(format!("{x} lies outside the kernel domain")));
    }
    let family = selection_family(f, chi, seeds_per_fiber, norm)?;
    apply_family(kernel, &family, x, rule)
}

/// Numeric kernel quantities at one `(x, δ)` next to their metadata.
#[derive(Debug, Clone, Serialize)]
pub struct KernelDiagnostics {
    pub kernel: String,
    pub x: f64,
    pub delta: f64,
    pub alpha_num: f64,
    pub beta_num: f64,
    pub mass_num: f64,
    pub sign_num: f64,
    pub alpha_meta: Option<f64>,
    pub mass_meta: Option<f64>,
    pub beta_meta: Option<f64>,
    pub sign_meta: Option<SignBound>,
}

impl KernelDiagnostics {
    /// Metadata claims contradicted by the numbers, beyond `tol`.
    pub fn violations(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(a) = self.alpha_meta {
            if self.alpha_num > a + tol {
                out.push(format!("alpha {} > {}", self.alpha_num, a));
            }
        }
        if let Some(m) = self.mass_meta {
            if self.mass_num > m + tol {
                out.push(format!("mass {} > {}", self.mass_num, m));
            }
        }
        if let Some(b) = self.beta_meta {
            if self.beta_num > b + tol {
                out.push(format!("beta {} > {}", self.beta_num, b));
            }
        }
        if let Some(s) = self.sign_meta {
            if s.valid && self.sign_num.abs() > s.value + tol {
                out.push(format!("sign term {} > {}", self.sign_num.abs(), s.value));
            }
        }
        out
    }
}

/// Computes `α_n(x)`, `β_n(x, δ)`, `∫|K_n(x, ·)|` and `T_n(sign(· − x))(x)`.
///
/// With a Gauss–Legendre rule everything is integrated from `K_n(x, ·)` on
/// panels split at the kernel breakpoints and at `x`, `x ± δ`. With
/// [`QuadratureRule::ExactPiecewise`] the kernel's cumulative masses are used
/// instead (the absolute mass only for nonnegative kernels).
pub fn diagnostics<K: Kernel + ?Sized>(
    kernel: &K,
    x: f64,
    delta: f64,
    rule: QuadratureRule,
) -> Result<KernelDiagnostics> {
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    rule.validate()?;
    let dom = kernel.domain();
    if !dom.contains(x) {
        return Err(invalid(format!("{x} lies outside the kernel domain")));
    }
    let lo = dom.clamp(x - delta);
    let hi = dom.clamp(x + delta);
    let (total, mass, beta, sign) = if rule == QuadratureRule::ExactPiecewise && kernel.nonnegative() {
        let g = kernel.cumulative(x, &[lo, x, hi, dom.b], rule);
        let total = g[3];
        (total, total, g[0] + (total - g[2]), total - 2.0 * g[1])
    } else {
        let gl = kernel_rule(kernel, rule.with_min_order(8), 0);
        let k = kernel.section(x);
        let mut bps = kernel.breakpoints(x);
        bps.extend([lo, x, hi]);
        let (mut total, mut mass, mut beta, mut sign) = (0.0, 0.0, 0.0, 0.0);
        for (a, b) in panels(dom.a, dom.b, &bps) {
            let mid = 0.5 * (a + b);
            let far = (mid - x).abs() >= delta || mid < lo || mid > hi;
            let s = if mid > x { 1.0 } else { -1.0 };
            gl.for_each_node(a, b, &[], |t, w| {
                let v = w * k(t);
                total += v;
                mass += v.abs();
                sign += s * v;
                if far {
                    beta += v.abs();
                }
            });
        }
        (total, mass, beta, sign)
    };
    Ok(KernelDiagnostics {
        kernel: kernel.name(),
        x,
        delta,
        alpha_num: (total - 1.0).abs(),
        beta_num: beta,
        mass_num: mass,
        sign_num: sign,
        alpha_meta: kernel.alpha(x),
        mass_meta: kernel.mass_bound(x),
        beta_meta: kernel.beta_bound(x, delta),
        sign_meta: kernel.sign_bound(x),
    })
}

/// The built-in operator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    #[serde(alias = "bd")]
    BernsteinDurrmeyer,
    Kantorovich,
}

impl Operator {
    pub const ALL: [Operator; 2] = [Operator::BernsteinDurrmeyer, Operator::Kantorovich];

    pub fn kernel(self, n: usize) -> Result<Arc<dyn Kernel>> {
        Ok(match self {
            Operator::BernsteinDurrmeyer => Arc::new(BernsteinDurrmeyer::new(n)?),
            Operator::Kantorovich => Arc::new(Kantorovich::new(n)?),
        })
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Operator::BernsteinDurrmeyer => "bd",
            Operator::Kantorovich => "kantorovich",
        }
    }

    pub fn family(self) -> KernelFamily {
        KernelFamily::new(self.short_name(), move |n| self.kernel(n))
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bd" | "bernstein-durrmeyer" | "durrmeyer" => Ok(Operator::BernsteinDurrmeyer),
            "kantorovich" | "kant" => Ok(Operator::Kantorovich),
            other => Err(invalid(format!("unknown operator `{other}`"))),
        }
    }
}

type KernelMaker = dyn Fn(usize) -> Result<Arc<dyn Kernel>> + Send + Sync;

/// A named sequence `n ↦ K_n`.
#[derive(Clone)]
pub struct KernelFamily {
    name: String,
    make: Arc<KernelMaker>,
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("KernelFamily").field(&self.name).finish()
    }
}

impl KernelFamily {
    pub fn new(
        name: impl Into<String>,
        make: impl Fn(usize) -> Result<Arc<dyn Kernel>> + Send + Sync + 'static,
    ) -> Self {
        KernelFamily {
            name: name.into(),
            make: Arc::new(make),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kernel(&self, n: usize) -> Result<Arc<dyn Kernel>> {
        (self.make)(n)
    }
}
