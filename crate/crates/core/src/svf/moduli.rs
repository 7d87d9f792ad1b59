use serde::Serialize;

use super::{IntervalFunction, Partition, Step, MAX_PARTITION_NODES};
use crate::error::{invalid, Result};
use crate::sets::Norm;

/// Stopping tolerance of [`total_variation`]'s refinement loop.
pub const VARIATION_TOLERANCE: f64 = 1e-6;

/// `x ↦ V_a^x(f)` tabulated on a partition, extended as a step function.
pub type VariationFunction = Step<f64>;

/// `V(f, χ) = Σ ρ(f(x_i), f(x_{i−1}))`.
///
/// This is a lower bound for the total variation that converges under
/// refinement for functions of bounded variation.
pub fn variation<F: IntervalFunction>(f: &F, chi: &Partition, norm: Norm) -> f64 {
    let values: Vec<F::Value> = chi.nodes().iter().map(|&x| f.value(x)).collect();
    values
        .windows(2)
        .map(|w| f.distance(&w[0], &w[1], norm))
        .sum()
}

/// Tabulates the variation function on `chi`: `v(x_i) = V(f, χ ∩ [a, x_i])`.
pub fn variation_function<F: IntervalFunction>(
    f: &F,
    chi: &Partition,
    norm: Norm,
) -> VariationFunction {
    let mut prev = f.value(chi.nodes()[0]);
    let mut acc = 0.0;
    let mut table = Vec::with_capacity(chi.len());
    table.push(0.0);
    for &x in &chi.nodes()[1..] {
        let cur = f.value(x);
        acc += f.distance(&prev, &cur, norm);
        table.push(acc);
        prev = cur;
    }
    Step::new(chi.clone(), table).expect("one value per node")
}

/// Variation with dyadic refinement until two successive refinements each
/// change the value by less than [`VARIATION_TOLERANCE`] (or the partition would exceed 2^20 nodes).
/// Returns the last value and the partition it was computed on.
pub fn total_variation<F: IntervalFunction>(
    f: &F,
    chi: &Partition,
    norm: Norm,
) -> (f64, Partition) {
    let mut part = chi.clone();
    let mut v = variation(f, &part, norm);
    // one quiet step can be a coincidence of node placement, so require two
    let mut quiet = 0;
    while 2 * part.len() - 1 <= MAX_PARTITION_NODES {
        let finer = part.refine_dyadic().expect("size checked");
        let w = variation(f, &finer, norm);
        quiet = if (w - v).abs() < VARIATION_TOLERANCE { quiet + 1 } else { 0 };
        part = finer;
        v = w;
        if quiet == 2 {
            break;
        }
    }
    (v, part)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

fn nodes_in(chi: &Partition, lo: f64, hi: f64, include_hi: bool) -> impl Iterator<Item = f64> + '_ {
    let start = chi.nodes().partition_point(|&t| t < lo);
    chi.nodes()[start..]
        .iter()
        .copied()
        .take_while(move |&t| if include_hi { t <= hi } else { t < hi })
}

/// `ω(f, x*, δ)`: the diameter of `f` over the window `[x* − δ/2, x* + δ/2]`
/// clipped to the domain, sampled at the nodes of `chi`, the window ends and
/// `x*` itself.
pub fn local_modulus<F: IntervalFunction>(
    f: &F,
    x_star: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<f64> {
    check_delta(delta)?;
    let dom = f.domain();
    if !dom.contains(x_star) {
        return Err(invalid(format!("{x_star} lies outside the domain")));
    }
    let lo = dom.clamp(x_star - 0.5 * delta);
    let hi = dom.clamp(x_star + 0.5 * delta);
    let mut xs: Vec<f64> = nodes_in(chi, lo, hi, true).collect();
    xs.extend([lo, hi, x_star]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let values: Vec<F::Value> = xs.iter().map(|&x| f.value(x)).collect();
    Ok(f.diameter(&values, norm))
}

/// Left quasi-modulus `ϖ⁻(f, x*, δ) = sup_{x ∈ [x*−δ, x*)} ρ(f(x*−), f(x))`.
pub fn quasi_modulus_left<F: IntervalFunction>(
    f: &F,
    x_star: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<f64> {
    check_delta(delta)?;
    let dom = f.domain();
    if !(dom.a < x_star && x_star <= dom.b) {
        return Err(invalid(format!(
            "left quasi-modulus needs x* in (a, b], got {x_star}"
        )));
    }
    let lo = dom.clamp(x_star - delta);
    let limit = f.left_limit(x_star, chi);
    let sup = std::iter::once(lo)
        .chain(nodes_in(chi, lo, x_star, false))
        .map(|x| f.distance(&limit, &f.value(x), norm))
        .fold(0.0, f64::max);
    Ok(sup)
}

/// Right quasi-modulus `ϖ⁺(f, x*, δ) = sup_{x ∈ (x*, x*+δ]} ρ(f(x*+), f(x))`.
pub fn quasi_modulus_right<F: IntervalFunction>(
    f: &F,
    x_star: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<f64> {
    check_delta(delta)?;
    let dom = f.domain();
    if !(dom.a <= x_star && x_star < dom.b) {
        return Err(invalid(format!(
            "right quasi-modulus needs x* in [a, b), got {x_star}"
        )));
    }
    let hi = dom.clamp(x_star + delta);
    let limit = f.right_limit(x_star, chi);
    let start = chi.nodes().partition_point(|&t| t <= x_star);
    let sup = chi.nodes()[start..]
        .iter()
        .copied()
        .take_while(|&t| t <= hi)
        .chain(std::iter::once(hi))
        .map(|x| f.distance(&limit, &f.value(x), norm))
        .fold(0.0, f64::max);
    Ok(sup)
}

/// `ϖ = max(ϖ⁻, ϖ⁺)`, dropping whichever side does not exist at an endpoint.
pub fn quasi_modulus<F: IntervalFunction>(
    f: &F,
    x_star: f64,
    delta: f64,
    chi: &Partition,
    norm: Norm,
) -> Result<f64> {
    let dom = f.domain();
    let left = if x_star > dom.a {
        quasi_modulus_left(f, x_star, delta, chi, norm)?
    } else {
        0.0
    };
    let right = if x_star < dom.b {
        quasi_modulus_right(f, x_star, delta, chi, norm)?
    } else {
        0.0
    };
    Ok(left.max(right))
}

/// `‖f‖∞` sampled at the nodes of `chi`.
pub fn sup_norm<F: IntervalFunction>(f: &F, chi: &Partition, norm: Norm) -> f64 {
    chi.nodes()
        .iter()
        .map(|&x| f.magnitude(&f.value(x), norm))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzMode {
    /// All pairs inside `[x − r, x + r]`.
    Around,
    /// Pairs `(z, x)` with `|z − x| ≤ r`.
    AtPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzEstimate {
    Bounded(f64),
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzProbe {
    /// `(r, max ratio)` per radius, in the order given.
    pub per_radius: Vec<(f64, f64)>,
    pub estimate: LipschitzEstimate,
}

const PROBE_SAMPLES: usize = 33;

impl LipschitzMode {
    /// Abscissae sampled for radius `r` around `x`, clipped to `[a, b]`.
    pub fn sample_points(self, x: f64, r: f64, a: f64, b: f64) -> Vec<f64> {
        let lo = (x - r).max(a);
        let hi = (x + r).min(b);
        let mut xs: Vec<f64> = (0..PROBE_SAMPLES)
            .map(|i| lo + (hi - lo) * i as f64 / (PROBE_SAMPLES - 1) as f64)
            .collect();
        xs.push(x);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

/// Estimates a local Lipschitz constant from difference quotients on
/// shrinking windows.
///
/// The estimate is reported as unbounded when the quotient grows at least
/// like `r^{-1/2}` between the largest and smallest radius (which must span a
/// factor of 4 or more for that verdict).
pub fn lipschitz_probe<F: IntervalFunction>(
    f: &F,
    x: f64,
    radii: &[f64],
    mode: LipschitzMode,
    norm: Norm,
) -> Result<LipschitzProbe> {
    if radii.is_empty() {
        return Err(invalid("no radii given"));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(invalid("radii must be positive"));
    }
    let dom = f.domain();
    if !dom.contains(x) {
        return Err(invalid(format!("{x} lies outside the domain")));
    }
    let fx = f.value(x);
    let mut per_radius = Vec::with_capacity(radii.len());
    for &r in radii {
        let xs = mode.sample_points(x, r, dom.a, dom.b);
        let vals: Vec<F::Value> = xs.iter().map(|&t| f.value(t)).collect();
        let mut best = 0.0f64;
        match mode {
            LipschitzMode::Around => {
                for i in 0..xs.len() {
                    for j in i + 1..xs.len() {
                        let q = f.distance(&vals[i], &vals[j], norm) / (xs[j] - xs[i]);
                        best = best.max(q);
                    }
                }
            }
            LipschitzMode::AtPoint => {
                for (t, v) in xs.iter().zip(&vals) {
                    if *t != x {
                        best = best.max(f.distance(v, &fx, norm) / (t - x).abs());
                    }
                }
            }
        }
        per_radius.push((r, best));
    }
    let (rmin, lmin) = per_radius
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let (rmax, lmax) = per_radius
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let spread = rmax / rmin;
    let growing = if lmax > 0.0 {
        lmin / lmax > spread.sqrt()
    } else {
        lmin > 0.0
    };
    let estimate = if spread >= 4.0 && growing {
        LipschitzEstimate::Unbounded
    } else {
        LipschitzEstimate::Bounded(per_radius.iter().map(|p| p.1).fold(0.0, f64::max))
    };
    Ok(LipschitzProbe {
        per_radius,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::CompactSet;
    use crate::svf::{catalog, Interval, RealFunction, SetValuedFunction};

    fn unit_uniform(n: usize) -> Partition {
        Partition::uniform(Interval::unit(), n).unwrap()
    }

    fn jump_pair() -> SetValuedFunction {
        catalog::jump_pair()
    }

    #[test]
    fn variation_examples() {
        let chi = unit_uniform(10);
        let c = RealFunction::scalar(Interval::unit(), |_| 3.0);
        assert_eq!(variation(&c, &chi, Norm::Euclidean), 0.0);
        let id = RealFunction::scalar(Interval::unit(), |x| x);
        assert!((variation(&id, &chi, Norm::Euclidean) - 1.0).abs() < 1e-15);
        assert_eq!(variation(&jump_pair(), &chi, Norm::Euclidean), 1.0);
    }

    #[test]
    fn variation_function_examples() {
        let chi = unit_uniform(8);
        let id = RealFunction::scalar(Interval::unit(), |x| x);
        let v = variation_function(&id, &chi, Norm::Euclidean);
        for (x, vx) in chi.nodes().iter().zip(v.values()) {
            assert!((x - vx).abs() < 1e-15);
        }
        let v = variation_function(&jump_pair(), &chi, Norm::Euclidean);
        let expect: Vec<f64> = chi.nodes().iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect();
        assert_eq!(v.values(), expect.as_slice());
    }

    #[test]
    fn total_variation_converges() {
        let f = RealFunction::scalar(Interval::unit(), |x| (6.0 * x).sin());
        let (v, part) = total_variation(&f, &unit_uniform(4), Norm::Euclidean);
        // up to 1, down to −1, then up to sin 6
        let exact = 4.0 + 6f64.sin();
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
        assert!(part.len() > 5);
    }

    #[test]
    fn local_modulus_examples() {
        let chi = unit_uniform(100);
        let id = RealFunction::scalar(Interval::unit(), |x| x);
        let w = local_modulus(&id, 0.4, 0.2, &chi, Norm::Euclidean).unwrap();
        assert!((w - 0.2).abs() < 1e-15);
        let c = RealFunction::scalar(Interval::unit(), |_| 1.0);
        assert_eq!(local_modulus(&c, 0.4, 0.2, &chi, Norm::Euclidean).unwrap(), 0.0);
        for delta in [1e-3, 0.1, 0.7] {
            let w = local_modulus(&jump_pair(), 0.5, delta, &chi, Norm::Euclidean).unwrap();
            assert_eq!(w, 1.0);
        }
        assert!(local_modulus(&id, 0.4, 0.0, &chi, Norm::Euclidean).is_err());
    }

    #[test]
    fn quasi_modulus_examples() {
        let f = jump_pair();
        let chi = f.grid_partition().unwrap().with_points(unit_uniform(64).nodes());
        assert_eq!(quasi_modulus_left(&f, 0.5, 0.3, &chi, Norm::Euclidean).unwrap(), 0.0);
        assert_eq!(quasi_modulus_right(&f, 0.5, 0.3, &chi, Norm::Euclidean).unwrap(), 0.0);
        assert!(quasi_modulus_left(&f, 0.0, 0.3, &chi, Norm::Euclidean).is_err());
        assert!(quasi_modulus_right(&f, 1.0, 0.3, &chi, Norm::Euclidean).is_err());

        let g = RealFunction::scalar(Interval::unit(), |x| x * x);
        let fine = unit_uniform(4096);
        let big = quasi_modulus(&g, 0.5, 1e-2, &fine, Norm::Euclidean).unwrap();
        let small = quasi_modulus(&g, 0.5, 1e-3, &fine, Norm::Euclidean).unwrap();
        assert!(small < big && small < 2e-3, "{small} {big}");
    }

    #[test]
    fn sup_norm_examples() {
        let chi = unit_uniform(16);
        let zero = SetValuedFunction::closed_form("zero", Interval::unit(), |_| {
            CompactSet::from_scalars(&[0.0]).unwrap()
        });
        assert_eq!(sup_norm(&zero, &chi, Norm::Euclidean), 0.0);
        assert_eq!(sup_norm(&jump_pair(), &chi, Norm::Euclidean), 1.0);
        let id = SetValuedFunction::closed_form("id", Interval::unit(), |x| {
            CompactSet::from_scalars(&[x]).unwrap()
        });
        assert_eq!(sup_norm(&id, &chi, Norm::Euclidean), 1.0);
    }

    #[test]
    fn lipschitz_examples() {
        let radii = [0.1, 0.01, 0.001];
        let id = RealFunction::scalar(Interval::unit(), |x| x);
        let p = lipschitz_probe(&id, 0.5, &radii, LipschitzMode::Around, Norm::Euclidean).unwrap();
        match p.estimate {
            LipschitzEstimate::Bounded(l) => assert!((l - 1.0).abs() < 1e-9),
            e => panic!("{e:?}"),
        }
        let c = RealFunction::scalar(Interval::unit(), |_| 2.0);
        let p = lipschitz_probe(&c, 0.5, &radii, LipschitzMode::Around, Norm::Euclidean).unwrap();
        assert_eq!(p.estimate, LipschitzEstimate::Bounded(0.0));

        let dom = Interval::new(-1.0, 1.0).unwrap();
        let xs = RealFunction::scalar(dom, |x| if x == 0.0 { 0.0 } else { x * (1.0 / x).sin() });
        let p = lipschitz_probe(&xs, 0.0, &radii, LipschitzMode::AtPoint, Norm::Euclidean).unwrap();
        match p.estimate {
            LipschitzEstimate::Bounded(l) => assert!(l <= 1.0),
            e => panic!("{e:?}"),
        }
        let root = RealFunction::scalar(dom, |x: f64| x.abs().powf(0.25));
        let p = lipschitz_probe(&root, 0.0, &radii, LipschitzMode::Around, Norm::Euclidean).unwrap();
        assert_eq!(p.estimate, LipschitzEstimate::Unbounded);

        let p = lipschitz_probe(&jump_pair(), 0.5, &radii, LipschitzMode::Around, Norm::Euclidean).unwrap();
        assert_eq!(p.estimate, LipschitzEstimate::Unbounded);
        assert!(lipschitz_probe(&id, 0.5, &[], LipschitzMode::Around, Norm::Euclidean).is_err());
    }
}
