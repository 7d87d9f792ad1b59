use std::collections::HashMap;

use super::bernstein::Pmf;
use super::{Kernel, SignBound};
use crate::error::{invalid, Result};
use crate::integral::QuadratureRule;
use crate::sets::Point;
use crate::svf::{Interval, Step};

/// Sign-term metadata of the Bernstein–Durrmeyer kernel is only claimed for
/// large `n`; this is the threshold we attach to it.
pub const BD_SIGN_BOUND_MIN_N: usize = 100;

/// `K_n(x, t) = (n+1) Σ_k p_{n,k}(x) p_{n,k}(t)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BernsteinDurrmeyer {
    n: usize,
}

impl BernsteinDurrmeyer {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Bernstein-Durrmeyer kernel needs n ≥ 1"));
        }
        Ok(BernsteinDurrmeyer { n })
    }

    /// `T_k(y) = ∫_0^y (n+1) p_{n,k}(t) dt = P(Bin(n+1, y) ≥ k+1)`, sparse in k.
    fn tails(&self, y: f64) -> (Pmf, Vec<f64>) {
        let q = Pmf::new(self.n + 1, y);
        let tails = q.upper_tails();
        (q, tails)
    }
}

/// Step pieces `[y_i, y_{i+1})` of `[0, 1]` with their values.
fn pieces_on_unit(step: &Step<Point>) -> Result<(Vec<f64>, Vec<&Point>)> {
    let dom = step.partition().domain();
    if (dom.a - 0.0).abs() > 1e-12 || (dom.b - 1.0).abs() > 1e-12 {
        return Err(invalid(format!(
            "step function lives on [{}, {}], kernel on [0, 1]",
            dom.a, dom.b
        )));
    }
    let nodes = step.partition().nodes();
    let n = nodes.len();
    Ok((nodes.to_vec(), step.values()[..n - 1].iter().collect()))
}

fn combine(coeffs: &[Point], pmf: &Pmf, dim: usize) -> Point {
    let mut acc = Point::origin(dim);
    for (k, p) in pmf.iter() {
        acc.axpy(p, &coeffs[k]);
    }
    acc
}

impl Kernel for BernsteinDurrmeyer {
    fn name(&self) -> String {
        format!("bernstein-durrmeyer(n={})", self.n)
    }

    fn n(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Interval {
        Interval::unit()
    }

    fn eval(&self, x: f64, t: f64) -> f64 {
        let px = Pmf::new(self.n, x);
        let pt = Pmf::new(self.n, t);
        let s: f64 = px.iter().map(|(k, p)| p * pt.get(k)).sum();
        (self.n + 1) as f64 * s
    }

    fn section(&self, x: f64) -> Box<dyn Fn(f64) -> f64 + Send + Sync + '_> {
        let px = Pmf::new(self.n, x);
        Box::new(move |t| {
            let pt = Pmf::new(self.n, t);
            let s: f64 = px.iter().map(|(k, p)| p * pt.get(k)).sum();
            (self.n + 1) as f64 * s
        })
    }

    fn t_degree(&self) -> Option<usize> {
        Some(self.n)
    }

    fn nonnegative(&self) -> bool {
        true
    }

    fn cumulative(&self, x: f64, ys: &[f64], _rule: QuadratureRule) -> Vec<f64> {
        let px = Pmf::new(self.n, x);
        ys.iter()
            .map(|&y| {
                let (q, tails) = self.tails(y.clamp(0.0, 1.0));
                px.iter().map(|(k, p)| p * q.tail_at(&tails, k + 1)).sum()
            })
            .collect()
    }

    /// Coefficient route: `T s(x) = Σ_k p_{n,k}(x) c_k` with
    /// `c_k = (n+1) ∫ s p_{n,k}`, assembled by summation by parts over the
    /// step's nodes so that each node costs one sparse tail window.
    fn apply_steps(
        &self,
        steps: &[&Step<Point>],
        xs: &[f64],
        _rule: QuadratureRule,
    ) -> Result<Vec<Vec<Point>>> {
        let n = self.n;
        let mut cache: HashMap<Vec<u64>, Vec<(Pmf, Vec<f64>)>> = HashMap::new();
        let pmfs: Vec<Pmf> = xs.iter().map(|&x| Pmf::new(n, x)).collect();
        let mut out = Vec::with_capacity(steps.len());
        for step in steps {
            let (nodes, values) = pieces_on_unit(step)?;
            let dim = values[0].dim();
            let key: Vec<u64> = nodes.iter().map(|y| y.to_bits()).collect();
            let windows = cache.entry(key).or_insert_with(|| {
                nodes[1..nodes.len() - 1].iter().map(|&y| self.tails(y)).collect()
            });
            // c_k = v_last·T_k(1) + Σ_{interior i} (v_{i−1} − v_i)·T_k(y_i), with T_k(1) = 1
            let mut coeffs = vec![values[values.len() - 1].clone(); n + 1];
            let mut flat = vec![Point::origin(dim); n + 2];
            for (i, (q, tails)) in windows.iter().enumerate() {
                let diff = values[i].sub(values[i + 1]);
                if diff.coords().iter().all(|&c| c == 0.0) {
                    continue;
                }
                // T_k(y) = total for k + 1 ≤ start, the window tail inside, 0 beyond
                let full_until = q.start.min(n + 1);
                if full_until > 0 {
                    flat[0].axpy(tails[0], &diff);
                    flat[full_until].axpy(-tails[0], &diff);
                }
                for k in full_until..=n {
                    let t = q.tail_at(tails, k + 1);
                    if t == 0.0 {
                        break;
                    }
                    coeffs[k].axpy(t, &diff);
                }
            }
            let mut run = Point::origin(dim);
            for k in 0..=n {
                run.axpy(1.0, &flat[k]);
                coeffs[k].axpy(1.0, &run);
            }
            out.push(pmfs.iter().map(|p| combine(&coeffs, p, dim)).collect());
        }
        Ok(out)
    }

    fn alpha(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }

    fn mass_bound(&self, _x: f64) -> Option<f64> {
        Some(1.0)
    }

    fn beta_bound(&self, _x: f64, delta: f64) -> Option<f64> {
        Some(1.0 / (2.0 * self.n as f64 * delta * delta))
    }

    fn sign_bound(&self, x: f64) -> Option<SignBound> {
        let v = x * (1.0 - x);
        (v > 0.0).then(|| SignBound {
            value: 13.0 / (2.0 * (self.n as f64 * v).sqrt()),
            valid: self.n >= BD_SIGN_BOUND_MIN_N,
        })
    }

    fn moment(&self, i: usize, x: f64) -> Option<f64> {
        let n = self.n as f64;
        match i {
            0 => Some(1.0),
            1 => Some((n * x + 1.0) / (n + 2.0)),
            2 => Some((n * (n - 1.0) * x * x + 4.0 * n * x + 2.0) / ((n + 2.0) * (n + 3.0))),
            _ => None,
        }
    }

    fn second_central_moment(&self, x: f64) -> Option<f64> {
        let n = self.n as f64;
        Some(2.0 * ((n - 3.0) * x * (1.0 - x) + 1.0) / ((n + 2.0) * (n + 3.0)))
    }
}

/// `K_n(x, t) = (n+1) Σ_k p_{n,k}(x) 𝟙[t ∈ I_k]`, `I_k = [k/(n+1), (k+1)/(n+1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kantorovich {
    n: usize,
}

impl Kantorovich {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Kantorovich kernel needs n ≥ 1"));
        }
        Ok(Kantorovich { n })
    }

    fn piece(&self, t: f64) -> usize {
        (((self.n + 1) as f64 * t).floor().max(0.0) as usize).min(self.n)
    }
}

/// `∫_0^y s` for a step function given by its pieces, at sorted abscissae.
fn step_antiderivative(nodes: &[f64], values: &[&Point], ys: &[f64], dim: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(ys.len());
    let mut acc = Point::origin(dim);
    let mut i = 0;
    let mut done_to = nodes[0];
    for &y in ys {
        while i < values.len() && nodes[i + 1] <= y {
            acc.axpy(nodes[i + 1] - done_to, values[i]);
            done_to = nodes[i + 1];
            i += 1;
        }
        let mut v = acc.clone();
        if i < values.len() && y > done_to {
            v.axpy(y - done_to, values[i]);
        }
        out.push(v);
    }
    out
}

impl Kernel for Kantorovich {
    fn name(&self) -> String {
        format!("kantorovich(n={})", self.n)
    }

    fn n(&self) -> usize {
        self.n
    }

    fn domain(&self) -> Interval {
        Interval::unit()
    }

    fn eval(&self, x: f64, t: f64) -> f64 {
        (self.n + 1) as f64 * Pmf::new(self.n, x).get(self.piece(t))
    }

    fn section(&self, x: f64) -> Box<dyn Fn(f64) -> f64 + Send + Sync + '_> {
        let px = Pmf::new(self.n, x);
        Box::new(move |t| (self.n + 1) as f64 * px.get(self.piece(t)))
    }

    fn breakpoints(&self, _x: f64) -> Vec<f64> {
        let m = (self.n + 1) as f64;
        (1..=self.n).map(|k| k as f64 / m).collect()
    }

    fn t_degree(&self) -> Option<usize> {
        Some(0)
    }

    fn nonnegative(&self) -> bool {
        true
    }

    fn cumulative(&self, x: f64, ys: &[f64], _rule: QuadratureRule) -> Vec<f64> {
        let px = Pmf::new(self.n, x);
        let mut prefix = vec![0.0; px.probs.len() + 1];
        for (j, p) in px.probs.iter().enumerate() {
            prefix[j + 1] = prefix[j] + p;
        }
        let below = |k: usize| -> f64 {
            // Σ_{j<k} p_j
            if k <= px.start {
                0.0
            } else {
                prefix[(k - px.start).min(px.probs.len())]
            }
        };
        ys.iter()
            .map(|&y| {
                let big_l = (self.n + 1) as f64 * y.clamp(0.0, 1.0);
                let l = big_l.floor() as usize;
                if l > self.n {
                    below(self.n + 1)
                } else {
                    below(l) + px.get(l) * (big_l - l as f64)
                }
            })
            .collect()
    }

    /// `c_k = (n+1) ∫_{I_k} s`, read off the step's antiderivative.
    fn apply_steps(
        &self,
        steps: &[&Step<Point>],
        xs: &[f64],
        _rule: QuadratureRule,
    ) -> Result<Vec<Vec<Point>>> {
        let m = (self.n + 1) as f64;
        let grid: Vec<f64> = (0..=self.n + 1).map(|k| k as f64 / m).collect();
        let pmfs: Vec<Pmf> = xs.iter().map(|&x| Pmf::new(self.n, x)).collect();
        let mut out = Vec::with_capacity(steps.len());
        for step in steps {
            let (nodes, values) = pieces_on_unit(step)?;
            let dim = values[0].dim();
            let anti = step_antiderivative(&nodes, &values, &grid, dim);
            let coeffs: Vec<Point> = anti.windows(2).map(|w| w[1].sub(&w[0]).scale(m)).collect();
            out.push(pmfs.iter().map(|p| combine(&coeffs, p, dim)).collect());
        }
        Ok(out)
    }

    fn alpha(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }

    fn mass_bound(&self, _x: f64) -> Option<f64> {
        Some(1.0)
    }

    fn beta_bound(&self, _x: f64, delta: f64) -> Option<f64> {
        Some(1.0 / (4.0 * self.n as f64 * delta * delta))
    }

    fn sign_bound(&self, x: f64) -> Option<SignBound> {
        let v = x * (1.0 - x);
        (v > 0.0).then(|| SignBound {
            value: 12.0 / (self.n as f64 * v).sqrt(),
            valid: true,
        })
    }

    fn moment(&self, i: usize, x: f64) -> Option<f64> {
        let n = self.n as f64;
        match i {
            0 => Some(1.0),
            1 => Some((2.0 * n * x + 1.0) / (2.0 * (n + 1.0))),
            2 => Some(
                (3.0 * n * (n - 1.0) * x * x + 6.0 * n * x + 1.0) / (3.0 * (n + 1.0) * (n + 1.0)),
            ),
            _ => None,
        }
    }

    fn second_central_moment(&self, x: f64) -> Option<f64> {
        let n = self.n as f64;
        Some((3.0 * (n - 1.0) * x * (1.0 - x) + 1.0) / (3.0 * (n + 1.0) * (n + 1.0)))
    }
}
