//! Bernstein basis polynomials `p_{n,k}(x) = C(n,k) x^k (1−x)^{n−k}`.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

const TABLE_LEN: usize = 1 << 17;

/// `ln n!`, tabulated by compensated summation of `ln k` and continued with
/// the Stirling series past the table.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        t.push(0.0);
        for k in 1..TABLE_LEN {
            let y = (k as f64).ln() - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            t.push(sum);
        }
        t
    });
    if n < TABLE_LEN {
        return table[n];
    }
    let x = n as f64;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x * x)
}

/// `ln C(n, k)`
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `p_{n,k}(x)` for `0 ≤ k ≤ n`, `x ∈ [0, 1]`.
pub fn bernstein_basis(n: usize, k: usize, x: f64) -> Result<f64> {
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("x = {x} outside [0, 1]")));
    }
    Ok(basis_unchecked(n, k, x))
}

fn basis_unchecked(n: usize, k: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if x == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * x.ln() + (n - k) as f64 * (-x).ln_1p()).exp()
}

/// Terms below this are dropped from a [`Pmf`] window.
pub const PMF_CUTOFF: f64 = 1e-20;

/// The nonnegligible part of `k ↦ p_{n,k}(x)`: `probs[j] = p_{n, start+j}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    pub start: usize,
    pub probs: Vec<f64>,
}

impl Pmf {
    /// Window of `p_{n,·}(x)`, grown outwards from the mode by the ratio
    /// recurrence until terms fall below [`PMF_CUTOFF`] (relative to the mode).
    pub fn new(n: usize, x: f64) -> Self {
        let x = x.clamp(0.0, 1.0);
        if x == 0.0 {
            return Pmf { start: 0, probs: vec![1.0] };
        }
        if x == 1.0 {
            return Pmf { start: n, probs: vec![1.0] };
        }
        let mode = (((n + 1) as f64 * x).floor() as usize).min(n);
        let pm = basis_unchecked(n, mode, x);
        let r = x / (1.0 - x);
        let mut up = Vec::new();
        let mut p = pm;
        for k in mode..n {
            p *= (n - k) as f64 / (k + 1) as f64 * r;
            if p < PMF_CUTOFF * pm {
                break;
            }
            up.push(p);
        }
        let mut down = Vec::new();
        let mut p = pm;
        for k in (1..=mode).rev() {
            p *= k as f64 / ((n - k + 1) as f64 * r);
            if p < PMF_CUTOFF * pm {
                break;
            }
            down.push(p);
        }
        let start = mode - down.len();
        let mut probs = down;
        probs.reverse();
        probs.push(pm);
        probs.extend(up);
        // the anchor inherits the rounding of ln n!; the window itself sums
        // to 1 up to the dropped tails, so renormalize
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Pmf { start, probs }
    }

    pub fn end(&self) -> usize {
        self.start + self.probs.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        if k < self.start || k >= self.end() {
            0.0
        } else {
            self.probs[k - self.start]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(j, &p)| (self.start + j, p))
    }

    /// `tail[j] = Σ_{i ≥ start+j} p_i`, with one trailing zero.
    pub fn upper_tails(&self) -> Vec<f64> {
        let mut tails = vec![0.0; self.probs.len() + 1];
        for j in (0..self.probs.len()).rev() {
            tails[j] = tails[j + 1] + self.probs[j];
        }
        tails
    }

    /// `P(X ≥ k)` for `X ~ Bin(n, x)`, given precomputed [`Pmf::upper_tails`].
    pub fn tail_at(&self, tails: &[f64], k: usize) -> f64 {
        if k <= self.start {
            tails[0]
        } else if k >= self.end() {
            0.0
        } else {
            tails[k - self.start]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(10) - 3628800f64.ln()).abs() < 1e-13);
        // the Stirling continuation meets the table
        let t = ln_factorial(TABLE_LEN - 1) + (TABLE_LEN as f64).ln();
        assert!((ln_factorial(TABLE_LEN) - t).abs() < 1e-9 * t);
    }

    #[test]
    fn basis_examples() {
        let s: f64 = (0..=50).map(|k| bernstein_basis(50, k, 0.3).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(bernstein_basis(7, 0, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein_basis(7, 7, 1.0).unwrap(), 1.0);
        assert!((bernstein_basis(4, 2, 0.5).unwrap() - 6.0 / 16.0).abs() < 1e-15);
        assert!(bernstein_basis(3, 4, 0.5).is_err());
        assert!(bernstein_basis(3, 1, 1.5).is_err());
    }

    #[test]
    fn basis_integrates_to_reciprocal() {
        // ∫ p_{5,k} = 1/6, by an exact 4-point Gauss rule (degree ≤ 7)
        let g = crate::integral::gauss_legendre(4);
        for k in 0..=5 {
            let v: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(t, w)| 0.5 * w * bernstein_basis(5, k, 0.5 * (t + 1.0)).unwrap())
                .sum();
            assert!((v - 1.0 / 6.0).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn pmf_windows_match_direct_evaluation() {
        for &(n, x) in &[(1usize, 0.3), (50, 0.3), (1000, 0.01), (10000, 0.5), (10000, 0.999)] {
            let pmf = Pmf::new(n, x);
            let total: f64 = pmf.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-14, "n={n} x={x}: {total}");
            for (k, p) in pmf.iter().step_by(7) {
                // the closed form carries ~n·eps relative error from ln n!
                let direct = bernstein_basis(n, k, x).unwrap();
                assert!((p - direct).abs() <= 1e-10 * direct.max(1e-300), "n={n} k={k}");
            }
        }
        assert_eq!(Pmf::new(9, 0.0).get(0), 1.0);
        assert_eq!(Pmf::new(9, 1.0).get(9), 1.0);
    }

    #[test]
    fn tails() {
        let pmf = Pmf::new(6, 0.4);
        let tails = pmf.upper_tails();
        for k in 0..=8 {
            let direct: f64 = (k..=6).map(|j| pmf.get(j)).sum();
            assert!((pmf.tail_at(&tails, k) - direct).abs() < 1e-15);
        }
    }
}
