//! Chain functions and metric selections of a set-valued function.
//!
//! Selections are built greedily: starting from a seed point in one fiber,
//! each neighbouring value is the nearest point of the next fiber (the
//! lexicographically smallest one on ties). Consecutive values are therefore
//! metric pairs by construction.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format_float;
use crate::sets::{dist_point_set, hausdorff, CompactSet, MetricChain, Norm, Point, TIE_TOLERANCE};
use crate::svf::{
    variation, sup_norm, Interval, IntervalFunction, Partition, SetValuedFunction, Step,
    MAX_PARTITION_NODES,
};

/// Value tables closer than this (per coordinate) count as one selection.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

/// A fiber counts as a jump when its Hausdorff distance to the previous one
/// exceeds this multiple of the median step (and is not negligible).
const JUMP_FACTOR: f64 = 8.0;

/// Step function `y_i` on `[x_i, x_{i+1})`, `y_n` at `x_n`, built from a
/// metric chain through the fibers on `χ`.
#[derive(Debug, Clone)]
pub struct ChainFunction {
    step: Step<Point>,
}

impl ChainFunction {
    pub fn step(&self) -> &Step<Point> {
        &self.step
    }

    pub fn eval(&self, x: f64) -> &Point {
        self.step.at(x)
    }
}

pub fn chain_function(
    f: &SetValuedFunction,
    chi: &Partition,
    phi: &MetricChain,
    norm: Norm,
) -> Result<ChainFunction> {
    let fibers = f.fibers(chi);
    phi.validate(&fibers, norm)?;
    Ok(ChainFunction {
        step: Step::new(chi.clone(), phi.entries.clone())?,
    })
}

/// The graph point a selection is anchored at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub node: usize,
    pub x: f64,
    pub point: Point,
}

#[derive(Debug, Clone)]
pub struct Selection {
    seed: Seed,
    step: Step<Point>,
}

impl Selection {
    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn partition(&self) -> &Partition {
        self.step.partition()
    }

    pub fn values(&self) -> &[Point] {
        self.step.values()
    }

    pub fn step(&self) -> &Step<Point> {
        &self.step
    }

    pub fn dim(&self) -> usize {
        self.step.values()[0].dim()
    }

    pub fn eval(&self, x: f64) -> &Point {
        self.step.at(x)
    }

    /// `s(x−)`, the value on the piece left of `x`.
    pub fn left_value(&self, x: f64) -> &Point {
        self.step.left_of(x)
    }

    /// `(s(x−) + s(x+)) / 2`
    pub fn jump_midpoint(&self, x: f64) -> Point {
        self.left_value(x).midpoint(self.eval(x))
    }

    fn approx_eq(&self, other: &Selection) -> bool {
        self.values()
            .iter()
            .zip(other.values())
            .all(|(u, v)| u.approx_eq(v, DEDUP_TOLERANCE))
    }

    /// CSV with columns `x, y_1, …, y_d`, one row per partition node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for k in 1..=self.dim() {
            write!(out, ",y_{k}").unwrap();
        }
        out.push('\n');
        for (x, y) in self.partition().nodes().iter().zip(self.values()) {
            out.push_str(&format_float(*x));
            for c in y.coords() {
                out.push(',');
                out.push_str(&format_float(*c));
            }
            out.push('\n');
        }
        out
    }
}

impl IntervalFunction for Selection {
    type Value = Point;

    fn domain(&self) -> Interval {
        self.step.domain()
    }

    fn value(&self, x: f64) -> Point {
        self.step.value(x)
    }

    fn distance(&self, u: &Point, v: &Point, norm: Norm) -> f64 {
        u.dist(v, norm)
    }

    fn magnitude(&self, u: &Point, norm: Norm) -> f64 {
        u.norm(norm)
    }

    fn left_limit(&self, x: f64, _: &Partition) -> Point {
        self.left_value(x).clone()
    }

    fn right_limit(&self, x: f64, _: &Partition) -> Point {
        self.eval(x).clone()
    }
}

/// Fibers on a partition together with the greedy nearest-point maps between
/// neighbouring fibers.
struct Fibers {
    sets: Vec<CompactSet>,
    /// `right[i][q]`: index in fiber `i+1` of the projection of point `q` of fiber `i`.
    right: Vec<Vec<usize>>,
    /// `left[i][q]`: index in fiber `i−1` of the projection of point `q` of fiber `i`.
    left: Vec<Vec<usize>>,
}

impl Fibers {
    fn new(sets: Vec<CompactSet>, norm: Norm) -> Self {
        let n = sets.len();
        let map = |from: &CompactSet, to: &CompactSet| -> Vec<usize> {
            from.iter().map(|p| to.nearest(p, norm).0).collect()
        };
        let right = (0..n - 1)
            .into_par_iter()
            .map(|i| map(&sets[i], &sets[i + 1]))
            .collect();
        let left = (0..n)
            .into_par_iter()
            .map(|i| if i == 0 { Vec::new() } else { map(&sets[i], &sets[i - 1]) })
            .collect();
        Fibers { sets, right, left }
    }

    fn path(&self, node: usize, start: usize) -> Vec<usize> {
        let n = self.sets.len();
        let mut idx = vec![0; n];
        idx[node] = start;
        for i in node..n - 1 {
            idx[i + 1] = self.right[i][idx[i]];
        }
        for i in (1..=node).rev() {
            idx[i - 1] = self.left[i][idx[i]];
        }
        idx
    }

    fn materialize(&self, chi: &Partition, node: usize, start: usize) -> Selection {
        let values: Vec<Point> = self
            .path(node, start)
            .into_iter()
            .enumerate()
            .map(|(i, q)| self.sets[i].points()[q].clone())
            .collect();
        Selection {
            seed: Seed {
                node,
                x: chi.nodes()[node],
                point: values[node].clone(),
            },
            step: Step::new(chi.clone(), values).expect("one value per node"),
        }
    }
}

fn greedy_from(
    sets: &[CompactSet],
    chi: &Partition,
    node: usize,
    y: Point,
    norm: Norm,
) -> Selection {
    let n = sets.len();
    let mut values = vec![y.clone(); n];
    for i in node..n - 1 {
        let (q, _) = sets[i + 1].nearest(&values[i], norm);
        values[i + 1] = sets[i + 1].points()[q].clone();
    }
    for i in (1..=node).rev() {
        let (q, _) = sets[i - 1].nearest(&values[i], norm);
        values[i - 1] = sets[i - 1].points()[q].clone();
    }
    Selection {
        seed: Seed {
            node,
            x: chi.nodes()[node],
            point: y,
        },
        step: Step::new(chi.clone(), values).expect("one value per node"),
    }
}

/// The metric selection through the graph point `(x, y)`; `x` must be a node
/// of `chi` and `y` a point of `F(x)` (up to the tie tolerance). The value at
/// `x` is `y` exactly.
pub fn metric_selection_through(
    f: &SetValuedFunction,
    chi: &Partition,
    x: f64,
    y: &Point,
    norm: Norm,
) -> Result<Selection> {
    let node = chi.node_index(x).ok_or(Error::NotANode(x))?;
    let fibers = f.fibers(chi);
    if dist_point_set(y, &fibers[node], norm)? > TIE_TOLERANCE {
        return Err(Error::NotAMember);
    }
    Ok(greedy_from(&fibers, chi, node, y.clone(), norm))
}

/// A finite family of metric selections on one partition.
#[derive(Debug, Clone)]
pub struct SelectionFamily {
    partition: Partition,
    fibers: Vec<CompactSet>,
    selections: Vec<Selection>,
    jump_nodes: Vec<usize>,
    seeds_tried: usize,
}

impl SelectionFamily {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn fibers(&self) -> &[CompactSet] {
        &self.fibers
    }

    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    /// Nodes `i` where the step `F(x_{i−1}) → F(x_i)` was classified as a jump.
    pub fn jump_nodes(&self) -> &[usize] {
        &self.jump_nodes
    }

    /// Number of seeds expanded before deduplication.
    pub fn seeds_tried(&self) -> usize {
        self.seeds_tried
    }

    /// `{ s(x) : s in the family }`
    pub fn values_at(&self, x: f64) -> CompactSet {
        CompactSet::new(self.selections.iter().map(|s| s.eval(x).clone()).collect())
            .expect("family is nonempty")
    }

    /// Checks the inheritance inequalities `V(s) ≤ V(F)`, `‖s‖∞ ≤ ‖F‖∞` and
    /// fiber membership for every member, on the family's partition.
    pub fn inheritance_report(&self, f: &SetValuedFunction, norm: Norm) -> InheritanceReport {
        let chi = &self.partition;
        let v_f = variation(f, chi, norm);
        let sup_f = sup_norm(f, chi, norm);
        let mut report = InheritanceReport {
            family_size: self.len(),
            variation_f: v_f,
            sup_norm_f: sup_f,
            max_variation_s: 0.0,
            max_sup_norm_s: 0.0,
            max_fiber_distance: 0.0,
        };
        for s in &self.selections {
            report.max_variation_s = report.max_variation_s.max(variation(s, chi, norm));
            report.max_sup_norm_s = report.max_sup_norm_s.max(sup_norm(s, chi, norm));
            for (y, fiber) in s.values().iter().zip(&self.fibers) {
                let d = dist_point_set(y, fiber, norm).expect("same dimension");
                report.max_fiber_distance = report.max_fiber_distance.max(d);
            }
        }
        report
    }

    /// Writes `selection_NNN.csv` per member and `manifest.json` into `dir`.
    pub fn export(&self, dir: &Path, svf_name: &str, norm: Norm) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.len());
        for (k, s) in self.selections.iter().enumerate() {
            let file = format!("selection_{k:03}.csv");
            fs::write(dir.join(&file), s.to_csv())?;
            entries.push(ManifestEntry {
                file,
                seed: s.seed.clone(),
            });
        }
        let manifest = Manifest {
            svf: svf_name.to_string(),
            partition_size: self.partition.len(),
            norm,
            selections: entries,
        };
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InheritanceReport {
    pub family_size: usize,
    pub variation_f: f64,
    pub sup_norm_f: f64,
    pub max_variation_s: f64,
    pub max_sup_norm_s: f64,
    pub max_fiber_distance: f64,
}

impl InheritanceReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_variation_s <= self.variation_f + tol
            && self.max_sup_norm_s <= self.sup_norm_f + tol
            && self.max_fiber_distance == 0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub seed: Seed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub svf: String,
    pub partition_size: usize,
    pub norm: Norm,
    pub selections: Vec<ManifestEntry>,
}

/// Indices `round(j (m−1)/(k−1))`, `j < k`, spread over a fiber of `m` points.
fn stratified(m: usize, k: usize) -> Vec<usize> {
    if k >= m {
        return (0..m).collect();
    }
    if k == 1 {
        return vec![0];
    }
    let mut idx: Vec<usize> = (0..k)
        .map(|j| ((j * (m - 1)) as f64 / (k - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

fn detect_jumps(sets: &[CompactSet], norm: Norm) -> Vec<usize> {
    let steps: Vec<f64> = sets
        .par_windows(2)
        .map(|w| hausdorff(&w[0], &w[1], norm).expect("fibers share one dimension"))
        .collect();
    let mut sorted = steps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    steps
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 1e-12 && d > JUMP_FACTOR * median)
        .map(|(i, _)| i + 1)
        .collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn point_hash(p: &Point, salt: u64) -> u64 {
    p.coords()
        .iter()
        .fold(splitmix(salt), |h, c| splitmix(h ^ (c + 0.0).to_bits()))
}

/// Polynomial hashes of greedy paths, so that every seed's selection can be
/// fingerprinted in O(1) without materializing it.
struct PathHashes {
    base: u64,
    powers: Vec<u64>,
    prefix: Vec<Vec<u64>>,
    suffix: Vec<Vec<u64>>,
}

impl PathHashes {
    fn new(fibers: &Fibers, base: u64, salt: u64) -> Self {
        let n = fibers.sets.len();
        let vh: Vec<Vec<u64>> = fibers
            .sets
            .iter()
            .map(|s| s.iter().map(|p| point_hash(p, salt)).collect())
            .collect();
        let mut powers = vec![1u64; n];
        for i in 1..n {
            powers[i] = powers[i - 1].wrapping_mul(base);
        }
        let mut suffix = vec![Vec::new(); n];
        suffix[n - 1] = vh[n - 1].clone();
        for i in (0..n - 1).rev() {
            suffix[i] = (0..vh[i].len())
                .map(|q| {
                    vh[i][q].wrapping_add(base.wrapping_mul(suffix[i + 1][fibers.right[i][q]]))
                })
                .collect();
        }
        let mut prefix = vec![Vec::new(); n];
        prefix[0] = vh[0].clone();
        for i in 1..n {
            prefix[i] = (0..vh[i].len())
                .map(|q| {
                    prefix[i - 1][fibers.left[i][q]].wrapping_add(powers[i].wrapping_mul(vh[i][q]))
                })
                .collect();
        }
        PathHashes {
            base,
            powers,
            prefix,
            suffix,
        }
    }

    fn key(&self, fibers: &Fibers, node: usize, q: usize) -> u64 {
        debug_assert!(self.base % 2 == 1);
        let right = self.powers[node].wrapping_mul(self.suffix[node][q]);
        if node == 0 {
            right
        } else {
            self.prefix[node - 1][fibers.left[node][q]].wrapping_add(right)
        }
    }
}

/// A deterministic finite family of metric selections on `chi`.
///
/// Every fiber contributes up to `seeds_per_fiber` stratified seeds; both
/// fibers around every detected jump contribute all their points. Members
/// with equal value tables are kept once, in first-seed order.
pub fn selection_family(
    f: &SetValuedFunction,
    chi: &Partition,
    seeds_per_fiber: usize,
    norm: Norm,
) -> Result<SelectionFamily> {
    if seeds_per_fiber == 0 {
        return Err(Error::InvalidArgument("seeds_per_fiber must be ≥ 1".into()));
    }
    let fibers = Fibers::new(f.fibers(chi), norm);
    let jump_nodes = detect_jumps(&fibers.sets, norm);
    let mut full = vec![false; fibers.sets.len()];
    for &i in &jump_nodes {
        full[i - 1] = true;
        full[i] = true;
    }

    let lanes = [
        PathHashes::new(&fibers, 0x100_0000_01b3, 0x5eed),
        PathHashes::new(&fibers, 0x9e37_79b9_7f4a_7c15 | 1, 0xfeed_beef),
    ];
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut selections: Vec<Selection> = Vec::new();
    let mut seeds_tried = 0;
    for (node, set) in fibers.sets.iter().enumerate() {
        let picks = if full[node] {
            (0..set.len()).collect()
        } else {
            stratified(set.len(), seeds_per_fiber)
        };
        for q in picks {
            seeds_tried += 1;
            let key = (lanes[0].key(&fibers, node, q), lanes[1].key(&fibers, node, q));
            if !seen.insert(key) {
                continue;
            }
            let s = fibers.materialize(chi, node, q);
            if !selections.iter().any(|t| t.approx_eq(&s)) {
                selections.push(s);
            }
        }
    }
    Ok(SelectionFamily {
        partition: chi.clone(),
        fibers: fibers.sets,
        selections,
        jump_nodes,
        seeds_tried,
    })
}

/// Re-anchors `s` at its seed on `levels` successive dyadic refinements of
/// its partition. The result starts with `s` itself.
pub fn refine_selection(
    f: &SetValuedFunction,
    s: &Selection,
    levels: usize,
    norm: Norm,
) -> Result<Vec<Selection>> {
    let mut out = vec![s.clone()];
    let mut chi = s.partition().clone();
    for _ in 0..levels {
        if 2 * chi.len() - 1 > MAX_PARTITION_NODES {
            return Err(Error::InvalidPartition(format!(
                "refinement would exceed {MAX_PARTITION_NODES} nodes"
            )));
        }
        chi = chi.refine_dyadic()?;
        out.push(metric_selection_through(f, &chi, s.seed.x, &s.seed.point, norm)?);
    }
    Ok(out)
}

/// `sup_x |s_l(x) − s_{l+1}(x)|` over the nodes of the finer partition, for
/// each consecutive pair of a refinement sequence.
pub fn refinement_gaps(seq: &[Selection], norm: Norm) -> Vec<f64> {
    seq.windows(2)
        .map(|w| {
            w[1].partition()
                .nodes()
                .iter()
                .zip(w[1].values())
                .map(|(&x, v)| w[0].eval(x).dist(v, norm))
                .fold(0.0, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::metric_chains;
    use crate::svf::catalog;

    fn uniform(n: usize) -> Partition {
        Partition::uniform(Interval::unit(), n).unwrap()
    }

    fn scalars(s: &Selection) -> Vec<f64> {
        s.values().iter().map(|p| p.coords()[0]).collect()
    }

    #[test]
    fn chain_function_examples() {
        let f = catalog::constant(0.75);
        let chi = uniform(4);
        let chains = metric_chains(&f.fibers(&chi), 10, Norm::Euclidean).unwrap();
        assert_eq!(chains.value.len(), 1);
        let cf = chain_function(&f, &chi, &chains.value[0], Norm::Euclidean).unwrap();
        assert_eq!(cf.eval(0.3).coords(), &[0.75]);

        let f = catalog::jump_pair();
        let fibers = f.fibers(&chi);
        let chains = metric_chains(&fibers, 100, Norm::Euclidean).unwrap();
        let up = chains
            .value
            .iter()
            .find(|c| c.entries.last().unwrap().coords() == [1.0])
            .unwrap();
        let cf = chain_function(&f, &chi, up, Norm::Euclidean).unwrap();
        assert_eq!(cf.eval(0.49).coords(), &[0.0]);
        assert_eq!(cf.eval(0.5).coords(), &[1.0]);
        assert_eq!(cf.eval(1.0).coords(), &[1.0]);

        let bad = MetricChain {
            entries: vec![Point::scalar(0.0); 5],
        };
        assert!(chain_function(&f, &chi, &bad, Norm::Euclidean).is_err());
    }

    #[test]
    fn anchored_selections() {
        let f = catalog::jump_pair();
        let chi = uniform(4);
        let s = metric_selection_through(&f, &chi, 0.75, &Point::scalar(1.0), Norm::Euclidean).unwrap();
        assert_eq!(scalars(&s), vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        let s = metric_selection_through(&f, &chi, 0.75, &Point::scalar(-1.0), Norm::Euclidean).unwrap();
        assert_eq!(scalars(&s), vec![0.0, 0.0, -1.0, -1.0, -1.0]);
        let s = metric_selection_through(&f, &chi, 0.25, &Point::scalar(0.0), Norm::Euclidean).unwrap();
        assert_eq!(scalars(&s), vec![0.0, 0.0, -1.0, -1.0, -1.0]);

        assert!(matches!(
            metric_selection_through(&f, &chi, 0.3, &Point::scalar(0.0), Norm::Euclidean),
            Err(Error::NotANode(_))
        ));
        assert!(matches!(
            metric_selection_through(&f, &chi, 0.75, &Point::scalar(0.5), Norm::Euclidean),
            Err(Error::NotAMember)
        ));

        let c = catalog::constant(0.75);
        let s = metric_selection_through(&c, &chi, 0.5, &Point::scalar(0.75), Norm::Euclidean).unwrap();
        assert!(scalars(&s).iter().all(|&v| v == 0.75));
    }

    #[test]
    fn family_examples() {
        let chi = uniform(16);
        let fam = selection_family(&catalog::constant(0.75), &chi, 3, Norm::Euclidean).unwrap();
        assert_eq!(fam.len(), 1);

        let fam = selection_family(&catalog::jump_pair(), &chi, 3, Norm::Euclidean).unwrap();
        assert_eq!(fam.len(), 2);
        assert_eq!(fam.jump_nodes(), &[8]);
        let mut tails: Vec<f64> = fam.selections().iter().map(|s| s.eval(1.0).coords()[0]).collect();
        tails.sort_by(f64::total_cmp);
        assert_eq!(tails, vec![-1.0, 1.0]);

        let fam = selection_family(&catalog::branch_pair(), &chi, 2, Norm::Euclidean).unwrap();
        let has = |sign: f64| {
            fam.selections()
                .iter()
                .any(|s| chi.nodes().iter().all(|&x| s.eval(x).coords()[0] == sign * x))
        };
        assert!(has(1.0) && has(-1.0));

        assert!(selection_family(&catalog::jump_pair(), &chi, 0, Norm::Euclidean).is_err());
    }

    #[test]
    fn hashing_agrees_with_materialized_dedup() {
        let f = catalog::annulus_slice(6).unwrap();
        let chi = uniform(40);
        let fam = selection_family(&f, &chi, 12, Norm::Euclidean).unwrap();
        let fibers = Fibers::new(f.fibers(&chi), Norm::Euclidean);
        let mut brute: Vec<Vec<Point>> = Vec::new();
        for (node, set) in fibers.sets.iter().enumerate() {
            for q in 0..set.len() {
                let v = fibers.materialize(&chi, node, q).values().to_vec();
                if !brute.contains(&v) {
                    brute.push(v);
                }
            }
        }
        assert_eq!(fam.len(), brute.len());
        for s in fam.selections() {
            assert!(brute.iter().any(|v| v.as_slice() == s.values()));
        }
    }

    #[test]
    fn stratified_indices() {
        assert_eq!(stratified(5, 1), vec![0]);
        assert_eq!(stratified(5, 3), vec![0, 2, 4]);
        assert_eq!(stratified(3, 7), vec![0, 1, 2]);
        assert_eq!(stratified(10, 4), vec![0, 3, 6, 9]);
    }

    #[test]
    fn refinement_sequences() {
        let c = catalog::constant(0.75);
        let chi = uniform(4);
        let s = metric_selection_through(&c, &chi, 0.0, &Point::scalar(0.75), Norm::Euclidean).unwrap();
        let seq = refine_selection(&c, &s, 3, Norm::Euclidean).unwrap();
        assert_eq!(seq.len(), 4);
        assert!(refinement_gaps(&seq, Norm::Euclidean).iter().all(|&g| g == 0.0));

        let f = catalog::jump_pair();
        let chi = Partition::new(vec![0.0, 0.3, 0.7, 1.0]).unwrap();
        let s = metric_selection_through(&f, &chi, 0.7, &Point::scalar(1.0), Norm::Euclidean).unwrap();
        let gaps = refinement_gaps(&refine_selection(&f, &s, 4, Norm::Euclidean).unwrap(), Norm::Euclidean);
        assert_eq!(gaps[0], 1.0);
        assert!(gaps[1..].iter().all(|&g| g == 0.0), "{gaps:?}");

        let tube = catalog::lipschitz_tube(5).unwrap();
        let s = metric_selection_through(&tube, &uniform(8), 0.5, &Point::scalar(1.25), Norm::Euclidean)
            .unwrap();
        let gaps = refinement_gaps(&refine_selection(&tube, &s, 5, Norm::Euclidean).unwrap(), Norm::Euclidean);
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }

    #[test]
    fn csv_layout() {
        let f = catalog::jump_pair();
        let s = metric_selection_through(&f, &uniform(2), 1.0, &Point::scalar(1.0), Norm::Euclidean).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y_1");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "1.0000000000000000e0,1.0000000000000000e0");
    }

    #[test]
    fn inheritance_on_catalog() {
        for name in catalog::NAMES {
            let f = catalog::by_name(name, 5).unwrap();
            let chi = uniform(33);
            let fam = selection_family(&f, &chi, 3, Norm::Euclidean).unwrap();
            let rep = fam.inheritance_report(&f, Norm::Euclidean);
            assert!(rep.holds(1e-9), "{name}: {rep:?}");
        }
    }
}
