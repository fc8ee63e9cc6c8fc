//! CART decision trees (Gini impurity) and bagged random forests.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{derive_seed, seeded, Rng};

/// Row-major feature matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    width: usize,
}

impl Matrix {
    pub fn new(width: usize) -> Self {
        Matrix { data: Vec::new(), width }
    }

    pub fn from_rows(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || !data.len().is_multiple_of(width) {
            return Err(Error::LengthMismatch {
                expected: width,
                found: data.len(),
            });
        }
        Ok(Matrix { data, width })
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.width {
            return Err(Error::LengthMismatch {
                expected: self.width,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.width.max(1))
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// A copy keeping only `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows() * cols.len());
        for r in self.iter_rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        Matrix { data, width: cols.len() }
    }

    /// A copy keeping only `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.width);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix { data, width: self.width }
    }
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mtry {
    /// `ceil(sqrt(width))`.
    Sqrt,
    All,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, width: usize) -> usize {
        let k = match self {
            Mtry::Sqrt => math::sqrt(width as f64).ceil_usize(),
            Mtry::All => width,
            Mtry::Fixed(k) => k,
        };
        k.clamp(1, width.max(1))
    }
}

trait CeilUsize {
    fn ceil_usize(self) -> usize;
}

impl CeilUsize for f64 {
    fn ceil_usize(self) -> usize {
        let t = self as usize;
        if (t as f64) < self {
            t + 1
        } else {
            t
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_samples_split: usize,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub mtry: Mtry,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            min_samples_split: 2,
            max_depth: None,
            mtry: Mtry::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    /// No bootstrap and every feature at every split; deterministic CART.
    pub fn exhaustive() -> Self {
        ForestConfig {
            mtry: Mtry::All,
            bootstrap: false,
            ..ForestConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: Vec<u32> },
}

/// A tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_counts(&self, row: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(row);
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        counts.iter().map(|&c| f64::from(c) / total as f64).collect()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            if let Node::Split { left, right, .. } = &self.nodes[i] {
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        best
    }

    fn validate(&self, width: usize, n_classes: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Split { feature, left, right, threshold } => {
                    if *feature >= width || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return bad(alloc::format!("node {i} references out-of-range feature or child"));
                    }
                    if *left <= i || *right <= i || threshold.is_nan() {
                        return bad(alloc::format!("node {i} is not a forward split"));
                    }
                }
                Node::Leaf { counts } => {
                    if counts.len() != n_classes || counts.iter().all(|&c| c == 0) {
                        return bad(alloc::format!("leaf {i} has an invalid histogram"));
                    }
                }
            }
        }
        Ok(())
    }
}

struct Pending {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
}

fn class_counts(y: &[usize], samples: &[usize], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &s in samples {
        counts[y[s]] += 1;
    }
    counts
}

fn sum_sq_ratio(counts: &[u32], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let s: f64 = counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
    s / f64::from(n)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Sum over children of `sum_k c_k^2 / n_child`; larger means purer.
    score: f64,
}

/// Best threshold on one feature, or `None` if it is constant here.
fn best_threshold(
    x: &Matrix,
    y: &[usize],
    samples: &[usize],
    feature: usize,
    n_classes: usize,
    total: &[u32],
    pairs: &mut Vec<(f64, usize)>,
) -> Option<(f64, f64)> {
    pairs.clear();
    pairs.extend(samples.iter().map(|&s| (x.get(s, feature), y[s])));
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return None;
    }
    let n = pairs.len() as u32;
    let mut left = vec![0u32; n_classes];
    let mut right = total.to_vec();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..pairs.len() - 1 {
        let c = pairs[i].1;
        left[c] += 1;
        right[c] -= 1;
        let (a, b) = (pairs[i].0, pairs[i + 1].0);
        if a == b {
            continue;
        }
        let ln = i as u32 + 1;
        let score = sum_sq_ratio(&left, ln) + sum_sq_ratio(&right, n - ln);
        if best.is_none_or(|(s, _)| score > s * (1.0 + 1e-12)) {
            let mut t = a + (b - a) / 2.0;
            if t >= b {
                t = a;
            }
            best = Some((score, t));
        }
    }
    best
}

/// Grows one CART tree on `samples` (indices into `x`, repeats allowed).
pub fn train_tree(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    config: &ForestConfig,
    rng: &mut Rng,
) -> Result<Tree> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let width = x.width();
    let mtry = config.mtry.resolve(width);
    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
    let mut stack = vec![Pending {
        node: 0,
        samples: samples.to_vec(),
        depth: 0,
    }];
    let mut pairs = Vec::with_capacity(samples.len());
    let mut order: Vec<usize> = (0..width).collect();
    while let Some(p) = stack.pop() {
        let counts = class_counts(y, &p.samples, n_classes);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = config.max_depth.is_some_and(|d| p.depth >= d);
        if pure || (p.samples.len() < config.min_samples_split) || depth_capped {
            nodes[p.node] = Node::Leaf { counts };
            continue;
        }

        // Visit features in random order until `mtry` non-constant ones are
        // found, then score them in ascending index order.
        let mut chosen = Vec::with_capacity(mtry);
        for i in 0..width {
            let j = rng.gen_range(i..width);
            order.swap(i, j);
            let f = order[i];
            let first = x.get(p.samples[0], f);
            if p.samples.iter().any(|&s| x.get(s, f) != first) {
                chosen.push(f);
                if chosen.len() == mtry {
                    break;
                }
            }
        }
        chosen.sort_unstable();
        let mut best: Option<BestSplit> = None;
        for &f in &chosen {
            if let Some((score, threshold)) = best_threshold(x, y, &p.samples, f, n_classes, &counts, &mut pairs) {
                if best.as_ref().is_none_or(|b| score > b.score * (1.0 + 1e-12)) {
                    best = Some(BestSplit { feature: f, threshold, score });
                }
            }
        }
        // Zero-gain splits are allowed so that parity-like patterns (where no
        // single split reduces impurity) are still separated further down.
        let Some(split) = best else {
            nodes[p.node] = Node::Leaf { counts };
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = p
            .samples
            .iter()
            .partition(|&&s| x.get(s, split.feature) <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[p.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push(Pending { node: right, samples: r, depth: p.depth + 1 });
        stack.push(Pending { node: left, samples: l, depth: p.depth + 1 });
    }
    Ok(Tree { nodes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub classes: Vec<String>,
    pub schema_hash: u64,
    pub width: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

fn check_training_input(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.rows() == 0 || y.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if n_classes == 0 || y.iter().any(|&c| c >= n_classes) {
        return Err(Error::InvalidArgument("label outside the class list".into()));
    }
    Ok(())
}

/// Tree `index` of a forest seeded with `seed`. Trees are independent, so
/// they can be trained in any order or in parallel.
pub fn train_member(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    config: &ForestConfig,
    seed: u64,
    index: usize,
) -> Result<Tree> {
    check_training_input(x, y, n_classes)?;
    let mut rng = seeded(derive_seed(seed, index as u64));
    let rows = x.rows();
    let samples: Vec<usize> = if config.bootstrap {
        (0..rows).map(|_| rng.gen_range(0..rows)).collect()
    } else {
        (0..rows).collect()
    };
    train_tree(x, y, n_classes, &samples, config, &mut rng)
}

pub fn train_forest(
    x: &Matrix,
    y: &[usize],
    classes: Vec<String>,
    schema_hash: u64,
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel> {
    check_training_input(x, y, classes.len())?;
    if config.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    let trees = (0..config.n_trees)
        .map(|i| train_member(x, y, classes.len(), config, seed, i))
        .collect::<Result<Vec<_>>>()?;
    ForestModel::from_parts(config.clone(), classes, schema_hash, x.width(), seed, trees)
}

impl ForestModel {
    pub fn from_parts(
        config: ForestConfig,
        classes: Vec<String>,
        schema_hash: u64,
        width: usize,
        seed: u64,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
        }
        for t in &trees {
            t.validate(width, classes.len())?;
        }
        Ok(ForestModel {
            config,
            classes,
            schema_hash,
            width,
            seed,
            trees,
        })
    }

    /// Mean of the per-tree normalized leaf histograms.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width {
            return Err(Error::LengthMismatch {
                expected: self.width,
                found: row.len(),
            });
        }
        let mut acc = vec![0.0; self.classes.len()];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(row)) {
                *a += p;
            }
        }
        let inv = 1.0 / self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Ok(acc)
    }

    /// Index of the most probable class; ties go to the earlier class.
    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    pub fn predict_label(&self, row: &[f64]) -> Result<&str> {
        Ok(&self.classes[self.predict(row)?])
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

/// First index holding the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn classes(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("c{i}")).collect()
    }

    /// Gini-weighted impurity of every midpoint threshold on a 1-D set.
    fn brute_force_threshold(xs: &[f64], ys: &[usize]) -> (f64, f64) {
        let mut sorted: Vec<f64> = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let gini = |idx: &[usize]| {
            if idx.is_empty() {
                return 0.0;
            }
            let n = idx.len() as f64;
            let mut c = [0.0f64; 2];
            for &i in idx {
                c[ys[i]] += 1.0;
            }
            1.0 - c.iter().map(|k| (k / n) * (k / n)).sum::<f64>()
        };
        let mut best = (f64::INFINITY, 0.0);
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let l: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] <= t).collect();
            let r: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] > t).collect();
            let imp = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / xs.len() as f64;
            if imp < best.0 {
                best = (imp, t);
            }
        }
        best
    }

    #[test]
    fn single_class_is_one_leaf() {
        let x = Matrix::from_rows(1, vec![1.0, 2.0, 3.0]).unwrap();
        let f = train_forest(&x, &[0, 0, 0], classes(2), 0, &ForestConfig::exhaustive(), 1).unwrap();
        assert_eq!(f.trees[0].nodes.len(), 1);
        assert_eq!(f.predict_proba(&[9.0]).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn one_dimensional_split_at_midpoint() {
        let xs = [0.0, 1.0, 10.0, 11.0];
        let ys = [0, 0, 1, 1];
        assert_eq!(brute_force_threshold(&xs, &ys), (0.0, 5.5));
        let x = Matrix::from_rows(1, xs.to_vec()).unwrap();
        let cfg = ForestConfig { n_trees: 1, mtry: Mtry::Fixed(1), bootstrap: false, ..Default::default() };
        let f = train_forest(&x, &ys, classes(2), 0, &cfg, 3).unwrap();
        match &f.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 5.5),
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(f.trees[0].nodes.len(), 3);
        for (i, &xv) in xs.iter().enumerate() {
            assert_eq!(f.predict(&[xv]).unwrap(), ys[i]);
        }
    }

    #[test]
    fn one_sample_is_a_leaf() {
        let x = Matrix::from_rows(2, vec![1.0, 2.0]).unwrap();
        let f = train_forest(&x, &[1], classes(2), 0, &ForestConfig::exhaustive(), 0).unwrap();
        assert_eq!(f.trees[0].nodes, [Node::Leaf { counts: vec![0, 1] }]);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let x = Matrix::new(3);
        assert_eq!(
            train_forest(&x, &[], classes(2), 0, &ForestConfig::default(), 0).unwrap_err(),
            Error::EmptySampleSet
        );
        let mut rng = seeded(0);
        assert_eq!(
            train_tree(&x, &[], 2, &[], &ForestConfig::default(), &mut rng).unwrap_err(),
            Error::EmptySampleSet
        );
    }

    #[test]
    fn degenerate_forest_matches_single_tree() {
        let x = Matrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0, 2.0, 2.0, 3.0, 1.0, 0.5, 0.5]).unwrap();
        let y = [0, 1, 1, 0, 1];
        let cfg = ForestConfig { n_trees: 1, ..ForestConfig::exhaustive() };
        let f = train_forest(&x, &y, classes(2), 0, &cfg, 9).unwrap();
        let mut rng = seeded(derive_seed(9, 0));
        let t = train_tree(&x, &y, 2, &[0, 1, 2, 3, 4], &cfg, &mut rng).unwrap();
        for r in x.iter_rows() {
            assert_eq!(f.trees[0].predict_proba(r), t.predict_proba(r));
        }
    }

    #[test]
    fn voting_and_ties() {
        let leaf = |c: Vec<u32>| Tree { nodes: vec![Node::Leaf { counts: c }] };
        let f = ForestModel::from_parts(ForestConfig::default(), classes(2), 0, 1, 0, vec![leaf(vec![3, 0]), leaf(vec![0, 5])]).unwrap();
        assert_eq!(f.predict_proba(&[0.0]).unwrap(), [0.5, 0.5]);
        assert_eq!(f.predict(&[0.0]).unwrap(), 0);
        assert_eq!(argmax(&[0.9, 0.1]), 0);
        assert!(matches!(f.predict_proba(&[0.0, 1.0]), Err(Error::LengthMismatch { .. })));
        let bad = ForestModel::from_parts(ForestConfig::default(), classes(2), 0, 1, 0, vec![leaf(vec![0, 0])]);
        assert!(bad.is_err());
    }

    #[test]
    fn separable_toy_set_fits_with_defaults() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = i as f64 / 4.0;
            let b = (i * 7 % 13) as f64;
            data.extend([a, b]);
            y.push(usize::from(a + 0.3 * b > 6.0));
        }
        let x = Matrix::from_rows(2, data).unwrap();
        let f = train_forest(&x, &y, classes(2), 0, &ForestConfig::default(), 5).unwrap();
        let acc = x.iter_rows().zip(&y).filter(|(r, &t)| f.predict(r).unwrap() == t).count();
        assert_eq!(acc, y.len());
        let again = train_forest(&x, &y, classes(2), 0, &ForestConfig::default(), 5).unwrap();
        assert_eq!(f, again);
        assert_eq!(f.classes[0], "c0".to_string());
    }

    fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (1usize..4, 2usize..30).prop_flat_map(|(w, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(-5i32..5, w), n),
                proptest::collection::vec(0usize..3, n),
            )
                .prop_map(|(rows, ys)| {
                    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
                    (rows, ys)
                })
        })
    }

    fn consistent(rows: &[Vec<f64>], ys: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut seen: Vec<(Vec<f64>, usize)> = Vec::new();
        for (r, &y) in rows.iter().zip(ys) {
            if !seen.iter().any(|(s, _)| s == r) {
                seen.push((r.clone(), y));
            }
        }
        seen.into_iter().unzip()
    }

    proptest! {
        #[test]
        fn exhaustive_forest_fits_consistent_data((rows, ys) in dataset()) {
            let (rows, ys) = consistent(&rows, &ys);
            let w = rows[0].len();
            let x = Matrix::from_rows(w, rows.concat()).unwrap();
            let f = train_forest(&x, &ys, classes(3), 0, &ForestConfig::exhaustive(), 1).unwrap();
            for (r, &y) in x.iter_rows().zip(&ys) {
                prop_assert_eq!(f.predict(r).unwrap(), y);
            }
        }

        #[test]
        fn probabilities_on_simplex((rows, ys) in dataset(), probe in proptest::collection::vec(-6.0f64..6.0, 3)) {
            let w = rows[0].len();
            let x = Matrix::from_rows(w, rows.concat()).unwrap();
            let f = train_forest(&x, &ys, classes(3), 0, &ForestConfig::default(), 2).unwrap();
            let p = f.predict_proba(&probe[..w]).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn monotone_rescaling_preserves_predictions((rows, ys) in dataset(), col in 0usize..3, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let w = rows[0].len();
            let col = col % w;
            let warp = |v: f64| (v * scale + shift).exp();
            let x = Matrix::from_rows(w, rows.concat()).unwrap();
            let mut warped_rows = rows.clone();
            for r in &mut warped_rows {
                r[col] = warp(r[col]);
            }
            let xw = Matrix::from_rows(w, warped_rows.concat()).unwrap();
            // Without bootstrap every training value is seen, so each row
            // falls between the same pair of thresholds before and after.
            let cfg = ForestConfig { bootstrap: false, ..ForestConfig::default() };
            let f = train_forest(&x, &ys, classes(3), 0, &cfg, 11).unwrap();
            let g = train_forest(&xw, &ys, classes(3), 0, &cfg, 11).unwrap();
            for r in &rows {
                let mut probe = r.clone();
                let a = f.predict(&probe).unwrap();
                probe[col] = warp(probe[col]);
                prop_assert_eq!(a, g.predict(&probe).unwrap());
            }
        }
    }
}
