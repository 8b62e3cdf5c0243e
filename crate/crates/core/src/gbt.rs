//! Gradient-boosted regression trees with a softmax multiclass objective.
//!
//! Each boosting round fits one depth-limited tree per class on the
//! softmax gradients `g = p - y` and hessians `h = 2p(1 - p)`. Candidate
//! thresholds come from per-feature quantile cuts; a node is split on the
//! candidate with the largest regularized loss reduction
//!
//! ```text
//! gain = 1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda) ] - gamma
//! ```
//!
//! and becomes a leaf when no candidate has positive gain.

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{softmax_into, Scalar};

const PRIOR_FLOOR: f64 = 1e-6;
const HESSIAN_FLOOR: f64 = 1e-16;
/// Relative margin a later candidate must beat to replace the incumbent split.
const TIE_TOLERANCE: f64 = 1e-10;

/// How candidate thresholds are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// At most `max_bins` quantile bins per feature.
    Histogram,
    /// Every midpoint between consecutive distinct training values.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub rng_seed: u64,
    pub max_bins: usize,
    pub split_mode: SplitMode,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self::expert_table()
    }
}

impl TrainParams {
    /// Settings of the SNR-band gate.
    pub fn cqi_table() -> Self {
        Self {
            learning_rate: 0.1,
            max_depth: 2,
            n_estimators: 200,
            subsample: 0.8,
            colsample_bytree: 0.8,
            min_child_weight: 1.0,
            gamma: 0.1,
            reg_alpha: 0.1,
            reg_lambda: 0.1,
            rng_seed: 0,
            max_bins: 256,
            split_mode: SplitMode::Histogram,
        }
    }

    /// Settings of each band expert (and the auxiliary importance model).
    pub fn expert_table() -> Self {
        Self { min_child_weight: 3.0, reg_alpha: 0.0, reg_lambda: 1.0, ..Self::cqi_table() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad("colsample_bytree must lie in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0 && self.gamma >= 0.0 && self.reg_alpha >= 0.0 && self.reg_lambda >= 0.0) {
            return bad("min_child_weight, gamma and regularizers must be non-negative");
        }
        if self.max_bins < 2 || self.max_bins > u16::MAX as usize {
            return bad("max_bins must lie in [2, 65535]");
        }
        Ok(())
    }
}

/// Loss reduction of splitting a node into (left, right).
pub fn split_gain<T: Scalar>(gl: T, hl: T, gr: T, hr: T, lambda: T, gamma: T) -> T {
    let g = gl + gr;
    let h = hl + hr;
    T::lit(0.5) * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum TreeNode<T: Scalar> {
    Split { feature: usize, threshold: T, left: usize, right: usize, gain: T, cover: T },
    Leaf { weight: T, cover: T },
}

/// A regression tree stored as a node arena with the root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Scalar> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Tree<T> {
    fn leaf(weight: T, cover: T) -> Self {
        Self { nodes: vec![TreeNode::Leaf { weight, cover }] }
    }

    pub fn predict(&self, x: &[T]) -> T {
        self.predict_with(|f| x[f])
    }

    /// Leaf weight reached when feature `f` reads as `value(f)`.
    pub fn predict_with(&self, value: impl Fn(usize) -> T) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    i = if value(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T: Scalar>(t: &Tree<T>, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Split { .. })).count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    /// Root split as `(feature, threshold)`, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, T)> {
        match &self.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoostedEnsemble<T: Scalar> {
    num_classes: usize,
    num_features: usize,
    learning_rate: T,
    base_score: Vec<T>,
    /// Round-major: tree for (round r, class c) lives at `r * num_classes + c`.
    trees: Vec<Tree<T>>,
    importance: Vec<T>,
    /// Set when training saw a single class and returned a constant model.
    pub single_class_warning: bool,
}

impl<T: Scalar> BoostedEnsemble<T> {
    /// Model with no trees: predictions are the softmax of `base_score`.
    pub fn constant(base_score: Vec<T>, num_features: usize, learning_rate: T) -> Self {
        Self {
            num_classes: base_score.len(),
            num_features,
            learning_rate,
            base_score,
            trees: Vec::new(),
            importance: vec![T::zero(); num_features],
            single_class_warning: false,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn rounds(&self) -> usize {
        self.trees.len() / self.num_classes
    }

    pub fn trees(&self) -> &[Tree<T>] {
        &self.trees
    }

    pub fn base_score(&self) -> &[T] {
        &self.base_score
    }

    pub fn tree(&self, round: usize, class: usize) -> &Tree<T> {
        &self.trees[round * self.num_classes + class]
    }

    pub fn margins(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.num_features {
            return Err(Error::DimensionMismatch { expected: self.num_features, got: x.len() });
        }
        let mut m = vec![T::zero(); self.num_classes];
        for (i, t) in self.trees.iter().enumerate() {
            m[i % self.num_classes] += t.predict(x);
        }
        for (mc, b) in m.iter_mut().zip(&self.base_score) {
            *mc = *b + self.learning_rate * *mc;
        }
        Ok(m)
    }

    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        let m = self.margins(x)?;
        let mut p = vec![T::zero(); m.len()];
        softmax_into(&m, &mut p);
        Ok(p)
    }

    /// Total split gain per feature; features never split on are absent.
    pub fn feature_importance(&self) -> BTreeMap<usize, T> {
        self.importance.iter().enumerate().filter(|(_, g)| **g > T::zero()).map(|(i, g)| (i, *g)).collect()
    }

    /// Dense importance vector (zero for unused features).
    pub fn importance_vector(&self) -> &[T] {
        &self.importance
    }

    /// `feature,gain` CSV, one line per feature with nonzero importance, descending gain.
    pub fn importance_csv(&self, names: &[String]) -> String {
        let mut rows: Vec<(usize, T)> = self.feature_importance().into_iter().collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite gains").then(a.0.cmp(&b.0)));
        let mut s = String::from("feature,gain\n");
        for (i, g) in rows {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("f{i}"));
            s.push_str(&format!("{name},{g}\n"));
        }
        s
    }
}

/// Feature matrix quantized to per-feature cut indices, column-major.
struct Binned<T> {
    n: usize,
    cuts: Vec<Vec<T>>,
    bins: Vec<u16>,
}

impl<T: Scalar> Binned<T> {
    fn new(x: ArrayView2<T>, mode: SplitMode, max_bins: usize) -> Self {
        let (n, f) = x.dim();
        let mut cuts = Vec::with_capacity(f);
        let mut bins = vec![0u16; n * f];
        let mut col = Vec::with_capacity(n);
        for j in 0..f {
            col.clear();
            col.extend(x.column(j).iter().copied());
            col.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
            let c = feature_cuts(&col, mode, max_bins);
            for (i, &v) in x.column(j).iter().enumerate() {
                bins[j * n + i] = c.partition_point(|&t| t < v) as u16;
            }
            cuts.push(c);
        }
        Self { n, cuts, bins }
    }

    fn column(&self, j: usize) -> &[u16] {
        &self.bins[j * self.n..(j + 1) * self.n]
    }
}

/// Ascending thresholds; bin `b` holds values in `(cuts[b-1], cuts[b]]`.
fn feature_cuts<T: Scalar>(sorted: &[T], mode: SplitMode, max_bins: usize) -> Vec<T> {
    let mut uniq: Vec<T> = sorted.to_vec();
    uniq.dedup();
    let half = T::lit(0.5);
    let midpoints = |u: &[T]| u.windows(2).map(|w| w[0] + (w[1] - w[0]) * half).collect::<Vec<T>>();
    if mode == SplitMode::Exact || uniq.len() <= max_bins {
        return midpoints(&uniq);
    }
    let n = sorted.len();
    let max = *sorted.last().expect("non-empty column");
    let mut c: Vec<T> = (1..max_bins).map(|q| sorted[(q * n / max_bins).min(n - 1)]).filter(|&v| v < max).collect();
    c.dedup();
    c
}

struct Grower<'a, T: Scalar> {
    binned: &'a Binned<T>,
    params: &'a TrainParams,
    g: &'a [T],
    h: &'a [T],
    cols: &'a [usize],
    offsets: Vec<usize>,
    nodes: Vec<TreeNode<T>>,
    importance: &'a mut [T],
}

#[derive(Clone, Copy)]
struct Best<T> {
    col: usize,
    bin: usize,
    gain: T,
}

impl<T: Scalar> Grower<'_, T> {
    fn histogram(&self, rows: &[u32]) -> Vec<[T; 2]> {
        let mut hist = vec![[T::zero(); 2]; *self.offsets.last().expect("offsets")];
        for (k, &j) in self.cols.iter().enumerate() {
            let col = self.binned.column(j);
            let hs = &mut hist[self.offsets[k]..self.offsets[k + 1]];
            for &r in rows {
                let r = r as usize;
                let cell = &mut hs[col[r] as usize];
                cell[0] += self.g[r];
                cell[1] += self.h[r];
            }
        }
        hist
    }

    fn best_split(&self, hist: &[[T; 2]], g_tot: T, h_tot: T) -> Option<Best<T>> {
        let lambda = T::lit(self.params.reg_lambda);
        let gamma = T::lit(self.params.gamma);
        let mcw = T::lit(self.params.min_child_weight);
        let tol = T::lit(TIE_TOLERANCE);
        let mut best: Option<Best<T>> = None;
        for (k, &j) in self.cols.iter().enumerate() {
            let hs = &hist[self.offsets[k]..self.offsets[k + 1]];
            let (mut gl, mut hl) = (T::zero(), T::zero());
            for (b, cell) in hs[..hs.len() - 1].iter().enumerate() {
                gl += cell[0];
                hl += cell[1];
                let hr = h_tot - hl;
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gain = split_gain(gl, hl, g_tot - gl, hr, lambda, gamma);
                let better = match best {
                    None => true,
                    Some(bb) => gain > bb.gain + tol * bb.gain.abs().max(T::one()),
                };
                if better {
                    best = Some(Best { col: j, bin: b, gain });
                }
            }
        }
        best.filter(|b| b.gain > T::zero())
    }

    fn leaf_weight(&self, g: T, h: T) -> T {
        let alpha = T::lit(self.params.reg_alpha);
        let shrunk = if g > alpha {
            g - alpha
        } else if g < -alpha {
            g + alpha
        } else {
            T::zero()
        };
        -shrunk / (h + T::lit(self.params.reg_lambda))
    }

    fn grow(&mut self, rows: Vec<u32>, hist: Vec<[T; 2]>, depth: usize) -> usize {
        let (g_tot, h_tot) = rows.iter().fold((T::zero(), T::zero()), |(g, h), &r| (g + self.g[r as usize], h + self.h[r as usize]));
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { weight: T::zero(), cover: h_tot });
        let split = if depth < self.params.max_depth { self.best_split(&hist, g_tot, h_tot) } else { None };
        let Some(best) = split else {
            self.nodes[id] = TreeNode::Leaf { weight: self.leaf_weight(g_tot, h_tot), cover: h_tot };
            return id;
        };
        let col = self.binned.column(best.col);
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| col[r as usize] as usize <= best.bin);
        drop(rows);
        let (lh, rh) = if depth + 1 < self.params.max_depth {
            // build the smaller child directly, derive its sibling by subtraction
            let small_left = left_rows.len() <= right_rows.len();
            let small = self.histogram(if small_left { &left_rows } else { &right_rows });
            let big: Vec<[T; 2]> = hist.iter().zip(&small).map(|(p, s)| [p[0] - s[0], p[1] - s[1]]).collect();
            if small_left {
                (small, big)
            } else {
                (big, small)
            }
        } else {
            (Vec::new(), Vec::new())
        };
        self.importance[best.col] += best.gain;
        let left = self.grow(left_rows, lh, depth + 1);
        let right = self.grow(right_rows, rh, depth + 1);
        let threshold = self.binned.cuts[best.col][best.bin];
        self.nodes[id] = TreeNode::Split { feature: best.col, threshold, left, right, gain: best.gain, cover: h_tot };
        id
    }
}

fn check_inputs<T: Scalar>(x: ArrayView2<T>, y: &[usize], num_classes: usize) -> Result<()> {
    let (n, _) = x.dim();
    if n == 0 {
        return Err(Error::EmptyData("no training rows".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument("at least two classes are required".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= num_classes) {
        return Err(Error::LabelOutOfRange { index: bad, len: num_classes });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("features contain NaN or infinity".into()));
    }
    Ok(())
}

/// Fits a softmax boosted ensemble over `num_classes` classes.
pub fn fit<T: Scalar>(x: ArrayView2<T>, y: &[usize], num_classes: usize, params: &TrainParams) -> Result<BoostedEnsemble<T>> {
    params.validate()?;
    check_inputs(x, y, num_classes)?;
    let (n, nf) = x.dim();
    if n > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many rows".into()));
    }
    let mut counts = vec![0usize; num_classes];
    for &c in y {
        counts[c] += 1;
    }
    let base: Vec<T> =
        counts.iter().map(|&c| T::lit((c as f64 / n as f64).max(PRIOR_FLOOR).ln())).collect();
    let lr = T::lit(params.learning_rate);
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        let mut m = BoostedEnsemble::constant(base, nf, lr);
        m.single_class_warning = true;
        return Ok(m);
    }

    let binned = Binned::new(x, params.split_mode, params.max_bins);
    let mut row_rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut col_rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    col_rng.set_stream(1);
    let n_cols = ((params.colsample_bytree * nf as f64).round() as usize).clamp(1, nf);

    let mut margins: Vec<T> = (0..n).flat_map(|_| base.iter().copied()).collect();
    let mut probs = vec![T::zero(); n * num_classes];
    let mut g = vec![T::zero(); n];
    let mut h = vec![T::zero(); n];
    let mut importance = vec![T::zero(); nf];
    let mut trees = Vec::with_capacity(params.n_estimators * num_classes);
    let mut deltas = vec![T::zero(); n * num_classes];

    for _ in 0..params.n_estimators {
        for (m, p) in margins.chunks(num_classes).zip(probs.chunks_mut(num_classes)) {
            softmax_into(m, p);
        }
        let rows: Vec<u32> = if params.subsample < 1.0 {
            let mut r: Vec<u32> = (0..n as u32).filter(|_| row_rng.random::<f64>() < params.subsample).collect();
            if r.is_empty() {
                r.push(row_rng.random_range(0..n as u32));
            }
            r
        } else {
            (0..n as u32).collect()
        };
        for c in 0..num_classes {
            let cols: Vec<usize> = if n_cols < nf {
                let mut v = index::sample(&mut col_rng, nf, n_cols).into_vec();
                v.sort_unstable();
                v
            } else {
                (0..nf).collect()
            };
            for i in 0..n {
                let p = probs[i * num_classes + c];
                let target = if y[i] == c { T::one() } else { T::zero() };
                g[i] = p - target;
                h[i] = (T::lit(2.0) * p * (T::one() - p)).max(T::lit(HESSIAN_FLOOR));
            }
            let mut offsets = Vec::with_capacity(cols.len() + 1);
            offsets.push(0);
            for &j in &cols {
                offsets.push(offsets.last().unwrap() + binned.cuts[j].len() + 1);
            }
            let mut grower =
                Grower { binned: &binned, params, g: &g, h: &h, cols: &cols, offsets, nodes: Vec::new(), importance: &mut importance };
            let tree = if counts[c] == 0 {
                // nothing to separate: a single leaf pulling the absent class down
                let (gs, hs) = rows.iter().fold((T::zero(), T::zero()), |(a, b), &r| (a + g[r as usize], b + h[r as usize]));
                Tree::leaf(grower.leaf_weight(gs, hs), hs)
            } else {
                let root_hist = grower.histogram(&rows);
                grower.grow(rows.clone(), root_hist, 0);
                Tree { nodes: grower.nodes }
            };
            for (i, row) in x.rows().into_iter().enumerate() {
                deltas[i * num_classes + c] = tree.predict_with(|f| row[f]);
            }
            trees.push(tree);
        }
        for (m, d) in margins.iter_mut().zip(&deltas) {
            *m += lr * *d;
        }
    }

    Ok(BoostedEnsemble {
        num_classes,
        num_features: nf,
        learning_rate: lr,
        base_score: base,
        trees,
        importance,
        single_class_warning: false,
    })
}

/// Mean softmax cross-entropy of `model` on `(x, y)`.
pub fn log_loss<T: Scalar>(model: &BoostedEnsemble<T>, x: ArrayView2<T>, y: &[usize]) -> Result<T> {
    let mut total = T::zero();
    for (row, &c) in x.rows().into_iter().zip(y) {
        let p = model.predict_proba(&row.to_vec())?;
        total -= p[c].max(T::min_positive_value()).ln();
    }
    Ok(total / T::from_usize_lossy(y.len().max(1)))
}
