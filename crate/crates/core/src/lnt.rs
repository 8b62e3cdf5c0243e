//! Supervised linear projection of importance-ranked feature subspaces into
//! class-probability features.
//!
//! For every configured subspace size the block keeps the top-ranked feature
//! indices, a z-score standardizer and a one-vs-rest logistic projector; the
//! softmax of the projector logits is appended to the raw feature vector.

use std::cmp::Ordering;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax, softmax_into, Scalar};

const POWER_ITERATIONS: usize = 100;
/// Safety factor on the power-iteration estimate of the Lipschitz constant.
const LIPSCHITZ_MARGIN: f64 = 1.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LntConfig {
    pub sizes: Vec<usize>,
    pub folds: usize,
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once every gradient entry is below this in magnitude.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LntConfig {
    fn default() -> Self {
        Self { sizes: vec![64, 128, 256, 512], folds: 5, l2: 1e-2, max_iter: 500, tol: 1e-6, seed: 0 }
    }
}

impl LntConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("subspace sizes must be positive".into()));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("subspace sizes must be strictly ascending".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("at least two folds are required".into()));
        }
        if !(self.l2 >= 0.0 && self.tol >= 0.0) {
            return Err(Error::InvalidArgument("l2 and tol must be non-negative".into()));
        }
        Ok(())
    }

    /// Names of the appended probability features.
    pub fn feature_names(&self, num_classes: usize) -> Vec<String> {
        self.sizes.iter().flat_map(|s| (0..num_classes).map(move |c| format!("lnt.s{s}.p{c}"))).collect()
    }
}

/// Feature indices per subspace, in descending importance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub requested: Vec<usize>,
    pub indices: Vec<Vec<usize>>,
}

/// Ranks features by descending importance (ties to the lower index) and
/// keeps the top `s` for each size, clipped to the feature count.
pub fn select_subspaces<T: Scalar>(importance: &[T], sizes: &[usize]) -> Result<SubspaceSpec> {
    if importance.is_empty() {
        return Err(Error::EmptyData("importance vector is empty".into()));
    }
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].partial_cmp(&importance[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let indices = sizes.iter().map(|&s| order[..s.min(order.len())].to_vec()).collect();
    Ok(SubspaceSpec { requested: sizes.to_vec(), indices })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<T: Scalar> {
    pub mu: Vec<T>,
    pub sigma: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Population mean and deviation per column; constant columns get `sigma = 1`.
    pub fn fit(x: ArrayView2<T>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::EmptyData("cannot standardize zero rows".into()));
        }
        let nt = T::from_usize_lossy(n);
        let mut mu = Vec::with_capacity(x.ncols());
        let mut sigma = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / nt;
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nt;
            let sd = var.sqrt();
            mu.push(m);
            sigma.push(if sd > T::lit(1e-12) * m.abs().max(T::one()) { sd } else { T::one() });
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter().zip(&self.mu).zip(&self.sigma).map(|((&v, &m), &s)| (v - m) / s).collect())
    }

    pub fn invert(&self, z: &[T]) -> Vec<T> {
        z.iter().zip(&self.mu).zip(&self.sigma).map(|((&v, &m), &s)| v * s + m).collect()
    }

    pub fn apply_matrix(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut z = x.to_owned();
        for (j, mut col) in z.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mu[j], self.sigma[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        z
    }
}

/// One-vs-rest logistic logits `l_c = w_c . z + b_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LinearProjector<T: Scalar> {
    /// `dim x classes`.
    pub weights: Array2<T>,
    pub bias: Vec<T>,
    pub l2: T,
    pub chosen_fold: usize,
    pub folds_used: usize,
    /// Set when some class had fewer rows than the configured fold count.
    pub reduced_folds_warning: bool,
}

impl<T: Scalar> LinearProjector<T> {
    pub fn zeros(dim: usize, num_classes: usize) -> Self {
        Self {
            weights: Array2::zeros((dim, num_classes)),
            bias: vec![T::zero(); num_classes],
            l2: T::zero(),
            chosen_fold: 0,
            folds_used: 0,
            reduced_folds_warning: false,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn logits(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        let l = ArrayView1::from(z).dot(&self.weights);
        Ok(l.iter().zip(&self.bias).map(|(&a, &b)| a + b).collect())
    }

    /// Softmax of the logits.
    pub fn project(&self, z: &[T]) -> Result<Vec<T>> {
        let l = self.logits(z)?;
        let mut p = vec![T::zero(); l.len()];
        softmax_into(&l, &mut p);
        Ok(p)
    }

    fn logits_matrix(&self, z: ArrayView2<T>) -> Array2<T> {
        let mut l = z.dot(&self.weights);
        for mut row in l.rows_mut() {
            for (v, &b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        l
    }
}

fn softplus<T: Scalar>(l: T) -> T {
    l.max(T::zero()) + (-l.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(l: T) -> T {
    if l >= T::zero() {
        T::one() / (T::one() + (-l).exp())
    } else {
        let e = l.exp();
        e / (T::one() + e)
    }
}

/// Regularized binary logistic loss of class `c` versus the rest:
/// `mean(softplus(l) - y l) + l2/2 |w|^2`, with the bias unpenalized.
pub fn ovr_loss<T: Scalar>(z: ArrayView2<T>, y: &[usize], class: usize, w: &[T], b: T, l2: T) -> T {
    let l = z.dot(&ArrayView1::from(w));
    let n = T::from_usize_lossy(y.len());
    let data: T =
        l.iter().zip(y).map(|(&li, &yi)| softplus(li + b) - if yi == class { li + b } else { T::zero() }).sum::<T>() / n;
    data + T::lit(0.5) * l2 * w.iter().map(|&v| v * v).sum::<T>()
}

/// Analytic gradient of [`ovr_loss`] with respect to `(w, b)`.
pub fn ovr_gradient<T: Scalar>(z: ArrayView2<T>, y: &[usize], class: usize, w: &[T], b: T, l2: T) -> (Vec<T>, T) {
    let l = z.dot(&ArrayView1::from(w));
    let n = T::from_usize_lossy(y.len());
    let r: Array1<T> =
        l.iter().zip(y).map(|(&li, &yi)| sigmoid(li + b) - if yi == class { T::one() } else { T::zero() }).collect();
    let gw = z.t().dot(&r);
    let grad_w = gw.iter().zip(w).map(|(&g, &wi)| g / n + l2 * wi).collect();
    (grad_w, r.sum() / n)
}

/// Result of full-batch gradient descent on all one-vs-rest problems.
pub struct OvrFit<T: Scalar> {
    pub weights: Array2<T>,
    pub bias: Vec<T>,
    /// Sum over classes of the regularized loss, one entry per iteration (plus the start).
    pub loss_history: Vec<T>,
    pub iterations: usize,
}

fn lipschitz_bound<T: Scalar>(z: ArrayView2<T>, l2: T) -> T {
    // largest eigenvalue of [z 1]^T [z 1] / n by power iteration
    let (n, d) = z.dim();
    let nt = T::from_usize_lossy(n);
    let mut v = vec![T::one(); d + 1];
    let mut lambda = T::one();
    for _ in 0..POWER_ITERATIONS {
        let vw = ArrayView1::from(&v[..d]);
        let mut u = z.dot(&vw);
        u.mapv_inplace(|x| x + v[d]);
        let mut next: Vec<T> = z.t().dot(&u).iter().map(|&x| x / nt).collect();
        next.push(u.sum() / nt);
        let norm = next.iter().map(|&x| x * x).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            break;
        }
        lambda = norm / v.iter().map(|&x| x * x).sum::<T>().sqrt();
        v = next.into_iter().map(|x| x / norm).collect();
    }
    T::lit(0.25 * LIPSCHITZ_MARGIN) * lambda + l2
}

/// Trains every one-vs-rest classifier by gradient descent with step `1/L`.
/// Classes whose gradient max-norm drops below `tol` are frozen.
pub fn fit_ovr<T: Scalar>(
    z: ArrayView2<T>,
    y: &[usize],
    num_classes: usize,
    l2: T,
    max_iter: usize,
    tol: T,
    track_loss: bool,
) -> OvrFit<T> {
    let (n, d) = z.dim();
    let nt = T::from_usize_lossy(n);
    let step = T::one() / lipschitz_bound(z, l2);
    let mut w = Array2::<T>::zeros((d, num_classes));
    let mut b = vec![T::zero(); num_classes];
    let mut active = vec![true; num_classes];
    let mut history = Vec::new();
    let loss_of = |w: &Array2<T>, b: &[T]| -> T {
        (0..num_classes).map(|c| ovr_loss(z, y, c, &w.column(c).to_vec(), b[c], l2)).sum()
    };
    if track_loss {
        history.push(loss_of(&w, &b));
    }
    let mut iterations = 0;
    for _ in 0..max_iter {
        let mut r = z.dot(&w);
        for (i, mut row) in r.rows_mut().into_iter().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let target = if y[i] == c { T::one() } else { T::zero() };
                *v = sigmoid(*v + b[c]) - target;
            }
        }
        let mut gw = z.t().dot(&r);
        gw.mapv_inplace(|v| v / nt);
        gw.scaled_add(l2, &w);
        let gb: Vec<T> = r.sum_axis(Axis(0)).iter().map(|&v| v / nt).collect();
        for c in 0..num_classes {
            if !active[c] {
                continue;
            }
            let gmax = gw.column(c).iter().fold(gb[c].abs(), |m, v| m.max(v.abs()));
            if gmax < tol {
                active[c] = false;
                continue;
            }
            let mut wc = w.column_mut(c);
            wc.scaled_add(-step, &gw.column(c));
            b[c] -= step * gb[c];
        }
        if !active.iter().any(|&a| a) {
            break;
        }
        iterations += 1;
        if track_loss {
            history.push(loss_of(&w, &b));
        }
    }
    OvrFit { weights: w, bias: b, loss_history: history, iterations }
}

/// Class-stratified fold id per row: each class's rows, in the given order,
/// are shuffled with a seeded generator and dealt round-robin.
pub fn stratified_folds(y: &[usize], num_classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; y.len()];
    for c in 0..num_classes {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        rows.shuffle(&mut rng);
        for (k, i) in rows.into_iter().enumerate() {
            out[i] = k % folds;
        }
    }
    out
}

fn row_hash<T: Scalar>(row: ArrayView1<T>, label: usize) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |bytes: [u8; 8]| {
        for byte in bytes {
            h ^= u64::from(byte);
            h = h.wrapping_mul(PRIME);
        }
    };
    eat((label as u64).to_le_bytes());
    for v in row {
        eat(v.as_f64().to_bits().to_le_bytes());
    }
    h
}

/// Row order that depends only on row contents: by content hash, then by
/// label and values for collisions.
pub fn canonical_order<T: Scalar>(x: ArrayView2<T>, y: &[usize]) -> Vec<usize> {
    let hashes: Vec<u64> = x.rows().into_iter().zip(y).map(|(r, &l)| row_hash(r, l)).collect();
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        hashes[a].cmp(&hashes[b]).then(y[a].cmp(&y[b])).then_with(|| {
            x.row(a)
                .iter()
                .zip(x.row(b).iter())
                .map(|(p, q)| p.as_f64().total_cmp(&q.as_f64()))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    });
    order
}

fn macro_accuracy(pred: &[usize], truth: &[usize], num_classes: usize) -> f64 {
    let mut hit = vec![0usize; num_classes];
    let mut tot = vec![0usize; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        tot[t] += 1;
        hit[t] += usize::from(p == t);
    }
    let present: Vec<f64> = (0..num_classes).filter(|&c| tot[c] > 0).map(|c| hit[c] as f64 / tot[c] as f64).collect();
    present.iter().sum::<f64>() / present.len().max(1) as f64
}

/// Cross-validated projector on already-canonical rows `x` (unstandardized).
/// Returns the retained projector and the standardizer refit on all rows.
pub fn fit_projector<T: Scalar>(
    x: ArrayView2<T>,
    y: &[usize],
    num_classes: usize,
    cfg: &LntConfig,
) -> Result<(Standardizer<T>, LinearProjector<T>)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::EmptyData("projector needs at least two rows".into()));
    }
    let mut counts = vec![0usize; num_classes];
    for &c in y {
        if c >= num_classes {
            return Err(Error::LabelOutOfRange { index: c, len: num_classes });
        }
        counts[c] += 1;
    }
    let min_present = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass("projector needs at least two classes".into()));
    }
    let folds = cfg.folds.min(min_present).max(2);
    let reduced = folds < cfg.folds;
    let fold_of = stratified_folds(y, num_classes, folds, cfg.seed);
    let l2 = T::lit(cfg.l2);
    let tol = T::lit(cfg.tol);

    let mut best: Option<(f64, usize, Array2<T>, Vec<T>)> = None;
    for f in 0..folds {
        let tr: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let va: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        if va.is_empty() || tr.is_empty() {
            continue;
        }
        let xtr = x.select(Axis(0), &tr);
        let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
        let st = Standardizer::fit(xtr.view())?;
        let ztr = st.apply_matrix(xtr.view());
        let fit = fit_ovr(ztr.view(), &ytr, num_classes, l2, cfg.max_iter, tol, false);
        let zva = st.apply_matrix(x.select(Axis(0), &va).view());
        let proj = LinearProjector { weights: fit.weights, bias: fit.bias, ..LinearProjector::zeros(0, 0) };
        let logits = proj.logits_matrix(zva.view());
        let pred: Vec<usize> = logits.rows().into_iter().map(|r| argmax(&r.to_vec())).collect();
        let truth: Vec<usize> = va.iter().map(|&i| y[i]).collect();
        let acc = macro_accuracy(&pred, &truth, num_classes);
        if best.as_ref().is_none_or(|b| acc > b.0) {
            best = Some((acc, f, proj.weights, proj.bias));
        }
    }
    let (_, chosen_fold, weights, bias) = best.expect("at least one non-empty fold");
    let standardizer = Standardizer::fit(x)?;
    Ok((
        standardizer,
        LinearProjector { weights, bias, l2, chosen_fold, folds_used: folds, reduced_folds_warning: reduced },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LntStage<T: Scalar> {
    pub size: usize,
    pub indices: Vec<usize>,
    pub standardizer: Standardizer<T>,
    pub projector: LinearProjector<T>,
}

impl<T: Scalar> LntStage<T> {
    pub fn probabilities(&self, x: &[T]) -> Result<Vec<T>> {
        let sub: Vec<T> = self.indices.iter().map(|&i| x[i]).collect();
        self.projector.project(&self.standardizer.apply(&sub)?)
    }

    fn probabilities_matrix(&self, x: ArrayView2<T>) -> Array2<T> {
        let z = self.standardizer.apply_matrix(x.select(Axis(1), &self.indices).view());
        let mut l = self.projector.logits_matrix(z.view());
        let mut buf = vec![T::zero(); l.ncols()];
        for mut row in l.rows_mut() {
            softmax_into(row.as_slice().expect("standard layout"), &mut buf);
            row.assign(&ArrayView1::from(&buf));
        }
        l
    }
}

/// One stage per subspace size, ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LntBlock<T: Scalar> {
    pub input_dim: usize,
    pub num_classes: usize,
    pub stages: Vec<LntStage<T>>,
}

impl<T: Scalar> LntBlock<T> {
    /// Fits every stage on `(x, y)`; the result does not depend on row order.
    pub fn fit(x: ArrayView2<T>, y: &[usize], num_classes: usize, importance: &[T], cfg: &LntConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, d) = x.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if importance.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: importance.len() });
        }
        let spec = select_subspaces(importance, &cfg.sizes)?;
        let order = canonical_order(x, y);
        let xc = x.select(Axis(0), &order);
        let yc: Vec<usize> = order.iter().map(|&i| y[i]).collect();
        let mut stages = Vec::with_capacity(spec.indices.len());
        for (indices, &size) in spec.indices.into_iter().zip(&spec.requested) {
            let sub = xc.select(Axis(1), &indices);
            let (standardizer, projector) = fit_projector(sub.view(), &yc, num_classes, cfg)?;
            stages.push(LntStage { size, indices, standardizer, projector });
        }
        Ok(Self { input_dim: d, num_classes, stages })
    }

    pub fn output_dim(&self) -> usize {
        self.input_dim + self.stages.len() * self.num_classes
    }

    /// `[x, p_1, ..., p_k]` with one probability block per stage.
    pub fn augment(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        let mut out = Vec::with_capacity(self.output_dim());
        out.extend_from_slice(x);
        for st in &self.stages {
            out.extend(st.probabilities(x)?);
        }
        Ok(out)
    }

    /// Row-wise [`augment`](Self::augment) of a whole matrix.
    pub fn augment_matrix(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.ncols() });
        }
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        out.slice_mut(s![.., ..self.input_dim]).assign(&x);
        for (k, st) in self.stages.iter().enumerate() {
            let lo = self.input_dim + k * self.num_classes;
            out.slice_mut(s![.., lo..lo + self.num_classes]).assign(&st.probabilities_matrix(x));
        }
        Ok(out)
    }

    /// Parameter count: `(|subspace| + 1) * C` per stage.
    pub fn parameter_count(&self) -> usize {
        self.stages.iter().map(|s| (s.indices.len() + 1) * self.num_classes).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn subspace_examples() {
        let s = select_subspaces(&[3.0f64, 1.0, 2.0], &[2]).unwrap();
        assert_eq!(s.indices[0], vec![0, 2]);
        let s = select_subspaces(&[1.0f64; 4], &[2]).unwrap();
        assert_eq!(s.indices[0], vec![0, 1]);
        let imp: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let s = select_subspaces(&imp, &[64, 128, 256, 512]).unwrap();
        assert_eq!(s.indices[3].len(), 100);
        for w in s.indices.windows(2) {
            assert!(w[0].iter().all(|i| w[1].contains(i)));
        }
        assert!(select_subspaces::<f64>(&[], &[2]).is_err());
    }

    #[test]
    fn standardizer_examples() {
        let st = Standardizer::fit(array![[1.0f64, 5.0], [3.0, 5.0]].view()).unwrap();
        assert_eq!(st.mu, vec![2.0, 5.0]);
        assert_eq!(st.sigma, vec![1.0, 1.0]);
        assert_eq!(st.apply(&[1.0, 5.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(st.apply(&[3.0, 5.0]).unwrap(), vec![1.0, 0.0]);
        let z = array![[-1.0f64], [1.0]];
        let st = Standardizer::fit(z.view()).unwrap();
        assert!((st.apply(&[-1.0]).unwrap()[0] + 1.0).abs() < 1e-9);
        assert!(Standardizer::<f64>::fit(Array2::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn project_examples() {
        let p = LinearProjector::<f64>::zeros(3, 4).project(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p, vec![0.25; 4]);
        let mut proj = LinearProjector::<f64>::zeros(1, 2);
        proj.bias = vec![2f64.ln(), 0.0];
        let p = proj.project(&[0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-9 && (p[1] - 1.0 / 3.0).abs() < 1e-9);
        proj.bias = vec![1000.0, 0.0];
        let p = proj.project(&[0.0]).unwrap();
        assert!(p[0] == 1.0 && p[1] >= 0.0 && p.iter().all(|v| v.is_finite()));
        assert!(proj.project(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn separable_one_dimensional_projector() {
        let xs: Vec<f64> = (0..40).map(|i| if i < 20 { -1.0 - i as f64 * 0.1 } else { 1.0 + i as f64 * 0.1 }).collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let x = Array2::from_shape_vec((40, 1), xs).unwrap();
        let (st, proj) = fit_projector(x.view(), &y, 2, &LntConfig::default()).unwrap();
        assert!(proj.weights[[0, 1]] > 0.0 && proj.weights[[0, 0]] < 0.0);
        for (row, &c) in x.rows().into_iter().zip(&y) {
            let p = proj.project(&st.apply(&row.to_vec()).unwrap()).unwrap();
            assert_eq!(argmax(&p), c);
        }
    }

    #[test]
    fn zero_features_give_prior_logits() {
        let x = Array2::<f64>::zeros((40, 3));
        let y: Vec<usize> = (0..40).map(|i| usize::from(i % 4 == 0)).collect();
        let cfg = LntConfig { max_iter: 5000, ..LntConfig::default() };
        let (_, proj) = fit_projector(x.view(), &y, 2, &cfg).unwrap();
        assert!(proj.weights.iter().all(|w| w.abs() < 1e-12));
        // stratified folds keep the 1:3 prior on every training split
        let prior = 0.25f64;
        assert!((proj.bias[1] - (prior / (1.0 - prior)).ln()).abs() < 1e-4, "{:?}", proj.bias);
        assert!((proj.bias[0] - ((1.0 - prior) / prior).ln()).abs() < 1e-4);
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let y: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let f = stratified_folds(&y, 2, 5, 3);
        for fold in 0..5 {
            for c in 0..2 {
                assert_eq!((0..50).filter(|&i| f[i] == fold && y[i] == c).count(), 5);
            }
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Array2::<f64>::zeros((10, 2));
        assert!(matches!(fit_projector(x.view(), &[1; 10], 3, &LntConfig::default()), Err(Error::SingleClass(_))));
    }
}
