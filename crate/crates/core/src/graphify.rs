//! Dual-metric spatio-temporal k-NN graphs over a frame's samples and the
//! spectral descriptors of their symmetric normalized Laplacian.
//!
//! Each node is one sample. Spatial edges join a node to its `k` nearest
//! neighbours (Cartesian or wrapped-polar distance) with Gaussian-kernel
//! weights, temporal edges join chronologically adjacent samples, and the two
//! are combined as `A_st = A_s + lambda_t * A_t`.

use std::cmp::Ordering;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::IqFrame;
use crate::linalg::symmetric_eigenvalues;
use crate::scalar::Scalar;

/// Eigenvalues at or below this are treated as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-8;
pub const SIGMA_FLOOR: f64 = 1e-6;
pub const DEFAULT_K_SET: [usize; 4] = [4, 8, 16, 32];
pub const DEFAULT_LAMBDA_T: f64 = 50.0;
pub const HEAD_EIGENVALUES: usize = 8;
pub const TAIL_EIGENVALUES: usize = 4;
/// Values per (k, metric) block.
pub const BLOCK_LEN: usize = 8 + HEAD_EIGENVALUES + TAIL_EIGENVALUES;

const BLOCK_NAMES: [&str; 8] = ["entropy", "mean", "variance", "skewness", "lambda1", "lambda2", "gap_ratio", "max_gap"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstellationPoint<T> {
    pub i: T,
    pub q: T,
    pub a: T,
    pub phi: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cartesian,
    Polar,
}

impl Metric {
    pub const BOTH: [Metric; 2] = [Metric::Cartesian, Metric::Polar];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cartesian => "cartesian",
            Metric::Polar => "polar",
        }
    }

    /// Squared distance; the polar phase difference is wrapped into `[-pi, pi]`.
    pub fn dist2<T: Scalar>(self, x: &ConstellationPoint<T>, y: &ConstellationPoint<T>) -> T {
        match self {
            Metric::Cartesian => {
                let di = x.i - y.i;
                let dq = x.q - y.q;
                di * di + dq * dq
            }
            Metric::Polar => {
                let da = x.a - y.a;
                let dp = wrap_phase(x.phi - y.phi);
                da * da + dp * dp
            }
        }
    }
}

/// Kernel bandwidth policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// Median of the k-NN distances used by the graph, floored at [`SIGMA_FLOOR`].
    MedianKnn,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: usize,
    pub metric: Metric,
    pub lambda_t: f64,
    pub sigma_rule: SigmaRule,
}

impl GraphConfig {
    pub fn new(k: usize, metric: Metric) -> Self {
        Self { k, metric, lambda_t: DEFAULT_LAMBDA_T, sigma_rule: SigmaRule::MedianKnn }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k >= n {
            return Err(Error::InvalidArgument(format!("k = {} must satisfy 1 <= k < N = {n}", self.k)));
        }
        if !(self.lambda_t.is_finite() && self.lambda_t >= 0.0) {
            return Err(Error::InvalidArgument(format!("temporal weight {} must be finite and >= 0", self.lambda_t)));
        }
        if let SigmaRule::Fixed(s) = self.sigma_rule {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!("sigma {s} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Settings for the multi-k feature sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphFeatureConfig {
    pub k_set: Vec<usize>,
    pub lambda_t: f64,
}

impl Default for GraphFeatureConfig {
    fn default() -> Self {
        Self { k_set: DEFAULT_K_SET.to_vec(), lambda_t: DEFAULT_LAMBDA_T }
    }
}

impl GraphFeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_set.is_empty() || self.k_set.contains(&0) {
            return Err(Error::InvalidArgument("k_set must be non-empty with k >= 1".into()));
        }
        if self.k_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("k_set must be strictly ascending".into()));
        }
        if !(self.lambda_t.is_finite() && self.lambda_t >= 0.0) {
            return Err(Error::InvalidArgument("lambda_t must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.k_set.len() * Metric::BOTH.len() * BLOCK_LEN
    }

    /// Names as `g.{metric}.k{k}.{descriptor}`, in emission order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        for &k in &self.k_set {
            for metric in Metric::BOTH {
                for d in block_descriptor_names() {
                    names.push(format!("g.{}.k{k}.{d}", metric.name()));
                }
            }
        }
        names
    }
}

fn block_descriptor_names() -> impl Iterator<Item = String> {
    BLOCK_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain((0..HEAD_EIGENVALUES).map(|i| format!("ev{i}")))
        .chain((0..TAIL_EIGENVALUES).map(|i| format!("ev_last{i}")))
}

#[inline]
pub fn wrap_phase<T: Scalar>(x: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut y = x;
    while y > pi {
        y -= two_pi;
    }
    while y < -pi {
        y += two_pi;
    }
    y
}

/// Amplitude and phase of every sample; phase lies in `(-pi, pi]`, zero samples get phase 0.
pub fn to_polar<T: Scalar>(frame: &IqFrame<T>) -> Vec<ConstellationPoint<T>> {
    frame
        .samples
        .iter()
        .map(|c| {
            let a = c.re.hypot(c.im);
            let mut phi = if a == T::zero() { T::zero() } else { c.im.atan2(c.re) };
            if phi <= -T::PI() {
                phi += T::PI() + T::PI();
            }
            ConstellationPoint { i: c.re, q: c.im, a, phi }
        })
        .collect()
}

/// Per-node neighbour lists sorted by (squared distance, index), truncated to `k_max`.
pub fn knn_lists<T: Scalar>(points: &[ConstellationPoint<T>], metric: Metric, k_max: usize) -> Vec<Vec<(usize, T)>> {
    let n = points.len();
    let mut scratch: Vec<(usize, T)> = Vec::with_capacity(n);
    (0..n)
        .map(|i| {
            scratch.clear();
            scratch.extend((0..n).filter(|&j| j != i).map(|j| (j, metric.dist2(&points[i], &points[j]))));
            let by_dist = |a: &(usize, T), b: &(usize, T)| {
                a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
            };
            let k = k_max.min(scratch.len());
            if k < scratch.len() {
                scratch.select_nth_unstable_by(k, by_dist);
            }
            let mut head = scratch[..k].to_vec();
            head.sort_by(by_dist);
            head
        })
        .collect()
}

/// Median of the first-`k` neighbour distances, floored at [`SIGMA_FLOOR`].
pub fn median_knn_sigma<T: Scalar>(lists: &[Vec<(usize, T)>], k: usize) -> T {
    let mut d: Vec<T> = lists.iter().flat_map(|l| l[..k.min(l.len())].iter().map(|&(_, d2)| d2.sqrt())).collect();
    if d.is_empty() {
        return T::lit(SIGMA_FLOOR);
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { (d[m / 2 - 1] + d[m / 2]) / T::lit(2.0) };
    med.max(T::lit(SIGMA_FLOOR))
}

fn adjacency_from_lists<T: Scalar>(lists: &[Vec<(usize, T)>], k: usize, sigma: T) -> Array2<T> {
    let n = lists.len();
    let s2 = sigma * sigma;
    let mut a = Array2::<T>::zeros((n, n));
    for (i, list) in lists.iter().enumerate() {
        for &(j, d2) in &list[..k] {
            let w = (-d2 / s2).exp();
            // symmetrize by elementwise max of the directed matrix and its transpose
            if w > a[[i, j]] {
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    a
}

/// Gaussian-kernel k-NN spatial adjacency, symmetrized by elementwise max.
pub fn knn_spatial_adjacency<T: Scalar>(
    points: &[ConstellationPoint<T>],
    k: usize,
    metric: Metric,
    sigma: T,
) -> Result<Array2<T>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} must satisfy 1 <= k < N = {n}")));
    }
    if !(sigma > T::zero()) {
        return Err(Error::InvalidArgument(format!("sigma {sigma} must be > 0")));
    }
    Ok(adjacency_from_lists(&knn_lists(points, metric, k), k, sigma))
}

/// Chronological chain: `A_t(i, j) = 1` iff `|i - j| = 1`.
pub fn temporal_adjacency<T: Scalar>(n: usize) -> Result<Array2<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("temporal adjacency needs n >= 2, got {n}")));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| if i.abs_diff(j) == 1 { T::one() } else { T::zero() }))
}

#[derive(Clone, Debug)]
pub struct StGraph<T> {
    pub a_s: Array2<T>,
    pub a_t: Array2<T>,
    pub a_st: Array2<T>,
    pub degree: Vec<T>,
    pub laplacian: Array2<T>,
    /// Ascending; tiny negatives clamped to zero.
    pub eigenvalues: Vec<T>,
    pub sigma: T,
}

impl<T: Scalar> StGraph<T> {
    /// Combines a spatial adjacency with the temporal chain and computes the
    /// normalized Laplacian spectrum.
    pub fn from_spatial(a_s: Array2<T>, lambda_t: T, sigma: T) -> Result<Self> {
        let n = a_s.nrows();
        if a_s.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a_s.ncols() });
        }
        let a_t = temporal_adjacency::<T>(n)?;
        let a_st = &a_s + &(&a_t * lambda_t);
        let degree: Vec<T> = a_st.rows().into_iter().map(|r| r.sum()).collect();
        if let Some(i) = degree.iter().position(|&d| !(d > T::zero())) {
            return Err(Error::Degenerate(format!("node {i} is isolated in the combined graph")));
        }
        let inv_sqrt: Vec<T> = degree.iter().map(|d| d.sqrt().recip()).collect();
        let laplacian = Array2::from_shape_fn((n, n), |(i, j)| {
            let off = a_st[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
            if i == j {
                T::one() - off
            } else {
                -off
            }
        });
        let flat: Vec<T> = laplacian.iter().copied().collect();
        let tol = T::lit(ZERO_EIGEN_TOL);
        let eigenvalues = symmetric_eigenvalues(&flat, n)?
            .into_iter()
            .map(|v| if v < T::zero() && v >= -tol { T::zero() } else { v })
            .collect();
        Ok(Self { a_s, a_t, a_st, degree, laplacian, eigenvalues, sigma })
    }
}

fn graph_from_lists<T: Scalar>(lists: &[Vec<(usize, T)>], cfg: &GraphConfig) -> Result<StGraph<T>> {
    let sigma = match cfg.sigma_rule {
        SigmaRule::MedianKnn => median_knn_sigma(lists, cfg.k),
        SigmaRule::Fixed(s) => T::lit(s),
    };
    let a_s = adjacency_from_lists(lists, cfg.k, sigma);
    StGraph::from_spatial(a_s, T::lit(cfg.lambda_t), sigma)
}

/// Builds the spatio-temporal graph of a (normalized) frame and its spectrum.
pub fn spectral_pipeline<T: Scalar>(frame: &IqFrame<T>, cfg: &GraphConfig) -> Result<StGraph<T>> {
    cfg.validate(frame.len())?;
    let points = to_polar(frame);
    let lists = knn_lists(&points, cfg.metric, cfg.k);
    graph_from_lists(&lists, cfg)
}

/// One (k, metric) block of spectral descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBlock<T> {
    pub values: [T; BLOCK_LEN],
    /// Fewer than two eigenvalues above [`ZERO_EIGEN_TOL`]; `lambda1`, `lambda2`
    /// and the gap ratio are then reported as zero.
    pub degenerate: bool,
}

impl<T: Scalar> SpectralBlock<T> {
    pub fn entropy(&self) -> T {
        self.values[0]
    }
    pub fn mean(&self) -> T {
        self.values[1]
    }
    pub fn variance(&self) -> T {
        self.values[2]
    }
    pub fn skewness(&self) -> T {
        self.values[3]
    }
    pub fn lambda1(&self) -> T {
        self.values[4]
    }
    pub fn lambda2(&self) -> T {
        self.values[5]
    }
    pub fn gap_ratio(&self) -> T {
        self.values[6]
    }
    pub fn max_gap(&self) -> T {
        self.values[7]
    }
}

/// Descriptors of an ascending eigenvalue sequence.
pub fn spectral_features<T: Scalar>(eigenvalues: &[T]) -> SpectralBlock<T> {
    let zero = T::zero();
    let n = eigenvalues.len();
    let mut values = [zero; BLOCK_LEN];
    if n == 0 {
        return SpectralBlock { values, degenerate: true };
    }
    let nf = T::from_usize_lossy(n);
    let total: T = eigenvalues.iter().copied().sum();

    let entropy = if total > zero {
        eigenvalues
            .iter()
            .map(|&l| {
                let p = l / total;
                if p > zero {
                    -p * p.ln()
                } else {
                    zero
                }
            })
            .sum()
    } else {
        zero
    };
    let mean = total / nf;
    let variance = eigenvalues.iter().map(|&l| (l - mean) * (l - mean)).sum::<T>() / nf;
    let sd = variance.sqrt();
    let skewness = if sd < T::lit(1e-12) {
        zero
    } else {
        eigenvalues.iter().map(|&l| ((l - mean) / sd).powi(3)).sum::<T>() / nf
    };

    let tol = T::lit(ZERO_EIGEN_TOL);
    let mut nonzero = eigenvalues.iter().copied().filter(|&l| l > tol);
    let (l1, l2) = (nonzero.next(), nonzero.next());
    let degenerate = l2.is_none();
    let (lambda1, lambda2, ratio) = match (l1, l2) {
        (Some(a), Some(b)) => (a, b, b / a),
        _ => (zero, zero, zero),
    };
    let max_gap = eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(zero, T::max);

    values[..8].copy_from_slice(&[entropy, mean, variance, skewness, lambda1, lambda2, ratio, max_gap]);
    for (slot, &l) in values[8..8 + HEAD_EIGENVALUES].iter_mut().zip(eigenvalues) {
        *slot = l;
    }
    let tail_start = n.saturating_sub(TAIL_EIGENVALUES);
    for (slot, &l) in values[8 + HEAD_EIGENVALUES..].iter_mut().zip(&eigenvalues[tail_start..]) {
        *slot = l;
    }
    SpectralBlock { values, degenerate }
}

/// Concatenated spectral blocks over `k` ascending, Cartesian before polar.
/// The frame is expected to be normalized to unit RMS.
pub fn extract_graph_features<T: Scalar>(frame: &IqFrame<T>, cfg: &GraphFeatureConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    let k_max = *cfg.k_set.last().expect("validated non-empty");
    if frame.len() <= k_max {
        return Err(Error::InvalidArgument(format!(
            "frame length {} must exceed the largest k ({k_max})",
            frame.len()
        )));
    }
    let points = to_polar(frame);
    let lists: Vec<_> = Metric::BOTH.iter().map(|&m| knn_lists(&points, m, k_max)).collect();
    let mut out = Vec::with_capacity(cfg.dim());
    for &k in &cfg.k_set {
        for (mi, &metric) in Metric::BOTH.iter().enumerate() {
            let gcfg = GraphConfig { k, metric, lambda_t: cfg.lambda_t, sigma_rule: SigmaRule::MedianKnn };
            let g = graph_from_lists(&lists[mi], &gcfg)?;
            out.extend_from_slice(&spectral_features(&g.eigenvalues).values);
        }
    }
    Ok(out)
}
