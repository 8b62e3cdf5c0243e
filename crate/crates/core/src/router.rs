//! SNR-band gate and the soft mixture of band experts.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::bands::SnrBands;
use crate::error::{Error, Result};
use crate::gbt::{self, BoostedEnsemble, TrainParams};
use crate::lnt::{LntBlock, LntConfig};
use crate::scalar::Scalar;

/// Classifier over SNR bands fed with the graph-feature prefix of a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CqiModel<T: Scalar> {
    pub bands: SnrBands,
    pub input_dim: usize,
    /// `None` when there is a single band: the gate is then constant.
    pub model: Option<BoostedEnsemble<T>>,
}

impl<T: Scalar> CqiModel<T> {
    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    /// Soft band weights, a probability vector of length Q.
    pub fn weights(&self, graph_features: &[T]) -> Result<Vec<T>> {
        if graph_features.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: graph_features.len() });
        }
        match &self.model {
            None => Ok(vec![T::one()]),
            Some(m) => m.predict_proba(graph_features),
        }
    }
}

/// Band index of every SNR label.
pub fn band_labels(snr_db: &[f64], bands: &SnrBands) -> Result<Vec<usize>> {
    snr_db.iter().map(|&s| bands.band_index(s)).collect()
}

pub fn fit_cqi<T: Scalar>(
    graph_features: ArrayView2<T>,
    snr_db: &[f64],
    bands: &SnrBands,
    params: &TrainParams,
) -> Result<CqiModel<T>> {
    if graph_features.nrows() != snr_db.len() {
        return Err(Error::DimensionMismatch { expected: graph_features.nrows(), got: snr_db.len() });
    }
    if snr_db.is_empty() {
        return Err(Error::EmptyData("no rows for the band gate".into()));
    }
    let labels = band_labels(snr_db, bands)?;
    let q = bands.len();
    let mut counts = vec![0usize; q];
    for &b in &labels {
        counts[b] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyBand(empty));
    }
    let model = if q == 1 { None } else { Some(gbt::fit(graph_features, &labels, q, params)?) };
    Ok(CqiModel { bands: bands.clone(), input_dim: graph_features.ncols(), model })
}

/// Band specialist: its own LNT block followed by a boosted classifier on the augmented view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Expert<T: Scalar> {
    pub band: usize,
    pub lnt: LntBlock<T>,
    pub classifier: BoostedEnsemble<T>,
}

impl<T: Scalar> Expert<T> {
    pub fn fit(
        band: usize,
        x: ArrayView2<T>,
        y: &[usize],
        num_classes: usize,
        importance: &[T],
        lnt_cfg: &LntConfig,
        params: &TrainParams,
    ) -> Result<Self> {
        let lnt = LntBlock::fit(x, y, num_classes, importance, lnt_cfg)?;
        let augmented = lnt.augment_matrix(x)?;
        let classifier = gbt::fit(augmented.view(), y, num_classes, params)?;
        Ok(Self { band, lnt, classifier })
    }

    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        self.classifier.predict_proba(&self.lnt.augment(x)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MoeModel<T: Scalar> {
    pub cqi: CqiModel<T>,
    pub experts: Vec<Expert<T>>,
    pub label_table: Vec<String>,
}

impl<T: Scalar> MoeModel<T> {
    pub fn new(cqi: CqiModel<T>, experts: Vec<Expert<T>>, label_table: Vec<String>) -> Result<Self> {
        if experts.len() != cqi.num_bands() {
            return Err(Error::DimensionMismatch { expected: cqi.num_bands(), got: experts.len() });
        }
        if experts.iter().enumerate().any(|(i, e)| e.band != i || e.classifier.num_classes() != label_table.len()) {
            return Err(Error::InvalidArgument("experts must be ordered by band and share the label table".into()));
        }
        Ok(Self { cqi, experts, label_table })
    }

    pub fn num_classes(&self) -> usize {
        self.label_table.len()
    }

    /// Gate weights for a full raw feature vector (the gate reads only its graph prefix).
    pub fn gate(&self, features: &[T]) -> Result<Vec<T>> {
        if features.len() < self.cqi.input_dim {
            return Err(Error::DimensionMismatch { expected: self.cqi.input_dim, got: features.len() });
        }
        self.cqi.weights(&features[..self.cqi.input_dim])
    }

    pub fn predict_proba(&self, features: &[T]) -> Result<Vec<T>> {
        let w = self.gate(features)?;
        self.predict_with_weights(features, &w)
    }

    /// `P = sum_i w_i P_i`; experts with zero weight are not evaluated.
    pub fn predict_with_weights(&self, features: &[T], w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.experts.len() {
            return Err(Error::DimensionMismatch { expected: self.experts.len(), got: w.len() });
        }
        let mut p = vec![T::zero(); self.num_classes()];
        for (e, &wi) in self.experts.iter().zip(w) {
            if wi == T::zero() {
                continue;
            }
            for (acc, v) in p.iter_mut().zip(e.predict_proba(features)?) {
                *acc += wi * v;
            }
        }
        Ok(p)
    }
}

/// Drops entry `i` and rescales the rest to sum to one (uniform if they were all zero).
pub fn renormalize_without<T: Scalar>(w: &[T], i: usize) -> Vec<T> {
    let rest: Vec<T> = w.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
    let total: T = rest.iter().copied().sum();
    if total > T::zero() {
        rest.iter().map(|&v| v / total).collect()
    } else {
        vec![T::one() / T::from_usize_lossy(rest.len().max(1)); rest.len()]
    }
}
