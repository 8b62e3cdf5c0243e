//! End-to-end orchestration: data, split, features, training, evaluation,
//! complexity accounting and the bundle file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bands::{default_bands, SnrBands};
use crate::error::{Error, Result};
use crate::frames::{load_dataset, normalize_frame, synthesize_dataset, Dataset, IqFrame, ModulationScheme, SynthConfig};
use crate::gbt::{self, BoostedEnsemble, TrainParams};
use crate::graphify::{extract_graph_features, GraphFeatureConfig};
use crate::lnt::LntConfig;
use crate::router::{band_labels, fit_cqi, Expert, MoeModel};
use crate::scalar::{argmax, Scalar};
use crate::statfeat::{extract_stat_features, StatConfig};

pub const BUNDLE_MAGIC: [u8; 4] = *b"GAMB";
pub const BUNDLE_VERSION: u32 = 1;
/// SNRs at which per-SNR confusion matrices are reported.
pub const CONFUSION_SNRS: [i32; 3] = [-20, 0, 18];

/// Recipe for a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthRecipe {
    pub schemes: Vec<String>,
    pub snrs: Vec<i32>,
    pub per_cell: usize,
    pub frame_len: usize,
    pub generator: SynthConfig,
}

impl Default for SynthRecipe {
    fn default() -> Self {
        Self {
            schemes: ["BPSK", "QPSK", "8PSK", "QAM16", "QAM64", "PAM4", "GFSK", "CPFSK"].map(String::from).to_vec(),
            snrs: vec![-10, -4, 0, 6, 12, 18],
            per_cell: 300,
            frame_len: crate::frames::FRAME_LEN,
            generator: SynthConfig::default(),
        }
    }
}

impl SynthRecipe {
    pub fn schemes(&self) -> Result<Vec<ModulationScheme>> {
        self.schemes
            .iter()
            .map(|s| ModulationScheme::from_name(s).ok_or_else(|| Error::Config(format!("unknown scheme {s:?}"))))
            .collect()
    }

    pub fn generate<T: Scalar>(&self) -> Result<Dataset<T>> {
        synthesize_dataset(&self.schemes()?, &self.snrs, self.per_cell, self.frame_len, &self.generator)
    }
}

/// Where the frames come from: a portable dataset file or a generator recipe.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SynthRecipe>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub q: usize,
    /// Explicit `[lo, hi]` dB intervals overriding the defaults for `q`.
    pub bands: Option<Vec<[f64; 2]>>,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub data: DataSource,
    pub graph: GraphFeatureConfig,
    pub stat: StatConfig,
    pub lnt: LntConfig,
    pub cqi: TrainParams,
    pub expert: TrainParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            q: 5,
            bands: None,
            split_seed: 0,
            train_fraction: 0.7,
            data: DataSource::default(),
            graph: GraphFeatureConfig::default(),
            stat: StatConfig::default(),
            lnt: LntConfig::default(),
            cqi: TrainParams::cqi_table(),
            expert: TrainParams::expert_table(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_bands(&self) -> Result<SnrBands> {
        let bands = match &self.bands {
            Some(iv) => {
                if iv.len() != self.q {
                    return Err(Error::Config(format!("q = {} but {} bands were given", self.q, iv.len())));
                }
                SnrBands::new(iv.iter().map(|b| (b[0], b[1])).collect())
            }
            None => default_bands(self.q),
        };
        bands.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.resolve_bands()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Config("give either data.path or data.synthetic, not both".into())),
            (None, Some(r)) => {
                r.schemes().map_err(wrap)?;
                r.generator.validate().map_err(wrap)?;
                if r.per_cell == 0 || r.snrs.is_empty() || r.schemes.is_empty() {
                    return Err(Error::Config("synthetic recipe is empty".into()));
                }
            }
            _ => {}
        }
        self.graph.validate().map_err(wrap)?;
        self.stat.validate().map_err(wrap)?;
        self.lnt.validate().map_err(wrap)?;
        self.cqi.validate().map_err(wrap)?;
        self.expert.validate().map_err(wrap)?;
        Ok(())
    }

    pub fn load_data<T: Scalar>(&self) -> Result<Dataset<T>> {
        match (&self.data.path, &self.data.synthetic) {
            (Some(p), None) => load_dataset(p),
            (None, Some(r)) => r.generate(),
            _ => Err(Error::Config("no data source configured".into())),
        }
    }
}

/// Disjoint split stratified on (class, SNR): each cell is shuffled with the
/// split seed and its first `round(fraction * len)` frames go to training.
pub fn stratified_split<T>(ds: &Dataset<T>, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut cells: BTreeMap<(usize, i32), Vec<usize>> = BTreeMap::new();
    for (i, f) in ds.frames.iter().enumerate() {
        cells.entry((f.label, f.snr_db)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rows in cells.values_mut() {
        rows.shuffle(&mut rng);
        let k = ((fraction * rows.len() as f64).round() as usize).min(rows.len());
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Raw per-frame features: graph segment followed by the statistical segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub graph: GraphFeatureConfig,
    pub stat: StatConfig,
}

impl FeatureExtractor {
    pub fn new(graph: GraphFeatureConfig, stat: StatConfig) -> Self {
        Self { graph, stat }
    }

    pub fn graph_dim(&self) -> usize {
        self.graph.dim()
    }

    pub fn dim(&self) -> usize {
        self.graph.dim() + self.stat.dim()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut v = self.graph.feature_names();
        v.extend(self.stat.feature_names());
        v
    }

    /// Normalizes the frame, then extracts both segments. Never reads `snr_db`.
    pub fn extract<T: Scalar>(&self, frame: &IqFrame<T>) -> Result<Vec<T>> {
        let f = normalize_frame(frame)?;
        let mut v = extract_graph_features(&f, &self.graph)?;
        v.extend(extract_stat_features(&f, &self.stat)?);
        Ok(v)
    }

    /// Row-per-frame matrix, extracted in parallel; row order follows `frames`.
    pub fn extract_matrix<T: Scalar>(&self, frames: &[IqFrame<T>]) -> Result<Array2<T>> {
        let rows: Vec<Vec<T>> = frames.par_iter().map(|f| self.extract(f)).collect::<Result<_>>()?;
        let d = self.dim();
        let flat: Vec<T> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((frames.len(), d), flat).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Everything needed to classify new frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GamcBundle<T: Scalar> {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub feature_names: Vec<String>,
    pub extractor: FeatureExtractor,
    /// Importance model fit on all training rows; drives subspace selection.
    pub aux: BoostedEnsemble<T>,
    pub moe: MoeModel<T>,
}

/// Training rows already reduced to features.
pub struct FeatureTable<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub labels: &'a [usize],
    pub snr_db: &'a [i32],
}

impl<'a, T: Scalar> FeatureTable<'a, T> {
    fn check(&self) -> Result<()> {
        let n = self.x.nrows();
        if n == 0 {
            return Err(Error::EmptyData("no training rows".into()));
        }
        if self.labels.len() != n || self.snr_db.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.labels.len().min(self.snr_db.len()) });
        }
        Ok(())
    }
}

/// Fits the auxiliary importance model, the gate and one expert per band.
pub fn fit_from_features<T: Scalar>(
    cfg: &PipelineConfig,
    table: &FeatureTable<'_, T>,
    label_table: &[String],
) -> Result<GamcBundle<T>> {
    cfg.validate()?;
    table.check()?;
    let extractor = FeatureExtractor::new(cfg.graph.clone(), cfg.stat.clone());
    if table.x.ncols() != extractor.dim() {
        return Err(Error::DimensionMismatch { expected: extractor.dim(), got: table.x.ncols() });
    }
    let c = label_table.len();
    let bands = cfg.resolve_bands()?;
    let snr: Vec<f64> = table.snr_db.iter().map(|&s| f64::from(s)).collect();

    let aux = gbt::fit(table.x, table.labels, c, &cfg.expert).map_err(Error::at("auxiliary importance model"))?;
    let importance = aux.importance_vector().to_vec();

    let g = extractor.graph_dim();
    let cqi = fit_cqi(table.x.slice(s![.., ..g]), &snr, &bands, &cfg.cqi).map_err(Error::at("band gate"))?;

    let band_of = band_labels(&snr, &bands).map_err(Error::at("band gate"))?;
    let mut experts = Vec::with_capacity(bands.len());
    for b in 0..bands.len() {
        let rows: Vec<usize> = (0..band_of.len()).filter(|&i| band_of[i] == b).collect();
        if rows.is_empty() {
            return Err(Error::at("expert")(Error::EmptyBand(b)));
        }
        let xb = table.x.select(Axis(0), &rows);
        let yb: Vec<usize> = rows.iter().map(|&i| table.labels[i]).collect();
        let e = Expert::fit(b, xb.view(), &yb, c, &importance, &cfg.lnt, &cfg.expert).map_err(Error::at("expert"))?;
        experts.push(e);
    }
    let moe = MoeModel::new(cqi, experts, label_table.to_vec())?;
    Ok(GamcBundle {
        format_version: BUNDLE_VERSION,
        config: cfg.clone(),
        feature_names: extractor.feature_names(),
        extractor,
        aux,
        moe,
    })
}

/// A trained bundle together with the split it was trained on.
pub struct TrainOutcome<T: Scalar> {
    pub bundle: GamcBundle<T>,
    pub dataset: Dataset<T>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Loads or generates the data, splits it, extracts features and fits the bundle.
pub fn train_pipeline<T: Scalar>(cfg: &PipelineConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let dataset: Dataset<T> = cfg.load_data().map_err(Error::at("load data"))?;
    if dataset.is_empty() {
        return Err(Error::at("load data")(Error::EmptyData("dataset has no frames".into())));
    }
    let (train, test) = stratified_split(&dataset, cfg.train_fraction, cfg.split_seed);
    let extractor = FeatureExtractor::new(cfg.graph.clone(), cfg.stat.clone());
    let frames: Vec<IqFrame<T>> = train.iter().map(|&i| dataset.frames[i].clone()).collect();
    let x = extractor.extract_matrix(&frames).map_err(Error::at("feature extraction"))?;
    let labels: Vec<usize> = frames.iter().map(|f| f.label).collect();
    let snr: Vec<i32> = frames.iter().map(|f| f.snr_db).collect();
    let bundle = fit_from_features(cfg, &FeatureTable { x: x.view(), labels: &labels, snr_db: &snr }, &dataset.label_table)?;
    Ok(TrainOutcome { bundle, dataset, train, test })
}

impl<T: Scalar> GamcBundle<T> {
    pub fn num_classes(&self) -> usize {
        self.moe.num_classes()
    }

    pub fn bands(&self) -> &SnrBands {
        &self.moe.cqi.bands
    }

    pub fn predict_features(&self, x: &[T]) -> Result<Vec<T>> {
        self.moe.predict_proba(x)
    }

    /// Class probabilities per frame. Only the samples are read.
    pub fn predict_frame(&self, frame: &IqFrame<T>) -> Result<Vec<T>> {
        self.predict_features(&self.extractor.extract(frame)?)
    }

    /// Row-wise probabilities, computed in parallel with rows in input order.
    pub fn predict_matrix(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let rows: Vec<Vec<T>> =
            (0..x.nrows()).into_par_iter().map(|i| self.predict_features(&x.row(i).to_vec())).collect::<Result<_>>()?;
        let c = self.num_classes();
        Array2::from_shape_vec((x.nrows(), c), rows.into_iter().flatten().collect())
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn predict_frames(&self, frames: &[IqFrame<T>]) -> Result<Array2<T>> {
        let x = self.extractor.extract_matrix(frames)?;
        self.predict_matrix(x.view())
    }
}

/// Accuracy and confusion statistics of a bundle on a labelled dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label_table: Vec<String>,
    pub frames: usize,
    pub overall_accuracy: f64,
    /// `(snr_db, accuracy, frames)`, ascending SNR.
    pub per_snr: Vec<(i32, f64, usize)>,
    /// `(band interval, accuracy, frames)`; bands without frames are omitted.
    pub per_band: Vec<((f64, f64), f64, usize)>,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub confusion_at: Vec<(i32, Vec<Vec<usize>>)>,
}

impl EvalReport {
    pub fn from_predictions(
        predicted: &[usize],
        labels: &[usize],
        snr_db: &[i32],
        label_table: &[String],
        bands: &SnrBands,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyData("cannot evaluate on an empty dataset".into()));
        }
        if predicted.len() != n || snr_db.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: predicted.len().min(snr_db.len()) });
        }
        let c = label_table.len();
        let confusion_of = |keep: &dyn Fn(usize) -> bool| {
            let mut m = vec![vec![0usize; c]; c];
            for i in (0..n).filter(|&i| keep(i)) {
                m[labels[i]][predicted[i]] += 1;
            }
            m
        };
        let acc_of = |rows: &[usize]| rows.iter().filter(|&&i| predicted[i] == labels[i]).count() as f64 / rows.len() as f64;

        let mut by_snr: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
        let mut by_band: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            by_snr.entry(snr_db[i]).or_default().push(i);
            if let Ok(b) = bands.band_index(f64::from(snr_db[i])) {
                by_band.entry(b).or_default().push(i);
            }
        }
        let all: Vec<usize> = (0..n).collect();
        Ok(Self {
            label_table: label_table.to_vec(),
            frames: n,
            overall_accuracy: acc_of(&all),
            per_snr: by_snr.iter().map(|(&s, r)| (s, acc_of(r), r.len())).collect(),
            per_band: by_band.iter().map(|(&b, r)| (bands.intervals()[b], acc_of(r), r.len())).collect(),
            confusion: confusion_of(&|_| true),
            confusion_at: CONFUSION_SNRS
                .iter()
                .filter(|s| by_snr.contains_key(s))
                .map(|&s| (s, confusion_of(&|i| snr_db[i] == s)))
                .collect(),
        })
    }

    pub fn accuracy_at(&self, snr_db: i32) -> Option<f64> {
        self.per_snr.iter().find(|r| r.0 == snr_db).map(|r| r.1)
    }

    /// Accuracy over frames whose SNR lies in `[lo, hi]`.
    pub fn accuracy_between(&self, lo: i32, hi: i32) -> Option<f64> {
        let (hits, total) = self
            .per_snr
            .iter()
            .filter(|r| r.0 >= lo && r.0 <= hi)
            .fold((0.0, 0usize), |(h, t), r| (h + r.1 * r.2 as f64, t + r.2));
        (total > 0).then(|| hits / total as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("section,key,accuracy,frames\n");
        let _ = writeln!(s, "overall,all,{},{}", self.overall_accuracy, self.frames);
        for (snr, a, k) in &self.per_snr {
            let _ = writeln!(s, "snr,{snr},{a},{k}");
        }
        for ((lo, hi), a, k) in &self.per_band {
            let _ = writeln!(s, "band,{lo}..{hi},{a},{k}");
        }
        s.push_str("\nconfusion,snr,true,");
        s.push_str(&self.label_table.join(","));
        s.push('\n');
        let mut emit = |tag: &str, m: &[Vec<usize>]| {
            for (t, row) in m.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "confusion,{tag},{},{}", self.label_table[t], cells.join(","));
            }
        };
        emit("all", &self.confusion);
        for (snr, m) in &self.confusion_at {
            emit(&snr.to_string(), m);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!("frames: {}\noverall accuracy: {:.2}%\n", self.frames, 100.0 * self.overall_accuracy);
        s.push_str("per SNR:\n");
        for (snr, a, k) in &self.per_snr {
            let _ = writeln!(s, "  {snr:>4} dB  {:>6.2}%  ({k} frames)", 100.0 * a);
        }
        s.push_str("per band:\n");
        for ((lo, hi), a, k) in &self.per_band {
            let _ = writeln!(s, "  [{lo}, {hi}] dB  {:>6.2}%  ({k} frames)", 100.0 * a);
        }
        s
    }
}

/// Evaluates precomputed feature rows.
pub fn evaluate_features<T: Scalar>(bundle: &GamcBundle<T>, table: &FeatureTable<'_, T>) -> Result<EvalReport> {
    if table.x.nrows() == 0 {
        return Err(Error::EmptyData("cannot evaluate on an empty dataset".into()));
    }
    table.check()?;
    if let Some(&bad) = table.labels.iter().find(|&&l| l >= bundle.num_classes()) {
        return Err(Error::LabelOutOfRange { index: bad, len: bundle.num_classes() });
    }
    let p = bundle.predict_matrix(table.x)?;
    let predicted: Vec<usize> = p.rows().into_iter().map(|r| argmax(&r.to_vec())).collect();
    EvalReport::from_predictions(&predicted, table.labels, table.snr_db, &bundle.moe.label_table, bundle.bands())
}

pub fn evaluate<T: Scalar>(bundle: &GamcBundle<T>, ds: &Dataset<T>) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::EmptyData("cannot evaluate on an empty dataset".into()));
    }
    let x = bundle.extractor.extract_matrix(&ds.frames)?;
    let labels: Vec<usize> = ds.frames.iter().map(|f| f.label).collect();
    let snr: Vec<i32> = ds.frames.iter().map(|f| f.snr_db).collect();
    evaluate_features(bundle, &FeatureTable { x: x.view(), labels: &labels, snr_db: &snr })
}

// ---------------------------------------------------------------------------
// Complexity accounting

/// One row of the parameter/FLOP table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub component: String,
    pub parameters: u64,
    pub flops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub feature_extraction: ComplexityRow,
    pub lnt: ComplexityRow,
    pub moe: ComplexityRow,
    pub total: ComplexityRow,
    /// Per-expert LNT parameter counts.
    pub lnt_per_expert: Vec<u64>,
}

pub const COMPLEXITY_CONVENTION: &str = "parameters: 2 per internal tree node (feature id, threshold) + 1 per leaf; \
LNT (|subspace|+1)*C per stage. FLOPs per frame, multiply-add = 2: trees = depth comparisons per tree, \
LNT = 2*|subspace|*C per stage, feature extraction by the per-stage formulas below. The gate is counted under MoE.";

fn tree_params<T: Scalar>(m: &BoostedEnsemble<T>) -> u64 {
    m.trees().iter().map(|t| (2 * t.internal_count() + t.leaf_count()) as u64).sum()
}

fn tree_flops<T: Scalar>(m: &BoostedEnsemble<T>) -> u64 {
    m.trees().iter().map(|t| t.depth() as u64).sum()
}

fn log2_ceil(n: usize) -> u64 {
    (usize::BITS - n.max(1).saturating_sub(1).leading_zeros()) as u64
}

/// FLOPs of graph feature extraction for frames of `n` samples.
///
/// Per metric: pairwise distances `5 n(n-1)/2`. Per (k, metric): Gaussian
/// weights `4 n k`, normalized Laplacian `4 n^2`, eigenvalues `4/3 n^3 + 30 n^2`
/// (Householder reduction plus implicit QL), descriptors `12 n`.
pub fn graph_flops(n: usize, cfg: &GraphFeatureConfig) -> u64 {
    let n = n as u64;
    let distances = 2 * 5 * n * (n - 1) / 2;
    let per_graph = |k: u64| 4 * n * k + 4 * n * n + 4 * n * n * n / 3 + 30 * n * n + 12 * n;
    distances + cfg.k_set.iter().map(|&k| 2 * per_graph(k as u64)).sum::<u64>()
}

/// FLOPs of statistical feature extraction for frames of `n` samples.
///
/// Normalization `4n`; amplitude `3n + n log2 n` (sort) `+ 4n` (2-D histogram);
/// phase `20n` (atan2) `+ 8n` per rotational order `+ 6n` (differences, circular
/// stats) `+ 5n log2 n` (DFT of differences); spectrum `5n log2 n + 25n`
/// (FFT, log-magnitude, PAPR, entropy); cumulants `30n`; bispectrum `14n`;
/// cyclic autocorrelation `8n` per (alpha, lag).
pub fn stat_flops(n: usize, cfg: &StatConfig) -> u64 {
    let lg = log2_ceil(n);
    let n = n as u64;
    let amp = 3 * n + n * lg + 4 * n;
    let phase = 20 * n + 8 * n * cfg.rotational_orders.len() as u64 + 6 * n + 5 * n * lg;
    let freq = 5 * n * lg + 25 * n;
    let cyclo = 8 * n * (cfg.cyclic_alphas.len() * cfg.cyclic_lags.len()) as u64;
    4 * n + amp + phase + freq + 30 * n + 14 * n + cyclo
}

pub fn complexity_report<T: Scalar>(bundle: &GamcBundle<T>, frame_len: usize) -> ComplexityReport {
    let c = bundle.num_classes() as u64;
    let fe_flops = graph_flops(frame_len, &bundle.extractor.graph) + stat_flops(frame_len, &bundle.extractor.stat);
    let lnt_per_expert: Vec<u64> = bundle.moe.experts.iter().map(|e| e.lnt.parameter_count() as u64).collect();
    let lnt_flops: u64 =
        bundle.moe.experts.iter().flat_map(|e| &e.lnt.stages).map(|s| 2 * s.indices.len() as u64 * c).sum();
    let gate = bundle.moe.cqi.model.as_ref();
    let moe_params = bundle.moe.experts.iter().map(|e| tree_params(&e.classifier)).sum::<u64>() + gate.map_or(0, tree_params);
    let moe_flops = bundle.moe.experts.iter().map(|e| tree_flops(&e.classifier)).sum::<u64>() + gate.map_or(0, tree_flops);
    let row = |name: &str, parameters, flops| ComplexityRow { component: name.into(), parameters, flops };
    let lnt_params = lnt_per_expert.iter().sum();
    ComplexityReport {
        feature_extraction: row("Feature Extraction", 0, fe_flops),
        lnt: row("LNT", lnt_params, lnt_flops),
        moe: row("MoE", moe_params, moe_flops),
        total: row("Total", lnt_params + moe_params, fe_flops + lnt_flops + moe_flops),
        lnt_per_expert,
    }
}

impl ComplexityReport {
    pub fn rows(&self) -> [&ComplexityRow; 4] {
        [&self.feature_extraction, &self.lnt, &self.moe, &self.total]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("component,parameters,flops\n");
        for r in self.rows() {
            let _ = writeln!(s, "{},{},{}", r.component, r.parameters, r.flops);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!("# {COMPLEXITY_CONVENTION}\n{:<20}{:>14}{:>14}\n", "component", "params (K)", "FLOPs (K)");
        for r in self.rows() {
            let _ = writeln!(s, "{:<20}{:>14.1}{:>14.1}", r.component, r.parameters as f64 / 1e3, r.flops as f64 / 1e3);
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Bundle file: magic, u32 version, u8 scalar width, u64 payload length,
// SHA-256 of the payload, then the bincode payload.

const HEADER_LEN: usize = 4 + 4 + 1 + 8 + 32;

pub fn write_bundle<T: Scalar, W: Write>(bundle: &GamcBundle<T>, mut w: W) -> Result<()> {
    let payload = bincode::serialize(bundle).map_err(|e| Error::InvalidArgument(format!("cannot encode bundle: {e}")))?;
    w.write_all(&BUNDLE_MAGIC)?;
    w.write_all(&BUNDLE_VERSION.to_le_bytes())?;
    w.write_all(&[std::mem::size_of::<T>() as u8])?;
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    w.write_all(&Sha256::digest(&payload))?;
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_bundle<T: Scalar, R: Read>(mut r: R) -> Result<GamcBundle<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 8 {
        return Err(Error::Corrupt(format!("bundle is only {} bytes long", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if found != BUNDLE_MAGIC {
        return Err(Error::BadMagic { expected: BUNDLE_MAGIC, found });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != BUNDLE_VERSION {
        return Err(Error::VersionMismatch { expected: BUNDLE_VERSION, found: version });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt("bundle header is truncated".into()));
    }
    let width = bytes[8] as usize;
    if width != std::mem::size_of::<T>() {
        return Err(Error::InvalidArgument(format!(
            "bundle stores {}-byte scalars, reader expects {}",
            width,
            std::mem::size_of::<T>()
        )));
    }
    let len = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes")) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(Error::Corrupt(format!("payload is {} bytes, header declares {len}", payload.len())));
    }
    if Sha256::digest(payload).as_slice() != &bytes[17..HEADER_LEN] {
        return Err(Error::Corrupt("payload checksum mismatch".into()));
    }
    let bundle: GamcBundle<T> =
        bincode::deserialize(payload).map_err(|e| Error::Corrupt(format!("cannot decode bundle: {e}")))?;
    if bundle.format_version != BUNDLE_VERSION {
        return Err(Error::VersionMismatch { expected: BUNDLE_VERSION, found: bundle.format_version });
    }
    Ok(bundle)
}

pub fn save_bundle<T: Scalar>(bundle: &GamcBundle<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_bundle(bundle, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_bundle<T: Scalar>(path: impl AsRef<Path>) -> Result<GamcBundle<T>> {
    read_bundle(std::fs::File::open(path)?)
}
