//! Frame data model, per-frame normalization, synthetic signal generation and
//! the portable little-endian dataset format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bands::SnrBands;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DATASET_MAGIC: [u8; 4] = *b"GAMC";
pub const DATASET_VERSION: u32 = 1;
pub const FRAME_LEN: usize = 128;
pub const MIN_FRAME_LEN: usize = 4;

/// The eleven modulation classes, declared in class-index order
/// (ascending byte order of the canonical name).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationScheme {
    Psk8,
    AmDsb,
    AmSsb,
    Bpsk,
    Cpfsk,
    Gfsk,
    Pam4,
    Qam16,
    Qam64,
    Qpsk,
    Wbfm,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 11] = [
        Self::Psk8,
        Self::AmDsb,
        Self::AmSsb,
        Self::Bpsk,
        Self::Cpfsk,
        Self::Gfsk,
        Self::Pam4,
        Self::Qam16,
        Self::Qam64,
        Self::Qpsk,
        Self::Wbfm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Psk8 => "8PSK",
            Self::AmDsb => "AM-DSB",
            Self::AmSsb => "AM-SSB",
            Self::Bpsk => "BPSK",
            Self::Cpfsk => "CPFSK",
            Self::Gfsk => "GFSK",
            Self::Pam4 => "PAM4",
            Self::Qam16 => "QAM16",
            Self::Qam64 => "QAM64",
            Self::Qpsk => "QPSK",
            Self::Wbfm => "WBFM",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    pub fn is_analog(self) -> bool {
        matches!(self, Self::AmDsb | Self::AmSsb | Self::Wbfm)
    }

    /// Canonical label table: names in class-index order.
    pub fn label_table() -> Vec<String> {
        Self::ALL.iter().map(|s| s.name().to_string()).collect()
    }
}

impl std::fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s).ok_or_else(|| Error::InvalidArgument(format!("unknown modulation scheme {s:?}")))
    }
}

/// One labeled observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqFrame<T> {
    pub samples: Vec<Complex<T>>,
    /// Index into the owning dataset's label table.
    pub label: usize,
    pub snr_db: i32,
}

impl<T: Scalar> IqFrame<T> {
    pub fn new(samples: Vec<Complex<T>>, label: usize, snr_db: i32) -> Result<Self> {
        if samples.len() < MIN_FRAME_LEN {
            return Err(Error::InvalidArgument(format!(
                "frame has {} samples, need at least {MIN_FRAME_LEN}",
                samples.len()
            )));
        }
        if samples.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("frame contains non-finite samples".into()));
        }
        Ok(Self { samples, label, snr_db })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rms(&self) -> T {
        let n = T::from_usize_lossy(self.samples.len());
        (self.samples.iter().map(|c| c.norm_sqr()).sum::<T>() / n).sqrt()
    }

    /// Multiplies every sample by `exp(j theta)`.
    pub fn rotated(&self, theta: T) -> Self {
        let r = Complex::from_polar(T::one(), theta);
        Self { samples: self.samples.iter().map(|&c| c * r).collect(), ..self.clone() }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { samples: self.samples.iter().map(|&s| s * c).collect(), ..self.clone() }
    }

    pub fn cast<U: Scalar>(&self) -> IqFrame<U> {
        IqFrame {
            samples: self
                .samples
                .iter()
                .map(|c| Complex::new(U::lit(c.re.as_f64()), U::lit(c.im.as_f64())))
                .collect(),
            label: self.label,
            snr_db: self.snr_db,
        }
    }
}

/// Scales a frame to unit RMS amplitude. Phases, label and SNR are untouched.
pub fn normalize_frame<T: Scalar>(frame: &IqFrame<T>) -> Result<IqFrame<T>> {
    let rms = frame.rms();
    if !(rms > T::zero()) || !rms.is_finite() {
        return Err(Error::Degenerate("cannot normalize an all-zero frame".into()));
    }
    Ok(frame.scaled(rms.recip()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub frames: Vec<IqFrame<T>>,
    pub label_table: Vec<String>,
    pub provenance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(frames: Vec<IqFrame<T>>, label_table: Vec<String>, provenance: impl Into<String>) -> Result<Self> {
        let ds = Self { frames, label_table, provenance: provenance.into() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.frames.first() {
            let n = first.len();
            if let Some(bad) = self.frames.iter().find(|f| f.len() != n) {
                return Err(Error::InvalidArgument(format!(
                    "mixed frame lengths in dataset ({n} and {})",
                    bad.len()
                )));
            }
        }
        if let Some(bad) = self.frames.iter().find(|f| f.label >= self.label_table.len()) {
            return Err(Error::LabelOutOfRange { index: bad.label, len: self.label_table.len() });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.frames.first().map_or(0, |f| f.len())
    }

    pub fn num_classes(&self) -> usize {
        self.label_table.len()
    }

    /// Distinct SNR values present, ascending.
    pub fn snr_levels(&self) -> Vec<i32> {
        let mut v: Vec<i32> = self.frames.iter().map(|f| f.snr_db).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
            label_table: self.label_table.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Parameters of the desk-scale signal generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub samples_per_symbol: usize,
    pub gfsk_cpfsk_modulation_index: f64,
    pub gfsk_bt: f64,
    /// Analog source tones in cycles/sample, equal power.
    pub analog_tones: Vec<f64>,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 8,
            gfsk_cpfsk_modulation_index: 0.5,
            gfsk_bt: 0.35,
            analog_tones: vec![0.01, 0.023, 0.037],
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol < 2 {
            return Err(Error::InvalidArgument("samples_per_symbol must be >= 2".into()));
        }
        if self.analog_tones.is_empty() || self.analog_tones.iter().any(|&f| !(f.abs() < 0.5)) {
            return Err(Error::InvalidArgument("analog tones must be non-empty and below 0.5 cycles/sample".into()));
        }
        if !(self.gfsk_cpfsk_modulation_index.is_finite() && self.gfsk_bt > 0.0) {
            return Err(Error::InvalidArgument("invalid FSK parameters".into()));
        }
        Ok(())
    }
}

/// Clean signal and additive noise, kept apart so the realised SNR can be measured.
#[derive(Clone, Debug)]
pub struct SynthParts {
    pub clean: Vec<Complex<f64>>,
    pub noise: Vec<Complex<f64>>,
}

fn frame_rng(cfg: &SynthConfig, seed: u64) -> ChaCha8Rng {
    // splitmix64 finalizer so nearby seeds give unrelated streams
    let mut z = cfg.rng_seed ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn pam_levels(m: usize) -> Vec<f64> {
    (0..m).map(|i| 2.0 * i as f64 - (m as f64 - 1.0)).collect()
}

/// Unit-average-power alphabet of a linear digital scheme.
pub fn constellation(scheme: ModulationScheme) -> Option<Vec<Complex<f64>>> {
    use std::f64::consts::PI;
    let points: Vec<Complex<f64>> = match scheme {
        ModulationScheme::Bpsk => vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)],
        ModulationScheme::Qpsk => (0..4).map(|k| Complex::from_polar(1.0, PI / 4.0 + k as f64 * PI / 2.0)).collect(),
        ModulationScheme::Psk8 => (0..8).map(|k| Complex::from_polar(1.0, k as f64 * PI / 4.0)).collect(),
        ModulationScheme::Pam4 => pam_levels(4).into_iter().map(|a| Complex::new(a, 0.0)).collect(),
        ModulationScheme::Qam16 | ModulationScheme::Qam64 => {
            let side = if scheme == ModulationScheme::Qam16 { 4 } else { 8 };
            let lv = pam_levels(side);
            lv.iter().flat_map(|&i| lv.iter().map(move |&q| Complex::new(i, q))).collect()
        }
        _ => return None,
    };
    let power = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
    let scale = power.sqrt().recip();
    Some(points.into_iter().map(|p| p * scale).collect())
}

fn gaussian_taps(bt: f64, sps: usize, span_symbols: usize) -> Vec<f64> {
    let half = (span_symbols * sps / 2) as isize;
    let a = 2.0 * std::f64::consts::PI.powi(2) * bt * bt / std::f64::consts::LN_2;
    let taps: Vec<f64> = (-half..=half)
        .map(|t| {
            let x = t as f64 / sps as f64;
            (-a * x * x).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

fn fsk_signal(rng: &mut ChaCha8Rng, n: usize, sps: usize, h: f64, gaussian_bt: Option<f64>) -> Vec<Complex<f64>> {
    const GUARD: usize = 2;
    let offset = rng.random_range(0..sps);
    let nsym = (n + offset).div_ceil(sps) + 2 * GUARD;
    let bits: Vec<f64> = (0..nsym).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    // NRZ frequency pulse train, starting GUARD symbols before the first output sample
    let start = GUARD * sps + offset;
    let nrz: Vec<f64> = (0..nsym * sps).map(|t| bits[t / sps]).collect();
    let freq: Vec<f64> = match gaussian_bt {
        None => nrz[start..start + n].to_vec(),
        Some(bt) => {
            let taps = gaussian_taps(bt, sps, 4);
            let half = taps.len() / 2;
            (start..start + n)
                .map(|t| taps.iter().enumerate().map(|(k, &w)| w * nrz[t + k - half]).sum())
                .collect()
        }
    };
    let step = std::f64::consts::PI * h / sps as f64;
    let mut phase = 0.0;
    freq.iter()
        .map(|&f| {
            phase += step * f;
            Complex::from_polar(1.0, phase)
        })
        .collect()
}

fn analog_source(rng: &mut ChaCha8Rng, n: usize, tones: &[f64]) -> (Vec<f64>, Vec<Complex<f64>>) {
    use std::f64::consts::TAU;
    let amp = (2.0 / tones.len() as f64).sqrt();
    let phases: Vec<f64> = tones.iter().map(|_| rng.random::<f64>() * TAU).collect();
    let real = (0..n)
        .map(|t| tones.iter().zip(&phases).map(|(&f, &p)| amp * (TAU * f * t as f64 + p).cos()).sum())
        .collect();
    let analytic = (0..n)
        .map(|t| tones.iter().zip(&phases).map(|(&f, &p)| Complex::from_polar(amp, TAU * f * t as f64 + p)).sum())
        .collect();
    (real, analytic)
}

fn unit_rms(mut x: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
    let p = x.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
    if p > 0.0 {
        let s = p.sqrt().recip();
        x.iter_mut().for_each(|c| *c *= s);
    }
    x
}

/// Generates the clean and noise components of one synthetic frame.
pub fn synthesize_parts(
    scheme: ModulationScheme,
    snr_db: f64,
    n: usize,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<SynthParts> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite SNR {snr_db}")));
    }
    if n < MIN_FRAME_LEN {
        return Err(Error::InvalidArgument(format!("frame length {n} < {MIN_FRAME_LEN}")));
    }
    cfg.validate()?;
    let mut rng = frame_rng(cfg, seed);
    let sps = cfg.samples_per_symbol;
    let h = cfg.gfsk_cpfsk_modulation_index;

    let clean = match scheme {
        ModulationScheme::Cpfsk => fsk_signal(&mut rng, n, sps, h, None),
        ModulationScheme::Gfsk => fsk_signal(&mut rng, n, sps, h, Some(cfg.gfsk_bt)),
        ModulationScheme::AmDsb => {
            let (m, _) = analog_source(&mut rng, n, &cfg.analog_tones);
            unit_rms(m.into_iter().map(|v| Complex::new(1.0 + 0.3 * v, 0.0)).collect())
        }
        ModulationScheme::AmSsb => {
            let (_, a) = analog_source(&mut rng, n, &cfg.analog_tones);
            unit_rms(a)
        }
        ModulationScheme::Wbfm => {
            let (m, _) = analog_source(&mut rng, n, &cfg.analog_tones);
            let k = std::f64::consts::TAU * 0.05;
            let mut phase = 0.0;
            m.into_iter()
                .map(|v| {
                    phase += k * v;
                    Complex::from_polar(1.0, phase)
                })
                .collect()
        }
        linear => {
            let alphabet = constellation(linear).expect("linear scheme has a constellation");
            let offset = rng.random_range(0..sps);
            let nsym = (n + offset).div_ceil(sps);
            let symbols: Vec<Complex<f64>> =
                (0..nsym).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
            (0..n).map(|t| symbols[(t + offset) / sps]).collect()
        }
    };

    let sigma = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
    let noise = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(re * sigma, im * sigma)
        })
        .collect();
    Ok(SynthParts { clean, noise })
}

/// Synthesizes a unit-power frame of `scheme` with circular AWGN at `snr_db`.
pub fn synthesize_frame<T: Scalar>(
    scheme: ModulationScheme,
    snr_db: f64,
    n: usize,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<IqFrame<T>> {
    let parts = synthesize_parts(scheme, snr_db, n, cfg, seed)?;
    let samples = parts
        .clean
        .iter()
        .zip(&parts.noise)
        .map(|(c, w)| {
            let s = c + w;
            Complex::new(T::lit(s.re), T::lit(s.im))
        })
        .collect();
    Ok(IqFrame { samples, label: scheme.index(), snr_db: snr_db.round() as i32 })
}

/// Builds a full synthetic grid: `per_cell` frames for every (scheme, SNR) pair,
/// labelled against the canonical 11-name table.
pub fn synthesize_dataset<T: Scalar>(
    schemes: &[ModulationScheme],
    snrs: &[i32],
    per_cell: usize,
    n: usize,
    cfg: &SynthConfig,
) -> Result<Dataset<T>> {
    let mut frames = Vec::with_capacity(schemes.len() * snrs.len() * per_cell);
    for &scheme in schemes {
        for &snr in snrs {
            for i in 0..per_cell {
                let seed = ((scheme.index() as u64) << 48) ^ (((snr + 128) as u64) << 32) ^ i as u64;
                frames.push(synthesize_frame(scheme, snr as f64, n, cfg, seed)?);
            }
        }
    }
    Dataset::new(
        frames,
        ModulationScheme::label_table(),
        format!("synthetic(seed={}, sps={}, n={n})", cfg.rng_seed, cfg.samples_per_symbol),
    )
}

pub fn snr_band_index(snr_db: f64, bands: &SnrBands) -> Result<usize> {
    bands.band_index(snr_db)
}

// ---------------------------------------------------------------------------
// Portable dataset file

fn truncated(what: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated(what.to_string())
        } else {
            Error::Io(e)
        }
    }
}

/// Writes `ds` in the portable format (samples rounded to `f32`).
pub fn write_dataset<T: Scalar, W: Write>(ds: &Dataset<T>, mut w: W) -> Result<()> {
    ds.validate()?;
    let label_count = u16::try_from(ds.label_table.len())
        .map_err(|_| Error::InvalidArgument("too many labels for a u16 count".into()))?;
    if ds.label_table.len() > 256 {
        return Err(Error::InvalidArgument("label indices are stored as u8; at most 256 labels".into()));
    }
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&label_count.to_le_bytes())?;
    for name in &ds.label_table {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len()).map_err(|_| Error::InvalidArgument(format!("label {name:?} too long")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(bytes)?;
    }
    let count = u32::try_from(ds.frames.len()).map_err(|_| Error::InvalidArgument("too many frames".into()))?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&(ds.frame_len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(2 + 8 * ds.frame_len());
    for f in &ds.frames {
        let snr = i8::try_from(f.snr_db)
            .map_err(|_| Error::InvalidArgument(format!("SNR {} does not fit the i8 field", f.snr_db)))?;
        buf.clear();
        buf.push(f.label as u8);
        buf.push(snr as u8);
        for c in &f.samples {
            buf.extend_from_slice(&c.re.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
        for c in &f.samples {
            buf.extend_from_slice(&c.im.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<T: Scalar, R: Read>(mut r: R, provenance: impl Into<String>) -> Result<Dataset<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated("magic"))?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic { expected: DATASET_MAGIC, found: magic });
    }
    let mut b4 = [0u8; 4];
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b4).map_err(truncated("version"))?;
    let version = u32::from_le_bytes(b4);
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch { expected: DATASET_VERSION, found: version });
    }
    r.read_exact(&mut b2).map_err(truncated("label count"))?;
    let label_count = u16::from_le_bytes(b2) as usize;
    let mut label_table = Vec::with_capacity(label_count);
    for _ in 0..label_count {
        r.read_exact(&mut b2).map_err(truncated("label length"))?;
        let mut name = vec![0u8; u16::from_le_bytes(b2) as usize];
        r.read_exact(&mut name).map_err(truncated("label name"))?;
        label_table.push(String::from_utf8(name).map_err(|e| Error::Corrupt(format!("label is not UTF-8: {e}")))?);
    }
    r.read_exact(&mut b4).map_err(truncated("frame count"))?;
    let count = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(truncated("frame length"))?;
    let n = u32::from_le_bytes(b4) as usize;
    if count > 0 && n == 0 {
        return Err(Error::Corrupt("non-empty dataset with zero frame length".into()));
    }

    let mut frames = Vec::with_capacity(count.min(1 << 20));
    let mut raw = vec![0u8; 2 + 8 * n];
    for k in 0..count {
        r.read_exact(&mut raw).map_err(|e| truncated("frame payload")(e).with_frame(k))?;
        let label = raw[0] as usize;
        if label >= label_count {
            return Err(Error::LabelOutOfRange { index: label, len: label_count });
        }
        let snr = raw[1] as i8 as i32;
        let float = |j: usize| {
            let o = 2 + 4 * j;
            f32::from_le_bytes([raw[o], raw[o + 1], raw[o + 2], raw[o + 3]])
        };
        let samples = (0..n).map(|j| Complex::new(T::lit(float(j) as f64), T::lit(float(n + j) as f64))).collect();
        frames.push(IqFrame { samples, label, snr_db: snr });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Corrupt("trailing bytes after the last frame".into()));
    }
    Ok(Dataset { frames, label_table, provenance: provenance.into() })
}

trait WithFrame {
    fn with_frame(self, k: usize) -> Self;
}

impl WithFrame for Error {
    fn with_frame(self, k: usize) -> Self {
        match self {
            Error::Truncated(what) => Error::Truncated(format!("{what} of frame {k}")),
            other => other,
        }
    }
}

pub fn save_dataset<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, BufWriter::new(File::create(path)?))
}

/// Loads a portable dataset file; provenance is set to the file path.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    read_dataset(BufReader::new(File::open(path)?), format!("file:{}", path.display()))
}
