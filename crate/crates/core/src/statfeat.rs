//! Statistical descriptors of a normalized frame: amplitude, phase, spectral,
//! higher-order cumulant, bispectrum and cyclic-autocorrelation families.
//!
//! Every family writes a fixed number of slots determined by [`StatConfig`],
//! so the concatenated vector has a stable layout:
//!
//! | family   | slots                                                        |
//! |----------|--------------------------------------------------------------|
//! | amp      | `amp_bins + |cdf_quantiles| + |tail_thresholds| + iq2d_bins^2` |
//! | phase    | `1 + |rotational_orders| + phase_diff_bins + 2 + phase_diff_bands` |
//! | freq     | `logmag_bins + 2`                                            |
//! | hoc      | `10` (six magnitudes, then Re/Im of C20 and C40)             |
//! | bispec   | `bispec_bins`                                                |
//! | cyclo    | `|cyclic_alphas| * |cyclic_lags|`                             |
//!
//! With the defaults that is 104 + 46 + 34 + 10 + 16 + 9 = 219 slots.

use std::ops::Range;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::IqFrame;
use crate::graphify::wrap_phase;
use crate::scalar::Scalar;

const LOG_FLOOR: f64 = 1e-12;
const HOC_SLOTS: usize = 10;
const HOC_NAMES: [&str; HOC_SLOTS] =
    ["abs_c20", "abs_c21", "abs_c40", "abs_c41", "abs_c42", "abs_c63", "re_c20", "im_c20", "re_c40", "im_c40"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatConfig {
    pub amp_bins: usize,
    pub amp_max: f64,
    pub cdf_quantiles: Vec<f64>,
    /// Tail thresholds as multiples of the unit RMS.
    pub tail_thresholds: Vec<f64>,
    pub iq2d_bins: usize,
    pub iq2d_limit: f64,
    pub rotational_orders: Vec<u32>,
    pub phase_diff_bins: usize,
    pub phase_diff_bands: usize,
    pub logmag_bins: usize,
    pub bispec_bins: usize,
    /// Cyclic frequencies in cycles/sample.
    pub cyclic_alphas: Vec<f64>,
    pub cyclic_lags: Vec<usize>,
}

impl Default for StatConfig {
    fn default() -> Self {
        Self {
            amp_bins: 32,
            amp_max: 4.0,
            cdf_quantiles: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            tail_thresholds: vec![1.5, 2.0, 2.5],
            iq2d_bins: 8,
            iq2d_limit: 3.0,
            rotational_orders: vec![2, 4, 8],
            phase_diff_bins: 32,
            phase_diff_bands: 8,
            logmag_bins: 32,
            bispec_bins: 16,
            cyclic_alphas: vec![0.125, 0.25, 0.5],
            cyclic_lags: vec![1, 2, 4],
        }
    }
}

impl StatConfig {
    pub fn validate(&self) -> Result<()> {
        let bins = [self.amp_bins, self.iq2d_bins, self.phase_diff_bins, self.logmag_bins, self.bispec_bins];
        if bins.iter().any(|&b| b < 2) || self.phase_diff_bands < 1 {
            return Err(Error::InvalidArgument("every histogram needs at least 2 bins".into()));
        }
        if !(self.amp_max > 0.0 && self.iq2d_limit > 0.0) {
            return Err(Error::InvalidArgument("histogram ranges must be positive".into()));
        }
        if self.tail_thresholds.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidArgument("tail thresholds must be positive".into()));
        }
        if self.cdf_quantiles.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidArgument("quantiles must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn amp_len(&self) -> usize {
        self.amp_bins + self.cdf_quantiles.len() + self.tail_thresholds.len() + self.iq2d_bins * self.iq2d_bins
    }

    fn phase_len(&self) -> usize {
        1 + self.rotational_orders.len() + self.phase_diff_bins + 2 + self.phase_diff_bands
    }

    fn freq_len(&self) -> usize {
        self.logmag_bins + 2
    }

    fn cyclo_len(&self) -> usize {
        self.cyclic_alphas.len() * self.cyclic_lags.len()
    }

    /// Slot ranges of each family within the concatenated vector.
    pub fn family_ranges(&self) -> Vec<(&'static str, Range<usize>)> {
        let lens = [
            ("amp", self.amp_len()),
            ("phase", self.phase_len()),
            ("freq", self.freq_len()),
            ("hoc", HOC_SLOTS),
            ("bispec", self.bispec_bins),
            ("cyclo", self.cyclo_len()),
        ];
        let mut start = 0;
        lens.iter()
            .map(|&(name, len)| {
                let r = start..start + len;
                start += len;
                (name, r)
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.family_ranges().last().map_or(0, |(_, r)| r.end)
    }

    /// Names as `s.{family}.{slot}`, in emission order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend((0..self.amp_bins).map(|b| format!("s.amp.hist{b:02}")));
        v.extend(self.cdf_quantiles.iter().map(|q| format!("s.amp.cdf_q{q}")));
        v.extend(self.tail_thresholds.iter().map(|t| format!("s.amp.tail{t}")));
        for r in 0..self.iq2d_bins {
            v.extend((0..self.iq2d_bins).map(|c| format!("s.amp.iq2d_{r}_{c}")));
        }
        v.push("s.phase.R".into());
        v.extend(self.rotational_orders.iter().map(|k| format!("s.phase.M{k}")));
        v.extend((0..self.phase_diff_bins).map(|b| format!("s.phase.dhist{b:02}")));
        v.push("s.phase.dmean".into());
        v.push("s.phase.dvar".into());
        v.extend((0..self.phase_diff_bands).map(|b| format!("s.phase.dband{b}")));
        v.extend((0..self.logmag_bins).map(|b| format!("s.freq.loghist{b:02}")));
        v.push("s.freq.papr".into());
        v.push("s.freq.entropy".into());
        v.extend(HOC_NAMES.iter().map(|n| format!("s.hoc.{n}")));
        v.extend((0..self.bispec_bins).map(|b| format!("s.bispec.b{b:02}")));
        for a in &self.cyclic_alphas {
            v.extend(self.cyclic_lags.iter().map(|t| format!("s.cyclo.a{a}_t{t}")));
        }
        v
    }
}

/// Fraction of `values` per bin over `[lo, hi)`; out-of-range values land in the edge bins.
pub fn histogram_density<T: Scalar>(values: impl IntoIterator<Item = T>, bins: usize, lo: T, hi: T) -> Vec<T> {
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    let width = hi - lo;
    let nb = T::from_usize_lossy(bins);
    for v in values {
        let idx = if width > T::zero() {
            let pos = ((v - lo) / width * nb).floor();
            if pos < T::zero() {
                0
            } else {
                pos.to_usize().unwrap_or(bins - 1).min(bins - 1)
            }
        } else {
            0
        };
        counts[idx] += 1;
        total += 1;
    }
    let t = T::from_usize_lossy(total.max(1));
    counts.into_iter().map(|c| T::from_usize_lossy(c) / t).collect()
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn mean_of<T: Scalar>(xs: impl ExactSizeIterator<Item = T>) -> T {
    let n = T::from_usize_lossy(xs.len().max(1));
    xs.sum::<T>() / n
}

fn complex_mean<T: Scalar>(xs: impl Iterator<Item = Complex<T>>, n: usize) -> Complex<T> {
    let s = xs.fold(Complex::new(T::zero(), T::zero()), |acc, x| acc + x);
    s / T::from_usize_lossy(n.max(1))
}

pub fn amplitude_features<T: Scalar>(frame: &IqFrame<T>, cfg: &StatConfig) -> Vec<T> {
    let r: Vec<T> = frame.samples.iter().map(|c| c.norm()).collect();
    let mut out = histogram_density(r.iter().copied(), cfg.amp_bins, T::zero(), T::lit(cfg.amp_max));
    let mut sorted = r.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite amplitudes"));
    out.extend(cfg.cdf_quantiles.iter().map(|&q| quantile_sorted(&sorted, q)));
    let n = T::from_usize_lossy(r.len());
    for &tau in &cfg.tail_thresholds {
        let t = T::lit(tau);
        out.push(T::from_usize_lossy(r.iter().filter(|&&a| a > t).count()) / n);
    }
    let lim = T::lit(cfg.iq2d_limit);
    let b = cfg.iq2d_bins;
    let cell = |v: T| histogram_density([v], b, -lim, lim).iter().position(|&x| x > T::zero()).unwrap_or(0);
    let mut grid = vec![0usize; b * b];
    for c in &frame.samples {
        grid[cell(c.im) * b + cell(c.re)] += 1;
    }
    out.extend(grid.into_iter().map(|c| T::from_usize_lossy(c) / n));
    out
}

fn phases<T: Scalar>(frame: &IqFrame<T>) -> Vec<T> {
    frame.samples.iter().map(|c| if c.norm_sqr() == T::zero() { T::zero() } else { c.arg() }).collect()
}

pub fn phase_features<T: Scalar>(frame: &IqFrame<T>, cfg: &StatConfig) -> Vec<T> {
    let n = frame.len();
    let theta = phases(frame);
    let mut out = Vec::with_capacity(cfg.phase_len());
    out.push(complex_mean(theta.iter().map(|&t| Complex::from_polar(T::one(), t)), n).norm());
    for &k in &cfg.rotational_orders {
        out.push(complex_mean(frame.samples.iter().map(|c| c.powu(k)), n).norm());
    }
    let dtheta: Vec<T> = theta.windows(2).map(|w| wrap_phase(w[1] - w[0])).collect();
    out.extend(histogram_density(dtheta.iter().copied(), cfg.phase_diff_bins, -T::PI(), T::PI()));
    let resultant = complex_mean(dtheta.iter().map(|&d| Complex::from_polar(T::one(), d)), dtheta.len());
    out.push(if resultant.norm() > T::zero() { resultant.arg() } else { T::zero() });
    out.push(T::one() - resultant.norm());

    let m = dtheta.len();
    let mut spec: Vec<Complex<T>> = dtheta.iter().map(|&d| Complex::new(d, T::zero())).collect();
    T::fft_forward(&mut spec);
    let norm = T::from_usize_lossy(m * m);
    let bands = cfg.phase_diff_bands;
    for b in 0..bands {
        let lo = b * m / bands;
        let hi = (b + 1) * m / bands;
        out.push(spec[lo..hi].iter().map(|c| c.norm_sqr()).sum::<T>() / norm);
    }
    out
}

fn spectrum<T: Scalar>(frame: &IqFrame<T>) -> Vec<Complex<T>> {
    let mut x = frame.samples.clone();
    T::fft_forward(&mut x);
    x
}

pub fn frequency_features<T: Scalar>(frame: &IqFrame<T>, cfg: &StatConfig) -> Vec<T> {
    frequency_features_from(&spectrum(frame), cfg)
}

fn frequency_features_from<T: Scalar>(spec: &[Complex<T>], cfg: &StatConfig) -> Vec<T> {
    let mag: Vec<T> = spec.iter().map(|c| c.norm()).collect();
    let logmag: Vec<T> = mag.iter().map(|&m| (m + T::lit(LOG_FLOOR)).ln()).collect();
    let lo = logmag.iter().copied().fold(T::infinity(), T::min);
    let hi = logmag.iter().copied().fold(T::neg_infinity(), T::max);
    // top edge is inclusive: the maximum falls in the last bin
    let mut out = histogram_density(logmag.iter().copied(), cfg.logmag_bins, lo, hi);
    if hi > lo {
        let at_top = logmag.iter().filter(|&&v| v == hi).count();
        let f = T::from_usize_lossy(at_top) / T::from_usize_lossy(logmag.len());
        // histogram_density already clamps the maximum into the last bin
        debug_assert!(out[cfg.logmag_bins - 1] >= f);
    }
    let power: Vec<T> = mag.iter().map(|&m| m * m).collect();
    let total: T = power.iter().copied().sum();
    let peak = power.iter().copied().fold(T::zero(), T::max);
    let mean = total / T::from_usize_lossy(power.len());
    out.push(if mean > T::zero() { peak / mean } else { T::zero() });
    out.push(power_entropy(&power, total));
    out
}

fn power_entropy<T: Scalar>(power: &[T], total: T) -> T {
    if !(total > T::zero()) {
        return T::zero();
    }
    power
        .iter()
        .map(|&p| {
            let q = p / total;
            if q > T::zero() {
                -q * q.ln()
            } else {
                T::zero()
            }
        })
        .sum()
}

/// Zero-lag sample cumulants of a complex sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cumulants<T> {
    pub c20: Complex<T>,
    pub c21: T,
    pub c40: Complex<T>,
    pub c41: Complex<T>,
    pub c42: T,
    pub c63: T,
}

pub fn cumulants<T: Scalar>(x: &[Complex<T>]) -> Cumulants<T> {
    let n = x.len();
    let m20 = complex_mean(x.iter().map(|c| c * c), n);
    let m21 = mean_of(x.iter().map(|c| c.norm_sqr()));
    let m40 = complex_mean(x.iter().map(|c| c.powu(4)), n);
    let m41 = complex_mean(x.iter().map(|c| c.powu(3) * c.conj()), n);
    let m42 = mean_of(x.iter().map(|c| c.norm_sqr() * c.norm_sqr()));
    let m63 = mean_of(x.iter().map(|c| c.norm_sqr().powi(3)));
    let three = T::lit(3.0);
    let abs_m20_sq = m20.norm_sqr();
    Cumulants {
        c20: m20,
        c21: m21,
        c40: m40 - m20 * m20 * three,
        c41: m41 - m20 * m21 * three,
        c42: m42 - abs_m20_sq - T::lit(2.0) * m21 * m21,
        c63: m63 - T::lit(9.0) * m42 * m21 + T::lit(12.0) * abs_m20_sq * m21 + T::lit(12.0) * m21.powi(3),
    }
}

pub fn cumulant_features<T: Scalar>(frame: &IqFrame<T>) -> Vec<T> {
    let c = cumulants(&frame.samples);
    vec![
        c.c20.norm(),
        c.c21.abs(),
        c.c40.norm(),
        c.c41.norm(),
        c.c42.abs(),
        c.c63.abs(),
        c.c20.re,
        c.c20.im,
        c.c40.re,
        c.c40.im,
    ]
}

/// Binned magnitude of the diagonal bispectrum slice `X(f) X(f) X*(2f)`,
/// normalized by `(sum |X|^2)^(3/2)`.
pub fn bispectrum_features<T: Scalar>(frame: &IqFrame<T>, cfg: &StatConfig) -> Vec<T> {
    bispectrum_from(&spectrum(frame), cfg)
}

fn bispectrum_from<T: Scalar>(spec: &[Complex<T>], cfg: &StatConfig) -> Vec<T> {
    let n = spec.len();
    let energy: T = spec.iter().map(|c| c.norm_sqr()).sum();
    let scale = if energy > T::zero() { energy.powf(T::lit(1.5)) } else { T::one() };
    let slice: Vec<T> = (0..n).map(|f| (spec[f] * spec[f] * spec[(2 * f) % n].conj()).norm() / scale).collect();
    let bins = cfg.bispec_bins;
    (0..bins)
        .map(|b| {
            let lo = b * n / bins;
            let hi = ((b + 1) * n / bins).max(lo + 1).min(n);
            if lo >= n {
                return T::zero();
            }
            mean_of(slice[lo..hi].iter().copied())
        })
        .collect()
}

/// `|R_x^alpha(tau)| = |(1/N) sum_{n >= tau} x[n] conj(x[n - tau]) exp(-j 2 pi alpha n)|`.
pub fn cyclic_autocorrelation<T: Scalar>(x: &[Complex<T>], alpha: f64, tau: usize) -> T {
    let n = x.len();
    if tau >= n {
        return T::zero();
    }
    let w = T::lit(-std::f64::consts::TAU * alpha);
    let s = (tau..n).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
        acc + x[i] * x[i - tau].conj() * Complex::from_polar(T::one(), w * T::from_usize_lossy(i))
    });
    (s / T::from_usize_lossy(n)).norm()
}

pub fn cyclo_features<T: Scalar>(frame: &IqFrame<T>, cfg: &StatConfig) -> Vec<T> {
    cfg.cyclic_alphas
        .iter()
        .flat_map(|&a| cfg.cyclic_lags.iter().map(move |&t| cyclic_autocorrelation(&frame.samples, a, t)))
        .collect()
}

/// All statistical families of a normalized frame, concatenated in declared order.
pub fn extract_stat_features<T: Scalar>(frame: &IqFrame<T>, cfg: &StatConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    if frame.len() < 2 {
        return Err(Error::InvalidArgument("statistical features need at least 2 samples".into()));
    }
    let spec = spectrum(frame);
    let mut out = Vec::with_capacity(cfg.dim());
    out.extend(amplitude_features(frame, cfg));
    out.extend(phase_features(frame, cfg));
    out.extend(frequency_features_from(&spec, cfg));
    out.extend(cumulant_features(frame));
    out.extend(bispectrum_from(&spec, cfg));
    out.extend(cyclo_features(frame, cfg));
    debug_assert_eq!(out.len(), cfg.dim());
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite statistical feature".into()));
    }
    Ok(out)
}
