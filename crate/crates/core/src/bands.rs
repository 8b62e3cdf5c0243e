use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNR_MIN_DB: f64 = -20.0;
pub const SNR_MAX_DB: f64 = 18.0;
/// Dataset SNR grid step; adjacent bands may leave at most this gap between them.
pub const SNR_STEP_DB: f64 = 2.0;

/// Ascending closed dB intervals partitioning the SNR range into operating bands.
///
/// Bands are treated as contiguous: a value lying between the upper edge of
/// band `i` and the lower edge of band `i + 1` belongs to band `i + 1`, and a
/// value equal to a shared edge belongs to the lower band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrBands {
    intervals: Vec<(f64, f64)>,
}

impl SnrBands {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidArgument("at least one SNR band is required".into()));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("invalid band [{lo}, {hi}]")));
            }
        }
        for w in intervals.windows(2) {
            let (prev, next) = (w[0], w[1]);
            if next.0 < prev.1 {
                return Err(Error::InvalidArgument(format!(
                    "bands [{}, {}] and [{}, {}] overlap",
                    prev.0, prev.1, next.0, next.1
                )));
            }
            if next.0 - prev.1 > SNR_STEP_DB + 1e-9 {
                return Err(Error::InvalidArgument(format!("gap between {} and {} dB", prev.1, next.0)));
            }
        }
        let first = intervals[0].0;
        let last = intervals[intervals.len() - 1].1;
        if first > SNR_MIN_DB || last < SNR_MAX_DB {
            return Err(Error::InvalidArgument(format!(
                "bands cover [{first}, {last}] but must cover [{SNR_MIN_DB}, {SNR_MAX_DB}]"
            )));
        }
        Ok(Self { intervals })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn band_index(&self, snr_db: f64) -> Result<usize> {
        let lo = self.intervals[0].0;
        let hi = self.intervals[self.intervals.len() - 1].1;
        if !(snr_db >= lo && snr_db <= hi) {
            return Err(Error::SnrOutOfRange(snr_db));
        }
        Ok(self.intervals.iter().position(|&(_, upper)| snr_db <= upper).expect("range checked"))
    }
}

/// Default partitions for `q` experts.
pub fn default_bands(q: usize) -> Result<SnrBands> {
    let iv: &[(f64, f64)] = match q {
        1 => &[(-20.0, 18.0)],
        2 => &[(-20.0, -2.0), (0.0, 18.0)],
        3 => &[(-20.0, -8.0), (-6.0, 2.0), (4.0, 18.0)],
        4 => &[(-20.0, -12.0), (-10.0, -2.0), (0.0, 8.0), (10.0, 18.0)],
        5 => &[(-20.0, -12.0), (-10.0, -6.0), (-4.0, 2.0), (4.0, 10.0), (12.0, 18.0)],
        _ => return Err(Error::InvalidArgument(format!("expert count {q} outside 1..=5"))),
    };
    SnrBands::new(iv.to_vec())
}
