//! Repeated running median and arrest detection.
//!
//! Windows are truncated at the series ends, and an even-sized window takes
//! the mean of its two central order statistics. On grid-valued input both
//! operations stay exactly representable, so "no change" can be tested with
//! exact equality.

use crate::error::{Error, Result};
use crate::stats::median_in_place;

/// Half-window sizes applied in order, each pass consuming the previous output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrmSchedule {
    half_windows: Vec<usize>,
}

impl RrmSchedule {
    pub fn new(half_windows: Vec<usize>) -> Result<Self> {
        if half_windows.is_empty() {
            return Err(Error::Domain("running-median schedule is empty".into()));
        }
        if half_windows.contains(&0) {
            return Err(Error::Domain("running-median half windows must be >= 1".into()));
        }
        Ok(Self { half_windows })
    }

    pub fn half_windows(&self) -> &[usize] {
        &self.half_windows
    }
}

impl Default for RrmSchedule {
    fn default() -> Self {
        Self {
            half_windows: vec![3, 2, 1, 1],
        }
    }
}

pub fn running_median(series: &[f64], half_window: usize) -> Vec<f64> {
    let n = series.len();
    let mut buf = Vec::with_capacity(2 * half_window + 1);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window).min(n - 1);
            buf.clear();
            buf.extend_from_slice(&series[lo..=hi]);
            median_in_place(&mut buf).expect("window is never empty")
        })
        .collect()
}

pub fn repeated_running_median(series: &[f64], schedule: &RrmSchedule) -> Vec<f64> {
    schedule
        .half_windows()
        .iter()
        .fold(series.to_vec(), |acc, &h| running_median(&acc, h))
}

/// Per-frame arrest flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrestMask {
    pub mask: Vec<bool>,
    pub min_duration_s: f64,
}

impl ArrestMask {
    /// A mask with no arrests.
    pub fn none(len: usize, min_duration_s: f64) -> Self {
        Self {
            mask: vec![false; len],
            min_duration_s,
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Maximal arrest runs as inclusive `(start, end)` frame pairs.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        runs_of(&self.mask, true)
    }

    pub fn arrest_frames(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Maximal runs of `value` in `flags` as inclusive index pairs.
pub(crate) fn runs_of(flags: &[bool], value: bool) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f == value, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    runs
}

/// Minimum arrest length in frames, `ceil(min_duration_s * fps)`.
pub fn min_arrest_frames(min_duration_s: f64, fps: f64) -> usize {
    // Guard against products such as 0.2 * 30 = 6.000000000000001.
    ((min_duration_s * fps) - 1e-9).ceil().max(1.0) as usize
}

/// Marks runs where both smoothed axes stay exactly constant for at least
/// `min_duration_s`.
pub fn detect_arrests(x_rrm: &[f64], y_rrm: &[f64], fps: f64, min_duration_s: f64) -> Result<ArrestMask> {
    if x_rrm.len() != y_rrm.len() {
        return Err(Error::LengthMismatch {
            what: "x/y running medians",
            left: x_rrm.len(),
            right: y_rrm.len(),
        });
    }
    if !(fps > 0.0) {
        return Err(Error::Domain(format!("fps must be positive, got {fps}")));
    }
    if !(min_duration_s >= 0.0) {
        return Err(Error::Domain(format!("minimum arrest duration must be >= 0, got {min_duration_s}")));
    }
    let n = x_rrm.len();
    let min_frames = min_arrest_frames(min_duration_s, fps);
    let mut mask = vec![false; n];
    let mut start = 0;
    for i in 1..=n {
        let same = i < n && x_rrm[i] == x_rrm[start] && y_rrm[i] == y_rrm[start];
        if !same {
            if i - start >= min_frames {
                mask[start..i].iter_mut().for_each(|m| *m = true);
            }
            start = i;
        }
    }
    Ok(ArrestMask { mask, min_duration_s })
}
