//! Local quadratic LOWESS over a fixed frame window.
//!
//! Every frame gets its own weighted quadratic `a + b t + c t^2` fitted to the
//! surrounding `2h + 1` frames, with `t` in seconds relative to that frame.
//! The three coefficients give position, velocity and acceleration (`2c`)
//! directly. Robustness iterations downweight large residuals with
//! Cleveland's bisquare.

use crate::error::{Error, Result};
use crate::local_fit::{bisquare_weights, tricube, weighted_polyfit};
use crate::stats::median_in_place;

/// Recorded locations of one tracking session, equally spaced in time.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPath {
    pub frames: Vec<i64>,
    /// Seconds.
    pub t: Vec<f64>,
    /// Centimetres.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fps: f64,
    /// Side of one tracking tile in centimetres.
    pub grid_cm: f64,
}

impl RawPath {
    /// Builds a path with frames `0..n` and timestamps `frame / fps`.
    pub fn from_xy(x: Vec<f64>, y: Vec<f64>, fps: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "x/y",
                left: x.len(),
                right: y.len(),
            });
        }
        let frames: Vec<i64> = (0..x.len() as i64).collect();
        let t = frames.iter().map(|&f| f as f64 / fps).collect();
        let path = Self {
            frames,
            t,
            x,
            y,
            fps,
            grid_cm: 1.0,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        for (what, len) in [("frames", self.frames.len()), ("t", self.t.len()), ("y", self.y.len())] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    left: len,
                    right: n,
                });
            }
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Domain(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.grid_cm > 0.0) {
            return Err(Error::Domain(format!("grid_cm must be positive, got {}", self.grid_cm)));
        }
        if let Some(i) = self.frames.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!("frame indices not increasing at row {}", i + 1)));
        }
        let dt = 1.0 / self.fps;
        if let Some(i) = self.t.windows(2).position(|w| ((w[1] - w[0]) - dt).abs() > 1e-6) {
            return Err(Error::Domain(format!("irregular time spacing at row {}", i + 1)));
        }
        if let Some(i) = self.x.iter().zip(&self.y).position(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Domain(format!("non-finite location at row {i}")));
        }
        Ok(())
    }
}

/// Local quadratic coefficients at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    /// Position (cm).
    pub a: f64,
    /// Velocity (cm/s).
    pub b: f64,
    /// Half the acceleration (cm/s^2).
    pub c: f64,
    pub frame: usize,
}

impl LocalFit {
    pub fn position(&self) -> f64 {
        self.a
    }

    pub fn velocity(&self) -> f64 {
        self.b
    }

    pub fn acceleration(&self) -> f64 {
        2.0 * self.c
    }
}

/// Smoothed kinematics for a whole session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KinematicSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub speed: Vec<f64>,
    pub outlier_x: Vec<bool>,
    pub outlier_y: Vec<bool>,
}

impl KinematicSeries {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Path length of the smoothed positions in centimetres.
    pub fn path_length_cm(&self) -> f64 {
        path_length(&self.x, &self.y)
    }

    pub fn is_outlier(&self, i: usize) -> bool {
        self.outlier_x[i] || self.outlier_y[i]
    }
}

/// Sum of Euclidean steps between consecutive points.
pub fn path_length(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]).hypot(ys[1] - ys[0]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowessParams {
    pub half_window: usize,
    pub robustness_iters: usize,
}

impl Default for LowessParams {
    fn default() -> Self {
        Self {
            half_window: 10,
            robustness_iters: 2,
        }
    }
}

/// Multiple of the windowed median absolute residual above which a frame is
/// an outlier.
pub const OUTLIER_FACTOR: f64 = 6.0;

pub fn tricube_weight(u: f64) -> Result<f64> {
    tricube(u)
}

/// Weighted least-squares quadratic through `(t_rel, value)` samples.
///
/// `t_rel` is in seconds relative to the window centre so the linear and
/// quadratic coefficients carry physical units.
pub fn fit_window(t_rel: &[f64], values: &[f64], weights: &[f64]) -> Result<LocalFit> {
    fit_window_degree(t_rel, values, weights, 2)
}

/// As [`fit_window`] with an explicit polynomial degree (0..=2); missing
/// coefficients are zero.
pub fn fit_window_degree(t_rel: &[f64], values: &[f64], weights: &[f64], degree: usize) -> Result<LocalFit> {
    if t_rel.len() != values.len() || t_rel.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "window samples/weights",
            left: t_rel.len(),
            right: values.len().min(weights.len()),
        });
    }
    if t_rel.len() < degree + 1 {
        return Err(Error::SingularFit(format!(
            "{} samples cannot determine a degree-{degree} fit",
            t_rel.len()
        )));
    }
    let [a, b, c] = weighted_polyfit(t_rel, values, weights, degree)?;
    Ok(LocalFit { a, b, c, frame: 0 })
}

/// Fits one local quadratic per frame of `series`.
pub fn smooth_axis(series: &[f64], fps: f64, half_window: usize, robustness_iters: usize) -> Result<Vec<LocalFit>> {
    if half_window < 2 {
        return Err(Error::Domain(format!("half window must be >= 2, got {half_window}")));
    }
    if !(fps > 0.0) {
        return Err(Error::Domain(format!("fps must be positive, got {fps}")));
    }
    let n = series.len();
    let required = 2 * half_window + 1;
    if n < required {
        return Err(Error::SeriesTooShort { got: n, required });
    }

    let magnitude = series.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let mut robustness = vec![1.0; n];
    let mut fits = fit_pass(series, fps, half_window, &robustness);
    for _ in 0..robustness_iters {
        let residuals: Vec<f64> = series.iter().zip(&fits).map(|(v, f)| v - f.a).collect();
        match bisquare_weights(&residuals, magnitude) {
            Some(w) => robustness = w,
            None => break,
        }
        fits = fit_pass(series, fps, half_window, &robustness);
    }
    Ok(fits)
}

fn fit_pass(series: &[f64], fps: f64, h: usize, robustness: &[f64]) -> Vec<LocalFit> {
    let n = series.len();
    let width = 2 * h + 1;
    let mut t = Vec::with_capacity(width);
    let mut kernel = Vec::with_capacity(width);
    let mut w = Vec::with_capacity(width);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            let reach = (i - lo).max(hi - i) as f64 + 1.0;
            t.clear();
            kernel.clear();
            w.clear();
            for j in lo..=hi {
                let d = j as f64 - i as f64;
                let k = tricube(d.abs() / reach).unwrap_or(0.0);
                t.push(d / fps);
                kernel.push(k);
                w.push(k * robustness[j]);
            }
            let values = &series[lo..=hi];
            // Constant window: the fit is that value exactly.
            if values.iter().all(|&v| v == values[0]) {
                return LocalFit { a: values[0], b: 0.0, c: 0.0, frame: i };
            }
            let max_degree = if hi - lo + 1 < 5 { 1 } else { 2 };
            let mut fit = local_fit_with_fallback(&t, values, &w, &kernel, max_degree);
            fit.frame = i;
            fit
        })
        .collect()
}

/// Tries the weighted fit, then the unweighted one, lowering the degree until
/// a fit exists. Degree 0 with at least one sample always succeeds.
fn local_fit_with_fallback(t: &[f64], values: &[f64], weights: &[f64], kernel: &[f64], max_degree: usize) -> LocalFit {
    let uniform = vec![1.0; t.len()];
    for w in [weights, kernel, &uniform[..]] {
        for degree in (0..=max_degree).rev() {
            if let Ok(fit) = fit_window_degree(t, values, w, degree) {
                return fit;
            }
        }
    }
    unreachable!("a constant fit with uniform weights always exists")
}

/// Flags frames whose residual exceeds six times the median absolute
/// residual of the surrounding `2h + 1` frames (truncated at the ends).
///
/// When the window median is zero every nonzero residual is flagged.
pub fn detect_outliers(series: &[f64], fits: &[LocalFit], half_window: usize) -> Result<Vec<bool>> {
    if series.len() != fits.len() {
        return Err(Error::LengthMismatch {
            what: "series/fits",
            left: series.len(),
            right: fits.len(),
        });
    }
    let abs_res: Vec<f64> = series.iter().zip(fits).map(|(v, f)| (v - f.a).abs()).collect();
    let n = abs_res.len();
    let mut buf = Vec::with_capacity(2 * half_window + 1);
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window).min(n - 1);
            buf.clear();
            buf.extend_from_slice(&abs_res[lo..=hi]);
            let med = median_in_place(&mut buf).unwrap_or(0.0);
            abs_res[i] > OUTLIER_FACTOR * med
        })
        .collect())
}

/// Smooths both axes of a session and flags outliers per axis.
pub fn smooth_path(path: &RawPath, params: &LowessParams) -> Result<KinematicSeries> {
    let fx = smooth_axis(&path.x, path.fps, params.half_window, params.robustness_iters)?;
    let fy = smooth_axis(&path.y, path.fps, params.half_window, params.robustness_iters)?;
    let outlier_x = detect_outliers(&path.x, &fx, params.half_window)?;
    let outlier_y = detect_outliers(&path.y, &fy, params.half_window)?;
    let vx: Vec<f64> = fx.iter().map(LocalFit::velocity).collect();
    let vy: Vec<f64> = fy.iter().map(LocalFit::velocity).collect();
    let speed = vx.iter().zip(&vy).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    Ok(KinematicSeries {
        x: fx.iter().map(LocalFit::position).collect(),
        y: fy.iter().map(LocalFit::position).collect(),
        ax: fx.iter().map(LocalFit::acceleration).collect(),
        ay: fy.iter().map(LocalFit::acceleration).collect(),
        vx,
        vy,
        speed,
        outlier_x,
        outlier_y,
    })
}
