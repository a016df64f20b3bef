//! Weighted least-squares polynomials of degree at most two, and a
//! nearest-neighbour LOWESS built on them.
//!
//! Fits are computed with weighted orthogonal polynomials (three-term
//! recurrence) on centred, rescaled abscissae, which stays well conditioned
//! for the short windows used here and never forms normal equations.

use crate::error::{Error, Result};
use crate::stats::median_in_place;

/// Relative variance below which a basis polynomial is treated as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

/// Polynomial `c[0] + c[1] t + c[2] t^2` in the caller's abscissa units.
pub type Poly2 = [f64; 3];

/// Weighted least-squares polynomial of `degree` (0, 1 or 2).
///
/// Fails with [`Error::SingularFit`] when the weighted design cannot support
/// the requested degree (no weight mass, or too few distinct abscissae with
/// positive weight).
pub fn weighted_polyfit(t: &[f64], v: &[f64], w: &[f64], degree: usize) -> Result<Poly2> {
    debug_assert!(t.len() == v.len() && t.len() == w.len());
    if degree > 2 {
        return Err(Error::Domain(format!("degree {degree} not supported")));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || w.iter().any(|&wi| wi < 0.0) {
        return Err(Error::SingularFit("no positive weight mass".into()));
    }
    let g0 = dot3(w, v, None) / total;
    if degree == 0 {
        return Ok([g0, 0.0, 0.0]);
    }

    let centre = dot3(w, t, None) / total;
    let scale = t
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|(&ti, _)| (ti - centre).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::SingularFit("all weighted abscissae coincide".into()));
    }
    let u: Vec<f64> = t.iter().map(|&ti| (ti - centre) / scale).collect();

    // p1 = u - a1
    let a1 = dot3(w, &u, None) / total;
    let p1: Vec<f64> = u.iter().map(|&ui| ui - a1).collect();
    let gamma1 = dot3(w, &p1, Some(&p1));
    if gamma1 <= DEGENERACY_TOL * total {
        return Err(Error::SingularFit("fewer than 2 distinct abscissae".into()));
    }
    let g1 = dot3(w, v, Some(&p1)) / gamma1;

    let (mut c0, mut c1, mut c2) = (g0 - g1 * a1, g1, 0.0);
    if degree == 2 {
        // p2 = (u - a2) p1 - b1
        let a2 = w
            .iter()
            .zip(&u)
            .zip(&p1)
            .map(|((wi, ui), pi)| wi * ui * pi * pi)
            .sum::<f64>()
            / gamma1;
        let b1 = gamma1 / total;
        let p2: Vec<f64> = u
            .iter()
            .zip(&p1)
            .map(|(&ui, &pi)| (ui - a2) * pi - b1)
            .collect();
        let gamma2 = dot3(w, &p2, Some(&p2));
        if gamma2 <= DEGENERACY_TOL * total {
            return Err(Error::SingularFit("fewer than 3 distinct abscissae".into()));
        }
        let g2 = dot3(w, v, Some(&p2)) / gamma2;
        c0 += g2 * (a1 * a2 - b1);
        c1 -= g2 * (a1 + a2);
        c2 = g2;
    }

    // Back from u = (t - centre) / scale to t.
    let (s, m) = (scale, centre);
    Ok([
        c0 - c1 * m / s + c2 * m * m / (s * s),
        c1 / s - 2.0 * c2 * m / (s * s),
        c2 / (s * s),
    ])
}

#[inline]
fn dot3(w: &[f64], a: &[f64], b: Option<&[f64]>) -> f64 {
    match b {
        Some(b) => w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum(),
        None => w.iter().zip(a).map(|(w, a)| w * a).sum(),
    }
}

/// Tricube kernel `(1 - u^3)^3` on `[0, 1)`, zero beyond.
pub fn tricube(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("tricube distance must be >= 0, got {u}")));
    }
    Ok(if u < 1.0 {
        let k = 1.0 - u * u * u;
        k * k * k
    } else {
        0.0
    })
}

/// Cleveland's bisquare robustness weights for `residuals`.
///
/// Returns `None` when the residual scale (six times the median absolute
/// residual) is negligible relative to `magnitude`; iterations stop there.
pub fn bisquare_weights(residuals: &[f64], magnitude: f64) -> Option<Vec<f64>> {
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    let cmad = 6.0 * median_in_place(&mut abs)?;
    if !(cmad > 1e-7 * magnitude) || cmad == 0.0 {
        return None;
    }
    let (c1, c9) = (0.001 * cmad, 0.999 * cmad);
    Some(
        residuals
            .iter()
            .map(|r| {
                let r = r.abs();
                if r <= c1 {
                    1.0
                } else if r > c9 {
                    0.0
                } else {
                    let q = r / cmad;
                    let k = 1.0 - q * q;
                    k * k
                }
            })
            .collect(),
    )
}

/// Nearest-neighbour LOWESS evaluated at arbitrary points.
///
/// `x` must be ascending. Each evaluation uses the `span` nearest data points
/// with tricube weights scaled to the farthest of them, times the robustness
/// weights from `iterations` bisquare passes over the data.
#[derive(Debug, Clone)]
pub struct ScatterLowess<'a> {
    x: &'a [f64],
    y: &'a [f64],
    span: usize,
    degree: usize,
}

impl<'a> ScatterLowess<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64], span: usize, degree: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "lowess x/y",
                left: x.len(),
                right: y.len(),
            });
        }
        if x.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::Domain("lowess abscissae must be ascending".into()));
        }
        if x.len() < degree + 1 {
            return Err(Error::SeriesTooShort {
                got: x.len(),
                required: degree + 1,
            });
        }
        let span = span.clamp(degree + 1, x.len());
        Ok(Self { x, y, span, degree })
    }

    pub fn span(&self) -> usize {
        self.span
    }

    /// Robustness weights after `iterations` reweighting passes.
    pub fn robustness_weights(&self, iterations: usize) -> Vec<f64> {
        let mut rob = vec![1.0; self.x.len()];
        let magnitude = crate::stats::mean(&self.y.iter().map(|v| v.abs()).collect::<Vec<_>>());
        for _ in 0..iterations {
            let fitted: Vec<f64> = self.x.iter().map(|&x0| self.fit_at(x0, &rob)).collect();
            let residuals: Vec<f64> = self.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
            match bisquare_weights(&residuals, magnitude) {
                Some(w) => rob = w,
                None => break,
            }
        }
        rob
    }

    /// Smoothed values at each of `at`, after `iterations` robustness passes.
    pub fn evaluate(&self, at: &[f64], iterations: usize) -> Vec<f64> {
        let rob = self.robustness_weights(iterations);
        at.iter().map(|&x0| self.fit_at(x0, &rob)).collect()
    }

    fn neighbourhood(&self, x0: f64) -> (usize, usize) {
        let n = self.x.len();
        let pos = self.x.partition_point(|&v| v < x0);
        let (mut lo, mut hi) = (pos, pos); // half-open [lo, hi)
        while hi - lo < self.span {
            let take_left = match (lo > 0, hi < n) {
                (true, true) => x0 - self.x[lo - 1] <= self.x[hi] - x0,
                (true, false) => true,
                (false, true) => false,
                (false, false) => break,
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        (lo, hi)
    }

    fn fit_at(&self, x0: f64, rob: &[f64]) -> f64 {
        let (lo, hi) = self.neighbourhood(x0);
        let xs = &self.x[lo..hi];
        let radius = xs
            .iter()
            .map(|&v| (v - x0).abs())
            .fold(0.0, f64::max);
        let t: Vec<f64> = xs.iter().map(|&v| v - x0).collect();
        let kernel: Vec<f64> = t
            .iter()
            .map(|&d| {
                if radius > 0.0 {
                    tricube(d.abs() / radius).unwrap_or(0.0)
                } else {
                    1.0
                }
            })
            .collect();
        let weights: Vec<f64> = kernel.iter().zip(&rob[lo..hi]).map(|(k, r)| k * r).collect();
        let ys = &self.y[lo..hi];
        for w in [&weights, &kernel] {
            for degree in (0..=self.degree).rev() {
                if let Ok(c) = weighted_polyfit(&t, ys, w, degree) {
                    return c[0];
                }
            }
        }
        crate::stats::mean(ys)
    }
}
