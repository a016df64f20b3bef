//! Arena boundary and centre estimation from behavioural locations.
//!
//! The boundary is a smoothed high quantile of radial distance as a function
//! of angle: per-sector empirical quantiles, smoothed by a local-linear
//! LOWESS over a series padded periodically at `0` and `2π`. The centre
//! comes from an OLS fit of `R(θ) = R0 + β1 cos θ + β2 sin θ` to the curve,
//! a first-order expansion of the law of cosines valid for small offsets.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::local_fit::ScatterLowess;
use crate::stats::quantile_sorted;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// A location in polar coordinates about some working origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSample {
    pub r: f64,
    pub theta: f64,
}

impl PolarSample {
    pub fn from_xy(x: f64, y: f64, origin: (f64, f64)) -> Self {
        let (dx, dy) = (x - origin.0, y - origin.1);
        Self {
            r: dx.hypot(dy),
            theta: wrap_angle(dy.atan2(dx)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryParams {
    /// Number of sector centres on the circle.
    pub sectors: usize,
    /// Angular width of each sector (radians); wider than the centre spacing
    /// means overlapping sectors.
    pub sector_width: f64,
    pub quantile: f64,
    /// LOWESS span as a fraction of the nonempty sectors.
    pub bandwidth: f64,
    /// Sectors with fewer samples are treated as empty.
    pub min_count: usize,
    pub robustness_iters: usize,
    /// Fraction of the circle duplicated on each side before smoothing.
    pub wrap_fraction: f64,
    /// Runs of empty sectors longer than this (radians) are reported as
    /// uncovered rather than silently filled.
    pub max_fill_gap: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            sectors: 720,
            sector_width: TAU / 360.0,
            quantile: 0.95,
            bandwidth: 0.15,
            min_count: 10,
            robustness_iters: 2,
            wrap_fraction: 0.25,
            max_fill_gap: 5f64.to_radians(),
        }
    }
}

/// Per-sector radius quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorQuantiles {
    pub alphas: Vec<f64>,
    /// `None` for sectors with fewer than the minimum sample count.
    pub r_p: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub delta: f64,
    pub p: f64,
}

impl SectorQuantiles {
    pub fn sectors(&self) -> usize {
        self.alphas.len()
    }

    pub fn nonempty(&self) -> usize {
        self.r_p.iter().filter(|r| r.is_some()).count()
    }
}

/// `p`-quantile of radius within each of `sectors` equally spaced sectors of
/// width `delta`. Sector `s` is centred at `2π s / sectors`.
pub fn sector_quantiles(samples: &[PolarSample], sectors: usize, delta: f64, p: f64, min_count: usize) -> Result<SectorQuantiles> {
    if samples.is_empty() {
        return Err(Error::Insufficient("no samples for sector quantiles".into()));
    }
    if sectors < 8 {
        return Err(Error::Domain(format!("need at least 8 sectors, got {sectors}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("quantile level must be in (0, 1], got {p}")));
    }
    if !(delta > 0.0 && delta <= TAU) {
        return Err(Error::Domain(format!("sector width must be in (0, 2π], got {delta}")));
    }
    let mut polar: Vec<(f64, f64)> = samples.iter().map(|s| (wrap_angle(s.theta), s.r)).collect();
    polar.sort_by(|a, b| a.0.total_cmp(&b.0));
    let thetas: Vec<f64> = polar.iter().map(|p| p.0).collect();
    // Closed angular interval [a, b] within [0, 2π).
    let range = |a: f64, b: f64| thetas.partition_point(|&t| t < a)..thetas.partition_point(|&t| t <= b);

    let step = TAU / sectors as f64;
    let half = delta / 2.0;
    let min_count = min_count.max(1);
    let mut alphas = Vec::with_capacity(sectors);
    let mut r_p = Vec::with_capacity(sectors);
    let mut counts = Vec::with_capacity(sectors);
    let mut radii = Vec::new();
    for s in 0..sectors {
        let alpha = s as f64 * step;
        let (lo, hi) = (alpha - half, alpha + half);
        radii.clear();
        let ranges = if delta >= TAU {
            vec![0..thetas.len()]
        } else if lo < 0.0 {
            vec![range(lo + TAU, TAU), range(0.0, hi)]
        } else if hi >= TAU {
            vec![range(lo, TAU), range(0.0, hi - TAU)]
        } else {
            vec![range(lo, hi)]
        };
        for r in ranges {
            radii.extend(polar[r].iter().map(|p| p.1));
        }
        radii.sort_unstable_by(f64::total_cmp);
        alphas.push(alpha);
        counts.push(radii.len());
        r_p.push(if radii.len() >= min_count {
            quantile_sorted(&radii, p)
        } else {
            None
        });
    }
    if r_p.iter().all(Option::is_none) {
        return Err(Error::Insufficient(format!(
            "every sector has fewer than {min_count} samples"
        )));
    }
    Ok(SectorQuantiles {
        alphas,
        r_p,
        counts,
        delta,
        p,
    })
}

/// Radius as a function of angle, sampled on the sector grid and linearly
/// interpolated (periodically) between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub alphas: Vec<f64>,
    pub radii: Vec<f64>,
    /// False on grid points inside an uncovered arc.
    pub covered: Vec<bool>,
    /// Maximal uncovered arcs as `(first, last)` grid angles.
    pub uncovered_arcs: Vec<(f64, f64)>,
}

impl BoundaryCurve {
    /// Curve sampled from `radius(α)` on `sectors` grid points, fully covered.
    pub fn from_fn(sectors: usize, radius: impl Fn(f64) -> f64) -> Self {
        let alphas: Vec<f64> = (0..sectors).map(|s| s as f64 * TAU / sectors as f64).collect();
        Self {
            radii: alphas.iter().map(|&a| radius(a)).collect(),
            covered: vec![true; sectors],
            uncovered_arcs: Vec::new(),
            alphas,
        }
    }

    fn step(&self) -> f64 {
        TAU / self.alphas.len() as f64
    }

    fn bracket(&self, theta: f64) -> (usize, usize, f64) {
        let n = self.alphas.len();
        let pos = wrap_angle(theta) / self.step();
        let i0 = (pos.floor() as usize).min(n - 1);
        let frac = pos - i0 as f64;
        (i0, (i0 + 1) % n, frac)
    }

    pub fn radius_at(&self, theta: f64) -> f64 {
        let (i0, i1, f) = self.bracket(theta);
        self.radii[i0] + f * (self.radii[i1] - self.radii[i0])
    }

    pub fn is_covered(&self, theta: f64) -> bool {
        let (i0, i1, _) = self.bracket(theta);
        self.covered[i0] && self.covered[i1]
    }

    fn arc_containing(&self, theta: f64) -> (f64, f64) {
        let (i0, i1, _) = self.bracket(theta);
        let idx = if self.covered[i0] { i1 } else { i0 };
        let a = self.alphas[idx];
        self.uncovered_arcs
            .iter()
            .copied()
            .find(|&(s, e)| if s <= e { a >= s && a <= e } else { a >= s || a <= e })
            .unwrap_or((a, a))
    }
}

/// Local-linear LOWESS of the sector quantiles against angle, padded
/// periodically so the curve joins smoothly at `0 = 2π`.
pub fn smooth_boundary(sq: &SectorQuantiles, params: &BoundaryParams) -> Result<BoundaryCurve> {
    let points: Vec<(f64, f64)> = sq
        .alphas
        .iter()
        .zip(&sq.r_p)
        .filter_map(|(&a, r)| r.map(|r| (a, r)))
        .collect();
    let n = points.len();
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "boundary smoothing needs at least 2 nonempty sectors, got {n}"
        )));
    }
    if !(params.bandwidth > 0.0 && params.bandwidth <= 1.0) {
        return Err(Error::Domain(format!("bandwidth must be in (0, 1], got {}", params.bandwidth)));
    }
    let wrap = params.wrap_fraction.max(params.bandwidth) * TAU;
    let head = points.iter().filter(|p| p.0 < wrap).map(|&(a, r)| (a + TAU, r));
    let tail = points.iter().filter(|p| p.0 >= TAU - wrap).map(|&(a, r)| (a - TAU, r));
    let expanded: Vec<(f64, f64)> = tail.chain(points.iter().copied()).chain(head).collect();
    let x: Vec<f64> = expanded.iter().map(|p| p.0).collect();
    let y: Vec<f64> = expanded.iter().map(|p| p.1).collect();

    let span = ((params.bandwidth * n as f64).ceil() as usize).max(2);
    let lowess = ScatterLowess::new(&x, &y, span, 1)?;
    let mut radii = lowess.evaluate(&sq.alphas, params.robustness_iters);

    // Long runs of empty sectors are uncovered: interpolate across them
    // periodically instead of extrapolating the local lines.
    let sectors = sq.alphas.len();
    let step = TAU / sectors as f64;
    let empty: Vec<bool> = sq.r_p.iter().map(Option::is_none).collect();
    let mut covered = vec![true; sectors];
    let mut uncovered_arcs = Vec::new();
    for (start, len) in circular_runs(&empty) {
        if len as f64 * step <= params.max_fill_gap {
            continue;
        }
        let before = (start + sectors - 1) % sectors;
        let after = (start + len) % sectors;
        let (r0, r1) = (radii[before], radii[after]);
        for k in 0..len {
            let idx = (start + k) % sectors;
            covered[idx] = false;
            let f = (k + 1) as f64 / (len + 1) as f64;
            radii[idx] = r0 + f * (r1 - r0);
        }
        uncovered_arcs.push((sq.alphas[start], sq.alphas[(start + len - 1) % sectors]));
    }

    Ok(BoundaryCurve {
        alphas: sq.alphas.clone(),
        radii,
        covered,
        uncovered_arcs,
    })
}

/// Maximal runs of `true` on a circular sequence as `(start, len)`; a run
/// crossing the end wraps to the beginning. Never reports the whole circle.
fn circular_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let n = flags.len();
    let Some(anchor) = flags.iter().position(|&f| !f) else {
        return Vec::new();
    };
    let mut runs = Vec::new();
    let mut k = 1;
    while k <= n {
        let idx = (anchor + k) % n;
        if flags[idx] {
            let start = idx;
            let mut len = 0;
            while flags[(start + len) % n] {
                len += 1;
            }
            runs.push((start, len));
            k += len;
        } else {
            k += 1;
        }
    }
    runs
}

/// Offset of the arena centre from the working origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterEstimate {
    /// Mean radius (cm).
    pub r0_mean: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Offset magnitude (cm).
    pub offset: f64,
    /// Offset direction (radians); 0 when the offset is 0.
    pub phi0: f64,
    pub x0: f64,
    pub y0: f64,
}

/// Largest condition number of the normal matrix accepted by
/// [`estimate_center`].
pub const MAX_CENTER_CONDITION: f64 = 1e8;

/// OLS fit of `R = R0 + β1 cos θ + β2 sin θ` to boundary samples.
pub fn estimate_center(samples: &[PolarSample]) -> Result<CenterEstimate> {
    if samples.len() < 3 {
        return Err(Error::IllConditioned(format!(
            "centre fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let mut thetas: Vec<f64> = samples.iter().map(|s| wrap_angle(s.theta)).collect();
    thetas.sort_by(f64::total_cmp);
    let max_gap = thetas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(thetas[0] + TAU - thetas[thetas.len() - 1], f64::max);
    if max_gap >= PI {
        return Err(Error::IllConditioned(format!(
            "samples leave an angular gap of {max_gap:.3} rad (need < π)"
        )));
    }

    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for s in samples {
        let basis = Vector3::new(1.0, s.theta.cos(), s.theta.sin());
        normal += basis * basis.transpose();
        rhs += basis * s.r;
    }
    let eig = normal.symmetric_eigenvalues();
    let (lmin, lmax) = (eig.min(), eig.max());
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition > MAX_CENTER_CONDITION {
        return Err(Error::IllConditioned(format!(
            "normal matrix condition number {condition:.3e} exceeds {MAX_CENTER_CONDITION:.0e}"
        )));
    }
    let beta = normal
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("normal matrix not positive definite".into()))?
        .solve(&rhs);
    let (beta1, beta2) = (beta[1], beta[2]);
    let offset = beta1.hypot(beta2);
    let phi0 = if offset > 0.0 { beta2.atan2(beta1) } else { 0.0 };
    Ok(CenterEstimate {
        r0_mean: beta[0],
        beta1,
        beta2,
        offset,
        phi0,
        x0: offset * phi0.cos(),
        y0: offset * phi0.sin(),
    })
}

/// Estimated arena wall and centre.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEstimate {
    /// Radius about `center` as a function of angle.
    pub curve: BoundaryCurve,
    /// Centre in the input coordinates (cm).
    pub center: (f64, f64),
    pub warnings: Vec<String>,
}

impl BoundaryEstimate {
    pub fn radius_at(&self, theta: f64) -> f64 {
        self.curve.radius_at(theta)
    }
}

fn boundary_pass(points: &[(f64, f64)], origin: (f64, f64), params: &BoundaryParams) -> Result<BoundaryCurve> {
    let polar: Vec<PolarSample> = points.iter().map(|&(x, y)| PolarSample::from_xy(x, y, origin)).collect();
    let sq = sector_quantiles(&polar, params.sectors, params.sector_width, params.quantile, params.min_count)?;
    smooth_boundary(&sq, params)
}

/// Two-pass boundary estimate from progression locations.
///
/// The first pass works about `origin`, fits the centre to the covered part of
/// the curve, and the second pass re-estimates the curve about that centre.
pub fn estimate_boundary(points: &[(f64, f64)], origin: (f64, f64), params: &BoundaryParams) -> Result<BoundaryEstimate> {
    let first = boundary_pass(points, origin, params).map_err(|e| e.in_stage("boundary pass 1"))?;
    let samples: Vec<PolarSample> = first
        .alphas
        .iter()
        .zip(&first.radii)
        .zip(&first.covered)
        .filter(|(_, &c)| c)
        .map(|((&theta, &r), _)| PolarSample { r, theta })
        .collect();
    let c = estimate_center(&samples).map_err(|e| e.in_stage("centre"))?;
    let center = (origin.0 + c.x0, origin.1 + c.y0);
    let curve = boundary_pass(points, center, params).map_err(|e| e.in_stage("boundary pass 2"))?;
    let warnings = curve
        .uncovered_arcs
        .iter()
        .map(|(a, b)| format!("coverage warning: no behavioural data near the wall for angles {a:.4}..{b:.4} rad"))
        .collect();
    Ok(BoundaryEstimate {
        curve,
        center,
        warnings,
    })
}

/// Radial distance from `location` to the estimated wall; negative outside.
pub fn distance_from_wall(location: (f64, f64), boundary: &BoundaryEstimate) -> Result<f64> {
    let p = PolarSample::from_xy(location.0, location.1, boundary.center);
    if !boundary.curve.is_covered(p.theta) {
        let (gap_start, gap_end) = boundary.curve.arc_containing(p.theta);
        return Err(Error::Uncovered {
            angle: p.theta,
            gap_start,
            gap_end,
        });
    }
    Ok(boundary.radius_at(p.theta) - p.r)
}
