//! Synthetic tracking sessions with known ground truth, and the Monte Carlo
//! protocol that scores raw data, LOWESS, RRM and the combined smoother
//! against it.
//!
//! A session chains randomly chosen half-sine speed bumps with exponential
//! arrests; each bout moves along its own random heading. Observations add
//! Gaussian noise, displace a fixed fraction of moving frames by 5, 10 or
//! 15 cm, and round to the tracking grid.

use std::f64::consts::{PI, TAU};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::kinematics::{path_length, RawPath};
use crate::pipeline::{smooth_session, SmootherParams};
use crate::rrm::min_arrest_frames;
use crate::stats::{mean, sample_sd};

/// Simulated sessions must be longer than this many frames.
pub const MIN_SESSION_FRAMES: usize = 30_000;

/// Speed over one progression bout, starting and ending at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    /// cm/s per frame.
    pub speeds: Vec<f64>,
}

impl VelocityProfile {
    /// `peak * sin(π i / (n - 1))` over `n = round(duration_s * fps)` frames
    /// (at least 3).
    pub fn half_sine(peak: f64, duration_s: f64, fps: f64) -> Self {
        let n = ((duration_s * fps).round() as usize).max(3);
        let mut speeds: Vec<f64> = (0..n).map(|i| peak * (PI * i as f64 / (n - 1) as f64).sin()).collect();
        speeds[n - 1] = 0.0;
        Self { speeds }
    }

    pub fn zeros(frames: usize) -> Self {
        Self {
            speeds: vec![0.0; frames.max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    /// Distance covered in centimetres when each frame advances `speed / fps`.
    pub fn distance_cm(&self, fps: f64) -> f64 {
        self.speeds.iter().sum::<f64>() / fps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub pool_size: usize,
    /// Range of peak speeds (cm/s).
    pub peak_cm_s: (f64, f64),
    /// Range of bout durations (s).
    pub duration_s: (f64, f64),
    pub fps: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            pool_size: 100,
            peak_cm_s: (5.0, 40.0),
            duration_s: (0.5, 5.0),
            fps: 25.0,
        }
    }
}

impl ProfileConfig {
    /// Faster bouts, peaks in [40, 240] cm/s: about 720 m per 31,500-frame
    /// session at p̄ = 0.36. Slow bout tails then rarely look like arrests
    /// on the 1 cm grid.
    pub fn fast() -> Self {
        Self {
            peak_cm_s: (40.0, 240.0),
            ..Self::default()
        }
    }
}

pub fn generate_profile_pool(config: &ProfileConfig, rng: &mut impl Rng) -> Vec<VelocityProfile> {
    (0..config.pool_size)
        .map(|_| {
            let peak = rng.random_range(config.peak_cm_s.0..=config.peak_cm_s.1);
            let duration = rng.random_range(config.duration_s.0..=config.duration_s.1);
            VelocityProfile::half_sine(peak, duration, config.fps)
        })
        .collect()
}

/// True locations and arrests of a simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub speed: Vec<f64>,
    /// Zero-speed runs lasting at least the minimum arrest duration.
    pub arrest: Vec<bool>,
    pub fps: f64,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn distance_m(&self) -> f64 {
        path_length(&self.x, &self.y) / 100.0
    }

    pub fn proportion_arrest(&self) -> f64 {
        self.arrest.iter().filter(|&&a| a).count() as f64 / self.len() as f64
    }

    fn from_speeds(speed: Vec<f64>, heading: Vec<f64>, fps: f64, min_arrest_s: f64) -> Self {
        let n = speed.len();
        let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
        for i in 1..n {
            let step = speed[i] / fps;
            x[i] = x[i - 1] + step * heading[i].cos();
            y[i] = y[i - 1] + step * heading[i].sin();
        }
        let min_frames = min_arrest_frames(min_arrest_s, fps);
        let zero: Vec<bool> = speed.iter().map(|&s| s == 0.0).collect();
        let mut arrest = vec![false; n];
        for (s, e) in crate::rrm::runs_of(&zero, true) {
            if e - s + 1 >= min_frames {
                arrest[s..=e].iter_mut().for_each(|a| *a = true);
            }
        }
        Self {
            x,
            y,
            speed,
            arrest,
            fps,
        }
    }
}

/// A motionless animal at the origin.
pub fn stationary_truth(frames: usize, fps: f64) -> GroundTruth {
    GroundTruth::from_speeds(vec![0.0; frames], vec![0.0; frames], fps, 0.2)
}

/// Expected raw step (cm) between consecutive frames of a motionless animal
/// sitting on a grid point, with per-axis `N(0, σ²)` noise and rounding.
pub fn expected_stationary_step_cm(sigma: f64, grid_cm: f64) -> Result<f64> {
    if !(sigma >= 0.0 && grid_cm > 0.0) {
        return Err(Error::Domain(format!("need sigma >= 0 and grid > 0, got {sigma}, {grid_cm}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let z = StdNormal::standard();
    let k_max = (10.0 * sigma / grid_cm).ceil() as i64 + 1;
    let cell: Vec<f64> = (-k_max..=k_max)
        .map(|k| z.cdf((k as f64 + 0.5) * grid_cm / sigma) - z.cdf((k as f64 - 0.5) * grid_cm / sigma))
        .collect();
    // Law of the difference of two independent rounded draws.
    let m = cell.len();
    let mut diff = vec![0.0; 2 * m - 1];
    for (i, a) in cell.iter().enumerate() {
        for (j, b) in cell.iter().enumerate() {
            diff[i + m - 1 - j] += a * b;
        }
    }
    let centre = (m - 1) as f64;
    let mut step = 0.0;
    for (i, pi) in diff.iter().enumerate() {
        for (j, pj) in diff.iter().enumerate() {
            step += pi * pj * (i as f64 - centre).hypot(j as f64 - centre);
        }
    }
    Ok(step * grid_cm)
}

/// Noise SD at which a motionless session of `frames` frames has expected raw
/// distance `target_m`.
pub fn calibrate_stationary_sigma(target_m: f64, frames: usize, grid_cm: f64) -> Result<f64> {
    if !(target_m > 0.0) || frames < 2 {
        return Err(Error::Domain(format!("cannot calibrate to {target_m} m over {frames} frames")));
    }
    let per_step = target_m * 100.0 / (frames - 1) as f64;
    let (mut lo, mut hi) = (0.0, grid_cm);
    while expected_stationary_step_cm(hi, grid_cm)? < per_step {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain(format!("raw distance {target_m} m is unreachable")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected_stationary_step_cm(mid, grid_cm)? < per_step {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expected arrest proportion when arrests between bouts last
/// `round(Exp(mean))` frames.
///
/// Each arrest run also absorbs the two zero-speed endpoints of the adjacent
/// bouts, and runs shorter than `min_frames` do not count.
fn expected_proportion(mean_arrest: f64, mean_profile: f64, min_frames: usize) -> f64 {
    if mean_arrest <= 0.0 {
        return if min_frames <= 2 { 2.0 / mean_profile } else { 0.0 };
    }
    let cdf_gap = |a: f64| (-(a.max(0.0)) / mean_arrest).exp(); // P(X >= a)
    let mut counted = 0.0;
    let mut a = 0usize;
    loop {
        let lo = if a == 0 { 0.0 } else { a as f64 - 0.5 };
        let prob = cdf_gap(lo) - cdf_gap(a as f64 + 0.5);
        if a + 2 >= min_frames {
            counted += prob * (a + 2) as f64;
        }
        if cdf_gap(a as f64 + 0.5) < 1e-14 {
            break;
        }
        a += 1;
    }
    // E[round(X)] = 1 / (2 sinh(1 / (2 mean)))
    let expected_arrest = 0.5 / (0.5 / mean_arrest).sinh();
    counted / (mean_profile + expected_arrest)
}

/// Mean of the exponential arrest-length law that makes the expected arrest
/// proportion equal `target_p`, found by bisection.
pub fn arrest_mean_for_target(pool: &[VelocityProfile], target_p: f64, fps: f64, min_arrest_s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target_p) {
        return Err(Error::Domain(format!("target arrest proportion must be in [0, 1), got {target_p}")));
    }
    let mean_profile = mean(&pool.iter().map(|p| p.len() as f64).collect::<Vec<_>>());
    let min_frames = min_arrest_frames(min_arrest_s, fps);
    if target_p <= expected_proportion(0.0, mean_profile, min_frames) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (1e-3, 1.0);
    while expected_proportion(hi, mean_profile, min_frames) < target_p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain(format!("target arrest proportion {target_p} is unreachable")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_proportion(mid, mean_profile, min_frames) < target_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Chains random profiles and exponential arrests into `frames` frames of
/// ground truth starting at the origin.
pub fn synthesize_path(pool: &[VelocityProfile], target_p: f64, frames: usize, fps: f64, rng: &mut impl Rng) -> Result<GroundTruth> {
    if frames <= MIN_SESSION_FRAMES {
        return Err(Error::Domain(format!(
            "simulated sessions need more than {MIN_SESSION_FRAMES} frames, got {frames}"
        )));
    }
    if pool.is_empty() {
        return Err(Error::Domain("empty velocity-profile pool".into()));
    }
    let min_arrest_s = 0.2;
    let all_zero = pool.iter().all(|p| p.speeds.iter().all(|&s| s == 0.0));
    let arrest_mean = if all_zero {
        0.0
    } else {
        arrest_mean_for_target(pool, target_p, fps, min_arrest_s)?
    };
    let arrest_law = if arrest_mean > 0.0 {
        Some(Exp::new(1.0 / arrest_mean).map_err(|e| Error::Domain(e.to_string()))?)
    } else {
        None
    };

    let mut speed = Vec::with_capacity(frames + 512);
    let mut heading = Vec::with_capacity(frames + 512);
    while speed.len() < frames {
        let profile = &pool[rng.random_range(0..pool.len())];
        let h = rng.random_range(0.0..TAU);
        speed.extend_from_slice(&profile.speeds);
        heading.extend(std::iter::repeat_n(h, profile.len()));
        let rest = arrest_law.map_or(0, |law| law.sample(rng).round() as usize);
        speed.extend(std::iter::repeat_n(0.0, rest));
        heading.extend(std::iter::repeat_n(h, rest));
    }
    speed.truncate(frames);
    heading.truncate(frames);
    Ok(GroundTruth::from_speeds(speed, heading, fps, min_arrest_s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionParams {
    /// Per-axis Gaussian noise SD (cm).
    pub sigma: f64,
    /// Fraction of non-arrest frames displaced as outliers.
    pub outlier_rate: f64,
    /// Displacement magnitudes, chosen with equal probability (cm).
    pub shifts_cm: Vec<f64>,
    /// Rounding grid (cm); `None` keeps the continuous values.
    pub grid_cm: Option<f64>,
}

impl Default for CorruptionParams {
    fn default() -> Self {
        Self {
            sigma: 0.6,
            outlier_rate: 0.04,
            shifts_cm: vec![5.0, 10.0, 15.0],
            grid_cm: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Frames displaced as outliers, ascending.
    pub outliers: Vec<usize>,
}

/// Adds noise and outliers to `truth`, then rounds to the grid.
pub fn corrupt(truth: &GroundTruth, params: &CorruptionParams, rng: &mut impl Rng) -> Result<Corrupted> {
    if !(params.sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {}", params.sigma)));
    }
    if !(0.0..=1.0).contains(&params.outlier_rate) {
        return Err(Error::Domain(format!("outlier rate must be in [0, 1], got {}", params.outlier_rate)));
    }
    if params.outlier_rate > 0.0 && params.shifts_cm.is_empty() {
        return Err(Error::Domain("outliers requested without shift magnitudes".into()));
    }
    let noise = Normal::new(0.0, params.sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut x = truth.x.clone();
    let mut y = truth.y.clone();
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        *xi += noise.sample(rng);
        *yi += noise.sample(rng);
    }

    let moving: Vec<usize> = (0..truth.len()).filter(|&i| !truth.arrest[i]).collect();
    let count = (params.outlier_rate * moving.len() as f64).round() as usize;
    let mut outliers: Vec<usize> = index::sample(rng, moving.len(), count).into_iter().map(|k| moving[k]).collect();
    outliers.sort_unstable();
    for &i in &outliers {
        let magnitude = params.shifts_cm[rng.random_range(0..params.shifts_cm.len())];
        let direction = rng.random_range(0.0..TAU);
        x[i] += magnitude * direction.cos();
        y[i] += magnitude * direction.sin();
    }

    if let Some(g) = params.grid_cm {
        for v in x.iter_mut().chain(y.iter_mut()) {
            *v = (*v / g).round() * g;
        }
    }
    Ok(Corrupted { x, y, outliers })
}

/// One simulation configuration (a column of the results tables).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub sigma: f64,
    /// Target arrest proportion; `None` simulates a motionless animal.
    pub target_p: Option<f64>,
    pub frames: usize,
    pub fps: f64,
    pub outlier_rate: f64,
    pub replications: usize,
    pub profiles: ProfileConfig,
}

impl Scenario {
    pub fn moving(sigma: f64, target_p: f64) -> Self {
        Self {
            label: format!("sigma={sigma} p={target_p}"),
            sigma,
            target_p: Some(target_p),
            frames: 31_500,
            fps: 25.0,
            outlier_rate: 0.04,
            replications: 50,
            profiles: ProfileConfig::fast(),
        }
    }

    /// Motionless animal, 15 minutes at 25 fps, no outliers.
    pub fn anesthetized(sigma: f64) -> Self {
        Self {
            label: format!("anesthetized sigma={sigma}"),
            sigma,
            target_p: None,
            frames: 15 * 60 * 25,
            fps: 25.0,
            outlier_rate: 0.0,
            replications: 100,
            profiles: ProfileConfig::default(),
        }
    }

    pub fn corruption(&self) -> CorruptionParams {
        CorruptionParams {
            sigma: self.sigma,
            outlier_rate: self.outlier_rate,
            ..CorruptionParams::default()
        }
    }
}

/// The five (σ, p̄) configurations of the distance/arrest-proportion study.
pub fn standard_scenarios() -> Vec<Scenario> {
    [(0.6, 0.36), (0.6, 0.74), (0.6, 0.64), (1.0, 0.36), (0.4, 0.34)]
        .into_iter()
        .map(|(s, p)| Scenario::moving(s, p))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub truth: GroundTruth,
    pub observed: RawPath,
    pub outliers: Vec<usize>,
    pub sigma: f64,
    pub outlier_rate: f64,
    pub seed: u64,
    pub replication: usize,
}

/// Generates replication `replication` of `scenario` from its own ChaCha
/// stream, so replications are independent of each other and of scheduling.
pub fn simulate(scenario: &Scenario, seed: u64, replication: usize) -> Result<SimulatedPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    let truth = match scenario.target_p {
        Some(p) => {
            let profiles = ProfileConfig {
                fps: scenario.fps,
                ..scenario.profiles.clone()
            };
            let pool = generate_profile_pool(&profiles, &mut rng);
            synthesize_path(&pool, p, scenario.frames, scenario.fps, &mut rng)?
        }
        None => stationary_truth(scenario.frames, scenario.fps),
    };
    let corrupted = corrupt(&truth, &scenario.corruption(), &mut rng)?;
    let mut observed = RawPath::from_xy(corrupted.x, corrupted.y, scenario.fps)?;
    observed.grid_cm = scenario.corruption().grid_cm.unwrap_or(1.0);
    Ok(SimulatedPath {
        truth,
        observed,
        outliers: corrupted.outliers,
        sigma: scenario.sigma,
        outlier_rate: scenario.outlier_rate,
        seed,
        replication,
    })
}

/// Every replication of `scenario`, generated in parallel, in index order.
pub fn simulate_all(scenario: &Scenario, seed: u64) -> Result<Vec<SimulatedPath>> {
    (0..scenario.replications)
        .into_par_iter()
        .map(|r| simulate(scenario, seed, r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Raw,
    Lowess,
    Rrm,
    Combined,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Raw, Method::Lowess, Method::Rrm, Method::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Raw => "raw",
            Method::Lowess => "lowess",
            Method::Rrm => "rrm",
            Method::Combined => "combined",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Estimated distance (m) and arrest proportion of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodEstimate {
    pub distance_m: f64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub true_distance_m: f64,
    pub true_proportion: f64,
    /// Indexed in [`Method::ALL`] order.
    pub estimates: [MethodEstimate; 4],
    pub outliers_injected: usize,
    pub outliers_flagged: usize,
    pub clean_frames: usize,
    pub clean_flagged: usize,
}

impl ReplicationResult {
    pub fn estimate(&self, method: Method) -> MethodEstimate {
        self.estimates[method.index()]
    }
}

/// Fraction of frame-to-frame transitions with no change in either axis.
fn constancy_fraction(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let same = x
        .windows(2)
        .zip(y.windows(2))
        .filter(|(a, b)| a[0] == a[1] && b[0] == b[1])
        .count();
    same as f64 / (x.len() - 1) as f64
}

/// Scores every method on one simulated session.
pub fn score_path(path: &SimulatedPath, params: &SmootherParams) -> Result<ReplicationResult> {
    let obs = &path.observed;
    let session = smooth_session(obs, params)?;
    let n = obs.len() as f64;
    let lowess_zero = session
        .lowess
        .vx
        .iter()
        .zip(&session.lowess.vy)
        .filter(|(a, b)| **a == 0.0 && **b == 0.0)
        .count();
    let combined_zero = session.combined.speed.iter().filter(|&&s| s == 0.0).count();
    let estimates = [
        MethodEstimate {
            distance_m: path_length(&obs.x, &obs.y) / 100.0,
            proportion: constancy_fraction(&obs.x, &obs.y),
        },
        MethodEstimate {
            distance_m: session.lowess.path_length_cm() / 100.0,
            proportion: lowess_zero as f64 / n,
        },
        MethodEstimate {
            distance_m: path_length(&session.rrm_x, &session.rrm_y) / 100.0,
            proportion: constancy_fraction(&session.rrm_x, &session.rrm_y),
        },
        MethodEstimate {
            distance_m: session.combined.path_length_cm() / 100.0,
            proportion: combined_zero as f64 / n,
        },
    ];

    let mut injected = vec![false; obs.len()];
    path.outliers.iter().for_each(|&i| injected[i] = true);
    let flagged = |i: usize| session.lowess.is_outlier(i);
    let outliers_flagged = path.outliers.iter().filter(|&&i| flagged(i)).count();
    let clean_flagged = (0..obs.len()).filter(|&i| !injected[i] && flagged(i)).count();
    Ok(ReplicationResult {
        replication: path.replication,
        true_distance_m: path.truth.distance_m(),
        true_proportion: path.truth.proportion_arrest(),
        estimates,
        outliers_injected: path.outliers.len(),
        outliers_flagged,
        clean_frames: obs.len() - path.outliers.len(),
        clean_flagged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_distance_m: f64,
    pub sd_distance_m: f64,
    /// `Σ (θ_i - θ̂_i)^2 / reps`.
    pub mse_distance: f64,
    pub mean_proportion: f64,
    pub mse_proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationMetrics {
    pub label: String,
    pub replications: Vec<ReplicationResult>,
    pub mean_true_distance_m: f64,
    pub sd_true_distance_m: f64,
    pub mean_true_proportion: f64,
    /// In [`Method::ALL`] order.
    pub summaries: Vec<MethodSummary>,
}

impl SimulationMetrics {
    pub fn summary(&self, method: Method) -> &MethodSummary {
        &self.summaries[method.index()]
    }

    pub fn outlier_recall(&self) -> f64 {
        let injected: usize = self.replications.iter().map(|r| r.outliers_injected).sum();
        let flagged: usize = self.replications.iter().map(|r| r.outliers_flagged).sum();
        if injected == 0 {
            f64::NAN
        } else {
            flagged as f64 / injected as f64
        }
    }

    pub fn false_flag_rate(&self) -> f64 {
        let clean: usize = self.replications.iter().map(|r| r.clean_frames).sum();
        let flagged: usize = self.replications.iter().map(|r| r.clean_flagged).sum();
        flagged as f64 / clean as f64
    }
}

/// Aggregates replication results (ordered by replication index).
pub fn summarize(label: &str, mut replications: Vec<ReplicationResult>) -> Result<SimulationMetrics> {
    if replications.len() < 2 {
        return Err(Error::Insufficient(format!(
            "need at least 2 replications, got {}",
            replications.len()
        )));
    }
    replications.sort_by_key(|r| r.replication);
    let reps = replications.len() as f64;
    let truth_d: Vec<f64> = replications.iter().map(|r| r.true_distance_m).collect();
    let truth_p: Vec<f64> = replications.iter().map(|r| r.true_proportion).collect();
    let summaries = Method::ALL
        .iter()
        .map(|&m| {
            let d: Vec<f64> = replications.iter().map(|r| r.estimate(m).distance_m).collect();
            let p: Vec<f64> = replications.iter().map(|r| r.estimate(m).proportion).collect();
            MethodSummary {
                method: m,
                mean_distance_m: mean(&d),
                sd_distance_m: sample_sd(&d),
                mse_distance: truth_d.iter().zip(&d).map(|(t, e)| (t - e).powi(2)).sum::<f64>() / reps,
                mean_proportion: mean(&p),
                mse_proportion: truth_p.iter().zip(&p).map(|(t, e)| (t - e).powi(2)).sum::<f64>() / reps,
            }
        })
        .collect();
    Ok(SimulationMetrics {
        label: label.to_string(),
        mean_true_distance_m: mean(&truth_d),
        sd_true_distance_m: sample_sd(&truth_d),
        mean_true_proportion: mean(&truth_p),
        replications,
        summaries,
    })
}

/// Scores already generated sessions.
pub fn evaluate(label: &str, paths: &[SimulatedPath], params: &SmootherParams) -> Result<SimulationMetrics> {
    let results = paths.par_iter().map(|p| score_path(p, params)).collect::<Result<Vec<_>>>()?;
    summarize(label, results)
}

/// Generates and scores every replication of `scenario` in parallel.
pub fn run_scenario(scenario: &Scenario, seed: u64, params: &SmootherParams) -> Result<SimulationMetrics> {
    let results = (0..scenario.replications)
        .into_par_iter()
        .map(|r| simulate(scenario, seed, r).and_then(|p| score_path(&p, params)))
        .collect::<Result<Vec<_>>>()?;
    summarize(&scenario.label, results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Trapezoid rule on the speed samples (endpoints are zero, so this is
    /// the plain sum divided by fps).
    fn trapezoid_cm(speeds: &[f64], fps: f64) -> f64 {
        speeds.windows(2).map(|w| 0.5 * (w[0] + w[1]) / fps).sum()
    }

    #[test]
    fn half_sine_shape() {
        let p = VelocityProfile::half_sine(10.0, 1.0, 25.0);
        assert_eq!(p.len(), 25);
        assert_eq!(p.speeds[0], 0.0);
        assert_eq!(p.speeds[24], 0.0);
        let max = p.speeds.iter().copied().fold(0.0, f64::max);
        assert!((max - 10.0).abs() < 1e-12);
        assert!((p.distance_cm(25.0) - trapezoid_cm(&p.speeds, 25.0)).abs() < 1e-9);
    }

    #[test]
    fn pool_invariants() {
        let cfg = ProfileConfig::default();
        let pool = generate_profile_pool(&cfg, &mut rng(1));
        assert_eq!(pool.len(), 100);
        for p in &pool {
            assert!(p.speeds.iter().all(|&s| s >= 0.0));
            assert_eq!((p.speeds[0], *p.speeds.last().unwrap()), (0.0, 0.0));
            let peak = p.speeds.iter().copied().fold(0.0, f64::max);
            assert!((4.0..=40.0 + 1e-9).contains(&peak));
            assert!(p.len() >= 12 && p.len() <= 125);
            assert!((p.distance_cm(25.0) - trapezoid_cm(&p.speeds, 25.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_pool_is_stationary() {
        let pool = vec![VelocityProfile::zeros(20)];
        let t = synthesize_path(&pool, 0.5, 30_001, 25.0, &mut rng(2)).unwrap();
        assert!(t.x.iter().chain(&t.y).all(|&v| v == 0.0));
        assert_eq!(t.proportion_arrest(), 1.0);
        assert_eq!(t.distance_m(), 0.0);
    }

    #[test]
    fn no_arrests_gives_zero_proportion() {
        let pool = vec![VelocityProfile::half_sine(20.0, 2.0, 25.0)];
        let t = synthesize_path(&pool, 0.0, 30_001, 25.0, &mut rng(3)).unwrap();
        assert_eq!(t.proportion_arrest(), 0.0);
        assert!(synthesize_path(&pool, 0.0, 30_000, 25.0, &mut rng(3)).is_err());
    }

    #[test]
    fn truth_distance_matches_speed_integral() {
        let pool = generate_profile_pool(&ProfileConfig::default(), &mut rng(4));
        let t = synthesize_path(&pool, 0.36, 31_000, 25.0, &mut rng(5)).unwrap();
        let integral: f64 = t.speed[1..].iter().sum::<f64>() / 25.0 / 100.0;
        assert!((t.distance_m() - integral).abs() < 1e-6);
        assert_eq!((t.x[0], t.y[0]), (0.0, 0.0));
    }

    #[test]
    fn corruption_without_noise_rounds_truth() {
        let pool = generate_profile_pool(&ProfileConfig::default(), &mut rng(6));
        let t = synthesize_path(&pool, 0.36, 31_000, 25.0, &mut rng(7)).unwrap();
        let params = CorruptionParams {
            sigma: 0.0,
            outlier_rate: 0.0,
            ..CorruptionParams::default()
        };
        let c = corrupt(&t, &params, &mut rng(8)).unwrap();
        assert!(c.outliers.is_empty());
        assert!(c.x.iter().zip(&t.x).all(|(o, v)| *o == v.round()));
    }

    #[test]
    fn outlier_count_contract() {
        let t = GroundTruth::from_speeds(vec![1.0; 30_000], vec![0.0; 30_000], 25.0, 0.2);
        let c = corrupt(&t, &CorruptionParams::default(), &mut rng(9)).unwrap();
        assert_eq!(c.outliers.len(), 1_200);
        assert!(c.outliers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn noise_sd_is_calibrated() {
        let t = stationary_truth(40_000, 25.0);
        let params = CorruptionParams {
            sigma: 0.6,
            outlier_rate: 0.0,
            grid_cm: None,
            ..CorruptionParams::default()
        };
        let c = corrupt(&t, &params, &mut rng(10)).unwrap();
        let sd = sample_sd(&c.x);
        // SE of a sample SD is about σ / sqrt(2 (n - 1)).
        let se = 0.6 / (2.0 * 39_999.0f64).sqrt();
        assert!((sd - 0.6).abs() < 3.0 * se, "sd {sd}");

        let rounded = corrupt(&t, &CorruptionParams { grid_cm: Some(1.0), ..params }, &mut rng(10)).unwrap();
        assert!(rounded.x.iter().all(|v| v.fract() == 0.0 && v.abs() <= 4.0));
    }

    #[test]
    fn stationary_step_matches_simulation() {
        let sigma = 0.6;
        let expected = expected_stationary_step_cm(sigma, 1.0).unwrap();
        let t = stationary_truth(200_000, 25.0);
        let params = CorruptionParams {
            sigma,
            outlier_rate: 0.0,
            ..CorruptionParams::default()
        };
        let c = corrupt(&t, &params, &mut rng(11)).unwrap();
        let steps: Vec<f64> = (1..c.x.len()).map(|i| (c.x[i] - c.x[i - 1]).hypot(c.y[i] - c.y[i - 1])).collect();
        let se = sample_sd(&steps) / (steps.len() as f64).sqrt();
        // Consecutive steps share a frame, so allow a wider band than iid.
        assert!((mean(&steps) - expected).abs() < 6.0 * se, "{} vs {expected}", mean(&steps));

        let s = calibrate_stationary_sigma(254.0, 22_500, 1.0).unwrap();
        assert!((s - 0.6).abs() < 1e-3, "{s}");
        assert_eq!(expected_stationary_step_cm(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn replications_are_reproducible() {
        let mut s = Scenario::moving(0.6, 0.36);
        s.replications = 2;
        let a = simulate(&s, 42, 1).unwrap();
        let b = simulate(&s, 42, 1).unwrap();
        assert_eq!(a, b);
        let c = simulate(&s, 42, 0).unwrap();
        assert_ne!(a.observed.x, c.observed.x);
        assert!(a.observed.len() > MIN_SESSION_FRAMES);
        assert!(a.observed.x.iter().all(|v| v.fract() == 0.0));
    }

    #[test]
    fn summarize_needs_two_replications() {
        let mut s = Scenario::anesthetized(0.6);
        s.frames = 2_000;
        let p = simulate(&s, 1, 0).unwrap();
        let r = score_path(&p, &SmootherParams::default()).unwrap();
        assert!(summarize("x", vec![r.clone()]).is_err());
        let m = summarize("x", vec![r.clone(), ReplicationResult { replication: 1, ..r }]).unwrap();
        assert_eq!(m.summary(Method::Raw).mse_distance, (r.true_distance_m - r.estimate(Method::Raw).distance_m).powi(2));
        assert!(m.summaries.iter().all(|s| s.mse_distance >= 0.0 && s.mse_proportion >= 0.0));
    }
}
