//! Mean squared error of radius estimators for a circular arena.
//!
//! Behavioural distances `Z = R U` from the centre, with `U` uniform on
//! `[0, 1]` or drawn from the density `(p + 1) u^p`, give the maximum as the
//! natural estimate of `R` and a rescaled maximum as its unbiased version.
//! With `k = nN (p + 1)` (`p = 0` for the uniform law):
//!
//! * `MSE(max)       = 2 R^2 / ((k + 1)(k + 2))`
//! * `MSE(corrected) = R^2 / (k (k + 2))`
//!
//! Averaging `n` noisy boundary measurements has `MSE = σ^2 / n`, so the
//! corrected behavioural estimate wins whenever `R^2 / σ^2 < N (nN + 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Distribution of the normalised distance `U = Z / R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialLaw {
    Uniform,
    /// Density `(p + 1) u^p` on `[0, 1]`.
    Power(f64),
}

impl RadialLaw {
    fn exponent(self) -> Result<f64> {
        match self {
            RadialLaw::Uniform => Ok(0.0),
            RadialLaw::Power(p) if p > -1.0 && p.is_finite() => Ok(p),
            RadialLaw::Power(p) => Err(Error::Domain(format!(
                "power-law exponent must exceed -1 for (p + 1) u^p to be a density, got {p}"
            ))),
        }
    }

    /// Draws one normalised distance by inversion, `U = V^(1 / (p + 1))`.
    fn sample(self, rng: &mut impl Rng) -> f64 {
        let v: f64 = rng.random();
        match self {
            RadialLaw::Uniform => v,
            RadialLaw::Power(p) => v.powf(1.0 / (p + 1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialModel {
    /// True radius (cm).
    pub radius: f64,
    /// Number of sectors `n`; also the number of boundary measurements.
    pub sectors: usize,
    /// Behavioural samples per sector `N`.
    pub per_sector: usize,
    pub law: RadialLaw,
    /// Boundary-measurement noise SD (cm).
    pub sigma: f64,
}

impl RadialModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {}", self.radius)));
        }
        if self.sectors == 0 || self.per_sector == 0 {
            return Err(Error::Domain("sector and per-sector counts must be >= 1".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Domain(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        self.law.exponent().map(|_| ())
    }

    pub fn samples(&self) -> usize {
        self.sectors * self.per_sector
    }

    /// `k = nN (p + 1)`.
    fn effective_count(&self) -> Result<f64> {
        Ok(self.samples() as f64 * (self.law.exponent()? + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Largest observed distance.
    Max,
    /// Maximum rescaled to be unbiased.
    Corrected,
    /// Mean of the noisy boundary measurements.
    BoundaryMean,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Max => "max",
            Estimator::Corrected => "corrected",
            Estimator::BoundaryMean => "boundary-mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEstimates {
    pub max: f64,
    pub corrected: f64,
}

/// Maximum and bias-corrected maximum of behavioural distances, with `nN`
/// taken as the number of samples.
pub fn estimators(samples: &[f64], law: RadialLaw) -> Result<RadiusEstimates> {
    if samples.is_empty() {
        return Err(Error::Insufficient("no samples".into()));
    }
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = samples.len() as f64 * (law.exponent()? + 1.0);
    Ok(RadiusEstimates {
        max,
        corrected: max * (k + 1.0) / k,
    })
}

pub fn mse_closed_form(model: &RadialModel, estimator: Estimator) -> Result<f64> {
    model.validate()?;
    let r2 = model.radius * model.radius;
    Ok(match estimator {
        Estimator::Max => {
            let k = model.effective_count()?;
            r2 * 2.0 / ((k + 1.0) * (k + 2.0))
        }
        Estimator::Corrected => {
            let k = model.effective_count()?;
            r2 / (k * (k + 2.0))
        }
        Estimator::BoundaryMean => model.sigma * model.sigma / model.sectors as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advantage {
    /// `N (nN + 2)`.
    pub threshold: f64,
    /// `R^2 / σ^2`.
    pub ratio: f64,
    /// True when the corrected behavioural estimate has the smaller MSE.
    pub behavioural_wins: bool,
}

pub fn advantage_threshold(model: &RadialModel) -> Result<Advantage> {
    model.validate()?;
    if !(model.sigma > 0.0) {
        return Err(Error::Domain("advantage comparison needs sigma > 0".into()));
    }
    let nn = model.samples() as f64;
    let threshold = model.per_sector as f64 * (nn + 2.0);
    let ratio = (model.radius / model.sigma).powi(2);
    Ok(Advantage {
        threshold,
        ratio,
        behavioural_wins: ratio < threshold,
    })
}

/// Empirical MSE with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloMse {
    pub mse: f64,
    /// SD of the squared errors over `sqrt(reps)`.
    pub se: f64,
    pub mean_estimate: f64,
    /// Standard error of `mean_estimate`.
    pub mean_se: f64,
    pub reps: usize,
}

impl MonteCarloMse {
    /// True when `value` lies within `k` standard errors of the empirical MSE.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mse - value).abs() <= k * self.se
    }
}

const MC_CHUNK: usize = 4096;

/// Brute-force Monte Carlo of an estimator's MSE under `model`.
///
/// Replications are split into fixed chunks, each with its own ChaCha stream
/// derived from `seed`, and reduced in chunk order, so the result does not
/// depend on the thread schedule.
pub fn monte_carlo_mse(model: &RadialModel, estimator: Estimator, reps: usize, seed: u64) -> Result<MonteCarloMse> {
    model.validate()?;
    if reps < 1000 {
        return Err(Error::Domain(format!("need at least 1000 replications, got {reps}")));
    }
    let truth = model.radius;
    let noise = Normal::new(0.0, model.sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let chunks = reps.div_ceil(MC_CHUNK);
    let partials: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(reps - c * MC_CHUNK);
            let mut acc = [0.0; 4]; // Σe², Σe⁴, Σest, Σest²
            for _ in 0..count {
                let est = match estimator {
                    Estimator::BoundaryMean => {
                        (0..model.sectors).map(|_| truth + noise.sample(&mut rng)).sum::<f64>() / model.sectors as f64
                    }
                    _ => {
                        let max = (0..model.samples())
                            .map(|_| truth * model.law.sample(&mut rng))
                            .fold(f64::NEG_INFINITY, f64::max);
                        let k = model.samples() as f64 * (model.law.exponent().unwrap_or(0.0) + 1.0);
                        if estimator == Estimator::Corrected {
                            max * (k + 1.0) / k
                        } else {
                            max
                        }
                    }
                };
                let e2 = (est - truth).powi(2);
                acc[0] += e2;
                acc[1] += e2 * e2;
                acc[2] += est;
                acc[3] += est * est;
            }
            acc
        })
        .collect();
    let total = partials.iter().fold([0.0; 4], |mut a, p| {
        a.iter_mut().zip(p).for_each(|(x, y)| *x += y);
        a
    });
    let n = reps as f64;
    let mse = total[0] / n;
    let var_e2 = (total[1] - n * mse * mse) / (n - 1.0);
    let mean_estimate = total[2] / n;
    let var_est = (total[3] - n * mean_estimate * mean_estimate) / (n - 1.0);
    Ok(MonteCarloMse {
        mse,
        se: (var_e2.max(0.0) / n).sqrt(),
        mean_estimate,
        mean_se: (var_est.max(0.0) / n).sqrt(),
        reps,
    })
}

/// Closed-form and Monte Carlo MSE for one model and estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseCheck {
    pub model: RadialModel,
    pub estimator: Estimator,
    pub closed_form: f64,
    pub empirical: MonteCarloMse,
}

impl MseCheck {
    /// Closed form within three standard errors of the simulation.
    pub fn passes(&self) -> bool {
        self.empirical.agrees_with(self.closed_form, 3.0)
    }
}

impl RadialModel {
    pub fn label(&self) -> String {
        let law = match self.law {
            RadialLaw::Uniform => "uniform".to_string(),
            RadialLaw::Power(p) => format!("power p={p}"),
        };
        format!("{law} R={} n={} N={} sigma={}", self.radius, self.sectors, self.per_sector, self.sigma)
    }
}

/// Models and estimators checked by `validate_mse`: both behavioural
/// estimators under uniform and power laws, plus the boundary mean.
pub fn validation_grid() -> Vec<(RadialModel, Estimator)> {
    let m = |radius, sectors, per_sector, law, sigma| RadialModel {
        radius,
        sectors,
        per_sector,
        law,
        sigma,
    };
    let behavioural = [
        m(1.0, 1, 1, RadialLaw::Uniform, 0.0),
        m(10.0, 4, 5, RadialLaw::Uniform, 0.0),
        m(125.0, 36, 3, RadialLaw::Uniform, 0.0),
        m(10.0, 4, 5, RadialLaw::Power(3.0), 0.0),
        m(2.0, 2, 3, RadialLaw::Power(1.0), 0.0),
        m(125.0, 10, 2, RadialLaw::Power(8.0), 0.0),
    ];
    let mut grid: Vec<(RadialModel, Estimator)> = behavioural
        .iter()
        .flat_map(|&model| [(model, Estimator::Max), (model, Estimator::Corrected)])
        .collect();
    grid.push((m(125.0, 100, 1, RadialLaw::Uniform, 1.0), Estimator::BoundaryMean));
    grid.push((m(50.0, 10, 1, RadialLaw::Uniform, 0.5), Estimator::BoundaryMean));
    grid
}

/// Runs every grid point with `reps` replications; point `i` uses seed
/// `seed + i`.
pub fn validate_mse(grid: &[(RadialModel, Estimator)], reps: usize, seed: u64) -> Result<Vec<MseCheck>> {
    grid.iter()
        .enumerate()
        .map(|(i, &(model, estimator))| {
            Ok(MseCheck {
                model,
                estimator,
                closed_form: mse_closed_form(&model, estimator)?,
                empirical: monte_carlo_mse(&model, estimator, reps, seed.wrapping_add(i as u64))?,
            })
        })
        .collect()
}
