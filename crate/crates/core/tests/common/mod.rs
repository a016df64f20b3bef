//! Generators, oracles and property checks shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::TAU;

use pathforge::arena::{estimate_boundary, BoundaryEstimate, BoundaryParams};
use pathforge::io::session::{read_session, write_session_to};
use pathforge::kinematics::{smooth_axis, LocalFit, RawPath};
use pathforge::rrm::{detect_arrests, min_arrest_frames, repeated_running_median, running_median, RrmSchedule};
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), TestCaseError>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

/// Wall radius `125 + amp sin(2θ)` about the arena centre.
pub fn wall_radius(theta: f64, amp: f64) -> f64 {
    125.0 + amp * (2.0 * theta).sin()
}

/// Progression locations hugging the wall: angle uniform, radius
/// `R(θ) U` with `U` of density `9 u^8`.
pub fn wall_points(n: usize, seed: u64, center: (f64, f64), amp: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let th: f64 = rng.random_range(0.0..TAU);
            let u = rng.random::<f64>().powf(1.0 / 9.0);
            let r = wall_radius(th, amp) * u;
            (center.0 + r * th.cos(), center.1 + r * th.sin())
        })
        .collect()
}

/// Distance from `from` along direction `angle` to the true wall of an arena
/// centred at `center`, by bisection.
pub fn ray_to_wall(from: (f64, f64), angle: f64, center: (f64, f64), amp: f64) -> f64 {
    let inside = |r: f64| {
        let x = from.0 + r * angle.cos() - center.0;
        let y = from.1 + r * angle.sin() - center.1;
        x.hypot(y) < wall_radius(y.atan2(x), amp)
    };
    let (mut lo, mut hi) = (0.0, 400.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest radial gap between the estimated and the true wall over covered
/// grid angles, measured from the estimated centre.
pub fn max_curve_error(b: &BoundaryEstimate, center: (f64, f64), amp: f64) -> f64 {
    b.curve
        .alphas
        .iter()
        .zip(&b.curve.radii)
        .zip(&b.curve.covered)
        .filter(|(_, &c)| c)
        .map(|((&a, &r), _)| (r - ray_to_wall(b.center, a, center, amp)).abs())
        .fold(0.0, f64::max)
}

fn rotate((x, y): (f64, f64), phi: f64) -> (f64, f64) {
    (x * phi.cos() - y * phi.sin(), x * phi.sin() + y * phi.cos())
}

// ---- LOWESS ----

pub fn check_polynomial_reproduction(a: f64, b: f64, c: f64, n: usize, fps: f64) -> Check {
    let h = 10;
    let series: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fps;
            a + b * t + c * t * t
        })
        .collect();
    let fits = smooth_axis(&series, fps, h, 2).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (i, f) in fits.iter().enumerate().take(n - h).skip(h) {
        let t = i as f64 / fps;
        let (pos, vel, acc) = (a + b * t + c * t * t, b + 2.0 * c * t, 2.0 * c);
        ensure((f.position() - pos).abs() < 1e-8, || format!("position at {i}: {} vs {pos}", f.position()))?;
        ensure((f.velocity() - vel).abs() < 1e-8, || format!("velocity at {i}: {} vs {vel}", f.velocity()))?;
        ensure((f.acceleration() - acc).abs() < 1e-8, || format!("acceleration at {i}: {} vs {acc}", f.acceleration()))?;
    }
    Ok(())
}

fn fits_of(series: &[f64]) -> Result<Vec<LocalFit>, TestCaseError> {
    smooth_axis(series, 25.0, 10, 2).map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn check_shift_equivariance(series: &[f64], shift: f64) -> Check {
    let base = fits_of(series)?;
    let shifted: Vec<f64> = series.iter().map(|v| v + shift).collect();
    let moved = fits_of(&shifted)?;
    let scale = 1.0 + shift.abs() + series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, (p, q)) in base.iter().zip(&moved).enumerate() {
        ensure((q.position() - p.position() - shift).abs() <= 1e-9 * scale, || format!("position at {i}"))?;
        ensure((q.velocity() - p.velocity()).abs() <= 1e-7 * scale, || format!("velocity at {i}"))?;
        ensure((q.acceleration() - p.acceleration()).abs() <= 1e-5 * scale, || format!("acceleration at {i}"))?;
    }
    Ok(())
}

pub fn check_scale_equivariance(series: &[f64], k: f64) -> Check {
    let base = fits_of(series)?;
    let scaled: Vec<f64> = series.iter().map(|v| v * k).collect();
    let out = fits_of(&scaled)?;
    let scale = (1.0 + k.abs()) * (1.0 + series.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for (i, (p, q)) in base.iter().zip(&out).enumerate() {
        ensure((q.position() - k * p.position()).abs() <= 1e-9 * scale, || format!("position at {i}"))?;
        ensure((q.velocity() - k * p.velocity()).abs() <= 1e-7 * scale, || format!("velocity at {i}"))?;
        ensure((q.acceleration() - k * p.acceleration()).abs() <= 1e-5 * scale, || format!("acceleration at {i}"))?;
    }
    Ok(())
}

// ---- running medians ----

pub fn check_rrm_range_and_passes(series: &[f64]) -> Check {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let out = repeated_running_median(series, &RrmSchedule::default());
    ensure(out.len() == series.len(), || "length changed".into())?;
    ensure(out.iter().all(|v| *v >= lo && *v <= hi), || "output outside the input range".into())?;
    // One pass: every value is a window sample or the mean of two.
    for h in [1, 2, 3] {
        let pass = running_median(series, h);
        for (i, v) in pass.iter().enumerate() {
            let w = &series[i.saturating_sub(h)..=(i + h).min(series.len() - 1)];
            let hit = w.iter().any(|a| a == v) || w.iter().any(|a| w.iter().any(|b| (a + b) / 2.0 == *v));
            ensure(hit, || format!("pass h={h} value {v} at {i} is not a window sample or pair mean"))?;
        }
    }
    Ok(())
}

pub fn check_rrm_constant_idempotent(value: f64, n: usize) -> Check {
    let series = vec![value; n];
    let out = repeated_running_median(&series, &RrmSchedule::default());
    ensure(out == series, || "constant series changed".into())?;
    ensure(repeated_running_median(&out, &RrmSchedule::default()) == series, || "second application changed".into())
}

pub fn check_rrm_monotone(increments: &[f64], start: f64) -> Check {
    let mut series = vec![start];
    for d in increments {
        let last = *series.last().unwrap();
        series.push(last + d.abs());
    }
    let out = repeated_running_median(&series, &RrmSchedule::default());
    ensure(out.windows(2).all(|w| w[0] <= w[1]), || "monotone input gave a decreasing step".into())
}

pub fn check_arrest_runs(x: &[f64], y: &[f64], fps: f64) -> Check {
    let mask = detect_arrests(x, y, fps, 0.2).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(mask.len() == x.len(), || "mask length".into())?;
    let min = min_arrest_frames(0.2, fps);
    // Oracle: a frame is an arrest iff its maximal constant run is long enough.
    let mut start = 0;
    while start < x.len() {
        let mut end = start;
        while end + 1 < x.len() && x[end + 1] == x[start] && y[end + 1] == y[start] {
            end += 1;
        }
        let expect = end - start + 1 >= min;
        ensure(mask.mask[start..=end].iter().all(|&m| m == expect), || {
            format!("constant run {start}..={end} (min {min}) flagged wrongly")
        })?;
        start = end + 1;
    }
    Ok(())
}

// ---- boundary ----

fn boundary(points: &[(f64, f64)]) -> Result<BoundaryEstimate, TestCaseError> {
    estimate_boundary(points, (0.0, 0.0), &BoundaryParams::default()).map_err(|e| TestCaseError::fail(e.to_string()))
}

/// Rotating every location by `phi` about the working origin rotates the
/// centre by `phi` and the curve by `phi`.
pub fn check_boundary_rotation(seed: u64, phi: f64, center: (f64, f64), tol_cm: f64) -> Check {
    let pts = wall_points(20_000, seed, center, 3.0);
    let base = boundary(&pts)?;
    let rotated: Vec<(f64, f64)> = pts.iter().map(|&p| rotate(p, phi)).collect();
    let rot = boundary(&rotated)?;
    let expect = rotate(base.center, phi);
    ensure((rot.center.0 - expect.0).hypot(rot.center.1 - expect.1) <= tol_cm, || {
        format!("centre {:?} vs rotated {:?}", rot.center, expect)
    })?;
    for (&a, &r) in base.curve.alphas.iter().zip(&base.curve.radii) {
        let other = rot.radius_at((a + phi).rem_euclid(TAU));
        ensure((other - r).abs() <= tol_cm, || format!("curve at {a}: {other} vs {r}"))?;
    }
    Ok(())
}

/// Translating every location (by at most 5 cm, where the first-pass
/// Taylor term stays near 0.2 cm) shifts the centre by the same vector (within
/// the 0.25 cm Taylor term) and moves the estimated wall with the data
/// (within 0.2 cm).
pub fn check_boundary_translation(seed: u64, shift: (f64, f64)) -> Check {
    let pts = wall_points(20_000, seed, (0.0, 0.0), 3.0);
    let base = boundary(&pts)?;
    let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + shift.0, y + shift.1)).collect();
    let b = boundary(&moved)?;
    let dc = (b.center.0 - base.center.0 - shift.0).hypot(b.center.1 - base.center.1 - shift.1);
    ensure(dc <= 0.25, || format!("centre moved by {:?}, expected {shift:?}", (b.center.0 - base.center.0, b.center.1 - base.center.1)))?;
    for (&a, &r) in base.curve.alphas.iter().zip(&base.curve.radii) {
        let wall = (base.center.0 + r * a.cos() + shift.0 - b.center.0, base.center.1 + r * a.sin() + shift.1 - b.center.1);
        let (dist, angle) = (wall.0.hypot(wall.1), wall.1.atan2(wall.0));
        ensure((b.radius_at(angle) - dist).abs() <= 0.2, || format!("wall at {a}: {} vs {dist}", b.radius_at(angle)))?;
    }
    Ok(())
}

// ---- I/O ----

pub fn check_session_round_trip(x: Vec<f64>, y: Vec<f64>, first_frame: i64, fps: f64, grid_cm: f64) -> Check {
    let n = x.len();
    let frames: Vec<i64> = (first_frame..first_frame + n as i64).collect();
    let t = frames.iter().map(|&f| f as f64 / fps).collect();
    let session = RawPath {
        frames,
        t,
        x,
        y,
        fps,
        grid_cm,
    };
    session.validate().map_err(|e| TestCaseError::reject(e.to_string()))?;
    let mut buf = Vec::new();
    write_session_to(&mut buf, &session).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let text = String::from_utf8(buf).unwrap();
    let back = read_session(&text, std::path::Path::new("mem.csv")).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(back == session, || "round trip changed the session".into())
}

pub fn check_config_round_trip(config: &pathforge::SessionConfig) -> Check {
    let text = config.to_kv();
    let back = pathforge::SessionConfig::parse(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(&back == config, || format!("config changed through\n{text}"))
}

// ---- determinism ----

fn small_scenario(sigma: f64, target_p: f64) -> pathforge::Scenario {
    pathforge::Scenario {
        replications: 2,
        ..pathforge::Scenario::moving(sigma, target_p)
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

/// Same seed, same output, whatever the thread count.
pub fn check_seed_determinism(seed: u64, sigma: f64, target_p: f64) -> Check {
    use pathforge::radius_mse::{monte_carlo_mse, RadialLaw};
    use pathforge::simulator::{run_scenario, simulate_all};
    let scenario = small_scenario(sigma, target_p);
    let params = pathforge::SmootherParams::default();
    let fail = |e: pathforge::Error| TestCaseError::fail(e.to_string());

    let a = in_pool(1, || simulate_all(&scenario, seed)).map_err(fail)?;
    let b = in_pool(3, || simulate_all(&scenario, seed)).map_err(fail)?;
    ensure(a == b, || "simulated paths differ".into())?;
    let m1 = in_pool(1, || run_scenario(&scenario, seed, &params)).map_err(fail)?;
    let m2 = in_pool(3, || run_scenario(&scenario, seed, &params)).map_err(fail)?;
    ensure(m1 == m2, || "metrics differ".into())?;

    let model = pathforge::RadialModel {
        radius: 10.0,
        sectors: 4,
        per_sector: 5,
        law: RadialLaw::Power(2.0),
        sigma: 0.0,
    };
    let e1 = in_pool(1, || monte_carlo_mse(&model, pathforge::Estimator::Max, 10_000, seed)).map_err(fail)?;
    let e2 = in_pool(3, || monte_carlo_mse(&model, pathforge::Estimator::Max, 10_000, seed)).map_err(fail)?;
    ensure(e1 == e2, || "Monte Carlo MSE differs".into())
}

// ---- strategies ----

pub mod strategies {
    use proptest::prelude::*;

    pub fn quadratic() -> impl Strategy<Value = (f64, f64, f64, usize, f64)> {
        (-100.0..100.0, -50.0..50.0, -20.0..20.0, 25usize..120, prop::sample::select(vec![10.0, 25.0, 30.0]))
    }

    pub fn series() -> impl Strategy<Value = Vec<f64>> {
        prop_oneof![
            prop::collection::vec(-50.0..50.0f64, 25..150),
            prop::collection::vec((-5i32..5).prop_map(f64::from), 25..150),
        ]
    }

    pub fn scale() -> impl Strategy<Value = f64> {
        (0.1..10.0f64, any::<bool>()).prop_map(|(k, neg)| if neg { -k } else { k })
    }

    pub fn rrm_series() -> impl Strategy<Value = Vec<f64>> {
        prop_oneof![
            prop::collection::vec(-100.0..100.0f64, 1..80),
            prop::collection::vec((-3i32..3).prop_map(f64::from), 1..80),
        ]
    }

    /// A sticky integer random walk on two axes, so constant runs of all
    /// lengths appear.
    pub fn tracked_axes() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((0u8..4, -1i32..=1, -1i32..=1), 10..200).prop_map(|steps| {
            let (mut x, mut y) = (vec![0.0], vec![0.0]);
            for (stay, dx, dy) in steps {
                let (lx, ly) = (*x.last().unwrap(), *y.last().unwrap());
                if stay > 0 {
                    x.push(lx);
                    y.push(ly);
                } else {
                    x.push(lx + f64::from(dx));
                    y.push(ly + f64::from(dy));
                }
            }
            (x, y)
        })
    }

    pub fn session() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, i64, f64, f64)> {
        (1usize..60)
            .prop_flat_map(|n| {
                let coord = prop_oneof![-1e4..1e4f64, (-300i32..300).prop_map(f64::from), any::<f64>().prop_filter("finite", |v| v.is_finite())];
                (
                    prop::collection::vec(coord.clone(), n),
                    prop::collection::vec(coord, n),
                    -5i64..5_000,
                    prop::sample::select(vec![10.0, 25.0, 29.97, 30.0, 60.0]),
                    prop::sample::select(vec![0.5, 1.0, 2.5]),
                )
            })
    }

    pub fn config() -> impl Strategy<Value = pathforge::SessionConfig> {
        (
            prop::sample::select(vec![10.0, 25.0, 29.97, 50.0]),
            2usize..30,
            0usize..5,
            prop::collection::vec(1usize..6, 1..6),
            0.01..1.0f64,
            0.5..0.999f64,
            (-20.0..20.0f64, -20.0..20.0f64),
            any::<bool>(),
            any::<u64>(),
        )
            .prop_map(|(fps, h, iters, schedule, min_s, q, origin, boundary, seed)| pathforge::SessionConfig {
                fps,
                half_window: h,
                robustness_iters: iters,
                rrm_schedule: schedule,
                min_arrest_s: min_s,
                quantile: q,
                origin,
                boundary_enabled: boundary,
                seed,
                ..pathforge::SessionConfig::default()
            })
    }
}
