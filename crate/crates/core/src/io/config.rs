//! Flat `key=value` configuration with dotted keys, e.g.
//! `lowess.half_window=10`. Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::arena::BoundaryParams;
use crate::error::{Error, Result};
use crate::kinematics::LowessParams;
use crate::pipeline::SmootherParams;
use crate::rrm::RrmSchedule;
use crate::simulator::{ProfileConfig, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub fps: f64,
    pub grid_cm: f64,
    pub half_window: usize,
    pub robustness_iters: usize,
    pub rrm_schedule: Vec<usize>,
    pub min_arrest_s: f64,
    pub lingering_speed_cm_s: f64,
    pub boundary_enabled: bool,
    pub sectors: usize,
    pub sector_width_deg: f64,
    pub quantile: f64,
    pub bandwidth: f64,
    pub min_count: usize,
    pub boundary_robustness_iters: usize,
    pub max_fill_gap_deg: f64,
    pub origin: (f64, f64),
    pub sim_sigma: f64,
    pub sim_target_p: f64,
    pub sim_frames: usize,
    pub sim_outlier_rate: f64,
    pub sim_replications: usize,
    pub sim_pool_size: usize,
    pub sim_peak_cm_s: (f64, f64),
    pub sim_duration_s: (f64, f64),
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let lowess = LowessParams::default();
        let smoother = SmootherParams::default();
        let boundary = BoundaryParams::default();
        let scenario = Scenario::moving(0.6, 0.36);
        Self {
            fps: 25.0,
            grid_cm: 1.0,
            half_window: lowess.half_window,
            robustness_iters: lowess.robustness_iters,
            rrm_schedule: smoother.schedule.half_windows().to_vec(),
            min_arrest_s: smoother.min_arrest_s,
            lingering_speed_cm_s: smoother.lingering_speed_cm_s,
            boundary_enabled: true,
            sectors: boundary.sectors,
            sector_width_deg: boundary.sector_width.to_degrees(),
            quantile: boundary.quantile,
            bandwidth: boundary.bandwidth,
            min_count: boundary.min_count,
            boundary_robustness_iters: boundary.robustness_iters,
            max_fill_gap_deg: boundary.max_fill_gap.to_degrees(),
            origin: (0.0, 0.0),
            sim_sigma: scenario.sigma,
            sim_target_p: 0.36,
            sim_frames: scenario.frames,
            sim_outlier_rate: scenario.outlier_rate,
            sim_replications: scenario.replications,
            sim_pool_size: scenario.profiles.pool_size,
            sim_peak_cm_s: scenario.profiles.peak_cm_s,
            sim_duration_s: scenario.profiles.duration_s,
            seed: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((parse_value(key, a)?, parse_value(key, b)?)),
        _ => Err(Error::Config(format!("{key} needs two comma-separated numbers, got {value:?}"))),
    }
}

fn fmt_pair((a, b): (f64, f64)) -> String {
    format!("{a},{b}")
}

impl SessionConfig {
    pub const KEYS: [&'static str; 25] = [
        "session.fps",
        "session.grid_cm",
        "lowess.half_window",
        "lowess.robustness_iters",
        "rrm.schedule",
        "arrest.min_duration_s",
        "segments.lingering_speed_cm_s",
        "boundary.enabled",
        "boundary.sectors",
        "boundary.sector_width_deg",
        "boundary.quantile",
        "boundary.bandwidth",
        "boundary.min_count",
        "boundary.robustness_iters",
        "boundary.max_fill_gap_deg",
        "boundary.origin",
        "simulator.sigma",
        "simulator.target_p",
        "simulator.frames",
        "simulator.outlier_rate",
        "simulator.replications",
        "simulator.pool_size",
        "simulator.peak_cm_s",
        "simulator.duration_s",
        "seed",
    ];

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "session.fps" => self.fps = parse_value(key, v)?,
            "session.grid_cm" => self.grid_cm = parse_value(key, v)?,
            "lowess.half_window" => self.half_window = parse_value(key, v)?,
            "lowess.robustness_iters" => self.robustness_iters = parse_value(key, v)?,
            "rrm.schedule" => {
                self.rrm_schedule = v.split(',').map(|s| parse_value(key, s.trim())).collect::<Result<_>>()?;
            }
            "arrest.min_duration_s" => self.min_arrest_s = parse_value(key, v)?,
            "segments.lingering_speed_cm_s" => self.lingering_speed_cm_s = parse_value(key, v)?,
            "boundary.enabled" => self.boundary_enabled = parse_value(key, v)?,
            "boundary.sectors" => self.sectors = parse_value(key, v)?,
            "boundary.sector_width_deg" => self.sector_width_deg = parse_value(key, v)?,
            "boundary.quantile" => self.quantile = parse_value(key, v)?,
            "boundary.bandwidth" => self.bandwidth = parse_value(key, v)?,
            "boundary.min_count" => self.min_count = parse_value(key, v)?,
            "boundary.robustness_iters" => self.boundary_robustness_iters = parse_value(key, v)?,
            "boundary.max_fill_gap_deg" => self.max_fill_gap_deg = parse_value(key, v)?,
            "boundary.origin" => self.origin = parse_pair(key, v)?,
            "simulator.sigma" => self.sim_sigma = parse_value(key, v)?,
            "simulator.target_p" => self.sim_target_p = parse_value(key, v)?,
            "simulator.frames" => self.sim_frames = parse_value(key, v)?,
            "simulator.outlier_rate" => self.sim_outlier_rate = parse_value(key, v)?,
            "simulator.replications" => self.sim_replications = parse_value(key, v)?,
            "simulator.pool_size" => self.sim_pool_size = parse_value(key, v)?,
            "simulator.peak_cm_s" => self.sim_peak_cm_s = parse_pair(key, v)?,
            "simulator.duration_s" => self.sim_duration_s = parse_pair(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies an assignment written as `key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k, v)
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.set_assignment(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "session.fps" => self.fps.to_string(),
            "session.grid_cm" => self.grid_cm.to_string(),
            "lowess.half_window" => self.half_window.to_string(),
            "lowess.robustness_iters" => self.robustness_iters.to_string(),
            "rrm.schedule" => self.rrm_schedule.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            "arrest.min_duration_s" => self.min_arrest_s.to_string(),
            "segments.lingering_speed_cm_s" => self.lingering_speed_cm_s.to_string(),
            "boundary.enabled" => self.boundary_enabled.to_string(),
            "boundary.sectors" => self.sectors.to_string(),
            "boundary.sector_width_deg" => self.sector_width_deg.to_string(),
            "boundary.quantile" => self.quantile.to_string(),
            "boundary.bandwidth" => self.bandwidth.to_string(),
            "boundary.min_count" => self.min_count.to_string(),
            "boundary.robustness_iters" => self.boundary_robustness_iters.to_string(),
            "boundary.max_fill_gap_deg" => self.max_fill_gap_deg.to_string(),
            "boundary.origin" => fmt_pair(self.origin),
            "simulator.sigma" => self.sim_sigma.to_string(),
            "simulator.target_p" => self.sim_target_p.to_string(),
            "simulator.frames" => self.sim_frames.to_string(),
            "simulator.outlier_rate" => self.sim_outlier_rate.to_string(),
            "simulator.replications" => self.sim_replications.to_string(),
            "simulator.pool_size" => self.sim_pool_size.to_string(),
            "simulator.peak_cm_s" => fmt_pair(self.sim_peak_cm_s),
            "simulator.duration_s" => fmt_pair(self.sim_duration_s),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// One `key=value` line per key; `parse(to_kv())` restores `self`.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).unwrap_or_default());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("session.fps", self.fps),
            ("session.grid_cm", self.grid_cm),
            ("arrest.min_duration_s", self.min_arrest_s),
            ("segments.lingering_speed_cm_s", self.lingering_speed_cm_s),
            ("boundary.sector_width_deg", self.sector_width_deg),
            ("boundary.bandwidth", self.bandwidth),
            ("boundary.max_fill_gap_deg", self.max_fill_gap_deg),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if self.half_window < 2 {
            return Err(Error::Config(format!("lowess.half_window must be >= 2, got {}", self.half_window)));
        }
        if self.sectors == 0 || self.min_count == 0 {
            return Err(Error::Config("boundary.sectors and boundary.min_count must be positive".into()));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::Config(format!("boundary.quantile must be in (0, 1), got {}", self.quantile)));
        }
        if !(self.sim_sigma >= 0.0) || !(0.0..=1.0).contains(&self.sim_outlier_rate) || !(0.0..1.0).contains(&self.sim_target_p) {
            return Err(Error::Config("simulator sigma, outlier_rate or target_p out of range".into()));
        }
        if self.sim_pool_size == 0 || self.sim_peak_cm_s.0 > self.sim_peak_cm_s.1 || self.sim_duration_s.0 > self.sim_duration_s.1 {
            return Err(Error::Config("simulator profile ranges are invalid".into()));
        }
        RrmSchedule::new(self.rrm_schedule.clone()).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn smoother(&self) -> Result<SmootherParams> {
        Ok(SmootherParams {
            lowess: LowessParams {
                half_window: self.half_window,
                robustness_iters: self.robustness_iters,
            },
            schedule: RrmSchedule::new(self.rrm_schedule.clone())?,
            min_arrest_s: self.min_arrest_s,
            lingering_speed_cm_s: self.lingering_speed_cm_s,
        })
    }

    pub fn boundary(&self) -> BoundaryParams {
        BoundaryParams {
            sectors: self.sectors,
            sector_width: self.sector_width_deg.to_radians(),
            quantile: self.quantile,
            bandwidth: self.bandwidth,
            min_count: self.min_count,
            robustness_iters: self.boundary_robustness_iters,
            max_fill_gap: self.max_fill_gap_deg.to_radians(),
            ..BoundaryParams::default()
        }
    }

    /// Simulation scenario built from the `simulator.*` keys.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            label: format!("sigma={} p={}", self.sim_sigma, self.sim_target_p),
            sigma: self.sim_sigma,
            target_p: Some(self.sim_target_p),
            frames: self.sim_frames,
            fps: self.fps,
            outlier_rate: self.sim_outlier_rate,
            replications: self.sim_replications,
            profiles: ProfileConfig {
                pool_size: self.sim_pool_size,
                peak_cm_s: self.sim_peak_cm_s,
                duration_s: self.sim_duration_s,
                fps: self.fps,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut cfg = SessionConfig::default();
        cfg.set("rrm.schedule", "4,2,1").unwrap();
        cfg.set("boundary.origin", "1.5, -2").unwrap();
        cfg.set("seed", "99").unwrap();
        assert_eq!(SessionConfig::parse(&cfg.to_kv()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SessionConfig::parse("lowess.half_window=ten").is_err());
        assert!(SessionConfig::parse("nope=1").is_err());
        assert!(SessionConfig::parse("rrm.schedule=").is_err());
        assert!(SessionConfig::parse("boundary.quantile=1.5").is_err());
        let err = SessionConfig::parse("# c\n\nsession.fps=-1").unwrap_err().to_string();
        assert!(err.contains("session.fps"), "{err}");
        let err = SessionConfig::parse("\nbogus").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn every_key_is_readable() {
        let cfg = SessionConfig::default();
        for key in SessionConfig::KEYS {
            assert!(cfg.get(key).is_some(), "{key}");
        }
    }
}
