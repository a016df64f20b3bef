//! The combined path smoother and per-session endpoints.
//!
//! LOWESS supplies positions and derivatives; the repeated running median on
//! the raw locations supplies the arrest intervals. Inside an arrest the
//! velocity is forced to zero and the position is the straight line between
//! the LOWESS positions at the first and last arrest frames.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kinematics::{smooth_path, KinematicSeries, LowessParams, RawPath};
use crate::rrm::{detect_arrests, repeated_running_median, runs_of, ArrestMask, RrmSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Arrest,
    Lingering,
    Progression,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Arrest => "arrest",
            SegmentKind::Lingering => "lingering",
            SegmentKind::Progression => "progression",
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SegmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arrest" => Ok(SegmentKind::Arrest),
            "lingering" => Ok(SegmentKind::Lingering),
            "progression" => Ok(SegmentKind::Progression),
            other => Err(Error::Domain(format!("unknown segment kind {other:?}"))),
        }
    }
}

/// Inclusive frame interval of one behavioural kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    /// Maximum combined speed inside the segment (cm/s).
    pub max_speed: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Ordered segments partitioning a session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentList {
    pub segments: Vec<Segment>,
}

impl SegmentList {
    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    /// Second grouping level: consecutive arrest and lingering segments merge
    /// into a single lingering episode; progression segments pass through.
    pub fn episodes(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for seg in &self.segments {
            let grouped = match seg.kind {
                SegmentKind::Progression => *seg,
                _ => Segment {
                    kind: SegmentKind::Lingering,
                    ..*seg
                },
            };
            match out.last_mut() {
                Some(prev) if prev.kind == SegmentKind::Lingering && grouped.kind == SegmentKind::Lingering => {
                    prev.end = grouped.end;
                    prev.max_speed = prev.max_speed.max(grouped.max_speed);
                }
                _ => out.push(grouped),
            }
        }
        out
    }

    /// Frames belonging to progression segments.
    pub fn progression_frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Progression)
            .flat_map(|s| s.start..=s.end)
    }
}

/// Per-session summary measures.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSummary {
    pub total_distance_m: f64,
    pub proportion_arrest: f64,
    pub mean_speed_cm_s: f64,
    pub arrests: usize,
    pub lingering: usize,
    pub progression: usize,
    pub frames: usize,
}

/// Overrides the LOWESS series inside every arrest run.
pub fn combine(kin: &KinematicSeries, mask: &ArrestMask) -> Result<KinematicSeries> {
    if kin.len() != mask.len() {
        return Err(Error::LengthMismatch {
            what: "kinematics/arrest mask",
            left: kin.len(),
            right: mask.len(),
        });
    }
    let mut out = kin.clone();
    for (start, end) in mask.runs() {
        let span = (end - start) as f64;
        let (x0, y0, x1, y1) = (kin.x[start], kin.y[start], kin.x[end], kin.y[end]);
        for i in start..=end {
            let f = if span > 0.0 { (i - start) as f64 / span } else { 0.0 };
            out.x[i] = x0 + f * (x1 - x0);
            out.y[i] = y0 + f * (y1 - y0);
            out.vx[i] = 0.0;
            out.vy[i] = 0.0;
            out.ax[i] = 0.0;
            out.ay[i] = 0.0;
            out.speed[i] = 0.0;
        }
    }
    Ok(out)
}

/// Splits a session into arrest, lingering and progression segments.
///
/// Non-arrest runs whose maximum speed is below `lingering_speed_threshold`
/// are lingering; the rest are progression.
pub fn classify_segments(combined: &KinematicSeries, mask: &ArrestMask, lingering_speed_threshold: f64) -> Result<SegmentList> {
    if combined.len() != mask.len() {
        return Err(Error::LengthMismatch {
            what: "kinematics/arrest mask",
            left: combined.len(),
            right: mask.len(),
        });
    }
    if !(lingering_speed_threshold >= 0.0) {
        return Err(Error::Domain(format!(
            "lingering threshold must be >= 0, got {lingering_speed_threshold}"
        )));
    }
    let mut segments: Vec<Segment> = runs_of(&mask.mask, true)
        .into_iter()
        .map(|(start, end)| (start, end, true))
        .chain(runs_of(&mask.mask, false).into_iter().map(|(s, e)| (s, e, false)))
        .map(|(start, end, arrest)| {
            let max_speed = combined.speed[start..=end].iter().copied().fold(0.0, f64::max);
            let kind = if arrest {
                SegmentKind::Arrest
            } else if max_speed < lingering_speed_threshold {
                SegmentKind::Lingering
            } else {
                SegmentKind::Progression
            };
            Segment {
                start,
                end,
                kind,
                max_speed,
            }
        })
        .collect();
    segments.sort_by_key(|s| s.start);
    Ok(SegmentList { segments })
}

pub fn endpoints(combined: &KinematicSeries, segments: &SegmentList) -> Result<EndpointSummary> {
    let n = combined.len();
    if let Some(last) = segments.segments.last() {
        if last.end + 1 != n {
            return Err(Error::LengthMismatch {
                what: "segments/kinematics",
                left: last.end + 1,
                right: n,
            });
        }
    }
    let zero = combined.speed.iter().filter(|&&s| s == 0.0).count();
    Ok(EndpointSummary {
        total_distance_m: combined.path_length_cm() / 100.0,
        proportion_arrest: if n > 0 { zero as f64 / n as f64 } else { 0.0 },
        mean_speed_cm_s: if n > 0 { combined.speed.iter().sum::<f64>() / n as f64 } else { 0.0 },
        arrests: segments.count(SegmentKind::Arrest),
        lingering: segments.count(SegmentKind::Lingering),
        progression: segments.count(SegmentKind::Progression),
        frames: n,
    })
}

/// Parameters of the combined smoother.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherParams {
    pub lowess: LowessParams,
    pub schedule: RrmSchedule,
    pub min_arrest_s: f64,
    pub lingering_speed_cm_s: f64,
}

impl Default for SmootherParams {
    fn default() -> Self {
        Self {
            lowess: LowessParams::default(),
            schedule: RrmSchedule::default(),
            min_arrest_s: 0.2,
            lingering_speed_cm_s: 5.0,
        }
    }
}

/// Every intermediate product of the combined smoother for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSession {
    pub lowess: KinematicSeries,
    pub rrm_x: Vec<f64>,
    pub rrm_y: Vec<f64>,
    pub arrests: ArrestMask,
    pub combined: KinematicSeries,
    pub segments: SegmentList,
    pub endpoints: EndpointSummary,
}

/// Runs LOWESS, RRM arrest detection, the combination step, segmentation
/// and endpoints. Errors carry the name of the failing stage.
pub fn smooth_session(path: &RawPath, params: &SmootherParams) -> Result<SmoothedSession> {
    let lowess = smooth_path(path, &params.lowess).map_err(|e| e.in_stage("lowess"))?;
    let rrm_x = repeated_running_median(&path.x, &params.schedule);
    let rrm_y = repeated_running_median(&path.y, &params.schedule);
    let arrests = detect_arrests(&rrm_x, &rrm_y, path.fps, params.min_arrest_s).map_err(|e| e.in_stage("arrests"))?;
    let combined = combine(&lowess, &arrests).map_err(|e| e.in_stage("combine"))?;
    let segments = classify_segments(&combined, &arrests, params.lingering_speed_cm_s).map_err(|e| e.in_stage("segments"))?;
    let endpoints = endpoints(&combined, &segments).map_err(|e| e.in_stage("endpoints"))?;
    Ok(SmoothedSession {
        lowess,
        rrm_x,
        rrm_y,
        arrests,
        combined,
        segments,
        endpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from(x: Vec<f64>, y: Vec<f64>, speed: Vec<f64>) -> KinematicSeries {
        let n = x.len();
        KinematicSeries {
            vx: speed.clone(),
            vy: vec![0.0; n],
            ax: vec![0.1; n],
            ay: vec![0.1; n],
            speed,
            outlier_x: vec![false; n],
            outlier_y: vec![false; n],
            x,
            y,
        }
    }

    fn wiggly(n: usize) -> KinematicSeries {
        let x: Vec<f64> = (0..n).map(|i| i as f64 + (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos() * 4.0).collect();
        series_from(x, y, vec![2.0; n])
    }

    fn mask(n: usize, runs: &[(usize, usize)]) -> ArrestMask {
        let mut m = ArrestMask::none(n, 0.2);
        for &(s, e) in runs {
            m.mask[s..=e].iter_mut().for_each(|v| *v = true);
        }
        m
    }

    #[test]
    fn empty_mask_is_identity() {
        let kin = wiggly(40);
        assert_eq!(combine(&kin, &ArrestMask::none(40, 0.2)).unwrap(), kin);
    }

    #[test]
    fn full_arrest_is_straight_line() {
        let kin = wiggly(30);
        let out = combine(&kin, &mask(30, &[(0, 29)])).unwrap();
        assert!(out.speed.iter().chain(&out.vx).chain(&out.vy).all(|&v| v == 0.0));
        let direct = (kin.x[29] - kin.x[0]).hypot(kin.y[29] - kin.y[0]);
        assert!((out.path_length_cm() - direct).abs() < 1e-9);
    }

    #[test]
    fn arrest_distance_equals_anchor_chord() {
        let kin = wiggly(300);
        let out = combine(&kin, &mask(300, &[(100, 150)])).unwrap();
        let inside = crate::kinematics::path_length(&out.x[100..=150], &out.y[100..=150]);
        let chord = (kin.x[150] - kin.x[100]).hypot(kin.y[150] - kin.y[100]);
        assert!((inside - chord).abs() < 1e-9);
        // Outside the arrest nothing changes.
        assert_eq!(out.x[..100], kin.x[..100]);
        assert_eq!(out.speed[151..], kin.speed[151..]);
        assert!(out.path_length_cm() <= kin.path_length_cm());
        assert!(combine(&kin, &ArrestMask::none(10, 0.2)).is_err());
    }

    #[test]
    fn threshold_extremes() {
        let kin = wiggly(50);
        let m = mask(50, &[(10, 20), (30, 35)]);
        let combined = combine(&kin, &m).unwrap();
        let zero = classify_segments(&combined, &m, 0.0).unwrap();
        assert!(zero.segments.iter().all(|s| s.kind != SegmentKind::Lingering));
        assert_eq!(zero.count(SegmentKind::Progression), 3);
        let inf = classify_segments(&combined, &m, f64::INFINITY).unwrap();
        assert_eq!(inf.count(SegmentKind::Lingering), 3);
        assert_eq!(inf.count(SegmentKind::Arrest), 2);
        assert!(classify_segments(&combined, &m, -1.0).is_err());
    }

    #[test]
    fn designed_speeds_classify() {
        let mut speed = vec![0.0; 30];
        speed[2] = 3.0;
        speed[22] = 12.0;
        let kin = series_from(vec![0.0; 30], vec![0.0; 30], speed.clone());
        let m = mask(30, &[(10, 19)]);
        let segs = classify_segments(&kin, &m, 5.0).unwrap();
        let kinds: Vec<_> = segs.segments.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SegmentKind::Lingering, SegmentKind::Arrest, SegmentKind::Progression]);
        assert_eq!(segs.segments[0].max_speed, 3.0);
        assert_eq!(segs.segments[2].max_speed, 12.0);
        // Partition.
        assert_eq!(segs.segments[0].start, 0);
        assert!(segs.segments.windows(2).all(|w| w[0].end + 1 == w[1].start));
        assert_eq!(segs.segments.last().unwrap().end, 29);
        // The leading lingering bout and the arrest merge into one episode.
        let ep = segs.episodes();
        assert_eq!(ep.len(), 2);
        assert_eq!((ep[0].start, ep[0].end, ep[0].kind), (0, 19, SegmentKind::Lingering));
    }

    #[test]
    fn endpoint_arithmetic() {
        // Stationary.
        let kin = series_from(vec![1.0; 20], vec![2.0; 20], vec![0.0; 20]);
        let m = mask(20, &[(0, 19)]);
        let segs = classify_segments(&kin, &m, 5.0).unwrap();
        let e = endpoints(&kin, &segs).unwrap();
        assert_eq!(e.total_distance_m, 0.0);
        assert_eq!(e.proportion_arrest, 1.0);

        // 10 cm/s for 60 s at 25 fps.
        let n = 60 * 25 + 1;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 10.0 / 25.0).collect();
        let kin = series_from(x, vec![0.0; n], vec![10.0; n]);
        let m = ArrestMask::none(n, 0.2);
        let segs = classify_segments(&kin, &m, 5.0).unwrap();
        let e = endpoints(&kin, &segs).unwrap();
        assert!((e.total_distance_m - 6.0).abs() < 1e-9);
        assert_eq!(e.proportion_arrest, 0.0);
        assert_eq!(e.mean_speed_cm_s, 10.0);
        assert_eq!(e.progression, 1);
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in [SegmentKind::Arrest, SegmentKind::Lingering, SegmentKind::Progression] {
            assert_eq!(k.as_str().parse::<SegmentKind>().unwrap(), k);
        }
        assert!("walk".parse::<SegmentKind>().is_err());
    }
}
