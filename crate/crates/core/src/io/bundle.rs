//! End-to-end processing of one session into a directory of result files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::SessionConfig;
use super::fmt_num;
use super::session::{parse_session, session_files};
use crate::arena::{distance_from_wall, estimate_boundary, BoundaryEstimate};
use crate::error::{Error, Result};
use crate::kinematics::{path_length, RawPath};
use crate::pipeline::{smooth_session, SmoothedSession};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything produced for one session, rendered but not yet written.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub smoothed: SmoothedSession,
    pub boundary: Option<BoundaryEstimate>,
    /// Radial distance to the wall per frame; `None` on uncovered angles.
    pub wall_distance: Option<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_line(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn smoothed_csv(session: &RawPath, s: &SmoothedSession) -> String {
    let c = &s.combined;
    let mut out = String::from("frame,xhat,yhat,vx,vy,ax,ay,speed,arrest\n");
    for i in 0..c.len() {
        let row = [c.x[i], c.y[i], c.vx[i], c.vy[i], c.ax[i], c.ay[i], c.speed[i]];
        let mut fields = vec![session.frames[i].to_string()];
        fields.extend(row.iter().map(|&v| fmt_num(v)));
        fields.push(u8::from(s.arrests.mask[i]).to_string());
        csv_line(&mut out, &fields);
    }
    out
}

fn segments_csv(session: &RawPath, s: &SmoothedSession) -> String {
    let mut out = String::from("start,end,kind,max_speed\n");
    for seg in &s.segments.segments {
        csv_line(
            &mut out,
            &[
                session.frames[seg.start].to_string(),
                session.frames[seg.end].to_string(),
                seg.kind.to_string(),
                fmt_num(seg.max_speed),
            ],
        );
    }
    out
}

fn endpoints_csv(s: &SmoothedSession) -> String {
    let e = &s.endpoints;
    let mut out = String::from("total_distance_m,proportion_arrest,mean_speed_cm_s,arrests,lingering,progression,frames\n");
    csv_line(
        &mut out,
        &[
            fmt_num(e.total_distance_m),
            fmt_num(e.proportion_arrest),
            fmt_num(e.mean_speed_cm_s),
            e.arrests.to_string(),
            e.lingering.to_string(),
            e.progression.to_string(),
            e.frames.to_string(),
        ],
    );
    out
}

fn boundary_csv(b: &BoundaryEstimate) -> String {
    let mut out = format!("# center {} {}\nangle_rad,radius_cm\n", fmt_num(b.center.0), fmt_num(b.center.1));
    for ((&a, &r), &covered) in b.curve.alphas.iter().zip(&b.curve.radii).zip(&b.curve.covered) {
        if covered {
            csv_line(&mut out, &[fmt_num(a), fmt_num(r)]);
        }
    }
    out
}

fn wall_csv(session: &RawPath, d: &[Option<f64>]) -> String {
    let mut out = String::from("frame,wall_distance_cm\n");
    for (f, v) in session.frames.iter().zip(d) {
        csv_line(&mut out, &[f.to_string(), v.map(fmt_num).unwrap_or_default()]);
    }
    out
}

fn metrics_csv(session: &RawPath, s: &SmoothedSession, boundary: Option<&BoundaryEstimate>) -> String {
    let outliers = (0..s.lowess.len()).filter(|&i| s.lowess.is_outlier(i)).count();
    let mut rows = vec![
        ("frames", session.len().to_string()),
        ("fps", fmt_num(session.fps)),
        ("raw_distance_m", fmt_num(path_length(&session.x, &session.y) / 100.0)),
        ("lowess_distance_m", fmt_num(s.lowess.path_length_cm() / 100.0)),
        ("rrm_distance_m", fmt_num(path_length(&s.rrm_x, &s.rrm_y) / 100.0)),
        ("combined_distance_m", fmt_num(s.combined.path_length_cm() / 100.0)),
        ("outlier_frames", outliers.to_string()),
        ("arrest_frames", s.arrests.arrest_frames().to_string()),
        ("episodes", s.segments.episodes().len().to_string()),
    ];
    if let Some(b) = boundary {
        rows.push(("center_x_cm", fmt_num(b.center.0)));
        rows.push(("center_y_cm", fmt_num(b.center.1)));
        rows.push(("uncovered_arcs", b.curve.uncovered_arcs.len().to_string()));
    }
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Manifest text; it is itself a valid config file for reproducing the run.
pub fn manifest(config: &SessionConfig, input: Option<(&str, &str)>, warnings: &[String]) -> String {
    let mut out = format!("# pathforge {VERSION}\n");
    if let Some((name, digest)) = input {
        let _ = writeln!(out, "# input {name} sha256={digest}");
    }
    for w in warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    out.push_str(&config.to_kv());
    out
}

/// Runs smoothing, arrests, segmentation, endpoints and (when enabled) the
/// boundary, centre and wall distance for one session.
///
/// A boundary that cannot be estimated becomes a warning; the other outputs
/// are still produced. `input` names the source file and its SHA-256.
pub fn run_pipeline(config: &SessionConfig, session: &RawPath, input: Option<(&str, &str)>) -> Result<ResultBundle> {
    config.validate()?;
    if (session.fps - config.fps).abs() > 1e-6 * config.fps {
        return Err(Error::Config(format!(
            "session runs at {} fps but session.fps={}",
            session.fps, config.fps
        )));
    }
    let smoothed = smooth_session(session, &config.smoother()?)?;
    let mut warnings = Vec::new();
    let mut boundary = None;
    let mut wall_distance: Option<Vec<Option<f64>>> = None;
    if config.boundary_enabled {
        let c = &smoothed.combined;
        let points: Vec<(f64, f64)> = smoothed.segments.progression_frames().map(|i| (c.x[i], c.y[i])).collect();
        match estimate_boundary(&points, config.origin, &config.boundary()) {
            Ok(b) => {
                warnings.extend(b.warnings.iter().map(|w| format!("boundary: {w}")));
                wall_distance = Some(
                    c.x.iter()
                        .zip(&c.y)
                        .map(|(&x, &y)| distance_from_wall((x, y), &b).ok())
                        .collect(),
                );
                boundary = Some(b);
            }
            Err(e) => warnings.push(format!("boundary skipped: {e}")),
        }
    }

    let mut files = vec![
        ("smoothed.csv".to_string(), smoothed_csv(session, &smoothed)),
        ("segments.csv".to_string(), segments_csv(session, &smoothed)),
        ("endpoints.csv".to_string(), endpoints_csv(&smoothed)),
        ("metrics.csv".to_string(), metrics_csv(session, &smoothed, boundary.as_ref())),
    ];
    if let Some(b) = &boundary {
        files.push(("boundary.csv".to_string(), boundary_csv(b)));
    }
    if let Some(d) = &wall_distance {
        files.push(("wall_distance.csv".to_string(), wall_csv(session, d)));
    }
    files.push(("manifest.txt".to_string(), manifest(config, input, &warnings)));
    Ok(ResultBundle {
        smoothed,
        boundary,
        wall_distance,
        warnings,
        files,
    })
}

/// Writes `files` into `dir`, removing whatever was written if any write fails.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, body) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(())
}

impl ResultBundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_files(dir, &self.files)
    }
}

/// Parses, processes and writes one session file into `out_dir`.
pub fn process_file(config: &SessionConfig, input: &Path, out_dir: &Path) -> Result<ResultBundle> {
    let bytes = std::fs::read(input)?;
    let digest = sha256_hex(&bytes);
    let session = parse_session(input)?;
    let name = input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let bundle = run_pipeline(config, &session, Some((&name, &digest)))?;
    bundle.write(out_dir)?;
    Ok(bundle)
}

/// Thread cap from `PATHFORGE_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("PATHFORGE_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a rayon pool capped by `PATHFORGE_THREADS` (or the global pool).
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Processes every `*.csv` session in `input_dir`, writing each bundle to
/// `out_dir/<file stem>/`. Results are in file-name order.
pub fn run_batch(config: &SessionConfig, input_dir: &Path, out_dir: &Path) -> Result<Vec<(PathBuf, Result<ResultBundle>)>> {
    let files = session_files(input_dir)?;
    with_thread_cap(|| {
        files
            .par_iter()
            .map(|f| {
                let stem = f.file_stem().map_or_else(|| "session".into(), |s| s.to_string_lossy().into_owned());
                let result = process_file(config, f, &out_dir.join(stem));
                (f.clone(), result)
            })
            .collect()
    })
}
