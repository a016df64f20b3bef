//! Tracking-session CSV files: header `frame,t,x,y`, seconds and centimetres.
//!
//! Leading comment lines of the form `# fps=25 grid_cm=1` are optional; they
//! pin the frame rate and grid so a written file reads back exactly.
//! Without them the rate comes from the first two timestamps.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kinematics::RawPath;

const HEADER: [&str; 4] = ["frame", "t", "x", "y"];
const SPACING_TOL: f64 = 1e-6;

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Metadata {
    fps: Option<f64>,
    grid_cm: Option<f64>,
}

fn read_metadata(text: &str, path: &Path) -> Result<Metadata> {
    let mut meta = Metadata::default();
    for (n, line) in text.lines().enumerate() {
        let Some(body) = line.trim_start().strip_prefix('#') else {
            break;
        };
        for token in body.split_whitespace() {
            let Some((k, v)) = token.split_once('=') else {
                continue;
            };
            let value = || -> Result<f64> {
                v.parse()
                    .map_err(|_| parse_err(path, n as u64 + 1, format!("invalid {k} value {v:?}")))
            };
            match k {
                "fps" => meta.fps = Some(value()?),
                "grid_cm" => meta.grid_cm = Some(value()?),
                _ => {}
            }
        }
    }
    Ok(meta)
}

/// Parses session text; `path` only labels errors.
pub fn read_session(text: &str, path: &Path) -> Result<RawPath> {
    let meta = read_metadata(text, path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header_line = reader.position().line().max(1);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, header_line, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        let line = headers.position().map_or(1, |p| p.line());
        return Err(parse_err(path, line, format!("expected header frame,t,x,y, got {:?}", headers.iter().collect::<Vec<_>>().join(","))));
    }

    let mut frames = Vec::new();
    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut lines = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(parse_err(path, line, e.to_string()));
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, got {}", record.len())));
        }
        let field = |i: usize| -> Result<f64> {
            let s = &record[i];
            if s.is_empty() {
                return Err(parse_err(path, line, format!("missing {}", HEADER[i])));
            }
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("invalid {} {s:?}", HEADER[i])))
        };
        let frame: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid frame {:?}", &record[0])))?;
        if let Some(&prev) = frames.last() {
            if frame <= prev {
                return Err(parse_err(path, line, format!("frame {frame} does not follow {prev}")));
            }
        }
        frames.push(frame);
        t.push(field(1)?);
        x.push(field(2)?);
        y.push(field(3)?);
        lines.push(line);
    }
    if frames.is_empty() {
        return Err(parse_err(path, header_line, "no data rows"));
    }

    let fps = match meta.fps {
        Some(f) => f,
        None if t.len() >= 2 => {
            let raw = 1.0 / (t[1] - t[0]);
            if !(raw > 0.0 && raw.is_finite()) {
                return Err(parse_err(path, lines[1], "timestamps do not increase"));
            }
            (raw * 1e6).round() / 1e6
        }
        None => return Err(parse_err(path, lines[0], "one row and no fps metadata: frame rate unknown")),
    };
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(parse_err(path, 1, format!("fps must be positive, got {fps}")));
    }
    let dt = 1.0 / fps;
    for i in 1..t.len() {
        if ((t[i] - t[i - 1]) - dt).abs() > SPACING_TOL {
            return Err(parse_err(
                path,
                lines[i],
                format!("irregular spacing: step {} s, expected {dt} s", t[i] - t[i - 1]),
            ));
        }
    }
    let session = RawPath {
        frames,
        t,
        x,
        y,
        fps,
        grid_cm: meta.grid_cm.unwrap_or(1.0),
    };
    session.validate()?;
    Ok(session)
}

pub fn parse_session(path: &Path) -> Result<RawPath> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    read_session(&text, path)
}

/// Writes `session` so that [`read_session`] restores it exactly.
pub fn write_session_to(mut out: impl Write, session: &RawPath) -> Result<()> {
    writeln!(out, "# fps={} grid_cm={}", session.fps, session.grid_cm)?;
    writeln!(out, "frame,t,x,y")?;
    for i in 0..session.len() {
        writeln!(out, "{},{},{},{}", session.frames[i], session.t[i], session.x[i], session.y[i])?;
    }
    Ok(())
}

pub fn write_session(path: &Path, session: &RawPath) -> Result<()> {
    let mut buf = Vec::with_capacity(session.len() * 24);
    write_session_to(&mut buf, session)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Session files (`*.csv`) directly inside `dir`, sorted by name.
pub fn session_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<RawPath> {
        read_session(text, Path::new("s.csv"))
    }

    fn line_of(err: Error) -> u64 {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("not a parse error: {other}"),
        }
    }

    #[test]
    fn three_rows() {
        let p = read("frame,t,x,y\n0,0,1,2\n1,0.04,1,3\n2,0.08,2,3\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.fps, 25.0);
        assert_eq!(p.y, vec![2.0, 3.0, 3.0]);
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(line_of(read("frame,t,x,y\n0,0,1,2\n0,0.04,1,3\n").unwrap_err()), 3);
        assert_eq!(line_of(read("frame,t,x,y\n0,0,1,2\n1,0.04,,3\n").unwrap_err()), 3);
        assert_eq!(line_of(read("frame,t,x,y\n0,0,1,2\n1,0.04,1,3\n2,0.1,1,3\n").unwrap_err()), 4);
        assert_eq!(line_of(read("frame,time,x,y\n0,0,1,2\n").unwrap_err()), 1);
        assert_eq!(line_of(read("# fps=25\nframe,t,x,y\n0,0,1,2\n1,0.04,x,3\n").unwrap_err()), 4);
    }

    #[test]
    fn metadata_round_trip() {
        let p = RawPath::from_xy(vec![0.1, -3.0, 7.25], vec![1e-9, 2.0, 1.0 / 3.0], 29.97).unwrap();
        let mut buf = Vec::new();
        write_session_to(&mut buf, &p).unwrap();
        assert_eq!(read(std::str::from_utf8(&buf).unwrap()).unwrap(), p);
    }

    #[test]
    fn single_row_needs_metadata() {
        assert!(read("frame,t,x,y\n0,0,1,2\n").is_err());
        assert_eq!(read("# fps=25\nframe,t,x,y\n0,0,1,2\n").unwrap().len(), 1);
    }
}
