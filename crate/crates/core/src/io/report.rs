//! Text and CSV renderings of simulation and radius-MSE results.

use std::fmt::Write as _;

use super::fmt_num;
use super::session::write_session_to;
use crate::error::Result;
use crate::radius_mse::MseCheck;
use crate::simulator::{Method, SimulatedPath, SimulationMetrics};

/// `truth.csv`, `observed.csv` (session format) and `outliers.csv` for one
/// simulated session.
pub fn simulated_path_files(path: &SimulatedPath) -> Result<Vec<(String, String)>> {
    let t = &path.truth;
    let mut truth = String::from("frame,x,y,speed,arrest\n");
    for i in 0..t.len() {
        let _ = writeln!(
            truth,
            "{i},{},{},{},{}",
            fmt_num(t.x[i]),
            fmt_num(t.y[i]),
            fmt_num(t.speed[i]),
            u8::from(t.arrest[i])
        );
    }
    let mut observed = Vec::new();
    write_session_to(&mut observed, &path.observed)?;
    let mut outliers = String::from("frame\n");
    for i in &path.outliers {
        let _ = writeln!(outliers, "{i}");
    }
    Ok(vec![
        ("truth.csv".into(), truth),
        ("observed.csv".into(), String::from_utf8_lossy(&observed).into_owned()),
        ("outliers.csv".into(), outliers),
    ])
}

/// One row per replication with the truth and every method's estimates.
pub fn replications_csv(metrics: &SimulationMetrics) -> String {
    let mut out = String::from("replication,true_distance_m,true_p");
    for m in Method::ALL {
        let _ = write!(out, ",{0}_distance_m,{0}_p", m.as_str());
    }
    out.push_str(",outliers_injected,outliers_flagged,clean_frames,clean_flagged\n");
    for r in &metrics.replications {
        let _ = write!(out, "{},{},{}", r.replication, fmt_num(r.true_distance_m), fmt_num(r.true_proportion));
        for m in Method::ALL {
            let e = r.estimate(m);
            let _ = write!(out, ",{},{}", fmt_num(e.distance_m), fmt_num(e.proportion));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            r.outliers_injected, r.outliers_flagged, r.clean_frames, r.clean_flagged
        );
    }
    out
}

/// Long-format aggregate table, one row per configuration and method.
pub fn summary_csv(all: &[SimulationMetrics]) -> String {
    let mut out = String::from("config,method,mean_distance_m,sd_distance_m,mse_distance,mean_p,mse_p,true_distance_m,true_sd_m,true_p\n");
    for m in all {
        for s in &m.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                m.label,
                s.method.as_str(),
                fmt_num(s.mean_distance_m),
                fmt_num(s.sd_distance_m),
                fmt_num(s.mse_distance),
                fmt_num(s.mean_proportion),
                fmt_num(s.mse_proportion),
                fmt_num(m.mean_true_distance_m),
                fmt_num(m.sd_true_distance_m),
                fmt_num(m.mean_true_proportion)
            );
        }
    }
    out
}

fn row(out: &mut String, label: &str, cells: impl Iterator<Item = String>) {
    let _ = write!(out, "{label:<22}");
    for c in cells {
        let _ = write!(out, "{c:>14}");
    }
    out.push('\n');
}

/// Method-by-configuration tables of distance and arrest proportion.
pub fn summary_table(all: &[SimulationMetrics]) -> String {
    let mut out = String::new();
    row(&mut out, "distance (m)", all.iter().map(|m| m.label.clone()));
    row(&mut out, "true  ave", all.iter().map(|m| format!("{:.2}", m.mean_true_distance_m)));
    row(&mut out, "true  sd", all.iter().map(|m| format!("{:.2}", m.sd_true_distance_m)));
    for method in Method::ALL {
        row(&mut out, &format!("{:<9} ave", method.as_str()), all.iter().map(|m| format!("{:.2}", m.summary(method).mean_distance_m)));
        row(&mut out, &format!("{:<9} sd", method.as_str()), all.iter().map(|m| format!("{:.2}", m.summary(method).sd_distance_m)));
        row(&mut out, &format!("{:<9} mse", method.as_str()), all.iter().map(|m| format!("{:.4}", m.summary(method).mse_distance)));
    }
    out.push('\n');
    row(&mut out, "arrest proportion", all.iter().map(|m| m.label.clone()));
    row(&mut out, "true  ave", all.iter().map(|m| format!("{:.4}", m.mean_true_proportion)));
    for method in Method::ALL {
        row(&mut out, &format!("{:<9} ave", method.as_str()), all.iter().map(|m| format!("{:.4}", m.summary(method).mean_proportion)));
        row(&mut out, &format!("{:<9} mse", method.as_str()), all.iter().map(|m| format!("{:.6}", m.summary(method).mse_proportion)));
    }
    out
}

pub fn mse_csv(checks: &[MseCheck]) -> String {
    let mut out = String::from("model,estimator,closed_form,empirical,se,reps,pass\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.model.label(),
            c.estimator.as_str(),
            fmt_num(c.closed_form),
            fmt_num(c.empirical.mse),
            fmt_num(c.empirical.se),
            c.empirical.reps,
            c.passes()
        );
    }
    out
}

pub fn mse_table(checks: &[MseCheck]) -> String {
    let mut out = format!(
        "{:<40} {:<14} {:>14} {:>14} {:>12} {:>6}\n",
        "model", "estimator", "closed form", "empirical", "se", "pass"
    );
    for c in checks {
        let _ = writeln!(
            out,
            "{:<40} {:<14} {:>14.6e} {:>14.6e} {:>12.3e} {:>6}",
            c.model.label(),
            c.estimator.as_str(),
            c.closed_form,
            c.empirical.mse,
            c.empirical.se,
            if c.passes() { "yes" } else { "NO" }
        );
    }
    out
}
