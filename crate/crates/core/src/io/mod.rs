//! Configuration, session files and result bundles.

pub mod bundle;
pub mod config;
pub mod report;
pub mod session;

pub use bundle::{run_batch, run_pipeline, thread_cap, with_thread_cap, write_files, ResultBundle};
pub use config::SessionConfig;
pub use session::{parse_session, read_session, session_files, write_session};

/// Formats `v` with nine significant digits, without trailing zeros.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}
