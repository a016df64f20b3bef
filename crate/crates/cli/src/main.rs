//! `pathforge`: smooth tracking sessions, estimate arena boundaries and run
//! the simulation studies from the command line.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors (including failed validations).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathforge::io::bundle::{process_file, VERSION};
use pathforge::io::report;
use pathforge::io::{parse_session, run_batch, run_pipeline, with_thread_cap, write_files, SessionConfig};
use pathforge::radius_mse::{validate_mse, validation_grid};
use pathforge::simulator::{calibrate_stationary_sigma, run_scenario, simulate_all, standard_scenarios, Scenario};
use pathforge::{Error, ResultBundle};

#[derive(Parser)]
#[command(name = "pathforge", version = VERSION, about = "Smoothing, arrest detection and arena-boundary estimation for tracking data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Key-value config file (`key=value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set lowess.half_window=12`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    fps: Option<f64>,
    #[arg(long, global = true)]
    grid_cm: Option<f64>,
    #[arg(long, global = true)]
    half_window: Option<usize>,
    #[arg(long, global = true)]
    robustness_iters: Option<usize>,
    /// Running-median half windows, e.g. `3,2,1,1`.
    #[arg(long, global = true)]
    rrm_schedule: Option<String>,
    #[arg(long, global = true)]
    min_arrest_s: Option<f64>,
    #[arg(long, global = true)]
    lingering_speed: Option<f64>,
    #[arg(long, global = true)]
    sectors: Option<usize>,
    #[arg(long, global = true)]
    quantile: Option<f64>,
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
    #[arg(long, global = true)]
    min_count: Option<usize>,
    /// Working origin for the boundary, `x,y` in cm.
    #[arg(long, global = true, allow_hyphen_values = true)]
    origin: Option<String>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    target_p: Option<f64>,
    #[arg(long, global = true)]
    frames: Option<usize>,
    #[arg(long, global = true)]
    outlier_rate: Option<f64>,
    #[arg(long, global = true)]
    replications: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Smoothed positions, velocities, accelerations and arrest flags.
    Smooth(Input),
    /// Arrest intervals detected by the repeated running median.
    Arrests(Input),
    /// Arrest, lingering and progression segments.
    Segments(Input),
    /// Session endpoints: distance, arrest proportion, mean speed, counts.
    Endpoints(Input),
    /// Arena boundary curve and centre from progression locations.
    Boundary(Input),
    /// Radial distance from the estimated wall for every frame.
    WallDistance(Input),
    /// Full result bundle for one session file or a directory of them.
    Run(Input),
    /// Write simulated sessions with their ground truth.
    Simulate,
    /// Score raw, LOWESS, RRM and combined estimates on simulated sessions.
    Evaluate {
        #[arg(long, value_enum, default_value_t = Protocol::Standard)]
        protocol: Protocol,
    },
    /// Closed-form against Monte Carlo MSE of the radius estimators.
    MseTable {
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// As `mse-table` with a 3-SE pass/fail verdict; exits 2 on any failure.
    ValidateMse {
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
    },
}

#[derive(Args)]
struct Input {
    /// Session CSV (`frame,t,x,y`); `run` also accepts a directory.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    /// The five noise / arrest-proportion configurations.
    Standard,
    /// Motionless animal, noise calibrated to a 113.9 m raw distance.
    Anesthetized,
    /// One configuration from the `simulator.*` keys.
    Config,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

impl Common {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        push("session.fps", self.fps.map(|x| x.to_string()));
        push("session.grid_cm", self.grid_cm.map(|x| x.to_string()));
        push("lowess.half_window", self.half_window.map(|x| x.to_string()));
        push("lowess.robustness_iters", self.robustness_iters.map(|x| x.to_string()));
        push("rrm.schedule", self.rrm_schedule.clone());
        push("arrest.min_duration_s", self.min_arrest_s.map(|x| x.to_string()));
        push("segments.lingering_speed_cm_s", self.lingering_speed.map(|x| x.to_string()));
        push("boundary.sectors", self.sectors.map(|x| x.to_string()));
        push("boundary.quantile", self.quantile.map(|x| x.to_string()));
        push("boundary.bandwidth", self.bandwidth.map(|x| x.to_string()));
        push("boundary.min_count", self.min_count.map(|x| x.to_string()));
        push("boundary.origin", self.origin.clone());
        push("simulator.sigma", self.sigma.map(|x| x.to_string()));
        push("simulator.target_p", self.target_p.map(|x| x.to_string()));
        push("simulator.frames", self.frames.map(|x| x.to_string()));
        push("simulator.outlier_rate", self.outlier_rate.map(|x| x.to_string()));
        push("simulator.replications", self.replications.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        v
    }

    fn load_config(&self) -> CliResult<SessionConfig> {
        let mut cfg = match &self.config {
            Some(p) => SessionConfig::load(p)?,
            None => SessionConfig::default(),
        };
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        for a in &self.set {
            cfg.set_assignment(a)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Failure::Usage("--out <DIR> is required for this command".into()))
    }
}

fn session_bundle(cfg: &SessionConfig, input: &Path) -> CliResult<ResultBundle> {
    let bytes = std::fs::read(input).map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
    let session = parse_session(input)?;
    let name = input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    Ok(run_pipeline(cfg, &session, Some((&name, &pathforge::io::bundle::sha256_hex(&bytes))))?)
}

fn pick(bundle: &ResultBundle, names: &[&str]) -> Vec<(String, String)> {
    bundle
        .files
        .iter()
        .filter(|(n, _)| names.contains(&n.as_str()) || n == "manifest.txt")
        .cloned()
        .collect()
}

fn arrests_csv(bundle: &ResultBundle, fps: f64) -> String {
    let mut out = String::from("start,end,duration_s\n");
    for (s, e) in bundle.smoothed.arrests.runs() {
        let _ = writeln!(out, "{s},{e},{}", pathforge::io::fmt_num((e - s + 1) as f64 / fps));
    }
    out
}

fn print_warnings(bundle: &ResultBundle) {
    for w in &bundle.warnings {
        eprintln!("warning: {w}");
    }
}

fn single_session(common: &Common, input: &Path, command: &Command) -> CliResult {
    let cfg = common.load_config()?;
    let out = common.out_dir()?;
    let bundle = session_bundle(&cfg, input)?;
    print_warnings(&bundle);
    let e = &bundle.smoothed.endpoints;
    let files = match command {
        Command::Smooth(_) => {
            println!("smoothed {} frames; {} arrest frames", e.frames, bundle.smoothed.arrests.arrest_frames());
            pick(&bundle, &["smoothed.csv"])
        }
        Command::Arrests(_) => {
            let runs = bundle.smoothed.arrests.runs();
            println!("{} arrests covering {} frames", runs.len(), bundle.smoothed.arrests.arrest_frames());
            let mut files = pick(&bundle, &[]);
            files.insert(0, ("arrests.csv".into(), arrests_csv(&bundle, cfg.fps)));
            files
        }
        Command::Segments(_) => {
            println!("{} arrest, {} lingering, {} progression segments", e.arrests, e.lingering, e.progression);
            pick(&bundle, &["segments.csv"])
        }
        Command::Endpoints(_) => {
            println!(
                "distance {:.3} m, arrest proportion {:.4}, mean speed {:.3} cm/s",
                e.total_distance_m, e.proportion_arrest, e.mean_speed_cm_s
            );
            pick(&bundle, &["endpoints.csv"])
        }
        Command::Boundary(_) | Command::WallDistance(_) => {
            let b = bundle
                .boundary
                .as_ref()
                .ok_or_else(|| Failure::Data("boundary could not be estimated (see warnings)".into()))?;
            println!(
                "centre ({:.3}, {:.3}) cm; mean radius {:.3} cm; {} uncovered arcs",
                b.center.0,
                b.center.1,
                b.curve.radii.iter().sum::<f64>() / b.curve.radii.len() as f64,
                b.curve.uncovered_arcs.len()
            );
            if matches!(command, Command::Boundary(_)) {
                pick(&bundle, &["boundary.csv"])
            } else {
                pick(&bundle, &["wall_distance.csv"])
            }
        }
        _ => unreachable!("not a single-session command"),
    };
    write_files(out, &files)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn run_command(common: &Common, input: &Path) -> CliResult {
    let cfg = common.load_config()?;
    let out = common.out_dir()?;
    if input.is_dir() {
        let results = run_batch(&cfg, input, out)?;
        let mut failed = 0;
        for (file, r) in &results {
            match r {
                Ok(b) => {
                    print_warnings(b);
                    println!("{}: {:.3} m", file.display(), b.smoothed.endpoints.total_distance_m);
                }
                Err(e) => {
                    failed += 1;
                    eprintln!("error: {}: {e}", file.display());
                }
            }
        }
        println!("processed {} sessions, {failed} failed", results.len());
        if failed > 0 {
            return Err(Failure::Data(format!("{failed} sessions failed")));
        }
        Ok(())
    } else {
        let bundle = process_file(&cfg, input, out)?;
        print_warnings(&bundle);
        println!(
            "distance {:.3} m, arrest proportion {:.4}; wrote {} files to {}",
            bundle.smoothed.endpoints.total_distance_m,
            bundle.smoothed.endpoints.proportion_arrest,
            bundle.files.len(),
            out.display()
        );
        Ok(())
    }
}

fn simulate_command(common: &Common) -> CliResult {
    let cfg = common.load_config()?;
    let out = common.out_dir()?;
    let scenario = cfg.scenario();
    let paths = with_thread_cap(|| simulate_all(&scenario, cfg.seed))??;
    for p in &paths {
        write_files(&out.join(format!("rep_{:03}", p.replication)), &report::simulated_path_files(p)?)?;
    }
    write_files(out, &[("manifest.txt".into(), pathforge::io::bundle::manifest(&cfg, None, &[]))])?;
    let truth: Vec<f64> = paths.iter().map(|p| p.truth.distance_m()).collect();
    println!(
        "simulated {} sessions of {} frames; mean true distance {:.2} m; wrote to {}",
        paths.len(),
        scenario.frames,
        truth.iter().sum::<f64>() / truth.len().max(1) as f64,
        out.display()
    );
    Ok(())
}

fn evaluate_command(common: &Common, protocol: Protocol) -> CliResult {
    let cfg = common.load_config()?;
    let params = cfg.smoother()?;
    let mut scenarios = match protocol {
        Protocol::Standard => standard_scenarios(),
        Protocol::Anesthetized => {
            let frames = Scenario::anesthetized(0.6).frames;
            vec![Scenario::anesthetized(calibrate_stationary_sigma(113.9, frames, cfg.grid_cm)?)]
        }
        Protocol::Config => vec![cfg.scenario()],
    };
    if let Some(r) = common.replications {
        scenarios.iter_mut().for_each(|s| s.replications = r);
    }
    let metrics = with_thread_cap(|| {
        scenarios
            .iter()
            .map(|s| run_scenario(s, cfg.seed, &params))
            .collect::<pathforge::Result<Vec<_>>>()
    })??;
    print!("{}", report::summary_table(&metrics));
    if let Some(out) = &common.out {
        let mut files = vec![("summary.csv".to_string(), report::summary_csv(&metrics))];
        for (i, m) in metrics.iter().enumerate() {
            files.push((format!("replications_{}.csv", i + 1), report::replications_csv(m)));
        }
        files.push(("manifest.txt".into(), pathforge::io::bundle::manifest(&cfg, None, &[])));
        write_files(out, &files)?;
        println!("wrote {} files to {}", files.len(), out.display());
    }
    Ok(())
}

fn mse_command(common: &Common, reps: usize, verdict: bool) -> CliResult {
    let cfg = common.load_config()?;
    let checks = with_thread_cap(|| validate_mse(&validation_grid(), reps, cfg.seed))??;
    print!("{}", report::mse_table(&checks));
    if let Some(out) = &common.out {
        write_files(out, &[("mse.csv".into(), report::mse_csv(&checks))])?;
    }
    let failed = checks.iter().filter(|c| !c.passes()).count();
    if verdict {
        println!("{} of {} grid points within 3 SE", checks.len() - failed, checks.len());
        if failed > 0 {
            return Err(Failure::Data(format!("{failed} grid points outside 3 SE")));
        }
    }
    Ok(())
}

fn execute(command: &Command, common: &Common) -> CliResult {
    match command {
        Command::Run(i) => run_command(common, &i.input),
        Command::Simulate => simulate_command(common),
        Command::Evaluate { protocol } => evaluate_command(common, *protocol),
        Command::MseTable { reps } => mse_command(common, *reps, false),
        Command::ValidateMse { reps } => mse_command(common, *reps, true),
        c @ (Command::Smooth(i)
        | Command::Arrests(i)
        | Command::Segments(i)
        | Command::Endpoints(i)
        | Command::Boundary(i)
        | Command::WallDistance(i)) => single_session(common, &i.input, c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command, &cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
