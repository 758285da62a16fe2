use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};

use spinc_core::config::parse_config;
use spinc_core::linalg::set_strict_reductions;
use spinc_core::report::write_report;
use spinc_core::runner::run;

/// Spectral checks for spin^c Dirac and magnetic Schrodinger operators.
#[derive(Parser, Debug)]
#[command(name = "spinc-lab", version)]
struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the k sweep.
    #[arg(long)]
    threads: Option<usize>,
    /// Sequential floating-point reductions, for bit-identical reports.
    #[arg(long)]
    strict_float: bool,
    /// Suite list overriding the config, e.g. `gap,decay` or `all`.
    #[arg(long)]
    suite: Option<String>,
}

const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    set_strict_reductions(args.strict_float);
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            error!("{}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let text = match &args.suite {
        Some(suite) => with_suite(&text, suite),
        None => text,
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            error!("{}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(out) = args.out {
        cfg.output = out;
    }
    info!("model {:?}, k = {}..={}, suites {:?}", cfg.model, cfg.k_min, cfg.k_max, cfg.suites);
    let output = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = write_report(&cfg.output, &output.report, &output.spectra) {
        error!("writing {}: {e}", cfg.output.display());
        return ExitCode::from(1);
    }
    for f in output.report["failures"].as_array().into_iter().flatten() {
        error!("{}", f.as_str().unwrap_or_default());
    }
    info!("status {:?}, report in {}", output.status, cfg.output.display());
    ExitCode::from(output.status.exit_code() as u8)
}

/// The config text with its `suite` entry replaced, so the override is validated like the file.
fn with_suite(text: &str, suite: &str) -> String {
    let mut out = String::new();
    let mut in_run = false;
    let mut placed = false;
    for line in text.lines() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.starts_with('[') {
            if in_run && !placed {
                out.push_str(&format!("suite = {suite}\n"));
                placed = true;
            }
            in_run = body == "[run]";
        }
        if in_run && body.split('=').next().map(str::trim) == Some("suite") {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    if !placed {
        if !in_run {
            out.push_str("[run]\n");
        }
        out.push_str(&format!("suite = {suite}\n"));
    }
    out
}
