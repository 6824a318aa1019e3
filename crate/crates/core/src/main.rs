use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stiefel_hermite::experiments::{
    bound_check, bound_csv, emit_report, run_qr_interp, run_snapshot_experiment, run_svd_interp,
    run_tangent_vs_manifold, run_transport_accuracy, transport_csv, ErrorReport, ExperimentConfig, Method,
    TRANSPORT_STEPS,
};
use stiefel_hermite::interpolate::Centering;
use stiefel_hermite::Error;

/// Quasi-cubic Hermite interpolation on the Stiefel manifold: experiment harness.
#[derive(Parser, Debug)]
#[command(name = "stiefel-hermite", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Round-trip accuracy of the finite-difference velocity transport over step sizes.
    TransportAccuracy(Common),
    /// Interpolate the Q factor of a random cubic matrix path.
    QrInterp(Common),
    /// Interpolate the truncated SVD of a constant-rank product path.
    SvdInterp(Common),
    /// Interpolate left singular vectors of function snapshots.
    SnapshotInterp(Common),
    /// Compare tangent-space and manifold errors of Hermite interpolation.
    TangentVsManifold(Common),
    /// Check observed distances against the curvature bound.
    BoundCheck(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CenteringArg {
    Q,
    P,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Number of Chebyshev sample nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Sampling interval as `a,b`.
    #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
    interval: Option<(f64, f64)>,
    #[arg(long)]
    seed: Option<u64>,
    /// Finite-difference step for the velocity transport.
    #[arg(long)]
    h: Option<f64>,
    /// Convergence threshold of the Stiefel log.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    centering: Option<CenteringArg>,
    /// Comma-separated subset of hermite,geodesic,rbf.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    rbf_shape: Option<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b got '{s}'"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("bad lower end '{a}': {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("bad upper end '{b}': {e}"))?;
    Ok((a, b))
}

impl Common {
    fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig, Error> {
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.nodes {
            cfg.num_nodes = v;
        }
        if let Some(v) = self.interval {
            cfg.interval = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(c) = self.centering {
            cfg.centering = match c {
                CenteringArg::Q => Centering::QCentered,
                CenteringArg::P => Centering::PCentered,
            };
        }
        if let Some(ms) = &self.methods {
            cfg.methods = ms.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
            if cfg.methods.is_empty() {
                return Err(Error::Precondition("no methods selected".into()));
            }
        }
        if let Some(v) = self.rbf_shape {
            cfg.rbf_shape = v;
        }
        Ok(cfg)
    }
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io { path: path.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish_report(report: &ErrorReport, out: &Option<PathBuf>) -> Result<ExitCode, Error> {
    match out {
        Some(path) => emit_report(report, path)?,
        None => print!("{}", report.to_csv()),
    }
    for (name, idx) in &report.log_failures {
        eprintln!("warning: {name}: Riemannian log did not converge for indices {idx:?}");
    }
    for f in &report.failures {
        eprintln!("error: {} failed: {}", f.method, f.message);
    }
    Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::TransportAccuracy(c) => {
            let cfg = c.apply(ExperimentConfig::transport_default())?;
            let rows = run_transport_accuracy(&cfg, &TRANSPORT_STEPS)?;
            write_out(&c.out, &transport_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::QrInterp(c) => finish_report(&run_qr_interp(&c.apply(ExperimentConfig::default())?)?, &c.out),
        Command::SvdInterp(c) => finish_report(&run_svd_interp(&c.apply(ExperimentConfig::svd_default())?)?, &c.out),
        Command::SnapshotInterp(c) => {
            finish_report(&run_snapshot_experiment(&c.apply(ExperimentConfig::snapshot_default())?)?, &c.out)
        }
        Command::TangentVsManifold(c) => {
            finish_report(&run_tangent_vs_manifold(&c.apply(ExperimentConfig::svd_default())?)?, &c.out)
        }
        Command::BoundCheck(c) => {
            let n = c.n.unwrap_or(40);
            let r = c.r.unwrap_or(4);
            let cases = [(0.3, 0.3, 0.1), (0.3, 0.3, 0.05), (0.2, 0.2, 0.2), (0.1, 0.1, 0.3)];
            let rows = bound_check(n, r, &cases, c.seed.unwrap_or(0))?;
            write_out(&c.out, &bound_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_convergence_failure() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
