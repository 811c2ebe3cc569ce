use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use cs_lab::commands::{
    run_bounds_command, run_decode_demo, run_sweep_command, run_tails_command,
    run_thresholds_command, PointArgs,
};
use cs_lab::config::build_experiment_config;
use cs_lab::{EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};
use cs_lab_core::{DecodePolicy, Metric, Regime};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cs-lab",
    about = "Sparse support recovery lab: Monte Carlo sweeps, tail checks, analytic bounds",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte Carlo sweep and write the aggregate CSV.
    Sweep {
        /// Flat key = value config file (kebab-case experiment keys).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Inline key=value overrides; they win over the config file.
        #[arg(value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Sample chi-square-style sums and compare deviation frequencies to
    /// their exp(-lambda) bounds.
    Tails {
        /// Degrees of freedom of the sampled sum.
        #[arg(long)]
        k: usize,
        /// Comma-separated lambda grid.
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the analytic bounds and thresholds at one parameter point.
    Bounds {
        #[arg(long)]
        metric: Metric,
        #[arg(long, default_value = "linear")]
        regime: Regime,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// Signal-to-noise ratio P/nu^2 (sets P = 1).
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        power: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long)]
        zeta: Option<f64>,
        /// Union-bound target for the achievability bisection.
        #[arg(long, default_value_t = 1e-2)]
        target: f64,
    },
    /// Print achievability (bisected) and converse (closed-form) measurement
    /// counts side by side.
    Thresholds {
        #[arg(long)]
        metric: Metric,
        #[arg(long, default_value = "linear")]
        regime: Regime,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long)]
        power: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, default_value_t = 1e-2)]
        target: f64,
    },
    /// Draw one seeded instance, decode it, and print the full report.
    DecodeDemo {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        nu: f64,
        #[arg(long, default_value_t = 1.0)]
        power: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "1")]
        metric: Metric,
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, default_value = "min-deviation")]
        policy: DecodePolicy,
    },
}

fn dispatch(cli: Cli) -> Result<Vec<String>, (i32, String)> {
    match cli.cmd {
        Cmd::Sweep {
            config,
            out,
            overrides,
        } => {
            let cfg = build_experiment_config(config.as_deref(), &overrides)
                .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            run_sweep_command(&cfg, &out).map_err(|e| (EXIT_RUNTIME, e.to_string()))
        }
        Cmd::Tails {
            k,
            lambda,
            trials,
            seed,
            out,
        } => {
            if k == 0 || trials == 0 || lambda.is_empty() {
                return Err((
                    EXIT_CONFIG,
                    "config error for key `k`: k, trials and lambda must be non-empty/positive"
                        .to_string(),
                ));
            }
            if lambda.iter().any(|l| *l < 0.0) {
                return Err((
                    EXIT_CONFIG,
                    "config error for key `lambda`: entries must be non-negative".to_string(),
                ));
            }
            run_tails_command(k, &lambda, trials, seed, &out)
                .map_err(|e| (EXIT_RUNTIME, e.to_string()))
        }
        Cmd::Bounds {
            metric,
            regime,
            l,
            m,
            beta,
            n,
            snr,
            nu,
            power,
            alpha,
            gamma,
            zeta,
            target,
        } => {
            let args = PointArgs {
                metric,
                regime,
                l,
                m,
                beta,
                n,
                snr,
                nu,
                power,
                alpha,
                gamma,
                zeta,
                target,
            };
            run_bounds_command(&args).map_err(classify)
        }
        Cmd::Thresholds {
            metric,
            regime,
            l,
            m,
            beta,
            n,
            snr,
            nu,
            power,
            alpha,
            gamma,
            zeta,
            target,
        } => {
            let args = PointArgs {
                metric,
                regime,
                l,
                m,
                beta,
                n,
                snr,
                nu,
                power,
                alpha,
                gamma,
                zeta,
                target,
            };
            run_thresholds_command(&args).map_err(classify)
        }
        Cmd::DecodeDemo {
            m,
            l,
            n,
            nu,
            power,
            seed,
            metric,
            alpha,
            gamma,
            zeta,
            policy,
        } => run_decode_demo(m, l, n, nu, power, seed, metric, alpha, gamma, zeta, policy)
            .map_err(classify),
    }
}

/// Config errors exit 1, everything else is a runtime failure (exit 2).
fn classify(e: Box<dyn std::error::Error>) -> (i32, String) {
    if e.downcast_ref::<cs_lab::config::ConfigError>().is_some() {
        (EXIT_CONFIG, e.to_string())
    } else {
        (EXIT_RUNTIME, e.to_string())
    }
}

fn main() -> ExitCode {
    if let Err(e) = cs_lab::configure_threads() {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::from(EXIT_OK as u8)
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(EXIT_CONFIG as u8)
                }
            }
        }
    };
    match dispatch(cli) {
        Ok(lines) => {
            // Tolerate a closed pipe (e.g. `cs-lab ... | head`).
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in lines {
                if writeln!(out, "{line}").is_err() {
                    break;
                }
            }
            ExitCode::from(EXIT_OK as u8)
        }
        Err((code, message)) => {
            eprintln!("{message}");
            ExitCode::from(code as u8)
        }
    }
}
