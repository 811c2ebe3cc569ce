//! Subcommand implementations. Each returns the lines it wants on stdout so
//! the binary and the tests share one code path.

use crate::config::ConfigError;
use crate::csv::{emit_csv, Field, SWEEP_COLUMNS, TAILS_COLUMNS};
use cs_lab_core::bounds::{bound_report, default_zeta, RegimePoint};
use cs_lab_core::decoder::{score_metrics, typicality_decode, ScanLimits, TypicalityParams};
use cs_lab_core::experiments::{run_sweep, tail_check, AggregateRow};
use cs_lab_core::signal::derive_seed;
use cs_lab_core::{
    DecodePolicy, ExperimentConfig, MagnitudeProfile, MeasurementInstance, Metric, Regime,
    SeedRecord, SignalRegime,
};
use std::error::Error;
use std::path::Path;

pub type CmdResult = Result<Vec<String>, Box<dyn Error>>;

pub fn sweep_rows_to_fields(rows: &[AggregateRow]) -> Vec<Vec<Field>> {
    rows.iter()
        .map(|row| {
            vec![
                Field::Count(row.point.id as u64),
                Field::Count(row.point.m as u64),
                Field::Count(row.point.l as u64),
                Field::Count(row.point.n as u64),
                Field::Real(row.beta),
                Field::Real(row.nu),
                Field::Real(row.power),
                Field::Count(u64::from(row.metric.number())),
                Field::Real(row.alpha),
                Field::Real(row.gamma),
                Field::Real(row.zeta),
                Field::Text(row.policy.as_str().to_string()),
                Field::Count(row.trials as u64),
                Field::Real(row.rate[0]),
                Field::Real(row.rate[1]),
                Field::Real(row.rate[2]),
                Field::Real(row.wilson_low),
                Field::Real(row.wilson_high),
                Field::Real(row.emp_atypicality),
                Field::Real(row.bound_atypicality),
                Field::Real(row.mean_typical_sets),
                Field::Count(row.wall_ms),
            ]
        })
        .collect()
}

pub fn run_sweep_command(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let rows = run_sweep(cfg)?;
    let fields = sweep_rows_to_fields(&rows);
    emit_csv(&fields, SWEEP_COLUMNS, out)?;
    Ok(vec![format!(
        "wrote {} rows to {}",
        rows.len(),
        out.display()
    )])
}

pub fn run_tails_command(
    k: usize,
    lambdas: &[f64],
    trials: usize,
    seed: u64,
    out: &Path,
) -> CmdResult {
    let rows = tail_check(k, trials, lambdas, seed);
    let fields: Vec<Vec<Field>> = rows
        .iter()
        .map(|r| {
            vec![
                Field::Count(r.k as u64),
                Field::Real(r.lambda),
                Field::Count(r.trials as u64),
                Field::Real(r.lower_rate),
                Field::Real(r.upper_rate),
                Field::Real(r.bound),
            ]
        })
        .collect();
    emit_csv(&fields, TAILS_COLUMNS, out)?;
    Ok(vec![format!(
        "wrote {} rows to {}",
        rows.len(),
        out.display()
    )])
}

/// Everything the analytic subcommands need to pin down a parameter point.
#[derive(Debug, Clone)]
pub struct PointArgs {
    pub metric: Metric,
    pub regime: Regime,
    pub l: usize,
    pub m: Option<usize>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
    pub snr: Option<f64>,
    pub nu: Option<f64>,
    pub power: Option<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub zeta: Option<f64>,
    pub target: f64,
}

impl PointArgs {
    /// Resolve the flag soup into a concrete point. A flat magnitude profile
    /// is assumed for mu^2 = P / L.
    pub fn resolve(&self) -> Result<RegimePoint, ConfigError> {
        if self.l == 0 {
            return Err(ConfigError::new("l", "sparsity must be at least 1"));
        }
        let (m, beta) = match (self.m, self.beta) {
            (Some(m), _) if m > self.l => (m, m as f64 / self.l as f64),
            (Some(m), _) => {
                return Err(ConfigError::new("m", format!("need m > l, got m = {m}")))
            }
            (None, Some(beta)) if beta > 2.0 => {
                ((beta * self.l as f64).floor() as usize, beta)
            }
            (None, Some(beta)) => {
                return Err(ConfigError::new("beta", format!("need beta > 2, got {beta}")))
            }
            (None, None) => return Err(ConfigError::new("m", "give either --m or --beta")),
        };
        let (power, nu) = match (self.snr, self.nu, self.power) {
            (Some(snr), None, None) if snr > 0.0 => (1.0, (1.0 / snr).sqrt()),
            (Some(_), _, _) => {
                return Err(ConfigError::new(
                    "snr",
                    "--snr must be positive and not combined with --nu/--power",
                ))
            }
            (None, Some(nu), Some(power)) if nu > 0.0 && power > 0.0 => (power, nu),
            (None, None, None) => (1.0, 0.1),
            _ => {
                return Err(ConfigError::new(
                    "nu",
                    "give --snr alone, or both --nu and --power",
                ))
            }
        };
        let n = self.n.unwrap_or(4 * self.l).max(self.l + 1);
        let zeta = self.zeta.unwrap_or_else(|| default_zeta(self.metric));
        let mu2 = power / self.l as f64;
        let dp = cs_lab_core::bounds::metric_delta_prime(
            self.metric,
            zeta,
            self.alpha,
            self.gamma,
            self.l,
            mu2,
            power,
        );
        Ok(RegimePoint {
            m,
            l: self.l,
            n,
            beta,
            nu,
            p: power,
            mu2,
            alpha: self.alpha,
            gamma: self.gamma,
            zeta,
            delta: dp * (n - self.l) as f64 / n as f64,
        })
    }
}

pub fn run_bounds_command(args: &PointArgs) -> CmdResult {
    let pt = args.resolve()?;
    let report = bound_report(args.metric, args.regime, &pt, args.target)?;
    let mut out = Vec::new();
    out.push(format!(
        "point: M={} L={} N={} beta={:.4} nu={:.6} P={:.6} mu2={:.6} alpha={} gamma={} zeta={}",
        pt.m, pt.l, pt.n, pt.beta, pt.nu, pt.p, pt.mu2, pt.alpha, pt.gamma, pt.zeta
    ));
    out.push(format!(
        "metric {} ({} regime), window delta = {:.6e}",
        report.metric, report.regime, pt.delta
    ));
    out.push(format!("atypicality bound: {:.6e}", report.atypicality));
    for (k, b) in &report.false_typicality {
        out.push(format!("false-typicality overlap K={k}: {b:.6e}"));
    }
    out.push(format!("union bound at N={}: {:.6e}", pt.n, report.union_bound));
    match report.achievability_n {
        Some(n) => out.push(format!("achievability N (bisected): {n}")),
        None => out.push("achievability N (bisected): unreachable".to_string()),
    }
    out.push(format!("converse N: {}", report.converse_n));
    for note in &report.notes {
        out.push(format!("note: {note}"));
    }
    Ok(out)
}

pub fn run_thresholds_command(args: &PointArgs) -> CmdResult {
    let pt = args.resolve()?;
    let achievability =
        cs_lab_core::bounds::achievability_threshold(args.metric, args.regime, &pt, args.target);
    let converse = cs_lab_core::bounds::converse_threshold(args.metric, args.regime, &pt);
    let mut out = Vec::new();
    out.push(format!(
        "metric {} ({}) at M={} L={} P={:.4} nu={:.4}:",
        args.metric, args.regime, pt.m, pt.l, pt.p, pt.nu
    ));
    match achievability {
        Ok(n) => out.push(format!(
            "achievability N: {n}  (union bound <= {:.0e})",
            args.target
        )),
        Err(e) => out.push(format!("achievability N: unreachable ({e})")),
    }
    out.push(format!("converse N: {converse}  (leading order)"));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn run_decode_demo(
    m: usize,
    l: usize,
    n: usize,
    nu: f64,
    power: f64,
    seed: u64,
    metric: Metric,
    alpha: f64,
    gamma: f64,
    zeta: Option<f64>,
    policy: DecodePolicy,
) -> CmdResult {
    let regime = SignalRegime::sublinear(MagnitudeProfile::Flat);
    let seeds = SeedRecord {
        matrix_seed: derive_seed(seed, "matrix", 0),
        noise_seed: derive_seed(seed, "noise", 0),
        signal_seed: derive_seed(seed, "signal", 0),
    };
    let instance = MeasurementInstance::draw(m, l, n, &regime, power, nu, seeds)?;
    let zeta = zeta.unwrap_or_else(|| default_zeta(metric));
    let mu2 = instance.signal.min_magnitude().powi(2);
    let dp = cs_lab_core::bounds::metric_delta_prime(metric, zeta, alpha, gamma, l, mu2, power);
    let delta = if n > l {
        dp * (n - l) as f64 / n as f64
    } else {
        dp
    };
    let params = TypicalityParams {
        delta,
        nu,
        l,
        policy,
    };
    let report = typicality_decode(
        &instance.y,
        &instance.a,
        &params,
        &ScanLimits::default(),
        Some(&instance.signal),
    )?;
    let outcome = score_metrics(report.chosen.as_deref(), &instance.signal, alpha, gamma);

    let mut out = Vec::new();
    out.push(format!(
        "instance: M={m} L={l} N={n} nu={nu} P={power} seed={seed} policy={}",
        policy.as_str()
    ));
    out.push(format!("true support: {:?}", instance.signal.support()));
    out.push(format!(
        "scanned {} supports, {} typical{}",
        report.scanned,
        report.typical_count,
        if report.overflow { " (list truncated)" } else { "" }
    ));
    out.push(format!("true support typical: {:?}", report.true_set_typical));
    match &report.chosen {
        Some(set) => {
            out.push(format!("chosen: {set:?}"));
            out.push(format!(
                "residual at chosen: {:.6e}, deviation {:.6e}",
                report.residual_of_chosen.unwrap_or(f64::NAN),
                report.chosen_deviation.unwrap_or(f64::NAN)
            ));
        }
        None => out.push("chosen: none".to_string()),
    }
    out.push(format!(
        "chosen-support metrics: exact={} partial(alpha={alpha})={} energy(gamma={gamma})={}",
        outcome.metric1, outcome.metric2, outcome.metric3
    ));
    out.push(format!(
        "overlap {} of {l}, captured energy {:.6}",
        outcome.overlap_count, outcome.captured_energy
    ));
    for set in report.typical_sets.iter().take(8) {
        out.push(format!("typical: {set:?}"));
    }
    if report.typical_sets.len() > 8 {
        out.push(format!("... and {} more", report.typical_sets.len() - 8));
    }
    Ok(out)
}
