//! Seeded Monte Carlo harness: draw, measure, decode, score, aggregate.
//!
//! Every random component of a trial derives its own seed from the master
//! seed, a role tag, the config-point id, and the trial index, so results are
//! independent of scheduling. Trials run in parallel over the current rayon
//! pool and reduce in trial order, making the aggregate rows identical for
//! any thread count.
//!
//! Two success accountings are kept per trial: one scores the support the
//! decoder actually output (the practical reading), the other declares
//! metric-k success only when the true support is typical and no typical
//! support violates metric k (the union-bound reading the analytic bounds
//! speak about). Aggregate rates report the union-bound reading; the chosen
//! counts live alongside in [`TrialResult`].

use crate::bounds::{atypicality_bound, metric_delta_prime, RegimePoint};
use crate::decoder::{
    score_metrics, typicality_decode, DecodePolicy, ScanLimits, TypicalityParams,
};
use crate::linalg::ProjectionWorkspace;
use crate::signal::{derive_seed, MagnitudeProfile, Scaling, SeedRecord, SignalRegime};
use crate::signal::{MeasurementInstance, RegimeKind};
use crate::{Metric, Regime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("bad experiment config: {reason}")]
    Config { reason: String },
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
    #[error(transparent)]
    Decode(#[from] crate::decoder::DecodeError),
}

/// Full sweep specification.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub metric: Metric,
    pub alpha: f64,
    pub gamma: f64,
    /// Window fraction; pick [`crate::bounds::default_zeta`] when in doubt.
    pub zeta: f64,
    pub regime: Regime,
    /// Ambient dimensions, paired entry-wise with `l_list`.
    pub m_list: Vec<usize>,
    /// Sparsities, paired entry-wise with `m_list`.
    pub l_list: Vec<usize>,
    /// Measurement counts, crossed with every (m, l) pair.
    pub n_list: Vec<usize>,
    pub nu: f64,
    pub power: f64,
    pub profile: MagnitudeProfile,
    pub policy: DecodePolicy,
    pub scan_budget: u64,
    /// Reuse one measurement matrix across a point's trials instead of
    /// redrawing it (probes fixed-matrix behavior rather than the ensemble
    /// average).
    pub fixed_matrix: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Config {
                reason: "trials must be at least 1".into(),
            });
        }
        if self.m_list.len() != self.l_list.len() || self.m_list.is_empty() {
            return Err(ExperimentError::Config {
                reason: format!(
                    "m-list ({}) and l-list ({}) must pair up and be non-empty",
                    self.m_list.len(),
                    self.l_list.len()
                ),
            });
        }
        if self.n_list.is_empty() {
            return Err(ExperimentError::Config {
                reason: "n-list must be non-empty".into(),
            });
        }
        if !(self.nu > 0.0) {
            return Err(ExperimentError::Config {
                reason: format!("nu must be positive, got {}", self.nu),
            });
        }
        if !(self.power > 0.0) {
            return Err(ExperimentError::Config {
                reason: format!("power must be positive, got {}", self.power),
            });
        }
        for bad in [("alpha", self.alpha), ("gamma", self.gamma), ("zeta", self.zeta)] {
            if !(0.0 < bad.1 && bad.1 < 1.0) {
                return Err(ExperimentError::Config {
                    reason: format!("{} must lie in (0, 1), got {}", bad.0, bad.1),
                });
            }
        }
        for (&m, &l) in self.m_list.iter().zip(&self.l_list) {
            if l == 0 || l >= m {
                return Err(ExperimentError::Config {
                    reason: format!("need 1 <= L < M, got L = {l}, M = {m}"),
                });
            }
            let subsets = crate::decoder::subset_count(m, l);
            if subsets > self.scan_budget as u128 {
                return Err(ExperimentError::Config {
                    reason: format!(
                        "C({m}, {l}) = {subsets} exceeds the scan budget {}",
                        self.scan_budget
                    ),
                });
            }
            if self.regime == Regime::Linear && (m as f64) <= 2.0 * l as f64 {
                return Err(ExperimentError::Config {
                    reason: format!("linear regime needs M/L > 2, got M = {m}, L = {l}"),
                });
            }
        }
        self.profile.energies(self.l_list[0], self.power)?;
        Ok(())
    }

    /// Config points in deterministic order: (m, l) pairs crossed with the
    /// n-list, ids sequential from zero.
    pub fn points(&self) -> Vec<ConfigPoint> {
        let mut out = Vec::with_capacity(self.m_list.len() * self.n_list.len());
        let mut id = 0usize;
        for (&m, &l) in self.m_list.iter().zip(&self.l_list) {
            for &n in &self.n_list {
                out.push(ConfigPoint { id, m, l, n });
                id += 1;
            }
        }
        out
    }

    fn signal_regime(&self, m: usize, l: usize) -> SignalRegime {
        let scaling = match self.regime {
            Regime::Linear => Scaling::Linear {
                beta: m as f64 / l as f64,
            },
            Regime::Sublinear => Scaling::Sublinear,
        };
        SignalRegime {
            kind: RegimeKind::ConstantPower,
            scaling,
            profile: self.profile.clone(),
        }
    }

    /// The typicality window for this config at a given (l, n): delta' from
    /// the per-metric policy, converted to delta.
    pub fn window_delta(&self, l: usize, n: usize) -> f64 {
        let mu2 = self
            .profile
            .min_mag_sq(l, self.power)
            .expect("validated profile");
        let dp = metric_delta_prime(self.metric, self.zeta, self.alpha, self.gamma, l, mu2, self.power);
        if n > l {
            dp * (n - l) as f64 / n as f64
        } else {
            dp
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigPoint {
    pub id: usize,
    pub m: usize,
    pub l: usize,
    pub n: usize,
}

/// Outcome of a single trial.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub point_id: usize,
    pub trial_index: usize,
    /// Union-bound reading per metric: true support typical and no typical
    /// support violating the metric.
    pub strict_success: [bool; 3],
    /// Metrics scored on the support the decoder output (false when the
    /// decode produced none).
    pub chosen_success: [bool; 3],
    pub true_set_typical: bool,
    pub num_typical_sets: u64,
    /// Normalized residual (1/N)||P_perp y||^2 at the true support.
    pub residual_at_truth: f64,
    pub wall: Duration,
}

/// One aggregate row per config point.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub point: ConfigPoint,
    pub beta: f64,
    pub nu: f64,
    pub power: f64,
    pub metric: Metric,
    pub alpha: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub policy: DecodePolicy,
    pub trials: usize,
    /// Union-bound success rates for metrics 1..3.
    pub rate: [f64; 3],
    /// Wilson 95% interval for the configured metric's rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Fraction of trials whose true support failed the typicality test.
    pub emp_atypicality: f64,
    /// Analytic tail bound on that fraction.
    pub bound_atypicality: f64,
    pub mean_typical_sets: f64,
    pub wall_ms: u64,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

const WILSON_Z95: f64 = 1.959963984540054;

/// Run one seeded trial: draw a fresh instance, decode, score both readings.
pub fn run_trial(
    cfg: &ExperimentConfig,
    point: &ConfigPoint,
    trial_index: usize,
) -> Result<TrialResult, ExperimentError> {
    let started = Instant::now();
    let point_master = derive_seed(cfg.master_seed, "point", point.id as u64);
    let matrix_index = if cfg.fixed_matrix { 0 } else { trial_index as u64 };
    let seeds = SeedRecord {
        matrix_seed: derive_seed(point_master, "matrix", matrix_index),
        noise_seed: derive_seed(point_master, "noise", trial_index as u64),
        signal_seed: derive_seed(point_master, "signal", trial_index as u64),
    };
    let regime = cfg.signal_regime(point.m, point.l);
    let instance = MeasurementInstance::draw(
        point.m,
        point.l,
        point.n,
        &regime,
        cfg.power,
        cfg.nu,
        seeds,
    )?;

    let params = TypicalityParams {
        delta: cfg.window_delta(point.l, point.n),
        nu: cfg.nu,
        l: point.l,
        policy: cfg.policy,
    };
    let limits = ScanLimits {
        budget: cfg.scan_budget,
        cap: 1024,
    };
    let report = typicality_decode(
        &instance.y,
        &instance.a,
        &params,
        &limits,
        Some(&instance.signal),
    )?;

    let truth_typical = report.true_set_typical.unwrap_or(false);
    let lf = point.l as f64;
    // Union-bound reading: the true support must be typical and the typical
    // family must contain no metric violator.
    let strict_m1 = truth_typical && report.typical_count == 1;
    let strict_m2 = truth_typical
        && report
            .min_typical_overlap
            .map(|o| ((point.l - o) as f64) < cfg.alpha * lf)
            .unwrap_or(false);
    let strict_m3 = truth_typical
        && report
            .min_typical_captured
            .map(|c| c > (1.0 - cfg.gamma) * instance.signal.power())
            .unwrap_or(false);

    let chosen = score_metrics(
        report.chosen.as_deref(),
        &instance.signal,
        cfg.alpha,
        cfg.gamma,
    );

    let mut ws = ProjectionWorkspace::new(point.n, point.l);
    ws.factor_columns(&instance.a, instance.signal.support(), crate::linalg::DEFAULT_RANK_TOL);
    let residual_at_truth = ws.residual_energy(instance.y.entries()) / point.n as f64;

    Ok(TrialResult {
        point_id: point.id,
        trial_index,
        strict_success: [strict_m1, strict_m2, strict_m3],
        chosen_success: [chosen.metric1, chosen.metric2, chosen.metric3],
        true_set_typical: truth_typical,
        num_typical_sets: report.typical_count,
        residual_at_truth,
        wall: started.elapsed(),
    })
}

fn aggregate_point(
    cfg: &ExperimentConfig,
    point: &ConfigPoint,
    results: &[TrialResult],
) -> AggregateRow {
    let trials = results.len();
    let mut wins = [0usize; 3];
    let mut atypical = 0usize;
    let mut typical_sum = 0u64;
    let mut wall_ms = 0u128;
    for r in results {
        for (win, &hit) in wins.iter_mut().zip(&r.strict_success) {
            if hit {
                *win += 1;
            }
        }
        if !r.true_set_typical {
            atypical += 1;
        }
        typical_sum += r.num_typical_sets;
        wall_ms += r.wall.as_millis();
    }
    let rate = [
        wins[0] as f64 / trials as f64,
        wins[1] as f64 / trials as f64,
        wins[2] as f64 / trials as f64,
    ];
    let (wilson_low, wilson_high) =
        wilson_interval(wins[cfg.metric.index()], trials, WILSON_Z95);

    let mu2 = cfg
        .profile
        .min_mag_sq(point.l, cfg.power)
        .expect("validated profile");
    let pt = RegimePoint {
        m: point.m,
        l: point.l,
        n: point.n,
        beta: point.m as f64 / point.l as f64,
        nu: cfg.nu,
        p: cfg.power,
        mu2,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        zeta: cfg.zeta,
        delta: cfg.window_delta(point.l, point.n),
    };
    let bound_atypicality = atypicality_bound(&pt).unwrap_or(1.0);

    AggregateRow {
        point: *point,
        beta: point.m as f64 / point.l as f64,
        nu: cfg.nu,
        power: cfg.power,
        metric: cfg.metric,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        zeta: cfg.zeta,
        policy: cfg.policy,
        trials,
        rate,
        wilson_low,
        wilson_high,
        emp_atypicality: atypical as f64 / trials as f64,
        bound_atypicality,
        mean_typical_sets: typical_sum as f64 / trials as f64,
        wall_ms: wall_ms.min(u64::MAX as u128) as u64,
    }
}

/// Run every config point, trials in parallel over the current rayon pool,
/// rows in deterministic point order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<AggregateRow>, ExperimentError> {
    cfg.validate()?;
    let points = cfg.points();
    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let results: Result<Vec<TrialResult>, ExperimentError> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, point, t))
            .collect();
        rows.push(aggregate_point(cfg, point, &results?));
    }
    Ok(rows)
}

/// One row of a tail-frequency check.
#[derive(Debug, Clone, Copy)]
pub struct TailCheckRow {
    pub k: usize,
    pub lambda: f64,
    pub trials: usize,
    /// Empirical frequency of the lower deviation event.
    pub lower_rate: f64,
    /// Empirical frequency of the upper deviation event.
    pub upper_rate: f64,
    /// The analytic bound exp(-lambda) both frequencies must respect.
    pub bound: f64,
}

/// Sample sums of `k` unit-mean exponentials (the law of a projected complex
/// noise energy) and report how often each deviation event fires next to its
/// exp(-lambda) bound.
pub fn tail_check(k: usize, trials: usize, lambda_grid: &[f64], seed: u64) -> Vec<TailCheckRow> {
    assert!(k >= 1 && trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut acc = 0.0f64;
        for _ in 0..k {
            let u: f64 = rng.random();
            acc -= (1.0 - u).ln();
        }
        sums.push(acc);
    }
    lambda_grid
        .iter()
        .map(|&lambda| {
            let tails = crate::bounds::chi_square_tail_bounds(k, lambda);
            let kf = k as f64;
            let mut lower = 0usize;
            let mut upper = 0usize;
            for &s in &sums {
                if s - kf <= -tails.lower_threshold {
                    lower += 1;
                }
                if s - kf >= tails.upper_threshold {
                    upper += 1;
                }
            }
            TailCheckRow {
                k,
                lambda,
                trials,
                lower_rate: lower as f64 / trials as f64,
                upper_rate: upper as f64 / trials as f64,
                bound: tails.lower_tail_prob,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            master_seed: 7,
            trials: 100,
            metric: Metric::One,
            alpha: 0.4,
            gamma: 0.5,
            zeta: 0.75,
            regime: Regime::Linear,
            m_list: vec![8],
            l_list: vec![2],
            n_list: vec![8],
            nu: 1e-6,
            power: 1.0,
            profile: MagnitudeProfile::Flat,
            policy: DecodePolicy::MinDeviation,
            scan_budget: 10_000_000,
            fixed_matrix: false,
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = small_config();
        let point = cfg.points()[0];
        let a = run_trial(&cfg, &point, 3).unwrap();
        let b = run_trial(&cfg, &point, 3).unwrap();
        assert_eq!(a.strict_success, b.strict_success);
        assert_eq!(a.chosen_success, b.chosen_success);
        assert_eq!(a.num_typical_sets, b.num_typical_sets);
        assert_eq!(
            a.residual_at_truth.to_bits(),
            b.residual_at_truth.to_bits()
        );
        let c = run_trial(&cfg, &point, 4).unwrap();
        assert!(
            a.residual_at_truth.to_bits() != c.residual_at_truth.to_bits(),
            "different trials must differ"
        );
    }

    #[test]
    fn near_noiseless_decoding_succeeds() {
        let cfg = small_config();
        let point = cfg.points()[0];
        let mut wins = 0;
        for t in 0..cfg.trials {
            let r = run_trial(&cfg, &point, t).unwrap();
            if r.chosen_success[0] {
                wins += 1;
            }
        }
        assert!(wins >= 99, "only {wins}/100 near-noiseless successes");
    }

    #[test]
    fn heavy_noise_at_minimal_n_is_near_chance() {
        let cfg = ExperimentConfig {
            nu: 1.0, // nu^2 = P
            n_list: vec![3],
            trials: 100,
            ..small_config()
        };
        let point = cfg.points()[0];
        let mut wins = 0;
        for t in 0..cfg.trials {
            let r = run_trial(&cfg, &point, t).unwrap();
            if r.chosen_success[0] {
                wins += 1;
            }
        }
        // Chance level is 1/C(8,2) = 3.6 percent.
        assert!(wins <= 15, "{wins}/100 wins at chance-level SNR");
    }

    #[test]
    fn sweep_row_shape_and_rate_consistency() {
        let cfg = ExperimentConfig {
            trials: 60,
            nu: 0.1,
            metric: Metric::Two,
            zeta: 0.5,
            n_list: vec![8, 24],
            ..small_config()
        };
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            for r in row.rate {
                assert!((0.0..=1.0).contains(&r));
            }
            assert!(row.wilson_low <= row.rate[cfg.metric.index()] + 1e-12);
            assert!(row.wilson_high >= row.rate[cfg.metric.index()] - 1e-12);
            // Metric ordering as a counting identity.
            assert!(row.rate[0] <= row.rate[1] + 1e-12);
            assert!(row.rate[0] <= row.rate[2] + 1e-12);
            // Analytic domination of the empirical atypicality rate.
            let se = (row.emp_atypicality.max(1e-3) * (1.0 - row.emp_atypicality.max(1e-3))
                / row.trials as f64)
                .sqrt();
            assert!(row.emp_atypicality <= row.bound_atypicality + 3.0 * se);
        }
    }

    #[test]
    fn sweep_is_schedule_independent() {
        let cfg = ExperimentConfig {
            trials: 24,
            nu: 0.2,
            n_list: vec![6, 10],
            ..small_config()
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_sweep(&cfg))
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_sweep(&cfg))
            .unwrap();
        assert_eq!(one.len(), four.len());
        for (a, b) in one.iter().zip(&four) {
            assert_eq!(a.rate, b.rate);
            assert_eq!(a.emp_atypicality.to_bits(), b.emp_atypicality.to_bits());
            assert_eq!(a.mean_typical_sets.to_bits(), b.mean_typical_sets.to_bits());
            assert_eq!(a.wilson_low.to_bits(), b.wilson_low.to_bits());
        }
    }

    #[test]
    fn fixed_matrix_reuses_the_draw() {
        let cfg = ExperimentConfig {
            fixed_matrix: true,
            trials: 4,
            ..small_config()
        };
        let point = cfg.points()[0];
        let point_master = derive_seed(cfg.master_seed, "point", point.id as u64);
        let s0 = derive_seed(point_master, "matrix", 0);
        let a0 = crate::signal::sample_measurement_matrix(point.n, point.m, s0);
        // Every trial's matrix seed hits index 0.
        for _t in 0..cfg.trials {
            let again = crate::signal::sample_measurement_matrix(point.n, point.m, s0);
            assert_eq!(a0, again);
        }
    }

    #[test]
    fn config_validation_catches_bad_points() {
        let mut cfg = small_config();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.l_list = vec![9];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.m_list = vec![30];
        cfg.l_list = vec![15];
        assert!(cfg.validate().is_err(), "budget must reject C(30, 15)");
        let mut cfg = small_config();
        cfg.m_list = vec![8];
        cfg.l_list = vec![4];
        assert!(cfg.validate().is_err(), "linear regime needs beta > 2");
    }

    #[test]
    fn sublinear_regime_skips_the_beta_check() {
        let cfg = ExperimentConfig {
            regime: Regime::Sublinear,
            m_list: vec![24],
            l_list: vec![2],
            n_list: vec![12],
            trials: 20,
            nu: 0.1,
            metric: Metric::Two,
            zeta: 0.5,
            ..small_config()
        };
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rate[Metric::Two.index()] > 0.8);
    }

    #[test]
    fn wilson_interval_frozen_example() {
        let (lo, hi) = wilson_interval(8, 10, 1.959963984540054);
        // Independent high-precision evaluation of the score interval at
        // p-hat = 0.8, n = 10.
        assert!((lo - 0.490_162_471_5).abs() < 1e-9, "lo = {lo}");
        assert!((hi - 0.943_317_848_5).abs() < 1e-9, "hi = {hi}");
        let (zlo, zhi) = wilson_interval(0, 10, 1.959963984540054);
        assert_eq!(zlo, 0.0);
        assert!(zhi > 0.0 && zhi < 0.35);
    }

    #[test]
    fn tail_rates_respect_their_bounds() {
        let rows = tail_check(100, 10_000, &[0.0, 1.0, 3.0], 99);
        assert_eq!(rows.len(), 3);
        // lambda = 0: thresholds are 0, the bound is 1, trivially satisfied.
        assert!(rows[0].lower_rate <= 1.0 && rows[0].bound == 1.0);
        for row in &rows[1..] {
            let se = (row.bound * (1.0 - row.bound) / row.trials as f64).sqrt();
            assert!(row.lower_rate <= row.bound + 3.0 * se, "{row:?}");
            assert!(row.upper_rate <= row.bound + 3.0 * se, "{row:?}");
        }
    }
}
