//! Joint-typicality decoding over exhaustive support search, a min-residual
//! baseline decoder, and the three success metrics.
//!
//! A candidate support J of size L is delta-typical for an observation y when
//! the gathered columns A_J have full rank L and the per-coordinate residual
//! energy after projecting y off their span sits within delta of its
//! noise-only expectation (N-L)/N * nu^2.
//!
//! The scan walks all C(M, L) supports in lexicographic order. Large scans are
//! split into contiguous lexicographic ranges and run in parallel; partial
//! results merge in range order, so the output never depends on the thread
//! count.

use crate::linalg::{CMatrix, CVector, ProjectionWorkspace, DEFAULT_RANK_TOL};
use crate::signal::SparseSignal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("candidate support has {got} indices, decoder expects {expected}")]
    SupportSize { got: usize, expected: usize },
    #[error("support index {index} out of range for {m} columns")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("duplicate index {index} in candidate support")]
    DuplicateIndex { index: usize },
    #[error("sparsity {l} exceeds the {m} available columns")]
    SparsityExceedsColumns { l: usize, m: usize },
    #[error("scan of {subsets} supports exceeds the budget of {budget}")]
    BudgetExceeded { subsets: u128, budget: u64 },
    #[error("typicality tolerance delta must be positive, got {delta}")]
    NonPositiveDelta { delta: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

/// What the decoder reports when several supports are typical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodePolicy {
    /// Output a support only when it is the single typical one.
    Unique,
    /// Output the typical support with the smallest deviation from the
    /// noise-only residual level, ties broken lexicographically.
    MinDeviation,
}

impl DecodePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecodePolicy::Unique => "unique",
            DecodePolicy::MinDeviation => "min-deviation",
        }
    }
}

impl std::str::FromStr for DecodePolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unique" => Ok(DecodePolicy::Unique),
            "min-deviation" => Ok(DecodePolicy::MinDeviation),
            other => Err(format!("unknown decoder policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TypicalityParams {
    /// Residual tolerance, same units as nu^2.
    pub delta: f64,
    /// Noise standard deviation.
    pub nu: f64,
    /// Sparsity of the candidate supports.
    pub l: usize,
    pub policy: DecodePolicy,
}

/// Scan resource limits: `budget` caps how many supports may be enumerated,
/// `cap` caps how many typical supports are stored in the report.
#[derive(Debug, Clone, Copy)]
pub struct ScanLimits {
    pub budget: u64,
    pub cap: usize,
}

impl Default for ScanLimits {
    fn default() -> Self {
        Self {
            budget: 10_000_000,
            cap: 1024,
        }
    }
}

/// Outcome of an exhaustive typicality scan.
#[derive(Debug, Clone)]
pub struct DecodeReport {
    /// Typical supports in lexicographic order, truncated at the cap. The
    /// chosen support always appears here unless the list overflowed.
    pub typical_sets: Vec<Vec<usize>>,
    /// True when `typical_sets` was truncated.
    pub overflow: bool,
    /// Total number of typical supports found (not truncated).
    pub typical_count: u64,
    /// The decoded support, subject to the policy.
    pub chosen: Option<Vec<usize>>,
    /// Per-coordinate residual (1/N)||P_perp y||^2 at the chosen support.
    pub residual_of_chosen: Option<f64>,
    /// Deviation of the chosen support from the noise-only residual level.
    pub chosen_deviation: Option<f64>,
    /// Number of supports examined.
    pub scanned: u64,
    /// Whether the reference support was typical; set only when the scan ran
    /// with a reference signal.
    pub true_set_typical: Option<bool>,
    /// Smallest overlap with the reference support over all typical supports.
    pub min_typical_overlap: Option<usize>,
    /// Smallest captured reference energy over all typical supports.
    pub min_typical_captured: Option<f64>,
}

/// Number of indices shared by two sorted index sets.
pub fn overlap_count(a: &[usize], b: &[usize]) -> usize {
    debug_assert!(a.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] < w[1]));
    let mut i = 0;
    let mut j = 0;
    let mut shared = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared
}

fn validate_candidate(j: &[usize], m: usize, l: usize) -> Result<(), DecodeError> {
    if j.len() != l {
        return Err(DecodeError::SupportSize {
            got: j.len(),
            expected: l,
        });
    }
    let mut seen = j.to_vec();
    seen.sort_unstable();
    for w in seen.windows(2) {
        if w[0] == w[1] {
            return Err(DecodeError::DuplicateIndex { index: w[0] });
        }
    }
    if let Some(&worst) = seen.last() {
        if worst >= m {
            return Err(DecodeError::IndexOutOfRange { index: worst, m });
        }
    }
    Ok(())
}

/// Exact C(m, l) saturating at u128::MAX.
pub fn subset_count(m: usize, l: usize) -> u128 {
    if l > m {
        return 0;
    }
    let l = l.min(m - l);
    let mut acc: u128 = 1;
    for i in 1..=l {
        match acc.checked_mul((m - l + i) as u128) {
            Some(v) => acc = v / i as u128,
            None => return u128::MAX,
        }
    }
    acc
}

/// The lexicographically smallest size-`l` subset of 0..m at `rank` positions
/// past the start of the enumeration.
fn unrank_subset(mut rank: u128, m: usize, l: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(l);
    let mut next = 0usize;
    for slot in 0..l {
        let remaining = l - slot - 1;
        let mut v = next;
        loop {
            let with_v = subset_count(m - v - 1, remaining);
            if rank < with_v {
                break;
            }
            rank -= with_v;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    out
}

/// Advance `s` to the next subset in lexicographic order. Returns false when
/// `s` was already the last one.
fn next_subset(s: &mut [usize], m: usize) -> bool {
    let l = s.len();
    let mut i = l;
    while i > 0 {
        i -= 1;
        if s[i] < m - l + i {
            s[i] += 1;
            for k in i + 1..l {
                s[k] = s[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Is `(y, J)` delta-jointly typical? True when the gathered columns have
/// full rank `l` and the normalized residual deviates from (N-L)/N * nu^2 by
/// less than delta.
pub fn is_jointly_typical(
    y: &CVector,
    a: &CMatrix,
    j: &[usize],
    p: &TypicalityParams,
) -> Result<bool, DecodeError> {
    if !(p.delta > 0.0) {
        return Err(DecodeError::NonPositiveDelta { delta: p.delta });
    }
    if y.len() != a.rows() {
        return Err(DecodeError::DimensionMismatch {
            context: format!("observation length {} vs {} rows", y.len(), a.rows()),
        });
    }
    validate_candidate(j, a.cols(), p.l)?;
    let mut sorted = j.to_vec();
    sorted.sort_unstable();
    let mut ws = ProjectionWorkspace::new(a.rows(), p.l);
    Ok(typicality_deviation(&mut ws, a, &sorted, y.entries(), p).is_some())
}

/// Deviation |res/N - (N-L)/N nu^2| when A_J is full rank and the deviation
/// is inside the window, along with the normalized residual.
fn typicality_deviation(
    ws: &mut ProjectionWorkspace,
    a: &CMatrix,
    j: &[usize],
    y: &[num_complex::Complex64],
    p: &TypicalityParams,
) -> Option<(f64, f64)> {
    let n = a.rows();
    let rank = ws.factor_columns(a, j, DEFAULT_RANK_TOL);
    if rank < p.l {
        return None;
    }
    let res = ws.residual_energy(y) / n as f64;
    let target = ((n - p.l) as f64 / n as f64) * p.nu * p.nu;
    let dev = (res - target).abs();
    if dev < p.delta {
        Some((dev, res))
    } else {
        None
    }
}

struct ChunkOutcome {
    typical: Vec<Vec<usize>>,
    truncated: bool,
    count: u64,
    best: Option<(f64, Vec<usize>, f64)>, // (deviation, support, residual)
    scanned: u64,
    truth_typical: bool,
    min_overlap: Option<usize>,
    min_captured: Option<f64>,
}

fn empty_outcome() -> ChunkOutcome {
    ChunkOutcome {
        typical: Vec::new(),
        truncated: false,
        count: 0,
        best: None,
        scanned: 0,
        truth_typical: false,
        min_overlap: None,
        min_captured: None,
    }
}

fn scan_range(
    a: &CMatrix,
    y: &[num_complex::Complex64],
    p: &TypicalityParams,
    start: u128,
    len: u64,
    cap: usize,
    oracle: Option<&SparseSignal>,
) -> ChunkOutcome {
    if len == 0 {
        return empty_outcome();
    }
    let m = a.cols();
    let mut subset = unrank_subset(start, m, p.l);
    let mut ws = ProjectionWorkspace::new(a.rows(), p.l);
    let mut out = empty_outcome();
    let truth = oracle.map(|s| s.support());
    for step in 0..len {
        if let Some((dev, res)) = typicality_deviation(&mut ws, a, &subset, y, p) {
            out.count += 1;
            if out.typical.len() < cap {
                out.typical.push(subset.clone());
            } else {
                out.truncated = true;
            }
            // Strictly-smaller comparison keeps the lexicographically first
            // support on ties; the scan itself runs in lexicographic order.
            if out.best.as_ref().is_none_or(|(b, _, _)| dev < *b) {
                out.best = Some((dev, subset.clone(), res));
            }
            if let (Some(t), Some(sig)) = (truth, oracle) {
                let shared = overlap_count(&subset, t);
                if &subset[..] == t {
                    out.truth_typical = true;
                }
                out.min_overlap = Some(out.min_overlap.map_or(shared, |v| v.min(shared)));
                let captured = sig.energy_on(&subset);
                out.min_captured = Some(
                    out.min_captured
                        .map_or(captured, |v: f64| v.min(captured)),
                );
            }
        }
        out.scanned += 1;
        if step + 1 < len && !next_subset(&mut subset, m) {
            break;
        }
    }
    out
}

fn merge_outcomes(mut chunks: Vec<ChunkOutcome>, cap: usize) -> ChunkOutcome {
    let mut merged = empty_outcome();
    for chunk in chunks.drain(..) {
        merged.count += chunk.count;
        merged.scanned += chunk.scanned;
        merged.truncated |= chunk.truncated;
        for set in chunk.typical {
            if merged.typical.len() < cap {
                merged.typical.push(set);
            } else {
                merged.truncated = true;
            }
        }
        if let Some((dev, set, res)) = chunk.best {
            // Chunks arrive in lexicographic range order, so strict `<`
            // preserves the first-on-tie rule globally.
            if merged.best.as_ref().is_none_or(|(b, _, _)| dev < *b) {
                merged.best = Some((dev, set, res));
            }
        }
        merged.truth_typical |= chunk.truth_typical;
        merged.min_overlap = match (merged.min_overlap, chunk.min_overlap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        merged.min_captured = match (merged.min_captured, chunk.min_captured) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
    merged
}

const SERIAL_SCAN_LIMIT: u128 = 4096;

fn prepare_scan(
    y: &CVector,
    a: &CMatrix,
    l: usize,
    delta: f64,
    budget: u64,
) -> Result<u128, DecodeError> {
    if !(delta > 0.0) {
        return Err(DecodeError::NonPositiveDelta { delta });
    }
    if y.len() != a.rows() {
        return Err(DecodeError::DimensionMismatch {
            context: format!("observation length {} vs {} rows", y.len(), a.rows()),
        });
    }
    if l == 0 || l > a.cols() {
        return Err(DecodeError::SparsityExceedsColumns { l, m: a.cols() });
    }
    let total = subset_count(a.cols(), l);
    if total > budget as u128 {
        return Err(DecodeError::BudgetExceeded {
            subsets: total,
            budget,
        });
    }
    Ok(total)
}

fn run_scan(
    y: &CVector,
    a: &CMatrix,
    p: &TypicalityParams,
    total: u128,
    cap: usize,
    oracle: Option<&SparseSignal>,
) -> ChunkOutcome {
    let total64 = total as u64;
    if total <= SERIAL_SCAN_LIMIT || rayon::current_num_threads() <= 1 {
        return scan_range(a, y.entries(), p, 0, total64, cap, oracle);
    }
    let chunks = (rayon::current_num_threads() * 4).min(total64 as usize).max(1);
    let chunk_len = total64.div_ceil(chunks as u64);
    let outcomes: Vec<ChunkOutcome> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk_len;
            let len = chunk_len.min(total64.saturating_sub(start));
            scan_range(a, y.entries(), p, start as u128, len, cap, oracle)
        })
        .collect();
    merge_outcomes(outcomes, cap)
}

/// Exhaustive delta-typicality scan over all size-L supports.
///
/// Passing the generating signal as `oracle` additionally records whether the
/// true support was typical and the worst overlap/captured-energy over the
/// typical family, which is what the per-metric error accounting needs.
pub fn typicality_decode(
    y: &CVector,
    a: &CMatrix,
    p: &TypicalityParams,
    limits: &ScanLimits,
    oracle: Option<&SparseSignal>,
) -> Result<DecodeReport, DecodeError> {
    let total = prepare_scan(y, a, p.l, p.delta, limits.budget)?;
    if let Some(sig) = oracle {
        if sig.ambient_dim() != a.cols() {
            return Err(DecodeError::DimensionMismatch {
                context: format!(
                    "oracle signal dimension {} vs {} columns",
                    sig.ambient_dim(),
                    a.cols()
                ),
            });
        }
    }
    let merged = run_scan(y, a, p, total, limits.cap, oracle);

    let (chosen, residual_of_chosen, chosen_deviation) = match p.policy {
        DecodePolicy::Unique => {
            if merged.count == 1 {
                let (dev, set, res) = merged.best.clone().expect("count == 1");
                (Some(set), Some(res), Some(dev))
            } else {
                (None, None, None)
            }
        }
        DecodePolicy::MinDeviation => match merged.best.clone() {
            Some((dev, set, res)) => (Some(set), Some(res), Some(dev)),
            None => (None, None, None),
        },
    };

    Ok(DecodeReport {
        typical_sets: merged.typical,
        overflow: merged.truncated,
        typical_count: merged.count,
        chosen,
        residual_of_chosen,
        chosen_deviation,
        scanned: merged.scanned,
        true_set_typical: oracle.map(|_| merged.truth_typical),
        min_typical_overlap: merged.min_overlap,
        min_typical_captured: merged.min_captured,
    })
}

/// Closest-subspace baseline: the size-L support minimizing the projection
/// residual, ties broken lexicographically.
pub fn ml_decode(
    y: &CVector,
    a: &CMatrix,
    l: usize,
    limits: &ScanLimits,
) -> Result<Vec<usize>, DecodeError> {
    let total = prepare_scan(y, a, l, 1.0, limits.budget)?;
    let total64 = total as u64;
    let m = a.cols();

    let scan = |start: u128, len: u64| -> (f64, Vec<usize>) {
        let mut subset = unrank_subset(start, m, l);
        let mut ws = ProjectionWorkspace::new(a.rows(), l);
        let mut best = f64::INFINITY;
        let mut best_set = subset.clone();
        for step in 0..len {
            ws.factor_columns(a, &subset, DEFAULT_RANK_TOL);
            let res = ws.residual_energy(y.entries());
            if res < best {
                best = res;
                best_set = subset.clone();
            }
            if step + 1 < len && !next_subset(&mut subset, m) {
                break;
            }
        }
        (best, best_set)
    };

    if total <= SERIAL_SCAN_LIMIT || rayon::current_num_threads() <= 1 {
        return Ok(scan(0, total64).1);
    }
    let chunks = (rayon::current_num_threads() * 4).min(total64 as usize).max(1);
    let chunk_len = total64.div_ceil(chunks as u64);
    let parts: Vec<(f64, Vec<usize>)> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk_len;
            let len = chunk_len.min(total64.saturating_sub(start));
            scan(start as u128, len)
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut best_set = Vec::new();
    for (res, set) in parts {
        if res < best {
            best = res;
            best_set = set;
        }
    }
    Ok(best_set)
}

/// Exact support recovery.
pub fn metric1_success(est: &[usize], truth: &[usize]) -> bool {
    assert_eq!(
        est.len(),
        truth.len(),
        "metric 1 compares supports of equal size"
    );
    let mut a = est.to_vec();
    let mut b = truth.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

/// Strictly more than a (1 - alpha) fraction of the true support recovered.
/// Evaluated as `missed < alpha * L` to keep the strict boundary exact.
pub fn metric2_success(est: &[usize], truth: &[usize], alpha: f64) -> bool {
    assert_eq!(
        est.len(),
        truth.len(),
        "metric 2 compares supports of equal size"
    );
    assert!(0.0 < alpha && alpha < 1.0, "alpha must lie in (0, 1)");
    let mut a = est.to_vec();
    let mut b = truth.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let shared = overlap_count(&a, &b);
    let missed = truth.len() - shared;
    (missed as f64) < alpha * truth.len() as f64
}

/// Strictly more than (1 - gamma) of the signal energy captured.
pub fn metric3_success(est: &[usize], signal: &SparseSignal, gamma: f64) -> bool {
    assert!(0.0 < gamma && gamma < 1.0, "gamma must lie in (0, 1)");
    let mut sorted = est.to_vec();
    sorted.sort_unstable();
    let captured = signal.energy_on(&sorted);
    captured > (1.0 - gamma) * signal.power()
}

/// All three metrics for an estimated support (or a decode that produced
/// none, which fails every metric).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOutcome {
    pub metric1: bool,
    pub metric2: bool,
    pub metric3: bool,
    pub overlap_count: usize,
    pub captured_energy: f64,
}

pub fn score_metrics(
    est: Option<&[usize]>,
    signal: &SparseSignal,
    alpha: f64,
    gamma: f64,
) -> MetricOutcome {
    match est {
        None => MetricOutcome {
            metric1: false,
            metric2: false,
            metric3: false,
            overlap_count: 0,
            captured_energy: 0.0,
        },
        Some(est) => {
            let mut sorted = est.to_vec();
            sorted.sort_unstable();
            let shared = overlap_count(&sorted, signal.support());
            MetricOutcome {
                metric1: metric1_success(&sorted, signal.support()),
                metric2: metric2_success(&sorted, signal.support(), alpha),
                metric3: metric3_success(&sorted, signal, gamma),
                overlap_count: shared,
                captured_energy: signal.energy_on(&sorted),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{
        make_signal, measure, sample_measurement_matrix, sample_noise, MagnitudeProfile,
        SignalRegime, SparseSignal,
    };
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn flat_sublinear() -> SignalRegime {
        SignalRegime::sublinear(MagnitudeProfile::Flat)
    }

    fn params(delta: f64, nu: f64, l: usize, policy: DecodePolicy) -> TypicalityParams {
        TypicalityParams {
            delta,
            nu,
            l,
            policy,
        }
    }

    #[test]
    fn subset_enumeration_is_lexicographic_and_complete() {
        let m = 6;
        let l = 3;
        let total = subset_count(m, l);
        assert_eq!(total, 20);
        let mut seen = Vec::new();
        let mut s = vec![0, 1, 2];
        loop {
            seen.push(s.clone());
            if !next_subset(&mut s, m) {
                break;
            }
        }
        assert_eq!(seen.len(), 20);
        for (rank, set) in seen.iter().enumerate() {
            assert_eq!(&unrank_subset(rank as u128, m, l), set);
        }
        let mut sorted = seen.clone();
        sorted.sort();
        assert_eq!(sorted, seen, "enumeration must already be sorted");
    }

    #[test]
    fn zero_observation_typical_iff_window_reaches_target() {
        let a = sample_measurement_matrix(8, 4, 5);
        let y = CVector::new(vec![Complex64::new(0.0, 0.0); 8]).unwrap();
        let nu = 1.0;
        let target = 6.0 / 8.0 * nu * nu;
        let j = [0usize, 2];
        let yes = params(target + 0.01, nu, 2, DecodePolicy::Unique);
        let no = params(target - 0.01, nu, 2, DecodePolicy::Unique);
        assert!(is_jointly_typical(&y, &a, &j, &yes).unwrap());
        assert!(!is_jointly_typical(&y, &a, &j, &no).unwrap());
    }

    #[test]
    fn observation_in_span_behaves_like_zero_residual() {
        let a = sample_measurement_matrix(8, 5, 6);
        let y = a.column(1);
        let nu = 0.5;
        let target = 6.0 / 8.0 * nu * nu;
        let j = [1usize, 3];
        let yes = params(target * 1.001, nu, 2, DecodePolicy::Unique);
        let no = params(target * 0.999, nu, 2, DecodePolicy::Unique);
        assert!(is_jointly_typical(&y, &a, &j, &yes).unwrap());
        assert!(!is_jointly_typical(&y, &a, &j, &no).unwrap());
    }

    #[test]
    fn exact_center_is_typical_for_every_delta() {
        // A starts with e1, e2; y puts energy 6 on the remaining coordinates,
        // so the normalized residual is exactly (N-L)/N for nu = 1.
        let n = 8usize;
        let a = CMatrix::from_fn(n, 4, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for slot in y.iter_mut().skip(2) {
            *slot = Complex64::new(1.0, 0.0);
        }
        let y = CVector::new(y).unwrap();
        for delta in [1e-12, 1e-6, 0.1] {
            let p = params(delta, 1.0, 2, DecodePolicy::Unique);
            assert!(is_jointly_typical(&y, &a, &[0, 1], &p).unwrap());
        }
    }

    #[test]
    fn candidate_validation_errors() {
        let a = sample_measurement_matrix(8, 4, 5);
        let y = sample_noise(8, 1.0, 1).unwrap();
        let p = params(0.5, 1.0, 2, DecodePolicy::Unique);
        assert!(matches!(
            is_jointly_typical(&y, &a, &[0], &p),
            Err(DecodeError::SupportSize { .. })
        ));
        assert!(matches!(
            is_jointly_typical(&y, &a, &[0, 7], &p),
            Err(DecodeError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            is_jointly_typical(&y, &a, &[2, 2], &p),
            Err(DecodeError::DuplicateIndex { .. })
        ));
    }

    #[test]
    fn near_noiseless_decode_finds_truth_under_both_policies() {
        let m = 6;
        let l = 2;
        let n = 6;
        let nu = 1e-6;
        let signal = make_signal(m, l, &flat_sublinear(), 1.0, 21).unwrap();
        let a = sample_measurement_matrix(n, m, 22);
        let noise = sample_noise(n, nu, 23).unwrap();
        let y = measure(&a, &signal, &noise).unwrap();
        let mu2 = signal.min_magnitude().powi(2);
        let delta = 0.75 * mu2 * ((n - l) as f64 / n as f64);
        for policy in [DecodePolicy::Unique, DecodePolicy::MinDeviation] {
            let p = params(delta, nu, l, policy);
            let report =
                typicality_decode(&y, &a, &p, &ScanLimits::default(), Some(&signal)).unwrap();
            assert_eq!(report.scanned, 15);
            assert_eq!(report.chosen.as_deref(), Some(signal.support()));
            assert_eq!(report.true_set_typical, Some(true));
            // The residual at the truth is tiny next to every wrong support.
            assert!(report.residual_of_chosen.unwrap() < 1e-9);
        }
    }

    #[test]
    fn true_support_is_typical_as_often_as_the_tail_bound_predicts() {
        // Signal power well above noise, window delta' = 0.5 mu^2.
        let m = 12;
        let l = 3;
        let n = 24;
        let nu = 0.3;
        let trials = 400;
        let mut hits = 0;
        for t in 0..trials {
            let signal = make_signal(m, l, &flat_sublinear(), 3.0, 1000 + t).unwrap();
            let a = sample_measurement_matrix(n, m, 2000 + t);
            let noise = sample_noise(n, nu, 3000 + t).unwrap();
            let y = measure(&a, &signal, &noise).unwrap();
            let mu2 = signal.min_magnitude().powi(2);
            let delta = 0.5 * mu2 * ((n - l) as f64 / n as f64);
            let p = params(delta, nu, l, DecodePolicy::Unique);
            if is_jointly_typical(&y, &a, signal.support(), &p).unwrap() {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        // Analytic atypicality bound at these parameters.
        let delta = 0.5 * 1.0 * ((n - l) as f64 / n as f64);
        let nu2 = nu * nu;
        let expo = delta * delta / (4.0 * nu2 * nu2) * (n * n) as f64
            / ((n - l) as f64 + 2.0 * delta * n as f64 / nu2);
        let bound = (2.0 * (-expo).exp()).min(1.0);
        let se = (rate * (1.0 - rate) / trials as f64).sqrt().max(1e-3);
        assert!(
            1.0 - rate <= bound + 3.0 * se,
            "atypicality rate {} above bound {bound}",
            1.0 - rate
        );
    }

    #[test]
    fn hand_computable_window_on_identity_columns() {
        // A = I4 (M = N = 4), so the residual for J is the energy of y off J.
        let a = CMatrix::identity(4).unwrap();
        let y = CVector::from_real(&[2.0, 1.0, 0.5, 0.1]).unwrap();
        let nu = 1.0;
        let l = 2;
        // res/N for J = {i, j} is (||y||^2 - y_i^2 - y_j^2) / 4; target is 0.5.
        // ||y||^2 = 5.26. Supports and residuals/4:
        //   {0,1}: 0.065, {0,2}: 0.2525, {0,3}: 0.3125,
        //   {1,2}: 1.0025, {1,3}: 1.0625, {2,3}: 1.25
        // With delta = 0.6 the window is (-0.1, 1.1): all but {2,3}.
        let p = params(0.6, nu, l, DecodePolicy::MinDeviation);
        let report = typicality_decode(&y, &a, &p, &ScanLimits::default(), None).unwrap();
        let expect: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![0, 2],
            vec![0, 3],
            vec![1, 2],
            vec![1, 3],
        ];
        assert_eq!(report.typical_sets, expect);
        // Deviations from 0.5: 0.435, 0.2475, 0.1875, 0.5025, 0.5625, so the
        // min-deviation choice is {0,3}.
        assert_eq!(report.chosen.as_deref(), Some(&[0usize, 3][..]));
        assert!((report.chosen_deviation.unwrap() - 0.1875).abs() < 1e-12);
    }

    #[test]
    fn unique_policy_declines_on_multiple_typical_sets() {
        let a = CMatrix::identity(4).unwrap();
        let y = CVector::from_real(&[2.0, 1.0, 0.5, 0.1]).unwrap();
        let p = params(0.6, 1.0, 2, DecodePolicy::Unique);
        let report = typicality_decode(&y, &a, &p, &ScanLimits::default(), None).unwrap();
        assert!(report.typical_count > 1);
        assert!(report.chosen.is_none());
    }

    #[test]
    fn cap_truncates_with_overflow_flag() {
        let a = CMatrix::identity(4).unwrap();
        let y = CVector::from_real(&[2.0, 1.0, 0.5, 0.1]).unwrap();
        let p = params(0.6, 1.0, 2, DecodePolicy::MinDeviation);
        let limits = ScanLimits {
            budget: 1_000_000,
            cap: 2,
        };
        let report = typicality_decode(&y, &a, &p, &limits, None).unwrap();
        assert!(report.overflow);
        assert_eq!(report.typical_sets.len(), 2);
        assert_eq!(report.typical_count, 5);
    }

    #[test]
    fn budget_is_enforced_before_scanning() {
        let a = sample_measurement_matrix(4, 30, 1);
        let y = sample_noise(4, 1.0, 2).unwrap();
        let p = params(0.5, 1.0, 15, DecodePolicy::Unique);
        let err = typicality_decode(&y, &a, &p, &ScanLimits::default(), None).unwrap_err();
        assert!(matches!(err, DecodeError::BudgetExceeded { .. }));
    }

    #[test]
    fn no_typical_sets_reports_absent_choice() {
        let a = sample_measurement_matrix(8, 6, 3);
        let y = sample_noise(8, 10.0, 4).unwrap();
        // Tiny window around the wrong level: nothing qualifies.
        let p = params(1e-9, 1e-3, 2, DecodePolicy::MinDeviation);
        let report = typicality_decode(&y, &a, &p, &ScanLimits::default(), None).unwrap();
        assert_eq!(report.typical_count, 0);
        assert!(report.chosen.is_none());
        assert_eq!(report.scanned, 15);
    }

    #[test]
    fn ml_decode_zero_noise_hits_zero_residual() {
        let m = 7;
        let l = 2;
        let n = 6;
        let signal = make_signal(m, l, &flat_sublinear(), 1.0, 31).unwrap();
        let a = sample_measurement_matrix(n, m, 32);
        let zero = CVector::new(vec![Complex64::new(1e-15, 0.0); n]).unwrap();
        let y = measure(&a, &signal, &zero).unwrap();
        let est = ml_decode(&y, &a, l, &ScanLimits::default()).unwrap();
        assert_eq!(est.as_slice(), signal.support());
    }

    #[test]
    fn ml_decode_one_sparse_orthogonal_columns() {
        let a = CMatrix::identity(3).unwrap();
        let y = CVector::new(vec![
            Complex64::new(1e-3, 0.0),
            Complex64::new(-2e-3, 0.0),
            Complex64::new(1.0, 0.2),
        ])
        .unwrap();
        let est = ml_decode(&y, &a, 1, &ScanLimits::default()).unwrap();
        assert_eq!(est, vec![2]);
        // Determinism under fixed inputs.
        assert_eq!(est, ml_decode(&y, &a, 1, &ScanLimits::default()).unwrap());
    }

    #[test]
    fn metric1_examples() {
        assert!(metric1_success(&[1, 4, 6], &[1, 4, 6]));
        assert!(!metric1_success(&[1, 4, 7], &[1, 4, 6]));
    }

    #[test]
    #[should_panic]
    fn metric1_size_mismatch_panics() {
        metric1_success(&[1, 4], &[1, 4, 6]);
    }

    #[test]
    fn metric2_boundary_is_strict() {
        let truth: Vec<usize> = (0..10).collect();
        let full: Vec<usize> = (0..10).collect();
        assert!(metric2_success(&full, &truth, 0.1));
        // Overlap 9 of 10: 0.9 is not strictly greater than 1 - 0.1.
        let mut nine: Vec<usize> = (0..9).collect();
        nine.push(42);
        assert!(!metric2_success(&nine, &truth, 0.1));
        assert!(metric2_success(&nine, &truth, 0.2));
    }

    #[test]
    fn metric3_boundary_is_strict() {
        // Hand-built flat signal with exactly 1/4 energy per entry.
        let half = Complex64::new(0.5, 0.0);
        let signal =
            SparseSignal::new(12, vec![0, 1, 2, 3], vec![half, half, half, half]).unwrap();
        assert!(metric3_success(&[0, 1, 2, 3], &signal, 0.5));
        assert!(metric3_success(&[0, 1, 2, 9], &signal, 0.5)); // 0.75 > 0.5
        assert!(!metric3_success(&[0, 1, 8, 9], &signal, 0.5)); // 0.5 not > 0.5
    }

    #[test]
    fn disjoint_false_typicality_obeys_the_union_bound() {
        // Count trials where some support disjoint from the truth is typical
        // and compare against C(M-L, L) times the per-set tail bound.
        let m = 16;
        let l = 3;
        let n = 48;
        let nu = 0.5;
        let p_power = 2.0;
        let trials = 300;
        let mut hits = 0usize;
        for t in 0..trials {
            let signal = make_signal(m, l, &flat_sublinear(), p_power, 7000 + t).unwrap();
            let a = sample_measurement_matrix(n, m, 8000 + t);
            let noise = sample_noise(n, nu, 9000 + t).unwrap();
            let y = measure(&a, &signal, &noise).unwrap();
            let mu2 = signal.min_magnitude().powi(2);
            let delta = 0.5 * mu2 * ((n - l) as f64 / n as f64);
            let p = params(delta, nu, l, DecodePolicy::MinDeviation);
            let report =
                typicality_decode(&y, &a, &p, &ScanLimits::default(), Some(&signal)).unwrap();
            // Disjoint supports capture zero energy.
            if report.typical_count > 0 && report.min_typical_captured.unwrap() == 0.0 {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        let delta_prime = 0.5 * p_power / l as f64;
        let missed = p_power;
        let nu2 = nu * nu;
        let per_set = (-((n - l) as f64 / 4.0)
            * ((missed - delta_prime) / (missed + nu2)).powi(2))
        .exp();
        let disjoint_sets = subset_count(m - l, l) as f64;
        let bound = (disjoint_sets * per_set).min(1.0);
        let se = (rate.max(1e-3) * (1.0 - rate.max(1e-3)) / trials as f64).sqrt();
        assert!(
            rate <= bound + 3.0 * se,
            "disjoint typicality rate {rate} above union bound {bound}"
        );
    }

    #[test]
    fn parallel_and_serial_scans_agree() {
        let m = 20;
        let l = 4; // C(20, 4) = 4845 subsets: above the serial cutoff
        let signal = make_signal(m, l, &flat_sublinear(), 1.0, 51).unwrap();
        let a = sample_measurement_matrix(12, m, 52);
        let noise = sample_noise(12, 0.2, 53).unwrap();
        let y = measure(&a, &signal, &noise).unwrap();
        let p = params(0.15, 0.2, l, DecodePolicy::MinDeviation);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| typicality_decode(&y, &a, &p, &ScanLimits::default(), Some(&signal)))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| typicality_decode(&y, &a, &p, &ScanLimits::default(), Some(&signal)))
            .unwrap();
        assert_eq!(serial.typical_sets, parallel.typical_sets);
        assert_eq!(serial.chosen, parallel.chosen);
        assert_eq!(serial.typical_count, parallel.typical_count);
        assert_eq!(serial.scanned, parallel.scanned);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn metric_ordering(seed in 0u64..2000, alpha in 0.05f64..0.95, gamma in 0.05f64..0.95) {
            let m = 16;
            let l = 4;
            let signal = make_signal(m, l, &flat_sublinear(), 1.0, seed).unwrap();
            // A random candidate of the right size.
            let est = make_signal(m, l, &flat_sublinear(), 1.0, seed.wrapping_add(77))
                .unwrap()
                .support()
                .to_vec();
            let outcome = score_metrics(Some(&est), &signal, alpha, gamma);
            if outcome.metric1 {
                prop_assert!(outcome.metric2);
                prop_assert!(outcome.metric3);
            }
            prop_assert!(outcome.overlap_count <= l);
            prop_assert!(outcome.captured_energy <= signal.power() + 1e-12);
        }
    }
}
