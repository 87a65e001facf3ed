//! Monte Carlo experiments over many seeded sessions.
//!
//! Trial `i` of a grid point runs with seed [`trial_seed`]`(base_seed, i)`.
//! Trials execute in parallel, each owning its registry and transcript; rows
//! are aggregated in trial order, so results are identical for a fixed base
//! seed regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversaryConfig;
use crate::protocol::{run_session, SessionConfig, SessionError, SessionResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("trial with seed {seed} failed: {source}")]
    Trial { seed: u64, source: SessionError },
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `splitmix64(base_seed + index * 0x9E3779B97F4A7C15)` with wrapping arithmetic.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Optional parameter axes. A present axis must be non-empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub n: Option<Vec<usize>>,
    /// Intercept-resend fraction; requires an intercept-resend adversary.
    pub fraction: Option<Vec<f64>>,
    pub tolerance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: SessionConfig,
    pub trials: u64,
    #[serde(default)]
    pub sweep: Sweep,
}

impl ExperimentSpec {
    pub fn new(base: SessionConfig, trials: u64) -> Self {
        ExperimentSpec {
            base,
            trials,
            sweep: Sweep::default(),
        }
    }

    /// Expands the sweep into concrete session configurations, in
    /// `n`-major, then fraction, then tolerance order.
    pub fn grid(&self) -> Result<Vec<SessionConfig>, ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Invalid("trials must be at least 1".into()));
        }
        fn axis<T: Clone>(name: &str, values: &Option<Vec<T>>, base: T) -> Result<Vec<T>, ExperimentError> {
            match values {
                None => Ok(vec![base]),
                Some(v) if v.is_empty() => Err(ExperimentError::Invalid(format!("empty {name} grid"))),
                Some(v) => Ok(v.clone()),
            }
        }
        let ns = axis("n", &self.sweep.n, self.base.n)?;
        let base_fraction = match self.base.adversary {
            AdversaryConfig::InterceptResend { fraction, .. } => Some(fraction),
            _ => None,
        };
        let fractions: Vec<Option<f64>> = match (&self.sweep.fraction, base_fraction) {
            (Some(_), None) => {
                return Err(ExperimentError::Invalid(
                    "a fraction grid needs an intercept-resend adversary".into(),
                ))
            }
            (Some(v), Some(_)) => axis("fraction", &Some(v.clone()), 0.0)?.into_iter().map(Some).collect(),
            (None, f) => vec![f],
        };
        let tolerances = axis("tolerance", &self.sweep.tolerance, self.base.error_tolerance)?;

        let mut grid = Vec::new();
        for &n in &ns {
            for fraction in &fractions {
                for &tolerance in &tolerances {
                    let mut cfg = self.base.clone();
                    if self.sweep.n.is_some() {
                        cfg.n = n;
                        cfg.decoy_pairs_per_hop = (n / 2).max(1);
                    }
                    if let (Some(f), AdversaryConfig::InterceptResend { fraction, .. }) = (fraction, &mut cfg.adversary)
                    {
                        *fraction = *f;
                    }
                    cfg.error_tolerance = tolerance;
                    cfg.validate()
                        .map_err(|e| ExperimentError::Invalid(format!("grid point n={n}: {e}")))?;
                    grid.push(cfg);
                }
            }
        }
        Ok(grid)
    }
}

/// Per-session statistics extracted from a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialStats {
    pub aborted: bool,
    pub agreed: bool,
    pub attack_success: bool,
    pub decoy_pairs: usize,
    pub decoy_failures: usize,
}

impl TrialStats {
    /// Attack success means: for collusion, the victim ended up with the key
    /// the colluders intended; for an intercept-resend eavesdropper, the
    /// session finished without detection. Honest sessions never count.
    pub fn from_result(result: &SessionResult) -> Self {
        let (decoy_pairs, decoy_failures) = result.events.decoy_totals();
        let aborted = result.is_aborted();
        let attack_success = match &result.config.adversary {
            AdversaryConfig::None => false,
            AdversaryConfig::InterceptResend { .. } => !aborted,
            AdversaryConfig::Collusion { victim, .. } => {
                let intended = result.details.collusion.as_ref().and_then(|c| c.intended_key());
                match (result.keys(), intended) {
                    (Some(keys), Some(intended)) => keys[*victim] == intended,
                    _ => false,
                }
            }
        };
        TrialStats {
            aborted,
            agreed: result.agreed(),
            attack_success,
            decoy_pairs,
            decoy_failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub adversary: String,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    pub trials: u64,
    pub aborts: u64,
    pub abort_rate: f64,
    pub attack_successes: u64,
    pub agreements: u64,
    pub agreement_rate: f64,
    /// Failed decoy pairs over all checked decoy pairs, pooled across trials.
    pub mean_decoy_failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub base_seed: u64,
    pub rows: Vec<SummaryRow>,
}

pub fn run_trials(config: &SessionConfig, trials: u64) -> Result<Vec<TrialStats>, ExperimentError> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.seed = trial_seed(config.seed, i);
            run_session(&cfg)
                .map(|r| TrialStats::from_result(&r))
                .map_err(|source| ExperimentError::Trial { seed: cfg.seed, source })
        })
        .collect()
}

pub fn summarize(config: &SessionConfig, stats: &[TrialStats]) -> SummaryRow {
    let trials = stats.len() as u64;
    let count = |f: fn(&TrialStats) -> bool| stats.iter().filter(|s| f(s)).count() as u64;
    let aborts = count(|s| s.aborted);
    let agreements = count(|s| s.agreed);
    let (pairs, failures) = stats
        .iter()
        .fold((0usize, 0usize), |(p, f), s| (p + s.decoy_pairs, f + s.decoy_failures));
    let rate = |x: u64| if trials == 0 { 0.0 } else { x as f64 / trials as f64 };
    SummaryRow {
        n: config.n,
        adversary: config.adversary.label(),
        tolerance: config.error_tolerance,
        fraction: match config.adversary {
            AdversaryConfig::InterceptResend { fraction, .. } => Some(fraction),
            _ => None,
        },
        trials,
        aborts,
        abort_rate: rate(aborts),
        attack_successes: count(|s| s.attack_success),
        agreements,
        agreement_rate: rate(agreements),
        mean_decoy_failure_rate: if pairs == 0 {
            0.0
        } else {
            failures as f64 / pairs as f64
        },
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary, ExperimentError> {
    let rows = spec
        .grid()?
        .iter()
        .map(|cfg| Ok(summarize(cfg, &run_trials(cfg, spec.trials)?)))
        .collect::<Result<_, ExperimentError>>()?;
    Ok(ExperimentSummary {
        base_seed: spec.base.seed,
        rows,
    })
}
