//! Monte-Carlo runs: one drop per channel realization, every scheme on the
//! same channels, paired aggregation per SINR grid point.

use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{db_to_linear, realize, watts_to_dbm, ChannelMatrix, DropSeed};
use crate::design::{redesign, FixedPointOptions, Scheme, SinrTargets};
use crate::error::BeamError;
use crate::flops;
use crate::update::{ChangeEvent, LiveSystem, UpdatePolicy};

use super::config::{ExperimentConfig, Scenario, SchemeMode};
use super::HarnessError;

/// Result of one scheme on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub scheme: SchemeMode,
    /// Total transmit power after the change; `None` when infeasible.
    pub power_w: Option<f64>,
    /// Total power of the same scheme redesigned from scratch.
    pub baseline_w: Option<f64>,
    /// Largest relative SINR miss of the updated design.
    pub sinr_error: f64,
    pub update_us: f64,
    pub flops: u64,
    /// Fingerprint of the channels the updated design serves.
    pub channel_hash: u64,
    /// Why the update produced no power value.
    pub failure: Option<String>,
}

impl SchemeOutcome {
    pub fn feasible(&self) -> bool {
        self.power_w.is_some()
    }

    pub fn power_dbm(&self) -> Option<f64> {
        self.power_w.filter(|&p| p > 0.0).map(watts_to_dbm)
    }

    fn paired(&self) -> bool {
        self.power_w.is_some() && self.baseline_w.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub drop_id: u64,
    pub sinr_db: f64,
    pub outcomes: Vec<SchemeOutcome>,
}

impl DropResult {
    pub fn outcome(&self, scheme: SchemeMode) -> Option<&SchemeOutcome> {
        self.outcomes.iter().find(|o| o.scheme == scheme)
    }

    /// Every compared scheme and its baseline produced a power value.
    pub fn all_feasible(&self) -> bool {
        self.outcomes.iter().all(SchemeOutcome::paired)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sinr_db: f64,
    pub scheme: SchemeMode,
    pub scenario: Scenario,
    pub mode: &'static str,
    /// dBm of the mean power in watts over the paired drops.
    pub mean_power_dbm: Option<f64>,
    /// `10·log10(mean power / mean baseline power)` over the paired drops.
    pub gap_vs_baseline_db: Option<f64>,
    pub feasible_rate: f64,
    /// Drops feasible for every compared scheme, the ones averaged.
    pub drops: usize,
    pub mean_update_us: Option<f64>,
    pub mean_flops: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// Grid-point major, drop-id minor.
    pub drops: Vec<DropResult>,
    pub rows: Vec<AggregateRow>,
}

impl ExperimentOutput {
    pub fn drops_at(&self, sinr_db: f64) -> impl Iterator<Item = &DropResult> {
        self.drops.iter().filter(move |d| d.sinr_db == sinr_db)
    }

    pub fn row(&self, sinr_db: f64, scheme: SchemeMode) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.sinr_db == sinr_db && r.scheme == scheme)
    }
}

/// Worker count from `BEAM_THREADS`; 0 or unset means one per core.
pub fn threads_from_env() -> Result<usize, HarnessError> {
    match std::env::var("BEAM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("BEAM_THREADS: cannot parse '{v}'"))),
        _ => Ok(0),
    }
}

/// Runs `f` on a pool of `threads` workers (0 = one per core).
pub fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

/// The system before the change, the change itself, and the targets after.
pub struct ScenarioSetup {
    pub start: ChannelMatrix,
    pub start_gamma: SinrTargets,
    pub event: ChangeEvent,
    pub end: ChannelMatrix,
    pub end_gamma: SinrTargets,
}

/// Builds the scenario around the last of the `k` realized users.
pub fn scenario_setup(
    cfg: &ExperimentConfig,
    full: &ChannelMatrix,
    gamma: f64,
) -> Result<ScenarioSetup, BeamError> {
    let k = full.k();
    let last = k - 1;
    let all = SinrTargets::uniform(k, gamma)?;
    Ok(match cfg.scenario {
        Scenario::UserIn => ScenarioSetup {
            start: full.leading(last),
            start_gamma: SinrTargets::uniform(last, gamma)?,
            event: ChangeEvent::UserIn { h: full.column(last), gamma, sigma2: full.noise()[last] },
            end: full.clone(),
            end_gamma: all,
        },
        Scenario::UserOut => ScenarioSetup {
            start: full.clone(),
            start_gamma: all,
            event: ChangeEvent::UserOut { index: last },
            end: full.leading(last),
            end_gamma: SinrTargets::uniform(last, gamma)?,
        },
        Scenario::GammaChange => {
            let raised = cfg.raised_target(gamma);
            ScenarioSetup {
                start: full.clone(),
                start_gamma: all.clone(),
                event: ChangeEvent::GammaChange { index: last, gamma: raised },
                end: full.clone(),
                end_gamma: all.with_changed(last, raised)?,
            }
        }
    })
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, f64, u64) {
    let t0 = Instant::now();
    let (out, n) = flops::measure(f);
    (out, t0.elapsed().as_secs_f64() * 1e6, n)
}

/// Runs every configured scheme on drop `drop_id` at target `sinr_db`.
pub fn run_drop(cfg: &ExperimentConfig, sinr_db: f64, drop_id: u64) -> Result<DropResult, HarnessError> {
    let full = realize(&cfg.geometry, cfg.nt, cfg.k, DropSeed::new(cfg.seed, drop_id))?;
    let setup = scenario_setup(cfg, &full, db_to_linear(sinr_db))?;
    let opts = FixedPointOptions::default();
    let end_hash = setup.end.fingerprint();

    let mut families: Vec<Scheme> = cfg.schemes.iter().map(|s| s.scheme()).collect();
    families.sort();
    families.dedup();

    let mut outcomes = Vec::with_capacity(cfg.schemes.len());
    for scheme in families {
        let start = LiveSystem::from_scratch(setup.start.clone(), setup.start_gamma.clone(), scheme, opts);
        let (baseline, base_us, base_flops) = timed(|| redesign(&setup.end, &setup.end_gamma, scheme));
        let baseline_w = baseline.as_ref().ok().map(|d| d.total_power);
        for &mode in cfg.schemes.iter().filter(|m| m.scheme() == scheme) {
            let outcome = if mode == SchemeMode::FullRedesign {
                SchemeOutcome {
                    scheme: mode,
                    power_w: baseline_w,
                    baseline_w,
                    sinr_error: baseline.as_ref().map_or(f64::NAN, |d| d.max_sinr_rel_error(&setup.end_gamma)),
                    update_us: base_us,
                    flops: base_flops,
                    channel_hash: end_hash,
                    failure: baseline.as_ref().err().map(ToString::to_string),
                }
            } else {
                let policy = UpdatePolicy {
                    zf_method: cfg.zf_method,
                    nu_mode: mode.nu_mode().unwrap_or_default(),
                    fixed_point: opts,
                };
                let (next, us, n) = timed(|| match &start {
                    Ok(sys) => sys.apply(&setup.event, &policy),
                    Err(e) => Err(e.clone()),
                });
                match next {
                    Ok(sys) => SchemeOutcome {
                        scheme: mode,
                        power_w: Some(sys.design.total_power),
                        baseline_w,
                        sinr_error: sys.design.max_sinr_rel_error(&setup.end_gamma),
                        update_us: us,
                        flops: n,
                        channel_hash: sys.channel.fingerprint(),
                        failure: None,
                    },
                    Err(e) => SchemeOutcome {
                        scheme: mode,
                        power_w: None,
                        baseline_w,
                        sinr_error: f64::NAN,
                        update_us: us,
                        flops: n,
                        channel_hash: end_hash,
                        failure: Some(e.to_string()),
                    },
                }
            };
            outcomes.push(outcome);
        }
    }
    outcomes.sort_by_key(|o| cfg.schemes.iter().position(|&s| s == o.scheme));
    if outcomes.iter().any(|o| o.channel_hash != end_hash) {
        return Err(HarnessError::Runtime(format!("drop {drop_id}: schemes saw different channels")));
    }
    Ok(DropResult { drop_id, sinr_db, outcomes })
}

/// Runs all drops at every grid point and aggregates them.
///
/// Drops run in parallel on `threads` workers (0 = one per core); the
/// result does not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let jobs: Vec<(f64, u64)> = cfg
        .sinr_grid_db
        .iter()
        .flat_map(|&g| (0..cfg.drops as u64).map(move |d| (g, d)))
        .collect();
    let drops = with_pool(threads, || {
        jobs.par_iter().map(|&(g, d)| run_drop(cfg, g, d)).collect::<Result<Vec<_>, _>>()
    })??;
    let rows = aggregate(cfg, &drops);
    Ok(ExperimentOutput { config: cfg.clone(), drops, rows })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Paired aggregation in drop order: only drops feasible for every compared
/// scheme enter the power averages.
pub fn aggregate(cfg: &ExperimentConfig, drops: &[DropResult]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &sinr_db in &cfg.sinr_grid_db {
        let at: Vec<&DropResult> = drops.iter().filter(|d| d.sinr_db == sinr_db).collect();
        let paired: Vec<&DropResult> = at.iter().copied().filter(|d| d.all_feasible()).collect();
        for &scheme in &cfg.schemes {
            let outcomes = |set: &[&DropResult]| -> Vec<SchemeOutcome> {
                set.iter().filter_map(|d| d.outcome(scheme).cloned()).collect()
            };
            let all = outcomes(&at);
            let used = outcomes(&paired);
            let power = mean(used.iter().filter_map(|o| o.power_w));
            let base = mean(used.iter().filter_map(|o| o.baseline_w));
            let feasible = all.iter().filter(|o| o.feasible()).count();
            rows.push(AggregateRow {
                sinr_db,
                scheme,
                scenario: cfg.scenario,
                mode: scheme.mode_label(cfg.zf_method),
                mean_power_dbm: power.filter(|&p| p > 0.0).map(watts_to_dbm),
                gap_vs_baseline_db: match (power, base) {
                    (Some(p), Some(b)) if p > 0.0 && b > 0.0 => Some(10.0 * (p / b).log10()),
                    _ => None,
                },
                feasible_rate: if all.is_empty() { 0.0 } else { feasible as f64 / all.len() as f64 },
                drops: used.len(),
                mean_update_us: mean(all.iter().filter(|o| o.feasible()).map(|o| o.update_us)),
                mean_flops: mean(all.iter().filter(|o| o.feasible()).map(|o| o.flops as f64)),
            });
        }
    }
    rows
}
