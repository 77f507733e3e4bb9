//! Oracle checks over Monte-Carlo drops: incremental against from-scratch
//! designs for ZF and MRT, and target equality plus cost ordering for the
//! optimal variants.

use std::fmt;

use rayon::prelude::*;

use crate::channel::{db_to_linear, realize, DropSeed};
use crate::design::{redesign, Design, FixedPointOptions, Scheme};
use crate::error::BeamError;
use crate::linalg::rel_frobenius;
use crate::update::{LiveSystem, NuMode, UpdatePolicy, ZfMethod};

use super::config::{ExperimentConfig, Scenario};
use super::experiment::{scenario_setup, with_pool};
use super::HarnessError;

/// Incremental ZF/MRT designs and ZF routes agree to this, relative.
pub const EXACT_TOL: f64 = 1e-9;
/// Achieved SINR equals the target to this, relative.
pub const SINR_TOL: f64 = 1e-6;
/// Exact-refit power exceeds an approximation by at most this, relative.
pub const ORDER_TOL: f64 = 1e-9;
/// Cached inverses reproduce the identity to this.
pub const CACHE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CheckId {
    MrtExact,
    ZfDirectExact,
    ZfBlockExact,
    ZfRoutesAgree,
    OptSinr,
    OptOrdering,
    CacheAudit,
    FeasibilityAgrees,
}

const CHECKS: [CheckId; 8] = [
    CheckId::MrtExact,
    CheckId::ZfDirectExact,
    CheckId::ZfBlockExact,
    CheckId::ZfRoutesAgree,
    CheckId::OptSinr,
    CheckId::OptOrdering,
    CheckId::CacheAudit,
    CheckId::FeasibilityAgrees,
];

impl CheckId {
    fn name(self) -> &'static str {
        match self {
            CheckId::MrtExact => "mrt_incremental_vs_scratch",
            CheckId::ZfDirectExact => "zf_direct_vs_scratch",
            CheckId::ZfBlockExact => "zf_block_vs_scratch",
            CheckId::ZfRoutesAgree => "zf_direct_vs_block",
            CheckId::OptSinr => "opt_sinr_equals_target",
            CheckId::OptOrdering => "opt_exact_not_above_approx",
            CheckId::CacheAudit => "cache_consistency",
            CheckId::FeasibilityAgrees => "feasibility_mismatches",
        }
    }

    fn tol(self) -> f64 {
        match self {
            CheckId::MrtExact | CheckId::ZfDirectExact | CheckId::ZfBlockExact | CheckId::ZfRoutesAgree => EXACT_TOL,
            CheckId::OptSinr => SINR_TOL,
            CheckId::OptOrdering => ORDER_TOL,
            CheckId::CacheAudit => CACHE_TOL,
            CheckId::FeasibilityAgrees => 0.0,
        }
    }
}

/// Worst deviation seen for one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
    pub samples: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<30} worst={:.3e} tol={:.1e} samples={}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.worst,
                c.tol,
                c.samples
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Worst {
    worst: [f64; CHECKS.len()],
    samples: [usize; CHECKS.len()],
}

impl Worst {
    fn record(&mut self, id: CheckId, value: f64) {
        let i = id as usize;
        // NaN never compares greater, so map it to infinity to surface it.
        let v = if value.is_nan() { f64::INFINITY } else { value };
        self.worst[i] = self.worst[i].max(v);
        self.samples[i] += 1;
    }

    fn merge(mut self, other: Worst) -> Worst {
        for i in 0..CHECKS.len() {
            self.worst[i] = self.worst[i].max(other.worst[i]);
            self.samples[i] += other.samples[i];
        }
        self
    }
}

/// Largest of the relative differences in `W` and in `β`.
pub fn design_deviation(a: &Design, b: &Design) -> f64 {
    if a.w.shape() != b.w.shape() {
        return f64::INFINITY;
    }
    if b.w.ncols() == 0 {
        return 0.0;
    }
    let beta = (a.power.beta() - b.power.beta()).norm() / b.power.beta().norm();
    rel_frobenius(&a.w, &b.w).max(beta)
}

fn check_drop(cfg: &ExperimentConfig, scenario: Scenario, sinr_db: f64, drop_id: u64) -> Result<Worst, HarnessError> {
    let cfg = ExperimentConfig { scenario, ..cfg.clone() };
    let full = realize(&cfg.geometry, cfg.nt, cfg.k, DropSeed::new(cfg.seed, drop_id))?;
    let setup = scenario_setup(&cfg, &full, db_to_linear(sinr_db))?;
    let opts = FixedPointOptions::default();
    let mut w = Worst::default();
    let policy = |zf_method, nu_mode| UpdatePolicy { zf_method, nu_mode, fixed_point: opts };

    let start = |scheme| LiveSystem::from_scratch(setup.start.clone(), setup.start_gamma.clone(), scheme, opts);

    if setup.end.k() <= setup.end.nt() {
        let scratch = redesign(&setup.end, &setup.end_gamma, Scheme::Zf);
        let zf = start(Scheme::Zf)?;
        let direct = zf.apply(&setup.event, &policy(ZfMethod::Direct, NuMode::default()));
        let block = zf.apply(&setup.event, &policy(ZfMethod::Block, NuMode::default()));
        compare(&mut w, CheckId::ZfDirectExact, &direct, &scratch);
        compare(&mut w, CheckId::ZfBlockExact, &block, &scratch);
        if let (Ok(d), Ok(b)) = (&direct, &block) {
            w.record(CheckId::ZfRoutesAgree, design_deviation(&d.design, &b.design));
            let gd = d.zf.as_ref().map(|z| z.pinv.matrix());
            let gb = b.zf.as_ref().map(|z| z.pinv.matrix());
            if let (Some(gd), Some(gb)) = (gd, gb) {
                if gb.ncols() > 0 {
                    w.record(CheckId::ZfRoutesAgree, rel_frobenius(gd, gb));
                }
            }
        }
    }

    // MRT may be infeasible before the change; then there is nothing to update.
    if let Ok(mrt) = start(Scheme::Mrt) {
        let inc = mrt.apply(&setup.event, &UpdatePolicy::default());
        compare(&mut w, CheckId::MrtExact, &inc, &redesign(&setup.end, &setup.end_gamma, Scheme::Mrt));
    }

    let opt = start(Scheme::Optimal)?;
    let mut powers = Vec::new();
    for mode in [NuMode::ExactRefit, NuMode::InverseApprox, NuMode::OrthogonalApprox] {
        match opt.apply(&setup.event, &policy(ZfMethod::Direct, mode)) {
            Ok(sys) => {
                w.record(CheckId::OptSinr, sys.design.max_sinr_rel_error(&setup.end_gamma));
                w.record(CheckId::CacheAudit, cache_deviation(&sys));
                powers.push(Some(sys.design.total_power));
            }
            Err(BeamError::Infeasible { .. }) if mode != NuMode::ExactRefit => powers.push(None),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(exact) = powers[0] {
        for approx in powers[1..].iter().flatten() {
            w.record(CheckId::OptOrdering, ((exact - approx) / approx).max(0.0));
        }
    }
    Ok(w)
}

fn compare(
    w: &mut Worst,
    id: CheckId,
    inc: &Result<LiveSystem, BeamError>,
    scratch: &Result<Design, BeamError>,
) {
    match (inc, scratch) {
        (Ok(sys), Ok(d)) => {
            w.record(id, design_deviation(&sys.design, d));
            w.record(CheckId::CacheAudit, cache_deviation(sys));
        }
        (Err(_), Err(_)) => {}
        _ => w.record(CheckId::FeasibilityAgrees, 1.0),
    }
}

fn cache_deviation(sys: &LiveSystem) -> f64 {
    let a = sys.audit();
    a.pinv_identity.max(a.gram_inverse).max(a.dual_inverse).max(a.coupling_inverse)
}

/// Runs every check for all scenarios over the configured drops and grid.
pub fn verify(cfg: &ExperimentConfig, threads: usize) -> Result<VerifyReport, HarnessError> {
    let base = ExperimentConfig { scenario: Scenario::GammaChange, ..cfg.clone() };
    base.validate()?;
    let scenarios: Vec<Scenario> =
        Scenario::ALL.into_iter().filter(|&s| s != Scenario::UserOut || cfg.k >= 2).collect();
    let jobs: Vec<(Scenario, f64, u64)> = scenarios
        .iter()
        .flat_map(|&s| cfg.sinr_grid_db.iter().flat_map(move |&g| (0..cfg.drops as u64).map(move |d| (s, g, d))))
        .collect();
    let worst = with_pool(threads, || {
        jobs.par_iter()
            .map(|&(s, g, d)| check_drop(cfg, s, g, d))
            .try_reduce(Worst::default, |a, b| Ok(a.merge(b)))
    })??;
    let checks = CHECKS
        .iter()
        .map(|&id| CheckResult {
            name: id.name(),
            worst: worst.worst[id as usize],
            tol: id.tol(),
            samples: worst.samples[id as usize],
        })
        .collect();
    Ok(VerifyReport { checks })
}
