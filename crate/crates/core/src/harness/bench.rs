//! Cost sweeps of the update kernels with log-log slope fits.
//!
//! Each operation is run on unit-gain Rayleigh channels over a grid of one
//! dimension while the other is held fixed. Recorded flop counts are
//! deterministic and give the asserted exponents; wall times are reported
//! alongside for information.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use crate::channel::{sample_channels, DropSeed};
use crate::design::{
    build_coupling_matrix, mrt_directions, power_load_with_inverse, solve_dual_fixed_point,
    FixedPointOptions, SinrTargets,
};
use crate::flops;
use crate::linalg::Pseudoinverse;
use crate::update::{
    mrt_pl_gamma_change, nu_inverse_approx, nu_orthogonal_approx, opt_power_load, zf_pinv_user_in,
    zf_pinv_user_out, ZfMethod, ZfState,
};

use super::config::ExperimentConfig;
use super::HarnessError;

/// Swept dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Users,
    Antennas,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Users => "k",
            Axis::Antennas => "nt",
        }
    }
}

/// A benchmarked kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchOp {
    /// Pseudoinverse column append, edited directly.
    ZfDirectIn,
    /// Pseudoinverse column append through the bordered Gram inverse.
    ZfBlockIn,
    ZfDirectOut,
    ZfBlockOut,
    /// Newcomer dual from the cached `M⁻¹`.
    OptNuInverse,
    /// Newcomer dual from the channel norm.
    OptNuOrthogonal,
    /// MRT loads after a target change, rank-one on `A⁻¹`.
    MrtGammaChange,
    /// Optimal-scheme loads, coupling matrix rebuilt and solved.
    OptPowerLoad,
}

impl BenchOp {
    pub const ALL: [BenchOp; 8] = [
        BenchOp::ZfDirectIn,
        BenchOp::ZfBlockIn,
        BenchOp::ZfDirectOut,
        BenchOp::ZfBlockOut,
        BenchOp::OptNuInverse,
        BenchOp::OptNuOrthogonal,
        BenchOp::MrtGammaChange,
        BenchOp::OptPowerLoad,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BenchOp::ZfDirectIn => "zf_user_in_direct",
            BenchOp::ZfBlockIn => "zf_user_in_block",
            BenchOp::ZfDirectOut => "zf_user_out_direct",
            BenchOp::ZfBlockOut => "zf_user_out_block",
            BenchOp::OptNuInverse => "opt_user_in_nu_inverse",
            BenchOp::OptNuOrthogonal => "opt_user_in_nu_orthogonal",
            BenchOp::MrtGammaChange => "mrt_pl_gamma_change",
            BenchOp::OptPowerLoad => "opt_power_load",
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            BenchOp::OptNuInverse | BenchOp::OptNuOrthogonal => Axis::Antennas,
            _ => Axis::Users,
        }
    }
}

/// Prepared inputs for one kernel at one size; `run` performs the kernel
/// once.
pub struct Prepared {
    run: Box<dyn Fn()>,
}

impl Prepared {
    pub fn run(&self) {
        (self.run)()
    }
}

/// Builds the inputs of `op` for `nt` antennas and `k` incumbent users.
pub fn prepare(op: BenchOp, nt: usize, k: usize, seed: u64) -> Result<Prepared, HarnessError> {
    let geom = crate::channel::CellGeometry::default();
    let ch = sample_channels(&vec![1.0; k + 1], nt, &geom, DropSeed::new(seed, 0))?;
    let h_new = ch.column(k);
    let incumbents = ch.leading(k);
    let h = incumbents.h().clone();
    let gamma = SinrTargets::uniform(k, 1.0)?;
    let run: Box<dyn Fn()> = match op {
        BenchOp::ZfDirectIn | BenchOp::ZfBlockIn | BenchOp::ZfDirectOut | BenchOp::ZfBlockOut => {
            let (pinv, gram_inv) = Pseudoinverse::refresh_from_scratch(&h)?;
            let zf = ZfState { pinv, gram_inv: Some(gram_inv) };
            let method = match op {
                BenchOp::ZfDirectIn | BenchOp::ZfDirectOut => ZfMethod::Direct,
                _ => ZfMethod::Block,
            };
            if matches!(op, BenchOp::ZfDirectIn | BenchOp::ZfBlockIn) {
                Box::new(move || {
                    black_box(zf_pinv_user_in(&zf, &h, &h_new, method).expect("independent newcomer"));
                })
            } else {
                let last = k - 1;
                Box::new(move || {
                    black_box(zf_pinv_user_out(&zf, &h, last, method).expect("k >= 2"));
                })
            }
        }
        BenchOp::OptNuInverse | BenchOp::OptNuOrthogonal => {
            let dual = solve_dual_fixed_point(&incumbents, &gamma, FixedPointOptions::default())?;
            if op == BenchOp::OptNuInverse {
                Box::new(move || {
                    black_box(nu_inverse_approx(&dual.m_inv, &h_new, 1.0));
                })
            } else {
                Box::new(move || {
                    black_box(nu_orthogonal_approx(&h_new, 1.0));
                })
            }
        }
        BenchOp::MrtGammaChange => {
            let dirs = mrt_directions(&incumbents)?;
            // A low target keeps MRT feasible at every size.
            let low = SinrTargets::uniform(k, 1e-3)?;
            let a = build_coupling_matrix(&incumbents, &dirs, &low)?;
            let (_, a_inv) = power_load_with_inverse(&a, incumbents.noise())?;
            let (h0, u0) = (incumbents.column(0), dirs.matrix().column(0).into_owned());
            let sigma2 = incumbents.noise().to_vec();
            Box::new(move || {
                black_box(mrt_pl_gamma_change(&a_inv, 0, 1e-3, 1.1e-3, &h0, &u0, &sigma2).expect("feasible"));
            })
        }
        BenchOp::OptPowerLoad => {
            let dual = solve_dual_fixed_point(&incumbents, &gamma, FixedPointOptions::default())?;
            let dirs = crate::design::optimal_directions(
                &incumbents,
                &dual,
                &gamma,
                crate::design::DirectionMode::ClosedForm,
            )?;
            Box::new(move || {
                black_box(opt_power_load(&incumbents, &dirs, &gamma).expect("feasible"));
            })
        }
    };
    Ok(Prepared { run })
}

/// One measured size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub nt: usize,
    pub k: usize,
    pub flops: u64,
    pub median_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSeries {
    pub op: BenchOp,
    pub points: Vec<BenchPoint>,
    pub slope_flops: f64,
    pub slope_time: f64,
}

impl BenchSeries {
    fn x(&self, p: &BenchPoint) -> f64 {
        match self.op.axis() {
            Axis::Users => p.k as f64,
            Axis::Antennas => p.nt as f64,
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

const BATCHES: usize = 5;

fn measure(prep: &Prepared, reps: usize) -> (u64, f64) {
    let ((), flops) = flops::measure(|| prep.run());
    let mut per_call: Vec<f64> = (0..BATCHES)
        .map(|_| {
            let t0 = Instant::now();
            for _ in 0..reps {
                prep.run();
            }
            t0.elapsed().as_nanos() as f64 / reps as f64
        })
        .collect();
    per_call.sort_by(f64::total_cmp);
    (flops, per_call[BATCHES / 2])
}

/// Measures one operation across its grid.
pub fn bench_op(op: BenchOp, cfg: &ExperimentConfig) -> Result<BenchSeries, HarnessError> {
    let b = &cfg.bench;
    let sizes: Vec<(usize, usize)> = match op.axis() {
        Axis::Users => b.k_grid.iter().map(|&k| (b.fixed_nt, k)).collect(),
        Axis::Antennas => b.nt_grid.iter().map(|&nt| (nt, b.fixed_k)).collect(),
    };
    let mut points = Vec::with_capacity(sizes.len());
    for (nt, k) in sizes {
        if matches!(op, BenchOp::ZfDirectOut | BenchOp::ZfBlockOut) && k < 2 {
            return Err(HarnessError::Config(format!("{} needs k >= 2", op.label())));
        }
        let prep = prepare(op, nt, k, cfg.seed)?;
        let (flops, median_ns) = measure(&prep, b.reps);
        points.push(BenchPoint { nt, k, flops, median_ns });
    }
    let mut series = BenchSeries { op, points, slope_flops: f64::NAN, slope_time: f64::NAN };
    let xs: Vec<f64> = series.points.iter().map(|p| series.x(p)).collect();
    let fl: Vec<f64> = series.points.iter().map(|p| p.flops as f64).collect();
    let tm: Vec<f64> = series.points.iter().map(|p| p.median_ns.max(1e-3)).collect();
    series.slope_flops = loglog_slope(&xs, &fl);
    series.slope_time = loglog_slope(&xs, &tm);
    Ok(series)
}

/// Runs every operation.
pub fn bench(cfg: &ExperimentConfig) -> Result<Vec<BenchSeries>, HarnessError> {
    cfg.validate()?;
    BenchOp::ALL.into_iter().map(|op| bench_op(op, cfg)).collect()
}

/// Per-point table: `op,axis,nt,k,flops,median_ns`.
pub fn points_csv(series: &[BenchSeries]) -> String {
    let mut out = String::from("op,axis,nt,k,flops,median_ns\n");
    for s in series {
        for p in &s.points {
            let _ = writeln!(out, "{},{},{},{},{},{:.1}", s.op.label(), s.op.axis().label(), p.nt, p.k, p.flops, p.median_ns);
        }
    }
    out
}

/// Exponent table: `op,axis,slope_flops,slope_time`.
pub fn slopes_table(series: &[BenchSeries]) -> String {
    let mut out = String::from("op,axis,slope_flops,slope_time\n");
    for s in series {
        let _ = writeln!(out, "{},{},{:.3},{:.3}", s.op.label(), s.op.axis().label(), s.slope_flops, s.slope_time);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        assert!((loglog_slope(&xs, &ys) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn every_op_runs_on_a_small_grid() {
        let mut cfg = ExperimentConfig::default();
        cfg.bench = super::super::config::BenchConfig {
            fixed_nt: 12,
            k_grid: vec![2, 4],
            fixed_k: 2,
            nt_grid: vec![4, 8],
            reps: 2,
        };
        let series = bench(&cfg).unwrap();
        assert_eq!(series.len(), BenchOp::ALL.len());
        for s in &series {
            assert!(s.points.iter().all(|p| p.flops > 0), "{:?}", s.op);
            assert!(s.slope_flops.is_finite());
        }
        assert_eq!(slopes_table(&series).lines().count(), 1 + BenchOp::ALL.len());
    }
}
