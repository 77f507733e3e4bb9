//! Experiment configuration: flat `key=value` lines with `#` comments.

use std::fmt;
use std::str::FromStr;

use crate::channel::CellGeometry;
use crate::design::Scheme;
use crate::update::{NuMode, ZfMethod};

use super::HarnessError;

/// Which change the experiment applies to the last user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Users `1..K−1` are served; user `K` joins.
    UserIn,
    /// `K` users are served; user `K` leaves.
    UserOut,
    /// `K` users are served; user `K` raises its target.
    GammaChange,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::UserIn, Scenario::UserOut, Scenario::GammaChange];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::UserIn => "user_in",
            Scenario::UserOut => "user_out",
            Scenario::GammaChange => "gamma_change",
        }
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.label() == s.trim())
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario '{s}'")))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One curve of an experiment: a scheme plus the way it reacts to the
/// change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeMode {
    Mrt,
    Zf,
    /// Optimal scheme, duals re-solved exactly from a warm start.
    OptExact,
    /// Optimal scheme, newcomer dual from the cached inverse.
    OptEq8,
    /// Optimal scheme, newcomer dual from the channel norm only.
    OptEq9,
    /// Optimal design recomputed from nothing.
    FullRedesign,
}

impl SchemeMode {
    pub const ALL: [SchemeMode; 6] = [
        SchemeMode::Mrt,
        SchemeMode::Zf,
        SchemeMode::OptExact,
        SchemeMode::OptEq8,
        SchemeMode::OptEq9,
        SchemeMode::FullRedesign,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeMode::Mrt => "MRT",
            SchemeMode::Zf => "ZF",
            SchemeMode::OptExact => "OPT_exact",
            SchemeMode::OptEq8 => "OPT_eq8",
            SchemeMode::OptEq9 => "OPT_eq9",
            SchemeMode::FullRedesign => "full_redesign",
        }
    }

    /// The beamforming scheme underneath.
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeMode::Mrt => Scheme::Mrt,
            SchemeMode::Zf => Scheme::Zf,
            _ => Scheme::Optimal,
        }
    }

    /// Dual re-estimation mode, for the incremental optimal variants.
    pub fn nu_mode(self) -> Option<NuMode> {
        match self {
            SchemeMode::OptExact => Some(NuMode::ExactRefit),
            SchemeMode::OptEq8 => Some(NuMode::InverseApprox),
            SchemeMode::OptEq9 => Some(NuMode::OrthogonalApprox),
            _ => None,
        }
    }

    /// Value of the CSV `mode` column.
    pub fn mode_label(self, zf_method: ZfMethod) -> &'static str {
        match self {
            SchemeMode::Mrt => "incremental",
            SchemeMode::Zf => match zf_method {
                ZfMethod::Direct => "incremental_direct",
                ZfMethod::Block => "incremental_block",
            },
            SchemeMode::FullRedesign => "scratch",
            other => other.nu_mode().map(NuMode::label).unwrap_or("incremental"),
        }
    }
}

impl FromStr for SchemeMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        SchemeMode::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::Config(format!("unknown scheme '{s}'")))
    }
}

/// How `gamma_delta_db` is applied in the target-change scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaScale {
    /// `γ̂ = γ · 10^(Δ/10)`: the step is taken on the dB axis of the sweep.
    #[default]
    Db,
    /// `γ̂ = γ + Δ` in linear units.
    Linear,
}

impl DeltaScale {
    pub fn label(self) -> &'static str {
        match self {
            DeltaScale::Db => "db",
            DeltaScale::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Antenna count held fixed while `k_grid` is swept.
    pub fixed_nt: usize,
    pub k_grid: Vec<usize>,
    /// User count held fixed while `nt_grid` is swept.
    pub fixed_k: usize,
    pub nt_grid: Vec<usize>,
    /// Timed repetitions per point; the median is reported.
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { fixed_nt: 64, k_grid: vec![8, 16, 32], fixed_k: 4, nt_grid: vec![16, 32, 64, 128], reps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nt: usize,
    pub k: usize,
    pub sinr_grid_db: Vec<f64>,
    pub drops: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub schemes: Vec<SchemeMode>,
    pub geometry: CellGeometry,
    pub gamma_delta_db: f64,
    pub gamma_delta_scale: DeltaScale,
    pub zf_method: ZfMethod,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nt: 8,
            k: 4,
            sinr_grid_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            drops: 1000,
            seed: 1,
            scenario: Scenario::UserIn,
            schemes: vec![SchemeMode::OptExact, SchemeMode::OptEq8, SchemeMode::OptEq9, SchemeMode::Zf],
            geometry: CellGeometry::default(),
            gamma_delta_db: 2.0,
            gamma_delta_scale: DeltaScale::Db,
            zf_method: ZfMethod::Direct,
            bench: BenchConfig::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parses `key=value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one key; used for both file lines and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "nt" => self.nt = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "sinr_grid_db" => self.sinr_grid_db = parse_list(key, value)?,
            "drops" => self.drops = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "scenario" => self.scenario = value.parse()?,
            "schemes" => self.schemes = parse_list(key, value)?,
            "radius_km" => self.geometry.radius_km = parse_num(key, value)?,
            "bs_height_m" => self.geometry.bs_height_m = parse_num(key, value)?,
            "path_loss_exponent" => self.geometry.path_loss_exponent = parse_num(key, value)?,
            "shadowing_std_db" => self.geometry.shadowing_std_db = parse_num(key, value)?,
            "noise_dbm" => self.geometry.noise_dbm = parse_num(key, value)?,
            "path_loss_intercept_db" => self.geometry.path_loss_intercept_db = parse_num(key, value)?,
            "gamma_delta_db" => self.gamma_delta_db = parse_num(key, value)?,
            "gamma_delta_scale" => {
                self.gamma_delta_scale = match value {
                    "db" => DeltaScale::Db,
                    "linear" => DeltaScale::Linear,
                    _ => return Err(HarnessError::Config(format!("{key}: expected db or linear"))),
                }
            }
            "zf_method" => {
                self.zf_method = match value {
                    "direct" => ZfMethod::Direct,
                    "block" => ZfMethod::Block,
                    _ => return Err(HarnessError::Config(format!("{key}: expected direct or block"))),
                }
            }
            "bench_fixed_nt" => self.bench.fixed_nt = parse_num(key, value)?,
            "bench_k" => self.bench.k_grid = parse_list(key, value)?,
            "bench_fixed_k" => self.bench.fixed_k = parse_num(key, value)?,
            "bench_nt" => self.bench.nt_grid = parse_list(key, value)?,
            "bench_reps" => self.bench.reps = parse_num(key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.drops == 0 {
            return fail("drops must be at least 1".into());
        }
        if self.nt == 0 {
            return fail("nt must be at least 1".into());
        }
        let min_k = match self.scenario {
            Scenario::UserIn | Scenario::GammaChange => 1,
            Scenario::UserOut => 2,
        };
        if self.k < min_k {
            return fail(format!("scenario {} needs k >= {min_k}", self.scenario));
        }
        if self.k > self.nt && self.schemes.contains(&SchemeMode::Zf) {
            return fail(format!("ZF needs k <= nt, got k={} nt={}", self.k, self.nt));
        }
        if self.sinr_grid_db.is_empty() || self.sinr_grid_db.iter().any(|g| !g.is_finite()) {
            return fail("sinr_grid_db must be a non-empty list of finite values".into());
        }
        if self.schemes.is_empty() {
            return fail("schemes must not be empty".into());
        }
        if !self.gamma_delta_db.is_finite() {
            return fail("gamma_delta_db must be finite".into());
        }
        if self.geometry.validate().is_err() {
            return fail(format!("invalid cell geometry {:?}", self.geometry));
        }
        let b = &self.bench;
        if b.reps == 0 || b.k_grid.len() < 2 || b.nt_grid.len() < 2 {
            return fail("bench grids need at least two points and reps >= 1".into());
        }
        if b.k_grid.iter().any(|&k| k == 0 || k >= b.fixed_nt) || b.nt_grid.iter().any(|&n| n <= b.fixed_k) {
            return fail("bench grids must keep 0 < k < nt".into());
        }
        Ok(())
    }

    /// The changed target for `gamma` under this config.
    pub fn raised_target(&self, gamma: f64) -> f64 {
        match self.gamma_delta_scale {
            DeltaScale::Db => gamma * 10f64.powf(self.gamma_delta_db / 10.0),
            DeltaScale::Linear => gamma + self.gamma_delta_db,
        }
    }

    /// Canonical `key=value` dump that [`ExperimentConfig::parse`] accepts.
    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let g = &self.geometry;
        let b = &self.bench;
        let lines = [
            format!("nt={}", self.nt),
            format!("k={}", self.k),
            format!("sinr_grid_db={}", join(&self.sinr_grid_db.iter().map(f64::to_string).collect::<Vec<_>>())),
            format!("drops={}", self.drops),
            format!("seed={}", self.seed),
            format!("scenario={}", self.scenario),
            format!("schemes={}", join(&self.schemes.iter().map(|s| s.label().to_string()).collect::<Vec<_>>())),
            format!("radius_km={}", g.radius_km),
            format!("bs_height_m={}", g.bs_height_m),
            format!("path_loss_exponent={}", g.path_loss_exponent),
            format!("shadowing_std_db={}", g.shadowing_std_db),
            format!("noise_dbm={}", g.noise_dbm),
            format!("path_loss_intercept_db={}", g.path_loss_intercept_db),
            format!("gamma_delta_db={}", self.gamma_delta_db),
            format!("gamma_delta_scale={}", self.gamma_delta_scale.label()),
            format!(
                "zf_method={}",
                match self.zf_method {
                    ZfMethod::Direct => "direct",
                    ZfMethod::Block => "block",
                }
            ),
            format!("bench_fixed_nt={}", b.fixed_nt),
            format!("bench_k={}", join(&b.k_grid.iter().map(usize::to_string).collect::<Vec<_>>())),
            format!("bench_fixed_k={}", b.fixed_k),
            format!("bench_nt={}", join(&b.nt_grid.iter().map(usize::to_string).collect::<Vec<_>>())),
            format!("bench_reps={}", b.reps),
        ];
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
