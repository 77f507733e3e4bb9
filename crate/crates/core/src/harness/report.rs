//! CSV table, metadata sidecar and gnuplot script for an experiment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::ExperimentConfig;
use super::experiment::{AggregateRow, ExperimentOutput};
use super::HarnessError;

pub const CSV_HEADER: &str =
    "sinr_db,scheme,scenario,mode,mean_power_dbm,gap_vs_baseline_db,feasible_rate,drops,mean_update_us";

fn opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "NA".to_string(),
    }
}

/// The aggregate table. Under `deterministic` the timing column is `NA`,
/// so identical configs give identical bytes.
pub fn csv(rows: &[AggregateRow], deterministic: bool) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let us = if deterministic { None } else { r.mean_update_us };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{},{}",
            r.sinr_db,
            r.scheme.label(),
            r.scenario,
            r.mode,
            opt(r.mean_power_dbm, 6),
            opt(r.gap_vs_baseline_db, 6),
            r.feasible_rate,
            r.drops,
            opt(us, 3),
        );
    }
    out
}

/// Human-readable notes on how the table was produced.
pub fn metadata(cfg: &ExperimentConfig, deterministic: bool) -> String {
    let mut out = String::new();
    if !deterministic {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let _ = writeln!(out, "# generated_unix={secs}");
    }
    let delta = match cfg.gamma_delta_scale {
        super::config::DeltaScale::Db => {
            format!("gamma_change raises the last user's target by {} dB (multiplicative)", cfg.gamma_delta_db)
        }
        super::config::DeltaScale::Linear => {
            format!("gamma_change raises the last user's target by {} (linear, additive)", cfg.gamma_delta_db)
        }
    };
    let notes = [
        "# mean_power_dbm: dBm of the mean transmit power in watts (averaged before conversion)".to_string(),
        "# gap_vs_baseline_db: 10*log10(mean power / mean power of the same scheme redesigned from scratch); \
         optimal variants use the optimal redesign"
            .to_string(),
        "# drops: drops feasible for every compared scheme and its baseline; only these are averaged".to_string(),
        "# feasible_rate: fraction of all drops on which the scheme's update produced a feasible design".to_string(),
        "# mean_update_us: mean wall time of the update over feasible drops; NA under --deterministic".to_string(),
        format!("# {delta}"),
    ];
    for n in notes {
        out.push_str(&n);
        out.push('\n');
    }
    out.push_str(&cfg.to_text());
    out
}

/// A gnuplot script drawing mean power against the SINR target, one curve
/// per scheme.
pub fn gnuplot_script(cfg: &ExperimentConfig, csv_name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set datafile missing 'NA'");
    let _ = writeln!(out, "set key autotitle columnhead");
    let _ = writeln!(out, "set title 'nt={} K={} {}'", cfg.nt, cfg.k, cfg.scenario);
    let _ = writeln!(out, "set xlabel 'SINR target (dB)'");
    let _ = writeln!(out, "set ylabel 'average transmit power (dBm)'");
    let _ = writeln!(out, "set grid");
    let curves: Vec<String> = cfg
        .schemes
        .iter()
        .map(|s| {
            format!(
                "'{csv_name}' using 1:(strcol(2) eq '{0}' ? $5 : NaN) with linespoints title '{0}'",
                s.label()
            )
        })
        .collect();
    let _ = writeln!(out, "plot {}", curves.join(", \\\n     "));
    out
}

/// Paths of the files written next to `csv_path`.
pub fn sidecar_paths(csv_path: &Path) -> (PathBuf, PathBuf) {
    let mut meta = csv_path.as_os_str().to_owned();
    meta.push(".meta.txt");
    (PathBuf::from(meta), csv_path.with_extension("gp"))
}

/// Writes the CSV, its metadata sidecar and a gnuplot script.
pub fn write_outputs(out: &ExperimentOutput, csv_path: &Path, deterministic: bool) -> Result<(), HarnessError> {
    let (meta_path, gp_path) = sidecar_paths(csv_path);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv_name = csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    std::fs::write(csv_path, csv(&out.rows, deterministic))?;
    std::fs::write(meta_path, metadata(&out.config, deterministic))?;
    std::fs::write(gp_path, gnuplot_script(&out.config, &csv_name))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Scenario, SchemeMode};

    fn row(power: Option<f64>) -> AggregateRow {
        AggregateRow {
            sinr_db: 4.0,
            scheme: SchemeMode::OptEq8,
            scenario: Scenario::UserIn,
            mode: "inverse_approx",
            mean_power_dbm: power,
            gap_vs_baseline_db: power.map(|_| 0.25),
            feasible_rate: 1.0,
            drops: 10,
            mean_update_us: Some(12.5),
            mean_flops: Some(100.0),
        }
    }

    #[test]
    fn csv_layout() {
        let text = csv(&[row(Some(-3.5)), row(None)], false);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "4,OPT_eq8,user_in,inverse_approx,-3.500000,0.250000,1.000000,10,12.500");
        assert_eq!(lines[2], "4,OPT_eq8,user_in,inverse_approx,NA,NA,1.000000,10,12.500");
        assert!(csv(&[row(Some(1.0))], true).lines().nth(1).unwrap().ends_with(",10,NA"));
    }

    #[test]
    fn metadata_timestamp_only_when_not_deterministic() {
        let cfg = ExperimentConfig::default();
        assert!(!metadata(&cfg, true).contains("generated_unix"));
        assert!(metadata(&cfg, false).contains("generated_unix"));
        assert!(metadata(&cfg, true).contains("2 dB"));
    }

    #[test]
    fn sidecars_sit_next_to_the_csv() {
        let (meta, gp) = sidecar_paths(Path::new("out/fig1.csv"));
        assert_eq!(meta, Path::new("out/fig1.csv.meta.txt"));
        assert_eq!(gp, Path::new("out/fig1.gp"));
        let script = gnuplot_script(&ExperimentConfig::default(), "fig1.csv");
        assert!(script.contains("'fig1.csv' using 1:(strcol(2) eq 'OPT_eq9' ? $5 : NaN)"));
    }
}
