//! Experiment output directory: `report.json`, per-size marginal CSVs and
//! two-column plot data for each enabled check.

use std::path::Path;

use thiserror::Error;

use crate::config::PlanConfig;
use crate::csvio::{self, CsvError};
use crate::experiment;
use crate::report::Report;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] CsvError),
}

pub fn emit(report: &Report, out_dir: &Path) -> Result<(), OutputError> {
    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, report.to_json()).map_err(|source| OutputError::Io {
        path: report_path.display().to_string(),
        source,
    })?;

    // Scaled marginal samples at the last comparison epoch, one file per n.
    for sys in &report.per_n {
        let block = sys.marginals.last().expect("comparison epochs nonempty");
        csvio::write_marginals(&out_dir.join(format!("marginals_n{}.csv", sys.n)), &block.x, &block.z)?;
    }
    if let Some(limit) = &report.limit {
        let block = limit.marginals.last().expect("comparison epochs nonempty");
        csvio::write_marginals(&out_dir.join("marginals_limit.csv"), &block.x, &block.z)?;
    }

    let ns: Vec<f64> = report.n_list.iter().map(|&n| n as f64).collect();
    let series = |vals: Vec<Option<f64>>| -> Option<Vec<(f64, f64)>> {
        let pairs: Vec<(f64, f64)> = ns
            .iter()
            .zip(&vals)
            .filter_map(|(&n, v)| v.map(|v| (n, v)))
            .collect();
        (!pairs.is_empty()).then_some(pairs)
    };

    if let Some(rows) = series(
        report
            .per_n
            .iter()
            .map(|s| s.ks_x.last().map(|e| e.statistic))
            .collect(),
    ) {
        csvio::write_plotdata(&out_dir.join("plotdata_ks_x.csv"), ("n", "ks"), &rows)?;
    }
    if let Some(rows) = series(report.per_n.iter().map(|s| s.ssc).collect()) {
        csvio::write_plotdata(&out_dir.join("plotdata_ssc.csv"), ("n", "ssc_median"), &rows)?;
    }
    if let Some(rows) = series(report.per_n.iter().map(|s| s.dai_he).collect()) {
        csvio::write_plotdata(&out_dir.join("plotdata_dai_he.csv"), ("n", "residual_median"), &rows)?;
    }
    if let Some(rows) = series(report.per_n.iter().map(|s| s.aq).collect()) {
        csvio::write_plotdata(&out_dir.join("plotdata_aq.csv"), ("n", "aq_median"), &rows)?;
    }
    if let Some(rows) = series(report.per_n.iter().map(|s| s.idle).collect()) {
        csvio::write_plotdata(&out_dir.join("plotdata_idle.csv"), ("n", "idle_median"), &rows)?;
    }
    if let Some(rows) = series(report.per_n.iter().map(|s| s.fluid_within).collect()) {
        csvio::write_plotdata(&out_dir.join("plotdata_fluid.csv"), ("n", "fraction_within"), &rows)?;
    }
    if let Some(rows) =
        series(report.per_n.iter().map(|s| s.vw_ks.map(|e| e.statistic)).collect())
    {
        csvio::write_plotdata(&out_dir.join("plotdata_vw.csv"), ("n", "ks"), &rows)?;
    }
    Ok(())
}

/// Re-simulates the first `plan.dump_paths` replications of each system size
/// (streams are deterministic) and writes them under
/// `paths_n<k>/path_<rep>.csv`.
pub fn dump_paths(plan: &PlanConfig, out_dir: &Path) -> Result<(), OutputError> {
    let count = match plan.dump_paths {
        Some(c) if c > 0 => c.min(plan.replications),
        _ => return Ok(()),
    };
    let sc = plan.scenario.build().map_err(|e| OutputError::Io {
        path: out_dir.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    for (ni, &n) in plan.n_list.iter().enumerate() {
        let dir = out_dir.join(format!("paths_n{n}"));
        std::fs::create_dir_all(&dir).map_err(|source| OutputError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for rep in 0..count {
            let cfg = experiment::replication_config(
                plan,
                n,
                experiment::sim_stream(ni, rep),
                plan.checks.vw,
            );
            let path = mshw_core::des::run(&sc, &cfg).map_err(|e| OutputError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            })?;
            csvio::write_sim_path(&dir.join(format!("path_{rep:04}.csv")), &path)?;
        }
    }
    Ok(())
}
