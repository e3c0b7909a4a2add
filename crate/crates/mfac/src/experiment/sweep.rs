//! Multi-configuration sweeps with a combined metric table.
//!
//! A sweep file is TOML with one `[[case]]` table per run:
//!
//! ```toml
//! [[case]]
//! name = "case-1"
//! mode = "mfg"
//! preset = "lq1d-paper"
//! seed = 42
//!
//! [case.rates]
//! v = 1e-3
//! pi = 5e-4
//! ```
//!
//! The combined CSV mirrors the benchmark tables: one row per metric
//! (`e_mu`, `e_alpha`, `e_V`), one column per case. Per-case failures are
//! recorded in their cells and the sweep continues.

use super::config::ExperimentConfig;
use super::io::write_atomic;
use super::runner::{run, RunArtifacts};
use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
struct SweepFile {
    #[serde(rename = "case")]
    cases: Vec<SweepCase>,
}

#[derive(Debug, Clone, Deserialize)]
struct SweepCase {
    name: Option<String>,
    #[serde(flatten)]
    config: ExperimentConfig,
}

/// Result of one sweep cell.
#[derive(Debug)]
pub enum CaseOutcome {
    Done {
        artifacts: RunArtifacts,
        e_mu: f64,
        e_alpha: f64,
        e_value: f64,
    },
    Failed(String),
}

/// Outcome of a whole sweep.
#[derive(Debug)]
pub struct SweepOutcome {
    pub names: Vec<String>,
    pub outcomes: Vec<CaseOutcome>,
    pub table_path: PathBuf,
}

impl SweepOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.outcomes
            .iter()
            .all(|o| matches!(o, CaseOutcome::Done { .. }))
    }
}

/// Parse a sweep file and run every case.
pub fn sweep_file(text: &str, out_dir: &Path) -> Result<SweepOutcome> {
    let parsed: SweepFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("sweep parse error: {e}")))?;
    let configs: Vec<(String, ExperimentConfig)> = parsed
        .cases
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let name = c.name.unwrap_or_else(|| format!("case-{}", i + 1));
            (name, c.config)
        })
        .collect();
    sweep(&configs, out_dir)
}

/// Run all configs, emit the combined table. Empty input is a usage error.
pub fn sweep(configs: &[(String, ExperimentConfig)], out_dir: &Path) -> Result<SweepOutcome> {
    if configs.is_empty() {
        return Err(Error::Config("sweep needs at least one case".into()));
    }
    let mut names = Vec::with_capacity(configs.len());
    let mut outcomes = Vec::with_capacity(configs.len());
    for (name, cfg) in configs {
        names.push(name.clone());
        let mut case_cfg = cfg.clone();
        if case_cfg.out.is_none() {
            case_cfg.out = Some(out_dir.join(name).to_string_lossy().into_owned());
        }
        match run(&case_cfg) {
            Ok(artifacts) => {
                let summary = std::fs::read_to_string(&artifacts.summary)?;
                let parsed: serde_json::Value = serde_json::from_str(&summary)
                    .map_err(|e| Error::Serde(e.to_string()))?;
                let get = |k: &str| -> f64 {
                    parsed["report"][k].as_f64().unwrap_or(f64::NAN)
                };
                outcomes.push(CaseOutcome::Done {
                    artifacts,
                    e_mu: get("e_mu"),
                    e_alpha: get("e_alpha"),
                    e_value: get("e_value"),
                });
            }
            Err(e) => outcomes.push(CaseOutcome::Failed(e.to_string())),
        }
    }

    let mut table = String::from("metric");
    for n in &names {
        table.push(',');
        table.push_str(n);
    }
    table.push('\n');
    for (label, pick) in [
        ("e_mu", 0usize),
        ("e_alpha", 1),
        ("e_V", 2),
    ] {
        table.push_str(label);
        for o in &outcomes {
            table.push(',');
            match o {
                CaseOutcome::Done {
                    e_mu,
                    e_alpha,
                    e_value,
                    ..
                } => {
                    let v = [e_mu, e_alpha, e_value][pick];
                    table.push_str(&format!("{v}"));
                }
                CaseOutcome::Failed(msg) => {
                    table.push_str(&format!("error: {}", msg.replace(',', ";")));
                }
            }
        }
        table.push('\n');
    }
    let table_path = out_dir.join("sweep.csv");
    write_atomic(&table_path, &table)?;
    Ok(SweepOutcome {
        names,
        outcomes,
        table_path,
    })
}
