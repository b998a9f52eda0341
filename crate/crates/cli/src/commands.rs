use std::path::Path;

use serde::{Deserialize, Serialize};
use simplexdyn::payoff::{analyze, monotonicity_probe, MatrixReport, ProbeOutcome};
use simplexdyn::suites::{self, SuiteConfig, SuiteReport};

use crate::config::{create_dir, load, write_json, MatrixSpec, Provenance};
use crate::failure::Failure;

fn default_probe_samples() -> usize {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub seed: u64,
    #[serde(rename = "A")]
    pub a: MatrixSpec,
    /// Pairs drawn by the monotonicity probe.
    #[serde(default = "default_probe_samples")]
    pub probe_samples: usize,
}

#[derive(Debug, Serialize)]
struct AnalyzeArtifact {
    provenance: Provenance,
    report: MatrixReport,
    monotonicity_probe: ProbeOutcome,
}

pub fn matrix_analyze(config: &Path, out: &Path) -> Result<(), Failure> {
    let loaded = load::<AnalyzeConfig>(config)?;
    let cfg = &loaded.config;
    let a = cfg.a.load(&loaded)?;
    let report = analyze(&a).map_err(Failure::run)?;
    let probe = monotonicity_probe(&a, cfg.probe_samples, cfg.seed);
    create_dir(out)?;
    let path = out.join("matrix_report.json");
    write_json(
        &path,
        &AnalyzeArtifact { provenance: loaded.provenance("matrix-analyze", Some(cfg.seed)), report, monotonicity_probe: probe },
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct VerifyArtifact {
    provenance: Provenance,
    report: SuiteReport,
}

pub fn verify(config: &Path, out: &Path) -> Result<(), Failure> {
    let loaded = load::<SuiteConfig>(config)?;
    let report = suites::run(&loaded.config).map_err(Failure::run)?;
    for line in report.lines() {
        println!("{line}");
    }
    create_dir(out)?;
    let path = out.join(format!("verify_{}.json", report.suite));
    let failed: Vec<String> = report.failed().map(|g| g.name.clone()).collect();
    let pass = report.pass;
    write_json(&path, &VerifyArtifact { provenance: loaded.provenance("verify", Some(loaded.config.seed)), report })?;
    println!("wrote {}", path.display());
    if pass {
        Ok(())
    } else if failed.is_empty() {
        Err(Failure::Verification("suite produced no gates".into()))
    } else {
        Err(Failure::Verification(format!("failed gates: {}", failed.join("; "))))
    }
}
