//! CLI orchestration: experiment configs, suite execution, report emission.

pub mod cache;
pub mod config;
pub mod report;
pub mod suites;

use std::path::Path;

use crate::error::Result;
use crate::operator::SpectralOperator;

pub use config::{ExperimentConfig, Suite};
pub use report::{emit, Bundle, EmitFormat, SuiteReport};

fn run_suite(suite: Suite, cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    match suite {
        Suite::Identity => suites::run_identity(cfg, op),
        Suite::Gge => suites::run_gge(cfg, op),
        Suite::Decay => suites::run_decay(cfg, op),
        Suite::Molecules => suites::run_molecules(cfg, op),
        Suite::MainTheorem => suites::run_main_theorem(cfg, op),
        Suite::GapSweep => suites::run_gap_sweep(cfg, op),
    }
}

/// Runs the selected suites against the configured operator. Suites run
/// sequentially unless the parallel flag is set, in which case each suite
/// executes on its own thread; reports are assembled in selection order
/// either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Bundle> {
    cfg.validate()?;
    let selected = cfg.suites()?;
    let mut suites_out = Vec::with_capacity(selected.len());
    if selected.is_empty() {
        return Ok(Bundle { config: cfg.clone(), suites: suites_out });
    }
    let space = cfg.build_space()?;
    let op = cfg.build_operator(&space)?;

    if cfg.run.parallel && selected.len() > 1 {
        let results: Vec<Result<SuiteReport>> = std::thread::scope(|scope| {
            let handles: Vec<_> = selected
                .iter()
                .map(|&suite| {
                    let cfg_ref = &cfg;
                    let op_ref = &op;
                    scope.spawn(move || run_suite(suite, cfg_ref, op_ref))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
        });
        for result in results {
            suites_out.push(result?);
        }
    } else {
        for &suite in &selected {
            suites_out.push(run_suite(suite, cfg, &op)?);
        }
    }
    Ok(Bundle { config: cfg.clone(), suites: suites_out })
}

/// Runs the experiment and writes the bundle under `out`; returns the bundle
/// and whether every selected pass-criterion held.
pub fn run_and_emit(cfg: &ExperimentConfig, out: &Path) -> Result<(Bundle, bool)> {
    let bundle = run_experiment(cfg)?;
    emit(&bundle, out, &[EmitFormat::Json, EmitFormat::Csv])?;
    let pass = bundle.pass();
    Ok((bundle, pass))
}
