//! The three batch commands. Each returns whether all verdicts passed.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use feec_core::hodge::HodgePair;
use feec_core::perturbed::resonance_scan;
use feec_core::study::{run_convergence, run_infsup, StudyOptions, DEFAULT_SLOPE_TOLERANCE, DEFAULT_TOLERANCE};
use feec_core::verify::{parse_selector, run_suite};
use feec_core::{FeecError, SimplicialMesh};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, Study};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{context}: {source}")]
    Solver { context: String, source: FeecError },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

fn solver(context: impl Into<String>) -> impl FnOnce(FeecError) -> CommandError {
    let context = context.into();
    move |source| CommandError::Solver { context, source }
}

fn output_path(opts: &GlobalOptions, path: &Path) -> PathBuf {
    match &opts.out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CommandError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CommandError::Write { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CommandError::Write { path: path.to_path_buf(), source })
}

fn study_options(study: &Study, opts: &GlobalOptions, tolerance: f64) -> StudyOptions {
    StudyOptions { perturb: study.perturb, seed: opts.seed.unwrap_or(study.seed), tolerance: opts.tolerance.unwrap_or(tolerance) }
}

/// Refinement study: prints the table, writes CSV and Markdown reports.
pub fn cmd_convergence(config: &Path, opts: &GlobalOptions) -> Result<bool, CommandError> {
    let study = RunConfig::load(config)?.resolve()?;
    let so = study_options(&study, opts, DEFAULT_TOLERANCE);
    let context = format!("{} pair {} r={}", study.problem.name, study.pair_id, study.r);
    let report =
        run_convergence(&study.problem, &study.exact, study.pair_id, study.r, &study.m_list, &so).map_err(solver(context))?;
    let markdown = report.to_markdown();
    print!("{markdown}");
    let csv_path = output_path(opts, &study.csv);
    let md_path = output_path(opts, &study.markdown);
    write(&csv_path, &report.to_csv())?;
    write(&md_path, &markdown)?;
    println!("wrote {} and {}", csv_path.display(), md_path.display());
    Ok(report.passed())
}

/// Invariant suites; one `PASS|FAIL suite check value<=tol` line per check.
pub fn cmd_properties(selector: &str, opts: &GlobalOptions) -> Result<bool, CommandError> {
    let suites = parse_selector(selector).map_err(solver("properties"))?;
    let seed = opts.seed.unwrap_or(1);
    let mut all = true;
    for suite in suites {
        let checks = run_suite(suite, seed, None).map_err(solver(format!("{suite} suite")))?;
        let failed = checks.iter().filter(|c| !c.passed()).count();
        for c in &checks {
            println!("{c}");
        }
        println!("SUMMARY {suite} checks={} failed={failed}", checks.len());
        all &= failed == 0;
    }
    Ok(all)
}

/// Inf-sup estimates per level and their log-log slope, plus an optional
/// resonance scan on the coarsest mesh. A collapsed scan fails the verdict.
pub fn cmd_infsup(config: &Path, opts: &GlobalOptions) -> Result<bool, CommandError> {
    let study = RunConfig::load(config)?.resolve()?;
    let so = study_options(&study, opts, DEFAULT_SLOPE_TOLERANCE);
    let context = format!("{} pair {} r={}", study.problem.name, study.pair_id, study.r);
    let mut report = run_infsup(&study.problem, study.pair_id, study.r, &study.m_list, &so).map_err(solver(&context))?;
    report.tolerance = so.tolerance;
    print!("{}", report.to_text());
    let mut passed = report.passed();
    if let Some(lambdas) = &study.scan {
        let m = study.m_list[0];
        let mesh = SimplicialMesh::build_box(study.problem.n, m, so.perturb, so.seed.wrapping_add(m as u64))
            .map_err(solver(&context))?;
        let pair = HodgePair::canonical(&Arc::new(mesh), study.problem.k, study.pair_id, study.r, study.problem.bc)
            .map_err(solver(&context))?;
        let scan = resonance_scan(&pair, &study.problem.terms, lambdas, so.seed).map_err(solver(&context))?;
        let collapsed = scan.collapsed(1e-2);
        println!(
            "scan m={m}: min infsup {:.6e} at lambda={:.8} (median {:.6e}) {}",
            scan.estimate,
            scan.lambda,
            scan.typical,
            if collapsed { "collapsed" } else { "stable" }
        );
        passed &= !collapsed;
    }
    Ok(passed)
}
