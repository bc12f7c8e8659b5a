//! Run orchestration and file outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dgshock_core::diagnostics::{
    boundedness_check_linf, energy_terms, error_norms, shock_position, stability_check_l2, EnergyReport, CSV_COLUMNS,
};
use dgshock_core::elements::{AffineMap, ReferenceElement};
use dgshock_core::solver::{DGSolution, Scheme};
use dgshock_core::spectral::{verify_lemma, LemmaReport};
use dgshock_core::Execution;
use rayon::prelude::*;

use crate::config::{RunConfig, ScenarioKind};

pub const OUT_ENV: &str = "DGSHOCK_OUT";

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub cells: usize,
    pub slabs: usize,
    pub p: usize,
    pub h: f64,
    pub report: EnergyReport,
    pub l2_ratio: f64,
    pub linf_within_data: bool,
    /// `(L1, L2)` error at `t_final` when the scenario has an exact solution.
    pub errors: Option<(f64, f64)>,
    /// Location of the half-jump crossing at `t_final`, Riemann runs only.
    pub shock_x: Option<f64>,
    pub max_newton: usize,
    pub unsettled_slabs: usize,
    pub max_slab_balance: f64,
    pub solution: DGSolution,
}

impl RunSummary {
    pub fn line(&self) -> String {
        let mut s = format!(
            "cells={} slabs={} p={} ratio_thm41={:.6e} ratio_thm51={:.6e} identity_defect={:.3e} signs={} max_newton={} unsettled_slabs={}",
            self.cells,
            self.slabs,
            self.p,
            self.report.ratio_thm41,
            self.report.ratio_thm51,
            self.report.identity_defect(),
            if self.report.signs_hold() { "ok" } else { "violated" },
            self.max_newton,
            self.unsettled_slabs,
        );
        if let Some((l1, l2)) = self.errors {
            let _ = write!(s, " l1_error={l1:.6e} l2_error={l2:.6e}");
        }
        if let Some(x) = self.shock_x {
            let _ = write!(s, " shock_x={x:.6}");
        }
        s
    }
}

/// The output directory, after the `DGSHOCK_OUT` override.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

pub fn build_scheme(config: &RunConfig) -> Result<Scheme> {
    config.validate()?;
    let law = config.law()?;
    let problem = config.problem(&law)?;
    let scheme = Scheme::new(
        law,
        problem,
        config.stabilization.clone(),
        config.newton.clone(),
        config.mesh()?,
        config.p,
    )?;
    Ok(scheme.with_execution(config.execution))
}

/// Solves and evaluates one configuration without touching the filesystem.
pub fn solve(config: &RunConfig) -> Result<RunSummary> {
    let scheme = build_scheme(config)?;
    let solution = scheme.march().map_err(|failure| anyhow::Error::new(failure).context("solver failed"))?;
    summarize(config, &scheme, solution)
}

fn summarize(config: &RunConfig, scheme: &Scheme, solution: DGSolution) -> Result<RunSummary> {
    let report = energy_terms(scheme, &solution, 2, &config.q_list)?;
    let l2 = stability_check_l2(scheme, &solution)?;
    let linf = boundedness_check_linf(scheme, &solution, &config.q_list)?;
    let errors = error_norms(scheme, &solution, config.t_final)?;
    let shock_x = match config.scenario {
        ScenarioKind::Riemann => shock_position(&solution, config.t_final, 0.5 * (config.left + config.right))?,
        _ => None,
    };
    let mut max_slab_balance = 0.0f64;
    for slab in 0..scheme.mesh().num_slabs() {
        max_slab_balance = max_slab_balance.max(scheme.slab_balance(&solution, slab)?.abs());
    }
    let stats = solution.stats();
    Ok(RunSummary {
        cells: config.cells,
        slabs: config.slabs,
        p: config.p,
        h: scheme.mesh().h(),
        l2_ratio: l2.ratio,
        linf_within_data: linf.within_data_bound(1e-8),
        errors,
        shock_x,
        max_newton: stats.iter().map(|s| s.newton_iterations).max().unwrap_or(0),
        unsettled_slabs: stats.iter().filter(|s| !s.picard_converged).count(),
        max_slab_balance,
        report,
        solution,
    })
}

pub fn diagnostics_csv(report: &EnergyReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for row in report.csv_rows() {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn write_outputs(dir: &Path, config: &RunConfig, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, text: &str| {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    put("solution.txt", &summary.solution.dump())?;
    put("diagnostics.csv", &diagnostics_csv(&summary.report)?)?;
    put("config.txt", &config.to_text())?;
    put("summary.txt", &(summary.line() + "\n"))
}

/// `dgshock run`: solve, write the artifacts into `dir` and return the summary.
///
/// On solver failure the partial solution is still dumped before the error is returned.
pub fn run_into(config: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let scheme = build_scheme(config)?;
    let solution = match scheme.march() {
        Ok(s) => s,
        Err(failure) => {
            fs::create_dir_all(dir).ok();
            fs::write(dir.join("solution.txt"), failure.partial.dump()).ok();
            bail!("solver failed: {failure}");
        }
    };
    let summary = summarize(config, &scheme, solution)?;
    write_outputs(dir, config, &summary)?;
    Ok(summary)
}

pub fn run(config: &RunConfig) -> Result<RunSummary> {
    run_into(config, &output_dir(config))
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "level",
    "cells",
    "slabs",
    "h",
    "l1_error",
    "l2_error",
    "order_l1",
    "order_l2",
    "l2_sup",
    "ratio_thm41",
    "ratio_thm51",
    "identity_defect",
    "shock_x",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn sweep_csv(levels: &[RunSummary]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for (i, s) in levels.iter().enumerate() {
        let order = |pick: fn((f64, f64)) -> f64| -> Option<f64> {
            let prev = levels.get(i.checked_sub(1)?)?;
            let (a, b) = (pick(prev.errors?), pick(s.errors?));
            Some((a / b).ln() / (prev.h / s.h).ln())
        };
        w.write_record([
            i.to_string(),
            s.cells.to_string(),
            s.slabs.to_string(),
            format!("{:e}", s.h),
            opt(s.errors.map(|e| e.0)),
            opt(s.errors.map(|e| e.1)),
            opt(order(|e| e.0)),
            opt(order(|e| e.1)),
            format!("{:e}", s.report.l2_sup),
            format!("{:e}", s.report.ratio_thm41),
            format!("{:e}", s.report.ratio_thm51),
            format!("{:e}", s.report.identity_defect()),
            opt(s.shock_x),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// `dgshock sweep`: levels `0..=refine`, each doubling cells and slabs, run concurrently.
pub fn sweep(config: &RunConfig, refine: u32) -> Result<Vec<RunSummary>> {
    let root = output_dir(config);
    let levels: Vec<RunSummary> = (0..=refine)
        .into_par_iter()
        .map(|level| {
            let c = config.refined(1 << level);
            run_into(&c, &root.join(format!("level{level}"))).with_context(|| format!("level {level}"))
        })
        .collect::<Result<_>>()?;
    fs::create_dir_all(&root)?;
    fs::write(root.join("sweep.csv"), sweep_csv(&levels)?)?;
    Ok(levels)
}

/// `dgshock verify-lemma`: one report per degree on the identity-mapped reference element.
pub fn lemma_reports(
    degrees: &[usize],
    dim: usize,
    q_list: &[u32],
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<LemmaReport>> {
    degrees
        .iter()
        .map(|&p| {
            let reference = ReferenceElement::with_dim(p, dim)?;
            Ok(verify_lemma(&reference, &AffineMap::identity(dim), trials, q_list, seed, exec)?)
        })
        .collect()
}

pub fn lemma_lines(report: &LemmaReport) -> Vec<String> {
    report
        .per_q
        .iter()
        .map(|r| {
            format!(
                "p={} dim={} q={} min_ratio={:.6e} C_check={:.6e} lambda2={:.6e} lambda_max={:.6e} Lambda_p={:.6} n_dof={} trials={} bound={}",
                report.p,
                report.dim,
                r.q,
                r.min_ratio,
                report.c_check,
                report.lambda2,
                report.lambda_max,
                report.lebesgue,
                report.n_dof,
                r.trials_used,
                if r.min_ratio >= report.c_check - 1e-10 { "ok" } else { "violated" },
            )
        })
        .collect()
}
