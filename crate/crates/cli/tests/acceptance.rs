//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any line fails.

use std::time::{Duration, Instant};

use dgshock::run::{diagnostics_csv, run_into, solve, RunSummary};
use dgshock::{RunConfig, ScenarioKind};
use dgshock_core::diagnostics::energy_terms;
use dgshock_core::elements::{AffineMap, ReferenceElement};
use dgshock_core::law::ConservationLaw;
use dgshock_core::mesh::SpaceTimeMesh;
use dgshock_core::problem::Scenario;
use dgshock_core::solver::{NewtonSettings, Scheme, StabilizationConfig};
use dgshock_core::spectral::{random_psd_matrix, verify_lemma, verify_range_inclusion};
use dgshock_core::Execution;
use rayon::prelude::*;

// Tolerances and limits, fixed here rather than taken from library constants.
const LEMMA_SLACK: f64 = 1e-10;
const LEMMA_Q_SPREAD: f64 = 0.05;
const LEMMA_TRIALS: usize = 1000;
const LEMMA_SECONDS: u64 = 30;
const RANGE_TOL: f64 = 1e-10;
const RANGE_MATRICES: u64 = 100;
const RANGE_SAMPLES: usize = 1000;
const RANGE_SECONDS: u64 = 10;
const SIGN_REL_TOL: f64 = 1e-10;
const IDENTITY_REL_TOL: f64 = 1e-8;
const BALANCE_FACTOR: f64 = 10.0;
const CATALOG_SECONDS: u64 = 300;
const THM41_SPREAD: f64 = 0.05;
const P0_DATA_SLACK: f64 = 1e-8;
const SWEEP_SECONDS: u64 = 600;
const SHOCK_WINDOW_H: f64 = 2.0;
const ORDER_MARGIN: f64 = 0.5;
const SWEEP_CELLS: [usize; 3] = [16, 32, 64];

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn check(&mut self, id: &str, ok: bool, detail: impl AsRef<str>) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} [{id}] {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    }

    fn runtime(&mut self, id: &str, elapsed: Duration, limit: u64) {
        self.check(
            id,
            elapsed.as_secs_f64() < limit as f64,
            format!("runtime {:.2} s (limit {limit} s)", elapsed.as_secs_f64()),
        );
    }
}

fn config(law: &str, scenario: ScenarioKind, n: usize, p: usize) -> RunConfig {
    RunConfig::new(law, scenario, n, n, p)
}

fn criterion_1(suite: &mut Suite) {
    let start = Instant::now();
    let cases = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2)];
    for (dim, p) in cases {
        let reference = ReferenceElement::with_dim(p, dim).unwrap();
        let report = verify_lemma(
            &reference,
            &AffineMap::identity(dim),
            LEMMA_TRIALS,
            &[2, 4, 6, 8],
            2024,
            Execution::Parallel,
        )
        .unwrap();
        let worst = report.per_q.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
        let ratios: Vec<String> = report.per_q.iter().map(|r| format!("q{}={:.4}", r.q, r.min_ratio)).collect();
        suite.check(
            "1a",
            report.per_q.iter().all(|r| r.min_ratio >= report.c_check - LEMMA_SLACK),
            format!(
                "lemma dim={dim} p={p}: min ratio {worst:.4e} >= C_check {:.4e} ({})",
                report.c_check,
                ratios.join(" ")
            ),
        );
        suite.check(
            "1b",
            report.q_spread() < LEMMA_Q_SPREAD,
            format!(
                "lemma dim={dim} p={p}: q-spread of min ratio {:.2}% < {:.0}%",
                100.0 * report.q_spread(),
                100.0 * LEMMA_Q_SPREAD
            ),
        );
    }
    suite.runtime("1", start.elapsed(), LEMMA_SECONDS);
}

fn criterion_2(suite: &mut Suite) {
    let start = Instant::now();
    for q in [2, 4, 8] {
        let reports: Vec<_> = (0..RANGE_MATRICES)
            .into_par_iter()
            .map(|seed| {
                let n = 1 + (seed as usize % 10);
                verify_range_inclusion(&random_psd_matrix(n, seed), q, RANGE_SAMPLES, 1000 + seed).unwrap()
            })
            .collect();
        let violations: usize = reports.iter().map(|r| r.violations).sum();
        let samples: usize = reports.iter().map(|r| r.samples).sum();
        let bad_matrices = reports.iter().filter(|r| r.violations > 0).count();
        let low = reports.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min);
        let excess = reports
            .iter()
            .map(|r| r.max_value - r.lambda_max)
            .fold(f64::NEG_INFINITY, f64::max);
        suite.check(
            "2",
            violations == 0 && low >= -RANGE_TOL && excess <= RANGE_TOL,
            format!(
                "numerical range q={q}: {violations}/{samples} samples outside [-tol, lambda_max+tol] in {bad_matrices}/{RANGE_MATRICES} matrices; min {low:.3e}, max over lambda_max {excess:.3e}"
            ),
        );
    }
    suite.runtime("2", start.elapsed(), RANGE_SECONDS);
}

fn catalog_scheme(law: &ConservationLaw, scenario: &Scenario, p: usize) -> Scheme {
    let problem = scenario.build(law, [0.0, 1.0], 0.5).unwrap();
    let mesh = SpaceTimeMesh::build([0.0, 1.0], 0.5, 32, 32).unwrap();
    Scheme::new(
        law.clone(),
        problem,
        StabilizationConfig::default(),
        NewtonSettings::default(),
        mesh,
        p,
    )
    .unwrap()
}

fn criteria_3_to_5(suite: &mut Suite) {
    let start = Instant::now();
    let laws = [ConservationLaw::burgers(), ConservationLaw::advection(1.0)];
    let scenarios = [
        Scenario::Riemann {
            left: 1.0,
            right: 0.0,
            x0: 0.3,
        },
        Scenario::Sine { amplitude: 1.0 },
        Scenario::Constant { value: 0.5 },
    ];
    let mut cases = Vec::new();
    for law in &laws {
        for scenario in &scenarios {
            for p in [0, 1] {
                cases.push((law.clone(), scenario.clone(), p));
            }
        }
    }
    let results: Vec<_> = cases
        .par_iter()
        .map(|(law, scenario, p)| {
            let scheme = catalog_scheme(law, scenario, *p);
            let solution = scheme.march().unwrap();
            let quadratic = energy_terms(&scheme, &solution, 2, &[]).unwrap();
            let quartic = energy_terms(&scheme, &solution, 4, &[]).unwrap();
            let balance = (0..scheme.mesh().num_slabs())
                .map(|s| scheme.slab_balance(&solution, s).unwrap().abs())
                .fold(0.0, f64::max);
            let newton_tol = scheme.newton().abs_tol;
            (format!("{} {} p={p}", law.name(), scenario.name()), quadratic, quartic, balance, newton_tol)
        })
        .collect();
    for (name, quadratic, quartic, balance, newton_tol) in &results {
        for (q, report) in [(2, quadratic), (4, quartic)] {
            let tol = SIGN_REL_TOL * report.scale;
            let m = report.sign_margins();
            suite.check(
                "3",
                m.e1 >= -tol && m.e2_e3 >= -tol && m.e4_e5_f1 >= -tol,
                format!(
                    "signs {name} q={q}: min E1 {:.3e}, E2+E3 {:.3e}, E4+E5-F1 {:.3e} (tol {tol:.1e})",
                    m.e1, m.e2_e3, m.e4_e5_f1
                ),
            );
        }
        let tol = IDENTITY_REL_TOL * quadratic.scale;
        let slab_worst = quadratic
            .slabs
            .iter()
            .map(|s| s.identity_defect().abs())
            .fold(0.0, f64::max);
        let defect = quadratic.identity_defect();
        suite.check(
            "4",
            defect.abs() <= tol && slab_worst <= tol,
            format!("energy identity {name}: defect {defect:.3e}, worst slab {slab_worst:.3e} (tol {tol:.1e})"),
        );
        suite.check(
            "5",
            *balance <= BALANCE_FACTOR * newton_tol,
            format!(
                "conservation {name}: max slab balance {balance:.3e} <= {:.1e}",
                BALANCE_FACTOR * newton_tol
            ),
        );
    }
    suite.runtime("3-5", start.elapsed(), CATALOG_SECONDS);
}

/// Runs `law`/`scenario` on the three sweep levels for each degree, concurrently.
fn sweep(law: &str, scenario: ScenarioKind) -> Vec<(usize, Vec<RunSummary>)> {
    let runs: Vec<(usize, usize)> = (0..=2).flat_map(|p| SWEEP_CELLS.map(|n| (p, n))).collect();
    let summaries: Vec<RunSummary> = runs
        .par_iter()
        .map(|&(p, n)| solve(&config(law, scenario, n, p)).unwrap())
        .collect();
    (0..=2)
        .map(|p| (p, summaries.iter().filter(|s| s.p == p).cloned().collect()))
        .collect()
}

fn criterion_6(suite: &mut Suite) {
    for (p, levels) in sweep("burgers", ScenarioKind::Sine) {
        let ratios: Vec<f64> = levels.iter().map(|s| s.report.ratio_thm41).collect();
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = (max - min) / max;
        suite.check(
            "6",
            ratios.iter().all(|r| r.is_finite()) && spread < THM41_SPREAD,
            format!(
                "L2 bound burgers sine p={p}: ratio_thm41 {} spread {:.2}% < {:.0}%",
                fmt_list(&ratios),
                100.0 * spread,
                100.0 * THM41_SPREAD
            ),
        );
    }
}

fn criteria_7_and_8(suite: &mut Suite) {
    let start = Instant::now();
    let levels = sweep("burgers", ScenarioKind::Riemann);
    let elapsed = start.elapsed();
    let t_final = 0.5;
    let expected = 0.3 + 0.5 * t_final;
    for (p, runs) in &levels {
        let ratios: Vec<f64> = runs.iter().map(|s| s.report.ratio_thm51).collect();
        suite.check(
            "7",
            ratios.iter().all(|&r| r <= 1.0),
            format!("max-norm bound burgers riemann p={p}: ratio_thm51 {} <= 1", fmt_list(&ratios)),
        );
        if *p == 0 {
            // data sup of the Riemann problem is max(|u_L|, |u_R|) = 1
            let maxes: Vec<f64> = runs.iter().map(|s| s.report.max_abs).collect();
            suite.check(
                "7",
                maxes.iter().all(|&m| m <= 1.0 + P0_DATA_SLACK),
                format!("p=0 data bound: max|U| {} <= 1 + {P0_DATA_SLACK:.0e}", fmt_list(&maxes)),
            );
        }
        for s in runs {
            let h = 1.0 / s.cells as f64;
            let x = s.shock_x.unwrap_or(f64::NAN);
            suite.check(
                "8",
                (x - expected).abs() <= SHOCK_WINDOW_H * h,
                format!(
                    "shock position p={p} h=1/{}: {x:.5} vs {expected} (window {:.4})",
                    s.cells,
                    SHOCK_WINDOW_H * h
                ),
            );
        }
        let l1: Vec<f64> = runs.iter().map(|s| s.errors.map_or(f64::NAN, |e| e.0)).collect();
        suite.check(
            "8",
            l1.windows(2).all(|w| w[1] < w[0]),
            format!("L1 error decreases p={p}: {}", fmt_list(&l1)),
        );
    }
    suite.runtime("7", elapsed, SWEEP_SECONDS);
}

fn criterion_9(suite: &mut Suite) {
    for (p, runs) in sweep("advection:1", ScenarioKind::Sine) {
        let l2: Vec<f64> = runs.iter().map(|s| s.errors.map_or(f64::NAN, |e| e.1)).collect();
        let orders: Vec<f64> = l2.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let floor = p as f64 + ORDER_MARGIN;
        suite.check(
            "9",
            orders.iter().all(|&o| o >= floor),
            format!(
                "transport order p={p}: L2 errors {} orders {} >= {floor}",
                fmt_list(&l2),
                fmt_list(&orders)
            ),
        );
    }
}

fn criterion_10(suite: &mut Suite) {
    let law = ConservationLaw::burgers();
    let problem = Scenario::Riemann {
        left: 1.0,
        right: 0.0,
        x0: 0.3,
    }
    .build(&law, [0.0, 1.0], 0.5)
    .unwrap();
    let full_mesh = SpaceTimeMesh::build([0.0, 1.0], 0.5, 32, 16).unwrap();
    let cut = 9;
    let short_mesh =
        SpaceTimeMesh::from_levels(full_mesh.time_levels()[..=cut].to_vec(), full_mesh.space_nodes().to_vec()).unwrap();
    let march = |mesh| {
        Scheme::new(law.clone(), problem.clone(), StabilizationConfig::default(), NewtonSettings::default(), mesh, 1)
            .unwrap()
            .march()
            .unwrap()
    };
    let (full, short) = (march(full_mesh), march(short_mesh));
    let identical = (0..cut).all(|slab| {
        let a = full.slab_coefficients(slab).unwrap();
        let b = short.slab_coefficients(slab).unwrap();
        a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    suite.check(
        "10",
        identical,
        format!("causality: first {cut} of 16 slabs bitwise identical with later slabs removed"),
    );

    let mut c = config("burgers", ScenarioKind::Riemann, 32, 1);
    c.newton.perturbation = 1e-3;
    c.newton.seed = 17;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    for (dir, exec) in dirs.iter().zip([Execution::Parallel, Execution::Sequential]) {
        let mut run = c.clone();
        run.execution = exec;
        run_into(&run, dir.path()).unwrap();
        files.push(std::fs::read(dir.path().join("diagnostics.csv")).unwrap());
    }
    let again = diagnostics_csv(&solve(&c).unwrap().report).unwrap();
    suite.check(
        "10",
        files[0] == files[1] && files[0] == again.as_bytes(),
        "determinism: seeded run gives byte-identical diagnostics.csv across repeats and execution modes",
    );
}

fn fmt_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn main() {
    let start = Instant::now();
    let mut suite = Suite { passed: 0, failed: 0 };
    criterion_1(&mut suite);
    criterion_2(&mut suite);
    criteria_3_to_5(&mut suite);
    criterion_6(&mut suite);
    criteria_7_and_8(&mut suite);
    criterion_9(&mut suite);
    criterion_10(&mut suite);
    println!(
        "acceptance: {} passed, {} failed in {:.1} s",
        suite.passed,
        suite.failed,
        start.elapsed().as_secs_f64()
    );
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
