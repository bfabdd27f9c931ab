//! Acceptance gates. Runs without the libtest harness and prints one
//! `criterion N: PASS|FAIL` line per gate; exits nonzero if any gate fails.
//! Pass criterion numbers as arguments to run a subset.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use feec_core::hodge::HodgePair;
use feec_core::perturbed::resonance_scan;
use feec_core::refelem::element::supported_elements;
use feec_core::refelem::{quadrature, reference_element, space_dimension, Family, MAX_QUADRATURE_DEGREE};
use feec_core::study::{builtin_problem, predict_rates, rate_table, run_convergence, run_infsup, ConvergenceReport, StudyOptions};
use feec_core::verify::{run_suite, Suite};
use feec_core::SimplicialMesh;
use rayon::prelude::*;

struct Gate {
    passed: bool,
    details: Vec<String>,
    budget: Duration,
}

impl Gate {
    fn new(budget_secs: u64) -> Self {
        Self { passed: true, details: Vec::new(), budget: Duration::from_secs(budget_secs) }
    }

    fn record(&mut self, ok: bool, line: String) {
        if !ok {
            self.passed = false;
            self.details.push(format!("FAIL {line}"));
        } else {
            self.details.push(format!("ok   {line}"));
        }
    }
}

fn suite_checks(gate: &mut Gate, suite: Suite, suffixes: &[&str]) {
    let checks = run_suite(suite, 1, None).expect("suite runs");
    for suffix in suffixes {
        let sel: Vec<_> = checks.iter().filter(|c| c.name.ends_with(suffix)).collect();
        let failed: Vec<_> = sel.iter().filter(|c| !c.passed()).collect();
        let worst = sel.iter().map(|c| c.value).fold(0.0, f64::max);
        gate.record(
            !sel.is_empty() && failed.is_empty(),
            format!("{suite}/{suffix}: {} checks, {} failed, worst {worst:.2e}", sel.len(), failed.len()),
        );
        for c in failed.iter().take(5) {
            gate.details.push(format!("     {c}"));
        }
    }
}

/// Exactness: D∘D, DOF duality, discrete Hodge decomposition.
fn criterion_1() -> Gate {
    let mut gate = Gate::new(120);
    suite_checks(&mut gate, Suite::Spaces, &["/dd", "/duality", "/d-in-next"]);
    suite_checks(&mut gate, Suite::Hodge, &["/reconstruction", "/orthogonality"]);
    gate
}

/// Projections: Π_h idempotence, commuting identity, elliptic projection rate.
fn criterion_2() -> Gate {
    let mut gate = Gate::new(300);
    suite_checks(&mut gate, Suite::Hodge, &["/pi-idempotence", "/commuting"]);
    let ms = [4, 8, 16];
    for pair in 1..=4 {
        for r in 1..=2 {
            let errs = common::elliptic_projection_errors(pair, r, &ms, 5);
            let obs = common::rate(&errs, &ms);
            let want = predict_rates(pair, r, 0).unwrap()[2] as f64;
            gate.record(
                (obs - want).abs() <= 0.25,
                format!("elliptic projection pair {pair} r={r}: rate {obs:.2} vs {want}"),
            );
        }
    }
    gate
}

fn report_line(rep: &ConvergenceReport) -> String {
    let last = rep.rates.last().unwrap();
    format!(
        "{} pair {} r={} {:<16} observed [{:.2} {:.2} {:.2} {:.2}] predicted {:?}{}",
        rep.problem,
        rep.pair_id,
        rep.r,
        feec_core::study::mask_label(rep.mask),
        last[0],
        last[1],
        last[2],
        last[3],
        rep.predicted,
        if rep.one_sided[0] { " (sigma one-sided)" } else { "" }
    )
}

/// Rate table fast gate on the 2D problem.
fn criterion_3() -> Gate {
    let mut gate = Gate::new(1200);
    let masks: [u8; 7] = [0, 1, 2, 4, 8, 16, 31];
    let runs: Vec<(usize, usize, u8)> =
        (1..=4).flat_map(|p| (1..=2).flat_map(move |r| masks.into_iter().map(move |m| (p, r, m)))).collect();
    let reports: Vec<_> = runs
        .par_iter()
        .map(|&(pair, r, mask)| {
            let (problem, exact) = builtin_problem("square2d-1form", mask).unwrap();
            run_convergence(&problem, &exact, pair, r, &[8, 16, 32], &StudyOptions::default())
        })
        .collect();
    for (rep, &(pair, r, mask)) in reports.iter().zip(&runs) {
        match rep {
            Ok(rep) => gate.record(rep.passed(), report_line(rep)),
            Err(e) => gate.record(false, format!("pair {pair} r={r} mask {mask:05b}: {e}")),
        }
    }
    gate
}

/// 3D fidelity: reference magnitudes at m = 2 and the rate trends.
fn criterion_4() -> Gate {
    let mut gate = Gate::new(45 * 60);
    let opts = StudyOptions { tolerance: 0.3, ..StudyOptions::default() };
    let cases: [(&str, u8, usize); 3] = [("paper3d-1form", 0, 1), ("paper3d-1form", 0b01000, 1), ("paper3d-2form", 0b11111, 2)];
    let reports: Vec<_> = cases
        .par_iter()
        .map(|&(name, mask, pair)| {
            let (problem, exact) = builtin_problem(name, mask).unwrap();
            run_convergence(&problem, &exact, pair, 1, &[2, 4, 8], &opts)
        })
        .collect();
    let reference = [[2.766e-1, 2.362, 2.244e-1, 1.441], [4.190e-1, 3.522, 2.215e-1, 1.434]];
    for (i, rep) in reports.iter().enumerate() {
        let rep = match rep {
            Ok(rep) => rep,
            Err(e) => {
                gate.record(false, format!("{}: {e}", cases[i].0));
                continue;
            }
        };
        gate.record(rep.passed(), report_line(rep));
        if i < 2 {
            let got = rep.levels[0].errors;
            let ok = (0..4).all(|c| (got[c] / reference[i][c]).max(reference[i][c] / got[c]) <= 2.0);
            gate.record(
                ok,
                format!("m=2 magnitudes {:.3e} {:.3e} {:.3e} {:.3e} vs reference {:?}", got[0], got[1], got[2], got[3], reference[i]),
            );
        }
    }
    gate
}

/// Stability: h-uniform inf-sup and a resonance collapse.
fn criterion_5() -> Gate {
    let mut gate = Gate::new(600);
    let (problem, _) = builtin_problem("square2d-1form", 0b11111).unwrap();
    for pair in [1, 4] {
        let rep = run_infsup(&problem, pair, 1, &[2, 4, 8, 16], &StudyOptions::default()).unwrap();
        let ests: Vec<String> = rep.levels.iter().map(|l| format!("{:.4}", l.2)).collect();
        gate.record(rep.passed(), format!("infsup pair {pair}: estimates [{}] slope {:.3}", ests.join(" "), rep.slope));
    }
    let mesh = std::sync::Arc::new(SimplicialMesh::build_box(2, 4, 0.2, 11).unwrap());
    let pair = HodgePair::canonical(&mesh, 1, 1, 1, problem.bc).unwrap();
    let lambdas: Vec<f64> = (0..=60).map(|i| i as f64 * 0.5).collect();
    let scan = resonance_scan(&pair, &problem.terms, &lambdas, 1).unwrap();
    gate.record(
        scan.collapsed(1e-2),
        format!("resonance at lambda={:.5}: estimate {:.3e} vs typical {:.3e}", scan.lambda, scan.estimate, scan.typical),
    );
    gate
}

/// Oracles: dimensions, quadrature, expression evaluation, rate table.
fn criterion_6() -> Gate {
    let mut gate = Gate::new(120);
    let mut bad = Vec::new();
    let mut count = 0;
    for n in 1..=3 {
        for (k, r, family) in supported_elements(n) {
            let want = match family {
                Family::Full => common::full_dimension(n, k, r),
                Family::Trimmed => common::trimmed_dimension(n, k, r),
            };
            let formula = space_dimension(n, k, r, family).unwrap();
            let built = reference_element(n, k, r, family).unwrap().dim();
            count += 1;
            if formula != want || built != want {
                bad.push(format!("{family}{r}L{k} in {n}D: oracle {want}, formula {formula}, element {built}"));
            }
        }
    }
    gate.record(bad.is_empty(), format!("space dimensions: {count} elements, {} mismatches", bad.len()));
    gate.details.extend(bad.into_iter().map(|b| format!("     {b}")));

    let mut worst = 0.0f64;
    for n in 1..=3 {
        for degree in 0..=MAX_QUADRATURE_DEGREE {
            let rule = quadrature(n, degree).unwrap();
            for alpha in feec_core::combinat::multi_indices_le(n, degree) {
                let got: f64 = (0..rule.len())
                    .map(|q| rule.weights[q] * alpha.iter().enumerate().map(|(i, &p)| rule.point(q)[i].powi(p as i32)).product::<f64>())
                    .sum();
                let want = common::simplex_monomial_integral(&alpha);
                worst = worst.max((got - want).abs() / want);
            }
        }
    }
    gate.record(worst <= 1e-13, format!("quadrature monomials: worst relative error {worst:.2e}"));

    let (cases, worst) = common::coefex_oracle(1000, 2024);
    gate.record(cases == 1000 && worst <= 1e-15, format!("expression evaluator: {cases} cases, worst {worst:.2e}"));

    let table = rate_table();
    let mismatch = table.lines().zip(common::RATE_TABLE_FIXTURE.lines()).filter(|(a, b)| a != b).count();
    gate.record(
        table == common::RATE_TABLE_FIXTURE,
        format!("rate table: {} lines, {mismatch} differ from fixture", table.lines().count()),
    );
    gate
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    type Criterion = (usize, &'static str, fn() -> Gate);
    let gates: [Criterion; 6] = [
        (1, "exactness", criterion_1),
        (2, "projections", criterion_2),
        (3, "rate table (2D)", criterion_3),
        (4, "3D fidelity", criterion_4),
        (5, "stability", criterion_5),
        (6, "oracles", criterion_6),
    ];
    let mut all = true;
    let mut summary = Vec::new();
    for (id, title, run) in gates {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let gate = run();
        let elapsed = start.elapsed();
        for d in &gate.details {
            println!("  [{id}] {d}");
        }
        let in_time = elapsed <= gate.budget;
        let ok = gate.passed && in_time;
        all &= ok;
        summary.push(format!(
            "criterion {id}: {} {title} ({:.1}s, budget {}s{})",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            gate.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        ));
    }
    println!();
    for s in &summary {
        println!("{s}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
