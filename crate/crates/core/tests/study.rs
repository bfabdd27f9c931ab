use feec_core::perturbed::ALL_TERMS;
use feec_core::study::{builtin_problem, run_convergence, StudyOptions, BUILTIN_PROBLEMS};

#[test]
fn builtin_derivatives_match_finite_differences() {
    for name in BUILTIN_PROBLEMS {
        let (problem, exact) = builtin_problem(name, ALL_TERMS).unwrap();
        let err = exact.check_derivatives(&problem.terms, 50, 3).unwrap();
        assert!(err <= 1e-6, "{name}: {err:e}");
    }
}

#[test]
fn unperturbed_square_has_optimal_rates() {
    let (problem, exact) = builtin_problem("square2d-1form", 0).unwrap();
    let rep = run_convergence(&problem, &exact, 1, 1, &[4, 8, 16], &StudyOptions::default()).unwrap();
    let want = [3.0, 2.0, 2.0, 1.0];
    for (got, want) in rep.finest_rates().iter().zip(want) {
        assert!((got - want).abs() <= 0.25, "{:?}", rep.finest_rates());
    }
    assert!(rep.passed());
}

#[test]
fn halving_h_does_not_grow_errors() {
    for pair in 1..=4 {
        for mask in [0, ALL_TERMS] {
            let (problem, exact) = builtin_problem("square2d-1form", mask).unwrap();
            let rep = run_convergence(&problem, &exact, pair, 1, &[2, 4, 8], &StudyOptions::default()).unwrap();
            for w in rep.levels.windows(2) {
                for c in 0..4 {
                    assert!(w[1].errors[c] <= 1.1 * w[0].errors[c], "pair {pair} mask {mask}: {:?}", rep.levels);
                }
            }
        }
    }
}

#[test]
fn reports_are_deterministic_and_well_formed() {
    let (problem, exact) = builtin_problem("mhd-demo", ALL_TERMS).unwrap();
    let opts = StudyOptions { seed: 4, ..StudyOptions::default() };
    let a = run_convergence(&problem, &exact, 2, 1, &[1, 2], &opts).unwrap();
    let b = run_convergence(&problem, &exact, 2, 1, &[1, 2], &opts).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let csv = a.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "m,h,N,err_sigma,rate_sigma,err_dsigma,rate_dsigma,err_u,rate_u,err_du,rate_du");
    assert!(lines.all(|l| l.split(',').count() == 11));
    assert!(a.to_markdown().contains("| predicted "));
}

#[test]
fn rejects_bad_mesh_lists() {
    let (problem, exact) = builtin_problem("square2d-1form", 0).unwrap();
    assert!(run_convergence(&problem, &exact, 1, 1, &[4], &StudyOptions::default()).is_err());
    assert!(run_convergence(&problem, &exact, 1, 1, &[8, 4], &StudyOptions::default()).is_err());
    assert!(run_convergence(&problem, &exact, 7, 1, &[2, 4], &StudyOptions::default()).is_err());
}
