use dhd_sddp::lp::brute_force::{brute_force_optimum, random_boxed_lp};
use dhd_sddp::lp::{check_certificate, LinearProgram, LpStatus, Sense};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn five_by_four_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 300 {
        let lp = random_boxed_lp(&mut rng, 5, 4);
        if lp.num_vars() != 5 || lp.num_rows() != 4 {
            continue;
        }
        checked += 1;
        let sol = lp.solve().unwrap();
        match brute_force_optimum(&lp) {
            Some(v) => {
                assert_eq!(sol.status, LpStatus::Optimal);
                assert!((sol.objective - v).abs() <= 1e-8, "{} vs {v}", sol.objective);
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

#[test]
fn certificates_hold_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..1000 {
        let lp = random_boxed_lp(&mut rng, 8, 6);
        let sol = lp.solve().unwrap();
        match sol.status {
            LpStatus::Optimal => {
                let v = check_certificate(&lp, &sol);
                assert!(v.is_empty(), "lp {k}: {v:?}");
            }
            LpStatus::Infeasible => assert!(sol.infeasibility > 1e-8),
            LpStatus::Unbounded => panic!("boxed lp {k} reported unbounded"),
        }
    }
}

#[test]
fn solves_are_deterministic_and_scale_with_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let lp = random_boxed_lp(&mut rng, 8, 6);
        let a = lp.solve().unwrap();
        let b = lp.solve().unwrap();
        assert_eq!(a, b);
        if a.status != LpStatus::Optimal {
            continue;
        }
        let mut scaled = lp.clone();
        for j in 0..lp.num_vars() {
            scaled.set_cost(j, 2.0 * lp.objective()[j]);
        }
        let s = scaled.solve().unwrap();
        assert_eq!(s.x, a.x);
        assert!((s.objective - 2.0 * a.objective).abs() <= 1e-9 * (1.0 + a.objective.abs()));
        for (ys, ya) in s.duals.iter().zip(&a.duals) {
            assert!((ys - 2.0 * ya).abs() <= 1e-9 * (1.0 + ya.abs()));
        }
    }
}

#[test]
fn unbounded_and_free_columns() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var(-1.0, 0.0, f64::INFINITY, "x");
    lp.add_row([(x, 1.0)], Sense::Ge, 0.0, "r");
    assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);

    // Free variables with cuts, the shape of an epigraph LP.
    let mut lp = LinearProgram::new();
    let t = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY, "theta");
    let x = lp.add_var(0.0, -2.0, 3.0, "x");
    lp.add_row([(t, 1.0), (x, 1.0)], Sense::Ge, 1.0, "c1");
    lp.add_row([(t, 1.0), (x, -2.0)], Sense::Ge, -1.0, "c2");
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    // min max(1 - x, -1 + 2x) at x = 2/3
    assert!((sol.objective - 1.0 / 3.0).abs() < 1e-12);
    assert!(check_certificate(&lp, &sol).is_empty());
}
