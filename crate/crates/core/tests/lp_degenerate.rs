use dhd_sddp::lp::brute_force::brute_force_optimum;
use dhd_sddp::lp::{check_certificate, LinearProgram, LpStatus, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn degenerate_integer_lps_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut bad = 0;
    for k in 0..4000 {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(1..=6);
        let mut lp = LinearProgram::new();
        for j in 0..n {
            let lo = rng.random_range(-3..=1) as f64;
            let hi = lo + rng.random_range(0..=4) as f64;
            lp.add_var(rng.random_range(-3..=3) as f64, lo, hi, format!("x{j}"));
        }
        for i in 0..m {
            let mut c = vec![];
            for j in 0..n {
                if rng.random_bool(0.6) {
                    c.push((j, rng.random_range(-2..=2) as f64));
                }
            }
            let s = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
            lp.add_row(c, s, rng.random_range(-3..=3) as f64, format!("r{i}"));
        }
        let sol = match lp.solve() {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{k}: err {e}");
                bad += 1;
                continue;
            }
        };
        let bf = brute_force_optimum(&lp);
        let ok = match (sol.status, bf) {
            (LpStatus::Optimal, Some(v)) => {
                (sol.objective - v).abs() <= 1e-8 && check_certificate(&lp, &sol).is_empty()
            }
            (LpStatus::Infeasible, None) => true,
            _ => false,
        };
        if !ok {
            bad += 1;
            eprintln!(
                "{k}: {:?} {} vs {:?} {:?}",
                sol.status,
                sol.objective,
                bf,
                check_certificate(&lp, &sol)
            );
        }
    }
    assert_eq!(bad, 0);
}

fn boxed(lp: &LinearProgram, b: f64) -> LinearProgram {
    let mut q = lp.clone();
    for j in 0..lp.num_vars() {
        q.set_bounds(j, lp.lower()[j].max(-b), lp.upper()[j].min(b));
    }
    q
}

#[test]
fn infinite_bounds_agree_with_large_boxes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    let mut counts = [0; 3];
    for k in 0..4000 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let mut lp = LinearProgram::new();
        for j in 0..n {
            let lo = if rng.random_bool(0.4) {
                f64::NEG_INFINITY
            } else {
                rng.random_range(-3..=1) as f64
            };
            let hi = if rng.random_bool(0.4) {
                f64::INFINITY
            } else {
                lo.max(-3.0) + rng.random_range(0..=4) as f64
            };
            lp.add_var(rng.random_range(-3..=3) as f64, lo, hi, format!("x{j}"));
        }
        for i in 0..m {
            let mut c = vec![];
            for j in 0..n {
                if rng.random_bool(0.6) {
                    c.push((j, rng.random_range(-2..=2) as f64));
                }
            }
            let s = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
            lp.add_row(c, s, rng.random_range(-3..=3) as f64, format!("r{i}"));
        }
        let sol = match lp.solve() {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{k}: err {e}");
                bad += 1;
                continue;
            }
        };
        let b1 = brute_force_optimum(&boxed(&lp, 1e3));
        let ok = match sol.status {
            LpStatus::Optimal => {
                counts[0] += 1;
                b1.is_some_and(|v| (v - sol.objective).abs() < 1e-7) && check_certificate(&lp, &sol).is_empty()
            }
            LpStatus::Infeasible => {
                counts[1] += 1;
                b1.is_none()
            }
            LpStatus::Unbounded => {
                counts[2] += 1;
                let b2 = brute_force_optimum(&boxed(&lp, 2e3));
                b1.is_some() && b2.unwrap() < b1.unwrap() - 1.0
            }
        };
        if !ok {
            bad += 1;
            eprintln!("{k}: {:?} {} vs {:?}", sol.status, sol.objective, b1);
        }
    }
    assert_eq!(bad, 0);
}
