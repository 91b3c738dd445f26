//! Reference solver for tiny boxed LPs by enumerating basic points.
//!
//! Every variable is either at a bound or "free"; the free ones are pinned by
//! an equal number of rows held at equality. With all variables boxed, an
//! optimal solution is among the feasible points produced this way.

use rand::Rng;

use super::{LinearProgram, Sense};

const FEAS_TOL: f64 = 1e-9;

/// Optimal objective by exhaustive enumeration, `None` when infeasible.
///
/// Panics if a variable has an infinite bound.
pub fn brute_force_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let (lo, hi) = (lp.lower(), lp.upper());
    assert!(
        lo.iter().chain(hi).all(|b| b.is_finite()),
        "brute force needs finite bounds"
    );
    let mut dense = vec![vec![0.0; n]; m];
    for (i, row) in lp.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            dense[i][j] = a;
        }
    }
    let c = lp.objective();
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];

    for free_mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|j| free_mask >> j & 1 == 1).collect();
        let f = free.len();
        if f > m {
            continue;
        }
        let fixed: Vec<usize> = (0..n).filter(|j| free_mask >> j & 1 == 0).collect();
        for rows in subsets(m, f) {
            let Some(lu) = Lu::factor(
                &rows
                    .iter()
                    .map(|&i| free.iter().map(|&j| dense[i][j]).collect())
                    .collect::<Vec<Vec<f64>>>(),
            ) else {
                continue;
            };
            for pattern in 0u32..(1 << fixed.len()) {
                for (k, &j) in fixed.iter().enumerate() {
                    x[j] = if pattern >> k & 1 == 1 { hi[j] } else { lo[j] };
                }
                let rhs: Vec<f64> = rows
                    .iter()
                    .map(|&i| lp.rows()[i].rhs - fixed.iter().map(|&j| dense[i][j] * x[j]).sum::<f64>())
                    .collect();
                let sol = lu.solve(&rhs);
                for (k, &j) in free.iter().enumerate() {
                    x[j] = sol[k];
                }
                if feasible(lp, &dense, &x) {
                    let obj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                    if best.is_none_or(|b| obj < b) {
                        best = Some(obj);
                    }
                }
            }
        }
    }
    best
}

fn feasible(lp: &LinearProgram, dense: &[Vec<f64>], x: &[f64]) -> bool {
    let bounds_ok = x
        .iter()
        .enumerate()
        .all(|(j, &v)| v >= lp.lower()[j] - FEAS_TOL && v <= lp.upper()[j] + FEAS_TOL);
    bounds_ok
        && lp.rows().iter().zip(dense).all(|(row, a)| {
            let act: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            match row.sense {
                Sense::Le => act <= row.rhs + FEAS_TOL,
                Sense::Ge => act >= row.rhs - FEAS_TOL,
                Sense::Eq => (act - row.rhs).abs() <= FEAS_TOL,
            }
        })
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

/// Dense LU with partial pivoting for the enumerated square systems.
struct Lu {
    a: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(rows: &[Vec<f64>]) -> Option<Self> {
        let k = rows.len();
        let mut a = rows.to_vec();
        let mut perm: Vec<usize> = (0..k).collect();
        let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
        for col in 0..k {
            let p = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
            if a[p][col].abs() <= 1e-10 * scale {
                return None;
            }
            a.swap(col, p);
            perm.swap(col, p);
            for r in col + 1..k {
                let f = a[r][col] / a[col][col];
                a[r][col] = f;
                for cc in col + 1..k {
                    a[r][cc] -= f * a[col][cc];
                }
            }
        }
        Some(Self { a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.a.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..k {
            for c in 0..r {
                y[r] -= self.a[r][c] * y[c];
            }
        }
        for r in (0..k).rev() {
            for c in r + 1..k {
                y[r] -= self.a[r][c] * y[c];
            }
            y[r] /= self.a[r][r];
        }
        y
    }
}

/// Random LP with every variable boxed, at most `max_vars` columns and
/// `max_rows` rows. Roughly one in ten instances is infeasible by a clear
/// margin; the rest contain a known interior point.
pub fn random_boxed_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let mut lp = LinearProgram::new();
    let mut anchor = Vec::with_capacity(n);
    for j in 0..n {
        let lo: f64 = rng.random_range(-5.0..1.0);
        let hi = lo + rng.random_range(0.5..8.0);
        let cost = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(-4.0..4.0)
        };
        lp.add_var(cost, lo, hi, format!("x{j}"));
        anchor.push(rng.random_range(lo..hi));
    }
    let infeasible = rng.random_bool(0.1);
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                coeffs.push((j, rng.random_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let sense = match rng.random_range(0..5) {
            0 => Sense::Eq,
            1 | 2 => Sense::Le,
            _ => Sense::Ge,
        };
        let margin = rng.random_range(0.0..2.0);
        let rhs = if infeasible && i == 0 {
            // Exceed the largest activity the box allows.
            let top: f64 = coeffs
                .iter()
                .map(|&(j, a)| (a * lp.lower()[j]).max(a * lp.upper()[j]))
                .sum();
            lp.add_row(coeffs, Sense::Ge, top + 1.0, format!("r{i}"));
            continue;
        } else {
            match sense {
                Sense::Eq => act,
                Sense::Le => act + margin,
                Sense::Ge => act - margin,
            }
        };
        lp.add_row(coeffs, sense, rhs, format!("r{i}"));
    }
    lp
}
