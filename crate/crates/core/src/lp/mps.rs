//! Fixed-format MPS export, used for dumping stage problems when debugging.
//!
//! Names are generated (`R0000001`, `C0000001`) since labels may contain
//! spaces or exceed eight characters.

use std::fmt::Write as _;

use super::{LinearProgram, Sense};

fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (1..=6).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

/// Renders `lp` in fixed MPS format.
pub fn write_mps(lp: &LinearProgram, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n N  COST\n");
    for (i, row) in lp.rows().iter().enumerate() {
        let tag = match row.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        let _ = writeln!(out, " {tag}  {}", row_name(i));
    }

    let n = lp.num_vars();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in lp.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            cols[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, entries) in cols.iter().enumerate() {
        let c = lp.objective()[j];
        if c != 0.0 {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col_name(j), "COST", num(c));
        }
        for &(i, a) in entries {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col_name(j), row_name(i), num(a));
        }
        if c == 0.0 && entries.is_empty() {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", col_name(j), "COST", "0");
        }
    }

    out.push_str("RHS\n");
    for (i, row) in lp.rows().iter().enumerate() {
        if row.rhs != 0.0 {
            let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", row_name(i), num(row.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for j in 0..n {
        let (l, u) = (lp.lower()[j], lp.upper()[j]);
        let c = col_name(j);
        let mut line = |tag: &str, v: Option<f64>| {
            let value = v.map(num).unwrap_or_default();
            let _ = writeln!(out, " {tag} {:<8}  {:<8}  {:>12}", "BND", c, value);
        };
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => line("FX", Some(l)),
            (false, false) => line("FR", None),
            (true, true) => {
                if l != 0.0 {
                    line("LO", Some(l));
                }
                line("UP", Some(u));
            }
            (true, false) => {
                if l != 0.0 {
                    line("LO", Some(l));
                }
            }
            (false, true) => {
                line("MI", None);
                line("UP", Some(u));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}
