//! Revised simplex with bounded variables.
//!
//! Every row gets a logical `s_i = a_i·x` so the equality system is
//! `[A  -I] (x, s) = 0` and all constraints live in variable bounds. The
//! basis inverse is kept in product form over the all-logical basis `-I`.
//!
//! A cold start places every structural at the bound its cost prefers,
//! which makes the all-logical basis dual feasible; variables lacking that
//! bound are parked at a large artificial distance. The dual simplex then
//! restores primal feasibility, and a primal phase takes over to release
//! parked variables (this is where unboundedness is detected). When the dual
//! phase cannot proceed, a composite primal phase 1 minimizing the sum of
//! bound violations decides feasibility.
//!
//! Pricing is Dantzig's rule with a Harris two-pass ratio test until the
//! objective stalls for `2·(n+m)` pivots, after which Bland's smallest-index
//! rule is used for the rest of the solve.

use super::{LinearProgram, LpError, LpSolution, LpStatus, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic away from its bounds; admissible only with zero reduced cost.
    Free,
    /// Stands in for a missing lower bound until the variable enters the basis.
    ParkedLow,
    ParkedHigh,
}

#[derive(Debug, Clone)]
struct Eta {
    row: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
struct EtaFile {
    etas: Vec<Eta>,
}

impl EtaFile {
    /// `v <- B^{-1} v`.
    fn ftran(&self, v: &mut [f64]) {
        for value in v.iter_mut() {
            *value = -*value;
        }
        for eta in &self.etas {
            let vr = v[eta.row];
            if vr == 0.0 {
                continue;
            }
            let vr = vr / eta.pivot;
            v[eta.row] = vr;
            for &(i, a) in &eta.entries {
                v[i] -= a * vr;
            }
        }
    }

    /// `u^T <- u^T B^{-1}`.
    fn btran(&self, u: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = u[eta.row];
            for &(i, a) in &eta.entries {
                s -= a * u[i];
            }
            u[eta.row] = s / eta.pivot;
        }
        for value in u.iter_mut() {
            *value = -*value;
        }
    }

    fn push(&mut self, alpha: &[f64], row: usize) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != row && a.abs() > 1e-14)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            row,
            pivot: alpha[row],
            entries,
        });
    }

    fn len(&self) -> usize {
        self.etas.len()
    }
}

enum Step {
    Pivoted,
    Stuck,
}

enum PrimalOutcome {
    Pivoted,
    Optimal,
    Unbounded(Vec<f64>),
}

enum RatioChoice {
    Flip,
    Leave { pos: usize, to_upper: bool },
    Unbounded,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Dual,
    Primal,
    Feasibility,
}

/// Simplex state for one linear program. The basis survives between calls to
/// [`Simplex::solve`], so changing right-hand sides or bounds and solving
/// again warm-starts from the previous optimal basis.
#[derive(Debug, Clone)]
pub struct Simplex {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    senses: Vec<super::Sense>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    factor: EtaFile,
    opts: SimplexOptions,
    max_pivots: usize,
}

impl Simplex {
    pub fn new(lp: &LinearProgram, opts: SimplexOptions) -> Result<Self, LpError> {
        lp.check()?;
        let n = lp.num_vars();
        let m = lp.num_rows();

        let mut counts = vec![0usize; n];
        for row in lp.rows() {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut cost = lp.objective().to_vec();
        cost.resize(n + m, 0.0);
        let mut lower = lp.lower().to_vec();
        let mut upper = lp.upper().to_vec();
        let mut senses = Vec::with_capacity(m);
        for row in lp.rows() {
            let (lo, hi) = row.sense.activity_bounds(row.rhs);
            lower.push(lo);
            upper.push(hi);
            senses.push(row.sense);
        }

        let big = opts.artificial_bound;
        let mut x = vec![0.0; n + m];
        let mut state = vec![VarState::Basic; n + m];
        for j in 0..n {
            let (lo, hi, c) = (lower[j], upper[j], cost[j]);
            let (st, val) = if c > 0.0 {
                if lo.is_finite() {
                    (VarState::AtLower, lo)
                } else {
                    (VarState::ParkedLow, hi.min(0.0) - big)
                }
            } else if c < 0.0 {
                if hi.is_finite() {
                    (VarState::AtUpper, hi)
                } else {
                    (VarState::ParkedHigh, lo.max(0.0) + big)
                }
            } else if lo.is_finite() {
                (VarState::AtLower, lo)
            } else if hi.is_finite() {
                (VarState::AtUpper, hi)
            } else {
                (VarState::Free, 0.0)
            };
            state[j] = st;
            x[j] = val;
        }
        let basis = (n..n + m).collect();
        let max_pivots = opts.max_pivots.unwrap_or(50 * (n + m) + 1000);

        Ok(Self {
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost,
            lower,
            upper,
            senses,
            x,
            state,
            basis,
            factor: EtaFile::default(),
            opts,
            max_pivots,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Changes the right-hand side of `row`, keeping the current basis.
    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        let k = self.n + row;
        let (lo, hi) = self.senses[row].activity_bounds(rhs);
        self.lower[k] = lo;
        self.upper[k] = hi;
        self.snap_nonbasic(k);
    }

    /// Changes the bounds of structural variable `var`, keeping the basis.
    pub fn set_var_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(var < self.n, "variable index out of range");
        self.lower[var] = lower;
        self.upper[var] = upper;
        self.snap_nonbasic(var);
    }

    fn snap_nonbasic(&mut self, k: usize) {
        match self.state[k] {
            VarState::AtLower => {
                if self.lower[k].is_finite() {
                    self.x[k] = self.lower[k];
                } else {
                    self.state[k] = VarState::ParkedLow;
                }
            }
            VarState::AtUpper => {
                if self.upper[k].is_finite() {
                    self.x[k] = self.upper[k];
                } else {
                    self.state[k] = VarState::ParkedHigh;
                }
            }
            VarState::Free | VarState::ParkedLow | VarState::ParkedHigh => {
                if self.x[k] < self.lower[k] {
                    self.x[k] = self.lower[k];
                    self.state[k] = VarState::AtLower;
                } else if self.x[k] > self.upper[k] {
                    self.x[k] = self.upper[k];
                    self.state[k] = VarState::AtUpper;
                }
            }
            VarState::Basic => {}
        }
    }

    /// Runs the simplex method from the current basis.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let total = self.n + self.m;
        let stall_limit = 2 * total;
        let mut pivots = 0usize;
        let mut bland = false;
        let mut stall = 0usize;
        let mut last: Option<(Phase, f64)> = None;
        let mut force_feasibility = false;
        let mut breakdowns = 0usize;

        loop {
            if pivots > self.max_pivots {
                return Err(LpError::PivotLimit(self.max_pivots));
            }
            self.compute_primal();
            let infeasible = self.infeasibility_sum() > self.opts.feasibility_tol;

            let phase = if !infeasible {
                Phase::Primal
            } else if !force_feasibility && {
                let d = self.reduced_costs(false);
                self.is_dual_feasible(&d)
            } {
                Phase::Dual
            } else {
                Phase::Feasibility
            };

            let progress = match phase {
                Phase::Feasibility => self.infeasibility_sum(),
                _ => self.current_objective(),
            };
            if let Some((p, v)) = last {
                let improved = match phase {
                    Phase::Dual => progress > v + 1e-12 * (1.0 + v.abs()),
                    _ => progress < v - 1e-12 * (1.0 + v.abs()),
                };
                if p == phase && !improved {
                    stall += 1;
                    if stall > stall_limit {
                        bland = true;
                    }
                } else {
                    stall = 0;
                }
            }
            last = Some((phase, progress));

            match phase {
                Phase::Dual => {
                    let d = self.reduced_costs(false);
                    match self.dual_step(&d, bland)? {
                        Some(true) => pivots += 1,
                        Some(false) => {
                            breakdowns += 1;
                            if breakdowns > 5 {
                                return Err(LpError::NumericalBreakdown("repeated unstable dual pivots".into()));
                            }
                            self.reinvert();
                        }
                        None => force_feasibility = true,
                    }
                }
                Phase::Feasibility => {
                    let d = self.reduced_costs(true);
                    match self.feasibility_step(&d, bland)? {
                        Step::Pivoted => pivots += 1,
                        Step::Stuck => {
                            let mut sol = self.extract(LpStatus::Infeasible, pivots);
                            sol.infeasibility = self.infeasibility_sum();
                            return Ok(sol);
                        }
                    }
                }
                Phase::Primal => {
                    force_feasibility = false;
                    let d = self.reduced_costs(false);
                    match self.primal_step(&d, bland)? {
                        PrimalOutcome::Pivoted => pivots += 1,
                        PrimalOutcome::Unbounded(ray) => {
                            let mut sol = self.extract(LpStatus::Unbounded, pivots);
                            sol.ray = Some(ray);
                            return Ok(sol);
                        }
                        PrimalOutcome::Optimal => {
                            if self.unpark_step(&d)? {
                                pivots += 1;
                                continue;
                            }
                            let mut sol = self.extract(LpStatus::Optimal, pivots);
                            sol.reduced_costs = d[..self.n].to_vec();
                            return Ok(sol);
                        }
                    }
                }
            }
        }
    }

    fn extract(&self, status: LpStatus, pivots: usize) -> LpSolution {
        let x = self.x[..self.n].to_vec();
        let mut u: Vec<f64> = self.basis.iter().map(|&k| self.cost[k]).collect();
        self.factor.btran(&mut u);
        let reduced_costs = (0..self.n)
            .map(|j| {
                if self.state[j] == VarState::Basic {
                    0.0
                } else {
                    self.cost[j] - self.column_dot(j, &u)
                }
            })
            .collect();
        LpSolution {
            status,
            objective: self.current_objective(),
            x,
            duals: u,
            reduced_costs,
            infeasibility: 0.0,
            ray: None,
            pivots,
        }
    }

    fn current_objective(&self) -> f64 {
        self.cost[..self.n]
            .iter()
            .zip(&self.x[..self.n])
            .map(|(c, v)| c * v)
            .sum()
    }

    fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|k| self.col_val[k] * v[self.col_row[k]])
                .sum()
        } else {
            -v[j - self.n]
        }
    }

    fn load_column(&self, j: usize, out: &mut [f64]) {
        out.fill(0.0);
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_row[k]] = self.col_val[k];
            }
        } else {
            out[j - self.n] = -1.0;
        }
    }

    fn ftran_column(&self, j: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.m];
        self.load_column(j, &mut col);
        self.factor.ftran(&mut col);
        col
    }

    /// Recomputes basic values from the nonbasic ones.
    fn compute_primal(&mut self) {
        let mut r = vec![0.0; self.m];
        for j in 0..self.n {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for k in self.col_start[j]..self.col_start[j + 1] {
                    r[self.col_row[k]] -= self.col_val[k] * xj;
                }
            }
        }
        for i in 0..self.m {
            let k = self.n + i;
            if self.state[k] != VarState::Basic {
                r[i] += self.x[k];
            }
        }
        self.factor.ftran(&mut r);
        for (p, &k) in self.basis.iter().enumerate() {
            self.x[k] = r[p];
        }
    }

    fn violation(&self, k: usize) -> f64 {
        let v = self.x[k];
        if v < self.lower[k] {
            self.lower[k] - v
        } else if v > self.upper[k] {
            v - self.upper[k]
        } else {
            0.0
        }
    }

    fn infeasibility_sum(&self) -> f64 {
        let tol = self.opts.feasibility_tol;
        self.basis.iter().map(|&k| self.violation(k)).filter(|&v| v > tol).sum()
    }

    /// Reduced costs for the true objective, or for the sum of bound
    /// violations when `feasibility` is set.
    fn reduced_costs(&self, feasibility: bool) -> Vec<f64> {
        let tol = self.opts.feasibility_tol;
        let mut u: Vec<f64> = self
            .basis
            .iter()
            .map(|&k| {
                if feasibility {
                    if self.x[k] < self.lower[k] - tol {
                        -1.0
                    } else if self.x[k] > self.upper[k] + tol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[k]
                }
            })
            .collect();
        self.factor.btran(&mut u);
        let total = self.n + self.m;
        let mut d = vec![0.0; total];
        for (j, dj) in d.iter_mut().enumerate() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let c = if feasibility { 0.0 } else { self.cost[j] };
            *dj = c - self.column_dot(j, &u);
        }
        d
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn is_dual_feasible(&self, d: &[f64]) -> bool {
        let tol = self.opts.optimality_tol;
        (0..self.n + self.m).all(|j| {
            if self.is_fixed(j) {
                return true;
            }
            match self.state[j] {
                VarState::Basic => true,
                VarState::AtLower | VarState::ParkedLow => d[j] >= -tol,
                VarState::AtUpper | VarState::ParkedHigh => d[j] <= tol,
                VarState::Free => d[j].abs() <= tol,
            }
        })
    }

    /// Directions in which a nonbasic variable may move while the dual phase
    /// keeps dual feasibility: `(increase, decrease)`.
    fn dual_directions(&self, j: usize) -> (bool, bool) {
        if self.is_fixed(j) {
            return (false, false);
        }
        match self.state[j] {
            VarState::AtLower | VarState::ParkedLow => (true, false),
            VarState::AtUpper | VarState::ParkedHigh => (false, true),
            VarState::Free => (true, true),
            VarState::Basic => (false, false),
        }
    }

    /// Directions allowed by the true bounds: `(increase, decrease)`.
    fn primal_directions(&self, j: usize) -> (bool, bool) {
        match self.state[j] {
            VarState::Basic => (false, false),
            VarState::AtLower => (self.upper[j] > self.lower[j], false),
            VarState::AtUpper => (false, self.upper[j] > self.lower[j]),
            VarState::Free | VarState::ParkedLow | VarState::ParkedHigh => {
                (self.x[j] < self.upper[j], self.x[j] > self.lower[j])
            }
        }
    }

    /// Distance the nonbasic `j` can travel in direction `delta` before
    /// reaching one of its own bounds.
    fn own_range(&self, j: usize, delta: f64) -> f64 {
        if delta > 0.0 {
            self.upper[j] - self.x[j]
        } else {
            self.x[j] - self.lower[j]
        }
    }

    /// One dual simplex iteration. `None` means no entering variable exists
    /// for the chosen row; `Some(false)` flags an unstable pivot.
    fn dual_step(&mut self, d: &[f64], bland: bool) -> Result<Option<bool>, LpError> {
        let tol = self.opts.feasibility_tol;
        let mut leave: Option<(usize, f64)> = None;
        for (p, &k) in self.basis.iter().enumerate() {
            let v = self.violation(k);
            if v <= tol {
                continue;
            }
            let better = match leave {
                None => true,
                Some((q, best)) => {
                    if bland {
                        k < self.basis[q]
                    } else {
                        v > best || (v == best && k < self.basis[q])
                    }
                }
            };
            if better {
                leave = Some((p, v));
            }
        }
        let Some((p, _)) = leave else {
            return Ok(Some(true));
        };
        let k = self.basis[p];
        let increase = self.x[k] < self.lower[k];

        let mut rho = vec![0.0; self.m];
        rho[p] = 1.0;
        self.factor.btran(&mut rho);

        let piv_tol = self.opts.pivot_tol;
        let dtol = self.opts.optimality_tol;
        let s = if increase { 1.0 } else { -1.0 };
        // (j, delta, |alpha|, slack)
        let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let alpha = self.column_dot(j, &rho);
            if alpha.abs() <= piv_tol {
                continue;
            }
            let delta = if alpha > 0.0 { -s } else { s };
            let (up, down) = self.dual_directions(j);
            if (delta > 0.0 && !up) || (delta < 0.0 && !down) {
                continue;
            }
            let slack = (delta * d[j]).max(0.0);
            cands.push((j, delta, alpha.abs(), slack));
        }
        if cands.is_empty() {
            return Ok(None);
        }

        let chosen = if bland {
            let mut best = cands[0];
            for &c in &cands[1..] {
                let (r, rb) = (c.3 / c.2, best.3 / best.2);
                if r < rb {
                    best = c;
                }
            }
            best
        } else {
            let bound = cands.iter().map(|c| (c.3 + dtol) / c.2).fold(f64::INFINITY, f64::min);
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for &c in &cands {
                if c.3 / c.2 <= bound && best.is_none_or(|b| c.2 > b.2) {
                    best = Some(c);
                }
            }
            best.expect("harris pass two always finds the minimizer")
        };

        let (q, _, _, _) = chosen;
        let col = self.ftran_column(q);
        if col[p].abs() <= piv_tol {
            return Ok(Some(false));
        }
        let to_upper = !increase;
        self.pivot(q, p, &col, to_upper);
        Ok(Some(true))
    }

    fn choose_entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let (up, down) = self.primal_directions(j);
            let delta = if d[j] < -tol && up {
                1.0
            } else if d[j] > tol && down {
                -1.0
            } else {
                continue;
            };
            let score = d[j].abs();
            if bland {
                return Some((j, delta));
            }
            if best.is_none_or(|b| score > b.2) {
                best = Some((j, delta, score));
            }
        }
        best.map(|(j, delta, _)| (j, delta))
    }

    fn primal_step(&mut self, d: &[f64], bland: bool) -> Result<PrimalOutcome, LpError> {
        let Some((q, delta)) = self.choose_entering(d, bland) else {
            return Ok(PrimalOutcome::Optimal);
        };
        let col = self.ftran_column(q);
        let range = self.own_range(q, delta);
        match self.primal_ratio(&col, delta, range, bland) {
            RatioChoice::Unbounded => {
                let mut ray = vec![0.0; self.n];
                if q < self.n {
                    ray[q] = delta;
                }
                for (p, &k) in self.basis.iter().enumerate() {
                    if k < self.n {
                        ray[k] = -delta * col[p];
                    }
                }
                Ok(PrimalOutcome::Unbounded(ray))
            }
            RatioChoice::Flip => {
                self.flip(q, delta);
                Ok(PrimalOutcome::Pivoted)
            }
            RatioChoice::Leave { pos, to_upper } => {
                self.pivot(q, pos, &col, to_upper);
                Ok(PrimalOutcome::Pivoted)
            }
        }
    }

    /// Moves a parked variable with zero reduced cost back towards the
    /// origin so optimal points do not carry artificial magnitudes.
    fn unpark_step(&mut self, d: &[f64]) -> Result<bool, LpError> {
        let Some(j) = (0..self.n).find(|&j| matches!(self.state[j], VarState::ParkedLow | VarState::ParkedHigh)) else {
            return Ok(false);
        };
        debug_assert!(d[j].abs() <= 10.0 * self.opts.optimality_tol);
        let target = 0.0f64.clamp(self.lower[j], self.upper[j]);
        let delta = if target > self.x[j] { 1.0 } else { -1.0 };
        let range = (target - self.x[j]).abs();
        let col = self.ftran_column(j);
        match self.primal_ratio(&col, delta, range, false) {
            RatioChoice::Flip | RatioChoice::Unbounded => {
                self.x[j] = target;
                self.state[j] = if target == self.lower[j] {
                    VarState::AtLower
                } else if target == self.upper[j] {
                    VarState::AtUpper
                } else {
                    VarState::Free
                };
            }
            RatioChoice::Leave { pos, to_upper } => self.pivot(j, pos, &col, to_upper),
        }
        Ok(true)
    }

    fn primal_ratio(&self, col: &[f64], delta: f64, own_range: f64, bland: bool) -> RatioChoice {
        let piv_tol = self.opts.pivot_tol;
        let ftol = self.opts.feasibility_tol;
        // (pos, rate, exact ratio)
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        for (p, &k) in self.basis.iter().enumerate() {
            let rate = -delta * col[p];
            if rate < -piv_tol && self.lower[k].is_finite() {
                rows.push((p, rate, ((self.x[k] - self.lower[k]) / -rate).max(0.0)));
            } else if rate > piv_tol && self.upper[k].is_finite() {
                rows.push((p, rate, ((self.upper[k] - self.x[k]) / rate).max(0.0)));
            }
        }

        let chosen = if bland {
            let mut best: Option<(usize, f64, f64)> = None;
            for &r in &rows {
                let better = match best {
                    None => true,
                    Some(b) => r.2 < b.2 || (r.2 == b.2 && self.basis[r.0] < self.basis[b.0]),
                };
                if better {
                    best = Some(r);
                }
            }
            best
        } else {
            let mut bound = f64::INFINITY;
            for &(p, rate, _) in &rows {
                let k = self.basis[p];
                let t = if rate < 0.0 {
                    (self.x[k] - self.lower[k] + ftol) / -rate
                } else {
                    (self.upper[k] - self.x[k] + ftol) / rate
                };
                bound = bound.min(t);
            }
            let mut best: Option<(usize, f64, f64)> = None;
            for &r in &rows {
                if r.2 <= bound && best.is_none_or(|b| r.1.abs() > b.1.abs()) {
                    best = Some(r);
                }
            }
            best
        };

        match chosen {
            None if own_range.is_finite() => RatioChoice::Flip,
            None => RatioChoice::Unbounded,
            Some((_, _, t)) if own_range <= t => RatioChoice::Flip,
            Some((pos, rate, _)) => RatioChoice::Leave {
                pos,
                to_upper: rate > 0.0,
            },
        }
    }

    /// One iteration of the composite phase 1 (minimize the sum of bound
    /// violations of basic variables).
    fn feasibility_step(&mut self, d: &[f64], bland: bool) -> Result<Step, LpError> {
        let Some((q, delta)) = self.choose_entering(d, bland) else {
            return Ok(Step::Stuck);
        };
        let col = self.ftran_column(q);
        let piv_tol = self.opts.pivot_tol;
        let ftol = self.opts.feasibility_tol;
        let mut best: Option<(usize, f64, f64, bool)> = None;
        for (p, &k) in self.basis.iter().enumerate() {
            let rate = -delta * col[p];
            if rate.abs() <= piv_tol {
                continue;
            }
            let (v, lo, hi) = (self.x[k], self.lower[k], self.upper[k]);
            let hit = if v < lo - ftol {
                (rate > 0.0).then(|| ((lo - v) / rate, false))
            } else if v > hi + ftol {
                (rate < 0.0).then(|| ((v - hi) / -rate, true))
            } else if rate < 0.0 && lo.is_finite() {
                Some((((v - lo) / -rate).max(0.0), false))
            } else if rate > 0.0 && hi.is_finite() {
                Some((((hi - v) / rate).max(0.0), true))
            } else {
                None
            };
            let Some((t, to_upper)) = hit else { continue };
            let better = match best {
                None => true,
                Some(b) => {
                    if bland {
                        t < b.2 || (t == b.2 && k < self.basis[b.0])
                    } else {
                        t < b.2 || (t == b.2 && rate.abs() > b.1.abs())
                    }
                }
            };
            if better {
                best = Some((p, rate, t, to_upper));
            }
        }
        let range = self.own_range(q, delta);
        match best {
            Some((_, _, t, _)) if range <= t => self.flip(q, delta),
            None if range.is_finite() => self.flip(q, delta),
            Some((pos, _, _, to_upper)) => self.pivot(q, pos, &col, to_upper),
            None => {
                return Err(LpError::NumericalBreakdown(
                    "phase 1 direction without a blocking variable".into(),
                ))
            }
        }
        Ok(Step::Pivoted)
    }

    fn flip(&mut self, q: usize, delta: f64) {
        if delta > 0.0 {
            self.x[q] = self.upper[q];
            self.state[q] = VarState::AtUpper;
        } else {
            self.x[q] = self.lower[q];
            self.state[q] = VarState::AtLower;
        }
    }

    fn pivot(&mut self, q: usize, pos: usize, col: &[f64], to_upper: bool) {
        let k = self.basis[pos];
        if to_upper {
            self.x[k] = self.upper[k];
            self.state[k] = VarState::AtUpper;
        } else {
            self.x[k] = self.lower[k];
            self.state[k] = VarState::AtLower;
        }
        self.factor.push(col, pos);
        self.basis[pos] = q;
        self.state[q] = VarState::Basic;
        if self.factor.len() > self.opts.refactor_interval + self.structural_basics() {
            self.reinvert();
        }
    }

    fn structural_basics(&self) -> usize {
        self.basis.iter().filter(|&&k| k < self.n).count()
    }

    /// Rebuilds the eta file from the all-logical basis. Structural columns
    /// that turn out numerically dependent are dropped and replaced by
    /// logicals.
    fn reinvert(&mut self) {
        let (n, m) = (self.n, self.m);
        self.factor.etas.clear();
        let mut owner: Vec<usize> = (n..n + m).collect();
        let mut taken = vec![false; m];
        let mut structurals = Vec::new();
        for &k in &self.basis {
            if k >= n {
                taken[k - n] = true;
            } else {
                structurals.push(k);
            }
        }
        structurals.sort_by_key(|&j| (self.col_start[j + 1] - self.col_start[j], j));
        let mut col = vec![0.0; m];
        for &j in &structurals {
            self.load_column(j, &mut col);
            self.factor.ftran(&mut col);
            let mut best: Option<(usize, f64)> = None;
            for (r, &v) in col.iter().enumerate() {
                if !taken[r] && best.is_none_or(|b| v.abs() > b.1) {
                    best = Some((r, v.abs()));
                }
            }
            match best {
                Some((r, mag)) if mag > self.opts.pivot_tol => {
                    self.factor.push(&col, r);
                    owner[r] = j;
                    taken[r] = true;
                }
                _ => {
                    self.state[j] = if self.x[j] <= self.lower[j] {
                        self.x[j] = self.lower[j];
                        VarState::AtLower
                    } else if self.x[j] >= self.upper[j] {
                        self.x[j] = self.upper[j];
                        VarState::AtUpper
                    } else {
                        VarState::Free
                    };
                }
            }
        }
        for r in 0..m {
            if !taken[r] {
                owner[r] = n + r;
            }
        }
        for &k in &owner {
            self.state[k] = VarState::Basic;
        }
        self.basis = owner;
    }
}
