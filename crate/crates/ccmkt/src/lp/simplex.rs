use super::factor::{BasisFactor, ColumnRef, DenseLu, SparseLu};
use super::{LpError, LpProblem, LpSolution, LpSolver, LpStatus, RowKind, SolverOptions};

/// Bounded-variable primal revised simplex.
///
/// Every row gets a logical column `−eᵢ` whose bounds encode the row sense,
/// so the working system is `[A −I] (x, r) = 0` with bounds on both parts.
/// Phase 1 minimizes the sum of basic infeasibilities; phase 2 the objective.
/// Pricing is Dantzig's rule with Harris' two-pass ratio test, switching to
/// Bland's smallest-index rule after a run of degenerate pivots.
#[derive(Debug, Clone, Default)]
pub struct RevisedSimplex {
    options: SolverOptions,
}

impl RevisedSimplex {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }
}

impl LpSolver for RevisedSimplex {
    fn solve(&self, problem: &LpProblem) -> Result<LpSolution, LpError> {
        problem.validate()?;
        Engine::new(problem, self.options).run()
    }
}

const NONBASIC: usize = usize::MAX;
const DEGENERATE_RUN: usize = 60;

struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

struct Engine {
    opts: SolverOptions,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    logical_rows: Vec<usize>,
    minus_one: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    factor: Box<dyn BasisFactor>,
    etas: Vec<Eta>,
    offset: f64,
}

enum Step {
    Flip,
    Pivot(usize, f64),
    Unbounded,
}

impl Engine {
    fn new(p: &LpProblem, opts: SolverOptions) -> Self {
        let n = p.num_vars();
        let m = p.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in p.rows() {
            for (v, _) in &row.terms {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_rows = vec![0; nnz];
        let mut col_vals = vec![0.0; nnz];
        for (i, row) in p.rows().iter().enumerate() {
            for (v, a) in &row.terms {
                if *a == 0.0 {
                    continue;
                }
                let k = fill[v.0];
                col_rows[k] = i;
                col_vals[k] = *a;
                fill[v.0] += 1;
            }
        }
        // zero coefficients were skipped; compact each column
        let mut start = vec![0usize; n + 1];
        let mut rows_c = Vec::with_capacity(nnz);
        let mut vals_c = Vec::with_capacity(nnz);
        for j in 0..n {
            for k in col_start[j]..fill[j] {
                rows_c.push(col_rows[k]);
                vals_c.push(col_vals[k]);
            }
            start[j + 1] = rows_c.len();
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in p.vars() {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(v.cost);
        }
        for row in p.rows() {
            lower.push(row.rhs);
            upper.push(match row.kind {
                RowKind::Eq => row.rhs,
                RowKind::Ge => f64::INFINITY,
            });
            cost.push(0.0);
        }
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = nonbasic_home(lower[j], upper[j]);
        }
        let basis: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![NONBASIC; n + m];
        for (i, &b) in basis.iter().enumerate() {
            pos[b] = i;
        }
        let factor: Box<dyn BasisFactor> = if m <= opts.dense_limit {
            Box::new(DenseLu::new())
        } else {
            Box::new(SparseLu::default())
        };
        Self {
            opts,
            n,
            m,
            col_start: start,
            col_rows: rows_c,
            col_vals: vals_c,
            logical_rows: (0..m).collect(),
            minus_one: vec![-1.0; m],
            lower,
            upper,
            cost,
            x,
            basis,
            pos,
            factor,
            etas: Vec::new(),
            offset: p.offset(),
        }
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.n {
            let (a, b) = (self.col_start[j], self.col_start[j + 1]);
            ColumnRef { rows: &self.col_rows[a..b], vals: &self.col_vals[a..b] }
        } else {
            let i = j - self.n;
            ColumnRef { rows: &self.logical_rows[i..i + 1], vals: &self.minus_one[i..i + 1] }
        }
    }

    fn dot(&self, y: &[f64], j: usize) -> f64 {
        let c = self.column(j);
        c.rows.iter().zip(c.vals).map(|(&i, &a)| a * y[i]).sum()
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        for _attempt in 0..=self.m {
            let mut factor = std::mem::replace(&mut self.factor, Box::new(DenseLu::new()));
            let cols: Vec<ColumnRef<'_>> = self.basis.iter().map(|&j| self.column(j)).collect();
            let result = factor.factor(self.m, &cols);
            drop(cols);
            self.factor = factor;
            match result {
                Ok(()) => {
                    self.etas.clear();
                    self.recompute_basics();
                    return Ok(());
                }
                Err(s) => {
                    for (&p, &row) in s.positions.iter().zip(&s.free_rows) {
                        let out = self.basis[p];
                        self.pos[out] = NONBASIC;
                        self.x[out] = snap_to_bound(self.x[out], self.lower[out], self.upper[out]);
                        let inn = self.n + row;
                        self.basis[p] = inn;
                        self.pos[inn] = p;
                    }
                }
            }
        }
        Err(LpError::Numerical("basis repair did not converge".into()))
    }

    fn recompute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.pos[j] == NONBASIC && self.x[j] != 0.0 {
                let xj = self.x[j];
                let c = self.column(j);
                for (&i, &a) in c.rows.iter().zip(c.vals) {
                    rhs[i] -= a * xj;
                }
            }
        }
        self.factor.solve(&mut rhs);
        for (i, &b) in self.basis.iter().enumerate() {
            self.x[b] = rhs[i];
        }
    }

    fn ftran(&self, v: &mut [f64]) {
        self.factor.solve(v);
        for e in &self.etas {
            let vr = v[e.pos] / e.pivot;
            v[e.pos] = vr;
            if vr != 0.0 {
                for (&i, &a) in e.idx.iter().zip(&e.val) {
                    v[i] -= a * vr;
                }
            }
        }
    }

    fn btran(&self, w: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut s = w[e.pos];
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                s -= a * w[i];
            }
            w[e.pos] = s / e.pivot;
        }
        self.factor.solve_transpose(w);
    }

    /// Bounds used by the ratio test. Infeasible basics may only move back
    /// towards the bound they violate.
    fn effective_bounds(&self, j: usize, phase1: bool) -> (f64, f64) {
        let (l, u, v) = (self.lower[j], self.upper[j], self.x[j]);
        let tol = self.opts.feas_tol;
        if phase1 {
            if v < l - tol {
                return (f64::NEG_INFINITY, l);
            }
            if v > u + tol {
                return (u, f64::INFINITY);
            }
        }
        (l, u)
    }

    fn infeasible(&self) -> bool {
        let tol = self.opts.feas_tol;
        self.basis.iter().any(|&j| {
            let v = self.x[j];
            v < self.lower[j] - tol || v > self.upper[j] + tol
        })
    }

    fn basic_costs(&self, phase1: bool) -> Vec<f64> {
        let tol = self.opts.feas_tol;
        self.basis
            .iter()
            .map(|&j| {
                if phase1 {
                    let v = self.x[j];
                    if v < self.lower[j] - tol {
                        -1.0
                    } else if v > self.upper[j] + tol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                }
            })
            .collect()
    }

    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            if self.pos[j] != NONBASIC || self.lower[j] == self.upper[j] {
                continue;
            }
            let c = if phase1 { 0.0 } else { self.cost[j] };
            let d = c - self.dot(y, j);
            let eligible = (d < -tol && self.x[j] < self.upper[j]) || (d > tol && self.x[j] > self.lower[j]);
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, d));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], phase1: bool, bland: bool) -> Step {
        let tol = self.opts.feas_tol;
        let ptol = self.opts.pivot_tol;
        let width = self.upper[q] - self.lower[q];
        let mut theta_max = f64::INFINITY;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() < ptol {
                continue;
            }
            let j = self.basis[i];
            let (lo, hi) = self.effective_bounds(j, phase1);
            let rate = -dir * a;
            let slack = if bland { 0.0 } else { tol };
            let t = if rate < 0.0 {
                if lo == f64::NEG_INFINITY {
                    continue;
                }
                (self.x[j] - lo + slack) / -rate
            } else {
                if hi == f64::INFINITY {
                    continue;
                }
                (hi - self.x[j] + slack) / rate
            };
            if t < theta_max {
                theta_max = t;
            }
        }
        if width.is_finite() && width <= theta_max {
            return Step::Flip;
        }
        if theta_max == f64::INFINITY {
            return Step::Unbounded;
        }
        let mut chosen: Option<(usize, f64, f64)> = None;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() < ptol {
                continue;
            }
            let j = self.basis[i];
            let (lo, hi) = self.effective_bounds(j, phase1);
            let rate = -dir * a;
            let t = if rate < 0.0 {
                if lo == f64::NEG_INFINITY {
                    continue;
                }
                (self.x[j] - lo) / -rate
            } else {
                if hi == f64::INFINITY {
                    continue;
                }
                (hi - self.x[j]) / rate
            };
            if t > theta_max {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((ci, ct, ca)) => {
                    if bland {
                        t < ct - 1e-12 || (t <= ct + 1e-12 && j < self.basis[ci])
                    } else {
                        a.abs() > ca || (a.abs() == ca && j < self.basis[ci])
                    }
                }
            };
            if better {
                chosen = Some((i, t, a.abs()));
            }
        }
        match chosen {
            Some((i, t, _)) => Step::Pivot(i, t.max(0.0)),
            None => Step::Unbounded,
        }
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        let total = self.n + self.m;
        let limit = self.opts.max_iterations.unwrap_or(50 * (total + 10));
        self.refactor()?;
        let mut iterations = 0;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut alpha = vec![0.0; self.m];
        let status = loop {
            if iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            if self.etas.len() >= self.opts.refactor_every {
                self.refactor()?;
            }
            let phase1 = self.infeasible();
            let mut y = self.basic_costs(phase1);
            self.btran(&mut y);
            let Some((q, d)) = self.price(&y, phase1, bland) else {
                if !self.etas.is_empty() {
                    // confirm on a fresh factorization before stopping
                    self.refactor()?;
                    continue;
                }
                break if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            alpha.iter_mut().for_each(|a| *a = 0.0);
            {
                let c = self.column(q);
                for (&i, &a) in c.rows.iter().zip(c.vals) {
                    alpha[i] = a;
                }
            }
            self.ftran(&mut alpha);
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            iterations += 1;
            match self.ratio_test(q, dir, &alpha, phase1, bland) {
                Step::Unbounded => {
                    if phase1 {
                        return Err(LpError::Numerical("unbounded phase-1 direction".into()));
                    }
                    break LpStatus::Unbounded;
                }
                Step::Flip => {
                    let theta = self.upper[q] - self.lower[q];
                    for (i, &a) in alpha.iter().enumerate() {
                        if a != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= dir * theta * a;
                        }
                    }
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    degenerate = 0;
                    bland = false;
                }
                Step::Pivot(r, theta) => {
                    let leave = self.basis[r];
                    let (lo, hi) = self.effective_bounds(leave, phase1);
                    let rate = -dir * alpha[r];
                    for (i, &a) in alpha.iter().enumerate() {
                        if a != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= dir * theta * a;
                        }
                    }
                    self.x[q] += dir * theta;
                    self.x[leave] = if rate < 0.0 { lo } else { hi };
                    self.pos[leave] = NONBASIC;
                    self.basis[r] = q;
                    self.pos[q] = r;
                    let mut idx = Vec::new();
                    let mut val = Vec::new();
                    for (i, &a) in alpha.iter().enumerate() {
                        if i != r && a != 0.0 {
                            idx.push(i);
                            val.push(a);
                        }
                    }
                    self.etas.push(Eta { pos: r, pivot: alpha[r], idx, val });
                    if theta < 1e-12 {
                        degenerate += 1;
                        if degenerate > DEGENERATE_RUN {
                            bland = true;
                        }
                    } else {
                        degenerate = 0;
                        bland = false;
                    }
                }
            }
        };
        let mut y = self.basic_costs(false);
        self.btran(&mut y);
        let reduced: Vec<f64> = (0..self.n).map(|j| self.cost[j] - self.dot(&y, j)).collect();
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = self.offset + x.iter().zip(&self.cost).map(|(a, c)| a * c).sum::<f64>();
        let optimal = status == LpStatus::Optimal;
        Ok(LpSolution {
            status,
            x,
            duals: if optimal { y } else { vec![0.0; self.m] },
            reduced_costs: if optimal { reduced } else { vec![0.0; self.n] },
            objective,
            iterations,
        })
    }
}

fn nonbasic_home(lower: f64, upper: f64) -> f64 {
    if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    }
}

fn snap_to_bound(v: f64, lower: f64, upper: f64) -> f64 {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            if (v - lower).abs() <= (upper - v).abs() {
                lower
            } else {
                upper
            }
        }
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}
