//! Basis factorizations for the revised simplex.
//!
//! A factorization is built once per refactorization point from the current
//! basis columns and then extended with product-form eta updates between
//! refactorizations.

/// One column of a basis matrix in compressed form.
#[derive(Debug, Clone, Copy)]
pub struct ColumnRef<'a> {
    pub rows: &'a [usize],
    pub vals: &'a [f64],
}

/// Result of a failed factorization: positions that could not be pivoted and
/// the rows left without a pivot. Both lists have equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Singular {
    pub positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

pub trait BasisFactor {
    /// Factor the square matrix whose `k`-th column is `cols[k]`.
    fn factor(&mut self, dim: usize, cols: &[ColumnRef<'_>]) -> Result<(), Singular>;
    /// Overwrite `rhs` with the solution of `B z = rhs`.
    fn solve(&self, rhs: &mut [f64]);
    /// Overwrite `rhs` with the solution of `Bᵀ y = rhs`.
    fn solve_transpose(&self, rhs: &mut [f64]);
    /// Number of stored nonzeros, used for diagnostics.
    fn nnz(&self) -> usize;
}

const SINGULAR_TOL: f64 = 1e-11;

/// Dense LU with partial pivoting. Intended for bases up to a few hundred rows.
#[derive(Debug, Default, Clone)]
pub struct DenseLu {
    dim: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BasisFactor for DenseLu {
    fn factor(&mut self, dim: usize, cols: &[ColumnRef<'_>]) -> Result<(), Singular> {
        self.dim = dim;
        // row-major storage
        let mut a = vec![0.0; dim * dim];
        for (k, col) in cols.iter().enumerate() {
            for (&i, &v) in col.rows.iter().zip(col.vals) {
                a[i * dim + k] += v;
            }
        }
        let mut perm: Vec<usize> = (0..dim).collect();
        let mut bad_cols = Vec::new();
        let mut pivot_row_of = vec![usize::MAX; dim];
        let mut used = vec![false; dim];
        // column-by-column elimination choosing the pivot among unused rows
        for k in 0..dim {
            let mut best = usize::MAX;
            let mut best_abs = SINGULAR_TOL;
            for i in 0..dim {
                if !used[i] && a[i * dim + k].abs() > best_abs {
                    best_abs = a[i * dim + k].abs();
                    best = i;
                }
            }
            if best == usize::MAX {
                bad_cols.push(k);
                continue;
            }
            used[best] = true;
            pivot_row_of[k] = best;
            let piv = a[best * dim + k];
            for i in 0..dim {
                if used[i] {
                    continue;
                }
                let f = a[i * dim + k] / piv;
                if f != 0.0 {
                    a[i * dim + k] = f;
                    for j in (k + 1)..dim {
                        a[i * dim + j] -= f * a[best * dim + j];
                    }
                }
            }
        }
        if !bad_cols.is_empty() {
            let free_rows = (0..dim).filter(|&i| !used[i]).collect();
            return Err(Singular { positions: bad_cols, free_rows });
        }
        // reorder rows so that pivot k sits in row k
        let mut lu = vec![0.0; dim * dim];
        for k in 0..dim {
            let r = pivot_row_of[k];
            lu[k * dim..(k + 1) * dim].copy_from_slice(&a[r * dim..(r + 1) * dim]);
            perm[k] = r;
        }
        self.lu = lu;
        self.perm = perm;
        Ok(())
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = self.dim;
        let mut z: Vec<f64> = self.perm.iter().map(|&r| rhs[r]).collect();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * z[j];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * z[j];
            }
            z[i] = s / self.lu[i * n + i];
        }
        rhs.copy_from_slice(&z);
    }

    fn solve_transpose(&self, rhs: &mut [f64]) {
        let n = self.dim;
        let mut z = rhs.to_vec();
        // Uᵀ w = c
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s / self.lu[i * n + i];
        }
        // Lᵀ v = w
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in (i + 1)..n {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s;
        }
        for k in 0..n {
            rhs[self.perm[k]] = z[k];
        }
    }

    fn nnz(&self) -> usize {
        self.lu.iter().filter(|v| **v != 0.0).count()
    }
}

/// Left-looking sparse LU (Gilbert-Peierls) with threshold partial pivoting.
///
/// Columns are processed sparsest first; among pivot candidates within the
/// threshold, the row with the fewest basis nonzeros wins.
#[derive(Debug, Clone)]
pub struct SparseLu {
    dim: usize,
    threshold: f64,
    // L is unit lower triangular in pivot order, diagonal stored first.
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    // U in pivot order, diagonal stored last.
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    pinv: Vec<usize>,
    q: Vec<usize>,
}

impl Default for SparseLu {
    fn default() -> Self {
        Self::new(0.1)
    }
}

impl SparseLu {
    pub fn new(threshold: f64) -> Self {
        Self {
            dim: 0,
            threshold,
            lp: Vec::new(),
            li: Vec::new(),
            lx: Vec::new(),
            up: Vec::new(),
            ui: Vec::new(),
            ux: Vec::new(),
            pinv: Vec::new(),
            q: Vec::new(),
        }
    }
}

const UNSET: usize = usize::MAX;

fn col_end(starts: &[usize], j: usize, len: usize) -> usize {
    if j + 1 < starts.len() {
        starts[j + 1]
    } else {
        len
    }
}

impl BasisFactor for SparseLu {
    fn factor(&mut self, dim: usize, cols: &[ColumnRef<'_>]) -> Result<(), Singular> {
        let n = dim;
        let mut row_count = vec![0usize; n];
        for c in cols {
            for &i in c.rows {
                row_count[i] += 1;
            }
        }
        let mut q: Vec<usize> = (0..n).collect();
        q.sort_by_key(|&k| cols[k].rows.len());

        let mut lp = Vec::with_capacity(n + 1);
        let mut li: Vec<usize> = Vec::new();
        let mut lx: Vec<f64> = Vec::new();
        let mut up = Vec::with_capacity(n + 1);
        let mut ui: Vec<usize> = Vec::new();
        let mut ux: Vec<f64> = Vec::new();
        // pinv[row] = pivot step, UNSET while unpivoted
        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0f64; n];
        let mut mark = vec![0u32; n];
        let mut stamp = 0u32;
        let mut stack: Vec<usize> = Vec::new();
        let mut pstack: Vec<usize> = Vec::new();
        let mut order: Vec<usize> = Vec::new();
        let mut bad_positions = Vec::new();
        let mut pivot_cols = Vec::with_capacity(n);

        for &col in &q {
            let c = cols[col];
            // symbolic: rows reachable from the column's pattern through L
            stamp += 1;
            order.clear();
            for &start in c.rows {
                if mark[start] == stamp {
                    continue;
                }
                stack.clear();
                pstack.clear();
                stack.push(start);
                pstack.push(UNSET);
                while let Some(&j) = stack.last() {
                    let jnew = pinv[j];
                    let top = stack.len() - 1;
                    if mark[j] != stamp {
                        mark[j] = stamp;
                        pstack[top] = if jnew == UNSET { 0 } else { lp[jnew] + 1 };
                    }
                    let end = if jnew == UNSET { 0 } else { col_end(&lp, jnew, li.len()) };
                    let mut descended = false;
                    let mut p = pstack[top];
                    while p < end {
                        let i = li[p];
                        p += 1;
                        if mark[i] != stamp {
                            pstack[top] = p;
                            stack.push(i);
                            pstack.push(UNSET);
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        stack.pop();
                        pstack.pop();
                        order.push(j);
                    }
                }
            }
            // numeric: x = L \ column
            for &i in &order {
                x[i] = 0.0;
            }
            for (&i, &v) in c.rows.iter().zip(c.vals) {
                x[i] += v;
            }
            for &j in order.iter().rev() {
                let jnew = pinv[j];
                if jnew == UNSET {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in (lp[jnew] + 1)..col_end(&lp, jnew, li.len()) {
                    x[li[p]] -= lx[p] * xj;
                }
            }
            // pivot choice
            let mut amax = 0.0f64;
            for &i in &order {
                if pinv[i] == UNSET {
                    amax = amax.max(x[i].abs());
                }
            }
            if amax <= SINGULAR_TOL {
                bad_positions.push(col);
                for &i in &order {
                    x[i] = 0.0;
                }
                continue;
            }
            let mut ipiv = UNSET;
            for &i in &order {
                if pinv[i] != UNSET {
                    continue;
                }
                let a = x[i].abs();
                if a < self.threshold * amax {
                    continue;
                }
                if ipiv == UNSET {
                    ipiv = i;
                    continue;
                }
                let (ca, cb) = (row_count[i], row_count[ipiv]);
                let better = ca < cb
                    || (ca == cb && (a > x[ipiv].abs() || (a == x[ipiv].abs() && i < ipiv)));
                if better {
                    ipiv = i;
                }
            }
            let k = pivot_cols.len();
            up.push(ui.len());
            for &i in order.iter().rev() {
                let inew = pinv[i];
                if inew != UNSET && x[i] != 0.0 {
                    ui.push(inew);
                    ux.push(x[i]);
                }
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            lp.push(li.len());
            li.push(ipiv);
            lx.push(1.0);
            for &i in order.iter().rev() {
                if pinv[i] == UNSET && x[i] != 0.0 {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
            pivot_cols.push(col);
        }
        if !bad_positions.is_empty() {
            let free_rows = (0..n).filter(|&i| pinv[i] == UNSET).collect();
            return Err(Singular { positions: bad_positions, free_rows });
        }
        lp.push(li.len());
        up.push(ui.len());
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        self.dim = n;
        self.lp = lp;
        self.li = li;
        self.lx = lx;
        self.up = up;
        self.ui = ui;
        self.ux = ux;
        self.pinv = pinv;
        self.q = pivot_cols;
        Ok(())
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = self.dim;
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[self.pinv[i]] = rhs[i];
        }
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in (self.lp[j] + 1)..self.lp[j + 1] {
                    w[self.li[p]] -= self.lx[p] * wj;
                }
            }
        }
        for j in (0..n).rev() {
            let last = self.up[j + 1] - 1;
            w[j] /= self.ux[last];
            let wj = w[j];
            if wj != 0.0 {
                for p in self.up[j]..last {
                    w[self.ui[p]] -= self.ux[p] * wj;
                }
            }
        }
        for k in 0..n {
            rhs[self.q[k]] = w[k];
        }
    }

    fn solve_transpose(&self, rhs: &mut [f64]) {
        let n = self.dim;
        let mut w: Vec<f64> = self.q.iter().map(|&c| rhs[c]).collect();
        for j in 0..n {
            let last = self.up[j + 1] - 1;
            let mut s = w[j];
            for p in self.up[j]..last {
                s -= self.ux[p] * w[self.ui[p]];
            }
            w[j] = s / self.ux[last];
        }
        for j in (0..n).rev() {
            let mut s = w[j];
            for p in (self.lp[j] + 1)..self.lp[j + 1] {
                s -= self.lx[p] * w[self.li[p]];
            }
            w[j] = s;
        }
        for i in 0..n {
            rhs[i] = w[self.pinv[i]];
        }
    }

    fn nnz(&self) -> usize {
        self.lx.len() + self.ux.len()
    }
}
