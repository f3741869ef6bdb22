//! Discrete optimal transport between finitely supported marginals.
//!
//! [`ot_exact`] is a transportation simplex (the network simplex specialised
//! to complete bipartite graphs). It returns a vertex plan together with
//! optimal dual potentials. [`enumerate_vertex_plans`] lists the basic
//! feasible solutions by spanning-tree enumeration; it backs the brute-force
//! oracles and the enumeration of all optimal plans.

use crate::error::{Error, Result};

/// Marginal feasibility tolerance.
pub const MARGINAL_TOL: f64 = 1e-10;

const RESIDUE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} cost matrix",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::Infeasible("cost matrix has non-finite entries".into()));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn scale(&self) -> f64 {
        self.data.iter().fold(1.0_f64, |m, c| m.max(c.abs()))
    }
}

/// A coupling of two finite marginals, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    rows: usize,
    cols: usize,
    mass: Vec<f64>,
}

impl StagePlan {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        StagePlan {
            rows,
            cols,
            mass: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, m: f64) {
        self.mass[i * self.cols + j] = m;
    }

    /// Cells carrying positive mass, in row-major order.
    pub fn charged(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(move |(k, &m)| (k / self.cols, k % self.cols, m))
    }

    pub fn support_size(&self) -> usize {
        self.mass.iter().filter(|&&m| m > 0.0).count()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.charged().map(|(i, j, m)| m * cost.get(i, j)).sum()
    }

    pub fn has_marginals(&self, a: &[f64], b: &[f64], tol: f64) -> bool {
        self.row_sums().iter().zip(a).all(|(x, y)| (x - y).abs() <= tol)
            && self.col_sums().iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn approx_eq(&self, other: &StagePlan, tol: f64) -> bool {
        self.mass.iter().zip(&other.mass).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Comonotone (north-west corner on sorted supports) coupling of two 1D
/// measures and its cost `sum |x - y|^p`. Optimal for every `p >= 1`.
pub fn ot_1d(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64], p: f64) -> (StagePlan, f64) {
    let sorted = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        idx
    };
    let ix = sorted(xs);
    let iy = sorted(ys);
    let total: f64 = a.iter().sum();

    let cumulative = |idx: &[usize], w: &[f64]| {
        let mut acc = 0.0;
        let mut out: Vec<f64> = idx
            .iter()
            .map(|&i| {
                acc += w[i];
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = total;
        }
        out
    };
    let fa = cumulative(&ix, a);
    let fb = cumulative(&iy, b);

    let mut plan = StagePlan::zeros(xs.len(), ys.len());
    let mut value = 0.0;
    let (mut s, mut t) = (0, 0);
    let mut lo = 0.0;
    while s < ix.len() && t < iy.len() {
        let hi = fa[s].min(fb[t]);
        if hi > lo {
            let (i, j) = (ix[s], iy[t]);
            let m = hi - lo;
            plan.set(i, j, plan.get(i, j) + m);
            value += m * (xs[i] - ys[j]).abs().powf(p);
            lo = hi;
        }
        if fa[s] <= hi {
            s += 1;
        }
        if fb[t] <= hi {
            t += 1;
        }
    }
    (plan, value)
}

/// Optimal plan, its value and dual potentials with `u_i + v_j <= c_ij`.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub plan: StagePlan,
    pub value: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    basis: Vec<(usize, usize)>,
}

impl TransportSolution {
    /// Basic cells of the final vertex (a spanning tree of the bipartite graph).
    pub fn basis(&self) -> &[(usize, usize)] {
        &self.basis
    }

    pub fn reduced_cost(&self, cost: &CostMatrix, i: usize, j: usize) -> f64 {
        cost.get(i, j) - self.u[i] - self.v[j]
    }
}

fn check_marginals(cost: &CostMatrix, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != cost.rows || b.len() != cost.cols {
        return Err(Error::DimensionMismatch(format!(
            "marginals of length {} and {} for a {}x{} cost matrix",
            a.len(),
            b.len(),
            cost.rows,
            cost.cols
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Infeasible("empty marginal".into()));
    }
    if a.iter().chain(b).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Infeasible("marginal weights must be finite and nonnegative".into()));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > MARGINAL_TOL {
        return Err(Error::Infeasible(format!("marginal masses differ: {sa} vs {sb}")));
    }
    Ok(())
}

/// Exact optimal transport for a cost matrix and marginals `roww`, `colw`.
pub fn ot_exact(cost: &CostMatrix, roww: &[f64], colw: &[f64]) -> Result<(StagePlan, f64)> {
    let sol = solve_transport(cost, roww, colw)?;
    Ok((sol.plan, sol.value))
}

/// Transportation simplex. Dantzig pricing with lowest-index tie breaks;
/// after a run of degenerate pivots it falls back to Bland's rule, which
/// cannot cycle.
pub fn solve_transport(cost: &CostMatrix, a: &[f64], b: &[f64]) -> Result<TransportSolution> {
    check_marginals(cost, a, b)?;
    let (m, n) = (cost.rows, cost.cols);
    let mut x = vec![0.0; m * n];
    let mut in_basis = vec![false; m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);

    // North-west corner start.
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = ra[i].min(rb[j]).max(0.0);
        x[i * n + j] = q;
        in_basis[i * n + j] = true;
        basis.push((i, j));
        ra[i] -= q;
        rb[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || ra[i] <= rb[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let eps = 1e-12 * cost.scale();
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    let mut degenerate_run = 0usize;
    let max_iter = 50 * m * n + 1000;

    for _ in 0..max_iter {
        for l in adj.iter_mut() {
            l.clear();
        }
        for (k, &(bi, bj)) in basis.iter().enumerate() {
            adj[bi].push(k);
            adj[m + bj].push(k);
        }
        potentials(cost, &basis, &adj, m, &mut u, &mut v);

        let bland = degenerate_run > 50;
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -eps;
        'scan: for ei in 0..m {
            for ej in 0..n {
                if in_basis[ei * n + ej] {
                    continue;
                }
                let r = cost.get(ei, ej) - u[ei] - v[ej];
                if r < best {
                    entering = Some((ei, ej));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut plan = StagePlan::zeros(m, n);
            let mut value = 0.0;
            for (k, &xk) in x.iter().enumerate() {
                let xk = if xk > RESIDUE { xk } else { 0.0 };
                plan.mass[k] = xk;
                value += xk * cost.data[k];
            }
            return Ok(TransportSolution {
                plan,
                value,
                u,
                v,
                basis,
            });
        };

        // Tree path from column node ej to row node ei.
        let path = tree_path(&basis, &adj, m, m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leave: Option<usize> = None;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (bi, bj) = basis[k];
                let xv = x[bi * n + bj];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let (li, lj) = basis[l];
                        xv < theta || (xv == theta && bi * n + bj < li * n + lj)
                    }
                };
                if better {
                    theta = xv;
                    leave = Some(k);
                }
            }
        }
        let leave = leave.expect("cycle has a decreasing cell");
        let theta = theta.max(0.0);
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };

        x[ei * n + ej] = theta;
        for (pos, &k) in path.iter().enumerate() {
            let (bi, bj) = basis[k];
            if pos % 2 == 0 {
                x[bi * n + bj] -= theta;
            } else {
                x[bi * n + bj] += theta;
            }
        }
        let (li, lj) = basis[leave];
        x[li * n + lj] = 0.0;
        in_basis[li * n + lj] = false;
        in_basis[ei * n + ej] = true;
        basis[leave] = (ei, ej);
    }
    Err(Error::Infeasible("transportation simplex iteration limit reached".into()))
}

fn potentials(cost: &CostMatrix, basis: &[(usize, usize)], adj: &[Vec<usize>], m: usize, u: &mut [f64], v: &mut [f64]) {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = stack.pop() {
        for &k in &adj[node] {
            let (bi, bj) = basis[k];
            let (other, is_col) = if node < m { (m + bj, true) } else { (bi, false) };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            if is_col {
                v[bj] = cost.get(bi, bj) - u[bi];
            } else {
                u[bi] = cost.get(bi, bj) - v[bj];
            }
            stack.push(other);
        }
    }
}

/// Basis indices along the unique tree path from `from` to `to`.
fn tree_path(basis: &[(usize, usize)], adj: &[Vec<usize>], m: usize, from: usize, to: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = std::collections::VecDeque::from([from]);
    seen[from] = true;
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &k in &adj[node] {
            let (bi, bj) = basis[k];
            let other = if node < m { m + bj } else { bi };
            if !seen[other] {
                seen[other] = true;
                parent[other] = Some((node, k));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while cur != from {
        let (prev, k) = parent[cur].expect("basis is a spanning tree");
        path.push(k);
        cur = prev;
    }
    path.reverse();
    path
}

/// Flows on a spanning tree of cells that reproduce the marginals, if any.
fn tree_flow(cells: &[(usize, usize)], a: &[f64], b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.len(), b.len());
    let mut rem: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut deg = vec![0usize; m + n];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (k, &(i, j)) in cells.iter().enumerate() {
        deg[i] += 1;
        deg[m + j] += 1;
        incident[i].push(k);
        incident[m + j].push(k);
    }
    let mut flow = vec![0.0; cells.len()];
    let mut done = vec![false; cells.len()];
    let mut stack: Vec<usize> = (0..m + n).filter(|&v| deg[v] == 1).collect();
    while let Some(node) = stack.pop() {
        if deg[node] != 1 {
            continue;
        }
        let k = *incident[node].iter().find(|&&k| !done[k]).expect("leaf has an edge");
        let (i, j) = cells[k];
        let other = if node < m { m + j } else { i };
        flow[k] = rem[node];
        rem[other] -= rem[node];
        rem[node] = 0.0;
        done[k] = true;
        deg[node] -= 1;
        deg[other] -= 1;
        if deg[other] == 1 {
            stack.push(other);
        }
    }
    flow
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&self, mut x: usize) -> usize {
        while self.0[x] != x {
            x = self.0[x];
        }
        x
    }
}

/// All distinct vertices of the transportation polytope `Pi(a, b)` whose
/// support lies in the `allowed` cells (all cells when `None`). Fails with
/// `TooLarge` once more than `tree_cap` spanning trees have been examined.
pub fn enumerate_vertex_plans(
    a: &[f64],
    b: &[f64],
    allowed: Option<&[(usize, usize)]>,
    tree_cap: usize,
) -> Result<Vec<StagePlan>> {
    let (m, n) = (a.len(), b.len());
    let all: Vec<(usize, usize)>;
    let edges: &[(usize, usize)] = match allowed {
        Some(e) => e,
        None => {
            all = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
            &all
        }
    };
    let need = m + n - 1;
    let tol = 1e-12;
    let mut plans: Vec<StagePlan> = Vec::new();
    let mut trees = 0usize;
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(need);
    let mut uf = UnionFind((0..m + n).collect());

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        edges: &[(usize, usize)],
        start: usize,
        need: usize,
        m: usize,
        chosen: &mut Vec<(usize, usize)>,
        uf: &mut UnionFind,
        visit: &mut dyn FnMut(&[(usize, usize)]) -> Result<()>,
    ) -> Result<()> {
        if chosen.len() == need {
            return visit(chosen);
        }
        if edges.len() - start < need - chosen.len() {
            return Ok(());
        }
        for k in start..edges.len() {
            if edges.len() - k < need - chosen.len() {
                break;
            }
            let (i, j) = edges[k];
            let (ri, rj) = (uf.find(i), uf.find(m + j));
            if ri == rj {
                continue;
            }
            uf.0[ri] = rj;
            chosen.push((i, j));
            let res = recurse(edges, k + 1, need, m, chosen, uf, visit);
            chosen.pop();
            uf.0[ri] = ri;
            res?;
        }
        Ok(())
    }

    let mut visit = |cells: &[(usize, usize)]| -> Result<()> {
        trees += 1;
        if trees > tree_cap {
            return Err(Error::TooLarge(format!("more than {tree_cap} spanning trees")));
        }
        let flow = tree_flow(cells, a, b);
        if flow.iter().any(|&f| f < -tol) {
            return Ok(());
        }
        let mut plan = StagePlan::zeros(m, n);
        for (&(i, j), &f) in cells.iter().zip(&flow) {
            // Leaf elimination leaves rounding residue on zero-flow cells.
            plan.set(i, j, if f > RESIDUE { f } else { 0.0 });
        }
        if !plan.has_marginals(a, b, 1e-9) {
            return Ok(());
        }
        if !plans.iter().any(|q| q.approx_eq(&plan, 1e-12)) {
            plans.push(plan);
        }
        Ok(())
    };
    recurse(edges, 0, need, m, &mut chosen, &mut uf, &mut visit)?;
    Ok(plans)
}

/// Every optimal vertex plan: the vertices supported on cells with zero
/// reduced cost under an optimal dual solution. Fails with
/// `DegenerateExplosion` when there are more than `cap` of them.
pub fn optimal_vertex_plans(cost: &CostMatrix, a: &[f64], b: &[f64], cap: usize) -> Result<(Vec<StagePlan>, f64)> {
    let sol = solve_transport(cost, a, b)?;
    let tol = 1e-9 * cost.scale();
    let mut allowed = Vec::new();
    for i in 0..cost.rows {
        for j in 0..cost.cols {
            if sol.reduced_cost(cost, i, j).abs() <= tol {
                allowed.push((i, j));
            }
        }
    }
    let plans = match enumerate_vertex_plans(a, b, Some(&allowed), 1_000_000) {
        Ok(p) => p,
        Err(Error::TooLarge(_)) => return Err(Error::DegenerateExplosion { cap }),
        Err(e) => return Err(e),
    };
    if plans.len() > cap {
        return Err(Error::DegenerateExplosion { cap });
    }
    let plans = if plans.is_empty() { vec![sol.plan] } else { plans };
    Ok((plans, sol.value))
}
