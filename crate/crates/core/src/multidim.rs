//! Vector-valued paths (`d >= 1`): quantile processes built from stagewise
//! optimal transport from a uniform grid on `(0,1)^d`, the resulting
//! Knothe–Rosenblatt distance, and the supremum over triangular optimal
//! couplings.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kr::{path_cost, root};
use crate::measure::{disintegrate, KernelTree, NodeId, PathMeasure};
use crate::quantile::check_exponent;
use crate::transport::{ot_exact, optimal_vertex_plans, CostMatrix, StagePlan};

/// Cap on optimal vertex plans per stage problem.
pub const OPTIMAL_PLAN_CAP: usize = 64;

/// Largest grid accepted (`M^d` points).
pub const MAX_GRID_POINTS: usize = 1 << 14;

/// Cell centres `((i + 1/2) / M)` of an `M^d` grid, lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReference {
    dim: usize,
    per_axis: usize,
    points: Vec<Vec<f64>>,
}

impl GridReference {
    pub fn new(dim: usize, per_axis: usize) -> Result<Self> {
        if dim == 0 || per_axis == 0 {
            return Err(Error::OutOfRange("grid needs d >= 1 and M >= 1".into()));
        }
        let count = (per_axis as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if count > MAX_GRID_POINTS as u128 {
            return Err(Error::TooLarge(format!("{per_axis}^{dim} grid points (limit {MAX_GRID_POINTS})")));
        }
        let count = count as usize;
        let h = 1.0 / per_axis as f64;
        let points = (0..count)
            .map(|mut idx| {
                let mut p = vec![0.0; dim];
                for j in (0..dim).rev() {
                    p[j] = ((idx % per_axis) as f64 + 0.5) * h;
                    idx /= per_axis;
                }
                p
            })
            .collect();
        Ok(GridReference { dim, per_axis, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![1.0 / self.points.len() as f64; self.points.len()]
    }
}

fn check_p_above_one(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("p must exceed 1, got {p}")))
    }
}

fn grid_plan(grid: &GridReference, values: &[Vec<f64>], weights: &[f64], p: f64) -> Result<StagePlan> {
    let cost = CostMatrix::from_fn(grid.points.len(), values.len(), |i, j| path_cost(&grid.points[i], &values[j], p));
    Ok(ot_exact(&cost, &grid.weights(), weights)?.0)
}

/// Optimal plan from the uniform grid to a one-step measure `rho` on `R^d`
/// for the cost `|u - x|_p^p`.
pub fn optimal_map(grid: &GridReference, rho: &PathMeasure, p: f64) -> Result<StagePlan> {
    check_p_above_one(p)?;
    if rho.steps() != 1 || rho.dim() != grid.dim {
        return Err(Error::DimensionMismatch(format!(
            "target must be one step in R^{}, got N = {}, d = {}",
            grid.dim,
            rho.steps(),
            rho.dim()
        )));
    }
    grid_plan(grid, rho.atoms(), rho.weights(), p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiNode {
    /// Support of the kernel at this node, lexicographically ordered.
    pub values: Vec<Vec<f64>>,
    /// Grid points by support values.
    pub plan: StagePlan,
    /// One subtree per support value; empty at the last step.
    pub children: Vec<MultiNode>,
}

impl MultiNode {
    /// Support values reached from grid point `g`, with their masses.
    pub fn targets_of(&self, g: usize) -> Vec<(usize, f64)> {
        (0..self.plan.cols()).map(|j| (j, self.plan.get(g, j))).filter(|t| t.1 > 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiQuantileProcess {
    dim: usize,
    steps: usize,
    grid: GridReference,
    root: MultiNode,
}

impl MultiQuantileProcess {
    pub fn root(&self) -> &MultiNode {
        &self.root
    }

    pub fn grid(&self) -> &GridReference {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Whether no grid point has its mass split between several values.
    pub fn is_map(&self) -> bool {
        fn rec(n: &MultiNode) -> bool {
            (0..n.plan.rows()).all(|g| n.targets_of(g).len() <= 1) && n.children.iter().all(rec)
        }
        rec(&self.root)
    }

    /// Image of the grid-product reference measure.
    pub fn pushforward(&self) -> Result<PathMeasure> {
        fn rec(n: &MultiNode, mass: f64, path: &mut Vec<f64>, out: &mut Vec<(Vec<f64>, f64)>) {
            let cols = n.plan.col_sums();
            for (j, v) in n.values.iter().enumerate() {
                path.extend_from_slice(v);
                if n.children.is_empty() {
                    out.push((path.clone(), mass * cols[j]));
                } else {
                    rec(&n.children[j], mass * cols[j], path, out);
                }
                path.truncate(path.len() - v.len());
            }
        }
        let mut out = Vec::new();
        rec(&self.root, 1.0, &mut Vec::new(), &mut out);
        PathMeasure::from_masses(self.dim, self.steps, out)
    }
}

fn build_multi(tree: &KernelTree, id: NodeId, grid: &GridReference, p: f64) -> Result<MultiNode> {
    let node = tree.node(id);
    let (values, weights) = node.kernel();
    let plan = grid_plan(grid, &values, &weights, p)?;
    let children = node
        .branches
        .iter()
        .filter(|b| !tree.node(b.child).is_leaf())
        .map(|b| build_multi(tree, b.child, grid, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiNode { values, plan, children })
}

/// Stagewise quantile process: at each node the kernel is reached from the
/// grid by an optimal plan; equal values share one subtree.
pub fn multi_quantile_process(mu: &PathMeasure, grid: &GridReference, p: f64) -> Result<MultiQuantileProcess> {
    check_p_above_one(p)?;
    if mu.dim() != grid.dim {
        return Err(Error::DimensionMismatch(format!("measure in R^{} but grid in R^{}", mu.dim(), grid.dim)));
    }
    let tree = disintegrate(mu, 0.0);
    let root = build_multi(&tree, tree.root(), grid, p)?;
    Ok(MultiQuantileProcess {
        dim: mu.dim(),
        steps: mu.steps(),
        grid: grid.clone(),
        root,
    })
}

/// Mass paired between support values of two nodes: inside each grid cell
/// the two splits are matched in value order.
fn cell_pairing(a: &MultiNode, b: &MultiNode) -> HashMap<(usize, usize), f64> {
    let mut out: HashMap<(usize, usize), f64> = HashMap::new();
    for g in 0..a.plan.rows() {
        let ta = a.targets_of(g);
        let tb = b.targets_of(g);
        let total = ta.iter().map(|t| t.1).sum::<f64>();
        let cumulative = |t: &[(usize, f64)]| {
            let mut acc = 0.0;
            let mut c: Vec<f64> = t
                .iter()
                .map(|x| {
                    acc += x.1;
                    acc
                })
                .collect();
            if let Some(last) = c.last_mut() {
                *last = total;
            }
            c
        };
        let (ca, cb) = (cumulative(&ta), cumulative(&tb));
        let (mut s, mut t, mut lo) = (0, 0, 0.0);
        while s < ta.len() && t < tb.len() {
            let hi = ca[s].min(cb[t]);
            if hi > lo {
                *out.entry((ta[s].0, tb[t].0)).or_default() += hi - lo;
                lo = hi;
            }
            if ca[s] <= hi {
                s += 1;
            }
            if cb[t] <= hi {
                t += 1;
            }
        }
    }
    out
}

fn multi_cost(a: &MultiNode, b: &MultiNode, p: f64) -> f64 {
    let mut pairs: Vec<((usize, usize), f64)> = cell_pairing(a, b).into_iter().collect();
    pairs.sort_by_key(|x| x.0);
    pairs
        .into_iter()
        .map(|((i, j), m)| {
            let here = path_cost(&a.values[i], &b.values[j], p);
            let below = if a.children.is_empty() {
                0.0
            } else {
                multi_cost(&a.children[i], &b.children[j], p)
            };
            m * (here + below)
        })
        .sum()
}

/// `KR_p` between the grid quantile processes of `mu` and `nu`.
pub fn kr_distance_multi(mu: &PathMeasure, nu: &PathMeasure, grid: &GridReference, p: f64) -> Result<f64> {
    mu.same_shape(nu)?;
    let (qa, qb) = (multi_quantile_process(mu, grid, p)?, multi_quantile_process(nu, grid, p)?);
    Ok(root(multi_cost(&qa.root, &qb.root, p), p))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TildeDiagnostics {
    /// Stage problems solved (reachable prefix pairs).
    pub stage_problems: usize,
    /// Stage problems with more than one optimal vertex plan.
    pub non_unique: usize,
    pub max_optimal_plans: usize,
}

impl TildeDiagnostics {
    pub fn all_unique(&self) -> bool {
        self.non_unique == 0
    }
}

/// Supremum of the expected cost `sum_k |x_k - y_k|_p^p` over couplings
/// whose every stage coupling is optimal for the stage cost alone, with the
/// `p`-th root taken.
pub fn tilde_kr(mu: &PathMeasure, nu: &PathMeasure, p: f64) -> Result<(f64, TildeDiagnostics)> {
    check_exponent(p)?;
    if p == 0.0 {
        return Err(Error::OutOfRange("p must be in [1, inf)".into()));
    }
    mu.same_shape(nu)?;
    let (ta, tb) = (disintegrate(mu, 0.0), disintegrate(nu, 0.0));
    let mut memo = HashMap::new();
    let mut diag = TildeDiagnostics::default();
    let v = tilde_value(&ta, &tb, ta.root(), tb.root(), p, &mut memo, &mut diag)?;
    Ok((root(v, p), diag))
}

fn tilde_value(
    ta: &KernelTree,
    tb: &KernelTree,
    x: NodeId,
    y: NodeId,
    p: f64,
    memo: &mut HashMap<(NodeId, NodeId), f64>,
    diag: &mut TildeDiagnostics,
) -> Result<f64> {
    if let Some(&v) = memo.get(&(x, y)) {
        return Ok(v);
    }
    let (nx, ny) = (ta.node(x), tb.node(y));
    if nx.is_leaf() {
        return Ok(0.0);
    }
    let (vx, wx) = nx.kernel();
    let (vy, wy) = ny.kernel();
    let cost = CostMatrix::from_fn(vx.len(), vy.len(), |i, j| path_cost(&vx[i], &vy[j], p));
    let (plans, _) = optimal_vertex_plans(&cost, &wx, &wy, OPTIMAL_PLAN_CAP)?;
    diag.stage_problems += 1;
    diag.max_optimal_plans = diag.max_optimal_plans.max(plans.len());
    if plans.len() > 1 {
        diag.non_unique += 1;
    }
    let mut best = f64::NEG_INFINITY;
    for plan in &plans {
        let mut total = 0.0;
        for (i, j, w) in plan.charged() {
            let below = tilde_value(ta, tb, nx.branches[i].child, ny.branches[j].child, p, memo, diag)?;
            total += w * (cost.get(i, j) + below);
        }
        best = best.max(total);
    }
    memo.insert((x, y), best);
    Ok(best)
}

/// Three two-atom measures on `(R^2)^2` on which `tilde_kr` violates the
/// triangle inequality.
pub fn counterexample_measures(eps: f64) -> Result<(PathMeasure, PathMeasure, PathMeasure)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::OutOfRange(format!("eps must be positive, got {eps}")));
    }
    let two = |a: [f64; 4], b: [f64; 4]| PathMeasure::new(2, 2, vec![a.to_vec(), b.to_vec()], vec![0.5, 0.5]);
    Ok((
        two([-1.0, 0.0, 2.0, 0.0], [1.0, 0.0, -2.0, 0.0])?,
        two([-eps, 1.0, 2.0, 0.0], [eps, -1.0, -2.0, 0.0])?,
        two([eps, 1.0, 2.0, 0.0], [-eps, -1.0, -2.0, 0.0])?,
    ))
}
