//! Modulus of continuity of discrete measures and the resulting bound of
//! `KR_p` in terms of `AW_p`.

use crate::error::{Error, Result};
use crate::kr::path_cost;
use crate::measure::{disintegrate, KernelNode, PathMeasure};
use crate::transport::{ot_1d, ot_exact, CostMatrix, StagePlan};

/// Largest support the modulus linear program accepts.
pub const MODULUS_MAX_ATOMS: usize = 256;

/// Modulus query: the first `split` coordinates of each path form the
/// conditioning part, the rest the output part.
#[derive(Debug, Clone)]
pub struct ModulusQuery {
    pub mu: PathMeasure,
    pub split: usize,
    pub delta: f64,
    pub p: f64,
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("p must be in [1, inf), got {p}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("delta must be finite and nonnegative, got {delta}")))
    }
}

/// `max E[B]` over couplings of `w` with itself subject to `E[A] <= budget`,
/// where `A`, `B` are nonnegative cost matrices with zero diagonal in `A`.
///
/// Parametric search over the Lagrange multiplier: the optimal value is the
/// upper hull of `{(E[A], E[B])}` at `budget`, and each probe is a plain
/// transport problem with cost `lambda * A - B`.
pub fn budgeted_self_transport(w: &[f64], a: &CostMatrix, b: &CostMatrix, budget: f64) -> Result<f64> {
    let n = w.len();
    let eval = |plan: &StagePlan| (plan.cost(a), plan.cost(b));
    let solve = |lambda: f64| -> Result<(f64, f64)> {
        let cost = CostMatrix::from_fn(n, n, |i, j| lambda * a.get(i, j) - b.get(i, j));
        let (plan, _) = ot_exact(&cost, w, w)?;
        Ok(eval(&plan))
    };
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .fold(1.0_f64, |m, (i, j)| m.max(a.get(i, j)).max(b.get(i, j)));
    let tol = 1e-12 * scale;

    let mut left = solve(0.0)?;
    if left.0 <= budget {
        return Ok(left.1);
    }
    // The diagonal coupling is feasible with `E[A] = 0`.
    let mut right = (0.0, (0..n).map(|i| w[i] * b.get(i, i)).sum::<f64>());
    for _ in 0..10_000 {
        if left.1 <= right.1 {
            return Ok(right.1);
        }
        let lambda = (left.1 - right.1) / (left.0 - right.0);
        let line = left.1 - lambda * left.0;
        let probe = solve(lambda)?;
        if probe.1 - lambda * probe.0 <= line + tol {
            return Ok(right.1 + (left.1 - right.1) * (budget - right.0) / (left.0 - right.0));
        }
        if probe.0 > budget {
            left = probe;
        } else {
            right = probe;
        }
    }
    Err(Error::Infeasible("modulus search did not converge".into()))
}

/// `omega_mu(delta)` for the coordinate split in `q`.
pub fn modulus(q: &ModulusQuery) -> Result<f64> {
    check_p(q.p)?;
    check_delta(q.delta)?;
    let mu = &q.mu;
    let (d, total) = (mu.dim(), mu.dim() * mu.steps());
    if q.split == 0 || q.split >= total || !q.split.is_multiple_of(d) {
        return Err(Error::OutOfRange(format!(
            "split {} must be a positive multiple of d = {d} below {total}",
            q.split
        )));
    }
    if mu.len() > MODULUS_MAX_ATOMS {
        return Err(Error::TooLarge(format!("{} atoms (limit {MODULUS_MAX_ATOMS})", mu.len())));
    }
    let n = mu.len();
    let s = q.split;
    let ca = CostMatrix::from_fn(n, n, |i, j| path_cost(&mu.atom(i)[..s], &mu.atom(j)[..s], q.p));
    let cb = CostMatrix::from_fn(n, n, |i, j| path_cost(&mu.atom(i)[s..], &mu.atom(j)[s..], q.p));
    let v = budgeted_self_transport(mu.weights(), &ca, &cb, q.delta.powf(q.p))?;
    Ok(v.max(0.0).powf(1.0 / q.p))
}

/// `W_p^p` between the kernels of two nodes.
fn kernel_cost(x: &KernelNode, y: &KernelNode, p: f64) -> Result<f64> {
    let (vx, wx) = x.kernel();
    let (vy, wy) = y.kernel();
    if vx.first().is_some_and(|v| v.len() == 1) {
        let xs: Vec<f64> = vx.iter().map(|v| v[0]).collect();
        let ys: Vec<f64> = vy.iter().map(|v| v[0]).collect();
        return Ok(ot_1d(&xs, &wx, &ys, &wy, p).1);
    }
    let cost = CostMatrix::from_fn(vx.len(), vy.len(), |i, j| path_cost(&vx[i], &vy[j], p));
    Ok(ot_exact(&cost, &wx, &wy)?.1)
}

/// Lifted stage problem at step `k`: prefixes `x_{1:k-1}` with their masses,
/// prefix costs and kernel costs.
struct StageLift {
    weights: Vec<f64>,
    prefix_cost: CostMatrix,
    kernel_cost: CostMatrix,
}

fn stage_lift(mu: &PathMeasure, k: usize, p: f64) -> Result<StageLift> {
    if k < 2 || k > mu.steps() {
        return Err(Error::OutOfRange(format!("stage {k} not in 2..={}", mu.steps())));
    }
    let tree = disintegrate(mu, 0.0);
    let nodes: Vec<&KernelNode> = tree.nodes_at_depth(k - 1).map(|(_, n)| n).collect();
    let n = nodes.len();
    if n > MODULUS_MAX_ATOMS {
        return Err(Error::TooLarge(format!("{n} prefixes (limit {MODULUS_MAX_ATOMS})")));
    }
    let mut kc = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = kernel_cost(nodes[i], nodes[j], p)?;
            kc[i * n + j] = c;
            kc[j * n + i] = c;
        }
    }
    Ok(StageLift {
        weights: nodes.iter().map(|n| n.mass).collect(),
        prefix_cost: CostMatrix::from_fn(n, n, |i, j| path_cost(&nodes[i].prefix, &nodes[j].prefix, p)),
        kernel_cost: CostMatrix::new(n, n, kc)?,
    })
}

/// Modulus of the prefix-to-kernel map at step `k` (`2 <= k <= N`).
pub fn stage_modulus(mu: &PathMeasure, k: usize, delta: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_delta(delta)?;
    let lift = stage_lift(mu, k, p)?;
    let v = budgeted_self_transport(&lift.weights, &lift.prefix_cost, &lift.kernel_cost, delta.powf(p))?;
    Ok(v.max(0.0).powf(1.0 / p))
}

/// Stage moduli of one measure, evaluated exactly or read off a grid.
struct StageModuli {
    lifts: Vec<StageLift>,
    p: f64,
    /// Per stage: `(delta, omega)` on the grid, increasing in `delta`.
    tables: Option<Vec<Vec<(f64, f64)>>>,
}

impl StageModuli {
    fn exact(&self, stage: usize, delta: f64) -> Result<f64> {
        let l = &self.lifts[stage];
        let v = budgeted_self_transport(&l.weights, &l.prefix_cost, &l.kernel_cost, delta.powf(self.p))?;
        Ok(v.max(0.0).powf(1.0 / self.p))
    }

    /// `omega` at the smallest grid point not below `delta`; the modulus is
    /// nondecreasing so this never underestimates. Off-grid arguments are
    /// evaluated exactly.
    fn eval(&self, stage: usize, delta: f64) -> Result<f64> {
        if let Some(tables) = &self.tables {
            let t = &tables[stage];
            let i = t.partition_point(|&(g, _)| g < delta);
            if let Some(&(_, w)) = t.get(i) {
                return Ok(w);
            }
        }
        self.exact(stage, delta)
    }
}

/// `sum_k f^k(awdist)` with `f^1(d) = d` and
/// `f^k(d) = omega^k(d + sum_{l<k} f^l(d)) + d`.
///
/// With a grid, each `omega^k` is tabulated once and read at the next grid
/// point above its argument; without one it is evaluated exactly.
pub fn equivalence_bound(mu: &PathMeasure, awdist: f64, p: f64, delta_grid: Option<&[f64]>) -> Result<f64> {
    check_p(p)?;
    check_delta(awdist)?;
    let lifts = (2..=mu.steps()).map(|k| stage_lift(mu, k, p)).collect::<Result<Vec<_>>>()?;
    let mut moduli = StageModuli { lifts, p, tables: None };
    if let Some(grid) = delta_grid {
        if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::OutOfRange("delta grid must be increasing and nonnegative".into()));
        }
        let tables = (0..moduli.lifts.len())
            .map(|s| grid.iter().map(|&g| Ok((g, moduli.exact(s, g)?))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        moduli.tables = Some(tables);
    }
    let mut fs = vec![awdist];
    for stage in 0..moduli.lifts.len() {
        let arg = awdist + fs.iter().sum::<f64>();
        fs.push(moduli.eval(stage, arg)? + awdist);
    }
    Ok(fs.iter().sum())
}

/// Largest ratio `W_p(K_k(x), K_k(x')) / |x - x'|_p` over steps `k >= 2`
/// and distinct prefixes.
pub fn lipschitz_constant(mu: &PathMeasure, p: f64) -> Result<f64> {
    check_p(p)?;
    let tree = disintegrate(mu, 0.0);
    let mut best: f64 = 0.0;
    for k in 2..=mu.steps() {
        let nodes: Vec<&KernelNode> = tree.nodes_at_depth(k - 1).map(|(_, n)| n).collect();
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let w = kernel_cost(nodes[i], nodes[j], p)?.powf(1.0 / p);
                let dist = path_cost(&nodes[i].prefix, &nodes[j].prefix, p).powf(1.0 / p);
                if w > 0.0 {
                    best = best.max(if dist > 0.0 { w / dist } else { f64::INFINITY });
                }
            }
        }
    }
    Ok(best)
}
