//! Adapted (bicausal) transport between path measures: the nested dynamic
//! program for `AW_p`, an exhaustive oracle, plain `W_p` and the adapted
//! variation.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kr::{path_cost, root, Coupling};
use crate::measure::{disintegrate, KernelTree, NodeId, PathMeasure};
use crate::quantile::check_exponent;
use crate::transport::{enumerate_vertex_plans, ot_exact, CostMatrix, StagePlan};

/// Maximum number of stage-plan compositions the oracle will examine.
pub const BRUTEFORCE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedDistance {
    pub value: f64,
    pub p: f64,
    pub coupling: Coupling,
    /// Set for `p = 0`, where the stagewise-truncated cost
    /// `sum_k min(|x_k - y_k|_1, 1)` replaces `min(|x - y|_1, 1)`.
    pub surrogate_p0: bool,
}

/// Backward induction over pairs of kernel-tree nodes of equal depth.
struct NestedDp<'a, F> {
    a: &'a KernelTree,
    b: &'a KernelTree,
    stage: F,
    memo: HashMap<(NodeId, NodeId), (f64, StagePlan)>,
}

impl<'a, F: Fn(&[f64], &[f64], f64) -> f64> NestedDp<'a, F> {
    fn new(a: &'a KernelTree, b: &'a KernelTree, stage: F) -> Self {
        NestedDp {
            a,
            b,
            stage,
            memo: HashMap::new(),
        }
    }

    fn value(&mut self, x: NodeId, y: NodeId) -> Result<f64> {
        if let Some((v, _)) = self.memo.get(&(x, y)) {
            return Ok(*v);
        }
        let (nx, ny) = (self.a.node(x), self.b.node(y));
        if nx.is_leaf() {
            self.memo.insert((x, y), (0.0, StagePlan::zeros(0, 0)));
            return Ok(0.0);
        }
        let (m, n) = (nx.branches.len(), ny.branches.len());
        let mut data = Vec::with_capacity(m * n);
        for bx in &nx.branches {
            for by in &ny.branches {
                let below = self.value(bx.child, by.child)?;
                data.push((self.stage)(&bx.value, &by.value, below));
            }
        }
        let cost = CostMatrix::new(m, n, data)?;
        let wa: Vec<f64> = nx.branches.iter().map(|b| b.weight).collect();
        let wb: Vec<f64> = ny.branches.iter().map(|b| b.weight).collect();
        let (plan, v) = ot_exact(&cost, &wa, &wb)?;
        self.memo.insert((x, y), (v, plan));
        Ok(v)
    }

    /// Glues the optimal stage plans into a coupling of the two measures.
    fn coupling(&self, mu: &PathMeasure, nu: &PathMeasure) -> Result<Coupling> {
        let mut pairs = Vec::new();
        let mut stack = vec![(self.a.root(), self.b.root(), 1.0)];
        while let Some((x, y, mass)) = stack.pop() {
            let (nx, ny) = (self.a.node(x), self.b.node(y));
            if nx.is_leaf() {
                pairs.push((nx.atom.expect("exact tree"), ny.atom.expect("exact tree"), mass));
                continue;
            }
            let plan = &self.memo[&(x, y)].1;
            for (i, j, w) in plan.charged() {
                stack.push((nx.branches[i].child, ny.branches[j].child, mass * w));
            }
        }
        Coupling::new(mu.clone(), nu.clone(), pairs)
    }
}

fn trees(mu: &PathMeasure, nu: &PathMeasure) -> Result<(KernelTree, KernelTree)> {
    mu.same_shape(nu)?;
    Ok((disintegrate(mu, 0.0), disintegrate(nu, 0.0)))
}

/// `AW_p` by the nested dynamic program, with an optimal bicausal coupling.
pub fn aw_distance(mu: &PathMeasure, nu: &PathMeasure, p: f64) -> Result<AdaptedDistance> {
    check_exponent(p)?;
    let (ta, tb) = trees(mu, nu)?;
    let mut dp = NestedDp::new(&ta, &tb, |x: &[f64], y: &[f64], below: f64| {
        path_cost(x, y, p) + below
    });
    let v = dp.value(ta.root(), tb.root())?;
    let coupling = dp.coupling(mu, nu)?;
    Ok(AdaptedDistance {
        value: root(v, p),
        p,
        coupling,
        surrogate_p0: p == 0.0,
    })
}

/// Adapted variation: the least probability of `x != y` under a bicausal
/// coupling.
pub fn adapted_variation(mu: &PathMeasure, nu: &PathMeasure) -> Result<f64> {
    let (ta, tb) = trees(mu, nu)?;
    let mut dp = NestedDp::new(&ta, &tb, |x: &[f64], y: &[f64], below: f64| {
        if x != y {
            1.0
        } else {
            below
        }
    });
    dp.value(ta.root(), tb.root())
}

/// Plain `W_p` between the path laws.
pub fn w_distance(mu: &PathMeasure, nu: &PathMeasure, p: f64) -> Result<f64> {
    check_exponent(p)?;
    mu.same_shape(nu)?;
    let cost = CostMatrix::from_fn(mu.len(), nu.len(), |i, j| path_cost(mu.atom(i), nu.atom(j), p));
    let (_, v) = ot_exact(&cost, mu.weights(), nu.weights())?;
    Ok(root(v, p))
}

/// Minimum expected path cost over every composition of vertex plans of the
/// stage problems. Each composition is costed on whole paths, so no
/// stagewise decomposition is assumed; for `p = 0` this is the exact
/// truncated distance.
pub fn aw_bruteforce(mu: &PathMeasure, nu: &PathMeasure, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let (ta, tb) = trees(mu, nu)?;
    let mut memo: HashMap<(NodeId, NodeId), Vec<f64>> = HashMap::new();
    let costs = compositions(&ta, &tb, ta.root(), tb.root(), mu, nu, p, &mut memo)?;
    let best = costs.into_iter().fold(f64::INFINITY, f64::min);
    Ok(root(best, p))
}

/// Conditional expected costs of all compositions below a node pair.
#[allow(clippy::too_many_arguments)]
fn compositions(
    ta: &KernelTree,
    tb: &KernelTree,
    x: NodeId,
    y: NodeId,
    mu: &PathMeasure,
    nu: &PathMeasure,
    p: f64,
    memo: &mut HashMap<(NodeId, NodeId), Vec<f64>>,
) -> Result<Vec<f64>> {
    if let Some(v) = memo.get(&(x, y)) {
        return Ok(v.clone());
    }
    let (nx, ny) = (ta.node(x), tb.node(y));
    if nx.is_leaf() {
        let a = mu.atom(nx.atom.expect("exact tree"));
        let b = nu.atom(ny.atom.expect("exact tree"));
        return Ok(vec![path_cost(a, b, p)]);
    }
    let wa: Vec<f64> = nx.branches.iter().map(|b| b.weight).collect();
    let wb: Vec<f64> = ny.branches.iter().map(|b| b.weight).collect();
    let plans = enumerate_vertex_plans(&wa, &wb, None, BRUTEFORCE_CAP)?;
    let mut out = Vec::new();
    for plan in plans {
        let mut totals = vec![0.0];
        for (i, j, w) in plan.charged() {
            let below = compositions(ta, tb, nx.branches[i].child, ny.branches[j].child, mu, nu, p, memo)?;
            if totals.len().saturating_mul(below.len()) > BRUTEFORCE_CAP {
                return Err(Error::TooLarge(format!("more than {BRUTEFORCE_CAP} stage-plan compositions")));
            }
            totals = totals.iter().flat_map(|t| below.iter().map(move |c| t + w * c)).collect();
        }
        out.extend(totals);
        if out.len() > BRUTEFORCE_CAP {
            return Err(Error::TooLarge(format!("more than {BRUTEFORCE_CAP} stage-plan compositions")));
        }
    }
    memo.insert((x, y), out.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kr::kr_distance;

    fn m(paths: Vec<Vec<f64>>, w: Vec<f64>) -> PathMeasure {
        PathMeasure::scalar(paths, w).unwrap()
    }

    #[test]
    fn identical_measures() {
        let mu = m(vec![vec![0.0, 1.0], vec![1.0, 3.0], vec![1.0, 2.0]], vec![0.5, 0.25, 0.25]);
        let r = aw_distance(&mu, &mu, 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(!r.surrogate_p0);
        assert_eq!(adapted_variation(&mu, &mu).unwrap(), 0.0);
        assert_eq!(w_distance(&mu, &mu, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn crossing_pair() {
        let mu = m(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.5, 0.5]);
        let nu = m(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.5]);
        assert_eq!(aw_distance(&mu, &nu, 1.0).unwrap().value, 1.0);
        assert_eq!(aw_bruteforce(&mu, &nu, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn markov_example_pair() {
        let mu = m(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], vec![0.5, 0.5]);
        let nu = m(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]], vec![0.5, 0.5]);
        // Pairing equal first values costs 1 per atom; the cross pairing costs 2.
        let r = aw_distance(&mu, &nu, 1.0).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(aw_bruteforce(&mu, &nu, 1.0).unwrap(), 1.0);
        assert!(r.coupling.is_bicausal(1e-12));
        assert_eq!(r.coupling.cost(1.0), 1.0);
    }

    #[test]
    fn dirac_and_single_step() {
        let a = PathMeasure::dirac(1, vec![0.0, 0.0]).unwrap();
        let b = PathMeasure::dirac(1, vec![3.0, 4.0]).unwrap();
        assert_eq!(aw_bruteforce(&a, &b, 1.0).unwrap(), 7.0);
        assert_eq!(w_distance(&a, &b, 1.0).unwrap(), 7.0);
        assert_eq!(aw_distance(&a, &b, 2.0).unwrap().value, 5.0);
        let x = m(vec![vec![0.0], vec![2.0], vec![5.0]], vec![0.2, 0.5, 0.3]);
        let y = m(vec![vec![1.0], vec![4.0]], vec![0.6, 0.4]);
        let w = w_distance(&x, &y, 2.0).unwrap();
        assert!((aw_bruteforce(&x, &y, 2.0).unwrap() - w).abs() < 1e-12);
        assert!((aw_distance(&x, &y, 2.0).unwrap().value - w).abs() < 1e-12);
    }

    #[test]
    fn variation_of_disjoint_supports() {
        let a = m(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]);
        let b = m(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.5, 0.5]);
        assert_eq!(adapted_variation(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn variation_exceeds_total_variation() {
        // Same first marginal, the second-step kernels disagree on half the mass.
        let a = m(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.5, 0.5]);
        let b = m(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]], vec![0.5, 0.25, 0.25]);
        let tv = a.total_variation(&b).unwrap();
        let av = adapted_variation(&a, &b).unwrap();
        assert!((tv - 0.25).abs() < 1e-15);
        assert!(av >= tv);
    }

    #[test]
    fn surrogate_flag_for_p0() {
        let a = PathMeasure::dirac(1, vec![0.0, 0.0]).unwrap();
        let b = PathMeasure::dirac(1, vec![0.6, 0.6]).unwrap();
        let r = aw_distance(&a, &b, 0.0).unwrap();
        assert!(r.surrogate_p0);
        assert!((r.value - 1.2).abs() < 1e-15);
        // The whole-path truncation caps at 1.
        assert_eq!(aw_bruteforce(&a, &b, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn chain_on_fixed_pair() {
        let a = m(vec![vec![0.0, 2.0], vec![1.0, -1.0], vec![1.0, 3.0]], vec![0.4, 0.3, 0.3]);
        let b = m(vec![vec![0.5, 0.0], vec![2.0, 1.0]], vec![0.5, 0.5]);
        for p in [1.0, 2.0] {
            let w = w_distance(&a, &b, p).unwrap();
            let aw = aw_distance(&a, &b, p).unwrap().value;
            let kr = kr_distance(&a, &b, p).unwrap();
            assert!(w <= aw + 1e-12 && aw <= kr + 1e-12, "p={p}: {w} {aw} {kr}");
            assert!((aw - aw_bruteforce(&a, &b, p).unwrap()).abs() < 1e-12);
        }
    }
}
