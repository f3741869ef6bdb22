//! Knothe–Rosenblatt coupling and distance for scalar path measures, the
//! induced barycenters and geodesics, and process-property checks.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measure::{disintegrate, fmt_f64, PathMeasure};
use crate::quantile::{check_exponent, convex_combine, overlay, pushforward, quantile_process, MapNode};

/// Marginal tolerance for couplings.
pub const COUPLING_TOL: f64 = 1e-10;

/// `|x - y|_p^p` summed over coordinates for `p >= 1`, and
/// `min(|x - y|_1, 1)` for `p = 0`.
pub fn path_cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    if p == 0.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>().min(1.0)
    } else if p == 1.0 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
    } else if p == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    } else {
        x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(p)).sum()
    }
}

/// `value^(1/p)`, or `value` itself for `p = 0`.
pub(crate) fn root(value: f64, p: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        value
    } else {
        value.max(0.0).powf(1.0 / p)
    }
}

pub(crate) fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    left: PathMeasure,
    right: PathMeasure,
    pairs: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// Validates indices and marginals; repeated index pairs are merged.
    pub fn new(left: PathMeasure, right: PathMeasure, pairs: Vec<(usize, usize, f64)>) -> Result<Self> {
        left.same_shape(&right)?;
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for (i, j, w) in pairs {
            if i >= left.len() || j >= right.len() {
                return Err(Error::OutOfRange(format!("pair ({i}, {j}) out of range")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("coupling weight {w}")));
            }
            if w > 0.0 {
                *merged.entry((i, j)).or_default() += w;
            }
        }
        let mut pairs: Vec<(usize, usize, f64)> = merged.into_iter().map(|((i, j), w)| (i, j, w)).collect();
        pairs.sort_by_key(|a| (a.0, a.1));
        let c = Coupling { left, right, pairs };
        let (rows, cols) = c.marginal_sums();
        let ok = |sums: &[f64], w: &[f64]| sums.iter().zip(w).all(|(s, w)| (s - w).abs() <= COUPLING_TOL);
        if !ok(&rows, c.left.weights()) || !ok(&cols, c.right.weights()) {
            return Err(Error::InvalidMeasure("coupling marginals do not match".into()));
        }
        Ok(c)
    }

    pub fn left(&self) -> &PathMeasure {
        &self.left
    }

    pub fn right(&self) -> &PathMeasure {
        &self.right
    }

    /// `(left index, right index, weight)`, sorted by indices.
    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn marginal_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rows = vec![0.0; self.left.len()];
        let mut cols = vec![0.0; self.right.len()];
        for &(i, j, w) in &self.pairs {
            rows[i] += w;
            cols[j] += w;
        }
        (rows, cols)
    }

    /// Expected [`path_cost`] under the coupling.
    pub fn cost(&self, p: f64) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, w)| w * path_cost(self.left.atom(i), self.right.atom(j), p))
            .sum()
    }

    /// Expected cost with the coordinatewise truncation `sum_k min(|x_k - y_k|_1, 1)`.
    pub fn separable_truncated_cost(&self) -> f64 {
        let d = self.left.dim();
        self.pairs
            .iter()
            .map(|&(i, j, w)| {
                let (x, y) = (self.left.atom(i), self.right.atom(j));
                w * x.chunks(d).zip(y.chunks(d)).map(|(a, b)| path_cost(a, b, 0.0)).sum::<f64>()
            })
            .sum()
    }

    /// Checks that, given every pair of prefixes, the next values are coupled
    /// with the conditional laws of the two marginals (up to `tol` in total
    /// variation).
    pub fn is_bicausal(&self, tol: f64) -> bool {
        let d = self.left.dim();
        for k in 0..self.left.steps() {
            let (lo, hi) = (k * d, (k + 1) * d);
            let left_cond = conditional_laws(&self.left, k);
            let right_cond = conditional_laws(&self.right, k);
            let mut groups: HashMap<(Vec<u64>, Vec<u64>), (f64, HashMap<Vec<u64>, f64>, HashMap<Vec<u64>, f64>)> =
                HashMap::new();
            for &(i, j, w) in &self.pairs {
                let (x, y) = (self.left.atom(i), self.right.atom(j));
                let g = groups.entry((bits(&x[..lo]), bits(&y[..lo]))).or_default();
                g.0 += w;
                *g.1.entry(bits(&x[lo..hi])).or_default() += w;
                *g.2.entry(bits(&y[lo..hi])).or_default() += w;
            }
            for ((px, py), (m, nx, ny)) in groups {
                if !law_close(&nx, m, &left_cond[&px], tol) || !law_close(&ny, m, &right_cond[&py], tol) {
                    return false;
                }
            }
        }
        true
    }

    /// For scalar paths: given each prefix pair, no two charged next-value
    /// pairs cross (`x < x'` with `y > y'`).
    pub fn is_stagewise_comonotone(&self) -> bool {
        let steps = self.left.steps();
        for k in 0..steps {
            let mut groups: HashMap<(Vec<u64>, Vec<u64>), Vec<(f64, f64)>> = HashMap::new();
            for &(i, j, _) in &self.pairs {
                let (x, y) = (self.left.atom(i), self.right.atom(j));
                groups.entry((bits(&x[..k]), bits(&y[..k]))).or_default().push((x[k], y[k]));
            }
            for pts in groups.values() {
                for a in pts {
                    if pts.iter().any(|b| a.0 < b.0 && a.1 > b.1) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// CSV with header `w,x_1..x_N,y_1..y_N` (`x_k_j` columns when `d > 1`).
    pub fn to_csv(&self) -> String {
        let (d, n) = (self.left.dim(), self.left.steps());
        let mut out = String::from("w");
        for side in ["x", "y"] {
            for k in 1..=n {
                if d == 1 {
                    let _ = write!(out, ",{side}_{k}");
                } else {
                    for j in 1..=d {
                        let _ = write!(out, ",{side}_{k}_{j}");
                    }
                }
            }
        }
        out.push('\n');
        for &(i, j, w) in &self.pairs {
            out.push_str(&fmt_f64(w));
            for v in self.left.atom(i).iter().chain(self.right.atom(j)) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Prefix (steps `< k`) to conditional mass of the step-`k` value, with the
/// prefix mass; masses are absolute.
fn conditional_laws(mu: &PathMeasure, k: usize) -> HashMap<Vec<u64>, (f64, HashMap<Vec<u64>, f64>)> {
    let d = mu.dim();
    let mut out: HashMap<Vec<u64>, (f64, HashMap<Vec<u64>, f64>)> = HashMap::new();
    for (a, &w) in mu.atoms().iter().zip(mu.weights()) {
        let e = out.entry(bits(&a[..k * d])).or_default();
        e.0 += w;
        *e.1.entry(bits(&a[k * d..(k + 1) * d])).or_default() += w;
    }
    out
}

fn law_close(law: &HashMap<Vec<u64>, f64>, mass: f64, reference: &(f64, HashMap<Vec<u64>, f64>), tol: f64) -> bool {
    let mut tv = 0.0;
    for (v, &w) in &reference.1 {
        tv += (law.get(v).copied().unwrap_or(0.0) / mass - w / reference.0).abs();
    }
    for (v, &w) in law {
        if !reference.1.contains_key(v) {
            tv += w / mass;
        }
    }
    0.5 * tv <= tol
}

fn require_scalar(mu: &PathMeasure, nu: &PathMeasure) -> Result<()> {
    mu.same_shape(nu)?;
    if mu.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "scalar paths required, got d = {}; use the multi-dimensional distance",
            mu.dim()
        )));
    }
    Ok(())
}

/// The Knothe–Rosenblatt coupling: joint law of the two quantile processes
/// under `lambda^N`, built by overlaying their interval trees level by level.
pub fn kr_coupling(mu: &PathMeasure, nu: &PathMeasure) -> Result<Coupling> {
    require_scalar(mu, nu)?;
    let (qm, qn) = (quantile_process(mu)?, quantile_process(nu)?);
    let mut cells = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    collect_pairs(qm.root(), qn.root(), 1.0, (true, true), &mut xs, &mut ys, &mut cells);
    let pairs = cells
        .into_iter()
        .map(|(x, y, w)| {
            let i = mu.find(&x).expect("quantile value paths are atoms");
            let j = nu.find(&y).expect("quantile value paths are atoms");
            (i, j, w)
        })
        .collect();
    Coupling::new(mu.clone(), nu.clone(), pairs)
}

fn collect_pairs(
    a: &MapNode,
    b: &MapNode,
    parent_mass: f64,
    whole: (bool, bool),
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
    out: &mut Vec<(Vec<f64>, Vec<f64>, f64)>,
) {
    for pc in overlay(&a.segments, &b.segments, parent_mass, whole) {
        let (sa, sb) = (&a.segments[pc.ia], &b.segments[pc.ib]);
        xs.push(sa.offset);
        ys.push(sb.offset);
        match (&sa.child, &sb.child) {
            (Some(x), Some(y)) => collect_pairs(x, y, pc.mass, pc.whole, xs, ys, out),
            _ => out.push((xs.clone(), ys.clone(), pc.mass)),
        }
        xs.pop();
        ys.pop();
    }
}

/// `KR_p(mu, nu)`; for `p = 0` the expected truncated cost `min(|x - y|_1, 1)`.
pub fn kr_distance(mu: &PathMeasure, nu: &PathMeasure, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(root(kr_coupling(mu, nu)?.cost(p), p))
}

fn check_p_at_least_one(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("p must be in [1, inf), got {p}")))
    }
}

/// Law of the convex combination of the quantile processes.
pub fn barycenter(measures: &[PathMeasure], coeffs: &[f64], p: f64) -> Result<PathMeasure> {
    check_p_at_least_one(p)?;
    let first = measures
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no measures given".into()))?;
    for m in measures {
        require_scalar(first, m)?;
    }
    let qs = measures.iter().map(quantile_process).collect::<Result<Vec<_>>>()?;
    let maps: Vec<_> = qs.iter().map(|q| q.as_map()).collect();
    pushforward(&convex_combine(&maps, coeffs)?)
}

/// McCann interpolation `((1-t) x + t y)_# kr(mu0, mu1)`.
pub fn geodesic_point(mu0: &PathMeasure, mu1: &PathMeasure, t: f64, p: f64) -> Result<PathMeasure> {
    check_p_at_least_one(p)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("t must lie in [0, 1], got {t}")));
    }
    let c = kr_coupling(mu0, mu1)?;
    let entries = c
        .pairs()
        .iter()
        .map(|&(i, j, w)| {
            let path = mu0.atom(i).iter().zip(mu1.atom(j)).map(|(x, y)| (1.0 - t) * x + t * y).collect();
            (path, w)
        })
        .collect();
    PathMeasure::from_masses(1, mu0.steps(), entries)
}

fn kernel_tv(a: &[(Vec<f64>, f64)], b: &[(Vec<f64>, f64)]) -> f64 {
    let mut law: HashMap<Vec<u64>, f64> = HashMap::new();
    for (v, w) in a {
        *law.entry(bits(v)).or_default() += w;
    }
    for (v, w) in b {
        *law.entry(bits(v)).or_default() -= w;
    }
    0.5 * law.values().map(|x| x.abs()).sum::<f64>()
}

/// Whether the law of `X_{k+1}` given `X_{1:k}` depends on `X_k` only, up to
/// `tol` in total variation.
pub fn is_markov(mu: &PathMeasure, tol: f64) -> bool {
    let tree = disintegrate(mu, 0.0);
    let d = mu.dim();
    for depth in 2..mu.steps() {
        // Group nodes by their current value; compare each kernel against the
        // mixture kernel of its group.
        let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        for (id, node) in tree.nodes_at_depth(depth) {
            groups.entry(bits(&node.prefix[(depth - 1) * d..])).or_default().push(id);
        }
        for ids in groups.values() {
            let total: f64 = ids.iter().map(|&id| tree.node(id).mass).sum();
            let mut mixture: Vec<(Vec<f64>, f64)> = Vec::new();
            for &id in ids {
                let node = tree.node(id);
                for b in &node.branches {
                    mixture.push((b.value.clone(), b.weight * node.mass / total));
                }
            }
            for &id in ids {
                let kernel: Vec<(Vec<f64>, f64)> =
                    tree.node(id).branches.iter().map(|b| (b.value.clone(), b.weight)).collect();
                if kernel_tv(&kernel, &mixture) > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// `|E[X_{k+1} | X_{1:k}] - X_k| <= tol` at every node, componentwise.
pub fn is_martingale(mu: &PathMeasure, tol: f64) -> bool {
    let tree = disintegrate(mu, 0.0);
    let d = mu.dim();
    tree.nodes().iter().filter(|n| n.depth >= 1 && !n.is_leaf()).all(|n| {
        let current = &n.prefix[(n.depth - 1) * d..];
        (0..d).all(|j| {
            let mean: f64 = n.branches.iter().map(|b| b.weight * b.value[j]).sum();
            (mean - current[j]).abs() <= tol
        })
    })
}
