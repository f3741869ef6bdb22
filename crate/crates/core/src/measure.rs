//! Finitely supported probability measures on path space `(R^d)^N`, their
//! successive disintegration into kernel trees, and file formats.
//!
//! A path is stored flattened: step `k` (0-based) occupies coordinates
//! `k*d .. (k+1)*d`. Atoms are kept in lexicographic order with duplicates
//! merged, so two measures are equal iff their atom and weight lists are.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde_json::Value;

use crate::error::{Error, Result};

/// Allowed deviation of the weight sum from one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasure {
    dim: usize,
    steps: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl PathMeasure {
    /// Builds a canonical measure: atoms sorted, duplicates merged and weights
    /// renormalized when their sum is off by more than rounding noise.
    pub fn new(dim: usize, steps: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || steps == 0 {
            return Err(Error::InvalidMeasure("d and N must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("measure has no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != dim * steps {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} has {} coordinates, expected {}",
                    a.len(),
                    dim * steps
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {i} has a non-finite entry")));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::InvalidMeasure(format!("weight {i} must be positive, got {w}")));
            }
        }

        let mut pairs: Vec<(Vec<f64>, f64)> = atoms
            .into_iter()
            .map(|a| a.into_iter().map(|x| if x == 0.0 { 0.0 } else { x }).collect())
            .zip(weights)
            .collect();
        pairs.sort_by(|a, b| lex_cmp(&a.0, &b.0));

        let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == a => last.1 += w,
                _ => merged.push((a, w)),
            }
        }
        let (atoms, mut weights): (Vec<_>, Vec<_>) = merged.into_iter().unzip();

        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights must sum to 1 (sum = {sum})")));
        }
        // Leave already-normalized input untouched so construction is idempotent.
        let noise = 4.0 * weights.len() as f64 * f64::EPSILON;
        if (sum - 1.0).abs() > noise {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(PathMeasure { dim, steps, atoms, weights })
    }

    /// Like [`PathMeasure::new`] but drops entries with zero mass first.
    pub(crate) fn from_masses(dim: usize, steps: usize, entries: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let (atoms, weights): (Vec<_>, Vec<_>) = entries.into_iter().filter(|e| e.1 > 0.0).unzip();
        PathMeasure::new(dim, steps, atoms, weights)
    }

    pub fn dirac(dim: usize, path: Vec<f64>) -> Result<Self> {
        if dim == 0 || !path.len().is_multiple_of(dim) {
            return Err(Error::InvalidMeasure("path length must be a multiple of d".into()));
        }
        let steps = path.len() / dim;
        PathMeasure::new(dim, steps, vec![path], vec![1.0])
    }

    /// Scalar-valued (`d = 1`) measure from paths and weights.
    pub fn scalar(paths: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let steps = paths.first().map_or(0, Vec::len);
        PathMeasure::new(1, steps, paths, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    /// Value of atom `i` at step `k` (0-based).
    pub fn step_value(&self, i: usize, k: usize) -> &[f64] {
        &self.atoms[i][k * self.dim..(k + 1) * self.dim]
    }

    /// Index of the atom equal to `path`, if any.
    pub fn find(&self, path: &[f64]) -> Option<usize> {
        self.atoms.binary_search_by(|a| lex_cmp(a, path)).ok()
    }

    /// Pushforward under the projection onto the first `k` steps (1-based).
    pub fn marginal(&self, k: usize) -> Result<PathMeasure> {
        if k == 0 || k > self.steps {
            return Err(Error::OutOfRange(format!("marginal index {k} not in 1..={}", self.steps)));
        }
        if k == self.steps {
            return Ok(self.clone());
        }
        let entries = self
            .atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| (a[..k * self.dim].to_vec(), w))
            .collect();
        PathMeasure::from_masses(self.dim, k, entries)
    }

    pub fn same_shape(&self, other: &PathMeasure) -> Result<()> {
        if self.dim != other.dim || self.steps != other.steps {
            return Err(Error::DimensionMismatch(format!(
                "(d={}, N={}) vs (d={}, N={})",
                self.dim, self.steps, other.dim, other.steps
            )));
        }
        Ok(())
    }

    /// Total variation distance `sup_A |mu(A) - nu(A)|`, i.e. half the l1
    /// distance of the weight vectors over the union of supports.
    pub fn total_variation(&self, other: &PathMeasure) -> Result<f64> {
        self.same_shape(other)?;
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.len() || j < other.len() {
            let ord = match (self.atoms.get(i), other.atoms.get(j)) {
                (Some(a), Some(b)) => lex_cmp(a, b),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    acc += self.weights[i];
                    i += 1;
                }
                Ordering::Greater => {
                    acc += other.weights[j];
                    j += 1;
                }
                Ordering::Equal => {
                    acc += (self.weights[i] - other.weights[j]).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(0.5 * acc)
    }

    /// Same atoms (bit-exact) with weights equal within `tol`.
    pub fn approx_eq(&self, other: &PathMeasure, tol: f64) -> bool {
        self.dim == other.dim
            && self.steps == other.steps
            && self.atoms == other.atoms
            && self.weights.iter().zip(&other.weights).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Same support and weights up to `tol`, with atom coordinates also compared up to `tol`.
    pub fn approx_eq_atoms(&self, other: &PathMeasure, tol: f64) -> bool {
        self.dim == other.dim
            && self.steps == other.steps
            && self.len() == other.len()
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol))
            && self.weights.iter().zip(&other.weights).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// CSV with header `w,x_1_1,...,x_N_d`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w");
        for k in 1..=self.steps {
            for j in 1..=self.dim {
                let _ = write!(out, ",x_{k}_{j}");
            }
        }
        out.push('\n');
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            out.push_str(&fmt_f64(*w));
            for x in a {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest decimal that parses back to the same double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn serialize_measure(mu: &PathMeasure) -> String {
    let mut out = String::new();
    let _ = write!(out, "{{\"d\": {}, \"N\": {}, \"atoms\": [", mu.dim, mu.steps);
    for (i, a) in mu.atoms.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for k in 0..mu.steps {
            if k > 0 {
                out.push_str(", ");
            }
            out.push('[');
            let step = &a[k * mu.dim..(k + 1) * mu.dim];
            let parts: Vec<String> = step.iter().map(|x| fmt_f64(*x)).collect();
            out.push_str(&parts.join(", "));
            out.push(']');
        }
        out.push(']');
    }
    out.push_str("], \"weights\": [");
    let parts: Vec<String> = mu.weights.iter().map(|w| fmt_f64(*w)).collect();
    out.push_str(&parts.join(", "));
    out.push_str("]}");
    out
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::parse(key, "missing field"))
}

fn positive_int(v: &Value, path: &str) -> Result<usize> {
    match v.as_u64() {
        Some(n) if n > 0 => Ok(n as usize),
        _ => Err(Error::parse(path, "expected a positive integer")),
    }
}

fn array<'a>(v: &'a Value, path: &str, len: Option<usize>) -> Result<&'a Vec<Value>> {
    let arr = v.as_array().ok_or_else(|| Error::parse(path, "expected an array"))?;
    if let Some(n) = len {
        if arr.len() != n {
            return Err(Error::parse(path, format!("expected {n} entries, found {}", arr.len())));
        }
    }
    Ok(arr)
}

fn number(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| Error::parse(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(Error::parse(path, "non-finite number"));
    }
    Ok(x)
}

/// Parses a measure document `{"d", "N", "atoms", "weights"}`.
pub fn parse_measure(doc: &str) -> Result<PathMeasure> {
    let root: Value = serde_json::from_str(doc)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| Error::parse("$", "expected an object"))?;
    let dim = positive_int(field(obj, "d")?, "d")?;
    let steps = positive_int(field(obj, "N")?, "N")?;
    let raw_atoms = array(field(obj, "atoms")?, "atoms", None)?;
    if raw_atoms.is_empty() {
        return Err(Error::parse("atoms", "at least one atom required"));
    }
    let raw_weights = array(field(obj, "weights")?, "weights", Some(raw_atoms.len()))?;

    let mut atoms = Vec::with_capacity(raw_atoms.len());
    for (i, a) in raw_atoms.iter().enumerate() {
        let path = format!("atoms[{i}]");
        let rows = array(a, &path, Some(steps))?;
        let mut flat = Vec::with_capacity(steps * dim);
        for (k, row) in rows.iter().enumerate() {
            let path = format!("atoms[{i}][{k}]");
            for (j, x) in array(row, &path, Some(dim))?.iter().enumerate() {
                flat.push(number(x, &format!("atoms[{i}][{k}][{j}]"))?);
            }
        }
        atoms.push(flat);
    }
    let mut weights = Vec::with_capacity(raw_weights.len());
    for (i, w) in raw_weights.iter().enumerate() {
        let path = format!("weights[{i}]");
        let x = number(w, &path)?;
        if x <= 0.0 {
            return Err(Error::parse(path, "weights must be positive"));
        }
        weights.push(x);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::parse("weights", "weights must sum to 1"));
    }
    PathMeasure::new(dim, steps, atoms, weights).map_err(|e| Error::parse("$", e.to_string()))
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub value: Vec<f64>,
    /// Conditional weight given the parent prefix.
    pub weight: f64,
    pub child: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelNode {
    pub depth: usize,
    /// Absolute mass of the prefix.
    pub mass: f64,
    pub prefix: Vec<f64>,
    pub branches: Vec<Branch>,
    /// Index of the source atom, for leaves of an exact (tolerance 0) tree.
    pub atom: Option<usize>,
}

impl KernelNode {
    pub fn is_leaf(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn kernel(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.branches.iter().map(|b| (b.value.clone(), b.weight)).unzip()
    }
}

/// Successive disintegration of a path measure. Node 0 is the root; leaves
/// sit at depth `N`. Branches are sorted by value (lexicographically).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTree {
    dim: usize,
    steps: usize,
    nodes: Vec<KernelNode>,
}

impl KernelTree {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &KernelNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[KernelNode] {
        &self.nodes
    }

    /// Nodes whose prefix has length `depth`.
    pub fn nodes_at_depth(&self, depth: usize) -> impl Iterator<Item = (NodeId, &KernelNode)> {
        self.nodes.iter().enumerate().filter(move |(_, n)| n.depth == depth)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &KernelNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

/// Groups the atoms of `mu` by common prefixes. With `prefix_tol = 0` values
/// are grouped by exact equality; otherwise consecutive sorted values within
/// `prefix_tol` (max-norm) are merged and represented by their weighted mean.
pub fn disintegrate(mu: &PathMeasure, prefix_tol: f64) -> KernelTree {
    let mut tree = KernelTree {
        dim: mu.dim,
        steps: mu.steps,
        nodes: Vec::new(),
    };
    let members: Vec<usize> = (0..mu.len()).collect();
    build_node(&mut tree, mu, members, 0, Vec::new(), prefix_tol.max(0.0));
    tree
}

fn build_node(
    tree: &mut KernelTree,
    mu: &PathMeasure,
    mut members: Vec<usize>,
    depth: usize,
    prefix: Vec<f64>,
    tol: f64,
) -> NodeId {
    let id = tree.nodes.len();
    let mass: f64 = members.iter().map(|&i| mu.weights[i]).sum();
    let exact_leaf = (tol == 0.0 && members.len() == 1).then(|| members[0]);
    tree.nodes.push(KernelNode {
        depth,
        mass,
        prefix: prefix.clone(),
        branches: Vec::new(),
        atom: if depth == mu.steps { exact_leaf } else { None },
    });
    if depth == mu.steps {
        return id;
    }

    let d = mu.dim;
    let value = |i: usize| &mu.atoms[i][depth * d..(depth + 1) * d];
    if tol > 0.0 {
        members.sort_by(|&a, &b| lex_cmp(&mu.atoms[a][depth * d..], &mu.atoms[b][depth * d..]));
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &members {
        let joins = match groups.last() {
            Some(g) => {
                let prev = value(*g.last().unwrap());
                if tol == 0.0 {
                    prev == value(i)
                } else {
                    prev.iter().zip(value(i)).all(|(a, b)| (a - b).abs() <= tol)
                }
            }
            None => false,
        };
        if joins {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }

    let mut branches = Vec::with_capacity(groups.len());
    for group in groups {
        let rep: Vec<f64> = if tol == 0.0 || group.len() == 1 {
            value(group[0]).to_vec()
        } else {
            let m: f64 = group.iter().map(|&i| mu.weights[i]).sum();
            (0..d)
                .map(|j| group.iter().map(|&i| mu.weights[i] * value(i)[j]).sum::<f64>() / m)
                .collect()
        };
        let mut child_prefix = prefix.clone();
        child_prefix.extend_from_slice(&rep);
        let child = build_node(tree, mu, group, depth + 1, child_prefix, tol);
        branches.push(Branch {
            value: rep,
            weight: tree.nodes[child].mass / mass,
            child,
        });
    }
    tree.nodes[id].branches = branches;
    id
}

/// Recovers the path measure from a kernel tree. Leaf masses are the products
/// of conditional weights along the root-to-leaf path.
pub fn flatten(tree: &KernelTree) -> Result<PathMeasure> {
    let entries = tree.leaves().map(|n| (n.prefix.clone(), n.mass)).collect();
    PathMeasure::from_masses(tree.dim, tree.steps, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_half(a: Vec<f64>, b: Vec<f64>) -> PathMeasure {
        PathMeasure::scalar(vec![a, b], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn dirac_tree_is_single_branch() {
        let mu = PathMeasure::scalar(vec![vec![2.0, -1.0]], vec![1.0]).unwrap();
        let tree = disintegrate(&mu, 0.0);
        assert_eq!(tree.nodes().len(), 3);
        let root = tree.node(tree.root());
        assert_eq!(root.branches.len(), 1);
        assert_eq!(root.branches[0].value, vec![2.0]);
        assert_eq!(root.branches[0].weight, 1.0);
        let mid = tree.node(root.branches[0].child);
        assert_eq!(mid.branches[0].value, vec![-1.0]);
        assert_eq!(mid.branches[0].weight, 1.0);
        assert_eq!(flatten(&tree).unwrap(), mu);
    }

    #[test]
    fn shared_prefix_is_grouped() {
        let mu = half_half(vec![0.0, 0.0], vec![0.0, 1.0]);
        let tree = disintegrate(&mu, 0.0);
        let root = tree.node(0);
        assert_eq!(root.branches.len(), 1);
        assert_eq!(root.branches[0].weight, 1.0);
        let child = tree.node(root.branches[0].child);
        let (vals, ws) = child.kernel();
        assert_eq!(vals, vec![vec![0.0], vec![1.0]]);
        assert_eq!(ws, vec![0.5, 0.5]);
    }

    #[test]
    fn non_markov_example_has_two_branches() {
        let mu = half_half(vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]);
        let tree = disintegrate(&mu, 0.0);
        let root = tree.node(0);
        assert_eq!(root.branches.len(), 2);
        for b in &root.branches {
            assert_eq!(b.weight, 0.5);
            let n1 = tree.node(b.child);
            assert_eq!(n1.branches.len(), 1);
            assert_eq!(n1.branches[0].weight, 1.0);
            let n2 = tree.node(n1.branches[0].child);
            assert_eq!(n2.branches.len(), 1);
            assert_eq!(n2.branches[0].weight, 1.0);
        }
        assert_eq!(flatten(&tree).unwrap(), mu);
    }

    #[test]
    fn marginals() {
        let mu = half_half(vec![0.0, 0.0], vec![0.0, 1.0]);
        assert_eq!(mu.marginal(2).unwrap(), mu);
        let m1 = mu.marginal(1).unwrap();
        assert_eq!(m1, PathMeasure::scalar(vec![vec![0.0]], vec![1.0]).unwrap());
        assert!(matches!(mu.marginal(0), Err(Error::OutOfRange(_))));
        assert!(matches!(mu.marginal(3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn construction_merges_and_sorts() {
        let mu = PathMeasure::scalar(
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 0.0]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        assert_eq!(mu.atoms(), &[vec![0.0, 2.0], vec![1.0, 0.0]]);
        assert_eq!(mu.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(PathMeasure::scalar(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(PathMeasure::scalar(vec![vec![f64::NAN]], vec![1.0]).is_err());
        assert!(PathMeasure::scalar(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(PathMeasure::scalar(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn tolerance_grouping_merges_close_values() {
        let mu = PathMeasure::scalar(
            vec![vec![0.0, 0.0], vec![1e-9, 1.0], vec![1.0, 0.0]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        let exact = disintegrate(&mu, 0.0);
        assert_eq!(exact.node(0).branches.len(), 3);
        let coarse = disintegrate(&mu, 1e-6);
        let root = coarse.node(0);
        assert_eq!(root.branches.len(), 2);
        assert!((root.branches[0].value[0] - 0.5e-9).abs() < 1e-18);
        assert_eq!(root.branches[0].weight, 0.5);
    }

    #[test]
    fn parse_and_serialize() {
        let doc = r#"{"d": 1, "N": 2, "atoms": [[[1.0],[0.5]], [[0.0],[2.0]]], "weights": [0.25, 0.75]}"#;
        let mu = parse_measure(doc).unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atom(0), &[0.0, 2.0]);
        let again = parse_measure(&serialize_measure(&mu)).unwrap();
        assert_eq!(again, mu);
    }

    #[test]
    fn parse_errors_carry_paths() {
        let bad_sum = r#"{"d": 1, "N": 1, "atoms": [[[1.0]], [[0.0]]], "weights": [0.5, 0.4]}"#;
        assert_eq!(
            parse_measure(bad_sum).unwrap_err(),
            Error::parse("weights", "weights must sum to 1")
        );
        let ragged = r#"{"d": 1, "N": 2, "atoms": [[[1.0],[0.0]], [[0.0]]], "weights": [0.5, 0.5]}"#;
        match parse_measure(ragged).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "atoms[1]"),
            e => panic!("unexpected {e:?}"),
        }
        let negative = r#"{"d": 1, "N": 1, "atoms": [[[1.0]], [[0.0]]], "weights": [1.5, -0.5]}"#;
        match parse_measure(negative).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "weights[1]"),
            e => panic!("unexpected {e:?}"),
        }
        let wide = r#"{"d": 2, "N": 1, "atoms": [[[1.0, 2.0, 3.0]]], "weights": [1.0]}"#;
        match parse_measure(wide).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "atoms[0][0]"),
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(parse_measure("{not json"), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_header() {
        let mu = PathMeasure::new(2, 2, vec![vec![0.0, 1.0, 2.0, 3.0]], vec![1.0]).unwrap();
        let csv = mu.to_csv();
        assert!(csv.starts_with("w,x_1_1,x_1_2,x_2_1,x_2_2\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn total_variation_is_half_l1() {
        let a = PathMeasure::scalar(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let b = PathMeasure::scalar(vec![vec![0.0], vec![2.0]], vec![0.75, 0.25]).unwrap();
        assert!((a.total_variation(&b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(a.total_variation(&a).unwrap(), 0.0);
    }
}
