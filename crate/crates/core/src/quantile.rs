//! Quantile functions, quantile processes and piecewise-affine triangular maps
//! on `(0,1)^N` for scalar (`d = 1`) paths.
//!
//! A [`TriangularMap`] is an interval tree: each node partitions `(0,1)` into
//! half-open segments `[lo, hi)` carrying an affine value `offset + slope * u`
//! of the current coordinate `u` and, below the last step, a child node for the
//! remaining coordinates. Every segment also records the absolute
//! `lambda^k`-mass of its cell, which keeps pushforwards exact.

use std::sync::LazyLock;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measure::{disintegrate, KernelTree, NodeId, PathMeasure};

const STRUCT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction1D {
    /// Right endpoints of the segments; increasing, last equals 1.
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileFunction1D {
    pub fn eval(&self, u: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= u);
        self.values[i.min(self.values.len() - 1)]
    }
}

pub fn quantile_1d(rho: &PathMeasure) -> Result<QuantileFunction1D> {
    if rho.dim() != 1 || rho.steps() != 1 {
        return Err(Error::DimensionMismatch("quantile_1d needs a one-step scalar measure".into()));
    }
    let mut acc = 0.0;
    let mut breakpoints: Vec<f64> = rho
        .weights()
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    *breakpoints.last_mut().unwrap() = 1.0;
    let values = rho.atoms().iter().map(|a| a[0]).collect();
    Ok(QuantileFunction1D { breakpoints, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub offset: f64,
    pub slope: f64,
    /// Absolute mass of the cell reached through this segment.
    pub mass: f64,
    pub child: Option<Box<MapNode>>,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn value_at(&self, u: f64) -> f64 {
        self.offset + self.slope * u
    }

    pub fn is_constant(&self) -> bool {
        self.slope == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapNode {
    pub segments: Vec<Segment>,
}

impl MapNode {
    fn structurally_eq(&self, other: &MapNode, tol: f64) -> bool {
        self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                (a.lo - b.lo).abs() <= tol
                    && (a.hi - b.hi).abs() <= tol
                    && (a.offset - b.offset).abs() <= tol
                    && (a.slope - b.slope).abs() <= tol
                    && match (&a.child, &b.child) {
                        (Some(x), Some(y)) => x.structurally_eq(y, tol),
                        (None, None) => true,
                        _ => false,
                    }
            })
    }
}

/// Piecewise-affine triangular map on `(0,1)^N` with scalar outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularMap {
    steps: usize,
    root: MapNode,
}

/// Quantile process of a scalar path measure: piecewise constant, (inc), (con).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileProcess(TriangularMap);

impl QuantileProcess {
    pub fn as_map(&self) -> &TriangularMap {
        &self.0
    }

    pub fn into_map(self) -> TriangularMap {
        self.0
    }
}

impl std::ops::Deref for QuantileProcess {
    type Target = TriangularMap;

    fn deref(&self) -> &TriangularMap {
        &self.0
    }
}

/// Quantile process of `mu` built from its kernel tree.
pub fn quantile_process(mu: &PathMeasure) -> Result<QuantileProcess> {
    if mu.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "quantile processes are scalar, got d = {}",
            mu.dim()
        )));
    }
    let tree = disintegrate(mu, 0.0);
    let root = node_from_kernel(&tree, tree.root());
    Ok(QuantileProcess(TriangularMap {
        steps: mu.steps(),
        root,
    }))
}

fn node_from_kernel(tree: &KernelTree, id: NodeId) -> MapNode {
    let node = tree.node(id);
    let mut lo = 0.0;
    let mut acc = 0.0;
    let last = node.branches.len() - 1;
    let segments = node
        .branches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            acc += b.weight;
            let hi = if i == last { 1.0 } else { acc };
            let child = tree.node(b.child);
            let seg = Segment {
                lo,
                hi,
                offset: b.value[0],
                slope: 0.0,
                mass: child.mass,
                child: (!child.is_leaf()).then(|| Box::new(node_from_kernel(tree, b.child))),
            };
            lo = hi;
            seg
        })
        .collect();
    MapNode { segments }
}

/// Pushes `lambda^N` forward through a piecewise-constant map.
pub fn pushforward(map: &TriangularMap) -> Result<PathMeasure> {
    fn walk(node: &MapNode, path: &mut Vec<f64>, out: &mut Vec<(Vec<f64>, f64)>) -> Result<()> {
        for s in &node.segments {
            if !s.is_constant() {
                return Err(Error::NotPiecewiseConstant);
            }
            path.push(s.offset);
            match &s.child {
                Some(c) => walk(c, path, out)?,
                None => out.push((path.clone(), s.mass)),
            }
            path.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(&map.root, &mut Vec::new(), &mut out)?;
    PathMeasure::from_masses(1, map.steps, out)
}

/// One overlay cell of two segment lists.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub ia: usize,
    pub ib: usize,
    pub mass: f64,
    /// Whether the cell is a whole cell of the first (second) map.
    pub whole: (bool, bool),
}

/// Common refinement of two partitions of `(0,1)`; zero-length cells are
/// dropped. `whole` tells whether the parent cell is an unsplit cell of each
/// map; then a coinciding segment's stored mass is reused, otherwise the
/// mass is `parent_mass * length`.
pub(crate) fn overlay(a: &[Segment], b: &[Segment], parent_mass: f64, whole: (bool, bool)) -> Vec<Piece> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0;
    while i < a.len() && j < b.len() {
        let hi = a[i].hi.min(b[j].hi);
        if hi > lo {
            let wa = whole.0 && a[i].lo == lo && a[i].hi == hi;
            let wb = whole.1 && b[j].lo == lo && b[j].hi == hi;
            let mass = if wa {
                a[i].mass
            } else if wb {
                b[j].mass
            } else {
                parent_mass * (hi - lo)
            };
            out.push(Piece {
                lo,
                hi,
                ia: i,
                ib: j,
                mass,
                whole: (wa, wb),
            });
            lo = hi;
        }
        let (ai, bj) = (a[i].hi, b[j].hi);
        if ai <= hi {
            i += 1;
        }
        if bj <= hi {
            j += 1;
        }
    }
    out
}

impl TriangularMap {
    /// Map with the given root node, checked for shape.
    pub fn from_root(steps: usize, root: MapNode) -> Result<Self> {
        fn check(node: &MapNode, depth: usize, steps: usize) -> Result<()> {
            if node.segments.is_empty() {
                return Err(Error::InvalidMeasure("map node without segments".into()));
            }
            let mut lo = 0.0;
            for s in &node.segments {
                if s.lo != lo || !(s.hi > s.lo) {
                    return Err(Error::InvalidMeasure("breakpoints must be strictly increasing from 0".into()));
                }
                if !(s.offset.is_finite() && s.slope.is_finite()) {
                    return Err(Error::InvalidMeasure("segment values must be finite".into()));
                }
                match (&s.child, depth + 1 == steps) {
                    (None, true) => {}
                    (Some(c), false) => check(c, depth + 1, steps)?,
                    _ => return Err(Error::InvalidMeasure("map depth does not match N".into())),
                }
                lo = s.hi;
            }
            if lo != 1.0 {
                return Err(Error::InvalidMeasure("last breakpoint must be 1".into()));
            }
            Ok(())
        }
        if steps == 0 {
            return Err(Error::InvalidMeasure("N must be positive".into()));
        }
        check(&root, 0, steps)?;
        Ok(TriangularMap { steps, root })
    }

    /// `u -> u`, coordinatewise.
    pub fn identity(steps: usize) -> Self {
        Self::affine_chain(&vec![(0.0, 1.0); steps])
    }

    /// Constant map onto `path`.
    pub fn constant(path: &[f64]) -> Self {
        let chain: Vec<(f64, f64)> = path.iter().map(|&x| (x, 0.0)).collect();
        Self::affine_chain(&chain)
    }

    fn affine_chain(chain: &[(f64, f64)]) -> Self {
        let mut node: Option<Box<MapNode>> = None;
        for &(offset, slope) in chain.iter().rev() {
            node = Some(Box::new(MapNode {
                segments: vec![Segment {
                    lo: 0.0,
                    hi: 1.0,
                    offset,
                    slope,
                    mass: 1.0,
                    child: node,
                }],
            }));
        }
        TriangularMap {
            steps: chain.len(),
            root: *node.expect("at least one step"),
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn root(&self) -> &MapNode {
        &self.root
    }

    /// Evaluates the map at `u` in `(0,1)^N`.
    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps);
        let mut node = &self.root;
        for &uk in u.iter().take(self.steps) {
            let i = node.segments.partition_point(|s| s.hi <= uk).min(node.segments.len() - 1);
            let s = &node.segments[i];
            out.push(s.value_at(uk));
            match &s.child {
                Some(c) => node = c,
                None => break,
            }
        }
        out
    }

    pub fn is_piecewise_constant(&self) -> bool {
        fn rec(n: &MapNode) -> bool {
            n.segments.iter().all(|s| s.is_constant() && s.child.as_deref().is_none_or(rec))
        }
        rec(&self.root)
    }

    /// Condition (inc): each output coordinate is nondecreasing in its own
    /// variable.
    pub fn is_triangular_increasing(&self) -> bool {
        fn rec(n: &MapNode) -> bool {
            n.segments.iter().all(|s| s.slope >= 0.0)
                && n.segments.windows(2).all(|w| w[0].value_at(w[0].hi) <= w[1].value_at(w[1].lo))
                && n.segments.iter().all(|s| s.child.as_deref().is_none_or(rec))
        }
        rec(&self.root)
    }

    /// Strict monotonicity (sinc): positive slope on every segment and no
    /// downward jump at breakpoints.
    pub fn is_strictly_increasing(&self) -> bool {
        fn rec(n: &MapNode) -> bool {
            n.segments.iter().all(|s| s.slope > 0.0)
                && n.segments.windows(2).all(|w| w[0].value_at(w[0].hi) <= w[1].value_at(w[1].lo))
                && n.segments.iter().all(|s| s.child.as_deref().is_none_or(rec))
        }
        rec(&self.root)
    }

    /// Condition (con): constant segments sharing a value continue
    /// identically.
    pub fn is_consistent(&self) -> bool {
        fn rec(n: &MapNode) -> bool {
            for (i, a) in n.segments.iter().enumerate() {
                for b in &n.segments[i + 1..] {
                    if a.is_constant() && b.is_constant() && a.offset == b.offset {
                        let same = match (&a.child, &b.child) {
                            (Some(x), Some(y)) => canonical(x).structurally_eq(&canonical(y), STRUCT_TOL),
                            _ => true,
                        };
                        if !same {
                            return false;
                        }
                    }
                }
            }
            n.segments.iter().all(|s| s.child.as_deref().is_none_or(rec))
        }
        rec(&self.root)
    }

    /// Adds `eps * u_k` to the `k`-th output.
    pub fn perturb(&self, eps: f64) -> Result<TriangularMap> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::OutOfRange(format!("perturbation must be nonnegative, got {eps}")));
        }
        fn rec(n: &MapNode, eps: f64) -> MapNode {
            MapNode {
                segments: n
                    .segments
                    .iter()
                    .map(|s| Segment {
                        slope: s.slope + eps,
                        child: s.child.as_deref().map(|c| Box::new(rec(c, eps))),
                        ..s.clone_shallow()
                    })
                    .collect(),
            }
        }
        Ok(TriangularMap {
            steps: self.steps,
            root: rec(&self.root, eps),
        })
    }

    /// Merges adjacent segments with equal affine values and equal
    /// continuations.
    pub fn canonicalize(&self) -> TriangularMap {
        TriangularMap {
            steps: self.steps,
            root: canonical(&self.root),
        }
    }

    pub fn to_json(&self) -> Value {
        fn rec(n: &MapNode) -> Value {
            let children: Vec<Value> = n.segments.iter().filter_map(|s| s.child.as_deref().map(rec)).collect();
            json!({
                "breaks": n.segments.iter().map(|s| s.hi).collect::<Vec<_>>(),
                "values": n.segments.iter().map(|s| vec![s.offset, s.slope]).collect::<Vec<_>>(),
                "masses": n.segments.iter().map(|s| s.mass).collect::<Vec<_>>(),
                "children": children,
            })
        }
        rec(&self.root)
    }

    /// Parses the nested `{breaks, values, children}` format. Cell masses are
    /// read from an optional `masses` array and default to products of
    /// segment lengths.
    pub fn from_json(doc: &Value) -> Result<TriangularMap> {
        fn rec(v: &Value, path: &str, parent_mass: f64) -> Result<(MapNode, usize)> {
            let obj = v.as_object().ok_or_else(|| Error::parse(path, "expected an object"))?;
            let arr = |key: &str| -> Result<&Vec<Value>> {
                obj.get(key)
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::parse(format!("{path}.{key}"), "expected an array"))
            };
            let num = |v: &Value, p: String| v.as_f64().ok_or_else(|| Error::parse(p, "expected a number"));
            let breaks = arr("breaks")?;
            let values = arr("values")?;
            let children = arr("children")?;
            let masses = obj.get("masses").and_then(Value::as_array);
            if values.len() != breaks.len() || !(children.is_empty() || children.len() == breaks.len()) {
                return Err(Error::parse(path, "breaks, values and children lengths differ"));
            }
            let mut segments = Vec::with_capacity(breaks.len());
            let mut lo = 0.0;
            let mut depth = 0;
            for (i, b) in breaks.iter().enumerate() {
                let hi = num(b, format!("{path}.breaks[{i}]"))?;
                let pair = values[i]
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::parse(format!("{path}.values[{i}]"), "expected [offset, slope]"))?;
                let offset = num(&pair[0], format!("{path}.values[{i}][0]"))?;
                let slope = num(&pair[1], format!("{path}.values[{i}][1]"))?;
                let mass = match masses.and_then(|m| m.get(i)) {
                    Some(m) => num(m, format!("{path}.masses[{i}]"))?,
                    None => parent_mass * (hi - lo),
                };
                let child = match children.get(i) {
                    Some(c) => {
                        let (node, d) = rec(c, &format!("{path}.children[{i}]"), mass)?;
                        depth = depth.max(d);
                        Some(Box::new(node))
                    }
                    None => None,
                };
                segments.push(Segment { lo, hi, offset, slope, mass, child });
                lo = hi;
            }
            Ok((MapNode { segments }, depth + 1))
        }
        let (root, steps) = rec(doc, "$", 1.0)?;
        TriangularMap::from_root(steps, root)
    }
}

impl Segment {
    fn clone_shallow(&self) -> Segment {
        Segment {
            lo: self.lo,
            hi: self.hi,
            offset: self.offset,
            slope: self.slope,
            mass: self.mass,
            child: None,
        }
    }
}

fn canonical(node: &MapNode) -> MapNode {
    let mut out: Vec<Segment> = Vec::with_capacity(node.segments.len());
    for s in &node.segments {
        let mut s = Segment {
            child: s.child.as_deref().map(|c| Box::new(canonical(c))),
            ..s.clone_shallow()
        };
        if let Some(last) = out.last_mut() {
            let same_children = match (&last.child, &s.child) {
                (Some(x), Some(y)) => x.structurally_eq(y, 0.0),
                (None, None) => true,
                _ => false,
            };
            if last.offset == s.offset && last.slope == s.slope && same_children {
                last.hi = s.hi;
                last.mass += s.mass;
                if let (Some(x), Some(y)) = (last.child.as_deref_mut(), s.child.take()) {
                    add_masses(x, &y);
                }
                continue;
            }
        }
        out.push(s);
    }
    MapNode { segments: out }
}

fn add_masses(into: &mut MapNode, from: &MapNode) {
    for (a, b) in into.segments.iter_mut().zip(&from.segments) {
        a.mass += b.mass;
        if let (Some(x), Some(y)) = (a.child.as_deref_mut(), b.child.as_deref()) {
            add_masses(x, y);
        }
    }
}

fn check_steps(a: &TriangularMap, b: &TriangularMap) -> Result<()> {
    if a.steps != b.steps {
        return Err(Error::DimensionMismatch(format!("maps with N = {} and N = {}", a.steps, b.steps)));
    }
    Ok(())
}

/// `wa * a + wb * b` on the common refinement.
fn combine_nodes(a: &MapNode, wa: f64, b: &MapNode, wb: f64, parent_mass: f64, whole: (bool, bool)) -> MapNode {
    let segments = overlay(&a.segments, &b.segments, parent_mass, whole)
        .into_iter()
        .map(|p| {
            let (sa, sb) = (&a.segments[p.ia], &b.segments[p.ib]);
            let child = match (&sa.child, &sb.child) {
                (Some(x), Some(y)) => Some(Box::new(combine_nodes(x, wa, y, wb, p.mass, p.whole))),
                _ => None,
            };
            Segment {
                lo: p.lo,
                hi: p.hi,
                offset: wa * sa.offset + wb * sb.offset,
                slope: wa * sa.slope + wb * sb.slope,
                mass: p.mass,
                child,
            }
        })
        .collect();
    MapNode { segments }
}

/// Pointwise convex combination `sum_i coeffs[i] * maps[i]`.
pub fn convex_combine(maps: &[&TriangularMap], coeffs: &[f64]) -> Result<TriangularMap> {
    if maps.is_empty() || maps.len() != coeffs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} maps but {} coefficients",
            maps.len(),
            coeffs.len()
        )));
    }
    if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::OutOfRange("coefficients must be nonnegative".into()));
    }
    let total: f64 = coeffs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::OutOfRange(format!("coefficients must sum to 1, got {total}")));
    }
    for m in &maps[1..] {
        check_steps(maps[0], m)?;
    }
    let mut acc = combine_nodes(&maps[0].root, coeffs[0], &maps[0].root, 0.0, 1.0, (true, true));
    for (m, &c) in maps.iter().zip(coeffs).skip(1) {
        acc = combine_nodes(&acc, 1.0, &m.root, c, 1.0, (true, true));
    }
    Ok(TriangularMap {
        steps: maps[0].steps,
        root: canonical(&acc),
    })
}

static GAUSS_LEGENDRE_32: LazyLock<Vec<(f64, f64)>> = LazyLock::new(|| gauss_legendre(32));

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn gl_integrate(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    h * GAUSS_LEGENDRE_32.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>()
}

/// `int_lo^hi |alpha + beta u|^p du` for `p >= 1`.
fn abs_affine_power_integral(alpha: f64, beta: f64, lo: f64, hi: f64, p: f64) -> f64 {
    let len = hi - lo;
    if beta == 0.0 {
        return len * alpha.abs().powf(p);
    }
    let root = -alpha / beta;
    if root > lo && root < hi {
        return abs_affine_power_integral(alpha, beta, lo, root, p) + abs_affine_power_integral(alpha, beta, root, hi, p);
    }
    let (va, vb) = (alpha + beta * lo, alpha + beta * hi);
    let mid = 0.5 * (va + vb).abs();
    if (beta * len).abs() < 1e-3 * mid {
        // Nearly constant integrand: the antiderivative would cancel badly.
        return gl_integrate(lo, hi, |u| (alpha + beta * u).abs().powf(p));
    }
    // |v|^p has antiderivative sign(v)|v|^{p+1}/(p+1) in v; v is monotone here.
    let g = |v: f64| v.signum() * v.abs().powf(p + 1.0) / (p + 1.0);
    ((g(vb) - g(va)) / beta).abs()
}

fn power_distance(a: &MapNode, b: &MapNode, p: f64) -> f64 {
    overlay(&a.segments, &b.segments, 1.0, (false, false))
        .into_iter()
        .map(|pc| {
            let (sa, sb) = (&a.segments[pc.ia], &b.segments[pc.ib]);
            let here = abs_affine_power_integral(sa.offset - sb.offset, sa.slope - sb.slope, pc.lo, pc.hi, p);
            let below = match (&sa.child, &sb.child) {
                (Some(x), Some(y)) => (pc.hi - pc.lo) * power_distance(x, y, p),
                _ => 0.0,
            };
            here + below
        })
        .sum()
}

/// `int min(acc + sum_{j >= k} |a_j - b_j|, 1)` over the remaining coordinates.
fn truncated_distance(a: &MapNode, b: &MapNode, acc: f64) -> f64 {
    if acc >= 1.0 {
        return 1.0;
    }
    overlay(&a.segments, &b.segments, 1.0, (false, false))
        .into_iter()
        .map(|pc| {
            let (sa, sb) = (&a.segments[pc.ia], &b.segments[pc.ib]);
            let (alpha, beta) = (sa.offset - sb.offset, sa.slope - sb.slope);
            let inner = |u: f64| {
                let acc = acc + (alpha + beta * u).abs();
                match (&sa.child, &sb.child) {
                    (Some(x), Some(y)) => truncated_distance(x, y, acc),
                    _ => acc.min(1.0),
                }
            };
            if beta == 0.0 {
                (pc.hi - pc.lo) * inner(pc.lo)
            } else {
                let root = -alpha / beta;
                if root > pc.lo && root < pc.hi {
                    gl_integrate(pc.lo, root, inner) + gl_integrate(root, pc.hi, inner)
                } else {
                    gl_integrate(pc.lo, pc.hi, inner)
                }
            }
        })
        .sum()
}

/// `L_p(lambda^N)` distance between two maps; for `p = 0` the integral of
/// `min(|T - S|_1, 1)`.
pub fn map_distance(t: &TriangularMap, s: &TriangularMap, p: f64) -> Result<f64> {
    check_steps(t, s)?;
    check_exponent(p)?;
    if p == 0.0 {
        Ok(truncated_distance(&t.root, &s.root, 0.0))
    } else {
        Ok(power_distance(&t.root, &s.root, p).powf(1.0 / p))
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p == 0.0 || (p >= 1.0 && p.is_finite()) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("p must be 0 or in [1, inf), got {p}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_pair() -> (PathMeasure, PathMeasure) {
        let mu = PathMeasure::scalar(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let nu = PathMeasure::scalar(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]], vec![0.5, 0.5]).unwrap();
        (mu, nu)
    }

    #[test]
    fn quantile_1d_examples() {
        let q = quantile_1d(&PathMeasure::scalar(vec![vec![3.0]], vec![1.0]).unwrap()).unwrap();
        assert_eq!(q.values, vec![3.0]);
        assert_eq!(q.eval(0.3), 3.0);
        let rho = PathMeasure::scalar(vec![vec![5.0], vec![-2.0]], vec![0.75, 0.25]).unwrap();
        let q = quantile_1d(&rho).unwrap();
        assert_eq!(q.breakpoints, vec![0.25, 1.0]);
        assert_eq!(q.eval(0.1), -2.0);
        assert_eq!(q.eval(0.25), 5.0);
        assert_eq!(q.eval(0.9), 5.0);
    }

    #[test]
    fn example_quantile_process() {
        let (mu, _) = example_pair();
        let q = quantile_process(&mu).unwrap();
        assert_eq!(q.eval(&[0.2, 0.5, 0.5]), vec![0.0, 0.0, 1.0]);
        assert_eq!(q.eval(&[0.7, 0.1, 0.9]), vec![1.0, 1.0, 0.0]);
        assert_eq!(q.eval(&[0.5, 0.1, 0.9]), vec![1.0, 1.0, 0.0]);
        assert!(q.is_triangular_increasing());
        assert!(q.is_consistent());
        assert!(!q.is_strictly_increasing());
        assert_eq!(pushforward(&q).unwrap(), mu);
    }

    #[test]
    fn dirac_is_constant_map() {
        let mu = PathMeasure::scalar(vec![vec![2.0, -1.0]], vec![1.0]).unwrap();
        let q = quantile_process(&mu).unwrap();
        assert_eq!(q.as_map(), &TriangularMap::constant(&[2.0, -1.0]));
        assert_eq!(pushforward(&TriangularMap::constant(&[2.0, -1.0])).unwrap(), mu);
    }

    #[test]
    fn pushforward_rejects_slopes() {
        assert_eq!(pushforward(&TriangularMap::identity(2)), Err(Error::NotPiecewiseConstant));
    }

    #[test]
    fn midpoint_of_example() {
        let (mu, nu) = example_pair();
        let (qm, qn) = (quantile_process(&mu).unwrap(), quantile_process(&nu).unwrap());
        let mid = convex_combine(&[qm.as_map(), qn.as_map()], &[0.5, 0.5]).unwrap();
        let expected = PathMeasure::scalar(vec![vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(pushforward(&mid).unwrap(), expected);
        assert!(mid.is_triangular_increasing());
        assert!(mid.is_consistent());
        // The two processes differ only in the second coordinate, by 1 everywhere.
        assert_eq!(map_distance(&qm, &qn, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn identity_predicates_and_perturbation() {
        let id = TriangularMap::identity(3);
        assert!(id.is_triangular_increasing() && id.is_strictly_increasing() && id.is_consistent());
        assert_eq!(TriangularMap::constant(&[0.0, 0.0, 0.0]).perturb(1.0).unwrap(), id);
        assert_eq!(id.perturb(0.0).unwrap(), id);
        let (mu, _) = example_pair();
        let q = quantile_process(&mu).unwrap();
        let qe = q.perturb(1e-3).unwrap();
        assert!(qe.is_strictly_increasing());
        // |eps * u| integrated over the cube, per coordinate eps / 2.
        let d = map_distance(&qe, &q, 1.0).unwrap();
        assert!((d - 3.0 * 0.5e-3).abs() < 1e-15);
        let d2 = map_distance(&qe, &q, 2.0).unwrap();
        assert!((d2 - (3.0 * 1e-6 / 3.0_f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn affine_integrals_match_quadrature() {
        for p in [1.0, 1.5, 2.0, 2.5, 3.0, 7.0] {
            for (a, b) in [(0.3, -1.0), (-0.2, 0.5), (2.0, 1e-9), (0.0, 1.0)] {
                let exact = abs_affine_power_integral(a, b, 0.1, 0.9, p);
                // Composite midpoint rule as an independent check.
                let n = 200_000;
                let h = 0.8 / n as f64;
                let approx: f64 = (0..n).map(|i| (a + b * (0.1 + (i as f64 + 0.5) * h)).abs().powf(p) * h).sum();
                assert!((exact - approx).abs() < 1e-8 * (1.0 + exact), "p={p} a={a} b={b}: {exact} vs {approx}");
            }
        }
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let v = gl_integrate(0.0, 2.0, |x| x.powi(20) - 3.0 * x.powi(7));
        let exact = 2f64.powi(21) / 21.0 - 3.0 * 2f64.powi(8) / 8.0;
        assert!(((v - exact) / exact).abs() < 1e-13);
    }

    #[test]
    fn truncated_distance_of_constants() {
        let a = TriangularMap::constant(&[0.0, 0.0]);
        let b = TriangularMap::constant(&[0.3, 0.4]);
        assert!((map_distance(&a, &b, 0.0).unwrap() - 0.7).abs() < 1e-15);
        let c = TriangularMap::constant(&[0.8, 0.4]);
        assert_eq!(map_distance(&a, &c, 0.0).unwrap(), 1.0);
        // min(u, 1) integrates to 1/2 on one coordinate.
        let id = TriangularMap::identity(1);
        let z = TriangularMap::constant(&[0.0]);
        assert!((map_distance(&id, &z, 0.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn canonical_merge_sums_masses() {
        let node = MapNode {
            segments: vec![
                Segment { lo: 0.0, hi: 0.25, offset: 1.0, slope: 0.0, mass: 0.25, child: None },
                Segment { lo: 0.25, hi: 1.0, offset: 1.0, slope: 0.0, mass: 0.75, child: None },
            ],
        };
        let map = TriangularMap::from_root(1, node).unwrap().canonicalize();
        assert_eq!(map.root().segments.len(), 1);
        assert_eq!(map.root().segments[0].mass, 1.0);
    }

    #[test]
    fn json_round_trip() {
        let (mu, _) = example_pair();
        let q = quantile_process(&mu).unwrap();
        let back = TriangularMap::from_json(&q.to_json()).unwrap();
        assert_eq!(&back, q.as_map());
        let bad = json!({"breaks": [0.5, 0.4], "values": [[0, 0], [1, 0]], "children": []});
        assert!(TriangularMap::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_bad_exponent() {
        let id = TriangularMap::identity(1);
        assert!(map_distance(&id, &id, 0.5).is_err());
        assert!(map_distance(&id, &TriangularMap::identity(2), 1.0).is_err());
    }
}
