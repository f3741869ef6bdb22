//! Scripted reproductions producing machine-readable reports.

use serde::Serialize;
use serde_json::{json, Value};

use crate::adapted::{adapted_variation, aw_distance};
use crate::error::{Error, Result};
use crate::kr::{geodesic_point, is_markov, kr_distance, root};
use crate::measure::PathMeasure;
use crate::multidim::{counterexample_measures, tilde_kr};

/// Tolerance used for assertions on exactly computable quantities.
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub claim: String,
    pub expected: f64,
    pub got: f64,
    pub tol: f64,
    pub pass: bool,
    pub relation: Relation,
}

impl Assertion {
    pub fn new(claim: impl Into<String>, relation: Relation, got: f64, expected: f64, tol: f64) -> Self {
        let pass = match relation {
            Relation::Eq => (got - expected).abs() <= tol,
            Relation::Le => got <= expected + tol,
            Relation::Lt => got < expected - tol,
            Relation::Ge => got >= expected - tol,
            Relation::Gt => got > expected + tol,
        };
        Assertion {
            claim: claim.into(),
            expected,
            got,
            tol,
            pass,
            relation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: Value,
    pub rows: Vec<Value>,
    pub assertions: Vec<Assertion>,
}

impl ExperimentReport {
    fn new(experiment: &str, params: Value) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            params,
            rows: Vec::new(),
            assertions: Vec::new(),
        }
    }

    fn check(&mut self, claim: impl Into<String>, relation: Relation, got: f64, expected: f64, tol: f64) {
        self.assertions.push(Assertion::new(claim, relation, got, expected, tol));
    }

    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Rows as CSV; the header is the union of row keys.
    pub fn rows_csv(&self) -> String {
        let mut header: Vec<String> = Vec::new();
        for row in &self.rows {
            if let Value::Object(m) = row {
                for k in m.keys() {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = header
                .iter()
                .map(|k| match row.get(k) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Binary digit `n` of `u` in `(0,1)`.
fn digit(u: f64, n: u32) -> f64 {
    ((u * 2f64.powi(n as i32)).floor() as u64 % 2) as f64
}

/// First coordinate uniform on the dyadic grid of depth `k`, second the
/// `n`-th binary digit of the first.
pub fn digit_measure(k: u32, n: u32) -> Result<PathMeasure> {
    let count = 1usize << k;
    let w = 1.0 / count as f64;
    let atoms = (1..=count)
        .map(|i| {
            let u = (2 * i - 1) as f64 / 2f64.powi(k as i32 + 1);
            vec![u, digit(u, n)]
        })
        .collect();
    PathMeasure::scalar(atoms, vec![w; count])
}

pub fn compare1(k: u32, n_max: u32, p: f64) -> Result<ExperimentReport> {
    if n_max < 1 || n_max > k || k > 16 {
        return Err(Error::OutOfRange(format!("need 1 <= n_max <= K <= 16, got n_max = {n_max}, K = {k}")));
    }
    let mut rep = ExperimentReport::new("compare1", json!({ "K": k, "n_max": n_max, "p": p }));
    let mus = (1..=n_max).map(|n| digit_measure(k, n)).collect::<Result<Vec<_>>>()?;
    let half = root(0.5, p);
    let mut aw = vec![vec![0.0; n_max as usize]; n_max as usize];
    for a in 0..mus.len() {
        for b in a..mus.len() {
            let kr = kr_distance(&mus[a], &mus[b], p)?;
            let awv = aw_distance(&mus[a], &mus[b], p)?.value;
            aw[a][b] = awv;
            aw[b][a] = awv;
            rep.rows.push(json!({ "n": a + 1, "m": b + 1, "kr": kr, "aw": awv }));
            let (n, m) = (a + 1, b + 1);
            if a == b {
                rep.check(format!("KR(mu_{n}, mu_{n}) = 0"), Relation::Eq, kr, 0.0, EXACT_TOL);
            } else {
                rep.check(format!("KR(mu_{n}, mu_{m}) = (1/2)^(1/p)"), Relation::Eq, kr, half, EXACT_TOL);
                rep.check(format!("AW(mu_{n}, mu_{m}) < (1/2)^(1/p)"), Relation::Lt, awv, half, 0.0);
            }
        }
    }
    // Largest AW over pairs whose smaller index is n.
    let by_min: Vec<f64> = (0..mus.len().saturating_sub(1))
        .map(|a| (a + 1..mus.len()).map(|b| aw[a][b]).fold(0.0, f64::max))
        .collect();
    for w in 0..by_min.len().saturating_sub(1) {
        rep.check(
            format!("max AW over min(n,m) = {} below min(n,m) = {}", w + 2, w + 1),
            Relation::Lt,
            by_min[w + 1],
            by_min[w],
            0.0,
        );
    }
    Ok(rep)
}

/// Two atoms `(±1/n, ±(-1)^n)`.
pub fn sign_measure(n: u32) -> Result<PathMeasure> {
    let x = 1.0 / n as f64;
    let s = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    PathMeasure::scalar(vec![vec![x, s], vec![-x, -s]], vec![0.5, 0.5])
}

pub fn compare2(n_max: u32, p: f64) -> Result<ExperimentReport> {
    if n_max < 4 {
        return Err(Error::OutOfRange(format!("need n_max >= 4, got {n_max}")));
    }
    let mut rep = ExperimentReport::new("compare2", json!({ "n_max": n_max, "p": p }));
    let mus = (1..=n_max).map(sign_measure).collect::<Result<Vec<_>>>()?;
    let mut consecutive_aw = Vec::new();
    for n in 1..=n_max {
        for m in n + 1..=n_max {
            let (a, b) = (&mus[n as usize - 1], &mus[m as usize - 1]);
            let kr = kr_distance(a, b, p)?;
            let aw = aw_distance(a, b, p)?.value;
            rep.rows.push(json!({ "n": n, "m": m, "kr": kr, "aw": aw }));
            let gap = 1.0 / n as f64 - 1.0 / m as f64;
            if (n + m) % 2 == 0 {
                rep.check(format!("KR(mu_{n}, mu_{m}) = |1/n - 1/m|"), Relation::Eq, kr, gap, EXACT_TOL);
                rep.check(format!("AW(mu_{n}, mu_{m}) = |1/n - 1/m|"), Relation::Eq, aw, gap, EXACT_TOL);
            } else {
                let kr_exact = root(gap.powf(p) + 2f64.powf(p), p);
                let aw_exact = kr_exact.min(1.0 / n as f64 + 1.0 / m as f64);
                rep.check(format!("KR(mu_{n}, mu_{m}) = (|1/n - 1/m|^p + 2^p)^(1/p)"), Relation::Eq, kr, kr_exact, EXACT_TOL);
                rep.check(format!("KR(mu_{n}, mu_{m}) >= 2^(1/p)"), Relation::Ge, kr, root(2.0, p), 0.0);
                rep.check(format!("AW(mu_{n}, mu_{m}) = min(KR, 1/n + 1/m)"), Relation::Eq, aw, aw_exact, EXACT_TOL);
            }
            if m == n + 1 {
                consecutive_aw.push(aw);
            }
        }
    }
    for (i, w) in consecutive_aw.windows(2).enumerate() {
        let n = i + 2;
        rep.check(format!("AW(mu_{n}, mu_{}) < AW(mu_{}, mu_{n})", n + 1, n - 1), Relation::Lt, w[1], w[0], 0.0);
    }
    Ok(rep)
}

/// Two-atom measures on three steps whose geodesic midpoint is not Markov.
pub fn markov_pair() -> (PathMeasure, PathMeasure) {
    let mu0 = PathMeasure::scalar(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], vec![0.5, 0.5]).expect("valid");
    let mu1 = PathMeasure::scalar(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]], vec![0.5, 0.5]).expect("valid");
    (mu0, mu1)
}

pub fn markov(p: f64) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("markov", json!({ "p": p }));
    let (mu0, mu1) = markov_pair();
    let mid = geodesic_point(&mu0, &mu1, 0.5, p)?;
    let expected = PathMeasure::scalar(vec![vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 0.0]], vec![0.5, 0.5])?;
    rep.check("midpoint equals 1/2 (d(0,1/2,1) + d(1,1/2,0))", Relation::Eq, (mid == expected) as u8 as f64, 1.0, 0.0);
    rep.check("midpoint is not Markov", Relation::Eq, is_markov(&mid, 0.0) as u8 as f64, 0.0, 0.0);
    rep.check("endpoints are Markov", Relation::Eq, (is_markov(&mu0, 0.0) && is_markov(&mu1, 0.0)) as u8 as f64, 1.0, 0.0);
    let total = kr_distance(&mu0, &mu1, p)?;
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let mt = geodesic_point(&mu0, &mu1, t, p)?;
        let d0 = kr_distance(&mu0, &mt, p)?;
        let d1 = kr_distance(&mt, &mu1, p)?;
        rep.rows.push(json!({ "t": t, "kr_from_start": d0, "kr_to_end": d1, "markov": is_markov(&mt, 0.0) }));
        rep.check(format!("KR(mu_0, mu_t) = t KR(mu_0, mu_1) at t = {t}"), Relation::Eq, d0, t * total, EXACT_TOL);
        rep.check(format!("KR(mu_t, mu_1) = (1-t) KR(mu_0, mu_1) at t = {t}"), Relation::Eq, d1, (1.0 - t) * total, EXACT_TOL);
    }
    rep.check("mu_0 reproduced at t = 0", Relation::Eq, (geodesic_point(&mu0, &mu1, 0.0, p)? == mu0) as u8 as f64, 1.0, 0.0);
    rep.check("mu_1 reproduced at t = 1", Relation::Eq, (geodesic_point(&mu0, &mu1, 1.0, p)? == mu1) as u8 as f64, 1.0, 0.0);
    Ok(rep)
}

pub fn triangle(eps_list: &[f64], p: f64) -> Result<ExperimentReport> {
    if let Some(e) = eps_list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(Error::OutOfRange(format!("eps must lie in (0, 1], got {e}")));
    }
    let mut rep = ExperimentReport::new("triangle", json!({ "eps": eps_list, "p": p }));
    for &eps in eps_list {
        let (mu, nu, eta) = counterexample_measures(eps)?;
        let (ab, d1) = tilde_kr(&mu, &nu, p)?;
        let (bc, d2) = tilde_kr(&nu, &eta, p)?;
        let (ac, d3) = tilde_kr(&mu, &eta, p)?;
        let (ba, _) = tilde_kr(&nu, &mu, p)?;
        let unique = d1.all_unique() && d2.all_unique() && d3.all_unique();
        rep.rows.push(json!({
            "eps": eps, "mu_nu": ab, "nu_eta": bc, "mu_eta": ac,
            "margin": ac - ab - bc, "stage_optima_unique": unique,
        }));
        let a = (1.0 - eps).abs().powf(p);
        rep.check(format!("eps = {eps}: KR~(mu,nu) = (|1-eps|^p + 1)^(1/p)"), Relation::Eq, ab, root(a + 1.0, p), EXACT_TOL);
        rep.check(format!("eps = {eps}: KR~(nu,eta) = 2 eps"), Relation::Eq, bc, 2.0 * eps, EXACT_TOL);
        rep.check(
            format!("eps = {eps}: KR~(mu,eta) = (|1-eps|^p + 1 + 4^p)^(1/p)"),
            Relation::Eq,
            ac,
            root(a + 1.0 + 4f64.powf(p), p),
            EXACT_TOL,
        );
        rep.check(format!("eps = {eps}: KR~(mu,nu) = KR~(nu,mu)"), Relation::Eq, ab, ba, EXACT_TOL);
        rep.check(format!("eps = {eps}: KR~(mu,nu) + KR~(nu,eta) < KR~(mu,eta)"), Relation::Lt, ab + bc, ac, 0.0);
    }
    Ok(rep)
}

/// Atoms `{0,1,2}^steps` in lexicographic order.
pub fn ternary_atoms(steps: usize) -> Vec<Vec<f64>> {
    let count = 3usize.pow(steps as u32);
    (0..count)
        .map(|mut i| {
            let mut a = vec![0.0; steps];
            for k in (0..steps).rev() {
                a[k] = (i % 3) as f64;
                i /= 3;
            }
            a
        })
        .collect()
}

/// Mixtures `(1 - 2^-n) mu + 2^-n uniform` on a fixed ternary grid.
pub fn bogachev(levels: u32, steps: usize, p: f64) -> Result<ExperimentReport> {
    if levels < 2 || !(1..=4).contains(&steps) {
        return Err(Error::OutOfRange(format!("need levels >= 2 and 1 <= N <= 4, got {levels}, {steps}")));
    }
    let mut rep = ExperimentReport::new("bogachev", json!({ "levels": levels, "N": steps, "p": p }));
    let atoms = ternary_atoms(steps);
    let raw: Vec<f64> = (0..atoms.len()).map(|i| (1 + (i * 7) % 5) as f64).collect();
    let total: f64 = raw.iter().sum();
    let base: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let uniform = 1.0 / atoms.len() as f64;
    let mu = PathMeasure::scalar(atoms.clone(), base.clone())?;
    let constant = 2f64.powi(steps as i32 - 1) - 1.0;
    rep.check("AV(mu, mu) = 0", Relation::Eq, adapted_variation(&mu, &mu)?, 0.0, EXACT_TOL);
    rep.check("KR(mu, mu) = 0", Relation::Eq, kr_distance(&mu, &mu, p)?, 0.0, EXACT_TOL);
    let mut previous_kr = f64::INFINITY;
    for n in 1..=levels {
        let t = 0.5f64.powi(n as i32);
        let w: Vec<f64> = base.iter().map(|b| (1.0 - t) * b + t * uniform).collect();
        let mun = PathMeasure::scalar(atoms.clone(), w)?;
        let tv = mun.total_variation(&mu)?;
        let av = adapted_variation(&mun, &mu)?;
        let kr = kr_distance(&mun, &mu, p)?;
        rep.rows.push(json!({ "n": n, "t": t, "tv": tv, "av": av, "kr": kr, "av_over_tv": av / tv }));
        rep.check(format!("n = {n}: TV <= AV"), Relation::Le, tv, av, EXACT_TOL);
        rep.check(format!("n = {n}: AV <= (2^(N-1) - 1) TV"), Relation::Le, av, constant * tv, EXACT_TOL);
        rep.check(format!("n = {n}: KR below previous level"), Relation::Lt, kr, previous_kr, 0.0);
        previous_kr = kr;
    }
    Ok(rep)
}
