//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use kr_core::experiments::{compare1, markov, markov_pair};
use kr_core::sampling::{self, SeededRng};
use kr_core::{
    adapted_variation, aw_bruteforce, aw_distance, counterexample_measures, equivalence_bound, geodesic_point,
    is_markov, kr_distance, kr_distance_multi, map_distance, pushforward, quantile_process, tilde_kr, w_distance,
    GridReference, PathMeasure,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            out.pass = false;
            out.detail = format!("{}; over time limit {:?}", out.detail, limit);
        }
    }
    println!(
        "[{}] {:>2} {:<34} {:>8.2}s  {}",
        if out.pass { "PASS" } else { "FAIL" },
        id,
        name,
        elapsed.as_secs_f64(),
        out.detail
    );
    out.pass
}

fn pair(rng: &mut SeededRng, max_steps: usize, max_atoms: usize) -> (PathMeasure, PathMeasure) {
    let mut f = sampling::random_family(rng, 2, 1, max_steps, max_atoms);
    let b = f.pop().unwrap();
    (f.pop().unwrap(), b)
}

fn round_trip() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(1));
    let mut bad = 0;
    for _ in 0..1000 {
        let steps = rng.gen_range(1..=4);
        let mu = sampling::random_measure(&mut rng, 1, steps, 16);
        let back = pushforward(&quantile_process(&mu).unwrap()).unwrap();
        if back != mu {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/1000 mismatches"))
}

fn isometry() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(2));
    let mut worst: f64 = 0.0;
    for p in [0.0, 1.0, 2.0] {
        for _ in 0..500 {
            let (mu, nu) = pair(&mut rng, 4, 10);
            let kr = kr_distance(&mu, &nu, p).unwrap();
            let (qm, qn) = (quantile_process(&mu).unwrap(), quantile_process(&nu).unwrap());
            worst = worst.max((kr - map_distance(&qm, &qn, p).unwrap()).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.3e} over 1500 pairs"))
}

fn ordering() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(3));
    let mut bad = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for p in [1.0, 2.0] {
        for _ in 0..500 {
            let (mu, nu) = pair(&mut rng, 3, 8);
            let w = w_distance(&mu, &nu, p).unwrap();
            let aw = aw_distance(&mu, &nu, p).unwrap().value;
            let kr = kr_distance(&mu, &nu, p).unwrap();
            worst = worst.max((w - aw).max(aw - kr));
            if w > aw + 1e-9 || aw > kr + 1e-9 {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{bad}/1000 violations, max excess {worst:.3e}"))
}

fn dp_vs_oracle() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(4));
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let p = if i % 2 == 0 { 1.0 } else { 2.0 };
        let (mu, nu) = pair(&mut rng, 3, 4);
        let dp = aw_distance(&mu, &nu, p).unwrap().value;
        let brute = aw_bruteforce(&mu, &nu, p).unwrap();
        worst = worst.max((dp - brute).abs());
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.3e} over 200 instances"))
}

fn digit_sequence() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for p in [1.0, 2.0] {
        let rep = compare1(6, 4, p).unwrap();
        let target = 0.5f64.powf(1.0 / p);
        let kr_dev = rep
            .rows
            .iter()
            .filter(|r| r["n"] != r["m"])
            .map(|r| (r["kr"].as_f64().unwrap() - target).abs())
            .fold(0.0, f64::max);
        ok &= kr_dev <= 1e-12;
        notes.push(format!("p={p}: KR dev {kr_dev:.1e}"));
        if p == 1.0 {
            let decay = rep.assertions.iter().filter(|a| a.claim.starts_with("max AW") || a.claim.starts_with("AW("));
            let (n, pass) = decay.fold((0, 0), |(n, k), a| (n + 1, k + a.pass as usize));
            ok &= n == pass;
            notes.push(format!("AW_1 checks {pass}/{n}"));
        }
    }
    outcome(ok, notes.join(", "))
}

fn non_markov_midpoint() -> Outcome {
    let (mu0, mu1) = markov_pair();
    let mid = geodesic_point(&mu0, &mu1, 0.5, 2.0).unwrap();
    let expected = PathMeasure::scalar(vec![vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 0.0]], vec![0.5, 0.5]).unwrap();
    let exact = mid == expected;
    let non_markov = !is_markov(&mid, 0.0);
    let rep = markov(2.0).unwrap();
    let speed = rep.assertions.iter().filter(|a| a.claim.contains("KR(mu_")).all(|a| a.pass);
    outcome(
        exact && non_markov && speed,
        format!("midpoint exact: {exact}, non-Markov: {non_markov}, constant speed at 5 t: {speed}"),
    )
}

fn triangle_counterexample() -> Outcome {
    let (mu, nu, eta) = counterexample_measures(0.5).unwrap();
    let a = tilde_kr(&mu, &nu, 1.0).unwrap().0;
    let b = tilde_kr(&nu, &eta, 1.0).unwrap().0;
    let c = tilde_kr(&mu, &eta, 1.0).unwrap().0;
    let mut ok = (a - 1.5).abs() <= 1e-9 && (b - 1.0).abs() <= 1e-9 && (c - 5.5).abs() <= 1e-9;
    ok &= (c - a - b - 3.0).abs() <= 1e-9;
    let mut notes = vec![format!("eps=0.5,p=1: ({a}, {b}, {c}) margin {}", c - a - b)];
    for eps in [0.1, 0.5, 1.0] {
        for p in [1.0, 2.0] {
            let (mu, nu, eta) = counterexample_measures(eps).unwrap();
            let a = tilde_kr(&mu, &nu, p).unwrap().0;
            let (b, diag) = tilde_kr(&nu, &eta, p).unwrap();
            let c = tilde_kr(&mu, &eta, p).unwrap().0;
            if a + b >= c {
                ok = false;
                notes.push(format!(
                    "no violation at eps={eps},p={p}: {a:.4}+{b:.4} >= {c:.4} (tied stage optima: {})",
                    diag.non_unique
                ));
            }
        }
    }
    outcome(ok, notes.join("; "))
}

fn equivalence() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(8));
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (mu, nu) = pair(&mut rng, 3, 8);
        let aw = aw_distance(&mu, &nu, 2.0).unwrap().value;
        let kr = kr_distance(&mu, &nu, 2.0).unwrap();
        let bound = equivalence_bound(&mu, aw, 2.0, None).unwrap();
        worst = worst.max(kr - bound);
    }
    outcome(worst <= 1e-7, format!("max KR - bound {worst:.3e} over 100 pairs"))
}

fn adapted_variation_sandwich() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(9));
    let mut notes = Vec::new();
    let mut ok = true;
    for steps in [2usize, 3] {
        let constant = 2f64.powi(steps as i32 - 1) - 1.0;
        let (mut low, mut high, mut ratio) = (0, 0, 0.0f64);
        for _ in 0..200 {
            let (mu, nu) = sampling::random_same_support_pair(&mut rng, steps, 8);
            let tv = mu.total_variation(&nu).unwrap();
            let av = adapted_variation(&mu, &nu).unwrap();
            if tv > av + 1e-9 {
                low += 1;
            }
            if av > constant * tv + 1e-9 {
                high += 1;
            }
            if tv > 0.0 {
                ratio = ratio.max(av / tv);
            }
        }
        ok &= low == 0 && high == 0;
        notes.push(format!("N={steps}: TV>AV {low}/200, AV>{constant}TV {high}/200, max AV/TV {ratio:.3}"));
    }
    outcome(ok, notes.join("; "))
}

fn metric_axioms() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(10));
    let (mut kr_bad, mut aw_bad) = (0, 0);
    for i in 0..500 {
        let p = if i % 2 == 0 { 1.0 } else { 2.0 };
        let f = sampling::random_family(&mut rng, 3, 1, 3, 6);
        let kr = |a: usize, b: usize| kr_distance(&f[a], &f[b], p).unwrap();
        let aw = |a: usize, b: usize| aw_distance(&f[a], &f[b], p).unwrap().value;
        if kr(0, 2) > kr(0, 1) + kr(1, 2) + 1e-9 {
            kr_bad += 1;
        }
        if aw(0, 2) > aw(0, 1) + aw(1, 2) + 1e-9 {
            aw_bad += 1;
        }
    }
    let (mu, nu, eta) = counterexample_measures(0.5).unwrap();
    let t = |a: &PathMeasure, b: &PathMeasure| tilde_kr(a, b, 1.0).unwrap().0;
    let violated = t(&mu, &nu) + t(&nu, &eta) < t(&mu, &eta);
    outcome(
        kr_bad == 0 && aw_bad == 0 && violated,
        format!("KR violations {kr_bad}/500, AW violations {aw_bad}/500, KR~ violation triggered: {violated}"),
    )
}

fn continuous_measure(rng: &mut SeededRng, dim: usize, steps: usize, n: usize) -> PathMeasure {
    let atoms = (0..n).map(|_| (0..dim * steps).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=9) as f64).collect();
    let total: f64 = raw.iter().sum();
    PathMeasure::new(dim, steps, atoms, raw.iter().map(|w| w / total).collect()).unwrap()
}

fn multidim_consistency() -> Outcome {
    let mut rng = sampling::rng(sampling::seed_from_env(11));
    let grid = GridReference::new(1, 64).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (mu, nu) = pair(&mut rng, 3, 8);
        let exact = kr_distance(&mu, &nu, 2.0).unwrap();
        worst = worst.max((exact - kr_distance_multi(&mu, &nu, &grid, 2.0).unwrap()).abs());
    }
    let mut ok = worst <= 1e-3;
    let mut notes = vec![format!("d=1 max deviation {worst:.2e}")];
    let mut trend_bad = 0;
    let instances = 5;
    for _ in 0..instances {
        let mu = continuous_measure(&mut rng, 2, 2, 4);
        let nu = continuous_measure(&mut rng, 2, 2, 4);
        let values: Vec<f64> = [4usize, 8, 16, 32]
            .iter()
            .map(|&m| kr_distance_multi(&mu, &nu, &GridReference::new(2, m).unwrap(), 2.0).unwrap())
            .collect();
        let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        if !diffs.windows(2).all(|w| w[1] < w[0]) {
            trend_bad += 1;
            notes.push(format!("non-decreasing differences {:?}", diffs));
        }
    }
    ok &= trend_bad == 0;
    notes.push(format!("d=2 decreasing differences on {}/{instances} instances", instances - trend_bad));
    outcome(ok, notes.join("; "))
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        run(1, "round-trip exactness", secs(5), round_trip),
        run(2, "quantile-map isometry", secs(10), isometry),
        run(3, "W <= AW <= KR", None, ordering),
        run(4, "AW dynamic program vs oracle", None, dp_vs_oracle),
        run(5, "digit sequence KR and AW", secs(30), digit_sequence),
        run(6, "non-Markov geodesic midpoint", None, non_markov_midpoint),
        run(7, "KR~ triangle counterexample", None, triangle_counterexample),
        run(8, "KR bounded by AW moduli", None, equivalence),
        run(9, "TV <= AV <= (2^(N-1)-1) TV", None, adapted_variation_sandwich),
        run(10, "metric axioms", None, metric_axioms),
        run(11, "multi-dimensional consistency", None, multidim_consistency),
    ];
    let failed = results.iter().filter(|r| !**r).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
