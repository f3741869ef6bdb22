use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use kr_core::experiments::{self, ExperimentReport};
use kr_core::{
    adapted_variation, aw_bruteforce, aw_distance, barycenter, counterexample_measures, equivalence_bound,
    geodesic_point, kr_coupling, kr_distance, kr_distance_multi, modulus, parse_measure, serialize_measure, tilde_kr,
    w_distance, GridReference, ModulusQuery, PathMeasure,
};

/// Knothe–Rosenblatt and adapted Wasserstein distances between discrete
/// path measures.
///
/// Measures are JSON files `{"d": d, "N": N, "atoms": [[[x_1], ..., [x_N]], ...], "weights": [...]}`.
#[derive(Parser)]
#[command(name = "kr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knothe–Rosenblatt distance KR_p.
    Dist {
        /// Exponent; 0 selects the truncated cost min(|x - y|_1, 1).
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        a: PathBuf,
        b: PathBuf,
    },
    /// Knothe–Rosenblatt coupling as CSV `w,x_1..x_N,y_1..y_N`.
    Coupling {
        a: PathBuf,
        b: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Knothe–Rosenblatt barycenter of several measures.
    Barycenter {
        /// Comma-separated nonnegative coefficients summing to 1.
        #[arg(long, value_delimiter = ',', required = true)]
        coeffs: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(required = true)]
        measures: Vec<PathBuf>,
    },
    /// Point at time t on the Knothe–Rosenblatt geodesic from A to B.
    Geodesic {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        a: PathBuf,
        b: PathBuf,
    },
    /// Adapted Wasserstein distance AW_p.
    Aw {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        a: PathBuf,
        b: PathBuf,
        /// Write the optimal bicausal coupling as CSV.
        #[arg(long)]
        coupling: Option<PathBuf>,
        /// Enumerate all compositions of stage vertex plans instead of the dynamic program.
        #[arg(long)]
        bruteforce: bool,
    },
    /// Wasserstein distance W_p on whole paths.
    Wass {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        a: PathBuf,
        b: PathBuf,
    },
    /// Adapted variation: least mismatch probability over bicausal couplings.
    Av { a: PathBuf, b: PathBuf },
    /// Modulus of continuity of the map from the first `split` coordinates to the rest.
    Modulus {
        #[arg(long)]
        split: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        measure: PathBuf,
    },
    /// AW_p, KR_p and the modulus bound on KR_p in terms of AW_p.
    Bound {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Optional increasing delta grid; moduli are read at the next grid point up.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        a: PathBuf,
        b: PathBuf,
    },
    /// KR_p for vector-valued paths through an M^d reference grid.
    MultiDist {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 8)]
        grid: usize,
        a: PathBuf,
        b: PathBuf,
    },
    /// Supremum over triangular optimal couplings. Without measures, runs the
    /// three-measure triangle counterexample at `--eps`.
    Tilde {
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        a: Option<PathBuf>,
        b: Option<PathBuf>,
    },
    /// Scripted reproduction with checked assertions; exits nonzero if any fails.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the report rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Dyadic grid depth (compare1).
        #[arg(long, default_value_t = 6)]
        k: u32,
        /// Largest sequence index (compare1, compare2).
        #[arg(long)]
        n_max: Option<u32>,
        /// Comma-separated eps values in (0, 1] (triangle).
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0])]
        eps: Vec<f64>,
        /// Number of smoothing levels (bogachev).
        #[arg(long, default_value_t = 6)]
        levels: u32,
        /// Path length N (bogachev).
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
    /// Measure as CSV `w,x_1_1,...,x_N_d`.
    ExportCsv { measure: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Compare1,
    Compare2,
    Markov,
    Triangle,
    Bogachev,
}

fn load(path: &Path) -> Result<PathMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_measure(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn print_json(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
}

fn run_experiment(name: ExperimentName, p: f64, k: u32, n_max: Option<u32>, eps: &[f64], levels: u32, steps: usize) -> Result<ExperimentReport> {
    Ok(match name {
        ExperimentName::Compare1 => experiments::compare1(k, n_max.unwrap_or(4), p)?,
        ExperimentName::Compare2 => experiments::compare2(n_max.unwrap_or(8), p)?,
        ExperimentName::Markov => experiments::markov(p)?,
        ExperimentName::Triangle => experiments::triangle(eps, p)?,
        ExperimentName::Bogachev => experiments::bogachev(levels, steps, p)?,
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Dist { p, a, b } => {
            let value = kr_distance(&load(&a)?, &load(&b)?, p)?;
            print_json(json!({ "value": value, "p": p }));
        }
        Command::Coupling { a, b, out } => {
            let c = kr_coupling(&load(&a)?, &load(&b)?)?;
            emit(out.as_deref(), &c.to_csv())?;
        }
        Command::Barycenter { coeffs, p, measures } => {
            let ms = measures.iter().map(|m| load(m)).collect::<Result<Vec<_>>>()?;
            println!("{}", serialize_measure(&barycenter(&ms, &coeffs, p)?));
        }
        Command::Geodesic { t, p, a, b } => {
            println!("{}", serialize_measure(&geodesic_point(&load(&a)?, &load(&b)?, t, p)?));
        }
        Command::Aw { p, a, b, coupling, bruteforce } => {
            let (mu, nu) = (load(&a)?, load(&b)?);
            if bruteforce {
                if coupling.is_some() {
                    bail!("--coupling is only available with the dynamic program");
                }
                let value = aw_bruteforce(&mu, &nu, p)?;
                print_json(json!({ "value": value, "p": p, "method": "bruteforce", "surrogate_p0": false }));
            } else {
                let r = aw_distance(&mu, &nu, p)?;
                if let Some(path) = coupling {
                    emit(Some(&path), &r.coupling.to_csv())?;
                }
                print_json(json!({ "value": r.value, "p": p, "method": "dp", "surrogate_p0": r.surrogate_p0 }));
            }
        }
        Command::Wass { p, a, b } => {
            let value = w_distance(&load(&a)?, &load(&b)?, p)?;
            print_json(json!({ "value": value, "p": p }));
        }
        Command::Av { a, b } => {
            let (mu, nu) = (load(&a)?, load(&b)?);
            let value = adapted_variation(&mu, &nu)?;
            print_json(json!({ "value": value, "tv": mu.total_variation(&nu)? }));
        }
        Command::Modulus { split, delta, p, measure } => {
            let mu = load(&measure)?;
            let value = modulus(&ModulusQuery { mu, split, delta, p })?;
            print_json(json!({ "value": value, "split": split, "delta": delta, "p": p }));
        }
        Command::Bound { p, grid, a, b } => {
            let (mu, nu) = (load(&a)?, load(&b)?);
            let aw = aw_distance(&mu, &nu, p)?.value;
            let kr = kr_distance(&mu, &nu, p)?;
            let bound = equivalence_bound(&mu, aw, p, grid.as_deref())?;
            print_json(json!({ "aw": aw, "kr": kr, "bound": bound, "p": p, "holds": kr <= bound + 1e-9 }));
        }
        Command::MultiDist { p, grid, a, b } => {
            let (mu, nu) = (load(&a)?, load(&b)?);
            let g = GridReference::new(mu.dim(), grid)?;
            let value = kr_distance_multi(&mu, &nu, &g, p)?;
            print_json(json!({ "value": value, "p": p, "grid": grid }));
        }
        Command::Tilde { p, eps, a, b } => match (a, b) {
            (Some(a), Some(b)) => {
                let (value, diag) = tilde_kr(&load(&a)?, &load(&b)?, p)?;
                print_json(json!({
                    "value": value, "p": p, "stage_problems": diag.stage_problems,
                    "non_unique": diag.non_unique, "max_optimal_plans": diag.max_optimal_plans,
                }));
            }
            (None, None) => {
                let (mu, nu, eta) = counterexample_measures(eps)?;
                let (ab, d1) = tilde_kr(&mu, &nu, p)?;
                let (bc, d2) = tilde_kr(&nu, &eta, p)?;
                let (ac, d3) = tilde_kr(&mu, &eta, p)?;
                print_json(json!({
                    "eps": eps, "p": p, "mu_nu": ab, "nu_eta": bc, "mu_eta": ac,
                    "triangle_violated": ab + bc < ac,
                    "stage_optima_unique": d1.all_unique() && d2.all_unique() && d3.all_unique(),
                }));
            }
            _ => bail!("give both measures or neither"),
        },
        Command::Experiment { name, p, json, csv, k, n_max, eps, levels, steps } => {
            let rep = run_experiment(name, p, k, n_max, &eps, levels, steps)?;
            if let Some(path) = &csv {
                emit(Some(path), &rep.rows_csv())?;
            }
            match &json {
                Some(path) => emit(Some(path), &(rep.to_json() + "\n"))?,
                None => println!("{}", rep.to_json()),
            }
            let failed: Vec<_> = rep.failures().collect();
            for a in &failed {
                eprintln!("FAIL {}: got {}, expected {} ({:?}, tol {})", a.claim, a.got, a.expected, a.relation, a.tol);
            }
            if !failed.is_empty() {
                bail!("{} of {} assertions failed", failed.len(), rep.assertions.len());
            }
        }
        Command::ExportCsv { measure } => print!("{}", load(&measure)?.to_csv()),
    }
    Ok(())
}
