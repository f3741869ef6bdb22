//! Knothe–Rosenblatt couplings and distances, adapted Wasserstein distances
//! and related tools for finitely supported measures on path space.

pub mod adapted;
pub mod analysis;
pub mod error;
pub mod experiments;
pub mod kr;
pub mod measure;
pub mod multidim;
pub mod quantile;
pub mod sampling;
pub mod transport;

pub use adapted::{adapted_variation, aw_bruteforce, aw_distance, w_distance, AdaptedDistance};
pub use analysis::{equivalence_bound, lipschitz_constant, modulus, stage_modulus, ModulusQuery};
pub use error::{Error, Result};
pub use experiments::{Assertion, ExperimentReport, Relation};
pub use kr::{barycenter, geodesic_point, is_markov, is_martingale, kr_coupling, kr_distance, Coupling};
pub use measure::{disintegrate, flatten, parse_measure, serialize_measure, KernelTree, PathMeasure};
pub use multidim::{
    counterexample_measures, kr_distance_multi, multi_quantile_process, optimal_map, tilde_kr, GridReference,
    MultiQuantileProcess, TildeDiagnostics,
};
pub use quantile::{
    convex_combine, map_distance, pushforward, quantile_1d, quantile_process, QuantileFunction1D, QuantileProcess,
    TriangularMap,
};
pub use transport::{ot_1d, ot_exact, CostMatrix, StagePlan};
