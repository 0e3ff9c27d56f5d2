//! Monte Carlo ergodic estimators: occupation measures, unique-ergodicity
//! and invariance diagnostics, Lyapunov exponents, expansion rates and the
//! cohomological formulas on the projective plane.

mod cocycle;
mod cohomology;
mod lyapunov;
mod occupation;
mod unique;

pub use cocycle::{
    check_cocycle_laws, expansion_rate, expansion_rate_averaged, CocycleEvaluator, CocyclePath, DiscGeodesic,
    DiscGeodesics, ExponentialCocycle, GeodesicSupply, HolonomyCocycle, IdentityCocycle, NoGeodesics, NoisyCocycle,
};
pub use cohomology::{cohomological_chi, mass_identity, MassIdentity};
pub use lyapunov::{
    estimate_lyapunov, lyapunov_report, run_ensemble, ClockCalibration, CrossCheck, Ensemble, EnsembleConfig, Estimate,
    Estimator, LyapunovReport, PathStats,
};
pub use occupation::{
    diffusion_check_points, diffusion_invariance_check, integrability_diagnostic, occupation_measure, tv_distance,
    uniform_grid_points, weight_w, weight_w_diagnostic, InvarianceReport, OccupationGrid, OccupationSpec,
};
pub use unique::{unique_ergodicity_diagnostic, UniqueErgodicityReport};
