//! Convention constants shared by the sampler, the curvature density and the
//! η estimators. They are pinned by the product-disc calibration tests in
//! `tests/calibration.rs`; change them only together with those tests.

use sha2::{Digest, Sha256};

pub const CONSTANTS_VERSION: &str = "1";

/// Variance factor of the Gaussian flow-time increment: each real component
/// of dτ has variance `C0_STEP_VARIANCE · dt · η² / ‖Z‖²`.
pub const C0_STEP_VARIANCE: f64 = 2.0;

/// Factor turning the flat ∂∂̄ in flow time into the generator of the
/// hyperbolic heat semigroup: generator = `C_GEN · (η/‖Z‖)² · ∂_τ∂_τ̄`.
pub const C_GEN: f64 = 4.0;

/// Ratio between the generator of the tabulated heat kernel and the
/// operator defined by `(Δ f) g = i∂∂̄f` for the curvature −1 disc metric.
pub const GENERATOR_RATIO: f64 = 2.0;

/// Length convention: η = `C_LEN` · (derivative norm at 0 of a disc map
/// from the unit disc).
pub const C_LEN: f64 = 0.5;

/// Singular-proximity radius in chart coordinates. Hyperbolic singularities
/// are cusp-like for the leafwise metric, so hitting rates fall only like
/// 1/log(1/r); the radius sits well below the η asymptotic region.
pub const PROXIMITY_RADIUS: f64 = 1e-12;

/// Upper cap on the hyperbolic time step.
pub const DT_MAX: f64 = 0.01;

/// Factor in the distance-based time step cap `β · s² / η²`.
pub const DT_BETA: f64 = 0.05;

/// Threshold on `|Im(λ₁/λ₂)|` separating hyperbolic singularities.
pub const TOL_IMAG: f64 = 1e-6;

/// Relative tolerance of the flow integrator.
pub const FLOW_RTOL: f64 = 1e-10;

fn table() -> String {
    format!(
        "version={CONSTANTS_VERSION}\nc0={C0_STEP_VARIANCE:e}\nc_gen={C_GEN:e}\n\
         generator_ratio={GENERATOR_RATIO:e}\nc_len={C_LEN:e}\nproximity={PROXIMITY_RADIUS:e}\n\
         dt_max={DT_MAX:e}\ndt_beta={DT_BETA:e}\ntol_imag={TOL_IMAG:e}\nflow_rtol={FLOW_RTOL:e}\n"
    )
}

/// Hex SHA-256 of the constants table, embedded in every output artifact.
pub fn constants_hash() -> String {
    let digest = Sha256::digest(table().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
