//! Estimation of the Poincaré density η: the ratio of ambient length to
//! leafwise hyperbolic length.

pub mod taylor;
mod cache;
mod disc;

pub use disc::{
    eta_chain_refine, eta_chain_refine_with, eta_flow_disc, eta_flow_disc_with, eta_reference_exact, flow_radius,
    linear_model_eta, DiscConfig, EtaEstimate, EtaMethod,
};
pub use cache::{log_star, AsymptoticFit, CacheSummary, CacheValidation, EtaCache, GridSpec};
