//! Leaf navigation by complex-time flows, holonomy accumulation and
//! leafwise Brownian motion.

mod check;
mod curvature;
mod flow;
mod sampler;

pub use check::{verify_local_model, LocalModelReport, CURVATURE_TOLERANCE, HOLONOMY_TOLERANCE};
pub use curvature::{
    clock_density, induced_curvature_term,
    curvature_density, curvature_density_analytic, preferred_section, weight_laplacian, weight_laplacian_analytic,
    Section,
};
pub use flow::{flow_step, flow_step_with, holonomy_variational, FlowOptions, FlowSegment};
pub use sampler::{
    bm_step_leafwise, draw_increment, holonomy_along, path_rng, sample_leaf_path, shift_path, write_paths_csv,
    EtaProvider, Holonomic, LeafSampler, LeafStep, PathNode, PathSample, SamplerConfig, StepRecord, Termination,
};
