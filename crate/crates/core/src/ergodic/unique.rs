use serde::{Deserialize, Serialize};

use super::lyapunov::{run_ensemble, EnsembleConfig};
use super::occupation::{tv_distance, OccupationGrid};
use crate::error::{Error, Result};
use crate::foliation::{ChartPoint, PolyFoliation, SingularSet};
use crate::leafwise::EtaProvider;

/// Pairwise comparison of occupation grids grown from distinct starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniqueErgodicityReport {
    pub horizon: f64,
    pub starts: Vec<ChartPoint>,
    pub paths_per_start: usize,
    /// Symmetric, zero diagonal.
    pub tv_matrix: Vec<Vec<f64>>,
    pub max_tv: f64,
    /// Expected TV between two independent grids of the same size from the
    /// same start, estimated from split halves.
    pub noise_floor: f64,
}

/// Seed of the second half of each per-start ensemble.
fn second_half_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs `cfg.n_paths` paths from each start (two halves with independent
/// seeds) and reports the pairwise TV distances between the normalized
/// occupation grids. Every start uses the same seeds, so identical starts
/// give identical grids.
pub fn unique_ergodicity_diagnostic(
    fol: &PolyFoliation,
    singular: &SingularSet,
    starts: &[ChartPoint],
    eta: &dyn EtaProvider,
    cfg: &EnsembleConfig,
) -> Result<UniqueErgodicityReport> {
    if starts.len() < 2 {
        return Err(Error::input("need at least two starts"));
    }
    if cfg.n_paths < 2 {
        return Err(Error::input("need at least two paths per start"));
    }
    let first = EnsembleConfig { n_paths: cfg.n_paths / 2, ..*cfg };
    let second = EnsembleConfig { n_paths: cfg.n_paths - cfg.n_paths / 2, seed: second_half_seed(cfg.seed), ..*cfg };
    let mut grids: Vec<OccupationGrid> = Vec::with_capacity(starts.len());
    let mut half_tv = 0.0;
    for s in starts {
        let a = run_ensemble(fol, singular, std::slice::from_ref(s), eta, &first)?.grid;
        let b = run_ensemble(fol, singular, std::slice::from_ref(s), eta, &second)?.grid;
        half_tv += tv_distance(&a, &b)?;
        let mut g = a;
        g.merge(&b)?;
        grids.push(g);
    }
    let k = starts.len();
    let mut tv_matrix = vec![vec![0.0; k]; k];
    let mut max_tv: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let d = tv_distance(&grids[i], &grids[j])?;
            tv_matrix[i][j] = d;
            tv_matrix[j][i] = d;
            max_tv = max_tv.max(d);
        }
    }
    Ok(UniqueErgodicityReport {
        horizon: cfg.horizon,
        starts: starts.to_vec(),
        paths_per_start: cfg.n_paths,
        tv_matrix,
        max_tv,
        // TV of independent histograms scales like n^{-1/2}.
        noise_floor: half_tv / k as f64 / std::f64::consts::SQRT_2,
    })
}
