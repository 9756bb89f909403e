//! Thread-pool execution of solver sweeps, campaigns and profiles. Results
//! are assembled in index order, so output does not depend on the worker
//! count.

use rayon::prelude::*;
use speedcas_core::encounters::Encounter;
use speedcas_core::metrics::{profile_axis, profile_cell, ProfileCell, ProfileParams};
use speedcas_core::rng::sub_seed;
use speedcas_core::simulator::{Campaign, SimConfig, SimResult};
use speedcas_core::solver::{StagedMdp, SweepExecutor};
use speedcas_core::QTable;

use crate::error::{Error, Result};

/// Backs up blocks of a stage across the current rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl SweepExecutor for Parallel {
    fn backup_stage<M: StagedMdp + Sync>(
        &self,
        mdp: &M,
        stage: usize,
        prev_v: &[f64],
        out: &mut [f64],
    ) -> speedcas_core::Result<()> {
        let chunk = mdp.block_len() * mdp.action_count();
        out.par_chunks_mut(chunk)
            .enumerate()
            .try_for_each(|(b, slot)| mdp.backup_block(stage, b, prev_v, slot))
    }
}

/// Runs `f` on a pool with `jobs` workers, or rayon's default when `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::usage("jobs must be at least 1"));
        }
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::usage(format!("cannot start {jobs:?} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Parallel counterpart of `simulator::run_set` with identical output.
pub fn run_set(
    encounters: &[Encounter],
    ownship_logics: &[&QTable],
    cfg: &SimConfig,
    base_seed: u64,
) -> Result<Vec<SimResult>> {
    if encounters.is_empty() {
        return Err(Error::usage("encounter set is empty"));
    }
    let c = Campaign {
        ownship: ownship_logics,
        cfg,
        base_seed,
    };
    c.validate()?;
    let slots: Vec<_> = (0..c.result_count(encounters.len()))
        .into_par_iter()
        .map(|i| c.run_slot(encounters, i))
        .collect();
    Ok(slots.into_iter().collect::<speedcas_core::Result<Vec<_>>>()?)
}

/// Parallel counterpart of `metrics::alerting_profile` with identical output.
pub fn alerting_profile(
    tables: &[&QTable],
    cfg: &SimConfig,
    p: &ProfileParams,
    seed: u64,
) -> Result<Vec<ProfileCell>> {
    let axis = profile_axis(p)?;
    let n = axis.len();
    let cells: Vec<_> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (cross, along) = (axis[k / n], axis[k % n]);
            profile_cell(tables, cfg, p, along, cross, sub_seed(seed, k as u64)).map(|alerted| ProfileCell {
                cross_nmi: cross,
                along_nmi: along,
                alerted,
            })
        })
        .collect();
    Ok(cells.into_iter().collect::<speedcas_core::Result<Vec<_>>>()?)
}
