//! Per-tree fitting on a thread pool. Trees are independent, and the final
//! reduction runs in tree order, so the result matches the sequential fit
//! bit for bit.

use rayon::prelude::*;
use treehfd_core::{fit_tree_hfd, reduce_tree_components, Decomposition, Ensemble, Matrix, SolveParams};

use crate::error::{Error, Result};

/// Environment variable read when no explicit thread count is given.
pub const THREADS_ENV: &str = "TREEHFD_THREADS";

/// `threads = None` falls back to `TREEHFD_THREADS`, then to rayon's default.
pub fn fit_ensemble_hfd_parallel(
    ensemble: &Ensemble,
    data: &Matrix,
    params: &SolveParams,
    threads: Option<usize>,
) -> Result<Decomposition> {
    params.validate()?;
    if data.cols() != ensemble.n_features() {
        return Err(treehfd_core::Error::Input(format!(
            "data has {} columns, the model expects {}",
            data.cols(),
            ensemble.n_features()
        ))
        .into());
    }
    if data.rows() == 0 {
        return Err(treehfd_core::Error::EmptyData.into());
    }
    let threads = match threads {
        Some(n) => n,
        None => threads_from_env()?.unwrap_or(0),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::parse(THREADS_ENV, e.to_string()))?;
    let per_tree = pool.install(|| {
        ensemble
            .trees()
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let mut c = fit_tree_hfd(t, data, params)?;
                c.tree = i;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(reduce_tree_components(ensemble, per_tree, data, params)?)
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::parse(THREADS_ENV, format!("\"{s}\" is not a thread count"))),
        Err(_) => Ok(None),
    }
}
