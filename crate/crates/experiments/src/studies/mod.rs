//! The experiment studies. Each returns its rows in trial order regardless of
//! how many threads ran the trials.

pub mod outlier;
pub mod partial;
pub mod perturb;
pub mod register;
pub mod sweep;
pub mod train;

use rayon::prelude::*;

use crate::report::Row;

/// Runs `f` on every job in parallel and concatenates the rows in job order.
pub(crate) fn par_rows<T: Sync>(jobs: &[T], f: impl Fn(&T) -> Vec<Row> + Sync + Send) -> Vec<Row> {
    jobs.par_iter().map(f).collect::<Vec<_>>().concat()
}
