//! Replica fan-out. Each replica gets its own seed (`master ^ index`) and the
//! results come back in index order whatever the scheduling, so every
//! reduction downstream is deterministic.

use crate::error::Result;
use crate::rng::replica_seed;

/// Run `f(index, seed)` for `index in 0..count`; the first error by index wins.
pub fn run_replicas<T, F>(count: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    let job = |i: usize| f(i, replica_seed(master_seed, i as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(job).collect()
    }
}

/// Run `f` on a dedicated pool of `threads` workers (`0` = library default).
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    Ok(f())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn order_and_seeds() {
        let out = run_replicas(50, 0xABCD, |i, s| Ok((i, s))).unwrap();
        for (k, &(i, s)) in out.iter().enumerate() {
            assert_eq!(i, k);
            assert_eq!(s, 0xABCD ^ k as u64);
        }
    }

    #[test]
    fn first_error_by_index() {
        let r: Result<Vec<()>> = run_replicas(20, 1, |i, _| {
            if i % 7 == 3 {
                Err(Error::InvalidInput(format!("replica {i}")))
            } else {
                Ok(())
            }
        });
        match r {
            Err(Error::InvalidInput(msg)) => assert_eq!(msg, "replica 3"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let f = || run_replicas(30, 9, |i, s| Ok(s.wrapping_mul(i as u64 + 1))).unwrap();
        assert_eq!(with_threads(1, f).unwrap(), with_threads(3, f).unwrap());
    }
}
