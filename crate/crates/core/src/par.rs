//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper maps an index range to independently computed items, so the
//! output is bitwise identical whatever the thread count. Work only fans out
//! when the caller runs inside a pool created by [`with_threads`] with more
//! than one worker; calls from a plain thread stay sequential. Without the
//! `parallel` feature everything is sequential.

/// Runs `f` with at most `threads` worker threads available to the helpers
/// in this module.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if threads > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
    }
    let _ = threads;
    f()
}

/// Number of threads requested through `OSMOFLOW_THREADS` (default 1).
pub fn threads_from_env() -> usize {
    std::env::var("OSMOFLOW_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

#[cfg(feature = "parallel")]
fn in_pool() -> bool {
    rayon::current_thread_index().is_some() && rayon::current_num_threads() > 1
}

/// `(0..n).map(f).collect()`, in parallel when allowed.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if in_pool() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Fills `out` chunk by chunk; chunk `k` is `out[k*chunk..(k+1)*chunk]`.
pub fn fill_chunks<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if in_pool() {
            use rayon::prelude::*;
            out.par_chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
            return;
        }
    }
    out.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let work = |i: usize| (0..200).map(|k| ((i * 31 + k) as f64).sin()).sum::<f64>();
        let seq = map_range(1000, work);
        let par = with_threads(4, || map_range(1000, work));
        assert_eq!(seq, par);

        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        fill_chunks(&mut a, 8, |k, c| c.iter_mut().enumerate().for_each(|(j, v)| *v = (k * 8 + j) as f64));
        with_threads(3, || {
            fill_chunks(&mut b, 8, |k, c| c.iter_mut().enumerate().for_each(|(j, v)| *v = (k * 8 + j) as f64))
        });
        assert_eq!(a, b);
    }
}
