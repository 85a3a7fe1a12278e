//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it, or
//! inside [`sequential`], they run on the calling thread. Every helper writes
//! per-index results into its own slot, so outputs never depend on the number
//! of workers.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with all helpers in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let _reset = Reset(prev);
    f()
}

/// True when helpers will fan out to worker threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// `(0..n).map(f).collect()`, possibly in parallel; order preserved.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fills `out[i] = f(i)`, possibly in parallel.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        return;
    }
    out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
}

/// Applies `f` to consecutive chunks of `out` of length `chunk`.
pub fn for_each_chunk<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_scope_restores_flag() {
        let outer = is_parallel();
        sequential(|| assert!(!is_parallel()));
        assert_eq!(is_parallel(), outer);
    }

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(1000, |i| i * 3);
        let s = sequential(|| map_range(1000, |i| i * 3));
        assert_eq!(v, s);
        assert_eq!(v[999], 2997);
    }
}
