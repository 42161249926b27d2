//! Deterministic block-parallel map over scoped threads.

use crate::error::Result;

/// Evaluates `f(0..n)` on up to `threads` workers and returns the results in index order.
/// Worker `t` handles indices `t, t + threads, ...`, so the output does not depend on the
/// thread count.
pub fn map_blocks<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(&f).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let f = &f;
                scope.spawn(move || (t..n).step_by(threads).map(|i| (i, f(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker thread panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every index is visited")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_threads() {
        let one = map_blocks(17, 1, |i| Ok(i * i)).unwrap();
        let four = map_blocks(17, 4, |i| Ok(i * i)).unwrap();
        assert_eq!(one, four);
        assert!(map_blocks(3, 2, |i| if i == 1 { Err(crate::Error::Config("x".into())) } else { Ok(i) }).is_err());
        assert!(map_blocks::<usize, _>(0, 3, |i| Ok(i)).unwrap().is_empty());
    }
}
