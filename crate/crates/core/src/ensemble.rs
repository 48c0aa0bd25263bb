//! Deterministic parallel execution of trajectory ensembles.
//!
//! Trajectories are split into fixed-size blocks. Each block is folded
//! sequentially in index order and block results are combined in block
//! order, so the output is bit-identical for any thread count.

use rayon::prelude::*;

use crate::error::Result;

/// Trajectories folded together before a block result is emitted.
pub const BLOCK: usize = 64;

/// Folds `f(i)` for `i in 0..n` into an accumulator with an order-fixed
/// reduction. `fold` absorbs one trajectory, `merge` appends a later block.
pub fn reduce_ordered<A, T, F, G, H>(
    n: usize,
    init: impl Fn() -> A + Sync,
    f: F,
    fold: G,
    merge: H,
) -> Result<A>
where
    A: Send,
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
    G: Fn(&mut A, T) + Sync,
    H: Fn(&mut A, A),
{
    let blocks: Vec<Result<A>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                fold(&mut acc, f(i)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = init();
    for block in blocks {
        merge(&mut total, block?);
    }
    Ok(total)
}

/// `f(i)` for every `i`, in index order.
pub fn map_ordered<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Element-wise running sums of per-trajectory observable vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSum<T> {
    pub sums: Vec<T>,
    pub count: usize,
}

impl<T: Copy + Default + std::ops::AddAssign> SeriesSum<T> {
    pub fn new(len: usize) -> Self {
        Self {
            sums: vec![T::default(); len],
            count: 0,
        }
    }

    pub fn add(&mut self, values: &[T]) {
        debug_assert_eq!(values.len(), self.sums.len());
        self.sums.iter_mut().zip(values).for_each(|(s, v)| *s += *v);
        self.count += 1;
    }

    pub fn merge(&mut self, other: SeriesSum<T>) {
        self.sums
            .iter_mut()
            .zip(&other.sums)
            .for_each(|(s, v)| *s += *v);
        self.count += other.count;
    }
}
