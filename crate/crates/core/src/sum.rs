use std::ops::Add;

/// Pairwise (cascade) summation with a tree fixed by index, so the result
/// depends only on the input order.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Add<Output = T> + Default,
{
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::default(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
