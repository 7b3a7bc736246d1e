//! Size rules of the scalable GP approximations, as functions of the
//! training-set size `n`.

/// Nearest-neighbour count of `local_nn_gp`: `min(max(30, floor(sqrt n)), 100)`.
pub fn local_neighbors(n: usize) -> usize {
    n.isqrt().max(30).min(100)
}

/// Subset size of `sod_gp`: `min(max(100, 2 floor(sqrt n)), 300, n - 1)`.
pub fn sod_subset(n: usize) -> usize {
    (2 * n.isqrt()).max(100).min(300).min(n.saturating_sub(1))
}

/// Random Fourier feature count of `rffgp`: `min(512, 2 floor(sqrt n))`.
pub fn rff_features(n: usize) -> usize {
    (2 * n.isqrt()).min(512)
}

/// Partition count of `rbcm`: `floor(sqrt(n) / 2)`, at least 1.
pub fn bcm_partitions(n: usize) -> usize {
    (n.isqrt() / 2).max(1)
}
