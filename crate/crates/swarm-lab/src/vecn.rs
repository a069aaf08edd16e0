//! Small helpers for flat `[f64]` buffers holding N stacked d-vectors.

/// Euclidean inner product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Squared distance between the i-th and j-th d-blocks of `xs`.
pub fn dist2(xs: &[f64], d: usize, i: usize, j: usize) -> f64 {
    let (a, b) = (&xs[i * d..(i + 1) * d], &xs[j * d..(j + 1) * d]);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(xs: &[f64], d: usize, i: usize, j: usize) -> f64 {
    dist2(xs, d, i, j).sqrt()
}

/// Mean of the N d-blocks of `xs`.
pub fn block_mean(xs: &[f64], d: usize, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for i in 0..n {
        for k in 0..d {
            m[k] += xs[i * d + k];
        }
    }
    for mk in &mut m {
        *mk /= n as f64;
    }
    m
}

/// Sum of per-block Euclidean norms (the mixed l1-l2 norm of a control).
pub fn block_norm_sum(us: &[f64], d: usize, n: usize) -> f64 {
    (0..n).map(|i| norm(&us[i * d..(i + 1) * d])).sum()
}

/// Pairwise spread `(1/n) sum_i ||v_i||^2 - ||vbar||^2` without allocating.
pub fn block_spread(v: &[f64], d: usize, n: usize) -> f64 {
    let mut per_agent = 0.0;
    for c in v {
        per_agent += c * c;
    }
    let mut mean2 = 0.0;
    for k in 0..d {
        let mut mk = 0.0;
        let mut i = k;
        while i < v.len() {
            mk += v[i];
            i += d;
        }
        mk /= n as f64;
        mean2 += mk * mk;
    }
    (per_agent / n as f64 - mean2).max(0.0)
}

/// Smallest pairwise block distance.
pub fn min_block_distance(xs: &[f64], d: usize, n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.min(dist2(xs, d, i, j));
        }
    }
    best.sqrt()
}

/// Largest block norm.
pub fn max_block_norm(xs: &[f64], d: usize, n: usize) -> f64 {
    (0..n)
        .map(|i| norm(&xs[i * d..(i + 1) * d]))
        .fold(0.0, f64::max)
}
