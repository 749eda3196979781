use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss-Hermite rule for weight `exp(-x^2)`: nodes ascending, weights
/// summing to `sqrt(pi)`.
///
/// Golub-Welsch gives starting nodes; each node is then polished by Newton
/// steps on the orthonormal Hermite recurrence, and weights come from the
/// Christoffel function so they stay accurate at large `n`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut weights = vec![0.0; n];
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..4 {
            let (pn, pn1, _) = hermite_orthonormal(n, *x);
            let step = pn / ((2.0 * n as f64).sqrt() * pn1);
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
        *w = 1.0 / hermite_orthonormal(n, *x).2;
    }
    // Enforce exact symmetry of the rule.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Orthonormal Hermite polynomials at `x`: returns `(p_n, p_{n-1}, sum_{k<n} p_k^2)`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Rule for `E[f(Z)]`, `Z ~ N(0, 1)`: nodes `sqrt(2) x_i`, weights summing to one.
pub fn normal_expectation_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_hermite(n);
    let norm = PI.sqrt();
    (
        x.iter().map(|v| v * 2f64.sqrt()).collect(),
        w.iter().map(|v| v / norm).collect(),
    )
}

/// Trapezoid weights on an arbitrary increasing grid. A single point gets
/// unit weight so that ratios of sums remain meaningful.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n == 1 {
        return vec![1.0];
    }
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Pairwise (cascade) summation: the result depends only on the order of
/// `values`, never on how work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
