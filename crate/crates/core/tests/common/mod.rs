//! Generators and independent reference computations shared by the
//! integration tests. The graph oracles below use plain nested loops over
//! `Vec<Vec<f64>>` and none of the library's kernels.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use unignn::autodiff::Matrix;
use unignn::hypergraph::IncidenceStructure;

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix<f64>) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn from_dense(d: &Dense) -> Matrix<f64> {
    Matrix::from_rows(d)
}

pub fn random_dense(rng: &mut impl Rng, rows: usize, cols: usize) -> Dense {
    (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

pub fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random hypergraph with `m` edges of size 1..=max_size (duplicates allowed).
pub fn random_hypergraph(rng: &mut impl Rng, n: usize, m: usize, max_size: usize) -> IncidenceStructure {
    let edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let k = rng.gen_range(1..=max_size.min(n));
            let mut pool: Vec<usize> = (0..n).collect();
            pool.shuffle(rng);
            pool.truncate(k);
            pool
        })
        .collect();
    IncidenceStructure::build(n, &edges).unwrap()
}

pub fn random_permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// `k`-uniform hypergraph where every vertex lies in exactly `r` edges
/// (`n * r` divisible by `k`), or `None` if sampling kept failing.
pub fn random_regular_uniform(rng: &mut impl Rng, n: usize, k: usize, r: usize) -> Option<IncidenceStructure> {
    if !(n * r).is_multiple_of(k) {
        return None;
    }
    'attempt: for _ in 0..200 {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, r)).collect();
        stubs.shuffle(rng);
        let mut edges = Vec::new();
        for chunk in stubs.chunks(k) {
            let mut e = chunk.to_vec();
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                continue 'attempt;
            }
            edges.push(e);
        }
        return Some(IncidenceStructure::build(n, &edges).unwrap());
    }
    None
}

/// Symmetric adjacency lists without self-loops.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

fn matvec_rows(x: &Dense, w: &Dense) -> Dense {
    x.iter()
        .map(|row| {
            (0..w[0].len())
                .map(|c| row.iter().enumerate().map(|(k, v)| v * w[k][c]).sum())
                .collect()
        })
        .collect()
}

fn add_scaled(acc: &mut [f64], v: &[f64], s: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += s * b;
    }
}

/// `sum_{j in N(i) + i} W x_j / sqrt(d_i d_j)` with `d = |N| + 1`.
pub fn gcn_direct(adj: &[Vec<usize>], x: &Dense, w: &Dense) -> Dense {
    let xw = matvec_rows(x, w);
    let deg: Vec<f64> = adj.iter().map(|a| a.len() as f64 + 1.0).collect();
    (0..adj.len())
        .map(|i| {
            let mut out = vec![0.0; xw[0].len()];
            for &j in adj[i].iter().chain(std::iter::once(&i)) {
                add_scaled(&mut out, &xw[j], 1.0 / (deg[i] * deg[j]).sqrt());
            }
            out
        })
        .collect()
}

/// Single-head attention over `N(i) + i` with scores
/// `leaky_0.2(a_self . W x_i + a_nb . W x_j)`.
pub fn gat_direct(adj: &[Vec<usize>], x: &Dense, w: &Dense, a: &[f64]) -> Dense {
    let xw = matvec_rows(x, w);
    let d = xw[0].len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    (0..adj.len())
        .map(|i| {
            let nb: Vec<usize> = adj[i].iter().copied().chain(std::iter::once(i)).collect();
            let scores: Vec<f64> = nb
                .iter()
                .map(|&j| {
                    let s = dot(&a[..d], &xw[i]) + dot(&a[d..], &xw[j]);
                    if s > 0.0 {
                        s
                    } else {
                        0.2 * s
                    }
                })
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
            let mut out = vec![0.0; d];
            for (k, &j) in nb.iter().enumerate() {
                add_scaled(&mut out, &xw[j], (scores[k] - max).exp() / z);
            }
            out
        })
        .collect()
}

/// `W((1 + eps) x_i + sum_{j in N(i)} x_j)`.
pub fn gin_direct(adj: &[Vec<usize>], x: &Dense, w: &Dense, eps: f64) -> Dense {
    let pre: Dense = (0..adj.len())
        .map(|i| {
            let mut v: Vec<f64> = x[i].iter().map(|t| (1.0 + eps) * t).collect();
            for &j in &adj[i] {
                add_scaled(&mut v, &x[j], 1.0);
            }
            v
        })
        .collect();
    matvec_rows(&pre, w)
}

/// `W(x_i + sum_{j in N(i)} x_j)`.
pub fn sage_direct(adj: &[Vec<usize>], x: &Dense, w: &Dense) -> Dense {
    gin_direct(adj, x, w, 0.0)
}

/// Row `sigma[v]` of the result is row `v` of `x`.
pub fn permute_rows(x: &Matrix<f64>, sigma: &[usize]) -> Matrix<f64> {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for (v, &t) in sigma.iter().enumerate() {
        out.row_mut(t).copy_from_slice(x.row(v));
    }
    out
}

pub fn column_sums(x: &Matrix<f64>) -> Vec<f64> {
    (0..x.cols()).map(|c| (0..x.rows()).map(|r| x.get(r, c)).sum()).collect()
}

/// `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
