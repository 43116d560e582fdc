use crate::error::{Error, Result};
use crate::topology::RoundGraph;

const TOLERANCE: f64 = 1e-9;
const MAX_ITERS: usize = 100_000;

/// Dense equal-weight mixing matrix: `W[i][j] = 1 / (deg(i) + 1)` for
/// `j` in `N(i) ∪ {i}`.
pub fn mixing_matrix(graph: &RoundGraph) -> Vec<Vec<f64>> {
    let n = graph.n();
    let adj = graph.out_adjacency();
    (0..n)
        .map(|i| {
            let w = 1.0 / (adj[i].len() + 1) as f64;
            let mut row = vec![0.0; n];
            row[i] = w;
            for &j in &adj[i] {
                row[j] = w;
            }
            row
        })
        .collect()
}

/// `1 - |lambda_2(W)|` for the equal-weight mixing matrix of an undirected
/// connected graph.
///
/// `W = D^-1 (A + I)` with `D = diag(deg + 1)` is similar to the symmetric
/// `S = D^-1/2 (A + I) D^-1/2`, whose top eigenvector is `sqrt(deg + 1)`.
/// Power iteration on `S^2` restricted to the complement of that vector
/// converges to the second-largest eigenvalue modulus squared; iteration
/// stops once the residual `||S^2 v - theta v||` drops below `1e-9 * theta`.
pub fn spectral_gap(graph: &RoundGraph) -> Result<f64> {
    if graph.is_directed() {
        return Err(Error::DirectedGraph);
    }
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.n();
    let adj = graph.out_adjacency();
    let scale: Vec<f64> = adj.iter().map(|l| 1.0 / ((l.len() + 1) as f64).sqrt()).collect();
    let top: Vec<f64> = {
        let raw: Vec<f64> = adj.iter().map(|l| ((l.len() + 1) as f64).sqrt()).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw.iter().map(|x| x / norm).collect()
    };
    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut acc = scale[i] * v[i];
            for &j in &adj[i] {
                acc += scale[j] * v[j];
            }
            out[i] = scale[i] * acc;
        }
    };
    let deflate = |v: &mut [f64]| {
        let dot: f64 = v.iter().zip(&top).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(&top).for_each(|(a, b)| *a -= dot * b);
    };
    let normalize = |v: &mut [f64]| -> f64 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        norm
    };

    // deterministic start with a component along every direction
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract() - 0.5).collect();
    deflate(&mut v);
    if normalize(&mut v) == 0.0 {
        return Ok(1.0);
    }
    let mut mid = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut theta = 0.0;
    for _ in 0..MAX_ITERS {
        apply(&v, &mut mid);
        apply(&mid, &mut w);
        deflate(&mut w);
        theta = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let residual = w.iter().zip(&v).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
        if theta <= f64::MIN_POSITIVE || residual <= TOLERANCE * theta {
            break;
        }
        std::mem::swap(&mut v, &mut w);
        if normalize(&mut v) == 0.0 {
            theta = 0.0;
            break;
        }
    }
    Ok(1.0 - theta.max(0.0).sqrt())
}
