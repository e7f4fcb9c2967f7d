//! Dense reference constructions shared by the integration tests. Nothing here
//! goes through the library's matrix-free operators or eigensolvers.

#![allow(dead_code)]

use std::f64::consts::PI;

use ffcorr::{HamiltonianSpec, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = DMatrix<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn digits(mut index: usize, n: usize, s: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for k in (0..n).rev() {
        d[k] = index % s;
        index /= s;
    }
    d
}

/// `M` on 1-based `sites`, identity elsewhere, built entry by entry.
pub fn embed(n: usize, s: usize, sites: &[usize], m: &Dense) -> Dense {
    let dim = s.pow(n as u32);
    let mut out = Dense::zeros(dim, dim);
    let digit_rows: Vec<Vec<usize>> = (0..dim).map(|i| digits(i, n, s)).collect();
    for r in 0..dim {
        for col in 0..dim {
            let (dr, dc) = (&digit_rows[r], &digit_rows[col]);
            let outside_equal = (0..n)
                .filter(|k| !sites.contains(&(k + 1)))
                .all(|k| dr[k] == dc[k]);
            if !outside_equal {
                continue;
            }
            let sub = |d: &[usize]| sites.iter().fold(0, |acc, &j| acc * s + d[j - 1]);
            out[(r, col)] = m[(sub(dr), sub(dc))];
        }
    }
    out
}

pub fn term_dense(spec: &HamiltonianSpec, t: usize) -> Dense {
    let term = &spec.terms[t];
    embed(spec.n, spec.local_dim, &term.sites, &term.matrix)
}

pub fn hamiltonian_dense(spec: &HamiltonianSpec) -> Dense {
    let dim = spec.dim();
    (0..spec.terms.len()).fold(Dense::zeros(dim, dim), |acc, t| acc + term_dense(spec, t))
}

/// `Π_{i ∈ layer} (1 − H_i)`
pub fn layer_dense(spec: &HamiltonianSpec, layer: &[usize]) -> Dense {
    let dim = spec.dim();
    layer.iter().fold(Dense::identity(dim, dim), |acc, &t| {
        (Dense::identity(dim, dim) - term_dense(spec, t)) * acc
    })
}

/// `L_c···L_1` with `layers[0]` acting first.
pub fn p_dense(spec: &HamiltonianSpec, layers: &[Vec<usize>]) -> Dense {
    let dim = spec.dim();
    layers.iter().fold(Dense::identity(dim, dim), |acc, l| {
        layer_dense(spec, l) * acc
    })
}

/// Ascending eigenvalues and matching eigenvector columns.
pub fn eigh(m: &Dense) -> (Vec<f64>, Dense) {
    let sym = (m + m.adjoint()) * c(0.5);
    let e = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = Dense::from_columns(
        &order
            .iter()
            .map(|&i| e.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

pub fn spectral_function(m: &Dense, f: impl Fn(f64) -> f64) -> Dense {
    let (vals, vecs) = eigh(m);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&x| c(f(x))));
    &vecs * Dense::from_diagonal(&d) * vecs.adjoint()
}

/// Ground projector and gap of a dense Hamiltonian.
pub fn ground_dense(h: &Dense, zero_tol: f64) -> (Dense, usize, f64) {
    let (vals, vecs) = eigh(h);
    let k = vals.iter().take_while(|&&v| v <= zero_tol).count();
    let g = vecs.columns(0, k).into_owned();
    let gap = vals.get(k).copied().unwrap_or(f64::INFINITY);
    (&g * g.adjoint(), k, gap)
}

pub fn spectral_norm(m: &Dense) -> f64 {
    m.clone().singular_values().max()
}

/// Chebyshev polynomial of the first kind from its trigonometric forms.
pub fn chebyshev_trig(m: usize, x: f64) -> f64 {
    let mf = m as f64;
    if x.abs() <= 1.0 {
        (mf * x.acos()).cos()
    } else if x > 1.0 {
        (mf * x.acosh()).cosh()
    } else {
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (mf * (-x).acosh()).cosh()
    }
}

/// Shifted, normalized Chebyshev filter with `Q(1) = 1`.
pub fn qm_trig(m: usize, delta: f64, x: f64) -> f64 {
    let y = |x: f64| 2.0 * x / (1.0 - delta) - 1.0;
    chebyshev_trig(m, y(x)) / chebyshev_trig(m, y(1.0))
}

pub fn xxz_gap_reference(q: f64, n: usize) -> f64 {
    1.0 - 2.0 * (PI / n as f64).cos() / (q + 1.0 / q)
}

pub fn random_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect()
}

pub fn dense_apply(m: &Dense, v: &[C64]) -> Vec<C64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

pub fn max_entry_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// One line per acceptance criterion.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name}: {detail}");
}
