//! Matrix-free operators on the `s^n`-dimensional state space.
//!
//! Basis convention: site 1 is the most significant digit of the basis
//! index in base `s`, so for `n = 2, s = 2` the ordering is
//! `|00>, |01>, |10>, |11>`. Every other module inherits this ordering.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{HamiltonianSpec, TermSpec};

pub type C64 = Complex64;

/// Default cutoff for [`dense_materialize`]; overridden by `FFCORR_DENSE_THRESHOLD`.
pub const DEFAULT_DENSE_THRESHOLD: usize = 4096;

pub const DENSE_THRESHOLD_ENV: &str = "FFCORR_DENSE_THRESHOLD";

pub fn dense_threshold() -> usize {
    std::env::var(DENSE_THRESHOLD_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_DENSE_THRESHOLD)
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn random_vector(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

/// Complex amplitudes over the full tensor-product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            amps: vec![C64::new(0.0, 0.0); dim],
        }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        Self { amps }
    }

    pub fn from_real(amps: &[f64]) -> Self {
        Self {
            amps: amps.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.amps[index] = C64::new(1.0, 0.0);
        v
    }

    /// Product basis state; `digits[j]` is the local level of site `j + 1`.
    pub fn product(s: usize, digits: &[usize]) -> Self {
        let dim = s.pow(digits.len() as u32);
        let index = digits.iter().fold(0, |acc, &d| acc * s + d);
        Self::basis(dim, index)
    }

    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Self::from_amplitudes(random_vector(dim, &mut rng));
        v.normalize();
        v
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn normalize(&mut self) {
        let nrm = self.norm();
        if nrm > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= nrm);
        }
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// A dense matrix acting on a subset of sites, embedded as `M ⊗ 1_rest`.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    dim: usize,
    matrix: DMatrix<C64>,
    /// Offset of each local configuration relative to a base index.
    offsets: Vec<usize>,
    /// Base indices: all global indices whose digits on the support are zero.
    bases: Vec<usize>,
}

impl LocalOperator {
    /// `sites` are 0-based and ordered; the first site is the most
    /// significant digit of the local matrix index.
    pub fn new(n: usize, s: usize, sites: &[usize], matrix: DMatrix<C64>) -> Result<Self> {
        let k = sites.len();
        let local_dim = s.pow(k as u32);
        if matrix.nrows() != local_dim || matrix.ncols() != local_dim {
            return Err(Error::DimensionMismatch {
                expected: local_dim,
                got: matrix.nrows(),
            });
        }
        if let Some(&bad) = sites.iter().find(|&&j| j >= n) {
            return Err(Error::Precondition(format!(
                "site {} outside chain of {n} sites",
                bad + 1
            )));
        }
        let dim = s.pow(n as u32);
        let strides: Vec<usize> = sites.iter().map(|&j| s.pow((n - 1 - j) as u32)).collect();
        let offsets = (0..local_dim)
            .map(|l| {
                let mut rem = l;
                let mut off = 0;
                for t in (0..k).rev() {
                    off += (rem % s) * strides[t];
                    rem /= s;
                }
                off
            })
            .collect();
        let bases = (0..dim)
            .filter(|&x| strides.iter().all(|&st| (x / st) % s == 0))
            .collect();
        Ok(Self {
            dim,
            matrix,
            offsets,
            bases,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    fn apply_with(&self, m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
        let ld = self.offsets.len();
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        let mut buf = vec![C64::new(0.0, 0.0); ld];
        for &base in &self.bases {
            for (b, off) in self.offsets.iter().enumerate() {
                buf[b] = v[base + off];
            }
            for (a, off) in self.offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (b, x) in buf.iter().enumerate() {
                    acc += m[(a, b)] * x;
                }
                out[base + off] = acc;
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_with(&self.matrix, v)
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply_with(&self.matrix.adjoint(), v)
    }
}

/// Extension point for operators defined outside this module.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64>;
}

/// Composable linear map exposed only through its action on vectors.
#[derive(Clone)]
pub enum LinearMap {
    Identity(usize),
    Zero(usize),
    Local(Arc<LocalOperator>),
    Diagonal(Arc<Vec<C64>>),
    Dense(Arc<DMatrix<C64>>),
    Sum(Vec<LinearMap>),
    /// Factors as written left to right; applied right to left.
    Product(Vec<LinearMap>),
    Adjoint(Box<LinearMap>),
    /// `alpha * 1 + beta * inner`
    Affine {
        alpha: C64,
        beta: C64,
        inner: Box<LinearMap>,
    },
    /// Orthogonal projector onto the span of orthonormal vectors.
    Projector {
        dim: usize,
        basis: Arc<Vec<StateVector>>,
    },
    Custom(Arc<dyn Operator>),
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinearMap::Identity(d) => write!(f, "Identity({d})"),
            LinearMap::Zero(d) => write!(f, "Zero({d})"),
            LinearMap::Local(op) => write!(f, "Local(dim={})", op.dim()),
            LinearMap::Diagonal(d) => write!(f, "Diagonal({})", d.len()),
            LinearMap::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            LinearMap::Sum(ms) => f.debug_tuple("Sum").field(ms).finish(),
            LinearMap::Product(ms) => f.debug_tuple("Product").field(ms).finish(),
            LinearMap::Adjoint(m) => f.debug_tuple("Adjoint").field(m).finish(),
            LinearMap::Affine { alpha, beta, inner } => f
                .debug_struct("Affine")
                .field("alpha", alpha)
                .field("beta", beta)
                .field("inner", inner)
                .finish(),
            LinearMap::Projector { dim, basis } => {
                write!(f, "Projector(dim={dim}, rank={})", basis.len())
            }
            LinearMap::Custom(op) => write!(f, "Custom(dim={})", op.dim()),
        }
    }
}

fn check_dims(maps: &[LinearMap]) -> Result<usize> {
    let dim = maps
        .first()
        .map(LinearMap::dim)
        .ok_or_else(|| Error::Precondition("empty operator list".into()))?;
    for m in maps {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
    }
    Ok(dim)
}

impl LinearMap {
    pub fn local(op: LocalOperator) -> Self {
        LinearMap::Local(Arc::new(op))
    }

    pub fn diagonal(values: Vec<C64>) -> Self {
        LinearMap::Diagonal(Arc::new(values))
    }

    pub fn dense(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        Ok(LinearMap::Dense(Arc::new(m)))
    }

    pub fn sum(maps: Vec<LinearMap>) -> Result<Self> {
        check_dims(&maps)?;
        Ok(LinearMap::Sum(maps))
    }

    /// `product(vec![a, b, c])` is `a·b·c`: `c` acts first on kets.
    pub fn product(maps: Vec<LinearMap>) -> Result<Self> {
        check_dims(&maps)?;
        Ok(LinearMap::Product(maps))
    }

    pub fn affine(alpha: f64, beta: f64, inner: LinearMap) -> Self {
        LinearMap::Affine {
            alpha: C64::new(alpha, 0.0),
            beta: C64::new(beta, 0.0),
            inner: Box::new(inner),
        }
    }

    pub fn scaled(beta: f64, inner: LinearMap) -> Self {
        Self::affine(0.0, beta, inner)
    }

    /// `self - other`
    pub fn minus(self, other: LinearMap) -> Result<Self> {
        Self::sum(vec![self, Self::scaled(-1.0, other)])
    }

    pub fn adjoint(&self) -> Self {
        match self {
            LinearMap::Adjoint(inner) => (**inner).clone(),
            other => LinearMap::Adjoint(Box::new(other.clone())),
        }
    }

    /// Projector onto the span of `basis`, which must be orthonormal.
    pub fn projector(dim: usize, basis: Vec<StateVector>) -> Result<Self> {
        if let Some(v) = basis.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        Ok(LinearMap::Projector {
            dim,
            basis: Arc::new(basis),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            LinearMap::Identity(d) | LinearMap::Zero(d) => *d,
            LinearMap::Local(op) => op.dim(),
            LinearMap::Diagonal(d) => d.len(),
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::Sum(ms) | LinearMap::Product(ms) => ms[0].dim(),
            LinearMap::Adjoint(m) => m.dim(),
            LinearMap::Affine { inner, .. } => inner.dim(),
            LinearMap::Projector { dim, .. } => *dim,
            LinearMap::Custom(op) => op.dim(),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, false)
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.apply_impl(v, true)
    }

    pub fn apply_state(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(StateVector::from_amplitudes(self.apply(v.amplitudes())))
    }

    fn apply_impl(&self, v: &[C64], adj: bool) -> Vec<C64> {
        match self {
            LinearMap::Identity(_) => v.to_vec(),
            LinearMap::Zero(d) => vec![C64::new(0.0, 0.0); *d],
            LinearMap::Local(op) => {
                if adj {
                    op.apply_adjoint(v)
                } else {
                    op.apply(v)
                }
            }
            LinearMap::Diagonal(d) => d
                .iter()
                .zip(v)
                .map(|(a, x)| if adj { a.conj() * x } else { a * x })
                .collect(),
            LinearMap::Dense(m) => {
                let x = nalgebra::DVector::from_column_slice(v);
                let y = if adj { m.adjoint() * x } else { m.as_ref() * x };
                y.as_slice().to_vec()
            }
            LinearMap::Sum(ms) => {
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                for m in ms {
                    let y = m.apply_impl(v, adj);
                    axpy(C64::new(1.0, 0.0), &y, &mut out);
                }
                out
            }
            LinearMap::Product(ms) => {
                let mut cur = v.to_vec();
                // (AB)† = B†A†: the adjoint applies factors left to right.
                if adj {
                    for m in ms {
                        cur = m.apply_impl(&cur, true);
                    }
                } else {
                    for m in ms.iter().rev() {
                        cur = m.apply_impl(&cur, false);
                    }
                }
                cur
            }
            LinearMap::Adjoint(m) => m.apply_impl(v, !adj),
            LinearMap::Affine { alpha, beta, inner } => {
                let (a, b) = if adj {
                    (alpha.conj(), beta.conj())
                } else {
                    (*alpha, *beta)
                };
                let mut out = if b == C64::new(0.0, 0.0) {
                    vec![C64::new(0.0, 0.0); v.len()]
                } else {
                    let mut y = inner.apply_impl(v, adj);
                    y.iter_mut().for_each(|x| *x *= b);
                    y
                };
                if a != C64::new(0.0, 0.0) {
                    axpy(a, v, &mut out);
                }
                out
            }
            LinearMap::Projector { basis, .. } => {
                let mut out = vec![C64::new(0.0, 0.0); v.len()];
                for b in basis.iter() {
                    let c = inner(b.amplitudes(), v);
                    axpy(c, b.amplitudes(), &mut out);
                }
                out
            }
            LinearMap::Custom(op) => {
                if adj {
                    op.apply_adjoint(v)
                } else {
                    op.apply(v)
                }
            }
        }
    }
}

/// Embeds one term of `spec` as a local operator.
pub fn term_operator(spec: &HamiltonianSpec, term: &TermSpec) -> Result<LocalOperator> {
    let sites: Vec<usize> = term.sites.iter().map(|&j| j - 1).collect();
    LocalOperator::new(spec.n, spec.local_dim, &sites, term.matrix.clone())
}

/// `(H_i ⊗ 1_rest) v`. The chain length is inferred from `v` and `s`.
pub fn apply_local_term(term: &TermSpec, s: usize, v: &StateVector) -> Result<StateVector> {
    let n = chain_length(v.len(), s)?;
    if term.sites.iter().any(|&j| j == 0 || j > n) {
        return Err(Error::Precondition(format!(
            "term sites {:?} outside 1..={n}",
            term.sites
        )));
    }
    let sites: Vec<usize> = term.sites.iter().map(|&j| j - 1).collect();
    let op = LocalOperator::new(n, s, &sites, term.matrix.clone())?;
    Ok(StateVector::from_amplitudes(op.apply(v.amplitudes())))
}

fn chain_length(dim: usize, s: usize) -> Result<usize> {
    let mut n = 0;
    let mut d = 1;
    while d < dim {
        d *= s;
        n += 1;
    }
    if d != dim {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: dim,
        });
    }
    Ok(n)
}

/// `H = Σ_i H_i` as a matrix-free map.
pub fn hamiltonian_map(spec: &HamiltonianSpec) -> Result<LinearMap> {
    if spec.terms.is_empty() {
        return Ok(LinearMap::Zero(spec.dim()));
    }
    let parts = spec
        .terms
        .iter()
        .map(|t| term_operator(spec, t).map(LinearMap::local))
        .collect::<Result<Vec<_>>>()?;
    LinearMap::sum(parts)
}

pub fn apply_hamiltonian(spec: &HamiltonianSpec, v: &StateVector) -> Result<StateVector> {
    if v.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: v.len(),
        });
    }
    hamiltonian_map(spec)?.apply_state(v)
}

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian
/// matrix. The input is symmetrized first.
pub fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Result of a power-iteration norm estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
}

pub const DEFAULT_NORM_SEED: u64 = 0x5eed_f00d;

/// Singular values below this are round-off; the iteration stops there
/// since a relative stopping rule cannot settle on noise.
pub const NORM_ZERO_FLOOR: f64 = 1e-12;

/// Largest singular value of `map` by power iteration on `M†M`.
///
/// Stops once the Rayleigh quotient changes by less than `tol` relative to
/// its value, or once two successive estimates fall below
/// [`NORM_ZERO_FLOOR`]. The start vector is drawn from a seeded generator, so repeated
/// calls give identical results.
pub fn operator_norm(
    map: &LinearMap,
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<NormEstimate> {
    operator_norm_seeded(map, dim, tol, max_iter, DEFAULT_NORM_SEED)
}

pub fn operator_norm_seeded(
    map: &LinearMap,
    dim: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if map.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: map.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_vector(dim, &mut rng);
    let nx = norm(&x);
    x.iter_mut().for_each(|a| *a /= nx);

    let mut previous = f64::NAN;
    let mut last = f64::NAN;
    for it in 1..=max_iter {
        let y = map.apply(&x);
        let lambda = norm(&y).powi(2);
        if lambda == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
            });
        }
        let mut z = map.apply_adjoint(&y);
        let nz = norm(&z);
        if nz == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
            });
        }
        z.iter_mut().for_each(|a| *a /= nz);
        x = z;
        previous = last;
        last = lambda;
        let floor = NORM_ZERO_FLOOR * NORM_ZERO_FLOOR;
        if it > 1 && ((last - previous).abs() <= tol * last || last.max(previous) < floor) {
            return Ok(NormEstimate {
                value: last.sqrt(),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last: last.sqrt(),
        previous: previous.sqrt(),
    })
}

/// Builds the dense matrix of `map` column by column.
pub fn dense_materialize(map: &LinearMap, dim: usize) -> Result<DMatrix<C64>> {
    dense_materialize_with_threshold(map, dim, dense_threshold())
}

pub fn dense_materialize_with_threshold(
    map: &LinearMap,
    dim: usize,
    threshold: usize,
) -> Result<DMatrix<C64>> {
    if dim > threshold {
        return Err(Error::DenseRefused { dim, threshold });
    }
    if map.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: map.dim(),
        });
    }
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    let mut e = vec![C64::new(0.0, 0.0); dim];
    for j in 0..dim {
        e[j] = C64::new(1.0, 0.0);
        let col = map.apply(&e);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = C64::new(0.0, 0.0);
    }
    Ok(out)
}
