//! Eigenpairs of Hermitian maps: lowest eigenpairs, ground space, gap.
//!
//! Small problems are diagonalized densely. Larger ones use Lanczos with
//! full reorthogonalization; each converged Ritz pair is locked and the
//! next solve runs in the orthogonal complement, which resolves exact
//! degeneracies that a single Krylov sequence cannot see.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dense_materialize_with_threshold, hamiltonian_map, hermitian_eigh, inner, norm,
    random_vector, term_operator, LinearMap, StateVector, C64,
};
use crate::model::HamiltonianSpec;

/// Dimensions at or below this are diagonalized densely.
pub const DENSE_EIG_THRESHOLD: usize = 256;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// Residual bound on `‖H_i v‖` for ground vectors.
pub const PER_TERM_TOL: f64 = 1e-9;

const MAX_KRYLOV: usize = 400;
const LANCZOS_SEED: u64 = 0x1a2c_0515;

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
    /// `‖Mv − λv‖` for each pair.
    pub residuals: Vec<f64>,
}

/// Randomized test of `<w, Mv> = conj(<v, Mw>)`.
pub fn check_hermitian(map: &LinearMap, dim: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = random_vector(dim, &mut rng);
    let w = random_vector(dim, &mut rng);
    let lhs = inner(&w, &map.apply(&v));
    let rhs = inner(&v, &map.apply(&w)).conj();
    let scale = norm(&v) * norm(&w) * (1.0 + lhs.norm());
    let deviation = (lhs - rhs).norm();
    if deviation > 1e-10 * scale {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Resumable solver producing eigenpairs in ascending order.
pub struct EigenSolver<'a> {
    map: &'a LinearMap,
    dim: usize,
    tol: f64,
    dense: Option<(Vec<f64>, DMatrix<C64>)>,
    found: Eigenpairs,
    rng: ChaCha8Rng,
}

impl<'a> EigenSolver<'a> {
    pub fn new(map: &'a LinearMap, dim: usize, tol: f64) -> Result<Self> {
        Self::with_dense_threshold(map, dim, tol, DENSE_EIG_THRESHOLD)
    }

    pub fn with_dense_threshold(
        map: &'a LinearMap,
        dim: usize,
        tol: f64,
        dense_threshold: usize,
    ) -> Result<Self> {
        if map.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: map.dim(),
            });
        }
        check_hermitian(map, dim)?;
        let dense = if dim <= dense_threshold {
            Some(hermitian_eigh(&dense_materialize_with_threshold(
                map, dim, dim,
            )?))
        } else {
            None
        };
        Ok(Self {
            map,
            dim,
            tol,
            dense,
            found: Eigenpairs {
                values: Vec::new(),
                vectors: Vec::new(),
                residuals: Vec::new(),
            },
            rng: ChaCha8Rng::seed_from_u64(LANCZOS_SEED),
        })
    }

    pub fn found(&self) -> &Eigenpairs {
        &self.found
    }

    pub fn into_found(self) -> Eigenpairs {
        self.found
    }

    /// Extends the found set to at least `k` pairs (capped at `dim`).
    pub fn ensure(&mut self, k: usize) -> Result<()> {
        let k = k.min(self.dim);
        while self.found.values.len() < k {
            let (value, vector) = match &self.dense {
                Some((vals, vecs)) => {
                    let i = self.found.values.len();
                    let v: Vec<C64> = vecs.column(i).iter().copied().collect();
                    (vals[i], v)
                }
                None => self.lanczos_next()?,
            };
            let mv = self.map.apply(&vector);
            let mut r = mv.clone();
            axpy(C64::new(-value, 0.0), &vector, &mut r);
            self.found.values.push(value);
            self.found
                .vectors
                .push(StateVector::from_amplitudes(vector));
            self.found.residuals.push(norm(&r));
        }
        Ok(())
    }

    fn project_out_locked(&self, v: &mut [C64]) {
        for _ in 0..2 {
            for b in &self.found.vectors {
                let c = inner(b.amplitudes(), v);
                axpy(-c, b.amplitudes(), v);
            }
        }
    }

    /// Lowest eigenpair of the map restricted to the complement of the
    /// locked vectors.
    fn lanczos_next(&mut self) -> Result<(f64, Vec<C64>)> {
        let room = self.dim - self.found.vectors.len();
        let max_k = room.min(MAX_KRYLOV);
        let mut q = random_vector(self.dim, &mut self.rng);
        self.project_out_locked(&mut q);
        let nq = norm(&q);
        q.iter_mut().for_each(|x| *x /= nq);

        let mut basis: Vec<Vec<C64>> = vec![q];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut last_theta = f64::NAN;
        let mut prev_theta = f64::NAN;
        let mut ritz: Option<(f64, Vec<f64>)> = None;

        for j in 0..max_k {
            let mut w = self.map.apply(&basis[j]);
            self.project_out_locked(&mut w);
            let a = inner(&basis[j], &w).re;
            alpha.push(a);
            // Full reorthogonalization, applied twice.
            for _ in 0..2 {
                for b in &basis {
                    let c = inner(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            self.project_out_locked(&mut w);
            let b = norm(&w);

            let size = alpha.len();
            let check = size == max_k || b < 1e-13 || size.is_multiple_of(8) || size < 8;
            if check {
                let t = DMatrix::from_fn(size, size, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r + 1 == c {
                        beta[r]
                    } else if c + 1 == r {
                        beta[c]
                    } else {
                        0.0
                    }
                });
                let eig = t.symmetric_eigen();
                let (imin, theta) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .enumerate()
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .expect("non-empty tridiagonal");
                let y: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
                let estimate = b * y[size - 1].abs();
                prev_theta = last_theta;
                last_theta = theta;
                ritz = Some((theta, y));
                if estimate <= self.tol * 0.1 || b < 1e-13 || size == max_k {
                    break;
                }
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }

        let (theta, y) = ritz.expect("at least one Lanczos step");
        let mut x = vec![C64::new(0.0, 0.0); self.dim];
        for (coef, b) in y.iter().zip(&basis) {
            axpy(C64::new(*coef, 0.0), b, &mut x);
        }
        self.project_out_locked(&mut x);
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);

        let mut r = self.map.apply(&x);
        axpy(C64::new(-theta, 0.0), &x, &mut r);
        let residual = norm(&r);
        if residual > self.tol {
            return Err(Error::NonConvergence {
                iterations: alpha.len(),
                last: last_theta,
                previous: prev_theta,
            });
        }
        Ok((theta, x))
    }
}

/// The `k` smallest eigenvalues and orthonormal eigenvectors of a Hermitian map.
pub fn lowest_eigenpairs(map: &LinearMap, dim: usize, k: usize, tol: f64) -> Result<Eigenpairs> {
    if k >= dim {
        return Err(Error::Precondition(format!(
            "k = {k} must be below dim = {dim}"
        )));
    }
    let mut solver = EigenSolver::new(map, dim, tol)?;
    solver.ensure(k)?;
    Ok(solver.into_found())
}

/// Orthonormal basis of the zero-energy space plus the spectral gap.
#[derive(Clone, Debug)]
pub struct GroundSpaceBasis {
    pub vectors: Vec<StateVector>,
    pub degeneracy: usize,
    /// Smallest eigenvalue above `zero_tol`; infinite when every state is a ground state.
    pub gap: f64,
    pub zero_tol: f64,
}

impl GroundSpaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.first().map(StateVector::len).unwrap_or(0)
    }

    pub fn projector(&self) -> LinearMap {
        LinearMap::Projector {
            dim: self.dim(),
            basis: std::sync::Arc::new(self.vectors.clone()),
        }
    }

    /// `G v` applied through the basis.
    pub fn project(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for b in &self.vectors {
            let c = inner(b.amplitudes(), v);
            axpy(c, b.amplitudes(), &mut out);
        }
        out
    }
}

pub fn default_zero_tol(spec: &HamiltonianSpec) -> f64 {
    1e-9 * spec.terms.len().max(1) as f64
}

pub fn ground_space(spec: &HamiltonianSpec) -> Result<GroundSpaceBasis> {
    ground_space_with_tol(spec, default_zero_tol(spec))
}

/// Collects every eigenvector with eigenvalue at most `zero_tol`, doubling
/// the number of requested pairs until one lies above it.
pub fn ground_space_with_tol(spec: &HamiltonianSpec, zero_tol: f64) -> Result<GroundSpaceBasis> {
    let dim = spec.dim();
    let h = hamiltonian_map(spec)?;
    let mut solver = EigenSolver::new(&h, dim, DEFAULT_EIG_TOL)?;
    let mut k = 2;
    loop {
        solver.ensure(k)?;
        let found = solver.found();
        if found.values[0] > zero_tol {
            return Err(Error::NotFrustrationFree {
                ground_energy: found.values[0],
                zero_tol,
            });
        }
        let above = found.values.iter().position(|&v| v > zero_tol);
        if above.is_some() || found.values.len() == dim {
            break;
        }
        k *= 2;
    }
    let found = solver.into_found();
    let degeneracy = found.values.iter().take_while(|&&v| v <= zero_tol).count();
    let gap = found
        .values
        .get(degeneracy)
        .copied()
        .unwrap_or(f64::INFINITY);

    let mut vectors: Vec<StateVector> = Vec::with_capacity(degeneracy);
    for v in found.vectors.into_iter().take(degeneracy) {
        let mut a = v.into_amplitudes();
        for _ in 0..2 {
            for b in &vectors {
                let c = inner(b.amplitudes(), &a);
                axpy(-c, b.amplitudes(), &mut a);
            }
        }
        let mut sv = StateVector::from_amplitudes(a);
        sv.normalize();
        vectors.push(sv);
    }

    let term_ops = spec
        .terms
        .iter()
        .map(|t| term_operator(spec, t))
        .collect::<Result<Vec<_>>>()?;
    for (vi, v) in vectors.iter().enumerate() {
        for (ti, op) in term_ops.iter().enumerate() {
            let residual = norm(&op.apply(v.amplitudes()));
            if residual > PER_TERM_TOL {
                return Err(Error::Inconsistent {
                    vector: vi,
                    term: ti,
                    residual,
                });
            }
        }
    }

    Ok(GroundSpaceBasis {
        vectors,
        degeneracy,
        gap,
        zero_tol,
    })
}

/// `(λ_min, λ_max)` of a Hermitian map.
pub fn extremal_eigs(map: &LinearMap, dim: usize) -> Result<(f64, f64)> {
    let mut lo = EigenSolver::new(map, dim, DEFAULT_EIG_TOL)?;
    lo.ensure(1)?;
    let neg = LinearMap::scaled(-1.0, map.clone());
    let mut hi = EigenSolver::new(&neg, dim, DEFAULT_EIG_TOL)?;
    hi.ensure(1)?;
    Ok((lo.found().values[0], -hi.found().values[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_materialize;
    use crate::model::{xxz_gap_closed_form, xxz_spec, ChainLength, TermSpec};

    fn diag(values: &[f64]) -> LinearMap {
        LinearMap::diagonal(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    #[test]
    fn diagonal_lowest_three() {
        let m = diag(&[3.0, 0.0, 1.0, 0.0]);
        let pairs = lowest_eigenpairs(&m, 4, 3, 1e-10).unwrap();
        assert_eq!(pairs.values.len(), 3);
        for (got, want) in pairs.values.iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_path_matches_dense_on_xxz() {
        let spec = xxz_spec(0.5, 6).unwrap();
        let h = hamiltonian_map(&spec).unwrap();
        let dense = dense_materialize(&h, 64).unwrap();
        let (want, _) = hermitian_eigh(&dense);
        let mut solver = EigenSolver::with_dense_threshold(&h, 64, 1e-10, 0).unwrap();
        solver.ensure(10).unwrap();
        let found = solver.into_found();
        for (k, v) in found.values.iter().enumerate() {
            assert!((v - want[k]).abs() < 1e-9, "k={k}: {v} vs {}", want[k]);
            assert!(found.residuals[k] <= 1e-10);
        }
        for a in 0..found.vectors.len() {
            for b in 0..found.vectors.len() {
                let ip = found.vectors[a].inner(&found.vectors[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn xxz_n4_lowest_six() {
        let spec = xxz_spec(0.5, 4).unwrap();
        let h = hamiltonian_map(&spec).unwrap();
        let pairs = lowest_eigenpairs(&h, 16, 6, 1e-10).unwrap();
        for v in &pairs.values[..5] {
            assert!(v.abs() < 1e-10);
        }
        assert!((pairs.values[5] - 0.4343145751).abs() < 1e-9);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 1)] = C64::new(1.0, 0.0);
        let map = LinearMap::dense(m).unwrap();
        assert!(matches!(
            lowest_eigenpairs(&map, 3, 1, 1e-10),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn xxz_ground_space() {
        let spec = xxz_spec(0.5, 4).unwrap();
        let gs = ground_space(&spec).unwrap();
        assert_eq!(gs.degeneracy, 5);
        assert!((gs.gap - xxz_gap_closed_form(0.5, ChainLength::Finite(4))).abs() < 1e-9);
    }

    #[test]
    fn single_term_ground_space() {
        let spec = xxz_spec(0.5, 2).unwrap();
        let gs = ground_space(&spec).unwrap();
        assert_eq!(gs.degeneracy, 3);
        assert!((gs.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frustrated_toy_is_rejected() {
        // Each term vanishes on a single basis state; the two states
        // disagree on the shared site 2.
        let pin = |state: usize| {
            let mut m = DMatrix::<C64>::zeros(4, 4);
            for r in 0..4 {
                if r != state {
                    m[(r, r)] = C64::new(1.0, 0.0);
                }
            }
            m
        };
        let spec = HamiltonianSpec {
            n: 3,
            local_dim: 2,
            range: 2,
            positions: vec![1, 2, 3],
            terms: vec![
                TermSpec::new(vec![1, 2], pin(0)),
                TermSpec::new(vec![2, 3], pin(2)),
            ],
        };
        let dense = dense_materialize(&hamiltonian_map(&spec).unwrap(), 8).unwrap();
        let (oracle, _) = hermitian_eigh(&dense);
        assert!(oracle[0] > 1e-3);
        match ground_space(&spec) {
            Err(Error::NotFrustrationFree { ground_energy, .. }) => {
                assert!((ground_energy - oracle[0]).abs() < 1e-10)
            }
            other => panic!("expected frustration error, got {other:?}"),
        }
    }

    #[test]
    fn extremal_eigs_of_simple_maps() {
        let (lo, hi) = extremal_eigs(&LinearMap::Zero(4), 4).unwrap();
        assert!(lo.abs() < 1e-14 && hi.abs() < 1e-14);
        let spec = xxz_spec(0.5, 4).unwrap();
        let gs = ground_space(&spec).unwrap();
        let (lo, hi) = extremal_eigs(&gs.projector(), 16).unwrap();
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projectorization_brackets_gap() {
        let spec = xxz_spec(0.5, 4).unwrap();
        let mut scaled = spec.clone();
        for (i, t) in scaled.terms.iter_mut().enumerate() {
            if i % 2 == 0 {
                t.matrix *= C64::new(0.3, 0.0);
            }
        }
        let (proj, a) = scaled.projectorized(1e-10).unwrap();
        assert!((a - 0.3).abs() < 1e-12);
        let eps = ground_space(&scaled).unwrap().gap;
        let eps_p = ground_space(&proj).unwrap().gap;
        assert!(a * eps_p <= eps + 1e-9 && eps <= eps_p + 1e-9);
        assert!(
            eps < eps_p - 1e-3,
            "variant must differ from projector case"
        );
    }
}
