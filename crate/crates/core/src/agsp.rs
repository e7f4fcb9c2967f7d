//! Shifted and rescaled Chebyshev polynomials of `P†P`, the approximate
//! ground-space projector `Q_m(P†P)`, and the causal-cone identity
//! `<ψ|A (P†P)^m B|ψ> = <ψ|AB|ψ>`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::detectability::{LayerSchedule, LayeredSystem};
use crate::error::{Error, Result};
use crate::linalg::{
    axpy, hermitian_eigh, inner, LinearMap, LocalOperator, Operator, StateVector, C64,
};
use crate::model::HamiltonianSpec;
use crate::spectral::extremal_eigs;

/// Tolerance for the causal-cone identity.
pub const CONE_TOL: f64 = 1e-10;

/// `T_m(x)` by the three-term recurrence.
pub fn chebyshev_t(m: usize, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..m {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevParams {
    pub degree: usize,
    pub delta: f64,
    /// `T_m(2/(1 − δ) − 1)`
    pub normalization: f64,
}

impl ChebyshevParams {
    pub fn new(degree: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta = {delta} outside (0, 1)")));
        }
        Ok(Self {
            degree,
            delta,
            normalization: chebyshev_t(degree, 2.0 / (1.0 - delta) - 1.0),
        })
    }

    /// `δ = ε/(g² + ε)`
    pub fn from_gap(degree: usize, epsilon: f64, g: usize) -> Result<Self> {
        let g2 = (g * g) as f64;
        Self::new(degree, epsilon / (g2 + epsilon))
    }

    /// `2e^{−2m√δ}`
    pub fn bound(&self) -> f64 {
        2.0 * (-2.0 * self.degree as f64 * self.delta.sqrt()).exp()
    }

    fn shift_scale(&self) -> f64 {
        2.0 / (1.0 - self.delta)
    }
}

/// `Q_m(x) = T_m(2x/(1 − δ) − 1) / T_m(2/(1 − δ) − 1)`
pub fn qm_eval(params: &ChebyshevParams, x: f64) -> f64 {
    chebyshev_t(params.degree, params.shift_scale() * x - 1.0) / params.normalization
}

/// `Q_m(M)` for a Hermitian `M` with spectrum in `[0, 1]`, applied through
/// the Chebyshev recurrence on `2M/(1 − δ) − 1`.
pub struct ChebyshevOperator {
    inner: LinearMap,
    params: ChebyshevParams,
}

impl ChebyshevOperator {
    pub fn new(inner: LinearMap, params: ChebyshevParams) -> Self {
        Self { inner, params }
    }

    fn shifted(&self, v: &[C64]) -> Vec<C64> {
        let mut y = self.inner.apply(v);
        let s = C64::new(self.params.shift_scale(), 0.0);
        y.iter_mut().for_each(|x| *x *= s);
        axpy(C64::new(-1.0, 0.0), v, &mut y);
        y
    }
}

impl Operator for ChebyshevOperator {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let norm = C64::new(1.0 / self.params.normalization, 0.0);
        let mut out = match self.params.degree {
            0 => v.to_vec(),
            1 => self.shifted(v),
            m => {
                let mut prev = v.to_vec();
                let mut cur = self.shifted(v);
                for _ in 1..m {
                    let mut next = self.shifted(&cur);
                    next.iter_mut()
                        .zip(&prev)
                        .for_each(|(n, p)| *n = *n * 2.0 - p);
                    prev = cur;
                    cur = next;
                }
                cur
            }
        };
        out.iter_mut().for_each(|x| *x *= norm);
        out
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        // Real polynomial of a Hermitian map.
        self.apply(v)
    }
}

/// `Q_m(P†P)` as a linear map, with `δ` taken from the measured gap.
pub fn agsp_map(sys: &LayeredSystem, m: usize) -> Result<LinearMap> {
    let params = ChebyshevParams::from_gap(m, sys.epsilon(), sys.g())?;
    Ok(LinearMap::Custom(Arc::new(ChebyshevOperator::new(
        sys.ptp()?,
        params,
    ))))
}

pub fn agsp_apply(
    spec: &HamiltonianSpec,
    schedule: &LayerSchedule,
    m: usize,
    v: &StateVector,
) -> Result<StateVector> {
    let sys = LayeredSystem::with_schedule(spec.clone(), schedule.clone())?;
    agsp_map(&sys, m)?.apply_state(v)
}

/// Norm of a Hermitian map from its extremal eigenvalues.
pub fn hermitian_norm(map: &LinearMap, dim: usize) -> Result<f64> {
    let (lo, hi) = extremal_eigs(map, dim)?;
    Ok(lo.abs().max(hi.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgspRow {
    pub m: usize,
    pub delta: f64,
    pub bound: f64,
    pub measured_norm: f64,
    pub margin: f64,
}

/// `‖Q_m(P†P) − G‖` against `2e^{−2m√δ}` for each requested degree.
pub fn agsp_sweep(sys: &LayeredSystem, degrees: &[usize]) -> Result<Vec<AgspRow>> {
    let dim = sys.dim();
    degrees
        .iter()
        .map(|&m| {
            let q = agsp_map(sys, m)?;
            let diff = q.minus(sys.g_map())?;
            let measured_norm = hermitian_norm(&diff, dim)?;
            let params = ChebyshevParams::from_gap(m, sys.epsilon(), sys.g())?;
            Ok(AgspRow {
                m,
                delta: params.delta,
                bound: params.bound(),
                measured_norm,
                margin: params.bound() - measured_norm,
            })
        })
        .collect()
}

/// Largest integer `m` strictly below `d/((2c − 1)(r − 1))`.
pub fn max_m_for_distance(d: usize, c: usize, r: usize) -> Result<usize> {
    if r <= 1 {
        return Err(Error::DegenerateRange);
    }
    if d == 0 || c == 0 {
        return Err(Error::Precondition(format!(
            "need d >= 1 and c >= 1 (d = {d}, c = {c})"
        )));
    }
    let step = (2 * c - 1) * (r - 1);
    Ok((d - 1) / step)
}

/// A local observable given by a dense matrix on its (1-based) support.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalObservable {
    pub label: String,
    pub sites: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl LocalObservable {
    pub fn new(label: impl Into<String>, sites: Vec<usize>, matrix: DMatrix<C64>) -> Self {
        Self {
            label: label.into(),
            sites,
            matrix,
        }
    }

    pub fn pauli_z(site: usize) -> Self {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
        ]));
        Self::new(format!("Z{site}"), vec![site], m)
    }

    /// `(1 − σ^z)/2`
    pub fn number(site: usize) -> Self {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ]));
        Self::new(format!("N{site}"), vec![site], m)
    }

    pub fn identity(site: usize, s: usize) -> Self {
        Self::new(format!("I{site}"), vec![site], DMatrix::identity(s, s))
    }

    /// Operator norm (largest singular value).
    pub fn norm(&self) -> f64 {
        let (vals, _) = hermitian_eigh(&(self.matrix.adjoint() * &self.matrix));
        vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn embed(&self, spec: &HamiltonianSpec) -> Result<LocalOperator> {
        if let Some(bad) = self.sites.iter().find(|&&j| j == 0 || j > spec.n) {
            return Err(Error::Precondition(format!(
                "observable site {bad} outside 1..={}",
                spec.n
            )));
        }
        let sites: Vec<usize> = self.sites.iter().map(|&j| j - 1).collect();
        LocalOperator::new(spec.n, spec.local_dim, &sites, self.matrix.clone())
    }

    pub fn overlaps(&self, other: &LocalObservable) -> bool {
        self.sites.iter().any(|s| other.sites.contains(s))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeRow {
    pub m: usize,
    pub admissible: bool,
    /// Max over ground-basis ψ of `|<ψ|A(P†P)^m B|ψ> − <ψ|AB|ψ>|`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeReport {
    pub distance: usize,
    /// `None` when `r = 1` and every `m` is admissible.
    pub max_admissible: Option<usize>,
    pub rows: Vec<ConeRow>,
    /// First `m` whose residual exceeds [`CONE_TOL`].
    pub first_failure: Option<usize>,
    pub pass: bool,
}

/// Evaluates the identity for `m = 0..=m_max + 3` on every ground-basis
/// vector. Only admissible `m ≤ m_max` must hold; the rest locate the
/// boundary of the causal cone.
pub fn causal_cone_check(
    sys: &LayeredSystem,
    a: &LocalObservable,
    b: &LocalObservable,
    m_max: usize,
) -> Result<ConeReport> {
    if a.overlaps(b) {
        return Err(Error::Precondition(format!(
            "observables {} and {} have overlapping supports",
            a.label, b.label
        )));
    }
    let spec = &sys.spec;
    let distance = spec.distance(&a.sites, &b.sites) as usize;
    let max_admissible = match max_m_for_distance(distance, sys.schedule.c.max(1), spec.range) {
        Ok(m) => Some(m),
        Err(Error::DegenerateRange) => None,
        Err(e) => return Err(e),
    };
    let a_op = a.embed(spec)?;
    let b_op = b.embed(spec)?;
    let ptp = sys.ptp()?;

    let top = m_max + 3;
    let mut residual = vec![0.0f64; top + 1];
    for psi in &sys.ground.vectors {
        let a_dag_psi = a_op.apply_adjoint(psi.amplitudes());
        let mut x = b_op.apply(psi.amplitudes());
        let base = inner(&a_dag_psi, &x);
        for (m, res) in residual.iter_mut().enumerate() {
            if m > 0 {
                x = ptp.apply(&x);
            }
            *res = res.max((inner(&a_dag_psi, &x) - base).norm());
        }
    }

    let rows: Vec<ConeRow> = residual
        .iter()
        .enumerate()
        .map(|(m, &r)| ConeRow {
            m,
            admissible: max_admissible.is_none_or(|mm| m <= mm),
            residual: r,
        })
        .collect();
    let first_failure = rows.iter().find(|r| r.residual > CONE_TOL).map(|r| r.m);
    let pass = rows
        .iter()
        .filter(|r| r.admissible && r.m <= m_max)
        .all(|r| r.residual <= CONE_TOL);
    Ok(ConeReport {
        distance,
        max_admissible,
        rows,
        first_failure,
        pass,
    })
}
