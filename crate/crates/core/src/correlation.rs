//! Ground-space correlators `|<ψ|AB|ψ> − <ψ|AGB|ψ>|`, correlation-length
//! fits, the `ξ` upper-bound formula and a half-chain entropy probe.

use nalgebra::DMatrix;

use crate::agsp::LocalObservable;
use crate::detectability::greedy_color;
use crate::error::{Error, Result};
use crate::linalg::{apply_hamiltonian, inner, StateVector};
use crate::model::{
    interaction_graph, xxz_correlator_closed_form, xxz_gap_closed_form, xxz_spec,
    xxz_xi_lower_bound, ChainLength, HamiltonianSpec, DEFAULT_COMMUTATOR_TOL,
};
use crate::spectral::GroundSpaceBasis;

/// Values at or below this are excluded from log-linear fits.
pub const FIT_FLOOR: f64 = 1e-13;

/// Largest `‖Hψ‖` accepted for a ground state.
pub const GROUND_RESIDUAL_TOL: f64 = 1e-8;

/// Prefactor `C = 2e²` of the correlation bound.
pub fn correlation_prefactor() -> f64 {
    2.0 * std::f64::consts::E.powi(2)
}

pub fn correlator_deg(
    spec: &HamiltonianSpec,
    ground: &GroundSpaceBasis,
    psi: &StateVector,
    a: &LocalObservable,
    b: &LocalObservable,
) -> Result<f64> {
    if a.overlaps(b) {
        return Err(Error::Precondition(format!(
            "observables {} and {} have overlapping supports",
            a.label, b.label
        )));
    }
    let residual = apply_hamiltonian(spec, psi)?.norm();
    if residual > GROUND_RESIDUAL_TOL {
        return Err(Error::Precondition(format!(
            "state is not a ground state: |H psi| = {residual:e}"
        )));
    }
    let a_op = a.embed(spec)?;
    let b_op = b.embed(spec)?;
    let a_dag_psi = a_op.apply_adjoint(psi.amplitudes());
    let b_psi = b_op.apply(psi.amplitudes());
    let direct = inner(&a_dag_psi, &b_psi);
    let through_g = inner(&a_dag_psi, &ground.project(&b_psi));
    Ok((direct - through_g).norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationPoint {
    pub d: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiFit {
    pub xi: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    pub a_label: String,
    pub b_label: String,
    pub points: Vec<CorrelationPoint>,
}

impl CorrelationSeries {
    pub fn new(a_label: String, b_label: String, points: Vec<CorrelationPoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].d <= w[0].d) {
            return Err(Error::Precondition(
                "distances must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            a_label,
            b_label,
            points,
        })
    }

    pub fn fit(&self) -> Result<XiFit> {
        let pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.d as f64, p.value)).collect();
        fit_xi(&pts)
    }
}

/// Evaluates the correlator for each `(A, B)` pair; pairs must be given in
/// order of increasing distance.
pub fn correlation_series(
    spec: &HamiltonianSpec,
    ground: &GroundSpaceBasis,
    psi: &StateVector,
    pairs: &[(LocalObservable, LocalObservable)],
) -> Result<CorrelationSeries> {
    let points = pairs
        .iter()
        .map(|(a, b)| {
            Ok(CorrelationPoint {
                d: spec.distance(&a.sites, &b.sites) as usize,
                value: correlator_deg(spec, ground, psi, a, b)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (al, bl) = match pairs.first() {
        Some((a, b)) => (a.label.clone(), b.label.clone()),
        None => (String::new(), String::new()),
    };
    CorrelationSeries::new(al, bl, points)
}

/// Least squares of `ln value` on `d`: slope `−1/ξ`, intercept `ln amplitude`.
pub fn fit_xi(points: &[(f64, f64)]) -> Result<XiFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, v)| *v > FIT_FLOOR)
        .map(|&(d, v)| (d, v.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData {
            usable: usable.len(),
            required: 3,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::NoDecay { slope });
    }
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(XiFit {
        xi: -1.0 / slope,
        amplitude: intercept.exp(),
        r_squared,
        used: usable.len(),
    })
}

/// `ξ = ((2c − 1)(r − 1)/2)·√((g² + ε)/ε)`
pub fn xi_upper_formula(c: usize, r: usize, g: usize, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "gap must be positive, got {epsilon}"
        )));
    }
    let pre = ((2 * c - 1) * (r.saturating_sub(1))) as f64 / 2.0;
    let g2 = (g * g) as f64;
    Ok(pre * ((g2 + epsilon) / epsilon).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub q: f64,
    pub epsilon: f64,
    pub xi_fit: f64,
    pub xi_lower: f64,
    pub xi_upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSweep {
    pub rows: Vec<SweepRow>,
    /// Slope of `ln ξ_fit` against `ln ε`.
    pub slope: f64,
}

pub const SWEEP_MAX_DISTANCE: usize = 20;

/// Infinite-chain XXZ scaling: `ε` from the closed form, `ξ` fitted to the
/// analytic correlator series, compared with the lower bound and with the
/// upper-bound formula using the chain's `c`, `r` and `g`.
pub fn xi_scaling_sweep(q_grid: &[f64]) -> Result<ScalingSweep> {
    let mut rows = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("sweep needs 0 < q < 1, got {q}")));
        }
        let spec = xxz_spec(q, 4)?;
        let graph = interaction_graph(&spec, DEFAULT_COMMUTATOR_TOL)?;
        let c = greedy_color(&graph).c;
        let epsilon = xxz_gap_closed_form(q, ChainLength::Infinite);
        let series = (1..=SWEEP_MAX_DISTANCE)
            .map(|d| {
                Ok((
                    d as f64,
                    xxz_correlator_closed_form(q, ChainLength::Infinite, d)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_xi(&series)?;
        rows.push(SweepRow {
            q,
            epsilon,
            xi_fit: fit.xi,
            xi_lower: xxz_xi_lower_bound(q)?,
            xi_upper: xi_upper_formula(c, spec.range, graph.g, epsilon)?,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.epsilon.ln(), r.xi_fit.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(ScalingSweep { rows, slope })
}

/// Von Neumann entropy (natural log) of sites `1..=cut`.
pub fn half_chain_entropy(psi: &StateVector, s: usize, cut: usize) -> Result<f64> {
    let dim = psi.len();
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
    if cut == 0 || cut >= n {
        return Err(Error::Precondition(format!("cut {cut} outside 1..{n}")));
    }
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "state norm {} != 1",
            psi.norm()
        )));
    }
    let rows = s.pow(cut as u32);
    let cols = dim / rows;
    // Site 1 most significant: the left block index is the leading digits.
    let m = DMatrix::from_fn(rows, cols, |r, c| psi.amplitudes()[r * cols + c]);
    let sv = m.singular_values();
    Ok(sv
        .iter()
        .map(|&x| x * x)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum())
}

/// Number-operator pairs `(N_1, N_{1+d})` for `d = 1..n−1`.
pub fn number_pairs(n: usize) -> Vec<(LocalObservable, LocalObservable)> {
    (2..=n)
        .map(|j| (LocalObservable::number(1), LocalObservable::number(j)))
        .collect()
}
