//! Frustration-free Hamiltonian descriptions, their validation, and the
//! XXZ kink chain with its closed-form ground state, gap and correlator.
//!
//! Site indices are 1-based everywhere in this module. Term indices are
//! 0-based positions in [`HamiltonianSpec::terms`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigh, LocalOperator, StateVector, C64};

/// Tolerance for per-term validation checks.
pub const TERM_TOL: f64 = 1e-10;

/// Default Frobenius threshold separating commuting from non-commuting terms.
pub const DEFAULT_COMMUTATOR_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct TermSpec {
    /// Ordered support; the first site is the most significant digit of
    /// the matrix index.
    pub sites: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl TermSpec {
    pub fn new(sites: Vec<usize>, matrix: DMatrix<C64>) -> Self {
        Self { sites, matrix }
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        (&self.matrix * &self.matrix - &self.matrix).norm() <= tol
    }

    fn sorted_support(&self) -> Vec<usize> {
        let mut s = self.sites.clone();
        s.sort_unstable();
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub n: usize,
    pub local_dim: usize,
    pub range: usize,
    pub positions: Vec<i64>,
    pub terms: Vec<TermSpec>,
}

impl HamiltonianSpec {
    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n as u32)
    }

    /// `d(A,B)`: minimum `|pos_a - pos_b|` over the two supports.
    pub fn distance(&self, a: &[usize], b: &[usize]) -> i64 {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| (self.positions[i - 1] - self.positions[j - 1]).abs())
            .min()
            .unwrap_or(0)
    }

    /// Number of lattice positions spanned by a support.
    fn span(&self, sites: &[usize]) -> i64 {
        let pos: Vec<i64> = sites.iter().map(|&j| self.positions[j - 1]).collect();
        match (pos.iter().min(), pos.iter().max()) {
            (Some(lo), Some(hi)) => hi - lo + 1,
            _ => 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(text)?;
        file.into_spec()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpecFile::from_spec(self)).expect("spec serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Copy with every term replaced by the projector onto its range.
    /// Returns the smallest ratio `a` with `a·Π_i ≤ H_i` over all terms.
    pub fn projectorized(&self, tol: f64) -> Result<(HamiltonianSpec, f64)> {
        let mut terms = Vec::with_capacity(self.terms.len());
        let mut a_min = 1.0f64;
        for t in &self.terms {
            let (p, a) = projectorize_term(t, tol)?;
            a_min = a_min.min(a);
            terms.push(p);
        }
        Ok((
            HamiltonianSpec {
                terms,
                ..self.clone()
            },
            a_min,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    sites: Vec<usize>,
    matrix: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    n: usize,
    local_dim: usize,
    range: usize,
    positions: Vec<i64>,
    terms: Vec<TermFile>,
}

impl SpecFile {
    fn from_spec(spec: &HamiltonianSpec) -> Self {
        let terms = spec
            .terms
            .iter()
            .map(|t| {
                let d = t.matrix.nrows();
                let matrix = (0..d * d)
                    .map(|k| {
                        let z = t.matrix[(k / d, k % d)];
                        [z.re, z.im]
                    })
                    .collect();
                TermFile {
                    sites: t.sites.clone(),
                    matrix,
                }
            })
            .collect();
        SpecFile {
            n: spec.n,
            local_dim: spec.local_dim,
            range: spec.range,
            positions: spec.positions.clone(),
            terms,
        }
    }

    fn into_spec(self) -> Result<HamiltonianSpec> {
        let fmt_err = |term: Option<usize>, message: String| Error::Format { term, message };
        if self.n == 0 {
            return Err(fmt_err(None, "n must be positive".into()));
        }
        if self.local_dim < 2 {
            return Err(fmt_err(None, format!("local_dim {} < 2", self.local_dim)));
        }
        if self.positions.len() != self.n {
            return Err(fmt_err(
                None,
                format!("{} positions for {} sites", self.positions.len(), self.n),
            ));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for (idx, t) in self.terms.into_iter().enumerate() {
            if t.sites.is_empty() {
                return Err(fmt_err(Some(idx), "empty support".into()));
            }
            if let Some(bad) = t.sites.iter().find(|&&j| j == 0 || j > self.n) {
                return Err(fmt_err(
                    Some(idx),
                    format!("site {bad} outside 1..={}", self.n),
                ));
            }
            let mut sorted = t.sites.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != t.sites.len() {
                return Err(fmt_err(Some(idx), "repeated site in support".into()));
            }
            let d = self.local_dim.pow(t.sites.len() as u32);
            if t.matrix.len() != d * d {
                return Err(fmt_err(
                    Some(idx),
                    format!("matrix has {} entries, expected {}", t.matrix.len(), d * d),
                ));
            }
            let matrix = DMatrix::from_fn(d, d, |r, c| {
                let [re, im] = t.matrix[r * d + c];
                C64::new(re, im)
            });
            terms.push(TermSpec::new(t.sites, matrix));
        }
        Ok(HamiltonianSpec {
            n: self.n,
            local_dim: self.local_dim,
            range: self.range,
            positions: self.positions,
            terms,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotHermitian {
        term: usize,
        deviation: f64,
    },
    MinEigenvalueNotZero {
        term: usize,
        value: f64,
    },
    NormExceedsOne {
        term: usize,
        value: f64,
    },
    DiameterExceedsRange {
        term: usize,
        span: i64,
        range: usize,
    },
    DuplicateSupport {
        term: usize,
        first: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotHermitian { term, deviation } => {
                write!(
                    f,
                    "term {term}: not Hermitian (|H - H^dag|_F = {deviation:.3e})"
                )
            }
            Violation::MinEigenvalueNotZero { term, value } => {
                write!(f, "term {term}: smallest eigenvalue {value:.6e} != 0")
            }
            Violation::NormExceedsOne { term, value } => {
                write!(f, "term {term}: norm {value:.6e} > 1")
            }
            Violation::DiameterExceedsRange { term, span, range } => {
                write!(f, "term {term}: support spans {span} sites > range {range}")
            }
            Violation::DuplicateSupport { term, first } => {
                write!(f, "term {term}: duplicate support of term {first}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural assumptions on every term: Hermitian, smallest
/// eigenvalue zero, norm at most one, support within range, and pairwise
/// distinct supports.
pub fn validate_spec(spec: &HamiltonianSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    for (i, t) in spec.terms.iter().enumerate() {
        let deviation = (&t.matrix - t.matrix.adjoint()).norm();
        if deviation > TERM_TOL {
            violations.push(Violation::NotHermitian { term: i, deviation });
        } else {
            let (eigs, _) = hermitian_eigh(&t.matrix);
            let lo = eigs[0];
            let hi = eigs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if lo.abs() > TERM_TOL {
                violations.push(Violation::MinEigenvalueNotZero { term: i, value: lo });
            }
            if hi > 1.0 + TERM_TOL {
                violations.push(Violation::NormExceedsOne { term: i, value: hi });
            }
        }
        let span = spec.span(&t.sites);
        if span > spec.range as i64 {
            violations.push(Violation::DiameterExceedsRange {
                term: i,
                span,
                range: spec.range,
            });
        }
        match seen.get(&t.sorted_support()) {
            Some(&first) => violations.push(Violation::DuplicateSupport { term: i, first }),
            None => {
                seen.insert(t.sorted_support(), i);
            }
        }
    }
    ValidationReport { violations }
}

/// Replaces a PSD term by the projector onto its range.
///
/// Returns `(Π, a)` where `a` is the smallest eigenvalue above `tol`, so
/// that `a·Π ≤ H ≤ Π` whenever `‖H‖ ≤ 1`. A term that is already a
/// projector comes back unchanged with `a = 1`.
pub fn projectorize_term(term: &TermSpec, tol: f64) -> Result<(TermSpec, f64)> {
    let (eigs, vecs) = hermitian_eigh(&term.matrix);
    if eigs[0] < -tol {
        return Err(Error::NotPsd {
            eigenvalue: eigs[0],
            tol,
        });
    }
    if term.is_projector(tol) {
        return Ok((term.clone(), 1.0));
    }
    let d = term.matrix.nrows();
    let mut proj = DMatrix::<C64>::zeros(d, d);
    let mut a = f64::INFINITY;
    for (k, &lam) in eigs.iter().enumerate() {
        if lam > tol {
            let v = vecs.column(k);
            proj += v * v.adjoint();
            a = a.min(lam);
        }
    }
    if !a.is_finite() {
        a = 1.0;
    }
    Ok((TermSpec::new(term.sites.clone(), proj), a))
}

/// Vertices are terms; edges join pairs whose commutator exceeds tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub g: usize,
}

impl InteractionGraph {
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); vertices];
        let mut list = Vec::new();
        for &(a, b) in edges {
            if a == b {
                continue;
            }
            let (i, j) = (a.min(b), a.max(b));
            if !adjacency[i].contains(&j) {
                adjacency[i].push(j);
                adjacency[j].push(i);
                list.push((i, j));
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        list.sort_unstable();
        let g = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Self {
            adjacency,
            edges: list,
            g,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }
}

/// Frobenius norm of `[H_i, H_j]` computed on the union of the supports.
pub fn term_commutator_norm(spec: &HamiltonianSpec, a: &TermSpec, b: &TermSpec) -> Result<f64> {
    let mut joint: Vec<usize> = a.sites.iter().chain(&b.sites).copied().collect();
    joint.sort_unstable();
    joint.dedup();
    let local = |t: &TermSpec| -> Result<DMatrix<C64>> {
        let sites: Vec<usize> = t
            .sites
            .iter()
            .map(|j| joint.binary_search(j).expect("site in joint support"))
            .collect();
        let op = LocalOperator::new(joint.len(), spec.local_dim, &sites, t.matrix.clone())?;
        let d = op.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        let mut e = vec![C64::new(0.0, 0.0); d];
        for c in 0..d {
            e[c] = C64::new(1.0, 0.0);
            m.column_mut(c).copy_from_slice(&op.apply(&e));
            e[c] = C64::new(0.0, 0.0);
        }
        Ok(m)
    };
    let ma = local(a)?;
    let mb = local(b)?;
    Ok((&ma * &mb - &mb * &ma).norm())
}

pub fn interaction_graph(spec: &HamiltonianSpec, commutator_tol: f64) -> Result<InteractionGraph> {
    let mut edges = Vec::new();
    for i in 0..spec.terms.len() {
        for j in i + 1..spec.terms.len() {
            let (a, b) = (&spec.terms[i], &spec.terms[j]);
            if !a.sites.iter().any(|s| b.sites.contains(s)) {
                continue;
            }
            if term_commutator_norm(spec, a, b)? > commutator_tol {
                edges.push((i, j));
            }
        }
    }
    Ok(InteractionGraph::from_edges(spec.terms.len(), &edges))
}

/// Chain length for closed-form XXZ quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainLength {
    Finite(usize),
    Infinite,
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("q = {q} outside (0, 1]")));
    }
    Ok(())
}

/// Amplitudes of `|φ(q)>` on the two-site basis `|00>, |01>, |10>, |11>`.
pub fn xxz_phi(q: f64) -> [f64; 4] {
    let nrm = (q * q + 1.0).sqrt();
    [0.0, -1.0 / nrm, q / nrm, 0.0]
}

/// XXZ chain with kink boundary conditions: `n - 1` rank-one projectors
/// `|φ(q)><φ(q)|` on neighbouring pairs. `q = 1` is accepted; it is the
/// gapless isotropic limit as `n → ∞`.
pub fn xxz_spec(q: f64, n: usize) -> Result<HamiltonianSpec> {
    check_q(q)?;
    if n < 2 {
        return Err(Error::Domain(format!("XXZ chain needs n >= 2, got {n}")));
    }
    let phi = xxz_phi(q);
    let proj = DMatrix::from_fn(4, 4, |r, c| C64::new(phi[r] * phi[c], 0.0));
    let terms = (1..n)
        .map(|i| TermSpec::new(vec![i, i + 1], proj.clone()))
        .collect();
    Ok(HamiltonianSpec {
        n,
        local_dim: 2,
        range: 2,
        positions: (1..=n as i64).collect(),
        terms,
    })
}

/// `ε = 1 − 2cos(π/n)/(q + 1/q)`.
pub fn xxz_gap_closed_form(q: f64, n: ChainLength) -> f64 {
    let cos = match n {
        ChainLength::Finite(n) => (PI / n as f64).cos(),
        ChainLength::Infinite => 1.0,
    };
    1.0 - 2.0 * cos / (q + 1.0 / q)
}

/// `(1 − q²)/(1 − q^{2n})`, continued to `1/n` at `q = 1`.
fn single_flip_weight(q: f64, n: ChainLength) -> f64 {
    match n {
        ChainLength::Infinite => 1.0 - q * q,
        ChainLength::Finite(n) if q == 1.0 => 1.0 / n as f64,
        ChainLength::Finite(n) => (1.0 - q * q) / (1.0 - q.powi(2 * n as i32)),
    }
}

/// The unique zero-energy state with one flipped spin.
pub fn xxz_psi1(q: f64, n: usize) -> Result<StateVector> {
    check_q(q)?;
    if n < 2 {
        return Err(Error::Domain(format!("XXZ chain needs n >= 2, got {n}")));
    }
    let c = single_flip_weight(q, ChainLength::Finite(n)).sqrt();
    let mut v = StateVector::zeros(1 << n);
    for j in 1..=n {
        v.amplitudes_mut()[1 << (n - j)] = C64::new(c * q.powi(j as i32 - 1), 0.0);
    }
    Ok(v)
}

/// `|<ψ₁|AB|ψ₁> − <ψ₁|AGB|ψ₁>|` for number operators at distance `d`.
pub fn xxz_correlator_closed_form(q: f64, n: ChainLength, d: usize) -> Result<f64> {
    check_q(q)?;
    if d == 0 {
        return Err(Error::Domain("distance must be at least 1".into()));
    }
    if let ChainLength::Finite(n) = n {
        if d >= n {
            return Err(Error::Domain(format!(
                "distance {d} exceeds chain of {n} sites"
            )));
        }
    }
    Ok(single_flip_weight(q, n).powi(2) * q.powi(2 * d as i32))
}

/// `ξ ≥ 1/(−2 ln q)`
pub fn xxz_xi_lower_bound(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "lower bound needs 0 < q < 1 (unbounded at q = {q})"
        )));
    }
    Ok(1.0 / (-2.0 * q.ln()))
}
