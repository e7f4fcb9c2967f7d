//! Layer coloring, the layered product `P = L_c···L_1`, and checks of
//! `‖P − G‖ ≤ 1/√(1 + ε/g²)` together with `0 ≤ P†P − G ≤ (1 − δ)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{operator_norm_seeded, term_operator, LinearMap, DEFAULT_NORM_SEED};
use crate::model::{
    interaction_graph, xxz_spec, HamiltonianSpec, InteractionGraph, DEFAULT_COMMUTATOR_TOL,
};
use crate::spectral::{extremal_eigs, ground_space, GroundSpaceBasis};

/// Relative-change stopping rule for the power iteration behind `‖P − G‖`.
pub const NORM_TOL: f64 = 1e-14;
pub const NORM_MAX_ITER: usize = 50_000;

/// Slack allowed on `‖P − G‖ ≤ bound`.
pub const DL_SLACK: f64 = 1e-8;
/// Slack on the extremal eigenvalues of `P†P − G`.
pub const EQ10_SLACK: f64 = 1e-9;
pub const REMARK_TOL: f64 = 1e-8;

/// Power-iteration settings for `‖P − G‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tol: NORM_TOL,
            max_iter: NORM_MAX_ITER,
            seed: DEFAULT_NORM_SEED,
        }
    }
}

impl NormOptions {
    pub fn norm(&self, map: &LinearMap) -> Result<crate::linalg::NormEstimate> {
        operator_norm_seeded(map, map.dim(), self.tol, self.max_iter, self.seed)
    }
}

/// Colors are `1..=c`; term `i` belongs to layer `assignment[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSchedule {
    pub c: usize,
    pub assignment: Vec<usize>,
}

impl LayerSchedule {
    /// Term indices per layer, in ascending color; each layer ascending.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut layers = vec![Vec::new(); self.c];
        for (term, &color) in self.assignment.iter().enumerate() {
            layers[color - 1].push(term);
        }
        layers
    }

    /// Checks that no layer contains an edge of `graph`.
    pub fn is_proper(&self, graph: &InteractionGraph) -> bool {
        graph
            .edges
            .iter()
            .all(|&(i, j)| self.assignment[i] != self.assignment[j])
    }
}

/// Greedy proper coloring visiting terms in ascending index. Uses at most
/// `g + 1` colors.
pub fn greedy_color(graph: &InteractionGraph) -> LayerSchedule {
    let count = graph.vertex_count();
    let mut assignment = vec![0usize; count];
    for v in 0..count {
        let mut used: Vec<usize> = graph.adjacency[v]
            .iter()
            .map(|&u| assignment[u])
            .filter(|&c| c > 0)
            .collect();
        used.sort_unstable();
        used.dedup();
        let mut color = 1;
        for c in used {
            if c == color {
                color += 1;
            } else if c > color {
                break;
            }
        }
        assignment[v] = color;
    }
    let c = assignment.iter().copied().max().unwrap_or(0);
    LayerSchedule { c, assignment }
}

/// `P` from an explicit application sequence: `sequence[0]` is the first
/// layer to act on kets, and within a layer the listed terms act in order.
pub fn build_p_ordered(spec: &HamiltonianSpec, sequence: &[Vec<usize>]) -> Result<LinearMap> {
    let dim = spec.dim();
    let mut factors = Vec::new();
    for layer in sequence {
        for &t in layer {
            let term = spec.terms.get(t).ok_or_else(|| {
                Error::ScheduleMismatch(format!(
                    "term {t} not in spec of {} terms",
                    spec.terms.len()
                ))
            })?;
            let h = LinearMap::local(term_operator(spec, term)?);
            factors.push(LinearMap::affine(1.0, -1.0, h));
        }
    }
    if factors.is_empty() {
        return Ok(LinearMap::Identity(dim));
    }
    // `product` takes factors left to right.
    factors.reverse();
    LinearMap::product(factors)
}

/// `P = L_c···L_1` with `L_1` acting first.
pub fn build_p(spec: &HamiltonianSpec, schedule: &LayerSchedule) -> Result<LinearMap> {
    if schedule.assignment.len() != spec.terms.len() {
        return Err(Error::ScheduleMismatch(format!(
            "{} colors for {} terms",
            schedule.assignment.len(),
            spec.terms.len()
        )));
    }
    if let Some(&bad) = schedule
        .assignment
        .iter()
        .find(|&&c| c == 0 || c > schedule.c)
    {
        return Err(Error::ScheduleMismatch(format!(
            "color {bad} outside 1..={}",
            schedule.c
        )));
    }
    build_p_ordered(spec, &schedule.layers())
}

/// Everything derived from a spec that the checks share.
#[derive(Clone, Debug)]
pub struct LayeredSystem {
    pub spec: HamiltonianSpec,
    pub graph: InteractionGraph,
    pub schedule: LayerSchedule,
    pub ground: GroundSpaceBasis,
    pub p: LinearMap,
}

impl LayeredSystem {
    pub fn new(spec: HamiltonianSpec) -> Result<Self> {
        let graph = interaction_graph(&spec, DEFAULT_COMMUTATOR_TOL)?;
        let schedule = greedy_color(&graph);
        Self::assemble(spec, graph, schedule)
    }

    pub fn with_schedule(spec: HamiltonianSpec, schedule: LayerSchedule) -> Result<Self> {
        let graph = interaction_graph(&spec, DEFAULT_COMMUTATOR_TOL)?;
        if !schedule.is_proper(&graph) {
            return Err(Error::ScheduleMismatch(
                "a layer contains non-commuting terms".into(),
            ));
        }
        Self::assemble(spec, graph, schedule)
    }

    fn assemble(
        spec: HamiltonianSpec,
        graph: InteractionGraph,
        schedule: LayerSchedule,
    ) -> Result<Self> {
        let p = build_p(&spec, &schedule)?;
        let ground = ground_space(&spec)?;
        Ok(Self {
            spec,
            graph,
            schedule,
            ground,
            p,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.ground.gap
    }

    pub fn g(&self) -> usize {
        self.graph.g
    }

    /// `δ = ε/(g² + ε)`
    pub fn delta(&self) -> f64 {
        let eps = self.epsilon();
        if eps.is_infinite() {
            return 1.0;
        }
        let g2 = (self.g() * self.g()) as f64;
        eps / (g2 + eps)
    }

    pub fn g_map(&self) -> LinearMap {
        self.ground.projector()
    }

    pub fn p_minus_g(&self) -> Result<LinearMap> {
        self.p.clone().minus(self.g_map())
    }

    pub fn ptp(&self) -> Result<LinearMap> {
        LinearMap::product(vec![self.p.adjoint(), self.p.clone()])
    }

    pub fn ptp_minus_g(&self) -> Result<LinearMap> {
        self.ptp()?.minus(self.g_map())
    }
}

/// `1/√(1 + ε/g²)`
pub fn dl_bound(epsilon: f64, g: usize) -> f64 {
    let g2 = (g * g) as f64;
    1.0 / (1.0 + epsilon / g2).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DlReport {
    pub epsilon: f64,
    pub g: usize,
    pub c: usize,
    /// `‖P − G‖` from power iteration.
    pub dl_norm: f64,
    pub norm_iterations: usize,
    /// `√λ_max(P†P − G)`, an independent route to the same norm.
    pub dl_norm_spectral: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
    pub delta: f64,
    pub ptp_min: f64,
    pub ptp_max: f64,
    pub eq10_pass: bool,
}

pub fn dl_check(spec: &HamiltonianSpec) -> Result<DlReport> {
    dl_check_system(&LayeredSystem::new(spec.clone())?, &NormOptions::default())
}

pub fn dl_check_system(sys: &LayeredSystem, opts: &NormOptions) -> Result<DlReport> {
    let dim = sys.dim();
    let est = opts.norm(&sys.p_minus_g()?)?;
    let (ptp_min, ptp_max) = extremal_eigs(&sys.ptp_minus_g()?, dim)?;
    let epsilon = sys.epsilon();
    let bound = dl_bound(epsilon, sys.g());
    let delta = sys.delta();
    Ok(DlReport {
        epsilon,
        g: sys.g(),
        c: sys.schedule.c,
        dl_norm: est.value,
        norm_iterations: est.iterations,
        dl_norm_spectral: ptp_max.max(0.0).sqrt(),
        bound,
        margin: bound - est.value,
        pass: est.value <= bound + DL_SLACK,
        delta,
        ptp_min,
        ptp_max,
        eq10_pass: ptp_min >= -EQ10_SLACK && ptp_max <= 1.0 - delta + EQ10_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemarkRow {
    pub q: f64,
    pub n: usize,
    pub epsilon: f64,
    pub dl_norm: f64,
    /// `|1 − ‖P − G‖ − ε|`
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
    /// Same quantities with the layer order reversed (`P = L_1···L_c`).
    pub reversed: Option<(f64, f64)>,
}

fn remark_point(
    q: f64,
    n: usize,
    tol: f64,
    with_reversed: bool,
    opts: &NormOptions,
) -> Result<RemarkRow> {
    let sys = LayeredSystem::new(xxz_spec(q, n)?)?;
    let epsilon = sys.epsilon();
    let dl_norm = opts.norm(&sys.p_minus_g()?)?.value;
    let residual = (1.0 - dl_norm - epsilon).abs();
    let reversed = if with_reversed {
        let mut layers = sys.schedule.layers();
        layers.reverse();
        let p = build_p_ordered(&sys.spec, &layers)?;
        let norm = opts.norm(&p.minus(sys.g_map())?)?.value;
        Some((norm, (1.0 - norm - epsilon).abs()))
    } else {
        None
    };
    Ok(RemarkRow {
        q,
        n,
        epsilon,
        dl_norm,
        residual,
        bound: dl_bound(epsilon, sys.g()),
        pass: residual <= tol,
        reversed,
    })
}

/// Tests `1 − ‖P − G‖ = ε` for the XXZ chain over a `(q, n)` grid with the
/// greedy two-layer schedule. Rows come back in grid order (q outer).
pub fn remark_scan(
    q_grid: &[f64],
    n_grid: &[usize],
    tol: f64,
    with_reversed: bool,
    opts: &NormOptions,
) -> Result<Vec<RemarkRow>> {
    let points: Vec<(f64, usize)> = q_grid
        .iter()
        .flat_map(|&q| n_grid.iter().map(move |&n| (q, n)))
        .collect();
    points
        .par_iter()
        .map(|&(q, n)| remark_point(q, n, tol, with_reversed, opts))
        .collect()
}
