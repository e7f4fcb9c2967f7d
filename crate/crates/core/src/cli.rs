//! Command-line front end. Every command writes CSV with a `#` comment header
//! carrying the library version and a SHA-256 hash of the run configuration.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::agsp::{agsp_sweep, causal_cone_check, max_m_for_distance, LocalObservable};
use crate::correlation::{
    correlation_prefactor, correlator_deg, half_chain_entropy, xi_scaling_sweep, xi_upper_formula,
};
use crate::detectability::{dl_check_system, remark_scan, LayeredSystem, NormOptions};
use crate::error::Error;
use crate::linalg::apply_hamiltonian;
use crate::model::{
    validate_spec, xxz_correlator_closed_form, xxz_psi1, xxz_spec, ChainLength, HamiltonianSpec,
};
use crate::spectral::{default_zero_tol, ground_space};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

/// Largest chain run without `--force` when `s = 2`.
pub const DESK_SCALE_N: usize = 14;

/// Absolute tolerance on correlator series against the closed form.
pub const CORR_TOL: f64 = 1e-10;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "ffcorr",
    version,
    about = "Correlation-length checks for frustration-free chains"
)]
pub struct Cli {
    /// Worker threads for grid commands (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,

    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Structural checks and frustration-freeness.
    Validate(ModelArgs),
    /// Detectability-lemma bound and the spectrum of P†P − G.
    Dl(ModelArgs),
    /// `1 − ‖P − G‖ = ε` over a (q, n) grid of XXZ chains.
    Remark(RemarkArgs),
    /// `‖Q_m(P†P) − G‖` against `2e^{−2m√δ}`.
    Agsp(AgspArgs),
    /// Causal-cone identity for a pair of single-site observables.
    Cone(ConeArgs),
    /// Ground-space correlator series over distance.
    Corr(CorrArgs),
    /// Infinite-chain XXZ correlation-length scaling.
    Sweep(SweepArgs),
    /// Entanglement entropy of a ground state across each cut.
    Entropy(EntropyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinModel {
    Xxz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    /// Pauli σ^z.
    Z,
    /// `(1 − σ^z)/2`.
    Number,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, conflicts_with = "file")]
    pub model: Option<BuiltinModel>,
    /// Hamiltonian spec in JSON.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for power-iteration start vectors.
    #[arg(long, default_value_t = crate::linalg::DEFAULT_NORM_SEED)]
    pub seed: u64,
    /// Allow chains beyond desk scale.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct RemarkArgs {
    /// `start:stop:step` or a comma list.
    #[arg(long, default_value = "0.3:0.9:0.2")]
    pub q_grid: String,
    #[arg(long, default_value = "4:10:2")]
    pub n_grid: String,
    #[arg(long, default_value_t = crate::detectability::REMARK_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = crate::linalg::DEFAULT_NORM_SEED)]
    pub seed: u64,
    /// Also report the reversed layer order.
    #[arg(long)]
    pub reversed: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct AgspArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub m_max: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ConeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub a: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long, value_enum, default_value_t = ObservableKind::Z)]
    pub observable: ObservableKind,
    /// Largest `m` required to hold (defaults to the admissible maximum).
    #[arg(long)]
    pub m_max: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct CorrArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ObservableKind::Number)]
    pub observable: ObservableKind,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value = "0.90:0.99:0.01")]
    pub q_grid: String,
}

#[derive(Args, Debug, Serialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Single cut (all cuts if absent).
    #[arg(long)]
    pub cut: Option<usize>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Json(_) | Error::Format { .. } => EXIT_IO,
            Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn fail(code: i32, message: impl Into<String>) -> CliError {
    CliError {
        code,
        message: message.into(),
    }
}

/// CSV body plus the verdict of the command's checks.
pub struct Output {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Output {
    fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
            pass: true,
        }
    }
}

/// Parses `start:stop:step` (stop included within half a step) or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {s:?}: {e}"))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => text.split(',').map(parse).collect(),
        3 => {
            let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
            if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() {
                return Err(format!("bad range {text:?}"));
            }
            let count = ((stop - start) / step + 0.5).floor();
            if count < 0.0 {
                return Err(format!("empty range {text:?}"));
            }
            // Snap to 12 decimals so 0.3 + 3·0.2 prints as 0.9.
            Ok((0..=count as usize)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(format!(
            "grid {text:?} is neither start:stop:step nor a list"
        )),
    }
}

pub fn parse_int_grid(text: &str) -> Result<Vec<usize>, String> {
    parse_grid(text)?
        .into_iter()
        .map(|x| {
            let r = x.round();
            if (x - r).abs() > 1e-9 || r < 0.0 {
                Err(format!("{x} is not a non-negative integer"))
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e6)`.
fn fmt_f(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Hex SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    config_hash_with(config, &[])
}

/// As [`config_hash`], also covering the bytes of any input file.
pub fn config_hash_with<T: Serialize>(config: &T, extra: &[u8]) -> String {
    let json = serde_json::to_string(config).expect("configuration serializes");
    let mut h = Sha256::new();
    h.update(json.as_bytes());
    h.update(extra);
    hex::encode(h.finalize())
}

fn input_file(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Validate(m) | Command::Dl(m) => m.file.as_ref(),
        Command::Agsp(a) => a.model.file.as_ref(),
        Command::Cone(a) => a.model.file.as_ref(),
        Command::Corr(a) => a.model.file.as_ref(),
        Command::Entropy(a) => a.model.file.as_ref(),
        Command::Remark(_) | Command::Sweep(_) => None,
    }
}

fn desk_guard(n: usize, s: usize, force: bool) -> Result<(), CliError> {
    let dim = (s as f64).powi(n as i32);
    let limit = 2f64.powi(DESK_SCALE_N as i32);
    if dim > limit && !force {
        return Err(fail(
            EXIT_VALIDATION,
            format!(
                "dimension {s}^{n} exceeds desk scale ({limit} amplitudes); state vectors need {} MiB each, pass --force to run anyway",
                dim * 16.0 / (1024.0 * 1024.0)
            ),
        ));
    }
    Ok(())
}

fn load_model(args: &ModelArgs) -> Result<HamiltonianSpec, CliError> {
    let spec = match (&args.file, args.model) {
        (Some(path), _) => HamiltonianSpec::load(path)?,
        (None, _) => xxz_spec(args.q, args.n)?,
    };
    desk_guard(spec.n, spec.local_dim, args.force)?;
    Ok(spec)
}

fn is_builtin(args: &ModelArgs) -> bool {
    args.file.is_none()
}

fn gapless_note(args: &ModelArgs) -> Option<String> {
    (is_builtin(args) && args.q == 1.0)
        .then(|| "warning: q = 1 is the gapless point; the infinite-chain gap vanishes".to_string())
}

fn observable(kind: ObservableKind, site: usize) -> LocalObservable {
    match kind {
        ObservableKind::Z => LocalObservable::pauli_z(site),
        ObservableKind::Number => LocalObservable::number(site),
    }
}

fn norm_options(seed: u64) -> NormOptions {
    NormOptions {
        seed,
        ..NormOptions::default()
    }
}

fn cmd_validate(args: &ModelArgs) -> Result<Output, CliError> {
    let spec = load_model(args)?;
    let mut out = Output::new(vec!["check", "term", "detail"]);
    let report = validate_spec(&spec);
    for v in &report.violations {
        let term = match v {
            crate::model::Violation::NotHermitian { term, .. }
            | crate::model::Violation::MinEigenvalueNotZero { term, .. }
            | crate::model::Violation::NormExceedsOne { term, .. }
            | crate::model::Violation::DiameterExceedsRange { term, .. }
            | crate::model::Violation::DuplicateSupport { term, .. } => *term,
        };
        out.rows
            .push(vec!["structure".into(), term.to_string(), v.to_string()]);
    }
    if !report.is_valid() {
        out.pass = false;
        return Ok(out);
    }
    let zero_tol = args.tol.unwrap_or_else(|| default_zero_tol(&spec));
    match crate::spectral::ground_space_with_tol(&spec, zero_tol) {
        Ok(ground) => {
            out.notes.push(format!(
                "frustration-free: degeneracy {} gap {}",
                ground.degeneracy, ground.gap
            ));
        }
        Err(Error::NotFrustrationFree {
            ground_energy,
            zero_tol,
        }) => {
            out.pass = false;
            out.rows.push(vec![
                "frustration".into(),
                String::new(),
                format!("ground energy > tol ({ground_energy:e} > {zero_tol:e})"),
            ]);
        }
        Err(Error::Inconsistent {
            vector,
            term,
            residual,
        }) => {
            out.pass = false;
            out.rows.push(vec![
                "frustration".into(),
                term.to_string(),
                format!("ground vector {vector} violates term: residual {residual:e}"),
            ]);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn cmd_dl(args: &ModelArgs) -> Result<Output, CliError> {
    let spec = load_model(args)?;
    let sys = LayeredSystem::new(spec)?;
    let r = dl_check_system(&sys, &norm_options(args.seed))?;
    let mut out = Output::new(vec![
        "epsilon", "g", "c", "dl_norm", "bound", "margin", "delta", "ptp_min", "ptp_max", "pass",
    ]);
    out.pass = r.pass && r.eq10_pass;
    out.rows.push(vec![
        fmt_f(r.epsilon),
        r.g.to_string(),
        r.c.to_string(),
        fmt_f(r.dl_norm),
        fmt_f(r.bound),
        fmt_f(r.margin),
        fmt_f(r.delta),
        fmt_f(r.ptp_min),
        fmt_f(r.ptp_max),
        out.pass.to_string(),
    ]);
    out.notes.extend(gapless_note(args));
    Ok(out)
}

fn cmd_remark(args: &RemarkArgs) -> Result<Output, CliError> {
    let qs = parse_grid(&args.q_grid).map_err(|e| fail(EXIT_IO, e))?;
    let ns = parse_int_grid(&args.n_grid).map_err(|e| fail(EXIT_IO, e))?;
    for &n in &ns {
        desk_guard(n, 2, args.force)?;
    }
    let rows = remark_scan(&qs, &ns, args.tol, args.reversed, &norm_options(args.seed))?;
    let mut columns = vec!["q", "n", "epsilon", "dl_norm", "residual", "bound", "pass"];
    if args.reversed {
        columns.extend(["reversed_dl_norm", "reversed_residual"]);
    }
    let mut out = Output::new(columns);
    for r in &rows {
        out.pass &= r.pass;
        let mut row = vec![
            fmt_f(r.q),
            r.n.to_string(),
            fmt_f(r.epsilon),
            fmt_f(r.dl_norm),
            fmt_f(r.residual),
            fmt_f(r.bound),
            r.pass.to_string(),
        ];
        if let Some((norm, res)) = r.reversed {
            row.extend([fmt_f(norm), fmt_f(res)]);
        }
        out.rows.push(row);
    }
    if qs.contains(&1.0) {
        out.notes
            .push("warning: q = 1 is the gapless point; the infinite-chain gap vanishes".into());
    }
    Ok(out)
}

fn cmd_agsp(args: &AgspArgs) -> Result<Output, CliError> {
    let spec = load_model(&args.model)?;
    let sys = LayeredSystem::new(spec)?;
    let degrees: Vec<usize> = (1..=args.m_max).collect();
    let rows = agsp_sweep(&sys, &degrees)?;
    let mut out = Output::new(vec!["m", "delta", "bound", "measured_norm", "margin"]);
    let slack = args.model.tol.unwrap_or(1e-10);
    for r in &rows {
        out.pass &= r.margin >= -slack;
        out.rows.push(vec![
            r.m.to_string(),
            fmt_f(r.delta),
            fmt_f(r.bound),
            fmt_f(r.measured_norm),
            fmt_f(r.margin),
        ]);
    }
    out.notes.extend(gapless_note(&args.model));
    Ok(out)
}

fn cmd_cone(args: &ConeArgs) -> Result<Output, CliError> {
    let spec = load_model(&args.model)?;
    let sys = LayeredSystem::new(spec)?;
    let a = observable(args.observable, args.a);
    let b = observable(args.observable, args.b);
    let d = sys.spec.distance(&a.sites, &b.sites).max(0) as usize;
    let m_max = match args.m_max {
        Some(m) => m,
        None => max_m_for_distance(d, sys.schedule.c.max(1), sys.spec.range)?,
    };
    let report = causal_cone_check(&sys, &a, &b, m_max)?;
    let tol = args.model.tol.unwrap_or(crate::agsp::CONE_TOL);
    let mut out = Output::new(vec!["m", "admissible", "residual", "holds"]);
    for r in &report.rows {
        let holds = r.residual <= tol;
        if r.admissible && r.m <= m_max {
            out.pass &= holds;
        }
        out.rows.push(vec![
            r.m.to_string(),
            r.admissible.to_string(),
            fmt_f(r.residual),
            holds.to_string(),
        ]);
    }
    out.notes.push(format!(
        "distance {} max admissible m {}",
        report.distance,
        report
            .max_admissible
            .map_or("unbounded".to_string(), |m| m.to_string())
    ));
    Ok(out)
}

fn cmd_corr(args: &CorrArgs) -> Result<Output, CliError> {
    let spec = load_model(&args.model)?;
    let ground = ground_space(&spec)?;
    let builtin = is_builtin(&args.model);
    let psi = if builtin {
        xxz_psi1(args.model.q, args.model.n)?
    } else {
        ground.vectors[0].clone()
    };
    let tol = args.model.tol.unwrap_or(CORR_TOL);
    let graph = crate::model::interaction_graph(&spec, crate::model::DEFAULT_COMMUTATOR_TOL)?;
    let c = crate::detectability::greedy_color(&graph).c;
    let xi = if ground.gap.is_finite() && spec.range > 1 {
        Some(xi_upper_formula(c, spec.range, graph.g, ground.gap)?)
    } else {
        None
    };
    let mut out = Output::new(vec!["d", "value", "closed_form", "abs_err"]);
    for j in 2..=spec.n {
        let a = observable(args.observable, 1);
        let b = observable(args.observable, j);
        let d = spec.distance(&a.sites, &b.sites).max(0) as usize;
        let value = correlator_deg(&spec, &ground, &psi, &a, &b)?;
        if let Some(xi) = xi {
            let bound = correlation_prefactor() * a.norm() * b.norm() * (-(d as f64) / xi).exp();
            out.pass &= value <= bound * (1.0 + 1e-12);
        }
        let (cf, err) = if builtin && args.observable == ObservableKind::Number {
            let cf = xxz_correlator_closed_form(args.model.q, ChainLength::Finite(spec.n), d)?;
            let err = (value - cf).abs();
            out.pass &= err <= tol;
            (fmt_f(cf), fmt_f(err))
        } else {
            (String::new(), String::new())
        };
        out.rows.push(vec![d.to_string(), fmt_f(value), cf, err]);
    }
    out.notes.extend(gapless_note(&args.model));
    Ok(out)
}

fn cmd_sweep(args: &SweepArgs) -> Result<Output, CliError> {
    let qs = parse_grid(&args.q_grid).map_err(|e| fail(EXIT_IO, e))?;
    let sweep = xi_scaling_sweep(&qs)?;
    let mut out = Output::new(vec![
        "q", "epsilon", "xi_fit", "xi_lower", "xi_upper", "slope",
    ]);
    out.pass = (-0.55..=-0.45).contains(&sweep.slope);
    for r in &sweep.rows {
        out.pass &= r.xi_lower <= r.xi_fit * (1.0 + 1e-9) && r.xi_fit <= r.xi_upper;
        out.rows.push(vec![
            fmt_f(r.q),
            fmt_f(r.epsilon),
            fmt_f(r.xi_fit),
            fmt_f(r.xi_lower),
            fmt_f(r.xi_upper),
            fmt_f(sweep.slope),
        ]);
    }
    Ok(out)
}

fn cmd_entropy(args: &EntropyArgs) -> Result<Output, CliError> {
    let spec = load_model(&args.model)?;
    let psi = if is_builtin(&args.model) {
        xxz_psi1(args.model.q, args.model.n)?
    } else {
        ground_space(&spec)?.vectors[0].clone()
    };
    let residual = apply_hamiltonian(&spec, &psi)?.norm();
    let cuts: Vec<usize> = match args.cut {
        Some(c) => vec![c],
        None => (1..spec.n).collect(),
    };
    let mut out = Output::new(vec!["cut", "entropy"]);
    for cut in cuts {
        let s = half_chain_entropy(&psi, spec.local_dim, cut)?;
        out.rows.push(vec![cut.to_string(), fmt_f(s)]);
    }
    out.notes
        .push(format!("state residual |H psi| = {residual:e}"));
    out.notes.extend(gapless_note(&args.model));
    Ok(out)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate(_) => "validate",
        Command::Dl(_) => "dl",
        Command::Remark(_) => "remark",
        Command::Agsp(_) => "agsp",
        Command::Cone(_) => "cone",
        Command::Corr(_) => "corr",
        Command::Sweep(_) => "sweep",
        Command::Entropy(_) => "entropy",
    }
}

/// Runs a parsed command and renders the full CSV document.
pub fn execute(cli: &Cli) -> Result<(String, bool), CliError> {
    let output = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Dl(a) => cmd_dl(a),
        Command::Remark(a) => cmd_remark(a),
        Command::Agsp(a) => cmd_agsp(a),
        Command::Cone(a) => cmd_cone(a),
        Command::Corr(a) => cmd_corr(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Entropy(a) => cmd_entropy(a),
    }?;
    let file_bytes = match input_file(&cli.command) {
        Some(path) => std::fs::read(path)?,
        None => Vec::new(),
    };
    let mut doc = String::new();
    let _ = writeln!(
        doc,
        "# ffcorr {} command={} config_sha256={}",
        env!("CARGO_PKG_VERSION"),
        command_name(&cli.command),
        config_hash_with(&cli.command, &file_bytes)
    );
    for note in &output.notes {
        let _ = writeln!(doc, "# {note}");
    }
    let _ = writeln!(doc, "{}", output.columns.join(","));
    for row in &output.rows {
        let _ = writeln!(doc, "{}", row.join(","));
    }
    Ok((doc, output.pass))
}

fn emit(cli: &Cli, doc: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, doc)?,
        None => std::io::stdout().lock().write_all(doc.as_bytes())?,
    }
    Ok(())
}

/// Executes `cli` and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = if cli.threads > 0 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
        {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(fail(EXIT_VALIDATION, e.to_string())),
        }
    } else {
        execute(&cli)
    };
    match result.and_then(|(doc, pass)| emit(&cli, &doc).map(|_| pass)) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            if let Command::Validate(_) = cli.command {
                EXIT_VALIDATION
            } else {
                EXIT_BOUND
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_IO
            } else {
                EXIT_PASS
            }
        }
    }
}
