//! Command-line front end: hypothesis checks, certificates, solves,
//! simulations, decay checks and ergodic diagnostics for a model config.
//!
//! Exit codes: 0 success, 1 mathematical failure, 2 input error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tscnn::config::{builtin, BUILTINS};
use tscnn::expr::range::SupMode;
use tscnn::expr::Var;
use tscnn::model::{certificate_from, check_hypotheses, derived_constants, CnnModel, StabilityCertificate};
use tscnn::solver::{fixed_point, residual_check, simulate, verify_decay, FixedPoint, GridFunction, SolveOptions};
use tscnn::wpap::{pap0_diagnostic, Weight};
use tscnn::{parse, CertificateIssue, Error, Grid, ModelConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MATH: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tscnn", version, about = "Stability analysis of delayed neural networks on time scales")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SupChoice {
    Pattern,
    Sampled,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model config path, or `builtin:<name>`.
    pub config: String,
    /// Print a JSON report instead of text.
    #[arg(long)]
    pub json: bool,
    /// Window `a,b`: estimation window for check/certify, reporting window otherwise.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub window: Option<(f64, f64)>,
    #[arg(long)]
    pub h_grid: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long, value_enum)]
    pub sup_mode: Option<SupChoice>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the hypotheses (H1)-(H5).
    Check(Common),
    /// Exponential stability certificate (λ, M).
    Certify {
        #[command(flatten)]
        common: Common,
        /// Multiply λ by this factor (values above 1 test the envelope check).
        #[arg(long, default_value_t = 1.0)]
        lambda_scale: f64,
    },
    /// Fixed-point solution on the reporting window.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Solution CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward simulation from initial data on [-γ, 0].
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial data as `;`-separated expressions in t.
        #[arg(long, conflicts_with = "perturb")]
        history: Option<String>,
        /// Initial data: the fixed point plus this offset.
        #[arg(long, allow_hyphen_values = true)]
        perturb: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the decay envelope for a perturbed simulation.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        perturb: f64,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted ergodic means over growing windows.
    Ergodic {
        #[command(flatten)]
        common: Common,
        /// `input` for the model inputs, or `;`-separated expressions in t.
        #[arg(long, default_value = "input")]
        target: String,
        /// Radii `r1,r2,...`.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in example config.
    Example {
        /// One of the built-in names.
        name: String,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(a)?, num(b)?))
}

/// Failure of a command, with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotRegressive { .. }
        | Error::NonpositiveWeight { .. }
        | Error::NonpositiveDecay { .. }
        | Error::CertificateUnavailable(_)
        | Error::TailBoundUnachievable { .. }
        | Error::WindowTooSmall(_)
        | Error::NotContractive { .. }
        | Error::MaxIterExceeded { .. }
        | Error::DelayedLookupMiss { .. } => EXIT_MATH,
        Error::InvalidTimeScale(_)
        | Error::NotInTimeScale { .. }
        | Error::EmptyWindow { .. }
        | Error::NotInTranslationSet { .. }
        | Error::Parse(_)
        | Error::Domain(_)
        | Error::HistoryIncomplete { .. }
        | Error::GridMismatch
        | Error::InvalidModel(_)
        | Error::InvalidArgument(_) => EXIT_INPUT,
    }
}

type Outcome = std::result::Result<i32, Failure>;

struct Loaded {
    cfg: ModelConfig,
    model: CnnModel,
}

fn load(c: &Common, window_is_estimation: bool) -> std::result::Result<Loaded, Failure> {
    let mut cfg = ModelConfig::load(&c.config)?;
    let nm = &mut cfg.numerics;
    if let Some(h) = c.h_grid {
        if !(h > 0.0 && h.is_finite()) {
            return Err(input(format!("--h-grid must be positive, got {h}")));
        }
        nm.h_grid = h;
    }
    if let Some((a, b)) = c.window {
        if !(a < b) {
            return Err(input(format!("--window needs a < b, got {a},{b}")));
        }
        if window_is_estimation {
            nm.window = [a, b];
        } else {
            nm.solve_window = Some([a, b]);
        }
    }
    if let Some(mode) = c.sup_mode {
        nm.sup_mode = Some(match mode {
            SupChoice::Pattern => SupMode::Pattern,
            SupChoice::Sampled => SupMode::Sampled,
        });
    }
    if let Some(r) = c.r0 {
        if !(r > 0.0 && r.is_finite()) {
            return Err(input(format!("--r0 must be positive, got {r}")));
        }
        cfg.r0 = r;
    }
    let model = cfg.to_model()?;
    for x in [cfg.numerics.window[0], cfg.numerics.window[1]] {
        if !model.ts.contains(x) {
            return Err(Error::NotInTimeScale { t: x }.into());
        }
    }
    Ok(Loaded { cfg, model })
}

fn emit(out: &mut dyn Write, json: bool, value: &Value, text: &str) -> std::result::Result<(), Failure> {
    let s = if json { serde_json::to_string_pretty(value).expect("report serializes") } else { text.to_string() };
    writeln!(out, "{}", s.trim_end()).map_err(|e| input(format!("stdout: {e}")))
}

fn write_file(path: &Option<PathBuf>, contents: &str) -> std::result::Result<(), Failure> {
    if let Some(p) = path {
        std::fs::write(p, contents).map_err(|e| input(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_check(c: &Common, out: &mut dyn Write) -> Outcome {
    let l = load(c, true)?;
    let est = l.cfg.estimation();
    match check_hypotheses(&l.model, l.cfg.r0, &est) {
        Ok(rep) => {
            let value = serde_json::to_value(&rep).expect("report serializes");
            let value = json!({ "all_pass": rep.all_pass(), "report": value });
            emit(out, c.json, &value, &rep.render_text())?;
            Ok(if rep.all_pass() { EXIT_OK } else { EXIT_MATH })
        }
        Err(e @ Error::NonpositiveDecay { .. }) => {
            let msg = format!("H3 FAIL: {e}");
            emit(out, c.json, &json!({ "all_pass": false, "h3": false, "error": e.to_string() }), &msg)?;
            Ok(EXIT_MATH)
        }
        Err(e) => Err(e.into()),
    }
}

fn certificate(l: &Loaded) -> std::result::Result<(StabilityCertificate, bool), Failure> {
    let k = derived_constants(&l.model, l.cfg.r0, &l.cfg.estimation())?;
    match certificate_from(&k, l.model.ts.mu_bar(), l.model.max_delay(), 0.5) {
        Ok(cert) => Ok((cert, false)),
        Err(Error::CertificateUnavailable(CertificateIssue::ZeroCoupling(cert))) => Ok((*cert, true)),
        Err(e) => Err(e.into()),
    }
}

fn certificate_text(cert: &StabilityCertificate, zero_coupling: bool) -> String {
    let mut s = format!("lambda = {:.10}\nM = {:.10}\n", cert.lambda, cert.m);
    for i in 0..cert.eps.len() {
        s += &format!(
            "  i={}: eps in [{:.12}, {:.12}], H(lambda) = {:.10}\n",
            i + 1,
            cert.brackets[i].0,
            cert.brackets[i].1,
            cert.h_at_lambda[i]
        );
    }
    s += &format!("mu_bar = {}, gamma = {}, safety factor = {}\n", cert.mu_bar, cert.gamma, cert.safety_factor);
    if zero_coupling {
        s += "ZeroCoupling: every coupling sum vanishes; M is a fallback value\n";
    }
    s
}

fn scaled(mut cert: StabilityCertificate, k: f64) -> std::result::Result<StabilityCertificate, Failure> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(input(format!("--lambda-scale must be positive, got {k}")));
    }
    cert.lambda *= k;
    Ok(cert)
}

fn cmd_certify(c: &Common, lambda_scale: f64, out: &mut dyn Write) -> Outcome {
    let l = load(c, true)?;
    let (cert, zero) = certificate(&l)?;
    let cert = scaled(cert, lambda_scale)?;
    let value = json!({ "certificate": cert, "zero_coupling": zero, "lambda_scale": lambda_scale });
    emit(out, c.json, &value, &certificate_text(&cert, zero))?;
    Ok(EXIT_OK)
}

fn solve(l: &Loaded) -> std::result::Result<(FixedPoint, SolveOptions), Failure> {
    let opts = SolveOptions::from_config(&l.cfg);
    Ok((fixed_point(&l.model, &l.cfg.estimation(), &opts)?, opts))
}

fn cmd_solve(c: &Common, path: &Option<PathBuf>, out: &mut dyn Write) -> Outcome {
    let l = load(c, false)?;
    let (fp, opts) = solve(&l)?;
    let (a, b) = opts.window;
    let res = residual_check(&l.model, &fp.full, a, b, opts.tail_tol)?;
    write_file(path, &fp.solution.to_csv())?;
    let mut text = format!(
        "converged in {} iterations: delta = {:e}, a-posteriori bound = {:e}, rho = {:.10}\n",
        fp.iterations, fp.delta, fp.error_bound, fp.rho
    );
    for (k, (d, r)) in fp.deltas.iter().zip(&fp.norms[1..]).enumerate() {
        text += &format!("  iter {:>3}: delta = {:e}, norm = {:.10}\n", k + 1, d, r);
    }
    text += &format!(
        "lookback {:.4}, left extension {:.4}, sup norm on [{a}, {b}] = {:.10}\n",
        fp.t_back,
        fp.extension,
        fp.solution.sup_norm()
    );
    text += &format!(
        "residual: dense {:e} (tol {:e}), scattered {:e} (tol {:e}) {}\n",
        res.max_dense,
        res.tol_dense,
        res.max_scattered,
        res.tol_scattered,
        if res.pass { "pass" } else { "FAIL" }
    );
    let value = json!({
        "iterations": fp.iterations,
        "delta": fp.delta,
        "error_bound": fp.error_bound,
        "rho": fp.rho,
        "t_back": fp.t_back,
        "extension": fp.extension,
        "deltas": fp.deltas,
        "norms": fp.norms,
        "sup_norm": fp.solution.sup_norm(),
        "window": [a, b],
        "residual": res,
    });
    emit(out, c.json, &value, &text)?;
    Ok(EXIT_OK)
}

fn history_from_exprs(l: &Loaded, src: &str) -> std::result::Result<GridFunction, Failure> {
    let exprs = src.split(';').map(|s| parse(s.trim()).map_err(Error::from)).collect::<tscnn::Result<Vec<_>>>()?;
    if exprs.len() != l.model.n() {
        return Err(input(format!("--history needs {} expressions, got {}", l.model.n(), exprs.len())));
    }
    let m = &l.model;
    let h = l.cfg.numerics.h_grid;
    let g = m.max_delay();
    let grid = Grid::build_closed(&m.ts, -g, 0.0, h, &m.kinks(-g, 0.0, h))?;
    Ok(GridFunction::from_fn(grid, |t| exprs.iter().map(|e| Ok(e.eval(t)?)).collect())?)
}

fn t_end_of(l: &Loaded, t_end: Option<f64>) -> std::result::Result<f64, Failure> {
    let t = t_end.unwrap_or(l.cfg.numerics.t_end());
    if !(t > 0.0 && t.is_finite()) {
        return Err(input(format!("--t-end must be positive, got {t}")));
    }
    if !l.model.ts.contains(t) {
        return Err(Error::NotInTimeScale { t }.into());
    }
    Ok(t)
}

fn cmd_simulate(
    c: &Common,
    history: &Option<String>,
    perturb: Option<f64>,
    t_end: Option<f64>,
    path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Outcome {
    let l = load(c, false)?;
    let t_end = t_end_of(&l, t_end)?;
    let h = l.cfg.numerics.h_grid;
    let hist = match history {
        Some(src) => history_from_exprs(&l, src)?,
        None => solve(&l)?.0.history(&l.model, h, perturb.unwrap_or(0.0))?,
    };
    let tr = simulate(&l.model, &hist, t_end, h)?;
    write_file(path, &tr.to_csv())?;
    let last = tr.states.last().expect("nonempty");
    let sup = tr.to_grid_function().sup_norm();
    let text = format!(
        "simulated {} nodes on [0, {}]: sup norm {:.10}, final state {:?}\n",
        tr.grid.len(),
        tr.grid.end(),
        sup,
        last
    );
    let value = json!({ "nodes": tr.grid.len(), "t_end": tr.grid.end(), "sup_norm": sup, "final_state": last });
    emit(out, c.json, &value, &text)?;
    Ok(EXIT_OK)
}

fn cmd_decay(c: &Common, perturb: f64, t_end: Option<f64>, lambda_scale: f64, path: &Option<PathBuf>, out: &mut dyn Write) -> Outcome {
    let l = load(c, false)?;
    let t_end = t_end_of(&l, t_end)?;
    let h = l.cfg.numerics.h_grid;
    let (cert, zero) = certificate(&l)?;
    let cert = scaled(cert, lambda_scale)?;
    let fp = solve(&l)?.0;
    let star = simulate(&l.model, &fp.history(&l.model, h, 0.0)?, t_end, h)?;
    let pert = simulate(&l.model, &fp.history(&l.model, h, perturb)?, t_end, h)?;
    let rep = verify_decay(&pert, &star, &cert, &l.model.ts)?;
    write_file(path, &rep.to_csv())?;
    let mut text = format!(
        "envelope M e(-lambda)(t, 0) |psi| with lambda = {:.10}, M = {:.10}, |psi| = {}\n",
        rep.lambda, rep.m, rep.psi_norm
    );
    text += &format!("worst ratio {:.6e} at t = {}, violations {}\n", rep.worst_ratio, rep.worst_t, rep.violations);
    if let Some(t) = rep.first_violation {
        text += &format!("first violation at t = {t}\n");
    }
    if zero {
        text += "ZeroCoupling: M is a fallback value\n";
    }
    text += if rep.pass { "pass\n" } else { "FAIL\n" };
    let mut value = serde_json::to_value(&rep).expect("report serializes");
    value["zero_coupling"] = json!(zero);
    emit(out, c.json, &value, &text)?;
    Ok(if rep.pass { EXIT_OK } else { EXIT_MATH })
}

fn cmd_ergodic(c: &Common, target: &str, radii: &Option<Vec<f64>>, path: &Option<PathBuf>, out: &mut dyn Write) -> Outcome {
    let l = load(c, false)?;
    let g = if target == "input" {
        l.model.inputs.clone()
    } else {
        target.split(';').map(|s| parse(s.trim()).map_err(Error::from)).collect::<tscnn::Result<Vec<_>>>()?
    };
    for e in &g {
        if e.var() == Some(Var::X) {
            return Err(input(format!("target `{e}` must be a function of t")));
        }
    }
    let radii = radii.clone().unwrap_or_else(|| l.cfg.numerics.radii.clone());
    let u: &Weight = &l.model.weight;
    let rep = pap0_diagnostic(&l.model.ts, u, &g, &radii, l.cfg.numerics.h_grid, l.cfg.numerics.thresholds())?;
    write_file(path, &rep.to_csv())?;
    let mut text = String::from("r, mass, mean\n");
    for i in 0..rep.radii.len() {
        text += &format!("  {}, {:.10e}, {:.10e}\n", rep.radii[i], rep.masses[i], rep.means[i]);
    }
    text += &format!("trend slope {:.6}, verdict {}\n", rep.trend_slope, rep.verdict);
    emit(out, c.json, &rep.summary_json(), &text)?;
    Ok(EXIT_OK)
}

fn cmd_example(name: &str, out: &mut dyn Write) -> Outcome {
    let text = builtin(name).ok_or_else(|| input(format!("unknown example `{name}` (known: {})", BUILTINS.join(", "))))?;
    write!(out, "{text}").map_err(|e| input(format!("stdout: {e}")))?;
    Ok(EXIT_OK)
}

/// Run a parsed command, writing the report to `out`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let outcome = match &cli.command {
        Command::Check(c) => cmd_check(c, out),
        Command::Certify { common, lambda_scale } => cmd_certify(common, *lambda_scale, out),
        Command::Solve { common, out: path } => cmd_solve(common, path, out),
        Command::Simulate { common, history, perturb, t_end, out: path } => {
            cmd_simulate(common, history, *perturb, *t_end, path, out)
        }
        Command::Decay { common, perturb, t_end, lambda_scale, out: path } => {
            cmd_decay(common, *perturb, *t_end, *lambda_scale, path, out)
        }
        Command::Ergodic { common, target, radii, out: path } => cmd_ergodic(common, target, radii, path, out),
        Command::Example { name } => cmd_example(name, out),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
