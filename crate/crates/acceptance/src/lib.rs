//! Acceptance criteria 1-10, each evaluated with pinned tolerances and a
//! runtime limit.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tscnn::expr::range::SupMode;
use tscnn::model::{check_hypotheses, derived_constants, stability_certificate, CnnModel, Estimation};
use tscnn::solver::{fixed_point, phi_map, residual_check, simulate, verify_decay, GridFunction, SolveOptions};
use tscnn::tscalc::{circle_minus, decay_bound, delta_integral, exp_fn, exp_fn_with};
use tscnn::wpap::{pap0_diagnostic, weight_mass, Thresholds, Verdict, Weight};
use tscnn::{parse, Grid, ModelConfig, Result, TimeScale};

pub const SEED: u64 = 20_240_611;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    /// Every numeric check held.
    pub checks_pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks_pass && self.elapsed <= self.limit
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {}: {} [{:.2} s, limit {} s]",
            self.id,
            if self.pass() { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        )
    }
}

pub const TITLES: [&str; 10] = [
    "first network constants",
    "second network constants",
    "exponential identities",
    "shifted integrals",
    "weight mass closed form",
    "contraction on random pairs",
    "fixed-point residual",
    "decay envelope",
    "decay bound dominance",
    "ergodic mean diagnostics",
];

const LIMITS: [u64; 10] = [5, 5, 10, 5, 5, 60, 120, 120, 10, 10];

/// Evaluate criterion `id` in `1..=10`.
pub fn evaluate(id: u8) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => first_constants(),
        2 => second_constants(),
        3 => exponential_identities(),
        4 => shifted_integrals(),
        5 => weight_mass_closed_form(),
        6 => contraction(),
        7 => residuals(),
        8 => decay().map(|d| (d.pass(), d.detail())),
        9 => dominance(),
        10 => ergodic(),
        _ => panic!("no criterion {id}"),
    };
    let elapsed = start.elapsed();
    let (checks_pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    let k = usize::from(id - 1);
    Outcome { id, title: TITLES[k], checks_pass, detail, elapsed, limit: Duration::from_secs(LIMITS[k]) }
}

pub fn evaluate_all() -> Vec<Outcome> {
    (1..=10).map(evaluate).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn load(name: &str) -> Result<(ModelConfig, CnnModel)> {
    let cfg = ModelConfig::load(&format!("builtin:{name}"))?;
    let m = cfg.to_model()?;
    Ok((cfg, m))
}

type Checked = Result<(bool, String)>;

fn first_constants() -> Checked {
    let (cfg, m) = load("example1")?;
    let est = cfg.estimation();
    let rep = check_hypotheses(&m, cfg.r0, &est)?;
    let k = &rep.constants;
    let e = [rel(k.pi[0], 152.0 / 84.0), rel(k.pi[1], 165.0 / 96.0)];
    let eta = rel(k.eta[0] / k.c_lo[0], 38.0 / 99.0);
    let sampled = derived_constants(&m, cfg.r0, &Estimation { sup_mode: SupMode::Sampled, ..est })?;
    let s = [rel(sampled.pi[0], 152.0 / 84.0), rel(sampled.pi[1], 165.0 / 96.0)];
    let pass = k.all_exact
        && e.iter().all(|&x| x < 1e-9)
        && s.iter().all(|&x| x < 1e-3)
        && eta < 1e-6
        && rep.h5_bound
        && rep.h5_contraction;
    let detail = format!(
        "Pi rel err {:.1e}, {:.1e} (< 1e-9); sampled {:.1e}, {:.1e} (< 1e-3); eta1/c1 rel err {:.1e} (< 1e-6); \
         max eta/c + L = {:.10} <= 1: {}; max Pi = {:.10} < {}: {}",
        e[0], e[1], s[0], s[1], eta, k.bound(), rep.h5_bound, k.pi[0].max(k.pi[1]), k.c_min(), rep.h5_contraction
    );
    Ok((pass, detail))
}

fn second_constants() -> Checked {
    let (cfg, m) = load("example2")?;
    let rep = check_hypotheses(&m, cfg.r0, &cfg.estimation())?;
    let k = &rep.constants;
    let e = [rel(k.pi[0], 19.0 / 168.0), rel(k.pi[1], 31.0 / 336.0), rel(k.c_min(), 0.8)];
    let eta = rel(k.eta[0] / k.c_lo[0], 665.0 / 2016.0);
    let pass = k.all_exact && e.iter().all(|&x| x < 1e-9) && eta < 1e-6 && rep.h5_bound && rep.h5_contraction;
    let detail = format!(
        "Pi rel err {:.1e}, {:.1e}, min c rel err {:.1e} (< 1e-9); eta1/c1 rel err {:.1e} (< 1e-6); \
         derived L = {:.10} (quoted 5/16 = 0.3125), max eta/c + L = {:.10} <= 1: {}; 19/168 < 0.8: {}",
        e[0], e[1], e[2], eta, k.l, k.bound(), rep.h5_bound, rep.h5_contraction
    );
    Ok((pass, detail))
}

/// The three scale families used by the calculus criteria.
pub fn families() -> [TimeScale; 3] {
    [
        TimeScale::Reals,
        TimeScale::lattice(0.5, 0.25).expect("valid lattice"),
        TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).expect("valid union"),
    ]
}

/// A point of the scale from a cell index and a fraction in `[0, 1]`.
fn point(ts: &TimeScale, k: i32, frac: f64) -> f64 {
    match ts {
        TimeScale::Reals => k as f64 + frac,
        TimeScale::Lattice { h, offset } => offset + h * k as f64,
        _ => 2.0 * k as f64 + frac,
    }
}

const EXP_H: f64 = 0.05;

/// Identities (ii)-(v) at one triple; returns the worst relative error.
fn identities_at(ts: &TimeScale, p: f64, s: f64, t: f64) -> Result<f64> {
    let e = |t: f64, s: f64| exp_fn(ts, |_| Ok(p), t, s, EXP_H);
    let minus = |t: f64, s: f64| exp_fn_with(ts, |_, mu| circle_minus(p, mu), t, s, EXP_H);
    let (mu_t, mu_s) = (ts.graininess(t)?, ts.graininess(s)?);
    let (st, ss) = (ts.sigma(t)?, ts.sigma(s)?);
    let ets = e(t, s)?;
    let ii = rel(e(st, s)?, (1.0 + mu_t * p) * ets);
    let iii = rel(e(t, ss)?, ets / (1.0 + mu_s * p));
    let m = minus(t, s)?;
    let iv = rel(m, 1.0 / ets);
    let deriv = if mu_t > 0.0 {
        (minus(st, s)? - m) / mu_t
    } else {
        let d = 1e-5;
        if ts.contains(t - d) {
            (minus(t + d, s)? - minus(t - d, s)?) / (2.0 * d)
        } else {
            (-3.0 * m + 4.0 * minus(t + d, s)? - minus(t + 2.0 * d, s)?) / (2.0 * d)
        }
    };
    let v = rel(deriv, circle_minus(p, mu_t)? * m);
    Ok(ii.max(iii).max(iv).max(v))
}

fn exponential_identities() -> Checked {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = [0.0f64; 3];
    for (f, ts) in families().iter().enumerate() {
        for _ in 0..100 {
            let p = rng.gen_range(-0.6..1.5);
            let s = point(ts, rng.gen_range(-8..8), rng.gen_range(0.0..=1.0));
            let t = point(ts, rng.gen_range(-8..8), rng.gen_range(0.0..=1.0));
            worst[f] = worst[f].max(identities_at(ts, p, s, t)?);
        }
    }
    let pass = worst.iter().all(|&w| w < 1e-8);
    Ok((pass, format!("worst rel err per family {:.1e}, {:.1e}, {:.1e} (< 1e-8), 100 triples each", worst[0], worst[1], worst[2])))
}

fn shifted_integrals() -> Checked {
    let ts = &families()[2];
    let fs: [fn(f64) -> f64; 3] = [f64::exp, |t| t * t, f64::sin];
    let exact = [
        3f64.exp() - 2f64.exp() + 3f64.exp(),
        19.0 / 3.0 + 9.0,
        2f64.cos() - 3f64.cos() + 3f64.sin(),
    ];
    let g = ts.build_grid(0.0, 2.0, 1e-4)?;
    let mut worst_closed = 0.0f64;
    for (f, ex) in fs.iter().zip(exact) {
        worst_closed = worst_closed.max(rel(delta_integral(&g, |t| Ok(f(t + 2.0)))?, ex));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst_shift = 0.0f64;
    for _ in 0..30 {
        let k = rng.gen_range(-3..3);
        let a = point(ts, k, rng.gen_range(0.0..=1.0));
        let b = point(ts, k + rng.gen_range(1..4), rng.gen_range(0.0..=1.0));
        let tau = 2.0 * rng.gen_range(1..4) as f64;
        for f in fs {
            let lhs = delta_integral(&ts.build_grid(a, b, 1e-3)?, |t| Ok(f(t + tau)))?;
            let rhs = delta_integral(&ts.build_grid(a + tau, b + tau, 1e-3)?, |t| Ok(f(t)))?;
            worst_shift = worst_shift.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    let pass = worst_closed < 1e-8 && worst_shift < 1e-8;
    Ok((
        pass,
        format!(
            "closed-form integrals over [0, 2] worst rel err {worst_closed:.1e} (< 1e-8); \
             translation over 30 random intervals worst {worst_shift:.1e} (< 1e-8, relative to max(|rhs|, 1))"
        ),
    ))
}

fn weight_mass_closed_form() -> Checked {
    let ts = &families()[2];
    let u = Weight::new(parse("exp(abs(t))")?);
    let mut worst = 0.0f64;
    for k in 1..=6 {
        let m = weight_mass(ts, &u, 2.0 * k as f64, 1e-3)?;
        let odd: f64 = (1..2 * k).step_by(2).map(|j| (j as f64).exp()).sum();
        worst = worst.max(rel(m, (2.0 * k as f64).exp() - 1.0 + 2.0 * odd));
    }
    Ok((worst < 1e-6, format!("worst rel err over k = 1..6: {worst:.1e} (< 1e-6)")))
}

/// A random element of the ball of radius `r0`: rough node values or a sum
/// of sinusoids.
pub fn random_ball(grid: &Grid, n: usize, r0: f64, rng: &mut ChaCha8Rng) -> GridFunction {
    let rough = rng.gen_bool(0.5);
    let coef: Vec<(f64, f64, f64)> =
        (0..n).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..6.3))).collect();
    let values = grid
        .nodes()
        .iter()
        .map(|&t| {
            coef.iter()
                .map(|&(a, w, q)| if rough { r0 * rng.gen_range(-1.0..1.0) } else { r0 * a * (w * t + q).sin() })
                .collect()
        })
        .collect();
    GridFunction::new(grid.clone(), values).expect("finite values")
}

fn contraction() -> Checked {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut detail = Vec::new();
    let mut pass = true;
    for name in ["example1", "example2"] {
        let (cfg, m) = load(name)?;
        let est = cfg.estimation();
        let rho = derived_constants(&m, cfg.r0, &est)?.rho();
        let tail = cfg.numerics.tail_tol;
        let h = cfg.numerics.h_grid;
        let grid = Grid::build(&m.ts, -60.0, 10.0, h, &m.kinks(-60.0, 10.0, h))?;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let phi = random_ball(&grid, m.n(), cfg.r0, &mut rng);
            let psi = random_ball(&grid, m.n(), cfg.r0, &mut rng);
            let a = phi_map(&m, &est, &phi, tail, cfg.numerics.max_lookback())?;
            let b = phi_map(&m, &est, &psi, tail, cfg.numerics.max_lookback())?;
            let start = a.grid.start().max(b.grid.start());
            let (a, b) = (a.restrict(start, grid.end()), b.restrict(start, grid.end()));
            let ratio = a.distance(&b)? / (rho * phi.distance(&psi)? + 2.0 * tail);
            worst = worst.max(ratio);
        }
        pass &= worst <= 1.0;
        detail.push(format!("{name}: rho = {rho:.6}, worst |Phi(a)-Phi(b)| / (rho |a-b| + 2 tail) = {worst:.4} (<= 1)"));
    }
    Ok((pass, detail.join("; ")))
}

fn residuals() -> Checked {
    let mut detail = Vec::new();
    let mut pass = true;
    for name in ["example1", "example2"] {
        let (cfg, m) = load(name)?;
        let opts = SolveOptions { window: (0.0, 40.0), ..SolveOptions::from_config(&cfg) };
        let fp = fixed_point(&m, &cfg.estimation(), &opts)?;
        let r = residual_check(&m, &fp.full, 0.0, 40.0, opts.tail_tol)?;
        pass &= r.pass;
        detail.push(format!(
            "{name}: {} iterations, dense {:.2e} (<= {:.2e}, {} nodes), scattered {:.2e} (<= {:.2e}, {} nodes)",
            fp.iterations, r.max_dense, r.tol_dense, r.dense_nodes, r.max_scattered, r.tol_scattered, r.scattered_nodes
        ));
    }
    Ok((pass, detail.join("; ")))
}

/// Both halves of the decay criterion for one network.
#[derive(Debug, Clone)]
pub struct DecayCase {
    pub name: &'static str,
    pub lambda: f64,
    pub m: f64,
    pub envelope_pass: bool,
    pub worst_ratio: f64,
    /// Violations with `λ` doubled.
    pub doubled_violations: usize,
    pub doubled_worst_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct DecayOutcome {
    pub cases: Vec<DecayCase>,
}

impl DecayOutcome {
    pub fn envelope_pass(&self) -> bool {
        self.cases.iter().all(|c| c.envelope_pass)
    }

    pub fn falsification_pass(&self) -> bool {
        self.cases.iter().all(|c| c.doubled_violations > 0)
    }

    pub fn pass(&self) -> bool {
        self.envelope_pass() && self.falsification_pass()
    }

    pub fn detail(&self) -> String {
        self.cases
            .iter()
            .map(|c| {
                format!(
                    "{}: lambda = {:.6}, M = {:.4}, worst ratio {:.3e} (<= 1); doubled lambda: {} violations, worst ratio {:.3e} (needs > 1)",
                    c.name, c.lambda, c.m, c.worst_ratio, c.doubled_violations, c.doubled_worst_ratio
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn decay() -> Result<DecayOutcome> {
    let mut cases = Vec::new();
    for name in ["example1", "example2"] {
        let (cfg, m) = load(name)?;
        let est = cfg.estimation();
        let opts = SolveOptions { window: (0.0, 40.0), ..SolveOptions::from_config(&cfg) };
        let cert = stability_certificate(&m, &est)?;
        let fp = fixed_point(&m, &est, &opts)?;
        let h = opts.h_grid;
        let star = simulate(&m, &fp.history(&m, h, 0.0)?, 40.0, h)?;
        let pert = simulate(&m, &fp.history(&m, h, 0.1)?, 40.0, h)?;
        let rep = verify_decay(&pert, &star, &cert, &m.ts)?;
        let mut doubled = cert.clone();
        doubled.lambda *= 2.0;
        let fals = verify_decay(&pert, &star, &doubled, &m.ts)?;
        cases.push(DecayCase {
            name,
            lambda: cert.lambda,
            m: cert.m,
            envelope_pass: rep.pass && (rep.psi_norm - 0.1).abs() < 1e-12,
            worst_ratio: rep.worst_ratio,
            doubled_violations: fals.violations,
            doubled_worst_ratio: fals.worst_ratio,
        });
    }
    Ok(DecayOutcome { cases })
}

fn dominance() -> Checked {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst = [f64::NEG_INFINITY; 3];
    for (f, ts) in families().iter().enumerate() {
        for _ in 0..200 {
            let a = rng.gen_range(0.01..5.0);
            let ks = rng.gen_range(-6..6);
            let s = point(ts, ks, rng.gen_range(0.0..=1.0));
            let t = point(ts, ks + rng.gen_range(0..10), rng.gen_range(0.0..=1.0)).max(s);
            let actual = exp_fn_with(ts, |_, mu| circle_minus(a, mu), t, s, EXP_H)?;
            worst[f] = worst[f].max(actual - decay_bound(a, ts.mu_bar(), t, s));
        }
    }
    let pass = worst.iter().all(|&w| w <= 1e-12);
    Ok((pass, format!("max e - bound per family {:.1e}, {:.1e}, {:.1e} (<= 1e-12), 200 pairs each", worst[0], worst[1], worst[2])))
}

fn ergodic() -> Checked {
    let radii: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powi(k)).collect();
    let u = Weight::unit();
    let bump = pap0_diagnostic(&TimeScale::Reals, &u, &[parse("exp(-abs(t))")?], &radii, 1e-2, Thresholds::default())?;
    let err = radii
        .iter()
        .zip(&bump.means)
        .map(|(r, m)| (m - (1.0 - (-r).exp()) / r).abs())
        .fold(0.0, f64::max);
    let one = pap0_diagnostic(&TimeScale::Reals, &u, &[parse("1")?], &radii, 1e-2, Thresholds::default())?;
    let pass = bump.verdict == Verdict::Vanishing && err < 1e-4 && one.verdict == Verdict::NonVanishing;
    Ok((
        pass,
        format!(
            "exp(-|t|): {} with max mean error {err:.1e} (< 1e-4) over r = 10..1280; constant: {}",
            bump.verdict, one.verdict
        ),
    ))
}
