use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tscnn::model::{derived_constants, stability_certificate, Activation, CnnModel};
use tscnn::solver::*;
use tscnn::wpap::Weight;
use tscnn::{parse, Error, Grid, ModelConfig, TimeScale};

fn load(name: &str) -> (ModelConfig, CnnModel) {
    let cfg = ModelConfig::load(&format!("builtin:{name}")).unwrap();
    let m = cfg.to_model().unwrap();
    (cfg, m)
}

fn random_ball(grid: &Grid, n: usize, r0: f64, rng: &mut ChaCha8Rng) -> GridFunction {
    let rough = rng.gen_bool(0.5);
    let coef: Vec<(f64, f64, f64)> = (0..n).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..6.3))).collect();
    let values = grid
        .nodes()
        .iter()
        .map(|&t| {
            coef.iter()
                .map(|&(a, w, q)| if rough { r0 * rng.gen_range(-1.0..1.0) } else { r0 * a * (w * t + q).sin() })
                .collect()
        })
        .collect();
    GridFunction::new(grid.clone(), values).unwrap()
}

#[test]
fn phi_of_zero_bounded_by_forcing_over_decay() {
    let (cfg, m) = load("example1");
    let est = cfg.estimation();
    let k = derived_constants(&m, 1.0, &est).unwrap();
    let grid = Grid::build(&m.ts, -10.0, 5.0, 0.01, &m.kinks(-10.0, 5.0, 0.01)).unwrap();
    let out = phi_map(&m, &est, &GridFunction::constant(grid, &[0.0, 0.0]), 1e-8, 1e4).unwrap();
    let bound = (0..2)
        .map(|i| ((0..2).map(|j| (k.a_sup[i][j] + k.b_sup[i][j]) * k.f0[j].abs()).sum::<f64>() + k.i_sup[i]) / k.c_lo[i])
        .fold(0.0, f64::max);
    assert!(out.sup_norm() <= bound, "{} > {bound}", out.sup_norm());
    assert!(out.sup_norm() > 0.1 * bound);
}

#[test]
fn contraction_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in ["example1", "example2"] {
        let (cfg, m) = load(name);
        let est = cfg.estimation();
        let rho = derived_constants(&m, cfg.r0, &est).unwrap().rho();
        let tail = cfg.numerics.tail_tol;
        let grid = Grid::build(&m.ts, -60.0, 10.0, cfg.numerics.h_grid, &m.kinks(-60.0, 10.0, cfg.numerics.h_grid)).unwrap();
        for _ in 0..20 {
            let phi = random_ball(&grid, m.n(), cfg.r0, &mut rng);
            let psi = random_ball(&grid, m.n(), cfg.r0, &mut rng);
            let a = phi_map(&m, &est, &phi, tail, 1e4).unwrap();
            let b = phi_map(&m, &est, &psi, tail, 1e4).unwrap();
            let start = a.grid.start().max(b.grid.start());
            let (a, b) = (a.restrict(start, grid.end()), b.restrict(start, grid.end()));
            let lhs = a.distance(&b).unwrap();
            let rhs = rho * phi.distance(&psi).unwrap() + 2.0 * tail;
            assert!(lhs <= rhs, "{name}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn example1_fixed_point_and_residual() {
    let (cfg, m) = load("example1");
    let opts = SolveOptions::from_config(&cfg);
    let fp = fixed_point(&m, &cfg.estimation(), &opts).unwrap();
    assert!(fp.delta < opts.tol);
    assert!(fp.norms.iter().all(|&r| r <= opts.r0 + opts.tol));
    assert!(fp.error_bound <= fp.delta);
    let (a, b) = opts.window;
    let res = residual_check(&m, &fp.full, a, b, opts.tail_tol).unwrap();
    assert!(res.pass, "{res:?}");
    assert!(res.max_dense < 1e-3);
    assert_eq!(res.scattered_nodes, 0);
}

#[test]
fn example2_fixed_point_geometric_rate() {
    let (cfg, m) = load("example2");
    let opts = SolveOptions::from_config(&cfg);
    let fp = fixed_point(&m, &cfg.estimation(), &opts).unwrap();
    assert!((fp.rho - (19.0 / 168.0) / 0.8).abs() < 1e-9);
    assert!(fp.iterations <= 8, "{}", fp.iterations);
    for w in fp.deltas.windows(2) {
        assert!(w[1] <= fp.rho * w[0] + 2.0 * opts.tail_tol);
    }
    let res = residual_check(&m, &fp.full, 0.0, 40.0, opts.tail_tol).unwrap();
    assert!(res.pass && res.scattered_nodes == 41 && res.dense_nodes == 0, "{res:?}");
}

#[test]
fn simulation_continues_the_fixed_point() {
    for name in ["example1", "example2"] {
        let (cfg, m) = load(name);
        let opts = SolveOptions::from_config(&cfg);
        let fp = fixed_point(&m, &cfg.estimation(), &opts).unwrap();
        let tr = simulate(&m, &fp.history(&m, opts.h_grid, 0.0).unwrap(), 40.0, opts.h_grid).unwrap();
        let tol = 10.0 * (opts.tol + opts.tail_tol + opts.h_grid * opts.h_grid);
        for (k, &t) in tr.grid.nodes().iter().enumerate() {
            let v = fp.full.at(t).unwrap();
            for i in 0..m.n() {
                assert!((v[i] - tr.states[k][i]).abs() <= tol, "{name} at {t}");
            }
        }
    }
}

#[test]
fn decay_envelope_on_examples() {
    for name in ["example1", "example2"] {
        let (cfg, m) = load(name);
        let est = cfg.estimation();
        let opts = SolveOptions::from_config(&cfg);
        let cert = stability_certificate(&m, &est).unwrap();
        let fp = fixed_point(&m, &est, &opts).unwrap();
        let star = simulate(&m, &fp.history(&m, opts.h_grid, 0.0).unwrap(), 40.0, opts.h_grid).unwrap();
        let pert = simulate(&m, &fp.history(&m, opts.h_grid, 0.1).unwrap(), 40.0, opts.h_grid).unwrap();
        let rep = verify_decay(&pert, &star, &cert, &m.ts).unwrap();
        assert!((rep.psi_norm - 0.1).abs() < 1e-12);
        assert!(rep.pass && rep.worst_ratio < 1.0, "{name}: {}", rep.worst_ratio);
        let same = verify_decay(&star, &star, &cert, &m.ts).unwrap();
        assert!(same.pass && same.worst_ratio == 0.0);
        assert_eq!(rep.to_csv().lines().next(), Some("t,mu,diff,bound,ratio"));
    }
}

fn scalar(ts: TimeScale, c: &str, b: &str, gamma: f64) -> CnnModel {
    let p = |s: &str| parse(s).unwrap();
    CnnModel::new(
        ts,
        vec![p(c)],
        vec![vec![p("0")]],
        vec![vec![p(b)]],
        vec![p("0")],
        vec![vec![gamma]],
        vec![Activation::new(p("x"), 1.0).unwrap()],
        Weight::unit(),
    )
    .unwrap()
}

#[test]
fn decay_check_flags_rates_above_the_true_one() {
    // x' = -x + 0.01 x(t - 1): perturbations decay at a rate close to 1,
    // so a rate claim well above that must be caught
    let m = scalar(TimeScale::Reals, "1", "0.01", 1.0);
    let est = tscnn::model::Estimation { window: (-10.0, 10.0), h_grid: 0.01, ..Default::default() };
    let cert = stability_certificate(&m, &est).unwrap();
    let hist = |d: f64| GridFunction::constant(Grid::build(&m.ts, -1.0, 0.0, 0.01, &[]).unwrap(), &[d]);
    let star = simulate(&m, &hist(0.0), 10.0, 0.01).unwrap();
    let pert = simulate(&m, &hist(0.1), 10.0, 0.01).unwrap();
    assert!(verify_decay(&pert, &star, &cert, &m.ts).unwrap().pass);
    let mut fake = cert.clone();
    fake.lambda = 1.5 * cert.eps[0];
    let rep = verify_decay(&pert, &star, &fake, &m.ts).unwrap();
    assert!(!rep.pass && rep.violations > 0 && rep.worst_ratio > 1.0);
}

#[test]
fn decay_grid_mismatch() {
    let m = scalar(TimeScale::Reals, "1", "0", 0.0);
    let est = tscnn::model::Estimation { window: (-10.0, 10.0), h_grid: 0.01, ..Default::default() };
    let start = GridFunction::constant(Grid::point(&m.ts, 0.0, 0.01).unwrap(), &[1.0]);
    let a = simulate(&m, &start, 2.0, 0.01).unwrap();
    let b = simulate(&m, &start, 3.0, 0.01).unwrap();
    let cert = match stability_certificate(&m, &est) {
        Err(Error::CertificateUnavailable(tscnn::CertificateIssue::ZeroCoupling(c))) => *c,
        other => panic!("{other:?}"),
    };
    assert!(matches!(verify_decay(&a, &b, &cert, &m.ts), Err(Error::GridMismatch)));
}

#[test]
fn hybrid_scale_fixed_point_residual() {
    let ts = TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).unwrap();
    let p = |s: &str| parse(s).unwrap();
    let m = CnnModel::new(
        ts,
        vec![p("0.7 + 0.1*cos(pi*t)")],
        vec![vec![p("0.1*abs(sin(t))")]],
        vec![vec![p("0.1")]],
        vec![p("sin(t)")],
        vec![vec![2.0]],
        vec![Activation::new(p("(cos(x)^3 + 5)/18"), 0.25).unwrap()],
        Weight::unit(),
    )
    .unwrap();
    let est = tscnn::model::Estimation { window: (-40.0, 40.0), h_grid: 0.01, ..Default::default() };
    let opts = SolveOptions { window: (0.0, 20.0), h_grid: 0.01, ..SolveOptions::default() };
    let fp = fixed_point(&m, &est, &opts).unwrap();
    let res = residual_check(&m, &fp.full, 0.0, 20.0, opts.tail_tol).unwrap();
    assert!(res.pass, "{res:?}");
    assert!(res.scattered_nodes == 10 && res.dense_nodes > 900);
    let tr = simulate(&m, &fp.history(&m, 0.01, 0.0).unwrap(), 20.0, 0.01).unwrap();
    let tol = 10.0 * (opts.tol + opts.tail_tol + 1e-4);
    for (k, &t) in tr.grid.nodes().iter().enumerate() {
        assert!((fp.full.at(t).unwrap()[0] - tr.states[k][0]).abs() <= tol, "{t}");
    }
}
