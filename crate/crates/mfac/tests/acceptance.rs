//! Acceptance suite: the benchmark reproduction gates, one test per
//! criterion, each printing a matching pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use mfac::agents::{run_training, BinTrainer, BinTrainerConfig, Rates, Schedule, TrainResult};
use mfac::analytic::{solve_lq_2d, solve_mfc_1d, solve_mfcg_1d, solve_mfg_1d, ProblemTag};
use mfac::approximators::{
    Activation, GaussianPolicy, LinearCritic, Mlp, Parametric, PolicyArch, ValueApproximator,
};
use mfac::environment::{LqModel1D, LqModel2D, MfcgModel};
use mfac::experiment::{ExperimentConfig, RunMode};
use mfac::idealized::{
    idealized_iterate, FiniteMfModel, IdealizedMode, IdealizedRates, IdealizedState,
    RandomGridModel,
};
use mfac::measures::BinPartition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACCEPTANCE_SEED: u64 = 7;

fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

#[test]
fn criterion_1_mfg_1d_reproduction() {
    let mut cfg = ExperimentConfig::new(RunMode::Mfg, "lq1d-paper");
    cfg.steps = 200_000;
    cfg.seed = ACCEPTANCE_SEED;
    cfg.checkpoint = 20_000;
    let r = run_training::<f64>(&cfg).unwrap();
    let pass = r.report.e_mu <= 0.10 && r.report.e_alpha <= 0.15 && r.report.e_value <= 0.15;
    assert!(
        verdict(
            "1 (game reproduction, 1D)",
            pass,
            &format!(
                "e_mu={:.4} (≤0.10) e_alpha={:.4} (≤0.15) e_V={:.4} (≤0.15), learned mean {:.4} vs 0.8",
                r.report.e_mu, r.report.e_alpha, r.report.e_value, r.learned_mean[0]
            ),
        ),
        "criterion 1 failed"
    );
}

#[test]
fn criterion_2_mfc_1d_reproduction() {
    let mut cfg = ExperimentConfig::new(RunMode::Mfc, "lq1d-paper");
    cfg.steps = 200_000;
    cfg.seed = ACCEPTANCE_SEED;
    cfg.checkpoint = 20_000;
    assert_eq!(cfg.bins_state * cfg.bins_action, 42);
    let r = run_training::<f64>(&cfg).unwrap();
    let m = r.learned_mean[0];
    let separation = (m - 0.800f64).abs() > (m - 0.192f64).abs();
    let pass = r.report.e_mu <= 0.12
        && r.report.e_alpha <= 0.18
        && r.report.e_value <= 0.15
        && separation;
    assert!(
        verdict(
            "2 (control reproduction, 1D, 42 bins)",
            pass,
            &format!(
                "e_mu={:.4} (≤0.12) e_alpha={:.4} (≤0.18) e_V={:.4} (≤0.15), mean {:.4} must sit nearer 0.192 than 0.8 ({})",
                r.report.e_mu, r.report.e_alpha, r.report.e_value, m, separation
            ),
        ),
        "criterion 2 failed"
    );
}

#[test]
fn criterion_3_timescale_flip() {
    // Swap only the measure rate between the game value (1e-5) and the
    // control value (1e-3), keeping each algorithm; the approached analytic
    // mean must flip per the separation test.
    let mk = |mode: RunMode, mu: f64| {
        let mut cfg = ExperimentConfig::new(mode, "lq1d-paper");
        cfg.steps = 200_000;
        cfg.seed = ACCEPTANCE_SEED;
        cfg.checkpoint = 50_000;
        let mut rc = mfac::experiment::RatesConfig::default();
        rc.mu = Some(mu);
        cfg.rates = Some(rc);
        cfg
    };
    // game algorithm at the control measure rate
    let fast = run_training::<f64>(&mk(RunMode::Mfg, 1e-3)).unwrap();
    let m_fast = fast.learned_mean[0];
    let fast_flips = (m_fast - 0.192f64).abs() < (m_fast - 0.800f64).abs();
    // control algorithm at the game measure rate
    let slow = run_training::<f64>(&mk(RunMode::Mfc, 1e-5)).unwrap();
    let m_slow = slow.learned_mean[0];
    let slow_flips = (m_slow - 0.800f64).abs() < (m_slow - 0.192f64).abs();
    let pass = fast_flips && slow_flips;
    assert!(
        verdict(
            "3 (timescale flip)",
            pass,
            &format!(
                "game alg @ ρ^μ=1e-3 → mean {m_fast:.4} (wants nearer 0.192: {fast_flips}); \
                 control alg @ ρ^μ=1e-5 → mean {m_slow:.4} (wants nearer 0.8: {slow_flips})"
            ),
        ),
        "criterion 3 failed"
    );
}

#[test]
fn criterion_4_two_dimensional_coverage() {
    // Scaled-down 2D control run; 36 bins (9 state cells, 4 action cells).
    let mut cfg = ExperimentConfig::new(RunMode::Mfc, "lq2d-paper");
    cfg.steps = 200_000;
    cfg.seed = ACCEPTANCE_SEED;
    cfg.checkpoint = 50_000;
    cfg.bins_state = 9;
    cfg.bins_action = 4;
    let r = run_training::<f64>(&cfg).unwrap();
    let sol = match &r.analytic {
        mfac::analytic::AnalyticSolution::TwoD(s) => s.clone(),
        _ => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0_4e1a);
    let samples: Vec<[f64; 2]> = (0..2000)
        .map(|_| {
            let a = r.measure.sample_atom(&mut rng).unwrap();
            [a[0], a[1]]
        })
        .collect();
    let coverage = mfac::metrics::mahalanobis_coverage(&samples, &sol, 3.0).unwrap();
    let pass = coverage >= 0.90;
    assert!(
        verdict(
            "4 (2D coverage)",
            pass,
            &format!(
                "Mahalanobis-3 coverage {:.4} (≥0.90; analytic self-coverage ≈ 0.9889), learned mean ({:.3}, {:.3}) vs ({:.3}, {:.3})",
                coverage, r.learned_mean[0], r.learned_mean[1], sol.mean[0], sol.mean[1]
            ),
        ),
        "criterion 4 failed"
    );
}

#[test]
fn criterion_5_control_game() {
    let mut cfg = ExperimentConfig::new(RunMode::Mfcg, "mfcg-default");
    cfg.steps = 500_000;
    cfg.seed = ACCEPTANCE_SEED;
    cfg.checkpoint = 100_000;
    let r = run_training::<f64>(&cfg).unwrap();
    let model = MfcgModel::<f64>::default_preset();
    let target = solve_mfcg_1d(&model).unwrap().mean; // computed at runtime
    let m = r.learned_mean[0];
    let mean_ok = (m - target).abs() <= 0.1;

    // Seed equivalence: with every population coupling removed
    // (c̃₁=c̃₅=0 plus c₁=c₅=0 so no cost reads any measure), the control-game
    // loop and the plain control loop make identical draws and identical
    // updates step for step.
    let base = LqModel1D::new([0.0, 1.5, 0.5, 0.6, 0.0], 0.3, 1.0, 0.01);
    let decoupled = MfcgModel::new(base, 0.0, 1.25, 0.0);
    let partition = BinPartition::default_region(1, 1, vec![6], vec![7]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let actor = GaussianPolicy::new(1, 1, &PolicyArch::default(), &mut rng);
    let critic: Mlp<f64> = Mlp::new(&[1, 32, 1], Activation::Tanh, Activation::Identity, &mut rng);
    let tcfg_game = BinTrainerConfig {
        rates: Rates::mfcg_defaults(),
        batch: 8,
        seed: 11,
        init_state_std: 1.0,
    };
    let mut game = BinTrainer::new(
        decoupled,
        partition.clone(),
        actor.clone(),
        critic.clone(),
        &tcfg_game,
    );
    let tcfg_ctrl = BinTrainerConfig {
        rates: Rates::mfc_defaults(),
        batch: 8,
        seed: 11,
        init_state_std: 1.0,
    };
    let mut ctrl = BinTrainer::new(base, partition, actor, critic, &tcfg_ctrl);
    for _ in 0..20_000 {
        game.step().unwrap();
        ctrl.step().unwrap();
    }
    let seed_equivalent = game.actor.flatten() == ctrl.actor.flatten()
        && game.state == ctrl.state
        && game
            .bank
            .iter()
            .zip(&ctrl.bank)
            .all(|(a, b)| a.flatten() == b.flatten());

    let pass = mean_ok && seed_equivalent;
    assert!(
        verdict(
            "5 (control game)",
            pass,
            &format!(
                "learned mean {m:.4} vs analytic {target:.4} (|diff| ≤ 0.1: {mean_ok}); \
                 decoupled-cost run bit-identical to the control loop: {seed_equivalent}"
            ),
        ),
        "criterion 5 failed"
    );
}

#[test]
fn criterion_6_idealized_convergence() {
    let model: RandomGridModel<f64> = RandomGridModel::shipped_5x3();
    let state = IdealizedState::uniform(&model);
    let rates = IdealizedRates::mfg_defaults();
    let result = idealized_iterate(state, &model, &rates, IdealizedMode::Mfg, 1_000_000, 10_000)
        .unwrap();
    let f = result.final_row;
    let norms_ok = f.measure_residual < 1e-5 && f.critic_grad_norm < 1e-5 && f.actor_grad_norm < 1e-5;

    // Direct linear-solve oracle: the converged (μ, V) satisfy the grid
    // Bellman equation for the converged policy at the converged mean.
    let pi = result.state.policy(model.n_actions());
    let m = result.state.mean(&model);
    let v_oracle = policy_evaluation_oracle(&model, &pi, m);
    let bellman_err = result
        .state
        .theta
        .iter()
        .zip(&v_oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let pass = norms_ok && bellman_err < 1e-5;
    assert!(
        verdict(
            "6 (idealized convergence)",
            pass,
            &format!(
                "‖L_P‖={:.2e} ‖∇L_V‖={:.2e} ‖∇L_Π‖={:.2e} (all <1e-5: {norms_ok}); Bellman vs linear solve {:.2e} (<1e-5)",
                f.measure_residual, f.critic_grad_norm, f.actor_grad_norm, bellman_err
            ),
        ),
        "criterion 6 failed"
    );
}

/// Gaussian-elimination policy-evaluation oracle on the grid.
fn policy_evaluation_oracle(
    model: &RandomGridModel<f64>,
    pi: &[f64],
    m: f64,
) -> Vec<f64> {
    let s = model.n_states();
    let a_count = model.n_actions();
    let gamma = model.gamma();
    let mut mat = vec![vec![0.0; s]; s];
    let mut rhs = vec![0.0; s];
    let mut row = vec![0.0; s];
    for x in 0..s {
        mat[x][x] = 1.0;
        for a in 0..a_count {
            let w = pi[x * a_count + a];
            model.transition_row(x, a, m, &mut row);
            for xp in 0..s {
                mat[x][xp] -= gamma * w * row[xp];
            }
            rhs[x] += w * model.cost(x, a, m);
        }
    }
    for col in 0..s {
        let piv = (col..s)
            .max_by(|&i, &j| mat[i][col].abs().partial_cmp(&mat[j][col].abs()).unwrap())
            .unwrap();
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..s {
            if r != col {
                let f = mat[r][col] / mat[col][col];
                for c in 0..s {
                    mat[r][c] -= f * mat[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    (0..s).map(|i| rhs[i] / mat[i][i]).collect()
}

#[test]
fn criterion_7_gradient_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x97ad);
    let mut worst: f64 = 0.0;
    let h = 1e-5;

    // value networks
    for _ in 0..100 {
        let dims = [1 + rng.gen_range(0..2usize), 1 + rng.gen_range(4..12usize), 1];
        let mlp: Mlp<f64> = Mlp::new(&dims, Activation::Tanh, Activation::Identity, &mut rng);
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = mlp.value_gradient(&x);
        let mut flat = mlp.flatten();
        let mut probe = mlp.clone();
        for idx in pick_indices(flat.len(), 12, &mut rng) {
            let orig = flat[idx];
            flat[idx] = orig + h;
            probe.unflatten_from(&flat).unwrap();
            let up = probe.value(&x);
            flat[idx] = orig - h;
            probe.unflatten_from(&flat).unwrap();
            let dn = probe.value(&x);
            flat[idx] = orig;
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max(rel_err(g.as_slice()[idx], fd));
        }
        probe.unflatten_from(&flat).unwrap();
    }

    // policy log-density
    for _ in 0..100 {
        let p: GaussianPolicy<f64> =
            GaussianPolicy::new(1, 1, &PolicyArch::default(), &mut rng);
        let x = [rng.gen_range(-2.0..2.0)];
        let a = [rng.gen_range(-2.0..2.0)];
        let g = p.log_prob_grad(&x, &a);
        let mut flat = p.flatten();
        let mut probe = p.clone();
        for idx in pick_indices(flat.len(), 12, &mut rng) {
            let orig = flat[idx];
            flat[idx] = orig + h;
            probe.unflatten_from(&flat).unwrap();
            let up = probe.log_prob(&x, &a);
            flat[idx] = orig - h;
            probe.unflatten_from(&flat).unwrap();
            let dn = probe.log_prob(&x, &a);
            flat[idx] = orig;
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max(rel_err(g.as_slice()[idx], fd));
        }
    }

    // linear critics (gradient is the feature vector, exact)
    for _ in 0..100 {
        let degree = rng.gen_range(1..5usize);
        let mut critic = LinearCritic::zeros(mfac::approximators::Basis::Polynomial1D { degree });
        let coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
        critic.unflatten_from(&coeffs).unwrap();
        let x = [rng.gen_range(-2.0..2.0)];
        let g = critic.value_gradient(&x);
        for (idx, gi) in g.as_slice().iter().enumerate() {
            let mut c2 = coeffs.clone();
            c2[idx] += h;
            let mut probe = critic.clone();
            probe.unflatten_from(&c2).unwrap();
            let up = probe.value(&x);
            c2[idx] -= 2.0 * h;
            probe.unflatten_from(&c2).unwrap();
            let dn = probe.value(&x);
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max(rel_err(*gi, fd));
        }
    }

    let pass = worst < 1e-4;
    assert!(
        verdict(
            "7 (gradient suite)",
            pass,
            &format!("max relative error vs central differences {worst:.2e} (<1e-4)"),
        ),
        "criterion 7 failed"
    );
}

fn pick_indices<R: Rng>(len: usize, k: usize, rng: &mut R) -> Vec<usize> {
    (0..k.min(len)).map(|_| rng.gen_range(0..len)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-6);
    (a - b).abs() / denom
}

#[test]
fn criterion_8_analytic_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11a);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c1: f64 = rng.gen_range(0.01..2.0);
        let c2 = rng.gen_range(-1.5..1.5);
        let c3 = rng.gen_range(0.01..2.0);
        let c4 = rng.gen_range(-1.0..1.0);
        let c5 = rng.gen_range(0.0..2.0);
        let beta = rng.gen_range(0.2..2.0);
        let model = LqModel1D::new([c1, c2, c3, c4, c5], 0.3, beta, 0.01);
        if let Ok(s) = solve_mfg_1d(&model) {
            worst = worst.max((s.gamma2 * (beta + 2.0 * s.gamma2) - (c1 + c3)).abs());
        }
        if let Ok(s) = solve_mfc_1d(&model) {
            worst = worst.max((s.gamma2 * (beta + 2.0 * s.gamma2) - (c1 + c3)).abs());
        }
        let mfcg = MfcgModel::new(model, rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.5), rng.gen_range(0.0..1.0));
        if let Ok(s) = solve_mfcg_1d(&mfcg) {
            worst = worst
                .max((s.gamma2 * (beta + 2.0 * s.gamma2) - (c1 + c3 + mfcg.ct1)).abs());
        }
    }
    let identity_ok = worst < 1e-12;

    // 2D solver: defining-equation residuals and the Monte Carlo Bellman
    // validation run inside the solver (an error here would be a failure).
    let model2 = LqModel2D::<f64>::paper_preset();
    let game = solve_lq_2d(&model2, ProblemTag::Mfg);
    let control = solve_lq_2d(&model2, ProblemTag::Mfc);
    let solver_ok = game.is_ok() && control.is_ok();
    let mut resid_ok = false;
    if let (Ok(g), Ok(_c)) = (&game, &control) {
        use mfac::linalg::{frobenius, mat_add, mat_mul, mat_scale, mat_sub, transpose};
        let s = mat_add(&model2.c1, &model2.c3);
        let r1 = mat_sub(
            &mat_add(
                &mat_scale(&mat_mul(&g.gamma2, &g.gamma2), 2.0),
                &mat_scale(&g.gamma2, model2.beta),
            ),
            &s,
        );
        let a = mat_scale(&g.gamma2, 2.0);
        let q = mat_mul(&model2.sigma, &transpose(&model2.sigma));
        let r2 = mat_sub(
            &mat_add(&mat_mul(&a, &g.covariance), &mat_mul(&g.covariance, &a)),
            &q,
        );
        resid_ok = frobenius(&r1) < 1e-9 && frobenius(&r2) < 1e-9;
    }
    let pass = identity_ok && solver_ok && resid_ok;
    assert!(
        verdict(
            "8 (analytic identities)",
            pass,
            &format!(
                "1D identity max |Γ₂(β+2Γ₂)−(c₁+c₃)| = {worst:.2e} over 1000 draws (<1e-12: {identity_ok}); \
                 2D solver+validation ok: {solver_ok}; residuals <1e-9: {resid_ok}"
            ),
        ),
        "criterion 8 failed"
    );
}

#[test]
fn criterion_9_determinism() {
    // Byte-reproducibility of the training pipelines given identical config
    // and seed, checked on shortened runs of every mode used by criteria
    // 1–6 (determinism is step-count independent).
    let bits = |r: &TrainResult<f64>| -> Vec<u64> {
        let mut v: Vec<u64> = r.actor.flatten().iter().map(|x| x.to_bits()).collect();
        for c in &r.critics {
            v.extend(c.flatten().iter().map(|x| x.to_bits()));
        }
        v.extend(r.learned_mean.iter().map(|x| x.to_bits()));
        for row in &r.traces {
            v.push(row.e_mu.to_bits());
            v.push(row.e_alpha.to_bits());
            v.push(row.e_value.to_bits());
        }
        v
    };
    let mut all_ok = true;
    for (mode, preset, bins) in [
        (RunMode::Mfg, "lq1d-paper", None),
        (RunMode::Mfc, "lq1d-paper", None),
        (RunMode::Mfg, "lq2d-paper", None),
        (RunMode::Mfc, "lq2d-paper", Some((9, 4))),
        (RunMode::Mfcg, "mfcg-default", None),
    ] {
        let mut cfg = ExperimentConfig::new(mode, preset);
        cfg.steps = 3_000;
        cfg.seed = 99;
        cfg.checkpoint = 1_000;
        cfg.trace_samples = 200;
        cfg.metric_samples = 200;
        if let Some((m, l)) = bins {
            cfg.bins_state = m;
            cfg.bins_action = l;
        }
        let a = run_training::<f64>(&cfg).unwrap();
        let b = run_training::<f64>(&cfg).unwrap();
        let same = bits(&a) == bits(&b);
        if !same {
            println!("  nondeterminism in {mode} {preset}");
        }
        all_ok &= same;
    }
    // idealized iteration is deterministic arithmetic; verify bit equality too
    let model: RandomGridModel<f64> = RandomGridModel::shipped_5x3();
    let r1 = idealized_iterate(
        IdealizedState::uniform(&model),
        &model,
        &IdealizedRates::mfg_defaults(),
        IdealizedMode::Mfg,
        20_000,
        5_000,
    )
    .unwrap();
    let r2 = idealized_iterate(
        IdealizedState::uniform(&model),
        &model,
        &IdealizedRates::mfg_defaults(),
        IdealizedMode::Mfg,
        20_000,
        5_000,
    )
    .unwrap();
    let ideal_same = r1.state.theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        == r2.state.theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    all_ok &= ideal_same;
    assert!(
        verdict(
            "9 (determinism)",
            all_ok,
            "bit-identical parameters, means and traces across repeated runs of every pipeline",
        ),
        "criterion 9 failed"
    );
}
