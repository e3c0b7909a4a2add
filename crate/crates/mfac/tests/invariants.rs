//! Cross-module invariants: Monte Carlo environment checks, policy
//! normalization, and structural round-trips.

use mfac::analytic::solve_mfg_1d;
use mfac::approximators::{
    Activation, GaussianPolicy, Mlp, Parametric, PolicyArch, ValueApproximator,
};
use mfac::environment::{lq_step, LqModel1D, MeanArgs, MfEnv};
use mfac::scalar::Scalar;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Discounted-sum consistency: zero policy, only c3 active with c4 = 0, so
/// f(x) = c3·x² and X_n is a pure random walk. The Monte Carlo value of
/// Σ γⁿ f(X_n) Δt from x₀ = 0 must match the closed form Σ γⁿ c3·σ²·nΔt·Δt
/// (truncated where γⁿ < 1e-6) within 3 Monte Carlo standard errors.
#[test]
fn discounted_sum_matches_closed_form() {
    let mut model = LqModel1D::<f64>::paper_preset();
    model.c1 = 0.0;
    model.c2 = 0.0;
    model.c4 = 0.0;
    model.c5 = 0.0;
    model.state_clip = 1e30; // the pure random walk must stay unclipped
    let gamma = model.gamma();
    let horizon = {
        let mut n = 0u32;
        while gamma.powi(n as i32) >= 1e-6 {
            n += 1;
        }
        n as usize
    };
    let closed_form: f64 = (0..horizon)
        .map(|n| {
            gamma.powi(n as i32) * model.c3 * model.sigma * model.sigma * (n as f64) * model.dt
                * model.dt
        })
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let paths = 400;
    let mut vals = Vec::with_capacity(paths);
    for _ in 0..paths {
        let mut x = vec![0.0f64];
        let mut acc = 0.0;
        for n in 0..horizon {
            acc += gamma.powi(n as i32) * model.c3 * x[0] * x[0] * model.dt;
            let (next, _) = lq_step(&model, &x, &[0.0], &mut rng);
            x = next;
        }
        vals.push(acc);
    }
    let mean = vals.iter().sum::<f64>() / paths as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
    let se = (var / paths as f64).sqrt();
    assert!(
        (mean - closed_form).abs() < 3.0 * se,
        "monte carlo {mean} vs closed form {closed_form} (3·SE = {})",
        3.0 * se
    );
}

/// Halving Δt (and doubling steps) changes the simulated stationary
/// variance under the analytic optimal control by less than 2%.
#[test]
fn time_step_scaling_of_stationary_variance() {
    let base = LqModel1D::<f64>::paper_preset();
    let sol = solve_mfg_1d(&base).unwrap();
    let simulate = |dt: f64, steps: usize, seed: u64| -> f64 {
        let mut model = base;
        model.dt = dt;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![sol.mean];
        let burn = steps / 10;
        let (mut s1, mut s2, mut n) = (0.0, 0.0, 0usize);
        for k in 0..steps {
            let a = sol.control(x[0]);
            let (next, _) = lq_step(&model, &x, &[a], &mut rng);
            x = next;
            if k >= burn {
                s1 += x[0];
                s2 += x[0] * x[0];
                n += 1;
            }
        }
        let m = s1 / n as f64;
        s2 / n as f64 - m * m
    };
    let v1 = simulate(0.01, 4_000_000, 5);
    let v2 = simulate(0.005, 8_000_000, 6);
    let change = (v1 - v2).abs() / v1;
    assert!(change < 0.02, "variance change {change:.4} (v1={v1:.5}, v2={v2:.5})");
}

/// The log-density integrates to one over actions: importance sampling from
/// a wider Gaussian proposal, 10⁵ samples, weight mean within 3 standard
/// errors of 1.
#[test]
fn policy_log_density_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let policy: GaussianPolicy<f64> = GaussianPolicy::new(1, 1, &PolicyArch::default(), &mut rng);
    let x = [0.7];
    let (mean, std) = policy.mean_std(&x);
    let (qm, qs) = (mean[0], 3.0 * std[0]);
    let n = 100_000;
    let mut wsum = 0.0;
    let mut wsq = 0.0;
    for _ in 0..n {
        let a = qm + qs * f64::std_normal(&mut rng);
        let log_q = -0.5 * ((a - qm) / qs).powi(2) - qs.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let w = (policy.log_prob(&x, &[a]) - log_q).exp();
        wsum += w;
        wsq += w * w;
    }
    let mean_w = wsum / n as f64;
    let var_w = wsq / n as f64 - mean_w * mean_w;
    let se = (var_w / n as f64).sqrt();
    assert!(
        (mean_w - 1.0).abs() < 3.0 * se,
        "importance-weight mean {mean_w} ± {se}"
    );
}

/// Sample mean of 10⁴ floored-std draws sits within five standard errors of
/// the policy mean.
#[test]
fn floored_std_sampling_concentrates_on_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut policy: GaussianPolicy<f64> = GaussianPolicy::new(1, 1, &PolicyArch::default(), &mut rng);
    // force the std head to the floor
    let mut flat = policy.flatten();
    let n = flat.len();
    for v in flat[n - 1..].iter_mut() {
        *v = -50.0;
    }
    policy.unflatten_from(&flat).unwrap();
    let x = [0.3];
    let (mean, std) = policy.mean_std(&x);
    assert!((std[0] - 1e-5).abs() < 1e-12);
    let draws = 10_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        acc += policy.sample(&x, &mut rng)[0];
    }
    let sample_mean = acc / draws as f64;
    let tol = 5.0 * 1e-5 / (draws as f64).sqrt();
    assert!(
        (sample_mean - mean[0]).abs() < tol,
        "sample mean {sample_mean} vs {} (tol {tol})",
        mean[0]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Flatten/unflatten is a bijection for networks of any small shape.
    #[test]
    fn mlp_flatten_roundtrip(seed in 0u64..1000, hidden in 1usize..9, inputs in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp: Mlp<f64> = Mlp::new(&[inputs, hidden, 1], Activation::Tanh, Activation::Identity, &mut rng);
        let flat = mlp.flatten();
        let mut back = mlp.clone();
        back.unflatten_from(&flat).unwrap();
        prop_assert_eq!(back.flatten(), flat);
    }

    /// Policy parameter round-trip preserves behavior exactly.
    #[test]
    fn policy_flatten_roundtrip(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: GaussianPolicy<f64> = GaussianPolicy::new(1, 1, &PolicyArch {
            trunk_width: 8, head_width: 8, std_floor: 1e-5, init_std: 0.3,
        }, &mut rng);
        let flat = p.flatten();
        let mut q = p.clone();
        q.unflatten_from(&flat).unwrap();
        prop_assert_eq!(q.flatten(), flat);
        let x = [0.4];
        prop_assert_eq!(p.mean_std(&x), q.mean_std(&x));
    }

    /// After any update sequence the measure's weights sum to one within
    /// 1e-9 and the cached mean matches the direct recursion.
    #[test]
    fn measure_recursion_consistency(
        seed in 0u64..500,
        rates in proptest::collection::vec(0.0f64..=1.0, 1..60),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0: f64 = rng.gen_range(-1.0..1.0);
        let mut measure = mfac::measures::EmpiricalMeasure::dirac(&[x0]);
        let mut direct = x0;
        for rho in rates {
            let x: f64 = rng.gen_range(-2.0..2.0);
            measure.update(&[x], rho).unwrap();
            direct = (1.0 - rho) * direct + rho * x;
        }
        prop_assert!((measure.total_weight() - 1.0).abs() < 1e-9);
        prop_assert!((measure.mean().unwrap()[0] - direct).abs() < 1e-9);
    }

    /// The value read-out is unchanged by a round-trip through the
    /// checkpoint text format.
    #[test]
    fn checkpoint_roundtrip_preserves_values(seed in 0u64..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp: Mlp<f64> = Mlp::new(&[1, 6, 1], Activation::Tanh, Activation::Identity, &mut rng);
        let text = mfac::experiment::io::mlp_to_text(&mlp);
        let back: Mlp<f64> = mfac::experiment::io::mlp_from_text(&text).unwrap();
        let x = [rng.gen_range(-2.0..2.0)];
        prop_assert_eq!(mlp.value(&x).to_bits(), back.value(&x).to_bits());
    }
}

/// Environment means: the control-game cost needs local and global means.
#[test]
fn mfcg_cost_requires_both_means() {
    let model = mfac::environment::MfcgModel::<f64>::default_preset();
    let result = std::panic::catch_unwind(|| {
        model.cost_rate(&[0.0], &[0.0], MeanArgs::single(&[0.0]))
    });
    assert!(result.is_err(), "missing global mean must be rejected");
}
