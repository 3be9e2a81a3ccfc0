mod common;

use common::{naive_loss, normal_equations_fit, random_dataset, random_mask, random_params, rng, sort_percentile};
use ebdbn::lsem::topological_order;
use ebdbn::{
    build_support_map, dual_objective, embed_params, enumerate_oracle, extract_params, fit_weights_given_support,
    initial_solutions, is_dag, loss, loss_gradient, mala_log_accept_ratio, model_weights, percentile,
    point_estimate_losses, run_mala, sample_evaluation, simulate, solve_dual, solve_ip, subsample_indices, summarize,
    DualConfig, DualSolution, Error, GibbsPosterior, IpConfig, LogDensity, LossSign, ParamSet, PosteriorChain,
    SamplerConfig, SimulationConfig, StructureMask, SubsampleSpec, SupportedLoss, TrajectoryDataset,
};
use rand::Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn loss_matches_naive_summation_seed_11() {
    let mut r = rng(11);
    let data = random_dataset(&mut r, 4, 9, 3, 2);
    let mask = random_mask(&mut r, 3, 2, 0.6);
    let params = random_params(&mut r, &mask, 0.1, 1.0);
    let fast = loss(&data, &params).unwrap();
    assert!(rel(fast, naive_loss(&data, &params)) < 1e-12);
}

#[test]
fn loss_of_noiseless_truth_is_zero_and_gradient_vanishes() {
    let mut r = rng(5);
    let mask = random_mask(&mut r, 4, 2, 0.4);
    let params = random_params(&mut r, &mask, 0.1, 0.4);
    let data = simulate(&mask, &params, &SimulationConfig::new(0.0, 6, 12, 1)).unwrap();
    assert!(loss(&data, &params).unwrap() < 1e-10);
    let map = build_support_map(&mask);
    let theta = extract_params(&params, &map).unwrap();
    let grad = loss_gradient(&data, &map, &theta).unwrap();
    assert!(grad.iter().all(|g| g.abs() < 1e-8), "{grad:?}");
}

#[test]
fn loss_gradient_matches_finite_differences_seed_3() {
    let mut r = rng(3);
    let data = random_dataset(&mut r, 3, 8, 3, 1);
    let mask = random_mask(&mut r, 3, 1, 0.7);
    let map = build_support_map(&mask);
    let theta: Vec<f64> = (0..map.size()).map(|_| r.random_range(-1.0..1.0)).collect();
    let grad = loss_gradient(&data, &map, &theta).unwrap();
    let h = 1e-5;
    for k in 0..theta.len() {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[k] += h;
        minus[k] -= h;
        let fd = (loss(&data, &embed_params(&plus, &map).unwrap()).unwrap()
            - loss(&data, &embed_params(&minus, &map).unwrap()).unwrap())
            / (2.0 * h);
        assert!((grad[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "k={k}: {} vs {fd}", grad[k]);
    }
}

#[test]
fn simulated_residuals_have_the_noise_moments() {
    let mut r = rng(42);
    let mask = random_mask(&mut r, 5, 1, 0.3);
    let params = random_params(&mut r, &mask, 0.1, 0.3);
    let sigma = 0.1;
    let data = simulate(&mask, &params, &SimulationConfig::new(sigma, 200, 10, 42)).unwrap();
    let d = 5;
    let mut res = Vec::new();
    for n in 0..data.n_traj() {
        for t in 1..data.horizon() {
            for i in 0..d {
                let mut z = data.get(n, t, i);
                for j in 0..d {
                    z -= params.intra(j, i) * data.get(n, t, j) + params.inter(0, j, i) * data.get(n, t - 1, j);
                }
                res.push(z);
            }
        }
    }
    let m = res.len() as f64;
    let mean = res.iter().sum::<f64>() / m;
    let var = res.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (m - 1.0);
    // Gaussian: se(mean) = sigma / sqrt(m), se(var) = sigma^2 sqrt(2 / (m - 1))
    assert!(mean.abs() < 3.0 * sigma / m.sqrt(), "mean {mean}");
    assert!((var - sigma * sigma).abs() < 3.0 * sigma * sigma * (2.0 / (m - 1.0)).sqrt(), "var {var}");
}

#[test]
fn random_dags_have_a_topological_order() {
    let mut r = rng(17);
    for _ in 0..50 {
        let mask = random_mask(&mut r, 6, 0, 0.5);
        let order = topological_order(mask.e_w(), 6).expect("acyclic");
        let mut pos = [0usize; 6];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        for (j, i) in mask.intra_edges() {
            assert!(pos[j] < pos[i]);
        }
        assert!(is_dag(&mask.intra_rows()).unwrap());
    }
}

#[test]
fn fit_matches_dense_normal_equations_seed_9() {
    let mut r = rng(9);
    let data = random_dataset(&mut r, 8, 10, 4, 2);
    let mask = random_mask(&mut r, 4, 2, 0.5);
    let (params, value) = fit_weights_given_support(&data, &mask).unwrap();
    let oracle = normal_equations_fit(&data, &mask);
    for (a, b) in params.w().iter().chain(params.a()).zip(oracle.w().iter().chain(oracle.a())) {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-8), "{a} vs {b}");
    }
    assert!(rel(value, naive_loss(&data, &oracle)) < 1e-10);
}

#[test]
fn fit_on_empty_and_true_support() {
    let mut r = rng(2);
    let data = random_dataset(&mut r, 3, 5, 2, 1);
    let (params, value) = fit_weights_given_support(&data, &StructureMask::empty(2, 1)).unwrap();
    assert_eq!(params, ParamSet::zeros(2, 1));
    let direct: f64 = (0..3)
        .flat_map(|n| (1..5).map(move |t| (n, t)))
        .map(|(n, t)| data.slice(n, t).iter().map(|v| v * v).sum::<f64>())
        .sum();
    assert!(rel(value, direct) < 1e-12);

    // identifiable from noiseless data: no column has collinear regressors
    let mask = StructureMask::from_edges(3, 1, &[(0, 1), (1, 2)], &[(0, 0, 0), (0, 1, 1), (0, 2, 2)]).unwrap();
    let truth = random_params(&mut r, &mask, 0.2, 0.5);
    let data = simulate(&mask, &truth, &SimulationConfig::new(0.0, 10, 10, 4).with_warmup(2)).unwrap();
    let (fit, value) = fit_weights_given_support(&data, &mask).unwrap();
    assert!(value < 1e-8);
    for (a, b) in fit.w().iter().chain(fit.a()).zip(truth.w().iter().chain(truth.a())) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

fn noisy_instance(seed: u64, d: usize, p: usize, n: usize, sigma: f64) -> TrajectoryDataset {
    let mut r = rng(seed);
    let mask = random_mask(&mut r, d, p, 0.4);
    let params = random_params(&mut r, &mask, 0.3, 0.8);
    simulate(&mask, &params, &SimulationConfig::new(sigma, n, 10, seed)).unwrap()
}

#[test]
fn solver_matches_enumeration_on_d3_seeds_1_to_5() {
    for seed in 1..=5 {
        let data = noisy_instance(seed, 3, 1, 100, 0.05);
        let lam = ebdbn::default_penalty(&data);
        let cfg = IpConfig::new(lam, lam).unwrap();
        let bb = solve_ip(&data, &cfg).unwrap();
        let ex = enumerate_oracle(&data, &cfg).unwrap();
        assert!(bb.proven_optimal);
        assert!((bb.objective - ex.objective).abs() <= 1e-9 * ex.objective.max(1.0), "seed {seed}");
        assert!(is_dag(&bb.mask.intra_rows()).unwrap());
        let recomputed = loss(&data, &bb.params).unwrap()
            + lam * (bb.mask.intra_count() + bb.mask.inter_count()) as f64;
        assert!((recomputed - bb.objective).abs() < 1e-9 * recomputed.max(1.0));
    }
}

#[test]
fn solver_matches_enumeration_with_small_penalties_and_exclusions() {
    for seed in 20..26 {
        let data = noisy_instance(seed, 3, 2, 30, 0.2);
        let cfg = IpConfig::new(0.05, 0.08).unwrap();
        let first = solve_ip(&data, &cfg).unwrap();
        let cut = cfg.clone().with_exclusions(vec![first.mask.clone()]);
        let second = solve_ip(&data, &cut).unwrap();
        let oracle = enumerate_oracle(&data, &cut).unwrap();
        assert_ne!(second.mask, first.mask);
        assert!(second.objective >= first.objective - 1e-9);
        assert!((second.objective - oracle.objective).abs() <= 1e-9 * oracle.objective.max(1.0), "seed {seed}");
    }
}

#[test]
fn single_intra_edge_recovered_by_solver_and_oracle() {
    let mask = StructureMask::from_edges(2, 1, &[(0, 1)], &[]).unwrap();
    let mut params = ParamSet::zeros(2, 1);
    params.set_intra(0, 1, 0.9);
    let data = simulate(&mask, &params, &SimulationConfig::new(0.01, 50, 10, 8)).unwrap();
    let cfg = IpConfig::new(0.01, 0.01).unwrap();
    let sol = solve_ip(&data, &cfg).unwrap();
    assert_eq!(sol.mask, mask);
    // standard error of the slope is about sigma / (sigma sqrt(N (T - 1))) = 0.05
    assert!((sol.params.intra(0, 1) - 0.9).abs() < 0.15);
    let ex = enumerate_oracle(&data, &cfg).unwrap();
    assert!((sol.objective - ex.objective).abs() < 1e-9);
}

#[test]
fn enumeration_on_a_single_variable_without_lags() {
    let data = TrajectoryDataset::new(vec![1.0, 2.0, -1.0, 0.5], 2, 2, 1, 0).unwrap();
    let sol = enumerate_oracle(&data, &IpConfig::new(0.0, 0.0).unwrap()).unwrap();
    assert_eq!(sol.mask, StructureMask::empty(1, 0));
    assert!((sol.objective - 6.25).abs() < 1e-12);
}

#[test]
fn initial_solutions_are_distinct_and_reproducible() {
    let mask = StructureMask::from_edges(3, 1, &[(0, 1)], &[]).unwrap();
    let mut params = ParamSet::zeros(3, 1);
    params.set_intra(0, 1, 0.9);
    let data = simulate(&mask, &params, &SimulationConfig::new(0.01, 40, 10, 3)).unwrap();
    let cfg = IpConfig::new(0.01, 0.01).unwrap();
    let template = SubsampleSpec { subsample_size: 28, seed: 100 };
    let sols = initial_solutions(&data, 3, &template, &cfg).unwrap();
    assert_eq!(sols[0].mask, mask);
    for a in 0..3 {
        for b in a + 1..3 {
            assert_ne!(sols[a].mask, sols[b].mask);
        }
    }
    // the runners-up are the cheapest structures other than the truth
    let first_sub = ebdbn::subsample(&data, &SubsampleSpec { subsample_size: 28, seed: 101 }).unwrap();
    assert_eq!(sols[0], solve_ip(&first_sub, &cfg).unwrap());
    let second_sub = ebdbn::subsample(&data, &SubsampleSpec { subsample_size: 28, seed: 102 }).unwrap();
    let oracle = enumerate_oracle(&second_sub, &cfg.clone().with_exclusions(vec![mask.clone()])).unwrap();
    assert!((sols[1].objective - oracle.objective).abs() < 1e-9 * oracle.objective.max(1.0));
    assert_eq!(sols, initial_solutions(&data, 3, &template, &cfg).unwrap());
    let one = initial_solutions(&data, 1, &template, &cfg).unwrap();
    assert_eq!(one[0], sols[0]);
}

#[test]
fn subsample_selects_each_trajectory_uniformly() {
    let trials = 10_000;
    let mut counts = [0usize; 3];
    for seed in 0..trials {
        let idx = subsample_indices(3, &SubsampleSpec { subsample_size: 1, seed }).unwrap();
        counts[idx[0]] += 1;
    }
    let p = 1.0 / 3.0;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - trials as f64 * p).abs() < 3.0 * sd, "{counts:?}");
    }
    let a = subsample_indices(10, &SubsampleSpec { subsample_size: 4, seed: 9 }).unwrap();
    assert_eq!(a, subsample_indices(10, &SubsampleSpec { subsample_size: 4, seed: 9 }).unwrap());
}

#[test]
fn dual_examples_by_substitution() {
    let cfg = DualConfig::new(0.1, -1.0, 0.5).unwrap();
    assert!((dual_objective(&cfg, 0.0, 1.0).unwrap() - 1.1).abs() < 1e-12);
    assert!((dual_objective(&cfg, 2.0, 1.0).unwrap() - 1.5).abs() < 1e-12);
    let flat = DualConfig::new(0.0, -2.0, 4.0).unwrap().with_lambda_min(1e-3).unwrap();
    let sol = solve_dual(&flat, 4.0, 1.0).unwrap();
    assert!((sol.objective - 4.0).abs() < 1e-12);
    assert!(sol.lambda >= 1e-3);
}

/// Minimum of the dual over a 200 x 200 grid of feasible points.
fn dual_grid_min(cfg: &DualConfig, lambda_hi: f64) -> f64 {
    let e = cfg.reference_loss;
    let mut best = f64::INFINITY;
    for a in 0..200 {
        let lambda = cfg.lambda_min * (lambda_hi / cfg.lambda_min).powf(a as f64 / 199.0);
        let lo = e - cfg.beta.abs() * lambda;
        for b in 0..200 {
            let mu = lo + (e + 5.0 * lambda + 1.0 - lo) * (b as f64 + 0.5) / 200.0;
            let base = 1.0 + (e - mu) / (lambda * cfg.beta);
            let v = mu + cfg.epsilon * lambda + lambda * (base.powf(cfg.beta) - 1.0);
            best = best.min(v);
        }
    }
    best
}

#[test]
fn dual_solution_beats_grid_and_sits_at_reference() {
    let mut r = rng(33);
    for _ in 0..5 {
        let e = r.random_range(0.5..50.0);
        let cfg = DualConfig::new(r.random_range(0.01..1.0), -r.random_range(0.5..8.0), e).unwrap();
        let sol = solve_dual(&cfg, e * 0.9, 1.0).unwrap();
        assert!(sol.objective <= dual_grid_min(&cfg, 10.0) + 1e-8);
        assert!((sol.mu - e).abs() < 1e-9 * e);
        assert!((sol.lambda - cfg.lambda_min).abs() < 1e-9 * cfg.lambda_min);
        assert!((sol.objective - (e + cfg.epsilon * cfg.lambda_min)).abs() < 1e-9 * e);
    }
}

#[test]
fn dual_objective_is_monotone_in_epsilon() {
    let mut r = rng(4);
    for _ in 0..200 {
        let e = r.random_range(0.0..10.0);
        let beta: f64 = -r.random_range(0.2..6.0);
        let lambda = r.random_range(0.01..5.0);
        let mu = e - beta.abs() * lambda + r.random_range(1e-3..10.0);
        let lo = DualConfig::new(0.1, beta, e).unwrap();
        let hi = DualConfig::new(0.5, beta, e).unwrap();
        assert!(dual_objective(&lo, mu, lambda).unwrap() <= dual_objective(&hi, mu, lambda).unwrap());
    }
}

fn one_dim_posterior(beta: f64, lambda: f64, sign: LossSign) -> (GibbsPosterior, TrajectoryDataset) {
    // x_t = 0.5 x_{t-1} + noise, one lag weight
    let mask = StructureMask::from_edges(1, 1, &[], &[(0, 0, 0)]).unwrap();
    let mut params = ParamSet::zeros(1, 1);
    params.set_inter(0, 0, 0, 0.5);
    let data = simulate(&mask, &params, &SimulationConfig::new(0.3, 20, 8, 6)).unwrap();
    let (_, min_loss) = fit_weights_given_support(&data, &mask).unwrap();
    let dual = DualSolution {
        mu: min_loss,
        lambda,
        objective: 0.0,
        converged: true,
        epsilon: 0.1,
        beta,
    };
    let map = build_support_map(&mask);
    let post = GibbsPosterior::new(SupportedLoss::new(&data, &map).unwrap(), &dual, sign).unwrap();
    (post, data)
}

#[test]
fn log_posterior_values_by_substitution() {
    let mask = StructureMask::from_edges(1, 1, &[], &[(0, 0, 0)]).unwrap();
    let data = TrajectoryDataset::new(vec![1.0, 1.0], 1, 2, 1, 1).unwrap();
    // E(theta) = (1 - theta)^2, minimum 0 at theta = 1
    let map = build_support_map(&mask);
    let dual = |beta: f64, lambda: f64| DualSolution {
        mu: 0.0,
        lambda,
        objective: 0.0,
        converged: true,
        epsilon: 0.0,
        beta,
    };
    let plus = GibbsPosterior::new(SupportedLoss::new(&data, &map).unwrap(), &dual(-1.0, 1.0), LossSign::Plus).unwrap();
    assert_eq!(plus.log_density(&[1.0]), 0.0);
    // E = 0.5 at theta = 1 - sqrt(0.5): (-2) log(1 - 0.5) = 2 ln 2
    let theta = 1.0 - 0.5f64.sqrt();
    assert!((plus.log_density(&[theta]) - 2.0 * 2f64.ln()).abs() < 1e-12);
    // outside the domain: 1 - E <= 0
    assert_eq!(plus.log_density(&[-1.0]), f64::NEG_INFINITY);
    assert!(matches!(plus.grad(&[-1.0]), Err(Error::Domain(_))));
    assert_eq!(plus.grad(&[1.0]).unwrap(), vec![0.0]);
}

#[test]
fn log_posterior_gradient_matches_finite_differences_seed_13() {
    let mut r = rng(13);
    let data = random_dataset(&mut r, 4, 8, 3, 1);
    let mask = random_mask(&mut r, 3, 1, 0.6);
    let map = build_support_map(&mask);
    let (_, e_min) = fit_weights_given_support(&data, &mask).unwrap();
    let dual = DualSolution {
        mu: e_min,
        lambda: 2.0,
        objective: 0.0,
        converged: true,
        epsilon: 0.1,
        beta: -3.0,
    };
    let post = GibbsPosterior::new(SupportedLoss::new(&data, &map).unwrap(), &dual, LossSign::Minus).unwrap();
    let theta: Vec<f64> = (0..map.size()).map(|_| r.random_range(-0.5..0.5)).collect();
    let g = post.grad(&theta).unwrap();
    let h = 1e-5;
    let fds: Vec<f64> = (0..theta.len())
        .map(|k| {
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[k] += h;
            b[k] -= h;
            (post.log_density(&a) - post.log_density(&b)) / (2.0 * h)
        })
        .collect();
    let scale = fds.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (gk, fd) in g.iter().zip(&fds) {
        assert!((gk - fd).abs() <= 1e-5 * fd.abs().max(1e-3 * scale), "{gk} vs {fd}");
    }
}

#[test]
fn acceptance_ratio_satisfies_detailed_balance() {
    let (post, _) = one_dim_posterior(-3.0, 0.5, LossSign::Minus);
    let mut r = rng(21);
    for _ in 0..100 {
        let x = [r.random_range(0.0..1.0)];
        let y = [r.random_range(0.0..1.0)];
        let h = r.random_range(0.01..0.3);
        let fwd = mala_log_accept_ratio(&post, &x, &y, h).unwrap();
        let bwd = mala_log_accept_ratio(&post, &y, &x, h).unwrap();
        assert!((fwd + bwd).abs() < 1e-12 * (1.0 + fwd.abs()));
        // independent formula for the forward ratio
        let q = |to: f64, from: f64| {
            let g = post.grad(&[from]).unwrap()[0];
            let m = from + 0.5 * h * h * g;
            -(to - m).powi(2) / (2.0 * h * h)
        };
        let direct = post.log_density(&y) + q(x[0], y[0]) - post.log_density(&x) - q(y[0], x[0]);
        assert!((fwd.min(0.0).exp() - direct.min(0.0).exp()).abs() < 1e-12);
    }
}

#[test]
fn tiny_step_keeps_the_initial_point() {
    let (post, _) = one_dim_posterior(-3.0, 0.5, LossSign::Minus);
    let cfg = SamplerConfig {
        step_size: 1e-12,
        burn_in: 0,
        n_samples: 1,
        ..SamplerConfig::default()
    };
    let chain = run_mala(&post, &[0.4], &cfg).unwrap();
    assert!((chain.samples[0][0] - 0.4).abs() < 1e-6);
}

#[test]
fn infeasible_start_is_an_initialization_error() {
    let (post, _) = one_dim_posterior(-1.0, 1e-3, LossSign::Plus);
    let err = run_mala(&post, &[50.0], &SamplerConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Initialization(_)));
}

#[test]
fn adapted_acceptance_on_a_five_dimensional_instance() {
    let mut r = rng(8);
    let mask = StructureMask::from_edges(3, 1, &[(0, 1)], &[(0, 0, 0), (0, 1, 1), (0, 2, 2), (0, 0, 2)]).unwrap();
    let truth = random_params(&mut r, &mask, 0.3, 0.6);
    let data = simulate(&mask, &truth, &SimulationConfig::new(0.5, 40, 10, 8)).unwrap();
    let map = build_support_map(&mask);
    let (fit, e_min) = fit_weights_given_support(&data, &mask).unwrap();
    let dual = solve_dual(&DualConfig::new(0.1, -25.0, e_min).unwrap(), e_min, 1.0).unwrap();
    let post = GibbsPosterior::new(SupportedLoss::new(&data, &map).unwrap(), &dual, LossSign::Minus).unwrap();
    let cfg = SamplerConfig {
        burn_in: 2000,
        n_samples: 5000,
        seed: 2,
        ..SamplerConfig::default()
    };
    let chain = run_mala(&post, &extract_params(&fit, &map).unwrap(), &cfg).unwrap();
    assert!((0.4..=0.75).contains(&chain.acceptance_rate), "{}", chain.acceptance_rate);
    let again = run_mala(&post, &extract_params(&fit, &map).unwrap(), &cfg).unwrap();
    assert_eq!(chain, again);
    assert!(chain.samples.iter().all(|s| post.log_density(s).is_finite()));
}

#[test]
fn mixture_weight_examples() {
    assert_eq!(model_weights(&[12.0], 1.0).unwrap(), vec![1.0]);
    let w = model_weights(&[3.0; 4], 1.0).unwrap();
    assert!(w.iter().all(|v| (v - 0.25).abs() < 1e-15));
    assert!(w.iter().all(|_| (ebdbn::bayes_factor(&w, 0, 3).unwrap() - 1.0).abs() < 1e-15));
    assert_eq!(ebdbn::bayes_factor(&[0.75, 0.25], 0, 0).unwrap(), 1.0);
    assert!((ebdbn::bayes_factor(&[0.75, 0.25], 0, 1).unwrap() - 3.0).abs() < 1e-12);
}

fn constant_chain(theta: Vec<f64>) -> PosteriorChain {
    PosteriorChain {
        samples: vec![theta],
        acceptance_rate: 0.0,
        log_density_trace: vec![0.0],
        step_size: 0.1,
    }
}

#[test]
fn evaluation_draw_examples() {
    let mut r = rng(21);
    let val = random_dataset(&mut r, 3, 6, 2, 1);
    let mask = StructureMask::from_edges(2, 1, &[(0, 1)], &[(0, 1, 1)]).unwrap();
    let map = build_support_map(&mask);
    let chains = vec![constant_chain(vec![0.3, -0.2]), constant_chain(vec![0.0, 0.0])];
    let maps = vec![map.clone(), map.clone()];
    let draws = sample_evaluation(&[1.0, 0.0], &chains, &maps, &val, 200, 1).unwrap();
    assert!(draws.iter().all(|d| d.model == 0));
    let expected = naive_loss(&val, &embed_params(&[0.3, -0.2], &map).unwrap());
    assert!(draws.iter().all(|d| rel(d.loss, expected) < 1e-12 && d.loss >= 0.0));

    let one = sample_evaluation(&[1.0], &chains[..1], &maps[..1], &val, 20, 5).unwrap();
    assert!(one.windows(2).all(|w| w[0].loss == w[1].loss));
}

#[test]
fn point_estimate_losses_match_naive_loop_seed_21() {
    let mut r = rng(21);
    let mask = random_mask(&mut r, 3, 1, 0.5);
    let truth = random_params(&mut r, &mask, 0.2, 0.6);
    let val = simulate(&mask, &truth, &SimulationConfig::new(0.0, 4, 8, 21)).unwrap();
    let other = random_params(&mut r, &mask, 0.2, 0.6);
    let sols: Vec<ebdbn::IpSolution> = [truth, other]
        .into_iter()
        .map(|params| ebdbn::IpSolution {
            mask: mask.clone(),
            params,
            objective: 0.0,
            proven_optimal: true,
        })
        .collect();
    let losses = point_estimate_losses(&sols, &val).unwrap();
    assert!(losses[0] < 1e-10);
    assert!(rel(losses[1], naive_loss(&val, &sols[1].params)) < 1e-12);
}

#[test]
fn histogram_and_summary_examples() {
    let h = ebdbn::histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
    assert_eq!(h.counts, vec![2, 2]);
    let flat = ebdbn::histogram(&[5.0; 7], 4).unwrap();
    assert_eq!(flat.counts.iter().filter(|&&c| c > 0).count(), 1);
    assert_eq!(flat.counts.iter().sum::<usize>(), 7);

    let mut r = rng(12);
    let xs: Vec<f64> = (0..501).map(|_| r.random_range(0.0..10.0)).collect();
    let s = summarize(&xs).unwrap();
    assert!((s.median - sort_percentile(&xs, 0.5)).abs() < 1e-12);
    assert!((s.p05 - sort_percentile(&xs, 0.05)).abs() < 1e-12);
    assert!((s.p95 - sort_percentile(&xs, 0.95)).abs() < 1e-12);
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(percentile(&sorted, 0.0), sorted[0]);
    assert_eq!(percentile(&sorted, 1.0), sorted[500]);
}
