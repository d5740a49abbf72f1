use phev_demand::svr::{
    brute_force_qp_oracle, dual_objective, kernel_eval, kkt_violation, solve_nu_svr, train_nu_svr,
    train_nu_svr_traced, KernelSpec, NuSvrParams, SvrModel, TrainingSet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sine6() -> TrainingSet {
    let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
    let ts = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x[0]).sin()).collect();
    TrainingSet::new(xs, ts).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> TrainingSet {
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let ts = xs
        .iter()
        .map(|x| (3.0 * x.iter().sum::<f64>()).sin() + 0.3 * (rng.random::<f64>() - 0.5))
        .collect();
    TrainingSet::new(xs, ts).unwrap()
}

fn tube_stats(model: &SvrModel, data: &TrainingSet) -> (f64, f64) {
    let n = data.len() as f64;
    let sv = model.n_support() as f64 / n;
    let outside = data
        .inputs()
        .iter()
        .zip(data.targets())
        .filter(|(x, t)| (model.predict(x).unwrap() - **t).abs() > model.epsilon() + 1e-6)
        .count() as f64
        / n;
    (sv, outside)
}

#[test]
fn sine_instance_matches_oracle() {
    let data = sine6();
    let kernel = KernelSpec::Rbf { gamma: 10.0 };
    let params = NuSvrParams::new(1000.0, 0.5).unwrap();
    let oracle = brute_force_qp_oracle(&data, &params, &kernel).unwrap();
    let smo = solve_nu_svr(&data, &params, &kernel).unwrap();
    assert!((smo.objective - oracle.objective).abs() <= 1e-6, "{} vs {}", smo.objective, oracle.objective);
    assert!((oracle.restart_objectives[0] - oracle.restart_objectives[1]).abs() <= 1e-8);
    assert!(kkt_violation(&data, &params, &kernel, &oracle.duals).unwrap() <= 1e-6);
    let direct = dual_objective(&data, &kernel, &oracle.beta).unwrap();
    assert!((direct - oracle.objective).abs() < 1e-9);
}

#[test]
fn sine_fit_stays_inside_the_tube_at_free_points() {
    let data = sine6();
    let kernel = KernelSpec::Rbf { gamma: 10.0 };
    let params = NuSvrParams::new(1000.0, 0.5).unwrap();
    let out = solve_nu_svr(&data, &params, &kernel).unwrap();
    let u = params.upper_bound(data.len());
    for (i, (x, t)) in data.inputs().iter().zip(data.targets()).enumerate() {
        let at_bound = out.duals.alpha[i] >= u || out.duals.alpha_star[i] >= u;
        if !at_bound {
            let r = (out.model.predict(x).unwrap() - t).abs();
            assert!(r <= out.model.epsilon() + params.kkt_tolerance, "point {i}: {r}");
        }
    }
}

#[test]
fn random_instances_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let kernels = [
        KernelSpec::Rbf { gamma: 10.0 },
        KernelSpec::Rbf { gamma: 1.0 },
        KernelSpec::Polynomial { degree: 2, gamma: 1.0, coef0: 1.0 },
        KernelSpec::Linear,
    ];
    for case in 0..12 {
        let n = 4 + case % 9;
        let data = random_set(&mut rng, n, 1 + case % 3);
        let kernel = kernels[case % 4];
        let c = [1.0, 10.0, 1000.0][case % 3];
        let nu = 0.1 + 0.9 * rng.random::<f64>();
        let params = NuSvrParams::new(c, nu).unwrap();
        let oracle = brute_force_qp_oracle(&data, &params, &kernel).unwrap();
        let smo = solve_nu_svr(&data, &params, &kernel).unwrap();
        assert!(
            (smo.objective - oracle.objective).abs() <= 1e-6,
            "case {case}: smo {} oracle {}",
            smo.objective,
            oracle.objective
        );
    }
}

#[test]
fn nu_bounds_support_and_error_fractions() {
    for (seed, n) in [(1u64, 20usize), (2, 50), (3, 100)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_set(&mut rng, n, 2);
        for nu in [0.25, 0.5, 0.75] {
            let params = NuSvrParams::new(100.0, nu).unwrap();
            let model = train_nu_svr(&data, &params, &KernelSpec::Rbf { gamma: 10.0 }).unwrap();
            let (sv, out) = tube_stats(&model, &data);
            let slack = 2.0 / n as f64;
            assert!(sv >= nu - slack, "n={n} nu={nu}: sv fraction {sv}");
            assert!(out <= nu + slack, "n={n} nu={nu}: error fraction {out}");
        }
    }
}

#[test]
fn dual_objective_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let data = random_set(&mut rng, 60, 3);
    let params = NuSvrParams::new(1000.0, 0.5).unwrap();
    let (out, trace) = train_nu_svr_traced(&data, &params, &KernelSpec::Rbf { gamma: 10.0 }).unwrap();
    assert_eq!(trace.len() as u64, out.iterations + 1);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
    }
    assert_eq!(*trace.last().unwrap(), out.objective);
}

#[test]
fn rbf_gram_is_positive_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [5usize, 20, 50] {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let rows: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let k = phev_demand::svr::gram_matrix(&KernelSpec::Rbf { gamma: 10.0 }, &rows);
        let m = nalgebra::DMatrix::from_row_slice(n, n, &k);
        let min = m.symmetric_eigenvalues().min();
        assert!(min >= -1e-10 * n as f64, "n={n}: {min}");
    }
}

#[test]
fn pruning_keeps_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_set(&mut rng, 40, 2);
    let model = train_nu_svr(&data, &NuSvrParams::new(10.0, 0.3).unwrap(), &KernelSpec::Rbf { gamma: 5.0 }).unwrap();
    let pruned = model.pruned();
    assert!(pruned.support_inputs().len() <= model.support_inputs().len());
    assert!(pruned.dual_coefs().iter().all(|&b| b != 0.0));
    for _ in 0..100 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        assert!((model.predict(&x).unwrap() - pruned.predict(&x).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn model_file_roundtrip_predicts_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = random_set(&mut rng, 30, 3);
    let model = train_nu_svr(&data, &NuSvrParams::new(10.0, 0.5).unwrap(), &KernelSpec::Rbf { gamma: 2.0 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = SvrModel::load(&path).unwrap();
    assert_eq!(back, model);
    for x in data.inputs() {
        assert_eq!(back.predict(x).unwrap().to_bits(), model.predict(x).unwrap().to_bits());
    }
}

#[test]
fn bad_parameters_are_rejected() {
    assert!(NuSvrParams::new(0.0, 0.5).is_err());
    assert!(NuSvrParams::new(1.0, 0.0).is_err());
    assert!(NuSvrParams::new(1.0, 1.5).is_err());
    assert!(TrainingSet::new(vec![vec![0.0]], vec![1.0]).is_err());
    assert!(TrainingSet::new(vec![vec![0.0], vec![0.0, 1.0]], vec![1.0, 2.0]).is_err());
    assert!(TrainingSet::new(vec![vec![0.0], vec![f64::NAN]], vec![1.0, 2.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_symmetric(
        x in prop::collection::vec(-2.0f64..2.0, 3),
        y in prop::collection::vec(-2.0f64..2.0, 3),
        gamma in 0.01f64..20.0,
    ) {
        for k in [KernelSpec::Rbf { gamma }, KernelSpec::Polynomial { degree: 3, gamma, coef0: 0.5 }, KernelSpec::Linear] {
            prop_assert_eq!(kernel_eval(&k, &x, &y).unwrap(), kernel_eval(&k, &y, &x).unwrap());
        }
        let rbf = kernel_eval(&KernelSpec::Rbf { gamma }, &x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&rbf));
    }

    #[test]
    fn training_keeps_duals_feasible(seed in 0u64..1000, n in 5usize..40, nu in 0.05f64..1.0, c in 0.1f64..500.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_set(&mut rng, n, 2);
        let params = NuSvrParams::new(c, nu).unwrap();
        let out = solve_nu_svr(&data, &params, &KernelSpec::Rbf { gamma: 10.0 }).unwrap();
        let u = params.upper_bound(n);
        prop_assert!(out.duals.alpha.iter().chain(&out.duals.alpha_star).all(|&v| (0.0..=u).contains(&v)));
        prop_assert!(out.duals.beta().iter().sum::<f64>().abs() <= 1e-9 * c);
        let l1: f64 = out.duals.alpha.iter().chain(&out.duals.alpha_star).sum();
        prop_assert!(l1 <= c * nu + params.kkt_tolerance);
        prop_assert!(out.kkt_violation <= params.kkt_tolerance);
        prop_assert!(out.model.epsilon() >= 0.0);
    }
}
