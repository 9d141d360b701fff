use ktan::baselines::{
    damped_newton_step, gd_run, newton_oracle, newton_oracle_from, saga_run_with_indices, sgd_run,
    sgd_run_with_indices, BaselineConfig, GdConfig, Method, SagaState,
};
use ktan::risk::{Dataset, RiskConfig, RiskView, Sample};
use ktan::solver::newton_decrement;
use ktan::trace::WorkMeter;
use ktan::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let samples = (0..n)
        .map(|_| {
            let a: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Sample::dense(&a, label)
        })
        .collect();
    Dataset::new(samples, p).unwrap()
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Per-sample gradient of the logistic loss written out by hand.
fn sample_grad(data: &Dataset, x: &DVector<f64>, i: usize) -> DVector<f64> {
    let s = data.sample(i);
    let mut a = DVector::zeros(x.len());
    for (&j, &v) in s.indices.iter().zip(s.values) {
        a[j as usize] = v;
    }
    let m = s.label * a.dot(x);
    a * (-s.label * sigmoid(-m))
}

fn cfg(method: Method, eta: f64, iterations: u64) -> BaselineConfig {
    BaselineConfig {
        method,
        step_size: eta,
        iterations,
        ..Default::default()
    }
}

#[test]
fn sgd_follows_hand_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let data = toy(&mut rng, 10, 4);
    let view = RiskView::new(
        &data,
        10,
        RiskConfig {
            c: 3.0,
            ..Default::default()
        },
    )
    .unwrap();
    let x0 = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.0]);
    let draws = [3usize, 7, 3];
    let out = sgd_run_with_indices(&view, &cfg(Method::Sgd, 0.1, 3), x0.clone(), draws).unwrap();
    let mut x = x0;
    for &i in &draws {
        x = &x - (sample_grad(&data, &x, i) + &x * view.reg()) * 0.1;
    }
    assert!((&out.x - &x).norm() <= 1e-12);
    assert_eq!(out.iterations, 3);
}

#[test]
fn sgd_first_step_is_single_sample_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let data = toy(&mut rng, 1, 3);
    let view = RiskView::new(&data, 1, RiskConfig::default()).unwrap();
    let x0 = DVector::zeros(3);
    let out = sgd_run(&view, &cfg(Method::Sgd, 0.5, 1), x0.clone()).unwrap();
    let want = -sample_grad(&data, &x0, 0) * 0.5;
    assert!((&out.x - want).norm() <= 1e-15);
}

#[test]
fn saga_direction_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let n = 12;
    let data = toy(&mut rng, n, 5);
    let view = RiskView::new(
        &data,
        n,
        RiskConfig {
            c: 2.0,
            ..Default::default()
        },
    )
    .unwrap();
    let x = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
    let anchor = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
    let g = view.grad(&x).unwrap();
    for state in [SagaState::new(&view), SagaState::at_point(&view, &anchor)] {
        let mean = (0..n).fold(DVector::zeros(5), |acc, j| acc + state.direction(&view, &x, j)) / n as f64;
        assert!((&mean - &g).norm() <= 1e-12, "{}", (&mean - &g).norm());
    }
    // A table filled at x gives the exact gradient for every draw.
    let full = SagaState::at_point(&view, &x);
    for j in 0..n {
        assert!((full.direction(&view, &x, j) - &g).norm() <= 1e-12);
    }
}

#[test]
fn saga_table_tracks_last_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let n = 6;
    let data = toy(&mut rng, n, 3);
    let view = RiskView::new(&data, n, RiskConfig::default()).unwrap();
    let mut state = SagaState::new(&view);
    let mut x = DVector::from_vec(vec![0.2, 0.1, -0.4]);
    for &j in &[0usize, 4, 4, 2, 0, 5] {
        let before = x.clone();
        state.step(&view, &mut x, j, 0.2);
        let s = data.sample(j);
        let scalar = -s.label * sigmoid(-s.label * s.dot(before.as_slice()));
        assert!((state.table()[j] - scalar).abs() <= 1e-15);
        let avg = (0..n).fold(DVector::zeros(3), |acc, i| {
            let mut a = DVector::zeros(3);
            data.sample(i).axpy(state.table()[i], a.as_mut_slice());
            acc + a
        }) / n as f64;
        assert!((&avg - state.average()).norm() <= 1e-14);
    }
    // Same steps through the run loop.
    let out = saga_run_with_indices(
        &view,
        &cfg(Method::Saga, 0.2, 6),
        DVector::from_vec(vec![0.2, 0.1, -0.4]),
        [0usize, 4, 4, 2, 0, 5],
    )
    .unwrap();
    assert_eq!(out.x, x);
}

#[test]
fn first_order_methods_tick_one_per_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let data = toy(&mut rng, 50, 4);
    for method in [Method::Sgd, Method::Saga] {
        let meter = WorkMeter::new();
        let view = RiskView::new(&data, 50, RiskConfig::default())
            .unwrap()
            .with_meter(&meter);
        let c = BaselineConfig {
            log_every: 7,
            seed: 3,
            ..cfg(method, 0.05, 40)
        };
        let out = match method {
            Method::Sgd => sgd_run(&view, &c, DVector::zeros(4)).unwrap(),
            _ => ktan::baselines::saga_run(&view, &c, DVector::zeros(4)).unwrap(),
        };
        assert_eq!(meter.processed(), 40);
        assert_eq!(meter.evaluated(), 40);
        for r in &out.trace {
            assert_eq!(r.samples_cum, r.stage as u64);
            assert_eq!(r.grad_evals_cum, r.stage as u64);
        }
        assert_eq!(out.trace.last().unwrap().samples_cum, 40);
    }
}

#[test]
fn oracle_is_idempotent_and_restart_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..5 {
        let data = toy(&mut rng, 200, 6);
        let view = RiskView::new(&data, 200, RiskConfig::default()).unwrap();
        let a = newton_oracle(&view, 1e-12).unwrap();
        assert!(a.grad_norm <= 1e-12);
        let b = newton_oracle_from(&view, a.x.clone(), 1e-12).unwrap();
        assert_eq!(b.iterations, 0);
        assert!((&a.x - &b.x).norm() <= 1e-10);
        let start = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
        let c = newton_oracle_from(&view, start, 1e-12).unwrap();
        assert!((&a.x - &c.x).norm() <= 1e-9);
    }
}

#[test]
fn label_symmetric_data_has_minimizer_at_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let mut samples = Vec::new();
    for _ in 0..10 {
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        samples.push(Sample::dense(&a, 1.0));
        samples.push(Sample::dense(&a, -1.0));
    }
    let data = Dataset::new(samples, 3).unwrap();
    let view = RiskView::new(&data, 20, RiskConfig::default()).unwrap();
    let out = newton_oracle(&view, 1e-12).unwrap();
    assert_eq!(out.iterations, 0);
    assert_eq!(out.x, DVector::zeros(3));
}

#[test]
fn damped_step_is_full_newton_near_the_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let data = toy(&mut rng, 300, 5);
    let view = RiskView::new(
        &data,
        300,
        RiskConfig {
            c: 5.0,
            ..Default::default()
        },
    )
    .unwrap();
    let xs = newton_oracle(&view, 1e-12).unwrap().x;
    let x = &xs + DVector::from_fn(5, |_, _| rng.random_range(-0.05..0.05));
    assert!(newton_decrement(&view, &x).unwrap() < 0.25);
    let next = damped_newton_step(&view, &x).unwrap();
    let mut h = view.data_hessian(&x).unwrap();
    for i in 0..5 {
        h[(i, i)] += view.reg();
    }
    let want = &x - h.cholesky().unwrap().solve(&view.grad(&x).unwrap());
    assert!((&next - &want).norm() <= 1e-12 * want.norm().max(1.0));
}

#[test]
fn gradient_descent_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(38);
    let data = toy(&mut rng, 100, 5);
    let view = RiskView::new(
        &data,
        100,
        RiskConfig {
            c: 20.0,
            ..Default::default()
        },
    )
    .unwrap();
    let xs = newton_oracle(&view, 1e-12).unwrap().x;
    let mu = view.reg();
    let l = view.lipschitz() + mu;
    let rate = (1.0 - mu / l).sqrt();
    let gd = GdConfig {
        min_iters: 30,
        max_iters: 30,
        log_every: 1,
        ..Default::default()
    };
    let out = gd_run(&view, &gd, DVector::from_element(5, 1.0)).unwrap();
    let values: Vec<f64> = out.iterates.iter().map(|x| view.value(x).unwrap()).collect();
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-15);
    }
    for w in out.iterates.windows(2) {
        assert!((&w[1] - &xs).norm() <= rate * (&w[0] - &xs).norm() + 1e-12);
    }
    assert_eq!(out.trace.last().unwrap().samples_cum, 30 * 100);
}

#[test]
fn method_names_round_trip() {
    for m in [
        Method::Gd,
        Method::Sgd,
        Method::Saga,
        Method::AdaNewton,
        Method::NewtonOracle,
    ] {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert!("lbfgs".parse::<Method>().is_err());
    assert!(cfg(Method::Sgd, 0.0, 1).validate().is_err());
}
