//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ktan::baselines::{adanewton_run, newton_oracle, saga_run, sgd_run, BaselineConfig, Method};
use ktan::data::{parse_libsvm, synthesize, write_libsvm, SpectrumDecay, SyntheticSpec};
use ktan::linalg::{full_sym_eig, TruncatedEig, TruncatedInverse};
use ktan::risk::{Dataset, RiskConfig, RiskView, Sample, Schedule};
use ktan::solver::{
    self, decrement_step_bound, k_constant, ktan_step, newton_decrement, simplified_lhs1, stage_subopt,
    subopt_step_bound, suggested_c_threshold, suggested_rho, EigBackend, SolverConfig,
};
use ktan::trace::WorkMeter;
use ktan::{DMatrix, DVector, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Verdict = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> std::result::Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("runtime {t:.1?} exceeds {limit:?}"))
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gvec(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    gaussian(rng, p, 1).column(0).into_owned()
}

fn dense_solve(a: &DMatrix<f64>, r: f64, g: &DVector<f64>) -> DVector<f64> {
    let p = a.nrows();
    (a + DMatrix::identity(p, p) * r).cholesky().expect("SPD").solve(g)
}

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

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut instances, mut checks, mut worst, mut gap) = (0, 0, f64::INFINITY, 0.0f64);
    for trial in 0..100 {
        let p = 5 + trial % 46;
        let b = gaussian(&mut rng, p, p);
        let h = &b * b.transpose() / p as f64;
        let h = (&h + h.transpose()) * 0.5;
        let r = 10f64.powf(rng.random_range(-2.0..0.0));
        let full = full_sym_eig(&h).map_err(|e| e.to_string())?;
        let probes: Vec<DVector<f64>> = (0..3).map(|_| gvec(&mut rng, p)).collect();
        for k in 0..=p {
            let inv = TruncatedInverse::new(TruncatedEig::from_sym_eig(&full, k).unwrap(), r).unwrap();
            let eps = inv.epsilon();
            for g in &probes {
                let exact = dense_solve(&h, r, g);
                let err = (inv.apply(g).unwrap() - &exact).norm();
                let slack = eps * exact.norm() + 1e-9 - err;
                worst = worst.min(slack);
                ensure(slack >= 0.0, || format!("p={p} k={k}: error {err:e} above bound"))?;
                checks += 1;
            }
            if k < p {
                let v = full.eigvecs.column(k).into_owned();
                let exact = dense_solve(&h, r, &v);
                let err = (inv.apply(&v).unwrap() - &exact).norm();
                gap = gap.max((err - eps * exact.norm()).abs());
                ensure((err - eps * exact.norm()).abs() <= 1e-10, || {
                    format!("p={p} k={k}: tightness gap {:e}", (err - eps * exact.norm()).abs())
                })?;
                checks += 1;
            }
        }
        instances += 1;
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!(
        "{instances} instances, {checks} checks, min slack {worst:e}, max tightness gap {gap:e}, {:.1?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.random_range(2..=40);
        let k = rng.random_range(0..=p);
        let q = gaussian(&mut rng, p, p).qr().q();
        let mut vals: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let next = if k < p {
            vals.last().copied().unwrap_or(1.0) * rng.random_range(0.0..1.0)
        } else {
            0.0
        };
        let u = q.columns(0, k).into_owned();
        let r = 10f64.powf(rng.random_range(-3.0..0.0));
        let g = gvec(&mut rng, p);
        let materialized = &u * DMatrix::from_diagonal(&DVector::from_vec(vals.clone())) * u.transpose();
        let want = dense_solve(&materialized, r, &g);
        let factors = TruncatedEig::new(u, vals, next).map_err(|e| e.to_string())?;
        let got = TruncatedInverse::new(factors, r).unwrap().apply(&g).unwrap();
        let rel = (got - &want).norm() / want.norm();
        worst = worst.max(rel);
        ensure(rel <= 1e-10, || format!("p={p} k={k}: relative error {rel:e}"))?;
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!("100 triples, max relative error {worst:e}"))
}

fn reg_hessian(view: &RiskView<'_>, x: &DVector<f64>) -> DMatrix<f64> {
    let mut h = view.data_hessian(x).unwrap();
    for i in 0..h.nrows() {
        h[(i, i)] += view.reg();
    }
    h
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let p = 2 + trial % 12;
        let n = 30 + 7 * trial;
        let data = toy(&mut rng, n, p);
        let view = RiskView::new(
            &data,
            n,
            RiskConfig {
                c: 1.0 + trial as f64,
                ..Default::default()
            },
        )
        .unwrap();
        let x = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let step = ktan_step(&x, &view, 0.0, &EigBackend::Dense).map_err(|e| e.to_string())?;
        let d = reg_hessian(&view, &x)
            .cholesky()
            .unwrap()
            .solve(&view.grad(&x).unwrap());
        let rel = (&x - &step.x_n - &d).norm() / d.norm();
        worst = worst.max(rel);
        ensure(rel <= 1e-8 && step.k == p, || {
            format!("trial {trial}: relative error {rel:e}, k={}", step.k)
        })?;
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!("20 instances, max relative error {worst:e}"))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let h = 1e-6;
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for trial in 0..20 {
        let p = 2 + trial % 8;
        let n = 25 + trial;
        let data = toy(&mut rng, n, p);
        let view = RiskView::new(
            &data,
            n,
            RiskConfig {
                c: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        let x = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let g = view.grad(&x).unwrap();
        let hess = reg_hessian(&view, &x);
        let mut fd_g = DVector::zeros(p);
        let mut fd_h = DMatrix::zeros(p, p);
        for j in 0..p {
            let mut e = DVector::zeros(p);
            e[j] = h;
            fd_g[j] = (view.value(&(&x + &e)).unwrap() - view.value(&(&x - &e)).unwrap()) / (2.0 * h);
            let col = (view.grad(&(&x + &e)).unwrap() - view.grad(&(&x - &e)).unwrap()) / (2.0 * h);
            fd_h.set_column(j, &col);
        }
        let eg = (&fd_g - &g).norm() / g.norm();
        let eh = (&fd_h - &hess).norm() / hess.norm();
        worst_g = worst_g.max(eg);
        worst_h = worst_h.max(eh);
        ensure(eg <= 1e-5 && eh <= 1e-5, || {
            format!("trial {trial}: gradient {eg:e}, Hessian {eh:e}")
        })?;
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!(
        "20 instances, max relative error gradient {worst_g:e}, Hessian {worst_h:e}"
    ))
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const C: f64 = 64.0;

fn synthetic_default(seed: u64) -> Dataset {
    synthesize(&SyntheticSpec {
        n_samples: 8192,
        dim: 200,
        decay: SpectrumDecay::Geometric(0.5),
        seed,
        ..Default::default()
    })
    .unwrap()
    .0
}

fn risk() -> RiskConfig {
    RiskConfig {
        c: C,
        schedule: Schedule::InvN,
        ..Default::default()
    }
}

struct StageRecord {
    m: usize,
    n: usize,
    x_m: DVector<f64>,
    x_n: DVector<f64>,
    epsilon: f64,
    accepted: bool,
}

struct SeedRun {
    seed: u64,
    data: Dataset,
    xstar_norm: f64,
    rho0: f64,
    outcome: std::result::Result<solver::RunOutcome, String>,
    stages: Vec<StageRecord>,
    elapsed: Duration,
}

fn seed_runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let data = synthetic_default(seed);
                let full = RiskView::new(&data, data.len(), risk()).unwrap();
                let xstar_norm = newton_oracle(&full, 1e-12).unwrap().x.norm();
                let rho0 = suggested_rho(C, xstar_norm);
                let cfg = SolverConfig {
                    m0: 128,
                    alpha0: 2.0,
                    rho0,
                    ..Default::default()
                };
                let mut stages = Vec::new();
                let start = Instant::now();
                let outcome = solver::run_observed(&data, &risk(), &cfg, |ev| {
                    stages.push(StageRecord {
                        m: ev.m,
                        n: ev.n,
                        x_m: ev.x_m.clone(),
                        x_n: ev.x_n.clone(),
                        epsilon: ev.epsilon,
                        accepted: ev.accepted,
                    })
                })
                .map_err(|e| e.to_string());
                let elapsed = start.elapsed();
                SeedRun {
                    seed,
                    data,
                    xstar_norm,
                    rho0,
                    outcome,
                    stages,
                    elapsed,
                }
            })
            .collect()
    })
}

fn criterion_5() -> Verdict {
    let mut summary = Vec::new();
    for run in seed_runs() {
        let s = run.seed;
        let out = run.outcome.as_ref().map_err(|e| format!("seed {s}: {e}"))?;
        let n_total = run.data.len();
        let view = RiskView::new(&run.data, n_total, risk()).unwrap();
        let gn = view.grad(out.x()).unwrap().norm();
        let bound = (2.0 * C).sqrt() * view.accuracy();
        ensure(gn < bound, || {
            format!("seed {s}: final gradient {gn:e} not below {bound:e}")
        })?;
        ensure(out.stages() == 6, || format!("seed {s}: {} stages", out.stages()))?;
        ensure(out.backtracks() == 0, || {
            format!("seed {s}: {} backtracks", out.backtracks())
        })?;
        let cap = 2.2 * n_total as f64;
        ensure(out.state.samples_cum as f64 <= cap, || {
            format!("seed {s}: samples_cum {} above {cap}", out.state.samples_cum)
        })?;
        ensure(run.elapsed < Duration::from_secs(180), || {
            format!("seed {s}: runtime {:?}", run.elapsed)
        })?;
        summary.push(format!(
            "seed {s}: rho0={:.4} samples={} {:.1?}",
            run.rho0, out.state.samples_cum, run.elapsed
        ));
    }
    Ok(summary.join("; "))
}

fn oracle(data: &Dataset, n: usize) -> DVector<f64> {
    newton_oracle(&RiskView::new(data, n, risk()).unwrap(), 1e-12)
        .unwrap()
        .x
}

fn criterion_6() -> Verdict {
    let (mut checked, mut max_lambda) = (0, 0.0f64);
    for run in seed_runs() {
        let s = run.seed;
        run.outcome.as_ref().map_err(|e| format!("seed {s}: {e}"))?;
        for st in run.stages.iter() {
            let view = RiskView::new(&run.data, st.n, risk()).unwrap();
            let xs = oracle(&run.data, st.n);
            let lam_m = newton_decrement(&view, &st.x_m).unwrap();
            let lam_n = newton_decrement(&view, &st.x_n).unwrap();
            let s_m = stage_subopt(&view, &st.x_m, &xs).unwrap();
            let s_n = stage_subopt(&view, &st.x_n, &xs).unwrap();
            let tag = format!("seed {s} stage {}->{}", st.m, st.n);
            max_lambda = max_lambda.max(lam_m);
            ensure(lam_m < 0.25, || format!("{tag}: lambda_n(x_m) = {lam_m}"))?;
            let l2 = subopt_step_bound(st.epsilon, s_m);
            ensure(s_n <= l2, || format!("{tag}: S_n(x_n) = {s_n:e} above {l2:e}"))?;
            let l3 = decrement_step_bound(st.epsilon, lam_m);
            ensure(lam_n <= l3, || format!("{tag}: lambda_n(x_n) = {lam_n:e} above {l3:e}"))?;
            for (lam, sub) in [(lam_m, s_m), (lam_n, s_n)] {
                if lam < 0.25 {
                    ensure(lam * lam / 6.0 <= sub + 1e-9 && sub <= lam * lam + 1e-9, || {
                        format!("{tag}: sandwich fails, lambda {lam:e}, S {sub:e}")
                    })?;
                }
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} stage attempts, 0 violations, max lambda_n(x_m) {max_lambda:.4}"
    ))
}

fn criterion_7() -> Verdict {
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    for run in seed_runs() {
        let s = run.seed;
        run.outcome.as_ref().map_err(|e| format!("seed {s}: {e}"))?;
        for st in run.stages.iter().filter(|st| st.accepted) {
            let v_m = 1.0 / st.m as f64;
            let view_m = RiskView::new(&run.data, st.m, risk()).unwrap();
            if stage_subopt(&view_m, &st.x_m, &oracle(&run.data, st.m)).unwrap() > v_m {
                skipped += 1;
                continue;
            }
            let view_n = RiskView::new(&run.data, st.n, risk()).unwrap();
            let s_n = stage_subopt(&view_n, &st.x_m, &oracle(&run.data, st.n)).unwrap();
            let bound = k_constant(C, run.xstar_norm, st.n as f64 / st.m as f64) * v_m;
            worst = worst.max(s_n / bound);
            ensure(s_n <= bound, || {
                format!("seed {s} stage {}->{}: S_n(x_m) = {s_n:e} above {bound:e}", st.m, st.n)
            })?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "no stage met the premise".into())?;
    Ok(format!(
        "{checked} stages checked ({skipped} without premise), max S/(K V_m) {worst:.3e}"
    ))
}

fn criterion_8() -> Verdict {
    let m = 0.25;
    let mut worst = 0.0f64;
    for i in 0..=400 {
        let c = 10f64.powf(-1.0 + i as f64 * 0.01);
        let lhs = simplified_lhs1(2.0, m, c);
        let rel = (lhs - 2.0 / c.sqrt()).abs() / (2.0 / c.sqrt());
        worst = worst.max(rel);
        ensure(rel <= 4.0 * f64::EPSILON, || {
            format!("c={c}: {lhs} vs {}", 2.0 / c.sqrt())
        })?;
        ensure((lhs < 0.25) == (c > 64.0) || c == 64.0, || {
            format!("c={c}: wrong side of 1/4")
        })?;
    }
    let at = simplified_lhs1(2.0, m, 64.0);
    ensure(at == 0.25, || format!("LHS at c=64 is {at:e}"))?;
    let threshold = suggested_c_threshold(m);
    ensure(threshold == 64.0, || format!("threshold {threshold}"))?;
    let formula = 16.0 * (2.0 * m.sqrt() + 1.0).powi(2);
    ensure(formula == 64.0, || format!("16(2sqrt(M)+1)^2 = {formula}"))?;
    Ok(format!(
        "LHS(64) = {at}, threshold = {threshold}, max relative deviation from 2/sqrt(c) {worst:e}"
    ))
}

const C9_RHO0: f64 = 0.05;

fn criterion_9() -> Verdict {
    let mut worst = (1.0f64, String::new());
    let mut failures = Vec::new();
    for &seed in &SEEDS {
        let data = synthetic_default(seed);
        let cfg = SolverConfig {
            m0: 128,
            alpha0: 2.0,
            rho0: C9_RHO0,
            ..Default::default()
        };
        let a = solver::run(&data, &risk(), &cfg).map_err(|e| e.to_string())?;
        let b = adanewton_run(&data, &risk(), &cfg).map_err(|e| e.to_string())?;
        ensure(a.trace().len() == b.trace().len(), || {
            format!("seed {seed}: {} vs {} attempts", a.trace().len(), b.trace().len())
        })?;
        for ((rec, xa), (rb, xb)) in a.trace().iter().zip(&a.iterates).zip(b.trace().iter().zip(&b.iterates)) {
            ensure(rec.n == rb.n, || format!("seed {seed}: prefix {} vs {}", rec.n, rb.n))?;
            let view = RiskView::new(&data, rec.n, risk()).unwrap();
            let xs = oracle(&data, rec.n);
            let sa = stage_subopt(&view, xa, &xs).unwrap();
            let sb = stage_subopt(&view, xb, &xs).unwrap();
            let ratio = if sa == sb { 1.0 } else { sa / sb };
            let tag = format!("seed {seed} n={}: ratio {ratio:.3}", rec.n);
            if (ratio.max(1.0 / ratio)) > worst.0 {
                worst = (ratio.max(1.0 / ratio), tag.clone());
            }
            if !(0.5..=2.0).contains(&ratio) {
                failures.push(tag);
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("rho0 = {C9_RHO0}, all ratios in [0.5, 2], worst {}", worst.1))
    } else {
        Err(format!(
            "rho0 = {C9_RHO0}, {} stages outside [0.5, 2]: {}",
            failures.len(),
            failures.join(", ")
        ))
    }
}

fn criterion_10() -> Verdict {
    let mut attempts = 0;
    let mut backtracks = 0;
    for (seed, c, alpha0, rho0) in [(1u64, C, 2.0, 0.05), (9, 1.0, 32.0, 0.8), (3, 0.5, 8.0, 0.5)] {
        let data = synthesize(&SyntheticSpec {
            n_samples: 4096,
            dim: 20,
            seed,
            ..Default::default()
        })
        .unwrap()
        .0;
        let risk = RiskConfig {
            c,
            ..Default::default()
        };
        let out = solver::run(
            &data,
            &risk,
            &SolverConfig {
                m0: 64,
                alpha0,
                rho0,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let mut cum = 0u64;
        for r in out.trace() {
            cum += r.n as u64;
            ensure(r.samples_cum == cum, || {
                format!("seed {seed}: samples_cum {} vs {cum}", r.samples_cum)
            })?;
        }
        ensure(out.state.samples_cum == cum, || {
            format!("seed {seed}: final {} vs {cum}", out.state.samples_cum)
        })?;
        attempts += out.trace().len();
        backtracks += out.backtracks();
    }
    ensure(backtracks > 0, || "audit never exercised a failed attempt".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let data = toy(&mut rng, 500, 8);
    for method in [Method::Sgd, Method::Saga] {
        let meter = WorkMeter::new();
        let view = RiskView::new(&data, 500, RiskConfig::default())
            .unwrap()
            .with_meter(&meter);
        let cfg = BaselineConfig {
            method,
            step_size: 0.05,
            iterations: 1234,
            seed: 4,
            log_every: 100,
            budget_ms: None,
        };
        let out = match method {
            Method::Sgd => sgd_run(&view, &cfg, DVector::zeros(8)),
            _ => saga_run(&view, &cfg, DVector::zeros(8)),
        }
        .map_err(|e| e.to_string())?;
        for r in &out.trace {
            ensure(
                r.samples_cum == r.stage as u64 && r.grad_evals_cum == r.stage as u64,
                || {
                    format!(
                        "{}: iteration {} logged {} samples",
                        method.name(),
                        r.stage,
                        r.samples_cum
                    )
                },
            )?;
        }
        ensure(meter.processed() == 1234 && meter.evaluated() == 1234, || {
            format!("{}: meter {} / {}", method.name(), meter.processed(), meter.evaluated())
        })?;
    }
    Ok(format!(
        "{attempts} k-TAN attempts ({backtracks} backtracks) and 2 first-order traces audited exactly"
    ))
}

fn drop_wall_ms(csv: &str) -> std::result::Result<Vec<String>, String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or("empty trace")?.split(',').collect();
    let col = header.iter().position(|h| *h == "wall_ms").ok_or("no wall_ms column")?;
    Ok(csv
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect())
}

fn criterion_11() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut traces = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_ktan"))
            .args([
                "solve",
                "--data",
                "synth:n=8192,p=200,decay=geo:0.5,seed=7",
                "--c",
                "64",
                "--m0",
                "128",
            ])
            .args(["--deterministic", "--out"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("run {i} exited with {}", status.status)
        })?;
        traces.push(std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
    }
    let a = drop_wall_ms(&traces[0])?;
    let b = drop_wall_ms(&traces[1])?;
    ensure(a.len() > 1, || "trace has no rows".into())?;
    ensure(a == b, || "traces differ outside wall_ms".into())?;
    Ok(format!("two runs, {} identical rows", a.len() - 1))
}

fn random_sparse(rng: &mut ChaCha8Rng) -> Dataset {
    let p = rng.random_range(1..=40);
    let n = rng.random_range(1..=30);
    let samples = (0..n)
        .map(|_| {
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for j in 0..p {
                if rng.random_bool(0.3) {
                    indices.push(j as u32);
                    let v: f64 = rng.sample::<f64, _>(StandardNormal) * 10f64.powi(rng.random_range(-300..300));
                    values.push(v);
                }
            }
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Sample { indices, values, label }
        })
        .collect();
    Dataset::new(samples, p).unwrap()
}

fn criterion_12() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let data = random_sparse(&mut rng);
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).map_err(|e| e.to_string())?;
        let back = parse_libsvm(buf.as_slice(), Some(data.dim())).map_err(|e| e.to_string())?;
        if back.to_samples() != data.to_samples() || back.dim() != data.dim() {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} round-trip mismatches"))?;
    let cases = [
        ("+1 1:0.5\n-1 2:0 1:3\n", 2, "non-increasing index"),
        ("+1 1:0.5\n\n-1 1:x\n", 3, "non-numeric value"),
        ("# c\n2 1:1\n", 2, "bad label"),
        ("+1 0:1\n", 1, "index 0"),
    ];
    for (text, line, what) in cases {
        match parse_libsvm(text.as_bytes(), None) {
            Err(Error::Parse { line: got, .. }) if got == line => {}
            other => return Err(format!("{what}: expected parse error at line {line}, got {other:?}")),
        }
    }
    Ok("1000 datasets round-trip exactly; malformed lines report their line number".into())
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(detail) => println!("criterion {id:>2}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2}: FAIL  {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
