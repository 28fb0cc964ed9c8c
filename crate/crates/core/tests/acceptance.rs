//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (bypassing libtest capture) and then asserts the same condition.

use std::io::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sksd::baselines::{ks_statistic, lilliefors_statistic, w1_statistic};
use sksd::bootstrap::{neyman_sksd_test_with, sksd_test, BootstrapOptions};
use sksd::estimators::nelder_mead::{minimize, NelderMeadOptions};
use sksd::estimators::{min_ksd_closed_form, min_ksd_numeric, score_matching_closed_form, EstimatorKind};
use sksd::harness::{run_power_experiment, ExperimentConfig, ExperimentResult};
use sksd::kernels::kernel_eval;
use sksd::models::{ConditionalGaussian, EdgePattern, EdgeSet, Gaussian, GaussianLocation, KernelExpFamily};
use sksd::samplers::ChainConfig;
use sksd::special::{ks_uniformity_test, normal_cdf};
use sksd::stein::{stein_kernel_h, v_statistic, v_statistic_linear_fast};
use sksd::{EstimatorSpec, KernelChoice, KernelSpec, ModelFamily, ParamBox, SampleBatch};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("[acceptance {id:>2}] {} | {name} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn check(id: u32, name: &str, pass: bool, detail: String) {
    report(id, name, pass, &detail);
    assert!(pass, "{name}: {detail}");
}

fn experiment(json: &str) -> ExperimentResult {
    let cfg = ExperimentConfig::from_json(json).expect("valid config");
    run_power_experiment(&cfg, None).expect("experiment runs")
}

fn rates(res: &ExperimentResult) -> Vec<(f64, f64, f64, usize)> {
    res.aggregate.iter().map(|a| (a.sweep_value, a.rejection_rate, a.se, a.completed)).collect()
}

#[test]
fn c01_type_one_error() {
    let res = experiment(
        r#"{"name":"c01","dgp":{"dist":{"kind":"gaussian_shift","mu":0},"n":100},
            "sweep":{"param":"dgp.dist.mu","values":[0]},
            "test":{"test":"sksd","model":{"kind":"gaussian"},"estimator":{"kind":"mle_gaussian"},"B":200,"alpha":0.05},
            "replications":500,"seed":101}"#,
    );
    let (_, rate, se, done) = rates(&res)[0];
    check(
        1,
        "type-I error, Gaussian null, n=100, B=200, R=500",
        done == 500 && (0.02..=0.08).contains(&rate),
        format!("rejection rate {rate:.4} (se {se:.4}, {done} completed), target [0.02, 0.08]"),
    );
}

#[test]
fn c02_normality_power() {
    let res = experiment(
        r#"{"name":"c02","dgp":{"dist":{"kind":"student_t_shifted","nu":3},"n":100},
            "sweep":{"param":"dgp.dist.nu","values":[3]},
            "test":{"test":"sksd","model":{"kind":"gaussian"},"estimator":{"kind":"mle_gaussian"},"B":200,"alpha":0.05},
            "replications":200,"seed":202}"#,
    );
    let (_, rate, se, done) = rates(&res)[0];
    check(
        2,
        "power against Student-t(3), n=100, R=200",
        done == 200 && rate >= 0.5,
        format!("rejection rate {rate:.4} (se {se:.4}), target >= 0.5"),
    );
}

#[test]
fn c03_kef_power() {
    let res = experiment(
        r#"{"name":"c03","dgp":{"dist":{"kind":"model_family","model":{"kind":"kef","rank":2},"theta":[10,-3]},"n":200},
            "sweep":{"param":"dgp.dist.theta.1","values":[-3,0]},
            "test":{"test":"sksd","model":{"kind":"kef","rank":1},
                    "estimator":{"kind":"min_ksd_closed","kernel":{"kind":"gaussian"}},"B":200,"alpha":0.05},
            "replications":100,"seed":303}"#,
    );
    let r = rates(&res);
    let (alt, null) = (r[0], r[1]);
    check(
        3,
        "KEF rank-1 null, n=200, min-KSD, R=100, B=200",
        alt.3 == 100 && null.3 == 100 && alt.1 >= 0.8 && (0.01..=0.11).contains(&null.1),
        format!(
            "theta2=-3: rate {:.3} (target >= 0.8); theta2=0: rate {:.3} (target [0.01, 0.11]); failures {}",
            alt.1,
            null.1,
            res.failures.len()
        ),
    );
}

#[test]
fn c04_conditional_gaussian_monotonicity() {
    let res = experiment(
        r#"{"name":"c04",
            "dgp":{"dist":{"kind":"conditional_gaussian_ring","dim":8,
                           "weights":{"low":2,"high":6,"seed":44},"epsilon":0},"n":500},
            "sweep":{"param":"dgp.dist.epsilon","values":[0,0.75,1.5]},
            "test":{"test":"sksd","model":{"kind":"conditional_gaussian","dim":8,"gamma1":2,"gamma2":-0.5},
                    "estimator":{"kind":"score_matching_closed"},"B":200,"alpha":0.05},
            "replications":100,"seed":404}"#,
    );
    let r = rates(&res);
    let monotone = r.windows(2).all(|w| w[1].1 >= w[0].1 - 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let all_done = r.iter().all(|x| x.3 == 100);
    check(
        4,
        "conditional Gaussian ring d=8, n=500, R=100, power in epsilon",
        all_done && monotone && r[0].1 <= 0.10,
        format!(
            "rates {:?} (monotone up to 2 SE: {monotone}; null rate target <= 0.10)",
            r.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn c05_linear_fast_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let d = 1 + inst % 4;
        let n = 20 + rng.random_range(0..200);
        let family = GaussianLocation::new(d).unwrap();
        let theta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = family.sample(&vec![0.5; d], n, inst as u64).unwrap();
        let fast = v_statistic_linear_fast(&family, &theta, &x).unwrap().value;
        let slow = v_statistic(&family, &theta, &KernelSpec::Linear, &x).unwrap().value;
        worst = worst.max((fast - slow).abs() / slow.abs().max(1e-300));
    }
    let family = GaussianLocation::new(2).unwrap();
    let x = family.sample(&[0.0, 0.0], 5000, 9).unwrap();
    let theta = [0.1, -0.2];
    let t0 = Instant::now();
    let fast = v_statistic_linear_fast(&family, &theta, &x).unwrap().value;
    let t_fast = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let slow = v_statistic(&family, &theta, &KernelSpec::Linear, &x).unwrap().value;
    let t_slow = t1.elapsed().as_secs_f64();
    let ratio = t_fast / t_slow;
    let big_rel = (fast - slow).abs() / slow.abs();
    check(
        5,
        "linear-kernel O(n) path equals the O(n^2) path",
        worst <= 1e-10 && big_rel <= 1e-10 && ratio <= 0.2,
        format!("max relative error {worst:.2e} over 50 instances; n=5000 d=2 time ratio {ratio:.2e} (target <= 0.2)"),
    );
}

/// Stein operator composition by nested central differences:
/// `ξ_a(x, y) = s_a(y) k(x, y) + ∂_{y_a} k(x, y)`, `h = Σ_a ∂_{x_a} ξ_a + s(x)·ξ`.
fn h_by_differences(f: &dyn ModelFamily, theta: &[f64], spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    let step = 1e-3;
    let d = x.len();
    let k = |a: &[f64], b: &[f64]| kernel_eval(spec, a, b).unwrap();
    let xi = |xv: &[f64], a: usize| {
        let sy = f.score(theta, y).unwrap();
        let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
        yp[a] += step;
        ym[a] -= step;
        sy[a] * k(xv, y) + (k(xv, &yp) - k(xv, &ym)) / (2.0 * step)
    };
    let sx = f.score(theta, x).unwrap();
    (0..d)
        .map(|a| {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[a] += step;
            xm[a] -= step;
            (xi(&xp, a) - xi(&xm, a)) / (2.0 * step) + sx[a] * xi(x, a)
        })
        .sum()
}

#[test]
fn c06_stein_identity() {
    let theta = [0.4, 1.3];
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let draws = Gaussian.sample(&theta, 100_000, 606).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let mut worst_z = 0.0f64;
    for _ in 0..10 {
        let y = [rng.random_range(-2.0..3.0)];
        let vals: Vec<f64> = draws.rows().map(|x| stein_kernel_h(&Gaussian, &theta, &spec, x, &y).unwrap()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        worst_z = worst_z.max(mean.abs() / (sd / n.sqrt()));
    }

    let ring = ConditionalGaussian::new(3, &EdgeSet::Named(EdgePattern::Ring), vec![2.0; 3], vec![-0.5; 3], ChainConfig::default()).unwrap();
    let kef = KernelExpFamily::standard(3).unwrap();
    let cases: [(&dyn ModelFamily, Vec<f64>, KernelSpec); 4] = [
        (&Gaussian, vec![0.4, 1.3], KernelSpec::gaussian(0.8).unwrap()),
        (&ring, vec![-1.0, -0.5, -2.0], KernelSpec::gaussian(1.5).unwrap()),
        (&kef, vec![2.0, -1.0, 0.5], KernelSpec::gaussian(1.2).unwrap()),
        (&ring, vec![-1.0, -0.5, -2.0], KernelSpec::Linear),
    ];
    let mut worst_fd = 0.0f64;
    for i in 0..50 {
        let (f, theta, spec) = &cases[i % cases.len()];
        let d = f.data_dim();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let exact = stein_kernel_h(*f, theta, spec, &x, &y).unwrap();
        let fd = h_by_differences(*f, theta, spec, &x, &y);
        worst_fd = worst_fd.max((exact - fd).abs() / exact.abs().max(1.0));
    }
    check(
        6,
        "Stein identity and finite-difference operator oracle",
        worst_z <= 3.0 && worst_fd <= 1e-4,
        format!("max |mean|/SE over 10 anchors {worst_z:.3} (target <= 3); max finite-difference error {worst_fd:.2e} over 50 points (target <= 1e-4)"),
    );
}

/// Implicit score-matching objective `(1/n) Σ [½‖s_θ(x)‖² + ∇ₓ·s_θ(x)]`,
/// the divergence by a five-point stencil (exact for quintic scores).
fn sm_objective(f: &dyn ModelFamily, x: &SampleBatch, theta: &[f64]) -> f64 {
    let step = 1e-2;
    let score = |p: &[f64]| f.score(theta, p).ok();
    let mut total = 0.0;
    for r in x.rows() {
        let Some(s) = score(r) else { return f64::INFINITY };
        let mut div = 0.0;
        for a in 0..r.len() {
            let at = |k: f64| {
                let mut p = r.to_vec();
                p[a] += k * step;
                score(&p).map(|v| v[a])
            };
            let (Some(m2), Some(m1), Some(p1), Some(p2)) = (at(-2.0), at(-1.0), at(1.0), at(2.0)) else {
                return f64::INFINITY;
            };
            div += (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * step);
        }
        total += 0.5 * s.iter().map(|v| v * v).sum::<f64>() + div;
    }
    total / x.n() as f64
}

#[test]
fn c07_estimator_equivalence() {
    let ring = ConditionalGaussian::new(
        3,
        &EdgeSet::Named(EdgePattern::Ring),
        vec![2.0; 3],
        vec![-0.5; 3],
        ChainConfig { burn_in: 1000, thin: 5, ..ChainConfig::default() },
    )
    .unwrap();
    let loc = GaussianLocation::new(2).unwrap();
    let kef = KernelExpFamily::standard(2).unwrap();
    let cases: Vec<(&dyn ModelFamily, SampleBatch, Vec<f64>)> = vec![
        (&loc, loc.sample(&[0.5, -1.0], 150, 701).unwrap(), vec![0.0, 0.0]),
        (&ring, ring.sample(&[-1.0, -0.5, -2.0], 150, 702).unwrap(), vec![-0.8, -0.8, -0.8]),
        (&kef, kef.sample(&[2.0, -1.0], 150, 703).unwrap(), vec![0.0, 0.0]),
    ];
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let nm = NelderMeadOptions { max_iter: 50_000, tolerance: 1e-13, initial_step: 0.2, restarts: 4 };
    let (mut worst_ksd, mut worst_sm) = (0.0f64, 0.0f64);
    for (f, x, start) in &cases {
        let closed = min_ksd_closed_form(*f, &spec, x).unwrap();
        let numeric = min_ksd_numeric(*f, &spec, x, Some(start), &nm).unwrap();
        for (a, b) in closed.iter().zip(&numeric.theta) {
            worst_ksd = worst_ksd.max((a - b).abs());
        }
        let sm = score_matching_closed_form(*f, x).unwrap();
        let m = minimize(|t| sm_objective(*f, x, t), start, &nm);
        for (a, b) in sm.iter().zip(&m.x) {
            worst_sm = worst_sm.max((a - b).abs());
        }
    }
    let one = GaussianLocation::new(1).unwrap();
    let x = SampleBatch::from_scalars(&[1.0, 2.0]).unwrap();
    let ksd = min_ksd_closed_form(&one, &KernelSpec::Linear, &x).unwrap()[0];
    let sm = score_matching_closed_form(&one, &x).unwrap()[0];
    let worked = (ksd - 1.0).abs() <= 1e-12 && (sm - 1.5).abs() <= 1e-12;
    check(
        7,
        "closed-form estimators match numeric minimization",
        worst_ksd <= 1e-4 && worst_sm <= 1e-6 && worked,
        format!("min-KSD max coordinate gap {worst_ksd:.2e} (<= 1e-4); SM gap {worst_sm:.2e} (<= 1e-6); location example on {{1,2}}: KSD {ksd}, SM {sm}"),
    );
}

#[test]
fn c08_p_value_uniformity() {
    let est = EstimatorSpec::new(EstimatorKind::MleGaussian);
    let p: Vec<f64> = (0..300u64)
        .map(|r| {
            let x = Gaussian.sample(&[0.0, 1.0], 100, 80_000 + r).unwrap();
            sksd_test(&Gaussian, &est, &KernelChoice::default(), &x, &BootstrapOptions::new(200, 0.05, 81_000 + r))
                .unwrap()
                .p_value
        })
        .collect();
    let (d, pv) = ks_uniformity_test(&p);
    check(
        8,
        "bootstrap p-values are uniform under the null (300 replicates)",
        pv > 0.01,
        format!("KS distance {d:.4}, uniformity p-value {pv:.4} (target > 0.01)"),
    );
}

/// `N(0, 1)` carrying a parameter the score ignores.
#[derive(Debug)]
struct Inert;

impl ModelFamily for Inert {
    fn name(&self) -> &str {
        "inert"
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn data_dim(&self) -> usize {
        1
    }
    fn param_box(&self) -> ParamBox {
        ParamBox::unbounded(1)
    }
    fn validate_params(&self, _: &[f64]) -> sksd::Result<()> {
        Ok(())
    }
    fn score_into(&self, _: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = -x[0];
    }
    fn param_score_jacobian(&self, _: &[f64], _: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }
    fn score_divergence_param_grad(&self, _: &[f64], _: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
    fn sample(&self, _: &[f64], n: usize, seed: u64) -> sksd::Result<SampleBatch> {
        Gaussian.sample(&[0.0, 1.0], n, seed)
    }
}

#[test]
fn c09_neyman_reduction_and_calibration() {
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let mean = |_: &dyn ModelFamily, x: &SampleBatch| -> sksd::Result<Vec<f64>> { Ok(vec![x.as_flat().iter().sum::<f64>() / x.n() as f64]) };
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let x = Inert.sample(&[0.0], 80, 900 + seed).unwrap();
        let r = neyman_sksd_test_with(&Inert, &mean, &spec, &x, None, &BootstrapOptions::new(50, 0.05, seed)).unwrap();
        let plain = v_statistic(&Inert, &r.theta_hat, &spec, &x).unwrap().value;
        worst = worst.max((r.statistic - plain).abs() / plain.abs());
    }

    let res = experiment(
        r#"{"name":"c09","dgp":{"dist":{"kind":"gaussian_shift","mu":0},"n":100},
            "sweep":{"param":"dgp.dist.mu","values":[0]},
            "test":{"test":"neyman-sksd","model":{"kind":"gaussian"},"estimator":{"kind":"mle_gaussian"},"B":200,"alpha":0.05},
            "replications":200,"seed":909}"#,
    );
    let (_, rate, se, done) = rates(&res)[0];
    check(
        9,
        "Neyman reduction and wild-bootstrap calibration",
        worst <= 1e-10 && done == 200 && (0.01..=0.10).contains(&rate),
        format!("zero-Jacobian relative gap {worst:.2e}; null rejection rate {rate:.4} (se {se:.4}), target [0.01, 0.10]"),
    );
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn ks_grid(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = xs.len() as f64;
    let ecdf = |t: f64, strict: bool| xs.iter().filter(|&&x| if strict { x < t } else { x <= t }).count() as f64 / n;
    let points = (0..=10_000).map(|k| -6.0 + 12.0 * k as f64 / 10_000.0).chain(xs.iter().copied());
    points.fold(0.0f64, |best, t| {
        let f = cdf(t);
        best.max((ecdf(t, false) - f).abs()).max((ecdf(t, true) - f).abs())
    })
}

#[test]
fn c10_baseline_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut w1_worst = 0.0f64;
    for inst in 0..600 {
        let n = 1 + inst % 6;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let brute = permutations(n)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| (x[i] - y[j]).abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            / n as f64;
        w1_worst = w1_worst.max((w1_statistic(&x, &y).unwrap() - brute).abs());
    }
    let mut ks_worst = 0.0f64;
    for seed in 0..20 {
        let x = Gaussian.sample(&[0.3, 1.2], 2 + seed as usize, 1100 + seed).unwrap();
        ks_worst = ks_worst.max((ks_statistic(x.as_flat(), normal_cdf).unwrap() - ks_grid(x.as_flat(), normal_cdf)).abs());
    }
    let lf = lilliefors_statistic(&[-1.0, 1.0]).unwrap();
    let lf_ok = (lf - 0.260025).abs() <= 1e-5;
    check(
        10,
        "baseline statistics",
        w1_worst <= 1e-12 && ks_worst <= 1e-6 && lf_ok,
        format!(
            "W1 vs exhaustive assignment max gap {w1_worst:.1e} (600 instances, n <= 6); KS vs grid max gap {ks_worst:.1e}; \
             Lilliefors on {{-1,1}} = {lf:.6}, target 0.260025 +/- 1e-5 (gap {:.2e}; Phi(1/sqrt 2) - 1/2 = {:.6})",
            (lf - 0.260025).abs(),
            normal_cdf(std::f64::consts::FRAC_1_SQRT_2) - 0.5
        ),
    );
}
