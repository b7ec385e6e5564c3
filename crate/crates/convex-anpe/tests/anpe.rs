use std::sync::Arc;

use convex_anpe::*;
use oracle_core::linalg::{dist, norm};
use oracle_core::rng::{gaussian_vector, random_unit_vector, seeded_rng};
use oracle_core::*;

fn quartic_instance(d: usize, c: f64) -> (QuarticQuadratic, Vec<f64>) {
    let diag: Vec<f64> = (0..d).map(|i| if i < d / 2 { 1.0 / (i + 1) as f64 } else { 0.0 }).collect();
    let x0: Vec<f64> = random_unit_vector(&mut seeded_rng(3), d).iter().map(|v| 2.0 * v).collect();
    // Sublevel set {f <= f(x0)} lies in the ball where (c/4) r^4 <= f(x0).
    let mut f = QuarticQuadratic::new(c, diag, 1.0);
    let radius = (4.0 * f.value(&x0) / c).powf(0.25);
    f.h = 6.0 * c * radius;
    (f, x0)
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln() / n, b + y.ln() / n));
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    num / den
}

#[test]
fn soe_gradient_examples() {
    let ledger = OracleLedger::new();
    let f = QuarticQuadratic::new(1.0, vec![0.0, 0.0], 2.0);
    let o = CountingOracle::new(&f, &ledger);
    let g = soe_gradient(&o, &[1.0, 0.0], None, &[1.1, 0.0]).unwrap();
    assert!(dist(&g, &[1.3, 0.0]) < 1e-14);
    assert_eq!((ledger.grad_calls(), ledger.hvp_calls()), (1, 1));
    let at_center = soe_gradient(&o, &[1.0, 0.0], None, &[1.0, 0.0]).unwrap();
    assert!(dist(&at_center, &f.grad(&[1.0, 0.0])) < 1e-15);
}

#[test]
fn soe_is_exact_for_quadratics() {
    let a = DenseMatrix::from_diag(&[2.0, 1.0, 0.5]);
    let q = QuadraticOracle::new(QuadraticProblem::from_dense(a, vec![1.0, -1.0, 0.0]).unwrap());
    let ledger = OracleLedger::new();
    let o = CountingOracle::new(&q, &ledger);
    let y = [0.3, -2.0, 5.0];
    let g = soe_gradient(&o, &[1.0, 1.0, 1.0], None, &y).unwrap();
    assert!(dist(&g, &q.grad(&y)) < 1e-14);
}

#[test]
fn subproblem_on_quadratic_matches_dense() {
    let d = 20;
    let eigs: Vec<f64> = (0..d).map(|i| 0.1 + i as f64).collect();
    let a = DenseMatrix::from_diag(&eigs);
    let b = gaussian_vector(&mut seeded_rng(1), d);
    let q: Arc<dyn SecondOrderOracle> = Arc::new(QuadraticOracle::new(QuadraticProblem::from_dense(a.clone(), b.clone()).unwrap()));
    let center = gaussian_vector(&mut seeded_rng(2), d);
    for gamma in [0.01, 1.0, 100.0] {
        let ledger = OracleLedger::new();
        let g = q.grad(&center);
        let eps_a = 1e-14;
        let y = anpe_subproblem(&q, &center, &g, gamma, eps_a, &ledger, None, 0).unwrap();
        // (A + I/gamma) y = x~/gamma - b
        let mut m = a.clone();
        m.add_identity(1.0 / gamma);
        let rhs: Vec<f64> = center.iter().zip(&b).map(|(c, bi)| bi - c / gamma).collect();
        let expect = direct_solve(&m, &rhs).unwrap();
        assert!(dist(&y, &expect) <= (2.0 * eps_a * gamma).sqrt() * 1.01, "gamma {gamma}");
    }
}

#[test]
fn subproblem_quartic_local_model() {
    let f: Arc<dyn SecondOrderOracle> = Arc::new(QuarticQuadratic::new(1.0, vec![0.0, 0.0], 2.0));
    let center = [1.0, 0.0];
    let g = f.grad(&center);
    let y = anpe_subproblem(&f, &center, &g, 1.0, 1e-16, &OracleLedger::new(), None, 0).unwrap();
    // (diag(3,1) + I)(y - x~) = -(1, 0)
    assert!(dist(&y, &[0.75, 0.0]) < 1e-7);
}

#[test]
fn small_gamma_barely_moves() {
    let f: Arc<dyn SecondOrderOracle> = Arc::new(QuarticQuadratic::new(1.0, vec![1.0; 4], 2.0));
    let center = [1.0, -0.5, 0.2, 0.0];
    let g = f.grad(&center);
    let gamma = 1e-4;
    let y = anpe_subproblem(&f, &center, &g, gamma, 1e-20, &OracleLedger::new(), None, 0).unwrap();
    assert!(dist(&y, &center) <= gamma * norm(&g) * 1.001);
}

#[test]
fn search_accepts_window_and_honours_start() {
    let d = 10;
    let q = QuadraticOracle::new(
        QuadraticProblem::from_dense(DenseMatrix::from_diag(&vec![1.0; d]), vec![-1.0; d]).unwrap(),
    )
    .with_hessian_lipschitz(1.0);
    let oracle: Arc<dyn SecondOrderOracle> = Arc::new(q);
    let cfg = AnpeConfig::new(1.0, 1e-8);
    let x0 = vec![0.0; d];
    let state = AnpeState::new(&x0, 1e-3);
    let out = c_binary_search(&oracle, &state, &cfg, &OracleLedger::new()).unwrap();
    assert!(out.window_value >= cfg.window_low() && out.window_value <= cfg.window_high());
    // Closed-form prox path: ||y(gamma) - x0|| = gamma sqrt(d) / (1 + gamma).
    let expect = out.gamma * out.gamma * (d as f64).sqrt() / (1.0 + out.gamma);
    assert!((out.window_value - expect).abs() <= 1e-6 * expect);

    let again = c_binary_search(&oracle, &AnpeState::new(&x0, out.gamma), &cfg, &OracleLedger::new()).unwrap();
    assert_eq!(again.gamma, out.gamma);
    assert_eq!(again.probes, 1);
}

#[test]
fn search_with_overestimated_h() {
    let d = 10;
    let make = |h: f64| -> Arc<dyn SecondOrderOracle> {
        Arc::new(
            QuadraticOracle::new(QuadraticProblem::from_dense(DenseMatrix::identity(d), vec![-1.0; d]).unwrap())
                .with_hessian_lipschitz(h),
        )
    };
    let x0 = vec![0.0; d];
    let state = AnpeState::new(&x0, 1e-3);
    let base = c_binary_search(&make(1.0), &state, &AnpeConfig::new(1.0, 1e-8), &OracleLedger::new()).unwrap();
    let over = c_binary_search(&make(10.0), &state, &AnpeConfig::new(10.0, 1e-8), &OracleLedger::new()).unwrap();
    let cfg = AnpeConfig::new(10.0, 1e-8);
    assert!(over.window_value >= cfg.window_low() && over.window_value <= cfg.window_high());
    assert!(over.probes <= base.probes + 10f64.log2().ceil() as usize + 3);
}

#[test]
fn quartic_plus_quadratic_converges_to_origin() {
    let f = QuarticQuadratic {
        c: 1.0 / 3.0,
        diag: vec![1.0; 5],
        h: 12.0,
    };
    let mut x0 = vec![0.0; 5];
    x0[0] = 2.0;
    let oracle: Arc<dyn SecondOrderOracle> = Arc::new(f);
    let mut cfg = AnpeConfig::new(12.0, 1e-10);
    cfg.diameter = Some(2.0);
    let out = anpe_solve(&oracle, &x0, &cfg, &OracleLedger::new()).unwrap();
    assert!(out.report.objective <= 1e-10);
    assert!(norm(&out.report.x_hat) <= 1e-4);
}

#[test]
fn run_invariants_on_quartic() {
    let (f, x0) = quartic_instance(50, 1.0);
    let d_true = norm(&x0);
    let h = f.h;
    let oracle: Arc<dyn SecondOrderOracle> = Arc::new(f);
    let mut cfg = AnpeConfig::new(h, 1e-30);
    cfg.diameter = Some(d_true);
    cfg.max_iters = 40;
    let ledger = OracleLedger::new();
    let out = anpe_solve(&oracle, &x0, &cfg, &ledger).unwrap();
    let gamma0 = cfg.gamma_from_diameter(d_true);
    let mut prev_a = 0.0;
    let mut points = Vec::new();
    for it in &out.iterates {
        let k = it.k as f64;
        assert!(it.a_sum >= (2.0f64 / 3.0).powf(3.5) * gamma0 * k.powf(3.5), "growth at k={}", it.k);
        assert!(it.a_sum >= prev_a);
        assert!((it.a * it.a - it.gamma * it.a_sum).abs() <= 1e-10 * it.a * it.a);
        assert!(it.window_value >= cfg.window_low() && it.window_value <= cfg.window_high());
        assert!(it.inexactness <= cfg.sigma, "k={} inexactness {}", it.k, it.inexactness);
        let envelope = 3f64.powf(3.5) / 2f64.sqrt() * h * d_true.powi(3)
            / (cfg.sigma_l * (1.0 - cfg.sigma * cfg.sigma).sqrt())
            / k.powf(3.5);
        assert!(it.f_y <= envelope, "rate bound at k={}", it.k);
        if (5..=40).contains(&it.k) && it.f_y > 0.0 {
            points.push((k, it.f_y));
        }
        prev_a = it.a_sum;
    }
    assert!(points.len() >= 5);
    assert!(log_log_slope(&points) <= -3.0, "slope {}", log_log_slope(&points));
}

#[test]
fn unknown_diameter_is_tracked() {
    let (f, x0) = quartic_instance(20, 1.0);
    let h = f.h;
    let oracle: Arc<dyn SecondOrderOracle> = Arc::new(f);
    let cfg = AnpeConfig::new(h, 1e-8);
    let out = anpe_solve(&oracle, &x0, &cfg, &OracleLedger::new()).unwrap();
    assert!(out.report.objective <= 1e-8);
    assert!(out.diameter >= 2.0 * dist(&x0, &out.report.x_hat) * 0.99);
}
