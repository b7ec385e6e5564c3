use eigen_tools::{
    eigen_extract, eigen_extract_op, find_smallest_eigenvalue, find_smallest_eigenvalue_at,
    find_smallest_eigenvalue_quadratic, shift_invert_leading, smallest_eig_stage1, smallest_eig_stage2, EigFinderState,
    ExtractMode, ExtractorConfig, Stage1Outcome, StopCriterion,
};
use oracle_core::linalg::{dot, orthonormalize};
use oracle_core::rng::{gaussian_vector, seeded_rng, SeededRng};
use oracle_core::{
    dense_eigendecomposition, CountingOracle, DenseMatrix, DoubleWell, LowRankDeflation, OracleLedger,
    QuadraticProblem,
};
use rand::Rng;

fn planted(rng: &mut SeededRng, spectrum: &[f64]) -> DenseMatrix {
    let d = spectrum.len();
    let q = orthonormalize(&(0..d).map(|_| gaussian_vector(rng, d)).collect::<Vec<_>>());
    DenseMatrix::from_outer_products(d, spectrum, &q)
}

fn prefix(defl: &LowRankDeflation, k: usize) -> DenseMatrix {
    let mut p = LowRankDeflation::empty(defl.dim());
    for (a, v) in defl.coeffs().iter().zip(defl.vecs()).take(k) {
        p.push(*a, v.clone()).unwrap();
    }
    p.to_dense()
}

fn minus(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = a.clone();
    out.add_scaled(-1.0, b);
    out
}

#[test]
fn shift_invert_leakage_on_random_psd() {
    let mut rng = seeded_rng(21);
    let (delta, eps) = (0.5, 1e-4);
    let mut pass = 0;
    for t in 0..50 {
        let d = rng.gen_range(5..40);
        let spec: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0_f64).powi(3)).collect();
        let a = planted(&mut rng, &spec);
        let eig = dense_eigendecomposition(&a).unwrap();
        let out = shift_invert_leading(&a, delta, eps, 1e-10, t).unwrap();
        let l1 = eig.max();
        let leak: f64 = eig
            .values
            .iter()
            .zip(&eig.vectors)
            .filter(|(l, _)| **l <= (1.0 - delta) * l1)
            .map(|(_, u)| dot(u, &out.vector).powi(2))
            .sum();
        if out.rayleigh >= (1.0 - delta) * (1.0 - eps) * l1 && leak <= 2.0 * eps {
            pass += 1;
        }
    }
    assert_eq!(pass, 50);
}

#[test]
fn extractor_keeps_psd_and_reaches_level_on_random_instances() {
    let mut rng = seeded_rng(33);
    let eps = 1e-3;
    for t in 0..20 {
        let d = rng.gen_range(8..64);
        let spec: Vec<f64> = (1..=d).map(|i| 1.0 / i as f64 + 1e-3).collect();
        let a = planted(&mut rng, &spec);
        let lam_l = spec[d / 4];
        let p = QuadraticProblem::from_dense(a.clone(), vec![0.0; d]).unwrap();
        let mut cfg = ExtractorConfig::for_accuracy(eps, d);
        cfg.seed = t;
        let ledger = OracleLedger::new();
        let out = eigen_extract(&p, &cfg, ExtractMode::TargetLevel { lambda_l: lam_l }, &ledger).unwrap();
        let lam_min = dense_eigendecomposition(&a).unwrap().min();
        let r = out.deflation.rank();
        for k in 0..=r {
            let ak = dense_eigendecomposition(&minus(&a, &prefix(&out.deflation, k))).unwrap();
            assert!(ak.min() >= lam_min - k as f64 * cfg.eps0 - 1e-12, "step {k}");
        }
        let rest = dense_eigendecomposition(&minus(&a, &out.deflation.to_dense())).unwrap();
        assert!(rest.min() >= lam_min - eps);
        assert!(rest.spectral_norm() <= 8.0 * lam_l);
        let log = (d as f64 / eps).ln();
        assert!((ledger.grad_calls() as f64) <= 200.0 * r.max(1) as f64 * log * log);
    }
}

#[test]
fn potential_decays_while_above_the_ladder() {
    let mut rng = seeded_rng(8);
    let d = 40;
    let spec: Vec<f64> = (1..=d).map(|i| (i as f64).powf(-1.5)).collect();
    let a = planted(&mut rng, &spec);
    let lam_l = 0.01;
    let p = QuadraticProblem::from_dense(a.clone(), vec![0.0; d]).unwrap();
    let cfg = ExtractorConfig::for_accuracy(1e-4, d);
    let out = eigen_extract(&p, &cfg, ExtractMode::TargetLevel { lambda_l: lam_l }, &OracleLedger::new()).unwrap();
    let rho = 2.0 / ((1.0 - cfg.delta) * (1.0 - cfg.eps0));
    let potential = |vals: &[f64], level: f64| vals.iter().map(|l| (l - level).max(0.0)).sum::<f64>();
    let mut checked = 0;
    for k in 0..out.deflation.rank() {
        let before = dense_eigendecomposition(&minus(&a, &prefix(&out.deflation, k))).unwrap();
        let after = dense_eigendecomposition(&minus(&a, &prefix(&out.deflation, k + 1))).unwrap();
        for i in 1..6 {
            let level = lam_l * rho.powi(i - 1);
            if before.max() >= lam_l * rho.powi(i) {
                let drop = potential(&before.values, level) - potential(&after.values, level);
                assert!(drop >= level / 5.0 - 1e-12, "k={k} i={i} drop={drop}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn two_spike_example_in_adaptive_mode() {
    let mut diag = vec![0.01; 100];
    diag[0] = 10.0;
    diag[1] = 10.0;
    let a = DenseMatrix::from_diag(&diag);
    let mut cfg = ExtractorConfig::for_accuracy(1e-3, 100);
    cfg.mu_target = 0.01;
    let out = eigen_extract_op(&a, &cfg, ExtractMode::Adaptive).unwrap();
    // sqrt(a_k / mu) stays above k until the spikes are gone, so the rule fires near the bulk.
    assert!(out.has_fired(StopCriterion::RayleighBalance) || out.has_fired(StopCriterion::InverseSqrtMu));
    let rest = dense_eigendecomposition(&minus(&a, &out.deflation.to_dense())).unwrap();
    assert!(rest.min() >= 0.01 - 1e-3);
}

#[test]
fn power_law_adaptive_rule_fires_on_the_balance() {
    let d = 200;
    let spec: Vec<f64> = (1..=d).map(|i| 1.0 / i as f64).collect();
    let a = planted(&mut seeded_rng(4), &spec);
    let mut cfg = ExtractorConfig::for_accuracy(1e-4, d);
    cfg.mu_target = 1e-4;
    let out = eigen_extract_op(&a, &cfg, ExtractMode::Adaptive).unwrap();
    assert!(out.has_fired(StopCriterion::RayleighBalance));
    let k = out.steps as f64;
    // k ~ sqrt(a_k / mu) with a_k ~ 1/k gives k ~ mu^{-1/3} = 21.5.
    assert!((10.0..=60.0).contains(&k), "k = {k}");
}

#[test]
fn stage_one_examples() {
    let a = DenseMatrix::identity(8);
    let (out, _) = smallest_eig_stage1(&a, 1e-3, 3).unwrap();
    match out {
        Stage1Outcome::Estimate { lambda_hat } => assert!((lambda_hat - 1.0).abs() <= 1e-3),
        Stage1Outcome::Handoff(_) => panic!("PSD identity handed off"),
    }

    let d = 20;
    let lin: Vec<f64> = (0..d).map(|i| 1.0 - 1.9 * i as f64 / (d - 1) as f64).collect();
    let a = DenseMatrix::from_diag(&lin);
    let (out, state) = smallest_eig_stage1(&a, 1e-3, 4).unwrap();
    check_delta_ratios(&state);
    match out {
        Stage1Outcome::Estimate { lambda_hat } => assert!((lambda_hat + 0.9).abs() <= 1e-3),
        Stage1Outcome::Handoff(h) => {
            let m = minus(&DenseMatrix::identity(d).scaled_by(2.0 * h.a_s), &a_s_dense(&a, &h));
            assert!(dense_eigendecomposition(&m).unwrap().min() >= -1e-9);
            assert!(h.a_s <= 6.0 * 0.9 + 1e-9);
        }
    }
}

trait ScaledBy {
    fn scaled_by(self, s: f64) -> Self;
}

impl ScaledBy for DenseMatrix {
    fn scaled_by(mut self, s: f64) -> Self {
        self.scale(s);
        self
    }
}

fn a_s_dense(a: &DenseMatrix, h: &eigen_tools::Handoff) -> DenseMatrix {
    let mut out = a.clone();
    out.add_identity(h.delta_k - h.u);
    out.add_scaled(-1.0, &h.deflation.to_dense());
    out
}

fn check_delta_ratios(state: &EigFinderState) {
    assert!(state.delta_history.iter().all(|&d| d > 0.0));
    for w in state.delta_history.windows(2) {
        let r = w[1] / w[0];
        assert!((0.125..=8.0).contains(&r), "ratio {r}");
    }
}

#[test]
fn stage_two_examples() {
    let eps = 1e-2;
    // Sharp decay.
    let mut diag = vec![0.0; 30];
    for (i, v) in diag.iter_mut().enumerate() {
        *v = 2.0 * 0.5_f64.powi(i as i32);
    }
    let m = DenseMatrix::from_diag(&diag);
    let mut st = EigFinderState::default();
    let top = smallest_eig_stage2(&m, eps, 1, &mut st).unwrap();
    assert!((top - 2.0).abs() <= eps / 2.0);
    assert!(st.b_list.len() <= 3);

    // Flat.
    let m = DenseMatrix::identity(10).scaled_by(0.7);
    let mut st = EigFinderState::default();
    let top = smallest_eig_stage2(&m, eps, 2, &mut st).unwrap();
    assert!(top <= 0.7 + 1e-12 && top >= 0.7 - eps / 2.0);

    // Gap 0.1.
    let mut rng = seeded_rng(6);
    let mut spec = vec![1.0, 0.9];
    spec.extend((0..28).map(|_| rng.gen_range(0.0..0.9)));
    let m = planted(&mut rng, &spec);
    let mut st = EigFinderState::default();
    let top = smallest_eig_stage2(&m, eps, 3, &mut st).unwrap();
    assert!((top - 1.0).abs() <= eps / 2.0);
}

#[test]
fn finder_on_quadratics_and_hessians() {
    let a = DenseMatrix::from_diag(&[1.0, -0.3]);
    let p = QuadraticProblem::from_dense(a, vec![0.0; 2]).unwrap();
    let ledger = OracleLedger::new();
    let out = find_smallest_eigenvalue_quadratic(&p, 1e-3, &ledger, 1).unwrap();
    assert!((out.lambda_hat + 0.3).abs() <= 1e-3);
    assert!(ledger.grad_calls() > 0);

    let mut rng = seeded_rng(12);
    let spec: Vec<f64> = (0..15).map(|_| rng.gen_range(0.0..1.0)).collect();
    let a = planted(&mut rng, &spec);
    let out = find_smallest_eigenvalue(&a, 1e-3, 2).unwrap();
    assert!(out.lambda_hat >= -1e-3);

    let dw = DoubleWell::new(6);
    let ledger = OracleLedger::new();
    let oracle = CountingOracle::new(&dw, &ledger);
    let out = find_smallest_eigenvalue_at(&oracle, &[0.0; 6], 1e-3, 3).unwrap();
    assert!((out.lambda_hat + 1.0).abs() <= 1e-3, "{}", out.lambda_hat);
    assert!(ledger.hvp_calls() > 0);
    assert_eq!(ledger.grad_calls(), 0);
}

#[test]
fn finder_across_sign_regimes() {
    let mut rng = seeded_rng(77);
    let eps = 1e-3;
    for t in 0..15 {
        let d = rng.gen_range(5..40);
        let lowest = match t % 3 {
            0 => rng.gen_range(0.1..0.5),
            1 => rng.gen_range(-1e-4..1e-4),
            _ => rng.gen_range(-0.9..-0.3),
        };
        let mut spec: Vec<f64> = (0..d).map(|_| rng.gen_range(lowest..1.0)).collect();
        spec[0] = lowest;
        let a = planted(&mut rng, &spec);
        let out = find_smallest_eigenvalue(&a, eps, t).unwrap();
        assert!((out.lambda_hat - lowest).abs() <= eps, "t={t} want {lowest} got {}", out.lambda_hat);
        check_delta_ratios(&out.state);
    }
}
