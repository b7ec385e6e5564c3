use crate::linalg::dot;
use crate::rng::{random_unit_vector, seeded_rng};
use crate::second_order::SecondOrderOracle;

/// Largest relative mismatch between central finite differences of `value`
/// and the directional derivative from `grad`, over random unit directions.
///
/// Calls the oracle directly; no ledger is touched.
pub fn finite_diff_check(oracle: &dyn SecondOrderOracle, x: &[f64], n_probes: usize, seed: u64) -> f64 {
    let h = 1e-5;
    let mut rng = seeded_rng(seed);
    let g = oracle.grad(x);
    let mut worst = 0.0_f64;
    for _ in 0..n_probes.max(1) {
        let dir = random_unit_vector(&mut rng, x.len());
        let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
        let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
        let fd = (oracle.value(&xp) - oracle.value(&xm)) / (2.0 * h);
        let exact = dot(&g, &dir);
        worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
    }
    worst
}
