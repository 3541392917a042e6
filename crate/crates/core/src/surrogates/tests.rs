use super::*;
use crate::designs::{initial_doe, CandidatePool};
use crate::distributions::Marginal;
use proptest::prelude::*;

fn doe_from(joint: &JointModel, pool_n: usize, n: usize, seed: u64) -> (CandidatePool, PointSet) {
    let pool = CandidatePool::build(joint, pool_n, seed).unwrap();
    let idx = initial_doe(&pool, n, seed).unwrap();
    let x = pool.points().select(&idx);
    (pool, x)
}

fn eval(x: &PointSet, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    x.rows().map(f).collect()
}

fn gp(x: &PointSet, y: &[f64]) -> GpModel {
    GpModel::fit_constant(x, y, ZScore::fit(x).unwrap(), &GpOptions::default()).unwrap()
}

#[test]
fn gp_recovers_identity_function() {
    let x = PointSet::from_row_major(1, (0..12).map(|i| i as f64 / 11.0).collect());
    let y = x.as_slice().to_vec();
    let m = gp(&x, &y);
    let probe = PointSet::from_row_major(1, (0..=100).map(|i| i as f64 / 100.0).collect());
    for (p, &t) in m.predict(&probe).iter().zip(probe.as_slice()) {
        assert!((p.mean - t).abs() < 1e-3, "{} vs {t}", p.mean);
    }
}

#[test]
fn gp_interpolates_with_small_variance() {
    let joint = JointModel::standard_normal(3);
    let (_, x) = doe_from(&joint, 2000, 20, 1);
    let y = eval(&x, |r| r[0].sin() + r[1] * r[2]);
    let m = gp(&x, &y);
    for (p, &obs) in m.predict(&x).iter().zip(&y) {
        assert!((p.mean - obs).abs() <= 1e-6 * (1.0 + obs.abs()));
        assert!(p.variance <= 10.0 * m.nugget() * m.process_variance(), "{}", p.variance);
    }
}

#[test]
fn gp_output_scaling() {
    let joint = JointModel::standard_normal(2);
    let (pool, x) = doe_from(&joint, 2000, 15, 2);
    let y = eval(&x, |r| r[0].powi(2) - r[1]);
    let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    let (a, b) = (gp(&x, &y), gp(&x, &y2));
    for (l1, l2) in a.lengthscales().iter().zip(b.lengthscales()) {
        assert!((l1 / l2 - 1.0).abs() < 1e-8);
    }
    let probe = pool.points().select(&(0..100).collect::<Vec<_>>());
    for (p, q) in a.predict(&probe).iter().zip(b.predict(&probe)) {
        assert!((q.mean - 2.0 * p.mean).abs() <= 1e-8 * (1.0 + p.mean.abs()));
        assert!((q.variance - 4.0 * p.variance).abs() <= 1e-8 * (1e-12 + p.variance));
    }
}

#[test]
fn gp_far_field_reverts_to_trend() {
    let joint = JointModel::standard_normal(2);
    let (_, x) = doe_from(&joint, 2000, 15, 3);
    let y = eval(&x, |r| r[0] + 0.5 * r[1]);
    let m = gp(&x, &y);
    let far = PointSet::from_rows(&[[1e4, -1e4]]);
    let p = m.predict(&far)[0];
    assert!((p.mean - m.trend_coefficients()[0]).abs() < 1e-10);
    assert!(p.variance >= m.process_variance());
}

#[test]
fn likelihood_gradient_matches_finite_differences() {
    let joint = JointModel::standard_normal(3);
    let (pool, x) = doe_from(&joint, 3000, 25, 4);
    let y = eval(&x, |r| (1.5 * r[0]).sin() + r[1] * r[1] - 0.3 * r[2]);
    let z = pool.scaling().apply_all(&x);
    let mut rng = crate::rng::rng_from_seed(10);
    use rand::Rng as _;
    for _ in 0..10 {
        let lt: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (_, g) = gp::profiled_nll_and_gradient(&z, &y, &lt).unwrap();
        for k in 0..3 {
            let h = 1e-5;
            let mut up = lt.clone();
            up[k] += h;
            let mut dn = lt.clone();
            dn[k] -= h;
            let fd = (gp::profiled_nll_and_gradient(&z, &y, &up).unwrap().0
                - gp::profiled_nll_and_gradient(&z, &y, &dn).unwrap().0)
                / (2.0 * h);
            assert!((g[k] - fd).abs() <= 0.01 * fd.abs().max(1e-6), "k={k}: {} vs {fd}", g[k]);
        }
    }
}

#[test]
fn gp_prediction_invariant_to_row_order() {
    let joint = JointModel::standard_normal(2);
    let (pool, x) = doe_from(&joint, 2000, 14, 5);
    let y = eval(&x, |r| r[0] * r[1] + r[0].cos());
    let order: Vec<usize> = (0..x.len()).rev().collect();
    let xr = x.select(&order);
    let yr: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let scaling = pool.scaling().clone();
    let a = GpModel::fit_constant(&x, &y, scaling.clone(), &GpOptions::default()).unwrap();
    let b = GpModel::fit_constant(&xr, &yr, scaling, &GpOptions::default()).unwrap();
    let probe = pool.points().select(&(0..100).collect::<Vec<_>>());
    for (p, q) in a.predict(&probe).iter().zip(b.predict(&probe)) {
        assert!((p.mean - q.mean).abs() <= 1e-6 * (1.0 + p.mean.abs()));
    }
}

#[test]
fn gp_rejects_bad_input() {
    let x = PointSet::from_rows(&[[0.0]]);
    assert!(GpModel::fit_constant(&x, &[1.0], ZScore { mean: vec![0.0], std: vec![1.0] }, &GpOptions::default()).is_err());
}

#[test]
fn gp_reports_condition_when_singular() {
    let x = PointSet::from_rows(&[[0.0], [0.0], [1.0]]);
    let opts = GpOptions {
        nugget_start: 0.0,
        nugget_max: 0.0,
        ..GpOptions::default()
    };
    match GpModel::fit_constant(&x, &[1.0, 2.0, 3.0], ZScore { mean: vec![0.0], std: vec![1.0] }, &opts) {
        Err(Error::Fit { condition: Some(c), .. }) => assert!(c > 1e12),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn pce_recovers_linear_function() {
    let joint = JointModel::standard_normal(2);
    let (_, x) = doe_from(&joint, 2000, 20, 6);
    let y = eval(&x, |r| 3.0 + 2.0 * r[0] - r[1]);
    let m = PceModel::fit(&x, &y, &joint, &PceOptions::default()).unwrap();
    let basis = m.basis();
    let TrendBasis::Hermite { multi_indices, .. } = basis else { panic!() };
    for (alpha, c) in multi_indices.iter().zip(m.coefficients()) {
        let expected = match alpha.as_slice() {
            [0, 0] => 3.0,
            [1, 0] => 2.0,
            [0, 1] => -1.0,
            _ => 0.0,
        };
        assert!((c - expected).abs() < 1e-8, "{alpha:?}: {c}");
    }
}

#[test]
fn pce_selects_degree_two_for_hermite_two() {
    let joint = JointModel::standard_normal(2);
    let (_, x) = doe_from(&joint, 2000, 30, 7);
    let y = eval(&x, |r| r[0] * r[0] - 1.0);
    let m = PceModel::fit(&x, &y, &joint, &PceOptions::default()).unwrap();
    assert_eq!(m.selected_degree(), 2);
    assert!(m.loo_error() < 1e-20);
}

#[test]
fn pce_constant_simulator() {
    let joint = JointModel::standard_normal(3);
    let (_, x) = doe_from(&joint, 2000, 20, 8);
    let y = vec![4.2; x.len()];
    let m = PceModel::fit(&x, &y, &joint, &PceOptions::default()).unwrap();
    assert!((m.coefficients()[0] - 4.2).abs() < 1e-10);
    assert!(m.coefficients()[1..].iter().all(|c| c.abs() < 1e-10));
    assert!(m.predict(&x).iter().all(|p| p.variance < 1e-20));
}

#[test]
fn pce_exact_degree_two_in_five_dims() {
    let joint = JointModel::standard_normal(5);
    let (pool, x) = doe_from(&joint, 5000, 60, 9);
    let coef: Vec<f64> = (0..21).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    let basis = TrendBasis::hermite(joint.clone(), 2);
    let truth = |r: &[f64]| dot(&basis.eval(r), &coef);
    let y = eval(&x, truth);
    let m = PceModel::fit(&x, &y, &joint, &PceOptions::default()).unwrap();
    let probe = pool.points().select(&(0..200).collect::<Vec<_>>());
    for (p, r) in m.predict(&probe).iter().zip(probe.rows()) {
        assert!((p.mean - truth(r)).abs() < 1e-8);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn bootstrap_variance_smaller_near_data() {
    let joint = JointModel::new(vec![Marginal::uniform(-1.0, 1.0).unwrap()]).unwrap();
    let mut wins = 0;
    for trial in 0..20 {
        let x = PointSet::from_row_major(1, (0..30).map(|i| -0.9 + 1.8 * i as f64 / 29.0).collect());
        let y = eval(&x, |r| (2.0 * r[0]).exp() + 0.05 * (37.0 * r[0]).sin());
        let opts = PceOptions {
            seed: trial,
            ..PceOptions::default()
        };
        let m = PceModel::fit(&x, &y, &joint, &opts).unwrap();
        let near = m.predict(&PointSet::from_rows(&[[0.0]]))[0].variance;
        let far = m.predict(&PointSet::from_rows(&[[0.9999]]))[0].variance;
        assert!(near >= 0.0 && far >= 0.0);
        if near < far {
            wins += 1;
        }
    }
    assert!(wins > 10, "{wins}/20");
}

#[test]
fn basis_is_orthonormal_under_input_measure() {
    let joint = JointModel::new(vec![
        Marginal::new(crate::distributions::MarginalKind::Gumbel, 1.0, 0.5, crate::distributions::Parameterization::MomentPair).unwrap(),
        Marginal::uniform(0.0, 2.0).unwrap(),
    ])
    .unwrap();
    let basis = TrendBasis::hermite(joint.clone(), 3);
    let n = 100_000;
    let s = joint.sample(n, 12);
    let p = basis.len();
    let mut sum = vec![0.0; p * p];
    let mut sum_sq = vec![0.0; p * p];
    for row in s.rows() {
        let v = basis.eval(row);
        for i in 0..p {
            for j in 0..p {
                let prod = v[i] * v[j];
                sum[i * p + j] += prod;
                sum_sq[i * p + j] += prod * prod;
            }
        }
    }
    let nf = n as f64;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            let mean = sum[i * p + j] / nf;
            // 5 standard errors; the product's spread is 1 for the linear terms and
            // grows with degree, so it is estimated from the same sample.
            let spread = (sum_sq[i * p + j] / nf - mean * mean).sqrt().max(1.0);
            assert!((mean - target).abs() < 5.0 * spread / nf.sqrt(), "({i},{j}) {mean}");
        }
    }
}

#[test]
fn multi_index_sets() {
    assert_eq!(total_degree_indices(2, 2), vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    assert_eq!(basis_size(5, 2), 21);
    assert_eq!(basis_size(21, 3), 2024);
    assert_eq!(total_degree_indices(4, 3).len(), basis_size(4, 3));
    let h = hermite_orthonormal(1.3, 3);
    assert!((h[3] - (1.3f64.powi(3) - 3.0 * 1.3) / 6f64.sqrt()).abs() < 1e-14);
}

#[test]
fn pck_degree_zero_equals_gp() {
    let joint = JointModel::standard_normal(2);
    let (pool, x) = doe_from(&joint, 2000, 14, 13);
    let y = eval(&x, |r| (r[0] - r[1]).min(r[0] + r[1]));
    let scaling = pool.scaling().clone();
    let opts = GpOptions::default();
    let g = GpModel::fit_constant(&x, &y, scaling.clone(), &opts).unwrap();
    let p = PckModel::fit(&x, &y, &joint, scaling, 0, &opts).unwrap();
    let probe = pool.points().select(&(100..200).collect::<Vec<_>>());
    for (a, b) in g.predict(&probe).iter().zip(Predictor::predict(&p, &probe)) {
        assert!((a.mean - b.mean).abs() <= 1e-8 * (1.0 + a.mean.abs()));
        assert!((a.variance - b.variance).abs() <= 1e-8 * (1.0 + a.variance));
    }
}

#[test]
fn pck_interpolates_and_uses_polynomial_trend() {
    let joint = JointModel::standard_normal(2);
    let (_, x) = doe_from(&joint, 3000, 30, 14);
    let y = eval(&x, |r| 1.0 + r[0] * r[0] + 0.5 * r[0] * r[1]);
    let m = PckModel::fit(&x, &y, &joint, ZScore::fit(&x).unwrap(), 3, &GpOptions::default()).unwrap();
    assert_eq!(m.trend().selected_degree(), 2);
    for (p, &obs) in Predictor::predict(&m, &x).iter().zip(&y) {
        assert!((p.mean - obs).abs() <= 1e-6 * (1.0 + obs.abs()));
    }
}

#[test]
fn handle_batch_equals_pointwise_and_serializes() {
    let joint = JointModel::standard_normal(2);
    let (pool, x) = doe_from(&joint, 1000, 12, 15);
    let y = eval(&x, |r| r[0].exp() - r[1]);
    for kind in SurrogateKind::ALL {
        let h = SurrogateHandle::fit(kind, &x, &y, &joint, pool.scaling(), &SurrogateOptions::default()).unwrap();
        let probe = pool.points().select(&(0..600).collect::<Vec<_>>());
        let batch = h.predict(&probe);
        for (i, b) in batch.iter().enumerate().step_by(37) {
            let one = h.predict_one(probe.row(i));
            assert_eq!(one, *b);
        }
        assert!(batch.iter().all(|p| p.mean.is_finite() && p.variance >= 0.0));
        let means = h.predict_means(&probe);
        for (m, b) in means.iter().zip(&batch) {
            assert!((m - b.mean).abs() <= 1e-12 * (1.0 + m.abs()));
        }
        let back = SurrogateHandle::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&probe), batch);
        assert_eq!(back.kind(), kind);
        let lo = h.predict_bounded(&probe, -2.0);
        let mid = h.predict_bounded(&probe, 0.0);
        let hi = h.predict_bounded(&probe, 2.0);
        for i in 0..probe.len() {
            assert!(lo[i] <= mid[i] && mid[i] <= hi[i]);
            assert_eq!(mid[i], batch[i].mean);
        }
    }
}

#[test]
fn exact_linear_bootstrap_variance_vanishes() {
    let joint = JointModel::standard_normal(1);
    let x = PointSet::from_row_major(1, vec![-1.0, 0.0, 1.0, 2.0]);
    let y = eval(&x, |r| 1.0 + 2.0 * r[0]);
    let m = PceModel::fit(&x, &y, &joint, &PceOptions::default()).unwrap();
    assert!(m.effective_replicates() >= 2);
    let v = m.predict(&PointSet::from_rows(&[[0.3], [5.0]]));
    assert!(v.iter().all(|p| p.variance < 1e-20));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pce_reproduces_random_polynomials(seed in 0u64..1000, degree in 1u32..=2) {
        let joint = JointModel::standard_normal(3);
        let p = basis_size(3, degree);
        let (pool, x) = doe_from(&joint, 3000, 2 * p + 2, seed);
        let coef: Vec<f64> = (0..p).map(|i| ((seed as usize + 3 * i) % 7) as f64 - 3.0).collect();
        let basis = TrendBasis::hermite(joint.clone(), degree);
        let truth = |r: &[f64]| dot(&basis.eval(r), &coef);
        let y = eval(&x, truth);
        let opts = PceOptions { max_degree: degree, ..PceOptions::default() };
        let m = PceModel::fit(&x, &y, &joint, &opts).unwrap();
        let probe = pool.points().select(&(0..50).collect::<Vec<_>>());
        for (pr, r) in m.predict_means(&probe).iter().zip(probe.rows()) {
            prop_assert!((pr - truth(r)).abs() < 1e-8 * (1.0 + truth(r).abs()));
        }
    }
}
