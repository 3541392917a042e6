use super::*;
use crate::designs::{initial_doe, ZScore};
use crate::distributions::JointModel;
use crate::surrogates::{GpModel, GpOptions};

struct State {
    pool: CandidatePool,
    doe: Doe,
    model: GpModel,
    grid: ThresholdGrid,
    cdfs: BoundedCdfs,
    preds: Vec<Prediction>,
}

fn sim(x: &[f64]) -> f64 {
    x[0].sin() * 2.0 + 0.3 * x[1] * x[1] + 0.5 * x[0] * x[1]
}

fn gp_state(pool_n: usize, doe_n: usize, seed: u64) -> State {
    let joint = JointModel::standard_normal(2);
    let pool = CandidatePool::build(&joint, pool_n, seed).unwrap();
    let mut doe = Doe::new(2);
    for i in initial_doe(&pool, doe_n, seed).unwrap() {
        let x = pool.points().row(i).to_vec();
        doe.push_pool_point(i, &x, sim(&x)).unwrap();
    }
    let model =
        GpModel::fit_constant(&doe.inputs, &doe.outputs, pool.scaling().clone(), &GpOptions::default()).unwrap();
    let preds = model.predict(pool.points());
    let grid = ThresholdGrid::new(-3.0, 6.0, 100).unwrap();
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    State {
        pool,
        doe,
        model,
        grid,
        cdfs,
        preds,
    }
}

fn ctx(s: &State) -> SelectionContext<'_> {
    SelectionContext::new(&s.model, &s.pool, &s.doe, &s.grid, &s.cdfs, &s.preds).unwrap()
}

fn in_doe(s: &State, i: usize) -> bool {
    s.doe.indices.contains(&Some(i))
}

/// Scans for the first index attaining the extreme score.
fn brute_best(s: &State, score: impl Fn(usize) -> f64, maximize: bool) -> usize {
    let mut best = usize::MAX;
    let mut best_score = 0.0;
    for i in 0..s.pool.len() {
        if in_doe(s, i) {
            continue;
        }
        let v = score(i);
        let better = if maximize { v > best_score } else { v < best_score };
        if best == usize::MAX || better {
            best = i;
            best_score = v;
        }
    }
    best
}

#[test]
fn enrichment_names_round_trip() {
    for e in Enrichment::ALL {
        assert_eq!(e.to_string().parse::<Enrichment>().unwrap(), e);
    }
    assert!("foo".parse::<Enrichment>().is_err());
    assert_eq!(serde_json::to_string(&Enrichment::TwoStep).unwrap(), "\"two-step\"");
}

#[test]
fn mov_matches_brute_force() {
    let s = gp_state(200, 12, 3);
    let sel = select_mov(&ctx(&s)).unwrap();
    let oracle = brute_best(&s, |i| s.model.predict_one(s.pool.points().row(i)).variance, true);
    assert_eq!(sel.index, oracle);
    assert!(!in_doe(&s, sel.index));
    assert!(sel.top.len() == TOP_SCORES && sel.top[0].0 == sel.index);
}

#[test]
fn mov_picks_midpoint_in_one_dim() {
    let x = PointSet::from_row_major(1, vec![0.0, 0.5, 1.0]);
    let pool = CandidatePool::from_points(x, 0).unwrap();
    let mut doe = Doe::new(1);
    doe.push_pool_point(0, &[0.0], 0.0).unwrap();
    doe.push_pool_point(2, &[1.0], 1.0).unwrap();
    let model = GpModel::fit_constant(
        &doe.inputs,
        &doe.outputs,
        ZScore::fit(pool.points()).unwrap(),
        &GpOptions::default(),
    )
    .unwrap();
    let preds = model.predict(pool.points());
    let grid = ThresholdGrid::new(0.0, 1.0, 10).unwrap();
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&model, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    assert_eq!(select_mov(&c).unwrap().index, 1);
}

/// Predictor with prescribed means and variances, looked up by first coordinate.
struct Table {
    means: Vec<f64>,
    vars: Vec<f64>,
}

impl Predictor for Table {
    fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        x.rows()
            .map(|r| {
                let i = r[0].round() as usize;
                Prediction {
                    mean: self.means[i],
                    variance: self.vars[i],
                }
            })
            .collect()
    }
}

fn table_ctx_parts(means: Vec<f64>, vars: Vec<f64>) -> (Table, CandidatePool, Doe, ThresholdGrid) {
    let n = means.len();
    let pts = PointSet::from_row_major(1, (0..n).map(|i| i as f64).collect());
    let pool = CandidatePool::from_points(pts, 0).unwrap();
    let doe = Doe::new(1);
    let grid = ThresholdGrid::new(-2.0, 2.0, 40).unwrap();
    (Table { means, vars }, pool, doe, grid)
}

#[test]
fn mov_ties_go_to_lowest_index() {
    let (t, pool, doe, grid) = table_ctx_parts(vec![0.0; 5], vec![0.3; 5]);
    let preds = t.predict(pool.points());
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&t, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    assert_eq!(select_mov(&c).unwrap().index, 0);
}

#[test]
fn zero_variance_falls_back_to_mov() {
    let (t, pool, doe, grid) = table_ctx_parts(vec![0.1, -0.5, 0.7, 1.2], vec![0.0; 4]);
    let preds = t.predict(pool.points());
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&t, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    assert_eq!(two_step_threshold(&c), None);
    let sel = select_two_step(&c).unwrap();
    assert!(sel.fallback);
    assert_eq!(sel.index, 0);
}

#[test]
fn u_zero_candidate_is_selected() {
    let means: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
    let (t, pool, doe, grid) = table_ctx_parts(means, vec![0.04; 41]);
    let preds = t.predict(pool.points());
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&t, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    let sel = select_two_step(&c).unwrap();
    let y = sel.y_star.unwrap();
    assert!((preds[sel.index].mean - y).abs() < 1e-12);
    assert_eq!(sel.top[0].1, 0.0);
}

#[test]
fn normalizer_is_full_gaussian_mass_when_centered() {
    let (t, pool, doe, grid) = table_ctx_parts(vec![0.0; 3], vec![1e-4; 3]);
    let preds = t.predict(pool.points());
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&t, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    let ts = threshold_scores(&c);
    let mid = grid.len() / 2;
    let s = 1e-2;
    assert!((ts.z[mid] - (2.0 * std::f64::consts::PI).sqrt() * s).abs() < 1e-12);
    assert!(ts.w_l.iter().all(|&w| w >= 0.0));
    assert!(ts.z.iter().all(|&z| z > 0.0));
}

/// Direct evaluation of the two-step threshold score on the grid.
fn oracle_y_star(s: &State) -> f64 {
    let g = s.grid.values();
    let floor = 1.0 / s.pool.len() as f64;
    let mut best_j = None;
    let mut best = f64::NEG_INFINITY;
    for (j, &yp) in g.iter().enumerate() {
        let mut k = 0;
        for i in 1..s.preds.len() {
            if (yp - s.preds[i].mean).abs() < (yp - s.preds[k].mean).abs() {
                k = i;
            }
        }
        let sig = s.preds[k].variance.sqrt();
        if sig <= 0.0 {
            continue;
        }
        let f = |m: usize| {
            let f0 = s.cdfs.zero.cdf[m];
            let w = (s.cdfs.plus.cdf[m] - s.cdfs.minus.cdf[m]).abs() / f0.min(1.0 - f0).max(floor);
            w * (-(g[m] - yp).powi(2) / (2.0 * sig * sig)).exp()
        };
        let mut w_l = 0.0;
        for m in 0..g.len() - 1 {
            w_l += 0.5 * (g[m + 1] - g[m]) * (f(m) + f(m + 1));
        }
        let z = (2.0 * std::f64::consts::PI).sqrt()
            * sig
            * (crate::distributions::std_normal_cdf((g[g.len() - 1] - yp) / sig)
                - crate::distributions::std_normal_cdf((g[0] - yp) / sig));
        if w_l / z > best {
            best = w_l / z;
            best_j = Some(j);
        }
    }
    g[best_j.unwrap()]
}

#[test]
fn two_step_matches_brute_force() {
    let s = gp_state(200, 12, 5);
    let sel = select_two_step(&ctx(&s)).unwrap();
    let y_star = oracle_y_star(&s);
    assert_eq!(sel.y_star, Some(y_star));
    assert!(!sel.fallback);
    let oracle = brute_best(
        &s,
        |i| {
            let p = s.model.predict_one(s.pool.points().row(i));
            if p.variance > 0.0 {
                (y_star - p.mean).abs() / p.variance.sqrt()
            } else {
                f64::INFINITY
            }
        },
        false,
    );
    assert_eq!(sel.index, oracle);
}

fn oracle_gradient(s: &State) -> usize {
    let sc = s.pool.scaling();
    let zp = s.pool.normalized();
    let zd: Vec<Vec<f64>> = s.doe.inputs.rows().map(|r| sc.apply(r)).collect();
    let mean_at = |z: &[f64]| s.model.predict_one(&sc.invert(z)).mean;
    let h = 1e-4;
    let grads: Vec<Vec<f64>> = zd
        .iter()
        .map(|p| {
            (0..p.len())
                .map(|j| {
                    let (mut a, mut b) = (p.clone(), p.clone());
                    a[j] += h;
                    b[j] -= h;
                    (mean_at(&a) - mean_at(&b)) / (2.0 * h)
                })
                .collect()
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut l_max = 0.0_f64;
    for a in &zd {
        for b in &zd {
            l_max = l_max.max(dist(a, b));
        }
    }
    let mut rows = Vec::new();
    for i in 0..s.pool.len() {
        if in_doe(s, i) {
            continue;
        }
        let x = zp.row(i);
        let k = (0..zd.len())
            .min_by(|&a, &b| dist(x, &zd[a]).partial_cmp(&dist(x, &zd[b])).unwrap())
            .unwrap();
        let d = dist(x, &zd[k]);
        let lin: f64 = mean_at(&zd[k]) + (0..x.len()).map(|j| grads[k][j] * (x[j] - zd[k][j])).sum::<f64>();
        rows.push((i, d, (s.model.predict_one(s.pool.points().row(i)).mean - lin).abs()));
    }
    let dmax = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let rmax = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let score = |r: &(usize, f64, f64)| r.1 / dmax + (1.0 - r.1 / l_max).clamp(0.0, 1.0) * r.2 / rmax;
    let mut best = rows[0];
    for r in &rows {
        if score(r) > score(&best) {
            best = *r;
        }
    }
    best.0
}

#[test]
fn gradient_matches_brute_force() {
    let s = gp_state(200, 12, 9);
    let sel = select_gradient(&ctx(&s)).unwrap();
    assert_eq!(sel.index, oracle_gradient(&s));
}

#[test]
fn gradient_on_exact_linear_model_is_farthest_point() {
    struct Linear;
    impl Predictor for Linear {
        fn predict(&self, x: &PointSet) -> Vec<Prediction> {
            x.rows()
                .map(|r| Prediction {
                    mean: 2.0 * r[0] - r[1] + 0.5,
                    variance: 0.0,
                })
                .collect()
        }
    }
    let joint = JointModel::standard_normal(2);
    let pool = CandidatePool::build(&joint, 300, 2).unwrap();
    let idx = initial_doe(&pool, 6, 2).unwrap();
    let mut doe = Doe::new(2);
    for &i in &idx {
        let x = pool.points().row(i).to_vec();
        doe.push_pool_point(i, &x, 2.0 * x[0] - x[1] + 0.5).unwrap();
    }
    let model = Linear;
    let preds = model.predict(pool.points());
    let grid = ThresholdGrid::new(-5.0, 5.0, 20).unwrap();
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&model, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    let sel = select_gradient(&c).unwrap();
    assert_eq!(sel.index, maximin_extend(&pool, &idx, 1).unwrap()[0]);
}

#[test]
fn selectors_invariant_to_variance_rescaling() {
    let s = gp_state(200, 12, 11);
    let scaled: Vec<Prediction> = s
        .preds
        .iter()
        .map(|p| Prediction {
            mean: p.mean,
            variance: 3.0 * p.variance,
        })
        .collect();
    let c0 = ctx(&s);
    let c1 = SelectionContext::new(&s.model, &s.pool, &s.doe, &s.grid, &s.cdfs, &scaled).unwrap();
    assert_eq!(select_mov(&c0).unwrap().index, select_mov(&c1).unwrap().index);
    assert_eq!(select_gradient(&c0).unwrap().index, select_gradient(&c1).unwrap().index);
    let y = two_step_threshold(&c0).unwrap();
    let u = |preds: &[Prediction]| {
        let mut best = (usize::MAX, f64::INFINITY);
        for i in c0.candidates() {
            let v = (y - preds[i].mean).abs() / preds[i].variance.sqrt();
            if v < best.1 {
                best = (i, v);
            }
        }
        best.0
    };
    assert_eq!(u(&s.preds), u(&scaled));
}

#[test]
fn selection_is_deterministic_and_avoids_design() {
    let s = gp_state(200, 12, 13);
    for e in Enrichment::ALL {
        let a = select(e, &ctx(&s)).unwrap();
        let b = select(e, &ctx(&s)).unwrap();
        assert_eq!(a, b);
        assert!(!in_doe(&s, a.index), "{e}");
    }
}

#[test]
fn exhausted_pool_errors() {
    let x = PointSet::from_row_major(1, vec![0.0, 1.0]);
    let pool = CandidatePool::from_points(x, 0).unwrap();
    let mut doe = Doe::new(1);
    doe.push_pool_point(0, &[0.0], 0.0).unwrap();
    doe.push_pool_point(1, &[1.0], 1.0).unwrap();
    let t = Table {
        means: vec![0.0, 1.0],
        vars: vec![0.1, 0.1],
    };
    let preds = t.predict(pool.points());
    let grid = ThresholdGrid::new(0.0, 1.0, 4).unwrap();
    let cdfs = BoundedCdfs::from_predictions(&preds, &grid);
    let c = SelectionContext::new(&t, &pool, &doe, &grid, &cdfs, &preds).unwrap();
    for e in Enrichment::ALL {
        assert!(select(e, &c).is_err(), "{e}");
    }
}

#[test]
fn context_rejects_stale_predictions() {
    let s = gp_state(50, 12, 1);
    let other = ThresholdGrid::new(0.0, 1.0, 10).unwrap();
    assert!(SelectionContext::new(&s.model, &s.pool, &s.doe, &s.grid, &s.cdfs, &s.preds[1..]).is_err());
    assert!(SelectionContext::new(&s.model, &s.pool, &s.doe, &other, &s.cdfs, &s.preds).is_err());
}
