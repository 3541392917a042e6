use super::*;
use crate::distributions::Marginal;
use proptest::prelude::*;

fn square_pool() -> CandidatePool {
    let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
    CandidatePool::from_points(pts, 0).unwrap()
}

fn random_pool(n: usize, dim: usize, seed: u64) -> CandidatePool {
    CandidatePool::build(&JointModel::standard_normal(dim), n, seed).unwrap()
}

/// Exhaustive argmax of the min distance to `doe` (lowest index on ties).
fn brute_force_pick(pool: &CandidatePool, doe: &[usize]) -> usize {
    let z = pool.normalized();
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for i in 0..pool.len() {
        if doe.contains(&i) {
            continue;
        }
        let d = doe
            .iter()
            .map(|&j| {
                z.row(i)
                    .iter()
                    .zip(z.row(j))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn radical_inverse_base2(mut i: u64) -> f64 {
    let mut f = 0.5;
    let mut x = 0.0;
    while i > 0 {
        if i & 1 == 1 {
            x += f;
        }
        i >>= 1;
        f *= 0.5;
    }
    x
}

/// Star discrepancy over anchored boxes with corners on the point coordinates (and 1).
fn star_discrepancy_2d(p: &PointSet) -> f64 {
    let n = p.len() as f64;
    let mut xs: Vec<f64> = p.column(0).chain([1.0]).collect();
    let mut ys: Vec<f64> = p.column(1).chain([1.0]).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for &a in &xs {
        for &b in &ys {
            let open = p.rows().filter(|r| r[0] < a && r[1] < b).count() as f64 / n;
            let closed = p.rows().filter(|r| r[0] <= a && r[1] <= b).count() as f64 / n;
            let vol = a * b;
            d = d.max(vol - open).max(closed - vol);
        }
    }
    d
}

#[test]
fn pool_normalization() {
    let pool = random_pool(100_000, 2, 1);
    for j in 0..2 {
        let z: Vec<f64> = pool.normalized().column(j).collect();
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let s = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        assert!(m.abs() < 1e-10);
        assert!((s - 1.0).abs() < 1e-10);
        assert!(pool.mean()[j].abs() < 1e-2);
        assert!((pool.std()[j] - 1.0).abs() < 1e-2);
    }
    for i in (0..pool.len()).step_by(997) {
        let back = pool.scaling().invert(pool.normalized().row(i));
        for (a, b) in back.iter().zip(pool.points().row(i)) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }
}

#[test]
fn two_point_pool() {
    let pool = random_pool(2, 3, 4);
    for v in pool.normalized().as_slice() {
        assert!((v.abs() - 1.0).abs() < 1e-12);
    }
    assert!(CandidatePool::build(&JointModel::standard_normal(2), 1, 0).is_err());
}

#[test]
fn pool_is_deterministic() {
    assert_eq!(random_pool(1000, 3, 9), random_pool(1000, 3, 9));
}

#[test]
fn degenerate_column_is_named() {
    let pts = PointSet::from_rows(&[[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]);
    match CandidatePool::from_points(pts, 0) {
        Err(Error::Config(msg)) => assert!(msg.contains("column 1")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn opposite_corner() {
    assert_eq!(maximin_extend(&square_pool(), &[0], 1).unwrap(), vec![3]);
}

#[test]
fn exhaustion_and_bad_input() {
    let pool = square_pool();
    assert!(maximin_extend(&pool, &[0], 4).is_err());
    assert!(maximin_extend(&pool, &[], 1).is_err());
    assert_eq!(maximin_extend(&pool, &[0], 3).unwrap().len(), 3);
}

#[test]
fn picks_match_exhaustive_scan() {
    for seed in 0..10 {
        let pool = random_pool(300, 2 + seed as usize % 4, seed);
        let mut doe = vec![seed as usize * 7 % 300];
        let picks = maximin_extend(&pool, &doe, 20).unwrap();
        for p in picks {
            assert_eq!(p, brute_force_pick(&pool, &doe));
            doe.push(p);
        }
    }
}

#[test]
fn achieved_distances_non_increasing() {
    let pool = random_pool(2000, 3, 5);
    let mut doe = vec![0];
    let picks = maximin_extend(&pool, &doe, 30).unwrap();
    let z = pool.normalized();
    let mut last = f64::INFINITY;
    for p in picks {
        let d = doe
            .iter()
            .map(|&j| squared_distance(z.row(p), z.row(j)))
            .fold(f64::INFINITY, f64::min);
        assert!(d <= last);
        last = d;
        doe.push(p);
    }
}

#[test]
fn initial_design_sizes() {
    assert_eq!(default_initial_size(2), 12);
    assert_eq!(default_initial_size(21), 63);
    let pool = random_pool(500, 2, 2);
    let one = initial_doe(&pool, 1, 17).unwrap();
    assert_eq!(one.len(), 1);
    let d = initial_doe(&pool, 12, 17).unwrap();
    assert_eq!(d[0], one[0]);
    assert_eq!(d.len(), 12);
    assert!(initial_doe(&pool, 0, 1).is_err());
    assert!(initial_doe(&pool, 501, 1).is_err());
}

#[test]
fn lhs_stratification() {
    let p = lhs(2, 1, 3).unwrap();
    let mut v: Vec<f64> = p.column(0).collect();
    v.sort_by(f64::total_cmp);
    assert!(v[0] < 0.5 && v[1] >= 0.5);
    let p = lhs(128, 2, 3).unwrap();
    for j in 0..2 {
        let mut cells: Vec<usize> = p.column(j).map(|x| (x * 128.0).floor() as usize).collect();
        cells.sort();
        assert_eq!(cells, (0..128).collect::<Vec<_>>());
    }
    assert_eq!(lhs(50, 4, 8).unwrap(), lhs(50, 4, 8).unwrap());
}

#[test]
fn sobol_first_dimension_is_van_der_corput() {
    let s = sobol(64, 1).unwrap();
    for (i, x) in s.column(0).enumerate() {
        assert_eq!(x, radical_inverse_base2(i as u64));
    }
    let head: Vec<f64> = s.column(0).take(4).collect();
    assert_eq!(head, vec![0.0, 0.5, 0.25, 0.75]);
}

#[test]
fn sobol_matches_reference_points_as_a_set() {
    // First 8 unscrambled points in 3 dimensions from an independent generator.
    let mut expected = vec![
        [0.0, 0.0, 0.0],
        [0.5, 0.5, 0.5],
        [0.75, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.375, 0.375, 0.625],
        [0.875, 0.875, 0.125],
        [0.625, 0.125, 0.875],
        [0.125, 0.625, 0.375],
    ];
    let s = sobol(8, 3).unwrap();
    let mut got: Vec<[f64; 3]> = s.rows().map(|r| [r[0], r[1], r[2]]).collect();
    let key = |a: &[f64; 3], b: &[f64; 3]| a.partial_cmp(b).unwrap();
    expected.sort_by(key);
    got.sort_by(key);
    assert_eq!(got, expected);
}

#[test]
fn sobol_range_and_limits() {
    let s = sobol(1000, 21).unwrap();
    assert!(s.as_slice().iter().all(|&v| (0.0..1.0).contains(&v)));
    assert!(sobol(4, SOBOL_MAX_DIMS + 1).is_err());
    assert!(sobol(4, 0).is_err());
}

#[test]
fn sobol_beats_random_discrepancy() {
    let sob = star_discrepancy_2d(&sobol(128, 2).unwrap());
    let mut random: Vec<f64> = (0..20)
        .map(|s| {
            let j = JointModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 2).unwrap();
            star_discrepancy_2d(&j.sample(128, s))
        })
        .collect();
    random.sort_by(f64::total_cmp);
    assert!(sob < 0.5 * (random[9] + random[10]), "{sob} vs {random:?}");
}

#[test]
fn min_distance_basics() {
    let sq = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
    assert_eq!(min_pairwise_distance(&sq).unwrap(), 1.0);
    let dup = PointSet::from_rows(&[[0.3, 0.2], [0.3, 0.2], [0.9, 0.9]]);
    assert_eq!(min_pairwise_distance(&dup).unwrap(), 0.0);
    assert!(min_pairwise_distance(&PointSet::from_rows(&[[0.0]])).is_err());
}

#[test]
fn maximin_beats_lhs_in_unit_cube() {
    let mut wins = 0;
    for seed in 0..10 {
        let cube = JointModel::iid(Marginal::uniform(0.0, 1.0).unwrap(), 2).unwrap();
        let pool = CandidatePool::build(&cube, 20_000, seed).unwrap();
        let idx = initial_doe(&pool, 128, seed).unwrap();
        let md = min_pairwise_distance(&pool.points().select(&idx)).unwrap();
        let l = min_pairwise_distance(&lhs(128, 2, seed).unwrap()).unwrap();
        if md > l {
            wins += 1;
        }
    }
    assert!(wins > 5, "maximin won {wins}/10");
}

#[test]
fn csv_export() {
    let p = PointSet::from_rows(&[[1.5, -2.0], [0.1, 3.0]]);
    let mut buf = Vec::new();
    write_points_csv(&p, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "x1,x2\n1.5,-2.0\n0.1,3.0\n");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn maximin_is_deterministic_and_unique(seed in 0u64..1000, dim in 1usize..5, count in 1usize..15) {
        let pool = random_pool(200, dim, seed);
        let a = maximin_extend(&pool, &[3], count).unwrap();
        let b = maximin_extend(&pool, &[3], count).unwrap();
        prop_assert_eq!(&a, &b);
        let mut all = a.clone();
        all.push(3);
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), count + 1);
    }
}
