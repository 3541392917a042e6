use super::*;
use std::path::PathBuf;

fn eval(id: u32, x: &[f64]) -> f64 {
    get_benchmark(id).unwrap().evaluate(x).unwrap()
}

#[test]
fn closed_form_spot_values() {
    assert_eq!(eval(4, &[0.0, 0.0]), 0.0);
    assert_eq!(eval(6, &[0.0, 0.0]), 20.0);
    assert_eq!(eval(1, &[10.0, 10.0]), 2.5);
    assert!((eval(7, &[std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 1.0]) - 8.1).abs() < 1e-12);
    // At the origin the four branches are 3, 3, k/sqrt2, k/sqrt2.
    assert_eq!(eval(3, &[0.0, 0.0]), 3.0);
    assert_eq!(eval(5, &[0.0, 0.0]), 3.0);
}

#[test]
fn borehole_matches_independent_formula() {
    let (rw, r, tu, hu, tl, hl, l, kw) = (0.10_f64, 7.71f64.exp(), 89335.0, 1045.0, 89.55, 760.0, 1400.0, 10950.0);
    // Flow = 2 pi Tu dH / (ln(r/rw) [1 + 2 L Tu / (ln(r/rw) rw^2 Kw) + Tu/Tl]).
    let log_ratio = r.ln() - rw.ln();
    let bracket = 1.0 + (2.0 * l * tu) / (log_ratio * rw.powi(2) * kw) + tu / tl;
    let expected = 2.0 * std::f64::consts::PI * tu * (hu - hl) / (log_ratio * bracket);
    let got = eval(13, &[rw, r, tu, hu, tl, hl, l, kw]);
    assert!((got - expected).abs() < 1e-10 * expected, "{got} {expected}");
}

#[test]
fn registry_shape() {
    assert!(get_benchmark(0).is_err());
    assert!(get_benchmark(17).is_err());
    for id in [14, 16] {
        let b = get_benchmark(id).unwrap();
        assert_eq!(b.status(), Status::OutOfScope);
        assert!(matches!(b.evaluate(&vec![0.0; b.dim()]), Err(Error::OutOfScope { .. })));
        assert!(b.joint().is_err());
    }
    let ids = implemented_ids();
    assert_eq!(ids, vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 15]);
    let dims: Vec<usize> = ids.iter().map(|&i| get_benchmark(i).unwrap().dim()).collect();
    assert_eq!(dims, vec![2, 2, 2, 2, 2, 2, 3, 5, 6, 6, 6, 7, 8, 20]);
    assert_eq!(get_benchmark(4).unwrap().reference_range(), (-4.67, 2.63));
    assert_eq!(get_benchmark(15).unwrap().reference_range(), (0.0121, 0.0174));
    assert!(get_benchmark(4).unwrap().evaluate(&[0.0]).is_err());
}

#[test]
fn implemented_benchmarks_are_finite_on_samples() {
    for id in implemented_ids().into_iter().filter(|&i| i != 15) {
        let b = get_benchmark(id).unwrap();
        let x = b.joint().unwrap().sample(100_000, id as u64);
        let y = b.evaluate_all(&x).unwrap();
        assert!(y.iter().all(|v| v.is_finite()), "#{id}");
    }
}

#[test]
fn weibull_input_moments() {
    let b = get_benchmark(11).unwrap();
    let w = &b.joint().unwrap().marginals()[0];
    assert!((w.mean() - 0.9377).abs() < 1e-10);
    assert!((w.std_dev() - 4.59e-2).abs() < 1e-10);
}

#[test]
fn range_needs_enough_samples() {
    let b = get_benchmark(4).unwrap();
    assert!(recompute_range(&b, 9_999, 1).is_err());
    let (lo, hi) = recompute_range(&b, 10_000, 1).unwrap();
    assert!(lo < hi);
}

#[test]
fn quantile_interpolates() {
    let v = [0.0, 1.0, 2.0, 3.0, 4.0];
    assert_eq!(empirical_quantile(&v, 0.5), 2.0);
    assert_eq!(empirical_quantile(&v, 0.1), 0.4);
    assert_eq!(empirical_quantile(&v, 1.0), 4.0);
}

#[test]
fn range_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let b = get_benchmark(4).unwrap();
    let first = recompute_range_cached(&b, 10_000, 3, dir.path()).unwrap();
    assert_eq!(first, recompute_range(&b, 10_000, 3).unwrap());
    let file = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let text = std::fs::read_to_string(&file).unwrap().replace(&format!("{:?}", first.0), "-99.0");
    std::fs::write(&file, text).unwrap();
    assert_eq!(recompute_range_cached(&b, 10_000, 3, dir.path()).unwrap().0, -99.0);
}

#[test]
fn card_json_round_trip() {
    for id in 1..=MAX_ID {
        let card = get_benchmark(id).unwrap().card();
        let back: BenchmarkCard = serde_json::from_str(&serde_json::to_string(&card).unwrap()).unwrap();
        assert_eq!(back, card);
    }
}

fn origin() -> PathBuf {
    PathBuf::from("record.txt")
}

#[test]
fn dt_header_format() {
    let r = parse_ground_motion("dt=0.02\n0.0\n1.0\n", &origin()).unwrap();
    assert_eq!(r.dt, 0.02);
    assert_eq!(r.accelerations, vec![0.0, 1.0]);
    let r = parse_ground_motion("dt=0.01\nunits=g\n0.5 1.0\n", &origin()).unwrap();
    assert_eq!(r.accelerations, vec![0.5 * 9.80665, 9.80665]);
}

#[test]
fn two_column_format() {
    let r = parse_ground_motion("# t a\n0.00 0.1\n0.02 0.2\n0.04 -0.3\n", &origin()).unwrap();
    assert!((r.dt - 0.02).abs() < 1e-15);
    assert_eq!(r.len(), 3);
    match parse_ground_motion("0.00 0.1\n0.02 0.2\n0.05 -0.3\n", &origin()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_ground_motion("0.0 1.0\nx y\n", &origin()), Err(Error::Parse { line: 2, .. })));
    assert!(parse_ground_motion("dt=0.02\n1.0\n", &origin()).is_err());
}

#[test]
fn peer_format() {
    let text = "PEER NGA STRONG MOTION DATABASE RECORD\nTEST RECORD, component N\nACCELERATION TIME SERIES IN UNITS OF G\nNPTS=    5, DT=   .0100 SEC\n  .1000E-01  .2000E-01 -.3000E-01\n  .0000E+00  .5000E-02\n";
    let r = parse_ground_motion(text, &origin()).unwrap();
    assert_eq!(r.dt, 0.01);
    assert_eq!(r.len(), 5);
    assert!((r.accelerations[1] - 0.02 * 9.80665).abs() < 1e-15);
    let bad = text.replace("NPTS=    5", "NPTS=    6");
    assert!(parse_ground_motion(&bad, &origin()).is_err());
}

#[test]
fn record_round_trip_is_lossless() {
    let r = GroundMotionRecord::new(0.013, vec![0.1, -1.0 / 3.0, 2.5e-7, 0.0], "x").unwrap();
    let mut buf = Vec::new();
    write_ground_motion(&r, &mut buf).unwrap();
    let back = parse_ground_motion(std::str::from_utf8(&buf).unwrap(), &origin()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn bundled_record_is_reproducible() {
    let r = bundled_record();
    let regenerated = SyntheticMotion::default().generate(ground_motion::BUNDLED_SEED).unwrap();
    assert_eq!(r.accelerations, regenerated.accelerations);
    assert_eq!(r.dt, 0.02);
    assert_eq!(r.len(), 1559);
    assert!((r.pga() - 0.319 * 9.80665).abs() < 1e-12);
}

#[test]
fn shear_zero_input_and_linearity() {
    let p = ShearBuildingParams::table();
    let quiet = GroundMotionRecord::new(0.02, vec![0.0; 500], "zero").unwrap();
    assert_eq!(shear_building_response(&p, &quiet).unwrap(), 0.0);
    let r = bundled_record();
    let base = shear_building_response(&p, &r).unwrap();
    for c in [0.5, 2.0, 3.7] {
        let scaled = shear_building_response(&p, &r.scaled(c)).unwrap();
        assert!((scaled - c * base).abs() <= 1e-12 * c * base, "{c}");
    }
}

/// Fundamental frequency by inverse iteration on `M^-1 K`.
fn inverse_iteration_omega(p: &ShearBuildingParams) -> f64 {
    let n = p.story_masses.len();
    let k = &p.story_stiffnesses;
    let mut kmat = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        kmat[(i, i)] += k[i];
        if i > 0 {
            kmat[(i - 1, i - 1)] += k[i];
            kmat[(i - 1, i)] -= k[i];
            kmat[(i, i - 1)] -= k[i];
        }
    }
    let lu = kmat.clone().lu();
    let mut v = nalgebra::DVector::from_element(n, 1.0);
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mv = nalgebra::DVector::from_iterator(n, (0..n).map(|i| p.story_masses[i] * v[i]));
        let w = lu.solve(&mv).unwrap();
        lambda = v.dot(&(&kmat * &v)) / v.dot(&mv);
        v = &w / w.norm();
    }
    lambda.sqrt()
}

#[test]
fn eigen_frequencies_match_inverse_iteration() {
    let p = ShearBuildingParams::table();
    let w = p.natural_frequencies().unwrap();
    assert!((w[0] - inverse_iteration_omega(&p)).abs() < 1e-9 * w[0]);
    assert!(w.windows(2).all(|x| x[0] < x[1]));
}

#[test]
fn free_vibration_period_matches_eigenanalysis() {
    let mut p = ShearBuildingParams::table();
    p.damping_ratio = 0.0;
    let t1 = p.fundamental_period().unwrap();
    // Static deflection under uniform lateral load, released at t = 0.
    let n = 10;
    let mut u0 = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += (n - i) as f64 / p.story_stiffnesses[i];
        u0[i] = acc;
    }
    let dt = 0.01;
    let steps = 20_000;
    let mut roof = Vec::with_capacity(steps);
    shear::integrate(&p, &vec![0.0; steps], dt, Some(&u0), |u| roof.push(u[n - 1])).unwrap();
    let spectrum = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, x) in roof.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * f * k as f64 * dt;
            re += x * ph.cos();
            im += x * ph.sin();
        }
        re * re + im * im
    };
    let mut best = (0.0, 0.0);
    let mut f = 0.2;
    while f < 1.0 {
        let s = spectrum(f);
        if s > best.1 {
            best = (f, s);
        }
        f += 0.0005;
    }
    let period = 1.0 / best.0;
    assert!((period - t1).abs() < 0.01 * t1, "{period} vs {t1}");
}

#[test]
fn shear_rejects_bad_parameters() {
    let mut x: Vec<f64> = shear::TABLE_MASSES.iter().chain(&shear::TABLE_STIFFNESSES).copied().collect();
    assert!(ShearBuildingParams::from_inputs(&x).is_ok());
    x[12] = -1.0;
    assert!(ShearBuildingParams::from_inputs(&x).is_err());
    assert!(ShearBuildingParams::from_inputs(&x[..5]).is_err());
}

#[test]
fn shear_inputs_are_masses_then_stiffnesses() {
    let b = get_benchmark(15).unwrap();
    let mut x: Vec<f64> = shear::TABLE_MASSES.iter().chain(&shear::TABLE_STIFFNESSES).copied().collect();
    let base = b.evaluate(&x).unwrap();
    let direct = shear_building_response(&ShearBuildingParams::table(), &bundled_record()).unwrap();
    assert_eq!(base, direct);
    x[0] *= 1.1;
    assert_ne!(b.evaluate(&x).unwrap(), base);
}
