use anisorb::greedy::{generate_training_set, q_of_err, select_enrichment};
use anisorb::metric::{distance, estimate_hessian, estimate_hessian_weighted, metric_from_hessian, stencil_center};
use anisorb::online::nearest;
use anisorb::ortho::orthonormalize;
use anisorb::{HessianMatrix, MetricField, MetricTensor, ParameterDomain, ParameterPoint};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// `B B^T` from `p * rank` entries.
fn psd(p: usize, rank: usize, entries: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_column_slice(p, rank, &entries[..p * rank]);
    let m = &b * b.transpose();
    (&m + m.transpose()) * 0.5
}

fn point_strategy(p: usize) -> impl Strategy<Value = ParameterPoint> {
    prop::collection::vec(-2.0..2.0f64, p).prop_map(ParameterPoint::new)
}

fn tensor_strategy(p: usize) -> impl Strategy<Value = MetricTensor> {
    (1..=p, prop::collection::vec(-1.5..1.5f64, p * p)).prop_map(move |(rank, e)| MetricTensor::from_psd_unchecked(psd(p, rank, &e)))
}

fn dim_and<T: Strategy, F: Fn(usize) -> T>(f: F) -> impl Strategy<Value = (usize, T::Value)> {
    (1usize..=3).prop_flat_map(move |p| (Just(p), f(p)))
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_vanishes_on_the_diagonal(
        (_, (m1, m2, a, b)) in dim_and(|p| (tensor_strategy(p), tensor_strategy(p), point_strategy(p), point_strategy(p)))
    ) {
        let d_ab = distance((&m1, &a), (&m2, &b)).unwrap();
        let d_ba = distance((&m2, &b), (&m1, &a)).unwrap();
        prop_assert_eq!(d_ab.to_bits(), d_ba.to_bits());
        prop_assert_eq!(distance((&m1, &a), (&m1, &a)).unwrap(), 0.0);
        prop_assert!(d_ab >= 0.0);
    }

    #[test]
    fn identity_metric_is_euclidean((p, (a, b)) in dim_and(|p| (point_strategy(p), point_strategy(p)))) {
        let id = MetricTensor::identity(p);
        let d = distance((&id, &a), (&id, &b)).unwrap();
        let e: f64 = a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        prop_assert!((d - e).abs() <= 1e-14 * e.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn metric_of_any_hessian_is_symmetric_psd((p, e) in dim_and(|p| prop::collection::vec(-10.0..10.0f64, p * p))) {
        let h = DMatrix::from_column_slice(p, p, &e);
        let h = (&h + h.transpose()) * 0.5;
        let m = metric_from_hessian(&HessianMatrix::from_matrix(h.clone()));
        prop_assert_eq!(m.matrix(), &m.matrix().transpose());
        let eig = m.eigenvalues();
        let top = eig.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        prop_assert!(eig.iter().all(|&l| l >= -1e-12 * top));
        // |H|^2 = H^2
        prop_assert!(max_abs(&(m.matrix() * m.matrix() - &h * &h)) <= 1e-12 * max_abs(&h).powi(2).max(1e-300));
    }

    #[test]
    fn hessian_exact_on_quadratics(
        (p, (c, lin, quad, mu)) in (2usize..=3).prop_flat_map(|p| (
            Just(p),
            (
                1.0..3.0f64,
                prop::collection::vec(-1.0..1.0f64, p),
                prop::collection::vec(-1.0..1.0f64, p * p),
                prop::collection::vec(-1.0..1.0f64, p),
            ),
        ))
    ) {
        let domain = ParameterDomain::cube(p, -1.0, 1.0).unwrap();
        let a = DMatrix::from_column_slice(p, p, &quad);
        let a = &a + a.transpose();
        // one mode, positive on the box, plus a second affine mode
        let f = |x: &[f64]| {
            let v = DVector::from_column_slice(x);
            let lin_part: f64 = lin.iter().zip(x).map(|(l, y)| l * y).sum();
            vec![c * 10.0 + lin_part + 0.5 * (v.transpose() * &a * &v)[(0, 0)], 1.0 + lin_part]
        };
        let mu = ParameterPoint::new(mu);
        let delta: Vec<f64> = domain.extents().iter().map(|e| 1e-2 * e).collect();
        let h = estimate_hessian(|x| Ok(f(x.coords())), &mu, &delta, &domain).unwrap();
        let center = stencil_center(&mu, &delta, &domain).unwrap();
        let expect = &a * f(&center)[0];
        let scale = max_abs(&expect).max(max_abs(&a));
        prop_assert!(max_abs(&(h.matrix() - &expect)) <= 1e-8 * scale);
    }

    #[test]
    fn scaling_weights_scales_hessian_metric_and_distance(
        c in 0.01..100.0f64,
        quad in prop::collection::vec(-1.0..1.0f64, 4),
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..12),
    ) {
        let domain = ParameterDomain::cube(2, -1.0, 1.0).unwrap();
        let a = DMatrix::from_column_slice(2, 2, &quad);
        let a = &a + a.transpose();
        let eval = |x: &ParameterPoint| {
            let v = DVector::from_column_slice(x.coords());
            Ok(vec![0.5 * (v.transpose() * &a * &v)[(0, 0)]])
        };
        let mu = ParameterPoint::new(vec![0.1, -0.2]);
        let delta = vec![0.02, 0.02];
        let h1 = estimate_hessian_weighted(eval, &[1.0], &mu, &delta, &domain).unwrap();
        let hc = estimate_hessian_weighted(eval, &[c], &mu, &delta, &domain).unwrap();
        let s = max_abs(h1.matrix()).max(1e-300);
        prop_assert!(max_abs(&(hc.matrix() - h1.matrix() * c)) <= 1e-12 * c * s);
        let m1 = metric_from_hessian(&h1);
        let mc = metric_from_hessian(&hc);
        prop_assert!(max_abs(&(mc.matrix() - m1.matrix() * c)) <= 1e-12 * c * s);

        let dist = |m: &MetricTensor| -> Vec<f64> {
            pts.iter().map(|&(x, y)| distance((m, &mu), (m, &ParameterPoint::new(vec![x, y]))).unwrap()).collect()
        };
        let d1 = dist(&m1);
        let dc = dist(&mc);
        for (x, y) in d1.iter().zip(&dc) {
            prop_assert!((y - c.sqrt() * x).abs() <= 1e-10 * (c.sqrt() * x).max(1e-12));
        }
        // same ordering, up to near-ties
        let mut o1: Vec<usize> = (0..d1.len()).collect();
        o1.sort_by(|&i, &j| d1[i].total_cmp(&d1[j]));
        for w in o1.windows(2) {
            prop_assert!(dc[w[0]] <= dc[w[1]] * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn nearest_matches_sorting(d in prop::collection::vec(0.0..10.0f64, 1..80), n in 1usize..40) {
        let (idx, r) = nearest(&d, n);
        let mut all: Vec<usize> = (0..d.len()).collect();
        all.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
        all.truncate(n);
        prop_assert_eq!(&idx, &all);
        prop_assert_eq!(r, d[*all.last().unwrap()]);
    }

    #[test]
    fn nearest_breaks_ties_by_index(d in prop::collection::vec(0u8..3, 1..60), n in 1usize..30) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        let (idx, _) = nearest(&d, n);
        for w in idx.windows(2) {
            prop_assert!(d[w[0]] < d[w[1]] || (d[w[0]] == d[w[1]] && w[0] < w[1]));
        }
    }

    #[test]
    fn q_of_err_stays_in_range_and_decreases(
        e1 in 1e-8..10.0f64, e2 in 1e-8..10.0f64, tol in 1e-6..0.5f64, q_min in 4usize..500, extra in 0usize..5000,
    ) {
        let q_max = q_min + extra;
        let a = q_of_err(e1, tol, q_min, q_max).unwrap();
        let b = q_of_err(e2, tol, q_min, q_max).unwrap();
        prop_assert!((q_min..=q_max).contains(&a));
        if e1 <= e2 {
            prop_assert!(a >= b);
        }
        prop_assert_eq!(q_of_err(tol / 2.0, tol, q_min, q_max).unwrap(), q_max);
        prop_assert_eq!(q_of_err(2.0, tol, q_min, q_max).unwrap(), q_min);
    }

    #[test]
    fn enrichment_picks_are_above_tol_and_mutually_compatible(
        errors in prop::collection::vec(0.0..1.0f64, 1..60),
        xs in prop::collection::vec(0.0..1.0f64, 60),
        radii in prop::collection::vec(0.0..0.3f64, 60),
        avail in prop::collection::vec(any::<bool>(), 60),
        tol in 0.0..1.0f64,
    ) {
        let n = errors.len();
        // points on a line with their own ball radii
        let excl = |c: usize, s: usize| {
            let d = (xs[c] - xs[s]).abs();
            d <= radii[c] || d <= radii[s]
        };
        let picks = select_enrichment(&errors, tol, avail[..n].to_vec(), excl);
        let mut seen = std::collections::HashSet::new();
        for (k, &i) in picks.iter().enumerate() {
            prop_assert!(seen.insert(i));
            prop_assert!(avail[i]);
            prop_assert!(errors[i] > tol);
            for &j in &picks[..k] {
                prop_assert!(!excl(i, j), "{} and {} exclude each other", i, j);
            }
        }
        // every remaining available point above tol is blocked by a pick
        for i in 0..n {
            if avail[i] && errors[i] > tol && !seen.contains(&i) {
                prop_assert!(picks.iter().any(|&j| excl(i, j)));
            }
        }
    }

    #[test]
    fn orthonormalization_of_random_spd(n in 1usize..12, e in prop::collection::vec(-1.0..1.0f64, 144)) {
        let g = psd(n, n, &e) + DMatrix::identity(n, n) * 1e-2;
        let o = orthonormalize(&g).unwrap();
        let id = &o.gamma * &g * o.gamma.transpose();
        prop_assert!(max_abs(&(id - DMatrix::identity(n, n))) <= 1e-9);
        // lower triangular with positive diagonal
        for i in 0..n {
            prop_assert!(o.gamma[(i, i)] > 0.0);
            for j in i + 1..n {
                prop_assert_eq!(o.gamma[(i, j)], 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_training_sets_are_valid(q in 4usize..300, seed in any::<u64>(), tilt in 0.0..50.0f64) {
        let domain = ParameterDomain::cube(2, -0.5, 0.5).unwrap();
        let m = MetricTensor::diagonal(&[1.0 + tilt, 1.0]);
        let field = MetricField::uniform(domain.centroid(), m, 1.0);
        let t = generate_training_set(&field, q, &domain, seed).unwrap();
        prop_assert_eq!(t.len(), q);
        for c in domain.corners() {
            prop_assert!(t.points.contains(&c));
        }
        let keys: std::collections::HashSet<_> = t.points.iter().map(|p| p.key()).collect();
        prop_assert_eq!(keys.len(), q);
        prop_assert!(t.points.iter().all(|p| domain.contains(p.coords())));
        let again = generate_training_set(&field, q, &domain, seed).unwrap();
        prop_assert_eq!(t.points, again.points);
    }
}

#[test]
fn orthonormalization_cost_is_cubic() {
    for n in [5usize, 10, 20] {
        let g = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 1.0 / (1.0 + (i as f64 - j as f64).abs()) });
        let o = orthonormalize(&g).unwrap();
        assert!(o.flops <= 6 * (n as u64).pow(3), "n = {n}: {} flops", o.flops);
    }
}
