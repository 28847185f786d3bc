use proptest::prelude::*;

use scdt_nls::bench::dtw::dtw_slices;
use scdt_nls::bench::metrics::average_ranks;
use scdt_nls::bench::DtwConfig;
use scdt_nls::signal::stratified_split;
use scdt_nls::subspace::{orthonormalize, zeta};
use scdt_nls::transform::{apply_warp, AffineWarp};
use scdt_nls::{cdt, scdt, Grid, LabeledDataset, Signal, TransformConfig};

fn signed_samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn trapezoid(v: &[f64], dt: f64) -> f64 {
    v.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scdt_quantiles_are_monotone_and_masses_match(samples in signed_samples(48), q in 8usize..80) {
        let s = Signal::unit(samples.clone()).unwrap();
        let f = scdt(&s, &TransformConfig::new(q).unwrap()).unwrap();
        for part in [&f.pos_quantiles, &f.neg_quantiles] {
            prop_assert_eq!(part.len(), q);
            prop_assert!(part.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(part.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
        let dt = s.grid().dt;
        let pos: Vec<f64> = samples.iter().map(|v| v.max(0.0)).collect();
        let neg: Vec<f64> = samples.iter().map(|v| (-v).max(0.0)).collect();
        prop_assert!((f.pos_mass - trapezoid(&pos, dt)).abs() <= 1e-12 * (1.0 + f.pos_mass));
        prop_assert!((f.neg_mass - trapezoid(&neg, dt)).abs() <= 1e-12 * (1.0 + f.neg_mass));
    }

    #[test]
    fn scaling_changes_masses_only(samples in signed_samples(40), scale in 0.1..10.0f64) {
        let cfg = TransformConfig::new(40).unwrap();
        let a = scdt(&Signal::unit(samples.clone()).unwrap(), &cfg).unwrap();
        let b = scdt(&Signal::unit(samples.iter().map(|v| v * scale).collect()).unwrap(), &cfg).unwrap();
        for (x, y) in a.pos_quantiles.iter().zip(&b.pos_quantiles).chain(a.neg_quantiles.iter().zip(&b.neg_quantiles)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!((b.pos_mass - scale * a.pos_mass).abs() <= 1e-9 * (1.0 + b.pos_mass));
        prop_assert!((b.neg_mass - scale * a.neg_mass).abs() <= 1e-9 * (1.0 + b.neg_mass));
    }

    #[test]
    fn grid_shift_moves_quantiles(center in 0.35..0.65f64, width in 0.03..0.09f64, steps in -20i32..20) {
        // support stays at least 0.08 from both ends, farther than any shift
        let grid = Grid::unit(401).unwrap();
        let s = Signal::from_fn(grid, |t| (-0.5 * ((t - center) / width).powi(2)).exp() * f64::from(((t - center).abs() < 3.0 * width) as u8)).unwrap();
        let mu = f64::from(steps) * grid.dt;
        let moved = apply_warp(&s, &AffineWarp::translation(mu)).unwrap();
        let cfg = TransformConfig::new(101).unwrap();
        let a = cdt(&s, &cfg).unwrap();
        let b = cdt(&moved, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - x - mu).abs() < 1e-9, "{} vs {}", y - x, mu);
        }
    }

    #[test]
    fn dtw_is_symmetric_and_bounded_by_euclidean(a in signed_samples(12), b in signed_samples(12), window in 0usize..12) {
        let cfg = DtwConfig { window };
        let ab = dtw_slices(&a, &b, &cfg).unwrap();
        let ba = dtw_slices(&b, &a, &cfg).unwrap();
        let euclid = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab >= 0.0 && ab <= euclid + 1e-12);
        prop_assert_eq!(dtw_slices(&a, &a, &cfg).unwrap(), 0.0);
        // a wider band never costs more
        if window + 1 < a.len() {
            let wider = dtw_slices(&a, &b, &DtwConfig { window: window + 1 }).unwrap();
            prop_assert!(wider <= ab + 1e-12);
        }
    }

    #[test]
    fn average_ranks_sum_to_triangle_number(scores in prop::collection::vec(prop::sample::select(vec![0.1, 0.5, 0.7, 0.9, 1.0]), 1..12)) {
        let ranks = average_ranks(&scores);
        let n = scores.len() as f64;
        prop_assert!((ranks.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        for (i, r) in ranks.iter().enumerate() {
            prop_assert!(*r >= 1.0 && *r <= n);
            let better = scores.iter().filter(|&&s| s > scores[i]).count() as f64;
            let equal = scores.iter().filter(|&&s| s == scores[i]).count() as f64;
            prop_assert_eq!(*r, better + (equal + 1.0) / 2.0);
        }
    }

    #[test]
    fn opposite_zetas_sum_to_twice_input(v in prop::collection::vec(0.0..1.0f64, 10), n in 1i32..6) {
        let plus = zeta(n, &v).unwrap();
        let minus = zeta(-n, &v).unwrap();
        for ((p, m), x) in plus.iter().zip(&minus).zip(&v) {
            prop_assert!((p + m - 2.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn zeta_is_increasing_on_the_unit_interval(n in 1i32..8, x in 0.0..0.99f64) {
        // layout with Q = 2; coordinate 0 is a quantile
        let a = zeta(n, &[x, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap()[0];
        let b = zeta(n, &[x + 0.01, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap()[0];
        prop_assert!(b > a);
    }

    #[test]
    fn residual_is_bounded_and_projection_idempotent(
        vectors in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 9), 1..5),
        x in prop::collection::vec(-1.0..1.0f64, 9),
    ) {
        prop_assume!(vectors.iter().flatten().any(|&v| v.abs() > 1e-3));
        let basis = orthonormalize(&vectors, 1.0).unwrap();
        prop_assert!(basis.orthonormality_error() < 1e-10);
        let r = basis.residual(&x).unwrap();
        let norm: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!(r >= 0.0 && r <= norm + 1e-12);
        let p = basis.project(&x).unwrap();
        let pp = basis.project(&p).unwrap();
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        for v in &vectors {
            let scale: f64 = v.iter().map(|a| a * a).sum();
            prop_assert!(basis.residual(v).unwrap() <= 1e-18 + 1e-12 * scale);
        }
    }

    #[test]
    fn stratified_split_partitions_each_class(sizes in prop::collection::vec(2usize..9, 2..4), fraction in 0.1..0.5f64, seed in 0u64..1000) {
        let mut signals = Vec::new();
        let mut labels = Vec::new();
        for (c, &count) in sizes.iter().enumerate() {
            for i in 0..count {
                signals.push(Signal::unit(vec![c as f64 + i as f64 * 0.01 + 1.0; 8]).unwrap());
                labels.push(c);
            }
        }
        let ds = LabeledDataset::with_indices(signals, labels).unwrap();
        if let Ok((fit, val)) = stratified_split(&ds, fraction, seed) {
            prop_assert_eq!(fit.len() + val.len(), ds.len());
            for (c, &count) in sizes.iter().enumerate() {
                let f = fit.class_sizes()[c];
                let v = val.class_sizes()[c];
                prop_assert_eq!(f + v, count);
                prop_assert!(f >= 1 && v >= 1);
            }
            prop_assert_eq!(stratified_split(&ds, fraction, seed).unwrap().1, val);
        }
    }
}
