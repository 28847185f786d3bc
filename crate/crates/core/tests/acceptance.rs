//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scdt_nls::bench::dtw::dtw_slices;
use scdt_nls::bench::metrics::{average_ranks, per_class_error, ResultTable};
use scdt_nls::bench::{
    fit_and_score, run_accuracy, run_out_distribution, CellMetrics, DtwConfig, DtwSettings, Method, MetricsReport,
    NlsSettings, OutDistOptions,
};
use scdt_nls::nls::Prediction;
use scdt_nls::signal::{read_ucr_tsv, write_ucr_tsv};
use scdt_nls::synth::{class_pair_templates, generate, Regime, SynthConfig};
use scdt_nls::transform::{apply_warp, AffineWarp};
use scdt_nls::{
    cdt, inverse_scdt, scdt, train, EnrichmentConfig, Grid, LabeledDataset, Signal, TrainedModel, TransformConfig,
};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(start: Instant, budget: Duration, detail: String) -> Outcome {
    let spent = start.elapsed();
    if spent > budget {
        return Err(format!("{detail}; took {:.1}s, budget {}s", spent.as_secs_f64(), budget.as_secs()));
    }
    Ok(format!("{detail}; {:.1}s", spent.as_secs_f64()))
}

fn err(e: scdt_nls::Error) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// 1. two-template-per-class synthetic corpus

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let templates = class_pair_templates(256).map_err(err)?;
    // 2 templates per class: 8 per template = 16 per class, 150 per template = 300 per class
    let train_ds = generate(&templates, &SynthConfig::new(Regime::InDistribution, 8, 0)).map_err(err)?;
    let test = generate(&templates, &SynthConfig::new(Regime::InDistribution, 150, 1)).map_err(err)?;
    let score = fit_and_score(&Method::Nls(NlsSettings::default()), &train_ds, &test, 0).map_err(err)?;
    let detail = format!("NLS accuracy {:.4} ({}) with 16/class", score.accuracy, score.params);
    check(score.accuracy >= 0.99, format!("{detail} < 0.99"))?;
    within_budget(start, Duration::from_secs(120), detail)
}

// ---------------------------------------------------------------------------
// 2. out-of-distribution test warps

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let opts = OutDistOptions {
        sizes: vec![16],
        ..OutDistOptions::default()
    };
    let methods = [Method::Nls(NlsSettings::default()), Method::Dtw(DtwSettings::default())];
    let report = run_out_distribution(&methods, &opts).map_err(err)?;
    let acc = |name: &str| {
        report
            .curves
            .iter()
            .find(|c| c.method == name)
            .map(|c| c.points[0].mean_accuracy)
            .ok_or_else(|| format!("no curve for {name}"))
    };
    let nls = acc("NLS")?;
    let dtw = acc("1NN-DTW")?;
    let detail = format!("NLS {nls:.4} vs 1NN-DTW {dtw:.4} at 16/class");
    check(nls >= 0.95 && nls > dtw, detail.clone())?;
    within_budget(start, Duration::from_secs(300), detail)
}

// ---------------------------------------------------------------------------
// 3. transform correctness

fn bump(t: f64, center: f64, half: f64) -> f64 {
    let x = (t - center) / half;
    if x.abs() < 1.0 {
        (1.0 - x * x).powi(2)
    } else {
        0.0
    }
}

fn is_nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn bandlimited(rng: &mut impl Rng, n: usize) -> Signal {
    let coeffs: Vec<(f64, f64)> = (1..=6)
        .map(|k| {
            let k = k as f64;
            (rng.gen_range(-1.0..1.0) / k, rng.gen_range(-1.0..1.0) / k)
        })
        .collect();
    Signal::from_fn(Grid::unit(n).unwrap(), |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = 2.0 * PI * (k + 1) as f64 * t;
                a * w.cos() + b * w.sin()
            })
            .sum()
    })
    .unwrap()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut monotone = true;

    // (a) uniform density
    let mut worst_a: f64 = 0.0;
    for (n, q) in [(1001, 1001), (257, 64), (64, 513)] {
        let uniform = Signal::unit(vec![1.0; n]).map_err(err)?;
        let cfg = TransformConfig::new(q).map_err(err)?;
        let quantiles = cdt(&uniform, &cfg).map_err(err)?;
        monotone &= is_nondecreasing(&quantiles);
        for (x, y) in quantiles.iter().zip(cfg.reference_grid()) {
            worst_a = worst_a.max((x - y).abs());
        }
    }
    check(worst_a <= 1e-9, format!("(a) uniform CDT off identity by {worst_a:e}"))?;

    // (b) composition with affine warps on [0, 2]
    let grid = Grid::new(0.0, 2.0 / 16000.0, 16001).map_err(err)?;
    let cfg = TransformConfig::new(513).map_err(err)?;
    let mut worst_b: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let center = rng.gen_range(0.8..1.2);
        let half = rng.gen_range(0.15..0.3);
        let warp = AffineWarp {
            scale: rng.gen_range(0.7..1.3),
            shift: rng.gen_range(-0.3..0.3),
        };
        let lo = warp.inverse(center - half);
        let hi = warp.inverse(center + half);
        if lo < 0.02 || hi > 1.98 {
            continue;
        }
        let s = Signal::from_fn(grid, |t| bump(t, center, half)).map_err(err)?;
        let warped = apply_warp(&s, &warp).map_err(err)?;
        let original = cdt(&s, &cfg).map_err(err)?;
        let moved = cdt(&warped, &cfg).map_err(err)?;
        monotone &= is_nondecreasing(&original) && is_nondecreasing(&moved);
        for (a, b) in moved.iter().zip(&original) {
            worst_b = worst_b.max((a - warp.inverse(*b)).abs());
        }
        done += 1;
    }
    check(worst_b <= 1e-3, format!("(b) composition error {worst_b:e}"))?;

    // (c) round trip of signed bandlimited signals
    let cfg = TransformConfig::new(512).map_err(err)?;
    let mut worst_c: f64 = 0.0;
    for _ in 0..20 {
        let s = bandlimited(&mut rng, 512);
        let f = scdt(&s, &cfg).map_err(err)?;
        monotone &= is_nondecreasing(&f.pos_quantiles) && is_nondecreasing(&f.neg_quantiles);
        let back = inverse_scdt(&f, s.grid(), &cfg).map_err(err)?;
        let diff: f64 = s.samples().iter().zip(back.samples()).map(|(a, b)| (a - b).abs()).sum();
        let mass: f64 = s.samples().iter().map(|v| v.abs()).sum();
        worst_c = worst_c.max(diff / mass);
    }
    check(worst_c <= 1e-2, format!("(c) round-trip relative L1 error {worst_c:e}"))?;

    // (d)
    check(monotone, "(d) a quantile array decreases")?;
    within_budget(
        start,
        Duration::from_secs(30),
        format!("identity {worst_a:.1e}, composition {worst_b:.1e}, round trip {worst_c:.1e}, quantiles monotone"),
    )
}

// ---------------------------------------------------------------------------
// 4. brute-force classifier oracle

/// Least-squares residual `||x - V a||^2` from the normal equations, solved by
/// symmetric elimination that drops pivots lost to linear dependence.
#[allow(clippy::needless_range_loop)]
fn normal_equations_residual(vectors: &[Vec<f64>], x: &[f64]) -> f64 {
    let m = vectors.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut g: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| dot(&vectors[i], &vectors[j])).collect()).collect();
    let mut b: Vec<f64> = vectors.iter().map(|v| dot(v, x)).collect();
    let scale = (0..m).map(|i| g[i][i]).fold(0.0, f64::max);
    let mut active = vec![false; m];
    for p in 0..m {
        if g[p][p] <= 1e-12 * scale {
            continue;
        }
        active[p] = true;
        for r in 0..m {
            if r != p && g[r][p] != 0.0 {
                let f = g[r][p] / g[p][p];
                for c in 0..m {
                    g[r][c] -= f * g[p][c];
                }
                b[r] -= f * b[p];
            }
        }
    }
    let coef: Vec<f64> = (0..m).map(|i| if active[i] { b[i] / g[i][i] } else { 0.0 }).collect();
    x.iter()
        .enumerate()
        .map(|(d, xd)| {
            let fit: f64 = vectors.iter().zip(&coef).map(|(v, c)| v[d] * c).sum();
            (xd - fit).powi(2)
        })
        .sum()
}

fn oracle_zeta(n: i32, v: &[f64]) -> Vec<f64> {
    let q = (v.len() - 2) / 2;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == q || i == 2 * q + 1 {
                x
            } else {
                x - (n as f64 * PI * x).sin() / (n.unsigned_abs() as f64 * PI)
            }
        })
        .collect()
}

fn oracle_span(members: &[&Vec<f64>], translation: bool, order: usize) -> Vec<Vec<f64>> {
    let dim = members[0].len();
    let q = (dim - 2) / 2;
    let mut out: Vec<Vec<f64>> = members.iter().map(|m| (*m).clone()).collect();
    if translation {
        out.push((0..dim).map(|i| if i == q || i == 2 * q + 1 { 0.0 } else { 1.0 }).collect());
    }
    for m in members {
        for n in 1..=order as i32 {
            out.push(oracle_zeta(-n, m));
            out.push(oracle_zeta(n, m));
        }
    }
    out
}

fn random_signed(rng: &mut impl Rng, n: usize) -> Signal {
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (sign * rng.gen_range(0.5..1.5), rng.gen_range(0.2..0.8), rng.gen_range(0.03..0.1))
        })
        .collect();
    Signal::from_fn(Grid::unit(n).unwrap(), |t| {
        bumps
            .iter()
            .map(|(a, c, w)| a * (-0.5 * ((t - c) / w).powi(2)).exp())
            .sum()
    })
    .unwrap()
}

fn oracle_predict(
    features: &[Vec<Vec<f64>>],
    x: &[f64],
    k: usize,
    translation: bool,
    order: usize,
) -> (Vec<Vec<usize>>, usize) {
    let mut orders = Vec::new();
    let mut residuals = Vec::new();
    for class in features {
        let mut ranked: Vec<(usize, f64)> = class
            .iter()
            .enumerate()
            .map(|(l, z)| (l, normal_equations_residual(&oracle_span(&[z], translation, order), x)))
            .collect();
        // exhaustive selection sort, ties to the lower index
        for i in 0..ranked.len() {
            let mut best = i;
            for j in i + 1..ranked.len() {
                if ranked[j].1 < ranked[best].1 {
                    best = j;
                }
            }
            ranked.swap(i, best);
        }
        let order_c: Vec<usize> = ranked.iter().map(|(l, _)| *l).collect();
        let chosen: Vec<&Vec<f64>> = order_c.iter().take(k).map(|&l| &class[l]).collect();
        residuals.push(normal_equations_residual(&oracle_span(&chosen, translation, order), x));
        orders.push(order_c);
    }
    let mut winner = 0;
    for (c, r) in residuals.iter().enumerate() {
        if *r < residuals[winner] {
            winner = c;
        }
    }
    (orders, winner)
}

fn class_features(model: &TrainedModel, ds: &LabeledDataset) -> Result<Vec<Vec<Vec<f64>>>, String> {
    let mut out = vec![Vec::new(); ds.class_count()];
    for (s, c) in ds.iter() {
        out[c].push(model.feature(s).map_err(err)?);
    }
    Ok(out)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 64;
    let cfg = TransformConfig::new(n).map_err(err)?;
    let mut comparisons = 0;
    for problem in 0..50 {
        let classes = rng.gen_range(2..=3);
        let mut signals = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for _ in 0..rng.gen_range(1..=5) {
                signals.push(random_signed(&mut rng, n));
                labels.push(c);
            }
        }
        let ds = LabeledDataset::with_indices(signals, labels).map_err(err)?;
        let min_size = ds.class_sizes().into_iter().min().unwrap();
        let k = rng.gen_range(1..=min_size);
        let order = rng.gen_range(0..=2);
        let translation = rng.gen_bool(0.5);
        let enrichment = EnrichmentConfig::new(translation, order).map_err(err)?;
        let model = train(&ds, &cfg, &enrichment, k, 1.0).map_err(err)?;
        let plain = train(&ds, &cfg, &EnrichmentConfig::new(false, 0).map_err(err)?, 1, 1.0).map_err(err)?;
        let features = class_features(&model, &ds)?;

        for _ in 0..5 {
            let s = random_signed(&mut rng, n);
            let x = model.feature(&s).map_err(err)?;
            let (orders, winner) = oracle_predict(&features, &x, k, translation, order);
            for (c, expected) in orders.iter().enumerate() {
                let ranked = model.rank_members(&x, c).map_err(err)?;
                let got: Vec<usize> = ranked.iter().map(|(l, _)| *l).collect();
                check(
                    &got == expected,
                    format!("problem {problem}: step 1 order of class {c} is {got:?}, oracle {expected:?}"),
                )?;
            }
            let p: Prediction = model.predict(&s).map_err(err)?;
            check(
                p.class_index == winner,
                format!("problem {problem}: predicted {} but oracle {winner}", p.class_index),
            )?;

            // nearest single-sample subspace
            let mut best = (f64::INFINITY, 0);
            for (c, class) in features.iter().enumerate() {
                for z in class {
                    let zz: f64 = z.iter().map(|v| v * v).sum();
                    let xz: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
                    let xx: f64 = x.iter().map(|v| v * v).sum();
                    let r = xx - xz * xz / zz;
                    if r < best.0 {
                        best = (r, c);
                    }
                }
            }
            let got = plain.predict(&s).map_err(err)?.class_index;
            check(
                got == best.1,
                format!("problem {problem}: k=1 N=0 predicted {got}, nearest subspace {}", best.1),
            )?;
            comparisons += 1;
        }
    }
    within_budget(
        start,
        Duration::from_secs(60),
        format!("{comparisons} test signals over 50 problems agree with the oracle"),
    )
}

// ---------------------------------------------------------------------------
// 5. translation absorption

fn positive_shape(rng: &mut impl Rng, class: usize) -> impl Fn(f64) -> f64 {
    let center = rng.gen_range(0.42..0.58);
    let a = rng.gen_range(0.08..0.12);
    let b = rng.gen_range(0.05..0.07);
    move |t: f64| match class {
        0 => bump(t, center, 2.0 * a),
        1 => bump(t, center - a, b) + bump(t, center + a, b),
        _ => bump(t, center, 2.0 * a) * (1.0 + 4.0 * (t - center + 2.0 * a)),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = Grid::unit(256).map_err(err)?;
    let mut signals = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        for _ in 0..8 {
            signals.push(Signal::from_fn(grid, positive_shape(&mut rng, c)).map_err(err)?);
            labels.push(c);
        }
    }
    let ds = LabeledDataset::with_indices(signals, labels).map_err(err)?;
    let cfg = TransformConfig::new(256).map_err(err)?;
    let model = train(&ds, &cfg, &EnrichmentConfig::new(true, 1).map_err(err)?, 3, 0.99).map_err(err)?;

    let mut checked = 0;
    for i in 0..20 {
        let s = Signal::from_fn(grid, positive_shape(&mut rng, i % 3)).map_err(err)?;
        let base = model.predict(&s).map_err(err)?.class_index;
        for mu in [-0.1, -0.05, -0.02, 0.02, 0.05, 0.1] {
            let moved = apply_warp(&s, &AffineWarp::translation(mu)).map_err(err)?;
            let got = model.predict(&moved).map_err(err)?.class_index;
            check(got == base, format!("signal {i}: class {base} became {got} after shift {mu}"))?;
            checked += 1;
        }
    }
    within_budget(start, Duration::from_secs(30), format!("{checked} shifted predictions unchanged"))
}

// ---------------------------------------------------------------------------
// 6. metrics algebra

struct Expected {
    table: ResultTable,
    pce: Vec<Vec<f64>>,
    ranks: Vec<Vec<f64>>,
    mpce: Vec<f64>,
    mean_rank: Vec<f64>,
    geometric: Vec<f64>,
    wins: Vec<usize>,
}

fn fabricated_tables() -> Vec<Expected> {
    let table = |methods: &[&str], class_counts: Vec<usize>, accuracy: Vec<Vec<f64>>| ResultTable {
        methods: methods.iter().map(|s| s.to_string()).collect(),
        datasets: (0..class_counts.len()).map(|d| format!("d{d}")).collect(),
        class_counts,
        accuracy,
    };
    vec![
        Expected {
            table: table(&["A", "B"], vec![2, 4], vec![vec![0.75, 0.5], vec![0.5, 0.5]]),
            pce: vec![vec![0.125, 0.125], vec![0.25, 0.125]],
            ranks: vec![vec![1.0, 1.5], vec![2.0, 1.5]],
            mpce: vec![0.125, 0.1875],
            mean_rank: vec![1.25, 1.75],
            geometric: vec![1.5f64.sqrt(), 3.0f64.sqrt()],
            wins: vec![2, 1],
        },
        Expected {
            table: table(
                &["A", "B", "C"],
                vec![2, 2, 8],
                vec![vec![1.0, 0.75, 0.5], vec![0.75, 0.75, 0.75], vec![0.5, 0.25, 0.875]],
            ),
            pce: vec![
                vec![0.0, 0.125, 0.0625],
                vec![0.125, 0.125, 0.03125],
                vec![0.25, 0.375, 0.015625],
            ],
            ranks: vec![vec![1.0, 1.5, 3.0], vec![2.0, 1.5, 2.0], vec![3.0, 3.0, 1.0]],
            mpce: vec![0.1875 / 3.0, 0.28125 / 3.0, 0.640625 / 3.0],
            mean_rank: vec![5.5 / 3.0, 5.5 / 3.0, 7.0 / 3.0],
            geometric: vec![4.5f64.cbrt(), 6.0f64.cbrt(), 9.0f64.cbrt()],
            wins: vec![2, 1, 1],
        },
        Expected {
            table: table(&["A", "B", "C", "D"], vec![5], vec![vec![0.5], vec![0.5], vec![0.5], vec![0.75]]),
            pce: vec![vec![0.1], vec![0.1], vec![0.1], vec![0.05]],
            ranks: vec![vec![3.0], vec![3.0], vec![3.0], vec![1.0]],
            mpce: vec![0.1, 0.1, 0.1, 0.05],
            mean_rank: vec![3.0, 3.0, 3.0, 1.0],
            geometric: vec![3.0, 3.0, 3.0, 1.0],
            wins: vec![0, 0, 0, 1],
        },
    ]
}

fn criterion_6() -> Outcome {
    for (t, e) in fabricated_tables().into_iter().enumerate() {
        check(e.table.per_class_errors() == e.pce, format!("table {t}: PCE {:?}", e.table.per_class_errors()))?;
        check(e.table.ranks() == e.ranks, format!("table {t}: ranks {:?}", e.table.ranks()))?;
        let summary = e.table.summarize().map_err(err)?;
        for (m, s) in summary.iter().enumerate() {
            check(s.mpce == e.mpce[m], format!("table {t} method {m}: MPCE {} != {}", s.mpce, e.mpce[m]))?;
            check(
                s.mean_rank == e.mean_rank[m],
                format!("table {t} method {m}: mean rank {} != {}", s.mean_rank, e.mean_rank[m]),
            )?;
            // exp(mean ln r) and a direct root differ in the last bits at most
            check(
                (s.geometric_mean_rank - e.geometric[m]).abs() <= 4.0 * f64::EPSILON * e.geometric[m],
                format!("table {t} method {m}: geometric rank {} != {}", s.geometric_mean_rank, e.geometric[m]),
            )?;
            check(s.wins == e.wins[m], format!("table {t} method {m}: wins {} != {}", s.wins, e.wins[m]))?;
        }

        // the same numbers through per-cell reports
        let mut cells = Vec::new();
        for (m, method) in e.table.methods.iter().enumerate() {
            for (d, dataset) in e.table.datasets.iter().enumerate() {
                let score = scdt_nls::bench::harness::Score {
                    accuracy: e.table.accuracy[m][d],
                    train_seconds: 0.0,
                    predict_seconds: 0.0,
                    params: String::new(),
                };
                let cell = CellMetrics::new(method, dataset, e.table.class_counts[d], &score);
                check(cell.pce == e.pce[m][d], format!("table {t}: cell PCE {}", cell.pce))?;
                cells.push(cell);
            }
        }
        let report = MetricsReport::from_cells(cells).map_err(err)?;
        check(report.methods == summary, format!("table {t}: report summary differs"))?;
    }
    check(average_ranks(&[0.9, 0.9, 0.8, 0.95]) == vec![2.5, 2.5, 4.0, 1.0], "average_ranks")?;
    check(per_class_error(0.5, 4) == 0.125, "per_class_error")?;
    Ok("3 fabricated tables match hand-computed PCE, MPCE, ranks and wins".into())
}

// ---------------------------------------------------------------------------
// 7. DTW

fn brute_dtw(a: &[f64], b: &[f64], window: usize) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, w: usize, acc: f64, best: &mut f64) {
        if i.abs_diff(j) > w {
            return;
        }
        let acc = acc + (a[i] - b[j]).powi(2);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, w, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, w, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, w, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, window, 0.0, &mut best);
    best.sqrt()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = 0;
    for n in 1..=6 {
        for _ in 0..40 {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for window in 0..n {
                let fast = dtw_slices(&a, &b, &DtwConfig { window }).map_err(err)?;
                let slow = brute_dtw(&a, &b, window);
                check((fast - slow).abs() <= 1e-12, format!("n={n} r={window}: {fast} vs brute force {slow}"))?;
            }
            let euclid = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let diagonal = dtw_slices(&a, &b, &DtwConfig { window: 0 }).map_err(err)?;
            check((diagonal - euclid).abs() <= 1e-12, format!("n={n}: r=0 gives {diagonal}, Euclidean {euclid}"))?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs of length 1..6 match exhaustive alignment for every band; r=0 is Euclidean"))
}

// ---------------------------------------------------------------------------
// 8. UCR pair through the harness and the CLI

fn stand_in_pair(dir: &Path, name: &str, seed: u64, labels: [f64; 3]) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::unit(96).map_err(err)?;
    let make = |count: usize, rng: &mut ChaCha8Rng| -> Result<LabeledDataset, String> {
        let mut signals = Vec::new();
        let mut idx = Vec::new();
        for c in 0..3 {
            for _ in 0..count {
                signals.push(Signal::from_fn(grid, positive_shape(rng, c)).map_err(err)?);
                idx.push(c);
            }
        }
        LabeledDataset::new(signals, idx, labels.to_vec()).map_err(err)
    };
    let train_ds = make(6, &mut rng)?;
    let test = make(10, &mut rng)?;
    write_ucr_tsv(&train_ds, dir.join(format!("{name}_TRAIN.tsv"))).map_err(err)?;
    write_ucr_tsv(&test, dir.join(format!("{name}_TEST.tsv"))).map_err(err)
}

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["scdt-nls"];
    argv.extend_from_slice(args);
    scdt_nls::cli::main_with_args(argv)
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    stand_in_pair(dir.path(), "Alpha", 81, [1.0, 2.0, 3.0])?;
    stand_in_pair(dir.path(), "Beta", 82, [-1.0, 0.0, 7.0])?;
    let path = |f: &str| dir.path().join(f).to_string_lossy().into_owned();

    // library path
    let train_ds = read_ucr_tsv(path("Alpha_TRAIN.tsv")).map_err(err)?;
    let test = read_ucr_tsv(path("Alpha_TEST.tsv")).map_err(err)?;
    let methods = [Method::Nls(NlsSettings::default()), Method::Dtw(DtwSettings::default())];
    let report = run_accuracy(&methods, "Alpha", &train_ds, &test, 0).map_err(err)?;
    check(report.cells.len() == 2, "library report needs one cell per method")?;

    // CLI, two datasets, all three output formats
    let json_out = path("report.json");
    let table_out = path("report.txt");
    let csv_out = path("report.csv");
    let mut common = vec![
        "benchmark".to_string(),
        "--train".into(),
        path("Alpha_TRAIN.tsv"),
        "--test".into(),
        path("Alpha_TEST.tsv"),
        "--train".into(),
        path("Beta_TRAIN.tsv"),
        "--test".into(),
        path("Beta_TEST.tsv"),
    ];
    common.extend(["--seed".into(), "3".into()]);
    for (format, out) in [("json", &json_out), ("table", &table_out), ("csv", &csv_out)] {
        let mut args: Vec<&str> = common.iter().map(String::as_str).collect();
        args.extend(["--format", format, "--out", out.as_str()]);
        let code = cli(&args);
        check(code == 0, format!("benchmark --format {format} exited with {code}"))?;
    }

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_out).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let cells = json["cells"].as_array().ok_or("no cells")?;
    check(cells.len() == 4, format!("expected 4 cells, got {}", cells.len()))?;
    for c in cells {
        for key in ["method", "dataset", "class_count", "accuracy", "error", "pce", "train_seconds", "predict_seconds"] {
            check(!c[key].is_null(), format!("cell lacks {key}"))?;
        }
    }
    let summaries = json["methods"].as_array().ok_or("no method summaries")?;
    check(summaries.len() == 2, "expected 2 method summaries")?;
    for s in summaries {
        for key in ["method", "wins", "mean_rank", "geometric_mean_rank", "mpce"] {
            check(!s[key].is_null(), format!("summary lacks {key}"))?;
        }
        let name = s["method"].as_str().unwrap_or_default();
        let pces: Vec<f64> = cells
            .iter()
            .filter(|c| c["method"] == name)
            .map(|c| c["pce"].as_f64().unwrap_or(f64::NAN))
            .collect();
        let mpce = pces.iter().sum::<f64>() / pces.len() as f64;
        check(
            (s["mpce"].as_f64().unwrap_or(f64::NAN) - mpce).abs() < 1e-15,
            format!("{name}: MPCE disagrees with its cells"),
        )?;
    }
    check(!json["environment"]["os"].is_null(), "report lacks environment metadata")?;

    let table = std::fs::read_to_string(&table_out).map_err(|e| e.to_string())?;
    let first_cells: Vec<&str> = table.lines().map(|l| l.split("  ").next().unwrap_or("").trim()).collect();
    for row in ["Dataset", "Alpha", "Beta", "Win", "AVG arithmetic ranking", "AVG geometric ranking", "MPCE"] {
        check(first_cells.contains(&row), format!("table lacks row {row}"))?;
    }

    let csv = std::fs::read_to_string(&csv_out).map_err(|e| e.to_string())?;
    let mut lines = csv.lines();
    check(
        lines.next() == Some("method,dataset,size,repeat,accuracy,train_s,predict_s"),
        "csv header",
    )?;
    check(lines.count() == 4, "csv needs one row per method and dataset")?;
    Ok("UCR stand-in pairs produce accuracy, win, rank and MPCE columns as JSON, table and CSV".into())
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("proof-of-concept accuracy", criterion_1),
        ("out-of-distribution robustness", criterion_2),
        ("transform correctness", criterion_3),
        ("oracle equivalence", criterion_4),
        ("translation invariance", criterion_5),
        ("metrics algebra", criterion_6),
        ("DTW baseline", criterion_7),
        ("UCR harness output", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
