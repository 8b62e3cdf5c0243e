//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The full-data criterion needs a converted RadioML 2016.10A file; point
//! `GAMC_RADIOML` at it to run that section.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gamc::gbt::{self, SplitMode, TrainParams};
use gamc::graphify::{spectral_pipeline, GraphConfig, Metric, StGraph};
use gamc::lnt::{ovr_gradient, ovr_loss, LntBlock, LntConfig};
use gamc::pipeline::{
    complexity_report, evaluate_features, fit_from_features, stratified_split, FeatureExtractor, FeatureTable,
    GamcBundle, PipelineConfig, SynthRecipe,
};
use gamc::statfeat::cumulants;
use gamc::{frames, Dataset64, IqFrame64, ModulationScheme, SynthConfig};
use ndarray::{array, Array2, Axis};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    skipped: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, skipped: false, detail: detail.into() }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Self { pass: true, skipped: true, detail: detail.into() }
    }
}

fn random_frame(rng: &mut ChaCha8Rng, seed: u64) -> IqFrame64 {
    let scheme = ModulationScheme::ALL[rng.random_range(0..11)];
    let snr = -20 + 2 * rng.random_range(0..20);
    frames::synthesize_frame(scheme, f64::from(snr), 128, &SynthConfig::default(), seed).unwrap()
}

// ---------------------------------------------------------------------------

fn spectral_correctness() -> Outcome {
    let start = Instant::now();
    let k2 = StGraph::from_spatial(array![[0.0, 1.0], [1.0, 0.0]], 0.0, 1.0).unwrap();
    let p3 = StGraph::from_spatial(array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], 0.0, 1.0).unwrap();
    let close = |got: &[f64], want: &[f64]| got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-9);
    let small_ok = close(&k2.eigenvalues, &[0.0, 2.0]) && close(&p3.eigenvalues, &[0.0, 1.0, 2.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let configs: Vec<GraphConfig> =
        [4usize, 8, 16, 32].iter().flat_map(|&k| Metric::BOTH.map(|m| GraphConfig::new(k, m))).collect();
    let (mut lo, mut hi, mut worst_min) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..1000u64 {
        let f = frames::normalize_frame(&random_frame(&mut rng, 1_000_000 + i)).unwrap();
        let g = spectral_pipeline(&f, &configs[i as usize % configs.len()]).unwrap();
        lo = lo.min(g.eigenvalues[0]);
        hi = hi.max(*g.eigenvalues.last().unwrap());
        worst_min = worst_min.max(g.eigenvalues[0]);
    }
    let range_ok = lo >= -1e-8 && hi <= 2.0 + 1e-8 && worst_min <= 1e-8;
    let took = start.elapsed();
    Outcome::check(
        small_ok && range_ok && took < Duration::from_secs(60),
        format!(
            "K2 {:?}, P3 {:?}; 1000 frames: eigenvalues in [{lo:.3e}, {hi:.12}], largest minimum {worst_min:.3e}; {took:.1?}",
            k2.eigenvalues, p3.eigenvalues
        ),
    )
}

fn invariance_suite() -> Outcome {
    let start = Instant::now();
    let fx = FeatureExtractor::new(Default::default(), Default::default());
    let g = fx.graph_dim();
    let ranges = fx.stat.family_ranges();
    let amp = ranges.iter().find(|r| r.0 == "amp").unwrap().1.clone();
    let phase = ranges.iter().find(|r| r.0 == "phase").unwrap().1.clone();
    // magnitude-only amplitude slots: histogram, quantiles, tail rates (the 2-D I/Q grid follows them)
    let magnitudes = fx.stat.amp_bins + fx.stat.cdf_quantiles.len() + fx.stat.tail_thresholds.len();
    let amp = amp.start..amp.start + magnitudes;
    // resultant length and rotational moments lead the phase family
    let moments = phase.start..phase.start + 1 + fx.stat.rotational_orders.len();
    let invariant: Vec<usize> =
        (0..g).chain(amp.map(|i| g + i)).chain(moments.map(|i| g + i)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut rot_err, mut scale_err) = (0.0f64, 0.0f64);
    for i in 0..200u64 {
        let f = random_frame(&mut rng, 2_000_000 + i);
        let base = fx.extract(&f).unwrap();
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rot = fx.extract(&f.rotated(theta)).unwrap();
        for &j in &invariant {
            rot_err = rot_err.max((rot[j] - base[j]).abs());
        }
        let c = [0.01, 0.5, 3.7, 250.0][i as usize % 4];
        let scaled = fx.extract(&f.scaled(c)).unwrap();
        for (a, b) in scaled.iter().zip(&base) {
            scale_err = scale_err.max((a - b).abs());
        }
    }
    let took = start.elapsed();
    Outcome::check(
        rot_err <= 1e-6 && scale_err <= 1e-6 && took < Duration::from_secs(60),
        format!(
            "200 frames: max change under rotation {rot_err:.2e} over {} invariant slots, under scaling {scale_err:.2e} over all {} slots; {took:.1?}",
            invariant.len(),
            fx.dim()
        ),
    )
}

fn cumulant_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut symbols = |scheme| {
        let alphabet = frames::constellation(scheme).unwrap();
        (0..100_000).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect::<Vec<_>>()
    };
    let bpsk = cumulants(&symbols(ModulationScheme::Bpsk)).c40;
    let qpsk = cumulants(&symbols(ModulationScheme::Qpsk)).c40;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let gauss: Vec<Complex<f64>> = (0..1_000_000)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(re * s, im * s)
        })
        .collect();
    let g = cumulants(&gauss).c40.norm();
    Outcome::check(
        (bpsk.re + 2.0).abs() <= 0.02 && bpsk.im.abs() <= 0.02 && (qpsk.re + 1.0).abs() <= 0.02 && qpsk.im.abs() <= 0.02 && g <= 0.02,
        format!("C40 BPSK {:.4}{:+.4}j, QPSK {:.4}{:+.4}j, |C40| Gaussian {g:.4}", bpsk.re, bpsk.im, qpsk.re, qpsk.im),
    )
}

/// Root split by exhaustive enumeration of every (feature, midpoint) candidate.
fn brute_force_root(x: &Array2<f64>, y: &[usize], c: usize, p: &TrainParams) -> Option<(usize, f64)> {
    let n = y.len();
    let prior0 = (y.iter().filter(|&&v| v == 0).count() as f64 / n as f64).max(1e-6);
    let total: f64 = (0..c).map(|k| (y.iter().filter(|&&v| v == k).count() as f64 / n as f64).max(1e-6)).sum();
    let p0 = prior0 / total;
    let g: Vec<f64> = y.iter().map(|&v| p0 - f64::from(u8::from(v == 0))).collect();
    let h = (2.0 * p0 * (1.0 - p0)).max(1e-16);
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(j).to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) * 0.5;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                if x[[i, j]] <= t {
                    gl += g[i];
                    hl += h;
                } else {
                    gr += g[i];
                    hr += h;
                }
            }
            if hl < p.min_child_weight || hr < p.min_child_weight {
                continue;
            }
            let l = p.reg_lambda;
            let gain = 0.5 * (gl * gl / (hl + l) + gr * gr / (hr + l) - (gl + gr).powi(2) / (hl + hr + l)) - p.gamma;
            let better = match best {
                None => true,
                Some((b, _, _)) => gain > b + 1e-10 * b.abs().max(1.0),
            };
            if better {
                best = Some((gain, j, t));
            }
        }
    }
    best.filter(|b| b.0 > 0.0).map(|b| (b.1, b.2))
}

fn split_gain_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut agree = 0;
    let mut splits = 0;
    for case in 0..50 {
        let n = rng.random_range(8..=64);
        let f = rng.random_range(1..=8);
        let c = rng.random_range(2..=4);
        let x = Array2::from_shape_fn((n, f), |_| (rng.random::<f64>() * 20.0).round() / 10.0);
        let mut y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        y[0] = 0;
        y[1] = 1;
        let params = TrainParams {
            n_estimators: 1,
            subsample: 1.0,
            colsample_bytree: 1.0,
            split_mode: SplitMode::Exact,
            min_child_weight: [0.0, 1.0, 3.0][case % 3],
            rng_seed: case as u64,
            ..TrainParams::expert_table()
        };
        let model = gbt::fit(x.view(), &y, c, &params).unwrap();
        let ours = model.tree(0, 0).root_split();
        let oracle = brute_force_root(&x, &y, c, &params);
        splits += usize::from(oracle.is_some());
        agree += usize::from(ours == oracle);
    }
    Outcome::check(agree == 50, format!("{agree}/50 first-tree splits match the exhaustive oracle ({splits} non-trivial)"))
}

fn logistic_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (n, d) = (60, 7);
    let z = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let l2 = 1e-2;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for point in 0..10 {
        let class = point % 3;
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-2.0..2.0);
        let (gw, gb) = ovr_gradient(z.view(), &y, class, &w, b, l2);
        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::with_capacity(d + 1);
        for k in 0..=d {
            let eval = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if k < d {
                    w2[k] += delta;
                } else {
                    b2 += delta;
                }
                ovr_loss(z.view(), &y, class, &w2, b2, l2)
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst = worst.max(diff / scale);
    }
    Outcome::check(worst < 1e-5, format!("max relative gradient error over 10 points: {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// Desk-scale fixture, shared by the end-to-end and simplex criteria.

struct Desk {
    train_rows: usize,
    test_x: Array2<f64>,
    test_y: Vec<usize>,
    test_snr: Vec<i32>,
    moe: GamcBundle<f64>,
    single: GamcBundle<f64>,
    feature_time: Duration,
    moe_time: Duration,
    single_time: Duration,
}

fn desk_config(q: usize) -> PipelineConfig {
    PipelineConfig {
        q,
        data: gamc::pipeline::DataSource { path: None, synthetic: Some(SynthRecipe::default()) },
        ..PipelineConfig::default()
    }
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let cfg = desk_config(3);
        let start = Instant::now();
        let ds: Dataset64 = cfg.load_data().unwrap();
        let (train, test) = stratified_split(&ds, cfg.train_fraction, cfg.split_seed);
        let fx = FeatureExtractor::new(cfg.graph.clone(), cfg.stat.clone());
        let x = fx.extract_matrix(&ds.frames).unwrap();
        let feature_time = start.elapsed();
        let labels: Vec<usize> = ds.frames.iter().map(|f| f.label).collect();
        let snr: Vec<i32> = ds.frames.iter().map(|f| f.snr_db).collect();
        let pick = |idx: &[usize]| {
            (x.select(Axis(0), idx), idx.iter().map(|&i| labels[i]).collect::<Vec<_>>(), idx.iter().map(|&i| snr[i]).collect::<Vec<_>>())
        };
        let (train_x, train_y, train_snr) = pick(&train);
        let (test_x, test_y, test_snr) = pick(&test);
        let table = FeatureTable { x: train_x.view(), labels: &train_y, snr_db: &train_snr };
        let t = Instant::now();
        let moe = fit_from_features(&cfg, &table, &ds.label_table).unwrap();
        let moe_time = t.elapsed();
        let t = Instant::now();
        let single = fit_from_features(&desk_config(1), &table, &ds.label_table).unwrap();
        let single_time = t.elapsed();
        Desk { train_rows: train_y.len(), test_x, test_y, test_snr, moe, single, feature_time, moe_time, single_time }
    })
}

fn desk_end_to_end() -> Outcome {
    let d = desk();
    let t = Instant::now();
    let table = FeatureTable { x: d.test_x.view(), labels: &d.test_y, snr_db: &d.test_snr };
    let moe = evaluate_features(&d.moe, &table).unwrap();
    let single = evaluate_features(&d.single, &table).unwrap();
    let eval_time = t.elapsed();
    let total = d.feature_time + d.moe_time + d.single_time + eval_time;
    let hi = moe.accuracy_at(18).unwrap();
    let lo = moe.accuracy_at(-10).unwrap();
    let pass = hi >= 0.85 && hi - lo >= 0.25 && moe.overall_accuracy >= single.overall_accuracy - 0.01 && total < Duration::from_secs(15 * 60);
    let curve: Vec<String> = moe.per_snr.iter().map(|(s, a, _)| format!("{s}:{:.1}", 100.0 * a)).collect();
    Outcome::check(
        pass,
        format!(
            "acc@18 {:.2}%, acc@-10 {:.2}% (gap {:.1} pts), Q=3 overall {:.2}% vs Q=1 {:.2}%; per-SNR [{}]; train rows {}, test rows {}; features {:.0?}, Q=3 fit {:.0?}, Q=1 fit {:.0?}, eval {:.0?}, total {:.0?}",
            100.0 * hi,
            100.0 * lo,
            100.0 * (hi - lo),
            100.0 * moe.overall_accuracy,
            100.0 * single.overall_accuracy,
            curve.join(" "),
            d.train_rows,
            d.test_y.len(),
            d.feature_time,
            d.moe_time,
            d.single_time,
            eval_time,
            total
        ),
    )
}

fn simplex_contracts() -> Outcome {
    let d = desk();
    let b = &d.moe;
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let base = &d.test_x;
    let mut worst = 0.0f64;
    let mut negative = false;
    let mut onehot_exact = true;
    let mut rows = 0usize;
    let mut track = |p: &[f64]| {
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        negative |= p.iter().any(|&v| v < 0.0);
    };
    while rows < 10_000 {
        let src = base.row(rows % base.nrows());
        let x: Vec<f64> = if rows < base.nrows() {
            src.to_vec()
        } else {
            src.iter().map(|&v| v * (1.0 + 0.05 * rng.random_range(-1.0..1.0)) + 0.01 * rng.random_range(-1.0..1.0)).collect()
        };
        track(&b.aux.predict_proba(&x).unwrap());
        let w = b.moe.gate(&x).unwrap();
        track(&w);
        for e in &b.moe.experts {
            for st in &e.lnt.stages {
                track(&st.probabilities(&x).unwrap());
            }
            track(&e.predict_proba(&x).unwrap());
        }
        track(&b.moe.predict_with_weights(&x, &w).unwrap());
        if rows % 50 == 0 {
            let j = rows / 50 % b.moe.experts.len();
            let mut hot = vec![0.0; b.moe.experts.len()];
            hot[j] = 1.0;
            onehot_exact &= b.moe.predict_with_weights(&x, &hot).unwrap() == b.moe.experts[j].predict_proba(&x).unwrap();
        }
        rows += 1;
    }
    Outcome::check(
        worst <= 1e-9 && !negative && onehot_exact,
        format!("{rows} rows: max |sum - 1| = {worst:.2e}, negative entries: {negative}, one-hot reproduces expert: {onehot_exact}"),
    )
}

fn complexity_criterion() -> Outcome {
    // 5-band model on the full 11-class, 20-SNR synthetic grid (four SNRs per band),
    // large enough that expert trees grow the way they do on the real archive
    let recipe = SynthRecipe {
        schemes: ModulationScheme::ALL.iter().map(|s| s.name().to_string()).collect(),
        snrs: (-20..=18).step_by(2).collect(),
        per_cell: 40,
        ..SynthRecipe::default()
    };
    let cfg = PipelineConfig {
        q: 5,
        data: gamc::pipeline::DataSource { path: None, synthetic: Some(recipe) },
        ..PipelineConfig::default()
    };
    let out = gamc::train_pipeline::<f64>(&cfg).unwrap();
    let r = complexity_report(&out.bundle, 128);
    let sums_exact = r.total.parameters == r.feature_extraction.parameters + r.lnt.parameters + r.moe.parameters
        && r.total.flops == r.feature_extraction.flops + r.lnt.flops + r.moe.flops;
    let c = out.bundle.num_classes();
    let closed_form = out.bundle.moe.experts.iter().zip(&r.lnt_per_expert).all(|(e, &got)| {
        got as usize == e.lnt.stages.iter().map(|s| s.indices.len() + 1).sum::<usize>() * c
    });

    // the unclipped sizes need at least 512 raw features
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let wide = Array2::from_shape_fn((66, 600), |_| rng.random::<f64>());
    let y: Vec<usize> = (0..66).map(|i| i % 11).collect();
    let imp: Vec<f64> = (0..600).map(|i| (600 - i) as f64).collect();
    let block = LntBlock::fit(wide.view(), &y, 11, &imp, &LntConfig { max_iter: 5, ..LntConfig::default() }).unwrap();
    let wide_ok = block.parameter_count() == 10_604;

    let total_k = r.total.parameters as f64 / 1e3;
    let within = total_k >= 177.6 / 2.0 && total_k <= 177.6 * 2.0;
    Outcome::check(
        sums_exact && closed_form && wide_ok && within,
        format!(
            "Total = FE + LNT + MoE exactly: {sums_exact}; LNT per expert {:?} matches closed form: {closed_form}; sizes 64/128/256/512 with C=11 give {}; 5-MoE parameters {total_k:.1} K (LNT {:.1} K, MoE {:.1} K), FLOPs {:.1} K",
            r.lnt_per_expert,
            block.parameter_count(),
            r.lnt.parameters as f64 / 1e3,
            r.moe.parameters as f64 / 1e3,
            r.total.flops as f64 / 1e3
        ),
    )
}

fn full_data_reproduction() -> Outcome {
    let Ok(path) = std::env::var("GAMC_RADIOML") else {
        return Outcome::skip("GAMC_RADIOML not set; needs the converted RadioML 2016.10A file");
    };
    let ds: Dataset64 = match gamc::load_dataset(&path) {
        Ok(d) => d,
        Err(e) => return Outcome::check(false, format!("cannot load {path}: {e}")),
    };
    let base = PipelineConfig { data: gamc::pipeline::DataSource { path: Some(path.into()), synthetic: None }, ..PipelineConfig::default() };
    let (train, test) = stratified_split(&ds, base.train_fraction, base.split_seed);
    let fx = FeatureExtractor::new(base.graph.clone(), base.stat.clone());
    let x = fx.extract_matrix(&ds.frames).unwrap();
    let labels: Vec<usize> = ds.frames.iter().map(|f| f.label).collect();
    let snr: Vec<i32> = ds.frames.iter().map(|f| f.snr_db).collect();
    let sel = |idx: &[usize]| (x.select(Axis(0), idx), idx.iter().map(|&i| labels[i]).collect::<Vec<_>>(), idx.iter().map(|&i| snr[i]).collect::<Vec<_>>());
    let (tx, ty, ts) = sel(&train);
    let (vx, vy, vs) = sel(&test);
    let c = ds.num_classes();
    let g = fx.graph_dim();

    let plain_accuracy = |cols: std::ops::Range<usize>| {
        let m = gbt::fit(tx.slice(ndarray::s![.., cols.clone()]), &ty, c, &TrainParams::expert_table()).unwrap();
        let hits = vx
            .rows()
            .into_iter()
            .zip(&vy)
            .filter(|(r, &l)| gamc::scalar::argmax(&m.predict_proba(&r.slice(ndarray::s![cols.clone()]).to_vec()).unwrap()) == l)
            .count();
        hits as f64 / vy.len() as f64
    };
    let stat_only = plain_accuracy(g..fx.dim());
    let raw = plain_accuracy(0..fx.dim());
    let table = FeatureTable { x: tx.view(), labels: &ty, snr_db: &ts };
    let vtable = FeatureTable { x: vx.view(), labels: &vy, snr_db: &vs };
    let acc = |q: usize| {
        let b = fit_from_features(&PipelineConfig { q, ..base.clone() }, &table, &ds.label_table).unwrap();
        evaluate_features(&b, &vtable).unwrap()
    };
    let (r1, r3, r5) = (acc(1), acc(3), acc(5));
    let low = r5.accuracy_between(-20, -2).unwrap_or(0.0);
    let pass = r5.overall_accuracy >= 0.60
        && low >= 0.38
        && raw >= stat_only + 0.03
        && r1.overall_accuracy >= raw + 0.005
        && r1.overall_accuracy < r3.overall_accuracy + 0.005
        && r3.overall_accuracy < r5.overall_accuracy + 0.005;
    Outcome::check(
        pass,
        format!(
            "5-MoE {:.2}%, low-SNR {:.2}%, stat-only {:.2}%, graph+stat {:.2}%, LNT (Q=1) {:.2}%, Q=3 {:.2}%",
            100.0 * r5.overall_accuracy,
            100.0 * low,
            100.0 * stat_only,
            100.0 * raw,
            100.0 * r1.overall_accuracy,
            100.0 * r3.overall_accuracy
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("spectral correctness", spectral_correctness),
        ("invariance suite", invariance_suite),
        ("cumulant oracle", cumulant_oracle),
        ("split-gain oracle", split_gain_oracle),
        ("logistic gradient check", logistic_gradient_check),
        ("desk-scale end-to-end", desk_end_to_end),
        ("simplex contracts", simplex_contracts),
        ("full-data reproduction", full_data_reproduction),
        ("complexity report", complexity_criterion),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        let tag = if o.skipped {
            "SKIP"
        } else if o.pass {
            "PASS"
        } else {
            failed += 1;
            "FAIL"
        };
        println!("[{tag}] {name}: {}", o.detail);
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
