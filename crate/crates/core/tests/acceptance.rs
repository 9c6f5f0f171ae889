//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are pinned as constants below.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use iqa_core::autograd::{Graph, ParamStore};
use iqa_core::data::{generate_synthetic_dataset, make_splits, preprocess, PreprocessSpec};
use iqa_core::harness::eval::evaluate_indices;
use iqa_core::harness::{cmd_eval, cmd_train, train_model, EvalSubset, LoadedDataset, RunConfig, TrainSubset};
use iqa_core::losses::{emd, emd_loss, loss_on_graph, route_labels, LossKind, LossWeights, Provenance, TrainingTarget};
use iqa_core::metrics::{cosine, intersection, jsd, plcc_rmse, srcc};
use iqa_core::network::{head_forward, init_head_params, predict, SlmConfig, StageMask};
use iqa_core::rating_stats::{
    expected_sos, fit_a, gaussian_dos, mos_of, LabelCategory, OpinionDistribution, QualityScale,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const ORACLE_CASES: usize = 1000;
const ORACLE_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-12;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);

const AXIOM_TOL: f64 = 1e-9;

const ROUND_TRIP_SUM_TOL: f64 = 1e-9;
/// Largest `|mos_of(gaussian_dos(m, s)) − m|` over the checked grid, rounded
/// up from the density-at-levels oracle below (0.232955941...).
const ROUND_TRIP_BOUND: f64 = 0.2330;

const FIT_A_EXACT_TOL: f64 = 1e-9;
const FIT_A_SYNTH_REL_TOL: f64 = 0.05;

const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor for relative errors, so gradients that vanish exactly
/// compare by absolute difference.
const GRAD_FLOOR: f64 = 1e-6;
const GRAD_BUDGET: Duration = Duration::from_secs(60);

const CONTRACT_SUM_TOL: f64 = 1e-6;
const MIX_GAP: f64 = 0.001;
/// `1 − 0.999` is 0.0010000000000000009 in binary, and the mixture adds a
/// few more roundings; this covers them and nothing else.
const MIX_ROUNDING: f64 = 4.0 * f64::EPSILON;

const OVERFIT_IMAGES: usize = 32;
const OVERFIT_EPOCHS: usize = 200;
/// Desk-scale step size and clipping norm; the 1e-5 default is tuned for a
/// pretrained backbone, and the from-scratch reference backbone needs both.
const DESK_LR: f64 = 2e-3;
const DESK_CLIP: f64 = 100.0;
const OVERFIT_LOSS_RATIO: f64 = 0.2;
const OVERFIT_SRCC: f64 = 0.9;
const OVERFIT_BUDGET: Duration = Duration::from_secs(600);

const ABLATION_IMAGES: usize = 40;

const DETERMINISM_TOL: f64 = 1e-6;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn five() -> QualityScale {
    QualityScale::five_point()
}

fn oracle_suite() -> Check {
    let start = Instant::now();
    let scale = five();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 6];
    for case in 0..ORACLE_CASES {
        let c = rng.random_range(2..12);
        let p = common::random_distribution(c, &mut rng);
        let q = common::random_distribution(c, &mut rng);
        let errs = [
            (emd(&p, &q) - common::emd(&p, &q)).abs(),
            (jsd(&p, &q) - common::jsd(&p, &q)).abs(),
            (intersection(&p, &q) - common::intersection(&p, &q)).abs(),
            (cosine(&p, &q) - common::cosine(&p, &q)).abs(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
        let p5 = OpinionDistribution::new(common::random_distribution(5, &mut rng), &scale).unwrap();
        let q5 = OpinionDistribution::new(common::random_distribution(5, &mut rng), &scale).unwrap();
        let e = (emd_loss(&p5, &q5).unwrap() - common::emd(p5.probs(), q5.probs())).abs();
        worst[0] = worst[0].max(e);

        let n = rng.random_range(5..60);
        let x: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 6.0).round()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if let Ok(s) = srcc(&x, &y) {
            worst[4] = worst[4].max((s - common::srcc(&x, &y)).abs());
        }

        let n = rng.random_range(12..60);
        let (x, y) = common::sigmoidal_pair(n, &mut rng);
        let ours = plcc_rmse(&x, &y).map_err(|e| format!("case {case}: {e}"))?.0;
        worst[5] = worst[5].max((ours - common::plcc(&x, &y)).abs());
    }
    let elapsed = start.elapsed();
    let limits = [CLOSED_FORM_TOL, ORACLE_TOL, CLOSED_FORM_TOL, CLOSED_FORM_TOL, CLOSED_FORM_TOL, ORACLE_TOL];
    let names = ["emd", "jsd", "intersection", "cosine", "srcc", "plcc"];
    for ((w, l), name) in worst.iter().zip(limits).zip(names) {
        ensure!(*w <= l, "{name} deviates by {w:e} (limit {l:e})");
    }
    ensure!(elapsed < ORACLE_BUDGET, "took {elapsed:?}");
    Ok(format!(
        "{ORACLE_CASES} cases in {:.2}s; max |Δ| emd {:.1e} jsd {:.1e} int {:.1e} cos {:.1e} srcc {:.1e} plcc {:.1e}",
        elapsed.as_secs_f64(),
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        worst[4],
        worst[5]
    ))
}

fn emd_axioms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..1000 {
        let c = rng.random_range(2..12);
        let [p, q, r] = [0; 3].map(|_| common::random_distribution(c, &mut rng));
        let (pq, qp, pr, qr) = (emd(&p, &q), emd(&q, &p), emd(&p, &r), emd(&q, &r));
        ensure!(pq >= -AXIOM_TOL, "triple {i}: negative {pq}");
        ensure!((pq - qp).abs() <= AXIOM_TOL, "triple {i}: asymmetric {pq} vs {qp}");
        ensure!(emd(&p, &p) <= AXIOM_TOL, "triple {i}: identity fails");
        ensure!(pr <= pq + qr + AXIOM_TOL, "triple {i}: triangle {pr} > {pq} + {qr}");
    }
    Ok("1000 triples".into())
}

/// Normal density at each level, normalised; written without the
/// max-subtraction trick the library uses.
fn density_oracle(mos: f64, sos: f64, scores: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = scores
        .iter()
        .map(|s| (-(s - mos).powi(2) / (2.0 * sos * sos)).exp() / (sos * (2.0 * std::f64::consts::PI).sqrt()))
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn gaussian_round_trip() -> Check {
    let scale = five();
    let mut worst = 0.0f64;
    for mos in [2.0, 2.5, 3.0, 3.5, 4.0] {
        for sos in [0.4, 0.8, 1.2] {
            let d = gaussian_dos(mos, sos, &scale).map_err(|e| e.to_string())?;
            let sum: f64 = d.probs().iter().sum();
            ensure!((sum - 1.0).abs() <= ROUND_TRIP_SUM_TOL, "({mos}, {sos}) sums to {sum}");
            let oracle = density_oracle(mos, sos, scale.scores());
            for (a, b) in d.probs().iter().zip(&oracle) {
                ensure!((a - b).abs() <= CLOSED_FORM_TOL, "({mos}, {sos}) differs from oracle");
            }
            let oracle_mean: f64 = oracle.iter().zip(scale.scores()).map(|(p, s)| p * s).sum();
            ensure!(
                (oracle_mean - mos).abs() <= ROUND_TRIP_BOUND,
                "oracle shift {} exceeds pinned bound",
                (oracle_mean - mos).abs()
            );
            let shift = (mos_of(&d) - mos).abs();
            ensure!(shift <= ROUND_TRIP_BOUND, "({mos}, {sos}) shifts mean by {shift}");
            if mos == 3.0 {
                ensure!(mos_of(&d) == 3.0, "mean at 3.0 is {}", mos_of(&d));
            }
            worst = worst.max(shift);
        }
    }
    Ok(format!("15 grid points; max mean shift {worst:.6} <= {ROUND_TRIP_BOUND}"))
}

fn quadratic_law() -> Check {
    let scale = five();
    let a = 0.1477;
    let lo = expected_sos(1.0, &scale, a).map_err(|e| e.to_string())?;
    let hi = expected_sos(5.0, &scale, a).map_err(|e| e.to_string())?;
    ensure!(lo == 0.0 && hi == 0.0, "endpoints give {lo}, {hi}");
    let peak = expected_sos(3.0, &scale, a).unwrap();
    for i in 0..=400 {
        let m = 1.0 + 4.0 * i as f64 / 400.0;
        ensure!(expected_sos(m, &scale, a).unwrap() <= peak, "exceeds the midpoint value at {m}");
    }
    let derived = (a * 4.0f64).sqrt();
    ensure!((peak - derived).abs() < 1e-15, "peak {peak} vs {derived}");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clean: Vec<(f64, f64)> = (0..200)
        .map(|_| {
            let m = rng.random_range(1.0..5.0);
            (m, expected_sos(m, &scale, a).unwrap())
        })
        .collect();
    let exact = fit_a(&clean, &scale).map_err(|e| e.to_string())?;
    ensure!((exact - a).abs() <= FIT_A_EXACT_TOL, "noiseless fit gives {exact}");

    let synth = generate_synthetic_dataset(256, &scale, LabelCategory::MosSosAvailable, 17, a)
        .map_err(|e| e.to_string())?;
    let samples: Vec<(f64, f64)> = synth
        .manifest
        .labels()
        .iter()
        .map(|l| (l.mos(), l.sos().unwrap()))
        .collect();
    let fitted = fit_a(&samples, &scale).map_err(|e| e.to_string())?;
    let rel = (fitted - a).abs() / a;
    ensure!(rel <= FIT_A_SYNTH_REL_TOL, "synthetic fit gives {fitted} ({:.2}% off)", rel * 100.0);
    Ok(format!(
        "endpoints 0, peak {peak:.6}; noiseless |Δa| {:.1e}; synthetic n=256 a {fitted:.4} ({:.2}% off)",
        (exact - a).abs(),
        rel * 100.0
    ))
}

fn gradient_check() -> Check {
    let start = Instant::now();
    let (d, c) = (24, 5);
    let cfg = SlmConfig {
        num_levels: c,
        hidden_channels: 8,
        ..SlmConfig::default()
    };
    let scale = five();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut store = ParamStore::new();
    init_head_params(&mut store, d, &cfg, &mut rng);
    // Random values everywhere, so zero-initialised gates and biases are
    // exercised away from their starting point.
    let noise = Normal::new(0.0, 0.3).unwrap();
    for (_, p) in store.iter_mut() {
        p.mapv_inplace(|v| v + noise.sample(&mut rng));
    }
    let fused: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target = TrainingTarget {
        dos_target: OpinionDistribution::new(common::random_distribution(c, &mut rng), &scale).unwrap(),
        mos_target: 3.4,
        sos_reference: 0.7,
        provenance: Provenance::GroundTruthDos,
    };
    let weights = LossWeights::default();

    let loss = |store: &ParamStore| -> f64 {
        let mut g = Graph::new(store);
        let f = g.row(&fused);
        let head = head_forward(&mut g, f, &cfg, &scale).unwrap();
        let lv = loss_on_graph(&mut g, &head, &target, &weights).unwrap();
        g.scalar(lv.total)
    };
    let grads = {
        let mut g = Graph::new(&store);
        let f = g.row(&fused);
        let head = head_forward(&mut g, f, &cfg, &scale).map_err(|e| e.to_string())?;
        let lv = loss_on_graph(&mut g, &head, &target, &weights).map_err(|e| e.to_string())?;
        g.backward(lv.total).into_params()
    };
    let names: Vec<String> = store.names().cloned().collect();
    for required in ["slm.gate_a.weight", "slm.gate_w.weight", "slm.fa.weight", "slm.fw.weight", "head.fc1.weight", "head.fc2.weight", "slm.mask.fc1.weight", "slm.mask.fc2.weight"] {
        ensure!(names.iter().any(|n| n == required), "no parameter {required}");
    }
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for name in &names {
        let analytic = grads.get(name).ok_or_else(|| format!("no gradient for {name}"))?;
        let shape = store.get(name).unwrap().dim();
        for r in 0..shape.0 {
            for k in 0..shape.1 {
                let mut probe = store.clone();
                probe.get_mut(name).unwrap()[(r, k)] += GRAD_STEP;
                let up = loss(&probe);
                probe.get_mut(name).unwrap()[(r, k)] -= 2.0 * GRAD_STEP;
                let down = loss(&probe);
                let numeric = (up - down) / (2.0 * GRAD_STEP);
                let a = analytic[(r, k)];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
                if rel > worst.0 {
                    worst = (rel, format!("{name}[{r},{k}]: analytic {a:e}, numeric {numeric:e}"));
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst.0 <= GRAD_REL_TOL, "relative error {:.2e} at {}", worst.0, worst.1);
    ensure!(elapsed < GRAD_BUDGET, "took {elapsed:?}");
    Ok(format!(
        "{checked} scalars over {} tensors; max relative error {:.2e}; {:.2}s",
        names.len(),
        worst.0,
        elapsed.as_secs_f64()
    ))
}

fn output_contracts() -> Check {
    let scale = five();
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let cfg = SlmConfig {
        hidden_channels: 16,
        lambda_mix: 0.999,
        ..SlmConfig::default()
    };
    let mut worst_gap = 0.0f64;
    for i in 0..100 {
        let mut store = ParamStore::new();
        init_head_params(&mut store, 48, &cfg, &mut rng);
        for (_, p) in store.iter_mut() {
            p.mapv_inplace(|v| v + noise.sample(&mut rng));
        }
        let fused: Vec<f64> = (0..48).map(|_| rng.random_range(-4.0..4.0)).collect();
        let p = predict(&store, &fused, &cfg, &scale).map_err(|e| format!("input {i}: {e}"))?;
        for (label, dist) in [("d_mem", &p.d_mem), ("d_alg", &p.d_alg), ("d_p", &p.d_p)] {
            let sum: f64 = dist.probs().iter().sum();
            ensure!((sum - 1.0).abs() <= CONTRACT_SUM_TOL, "input {i}: {label} sums to {sum}");
            ensure!(dist.probs().iter().all(|v| *v >= 0.0), "input {i}: {label} has a negative entry");
        }
        ensure!((1.0..=5.0).contains(&p.mos_p), "input {i}: mos {}", p.mos_p);
        ensure!((0.0..=2.0).contains(&p.sos_p), "input {i}: sos {}", p.sos_p);
        let gap = p
            .d_p
            .probs()
            .iter()
            .zip(p.d_mem.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure!(gap <= MIX_GAP + MIX_ROUNDING, "input {i}: |d_p - d_mem| = {gap}");
        worst_gap = worst_gap.max(gap);
    }
    Ok(format!("100 inputs; max |d_p - d_mem| {worst_gap:.2e}"))
}

fn desk_config(manifest: &Path, epochs: usize) -> RunConfig {
    let mut cfg = RunConfig::new(manifest, epochs);
    cfg.slm.hidden_channels = 32;
    cfg.optimizer.adam.lr = DESK_LR;
    cfg.optimizer.max_grad_norm = Some(DESK_CLIP);
    cfg.seed = 7;
    cfg
}

fn write_synth(dir: &Path, n: usize, category: LabelCategory, seed: u64) -> Result<std::path::PathBuf, String> {
    generate_synthetic_dataset(n, &five(), category, seed, 0.1477)
        .and_then(|d| d.write_to(dir))
        .map_err(|e| e.to_string())?;
    Ok(dir.join("manifest.jsonl"))
}

fn train_srcc(cfg: &RunConfig, data: &LoadedDataset) -> Result<(f64, f64, f64), String> {
    let out = train_model(cfg, data).map_err(|e| e.to_string())?;
    let r = evaluate_indices(&out.model, data, &out.train_indices, cfg.preprocess_spec(), "train")
        .map_err(|e| e.to_string())?;
    let first = out.loss_log.first().map_or(f64::NAN, |l| l.total);
    let last = out.loss_log.last().map_or(f64::NAN, |l| l.total);
    Ok((r.mos.srcc, first, last))
}

fn overfit() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_synth(tmp.path(), OVERFIT_IMAGES, LabelCategory::DosAvailable, 7)?;
    let data = LoadedDataset::load(&manifest).map_err(|e| e.to_string())?;
    let mut cfg = desk_config(&manifest, OVERFIT_EPOCHS);
    cfg.split.train_on = TrainSubset::All;
    let (s, first, last) = train_srcc(&cfg, &data)?;
    let elapsed = start.elapsed();
    let ratio = last / first;
    ensure!(ratio < OVERFIT_LOSS_RATIO, "final/first loss {last:.3}/{first:.3} = {ratio:.3}");
    ensure!(s >= OVERFIT_SRCC, "train SRCC {s:.4}");
    ensure!(elapsed < OVERFIT_BUDGET, "took {elapsed:?}");
    Ok(format!(
        "loss {first:.2} -> {last:.2} ({:.1}%), train SRCC {s:.4}, lr {DESK_LR:e}, clip {DESK_CLIP}, {:.1}s",
        ratio * 100.0,
        elapsed.as_secs_f64()
    ))
}

fn ablation_directionality() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_synth(tmp.path(), ABLATION_IMAGES, LabelCategory::DosAvailable, 11)?;
    let data = LoadedDataset::load(&manifest).map_err(|e| e.to_string())?;
    let base = desk_config(&manifest, OVERFIT_EPOCHS);

    let (full, ..) = train_srcc(&base, &data)?;
    let mut esd = base.clone();
    esd.weights = base.weights.with_enabled([LossKind::Esd]).map_err(|e| e.to_string())?;
    let (esd_only, ..) = train_srcc(&esd, &data)?;
    // The deepest stage is the strongest single-stage variant, so it is the
    // one compared against; the other two are reported for context.
    let mut single = [0.0; 3];
    for (k, s) in single.iter_mut().enumerate() {
        let mut cfg = base.clone();
        let mut mask = [false; 3];
        mask[k] = true;
        cfg.stages = StageMask(mask);
        *s = train_srcc(&cfg, &data)?.0;
    }
    let detail = format!(
        "train SRCC on split 0: full {full:.4}, ESD-only {esd_only:.4}, stage-3-only {:.4} (stage-1-only {:.4}, stage-2-only {:.4})",
        single[2], single[0], single[1]
    );
    ensure!(esd_only < full, "ESD-only not below full; {detail}");
    ensure!(full >= single[2], "3-stage fusion below stage-3-only; {detail}");
    Ok(detail)
}

fn label_routing() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = [
        (LabelCategory::DosAvailable, Provenance::GroundTruthDos),
        (LabelCategory::MosSosAvailable, Provenance::GaussianFromMosSos),
        (LabelCategory::MosOnly, Provenance::GaussianFromMosOnly),
    ];
    for (category, provenance) in cases {
        let dir = tmp.path().join(category.as_str());
        let manifest = write_synth(&dir, 10, category, 4)?;
        let data = LoadedDataset::load(&manifest).map_err(|e| e.to_string())?;
        for labels in data.manifest.labels() {
            let t = route_labels(labels, &data.manifest.scale, 0.1477).map_err(|e| e.to_string())?;
            ensure!(t.provenance == provenance, "{category:?} routed to {:?}", t.provenance);
        }
        let out = train_model(&desk_config(&manifest, 2), &data).map_err(|e| format!("{category:?}: {e}"))?;
        ensure!(out.loss_log.iter().all(|l| l.total.is_finite()), "{category:?}: non-finite loss");
    }
    Ok("3 categories trained; provenance matches".into())
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_synth(&tmp.path().join("data"), 30, LabelCategory::DosAvailable, 12)?;
    let cfg = desk_config(&manifest, 3);
    let runs = ["a", "b"].map(|r| cmd_train(&cfg, &tmp.path().join(r)).map_err(|e| e.to_string()));
    let [a, b] = runs;
    let (a, b) = (a?, b?);
    ensure!(a.outcome.split_hash == b.outcome.split_hash, "split hashes differ");
    let ea = cmd_eval(&a.checkpoint, &manifest, &cfg.split, EvalSubset::TestSplits).map_err(|e| e.to_string())?;
    let eb = cmd_eval(&b.checkpoint, &manifest, &cfg.split, EvalSubset::TestSplits).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (x, y) in ea.splits.iter().zip(&eb.splits).chain([(&ea.mean, &eb.mean)]) {
        let mut diffs = vec![
            (x.mos.srcc - y.mos.srcc).abs(),
            (x.mos.plcc - y.mos.plcc).abs(),
            (x.mos.rmse - y.mos.rmse).abs(),
        ];
        if let (Some(p), Some(q)) = (&x.dos, &y.dos) {
            diffs.extend([
                (p.jsd - q.jsd).abs(),
                (p.emd - q.emd).abs(),
                (p.rmse - q.rmse).abs(),
                (p.intersection - q.intersection).abs(),
                (p.cosine - q.cosine).abs(),
            ]);
        }
        worst = diffs.into_iter().fold(worst, f64::max);
    }
    ensure!(worst <= DETERMINISM_TOL, "metrics differ by {worst:e}");
    for n in [5, 37, 1000] {
        for seed in [0, 1, u64::MAX] {
            let (p, q) = (make_splits(n, seed).map_err(|e| e.to_string())?, make_splits(n, seed).unwrap());
            ensure!(p == q, "splits for n={n}, seed={seed} differ");
        }
    }
    // Evaluation crops are independent of the generator state.
    let img = &LoadedDataset::load(&manifest).map_err(|e| e.to_string())?.images[0];
    let spec = PreprocessSpec::reference();
    let c1 = preprocess(img, spec, false, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let c2 = preprocess(img, spec, false, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    ensure!(c1 == c2, "eval crop depends on the seed");
    Ok(format!("{} eval splits; max metric difference {worst:e}; splits bit-identical", ea.splits.len()))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 10] = [
        ("loss/metric oracle suite", oracle_suite),
        ("EMD metric axioms", emd_axioms),
        ("Gaussian DOS round trip", gaussian_round_trip),
        ("quadratic SOS law", quadratic_law),
        ("gradient check", gradient_check),
        ("output contracts", output_contracts),
        ("overfit", overfit),
        ("ablation directionality", ablation_directionality),
        ("label routing", label_routing),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
