//! Acceptance criteria, one verdict line each. Runs without the libtest
//! harness so criteria execute in order and print as they finish.

use std::path::PathBuf;
use std::time::Instant;

use agcrn::data::{
    ha_metrics, metrics, split_and_window, split_rows, synth_generate, Dataset, HistoricalAverage, RawSeries,
    SynthData, SynthSpec,
};
use agcrn::graph::{build_predefined_supports, dagg_matrix, NodeEmbedding, PredefinedGraph};
use agcrn::model::{ForecastModel, ModelConfig, SupportOverride, Variant};
use agcrn::numerics::{Rng, Tape, Tensor};
use agcrn::training::{evaluate, train, TrainConfig};
use agcrn_cli::{cmd_count_params, cmd_eval, cmd_gradcheck, cmd_synth, cmd_train, EvalArgs, GradcheckArgs};
use agcrn_cli::{Overrides, RunConfig, SynthArgs};

struct Verdict {
    id: &'static str,
    status: Status,
    detail: String,
}

enum Status {
    Pass,
    Fail,
    Skip,
}

fn verdict(id: &'static str, ok: bool, detail: String) -> Verdict {
    Verdict {
        id,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c1_parameter_counts() -> Verdict {
    let t = Instant::now();
    let count = |d: usize| {
        let cfg = RunConfig::from_overrides(&Overrides {
            nodes: Some(307),
            embed_dim: Some(d),
            hidden: Some(64),
            layers: Some(2),
            horizon: Some(12),
            ..Overrides::default()
        })
        .unwrap();
        cmd_count_params(&cfg).unwrap()
    };
    let (c10, c2) = (count(10), count(2));
    let elapsed = t.elapsed().as_secs_f64();
    let census = |d: usize| {
        let mut c = ModelConfig::new(307);
        c.embed_dim = d;
        ForecastModel::build(c, None).unwrap().params().scalar_count()
    };
    let (s10, s2) = (census(10), census(2));
    verdict(
        "1 parameter counts",
        c10 == 748_810 && c2 == 150_386 && s10 == c10 && s2 == c2 && elapsed < 1.0,
        format!("d=10 {c10} (census {s10}), d=2 {c2} (census {s2}), {elapsed:.3}s"),
    )
}

fn c2_gradcheck() -> Verdict {
    let t = Instant::now();
    let args = GradcheckArgs {
        run: Overrides {
            nodes: Some(5),
            hidden: Some(8),
            embed_dim: Some(3),
            lookback: Some(4),
            horizon: Some(2),
            ..Overrides::default()
        },
        step: 1e-5,
        tol: 1e-4,
        corrupt_backward: false,
    };
    let r = cmd_gradcheck(&args).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let has_embedding = r.params.iter().any(|p| p.name == "embedding");
    let classes = ["pool_w", "pool_b", "head.weight", "head.bias"];
    let all_classes = classes.iter().all(|c| r.params.iter().any(|p| p.name.contains(c)));
    verdict(
        "2 gradient check",
        r.pass && r.max_rel_err() <= 1e-4 && has_embedding && all_classes && elapsed < 60.0,
        format!("{} parameters, max rel err {:.2e}, {elapsed:.1}s", r.params.len(), r.max_rel_err()),
    )
}

fn c3_dagg_rows() -> Verdict {
    let mut rng = Rng::new(2024);
    let mut worst: f64 = 0.0;
    let mut negative = 0;
    for _ in 0..1000 {
        let n = 2 + rng.index(63);
        let d = 1 + rng.index(16);
        let scale = rng.uniform(0.1, 5.0);
        let e = Tensor::new(&[n, d], (0..n * d).map(|_| scale * rng.normal()).collect()).unwrap();
        let a = dagg_matrix(&NodeEmbedding::new(e).unwrap()).unwrap().a_tilde;
        for i in 0..n {
            worst = worst.max((a.row(i).iter().sum::<f64>() - 1.0).abs());
            negative += a.row(i).iter().filter(|&&v| v < 0.0).count();
        }
    }
    verdict(
        "3 DAGG normalization",
        worst <= 1e-9 && negative == 0,
        format!("1000 embeddings, worst row-sum error {worst:.1e}, {negative} negative entries"),
    )
}

fn c4_factorization_collapse() -> Verdict {
    let (n, lookback) = (8, 12);
    let graph = PredefinedGraph::new(
        n,
        vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.0), (4, 5, 1.5), (5, 6, 1.0), (6, 7, 0.7), (0, 7, 1.0)],
    )
    .unwrap();
    let supports = build_predefined_supports(&graph);
    let mut c = ModelConfig::new(n);
    c.hidden = 16;
    c.embed_dim = 1;
    c.horizon = 3;
    c.seed = 11;
    let mut agcrn = ForecastModel::build(c.clone(), None).unwrap();
    let gcgru = ForecastModel::build(ModelConfig { variant: Variant::Gcgru, ..c }, Some(graph)).unwrap();
    agcrn.set_param("embedding", Tensor::full(&[n, 1], 1.0)).unwrap();
    for p in gcgru.params().iter() {
        let name = p.name.replace(".theta_", ".pool_w").replace(".bias_", ".pool_b");
        let shape = agcrn.params().by_name(&name).unwrap().value.shape().to_vec();
        agcrn.set_param(&name, p.value.clone().reshape(&shape).unwrap()).unwrap();
    }
    let mut rng = Rng::new(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = Tensor::new(&[lookback, n, 1], (0..lookback * n).map(|_| rng.normal()).collect()).unwrap();
        let mut t1 = Tape::new();
        let a = agcrn.forward_batch(&mut t1, &[&x], SupportOverride::Fixed(&supports)).unwrap();
        let mut t2 = Tape::new();
        let g = gcgru.forward_batch(&mut t2, &[&x], SupportOverride::None).unwrap();
        worst = worst.max(t1.value(a).max_abs_diff(t2.value(g)));
    }
    verdict(
        "4 factorization collapse",
        worst <= 1e-12,
        format!("100 inputs, max |AGCRN - GCGRU| = {worst:.1e}"),
    )
}

/// Desk-scale synthetic setting shared by criteria 5 to 7.
fn desk_data(noise: f64, jitter: f64, seed: u64) -> (SynthData, Dataset) {
    let spec = SynthSpec {
        steps_per_day: 48,
        phase_jitter: jitter,
        ..SynthSpec::new(8, 2, 400, noise, seed)
    };
    let data = synth_generate(&spec).unwrap();
    let ds = split_and_window(&data.series, (0.6, 0.2, 0.2), 12, 3).unwrap();
    (data, ds)
}

fn desk_model(data: &SynthData, variant: Variant, d: usize, seed: u64) -> ForecastModel {
    let mut c = ModelConfig::new(8);
    c.hidden = 16;
    c.embed_dim = d;
    c.lookback = 12;
    c.horizon = 3;
    c.variant = variant;
    c.seed = seed;
    ForecastModel::build(c, Some(data.chain_graph())).unwrap()
}

fn desk_train(epochs: usize, patience: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: 0.01,
        batch_size: 32,
        max_epochs: epochs,
        patience,
        seed,
    }
}

fn series_std(s: &RawSeries) -> f64 {
    let v = s.values.data();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn c5_overfit() -> Verdict {
    let t = Instant::now();
    let (data, ds) = desk_data(0.0, 0.0, 0);
    let model = desk_model(&data, Variant::Agcrn, 4, 0);
    let (model, hist) = train(model, &ds, &desk_train(200, 15, 0)).unwrap();
    let mae = evaluate(&model, &ds.train, &ds.normalizer, 64).unwrap().average.mae;
    let std = series_std(&data.series);
    let ratio = mae / std;
    verdict(
        "5 overfit oracle",
        ratio < 0.05 && hist.epochs.len() <= 200,
        format!(
            "train MAE {mae:.3} = {:.2}% of std {std:.2} after {} epochs, {:.0}s",
            100.0 * ratio,
            hist.epochs.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c6_graph_recovery() -> Verdict {
    let t = Instant::now();
    let mut margins = Vec::new();
    let mut parts = Vec::new();
    for seed in 0..3 {
        // noise 5 is 10% of the template amplitude 50
        let (data, ds) = desk_data(5.0, 0.0, seed);
        let model = desk_model(&data, Variant::Agcrn, 8, seed);
        let (model, _) = train(model, &ds, &desk_train(30, 30, seed)).unwrap();
        let a = model.adaptive_graph().unwrap().unwrap().a_tilde;
        let (mut within, mut across, mut nw, mut na) = (0.0, 0.0, 0, 0);
        for i in 0..8 {
            for j in 0..8 {
                if i == j {
                    continue;
                }
                if data.community[i] == data.community[j] {
                    within += a.get(&[i, j]);
                    nw += 1;
                } else {
                    across += a.get(&[i, j]);
                    na += 1;
                }
            }
        }
        let (w, x) = (within / nw as f64, across / na as f64);
        parts.push(format!("seed {seed}: {w:.4} vs {x:.4}"));
        margins.push(w - x);
    }
    verdict(
        "6 graph recovery",
        median(margins) > 0.0,
        format!("within vs across mean weight; {}; {:.0}s", parts.join(", "), t.elapsed().as_secs_f64()),
    )
}

fn c7_ablation_direction() -> Verdict {
    let t = Instant::now();
    let variants = [Variant::Agcrn, Variant::Gcgru, Variant::GruEd];
    let mut maes: Vec<Vec<f64>> = vec![Vec::new(); variants.len()];
    for seed in 0..3 {
        let (data, ds) = desk_data(5.0, 1.0, seed);
        for (k, &v) in variants.iter().enumerate() {
            let model = desk_model(&data, v, 4, seed);
            let (model, _) = train(model, &ds, &desk_train(30, 30, seed)).unwrap();
            maes[k].push(evaluate(&model, &ds.test, &ds.normalizer, 64).unwrap().average.mae);
        }
    }
    let med: Vec<f64> = maes.iter().map(|m| median(m.clone())).collect();
    verdict(
        "7 ablation direction",
        med[0] <= med[1] && med[0] <= med[2],
        format!(
            "median test MAE agcrn {:.3}, gcgru {:.3}, gru_ed {:.3}; {:.0}s",
            med[0],
            med[1],
            med[2],
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c8_metric_oracles() -> Verdict {
    let pred = Tensor::new(&[3], vec![2.0, 2.0, 5.0]).unwrap();
    let truth = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
    let r = metrics(&pred, &truth, None).unwrap().average;
    let mape_pct = 100.0 * r.mape.unwrap();
    let formulas = r.mae == 1.0 && (r.rmse - 1.29099).abs() <= 1e-5 && (mape_pct - 55.556).abs() <= 1e-3;

    // HA on two unrelated series, twelve horizons each.
    let mut identical = true;
    let (synth, _) = desk_data(5.0, 1.0, 7);
    let mut rng = Rng::new(3);
    let mut walk = vec![50.0; 3];
    let mut rows = Vec::new();
    for _ in 0..600 {
        for w in walk.iter_mut() {
            *w += rng.normal();
            rows.push(*w);
        }
    }
    let walk = RawSeries::from_values(Tensor::new(&[600, 3], rows).unwrap(), 48).unwrap();
    for s in [&synth.series, &walk] {
        let ranges = split_rows(s.steps(), (0.6, 0.2, 0.2)).unwrap();
        let ha = HistoricalAverage::fit(s, ranges[0].end).unwrap();
        for rows in &ranges[1..] {
            let rep = ha_metrics(&ha, s, rows.clone(), 12, 12).unwrap();
            identical &= rep.horizons.len() == 12 && rep.horizons.iter().all(|h| *h == rep.horizons[0]);
        }
    }
    verdict(
        "8 metric oracles",
        formulas && identical,
        format!(
            "MAE {} RMSE {:.5} MAPE {:.3}%; HA horizons identical: {identical}",
            r.mae, r.rmse, mape_pct
        ),
    )
}

fn c9_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let synth = SynthArgs {
        out: dir.path().join("data"),
        nodes: 6,
        communities: 2,
        steps: 300,
        noise_std: 5.0,
        seed: 1,
        steps_per_day: 48,
        amplitude_spread: 0.3,
        phase_jitter: 0.5,
        coupling: 0.3,
    };
    cmd_synth(&synth).unwrap();
    let run = |name: &str| -> PathBuf {
        let cfg = RunConfig::from_overrides(&Overrides {
            data: Some(dir.path().join("data/series.csv")),
            out: Some(dir.path().join(name)),
            steps_per_day: Some(48),
            seed: Some(9),
            hidden: Some(8),
            embed_dim: Some(3),
            horizon: Some(3),
            epochs: Some(4),
            batch_size: Some(32),
            ..Overrides::default()
        })
        .unwrap();
        cmd_train(&cfg, &mut |_| {}).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let same = |f: &str| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap();
    let (hist, ck) = (same("history.csv"), same("checkpoint.json"));
    verdict(
        "9 determinism",
        hist && ck,
        format!("history.csv identical: {hist}, checkpoint.json identical: {ck}"),
    )
}

/// Optional full-scale run; needs the PeMSD4 flow matrix as CSV.
fn c10_full_scale() -> Verdict {
    let Some(path) = std::env::var_os("AGCRN_PEMS_DATA") else {
        return Verdict {
            id: "10 full-scale PeMSD4",
            status: Status::Skip,
            detail: "AGCRN_PEMS_DATA not set; criteria 1-9 constitute acceptance".into(),
        };
    };
    let dir = tempfile::tempdir().unwrap();
    let run = Overrides {
        data: Some(PathBuf::from(&path)),
        out: Some(dir.path().to_path_buf()),
        ..Overrides::default()
    };
    let cfg = RunConfig::from_overrides(&run).unwrap();
    let out = cmd_train(&cfg, &mut |l| eprintln!("{l}")).unwrap();
    let r = cmd_eval(&EvalArgs {
        run,
        checkpoint: Some(out.join("checkpoint.json")),
        split: "test".into(),
        ha: false,
        inject_truth: false,
    })
    .unwrap()
    .average;
    let mape = 100.0 * r.mape.unwrap_or(f64::NAN);
    let within = |got: f64, want: f64| (got - want).abs() <= 0.1 * want;
    verdict(
        "10 full-scale PeMSD4",
        within(r.mae, 19.83) && within(r.rmse, 32.26) && within(mape, 12.97),
        format!("MAE {:.2} RMSE {:.2} MAPE {mape:.2}% (target 19.83 / 32.26 / 12.97%)", r.mae, r.rmse),
    )
}

fn main() {
    let criteria: [fn() -> Verdict; 10] = [
        c1_parameter_counts,
        c2_gradcheck,
        c3_dagg_rows,
        c4_factorization_collapse,
        c5_overfit,
        c6_graph_recovery,
        c7_ablation_direction,
        c8_metric_oracles,
        c9_determinism,
        c10_full_scale,
    ];
    let mut failed = 0;
    for c in criteria {
        let v = c();
        let tag = match v.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("[{tag}] {}: {}", v.id, v.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all gating acceptance criteria passed");
}
