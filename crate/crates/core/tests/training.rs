use agcrn::data::{split_and_window, synth_generate, Dataset, SynthSpec};
use agcrn::graph::build_predefined_supports;
use agcrn::model::{Checkpoint, ForecastModel, ModelConfig, SupportOverride, Variant};
use agcrn::numerics::{Rng, Tape, Tensor};
use agcrn::training::{evaluate, split_loss, train, TrainConfig};

fn dataset(seed: u64) -> (Dataset, agcrn::data::SynthData) {
    let mut spec = SynthSpec::new(4, 2, 160, 2.0, seed);
    spec.steps_per_day = 24;
    let d = synth_generate(&spec).unwrap();
    (split_and_window(&d.series, (0.6, 0.2, 0.2), 6, 2).unwrap(), d)
}

fn small(variant: Variant) -> ModelConfig {
    let mut c = ModelConfig::new(4);
    c.hidden = 6;
    c.embed_dim = 2;
    c.layers = 1;
    c.lookback = 6;
    c.horizon = 2;
    c.variant = variant;
    c
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        lr: 0.01,
        batch_size: 16,
        max_epochs: epochs,
        patience: epochs,
        seed: 4,
    }
}

#[test]
fn loss_drops_and_best_epoch_is_restored() {
    let (ds, _) = dataset(1);
    let model = ForecastModel::build(small(Variant::Agcrn), None).unwrap();
    let (model, hist) = train(model, &ds, &quick(8)).unwrap();
    assert_eq!(hist.epochs.len(), 8);
    assert!(hist.epochs.last().unwrap().train_loss < hist.epochs[0].train_loss);
    let val = split_loss(&model, &ds.val, &ds.normalizer, 16).unwrap();
    assert_eq!(val, hist.best_val_loss().unwrap());
}

#[test]
fn same_seed_same_history() {
    let (ds, d) = dataset(2);
    let graph = d.chain_graph();
    for variant in [Variant::Agcrn, Variant::Gcgru, Variant::GruEd] {
        let run = || {
            let m = ForecastModel::build(small(variant), Some(graph.clone())).unwrap();
            train(m, &ds, &quick(3)).unwrap()
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(h1.losses_csv(), h2.losses_csv());
        assert_eq!(m1.to_checkpoint().to_json().unwrap(), m2.to_checkpoint().to_json().unwrap());
    }
}

#[test]
fn zero_patience_stops_at_first_non_improvement() {
    let (ds, _) = dataset(3);
    let m = ForecastModel::build(small(Variant::Agcrn), None).unwrap();
    // lr 0 never improves after epoch 1
    let cfg = TrainConfig { lr: 0.0, patience: 0, ..quick(10) };
    let before = m.params().clone();
    let (m, hist) = train(m, &ds, &cfg).unwrap();
    assert_eq!(hist.epochs.len(), 2);
    assert_eq!(hist.best_epoch, 1);
    assert_eq!(m.params(), &before);
}

#[test]
fn patience_counts_consecutive_stale_epochs() {
    let (ds, _) = dataset(3);
    let m = ForecastModel::build(small(Variant::Agcrn), None).unwrap();
    let cfg = TrainConfig { lr: 0.0, patience: 3, ..quick(10) };
    let (_, hist) = train(m, &ds, &cfg).unwrap();
    assert_eq!(hist.epochs.len(), 4);
}

#[test]
fn empty_split_is_a_config_error() {
    let (mut ds, _) = dataset(1);
    ds.val.windows.clear();
    let m = ForecastModel::build(small(Variant::Agcrn), None).unwrap();
    assert!(matches!(train(m, &ds, &quick(1)), Err(agcrn::Error::Config(_))));
}

#[test]
fn checkpoint_reload_predicts_identically() {
    let (ds, _) = dataset(5);
    let m = ForecastModel::build(small(Variant::AgcrnI), None).unwrap();
    let (m, _) = train(m, &ds, &quick(2)).unwrap();
    let json = m.to_checkpoint().with_normalizer(ds.normalizer).to_json().unwrap();
    let back = ForecastModel::from_checkpoint(&Checkpoint::from_json(&json).unwrap()).unwrap();
    let a = evaluate(&m, &ds.test, &ds.normalizer, 16).unwrap();
    let b = evaluate(&back, &ds.test, &ds.normalizer, 16).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.horizons.len(), 2);
}

#[test]
fn unit_embedding_agcrn_matches_gcgru() {
    let (_, d) = dataset(1);
    let graph = d.chain_graph();
    let sup = build_predefined_supports(&graph);
    let mut ac = small(Variant::Agcrn);
    ac.embed_dim = 1;
    ac.layers = 2;
    let mut agcrn = ForecastModel::build(ac.clone(), None).unwrap();
    let gcgru = ForecastModel::build(ModelConfig { variant: Variant::Gcgru, ..ac }, Some(graph)).unwrap();
    agcrn.set_param("embedding", Tensor::full(&[4, 1], 1.0)).unwrap();
    for p in gcgru.params().iter() {
        let name = p.name.replace(".theta_", ".pool_w").replace(".bias_", ".pool_b");
        let shape = agcrn.params().by_name(&name).unwrap().value.shape().to_vec();
        agcrn.set_param(&name, p.value.clone().reshape(&shape).unwrap()).unwrap();
    }
    let mut rng = Rng::new(8);
    for _ in 0..10 {
        let x = Tensor::new(&[6, 4, 1], (0..24).map(|_| rng.normal()).collect()).unwrap();
        let mut t1 = Tape::new();
        let a = agcrn.forward_batch(&mut t1, &[&x], SupportOverride::Fixed(&sup)).unwrap();
        let mut t2 = Tape::new();
        let g = gcgru.forward_batch(&mut t2, &[&x], SupportOverride::None).unwrap();
        assert!(t1.value(a).max_abs_diff(t2.value(g)) <= 1e-12);
    }
}
