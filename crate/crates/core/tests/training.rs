use flockact::nn::{checkpoint_to_string, init_model, train, Mode, ModelKind, TrainConfig};
use flockact::pipeline::{ActivityLabel, FeatureFrame, FeatureSet, FeatureSpec, FrameSegment, WindowSet};
use flockact::rng::Rng;

/// 50 windows whose class is fixed by the flock's speed level: class c has
/// every speed near c, so a threshold on mean speed separates them.
fn separable_set(m: usize, seed: u64) -> WindowSet {
    let mut rng = Rng::new(seed);
    let segments: Vec<FrameSegment> = (0..50)
        .map(|i| {
            let label = ActivityLabel::from_index(i % 3).unwrap();
            let level = label.index() as f64;
            let frames = (0..m)
                .map(|_| {
                    let speeds: Vec<f64> = (0..2).map(|_| level + rng.uniform(-0.2, 0.2).unwrap()).collect();
                    FeatureFrame {
                        velocities: speeds.iter().map(|&s| [s, 0.0]).collect(),
                        centroid_dists: vec![1.0 + rng.uniform(-0.1, 0.1).unwrap(); 2],
                        speeds,
                    }
                })
                .collect();
            let base = 1000 * i as i64;
            FrameSegment {
                timestamps: (base..base + m as i64).collect(),
                frames,
                labels: vec![label; m],
            }
        })
        .collect();
    WindowSet::from_segments(&segments, m, FeatureSpec::new(FeatureSet::Velocities)).unwrap()
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        lookback: 5,
        hidden_dim: 8,
        n_filters: 4,
        learning_rate: 0.01,
        dropout_rate: 0.0,
        epochs: 50,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_set_is_learned() {
    let set = separable_set(5, 1);
    assert_eq!(set.len(), 50);
    for kind in [ModelKind::Lstm, ModelKind::CnnLstm] {
        let c = cfg(3);
        let model = init_model(kind, &set, 2, 3, &c).unwrap();
        let (model, log) = train(model, &set, &c).unwrap();
        assert_eq!(log.len(), c.epochs);
        let last = log.last().unwrap();
        assert!(last.loss < 0.1, "{kind}: final loss {}", last.loss);
        assert!(log[0].loss > last.loss);
        assert_eq!(flockact::nn::accuracy(&model, &set).unwrap(), 1.0);
    }
}

#[test]
fn same_seed_same_checkpoint() {
    let set = separable_set(5, 2);
    let run = |seed| {
        let c = TrainConfig { epochs: 3, dropout_rate: 0.3, ..cfg(seed) };
        let model = init_model(ModelKind::CnnLstm, &set, 2, 3, &c).unwrap();
        let (model, log) = train(model, &set, &c).unwrap();
        (checkpoint_to_string(&model).unwrap(), log)
    };
    let (a, log_a) = run(7);
    let (b, log_b) = run(7);
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    let (c, _) = run(8);
    assert_ne!(a, c);
}

#[test]
fn empty_training_set_is_a_contract_error() {
    let set = separable_set(5, 3);
    let c = cfg(0);
    let model = init_model(ModelKind::Lstm, &set, 2, 3, &c).unwrap();
    let empty = WindowSet::from_segments(&[], 5, FeatureSpec::new(FeatureSet::Velocities)).unwrap();
    assert!(matches!(train(model, &empty, &c), Err(flockact::Error::Contract(_))));
}

#[test]
fn zero_dropout_training_forward_equals_inference() {
    let set = separable_set(5, 4);
    let c = cfg(0);
    let model = init_model(ModelKind::Lstm, &set, 2, 3, &c).unwrap();
    let w = set.get(7);
    let mut rng = Rng::new(1);
    let (p_train, _) = model.forward(&w, Mode::Training { dropout_rate: 0.0, rng: &mut rng }).unwrap();
    let (p_eval, _) = model.forward(&w, Mode::Inference).unwrap();
    assert_eq!(p_train, p_eval);
}
