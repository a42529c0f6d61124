use std::sync::OnceLock;

use proptest::prelude::*;
use uidgnn_core::diffmath::checkpoint;
use uidgnn_core::gnn::{augment_features, Augmentation, ModelConfig, ModelParams, Readout};
use uidgnn_core::graph::{generate, generate_pair_family, label_triangles, GeneratorSpec, Graph, PairFamily};
use uidgnn_core::seed;
use uidgnn_core::training::{evaluate, train, Example, TrainConfig, TrainMode};

fn small_model(readout: Readout) -> ModelConfig {
    ModelConfig {
        layers: 3,
        hidden_dim: 8,
        rnf_dim: 4,
        readout,
        ..ModelConfig::default()
    }
}

fn examples(count: usize, seed: u64) -> Vec<Example> {
    (0..count as u64)
        .map(|i| {
            let g = generate(&GeneratorSpec::barabasi_albert(16, 2, seed * 100 + i)).unwrap();
            let labels = label_triangles(&g).as_targets();
            Example::new(g, labels)
        })
        .collect()
}

fn trained(mode: TrainMode) -> (ModelConfig, ModelParams) {
    let model = small_model(Readout::Node);
    let cfg = TrainConfig {
        mode,
        epochs: 5,
        lr: 1e-2,
        seed: 11,
        ..TrainConfig::default()
    };
    let (params, history) = train(&examples(4, 1), &examples(2, 2), &cfg, &model).unwrap();
    assert_eq!(history.len(), 5);
    assert!(params.is_finite());
    (model, params)
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let (model, params) = trained(TrainMode::Siri);
    let text = params.checkpoint_text();
    let restored = ModelParams::from_checkpoint(&model, checkpoint::decode(&text, "mem").unwrap()).unwrap();
    assert_eq!(restored.checkpoint_text(), text);
    let test = examples(3, 3);
    for mode in [TrainMode::Constant, TrainMode::Rni, TrainMode::Siri] {
        assert_eq!(
            evaluate(&params, &test, mode, 4).unwrap(),
            evaluate(&restored, &test, mode, 4).unwrap()
        );
    }
}

#[test]
fn constant_inputs_give_wl_equivalent_pairs_equal_graph_embeddings() {
    let params = ModelParams::init(&small_model(Readout::GraphSumMlp), 3).unwrap();
    let logits = |g: &Graph| {
        let h0 = augment_features(g, Augmentation::Constant { width: 4 }).unwrap();
        params.forward(g, &h0).unwrap().logits
    };
    for family in PairFamily::ALL {
        for pair in generate_pair_family(family, 3, 8).unwrap() {
            let gap = logits(&pair.first).max_abs_diff(&logits(&pair.second));
            assert!(gap < 1e-9, "{} {}: {gap}", family.name(), pair.id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Relabeling the graph and its random features together permutes the
    /// node predictions of a trained model.
    #[test]
    fn trained_models_stay_equivariant(graph_seed in 0u64..1000, draw in 0u64..1000, perm_seed in 0u64..1000) {
        static TRAINED: OnceLock<(ModelConfig, ModelParams)> = OnceLock::new();
        let (model, params) = TRAINED.get_or_init(|| trained(TrainMode::Siri));
        let g = generate(&GeneratorSpec::barabasi_albert(20, 2, graph_seed)).unwrap();
        let r = model.rnf_spec().stream(draw).draw_at(0, g.n());
        let (pg, perm) = g.shuffled(&mut seed::rng(perm_seed));
        let out = params.forward(&g, &augment_features(&g, Augmentation::Random(&r)).unwrap()).unwrap();
        let pr = r.permute_rows(&perm);
        let pout = params.forward(&pg, &augment_features(&pg, Augmentation::Random(&pr)).unwrap()).unwrap();
        prop_assert!(out.logits.permute_rows(&perm).max_abs_diff(&pout.logits) < 1e-9);
    }
}
