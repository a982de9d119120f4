use std::collections::BTreeMap;

use unignn::autodiff::Matrix;
use unignn::hypergraph::IncidenceStructure;
use unignn::layers::{ModelSpec, Variant};
use unignn::train::synthetic::{planted_partition, SyntheticConfig};
use unignn::train::{
    accuracy, depth_sweep, evaluate, grid, self_loop_ablation, sweep, train_inductive, train_on_visible,
    train_transductive, DatasetBundle, InductiveSplit, ReportRule, Split, SweepProtocol, TrainConfig, TrainError,
    WeightDecay,
};

fn small() -> DatasetBundle {
    planted_partition(&SyntheticConfig {
        num_vertices: 160,
        num_edges: 100,
        feature_dim: 24,
        label_rate: 0.1,
        ..SyntheticConfig::default()
    })
}

fn config(bundle: &DatasetBundle, variant: Variant, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig::reference(ModelSpec::new(variant, bundle.feature_dim(), bundle.num_classes));
    c.epochs = epochs;
    if c.patience >= epochs {
        c.patience = 0;
    }
    c
}

/// Two separable classes on disjoint edges.
fn two_class_toy() -> DatasetBundle {
    let edges = vec![vec![0, 1, 2], vec![3, 4, 5]];
    let features = Matrix::<f64>::from_rows(&[[1.0, 0.0], [0.9, 0.1], [1.0, 0.2], [0.0, 1.0], [0.1, 0.9], [0.2, 1.0]]).cast();
    let mut splits = BTreeMap::new();
    splits.insert(
        "0".to_string(),
        Split {
            train: vec![0, 3],
            val: vec![1, 4],
            test: vec![2, 5],
        },
    );
    DatasetBundle {
        name: "toy".into(),
        hypergraph: IncidenceStructure::build(6, &edges).unwrap(),
        features,
        labels: vec![0, 0, 0, 1, 1, 1],
        num_classes: 2,
        splits,
        label_rate: None,
    }
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let b = small();
    for variant in Variant::ALL {
        let mut c = config(&b, variant, 3);
        c.lr = 0.0;
        c.weight_decay = WeightDecay::Single(0.0);
        let run = train_transductive::<f64>(&b, &c).unwrap();
        let fresh = unignn::layers::Model::<f64>::new(run.model.spec().clone()).unwrap();
        assert_eq!(run.model.params(), fresh.params(), "{variant}");
    }
}

#[test]
fn one_large_step_lowers_loss() {
    let b = two_class_toy();
    let mut c = config(&b, Variant::UniGcn, 1);
    c.lr = 0.5;
    c.weight_decay = WeightDecay::Single(0.0);
    c.model.dropout = 0.0;
    c.model.hidden_dim = 8;
    let run = train_transductive::<f64>(&b, &c).unwrap();
    let r = &run.record;
    assert!(r.train_loss_after < r.train_loss_before, "{} -> {}", r.train_loss_before, r.train_loss_after);
    assert!(r.train_loss_after < 2f64.ln());
}

#[test]
fn planted_partition_is_learnable() {
    let b = small();
    for variant in Variant::ALL {
        let c = config(&b, variant, if variant == Variant::UniGcnii { 200 } else { 100 });
        let run = train_transductive::<f32>(&b, &c).unwrap();
        assert!(run.record.test_accuracy > 0.5, "{variant}: {}", run.record.test_accuracy);
    }
}

#[test]
fn best_validation_reports_an_earlier_epoch_when_asked() {
    let b = small();
    let mut c = config(&b, Variant::UniGcn, 60);
    c.report_rule = ReportRule::BestValidation;
    c.patience = 5;
    let run = train_transductive::<f64>(&b, &c).unwrap();
    assert!(run.record.reported_epoch <= run.record.epochs_run);
    assert!(run.record.val_accuracy.is_some());
    let again = evaluate(&run.model, &b, &b.split("0").unwrap().test).unwrap();
    assert_eq!(again, run.record.test_accuracy);
}

#[test]
fn inductive_without_unseen_vertices() {
    let b = small();
    let c = config(&b, Variant::UniGcn, 20);
    let run = train_inductive::<f64>(&b, &c, 0.0, 0.2).unwrap();
    assert!(run.record.unseen_accuracy.is_none());
    assert_eq!(run.record.seen_accuracy, Some(run.record.test_accuracy));
}

#[test]
fn vertex_isolated_by_induction_gets_finite_logits() {
    // vertex 2 only shares an edge with unseen vertex 3
    let mut b = two_class_toy();
    b.hypergraph = IncidenceStructure::build(6, &[vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
    let split = InductiveSplit {
        train: vec![0, 5],
        seen_test: vec![1, 2, 4],
        unseen: vec![3],
    };
    for variant in Variant::ALL {
        let c = config(&b, variant, 5);
        let model = train_on_visible::<f64>(&b, &split, &c).unwrap();
        let (induced, map) = b.hypergraph.induce(&split.visible()).unwrap();
        let visible_x = b.features.cast::<f64>().select_rows(&split.visible());
        let y = model.predict(&model.prepare(&induced).unwrap(), &visible_x).unwrap();
        assert!(y.all_finite(), "{variant}");
        assert_eq!(map[3], None);
    }
}

#[test]
fn accuracy_and_evaluate_edge_cases() {
    let b = two_class_toy();
    let run = train_transductive::<f64>(&b, &config(&b, Variant::UniSage, 5)).unwrap();
    assert!(matches!(evaluate(&run.model, &b, &[]), Err(TrainError::EmptyMask(_))));
    let logits = Matrix::<f64>::from_rows(&[[0.0, 0.0]]);
    // ties resolve to the first class
    assert_eq!(accuracy(&logits, &[0], &[0]).unwrap(), 1.0);
    let mut wrong = small();
    wrong.num_classes += 1;
    assert!(matches!(evaluate(&run.model, &wrong, &[0]), Err(TrainError::DimensionMismatch(_))));
}

#[test]
fn ablation_arms_agree_when_singletons_already_exist() {
    let mut b = small();
    b.hypergraph = b.hypergraph.add_self_loops().unwrap();
    let c = config(&b, Variant::UniGcn, 15);
    let cells = grid(&["0".to_string()], &[1, 2]);
    let (with, without) = self_loop_ablation::<f64>(&b, &c, &cells, 2).unwrap();
    assert_eq!(with.runs, without.runs);
    let gin = config(&b, Variant::UniGin, 5);
    assert!(self_loop_ablation::<f64>(&b, &gin, &cells, 1).is_err());
}

#[test]
fn depth_sweep_cells_and_oom() {
    let b = small();
    let bases = [config(&b, Variant::UniGcn, 10), config(&b, Variant::UniGcnii, 10)];
    let cells = grid(&["0".to_string()], &[1]);
    let table = depth_sweep::<f64>(&b, &bases, &[2, 4], &cells, 1, usize::MAX).unwrap();
    assert_eq!(table.len(), 4);
    assert!(table.iter().all(|c| c.report.is_some() && c.failure.is_none()));
    let oom = depth_sweep::<f64>(&b, &bases, &[2], &cells, 1, 1).unwrap();
    assert!(oom.iter().all(|c| c.report.is_none() && c.failure.as_deref().unwrap().starts_with("OOM")));
}

#[test]
fn sweeps_are_independent_of_job_count() {
    let b = small();
    let c = config(&b, Variant::UniGat, 10);
    let cells = grid(&["0".to_string(), "1".to_string()], &[1, 2]);
    for protocol in [
        SweepProtocol::Transductive,
        SweepProtocol::Inductive {
            unseen_fraction: 0.4,
            train_fraction: 0.2,
        },
    ] {
        let a = sweep::<f32>(&b, &c, protocol, &cells, 1).unwrap();
        let p = sweep::<f32>(&b, &c, protocol, &cells, 3).unwrap();
        assert_eq!(a.comparable_json(), p.comparable_json());
        assert_eq!(a.runs.len(), 4);
    }
}

#[test]
fn dataset_json_round_trip_and_errors() {
    let b = small();
    let text = serde_json::to_string(&b.to_json()).unwrap();
    let back = DatasetBundle::from_json_str(&text).unwrap();
    assert_eq!(back.labels, b.labels);
    assert_eq!(back.features, b.features);
    assert_eq!(back.hypergraph.edge_lists(), b.hypergraph.edge_lists());

    let bad = r#"{"name":"x","num_vertices":2,"hyperedges":[[0,1]],"features":{"dense":[[1],[2]]},"labels":[0,5],"num_classes":2}"#;
    match DatasetBundle::from_json_str(bad) {
        Err(TrainError::Schema { path, .. }) => assert_eq!(path, "labels[1]"),
        other => panic!("{other:?}"),
    }
    let unknown = r#"{"name":"x","num_vertices":1,"hyperedges":[],"features":{"dense":[[1]]},"labels":[0],"num_classes":1,"extra":1}"#;
    assert!(matches!(DatasetBundle::from_json_str(unknown), Err(TrainError::Schema { .. })));
}
