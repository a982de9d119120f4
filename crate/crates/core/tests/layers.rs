mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unignn::autodiff::{Matrix, Tape};
use unignn::hypergraph::IncidenceStructure;
use unignn::layers::{
    propagate, unigat_layer, unigcnii_layer, unigin_layer, unisage_layer, GatHead, LayerContext, Model, ModelSpec,
    Variant,
};

use common::*;

#[test]
fn attention_is_a_distribution_over_incident_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.gen_range(2..10);
        let m = rng.gen_range(1..8);
        let h = random_hypergraph(&mut rng, n, m, 4).add_self_loops().unwrap();
        let ctx = LayerContext::<f64>::new(&h).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(from_dense(&random_dense(&mut rng, n, 3)));
        let heads: Vec<GatHead> = (0..3)
            .map(|_| GatHead {
                w: tape.constant(from_dense(&random_dense(&mut rng, 3, 2))),
                a: tape.constant(from_dense(&random_dense(&mut rng, 4, 1))),
            })
            .collect();
        let out = unigat_layer(&mut tape, x, &ctx, &heads, 0.5, true, true, &mut rng).unwrap();
        assert_eq!(tape.shape(out.out), (n, 6));
        for att in out.attention {
            let a = tape.value(att);
            let mut totals = vec![0.0; n];
            for (p, &v) in ctx.pair_vertices().iter().enumerate() {
                assert!(a.get(p, 0) >= 0.0);
                totals[v] += a.get(p, 0);
            }
            for t in totals {
                assert!((t - 1.0).abs() < 1e-12, "{t}");
            }
        }
    }
}

#[test]
fn gin_with_zero_epsilon_is_sage() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = random_hypergraph(&mut rng, 9, 6, 4);
    let ctx = LayerContext::<f64>::new(&h).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(from_dense(&random_dense(&mut rng, 9, 4)));
    let w = tape.constant(from_dense(&random_dense(&mut rng, 4, 3)));
    let eps = tape.constant(Matrix::zeros(1, 1));
    let gin = unigin_layer(&mut tape, x, &ctx, w, Some(eps)).unwrap();
    let sage = unisage_layer(&mut tape, x, &ctx, w).unwrap();
    assert!(max_abs_diff(tape.value(gin), tape.value(sage)) < 1e-14);
}

#[test]
fn gcnii_degenerate_settings() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_hypergraph(&mut rng, 8, 5, 3).add_self_loops().unwrap();
    let ctx = LayerContext::<f64>::new(&h).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(from_dense(&random_dense(&mut rng, 8, 4)));
    let x0 = tape.constant(from_dense(&random_dense(&mut rng, 8, 4)));
    let w = tape.constant(from_dense(&random_dense(&mut rng, 4, 4)));
    // alpha = 0, beta = 1: plain propagation then W
    let out = unigcnii_layer(&mut tape, x, x0, &ctx, w, 0.0, 1.0, false).unwrap();
    let p = propagate(&mut tape, x, &ctx).unwrap();
    let expect = tape.matmul(p, w).unwrap();
    assert!(max_abs_diff(tape.value(out), tape.value(expect)) < 1e-12);
    // alpha = 1, beta = 0: the initial residual passes through unchanged
    let out = unigcnii_layer(&mut tape, x, x0, &ctx, w, 1.0, 0.0, false).unwrap();
    assert!(max_abs_diff(tape.value(out), tape.value(x0)) < 1e-12);
}

#[test]
fn without_self_loops_members_of_one_edge_collapse() {
    // each vertex sees only h_e, so own features cannot matter
    let h = IncidenceStructure::build(3, &[vec![0, 1, 2]]).unwrap();
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [3.0, -2.0]]);
    for loops in [false, true] {
        let mut spec = ModelSpec::new(Variant::UniGcn, 2, 3);
        spec.hidden_dim = 4;
        spec.self_loops = Some(loops);
        let model = Model::<f64>::new(spec).unwrap();
        let y = model.predict(&model.prepare(&h).unwrap(), &x).unwrap();
        let rows_equal = (1..3).all(|r| y.row(r) == y.row(0));
        assert_eq!(rows_equal, !loops, "self_loops = {loops}");
    }
}

#[test]
fn model_outputs_have_expected_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = random_hypergraph(&mut rng, 12, 8, 4);
    let x = from_dense(&random_dense(&mut rng, 12, 5));
    for variant in Variant::ALL {
        for layers in [1, 2, 4] {
            let mut spec = ModelSpec::new(variant, 5, 3);
            spec.num_layers = layers;
            spec.hidden_dim = 6;
            spec.heads = 2;
            let model = Model::<f64>::new(spec).unwrap();
            let y = model.predict(&model.prepare(&h).unwrap(), &x).unwrap();
            assert_eq!(y.shape(), (12, 3), "{variant} L={layers}");
            assert!(y.all_finite());
        }
    }
}

#[test]
fn save_load_round_trip_across_precisions() {
    let dir = tempfile::tempdir().unwrap();
    let (blob, manifest) = (dir.path().join("w.bin"), dir.path().join("w.json"));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_hypergraph(&mut rng, 10, 6, 4);
    let x = from_dense(&random_dense(&mut rng, 10, 4));
    for variant in Variant::ALL {
        let mut spec = ModelSpec::new(variant, 4, 3);
        spec.hidden_dim = 5;
        spec.heads = 2;
        let model = Model::<f64>::new(spec).unwrap();
        model.save(&blob, &manifest).unwrap();
        let same = Model::<f64>::load(&blob, &manifest).unwrap();
        assert_eq!(same.params(), model.params());
        let narrow = Model::<f32>::load(&blob, &manifest).unwrap();
        let y = model.predict(&model.prepare(&h).unwrap(), &x).unwrap();
        let y32 = narrow.predict(&narrow.prepare(&h).unwrap(), &x.cast()).unwrap();
        assert!(max_abs_diff(&y, &y32.cast()) < 1e-4, "{variant}");
    }
}
