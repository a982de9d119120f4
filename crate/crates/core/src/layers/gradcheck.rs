//! Finite-difference checks of whole networks, one per variant.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::gradcheck::{check, random_matrix_off_zero, GradCheck, DEFAULT_STEP};
use crate::hypergraph::IncidenceStructure;

use super::{LayerError, Model, ModelSpec, Variant};

/// Random hypergraph where every vertex lies in at least one hyperedge.
pub fn random_hypergraph(rng: &mut impl Rng, n: usize, extra_edges: usize) -> IncidenceStructure {
    let mut edges: Vec<Vec<usize>> = (0..n).step_by(2).map(|i| vec![i, (i + 1) % n]).collect();
    for _ in 0..extra_edges {
        let k = rng.gen_range(1..=n.min(4));
        edges.push((0..k).map(|_| rng.gen_range(0..n)).collect());
    }
    IncidenceStructure::build(n, &edges).expect("ids in range")
}

/// Gradient of a masked cross-entropy through a 2-layer model of each
/// variant, in training mode with dropout active, with respect to the input
/// features and every parameter.
pub fn model_suite(seed: u64) -> Result<Vec<GradCheck>, LayerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let h = random_hypergraph(&mut rng, n, 3);
    let x = random_matrix_off_zero(&mut rng, n, 3);
    let labels: Arc<Vec<usize>> = Arc::new((0..n).map(|_| rng.gen_range(0..2)).collect());
    let mask: Arc<Vec<usize>> = Arc::new((0..n).filter(|i| i % 3 != 2).collect());
    let mut out = Vec::new();
    for variant in Variant::ALL {
        let mut spec = ModelSpec::new(variant, 3, 2);
        spec.hidden_dim = 3;
        spec.heads = 2;
        spec.dropout = 0.3;
        spec.attention_dropout = 0.3;
        spec.seed = seed;
        let mut model = Model::<f64>::new(spec)?;
        // non-zero eps and biases so their gradients are exercised off the origin
        for p in model.params_mut() {
            if p.name.ends_with("eps") || p.name.ends_with("bias") {
                p.value = random_matrix_off_zero(&mut rng, p.value.rows(), p.value.cols());
            }
        }
        let ctx = model.prepare(&h)?;
        let mut inputs = vec![x.clone()];
        inputs.extend(model.params().iter().map(|p| p.value.clone()));
        let mask_seed = rng.gen::<u64>();
        let result = check(variant.name(), &inputs, DEFAULT_STEP, |tape, vars| {
            let mut drop_rng = ChaCha8Rng::seed_from_u64(mask_seed);
            let logits = model
                .forward_bound(tape, &vars[1..], &ctx, vars[0], true, &mut drop_rng)
                .map_err(|e| match e {
                    LayerError::Engine(inner) => inner,
                    other => panic!("unexpected layer error in gradient check: {other}"),
                })?;
            tape.softmax_cross_entropy(logits, labels.clone(), mask.clone())
        })?;
        out.push(result);
    }
    Ok(out)
}
