//! Central finite-difference gradient checking.
//!
//! [`check`] compares the tape's analytic gradients against
//! `(f(x + h) - f(x - h)) / 2h`, evaluated entry by entry on fresh tapes.
//! The error of one input is the norm-wise relative error
//! `|a - n| / max(|a|, |n|)`, falling back to the absolute difference when
//! both gradients are below `1e-7` in norm.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{EngineError, Matrix, SegmentMap, Tape, Var};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub per_input: Vec<f64>,
}

impl GradCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error.is_finite() && self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: &Matrix<f64>, numeric: &Matrix<f64>) -> f64 {
    let diff = analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.frobenius_norm().max(numeric.frobenius_norm());
    if scale < 1e-7 {
        diff
    } else {
        diff / scale
    }
}

/// Checks every input of `build`, which must return a `1 x 1` node computed
/// from the leaves it receives (one per input, all requiring grad).
pub fn check<F>(name: &str, inputs: &[Matrix<f64>], h: f64, build: F) -> Result<GradCheck, EngineError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, EngineError>,
{
    let eval = |values: &[Matrix<f64>]| -> Result<f64, EngineError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|m| tape.leaf(m.clone(), true)).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).get(0, 0))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.leaf(m.clone(), true)).collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;

    let mut per_input = Vec::with_capacity(inputs.len());
    let mut values = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let (rows, cols) = inputs[k].shape();
        let analytic = tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(rows, cols));
        let mut numeric = Matrix::zeros(rows, cols);
        for j in 0..rows * cols {
            let orig = values[k].as_slice()[j];
            values[k].as_mut_slice()[j] = orig + h;
            let plus = eval(&values)?;
            values[k].as_mut_slice()[j] = orig - h;
            let minus = eval(&values)?;
            values[k].as_mut_slice()[j] = orig;
            numeric.as_mut_slice()[j] = (plus - minus) / (2.0 * h);
        }
        per_input.push(relative_error(&analytic, &numeric));
    }
    let max_rel_error = per_input.iter().copied().fold(0.0, f64::max);
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error,
        per_input,
    })
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Entries bounded away from zero so piecewise-linear ops are smooth within `h`.
pub fn random_matrix_off_zero(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| {
        let mag = rng.gen_range(0.1..1.0);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    })
}

/// Reduces `out` to a scalar through a fixed random projection.
fn project(tape: &mut Tape<f64>, out: Var, weights: &Matrix<f64>) -> Result<Var, EngineError> {
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w)?;
    tape.sum(prod)
}

fn random_groups(rng: &mut impl Rng, groups: usize, sources: usize, allow_empty: bool) -> SegmentMap {
    let lists: Vec<Vec<usize>> = (0..groups)
        .map(|_| {
            let lo = usize::from(!allow_empty);
            let len = rng.gen_range(lo..=4);
            (0..len).map(|_| rng.gen_range(0..sources)).collect()
        })
        .collect();
    SegmentMap::from_groups(&lists, sources).expect("indices in range")
}

fn random_partition(rng: &mut impl Rng, rows: usize) -> SegmentMap {
    let mut order: Vec<usize> = (0..rows).collect();
    for i in (1..rows).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut offsets = vec![0];
    while *offsets.last().unwrap() < rows {
        let at = *offsets.last().unwrap();
        offsets.push((at + rng.gen_range(1..=3)).min(rows));
    }
    SegmentMap::new(offsets, order, rows).expect("valid partition")
}

/// One randomized check per differentiable tape op (dimensions at most 6).
pub fn op_suite(seed: u64) -> Result<Vec<GradCheck>, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = DEFAULT_STEP;
    let dim = |rng: &mut ChaCha8Rng| rng.gen_range(1..=6usize);
    let mut out = Vec::new();

    let (n, k, m) = (dim(&mut rng), dim(&mut rng), dim(&mut rng));
    let proj = random_matrix(&mut rng, n, m);
    out.push(check(
        "matmul",
        &[random_matrix(&mut rng, n, k), random_matrix(&mut rng, k, m)],
        h,
        |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, &proj)
        },
    )?);

    let p = dim(&mut rng);
    let proj = random_matrix(&mut rng, n, p);
    out.push(check(
        "matmul_chain",
        &[
            random_matrix(&mut rng, n, k),
            random_matrix(&mut rng, k, m),
            random_matrix(&mut rng, m, p),
        ],
        h,
        |t, v| {
            let y = t.matmul(v[0], v[1])?;
            let z = t.matmul(y, v[2])?;
            project(t, z, &proj)
        },
    )?);

    let (r, c) = (dim(&mut rng), dim(&mut rng));
    let proj = random_matrix(&mut rng, r, c);
    let pair = [random_matrix(&mut rng, r, c), random_matrix(&mut rng, r, c)];
    out.push(check("add", &pair, h, |t, v| {
        let y = t.add(v[0], v[1])?;
        project(t, y, &proj)
    })?);
    out.push(check("sub", &pair, h, |t, v| {
        let y = t.sub(v[0], v[1])?;
        project(t, y, &proj)
    })?);
    out.push(check("mul", &pair, h, |t, v| {
        let y = t.mul(v[0], v[1])?;
        project(t, y, &proj)
    })?);
    out.push(check(
        "add_row",
        &[pair[0].clone(), random_matrix(&mut rng, 1, c)],
        h,
        |t, v| {
            let y = t.add_row(v[0], v[1])?;
            project(t, y, &proj)
        },
    )?);
    let c0 = rng.gen_range(-2.0..2.0);
    out.push(check("scale", &pair[..1], h, |t, v| {
        let y = t.scale(v[0], c0)?;
        project(t, y, &proj)
    })?);
    let factors = Arc::new((0..r).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>());
    out.push(check("scale_rows", &pair[..1], h, |t, v| {
        let y = t.scale_rows(v[0], Arc::clone(&factors))?;
        project(t, y, &proj)
    })?);
    out.push(check(
        "scale_by",
        &[pair[0].clone(), random_matrix(&mut rng, 1, 1)],
        h,
        |t, v| {
            let y = t.scale_by(v[0], v[1])?;
            project(t, y, &proj)
        },
    )?);

    let c2 = dim(&mut rng);
    let proj_cat = random_matrix(&mut rng, r, c + c2);
    out.push(check(
        "concat_cols",
        &[pair[0].clone(), random_matrix(&mut rng, r, c2)],
        h,
        |t, v| {
            let y = t.concat_cols(&[v[0], v[1]])?;
            project(t, y, &proj_cat)
        },
    )?);

    let picks = Arc::new((0..dim(&mut rng) + 2).map(|_| rng.gen_range(0..r)).collect::<Vec<_>>());
    let proj_g = random_matrix(&mut rng, picks.len(), c);
    out.push(check("gather_rows", &pair[..1], h, |t, v| {
        let y = t.gather_rows(v[0], Arc::clone(&picks))?;
        project(t, y, &proj_g)
    })?);
    let start = rng.gen_range(0..r);
    let end = rng.gen_range(start..=r);
    let proj_s = random_matrix(&mut rng, end - start, c);
    out.push(check("row_slice", &pair[..1], h, |t, v| {
        let y = t.row_slice(v[0], start, end)?;
        project(t, y, &proj_s)
    })?);
    out.push(check(
        "mul_rows",
        &[pair[0].clone(), random_matrix(&mut rng, r, 1)],
        h,
        |t, v| {
            let y = t.mul_rows(v[0], v[1])?;
            project(t, y, &proj)
        },
    )?);

    let groups = dim(&mut rng);
    let sum_map = Arc::new(random_groups(&mut rng, groups, r, true));
    let mean_map = Arc::new(random_groups(&mut rng, groups, r, false));
    let proj_seg = random_matrix(&mut rng, groups, c);
    out.push(check("segment_sum", &pair[..1], h, |t, v| {
        let y = t.segment_sum(v[0], &sum_map)?;
        project(t, y, &proj_seg)
    })?);
    out.push(check("segment_mean", &pair[..1], h, |t, v| {
        let y = t.segment_mean(v[0], &mean_map)?;
        project(t, y, &proj_seg)
    })?);
    let soft_map = Arc::new(random_partition(&mut rng, r));
    let proj_soft = random_matrix(&mut rng, r, 1);
    out.push(check(
        "segment_softmax",
        &[random_matrix(&mut rng, r, 1)],
        h,
        |t, v| {
            let y = t.segment_softmax(v[0], &soft_map)?;
            project(t, y, &proj_soft)
        },
    )?);

    let kinked = [random_matrix_off_zero(&mut rng, r, c)];
    out.push(check("relu", &kinked, h, |t, v| {
        let y = t.relu(v[0])?;
        project(t, y, &proj)
    })?);
    out.push(check("leaky_relu", &kinked, h, |t, v| {
        let y = t.leaky_relu(v[0], 0.2)?;
        project(t, y, &proj)
    })?);
    let drop_seed = rng.gen::<u64>();
    out.push(check("dropout", &pair[..1], h, |t, v| {
        let mut local = ChaCha8Rng::seed_from_u64(drop_seed);
        let y = t.dropout(v[0], 0.4, true, &mut local)?;
        project(t, y, &proj)
    })?);
    out.push(check("row_l2_normalize", &kinked, h, |t, v| {
        let y = t.row_l2_normalize(v[0])?;
        project(t, y, &proj)
    })?);

    let classes = c.max(2);
    let labels = Arc::new((0..r).map(|_| rng.gen_range(0..classes)).collect::<Vec<_>>());
    let mask = Arc::new((0..r).filter(|_| rng.gen_bool(0.7)).chain([0]).collect::<Vec<_>>());
    out.push(check(
        "softmax_cross_entropy",
        &[random_matrix(&mut rng, r, classes)],
        h,
        |t, v| t.softmax_cross_entropy(v[0], Arc::clone(&labels), Arc::clone(&mask)),
    )?);
    out.push(check("sum", &pair[..1], h, |t, v| t.sum(v[0]))?);
    let proj_row = random_matrix(&mut rng, 1, c);
    out.push(check("sum_rows", &pair[..1], h, |t, v| {
        let y = t.sum_rows(v[0])?;
        project(t, y, &proj_row)
    })?);
    Ok(out)
}
