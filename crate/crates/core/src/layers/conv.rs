use rand::Rng;

use crate::autodiff::{EngineError, Scalar, Tape, Var};

use super::LayerContext;

/// Negative slope of the leaky ReLU applied to attention scores.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// `h_e = mean_{j in e} x_j` for every hyperedge.
pub fn stage1_mean<T: Scalar>(tape: &mut Tape<T>, x: Var, ctx: &LayerContext<T>) -> Result<Var, EngineError> {
    tape.segment_mean(x, &ctx.stage1)
}

/// `1/sqrt(d_i) * sum_{e in E_i} 1/sqrt(d_e) * h_e` without any weight.
pub fn propagate<T: Scalar>(tape: &mut Tape<T>, x: Var, ctx: &LayerContext<T>) -> Result<Var, EngineError> {
    let he = stage1_mean(tape, x, ctx)?;
    let he = tape.scale_rows(he, ctx.inv_sqrt_de.clone())?;
    let agg = tape.segment_sum(he, &ctx.stage2)?;
    tape.scale_rows(agg, ctx.inv_sqrt_dv.clone())
}

/// UniGCN. `W` is applied to the vertex features before pooling, which equals
/// `W h_e` by linearity of the mean.
pub fn unigcn_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    ctx: &LayerContext<T>,
    w: Var,
) -> Result<Var, EngineError> {
    let xw = tape.matmul(x, w)?;
    propagate(tape, xw, ctx)
}

/// Propagate, optionally row-normalize, then transform.
pub fn unigcn_star_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    ctx: &LayerContext<T>,
    w: Var,
    normalize: bool,
) -> Result<Var, EngineError> {
    let mut agg = propagate(tape, x, ctx)?;
    if normalize {
        agg = tape.row_l2_normalize(agg)?;
    }
    tape.matmul(agg, w)
}

/// `W((1 + eps) x_i + sum_{e in E_i} h_e)`. `eps = None` means `eps = 0`.
pub fn unigin_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    ctx: &LayerContext<T>,
    w: Var,
    eps: Option<Var>,
) -> Result<Var, EngineError> {
    let xw = tape.matmul(x, w)?;
    let he = stage1_mean(tape, xw, ctx)?;
    let agg = tape.segment_sum(he, &ctx.stage2)?;
    let own = match eps {
        Some(e) => {
            let extra = tape.scale_by(xw, e)?;
            tape.add(xw, extra)?
        }
        None => xw,
    };
    tape.add(own, agg)
}

/// `W(x_i + sum_{e in E_i} h_e)`.
pub fn unisage_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    ctx: &LayerContext<T>,
    w: Var,
) -> Result<Var, EngineError> {
    unigin_layer(tape, x, ctx, w, None)
}

/// `((1 - beta) I + beta W)((1 - alpha) x_hat + alpha x0)` where `x_hat` is
/// the UniGCN propagation of `x` (optionally row-normalized).
#[allow(clippy::too_many_arguments)]
pub fn unigcnii_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    x0: Var,
    ctx: &LayerContext<T>,
    w: Var,
    alpha: f64,
    beta: f64,
    normalize: bool,
) -> Result<Var, EngineError> {
    let mut xhat = propagate(tape, x, ctx)?;
    if normalize {
        xhat = tape.row_l2_normalize(xhat)?;
    }
    let a = tape.scale(xhat, T::c(1.0 - alpha))?;
    let b = tape.scale(x0, T::c(alpha))?;
    let z = tape.add(a, b)?;
    let zw = tape.matmul(z, w)?;
    let keep = tape.scale(z, T::c(1.0 - beta))?;
    let mapped = tape.scale(zw, T::c(beta))?;
    tape.add(keep, mapped)
}

/// Parameters of one attention head: `W` (`d x d'`) and `a` (`2d' x 1`,
/// self half first).
#[derive(Debug, Clone, Copy)]
pub struct GatHead {
    pub w: Var,
    pub a: Var,
}

pub struct GatOutput {
    pub out: Var,
    /// Normalized attention per head, one row per incidence pair (pre-dropout).
    pub attention: Vec<Var>,
}

/// UniGAT. Scores `leaky(a^T [W h_{i}; W h_e])` are normalized per vertex over
/// its incident hyperedges; `h_{i}` is `x_i` because the singleton mean is the
/// identity. Heads are concatenated when `concat`, averaged otherwise.
#[allow(clippy::too_many_arguments)]
pub fn unigat_layer<T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<T>,
    x: Var,
    ctx: &LayerContext<T>,
    heads: &[GatHead],
    attention_dropout: f64,
    training: bool,
    concat: bool,
    rng: &mut R,
) -> Result<GatOutput, EngineError> {
    let mut outs = Vec::with_capacity(heads.len());
    let mut attention = Vec::with_capacity(heads.len());
    for head in heads {
        let xw = tape.matmul(x, head.w)?;
        let width = tape.shape(xw).1;
        if tape.shape(head.a) != (2 * width, 1) {
            return Err(EngineError::ShapeMismatch {
                op: "unigat attention",
                left: tape.shape(head.a),
                right: (2 * width, 1),
            });
        }
        let he = stage1_mean(tape, xw, ctx)?;
        let a_self = tape.row_slice(head.a, 0, width)?;
        let a_edge = tape.row_slice(head.a, width, 2 * width)?;
        let s_self = tape.matmul(xw, a_self)?;
        let s_edge = tape.matmul(he, a_edge)?;
        let s_self = tape.gather_rows(s_self, ctx.pair_vertex.clone())?;
        let s_edge = tape.gather_rows(s_edge, ctx.pair_edge.clone())?;
        let scores = tape.add(s_self, s_edge)?;
        let scores = tape.leaky_relu(scores, T::c(ATTENTION_SLOPE))?;
        let alpha = tape.segment_softmax(scores, &ctx.softmax_groups)?;
        attention.push(alpha);
        let alpha = tape.dropout(alpha, attention_dropout, training, rng)?;
        let messages = tape.gather_rows(he, ctx.pair_edge.clone())?;
        let weighted = tape.mul_rows(messages, alpha)?;
        outs.push(tape.segment_sum(weighted, &ctx.pair_sum)?);
    }
    let out = if outs.len() == 1 {
        outs[0]
    } else if concat {
        tape.concat_cols(&outs)?
    } else {
        let mut acc = outs[0];
        for &o in &outs[1..] {
            acc = tape.add(acc, o)?;
        }
        tape.scale(acc, T::c(1.0 / outs.len() as f64))?
    };
    Ok(GatOutput { out, attention })
}

/// Column sums over all vertices.
pub fn sum_readout<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Result<Var, EngineError> {
    tape.sum_rows(x)
}
