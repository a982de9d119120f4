use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Scalar, Tape, Var};
use crate::hypergraph::IncidenceStructure;

use super::conv::{
    unigat_layer, unigcn_layer, unigcn_star_layer, unigcnii_layer, unigin_layer, unisage_layer, GatHead,
};
use super::{LayerContext, LayerError, ModelSpec, Variant};

/// Weight decay group. Only `UniGcnii` has `Dense` parameters (its input
/// projection and classifier).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Conv,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub group: ParamGroup,
    pub value: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub group: ParamGroup,
    pub rows: usize,
    pub cols: usize,
    /// Element offset into the blob.
    pub offset: usize,
}

/// Sidecar describing a weights blob: element type, the `ModelSpec` that built the
/// model, and where each tensor lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub dtype: String,
    pub spec: ModelSpec,
    pub tensors: Vec<TensorEntry>,
}

/// A network described by a [`ModelSpec`] together with its parameters.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ModelSpec,
    params: Vec<Param<T>>,
}

enum Init {
    Glorot,
    Zero,
}

impl<T: Scalar> Model<T> {
    /// Builds and initializes parameters from `spec.seed`.
    pub fn new(spec: ModelSpec) -> Result<Self, LayerError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut params = Vec::new();
        let mut add = |name: String, group, rows: usize, cols: usize, init: Init| {
            let value = match init {
                Init::Glorot => {
                    let limit = (6.0 / (rows + cols) as f64).sqrt();
                    Matrix::from_fn(rows, cols, |_, _| T::c(rng.gen_range(-limit..limit)))
                }
                Init::Zero => Matrix::zeros(rows, cols),
            };
            params.push(Param { name, group, value });
        };
        let s = &spec;
        let layer_dims = |l: usize, in_width: usize| {
            let din = if l == 0 { s.input_dim } else { in_width };
            let dout = if l + 1 == s.num_layers { s.num_classes } else { s.hidden_dim };
            (din, dout)
        };
        match s.variant {
            Variant::UniGcn | Variant::UniSage | Variant::UniGcnStar | Variant::UniGin => {
                for l in 0..s.num_layers {
                    let (din, dout) = layer_dims(l, s.hidden_dim);
                    add(format!("conv{l}.weight"), ParamGroup::Conv, din, dout, Init::Glorot);
                    if s.variant == Variant::UniGin && s.epsilon_learnable {
                        add(format!("conv{l}.eps"), ParamGroup::Conv, 1, 1, Init::Zero);
                    }
                }
            }
            Variant::UniGat => {
                for l in 0..s.num_layers {
                    let (din, dout) = layer_dims(l, s.hidden_dim * s.heads);
                    for h in 0..s.heads {
                        add(format!("conv{l}.head{h}.weight"), ParamGroup::Conv, din, dout, Init::Glorot);
                        add(format!("conv{l}.head{h}.att"), ParamGroup::Conv, 2 * dout, 1, Init::Glorot);
                    }
                }
            }
            Variant::UniGcnii => {
                add("input.weight".into(), ParamGroup::Dense, s.input_dim, s.hidden_dim, Init::Glorot);
                add("input.bias".into(), ParamGroup::Dense, 1, s.hidden_dim, Init::Zero);
                for l in 1..=s.num_layers {
                    add(format!("conv{l}.weight"), ParamGroup::Conv, s.hidden_dim, s.hidden_dim, Init::Glorot);
                }
                add("output.weight".into(), ParamGroup::Dense, s.hidden_dim, s.num_classes, Init::Glorot);
                add("output.bias".into(), ParamGroup::Dense, 1, s.num_classes, Init::Zero);
            }
        }
        Ok(Model { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Replaces a parameter value; the shape must match.
    pub fn set_param(&mut self, name: &str, value: Matrix<T>) -> Result<(), LayerError> {
        let p = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| LayerError::InvalidSpec(format!("no parameter named '{name}'")))?;
        if p.value.shape() != value.shape() {
            return Err(LayerError::DimensionMismatch(format!(
                "{name}: expected {:?}, got {:?}",
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Applies the variant's structural preprocessing and caches the maps.
    pub fn prepare(&self, h: &IncidenceStructure) -> Result<LayerContext<T>, LayerError> {
        if self.spec.uses_self_loops() {
            LayerContext::new(&h.add_self_loops()?)
        } else {
            LayerContext::new(h)
        }
    }

    /// Registers every parameter as a gradient-tracking leaf, in `params()` order.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone(), true)).collect()
    }

    /// Records the forward pass using parameters previously returned by
    /// [`Model::bind`]. Returns logits (`n x num_classes`).
    pub fn forward_bound<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        params: &[Var],
        ctx: &LayerContext<T>,
        x: Var,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, LayerError> {
        let s = &self.spec;
        let (rows, cols) = tape.shape(x);
        if rows != ctx.num_vertices() || cols != s.input_dim {
            return Err(LayerError::DimensionMismatch(format!(
                "features are {rows}x{cols}, model expects {}x{}",
                ctx.num_vertices(),
                s.input_dim
            )));
        }
        if params.len() != self.params.len() {
            return Err(LayerError::DimensionMismatch(format!(
                "{} bound parameters for a model with {}",
                params.len(),
                self.params.len()
            )));
        }
        let mut next = params.iter().copied();
        let mut take = move || next.next().expect("parameter layout follows construction order");
        let last = s.num_layers - 1;

        if s.variant == Variant::UniGcnii {
            let h = tape.dropout(x, s.input_dropout(), training, rng)?;
            let (w, b) = (take(), take());
            let h = tape.matmul(h, w)?;
            let h = tape.add_row(h, b)?;
            let x0 = tape.relu(h)?;
            let mut h = x0;
            for l in 1..=s.num_layers {
                let w = take();
                let inp = tape.dropout(h, s.dropout, training, rng)?;
                let out = unigcnii_layer(tape, inp, x0, ctx, w, s.alpha, s.gcnii_beta(l), s.use_norm)?;
                h = tape.relu(out)?;
            }
            let h = tape.dropout(h, s.dropout, training, rng)?;
            let (w, b) = (take(), take());
            let logits = tape.matmul(h, w)?;
            return Ok(tape.add_row(logits, b)?);
        }

        let mut h = x;
        for l in 0..s.num_layers {
            let p = if l == 0 { s.input_dropout() } else { s.dropout };
            let inp = tape.dropout(h, p, training, rng)?;
            let mut out = match s.variant {
                Variant::UniGcn => unigcn_layer(tape, inp, ctx, take())?,
                Variant::UniSage => unisage_layer(tape, inp, ctx, take())?,
                Variant::UniGin => {
                    let w = take();
                    let eps = s.epsilon_learnable.then(&mut take);
                    unigin_layer(tape, inp, ctx, w, eps)?
                }
                Variant::UniGcnStar => unigcn_star_layer(tape, inp, ctx, take(), s.use_norm)?,
                Variant::UniGat => {
                    let heads: Vec<GatHead> = (0..s.heads)
                        .map(|_| {
                            let w = take();
                            GatHead { w, a: take() }
                        })
                        .collect();
                    let concat = l != last;
                    unigat_layer(tape, inp, ctx, &heads, s.attention_dropout, training, concat, rng)?.out
                }
                Variant::UniGcnii => unreachable!(),
            };
            if s.use_norm && s.variant != Variant::UniGcnStar {
                out = tape.row_l2_normalize(out)?;
            }
            if l != last {
                out = tape.relu(out)?;
            }
            h = out;
        }
        Ok(h)
    }

    /// Eval-mode logits on a fresh tape.
    pub fn predict(&self, ctx: &LayerContext<T>, x: &Matrix<T>) -> Result<Matrix<T>, LayerError> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.value.clone())).collect();
        let xv = tape.constant(x.clone());
        // eval mode never draws from the rng
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = self.forward_bound(&mut tape, &params, ctx, xv, false, &mut rng)?;
        Ok(tape.value(out).clone())
    }

    pub fn manifest(&self) -> WeightsManifest {
        let mut offset = 0;
        let tensors = self
            .params
            .iter()
            .map(|p| {
                let e = TensorEntry {
                    name: p.name.clone(),
                    group: p.group,
                    rows: p.value.rows(),
                    cols: p.value.cols(),
                    offset,
                };
                offset += p.value.len();
                e
            })
            .collect();
        WeightsManifest {
            dtype: T::NAME.to_string(),
            spec: self.spec.clone(),
            tensors,
        }
    }

    /// Writes the parameters as one little-endian blob plus a JSON manifest.
    pub fn save(&self, blob: &Path, manifest: &Path) -> Result<(), LayerError> {
        let mut bytes = Vec::with_capacity(self.num_scalars() * T::BYTES);
        for p in &self.params {
            for &v in p.value.as_slice() {
                v.write_le(&mut bytes);
            }
        }
        let io = |path: &Path, e: std::io::Error| LayerError::Weights(format!("{}: {e}", path.display()));
        std::fs::write(blob, bytes).map_err(|e| io(blob, e))?;
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        std::fs::write(manifest, text).map_err(|e| io(manifest, e))?;
        Ok(())
    }

    /// Rebuilds a model from [`Model::save`] output. Blobs written in the
    /// other precision are converted.
    pub fn load(blob: &Path, manifest: &Path) -> Result<Self, LayerError> {
        let io = |path: &Path, e: std::io::Error| LayerError::Weights(format!("{}: {e}", path.display()));
        let text = std::fs::read_to_string(manifest).map_err(|e| io(manifest, e))?;
        let m: WeightsManifest = serde_json::from_str(&text)
            .map_err(|e| LayerError::Weights(format!("{}: {e}", manifest.display())))?;
        let bytes = std::fs::read(blob).map_err(|e| io(blob, e))?;
        let mut model = Model::<T>::new(m.spec.clone())?;
        let width = match m.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            other => return Err(LayerError::Weights(format!("unsupported dtype '{other}'"))),
        };
        if m.tensors.len() != model.params.len() {
            return Err(LayerError::Weights(format!(
                "manifest lists {} tensors, spec implies {}",
                m.tensors.len(),
                model.params.len()
            )));
        }
        for (entry, param) in m.tensors.iter().zip(model.params.iter_mut()) {
            if entry.name != param.name || (entry.rows, entry.cols) != param.value.shape() {
                return Err(LayerError::Weights(format!(
                    "tensor '{}' ({}x{}) does not match expected '{}' {:?}",
                    entry.name,
                    entry.rows,
                    entry.cols,
                    param.name,
                    param.value.shape()
                )));
            }
            let start = entry.offset * width;
            let end = start + entry.rows * entry.cols * width;
            let chunk = bytes.get(start..end).ok_or_else(|| {
                LayerError::Weights(format!("blob too short for tensor '{}'", entry.name))
            })?;
            let data: Vec<T> = chunk
                .chunks_exact(width)
                .map(|b| if width == 4 { T::c(f32::read_le(b) as f64) } else { T::c(f64::read_le(b)) })
                .collect();
            param.value = Matrix::from_vec(entry.rows, entry.cols, data)?;
        }
        Ok(model)
    }
}
