use std::sync::Arc;

use rand::Rng;

use super::params::{Layer, LayerWeights, ModelParams, SlotWeights};
use super::spec::{Activation, ModelKind, Slot};
use crate::error::{Error, Result};
use crate::graph::RelationalGraph;
use crate::tensor::{CsrMatrix, Matrix, Tape, Var};

/// Parameters registered on a tape.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub layers: Vec<Layer<Var>>,
}

impl BoundParams {
    /// Variables in the same order as [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|l| l.tensors()).copied().collect()
    }
}

impl ModelParams {
    /// Registers every tensor as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            layers: self.layers.iter().map(|l| l.map(|m| tape.param(m.clone()))).collect(),
        }
    }

    /// Registers every tensor as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            layers: self
                .layers
                .iter()
                .map(|l| l.map(|m| tape.constant(m.clone())))
                .collect(),
        }
    }

    /// Logits (`m×2`) without recording gradients.
    pub fn logits<R: Rng + ?Sized>(
        &self,
        x: &Matrix,
        graph: Option<&RelationalGraph>,
        training: bool,
        rng: &mut R,
    ) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.bind_frozen(&mut tape);
        let out = forward_on_tape(self, &bound, &mut tape, x, graph, training, rng)?;
        Ok(tape.value(out).clone())
    }
}

pub fn ffn_forward<R: Rng + ?Sized>(params: &ModelParams, x: &Matrix, training: bool, rng: &mut R) -> Result<Matrix> {
    if params.spec.kind != ModelKind::Ffn {
        return Err(Error::Config("ffn_forward needs feedforward parameters".into()));
    }
    params.logits(x, None, training, rng)
}

pub fn rgcn_forward<R: Rng + ?Sized>(
    params: &ModelParams,
    graph: &RelationalGraph,
    x: &Matrix,
    training: bool,
    rng: &mut R,
) -> Result<Matrix> {
    if params.spec.kind != ModelKind::Rgcn {
        return Err(Error::Config("rgcn_forward needs R-GCN parameters".into()));
    }
    params.logits(x, Some(graph), training, rng)
}

/// Records the full forward pass and returns the logits node. `graph` is
/// required for R-GCN parameters and ignored otherwise.
pub fn forward_on_tape<R: Rng + ?Sized>(
    params: &ModelParams,
    bound: &BoundParams,
    tape: &mut Tape,
    x: &Matrix,
    graph: Option<&RelationalGraph>,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let spec = &params.spec;
    if x.cols() != spec.input_dim {
        return Err(Error::Dimension {
            op: "forward",
            left: x.shape(),
            right: (spec.input_dim, spec.hidden_units),
        });
    }
    let mut h = tape.constant(x.clone());
    match spec.kind {
        ModelKind::Ffn => {
            for layer in &bound.layers {
                h = dense_layer(tape, layer, h, training, rng)?;
            }
        }
        ModelKind::Rgcn => {
            let graph = graph.ok_or_else(|| Error::Config("an R-GCN forward pass needs a graph".into()))?;
            if graph.node_count() != x.rows() {
                return Err(Error::Consistency(format!(
                    "graph has {} nodes but the feature matrix has {} rows",
                    graph.node_count(),
                    x.rows()
                )));
            }
            if graph.self_loop_mode() != spec.self_loops {
                return Err(Error::Config(format!(
                    "graph self-loop mode '{}' differs from the model's '{}'",
                    graph.self_loop_mode().name(),
                    spec.self_loops.name()
                )));
            }
            let adj = slot_adjacency(graph, &spec.slots());
            for layer in &bound.layers {
                h = relational_layer(tape, layer, &adj, h, training, rng)?;
            }
        }
    }
    Ok(h)
}

/// Normalized adjacency per slot; `None` where the graph lacks the relation.
pub fn slot_adjacency(graph: &RelationalGraph, slots: &[Slot]) -> Vec<Option<Arc<CsrMatrix>>> {
    slots
        .iter()
        .map(|s| match s {
            Slot::Relation(k) => graph.relation(*k).map(|r| Arc::clone(&r.normalized)),
            Slot::SelfLoop => Some(Arc::clone(graph.identity())),
        })
        .collect()
}

fn activate(tape: &mut Tape, z: Var, a: Activation) -> Var {
    match a {
        Activation::Relu => tape.relu(z),
        Activation::None => z,
    }
}

/// dropout → affine → activation.
pub fn dense_layer<R: Rng + ?Sized>(
    tape: &mut Tape,
    layer: &Layer<Var>,
    h: Var,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let LayerWeights::Dense(w) = &layer.weights else {
        return Err(Error::Config("dense layer with relational weights".into()));
    };
    let hd = tape.dropout(h, layer.spec.dropout, rng, training)?;
    let z = tape.matmul(hd, *w)?;
    let z = tape.add_row(z, layer.bias)?;
    Ok(activate(tape, z, layer.spec.activation))
}

/// dropout → `Σ_r Ã⁽ʳ⁾ H W⁽ʳ⁾` + bias → activation. Slots whose adjacency is
/// `None` contribute nothing.
pub fn relational_layer<R: Rng + ?Sized>(
    tape: &mut Tape,
    layer: &Layer<Var>,
    adjacency: &[Option<Arc<CsrMatrix>>],
    h: Var,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let LayerWeights::Relational(weights) = &layer.weights else {
        return Err(Error::Config("relational layer with dense weights".into()));
    };
    let hd = tape.dropout(h, layer.spec.dropout, rng, training)?;
    let (in_dim, out_dim) = (layer.spec.in_dim, layer.spec.out_dim);
    let present: Vec<usize> = (0..adjacency.len()).filter(|&s| adjacency[s].is_some()).collect();
    let adjs: Vec<Arc<CsrMatrix>> = present.iter().filter_map(|&s| adjacency[s].clone()).collect();

    let z = if present.is_empty() {
        let rows = tape.value(hd).rows();
        tape.constant(Matrix::zeros(rows, out_dim))
    } else if let SlotWeights::Diagonal(ws) = weights {
        let mut total: Option<Var> = None;
        for (&slot, adj) in present.iter().zip(&adjs) {
            let scaled = tape.mul_row(hd, ws[slot])?;
            let term = tape.spmm(adj, scaled)?;
            total = Some(match total {
                Some(t) => tape.add(t, term)?,
                None => term,
            });
        }
        total.expect("at least one slot")
    } else {
        let per_slot: Vec<Var> = match weights {
            SlotWeights::Full(ws) => present.iter().map(|&s| ws[s]).collect(),
            SlotWeights::Basis { bases, coeffs } => present
                .iter()
                .map(|&s| {
                    let v = tape.expand_basis(coeffs[s], out_dim)?;
                    tape.matmul(*bases, v)
                })
                .collect::<Result<_>>()?,
            SlotWeights::Diagonal(_) => unreachable!("handled above"),
        };
        propagate(tape, &adjs, hd, &per_slot, in_dim, out_dim)?
    };
    let z = tape.add_row(z, layer.bias)?;
    Ok(activate(tape, z, layer.spec.activation))
}

/// `Σ_r Ã⁽ʳ⁾·H·W⁽ʳ⁾` as a single dense product over stacked blocks,
/// associating so the sparse products run on the narrower side.
fn propagate(
    tape: &mut Tape,
    adjs: &[Arc<CsrMatrix>],
    h: Var,
    ws: &[Var],
    in_dim: usize,
    out_dim: usize,
) -> Result<Var> {
    if in_dim <= out_dim {
        let ah = tape.spmm_stack(adjs, h)?;
        let w = tape.concat_rows(ws)?;
        tape.matmul(ah, w)
    } else {
        let w = tape.concat_cols(ws)?;
        let hw = tape.matmul(h, w)?;
        tape.spmm_blocks(adjs, hw)
    }
}
