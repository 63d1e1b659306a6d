//! Feedforward and relational graph convolutional classifiers.
//!
//! Both models share one three-layer shape, `(f, h) → (h, h/2) → (h/2, 2)`,
//! with dropout on the input of the first two layers and ReLU after them.
//! The last layer emits logits; softmax is applied by the loss and metrics.
//!
//! An R-GCN layer computes `σ(Σ_r Ã⁽ʳ⁾ H W⁽ʳ⁾ + b)`. Per-relation weights are
//! either unconstrained, built from shared bases, or diagonal.

mod checkpoint;
mod forward;
mod params;
mod spec;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use forward::{
    dense_layer, ffn_forward, forward_on_tape, relational_layer, rgcn_forward, slot_adjacency, BoundParams,
};
pub use params::{init_params, Layer, LayerWeights, ModelParams, SlotWeights};
pub use spec::{Activation, Decomposition, LayerSpec, ModelKind, ModelSpec, Slot, LAYER_DROPOUT, OUTPUT_CLASSES};
