use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{Decomposition, LayerSpec, ModelKind, ModelSpec, Slot};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Per-slot weights of an R-GCN layer.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotWeights<T> {
    /// `in×out` matrix per slot.
    Full(Vec<T>),
    /// Shared `in×(b·out)` bases and a `1×b` coefficient row per slot.
    Basis { bases: T, coeffs: Vec<T> },
    /// `1×in` diagonal per slot.
    Diagonal(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights<T> {
    Dense(T),
    Relational(SlotWeights<T>),
}

/// One layer's parameters. `T` is [`Matrix`] for stored values and
/// [`Var`](crate::tensor::Var) once bound to a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub weights: LayerWeights<T>,
    /// `1×out`, added after the relation sum.
    pub bias: T,
}

impl<T> Layer<T> {
    /// Tensors in canonical order with their names.
    pub fn named(&self, index: usize, slots: &[Slot]) -> Vec<(String, &T)> {
        let p = format!("layer{index}");
        let mut out = Vec::new();
        match &self.weights {
            LayerWeights::Dense(w) => out.push((format!("{p}.weight"), w)),
            LayerWeights::Relational(SlotWeights::Full(ws)) => {
                out.extend(slots.iter().zip(ws).map(|(s, w)| (format!("{p}.weight.{s}"), w)));
            }
            LayerWeights::Relational(SlotWeights::Basis { bases, coeffs }) => {
                out.push((format!("{p}.bases"), bases));
                out.extend(slots.iter().zip(coeffs).map(|(s, c)| (format!("{p}.coeff.{s}"), c)));
            }
            LayerWeights::Relational(SlotWeights::Diagonal(ws)) => {
                out.extend(slots.iter().zip(ws).map(|(s, w)| (format!("{p}.diag.{s}"), w)));
            }
        }
        out.push((format!("{p}.bias"), &self.bias));
        out
    }

    /// Same order as [`Layer::named`].
    pub fn tensors(&self) -> Vec<&T> {
        let mut out: Vec<&T> = match &self.weights {
            LayerWeights::Dense(w) => vec![w],
            LayerWeights::Relational(SlotWeights::Full(ws)) | LayerWeights::Relational(SlotWeights::Diagonal(ws)) => {
                ws.iter().collect()
            }
            LayerWeights::Relational(SlotWeights::Basis { bases, coeffs }) => {
                std::iter::once(bases).chain(coeffs.iter()).collect()
            }
        };
        out.push(&self.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut T> {
        let mut out: Vec<&mut T> = match &mut self.weights {
            LayerWeights::Dense(w) => vec![w],
            LayerWeights::Relational(SlotWeights::Full(ws)) | LayerWeights::Relational(SlotWeights::Diagonal(ws)) => {
                ws.iter_mut().collect()
            }
            LayerWeights::Relational(SlotWeights::Basis { bases, coeffs }) => {
                std::iter::once(bases).chain(coeffs.iter_mut()).collect()
            }
        };
        out.push(&mut self.bias);
        out
    }

    /// Applies `f` to every tensor, preserving structure.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Layer<U> {
        let weights = match &self.weights {
            LayerWeights::Dense(w) => LayerWeights::Dense(f(w)),
            LayerWeights::Relational(SlotWeights::Full(ws)) => {
                LayerWeights::Relational(SlotWeights::Full(ws.iter().map(&mut f).collect()))
            }
            LayerWeights::Relational(SlotWeights::Basis { bases, coeffs }) => {
                let bases = f(bases);
                LayerWeights::Relational(SlotWeights::Basis {
                    bases,
                    coeffs: coeffs.iter().map(&mut f).collect(),
                })
            }
            LayerWeights::Relational(SlotWeights::Diagonal(ws)) => {
                LayerWeights::Relational(SlotWeights::Diagonal(ws.iter().map(&mut f).collect()))
            }
        };
        let bias = f(&self.bias);
        Layer {
            spec: self.spec,
            weights,
            bias,
        }
    }
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect(),
    )
    .expect("sized to shape")
}

impl Layer<Matrix> {
    /// Dense (feedforward) layer with Glorot-uniform weights and zero bias.
    pub fn dense<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Self {
        Layer {
            spec,
            weights: LayerWeights::Dense(glorot(spec.in_dim, spec.out_dim, spec.in_dim, spec.out_dim, rng)),
            bias: Matrix::zeros(1, spec.out_dim),
        }
    }

    /// Relational layer with one weight set per slot.
    pub fn relational<R: Rng + ?Sized>(
        spec: LayerSpec,
        slots: usize,
        decomposition: Decomposition,
        rng: &mut R,
    ) -> Result<Self> {
        let (i, o) = (spec.in_dim, spec.out_dim);
        let weights = match decomposition {
            Decomposition::Full => SlotWeights::Full((0..slots).map(|_| glorot(i, o, i, o, rng)).collect()),
            Decomposition::Basis { num_bases } => {
                if num_bases == 0 {
                    return Err(Error::Config("basis decomposition needs at least one basis".into()));
                }
                let bases = glorot(i, num_bases * o, i, o, rng);
                let coeffs = (0..slots).map(|_| glorot(1, num_bases, 1, num_bases, rng)).collect();
                SlotWeights::Basis { bases, coeffs }
            }
            Decomposition::Diagonal => {
                if i != o {
                    return Err(Error::Config(format!(
                        "diagonal decomposition needs a square layer, got {i}x{o}"
                    )));
                }
                SlotWeights::Diagonal((0..slots).map(|_| glorot(1, i, i, o, rng)).collect())
            }
        };
        Ok(Layer {
            spec,
            weights: LayerWeights::Relational(weights),
            bias: Matrix::zeros(1, o),
        })
    }
}

/// A model's specification and stored parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub layers: Vec<Layer<Matrix>>,
}

impl ModelParams {
    /// Canonical `(name, tensor)` list; the order is stable and used by
    /// optimizers and checkpoints.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let slots = self.spec.slots();
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.named(k, &slots))
            .collect()
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|m| m.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }
}

/// Glorot-uniform weights (`±√(6/(in+out))`) and zero biases, drawn from a
/// ChaCha8 stream seeded with `seed`.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<ModelParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = spec.slots().len();
    let layers = spec
        .layers()
        .into_iter()
        .map(|ls| match spec.kind {
            ModelKind::Ffn => Ok(Layer::dense(ls, &mut rng)),
            ModelKind::Rgcn => Layer::relational(ls, slots, spec.decomposition, &mut rng),
        })
        .collect::<Result<_>>()?;
    Ok(ModelParams {
        spec: spec.clone(),
        layers,
    })
}
