use std::fmt;
use std::str::FromStr;

use crate::dataio::FEATURE_COUNT;
use crate::error::{Error, Result};
use crate::graph::{RelationKind, SelfLoopMode};

/// Number of output classes (non-collusive, collusive).
pub const OUTPUT_CLASSES: usize = 2;

/// Dropout applied to the input of layers 1, 2 and 3.
pub const LAYER_DROPOUT: [f64; 3] = [0.20, 0.10, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Feedforward network; rows are processed independently.
    Ffn,
    /// Relational graph convolutional network.
    Rgcn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ffn => "nn",
            ModelKind::Rgcn => "rgcn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nn" | "ffn" => Ok(ModelKind::Ffn),
            "rgcn" | "gnn" => Ok(ModelKind::Rgcn),
            other => Err(Error::Config(format!("unknown model '{other}' (expected nn or rgcn)"))),
        }
    }
}

/// How per-relation weight matrices are parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decomposition {
    /// One unconstrained matrix per relation.
    #[default]
    Full,
    /// `W⁽ʳ⁾ = U · V⁽ʳ⁾` with `U = [B₁ | … | B_b]` shared by all relations and
    /// `V⁽ʳ⁾ = [a₁I; …; a_bI]` carrying `b` coefficients per relation.
    Basis { num_bases: usize },
    /// `W⁽ʳ⁾ = diag(w⁽ʳ⁾)`; needs equal input and output width.
    Diagonal,
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decomposition::Full => f.write_str("full"),
            Decomposition::Basis { num_bases } => write!(f, "basis {num_bases}"),
            Decomposition::Diagonal => f.write_str("diagonal"),
        }
    }
}

impl FromStr for Decomposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("full"), None) => Ok(Decomposition::Full),
            (Some("diagonal"), None) => Ok(Decomposition::Diagonal),
            (Some("basis"), Some(b)) => b
                .parse()
                .ok()
                .filter(|&n: &usize| n > 0)
                .map(|num_bases| Decomposition::Basis { num_bases })
                .ok_or_else(|| Error::Config(format!("bad basis count '{b}'"))),
            _ => Err(Error::Config(format!("unknown decomposition '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Shape and regularization of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub dropout: f64,
    pub activation: Activation,
}

/// Adjacency slot a set of R-GCN weights applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Relation(RelationKind),
    /// The separate identity relation of [`SelfLoopMode::Shared`].
    SelfLoop,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Relation(k) => write!(f, "{k}"),
            Slot::SelfLoop => f.write_str("self"),
        }
    }
}

/// Everything needed to lay out a model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_units: usize,
    pub decomposition: Decomposition,
    /// Relations with their own weights (R-GCN only), sorted.
    pub relations: Vec<RelationKind>,
    pub self_loops: SelfLoopMode,
}

impl ModelSpec {
    pub fn ffn(hidden_units: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Ffn,
            input_dim: FEATURE_COUNT,
            hidden_units,
            decomposition: Decomposition::Full,
            relations: Vec::new(),
            self_loops: SelfLoopMode::PerRelation,
        }
    }

    pub fn rgcn(hidden_units: usize, relations: &[RelationKind]) -> Self {
        let mut relations = relations.to_vec();
        relations.sort();
        relations.dedup();
        ModelSpec {
            kind: ModelKind::Rgcn,
            input_dim: FEATURE_COUNT,
            hidden_units,
            decomposition: Decomposition::Full,
            relations,
            self_loops: SelfLoopMode::PerRelation,
        }
    }

    pub fn with_decomposition(mut self, d: Decomposition) -> Self {
        self.decomposition = d;
        self
    }

    pub fn with_self_loops(mut self, mode: SelfLoopMode) -> Self {
        self.self_loops = mode;
        self
    }

    pub fn with_input_dim(mut self, input_dim: usize) -> Self {
        self.input_dim = input_dim;
        self
    }

    /// `(Input, h)`, `(h, h/2)`, `(h/2, 2)` with dropout 20%, 10%, 0%.
    pub fn layers(&self) -> [LayerSpec; 3] {
        let h = self.hidden_units;
        let dims = [(self.input_dim, h), (h, h / 2), (h / 2, OUTPUT_CLASSES)];
        std::array::from_fn(|i| LayerSpec {
            in_dim: dims[i].0,
            out_dim: dims[i].1,
            dropout: LAYER_DROPOUT[i],
            activation: if i < 2 { Activation::Relu } else { Activation::None },
        })
    }

    /// Weight slots of each R-GCN layer.
    pub fn slots(&self) -> Vec<Slot> {
        let mut s: Vec<Slot> = self.relations.iter().copied().map(Slot::Relation).collect();
        if self.self_loops == SelfLoopMode::Shared {
            s.push(Slot::SelfLoop);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        if self.hidden_units < 2 || !self.hidden_units.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "hidden units must be an even number ≥ 2, got {}",
                self.hidden_units
            )));
        }
        if self.kind == ModelKind::Rgcn {
            if self.relations.is_empty() {
                return Err(Error::Config("an R-GCN needs at least one relation".into()));
            }
            if self.decomposition == Decomposition::Diagonal {
                if let Some(l) = self.layers().iter().find(|l| l.in_dim != l.out_dim) {
                    return Err(Error::Config(format!(
                        "diagonal decomposition needs square layers, got {}x{}",
                        l.in_dim, l.out_dim
                    )));
                }
            }
        }
        Ok(())
    }
}
