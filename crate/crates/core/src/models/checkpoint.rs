//! Plain-text parameter checkpoints.
//!
//! ```text
//! collusion-gnn-checkpoint 1
//! kind rgcn
//! input_dim 10
//! hidden_units 16
//! decomposition full
//! relations tender,competitor
//! self_loops per-relation
//! source japan
//! source_relations tender,competitor,location
//! tensor layer0.weight.tender 10 16
//! <10 lines of 16 values>
//! ...
//! end
//! ```
//!
//! Values use Rust's shortest round-tripping float formatting, so a
//! save/load cycle is bit-exact.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::params::{init_params, ModelParams};
use super::spec::{Decomposition, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::graph::{RelationKind, SelfLoopMode};

const MAGIC: &str = "collusion-gnn-checkpoint 1";

/// Trained parameters plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Name of the dataset the model was trained on.
    pub source: String,
    /// Relations the source dataset offered.
    pub source_relations: Vec<RelationKind>,
}

fn join(kinds: &[RelationKind]) -> String {
    if kinds.is_empty() {
        "-".into()
    } else {
        kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(",")
    }
}

fn split_kinds(s: &str) -> Result<Vec<RelationKind>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(str::parse).collect()
}

pub fn write_checkpoint<W: Write>(ck: &Checkpoint, mut w: W) -> std::io::Result<()> {
    let spec = &ck.params.spec;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "kind {}", spec.kind)?;
    writeln!(w, "input_dim {}", spec.input_dim)?;
    writeln!(w, "hidden_units {}", spec.hidden_units)?;
    writeln!(w, "decomposition {}", spec.decomposition)?;
    writeln!(w, "relations {}", join(&spec.relations))?;
    writeln!(w, "self_loops {}", spec.self_loops.name())?;
    writeln!(w, "source {}", ck.source)?;
    writeln!(w, "source_relations {}", join(&ck.source_relations))?;
    for (name, m) in ck.params.named_tensors() {
        writeln!(w, "tensor {name} {} {}", m.rows(), m.cols())?;
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    writeln!(w, "end")
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(ck, &mut buf).expect("writing to memory");
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(f, &path.display().to_string())
}

/// Parses a checkpoint; `origin` names the source in error messages.
pub fn read_checkpoint<R: Read>(reader: R, origin: &str) -> Result<Checkpoint> {
    let bad = |line: usize, message: String| Error::Checkpoint {
        path: origin.into(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = BufReader::new(reader).lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i, l)),
            Some((i, Err(e))) => Err(bad(i, e.to_string())),
            None => Err(bad(0, format!("unexpected end of file, expected {what}"))),
        }
    };

    let (i, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(bad(i, "not a checkpoint file".into()));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (i, l) = next(key)?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((i, v.trim().to_string())),
            _ => Err(bad(i, format!("expected '{key} <value>'"))),
        }
    };
    let parse_usize = |(i, v): (usize, String)| v.parse::<usize>().map_err(|_| bad(i, format!("bad integer '{v}'")));

    let kind: ModelKind = field("kind")?.1.parse()?;
    let input_dim = parse_usize(field("input_dim")?)?;
    let hidden_units = parse_usize(field("hidden_units")?)?;
    let decomposition: Decomposition = field("decomposition")?.1.parse()?;
    let relations = split_kinds(&field("relations")?.1)?;
    let self_loops: SelfLoopMode = field("self_loops")?.1.parse()?;
    let source = field("source")?.1;
    let source_relations = split_kinds(&field("source_relations")?.1)?;

    let spec = ModelSpec {
        kind,
        input_dim,
        hidden_units,
        decomposition,
        relations,
        self_loops,
    };
    let mut params = init_params(&spec, 0)?;
    let names: Vec<(String, (usize, usize))> = params
        .named_tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    for ((name, shape), slot) in names.into_iter().zip(params.tensors_mut()) {
        let (i, head) = next("tensor")?;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let expected = format!("tensor {name} {} {}", shape.0, shape.1);
        if parts.join(" ") != expected {
            return Err(bad(i, format!("expected '{expected}', found '{head}'")));
        }
        for r in 0..shape.0 {
            let (i, row) = next("tensor row")?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| bad(i, format!("bad number '{v}'"))))
                .collect::<Result<_>>()?;
            if values.len() != shape.1 {
                return Err(bad(i, format!("expected {} values, found {}", shape.1, values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(bad(i, "non-finite weight".into()));
            }
            slot.row_mut(r).copy_from_slice(&values);
        }
    }
    let (i, end) = next("end")?;
    if end.trim() != "end" {
        return Err(bad(i, format!("expected 'end', found '{end}'")));
    }
    Ok(Checkpoint {
        params,
        source,
        source_relations,
    })
}
