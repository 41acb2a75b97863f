//! JSON formats for matrices, graphs and sample dumps.
//!
//! Matrix files hold `{"labels": [...], "entries": [[e, ...], ...]}` where
//! each entry is either a number or a `[re, im]` pair; `labels` may be
//! omitted. Graph files hold `{"vertices": n, "edges": [[u, v], ...]}`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lerw::{SimpleGraph, SpanningTree};
use crate::matrix::{StateSpace, WeightMatrix};
use crate::soup::LoopSoupSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Entry> for Complex64 {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Real(re) => Complex64::new(re, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub entries: Vec<Vec<Entry>>,
}

impl MatrixFile {
    pub fn to_weights(&self) -> Result<WeightMatrix> {
        let n = self.entries.len();
        if let Some(row) = self.entries.iter().find(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row of length {} in a {n}-row matrix",
                row.len()
            )));
        }
        let space = match &self.labels {
            Some(labels) => StateSpace::new(labels.iter().cloned())?,
            None => StateSpace::indexed(n)?,
        };
        let entries = DMatrix::from_fn(n, n, |i, j| self.entries[i][j].into());
        WeightMatrix::new(space, entries)
    }

    pub fn from_weights(q: &WeightMatrix) -> Self {
        let real = q.flags().real;
        let entries = q
            .entries()
            .row_iter()
            .map(|row| {
                row.iter()
                    .map(|z| {
                        if real {
                            Entry::Real(z.re)
                        } else {
                            Entry::Complex([z.re, z.im])
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            labels: Some(q.space().labels().to_vec()),
            entries,
        }
    }
}

pub fn parse_matrix(json: &str) -> Result<WeightMatrix> {
    serde_json::from_str::<MatrixFile>(json)
        .map_err(|e| Error::Parse(e.to_string()))?
        .to_weights()
}

pub fn matrix_to_json(q: &WeightMatrix) -> String {
    serde_json::to_string(&MatrixFile::from_weights(q)).expect("matrix serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn parse_graph(json: &str) -> Result<SimpleGraph> {
    let g: GraphFile = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    SimpleGraph::new(g.vertices, &g.edges)
}

/// Provenance attached to every randomized output line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub substream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleRecord {
    Loops {
        seed: u64,
        substream: u64,
        loops: Vec<Vec<usize>>,
    },
    Field {
        seed: u64,
        substream: u64,
        field: Vec<f64>,
    },
    Tree {
        seed: u64,
        substream: u64,
        root: usize,
        edges: Vec<(usize, usize)>,
    },
}

impl SampleRecord {
    pub fn soup(meta: SampleMeta, soup: &LoopSoupSample) -> Self {
        Self::Loops {
            seed: meta.seed,
            substream: meta.substream,
            loops: soup.loops.clone(),
        }
    }

    pub fn field(meta: SampleMeta, field: Vec<f64>) -> Self {
        Self::Field {
            seed: meta.seed,
            substream: meta.substream,
            field,
        }
    }

    pub fn tree(meta: SampleMeta, tree: &SpanningTree) -> Self {
        Self::Tree {
            seed: meta.seed,
            substream: meta.substream,
            root: tree.root(),
            edges: tree.edges(),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut out: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
