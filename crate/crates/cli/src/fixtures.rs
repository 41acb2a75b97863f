use std::path::{Path, PathBuf};

use loopsoup::io::{parse_graph, parse_matrix};
use loopsoup::{Complex64, DMatrix, SimpleGraph, WeightMatrix};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub weights: WeightMatrix,
}

#[derive(Debug, Clone)]
pub struct Graph {
    pub name: String,
    pub graph: SimpleGraph,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn fixture(name: &str, weights: WeightMatrix) -> Fixture {
    Fixture {
        name: name.to_string(),
        weights,
    }
}

pub fn one_point() -> WeightMatrix {
    WeightMatrix::from_real_rows(1, &[0.5]).expect("valid matrix")
}

pub fn two_state() -> WeightMatrix {
    WeightMatrix::from_real_rows(2, &[0.0, 0.5, 0.5, 0.0]).expect("valid matrix")
}

/// Built-in matrices covering the real positive, signed symmetric, Hermitian
/// and general complex cases.
pub fn default_fixtures() -> Vec<Fixture> {
    let signed = WeightMatrix::from_real_rows(3, &[0.1, -0.3, 0.2, -0.3, 0.0, 0.25, 0.2, 0.25, 0.05]);
    let ring = WeightMatrix::from_real_rows(
        4,
        &[
            0.2, 0.15, 0.0, 0.2, 0.1, 0.0, 0.25, 0.0, 0.0, 0.2, 0.1, 0.2, 0.15, 0.0, 0.1, 0.0,
        ],
    );
    let hermitian_pair = WeightMatrix::from_complex(DMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.0, 0.0)],
    ));
    let a = c(0.2, 0.15);
    let b = c(0.1, -0.2);
    let d = c(0.0, 0.25);
    let hermitian_three = WeightMatrix::from_complex(DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.1, 0.0),
            a,
            b,
            a.conj(),
            c(-0.1, 0.0),
            d,
            b.conj(),
            d.conj(),
            c(0.0, 0.0),
        ],
    ));
    let complex_three = WeightMatrix::from_complex(DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.1, 0.1),
            c(0.0, 0.3),
            c(-0.1, 0.0),
            c(0.2, -0.1),
            c(0.0, 0.0),
            c(0.15, 0.15),
            c(0.0, 0.2),
            c(-0.2, 0.1),
            c(0.05, 0.0),
        ],
    ));
    vec![
        fixture("one-point", one_point()),
        fixture("two-state", two_state()),
        fixture("signed-three", signed.expect("valid matrix")),
        fixture("ring-four", ring.expect("valid matrix")),
        fixture("hermitian-pair", hermitian_pair.expect("valid matrix")),
        fixture("hermitian-three", hermitian_three.expect("valid matrix")),
        fixture("complex-three", complex_three.expect("valid matrix")),
    ]
}

pub fn default_graphs() -> Vec<Graph> {
    [
        ("K3", SimpleGraph::complete(3)),
        ("C4", SimpleGraph::cycle(4)),
        ("K4", SimpleGraph::complete(4)),
    ]
    .into_iter()
    .map(|(name, graph)| Graph {
        name: name.to_string(),
        graph,
    })
    .collect()
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads a matrix file and rejects it unless it is acceptable.
pub fn load_fixture(path: &Path) -> Result<Fixture, CliError> {
    let weights = parse_matrix(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    weights
        .require_acceptable()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Fixture {
        name: stem(path),
        weights,
    })
}

pub fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let graph = parse_graph(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if !graph.is_connected() {
        return Err(CliError::Input(format!("{}: graph is disconnected", path.display())));
    }
    Ok(Graph {
        name: stem(path),
        graph,
    })
}

pub fn load_fixtures(paths: &[PathBuf]) -> Result<Vec<Fixture>, CliError> {
    if paths.is_empty() {
        return Ok(default_fixtures());
    }
    paths.iter().map(|p| load_fixture(p)).collect()
}

pub fn load_graphs(paths: &[PathBuf]) -> Result<Vec<Graph>, CliError> {
    if paths.is_empty() {
        return Ok(default_graphs());
    }
    paths.iter().map(|p| load_graph(p)).collect()
}
