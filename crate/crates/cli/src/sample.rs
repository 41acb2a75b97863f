use std::io::Write;

use clap::ValueEnum;
use loopsoup::io::{write_json_lines, SampleMeta, SampleRecord};
use loopsoup::lerw::wilson_sample;
use loopsoup::rng::{domain_tag, Substreams};
use loopsoup::soup::{continuous_occupation, discrete_occupation, SoupSampler};
use loopsoup::{Error, GffModel, SimpleGraph, WeightMatrix};
use rayon::prelude::*;

use crate::CliError;

/// Records generated per parallel batch before writing.
const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    /// Loop soup at the configured intensity, as rooted loops.
    Soup,
    /// Real Gaussian free field with covariance `(I - Q)^{-1}`.
    Gff,
    /// Uniform spanning tree rooted at vertex 0, by Wilson's algorithm.
    Tree,
    /// Continuous occupation field of the soup, trivial loops included.
    Field,
}

impl What {
    fn name(self) -> &'static str {
        match self {
            What::Soup => "soup",
            What::Gff => "gff",
            What::Tree => "tree",
            What::Field => "field",
        }
    }
}

pub struct SampleJob {
    pub what: What,
    pub n: u64,
    pub seed: u64,
    pub intensity: f64,
    pub weights: WeightMatrix,
    pub graph: SimpleGraph,
}

enum Sampler {
    Soup(SoupSampler),
    Field(SoupSampler),
    Gff(GffModel),
    Tree(SimpleGraph),
}

fn refuse(e: Error) -> CliError {
    match e {
        Error::NotPositive => CliError::Input(
            "weights are complex or negative, so the loop soup is a complex measure rather than a random \
             collection of loops and cannot be sampled; use nonnegative weights"
                .into(),
        ),
        other => CliError::Input(other.to_string()),
    }
}

impl SampleJob {
    fn sampler(&self) -> Result<Sampler, CliError> {
        Ok(match self.what {
            What::Soup => Sampler::Soup(SoupSampler::new(&self.weights).map_err(refuse)?),
            What::Field => Sampler::Field(SoupSampler::new(&self.weights).map_err(refuse)?),
            What::Gff => {
                Sampler::Gff(GffModel::from_weights(&self.weights).map_err(|e| {
                    CliError::Input(format!("the Gaussian free field needs real symmetric weights: {e}"))
                })?)
            }
            What::Tree => {
                if !self.graph.is_connected() {
                    return Err(CliError::Input("graph is disconnected".into()));
                }
                Sampler::Tree(self.graph.clone())
            }
        })
    }

    /// Streams `n` records; record `i` uses substream `i`.
    pub fn run<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        let sampler = self.sampler()?;
        let streams = Substreams::new(self.seed, domain_tag(&format!("sample-{}", self.what.name())));
        let t = self.intensity;
        let mut start = 0;
        while start < self.n {
            let end = (start + BATCH).min(self.n);
            let records: Result<Vec<SampleRecord>, Error> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let meta = SampleMeta {
                        seed: self.seed,
                        substream: i,
                    };
                    let mut rng = streams.stream(i);
                    Ok(match &sampler {
                        Sampler::Soup(s) => SampleRecord::soup(meta, &s.sample(t, &mut rng)?),
                        Sampler::Field(s) => {
                            let soup = s.sample(t, &mut rng)?;
                            let field = continuous_occupation(&discrete_occupation(&soup), t, &mut rng)?;
                            SampleRecord::field(meta, field.values())
                        }
                        Sampler::Gff(m) => SampleRecord::field(meta, m.sample(&mut rng)),
                        Sampler::Tree(g) => SampleRecord::tree(meta, &wilson_sample(g, 0, &mut rng)?),
                    })
                })
                .collect();
            let records = records.map_err(|e| CliError::Input(e.to_string()))?;
            write_json_lines(&mut out, &records)?;
            start = end;
        }
        Ok(())
    }
}
