//! Piecewise-constant spectral graph filters.
//!
//! The pipeline runs bottom-up: a [`Graph`] is decomposed into a
//! [`Spectrum`] of its normalized adjacency, the spectrum is cut at
//! significant eigenvalue gaps ([`partition`]), each interval becomes a
//! projector filter split into signed parts ([`filterbank`]), and a small
//! classifier learns per-channel coefficients for those filters alongside
//! polynomial ones ([`model`]). [`theory`] holds numerical checks of the
//! polynomial approximation bounds that motivate the construction.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod filterbank;
pub mod graph;
pub mod io;
pub mod model;
pub mod partition;
pub mod spectral;
pub mod theory;

pub use dataset::{make_splits, synth_spectral_dataset, Dataset, SplitMask};
pub use error::{Error, Result};
pub use filterbank::{BankOptions, Budget, ConstantFilter, FilterBank};
pub use graph::{duplicate_subgraph, normalized_adjacency, Graph};
pub use model::{ModelConfig, TrainReport, Variant};
pub use partition::{identify_significant_gaps, PartitionResult};
pub use spectral::{eigendecompose, graph_spectrum, Spectrum};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/spectrum.md")]
    pub struct Spectrum;
    #[doc = include_str!("../../../book/src/partition.md")]
    pub struct Partition;
    #[doc = include_str!("../../../book/src/filters.md")]
    pub struct Filters;
    #[doc = include_str!("../../../book/src/model.md")]
    pub struct Model;
    #[doc = include_str!("../../../book/src/theory.md")]
    pub struct Theory;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
