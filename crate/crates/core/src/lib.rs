//! Hyperbolic multimodal fusion for code authorship attribution.
//!
//! Source programs are compiled to binary artifacts and rendered as RGB
//! images ([`bpea`]); code and image embeddings are lifted onto a Poincaré
//! ball ([`hyperbolic`]) and fused with geodesic-similarity cross-modal
//! attention ([`gcsa`]); the back-projected vector feeds a classifier head
//! ([`classifier`]). [`experiment`] wires datasets, splits and the fusion
//! ablations together.

pub mod bpea;
pub mod classifier;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gcsa;
pub mod hyperbolic;
pub mod io;
pub mod linalg;
pub mod modality;
pub mod params;
pub mod rng;

pub use error::{Error, Result};
pub use hyperbolic::{BallPoint, Curvature, EuclideanVector};
pub use linalg::Matrix;
pub use modality::Modality;
