//! FR-PointHop: the unsupervised two-hop feature learner.
//!
//! Hop 1 turns each point's FPFH descriptor into a spectral vector through a
//! Saab transform; the cloud is then farthest-point downsampled by half, and
//! hop 2 pools the hop-1 responses over LRF-aligned octants before a second
//! Saab transform produces the final per-point feature.

mod attributes;
mod model;
mod model_io;
mod saab;

pub use attributes::{hop1_attributes, hop2_attribute, hop2_attributes};
pub use model::{extract_features, fit_model, FrPointHopModel, HopConfig, PointFeatureSet};
pub use model_io::{decode_model, encode_model, load_model, save_model};
pub use saab::{fit_saab, fit_saab_full, SaabKernel, TruncationRule};

pub(crate) use model_io::Reader;
