//! Global-descriptor retrieval: k-means codebooks, VLAD aggregation, and the
//! persisted gallery index.

mod codebook_io;
mod gallery;
mod kmeans;
mod vlad;

pub use codebook_io::{decode_codebook, encode_codebook, load_codebook, save_codebook};
pub use gallery::{
    build_gallery, decode_gallery, encode_gallery, ground_truth_ranking, load_gallery,
    precision_at_m, retrieve, save_gallery, GalleryIndex, GalleryObject, GalleryRecord,
    RetrievalHit,
};
pub use kmeans::{fit_codebook, VladCodebook};
pub use vlad::{compute_vlad, VladVector};
