//! Domain types and file formats for segmentation-labeled point clouds.
//!
//! A [`LabeledPointCloud`] is `n` points in 2-D or 3-D space with one part
//! label per point. Clouds are grouped into a [`PointCloudSet`] that shares a
//! single [`PartVocabulary`]. Three on-disk encodings are supported:
//!
//! * `.lpc`: one cloud per text file, bit-exact for `f64` coordinates.
//! * `.lpcs`: many clouds per little-endian binary file, `f32` coordinates.
//! * `manifest.json`: names a set, its part vocabulary and its member files.

mod cloud;
mod error;
pub mod io;
mod manifest;

pub use cloud::{LabeledPointCloud, PartVocabulary, PointCloudSet};
pub use error::{CoreError, Result};
pub use io::{read_lpc, read_lpcs, read_set, write_lpc, write_lpcs, write_set, SetFormat};
pub use manifest::{ManifestEntry, SetManifest, MANIFEST_FILE, MANIFEST_VERSION};
