//! Readers and writers for `.lpc`, `.lpcs` and manifest-indexed sets.

mod lpc;
mod lpcs;
mod set;

pub use lpc::{parse_lpc, read_lpc, render_lpc, write_lpc};
pub use lpcs::{decode_lpcs, encode_lpcs, read_lpcs, write_lpcs, LPCS_MAGIC, LPCS_VERSION};
pub use set::{read_set, write_set, SetFormat};
