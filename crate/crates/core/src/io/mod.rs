//! External formats: layout documents, checkpoints, PLY, images, traces
//! and photometric target sets.

mod checkpoint;
mod image_io;
mod layout_doc;
mod ply;
mod targets_dir;
mod trace_csv;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use image_io::{encode_png, encode_ppm, quantize, read_image, to_rgb8, write_image, ImageIoError};
pub use layout_doc::{parse_layout, InstanceSpec, LayoutDocument, LayoutError, Violation, LAYOUT_VERSION};
pub use ply::{export_ply, import_ply, ply_header, PlyError, PlyGaussians, SH_C0};
pub use targets_dir::{load_targets, save_targets, TargetDirError, TARGET_MANIFEST};
pub use trace_csv::write_trace_csv;
