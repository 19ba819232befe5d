//! Dataset and model files, spatial pooling and the synthetic shift
//! generator.

mod format;
mod model;
mod pool;
mod synth;

pub use format::{
    decode_tensor, encode_tensor, labels_path, read_labels, read_set, read_tensor, write_labels, write_set,
    write_tensor, write_text, MAGIC, VERSION,
};
pub use model::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use pool::spatial_pool;
pub use synth::{generate_shift, ShiftKind, ShiftSpec, SyntheticShift};
