//! File formats: WAV audio, label sidecars, dataset manifests and the
//! decision/segment text outputs.

mod labels;
mod manifest;
mod wav;

pub use labels::{read_labels, write_labels};
pub use manifest::{load_split, read_manifest, write_manifest, ManifestRecord, Split};
pub use wav::{dequantize, quantize, read_wav, write_wav, WavFile};
