//! Recognition core for handwritten census table fields.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole numeric
//! path from a page raster to a decoded word:
//!
//! * [`preproc`]: polygon enlargement, projection profiles, table line
//!   detection, cell cut-out and height/contrast normalization.
//! * [`net`]: the multi-directional recurrent network (Gabor front end,
//!   leaky or LSTM grid cells, subsampling, column collapse, softmax) with an
//!   exact reverse-mode backward pass.
//! * [`ctc`]: label/blank interleaving, the CTC forward algorithm and its
//!   gradient.
//! * [`train`]: dataset splitting, epoch sampling, SGD with momentum, the
//!   two-phase schedule and the binary checkpoint format.
//! * [`decode`]: dictionary-constrained decoding with length-normalized
//!   costs, committees, top-k lists, joint NAME decoding and cross-field
//!   consistency correction.
//!
//! Everything that touches files, images on disk or the command line lives
//! in the companion `tablereader` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ctc;
pub mod decode;
mod error;
pub mod fields;
pub mod gradcheck;
mod math;
pub mod net;
pub mod preproc;
pub mod train;

pub use error::{Error, Result};
pub use fields::{Alphabet, FieldType};
pub use net::{Network, NetworkSpec, OutputMatrix};
pub use preproc::Raster;
