//! Dynamic demoiréing acceleration, the allocation-only core.
//!
//! Images are split into tiles, every tile is scored with a closed-form moiré
//! complexity prior (colorfulness times mean Gaussian high-pass response),
//! tiles are ranked and routed to width-sliced subnets of one weight-shared
//! convolutional supernet, and the restored tiles are concatenated back.
//! Compute is accounted per group against the full-width baseline.
//!
//! Everything here is `no_std` + `alloc`. File formats, PNG handling, thread
//! pools and the command line live in the `dda` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_op_in_unsafe_fn)]

extern crate alloc;

mod error;
mod exec;
pub mod image;
mod math;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod prior;
pub mod router;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
pub use image::{concat, extract, split, Image, Lab, PatchGrid, Plane, Tile};
pub use metrics::MetricResult;
pub use nn::{Gradients, SubnetView, SupernetSpec, SupernetWeights, WidthList};
pub use pipeline::{FlopsReport, GroupingPolicy};
pub use prior::{MoireScore, PriorConfig};
pub use router::{GroupAssignment, Thresholds};
