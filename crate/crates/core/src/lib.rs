//! Simulation and recognition stack for a touchless capacitive 3D pad.
//!
//! The crate covers the whole path from a hand moving above a four-electrode
//! sensing board to a recognized digit:
//!
//! - [`sensing`]: behavioral model of the electrodes, comparator filter, scan
//!   multiplexing, ADC and baseline trim, producing 80 Hz [`sensing::ChannelFrame`]s.
//! - [`gesture`]: coordinate reconstruction, proximity segmentation and 28×28
//!   rasterization.
//! - [`dataset`]: synthetic digit trajectories, dataset files and augmentation.
//! - [`nn`]: tensors, layers, Adam and the training loop for the CNN, MLP and
//!   LSTM classifiers.
//! - [`session`]: the streaming protocol that drives a live simulate → segment →
//!   classify loop.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod gesture;
pub mod sensing;
pub mod dataset;
pub mod pipeline;
pub mod nn;
pub mod session;
