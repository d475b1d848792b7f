//! Core model of a conveyor-belt visual inspection station.
//!
//! Everything in this crate is deterministic and free of I/O: the virtual
//! plant (motor, encoder, belt, photoelectric sensor, LED lighting), the
//! embedded supervisor with its PID speed loop, the image-processing
//! primitives, the virtual smart camera, the case-study scenario generators,
//! the confusion-matrix statistics and the fixed-step simulation engine that
//! wires them together.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature only adds
//! `std::error::Error` plumbing for downstream users.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod camera;
pub mod controller;
mod error;
pub mod metrics;
pub mod plant;
pub mod rng;
pub mod scenarios;
pub mod sim;
pub mod vision;

pub use error::{CoreError, CoreResult};
