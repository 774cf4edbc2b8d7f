//! Multi-view reconstructive preserving embedding (MRPE).
//!
//! Learns one low-dimensional embedding shared by several feature views of
//! the same samples. Each view contributes its locally linear reconstruction
//! structure; per-view importance weights are learned alongside the
//! embedding by alternating optimization.
//!
//! ```no_run
//! use mvembed::data::{generate_synthetic, SynthSpec};
//! use mvembed::mrpe::{fit, MrpeConfig};
//!
//! let data = generate_synthetic(&SynthSpec::two_view_default(7)).unwrap();
//! let result = fit(&data, &MrpeConfig { d: 5, ..Default::default() }).unwrap();
//! println!("view weights: {:?}", result.alpha);
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod mrpe;
pub mod neighbors;
pub mod reconstruction;
pub mod seeding;
pub mod spectral;

pub use error::{Error, ErrorCategory, Result};
