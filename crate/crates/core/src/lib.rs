//! Phase-field simulator for volume-preserving mean curvature flow with
//! obstacles on the periodic unit torus.
//!
//! The state is an Allen–Cahn order parameter driven by a nonlocal volume
//! multiplier and a frozen obstacle push. Around the integrator sits a set
//! of diagnostics (energy, discrepancy, density ratio, barrier comparison,
//! volume drift) and a sharp-interface ODE for unions of round interfaces
//! that serves as an independent reference.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The
//! aliases at the crate root pin the scalar to `f64`, which is what the
//! configuration layer, the file formats and the command-line driver use.

// `!(x < y)` is deliberate: NaN inputs must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod initial;
pub mod multiplier;
pub mod obstacles;
pub mod oracle;
pub mod output;
pub mod presets;
pub mod profile;
pub mod spectral;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Scalar type the numerical core is generic over.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or configuration value.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("value representable in the scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in the scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use fields::TorusGrid;

pub type ScalarField = fields::ScalarField<f64>;
pub type Ball = obstacles::Ball<f64>;
pub type ObstacleSet = obstacles::ObstacleSet<f64>;
pub type ForcingTemplate = obstacles::ForcingTemplate<f64>;
pub type InitialSpec = initial::InitialSpec<f64>;
pub type WellPreparedReport = initial::WellPreparedReport<f64>;
pub type MultiplierState = multiplier::MultiplierState<f64>;
pub type SimState = dynamics::SimState<f64>;
pub type DiagnosticsRecord = diagnostics::DiagnosticsRecord<f64>;
pub type BallConfig = oracle::BallConfig<f64>;

pub use config::SimConfig;
pub use dynamics::Scheme;
