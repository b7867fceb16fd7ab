//! Truncated Fock-space simulation of the purification protocol and of its
//! linear-optics implementation.
//!
//! Mode order everywhere: Alice's kept modes, then channel rails, then
//! resource rails, then the output mode. In tripartite heralded states the
//! order is Alice's rails, Bob's rails, environment rails.

mod channels;
mod circuit;
mod density;
mod dump;
mod protocol;
mod state;

pub use channels::{apply_amplifier, apply_pure_loss, apply_thermal_loss, detector_model, DetectorModel};
pub use circuit::{
    build_resource_state, distorted_csum, encode_maximally_entangled, ideal_transfer_target, linear_optics_purify,
    linear_optics_purify_with_cutoff, PurifyOutcome,
};
pub use density::{DensityOperator, SparseImage};
pub use dump::{DumpTerm, StateDump};
pub use protocol::{
    brute_force_iterative_rate, heralded_ab_density, heralded_state_channel_sim, heralded_state_direct, make_tmsv,
    qnd_total_number, qnd_total_number_mixed, rci_numeric, tmsv_product,
};
pub use state::{FockArray, Occupation};

use crate::error::{domain, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Relative trace loss from truncation above which channels fail.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Largest dense operator basis the simulator will build.
pub const DEFAULT_DIM_BUDGET: usize = 20_000;

/// Physical parameters of the link and of Bob's detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub eta: f64,
    pub nbar: f64,
    pub eta_eff: f64,
    pub dark_nbar: f64,
    /// Per-rail transmissivities overriding `eta` when set.
    pub rail_etas: Option<Vec<f64>>,
}

impl ChannelModel {
    pub fn pure_loss(eta: f64) -> Result<Self> {
        Self::new(eta, 0.0, 1.0, 0.0)
    }

    pub fn new(eta: f64, nbar: f64, eta_eff: f64, dark_nbar: f64) -> Result<Self> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(domain(format!("{name}={x} outside [0,1]")))
            }
        };
        unit("eta", eta)?;
        unit("eta_eff", eta_eff)?;
        for (name, x) in [("nbar", nbar), ("dark_nbar", dark_nbar)] {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(domain(format!("{name}={x} must be finite and >= 0")));
            }
        }
        Ok(ChannelModel { eta, nbar, eta_eff, dark_nbar, rail_etas: None })
    }

    pub fn with_rail_etas(mut self, etas: Vec<f64>) -> Result<Self> {
        if etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(domain("rail transmissivity outside [0,1]"));
        }
        self.rail_etas = Some(etas);
        Ok(self)
    }

    pub fn rail_eta(&self, rail: usize) -> f64 {
        self.rail_etas.as_ref().and_then(|v| v.get(rail).copied()).unwrap_or(self.eta)
    }

    pub fn detector(&self) -> DetectorModel {
        DetectorModel { eta_eff: self.eta_eff, dark_nbar: self.dark_nbar }
    }

    pub fn is_noiseless(&self) -> bool {
        self.nbar == 0.0 && self.dark_nbar == 0.0
    }
}

/// One outcome of a measurement with its probability and renormalized post-state.
#[derive(Debug, Clone)]
pub struct MeasurementRecord<S> {
    pub outcome: u32,
    pub probability: f64,
    pub post_state: S,
}
