//! Simulation and control toolkit for digitalised deposit-return networks.
//!
//! Cups (or any returnable item) carry a digital wallet loaded with a deposit.
//! Each stage of the reverse-logistics chain is paid a reward out of that
//! wallet when it moves the item forward. This crate provides:
//!
//! * [`behavior`]: acceptance-probability curves `b(R)` for a stage actor;
//! * [`binsim`]: decentralised bin load balancing by exponential races, and a
//!   week-long smart-bin simulator;
//! * [`rewardopt`]: centralised reference solver for the throughput-optimal
//!   split of a deposit;
//! * [`aimd`]: the decentralised, curve-private AIMD reward allocator;
//! * [`depositctl`]: PI loop adjusting the deposit towards a target rate;
//! * [`ddrs`]: the end-to-end cup-level simulator closing all loops.
//!
//! The numerical modules are generic over the scalar type ([`Scalar`]); the
//! aliases below fix it to `f64` for everyday use.

pub mod aimd;
pub mod behavior;
pub mod binsim;
pub mod ddrs;
pub mod depositctl;
pub mod rewardopt;
mod scalar;

pub use scalar::Scalar;

/// Exponential-saturation curve over `f64`.
pub type Curve = behavior::BehaviorCurve<f64>;
/// Reward vector over `f64` pence.
pub type Rewards = rewardopt::RewardVector<f64>;
/// Throughput surface over `f64`.
pub type Surface = rewardopt::ThroughputSurface<f64>;
pub type AimdConfig = aimd::AimdConfig<f64>;
pub type PiConfig = depositctl::PiConfig<f64>;
pub type PiController = depositctl::PiController<f64>;

/// The three-layer paper-cup chain used throughout the examples:
/// consumers, collectors and paper mills, with `(p0, x90)` of
/// `(0.05, 15p)`, `(0.10, 5p)` and `(0.50, 1p)`.
pub fn paper_cup_curves() -> Vec<Curve> {
    vec![
        Curve::new(0.05, 15.0).expect("valid consumer curve"),
        Curve::new(0.10, 5.0).expect("valid collector curve"),
        Curve::new(0.50, 1.0).expect("valid paper mill curve"),
    ]
}
