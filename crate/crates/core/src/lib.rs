//! Monte Carlo valuation of variable annuities carrying a guaranteed
//! minimum income benefit (GMIB) rider.
//!
//! The rider pays `max(BB(T), S_f(T))` at annuitization, where the benefit
//! base `BB` is a rolled-up premium converted to income and `S_f` is the
//! fee-deducted fund. The crate prices the rider, solves for the fair
//! guaranteed payment rate, estimates exercise probabilities, locates the
//! critical rate for the one-year reset option and fits regression curves
//! to the resulting surfaces.

pub mod cli;
pub mod config;
pub mod contract;
mod error;
mod exec;
pub mod experiments;
pub mod output;
pub mod regression;
pub mod reset;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod valuation;

pub use contract::{annuity_factor, benefit_base, fee_amount, AnnuityTiming, ContractTerms, FeeStructure, MarketModel};
pub use error::{Error, Result};
pub use reset::{critical_rate, critical_rate_surface, BbRateMode, CriticalRate, CriticalStatus, ResetScenario};
pub use simulation::{expected_terminal_mean, simulate_terminal, Extension, SimPlan, TerminalSample};
pub use valuation::{estimate_value, exercise_probability, fair_guarantee_rate, FairRateOptions, FairRateResult, ValuationResult};
