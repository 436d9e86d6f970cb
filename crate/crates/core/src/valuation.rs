//! Risk-neutral rider value, exercise probability and the fair payment rate.

use crate::contract::{benefit_base, ContractTerms, FeeStructure, MarketModel};
use crate::error::{Error, Result};
use crate::exec;
use crate::simulation::{simulate_terminal, SimPlan, TerminalSample};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuationResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl ValuationResult {
    /// Sample mean with `std_error = sample std / sqrt(n)`.
    pub fn from_values(values: &[f64]) -> Self {
        let (estimate, std_error) = exec::mean_and_std_error(values);
        ValuationResult {
            estimate,
            std_error,
            n_paths: values.len(),
        }
    }

    fn from_proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        ValuationResult {
            estimate: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_paths: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairRateResult {
    pub g_star: f64,
    pub bracket: (f64, f64),
    /// `V(g_star) - S0` on the solver's common sample.
    pub residual: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairRateOptions {
    pub bracket: (f64, f64),
    /// Outermost bracket reachable by expansion.
    pub limits: (f64, f64),
    pub tolerance_g: f64,
    /// Bisection also stops once `|V(g) - S0|` falls below this.
    pub tolerance_value: f64,
}

impl Default for FairRateOptions {
    fn default() -> Self {
        FairRateOptions {
            bracket: (0.05, 0.10),
            limits: (0.0, 0.5),
            tolerance_g: 1e-4,
            tolerance_value: 0.01,
        }
    }
}

pub fn gmib_payoff(terminal_account: f64, bb: f64) -> f64 {
    terminal_account.max(bb)
}

/// The account under F1 fees does not depend on `g`, so a sample drawn for
/// one payment rate is valid for all of them.
fn check_sample(terms: &ContractTerms, model: &MarketModel, sample: &TerminalSample) -> Result<()> {
    if sample.extension.is_some() {
        return Err(Error::ContractViolation(
            "sample includes deferral years".into(),
        ));
    }
    if sample.model != *model {
        return Err(Error::ContractViolation(format!(
            "sample model {:?} differs from {:?}",
            sample.model, model
        )));
    }
    let comparable = match terms.fee_structure {
        FeeStructure::F1 => sample.terms.with_payment_rate(terms.payment_rate),
        FeeStructure::F2 => sample.terms,
    };
    if comparable != *terms {
        return Err(Error::ContractViolation(format!(
            "sample terms {:?} differ from {:?}",
            sample.terms, terms
        )));
    }
    if sample.values.is_empty() {
        return Err(Error::ContractViolation("empty sample".into()));
    }
    Ok(())
}

/// `E[(1 + r)^{-T} max(BB(T), S_f(T))]`.
pub fn estimate_value(
    terms: &ContractTerms,
    model: &MarketModel,
    sample: &TerminalSample,
) -> Result<ValuationResult> {
    check_sample(terms, model, sample)?;
    let bb = benefit_base(terms, model.rate, terms.horizon)?;
    let discount = (1.0 + model.rate).powi(-(terms.horizon as i32));
    let discounted: Vec<f64> = sample
        .values
        .iter()
        .map(|&s| discount * gmib_payoff(s, bb))
        .collect();
    Ok(ValuationResult::from_values(&discounted))
}

/// Fraction of paths where the benefit base beats the account. Ties count
/// as exercise.
pub fn exercise_probability(
    terms: &ContractTerms,
    model: &MarketModel,
    sample: &TerminalSample,
) -> Result<ValuationResult> {
    check_sample(terms, model, sample)?;
    let bb = benefit_base(terms, model.rate, terms.horizon)?;
    let hits = sample.values.iter().filter(|&&s| bb >= s).count();
    Ok(ValuationResult::from_proportion(hits, sample.values.len()))
}

/// Solves `V(g) = S0` by bisection on common random numbers.
///
/// F1 reuses one frozen sample; F2 re-simulates every evaluation from the
/// same substreams because its fees depend on `g`.
pub fn fair_guarantee_rate(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
    options: &FairRateOptions,
) -> Result<FairRateResult> {
    let (lo_limit, hi_limit) = options.limits;
    let (mut lo, mut hi) = options.bracket;
    if !(lo_limit <= lo && lo < hi && hi <= hi_limit) || !(options.tolerance_g > 0.0) {
        return Err(Error::Domain(format!(
            "invalid fair-rate bracket [{lo}, {hi}] within [{lo_limit}, {hi_limit}]"
        )));
    }
    let frozen = match terms.fee_structure {
        FeeStructure::F1 => Some(simulate_terminal(terms, model, plan, None)?),
        FeeStructure::F2 => None,
    };
    let h = |g: f64| -> Result<f64> {
        let candidate = terms.with_payment_rate(g);
        let value = match &frozen {
            Some(sample) => estimate_value(&candidate, model, sample)?,
            None => {
                let sample = simulate_terminal(&candidate, model, plan, None)?;
                estimate_value(&candidate, model, &sample)?
            }
        };
        Ok(value.estimate - terms.premium)
    };

    let mut h_lo = h(lo)?;
    let mut h_hi = h(hi)?;
    let mut width = hi - lo;
    while h_lo.signum() == h_hi.signum() && h_lo != 0.0 && h_hi != 0.0 {
        if h_lo > 0.0 {
            if lo <= lo_limit {
                return Err(no_root(&h, options.limits)?);
            }
            hi = lo;
            h_hi = h_lo;
            lo = (lo - width).max(lo_limit);
            h_lo = h(lo)?;
        } else {
            if hi >= hi_limit {
                return Err(no_root(&h, options.limits)?);
            }
            lo = hi;
            h_lo = h_hi;
            hi = (hi + width).min(hi_limit);
            h_hi = h(hi)?;
        }
        width *= 2.0;
    }
    if h_lo == 0.0 {
        return Ok(FairRateResult {
            g_star: lo,
            bracket: (lo, lo),
            residual: 0.0,
            iterations: 0,
        });
    }
    if h_hi == 0.0 {
        return Ok(FairRateResult {
            g_star: hi,
            bracket: (hi, hi),
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut iterations = 0;
    while hi - lo > options.tolerance_g {
        let mid = 0.5 * (lo + hi);
        let h_mid = h(mid)?;
        iterations += 1;
        if h_mid.abs() <= options.tolerance_value {
            return Ok(FairRateResult {
                g_star: mid,
                bracket: (lo, hi),
                residual: h_mid,
                iterations,
            });
        }
        if h_mid.signum() == h_lo.signum() {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    let g_star = 0.5 * (lo + hi);
    Ok(FairRateResult {
        g_star,
        bracket: (lo, hi),
        residual: h(g_star)?,
        iterations,
    })
}

fn no_root(h: &impl Fn(f64) -> Result<f64>, (low, high): (f64, f64)) -> Result<Error> {
    Ok(Error::NoRoot {
        low,
        high,
        h_low: h(low)?,
        h_high: h(high)?,
    })
}
