//! Grid sweeps and studies built from the valuation primitives.

use crate::contract::{ContractTerms, FeeStructure, MarketModel};
use crate::error::Result;
use crate::simulation::{simulate_terminal, SimPlan, TerminalSample};
use crate::valuation::{
    estimate_value, exercise_probability, fair_guarantee_rate, FairRateOptions, FairRateResult,
    ValuationResult,
};

/// Lower and upper edge of the payment rates insurers typically offer.
pub const COMPETITIVE_G_RANGE: (f64, f64) = (0.05, 0.10);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub c: f64,
    pub g: f64,
    pub value: ValuationResult,
    pub probability: ValuationResult,
}

fn cell(terms: &ContractTerms, model: &MarketModel, sample: &TerminalSample) -> Result<GridCell> {
    Ok(GridCell {
        c: terms.fee_rate,
        g: terms.payment_rate,
        value: estimate_value(terms, model, sample)?,
        probability: exercise_probability(terms, model, sample)?,
    })
}

/// Value and exercise probability over the `(c, g)` grid, fee-major.
///
/// Every cell reads the same substreams. Under F1 one sample per fee rate
/// serves the whole `g` row.
pub fn sweep_grid(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
    g_grid: &[f64],
    c_grid: &[f64],
) -> Result<Vec<GridCell>> {
    let mut cells = Vec::with_capacity(g_grid.len() * c_grid.len());
    for &c in c_grid {
        let row_terms = terms.with_fee_rate(c);
        match terms.fee_structure {
            FeeStructure::F1 => {
                let sample = simulate_terminal(&row_terms, model, plan, None)?;
                for &g in g_grid {
                    cells.push(cell(&row_terms.with_payment_rate(g), model, &sample)?);
                }
            }
            FeeStructure::F2 => {
                for &g in g_grid {
                    let t = row_terms.with_payment_rate(g);
                    let sample = simulate_terminal(&t, model, plan, None)?;
                    cells.push(cell(&t, model, &sample)?);
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairRow {
    pub c: f64,
    pub outcome: Result<FairRate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairRate {
    pub solution: FairRateResult,
    /// Value at `g_star`.
    pub value: ValuationResult,
}

impl FairRow {
    pub fn g_star(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|f| f.solution.g_star)
    }
}

/// Fair payment rate for each fee rate.
pub fn fair_rate_table(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
    c_grid: &[f64],
    options: &FairRateOptions,
) -> Result<Vec<FairRow>> {
    c_grid
        .iter()
        .map(|&c| {
            let row_terms = terms.with_fee_rate(c);
            let outcome = match fair_guarantee_rate(&row_terms, model, plan, options) {
                Ok(solution) => {
                    let at = row_terms.with_payment_rate(solution.g_star);
                    let sample = simulate_terminal(&at, model, plan, None)?;
                    Ok(FairRate {
                        solution,
                        value: estimate_value(&at, model, &sample)?,
                    })
                }
                Err(e) if e.is_numerical() => Err(e),
                Err(e) => return Err(e),
            };
            Ok(FairRow { c, outcome })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaStudy {
    pub sigma: f64,
    pub grid: Vec<GridCell>,
    pub fair: Vec<FairRow>,
}

impl SigmaStudy {
    /// Max minus min fair rate across the fee levels that solved.
    pub fn fair_spread(&self) -> Option<f64> {
        let rates: Vec<f64> = self.fair.iter().filter_map(FairRow::g_star).collect();
        if rates.is_empty() {
            return None;
        }
        let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max - min)
    }

    /// Fee levels whose fair rate falls outside the competitive range.
    pub fn out_of_range(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = COMPETITIVE_G_RANGE;
        self.fair
            .iter()
            .filter_map(|row| row.g_star().map(|g| (row.c, g)))
            .filter(|&(_, g)| g < lo || g > hi)
            .collect()
    }
}

/// Repeats the grid sweep and fair-rate table at each volatility.
pub fn volatility_study(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
    sigmas: &[f64],
    g_grid: &[f64],
    c_grid: &[f64],
    options: &FairRateOptions,
) -> Result<Vec<SigmaStudy>> {
    if sigmas.is_empty() {
        return Err(crate::Error::Domain("volatility list is empty".into()));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let m = MarketModel { sigma, ..*model };
            Ok(SigmaStudy {
                sigma,
                grid: sweep_grid(terms, &m, plan, g_grid, c_grid)?,
                fair: fair_rate_table(terms, &m, plan, c_grid, options)?,
            })
        })
        .collect()
}
