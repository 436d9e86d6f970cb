//! Critical extension-year rate for the one-year reset (deferral) option.
//!
//! `D(r') = E[S_f(T + 1)] - BB(T + 1)` is evaluated on one frozen sample
//! for every candidate rate, and its root is the critical rate `r*`.

use serde::{Deserialize, Serialize};

use crate::contract::{annuity_factor, ContractTerms, FeeStructure, MarketModel};
use crate::error::{Error, Result};
use crate::exec;
use crate::simulation::{DeferralSample, Extension, SimPlan};
use crate::valuation::ValuationResult;

/// Which rate values the annuity inside the deferred benefit base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BbRateMode {
    #[serde(rename = "extension")]
    AtExtensionRate,
    #[serde(rename = "contract")]
    AtContractRate,
}

pub const RATE_TOLERANCE: f64 = 1e-4;
pub const DIFFERENCE_TOLERANCE: f64 = 0.01;

/// Candidate extension rates `0.00, 0.01, ..., 0.15`.
pub fn default_rate_grid() -> Vec<f64> {
    (0..=15).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResetScenario {
    pub terms: ContractTerms,
    pub model: MarketModel,
    pub rate_grid: Vec<f64>,
    pub bb_rate_mode: BbRateMode,
    pub charge_extension_fees: bool,
}

impl ResetScenario {
    pub fn new(terms: ContractTerms, model: MarketModel) -> Self {
        ResetScenario {
            terms,
            model,
            rate_grid: default_rate_grid(),
            bb_rate_mode: BbRateMode::AtExtensionRate,
            charge_extension_fees: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.terms.validate()?;
        self.model.validate()?;
        if self.rate_grid.len() < 2 {
            return Err(Error::Domain("rate grid needs at least two nodes".into()));
        }
        if self.rate_grid.iter().any(|r| !(0.0..=0.5).contains(r)) {
            return Err(Error::Domain("rate grid must lie within [0, 0.5]".into()));
        }
        if self.rate_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("rate grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Benefit base rolled up one year past the horizon.
pub fn deferred_benefit_base(
    terms: &ContractTerms,
    model: &MarketModel,
    r_prime: f64,
    mode: BbRateMode,
) -> Result<f64> {
    let rate = match mode {
        BbRateMode::AtExtensionRate => r_prime,
        BbRateMode::AtContractRate => model.rate,
    };
    let annuity = annuity_factor(rate, terms.annuity_term, terms.annuity_timing)?;
    Ok(terms.premium
        * (1.0 + terms.roll_up_rate).powi(terms.horizon as i32 + 1)
        * terms.payment_rate
        * annuity)
}

/// Monte Carlo mean of the account one year past the horizon.
pub fn deferred_account_mean(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
    r_prime: f64,
    charge_extension_fees: bool,
) -> Result<ValuationResult> {
    let ext = Extension::one_year(r_prime, charge_extension_fees);
    let sample = crate::simulation::simulate_terminal(terms, model, plan, Some(&ext))?;
    Ok(ValuationResult::from_values(&sample.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriticalStatus {
    Found,
    /// The account beats the benefit base even at the lowest grid rate.
    BelowRange,
    /// The benefit base beats the account even at the highest grid rate.
    AboveRange,
}

impl CriticalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriticalStatus::Found => "ok",
            CriticalStatus::BelowRange => "below_range",
            CriticalStatus::AboveRange => "above_range",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(CriticalStatus::Found),
            "below_range" => Some(CriticalStatus::BelowRange),
            "above_range" => Some(CriticalStatus::AboveRange),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalRate {
    pub r_star: Option<f64>,
    pub status: CriticalStatus,
    /// `D` at the first and last grid node.
    pub d_low: f64,
    pub d_high: f64,
    pub iterations: u32,
    /// Whether `D` increased strictly across every grid node.
    pub strictly_increasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub rate: f64,
    pub benefit_base: f64,
    pub account: ValuationResult,
}

impl CurvePoint {
    pub fn difference(&self) -> f64 {
        self.account.estimate - self.benefit_base
    }
}

/// Evaluates `D` on a frozen deferral sample.
pub struct DeferralAnalysis<'a> {
    scenario: &'a ResetScenario,
    sample: DeferralSample,
}

impl<'a> DeferralAnalysis<'a> {
    pub fn new(scenario: &'a ResetScenario, plan: &SimPlan) -> Result<Self> {
        scenario.validate()?;
        let sample = DeferralSample::simulate(&scenario.terms, &scenario.model, plan)?;
        Ok(DeferralAnalysis { scenario, sample })
    }

    /// Reuses an account sample drawn for other payment rates; only valid
    /// under F1 fees, where the account does not depend on `g`.
    fn with_sample(scenario: &'a ResetScenario, sample: DeferralSample) -> Self {
        DeferralAnalysis { scenario, sample }
    }

    pub fn point(&self, rate: f64) -> Result<CurvePoint> {
        let s = self.scenario;
        let extended = self.sample.extend(rate, s.charge_extension_fees)?;
        Ok(CurvePoint {
            rate,
            benefit_base: deferred_benefit_base(&s.terms, &s.model, rate, s.bb_rate_mode)?,
            account: ValuationResult::from_values(&extended.values),
        })
    }

    fn difference(&self, rate: f64) -> Result<f64> {
        let s = self.scenario;
        let extended = self.sample.extend(rate, s.charge_extension_fees)?;
        let mean = exec::mean_and_std_error(&extended.values).0;
        Ok(mean - deferred_benefit_base(&s.terms, &s.model, rate, s.bb_rate_mode)?)
    }

    pub fn curve(&self) -> Result<Vec<CurvePoint>> {
        self.scenario.rate_grid.iter().map(|&r| self.point(r)).collect()
    }

    pub fn critical_rate(&self) -> Result<CriticalRate> {
        let grid = &self.scenario.rate_grid;
        let d: Vec<f64> = grid
            .iter()
            .map(|&r| self.difference(r))
            .collect::<Result<_>>()?;
        let strictly_increasing = d.windows(2).all(|w| w[0] < w[1]);
        let d_low = d[0];
        let d_high = d[d.len() - 1];
        let mut result = CriticalRate {
            r_star: None,
            status: CriticalStatus::Found,
            d_low,
            d_high,
            iterations: 0,
            strictly_increasing,
        };

        if let Some(i) = d.iter().position(|&v| v == 0.0) {
            result.r_star = Some(grid[i]);
            return Ok(result);
        }
        let Some(k) = d.windows(2).position(|w| w[0].signum() != w[1].signum()) else {
            result.status = if d_low > 0.0 {
                CriticalStatus::BelowRange
            } else {
                CriticalStatus::AboveRange
            };
            return Ok(result);
        };

        let (mut lo, mut hi) = (grid[k], grid[k + 1]);
        let mut d_lo = d[k];
        let mut iterations = 0;
        let r_star = loop {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= RATE_TOLERANCE {
                break mid;
            }
            let d_mid = self.difference(mid)?;
            iterations += 1;
            if d_mid.abs() < DIFFERENCE_TOLERANCE {
                break mid;
            }
            if d_mid.signum() == d_lo.signum() {
                lo = mid;
                d_lo = d_mid;
            } else {
                hi = mid;
            }
        };
        result.r_star = Some(r_star);
        result.iterations = iterations;
        Ok(result)
    }
}

pub fn critical_rate(scenario: &ResetScenario, plan: &SimPlan) -> Result<CriticalRate> {
    DeferralAnalysis::new(scenario, plan)?.critical_rate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceEntry {
    pub c: f64,
    pub g: f64,
    pub critical: CriticalRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRateSurface {
    /// Fee-major, payment-rate-minor.
    pub entries: Vec<SurfaceEntry>,
    pub g_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub plan: SimPlan,
}

/// Critical rates over the `(c, g)` grid. Under F1 all cells with the same
/// fee rate share one account sample.
pub fn critical_rate_surface(
    g_grid: &[f64],
    c_grid: &[f64],
    base: &ResetScenario,
    plan: &SimPlan,
) -> Result<CriticalRateSurface> {
    if g_grid.is_empty() || c_grid.is_empty() {
        return Err(Error::Domain("surface grids must be non-empty".into()));
    }
    base.validate()?;
    let mut entries = Vec::with_capacity(g_grid.len() * c_grid.len());
    for &c in c_grid {
        let mut shared: Option<DeferralSample> = None;
        for &g in g_grid {
            let scenario = ResetScenario {
                terms: base.terms.with_fee_rate(c).with_payment_rate(g),
                ..base.clone()
            };
            scenario.validate()?;
            let critical = match scenario.terms.fee_structure {
                FeeStructure::F1 => {
                    let sample = match shared.take() {
                        Some(s) => s,
                        None => DeferralSample::simulate(&scenario.terms, &scenario.model, plan)?,
                    };
                    let analysis = DeferralAnalysis::with_sample(&scenario, sample);
                    let critical = analysis.critical_rate()?;
                    shared = Some(analysis.sample);
                    critical
                }
                FeeStructure::F2 => critical_rate(&scenario, plan)?,
            };
            entries.push(SurfaceEntry { c, g, critical });
        }
    }
    Ok(CriticalRateSurface {
        entries,
        g_grid: g_grid.to_vec(),
        c_grid: c_grid.to_vec(),
        plan: *plan,
    })
}

/// Whether deferring annuitization is rational given an expected
/// extension-year rate.
pub fn recommend_reset(account_at_t: f64, bb_at_t: f64, expected_rate: f64, r_star: f64) -> bool {
    (account_at_t > bb_at_t && expected_rate < r_star)
        || (account_at_t < bb_at_t && expected_rate > r_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::AnnuityTiming;
    use crate::simulation::expected_terminal_mean;

    fn flat() -> MarketModel {
        MarketModel { rate: 0.05, sigma: 0.0 }
    }

    #[test]
    fn deferred_bb_examples() {
        let terms = ContractTerms::default();
        let bb = deferred_benefit_base(&terms, &flat(), 0.05, BbRateMode::AtExtensionRate).unwrap();
        assert!((bb - 236_958.0).abs() < 1.0, "{bb}");
        let a = deferred_benefit_base(&terms, &flat(), 0.01, BbRateMode::AtContractRate).unwrap();
        let b = deferred_benefit_base(&terms, &flat(), 0.09, BbRateMode::AtContractRate).unwrap();
        assert_eq!(a, b);
        let zero = terms.with_payment_rate(0.0);
        assert_eq!(
            deferred_benefit_base(&zero, &flat(), 0.03, BbRateMode::AtExtensionRate).unwrap(),
            0.0
        );
    }

    #[test]
    fn deferred_account_without_noise() {
        let terms = ContractTerms::default().with_fee_rate(0.0);
        let plan = SimPlan::new(5, 1);
        let m = deferred_account_mean(&terms, &flat(), &plan, 0.03, true).unwrap();
        let expected = 100_000.0 * 1f64.exp() * 0.03f64.exp();
        assert!((m.estimate - expected).abs() < 1e-6 * expected);
        assert_eq!(m.std_error, 0.0);
        let m0 = deferred_account_mean(&terms, &flat(), &plan, 0.0, true).unwrap();
        assert!((m0.estimate - 100_000.0 * 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn deferred_account_agrees_with_oracle() {
        let terms = ContractTerms::default();
        let model = MarketModel::default();
        let plan = SimPlan::new(50_000, 17);
        let m = deferred_account_mean(&terms, &model, &plan, 0.05, true).unwrap();
        let oracle =
            expected_terminal_mean(&terms, &model, Some(&Extension::one_year(0.05, true))).unwrap();
        assert!((m.estimate - oracle).abs() <= 3.0 * m.std_error, "{m:?} vs {oracle}");
    }

    #[test]
    fn contract_rate_mode_recovers_contract_rate() {
        // Solve BB(T') = S0 e^{rT} e^{r} for g, then r* must equal r.
        let model = flat();
        let base = ContractTerms::default().with_fee_rate(0.0);
        let a20 = annuity_factor(0.05, 20, AnnuityTiming::Due).unwrap();
        let g = 100_000.0 * (0.05f64 * 21.0).exp() / (100_000.0 * 1.05f64.powi(21) * a20);
        let scenario = ResetScenario {
            bb_rate_mode: BbRateMode::AtContractRate,
            ..ResetScenario::new(base.with_payment_rate(g), model)
        };
        let res = critical_rate(&scenario, &SimPlan::new(3, 1)).unwrap();
        assert_eq!(res.status, CriticalStatus::Found);
        assert!((res.r_star.unwrap() - 0.05).abs() <= RATE_TOLERANCE, "{res:?}");
    }

    #[test]
    fn zero_g_is_out_of_range() {
        let scenario = ResetScenario::new(ContractTerms::default().with_payment_rate(0.0), MarketModel::default());
        let res = critical_rate(&scenario, &SimPlan::new(1000, 1)).unwrap();
        assert_eq!(res.status, CriticalStatus::BelowRange);
        assert!(res.r_star.is_none());
        assert!(res.d_low > 0.0 && res.d_high > 0.0);
    }

    #[test]
    fn huge_g_is_above_range() {
        let scenario = ResetScenario::new(ContractTerms::default().with_payment_rate(0.5), MarketModel::default());
        let res = critical_rate(&scenario, &SimPlan::new(1000, 1)).unwrap();
        assert_eq!(res.status, CriticalStatus::AboveRange);
    }

    #[test]
    fn scenario_validation() {
        let mut s = ResetScenario::new(ContractTerms::default(), MarketModel::default());
        s.rate_grid = vec![0.0, 0.02, 0.02];
        assert!(s.validate().is_err());
        s.rate_grid = vec![0.0, 0.6];
        assert!(s.validate().is_err());
    }

    #[test]
    fn one_cell_surface_equals_single_solve() {
        let scenario = ResetScenario::new(ContractTerms::default(), MarketModel::default());
        let plan = SimPlan::new(2000, 4);
        let surface = critical_rate_surface(&[0.065], &[0.007], &scenario, &plan).unwrap();
        assert_eq!(surface.entries.len(), 1);
        assert_eq!(surface.entries[0].critical, critical_rate(&scenario, &plan).unwrap());
    }

    #[test]
    fn rationality_rule() {
        assert!(recommend_reset(120.0, 100.0, 0.03, 0.0435));
        assert!(!recommend_reset(120.0, 100.0, 0.05, 0.0435));
        assert!(recommend_reset(80.0, 100.0, 0.05, 0.0435));
        assert!(!recommend_reset(80.0, 100.0, 0.03, 0.0435));
        assert!(!recommend_reset(100.0, 100.0, 0.03, 0.0435));
    }
}
