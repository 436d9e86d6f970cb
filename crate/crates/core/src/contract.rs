//! Closed-form contract quantities: annuity factor, benefit base and the
//! annual fee schedules.
//!
//! Conventions are deliberately mixed: the fund grows with a continuously
//! compounded rate, while roll-up and annuity valuation use annual
//! compounding.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// How the annual rider fee is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeeStructure {
    /// `c * S0 * (1 + r_g)^n`
    F1,
    /// F1 scaled by `g * a_20`
    F2,
}

/// Whether the first annuity payment falls on the annuitization date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnuityTiming {
    /// First payment at the valuation date.
    Due,
    /// First payment one year after the valuation date.
    Immediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractTerms {
    /// Single premium `S(0)`.
    pub premium: f64,
    /// Accumulation period in whole years.
    pub horizon: u32,
    pub roll_up_rate: f64,
    /// Guaranteed annual payment rate `g`.
    pub payment_rate: f64,
    pub fee_rate: f64,
    pub fee_structure: FeeStructure,
    pub annuity_term: u32,
    pub annuity_timing: AnnuityTiming,
}

impl Default for ContractTerms {
    /// Baseline policy: $100,000 premium, 20 years, 5% roll-up, F1 fees at 0.7%.
    fn default() -> Self {
        ContractTerms {
            premium: 100_000.0,
            horizon: 20,
            roll_up_rate: 0.05,
            payment_rate: 0.065,
            fee_rate: 0.007,
            fee_structure: FeeStructure::F1,
            annuity_term: 20,
            annuity_timing: AnnuityTiming::Due,
        }
    }
}

impl ContractTerms {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.premium.is_finite() && self.premium > 0.0,
            "premium",
            self.premium,
            "must be finite and > 0",
        )?;
        ensure(self.horizon >= 1, "horizon", self.horizon as f64, "must be >= 1")?;
        ensure(
            self.annuity_term >= 1,
            "annuity_term",
            self.annuity_term as f64,
            "must be >= 1",
        )?;
        ensure(
            self.roll_up_rate.is_finite() && self.roll_up_rate >= 0.0,
            "roll_up_rate",
            self.roll_up_rate,
            "must be finite and >= 0",
        )?;
        // g = 0 is admitted as a limiting case for benefit-base arithmetic.
        ensure(
            self.payment_rate.is_finite() && self.payment_rate >= 0.0,
            "payment_rate",
            self.payment_rate,
            "must be finite and >= 0",
        )?;
        ensure(
            self.fee_rate.is_finite() && self.fee_rate >= 0.0,
            "fee_rate",
            self.fee_rate,
            "must be finite and >= 0",
        )
    }

    pub fn with_payment_rate(self, payment_rate: f64) -> Self {
        ContractTerms {
            payment_rate,
            ..self
        }
    }

    pub fn with_fee_rate(self, fee_rate: f64) -> Self {
        ContractTerms { fee_rate, ..self }
    }
}

/// Risk-free rate and volatility of the fee-free fund.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketModel {
    /// Continuously compounded for fund growth; annual for discounting.
    pub rate: f64,
    pub sigma: f64,
}

impl Default for MarketModel {
    fn default() -> Self {
        MarketModel {
            rate: 0.05,
            sigma: 0.10,
        }
    }
}

impl MarketModel {
    pub fn validate(&self) -> Result<()> {
        ensure(self.rate.is_finite(), "rate", self.rate, "must be finite")?;
        ensure(
            self.sigma.is_finite() && self.sigma >= 0.0,
            "sigma",
            self.sigma,
            "must be finite and >= 0",
        )
    }

    pub fn with_rate(self, rate: f64) -> Self {
        MarketModel { rate, ..self }
    }
}

/// Present value of `n_payments` annual payments of 1, by direct summation.
pub fn annuity_factor(rate: f64, n_payments: u32, timing: AnnuityTiming) -> Result<f64> {
    if !(rate > -1.0) || !rate.is_finite() {
        return Err(Error::Domain(format!("annuity rate {rate} must be finite and > -1")));
    }
    if n_payments == 0 {
        return Err(Error::Domain("annuity needs at least one payment".into()));
    }
    let v = 1.0 / (1.0 + rate);
    let first = match timing {
        AnnuityTiming::Due => 0,
        AnnuityTiming::Immediate => 1,
    };
    Ok((first..first + n_payments as i32).map(|k| v.powi(k)).sum())
}

/// Guaranteed benefit base at year `t`, converted to income at rate `g`.
pub fn benefit_base(terms: &ContractTerms, valuation_rate: f64, t: u32) -> Result<f64> {
    let annuity = annuity_factor(valuation_rate, terms.annuity_term, terms.annuity_timing)?;
    Ok(terms.premium * (1.0 + terms.roll_up_rate).powi(t as i32) * terms.payment_rate * annuity)
}

/// Fee deducted at the end of year `n` (1-based, `n <= horizon`).
pub fn fee_amount(terms: &ContractTerms, valuation_rate: f64, n: u32) -> Result<f64> {
    if n == 0 || n > terms.horizon {
        return Err(Error::Domain(format!(
            "fee year {n} outside 1..={}",
            terms.horizon
        )));
    }
    fee_schedule_unchecked(terms, valuation_rate, n)
}

/// Same formula as [`fee_amount`] with no upper bound on `n`, used for
/// deferral years past the horizon.
pub(crate) fn fee_schedule_unchecked(terms: &ContractTerms, valuation_rate: f64, n: u32) -> Result<f64> {
    let f1 = terms.fee_rate * terms.premium * (1.0 + terms.roll_up_rate).powi(n as i32);
    match terms.fee_structure {
        FeeStructure::F1 => Ok(f1),
        FeeStructure::F2 => {
            let annuity = annuity_factor(valuation_rate, terms.annuity_term, terms.annuity_timing)?;
            Ok(f1 * terms.payment_rate * annuity)
        }
    }
}

/// Precomputed fees for years `1..=years`.
pub(crate) fn fee_table(terms: &ContractTerms, valuation_rate: f64, years: u32) -> Result<Vec<f64>> {
    (1..=years)
        .map(|n| fee_schedule_unchecked(terms, valuation_rate, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn baseline() -> ContractTerms {
        ContractTerms {
            payment_rate: 0.065,
            ..ContractTerms::default()
        }
    }

    // Independent oracle: closed-form geometric series.
    fn closed_form_due(rate: f64, n: u32) -> f64 {
        let v = 1.0 / (1.0 + rate);
        (1.0 - v.powi(n as i32)) / (1.0 - v)
    }

    #[test]
    fn annuity_factor_examples() {
        assert_eq!(annuity_factor(0.0, 20, AnnuityTiming::Due).unwrap(), 20.0);
        let due = annuity_factor(0.05, 20, AnnuityTiming::Due).unwrap();
        assert!((due - 13.0853).abs() < 5e-5, "{due}");
        let imm = annuity_factor(0.05, 20, AnnuityTiming::Immediate).unwrap();
        assert!((imm - 12.4622).abs() < 5e-5, "{imm}");
    }

    #[test]
    fn annuity_factor_rejects_rate_at_minus_one() {
        assert!(matches!(
            annuity_factor(-1.0, 20, AnnuityTiming::Due),
            Err(Error::Domain(_))
        ));
        assert!(annuity_factor(f64::NAN, 20, AnnuityTiming::Due).is_err());
        assert!(annuity_factor(0.05, 0, AnnuityTiming::Due).is_err());
    }

    #[test]
    fn annuity_factor_matches_closed_form() {
        for &rate in &[-0.5, -0.01, 0.001, 0.03, 0.05, 0.1, 0.5, 2.0] {
            for &n in &[1u32, 5, 20, 40] {
                let direct = annuity_factor(rate, n, AnnuityTiming::Due).unwrap();
                assert_relative_eq!(direct, closed_form_due(rate, n), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn benefit_base_examples() {
        let bb = benefit_base(&baseline(), 0.05, 20).unwrap();
        assert!((bb - 225_676.0).abs() < 1.0, "{bb}");
        assert_eq!(benefit_base(&baseline().with_payment_rate(0.0), 0.05, 7).unwrap(), 0.0);

        let flat = ContractTerms {
            roll_up_rate: 0.0,
            ..baseline()
        };
        let b3 = benefit_base(&flat, 0.05, 3).unwrap();
        let b20 = benefit_base(&flat, 0.05, 20).unwrap();
        assert_eq!(b3, b20);
    }

    #[test]
    fn fee_examples() {
        let zero = baseline().with_fee_rate(0.0);
        for n in 1..=20 {
            assert_eq!(fee_amount(&zero, 0.05, n).unwrap(), 0.0);
        }
        let f1 = fee_amount(&baseline(), 0.05, 10).unwrap();
        assert!((f1 - 1140.23).abs() < 0.005, "{f1}");

        let f2_terms = ContractTerms {
            fee_structure: FeeStructure::F2,
            ..baseline()
        };
        let f2 = fee_amount(&f2_terms, 0.05, 10).unwrap();
        // 1140.23 * 0.065 * 13.0853
        assert!((f2 - 969.81).abs() < 0.01, "{f2}");
    }

    #[test]
    fn fee_year_out_of_range() {
        assert!(fee_amount(&baseline(), 0.05, 0).is_err());
        assert!(fee_amount(&baseline(), 0.05, 21).is_err());
    }

    #[test]
    fn validate_rejects_bad_terms() {
        assert!(baseline().validate().is_ok());
        let bad = ContractTerms {
            premium: 0.0,
            ..baseline()
        };
        assert!(bad.validate().is_err());
        let bad = ContractTerms {
            horizon: 0,
            ..baseline()
        };
        assert!(bad.validate().is_err());
        assert!(baseline().with_fee_rate(-0.01).validate().is_err());
        assert!(MarketModel { rate: 0.05, sigma: -0.1 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn due_is_immediate_times_one_plus_rate(rate in -0.9f64..3.0, n in 1u32..60) {
            let due = annuity_factor(rate, n, AnnuityTiming::Due).unwrap();
            let imm = annuity_factor(rate, n, AnnuityTiming::Immediate).unwrap();
            prop_assert!((due - (1.0 + rate) * imm).abs() <= 1e-12 * due.abs().max(1.0));
        }

        #[test]
        fn annuity_factor_decreasing_in_rate(rate in -0.9f64..2.0, bump in 1e-4f64..0.5, n in 2u32..40) {
            let a = annuity_factor(rate, n, AnnuityTiming::Due).unwrap();
            let b = annuity_factor(rate + bump, n, AnnuityTiming::Due).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn fee_ratio_constant(c in 0.001f64..0.02, g in 0.01f64..0.2, rg in 0.001f64..0.1) {
            let t1 = ContractTerms { fee_rate: c, payment_rate: g, roll_up_rate: rg, ..ContractTerms::default() };
            let t2 = ContractTerms { fee_structure: FeeStructure::F2, ..t1 };
            let a20 = annuity_factor(0.05, 20, AnnuityTiming::Due).unwrap();
            let mut prev = 0.0;
            for n in 1..=20 {
                let f1 = fee_amount(&t1, 0.05, n).unwrap();
                let f2 = fee_amount(&t2, 0.05, n).unwrap();
                prop_assert!(f1 > prev);
                prev = f1;
                prop_assert!((f2 / f1 - g * a20).abs() < 1e-12);
            }
        }

        #[test]
        fn benefit_base_monotone(t in 1u32..40, g in 0.01f64..0.2, rate in 0.0f64..0.2) {
            let terms = ContractTerms { payment_rate: g, ..ContractTerms::default() };
            let base = benefit_base(&terms, rate, t).unwrap();
            prop_assert!(benefit_base(&terms, rate, t + 1).unwrap() > base);
            prop_assert!(benefit_base(&terms.with_payment_rate(g * 1.01), rate, t).unwrap() > base);
            prop_assert!(benefit_base(&terms, rate + 0.01, t).unwrap() < base);
        }
    }
}
