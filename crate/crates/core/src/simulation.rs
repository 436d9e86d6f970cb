//! Fee-deducted fund paths under risk-neutral GBM.
//!
//! Each year is one exact lognormal step followed by the annual fee. The
//! account is floored at zero and, once there, stays there.

use serde::{Deserialize, Serialize};

use crate::contract::{fee_table, ContractTerms, MarketModel};
use crate::error::{ensure, Error, Result};
use crate::exec;
use crate::rng::{NormalSource, PathStream};

pub const DEFAULT_PATHS: usize = 200_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimPlan {
    pub n_paths: usize,
    pub master_seed: u64,
    pub n_workers: usize,
    #[serde(default)]
    pub antithetic: bool,
}

impl Default for SimPlan {
    fn default() -> Self {
        SimPlan {
            n_paths: DEFAULT_PATHS,
            master_seed: DEFAULT_SEED,
            n_workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            antithetic: false,
        }
    }
}

impl SimPlan {
    pub fn new(n_paths: usize, master_seed: u64) -> Self {
        SimPlan {
            n_paths,
            master_seed,
            ..SimPlan::default()
        }
    }

    pub fn with_workers(self, n_workers: usize) -> Self {
        SimPlan { n_workers, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_paths >= 1, "n_paths", self.n_paths as f64, "must be >= 1")?;
        ensure(self.n_workers >= 1, "n_workers", self.n_workers as f64, "must be >= 1")
    }

    pub(crate) fn stream(&self, path_index: usize) -> PathStream {
        PathStream::for_path(self.master_seed, path_index, self.antithetic)
    }
}

/// Deferral of annuitization past the horizon at a new constant rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub extra_years: u32,
    pub rate: f64,
    pub charge_fees: bool,
}

impl Extension {
    pub fn one_year(rate: f64, charge_fees: bool) -> Self {
        Extension {
            extra_years: 1,
            rate,
            charge_fees,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountTrajectory {
    /// Entry `n - 1` is the account just after the year-`n` fee.
    pub post_fee_values: Vec<f64>,
    /// First year whose fee exhausted the account.
    pub floored_at: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSample {
    pub values: Vec<f64>,
    pub floored_paths: usize,
    pub plan: SimPlan,
    pub terms: ContractTerms,
    pub model: MarketModel,
    pub extension: Option<Extension>,
}

/// One exact year of GBM growth.
pub fn grow_one_year(value: f64, model: &MarketModel, z: f64) -> f64 {
    grow(value, model.rate - 0.5 * model.sigma * model.sigma, model.sigma, z)
}

#[inline]
fn grow(value: f64, drift: f64, sigma: f64, z: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value * (drift + sigma * z).exp()
    }
}

#[derive(Debug, Clone, Copy)]
struct YearStep {
    drift: f64,
    fee: f64,
}

/// Growth drift and fee for every simulated year.
#[derive(Debug, Clone)]
struct Schedule {
    premium: f64,
    sigma: f64,
    years: Vec<YearStep>,
}

impl Schedule {
    fn build(terms: &ContractTerms, model: &MarketModel, extension: Option<&Extension>) -> Result<Self> {
        terms.validate()?;
        model.validate()?;
        let extra = match extension {
            Some(ext) => {
                if ext.extra_years < 1 {
                    return Err(Error::Domain("extension needs at least one year".into()));
                }
                ensure(ext.rate.is_finite(), "extension rate", ext.rate, "must be finite")?;
                ext.extra_years
            }
            None => 0,
        };
        let total = terms.horizon + extra;
        let fees = fee_table(terms, model.rate, total)?;
        let sigma = model.sigma;
        let years = fees
            .into_iter()
            .enumerate()
            .map(|(i, fee)| {
                let n = i as u32 + 1;
                match extension {
                    Some(ext) if n > terms.horizon => YearStep {
                        drift: ext.rate - 0.5 * sigma * sigma,
                        fee: if ext.charge_fees { fee } else { 0.0 },
                    },
                    _ => YearStep {
                        drift: model.rate - 0.5 * sigma * sigma,
                        fee,
                    },
                }
            })
            .collect();
        Ok(Schedule {
            premium: terms.premium,
            sigma,
            years,
        })
    }

    fn step(&self, value: f64, year: &YearStep, z: f64) -> f64 {
        (grow(value, year.drift, self.sigma, z) - year.fee).max(0.0)
    }

    fn run(&self, source: &mut impl NormalSource, mut record: impl FnMut(f64)) -> Option<u32> {
        let mut value = self.premium;
        let mut floored_at = None;
        for (i, year) in self.years.iter().enumerate() {
            let z = source.next_normal();
            value = self.step(value, year, z);
            if value == 0.0 && floored_at.is_none() {
                floored_at = Some(i as u32 + 1);
            }
            record(value);
        }
        floored_at
    }

    fn terminal(&self, source: &mut impl NormalSource) -> (f64, bool) {
        let mut last = self.premium;
        let floored = self.run(source, |v| last = v).is_some();
        (last, floored)
    }
}

/// Simulates one fee-deducted trajectory over the contract horizon.
pub fn simulate_path(
    terms: &ContractTerms,
    model: &MarketModel,
    stream: &mut impl NormalSource,
) -> Result<AccountTrajectory> {
    let schedule = Schedule::build(terms, model, None)?;
    let mut post_fee_values = Vec::with_capacity(schedule.years.len());
    let floored_at = schedule.run(stream, |v| post_fee_values.push(v));
    Ok(AccountTrajectory {
        post_fee_values,
        floored_at,
    })
}

/// Trajectories for paths `0..plan.n_paths`, for display output.
pub fn simulate_trajectories(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
) -> Result<Vec<AccountTrajectory>> {
    plan.validate()?;
    let schedule = Schedule::build(terms, model, None)?;
    let trajectories = exec::install(plan.n_workers, || {
        use rayon::prelude::*;
        (0..plan.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut values = Vec::with_capacity(schedule.years.len());
                let floored_at = schedule.run(&mut plan.stream(i), |v| values.push(v));
                AccountTrajectory {
                    post_fee_values: values,
                    floored_at,
                }
            })
            .collect()
    });
    Ok(trajectories)
}

/// Terminal account values `S_f(T)` (or `S_f(T + extra_years)`) for every path.
pub fn simulate_terminal(
    terms: &ContractTerms,
    model: &MarketModel,
    plan: &SimPlan,
    extension: Option<&Extension>,
) -> Result<TerminalSample> {
    plan.validate()?;
    let schedule = Schedule::build(terms, model, extension)?;
    let mut values = exec::try_alloc(plan.n_paths)?;
    let floored_paths = exec::fill_indexed(plan.n_workers, &mut values, |i| {
        schedule.terminal(&mut plan.stream(i))
    });
    Ok(TerminalSample {
        values,
        floored_paths,
        plan: *plan,
        terms: *terms,
        model: *model,
        extension: extension.copied(),
    })
}

/// Exact mean of the unfloored terminal account.
///
/// Fees are deterministic, so by linearity
/// `E[S_f(T)] = S0 e^{rT} - sum_n f(n) e^{r (T - n)}`; each deferral year
/// multiplies by `e^{rate}` and subtracts its own fee.
pub fn expected_terminal_mean(
    terms: &ContractTerms,
    model: &MarketModel,
    extension: Option<&Extension>,
) -> Result<f64> {
    terms.validate()?;
    model.validate()?;
    let horizon = terms.horizon;
    let fees = fee_table(terms, model.rate, horizon)?;
    let r = model.rate;
    let mut mean = terms.premium * (r * horizon as f64).exp()
        - fees
            .iter()
            .enumerate()
            .map(|(i, f)| f * (r * (horizon - (i as u32 + 1)) as f64).exp())
            .sum::<f64>();
    if let Some(ext) = extension {
        let extra = fee_table(terms, model.rate, horizon + ext.extra_years)?;
        for fee in &extra[horizon as usize..] {
            mean = mean * ext.rate.exp() - if ext.charge_fees { *fee } else { 0.0 };
        }
    }
    Ok(mean)
}

/// Terminal accounts at the horizon plus the draw reserved for one
/// deferral year, so the deferral can be replayed at any rate without
/// re-simulating the first `T` years.
#[derive(Debug, Clone)]
pub struct DeferralSample {
    pub terminal: TerminalSample,
    extension_draws: Vec<f64>,
    extension_fee: f64,
}

impl DeferralSample {
    pub fn simulate(terms: &ContractTerms, model: &MarketModel, plan: &SimPlan) -> Result<Self> {
        plan.validate()?;
        let schedule = Schedule::build(terms, model, None)?;
        let extension_fee = fee_table(terms, model.rate, terms.horizon + 1)?[terms.horizon as usize];
        let mut values = exec::try_alloc(plan.n_paths)?;
        let mut extension_draws = exec::try_alloc(plan.n_paths)?;
        let floored_paths = exec::fill_indexed(plan.n_workers, &mut values, |i| {
            schedule.terminal(&mut plan.stream(i))
        });
        exec::fill_indexed(plan.n_workers, &mut extension_draws, |i| {
            let mut stream = plan.stream(i);
            for _ in 0..schedule.years.len() {
                stream.next_normal();
            }
            (stream.next_normal(), false)
        });
        Ok(DeferralSample {
            terminal: TerminalSample {
                values,
                floored_paths,
                plan: *plan,
                terms: *terms,
                model: *model,
                extension: None,
            },
            extension_draws,
            extension_fee,
        })
    }

    /// Accounts after one deferral year at `rate`; bit-identical to
    /// [`simulate_terminal`] with [`Extension::one_year`].
    pub fn extend(&self, rate: f64, charge_fees: bool) -> Result<TerminalSample> {
        ensure(rate.is_finite(), "extension rate", rate, "must be finite")?;
        let sigma = self.terminal.model.sigma;
        let year = YearStep {
            drift: rate - 0.5 * sigma * sigma,
            fee: if charge_fees { self.extension_fee } else { 0.0 },
        };
        let plan = self.terminal.plan;
        let mut values = exec::try_alloc(plan.n_paths)?;
        let base = &self.terminal.values;
        let draws = &self.extension_draws;
        let floored_paths = exec::fill_indexed(plan.n_workers, &mut values, |i| {
            let before = base[i];
            let after = (grow(before, year.drift, sigma, draws[i]) - year.fee).max(0.0);
            (after, before == 0.0 || after == 0.0)
        });
        Ok(TerminalSample {
            values,
            floored_paths,
            plan,
            terms: self.terminal.terms,
            model: self.terminal.model,
            extension: Some(Extension::one_year(rate, charge_fees)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::FeeStructure;
    use crate::rng::FixedDraws;

    fn baseline() -> (ContractTerms, MarketModel) {
        (ContractTerms::default(), MarketModel::default())
    }

    #[test]
    fn grow_one_year_examples() {
        let flat = MarketModel { rate: 0.05, sigma: 0.0 };
        assert!((grow_one_year(100_000.0, &flat, 1.3) - 105_127.11).abs() < 0.005);
        let g = grow_one_year(100_000.0, &MarketModel::default(), 0.0);
        assert!((g - 104_602.79).abs() < 0.005, "{g}");
        assert_eq!(grow_one_year(0.0, &MarketModel::default(), 2.0), 0.0);
    }

    #[test]
    fn path_without_fees_or_volatility_is_exponential() {
        let (terms, _) = baseline();
        let terms = terms.with_fee_rate(0.0);
        let model = MarketModel { rate: 0.05, sigma: 0.0 };
        let mut source = PathStream::for_path(1, 0, false);
        let path = simulate_path(&terms, &model, &mut source).unwrap();
        assert_eq!(path.post_fee_values.len(), 20);
        for (i, v) in path.post_fee_values.iter().enumerate() {
            let expected = 100_000.0 * (0.05 * (i + 1) as f64).exp();
            assert!((v - expected).abs() < 1e-6 * expected);
        }
        assert_eq!(path.floored_at, None);
    }

    #[test]
    fn first_year_after_fee() {
        let (terms, _) = baseline();
        let model = MarketModel { rate: 0.05, sigma: 0.0 };
        let path = simulate_path(&terms, &model, &mut FixedDraws::new(&[])).unwrap();
        assert!((path.post_fee_values[0] - 104_392.11).abs() < 0.005);
    }

    #[test]
    fn large_fee_floors_permanently() {
        let (terms, model) = baseline();
        let terms = terms.with_fee_rate(0.3);
        let path = simulate_path(&terms, &model, &mut FixedDraws::new(&[-1.0; 20])).unwrap();
        let year = path.floored_at.expect("floored") as usize;
        assert!(path.post_fee_values[year - 1..].iter().all(|&v| v == 0.0));
        assert!(path.post_fee_values[..year - 1].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn terminal_single_path_deterministic() {
        let (terms, _) = baseline();
        let terms = terms.with_fee_rate(0.0);
        let model = MarketModel { rate: 0.05, sigma: 0.0 };
        let s = simulate_terminal(&terms, &model, &SimPlan::new(1, 9), None).unwrap();
        assert_eq!(s.values.len(), 1);
        assert!((s.values[0] - 100_000.0 * 1f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn terminal_matches_path_by_path() {
        let (terms, model) = baseline();
        let plan = SimPlan::new(50, 3).with_workers(2);
        let sample = simulate_terminal(&terms, &model, &plan, None).unwrap();
        for i in [0usize, 17, 49] {
            let path = simulate_path(&terms, &model, &mut plan.stream(i)).unwrap();
            assert_eq!(path.post_fee_values[19], sample.values[i]);
        }
    }

    #[test]
    fn deferral_extend_equals_direct_extension() {
        let (terms, model) = baseline();
        let plan = SimPlan::new(3000, 5).with_workers(3);
        let deferral = DeferralSample::simulate(&terms, &model, &plan).unwrap();
        for &(rate, fee) in &[(0.0, true), (0.043, true), (0.08, false)] {
            let direct = simulate_terminal(&terms, &model, &plan, Some(&Extension::one_year(rate, fee))).unwrap();
            let replay = deferral.extend(rate, fee).unwrap();
            assert_eq!(direct.values, replay.values);
        }
    }

    #[test]
    fn expected_mean_examples() {
        let (terms, model) = baseline();
        let no_fee = expected_terminal_mean(&terms.with_fee_rate(0.0), &model, None).unwrap();
        assert!((no_fee - 271_828.18).abs() < 0.005);

        // direct 20-term oracle
        let oracle: f64 = 100_000.0 * 1f64.exp()
            - (1..=20)
                .map(|n| 700.0 * 1.05f64.powi(n) * (0.05 * (20 - n) as f64).exp())
                .sum::<f64>();
        let with_fee = expected_terminal_mean(&terms, &model, None).unwrap();
        assert!((with_fee - oracle).abs() < 1e-6);

        let other_sigma = MarketModel { sigma: 0.3, ..model };
        assert_eq!(with_fee, expected_terminal_mean(&terms, &other_sigma, None).unwrap());
    }

    #[test]
    fn expected_mean_extension() {
        let (terms, model) = baseline();
        let base = expected_terminal_mean(&terms, &model, None).unwrap();
        let ext = Extension::one_year(0.04, true);
        let got = expected_terminal_mean(&terms, &model, Some(&ext)).unwrap();
        let fee21 = 700.0 * 1.05f64.powi(21);
        assert!((got - (base * 0.04f64.exp() - fee21)).abs() < 1e-6);
        let no_fee = Extension::one_year(0.04, false);
        let got = expected_terminal_mean(&terms, &model, Some(&no_fee)).unwrap();
        assert!((got - base * 0.04f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_sigma_sample_collapses() {
        let (terms, _) = baseline();
        let model = MarketModel { rate: 0.05, sigma: 0.0 };
        let s = simulate_terminal(&terms, &model, &SimPlan::new(100, 1), None).unwrap();
        let first = s.values[0];
        assert!(s.values.iter().all(|&v| v == first));
        let path = simulate_path(&terms, &model, &mut FixedDraws::new(&[])).unwrap();
        assert_eq!(path.post_fee_values[19], first);
    }

    #[test]
    fn f2_fees_use_payment_rate() {
        let (terms, model) = baseline();
        let f2 = ContractTerms {
            fee_structure: FeeStructure::F2,
            ..terms
        };
        let plan = SimPlan::new(200, 1);
        let lo = simulate_terminal(&f2.with_payment_rate(0.05), &model, &plan, None).unwrap();
        let hi = simulate_terminal(&f2.with_payment_rate(0.10), &model, &plan, None).unwrap();
        assert!(lo.values.iter().zip(&hi.values).all(|(a, b)| a >= b));
    }

    #[test]
    fn rejects_bad_plan() {
        let (terms, model) = baseline();
        assert!(simulate_terminal(&terms, &model, &SimPlan::new(0, 1), None).is_err());
        let bad_ext = Extension {
            extra_years: 0,
            rate: 0.05,
            charge_fees: true,
        };
        assert!(simulate_terminal(&terms, &model, &SimPlan::new(1, 1), Some(&bad_ext)).is_err());
    }
}
