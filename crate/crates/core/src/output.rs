//! CSV emission: fixed number formatting, provenance header, atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::contract::{AnnuityTiming, FeeStructure};
use crate::rng::GENERATOR_VERSION;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats `x` with `digits` significant digits in plain decimal notation,
/// trailing zeros removed.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - magnitude;
    let text = if decimals >= 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}", (x / unit).round() * unit)
    };
    let text = if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    };
    if text == "-0" {
        "0".to_string()
    } else {
        text
    }
}

pub fn currency(x: f64) -> String {
    significant(x, 10)
}

pub fn rate(x: f64) -> String {
    significant(x, 6)
}

fn fee_name(f: FeeStructure) -> &'static str {
    match f {
        FeeStructure::F1 => "f1",
        FeeStructure::F2 => "f2",
    }
}

fn timing_name(t: AnnuityTiming) -> &'static str {
    match t {
        AnnuityTiming::Due => "due",
        AnnuityTiming::Immediate => "immediate",
    }
}

/// One `#`-prefixed line recording everything that determines the output.
/// The worker count is deliberately absent: it never changes results.
pub fn provenance(command: &str, config: &RunConfig) -> String {
    let t = &config.contract;
    let m = &config.market;
    format!(
        "# gmib-engine {ENGINE_VERSION} generator={GENERATOR_VERSION} command={command} seed={} n_paths={} antithetic={} premium={} horizon={} roll_up_rate={} payment_rate={} fee_rate={} fee_structure={} annuity_term={} annuity_timing={} rate={} sigma={} bb_rate_mode={} extension_fee={}",
        config.sim.seed,
        config.sim.n_paths,
        config.sim.antithetic,
        currency(t.premium),
        t.horizon,
        rate(t.roll_up_rate),
        rate(t.payment_rate),
        rate(t.fee_rate),
        fee_name(t.fee_structure),
        t.annuity_term,
        timing_name(t.annuity_timing),
        rate(m.rate),
        rate(m.sigma),
        match config.reset.bb_rate_mode {
            crate::reset::BbRateMode::AtExtensionRate => "extension",
            crate::reset::BbRateMode::AtContractRate => "contract",
        },
        if config.reset.charge_extension_fees { "on" } else { "off" },
    )
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub comment: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(comment: String, columns: &[&'static str]) -> Self {
        CsvTable {
            comment,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "{}", self.comment).expect("write to vec");
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).expect("write to vec");
            for row in &self.rows {
                w.write_record(row).expect("write to vec");
            }
            w.flush().expect("write to vec");
        }
        out
    }

    /// Writes via a temporary file renamed into place.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &self.render())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp: PathBuf = dir.join(format!(".{file_name}.tmp.{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Reads a CSV written by [`CsvTable`], skipping `#` comment lines.
pub fn read_table(path: &Path) -> std::io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(std::io::Error::other)?;
    let headers = reader
        .headers()
        .map_err(std::io::Error::other)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(std::io::Error::other)?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((headers, rows))
}
