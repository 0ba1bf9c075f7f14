//! File formats and synthetic data.
//!
//! Series come in as CSV, either `t,value` rows on a uniform grid or a single
//! value column with the step given separately. Results go out as JSON, and
//! convergence traces and instantaneous profiles as CSV. Numbers are written
//! in shortest round-trip form, so anything written reads back bit for bit.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::decomposition::{AdaptiveConfig, DecompositionResult};
use crate::encoding::{build_layout, decode_components, ComponentSpecs, ParameterSpec};
use crate::error::{Error, Result};
use crate::ga::{random_chromosome, ConvergenceTrace, GaConfig, GaRng};
use crate::signal::{
    synthesize, Grid, InstantaneousProfile, Norm, SinusoidalComponent, TimeSeries,
};

/// Relative tolerance on the spacing of time stamps.
pub const SPACING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesFormat {
    /// `t,value` rows; the grid is read from the time column.
    TwoColumn,
    /// One value per row on a grid starting at `t0` with step `dt`.
    SingleColumn { t0: f64, dt: f64 },
}

impl SeriesFormat {
    fn columns(self) -> usize {
        match self {
            SeriesFormat::TwoColumn => 2,
            SeriesFormat::SingleColumn { .. } => 1,
        }
    }
}

pub fn load_series(path: &Path, format: SeriesFormat) -> Result<TimeSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, format, &path.display().to_string())
}

/// Parses a series; `source` names the input in errors. A first row with no
/// numeric cell is taken as a header.
pub fn read_series<R: Read>(reader: R, format: SeriesFormat, source: &str) -> Result<TimeSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let expected = format.columns();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse().ok()).collect();
        if rows.is_empty() && i == 0 && parsed.iter().all(Option::is_none) {
            continue;
        }
        if record.len() != expected {
            return Err(Error::ColumnCount {
                row: line,
                expected,
                found: record.len(),
            });
        }
        let mut cells = Vec::with_capacity(expected);
        for (column, value) in parsed.into_iter().enumerate() {
            match value {
                Some(v) if v.is_finite() => cells.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row: line,
                        column: column + 1,
                        cell: record[column].to_string(),
                    })
                }
            }
        }
        rows.push((line, cells));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput {
            path: source.to_string(),
        });
    }
    match format {
        SeriesFormat::SingleColumn { t0, dt } => {
            TimeSeries::new(t0, dt, rows.into_iter().map(|(_, r)| r[0]).collect())
        }
        SeriesFormat::TwoColumn => uniform_series(&rows),
    }
}

fn uniform_series(rows: &[(usize, Vec<f64>)]) -> Result<TimeSeries> {
    if rows.len() < 2 {
        return Err(Error::InvalidSeries(
            "a time column needs at least two rows to define the step".into(),
        ));
    }
    let t = |i: usize| rows[i].1[0];
    let first = t(1) - t(0);
    if first.is_nan() || first <= 0.0 {
        return Err(Error::NonUniformGrid {
            row: rows[1].0,
            expected: f64::NAN,
            found: first,
        });
    }
    for (i, (line, _)) in rows.iter().enumerate().skip(2) {
        let step = t(i) - t(i - 1);
        if (step - first).abs() > SPACING_TOLERANCE * first {
            return Err(Error::NonUniformGrid {
                row: *line,
                expected: first,
                found: step,
            });
        }
    }
    let dt = (t(rows.len() - 1) - t(0)) / (rows.len() - 1) as f64;
    TimeSeries::new(t(0), dt, rows.iter().map(|(_, r)| r[1]).collect())
}

pub fn write_series(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "value"])?;
    let grid = series.grid();
    for (i, v) in series.values().iter().enumerate() {
        w.write_record([grid.time_at(i).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Overrides for the data-driven parameter bounds. Unset values default to
/// `a` in `[0, 2 max|R|]`, `f` in `[0, Nyquist]`, each with 1024 steps, and
/// `phi` in `[0, 2π)` with 256 steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub a_max: Option<f64>,
    pub a_step: Option<f64>,
    pub f_max: Option<f64>,
    pub f_step: Option<f64>,
    pub phi_step: Option<f64>,
}

impl Bounds {
    /// Specs for a grid whose data peaks at `max_abs` (1 is used for all-zero data).
    pub fn specs(&self, grid: Grid, max_abs: f64) -> Result<ComponentSpecs> {
        let scale = if max_abs > 0.0 { max_abs } else { 1.0 };
        let a_max = self.a_max.unwrap_or(2.0 * scale);
        let f_max = self.f_max.unwrap_or(grid.nyquist());
        let phi_step = self.phi_step.unwrap_or(TAU / 256.0);
        if !(phi_step > 0.0 && phi_step < TAU) {
            return Err(Error::InvalidSpec {
                name: "phi".into(),
                reason: format!("step {phi_step} must lie in (0, 2π)"),
            });
        }
        ComponentSpecs::with_windows(
            ParameterSpec::new("a", 0.0, a_max, self.a_step.unwrap_or(a_max / 1024.0))?,
            ParameterSpec::new("f", 0.0, f_max, self.f_step.unwrap_or(f_max / 1024.0))?,
            ParameterSpec::new("phi", 0.0, TAU - phi_step, phi_step)?,
            grid.len,
        )
    }

    pub fn specs_for(&self, series: &TimeSeries) -> Result<ComponentSpecs> {
        self.specs(series.grid(), series.max_abs())
    }
}

/// Random components lying exactly on the encoding grid of `specs`.
pub fn random_components(
    n: usize,
    specs: &ComponentSpecs,
    seed: u64,
) -> Result<Vec<SinusoidalComponent>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let layout = build_layout(specs, n)?;
    let mut rng = GaRng::seed_from_u64(seed);
    rng.set_stream(1);
    decode_components(&random_chromosome(layout.total_bits(), &mut rng), &layout)
}

/// Synthesizes `components` and adds uniform noise in `[-noise, noise]`.
pub fn generate_synthetic(
    components: &[SinusoidalComponent],
    grid: Grid,
    noise: f64,
    seed: u64,
) -> Result<TimeSeries> {
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise amplitude must be >= 0, got {noise}"
        )));
    }
    let clean = synthesize(components, grid)?;
    if noise == 0.0 {
        return Ok(clean);
    }
    let mut rng = GaRng::seed_from_u64(seed);
    let values = clean
        .into_values()
        .into_iter()
        .map(|v| v + rng.random_range(-noise..=noise))
        .collect();
    TimeSeries::new(grid.t0, grid.dt, values)
}

/// Components and settings behind a synthetic series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub grid: Grid,
    pub noise: f64,
    pub seed: u64,
    pub components: Vec<SinusoidalComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Fixed,
    Adaptive,
}

/// Everything that determines a decomposition besides the data itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: String,
    pub grid: Grid,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    pub norm: Norm,
    pub specs: ComponentSpecs,
    pub ga: GaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub components: Vec<SinusoidalComponent>,
    pub final_fitness: f64,
    pub seed: u64,
    pub profile: Vec<usize>,
    pub config: RunConfig,
}

impl ResultDocument {
    pub fn new(result: &DecompositionResult, config: RunConfig) -> Self {
        Self {
            components: result.components.clone(),
            final_fitness: result.final_fitness,
            seed: config.ga.seed,
            profile: result.profile.counts().to_vec(),
            config,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Trace CSV: `generation,best_fitness`, then `a_n,f_n,phi_n,tstart_n,tend_n`
/// for every component `n`, one row per generation.
pub fn write_trace<W: Write>(trace: &ConvergenceTrace, out: W) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::InvalidConfig("cannot export an empty trace".into()));
    }
    let n = trace.components();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["generation".to_string(), "best_fitness".to_string()];
    for k in 1..=n {
        for name in ["a", "f", "phi", "tstart", "tend"] {
            header.push(format!("{name}_{k}"));
        }
    }
    w.write_record(&header)?;
    for entry in &trace.entries {
        let mut row = vec![entry.generation.to_string(), entry.best_fitness.to_string()];
        for c in &entry.components {
            row.extend([
                c.a().to_string(),
                c.f().to_string(),
                c.phi().to_string(),
                c.t_start().to_string(),
                c.t_end().to_string(),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn emit_trace(trace: &ConvergenceTrace, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(trace, BufWriter::new(file))
}

/// Profile CSV: `index,t,count`, then `a_k,omega_k` for each active component
/// at that sample, padded with empty cells to the widest row.
pub fn write_profile<W: Write>(profile: &InstantaneousProfile, grid: Grid, out: W) -> Result<()> {
    let width = profile.iter().map(<[_]>::len).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "t".to_string(), "count".to_string()];
    for k in 1..=width {
        header.push(format!("a_{k}"));
        header.push(format!("omega_{k}"));
    }
    w.write_record(&header)?;
    for (i, pairs) in profile.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            grid.time_at(i).to_string(),
            pairs.len().to_string(),
        ];
        for &(a, omega) in pairs {
            row.push(a.to_string());
            row.push(omega.to_string());
        }
        row.resize(header.len(), String::new());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
