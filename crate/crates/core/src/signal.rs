//! Windowed sinusoidal signal model.
//!
//! A signal is a superposition of sinusoids, each of which contributes only
//! between its own start and end sample. Time is `index * dt`; `t0` is an
//! offset used for display and file output only, so phases are relative to
//! the first sample of the grid.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling grid shared by a series and the models fitted to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSeries(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidSeries(format!("t0 must be finite, got {t0}")));
        }
        if len == 0 {
            return Err(Error::InvalidSeries("series must not be empty".into()));
        }
        Ok(Self { t0, dt, len })
    }

    /// Nyquist frequency `1 / (2 dt)`.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }
}

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: Grid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(t0, dt, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn t0(&self) -> f64 {
        self.grid.t0
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest absolute sample value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sum of absolute sample values.
    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

/// One windowed sinusoid `a * sin(2π f t + phi)` active on `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent", into = "RawComponent")]
pub struct SinusoidalComponent {
    a: f64,
    f: f64,
    phi: f64,
    t_start: usize,
    t_end: usize,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    a: f64,
    f: f64,
    phi: f64,
    t_start: usize,
    t_end: usize,
}

impl TryFrom<RawComponent> for SinusoidalComponent {
    type Error = Error;

    fn try_from(raw: RawComponent) -> Result<Self> {
        SinusoidalComponent::new(raw.a, raw.f, raw.phi, raw.t_start, raw.t_end)
    }
}

impl From<SinusoidalComponent> for RawComponent {
    fn from(c: SinusoidalComponent) -> Self {
        RawComponent {
            a: c.a,
            f: c.f,
            phi: c.phi,
            t_start: c.t_start,
            t_end: c.t_end,
        }
    }
}

/// Maps any finite angle into `[0, 2π)`.
pub fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}

impl SinusoidalComponent {
    pub fn new(a: f64, f: f64, phi: f64, t_start: usize, t_end: usize) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidComponent(format!(
                "amplitude must be >= 0, got {a}"
            )));
        }
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::InvalidComponent(format!(
                "frequency must be >= 0, got {f}"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidComponent(format!(
                "phase must be finite, got {phi}"
            )));
        }
        if t_start > t_end {
            return Err(Error::InvalidComponent(format!(
                "window start {t_start} after end {t_end}"
            )));
        }
        Ok(Self {
            a,
            f,
            phi: normalize_phase(phi),
            t_start,
            t_end,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn t_start(&self) -> usize {
        self.t_start
    }

    pub fn t_end(&self) -> usize {
        self.t_end
    }

    pub fn window(&self) -> (usize, usize) {
        (self.t_start, self.t_end)
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.t_start <= t && t <= self.t_end
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU * self.f
    }
}

/// Value of one component at sample `t`; exactly zero outside its window.
pub fn component_value(c: &SinusoidalComponent, t: usize, dt: f64) -> f64 {
    if c.is_active(t) {
        c.a * (TAU * c.f * (t as f64 * dt) + c.phi).sin()
    } else {
        0.0
    }
}

fn check_windows(components: &[SinusoidalComponent], len: usize) -> Result<()> {
    match components.iter().find(|c| c.t_end >= len) {
        Some(c) => Err(Error::WindowOutOfRange {
            t_start: c.t_start,
            t_end: c.t_end,
            len,
        }),
        None => Ok(()),
    }
}

/// Accumulates the model into `out`, component by component. Windows must
/// already be known to fit inside `out`.
pub(crate) fn accumulate_model(components: &[SinusoidalComponent], dt: f64, out: &mut [f64]) {
    for c in components {
        for (t, slot) in out.iter_mut().enumerate().take(c.t_end + 1).skip(c.t_start) {
            *slot += component_value(c, t, dt);
        }
    }
}

/// Sum of the components sampled on `grid`.
pub fn synthesize(components: &[SinusoidalComponent], grid: Grid) -> Result<TimeSeries> {
    check_windows(components, grid.len)?;
    let mut series = TimeSeries::zeros(grid);
    accumulate_model(components, grid.dt, &mut series.values);
    Ok(series)
}

fn check_grid(data: &TimeSeries, len: usize) -> Result<()> {
    if data.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            found: data.len(),
        });
    }
    Ok(())
}

/// `model - data`, sample by sample.
pub fn residual(components: &[SinusoidalComponent], data: &TimeSeries) -> Result<TimeSeries> {
    let model = synthesize(components, data.grid())?;
    difference(model, data)
}

/// `model - data` for an already synthesized model on the same grid length.
pub fn difference(mut model: TimeSeries, data: &TimeSeries) -> Result<TimeSeries> {
    check_grid(data, model.len())?;
    for (m, d) in model.values.iter_mut().zip(&data.values) {
        *m -= d;
    }
    Ok(model)
}

/// Residual norm minimized by the search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Sum of absolute residuals.
    #[default]
    L1,
    /// Sum of squared residuals.
    L2,
}

impl Norm {
    pub fn accumulate(self, residuals: impl Iterator<Item = f64>) -> f64 {
        match self {
            Norm::L1 => residuals.map(f64::abs).sum(),
            Norm::L2 => residuals.map(|r| r * r).sum(),
        }
    }
}

/// L1 mismatch between the model and the data. Zero iff every sample matches.
pub fn fitness(components: &[SinusoidalComponent], data: &TimeSeries) -> Result<f64> {
    fitness_with_norm(components, data, Norm::L1)
}

pub fn fitness_with_norm(
    components: &[SinusoidalComponent],
    data: &TimeSeries,
    norm: Norm,
) -> Result<f64> {
    check_windows(components, data.len())?;
    let mut scratch = vec![0.0; data.len()];
    Ok(fitness_unchecked(components, data, norm, &mut scratch))
}

/// Fitness without window validation; `scratch` must have the data length.
pub(crate) fn fitness_unchecked(
    components: &[SinusoidalComponent],
    data: &TimeSeries,
    norm: Norm,
    scratch: &mut [f64],
) -> f64 {
    scratch.fill(0.0);
    accumulate_model(components, data.dt(), scratch);
    norm.accumulate(scratch.iter().zip(&data.values).map(|(m, d)| m - d))
}

/// Per-sample `(amplitude, angular frequency)` pairs of the active components.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantaneousProfile {
    pairs: Vec<Vec<(f64, f64)>>,
}

impl InstantaneousProfile {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn at(&self, t: usize) -> &[(f64, f64)] {
        &self.pairs[t]
    }

    pub fn count_at(&self, t: usize) -> usize {
        self.pairs[t].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[(f64, f64)]> {
        self.pairs.iter().map(Vec::as_slice)
    }
}

pub fn instantaneous_profile(
    components: &[SinusoidalComponent],
    grid: Grid,
) -> Result<InstantaneousProfile> {
    check_windows(components, grid.len)?;
    let mut pairs = vec![Vec::new(); grid.len];
    for c in components {
        for slot in &mut pairs[c.t_start..=c.t_end] {
            slot.push((c.a, c.angular_frequency()));
        }
    }
    Ok(InstantaneousProfile { pairs })
}
