//! Binary chromosome encoding of sinusoid parameters.
//!
//! Every real parameter is quantized onto `2^l` evenly spaced levels between
//! its bounds, `l` being the smallest width whose resolution meets the
//! requested step. Bits are stored most significant first. Per component the
//! fields are laid out as `a, f, phi, t_start, t_end`; layouts built for
//! known windows carry only `a, f, phi`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SinusoidalComponent;

/// Widest field supported; keeps every level exactly representable in `f64`.
pub const MAX_FIELD_BITS: usize = 52;

/// Bounds and requested resolution of one encoded parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub step: f64,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, lb: f64, ub: f64, step: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            lb,
            ub,
            step,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidSpec {
                name: self.name.clone(),
                reason,
            })
        };
        if !(self.lb.is_finite() && self.ub.is_finite() && self.step.is_finite()) {
            return fail("bounds and step must be finite".into());
        }
        if self.ub <= self.lb {
            return fail(format!(
                "upper bound {} must exceed lower bound {}",
                self.ub, self.lb
            ));
        }
        if self.step <= 0.0 {
            return fail(format!("step {} must be positive", self.step));
        }
        if self.step > self.range() {
            return fail(format!("step {} exceeds range {}", self.step, self.range()));
        }
        if self.range() / self.step > ((1u64 << MAX_FIELD_BITS) - 1) as f64 {
            return fail(format!("range/step needs more than {MAX_FIELD_BITS} bits"));
        }
        Ok(())
    }

    pub fn range(&self) -> f64 {
        self.ub - self.lb
    }

    /// Achieved resolution `(ub - lb) / (2^l - 1)`.
    pub fn quantization_step(&self) -> f64 {
        self.range() / max_level(bit_count(self)) as f64
    }
}

fn max_level(bits: usize) -> u64 {
    (1u64 << bits) - 1
}

/// Smallest width `b` such that `(2^b - 1) * step >= ub - lb`, i.e.
/// `floor(log2((ub - lb) / step)) + 1` away from the boundary cases where
/// floating-point `log2` would misplace the floor.
pub fn bit_count(spec: &ParameterSpec) -> usize {
    let range = spec.range();
    let mut bits = 1;
    while bits < MAX_FIELD_BITS && (max_level(bits) as f64) * spec.step < range {
        bits += 1;
    }
    bits
}

/// Decodes an MSB-first field onto `[lb, ub]`.
pub fn decode_field(bits: &[bool], spec: &ParameterSpec) -> Result<f64> {
    let width = bit_count(spec);
    if bits.len() != width {
        return Err(Error::LengthMismatch {
            expected: width,
            found: bits.len(),
        });
    }
    Ok(decode_level(bits_to_level(bits), width, spec))
}

fn bits_to_level(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |v, &b| (v << 1) | b as u64)
}

fn decode_level(v: u64, width: usize, spec: &ParameterSpec) -> f64 {
    let top = max_level(width);
    // pin the ends so the bounds are hit exactly despite rounding
    if v == 0 {
        spec.lb
    } else if v == top {
        spec.ub
    } else {
        spec.lb + spec.range() / top as f64 * v as f64
    }
}

/// Nearest level to `x` (ties away from zero), as MSB-first bits.
pub fn encode_field(x: f64, spec: &ParameterSpec) -> Result<Vec<bool>> {
    if !(spec.lb <= x && x <= spec.ub) {
        return Err(Error::ValueOutOfBounds {
            name: spec.name.clone(),
            value: x,
            lb: spec.lb,
            ub: spec.ub,
        });
    }
    let width = bit_count(spec);
    let top = max_level(width);
    let v = ((x - spec.lb) * top as f64 / spec.range())
        .round()
        .clamp(0.0, top as f64) as u64;
    Ok((0..width).rev().map(|k| (v >> k) & 1 == 1).collect())
}

/// Fixed-length bit string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome {
    bits: Vec<bool>,
}

impl Chromosome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Chromosome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidConfig(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Chromosome::new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Amplitude,
    Frequency,
    Phase,
    Start,
    End,
}

/// Parameter specs shared by every component of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpecs {
    pub amplitude: ParameterSpec,
    pub frequency: ParameterSpec,
    pub phase: ParameterSpec,
    pub t_start: ParameterSpec,
    pub t_end: ParameterSpec,
}

impl ComponentSpecs {
    /// Window fields over `[0, len - 1]` with unit step.
    pub fn with_windows(
        amplitude: ParameterSpec,
        frequency: ParameterSpec,
        phase: ParameterSpec,
        len: usize,
    ) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidConfig(format!(
                "window fields need a series of at least 2 samples, got {len}"
            )));
        }
        let last = (len - 1) as f64;
        Ok(Self {
            amplitude,
            frequency,
            phase,
            t_start: ParameterSpec::new("t_start", 0.0, last, 1.0)?,
            t_end: ParameterSpec::new("t_end", 0.0, last, 1.0)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.amplitude.validate()?;
        self.frequency.validate()?;
        self.phase.validate()?;
        self.t_start.validate()?;
        self.t_end.validate()?;
        for w in [&self.t_start, &self.t_end] {
            if w.lb < 0.0 {
                return Err(Error::InvalidSpec {
                    name: w.name.clone(),
                    reason: "window bounds must be non-negative sample indices".into(),
                });
            }
        }
        if self.amplitude.lb < 0.0 || self.frequency.lb < 0.0 {
            let name = if self.amplitude.lb < 0.0 {
                &self.amplitude.name
            } else {
                &self.frequency.name
            };
            return Err(Error::InvalidSpec {
                name: name.clone(),
                reason: "lower bound must be non-negative".into(),
            });
        }
        Ok(())
    }

    pub fn get(&self, kind: FieldKind) -> &ParameterSpec {
        match kind {
            FieldKind::Amplitude => &self.amplitude,
            FieldKind::Frequency => &self.frequency,
            FieldKind::Phase => &self.phase,
            FieldKind::Start => &self.t_start,
            FieldKind::End => &self.t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub component: usize,
    pub kind: FieldKind,
    pub spec: ParameterSpec,
    pub width: usize,
    pub offset: usize,
}

impl Field {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.width
    }

    /// Highest level, `2^width - 1`.
    pub fn max_level(&self) -> u64 {
        max_level(self.width)
    }

    pub fn level(&self, c: &Chromosome) -> u64 {
        bits_to_level(&c.bits[self.range()])
    }

    pub fn set_level(&self, c: &mut Chromosome, v: u64) {
        debug_assert!(v <= self.max_level());
        for (k, bit) in c.bits[self.range()].iter_mut().rev().enumerate() {
            *bit = (v >> k) & 1 == 1;
        }
    }

    pub fn value_at(&self, v: u64) -> f64 {
        decode_level(v, self.width, &self.spec)
    }

    /// Level closest to `x`, clamped into the field's bounds.
    pub fn nearest_level(&self, x: f64) -> u64 {
        let top = self.max_level() as f64;
        ((x - self.spec.lb) * top / self.spec.range())
            .round()
            .clamp(0.0, top) as u64
    }
}

const WINDOWED_GROUP: [FieldKind; 5] = [
    FieldKind::Amplitude,
    FieldKind::Frequency,
    FieldKind::Phase,
    FieldKind::Start,
    FieldKind::End,
];
const SHAPE_GROUP: [FieldKind; 3] = [FieldKind::Amplitude, FieldKind::Frequency, FieldKind::Phase];

/// Bit-field map of a chromosome describing `components` sinusoids.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromosomeLayout {
    fields: Vec<Field>,
    total_bits: usize,
    components: usize,
    fixed_windows: Option<Vec<(usize, usize)>>,
}

impl ChromosomeLayout {
    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn total_bits(&self) -> usize {
        self.total_bits
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Windows supplied at construction, for layouts that do not encode them.
    pub fn fixed_windows(&self) -> Option<&[(usize, usize)]> {
        self.fixed_windows.as_deref()
    }

    fn from_groups(specs: &ComponentSpecs, n: usize, group: &[FieldKind]) -> Result<Self> {
        specs.validate()?;
        let mut fields = Vec::with_capacity(n * group.len());
        let mut offset = 0;
        for component in 0..n {
            for &kind in group {
                let spec = specs.get(kind).clone();
                let width = bit_count(&spec);
                fields.push(Field {
                    component,
                    kind,
                    spec,
                    width,
                    offset,
                });
                offset += width;
            }
        }
        Ok(Self {
            fields,
            total_bits: offset,
            components: n,
            fixed_windows: None,
        })
    }
}

/// `n` repetitions of the `a, f, phi, t_start, t_end` field group.
pub fn build_layout(specs: &ComponentSpecs, n: usize) -> Result<ChromosomeLayout> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "a layout needs at least one component".into(),
        ));
    }
    ChromosomeLayout::from_groups(specs, n, &WINDOWED_GROUP)
}

/// Layout with one `a, f, phi` group per given window; windows are not encoded.
pub fn build_windowed_layout(
    specs: &ComponentSpecs,
    windows: &[(usize, usize)],
) -> Result<ChromosomeLayout> {
    if let Some(&(s, e)) = windows.iter().find(|(s, e)| s > e) {
        return Err(Error::InvalidComponent(format!(
            "window start {s} after end {e}"
        )));
    }
    let mut layout = ChromosomeLayout::from_groups(specs, windows.len(), &SHAPE_GROUP)?;
    layout.fixed_windows = Some(windows.to_vec());
    Ok(layout)
}

fn check_length(c: &Chromosome, layout: &ChromosomeLayout) -> Result<()> {
    if c.len() != layout.total_bits {
        return Err(Error::LengthMismatch {
            expected: layout.total_bits,
            found: c.len(),
        });
    }
    Ok(())
}

/// Decodes every component; inverted windows are swapped, phases normalized.
pub fn decode_components(
    c: &Chromosome,
    layout: &ChromosomeLayout,
) -> Result<Vec<SinusoidalComponent>> {
    check_length(c, layout)?;
    if layout.components == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(layout.components);
    let mut values = [0.0; 5];
    let group_len = layout.fields.len() / layout.components;
    for (component, group) in layout.fields.chunks(group_len).enumerate() {
        for field in group {
            let v = bits_to_level(&c.bits()[field.range()]);
            values[field.kind as usize] = decode_level(v, field.width, &field.spec);
        }
        let (s, e) = match &layout.fixed_windows {
            Some(w) => w[component],
            None => {
                let s = values[FieldKind::Start as usize].round() as usize;
                let e = values[FieldKind::End as usize].round() as usize;
                (s.min(e), s.max(e))
            }
        };
        out.push(SinusoidalComponent::new(
            values[FieldKind::Amplitude as usize],
            values[FieldKind::Frequency as usize],
            values[FieldKind::Phase as usize],
            s,
            e,
        )?);
    }
    Ok(out)
}

/// Inverse of [`decode_components`] up to quantization.
pub fn encode_components(
    components: &[SinusoidalComponent],
    layout: &ChromosomeLayout,
) -> Result<Chromosome> {
    if components.len() != layout.components {
        return Err(Error::LengthMismatch {
            expected: layout.components,
            found: components.len(),
        });
    }
    let mut bits = vec![false; layout.total_bits];
    for field in &layout.fields {
        let c = &components[field.component];
        let x = match field.kind {
            FieldKind::Amplitude => c.a(),
            FieldKind::Frequency => c.f(),
            FieldKind::Phase => c.phi(),
            FieldKind::Start => c.t_start() as f64,
            FieldKind::End => c.t_end() as f64,
        };
        bits[field.range()].copy_from_slice(&encode_field(x, &field.spec)?);
    }
    Ok(Chromosome::new(bits))
}
