//! Deterministic refinement of a decoded sinusoid set in level space.
//!
//! Moves shift one field by `±2^j` levels. Frequency moves also come in a
//! phase-compensated form that keeps the phase at the window centre fixed,
//! since phases are measured from the start of the grid and a lone frequency
//! step rotates the whole window. First improvement is accepted; passes repeat
//! until none improves or the evaluation budget is spent.

use std::f64::consts::TAU;

use crate::encoding::{Chromosome, Field, FieldKind};
use crate::ga::{ComponentObjective, Individual, Objective};
use crate::signal::normalize_phase;

struct Group<'a> {
    fields: Vec<&'a Field>,
    frequency: Option<&'a Field>,
    phase: Option<&'a Field>,
    window: Option<(usize, usize)>,
}

fn groups<'a>(objective: &'a ComponentObjective<'_>) -> Vec<Group<'a>> {
    let layout = objective.layout();
    let mut groups: Vec<Group<'a>> = (0..layout.components())
        .map(|k| Group {
            fields: Vec::new(),
            frequency: None,
            phase: None,
            window: layout.fixed_windows().map(|w| w[k]),
        })
        .collect();
    for field in layout.fields() {
        let g = &mut groups[field.component];
        g.fields.push(field);
        match field.kind {
            FieldKind::Frequency => g.frequency = Some(field),
            FieldKind::Phase => g.phase = Some(field),
            _ => {}
        }
    }
    groups
}

fn shifted(v: u64, delta: i64, top: u64) -> Option<u64> {
    let next = v as i64 + delta;
    (0..=top as i64).contains(&next).then_some(next as u64)
}

struct Search<'o, 'd> {
    objective: &'o ComponentObjective<'d>,
    best: Individual,
    evaluations: usize,
    budget: usize,
}

impl Search<'_, '_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    fn try_candidate(&mut self, candidate: Chromosome) -> bool {
        if candidate == self.best.chromosome {
            return false;
        }
        self.evaluations += 1;
        let fitness = self.objective.evaluate(&candidate);
        if fitness < self.best.fitness {
            self.best = Individual {
                chromosome: candidate,
                fitness,
            };
            true
        } else {
            false
        }
    }

    fn single_field(&mut self, field: &Field) -> bool {
        let mut improved = false;
        let top = field.max_level();
        let mut step = 1i64;
        while step as u64 <= top && !self.exhausted() {
            for delta in [step, -step] {
                let v = field.level(&self.best.chromosome);
                if let Some(next) = shifted(v, delta, top) {
                    let mut c = self.best.chromosome.clone();
                    field.set_level(&mut c, next);
                    improved |= self.try_candidate(c);
                }
            }
            step *= 2;
        }
        improved
    }

    fn compensated_frequency(&mut self, group: &Group<'_>, dt: f64) -> bool {
        let (Some(freq), Some(phase)) = (group.frequency, group.phase) else {
            return false;
        };
        let mut improved = false;
        let top = freq.max_level();
        let mut step = 1i64;
        while step as u64 <= top && !self.exhausted() {
            for delta in [step, -step] {
                let c = &self.best.chromosome;
                let v = freq.level(c);
                let Some(next) = shifted(v, delta, top) else {
                    continue;
                };
                let centre = match group.window {
                    Some((s, e)) => (s + e) as f64 / 2.0,
                    None => {
                        let decoded = self.objective.decode(c);
                        let (s, e) = decoded[freq.component].window();
                        (s + e) as f64 / 2.0
                    }
                };
                let df = freq.value_at(next) - freq.value_at(v);
                let phi = phase.value_at(phase.level(c)) - TAU * df * centre * dt;
                let mut candidate = c.clone();
                freq.set_level(&mut candidate, next);
                phase.set_level(&mut candidate, phase.nearest_level(normalize_phase(phi)));
                improved |= self.try_candidate(candidate);
            }
            step *= 2;
        }
        improved
    }
}

/// Coordinate descent from `start`; returns the result only if it is strictly
/// better.
pub fn refine_components(
    objective: &ComponentObjective<'_>,
    start: &Individual,
    budget: usize,
) -> Option<Individual> {
    let dt = objective.data().dt();
    let groups = groups(objective);
    let mut search = Search {
        objective,
        best: start.clone(),
        evaluations: 0,
        budget,
    };
    loop {
        let mut improved = false;
        for group in &groups {
            for field in &group.fields {
                improved |= search.single_field(field);
            }
            improved |= search.compensated_frequency(group, dt);
        }
        if !improved || search.exhausted() {
            break;
        }
    }
    (search.best.fitness < start.fitness).then_some(search.best)
}
