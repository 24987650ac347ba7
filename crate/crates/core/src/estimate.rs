//! Result types shared by the three estimators.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use crate::model::Vec2;

/// Wall-clock duration of each named processing stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    stages: Vec<(&'static str, Duration)>,
}

impl Timings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `f`, recording its duration under `stage`.
    pub fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((stage, start.elapsed()));
        out
    }

    pub fn push(&mut self, stage: &'static str, elapsed: Duration) {
        self.stages.push((stage, elapsed));
    }

    pub fn extend(&mut self, other: Timings) {
        self.stages.extend(other.stages);
    }

    pub fn get(&self, stage: &str) -> Option<Duration> {
        self.stages
            .iter()
            .filter(|(s, _)| *s == stage)
            .map(|(_, d)| *d)
            .reduce(|a, b| a + b)
    }

    pub fn total(&self) -> Duration {
        self.stages.iter().map(|(_, d)| *d).sum()
    }

    pub fn stages(&self) -> &[(&'static str, Duration)] {
        &self.stages
    }
}

/// A location/velocity estimate with the bins it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub position: Vec2,
    pub velocity: Vec2,
    pub location_index: usize,
    pub velocity_index: usize,
    /// Decision value (direct, hopping) or squared range residual (indirect) at the chosen bin.
    pub score: f64,
    pub timings: Timings,
}

/// A bin chosen by a grid scan with the scan's objective there (a decision
/// value for maximizing scans, a squared residual for minimizing ones).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFix {
    pub index: usize,
    pub point: Vec2,
    pub value: f64,
}

/// Index of the largest value, ties resolved to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Greater) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the smallest value, ties resolved to the smallest index.
pub(crate) fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v.partial_cmp(&b) != Some(Ordering::Less) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_the_first_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmin(&[4.0, 1.0, 1.0]), Some(1));
        assert_eq!(argmax(&[]), None);
        assert_eq!(argmax(&[2.0, 2.0]), Some(0));
    }

    #[test]
    fn stage_lookup() {
        let mut t = Timings::new();
        t.push("fft", Duration::from_nanos(10));
        t.push("scan", Duration::from_nanos(5));
        t.push("fft", Duration::from_nanos(1));
        assert_eq!(t.get("fft"), Some(Duration::from_nanos(11)));
        assert_eq!(t.total(), Duration::from_nanos(16));
        assert_eq!(t.get("nope"), None);
    }
}
