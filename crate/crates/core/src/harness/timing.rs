use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::btf_protocol::{Phase, Role};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub phase: Phase,
    pub role: Role,
    pub label: String,
    pub seconds: f64,
}

/// Wall-clock time per operation. Reported, never compared against fixed
/// figures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub entries: Vec<TimingEntry>,
}

impl Timings {
    pub fn time<T>(&mut self, phase: Phase, role: Role, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.entries.push(TimingEntry {
            phase,
            role,
            label: label.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Seconds spent under `label` in the given phases.
    pub fn seconds(&self, label: &str, phases: &[Phase]) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.label == label && phases.contains(&e.phase))
            .map(|e| e.seconds)
            .sum()
    }

    pub fn phase_seconds(&self, phases: &[Phase]) -> f64 {
        self.entries.iter().filter(|e| phases.contains(&e.phase)).map(|e| e.seconds).sum()
    }

    /// Whether the operations in `labels` together take longer than
    /// everything else recorded in `phases`.
    pub fn dominates(&self, labels: &[&str], phases: &[Phase]) -> bool {
        let ours: f64 = labels.iter().map(|l| self.seconds(l, phases)).sum();
        ours > self.phase_seconds(phases) - ours
    }

    /// Distinct labels seen in `phase`, in first-seen order.
    pub fn labels(&self, phase: Phase) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in self.entries.iter().filter(|e| e.phase == phase) {
            if !out.contains(&e.label) {
                out.push(e.label.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance() {
        let mut t = Timings::default();
        t.entries.push(TimingEntry {
            phase: Phase::Rs,
            role: Role::Server,
            label: "big".into(),
            seconds: 3.0,
        });
        t.entries.push(TimingEntry {
            phase: Phase::Rs,
            role: Role::Client,
            label: "small".into(),
            seconds: 1.0,
        });
        assert!(t.dominates(&["big"], &[Phase::Rs]));
        assert!(!t.dominates(&["small"], &[Phase::Rs]));
        assert_eq!(t.labels(Phase::Rs), vec!["big", "small"]);
        let x = t.time(Phase::Vs, Role::Server, "op", || 5);
        assert_eq!(x, 5);
        assert_eq!(t.labels(Phase::Vs), vec!["op"]);
    }
}
