use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::control::ControllerStatus;
use crate::perception::DetectionMetrics;
use crate::planning::{Controller, PickState};
use crate::world::{GripperKind, Motion, OutcomeCategory, PickOutcome};

/// One attempted target, from selection to release or abort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickEvent {
    pub target_id: u64,
    /// Ground-truth fruit nearest the tracked target, if any.
    pub fruit_id: Option<u32>,
    pub attempt_index: u32,
    pub controller_trace: Vec<(Controller, ControllerStatus)>,
    pub outcome: Option<PickOutcome>,
    pub position_error: Option<f64>,
    pub wall_steps: u64,
    pub states: Vec<PickState>,
}

impl PickEvent {
    pub fn terminal_state(&self) -> Option<PickState> {
        self.states.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub category: OutcomeCategory,
    pub count: u64,
    /// Share of picks with an outcome, percent.
    pub percent: Option<f64>,
    /// Binomial standard error of `percent`, percentage points.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub gripper: GripperKind,
    pub motion: Motion,
    pub runs: u32,
    pub attempts: u64,
    pub picks_with_outcome: u64,
    pub categories: Vec<CategoryStat>,
    /// Successes over picks with an outcome; absent when there are none.
    pub success_rate: Option<f64>,
    pub detector: String,
    pub detection: DetectionMetrics,
    pub tracks_created: u64,
    pub tracks_pruned: u64,
    pub fruit_total: u64,
    pub fruit_harvested: u64,
    pub ticks: u64,
    pub mean_ticks_per_attempt: Option<f64>,
}

/// Run-level totals that do not come from pick events.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTotals {
    pub detection: DetectionMetrics,
    pub tracks_created: u64,
    pub tracks_pruned: u64,
    pub fruit_total: u64,
    pub ticks: u64,
}

impl RunTotals {
    pub fn merge(&mut self, other: &RunTotals) {
        self.detection.merge(&other.detection);
        self.tracks_created += other.tracks_created;
        self.tracks_pruned += other.tracks_pruned;
        self.fruit_total += other.fruit_total;
        self.ticks += other.ticks;
    }
}

impl MetricsReport {
    /// Folds pick events into the report; percentages and errors follow
    /// from the counts alone.
    pub fn from_picks(gripper: GripperKind, motion: Motion, detector: &str, runs: u32, picks: &[PickEvent], totals: &RunTotals) -> Self {
        let mut counts = [0u64; 6];
        for p in picks {
            if let Some(o) = p.outcome {
                counts[o.category.index()] += 1;
            }
        }
        let n: u64 = counts.iter().sum();
        let categories = OutcomeCategory::ALL
            .iter()
            .map(|&c| {
                let k = counts[c.index()];
                let p = (n > 0).then(|| k as f64 / n as f64);
                CategoryStat {
                    category: c,
                    count: k,
                    percent: p.map(|p| 100.0 * p),
                    std_error: p.map(|p| 100.0 * (p * (1.0 - p) / n as f64).sqrt()),
                }
            })
            .collect();
        let steps: u64 = picks.iter().map(|p| p.wall_steps).sum();
        MetricsReport {
            gripper,
            motion,
            runs,
            attempts: picks.len() as u64,
            picks_with_outcome: n,
            categories,
            success_rate: (n > 0).then(|| counts[OutcomeCategory::Success.index()] as f64 / n as f64),
            detector: detector.to_string(),
            detection: totals.detection,
            tracks_created: totals.tracks_created,
            tracks_pruned: totals.tracks_pruned,
            fruit_total: totals.fruit_total,
            fruit_harvested: counts[OutcomeCategory::Success.index()],
            ticks: totals.ticks,
            mean_ticks_per_attempt: (!picks.is_empty()).then(|| steps as f64 / picks.len() as f64),
        }
    }

    pub fn category(&self, c: OutcomeCategory) -> &CategoryStat {
        &self.categories[c.index()]
    }

    /// Binomial standard error of the success rate.
    pub fn success_std_error(&self) -> Option<f64> {
        self.category(OutcomeCategory::Success).std_error.map(|e| e / 100.0)
    }

    /// Plain-text table of outcome counts and shares.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let col = format!("{} gripper, {} motion", self.gripper.as_str(), self.motion.as_str());
        let _ = writeln!(s, "{:<28} {:>28}", "Outcome", col);
        let _ = writeln!(s, "{}", "-".repeat(57));
        for c in &self.categories {
            let cell = match c.percent {
                Some(p) => format!("{} ({:.1}%)", c.count, p),
                None => format!("{}", c.count),
            };
            let _ = writeln!(s, "{:<28} {:>28}", c.category.label(), cell);
        }
        let _ = writeln!(s, "{}", "-".repeat(57));
        let _ = writeln!(s, "{:<28} {:>28}", "Picks with outcome", self.picks_with_outcome);
        let _ = writeln!(s, "{:<28} {:>28}", "Attempts", self.attempts);
        let rate = match (self.success_rate, self.success_std_error()) {
            (Some(r), Some(se)) => format!("{:.1}% +/- {:.1}", 100.0 * r, 100.0 * se),
            _ => "n/a".to_string(),
        };
        let _ = writeln!(s, "{:<28} {:>28}", "Success rate", rate);
        let _ = writeln!(s, "{:<28} {:>28}", "Runs", self.runs);
        let _ = writeln!(s, "{:<28} {:>28}", "Fruit in scenario", self.fruit_total);
        let _ = writeln!(s, "{:<28} {:>28}", "Tracks created / pruned", format!("{} / {}", self.tracks_created, self.tracks_pruned));
        if let Some(t) = self.mean_ticks_per_attempt {
            let _ = writeln!(s, "{:<28} {:>28}", "Mean time per attempt", format!("{:.1} s ({t:.0} ticks)", t / 15.0));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pick(category: Option<OutcomeCategory>) -> PickEvent {
        PickEvent {
            target_id: 0,
            fruit_id: None,
            attempt_index: 0,
            controller_trace: vec![],
            outcome: category.map(|category| PickOutcome { category, fruit_id: None }),
            position_error: None,
            wall_steps: 30,
            states: vec![],
        }
    }

    #[test]
    fn empty_report_has_no_rate() {
        let r = MetricsReport::from_picks(GripperKind::Soft, Motion::Simple, "hsv", 1, &[], &RunTotals::default());
        assert_eq!(r.success_rate, None);
        assert_eq!(r.attempts, 0);
        assert!(r.categories.iter().all(|c| c.percent.is_none()));
        assert!(r.summary_table().contains("n/a"));
    }

    #[test]
    fn percentages_sum_to_hundred() {
        let mut picks: Vec<PickEvent> = OutcomeCategory::ALL.iter().map(|c| pick(Some(*c))).collect();
        picks.push(pick(Some(OutcomeCategory::Success)));
        picks.push(pick(None));
        let r = MetricsReport::from_picks(GripperKind::Soft, Motion::Complex, "hsv", 1, &picks, &RunTotals::default());
        assert_eq!(r.attempts, 8);
        assert_eq!(r.picks_with_outcome, 7);
        let total: f64 = r.categories.iter().map(|c| c.percent.unwrap()).sum();
        assert!((total - 100.0).abs() < 1e-9);
        assert!((r.success_rate.unwrap() - 2.0 / 7.0).abs() < 1e-12);
        let p: f64 = 2.0 / 7.0;
        assert!((r.success_std_error().unwrap() - (p * (1.0 - p) / 7.0).sqrt()).abs() < 1e-12);
    }
}
