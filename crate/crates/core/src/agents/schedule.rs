use log::warn;
use serde::{Deserialize, Serialize};

/// Phase structure of a run of `total` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub total: usize,
    pub phases: usize,
    pub rollouts: usize,
    pub rollout_len: usize,
    pub explore_len: usize,
}

impl Schedule {
    /// Steps taken by one CollectData record.
    pub fn record_len(&self) -> usize {
        self.explore_len + 1 + self.rollout_len
    }

    pub fn planned_steps(&self) -> usize {
        self.phases * self.rollouts * self.record_len()
    }
}

/// `n = m = T^{2/5}`, `s' = ln T`, `s = T^{1/5} − s'`, with floors of one.
pub fn make_schedule(total: usize) -> Schedule {
    let t = total.max(1) as f64;
    let nm = (t.powf(0.4).round() as usize).max(1);
    let root5 = t.powf(0.2).round() as usize;
    let mut explore_len = (t.ln().ceil() as usize).max(1);
    let rollout_len = if root5 > explore_len {
        root5 - explore_len
    } else {
        let s = root5.max(1);
        if explore_len > s {
            warn!("T = {total} is too small for s = T^(1/5) - ln T; using s = {s} and s' = {s}");
        }
        explore_len = explore_len.min(s);
        s
    };
    Schedule {
        total,
        phases: nm,
        rollouts: nm,
        rollout_len,
        explore_len,
    }
}

/// Per-field replacements for the default schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleOverrides {
    pub phases: Option<usize>,
    pub rollouts: Option<usize>,
    pub rollout_len: Option<usize>,
    pub explore_len: Option<usize>,
}

impl ScheduleOverrides {
    pub fn apply(&self, mut s: Schedule) -> Schedule {
        if let Some(v) = self.phases {
            s.phases = v.max(1);
        }
        if let Some(v) = self.rollouts {
            s.rollouts = v.max(1);
        }
        if let Some(v) = self.rollout_len {
            s.rollout_len = v.max(1);
        }
        if let Some(v) = self.explore_len {
            s.explore_len = v;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_horizon() {
        let s = make_schedule(10_000_000_000);
        assert_eq!((s.phases, s.rollouts), (10_000, 10_000));
        assert_eq!((s.explore_len, s.rollout_len), (24, 76));
    }

    #[test]
    fn unit_horizon_floors() {
        let s = make_schedule(1);
        assert_eq!((s.phases, s.rollouts, s.rollout_len, s.explore_len), (1, 1, 1, 1));
        assert_eq!(make_schedule(0).phases, 1);
    }

    #[test]
    fn planned_steps_track_the_horizon() {
        // rounding the fractional powers overshoots by more than 4x only here
        let mut outliers = Vec::new();
        let grid = (1..=200_000).chain((50..=120).map(|k| 10f64.powf(k as f64 / 10.0) as usize));
        for t in grid {
            let s = make_schedule(t);
            assert!(s.phases.min(s.rollouts).min(s.rollout_len).min(s.explore_len) >= 1);
            let ratio = s.planned_steps() as f64 / t as f64;
            if !(0.25..=4.0).contains(&ratio) {
                outliers.push(t);
            }
        }
        assert_eq!(outliers, vec![10, 11]);
    }

    #[test]
    fn overrides_replace_fields() {
        let o = ScheduleOverrides {
            rollouts: Some(7),
            explore_len: Some(0),
            ..Default::default()
        };
        let s = o.apply(make_schedule(100_000));
        assert_eq!((s.rollouts, s.explore_len), (7, 0));
        assert_eq!(s.phases, make_schedule(100_000).phases);
    }
}
