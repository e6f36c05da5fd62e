use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Per-step outcome of a simulated decision step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub thr_link_mbps: Vec<f64>,
    pub thr_sta_mbps: Vec<f64>,
    pub jain: f64,
    /// Set when every station delivered nothing and `jain` was defined as 1.
    pub jain_vacuous: bool,
    /// Mean head-of-line-to-delivery time; absent when nothing was delivered.
    pub access_delay_us: Option<f64>,
    pub busy_frac: Vec<f64>,
    pub busy_ns: Vec<u64>,
    pub idle_ns: Vec<u64>,
    pub collisions: u64,
    pub successes: u64,
}

impl StepMetrics {
    /// Total delivered throughput, the environment's reward.
    pub fn total_throughput(&self) -> f64 {
        self.thr_link_mbps.iter().sum()
    }
}

/// Jain's index `(sum x)^2 / (n sum x^2)`; `(1.0, true)` for an all-zero vector.
pub fn jain_index(values: &[f64]) -> (f64, bool) {
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return (1.0, true);
    }
    (sum * sum / (values.len() as f64 * sum_sq), false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessEvent {
    /// A packet reached the head of the (station, link) queue.
    HeadOfLine { sta: usize, link: usize, at_ns: u64 },
    /// The head-of-line packet was delivered.
    Delivered { sta: usize, link: usize, at_ns: u64 },
}

/// Mean time from head-of-line arrival to delivery, in microseconds.
///
/// Each delivery pairs with the latest preceding head-of-line event of the same
/// (station, link). Deliveries without one are ignored. `None` when there is
/// nothing to average.
pub fn measure_access_delay(events: &[AccessEvent]) -> Option<f64> {
    let mut hol: HashMap<(usize, usize), u64> = HashMap::new();
    let mut total_ns = 0u64;
    let mut count = 0u64;
    for ev in events {
        match *ev {
            AccessEvent::HeadOfLine { sta, link, at_ns } => {
                hol.insert((sta, link), at_ns);
            }
            AccessEvent::Delivered { sta, link, at_ns } => {
                if let Some(since) = hol.remove(&(sta, link)) {
                    total_ns += at_ns - since;
                    count += 1;
                }
            }
        }
    }
    (count > 0).then(|| total_ns as f64 / count as f64 / 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jain_closed_forms() {
        assert_eq!(jain_index(&[1.0, 1.0, 1.0, 1.0]), (1.0, false));
        assert_eq!(jain_index(&[4.0, 0.0, 0.0, 0.0]), (0.25, false));
        assert_eq!(jain_index(&[3.0, 1.0]), (0.8, false));
        assert_eq!(jain_index(&[0.0, 0.0]), (1.0, true));
    }

    #[test]
    fn delay_single_packet() {
        // five idle 9 us slots then a 253.04 us success
        let ev = [
            AccessEvent::HeadOfLine { sta: 0, link: 0, at_ns: 0 },
            AccessEvent::Delivered { sta: 0, link: 0, at_ns: 45_000 + 253_040 },
        ];
        assert_eq!(measure_access_delay(&ev), Some(298.04));
        let immediate = [
            AccessEvent::HeadOfLine { sta: 1, link: 0, at_ns: 1000 },
            AccessEvent::Delivered { sta: 1, link: 0, at_ns: 1000 + 253_040 },
        ];
        assert_eq!(measure_access_delay(&immediate), Some(253.04));
    }

    #[test]
    fn delay_absent_without_deliveries() {
        assert_eq!(measure_access_delay(&[]), None);
        let ev = [AccessEvent::HeadOfLine { sta: 0, link: 0, at_ns: 5 }];
        assert_eq!(measure_access_delay(&ev), None);
    }

    proptest! {
        #[test]
        fn jain_bounds_and_scale_invariance(
            v in prop::collection::vec(0.0f64..100.0, 1..12),
            scale in 0.01f64..100.0,
        ) {
            let (j, vacuous) = jain_index(&v);
            if !vacuous {
                let n = v.len() as f64;
                prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12);
                let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
                prop_assert!((jain_index(&scaled).0 - j).abs() < 1e-12);
            }
        }
    }
}
