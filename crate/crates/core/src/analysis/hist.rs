use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

/// Guards bin assignment against representation error in `value / width`.
const EDGE_SLACK: f64 = 1e-9;

/// Left-closed, right-open bins starting at 0, listed up to the highest
/// populated bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `(lower_edge, count)` in ascending order.
    pub bins: Vec<(f64, usize)>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|(_, c)| c).sum()
    }

    /// CSV with a `lower_edge,count` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower_edge,count\n");
        for (edge, count) in &self.bins {
            let _ = writeln!(out, "{edge},{count}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let max = self.bins.iter().map(|(_, c)| *c).max().unwrap_or(0).max(1);
        let mut out = String::new();
        for (edge, count) in &self.bins {
            let bar = "#".repeat(count * 40 / max);
            let _ = writeln!(out, "[{edge:>6.3}, {:>6.3})  {count:>7}  {bar}", edge + self.bin_width);
        }
        out
    }
}

/// Bins costs in `[0, 1]`; values at or above 1 fall in the final bin.
pub fn cost_histogram(costs: &[f64], bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("bin width must be positive"));
    }
    if costs.is_empty() {
        return Err(Error::Empty("costs"));
    }
    let n_bins = ((1.0 / bin_width) - EDGE_SLACK).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; n_bins];
    let mut highest = 0;
    for &c in costs {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::invalid(format!("cost {c} outside [0, 1]")));
        }
        let idx = ((c / bin_width + EDGE_SLACK).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
        highest = highest.max(idx);
    }
    let bins = counts
        .into_iter()
        .take(highest + 1)
        .enumerate()
        .map(|(i, c)| (i as f64 * bin_width, c))
        .collect();
    Ok(Histogram { bin_width, bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_binning() {
        let h = cost_histogram(&[0.05, 0.15, 0.15], 0.1).unwrap();
        assert_eq!(h.bins, vec![(0.0, 1), (0.1, 2)]);
        assert_eq!(h.to_csv(), "lower_edge,count\n0,1\n0.1,2\n");
    }

    #[test]
    fn identical_costs_fill_one_bin() {
        let h = cost_histogram(&[0.37; 5], 0.02).unwrap();
        assert_eq!(h.bins.iter().filter(|(_, c)| *c > 0).count(), 1);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn exact_edges_and_overflow() {
        let h = cost_histogram(&[0.3, 1.0, 1.5], 0.1).unwrap();
        assert_eq!(h.bins.len(), 10);
        assert_eq!(h.bins[3].1, 1);
        assert_eq!(h.bins[9].1, 2);
    }

    #[test]
    fn errors() {
        assert!(cost_histogram(&[], 0.1).is_err());
        assert!(cost_histogram(&[0.1], 0.0).is_err());
        assert!(cost_histogram(&[-0.1], 0.1).is_err());
        assert!(cost_histogram(&[f64::NAN], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn counts_conserved(costs in prop::collection::vec(0.0f64..=1.0, 1..200), w in 0.01f64..0.5) {
            let h = cost_histogram(&costs, w).unwrap();
            prop_assert_eq!(h.total(), costs.len());
            for (i, (edge, _)) in h.bins.iter().enumerate() {
                prop_assert!((edge - i as f64 * w).abs() < 1e-12);
            }
        }
    }
}
