use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noisy samples `(t_i, Y_i)` sorted by time, with `Y_i` of length `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    times: Vec<f64>,
    values: Vec<f64>,
    p: usize,
    span: (f64, f64),
}

impl ObservationSet {
    /// Build from unsorted rows; the span defaults to the observed time range.
    pub fn new(times: Vec<f64>, rows: Vec<Vec<f64>>, span: Option<(f64, f64)>) -> Result<Self> {
        if times.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} times but {} value rows",
                times.len(),
                rows.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InsufficientData("no observations".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::Dimension("observations have no components".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Dimension(format!("row {i} has {} components, expected {p}", r.len())));
            }
            if !times[i].is_finite() || r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("row {i} contains a non-finite value")));
            }
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        let mut values = Vec::with_capacity(times.len() * p);
        for &i in &order {
            values.extend_from_slice(&rows[i]);
        }
        let observed = (sorted_times[0], sorted_times[sorted_times.len() - 1]);
        let span = match span {
            Some((a, b)) => {
                if !(a <= observed.0 && b >= observed.1 && a < b) {
                    return Err(Error::Config(format!(
                        "span [{a}, {b}] does not cover observed times [{}, {}]",
                        observed.0, observed.1
                    )));
                }
                (a, b)
            }
            None => observed,
        };
        Ok(ObservationSet {
            times: sorted_times,
            values,
            p,
            span,
        })
    }

    /// Single-component convenience constructor.
    pub fn univariate(times: Vec<f64>, values: Vec<f64>, span: Option<(f64, f64)>) -> Result<Self> {
        let rows = values.into_iter().map(|v| vec![v]).collect();
        Self::new(times, rows, span)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn span_length(&self) -> f64 {
        self.span.1 - self.span.0
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.p + k]
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, k)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.p)
    }

    /// Observations at the given indices (re-sorted by time), keeping the span.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let times = indices.iter().map(|&i| self.times[i]).collect();
        let rows = indices.iter().map(|&i| self.row(i).to_vec()).collect();
        Self::new(times, rows, Some(self.span))
    }

    /// Same times, replaced values.
    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.times.clone(), rows, Some(self.span))
    }

    /// Index range `[lo, hi)` of observations with `|t_i - t| < h`.
    pub fn window(&self, t: f64, h: f64) -> (usize, usize) {
        let lo = self.times.partition_point(|&s| s <= t - h);
        let hi = self.times.partition_point(|&s| s < t + h);
        (lo, hi.max(lo))
    }

    /// `h`, or a wider bandwidth when fewer than `needed` distinct times lie
    /// strictly within `h` of `t`: 1.25 times the distance to the `needed`-th
    /// nearest distinct time.
    pub fn covering_bandwidth(&self, t: f64, h: f64, needed: usize) -> f64 {
        let (lo, hi) = self.window(t, h);
        if self.distinct_times(lo, hi) >= needed {
            return h;
        }
        let ts = &self.times;
        let mut right = ts.partition_point(|&s| s < t);
        let mut left = right;
        let mut seen: Vec<f64> = Vec::with_capacity(needed);
        let mut reach = 0.0f64;
        while seen.len() < needed && (left > 0 || right < ts.len()) {
            let take_right = match (left > 0, right < ts.len()) {
                (true, true) => ts[right] - t <= t - ts[left - 1],
                (false, true) => true,
                _ => false,
            };
            let s = if take_right {
                right += 1;
                ts[right - 1]
            } else {
                left -= 1;
                ts[left]
            };
            if !seen.contains(&s) {
                seen.push(s);
                reach = reach.max((s - t).abs());
            }
        }
        h.max(1.25 * reach)
    }

    /// Number of distinct times in `[lo, hi)`.
    pub fn distinct_times(&self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            return 0;
        }
        1 + self.times[lo..hi].windows(2).filter(|w| w[1] != w[0]).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_rows_by_time() {
        let d = ObservationSet::new(
            vec![0.5, 0.1, 0.3],
            vec![vec![5.0, 50.0], vec![1.0, 10.0], vec![3.0, 30.0]],
            None,
        )
        .unwrap();
        assert_eq!(d.times(), &[0.1, 0.3, 0.5]);
        assert_eq!(d.component(1), vec![10.0, 30.0, 50.0]);
        assert_eq!(d.span(), (0.1, 0.5));
    }

    #[test]
    fn rejects_nan_and_ragged_rows() {
        assert!(ObservationSet::univariate(vec![0.0, 1.0], vec![1.0, f64::NAN], None).is_err());
        assert!(ObservationSet::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0, 2.0]], None).is_err());
        assert!(ObservationSet::univariate(vec![0.2], vec![1.0], Some((0.3, 1.0))).is_err());
    }

    #[test]
    fn covering_bandwidth_widens_sparse_windows() {
        let d = ObservationSet::univariate(vec![0.0, 0.1, 0.1, 0.5, 0.9], vec![0.0; 5], None).unwrap();
        assert_eq!(d.covering_bandwidth(0.1, 0.3, 2), 0.3);
        assert!((d.covering_bandwidth(0.1, 0.05, 2) - 0.125).abs() < 1e-15);
        assert!((d.covering_bandwidth(0.1, 0.05, 3) - 0.5).abs() < 1e-15);
        assert!((d.covering_bandwidth(0.95, 0.01, 2) - 0.5625).abs() < 1e-15);
        let h = d.covering_bandwidth(0.3, 0.01, 3);
        let (lo, hi) = d.window(0.3, h);
        assert!(d.distinct_times(lo, hi) >= 3);
    }

    #[test]
    fn window_is_open_interval() {
        let d = ObservationSet::univariate(vec![0.0, 0.25, 0.5, 0.5, 0.75], vec![0.0; 5], None).unwrap();
        assert_eq!(d.window(0.5, 0.25), (2, 4));
        assert_eq!(d.distinct_times(2, 4), 1);
        assert_eq!(d.window(0.5, 0.2500001), (1, 5));
        assert_eq!(d.distinct_times(1, 5), 3);
    }
}
