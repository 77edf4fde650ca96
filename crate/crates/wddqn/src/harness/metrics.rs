//! Episode metrics: the efficiency ratio of the gridworld experiments and
//! windowed reward statistics for the learning curves.

/// Ratio of the fewest possible steps to the steps actually taken; 0 when
/// the goal was not reached.
pub fn efficiency_ratio(min_steps: u32, actual_steps: u32, reached: bool) -> f64 {
    debug_assert!(actual_steps >= 1);
    if reached {
        min_steps as f64 / actual_steps as f64
    } else {
        0.0
    }
}

/// Statistics of one non-overlapping episode window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    /// First episode index of the window (0-based).
    pub start: usize,
    /// One past the last episode index.
    pub end: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl WindowStats {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Consecutive non-overlapping windows over the per-episode values; the
/// final window may be shorter and reports its actual size.
pub fn rolling_metrics(values: &[f64], window: usize) -> Vec<WindowStats> {
    assert!(window >= 1, "window must be at least 1");
    values
        .chunks(window)
        .enumerate()
        .map(|(i, chunk)| {
            let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
            let min = chunk.iter().copied().fold(f64::INFINITY, f64::min);
            let max = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            WindowStats {
                start: i * window,
                end: i * window + chunk.len(),
                mean,
                min,
                max,
            }
        })
        .collect()
}
