use std::collections::VecDeque;

/// Default bound on retained samples.
pub const DEFAULT_WINDOW_CAP: usize = 1_000_000;

/// Retains the most recent `N = ⌈θ (k − k_o)⌉` scalar samples, where `k` is
/// the iteration of the latest append and `k_o` the anchor set by [`reset`].
///
/// Because `θ ≤ 1`, the start of the exposed window never moves backwards, so
/// anything that falls out of it is discarded for good.
///
/// [`reset`]: SampleWindow::reset
#[derive(Debug, Clone)]
pub struct SampleWindow {
    theta: f64,
    anchor: u64,
    samples: VecDeque<f64>,
    cap: usize,
}

impl SampleWindow {
    pub fn new(theta: f64) -> Self {
        Self::with_cap(theta, DEFAULT_WINDOW_CAP)
    }

    /// # Panics
    ///
    /// If `theta` is outside `(0, 1]` or `cap` is zero.
    pub fn with_cap(theta: f64, cap: usize) -> Self {
        assert!(theta > 0.0 && theta <= 1.0, "keep fraction must lie in (0, 1]");
        assert!(cap > 0, "window cap must be positive");
        Self {
            theta,
            anchor: 0,
            samples: VecDeque::new(),
            cap,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn anchor(&self) -> u64 {
        self.anchor
    }

    /// `⌈θ (k − k_o)⌉`, the number of samples the window should expose at `k`.
    pub fn target_len(&self, k: u64) -> usize {
        let span = k.saturating_sub(self.anchor) as f64;
        let v = self.theta * span;
        let r = v.round();
        // θ·span like 0.1·30 can land a hair above an integer
        let n = if (v - r).abs() <= 1e-9 * v.max(1.0) {
            r
        } else {
            v.ceil()
        };
        n as usize
    }

    /// Appends the sample observed at iteration `k` and drops anything that
    /// has left the window.
    pub fn push(&mut self, k: u64, value: f64) {
        self.samples.push_back(value);
        let keep = self.target_len(k).min(self.cap);
        while self.samples.len() > keep {
            self.samples.pop_front();
        }
    }

    /// Number of samples currently exposed.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The exposed samples, oldest first.
    pub fn samples(&mut self) -> &[f64] {
        self.samples.make_contiguous()
    }

    /// Sets `k_o = k` and empties the window.
    pub fn reset(&mut self, k: u64) {
        self.anchor = k;
        self.samples.clear();
    }
}
