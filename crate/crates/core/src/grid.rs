//! Histogram binning over T_S + T_AS.

/// Uniform bins of `bin_ns` starting at `origin_ns` (may be negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinGrid {
    pub bin_ns: u64,
    pub origin_ns: i64,
    pub n_bins: usize,
}

impl BinGrid {
    /// Grid with `anchor_ns` at a bin centre, covering [0, span_end_ns].
    pub fn aligned(bin_ns: u64, anchor_ns: u64, span_end_ns: u64) -> Self {
        assert!(bin_ns > 0, "bin size must be positive");
        let b = bin_ns as i64;
        let first_edge = anchor_ns as i64 - b / 2;
        let mut origin_ns = first_edge.rem_euclid(b);
        if origin_ns > 0 {
            origin_ns -= b;
        }
        let span = span_end_ns as i64 - origin_ns;
        let n_bins = (span.div_euclid(b) + 1).max(1) as usize;
        Self { bin_ns, origin_ns, n_bins }
    }

    pub fn bin_of(&self, t_ns: u64) -> Option<usize> {
        let d = t_ns as i64 - self.origin_ns;
        if d < 0 {
            return None;
        }
        let i = (d / self.bin_ns as i64) as usize;
        (i < self.n_bins).then_some(i)
    }

    /// Half-open edges [lo, hi) of bin `i` in ns.
    pub fn edges(&self, i: usize) -> (i64, i64) {
        let lo = self.origin_ns + i as i64 * self.bin_ns as i64;
        (lo, lo + self.bin_ns as i64)
    }

    pub fn center_ns(&self, i: usize) -> f64 {
        let (lo, hi) = self.edges(i);
        0.5 * (lo + hi) as f64
    }

    /// Index of the bin containing `t_ns`, even if outside the grid span.
    pub fn index_near(&self, t_ns: f64) -> usize {
        let i = ((t_ns - self.origin_ns as f64) / self.bin_ns as f64).floor();
        i.clamp(0.0, (self.n_bins - 1) as f64) as usize
    }
}
