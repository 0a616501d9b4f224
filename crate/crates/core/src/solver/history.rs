use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    IterationCap,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::IterationCap => "iteration_cap",
            Status::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Objective at the iterate.
    pub value: f64,
    /// Gap estimate; only evaluated every few iterations.
    pub gap: Option<f64>,
    pub lipschitz: f64,
    pub inner_sweeps: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(iter, gap)` for every record with a gap.
    pub fn gaps(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.gap.map(|g| (r.iter, g)))
            .collect()
    }

    /// Least-squares slope of `ln gap` against `ln iter` over `[from, to]`.
    pub fn gap_rate(&self, from: usize, to: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .gaps()
            .into_iter()
            .filter(|&(k, g)| k >= from && k <= to && g > 0.0)
            .map(|(k, g)| ((k as f64).ln(), g.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}
