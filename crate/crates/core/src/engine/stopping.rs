/// What a validation result means for the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// New best; keep this checkpoint.
    Improved,
    Continue,
    /// `patience` evaluations in a row without improvement.
    Stop,
}

/// Patience-based early stopping on a maximized metric. Only a strictly
/// larger value counts as improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, best_epoch: 0, since_improvement: 0 }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> Decision {
        if self.best.is_none_or(|b| value > b) {
            self.best = Some(value);
            self.best_epoch = epoch;
            self.since_improvement = 0;
            return Decision::Improved;
        }
        self.since_improvement += 1;
        if self.since_improvement >= self.patience {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    /// Evaluations since the last improvement.
    pub fn since_improvement(&self) -> usize {
        self.since_improvement
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_patience_evaluations_after_peak() {
        let seq = [0.1, 0.3, 0.5, 0.5, 0.4, 0.45, 0.2, 0.9];
        let mut s = EarlyStopping::new(3);
        let mut stopped_at = None;
        for (k, &v) in seq.iter().enumerate() {
            if s.observe(k, v) == Decision::Stop {
                stopped_at = Some(k);
                break;
            }
        }
        // Peak at index 2; evaluations 3, 4, 5 do not improve.
        assert_eq!(stopped_at, Some(5));
        assert_eq!(s.best(), Some(0.5));
        assert_eq!(s.best_epoch(), 2);
    }

    #[test]
    fn improvement_resets_counter() {
        let mut s = EarlyStopping::new(2);
        assert_eq!(s.observe(1, 0.2), Decision::Improved);
        assert_eq!(s.observe(2, 0.1), Decision::Continue);
        assert_eq!(s.observe(3, 0.3), Decision::Improved);
        assert_eq!(s.since_improvement(), 0);
        assert_eq!(s.observe(4, 0.3), Decision::Continue);
        assert_eq!(s.observe(5, 0.0), Decision::Stop);
    }
}
