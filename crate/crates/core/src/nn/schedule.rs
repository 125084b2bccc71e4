/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub lr0: f64,
    pub gamma: f64,
    pub step_epochs: usize,
    pub epochs: usize,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr0: 5e-5,
            gamma: 0.1,
            step_epochs: 9,
            epochs: 21,
            batch: 16,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.lr0 > 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.batch >= 1
            && self.step_epochs >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(alloc::format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// Step schedule: `lr0 * gamma^floor(epoch / step_epochs)`.
pub fn lr_at_epoch(hyper: &TrainHyper, epoch: usize) -> f64 {
    let k = epoch / hyper.step_epochs.max(1);
    // Dividing by integral powers of 1/gamma keeps decimal rates such as
    // 5e-6 exact where repeated multiplication by 0.1 would not.
    let factor = (0..k).fold(1.0, |acc, _| acc * (1.0 / hyper.gamma));
    hyper.lr0 / factor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_values() {
        let h = TrainHyper::default();
        for e in 0..9 {
            assert_eq!(lr_at_epoch(&h, e), 5e-5);
        }
        for e in 9..18 {
            assert_eq!(lr_at_epoch(&h, e), 5e-6);
        }
        for e in 18..21 {
            assert_eq!(lr_at_epoch(&h, e), 5e-7);
        }
    }

    #[test]
    fn schedule_is_non_increasing() {
        let h = TrainHyper {
            lr0: 1e-3,
            gamma: 0.5,
            step_epochs: 3,
            ..TrainHyper::default()
        };
        let lrs: alloc::vec::Vec<f64> = (0..30).map(|e| lr_at_epoch(&h, e)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(lrs[3], 5e-4);
    }

    #[test]
    fn invalid_hyper_rejected() {
        let h = TrainHyper {
            gamma: 1.5,
            ..TrainHyper::default()
        };
        assert!(h.validate().is_err());
        assert!(TrainHyper::default().validate().is_ok());
    }
}
