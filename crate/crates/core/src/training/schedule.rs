/// Reduces the learning rate once the monitored loss stops improving.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    pub min_delta: f64,
    lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64, min_lr: f64, min_delta: f64) -> Self {
        PlateauScheduler {
            patience,
            factor,
            min_lr,
            min_delta,
            lr,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch's loss; returns the learning rate for the next epoch.
    /// An epoch improves when its loss is below `best - min_delta`.
    pub fn step(&mut self, loss: f64) -> f64 {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.wait = 0;
            }
        }
        self.lr
    }

    /// Replays a loss trace and returns the learning rate after each epoch.
    pub fn replay(mut self, losses: &[f64]) -> Vec<f64> {
        losses.iter().map(|&l| self.step(l)).collect()
    }
}
