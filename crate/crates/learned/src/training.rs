/// Loss history of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// Mean training loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Held-out loss after each epoch (evaluation mode); empty when no
    /// validation set was requested.
    pub validation_loss: Vec<f64>,
    /// Optimizer steps taken.
    pub steps: u64,
}

impl TrainingLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}
