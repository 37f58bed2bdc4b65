use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Labels, ModelSpec, PredictiveModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    EveryStep,
    FixedSteps,
    TrainOnce,
}

/// When the surrogate is refit. Step `s` means "before acquisition `s + 1`,
/// with `s` test labels observed"; step 0 is the initial fit on training data
/// and always happens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSchedule {
    pub mode: ScheduleMode,
    #[serde(default)]
    pub steps: BTreeSet<usize>,
}

impl SurrogateSchedule {
    pub fn every_step() -> Self {
        SurrogateSchedule {
            mode: ScheduleMode::EveryStep,
            steps: BTreeSet::new(),
        }
    }

    pub fn train_once() -> Self {
        SurrogateSchedule {
            mode: ScheduleMode::TrainOnce,
            steps: BTreeSet::new(),
        }
    }

    pub fn fixed(steps: impl IntoIterator<Item = usize>) -> Self {
        SurrogateSchedule {
            mode: ScheduleMode::FixedSteps,
            steps: steps.into_iter().collect(),
        }
    }

    pub fn validate(&self, max_step: usize) -> Result<()> {
        match self.mode {
            ScheduleMode::FixedSteps => {
                if let Some(&s) = self.steps.iter().next_back().filter(|&&s| s > max_step) {
                    return Err(Error::config(
                        "schedule.steps",
                        format!("step {s} exceeds M = {max_step}"),
                    ));
                }
            }
            _ if !self.steps.is_empty() => {
                return Err(Error::config("schedule.steps", "only allowed with mode fixed_steps"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn fires(&self, step: usize) -> bool {
        step == 0
            || match self.mode {
                ScheduleMode::EveryStep => true,
                ScheduleMode::TrainOnce => false,
                ScheduleMode::FixedSteps => self.steps.contains(&step),
            }
    }
}

/// A surrogate together with its refit schedule and a refit counter.
pub struct ScheduledSurrogate {
    spec: ModelSpec,
    schedule: SurrogateSchedule,
    model: Option<Box<dyn PredictiveModel>>,
    refits: usize,
}

impl ScheduledSurrogate {
    pub fn new(spec: ModelSpec, schedule: SurrogateSchedule) -> Self {
        ScheduledSurrogate {
            spec,
            schedule,
            model: None,
            refits: 0,
        }
    }

    /// Refit on `inputs`/`labels` (train ∪ observed test) if the schedule
    /// fires at `step`. Returns whether a refit happened.
    pub fn apply_schedule(&mut self, step: usize, inputs: &[Vec<f64>], labels: &Labels, seed: u64) -> Result<bool> {
        if !self.schedule.fires(step) {
            return Ok(false);
        }
        self.model = Some(self.spec.fit(inputs, labels, seed)?);
        self.refits += 1;
        Ok(true)
    }

    pub fn model(&self) -> Option<&dyn PredictiveModel> {
        self.model.as_deref()
    }

    pub fn refits(&self) -> usize {
        self.refits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::KernelParams;

    fn refits_after(schedule: SurrogateSchedule, steps: usize) -> usize {
        let spec = ModelSpec::Gp {
            kernel: KernelParams::default(),
            noise_variance: 0.0,
        };
        let mut s = ScheduledSurrogate::new(spec, schedule);
        let xs: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let ys = Labels::Real(vec![0.0, 1.0, 0.5]);
        for step in 0..steps {
            s.apply_schedule(step, &xs, &ys, 0).unwrap();
        }
        s.refits()
    }

    #[test]
    fn refit_counting() {
        assert_eq!(refits_after(SurrogateSchedule::every_step(), 8), 8);
        assert_eq!(refits_after(SurrogateSchedule::train_once(), 8), 1);
        let fixed = SurrogateSchedule::fixed([0, 5, 10]);
        assert_eq!(refits_after(fixed.clone(), 8), 2);
        assert!(fixed.fires(5) && !fixed.fires(4) && !fixed.fires(10 + 1));
        assert!(fixed.validate(8).is_err());
        assert!(fixed.validate(10).is_ok());
    }
}
