//! Plain Backpressure: max-weight control on the physical queue backlog.

use super::{
    choose_action, Controller, ControllerConfig, SlotDecision, SlotEvents, SlotInput,
};
use crate::error::Error;
use crate::model::SystemModel;
use crate::Result;

pub struct Backpressure {
    model: SystemModel,
    v: f64,
}

impl Backpressure {
    pub fn new(model: SystemModel, v: f64) -> Result<Self> {
        if !(v >= 1.0) {
            return Err(Error::InvalidParameter(format!("V must be >= 1, got {v}")));
        }
        Ok(Self { model, v })
    }
}

pub(super) fn build(
    model: &SystemModel,
    config: &ControllerConfig,
) -> Result<Box<dyn Controller>> {
    Ok(Box::new(Backpressure::new(model.clone(), config.v)?))
}

impl Controller for Backpressure {
    fn name(&self) -> &'static str {
        "bp"
    }

    fn decide(&mut self, input: &SlotInput<'_>) -> Result<SlotDecision> {
        let aug = input.queues.as_slice().to_vec();
        let action = choose_action(&self.model, input.state, &aug, self.v)?;
        Ok(SlotDecision {
            action,
            drop_now: false,
            gamma: vec![0.0; aug.len()],
            aug_queues: aug,
            branch: None,
            events: SlotEvents::default(),
        })
    }
}
