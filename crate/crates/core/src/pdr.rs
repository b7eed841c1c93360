//! Local pedestrian dead reckoning.
//!
//! Positions advance in a planar frame anchored at the device's known
//! starting point: x east, y north, heading measured counterclockwise
//! from east.

use thiserror::Error;

use crate::geodesy::{GeoPoint, GeodesyError, LocalFrame};
use crate::inertial::StepEvent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdrError {
    #[error("step length must be positive, got {0}")]
    StepLength(f64),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdrState {
    frame: LocalFrame,
    x: f64,
    y: f64,
    step_length: f64,
    heading: f64,
    steps_taken: u64,
}

impl PdrState {
    pub fn new(initial: GeoPoint, step_length: f64, initial_heading: f64) -> Result<Self, PdrError> {
        if !(step_length > 0.0) || !step_length.is_finite() {
            return Err(PdrError::StepLength(step_length));
        }
        initial.validate()?;
        Ok(Self {
            frame: LocalFrame::new(initial),
            x: 0.0,
            y: 0.0,
            step_length,
            heading: initial_heading,
            steps_taken: 0,
        })
    }

    /// Moves one step of the configured length along the step's heading.
    pub fn advance(&mut self, step: &StepEvent) {
        self.heading = step.heading;
        self.x += self.step_length * self.heading.cos();
        self.y += self.step_length * self.heading.sin();
        self.steps_taken += 1;
    }

    pub fn position(&self) -> GeoPoint {
        self.frame.unproject(self.x, self.y)
    }

    /// Rebases the planar position onto `p`; heading and step count are kept.
    pub fn override_position(&mut self, p: GeoPoint) -> Result<(), PdrError> {
        p.validate()?;
        self.frame.check_within(p)?;
        (self.x, self.y) = self.frame.project(p);
        Ok(())
    }

    pub fn planar(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn frame(&self) -> &LocalFrame {
        &self.frame
    }

    pub fn step_length(&self) -> f64 {
        self.step_length
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }
}
