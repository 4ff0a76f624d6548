//! Control library and fixed-step simulator for an autonomous solar-panel
//! cleaning robot.
//!
//! The crate is split the same way the robot is: [`world`] describes the panel
//! array and its dust, [`dynamics`] moves the differential-drive base,
//! [`sensors`] turns the physical state into the firmware's integer readings,
//! [`control`] holds the PID heading regulator and turn logic, [`mission`] is
//! the coverage/docking state machine and [`power`] covers the battery,
//! charger and buck-converter math. [`engine`] wires all of them into one
//! deterministic tick loop.

pub mod control;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod mission;
pub mod power;
pub mod scenario;
pub mod sensors;
pub mod trace;
pub mod world;

pub use error::{Error, Result};
