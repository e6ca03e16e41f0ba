//! Localization of power-grid disturbances from sparse, timestamped frequency
//! measurements.
//!
//! The pipeline filters each sensor's frequency trace, detects the event on the
//! system-average frequency, extracts per-sensor threshold-crossing delays,
//! triangulates the sensors, fits a C1 arrival-time surface over the mesh and
//! takes its minimum as the event location. Sensors whose delay disagrees with
//! a distance-proportional model are removed and the estimate recomputed. The
//! gradient of the final surface gives a propagation-speed map.

pub mod detect;
pub mod error;
pub mod grid;
pub mod locate;
pub mod measurements;
pub mod mesh;
pub mod speedmap;
pub mod surface;
pub mod synthetic;

pub use detect::{ArrivalSet, DetectionParams, EventDetection};
pub use error::{Error, Result};
pub use grid::{BBox, ScalarGrid};
pub use locate::{EventEstimate, LocateConfig, LocateOutcome, ValidationReport};
pub use measurements::{Direction, FrequencyTrace, SensorSet, SensorSite};
pub use mesh::TriMesh;
pub use speedmap::{SpeedField, UnitDistances};
pub use surface::ArrivalSurface;
