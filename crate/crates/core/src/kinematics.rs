//! Axis speed, pulse counts and travel time for the stepper-driven linear
//! actuators of the gantry.
//!
//! Every axis follows a symmetric trapezoidal pulse-rate profile: a linear
//! ramp at `acceleration` up to `peak_pulse_rate`, a cruise phase, and a
//! linear ramp back to rest. Moves too short to reach the peak rate use a
//! triangular profile instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraPose;

/// Highest pulse rate the axis controller can emit, pulses/s.
pub const HARDWARE_MAX_PULSE_RATE: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisConfig {
    /// Millimeters travelled per actuator revolution.
    pub distance_per_rev: f64,
    /// Fraction of a revolution per motor step.
    pub step_angle_fraction: f64,
    /// Gearbox reduction factor.
    pub gear_ratio: f64,
    /// Upper travel limit in millimeters; the lower limit is 0.
    pub travel_limit: f64,
}

impl Default for AxisConfig {
    fn default() -> Self {
        Self {
            distance_per_rev: 105.0,
            step_angle_fraction: 1.8 / 360.0,
            gear_ratio: 0.2,
            travel_limit: 1150.0,
        }
    }
}

impl AxisConfig {
    pub fn with_travel_limit(travel_limit: f64) -> Self {
        Self {
            travel_limit,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("distance_per_rev", self.distance_per_rev),
            ("step_angle_fraction", self.step_angle_fraction),
            ("gear_ratio", self.gear_ratio),
            ("travel_limit", self.travel_limit),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "axis {name} must be finite and positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Millimeters per pulse at full stepping.
    pub fn displacement_per_pulse(&self) -> f64 {
        self.distance_per_rev * self.step_angle_fraction * self.gear_ratio
    }
}

/// The three linear axes of the gantry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GantryConfig {
    pub x: AxisConfig,
    pub y: AxisConfig,
    pub z: AxisConfig,
}

impl Default for GantryConfig {
    fn default() -> Self {
        Self {
            x: AxisConfig::with_travel_limit(1150.0),
            y: AxisConfig::with_travel_limit(840.0),
            z: AxisConfig::with_travel_limit(718.0),
        }
    }
}

impl GantryConfig {
    pub fn axes(&self) -> [(&'static str, &AxisConfig); 3] {
        [("x", &self.x), ("y", &self.y), ("z", &self.z)]
    }

    pub fn validate(&self) -> Result<()> {
        self.axes().iter().try_for_each(|(_, a)| a.validate())
    }

    /// Axis-aligned traversable volume `[0, limit]` on each axis.
    pub fn volume(&self) -> crate::route::Volume {
        crate::route::Volume::new(
            [0.0, 0.0, 0.0],
            [self.x.travel_limit, self.y.travel_limit, self.z.travel_limit],
        )
    }

    /// Rejects positions outside `[0, travel_limit]` on any axis, the way the
    /// limit switches stop the physical machine.
    pub fn check_position(&self, p: [f64; 3]) -> Result<()> {
        for ((axis, cfg), value) in self.axes().into_iter().zip(p) {
            if !(value >= 0.0 && value <= cfg.travel_limit) {
                return Err(Error::Bounds {
                    axis,
                    value,
                    limit: cfg.travel_limit,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteppingMode {
    #[default]
    Full,
    Half,
}

impl SteppingMode {
    pub fn multiplier(self) -> f64 {
        match self {
            SteppingMode::Full => 1.0,
            SteppingMode::Half => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// Cruise pulse rate, pulses/s.
    pub peak_pulse_rate: f64,
    /// Ramp slope, pulses/s².
    pub acceleration: f64,
}

impl Default for MotionProfile {
    fn default() -> Self {
        Self::PRODUCTION
    }
}

impl MotionProfile {
    /// Daily production settings of the imaging system.
    pub const PRODUCTION: MotionProfile = MotionProfile {
        peak_pulse_rate: 3000.0,
        acceleration: 10000.0,
    };

    pub fn new(peak_pulse_rate: f64, acceleration: f64) -> Result<Self> {
        let p = Self {
            peak_pulse_rate,
            acceleration,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_pulse_rate > 0.0 && self.peak_pulse_rate <= HARDWARE_MAX_PULSE_RATE) {
            return Err(Error::domain(format!(
                "peak pulse rate must lie in (0, {HARDWARE_MAX_PULSE_RATE}], got {}",
                self.peak_pulse_rate
            )));
        }
        if !(self.acceleration > 0.0 && self.acceleration.is_finite()) {
            return Err(Error::domain(format!(
                "acceleration must be positive, got {}",
                self.acceleration
            )));
        }
        Ok(())
    }

    /// Pulses consumed by one ramp from rest to the peak rate.
    pub fn ramp_pulses(&self) -> f64 {
        self.peak_pulse_rate * self.peak_pulse_rate / (2.0 * self.acceleration)
    }
}

/// Linear axis speed in mm/s for a given pulse rate.
pub fn axis_speed(pulse_rate: f64, mode: SteppingMode, cfg: &AxisConfig) -> Result<f64> {
    if !(pulse_rate >= 0.0) {
        return Err(Error::domain(format!(
            "pulse rate must be non-negative, got {pulse_rate}"
        )));
    }
    // rate and mode first keeps the printed examples exact in binary floating point
    Ok(pulse_rate * mode.multiplier() * cfg.distance_per_rev * cfg.step_angle_fraction * cfg.gear_ratio)
}

/// Number of pulses needed to travel `distance` mm, rounded to nearest.
pub fn pulses_for_distance(distance: f64, mode: SteppingMode, cfg: &AxisConfig) -> Result<u64> {
    if !(distance >= 0.0) || !distance.is_finite() {
        return Err(Error::domain(format!(
            "distance must be non-negative, got {distance}"
        )));
    }
    let per_pulse = cfg.displacement_per_pulse() * mode.multiplier();
    Ok((distance / per_pulse).round() as u64)
}

/// Time in seconds to emit `pulses` pulses starting and ending at rest.
pub fn axis_travel_time(pulses: u64, profile: &MotionProfile) -> f64 {
    if pulses == 0 {
        return 0.0;
    }
    let n = pulses as f64;
    if n >= 2.0 * profile.ramp_pulses() {
        n / profile.peak_pulse_rate + profile.peak_pulse_rate / profile.acceleration
    } else {
        // triangular: peak rate sqrt(a n), each ramp lasts sqrt(n / a)
        2.0 * (n / profile.acceleration).sqrt()
    }
}

/// Everything needed to time a gantry move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionContext {
    pub gantry: GantryConfig,
    pub profile: MotionProfile,
    pub mode: SteppingMode,
    /// Move all three axes at once rather than one after the other.
    pub parallel: bool,
    /// Fixed time charged for a pan/tilt change. The servo motion runs
    /// alongside the linear axes, so it only matters when it is the longer
    /// of the two.
    pub pan_tilt_time: f64,
}

impl Default for MotionContext {
    fn default() -> Self {
        Self {
            gantry: GantryConfig::default(),
            profile: MotionProfile::PRODUCTION,
            mode: SteppingMode::Half,
            parallel: false,
            pan_tilt_time: 0.0,
        }
    }
}

impl MotionContext {
    pub fn validate(&self) -> Result<()> {
        self.gantry.validate()?;
        self.profile.validate()?;
        if !(self.pan_tilt_time >= 0.0) {
            return Err(Error::domain("pan_tilt_time must be non-negative"));
        }
        Ok(())
    }

    /// Per-axis travel times for a move between two gantry positions.
    pub fn axis_times(&self, from: [f64; 3], to: [f64; 3]) -> Result<[f64; 3]> {
        self.gantry.check_position(from)?;
        self.gantry.check_position(to)?;
        let mut times = [0.0; 3];
        for (i, (_, cfg)) in self.gantry.axes().into_iter().enumerate() {
            let pulses = pulses_for_distance((to[i] - from[i]).abs(), self.mode, cfg)?;
            times[i] = axis_travel_time(pulses, &self.profile);
        }
        Ok(times)
    }

    /// Time for a linear move between two head positions.
    pub fn linear_move_time(&self, from: [f64; 3], to: [f64; 3]) -> Result<f64> {
        let t = self.axis_times(from, to)?;
        Ok(if self.parallel {
            t.into_iter().fold(0.0, f64::max)
        } else {
            t.into_iter().sum()
        })
    }
}

/// Time to move the camera from one pose to another.
pub fn move_time(from: &CameraPose, to: &CameraPose, ctx: &MotionContext) -> Result<f64> {
    let linear = ctx.linear_move_time(from.position_array(), to.position_array())?;
    let turns = from.pan != to.pan || from.tilt != to.tilt;
    Ok(if turns {
        linear.max(ctx.pan_tilt_time)
    } else {
        linear
    })
}
