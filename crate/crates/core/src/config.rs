//! Toolkit configuration, loadable from JSON. Every field has a default, so
//! a config file only needs to list what it changes.

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::dataset::{CoordinateConvention, Extension};
use crate::error::Result;
use crate::geometry::{CameraIntrinsics, PoseRings};
use crate::kinematics::{GantryConfig, MotionContext, MotionProfile, SteppingMode};
use crate::route::ZigzagParams;
use crate::scene::{SimulationConfig, TimingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub gantry: GantryConfig,
    pub profile: MotionProfile,
    pub stepping_mode: SteppingMode,
    pub parallel_moves: bool,
    pub pan_tilt_time: f64,
    pub intrinsics: CameraIntrinsics,
    pub timing: TimingConfig,
    pub zigzag: ZigzagParams,
    pub pose_rings: PoseRings,
    /// Distance from a side wall within which a plant counts as an edge
    /// position, mm.
    pub edge_margin: f64,
    /// Gantry head position before the first move.
    pub home: [f64; 3],
    pub start_time: NaiveDateTime,
    pub scene: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub coordinate_convention: CoordinateConvention,
    pub file_extension: Extension,
    pub render_scale: u32,
    pub seed: u64,
    pub room: String,
    pub institute: String,
    pub camera: String,
    pub lens: String,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            gantry: GantryConfig::default(),
            profile: MotionProfile::PRODUCTION,
            stepping_mode: SteppingMode::Half,
            parallel_moves: false,
            pan_tilt_time: 0.0,
            intrinsics: CameraIntrinsics::default(),
            timing: TimingConfig::default(),
            zigzag: ZigzagParams::default(),
            pose_rings: PoseRings::default(),
            edge_margin: 50.0,
            home: [0.0; 3],
            start_time: NaiveDate::from_ymd_opt(2020, 6, 1)
                .and_then(|d| d.and_hms_opt(8, 0, 0))
                .expect("valid start time"),
            scene: None,
            output_dir: PathBuf::from("run"),
            coordinate_convention: CoordinateConvention::TopLeft,
            file_extension: Extension::Png,
            render_scale: 4,
            seed: 0,
            room: "LAB".into(),
            institute: "SIM".into(),
            camera: "GoPro".into(),
            lens: "Hero 7 Black".into(),
        }
    }
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.motion().validate()?;
        self.intrinsics.validate()?;
        self.timing.validate()?;
        self.zigzag.validate()?;
        if self.render_scale == 0 {
            return Err(crate::Error::domain("render scale must be at least 1"));
        }
        if !(self.edge_margin >= 0.0) {
            return Err(crate::Error::domain("edge margin must be non-negative"));
        }
        self.gantry.check_position(self.home)
    }

    pub fn motion(&self) -> MotionContext {
        MotionContext {
            gantry: self.gantry,
            profile: self.profile,
            mode: self.stepping_mode,
            parallel: self.parallel_moves,
            pan_tilt_time: self.pan_tilt_time,
        }
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            intrinsics: self.intrinsics,
            motion: self.motion(),
            timing: self.timing,
            home: self.home,
            start_time: self.start_time,
        }
    }
}
