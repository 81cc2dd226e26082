//! End-to-end run: plan poses around every plant, simulate the imaging run,
//! and write masters, overlays, subimages and metadata to a run directory.
//!
//! Layout:
//! ```text
//! <run>/masters/<stamp>-pose<N>.<ext>       master images
//! <run>/masters/<stamp>-pose<N>-bb.<ext>    overlays with box outlines
//! <run>/subimages/{Edge,Interior}/<stamp><position_id>.<ext>
//! <run>/metadata/<stamp>-pose<N>.json       one record per master
//! <run>/run_log.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytics::RunAccounting;
use crate::config::ToolkitConfig;
use crate::dataset::{
    self, bb_file_name, classify_position, crop, draw_boxes, emit_metadata, master_file_name,
    subimage_file_name, CameraPoseRecord, MasterImageRecord, PositionClass, SubimageRecord,
};
use crate::error::{Error, Result};
use crate::geometry::{generate_poses, CameraPose};
use crate::io::{write_atomic, write_json};
use crate::par::Execution;
use crate::route::zigzag_order;
use crate::scene::{simulate_run_with, Capture, RunLog, Scene, SimulatedCamera};

const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];
const OVERLAY_THICKNESS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosePlan {
    pub poses: Vec<CameraPose>,
    /// Plants for which no pose fits inside the gantry volume.
    pub unreachable: Vec<String>,
}

/// Rings of poses around each plant (half-cylinders at edge positions, full
/// circles inside), ordered by the zig-zag planner.
pub fn plan_poses(scene: &Scene, cfg: &ToolkitConfig) -> Result<PosePlan> {
    let volume = cfg.gantry.volume();
    let mut poses = Vec::new();
    let mut unreachable = Vec::new();
    for plant in &scene.plants {
        let class = classify_position(plant.position, &volume, cfg.edge_margin);
        let target = plant.bounding_sphere().center;
        match generate_poses(&target, class, &cfg.pose_rings, &volume) {
            Ok(p) => poses.extend(p),
            Err(Error::NoFeasiblePoses) => unreachable.push(plant.plant_id.clone()),
            Err(e) => return Err(e),
        }
    }
    let positions: Vec<[f64; 3]> = poses.iter().map(CameraPose::position_array).collect();
    let order = zigzag_order(&positions, &volume, &cfg.zigzag);
    Ok(PosePlan {
        poses: order.into_iter().map(|i| poses[i]).collect(),
        unreachable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub masters: usize,
    pub subimages: usize,
    pub subimages_per_class: BTreeMap<PositionClass, usize>,
    /// Plant sightings skipped because the bounding sphere reached behind
    /// the camera.
    pub unlabeled_sightings: usize,
    /// Plant sightings whose box rounds to zero pixels.
    pub subpixel_sightings: usize,
    pub accounting: RunAccounting,
    pub master_rate: f64,
    pub subimage_rate: Option<f64>,
}

pub struct RunPaths {
    pub root: PathBuf,
    pub masters: PathBuf,
    pub metadata: PathBuf,
    pub subimages: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            masters: root.join("masters"),
            metadata: root.join("metadata"),
            subimages: root.join("subimages"),
        }
    }

    pub fn class_dir(&self, class: PositionClass) -> PathBuf {
        self.subimages.join(class.as_str())
    }

    fn create(&self) -> Result<()> {
        for dir in [
            self.masters.clone(),
            self.metadata.clone(),
            self.class_dir(PositionClass::Edge),
            self.class_dir(PositionClass::Interior),
        ] {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }
}

/// Builds the metadata record for one capture, boxes in the configured
/// coordinate convention.
pub fn capture_record(scene: &Scene, capture: &Capture, cfg: &ToolkitConfig) -> MasterImageRecord {
    let ext = cfg.file_extension;
    let file_name = master_file_name(&capture.timestamp, capture.position_index, ext);
    let bounding_boxes = capture
        .boxes
        .iter()
        .map(|pb| {
            let plant = &scene.plants[pb.plant_index];
            let b = cfg.coordinate_convention.encode(&pb.bbox);
            SubimageRecord {
                plant_id: plant.plant_id.clone(),
                label: plant.label.clone(),
                scientific_name: plant.scientific_name.clone(),
                position_id: plant.position_id,
                subimage_file_name: subimage_file_name(&capture.timestamp, plant.position_id, ext),
                date_planted: plant.date_planted.format("%Y-%m-%d").to_string(),
                x_min: b.x_min,
                x_max: b.x_max,
                y_min: b.y_min,
                y_max: b.y_max,
            }
        })
        .collect();
    MasterImageRecord {
        version: dataset::SCHEMA_VERSION.into(),
        bb_file_name: bb_file_name(&file_name).expect("generated names match the pattern"),
        file_name,
        date: capture.timestamp.format("%Y-%m-%d").to_string(),
        time: capture.timestamp.format("%H:%M:%S").to_string(),
        room: cfg.room.clone(),
        institute: cfg.institute.clone(),
        camera: cfg.camera.clone(),
        lens: cfg.lens.clone(),
        camera_pose: CameraPoseRecord::from(&capture.pose),
        bounding_boxes,
    }
}

/// Simulates the run over `poses` and writes the complete run directory.
/// Image files always hold PNG data, whatever extension the names use.
pub fn run_to_directory(
    scene: &Scene,
    poses: &[CameraPose],
    cfg: &ToolkitConfig,
    out: &Path,
    exec: Execution,
) -> Result<RunSummary> {
    cfg.validate()?;
    let volume = cfg.gantry.volume();
    scene.validate(&volume)?;
    let paths = RunPaths::new(out);
    paths.create()?;

    let mut per_class: BTreeMap<PositionClass, usize> = BTreeMap::new();
    let mut unlabeled = 0usize;
    let mut subpixel = 0usize;
    let mut camera = SimulatedCamera {
        scene,
        intrinsics: cfg.intrinsics,
        scale: cfg.render_scale,
        exec,
    };
    let log: RunLog = simulate_run_with(scene, poses, &cfg.simulation(), &mut camera, |capture| {
        let record = capture_record(scene, &capture, cfg);
        let master = &capture.render.image;
        master.save_png(&paths.masters.join(&record.file_name))?;
        let outlines: Vec<_> = capture.boxes.iter().map(|b| b.bbox).collect();
        draw_boxes(master, &outlines, OVERLAY_COLOR, OVERLAY_THICKNESS)
            .save_png(&paths.masters.join(&record.bb_file_name))?;
        for (pb, sub) in capture.boxes.iter().zip(&record.bounding_boxes) {
            let class = classify_position(scene.plants[pb.plant_index].position, &volume, cfg.edge_margin);
            crop(master, &pb.bbox)
                .map_err(|e| Error::AtPose {
                    index: capture.position_index,
                    source: Box::new(e),
                })?
                .save_png(&paths.class_dir(class).join(&sub.subimage_file_name))?;
            *per_class.entry(class).or_default() += 1;
        }
        unlabeled += capture.unlabeled.len();
        subpixel += capture.subpixel.len();
        let json = emit_metadata(&record)?;
        let stem = record.file_name.rsplit_once('.').map_or(&*record.file_name, |s| s.0);
        write_atomic(&paths.metadata.join(format!("{stem}.json")), json.as_bytes())
    })?;
    write_json(&paths.root.join("run_log.json"), &log)?;

    let accounting = log.accounting();
    Ok(RunSummary {
        output_dir: out.to_path_buf(),
        masters: log.entries.len(),
        subimages: per_class.values().sum(),
        subimages_per_class: per_class,
        unlabeled_sightings: unlabeled,
        subpixel_sightings: subpixel,
        accounting,
        master_rate: if accounting.n_m > 0 {
            crate::analytics::master_rate(&accounting)?
        } else {
            0.0
        },
        subimage_rate: crate::analytics::subimage_rate(&accounting).ok(),
    })
}

/// Outcome of validating every metadata file in a directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub files_checked: usize,
    pub errors: Vec<FileError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub file: PathBuf,
    pub path: String,
    pub message: String,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Validates every `*.json` file in `dir` (not recursive).
pub fn validate_directory(dir: &Path) -> Result<ValidationReport> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut report = ValidationReport::default();
    for file in files {
        report.files_checked += 1;
        let bytes = std::fs::read(&file).map_err(|e| Error::io(&file, e))?;
        match dataset::parse_and_validate(&bytes) {
            Ok(_) => {}
            Err(Error::Validation(errs)) => report.errors.extend(errs.into_iter().map(|e| FileError {
                file: file.clone(),
                path: e.path,
                message: e.message,
            })),
            Err(e) => report.errors.push(FileError {
                file: file.clone(),
                path: String::new(),
                message: e.to_string(),
            }),
        }
    }
    Ok(report)
}
