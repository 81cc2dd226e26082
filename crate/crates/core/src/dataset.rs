//! Labeled-dataset emission: subimage cropping, the version 1.5 metadata
//! schema, and its strict validator.
//!
//! File names follow the capture timestamp:
//! - master image: `yyyymmddhhmmss-pose<N>.<ext>`
//! - bounding-box overlay: `yyyymmddhhmmss-pose<N>-bb.<ext>`
//! - subimage: `yyyymmddhhmmss<position_id>.<ext>`
//!
//! where `<ext>` is `jpg` or `png`.

use std::fmt;
use std::sync::LazyLock;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraPose, NormalizedBox, Volume};
pub use crate::geometry::PositionClass;
use crate::raster::{Image, Rgb8};

pub const SCHEMA_VERSION: &str = "1.5";

static MASTER_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{14})-pose(\d+)\.(jpg|png)$").expect("valid regex"));
static SUBIMAGE_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{14})(\d+)\.(jpg|png)$").expect("valid regex"));
static DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{4}-\d{2}-\d{2}$").expect("valid regex"));
static TIME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{2}:\d{2}:\d{2}$").expect("valid regex"));

const TIMESTAMP_FORMAT: &str = "%Y%m%d%H%M%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    Jpg,
    #[default]
    Png,
}

impl Extension {
    pub fn as_str(self) -> &'static str {
        match self {
            Extension::Jpg => "jpg",
            Extension::Png => "png",
        }
    }
}

/// Where normalized box coordinates put their origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateConvention {
    /// (0, 0) is the top-left corner, x to the right, y down.
    #[default]
    TopLeft,
    /// (0, 0) is the upper-right corner, x to the left, y down.
    UpperRight,
}

impl CoordinateConvention {
    /// Converts a top-left box to this convention.
    pub fn encode(self, b: &NormalizedBox) -> NormalizedBox {
        match self {
            CoordinateConvention::TopLeft => *b,
            CoordinateConvention::UpperRight => b.mirrored_x(),
        }
    }

    /// Converts a box in this convention back to top-left.
    pub fn decode(self, b: &NormalizedBox) -> NormalizedBox {
        // mirroring is its own inverse
        self.encode(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPoseRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Angle from the zenith, degrees.
    pub polar: f64,
    /// Pan angle, degrees.
    pub azimuthal: f64,
}

impl From<&CameraPose> for CameraPoseRecord {
    fn from(p: &CameraPose) -> Self {
        Self {
            x: p.position.x,
            y: p.position.y,
            z: p.position.z,
            polar: p.polar(),
            azimuthal: p.pan,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubimageRecord {
    pub plant_id: String,
    pub label: String,
    pub scientific_name: String,
    pub position_id: u32,
    pub subimage_file_name: String,
    pub date_planted: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl SubimageRecord {
    pub fn bbox(&self) -> NormalizedBox {
        NormalizedBox {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterImageRecord {
    pub version: String,
    pub file_name: String,
    pub bb_file_name: String,
    pub date: String,
    pub time: String,
    pub room: String,
    pub institute: String,
    pub camera: String,
    pub lens: String,
    pub camera_pose: CameraPoseRecord,
    pub bounding_boxes: Vec<SubimageRecord>,
}

/// One schema violation, located by a JSON-style field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

pub fn master_file_name(timestamp: &NaiveDateTime, pose_index: usize, ext: Extension) -> String {
    format!(
        "{}-pose{}.{}",
        timestamp.format(TIMESTAMP_FORMAT),
        pose_index,
        ext.as_str()
    )
}

/// `...-pose<N>.<ext>` becomes `...-pose<N>-bb.<ext>`.
pub fn bb_file_name(file_name: &str) -> Option<String> {
    let caps = MASTER_NAME.captures(file_name)?;
    Some(format!("{}-pose{}-bb.{}", &caps[1], &caps[2], &caps[3]))
}

pub fn subimage_file_name(timestamp: &NaiveDateTime, position_id: u32, ext: Extension) -> String {
    format!(
        "{}{}.{}",
        timestamp.format(TIMESTAMP_FORMAT),
        position_id,
        ext.as_str()
    )
}

/// Capture time encoded in a master file name.
pub fn parse_master_timestamp(file_name: &str) -> Option<NaiveDateTime> {
    let caps = MASTER_NAME.captures(file_name)?;
    NaiveDateTime::parse_from_str(&caps[1], TIMESTAMP_FORMAT).ok()
}

struct Collector(Vec<ValidationError>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationError {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_box(errs: &mut Collector, prefix: &str, b: &SubimageRecord) {
    for (axis, lo, hi) in [("x", b.x_min, b.x_max), ("y", b.y_min, b.y_max)] {
        if !(0.0..1.0).contains(&lo) {
            errs.push(format!("{prefix}.{axis}_min"), format!("{lo} is outside [0, 1)"));
        } else if !(lo < hi) {
            errs.push(
                format!("{prefix}.{axis}_min"),
                format!("{axis}_min ({lo}) must be below {axis}_max ({hi})"),
            );
        }
        if !(hi > 0.0 && hi <= 1.0) {
            errs.push(format!("{prefix}.{axis}_max"), format!("{hi} is outside (0, 1]"));
        }
    }
}

/// Every schema violation in `record`, in field order.
pub fn validate_record(record: &MasterImageRecord) -> Vec<ValidationError> {
    let mut errs = Collector(Vec::new());

    if record.version != SCHEMA_VERSION {
        errs.push(
            "version",
            format!("unsupported version '{}', expected '{SCHEMA_VERSION}'", record.version),
        );
    }

    let stamp = MASTER_NAME.captures(&record.file_name).map(|c| {
        (
            c[1].to_string(),
            NaiveDateTime::parse_from_str(&c[1], TIMESTAMP_FORMAT).ok(),
            c[3].to_string(),
        )
    });
    match &stamp {
        None => errs.push(
            "file_name",
            format!(
                "'{}' does not match yyyymmddhhmmss-pose<N>.jpg",
                record.file_name
            ),
        ),
        Some((digits, None, _)) => {
            errs.push("file_name", format!("'{digits}' is not a valid timestamp"))
        }
        Some(_) => {}
    }

    match bb_file_name(&record.file_name) {
        Some(expected) if expected != record.bb_file_name => errs.push(
            "bb_file_name",
            format!("expected '{expected}', found '{}'", record.bb_file_name),
        ),
        None if !record.bb_file_name.contains("-bb") => {
            errs.push("bb_file_name", "missing '-bb' after the pose number")
        }
        _ => {}
    }

    let date = if DATE.is_match(&record.date) {
        NaiveDate::parse_from_str(&record.date, "%Y-%m-%d").ok()
    } else {
        None
    };
    if date.is_none() {
        errs.push("date", format!("'{}' is not a yyyy-mm-dd date", record.date));
    }
    let time = if TIME.is_match(&record.time) {
        NaiveTime::parse_from_str(&record.time, "%H:%M:%S").ok()
    } else {
        None
    };
    if time.is_none() {
        errs.push("time", format!("'{}' is not a hh:mm:ss time", record.time));
    }
    if let (Some(d), Some(t), Some((_, Some(ts), _))) = (date, time, &stamp) {
        if d.and_time(t) != *ts {
            errs.push("time", "date and time disagree with the file name timestamp");
        }
    }

    let pose = &record.camera_pose;
    for (name, v) in [("x", pose.x), ("y", pose.y), ("z", pose.z)] {
        if !v.is_finite() {
            errs.push(format!("camera_pose.{name}"), "must be finite");
        }
    }
    if !(0.0..=180.0).contains(&pose.polar) {
        errs.push("camera_pose.polar", format!("{} is outside [0, 180]", pose.polar));
    }
    if !(-180.0..=180.0).contains(&pose.azimuthal) {
        errs.push(
            "camera_pose.azimuthal",
            format!("{} is outside [-180, 180]", pose.azimuthal),
        );
    }

    let mut seen = std::collections::HashSet::new();
    for (i, b) in record.bounding_boxes.iter().enumerate() {
        let prefix = format!("bounding_boxes[{i}]");
        if b.plant_id.is_empty() {
            errs.push(format!("{prefix}.plant_id"), "must not be empty");
        }
        match SUBIMAGE_NAME.captures(&b.subimage_file_name) {
            None => errs.push(
                format!("{prefix}.subimage_file_name"),
                format!(
                    "'{}' does not match yyyymmddhhmmss<position_id>.jpg",
                    b.subimage_file_name
                ),
            ),
            Some(_) => {
                if let Some((digits, _, ext)) = &stamp {
                    let expected = format!("{digits}{}.{ext}", b.position_id);
                    if b.subimage_file_name != expected {
                        errs.push(
                            format!("{prefix}.subimage_file_name"),
                            format!("expected '{expected}'"),
                        );
                    }
                }
            }
        }
        if !seen.insert(b.subimage_file_name.as_str()) {
            errs.push(format!("{prefix}.subimage_file_name"), "duplicate subimage name");
        }
        if !DATE.is_match(&b.date_planted)
            || NaiveDate::parse_from_str(&b.date_planted, "%Y-%m-%d").is_err()
        {
            errs.push(
                format!("{prefix}.date_planted"),
                format!("'{}' is not a yyyy-mm-dd date", b.date_planted),
            );
        }
        check_box(&mut errs, &prefix, b);
    }
    errs.0
}

/// Serializes a record after validating it.
pub fn emit_metadata(record: &MasterImageRecord) -> Result<String> {
    let errs = validate_record(record);
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let mut s = serde_json::to_string_pretty(record)?;
    s.push('\n');
    Ok(s)
}

/// Parses a metadata document and reports every schema violation.
pub fn parse_and_validate(bytes: &[u8]) -> Result<MasterImageRecord> {
    let record: MasterImageRecord = serde_json::from_slice(bytes)?;
    let errs = validate_record(&record);
    if errs.is_empty() {
        Ok(record)
    } else {
        Err(Error::Validation(errs))
    }
}

/// Pixel rectangle `[x0, x1) x [y0, y1)` covered by a box.
pub fn pixel_rect(b: &NormalizedBox, width: u32, height: u32) -> (u32, u32, u32, u32) {
    let px = |f: f64, n: u32| ((f * n as f64).round().max(0.0) as u32).min(n);
    (
        px(b.x_min, width),
        px(b.y_min, height),
        px(b.x_max, width),
        px(b.y_max, height),
    )
}

pub fn crop(master: &Image, b: &NormalizedBox) -> Result<Image> {
    if !b.is_valid() {
        return Err(Error::Crop(format!("invalid box {b:?}")));
    }
    let (x0, y0, x1, y1) = pixel_rect(b, master.width(), master.height());
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::Crop(format!(
            "box {b:?} covers no pixels of a {}x{} image",
            master.width(),
            master.height()
        )));
    }
    Ok(master.sub_image(x0, y0, x1, y1))
}

/// Copy of `master` with each box outlined `thickness` pixels wide, drawn
/// inward from the crop rectangle.
pub fn draw_boxes(master: &Image, boxes: &[NormalizedBox], color: Rgb8, thickness: u32) -> Image {
    let mut out = master.clone();
    for b in boxes {
        let (x0, y0, x1, y1) = pixel_rect(b, master.width(), master.height());
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        for y in y0..y1 {
            for x in x0..x1 {
                let edge = x < x0 + thickness
                    || x + thickness >= x1
                    || y < y0 + thickness
                    || y + thickness >= y1;
                if edge {
                    out.set(x, y, color);
                }
            }
        }
    }
    out
}

/// Edge when the position lies within `margin` of a side wall of the
/// traversable volume, Interior otherwise.
pub fn classify_position(position: [f64; 3], volume: &Volume, margin: f64) -> PositionClass {
    let (d, _) = volume.nearest_side(position);
    if d <= margin {
        PositionClass::Edge
    } else {
        PositionClass::Interior
    }
}
