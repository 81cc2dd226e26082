//! Synthetic scenes of sphere "plants" on a floor in front of blue keying
//! fabric, a ray-cast renderer that also produces a per-pixel ground-truth
//! label map, and a clocked simulation of a full imaging run.

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    pixel_direction, project_sphere_box, BoundingSphere, CameraIntrinsics, CameraPose,
    NormalizedBox, PixelPoint, Volume,
};
use crate::kinematics::{move_time, MotionContext};
use crate::par::Execution;
use crate::raster::{Image, Mask, Rgb8};

pub const KEYING_BLUE: Rgb8 = [0, 70, 160];
pub const SOIL_BROWN: Rgb8 = [96, 72, 40];
pub const DEFAULT_FLOOR_Z: f64 = -150.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantTarget {
    pub plant_id: String,
    pub label: String,
    pub scientific_name: String,
    pub position_id: u32,
    /// Where the plant stands on the floor, mm.
    pub position: [f64; 3],
    /// Radius of a sphere enclosing the whole plant, mm.
    pub bounding_radius: f64,
    pub render_color: Rgb8,
    pub date_planted: NaiveDate,
}

impl PlantTarget {
    /// The enclosing sphere rests on the floor at the plant position.
    pub fn bounding_sphere(&self) -> BoundingSphere {
        let [x, y, z] = self.position;
        BoundingSphere {
            center: Point3::new(x, y, z + self.bounding_radius),
            radius: self.bounding_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub plants: Vec<PlantTarget>,
    #[serde(default = "default_background")]
    pub background_color: Rgb8,
    #[serde(default = "default_floor")]
    pub floor_color: Rgb8,
    #[serde(default = "default_floor_z")]
    pub floor_z: f64,
}

fn default_background() -> Rgb8 {
    KEYING_BLUE
}
fn default_floor() -> Rgb8 {
    SOIL_BROWN
}
fn default_floor_z() -> f64 {
    DEFAULT_FLOOR_Z
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            plants: Vec::new(),
            background_color: KEYING_BLUE,
            floor_color: SOIL_BROWN,
            floor_z: DEFAULT_FLOOR_Z,
        }
    }
}

/// Species used when generating scenes: (id prefix, label, scientific name,
/// render color).
const SPECIES: [(&str, &str, &str, Rgb8); 4] = [
    ("echcru", "BarnyardGrass", "Echinochloa crus-galli", [70, 150, 50]),
    ("cirarv", "CanadaThistle", "Cirsium arvense", [110, 160, 60]),
    ("taroff", "Dandelion", "Taraxacum officinale", [90, 170, 40]),
    ("setpum", "YellowFoxtail", "Setaria pumila", [150, 170, 60]),
];

impl Scene {
    pub fn validate(&self, footprint: &Volume) -> Result<()> {
        for (i, p) in self.plants.iter().enumerate() {
            if !(p.bounding_radius > 0.0 && p.bounding_radius.is_finite()) {
                return Err(Error::domain(format!(
                    "plant {} has non-positive bounding radius",
                    p.plant_id
                )));
            }
            if !footprint.contains_xy(p.position) {
                return Err(Error::domain(format!(
                    "plant {} at {:?} lies outside the gantry footprint",
                    p.plant_id, p.position
                )));
            }
            for q in &self.plants[..i] {
                if q.plant_id == p.plant_id {
                    return Err(Error::domain(format!("duplicate plant id {}", p.plant_id)));
                }
                if q.position == p.position {
                    return Err(Error::domain(format!(
                        "plants {} and {} share a position",
                        q.plant_id, p.plant_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Nine plants on a 3 x 3 grid spanning the gantry footprint.
    pub fn demo(footprint: &Volume) -> Self {
        let mut plants = Vec::new();
        let date = NaiveDate::from_ymd_opt(2020, 5, 15).expect("valid date");
        for (gy, fy) in [0.2, 0.5, 0.8].into_iter().enumerate() {
            for (gx, fx) in [0.2, 0.5, 0.8].into_iter().enumerate() {
                let idx = gy * 3 + gx;
                let (prefix, label, sci, color) = SPECIES[idx % SPECIES.len()];
                let x = footprint.min[0] + fx * (footprint.max[0] - footprint.min[0]);
                let y = footprint.min[1] + fy * (footprint.max[1] - footprint.min[1]);
                plants.push(PlantTarget {
                    plant_id: format!("{prefix}{:03}", idx + 1),
                    label: label.into(),
                    scientific_name: sci.into(),
                    position_id: idx as u32 + 1,
                    position: [x, y, DEFAULT_FLOOR_Z],
                    bounding_radius: 60.0,
                    render_color: color,
                    date_planted: date,
                });
            }
        }
        Scene {
            plants,
            ..Scene::default()
        }
    }

    /// `count` plants at seeded random, pairwise separated floor positions.
    pub fn random(count: usize, footprint: &Volume, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plants: Vec<PlantTarget> = Vec::new();
        let date = NaiveDate::from_ymd_opt(2020, 5, 1).expect("valid date");
        let mut attempts = 0;
        while plants.len() < count && attempts < 10_000 {
            attempts += 1;
            let radius = rng.gen_range(30.0..90.0);
            let x = rng.gen_range(footprint.min[0]..=footprint.max[0]);
            let y = rng.gen_range(footprint.min[1]..=footprint.max[1]);
            let clear = plants.iter().all(|p| {
                let d = (p.position[0] - x).hypot(p.position[1] - y);
                d > p.bounding_radius + radius
            });
            if !clear {
                continue;
            }
            let n = plants.len();
            let (prefix, label, sci, color) = SPECIES[rng.gen_range(0..SPECIES.len())];
            plants.push(PlantTarget {
                plant_id: format!("{prefix}{:03}", n + 1),
                label: label.into(),
                scientific_name: sci.into(),
                position_id: n as u32 + 1,
                position: [x, y, DEFAULT_FLOOR_Z],
                bounding_radius: radius,
                render_color: color,
                date_planted: date,
            });
        }
        Scene {
            plants,
            ..Scene::default()
        }
    }
}

/// What a pixel's ray hits first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Background,
    Floor,
    Plant(u16),
}

impl Label {
    fn encode(self) -> u16 {
        match self {
            Label::Background => 0,
            Label::Floor => 1,
            Label::Plant(i) => i + 2,
        }
    }

    fn decode(v: u16) -> Self {
        match v {
            0 => Label::Background,
            1 => Label::Floor,
            i => Label::Plant(i - 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    codes: Vec<u16>,
}

impl LabelMap {
    pub fn get(&self, x: u32, y: u32) -> Label {
        Label::decode(self.codes[y as usize * self.width as usize + x as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, Label)> + '_ {
        let w = self.width;
        self.codes
            .iter()
            .enumerate()
            .map(move |(i, c)| (i as u32 % w, i as u32 / w, Label::decode(*c)))
    }

    pub fn count(&self, label: Label) -> usize {
        let code = label.encode();
        self.codes.iter().filter(|c| **c == code).count()
    }

    pub fn mask(&self, f: impl Fn(Label) -> bool) -> Mask {
        Mask::from_bits(
            self.width,
            self.height,
            self.codes.iter().map(|c| f(Label::decode(*c))).collect(),
        )
        .expect("label map dimensions are consistent")
    }

    /// Normalized image coordinates of a pixel center.
    pub fn pixel_center(&self, x: u32, y: u32) -> (f64, f64) {
        (
            (x as f64 + 0.5) / self.width as f64,
            (y as f64 + 0.5) / self.height as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub image: Image,
    pub labels: LabelMap,
}

/// Render size for a downsampling factor.
pub fn render_size(k: &CameraIntrinsics, scale: u32) -> (u32, u32) {
    let s = scale.max(1);
    ((k.width / s).max(1), (k.height / s).max(1))
}

fn first_sphere_hit(origin: &Point3<f64>, dir: &Vector3<f64>, s: &BoundingSphere) -> Option<f64> {
    let oc = origin - s.center;
    let a = dir.norm_squared();
    let b = oc.dot(dir);
    let c = oc.norm_squared() - s.radius * s.radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let t0 = (-b - root) / a;
    let t1 = (-b + root) / a;
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

/// Ray-casts the scene. Pixel `(i, j)` of the downsampled image samples the
/// full-resolution camera at normalized position `((i+0.5)/W, (j+0.5)/H)`,
/// so boxes in normalized units apply at every scale.
pub fn render(
    scene: &Scene,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    scale: u32,
    exec: Execution,
) -> Render {
    let (w, h) = render_size(k, scale);
    let rot_t = pose.rotation().transpose();
    let origin = pose.optical_center();
    let spheres: Vec<BoundingSphere> = scene.plants.iter().map(|p| p.bounding_sphere()).collect();
    let (fw, fh) = (k.width as f64, k.height as f64);

    let mut codes = vec![0u16; w as usize * h as usize];
    exec.for_each_chunk_mut(&mut codes, w as usize, |row, out| {
        let v = (row as f64 + 0.5) / h as f64 * fh;
        for (col, code) in out.iter_mut().enumerate() {
            let u = (col as f64 + 0.5) / w as f64 * fw;
            let dir = rot_t * pixel_direction(&PixelPoint { u, v }, k);
            let mut nearest = f64::INFINITY;
            let mut label = Label::Background;
            if dir.z < 0.0 && origin.z > scene.floor_z {
                nearest = (scene.floor_z - origin.z) / dir.z;
                label = Label::Floor;
            }
            for (i, s) in spheres.iter().enumerate() {
                if let Some(t) = first_sphere_hit(&origin, &dir, s) {
                    if t < nearest {
                        nearest = t;
                        label = Label::Plant(i as u16);
                    }
                }
            }
            *code = label.encode();
        }
    });

    let pixels = codes
        .iter()
        .map(|c| match Label::decode(*c) {
            Label::Background => scene.background_color,
            Label::Floor => scene.floor_color,
            Label::Plant(i) => scene.plants[i as usize].render_color,
        })
        .collect();
    Render {
        image: Image::from_pixels(w, h, pixels).expect("render buffer matches size"),
        labels: LabelMap {
            width: w,
            height: h,
            codes,
        },
    }
}

/// Stand-in for the physical camera's trigger request and image response.
pub trait CameraBackend {
    fn capture(&mut self, pose: &CameraPose) -> Result<Render>;
}

pub struct SimulatedCamera<'a> {
    pub scene: &'a Scene,
    pub intrinsics: CameraIntrinsics,
    pub scale: u32,
    pub exec: Execution,
}

impl CameraBackend for SimulatedCamera<'_> {
    fn capture(&mut self, pose: &CameraPose) -> Result<Render> {
        Ok(render(self.scene, pose, &self.intrinsics, self.scale, self.exec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    /// Pause after a move before triggering, s.
    pub settle_pause: f64,
    /// Trigger-to-image time, s.
    pub capture_time: f64,
    /// Bulk download time per master image, s.
    pub download_time_per_image: f64,
    /// Cropping time per subimage, s.
    pub crop_time_per_subimage: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            settle_pause: 3.0,
            capture_time: 2.7,
            download_time_per_image: 2760.0 / 2149.0,
            crop_time_per_subimage: 2040.0 / 3494.0,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.settle_pause,
            self.capture_time,
            self.download_time_per_image,
            self.crop_time_per_subimage,
        ];
        if fields.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("timing values must be non-negative"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogEntry {
    pub position_index: usize,
    pub pose: CameraPose,
    pub move_start: f64,
    pub move_end: f64,
    pub capture_start: f64,
    pub capture_end: f64,
    /// Wall-clock capture time, second resolution.
    pub timestamp: NaiveDateTime,
    pub master_id: String,
}

impl RunLogEntry {
    pub fn duration(&self) -> f64 {
        self.capture_end - self.move_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub start_time: NaiveDateTime,
    pub timing: TimingConfig,
    pub entries: Vec<RunLogEntry>,
    /// Total imaging time including motion, s.
    pub t_p: f64,
    pub subimage_count: u64,
}

impl RunLog {
    pub fn accounting(&self) -> crate::analytics::RunAccounting {
        let n_m = self.entries.len() as u64;
        crate::analytics::RunAccounting {
            t_p: self.t_p,
            t_d: n_m as f64 * self.timing.download_time_per_image,
            t_c: self.subimage_count as f64 * self.timing.crop_time_per_subimage,
            n_m,
            n_s: self.subimage_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantBox {
    pub plant_index: usize,
    pub bbox: NormalizedBox,
}

/// One master image with its geometric labels.
#[derive(Debug, Clone)]
pub struct Capture {
    pub position_index: usize,
    pub pose: CameraPose,
    pub timestamp: NaiveDateTime,
    pub render: Render,
    /// Plants whose bounding sphere projects onto at least one pixel.
    pub boxes: Vec<PlantBox>,
    /// Plants whose sphere reaches behind the image plane or encloses the
    /// camera; no box can be computed for them.
    pub unlabeled: Vec<usize>,
    /// Plants whose box is in frame but rounds to zero pixels at the
    /// capture resolution; they yield no subimage.
    pub subpixel: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub intrinsics: CameraIntrinsics,
    pub motion: MotionContext,
    pub timing: TimingConfig,
    /// Gantry head position before the first move.
    pub home: [f64; 3],
    pub start_time: NaiveDateTime,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            motion: MotionContext::default(),
            timing: TimingConfig::default(),
            home: [0.0; 3],
            start_time: NaiveDate::from_ymd_opt(2020, 6, 1)
                .and_then(|d| d.and_hms_opt(8, 0, 0))
                .expect("valid start time"),
        }
    }
}

/// Geometric labels of every plant for one pose.
pub fn label_plants(scene: &Scene, pose: &CameraPose, k: &CameraIntrinsics) -> (Vec<PlantBox>, Vec<usize>) {
    let mut boxes = Vec::new();
    let mut unlabeled = Vec::new();
    for (i, plant) in scene.plants.iter().enumerate() {
        match project_sphere_box(pose, &plant.bounding_sphere(), k) {
            Ok(Some(bbox)) => boxes.push(PlantBox {
                plant_index: i,
                bbox,
            }),
            Ok(None) => {}
            Err(_) => unlabeled.push(i),
        }
    }
    (boxes, unlabeled)
}

/// Runs the imaging sequence: for each pose, move, settle, capture, and
/// label. Each capture is handed to `sink` as soon as it is taken.
pub fn simulate_run_with<C: CameraBackend>(
    scene: &Scene,
    poses: &[CameraPose],
    cfg: &SimulationConfig,
    camera: &mut C,
    mut sink: impl FnMut(Capture) -> Result<()>,
) -> Result<RunLog> {
    cfg.timing.validate()?;
    cfg.motion.validate()?;
    let mut entries = Vec::with_capacity(poses.len());
    let mut clock = 0.0f64;
    let mut previous = CameraPose::at(cfg.home);
    if let Some(first) = poses.first() {
        previous.pan = first.pan;
        previous.tilt = first.tilt;
    }
    let mut subimages = 0u64;
    for (index, pose) in poses.iter().enumerate() {
        let travel = pose
            .validate()
            .and_then(|_| move_time(&previous, pose, &cfg.motion))
            .map_err(|e| Error::AtPose {
                index,
                source: Box::new(e),
            })?;
        let move_start = clock;
        let move_end = move_start + travel;
        let capture_start = move_end + cfg.timing.settle_pause;
        let capture_end = capture_start + cfg.timing.capture_time;
        clock = capture_end;

        let timestamp = cfg.start_time
            + chrono::Duration::milliseconds((capture_start * 1000.0).round() as i64);
        let timestamp = timestamp
            .with_nanosecond(0)
            .expect("zero nanoseconds is always valid");
        let render = camera.capture(pose)?;
        let (mut boxes, unlabeled) = label_plants(scene, pose, &cfg.intrinsics);
        let (w, h) = (render.image.width(), render.image.height());
        let mut subpixel = Vec::new();
        boxes.retain(|b| {
            let (x0, y0, x1, y1) = crate::dataset::pixel_rect(&b.bbox, w, h);
            let keep = x1 > x0 && y1 > y0;
            if !keep {
                subpixel.push(b.plant_index);
            }
            keep
        });
        subimages += boxes.len() as u64;
        entries.push(RunLogEntry {
            position_index: index,
            pose: *pose,
            move_start,
            move_end,
            capture_start,
            capture_end,
            timestamp,
            master_id: format!("{}-pose{}", timestamp.format("%Y%m%d%H%M%S"), index),
        });
        sink(Capture {
            position_index: index,
            pose: *pose,
            timestamp,
            render,
            boxes,
            unlabeled,
            subpixel,
        })?;
        previous = *pose;
    }
    Ok(RunLog {
        start_time: cfg.start_time,
        timing: cfg.timing,
        entries,
        t_p: clock,
        subimage_count: subimages,
    })
}

/// [`simulate_run_with`] on the simulated camera, keeping every capture.
pub fn simulate_run(
    scene: &Scene,
    poses: &[CameraPose],
    cfg: &SimulationConfig,
    scale: u32,
    exec: Execution,
) -> Result<(RunLog, Vec<Capture>)> {
    let mut camera = SimulatedCamera {
        scene,
        intrinsics: cfg.intrinsics,
        scale,
        exec,
    };
    let mut captures = Vec::new();
    let log = simulate_run_with(scene, poses, cfg, &mut camera, |c| {
        captures.push(c);
        Ok(())
    })?;
    Ok((log, captures))
}
