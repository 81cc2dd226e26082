//! World → camera → image transforms for a pan-tilt camera carried by the
//! gantry head, together with bounding-sphere box projection, inverse
//! projection onto a horizontal plane, aiming, and pose generation around a
//! plant location.
//!
//! Conventions:
//! - World frame: millimeters, Z up, origin at the gantry's home corner.
//! - Camera frame: X forward along the optical axis, Y to the left, Z up.
//! - Pan rotates about world Z (0° looks along +X); tilt is elevation
//!   (0° horizontal, -90° straight down). Pan is applied before tilt.
//! - Image frame: pixels, origin at the top-left corner, u to the right and
//!   v downward.
//!
//! Angles are degrees in every public type and serialized format; radians
//! are used only inside computations.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type WorldPoint = Point3<f64>;
/// Camera-frame coordinates in mm: x forward, y left, z up.
pub type CameraPoint = Vector3<f64>;

/// Outward padding (normalized units) applied to projected boxes so that
/// rounding in the closed-form bounds never excludes a boundary pixel.
const BOX_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view in degrees.
    pub horizontal_fov: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            width: 4000,
            height: 3000,
            horizontal_fov: 98.7,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::domain("image dimensions must be positive"));
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < 180.0) {
            return Err(Error::domain(format!(
                "horizontal field of view must lie in (0, 180), got {}",
                self.horizontal_fov
            )));
        }
        Ok(())
    }

    /// Focal length in pixels, shared by both image axes.
    pub fn focal_length(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.horizontal_fov.to_radians() / 2.0).tan()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    /// Vertical field of view implied by the shared focal length, degrees.
    pub fn vertical_fov(&self) -> f64 {
        2.0 * (self.height as f64 / 2.0 / self.focal_length()).atan().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Gantry head reference position, mm.
    pub position: WorldPoint,
    /// Azimuth in degrees, 0 along +X, counter-clockwise seen from above.
    pub pan: f64,
    /// Elevation in degrees, 0 horizontal, -90 straight down.
    pub tilt: f64,
    /// Optical center relative to the head reference, expressed in the
    /// camera frame after pan and tilt.
    #[serde(default = "zero_offset")]
    pub head_offset: Vector3<f64>,
}

fn zero_offset() -> Vector3<f64> {
    Vector3::zeros()
}

impl CameraPose {
    pub fn new(position: [f64; 3], pan: f64, tilt: f64) -> Self {
        Self {
            position: Point3::from(position),
            pan,
            tilt,
            head_offset: Vector3::zeros(),
        }
    }

    /// Level camera looking along +X.
    pub fn at(position: [f64; 3]) -> Self {
        Self::new(position, 0.0, 0.0)
    }

    pub fn position_array(&self) -> [f64; 3] {
        [self.position.x, self.position.y, self.position.z]
    }

    pub fn validate(&self) -> Result<()> {
        if !(-180.0..=180.0).contains(&self.pan) {
            return Err(Error::domain(format!("pan {} outside [-180, 180]", self.pan)));
        }
        if !(-90.0..=90.0).contains(&self.tilt) {
            return Err(Error::domain(format!("tilt {} outside [-90, 90]", self.tilt)));
        }
        Ok(())
    }

    /// Rotation taking world-frame vectors to camera-frame vectors. Rows are
    /// the camera's forward, left and up axes expressed in world coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sp, cp) = self.pan.to_radians().sin_cos();
        let (st, ct) = self.tilt.to_radians().sin_cos();
        Matrix3::new(
            ct * cp, ct * sp, st, //
            -sp, cp, 0.0, //
            -st * cp, -st * sp, ct,
        )
    }

    /// World position of the optical center.
    pub fn optical_center(&self) -> WorldPoint {
        self.position + self.rotation().transpose() * self.head_offset
    }

    /// Polar angle measured from the zenith, degrees.
    pub fn polar(&self) -> f64 {
        90.0 - self.tilt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingSphere {
    pub center: WorldPoint,
    pub radius: f64,
}

/// Axis-aligned box in normalized image coordinates (top-left origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl NormalizedBox {
    pub const FULL: NormalizedBox = NormalizedBox {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::Geometry(format!("invalid normalized box {b:?}")))
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..1.0).contains(&self.x_min)
            && self.x_min < self.x_max
            && self.x_max <= 1.0
            && (0.0..1.0).contains(&self.y_min)
            && self.y_min < self.y_max
            && self.y_max <= 1.0
    }

    /// Whether the normalized point lies inside the closed box.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains_box(&self, other: &NormalizedBox) -> bool {
        self.x_min <= other.x_min
            && self.x_max >= other.x_max
            && self.y_min <= other.y_min
            && self.y_max >= other.y_max
    }

    /// The same box with x mirrored about the vertical center line.
    pub fn mirrored_x(&self) -> Self {
        Self {
            x_min: 1.0 - self.x_max,
            x_max: 1.0 - self.x_min,
            ..*self
        }
    }
}

/// Unclipped image-plane extent of a projected sphere, normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageExtent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl ImageExtent {
    /// Intersection with the image, or `None` if nothing of it is visible.
    pub fn clip(&self) -> Option<NormalizedBox> {
        let b = NormalizedBox {
            x_min: self.x_min.max(0.0),
            x_max: self.x_max.min(1.0),
            y_min: self.y_min.max(0.0),
            y_max: self.y_max.min(1.0),
        };
        (b.x_min < b.x_max && b.y_min < b.y_max && b.x_min < 1.0 && b.y_min < 1.0).then_some(b)
    }
}

/// Axis-aligned cuboid in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Volume {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if !(self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i]) {
                return Err(Error::domain(format!("degenerate volume {self:?}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_xy(&self, p: [f64; 3]) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    /// Distance in the XY plane from `p` to the nearest side wall, together
    /// with the inward unit normal of that wall.
    pub fn nearest_side(&self, p: [f64; 3]) -> (f64, [f64; 2]) {
        let sides = [
            (p[0] - self.min[0], [1.0, 0.0]),
            (self.max[0] - p[0], [-1.0, 0.0]),
            (p[1] - self.min[1], [0.0, 1.0]),
            (self.max[1] - p[1], [0.0, -1.0]),
        ];
        sides
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("four sides")
    }
}

/// Which family of camera poses a plant location admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PositionClass {
    /// On the boundary of the traversable volume: a half-cylinder of poses.
    Edge,
    /// Inside the volume: full circles at several heights.
    Interior,
}

impl PositionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionClass::Edge => "Edge",
            PositionClass::Interior => "Interior",
        }
    }
}

impl std::fmt::Display for PositionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn world_to_camera(pose: &CameraPose, p: &WorldPoint) -> CameraPoint {
    pose.rotation() * (p - pose.optical_center())
}

pub fn camera_to_world(pose: &CameraPose, c: &CameraPoint) -> WorldPoint {
    pose.optical_center() + pose.rotation().transpose() * c
}

/// Rectilinear projection of a camera-frame point to pixel coordinates.
pub fn camera_to_image(c: &CameraPoint, k: &CameraIntrinsics) -> Result<PixelPoint> {
    if !(c.x > 0.0) {
        return Err(Error::BehindCamera(c.x));
    }
    let f = k.focal_length();
    let (cu, cv) = k.principal_point();
    Ok(PixelPoint {
        u: cu + f * (-c.y / c.x),
        v: cv - f * (c.z / c.x),
    })
}

pub fn world_to_image(pose: &CameraPose, p: &WorldPoint, k: &CameraIntrinsics) -> Result<PixelPoint> {
    camera_to_image(&world_to_camera(pose, p), k)
}

/// Camera-frame direction (unnormalized, unit forward component) of the ray
/// through a pixel.
pub fn pixel_direction(px: &PixelPoint, k: &CameraIntrinsics) -> CameraPoint {
    let f = k.focal_length();
    let (cu, cv) = k.principal_point();
    Vector3::new(1.0, -(px.u - cu) / f, -(px.v - cv) / f)
}

/// World-frame ray `(origin, direction)` through a pixel.
pub fn pixel_ray(pose: &CameraPose, px: &PixelPoint, k: &CameraIntrinsics) -> (WorldPoint, Vector3<f64>) {
    let dir = pose.rotation().transpose() * pixel_direction(px, k);
    (pose.optical_center(), dir)
}

/// Tangent-line slopes `t` (as in `lateral = t * forward`) bounding a sphere
/// centered at `(forward, lateral)` with the given radius.
fn tangent_slopes(forward: f64, lateral: f64, radius: f64) -> (f64, f64) {
    let denom = forward * forward - radius * radius;
    let root = radius * (forward * forward + lateral * lateral - radius * radius).sqrt();
    let a = (forward * lateral - root) / denom;
    let b = (forward * lateral + root) / denom;
    (a, b)
}

/// Exact image-plane extent of a sphere's silhouette, before clipping.
pub fn sphere_extent(
    pose: &CameraPose,
    sphere: &BoundingSphere,
    k: &CameraIntrinsics,
) -> Result<ImageExtent> {
    if !(sphere.radius > 0.0) {
        return Err(Error::domain(format!(
            "sphere radius must be positive, got {}",
            sphere.radius
        )));
    }
    let c = world_to_camera(pose, &sphere.center);
    if c.norm() <= sphere.radius {
        return Err(Error::Geometry("camera is inside the bounding sphere".into()));
    }
    if c.x <= sphere.radius {
        return Err(Error::Geometry(
            "bounding sphere is not entirely in front of the camera".into(),
        ));
    }
    let f = k.focal_length();
    let (cu, cv) = k.principal_point();
    let (w, h) = (k.width as f64, k.height as f64);
    let (ty_lo, ty_hi) = tangent_slopes(c.x, c.y, sphere.radius);
    let (tz_lo, tz_hi) = tangent_slopes(c.x, c.z, sphere.radius);
    // u decreases with y, v decreases with z
    Ok(ImageExtent {
        x_min: (cu - f * ty_hi) / w - BOX_PAD,
        x_max: (cu - f * ty_lo) / w + BOX_PAD,
        y_min: (cv - f * tz_hi) / h - BOX_PAD,
        y_max: (cv - f * tz_lo) / h + BOX_PAD,
    })
}

/// Normalized box containing the whole image of the sphere, clipped to the
/// image. `Ok(None)` means the sphere projects entirely outside the frame.
pub fn project_sphere_box(
    pose: &CameraPose,
    sphere: &BoundingSphere,
    k: &CameraIntrinsics,
) -> Result<Option<NormalizedBox>> {
    Ok(sphere_extent(pose, sphere, k)?.clip())
}

/// Intersects the ray through `px` with the horizontal plane `z = plane_z`.
pub fn image_to_world(
    pose: &CameraPose,
    px: &PixelPoint,
    plane_z: f64,
    k: &CameraIntrinsics,
) -> Result<WorldPoint> {
    let (origin, dir) = pixel_ray(pose, px, k);
    if dir.z == 0.0 {
        return Err(Error::NoIntersection(plane_z));
    }
    let t = (plane_z - origin.z) / dir.z;
    if !(t > 0.0) {
        return Err(Error::NoIntersection(plane_z));
    }
    let mut p = origin + dir * t;
    p.z = plane_z;
    Ok(p)
}

/// Pan and tilt (degrees) that put `target` on the optical axis of a camera
/// whose optical center is at `camera`.
pub fn aim_at(camera: &WorldPoint, target: &WorldPoint) -> Result<(f64, f64)> {
    let d = target - camera;
    if d.norm() == 0.0 {
        return Err(Error::domain("cannot aim at the camera's own position"));
    }
    let horizontal = d.x.hypot(d.y);
    let pan = if horizontal == 0.0 {
        0.0
    } else {
        d.y.atan2(d.x).to_degrees()
    };
    let tilt = d.z.atan2(horizontal).to_degrees();
    Ok((pan, tilt))
}

/// Rings of camera positions around a plant, parameterised by horizontal
/// radius and height above the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRings {
    /// Horizontal distances from the target, mm.
    pub radii: Vec<f64>,
    /// Heights above the target, mm.
    pub heights: Vec<f64>,
    pub count_per_ring: usize,
}

impl Default for PoseRings {
    fn default() -> Self {
        Self {
            radii: vec![250.0],
            heights: vec![450.0],
            count_per_ring: 4,
        }
    }
}

/// Camera poses around `target`, all aimed at it. Edge locations get arcs
/// spanning the half-plane that faces into the volume; interior locations
/// get full circles. Poses outside `volume` are dropped.
pub fn generate_poses(
    target: &WorldPoint,
    class: PositionClass,
    rings: &PoseRings,
    volume: &Volume,
) -> Result<Vec<CameraPose>> {
    let t = [target.x, target.y, target.z];
    if !volume.contains_xy(t) {
        return Err(Error::domain("target lies outside the volume footprint"));
    }
    if rings.count_per_ring == 0 || rings.radii.is_empty() || rings.heights.is_empty() {
        return Err(Error::domain("pose rings need at least one radius, height and pose"));
    }
    let n = rings.count_per_ring;
    let azimuths: Vec<f64> = match class {
        PositionClass::Interior => (0..n)
            .map(|i| std::f64::consts::TAU * i as f64 / n as f64)
            .collect(),
        PositionClass::Edge => {
            let (_, inward) = volume.nearest_side(t);
            let facing = inward[1].atan2(inward[0]);
            (0..n)
                .map(|i| {
                    facing - std::f64::consts::FRAC_PI_2
                        + std::f64::consts::PI * (i as f64 + 0.5) / n as f64
                })
                .collect()
        }
    };

    let mut poses = Vec::new();
    for &h in &rings.heights {
        for &r in &rings.radii {
            for &phi in &azimuths {
                let p = [t[0] + r * phi.cos(), t[1] + r * phi.sin(), t[2] + h];
                if !volume.contains(p) {
                    continue;
                }
                let position = Point3::from(p);
                let Ok((pan, tilt)) = aim_at(&position, target) else {
                    continue;
                };
                poses.push(CameraPose {
                    position,
                    pan,
                    tilt,
                    head_offset: Vector3::zeros(),
                });
            }
        }
    }
    if poses.is_empty() {
        return Err(Error::NoFeasiblePoses);
    }
    Ok(poses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, Rotation3, Translation3};
    use proptest::prelude::*;

    fn homogeneous_oracle(pose: &CameraPose) -> Matrix4<f64> {
        // world -> camera as  R_tilt * R_pan^-1 * T(-center)
        let pan = Rotation3::from_axis_angle(&Vector3::z_axis(), pose.pan.to_radians());
        let tilt = Rotation3::from_axis_angle(&Vector3::y_axis(), pose.tilt.to_radians());
        let head_to_world = pan * tilt.inverse();
        let center = pose.position + head_to_world * pose.head_offset;
        let world_to_cam = head_to_world.inverse();
        world_to_cam.to_homogeneous()
            * Translation3::new(-center.x, -center.y, -center.z).to_homogeneous()
    }

    fn angle_oracle(c: &CameraPoint, k: &CameraIntrinsics) -> PixelPoint {
        let bearing = (-c.y).atan2(c.x);
        let elevation = c.z.atan2(c.x.hypot(c.y));
        let f = k.focal_length();
        // tan(elevation) along the bearing plane, then back to the image plane
        PixelPoint {
            u: k.width as f64 / 2.0 + f * bearing.tan(),
            v: k.height as f64 / 2.0 - f * elevation.tan() / bearing.cos(),
        }
    }

    #[test]
    fn identity_pose() {
        let pose = CameraPose::at([0.0, 0.0, 0.0]);
        let c = world_to_camera(&pose, &Point3::new(100.0, 0.0, 0.0));
        assert_relative_eq!(c, Vector3::new(100.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn pan_ninety() {
        let pose = CameraPose::new([0.0, 0.0, 0.0], 90.0, 0.0);
        let c = world_to_camera(&pose, &Point3::new(0.0, 100.0, 0.0));
        assert_relative_eq!(c, Vector3::new(100.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn principal_point_and_edges() {
        let k = CameraIntrinsics::default();
        let px = camera_to_image(&Vector3::new(500.0, 0.0, 0.0), &k).unwrap();
        assert_relative_eq!(px.u, 2000.0, epsilon = 1e-9);
        assert_relative_eq!(px.v, 1500.0, epsilon = 1e-9);
        // bearing of +49.35 deg to the right (negative y)
        let half = (k.horizontal_fov / 2.0).to_radians();
        let c = Vector3::new(half.cos(), -half.sin(), 0.0) * 300.0;
        let px = camera_to_image(&c, &k).unwrap();
        assert_relative_eq!(px.u, 4000.0, epsilon = 1e-9);
        let c = Vector3::new(half.cos(), half.sin(), 0.0) * 300.0;
        assert_relative_eq!(camera_to_image(&c, &k).unwrap().u, 0.0, epsilon = 1e-9);
        assert!(matches!(
            camera_to_image(&Vector3::new(0.0, 1.0, 1.0), &k),
            Err(Error::BehindCamera(_))
        ));
        assert!(camera_to_image(&Vector3::new(-1.0, 0.0, 0.0), &k).is_err());
    }

    #[test]
    fn vertical_fov_from_aspect() {
        let k = CameraIntrinsics::default();
        let expected = 2.0 * (0.75 * (98.7f64.to_radians() / 2.0).tan()).atan();
        assert_relative_eq!(k.vertical_fov(), expected.to_degrees(), epsilon = 1e-9);
    }

    #[test]
    fn on_axis_sphere_box() {
        let k = CameraIntrinsics::default();
        let pose = CameraPose::at([0.0, 0.0, 0.0]);
        let (d, r) = (1000.0f64, 100.0f64);
        let sphere = BoundingSphere {
            center: Point3::new(d, 0.0, 0.0),
            radius: r,
        };
        let b = project_sphere_box(&pose, &sphere, &k).unwrap().unwrap();
        let half = k.focal_length() * (r / d).asin().tan();
        assert_relative_eq!(b.x_min, 0.5 - half / 4000.0, epsilon = 1e-8);
        assert_relative_eq!(b.x_max, 0.5 + half / 4000.0, epsilon = 1e-8);
        assert_relative_eq!(b.y_min, 0.5 - half / 3000.0, epsilon = 1e-8);
        assert_relative_eq!(b.y_max, 0.5 + half / 3000.0, epsilon = 1e-8);
    }

    #[test]
    fn tiny_sphere_collapses_to_center_projection() {
        let k = CameraIntrinsics::default();
        let pose = CameraPose::new([100.0, 200.0, 500.0], 30.0, -40.0);
        let center = Point3::new(600.0, 500.0, 0.0);
        let px = world_to_image(&pose, &center, &k).unwrap();
        let b = project_sphere_box(&pose, &BoundingSphere { center, radius: 1e-9 }, &k)
            .unwrap()
            .unwrap();
        assert_relative_eq!(b.x_min, px.u / 4000.0, epsilon = 1e-8);
        assert_relative_eq!(b.x_max, px.u / 4000.0, epsilon = 1e-8);
        assert_relative_eq!(b.y_min, px.v / 3000.0, epsilon = 1e-8);
        assert_relative_eq!(b.y_max, px.v / 3000.0, epsilon = 1e-8);
    }

    #[test]
    fn sphere_errors() {
        let k = CameraIntrinsics::default();
        let pose = CameraPose::at([0.0, 0.0, 0.0]);
        let inside = BoundingSphere {
            center: Point3::new(10.0, 0.0, 0.0),
            radius: 20.0,
        };
        assert!(matches!(project_sphere_box(&pose, &inside, &k), Err(Error::Geometry(_))));
        let straddling = BoundingSphere {
            center: Point3::new(10.0, 100.0, 0.0),
            radius: 20.0,
        };
        assert!(matches!(project_sphere_box(&pose, &straddling, &k), Err(Error::Geometry(_))));
        let outside = BoundingSphere {
            center: Point3::new(100.0, 10000.0, 0.0),
            radius: 20.0,
        };
        assert_eq!(project_sphere_box(&pose, &outside, &k).unwrap(), None);
    }

    #[test]
    fn straight_down_principal_ray_hits_floor_below() {
        let k = CameraIntrinsics::default();
        let pose = CameraPose::new([300.0, 400.0, 600.0], 0.0, -90.0);
        let p = image_to_world(&pose, &PixelPoint { u: 2000.0, v: 1500.0 }, -150.0, &k).unwrap();
        assert_relative_eq!(p, Point3::new(300.0, 400.0, -150.0), epsilon = 1e-9);
        // looking level at a plane below the horizon from above: up half misses
        let level = CameraPose::at([0.0, 0.0, 100.0]);
        assert!(image_to_world(&level, &PixelPoint { u: 2000.0, v: 1500.0 }, 0.0, &k).is_err());
        assert!(image_to_world(&level, &PixelPoint { u: 2000.0, v: 100.0 }, 0.0, &k).is_err());
        assert!(image_to_world(&level, &PixelPoint { u: 2000.0, v: 2900.0 }, 0.0, &k).is_ok());
    }

    #[test]
    fn aim_conventions() {
        let cam = Point3::new(0.0, 0.0, 100.0);
        let (pan, tilt) = aim_at(&cam, &Point3::new(50.0, 0.0, 100.0)).unwrap();
        assert_eq!((pan, tilt), (0.0, 0.0));
        let (pan, tilt) = aim_at(&cam, &Point3::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!((pan, tilt), (0.0, -90.0));
        assert!(aim_at(&cam, &cam).is_err());
    }

    #[test]
    fn interior_ring_reprojects_to_center() {
        let k = CameraIntrinsics::default();
        let volume = Volume::new([0.0, 0.0, -200.0], [1150.0, 840.0, 718.0]);
        let target = Point3::new(575.0, 420.0, -150.0);
        let rings = PoseRings {
            radii: vec![200.0],
            heights: vec![500.0],
            count_per_ring: 8,
        };
        let poses = generate_poses(&target, PositionClass::Interior, &rings, &volume).unwrap();
        assert_eq!(poses.len(), 8);
        for pose in &poses {
            let px = world_to_image(pose, &target, &k).unwrap();
            assert!((px.u - 2000.0).abs() < 1e-6 && (px.v - 1500.0).abs() < 1e-6);
        }
        let single = PoseRings {
            radii: vec![200.0],
            heights: vec![500.0],
            count_per_ring: 1,
        };
        assert_eq!(
            generate_poses(&target, PositionClass::Interior, &single, &volume)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn edge_arc_faces_inward() {
        let volume = Volume::new([0.0, 0.0, -200.0], [1150.0, 840.0, 718.0]);
        let rings = PoseRings {
            radii: vec![150.0, 300.0],
            heights: vec![300.0, 500.0],
            count_per_ring: 7,
        };
        for target in [
            Point3::new(0.0, 420.0, -150.0),
            Point3::new(1150.0, 300.0, -150.0),
            Point3::new(500.0, 0.0, -150.0),
            Point3::new(700.0, 840.0, -150.0),
        ] {
            let (_, n) = volume.nearest_side([target.x, target.y, target.z]);
            let poses = generate_poses(&target, PositionClass::Edge, &rings, &volume).unwrap();
            assert_eq!(poses.len(), 28);
            for pose in poses {
                let d = pose.position - target;
                assert!(d.x * n[0] + d.y * n[1] >= 0.0);
                assert!(volume.contains(pose.position_array()));
            }
        }
    }

    #[test]
    fn infeasible_rings() {
        let volume = Volume::new([0.0, 0.0, 0.0], [100.0, 100.0, 100.0]);
        let rings = PoseRings {
            radii: vec![1000.0],
            heights: vec![50.0],
            count_per_ring: 4,
        };
        assert!(matches!(
            generate_poses(&Point3::new(50.0, 50.0, 0.0), PositionClass::Interior, &rings, &volume),
            Err(Error::NoFeasiblePoses)
        ));
    }

    fn arb_pose() -> impl Strategy<Value = CameraPose> {
        (
            prop::array::uniform3(0.0f64..1000.0),
            -180.0f64..180.0,
            -90.0f64..90.0,
            prop::array::uniform3(-50.0f64..50.0),
        )
            .prop_map(|(p, pan, tilt, off)| CameraPose {
                position: Point3::from(p),
                pan,
                tilt,
                head_offset: Vector3::from(off),
            })
    }

    proptest! {
        #[test]
        fn matches_homogeneous_oracle(pose in arb_pose(), p in prop::array::uniform3(-2000.0f64..2000.0)) {
            let p = Point3::from(p);
            let ours = world_to_camera(&pose, &p);
            let h = homogeneous_oracle(&pose) * p.to_homogeneous();
            let oracle = Vector3::new(h.x, h.y, h.z);
            prop_assert!((ours - oracle).norm() <= 1e-9 * oracle.norm().max(1.0));
        }

        #[test]
        fn isometry(pose in arb_pose(), a in prop::array::uniform3(-2000.0f64..2000.0), b in prop::array::uniform3(-2000.0f64..2000.0)) {
            let (a, b) = (Point3::from(a), Point3::from(b));
            let d0 = (a - b).norm();
            let d1 = (world_to_camera(&pose, &a) - world_to_camera(&pose, &b)).norm();
            prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
        }

        #[test]
        fn projection_matches_angle_oracle(c in (1.0f64..1000.0, -500.0f64..500.0, -500.0f64..500.0)) {
            let k = CameraIntrinsics::default();
            let c = Vector3::new(c.0, c.1, c.2);
            let ours = camera_to_image(&c, &k).unwrap();
            let oracle = angle_oracle(&c, &k);
            let scale = ours.u.abs().max(ours.v.abs()).max(1.0);
            prop_assert!((ours.u - oracle.u).abs() <= 1e-9 * scale);
            prop_assert!((ours.v - oracle.v).abs() <= 1e-9 * scale);
        }

        #[test]
        fn aiming_centers_target(cam in prop::array::uniform3(0.0f64..1000.0), tgt in prop::array::uniform3(-500.0f64..1500.0)) {
            let (cam, tgt) = (Point3::from(cam), Point3::from(tgt));
            prop_assume!((tgt - cam).norm() > 1.0);
            let (pan, tilt) = aim_at(&cam, &tgt).unwrap();
            let pose = CameraPose { position: cam, pan, tilt, head_offset: Vector3::zeros() };
            let c = world_to_camera(&pose, &tgt);
            let d = (tgt - cam).norm();
            prop_assert!((c.x - d).abs() < 1e-9 * d);
            prop_assert!(c.y.abs() < 1e-9 * d && c.z.abs() < 1e-9 * d);
        }

        #[test]
        fn box_monotone_in_radius(
            pose in arb_pose(),
            center in prop::array::uniform3(-2000.0f64..2000.0),
            r1 in 1.0f64..200.0,
            dr in 0.0f64..200.0,
        ) {
            let k = CameraIntrinsics::default();
            let small = BoundingSphere { center: Point3::from(center), radius: r1 };
            let big = BoundingSphere { center: Point3::from(center), radius: r1 + dr };
            if let (Ok(a), Ok(b)) = (sphere_extent(&pose, &small, &k), sphere_extent(&pose, &big, &k)) {
                prop_assert!(b.x_min <= a.x_min && b.x_max >= a.x_max);
                prop_assert!(b.y_min <= a.y_min && b.y_max >= a.y_max);
            }
        }

        #[test]
        fn floor_round_trip(
            pos in prop::array::uniform3(0.0f64..700.0),
            pan in -180.0f64..180.0,
            tilt in -90.0f64..-10.0,
            target in (-500.0f64..1500.0, -500.0f64..1500.0),
        ) {
            let k = CameraIntrinsics::default();
            let pose = CameraPose::new(pos, pan, tilt);
            let p = Point3::new(target.0, target.1, -150.0);
            let c = world_to_camera(&pose, &p);
            prop_assume!(c.x > 1.0);
            let px = camera_to_image(&c, &k).unwrap();
            let back = image_to_world(&pose, &px, -150.0, &k).unwrap();
            let again = world_to_image(&pose, &back, &k).unwrap();
            prop_assert!((again.u - px.u).hypot(again.v - px.v) < 1e-6);
        }
    }
}
