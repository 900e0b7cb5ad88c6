//! Scene grounding. Detections (label + pixel box) are mapped to the robot
//! frame through a planar homography and rendered as a short text block for
//! the executor prompt.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ItemKind, Location, Point, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("homography is not invertible")]
    SingularHomography,
    #[error("calibration file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    pub fn center(&self) -> Point {
        Point::new((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub score: f64,
}

/// Pixel to robot-frame mapping, normalized so that `h[(2, 2)] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    h: Matrix3<f64>,
    h_inv: Matrix3<f64>,
    pub image_size: (u32, u32),
}

fn apply(m: &Matrix3<f64>, p: Point) -> Point {
    let r = m * Vector3::new(p.x, p.y, 1.0);
    Point::new(r.x / r.z, r.y / r.z)
}

impl Calibration {
    pub fn new(h: Matrix3<f64>, image_size: (u32, u32)) -> Result<Self, VisionError> {
        let scale = h[(2, 2)];
        if !scale.is_finite() || scale.abs() < 1e-12 {
            return Err(VisionError::SingularHomography);
        }
        let h = h / scale;
        if h.determinant().abs() <= 1e-12 {
            return Err(VisionError::SingularHomography);
        }
        let h_inv = h.try_inverse().ok_or(VisionError::SingularHomography)?;
        Ok(Calibration { h, h_inv, image_size })
    }

    pub fn identity(image_size: (u32, u32)) -> Self {
        Self::new(Matrix3::identity(), image_size).expect("identity is invertible")
    }

    /// Parse 9 row-major homography values followed by width and height.
    /// `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, VisionError> {
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let v: f64 = token
                    .parse()
                    .map_err(|_| VisionError::File(format!("not a number: '{token}'")))?;
                values.push(v);
            }
        }
        if values.len() != 11 {
            return Err(VisionError::File(format!(
                "expected 11 values (9 homography entries, width, height), found {}",
                values.len()
            )));
        }
        let (w, h) = (values[9], values[10]);
        if w <= 0.0 || h <= 0.0 || w.fract() != 0.0 || h.fract() != 0.0 {
            return Err(VisionError::File("image size must be positive integers".into()));
        }
        Self::new(Matrix3::from_row_slice(&values[..9]), (w as u32, h as u32))
    }

    pub fn from_path(path: &Path) -> Result<Self, VisionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VisionError::File(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn builtin() -> Self {
        Self::from_text(include_str!("../fixtures/calibration.txt")).expect("builtin calibration")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn pixel_to_robot(&self, pixel: Point) -> Point {
        apply(&self.h, pixel)
    }

    pub fn robot_to_pixel(&self, robot: Point) -> Point {
        apply(&self.h_inv, robot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub pixel: Point,
    pub robot: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomographyFit {
    pub h: Matrix3<f64>,
    /// Largest distance, in pixels, between a pixel point and its robot point
    /// mapped back through the fitted homography.
    pub max_reprojection_error: f64,
}

/// Similarity transform taking points to zero mean and mean distance sqrt(2).
fn normalizer(points: &[Point]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / n;
    if mean_dist.is_nan() || mean_dist <= f64::EPSILON {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn collinear(a: Point, b: Point, c: Point, scale: f64) -> bool {
    let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    cross.abs() <= 1e-9 * scale * scale
}

/// Normalized DLT fit of `H` with `robot ~ H * pixel`.
pub fn fit_homography(pairs: &[Correspondence]) -> Result<HomographyFit, VisionError> {
    let n = pairs.len();
    if n < 4 {
        return Err(VisionError::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {n}"
        )));
    }
    let pixels: Vec<Point> = pairs.iter().map(|c| c.pixel).collect();
    let robots: Vec<Point> = pairs.iter().map(|c| c.robot).collect();
    if pixels.iter().chain(&robots).any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(VisionError::DegenerateConfiguration("non-finite coordinate".into()));
    }
    let degenerate = || VisionError::DegenerateConfiguration("points do not span the plane".into());
    let t_pix = normalizer(&pixels).ok_or_else(degenerate)?;
    let t_rob = normalizer(&robots).ok_or_else(degenerate)?;

    if n == 4 {
        let extent = pixels
            .iter()
            .flat_map(|p| pixels.iter().map(move |q| p.distance(*q)))
            .fold(0.0, f64::max);
        for i in 0..4 {
            let others: Vec<Point> = (0..4).filter(|j| *j != i).map(|j| pixels[j]).collect();
            if collinear(others[0], others[1], others[2], extent) {
                return Err(VisionError::DegenerateConfiguration(
                    "three pixel points are collinear".into(),
                ));
            }
        }
    }

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in pixels.iter().zip(&robots).enumerate() {
        let p = apply(&t_pix, *p);
        let q = apply(&t_rob, *q);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = -p.x;
        a[(r0, 1)] = -p.y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = q.x * p.x;
        a[(r0, 7)] = q.x * p.y;
        a[(r0, 8)] = q.x;
        a[(r1, 3)] = -p.x;
        a[(r1, 4)] = -p.y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = q.y * p.x;
        a[(r1, 7)] = q.y * p.y;
        a[(r1, 8)] = q.y;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(degenerate)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = svd.singular_values[order[order.len() - 1]];
    // A one-dimensional null space is required; a second tiny singular value
    // means the correspondences leave H underdetermined.
    if svd.singular_values[second] <= 1e-10 * largest {
        return Err(VisionError::DegenerateConfiguration(
            "linear system is rank-deficient".into(),
        ));
    }
    let h_vec = v_t.row(smallest);
    let h_norm = Matrix3::from_fn(|r, c| h_vec[3 * r + c]);
    let t_rob_inv = t_rob.try_inverse().ok_or_else(degenerate)?;
    let mut h = t_rob_inv * h_norm * t_pix;
    let scale = h[(2, 2)];
    if scale.abs() > f64::EPSILON {
        h /= scale;
    }
    let h_inv = h.try_inverse().ok_or(VisionError::SingularHomography)?;
    if h.determinant().abs() <= 1e-12 * h.norm().powi(3) {
        return Err(VisionError::SingularHomography);
    }
    let max_reprojection_error = pairs
        .iter()
        .map(|c| apply(&h_inv, c.robot).distance(c.pixel))
        .fold(0.0, f64::max);
    Ok(HomographyFit {
        h,
        max_reprojection_error,
    })
}

/// Anything that can find labelled objects. The synthetic detector reads the
/// simulator; a camera-backed detector would ignore `world`.
pub trait Detector {
    fn detect(&self, world: &WorldState, queries: &[String]) -> Vec<Detection>;
}

/// Oracle detector: projects true poses into the image.
#[derive(Debug, Clone)]
pub struct SyntheticDetector {
    pub calibration: Calibration,
}

impl SyntheticDetector {
    pub fn new(calibration: Calibration) -> Self {
        SyntheticDetector { calibration }
    }
}

/// Nominal box size in pixels (width, height) by object kind.
fn nominal_size(kind: &ItemKind) -> (f64, f64) {
    match kind {
        ItemKind::Cup => (60.0, 80.0),
        ItemKind::Container { .. } => (80.0, 100.0),
        ItemKind::Utensil(_) => (90.0, 50.0),
        ItemKind::Appliance => (300.0, 200.0),
    }
}

impl Detector for SyntheticDetector {
    fn detect(&self, world: &WorldState, queries: &[String]) -> Vec<Detection> {
        world
            .objects
            .values()
            // Held items and loaded racks are out of the camera's view.
            .filter(|o| matches!(o.location, Location::Zone(_)))
            .filter(|o| queries.iter().any(|q| q.trim() == o.label))
            .map(|o| {
                let c = self.calibration.robot_to_pixel(o.pose);
                let (w, h) = nominal_size(&o.kind);
                Detection {
                    label: o.label.clone(),
                    bbox: BBox {
                        u_min: c.x - w / 2.0,
                        v_min: c.y - h / 2.0,
                        u_max: c.x + w / 2.0,
                        v_max: c.y + h / 2.0,
                    },
                    score: 1.0,
                }
            })
            .collect()
    }
}

/// `detect(w, queries)` with the synthetic detector.
pub fn detect(world: &WorldState, cal: &Calibration, queries: &[String]) -> Vec<Detection> {
    SyntheticDetector::new(cal.clone()).detect(world, queries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub entries: Vec<SceneEntry>,
    pub rendered: String,
}

pub const EMPTY_SCENE: &str = "No objects found in the scene.";

fn two_decimals(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn describe_scene(dets: &[Detection], cal: &Calibration) -> SceneDescription {
    let mut entries: Vec<SceneEntry> = dets
        .iter()
        .map(|d| {
            let p = cal.pixel_to_robot(d.bbox.center());
            SceneEntry {
                label: d.label.clone(),
                x: p.x,
                y: p.y,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
    });
    let rendered = if entries.is_empty() {
        EMPTY_SCENE.to_string()
    } else {
        let mut text = String::from("Objects in the scene (robot frame, meters):\n");
        for e in &entries {
            text.push_str(&format!(
                "- {} at ({}, {})\n",
                e.label,
                two_decimals(e.x),
                two_decimals(e.y)
            ));
        }
        text
    };
    SceneDescription { entries, rendered }
}

/// Detect every label of the world's vocabulary and describe the result.
pub fn refresh_scene(world: &WorldState, cal: &Calibration) -> SceneDescription {
    describe_scene(&detect(world, cal, &world.vocabulary()), cal)
}
