//! Error statistics against ground truth.

use crate::error::{Error, Result};
use crate::frame::Pose2;
use crate::pointcloud::PointCloud;
use crate::rhs::Point2;

/// Root mean squared Euclidean distance between paired points.
pub fn compute_rmse(estimates: &[Point2], truth: &[Point2]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            estimates: estimates.len(),
            truth: truth.len(),
        });
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = estimates.iter().zip(truth).map(|(e, t)| (e - t).norm_squared()).sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

/// Nearest element of `candidates` for each query; `None` when there are
/// no candidates.
pub fn nearest(queries: &[Point2], candidates: &[Point2]) -> Option<Vec<Point2>> {
    if candidates.is_empty() {
        return None;
    }
    Some(
        queries
            .iter()
            .map(|q| {
                *candidates
                    .iter()
                    .min_by(|a, b| (*a - q).norm_squared().total_cmp(&(*b - q).norm_squared()))
                    .expect("non-empty")
            })
            .collect(),
    )
}

pub fn trajectory_rmse(estimates: &[Pose2], truth: &[Pose2]) -> Result<f64> {
    let e: Vec<Point2> = estimates.iter().map(|p| p.position()).collect();
    let t: Vec<Point2> = truth.iter().map(|p| p.position()).collect();
    compute_rmse(&e, &t)
}

/// RMSE from each true obstacle to its nearest estimated landmark.
pub fn landmark_rmse(landmarks: &[Point2], obstacles: &[Point2]) -> Option<f64> {
    let matched = nearest(obstacles, landmarks)?;
    compute_rmse(&matched, obstacles).ok()
}

/// RMSE from each cloud point, placed with the true pose of its cycle, to
/// its nearest true obstacle.
pub fn pointcloud_rmse(clouds: &[PointCloud], truth: &[Pose2], obstacles: &[Point2]) -> Option<f64> {
    let pts: Vec<Point2> = clouds
        .iter()
        .flat_map(|c| c.points.iter().map(move |p| p.map_position(&truth[c.cycle])))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let matched = nearest(&pts, obstacles)?;
    compute_rmse(&pts, &matched).ok()
}

/// Number of obstacles with a landmark within `radius`.
pub fn obstacles_found(landmarks: &[Point2], obstacles: &[Point2], radius: f64) -> usize {
    obstacles
        .iter()
        .filter(|o| landmarks.iter().any(|l| (l - *o).norm() <= radius))
        .count()
}
