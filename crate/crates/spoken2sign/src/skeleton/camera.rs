//! Pinhole camera with rigid extrinsics, and the 2D/3D point containers.

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole intrinsics plus a world-to-camera rigid transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    /// Focal length in pixels (shared by both axes).
    pub focal: f64,
    /// Principal point in pixels.
    pub principal_point: [f64; 2],
    /// World-to-camera rotation (orthonormal, det +1).
    pub extrinsic_rotation: Matrix3<f64>,
    /// World-to-camera translation in meters.
    pub extrinsic_translation: Vector3<f64>,
}

impl CameraParams {
    pub fn new(
        focal: f64,
        principal_point: [f64; 2],
        extrinsic_rotation: Matrix3<f64>,
        extrinsic_translation: Vector3<f64>,
    ) -> Result<Self> {
        let cam = CameraParams {
            focal,
            principal_point,
            extrinsic_rotation,
            extrinsic_translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Identity extrinsics with the given intrinsics.
    pub fn frontal(focal: f64, principal_point: [f64; 2], distance: f64) -> Self {
        CameraParams {
            focal,
            principal_point,
            extrinsic_rotation: Matrix3::identity(),
            extrinsic_translation: Vector3::new(0.0, 0.0, distance),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "camera focal must be positive, got {}",
                self.focal
            )));
        }
        let r = &self.extrinsic_rotation;
        if (r.transpose() * r - Matrix3::identity()).norm() > 1e-8 {
            return Err(Error::InvalidConfig(
                "extrinsic rotation is not orthonormal".into(),
            ));
        }
        if (r.determinant() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidConfig(
                "extrinsic rotation must have determinant +1".into(),
            ));
        }
        Ok(())
    }

    /// World point to camera frame.
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.extrinsic_rotation * p + self.extrinsic_translation
    }

    /// Pinhole projection of a camera-frame point.
    pub fn project_point(&self, p: &Vector3<f64>, landmark: usize) -> Result<Vector2<f64>> {
        if p.z <= 1e-6 {
            return Err(Error::BehindCamera {
                landmark,
                depth: p.z,
            });
        }
        Ok(Vector2::new(
            self.focal * p.x / p.z + self.principal_point[0],
            self.focal * p.y / p.z + self.principal_point[1],
        ))
    }

    /// Jacobian of the pinhole projection at a camera-frame point.
    pub fn projection_jacobian(&self, p: &Vector3<f64>) -> Matrix2x3<f64> {
        let inv_z = 1.0 / p.z;
        Matrix2x3::new(
            self.focal * inv_z,
            0.0,
            -self.focal * p.x * inv_z * inv_z,
            0.0,
            self.focal * inv_z,
            -self.focal * p.y * inv_z * inv_z,
        )
    }
}

/// Camera-frame landmark positions for one frame; the z coordinate is the
/// camera depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joints3D {
    pub coords: Vec<Vector3<f64>>,
}

impl Joints3D {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn depth(&self, i: usize) -> f64 {
        self.coords[i].z
    }

    /// The subset of landmarks selected by `indices`, in their order.
    pub fn select(&self, indices: &[usize]) -> Vec<Vector3<f64>> {
        indices.iter().map(|&i| self.coords[i]).collect()
    }
}

/// 2D keypoints with confidences, one entry per tree landmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoints2D {
    pub coords: Vec<[f64; 2]>,
    pub confidence: Vec<f64>,
}

impl Keypoints2D {
    pub fn new(coords: Vec<[f64; 2]>, confidence: Vec<f64>) -> Result<Self> {
        if coords.len() != confidence.len() {
            return Err(Error::DimensionMismatch {
                what: "keypoint confidences".into(),
                expected: coords.len(),
                found: confidence.len(),
            });
        }
        for (i, &w) in confidence.iter().enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidConfig(format!(
                    "confidence {w} of landmark {i} outside [0, 1]"
                )));
            }
        }
        Ok(Keypoints2D { coords, confidence })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Projects every landmark; fails on the first non-positive depth, naming
/// the landmark.
pub fn project(joints: &Joints3D, cam: &CameraParams) -> Result<Keypoints2D> {
    let mut coords = Vec::with_capacity(joints.len());
    for (i, p) in joints.coords.iter().enumerate() {
        let uv = cam.project_point(p, i)?;
        coords.push([uv.x, uv.y]);
    }
    let confidence = vec![1.0; joints.len()];
    Ok(Keypoints2D { coords, confidence })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraParams {
        CameraParams::frontal(1000.0, [500.0, 500.0], 0.0)
    }

    #[test]
    fn on_axis_point_hits_principal_point() {
        let j = Joints3D {
            coords: vec![Vector3::new(0.0, 0.0, 2.0)],
        };
        let k = project(&j, &cam()).unwrap();
        assert_eq!(k.coords[0], [500.0, 500.0]);
    }

    #[test]
    fn similar_triangles() {
        let j = Joints3D {
            coords: vec![Vector3::new(0.2, 0.0, 2.0)],
        };
        let k = project(&j, &cam()).unwrap();
        assert_eq!(k.coords[0], [600.0, 500.0]);
    }

    #[test]
    fn batch_matches_scalar_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cam = cam();
        let coords: Vec<Vector3<f64>> = (0..64)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..5.0),
                )
            })
            .collect();
        let j = Joints3D {
            coords: coords.clone(),
        };
        let k = project(&j, &cam).unwrap();
        for (i, p) in coords.iter().enumerate() {
            // scalar pinhole formula applied pointwise
            let u = 1000.0 * p.x / p.z + 500.0;
            let v = 1000.0 * p.y / p.z + 500.0;
            assert_eq!(k.coords[i], [u, v]);
        }
    }

    #[test]
    fn behind_camera_names_landmark() {
        let j = Joints3D {
            coords: vec![Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.0, 0.0, -0.1)],
        };
        match project(&j, &cam()) {
            Err(Error::BehindCamera { landmark, .. }) => assert_eq!(landmark, 1),
            other => panic!("expected BehindCamera, got {other:?}"),
        }
    }

    #[test]
    fn projection_jacobian_matches_finite_differences() {
        let cam = cam();
        let p = Vector3::new(0.3, -0.2, 2.5);
        let jac = cam.projection_jacobian(&p);
        let h = 1e-7;
        for c in 0..3 {
            let mut plus = p;
            let mut minus = p;
            plus[c] += h;
            minus[c] -= h;
            let fp = cam.project_point(&plus, 0).unwrap();
            let fm = cam.project_point(&minus, 0).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            assert!((jac.column(c) - fd).norm() < 1e-5);
        }
    }

    #[test]
    fn rejects_invalid_rotation() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = 2.0;
        assert!(CameraParams::new(1000.0, [0.0, 0.0], r, Vector3::zeros()).is_err());
    }

    #[test]
    fn keypoints_reject_out_of_range_confidence() {
        assert!(Keypoints2D::new(vec![[0.0, 0.0]], vec![1.2]).is_err());
    }
}
