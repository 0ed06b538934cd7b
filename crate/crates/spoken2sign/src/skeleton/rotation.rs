//! Axis-angle rotation utilities: Rodrigues' formula, its derivative, and
//! canonicalization of axis-angle triples.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Cross-product matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix for an axis-angle vector (angle = norm, axis = direction).
///
/// Returns the identity for `‖aa‖ < 1e-12`. Coefficients switch to a Taylor
/// expansion below 1e-4 rad to avoid cancellation.
pub fn rodrigues(aa: &Vector3<f64>) -> Matrix3<f64> {
    let theta = aa.norm();
    if theta < 1e-12 {
        return Matrix3::identity();
    }
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    let k = skew(aa);
    Matrix3::identity() + k * a + k * k * b
}

/// Partial derivatives of `rodrigues(aa)` with respect to the three
/// components of `aa`.
///
/// Uses the compact closed form
/// `∂R/∂v_i = (v_i [v]× + [v × (I − R) e_i]×) / ‖v‖² · R`,
/// degrading to the exact limit `[e_i]×` near zero.
pub fn rodrigues_jacobian(aa: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let theta_sq = aa.norm_squared();
    if theta_sq < 1e-12 {
        return [
            skew(&Vector3::x()),
            skew(&Vector3::y()),
            skew(&Vector3::z()),
        ];
    }
    let r = rodrigues(aa);
    let i_minus_r = Matrix3::identity() - r;
    let mut out = [Matrix3::zeros(); 3];
    for (i, slot) in out.iter_mut().enumerate() {
        let e_i = Vector3::ith(i, 1.0);
        let term = skew(aa) * aa[i] + skew(&aa.cross(&(i_minus_r * e_i)));
        *slot = term * r / theta_sq;
    }
    out
}

/// Recovers an axis-angle vector from a rotation matrix (inverse Rodrigues).
pub fn log_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = UnitQuaternion::from_matrix(r);
    q.scaled_axis()
}

/// Wraps an axis-angle triple so its norm lies in `[0, 2π)`.
///
/// The angle is first reduced modulo 2π; when the reduced angle exceeds π the
/// axis is flipped and the angle replaced by its 2π complement, yielding the
/// minimal equivalent rotation. The represented rotation is unchanged.
pub fn canonicalize_axis_angle(aa: &Vector3<f64>) -> Vector3<f64> {
    let theta = aa.norm();
    if theta < 1e-12 {
        return Vector3::zeros();
    }
    let axis = aa / theta;
    let mut t = theta % TWO_PI;
    let mut ax = axis;
    if t > std::f64::consts::PI {
        t = TWO_PI - t;
        ax = -ax;
    }
    ax * t
}

/// Spherical interpolation between two axis-angle rotations at parameter
/// `t ∈ [0, 1]`, always along the shorter arc.
pub fn slerp_axis_angle(a: &Vector3<f64>, b: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let qa = UnitQuaternion::from_scaled_axis(*a);
    let mut qb = UnitQuaternion::from_scaled_axis(*b);
    if qa.coords.dot(&qb.coords) < 0.0 {
        qb = UnitQuaternion::new_unchecked(-qb.into_inner());
    }
    let q = qa.slerp(&qb, t);
    q.scaled_axis()
}

/// Composes a rotation of `delta` radians about `axis` with the rotation
/// encoded by `aa` (the new rotation is applied after `aa` in world frame).
pub fn compose_rotation(aa: &Vector3<f64>, delta: f64, axis: &Vector3<f64>) -> Vector3<f64> {
    let r_delta = rodrigues(&(axis.normalize() * delta));
    let r = r_delta * rodrigues(aa);
    canonicalize_axis_angle(&log_rotation(&r))
}
