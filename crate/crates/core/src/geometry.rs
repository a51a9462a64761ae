//! Pinhole projection chain: Euler rotation, world to camera, camera to pixel.
//!
//! Pixel convention: `u` is the column and grows to the right, `v` is the row
//! and grows downward, origin at the top-left corner of the image. The camera
//! frame has its optical axis along `+Z`; a point with positive camera `Y`
//! lands above the principal point (smaller `v`).

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points closer to the image plane than this (meters) count as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
}

/// Rotation angles in radians: `omega` about x, `phi` about y, `kappa` about z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub omega: f64,
    pub phi: f64,
    pub kappa: f64,
}

impl EulerAngles {
    pub const fn new(omega: f64, phi: f64, kappa: f64) -> Self {
        Self { omega, phi, kappa }
    }

    pub fn from_degrees(omega: f64, phi: f64, kappa: f64) -> Self {
        Self::new(omega.to_radians(), phi.to_radians(), kappa.to_radians())
    }
}

/// Proper rotation matrix. Its columns are the camera axes expressed in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn about_x(omega: f64) -> Self {
        let (s, c) = omega.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(kappa: f64) -> Self {
        let (s, c) = kappa.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Recovers `(omega, phi, kappa)` such that `build_rotation` reproduces this matrix.
    /// At gimbal lock (`phi = ±π/2`) kappa is set to zero.
    pub fn to_euler(&self) -> EulerAngles {
        let m = &self.0;
        let sin_phi = m[(0, 2)].clamp(-1.0, 1.0);
        let phi = sin_phi.asin();
        if sin_phi.abs() < 1.0 - 1e-12 {
            EulerAngles::new(
                (-m[(1, 2)]).atan2(m[(2, 2)]),
                phi,
                (-m[(0, 1)]).atan2(m[(0, 0)]),
            )
        } else {
            EulerAngles::new(m[(2, 1)].atan2(m[(1, 1)]), phi, 0.0)
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// `max |(RᵀR - I)_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

/// `R = Rx(omega) · Ry(phi) · Rz(kappa)`, right-hand rule.
pub fn build_rotation(angles: EulerAngles) -> RotationMatrix {
    RotationMatrix::about_x(angles.omega)
        * RotationMatrix::about_y(angles.phi)
        * RotationMatrix::about_z(angles.kappa)
}

/// A point in the world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A point in the camera frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl CameraPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Camera pose: `rotation` and the projection center `translation` in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    pub rotation: RotationMatrix,
    pub translation: WorldPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub focal_length: f64,
    pub cx: f64,
    pub cy: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl CameraIntrinsics {
    /// Principal point at the image center.
    pub fn centered(focal_length: f64, image_width: u32, image_height: u32) -> Self {
        Self {
            focal_length,
            cx: image_width as f64 / 2.0,
            cy: image_height as f64 / 2.0,
            image_width,
            image_height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.focal_length > 0.0
            && self.cx >= 0.0
            && self.cx < self.image_width as f64
            && self.cy >= 0.0
            && self.cy < self.image_height as f64
    }

    /// Calibration matrix with the negative `v` sign folded in.
    pub fn calibration_matrix(&self) -> Matrix3<f64> {
        let f = self.focal_length;
        Matrix3::new(f, 0.0, self.cx, 0.0, -f, self.cy, 0.0, 0.0, 1.0)
    }
}

/// `P_c = Rᵀ (P_w - T)`.
pub fn world_to_camera(p: WorldPoint, ext: &CameraExtrinsics) -> CameraPoint {
    let rel = p.to_vector() - ext.translation.to_vector();
    CameraPoint::from_vector(ext.rotation.matrix().transpose() * rel)
}

/// Inverse of [`world_to_camera`]: `P_w = R P_c + T`.
pub fn camera_to_world(p: CameraPoint, ext: &CameraExtrinsics) -> WorldPoint {
    WorldPoint::from_vector(ext.rotation.matrix() * p.to_vector() + ext.translation.to_vector())
}

/// `u = f X/Z + c_x`, `v = -f Y/Z + c_y`.
pub fn camera_to_pixel(
    p: CameraPoint,
    intr: &CameraIntrinsics,
) -> Result<PixelPoint, ProjectionError> {
    if p.z <= MIN_DEPTH {
        return Err(ProjectionError::BehindCamera { depth: p.z });
    }
    let f = intr.focal_length;
    Ok(PixelPoint::new(
        f * p.x / p.z + intr.cx,
        -f * p.y / p.z + intr.cy,
    ))
}

/// Row-major 3×4 homogeneous projection matrix, as exported by photogrammetry tools.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(Matrix3x4<f64>);

impl ProjectionMatrix {
    pub fn from_row_slice(values: &[f64; 12]) -> Self {
        Self(Matrix3x4::from_row_slice(values))
    }

    pub fn from_matrix(m: Matrix3x4<f64>) -> Self {
        Self(m)
    }

    /// `K · [Rᵀ | -RᵀT]` with the same sign conventions as [`camera_to_pixel`].
    pub fn from_decomposed(ext: &CameraExtrinsics, intr: &CameraIntrinsics) -> Self {
        let rt = ext.rotation.matrix().transpose();
        let t = -(rt * ext.translation.to_vector());
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Self(intr.calibration_matrix() * m)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    pub fn to_row_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                out[r * 4 + c] = self.0[(r, c)];
            }
        }
        out
    }

    fn depth_row_norm(&self) -> f64 {
        self.0.fixed_view::<1, 3>(2, 0).norm()
    }

    /// Depth of a point along the optical axis, normalised by the third row's scale.
    pub fn depth(&self, p: WorldPoint) -> f64 {
        let h = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        h.z / self.depth_row_norm()
    }

    /// Homogeneous projection followed by division by the third coordinate.
    pub fn project(&self, p: WorldPoint) -> Result<PixelPoint, ProjectionError> {
        let h = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        let depth = h.z / self.depth_row_norm();
        if depth <= MIN_DEPTH {
            return Err(ProjectionError::BehindCamera { depth });
        }
        Ok(PixelPoint::new(h.x / h.z, h.y / h.z))
    }

    /// Horizontal focal length in pixels assuming zero skew: `|p1 × p3| / |p3|²`.
    pub fn focal_length(&self) -> f64 {
        let p1 = self.0.fixed_view::<1, 3>(0, 0).transpose();
        let p3 = self.0.fixed_view::<1, 3>(2, 0).transpose();
        p1.cross(&p3).norm() / p3.norm_squared()
    }
}

/// Everything needed to project world points into one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraModel {
    Decomposed {
        extrinsics: CameraExtrinsics,
        intrinsics: CameraIntrinsics,
    },
    Matrix {
        pmatrix: ProjectionMatrix,
        image_width: u32,
        image_height: u32,
        /// Overrides the focal length estimated from the matrix.
        focal_length: Option<f64>,
    },
}

impl CameraModel {
    pub fn image_size(&self) -> (u32, u32) {
        match self {
            CameraModel::Decomposed { intrinsics, .. } => {
                (intrinsics.image_width, intrinsics.image_height)
            }
            CameraModel::Matrix {
                image_width,
                image_height,
                ..
            } => (*image_width, *image_height),
        }
    }

    pub fn focal_length(&self) -> f64 {
        match self {
            CameraModel::Decomposed { intrinsics, .. } => intrinsics.focal_length,
            CameraModel::Matrix {
                pmatrix,
                focal_length,
                ..
            } => focal_length.unwrap_or_else(|| pmatrix.focal_length()),
        }
    }

    /// Camera-frame depth of `p` (may be negative).
    pub fn depth(&self, p: WorldPoint) -> f64 {
        match self {
            CameraModel::Decomposed { extrinsics, .. } => world_to_camera(p, extrinsics).z,
            CameraModel::Matrix { pmatrix, .. } => pmatrix.depth(p),
        }
    }

    pub fn to_projection_matrix(&self) -> ProjectionMatrix {
        match self {
            CameraModel::Decomposed {
                extrinsics,
                intrinsics,
            } => ProjectionMatrix::from_decomposed(extrinsics, intrinsics),
            CameraModel::Matrix { pmatrix, .. } => *pmatrix,
        }
    }
}

pub fn project_world_point(
    p: WorldPoint,
    model: &CameraModel,
) -> Result<PixelPoint, ProjectionError> {
    match model {
        CameraModel::Decomposed {
            extrinsics,
            intrinsics,
        } => camera_to_pixel(world_to_camera(p, extrinsics), intrinsics),
        CameraModel::Matrix { pmatrix, .. } => pmatrix.project(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    type M3 = [[f64; 3]; 3];

    // Plain-array oracle, independent of nalgebra.
    fn mul(a: M3, b: M3) -> M3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn oracle_rotation(o: f64, p: f64, k: f64) -> M3 {
        let rx = [[1.0, 0.0, 0.0], [0.0, o.cos(), -o.sin()], [0.0, o.sin(), o.cos()]];
        let ry = [[p.cos(), 0.0, p.sin()], [0.0, 1.0, 0.0], [-p.sin(), 0.0, p.cos()]];
        let rz = [[k.cos(), -k.sin(), 0.0], [k.sin(), k.cos(), 0.0], [0.0, 0.0, 1.0]];
        mul(mul(rx, ry), rz)
    }

    fn assert_rows_close(got: [[f64; 3]; 3], want: M3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (got[i][j] - want[i][j]).abs() <= tol,
                    "({i},{j}): {} vs {}",
                    got[i][j],
                    want[i][j]
                );
            }
        }
    }

    #[test]
    fn zero_angles_give_identity() {
        let r = build_rotation(EulerAngles::default());
        assert_rows_close(r.to_rows(), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.0);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = build_rotation(EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        assert_rows_close(r.to_rows(), [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 1e-15);
    }

    #[test]
    fn quarter_turns_on_all_axes() {
        let want = [[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]];
        assert_rows_close(oracle_rotation(FRAC_PI_2, FRAC_PI_2, FRAC_PI_2), want, 1e-15);
        let r = build_rotation(EulerAngles::new(FRAC_PI_2, FRAC_PI_2, FRAC_PI_2));
        assert_rows_close(r.to_rows(), want, 1e-15);
    }

    #[test]
    fn world_to_camera_cases() {
        let ext = CameraExtrinsics {
            rotation: RotationMatrix::identity(),
            translation: WorldPoint::new(1.0, 2.0, 3.0),
        };
        assert_eq!(world_to_camera(ext.translation, &ext), CameraPoint::new(0.0, 0.0, 0.0));
        assert_eq!(
            world_to_camera(WorldPoint::new(2.0, 2.0, 3.0), &ext),
            CameraPoint::new(1.0, 0.0, 0.0)
        );

        let ext = CameraExtrinsics {
            rotation: RotationMatrix::about_z(FRAC_PI_2),
            translation: WorldPoint::default(),
        };
        let pc = world_to_camera(WorldPoint::new(1.0, 0.0, 0.0), &ext);
        assert!(pc.x.abs() < 1e-15 && (pc.y + 1.0).abs() < 1e-15 && pc.z.abs() < 1e-15);
    }

    #[test]
    fn camera_to_pixel_cases() {
        let intr = CameraIntrinsics::centered(1000.0, 5472, 3648);
        let px = camera_to_pixel(CameraPoint::new(0.0, 0.0, 5.0), &intr).unwrap();
        assert_eq!(px, PixelPoint::new(2736.0, 1824.0));

        let px = camera_to_pixel(CameraPoint::new(1.0, -1.0, 10.0), &intr).unwrap();
        assert_eq!(px, PixelPoint::new(2836.0, 1924.0));

        assert!(matches!(
            camera_to_pixel(CameraPoint::new(1.0, 1.0, 0.0), &intr),
            Err(ProjectionError::BehindCamera { .. })
        ));
        assert!(camera_to_pixel(CameraPoint::new(1.0, 1.0, -3.0), &intr).is_err());
    }

    #[test]
    fn identity_pmatrix_homogeneous_path() {
        let p = ProjectionMatrix::from_row_slice(&[
            100.0, 0.0, 0.0, 0.0, //
            0.0, 100.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ]);
        let model = CameraModel::Matrix {
            pmatrix: p,
            image_width: 200,
            image_height: 200,
            focal_length: None,
        };
        let px = project_world_point(WorldPoint::new(1.0, 1.0, 10.0), &model).unwrap();
        assert!((px.u - 10.0).abs() < 1e-12 && (px.v - 10.0).abs() < 1e-12);
        assert!((model.focal_length() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let intr = CameraIntrinsics::centered(3650.0, 5472, 3648);
        let model = CameraModel::Decomposed {
            extrinsics: CameraExtrinsics {
                rotation: RotationMatrix::identity(),
                translation: WorldPoint::default(),
            },
            intrinsics: intr,
        };
        let px = project_world_point(WorldPoint::new(0.0, 0.0, 12.0), &model).unwrap();
        assert_eq!(px, PixelPoint::new(intr.cx, intr.cy));
    }

    #[test]
    fn euler_round_trip() {
        let a = EulerAngles::new(-2.1, 0.4, 3.0);
        let r = build_rotation(a);
        let back = build_rotation(r.to_euler());
        assert!((r.matrix() - back.matrix()).amax() < 1e-12);
    }

    fn extrinsics_strategy() -> impl Strategy<Value = CameraExtrinsics> {
        (-PI..PI, -PI..PI, -PI..PI, -100.0..100.0f64, -100.0..100.0f64, 0.0..80.0f64).prop_map(
            |(o, p, k, x, y, z)| CameraExtrinsics {
                rotation: build_rotation(EulerAngles::new(o, p, k)),
                translation: WorldPoint::new(x, y, z),
            },
        )
    }

    proptest! {
        #[test]
        fn rotation_is_proper(o in -10.0..10.0f64, p in -10.0..10.0f64, k in -10.0..10.0f64) {
            let r = build_rotation(EulerAngles::new(o, p, k));
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
            prop_assert!(r.orthonormality_error() <= 1e-9);
            assert_rows_close(r.to_rows(), oracle_rotation(o, p, k), 1e-12);
        }

        #[test]
        fn camera_world_round_trip(
            ext in extrinsics_strategy(),
            x in -50.0..50.0f64, y in -50.0..50.0f64, z in 0.01..200.0f64,
        ) {
            let pc = CameraPoint::new(x, y, z);
            let back = world_to_camera(camera_to_world(pc, &ext), &ext);
            prop_assert!((back.to_vector() - pc.to_vector()).amax() <= 1e-9);
        }

        #[test]
        fn projection_is_ray_invariant(
            x in -50.0..50.0f64, y in -50.0..50.0f64, z in 0.1..200.0f64, lambda in 0.01..100.0f64,
        ) {
            let intr = CameraIntrinsics::centered(3650.0, 5472, 3648);
            let pc = CameraPoint::new(x, y, z);
            let a = camera_to_pixel(pc, &intr).unwrap();
            let b = camera_to_pixel(pc.scaled(lambda), &intr).unwrap();
            prop_assert!((a.u - b.u).abs() <= 1e-9 && (a.v - b.v).abs() <= 1e-9);
        }

        #[test]
        fn kappa_rotates_x_axis_by_kappa(k in -PI..PI) {
            let r = build_rotation(EulerAngles::new(0.0, 0.0, k));
            let v = r.matrix() * Vector3::new(1.0, 0.0, 0.0);
            prop_assert!((v.y.atan2(v.x) - k).abs() < 1e-12 || (v.y.atan2(v.x) - k).abs() > 2.0 * PI - 1e-12);
        }

        #[test]
        fn decomposed_and_matrix_paths_agree(
            ext in extrinsics_strategy(),
            x in -20.0..20.0f64, y in -20.0..20.0f64, z in 1.0..100.0f64,
        ) {
            let intrinsics = CameraIntrinsics::centered(3650.0, 5472, 3648);
            let pw = camera_to_world(CameraPoint::new(x, y, z), &ext);
            let decomposed = CameraModel::Decomposed { extrinsics: ext, intrinsics };
            let matrix = CameraModel::Matrix {
                pmatrix: decomposed.to_projection_matrix(),
                image_width: 5472,
                image_height: 3648,
                focal_length: None,
            };
            let a = project_world_point(pw, &decomposed).unwrap();
            let b = project_world_point(pw, &matrix).unwrap();
            prop_assert!((a.u - b.u).abs() <= 1e-6 && (a.v - b.v).abs() <= 1e-6);
            prop_assert!((decomposed.depth(pw) - matrix.depth(pw)).abs() <= 1e-9);
            prop_assert!((matrix.focal_length() - 3650.0).abs() <= 1e-6);
        }
    }
}
