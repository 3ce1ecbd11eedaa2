//! Array-of-subarrays geometry.
//!
//! Each array is `Q` uniform linear subarrays of `Q̄` elements laid end to
//! end along the local Z axis, then rotated by intrinsic Z-Y-X Euler angles
//! and translated to its center.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two points are treated as coincident.
const COINCIDENT_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Angle in `[0, π]` between two non-zero vectors.
    pub fn angle_to(self, other: Vec3) -> f64 {
        let c = self.dot(other) / (self.norm() * other.norm());
        c.clamp(-1.0, 1.0).acos()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Proper rotation matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Intrinsic Z-Y-X (yaw, pitch, roll) rotation, angles in degrees:
    /// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_euler_deg(euler: [f64; 3]) -> Self {
        let [a, b, g] = euler.map(f64::to_radians);
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sg, cg) = g.sin_cos();
        Rotation([
            [ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg],
            [sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg],
            [-sb, cb * sg, cb * cg],
        ])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Number of subarrays `Q`.
    pub num_sas: usize,
    /// Elements per subarray `Q̄`.
    pub aes_per_sa: usize,
    /// Element spacing `δ`, meters.
    pub ae_spacing: f64,
    /// Center-to-center subarray spacing `Δ`, meters.
    pub sa_spacing: f64,
    pub center: Vec3,
    /// Intrinsic Z-Y-X Euler angles, degrees.
    pub euler_deg: [f64; 3],
}

impl ArrayConfig {
    /// Array with adjacent, non-overlapping subarrays (`Δ = Q̄·δ`), centered at
    /// the origin with no rotation.
    pub fn contiguous(num_sas: usize, aes_per_sa: usize, ae_spacing: f64) -> Self {
        Self {
            num_sas,
            aes_per_sa,
            ae_spacing,
            sa_spacing: aes_per_sa as f64 * ae_spacing,
            center: Vec3::ZERO,
            euler_deg: [0.0; 3],
        }
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        self.center = center;
        self
    }

    pub fn with_euler_deg(mut self, euler_deg: [f64; 3]) -> Self {
        self.euler_deg = euler_deg;
        self
    }

    pub fn num_elements(&self) -> usize {
        self.num_sas * self.aes_per_sa
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sas == 0 || self.aes_per_sa == 0 {
            return Err(Error::InvalidConfig(format!(
                "array needs at least one subarray and one element per subarray (Q={}, Q̄={})",
                self.num_sas, self.aes_per_sa
            )));
        }
        if !(self.ae_spacing > 0.0) || !(self.sa_spacing > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "spacings must be positive (δ={}, Δ={})",
                self.ae_spacing, self.sa_spacing
            )));
        }
        let span = self.aes_per_sa as f64 * self.ae_spacing;
        if self.num_sas > 1 && self.sa_spacing < span * (1.0 - 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "subarrays overlap: Δ={} < Q̄·δ={}",
                self.sa_spacing, span
            )));
        }
        if !self.euler_deg.iter().all(|a| a.is_finite())
            || ![self.center.x, self.center.y, self.center.z].iter().all(|c| c.is_finite())
        {
            return Err(Error::InvalidConfig("non-finite center or orientation".into()));
        }
        Ok(())
    }
}

/// Element coordinates of a built array.
#[derive(Clone, Debug, PartialEq)]
pub struct AePositions {
    num_sas: usize,
    aes_per_sa: usize,
    ae_spacing: f64,
    coords: Vec<Vec3>,
    sa_centers: Vec<Vec3>,
    axis: Vec3,
}

impl AePositions {
    pub fn num_sas(&self) -> usize {
        self.num_sas
    }

    pub fn aes_per_sa(&self) -> usize {
        self.aes_per_sa
    }

    pub fn ae_spacing(&self) -> f64 {
        self.ae_spacing
    }

    /// Position of element `n` of subarray `q`.
    pub fn element(&self, q: usize, n: usize) -> Vec3 {
        self.coords[q * self.aes_per_sa + n]
    }

    /// All elements of subarray `q`, in element order.
    pub fn subarray(&self, q: usize) -> &[Vec3] {
        &self.coords[q * self.aes_per_sa..(q + 1) * self.aes_per_sa]
    }

    pub fn sa_center(&self, q: usize) -> Vec3 {
        self.sa_centers[q]
    }

    pub fn sa_centers(&self) -> &[Vec3] {
        &self.sa_centers
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    /// Unit vector along the array line (the rotated local Z axis).
    pub fn axis(&self) -> Vec3 {
        self.axis
    }
}

pub fn build_array(cfg: &ArrayConfig) -> Result<AePositions> {
    cfg.validate()?;
    let rot = Rotation::from_euler_deg(cfg.euler_deg);
    let axis = rot.apply(Vec3::new(0.0, 0.0, 1.0));
    let q_mid = (cfg.num_sas as f64 - 1.0) / 2.0;
    let n_mid = (cfg.aes_per_sa as f64 - 1.0) / 2.0;

    let sa_centers: Vec<Vec3> = (0..cfg.num_sas)
        .map(|q| cfg.center + axis * ((q as f64 - q_mid) * cfg.sa_spacing))
        .collect();
    let coords = sa_centers
        .iter()
        .flat_map(|&c| {
            (0..cfg.aes_per_sa).map(move |n| c + axis * ((n as f64 - n_mid) * cfg.ae_spacing))
        })
        .collect();

    Ok(AePositions {
        num_sas: cfg.num_sas,
        aes_per_sa: cfg.aes_per_sa,
        ae_spacing: cfg.ae_spacing,
        coords,
        sa_centers,
        axis,
    })
}

/// One propagation path. Reflected paths bounce once off a point scatterer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathSpec {
    LineOfSight,
    Reflected {
        scatterer: Vec3,
        /// Complex reflection coefficient, `|Γ| ≤ 1`.
        reflection: Complex64,
    },
}

impl PathSpec {
    pub fn is_los(&self) -> bool {
        matches!(self, PathSpec::LineOfSight)
    }

    /// Reflection coefficient (1 for line of sight).
    pub fn reflection(&self) -> Complex64 {
        match self {
            PathSpec::LineOfSight => Complex64::new(1.0, 0.0),
            PathSpec::Reflected { reflection, .. } => *reflection,
        }
    }

    /// First point after leaving `tx`, used for the departure direction.
    fn first_hop(&self, rx: Vec3) -> Vec3 {
        match self {
            PathSpec::LineOfSight => rx,
            PathSpec::Reflected { scatterer, .. } => *scatterer,
        }
    }

    /// Last point before reaching `rx`, used for the arrival direction.
    fn last_hop(&self, tx: Vec3) -> Vec3 {
        match self {
            PathSpec::LineOfSight => tx,
            PathSpec::Reflected { scatterer, .. } => *scatterer,
        }
    }
}

/// A path set with exactly one line-of-sight component.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet(Vec<PathSpec>);

impl PathSet {
    pub fn new(paths: Vec<PathSpec>) -> Result<Self> {
        let los = paths.iter().filter(|p| p.is_los()).count();
        if los != 1 {
            return Err(Error::InvalidInput(format!(
                "a path set needs exactly one line-of-sight path, got {los}"
            )));
        }
        for p in &paths {
            if let PathSpec::Reflected { reflection, scatterer } = p {
                if reflection.norm() > 1.0 + 1e-12 || !reflection.norm().is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "reflection coefficient magnitude {} exceeds 1",
                        reflection.norm()
                    )));
                }
                if ![scatterer.x, scatterer.y, scatterer.z].iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidInput("non-finite scatterer position".into()));
                }
            }
        }
        Ok(Self(paths))
    }

    pub fn line_of_sight() -> Self {
        Self(vec![PathSpec::LineOfSight])
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn segment(a: Vec3, b: Vec3) -> Result<f64> {
    let d = a.distance(b);
    let scale = a.norm().max(b.norm()).max(1.0);
    if d <= COINCIDENT_EPS * scale {
        return Err(Error::DegenerateGeometry(format!(
            "coincident points {a:?} and {b:?}"
        )));
    }
    Ok(d)
}

/// Propagation length of `path` between two points, meters.
pub fn path_length(p_tx: Vec3, p_rx: Vec3, path: &PathSpec) -> Result<f64> {
    match path {
        PathSpec::LineOfSight => segment(p_tx, p_rx),
        PathSpec::Reflected { scatterer, .. } => {
            Ok(segment(p_tx, *scatterer)? + segment(*scatterer, p_rx)?)
        }
    }
}

/// Subarray-level path parameters between two subarray centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaPairGeometry {
    /// Path length between the subarray centers, meters.
    pub distance: f64,
    /// Angle of departure, radians: between the Tx axis and the direction of
    /// travel of the outgoing segment.
    pub aod: f64,
    /// Angle of arrival, radians: between the Rx axis and the direction of
    /// travel of the incoming segment.
    pub aoa: f64,
}

pub fn sa_pair_geometry(
    tx: &AePositions,
    rx: &AePositions,
    q_t: usize,
    q_r: usize,
    path: &PathSpec,
) -> Result<SaPairGeometry> {
    if q_t >= tx.num_sas() || q_r >= rx.num_sas() {
        return Err(Error::InvalidInput(format!(
            "subarray index out of range (q_t={q_t}/{}, q_r={q_r}/{})",
            tx.num_sas(),
            rx.num_sas()
        )));
    }
    let t = tx.sa_center(q_t);
    let r = rx.sa_center(q_r);
    let distance = path_length(t, r, path)?;
    let outgoing = path.first_hop(r) - t;
    let incoming = r - path.last_hop(t);
    Ok(SaPairGeometry {
        distance,
        aod: tx.axis().angle_to(outgoing),
        aoa: rx.axis().angle_to(incoming),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Vec3, b: Vec3) -> bool {
        a.distance(b) < 1e-15
    }

    #[test]
    fn two_elements_symmetric_about_center() {
        let cfg = ArrayConfig::contiguous(1, 2, 0.5e-3);
        let pos = build_array(&cfg).unwrap();
        assert!(close(pos.element(0, 0), Vec3::new(0.0, 0.0, -0.25e-3)));
        assert!(close(pos.element(0, 1), Vec3::new(0.0, 0.0, 0.25e-3)));
    }

    #[test]
    fn zero_euler_is_identity_and_array_lies_on_z() {
        assert_eq!(Rotation::from_euler_deg([0.0; 3]), Rotation::IDENTITY);
        let cfg = ArrayConfig::contiguous(3, 5, 1e-3).with_center(Vec3::new(1.0, 2.0, 3.0));
        let pos = build_array(&cfg).unwrap();
        for p in pos.coords() {
            assert_eq!(p.x, 1.0);
            assert_eq!(p.y, 2.0);
        }
    }

    #[test]
    fn quarter_turn_about_y_puts_subarrays_on_x() {
        // Hand oracle: Ry(90°) maps (0, 0, z) to (z, 0, 0).
        let cfg = ArrayConfig {
            num_sas: 2,
            aes_per_sa: 1,
            ae_spacing: 1e-3,
            sa_spacing: 1e-3,
            center: Vec3::ZERO,
            euler_deg: [0.0, 90.0, 0.0],
        };
        let pos = build_array(&cfg).unwrap();
        let c0 = pos.sa_center(0);
        let c1 = pos.sa_center(1);
        assert_abs_diff_eq!(c0.x, -0.5e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(c1.x, 0.5e-3, epsilon = 1e-15);
        for c in [c0, c1] {
            assert_abs_diff_eq!(c.y, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(c.z, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn spacing_is_exact() {
        let cfg = ArrayConfig::contiguous(4, 8, 0.5e-3).with_euler_deg([10.0, -20.0, 33.0]);
        let pos = build_array(&cfg).unwrap();
        for q in 0..4 {
            for n in 1..8 {
                let d = pos.element(q, n).distance(pos.element(q, n - 1));
                assert_abs_diff_eq!(d, 0.5e-3, epsilon = 1e-15);
            }
        }
        for q in 1..4 {
            let d = pos.sa_center(q).distance(pos.sa_center(q - 1));
            assert_abs_diff_eq!(d, 4e-3, epsilon = 1e-15);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let ok = ArrayConfig::contiguous(2, 4, 1e-3);
        for bad in [
            ArrayConfig { num_sas: 0, ..ok.clone() },
            ArrayConfig { aes_per_sa: 0, ..ok.clone() },
            ArrayConfig { ae_spacing: 0.0, ..ok.clone() },
            ArrayConfig { sa_spacing: -1.0, ..ok.clone() },
            ArrayConfig { sa_spacing: 2e-3, ..ok.clone() },
        ] {
            assert!(matches!(build_array(&bad), Err(Error::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn path_lengths() {
        let o = Vec3::ZERO;
        let los = PathSpec::LineOfSight;
        assert_eq!(path_length(o, Vec3::new(10.0, 0.0, 0.0), &los).unwrap(), 10.0);

        let nlos = PathSpec::Reflected {
            scatterer: Vec3::new(1.0, 1.0, 0.0),
            reflection: Complex64::new(0.3, 0.0),
        };
        let rx = Vec3::new(2.0, 0.0, 0.0);
        assert_abs_diff_eq!(path_length(o, rx, &nlos).unwrap(), 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(path_length(o, rx, &nlos).unwrap(), path_length(rx, o, &nlos).unwrap());
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let p = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(
            path_length(p, p, &PathSpec::LineOfSight),
            Err(Error::DegenerateGeometry(_))
        ));
        let on_tx = PathSpec::Reflected { scatterer: p, reflection: Complex64::new(0.1, 0.0) };
        assert!(path_length(p, Vec3::ZERO, &on_tx).is_err());
    }

    #[test]
    fn path_set_needs_single_los() {
        assert!(PathSet::new(vec![]).is_err());
        assert!(PathSet::new(vec![PathSpec::LineOfSight, PathSpec::LineOfSight]).is_err());
        let refl = PathSpec::Reflected {
            scatterer: Vec3::new(1.0, 1.0, 0.0),
            reflection: Complex64::new(0.0, 0.2),
        };
        assert!(PathSet::new(vec![refl]).is_err());
        assert_eq!(PathSet::new(vec![refl, PathSpec::LineOfSight]).unwrap().len(), 2);
        let too_strong = PathSpec::Reflected {
            scatterer: Vec3::new(1.0, 1.0, 0.0),
            reflection: Complex64::new(1.5, 0.0),
        };
        assert!(PathSet::new(vec![PathSpec::LineOfSight, too_strong]).is_err());
    }

    fn pair(rx_euler: [f64; 3], path: PathSpec) -> SaPairGeometry {
        let tx = build_array(&ArrayConfig::contiguous(1, 4, 0.5e-3)).unwrap();
        let rx = build_array(
            &ArrayConfig::contiguous(1, 4, 0.5e-3)
                .with_center(Vec3::new(5.0, 0.0, 0.0))
                .with_euler_deg(rx_euler),
        )
        .unwrap();
        sa_pair_geometry(&tx, &rx, 0, 0, &path).unwrap()
    }

    #[test]
    fn broadside_angles() {
        let g = pair([0.0; 3], PathSpec::LineOfSight);
        assert_abs_diff_eq!(g.aod, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.aoa, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(g.distance, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn endfire_departure() {
        let tx = build_array(&ArrayConfig::contiguous(1, 4, 0.5e-3)).unwrap();
        let rx = build_array(
            &ArrayConfig::contiguous(1, 4, 0.5e-3).with_center(Vec3::new(0.0, 0.0, 3.0)),
        )
        .unwrap();
        let g = sa_pair_geometry(&tx, &rx, 0, 0, &PathSpec::LineOfSight).unwrap();
        assert_abs_diff_eq!(g.aod, 0.0, epsilon = 1e-12);
        let back = sa_pair_geometry(&rx, &tx, 0, 0, &PathSpec::LineOfSight).unwrap();
        assert_abs_diff_eq!(back.aod, PI, epsilon = 1e-12);
    }

    #[test]
    fn rotated_receiver_arrival() {
        // Hand oracle: Ry(30°) turns the axis to (sin 30°, 0, cos 30°); the
        // LoS travels along +X so cos φ = sin 30°, φ = 90° − 30°.
        let g = pair([0.0, 30.0, 0.0], PathSpec::LineOfSight);
        assert_abs_diff_eq!(g.aoa, FRAC_PI_2 - 30f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn bad_indices() {
        let tx = build_array(&ArrayConfig::contiguous(2, 4, 0.5e-3)).unwrap();
        assert!(sa_pair_geometry(&tx, &tx, 2, 0, &PathSpec::LineOfSight).is_err());
    }
}
