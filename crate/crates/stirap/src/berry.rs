//! Berry curvature, loop phases, solid angles, and monopole flux for the
//! two-level Hamiltonian H(r̄) = ½ σ̄·r̄.
//!
//! The spectrum degenerates at the origin of parameter space, where the
//! curvature field of each band is a monopole of strength ±½: V̄_± = ±½ r̂/R².
//! Loop phases are computed with the discrete overlap product, which is
//! manifestly gauge-invariant; solid angles are computed geometrically from
//! summed spherical-triangle excesses, giving an independent cross-check of
//! the phase–angle law γ_± = ∓½ ΔΩ.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::exec;
use crate::math::wrap_angle;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BerryError {
    #[error("parameter point at the spectral degeneracy (R = 0)")]
    DegeneratePoint,
    #[error("consecutive eigenvector overlap vanished at segment {segment}; path step too coarse")]
    OverlapVanished { segment: usize },
    #[error("path point at the origin: radial projection is ambiguous")]
    AmbiguousProjection,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid mesh: need n_theta ≥ 8 and n_phi ≥ 16, got {n_theta}×{n_phi}")]
    InvalidMesh { n_theta: usize, n_phi: usize },
}

/// A point in the 3-dimensional parameter space of the two-level Hamiltonian
/// (components in rad/time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint(pub [f64; 3]);

impl ParamPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self([x, y, z])
    }

    pub fn magnitude(&self) -> f64 {
        let [x, y, z] = self.0;
        (x * x + y * y + z * z).sqrt()
    }

    fn unit(&self) -> Result<[f64; 3], BerryError> {
        let r = self.magnitude();
        if r == 0.0 {
            return Err(BerryError::DegeneratePoint);
        }
        Ok([self.0[0] / r, self.0[1] / r, self.0[2] / r])
    }
}

/// Energy band of H = ½σ·r̄: eigenvalue ±R/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Plus,
    Minus,
}

impl Band {
    pub fn sign(&self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            Self::Plus => "plus",
            Self::Minus => "minus",
        }
    }
}

/// A closed loop in parameter space. The first point is not repeated;
/// closure back to it is implied. `orientation = -1` traverses the stored
/// points in reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedPath {
    points: Vec<ParamPoint>,
    orientation: i8,
}

impl ClosedPath {
    pub fn new(points: Vec<ParamPoint>, orientation: i8) -> Result<Self, BerryError> {
        if orientation != 1 && orientation != -1 {
            return Err(BerryError::InvalidPath(format!(
                "orientation must be +1 or -1, got {orientation}"
            )));
        }
        if points.len() < 3 {
            return Err(BerryError::InvalidPath(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.magnitude() == 0.0 {
                return Err(BerryError::InvalidPath(format!("point {i} at the origin")));
            }
            let next = points[(i + 1) % points.len()];
            if p == &next {
                return Err(BerryError::InvalidPath(format!(
                    "consecutive points {i} and {} coincide",
                    (i + 1) % points.len()
                )));
            }
        }
        Ok(Self { points, orientation })
    }

    /// The equator of a sphere of the given radius, traversed in increasing
    /// azimuth for `orientation = +1`.
    pub fn equator(radius: f64, n: usize, orientation: i8) -> Result<Self, BerryError> {
        Self::latitude(std::f64::consts::FRAC_PI_2, radius, n, orientation)
    }

    /// A circle of constant polar angle `theta` on a sphere of the given
    /// radius.
    pub fn latitude(theta: f64, radius: f64, n: usize, orientation: i8) -> Result<Self, BerryError> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(BerryError::InvalidPath(format!("radius must be > 0, got {radius}")));
        }
        if !(0.0..std::f64::consts::PI).contains(&theta) || theta == 0.0 {
            return Err(BerryError::InvalidPath(format!(
                "polar angle must lie strictly inside (0, π), got {theta}"
            )));
        }
        let (st, ct) = theta.sin_cos();
        let points = (0..n)
            .map(|i| {
                let phi = std::f64::consts::TAU * i as f64 / n as f64;
                ParamPoint::new(radius * st * phi.cos(), radius * st * phi.sin(), radius * ct)
            })
            .collect();
        Self::new(points, orientation)
    }

    /// Parse a path from CSV text with columns `x,y,z` (header optional).
    pub fn from_csv_str(text: &str, orientation: i8) -> Result<Self, BerryError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(BerryError::InvalidPath(format!(
                    "line {}: expected 3 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) => points.push(ParamPoint::new(v[0], v[1], v[2])),
                Err(_) if lineno == 0 => continue, // header row
                Err(e) => {
                    return Err(BerryError::InvalidPath(format!("line {}: {e}", lineno + 1)))
                }
            }
        }
        Self::new(points, orientation)
    }

    pub fn points(&self) -> &[ParamPoint] {
        &self.points
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    /// Points in traversal order (applies the orientation).
    fn traversal(&self) -> Vec<ParamPoint> {
        if self.orientation == 1 {
            self.points.clone()
        } else {
            self.points.iter().rev().copied().collect()
        }
    }
}

/// Loop-phase decomposition for one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerryResult {
    pub band: Band,
    /// Discrete loop phase, reported in (−π, π].
    pub loop_phase: f64,
    /// Signed solid angle subtended by the loop as seen from the degeneracy.
    pub solid_angle: f64,
    /// Monopole flux through the enclosed cap: ±½·ΔΩ for band ±.
    pub flux: f64,
    /// flux / 4π; equals the monopole strength ±½ for a full sphere.
    pub charge: f64,
}

/// Normalized eigenvector of H(r̄) = ½σ·r̄ for the chosen band, with the phase
/// fixed so the first nonvanishing component is real positive.
pub fn band_eigenvector(r: &ParamPoint, band: Band) -> Result<[C64; 2], BerryError> {
    let radius = r.magnitude();
    if radius == 0.0 {
        return Err(BerryError::DegeneratePoint);
    }
    let [x, y, z] = r.0;
    // Two algebraically equivalent forms; pick the numerically stable one for
    // each hemisphere (avoids cancellation near the poles).
    let (v0, v1) = match band {
        Band::Plus => {
            if z >= 0.0 {
                (C64::new(radius + z, 0.0), C64::new(x, y))
            } else {
                (C64::new(x, -y), C64::new(radius - z, 0.0))
            }
        }
        Band::Minus => {
            if z >= 0.0 {
                (C64::new(-x, y), C64::new(radius + z, 0.0))
            } else {
                (C64::new(radius - z, 0.0), C64::new(-x, -y))
            }
        }
    };
    let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    let mut v = [v0 / norm, v1 / norm];
    // pin the gauge: first nonvanishing component real positive
    let lead = if v[0].norm_sqr() > 1e-30 { v[0] } else { v[1] };
    let phase = lead / lead.norm();
    v[0] /= phase;
    v[1] /= phase;
    Ok(v)
}

fn pauli_element(bra: &[C64; 2], ket: &[C64; 2]) -> [C64; 3] {
    // ⟨bra| σ_i |ket⟩ for i = 1..3
    let sx = bra[0].conj() * ket[1] + bra[1].conj() * ket[0];
    let sy = (bra[0].conj() * ket[1] - bra[1].conj() * ket[0]) * C64::new(0.0, -1.0);
    let sz = bra[0].conj() * ket[0] - bra[1].conj() * ket[1];
    [sx, sy, sz]
}

/// Berry curvature of the chosen band at `r`, from the sum-over-states
/// formula with ∇H = ½σ̄ (the only other band is the partner band).
pub fn curvature_numeric(r: &ParamPoint, band: Band) -> Result<[f64; 3], BerryError> {
    let radius = r.magnitude();
    if radius == 0.0 {
        return Err(BerryError::DegeneratePoint);
    }
    let m = band_eigenvector(r, band)?;
    let n = band_eigenvector(
        r,
        match band {
            Band::Plus => Band::Minus,
            Band::Minus => Band::Plus,
        },
    )?;
    // M_i = ⟨m|∂H/∂r_i|n⟩ = ½⟨m|σ_i|n⟩; curvature = Im(M × M*) / (E_m−E_n)².
    let s = pauli_element(&m, &n);
    let mm: Vec<C64> = s.iter().map(|v| 0.5 * v).collect();
    let cross = [
        mm[1] * mm[2].conj() - mm[2] * mm[1].conj(),
        mm[2] * mm[0].conj() - mm[0] * mm[2].conj(),
        mm[0] * mm[1].conj() - mm[1] * mm[0].conj(),
    ];
    let de_sq = radius * radius; // (E_m − E_n)² = R²
    Ok([cross[0].im / de_sq, cross[1].im / de_sq, cross[2].im / de_sq])
}

/// The closed-form monopole field ±½ r̂/R², used as the independent oracle
/// for [`curvature_numeric`].
pub fn curvature_analytic(r: &ParamPoint, band: Band) -> Result<[f64; 3], BerryError> {
    let radius = r.magnitude();
    if radius == 0.0 {
        return Err(BerryError::DegeneratePoint);
    }
    let u = r.unit()?;
    let scale = band.sign() * 0.5 / (radius * radius);
    Ok([scale * u[0], scale * u[1], scale * u[2]])
}

/// Quadrature of the band curvature over a sphere of the given radius, with
/// the midpoint rule on a uniform (θ, φ) grid. Converges to ±2π and is
/// radius-independent.
///
/// Rows of constant θ are evaluated in parallel (with the `parallel`
/// feature); the reduction order is fixed, so the result does not depend on
/// thread count.
pub fn sphere_flux(radius: f64, mesh: (usize, usize), band: Band) -> Result<f64, BerryError> {
    if radius == 0.0 {
        return Err(BerryError::DegeneratePoint);
    }
    if !radius.is_finite() || radius < 0.0 {
        return Err(BerryError::InvalidPath(format!("sphere radius must be > 0, got {radius}")));
    }
    let (n_theta, n_phi) = mesh;
    if n_theta < 8 || n_phi < 16 {
        return Err(BerryError::InvalidMesh { n_theta, n_phi });
    }
    let d_theta = std::f64::consts::PI / n_theta as f64;
    let d_phi = std::f64::consts::TAU / n_phi as f64;
    let rows = exec::map_indexed(n_theta, |i| {
        let theta = (i as f64 + 0.5) * d_theta;
        let (st, ct) = theta.sin_cos();
        let mut row = 0.0;
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * d_phi;
            let n_hat = [st * phi.cos(), st * phi.sin(), ct];
            let point = ParamPoint::new(radius * n_hat[0], radius * n_hat[1], radius * n_hat[2]);
            let v = curvature_numeric(&point, band).expect("points on the sphere are off-origin");
            let radial = v[0] * n_hat[0] + v[1] * n_hat[1] + v[2] * n_hat[2];
            row += radial * radius * radius * st * d_theta * d_phi;
        }
        row
    });
    Ok(exec::pairwise_sum(&rows))
}

/// Gauge-invariant discrete loop phase from the product of successive
/// eigenvector overlaps around the loop, exposed for gauge-invariance tests.
/// Returns the phase in (−π, π].
pub fn overlap_loop_phase(vectors: &[[C64; 2]]) -> Result<f64, BerryError> {
    let mut product = C64::new(1.0, 0.0);
    let n = vectors.len();
    for i in 0..n {
        let a = &vectors[i];
        let b = &vectors[(i + 1) % n];
        let overlap = a[0].conj() * b[0] + a[1].conj() * b[1];
        let mag = overlap.norm();
        if mag < 1e-8 {
            return Err(BerryError::OverlapVanished { segment: i });
        }
        product *= overlap / mag;
    }
    let mut gamma = -product.arg();
    if gamma <= -std::f64::consts::PI {
        gamma += std::f64::consts::TAU;
    }
    Ok(gamma)
}

/// Signed solid angle of the radial projection of the path onto the unit
/// sphere, from summed spherical-triangle excesses against a reference apex.
/// The sign follows the traversal orientation.
pub fn solid_angle(path: &ClosedPath) -> Result<f64, BerryError> {
    let pts = path.traversal();
    let units: Vec<[f64; 3]> = pts
        .iter()
        .map(|p| p.unit().map_err(|_| BerryError::AmbiguousProjection))
        .collect::<Result<_, _>>()?;
    // Apex: normalized centroid of the projected loop; fall back to the north
    // pole when the centroid sits at the origin (e.g. great circles).
    let mut centroid = [0.0f64; 3];
    for u in &units {
        for (c, v) in centroid.iter_mut().zip(u) {
            *c += v;
        }
    }
    let c_norm = (centroid[0].powi(2) + centroid[1].powi(2) + centroid[2].powi(2)).sqrt();
    let apex = if c_norm / units.len() as f64 > 1e-3 {
        [centroid[0] / c_norm, centroid[1] / c_norm, centroid[2] / c_norm]
    } else {
        [0.0, 0.0, 1.0]
    };

    let n = units.len();
    let mut excesses = Vec::with_capacity(n);
    for i in 0..n {
        let b = units[i];
        let c = units[(i + 1) % n];
        excesses.push(triangle_excess(apex, b, c));
    }
    Ok(exec::pairwise_sum(&excesses))
}

// Signed solid angle of the spherical triangle (a, b, c):
// tan(Ω/2) = a·(b×c) / (1 + a·b + b·c + c·a).
fn triangle_excess(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let triple = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    let dot_ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let dot_bc = b[0] * c[0] + b[1] * c[1] + b[2] * c[2];
    let dot_ca = c[0] * a[0] + c[1] * a[1] + c[2] * a[2];
    2.0 * triple.atan2(1.0 + dot_ab + dot_bc + dot_ca)
}

/// Discrete Berry phase of the chosen band around the path, together with
/// the geometric solid angle, cap flux, and charge.
pub fn loop_phase(path: &ClosedPath, band: Band) -> Result<BerryResult, BerryError> {
    let pts = path.traversal();
    let vectors: Vec<[C64; 2]> = pts
        .iter()
        .map(|p| band_eigenvector(p, band))
        .collect::<Result<_, _>>()?;
    let gamma = overlap_loop_phase(&vectors)?;
    let omega = solid_angle(path)?;
    let flux = band.sign() * 0.5 * omega;
    Ok(BerryResult {
        band,
        loop_phase: gamma,
        solid_angle: omega,
        flux,
        charge: flux / (4.0 * std::f64::consts::PI),
    })
}

/// Difference of two angles wrapped into (−π, π].
pub fn angle_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn eigenvectors_are_eigenstates_with_pinned_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let r = ParamPoint::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            if r.magnitude() < 0.1 {
                continue;
            }
            for band in [Band::Plus, Band::Minus] {
                let v = band_eigenvector(&r, band).unwrap();
                // H v = ±(R/2) v with H = ½σ·r
                let [x, y, z] = r.0;
                let hv0 = 0.5 * (C64::new(z, 0.0) * v[0] + C64::new(x, -y) * v[1]);
                let hv1 = 0.5 * (C64::new(x, y) * v[0] - C64::new(z, 0.0) * v[1]);
                let e = band.sign() * 0.5 * r.magnitude();
                assert!((hv0 - e * v[0]).norm() < 1e-12);
                assert!((hv1 - e * v[1]).norm() < 1e-12);
                let lead = if v[0].norm() > 1e-15 { v[0] } else { v[1] };
                assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
            }
        }
        assert!(band_eigenvector(&ParamPoint::new(0.0, 0.0, 0.0), Band::Plus).is_err());
    }

    #[test]
    fn curvature_spot_values() {
        let v = curvature_numeric(&ParamPoint::new(0.0, 0.0, 1.0), Band::Plus).unwrap();
        assert_abs_diff_eq!(v[2], 0.5, epsilon = 1e-12);
        assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
        let v = curvature_numeric(&ParamPoint::new(0.0, 0.0, 2.0), Band::Plus).unwrap();
        assert_abs_diff_eq!(v[2], 0.125, epsilon = 1e-13);
        let v = curvature_numeric(&ParamPoint::new(0.0, 0.0, 1.0), Band::Minus).unwrap();
        assert_abs_diff_eq!(v[2], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn curvature_matches_monopole_field_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let radius = rng.random_range(0.1..10.0);
            let theta = rng.random_range(0.0..PI);
            let phi = rng.random_range(0.0..TAU);
            let r = ParamPoint::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            );
            for band in [Band::Plus, Band::Minus] {
                let num = curvature_numeric(&r, band).unwrap();
                let exact = curvature_analytic(&r, band).unwrap();
                let err = ((num[0] - exact[0]).powi(2)
                    + (num[1] - exact[1]).powi(2)
                    + (num[2] - exact[2]).powi(2))
                .sqrt();
                let scale = 0.5 / (radius * radius);
                assert!(err <= 1e-10 * scale, "err {err:e} at radius {radius}");
            }
        }
    }

    #[test]
    fn sphere_flux_quantization() {
        let flux = sphere_flux(1.0, (100, 200), Band::Plus).unwrap();
        assert!((flux - TAU).abs() / TAU < 1e-3, "flux {flux}");
        let flux3 = sphere_flux(3.0, (100, 200), Band::Plus).unwrap();
        assert!((flux3 - flux).abs() / TAU < 1e-3);
        let fluxm = sphere_flux(1.0, (100, 200), Band::Minus).unwrap();
        assert!((fluxm + TAU).abs() / TAU < 1e-3);
        // charge = flux / 4π = ±½
        assert!((flux / (4.0 * PI) - 0.5).abs() < 1e-3);
        assert!(matches!(
            sphere_flux(0.0, (100, 200), Band::Plus),
            Err(BerryError::DegeneratePoint)
        ));
        assert!(matches!(
            sphere_flux(-1.0, (100, 200), Band::Plus),
            Err(BerryError::InvalidPath(_))
        ));
        assert!(matches!(
            sphere_flux(1.0, (4, 200), Band::Plus),
            Err(BerryError::InvalidMesh { .. })
        ));
    }

    #[test]
    fn sphere_flux_mesh_convergence() {
        let err = |mesh: (usize, usize)| (sphere_flux(1.0, mesh, Band::Plus).unwrap() - TAU).abs();
        let coarse = err((16, 32));
        let fine = err((32, 64));
        assert!(coarse / fine >= 3.0, "convergence ratio {}", coarse / fine);
    }

    #[test]
    fn equator_loop_phase_minus_band() {
        let path = ClosedPath::equator(1.0, 1000, 1).unwrap();
        let res = loop_phase(&path, Band::Minus).unwrap();
        assert!(angle_difference(res.loop_phase, PI).abs() <= 1e-3, "γ = {}", res.loop_phase);
        assert_abs_diff_eq!(res.solid_angle, TAU, epsilon = 1e-6);
    }

    #[test]
    fn latitude_loop_phase_and_solid_angle() {
        let theta = PI / 3.0;
        let path = ClosedPath::latitude(theta, 1.0, 2000, 1).unwrap();
        let res = loop_phase(&path, Band::Minus).unwrap();
        assert!(
            angle_difference(res.loop_phase, FRAC_PI_2).abs() <= 1e-3,
            "γ = {}",
            res.loop_phase
        );
        // cap formula: ΔΩ = 2π(1 − cos θ) = π here
        assert_abs_diff_eq!(res.solid_angle, PI, epsilon = 1e-5);
        assert_abs_diff_eq!(res.flux, -0.5 * PI, epsilon = 1e-6);
        assert_abs_diff_eq!(res.charge, -0.125, epsilon = 1e-7);
        // loop_phase ≡ −flux (mod 2π)
        assert!(angle_difference(res.loop_phase, -res.flux).abs() <= 1e-3);
    }

    #[test]
    fn reversed_orientation_flips_phase_and_angle() {
        let fwd = loop_phase(&ClosedPath::latitude(1.0, 2.0, 800, 1).unwrap(), Band::Minus).unwrap();
        let rev = loop_phase(&ClosedPath::latitude(1.0, 2.0, 800, -1).unwrap(), Band::Minus).unwrap();
        assert!(angle_difference(fwd.loop_phase, -rev.loop_phase).abs() <= 1e-6);
        assert_abs_diff_eq!(fwd.solid_angle, -rev.solid_angle, epsilon = 1e-9);
    }

    #[test]
    fn backtracking_path_has_zero_phase() {
        let a = ParamPoint::new(1.0, 0.0, 0.3);
        let b = ParamPoint::new(0.8, 0.5, 0.3);
        let c = ParamPoint::new(0.5, 0.9, 0.3);
        let path = ClosedPath::new(vec![a, b, c, b], 1).unwrap();
        let res = loop_phase(&path, Band::Minus).unwrap();
        assert!(res.loop_phase.abs() < 1e-12);
        assert!(res.solid_angle.abs() < 1e-12);
    }

    #[test]
    fn shrunken_loop_has_vanishing_solid_angle() {
        let eps = 1e-5;
        let points = (0..16)
            .map(|i| {
                let a = TAU * i as f64 / 16.0;
                ParamPoint::new(1.0 + eps * a.cos(), eps * a.sin(), 0.4)
            })
            .collect();
        let path = ClosedPath::new(points, 1).unwrap();
        assert!(solid_angle(&path).unwrap().abs() < 1e-6);
    }

    #[test]
    fn phase_angle_law_on_random_smooth_loops() {
        // 50 random smooth loops on spheres of random radius: the discrete
        // phase must match ∓½·ΔΩ (mod 2π) for both bands.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for case in 0..50 {
            let radius = rng.random_range(0.2..5.0);
            let mut base = [0.0f64; 3];
            let mut coeffs = [[0.0f64; 3]; 6];
            for v in base.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            for row in coeffs.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-0.4..0.4);
                }
            }
            let n = 2000;
            let mut points = Vec::with_capacity(n);
            for i in 0..n {
                let s = TAU * i as f64 / n as f64;
                let mut d = base;
                for k in 0..3 {
                    let (sk, ck) = (((k + 1) as f64) * s).sin_cos();
                    for ax in 0..3 {
                        d[ax] += coeffs[2 * k][ax] * ck + coeffs[2 * k + 1][ax] * sk;
                    }
                }
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if norm < 0.05 {
                    // direction field dipped near zero; nudge it off
                    d[2] += 0.1;
                }
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                points.push(ParamPoint::new(
                    radius * d[0] / norm,
                    radius * d[1] / norm,
                    radius * d[2] / norm,
                ));
            }
            let path = match ClosedPath::new(points, 1) {
                Ok(p) => p,
                Err(_) => continue, // coincident consecutive points; skip draw
            };
            let omega = solid_angle(&path).unwrap();
            for band in [Band::Plus, Band::Minus] {
                let res = loop_phase(&path, band).unwrap();
                let expected = -band.sign() * 0.5 * omega;
                let diff = angle_difference(res.loop_phase, expected).abs();
                assert!(diff <= 1e-3, "case {case} band {band:?}: diff {diff:e}");
            }
        }
    }

    #[test]
    fn loop_phase_is_gauge_invariant() {
        let path = ClosedPath::latitude(0.9, 1.3, 500, 1).unwrap();
        let vectors: Vec<[C64; 2]> = path
            .points()
            .iter()
            .map(|p| band_eigenvector(p, Band::Minus).unwrap())
            .collect();
        let reference = overlap_loop_phase(&vectors).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let regauged: Vec<[C64; 2]> = vectors
            .iter()
            .map(|v| {
                let phase = C64::from_polar(1.0, rng.random_range(0.0..TAU));
                [v[0] * phase, v[1] * phase]
            })
            .collect();
        let regauged_phase = overlap_loop_phase(&regauged).unwrap();
        assert!(angle_difference(reference, regauged_phase).abs() < 1e-12);
    }

    #[test]
    fn antipodal_jump_reports_vanished_overlap() {
        // consecutive points on opposite poles have orthogonal eigenvectors
        let points = vec![
            ParamPoint::new(0.0, 0.0, 1.0),
            ParamPoint::new(0.0, 0.0, -1.0),
            ParamPoint::new(1.0, 0.0, 0.0),
        ];
        let path = ClosedPath::new(points, 1).unwrap();
        assert!(matches!(
            loop_phase(&path, Band::Plus),
            Err(BerryError::OverlapVanished { .. })
        ));
    }

    #[test]
    fn path_validation() {
        assert!(ClosedPath::new(vec![ParamPoint::new(1.0, 0.0, 0.0)], 1).is_err());
        assert!(ClosedPath::new(
            vec![
                ParamPoint::new(1.0, 0.0, 0.0),
                ParamPoint::new(0.0, 0.0, 0.0),
                ParamPoint::new(0.0, 1.0, 0.0),
            ],
            1
        )
        .is_err());
        assert!(ClosedPath::latitude(1.0, 1.0, 100, 2).is_err());
        let csv = "x,y,z\n1,0,0\n0,1,0\n0,0,1\n";
        let path = ClosedPath::from_csv_str(csv, 1).unwrap();
        assert_eq!(path.points().len(), 3);
        assert!(ClosedPath::from_csv_str("1,0\n0,1\n", 1).is_err());
    }
}
