//! Radial pair potentials and skew-symmetric potentials.

use std::fmt::Debug;

use crate::configuration::Point;

/// Small dense d x d matrix (d <= 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub entries: [[f64; 3]; 3],
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.entries[k][k] = s;
        }
        m
    }

    /// a * I + b * z z^T
    pub fn radial(z: &Point, a: f64, b: f64) -> Self {
        let dim = z.dim();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.entries[i][j] = b * z.get(i) * z.get(j);
            }
            m.entries[i][i] += a;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn add(&mut self, other: &Matrix) {
        for i in 0..3 {
            for j in 0..3 {
                self.entries[i][j] += other.entries[i][j];
            }
        }
    }

    pub fn scale(mut self, s: f64) -> Self {
        for row in &mut self.entries {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|k| self.entries[k][k]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, v: &Point) -> Point {
        let mut out = Point::zero(self.dim);
        for i in 0..self.dim {
            out.set(i, (0..self.dim).map(|j| self.entries[i][j] * v.get(j)).sum());
        }
        out
    }
}

/// A radial pair potential Psi(z) = f(|z|^2).
pub trait PairPotential: Send + Sync + Debug {
    /// Returns (f(s), f'(s), f''(s)).
    fn profile(&self, s: f64) -> (f64, f64, f64);

    /// Radius outside which the potential and its derivatives vanish.
    fn support_radius(&self) -> Option<f64>;

    fn value(&self, z: &Point) -> f64 {
        self.profile(z.norm_sq()).0
    }

    fn gradient(&self, z: &Point) -> Point {
        let (_, d1, _) = self.profile(z.norm_sq());
        *z * (2.0 * d1)
    }

    fn hessian(&self, z: &Point) -> Matrix {
        let (_, d1, d2) = self.profile(z.norm_sq());
        Matrix::radial(z, 2.0 * d1, 4.0 * d2)
    }
}

/// h * exp(1 / (|z|^2/R^2 - 1)) inside |z| < R, zero outside. C-infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothBump {
    pub height: f64,
    pub radius: f64,
}

impl PairPotential for SmoothBump {
    fn profile(&self, s: f64) -> (f64, f64, f64) {
        let r2 = self.radius * self.radius;
        if s >= r2 {
            return (0.0, 0.0, 0.0);
        }
        let u = s / r2 - 1.0;
        let f = self.height * (1.0 / u).exp();
        if f == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let u2 = u * u;
        let d1 = -f / (u2 * r2);
        let d2 = f * (1.0 + 2.0 * u) / (u2 * u2 * r2 * r2);
        (f, d1, d2)
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.radius)
    }
}

/// Infinite inside `radius`, zero outside. Only the value is meaningful; it
/// is meant for equilibrium sampling, not for drift evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardCore {
    pub radius: f64,
}

impl PairPotential for HardCore {
    fn profile(&self, s: f64) -> (f64, f64, f64) {
        if s < self.radius * self.radius {
            (f64::INFINITY, 0.0, 0.0)
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZeroPotential;

impl PairPotential for ZeroPotential {
    fn profile(&self, _s: f64) -> (f64, f64, f64) {
        (0.0, 0.0, 0.0)
    }

    fn support_radius(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// A skew-symmetric matrix potential Gamma, exposed through
/// gamma0_k = sum_l d Gamma_kl / d x_l and its Jacobian.
pub trait SkewPotential: Send + Sync + Debug {
    fn gamma0(&self, z: &Point) -> Point;
    fn gamma0_jacobian(&self, z: &Point) -> Matrix;
    fn support_radius(&self) -> Option<f64>;
}

/// Gamma_12 = -Gamma_21 = phi(|z|^2), all other entries zero, with phi a
/// radial bump. Then gamma0 = (d_2 phi, -d_1 phi, 0), which is divergence free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarSkew {
    pub bump: SmoothBump,
}

impl Default for PlanarSkew {
    fn default() -> Self {
        Self { bump: SmoothBump { height: 1.0, radius: 1.0 } }
    }
}

impl SkewPotential for PlanarSkew {
    fn gamma0(&self, z: &Point) -> Point {
        let (_, d1, _) = self.bump.profile(z.norm_sq());
        let mut g = Point::zero(z.dim());
        g.set(0, 2.0 * d1 * z.get(1));
        g.set(1, -2.0 * d1 * z.get(0));
        g
    }

    fn gamma0_jacobian(&self, z: &Point) -> Matrix {
        let (_, d1, d2) = self.bump.profile(z.norm_sq());
        let mut m = Matrix::zeros(z.dim());
        for b in 0..z.dim() {
            let delta = |a: usize| if a == b { 1.0 } else { 0.0 };
            m.entries[0][b] = 2.0 * d1 * delta(1) + 4.0 * d2 * z.get(1) * z.get(b);
            m.entries[1][b] = -(2.0 * d1 * delta(0) + 4.0 * d2 * z.get(0) * z.get(b));
        }
        m
    }

    fn support_radius(&self) -> Option<f64> {
        Some(self.bump.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(p: &dyn PairPotential, z: Point, h: f64) -> Point {
        let mut g = Point::zero(z.dim());
        for k in 0..z.dim() {
            let mut a = z;
            let mut b = z;
            a.set(k, z.get(k) + h);
            b.set(k, z.get(k) - h);
            g.set(k, (p.value(&a) - p.value(&b)) / (2.0 * h));
        }
        g
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let bump = SmoothBump { height: 2.0, radius: 1.5 };
        for z in [Point::d2(0.3, -0.4), Point::d3(0.5, 0.2, -0.7), Point::d1(1.1)] {
            let fd = fd_gradient(&bump, z, 1e-6);
            let g = bump.gradient(&z);
            assert!((g - fd).norm() < 1e-7 * (1.0 + g.norm()), "{g:?} vs {fd:?}");
        }
    }

    #[test]
    fn bump_hessian_matches_gradient_differences() {
        let bump = SmoothBump { height: 1.0, radius: 1.0 };
        let z = Point::d3(0.2, 0.3, -0.25);
        let hess = bump.hessian(&z);
        let h = 1e-6;
        for k in 0..3 {
            let mut a = z;
            let mut b = z;
            a.set(k, z.get(k) + h);
            b.set(k, z.get(k) - h);
            let col = (bump.gradient(&a) - bump.gradient(&b)) * (0.5 / h);
            for i in 0..3 {
                assert!((hess.get(i, k) - col.get(i)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bump_vanishes_outside_support_and_near_edge() {
        let bump = SmoothBump { height: 1.0, radius: 1.0 };
        assert_eq!(bump.profile(1.0), (0.0, 0.0, 0.0));
        assert_eq!(bump.profile(4.0), (0.0, 0.0, 0.0));
        let (f, d1, d2) = bump.profile(1.0 - 1e-300);
        assert!(f.is_finite() && d1.is_finite() && d2.is_finite());
    }

    #[test]
    fn planar_skew_is_divergence_free() {
        let skew = PlanarSkew::default();
        for z in [Point::d3(0.1, 0.2, 0.3), Point::d3(-0.5, 0.4, 0.1), Point::d3(2.0, 0.0, 0.0)] {
            assert!(skew.gamma0_jacobian(&z).trace().abs() < 1e-12);
        }
    }
}
