//! Drift coefficients of the shipped interacting particle models.
//!
//! Every model has unit diffusion. A drift is the sum of a single-particle
//! term (Bessel hard-edge repulsion, the Ginibre `-x` term, an optional
//! harmonic confinement) and pairwise kernel contributions from the
//! surrounding configuration, truncated to a window.

use std::fmt;
use std::sync::Arc;

use crate::configuration::{Configuration, LabeledState, Point};
use crate::error::{Error, Result};
use crate::potentials::{Matrix, PairPotential, PlanarSkew, SkewPotential, SmoothBump, ZeroPotential};

pub const DEFAULT_COLLISION_TOL: f64 = 1e-10;

/// Diffusion coefficient slot. Shipped models all use the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Identity,
    /// sigma = s * I
    Scalar(f64),
}

impl Diffusion {
    pub fn scale(&self) -> f64 {
        match self {
            Diffusion::Identity => 1.0,
            Diffusion::Scalar(s) => *s,
        }
    }
}

#[derive(Clone)]
pub enum ModelKind {
    /// b = 0 (plus confinement, if any)
    Free,
    SineBeta,
    Bessel { alpha: f64 },
    GinibreRep1,
    GinibreRep2,
    LennardJones,
    Riesz { a: f64 },
    RuelleCompact { potential: Arc<dyn PairPotential> },
    SkewPoisson { potential: Arc<dyn PairPotential>, skew: Arc<dyn SkewPotential> },
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Bessel { alpha } => write!(f, "Bessel {{ alpha: {alpha} }}"),
            ModelKind::Riesz { a } => write!(f, "Riesz {{ a: {a} }}"),
            ModelKind::RuelleCompact { potential } => write!(f, "RuelleCompact({potential:?})"),
            ModelKind::SkewPoisson { potential, skew } => write!(f, "SkewPoisson({potential:?}, {skew:?})"),
            other => f.write_str(other.name()),
        }
    }
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Free => "free",
            ModelKind::SineBeta => "sine_beta",
            ModelKind::Bessel { .. } => "bessel",
            ModelKind::GinibreRep1 => "ginibre_rep1",
            ModelKind::GinibreRep2 => "ginibre_rep2",
            ModelKind::LennardJones => "lennard_jones",
            ModelKind::Riesz { .. } => "riesz",
            ModelKind::RuelleCompact { .. } => "ruelle_compact",
            ModelKind::SkewPoisson { .. } => "skew_poisson",
        }
    }
}

/// Model descriptor: kind, inverse temperature, dimension and confinement.
#[derive(Debug, Clone)]
pub struct InteractionSpec {
    kind: ModelKind,
    beta: f64,
    dim: usize,
    confinement: f64,
    diffusion: Diffusion,
}

impl InteractionSpec {
    fn build(kind: ModelKind, beta: f64, dim: usize) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        Ok(Self { kind, beta, dim, confinement: 0.0, diffusion: Diffusion::Identity })
    }

    pub fn free(dim: usize) -> Result<Self> {
        Self::build(ModelKind::Free, 1.0, dim)
    }

    pub fn sine_beta(beta: f64) -> Result<Self> {
        Self::build(ModelKind::SineBeta, beta, 1)
    }

    /// Bessel model on [0, inf), beta = 2, alpha >= 1.
    pub fn bessel(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("Bessel alpha must be >= 1, got {alpha}")));
        }
        Self::build(ModelKind::Bessel { alpha }, 2.0, 1)
    }

    pub fn ginibre_rep1() -> Result<Self> {
        Self::build(ModelKind::GinibreRep1, 2.0, 2)
    }

    pub fn ginibre_rep2() -> Result<Self> {
        Self::build(ModelKind::GinibreRep2, 2.0, 2)
    }

    pub fn lennard_jones(beta: f64) -> Result<Self> {
        Self::build(ModelKind::LennardJones, beta, 3)
    }

    pub fn riesz(beta: f64, a: f64, dim: usize) -> Result<Self> {
        if !(a > dim as f64) {
            return Err(Error::InvalidParameter(format!("Riesz exponent {a} must exceed d = {dim}")));
        }
        Self::build(ModelKind::Riesz { a }, beta, dim)
    }

    pub fn ruelle_compact(beta: f64, dim: usize, potential: Arc<dyn PairPotential>) -> Result<Self> {
        if potential.support_radius().is_none() {
            return Err(Error::InvalidParameter("Ruelle potential must be compactly supported".into()));
        }
        Self::build(ModelKind::RuelleCompact { potential }, beta, dim)
    }

    /// Smooth compactly supported default: a bump of height 1 and radius 1.5.
    pub fn ruelle_bump(beta: f64, dim: usize) -> Result<Self> {
        Self::ruelle_compact(beta, dim, Arc::new(SmoothBump { height: 1.0, radius: 1.5 }))
    }

    /// Poisson case of the non-symmetric model: zero pair potential plus
    /// a skew drift, in d = 3.
    pub fn skew_poisson(beta: f64, skew: Arc<dyn SkewPotential>) -> Result<Self> {
        Self::build(ModelKind::SkewPoisson { potential: Arc::new(ZeroPotential), skew }, beta, 3)
    }

    pub fn skew_poisson_default(beta: f64) -> Result<Self> {
        Self::skew_poisson(beta, Arc::new(PlanarSkew::default()))
    }

    pub fn with_confinement(mut self, c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("confinement must be >= 0, got {c}")));
        }
        self.confinement = c;
        Ok(self)
    }

    pub fn with_diffusion(mut self, diffusion: Diffusion) -> Self {
        self.diffusion = diffusion;
        self
    }

    /// Finite-N Dyson gas in bulk units: sine_beta pair drift with the
    /// harmonic confinement that makes unit density at the origin stationary.
    pub fn dyson_bulk(beta: f64, n: usize) -> Result<Self> {
        let c = beta * std::f64::consts::PI.powi(2) / (4.0 * n as f64);
        Self::sine_beta(beta)?.with_confinement(c)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn confinement(&self) -> f64 {
        self.confinement
    }

    pub fn diffusion(&self) -> Diffusion {
        self.diffusion
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// True for one-dimensional models whose pair repulsion keeps the
    /// particle order fixed.
    pub fn preserves_order(&self) -> bool {
        matches!(self.kind, ModelKind::SineBeta | ModelKind::Bessel { .. }) && self.beta >= 1.0
    }

    pub fn half_line(&self) -> bool {
        matches!(self.kind, ModelKind::Bessel { .. })
    }

    /// Whether neighbour `y` enters the truncated sum for particle `x`.
    #[inline]
    fn in_window(&self, x: &Point, y: &Point, cutoff: f64) -> bool {
        match self.kind {
            ModelKind::GinibreRep2 => y.norm() < cutoff,
            _ => x.dist(y) < cutoff,
        }
    }

    /// Contribution of a neighbour at offset z = x - y.
    #[inline]
    fn pair_term(&self, z: Point) -> Point {
        let half_beta = 0.5 * self.beta;
        match &self.kind {
            ModelKind::Free => Point::zero(self.dim),
            ModelKind::SineBeta => z * (half_beta / z.norm_sq()),
            ModelKind::Bessel { .. } | ModelKind::GinibreRep1 | ModelKind::GinibreRep2 => {
                z * (1.0 / z.norm_sq())
            }
            ModelKind::LennardJones => {
                let s = z.norm_sq();
                let s4 = s * s * s * s;
                let s7 = s4 * s * s * s;
                z * (half_beta * (12.0 / s7 - 6.0 / s4))
            }
            ModelKind::Riesz { a } => z * (half_beta * z.norm_sq().powf(-(a + 2.0) / 2.0)),
            ModelKind::RuelleCompact { potential } => potential.gradient(&z) * (-half_beta),
            ModelKind::SkewPoisson { potential, skew } => {
                (skew.gamma0(&z) - potential.gradient(&z)) * half_beta
            }
        }
    }

    fn pair_jacobian(&self, z: Point) -> Matrix {
        let half_beta = 0.5 * self.beta;
        // kernels of the form z g(|z|^2): jacobian g I + 2 g'(s) z z^T
        let radial = |g: f64, dg: f64| Matrix::radial(&z, g, 2.0 * dg);
        let s = z.norm_sq();
        match &self.kind {
            ModelKind::Free => Matrix::zeros(self.dim),
            ModelKind::SineBeta => radial(half_beta / s, -half_beta / (s * s)),
            ModelKind::Bessel { .. } | ModelKind::GinibreRep1 | ModelKind::GinibreRep2 => {
                radial(1.0 / s, -1.0 / (s * s))
            }
            ModelKind::LennardJones => radial(
                half_beta * (12.0 * s.powi(-7) - 6.0 * s.powi(-4)),
                half_beta * (-84.0 * s.powi(-8) + 24.0 * s.powi(-5)),
            ),
            ModelKind::Riesz { a } => {
                let e = (a + 2.0) / 2.0;
                radial(half_beta * s.powf(-e), -half_beta * e * s.powf(-e - 1.0))
            }
            ModelKind::RuelleCompact { potential } => potential.hessian(&z).scale(-half_beta),
            ModelKind::SkewPoisson { potential, skew } => {
                let mut m = skew.gamma0_jacobian(&z);
                m.add(&potential.hessian(&z).scale(-1.0));
                m.scale(half_beta)
            }
        }
    }

    fn self_term(&self, x: &Point) -> Point {
        let mut v = *x * (-self.confinement);
        match self.kind {
            ModelKind::Bessel { alpha } => v.set(0, v.x() + alpha / (2.0 * x.x())),
            ModelKind::GinibreRep2 => v = v - *x,
            _ => {}
        }
        v
    }

    fn self_jacobian(&self, x: &Point) -> Matrix {
        let mut m = Matrix::scaled_identity(self.dim, -self.confinement);
        match self.kind {
            ModelKind::Bessel { alpha } => m.entries[0][0] -= alpha / (2.0 * x.x() * x.x()),
            ModelKind::GinibreRep2 => m.add(&Matrix::scaled_identity(self.dim, -1.0)),
            _ => {}
        }
        m
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "point of dimension {} for a {}-dimensional model",
                x.dim(),
                self.dim
            )));
        }
        if self.half_line() && !(x.x() > 0.0) {
            return Err(Error::InvalidParameter(format!("Bessel drift needs x > 0, got {}", x.x())));
        }
        Ok(())
    }

    fn check_gap(&self, z: &Point, tol: f64) -> Result<()> {
        if matches!(self.kind, ModelKind::Free) {
            return Ok(());
        }
        let gap = z.norm();
        if gap < tol {
            return Err(Error::CollisionTooClose { gap });
        }
        Ok(())
    }

    /// Untruncated drift of a particle at `x` with neighbours `others`,
    /// summed in iteration order. This is the finite-N coefficient.
    pub fn full_drift<'a>(&self, x: Point, others: impl IntoIterator<Item = &'a Point>) -> Result<Point> {
        let mut v = self.self_term(&x);
        for y in others {
            let z = x - *y;
            self.check_gap(&z, DEFAULT_COLLISION_TOL)?;
            v += self.pair_term(z);
        }
        Ok(v)
    }

    /// Analytic Jacobian (in x) of [`InteractionSpec::full_drift`].
    pub fn full_jacobian<'a>(&self, x: Point, others: impl IntoIterator<Item = &'a Point>) -> Result<Matrix> {
        self.check_point(&x)?;
        let mut m = self.self_jacobian(&x);
        for y in others {
            let z = x - *y;
            self.check_gap(&z, DEFAULT_COLLISION_TOL)?;
            m.add(&self.pair_jacobian(z));
        }
        Ok(m)
    }
}

/// Options for truncated drift evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOptions {
    pub collision_tol: f64,
    /// Relative threshold: fail when gap > threshold * (1 + |value|).
    pub gap_threshold: Option<f64>,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self { collision_tol: DEFAULT_COLLISION_TOL, gap_threshold: Some(0.05) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftValue {
    pub vector: Point,
    pub cutoff_radius_used: f64,
    /// |b(cutoff) - b(cutoff / 2)|
    pub convergence_gap: f64,
}

pub fn drift(x: &Point, env: &Configuration, spec: &InteractionSpec, cutoff: f64) -> Result<DriftValue> {
    drift_with(x, env.points(), spec, cutoff, &DriftOptions::default())
}

/// Drift of a particle at `x` against the neighbours in `env`, truncated to
/// the model's window of radius `cutoff` (which may be infinite).
pub fn drift_with(
    x: &Point,
    env: &[Point],
    spec: &InteractionSpec,
    cutoff: f64,
    opts: &DriftOptions,
) -> Result<DriftValue> {
    spec.check_point(x)?;
    if !(cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff must be positive, got {cutoff}")));
    }
    let half = cutoff / 2.0;
    let base = spec.self_term(x);
    let mut full = base;
    let mut inner = base;
    for y in env {
        let z = *x - *y;
        spec.check_gap(&z, opts.collision_tol)?;
        if spec.in_window(x, y, cutoff) {
            let t = spec.pair_term(z);
            full += t;
            if cutoff.is_finite() && spec.in_window(x, y, half) {
                inner += t;
            }
        }
    }
    // an infinite window over a finite configuration is already the exact sum
    let gap = if cutoff.is_finite() { (full - inner).norm() } else { 0.0 };
    if let Some(th) = opts.gap_threshold {
        let threshold = th * (1.0 + full.norm());
        if gap > threshold {
            return Err(Error::NonConvergentSum { gap, threshold });
        }
    }
    Ok(DriftValue { vector: full, cutoff_radius_used: cutoff, convergence_gap: gap })
}

/// Splits the drift into a near part (neighbours within distance `s`, only
/// for x in the open ball of radius `r`) and the remaining tail.
pub fn drift_tail_decomposition(
    x: &Point,
    env: &Configuration,
    spec: &InteractionSpec,
    r: f64,
    s: f64,
) -> Result<(DriftValue, DriftValue)> {
    if !(0.0 < r && r < s) {
        return Err(Error::InvalidParameter(format!("need 0 < r < s, got r={r}, s={s}")));
    }
    let opts = DriftOptions { gap_threshold: None, ..DriftOptions::default() };
    let total = drift_with(x, env.points(), spec, f64::INFINITY, &opts)?;
    let mut near = Point::zero(spec.dim());
    if x.norm() < r {
        for y in env.points() {
            let z = *x - *y;
            if z.norm() < s {
                near += spec.pair_term(z);
            }
        }
    }
    let tail = total.vector - near;
    Ok((
        DriftValue { vector: near, cutoff_radius_used: s, convergence_gap: 0.0 },
        DriftValue { vector: tail, cutoff_radius_used: f64::INFINITY, convergence_gap: 0.0 },
    ))
}

/// Analytic derivative of the untruncated drift in x.
pub fn drift_jacobian(x: &Point, env: &Configuration, spec: &InteractionSpec) -> Result<Matrix> {
    spec.full_jacobian(*x, env.points())
}

/// gamma(x, env) = beta * sum_i gamma0(x - s_i) for the skew model.
pub fn drift_skew(x: &Point, env: &Configuration, spec: &InteractionSpec) -> Result<DriftValue> {
    let ModelKind::SkewPoisson { skew, .. } = spec.kind() else {
        return Err(Error::InvalidParameter(format!("drift_skew needs skew_poisson, got {}", spec.name())));
    };
    spec.check_point(x)?;
    let mut g = Point::zero(spec.dim());
    for y in env.points() {
        let z = *x - *y;
        spec.check_gap(&z, DEFAULT_COLLISION_TOL)?;
        g += skew.gamma0(&z);
    }
    Ok(DriftValue { vector: g * spec.beta(), cutoff_radius_used: f64::INFINITY, convergence_gap: 0.0 })
}

/// Finite-N drift of particle `i` (0-based): the full pair sum over the
/// other particles plus the single-particle terms.
pub fn finite_n_drift(i: usize, state: &LabeledState, spec: &InteractionSpec) -> Result<DriftValue> {
    let pos = state.positions();
    if i >= pos.len() {
        return Err(Error::IndexOutOfRange { index: i, len: pos.len() });
    }
    spec.check_point(&pos[i])?;
    let others = pos.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p);
    let v = spec.full_drift(pos[i], others)?;
    Ok(DriftValue { vector: v, cutoff_radius_used: f64::INFINITY, convergence_gap: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn sine_pair_sum() {
        let s = InteractionSpec::sine_beta(2.0).unwrap();
        let d = drift(&Point::d1(1.0), &Configuration::from_reals(&[-1.0, 0.0]), &s, f64::INFINITY).unwrap();
        assert!(rel(d.vector.x(), 1.5) < 1e-12);
        assert_eq!(d.convergence_gap, 0.0);
    }

    #[test]
    fn sine_symmetric_cancellation() {
        let s = InteractionSpec::sine_beta(1.0).unwrap();
        let d = drift(&Point::d1(0.0), &Configuration::from_reals(&[-0.7, 0.7]), &s, 10.0).unwrap();
        assert_eq!(d.vector.x(), 0.0);
    }

    #[test]
    fn ginibre_rep2_examples() {
        let s = InteractionSpec::ginibre_rep2().unwrap();
        let x = Point::d2(1.0, 0.0);
        let d = drift(&x, &Configuration::empty(2), &s, f64::INFINITY).unwrap();
        assert_eq!(d.vector, Point::d2(-1.0, 0.0));
        let env = Configuration::new(2, vec![Point::d2(0.0, 0.0)]).unwrap();
        let d = drift(&x, &env, &s, f64::INFINITY).unwrap();
        assert!(d.vector.norm() < 1e-15);
    }

    #[test]
    fn bessel_example() {
        let s = InteractionSpec::bessel(1.0).unwrap();
        let d = drift(&Point::d1(1.0), &Configuration::from_reals(&[4.0]), &s, f64::INFINITY).unwrap();
        assert!(rel(d.vector.x(), 1.0 / 6.0) < 1e-12);
    }

    #[test]
    fn lennard_jones_unit_neighbour() {
        let s = InteractionSpec::lennard_jones(1.0).unwrap();
        for k in 0..3 {
            let e = Point::axis(3, k);
            let env = Configuration::new(3, vec![Point::zero(3)]).unwrap();
            let d = drift(&e, &env, &s, f64::INFINITY).unwrap();
            assert!((d.vector - e * 3.0).norm() < 1e-12);
        }
    }

    #[test]
    fn collision_refused() {
        let s = InteractionSpec::sine_beta(2.0).unwrap();
        let err = drift(&Point::d1(1.0), &Configuration::from_reals(&[1.0 + 1e-12]), &s, 5.0).unwrap_err();
        assert!(matches!(err, Error::CollisionTooClose { .. }));
    }

    #[test]
    fn non_convergent_sum_detected() {
        let s = InteractionSpec::sine_beta(2.0).unwrap();
        // one-sided far neighbours: the window [r/2, r) holds most of the sum
        let env = Configuration::from_reals(&[3.0, 3.5]);
        let err = drift(&Point::d1(0.0), &env, &s, 4.0).unwrap_err();
        assert!(matches!(err, Error::NonConvergentSum { .. }));
    }

    #[test]
    fn parameter_domains() {
        assert!(InteractionSpec::bessel(0.5).is_err());
        assert!(InteractionSpec::riesz(1.0, 2.0, 2).is_err());
        assert!(InteractionSpec::riesz(1.0, 2.5, 2).is_ok());
        assert!(InteractionSpec::sine_beta(0.0).is_err());
        let s = InteractionSpec::bessel(1.0).unwrap();
        assert!(drift(&Point::d1(-1.0), &Configuration::empty(1), &s, 1.0).is_err());
    }

    #[test]
    fn tail_decomposition_cases() {
        let g = InteractionSpec::ginibre_rep2().unwrap();
        let x = Point::d2(0.3, 0.1);
        let (near, tail) = drift_tail_decomposition(&x, &Configuration::empty(2), &g, 1.0, 2.0).unwrap();
        assert_eq!(near.vector, Point::zero(2));
        assert_eq!(tail.vector, -x);

        let s = InteractionSpec::sine_beta(2.0).unwrap();
        let env = Configuration::from_reals(&[-0.5, 0.4, 1.2]);
        let (near, tail) = drift_tail_decomposition(&Point::d1(0.1), &env, &s, 1.0, 5.0).unwrap();
        assert!(tail.vector.norm() < 1e-14);
        assert!(near.vector.norm() > 0.0);

        // x outside S_r: no near part
        let (near, tail) = drift_tail_decomposition(&Point::d1(2.5), &env, &s, 1.0, 5.0).unwrap();
        let full = drift(&Point::d1(2.5), &env, &s, f64::INFINITY).unwrap();
        assert_eq!(near.vector, Point::zero(1));
        assert_eq!(tail.vector, full.vector);
        assert!(drift_tail_decomposition(&Point::d1(0.0), &env, &s, 2.0, 1.0).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let s = InteractionSpec::sine_beta(2.0).unwrap();
        let j = drift_jacobian(&Point::d1(1.0), &Configuration::from_reals(&[0.0]), &s).unwrap();
        assert!(rel(j.get(0, 0), -1.0) < 1e-12);
        let j = drift_jacobian(&Point::d1(1.0), &Configuration::empty(1), &s).unwrap();
        assert_eq!(j.get(0, 0), 0.0);
        let g = InteractionSpec::ginibre_rep2().unwrap();
        let j = drift_jacobian(&Point::d2(0.4, -2.0), &Configuration::empty(2), &g).unwrap();
        assert_eq!(j, Matrix::scaled_identity(2, -1.0));
    }

    #[test]
    fn skew_drift_cases() {
        let s = InteractionSpec::skew_poisson_default(1.0).unwrap();
        let x = Point::d3(0.1, 0.2, 0.3);
        assert_eq!(drift_skew(&x, &Configuration::empty(3), &s).unwrap().vector, Point::zero(3));
        let far = Configuration::new(3, vec![Point::d3(3.0, 0.0, 0.0)]).unwrap();
        assert_eq!(drift_skew(&x, &far, &s).unwrap().vector, Point::zero(3));
        let near = Configuration::new(3, vec![Point::d3(0.4, 0.0, 0.1)]).unwrap();
        let g = drift_skew(&x, &near, &s).unwrap().vector;
        let total = drift(&x, &near, &s, f64::INFINITY).unwrap().vector;
        assert!((total - g * 0.5).norm() < 1e-15);
        assert!(drift_skew(&x, &near, &InteractionSpec::lennard_jones(1.0).unwrap()).is_err());
    }

    #[test]
    fn finite_n_examples() {
        let s = InteractionSpec::sine_beta(2.0).unwrap();
        let st = LabeledState::from_reals(&[0.0, 1.0]);
        assert!(rel(finite_n_drift(1, &st, &s).unwrap().vector.x(), 1.0) < 1e-12);

        let c = 0.7;
        let conf = InteractionSpec::sine_beta(2.0).unwrap().with_confinement(c).unwrap();
        let one = LabeledState::from_reals(&[1.3]);
        assert!(rel(finite_n_drift(0, &one, &conf).unwrap().vector.x(), -c * 1.3) < 1e-12);
        let sym = LabeledState::from_reals(&[-1.0, 0.0, 1.0]);
        assert_eq!(finite_n_drift(1, &sym, &conf).unwrap().vector.x(), 0.0);
        assert!(finite_n_drift(3, &sym, &conf).is_err());
    }

    #[test]
    fn sine_translation_covariance() {
        let s = InteractionSpec::sine_beta(2.0).unwrap();
        let env = [-1.25, 0.5, 2.0, 3.75];
        let h = 0.25;
        let a = drift(&Point::d1(0.0), &Configuration::from_reals(&env), &s, 100.0).unwrap();
        let shifted: Vec<f64> = env.iter().map(|e| e + h).collect();
        let b = drift(&Point::d1(h), &Configuration::from_reals(&shifted), &s, 100.0).unwrap();
        assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn compact_ruelle_is_cutoff_independent() {
        let s = InteractionSpec::ruelle_bump(1.0, 2).unwrap();
        let env = Configuration::new(2, vec![Point::d2(0.5, 0.5), Point::d2(-1.0, 0.2), Point::d2(4.0, 4.0)]).unwrap();
        let d = drift(&Point::d2(0.0, 0.0), &env, &s, 3.1).unwrap();
        assert_eq!(d.convergence_gap, 0.0);
    }
}
