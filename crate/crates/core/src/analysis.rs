//! Time reversal and martingale structure of simulated paths: Itô and
//! Lyons-Zheng residuals, quadratic variation and reversibility tests.

use std::fmt;
use std::sync::Arc;

use crate::configuration::Point;
use crate::error::{Error, Result};
use crate::integrator::{BrownianPath, Event, Trajectory};
use crate::models::{finite_n_drift, InteractionSpec, DEFAULT_COLLISION_TOL};
use crate::stats::ks_two_sample;

type ValueFn = dyn Fn(&[Point]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[Point]) -> Vec<Point> + Send + Sync;

/// Smooth function of the labeled positions with analytic gradient (one
/// vector per particle) and Laplacian. The diffusion matrix is a multiple of
/// the identity, so the trace of the Hessian is all the generator needs.
#[derive(Clone)]
pub struct CylinderFunction {
    name: String,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
    laplacian: Arc<ValueFn>,
    /// Radius outside which F does not depend on a particle; None if global.
    pub support_radius: Option<f64>,
}

impl fmt::Debug for CylinderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunction").field("name", &self.name).field("support_radius", &self.support_radius).finish()
    }
}

impl CylinderFunction {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&[Point]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[Point]) -> Vec<Point> + Send + Sync + 'static,
        laplacian: impl Fn(&[Point]) -> f64 + Send + Sync + 'static,
        support_radius: Option<f64>,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            laplacian: Arc::new(laplacian),
            support_radius,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &[Point]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[Point]) -> Vec<Point> {
        (self.gradient)(x)
    }

    pub fn laplacian(&self, x: &[Point]) -> f64 {
        (self.laplacian)(x)
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", move |_| c, |x| x.iter().map(|p| Point::zero(p.dim())).collect(), |_| 0.0, Some(0.0))
    }

    /// F = coordinate k of particle i.
    pub fn coordinate(i: usize, k: usize) -> Self {
        Self::new(
            format!("x[{i}][{k}]"),
            move |x| x[i].get(k),
            move |x| unit_gradient(x, i, k, 1.0),
            |_| 0.0,
            None,
        )
    }

    /// F = (coordinate k of particle i)^2.
    pub fn coordinate_square(i: usize, k: usize) -> Self {
        Self::new(
            format!("x[{i}][{k}]^2"),
            move |x| x[i].get(k).powi(2),
            move |x| unit_gradient(x, i, k, 2.0 * x[i].get(k)),
            |_| 2.0,
            None,
        )
    }

    /// F = tanh(x_j - x_i) for one-dimensional states.
    pub fn tanh_gap(i: usize, j: usize) -> Self {
        Self::new(
            format!("tanh(x[{j}] - x[{i}])"),
            move |x| (x[j].x() - x[i].x()).tanh(),
            move |x| {
                let th = (x[j].x() - x[i].x()).tanh();
                let d = 1.0 - th * th;
                let mut g: Vec<Point> = x.iter().map(|p| Point::zero(p.dim())).collect();
                g[j] = Point::d1(d);
                g[i] = Point::d1(-d);
                g
            },
            move |x| {
                let th = (x[j].x() - x[i].x()).tanh();
                2.0 * (-2.0 * th * (1.0 - th * th))
            },
            None,
        )
    }

    /// Smooth function of the gap between the two central labels of an
    /// n-particle one-dimensional state.
    pub fn central_gap(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("central gap needs at least 2 particles".into()));
        }
        Ok(Self::tanh_gap(n / 2 - 1, n / 2))
    }

    /// Label-free F = sum_i exp(-|x_i|^2 / (2 w^2)).
    pub fn gaussian_sum(width: f64) -> Self {
        let w2 = width * width;
        Self::new(
            format!("gaussian_sum({width})"),
            move |x| x.iter().map(|p| (-p.norm_sq() / (2.0 * w2)).exp()).sum(),
            move |x| x.iter().map(|p| *p * (-(-p.norm_sq() / (2.0 * w2)).exp() / w2)).collect(),
            move |x| {
                x.iter()
                    .map(|p| {
                        let e = (-p.norm_sq() / (2.0 * w2)).exp();
                        e * (p.norm_sq() / (w2 * w2) - p.dim() as f64 / w2)
                    })
                    .sum()
            },
            Some(6.0 * width),
        )
    }

    /// Label-free F = sum_i |x_i|^2 / n.
    pub fn mean_square() -> Self {
        Self::new(
            "mean_square",
            |x| x.iter().map(Point::norm_sq).sum::<f64>() / x.len() as f64,
            |x| x.iter().map(|p| *p * (2.0 / x.len() as f64)).collect(),
            |x| 2.0 * x.first().map_or(0, Point::dim) as f64,
            None,
        )
    }
}

fn unit_gradient(x: &[Point], i: usize, k: usize, v: f64) -> Vec<Point> {
    let mut g: Vec<Point> = x.iter().map(|p| Point::zero(p.dim())).collect();
    g[i].set(k, v);
    g
}

fn grid_index(traj: &Trajectory, t: f64) -> Result<usize> {
    let k = (t / traj.dt).round();
    let ok = k >= 0.0
        && (k as usize) < traj.times.len()
        && (traj.times[k as usize] - t).abs() <= 1e-9 * traj.dt.max(t.abs());
    if !ok {
        return Err(Error::GridMismatch(format!("time {t} is not on the grid of step {}", traj.dt)));
    }
    Ok(k as usize)
}

/// r_T(w)(t) = w(T - t) on [0, T]. Events are carried to the mirrored step.
pub fn reverse_path(traj: &Trajectory, t_end: f64) -> Result<Trajectory> {
    let n = grid_index(traj, t_end)?;
    let times = traj.times[..=n].to_vec();
    let states = traj.states[..=n].iter().rev().cloned().collect();
    let events = traj
        .events
        .iter()
        .rev()
        .filter(|e| e.step >= 1 && e.step <= n)
        .map(|e| {
            let step = n + 1 - e.step;
            Event { step, time: times[step], kind: e.kind.clone() }
        })
        .collect();
    Ok(Trajectory { dt: traj.dt, times, states, events })
}

/// Generator applied to F: G = sum_i (b_i, grad_i F) + (sigma^2 / 2) Laplacian F.
pub fn generator(f: &CylinderFunction, x: &[Point], spec: &InteractionSpec) -> Result<f64> {
    let state = crate::configuration::LabeledState::new(spec.dim(), x.to_vec())?;
    let grad = f.gradient(x);
    let mut g = 0.0;
    for (i, gi) in grad.iter().enumerate() {
        if gi.norm_sq() == 0.0 {
            continue;
        }
        g += finite_n_drift(i, &state, spec)?.vector.dot(gi);
    }
    let s = spec.diffusion().scale();
    Ok(g + 0.5 * s * s * f.laplacian(x))
}

/// Pathwise martingale M_k = F(w_k) - F(w_0) - dt sum_{j<k} G(w_j).
pub fn pathwise_martingale(f: &CylinderFunction, traj: &Trajectory, spec: &InteractionSpec) -> Result<Vec<f64>> {
    let f0 = f.value(traj.states[0].positions());
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        out.push(f.value(s.positions()) - f0 - traj.dt * acc);
        acc += generator(f, s.positions(), spec)?;
    }
    Ok(out)
}

fn check_separated(x: &[Point]) -> Result<()> {
    match crate::configuration::min_pairwise_gap(x) {
        Some(gap) if gap < DEFAULT_COLLISION_TOL => Err(Error::CollisionTooClose { gap }),
        _ => Ok(()),
    }
}

fn noise_cells(traj: &Trajectory, bp: &BrownianPath) -> Result<usize> {
    let steps = traj.times.len() - 1;
    let cells = bp.cells_per(traj.dt)?;
    if bp.n_particles() < traj.n_particles() || bp.steps() < steps * cells {
        return Err(Error::GridMismatch("Brownian path does not cover the trajectory".into()));
    }
    Ok(cells)
}

/// Stochastic-integral increments dM_k = sum_i (grad_i F(w_k), sigma dB_{i,k}).
fn ito_increments(f: &CylinderFunction, traj: &Trajectory, bp: &BrownianPath, spec: &InteractionSpec) -> Result<Vec<f64>> {
    let cells = noise_cells(traj, bp)?;
    let sigma = spec.diffusion().scale();
    let steps = traj.times.len() - 1;
    (0..steps)
        .map(|k| {
            let x = traj.states[k].positions();
            check_separated(x)?;
            let grad = f.gradient(x);
            Ok(grad.iter().enumerate().map(|(i, g)| g.dot(&(bp.sum(i, k * cells, cells) * sigma))).sum())
        })
        .collect()
}

/// sup_t of the gap between the Itô sum of grad F against sigma dB and the
/// pathwise martingale F(w_t) - F(w_0) - int G.
pub fn ito_residual(f: &CylinderFunction, traj: &Trajectory, bp: &BrownianPath, spec: &InteractionSpec) -> Result<f64> {
    let dm = ito_increments(f, traj, bp, spec)?;
    let mb = pathwise_martingale(f, traj, spec)?;
    let mut ma = 0.0;
    let mut sup: f64 = (mb[0] - ma).abs();
    for (k, d) in dm.iter().enumerate() {
        ma += d;
        sup = sup.max((mb[k + 1] - ma).abs());
    }
    Ok(sup)
}

/// sup over grid times t of
/// |F(w_t) - F(w_0) - (M_t + M_{T-t}(r_T) - M_T(r_T)) / 2|, where both
/// martingales are built pathwise and the reversed one from reverse_path.
pub fn lyons_zheng_residual(
    f: &CylinderFunction,
    traj: &Trajectory,
    bp: &BrownianPath,
    spec: &InteractionSpec,
    t_end: f64,
) -> Result<f64> {
    let n = grid_index(traj, t_end)?;
    noise_cells(traj, bp)?;
    let rev = reverse_path(traj, t_end)?;
    let fwd_f: Vec<f64> = traj.states[..=n].iter().map(|s| f.value(s.positions())).collect();
    let rev_f: Vec<f64> = rev.states.iter().map(|s| f.value(s.positions())).collect();
    let fwd_g: Vec<f64> = traj.states[..n].iter().map(|s| generator(f, s.positions(), spec)).collect::<Result<_>>()?;
    let rev_g: Vec<f64> = rev.states[..n].iter().map(|s| generator(f, s.positions(), spec)).collect::<Result<_>>()?;
    let dt = traj.dt;
    // fwd_sum = sum_{j<k} G(w_j); rev_sum = sum_{n-k <= j < n} G(r_j), grown from the front
    let (mut fwd_sum, mut rev_sum) = (0.0, 0.0);
    let mut sup: f64 = 0.0;
    for k in 0..=n {
        if k > 0 {
            fwd_sum += fwd_g[k - 1];
            rev_sum = rev_g[n - k] + rev_sum;
        }
        let m_t = fwd_f[k] - fwd_f[0] - dt * fwd_sum;
        // M_{T-t}(r) - M_T(r) = -(increment of the reversed martingale over [T-t, T])
        let rev_incr = (rev_f[n] - rev_f[n - k]) - dt * rev_sum;
        let lhs = fwd_f[k] - fwd_f[0];
        sup = sup.max((lhs - 0.5 * (m_t - rev_incr)).abs());
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvResult {
    pub realized: f64,
    pub predicted: f64,
    /// |realized - predicted| / predicted, or 0 when both vanish.
    pub relative_gap: f64,
}

/// Realized sum of squared Itô increments against
/// int sigma^2 sum_i |grad_i F|^2 du.
pub fn qv_check(f: &CylinderFunction, traj: &Trajectory, bp: &BrownianPath, spec: &InteractionSpec) -> Result<QvResult> {
    let dm = ito_increments(f, traj, bp, spec)?;
    let realized: f64 = dm.iter().map(|d| d * d).sum();
    let s2 = spec.diffusion().scale().powi(2);
    let steps = traj.times.len() - 1;
    let predicted: f64 = traj.states[..steps]
        .iter()
        .map(|s| f.gradient(s.positions()).iter().map(Point::norm_sq).sum::<f64>() * s2 * traj.dt)
        .sum();
    let relative_gap = if predicted == 0.0 && realized == 0.0 { 0.0 } else { (realized - predicted).abs() / predicted };
    Ok(QvResult { realized, predicted, relative_gap })
}

/// KS p-value between statistic(w) and statistic(r_T(w)) over the ensemble.
pub fn reversibility_test(ensemble: &[Trajectory], statistic: impl Fn(&Trajectory) -> f64, t_end: f64) -> Result<f64> {
    if ensemble.len() < 20 {
        return Err(Error::InsufficientEnsemble { needed: 20, got: ensemble.len() });
    }
    let mut fwd = Vec::with_capacity(ensemble.len());
    let mut rev = Vec::with_capacity(ensemble.len());
    for traj in ensemble {
        let n = grid_index(traj, t_end)?;
        let mut head = traj.clone();
        head.times.truncate(n + 1);
        head.states.truncate(n + 1);
        head.events.retain(|e| e.step <= n);
        fwd.push(statistic(&head));
        rev.push(statistic(&reverse_path(traj, t_end)?));
    }
    Ok(ks_two_sample(&fwd, &rev).p_value)
}

/// Statistic F(w_0) - F(w_{T/2}) on a path of even step count.
pub fn half_time_increment(f: &CylinderFunction) -> impl Fn(&Trajectory) -> f64 + '_ {
    move |traj: &Trajectory| {
        let n = traj.states.len() - 1;
        f.value(traj.states[0].positions()) - f.value(traj.states[n / 2].positions())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::LabeledState;
    use crate::integrator::{simulate, SolverConfig};

    fn bm(n: usize, x0: f64, dt: f64, t: f64, seed: u64) -> (Trajectory, BrownianPath, InteractionSpec) {
        let spec = InteractionSpec::free(1).unwrap();
        let init = LabeledState::from_reals(&vec![x0; n].iter().enumerate().map(|(i, v)| v + i as f64).collect::<Vec<_>>());
        let (traj, bp) = simulate(&init, &spec, &SolverConfig::new(dt, t, seed)).unwrap();
        (traj, bp, spec)
    }

    fn constant_path(x: &[f64], steps: usize) -> Trajectory {
        let s = LabeledState::from_reals(x);
        Trajectory {
            dt: 0.01,
            times: (0..=steps).map(|k| k as f64 * 0.01).collect(),
            states: vec![s; steps + 1],
            events: Vec::new(),
        }
    }

    #[test]
    fn reverse_path_involution_and_endpoints() {
        let (traj, _, _) = bm(3, 0.0, 0.01, 0.5, 1);
        let r = reverse_path(&traj, 0.5).unwrap();
        assert_eq!(r.states[0], *traj.final_state());
        assert_eq!(*r.final_state(), traj.states[0]);
        assert_eq!(reverse_path(&r, 0.5).unwrap(), traj);
        let c = constant_path(&[0.1, 0.7], 10);
        assert_eq!(reverse_path(&c, 0.1).unwrap(), c);
        assert!(matches!(reverse_path(&traj, 0.123), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn linear_function_has_zero_ito_residual() {
        let (traj, bp, spec) = bm(1, 0.0, 1e-2, 1.0, 7);
        assert_eq!(ito_residual(&CylinderFunction::coordinate(0, 0), &traj, &bp, &spec).unwrap(), 0.0);
    }

    #[test]
    fn square_residual_is_discretization_defect() {
        let (traj, bp, spec) = bm(1, 0.3, 1e-2, 1.0, 8);
        let r = ito_residual(&CylinderFunction::coordinate_square(0, 0), &traj, &bp, &spec).unwrap();
        let cells = bp.cells_per(traj.dt).unwrap();
        let mut qv = 0.0;
        let mut sup: f64 = 0.0;
        for k in 0..traj.times.len() - 1 {
            qv += bp.sum(0, k * cells, cells).x().powi(2);
            sup = sup.max((qv - (k + 1) as f64 * traj.dt).abs());
        }
        assert!((r - sup).abs() < 1e-12, "{r} vs {sup}");
    }

    #[test]
    fn square_residual_scales_like_sqrt_dt() {
        let spread = |dt: f64| {
            let rs: Vec<f64> = (0..200)
                .map(|s| {
                    let (traj, bp, spec) = bm(1, 0.0, dt, 1.0, 100 + s);
                    ito_residual(&CylinderFunction::coordinate_square(0, 0), &traj, &bp, &spec).unwrap()
                })
                .collect();
            crate::stats::mean(&rs)
        };
        let (a, b) = (spread(1.0 / 64.0), spread(1.0 / 1024.0));
        // sqrt(16) = 4
        assert!((a / b) > 2.5 && (a / b) < 6.0, "{a} {b}");
    }

    #[test]
    fn lyons_zheng_on_constant_path_is_zero() {
        let spec = InteractionSpec::dyson_bulk(2.0, 4).unwrap();
        let c = constant_path(&[-1.5, -0.4, 0.3, 1.2], 20);
        let bp = BrownianPath::generate(4, 1, 0.01, 20, 3);
        let f = CylinderFunction::central_gap(4).unwrap();
        assert_eq!(lyons_zheng_residual(&f, &c, &bp, &spec, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn lyons_zheng_is_the_endpoint_generator_gap() {
        let spec = InteractionSpec::dyson_bulk(2.0, 6).unwrap();
        let init = LabeledState::from_reals(&[-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]);
        let (traj, bp) = simulate(&init, &spec, &SolverConfig::new(1e-3, 0.2, 5)).unwrap();
        let f = CylinderFunction::central_gap(6).unwrap();
        let lz = lyons_zheng_residual(&f, &traj, &bp, &spec, 0.2).unwrap();
        let g: Vec<f64> = traj.states.iter().map(|s| generator(&f, s.positions(), &spec).unwrap()).collect();
        let bound = g.iter().map(|v| 0.5 * traj.dt * (v - g[0]).abs()).fold(0.0, f64::max);
        assert!((lz - bound).abs() < 1e-9 * (1.0 + bound), "{lz} {bound}");
    }

    #[test]
    fn qv_of_coordinate() {
        let (traj, bp, spec) = bm(1, 0.0, 1e-3, 1.0, 11);
        let q = qv_check(&CylinderFunction::coordinate(0, 0), &traj, &bp, &spec).unwrap();
        assert!((q.predicted - 1.0).abs() < 1e-12);
        assert!(q.relative_gap < 0.1, "{q:?}");
        let z = qv_check(&CylinderFunction::constant(2.0), &traj, &bp, &spec).unwrap();
        assert_eq!((z.realized, z.predicted, z.relative_gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn reversal_invariant_statistic_gives_p_one() {
        let ens: Vec<Trajectory> = (0..30).map(|s| bm(2, 0.0, 0.01, 0.2, s).0).collect();
        let f = CylinderFunction::mean_square();
        let sup = |t: &Trajectory| t.states.iter().map(|s| f.value(s.positions())).fold(f64::MIN, f64::max);
        assert_eq!(reversibility_test(&ens, sup, 0.2).unwrap(), 1.0);
        assert!(matches!(reversibility_test(&ens[..5], sup, 0.2), Err(Error::InsufficientEnsemble { .. })));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let x = vec![Point::d1(-0.7), Point::d1(0.2), Point::d1(1.1)];
        for f in [CylinderFunction::tanh_gap(0, 2), CylinderFunction::gaussian_sum(0.8), CylinderFunction::mean_square()] {
            let h = 1e-4;
            let g = f.gradient(&x);
            let mut lap = 0.0;
            for i in 0..x.len() {
                let mut p = x.clone();
                let mut m = x.clone();
                p[i] = Point::d1(x[i].x() + h);
                m[i] = Point::d1(x[i].x() - h);
                let (fp, fm, f0) = (f.value(&p), f.value(&m), f.value(&x));
                assert!(((fp - fm) / (2.0 * h) - g[i].x()).abs() < 1e-6, "{}", f.name());
                lap += (fp - 2.0 * f0 + fm) / (h * h);
            }
            assert!((lap - f.laplacian(&x)).abs() < 1e-4, "{}", f.name());
        }
    }
}
