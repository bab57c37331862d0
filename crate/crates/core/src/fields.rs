//! Correlation functions of point fields: estimators, determinantal
//! reference kernels and equilibrium checks.

use std::f64::consts::PI;

use crate::configuration::{Configuration, Point};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::configuration::unlabel;
use crate::stats::ks_two_sample;

/// Uniform grid of `n` bins on [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Bins {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n == 0 {
            return Err(Error::InvalidParameter("bins need lo < hi and n >= 1".into()));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn index(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.n - 1))
    }

    /// Lower and upper edge of bin k.
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let a = self.lo + k as f64 * self.width();
        (a, a + self.width())
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }
}

/// Binned estimate of rho^1 (values[k]) or rho^2 (values[a * n + b]).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub order: usize,
    pub bins: Bins,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub ensemble_size: usize,
}

fn mean_and_stderr(per_member: &[Vec<f64>], cells: usize) -> (Vec<f64>, Vec<f64>) {
    let n = per_member.len() as f64;
    let mut mean = vec![0.0; cells];
    let mut sq = vec![0.0; cells];
    for m in per_member {
        for c in 0..cells {
            mean[c] += m[c];
            sq[c] += m[c] * m[c];
        }
    }
    let se = (0..cells)
        .map(|c| {
            let mu = mean[c] / n;
            let var = (sq[c] / n - mu * mu).max(0.0) * n / (n - 1.0).max(1.0);
            (var / n).sqrt()
        })
        .collect();
    (mean.iter().map(|v| v / n).collect(), se)
}

/// Counting-moment estimator of the one- or two-point correlation function
/// of a one-dimensional field.
pub fn estimate_correlation(ensemble: &[Configuration], order: usize, bins: Bins) -> Result<CorrelationEstimate> {
    if ensemble.len() < 50 {
        return Err(Error::InsufficientEnsemble { needed: 50, got: ensemble.len() });
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter(format!("correlation order {order} not in {{1, 2}}")));
    }
    if ensemble.iter().any(|c| c.dim() != 1) {
        return Err(Error::InvalidParameter("correlation estimates are one-dimensional".into()));
    }
    let w = bins.width();
    let cells = bins.n.pow(order as u32);
    let per_member: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|cfg| {
            let idx: Vec<usize> = cfg.points().iter().filter_map(|p| bins.index(p.x())).collect();
            let mut counts = vec![0.0; cells];
            if order == 1 {
                for &a in &idx {
                    counts[a] += 1.0 / w;
                }
            } else {
                for (i, &a) in idx.iter().enumerate() {
                    for (j, &b) in idx.iter().enumerate() {
                        if i != j {
                            counts[a * bins.n + b] += 1.0 / (w * w);
                        }
                    }
                }
            }
            counts
        })
        .collect();
    let (values, stderr) = mean_and_stderr(&per_member, cells);
    Ok(CorrelationEstimate { order, bins, values, stderr, ensemble_size: ensemble.len() })
}

/// sin(pi s) / (pi s), with the value 1 at s = 0.
pub fn sinc(s: f64) -> f64 {
    if s.abs() < 1e-8 {
        1.0 - (PI * s).powi(2) / 6.0
    } else {
        (PI * s).sin() / (PI * s)
    }
}

/// Correlation functions of the sine point field: rho^1 = 1,
/// rho^2(x, y) = 1 - sinc(x - y)^2.
pub fn sine_kernel_rho(order: usize, args: &[f64]) -> Result<f64> {
    match (order, args) {
        (1, [_]) => Ok(1.0),
        (2, [x, y]) => Ok(1.0 - sinc(x - y).powi(2)),
        _ => Err(Error::InvalidParameter(format!("sine kernel rho^{order} with {} arguments", args.len()))),
    }
}

/// Lanczos approximation of Gamma(z) for z > 0 (g = 7, 9 terms).
pub fn gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        return PI / ((PI * z).sin() * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut a = C[0];
    let t = z + G + 0.5;
    for (k, c) in C.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * a
}

/// J_nu(z) and J_nu'(z) from the ascending series, stopped when the term
/// ratio drops below 1e-16. Intended for nu >= 0 and moderate z.
pub fn bessel_j_and_derivative(nu: f64, z: f64) -> (f64, f64) {
    let half = z / 2.0;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut j = 0.0;
    let mut dj = 0.0;
    for k in 0..500 {
        let kf = k as f64;
        j += term;
        if z != 0.0 {
            dj += term * (2.0 * kf + nu) / z;
        } else if k == 0 && nu == 1.0 {
            dj += 0.5;
        }
        let next = -term * half * half / ((kf + 1.0) * (kf + 1.0 + nu));
        if next.abs() <= 1e-16 * j.abs().max(1e-300) && k > 2 {
            break;
        }
        term = next;
    }
    (j, dj)
}

pub fn bessel_j(nu: f64, z: f64) -> f64 {
    bessel_j_and_derivative(nu, z).0
}

/// Hard-edge Bessel kernel
/// (J(sqrt x) sqrt y J'(sqrt y) - sqrt x J'(sqrt x) J(sqrt y)) / (2 (x - y)),
/// with the diagonal (J_a^2 - J_{a+1} J_{a-1}) / 4 at sqrt x.
pub fn bessel_kernel(x: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::NonPositiveArgument(x.min(y)));
    }
    if x == y {
        let s = x.sqrt();
        let j = bessel_j(alpha, s);
        return Ok(0.25 * (j * j - bessel_j(alpha + 1.0, s) * bessel_j(alpha - 1.0, s)));
    }
    let (x, y) = if x < y { (x, y) } else { (y, x) };
    Ok(bessel_numerator(x, y, alpha) / (2.0 * (x - y)))
}

fn bessel_numerator(x: f64, y: f64, alpha: f64) -> f64 {
    let (sx, sy) = (x.sqrt(), y.sqrt());
    let (jx, djx) = bessel_j_and_derivative(alpha, sx);
    let (jy, djy) = bessel_j_and_derivative(alpha, sy);
    jx * sy * djy - sx * djx * jy
}

/// rho^2 of a field as a function of separation, averaged over reference
/// points in a central window: values[k] estimates the mean of rho^2(x, x+s)
/// over x in the window and s in bin k (both signs of s pooled).
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationEstimate {
    pub bins: Bins,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub ensemble_size: usize,
}

pub fn estimate_pair_by_separation(ensemble: &[Configuration], half_width: f64, bins: Bins) -> Result<SeparationEstimate> {
    if ensemble.len() < 50 {
        return Err(Error::InsufficientEnsemble { needed: 50, got: ensemble.len() });
    }
    if bins.lo < 0.0 {
        return Err(Error::InvalidParameter("separation bins must start at 0 or later".into()));
    }
    let norm = 1.0 / (2.0 * half_width * 2.0 * bins.width());
    let per_member: Vec<Vec<f64>> = ensemble
        .iter()
        .map(|cfg| {
            let mut xs: Vec<f64> = cfg.points().iter().map(Point::x).collect();
            xs.sort_by(f64::total_cmp);
            let mut counts = vec![0.0; bins.n];
            for (i, &x) in xs.iter().enumerate() {
                if x.abs() >= half_width {
                    continue;
                }
                for (j, &y) in xs.iter().enumerate() {
                    if i != j {
                        if let Some(k) = bins.index((y - x).abs()) {
                            counts[k] += norm;
                        }
                    }
                }
            }
            counts
        })
        .collect();
    let (values, stderr) = mean_and_stderr(&per_member, bins.n);
    Ok(SeparationEstimate { bins, values, stderr, ensemble_size: ensemble.len() })
}

/// Bin average of 1 - sinc(s)^2 by Simpson's rule.
pub fn sine_pair_bin_average(a: f64, b: f64) -> f64 {
    let n = 200;
    let h = (b - a) / n as f64;
    let f = |s: f64| 1.0 - sinc(s).powi(2);
    let mut sum = f(a) + f(b);
    for k in 1..n {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0 / (b - a)
}

/// sup over bins of |estimate - reference bin average|, with the stderr of
/// the maximizing bin.
pub fn sup_gap(est: &SeparationEstimate, reference: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    (0..est.bins.n)
        .map(|k| {
            let (a, b) = est.bins.edges(k);
            ((est.values[k] - reference(a, b)).abs(), est.stderr[k])
        })
        .fold((0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
}

#[derive(Debug, Clone, PartialEq)]
pub struct H1Report {
    pub n_values: Vec<usize>,
    pub sup_gaps: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Each gap is below its predecessor up to two standard errors.
    pub decreasing: bool,
    pub strictly_decreasing: bool,
}

/// Compares rho^2 of unfolded finite-N samples with the sine kernel along a
/// ladder of N. Each entry holds N and configurations unfolded to unit
/// density; the reference window is the central `window_fraction` of the
/// points, |x| < window_fraction * N / 2.
pub fn h1_convergence_check(
    ladder: &[(usize, Vec<Configuration>)],
    window_fraction: f64,
    bins: Bins,
) -> Result<H1Report> {
    if ladder.len() < 3 {
        return Err(Error::InsufficientEnsemble { needed: 3, got: ladder.len() });
    }
    let mut sup_gaps = Vec::new();
    let mut stderr = Vec::new();
    for (n, ens) in ladder {
        let est = estimate_pair_by_separation(ens, window_fraction * *n as f64 / 2.0, bins)?;
        let (g, se) = sup_gap(&est, sine_pair_bin_average);
        sup_gaps.push(g);
        stderr.push(se);
    }
    let decreasing = sup_gaps.windows(2).zip(stderr.windows(2)).all(|(g, s)| g[1] <= g[0] + 2.0 * (s[0] + s[1]));
    let strictly_decreasing = sup_gaps.windows(2).all(|g| g[1] < g[0]);
    Ok(H1Report { n_values: ladder.iter().map(|(n, _)| *n).collect(), sup_gaps, stderr, decreasing, strictly_decreasing })
}

/// KS p-value between statistic(X_0) and statistic(X_T) over the ensemble.
pub fn stationarity_test(ensemble: &[Trajectory], statistic: impl Fn(&Configuration) -> f64) -> Result<f64> {
    if ensemble.len() < 10 {
        return Err(Error::InsufficientEnsemble { needed: 10, got: ensemble.len() });
    }
    let start: Vec<f64> = ensemble.iter().map(|t| statistic(&unlabel(&t.states[0]))).collect();
    let end: Vec<f64> = ensemble.iter().map(|t| statistic(&unlabel(t.final_state()))).collect();
    Ok(ks_two_sample(&start, &end).p_value)
}
