//! Point clouds, labels and the m-labeled split.
//!
//! A [`Configuration`] is an unordered finite multiset of points. Labels are
//! imposed by [`label`], which orders points by increasing modulus with a
//! lexicographic tie-break so replays are reproducible.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// A point of R^d, d in {1, 2, 3}. Unused trailing coordinates are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; 3],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        let dim = coords.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        let mut c = [0.0; 3];
        c[..dim].copy_from_slice(coords);
        Ok(Self { coords: c, dim: dim as u8 })
    }

    pub fn d1(x: f64) -> Self {
        Self { coords: [x, 0.0, 0.0], dim: 1 }
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Self { coords: [x, y, 0.0], dim: 2 }
    }

    pub fn d3(x: f64, y: f64, z: f64) -> Self {
        Self { coords: [x, y, z], dim: 3 }
    }

    pub fn zero(dim: usize) -> Self {
        Self { coords: [0.0; 3], dim: dim as u8 }
    }

    /// Unit vector along axis `k`.
    pub fn axis(dim: usize, k: usize) -> Self {
        let mut p = Self::zero(dim);
        p.coords[k] = 1.0;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.coords[k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: f64) {
        self.coords[k] = v;
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        self.coords[0] * other.coords[0]
            + self.coords[1] * other.coords[1]
            + self.coords[2] * other.coords[2]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// Lexicographic total order on the coordinates.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for k in 0..3 {
            match self.coords[k].total_cmp(&other.coords[k]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    /// Label order: increasing modulus, ties broken lexicographically.
    pub fn label_cmp(&self, other: &Point) -> Ordering {
        self.norm_sq()
            .total_cmp(&other.norm_sq())
            .then_with(|| self.lex_cmp(other))
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point {
            coords: [
                self.coords[0] + rhs.coords[0],
                self.coords[1] + rhs.coords[1],
                self.coords[2] + rhs.coords[2],
            ],
            dim: self.dim,
        }
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        for k in 0..3 {
            self.coords[k] += rhs.coords[k];
        }
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point {
            coords: [
                self.coords[0] - rhs.coords[0],
                self.coords[1] - rhs.coords[1],
                self.coords[2] - rhs.coords[2],
            ],
            dim: self.dim,
        }
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point {
            coords: [self.coords[0] * s, self.coords[1] * s, self.coords[2] * s],
            dim: self.dim,
        }
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        self * -1.0
    }
}

/// Finite multiset of points in R^d. Equality ignores point order.
#[derive(Debug, Clone)]
pub struct Configuration {
    dim: usize,
    points: Vec<Point>,
}

impl Configuration {
    pub fn new(dim: usize, points: Vec<Point>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != dim || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "point {:?} does not live in finite R^{dim}",
                p.coords()
            )));
        }
        Ok(Self { dim, points })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, points: Vec::new() }
    }

    /// Convenience constructor for d = 1.
    pub fn from_reals(xs: &[f64]) -> Self {
        Self { dim: 1, points: xs.iter().map(|&x| Point::d1(x)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points in the closed ball of radius `r` about the origin.
    pub fn count_closed_ball(&self, r: f64) -> usize {
        let r2 = r * r;
        self.points.iter().filter(|p| p.norm_sq() <= r2).count()
    }

    /// Number of points in the open ball of radius `r` about the origin.
    pub fn count_open_ball(&self, r: f64) -> usize {
        let r2 = r * r;
        self.points.iter().filter(|p| p.norm_sq() < r2).count()
    }

    pub fn max_modulus(&self) -> f64 {
        self.points.iter().map(Point::norm).fold(0.0, f64::max)
    }

    /// True iff every pairwise distance exceeds `tol`.
    pub fn is_simple(&self, tol: f64) -> bool {
        self.first_close_pair(tol).is_none()
    }

    pub(crate) fn first_close_pair(&self, tol: f64) -> Option<(usize, usize)> {
        let n = self.points.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.points[i].dist(&self.points[j]) <= tol {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Points sorted lexicographically; a canonical form for multiset equality.
    pub fn canonical(&self) -> Vec<Point> {
        let mut v = self.points.clone();
        v.sort_by(Point::lex_cmp);
        v
    }

    pub fn merged(&self, other: &Configuration) -> Configuration {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Configuration { dim: self.dim, points }
    }

    /// Text form: `# dim=<d> n=<count>` then one point per line with
    /// 17 significant digits per coordinate.
    pub fn to_text(&self) -> String {
        let mut out = format!("# dim={} n={}\n", self.dim, self.points.len());
        for p in &self.points {
            let line: Vec<String> = p.coords().iter().map(|c| fmt_f64(*c)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("missing header line".into()))?;
        let (dim, n) = parse_header(header)?;
        let mut points = Vec::with_capacity(n);
        for line in lines {
            let coords = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::InvalidParameter(format!("bad coordinate {t:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if coords.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "expected {dim} coordinates, got {}",
                    coords.len()
                )));
            }
            points.push(Point::new(&coords)?);
        }
        if points.len() != n {
            return Err(Error::InvalidParameter(format!(
                "header announces {n} points, found {}",
                points.len()
            )));
        }
        Configuration::new(dim, points)
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.canonical() == other.canonical()
    }
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let body = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::InvalidParameter(format!("bad header {header:?}")))?;
    let mut dim = None;
    let mut n = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("dim=") {
            dim = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        }
    }
    match (dim, n) {
        (Some(d), Some(n)) => Ok((d, n)),
        _ => Err(Error::InvalidParameter(format!("bad header {header:?}"))),
    }
}

/// Scientific notation with 17 significant digits; round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Positions in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledState {
    dim: usize,
    positions: Vec<Point>,
}

impl LabeledState {
    /// Wraps positions in the given order, which becomes the label order.
    pub fn new(dim: usize, positions: Vec<Point>) -> Result<Self> {
        let cfg = Configuration::new(dim, positions)?;
        Ok(Self { dim, positions: cfg.points })
    }

    pub fn from_reals(xs: &[f64]) -> Self {
        Self { dim: 1, positions: xs.iter().map(|&x| Point::d1(x)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [Point] {
        &mut self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_gap(&self) -> Option<f64> {
        min_pairwise_gap(&self.positions)
    }
}

pub(crate) fn min_pairwise_gap(points: &[Point]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    if points[0].dim() == 1 {
        let mut xs: Vec<f64> = points.iter().map(Point::x).collect();
        xs.sort_by(f64::total_cmp);
        return xs.windows(2).map(|w| w[1] - w[0]).reduce(f64::min);
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.min(points[i].dist(&points[j]));
        }
    }
    Some(best)
}

/// m tagged particles plus the unlabeled rest.
#[derive(Debug, Clone, PartialEq)]
pub struct MLabeledState {
    pub tagged: Vec<Point>,
    pub environment: Configuration,
}

impl MLabeledState {
    pub fn m(&self) -> usize {
        self.tagged.len()
    }

    /// Tagged points together with the environment, as one configuration.
    pub fn recombine(&self) -> Configuration {
        let mut points = self.tagged.clone();
        points.extend_from_slice(self.environment.points());
        Configuration { dim: self.environment.dim(), points }
    }
}

pub fn unlabel(state: &LabeledState) -> Configuration {
    Configuration { dim: state.dim, points: state.positions.clone() }
}

/// Orders a simple configuration by modulus (lexicographic tie-break).
pub fn label(cfg: &Configuration) -> Result<LabeledState> {
    if let Some((i, j)) = cfg.first_close_pair(0.0) {
        return Err(Error::NonSimpleConfiguration(i, j));
    }
    let mut positions = cfg.points.clone();
    positions.sort_by(Point::label_cmp);
    Ok(LabeledState { dim: cfg.dim, positions })
}

pub fn split_m(state: &LabeledState, m: usize) -> Result<MLabeledState> {
    if m > state.len() {
        return Err(Error::IndexOutOfRange { index: m, len: state.len() });
    }
    Ok(MLabeledState {
        tagged: state.positions[..m].to_vec(),
        environment: Configuration { dim: state.dim, points: state.positions[m..].to_vec() },
    })
}
