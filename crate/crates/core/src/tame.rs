//! Tame sets: configurations whose ball counts obey a growth schedule.

use crate::configuration::Configuration;
use crate::error::{Error, Result};

/// How the level constant C(q) grows with q.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelScale {
    /// C(q) = slope * q.
    Linear(f64),
    /// C(q) = first * ratio^(q-1).
    Geometric { first: f64, ratio: f64 },
    /// C(q) = table[q-1]; levels past the table end are treated as unbounded.
    Explicit(Vec<f64>),
}

impl LevelScale {
    fn at(&self, q: u32) -> f64 {
        match self {
            LevelScale::Linear(s) => s * q as f64,
            LevelScale::Geometric { first, ratio } => first * ratio.powi(q as i32 - 1),
            LevelScale::Explicit(t) => t.get(q as usize - 1).copied().unwrap_or(f64::INFINITY),
        }
    }
}

/// The schedule a_q(r) = ceil(C(q) r^alpha) for r = 1, 2, ...
#[derive(Debug, Clone, PartialEq)]
pub struct TameSchedule {
    pub growth_exponent: f64,
    pub level_scale: LevelScale,
    /// Largest radius checked; `None` means every radius.
    pub max_radius: Option<u32>,
    /// Levels above this report [`TameLevel::Infinite`].
    pub level_ceiling: u32,
}

/// Result of [`TameSchedule::tame_level`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TameLevel {
    Finite(u32),
    Infinite,
}

impl TameSchedule {
    pub fn new(growth_exponent: f64, level_scale: LevelScale, max_radius: Option<u32>) -> Result<Self> {
        if !(growth_exponent > 0.0) {
            return Err(Error::InvalidParameter("growth exponent must be positive".into()));
        }
        let s = Self { growth_exponent, level_scale, max_radius, level_ceiling: 64 };
        for q in 1..=8 {
            let c = s.level_scale.at(q);
            if !(c > 0.0) || s.level_scale.at(q + 1) <= c {
                return Err(Error::InvalidParameter("level scale must be positive and increasing".into()));
            }
        }
        Ok(s)
    }

    /// a_q(r) = ceil(q * rho * r^d), with `rho` the expected number of points
    /// per unit of r^d (density times unit-ball volume).
    pub fn density_default(dim: usize, rho: f64) -> Self {
        Self {
            growth_exponent: dim as f64,
            level_scale: LevelScale::Linear(rho),
            max_radius: None,
            level_ceiling: 64,
        }
    }

    pub fn with_max_radius(mut self, max_radius: Option<u32>) -> Self {
        self.max_radius = max_radius;
        self
    }

    pub fn a(&self, q: u32, r: u32) -> u64 {
        let v = (self.level_scale.at(q) * (r as f64).powf(self.growth_exponent)).ceil();
        if v >= u64::MAX as f64 {
            u64::MAX
        } else {
            v as u64
        }
    }

    /// a_q^+(r) = 1 + a_q(r + 1).
    pub fn a_plus(&self, q: u32, r: u32) -> u64 {
        self.a(q, r + 1).saturating_add(1)
    }

    /// Checks a_q(r) < a_q(r+1), a_q(r) < a_{q+1}(r) and a_q^+(r) < a_{q+1}(r)
    /// on the given range.
    pub fn satisfies_inclusion_chain(&self, q_max: u32, r_max: u32) -> bool {
        (1..=q_max).all(|q| {
            (1..=r_max).all(|r| {
                self.a(q, r) < self.a(q, r + 1)
                    && self.a(q, r) < self.a(q + 1, r)
                    && self.a_plus(q, r) < self.a(q + 1, r)
            })
        })
    }

    fn radii(&self, cfg: &Configuration, cap: Option<u32>) -> u32 {
        match cap {
            Some(q) => q,
            // past the outermost point counts are constant while a_q grows
            None => cfg.max_modulus().ceil() as u32 + 1,
        }
    }

    /// Membership in K_Q[a_q] with Q = `cap` (closed balls).
    pub fn contains_capped(&self, cfg: &Configuration, q: u32, cap: Option<u32>) -> bool {
        (1..=self.radii(cfg, cap)).all(|r| cfg.count_closed_ball(r as f64) as u64 <= self.a(q, r))
    }

    /// Membership in K_Q[a_q^+].
    pub fn contains_plus_capped(&self, cfg: &Configuration, q: u32, cap: Option<u32>) -> bool {
        (1..=self.radii(cfg, cap))
            .all(|r| cfg.count_closed_ball(r as f64) as u64 <= self.a_plus(q, r))
    }

    pub fn contains(&self, cfg: &Configuration, q: u32) -> bool {
        self.contains_capped(cfg, q, self.max_radius)
    }

    /// Smallest q with cfg in K[a_q].
    pub fn tame_level(&self, cfg: &Configuration) -> TameLevel {
        (1..=self.level_ceiling)
            .find(|&q| self.contains(cfg, q))
            .map_or(TameLevel::Infinite, TameLevel::Finite)
    }
}
