//! CSV persistence of trajectories and Brownian paths. Floats are written
//! with 17 significant digits so files read back bit for bit.

use std::fmt::Write as _;

use crate::configuration::{fmt_f64, LabeledState, Point};
use crate::error::{Error, Result};
use crate::integrator::{BrownianPath, Trajectory};

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn header_fields(line: &str) -> Vec<(&str, &str)> {
    line.trim_start_matches('#').split_whitespace().filter_map(|f| f.split_once('=')).collect()
}

fn field<'a>(fields: &[(&'a str, &'a str)], key: &str) -> Result<&'a str> {
    fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| bad(format!("header lacks `{key}`")))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| bad(format!("cannot parse `{s}`")))
}

/// `# model=<kind> N=<n> dt=<dt> T=<T> seed=<seed>`, a column line, then
/// one row `t,i,x1,..,xd` per particle and grid time (labels from 0).
pub fn write_trajectory_csv(traj: &Trajectory, model: &str, seed: u64) -> String {
    let d = traj.dim();
    let mut out = format!(
        "# model={model} N={} dt={} T={} seed={seed}\n",
        traj.n_particles(),
        fmt_f64(traj.dt),
        fmt_f64(traj.horizon())
    );
    out.push_str("t,i");
    for k in 1..=d {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (i, p) in s.positions().iter().enumerate() {
            let _ = write!(out, "{},{i}", fmt_f64(*t));
            for c in p.coords() {
                let _ = write!(out, ",{}", fmt_f64(*c));
            }
            out.push('\n');
        }
    }
    out
}

/// Reads a trajectory written by [`write_trajectory_csv`]. Events are not
/// stored and come back empty.
pub fn read_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines();
    let head = header_fields(lines.next().ok_or_else(|| bad("empty trajectory file"))?);
    let n: usize = parse(field(&head, "N")?)?;
    let dt: f64 = parse(field(&head, "dt")?)?;
    lines.next();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut current: Vec<Point> = Vec::with_capacity(n);
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(bad(format!("short row `{line}`")));
        }
        let t: f64 = parse(cols[0])?;
        let i: usize = parse(cols[1])?;
        if i != current.len() {
            return Err(bad(format!("row label {i} out of order")));
        }
        let coords = cols[2..].iter().map(|c| parse(c)).collect::<Result<Vec<f64>>>()?;
        let dim = coords.len();
        current.push(Point::new(&coords)?);
        if current.len() == n {
            times.push(t);
            states.push(LabeledState::new(dim, std::mem::take(&mut current))?);
        }
    }
    if !current.is_empty() || states.is_empty() {
        return Err(bad("incomplete final state"));
    }
    Ok(Trajectory { dt, times, states, events: Vec::new() })
}

/// `# N=<n> dim=<d> finest_dt=<dt> steps=<s> seed=<seed>`, a column line,
/// then rows `step,i,dB1,..,dBd`.
pub fn write_brownian_csv(bp: &BrownianPath, seed: u64) -> String {
    let d = bp.dim();
    let mut out = format!(
        "# N={} dim={d} finest_dt={} steps={} seed={seed}\n",
        bp.n_particles(),
        fmt_f64(bp.finest_dt()),
        bp.steps()
    );
    out.push_str("step,i");
    for k in 1..=d {
        let _ = write!(out, ",dB{k}");
    }
    out.push('\n');
    for s in 0..bp.steps() {
        for i in 0..bp.n_particles() {
            let _ = write!(out, "{s},{i}");
            for c in bp.increment(s, i).coords() {
                let _ = write!(out, ",{}", fmt_f64(*c));
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_brownian_csv(text: &str) -> Result<BrownianPath> {
    let mut lines = text.lines();
    let head = header_fields(lines.next().ok_or_else(|| bad("empty Brownian file"))?);
    let n: usize = parse(field(&head, "N")?)?;
    let dim: usize = parse(field(&head, "dim")?)?;
    let finest_dt: f64 = parse(field(&head, "finest_dt")?)?;
    lines.next();
    let mut inc = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 + dim {
            return Err(bad(format!("row `{line}` has {} columns, expected {}", cols.len(), 2 + dim)));
        }
        for c in &cols[2..] {
            inc.push(parse(c)?);
        }
    }
    BrownianPath::from_increments(n, dim, finest_dt, inc)
}
