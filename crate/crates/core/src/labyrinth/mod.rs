//! Random walks in random reflecting labyrinths on a box of `Z^d`.
//!
//! Each vertex is an rw point, where the walker picks one of the `2d`
//! directions uniformly, or carries a reflector that deflects it
//! deterministically. Walks are indexed both by lattice steps and by visits
//! to rw points.

mod reflector;

pub use reflector::{
    axis, catalog_entry, dir_name, negate, reflector_catalog, sign, validate_reflector, Dir, Reflector,
};

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::percolation::check_replicas;
use crate::seed::{derive_seed, RngSeed};
use crate::stats::{least_squares, Estimate, LinearFit};

pub const MAX_DIM: usize = 4;
/// Slopes below this mark a walk as localized.
pub const LOCALIZED_SLOPE: f64 = 0.01;
/// Relative change of `msd / n` between the last two quarters of the curve
/// tolerated by the stabilization check.
pub const STABILITY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    Rw,
    Cross,
    Mirror(u16),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Walkers stop when they would leave the box.
    #[default]
    Halt,
    Periodic,
}

/// Law of the tags: rw point with probability `p_rw`, crossing with
/// `p_cross`, otherwise a reflector drawn from the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub p_rw: f64,
    #[serde(default)]
    pub p_cross: f64,
    /// Catalog names. Empty means every catalog reflector but the crossing.
    #[serde(default)]
    pub reflectors: Vec<String>,
    /// Weights matching `reflectors`. Empty means uniform.
    #[serde(default)]
    pub weights: Vec<f64>,
}

impl EnvParams {
    pub fn new(p_rw: f64, p_cross: f64) -> Self {
        EnvParams { p_rw, p_cross, reflectors: Vec::new(), weights: Vec::new() }
    }

    pub fn with_reflectors(mut self, names: &[&str], weights: &[f64]) -> Self {
        self.reflectors = names.iter().map(|s| s.to_string()).collect();
        self.weights = weights.to_vec();
        self
    }

    /// Reflectors and cumulative normalized weights.
    pub fn resolve(&self, dim: usize) -> Result<(Vec<Reflector>, Vec<f64>)> {
        check_probability(self.p_rw)?;
        check_probability(self.p_cross)?;
        if self.p_rw + self.p_cross > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "p_rw + p_cross = {} exceeds 1",
                self.p_rw + self.p_cross
            )));
        }
        let reflectors: Vec<Reflector> = if self.reflectors.is_empty() {
            reflector_catalog(dim).into_iter().filter(|r| !r.is_crossing()).collect()
        } else {
            self.reflectors.iter().map(|n| catalog_entry(dim, n)).collect::<Result<_>>()?
        };
        if let Some(r) = reflectors.iter().find(|r| r.is_crossing()) {
            return Err(Error::InvalidReflector(format!(
                "{} is the crossing; its mass belongs in p_cross",
                r.name
            )));
        }
        let weights = if self.weights.is_empty() { vec![1.0; reflectors.len()] } else { self.weights.clone() };
        if weights.len() != reflectors.len() {
            return Err(Error::LengthMismatch { expected: reflectors.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("reflector weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("reflector weights sum to zero".into()));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok((reflectors, cumulative))
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > MAX_DIM || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("box dimensions {dims:?} must be 1 to {MAX_DIM} positive sides")));
    }
    Ok(())
}

/// Tags on a box, indexed row-major with the last coordinate fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabyrinthEnv {
    dims: Vec<usize>,
    strides: Vec<usize>,
    tags: Vec<Tag>,
    reflectors: Vec<Reflector>,
}

impl LabyrinthEnv {
    pub fn from_tags(dims: &[usize], tags: Vec<Tag>, reflectors: Vec<Reflector>) -> Result<Self> {
        check_dims(dims)?;
        let volume: usize = dims.iter().product();
        if tags.len() != volume {
            return Err(Error::LengthMismatch { expected: volume, found: tags.len() });
        }
        for r in &reflectors {
            if r.dim() != dims.len() || !validate_reflector(&r.table) {
                return Err(Error::InvalidReflector(format!("{} does not fit dimension {}", r.name, dims.len())));
            }
        }
        if let Some(Tag::Mirror(i)) = tags.iter().find(|t| matches!(t, Tag::Mirror(i) if *i as usize >= reflectors.len())) {
            return Err(Error::IndexOutOfRange { index: *i as usize, len: reflectors.len() });
        }
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Ok(LabyrinthEnv { dims: dims.to_vec(), strides, tags, reflectors })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn volume(&self) -> usize {
        self.tags.len()
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn tag(&self, v: usize) -> Tag {
        self.tags[v]
    }

    pub fn reflectors(&self) -> &[Reflector] {
        &self.reflectors
    }

    pub fn is_rw(&self, v: usize) -> bool {
        self.tags[v] == Tag::Rw
    }

    pub fn index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dims.len() || coords.iter().zip(&self.dims).any(|(c, d)| c >= d) {
            return None;
        }
        Some(coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum())
    }

    pub fn coords(&self, v: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.dims).map(|(s, d)| (v / s) % d).collect()
    }

    pub fn rw_points(&self) -> Vec<usize> {
        (0..self.volume()).filter(|&v| self.is_rw(v)).collect()
    }

    /// The rw point closest to the centre of the box, lowest index on ties.
    pub fn central_rw_point(&self) -> Option<usize> {
        let centre: Vec<f64> = self.dims.iter().map(|&d| (d as f64 - 1.0) / 2.0).collect();
        let dist = |v: usize| -> f64 {
            self.coords(v).iter().zip(&centre).map(|(&c, m)| (c as f64 - m).powi(2)).sum()
        };
        self.rw_points().into_iter().min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
    }

    /// Neighbour of `v` in direction `u`; `None` if it leaves a halting box.
    pub fn step(&self, v: usize, u: Dir, boundary: BoundaryPolicy) -> Option<usize> {
        let k = axis(u);
        let c = (v / self.strides[k]) % self.dims[k];
        let next = if sign(u) > 0 {
            if c + 1 < self.dims[k] {
                c + 1
            } else if boundary == BoundaryPolicy::Periodic {
                0
            } else {
                return None;
            }
        } else if c > 0 {
            c - 1
        } else if boundary == BoundaryPolicy::Periodic {
            self.dims[k] - 1
        } else {
            return None;
        };
        Some(v - c * self.strides[k] + next * self.strides[k])
    }

    /// Outgoing heading at a non-rw vertex for incoming heading `u`.
    pub fn deflect(&self, v: usize, u: Dir) -> Dir {
        match self.tags[v] {
            Tag::Mirror(i) => self.reflectors[i as usize].apply(u),
            _ => u,
        }
    }

    fn tag_char(&self, t: Tag) -> char {
        match t {
            Tag::Rw => 'o',
            Tag::Cross => '+',
            Tag::Mirror(i) => char::from_digit(10 + i as u32, 36).unwrap_or('?'),
        }
    }

    /// One character per vertex (`o` rw point, `+` crossing, letters for
    /// reflectors), one line per run of the last coordinate, followed by
    /// the reflector tables.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "# labyrinth dims {}", dims.join(" "));
        let row = *self.dims.last().expect("non-empty dims");
        for chunk in self.tags.chunks(row) {
            out.extend(chunk.iter().map(|&t| self.tag_char(t)));
            out.push('\n');
        }
        out.push_str("# reflectors\n");
        for (i, r) in self.reflectors.iter().enumerate() {
            let table: Vec<String> = r.table.iter().map(|&u| dir_name(u)).collect();
            let _ = writeln!(out, "{} {} {}", self.tag_char(Tag::Mirror(i as u16)), r.name, table.join(" "));
        }
        out
    }
}

pub fn sample_environment(dims: &[usize], params: &EnvParams, seed: RngSeed) -> Result<LabyrinthEnv> {
    check_dims(dims)?;
    let (reflectors, cumulative) = params.resolve(dims.len())?;
    let volume: usize = dims.iter().product();
    let mut rng = seed.rng();
    let tags = (0..volume)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < params.p_rw {
                Tag::Rw
            } else if u < params.p_rw + params.p_cross {
                Tag::Cross
            } else {
                let w: f64 = rng.gen();
                let i = cumulative.iter().position(|&c| w < c).unwrap_or(cumulative.len() - 1);
                Tag::Mirror(i as u16)
            }
        })
        .collect();
    LabyrinthEnv::from_tags(dims, tags, reflectors)
}

/// The 3x3 box whose centre is an rw point walled in by four reversal
/// reflectors; corners are crossings. Returns the box and its centre.
pub fn trap_environment() -> (LabyrinthEnv, usize) {
    let r = Tag::Mirror(0);
    let tags = vec![Tag::Cross, r, Tag::Cross, r, Tag::Rw, r, Tag::Cross, r, Tag::Cross];
    let env = LabyrinthEnv::from_tags(&[3, 3], tags, vec![Reflector::reversal(2)]).expect("valid trap");
    (env, 4)
}

/// Vertices visited and the heading of each move, so
/// `vertices.len() == headings.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vertices: Vec<usize>,
    pub headings: Vec<Dir>,
}

impl Trajectory {
    pub fn reversed(&self) -> Trajectory {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let headings = self.headings.iter().rev().map(|&u| negate(u)).collect();
        Trajectory { vertices, headings }
    }

    /// Headings chosen at interior rw points, in order.
    pub fn rw_choices(&self, env: &LabyrinthEnv) -> Vec<Dir> {
        (1..self.headings.len()).filter(|&i| env.is_rw(self.vertices[i])).map(|i| self.headings[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkOptions {
    pub boundary: BoundaryPolicy,
    pub record_path: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkState {
    pub position: usize,
    /// Heading of the last move.
    pub heading: Option<Dir>,
    /// Unwrapped displacement from the start.
    pub displacement: Vec<i64>,
    /// `X_0, X_1, ...`: rw points in visiting order.
    pub rw_visits: Vec<usize>,
    /// Unwrapped displacement at each rw visit.
    pub rw_displacements: Vec<Vec<i64>>,
    pub lattice_steps: usize,
    /// Stopped at the box boundary before the step budget ran out.
    pub halted: bool,
    pub path: Option<Trajectory>,
}

struct Walker<'e> {
    env: &'e LabyrinthEnv,
    boundary: BoundaryPolicy,
    position: usize,
    heading: Option<Dir>,
    displacement: Vec<i64>,
}

impl<'e> Walker<'e> {
    fn new(env: &'e LabyrinthEnv, start: usize, boundary: BoundaryPolicy) -> Self {
        Walker { env, boundary, position: start, heading: None, displacement: vec![0; env.dim()] }
    }

    fn forced_heading(&self) -> Dir {
        let incoming = self.heading.expect("a reflector is only reached by moving");
        self.env.deflect(self.position, incoming)
    }

    fn advance(&mut self, u: Dir) -> bool {
        let Some(next) = self.env.step(self.position, u, self.boundary) else {
            return false;
        };
        self.position = next;
        self.heading = Some(u);
        self.displacement[axis(u)] += sign(u);
        true
    }
}

fn check_start(env: &LabyrinthEnv, start: usize) -> Result<()> {
    if start >= env.volume() {
        return Err(Error::IndexOutOfRange { index: start, len: env.volume() });
    }
    if !env.is_rw(start) {
        return Err(Error::InvalidParameter(format!("start vertex {start} is not an rw point")));
    }
    Ok(())
}

/// Walk of `steps` lattice moves from the rw point `start`.
pub fn run_walk(env: &LabyrinthEnv, start: usize, steps: usize, seed: RngSeed, options: WalkOptions) -> Result<WalkState> {
    check_start(env, start)?;
    let mut rng = seed.rng();
    let choices = 2 * env.dim() as Dir;
    let mut w = Walker::new(env, start, options.boundary);
    let mut rw_visits = vec![start];
    let mut rw_displacements = vec![w.displacement.clone()];
    let mut path = options.record_path.then(|| Trajectory { vertices: vec![start], headings: Vec::new() });
    let mut halted = false;
    let mut taken = 0;
    while taken < steps {
        let u = if env.is_rw(w.position) { rng.gen_range(0..choices) } else { w.forced_heading() };
        if !w.advance(u) {
            halted = true;
            break;
        }
        taken += 1;
        if let Some(p) = path.as_mut() {
            p.vertices.push(w.position);
            p.headings.push(u);
        }
        if env.is_rw(w.position) {
            rw_visits.push(w.position);
            rw_displacements.push(w.displacement.clone());
        }
    }
    Ok(WalkState {
        position: w.position,
        heading: w.heading,
        displacement: w.displacement,
        rw_visits,
        rw_displacements,
        lattice_steps: taken,
        halted,
        path,
    })
}

/// Squared displacements `|X_n - X_0|^2` for `n = 0..=t_max` in rw time,
/// truncated where the walker halts at the boundary.
pub fn walk_rw_time(
    env: &LabyrinthEnv,
    start: usize,
    t_max: usize,
    seed: RngSeed,
    boundary: BoundaryPolicy,
) -> Result<Vec<u64>> {
    check_start(env, start)?;
    let mut rng = seed.rng();
    let choices = 2 * env.dim() as Dir;
    let mut w = Walker::new(env, start, boundary);
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(0);
    while out.len() <= t_max {
        let u = if env.is_rw(w.position) { rng.gen_range(0..choices) } else { w.forced_heading() };
        if !w.advance(u) {
            break;
        }
        if env.is_rw(w.position) {
            out.push(w.displacement.iter().map(|&x| (x * x) as u64).sum());
        }
    }
    Ok(out)
}

/// Deterministic walk from `start` leaving along `first`, taking the given
/// headings at rw points met after the start.
pub fn replay(
    env: &LabyrinthEnv,
    start: usize,
    first: Dir,
    rw_choices: &[Dir],
    steps: usize,
    boundary: BoundaryPolicy,
) -> Result<Trajectory> {
    if start >= env.volume() {
        return Err(Error::IndexOutOfRange { index: start, len: env.volume() });
    }
    let mut w = Walker::new(env, start, boundary);
    let mut traj = Trajectory { vertices: vec![start], headings: Vec::new() };
    let mut choices = rw_choices.iter();
    let mut u = first;
    for i in 0..steps {
        if i > 0 {
            u = if env.is_rw(w.position) {
                *choices.next().ok_or_else(|| Error::InvalidParameter("ran out of rw choices".into()))?
            } else {
                w.forced_heading()
            };
        }
        if !w.advance(u) {
            break;
        }
        traj.vertices.push(w.position);
        traj.headings.push(u);
    }
    Ok(traj)
}

/// Consecutive vertices adjacent along the recorded headings, and every
/// interior non-rw vertex passed according to its reflector.
pub fn is_admissible(env: &LabyrinthEnv, traj: &Trajectory, boundary: BoundaryPolicy) -> bool {
    if traj.vertices.len() != traj.headings.len() + 1 {
        return false;
    }
    let moves_ok = traj
        .headings
        .iter()
        .enumerate()
        .all(|(i, &u)| env.step(traj.vertices[i], u, boundary) == Some(traj.vertices[i + 1]));
    let reflectors_ok = (1..traj.headings.len()).all(|i| {
        let v = traj.vertices[i];
        env.is_rw(v) || env.deflect(v, traj.headings[i - 1]) == traj.headings[i]
    });
    moves_ok && reflectors_ok
}

/// Replays the reversed trajectory from its far end and checks that it
/// retraces the original path backwards.
pub fn reversal_replays(env: &LabyrinthEnv, traj: &Trajectory, boundary: BoundaryPolicy) -> Result<bool> {
    let rev = traj.reversed();
    let Some(&first) = rev.headings.first() else {
        return Ok(true);
    };
    let replayed = replay(env, rev.vertices[0], first, &rev.rw_choices(env), rev.headings.len(), boundary)?;
    Ok(replayed == rev && is_admissible(env, &rev, boundary))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquivalenceClass {
    /// Every rw point joined to the start by an admissible path. The flag
    /// records whether some path tried to leave a halting box.
    Complete { members: Vec<usize>, reached_boundary: bool },
    TruncatedAtCap { explored: usize },
}

impl EquivalenceClass {
    pub fn size(&self) -> Option<usize> {
        match self {
            EquivalenceClass::Complete { members, .. } => Some(members.len()),
            EquivalenceClass::TruncatedAtCap { .. } => None,
        }
    }
}

/// Breadth-first search over `(vertex, heading)` states: rw points branch
/// into every heading, reflectors pass the walker on deterministically.
pub fn equivalence_class(env: &LabyrinthEnv, x: usize, cap: usize, boundary: BoundaryPolicy) -> Result<EquivalenceClass> {
    if cap == 0 {
        return Err(Error::InvalidParameter("cap must be positive".into()));
    }
    check_start(env, x)?;
    let headings = 2 * env.dim();
    let mut seen_state = vec![false; env.volume() * headings];
    let mut in_class = vec![false; env.volume()];
    let mut members = vec![x];
    in_class[x] = true;
    let mut reached_boundary = false;
    let mut queue: VecDeque<(usize, Dir)> = VecDeque::new();
    let push_all = |v: usize, queue: &mut VecDeque<(usize, Dir)>, seen: &mut Vec<bool>| {
        for u in 0..headings {
            if !seen[v * headings + u] {
                seen[v * headings + u] = true;
                queue.push_back((v, u as Dir));
            }
        }
    };
    push_all(x, &mut queue, &mut seen_state);
    while let Some((v, u)) = queue.pop_front() {
        let Some(w) = env.step(v, u, boundary) else {
            reached_boundary = true;
            continue;
        };
        if env.is_rw(w) {
            if !in_class[w] {
                in_class[w] = true;
                members.push(w);
                if members.len() > cap {
                    return Ok(EquivalenceClass::TruncatedAtCap { explored: members.len() });
                }
            }
            push_all(w, &mut queue, &mut seen_state);
        } else {
            let out = env.deflect(w, u);
            let key = w * headings + out as usize;
            if !seen_state[key] {
                seen_state[key] = true;
                queue.push_back((w, out));
            }
        }
    }
    members.sort_unstable();
    Ok(EquivalenceClass::Complete { members, reached_boundary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdPoint {
    pub n: usize,
    pub msd: f64,
    pub stderr: f64,
    pub censored_fraction: f64,
}

impl MsdPoint {
    pub const HEADER: &'static str = "n,msd,stderr,censored_fraction";

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", self.n, self.msd, self.stderr, self.censored_fraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdCurve {
    pub points: Vec<MsdPoint>,
    /// Least-squares line through the final half of the curve.
    pub fit: Option<LinearFit>,
    pub delta_hat: f64,
    /// `msd / n` changes by less than [`STABILITY_TOLERANCE`] between the
    /// third and fourth quarters of the curve.
    pub stabilized: bool,
    pub localized: bool,
}

fn aggregate(runs: &[Vec<u64>], t_max: usize) -> MsdCurve {
    let replicas = runs.len();
    let points: Vec<MsdPoint> = (0..=t_max)
        .map(|n| {
            let (mut k, mut sum, mut sumsq) = (0u64, 0u128, 0u128);
            for r in runs.iter().filter(|r| r.len() > n) {
                k += 1;
                sum += r[n] as u128;
                sumsq += (r[n] as u128).pow(2);
            }
            let censored_fraction = 1.0 - k as f64 / replicas as f64;
            if k == 0 {
                return MsdPoint { n, msd: f64::NAN, stderr: f64::NAN, censored_fraction };
            }
            let mean = sum as f64 / k as f64;
            let stderr = if k > 1 {
                let var = (sumsq as f64 - (sum as f64).powi(2) / k as f64) / (k - 1) as f64;
                (var.max(0.0) / k as f64).sqrt()
            } else {
                0.0
            };
            MsdPoint { n, msd: mean, stderr, censored_fraction }
        })
        .collect();
    let tail: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| 2 * p.n >= t_max && p.msd.is_finite())
        .map(|p| (p.n as f64, p.msd))
        .collect();
    let fit = least_squares(&tail);
    let delta_hat = fit.map_or(f64::NAN, |f| f.slope);
    let ratio = |lo: usize, hi: usize| {
        let sel: Vec<f64> =
            points.iter().filter(|p| p.n >= lo.max(1) && p.n < hi && p.msd.is_finite()).map(|p| p.msd / p.n as f64).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    let (r3, r4) = (ratio(t_max / 2, 3 * t_max / 4), ratio(3 * t_max / 4, t_max + 1));
    let stabilized = r3 > 0.0 && r4 > 0.0 && ((r4 - r3) / r3).abs() < STABILITY_TOLERANCE;
    MsdCurve { points, fit, delta_hat, stabilized, localized: delta_hat.abs() < LOCALIZED_SLOPE }
}

fn check_msd_args(t_max: usize, replicas: usize) -> Result<()> {
    check_replicas(replicas)?;
    if t_max < 4 {
        return Err(Error::InvalidParameter("t_max must be at least 4".into()));
    }
    Ok(())
}

/// MSD in rw time over independent environments, each walker starting at
/// the rw point nearest the centre of its box.
pub fn msd_curve(
    params: &EnvParams,
    dims: &[usize],
    t_max: usize,
    replicas: usize,
    seed: RngSeed,
    boundary: BoundaryPolicy,
) -> Result<MsdCurve> {
    if params.p_rw <= 0.0 {
        return Err(Error::Unsupported(
            "labyrinths without rw points are deterministic and are not covered by the diffusive theory".into(),
        ));
    }
    check_msd_args(t_max, replicas)?;
    check_dims(dims)?;
    params.resolve(dims.len())?;
    let runs = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let env = sample_environment(dims, params, derive_seed(seed, 2 * i))?;
            match env.central_rw_point() {
                Some(start) => walk_rw_time(&env, start, t_max, derive_seed(seed, 2 * i + 1), boundary),
                None => Ok(Vec::new()),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&runs, t_max))
}

/// MSD of independent walkers in one fixed environment.
pub fn msd_curve_in_env(
    env: &LabyrinthEnv,
    start: usize,
    t_max: usize,
    replicas: usize,
    seed: RngSeed,
    boundary: BoundaryPolicy,
) -> Result<MsdCurve> {
    check_msd_args(t_max, replicas)?;
    check_start(env, start)?;
    let runs = (0..replicas as u64)
        .into_par_iter()
        .map(|i| walk_rw_time(env, start, t_max, derive_seed(seed, i), boundary))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&runs, t_max))
}

/// A class counts as localized when it is complete, smaller than `cap`, and
/// never reached the edge of a halting box.
fn is_localized(class: &EquivalenceClass, cap: usize) -> bool {
    matches!(class, EquivalenceClass::Complete { members, reached_boundary: false } if members.len() < cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub fraction: Estimate,
    /// Environments without any rw point are skipped.
    pub skipped: usize,
}

/// Fraction of sampled rw points, one uniform rw point per sampled
/// environment, whose class is finite and trapped inside the box.
pub fn localization_probe(
    params: &EnvParams,
    dims: &[usize],
    cap: usize,
    replicas: usize,
    seed: RngSeed,
    boundary: BoundaryPolicy,
) -> Result<LocalizationReport> {
    check_replicas(replicas)?;
    if cap == 0 {
        return Err(Error::InvalidParameter("cap must be positive".into()));
    }
    check_dims(dims)?;
    params.resolve(dims.len())?;
    let outcomes = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let env = sample_environment(dims, params, derive_seed(seed, 2 * i))?;
            let rw = env.rw_points();
            if rw.is_empty() {
                return Ok(None);
            }
            let x = rw[derive_seed(seed, 2 * i + 1).rng().gen_range(0..rw.len())];
            Ok(Some(is_localized(&equivalence_class(&env, x, cap, boundary)?, cap)))
        })
        .collect::<Result<Vec<Option<bool>>>>()?;
    let sampled: Vec<bool> = outcomes.iter().flatten().copied().collect();
    Ok(LocalizationReport {
        fraction: Estimate::binomial(sampled.iter().filter(|&&b| b).count(), sampled.len()),
        skipped: replicas - sampled.len(),
    })
}

/// Fraction of all rw points of `env` that are localized.
pub fn localization_fraction_in_env(env: &LabyrinthEnv, cap: usize, boundary: BoundaryPolicy) -> Result<Estimate> {
    let rw = env.rw_points();
    let mut hits = 0;
    for &x in &rw {
        if is_localized(&equivalence_class(env, x, cap, boundary)?, cap) {
            hits += 1;
        }
    }
    Ok(Estimate::binomial(hits, rw.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crossings_with_rw_start(side: usize) -> (LabyrinthEnv, usize) {
        let mut tags = vec![Tag::Cross; side * side];
        let start = (side / 2) * side + side / 2;
        tags[start] = Tag::Rw;
        (LabyrinthEnv::from_tags(&[side, side], tags, vec![]).unwrap(), start)
    }

    #[test]
    fn extreme_environments() {
        let all_rw = sample_environment(&[10, 10], &EnvParams::new(1.0, 0.0), RngSeed(1)).unwrap();
        assert!(all_rw.tags().iter().all(|&t| t == Tag::Rw));
        let all_cross = sample_environment(&[10, 10], &EnvParams::new(0.0, 1.0), RngSeed(1)).unwrap();
        assert!(all_cross.tags().iter().all(|&t| t == Tag::Cross));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(sample_environment(&[4, 4], &EnvParams::new(0.7, 0.5), RngSeed(0)).is_err());
        let crossing = EnvParams::new(0.5, 0.0).with_reflectors(&["cross"], &[]);
        assert!(sample_environment(&[4, 4], &crossing, RngSeed(0)).is_err());
        let weights = EnvParams::new(0.5, 0.0).with_reflectors(&["reverse"], &[1.0, 2.0]);
        assert!(sample_environment(&[4, 4], &weights, RngSeed(0)).is_err());
    }

    #[test]
    fn straight_line_through_crossings() {
        let (env, start) = crossings_with_rw_start(9);
        let opts = WalkOptions { boundary: BoundaryPolicy::Halt, record_path: true };
        let w = run_walk(&env, start, 100, RngSeed(5), opts).unwrap();
        assert!(w.halted);
        assert_eq!(w.lattice_steps, 4);
        let path = w.path.unwrap();
        assert!(path.headings.iter().all(|&u| u == path.headings[0]));
        assert_eq!(w.rw_visits, vec![start]);
    }

    #[test]
    fn ballistic_on_periodic_crossings() {
        let (env, start) = crossings_with_rw_start(9);
        let opts = WalkOptions { boundary: BoundaryPolicy::Periodic, record_path: false };
        let w = run_walk(&env, start, 7, RngSeed(2), opts).unwrap();
        assert_eq!(w.displacement.iter().map(|x| x.abs()).sum::<i64>(), 7);
    }

    #[test]
    fn trap_loops_in_two_steps() {
        let (env, centre) = trap_environment();
        let opts = WalkOptions { boundary: BoundaryPolicy::Halt, record_path: true };
        let w = run_walk(&env, centre, 20, RngSeed(9), opts).unwrap();
        assert_eq!(w.lattice_steps, 20);
        assert_eq!(w.rw_visits, vec![centre; 11]);
        let class = equivalence_class(&env, centre, 10, BoundaryPolicy::Halt).unwrap();
        assert_eq!(class, EquivalenceClass::Complete { members: vec![centre], reached_boundary: false });
    }

    #[test]
    fn single_rw_point_class() {
        let (env, start) = crossings_with_rw_start(5);
        let class = equivalence_class(&env, start, 10, BoundaryPolicy::Periodic).unwrap();
        assert_eq!(class.size(), Some(1));
    }

    #[test]
    fn all_rw_class_is_everything() {
        let env = sample_environment(&[6, 6], &EnvParams::new(1.0, 0.0), RngSeed(0)).unwrap();
        let class = equivalence_class(&env, 0, 100, BoundaryPolicy::Halt).unwrap();
        assert_eq!(class.size(), Some(36));
        assert!(matches!(
            equivalence_class(&env, 0, 10, BoundaryPolicy::Halt).unwrap(),
            EquivalenceClass::TruncatedAtCap { .. }
        ));
        assert!(equivalence_class(&env, 0, 0, BoundaryPolicy::Halt).is_err());
    }

    #[test]
    fn start_must_be_rw() {
        let (env, _) = trap_environment();
        assert!(run_walk(&env, 0, 5, RngSeed(0), WalkOptions::default()).is_err());
    }

    #[test]
    fn dump_format() {
        let (env, _) = trap_environment();
        assert_eq!(env.dump(), "# labyrinth dims 3 3\n+a+\naoa\n+a+\n# reflectors\na reverse -x +x -y +y\n");
    }

    #[test]
    fn p_rw_zero_rejected() {
        let err = msd_curve(&EnvParams::new(0.0, 0.5), &[8, 8], 10, 2, RngSeed(0), BoundaryPolicy::Halt);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn trap_msd_is_bounded() {
        let (env, centre) = trap_environment();
        let curve = msd_curve_in_env(&env, centre, 100, 50, RngSeed(4), BoundaryPolicy::Halt).unwrap();
        assert!(curve.points.iter().all(|p| p.msd == 0.0));
        assert!(curve.localized);
    }
}
