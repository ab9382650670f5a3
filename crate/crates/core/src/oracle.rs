//! Sharp-interface reference: disjoint round interfaces moving by
//! `V = −(d−1)/R + λ` with `λ` chosen to conserve `Σ R^d` over the free
//! balls. A ball enclosing an obstacle pins when it reaches the obstacle
//! and is released once its free velocity would be outward again.

use std::fmt::Write as _;

use crate::config::SimConfig;
use crate::diagnostics::fmt_sci;
use crate::fields::periodic_distance;
use crate::{Error, Real, Result};

/// Bisection tolerance on event times.
pub const EVENT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BallConfig<T> {
    pub radii: Vec<T>,
    /// Radius at which each ball meets the obstacle it encloses.
    pub pin_at: Vec<Option<T>>,
    pub pinned: Vec<bool>,
    /// Vanished balls stay in the list with radius zero.
    pub active: Vec<bool>,
}

impl<T: Real> BallConfig<T> {
    pub fn new(radii: Vec<T>, pin_at: Vec<Option<T>>) -> Result<Self> {
        if radii.len() != pin_at.len() {
            return Err(Error::domain("radii and pin_at differ in length"));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > T::zero())) {
            return Err(Error::domain(format!("oracle radius must be positive, got {r}")));
        }
        let k = radii.len();
        let mut cfg = Self {
            radii,
            pin_at,
            pinned: vec![false; k],
            active: vec![true; k],
        };
        for i in 0..k {
            if cfg.pin_at[i].is_some_and(|p| cfg.radii[i] <= p) {
                cfg.pin(i);
            }
        }
        Ok(cfg)
    }

    /// Free balls only.
    pub fn free(radii: &[T]) -> Result<Self> {
        Self::new(radii.to_vec(), vec![None; radii.len()])
    }

    /// The twin of a configured run: one ball per initial ball, pinned at the
    /// smallest concentric radius that encloses the `O₊` balls it contains.
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        if cfg.initial.complement || cfg.initial.balls.is_empty() {
            return Err(Error::key("initial", "the oracle needs a plain union of balls"));
        }
        let d = cfg.d;
        let mut radii = Vec::new();
        let mut pin_at = Vec::new();
        for b in &cfg.initial.balls {
            radii.push(T::lit(b.radius));
            let enclosed = cfg
                .obstacles
                .plus
                .iter()
                .filter(|o| b.depth(&o.center) > o.radius)
                .map(|o| periodic_distance(&b.center, &o.center, d) + o.radius)
                .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
            pin_at.push(enclosed.map(T::lit));
        }
        Self::new(radii, pin_at)
    }

    fn pin(&mut self, i: usize) {
        self.pinned[i] = true;
        self.radii[i] = self.pin_at[i].expect("pinned ball has a pin radius");
    }

    fn is_free(&self, i: usize) -> bool {
        self.active[i] && !self.pinned[i]
    }

    /// `Σ R_i^d` over active balls.
    pub fn volume(&self, d: usize) -> T {
        self.radii
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(&r, _)| r.powi(d as i32))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn pinned_mask(&self) -> String {
        self.pinned.iter().map(|&p| if p { '1' } else { '0' }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinUpdate {
    Pin(usize),
    Release(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rhs<T> {
    pub d_r: Vec<T>,
    pub lambda: T,
    /// No free ball: `λ` undefined, reported as zero.
    pub degenerate: bool,
    pub pin_updates: Vec<PinUpdate>,
}

/// `λ = (d−1)·Σ R^{d−2} / Σ R^{d−1}` over the free balls of `radii`.
fn free_lambda<T: Real>(cfg: &BallConfig<T>, radii: &[T], d: usize) -> Option<T> {
    let dm1 = T::from_count(d - 1);
    let (mut num, mut den) = (T::zero(), T::zero());
    for (i, &r) in radii.iter().enumerate() {
        if cfg.is_free(i) {
            num = num + r.powi(d as i32 - 2);
            den = den + r.powi(d as i32 - 1);
        }
    }
    (den > T::zero()).then(|| dm1 * num / den)
}

fn velocities<T: Real>(cfg: &BallConfig<T>, radii: &[T], d: usize) -> (Vec<T>, T, bool) {
    let dm1 = T::from_count(d - 1);
    match free_lambda(cfg, radii, d) {
        Some(lambda) => {
            let dr = radii
                .iter()
                .enumerate()
                .map(|(i, &r)| if cfg.is_free(i) { -dm1 / r + lambda } else { T::zero() })
                .collect();
            (dr, lambda, false)
        }
        None => (vec![T::zero(); radii.len()], T::zero(), true),
    }
}

pub fn constrained_rhs<T: Real>(cfg: &BallConfig<T>, d: usize) -> Rhs<T> {
    let (d_r, lambda, degenerate) = velocities(cfg, &cfg.radii, d);
    let dm1 = T::from_count(d - 1);
    let mut pin_updates = Vec::new();
    for i in 0..cfg.radii.len() {
        if !cfg.active[i] {
            continue;
        }
        let r = cfg.radii[i];
        if cfg.pinned[i] {
            if !degenerate && -dm1 / r + lambda > T::zero() {
                pin_updates.push(PinUpdate::Release(i));
            }
        } else if cfg.pin_at[i].is_some_and(|p| r <= p) {
            pin_updates.push(PinUpdate::Pin(i));
        }
    }
    Rhs {
        d_r,
        lambda,
        degenerate,
        pin_updates,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSample<T> {
    pub t: T,
    pub radii: Vec<T>,
    pub pinned: Vec<bool>,
    pub lambda: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EventKind {
    Pin,
    Release,
    Vanish,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEvent<T> {
    pub t: T,
    pub ball: usize,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<OracleSample<T>>,
    pub events: Vec<OracleEvent<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Radii at time `t`, linearly interpolated between samples.
    pub fn radii_at(&self, t: T) -> Vec<T> {
        let s = &self.samples;
        let j = s.partition_point(|x| x.t < t);
        if j == 0 {
            return s[0].radii.clone();
        }
        if j >= s.len() {
            return s[s.len() - 1].radii.clone();
        }
        let (a, b) = (&s[j - 1], &s[j]);
        let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { T::one() };
        a.radii.iter().zip(&b.radii).map(|(&x, &y)| x + w * (y - x)).collect()
    }

    pub fn csv(&self) -> String {
        let k = self.samples.first().map_or(0, |s| s.radii.len());
        let mut out = String::from("t");
        for i in 1..=k {
            let _ = write!(out, ",R{i}");
        }
        out.push_str(",lambda,pinned_mask\n");
        for s in &self.samples {
            out.push_str(&fmt_sci(s.t.as_f64()));
            for r in &s.radii {
                out.push(',');
                out.push_str(&fmt_sci(r.as_f64()));
            }
            let mask: String = s.pinned.iter().map(|&p| if p { '1' } else { '0' }).collect();
            let _ = writeln!(out, ",{},{mask}", fmt_sci(s.lambda.as_f64()));
        }
        out
    }
}

fn rk4<T: Real>(cfg: &BallConfig<T>, d: usize, h: T) -> Vec<T> {
    let y = &cfg.radii;
    let add = |a: &[T], b: &[T], s: T| -> Vec<T> { a.iter().zip(b).map(|(&x, &v)| x + s * v).collect() };
    let half = h * T::lit(0.5);
    let k1 = velocities(cfg, y, d).0;
    let k2 = velocities(cfg, &add(y, &k1, half), d).0;
    let k3 = velocities(cfg, &add(y, &k2, half), d).0;
    let k4 = velocities(cfg, &add(y, &k3, h), d).0;
    let sixth = h / T::lit(6.0);
    (0..y.len())
        .map(|i| y[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect()
}

/// First event triggered in `radii`, if any.
fn event_in<T: Real>(cfg: &BallConfig<T>, radii: &[T], d: usize, vanish: T) -> Option<(usize, EventKind)> {
    let dm1 = T::from_count(d - 1);
    let lambda = free_lambda(cfg, radii, d);
    for (i, &r) in radii.iter().enumerate() {
        if !cfg.active[i] {
            continue;
        }
        if cfg.pinned[i] {
            if lambda.is_some_and(|l| -dm1 / r + l > T::zero()) {
                return Some((i, EventKind::Release));
            }
        } else if cfg.pin_at[i].is_some_and(|p| r <= p) {
            return Some((i, EventKind::Pin));
        } else if r <= vanish {
            return Some((i, EventKind::Vanish));
        }
    }
    None
}

fn apply<T: Real>(cfg: &mut BallConfig<T>, ball: usize, kind: EventKind) {
    match kind {
        EventKind::Pin => cfg.pin(ball),
        EventKind::Release => cfg.pinned[ball] = false,
        EventKind::Vanish => {
            cfg.active[ball] = false;
            cfg.radii[ball] = T::zero();
        }
    }
}

/// Classical RK4 with pin, release and vanishing events located by
/// bisection to [`EVENT_TOLERANCE`] in time.
pub fn integrate_oracle<T: Real>(cfg: &BallConfig<T>, d: usize, t_end: T, dt: T) -> Result<Trajectory<T>> {
    let min_r = cfg
        .radii
        .iter()
        .zip(&cfg.active)
        .filter(|(_, &a)| a)
        .map(|(&r, _)| r)
        .fold(T::infinity(), T::min);
    if !(dt > T::zero() && dt <= T::lit(1e-4) * min_r * min_r * (T::one() + T::lit(1e-12))) {
        return Err(Error::domain(format!(
            "oracle step {dt} must lie in (0, 1e-4 * min R^2 = {}]",
            T::lit(1e-4) * min_r * min_r
        )));
    }
    let vanish = T::lit(10.0) * dt.sqrt();
    let tol = T::lit(EVENT_TOLERANCE);
    let mut cur = cfg.clone();
    let mut t = T::zero();
    let mut events = Vec::new();
    let sample = |c: &BallConfig<T>, t: T| OracleSample {
        t,
        radii: c.radii.clone(),
        pinned: c.pinned.clone(),
        lambda: velocities(c, &c.radii, d).1,
    };
    // complementarity at the start
    while let Some((ball, kind)) = event_in(&cur, &cur.radii.clone(), d, vanish) {
        apply(&mut cur, ball, kind);
        events.push(OracleEvent { t, ball, kind });
    }
    let mut samples = vec![sample(&cur, t)];
    while t < t_end {
        let h = dt.min(t_end - t);
        let full = rk4(&cur, d, h);
        match event_in(&cur, &full, d, vanish) {
            None => {
                cur.radii = full;
                t = if h < dt { t_end } else { t + h };
            }
            Some(_) => {
                let (mut lo, mut hi) = (T::zero(), h);
                while hi - lo > tol {
                    let mid = (lo + hi) * T::lit(0.5);
                    if event_in(&cur, &rk4(&cur, d, mid), d, vanish).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let radii = rk4(&cur, d, hi);
                let (ball, kind) = event_in(&cur, &radii, d, vanish).expect("event bracketed");
                cur.radii = radii;
                t = t + hi;
                apply(&mut cur, ball, kind);
                events.push(OracleEvent { t, ball, kind });
                while let Some((ball, kind)) = event_in(&cur, &cur.radii.clone(), d, vanish) {
                    apply(&mut cur, ball, kind);
                    events.push(OracleEvent { t, ball, kind });
                }
            }
        }
        samples.push(sample(&cur, t));
    }
    Ok(Trajectory { samples, events })
}

/// Largest admissible oracle step for a configuration.
pub fn default_dt<T: Real>(cfg: &BallConfig<T>) -> T {
    let min_r = cfg.radii.iter().copied().fold(T::infinity(), T::min);
    T::lit(1e-4) * min_r * min_r
}
