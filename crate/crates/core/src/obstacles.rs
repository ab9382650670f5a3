//! Obstacles made of periodic balls, their signed distance, the cutoff
//! `η_ε`, and the frozen spatial parts of the forcing.
//!
//! The forcing is split as `g(x,t) = λ(t)·a(x) + b(x)`: `a = η_ε(s)` carries
//! the multiplier outside the obstacles and in the outer half of each
//! collar, `b = ±(d/R₀)(1 − η_ε(s − √ε/2))` pushes the phase towards `+1`
//! inside `O₊` and towards `−1` inside `O₋`. Both parts vanish on the seam
//! `s = √ε/2`.

use crate::fields::{periodic_distance, ScalarField, TorusGrid, MAX_DIM};
use crate::{Error, Real, Result};

/// Sentinel signed distance returned when there are no obstacles at all.
pub const EMPTY_DISTANCE: f64 = -0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Ball<T> {
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
        }
        if let Some(c) = center.iter().find(|c| !(**c >= T::zero() && **c < T::one())) {
            return Err(Error::domain(format!("ball center coordinate {c} outside [0,1)")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `radius − |x − center|` with the minimum-image distance.
    #[inline]
    pub fn depth(&self, x: &[T]) -> T {
        self.radius - periodic_distance(x, &self.center, self.center.len())
    }

    /// Gap between the closures of two balls (negative when they overlap).
    pub fn gap(&self, other: &Ball<T>) -> T {
        periodic_distance(&self.center, &other.center, self.dim()) - self.radius - other.radius
    }
}

/// Parses `cx,cy[,cz],r; cx,cy[,cz],r; ...`.
pub fn parse_balls<T: Real>(text: &str, d: usize) -> Result<Vec<Ball<T>>> {
    let mut balls = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let nums = item
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::domain(format!("malformed number `{}` in ball `{item}`", s.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != d + 1 {
            return Err(Error::domain(format!(
                "ball `{item}` needs {} coordinates and a radius",
                d
            )));
        }
        let center = nums[..d].iter().map(|&v| T::lit(v)).collect();
        balls.push(Ball::new(center, T::lit(nums[d]))?);
    }
    Ok(balls)
}

pub fn render_balls<T: Real>(balls: &[Ball<T>]) -> String {
    balls
        .iter()
        .map(|b| {
            let mut parts: Vec<String> = b.center.iter().map(|c| format!("{}", c.as_f64())).collect();
            parts.push(format!("{}", b.radius.as_f64()));
            parts.join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// `max_i (ρ_i − |x − c_i|)`, or `None` for an empty list.
pub fn union_depth<T: Real>(balls: &[Ball<T>], x: &[T]) -> Option<T> {
    balls
        .iter()
        .map(|b| b.depth(x))
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// The obstacle pair `O₊` (kept inside the evolving set) and `O₋` (kept outside).
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleSet<T> {
    pub plus: Vec<Ball<T>>,
    pub minus: Vec<Ball<T>>,
    /// Interior-ball radius `R₀`.
    pub r0: T,
}

impl<T: Real> ObstacleSet<T> {
    pub fn empty() -> Self {
        Self {
            plus: Vec::new(),
            minus: Vec::new(),
            r0: T::lit(0.5),
        }
    }

    /// Validates disjointness and the interior-ball radius. With `r0 = None`
    /// the largest admissible value (the smallest ball radius) is used.
    pub fn new(plus: Vec<Ball<T>>, minus: Vec<Ball<T>>, r0: Option<T>) -> Result<Self> {
        let min_radius = plus
            .iter()
            .chain(minus.iter())
            .map(|b| b.radius)
            .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.min(r))));
        let dims: Vec<usize> = plus.iter().chain(minus.iter()).map(Ball::dim).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::domain("obstacle balls have mixed dimensions"));
        }
        for p in &plus {
            for m in &minus {
                let gap = p.gap(m);
                if !(gap > T::zero()) {
                    return Err(Error::domain(format!(
                        "closures of O+ and O- intersect (gap {gap})"
                    )));
                }
            }
        }
        let r0 = match (r0, min_radius) {
            (Some(r0), Some(min)) => {
                if !(r0 > T::zero() && r0 <= min) {
                    return Err(Error::key(
                        "obstacle_r0",
                        format!("interior-ball radius must lie in (0, {min}], got {r0}"),
                    ));
                }
                r0
            }
            (Some(r0), None) if r0 > T::zero() => r0,
            (Some(r0), None) => {
                return Err(Error::key("obstacle_r0", format!("must be positive, got {r0}")))
            }
            (None, Some(min)) => min,
            (None, None) => T::lit(0.5),
        };
        Ok(Self { plus, minus, r0 })
    }

    /// Parses `plus=cx,cy,r; ...; minus=cx,cy,r; ...`.
    pub fn parse(spec: &str, d: usize, r0: Option<T>) -> Result<Self> {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut target: Option<bool> = None;
        for token in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let body = if let Some(rest) = token.strip_prefix("plus=") {
                target = Some(true);
                rest
            } else if let Some(rest) = token.strip_prefix("minus=") {
                target = Some(false);
                rest
            } else {
                token
            };
            let list = match target {
                Some(true) => &mut plus,
                Some(false) => &mut minus,
                None => {
                    return Err(Error::domain(format!(
                        "obstacle ball `{token}` appears before `plus=` or `minus=`"
                    )))
                }
            };
            list.extend(parse_balls::<T>(body, d)?);
        }
        Self::new(plus, minus, r0)
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    pub fn max_radius(&self) -> Option<T> {
        self.plus
            .iter()
            .chain(self.minus.iter())
            .map(|b| b.radius)
            .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| a.max(r))))
    }

    /// Signed distance to `∂O` at one point, positive inside `O`, together
    /// with the side: `+1` in `O₊`, `−1` in `O₋`, `0` outside.
    pub fn signed_distance_at(&self, x: &[T]) -> (T, i8) {
        let sp = union_depth(&self.plus, x);
        let sm = union_depth(&self.minus, x);
        match (sp, sm) {
            (None, None) => (T::lit(EMPTY_DISTANCE), 0),
            (Some(p), None) => (p, if p > T::zero() { 1 } else { 0 }),
            (None, Some(m)) => (m, if m > T::zero() { -1 } else { 0 }),
            (Some(p), Some(m)) => {
                if p >= m {
                    (p, if p > T::zero() { 1 } else { 0 })
                } else {
                    (m, if m > T::zero() { -1 } else { 0 })
                }
            }
        }
    }

    /// Whether `B_{R₀+2√ε}(y) ⊂ O_±` for the ball centered at `y`, i.e. the
    /// barrier comparison around `y` is licensed at this `ε`.
    pub fn barrier_certified(&self, family: &[Ball<T>], y: &[T], eps: T) -> bool {
        let need = self.r0 + T::lit(2.0) * eps.sqrt();
        union_depth(family, y).is_some_and(|depth| depth >= need)
    }
}

/// Signed distance field of `∂O` (positive in `O`).
pub fn signed_distance<T: Real>(obs: &ObstacleSet<T>, grid: &TorusGrid) -> ScalarField<T> {
    ScalarField::from_fn(*grid, |x| obs.signed_distance_at(x).0)
}

/// Smooth nonincreasing cutoff `η_ε(r) = η(r / (√ε/2))`, with `η = 1 − S`
/// for the quintic smoothstep `S(u) = 6u⁵ − 15u⁴ + 10u³`.
pub fn cutoff_eta<T: Real>(r: T, eps: T) -> Result<T> {
    if !(eps > T::zero() && eps < T::lit(0.25)) {
        return Err(Error::key("epsilon", format!("cutoff needs eps in (0, 1/4), got {eps}")));
    }
    Ok(eta_unchecked(r, eps.sqrt() * T::lit(0.5)))
}

#[inline]
fn eta_unchecked<T: Real>(r: T, width: T) -> T {
    let u = r / width;
    if u <= T::zero() {
        T::one()
    } else if u >= T::one() {
        T::zero()
    } else {
        let s = u * u * u * (T::lit(10.0) + u * (T::lit(-15.0) + u * T::lit(6.0)));
        T::one() - s
    }
}

/// Frozen spatial structure of the forcing for one `ε`.
#[derive(Clone, Debug)]
pub struct ForcingTemplate<T: Real> {
    /// Multiplier carrier `η_ε(s)`.
    pub a: ScalarField<T>,
    /// Obstacle push.
    pub b: ScalarField<T>,
    /// Signed distance to `∂O`.
    pub s: ScalarField<T>,
    /// `+1` in `O₊`, `−1` in `O₋`, `0` elsewhere.
    pub side: Vec<i8>,
    pub eps: T,
    pub r0: T,
}

impl<T: Real> ForcingTemplate<T> {
    /// Half collar width `√ε/2`.
    pub fn half_collar(&self) -> T {
        self.eps.sqrt() * T::lit(0.5)
    }

    /// Points where `s > √ε/2`: the region on which `g = b` is time independent.
    pub fn is_deep(&self, index: usize) -> bool {
        self.s[index] > self.half_collar()
    }

    /// `g = λ·a + b`.
    pub fn forcing(&self, lambda: T) -> ScalarField<T> {
        self.a
            .zip_map(&self.b, |a, b| lambda * a + b)
            .expect("template fields share a grid")
    }
}

pub fn build_forcing_template<T: Real>(
    obs: &ObstacleSet<T>,
    grid: &TorusGrid,
    eps: T,
) -> Result<ForcingTemplate<T>> {
    // validates the ε range
    cutoff_eta(T::zero(), eps)?;
    let half = eps.sqrt() * T::lit(0.5);
    if !obs.is_empty() && !(half + half < obs.r0) {
        return Err(Error::key(
            "epsilon",
            format!(
                "obstacle collar does not fit: sqrt(eps)/2 + sqrt(eps)/2 = {} must be < R0 = {}",
                half + half,
                obs.r0
            ),
        ));
    }
    let d = grid.d();
    let push = T::from_count(d) / obs.r0;
    let len = grid.len();
    let mut s = Vec::with_capacity(len);
    let mut side = Vec::with_capacity(len);
    for i in 0..len {
        let x: [T; MAX_DIM] = grid.point(i);
        let (si, sd) = obs.signed_distance_at(&x[..d]);
        s.push(si);
        side.push(sd);
    }
    let a: Vec<T> = s.iter().map(|&si| eta_unchecked(si, half)).collect();
    let b: Vec<T> = s
        .iter()
        .zip(&side)
        .map(|(&si, &sd)| {
            if sd == 0 {
                T::zero()
            } else {
                let ramp = T::one() - eta_unchecked(si - half, half);
                T::lit(sd as f64) * push * ramp
            }
        })
        .collect();
    Ok(ForcingTemplate {
        a: ScalarField::from_values(*grid, a)?,
        b: ScalarField::from_values(*grid, b)?,
        s: ScalarField::from_values(*grid, s)?,
        side,
        eps,
        r0: obs.r0,
    })
}
