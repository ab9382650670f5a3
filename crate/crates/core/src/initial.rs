//! Well-prepared initial phase fields `φ₀ = tanh(r̃/ε)` built from a union
//! of balls `U₀`, where `r̃ = L·tanh(r/L)` saturates the signed distance.

use crate::diagnostics::{
    barrier_check, density_centers, density_ratio, dyadic_radii, energy_total, profile_discrepancy,
    sharp_perimeter,
};
use crate::fields::{ScalarField, TorusGrid};
use crate::obstacles::{parse_balls, render_balls, union_depth, Ball, ForcingTemplate, ObstacleSet};
use crate::profile::k_fn;
use crate::{Error, Real, Result};

/// Default saturation length of the smoothed distance.
pub const DEFAULT_SATURATION: f64 = 0.1;

/// Tolerance on the barrier ordering at `t = 0`.
pub const BARRIER_TOLERANCE: f64 = 1e-9;

/// Upper bound on the initial discrepancy density.
pub const XI0_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct InitialSpec<T> {
    pub balls: Vec<Ball<T>>,
    /// Use the complement of the union as `U₀`.
    pub complement: bool,
    /// Saturation length `L`.
    pub saturation: T,
}

impl<T: Real> InitialSpec<T> {
    pub fn new(balls: Vec<Ball<T>>, complement: bool, saturation: T) -> Result<Self> {
        if !(saturation > T::zero()) {
            return Err(Error::key("saturation", format!("must be positive, got {saturation}")));
        }
        Ok(Self {
            balls,
            complement,
            saturation,
        })
    }

    /// Parses `balls:cx,cy[,cz],r;...[;complement]`.
    pub fn parse(text: &str, d: usize, saturation: T) -> Result<Self> {
        let body = text
            .trim()
            .strip_prefix("balls:")
            .ok_or_else(|| Error::key("initial", "expected `balls:` prefix"))?;
        let mut complement = false;
        let mut kept = Vec::new();
        for token in body.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            if token == "complement" {
                complement = true;
            } else {
                kept.push(token);
            }
        }
        let balls = parse_balls(&kept.join(";"), d).map_err(|e| Error::key("initial", e.to_string()))?;
        Self::new(balls, complement, saturation)
    }

    pub fn render(&self) -> String {
        let mut s = format!("balls:{}", render_balls(&self.balls));
        if self.complement {
            if !self.balls.is_empty() {
                s.push(';');
            }
            s.push_str("complement");
        }
        s
    }

    /// Exact signed distance to `∂U₀`, positive in `U₀`; `±∞` when `∂U₀` is empty.
    pub fn signed_distance_at(&self, x: &[T]) -> T {
        let r = union_depth(&self.balls, x).unwrap_or(T::neg_infinity());
        if self.complement {
            -r
        } else {
            r
        }
    }

    /// Sharp perimeter of `∂U₀` (balls assumed disjoint).
    pub fn sharp_perimeter(&self, d: usize) -> T {
        sharp_perimeter(&self.balls, d)
    }

    /// Checks `O̅₊ ⊂ U₀`, `O̅₋ ∩ U̅₀ = ∅`, `M₀ ∩ ∂O = ∅` on the grid, and the
    /// saturation rule `L ≥ 0.6·max obstacle radius`.
    pub fn check_against(&self, obs: &ObstacleSet<T>, grid: &TorusGrid) -> Result<()> {
        for b in &obs.plus {
            let margin = self.signed_distance_at(&b.center) - b.radius;
            if !(margin > T::zero()) {
                return Err(Error::key(
                    "initial",
                    format!("O+ ball at {:?} is not strictly inside U0 (margin {margin})", to_f64(&b.center)),
                ));
            }
        }
        for b in &obs.minus {
            let margin = -self.signed_distance_at(&b.center) - b.radius;
            if !(margin > T::zero()) {
                return Err(Error::key(
                    "initial",
                    format!("O- ball at {:?} is not strictly outside U0 (margin {margin})", to_f64(&b.center)),
                ));
            }
        }
        if let Some(max_r) = obs.max_radius() {
            if self.saturation < T::lit(0.6) * max_r {
                return Err(Error::key(
                    "saturation",
                    format!(
                        "L = {} must be at least 0.6 x the largest obstacle radius {max_r}",
                        self.saturation
                    ),
                ));
            }
            let h = grid.h::<T>();
            let d = grid.d();
            for i in 0..grid.len() {
                let x = grid.point::<T>(i);
                if self.signed_distance_at(&x[..d]).abs() <= h {
                    let (s, _) = obs.signed_distance_at(&x[..d]);
                    if !(s.abs() > T::lit(2.0) * h) {
                        return Err(Error::key("initial", "initial interface touches an obstacle boundary"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Warnings that do not block a run.
    pub fn warnings(&self, max_eps: T) -> Vec<String> {
        let mut out = Vec::new();
        if self.saturation <= T::lit(4.0) * max_eps {
            out.push(format!(
                "saturation L = {} does not dominate the interface width (4 eps = {})",
                self.saturation,
                T::lit(4.0) * max_eps
            ));
        }
        out
    }
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// `r̃ = L·tanh(r/L)`.
pub fn smoothed_signed_distance<T: Real>(spec: &InitialSpec<T>, grid: &TorusGrid) -> ScalarField<T> {
    let l = spec.saturation;
    ScalarField::from_fn(*grid, |x| {
        let r = spec.signed_distance_at(x);
        if r.is_infinite() {
            l.copysign(r)
        } else {
            l * (r / l).tanh()
        }
    })
}

pub fn make_initial_phase<T: Real>(rtilde: &ScalarField<T>, eps: T) -> Result<ScalarField<T>> {
    if !(eps > T::zero()) {
        return Err(Error::key("epsilon", format!("must be positive, got {eps}")));
    }
    Ok(rtilde.map(|r| (r / eps).tanh()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellPreparedReport<T> {
    /// `μ₀(Ω)`.
    pub energy0: T,
    pub energy_budget: T,
    /// `(2/3 − |mean over Ω∖O of k(φ₀)|) / 2`.
    pub omega_margin: T,
    /// Supremum of the initial discrepancy density.
    pub max_xi0: T,
    /// Sampled density ratio (a lower bound of the true supremum).
    pub density_ratio0: T,
    pub barrier_ok: bool,
    pub barrier_skipped: usize,
}

impl<T: Real> WellPreparedReport<T> {
    pub fn passes(&self) -> bool {
        self.energy0 <= self.energy_budget
            && self.omega_margin > T::zero()
            && self.max_xi0 <= T::lit(XI0_TOLERANCE)
            && self.barrier_ok
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.energy0 <= self.energy_budget) {
            out.push(format!("energy {} above budget {}", self.energy0, self.energy_budget));
        }
        if !(self.omega_margin > T::zero()) {
            out.push(format!("volume margin omega = {} is not positive", self.omega_margin));
        }
        if !(self.max_xi0 <= T::lit(XI0_TOLERANCE)) {
            out.push(format!("initial discrepancy {} is positive", self.max_xi0));
        }
        if !self.barrier_ok {
            out.push("initial data below the obstacle barriers".into());
        }
        out
    }
}

pub struct ValidationContext<'a, T: Real> {
    pub obs: &'a ObstacleSet<T>,
    pub template: &'a ForcingTemplate<T>,
    pub eps: T,
    pub alpha: T,
    pub energy_budget: T,
    pub seed: u64,
}

/// Ratio of the energy budget to the sharp perimeter of `U₀`.
pub const ENERGY_BUDGET_FACTOR: f64 = 1.25;

pub fn validate_well_prepared<T: Real>(
    phi0: &ScalarField<T>,
    ctx: &ValidationContext<'_, T>,
) -> Result<WellPreparedReport<T>> {
    let (m, at) = phi0.max_abs();
    if !(m < T::one()) {
        return Err(Error::MaximumPrinciple {
            step: 0,
            index: at,
            value: m.as_f64(),
        });
    }
    let parts = energy_total(phi0, phi0, ctx.template, ctx.eps, ctx.alpha)?;

    let mut outside = 0usize;
    let mut k_sum = T::zero();
    for i in 0..phi0.grid().len() {
        if ctx.template.side[i] == 0 {
            outside += 1;
            k_sum = k_sum + k_fn(phi0[i]);
        }
    }
    if outside == 0 {
        return Err(Error::domain("obstacles cover the whole torus"));
    }
    let mean_k = k_sum / T::from_count(outside);
    let omega_margin = (T::lit(2.0 / 3.0) - mean_k.abs()) / T::lit(2.0);

    let xi = profile_discrepancy(phi0, ctx.eps)?;

    let centers = density_centers(phi0, ctx.seed, 256, 64);
    let density_ratio0 = density_ratio(phi0, ctx.eps, &centers, &dyadic_radii::<T>(phi0.grid()))?;

    let barriers = barrier_check(phi0, ctx.obs, ctx.eps);
    let tol = T::lit(BARRIER_TOLERANCE);
    Ok(WellPreparedReport {
        energy0: parts.mu_total,
        energy_budget: ctx.energy_budget,
        omega_margin,
        max_xi0: xi.sup_xi,
        density_ratio0,
        barrier_ok: barriers.violation_plus <= tol && barriers.violation_minus <= tol,
        barrier_skipped: barriers.skipped,
    })
}
