//! Measurable quantities of a phase field: energy and surface measure,
//! discrepancy, sampled density ratio, barrier comparison, volume drift,
//! obstacle intrusion and interface radii.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fields::{fixed_order_sum, periodic_delta, periodic_distance, Exec, ScalarField, TorusGrid, MAX_DIM};
use crate::multiplier::MultiplierState;
use crate::obstacles::{Ball, ForcingTemplate, ObstacleSet};
use crate::profile::{big_k, k_fn, sigma, well};
use crate::{Error, Real, Result};

/// Column order of the diagnostics CSV.
pub const CSV_HEADER: &str = "t,lambda,energy_total,mu_total,penalty,int_abs_xi,sup_xi,max_abs_phi,\
barrier_violation_plus,barrier_violation_minus,vol_weighted_drift,vol_indicator,vol_smooth,\
lambda_l2_cum,dissipation_residual,density_ratio,bv_k";

/// Per-step scalar diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub step: u64,
    pub t: T,
    pub lambda: T,
    pub energy_total: T,
    pub mu_total: T,
    pub penalty: T,
    pub int_abs_xi: T,
    pub sup_xi: T,
    pub max_abs_phi: T,
    pub barrier_violation_plus: T,
    pub barrier_violation_minus: T,
    pub vol_weighted_drift: T,
    pub vol_indicator: T,
    pub vol_smooth: T,
    pub lambda_l2_cum: T,
    pub dissipation_residual: T,
    pub density_ratio: Option<T>,
    pub bv_k: T,
    /// Not serialized: `E_h − ∫_{s>√ε/2} g·k(φ)` with the stencil-consistent
    /// energy `E_h` (see [`stencil_energy`]).
    pub lyapunov: T,
}

/// Formats a value with 17 significant digits (round-trip exact for `f64`).
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

impl<T: Real> DiagnosticsRecord<T> {
    pub fn csv_row(&self) -> String {
        let cols = [
            self.t,
            self.lambda,
            self.energy_total,
            self.mu_total,
            self.penalty,
            self.int_abs_xi,
            self.sup_xi,
            self.max_abs_phi,
            self.barrier_violation_plus,
            self.barrier_violation_minus,
            self.vol_weighted_drift,
            self.vol_indicator,
            self.vol_smooth,
            self.lambda_l2_cum,
            self.dissipation_residual,
        ];
        let mut row = String::new();
        for v in cols {
            let _ = write!(row, "{},", fmt_sci(v.as_f64()));
        }
        if let Some(dr) = self.density_ratio {
            row.push_str(&fmt_sci(dr.as_f64()));
        }
        row.push(',');
        row.push_str(&fmt_sci(self.bv_k.as_f64()));
        row
    }
}

/// Pointwise `ε|∇φ|²/2 + W(φ)/ε` with the centered gradient.
pub fn energy_density<T: Real>(phi: &ScalarField<T>, eps: T) -> ScalarField<T> {
    let half = T::lit(0.5);
    phi.grad_sq()
        .zip_map(phi, |g2, p| half * eps * g2 + well(p).w / eps)
        .expect("same grid")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParts<T> {
    /// `E^ε` including the volume penalty.
    pub energy: T,
    /// `μ(Ω)`: the gradient-plus-potential part divided by `σ`.
    pub mu_total: T,
    /// `½ ε^{−α} (∫ a·(k(φ₀) − k(φ)))²`.
    pub penalty: T,
}

pub fn energy_total<T: Real>(
    phi: &ScalarField<T>,
    phi0: &ScalarField<T>,
    template: &ForcingTemplate<T>,
    eps: T,
    alpha: T,
) -> Result<EnergyParts<T>> {
    phi.grid().check_same(phi0.grid())?;
    let mu_part = energy_density(phi, eps).integrate();
    let diff = phi0
        .zip_map(phi, |p0, p| k_fn(p0) - k_fn(p))?
        .zip_map(&template.a, |k, a| a * k)?
        .integrate();
    let penalty = T::lit(0.5) * eps.powf(-alpha) * diff * diff;
    Ok(EnergyParts {
        energy: mu_part + penalty,
        mu_total: mu_part / sigma::<T>(),
        penalty,
    })
}

/// Energy whose Dirichlet part uses forward differences, so that its
/// gradient is exactly `−ε·Δ_h φ + W'(φ)/ε − λ·a·√(2W)` for the stencil
/// Laplacian the integrator uses.
pub fn stencil_energy<T: Real>(
    phi: &ScalarField<T>,
    template: &ForcingTemplate<T>,
    mult: &MultiplierState<T>,
) -> Result<T> {
    let eps = mult.eps;
    let half = T::lit(0.5);
    let dirichlet = phi
        .forward_grad_sq()
        .zip_map(phi, |g2, p| half * eps * g2 + well(p).w / eps)?
        .integrate();
    let deficit = mult.deficit(phi, template)?;
    Ok(dirichlet + half * mult.scale() * deficit * deficit)
}

/// `∫_{s>√ε/2} b·k(φ)`: the work term of the obstacle push.
pub fn deep_work<T: Real>(phi: &ScalarField<T>, template: &ForcingTemplate<T>) -> Result<T> {
    template.s.grid().check_same(phi.grid())?;
    let half = template.half_collar();
    let vals: Vec<T> = phi
        .values()
        .iter()
        .zip(template.s.values())
        .zip(template.b.values())
        .map(|((&p, &s), &b)| if s > half { b * k_fn(p) } else { T::zero() })
        .collect();
    Ok(fixed_order_sum(&vals, phi.grid().n(), Exec::Parallel) * phi.grid().cell_volume::<T>())
}

#[derive(Clone, Debug)]
pub struct Discrepancy<T: Real> {
    pub xi: ScalarField<T>,
    /// `∫|ξ| / σ`.
    pub int_abs_xi: T,
    pub sup_xi: T,
}

/// `ξ = ε|∇φ|²/2 − W(φ)/ε` with the centered gradient.
pub fn discrepancy_stats<T: Real>(phi: &ScalarField<T>, eps: T) -> Discrepancy<T> {
    let half = T::lit(0.5);
    let xi = phi
        .grad_sq()
        .zip_map(phi, |g2, p| half * eps * g2 - well(p).w / eps)
        .expect("same grid");
    summarize_discrepancy(xi)
}

/// Discrepancy of a profile `φ = tanh(r/ε)` evaluated in the profile
/// coordinate `r = ε·atanh(φ)`: `ξ = (W(φ)/ε)(|∇_h r|² − 1)`.
///
/// For the exact standing wave this is the same density as
/// [`discrepancy_stats`], but it is free of the `O(h²/ε²)` error the
/// centered difference of a steep tanh introduces, so its sign reflects the
/// slope of `r` alone. Requires `|φ| < 1`.
pub fn profile_discrepancy<T: Real>(phi: &ScalarField<T>, eps: T) -> Result<Discrepancy<T>> {
    let (m, at) = phi.max_abs();
    if !(m < T::one()) {
        return Err(Error::MaximumPrinciple {
            step: 0,
            index: at,
            value: m.as_f64(),
        });
    }
    let r = phi.map(|p| eps * p.atanh());
    let xi = r
        .grad_sq()
        .zip_map(phi, |g2, p| well(p).w / eps * (g2 - T::one()))?;
    Ok(summarize_discrepancy(xi))
}

fn summarize_discrepancy<T: Real>(xi: ScalarField<T>) -> Discrepancy<T> {
    let int_abs_xi = xi.map(|v| v.abs()).integrate() / sigma::<T>();
    let sup_xi = xi.max();
    Discrepancy { xi, int_abs_xi, sup_xi }
}

/// `∫|∇k(φ)|` with the pointwise chain rule `|∇k(φ)| = √(2W(φ))·|∇φ|`.
pub fn bv_k<T: Real>(phi: &ScalarField<T>) -> T {
    phi.grad_sq()
        .zip_map(phi, |g2, p| well(p).sqrt2w * g2.sqrt())
        .expect("same grid")
        .integrate()
}

/// `ω_{d−1}`: volume of the unit `(d−1)`-ball.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => unreachable!("dimension above 3"),
    }
}

/// Dyadic radii `4h, 8h, …` up to `0.25`.
pub fn dyadic_radii<T: Real>(grid: &TorusGrid) -> Vec<T> {
    let h = grid.h::<T>();
    let mut r = T::lit(4.0) * h;
    let mut out = Vec::new();
    while r <= T::lit(0.25) {
        out.push(r);
        r = r + r;
    }
    out
}

/// Deterministic sample of centers: up to `n_interface` points of the
/// numerical interface `{|φ| < 0.9}` and `n_background` uniform points.
pub fn density_centers<T: Real>(
    phi: &ScalarField<T>,
    seed: u64,
    n_interface: usize,
    n_background: usize,
) -> Vec<[T; MAX_DIM]> {
    let grid = phi.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interface: Vec<usize> = (0..grid.len())
        .filter(|&i| phi[i].abs() < T::lit(0.9))
        .collect();
    let mut centers = Vec::with_capacity(n_interface + n_background);
    if interface.len() <= n_interface {
        centers.extend(interface.iter().map(|&i| grid.point::<T>(i)));
    } else {
        for _ in 0..n_interface {
            let i = interface[rng.gen_range(0..interface.len())];
            centers.push(grid.point::<T>(i));
        }
    }
    for _ in 0..n_background {
        let mut x = [T::zero(); MAX_DIM];
        for v in x.iter_mut().take(grid.d()) {
            *v = T::lit(rng.gen::<f64>());
        }
        centers.push(x);
    }
    centers
}

/// μ-mass of periodic balls `B_r(center)` for every radius in `radii`
/// (ascending), with sharp indicator quadrature.
fn ball_masses<T: Real>(density: &ScalarField<T>, center: &[T], radii: &[T]) -> Vec<T> {
    let grid = density.grid();
    let d = grid.d();
    let n = grid.n() as i64;
    let h = grid.h::<T>();
    let rmax = *radii.last().expect("nonempty radii");
    let m = (rmax / h).ceil().to_i64().unwrap_or(0) + 1;
    let span = (2 * m + 1).min(n);
    let base: Vec<i64> = (0..d)
        .map(|a| (center[a] / h).round().to_i64().unwrap_or(0) - span / 2)
        .collect();
    let mut bins = vec![T::zero(); radii.len()];
    let total = span.pow(d as u32);
    let rmax2 = rmax * rmax;
    for off in 0..total {
        let mut rem = off;
        let mut c = [0usize; MAX_DIM];
        let mut dist2 = T::zero();
        for a in (0..d).rev() {
            let k = base[a] + rem % span;
            rem /= span;
            let kk = k.rem_euclid(n);
            c[a] = kk as usize;
            let dx = periodic_delta(T::from_count(kk as usize) * h, center[a]);
            dist2 = dist2 + dx * dx;
        }
        if dist2 > rmax2 {
            continue;
        }
        let dist = dist2.sqrt();
        let bin = radii.partition_point(|&r| r < dist);
        if bin < radii.len() {
            bins[bin] = bins[bin] + density[grid.index(&c[..d])];
        }
    }
    let cell = grid.cell_volume::<T>();
    let mut acc = T::zero();
    bins.iter()
        .map(|&b| {
            acc = acc + b;
            acc * cell
        })
        .collect()
}

/// Sampled estimate of `D(t) = sup μ(B_r(x)) / (ω_{d−1} r^{d−1})`.
///
/// This is a lower bound of the true supremum: only the given centers and
/// radii are examined.
pub fn density_ratio<T: Real>(
    phi: &ScalarField<T>,
    eps: T,
    centers: &[[T; MAX_DIM]],
    radii: &[T],
) -> Result<T> {
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::domain("density ratio needs at least one center and one radius"));
    }
    let grid = phi.grid();
    let h = grid.h::<T>();
    if let Some(r) = radii.iter().find(|&&r| !(r > T::lit(2.0) * h && r < T::lit(0.5))) {
        return Err(Error::domain(format!("density radius {r} outside (2h, 0.5)")));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    let density = energy_density(phi, eps).map(|e| e / sigma::<T>());
    let d = grid.d();
    let omega = T::lit(unit_ball_volume(d - 1));
    let best = centers
        .par_iter()
        .map(|c| {
            let masses = ball_masses(&density, &c[..d], &radii);
            masses
                .iter()
                .zip(&radii)
                .map(|(&m, &r)| m / (omega * r.powi(d as i32 - 1)))
                .fold(T::zero(), T::max)
        })
        .collect::<Vec<T>>();
    Ok(best.into_iter().fold(T::zero(), T::max))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BarrierReport<T> {
    pub violation_plus: T,
    pub violation_minus: T,
    pub certified_plus: usize,
    pub certified_minus: usize,
    /// Obstacle balls for which `B_{R₀+2√ε}(y) ⊂ O` fails at this `ε`.
    pub skipped: usize,
}

/// Compares `φ` with `tanh(r̲_y/ε)` (below, for `O₊` balls) and
/// `tanh(−r̲_z/ε)` (above, for `O₋` balls), `r̲_y(x) = (R₀² − |x−y|²)/(2R₀)`.
pub fn barrier_check<T: Real>(phi: &ScalarField<T>, obs: &ObstacleSet<T>, eps: T) -> BarrierReport<T> {
    let grid = *phi.grid();
    let d = grid.d();
    let r0 = obs.r0;
    let two_r0 = T::lit(2.0) * r0;
    let mut report = BarrierReport {
        violation_plus: T::zero(),
        violation_minus: T::zero(),
        ..Default::default()
    };
    let sweep = |y: &[T], upper: bool| -> T {
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point::<T>(i);
                let dist = periodic_distance(&x[..d], y, d);
                let under = (r0 * r0 - dist * dist) / two_r0;
                let v = if upper {
                    phi[i] - (-under / eps).tanh()
                } else {
                    (under / eps).tanh() - phi[i]
                };
                v.max(T::zero())
            })
            .reduce(T::zero, T::max)
    };
    for (family, upper) in [(&obs.plus, false), (&obs.minus, true)] {
        for ball in family.iter() {
            if !obs.barrier_certified(family, &ball.center, eps) {
                report.skipped += 1;
                continue;
            }
            let v = sweep(&ball.center, upper);
            if upper {
                report.certified_minus += 1;
                report.violation_minus = report.violation_minus.max(v);
            } else {
                report.certified_plus += 1;
                report.violation_plus = report.violation_plus.max(v);
            }
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conservation<T> {
    /// `|V₀ − V(t)|` for the weighted phase volume.
    pub vol_weighted_drift: T,
    /// Measure of `{φ > 0}`.
    pub vol_indicator: T,
    /// `∫ K(φ)`.
    pub vol_smooth: T,
}

pub fn conservation_report<T: Real>(
    phi: &ScalarField<T>,
    template: &ForcingTemplate<T>,
    mult: &MultiplierState<T>,
) -> Result<Conservation<T>> {
    let grid = phi.grid();
    let positive = phi.values().iter().filter(|&&p| p > T::zero()).count();
    let smooth = phi
        .values()
        .iter()
        .map(|&p| big_k(p))
        .collect::<Result<Vec<T>>>()?;
    Ok(Conservation {
        vol_weighted_drift: mult.deficit(phi, template)?.abs(),
        vol_indicator: T::from_count(positive) * grid.cell_volume::<T>(),
        vol_smooth: fixed_order_sum(&smooth, grid.n(), Exec::Parallel) * grid.cell_volume::<T>(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrusion<T> {
    /// Measure of `{φ < 0} ∩ O₊`.
    pub plus: T,
    /// Measure of `{φ > 0} ∩ O₋`.
    pub minus: T,
    /// Measure of the `√ε`-collar `{x ∈ O₊ : s(x) < √ε}`.
    pub collar_plus: T,
    pub collar_minus: T,
}

pub fn intrusion_report<T: Real>(phi: &ScalarField<T>, template: &ForcingTemplate<T>) -> Result<Intrusion<T>> {
    phi.grid().check_same(template.s.grid())?;
    let width = template.eps.sqrt();
    let cell = phi.grid().cell_volume::<T>();
    let mut out = [0usize; 4];
    for i in 0..phi.grid().len() {
        let s = template.s[i];
        match template.side[i] {
            1 => {
                out[0] += usize::from(phi[i] < T::zero());
                out[2] += usize::from(s < width);
            }
            -1 => {
                out[1] += usize::from(phi[i] > T::zero());
                out[3] += usize::from(s < width);
            }
            _ => {}
        }
    }
    let m = |c: usize| T::from_count(c) * cell;
    Ok(Intrusion {
        plus: m(out[0]),
        minus: m(out[1]),
        collar_plus: m(out[2]),
        collar_minus: m(out[3]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceRadius<T> {
    pub radius: T,
    pub cells: usize,
    /// The component fills the whole torus.
    pub degenerate: bool,
}

fn radius_from_volume<T: Real>(volume: T, d: usize) -> T {
    match d {
        2 => (volume / T::PI()).sqrt(),
        _ => (T::lit(3.0) * volume / (T::lit(4.0) * T::PI())).cbrt(),
    }
}

/// Flood fill of `{φ > 0}` from `seed` with periodic axis connectivity.
fn flood(phi: &ScalarField<impl Real>, seed: usize, label: &mut [u32], id: u32) -> usize {
    let grid = phi.grid();
    let mut queue = VecDeque::from([seed]);
    label[seed] = id;
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        for axis in 0..grid.d() {
            for fwd in [true, false] {
                let j = grid.neighbor(i, axis, fwd);
                if label[j] == 0 && phi[j] > num_traits::Zero::zero() {
                    label[j] = id;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

/// Radius of the `{φ > 0}` component containing `center`, from its cell count.
pub fn interface_radius<T: Real>(phi: &ScalarField<T>, center: &[T]) -> Result<InterfaceRadius<T>> {
    let grid = phi.grid();
    let seed = grid.nearest_index(center);
    if !(phi[seed] > T::zero()) {
        return Err(Error::domain("center is not inside {phi > 0}"));
    }
    let mut label = vec![0u32; grid.len()];
    let cells = flood(phi, seed, &mut label, 1);
    let volume = T::from_count(cells) * grid.cell_volume::<T>();
    Ok(InterfaceRadius {
        radius: radius_from_volume(volume, grid.d()),
        cells,
        degenerate: cells == grid.len(),
    })
}

/// Radii of every `{φ > 0}` component, in order of first grid index.
pub fn component_radii<T: Real>(phi: &ScalarField<T>) -> Vec<InterfaceRadius<T>> {
    let grid = phi.grid();
    let mut label = vec![0u32; grid.len()];
    let mut out = Vec::new();
    for i in 0..grid.len() {
        if label[i] == 0 && phi[i] > T::zero() {
            let cells = flood(phi, i, &mut label, out.len() as u32 + 1);
            let volume = T::from_count(cells) * grid.cell_volume::<T>();
            out.push(InterfaceRadius {
                radius: radius_from_volume(volume, grid.d()),
                cells,
                degenerate: cells == grid.len(),
            });
        }
    }
    out
}

/// Largest `ε·|∇_h φ|` (centered differences).
pub fn scaled_gradient<T: Real>(phi: &ScalarField<T>, eps: T) -> T {
    eps * phi.max_grad()
}

/// Total sharp perimeter (d=2) or area (d=3) of disjoint balls.
pub fn sharp_perimeter<T: Real>(balls: &[Ball<T>], d: usize) -> T {
    balls
        .iter()
        .map(|b| match d {
            2 => T::TAU() * b.radius,
            _ => T::lit(4.0) * T::PI() * b.radius * b.radius,
        })
        .fold(T::zero(), |a, v| a + v)
}
