//! Nonlocal volume multiplier `λ = ε^{−α}(V₀ − V(t))`, where `V` is the
//! phase volume `∫ η_ε(s)·k(φ)` weighted by the multiplier carrier.

use crate::fields::ScalarField;
use crate::obstacles::ForcingTemplate;
use crate::profile::k_fn;
use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierState<T> {
    /// Weighted phase volume of the initial datum.
    pub v0: T,
    pub eps: T,
    pub alpha: T,
    pub last_lambda: T,
}

pub fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::key("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// `∫ a(x)·k(φ(x)) dx`.
pub fn weighted_phase_volume<T: Real>(phi: &ScalarField<T>, template: &ForcingTemplate<T>) -> Result<T> {
    Ok(phi.zip_map(&template.a, |p, a| a * k_fn(p))?.integrate())
}

impl<T: Real> MultiplierState<T> {
    pub fn new(phi0: &ScalarField<T>, template: &ForcingTemplate<T>, eps: T, alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        let state = Self {
            v0: T::zero(),
            eps,
            alpha,
            last_lambda: T::zero(),
        };
        state.check_template(template)?;
        Ok(Self {
            v0: weighted_phase_volume(phi0, template)?,
            ..state
        })
    }

    fn check_template(&self, template: &ForcingTemplate<T>) -> Result<()> {
        if template.eps != self.eps {
            return Err(Error::key(
                "epsilon",
                format!(
                    "forcing template built for eps = {} but multiplier uses {}",
                    template.eps, self.eps
                ),
            ));
        }
        Ok(())
    }

    /// `ε^{−α}`.
    pub fn scale(&self) -> T {
        self.eps.powf(-self.alpha)
    }

    /// Volume deficit `V₀ − V`.
    pub fn deficit(&self, phi: &ScalarField<T>, template: &ForcingTemplate<T>) -> Result<T> {
        self.check_template(template)?;
        Ok(self.v0 - weighted_phase_volume(phi, template)?)
    }

    pub fn lambda_value(&mut self, phi: &ScalarField<T>, template: &ForcingTemplate<T>) -> Result<T> {
        let lambda = self.scale() * self.deficit(phi, template)?;
        self.last_lambda = lambda;
        Ok(lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TorusGrid;
    use crate::obstacles::{build_forcing_template, Ball, ObstacleSet};
    use approx::assert_relative_eq;

    fn no_obstacles(g: &TorusGrid, eps: f64) -> ForcingTemplate<f64> {
        build_forcing_template(&ObstacleSet::empty(), g, eps).unwrap()
    }

    fn disk(g: TorusGrid, r: f64) -> ScalarField<f64> {
        ScalarField::from_fn(g, move |x: &[f64]| {
            let d = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            ((r - d) / 0.05).tanh()
        })
    }

    #[test]
    fn volume_examples() {
        let g = TorusGrid::new(2, 64).unwrap();
        let t = no_obstacles(&g, 0.04);
        assert_eq!(weighted_phase_volume(&ScalarField::zeros(g), &t).unwrap(), 0.0);
        assert_relative_eq!(
            weighted_phase_volume(&ScalarField::constant(g, 1.0), &t).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn volume_with_obstacle_is_bracketed() {
        let g = TorusGrid::new(2, 256).unwrap();
        let obs = ObstacleSet::new(vec![Ball::new(vec![0.5, 0.5], 0.2).unwrap()], vec![], None).unwrap();
        let eps = 0.01_f64;
        let t = build_forcing_template(&obs, &g, eps).unwrap();
        let v = weighted_phase_volume(&ScalarField::constant(g, 1.0), &t).unwrap();
        // quadrature oracle: integrate η over the radial profile of the collar
        let w = eps.sqrt() / 2.0;
        let steps = 20000;
        let mut collar = 0.0;
        for i in 0..steps {
            let s = (i as f64 + 0.5) / steps as f64 * w;
            collar += cutoff(s, w) * 2.0 * std::f64::consts::PI * (0.2 - s) * (w / steps as f64);
        }
        let oracle = (2.0 / 3.0) * (1.0 - std::f64::consts::PI * 0.04 + collar);
        assert!(v > (2.0 / 3.0) * (1.0 - std::f64::consts::PI * 0.04) && v < 2.0 / 3.0);
        assert!((v - oracle).abs() < 2e-3, "v = {v}, oracle = {oracle}");
    }

    fn cutoff(s: f64, w: f64) -> f64 {
        crate::obstacles::cutoff_eta(s, (2.0 * w).powi(2)).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let g = TorusGrid::new(2, 64).unwrap();
        let t = no_obstacles(&g, 0.04);
        let phi0 = disk(g, 0.25);
        let mut m = MultiplierState::new(&phi0, &t, 0.04, 0.5).unwrap();
        assert_eq!(m.lambda_value(&phi0, &t).unwrap(), 0.0);
        // phase mass lost: restorative positive multiplier
        let lost = phi0.map(|p| p - 0.01);
        let l = m.lambda_value(&lost, &t).unwrap();
        assert!(l > 0.0);
        assert_eq!(m.last_lambda, l);
        // doubling the deficit doubles λ
        let d1 = m.deficit(&lost, &t).unwrap();
        let state = MultiplierState { v0: m.v0 + d1, ..m.clone() };
        let mut s2 = state;
        assert_relative_eq!(s2.lambda_value(&lost, &t).unwrap(), 2.0 * l, max_relative = 1e-12);
        // direct scaling
        let mut s3 = MultiplierState { v0: 0.01, eps: 0.04, alpha: 0.5, last_lambda: 0.0 };
        let zero_t = t.clone();
        let zero_phi = ScalarField::zeros(g);
        assert_relative_eq!(s3.lambda_value(&zero_phi, &zero_t).unwrap(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_alpha_and_template_mismatch() {
        let g = TorusGrid::new(2, 64).unwrap();
        let t = no_obstacles(&g, 0.04);
        let phi0 = disk(g, 0.25);
        assert!(MultiplierState::new(&phi0, &t, 0.04, 1.0).is_err());
        assert!(MultiplierState::new(&phi0, &t, 0.04, 0.0).is_err());
        assert!(MultiplierState::new(&phi0, &t, 0.05, 0.5).is_err());
        let mut m = MultiplierState::new(&phi0, &t, 0.04, 0.5).unwrap();
        let other = no_obstacles(&g, 0.08);
        assert!(m.lambda_value(&phi0, &other).is_err());
    }
}
