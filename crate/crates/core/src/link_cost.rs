//! BPR volume-delay functions and the convex-analytic quantities built on them.
//!
//! For a link with free-flow time `t0`, capacity `c`, coefficient `kappa` and
//! exponent `p`, the travel time at flow `f` is `t0 * (1 + kappa * (f / c)^p)`.
//! `sigma` is its primitive (the Beckmann term), `sigma_conj` the Fenchel
//! conjugate of `sigma` over `f >= 0`, defined on `t >= t0`.

use crate::error::{Error, Result};

/// Relative slack below the free-flow time that is still treated as the boundary.
pub const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub free_flow_time: f64,
    pub capacity: f64,
    pub kappa: f64,
    /// BPR exponent (the reciprocal of the paper-style `mu`); 4 for the classic BPR.
    pub power: f64,
}

impl LinkParams {
    pub fn new(free_flow_time: f64, capacity: f64, kappa: f64, power: f64) -> Result<Self> {
        let link = LinkParams {
            free_flow_time,
            capacity,
            kappa,
            power,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.free_flow_time > 0.0 && self.free_flow_time.is_finite()) {
            return Err(Error::Invalid(format!(
                "free-flow time must be positive, got {}",
                self.free_flow_time
            )));
        }
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::Invalid(format!(
                "capacity must be positive, got {}",
                self.capacity
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Invalid(format!(
                "kappa must be non-negative, got {}",
                self.kappa
            )));
        }
        if !(self.power >= 1.0 && self.power.is_finite()) {
            return Err(Error::Invalid(format!(
                "power must be at least 1, got {}",
                self.power
            )));
        }
        Ok(())
    }

    /// Constant-cost link: `kappa == 0`, so `dom sigma*` is the single point `t0`.
    pub fn is_constant(&self) -> bool {
        self.kappa == 0.0
    }

    fn check_flow(&self, flow: f64) -> Result<()> {
        if flow.is_finite() && flow >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "flow must be finite and >= 0, got {flow}"
            )))
        }
    }

    /// Returns the excess `t - t0` clamped at zero, or an error when `t`
    /// lies below the free-flow time by more than the boundary slack.
    fn excess(&self, time: f64) -> Result<f64> {
        if !time.is_finite() || time < self.free_flow_time * (1.0 - BOUNDARY_SLACK) {
            return Err(Error::Domain(format!(
                "time {time} is below the free-flow time {}",
                self.free_flow_time
            )));
        }
        Ok((time - self.free_flow_time).max(0.0))
    }

    pub fn time(&self, flow: f64) -> Result<f64> {
        self.check_flow(flow)?;
        Ok(self.time_at(flow))
    }

    pub fn inverse(&self, time: f64) -> Result<f64> {
        let excess = self.excess(time)?;
        if excess == 0.0 {
            return Ok(0.0);
        }
        if self.is_constant() {
            return Err(Error::Domain(format!(
                "constant-cost link has no flow at time {time} above its free-flow time"
            )));
        }
        Ok(self.inverse_at(time))
    }

    pub fn sigma(&self, flow: f64) -> Result<f64> {
        self.check_flow(flow)?;
        Ok(self.sigma_at(flow))
    }

    pub fn sigma_conj(&self, time: f64) -> Result<f64> {
        let excess = self.excess(time)?;
        if excess == 0.0 {
            return Ok(0.0);
        }
        if self.is_constant() {
            return Err(Error::Domain(format!(
                "conjugate of a constant-cost link is infinite at {time}"
            )));
        }
        Ok(self.sigma_conj_at(time))
    }

    // Unchecked variants used on hot paths where the caller keeps `t >= t0`.

    pub(crate) fn time_at(&self, flow: f64) -> f64 {
        self.free_flow_time * (1.0 + self.kappa * (flow / self.capacity).powf(self.power))
    }

    pub(crate) fn inverse_at(&self, time: f64) -> f64 {
        let excess = time - self.free_flow_time;
        if excess <= 0.0 || self.is_constant() {
            return 0.0;
        }
        let ratio = excess / (self.kappa * self.free_flow_time);
        self.capacity * ratio.powf(1.0 / self.power)
    }

    pub(crate) fn sigma_at(&self, flow: f64) -> f64 {
        let p1 = self.power + 1.0;
        self.free_flow_time * flow
            + self.free_flow_time * self.kappa * self.capacity / p1
                * (flow / self.capacity).powf(p1)
    }

    pub(crate) fn sigma_conj_at(&self, time: f64) -> f64 {
        let excess = time - self.free_flow_time;
        if excess <= 0.0 || self.is_constant() {
            return 0.0;
        }
        let mu = 1.0 / self.power;
        self.capacity * excess.powf(mu + 1.0)
            / ((mu + 1.0) * (self.kappa * self.free_flow_time).powf(mu))
    }
}
