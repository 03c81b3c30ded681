use serde::{Deserialize, Serialize};

use super::FlowError;

/// Freestream speed. All quantities are nondimensionalized by it.
pub const U_INF: f64 = 1.0;
/// Fluid density.
pub const RHO: f64 = 1.0;
/// Cylinder diameter.
pub const DIAMETER: f64 = 1.0;
/// Minimum gap between the cylinder surface and any domain boundary, in diameters.
pub const MIN_CLEARANCE: f64 = 2.0;

/// Physical and numerical parameters of one simulation instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub re: f64,
    pub lx: f64,
    pub ly: f64,
    pub center: (f64, f64),
    /// Uniform grid spacing, in diameters.
    pub h: f64,
    /// Courant number targeted by the time-step selection.
    pub cfl: f64,
    /// Number of pseudo-environments sharing this simulation.
    pub n_pe: usize,
    /// Relative residual at which the pressure solve stops.
    pub poisson_tol: f64,
    pub poisson_max_iter: usize,
    /// Passes of the multi-direct immersed-boundary forcing per step.
    pub ib_iterations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            re: 100.0,
            lx: 30.0,
            ly: 15.0,
            center: (7.5, 7.5),
            h: 1.0 / 25.0,
            cfl: 0.5,
            n_pe: 4,
            poisson_tol: 1e-6,
            poisson_max_iter: 200,
            ib_iterations: 4,
        }
    }
}

impl SimConfig {
    /// Kinematic viscosity, `U_INF * DIAMETER / re`.
    pub fn nu(&self) -> f64 {
        U_INF * DIAMETER / self.re
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |msg: String| Err(FlowError::Config(msg));
        if !(self.re > 0.0 && self.re.is_finite()) {
            return bad(format!("Reynolds number must be positive, got {}", self.re));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("grid spacing must be positive, got {}", self.h));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if self.n_pe == 0 {
            return bad("n_pe must be at least 1".into());
        }
        if !(self.poisson_tol > 0.0 && self.poisson_tol < 1.0) {
            return bad(format!("poisson_tol must lie in (0, 1), got {}", self.poisson_tol));
        }
        if self.poisson_max_iter == 0 {
            return bad("poisson_max_iter must be at least 1".into());
        }
        cells_along(self.lx, self.h)?;
        cells_along(self.ly, self.h)?;
        let r = 0.5 * DIAMETER;
        let (cx, cy) = self.center;
        let gaps = [cx - r, self.lx - cx - r, cy - r, self.ly - cy - r];
        if gaps.iter().any(|g| !(*g >= MIN_CLEARANCE - 1e-12)) {
            return bad(format!(
                "cylinder at ({cx}, {cy}) needs {MIN_CLEARANCE}D clearance inside a {}x{} domain",
                self.lx, self.ly
            ));
        }
        Ok(())
    }
}

/// Number of cells spanning `len` at spacing `h`; the ratio must be integral.
pub fn cells_along(len: f64, h: f64) -> Result<usize, FlowError> {
    let n = (len / h).round();
    if !(n >= 4.0) || ((n * h - len).abs() > 1e-9 * len.max(1.0)) {
        return Err(FlowError::Config(format!(
            "extent {len} is not a whole number (>= 4) of cells of size {h}"
        )));
    }
    Ok(n as usize)
}

/// Geometry and limits of the paired synthetic jets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetConfig {
    pub theta_top_deg: f64,
    pub theta_bot_deg: f64,
    /// Angular width of each jet.
    pub omega_deg: f64,
    /// Spanwise width of one pseudo-environment, in diameters.
    pub l_jet: f64,
    /// Largest admissible mass flow rate; the lower bound is `-q_max`.
    pub q_max: f64,
}

impl Default for JetConfig {
    fn default() -> Self {
        Self {
            theta_top_deg: 90.0,
            theta_bot_deg: 270.0,
            omega_deg: 10.0,
            l_jet: 0.4,
            q_max: 0.176,
        }
    }
}

impl JetConfig {
    pub fn omega(&self) -> f64 {
        self.omega_deg.to_radians()
    }

    pub fn q_min(&self) -> f64 {
        -self.q_max
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.omega_deg > 0.0 && self.omega_deg < 180.0) {
            return Err(FlowError::Config(format!(
                "jet width must lie in (0, 180) degrees, got {}",
                self.omega_deg
            )));
        }
        if !(self.q_max > 0.0 && self.q_max.is_finite()) {
            return Err(FlowError::Config(format!("q_max must be positive, got {}", self.q_max)));
        }
        if !(self.l_jet > 0.0) {
            return Err(FlowError::Config(format!("l_jet must be positive, got {}", self.l_jet)));
        }
        Ok(())
    }

    /// Reference area `S = L_jet * D` used in the force coefficients.
    pub fn reference_area(&self) -> f64 {
        self.l_jet * DIAMETER
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SimConfig::default().validate().unwrap();
        JetConfig::default().validate().unwrap();
        assert!((SimConfig::default().nu() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn insufficient_clearance_is_rejected() {
        let cfg = SimConfig {
            center: (0.4, 7.5),
            ..SimConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(FlowError::Config(_))));
        let cfg = SimConfig {
            center: (7.5, 13.0),
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_integral_extent_is_rejected() {
        assert!(cells_along(30.0, 0.07).is_err());
        assert_eq!(cells_along(30.0, 1.0 / 25.0).unwrap(), 750);
    }

    #[test]
    fn jet_bounds_are_symmetric() {
        let j = JetConfig::default();
        assert_eq!(j.q_min(), -j.q_max);
        let bad = JetConfig {
            omega_deg: 180.0,
            ..j
        };
        assert!(bad.validate().is_err());
    }
}
