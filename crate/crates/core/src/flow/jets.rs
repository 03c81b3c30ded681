//! Synthetic-jet boundary profile.
//!
//! A single scalar mass flow rate `Q` drives both jets of a pseudo-environment:
//! the top jet carries `Q`, the bottom jet `-Q`, so the net injected mass is
//! zero at every instant. Over its arc each jet imposes a wall-normal velocity
//! with a cosine profile that vanishes at the arc edges:
//!
//! `u = Q * pi / (rho * D * omega) * cos(pi / omega * (theta - theta0)) * (cos theta, sin theta)`.

use std::f64::consts::PI;

use super::config::{JetConfig, DIAMETER, RHO};

/// Which of the two jets a wall point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetSide {
    Top,
    Bottom,
}

impl JetSide {
    /// Sign applied to the pseudo-environment flow rate.
    pub fn sign(self) -> f64 {
        match self {
            JetSide::Top => 1.0,
            JetSide::Bottom => -1.0,
        }
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Jet containing the wall angle `theta` (radians), with its offset from the arc centre.
pub fn jet_at(theta: f64, jet: &JetConfig) -> Option<(JetSide, f64)> {
    let half = 0.5 * jet.omega();
    for (side, centre) in [
        (JetSide::Top, jet.theta_top_deg.to_radians()),
        (JetSide::Bottom, jet.theta_bot_deg.to_radians()),
    ] {
        let d = wrap_angle(theta - centre);
        if d.abs() <= half + 1e-12 {
            return Some((side, d));
        }
    }
    None
}

/// Top-jet wall-normal speed at angular offset `d` from the arc centre.
pub fn jet_profile(q: f64, d: f64, jet: &JetConfig) -> f64 {
    let omega = jet.omega();
    q * PI / (RHO * DIAMETER * omega) * (PI / omega * d).cos().max(0.0)
}

/// Signed wall-normal jet speed at wall angle `theta` for flow rate `q`.
pub fn jet_radial_speed(q: f64, theta: f64, jet: &JetConfig) -> f64 {
    match jet_at(theta, jet) {
        Some((side, d)) => side.sign() * jet_profile(q, d, jet),
        None => 0.0,
    }
}

/// Velocity imposed at the wall point at angle `theta` (radians) for flow rate `q`.
pub fn jet_velocity(q: f64, theta: f64, jet: &JetConfig) -> (f64, f64) {
    let s = jet_radial_speed(q, theta, jet);
    if s == 0.0 {
        return (0.0, 0.0);
    }
    (s * theta.cos(), s * theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_centre_speed() {
        let jet = JetConfig::default();
        let (u, v) = jet_velocity(0.1, 90f64.to_radians(), &jet);
        let expected = 0.1 * PI / 10f64.to_radians();
        assert!((expected - 1.8).abs() < 1e-3);
        assert!(u.abs() < 1e-15);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn arc_edge_vanishes() {
        let jet = JetConfig::default();
        let (u, v) = jet_velocity(0.1, 95f64.to_radians(), &jet);
        assert!(u.hypot(v) < 1e-12);
        assert_eq!(jet_velocity(0.1, 120f64.to_radians(), &jet), (0.0, 0.0));
    }

    #[test]
    fn bottom_jet_sucks_when_top_blows() {
        let jet = JetConfig::default();
        let top = jet_radial_speed(0.1, 90f64.to_radians(), &jet);
        let bot = jet_radial_speed(0.1, 270f64.to_radians(), &jet);
        assert!(top > 0.0);
        assert_eq!(bot, -top);
        // Outward normal at 270 deg points down, so suction means upward velocity.
        let (_, v) = jet_velocity(0.1, 270f64.to_radians(), &jet);
        assert!((v - top).abs() < 1e-12);
    }

    #[test]
    fn negative_angles_wrap() {
        let jet = JetConfig::default();
        assert_eq!(
            jet_radial_speed(0.05, (-90f64).to_radians(), &jet),
            jet_radial_speed(0.05, 270f64.to_radians(), &jet)
        );
    }
}
