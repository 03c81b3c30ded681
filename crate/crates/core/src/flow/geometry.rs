use std::f64::consts::PI;

use super::config::{cells_along, JetConfig, SimConfig, DIAMETER};
use super::jets::{jet_at, JetSide};
use super::FlowError;

/// Number of Lagrangian markers on the cylinder surface.
pub const N_MARKERS: usize = 360;

/// Outer boundary treatment of the rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundaries {
    /// Uniform inflow on the left, free-slip top and bottom, convective outflow
    /// with zero reference pressure on the right.
    Channel { u_inf: f64 },
    /// Doubly periodic box.
    Periodic,
}

/// One Lagrangian marker of the immersed boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    /// Polar angle around the cylinder centre, radians, counter-clockwise from +x.
    pub theta: f64,
    /// Arc length represented by this marker.
    pub ds: f64,
    pub jet: Option<JetSide>,
}

/// The immersed circular cylinder and its markers.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub center: (f64, f64),
    pub radius: f64,
    pub markers: Vec<Marker>,
    /// Per-cell flag, row-major `nx * ny`: cell centre lies inside the cylinder.
    pub mask: Vec<bool>,
    pub jets: JetConfig,
}

impl Cylinder {
    pub fn jet_markers(&self, side: JetSide) -> impl Iterator<Item = &Marker> {
        self.markers.iter().filter(move |m| m.jet == Some(side))
    }
}

/// Grid metadata plus the optional immersed body.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainGeometry {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub boundaries: Boundaries,
    pub body: Option<Cylinder>,
}

impl DomainGeometry {
    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.h
    }

    pub fn ly(&self) -> f64 {
        self.ny as f64 * self.h
    }

    /// A body-free rectangle, used for verification problems.
    pub fn empty(nx: usize, ny: usize, h: f64, boundaries: Boundaries) -> Self {
        Self {
            nx,
            ny,
            h,
            boundaries,
            body: None,
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > 0.0 && x < self.lx() && y > 0.0 && y < self.ly()
    }
}

/// Builds the channel grid, cylinder mask, surface markers and jet arcs.
pub fn build_domain(config: &SimConfig, jets: &JetConfig) -> Result<DomainGeometry, FlowError> {
    config.validate()?;
    jets.validate()?;
    let nx = cells_along(config.lx, config.h)?;
    let ny = cells_along(config.ly, config.h)?;
    let radius = 0.5 * DIAMETER;
    let (cx, cy) = config.center;
    let ds = 2.0 * PI * radius / N_MARKERS as f64;
    let markers = (0..N_MARKERS)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / N_MARKERS as f64;
            Marker {
                x: cx + radius * theta.cos(),
                y: cy + radius * theta.sin(),
                theta,
                ds,
                jet: jet_at(theta, jets).map(|(side, _)| side),
            }
        })
        .collect();
    let mut mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * config.h - cx;
            let y = (j as f64 + 0.5) * config.h - cy;
            mask[j * nx + i] = x * x + y * y < radius * radius;
        }
    }
    Ok(DomainGeometry {
        nx,
        ny,
        h: config.h,
        boundaries: Boundaries::Channel {
            u_inf: super::config::U_INF,
        },
        body: Some(Cylinder {
            center: config.center,
            radius,
            markers,
            mask,
            jets: jets.clone(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_domain_grid_size() {
        let g = build_domain(&SimConfig::default(), &JetConfig::default()).unwrap();
        assert_eq!((g.nx, g.ny), (750, 375));
    }

    #[test]
    fn clearance_violation_is_a_config_error() {
        let cfg = SimConfig {
            center: (0.4, 7.5),
            ..SimConfig::default()
        };
        assert!(matches!(
            build_domain(&cfg, &JetConfig::default()),
            Err(FlowError::Config(_))
        ));
    }

    #[test]
    fn markers_lie_on_the_circle() {
        let cfg = SimConfig::default();
        let g = build_domain(&cfg, &JetConfig::default()).unwrap();
        let body = g.body.unwrap();
        assert_eq!(body.markers.len(), 360);
        assert!((body.markers[0].ds - 0.0087266).abs() < 1e-6);
        for m in &body.markers {
            let r = (m.x - 7.5).hypot(m.y - 7.5);
            assert!((r - 0.5).abs() < cfg.h);
        }
        for w in body.markers.windows(2) {
            let gap = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
            assert!((gap - 2.0 * PI * 0.5 / 360.0).abs() < 1e-6);
        }
    }

    #[test]
    fn jet_arcs_are_ten_degrees_wide() {
        let g = build_domain(&SimConfig::default(), &JetConfig::default()).unwrap();
        let body = g.body.unwrap();
        let top: Vec<f64> = body
            .jet_markers(JetSide::Top)
            .map(|m| m.theta.to_degrees().round())
            .collect();
        let bot: Vec<f64> = body
            .jet_markers(JetSide::Bottom)
            .map(|m| m.theta.to_degrees().round())
            .collect();
        assert_eq!(top.first(), Some(&85.0));
        assert_eq!(top.last(), Some(&95.0));
        assert_eq!(bot.first(), Some(&265.0));
        assert_eq!(bot.last(), Some(&275.0));
    }

    #[test]
    fn mask_covers_the_disc_area() {
        let cfg = SimConfig::default();
        let g = build_domain(&cfg, &JetConfig::default()).unwrap();
        let inside = g.body.unwrap().mask.iter().filter(|&&b| b).count() as f64;
        let area = inside * cfg.h * cfg.h;
        assert!((area - PI * 0.25).abs() < 0.02, "{area}");
    }
}
