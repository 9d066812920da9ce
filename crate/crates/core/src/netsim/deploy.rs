use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{Population, SimConfig};

/// Devices never sit closer than this to the gateway.
pub const MIN_RADIUS_M: f64 = 1.0;

/// Position of one device relative to the gateway at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Device {
    pub id: usize,
    pub radius: f64,
    pub angle: f64,
}

/// Drops devices uniformly on the disk of radius `cell_radius_m`.
pub fn deploy<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Vec<Device> {
    let r_max = config.cell_radius_m;
    let count = match config.population {
        Population::Count(n) => n,
        Population::Density(lambda) => {
            let mean = lambda * PI * r_max * r_max;
            if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(rng) as usize
            } else {
                0
            }
        }
    };
    (0..count)
        .map(|id| {
            let u: f64 = rng.random();
            let angle = rng.random::<f64>() * 2.0 * PI;
            Device {
                id,
                radius: (r_max * u.sqrt()).max(MIN_RADIUS_M),
                angle,
            }
        })
        .collect()
}
