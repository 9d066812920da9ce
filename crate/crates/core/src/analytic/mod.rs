//! Stochastic-geometry model of a single LoRa cell.
//!
//! Devices form a Poisson point process around a gateway at the origin. The
//! cell is cut into annuli; inside annulus `j` the density of devices on
//! spreading factor `c` is the constant `lambda[j][c]`. Under Rayleigh fading
//! the aggregate same-SF interference has a closed-form Laplace functional,
//! which yields the success probability of a packet sent from distance `z`:
//!
//! ```text
//! p_s(c, z) = prod_j exp(-lambda[j][c] * T_c / T_rep * (Q(r_j2) - Q(r_j1)))
//!           * exp(-N * gamma_c * z^delta / (P_t * G))
//! ```
//!
//! with `Q(x) = pi * sqrt(gamma_I) * z^2 * atan(x^2 / (sqrt(gamma_I) * z^2))`
//! for `delta = 4`. Other exponents go through quadrature.
//!
//! On top of this sit the centralized allocation ([`optimize_densities`]) and
//! the rate-proportional baseline ([`eqload_allocate`]).

mod eqload;
mod optimize;
pub mod quad;

pub use eqload::eqload_allocate;
pub use optimize::{
    network_success, objective, optimize_densities, optimize_densities_with, reliability_term,
    OptimizeOutcome, OptimizerSettings,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{self, PhyParams, SpreadingFactor};
use quad::{adaptive_simpson, Tolerance};

/// Annuli `0 = r_0 < r_1 < ... < r_J = R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingPartition {
    boundaries: Vec<f64>,
}

impl RingPartition {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 || boundaries[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "ring boundaries must start at 0 and hold at least one ring".into(),
            ));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "ring boundaries must be strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    /// `rings` annuli of equal width over `[0, radius]`.
    pub fn uniform(radius: f64, rings: usize) -> Result<Self> {
        if rings == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter(
                "need rings >= 1 and radius > 0".into(),
            ));
        }
        let mut b: Vec<f64> = (0..=rings)
            .map(|j| radius * j as f64 / rings as f64)
            .collect();
        b[rings] = radius;
        Self::new(b)
    }

    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radius(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    /// Inner and outer radius of ring `j`.
    pub fn ring(&self, j: usize) -> (f64, f64) {
        (self.boundaries[j], self.boundaries[j + 1])
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Ring containing radius `r` (the outer boundary belongs to the last ring).
    pub fn ring_of(&self, r: f64) -> usize {
        let idx = self.boundaries.partition_point(|&b| b <= r);
        idx.clamp(1, self.len()) - 1
    }
}

/// Per-ring, per-SF device density in devices per square metre.
///
/// Stored as per-ring SF shares times the total density, so every ring's
/// densities sum to `lambda_total` by construction of a valid share row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    sf_set: Vec<SpreadingFactor>,
    lambda_total: f64,
    shares: Vec<Vec<f64>>,
}

impl DensityMatrix {
    /// Builds the matrix from per-ring SF shares (each row sums to 1).
    pub fn from_shares(
        sf_set: Vec<SpreadingFactor>,
        lambda_total: f64,
        shares: &[Vec<f64>],
    ) -> Result<Self> {
        let dm = Self {
            sf_set,
            lambda_total,
            shares: shares.to_vec(),
        };
        dm.validate()?;
        Ok(dm)
    }

    /// Every ring splits its density evenly over the SF set.
    pub fn uniform(sf_set: Vec<SpreadingFactor>, lambda_total: f64, rings: usize) -> Result<Self> {
        let share = 1.0 / sf_set.len().max(1) as f64;
        let rows = vec![vec![share; sf_set.len()]; rings];
        Self::from_shares(sf_set, lambda_total, &rows)
    }

    /// All density on `sf_set[column]` in every ring.
    pub fn single_sf(
        sf_set: Vec<SpreadingFactor>,
        lambda_total: f64,
        rings: usize,
        column: usize,
    ) -> Result<Self> {
        let mut row = vec![0.0; sf_set.len()];
        row[column] = 1.0;
        Self::from_shares(sf_set, lambda_total, &vec![row; rings])
    }

    pub fn validate(&self) -> Result<()> {
        if self.sf_set.is_empty() {
            return Err(Error::EmptySet("spreading factor"));
        }
        if !(self.lambda_total >= 0.0 && self.lambda_total.is_finite()) {
            return Err(Error::InvalidParameter(
                "lambda_total must be finite and >= 0".into(),
            ));
        }
        for (j, row) in self.shares.iter().enumerate() {
            if row.len() != self.sf_set.len() {
                return Err(Error::InvalidParameter(format!("ring {j} has wrong width")));
            }
            if row.iter().any(|&s| !(s >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "ring {j} has a negative density"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "ring {j} densities sum to {} of the total",
                    sum
                )));
            }
        }
        Ok(())
    }

    pub fn sf_set(&self) -> &[SpreadingFactor] {
        &self.sf_set
    }

    pub fn lambda_total(&self) -> f64 {
        self.lambda_total
    }

    pub fn rings(&self) -> usize {
        self.shares.len()
    }

    pub fn column(&self, sf: SpreadingFactor) -> Option<usize> {
        self.sf_set.iter().position(|&s| s == sf)
    }

    /// Density `lambda[ring][column]`.
    pub fn get(&self, ring: usize, column: usize) -> f64 {
        self.shares[ring][column] * self.lambda_total
    }

    /// Fraction of ring `ring`'s devices on `sf_set[column]`.
    pub fn share(&self, ring: usize, column: usize) -> f64 {
        self.shares[ring][column]
    }

    pub fn ring_shares(&self, ring: usize) -> &[f64] {
        &self.shares[ring]
    }

    /// Overwrites one density entry. The ring may no longer sum to the total.
    pub fn set(&mut self, ring: usize, column: usize, lambda: f64) {
        assert!(
            self.lambda_total > 0.0,
            "cannot set a density when lambda_total is 0"
        );
        self.shares[ring][column] = lambda / self.lambda_total;
    }

    /// Replaces ring `ring`'s SF shares; `shares` must sum to one.
    pub fn set_ring_shares(&mut self, ring: usize, shares: &[f64]) {
        self.shares[ring].copy_from_slice(shares);
    }

    /// SF with the largest density in ring `ring` (lowest SF wins ties).
    pub fn dominant_sf(&self, ring: usize) -> SpreadingFactor {
        let row = &self.shares[ring];
        let mut best = 0;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        self.sf_set[best]
    }
}

/// How airtime enters the energy part of the centralized objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AirtimeRatio {
    /// `T(c_min) / T_c`, in (0, 1]; short airtime scores higher.
    #[default]
    ShortestOverOwn,
    /// `T_c / T(c_min)`, the printed form.
    OwnOverShortest,
}

/// Inputs of the stochastic-geometry model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticScenario {
    /// Total device density, per square metre.
    pub lambda_total: f64,
    pub t_rep: f64,
    pub payload: usize,
    pub p_t_dbm: f64,
    /// Linear pathloss gain `G` in `G * r^-delta`.
    pub pathloss_g: f64,
    pub pathloss_exp: f64,
    pub phy: PhyParams,
    pub beta: f64,
    pub airtime_ratio: AirtimeRatio,
    /// Divide each ring's radial integral of `p_s` by the ring width.
    pub normalize_width: bool,
    pub tolerance: Tolerance,
}

impl AnalyticScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exp >= 2.0) {
            return Err(Error::InvalidParameter(
                "pathloss exponent must be >= 2".into(),
            ));
        }
        if !(self.pathloss_g > 0.0) {
            return Err(Error::InvalidParameter("pathloss gain must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter("beta must lie in [0, 1]".into()));
        }
        let max_airtime = SpreadingFactor::all()
            .into_iter()
            .map(|sf| self.airtime(sf))
            .fold(0.0, f64::max);
        if !(self.t_rep > max_airtime) {
            return Err(Error::InvalidParameter(
                "t_rep must exceed the longest airtime".into(),
            ));
        }
        self.phy.validate()
    }

    pub fn airtime(&self, sf: SpreadingFactor) -> f64 {
        phy::time_on_air(self.payload.max(1), sf, &self.phy).expect("payload is positive")
    }

    /// Fraction of time an interferer on `sf` is on air.
    pub fn activity(&self, sf: SpreadingFactor) -> f64 {
        self.airtime(sf) / self.t_rep
    }

    pub fn tx_power_w(&self) -> f64 {
        phy::dbm_to_watts(self.p_t_dbm)
    }

    fn is_fourth_power(&self) -> bool {
        (self.pathloss_exp - 4.0).abs() < 1e-12
    }
}

/// Linear power gain `g * r^-delta`.
pub fn pathloss(r: f64, g: f64, delta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::SingularAtOrigin);
    }
    Ok(g * r.powf(-delta))
}

/// `Q(x) = pi * atan(x^2 / (sqrt(gamma_i) z^2)) * sqrt(gamma_i) z^2`, the
/// antiderivative of `2 pi r / (1 + (r/z)^4 / gamma_i)`.
pub fn q_closed_form(x: f64, z: f64, gamma_i: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter("z must be > 0".into()));
    }
    if !(gamma_i > 0.0) {
        return Err(Error::InvalidParameter("gamma_i must be > 0".into()));
    }
    let scale = gamma_i.sqrt() * z * z;
    Ok(PI * (x * x / scale).atan() * scale)
}

/// Rayleigh interference kernel `2 pi r / (1 + (r/z)^delta / gamma_i)`.
fn interference_kernel(r: f64, z: f64, gamma_i: f64, delta: f64) -> f64 {
    2.0 * PI * r / (1.0 + (r / z).powf(delta) / gamma_i)
}

/// Negative log of ring `ring`'s Laplace factor for a receiver at distance
/// `z`, on SF `sf`: `lambda[j][c] * T_c / T_rep * integral of the kernel`.
pub fn ring_exponent(
    z: f64,
    sf: SpreadingFactor,
    ring: usize,
    dm: &DensityMatrix,
    sc: &AnalyticScenario,
    part: &RingPartition,
) -> f64 {
    let Some(c) = dm.column(sf) else {
        return 0.0;
    };
    let lambda = dm.get(ring, c);
    if lambda == 0.0 {
        return 0.0;
    }
    let (r1, r2) = part.ring(ring);
    let gamma_i = sc.phy.sir_threshold();
    let area = if sc.is_fourth_power() {
        q_closed_form(r2, z, gamma_i).unwrap() - q_closed_form(r1, z, gamma_i).unwrap()
    } else {
        kernel_quadrature(r1, r2, z, gamma_i, sc.pathloss_exp, sc.tolerance)
    };
    lambda * sc.activity(sf) * area
}

/// [`ring_exponent`] computed by quadrature whatever the pathloss exponent.
pub fn ring_exponent_quadrature(
    z: f64,
    sf: SpreadingFactor,
    ring: usize,
    dm: &DensityMatrix,
    sc: &AnalyticScenario,
    part: &RingPartition,
) -> f64 {
    let Some(c) = dm.column(sf) else {
        return 0.0;
    };
    let (r1, r2) = part.ring(ring);
    let area = kernel_quadrature(
        r1,
        r2,
        z,
        sc.phy.sir_threshold(),
        sc.pathloss_exp,
        sc.tolerance,
    );
    dm.get(ring, c) * sc.activity(sf) * area
}

fn kernel_quadrature(r1: f64, r2: f64, z: f64, gamma_i: f64, delta: f64, tol: Tolerance) -> f64 {
    adaptive_simpson(|r| interference_kernel(r, z, gamma_i, delta), r1, r2, tol)
}

/// Noise-only exponent `N * gamma_c * z^delta / (P_t * G)`.
pub fn noise_exponent(sf: SpreadingFactor, z: f64, sc: &AnalyticScenario) -> f64 {
    let noise = phy::noise_power(&sc.phy);
    noise * sc.phy.snr_threshold(sf) * z.powf(sc.pathloss_exp) / (sc.tx_power_w() * sc.pathloss_g)
}

/// Probability that a packet on `sf` sent from distance `z` is decoded.
pub fn success_probability(
    sf: SpreadingFactor,
    z: f64,
    dm: &DensityMatrix,
    sc: &AnalyticScenario,
    part: &RingPartition,
) -> f64 {
    let interference: f64 = (0..part.len())
        .map(|j| ring_exponent(z, sf, j, dm, sc, part))
        .sum();
    (-(interference + noise_exponent(sf, z, sc))).exp()
}
