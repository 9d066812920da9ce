//! Centralized SF-density allocation.
//!
//! The objective is a share-weighted sum over rings and spreading factors of
//! a reliability part (radial integral of `p_s` over the ring) and an airtime
//! part. It is maximized by round-robin best response: each ring in turn
//! picks the best point of the SF-share simplex on a regular grid, holding
//! the other rings fixed.
//!
//! `p_s` for SF `c` only depends on the column `lambda[.][c]`, so with one
//! ring free the objective splits into one term per SF, each a function of
//! that SF's share alone. The grid search is therefore an exact dynamic
//! program over SFs rather than an enumeration of the whole simplex. During
//! the search the radial integrals use fixed Gauss-Legendre nodes with cached
//! interference kernels; the reported objective is re-evaluated adaptively.

use log::warn;

use super::quad::{adaptive_simpson, gauss_legendre};
use super::{
    noise_exponent, q_closed_form, ring_exponent_quadrature, success_probability, AirtimeRatio,
    AnalyticScenario, DensityMatrix, RingPartition,
};
use crate::error::{Error, Result};
use crate::phy::SpreadingFactor;

fn airtime_terms(sf_set: &[SpreadingFactor], sc: &AnalyticScenario) -> Vec<f64> {
    let shortest = sf_set
        .iter()
        .map(|&sf| sc.airtime(sf))
        .fold(f64::INFINITY, f64::min);
    sf_set
        .iter()
        .map(|&sf| match sc.airtime_ratio {
            AirtimeRatio::ShortestOverOwn => shortest / sc.airtime(sf),
            AirtimeRatio::OwnOverShortest => sc.airtime(sf) / shortest,
        })
        .collect()
}

/// Radial integral of `p_s` over ring `ring`, optionally divided by its width.
fn ring_reliability(
    sf: SpreadingFactor,
    ring: usize,
    dm: &DensityMatrix,
    sc: &AnalyticScenario,
    part: &RingPartition,
) -> f64 {
    let (r1, r2) = part.ring(ring);
    let integral = adaptive_simpson(
        |z| {
            if z > 0.0 {
                success_probability(sf, z, dm, sc, part)
            } else {
                1.0
            }
        },
        r1,
        r2,
        sc.tolerance,
    );
    if sc.normalize_width {
        integral / (r2 - r1)
    } else {
        integral
    }
}

/// Centralized objective:
/// `sum_j sum_c share[j][c] * ((1 - beta) * rel[j][c] + beta * airtime[c])`.
pub fn objective(dm: &DensityMatrix, sc: &AnalyticScenario, part: &RingPartition) -> f64 {
    let airtime = airtime_terms(dm.sf_set(), sc);
    let mut total = 0.0;
    for j in 0..part.len() {
        for (c, &sf) in dm.sf_set().iter().enumerate() {
            let share = dm.share(j, c);
            if share == 0.0 {
                continue;
            }
            let rel = if sc.beta < 1.0 {
                ring_reliability(sf, j, dm, sc, part)
            } else {
                0.0
            };
            total += share * ((1.0 - sc.beta) * rel + sc.beta * airtime[c]);
        }
    }
    total
}

/// Reliability part of [`objective`] without the `(1 - beta)` weight.
pub fn reliability_term(dm: &DensityMatrix, sc: &AnalyticScenario, part: &RingPartition) -> f64 {
    let mut total = 0.0;
    for j in 0..part.len() {
        for (c, &sf) in dm.sf_set().iter().enumerate() {
            let share = dm.share(j, c);
            if share > 0.0 {
                total += share * ring_reliability(sf, j, dm, sc, part);
            }
        }
    }
    total
}

/// Success probability averaged over devices spread uniformly on the disk.
pub fn network_success(dm: &DensityMatrix, sc: &AnalyticScenario, part: &RingPartition) -> f64 {
    let radius = part.radius();
    let mut total = 0.0;
    for j in 0..part.len() {
        let (r1, r2) = part.ring(j);
        for (c, &sf) in dm.sf_set().iter().enumerate() {
            let share = dm.share(j, c);
            if share == 0.0 {
                continue;
            }
            let mass = adaptive_simpson(
                |z| {
                    if z > 0.0 {
                        2.0 * z * success_probability(sf, z, dm, sc, part)
                    } else {
                        0.0
                    }
                },
                r1,
                r2,
                sc.tolerance,
            );
            total += share * mass;
        }
    }
    total / (radius * radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Grid resolution: shares are multiples of `1 / grid`.
    pub grid: usize,
    pub max_sweeps: usize,
    /// Stop once a sweep improves the objective by less than this fraction.
    pub rel_improvement: f64,
    /// Gauss-Legendre nodes per ring used during the search.
    pub nodes_per_ring: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grid: 50,
            max_sweeps: 100,
            rel_improvement: 1e-6,
            nodes_per_ring: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub density: DensityMatrix,
    /// Objective of `density`, adaptive quadrature.
    pub objective: f64,
    pub sweeps: usize,
    /// False when the sweep budget ran out first.
    pub converged: bool,
    /// Search objective after the start point and after every sweep.
    pub history: Vec<f64>,
}

/// Maximizes [`objective`] over SF densities for the given SF set.
pub fn optimize_densities(
    sc: &AnalyticScenario,
    part: &RingPartition,
    sf_set: &[SpreadingFactor],
    settings: OptimizerSettings,
) -> Result<OptimizeOutcome> {
    optimize_densities_with(sc, part, sf_set, settings, |_| {})
}

/// [`optimize_densities`], calling `observe` with every iterate.
pub fn optimize_densities_with<F: FnMut(&DensityMatrix)>(
    sc: &AnalyticScenario,
    part: &RingPartition,
    sf_set: &[SpreadingFactor],
    settings: OptimizerSettings,
    mut observe: F,
) -> Result<OptimizeOutcome> {
    sc.validate()?;
    if sf_set.is_empty() {
        return Err(Error::EmptySet("spreading factor"));
    }
    if settings.grid == 0 || settings.nodes_per_ring == 0 {
        return Err(Error::InvalidParameter(
            "grid and nodes_per_ring must be >= 1".into(),
        ));
    }
    let cache = Cache::build(sc, part, sf_set, settings.nodes_per_ring);
    let rings = part.len();
    let ncols = sf_set.len();

    // start from the best single-SF-everywhere allocation
    let mut shares = vec![vec![0.0; ncols]; rings];
    let mut best_start = (f64::NEG_INFINITY, 0);
    for c in 0..ncols {
        for row in shares.iter_mut() {
            row.fill(0.0);
            row[c] = 1.0;
        }
        let v = cache.objective(&shares);
        if v > best_start.0 {
            best_start = (v, c);
        }
    }
    for row in shares.iter_mut() {
        row.fill(0.0);
        row[best_start.1] = 1.0;
    }
    let mut current = best_start.0;
    let mut history = vec![current];
    observe(&DensityMatrix::from_shares(
        sf_set.to_vec(),
        sc.lambda_total,
        &shares,
    )?);

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < settings.max_sweeps {
        sweeps += 1;
        let before = current;
        for j in 0..rings {
            if let Some((value, row)) = cache.best_response(&shares, j, settings.grid) {
                if value > current {
                    shares[j] = row;
                    current = value;
                }
            }
            observe(&DensityMatrix::from_shares(
                sf_set.to_vec(),
                sc.lambda_total,
                &shares,
            )?);
        }
        history.push(current);
        if current - before < settings.rel_improvement * before.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("density optimizer stopped after {sweeps} sweeps without converging");
    }
    let density = DensityMatrix::from_shares(sf_set.to_vec(), sc.lambda_total, &shares)?;
    let objective = objective(&density, sc, part);
    Ok(OptimizeOutcome {
        density,
        objective,
        sweeps,
        converged,
        history,
    })
}

/// Interference kernels and noise factors on fixed quadrature nodes.
struct Cache {
    rings: usize,
    nodes: usize,
    beta: f64,
    lambda: f64,
    airtime: Vec<f64>,
    /// Quadrature weight per (ring, node), including the width normalization.
    weights: Vec<f64>,
    /// `exp(-noise exponent)` per (column, ring, node).
    noise: Vec<f64>,
    /// Exponent per unit density, per (column, source ring, target ring, node).
    kernel: Vec<f64>,
}

impl Cache {
    fn build(
        sc: &AnalyticScenario,
        part: &RingPartition,
        sf_set: &[SpreadingFactor],
        nodes: usize,
    ) -> Self {
        let rings = part.len();
        let (x, w) = gauss_legendre(nodes);
        let mut z = Vec::with_capacity(rings * nodes);
        let mut weights = Vec::with_capacity(rings * nodes);
        for j in 0..rings {
            let (r1, r2) = part.ring(j);
            let half = 0.5 * (r2 - r1);
            let norm = if sc.normalize_width { r2 - r1 } else { 1.0 };
            for n in 0..nodes {
                z.push(r1 + half * (x[n] + 1.0));
                weights.push(w[n] * half / norm);
            }
        }
        let gamma_i = sc.phy.sir_threshold();
        let fourth = (sc.pathloss_exp - 4.0).abs() < 1e-12;
        let unit = DensityMatrix::uniform(sf_set.to_vec(), 1.0, rings).expect("uniform shares");
        let mut noise = Vec::with_capacity(sf_set.len() * rings * nodes);
        let mut kernel = Vec::with_capacity(sf_set.len() * rings * rings * nodes);
        for &sf in sf_set {
            noise.extend(z.iter().map(|&zz| (-noise_exponent(sf, zz, sc)).exp()));
            for src in 0..rings {
                let (r1, r2) = part.ring(src);
                for &zz in &z {
                    let area = if fourth {
                        q_closed_form(r2, zz, gamma_i).unwrap()
                            - q_closed_form(r1, zz, gamma_i).unwrap()
                    } else {
                        // density 1/|C| per column in `unit`
                        ring_exponent_quadrature(zz, sf, src, &unit, sc, part) * sf_set.len() as f64
                            / sc.activity(sf)
                    };
                    kernel.push(sc.activity(sf) * area);
                }
            }
        }
        Self {
            rings,
            nodes,
            beta: sc.beta,
            lambda: sc.lambda_total,
            airtime: airtime_terms(sf_set, sc),
            weights,
            noise,
            kernel,
        }
    }

    fn kernel_row(&self, c: usize, src: usize) -> &[f64] {
        let len = self.rings * self.nodes;
        let start = (c * self.rings + src) * len;
        &self.kernel[start..start + len]
    }

    fn noise_row(&self, c: usize) -> &[f64] {
        let len = self.rings * self.nodes;
        &self.noise[c * len..(c + 1) * len]
    }

    /// Interference exponent of column `c` at every node.
    fn column_exponent(&self, shares: &[Vec<f64>], c: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.rings * self.nodes];
        for (src, row) in shares.iter().enumerate() {
            let lam = row[c] * self.lambda;
            if lam == 0.0 {
                continue;
            }
            for (acc, k) in e.iter_mut().zip(self.kernel_row(c, src)) {
                *acc += lam * k;
            }
        }
        e
    }

    /// Contribution of column `c` given its exponent field and shares.
    fn column_value(&self, c: usize, exponent: &[f64], col_shares: &[f64]) -> f64 {
        let noise = self.noise_row(c);
        let mut total = 0.0;
        for (j, &share) in col_shares.iter().enumerate() {
            if share == 0.0 {
                continue;
            }
            let mut rel = 0.0;
            if self.beta < 1.0 {
                for n in j * self.nodes..(j + 1) * self.nodes {
                    rel += self.weights[n] * noise[n] * (-exponent[n]).exp();
                }
            }
            total += share * ((1.0 - self.beta) * rel + self.beta * self.airtime[c]);
        }
        total
    }

    fn objective(&self, shares: &[Vec<f64>]) -> f64 {
        (0..self.airtime.len())
            .map(|c| {
                let e = self.column_exponent(shares, c);
                let col: Vec<f64> = shares.iter().map(|r| r[c]).collect();
                self.column_value(c, &e, &col)
            })
            .sum()
    }

    /// Best grid point for ring `ring`'s shares with all other rings fixed.
    fn best_response(
        &self,
        shares: &[Vec<f64>],
        ring: usize,
        grid: usize,
    ) -> Option<(f64, Vec<f64>)> {
        let ncols = self.airtime.len();
        // value[c][k]: column c's contribution when ring `ring` puts k/grid on it
        let mut value = vec![vec![0.0; grid + 1]; ncols];
        for (c, vc) in value.iter_mut().enumerate() {
            let mut base = self.column_exponent(shares, c);
            let own = shares[ring][c] * self.lambda;
            let krow = self.kernel_row(c, ring);
            if own != 0.0 {
                for (b, k) in base.iter_mut().zip(krow) {
                    *b -= own * k;
                }
            }
            let mut col: Vec<f64> = shares.iter().map(|r| r[c]).collect();
            let mut field = base.clone();
            for (k, slot) in vc.iter_mut().enumerate() {
                let s = k as f64 / grid as f64;
                col[ring] = s;
                let lam = s * self.lambda;
                for ((f, b), kk) in field.iter_mut().zip(&base).zip(krow) {
                    *f = b + lam * kk;
                }
                *slot = self.column_value(c, &field, &col);
            }
        }
        // knapsack over columns: exactly `grid` units in total
        let neg = f64::NEG_INFINITY;
        let mut best = vec![neg; grid + 1];
        let mut choice = vec![vec![0usize; grid + 1]; ncols];
        for k in 0..=grid {
            best[k] = value[0][k];
            choice[0][k] = k;
        }
        for c in 1..ncols {
            let mut next = vec![neg; grid + 1];
            for total in 0..=grid {
                for k in 0..=total {
                    let v = best[total - k] + value[c][k];
                    if v > next[total] {
                        next[total] = v;
                        choice[c][total] = k;
                    }
                }
            }
            best = next;
        }
        if !best[grid].is_finite() {
            return None;
        }
        let mut row = vec![0.0; ncols];
        let mut left = grid;
        for c in (0..ncols).rev() {
            let k = choice[c][left];
            row[c] = k as f64 / grid as f64;
            left -= k;
        }
        Some((best[grid], row))
    }
}
