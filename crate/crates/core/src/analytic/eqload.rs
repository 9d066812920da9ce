use crate::phy::{data_rate, PhyParams, SpreadingFactor};

/// Rate-proportional SF assignment.
///
/// SF `c` gets `round(N * R(c) / sum R)` devices (then nudged by one until
/// the quotas sum to `N`); devices sorted by radius fill the lowest SF first.
/// Equal radii keep their input order. Returns one SF per input position.
pub fn eqload_allocate(
    positions: &[f64],
    sf_set: &[SpreadingFactor],
    phy: &PhyParams,
) -> Vec<SpreadingFactor> {
    if positions.is_empty() || sf_set.is_empty() {
        return Vec::new();
    }
    let mut sfs = sf_set.to_vec();
    sfs.sort();
    let quotas = quotas(positions.len(), &sfs, phy);

    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));

    let mut out = vec![sfs[0]; positions.len()];
    let mut slot = order.into_iter();
    for (sf, quota) in sfs.iter().zip(quotas) {
        for idx in slot.by_ref().take(quota) {
            out[idx] = *sf;
        }
    }
    out
}

fn quotas(n: usize, sfs: &[SpreadingFactor], phy: &PhyParams) -> Vec<usize> {
    let rates: Vec<f64> = sfs.iter().map(|&sf| data_rate(sf, phy)).collect();
    let total: f64 = rates.iter().sum();
    let exact: Vec<f64> = rates.iter().map(|r| n as f64 * r / total).collect();
    let mut q: Vec<usize> = exact.iter().map(|e| e.round() as usize).collect();
    loop {
        let sum: usize = q.iter().sum();
        if sum == n {
            break;
        }
        if sum < n {
            // largest shortfall first; ties go to the lower SF
            let (c, _) = exact
                .iter()
                .zip(&q)
                .enumerate()
                .map(|(c, (e, &qc))| (c, e - qc as f64))
                .fold((0, f64::NEG_INFINITY), |b, x| if x.1 > b.1 { x } else { b });
            q[c] += 1;
        } else {
            let (c, _) = exact
                .iter()
                .zip(&q)
                .enumerate()
                .filter(|(_, (_, &qc))| qc > 0)
                .map(|(c, (e, &qc))| (c, e - qc as f64))
                .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
            q[c] -= 1;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sf7_share_for_ten_thousand_devices() {
        let phy = PhyParams::default();
        let all = SpreadingFactor::all();
        let positions: Vec<f64> = (0..10_000).map(|i| i as f64 * 0.2).collect();
        let out = eqload_allocate(&positions, &all, &phy);
        let sf7 = out.iter().filter(|s| s.value() == 7).count();
        // independent sum of c * 1e5 / 2^c for c = 7..12
        let rates: Vec<f64> = (7..=12).map(|c| c as f64 * 1e5 / 2f64.powi(c)).collect();
        let expect = 10_000.0 * rates[0] / rates.iter().sum::<f64>();
        assert!((sf7 as f64 - expect).abs() <= 1.0, "{sf7} vs {expect}");
        assert!((sf7 as f64 / 10_000.0 - 0.4498).abs() < 1e-3);
        // nearest devices get the lowest SF: assignment is non-decreasing in radius
        assert!(out.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_device_gets_sf7() {
        let out = eqload_allocate(&[500.0], &SpreadingFactor::all(), &PhyParams::default());
        assert_eq!(out[0].value(), 7);
    }

    #[test]
    fn equal_radii_keep_input_order() {
        let positions = vec![100.0; 10];
        let out = eqload_allocate(&positions, &SpreadingFactor::all(), &PhyParams::default());
        assert!(out.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(out[0].value(), 7);
    }

    #[test]
    fn quotas_sum_to_n() {
        let phy = PhyParams::default();
        let all = SpreadingFactor::all();
        for n in 1..200 {
            assert_eq!(quotas(n, &all, &phy).iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn unsorted_positions_are_mapped_back() {
        let phy = PhyParams::default();
        let sfs = vec![
            SpreadingFactor::new(7).unwrap(),
            SpreadingFactor::new(12).unwrap(),
        ];
        // SF7 rate dominates: 5468.75 vs 292.97 -> 19 of 20 devices on SF7
        let positions: Vec<f64> = (0..20).rev().map(|i| i as f64).collect();
        let out = eqload_allocate(&positions, &sfs, &phy);
        assert_eq!(out[0].value(), 12);
        assert!(out[1..].iter().all(|s| s.value() == 7));
    }
}
