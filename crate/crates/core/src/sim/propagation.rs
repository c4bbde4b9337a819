//! Okumura-Hata path loss and derived RSRP/RSRQ values.
//!
//! Medium-city form of the model:
//!
//! ```text
//! a(hm) = (1.1 log10 f - 0.7) hm - (1.56 log10 f - 0.8)
//! L     = 69.55 + 26.16 log10 f - 13.82 log10 hb - a(hm)
//!         + (44.9 - 6.55 log10 hb) log10 d
//! ```
//!
//! with `f` in MHz, heights in meters and `d` in kilometers. The nominal
//! validity is 150-1500 MHz, base heights 30-200 m and 1-20 km; the
//! simulator deliberately evaluates the formula below those height/distance
//! floors (25 m masts, sub-kilometer ranges), which is a documented
//! extrapolation rather than an error.

use crate::scalar::Scalar;

use super::{CellSite, PropagationParams, SimError, UeState};

/// Okumura-Hata path loss in dB for a medium-sized city.
pub fn okumura_hata_loss<F: Scalar>(
    carrier_mhz: F,
    base_height_m: F,
    mobile_height_m: F,
    distance_km: F,
) -> Result<F, SimError> {
    let c = F::from_f64_lossy;
    if distance_km <= F::zero() {
        return Err(SimError::Domain(format!(
            "distance must be positive, got {distance_km} km"
        )));
    }
    if carrier_mhz < c(150.0) || carrier_mhz > c(1500.0) {
        return Err(SimError::Domain(format!(
            "carrier {carrier_mhz} MHz outside 150-1500 MHz"
        )));
    }
    if base_height_m <= F::zero() || mobile_height_m <= F::zero() {
        return Err(SimError::Domain("antenna heights must be positive".into()));
    }

    let log_f = carrier_mhz.log10();
    let log_hb = base_height_m.log10();
    let mobile_correction =
        (c(1.1) * log_f - c(0.7)) * mobile_height_m - (c(1.56) * log_f - c(0.8));
    Ok(c(69.55) + c(26.16) * log_f - c(13.82) * log_hb - mobile_correction
        + (c(44.9) - c(6.55) * log_hb) * distance_km.log10())
}

/// Median received power in dBm for one cell at the phone's position.
/// The ground distance is clamped to `min_ground_distance_m`.
pub fn rsrp_of(cell: &CellSite, ue: &UeState, prop: &PropagationParams) -> f64 {
    let distance_m = cell
        .position
        .distance(&ue.position)
        .max(prop.min_ground_distance_m);
    let loss = okumura_hata_loss(
        prop.carrier_mhz,
        cell.height_m,
        ue.height_m,
        distance_m / 1000.0,
    )
    .expect("validated propagation parameters");
    cell.tx_power_dbm - loss
}

pub(crate) fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub(crate) fn mw_to_db(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// 3GPP-style RSRQ: `10 log10(N * rsrp / rssi)` where RSSI sums the linear
/// received power of every transmitting cell plus the noise floor.
pub fn rsrq_of(
    cell: &CellSite,
    ue: &UeState,
    all_cells: &[CellSite],
    prop: &PropagationParams,
) -> f64 {
    let rsrp_lin = dbm_to_mw(rsrp_of(cell, ue, prop));
    let rssi_lin: f64 = all_cells
        .iter()
        .map(|c| dbm_to_mw(rsrp_of(c, ue, prop)))
        .sum::<f64>()
        + dbm_to_mw(prop.noise_floor_dbm);
    mw_to_db(prop.rsrq_bandwidth_blocks as f64 * rsrp_lin / rssi_lin)
}

/// RSRQ computed from already measured per-cell RSRP values. Used by the
/// scenario loop so that one measurement snapshot feeds both handover and
/// report emission.
pub(crate) fn rsrq_from_measurements(
    rsrp_dbm: f64,
    all_rsrp_dbm: &[f64],
    prop: &PropagationParams,
) -> f64 {
    let rssi_lin: f64 =
        all_rsrp_dbm.iter().map(|&v| dbm_to_mw(v)).sum::<f64>() + dbm_to_mw(prop.noise_floor_dbm);
    mw_to_db(prop.rsrq_bandwidth_blocks as f64 * dbm_to_mw(rsrp_dbm) / rssi_lin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Pci, Position};

    /// Literal transcription of the published medium-city formula, kept
    /// independent of the implementation above.
    fn hand_loss(f_mhz: f64, hb: f64, hm: f64, d_km: f64) -> f64 {
        let a_hm = (1.1 * f_mhz.log10() - 0.7) * hm - (1.56 * f_mhz.log10() - 0.8);
        69.55 + 26.16 * f_mhz.log10() - 13.82 * hb.log10() - a_hm
            + (44.9 - 6.55 * hb.log10()) * d_km.log10()
    }

    fn cell_at(x: f64, y: f64) -> CellSite {
        CellSite {
            pci: Pci(1),
            position: Position::new(x, y),
            height_m: 25.0,
            tx_power_dbm: 30.0,
            can_serve: true,
        }
    }

    fn ue_at(x: f64, y: f64) -> UeState {
        UeState {
            ue_id: 0,
            position: Position::new(x, y),
            height_m: 1.5,
            heading: 0.0,
            serving_pci: None,
        }
    }

    #[test]
    fn loss_matches_hand_evaluation_at_reference_point() {
        let loss = okumura_hata_loss(900.0, 25.0, 1.5, 1.0).unwrap();
        assert!((loss - hand_loss(900.0, 25.0, 1.5, 1.0)).abs() < 0.01);
        // Frozen from the hand evaluation.
        assert!((loss - 127.49757130103562).abs() < 1e-9, "loss = {loss}");
    }

    #[test]
    fn loss_is_strictly_increasing_in_distance() {
        let l1 = okumura_hata_loss(900.0, 25.0, 1.5, 1.0).unwrap();
        let l2 = okumura_hata_loss(900.0, 25.0, 1.5, 2.0).unwrap();
        assert!(l2 > l1);
    }

    #[test]
    fn two_decades_of_distance_match_the_closed_form() {
        let near = okumura_hata_loss(900.0, 25.0, 1.5, 0.1).unwrap();
        let far = okumura_hata_loss(900.0, 25.0, 1.5, 10.0).unwrap();
        let expected = (44.9 - 6.55 * 25f64.log10()) * 2.0;
        assert!(((far - near) - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn non_positive_distance_is_a_domain_error() {
        assert!(okumura_hata_loss(900.0, 25.0, 1.5, 0.0).is_err());
        assert!(okumura_hata_loss(900.0, 25.0, 1.5, -1.0).is_err());
    }

    #[test]
    fn out_of_band_carrier_is_a_domain_error() {
        assert!(okumura_hata_loss(100.0, 25.0, 1.5, 1.0).is_err());
        assert!(okumura_hata_loss(2600.0, 25.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn f32_and_f64_agree_at_reference_point() {
        let l32 = okumura_hata_loss(900.0f32, 25.0, 1.5, 1.0).unwrap();
        let l64 = okumura_hata_loss(900.0f64, 25.0, 1.5, 1.0).unwrap();
        assert!((l32 as f64 - l64).abs() < 1e-3);
    }

    #[test]
    fn rsrp_is_tx_power_minus_loss() {
        let prop = PropagationParams::default();
        let cell = cell_at(0.0, 0.0);
        let ue = ue_at(1000.0, 0.0);
        let expected = 30.0 - hand_loss(900.0, 25.0, 1.5, 1.0);
        assert!((rsrp_of(&cell, &ue, &prop) - expected).abs() < 1e-9);
        assert!((expected - (-97.5)).abs() < 0.01);
    }

    #[test]
    fn rsrp_is_deterministic_and_radially_decreasing() {
        let prop = PropagationParams::default();
        let cell = cell_at(0.0, 0.0);
        let ue = ue_at(400.0, 300.0);
        assert_eq!(rsrp_of(&cell, &ue, &prop), rsrp_of(&cell, &ue, &prop));

        let mut prev = f64::INFINITY;
        for step in 1..40 {
            let r = 25.0 * step as f64;
            let rsrp = rsrp_of(&cell, &ue_at(r, 0.0), &prop);
            assert!(rsrp < prev, "rsrp not decreasing at {r} m");
            prev = rsrp;
        }
    }

    #[test]
    fn zero_ground_distance_is_clamped() {
        let prop = PropagationParams::default();
        let cell = cell_at(100.0, 100.0);
        let ue = ue_at(100.0, 100.0);
        let at_clamp = rsrp_of(&cell, &ue_at(100.0 + prop.min_ground_distance_m, 100.0), &prop);
        assert_eq!(rsrp_of(&cell, &ue, &prop), at_clamp);
    }

    #[test]
    fn rsrq_of_single_cell_approaches_bandwidth_gain() {
        let mut prop = PropagationParams::default();
        prop.noise_floor_dbm = -300.0; // negligible
        let cell = cell_at(0.0, 0.0);
        let ue = ue_at(500.0, 0.0);
        let cells = vec![cell.clone()];
        let expected = 10.0 * (prop.rsrq_bandwidth_blocks as f64).log10();
        assert!((rsrq_of(&cell, &ue, &cells, &prop) - expected).abs() < 1e-6);
    }

    #[test]
    fn rsrq_of_two_equal_cells_is_halved_share() {
        let mut prop = PropagationParams::default();
        prop.noise_floor_dbm = -300.0;
        let a = cell_at(0.0, 0.0);
        let b = CellSite {
            pci: Pci(2),
            ..cell_at(1000.0, 0.0)
        };
        let ue = ue_at(500.0, 0.0); // equidistant
        let cells = vec![a.clone(), b];
        let expected = 10.0 * (prop.rsrq_bandwidth_blocks as f64 / 2.0).log10();
        assert!((rsrq_of(&a, &ue, &cells, &prop) - expected).abs() < 1e-6);
    }

    #[test]
    fn an_interferer_strictly_lowers_rsrq() {
        let prop = PropagationParams::default();
        let a = cell_at(0.0, 0.0);
        let b = CellSite {
            pci: Pci(2),
            ..cell_at(800.0, 0.0)
        };
        let ue = ue_at(400.0, 0.0);
        let alone = rsrq_of(&a, &ue, &[a.clone()], &prop);
        let with_b = rsrq_of(&a, &ue, &[a.clone(), b], &prop);
        assert!(with_b < alone);
    }
}
