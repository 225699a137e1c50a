//! Deterministic synthetic-bundle generator.
//!
//! The latent target follows a fixed linear law on standardized features so
//! the full pipeline can be checked end-to-end against a known ground truth.
//! Raw replacement costs are back-derived through exp and the HPI factor, so
//! running the real feature pipeline over the generated CSVs reconstructs the
//! latent log-loss exactly when `noise_sigma` is 0.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spatial::assign_nearest_storm;
use crate::types::{
    saffir_simpson_category, BuildingAggregates, GeoPoint, HpiSeries, HurricaneRecord,
    HydroCounts, LossRecord, Month, Seed, ZctaRecord, HPI_BASELINE,
};

use super::DatasetBundle;

/// Generative law: log_loss = intercept + coef·standardized feature + noise.
pub const SYN_INTERCEPT: f64 = 10.0;
pub const SYN_COEF_WIND: f64 = 1.5;
pub const SYN_COEF_ELEVATED: f64 = 1.0;
pub const SYN_COEF_ELEV_DIFF: f64 = -0.8;
pub const SYN_COEF_DAMS: f64 = 0.5;

/// Florida-like bounding box for centroids and storm positions.
pub const SYN_LAT_RANGE: (f64, f64) = (24.5, 31.0);
pub const SYN_LON_RANGE: (f64, f64) = (-87.6, -80.0);

pub const SYN_OCCUPANCY_LABELS: [&str; 3] = ["commercial", "mobile_home", "residential"];

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub n_zctas: usize,
    pub n_storms: usize,
    pub noise_sigma: f64,
}

fn standardized(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    values
        .iter()
        .map(|v| if std > 0.0 { (v - mean) / std } else { 0.0 })
        .collect()
}

/// Box-Muller standard normal; deterministic given the RNG stream.
fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn generate_synthetic(
    seed: Seed,
    n_zctas: usize,
    n_storms: usize,
    noise_sigma: f64,
) -> Result<DatasetBundle> {
    if n_zctas < 1 || n_zctas > 100_000 {
        return Err(Error::invalid("n_zctas", "must be in 1..=100000"));
    }
    if n_storms < 1 {
        return Err(Error::invalid("n_storms", "must be >= 1"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::invalid("noise_sigma", "must be >= 0"));
    }

    let mut zcta_rng = ChaCha8Rng::seed_from_u64(crate::types::derive_seed(seed, "zcta", 0).0);
    let zctas: Vec<ZctaRecord> = (0..n_zctas)
        .map(|i| {
            let lat = zcta_rng.gen_range(SYN_LAT_RANGE.0..SYN_LAT_RANGE.1);
            let lon = zcta_rng.gen_range(SYN_LON_RANGE.0..SYN_LON_RANGE.1);
            ZctaRecord::new(format!("{i:05}"), GeoPoint::new(lat, lon).unwrap()).unwrap()
        })
        .collect();

    let mut storm_rng = ChaCha8Rng::seed_from_u64(crate::types::derive_seed(seed, "storm", 0).0);
    let base_date = NaiveDate::from_ymd_opt(2022, 6, 1).unwrap();
    let storms: Vec<HurricaneRecord> = (0..n_storms)
        .map(|i| {
            let lat = storm_rng.gen_range(SYN_LAT_RANGE.0..SYN_LAT_RANGE.1);
            let lon = storm_rng.gen_range(SYN_LON_RANGE.0..SYN_LON_RANGE.1);
            let max_wind = storm_rng.gen_range(35.0..150.0_f64).round();
            let min_pressure =
                (1010.0 - 0.5 * max_wind + storm_rng.gen_range(-5.0..5.0)).round();
            let observed_at = (base_date + chrono::Days::new(i as u64))
                .and_hms_opt(12, 0, 0)
                .unwrap();
            HurricaneRecord::new(
                format!("SYN{i:04}"),
                format!("STORM{i:04}"),
                observed_at,
                GeoPoint::new(lat, lon).unwrap(),
                max_wind,
                saffir_simpson_category(max_wind),
                min_pressure,
            )
            .unwrap()
        })
        .collect();

    let mut hydro_rng = ChaCha8Rng::seed_from_u64(crate::types::derive_seed(seed, "hydro", 0).0);
    let hydro: Vec<HydroCounts> = zctas
        .iter()
        .map(|z| {
            HydroCounts::new(
                z.zcta_id.clone(),
                hydro_rng.gen_range(0..=8),
                hydro_rng.gen_range(0..=5),
                hydro_rng.gen_range(0..=4),
                hydro_rng.gen_range(0..=3),
            )
            .unwrap()
        })
        .collect();

    let mut bld_rng = ChaCha8Rng::seed_from_u64(crate::types::derive_seed(seed, "building", 0).0);
    let buildings: Vec<BuildingAggregates> = zctas
        .iter()
        .map(|z| {
            let occupancy = SYN_OCCUPANCY_LABELS[bld_rng.gen_range(0..SYN_OCCUPANCY_LABELS.len())];
            BuildingAggregates::new(
                z.zcta_id.clone(),
                Some((bld_rng.gen_range(5.0..80.0_f64) * 10.0).round() / 10.0),
                Some((bld_rng.gen_range(1.0..4.0_f64) * 10.0).round() / 10.0),
                Some((bld_rng.gen_range(-5.0..15.0_f64) * 10.0).round() / 10.0),
                Some((bld_rng.gen_range(0.0..50.0_f64) * 10.0).round() / 10.0),
                occupancy,
            )
            .unwrap()
        })
        .collect();

    // Monthly index rising linearly to the January 2025 baseline.
    let mut entries = Vec::new();
    let (first_y, last_y) = (2019, 2025);
    let total = ((last_y - first_y) * 12) as f64; // 2019-01 .. 2025-01 inclusive
    let mut i = 0.0;
    for year in first_y..=last_y {
        for month in 1..=12 {
            if year == last_y && month > 1 {
                break;
            }
            let value = if year == last_y {
                HPI_BASELINE
            } else {
                600.0 + (HPI_BASELINE - 600.0) * i / total
            };
            entries.push((Month::new(year, month)?, (value * 100.0).round() / 100.0));
            i += 1.0;
        }
    }
    let hpi = HpiSeries::with_default_baseline(entries)?;

    // Latent target on standardized features.
    let storm_features = assign_nearest_storm(&zctas, &storms)?;
    let wind: Vec<f64> = zctas
        .iter()
        .map(|z| storm_features[&z.zcta_id].max_wind)
        .collect();
    let elevated: Vec<f64> = buildings
        .iter()
        .map(|b| b.avg_elevated_buildings.unwrap())
        .collect();
    let elev_diff: Vec<f64> = buildings
        .iter()
        .map(|b| b.avg_elevation_diff.unwrap())
        .collect();
    let dams: Vec<f64> = hydro.iter().map(|h| f64::from(h.dams)).collect();
    let (w, e, d, m) = (
        standardized(&wind),
        standardized(&elevated),
        standardized(&elev_diff),
        standardized(&dams),
    );

    let mut noise_rng = ChaCha8Rng::seed_from_u64(crate::types::derive_seed(seed, "noise", 0).0);
    let mut loss_rng = ChaCha8Rng::seed_from_u64(crate::types::derive_seed(seed, "loss", 0).0);
    let losses: Vec<LossRecord> = zctas
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let eps = if noise_sigma > 0.0 {
                noise_sigma * sample_normal(&mut noise_rng)
            } else {
                0.0
            };
            let log_loss = SYN_INTERCEPT
                + SYN_COEF_WIND * w[i]
                + SYN_COEF_ELEVATED * e[i]
                + SYN_COEF_ELEV_DIFF * d[i]
                + SYN_COEF_DAMS * m[i]
                + eps;
            let adjusted_total = log_loss.exp_m1().max(0.0);
            let year = loss_rng.gen_range(2020..=2024);
            let month = loss_rng.gen_range(1..=12);
            let day = loss_rng.gen_range(1..=28);
            let date = NaiveDate::from_ymd_opt(year, month, day).unwrap();
            let factor = hpi.value_for(Month::of_date(date)).unwrap() / hpi.baseline_value();
            let raw_total = adjusted_total * factor;
            let building = 0.6 * raw_total;
            let contents = raw_total - building;
            LossRecord::new(z.zcta_id.clone(), date, building, contents).unwrap()
        })
        .collect();

    Ok(DatasetBundle {
        zctas,
        storms,
        hydro,
        buildings,
        losses,
        hpi,
    })
}
