//! Shared domain types used by every other module.
//!
//! All types here are plain immutable values; constructors validate their
//! invariants and report the offending field on failure.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the sphere, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::invalid("lat", format!("{lat} not in [-90, 90]")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid("lon", format!("{lon} not in [-180, 180]")));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// ZIP Code Tabulation Area identified by its 5-digit code, located at its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZctaRecord {
    pub zcta_id: String,
    pub centroid: GeoPoint,
}

impl ZctaRecord {
    pub fn new(zcta_id: impl Into<String>, centroid: GeoPoint) -> Result<Self> {
        let zcta_id = zcta_id.into();
        validate_zcta_id(&zcta_id)?;
        Ok(ZctaRecord { zcta_id, centroid })
    }
}

pub fn validate_zcta_id(id: &str) -> Result<()> {
    if id.len() == 5 && id.bytes().all(|b| b.is_ascii_digit()) {
        Ok(())
    } else {
        Err(Error::invalid(
            "zcta_id",
            format!("{id:?} is not exactly five decimal digits"),
        ))
    }
}

/// One track fix of a storm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurricaneRecord {
    pub storm_id: String,
    pub name: String,
    pub observed_at: NaiveDateTime,
    pub position: GeoPoint,
    pub max_wind: f64,
    pub category: u8,
    pub min_pressure: f64,
}

impl HurricaneRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        storm_id: impl Into<String>,
        name: impl Into<String>,
        observed_at: NaiveDateTime,
        position: GeoPoint,
        max_wind: f64,
        category: u8,
        min_pressure: f64,
    ) -> Result<Self> {
        if !max_wind.is_finite() || max_wind < 0.0 {
            return Err(Error::invalid("max_wind", format!("{max_wind} < 0")));
        }
        if category > 5 {
            return Err(Error::invalid("category", "category out of range"));
        }
        if !min_pressure.is_finite() || min_pressure <= 800.0 || min_pressure >= 1100.0 {
            return Err(Error::invalid(
                "min_pressure",
                format!("{min_pressure} not in (800, 1100)"),
            ));
        }
        Ok(HurricaneRecord {
            storm_id: storm_id.into(),
            name: name.into(),
            observed_at,
            position,
            max_wind,
            category,
            min_pressure,
        })
    }

    /// Saffir–Simpson consistency is a warn-level check: real track data
    /// contains transitional fixes that disagree with the recorded category.
    pub fn category_warning(&self) -> Option<String> {
        let expected = saffir_simpson_category(self.max_wind);
        if expected != self.category {
            Some(format!(
                "storm {} at {}: category {} inconsistent with {} kt (expected {})",
                self.storm_id, self.observed_at, self.category, self.max_wind, expected
            ))
        } else {
            None
        }
    }
}

/// Saffir–Simpson category from sustained wind in knots; 0 for sub-hurricane winds.
pub fn saffir_simpson_category(max_wind_kt: f64) -> u8 {
    match max_wind_kt {
        w if w >= 137.0 => 5,
        w if w >= 113.0 => 4,
        w if w >= 96.0 => 3,
        w if w >= 83.0 => 2,
        w if w >= 64.0 => 1,
        _ => 0,
    }
}

/// Per-ZCTA counts of water-related infrastructure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroCounts {
    pub zcta_id: String,
    pub dams: u32,
    pub outlets: u32,
    pub stations: u32,
    pub streamgages: u32,
}

impl HydroCounts {
    pub fn new(
        zcta_id: impl Into<String>,
        dams: u32,
        outlets: u32,
        stations: u32,
        streamgages: u32,
    ) -> Result<Self> {
        let zcta_id = zcta_id.into();
        validate_zcta_id(&zcta_id)?;
        Ok(HydroCounts {
            zcta_id,
            dams,
            outlets,
            stations,
            streamgages,
        })
    }
}

/// Per-ZCTA built-environment aggregates. Numeric fields are optional because
/// source extracts carry gaps that are later filled by nearest-ZCTA imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingAggregates {
    pub zcta_id: String,
    pub avg_building_age: Option<f64>,
    pub avg_floors: Option<f64>,
    pub avg_elevation_diff: Option<f64>,
    pub avg_elevated_buildings: Option<f64>,
    pub occupancy_type: String,
}

impl BuildingAggregates {
    pub fn new(
        zcta_id: impl Into<String>,
        avg_building_age: Option<f64>,
        avg_floors: Option<f64>,
        avg_elevation_diff: Option<f64>,
        avg_elevated_buildings: Option<f64>,
        occupancy_type: impl Into<String>,
    ) -> Result<Self> {
        let zcta_id = zcta_id.into();
        validate_zcta_id(&zcta_id)?;
        check_opt_nonneg("avg_building_age", avg_building_age)?;
        check_opt_nonneg("avg_floors", avg_floors)?;
        check_opt_finite("avg_elevation_diff", avg_elevation_diff)?;
        check_opt_nonneg("avg_elevated_buildings", avg_elevated_buildings)?;
        Ok(BuildingAggregates {
            zcta_id,
            avg_building_age,
            avg_floors,
            avg_elevation_diff,
            avg_elevated_buildings,
            occupancy_type: occupancy_type.into(),
        })
    }
}

fn check_opt_finite(field: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !x.is_finite() => Err(Error::invalid(field, format!("{x} not finite"))),
        _ => Ok(()),
    }
}

fn check_opt_nonneg(field: &str, v: Option<f64>) -> Result<()> {
    check_opt_finite(field, v)?;
    match v {
        Some(x) if x < 0.0 => Err(Error::invalid(field, format!("{x} < 0"))),
        _ => Ok(()),
    }
}

/// One insurer-reported loss: building plus contents replacement cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub zcta_id: String,
    pub loss_date: NaiveDate,
    pub building_cost: f64,
    pub contents_cost: f64,
}

impl LossRecord {
    pub fn new(
        zcta_id: impl Into<String>,
        loss_date: NaiveDate,
        building_cost: f64,
        contents_cost: f64,
    ) -> Result<Self> {
        let zcta_id = zcta_id.into();
        validate_zcta_id(&zcta_id)?;
        if !building_cost.is_finite() || building_cost < 0.0 {
            return Err(Error::invalid(
                "building_cost",
                format!("{building_cost} must be finite and >= 0"),
            ));
        }
        if !contents_cost.is_finite() || contents_cost < 0.0 {
            return Err(Error::invalid(
                "contents_cost",
                format!("{contents_cost} must be finite and >= 0"),
            ));
        }
        Ok(LossRecord {
            zcta_id,
            loss_date,
            building_cost,
            contents_cost,
        })
    }

    pub fn total_cost(&self) -> f64 {
        self.building_cost + self.contents_cost
    }
}

/// Calendar month key, ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid("month", format!("{month} not in 1..=12")));
        }
        Ok(Month { year, month })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid("month", format!("{s:?} is not YYYY-MM")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::invalid("month", format!("{s:?} is not YYYY-MM")))?;
        let month: u32 = m
            .parse()
            .map_err(|_| Error::invalid("month", format!("{s:?} is not YYYY-MM")))?;
        Month::new(year, month)
    }

    pub fn of_date(d: NaiveDate) -> Self {
        use chrono::Datelike;
        Month {
            year: d.year(),
            month: d.month(),
        }
    }
}

impl std::fmt::Display for Month {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// FLSTHPI baseline: the index value at January 2025.
pub const HPI_BASELINE: f64 = 820.29;

/// Monthly house-price index, strictly increasing months, positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpiSeries {
    entries: Vec<(Month, f64)>,
    baseline_value: f64,
}

impl HpiSeries {
    pub fn new(entries: Vec<(Month, f64)>, baseline_value: f64) -> Result<Self> {
        if baseline_value <= 0.0 || !baseline_value.is_finite() {
            return Err(Error::invalid(
                "baseline_value",
                format!("{baseline_value} must be > 0"),
            ));
        }
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("months", "months not strictly increasing"));
            }
        }
        for &(m, v) in &entries {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::invalid("value", format!("{v} at {m} must be > 0")));
            }
        }
        Ok(HpiSeries {
            entries,
            baseline_value,
        })
    }

    pub fn with_default_baseline(entries: Vec<(Month, f64)>) -> Result<Self> {
        HpiSeries::new(entries, HPI_BASELINE)
    }

    pub fn entries(&self) -> &[(Month, f64)] {
        &self.entries
    }

    pub fn baseline_value(&self) -> f64 {
        self.baseline_value
    }

    /// Index value for a month: the exact month if present, otherwise the
    /// nearest preceding month. Months before the series start are an error.
    pub fn value_for(&self, month: Month) -> Result<f64> {
        match self.entries.partition_point(|&(m, _)| m <= month) {
            0 => Err(Error::DateBeforeHpi(month.to_string())),
            i => Ok(self.entries[i - 1].1),
        }
    }
}

/// Dense feature matrix with named columns, aligned target, and row ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    target: Vec<f64>,
    row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        column_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        target: Vec<f64>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for name in &column_names {
            if !seen.insert(name) {
                return Err(Error::invalid(
                    "column_names",
                    format!("duplicate column {name:?}"),
                ));
            }
        }
        if rows.len() != target.len() || rows.len() != row_ids.len() {
            return Err(Error::invalid(
                "rows",
                format!(
                    "row counts differ: rows {}, target {}, row_ids {}",
                    rows.len(),
                    target.len(),
                    row_ids.len()
                ),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != column_names.len() {
                return Err(Error::invalid(
                    "rows",
                    format!("row {i} has {} cells, expected {}", row.len(), column_names.len()),
                ));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid("rows", format!("row {i} contains {v}")));
            }
        }
        if let Some((i, v)) = target.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid("target", format!("target[{i}] = {v}")));
        }
        Ok(FeatureMatrix {
            column_names,
            rows,
            target,
            row_ids,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }
}

/// Master seed for all randomness in the pipeline. Sub-seeds are derived as a
/// pure function of (master, label, index) so no global RNG state exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic, collision-resistant sub-seed derivation.
pub fn derive_seed(master: Seed, label: &str, index: u64) -> Seed {
    let mut h = mix(master.0);
    for b in label.bytes() {
        h = mix(h.rotate_left(8) ^ u64::from(b));
    }
    Seed(mix(h ^ index))
}
