//! CSV ingestion for the five data sources plus ZCTA centroids, and the
//! deterministic synthetic-bundle generator used for desk-scale testing.
//!
//! Parsers reject individual bad rows (counted in the report) and fail hard
//! only on schema-level problems such as a malformed header.

mod synthetic;

pub use synthetic::{
    generate_synthetic, SyntheticParams, SYN_COEF_DAMS, SYN_COEF_ELEVATED, SYN_COEF_ELEV_DIFF,
    SYN_COEF_WIND, SYN_INTERCEPT, SYN_LAT_RANGE, SYN_LON_RANGE,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    BuildingAggregates, GeoPoint, HpiSeries, HurricaneRecord, HydroCounts, LossRecord, Month,
    ZctaRecord,
};

/// The five aligned raw tables plus ZCTA centroids, pre-fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub zctas: Vec<ZctaRecord>,
    pub storms: Vec<HurricaneRecord>,
    pub hydro: Vec<HydroCounts>,
    pub buildings: Vec<BuildingAggregates>,
    pub losses: Vec<LossRecord>,
    pub hpi: HpiSeries,
}

/// Per-source ingest accounting. accepted + rejected always equals total.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SourceReport {
    pub name: String,
    pub total_rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub reject_reasons: Vec<String>,
    pub missing_per_column: BTreeMap<String, usize>,
}

impl SourceReport {
    fn new(name: &str) -> Self {
        SourceReport {
            name: name.to_string(),
            ..Default::default()
        }
    }

    fn accept(&mut self) {
        self.total_rows += 1;
        self.accepted += 1;
    }

    fn reject(&mut self, row: usize, reason: impl Into<String>) {
        self.total_rows += 1;
        self.rejected += 1;
        self.reject_reasons.push(format!("row {}: {}", row, reason.into()));
    }

    fn note_missing(&mut self, column: &str) {
        *self.missing_per_column.entry(column.to_string()).or_insert(0) += 1;
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub sources: Vec<SourceReport>,
    pub unmatched_zctas: Vec<String>,
    pub category_warnings: Vec<String>,
}

impl IngestReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sources {
            out.push_str(&format!(
                "{}: {} rows, {} accepted, {} rejected\n",
                s.name, s.total_rows, s.accepted, s.rejected
            ));
            for r in &s.reject_reasons {
                out.push_str(&format!("  rejected {r}\n"));
            }
            for (col, n) in &s.missing_per_column {
                out.push_str(&format!("  {n} missing values in {col}\n"));
            }
        }
        if !self.unmatched_zctas.is_empty() {
            out.push_str(&format!("unmatched ZCTAs: {:?}\n", self.unmatched_zctas));
        }
        if !self.category_warnings.is_empty() {
            out.push_str(&format!(
                "{} Saffir-Simpson consistency warnings\n",
                self.category_warnings.len()
            ));
        }
        out
    }
}

fn check_header(name: &str, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().collect();
    if got == expected {
        return Ok(());
    }
    let missing: Vec<String> = expected
        .iter()
        .filter(|c| !got.contains(*c))
        .map(|c| c.to_string())
        .collect();
    Err(Error::Schema {
        source_name: name.to_string(),
        missing: if missing.is_empty() {
            vec![format!("header order mismatch, expected {expected:?}")]
        } else {
            missing
        },
    })
}

fn reader_from(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().flexible(true).from_reader(input)
}

fn parse_f64(field: &str, s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("{field}: cannot parse {s:?} as number"))
}

fn parse_u32(field: &str, s: &str) -> std::result::Result<u32, String> {
    s.trim()
        .parse::<u32>()
        .map_err(|_| format!("{field}: cannot parse {s:?} as non-negative integer"))
}

pub const STORM_COLUMNS: [&str; 8] = [
    "storm_id",
    "name",
    "observed_at",
    "lat",
    "lon",
    "max_wind_kt",
    "category",
    "min_pressure_mb",
];

pub fn parse_storms(input: impl Read) -> Result<(Vec<HurricaneRecord>, SourceReport)> {
    let mut rdr = reader_from(input);
    check_header("storms.csv", rdr.headers()?, &STORM_COLUMNS)?;
    let mut report = SourceReport::new("storms.csv");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2; // 1-based, after header
        let rec = rec?;
        match storm_from_record(&rec) {
            Ok(r) => {
                out.push(r);
                report.accept();
            }
            Err(reason) => report.reject(row, reason),
        }
    }
    Ok((out, report))
}

fn storm_from_record(rec: &csv::StringRecord) -> std::result::Result<HurricaneRecord, String> {
    if rec.len() != STORM_COLUMNS.len() {
        return Err(format!("expected {} cells, got {}", STORM_COLUMNS.len(), rec.len()));
    }
    let observed_at = NaiveDateTime::parse_from_str(&rec[2], "%Y-%m-%dT%H:%M:%SZ")
        .or_else(|_| NaiveDateTime::parse_from_str(&rec[2], "%Y-%m-%dT%H:%M:%S"))
        .map_err(|_| format!("observed_at: {:?} is not ISO-8601", &rec[2]))?;
    let lat = parse_f64("lat", &rec[3])?;
    let lon = parse_f64("lon", &rec[4])?;
    let position = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
    let max_wind = parse_f64("max_wind_kt", &rec[5])?;
    let category: u8 = rec[6]
        .trim()
        .parse()
        .map_err(|_| "category out of range".to_string())?;
    if category > 5 {
        return Err("category out of range".to_string());
    }
    let min_pressure = parse_f64("min_pressure_mb", &rec[7])?;
    HurricaneRecord::new(
        &rec[0],
        &rec[1],
        observed_at,
        position,
        max_wind,
        category,
        min_pressure,
    )
    .map_err(|e| e.to_string())
}

pub const HYDRO_COLUMNS: [&str; 5] = ["zcta", "dams", "outlets", "stations", "streamgages"];

pub fn parse_hydro(input: impl Read) -> Result<(Vec<HydroCounts>, SourceReport)> {
    let mut rdr = reader_from(input);
    check_header("hydro.csv", rdr.headers()?, &HYDRO_COLUMNS)?;
    let mut report = SourceReport::new("hydro.csv");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed = (|| {
            if rec.len() != HYDRO_COLUMNS.len() {
                return Err(format!("expected {} cells, got {}", HYDRO_COLUMNS.len(), rec.len()));
            }
            HydroCounts::new(
                &rec[0],
                parse_u32("dams", &rec[1])?,
                parse_u32("outlets", &rec[2])?,
                parse_u32("stations", &rec[3])?,
                parse_u32("streamgages", &rec[4])?,
            )
            .map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(r) => {
                out.push(r);
                report.accept();
            }
            Err(reason) => report.reject(i + 2, reason),
        }
    }
    Ok((out, report))
}

pub const BUILDING_COLUMNS: [&str; 6] = [
    "zcta",
    "avg_building_age",
    "avg_floors",
    "avg_elevation_diff_ft",
    "avg_elevated_buildings",
    "occupancy_type",
];

pub fn parse_buildings(input: impl Read) -> Result<(Vec<BuildingAggregates>, SourceReport)> {
    let mut rdr = reader_from(input);
    check_header("buildings.csv", rdr.headers()?, &BUILDING_COLUMNS)?;
    let mut report = SourceReport::new("buildings.csv");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut missing: Vec<&str> = Vec::new();
        let parsed = (|| {
            if rec.len() != BUILDING_COLUMNS.len() {
                return Err(format!(
                    "expected {} cells, got {}",
                    BUILDING_COLUMNS.len(),
                    rec.len()
                ));
            }
            // Empty numeric cells are explicit missing markers, resolved later
            // by nearest-ZCTA imputation. Never silently coerced to 0.
            let mut opt =
                |field: &'static str, s: &str| -> std::result::Result<Option<f64>, String> {
                    if s.trim().is_empty() {
                        missing.push(field);
                        Ok(None)
                    } else {
                        parse_f64(field, s).map(Some)
                    }
                };
            let age = opt("avg_building_age", &rec[1])?;
            let floors = opt("avg_floors", &rec[2])?;
            let elev_diff = opt("avg_elevation_diff_ft", &rec[3])?;
            let elevated = opt("avg_elevated_buildings", &rec[4])?;
            BuildingAggregates::new(&rec[0], age, floors, elev_diff, elevated, &rec[5])
                .map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(r) => {
                out.push(r);
                report.accept();
                for f in missing {
                    report.note_missing(f);
                }
            }
            Err(reason) => report.reject(i + 2, reason),
        }
    }
    Ok((out, report))
}

pub const LOSS_COLUMNS: [&str; 4] = ["zcta", "loss_date", "building_cost_usd", "contents_cost_usd"];

pub fn parse_losses(input: impl Read) -> Result<(Vec<LossRecord>, SourceReport)> {
    let mut rdr = reader_from(input);
    check_header("losses.csv", rdr.headers()?, &LOSS_COLUMNS)?;
    let mut report = SourceReport::new("losses.csv");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed = (|| {
            if rec.len() != LOSS_COLUMNS.len() {
                return Err(format!("expected {} cells, got {}", LOSS_COLUMNS.len(), rec.len()));
            }
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|_| format!("loss_date: {:?} is not YYYY-MM-DD", &rec[1]))?;
            LossRecord::new(
                &rec[0],
                date,
                parse_f64("building_cost_usd", &rec[2])?,
                parse_f64("contents_cost_usd", &rec[3])?,
            )
            .map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(r) => {
                out.push(r);
                report.accept();
            }
            Err(reason) => report.reject(i + 2, reason),
        }
    }
    Ok((out, report))
}

pub const HPI_COLUMNS: [&str; 2] = ["month", "value"];

pub fn parse_hpi(input: impl Read) -> Result<(HpiSeries, SourceReport)> {
    let mut rdr = reader_from(input);
    check_header("hpi.csv", rdr.headers()?, &HPI_COLUMNS)?;
    let mut report = SourceReport::new("hpi.csv");
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != HPI_COLUMNS.len() {
            return Err(Error::invalid(
                "hpi.csv",
                format!("expected {} cells, got {}", HPI_COLUMNS.len(), rec.len()),
            ));
        }
        let month = Month::parse(&rec[0])?;
        let value =
            parse_f64("value", &rec[1]).map_err(|m| Error::invalid("value", m))?;
        entries.push((month, value));
        report.accept();
    }
    // HPI is a single consistent series: any invariant violation is fatal.
    let series = HpiSeries::with_default_baseline(entries)?;
    Ok((series, report))
}

pub const ZCTA_COLUMNS: [&str; 3] = ["zcta", "lat", "lon"];

pub fn parse_zcta_centroids(input: impl Read) -> Result<(Vec<ZctaRecord>, SourceReport)> {
    let mut rdr = reader_from(input);
    check_header("zcta_centroids.csv", rdr.headers()?, &ZCTA_COLUMNS)?;
    let mut report = SourceReport::new("zcta_centroids.csv");
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed = (|| {
            if rec.len() != ZCTA_COLUMNS.len() {
                return Err(format!("expected {} cells, got {}", ZCTA_COLUMNS.len(), rec.len()));
            }
            let point = GeoPoint::new(parse_f64("lat", &rec[1])?, parse_f64("lon", &rec[2])?)
                .map_err(|e| e.to_string())?;
            let z = ZctaRecord::new(&rec[0], point).map_err(|e| e.to_string())?;
            if !seen.insert(z.zcta_id.clone()) {
                return Err(format!("duplicate zcta_id {:?}", z.zcta_id));
            }
            Ok(z)
        })();
        match parsed {
            Ok(r) => {
                out.push(r);
                report.accept();
            }
            Err(reason) => report.reject(i + 2, reason),
        }
    }
    Ok((out, report))
}

/// File names used by both [`load_bundle`] and [`write_bundle`].
pub const BUNDLE_FILES: [&str; 6] = [
    "storms.csv",
    "hydro.csv",
    "buildings.csv",
    "losses.csv",
    "hpi.csv",
    "zcta_centroids.csv",
];

/// Paths to the six source CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundlePaths {
    pub storms: std::path::PathBuf,
    pub hydro: std::path::PathBuf,
    pub buildings: std::path::PathBuf,
    pub losses: std::path::PathBuf,
    pub hpi: std::path::PathBuf,
    pub zcta_centroids: std::path::PathBuf,
}

impl BundlePaths {
    pub fn in_dir(dir: &Path) -> Self {
        BundlePaths {
            storms: dir.join("storms.csv"),
            hydro: dir.join("hydro.csv"),
            buildings: dir.join("buildings.csv"),
            losses: dir.join("losses.csv"),
            hpi: dir.join("hpi.csv"),
            zcta_centroids: dir.join("zcta_centroids.csv"),
        }
    }
}

pub fn load_bundle(paths: &BundlePaths) -> Result<(DatasetBundle, IngestReport)> {
    let open = |p: &Path| -> Result<std::fs::File> { Ok(std::fs::File::open(p)?) };
    let (storms, storms_rep) = parse_storms(open(&paths.storms)?)?;
    let (hydro, hydro_rep) = parse_hydro(open(&paths.hydro)?)?;
    let (buildings, buildings_rep) = parse_buildings(open(&paths.buildings)?)?;
    let (losses, losses_rep) = parse_losses(open(&paths.losses)?)?;
    let (hpi, hpi_rep) = parse_hpi(open(&paths.hpi)?)?;
    let (zctas, zcta_rep) = parse_zcta_centroids(open(&paths.zcta_centroids)?)?;

    let known: BTreeSet<&str> = zctas.iter().map(|z| z.zcta_id.as_str()).collect();
    let mut unmatched = BTreeSet::new();
    for id in hydro
        .iter()
        .map(|h| h.zcta_id.as_str())
        .chain(buildings.iter().map(|b| b.zcta_id.as_str()))
        .chain(losses.iter().map(|l| l.zcta_id.as_str()))
    {
        if !known.contains(id) {
            unmatched.insert(id.to_string());
        }
    }
    let category_warnings: Vec<String> =
        storms.iter().filter_map(|s| s.category_warning()).collect();

    let report = IngestReport {
        sources: vec![storms_rep, hydro_rep, buildings_rep, losses_rep, hpi_rep, zcta_rep],
        unmatched_zctas: unmatched.into_iter().collect(),
        category_warnings,
    };
    let bundle = DatasetBundle {
        zctas,
        storms,
        hydro,
        buildings,
        losses,
        hpi,
    };
    Ok((bundle, report))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serialize a bundle back to the six CSVs. Deterministic byte output:
/// floats use shortest round-trip formatting, row order is preserved.
pub fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("storms.csv"))?;
    w.write_record(STORM_COLUMNS)?;
    for s in &bundle.storms {
        w.write_record([
            s.storm_id.clone(),
            s.name.clone(),
            s.observed_at.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            s.position.lat().to_string(),
            s.position.lon().to_string(),
            s.max_wind.to_string(),
            s.category.to_string(),
            s.min_pressure.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("hydro.csv"))?;
    w.write_record(HYDRO_COLUMNS)?;
    for h in &bundle.hydro {
        w.write_record([
            h.zcta_id.clone(),
            h.dams.to_string(),
            h.outlets.to_string(),
            h.stations.to_string(),
            h.streamgages.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("buildings.csv"))?;
    w.write_record(BUILDING_COLUMNS)?;
    for b in &bundle.buildings {
        w.write_record([
            b.zcta_id.clone(),
            fmt_opt(b.avg_building_age),
            fmt_opt(b.avg_floors),
            fmt_opt(b.avg_elevation_diff),
            fmt_opt(b.avg_elevated_buildings),
            b.occupancy_type.clone(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("losses.csv"))?;
    w.write_record(LOSS_COLUMNS)?;
    for l in &bundle.losses {
        w.write_record([
            l.zcta_id.clone(),
            l.loss_date.format("%Y-%m-%d").to_string(),
            l.building_cost.to_string(),
            l.contents_cost.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("hpi.csv"))?;
    w.write_record(HPI_COLUMNS)?;
    for &(m, v) in bundle.hpi.entries() {
        w.write_record([m.to_string(), v.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("zcta_centroids.csv"))?;
    w.write_record(ZCTA_COLUMNS)?;
    for z in &bundle.zctas {
        w.write_record([
            z.zcta_id.clone(),
            z.centroid.lat().to_string(),
            z.centroid.lon().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
