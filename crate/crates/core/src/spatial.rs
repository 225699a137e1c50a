//! Great-circle distance, nearest-neighbor lookup, nearest-hurricane feature
//! assignment, and nearest-ZCTA imputation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{GeoPoint, HurricaneRecord, ZctaRecord};

/// IUGG mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance between two points on a sphere of radius
/// [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lon1) = (a.lat().to_radians(), a.lon().to_radians());
    let (lat2, lon2) = (b.lat().to_radians(), b.lon().to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Nearest-neighbor index over labelled points.
///
/// Queries are defined to return exactly what an exhaustive linear scan with
/// the same tie-break (smallest distance, then lexicographically smallest id)
/// would return. The current implementation *is* that scan; point counts in
/// this pipeline are small enough that no acceleration structure is needed.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<(String, GeoPoint)>,
}

impl NeighborIndex {
    pub fn build(points: Vec<(String, GeoPoint)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("NeighborIndex requires >= 1 point".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (id, _) in &points {
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(NeighborIndex { points })
    }

    /// Nearest point to `query`; ties broken by lexicographically smaller id.
    pub fn nearest(&self, query: GeoPoint) -> (&str, f64) {
        let mut best: Option<(&str, f64)> = None;
        for (id, p) in &self.points {
            let d = haversine_km(query, *p);
            match best {
                None => best = Some((id, d)),
                Some((bid, bd)) => {
                    if d < bd || (d == bd && id.as_str() < bid) {
                        best = Some((id, d));
                    }
                }
            }
        }
        best.unwrap()
    }

    /// Nearest point whose id is not `excluded`. Returns None when every
    /// candidate is excluded.
    pub fn nearest_excluding(&self, query: GeoPoint, excluded: &str) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for (id, p) in &self.points {
            if id == excluded {
                continue;
            }
            let d = haversine_km(query, *p);
            match best {
                None => best = Some((id, d)),
                Some((bid, bd)) => {
                    if d < bd || (d == bd && id.as_str() < bid) {
                        best = Some((id, d));
                    }
                }
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Storm features copied onto a ZCTA from its geographically nearest storm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StormFeatures {
    pub max_wind: f64,
    pub category: u8,
    pub min_pressure: f64,
    pub distance_km: f64,
}

/// A storm's representative point: the track fix with maximum wind (peak
/// intensity), ties by earliest `observed_at`.
pub fn storm_representative_fixes(storms: &[HurricaneRecord]) -> Vec<HurricaneRecord> {
    let mut best: BTreeMap<&str, &HurricaneRecord> = BTreeMap::new();
    for rec in storms {
        best.entry(rec.storm_id.as_str())
            .and_modify(|cur| {
                if rec.max_wind > cur.max_wind
                    || (rec.max_wind == cur.max_wind && rec.observed_at < cur.observed_at)
                {
                    *cur = rec;
                }
            })
            .or_insert(rec);
    }
    best.into_values().cloned().collect()
}

/// Assign each ZCTA the features of the storm whose representative point is
/// nearest to the ZCTA centroid.
pub fn assign_nearest_storm(
    zctas: &[ZctaRecord],
    storms: &[HurricaneRecord],
) -> Result<BTreeMap<String, StormFeatures>> {
    if storms.is_empty() {
        return Err(Error::NoStorms);
    }
    if zctas.is_empty() {
        return Err(Error::EmptyInput("no ZCTAs to assign".into()));
    }
    let fixes = storm_representative_fixes(storms);
    let index = NeighborIndex::build(
        fixes
            .iter()
            .map(|f| (f.storm_id.clone(), f.position))
            .collect(),
    )?;
    let by_id: BTreeMap<&str, &HurricaneRecord> =
        fixes.iter().map(|f| (f.storm_id.as_str(), f)).collect();
    let mut out = BTreeMap::new();
    for z in zctas {
        let (storm_id, distance_km) = index.nearest(z.centroid);
        let storm = by_id[storm_id];
        out.insert(
            z.zcta_id.clone(),
            StormFeatures {
                max_wind: storm.max_wind,
                category: storm.category,
                min_pressure: storm.min_pressure,
                distance_km,
            },
        );
    }
    Ok(out)
}

/// Fill missing values from the geographically nearest ZCTA that has one.
/// Non-missing entries pass through unchanged; a missing ZCTA never donates
/// to itself even at zero distance.
pub fn impute_nearest_zcta(
    values: &BTreeMap<String, Option<f64>>,
    centroids: &[ZctaRecord],
) -> Result<BTreeMap<String, f64>> {
    let donors: Vec<(String, GeoPoint)> = centroids
        .iter()
        .filter(|z| matches!(values.get(&z.zcta_id), Some(Some(_))))
        .map(|z| (z.zcta_id.clone(), z.centroid))
        .collect();
    if donors.is_empty() {
        return Err(Error::AllMissing);
    }
    let index = NeighborIndex::build(donors)?;
    let centroid_of: BTreeMap<&str, GeoPoint> = centroids
        .iter()
        .map(|z| (z.zcta_id.as_str(), z.centroid))
        .collect();
    let mut out = BTreeMap::new();
    for (id, v) in values {
        match v {
            Some(x) => {
                out.insert(id.clone(), *x);
            }
            None => {
                let centroid = *centroid_of.get(id.as_str()).ok_or_else(|| {
                    Error::invalid("zcta_id", format!("{id} has no centroid"))
                })?;
                let (donor, _) = index
                    .nearest_excluding(centroid, id)
                    .ok_or(Error::AllMissing)?;
                out.insert(id.clone(), values[donor].unwrap());
            }
        }
    }
    Ok(out)
}
