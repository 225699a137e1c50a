//! Feature engineering: fusion of the ingested sources into the final
//! feature matrix, standardization, one-hot encoding, inflation adjustment,
//! and the log target transform.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DatasetBundle;
use crate::spatial::{assign_nearest_storm, impute_nearest_zcta, NeighborIndex};
use crate::types::{FeatureMatrix, HpiSeries, Month};

/// Per-column mean and population (divisor n) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnMoments {
    pub mean: f64,
    pub std: f64,
}

/// Fitted standardization parameters, one entry per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub columns: Vec<ColumnMoments>,
}

/// mean = arithmetic mean, std = population standard deviation (divisor n).
/// A zero std is recorded as-is; apply maps such columns to all zeros.
pub fn fit_standardizer(rows: &[Vec<f64>]) -> Result<StandardizationParams> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("fit_standardizer requires >= 1 row".into()));
    }
    let p = rows[0].len();
    let n = rows.len() as f64;
    let mut columns = Vec::with_capacity(p);
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        columns.push(ColumnMoments {
            mean,
            std: var.sqrt(),
        });
    }
    Ok(StandardizationParams { columns })
}

pub fn apply_standardizer(params: &StandardizationParams, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&params.columns)
                .map(|(&x, c)| if c.std > 0.0 { (x - c.mean) / c.std } else { 0.0 })
                .collect()
        })
        .collect()
}

/// One-hot encoding spec: an ordered closed label set for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotSpec {
    pub column: String,
    pub labels: Vec<String>,
}

impl OneHotSpec {
    pub fn fit(column: impl Into<String>, labels: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let labels: Vec<String> = labels.into_iter().collect();
        for l in &labels {
            if !seen.insert(l.clone()) {
                return Err(Error::invalid("labels", format!("duplicate label {l:?}")));
            }
        }
        Ok(OneHotSpec {
            column: column.into(),
            labels,
        })
    }

    pub fn output_names(&self) -> Vec<String> {
        self.labels
            .iter()
            .map(|l| format!("{}={}", self.column, l))
            .collect()
    }

    /// Indicator vector for a label. Unseen labels encode as all zeros and
    /// are reported through the returned flag rather than an error.
    pub fn encode(&self, label: &str) -> (Vec<f64>, bool) {
        let mut v = vec![0.0; self.labels.len()];
        match self.labels.iter().position(|l| l == label) {
            Some(i) => {
                v[i] = 1.0;
                (v, false)
            }
            None => (v, true),
        }
    }
}

/// Convert a cost at `loss_date` into baseline dollars via the HPI factor.
pub fn adjust_inflation(cost: f64, loss_date: NaiveDate, hpi: &HpiSeries) -> Result<f64> {
    if cost < 0.0 || !cost.is_finite() {
        return Err(Error::invalid("cost", format!("{cost} must be finite and >= 0")));
    }
    let value = hpi.value_for(Month::of_date(loss_date))?;
    // factor first: adjustment at the baseline month is the exact identity
    Ok(cost * (hpi.baseline_value() / value))
}

/// ln(1 + x); zero-safe log transform for the target.
pub fn log_target(adjusted_cost: f64) -> Result<f64> {
    if adjusted_cost < 0.0 || !adjusted_cost.is_finite() {
        return Err(Error::invalid(
            "adjusted_cost",
            format!("{adjusted_cost} must be finite and >= 0"),
        ));
    }
    Ok(adjusted_cost.ln_1p())
}

/// Exact inverse of [`log_target`].
pub fn inverse_log_target(y: f64) -> f64 {
    y.exp_m1()
}

/// Canonical numeric feature columns, in matrix order. All are standardized;
/// `category` and the one-hot columns are not.
pub const NUMERIC_COLUMNS: [&str; 10] = [
    "max_wind",
    "min_pressure",
    "dams",
    "outlets",
    "stations",
    "streamgages",
    "avg_building_age",
    "avg_floors",
    "avg_elevation_diff",
    "avg_elevated_buildings",
];

pub const CATEGORY_COLUMN: &str = "category";
pub const OCCUPANCY_COLUMN: &str = "occupancy_type";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    /// One-hot occupancy columns can be dropped entirely.
    pub include_occupancy: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            include_occupancy: true,
        }
    }
}

/// Raw (unscaled) assembled matrix plus the per-column standardization mask.
/// Standardization is deliberately deferred so CV folds can fit their own
/// parameters on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub matrix: FeatureMatrix,
    /// true for columns that standardization applies to.
    pub standardize: Vec<bool>,
    pub onehot: Option<OneHotSpec>,
}

/// Fuse the bundle into the raw feature matrix and log-adjusted target.
///
/// Rows are the ZCTAs present in the loss data, sorted by id. Hydro and
/// building gaps are filled by nearest-ZCTA imputation before assembly, so
/// the resulting matrix carries no missing markers. Losses for the same ZCTA
/// are summed and inflation-adjusted at the latest loss month.
pub fn assemble(bundle: &DatasetBundle, options: AssembleOptions) -> Result<Assembled> {
    if bundle.losses.is_empty() {
        return Err(Error::EmptyInput("bundle has no loss records".into()));
    }
    let centroid_ids: BTreeSet<&str> = bundle.zctas.iter().map(|z| z.zcta_id.as_str()).collect();
    let retained: Vec<String> = bundle
        .losses
        .iter()
        .map(|l| l.zcta_id.clone())
        .filter(|id| centroid_ids.contains(id.as_str()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyInput(
            "no loss ZCTA resolves to a known centroid".into(),
        ));
    }
    let zctas: Vec<crate::types::ZctaRecord> = bundle
        .zctas
        .iter()
        .filter(|z| retained.binary_search(&z.zcta_id).is_ok())
        .cloned()
        .collect();

    let storm_features = assign_nearest_storm(&zctas, &bundle.storms)?;

    // Numeric source columns as (possibly missing) per-ZCTA maps.
    let hydro_by_id: BTreeMap<&str, &crate::types::HydroCounts> =
        bundle.hydro.iter().map(|h| (h.zcta_id.as_str(), h)).collect();
    let bld_by_id: BTreeMap<&str, &crate::types::BuildingAggregates> =
        bundle.buildings.iter().map(|b| (b.zcta_id.as_str(), b)).collect();

    let numeric = |f: &dyn Fn(&str) -> Option<f64>| -> BTreeMap<String, Option<f64>> {
        retained.iter().map(|id| (id.clone(), f(id))).collect()
    };
    let imputed_columns: Vec<BTreeMap<String, f64>> = [
        numeric(&|id| hydro_by_id.get(id).map(|h| f64::from(h.dams))),
        numeric(&|id| hydro_by_id.get(id).map(|h| f64::from(h.outlets))),
        numeric(&|id| hydro_by_id.get(id).map(|h| f64::from(h.stations))),
        numeric(&|id| hydro_by_id.get(id).map(|h| f64::from(h.streamgages))),
        numeric(&|id| bld_by_id.get(id).and_then(|b| b.avg_building_age)),
        numeric(&|id| bld_by_id.get(id).and_then(|b| b.avg_floors)),
        numeric(&|id| bld_by_id.get(id).and_then(|b| b.avg_elevation_diff)),
        numeric(&|id| bld_by_id.get(id).and_then(|b| b.avg_elevated_buildings)),
    ]
    .iter()
    .map(|col| impute_nearest_zcta(col, &zctas))
    .collect::<Result<_>>()?;

    // Occupancy labels, nearest-donor imputed where the ZCTA has no row.
    let occupancy: BTreeMap<String, String> = {
        let donors: Vec<(String, crate::types::GeoPoint)> = zctas
            .iter()
            .filter(|z| bld_by_id.contains_key(z.zcta_id.as_str()))
            .map(|z| (z.zcta_id.clone(), z.centroid))
            .collect();
        if donors.is_empty() {
            return Err(Error::AllMissing);
        }
        let index = NeighborIndex::build(donors)?;
        zctas
            .iter()
            .map(|z| {
                let label = match bld_by_id.get(z.zcta_id.as_str()) {
                    Some(b) => b.occupancy_type.clone(),
                    None => {
                        let (donor, _) = index
                            .nearest_excluding(z.centroid, &z.zcta_id)
                            .unwrap_or_else(|| index.nearest(z.centroid));
                        bld_by_id[donor].occupancy_type.clone()
                    }
                };
                (z.zcta_id.clone(), label)
            })
            .collect()
    };

    // Closed label set declared at ingest: every label observed in the
    // buildings source, sorted.
    let onehot = if options.include_occupancy {
        let labels: BTreeSet<String> = bundle
            .buildings
            .iter()
            .map(|b| b.occupancy_type.clone())
            .collect();
        Some(OneHotSpec::fit(OCCUPANCY_COLUMN, labels)?)
    } else {
        None
    };

    // Target: per-ZCTA summed losses, adjusted at the latest loss month.
    let mut loss_sum: BTreeMap<&str, (f64, NaiveDate)> = BTreeMap::new();
    for l in &bundle.losses {
        if retained.binary_search(&l.zcta_id).is_err() {
            continue;
        }
        loss_sum
            .entry(l.zcta_id.as_str())
            .and_modify(|(sum, latest)| {
                *sum += l.total_cost();
                *latest = (*latest).max(l.loss_date);
            })
            .or_insert((l.total_cost(), l.loss_date));
    }

    let mut column_names: Vec<String> =
        NUMERIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    column_names.push(CATEGORY_COLUMN.to_string());
    let mut standardize = vec![true; NUMERIC_COLUMNS.len()];
    standardize.push(false);
    if let Some(spec) = &onehot {
        column_names.extend(spec.output_names());
        standardize.extend(std::iter::repeat(false).take(spec.labels.len()));
    }

    let mut rows = Vec::with_capacity(retained.len());
    let mut target = Vec::with_capacity(retained.len());
    for id in &retained {
        let sf = &storm_features[id];
        let mut row = vec![sf.max_wind, sf.min_pressure];
        // imputed_columns is ordered dams..avg_elevated_buildings, matching
        // NUMERIC_COLUMNS[2..].
        for col in &imputed_columns {
            row.push(col[id]);
        }
        row.push(f64::from(sf.category));
        if let Some(spec) = &onehot {
            let (ind, _) = spec.encode(&occupancy[id]);
            row.extend(ind);
        }
        rows.push(row);

        let (sum, latest) = loss_sum[id.as_str()];
        target.push(log_target(adjust_inflation(sum, latest, &bundle.hpi)?)?);
    }

    let matrix = FeatureMatrix::new(column_names, rows, target, retained)?;
    Ok(Assembled {
        matrix,
        standardize,
        onehot,
    })
}

/// Standardization parameters for a full matrix: `None` for passthrough
/// columns (category, one-hots). Persisted with trained models so prediction
/// reuses training-time transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub columns: Vec<Option<ColumnMoments>>,
}

impl FeatureTransform {
    /// Fit on the subset of rows given by `row_indices`.
    pub fn fit(
        matrix: &FeatureMatrix,
        row_indices: &[usize],
        standardize: &[bool],
    ) -> Result<Self> {
        if row_indices.is_empty() {
            return Err(Error::EmptyInput("transform fit requires >= 1 row".into()));
        }
        if standardize.len() != matrix.n_cols() {
            return Err(Error::WidthMismatch {
                expected: matrix.n_cols(),
                actual: standardize.len(),
            });
        }
        // summation in ascending row order makes the fit independent of the
        // order the caller lists the training rows in
        let mut row_indices = row_indices.to_vec();
        row_indices.sort_unstable();
        let n = row_indices.len() as f64;
        let rows = matrix.rows();
        let columns = (0..matrix.n_cols())
            .map(|j| {
                if !standardize[j] {
                    return None;
                }
                let mean = row_indices.iter().map(|&i| rows[i][j]).sum::<f64>() / n;
                let var = row_indices
                    .iter()
                    .map(|&i| (rows[i][j] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                Some(ColumnMoments {
                    mean,
                    std: var.sqrt(),
                })
            })
            .collect();
        Ok(FeatureTransform { columns })
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.columns.len() {
            return Err(Error::WidthMismatch {
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(&self.columns)
            .map(|(&x, c)| match c {
                Some(m) if m.std > 0.0 => (x - m.mean) / m.std,
                Some(_) => 0.0,
                None => x,
            })
            .collect())
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

/// Standardize a whole assembled matrix with parameters fitted on all rows.
pub fn standardize_all(assembled: &Assembled) -> Result<(FeatureMatrix, FeatureTransform)> {
    let all: Vec<usize> = (0..assembled.matrix.n_rows()).collect();
    let transform = FeatureTransform::fit(&assembled.matrix, &all, &assembled.standardize)?;
    let rows = transform.apply_rows(assembled.matrix.rows())?;
    let matrix = FeatureMatrix::new(
        assembled.matrix.column_names().to_vec(),
        rows,
        assembled.matrix.target().to_vec(),
        assembled.matrix.row_ids().to_vec(),
    )?;
    Ok((matrix, transform))
}

/// Matrix CSV layout: first column "zcta", then feature columns, final
/// column "target".
pub fn matrix_to_csv(matrix: &FeatureMatrix) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["zcta".to_string()];
    header.extend(matrix.column_names().iter().cloned());
    header.push("target".to_string());
    w.write_record(&header)?;
    for i in 0..matrix.n_rows() {
        let mut rec = vec![matrix.row_ids()[i].clone()];
        rec.extend(matrix.rows()[i].iter().map(|v| v.to_string()));
        rec.push(matrix.target()[i].to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn matrix_from_csv(input: impl std::io::Read) -> Result<FeatureMatrix> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.first().map(String::as_str) != Some("zcta")
        || headers.last().map(String::as_str) != Some("target")
    {
        return Err(Error::Schema {
            source_name: "feature matrix csv".into(),
            missing: vec!["zcta (first)".into(), "target (last)".into()],
        });
    }
    let column_names: Vec<String> = headers[1..headers.len() - 1].to_vec();
    let mut rows = Vec::new();
    let mut target = Vec::new();
    let mut row_ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::WidthMismatch {
                expected: headers.len(),
                actual: rec.len(),
            });
        }
        row_ids.push(rec[0].to_string());
        let mut row = Vec::with_capacity(column_names.len());
        for cell in rec.iter().skip(1).take(column_names.len()) {
            row.push(cell.parse::<f64>().map_err(|_| {
                Error::invalid("matrix", format!("cannot parse {cell:?} as number"))
            })?);
        }
        rows.push(row);
        target.push(rec[rec.len() - 1].parse::<f64>().map_err(|_| {
            Error::invalid("target", format!("cannot parse {:?}", &rec[rec.len() - 1]))
        })?);
    }
    FeatureMatrix::new(column_names, rows, target, row_ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::generate_synthetic;
    use crate::types::{HpiSeries, Month, Seed};

    #[test]
    fn standardizer_hand_cases() {
        let p = fit_standardizer(&[vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(p.columns[0].mean, 2.0);
        assert_eq!(p.columns[0].std, 0.0);

        let p = fit_standardizer(&[vec![0.0], vec![10.0]]).unwrap();
        assert_eq!(p.columns[0].mean, 5.0);
        assert_eq!(p.columns[0].std, 5.0);

        let p = fit_standardizer(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(p.columns[0].mean, 2.5);
        assert!((p.columns[0].std - 1.25_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn apply_standardizer_self_normalizes() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 1.7 - 3.0]).collect();
        let p = fit_standardizer(&rows).unwrap();
        let out = apply_standardizer(&p, &rows);
        let n = out.len() as f64;
        let mean = out.iter().map(|r| r[0]).sum::<f64>() / n;
        let var = out.iter().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
        // x = mean + std -> 1.0
        let x = p.columns[0].mean + p.columns[0].std;
        assert!((apply_standardizer(&p, &[vec![x]])[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_standardizer_constant_column_maps_to_zero() {
        let rows = vec![vec![7.0], vec![7.0]];
        let p = fit_standardizer(&rows).unwrap();
        assert_eq!(apply_standardizer(&p, &rows), vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn one_hot_encoding() {
        let spec = OneHotSpec::fit("occ", ["A", "B", "C"].map(String::from)).unwrap();
        assert_eq!(spec.encode("B"), (vec![0.0, 1.0, 0.0], false));
        let single = OneHotSpec::fit("occ", ["A".to_string()]).unwrap();
        assert_eq!(single.encode("A"), (vec![1.0], false));
        let spec = OneHotSpec::fit("occ", ["A", "B"].map(String::from)).unwrap();
        assert_eq!(spec.encode("Z"), (vec![0.0, 0.0], true));
        assert!(OneHotSpec::fit("occ", ["A", "A"].map(String::from)).is_err());
    }

    fn hpi_at(value: f64) -> HpiSeries {
        HpiSeries::with_default_baseline(vec![(Month::new(2024, 1).unwrap(), value)]).unwrap()
    }

    #[test]
    fn inflation_adjustment() {
        let date = NaiveDate::from_ymd_opt(2024, 6, 15).unwrap();
        let at_baseline = hpi_at(820.29);
        assert_eq!(adjust_inflation(1234.5, date, &at_baseline).unwrap(), 1234.5);
        let halved = hpi_at(410.145);
        assert!((adjust_inflation(1000.0, date, &halved).unwrap() - 2000.0).abs() < 1e-9);
        assert_eq!(adjust_inflation(0.0, date, &halved).unwrap(), 0.0);
        let early = NaiveDate::from_ymd_opt(2023, 12, 31).unwrap();
        assert!(adjust_inflation(1.0, early, &at_baseline).is_err());
    }

    #[test]
    fn log_target_and_inverse() {
        assert_eq!(log_target(0.0).unwrap(), 0.0);
        assert!((log_target(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(log_target(-1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn log_round_trip(x in 0.0..1e9f64) {
            let y = log_target(x).unwrap();
            let back = inverse_log_target(y);
            let scale = x.abs().max(1.0);
            proptest::prop_assert!((back - x).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn assemble_column_layout() {
        let bundle = generate_synthetic(Seed(42), 40, 4, 0.3).unwrap();
        let assembled = assemble(&bundle, AssembleOptions::default()).unwrap();
        let m = &assembled.matrix;
        let n_labels = assembled.onehot.as_ref().unwrap().labels.len();
        assert_eq!(m.n_cols(), 10 + 1 + n_labels);
        assert_eq!(m.n_rows(), 40);
        assert_eq!(&m.column_names()[..2], &["max_wind", "min_pressure"]);
        assert_eq!(m.column_names()[10], "category");
        assert!(m.column_names()[11].starts_with("occupancy_type="));
        // category and one-hots unscaled
        assert!(!assembled.standardize[10]);
        assert!(assembled.standardize[..10].iter().all(|&b| b));
        assert!(!assembled.standardize[11..].iter().any(|&b| b));
    }

    #[test]
    fn assemble_single_occupancy_label() {
        let mut bundle = generate_synthetic(Seed(7), 15, 2, 0.0).unwrap();
        for b in &mut bundle.buildings {
            b.occupancy_type = "residential".to_string();
        }
        let assembled = assemble(&bundle, AssembleOptions::default()).unwrap();
        let idx = assembled
            .matrix
            .column_index("occupancy_type=residential")
            .unwrap();
        assert_eq!(assembled.matrix.n_cols(), 12);
        assert!(assembled.matrix.rows().iter().all(|r| r[idx] == 1.0));
    }

    #[test]
    fn assemble_without_occupancy() {
        let bundle = generate_synthetic(Seed(7), 15, 2, 0.0).unwrap();
        let assembled = assemble(
            &bundle,
            AssembleOptions {
                include_occupancy: false,
            },
        )
        .unwrap();
        assert_eq!(assembled.matrix.n_cols(), 11);
        assert!(assembled.onehot.is_none());
    }

    #[test]
    fn assemble_imputes_hydro_gap() {
        let mut bundle = generate_synthetic(Seed(3), 20, 2, 0.0).unwrap();
        bundle.hydro.remove(5);
        let assembled = assemble(&bundle, AssembleOptions::default()).unwrap();
        // matrix stays dense and finite (FeatureMatrix enforces it)
        assert_eq!(assembled.matrix.n_rows(), 20);
    }

    #[test]
    fn matrix_csv_round_trip() {
        let bundle = generate_synthetic(Seed(42), 25, 3, 0.3).unwrap();
        let assembled = assemble(&bundle, AssembleOptions::default()).unwrap();
        let (scaled, _) = standardize_all(&assembled).unwrap();
        let csv = matrix_to_csv(&scaled).unwrap();
        let back = matrix_from_csv(csv.as_bytes()).unwrap();
        assert_eq!(scaled, back);
    }

    #[test]
    fn transform_persists_and_reapplies() {
        let bundle = generate_synthetic(Seed(42), 30, 3, 0.3).unwrap();
        let assembled = assemble(&bundle, AssembleOptions::default()).unwrap();
        let (scaled, transform) = standardize_all(&assembled).unwrap();
        let json = serde_json::to_string(&transform).unwrap();
        let restored: FeatureTransform = serde_json::from_str(&json).unwrap();
        let rows = restored.apply_rows(assembled.matrix.rows()).unwrap();
        assert_eq!(rows, scaled.rows());
    }
}
