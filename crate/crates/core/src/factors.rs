//! Derivation, imputation and normalization of the 14-factor randomness
//! model from raw per-sport measurements.
//!
//! Four factors are inverted companions (ball lightness from ball weight,
//! dispossession from possession, inexperience from experience, scoring
//! infrequency from scoring frequency); the other ten pass through from the
//! raw table. Every column is then min-max rescaled to [0, 1].

use crate::data_model::{CompanionFactors, FactorsTable};
use crate::error::{Error, Result};

/// Column order of the normalized factor table.
pub const NORMALIZED_COLUMNS: [&str; 14] = [
    "BL", "BV", "FS/BS", "GS/BS", "BG", "BB", "PP", "PBH", "PBD", "PI", "NP/FS", "GS/NPG", "SI",
    "NRAM/NRPM",
];

/// Raw columns that pass through the pipeline unchanged before normalization.
pub const PASSTHROUGH_COLUMNS: [&str; 10] =
    ["BV", "FS/BS", "GS/BS", "BG", "BB", "PP", "PBH", "NP/FS", "GS/NPG", "NRAM/NRPM"];

/// Normalized values printed for cells whose raw measurement is missing.
/// The published table fills cricket's goal-less cells this way.
pub const PUBLISHED_IMPUTED_CELLS: [(&str, &str, f64); 3] =
    [("Cricket", "GS/BS", 0.066), ("Cricket", "GS/NPG", 0.073), ("Cricket", "SI", 0.83)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImputePolicy {
    /// Fill a missing cell with the published normalized constant.
    #[default]
    Published,
    /// Fill with the mean of the raw (derived) column, before normalization.
    MeanRaw,
    /// Fill with the mean of the normalized column.
    MeanNormalized,
}

impl ImputePolicy {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "published" => Ok(ImputePolicy::Published),
            "mean-raw" => Ok(ImputePolicy::MeanRaw),
            "mean-normalized" => Ok(ImputePolicy::MeanNormalized),
            other => Err(Error::validation(format!(
                "unknown imputation policy '{other}' (expected published, mean-raw or mean-normalized)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ImputePolicy::Published => "published",
            ImputePolicy::MeanRaw => "mean-raw",
            ImputePolicy::MeanNormalized => "mean-normalized",
        }
    }
}

fn present(column: &[Option<f64>]) -> impl Iterator<Item = f64> + '_ {
    column.iter().flatten().copied()
}

/// Replace each cell by (column max - cell); missing cells stay missing.
pub fn derive_inverse_factor(label: &str, column: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let max = present(column)
        .fold(None::<f64>, |acc, v| Some(acc.map_or(v, |m| m.max(v))))
        .ok_or_else(|| Error::AllMissing(label.to_string()))?;
    Ok(column.iter().map(|c| c.map(|v| max - v)).collect())
}

/// Min-max rescale the non-missing cells of a column onto [0, 1].
pub fn minmax_normalize(label: &str, column: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for v in present(column) {
        min = min.min(v);
        max = max.max(v);
        any = true;
    }
    if !any {
        return Err(Error::AllMissing(label.to_string()));
    }
    if max <= min {
        return Err(Error::ConstantColumn(label.to_string()));
    }
    Ok(column.iter().map(|c| c.map(|v| (v - min) / (max - min))).collect())
}

/// Fill missing cells of a column according to the policy. `row_labels` and
/// `label` locate published constants; the mean policies use the column mean.
pub fn impute_missing(
    label: &str,
    column: &[Option<f64>],
    policy: ImputePolicy,
    row_labels: &[String],
) -> Result<Vec<Option<f64>>> {
    if column.iter().all(|c| c.is_none()) {
        return Err(Error::AllMissing(label.to_string()));
    }
    if column.iter().all(|c| c.is_some()) {
        return Ok(column.to_vec());
    }
    match policy {
        ImputePolicy::MeanRaw | ImputePolicy::MeanNormalized => {
            let (sum, count) = present(column).fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            let mean = sum / count as f64;
            Ok(column.iter().map(|c| Some(c.unwrap_or(mean))).collect())
        }
        ImputePolicy::Published => column
            .iter()
            .enumerate()
            .map(|(row, cell)| match cell {
                Some(v) => Ok(Some(*v)),
                None => {
                    let sport = &row_labels[row];
                    PUBLISHED_IMPUTED_CELLS
                        .iter()
                        .find(|(s, f, _)| s.eq_ignore_ascii_case(sport) && *f == label)
                        .map(|(_, _, v)| Some(*v))
                        .ok_or_else(|| {
                            Error::validation(format!(
                                "no published value to impute ({sport}, {label})"
                            ))
                        })
                }
            })
            .collect(),
    }
}

fn companion_source<'a>(
    label: &str,
    companions: &'a CompanionFactors,
) -> Option<&'a [Option<f64>]> {
    match label {
        "BL" => Some(&companions.ball_weight),
        "PBD" => Some(&companions.ball_possession),
        "PI" => Some(&companions.experience),
        "SI" => Some(&companions.scoring_frequency),
        _ => None,
    }
}

/// Run the full derivation: invert the four companion columns, pass the rest
/// through, impute per policy, and min-max normalize everything.
///
/// Mean-raw imputation happens before normalization; the published and
/// mean-normalized fills happen after (published constants are already on
/// the normalized scale).
pub fn build_factors_pipeline(
    raw: &FactorsTable,
    companions: &CompanionFactors,
    policy: ImputePolicy,
) -> Result<FactorsTable> {
    let rows = raw.row_labels().to_vec();
    if companions.sports != rows {
        return Err(Error::validation(
            "raw table and companion table list different sports",
        ));
    }
    let mut columns = Vec::with_capacity(NORMALIZED_COLUMNS.len());
    for &label in &NORMALIZED_COLUMNS {
        let source: Vec<Option<f64>> = match companion_source(label, companions) {
            Some(column) => derive_inverse_factor(label, column)?,
            None => raw
                .column_by_label(label)
                .ok_or_else(|| Error::validation(format!("raw table is missing column '{label}'")))?,
        };
        let pre_normalized = match policy {
            ImputePolicy::MeanRaw => impute_missing(label, &source, policy, &rows)?,
            _ => source,
        };
        let normalized = minmax_normalize(label, &pre_normalized)?;
        let filled = match policy {
            ImputePolicy::MeanRaw => normalized,
            _ => impute_missing(label, &normalized, policy, &rows)?,
        };
        columns.push((label.to_string(), filled));
    }
    FactorsTable::from_columns(rows, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_bundled_factors;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn inverse_factor_basics() {
        let col = vec![Some(602.0), Some(145.0), None];
        let inv = derive_inverse_factor("BL", &col).unwrap();
        assert_eq!(inv, vec![Some(0.0), Some(457.0), None]);
        let constant = vec![Some(3.0), Some(3.0)];
        assert_eq!(derive_inverse_factor("X", &constant).unwrap(), vec![Some(0.0), Some(0.0)]);
        assert!(matches!(derive_inverse_factor("X", &[None, None]), Err(Error::AllMissing(_))));
    }

    #[test]
    fn normalize_basics() {
        let col = vec![Some(2.0), Some(4.0), Some(6.0)];
        assert_eq!(
            minmax_normalize("X", &col).unwrap(),
            vec![Some(0.0), Some(0.5), Some(1.0)]
        );
        assert!(matches!(
            minmax_normalize("X", &[Some(1.0), Some(1.0)]),
            Err(Error::ConstantColumn(_))
        ));
    }

    #[test]
    fn normalize_is_idempotent_and_order_preserving() {
        let col = vec![Some(0.3), Some(0.9), None, Some(0.1)];
        let once = minmax_normalize("X", &col).unwrap();
        let twice = minmax_normalize("X", &once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            match (a, b) {
                (Some(a), Some(b)) => close(*a, *b, 1e-12),
                (None, None) => {}
                _ => panic!("missing pattern changed"),
            }
        }
        assert!(once[1] > once[0] && once[0] > once[3]);
    }

    #[test]
    fn inverse_then_normalize_equals_one_minus_normalized() {
        let col = vec![Some(4.8), Some(19.09), Some(2.73), None, Some(7.5)];
        let lhs = minmax_normalize("X", &derive_inverse_factor("X", &col).unwrap()).unwrap();
        let rhs: Vec<Option<f64>> = minmax_normalize("X", &col)
            .unwrap()
            .into_iter()
            .map(|c| c.map(|v| 1.0 - v))
            .collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            match (a, b) {
                (Some(a), Some(b)) => close(*a, *b, 1e-12),
                (None, None) => {}
                _ => panic!("missing pattern changed"),
            }
        }
    }

    #[test]
    fn impute_identity_without_missing() {
        let col = vec![Some(1.0), Some(2.0)];
        let out = impute_missing("X", &col, ImputePolicy::MeanRaw, &[]).unwrap();
        assert_eq!(out, col);
    }

    #[test]
    fn published_impute_is_table_constant() {
        let rows: Vec<String> = vec!["Soccer".into(), "Cricket".into()];
        let col = vec![Some(0.4), None];
        let out = impute_missing("SI", &col, ImputePolicy::Published, &rows).unwrap();
        assert_eq!(out, vec![Some(0.4), Some(0.83)]);
        // a missing cell without a published constant is an error
        assert!(impute_missing("BV", &col, ImputePolicy::Published, &rows).is_err());
    }

    #[test]
    fn pipeline_known_cells() {
        let (_, raw, companions) = load_bundled_factors().unwrap();
        let table = build_factors_pipeline(&raw, &companions, ImputePolicy::Published).unwrap();
        // BL: basketball has the heaviest ball, lacrosse the lightest
        assert_eq!(table.cell("Basketball", "BL"), Some(Some(0.0)));
        assert_eq!(table.cell("Lacrosse", "BL"), Some(Some(1.0)));
        // PI soccer = (36 - 35) / (36 - 24)
        close(table.cell("Soccer", "PI").unwrap().unwrap(), 1.0 / 12.0, 1e-12);
        // FS/BS soccer
        close(table.cell("Soccer", "FS/BS").unwrap().unwrap(), 69800.0 / 998800.0, 1e-12);
        // SI field hockey = (2.4 - 0.073) / (2.4 - 0.03)
        close(table.cell("Field Hockey", "SI").unwrap().unwrap(), 2.327 / 2.37, 1e-12);
        // published cricket fills
        close(table.cell("Cricket", "GS/BS").unwrap().unwrap(), 0.066, 1e-12);
        close(table.cell("Cricket", "SI").unwrap().unwrap(), 0.83, 1e-12);
    }

    #[test]
    fn mean_raw_imputes_cricket_si_near_081() {
        let (_, raw, companions) = load_bundled_factors().unwrap();
        let table = build_factors_pipeline(&raw, &companions, ImputePolicy::MeanRaw).unwrap();
        let si = table.cell("Cricket", "SI").unwrap().unwrap();
        // mean of the other 11 scoring frequencies, inverted and normalized
        let sf_mean = (2.4 + 0.073 + 0.15 + 0.46 + 0.12 + 0.21 + 0.2 + 0.2 + 0.03 + 1.0 + 0.56) / 11.0;
        let expected = (2.4 - sf_mean) / (2.4 - 0.03);
        close(si, expected, 1e-12);
        assert!((si - 0.81).abs() < 0.01);
    }

    #[test]
    fn policies_differ_only_in_imputed_cells() {
        let (_, raw, companions) = load_bundled_factors().unwrap();
        let published = build_factors_pipeline(&raw, &companions, ImputePolicy::Published).unwrap();
        let mean_raw = build_factors_pipeline(&raw, &companions, ImputePolicy::MeanRaw).unwrap();
        for (r, sport) in published.row_labels().iter().enumerate() {
            for (c, factor) in published.col_labels().iter().enumerate() {
                let a = published.get(r, c).unwrap();
                let b = mean_raw.get(r, c).unwrap();
                let imputed = PUBLISHED_IMPUTED_CELLS
                    .iter()
                    .any(|(s, f, _)| s == sport && f == factor);
                if imputed {
                    assert!((a - b).abs() > 1e-6, "({sport}, {factor}) should differ");
                } else {
                    close(a, b, 1e-12);
                }
            }
        }
    }

    #[test]
    fn pipeline_outputs_lie_in_unit_interval() {
        let (_, raw, companions) = load_bundled_factors().unwrap();
        for policy in [ImputePolicy::Published, ImputePolicy::MeanRaw, ImputePolicy::MeanNormalized] {
            let table = build_factors_pipeline(&raw, &companions, policy).unwrap();
            for r in 0..table.n_rows() {
                for c in 0..table.n_cols() {
                    let v = table.get(r, c).expect("no missing cells after imputation");
                    assert!((0.0..=1.0).contains(&v), "cell ({r},{c}) = {v}");
                }
            }
        }
    }

    #[test]
    fn single_sport_table_surfaces_constant_column() {
        let raw = FactorsTable::from_columns(
            vec!["Solo".into()],
            PASSTHROUGH_COLUMNS.iter().map(|l| (l.to_string(), vec![Some(1.0)])).collect(),
        )
        .unwrap();
        let companions = CompanionFactors::new(
            vec!["Solo".into()],
            vec![Some(100.0)],
            vec![Some(2.0)],
            vec![Some(30.0)],
            vec![Some(0.5)],
        )
        .unwrap();
        assert!(matches!(
            build_factors_pipeline(&raw, &companions, ImputePolicy::Published),
            Err(Error::ConstantColumn(_))
        ));
    }
}
