//! Loading and writing of match corpora and the bundled reference datasets.
//!
//! The on-disk match schema is CSV with header
//! `sport,competition,edition_year,stage,team_i,team_j,score_i,score_j`
//! (UTF-8, LF line endings), plus a JSON mirror with identical field names.
//! The bundled reference tables ship inside the binary; setting the
//! `UNDERDOG_DATA_DIR` environment variable points the loaders at replacement
//! files with the same names instead.

use crate::data_model::{
    CompanionFactors, EditionId, FactorsTable, MatchRecord, MatchScoreDataset, Stage, TeamId,
};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const MATCHES_HEADER: [&str; 8] =
    ["sport", "competition", "edition_year", "stage", "team_i", "team_j", "score_i", "score_j"];

/// Marker used for missing cells in the factor tables.
pub const MISSING: &str = "NA";

/// Environment variable that overrides the bundled-data location.
pub const DATA_DIR_ENV: &str = "UNDERDOG_DATA_DIR";

const FACTORS_NORMALIZED_CSV: &str = include_str!("../data/factors_normalized.csv");
const FACTORS_RAW_CSV: &str = include_str!("../data/factors_raw.csv");
const COMPANION_FACTORS_CSV: &str = include_str!("../data/companion_factors.csv");
const UAS_TABLE_CSV: &str = include_str!("../data/uas_table.csv");
const EDITIONS_CSV: &str = include_str!("../data/editions.csv");
const SYNTHETIC_CORPUS_CSV: &str = include_str!("../data/synthetic_corpus.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Json,
}

impl CorpusFormat {
    /// Guess the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => CorpusFormat::Json,
            _ => CorpusFormat::Csv,
        }
    }
}

/// One row of the match schema before validation. Scores are signed so that
/// a negative score surfaces as a validation error instead of a parse error.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRow {
    sport: String,
    competition: String,
    edition_year: i32,
    stage: String,
    team_i: String,
    team_j: String,
    score_i: i64,
    score_j: i64,
}

impl RawRow {
    fn validate(&self, line: usize) -> Result<(String, MatchRecord)> {
        let at = |e: Error| match e {
            Error::Validation { message, .. } => Error::validation_at(line, message),
            other => other,
        };
        if self.score_i < 0 || self.score_j < 0 {
            return Err(Error::validation_at(
                line,
                format!("negative score {}-{}", self.score_i, self.score_j),
            ));
        }
        let edition = EditionId::new(&self.competition, self.edition_year).map_err(at)?;
        let stage = Stage::parse(&self.stage).map_err(at)?;
        let team_i = TeamId::new(&self.team_i).map_err(at)?;
        let team_j = TeamId::new(&self.team_j).map_err(at)?;
        let record =
            MatchRecord::new(edition, team_i, team_j, self.score_i as u32, self.score_j as u32, stage)
                .map_err(at)?;
        if self.sport.trim().is_empty() {
            return Err(Error::validation_at(line, "sport name is empty"));
        }
        Ok((self.sport.trim().to_string(), record))
    }

    fn from_record(sport: &str, rec: &MatchRecord) -> RawRow {
        RawRow {
            sport: sport.to_string(),
            competition: rec.edition.competition.clone(),
            edition_year: rec.edition.year,
            stage: rec.stage.as_str().to_string(),
            team_i: rec.team_i.name().to_string(),
            team_j: rec.team_j.name().to_string(),
            score_i: rec.score_i as i64,
            score_j: rec.score_j as i64,
        }
    }
}

/// Load and validate a match corpus from disk.
pub fn load_matches(path: &Path, format: CorpusFormat) -> Result<MatchScoreDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read '{}': {e}", path.display())))?;
    match format {
        CorpusFormat::Csv => parse_matches_csv(&text),
        CorpusFormat::Json => parse_matches_json(&text),
    }
}

/// Parse the CSV match schema. Line numbers in errors are 1-based and count
/// the header line.
pub fn parse_matches_csv(text: &str) -> Result<MatchScoreDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(csv_error)?;
        let got: Vec<&str> = headers.iter().collect();
        if got != MATCHES_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {:?}, got {:?}", MATCHES_HEADER.join(","), got.join(",")),
            });
        }
    }
    let mut rows = Vec::new();
    for result in reader.deserialize::<RawRow>() {
        let raw = result.map_err(csv_error)?;
        // the line that produced the record we just consumed
        let line = rows.len() + 2;
        rows.push(raw.validate(line)?);
    }
    MatchScoreDataset::from_rows(rows)
}

/// Parse the JSON mirror: an array of objects with the CSV field names.
pub fn parse_matches_json(text: &str) -> Result<MatchScoreDataset> {
    let raw: Vec<RawRow> = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let rows = raw
        .iter()
        .enumerate()
        .map(|(i, r)| r.validate(i + 1))
        .collect::<Result<Vec<_>>>()?;
    MatchScoreDataset::from_rows(rows)
}

pub fn write_matches_csv(dataset: &MatchScoreDataset) -> String {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(MATCHES_HEADER).expect("in-memory write");
    for rec in dataset.records() {
        let sport = dataset.sport_of(&rec.edition).unwrap_or("");
        writer.serialize(RawRow::from_record(sport, rec)).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_matches_json(dataset: &MatchScoreDataset) -> String {
    let rows: Vec<RawRow> = dataset
        .records()
        .iter()
        .map(|rec| RawRow::from_record(dataset.sport_of(&rec.edition).unwrap_or(""), rec))
        .collect();
    let mut out = serde_json::to_string_pretty(&rows).expect("serializable");
    out.push('\n');
    out
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, message: err.to_string() }
}

/// Year list for one competition, as published.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub sport: String,
    pub competition: String,
    pub edition_years: Vec<i32>,
}

impl CorpusManifest {
    pub fn new(sport: String, competition: String, edition_years: Vec<i32>) -> Result<Self> {
        if edition_years.is_empty() {
            return Err(Error::validation(format!("manifest for '{competition}' has no years")));
        }
        if edition_years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "manifest years for '{competition}' are not strictly increasing"
            )));
        }
        Ok(CorpusManifest { sport, competition, edition_years })
    }
}

/// Bundled per-sport threshold and underdog scores at the three reference
/// decay factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UasRow {
    pub sport: String,
    pub tau: f64,
    /// scores at lambda = 1, 0.5, 0 in that order
    pub uas: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UasTable {
    pub rows: Vec<UasRow>,
}

impl UasTable {
    pub const LAMBDAS: [f64; 3] = [1.0, 0.5, 0.0];

    pub fn row(&self, sport: &str) -> Option<&UasRow> {
        self.rows.iter().find(|r| r.sport.eq_ignore_ascii_case(sport))
    }

    /// The lambda = 1 column, ordered to match the given sport labels.
    pub fn lambda1_column(&self, sports: &[String]) -> Result<Vec<f64>> {
        sports
            .iter()
            .map(|s| {
                self.row(s)
                    .map(|r| r.uas[0])
                    .ok_or_else(|| Error::validation(format!("no bundled UAS row for sport '{s}'")))
            })
            .collect()
    }
}

fn bundled_text(name: &str, embedded: &'static str) -> Result<String> {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => {
            let path = Path::new(&dir).join(name);
            std::fs::read_to_string(&path)
                .map_err(|e| Error::validation(format!("cannot read '{}': {e}", path.display())))
        }
        None => Ok(embedded.to_string()),
    }
}

/// The published factor tables: (normalized, raw, companions).
///
/// Values are stored verbatim at the published precision; they are not
/// re-derived (see `factors::build_factors_pipeline` for the derivation).
pub fn load_bundled_factors() -> Result<(FactorsTable, FactorsTable, CompanionFactors)> {
    let normalized = parse_factors_csv(&bundled_text("factors_normalized.csv", FACTORS_NORMALIZED_CSV)?)?;
    let raw = parse_factors_csv(&bundled_text("factors_raw.csv", FACTORS_RAW_CSV)?)?;
    let companions = parse_companions_csv(&bundled_text("companion_factors.csv", COMPANION_FACTORS_CSV)?)?;
    Ok((normalized, raw, companions))
}

/// The published per-sport tau and underdog scores at lambda in {1, 0.5, 0}.
pub fn load_bundled_uas() -> Result<UasTable> {
    parse_uas_csv(&bundled_text("uas_table.csv", UAS_TABLE_CSV)?)
}

/// The published competition/edition-year lists.
pub fn load_bundled_editions() -> Result<Vec<CorpusManifest>> {
    parse_editions_csv(&bundled_text("editions.csv", EDITIONS_CSV)?)
}

/// The bundled three-sport synthetic corpus used by the end-to-end smoke run.
pub fn load_bundled_corpus() -> Result<MatchScoreDataset> {
    parse_matches_csv(&bundled_text("synthetic_corpus.csv", SYNTHETIC_CORPUS_CSV)?)
}

fn parse_cell(text: &str, line: usize) -> Result<Option<f64>> {
    let t = text.trim();
    if t == MISSING {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse { line, message: format!("bad number '{t}'") })
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => MISSING.to_string(),
    }
}

/// Parse a labeled factor table: first column holds the row label, the header
/// names the factor columns, `NA` marks missing cells.
pub fn parse_factors_csv(text: &str) -> Result<FactorsTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or(Error::Parse { line: 1, message: "empty table".into() })?;
    let cols: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    if cols.is_empty() {
        return Err(Error::Parse { line: 1, message: "table header has no factor columns".into() });
    }
    let mut row_labels = Vec::new();
    let mut cells = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() + 1 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {} fields, got {}", cols.len() + 1, fields.len()),
            });
        }
        row_labels.push(fields[0].trim().to_string());
        for f in &fields[1..] {
            cells.push(parse_cell(f, idx + 1)?);
        }
    }
    FactorsTable::new(row_labels, cols, cells)
}

pub fn write_factors_csv(table: &FactorsTable) -> String {
    let mut out = String::from("sport,");
    out.push_str(&table.col_labels().join(","));
    out.push('\n');
    for (r, label) in table.row_labels().iter().enumerate() {
        out.push_str(label);
        for c in 0..table.n_cols() {
            out.push(',');
            out.push_str(&fmt_cell(table.get(r, c)));
        }
        out.push('\n');
    }
    out
}

pub fn parse_companions_csv(text: &str) -> Result<CompanionFactors> {
    let table = parse_factors_csv(text)?;
    let col = |label: &str| -> Result<Vec<Option<f64>>> {
        table
            .column_by_label(label)
            .ok_or_else(|| Error::validation(format!("companion table is missing column '{label}'")))
    };
    CompanionFactors::new(
        table.row_labels().to_vec(),
        col("BW")?,
        col("PBP")?,
        col("PE")?,
        col("SF")?,
    )
}

pub fn write_companions_csv(companions: &CompanionFactors) -> String {
    let mut out = String::from("sport,BW,PBP,PE,SF\n");
    for (i, sport) in companions.sports.iter().enumerate() {
        out.push_str(&format!(
            "{sport},{},{},{},{}\n",
            fmt_cell(companions.ball_weight[i]),
            fmt_cell(companions.ball_possession[i]),
            fmt_cell(companions.experience[i]),
            fmt_cell(companions.scoring_frequency[i]),
        ));
    }
    out
}

pub fn parse_uas_csv(text: &str) -> Result<UasTable> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse { line: idx + 1, message: format!("bad number '{s}'") })
        };
        rows.push(UasRow {
            sport: fields[0].trim().to_string(),
            tau: num(fields[1])?,
            uas: [num(fields[2])?, num(fields[3])?, num(fields[4])?],
        });
    }
    if rows.is_empty() {
        return Err(Error::validation("UAS table has no rows"));
    }
    Ok(UasTable { rows })
}

pub fn write_uas_csv(table: &UasTable) -> String {
    let mut out = String::from("sport,tau,uas_lambda_1,uas_lambda_0.5,uas_lambda_0\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.sport, row.tau, row.uas[0], row.uas[1], row.uas[2]
        ));
    }
    out
}

pub fn parse_editions_csv(text: &str) -> Result<Vec<CorpusManifest>> {
    let mut grouped: BTreeMap<(String, String), Vec<i32>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let year: i32 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("bad year '{}'", fields[2]),
        })?;
        grouped
            .entry((fields[0].trim().to_string(), fields[1].trim().to_string()))
            .or_default()
            .push(year);
    }
    grouped
        .into_iter()
        .map(|((sport, competition), years)| CorpusManifest::new(sport, competition, years))
        .collect()
}

pub fn write_editions_csv(manifests: &[CorpusManifest]) -> String {
    let mut out = String::from("sport,competition,year\n");
    for m in manifests {
        for year in &m.edition_years {
            out.push_str(&format!("{},{},{year}\n", m.sport, m.competition));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
sport,competition,edition_year,stage,team_i,team_j,score_i,score_j
soccer,FIFA World Cup,1930,Group,URUGUAY,Peru,1,0
soccer,FIFA World Cup,1930,Group,Chile,Mexico,3,0
soccer,FIFA World Cup,1930,Final,Uruguay,Argentina,4,2
";

    #[test]
    fn parses_schema_row() {
        let ds = parse_matches_csv(SAMPLE).unwrap();
        assert_eq!(ds.len(), 3);
        let e = EditionId::new("FIFA World Cup", 1930).unwrap();
        let first = &ds.matches_of(&e)[0];
        assert_eq!(first.team_i, TeamId::new("uruguay").unwrap());
        assert_eq!(first.score_i, 1);
        assert_eq!(ds.sport_of(&e), Some("soccer"));
    }

    #[test]
    fn distinct_team_count_matches_set_union() {
        let ds = parse_matches_csv(SAMPLE).unwrap();
        let e = EditionId::new("FIFA World Cup", 1930).unwrap();
        // brute-force union over the raw rows
        let mut union: Vec<String> = Vec::new();
        for rec in ds.matches_of(&e) {
            for name in [rec.team_i.folded(), rec.team_j.folded()] {
                if !union.iter().any(|u| u == name) {
                    union.push(name.to_string());
                }
            }
        }
        assert_eq!(ds.teams_of(&e).len(), union.len());
        assert_eq!(union.len(), 6);
    }

    #[test]
    fn negative_score_is_validation_error_with_line() {
        let text = "\
sport,competition,edition_year,stage,team_i,team_j,score_i,score_j
soccer,Cup,1930,Group,A,B,-1,0
";
        match parse_matches_csv(text) {
            Err(Error::Validation { line: Some(2), message }) => {
                assert!(message.contains("negative score"), "{message}");
            }
            other => panic!("expected validation error at line 2, got {other:?}"),
        }
    }

    #[test]
    fn unknown_stage_rejected() {
        let text = "\
sport,competition,edition_year,stage,team_i,team_j,score_i,score_j
soccer,Cup,1930,Playoff,A,B,1,0
";
        assert!(matches!(parse_matches_csv(text), Err(Error::Validation { .. })));
    }

    #[test]
    fn malformed_row_is_parse_error() {
        let text = "\
sport,competition,edition_year,stage,team_i,team_j,score_i,score_j
soccer,Cup,1930,Group,A,B,one,0
";
        assert!(matches!(parse_matches_csv(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_preserves_dataset() {
        let ds = parse_matches_csv(SAMPLE).unwrap();
        let written = write_matches_csv(&ds);
        let back = parse_matches_csv(&written).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn json_mirror_round_trip() {
        let ds = parse_matches_csv(SAMPLE).unwrap();
        let text = write_matches_json(&ds);
        let back = parse_matches_json(&text).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn load_is_deterministic() {
        assert_eq!(parse_matches_csv(SAMPLE).unwrap(), parse_matches_csv(SAMPLE).unwrap());
    }

    #[test]
    fn bundled_normalized_spot_values() {
        let (normalized, raw, _) = load_bundled_factors().unwrap();
        assert_eq!(normalized.cell("Soccer", "SI"), Some(Some(1.0)));
        assert_eq!(normalized.cell("Soccer", "GS/NPG"), Some(Some(1.0)));
        assert_eq!(normalized.cell("Basketball", "BB"), Some(Some(1.0)));
        assert_eq!(normalized.cell("Ice Hockey", "BB"), Some(Some(0.0)));
        assert_eq!(raw.cell("Rugby", "PP"), Some(Some(29.17)));
        assert_eq!(raw.cell("Cricket", "SF"), Some(None));
    }

    #[test]
    fn bundled_uas_spot_values() {
        let table = load_bundled_uas().unwrap();
        assert_eq!(table.rows.len(), 12);
        let soccer = table.row("Soccer").unwrap();
        assert_eq!(soccer.tau, 7.0);
        assert_eq!(soccer.uas, [0.36, 0.27, 0.22]);
        assert_eq!(table.row("Water Polo").unwrap().tau, 2.5);
        assert_eq!(table.row("Roller Hockey").unwrap().uas[2], 0.01);
    }

    #[test]
    fn bundled_editions_manifest() {
        let manifests = load_bundled_editions().unwrap();
        assert_eq!(manifests.len(), 12);
        let soccer = manifests
            .iter()
            .find(|m| m.sport == "Soccer")
            .expect("soccer manifest");
        assert_eq!(soccer.competition, "FIFA World Cup");
        assert_eq!(soccer.edition_years.first(), Some(&1930));
        assert_eq!(soccer.edition_years.len(), 19);
    }

    #[test]
    fn bundled_tables_round_trip_bit_exactly() {
        let (normalized, raw, companions) = load_bundled_factors().unwrap();
        assert_eq!(write_factors_csv(&normalized), FACTORS_NORMALIZED_CSV);
        assert_eq!(write_factors_csv(&raw), FACTORS_RAW_CSV);
        assert_eq!(write_companions_csv(&companions), COMPANION_FACTORS_CSV);
        assert_eq!(write_uas_csv(&load_bundled_uas().unwrap()), UAS_TABLE_CSV);
        assert_eq!(write_editions_csv(&load_bundled_editions().unwrap()), EDITIONS_CSV);
    }
}
