//! Domain types shared by every other module.
//!
//! All types here are plain values: immutable after construction, no I/O,
//! safe to share across threads.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

/// Team identity. The display name keeps its original casing; equality,
/// ordering and hashing are case-insensitive on the trimmed name.
#[derive(Debug, Clone)]
pub struct TeamId {
    name: String,
    folded: String,
}

impl TeamId {
    pub fn new(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::validation("team name is empty"));
        }
        Ok(TeamId { name: trimmed.to_string(), folded: trimmed.to_lowercase() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Lowercased form used for comparisons and deterministic tie-breaks.
    pub fn folded(&self) -> &str {
        &self.folded
    }
}

impl PartialEq for TeamId {
    fn eq(&self, other: &Self) -> bool {
        self.folded == other.folded
    }
}
impl Eq for TeamId {}

impl PartialOrd for TeamId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TeamId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.folded.cmp(&other.folded)
    }
}

impl std::hash::Hash for TeamId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.folded.hash(state);
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for TeamId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name)
    }
}

impl<'de> Deserialize<'de> for TeamId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        TeamId::new(&raw).map_err(D::Error::custom)
    }
}

/// One edition of a competition, identified by (competition, year).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditionId {
    pub competition: String,
    pub year: i32,
}

impl EditionId {
    pub fn new(competition: &str, year: i32) -> Result<Self> {
        let competition = competition.trim();
        if competition.is_empty() {
            return Err(Error::validation("competition name is empty"));
        }
        if year <= 0 {
            return Err(Error::validation(format!("edition year must be positive, got {year}")));
        }
        Ok(EditionId { competition: competition.to_string(), year })
    }
}

impl PartialOrd for EditionId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EditionId {
    fn cmp(&self, other: &Self) -> Ordering {
        // chronological first, competition name as a stable tie-break
        self.year.cmp(&other.year).then_with(|| self.competition.cmp(&other.competition))
    }
}

impl fmt::Display for EditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.competition, self.year)
    }
}

/// Competition phase a match belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Group,
    RoundOf16,
    Quarterfinal,
    Semifinal,
    Final,
    Other,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Group, Stage::RoundOf16, Stage::Quarterfinal, Stage::Semifinal, Stage::Final, Stage::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Group => "Group",
            Stage::RoundOf16 => "RoundOf16",
            Stage::Quarterfinal => "Quarterfinal",
            Stage::Semifinal => "Semifinal",
            Stage::Final => "Final",
            Stage::Other => "Other",
        }
    }

    pub fn parse(text: &str) -> Result<Stage> {
        let t = text.trim();
        Stage::ALL
            .iter()
            .copied()
            .find(|s| s.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::validation(format!("unknown stage '{t}'")))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single match: two teams, their final scores, the edition and stage.
///
/// Draws are `score_i == score_j`. Knockout matches decided in extra time or
/// penalties are expected to carry the final decisive score; nothing here
/// infers winners.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub edition: EditionId,
    pub team_i: TeamId,
    pub team_j: TeamId,
    pub score_i: u32,
    pub score_j: u32,
    pub stage: Stage,
}

impl MatchRecord {
    pub fn new(
        edition: EditionId,
        team_i: TeamId,
        team_j: TeamId,
        score_i: u32,
        score_j: u32,
        stage: Stage,
    ) -> Result<Self> {
        if team_i == team_j {
            return Err(Error::validation(format!("a team cannot play itself: '{}'", team_i.name())));
        }
        Ok(MatchRecord { edition, team_i, team_j, score_i, score_j, stage })
    }

    pub fn is_draw(&self) -> bool {
        self.score_i == self.score_j
    }

    /// Score obtained by `team` in this match, if it played.
    pub fn score_of(&self, team: &TeamId) -> Option<u32> {
        if *team == self.team_i {
            Some(self.score_i)
        } else if *team == self.team_j {
            Some(self.score_j)
        } else {
            None
        }
    }

    pub fn opponent_of(&self, team: &TeamId) -> Option<&TeamId> {
        if *team == self.team_i {
            Some(&self.team_j)
        } else if *team == self.team_j {
            Some(&self.team_i)
        } else {
            None
        }
    }
}

/// A validated corpus of matches, grouped by edition.
///
/// Records are stored grouped per edition in first-appearance order, with the
/// original row order preserved inside each edition. Every edition is tagged
/// with the sport of its competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScoreDataset {
    records: Vec<MatchRecord>,
    /// competition name -> sport name (one sport per competition)
    sport_by_competition: BTreeMap<String, String>,
    #[serde(skip)]
    edition_spans: HashMap<EditionId, (usize, usize)>,
}

impl MatchScoreDataset {
    /// Build a dataset from (sport, record) rows, validating the corpus
    /// invariants: no exact duplicate rows, one sport per competition.
    pub fn from_rows(rows: Vec<(String, MatchRecord)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("corpus has no rows"));
        }
        let mut sport_by_competition: BTreeMap<String, String> = BTreeMap::new();
        let mut seen: HashSet<String> = HashSet::with_capacity(rows.len());
        for (idx, (sport, rec)) in rows.iter().enumerate() {
            let sport = sport.trim();
            if sport.is_empty() {
                return Err(Error::validation_at(idx + 1, "sport name is empty"));
            }
            match sport_by_competition.get(&rec.edition.competition) {
                Some(existing) if existing != sport => {
                    return Err(Error::validation(format!(
                        "competition '{}' is tagged with two sports: '{existing}' and '{sport}'",
                        rec.edition.competition
                    )));
                }
                Some(_) => {}
                None => {
                    sport_by_competition.insert(rec.edition.competition.clone(), sport.to_string());
                }
            }
            let key = duplicate_key(sport, rec);
            if !seen.insert(key) {
                return Err(Error::validation(format!(
                    "duplicate record in {}: {} vs {} {}-{} ({})",
                    rec.edition,
                    rec.team_i.name(),
                    rec.team_j.name(),
                    rec.score_i,
                    rec.score_j,
                    rec.stage
                )));
            }
        }
        // group by edition: editions keep first-appearance order, rows keep
        // their relative order within an edition
        let mut first_seen: HashMap<EditionId, usize> = HashMap::new();
        for (_, rec) in &rows {
            let next = first_seen.len();
            first_seen.entry(rec.edition.clone()).or_insert(next);
        }
        let mut records: Vec<MatchRecord> = rows.into_iter().map(|(_, r)| r).collect();
        records.sort_by_key(|r| first_seen[&r.edition]);
        let edition_spans = index_spans(&records);
        Ok(MatchScoreDataset { records, sport_by_competition, edition_spans })
    }

    pub fn records(&self) -> &[MatchRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct sports, sorted.
    pub fn sports(&self) -> Vec<&str> {
        let mut sports: Vec<&str> = self
            .sport_by_competition
            .values()
            .map(|s| s.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        sports.sort_unstable();
        sports
    }

    pub fn sport_of(&self, edition: &EditionId) -> Option<&str> {
        self.sport_by_competition.get(&edition.competition).map(|s| s.as_str())
    }

    /// All editions in chronological order (year, then competition name).
    pub fn editions(&self) -> Vec<EditionId> {
        let mut out: Vec<EditionId> = self.edition_spans.keys().cloned().collect();
        out.sort();
        out
    }

    /// Editions of one sport in chronological order.
    pub fn editions_for_sport(&self, sport: &str) -> Vec<EditionId> {
        self.editions()
            .into_iter()
            .filter(|e| self.sport_of(e).map(|s| s == sport).unwrap_or(false))
            .collect()
    }

    pub fn matches_of(&self, edition: &EditionId) -> &[MatchRecord] {
        match self.edition_spans.get(edition) {
            Some(&(start, len)) => &self.records[start..start + len],
            None => &[],
        }
    }

    /// Distinct teams of one edition (the set `P_e`), in name order.
    pub fn teams_of(&self, edition: &EditionId) -> BTreeSet<&TeamId> {
        let mut teams = BTreeSet::new();
        for rec in self.matches_of(edition) {
            teams.insert(&rec.team_i);
            teams.insert(&rec.team_j);
        }
        teams
    }

    /// Sub-corpus containing only the given sport's records.
    pub fn filter_sport(&self, sport: &str) -> Result<MatchScoreDataset> {
        let rows: Vec<(String, MatchRecord)> = self
            .records
            .iter()
            .filter(|r| self.sport_of(&r.edition).map(|s| s == sport).unwrap_or(false))
            .map(|r| (sport.to_string(), r.clone()))
            .collect();
        if rows.is_empty() {
            return Err(Error::validation(format!("corpus has no matches for sport '{sport}'")));
        }
        MatchScoreDataset::from_rows(rows)
    }

    /// Rebuild the derived edition index; needed after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.edition_spans = index_spans(&self.records);
    }
}

fn duplicate_key(sport: &str, rec: &MatchRecord) -> String {
    format!(
        "{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}",
        sport.to_lowercase(),
        rec.edition.competition,
        rec.edition.year,
        rec.stage,
        rec.team_i.folded(),
        rec.team_j.folded(),
        rec.score_i,
        rec.score_j
    )
}

fn index_spans(records: &[MatchRecord]) -> HashMap<EditionId, (usize, usize)> {
    let mut spans: HashMap<EditionId, (usize, usize)> = HashMap::new();
    let mut start = 0;
    while start < records.len() {
        let edition = records[start].edition.clone();
        let mut end = start + 1;
        while end < records.len() && records[end].edition == edition {
            end += 1;
        }
        spans.insert(edition, (start, end - start));
        start = end;
    }
    spans
}

/// Per-team outcome counts within one edition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamTally {
    pub team: TeamId,
    pub played: u32,
    pub wins: u32,
    pub draws: u32,
    pub losses: u32,
    pub total_score: u32,
}

impl TeamTally {
    pub fn new(team: TeamId) -> Self {
        TeamTally { team, played: 0, wins: 0, draws: 0, losses: 0, total_score: 0 }
    }
}

/// The ranking `R_e` of one edition: entry 0 is position 1, the strongest team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditionRanking {
    pub edition: EditionId,
    pub entries: Vec<TeamTally>,
}

impl EditionRanking {
    /// 1-based position of a team, if present.
    pub fn position(&self, team: &TeamId) -> Option<usize> {
        self.entries.iter().position(|t| t.team == *team).map(|i| i + 1)
    }

    pub fn team_count(&self) -> usize {
        self.entries.len()
    }
}

/// The weighted historical ranking `W_{<=e}`: all teams seen up to an edition,
/// ordered by their decayed accumulated ranking value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRanking {
    pub up_to: EditionId,
    pub lambda: f64,
    /// (team, weight), weight nonincreasing; ties broken by name.
    pub entries: Vec<(TeamId, f64)>,
}

impl WeightedRanking {
    pub fn position(&self, team: &TeamId) -> Option<usize> {
        self.entries.iter().position(|(t, _)| t == team).map(|i| i + 1)
    }

    pub fn weight_of(&self, team: &TeamId) -> Option<f64> {
        self.entries.iter().find(|(t, _)| t == team).map(|(_, w)| *w)
    }

    pub fn team_count(&self) -> usize {
        self.entries.len()
    }
}

/// Underdog score of a single edition. `uas` is `None` when no match of the
/// edition involved a weak team (undefined denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditionUas {
    pub edition: EditionId,
    pub uas: Option<f64>,
    pub weak_matches: u32,
    pub weak_successes: u32,
}

/// Full per-sport underdog report: per-edition values plus the averaged and
/// aggregated summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UasReport {
    pub sport: String,
    pub lambda: f64,
    pub tau: f64,
    pub per_edition: Vec<EditionUas>,
    pub average: f64,
    pub aggregated: f64,
}

impl UasReport {
    pub fn total_weak_matches(&self) -> u64 {
        self.per_edition.iter().map(|e| e.weak_matches as u64).sum()
    }

    pub fn total_weak_successes(&self) -> u64 {
        self.per_edition.iter().map(|e| e.weak_successes as u64).sum()
    }
}

/// A labeled numeric table with missing cells; used for the per-sport factor
/// datasets (12 sports x 14 factors) and their raw counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsTable {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    /// row-major, `None` marks a missing cell
    cells: Vec<Option<f64>>,
}

impl FactorsTable {
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        cells: Vec<Option<f64>>,
    ) -> Result<Self> {
        if cells.len() != row_labels.len() * col_labels.len() {
            return Err(Error::validation(format!(
                "table needs {} cells, got {}",
                row_labels.len() * col_labels.len(),
                cells.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in row_labels.iter().chain(col_labels.iter()) {
            if label.trim().is_empty() {
                return Err(Error::validation("empty table label"));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::validation(format!("duplicate table label '{label}'")));
            }
        }
        Ok(FactorsTable { row_labels, col_labels, cells })
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.col_labels.len() + col]
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_labels.iter().position(|l| l.eq_ignore_ascii_case(label))
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.col_labels.iter().position(|l| l == label)
    }

    /// Cell lookup by labels; outer `None` means unknown label.
    pub fn cell(&self, row_label: &str, col_label: &str) -> Option<Option<f64>> {
        let r = self.row_index(row_label)?;
        let c = self.col_index(col_label)?;
        Some(self.get(r, c))
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_by_label(&self, label: &str) -> Option<Vec<Option<f64>>> {
        self.col_index(label).map(|c| self.column(c))
    }

    /// New table with the same row labels and the given columns.
    pub fn from_columns(
        row_labels: Vec<String>,
        columns: Vec<(String, Vec<Option<f64>>)>,
    ) -> Result<Self> {
        let n_rows = row_labels.len();
        for (label, col) in &columns {
            if col.len() != n_rows {
                return Err(Error::validation(format!(
                    "column '{label}' has {} cells, expected {n_rows}",
                    col.len()
                )));
            }
        }
        let col_labels: Vec<String> = columns.iter().map(|(l, _)| l.clone()).collect();
        let mut cells = vec![None; n_rows * col_labels.len()];
        for (c, (_, col)) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                cells[r * col_labels.len() + c] = *v;
            }
        }
        FactorsTable::new(row_labels, col_labels, cells)
    }
}

/// The four measured quantities that the derived factors invert:
/// ball weight, ball possession, player experience, scoring frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionFactors {
    pub sports: Vec<String>,
    pub ball_weight: Vec<Option<f64>>,
    pub ball_possession: Vec<Option<f64>>,
    pub experience: Vec<Option<f64>>,
    pub scoring_frequency: Vec<Option<f64>>,
}

impl CompanionFactors {
    pub fn new(
        sports: Vec<String>,
        ball_weight: Vec<Option<f64>>,
        ball_possession: Vec<Option<f64>>,
        experience: Vec<Option<f64>>,
        scoring_frequency: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = sports.len();
        for (name, col) in [
            ("BW", &ball_weight),
            ("PBP", &ball_possession),
            ("PE", &experience),
            ("SF", &scoring_frequency),
        ] {
            if col.len() != n {
                return Err(Error::validation(format!("companion column {name} has wrong length")));
            }
            if col.iter().flatten().any(|v| *v <= 0.0) {
                return Err(Error::validation(format!("companion column {name} has a non-positive value")));
            }
        }
        Ok(CompanionFactors { sports, ball_weight, ball_possession, experience, scoring_frequency })
    }
}

/// Five-number summary of rank differences across a sport's matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiffSummary {
    pub sport: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub count: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edition(year: i32) -> EditionId {
        EditionId::new("Test Cup", year).unwrap()
    }

    fn rec(year: i32, a: &str, b: &str, sa: u32, sb: u32) -> MatchRecord {
        MatchRecord::new(
            edition(year),
            TeamId::new(a).unwrap(),
            TeamId::new(b).unwrap(),
            sa,
            sb,
            Stage::Group,
        )
        .unwrap()
    }

    #[test]
    fn team_id_case_insensitive() {
        let a = TeamId::new("URUGUAY").unwrap();
        let b = TeamId::new("  Uruguay ").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.name(), "URUGUAY");
        assert_eq!(b.name(), "Uruguay");
    }

    #[test]
    fn team_id_rejects_empty() {
        assert!(TeamId::new("   ").is_err());
    }

    #[test]
    fn match_rejects_self_play() {
        let e = edition(1930);
        let t = TeamId::new("Peru").unwrap();
        let t2 = TeamId::new("PERU").unwrap();
        assert!(MatchRecord::new(e, t, t2, 1, 0, Stage::Group).is_err());
    }

    #[test]
    fn stage_parse_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::parse(s.as_str()).unwrap(), s);
        }
        assert_eq!(Stage::parse("group").unwrap(), Stage::Group);
        assert!(Stage::parse("playoff").is_err());
    }

    #[test]
    fn dataset_groups_by_edition() {
        let rows = vec![
            ("soccer".to_string(), rec(1930, "A", "B", 1, 0)),
            ("soccer".to_string(), rec(1934, "A", "C", 2, 2)),
            ("soccer".to_string(), rec(1930, "C", "D", 3, 1)),
        ];
        let ds = MatchScoreDataset::from_rows(rows).unwrap();
        assert_eq!(ds.matches_of(&edition(1930)).len(), 2);
        assert_eq!(ds.matches_of(&edition(1934)).len(), 1);
        // within-edition order preserved
        assert_eq!(ds.matches_of(&edition(1930))[1].team_i.name(), "C");
        assert_eq!(ds.editions(), vec![edition(1930), edition(1934)]);
        assert_eq!(ds.teams_of(&edition(1930)).len(), 4);
    }

    #[test]
    fn dataset_rejects_duplicates() {
        let rows = vec![
            ("soccer".to_string(), rec(1930, "A", "B", 1, 0)),
            ("soccer".to_string(), rec(1930, "a", "b", 1, 0)),
        ];
        assert!(MatchScoreDataset::from_rows(rows).is_err());
    }

    #[test]
    fn dataset_rejects_conflicting_sport() {
        let rows = vec![
            ("soccer".to_string(), rec(1930, "A", "B", 1, 0)),
            ("futsal".to_string(), rec(1934, "A", "B", 1, 0)),
        ];
        assert!(MatchScoreDataset::from_rows(rows).is_err());
    }

    #[test]
    fn factors_table_lookup() {
        let t = FactorsTable::from_columns(
            vec!["Soccer".into(), "Rugby".into()],
            vec![("BL".into(), vec![Some(0.38), Some(0.37)]), ("BV".into(), vec![Some(0.67), None])],
        )
        .unwrap();
        assert_eq!(t.cell("soccer", "BL"), Some(Some(0.38)));
        assert_eq!(t.cell("Rugby", "BV"), Some(None));
        assert_eq!(t.cell("Rugby", "XX"), None);
    }
}
