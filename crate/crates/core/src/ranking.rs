//! Per-edition team rankings and the decay-weighted historical ranking.
//!
//! An edition ranking orders teams by, in priority order: matches played,
//! victories and draws (all descending), losses (ascending), then total score
//! (descending). The paper leaves ties after these five criteria unresolved;
//! a case-insensitive name comparison closes the order so results are
//! reproducible across platforms.
//!
//! The weighted ranking accumulates `N_e - position` per edition, decaying
//! the accumulated value by `lambda` each step. A team absent from an
//! edition has its value reset to zero (the literal recursion);
//! [`AbsentRule::Carry`] keeps the decayed value instead.

use crate::data_model::{EditionId, EditionRanking, MatchScoreDataset, TeamId, TeamTally, WeightedRanking};
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

/// Fold an edition's matches into per-team tallies, in team-name order.
pub fn team_tallies(dataset: &MatchScoreDataset, edition: &EditionId) -> Result<Vec<TeamTally>> {
    let matches = dataset.matches_of(edition);
    if matches.is_empty() {
        return Err(Error::EmptyEdition(edition.clone()));
    }
    let mut tallies: BTreeMap<TeamId, TeamTally> = BTreeMap::new();
    for rec in matches {
        for (team, own, other) in [
            (&rec.team_i, rec.score_i, rec.score_j),
            (&rec.team_j, rec.score_j, rec.score_i),
        ] {
            let tally = tallies.entry(team.clone()).or_insert_with(|| TeamTally::new(team.clone()));
            tally.played += 1;
            tally.total_score += own;
            match own.cmp(&other) {
                Ordering::Greater => tally.wins += 1,
                Ordering::Equal => tally.draws += 1,
                Ordering::Less => tally.losses += 1,
            }
        }
    }
    Ok(tallies.into_values().collect())
}

/// Total order on tallies: stronger teams compare `Less` (sort first).
pub fn compare_tallies(a: &TeamTally, b: &TeamTally) -> Ordering {
    b.played
        .cmp(&a.played)
        .then_with(|| b.wins.cmp(&a.wins))
        .then_with(|| b.draws.cmp(&a.draws))
        .then_with(|| a.losses.cmp(&b.losses))
        .then_with(|| b.total_score.cmp(&a.total_score))
        .then_with(|| a.team.cmp(&b.team))
}

/// Build the ranking `R_e` for one edition.
pub fn compute_edition_ranking(
    dataset: &MatchScoreDataset,
    edition: &EditionId,
) -> Result<EditionRanking> {
    let mut entries = team_tallies(dataset, edition)?;
    entries.sort_by(compare_tallies);
    Ok(EditionRanking { edition: edition.clone(), entries })
}

/// Rankings for every edition of a sport, in chronological order.
pub fn compute_sport_rankings(
    dataset: &MatchScoreDataset,
    sport: &str,
) -> Result<Vec<EditionRanking>> {
    let editions = dataset.editions_for_sport(sport);
    if editions.is_empty() {
        return Err(Error::validation(format!("corpus has no matches for sport '{sport}'")));
    }
    editions.iter().map(|e| compute_edition_ranking(dataset, e)).collect()
}

/// What happens to a team's accumulated value in an edition it skips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentRule {
    /// Literal recursion: the value resets to zero.
    #[default]
    Reset,
    /// Alternative reading: the value keeps decaying by lambda.
    Carry,
}

/// Running accumulator for the weighted ranking, fed one edition at a time.
#[derive(Debug, Clone)]
pub struct WeightedRankingBuilder {
    lambda: f64,
    absent: AbsentRule,
    weights: HashMap<TeamId, f64>,
    up_to: Option<EditionId>,
}

impl WeightedRankingBuilder {
    pub fn new(lambda: f64, absent: AbsentRule) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(WeightedRankingBuilder { lambda, absent, weights: HashMap::new(), up_to: None })
    }

    /// Fold in the next edition (editions must arrive in chronological order).
    pub fn push(&mut self, ranking: &EditionRanking) {
        let n = ranking.entries.len();
        let mut next: HashMap<TeamId, f64> = self
            .weights
            .iter()
            .map(|(team, w)| {
                let carried = match self.absent {
                    AbsentRule::Reset => 0.0,
                    AbsentRule::Carry => self.lambda * w,
                };
                (team.clone(), carried)
            })
            .collect();
        for (idx, tally) in ranking.entries.iter().enumerate() {
            let position = idx + 1;
            let base = (n - position) as f64;
            let prev = self.weights.get(&tally.team).copied().unwrap_or(0.0);
            next.insert(tally.team.clone(), base + self.lambda * prev);
        }
        self.weights = next;
        self.up_to = Some(ranking.edition.clone());
    }

    pub fn is_empty(&self) -> bool {
        self.up_to.is_none()
    }

    /// Materialize the current ranking, sorted by weight descending with
    /// name as the tie-break.
    pub fn snapshot(&self) -> Result<WeightedRanking> {
        let up_to = self
            .up_to
            .clone()
            .ok_or_else(|| Error::validation("weighted ranking over an empty edition list"))?;
        let mut entries: Vec<(TeamId, f64)> =
            self.weights.iter().map(|(t, w)| (t.clone(), *w)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(WeightedRanking { up_to, lambda: self.lambda, entries })
    }
}

/// Weighted ranking over a chronological list of edition rankings, with the
/// literal absent-team reset.
pub fn compute_weighted_ranking(
    rankings: &[EditionRanking],
    lambda: f64,
) -> Result<WeightedRanking> {
    compute_weighted_ranking_with(rankings, lambda, AbsentRule::Reset)
}

pub fn compute_weighted_ranking_with(
    rankings: &[EditionRanking],
    lambda: f64,
    absent: AbsentRule,
) -> Result<WeightedRanking> {
    let mut builder = WeightedRankingBuilder::new(lambda, absent)?;
    for ranking in rankings {
        builder.push(ranking);
    }
    builder.snapshot()
}

/// Anything with 1-based team positions.
pub trait Ranked {
    fn position_of(&self, team: &TeamId) -> Option<usize>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Ranked for EditionRanking {
    fn position_of(&self, team: &TeamId) -> Option<usize> {
        self.position(team)
    }
    fn len(&self) -> usize {
        self.team_count()
    }
}

impl Ranked for WeightedRanking {
    fn position_of(&self, team: &TeamId) -> Option<usize> {
        self.position(team)
    }
    fn len(&self) -> usize {
        self.team_count()
    }
}

/// 1-based position of a team in a ranking.
pub fn rank_position<R: Ranked>(team: &TeamId, ranking: &R) -> Result<usize> {
    ranking.position_of(team).ok_or_else(|| Error::TeamNotFound(team.name().to_string()))
}

/// Absolute difference of two teams' positions.
pub fn rank_difference<R: Ranked>(a: &TeamId, b: &TeamId, ranking: &R) -> Result<usize> {
    let pa = rank_position(a, ranking)?;
    let pb = rank_position(b, ranking)?;
    Ok(pa.abs_diff(pb))
}
