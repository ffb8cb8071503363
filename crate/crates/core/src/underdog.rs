//! Weak-team identification and underdog achievement scores.
//!
//! A team is weak in a match when its position in the weighted ranking built
//! from all *previous* editions trails the opponent's position by at least
//! `tau`. The per-edition score is then the fraction of matches involving a
//! weak team in which that team won or drew. `tau` itself is the median of
//! the per-edition rank-difference distribution of the sport.

use crate::data_model::{
    EditionId, EditionRanking, EditionUas, MatchRecord, MatchScoreDataset, RankDiffSummary, TeamId,
    UasReport, WeightedRanking,
};
use crate::error::{Error, Result};
use crate::ranking::{compute_sport_rankings, AbsentRule, WeightedRankingBuilder};

/// Interpolated quantile (the R-7 / numpy-default convention) over a sorted
/// sample: index h = (n-1)p, linearly interpolating between neighbors.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Five-number summary of |c(i,R_e) - c(j,R_e)| over every match of the
/// given editions.
pub fn rank_diff_distribution(
    dataset: &MatchScoreDataset,
    rankings: &[EditionRanking],
    sport: &str,
) -> Result<RankDiffSummary> {
    let mut diffs: Vec<f64> = Vec::new();
    for ranking in rankings {
        for rec in dataset.matches_of(&ranking.edition) {
            let pi = ranking
                .position(&rec.team_i)
                .ok_or_else(|| Error::TeamNotFound(rec.team_i.name().to_string()))?;
            let pj = ranking
                .position(&rec.team_j)
                .ok_or_else(|| Error::TeamNotFound(rec.team_j.name().to_string()))?;
            diffs.push(pi.abs_diff(pj) as f64);
        }
    }
    if diffs.is_empty() {
        return Err(Error::validation(format!("no matches for sport '{sport}'")));
    }
    diffs.sort_by(f64::total_cmp);
    Ok(RankDiffSummary {
        sport: sport.to_string(),
        min: diffs[0],
        q1: quantile_linear(&diffs, 0.25),
        median: quantile_linear(&diffs, 0.5),
        q3: quantile_linear(&diffs, 0.75),
        max: diffs[diffs.len() - 1],
        count: diffs.len(),
    })
}

/// The per-sport weak-team threshold: the median rank difference.
pub fn select_tau(summary: &RankDiffSummary) -> f64 {
    summary.median
}

/// How to position teams that have never appeared in a past edition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnseenRule {
    /// Append them below the last weighted entry (weight 0, name order).
    #[default]
    Append,
    /// Skip matches involving an unseen team entirely.
    Exclude,
}

/// Pipeline switches; the defaults follow the printed formulas.
#[derive(Debug, Clone, Copy, Default)]
pub struct UasOptions {
    pub absent: AbsentRule,
    pub unseen: UnseenRule,
    /// Divide the average by |E|-1 even when some editions have no weak
    /// match, instead of averaging only the defined editions.
    pub strict_mean: bool,
}

/// Positions of the two teams of a match in the weighted ranking, with
/// unseen teams appended below the last entry in name order.
fn match_positions(
    rec: &MatchRecord,
    weighted: &WeightedRanking,
    unseen: UnseenRule,
) -> Option<(usize, usize)> {
    let n = weighted.team_count();
    match (weighted.position(&rec.team_i), weighted.position(&rec.team_j)) {
        (Some(pi), Some(pj)) => Some((pi, pj)),
        (Some(_), None) | (None, Some(_)) | (None, None) if unseen == UnseenRule::Exclude => None,
        (Some(pi), None) => Some((pi, n + 1)),
        (None, Some(pj)) => Some((n + 1, pj)),
        (None, None) => {
            if rec.team_i < rec.team_j {
                Some((n + 1, n + 2))
            } else {
                Some((n + 2, n + 1))
            }
        }
    }
}

/// The weak team of a match, if the weighted-rank gap reaches `tau`
/// (inclusive). Returns the lower-ranked team.
pub fn identify_weak(
    rec: &MatchRecord,
    weighted: &WeightedRanking,
    tau: f64,
    unseen: UnseenRule,
) -> Option<TeamId> {
    debug_assert!(tau > 0.0);
    let (pi, pj) = match_positions(rec, weighted, unseen)?;
    let d = pi.abs_diff(pj);
    if (d as f64) < tau {
        return None;
    }
    if pi > pj {
        Some(rec.team_i.clone())
    } else {
        Some(rec.team_j.clone())
    }
}

/// Underdog score of one edition against the prior weighted ranking.
pub fn uas_edition(
    dataset: &MatchScoreDataset,
    edition: &EditionId,
    prior: &WeightedRanking,
    tau: f64,
    unseen: UnseenRule,
) -> Result<EditionUas> {
    let matches = dataset.matches_of(edition);
    if matches.is_empty() {
        return Err(Error::EmptyEdition(edition.clone()));
    }
    let mut weak_matches = 0u32;
    let mut weak_successes = 0u32;
    for rec in matches {
        if let Some(weak) = identify_weak(rec, prior, tau, unseen) {
            weak_matches += 1;
            let own = rec.score_of(&weak).expect("weak team plays in its own match");
            let other = if weak == rec.team_i { rec.score_j } else { rec.score_i };
            if own >= other {
                weak_successes += 1;
            }
        }
    }
    let uas = if weak_matches > 0 { Some(weak_successes as f64 / weak_matches as f64) } else { None };
    Ok(EditionUas { edition: edition.clone(), uas, weak_matches, weak_successes })
}

/// Mean of the defined per-edition scores. With `strict` the sum is divided
/// by the number of editions h = 2..|E| regardless of definedness, matching
/// the printed 1/(|E|-1) factor.
pub fn uas_average(per_edition: &[EditionUas], strict: bool) -> Result<f64> {
    let defined: Vec<f64> = per_edition.iter().filter_map(|e| e.uas).collect();
    if defined.is_empty() {
        return Err(Error::AllUndefined);
    }
    let denom = if strict { per_edition.len() } else { defined.len() };
    Ok(defined.iter().sum::<f64>() / denom as f64)
}

/// Pooled score: total weak successes over total weak matches.
pub fn uas_aggregated(per_edition: &[EditionUas]) -> Result<f64> {
    let successes: u64 = per_edition.iter().map(|e| e.weak_successes as u64).sum();
    let matches: u64 = per_edition.iter().map(|e| e.weak_matches as u64).sum();
    if matches == 0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(successes as f64 / matches as f64)
}

/// Run the full underdog pipeline for one sport: edition rankings, tau from
/// the rank-difference median (unless overridden), then per-edition scores
/// evaluated against the weighted ranking of all earlier editions.
pub fn uas_report(
    dataset: &MatchScoreDataset,
    sport: &str,
    lambda: f64,
    tau_override: Option<f64>,
    options: &UasOptions,
) -> Result<UasReport> {
    let rankings = compute_sport_rankings(dataset, sport)?;
    if rankings.len() < 2 {
        return Err(Error::NoPriorRanking(rankings[0].edition.clone()));
    }
    let tau = match tau_override {
        Some(t) => {
            if !(t > 0.0) {
                return Err(Error::validation(format!("tau must be positive, got {t}")));
            }
            t
        }
        None => select_tau(&rank_diff_distribution(dataset, &rankings, sport)?),
    };
    let mut builder = WeightedRankingBuilder::new(lambda, options.absent)?;
    let mut per_edition = Vec::with_capacity(rankings.len() - 1);
    for ranking in &rankings {
        if !builder.is_empty() {
            let prior = builder.snapshot()?;
            per_edition.push(uas_edition(dataset, &ranking.edition, &prior, tau, options.unseen)?);
        }
        builder.push(ranking);
    }
    let average = uas_average(&per_edition, options.strict_mean)?;
    let aggregated = uas_aggregated(&per_edition)?;
    Ok(UasReport { sport: sport.to_string(), lambda, tau, per_edition, average, aggregated })
}
