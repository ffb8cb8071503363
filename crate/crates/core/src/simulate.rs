//! Seeded synthetic tournament generator plus a deliberately plain oracle
//! that recounts underdog successes by scanning the corpus. The oracle
//! shares no code with the ranking/underdog pipeline so the two can check
//! each other.
//!
//! Randomness comes from xoshiro256** seeded through SplitMix64. Every match
//! draws from its own substream keyed by (seed, edition index, match index),
//! so a corpus is a pure function of its config and outcome coupling holds
//! match-by-match when only the probabilities change.

use crate::data_model::{EditionId, MatchRecord, MatchScoreDataset, Stage, TeamId};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// xoshiro256** (Blackman & Vigna), seeded via SplitMix64.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for word in &mut s {
            *word = splitmix64(&mut sm);
        }
        // xoshiro must not start from the all-zero state
        if s == [0, 0, 0, 0] {
            s[0] = GOLDEN;
        }
        Xoshiro256StarStar { s }
    }

    /// Substream `stream` of `seed`: the child seed is the SplitMix64 hash
    /// of `seed ^ stream * golden`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut sm = seed ^ stream.wrapping_mul(GOLDEN);
        Self::from_seed(splitmix64(&mut sm))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n) by rejection sampling.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TournamentFormat {
    RoundRobin,
    GroupsPlusKnockout,
}

impl TournamentFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "round-robin" => Ok(TournamentFormat::RoundRobin),
            "groups-knockout" => Ok(TournamentFormat::GroupsPlusKnockout),
            other => Err(Error::InvalidConfig(format!(
                "unknown tournament structure '{other}' (expected round-robin or groups-knockout)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_teams: usize,
    pub n_editions: usize,
    /// per-team strength; higher is stronger
    pub strengths: Vec<f64>,
    /// chance the nominally weaker side wins
    pub upset_probability: f64,
    pub draw_probability: f64,
    pub format: TournamentFormat,
    pub seed: u64,
    pub sport: String,
    pub competition: String,
}

impl SimConfig {
    /// Config with strictly decreasing strengths (team 0 strongest), no
    /// upsets and no draws.
    pub fn new(n_teams: usize, n_editions: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_teams,
            n_editions,
            strengths: (0..n_teams).map(|i| (n_teams - i) as f64).collect(),
            upset_probability: 0.0,
            draw_probability: 0.0,
            format: TournamentFormat::RoundRobin,
            seed,
            sport: "synthetic".to_string(),
            competition: "Synthetic Cup".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_teams < 4 {
            return Err(Error::InvalidConfig(format!("need at least 4 teams, got {}", self.n_teams)));
        }
        if self.n_editions < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 editions, got {}",
                self.n_editions
            )));
        }
        if self.strengths.len() != self.n_teams {
            return Err(Error::InvalidConfig(format!(
                "{} strengths for {} teams",
                self.strengths.len(),
                self.n_teams
            )));
        }
        if self.strengths.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("strengths must be finite".into()));
        }
        if !(0.0..=0.5).contains(&self.upset_probability) {
            return Err(Error::InvalidConfig(format!(
                "upset probability must be in [0, 0.5], got {}",
                self.upset_probability
            )));
        }
        if !(0.0..1.0).contains(&self.draw_probability) {
            return Err(Error::InvalidConfig(format!(
                "draw probability must be in [0, 1), got {}",
                self.draw_probability
            )));
        }
        if self.upset_probability + self.draw_probability > 1.0 {
            return Err(Error::InvalidConfig(
                "upset probability + draw probability must be <= 1".into(),
            ));
        }
        if self.format == TournamentFormat::GroupsPlusKnockout {
            let advancing = self.n_teams / 2;
            if self.n_teams % 4 != 0 || !advancing.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "groups-knockout needs a team count in {{4, 8, 16, 32, ...}}, got {}",
                    self.n_teams
                )));
            }
        }
        Ok(())
    }

    fn team_name(&self, index: usize) -> String {
        let width = self.n_teams.to_string().len();
        format!("Team {:0width$}", index + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    WinFirst,
    WinSecond,
    Draw,
}

/// One simulated match on its own RNG substream. Pushes the record and
/// returns (winner index, score_a, score_b); a drawn match reports the
/// first team as "winner" (callers that need a winner disable draws).
#[allow(clippy::too_many_arguments)]
fn play_match(
    config: &SimConfig,
    edition: &EditionId,
    edition_idx: usize,
    match_idx: &mut u64,
    rows: &mut Vec<(String, MatchRecord)>,
    a: usize,
    b: usize,
    stage: Stage,
    allow_draw: bool,
) -> Result<(usize, u32, u32)> {
    let edition_seed = Xoshiro256StarStar::substream(config.seed, edition_idx as u64).next_u64();
    let mut rng = Xoshiro256StarStar::substream(edition_seed, *match_idx);
    *match_idx += 1;

    let outcome = if allow_draw && rng.next_f64() < config.draw_probability {
        Outcome::Draw
    } else {
        let upset = rng.next_f64() < config.upset_probability;
        // strength ties treat the later index as the weaker side
        let first_is_stronger = config.strengths[a] > config.strengths[b]
            || (config.strengths[a] == config.strengths[b] && a < b);
        match (first_is_stronger, upset) {
            (true, false) | (false, true) => Outcome::WinFirst,
            _ => Outcome::WinSecond,
        }
    };
    let (score_a, score_b) = match outcome {
        Outcome::Draw => {
            let s = rng.next_below(4) as u32;
            (s, s)
        }
        _ => {
            // winner scores 1 plus a geometric tail, loser strictly fewer
            let mut winner = 1u32;
            while winner < 6 && rng.next_f64() < 0.5 {
                winner += 1;
            }
            let loser = rng.next_below(winner as u64) as u32;
            if outcome == Outcome::WinFirst {
                (winner, loser)
            } else {
                (loser, winner)
            }
        }
    };
    rows.push((
        config.sport.clone(),
        MatchRecord::new(
            edition.clone(),
            TeamId::new(&config.team_name(a))?,
            TeamId::new(&config.team_name(b))?,
            score_a,
            score_b,
            stage,
        )?,
    ));
    let winner = if outcome == Outcome::WinSecond { b } else { a };
    Ok((winner, score_a, score_b))
}

fn stage_for_knockout_round(teams_left: usize) -> Stage {
    match teams_left {
        2 => Stage::Final,
        4 => Stage::Semifinal,
        8 => Stage::Quarterfinal,
        16 => Stage::RoundOf16,
        _ => Stage::Other,
    }
}

/// Generate a deterministic synthetic corpus.
pub fn generate_corpus(config: &SimConfig) -> Result<MatchScoreDataset> {
    config.validate()?;
    let mut rows: Vec<(String, MatchRecord)> = Vec::new();
    for edition_idx in 0..config.n_editions {
        let edition = EditionId::new(&config.competition, 2001 + edition_idx as i32)?;
        let mut match_idx = 0u64;
        match config.format {
            TournamentFormat::RoundRobin => {
                for a in 0..config.n_teams {
                    for b in (a + 1)..config.n_teams {
                        play_match(
                            config,
                            &edition,
                            edition_idx,
                            &mut match_idx,
                            &mut rows,
                            a,
                            b,
                            Stage::Group,
                            true,
                        )?;
                    }
                }
            }
            TournamentFormat::GroupsPlusKnockout => {
                let n_groups = config.n_teams / 4;
                let mut winners = Vec::with_capacity(n_groups);
                let mut runners_up = Vec::with_capacity(n_groups);
                for g in 0..n_groups {
                    let members: Vec<usize> = (4 * g..4 * g + 4).collect();
                    // standings by points 3/1/0, then total score, then index
                    let mut points: HashMap<usize, (u32, u32)> =
                        members.iter().map(|&m| (m, (0, 0))).collect();
                    for i in 0..4 {
                        for j in (i + 1)..4 {
                            let (a, b) = (members[i], members[j]);
                            let (_, sa, sb) = play_match(
                                config,
                                &edition,
                                edition_idx,
                                &mut match_idx,
                                &mut rows,
                                a,
                                b,
                                Stage::Group,
                                true,
                            )?;
                            let ea = points.get_mut(&a).unwrap();
                            ea.0 += if sa > sb { 3 } else if sa == sb { 1 } else { 0 };
                            ea.1 += sa;
                            let eb = points.get_mut(&b).unwrap();
                            eb.0 += if sb > sa { 3 } else if sb == sa { 1 } else { 0 };
                            eb.1 += sb;
                        }
                    }
                    let mut standing = members.clone();
                    standing.sort_by_key(|m| {
                        let (p, s) = points[m];
                        (std::cmp::Reverse(p), std::cmp::Reverse(s), *m)
                    });
                    winners.push(standing[0]);
                    runners_up.push(standing[1]);
                }
                // pair each group winner with the adjacent group's runner-up
                let mut bracket = Vec::with_capacity(2 * n_groups);
                for g in 0..n_groups {
                    bracket.push(winners[g]);
                    bracket.push(runners_up[if n_groups > 1 { g ^ 1 } else { g }]);
                }
                while bracket.len() > 1 {
                    let stage = stage_for_knockout_round(bracket.len());
                    let mut next = Vec::with_capacity(bracket.len() / 2);
                    for pair in bracket.chunks(2) {
                        let (winner, _, _) = play_match(
                            config,
                            &edition,
                            edition_idx,
                            &mut match_idx,
                            &mut rows,
                            pair[0],
                            pair[1],
                            stage,
                            false,
                        )?;
                        next.push(winner);
                    }
                    bracket = next;
                }
            }
        }
    }
    MatchScoreDataset::from_rows(rows)
}

/// Exact aggregated underdog counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounts {
    pub weak_successes: u64,
    pub weak_matches: u64,
}

impl OracleCounts {
    pub fn value(&self) -> f64 {
        self.weak_successes as f64 / self.weak_matches as f64
    }
}

/// Brute-force recount of the aggregated underdog score, written as a flat
/// scan with its own tallying, sorting and recursion. Only the default
/// policies are covered (absent teams reset, unseen teams appended, gap
/// inclusive at tau).
pub fn oracle_uas(corpus: &MatchScoreDataset, lambda: f64, tau: f64) -> Result<OracleCounts> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    if !(tau > 0.0) {
        return Err(Error::validation(format!("tau must be positive, got {tau}")));
    }
    let editions = corpus.editions();
    if editions.len() < 2 {
        return Err(Error::InvalidConfig("oracle needs at least 2 editions".into()));
    }
    if corpus.sports().len() != 1 {
        return Err(Error::InvalidConfig("oracle expects a single-sport corpus".into()));
    }

    // accumulated ranking value per team (folded name -> value)
    let mut accumulated: HashMap<String, f64> = HashMap::new();
    let mut successes = 0u64;
    let mut weak_total = 0u64;

    for (h, edition) in editions.iter().enumerate() {
        if h > 0 {
            // previous weighted ranking as a sorted list: weight desc, name asc
            let mut board: Vec<(String, f64)> =
                accumulated.iter().map(|(k, v)| (k.clone(), *v)).collect();
            board.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            let lookup = |name: &str| board.iter().position(|(n, _)| n == name).map(|i| i + 1);
            for rec in corpus.matches_of(edition) {
                let (na, nb) = (rec.team_i.folded(), rec.team_j.folded());
                let (pa, pb) = match (lookup(na), lookup(nb)) {
                    (Some(pa), Some(pb)) => (pa, pb),
                    (Some(pa), None) => (pa, board.len() + 1),
                    (None, Some(pb)) => (board.len() + 1, pb),
                    (None, None) => {
                        if na < nb {
                            (board.len() + 1, board.len() + 2)
                        } else {
                            (board.len() + 2, board.len() + 1)
                        }
                    }
                };
                let gap = if pa > pb { pa - pb } else { pb - pa };
                if (gap as f64) >= tau {
                    weak_total += 1;
                    let (weak_score, other_score) = if pa > pb {
                        (rec.score_i, rec.score_j)
                    } else {
                        (rec.score_j, rec.score_i)
                    };
                    if weak_score >= other_score {
                        successes += 1;
                    }
                }
            }
        }

        // plain tally pass for this edition
        #[derive(Clone, Default)]
        struct Line {
            played: u32,
            wins: u32,
            draws: u32,
            losses: u32,
            score: u32,
        }
        let mut lines: HashMap<String, Line> = HashMap::new();
        for rec in corpus.matches_of(edition) {
            for (name, own, other) in [
                (rec.team_i.folded(), rec.score_i, rec.score_j),
                (rec.team_j.folded(), rec.score_j, rec.score_i),
            ] {
                let line = lines.entry(name.to_string()).or_default();
                line.played += 1;
                line.score += own;
                if own > other {
                    line.wins += 1;
                } else if own == other {
                    line.draws += 1;
                } else {
                    line.losses += 1;
                }
            }
        }
        // selection sort under the five criteria plus name
        let mut entries: Vec<(String, Line)> = lines.into_iter().collect();
        let n = entries.len();
        for i in 0..n {
            let mut best = i;
            for j in (i + 1)..n {
                let (x, y) = (&entries[j], &entries[best]);
                let better = if x.1.played != y.1.played {
                    x.1.played > y.1.played
                } else if x.1.wins != y.1.wins {
                    x.1.wins > y.1.wins
                } else if x.1.draws != y.1.draws {
                    x.1.draws > y.1.draws
                } else if x.1.losses != y.1.losses {
                    x.1.losses < y.1.losses
                } else if x.1.score != y.1.score {
                    x.1.score > y.1.score
                } else {
                    x.0 < y.0
                };
                if better {
                    best = j;
                }
            }
            entries.swap(i, best);
        }
        // apply the recursion for this edition; absent teams reset to zero
        let mut next: HashMap<String, f64> = accumulated.keys().map(|k| (k.clone(), 0.0)).collect();
        for (position, (name, _)) in entries.iter().enumerate() {
            let prev = accumulated.get(name).copied().unwrap_or(0.0);
            next.insert(name.clone(), (n - (position + 1)) as f64 + lambda * prev);
        }
        accumulated = next;
    }
    if weak_total == 0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(OracleCounts { weak_successes: successes, weak_matches: weak_total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::write_matches_csv;

    #[test]
    fn rng_streams_are_deterministic_and_distinct() {
        let mut a = Xoshiro256StarStar::from_seed(42);
        let mut b = Xoshiro256StarStar::from_seed(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Xoshiro256StarStar::from_seed(43);
        assert_ne!(a.next_u64(), c.next_u64());
        let mut s0 = Xoshiro256StarStar::substream(42, 0);
        let mut s1 = Xoshiro256StarStar::substream(42, 1);
        assert_ne!(s0.next_u64(), s1.next_u64());
        let mut r = Xoshiro256StarStar::from_seed(7);
        for _ in 0..1000 {
            let f = r.next_f64();
            assert!((0.0..1.0).contains(&f));
            assert!(r.next_below(10) < 10);
        }
    }

    #[test]
    fn same_seed_bit_identical_corpora() {
        let config = SimConfig {
            upset_probability: 0.3,
            draw_probability: 0.2,
            ..SimConfig::new(8, 5, 99)
        };
        let a = generate_corpus(&config).unwrap();
        let b = generate_corpus(&config).unwrap();
        assert_eq!(write_matches_csv(&a), write_matches_csv(&b));
        let different = generate_corpus(&SimConfig { seed: 100, ..config }).unwrap();
        assert_ne!(write_matches_csv(&a), write_matches_csv(&different));
    }

    #[test]
    fn zero_probabilities_mean_stronger_always_wins() {
        let config = SimConfig::new(6, 4, 5);
        let corpus = generate_corpus(&config).unwrap();
        assert_eq!(corpus.len(), 15 * 4);
        for rec in corpus.records() {
            assert!(!rec.is_draw());
            // smaller padded name = stronger = must win
            if rec.team_i.name() < rec.team_j.name() {
                assert!(rec.score_i > rec.score_j);
            } else {
                assert!(rec.score_j > rec.score_i);
            }
        }
    }

    #[test]
    fn empirical_upset_rate_concentrates() {
        let config = SimConfig { upset_probability: 0.3, ..SimConfig::new(24, 40, 2024) };
        let corpus = generate_corpus(&config).unwrap();
        let mut upsets = 0usize;
        let mut total = 0usize;
        for rec in corpus.records() {
            total += 1;
            let first_stronger = rec.team_i.name() < rec.team_j.name();
            let first_won = rec.score_i > rec.score_j;
            if first_stronger != first_won {
                upsets += 1;
            }
        }
        assert!(total > 10_000);
        let n = total as f64;
        let sigma = (0.3 * 0.7 / n).sqrt();
        let rate = upsets as f64 / n;
        assert!((rate - 0.3).abs() <= 3.0 * sigma, "rate {rate} vs 0.3 +- {}", 3.0 * sigma);
    }

    #[test]
    fn monotone_upsets_under_coupling() {
        let base = SimConfig::new(10, 6, 31);
        let mut previous = 0usize;
        for p in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let corpus =
                generate_corpus(&SimConfig { upset_probability: p, ..base.clone() }).unwrap();
            let upsets = corpus
                .records()
                .iter()
                .filter(|rec| {
                    let first_stronger = rec.team_i.name() < rec.team_j.name();
                    let first_won = rec.score_i > rec.score_j;
                    !rec.is_draw() && first_stronger != first_won
                })
                .count();
            assert!(upsets >= previous, "p = {p}: {upsets} < {previous}");
            previous = upsets;
        }
    }

    #[test]
    fn knockout_format_produces_stages() {
        let config = SimConfig {
            format: TournamentFormat::GroupsPlusKnockout,
            ..SimConfig::new(16, 3, 11)
        };
        let corpus = generate_corpus(&config).unwrap();
        let edition = &corpus.editions()[0];
        let stages: Vec<Stage> = corpus.matches_of(edition).iter().map(|r| r.stage).collect();
        assert_eq!(stages.iter().filter(|s| **s == Stage::Group).count(), 24);
        assert_eq!(stages.iter().filter(|s| **s == Stage::Quarterfinal).count(), 4);
        assert_eq!(stages.iter().filter(|s| **s == Stage::Semifinal).count(), 2);
        assert_eq!(stages.iter().filter(|s| **s == Stage::Final).count(), 1);
        // knockout never draws
        for rec in corpus.matches_of(edition) {
            if rec.stage != Stage::Group {
                assert!(!rec.is_draw());
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate_corpus(&SimConfig::new(3, 2, 0)).is_err());
        assert!(generate_corpus(&SimConfig::new(4, 1, 0)).is_err());
        assert!(generate_corpus(&SimConfig {
            upset_probability: 0.6,
            ..SimConfig::new(4, 2, 0)
        })
        .is_err());
        assert!(generate_corpus(&SimConfig {
            draw_probability: 0.8,
            upset_probability: 0.4,
            ..SimConfig::new(4, 2, 0)
        })
        .is_err());
        assert!(generate_corpus(&SimConfig {
            format: TournamentFormat::GroupsPlusKnockout,
            ..SimConfig::new(12, 2, 0)
        })
        .is_err());
    }

    #[test]
    fn oracle_zero_for_deterministic_corpus() {
        let corpus = generate_corpus(&SimConfig::new(8, 5, 17)).unwrap();
        let counts = oracle_uas(&corpus, 1.0, 3.0).unwrap();
        assert_eq!(counts.weak_successes, 0);
        assert!(counts.weak_matches > 0);
        assert_eq!(counts.value(), 0.0);
    }

    #[test]
    fn oracle_fair_coin_near_half() {
        let config = SimConfig { upset_probability: 0.5, ..SimConfig::new(12, 30, 7) };
        let corpus = generate_corpus(&config).unwrap();
        let counts = oracle_uas(&corpus, 1.0, 1.0).unwrap();
        let n = counts.weak_matches as f64;
        let sigma = (0.25 / n).sqrt();
        assert!(
            (counts.value() - 0.5).abs() <= 3.0 * sigma,
            "uas {} over {} matches",
            counts.value(),
            counts.weak_matches
        );
    }
}
