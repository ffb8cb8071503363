//! Command-line surface: `rank`, `uas`, `stats`, `factors`, `pca`, `corr`,
//! `laney`, `simulate`.
//!
//! Every command prints its primary table to stdout (CSV by default, JSON
//! with `--format json`) and optionally writes the full file set into
//! `--output <dir>`. Floats are printed with a fixed precision of six
//! decimals so repeated runs are byte-identical. Exit codes: 0 success,
//! 1 internal error, 2 input or validation error.

use crate::data_model::{FactorsTable, MatchScoreDataset, UasReport};
use crate::error::{Error, Result};
use crate::factors::ImputePolicy;
use crate::ingest::{self, CorpusFormat};
use crate::multivariate::{self, PcaResult};
use crate::ranking::{self, AbsentRule};
use crate::simulate::{generate_corpus, SimConfig, TournamentFormat};
use crate::stats;
use crate::underdog::{self, UasOptions, UnseenRule};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "underdog",
    version,
    about = "Team rankings, underdog achievement scores and randomness-factor analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format for stdout
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Directory to write the full result file set into
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineFlags {
    /// Decay factor for the weighted ranking
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Override the per-sport weak-team threshold (default: median rank difference)
    #[arg(long)]
    tau: Option<f64>,
    /// Keep decaying absent teams instead of resetting them to zero
    #[arg(long)]
    carry_absent: bool,
    /// Skip matches with teams never seen in past editions
    #[arg(long)]
    exclude_unseen: bool,
    /// Divide the UAS average by |E|-1 even when editions are undefined
    #[arg(long)]
    strict_mean: bool,
}

impl PipelineFlags {
    fn options(&self) -> UasOptions {
        UasOptions {
            absent: if self.carry_absent { AbsentRule::Carry } else { AbsentRule::Reset },
            unseen: if self.exclude_unseen { UnseenRule::Exclude } else { UnseenRule::Append },
            strict_mean: self.strict_mean,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-edition rankings and the decay-weighted historical ranking
    Rank {
        corpus: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        carry_absent: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Underdog achievement scores per sport
    Uas {
        corpus: PathBuf,
        /// Decay factor; repeat the flag to evaluate several values
        #[arg(long = "lambda", action = clap::ArgAction::Append)]
        lambdas: Vec<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        carry_absent: bool,
        #[arg(long)]
        exclude_unseen: bool,
        #[arg(long)]
        strict_mean: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Confidence intervals, Kruskal-Wallis, Dunn and Laney limits across sports
    Stats {
        corpus: PathBuf,
        #[command(flatten)]
        pipeline: PipelineFlags,
        /// Confidence level for the per-sport mean intervals
        #[arg(long, default_value_t = 0.95)]
        ci_level: f64,
        /// Use normal instead of Student-t intervals
        #[arg(long)]
        ci_normal: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Derive the normalized factor table from raw measurements
    Factors {
        /// Raw factor table (default: bundled)
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Companion table (default: bundled)
        #[arg(long)]
        companions: Option<PathBuf>,
        #[arg(long, default_value = "published")]
        policy: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Principal component analysis of a factor table
    Pca {
        /// Factor table (default: bundled normalized table)
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        standardize: bool,
        /// Join the bundled UAS (lambda = 1) column before the analysis
        #[arg(long)]
        with_uas: bool,
        /// Multiplier applied to loading vectors in the biplot
        #[arg(long, default_value_t = 2.0)]
        loading_scale: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Pearson correlation matrix of a factor table
    Corr {
        /// Factor table (default: bundled normalized table)
        #[arg(long)]
        table: Option<PathBuf>,
        /// Join the bundled UAS (lambda = 1) column before correlating
        #[arg(long)]
        with_uas: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Laney p'-chart over the per-sport aggregated scores
    Laney {
        corpus: PathBuf,
        #[command(flatten)]
        pipeline: PipelineFlags,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Generate a synthetic seeded corpus
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        teams: usize,
        #[arg(long, default_value_t = 6)]
        editions: usize,
        #[arg(long, default_value_t = 0.0)]
        upset: f64,
        #[arg(long, default_value_t = 0.0)]
        draw: f64,
        /// round-robin or groups-knockout
        #[arg(long, default_value = "round-robin")]
        structure: String,
        /// Comma-separated strengths (default: evenly spaced, team 1 strongest)
        #[arg(long)]
        strengths: Option<String>,
        #[arg(long, default_value = "synthetic")]
        sport: String,
        #[arg(long, default_value = "Synthetic Cup")]
        competition: String,
        #[command(flatten)]
        out: OutputArgs,
    },
}

/// Run the CLI against explicit arguments, writing primary output to `out`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            if code == 0 {
                // --help / --version go to the primary stream
                let _ = write!(out, "{err}");
            } else {
                eprint!("{err}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Convenience wrapper used by tests: captures stdout bytes.
pub fn run_capture(args: &[&str]) -> (u8, Vec<u8>) {
    let mut buffer = Vec::new();
    let code = run(args.iter().map(|s| s.to_string()), &mut buffer);
    (code, buffer)
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt6(v),
        None => ingest::MISSING.to_string(),
    }
}

fn load_corpus(path: &Path) -> Result<MatchScoreDataset> {
    ingest::load_matches(path, CorpusFormat::from_path(path))
}

fn load_table_or_bundled(path: Option<&PathBuf>) -> Result<FactorsTable> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::validation(format!("cannot read '{}': {e}", p.display())))?;
            ingest::parse_factors_csv(&text)
        }
        None => Ok(ingest::load_bundled_factors()?.0),
    }
}

fn write_output_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

fn emit(
    out: &mut dyn Write,
    output_dir: Option<&PathBuf>,
    format: OutputFormat,
    csv_text: &str,
    json_text: &str,
    files: &[(&str, &str)],
) -> Result<()> {
    match format {
        OutputFormat::Csv => out.write_all(csv_text.as_bytes())?,
        OutputFormat::Json => out.write_all(json_text.as_bytes())?,
    }
    if let Some(dir) = output_dir {
        for (name, content) in files {
            write_output_file(dir, name, content)?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Rank { corpus, lambda, carry_absent, out: output } => {
            cmd_rank(&corpus, lambda, carry_absent, output, out)
        }
        Command::Uas { corpus, lambdas, tau, carry_absent, exclude_unseen, strict_mean, out: output } => {
            let flags = PipelineFlags { lambda: 1.0, tau, carry_absent, exclude_unseen, strict_mean };
            let lambdas = if lambdas.is_empty() { vec![1.0] } else { lambdas };
            cmd_uas(&corpus, &lambdas, &flags, output, out)
        }
        Command::Stats { corpus, pipeline, ci_level, ci_normal, out: output } => {
            cmd_stats(&corpus, &pipeline, ci_level, ci_normal, output, out)
        }
        Command::Factors { raw, companions, policy, out: output } => {
            cmd_factors(raw.as_ref(), companions.as_ref(), &policy, output, out)
        }
        Command::Pca { table, standardize, with_uas, loading_scale, out: output } => {
            cmd_pca(table.as_ref(), standardize, with_uas, loading_scale, output, out)
        }
        Command::Corr { table, with_uas, out: output } => {
            cmd_corr(table.as_ref(), with_uas, output, out)
        }
        Command::Laney { corpus, pipeline, out: output } => {
            cmd_laney(&corpus, &pipeline, output, out)
        }
        Command::Simulate {
            seed,
            teams,
            editions,
            upset,
            draw,
            structure,
            strengths,
            sport,
            competition,
            out: output,
        } => {
            let strengths = match strengths {
                Some(text) => text
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidConfig(format!("bad strength value '{s}'"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?,
                None => (0..teams).map(|i| (teams - i) as f64).collect(),
            };
            let config = SimConfig {
                n_teams: teams,
                n_editions: editions,
                strengths,
                upset_probability: upset,
                draw_probability: draw,
                format: TournamentFormat::parse(&structure)?,
                seed,
                sport,
                competition,
            };
            cmd_simulate(&config, output, out)
        }
    }
}

// ---------------------------------------------------------------- rank

#[derive(Serialize)]
struct RankRow {
    sport: String,
    competition: String,
    year: i32,
    position: usize,
    team: String,
    played: u32,
    wins: u32,
    draws: u32,
    losses: u32,
    total_score: u32,
}

#[derive(Serialize)]
struct WeightRow {
    sport: String,
    competition: String,
    up_to_year: i32,
    position: usize,
    team: String,
    weight: f64,
}

#[derive(Serialize)]
struct RankOutput {
    edition_rankings: Vec<RankRow>,
    weighted_rankings: Vec<WeightRow>,
}

fn cmd_rank(
    corpus_path: &Path,
    lambda: f64,
    carry_absent: bool,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let dataset = load_corpus(corpus_path)?;
    let absent = if carry_absent { AbsentRule::Carry } else { AbsentRule::Reset };
    let sports: Vec<String> = dataset.sports().iter().map(|s| s.to_string()).collect();
    let per_sport: Vec<(Vec<RankRow>, Vec<WeightRow>)> = sports
        .par_iter()
        .map(|sport| -> Result<(Vec<RankRow>, Vec<WeightRow>)> {
            let rankings = ranking::compute_sport_rankings(&dataset, sport)?;
            let mut rank_rows = Vec::new();
            for r in &rankings {
                for (idx, tally) in r.entries.iter().enumerate() {
                    rank_rows.push(RankRow {
                        sport: sport.clone(),
                        competition: r.edition.competition.clone(),
                        year: r.edition.year,
                        position: idx + 1,
                        team: tally.team.name().to_string(),
                        played: tally.played,
                        wins: tally.wins,
                        draws: tally.draws,
                        losses: tally.losses,
                        total_score: tally.total_score,
                    });
                }
            }
            let weighted = ranking::compute_weighted_ranking_with(&rankings, lambda, absent)?;
            let weight_rows = weighted
                .entries
                .iter()
                .enumerate()
                .map(|(idx, (team, weight))| WeightRow {
                    sport: sport.clone(),
                    competition: weighted.up_to.competition.clone(),
                    up_to_year: weighted.up_to.year,
                    position: idx + 1,
                    team: team.name().to_string(),
                    weight: round6(*weight),
                })
                .collect();
            Ok((rank_rows, weight_rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut result = RankOutput { edition_rankings: Vec::new(), weighted_rankings: Vec::new() };
    for (ranks, weights) in per_sport {
        result.edition_rankings.extend(ranks);
        result.weighted_rankings.extend(weights);
    }

    let mut rankings_csv =
        String::from("sport,competition,year,position,team,played,wins,draws,losses,total_score\n");
    for r in &result.edition_rankings {
        rankings_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.sport, r.competition, r.year, r.position, r.team, r.played, r.wins, r.draws,
            r.losses, r.total_score
        ));
    }
    let mut weighted_csv = String::from("sport,competition,up_to_year,position,team,weight\n");
    for w in &result.weighted_rankings {
        weighted_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            w.sport,
            w.competition,
            w.up_to_year,
            w.position,
            w.team,
            fmt6(w.weight)
        ));
    }
    let stdout_csv = format!("# edition_rankings\n{rankings_csv}\n# weighted_ranking\n{weighted_csv}");
    let json = to_json(&result);
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &stdout_csv,
        &json,
        &[
            ("rankings.csv", &rankings_csv),
            ("weighted_ranking.csv", &weighted_csv),
            ("rank.json", &json),
        ],
    )
}

// ---------------------------------------------------------------- uas

#[derive(Serialize)]
struct UasEditionRow {
    sport: String,
    competition: String,
    year: i32,
    lambda: f64,
    uas: Option<f64>,
    weak_matches: u32,
    weak_successes: u32,
}

#[derive(Serialize)]
struct UasOutput {
    reports: Vec<UasReport>,
}

fn fmt_lambda(lambda: f64) -> String {
    format!("{lambda}")
}

fn cmd_uas(
    corpus_path: &Path,
    lambdas: &[f64],
    flags: &PipelineFlags,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let dataset = load_corpus(corpus_path)?;
    let options = flags.options();
    let sports: Vec<String> = dataset.sports().iter().map(|s| s.to_string()).collect();
    let reports: Vec<UasReport> = sports
        .par_iter()
        .map(|sport| -> Result<Vec<UasReport>> {
            lambdas
                .iter()
                .map(|&lambda| underdog::uas_report(&dataset, sport, lambda, flags.tau, &options))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    // summary mirrors the per-sport tau / per-lambda layout
    let mut summary_csv = String::from("sport,tau");
    for &l in lambdas {
        summary_csv.push_str(&format!(",uas_lambda_{}", fmt_lambda(l)));
    }
    for &l in lambdas {
        summary_csv.push_str(&format!(",uas_bar_lambda_{}", fmt_lambda(l)));
    }
    summary_csv.push('\n');
    for sport in &sports {
        let first = reports.iter().find(|r| &r.sport == sport).expect("report per sport");
        summary_csv.push_str(&format!("{sport},{}", first.tau));
        for &l in lambdas {
            let r = reports.iter().find(|r| &r.sport == sport && r.lambda == l).unwrap();
            summary_csv.push_str(&format!(",{}", fmt6(r.average)));
        }
        for &l in lambdas {
            let r = reports.iter().find(|r| &r.sport == sport && r.lambda == l).unwrap();
            summary_csv.push_str(&format!(",{}", fmt6(r.aggregated)));
        }
        summary_csv.push('\n');
    }

    let mut editions_csv =
        String::from("sport,competition,year,lambda,uas,weak_matches,weak_successes\n");
    let mut edition_rows = Vec::new();
    for r in &reports {
        for e in &r.per_edition {
            editions_csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.sport,
                e.edition.competition,
                e.edition.year,
                fmt_lambda(r.lambda),
                fmt_opt(e.uas),
                e.weak_matches,
                e.weak_successes
            ));
            edition_rows.push(UasEditionRow {
                sport: r.sport.clone(),
                competition: e.edition.competition.clone(),
                year: e.edition.year,
                lambda: r.lambda,
                uas: e.uas.map(round6),
                weak_matches: e.weak_matches,
                weak_successes: e.weak_successes,
            });
        }
    }

    let rounded: Vec<UasReport> = reports
        .iter()
        .map(|r| UasReport {
            average: round6(r.average),
            aggregated: round6(r.aggregated),
            per_edition: r
                .per_edition
                .iter()
                .map(|e| crate::data_model::EditionUas { uas: e.uas.map(round6), ..e.clone() })
                .collect(),
            ..r.clone()
        })
        .collect();
    let json = to_json(&UasOutput { reports: rounded });
    let stdout_csv = format!("# uas_summary\n{summary_csv}\n# per_edition\n{editions_csv}");
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &stdout_csv,
        &json,
        &[
            ("uas_summary.csv", &summary_csv),
            ("uas_editions.csv", &editions_csv),
            ("uas.json", &json),
        ],
    )
}

// ---------------------------------------------------------------- stats

#[derive(Serialize)]
struct CiRow {
    sport: String,
    editions: usize,
    mean: f64,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct DunnRow {
    sport_a: String,
    sport_b: String,
    z: f64,
    p_unadjusted: f64,
    p_adjusted: f64,
}

#[derive(Serialize)]
struct LaneyRow {
    sport: String,
    proportion: f64,
    n: u64,
    lcl: f64,
    ucl: f64,
}

#[derive(Serialize)]
struct LaneyOutput {
    center: f64,
    sigma_z: f64,
    points: Vec<LaneyRow>,
}

#[derive(Serialize)]
struct StatsOutput {
    ci: Vec<CiRow>,
    kruskal_wallis: stats::TestResult,
    dunn: Vec<DunnRow>,
    laney: LaneyOutput,
}

fn sport_reports(
    dataset: &MatchScoreDataset,
    flags: &PipelineFlags,
) -> Result<Vec<UasReport>> {
    let options = flags.options();
    let sports: Vec<String> = dataset.sports().iter().map(|s| s.to_string()).collect();
    sports
        .par_iter()
        .map(|sport| underdog::uas_report(dataset, sport, flags.lambda, flags.tau, &options))
        .collect()
}

fn build_stats(reports: &[UasReport], ci_level: f64, ci_normal: bool) -> Result<StatsOutput> {
    if reports.len() < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: reports.len() });
    }
    let groups: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| r.per_edition.iter().filter_map(|e| e.uas).collect())
        .collect();
    let mut ci = Vec::with_capacity(reports.len());
    for (r, g) in reports.iter().zip(&groups) {
        let (lo, hi) =
            if ci_normal { stats::mean_ci_normal(g, ci_level)? } else { stats::mean_ci(g, ci_level)? };
        ci.push(CiRow {
            sport: r.sport.clone(),
            editions: g.len(),
            mean: round6(g.iter().sum::<f64>() / g.len() as f64),
            lo: round6(lo),
            hi: round6(hi),
        });
    }
    let kw = stats::kruskal_wallis(&groups)?;
    let mut dunn: Vec<DunnRow> = stats::dunn_bonferroni(&groups)?
        .into_iter()
        .map(|c| DunnRow {
            sport_a: reports[c.group_a].sport.clone(),
            sport_b: reports[c.group_b].sport.clone(),
            z: round6(c.z),
            p_unadjusted: round6(c.p_unadjusted),
            p_adjusted: round6(c.p_adjusted),
        })
        .collect();
    dunn.sort_by(|a, b| {
        a.p_adjusted
            .total_cmp(&b.p_adjusted)
            .then_with(|| a.sport_a.cmp(&b.sport_a))
            .then_with(|| a.sport_b.cmp(&b.sport_b))
    });
    let points: Vec<(f64, u64)> =
        reports.iter().map(|r| (r.aggregated, r.total_weak_matches())).collect();
    let chart = stats::laney_limits(&points)?;
    let laney = LaneyOutput {
        center: round6(chart.center),
        sigma_z: round6(chart.sigma_z),
        points: chart
            .per_point
            .iter()
            .zip(reports)
            .map(|(p, r)| LaneyRow {
                sport: r.sport.clone(),
                proportion: round6(p.proportion),
                n: p.n,
                lcl: round6(p.lcl),
                ucl: round6(p.ucl),
            })
            .collect(),
    };
    Ok(StatsOutput {
        ci,
        kruskal_wallis: stats::TestResult {
            statistic: round6(kw.statistic),
            // keep full precision: corpus p-values can be far below 1e-6
            p_value: kw.p_value,
            degrees_of_freedom: kw.degrees_of_freedom,
        },
        dunn,
        laney,
    })
}

fn stats_csv(result: &StatsOutput) -> String {
    let mut text = String::from("# ci\nsport,editions,mean,lo,hi\n");
    for row in &result.ci {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.sport,
            row.editions,
            fmt6(row.mean),
            fmt6(row.lo),
            fmt6(row.hi)
        ));
    }
    text.push_str("\n# kruskal_wallis\nstatistic,p_value,degrees_of_freedom\n");
    text.push_str(&format!(
        "{},{:e},{}\n",
        fmt6(result.kruskal_wallis.statistic),
        result.kruskal_wallis.p_value,
        result.kruskal_wallis.degrees_of_freedom.map(|d| d.to_string()).unwrap_or_default()
    ));
    text.push_str("\n# dunn\nsport_a,sport_b,z,p_unadjusted,p_adjusted\n");
    for row in &result.dunn {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.sport_a,
            row.sport_b,
            fmt6(row.z),
            fmt6(row.p_unadjusted),
            fmt6(row.p_adjusted)
        ));
    }
    text.push_str(&format!(
        "\n# laney\ncenter,{}\nsigma_z,{}\nsport,proportion,n,lcl,ucl\n",
        fmt6(result.laney.center),
        fmt6(result.laney.sigma_z)
    ));
    for row in &result.laney.points {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.sport,
            fmt6(row.proportion),
            row.n,
            fmt6(row.lcl),
            fmt6(row.ucl)
        ));
    }
    text
}

fn cmd_stats(
    corpus_path: &Path,
    flags: &PipelineFlags,
    ci_level: f64,
    ci_normal: bool,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let dataset = load_corpus(corpus_path)?;
    let reports = sport_reports(&dataset, flags)?;
    let result = build_stats(&reports, ci_level, ci_normal)?;
    let csv_text = stats_csv(&result);
    let json = to_json(&result);
    let mut files: Vec<(&str, String)> = vec![("stats.json", json.clone())];
    files.push(("stats.csv", csv_text.clone()));
    let file_refs: Vec<(&str, &str)> = files.iter().map(|(n, c)| (*n, c.as_str())).collect();
    emit(out, output.output.as_ref(), output.format, &csv_text, &json, &file_refs)
}

// ---------------------------------------------------------------- factors

fn cmd_factors(
    raw_path: Option<&PathBuf>,
    companions_path: Option<&PathBuf>,
    policy_text: &str,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let policy = ImputePolicy::parse(policy_text)?;
    let (_, bundled_raw, bundled_companions) = ingest::load_bundled_factors()?;
    let raw = match raw_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::validation(format!("cannot read '{}': {e}", p.display())))?;
            ingest::parse_factors_csv(&text)?
        }
        None => bundled_raw,
    };
    let companions = match companions_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::validation(format!("cannot read '{}': {e}", p.display())))?;
            ingest::parse_companions_csv(&text)?
        }
        None => bundled_companions,
    };
    let table = crate::factors::build_factors_pipeline(&raw, &companions, policy)?;
    let csv_text = ingest::write_factors_csv(&table);
    let json = to_json(&table);
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &csv_text,
        &json,
        &[("factors.csv", &csv_text), ("factors.json", &json)],
    )
}

// ---------------------------------------------------------------- pca / corr

fn uas_lambda1_column(table: &FactorsTable) -> Result<Vec<f64>> {
    ingest::load_bundled_uas()?.lambda1_column(table.row_labels())
}

#[derive(Serialize)]
struct ScreeRow {
    component: usize,
    eigenvalue: f64,
    explained_ratio: f64,
    cumulative_ratio: f64,
}

#[derive(Serialize)]
struct PcaOutput {
    standardize: bool,
    with_uas: bool,
    scree: Vec<ScreeRow>,
    column_labels: Vec<String>,
    row_labels: Vec<String>,
    loadings: Vec<Vec<f64>>,
    scores: Vec<Vec<f64>>,
}

fn pca_output(
    result: &PcaResult,
    row_labels: &[String],
    col_labels: &[String],
    standardize: bool,
    with_uas: bool,
) -> PcaOutput {
    let mut cumulative = 0.0;
    let scree = result
        .explained_ratio
        .iter()
        .enumerate()
        .map(|(i, r)| {
            cumulative += r;
            ScreeRow {
                component: i + 1,
                eigenvalue: round6(result.eigenvalues[i]),
                explained_ratio: round6(*r),
                cumulative_ratio: round6(cumulative.min(1.0)),
            }
        })
        .collect();
    let loadings = (0..result.loadings.n_rows())
        .map(|r| (0..result.loadings.n_cols()).map(|c| round6(result.loadings.get(r, c))).collect())
        .collect();
    let scores = (0..result.scores.n_rows())
        .map(|r| (0..result.scores.n_cols()).map(|c| round6(result.scores.get(r, c))).collect())
        .collect();
    PcaOutput {
        standardize,
        with_uas,
        scree,
        column_labels: col_labels.to_vec(),
        row_labels: row_labels.to_vec(),
        loadings,
        scores,
    }
}

fn cmd_pca(
    table_path: Option<&PathBuf>,
    standardize: bool,
    with_uas: bool,
    loading_scale: f64,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let table = load_table_or_bundled(table_path)?;
    let (matrix, col_labels) = if with_uas {
        let uas = uas_lambda1_column(&table)?;
        let mut columns: Vec<(String, Vec<Option<f64>>)> = table
            .col_labels()
            .iter()
            .enumerate()
            .map(|(c, l)| (l.clone(), table.column(c)))
            .collect();
        columns.push(("UAS".to_string(), uas.iter().map(|v| Some(*v)).collect()));
        let joined = FactorsTable::from_columns(table.row_labels().to_vec(), columns)?;
        (multivariate::table_to_matrix(&joined)?, joined.col_labels().to_vec())
    } else {
        (multivariate::table_to_matrix(&table)?, table.col_labels().to_vec())
    };
    let result = multivariate::pca(&matrix, standardize)?;
    let report = pca_output(&result, table.row_labels(), &col_labels, standardize, with_uas);

    let mut scree_csv = String::from("component,eigenvalue,explained_ratio,cumulative_ratio\n");
    for row in &report.scree {
        scree_csv.push_str(&format!(
            "{},{},{},{}\n",
            row.component,
            fmt6(row.eigenvalue),
            fmt6(row.explained_ratio),
            fmt6(row.cumulative_ratio)
        ));
    }
    let mut scores_csv = String::from("sport");
    for c in 0..result.scores.n_cols() {
        scores_csv.push_str(&format!(",pc{}", c + 1));
    }
    scores_csv.push('\n');
    for (r, label) in table.row_labels().iter().enumerate() {
        scores_csv.push_str(label);
        for c in 0..result.scores.n_cols() {
            scores_csv.push_str(&format!(",{}", fmt6(result.scores.get(r, c))));
        }
        scores_csv.push('\n');
    }
    let mut loadings_csv = String::from("factor");
    for c in 0..result.loadings.n_cols() {
        loadings_csv.push_str(&format!(",pc{}", c + 1));
    }
    loadings_csv.push('\n');
    for (r, label) in col_labels.iter().enumerate() {
        loadings_csv.push_str(label);
        for c in 0..result.loadings.n_cols() {
            loadings_csv.push_str(&format!(",{}", fmt6(result.loadings.get(r, c))));
        }
        loadings_csv.push('\n');
    }
    let biplot = multivariate::biplot_data(&result, loading_scale)?;
    let svg = multivariate::render_biplot_svg(&biplot, table.row_labels(), &col_labels);
    let json = to_json(&report);
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &scree_csv,
        &json,
        &[
            ("scree.csv", &scree_csv),
            ("scores.csv", &scores_csv),
            ("loadings.csv", &loadings_csv),
            ("biplot.svg", &svg),
            ("pca.json", &json),
        ],
    )
}

#[derive(Serialize)]
struct CorrOutput {
    labels: Vec<String>,
    matrix: Vec<Vec<Option<f64>>>,
    uas_correlates: Option<Vec<(String, f64)>>,
}

fn cmd_corr(
    table_path: Option<&PathBuf>,
    with_uas: bool,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let table = load_table_or_bundled(table_path)?;
    let uas_cells: Vec<Option<f64>>;
    let extra = if with_uas {
        uas_cells = uas_lambda1_column(&table)?.into_iter().map(Some).collect();
        Some(("UAS", uas_cells.as_slice()))
    } else {
        None
    };
    let matrix = stats::pearson_matrix(&table, extra)?;
    let k = matrix.size();
    let mut csv_text = String::from("label");
    for label in &matrix.labels {
        csv_text.push(',');
        csv_text.push_str(label);
    }
    csv_text.push('\n');
    for i in 0..k {
        csv_text.push_str(&matrix.labels[i]);
        for j in 0..k {
            csv_text.push(',');
            csv_text.push_str(&fmt_opt(matrix.get(i, j)));
        }
        csv_text.push('\n');
    }
    let correlates = if with_uas { matrix.correlates_of("UAS") } else { None };
    if let Some(ranked) = &correlates {
        csv_text.push_str("\n# uas_correlates\nfactor,correlation\n");
        for (label, value) in ranked {
            csv_text.push_str(&format!("{label},{}\n", fmt6(*value)));
        }
    }
    let report = CorrOutput {
        labels: matrix.labels.clone(),
        matrix: (0..k)
            .map(|i| (0..k).map(|j| matrix.get(i, j).map(round6)).collect())
            .collect(),
        uas_correlates: correlates
            .map(|r| r.into_iter().map(|(l, v)| (l, round6(v))).collect()),
    };
    let json = to_json(&report);
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &csv_text,
        &json,
        &[("correlation.csv", &csv_text), ("correlation.json", &json)],
    )
}

// ---------------------------------------------------------------- laney

fn cmd_laney(
    corpus_path: &Path,
    flags: &PipelineFlags,
    output: OutputArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let dataset = load_corpus(corpus_path)?;
    let reports = sport_reports(&dataset, flags)?;
    if reports.len() < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: reports.len() });
    }
    let points: Vec<(f64, u64)> =
        reports.iter().map(|r| (r.aggregated, r.total_weak_matches())).collect();
    let chart = stats::laney_limits(&points)?;
    let result = LaneyOutput {
        center: round6(chart.center),
        sigma_z: round6(chart.sigma_z),
        points: chart
            .per_point
            .iter()
            .zip(&reports)
            .map(|(p, r)| LaneyRow {
                sport: r.sport.clone(),
                proportion: round6(p.proportion),
                n: p.n,
                lcl: round6(p.lcl),
                ucl: round6(p.ucl),
            })
            .collect(),
    };
    let mut csv_text = format!(
        "center,{}\nsigma_z,{}\nsport,proportion,n,lcl,ucl\n",
        fmt6(result.center),
        fmt6(result.sigma_z)
    );
    for row in &result.points {
        csv_text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.sport,
            fmt6(row.proportion),
            row.n,
            fmt6(row.lcl),
            fmt6(row.ucl)
        ));
    }
    let json = to_json(&result);
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &csv_text,
        &json,
        &[("laney.csv", &csv_text), ("laney.json", &json)],
    )
}

// ---------------------------------------------------------------- simulate

fn cmd_simulate(config: &SimConfig, output: OutputArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = generate_corpus(config)?;
    let csv_text = ingest::write_matches_csv(&corpus);
    let json = ingest::write_matches_json(&corpus);
    emit(
        out,
        output.output.as_ref(),
        output.format,
        &csv_text,
        &json,
        &[("corpus.csv", &csv_text), ("corpus.json", &json)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_out_of_range_exits_2_naming_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        std::fs::write(
            &path,
            "sport,competition,edition_year,stage,team_i,team_j,score_i,score_j\n\
             s,Cup,2000,Group,A,B,1,0\n",
        )
        .unwrap();
        let (code, _) = run_capture(&["underdog", "rank", path.to_str().unwrap(), "--lambda", "1.5"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn simulate_then_rank_is_deterministic() {
        let (code_a, bytes_a) =
            run_capture(&["underdog", "simulate", "--seed", "9", "--teams", "6", "--editions", "4"]);
        let (code_b, bytes_b) =
            run_capture(&["underdog", "simulate", "--seed", "9", "--teams", "6", "--editions", "4"]);
        assert_eq!(code_a, 0);
        assert_eq!(code_b, 0);
        assert_eq!(bytes_a, bytes_b);
        assert!(!bytes_a.is_empty());
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _) = run_capture(&["underdog", "frobnicate"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_exits_zero() {
        let (code, bytes) = run_capture(&["underdog", "--help"]);
        assert_eq!(code, 0);
        assert!(String::from_utf8(bytes).unwrap().contains("underdog"));
    }
}
