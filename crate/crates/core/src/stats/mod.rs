//! Hypothesis tests, confidence intervals, control-chart limits, and
//! correlation.

pub mod special;

use crate::data_model::FactorsTable;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use special::{chi_square_sf, normal_quantile, normal_sf, t_quantile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: Option<usize>,
}

/// One pairwise comparison from Dunn's test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DunnComparison {
    pub group_a: usize,
    pub group_b: usize,
    pub z: f64,
    pub p_unadjusted: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneyPoint {
    pub proportion: f64,
    pub n: u64,
    pub ucl: f64,
    pub lcl: f64,
}

/// Laney p'-chart: classical p-chart limits inflated by the between-subgroup
/// variation factor sigma_z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneyChart {
    pub center: f64,
    pub sigma_z: f64,
    pub per_point: Vec<LaneyPoint>,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite value in sample"));
    }
    Ok(())
}

fn sample_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Student-t confidence interval for the mean.
pub fn mean_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    mean_ci_impl(values, level, false)
}

/// Normal-approximation variant (z instead of t).
pub fn mean_ci_normal(values: &[f64], level: f64) -> Result<(f64, f64)> {
    mean_ci_impl(values, level, true)
}

fn mean_ci_impl(values: &[f64], level: f64, normal: bool) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: values.len() });
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::validation(format!("confidence level must be in (0,1), got {level}")));
    }
    check_finite(values)?;
    let n = values.len() as f64;
    let (mean, sd) = sample_mean_std(values);
    let q = (1.0 + level) / 2.0;
    let critical = if normal { normal_quantile(q) } else { t_quantile(q, n - 1.0) };
    let half = critical * sd / n.sqrt();
    Ok((mean - half, mean + half))
}

/// Midranks of the pooled sample plus the tie correction term sum(t^3 - t).
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &idx in &order[i..j] {
            ranks[idx] = avg_rank;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    (ranks, tie_term)
}

fn validate_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::TooFewGroups { needed: 2, got: groups.len() });
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::EmptyGroup(i));
        }
        check_finite(g)?;
    }
    Ok(())
}

/// Kruskal-Wallis H test with tie correction; p-value from the chi-square
/// approximation with k-1 degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    validate_groups(groups)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, tie_term) = midranks(&pooled);
    let df = groups.len() - 1;
    let correction = 1.0 - tie_term / (n * n * n - n);
    if correction <= 0.0 {
        // every observation tied: no evidence of any difference
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, degrees_of_freedom: Some(df) });
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let ni = g.len() as f64;
        let ri: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += ri * ri / ni;
        offset += g.len();
    }
    let h_raw = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    let h = (h_raw / correction).max(0.0);
    Ok(TestResult { statistic: h, p_value: chi_square_sf(h, df), degrees_of_freedom: Some(df) })
}

/// Dunn's pairwise z-tests on mean ranks, Bonferroni-adjusted by the number
/// of pairs k(k-1)/2.
pub fn dunn_bonferroni(groups: &[Vec<f64>]) -> Result<Vec<DunnComparison>> {
    validate_groups(groups)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let (ranks, tie_term) = midranks(&pooled);
    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        let ri: f64 = ranks[offset..offset + g.len()].iter().sum();
        mean_ranks.push(ri / g.len() as f64);
        offset += g.len();
    }
    let k = groups.len();
    let m = (k * (k - 1) / 2) as f64;
    let base_var = n * (n + 1.0) / 12.0 - tie_term / (12.0 * (n - 1.0));
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let se =
                (base_var * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64)).sqrt();
            let (z, p) = if se > 0.0 {
                let z = (mean_ranks[a] - mean_ranks[b]) / se;
                (z, 2.0 * normal_sf(z.abs()))
            } else {
                (0.0, 1.0)
            };
            out.push(DunnComparison {
                group_a: a,
                group_b: b,
                z,
                p_unadjusted: p,
                p_adjusted: (p * m).min(1.0),
            });
        }
    }
    Ok(out)
}

/// Laney p'-chart limits.
///
/// center = pooled proportion; z_i = (p_i - center) / sqrt(center(1-center)/n_i);
/// sigma_z = mean moving range of z / 1.128 (d2 for subgroups of size 2);
/// limits = center +- 3 sqrt(center(1-center)/n_i) sigma_z, clamped to [0, 1].
pub fn laney_limits(points: &[(f64, u64)]) -> Result<LaneyChart> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: points.len() });
    }
    for &(p, n) in points {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::validation(format!("proportion {p} outside [0, 1]")));
        }
        if n == 0 {
            return Err(Error::validation("subgroup size must be >= 1"));
        }
    }
    let total: f64 = points.iter().map(|&(_, n)| n as f64).sum();
    let center: f64 = points.iter().map(|&(p, n)| p * n as f64).sum::<f64>() / total;
    if center <= 0.0 || center >= 1.0 {
        return Err(Error::DegenerateCenter(center));
    }
    let sigma_of = |n: u64| (center * (1.0 - center) / n as f64).sqrt();
    let z: Vec<f64> = points.iter().map(|&(p, n)| (p - center) / sigma_of(n)).collect();
    let moving_range: f64 =
        z.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (z.len() - 1) as f64;
    let sigma_z = moving_range / 1.128;
    let per_point = points
        .iter()
        .map(|&(p, n)| {
            let spread = 3.0 * sigma_of(n) * sigma_z;
            LaneyPoint {
                proportion: p,
                n,
                ucl: (center + spread).min(1.0),
                lcl: (center - spread).max(0.0),
            }
        })
        .collect();
    Ok(LaneyChart { center, sigma_z, per_point })
}

/// Pearson correlation over pairwise-complete observations. `None` when
/// fewer than two complete pairs exist or either side is constant.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y.iter())
        .filter_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some((*a, *b)),
            _ => None,
        })
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in &pairs {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric correlation matrix with missing entries where a correlation is
/// undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    cells: Vec<Option<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i * self.labels.len() + j]
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// Correlations of one labeled column against all the others, sorted
    /// descending.
    pub fn correlates_of(&self, label: &str) -> Option<Vec<(String, f64)>> {
        let idx = self.labels.iter().position(|l| l == label)?;
        let mut out: Vec<(String, f64)> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != idx)
            .filter_map(|(j, l)| self.get(idx, j).map(|c| (l.clone(), c)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Some(out)
    }
}

/// Pearson correlation between every pair of table columns, optionally with
/// one extra named column joined on the right.
pub fn pearson_matrix(
    table: &FactorsTable,
    extra_column: Option<(&str, &[Option<f64>])>,
) -> Result<CorrelationMatrix> {
    if table.n_rows() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: table.n_rows() });
    }
    let mut labels: Vec<String> = table.col_labels().to_vec();
    let mut columns: Vec<Vec<Option<f64>>> =
        (0..table.n_cols()).map(|c| table.column(c)).collect();
    if let Some((label, cells)) = extra_column {
        if cells.len() != table.n_rows() {
            return Err(Error::validation(format!(
                "extra column '{label}' has {} cells, expected {}",
                cells.len(),
                table.n_rows()
            )));
        }
        labels.push(label.to_string());
        columns.push(cells.to_vec());
    }
    let k = labels.len();
    let mut cells = vec![None; k * k];
    for i in 0..k {
        for j in i..k {
            let value =
                if i == j { Some(1.0) } else { pearson(&columns[i], &columns[j]) };
            cells[i * k + j] = value;
            cells[j * k + i] = value;
        }
    }
    Ok(CorrelationMatrix { labels, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn ci_zero_width_on_constant_data() {
        let (lo, hi) = mean_ci(&[0.3, 0.3, 0.3], 0.95).unwrap();
        assert_eq!((lo, hi), (0.3, 0.3));
    }

    #[test]
    fn ci_two_points_matches_t_oracle() {
        // {0, 1}: mean 0.5, s = sqrt(0.5), half-width t(0.975, 1) * s / sqrt(2)
        let (lo, hi) = mean_ci(&[0.0, 1.0], 0.95).unwrap();
        let half = 12.706204736432095 * 0.5;
        close(lo, 0.5 - half, 1e-7);
        close(hi, 0.5 + half, 1e-7);
    }

    #[test]
    fn ci_widens_with_level() {
        let data = [0.1, 0.4, 0.2, 0.8, 0.5];
        let (lo95, hi95) = mean_ci(&data, 0.95).unwrap();
        let (lo99, hi99) = mean_ci(&data, 0.99).unwrap();
        assert!(lo99 < lo95 && hi99 > hi95);
    }

    #[test]
    fn ci_requires_two_samples() {
        assert!(matches!(mean_ci(&[1.0], 0.95), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn normal_ci_is_narrower_than_t() {
        let data = [0.1, 0.4, 0.2, 0.8, 0.5];
        let (lt, ht) = mean_ci(&data, 0.95).unwrap();
        let (ln, hn) = mean_ci_normal(&data, 0.95).unwrap();
        assert!(ln > lt && hn < ht);
    }

    #[test]
    fn kruskal_wallis_hand_example() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let r = kruskal_wallis(&groups).unwrap();
        close(r.statistic, 7.2, 1e-12);
        close(r.p_value, (-3.6f64).exp(), 1e-12);
        assert_eq!(r.degrees_of_freedom, Some(2));
    }

    #[test]
    fn kruskal_wallis_all_tied() {
        let groups = vec![vec![5.0, 5.0], vec![5.0, 5.0, 5.0]];
        let r = kruskal_wallis(&groups).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn kruskal_wallis_rank_based_invariance() {
        let groups = vec![vec![1.0, 2.0, 9.0], vec![4.0, 5.0, 6.0], vec![3.0, 8.0, 7.0]];
        let transformed: Vec<Vec<f64>> =
            groups.iter().map(|g| g.iter().map(|v| (v * 0.5).exp()).collect()).collect();
        let a = kruskal_wallis(&groups).unwrap();
        let b = kruskal_wallis(&transformed).unwrap();
        close(a.statistic, b.statistic, 1e-12);
        close(a.p_value, b.p_value, 1e-12);
    }

    #[test]
    fn kruskal_wallis_needs_two_nonempty_groups() {
        assert!(matches!(
            kruskal_wallis(&[vec![1.0]]),
            Err(Error::TooFewGroups { .. })
        ));
        assert!(matches!(
            kruskal_wallis(&[vec![1.0], vec![]]),
            Err(Error::EmptyGroup(1))
        ));
    }

    #[test]
    fn dunn_extreme_pair_matches_normal_oracle() {
        let groups = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let out = dunn_bonferroni(&groups).unwrap();
        assert_eq!(out.len(), 3);
        let extreme = out.iter().find(|c| c.group_a == 0 && c.group_b == 2).unwrap();
        // z = (2 - 8) / sqrt((9*10/12) * (2/3)) = -6 / sqrt(5)
        close(extreme.z.abs(), 6.0 / 5f64.sqrt(), 1e-12);
        close(extreme.p_adjusted, 0.021871074274606914, 1e-9);
        assert!(out.iter().all(|c| c.p_adjusted >= c.p_unadjusted));
        assert!(out.iter().all(|c| (0.0..=1.0).contains(&c.p_adjusted)));
    }

    #[test]
    fn dunn_identical_groups_give_p_one() {
        let groups = vec![vec![2.0, 2.0, 2.0], vec![2.0, 2.0, 2.0]];
        let out = dunn_bonferroni(&groups).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].z, 0.0);
        assert_eq!(out[0].p_adjusted, 1.0);
    }

    #[test]
    fn laney_collapses_when_proportions_equal() {
        let chart = laney_limits(&[(0.2, 50), (0.2, 80), (0.2, 30)]).unwrap();
        close(chart.sigma_z, 0.0, 1e-15);
        for p in &chart.per_point {
            close(p.ucl, chart.center, 1e-12);
            close(p.lcl, chart.center, 1e-12);
        }
    }

    #[test]
    fn laney_hand_dataset_step_by_step() {
        let points = [(0.30, 50u64), (0.45, 40), (0.25, 60), (0.40, 55)];
        let chart = laney_limits(&points).unwrap();
        // step-by-step spreadsheet evaluation
        let total: f64 = points.iter().map(|&(_, n)| n as f64).sum();
        let pbar = points.iter().map(|&(p, n)| p * n as f64).sum::<f64>() / total;
        let z: Vec<f64> = points
            .iter()
            .map(|&(p, n)| (p - pbar) / (pbar * (1.0 - pbar) / n as f64).sqrt())
            .collect();
        let mr = ((z[1] - z[0]).abs() + (z[2] - z[1]).abs() + (z[3] - z[2]).abs()) / 3.0;
        let sigma_z = mr / 1.128;
        close(chart.center, pbar, 1e-15);
        close(chart.sigma_z, sigma_z, 1e-15);
        for (i, &(p, n)) in points.iter().enumerate() {
            let spread = 3.0 * (pbar * (1.0 - pbar) / n as f64).sqrt() * sigma_z;
            close(chart.per_point[i].ucl, (pbar + spread).min(1.0), 1e-15);
            close(chart.per_point[i].lcl, (pbar - spread).max(0.0), 1e-15);
            assert_eq!(chart.per_point[i].proportion, p);
        }
    }

    #[test]
    fn laney_symmetric_limits_with_equal_sizes() {
        let chart = laney_limits(&[(0.2, 40), (0.5, 40), (0.3, 40), (0.4, 40)]).unwrap();
        for p in &chart.per_point {
            close(p.ucl - chart.center, chart.center - p.lcl, 1e-12);
        }
    }

    #[test]
    fn laney_degenerate_center_rejected() {
        assert!(matches!(
            laney_limits(&[(0.0, 10), (0.0, 20)]),
            Err(Error::DegenerateCenter(_))
        ));
    }

    #[test]
    fn laney_sigma_one_reduces_to_classical_p_chart() {
        let points = [(0.30, 50u64), (0.45, 40), (0.25, 60), (0.40, 55)];
        let chart = laney_limits(&points).unwrap();
        for (i, &(_, n)) in points.iter().enumerate() {
            let classical = 3.0 * (chart.center * (1.0 - chart.center) / n as f64).sqrt();
            // dividing the observed spread by sigma_z recovers the classical limit
            close((chart.per_point[i].ucl - chart.center) / chart.sigma_z, classical, 1e-9);
        }
    }

    #[test]
    fn pearson_exact_cases() {
        let x = [Some(1.0), Some(2.0), Some(3.0)];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y = [Some(6.0), Some(4.0), Some(2.0)];
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        let constant = [Some(5.0), Some(5.0), Some(5.0)];
        assert_eq!(pearson(&x, &constant), None);
    }

    #[test]
    fn pearson_matrix_pairwise_complete() {
        let table = FactorsTable::from_columns(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![
                ("X".into(), vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
                ("Y".into(), vec![Some(2.0), None, Some(6.0), Some(8.0)]),
            ],
        )
        .unwrap();
        let m = pearson_matrix(&table, None).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        // complete pairs (1,2), (3,6), (4,8) are exactly proportional
        assert!((m.get(0, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }
}
