//! Principal component analysis over the factors dataset: centering, a
//! cyclic Jacobi eigendecomposition of the covariance matrix, scores,
//! loadings and explained-variance ratios. The matrices involved are tiny
//! (at most 15 x 15), so the solver is written here rather than pulled in.

use crate::data_model::FactorsTable;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::validation("matrix must be non-empty"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::validation("ragged matrix rows"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite matrix entry"));
        }
        Ok(Matrix { rows: data.len() / cols, cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn multiply(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.set(i, j, out.get(i, j) + a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Frobenius norm of the strictly off-diagonal part.
pub fn off_diagonal_norm(m: &Matrix) -> f64 {
    let mut sum = 0.0;
    for r in 0..m.n_rows() {
        for c in 0..m.n_cols() {
            if r != c {
                sum += m.get(r, c) * m.get(r, c);
            }
        }
    }
    sum.sqrt()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns unsorted (eigenvalues, eigenvector matrix with eigenvectors as
/// columns). Iterates until the off-diagonal norm falls below
/// `1e-13 * max(1, ||A||_F)`.
pub fn jacobi_eigen(matrix: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = matrix.n_rows();
    if n != matrix.n_cols() {
        return Err(Error::DegenerateMatrix("eigendecomposition needs a square matrix".into()));
    }
    let mut a = matrix.clone();
    let mut v = Matrix::identity(n);
    let tol = 1e-13 * a.frobenius_norm().max(1.0);
    for _sweep in 0..100 {
        if off_diagonal_norm(&a) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = {
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if off_diagonal_norm(&a) > tol {
        return Err(Error::DegenerateMatrix("Jacobi iteration did not converge".into()));
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    Ok((eigenvalues, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// nonincreasing; eigenvalues of the covariance (or correlation) matrix
    pub eigenvalues: Vec<f64>,
    /// eigenvalues divided by their sum
    pub explained_ratio: Vec<f64>,
    /// columns are unit-norm component directions (variables x components)
    pub loadings: Matrix,
    /// projected observations (observations x components)
    pub scores: Matrix,
    /// per-column means of the input
    pub mean_vector: Vec<f64>,
}

/// Covariance PCA of a data matrix (observations in rows). With
/// `standardize` the centered columns are divided by their sample standard
/// deviation first, turning the covariance into a correlation matrix.
///
/// Component signs follow one convention everywhere: the largest-magnitude
/// entry of each loading column is positive (first index wins magnitude
/// ties), so results are identical across runs and platforms.
pub fn pca(data: &Matrix, standardize: bool) -> Result<PcaResult> {
    let n = data.n_rows();
    let d = data.n_cols();
    if n < 2 || d < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n.min(d) });
    }
    let mean_vector: Vec<f64> =
        (0..d).map(|c| (0..n).map(|r| data.get(r, c)).sum::<f64>() / n as f64).collect();
    let mut centered = Matrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            centered.set(r, c, data.get(r, c) - mean_vector[c]);
        }
    }
    if standardize {
        for c in 0..d {
            let var =
                (0..n).map(|r| centered.get(r, c).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            if sd == 0.0 {
                return Err(Error::DegenerateMatrix(format!(
                    "column {c} is constant; cannot standardize"
                )));
            }
            for r in 0..n {
                centered.set(r, c, centered.get(r, c) / sd);
            }
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let s: f64 =
                (0..n).map(|r| centered.get(r, i) * centered.get(r, j)).sum::<f64>() / (n as f64 - 1.0);
            cov.set(i, j, s);
            cov.set(j, i, s);
        }
    }
    let (raw_values, raw_vectors) = jacobi_eigen(&cov)?;
    let total: f64 = raw_values.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateMatrix("data has zero total variance".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw_values[i]).collect();
    let mut loadings = Matrix::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        // sign convention: largest-magnitude entry positive
        let column = raw_vectors.column(old_col);
        let mut pivot = 0;
        for (i, v) in column.iter().enumerate() {
            if v.abs() > column[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if column[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in column.iter().enumerate() {
            loadings.set(i, new_col, flip * v);
        }
    }
    let scores = centered.multiply(&loadings);
    let explained_ratio: Vec<f64> = eigenvalues.iter().map(|v| v / total).collect();
    Ok(PcaResult { eigenvalues, explained_ratio, loadings, scores, mean_vector })
}

/// Convert a fully populated factor table into a data matrix.
pub fn table_to_matrix(table: &FactorsTable) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = (0..table.n_rows())
        .map(|r| {
            (0..table.n_cols())
                .map(|c| {
                    table.get(r, c).ok_or_else(|| {
                        Error::validation(format!(
                            "missing cell ({}, {})",
                            table.row_labels()[r],
                            table.col_labels()[c]
                        ))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Matrix::from_rows(rows)
}

/// First two score columns plus the loading vectors scaled for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotData {
    pub scores: Vec<(f64, f64)>,
    pub loadings: Vec<(f64, f64)>,
    pub loading_scale: f64,
}

pub fn biplot_data(result: &PcaResult, loading_scale: f64) -> Result<BiplotData> {
    if result.eigenvalues.len() < 2 {
        return Err(Error::TooFewComponents { needed: 2, got: result.eigenvalues.len() });
    }
    let scores = (0..result.scores.n_rows())
        .map(|r| (result.scores.get(r, 0), result.scores.get(r, 1)))
        .collect();
    let loadings = (0..result.loadings.n_rows())
        .map(|r| (loading_scale * result.loadings.get(r, 0), loading_scale * result.loadings.get(r, 1)))
        .collect();
    Ok(BiplotData { scores, loadings, loading_scale })
}

/// Minimal SVG scatter of scores (dots) and loading vectors (segments).
pub fn render_biplot_svg(
    biplot: &BiplotData,
    point_labels: &[String],
    vector_labels: &[String],
) -> String {
    const SIZE: f64 = 640.0;
    const MARGIN: f64 = 50.0;
    let xs = biplot.scores.iter().map(|p| p.0).chain(biplot.loadings.iter().map(|p| p.0));
    let ys = biplot.scores.iter().map(|p| p.1).chain(biplot.loadings.iter().map(|p| p.1));
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in xs {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
    }
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for y in ys {
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let to_px = |x: f64, y: f64| {
        (
            MARGIN + (x - min_x) / span_x * (SIZE - 2.0 * MARGIN),
            SIZE - MARGIN - (y - min_y) / span_y * (SIZE - 2.0 * MARGIN),
        )
    };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let (ox, oy) = to_px(0.0, 0.0);
    svg.push_str(&format!(
        "<line x1=\"{MARGIN}\" y1=\"{oy:.2}\" x2=\"{:.2}\" y2=\"{oy:.2}\" stroke=\"#cccccc\"/>\n",
        SIZE - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{ox:.2}\" y1=\"{MARGIN}\" x2=\"{ox:.2}\" y2=\"{:.2}\" stroke=\"#cccccc\"/>\n",
        SIZE - MARGIN
    ));
    for (i, &(x, y)) in biplot.loadings.iter().enumerate() {
        let (px, py) = to_px(x, y);
        svg.push_str(&format!(
            "<line x1=\"{ox:.2}\" y1=\"{oy:.2}\" x2=\"{px:.2}\" y2=\"{py:.2}\" stroke=\"#d62728\" stroke-width=\"1\"/>\n"
        ));
        let label = vector_labels.get(i).map(String::as_str).unwrap_or("");
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{py:.2}\" font-size=\"10\" fill=\"#d62728\">{}</text>\n",
            escape_xml(label)
        ));
    }
    for (i, &(x, y)) in biplot.scores.iter().enumerate() {
        let (px, py) = to_px(x, y);
        svg.push_str(&format!("<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n"));
        let label = point_labels.get(i).map(String::as_str).unwrap_or("");
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" fill=\"#1f77b4\">{}</text>\n",
            px + 4.0,
            py - 4.0,
            escape_xml(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_bundled_factors;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2, 1], [1, 2]] has eigenvalues 3 and 1
        let m = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (mut values, _) = jacobi_eigen(&m).unwrap();
        values.sort_by(f64::total_cmp);
        close(values[0], 1.0, 1e-12);
        close(values[1], 3.0, 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_the_matrix() {
        let m = Matrix::from_rows(vec![
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.25],
            vec![0.5, -0.25, 2.0],
        ])
        .unwrap();
        let (values, vectors) = jacobi_eigen(&m).unwrap();
        let mut diag = Matrix::zeros(3, 3);
        for (i, v) in values.iter().enumerate() {
            diag.set(i, i, *v);
        }
        let rebuilt = vectors.multiply(&diag).multiply(&vectors.transpose());
        for r in 0..3 {
            for c in 0..3 {
                close(rebuilt.get(r, c), m.get(r, c), 1e-10);
            }
        }
    }

    #[test]
    fn points_on_a_line_have_one_component() {
        let data = Matrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![3.0, 6.0],
        ])
        .unwrap();
        let result = pca(&data, false).unwrap();
        close(result.explained_ratio[0], 1.0, 1e-12);
        close(result.explained_ratio[1], 0.0, 1e-12);
    }

    #[test]
    fn pca_invariants_on_bundled_table() {
        let (normalized, _, _) = load_bundled_factors().unwrap();
        let data = table_to_matrix(&normalized).unwrap();
        let result = pca(&data, false).unwrap();
        // eigenvalues nonincreasing and nonnegative
        for w in result.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(result.eigenvalues.iter().all(|&v| v >= -1e-10));
        // ratios sum to one
        close(result.explained_ratio.iter().sum::<f64>(), 1.0, 1e-10);
        // scores have zero column means
        for c in 0..result.scores.n_cols() {
            let mean: f64 =
                result.scores.column(c).iter().sum::<f64>() / result.scores.n_rows() as f64;
            close(mean, 0.0, 1e-10);
        }
        // eigenvalue sum equals total variance of the centered data
        let n = data.n_rows() as f64;
        let total_var: f64 = (0..data.n_cols())
            .map(|c| {
                let col = data.column(c);
                let mean = col.iter().sum::<f64>() / n;
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .sum();
        close(result.eigenvalues.iter().sum::<f64>(), total_var, 1e-10);
        // loadings are column-orthonormal
        let gram = result.loadings.transpose().multiply(&result.loadings);
        for i in 0..gram.n_rows() {
            for j in 0..gram.n_cols() {
                close(gram.get(i, j), if i == j { 1.0 } else { 0.0 }, 1e-10);
            }
        }
        // sign convention: largest-magnitude loading entry positive
        for c in 0..result.loadings.n_cols() {
            let col = result.loadings.column(c);
            let pivot = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .unwrap()
                .0;
            assert!(col[pivot] > 0.0);
        }
    }

    #[test]
    fn row_permutation_preserves_spectrum() {
        let (normalized, _, _) = load_bundled_factors().unwrap();
        let data = table_to_matrix(&normalized).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..data.n_rows()).map(|r| data.row(r).to_vec()).collect();
        rows.rotate_left(5);
        let permuted = Matrix::from_rows(rows).unwrap();
        let a = pca(&data, false).unwrap();
        let b = pca(&permuted, false).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            close(*x, *y, 1e-10);
        }
        // scores are permuted accordingly
        for r in 0..data.n_rows() {
            let pr = (r + data.n_rows() - 5) % data.n_rows();
            for c in 0..2 {
                close(a.scores.get(r, c), b.scores.get(pr, c), 1e-9);
            }
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let data = Matrix::from_rows(vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert!(matches!(pca(&data, true), Err(Error::DegenerateMatrix(_))));
        assert!(pca(&data, false).is_ok());
    }

    #[test]
    fn biplot_scaling_is_linear() {
        let (normalized, _, _) = load_bundled_factors().unwrap();
        let result = pca(&table_to_matrix(&normalized).unwrap(), false).unwrap();
        let unit = biplot_data(&result, 1.0).unwrap();
        let doubled = biplot_data(&result, 2.0).unwrap();
        assert_eq!(unit.scores.len(), 12);
        assert_eq!(unit.loadings.len(), 14);
        for (a, b) in unit.loadings.iter().zip(&doubled.loadings) {
            close(b.0, 2.0 * a.0, 1e-12);
            close(b.1, 2.0 * a.1, 1e-12);
        }
        // loading_scale = 1 reproduces the first two loading columns
        for (i, &(x, y)) in unit.loadings.iter().enumerate() {
            close(x, result.loadings.get(i, 0), 1e-15);
            close(y, result.loadings.get(i, 1), 1e-15);
        }
        let svg = render_biplot_svg(
            &doubled,
            normalized.row_labels(),
            normalized.col_labels(),
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 12);
    }
}
