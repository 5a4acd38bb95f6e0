//! Ordination of sample × species abundance tables and the DCA-Procrustes
//! correlation (DPC) between two such tables.
//!
//! Correspondence analysis is computed by reciprocal averaging: species scores
//! are abundance-weighted means of site scores, site scores are weighted means
//! of species scores, and the pair is iterated until it stops moving. Every
//! iteration removes the trivial (constant) solution and earlier axes, then
//! rescales site scores to unit weighted variance; the shrink factor at
//! convergence is the eigenvalue.
//!
//! Detrended correspondence analysis replaces orthogonalisation on axes ≥ 2
//! by detrending by segments: the range of every earlier axis is cut into
//! equal-width segments, the per-segment weighted sums are smoothed with
//! running means as in DECORANA, and each site loses the smoothed mean of its
//! segment. Smoothing keeps sites that sit alone in a segment from being
//! zeroed. No nonlinear rescaling of axes is applied.
//!
//! DPC runs DCA on both tables, compares the site configurations by symmetric
//! Procrustes analysis and reports `sqrt(1 - m12²)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::dataset::CoverVector;

pub const MAX_ITERATIONS: usize = 1000;
pub const TOLERANCE: f64 = 1e-10;
pub const DEFAULT_AXES: usize = 2;
pub const DEFAULT_SEGMENTS: usize = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrdinationError {
    #[error("matrix is {rows}x{cols} but has {ids_rows} row ids and {ids_cols} column ids")]
    Shape {
        rows: usize,
        cols: usize,
        ids_rows: usize,
        ids_cols: usize,
    },
    #[error("entry ({row}, {col}) is {value}; abundances must be finite and non-negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("after pruning the matrix is {rows}x{cols}; at least 3 rows and 2 columns are required")]
    TooSmall { rows: usize, cols: usize },
    #[error("axis {axis} is degenerate: the scores have no dispersion")]
    Degenerate { axis: usize },
    #[error("axis {axis} did not converge within {iterations} iterations (last change {change:e})")]
    NoConvergence {
        axis: usize,
        iterations: usize,
        change: f64,
    },
    #[error("previous axis {index} has {got} scores, expected {expected}")]
    PreviousAxisLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("at least one axis and one segment are required")]
    BadConfig,
    #[error("configurations differ in shape: {0}x{1} vs {2}x{3}")]
    ConfigurationShape(usize, usize, usize, usize),
    #[error("configuration needs at least 2 rows")]
    TooFewPoints,
    #[error("configuration has all points identical")]
    RankZero,
    #[error("target and prediction have different {what} identifiers")]
    IdMismatch { what: &'static str },
    #[error("pruning kept different rows: target dropped {target:?}, prediction dropped {predicted:?}")]
    PrunedRowsDiffer {
        target: Vec<String>,
        predicted: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Pruning {
    pub dropped_rows: Vec<String>,
    pub dropped_cols: Vec<String>,
}

/// Samples (rows) × species (columns) of non-negative abundances.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    data: DMatrix<f64>,
}

impl AbundanceMatrix {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, data: DMatrix<f64>) -> Result<Self, OrdinationError> {
        if data.nrows() != row_ids.len() || data.ncols() != col_ids.len() {
            return Err(OrdinationError::Shape {
                rows: data.nrows(),
                cols: data.ncols(),
                ids_rows: row_ids.len(),
                ids_cols: col_ids.len(),
            });
        }
        for j in 0..data.ncols() {
            for i in 0..data.nrows() {
                let value = data[(i, j)];
                if !(value.is_finite() && value >= 0.0) {
                    return Err(OrdinationError::NegativeEntry { row: i, col: j, value });
                }
            }
        }
        Ok(Self { row_ids, col_ids, data })
    }

    /// Builds a matrix with ids `0..n` from row-major values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, OrdinationError> {
        let ncols = rows.first().map_or(0, Vec::len);
        let data = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN));
        Self::new(
            (0..rows.len()).map(|i| i.to_string()).collect(),
            (0..ncols).map(|j| j.to_string()).collect(),
            data,
        )
    }

    /// One row per cover vector; columns are the registry species.
    pub fn from_covers(row_ids: Vec<String>, covers: &[CoverVector]) -> Result<Self, OrdinationError> {
        let col_ids = covers
            .first()
            .map(|c| c.registry().names().to_vec())
            .unwrap_or_default();
        let data = DMatrix::from_fn(covers.len(), col_ids.len(), |i, j| covers[i].values()[j]);
        Self::new(row_ids, col_ids, data)
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn scaled(&self, k: f64) -> Result<Self, OrdinationError> {
        Self::new(self.row_ids.clone(), self.col_ids.clone(), &self.data * k)
    }

    /// Drops all-zero rows and columns. The result must keep at least three
    /// rows and two columns.
    pub fn prune(&self) -> Result<(Self, Pruning), OrdinationError> {
        let keep_rows: Vec<usize> = (0..self.data.nrows()).filter(|&i| self.data.row(i).sum() > 0.0).collect();
        let keep_cols: Vec<usize> = (0..self.data.ncols())
            .filter(|&j| self.data.column(j).sum() > 0.0)
            .collect();
        if keep_rows.len() < 3 || keep_cols.len() < 2 {
            return Err(OrdinationError::TooSmall {
                rows: keep_rows.len(),
                cols: keep_cols.len(),
            });
        }
        let pruning = Pruning {
            dropped_rows: (0..self.data.nrows())
                .filter(|i| !keep_rows.contains(i))
                .map(|i| self.row_ids[i].clone())
                .collect(),
            dropped_cols: (0..self.data.ncols())
                .filter(|j| !keep_cols.contains(j))
                .map(|j| self.col_ids[j].clone())
                .collect(),
        };
        let data = DMatrix::from_fn(keep_rows.len(), keep_cols.len(), |i, j| self.data[(keep_rows[i], keep_cols[j])]);
        let pruned = Self {
            row_ids: keep_rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            col_ids: keep_cols.iter().map(|&j| self.col_ids[j].clone()).collect(),
            data,
        };
        Ok((pruned, pruning))
    }
}

/// Marginals of a pruned matrix.
struct Margins<'a> {
    data: &'a DMatrix<f64>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    total: f64,
}

impl<'a> Margins<'a> {
    fn new(matrix: &'a AbundanceMatrix) -> Result<Self, OrdinationError> {
        let data = &matrix.data;
        let row_sums: Vec<f64> = (0..data.nrows()).map(|i| data.row(i).sum()).collect();
        let col_sums: Vec<f64> = (0..data.ncols()).map(|j| data.column(j).sum()).collect();
        if data.nrows() < 3
            || data.ncols() < 2
            || row_sums.iter().chain(&col_sums).any(|&s| s <= 0.0)
        {
            return Err(OrdinationError::TooSmall {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        let total = row_sums.iter().sum();
        Ok(Self {
            data,
            row_sums,
            col_sums,
            total,
        })
    }

    fn species_from_sites(&self, sites: &[f64]) -> Vec<f64> {
        let d = self.data;
        (0..d.ncols())
            .map(|j| d.column(j).iter().zip(sites).map(|(a, x)| a * x).sum::<f64>() / self.col_sums[j])
            .collect()
    }

    fn sites_from_species(&self, species: &[f64]) -> Vec<f64> {
        let d = self.data;
        (0..d.nrows())
            .map(|i| d.row(i).iter().zip(species).map(|(a, u)| a * u).sum::<f64>() / self.row_sums[i])
            .collect()
    }

    fn weighted_mean(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.row_sums).map(|(v, r)| v * r).sum::<f64>() / self.total
    }

    fn center(&self, x: &mut [f64]) {
        let m = self.weighted_mean(x);
        x.iter_mut().for_each(|v| *v -= m);
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.row_sums).map(|((a, b), r)| a * b * r).sum::<f64>() / self.total
    }

    /// Weighted variance about zero (scores are kept centred).
    fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }

    /// Removes the weighted projection on each (centred) earlier axis.
    fn orthogonalize(&self, x: &mut [f64], previous: &[Vec<f64>]) {
        for axis in previous {
            let nn = self.inner(axis, axis);
            if nn > 0.0 {
                let c = self.inner(x, axis) / nn;
                x.iter_mut().zip(axis).for_each(|(v, a)| *v -= c * a);
            }
        }
    }

    /// Subtracts, along each earlier axis in turn, the smoothed weighted mean
    /// of `x` over the segment each site falls in.
    fn detrend(&self, x: &mut [f64], segments: &[Vec<usize>], n_segments: usize) {
        for assignment in segments {
            let mut sum = vec![0.0; n_segments];
            let mut weight = vec![0.0; n_segments];
            for ((v, r), &s) in x.iter().zip(&self.row_sums).zip(assignment) {
                sum[s] += v * r;
                weight[s] += r;
            }
            let passes = smoothing_passes(&weight);
            for _ in 0..passes {
                smooth(&mut sum);
                smooth(&mut weight);
            }
            for (v, &s) in x.iter_mut().zip(assignment) {
                *v -= sum[s] / weight[s];
            }
        }
    }

    fn start_vector(&self) -> Vec<f64> {
        // Weighted mean column position: independent of row order.
        let positions: Vec<f64> = (1..=self.data.ncols()).map(|j| j as f64).collect();
        self.sites_from_species(&positions)
    }
}

/// One (¼, ½, ¼) running-mean pass; the end segments use (¾, ¼).
fn smooth(z: &mut [f64]) {
    let n = z.len();
    if n < 2 {
        return;
    }
    let old = z.to_vec();
    z[0] = 0.75 * old[0] + 0.25 * old[1];
    for k in 1..n - 1 {
        z[k] = 0.5 * old[k] + 0.25 * (old[k - 1] + old[k + 1]);
    }
    z[n - 1] = 0.25 * old[n - 2] + 0.75 * old[n - 1];
}

/// Number of smoothing passes DECORANA would apply to these segment weights:
/// repeat until three consecutive passes start with no empty segment, at
/// most 50.
fn smoothing_passes(weight: &[f64]) -> usize {
    let mut w = weight.to_vec();
    let mut clean = 0;
    for pass in 1..=50 {
        if w.iter().all(|&v| v > 0.0) {
            clean += 1;
        } else {
            clean = 0;
        }
        smooth(&mut w);
        if clean == 3 {
            return pass;
        }
    }
    50
}

/// Segment index of every score, `n_segments` equal-width bins over the range.
fn segment_assignment(scores: &[f64], n_segments: usize) -> Vec<usize> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    scores
        .iter()
        .map(|&s| {
            if width <= 0.0 {
                0
            } else {
                (((s - lo) / width * n_segments as f64) as usize).min(n_segments - 1)
            }
        })
        .collect()
}

/// Flips `sites` (and `species`) so the lowest-index site with the largest
/// absolute score is positive.
fn fix_sign(sites: &mut [f64], species: &mut [f64]) {
    let extreme = sites.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pivot = sites
        .iter()
        .position(|v| v.abs() >= extreme * (1.0 - 1e-9))
        .expect("non-empty scores");
    if sites[pivot] < 0.0 {
        sites.iter_mut().for_each(|v| *v = -*v);
        species.iter_mut().for_each(|v| *v = -*v);
    }
}

enum Constraint<'a> {
    Orthogonal(&'a [Vec<f64>]),
    Detrend {
        segments: &'a [Vec<usize>],
        n_segments: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaAxis {
    /// Site scores with zero weighted mean and unit weighted variance.
    pub site_scores: Vec<f64>,
    /// Weighted means of the site scores per species.
    pub species_scores: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
}

fn reciprocal_averaging(m: &Margins<'_>, axis: usize, constraint: Constraint<'_>) -> Result<CaAxis, OrdinationError> {
    let constrain = |x: &mut Vec<f64>| {
        m.center(x);
        match &constraint {
            Constraint::Orthogonal(previous) => m.orthogonalize(x, previous),
            Constraint::Detrend { segments, n_segments } => {
                m.detrend(x, segments, *n_segments);
                m.center(x);
            }
        }
    };

    let mut x = m.start_vector();
    constrain(&mut x);
    let mut norm = m.norm(&x);
    if norm.is_nan() || norm <= 1e-12 {
        // The column-position start can be blind to the axis; fall back to
        // alternating site weights before declaring the axis degenerate.
        x = (0..x.len()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + i as f64)).collect();
        constrain(&mut x);
        norm = m.norm(&x);
        if norm.is_nan() || norm <= 1e-12 {
            return Err(OrdinationError::Degenerate { axis });
        }
    }
    x.iter_mut().for_each(|v| *v /= norm);

    let mut change = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let species = m.species_from_sites(&x);
        let mut y = m.sites_from_species(&species);
        constrain(&mut y);
        let eigenvalue = m.norm(&y);
        if eigenvalue.is_nan() || eigenvalue <= 1e-12 {
            return Err(OrdinationError::Degenerate { axis });
        }
        y.iter_mut().for_each(|v| *v /= eigenvalue);
        change = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if change < TOLERANCE {
            let mut species = m.species_from_sites(&x);
            fix_sign(&mut x, &mut species);
            return Ok(CaAxis {
                site_scores: x,
                species_scores: species,
                eigenvalue,
                iterations: iteration,
            });
        }
    }
    Err(OrdinationError::NoConvergence {
        axis,
        iterations: MAX_ITERATIONS,
        change,
    })
}

/// One correspondence-analysis axis of a pruned matrix, orthogonal (in the
/// row-weighted inner product) to `previous_axes`.
pub fn ca_axis(matrix: &AbundanceMatrix, previous_axes: &[Vec<f64>]) -> Result<CaAxis, OrdinationError> {
    let m = Margins::new(matrix)?;
    for (index, axis) in previous_axes.iter().enumerate() {
        if axis.len() != matrix.data.nrows() {
            return Err(OrdinationError::PreviousAxisLength {
                index,
                expected: matrix.data.nrows(),
                got: axis.len(),
            });
        }
    }
    let mut previous: Vec<Vec<f64>> = previous_axes.to_vec();
    for p in &mut previous {
        m.center(p);
    }
    reciprocal_averaging(&m, previous_axes.len() + 1, Constraint::Orthogonal(&previous))
}

/// The first `n_axes` correspondence-analysis axes of a pruned matrix.
pub fn ca(matrix: &AbundanceMatrix, n_axes: usize) -> Result<Vec<CaAxis>, OrdinationError> {
    let mut axes: Vec<CaAxis> = Vec::with_capacity(n_axes);
    for _ in 0..n_axes {
        let previous: Vec<Vec<f64>> = axes.iter().map(|a| a.site_scores.clone()).collect();
        axes.push(ca_axis(matrix, &previous)?);
    }
    Ok(axes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DcaConfig {
    pub n_axes: usize,
    pub n_segments: usize,
}

impl Default for DcaConfig {
    fn default() -> Self {
        Self {
            n_axes: DEFAULT_AXES,
            n_segments: DEFAULT_SEGMENTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ordination {
    /// Ids of the rows that survived pruning, in matrix order.
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// rows × axes, unit weighted variance per axis.
    pub site_scores: DMatrix<f64>,
    /// columns × axes.
    pub species_scores: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub iterations: Vec<usize>,
    pub pruning: Pruning,
}

impl Ordination {
    pub fn axis(&self, k: usize) -> Vec<f64> {
        self.site_scores.column(k).iter().copied().collect()
    }
}

/// Detrended correspondence analysis by segments (without axis rescaling).
pub fn dca(matrix: &AbundanceMatrix, config: DcaConfig) -> Result<Ordination, OrdinationError> {
    match dca_leading(matrix, config)? {
        (ordination, None) => Ok(ordination),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`dca`], but a detrended axis that is degenerate or never converges
/// ends the ordination instead of failing it. Returns the axes resolved before
/// that point together with the reason. The first axis must always resolve.
pub fn dca_leading(
    matrix: &AbundanceMatrix,
    config: DcaConfig,
) -> Result<(Ordination, Option<OrdinationError>), OrdinationError> {
    if config.n_axes == 0 || config.n_segments == 0 {
        return Err(OrdinationError::BadConfig);
    }
    let (pruned, pruning) = matrix.prune()?;
    let m = Margins::new(&pruned)?;
    let mut axes: Vec<CaAxis> = Vec::with_capacity(config.n_axes);
    let mut segments: Vec<Vec<usize>> = Vec::new();
    let mut stopped = None;
    for k in 0..config.n_axes {
        let axis = if k == 0 {
            reciprocal_averaging(&m, 1, Constraint::Orthogonal(&[]))?
        } else {
            let detrended = reciprocal_averaging(
                &m,
                k + 1,
                Constraint::Detrend {
                    segments: &segments,
                    n_segments: config.n_segments,
                },
            );
            match detrended {
                Ok(axis) => axis,
                Err(e @ (OrdinationError::Degenerate { .. } | OrdinationError::NoConvergence { .. })) => {
                    stopped = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        };
        segments.push(segment_assignment(&axis.site_scores, config.n_segments));
        axes.push(axis);
    }
    let rows = pruned.data.nrows();
    let cols = pruned.data.ncols();
    let n = axes.len();
    let ordination = Ordination {
        site_scores: DMatrix::from_fn(rows, n, |i, k| axes[k].site_scores[i]),
        species_scores: DMatrix::from_fn(cols, n, |j, k| axes[k].species_scores[j]),
        eigenvalues: axes.iter().map(|a| a.eigenvalue).collect(),
        iterations: axes.iter().map(|a| a.iterations).collect(),
        row_ids: pruned.row_ids,
        col_ids: pruned.col_ids,
        pruning,
    };
    Ok((ordination, stopped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesResult {
    /// Orthogonal matrix taking the standardised second configuration onto the first.
    pub rotation: DMatrix<f64>,
    /// Scale applied to the (centred, unscaled) second configuration.
    pub scale: f64,
    /// `X ≈ scale · Y · rotation + 1 · translationᵀ` in original units.
    pub translation: DVector<f64>,
    /// Residual of the symmetric fit, `1 - (Σ singular values)²`.
    pub m12_squared: f64,
}

/// Centres the columns and returns the Frobenius norm of the centred matrix.
fn centre(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
    let means = DVector::from_fn(x.ncols(), |j, _| x.column(j).mean());
    let centred = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j]);
    let norm = centred.norm();
    (centred, means, norm)
}

/// Symmetric Procrustes analysis: both configurations centred and scaled to
/// unit sum of squares, rotated (reflections allowed) by the SVD of `XᵀY`.
pub fn procrustes(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<ProcrustesResult, OrdinationError> {
    if x.shape() != y.shape() {
        return Err(OrdinationError::ConfigurationShape(x.nrows(), x.ncols(), y.nrows(), y.ncols()));
    }
    if x.nrows() < 2 {
        return Err(OrdinationError::TooFewPoints);
    }
    let (xc, x_mean, x_norm) = centre(x);
    let (yc, y_mean, y_norm) = centre(y);
    let tiny = |norm: f64, m: &DMatrix<f64>| norm <= 1e-12 * (1.0 + m.amax());
    if tiny(x_norm, x) || tiny(y_norm, y) {
        return Err(OrdinationError::RankZero);
    }
    let xs = xc / x_norm;
    let ys = yc / y_norm;
    let svd = (xs.transpose() * &ys).svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let trace: f64 = svd.singular_values.iter().sum();
    let rotation = v_t.transpose() * u.transpose();
    let m12_squared = (1.0 - trace * trace).clamp(0.0, 1.0);
    let scale = trace * x_norm / y_norm;
    let translation = x_mean - (y_mean.transpose() * &rotation).transpose() * scale;
    Ok(ProcrustesResult {
        rotation,
        scale,
        translation,
        m12_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpcReport {
    pub correlation: f64,
    pub m12_squared: f64,
    /// Axes compared; fewer than requested when a detrended axis could not
    /// be resolved on either side.
    pub axes: usize,
    /// Why the comparison stopped short of the requested axes.
    pub unresolved: Option<String>,
    pub target_eigenvalues: Vec<f64>,
    pub predicted_eigenvalues: Vec<f64>,
    pub rows: usize,
    pub pruning: Pruning,
}

/// DCA-Procrustes correlation between two tables with identical ids.
///
/// Compares the leading axes both ordinations resolve; see [`dca_leading`].
pub fn dpc(target: &AbundanceMatrix, predicted: &AbundanceMatrix, config: DcaConfig) -> Result<DpcReport, OrdinationError> {
    if target.row_ids != predicted.row_ids {
        return Err(OrdinationError::IdMismatch { what: "row" });
    }
    if target.col_ids != predicted.col_ids {
        return Err(OrdinationError::IdMismatch { what: "column" });
    }
    let (t, p) = rayon::join(|| dca_leading(target, config), || dca_leading(predicted, config));
    let ((t, t_stop), (p, p_stop)) = (t?, p?);
    if t.row_ids != p.row_ids {
        return Err(OrdinationError::PrunedRowsDiffer {
            target: t.pruning.dropped_rows,
            predicted: p.pruning.dropped_rows,
        });
    }
    let axes = t.eigenvalues.len().min(p.eigenvalues.len());
    let unresolved = match (&t_stop, &p_stop) {
        (Some(e), _) if t.eigenvalues.len() == axes => Some(format!("target: {e}")),
        (_, Some(e)) => Some(format!("predicted: {e}")),
        _ => None,
    };
    let fit = procrustes(&t.site_scores.columns(0, axes).into_owned(), &p.site_scores.columns(0, axes).into_owned())?;
    Ok(DpcReport {
        correlation: (1.0 - fit.m12_squared).sqrt(),
        m12_squared: fit.m12_squared,
        axes,
        unresolved,
        target_eigenvalues: t.eigenvalues,
        predicted_eigenvalues: p.eigenvalues,
        rows: t.row_ids.len(),
        pruning: t.pruning,
    })
}
