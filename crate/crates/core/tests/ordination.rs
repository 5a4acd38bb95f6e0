use coverkit::ordination::{ca, ca_axis, dca, dpc, procrustes, AbundanceMatrix, DcaConfig};
use coverkit::rng::SeededRng;
use nalgebra::{DMatrix, SymmetricEigen};

fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> AbundanceMatrix {
    let data = DMatrix::from_fn(rows, cols, |_, _| {
        if rng.unit_f64() < 0.2 {
            0.0
        } else {
            rng.range_f64(0.0, 10.0)
        }
    });
    AbundanceMatrix::new(
        (0..rows).map(|i| format!("r{i}")).collect(),
        (0..cols).map(|j| format!("c{j}")).collect(),
        data,
    )
    .unwrap()
}

/// Site scores and eigenvalues of the first `k` CA axes from the dense
/// eigendecomposition of the doubly standardised residual matrix.
fn dense_ca(a: &DMatrix<f64>, k: usize) -> Vec<(f64, Vec<f64>)> {
    let total = a.sum();
    let r: Vec<f64> = (0..a.nrows()).map(|i| a.row(i).sum()).collect();
    let c: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).sum()).collect();
    let s = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        (a[(i, j)] - r[i] * c[j] / total) / (r[i] * c[j]).sqrt()
    });
    let eig = SymmetricEigen::new(&s * s.transpose());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    order
        .into_iter()
        .take(k)
        .map(|idx| {
            let v = eig.eigenvectors.column(idx);
            let scores = (0..a.nrows()).map(|i| v[i] * (total / r[i]).sqrt()).collect();
            (eig.eigenvalues[idx], scores)
        })
        .collect()
}

fn max_diff_up_to_sign(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

#[test]
fn reciprocal_averaging_matches_dense_eigensolver() {
    let mut rng = SeededRng::new(11);
    let mut checked = 0;
    for case in 0..40 {
        let rows = 3 + rng.below(18) as usize;
        let cols = 2 + rng.below(19) as usize;
        let (m, _) = match random_matrix(&mut rng, rows, cols).prune() {
            Ok(p) => p,
            Err(_) => continue,
        };
        let oracle = dense_ca(m.data(), 1);
        let axis = ca_axis(&m, &[]).unwrap();
        let diff = max_diff_up_to_sign(&axis.site_scores, &oracle[0].1);
        assert!(diff < 1e-6, "case {case}: scores differ by {diff}");
        assert!((axis.eigenvalue - oracle[0].0).abs() < 1e-9, "case {case}");
        checked += 1;
    }
    assert!(checked >= 35);
}

#[test]
fn eigenvalues_are_in_unit_interval_and_non_increasing() {
    let mut rng = SeededRng::new(5);
    for _ in 0..10 {
        let (m, _) = random_matrix(&mut rng, 15, 8).prune().unwrap();
        let axes = ca(&m, 3).unwrap();
        for pair in axes.windows(2) {
            assert!(pair[1].eigenvalue <= pair[0].eigenvalue + 1e-8);
        }
        assert!(axes.iter().all(|a| a.eigenvalue > 0.0 && a.eigenvalue <= 1.0 + 1e-12));
        let oracle = dense_ca(m.data(), 3);
        for (axis, (value, scores)) in axes.iter().zip(&oracle) {
            assert!((axis.eigenvalue - value).abs() < 1e-8);
            assert!(max_diff_up_to_sign(&axis.site_scores, scores) < 1e-5);
        }
    }
}

fn gaussian_gradient(sites: usize, species: usize, tolerance: f64) -> AbundanceMatrix {
    let span = (sites - 1) as f64;
    let rows: Vec<Vec<f64>> = (0..sites)
        .map(|i| {
            (0..species)
                .map(|j| {
                    let optimum = span * j as f64 / (species - 1) as f64;
                    10.0 * (-(i as f64 - optimum).powi(2) / (2.0 * tolerance * tolerance)).exp()
                })
                .collect()
        })
        .collect();
    AbundanceMatrix::from_rows(&rows).unwrap()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        out[i] = rank as f64;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn unimodal_gradient_order_is_recovered() {
    let m = gaussian_gradient(10, 5, 2.0);
    let axis = ca_axis(&m, &[]).unwrap();
    let planted: Vec<f64> = (0..10).map(f64::from).collect();
    assert_eq!(spearman(&axis.site_scores, &planted).abs(), 1.0);
}

#[test]
fn detrending_flattens_the_arch() {
    let m = gaussian_gradient(40, 20, 8.0);
    let ca_axes = ca(&m, 2).unwrap();
    let ordination = dca(&m, DcaConfig::default()).unwrap();
    assert!(
        ordination.eigenvalues[1] < ca_axes[1].eigenvalue,
        "{} vs {}",
        ordination.eigenvalues[1],
        ca_axes[1].eigenvalue
    );
    // The CA second axis is a quadratic of the first; detrended scores are not.
    let quadratic_fit = |x: &[f64], y: &[f64]| {
        let design = DMatrix::from_fn(x.len(), 3, |i, k| x[i].powi(k as i32));
        let coef = design.clone().svd(true, true).solve(&DMatrix::from_column_slice(y.len(), 1, y), 1e-12).unwrap();
        let fitted = design * coef;
        let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
        1.0 - ss_res / ss_tot
    };
    let ca_r2 = quadratic_fit(&ca_axes[0].site_scores, &ca_axes[1].site_scores);
    let dca_r2 = quadratic_fit(&ordination.axis(0), &ordination.axis(1));
    assert!(ca_r2 > 0.8 && dca_r2 < ca_r2, "{ca_r2} {dca_r2}");
}

#[test]
fn one_axis_dca_is_ca_axis_one() {
    let mut rng = SeededRng::new(3);
    let (m, _) = random_matrix(&mut rng, 12, 6).prune().unwrap();
    let d = dca(&m, DcaConfig { n_axes: 1, n_segments: 26 }).unwrap();
    let a = ca_axis(&m, &[]).unwrap();
    assert_eq!(d.axis(0), a.site_scores);
    assert_eq!(d.eigenvalues[0], a.eigenvalue);
}

#[test]
fn row_permutation_permutes_scores() {
    let mut rng = SeededRng::new(8);
    let m = random_matrix(&mut rng, 14, 7);
    let mut order: Vec<usize> = (0..14).collect();
    rng.shuffle(&mut order);
    let permuted = AbundanceMatrix::new(
        order.iter().map(|&i| m.row_ids()[i].clone()).collect(),
        m.col_ids().to_vec(),
        DMatrix::from_fn(14, 7, |i, j| m.data()[(order[i], j)]),
    )
    .unwrap();
    let a = dca(&m, DcaConfig::default()).unwrap();
    let b = dca(&permuted, DcaConfig::default()).unwrap();
    for k in 0..2 {
        let original = a.axis(k);
        let moved: Vec<f64> = order.iter().map(|&i| original[i]).collect();
        assert!(max_diff_up_to_sign(&moved, &b.axis(k)) < 1e-7, "axis {k}");
    }
}

#[test]
fn scores_ignore_global_scaling() {
    let mut rng = SeededRng::new(21);
    let m = random_matrix(&mut rng, 16, 9);
    let base = dca(&m, DcaConfig::default()).unwrap();
    for k in [1e-6, 0.5, 3.0, 1e4] {
        let scaled = dca(&m.scaled(k).unwrap(), DcaConfig::default()).unwrap();
        assert!((scaled.site_scores.clone() - &base.site_scores).amax() < 1e-7, "k = {k}");
        let report = dpc(&m, &m.scaled(k).unwrap(), DcaConfig::default()).unwrap();
        assert!((report.correlation - 1.0).abs() < 1e-6);
    }
}

fn standardise(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for j in 0..c.ncols() {
        let mean = c.column(j).mean();
        c.column_mut(j).add_scalar_mut(-mean);
    }
    let n = c.norm();
    c / n
}

/// `1 - max tr(Xᵀ Y R)²` over 2-D rotations and reflections, by grid search
/// followed by golden-section refinement.
fn m12_by_search(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let (xs, ys) = (standardise(x), standardise(y));
    let cross = xs.transpose() * ys;
    let objective = |theta: f64, reflect: bool| {
        let (s, c) = theta.sin_cos();
        let r = if reflect {
            DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
        } else {
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        };
        (&cross * r.transpose()).trace()
    };
    let mut best = f64::NEG_INFINITY;
    for reflect in [false, true] {
        let steps = 720;
        let step = std::f64::consts::TAU / steps as f64;
        let start = (0..steps)
            .map(|i| i as f64 * step)
            .max_by(|&a, &b| objective(a, reflect).total_cmp(&objective(b, reflect)))
            .unwrap();
        let (mut lo, mut hi) = (start - step, start + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if objective(a, reflect) < objective(b, reflect) {
                lo = a;
            } else {
                hi = b;
            }
        }
        best = best.max(objective(0.5 * (lo + hi), reflect));
    }
    1.0 - best * best
}

#[test]
fn procrustes_matches_rotation_search() {
    let mut rng = SeededRng::new(99);
    for _ in 0..25 {
        let x = DMatrix::from_fn(10, 2, |_, _| rng.standard_normal());
        let y = DMatrix::from_fn(10, 2, |_, _| rng.standard_normal());
        let fit = procrustes(&x, &y).unwrap();
        assert!(fit.m12_squared > 0.0 && fit.m12_squared < 1.0);
        assert!((fit.m12_squared - m12_by_search(&x, &y)).abs() < 1e-9);
        let back = procrustes(&y, &x).unwrap();
        assert!((fit.m12_squared - back.m12_squared).abs() < 1e-10);
        let identity = &fit.rotation.transpose() * &fit.rotation;
        assert!((identity - DMatrix::identity(2, 2)).amax() < 1e-8);
        assert!(fit.scale > 0.0);
    }
}

#[test]
fn procrustes_is_similarity_invariant() {
    let mut rng = SeededRng::new(4);
    for _ in 0..20 {
        let x = DMatrix::from_fn(12, 3, |_, _| rng.standard_normal());
        let q = DMatrix::from_fn(3, 3, |_, _| rng.standard_normal()).qr().q();
        let shift = nalgebra::RowDVector::from_fn(3, |_, _| rng.range_f64(-5.0, 5.0));
        let mut y = &x * &q * 2.0;
        for mut row in y.row_iter_mut() {
            row += &shift;
        }
        assert!(procrustes(&x, &y).unwrap().m12_squared < 1e-9);
    }
}

#[test]
fn dpc_detects_broken_row_correspondence() {
    let m = gaussian_gradient(12, 6, 2.0);
    let mut order: Vec<usize> = (0..12).collect();
    SeededRng::new(2).shuffle(&mut order);
    let shuffled = AbundanceMatrix::new(
        m.row_ids().to_vec(),
        m.col_ids().to_vec(),
        DMatrix::from_fn(12, 6, |i, j| m.data()[(order[i], j)]),
    )
    .unwrap();
    let same = dpc(&m, &m, DcaConfig::default()).unwrap();
    let broken = dpc(&m, &shuffled, DcaConfig::default()).unwrap();
    assert_eq!(same.correlation, 1.0);
    assert!(broken.correlation < 1.0 && broken.correlation >= 0.0);
}
