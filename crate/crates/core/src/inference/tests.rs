use super::*;
use crate::assembly::sample_h_on_faces;
use crate::coefficients::FrequencySet;
use crate::fixtures;
use crate::gmrf::sample;

/// log N(y; 0, S) for a dense symmetric positive definite `S`.
fn dense_gaussian_log_density(s: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    let mut l = s.to_vec();
    for j in 0..n {
        for k in 0..j {
            for i in j..n {
                l[i * n + j] -= l[i * n + k] * l[j * n + k];
            }
        }
        let d = l[j * n + j].sqrt();
        for i in j..n {
            l[i * n + j] /= d;
        }
    }
    let mut z = y.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    let log_det: f64 = (0..n).map(|i| 2.0 * l[i * n + i].ln()).sum();
    -0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
}

/// Dense inverse by Gauss-Jordan elimination.
fn dense_inverse(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs())).unwrap();
        for k in 0..n {
            m.swap(c * n + k, p * n + k);
            inv.swap(c * n + k, p * n + k);
        }
        let d = m[c * n + c];
        for k in 0..n {
            m[c * n + k] /= d;
            inv[c * n + k] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                for k in 0..n {
                    m[r * n + k] -= f * m[c * n + k];
                    inv[r * n + k] -= f * inv[c * n + k];
                }
            }
        }
    }
    inv
}

fn fourier_layout(grid: &GridSpec) -> ParamLayout {
    ParamLayout::fourier(grid.width(), grid.height(), FrequencySet::new([(0, 1), (1, -1), (1, 0)]).unwrap())
}

fn model(grid: GridSpec, layout: ParamLayout) -> Arc<LatentModel> {
    Arc::new(LatentModel::new(grid, KappaSpec::new(0.7).unwrap(), layout).unwrap())
}

fn fourier_theta() -> Vec<f64> {
    vec![1.3, 0.4, -0.8, 0.1, -0.2, 0.05, 0.3, -0.1, 0.0, 0.2, 0.1, 0.07, -0.3, 0.15, 0.02]
}

#[test]
fn cached_faces_match_direct_evaluation() {
    let grid = GridSpec::new(8.0, 6.0, 7, 5).unwrap();
    let cases = [
        (ParamLayout::Constant, vec![2.0, 0.5, -1.5]),
        (fourier_layout(&grid), fourier_theta()),
        (ParamLayout::FixedField(fixtures::swirl_base_field(8.0, 6.0)), vec![0.5, 5.0]),
    ];
    for (layout, theta) in cases {
        let m = model(grid, layout.clone());
        let cached = m.faces(&theta).unwrap();
        let direct = sample_h_on_faces(&grid, &layout.unpack(&theta).unwrap());
        for (a, b) in
            cached.vertical.iter().chain(&cached.horizontal).zip(direct.vertical.iter().chain(&direct.horizontal))
        {
            assert!(a.sub(b).frobenius_norm() <= 1e-13 * b.frobenius_norm(), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn exact_path_is_gaussian_log_density() {
    let grid = GridSpec::square(5.0, 6).unwrap();
    let m = model(grid, ParamLayout::Constant);
    let truth = [1.5, 0.3, 0.9];
    let u = sample(&m.precision_factor(&truth).unwrap(), 3).values;
    let post = Posterior::new(Arc::clone(&m), ObservationModel::exact(u.clone())).unwrap();
    for theta in [[1.5, 0.3, 0.9], [0.8, -0.2, 0.1], [3.0, 1.0, 1.0]] {
        let spec = m.spec(&theta).unwrap();
        let f = crate::assembly::assemble_precision(&grid, m.kappa(), &spec).unwrap().factorize().unwrap();
        let expected = gaussian_log_density(&f, &u).unwrap();
        assert!((post.log_posterior(&theta) - expected).abs() <= 1e-10 * expected.abs());
    }
}

#[test]
fn noisy_path_matches_dense_marginal_likelihood() {
    let grid = GridSpec::square(4.0, 4).unwrap();
    let m = model(grid, fourier_layout(&grid));
    let n = grid.num_cells();
    let y: Vec<f64> = (0..n).map(|k| ((k * 7 % 5) as f64 - 2.0) * 0.3).collect();
    let post = Posterior::new(Arc::clone(&m), ObservationModel::noisy(y.clone(), 400.0).unwrap()).unwrap();
    let shifted: Vec<f64> = y.iter().map(|v| v + 0.25).collect();
    let post_shifted =
        Posterior::new(Arc::clone(&m), ObservationModel::noisy(shifted.clone(), 400.0).unwrap()).unwrap();
    let mut t2 = fourier_theta();
    t2[0] = 0.6;
    t2[4] = -0.5;
    for theta in [fourier_theta(), t2] {
        let q = m.precision_factor(&theta).unwrap().precision().to_dense();
        let mut s = dense_inverse(&q, n);
        (0..n).for_each(|i| s[i * n + i] += 1.0 / 400.0);
        for (p, data) in [(&post, &y), (&post_shifted, &shifted)] {
            let expected = dense_gaussian_log_density(&s, data);
            let got = p.log_posterior(&theta);
            assert!((got - expected).abs() < 1e-8 * expected.abs().max(1.0), "{got} vs {expected}");
        }
    }
}

#[test]
fn selection_matches_dense_marginal_likelihood() {
    let grid = GridSpec::new(4.0, 3.0, 4, 3).unwrap();
    let m = model(grid, ParamLayout::Constant);
    let n = grid.num_cells();
    let cells = vec![0, 5, 5, 7, 11];
    let y = vec![0.3, -0.2, 0.1, 1.1, -0.7];
    let prec = vec![50.0, 20.0, 80.0, 10.0, 5.0];
    let obs = ObservationModel::noisy_general(n, Some(cells.clone()), y.clone(), prec.clone()).unwrap();
    let post = Posterior::new(Arc::clone(&m), obs).unwrap();
    let theta = [0.9, 0.6, -0.4];
    let cov = dense_inverse(&m.precision_factor(&theta).unwrap().precision().to_dense(), n);
    let k = cells.len();
    let mut s = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            s[a * k + b] = cov[cells[a] * n + cells[b]];
        }
        s[a * k + a] += 1.0 / prec[a];
    }
    let expected = dense_gaussian_log_density(&s, &y);
    assert!((post.log_posterior(&theta) - expected).abs() < 1e-8 * expected.abs());
}

#[test]
fn near_exact_noise_tracks_exact_path() {
    let grid = GridSpec::square(6.0, 6).unwrap();
    let m = model(grid, ParamLayout::Constant);
    let u = sample(&m.precision_factor(&[1.0, 0.5, 0.5]).unwrap(), 11).values;
    let exact = Posterior::new(Arc::clone(&m), ObservationModel::exact(u.clone())).unwrap();
    let noisy = Posterior::new(Arc::clone(&m), ObservationModel::noisy(u, 1e12).unwrap()).unwrap();
    let diffs: Vec<f64> = [[1.0, 0.5, 0.5], [0.7, 0.0, 1.0], [2.0, -0.3, 0.2], [1.4, 1.0, -1.0], [0.5, 0.2, 0.1]]
        .iter()
        .map(|t| noisy.log_posterior(t) - exact.log_posterior(t))
        .collect();
    for d in &diffs {
        assert!((d - diffs[0]).abs() < 1e-4, "{diffs:?}");
    }
}

#[test]
fn sign_flip_leaves_posterior_unchanged() {
    let grid = GridSpec::square(6.0, 6).unwrap();
    let layout = fourier_layout(&grid);
    let m = model(grid, layout.clone());
    let u = sample(&m.precision_factor(&fourier_theta()).unwrap(), 5).values;
    let post = Posterior::new(m, ObservationModel::exact(u)).unwrap();
    let a = post.log_posterior(&fourier_theta());
    let b = post.log_posterior(&layout.flip_sign(&fourier_theta()));
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn infeasible_theta_gives_negative_infinity() {
    let grid = GridSpec::square(3.0, 3).unwrap();
    let m = model(grid, ParamLayout::FixedField(fixtures::swirl_base_field(3.0, 3.0)));
    let u = vec![0.1; 9];
    let post = Posterior::new(m, ObservationModel::exact(u)).unwrap();
    assert!(post.log_posterior(&[0.5, 1.0]).is_finite());
    assert_eq!(post.log_posterior(&[0.0, 1.0]), f64::NEG_INFINITY);
    assert_eq!(post.log_posterior(&[0.5, -1.0]), f64::NEG_INFINITY);
    assert_eq!(post.log_posterior(&[f64::NAN, 1.0]), f64::NEG_INFINITY);
    assert_eq!(post.log_posterior(&[0.5]), f64::NEG_INFINITY);
    assert!(matches!(post.evaluate(&[-1.0, 1.0]), Err(Error::Infeasible(_))));
}

#[test]
fn observation_validation() {
    assert!(ObservationModel::noisy(vec![1.0, 2.0], 0.0).is_err());
    assert!(ObservationModel::noisy(vec![1.0, f64::NAN], 1.0).is_err());
    assert!(ObservationModel::noisy_selection(4, vec![0, 4], vec![1.0, 2.0], 1.0).is_err());
    assert!(ObservationModel::noisy_selection(4, vec![0, 3], vec![1.0], 1.0).is_err());
    let obs = ObservationModel::noisy_selection(4, vec![2, 0], vec![1.0, 2.0], 3.0).unwrap();
    assert_eq!(obs.operator().to_dense(), vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let grid = GridSpec::square(3.0, 3).unwrap();
    assert!(Posterior::new(model(grid, ParamLayout::Constant), obs).is_err());
}

#[test]
fn discrepancy_examples() {
    let grid = GridSpec::square(20.0, 10).unwrap();
    let h = AnisotropySpec::new(1.0, fixtures::wavy_vector_field(20.0, 20.0)).unwrap();
    assert_eq!(h_discrepancy(&h, &h, &grid), 0.0);
    let shifted = AnisotropySpec::new(1.75, fixtures::wavy_vector_field(20.0, 20.0)).unwrap();
    assert!((h_discrepancy(&h, &shifted, &grid) - 0.75 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn identical_seeds_give_zero_spread() {
    let grid = GridSpec::square(6.0, 6).unwrap();
    let m = model(grid, ParamLayout::Constant);
    let truth = [1.0, 0.4, 0.8];
    let r =
        simulation_study_with_seeds(&m, &truth, &ObservationTemplate::Exact, &[9, 9], &MapOptions::default()).unwrap();
    assert_eq!(r.failures, 0);
    assert_eq!(r.estimates[0], r.estimates[1]);
    assert!(r.sample_sd.iter().all(|&s| s == 0.0));
    for i in 0..3 {
        assert_eq!(r.bias[i], r.estimates[0][i] - truth[i]);
    }
    assert!(simulation_study_with_seeds(&m, &truth, &ObservationTemplate::Exact, &[9], &MapOptions::default()).is_err());
}

#[test]
fn fit_recovers_parameters_on_small_grid() {
    let grid = GridSpec::square(20.0, 30).unwrap();
    let m = Arc::new(LatentModel::new(grid, KappaSpec::new(1.0).unwrap(), ParamLayout::Constant).unwrap());
    let truth = [3.0, 0.707, 1.225];
    let u = sample(&m.precision_factor(&truth).unwrap(), 2024).values;
    let post = Posterior::new(m, ObservationModel::exact(u)).unwrap();
    let fit = map_estimate(&post, &[1.0, 0.1, 0.1], &MapOptions::default()).unwrap();
    assert!(fit.converged);
    let sd = fit.std_devs.clone().unwrap();
    let flipped = post.model().layout().flip_sign(&fit.theta);
    let theta = if fit.theta[2] < 0.0 { flipped } else { fit.theta.clone() };
    for i in 0..3 {
        assert!((theta[i] - truth[i]).abs() < 4.0 * sd[i], "{theta:?} {sd:?}");
    }
    assert!(fit.log_post >= post.log_posterior(&truth));
}
