mod common;

use common::{balanced, synthetic_design, ys};
use curricula_core::anova::{f_p_value, fit_ols, hc3_covariance, residual_quantiles, type3_anova};
use curricula_core::design::decode_variant;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

fn random_system(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-2.0..2.0) });
    let y = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    (x, y)
}

#[test]
fn coefficients_match_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (x, y) = random_system(&mut rng, 20, 5);
        let fit = fit_ols(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_column_slice(&y);
        let oracle = xtx.lu().solve(&xty).unwrap();
        assert!((&fit.coefficients - &oracle).amax() < 1e-10);
    }
}

#[test]
fn leverage_matches_hat_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (x, y) = random_system(&mut rng, 15, 4);
    let fit = fit_ols(&x, &y).unwrap();
    let hat = &x * (x.transpose() * &x).try_inverse().unwrap() * x.transpose();
    for i in 0..15 {
        assert!((fit.leverage[i] - hat[(i, i)]).abs() < 1e-12);
    }
    assert!((fit.leverage.sum() - 4.0).abs() < 1e-12);
}

/// Elementwise sandwich: Σ_k Σ_l A_ik (Σ_t x_tk w_t x_tl) A_lj.
fn brute_hc3(x: &DMatrix<f64>, e: &[f64], h: &[f64]) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let a = (x.transpose() * x).try_inverse().unwrap();
    let mut v = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                for l in 0..p {
                    let mut meat = 0.0;
                    for t in 0..n {
                        meat += x[(t, k)] * x[(t, l)] * e[t] * e[t] / ((1.0 - h[t]) * (1.0 - h[t]));
                    }
                    s += a[(i, k)] * meat * a[(l, j)];
                }
            }
            v[(i, j)] = s;
        }
    }
    v
}

#[test]
fn hc3_matches_triple_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (x, y) = random_system(&mut rng, 30, 4);
        let fit = fit_ols(&x, &y).unwrap();
        let a = (x.transpose() * &x).try_inverse().unwrap();
        let h: Vec<f64> = (0..30).map(|t| (x.row(t) * &a * x.row(t).transpose())[(0, 0)]).collect();
        let e: Vec<f64> = (0..30)
            .map(|t| y[t] - (x.row(t) * &fit.coefficients)[(0, 0)])
            .collect();
        let oracle = brute_hc3(&x, &e, &h);
        let v = hc3_covariance(&fit, &x).unwrap();
        assert!((v - oracle).amax() < 1e-10);
    }
}

fn one_way_f(groups: &[Vec<f64>]) -> f64 {
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let k = groups.len() as f64;
    (ssb / (k - 1.0)) / (ssw / (n as f64 - k))
}

#[test]
fn classical_f_matches_one_way_textbook() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (levels, reps) in [(2usize, 3usize), (3, 4), (4, 2)] {
        let design = synthetic_design(&[levels]);
        for _ in 0..100 {
            let shift: Vec<f64> = (0..levels).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (dm, obs) = balanced(&design, reps, |v, _| shift[v.mode_code as usize] + rng.gen_range(-1.0..1.0));
            let mut groups = vec![Vec::new(); levels];
            for (v, y) in &obs {
                groups[v.mode_code as usize].push(*y);
            }
            let t = type3_anova(&dm, &ys(&obs), false).unwrap();
            let f = t.row("F0").unwrap().f.unwrap();
            assert!((f - one_way_f(&groups)).abs() < 1e-8, "{f} vs {}", one_way_f(&groups));
        }
    }
}

/// F statistics for A, B and A:B in a balanced a x b x r layout.
fn two_way_f(cells: &[Vec<Vec<f64>>]) -> (f64, f64, f64) {
    let a = cells.len();
    let b = cells[0].len();
    let r = cells[0][0].len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let cell_mean: Vec<Vec<f64>> = cells.iter().map(|row| row.iter().map(|c| mean(c)).collect()).collect();
    let row_mean: Vec<f64> = cell_mean.iter().map(|row| mean(row)).collect();
    let col_mean: Vec<f64> = (0..b).map(|j| (0..a).map(|i| cell_mean[i][j]).sum::<f64>() / a as f64).collect();
    let grand = mean(&row_mean);
    let ss_a = (b * r) as f64 * row_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = (a * r) as f64 * col_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut sse = 0.0;
    for i in 0..a {
        for j in 0..b {
            ss_ab += r as f64 * (cell_mean[i][j] - row_mean[i] - col_mean[j] + grand).powi(2);
            sse += cells[i][j].iter().map(|v| (v - cell_mean[i][j]).powi(2)).sum::<f64>();
        }
    }
    let mse = sse / (a * b * (r - 1)) as f64;
    (
        ss_a / (a - 1) as f64 / mse,
        ss_b / (b - 1) as f64 / mse,
        ss_ab / ((a - 1) * (b - 1)) as f64 / mse,
    )
}

#[test]
fn classical_f_matches_two_way_textbook() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for (la, lb, reps) in [(2usize, 3usize, 3usize), (3, 4, 2), (2, 2, 5)] {
        let design = synthetic_design(&[la, lb]);
        for _ in 0..100 {
            let effect: Vec<f64> = (0..la * lb).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (dm, obs) = balanced(&design, reps, |v, _| effect[v.mode_code as usize] + rng.gen_range(-1.0..1.0));
            let mut cells = vec![vec![Vec::new(); lb]; la];
            for (v, y) in &obs {
                let lv = decode_variant(&design, *v).unwrap();
                cells[lv.0[0]][lv.0[1]].push(*y);
            }
            let (fa, fb, fab) = two_way_f(&cells);
            let t = type3_anova(&dm, &ys(&obs), false).unwrap();
            assert!((t.row("F0").unwrap().f.unwrap() - fa).abs() < 1e-8);
            assert!((t.row("F1").unwrap().f.unwrap() - fb).abs() < 1e-8);
            assert!((t.row("Interaction").unwrap().f.unwrap() - fab).abs() < 1e-8);
        }
    }
}

/// ∫_0^1 g(u) du by the tanh-sinh rule, refined until successive levels agree.
fn tanh_sinh(g: impl Fn(f64, f64) -> f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let mut h = 1.0f64;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let mut sum = 0.0;
        let kmax = (6.0 / h) as i64;
        for k in -kmax..=kmax {
            let t = k as f64 * h;
            let s = FRAC_PI_2 * t.sinh();
            let ch = s.cosh();
            // u = (1 + tanh s)/2 and 1 - u, both without cancellation.
            let u = 1.0 / (1.0 + (-2.0 * s).exp());
            let one_minus_u = 1.0 / (1.0 + (2.0 * s).exp());
            if u <= 0.0 || one_minus_u <= 0.0 {
                continue;
            }
            let w = 0.5 * FRAC_PI_2 * t.cosh() / (ch * ch);
            let val = g(u, one_minus_u);
            if val.is_finite() {
                sum += w * val;
            }
        }
        let est = sum * h;
        if (est - prev).abs() < 1e-13 {
            return est;
        }
        prev = est;
        h /= 2.0;
    }
    prev
}

/// Upper tail of F(d1, d2) by integrating its density over x = f + u / (1 - u).
fn integrated_tail(f: f64, d1: f64, d2: f64) -> f64 {
    let ln_b = statrs::function::beta::ln_beta(d1 / 2.0, d2 / 2.0);
    let density = |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        ((d1 / 2.0) * (d1 / d2).ln() + (d1 / 2.0 - 1.0) * x.ln()
            - ((d1 + d2) / 2.0) * (1.0 + d1 * x / d2).ln()
            - ln_b)
            .exp()
    };
    tanh_sinh(|u, v| {
        let x = f + u / v;
        density(x) / (v * v)
    })
}

#[test]
fn p_values_match_density_integration() {
    for &f in &[0.1, 0.5, 1.0, 2.0, 4.9646, 10.0, 30.0] {
        for &d1 in &[1usize, 2, 3, 5, 10, 26] {
            for &d2 in &[1usize, 5, 10, 32, 48, 64] {
                let p = f_p_value(f, d1, d2).unwrap();
                let oracle = integrated_tail(f, d1 as f64, d2 as f64);
                assert!((p - oracle).abs() < 1e-9, "F={f} ({d1},{d2}): {p} vs {oracle}");
            }
        }
    }
    let oracle = integrated_tail(4.9646, 1.0, 10.0);
    assert!((oracle - 0.05).abs() < 1e-4);
}

#[test]
fn normal_residual_quantiles_hug_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 400;
    let noise = Normal::new(0.0, 2.0).unwrap();
    let y: Vec<f64> = (0..n).map(|_| 5.0 + noise.sample(&mut rng)).collect();
    let x = DMatrix::from_element(n, 1, 1.0);
    let fit = fit_ols(&x, &y).unwrap();
    let q = residual_quantiles(&fit).unwrap();
    let phi = StdNormal::standard();
    // Kolmogorov distance of the standardized residuals, 99% bound.
    let mut d: f64 = 0.0;
    for (i, (theory, z)) in q.iter().enumerate() {
        assert!((phi.cdf(*theory) - (i as f64 + 0.5) / n as f64).abs() < 1e-10);
        let ecdf_hi = (i + 1) as f64 / n as f64;
        let ecdf_lo = i as f64 / n as f64;
        d = d.max((phi.cdf(*z) - ecdf_hi).abs()).max((phi.cdf(*z) - ecdf_lo).abs());
    }
    assert!(d < 1.63 / (n as f64).sqrt(), "D = {d}");
    let mid = &q[n / 10..n - n / 10];
    assert!(mid.iter().all(|(t, z)| (t - z).abs() < 0.35));
    assert!(phi.pdf(0.0) > 0.0);
}
