//! Predicted leading-order behaviour of ergodic integrals on the cover and
//! its comparison with simulation.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{ergodic_integrals_at, CoverPoint, FlowError, Observable};
use crate::gauss::Cov2;
use crate::lattice::CoverIndex;
use crate::mc::{collect, sample_rng, uniform_point};
use crate::numerics::{det_inverse, median, quad_form, Compensated};
use crate::renorm::{AffineAuto, RenormError};
use crate::stats::{gaussian_walk, Cocycle, GAUSS_HALF};
use crate::surface::Origami;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("T must be at least 1, got {0}")]
    BadTime(f64),
    #[error("need 0 < |lambda| < 1, got {0}")]
    BadLambda(f64),
    #[error("renormalization depth K must be positive")]
    ZeroDepth,
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("covariance matrix must be {0}x{0} and positive definite")]
    BadCovariance(usize),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// `K = ceil(-ln T / ln |lambda|)`, the number of renormalization steps
/// that bring an orbit segment of length `T` down to length at most one.
pub fn log_star(t: f64, lambda: f64) -> Result<usize, AsymptoticsError> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(AsymptoticsError::BadTime(t));
    }
    let l = lambda.abs();
    if !(l > 0.0 && l < 1.0) {
        return Err(AsymptoticsError::BadLambda(lambda));
    }
    Ok((-t.ln() / l.ln()).ceil() as usize)
}

/// `(int G / (sigma sqrt(2 pi))) exp(-xi^2 / (2 sigma^2 K)) T / sqrt(K)`.
pub fn leading_term_1d(
    g_integral: f64,
    sigma: f64,
    xi: i64,
    t: f64,
    k: usize,
) -> Result<f64, AsymptoticsError> {
    if k == 0 {
        return Err(AsymptoticsError::ZeroDepth);
    }
    if !(sigma > 0.0) {
        return Err(AsymptoticsError::BadSigma(sigma));
    }
    let kf = k as f64;
    let xi = xi as f64;
    Ok(
        g_integral / (sigma * (2.0 * PI).sqrt())
            * (-xi * xi / (2.0 * sigma * sigma * kf)).exp()
            * t
            / kf.sqrt(),
    )
}

/// `(int G / det S) exp(-|S^{-1} xi|^2 / (2K)) (T / sqrt(K)) A (1, 1)^T`.
pub fn leading_term_2d(
    g_integral: f64,
    cov: &Cov2,
    xi: [i64; 2],
    t: f64,
    k: usize,
) -> Result<[f64; 2], AsymptoticsError> {
    if k == 0 {
        return Err(AsymptoticsError::ZeroDepth);
    }
    let kf = k as f64;
    let x = [xi[0] as f64, xi[1] as f64];
    let scalar = g_integral / cov.det() * (-cov.inv_norm2(x) / (2.0 * kf)).exp() * t / kf.sqrt();
    let v = cov.a_ones();
    Ok([scalar * v[0], scalar * v[1]])
}

/// `T * int G * (local-limit density of F_K at xi)` for covariance `sigma2`;
/// equals [`leading_term_1d`] when `d = 1`.
pub fn leading_term_llt(
    g_integral: f64,
    sigma2: &[Vec<f64>],
    xi: &CoverIndex,
    t: f64,
    k: usize,
) -> Result<f64, AsymptoticsError> {
    let d = sigma2.len();
    if k == 0 {
        return Err(AsymptoticsError::ZeroDepth);
    }
    let (det, inv) = det_inverse(sigma2).ok_or(AsymptoticsError::BadCovariance(d))?;
    if det <= 0.0 {
        return Err(AsymptoticsError::BadCovariance(d));
    }
    let kf = k as f64;
    let x: Vec<f64> = xi.components(d).iter().map(|&v| v as f64).collect();
    let density = (2.0 * PI * kf).powf(-(d as f64) / 2.0) / det.sqrt()
        * (-quad_form(&inv, &x) / (2.0 * kf)).exp();
    Ok(g_integral * t * density)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub sample: usize,
    pub start: CoverPoint,
    pub t: f64,
    pub k: usize,
    pub xi_k: Vec<i64>,
    pub measured: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub g_integral: f64,
    pub sigma_or_sigma2: Vec<Vec<f64>>,
    /// Size of the first neglected correction, `1/K`.
    pub residual_band: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionSummary {
    pub t: Vec<f64>,
    pub median_abs_ratio_err_by_t: Vec<f64>,
    pub sigma_used: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl ExpansionSummary {
    pub fn non_increasing(&self) -> bool {
        self.median_abs_ratio_err_by_t
            .windows(2)
            .all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionRun {
    pub reports: Vec<ExpansionReport>,
    pub summary: ExpansionSummary,
}

/// Inputs shared by the flow-side estimators.
pub struct FlowSetup<'a> {
    pub surface: &'a Origami,
    pub auto: &'a AffineAuto,
    pub observable: &'a Observable,
    /// Covariance of the index cocycle (`1 x 1` holds `sigma^2`).
    pub sigma2: Vec<Vec<f64>>,
}

impl FlowSetup<'_> {
    fn predicted(&self, xi: &CoverIndex, t: f64, k: usize) -> Result<f64, AsymptoticsError> {
        if self.sigma2.len() == 1 {
            leading_term_1d(
                self.observable.total_integral(),
                self.sigma2[0][0].sqrt(),
                xi.0[0],
                t,
                k,
            )
        } else {
            leading_term_llt(self.observable.total_integral(), &self.sigma2, xi, t, k)
        }
    }

    /// Return sequence `(int G / (sigma sqrt(2 pi))) T / sqrt(K)` (or its
    /// multivariate analogue).
    pub fn return_sequence(&self, t: f64, k: usize) -> Result<f64, AsymptoticsError> {
        self.predicted(&CoverIndex::ZERO, t, k)
    }

    /// Ergodic integrals at every `T` in `ts` and `F_K` for the matching
    /// `K = log_star(T)`, from one start point.
    fn run_start(
        &self,
        x: CoverPoint,
        ts: &[f64],
    ) -> Result<(Vec<f64>, Vec<usize>, Vec<CoverIndex>), AsymptoticsError> {
        let eig = self.auto.eigen()?;
        let ks: Vec<usize> = ts
            .iter()
            .map(|&t| log_star(t, eig.lambda))
            .collect::<Result<_, _>>()?;
        let measured = ergodic_integrals_at(self.surface, self.observable, x, eig.stable, ts)?;
        let mut xis = Vec::with_capacity(ks.len());
        let mut p = x;
        let mut done = 0;
        for &k in &ks {
            while done < k {
                p = self.auto.apply(p)?;
                done += 1;
            }
            xis.push(p.index);
        }
        Ok((measured, ks, xis))
    }

    fn draw_start<R: Rng>(
        &self,
        rng: &mut R,
        ts: &[f64],
    ) -> (CoverPoint, Vec<f64>, Vec<usize>, Vec<CoverIndex>) {
        loop {
            let x = uniform_point(rng, self.surface.n_squares());
            if let Ok((m, k, xi)) = self.run_start(x, ts) {
                return (x, m, k, xi);
            }
        }
    }
}

/// Compare measured ergodic integrals with the leading-order prediction
/// for `n_starts` uniform starts at index zero and each `T` in `ts`.
pub fn compare_expansion(
    setup: &FlowSetup<'_>,
    ts: &[f64],
    n_starts: u64,
    seed: u64,
    workers: usize,
) -> Result<ExpansionRun, AsymptoticsError> {
    let eig = setup.auto.eigen()?;
    let mut sorted = ts.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &t in &sorted {
        log_star(t, eig.lambda)?;
    }
    let runs = collect(n_starts, seed, workers, |_, rng| {
        setup.draw_start(rng, &sorted)
    });
    let g_int = setup.observable.total_integral();
    let mut reports = Vec::with_capacity(runs.len() * sorted.len());
    for (i, (x, measured, ks, xis)) in runs.iter().enumerate() {
        for (j, &t) in sorted.iter().enumerate() {
            let predicted = setup.predicted(&xis[j], t, ks[j])?;
            let ratio = if predicted == 0.0 {
                if measured[j] == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                measured[j] / predicted
            };
            reports.push(ExpansionReport {
                sample: i,
                start: *x,
                t,
                k: ks[j],
                xi_k: xis[j].components(setup.sigma2.len()).to_vec(),
                measured: measured[j],
                predicted,
                ratio,
                g_integral: g_int,
                sigma_or_sigma2: setup.sigma2.clone(),
                residual_band: 1.0 / ks[j].max(1) as f64,
            });
        }
    }
    let median_abs_ratio_err_by_t = sorted
        .iter()
        .map(|&t| {
            let mut errs: Vec<f64> = reports
                .iter()
                .filter(|r| r.t == t)
                .map(|r| (r.ratio - 1.0).abs())
                .collect();
            median(&mut errs)
        })
        .collect();
    Ok(ExpansionRun {
        reports,
        summary: ExpansionSummary {
            t: sorted,
            median_abs_ratio_err_by_t,
            sigma_used: setup.sigma2.clone(),
            lambda: eig.lambda,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WreAverage {
    pub t: f64,
    pub k: usize,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Ensemble average of the ergodic integral over uniform starts at index
/// zero against `a(T) E[exp(-Z^2/2)]`.
pub fn wre_average(
    setup: &FlowSetup<'_>,
    t: f64,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<WreAverage, AsymptoticsError> {
    let eig = setup.auto.eigen()?;
    let k = log_star(t, eig.lambda)?;
    let vals = collect(n, seed, workers, |_, rng| loop {
        let x = uniform_point(rng, setup.surface.n_squares());
        if let Ok(v) = ergodic_integrals_at(setup.surface, setup.observable, x, eig.stable, &[t]) {
            return v[0];
        }
    });
    let nf = vals.len() as f64;
    let mean = vals.iter().copied().collect::<Compensated>().value() / nf;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    let rhs = if setup.observable.is_zero() {
        0.0
    } else {
        setup.return_sequence(t, k)? * GAUSS_HALF
    };
    let ratio = if rhs == 0.0 { f64::NAN } else { mean / rhs };
    Ok(WreAverage {
        t,
        k,
        lhs: mean,
        lhs_stderr: (var / nf).sqrt(),
        rhs,
        ratio,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WreProxy {
    pub k: usize,
    pub mean: f64,
    pub stderr: f64,
    pub target: f64,
    pub n_samples: u64,
}

/// `(1/n) sum exp(-F_K^2 / (2 sigma^2 K))` (multivariate: the quadratic form
/// of the inverse covariance) over uniform starts.
pub fn wre_proxy<C: Cocycle + ?Sized>(
    c: &C,
    sigma2: &[Vec<f64>],
    k: usize,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<WreProxy, AsymptoticsError> {
    let d = c.rank();
    let (_, inv) = det_inverse(sigma2).ok_or(AsymptoticsError::BadCovariance(d))?;
    let kf = k as f64;
    let vals = collect(n, seed, workers, |_, rng| {
        let s = crate::stats::sample_sums(c, rng, &[k])[0];
        let x: Vec<f64> = s.components(d).iter().map(|&v| v as f64).collect();
        (-quad_form(&inv, &x) / (2.0 * kf)).exp()
    });
    let nf = n as f64;
    let mean = vals.iter().copied().collect::<Compensated>().value() / nf;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    // E exp(-|Z|^2/2) for a standard d-dimensional normal
    let target = 2f64.powf(-(d as f64) / 2.0);
    Ok(WreProxy {
        k,
        mean,
        stderr: (var / nf).sqrt(),
        target,
        n_samples: n,
    })
}

/// Grid `3 * 2^k <= n` used for double-logarithmic averages.
pub fn hore_grid(n: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 3.0;
    while t <= n {
        out.push(t);
        t *= 2.0;
    }
    out
}

/// Trapezoidal `int f d(ln ln T)` over the grid, divided by `ln ln n`.
fn loglog_average(grid: &[f64], values: &[f64], n: f64) -> f64 {
    let mut acc = Compensated::new();
    for i in 1..grid.len() {
        let ds = grid[i].ln().ln() - grid[i - 1].ln().ln();
        acc.add(0.5 * (values[i] + values[i - 1]) * ds);
    }
    acc.value() / n.ln().ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct HoreReport {
    pub n: f64,
    pub grid: Vec<f64>,
    pub value: f64,
    pub per_start: Vec<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub const BOOTSTRAP_REPS: usize = 1000;

/// Double-logarithmic average of `A_T / a(T)` over `T in [3, N]`, for
/// `n_starts` uniform starts, with a percentile bootstrap interval for
/// the mean over starts.
pub fn hore_average(
    setup: &FlowSetup<'_>,
    n_max: f64,
    n_starts: u64,
    seed: u64,
    workers: usize,
) -> Result<HoreReport, AsymptoticsError> {
    let eig = setup.auto.eigen()?;
    let grid = hore_grid(n_max);
    if grid.len() < 2 {
        return Err(AsymptoticsError::BadTime(n_max));
    }
    let ks: Vec<usize> = grid
        .iter()
        .map(|&t| log_star(t, eig.lambda))
        .collect::<Result<_, _>>()?;
    let zero = setup.observable.is_zero();
    let per_start = collect(n_starts, seed, workers, |_, rng| {
        let (_, measured, _, _) = setup.draw_start(rng, &grid);
        if zero {
            return 0.0;
        }
        let ratios: Vec<f64> = measured
            .iter()
            .zip(grid.iter().zip(&ks))
            .map(|(m, (&t, &k))| m / setup.return_sequence(t, k.max(1)).expect("validated"))
            .collect();
        loglog_average(&grid, &ratios, n_max)
    });
    let nf = per_start.len() as f64;
    let value = per_start.iter().sum::<f64>() / nf;
    let mut rng = sample_rng(seed, u64::MAX);
    let mut boots: Vec<f64> = (0..BOOTSTRAP_REPS)
        .map(|_| {
            (0..per_start.len())
                .map(|_| per_start[rng.random_range(0..per_start.len())])
                .sum::<f64>()
                / nf
        })
        .collect();
    boots.sort_by(f64::total_cmp);
    let lo = boots[(0.025 * BOOTSTRAP_REPS as f64) as usize];
    let hi = boots[(0.975 * BOOTSTRAP_REPS as f64) as usize - 1];
    Ok(HoreReport {
        n: n_max,
        grid,
        value,
        per_start,
        ci_low: lo,
        ci_high: hi,
    })
}

/// The same double-logarithmic average with the normalized ergodic integral
/// replaced by `sqrt(2) exp(-S_K^2 / (2 sigma^2 K))` for a Gaussian walk
/// `S`, `K = log_star(T)`. `ln_n` is `ln N`, so astronomically large `N`
/// are allowed. `K` is constant between consecutive `lambda^{-K}`, so the
/// integral in `ln ln T` is evaluated exactly.
pub fn hore_synthetic(
    lambda: f64,
    ln_n: f64,
    sigma: f64,
    seed: u64,
) -> Result<f64, AsymptoticsError> {
    let l = lambda.abs();
    if !(l > 0.0 && l < 1.0) {
        return Err(AsymptoticsError::BadLambda(lambda));
    }
    let rate = -l.ln();
    let ln3 = 3f64.ln();
    if !(ln_n > ln3) {
        return Err(AsymptoticsError::BadTime(ln_n.exp()));
    }
    let k_max = (ln_n / rate).ceil() as u64;
    let walk = gaussian_walk(sigma, k_max, seed);
    let s2 = sigma * sigma;
    let mut acc = Compensated::new();
    for k in 1..=k_max {
        // T with log_star(T) = k: ln T in ((k-1) rate, k rate]
        let lo = ((k - 1) as f64 * rate).max(ln3);
        let hi = (k as f64 * rate).min(ln_n);
        if hi <= lo {
            continue;
        }
        let s = walk[(k - 1) as usize];
        let f = std::f64::consts::SQRT_2 * (-(s * s) / (2.0 * s2 * k as f64)).exp();
        acc.add(f * (hi.ln() - lo.ln()));
    }
    Ok(acc.value() / ln_n.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::staircase;

    const LAMBDA: f64 = 0.171_572_875_253_809_9;

    #[test]
    fn log_star_values() {
        assert_eq!(log_star(1.0, LAMBDA).unwrap(), 0);
        assert_eq!(log_star(1e3, LAMBDA).unwrap(), 4);
        assert_eq!(log_star(1e6, LAMBDA).unwrap(), 8);
        assert_eq!(log_star(1e6, -LAMBDA).unwrap(), 8);
        assert!(log_star(0.5, LAMBDA).is_err());
        assert!(log_star(10.0, 1.0).is_err());
        assert!(log_star(10.0, 0.0).is_err());
    }

    #[test]
    fn log_star_monotone() {
        let mut last = 0;
        for i in 0..200 {
            let k = log_star(1.2f64.powi(i), LAMBDA).unwrap();
            assert!(k >= last);
            last = k;
        }
        let t = 1e5;
        assert!(log_star(t, 0.1).unwrap() <= log_star(t, 0.5).unwrap());
    }

    #[test]
    fn leading_term_pins() {
        let k = 9;
        let sigma = 0.7;
        let v = leading_term_1d(sigma * (2.0 * PI).sqrt(), sigma, 0, (k as f64).sqrt(), k).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(leading_term_1d(0.0, 1.0, 3, 10.0, 4).unwrap(), 0.0);
        let v = leading_term_1d(1.0, 1.0, 2, 100.0, 4).unwrap();
        let expect = 50.0 * (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 12.098).abs() < 1e-3);
        assert_eq!(
            leading_term_1d(1.0, 1.0, 0, 1.0, 0),
            Err(AsymptoticsError::ZeroDepth)
        );
        // multivariate version coincides in one dimension
        let w = leading_term_llt(
            1.0,
            &[vec![1.0]],
            &CoverIndex::from_slice(&[2]).unwrap(),
            100.0,
            4,
        )
        .unwrap();
        assert!((w - v).abs() < 1e-12);
    }

    #[test]
    fn leading_term_shape() {
        for xi in 0..20i64 {
            let a = leading_term_1d(1.0, 1.3, xi, 500.0, 7).unwrap();
            let b = leading_term_1d(1.0, 1.3, xi + 1, 500.0, 7).unwrap();
            assert!(b < a);
            let c = leading_term_1d(1.0, 1.3, xi, 501.0, 7).unwrap();
            assert!(c > a);
            let c3 = leading_term_1d(3.0, 1.3, xi, 500.0, 7).unwrap();
            assert!((c3 - 3.0 * a).abs() < 1e-13 * a);
        }
    }

    #[test]
    fn leading_term_2d_pins() {
        let id = Cov2::new(1.0, 0.0, 1.0).unwrap();
        let k = 16;
        let v = leading_term_2d(id.det(), &id, [0, 0], 4.0, k).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        assert_eq!(
            leading_term_2d(0.0, &id, [1, 2], 10.0, 3).unwrap(),
            [0.0, 0.0]
        );
        let c = Cov2::new(1.7, -0.4, 0.8).unwrap();
        let v = leading_term_2d(2.5, &c, [3, -1], 70.0, 5).unwrap();
        let a = c.a_ones();
        assert!((v[0] / v[1] - a[0] / a[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_observable_expansion() {
        let o = staircase(2).unwrap();
        let a = AffineAuto::from_word(&o, "hv").unwrap();
        let g = Observable::zero(&o);
        let setup = FlowSetup {
            surface: &o,
            auto: &a,
            observable: &g,
            sigma2: vec![vec![0.5]],
        };
        let run = compare_expansion(&setup, &[1e2, 1e3], 4, 1, 1).unwrap();
        assert!(run
            .reports
            .iter()
            .all(|r| r.measured == 0.0 && r.predicted == 0.0));
        let w = wre_average(&setup, 1e2, 8, 1, 1).unwrap();
        assert_eq!((w.lhs, w.rhs), (0.0, 0.0));
        let h = hore_average(&setup, 1e3, 4, 1, 1).unwrap();
        assert_eq!(h.value, 0.0);
    }

    #[test]
    fn expansion_is_deterministic_and_nonnegative() {
        let o = staircase(2).unwrap();
        let a = AffineAuto::from_word(&o, "hv").unwrap();
        let g = Observable::unit_bump(&o);
        let setup = FlowSetup {
            surface: &o,
            auto: &a,
            observable: &g,
            sigma2: vec![vec![0.5]],
        };
        let r1 = compare_expansion(&setup, &[1e3, 1e2], 6, 11, 1).unwrap();
        let r2 = compare_expansion(&setup, &[1e2, 1e3], 6, 11, 2).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        assert!(r1
            .reports
            .iter()
            .all(|r| r.measured >= 0.0 && r.predicted > 0.0));
    }

    #[test]
    fn synthetic_hore_tracks_asclt() {
        // both are logarithmic averages of the same walk; they differ only
        // in the weights ln(k/(k-1)) vs 1/k and the normalization
        for seed in [1, 2, 3] {
            let ln_n = 2e5 * -LAMBDA.ln();
            let h = hore_synthetic(LAMBDA, ln_n, 1.0, seed).unwrap();
            let k_max = 200_000;
            let a = crate::stats::asclt_average(1.0, k_max, seed);
            assert!((h - std::f64::consts::SQRT_2 * a).abs() < 0.1, "{h} vs {a}");
        }
        assert!(hore_synthetic(2.0, 10.0, 1.0, 1).is_err());
    }
}
