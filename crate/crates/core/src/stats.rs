//! Monte Carlo statistics of integer cocycles over an automorphism: lagged
//! covariances, variance growth, local-limit histograms, characteristic
//! function decay and the almost-sure central limit average.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::flow::CoverPoint;
use crate::lattice::CoverIndex;
use crate::mc::{ensemble, sample_rng, uniform_point};
use crate::numerics::{det_inverse, quad_form, Compensated};
use crate::renorm::{AffineAuto, RenormError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("covariance matrix is singular or not positive definite")]
    DegenerateSigma,
    #[error(
        "characteristic function estimate unstable: log-modulus {at_k:e} at K vs {at_2k:e} at 2K"
    )]
    Unstable { at_k: f64, at_2k: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// An integer-valued cocycle over a measure-preserving map of the base.
pub trait Cocycle: Sync {
    fn rank(&self) -> usize;
    fn n_squares(&self) -> usize;
    /// Image of `p` together with the cocycle value at `p`.
    fn step(&self, p: CoverPoint) -> Result<(CoverPoint, CoverIndex), RenormError>;
}

/// The index jump of the lifted automorphism.
#[derive(Debug, Clone, Copy)]
pub struct FrobeniusCocycle<'a> {
    pub auto: &'a AffineAuto,
    pub d: usize,
}

impl<'a> FrobeniusCocycle<'a> {
    pub fn new(auto: &'a AffineAuto, d: usize) -> Self {
        FrobeniusCocycle { auto, d }
    }
}

impl Cocycle for FrobeniusCocycle<'_> {
    fn rank(&self) -> usize {
        self.d
    }
    fn n_squares(&self) -> usize {
        self.auto.n_squares()
    }
    fn step(&self, p: CoverPoint) -> Result<(CoverPoint, CoverIndex), RenormError> {
        self.auto.step_base(p)
    }
}

/// `g - g∘psi` in the first coordinate, for an integer function `g` of the square.
#[derive(Debug, Clone)]
pub struct TelescopingCocycle<'a> {
    pub auto: &'a AffineAuto,
    pub g: Vec<i64>,
}

impl Cocycle for TelescopingCocycle<'_> {
    fn rank(&self) -> usize {
        1
    }
    fn n_squares(&self) -> usize {
        self.auto.n_squares()
    }
    fn step(&self, p: CoverPoint) -> Result<(CoverPoint, CoverIndex), RenormError> {
        let (q, _) = self.auto.step_base(p)?;
        let mut f = CoverIndex::ZERO;
        f.0[0] = self.g[p.square] - self.g[q.square];
        Ok((q, f))
    }
}

/// Draw a uniform start and record `len` consecutive cocycle values,
/// redrawing from the same stream if the orbit hits a singular set.
pub fn sample_orbit<C: Cocycle + ?Sized>(
    c: &C,
    rng: &mut ChaCha8Rng,
    len: usize,
) -> Vec<CoverIndex> {
    let mut out = Vec::with_capacity(len);
    'retry: loop {
        out.clear();
        let mut p = uniform_point(rng, c.n_squares());
        for _ in 0..len {
            match c.step(p) {
                Ok((q, f)) => {
                    out.push(f);
                    p = q;
                }
                Err(_) => continue 'retry,
            }
        }
        return out;
    }
}

/// Ergodic sums `F_K` at each `K` in the increasing list `ks`, along one orbit.
pub fn sample_sums<C: Cocycle + ?Sized>(
    c: &C,
    rng: &mut ChaCha8Rng,
    ks: &[usize],
) -> Vec<CoverIndex> {
    let kmax = ks.last().copied().unwrap_or(0);
    'retry: loop {
        let mut p = uniform_point(rng, c.n_squares());
        let mut sum = CoverIndex::ZERO;
        let mut out = Vec::with_capacity(ks.len());
        let mut next = 0;
        for step in 0..=kmax {
            while next < ks.len() && ks[next] == step {
                out.push(sum);
                next += 1;
            }
            if step == kmax {
                break;
            }
            match c.step(p) {
                Ok((q, f)) => {
                    sum += f;
                    p = q;
                }
                Err(_) => continue 'retry,
            }
        }
        return out;
    }
}

pub type Mat = Vec<Vec<f64>>;

fn zeros(d: usize) -> Mat {
    vec![vec![0.0; d]; d]
}

/// Running mean and variance of a fixed number of scalar channels.
#[derive(Debug, Clone)]
struct Moments {
    n: u64,
    sum: Vec<Compensated>,
    sum_sq: Vec<Compensated>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            n: 0,
            sum: vec![Compensated::new(); k],
            sum_sq: vec![Compensated::new(); k],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for (i, &v) in x.iter().enumerate() {
            self.sum[i].add(v);
            self.sum_sq[i].add(v * v);
        }
    }

    fn merge(&mut self, o: Moments) {
        self.n += o.n;
        for i in 0..self.sum.len() {
            self.sum[i].merge(&o.sum[i]);
            self.sum_sq[i].merge(&o.sum_sq[i]);
        }
    }

    fn mean(&self, i: usize) -> f64 {
        self.sum[i].value() / self.n as f64
    }

    fn variance(&self, i: usize) -> f64 {
        let n = self.n as f64;
        let m = self.mean(i);
        ((self.sum_sq[i].value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    fn stderr(&self, i: usize) -> f64 {
        (self.variance(i) / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: u64,
}

impl Drift {
    /// Every component within `z` standard errors of zero. An exactly zero
    /// estimate counts as consistent even when its standard error is zero.
    pub fn consistent_with_zero(&self, z: f64) -> bool {
        self.estimate
            .iter()
            .zip(&self.stderr)
            .all(|(m, s)| *m == 0.0 || m.abs() < z * s)
    }
}

/// Monte Carlo mean of the cocycle over uniform base points.
pub fn average_drift<C: Cocycle + ?Sized>(c: &C, n: u64, seed: u64, workers: usize) -> Drift {
    let d = c.rank();
    let m = ensemble(
        n,
        seed,
        workers,
        || Moments::new(d),
        |acc, _, rng| {
            let f = sample_orbit(c, rng, 1)[0];
            let v: Vec<f64> = f.components(d).iter().map(|&x| x as f64).collect();
            acc.push(&v);
        },
        Moments::merge,
    );
    Drift {
        estimate: (0..d).map(|i| m.mean(i)).collect(),
        stderr: (0..d).map(|i| m.stderr(i)).collect(),
        n_samples: n,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceEstimate {
    pub sigma2: Mat,
    pub stderr: Mat,
    /// `per_lag[j][a][b]` estimates `E[F_a * (F∘psi^j)_b]`.
    pub per_lag: Vec<Mat>,
    /// `partial_sums[J']` is the truncated sum up to lag `J'`.
    pub partial_sums: Vec<Mat>,
    pub lags: usize,
    pub n_samples: u64,
    pub seed: u64,
}

impl CovarianceEstimate {
    pub fn scalar(&self) -> f64 {
        self.sigma2[0][0]
    }

    /// `|per_lag[j]| / |per_lag[0]|` in the max-entry norm.
    pub fn decay_ratio(&self, j: usize) -> f64 {
        let norm = |m: &Mat| m.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        norm(&self.per_lag[j]) / norm(&self.per_lag[0])
    }
}

/// Lagged-covariance sum `sum_{|j| <= J} E[F ⊗ F∘psi^j]`, estimated from orbits
/// of length `2J + 1` using every anchor along each orbit.
pub fn green_kubo<C: Cocycle + ?Sized>(
    c: &C,
    lags: usize,
    n: u64,
    seed: u64,
    workers: usize,
) -> CovarianceEstimate {
    let d = c.rank();
    let len = 2 * lags + 1;
    // channels: per_lag entries (lags+1)*d*d, then sigma2 entries d*d
    let per = d * d;
    let channels = (lags + 1) * per + per;
    let m = ensemble(
        n,
        seed,
        workers,
        || Moments::new(channels),
        |acc, _, rng| {
            let orbit = sample_orbit(c, rng, len);
            let mut row = vec![0.0; channels];
            for j in 0..=lags {
                let count = (len - j) as f64;
                for t in 0..len - j {
                    let (x, y) = (orbit[t], orbit[t + j]);
                    for a in 0..d {
                        for b in 0..d {
                            row[j * per + a * d + b] += (x.0[a] * y.0[b]) as f64 / count;
                        }
                    }
                }
            }
            let base = (lags + 1) * per;
            for a in 0..d {
                for b in 0..d {
                    let mut s = row[a * d + b];
                    for j in 1..=lags {
                        s += row[j * per + a * d + b] + row[j * per + b * d + a];
                    }
                    row[base + a * d + b] = s;
                }
            }
            acc.push(&row);
        },
        Moments::merge,
    );
    let mat = |off: usize, f: &dyn Fn(usize) -> f64| -> Mat {
        (0..d)
            .map(|a| (0..d).map(|b| f(off + a * d + b)).collect())
            .collect()
    };
    let per_lag: Vec<Mat> = (0..=lags).map(|j| mat(j * per, &|i| m.mean(i))).collect();
    let mut partial_sums = Vec::with_capacity(lags + 1);
    let mut acc = per_lag[0].clone();
    partial_sums.push(acc.clone());
    for lag in per_lag.iter().skip(1) {
        for a in 0..d {
            for b in 0..d {
                acc[a][b] += lag[a][b] + lag[b][a];
            }
        }
        partial_sums.push(acc.clone());
    }
    let base = (lags + 1) * per;
    CovarianceEstimate {
        sigma2: mat(base, &|i| m.mean(i)),
        stderr: mat(base, &|i| m.stderr(i)),
        per_lag,
        partial_sums,
        lags,
        n_samples: n,
        seed,
    }
}

/// Sample covariance of `F_K` divided by `K`.
#[derive(Debug, Clone, Serialize)]
pub struct ScaledVariance {
    pub k: usize,
    pub cov_over_k: Mat,
    /// Standard error of the trace of `cov_over_k`.
    pub trace_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoboundaryVerdict {
    NotCoboundary,
    CoboundarySuspected,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceGrowth {
    pub table: Vec<ScaledVariance>,
    /// Least-squares slope of `tr Var(F_K)` against `K`.
    pub slope: f64,
    pub t_stat: f64,
    pub verdict: CoboundaryVerdict,
    pub n_samples: u64,
    pub seed: u64,
}

/// Minimum slope t-statistic for linear variance growth.
pub const GROWTH_T: f64 = 5.0;

pub fn variance_growth<C: Cocycle + ?Sized>(
    c: &C,
    ks: &[usize],
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<VarianceGrowth, StatsError> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::Invalid(
            "K list must be nonempty and increasing".into(),
        ));
    }
    let d = c.rank();
    let nk = ks.len();
    // per K: d first moments, d*d second moments, and the squared norm
    let stride = d + d * d + 1;
    let m = ensemble(
        n,
        seed,
        workers,
        || Moments::new(nk * stride),
        |acc, _, rng| {
            let sums = sample_sums(c, rng, ks);
            let mut row = vec![0.0; nk * stride];
            for (i, s) in sums.iter().enumerate() {
                let v: Vec<f64> = s.components(d).iter().map(|&x| x as f64).collect();
                let off = i * stride;
                row[off..off + d].copy_from_slice(&v);
                for a in 0..d {
                    for b in 0..d {
                        row[off + d + a * d + b] = v[a] * v[b];
                    }
                }
                row[off + d + d * d] = v.iter().map(|x| x * x).sum();
            }
            acc.push(&row);
        },
        Moments::merge,
    );
    let nf = n as f64;
    let mut table = Vec::with_capacity(nk);
    let mut traces = Vec::with_capacity(nk);
    for (i, &k) in ks.iter().enumerate() {
        let off = i * stride;
        let cov: Mat = (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        let raw = m.mean(off + d + a * d + b) - m.mean(off + a) * m.mean(off + b);
                        raw * nf / (nf - 1.0) / k.max(1) as f64
                    })
                    .collect()
            })
            .collect();
        let tr: f64 = (0..d).map(|a| cov[a][a]).sum::<f64>() * k.max(1) as f64;
        traces.push(tr);
        table.push(ScaledVariance {
            k,
            cov_over_k: cov,
            trace_stderr: m.stderr(off + d + d * d) / k.max(1) as f64,
        });
    }
    let (slope, t_stat) = ols_slope(ks, &traces);
    let verdict = if slope > 0.0 && t_stat > GROWTH_T {
        CoboundaryVerdict::NotCoboundary
    } else {
        CoboundaryVerdict::CoboundarySuspected
    };
    Ok(VarianceGrowth {
        table,
        slope,
        t_stat,
        verdict,
        n_samples: n,
        seed,
    })
}

/// Least-squares slope and its t-statistic. A perfect fit with nonzero
/// slope gives an infinite statistic; a flat zero series gives NaN.
fn ols_slope(ks: &[usize], ys: &[f64]) -> (f64, f64) {
    let n = ks.len() as f64;
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, f64::NAN);
    }
    let slope = sxy / sxx;
    let resid: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let dof = (n - 2.0).max(1.0);
    let se = (resid / dof / sxx).sqrt();
    (slope, slope / se)
}

#[derive(Debug, Clone, Serialize)]
pub struct LltPoint {
    pub m: Vec<i64>,
    pub frequency: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LltReport {
    pub k: usize,
    pub n_samples: u64,
    pub seed: u64,
    /// Observed frequencies with Gaussian predictions, for all lattice points
    /// within the comparison window or observed at least once.
    pub points: Vec<LltPoint>,
    pub total_frequency: f64,
    /// `max |freq - pred| * K^{d/2}` over the comparison window.
    pub sup_error: f64,
    /// Largest standardized difference between `M` and `-M` counts (`d = 1`).
    pub symmetry_z: Option<f64>,
}

/// Gaussian local-limit density at `m` for covariance `sigma2` and `K` steps.
pub fn llt_density(sigma2: &[Vec<f64>], k: usize, m: &[f64]) -> Result<f64, StatsError> {
    let d = sigma2.len();
    let (det, inv) = det_inverse(sigma2).ok_or(StatsError::DegenerateSigma)?;
    if det <= 0.0 {
        return Err(StatsError::DegenerateSigma);
    }
    let kf = k as f64;
    let norm = (2.0 * PI * kf).powf(-(d as f64) / 2.0) / det.sqrt();
    Ok(norm * (-quad_form(&inv, m) / (2.0 * kf)).exp())
}

/// Window half-width, in standard deviations.
pub const LLT_WINDOW: f64 = 3.0;

pub fn llt_histogram<C: Cocycle + ?Sized>(
    c: &C,
    k: usize,
    n: u64,
    seed: u64,
    workers: usize,
    sigma2: &[Vec<f64>],
) -> Result<LltReport, StatsError> {
    let d = c.rank();
    if sigma2.len() != d || k == 0 {
        return Err(StatsError::Invalid(
            "sigma2 must be d x d and K positive".into(),
        ));
    }
    let (_, inv) = det_inverse(sigma2).ok_or(StatsError::DegenerateSigma)?;
    llt_density(sigma2, k, &vec![0.0; d])?;
    let counts = ensemble(
        n,
        seed,
        workers,
        HashMap::<CoverIndex, u64>::new,
        |acc, _, rng| {
            let s = sample_sums(c, rng, &[k])[0];
            *acc.entry(s).or_insert(0) += 1;
        },
        |acc, part| {
            for (key, v) in part {
                *acc.entry(key).or_insert(0) += v;
            }
        },
    );
    let kf = k as f64;
    let radius2 = LLT_WINDOW * LLT_WINDOW * kf;
    // lattice points inside the Mahalanobis window
    let extent: Vec<i64> = (0..d)
        .map(|a| (LLT_WINDOW * (sigma2[a][a] * kf).sqrt()).ceil() as i64 + 1)
        .collect();
    let mut window = Vec::new();
    let mut cur = vec![0i64; d];
    enumerate_box(&extent, 0, &mut cur, &mut |pt| {
        let x: Vec<f64> = pt.iter().map(|&v| v as f64).collect();
        if quad_form(&inv, &x) <= radius2 {
            window.push(CoverIndex::from_slice(pt).expect("rank"));
        }
    });
    let nf = n as f64;
    let mut keys: BTreeMap<CoverIndex, ()> = window.iter().map(|w| (*w, ())).collect();
    for key in counts.keys() {
        keys.insert(*key, ());
    }
    let mut sup_error: f64 = 0.0;
    let mut points = Vec::with_capacity(keys.len());
    let mut total = Compensated::new();
    let in_window: std::collections::HashSet<CoverIndex> = window.into_iter().collect();
    for key in keys.keys() {
        let x: Vec<f64> = key.components(d).iter().map(|&v| v as f64).collect();
        let freq = counts.get(key).copied().unwrap_or(0) as f64 / nf;
        let pred = llt_density(sigma2, k, &x)?;
        total.add(freq);
        if in_window.contains(key) {
            sup_error = sup_error.max((freq - pred).abs() * kf.powf(d as f64 / 2.0));
        }
        points.push(LltPoint {
            m: key.components(d).to_vec(),
            frequency: freq,
            predicted: pred,
        });
    }
    let symmetry_z = (d == 1).then(|| {
        let mut worst: f64 = 0.0;
        for (key, &cnt) in &counts {
            if key.0[0] <= 0 {
                continue;
            }
            let mirror = counts.get(&(-*key)).copied().unwrap_or(0);
            let (a, b) = (cnt as f64, mirror as f64);
            let z = (a - b).abs() / (a + b).sqrt();
            worst = worst.max(z);
        }
        worst
    });
    Ok(LltReport {
        k,
        n_samples: n,
        seed,
        points,
        total_frequency: total.value(),
        sup_error,
        symmetry_z,
    })
}

fn enumerate_box(extent: &[i64], level: usize, cur: &mut Vec<i64>, f: &mut dyn FnMut(&[i64])) {
    if level == extent.len() {
        f(cur);
        return;
    }
    for v in -extent[level]..=extent[level] {
        cur[level] = v;
        enumerate_box(extent, level + 1, cur, f);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaEstimate {
    pub u: Vec<f64>,
    pub k: usize,
    pub n_samples: u64,
    pub seed: u64,
    pub modulus: f64,
    pub phase: f64,
    pub phase_stderr: f64,
    /// `-2 log |lambda| / |u|^2`.
    pub curvature: f64,
    /// Same estimate from `F_{2K}` on the same orbits.
    pub modulus_2k: f64,
    pub curvature_2k: f64,
}

impl LambdaEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.phase)
    }
}

/// Allowed relative change of `log |lambda|` between `K` and `2K`.
pub const LAMBDA_STABILITY: f64 = 0.1;

/// `lambda_u ≈ E[exp(i <u, F_K>)]^{1/K}` on the principal branch.
pub fn lambda_u<C: Cocycle + ?Sized>(
    c: &C,
    u: &[f64],
    k: usize,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<LambdaEstimate, StatsError> {
    let d = c.rank();
    if u.len() != d || k == 0 {
        return Err(StatsError::Invalid(
            "u must have length d and K must be positive".into(),
        ));
    }
    let u2: f64 = u.iter().map(|x| x * x).sum();
    if u2 == 0.0 {
        return Ok(LambdaEstimate {
            u: u.to_vec(),
            k,
            n_samples: n,
            seed,
            modulus: 1.0,
            phase: 0.0,
            phase_stderr: 0.0,
            curvature: f64::NAN,
            modulus_2k: 1.0,
            curvature_2k: f64::NAN,
        });
    }
    let m = ensemble(
        n,
        seed,
        workers,
        || Moments::new(4),
        |acc, _, rng| {
            let sums = sample_sums(c, rng, &[k, 2 * k]);
            let ang = |s: &CoverIndex| {
                s.components(d)
                    .iter()
                    .zip(u)
                    .map(|(&a, b)| a as f64 * b)
                    .sum::<f64>()
            };
            let (s1, c1) = ang(&sums[0]).sin_cos();
            let (s2, c2) = ang(&sums[1]).sin_cos();
            acc.push(&[c1, s1, c2, s2]);
        },
        Moments::merge,
    );
    let e1 = Complex64::new(m.mean(0), m.mean(1));
    let e2 = Complex64::new(m.mean(2), m.mean(3));
    let kf = k as f64;
    let log1 = e1.norm().ln() / kf;
    let log2 = e2.norm().ln() / (2.0 * kf);
    if (log1 - log2).abs() > LAMBDA_STABILITY * log2.abs() {
        return Err(StatsError::Unstable {
            at_k: log1,
            at_2k: log2,
        });
    }
    // delta method for the argument of E[exp(i u.F_K)]
    let arg_se = {
        let (re, im) = (e1.re, e1.im);
        let r2 = re * re + im * im;
        let var = (im * im * m.variance(0) + re * re * m.variance(1)) / (r2 * r2);
        (var / n as f64).sqrt()
    };
    Ok(LambdaEstimate {
        u: u.to_vec(),
        k,
        n_samples: n,
        seed,
        modulus: log1.exp(),
        phase: e1.arg() / kf,
        phase_stderr: arg_se / kf,
        curvature: -2.0 * log1 / u2,
        modulus_2k: log2.exp(),
        curvature_2k: -2.0 * log2 / u2,
    })
}

/// Logarithmic average `(1/log N) sum_{k<=N} (1/k) exp(-S_k^2 / (2 sigma^2 k))`
/// along one Gaussian random walk with step variance `sigma^2`.
pub fn asclt_average(sigma: f64, n: u64, seed: u64) -> f64 {
    let walk = gaussian_walk(sigma, n, seed);
    let s2 = sigma * sigma;
    let mut acc = Compensated::new();
    for (i, s) in walk.iter().enumerate() {
        let k = (i + 1) as f64;
        acc.add((-(s * s) / (2.0 * s2 * k)).exp() / k);
    }
    acc.value() / (n as f64).ln()
}

/// Partial sums `S_1..S_n` of i.i.d. `N(0, sigma^2)` steps.
pub fn gaussian_walk(sigma: f64, n: u64, seed: u64) -> Vec<f64> {
    let mut rng = sample_rng(seed, 0);
    let mut s = 0.0;
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            s += sigma * z;
            s
        })
        .collect()
}

/// `E[exp(-Z^2/2)]` for standard normal `Z`.
pub const GAUSS_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn zero_matrix(d: usize) -> Mat {
    zeros(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::staircase;

    #[test]
    fn zero_cocycle_has_zero_statistics() {
        let o = staircase(3).unwrap();
        let id = AffineAuto::identity(&o);
        let c = FrobeniusCocycle::new(&id, 1);
        let gk = green_kubo(&c, 3, 5000, 1, 1);
        assert_eq!(gk.sigma2, vec![vec![0.0]]);
        let vg = variance_growth(&c, &[4, 8, 16], 2000, 1, 1).unwrap();
        assert!(vg.table.iter().all(|r| r.cov_over_k[0][0] == 0.0));
        assert_eq!(vg.verdict, CoboundaryVerdict::CoboundarySuspected);
        let drift = average_drift(&c, 1000, 3, 1);
        assert_eq!(drift.estimate, vec![0.0]);
        assert!(drift.consistent_with_zero(3.0));
        let lam = lambda_u(&c, &[0.0], 50, 10, 1, 1).unwrap();
        assert_eq!(lam.value(), Complex64::new(1.0, 0.0));
        assert!(matches!(
            llt_histogram(&c, 10, 100, 1, 1, &[vec![0.0]]),
            Err(StatsError::DegenerateSigma)
        ));
        assert!(variance_growth(&c, &[8, 4], 10, 1, 1).is_err());
    }

    #[test]
    fn llt_density_normalizes() {
        let s2 = vec![vec![0.8]];
        let total: f64 = (-200..=200)
            .map(|m| llt_density(&s2, 30, &[m as f64]).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
        let s2 = vec![vec![1.0, 0.3], vec![0.3, 0.6]];
        let mut total = 0.0;
        for a in -80..=80 {
            for b in -80..=80 {
                total += llt_density(&s2, 20, &[a as f64, b as f64]).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slope_statistics() {
        let ks = [1, 2, 3, 4, 5];
        let (s, t) = ols_slope(&ks, &[2.0, 4.1, 5.9, 8.0, 10.1]);
        assert!((s - 2.01).abs() < 1e-12 && t > 50.0);
        let (s, t) = ols_slope(&ks, &[0.0; 5]);
        assert_eq!(s, 0.0);
        assert!(t.is_nan());
    }

    #[test]
    fn asclt_scale_invariance() {
        let a = asclt_average(1.0, 20_000, 5);
        let b = asclt_average(0.5, 20_000, 5);
        let c = asclt_average(2.0, 20_000, 5);
        assert_eq!(a, b);
        assert_eq!(a, c);
        let walk1 = gaussian_walk(1.0, 100, 5);
        let walk2 = gaussian_walk(2.0, 100, 5);
        assert!(walk1.iter().zip(&walk2).all(|(x, y)| 2.0 * x == *y));
    }
}
