//! Oscillatory Gaussian moment integrals
//! `I_j(s, L) = int exp(-s^2 u^2 / 2) exp(i L u) u^j du` and their
//! two-dimensional vector analogues, with adaptive quadrature oracles.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussError {
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("closed forms are available for j <= 2 only, got {0}")]
    OrderTooHigh(usize),
    #[error("quadrature did not reach tolerance {tol:e} (estimate {err:e})")]
    NonConvergence { tol: f64, err: f64 },
}

/// Unevaluated double-double number `hi + lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn quick(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn scale(self, k: f64) -> Dd {
        let p = self.hi * k;
        let e = self.hi.mul_add(k, -p);
        Dd::quick(p, e + self.lo * k)
    }

    fn div(self, k: f64) -> Dd {
        let q1 = self.hi / k;
        let r = self - Dd::new(q1).scale(k);
        let q2 = r.hi / k;
        Dd::quick(q1, q2)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::quick(s.hi, s.lo + self.lo + o.lo)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + Dd {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::quick(p, e + self.hi * o.lo + self.lo * o.hi)
    }
}

fn check_sigma(sigma: f64) -> Result<(), GaussError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(GaussError::BadSigma(sigma))
    }
}

/// Orders above this use double-double accumulation.
pub const EXTENDED_FROM: usize = 8;

/// Real coefficient `a_j` with `I_j = i^j a_j`.
fn moment_real(j: usize, sigma: f64, l: f64) -> f64 {
    let s2 = sigma * sigma;
    let a0 = (2.0 * PI).sqrt() / sigma * (-l * l / (2.0 * s2)).exp();
    if j == 0 {
        return a0;
    }
    if j <= EXTENDED_FROM {
        let (mut prev, mut cur) = (a0, l * a0 / s2);
        for m in 2..=j {
            let next = (l * cur - (m - 1) as f64 * prev) / s2;
            prev = cur;
            cur = next;
        }
        cur
    } else {
        let (mut prev, mut cur) = (Dd::new(a0), Dd::new(l * a0).div(s2));
        for m in 2..=j {
            let next = (cur.scale(l) - prev.scale((m - 1) as f64)).div(s2);
            prev = cur;
            cur = next;
        }
        cur.to_f64()
    }
}

fn i_power(j: usize, a: f64) -> Complex64 {
    match j % 4 {
        0 => Complex64::new(a, 0.0),
        1 => Complex64::new(0.0, a),
        2 => Complex64::new(-a, 0.0),
        _ => Complex64::new(0.0, -a),
    }
}

/// `I_j(sigma, L)` by the two-term recursion; real for even `j` and purely
/// imaginary for odd `j`.
pub fn moment(j: usize, sigma: f64, l: f64) -> Result<Complex64, GaussError> {
    check_sigma(sigma)?;
    Ok(i_power(j, moment_real(j, sigma, l)))
}

/// `int exp(-sigma^2 u^2 / 2) |u|^j du`, the natural scale of `I_j`.
pub fn moment_scale(j: usize, sigma: f64) -> f64 {
    let a = (j as f64 + 1.0) / 2.0;
    2f64.powf(a) * gamma(a) / sigma.powi(j as i32 + 1)
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(c);
    for k in 0..N {
        kron[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for i in 0..7 {
        let x = h * XGK[i];
        let f1 = f(c - x);
        let f2 = f(c + x);
        for k in 0..N {
            kron[k] += WGK[i] * (f1[k] + f2[k]);
            if i % 2 == 1 {
                gauss[k] += WG[i / 2] * (f1[k] + f2[k]);
            }
        }
    }
    let mut err: f64 = 0.0;
    for k in 0..N {
        kron[k] *= h;
        gauss[k] *= h;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    (kron, err)
}

const MAX_INTERVALS: usize = 4000;

/// Globally adaptive Gauss-Kronrod quadrature of a vector-valued integrand,
/// bisecting the interval with the largest error until the summed error
/// estimate is below `tol`.
pub fn adaptive_gk<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<[f64; N], GaussError> {
    let pieces = 16;
    let mut intervals: Vec<(f64, f64, [f64; N], f64)> = (0..pieces)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / pieces as f64;
            let hi = a + (b - a) * (i + 1) as f64 / pieces as f64;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if total_err <= tol {
            break;
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(GaussError::NonConvergence {
                tol,
                err: total_err,
            });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = [0.0; N];
    for iv in &intervals {
        for k in 0..N {
            out[k] += iv.2[k];
        }
    }
    Ok(out)
}

/// Truncation radius in units of `1/sigma`.
pub const QUAD_RADIUS: f64 = 12.0;
/// Absolute tolerance, relative to [`moment_scale`].
pub const QUAD_TOL: f64 = 1e-12;

/// Direct quadrature of `I_j(sigma, L)` on `[-12/sigma, 12/sigma]`.
pub fn quad_oracle(j: usize, sigma: f64, l: f64) -> Result<Complex64, GaussError> {
    check_sigma(sigma)?;
    let r = QUAD_RADIUS / sigma;
    let s2 = sigma * sigma;
    let tol = QUAD_TOL * moment_scale(j, sigma);
    let [re, im] = adaptive_gk(
        |u| {
            let w = (-0.5 * s2 * u * u).exp() * u.powi(j as i32);
            let (s, c) = (l * u).sin_cos();
            [w * c, w * s]
        },
        -r,
        r,
        tol,
    )?;
    Ok(Complex64::new(re, im))
}

/// Symmetric positive-definite 2x2 matrix with its rotation diagonalization
/// `S = A diag(s1, s2) A^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2 {
    pub s: [[f64; 2]; 2],
    /// Columns are unit eigenvectors.
    pub a: [[f64; 2]; 2],
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Cov2 {
    pub fn new(s11: f64, s12: f64, s22: f64) -> Result<Self, GaussError> {
        let det = s11 * s22 - s12 * s12;
        if !(s11 > 0.0 && det > 0.0 && det.is_finite()) {
            return Err(GaussError::NotPositiveDefinite);
        }
        let theta = 0.5 * (2.0 * s12).atan2(s11 - s22);
        let (sn, cs) = theta.sin_cos();
        let sigma1 = s11 * cs * cs + 2.0 * s12 * sn * cs + s22 * sn * sn;
        let sigma2 = s11 * sn * sn - 2.0 * s12 * sn * cs + s22 * cs * cs;
        if !(sigma1 > 0.0 && sigma2 > 0.0) {
            return Err(GaussError::NotPositiveDefinite);
        }
        Ok(Cov2 {
            s: [[s11, s12], [s12, s22]],
            a: [[cs, -sn], [sn, cs]],
            sigma1,
            sigma2,
        })
    }

    /// The symmetric square root of a covariance matrix `C`, i.e. `S` with `S S = C`.
    pub fn sqrt_of(c11: f64, c12: f64, c22: f64) -> Result<Self, GaussError> {
        let c = Cov2::new(c11, c12, c22)?;
        let (r1, r2) = (c.sigma1.sqrt(), c.sigma2.sqrt());
        let a = c.a;
        let entry = |i: usize, k: usize| a[i][0] * r1 * a[k][0] + a[i][1] * r2 * a[k][1];
        Cov2::new(entry(0, 0), entry(0, 1), entry(1, 1))
    }

    pub fn det(&self) -> f64 {
        self.sigma1 * self.sigma2
    }

    /// `A^T L`.
    pub fn rotate(&self, l: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * l[0] + self.a[1][0] * l[1],
            self.a[0][1] * l[0] + self.a[1][1] * l[1],
        ]
    }

    /// `S^{-1} x`.
    pub fn solve(&self, x: [f64; 2]) -> [f64; 2] {
        let [[a, b], [_, c]] = self.s;
        let det = a * c - b * b;
        [(c * x[0] - b * x[1]) / det, (a * x[1] - b * x[0]) / det]
    }

    /// `<S^{-1} L, S^{-1} L>` computed directly.
    pub fn inv_norm2(&self, l: [f64; 2]) -> f64 {
        let y = self.solve(l);
        y[0] * y[0] + y[1] * y[1]
    }

    /// The same quantity through the diagonalization.
    pub fn inv_norm2_rotated(&self, l: [f64; 2]) -> f64 {
        let r = self.rotate(l);
        (r[0] / self.sigma1).powi(2) + (r[1] / self.sigma2).powi(2)
    }

    /// `A (1, 1)^T`.
    pub fn a_ones(&self) -> [f64; 2] {
        [self.a[0][0] + self.a[0][1], self.a[1][0] + self.a[1][1]]
    }

    /// `max |A A^T - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let a = self.a;
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let v = a[i][0] * a[k][0] + a[i][1] * a[k][1] - if i == k { 1.0 } else { 0.0 };
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn reconstruction_defect(&self) -> f64 {
        let a = self.a;
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let v = a[i][0] * self.sigma1 * a[k][0] + a[i][1] * self.sigma2 * a[k][1];
                m = m.max((v - self.s[i][k]).abs());
            }
        }
        m
    }

    /// Coefficients `b[p][q]` of the cubic expressions in the entries of `A`
    /// for the second-order vector integral, rows `p = 1, 2` and `q = 0, 1, 2`.
    pub fn printed_b(&self) -> [[f64; 3]; 2] {
        let a = self.a;
        let (a11, a12, a21, a22) = (a[0][0], a[0][1], a[1][0], a[1][1]);
        [
            [
                a11.powi(3) + a12.powi(3),
                2.0 * (a11 * a11 * a21 + a12 * a12 * a22),
                a12 * a21 * a21 + a11 * a22 * a22,
            ],
            [
                a21 * a11 * a11 + a22 * a12 * a12,
                2.0 * (a21 * a21 * a11 + a22 * a22 * a12),
                a21.powi(3) + a22.powi(3),
            ],
        ]
    }

    /// Coefficients of `u_k^2 = sum_q beta[k][q] v_1^{2-q} v_2^q` under `u = A v`.
    pub fn quadratic_b(&self) -> [[f64; 3]; 2] {
        let a = self.a;
        let row = |k: usize| {
            [
                a[k][0] * a[k][0],
                2.0 * a[k][0] * a[k][1],
                a[k][1] * a[k][1],
            ]
        };
        [row(0), row(1)]
    }

    /// Inverse of `S^2`, the covariance of the Gaussian weight.
    fn weight_covariance_diag(&self) -> [f64; 2] {
        let a = self.a;
        let (w1, w2) = (
            1.0 / (self.sigma1 * self.sigma1),
            1.0 / (self.sigma2 * self.sigma2),
        );
        [
            a[0][0] * a[0][0] * w1 + a[0][1] * a[0][1] * w2,
            a[1][0] * a[1][0] * w1 + a[1][1] * a[1][1] * w2,
        ]
    }
}

/// `int exp(-|S u|^2 / 2) exp(i <L, u>) (u_1^j, u_2^j) du` for `j <= 2`.
pub fn vec_moment(j: usize, cov: &Cov2, l: [f64; 2]) -> Result<[Complex64; 2], GaussError> {
    if j > 2 {
        return Err(GaussError::OrderTooHigh(j));
    }
    let r = cov.rotate(l);
    let f1 = |m: usize| i_power(m, moment_real(m, cov.sigma1, r[0]));
    let f2 = |m: usize| i_power(m, moment_real(m, cov.sigma2, r[1]));
    let a = cov.a;
    Ok(match j {
        0 => {
            let v = f1(0) * f2(0);
            [v, v]
        }
        1 => {
            let (p, q) = (f1(1) * f2(0), f1(0) * f2(1));
            [a[0][0] * p + a[0][1] * q, a[1][0] * p + a[1][1] * q]
        }
        _ => {
            let b = cov.quadratic_b();
            let terms = [f1(2) * f2(0), f1(1) * f2(1), f1(0) * f2(2)];
            let comp = |k: usize| b[k][0] * terms[0] + b[k][1] * terms[1] + b[k][2] * terms[2];
            [comp(0), comp(1)]
        }
    })
}

/// `int exp(-|S u|^2/2) |u_k|^j du`, the natural scale of each component.
pub fn vec_moment_scale(j: usize, cov: &Cov2) -> [f64; 2] {
    let mass = 2.0 * PI / cov.det();
    let var = cov.weight_covariance_diag();
    let m = |v: f64| match j {
        0 => 1.0,
        1 => (2.0 * v / PI).sqrt(),
        2 => v,
        _ => unreachable!("order checked by caller"),
    };
    [mass * m(var[0]), mass * m(var[1])]
}

/// Nested adaptive quadrature of the two-dimensional integrand in the
/// original coordinates.
pub fn quad_oracle_2d(j: usize, cov: &Cov2, l: [f64; 2]) -> Result<[Complex64; 2], GaussError> {
    if j > 2 {
        return Err(GaussError::OrderTooHigh(j));
    }
    let r = QUAD_RADIUS / cov.sigma1.min(cov.sigma2);
    let scale = vec_moment_scale(j, cov);
    let tol = QUAD_TOL * scale[0].min(scale[1]);
    let s = cov.s;
    let mut inner_err = None;
    let outer = adaptive_gk(
        |u1| {
            let inner = adaptive_gk(
                |u2| {
                    let y1 = s[0][0] * u1 + s[0][1] * u2;
                    let y2 = s[1][0] * u1 + s[1][1] * u2;
                    let w = (-0.5 * (y1 * y1 + y2 * y2)).exp();
                    let (sn, cs) = (l[0] * u1 + l[1] * u2).sin_cos();
                    let (p1, p2) = (w * u1.powi(j as i32), w * u2.powi(j as i32));
                    [p1 * cs, p1 * sn, p2 * cs, p2 * sn]
                },
                -r,
                r,
                tol / (4.0 * r),
            );
            match inner {
                Ok(v) => v,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    [0.0; 4]
                }
            }
        },
        -r,
        r,
        tol,
    )?;
    if let Some(e) = inner_err {
        return Err(e);
    }
    Ok([
        Complex64::new(outer[0], outer[1]),
        Complex64::new(outer[2], outer[3]),
    ])
}

/// Error of `value` against `reference`: relative to `|reference|` unless the
/// reference is negligible against `scale`, in which case relative to `scale`.
pub fn scaled_error(value: Complex64, reference: Complex64, scale: f64) -> f64 {
    let diff = (value - reference).norm();
    if reference.norm() > 1e-6 * scale {
        diff / reference.norm()
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

    #[test]
    fn closed_form_pins() {
        assert!((moment(0, 1.0, 0.0).unwrap().re - SQRT_2PI).abs() < 1e-15);
        for s in [0.5, 1.0, 3.0] {
            assert_eq!(moment(1, s, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        }
        let i3 = moment(3, 1.0, 1.0).unwrap();
        assert_eq!(i3.re, 0.0);
        assert!((i3.im - 2.0 * SQRT_2PI * (-0.5f64).exp()).abs() < 1e-14);
        assert!((i3.im - 3.040_69).abs() < 1e-5);
        assert!((moment(4, 1.0, 0.0).unwrap().re - 3.0 * SQRT_2PI).abs() < 1e-14);
        assert_eq!(moment(2, 0.0, 1.0), Err(GaussError::BadSigma(0.0)));
        assert!(quad_oracle(0, -1.0, 0.0).is_err());
    }

    #[test]
    fn second_and_fourth_moment_displays() {
        for (s, l) in [(1.0f64, 0.3f64), (0.7, -1.2), (2.0, 2.0)] {
            let e = (-l * l / (2.0 * s * s)).exp();
            let i2 = SQRT_2PI / s.powi(3) * (1.0 - l * l / (s * s)) * e;
            assert!((moment(2, s, l).unwrap().re - i2).abs() < 1e-14);
            let r = l * l / (s * s);
            let i4 = SQRT_2PI / s.powi(5) * (3.0 - 6.0 * r + r * r) * e;
            assert!((moment(4, s, l).unwrap().re - i4).abs() < 1e-13 * i4.abs().max(1.0));
        }
    }

    #[test]
    fn oracle_pins() {
        assert!((quad_oracle(0, 1.0, 0.0).unwrap().re - SQRT_2PI).abs() < 1e-10);
        assert!((quad_oracle(2, 1.0, 0.0).unwrap().re - SQRT_2PI).abs() < 1e-10);
        assert!((quad_oracle(4, 1.0, 0.0).unwrap().re - 3.0 * SQRT_2PI).abs() < 1e-10);
        let q = quad_oracle(3, 1.0, 1.0).unwrap();
        assert!((q.im - 2.0 * SQRT_2PI * (-0.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn double_double_matches_plain_where_stable() {
        for j in 9..13 {
            let plain = {
                let (s2, l) = (1.0, 0.5);
                let mut prev = SQRT_2PI * (-l * l / 2.0f64).exp();
                let mut cur = l * prev / s2;
                for m in 2..=j {
                    let next = (l * cur - (m - 1) as f64 * prev) / s2;
                    prev = cur;
                    cur = next;
                }
                cur
            };
            let dd = moment_real(j, 1.0, 0.5);
            assert!((dd - plain).abs() < 1e-10 * plain.abs().max(1.0));
        }
    }

    #[test]
    fn cov2_diagonalization() {
        let c = Cov2::new(2.0, 0.7, 1.1).unwrap();
        assert!(c.orthogonality_defect() < 1e-15);
        assert!(c.reconstruction_defect() < 1e-14);
        let l = [0.4, -1.3];
        assert!((c.inv_norm2(l) - c.inv_norm2_rotated(l)).abs() < 1e-12);
        assert_eq!(
            Cov2::new(1.0, 2.0, 1.0),
            Err(GaussError::NotPositiveDefinite)
        );
        let root = Cov2::sqrt_of(2.0, 0.7, 1.1).unwrap();
        let s = root.s;
        let sq = [
            s[0][0] * s[0][0] + s[0][1] * s[1][0],
            s[0][0] * s[0][1] + s[0][1] * s[1][1],
            s[1][0] * s[0][1] + s[1][1] * s[1][1],
        ];
        assert!(
            (sq[0] - 2.0).abs() < 1e-14
                && (sq[1] - 0.7).abs() < 1e-14
                && (sq[2] - 1.1).abs() < 1e-14
        );
    }

    #[test]
    fn identity_vector_pins() {
        let id = Cov2::new(1.0, 0.0, 1.0).unwrap();
        let v0 = vec_moment(0, &id, [0.0, 0.0]).unwrap();
        for c in v0 {
            assert!((c.re - 2.0 * PI).abs() < 1e-14 && c.im == 0.0);
        }
        let v1 = vec_moment(1, &id, [0.0, 0.0]).unwrap();
        assert!(v1.iter().all(|c| c.norm() == 0.0));
        assert_eq!(
            vec_moment(3, &id, [0.0, 0.0]),
            Err(GaussError::OrderTooHigh(3))
        );
    }

    #[test]
    fn diagonal_factorization() {
        let c = Cov2::new(1.5, 0.0, 0.6).unwrap();
        let l = [0.8, -0.3];
        for j in 0..3 {
            let v = vec_moment(j, &c, l).unwrap();
            let a = moment(j, 1.5, l[0]).unwrap() * moment(0, 0.6, l[1]).unwrap();
            let b = moment(0, 1.5, l[0]).unwrap() * moment(j, 0.6, l[1]).unwrap();
            assert!((v[0] - a).norm() < 1e-14 * a.norm().max(1.0));
            assert!((v[1] - b).norm() < 1e-14 * b.norm().max(1.0));
        }
    }

    #[test]
    fn vector_matches_2d_oracle() {
        let c = Cov2::new(1.3, 0.4, 0.9).unwrap();
        let l = [0.7, -1.1];
        for j in 0..3 {
            let v = vec_moment(j, &c, l).unwrap();
            let q = quad_oracle_2d(j, &c, l).unwrap();
            let scale = vec_moment_scale(j, &c);
            for k in 0..2 {
                assert!(
                    scaled_error(v[k], q[k], scale[k]) < 1e-8,
                    "j={j} k={k} {:?} {:?}",
                    v[k],
                    q[k]
                );
            }
        }
    }
}
