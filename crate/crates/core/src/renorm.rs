//! Affine automorphisms built from products of multi-twists along the
//! horizontal and vertical cylinder decompositions, lifted to the cover.

use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{CoverPoint, Direction};
use crate::lattice::CoverIndex;
use crate::surface::{Axis, Origami};

/// Points closer than this to a cylinder boundary are rejected.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenormError {
    #[error("point in square {square} lies on a cylinder boundary")]
    Singular { square: usize },
    #[error("derivative has trace {trace}; not hyperbolic")]
    NotHyperbolic { trace: i64 },
    #[error("core curve of a {axis:?} cylinder carries nonzero weight; twist does not lift")]
    NotLiftable { axis: Axis },
    #[error("automorphisms act on different surfaces")]
    SurfaceMismatch,
    #[error("twist word must use only 'h' and 'v', got {0:?}")]
    BadWord(String),
}

pub type Matrix2 = [[i64; 2]; 2];

pub fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub const IDENTITY: Matrix2 = [[1, 0], [0, 1]];

/// Per-cylinder twist multiplicities for one direction: `k[i]` full twists
/// in cylinder `i`, all producing the same shear `shift = k[i] * width / height`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwistSpec {
    pub direction: Axis,
    pub k: Vec<i64>,
    pub shift: i64,
}

#[derive(Debug, Clone)]
struct CylinderChart {
    rows: Vec<Vec<usize>>,
    /// `prefix[j][i]`: weight accumulated from the start of row `j` to its `i`-th square.
    prefix: Vec<Vec<CoverIndex>>,
    width: usize,
    height: usize,
    closed: bool,
}

/// One multi-twist: every cylinder of `axis` sheared by the same integer.
#[derive(Debug, Clone)]
pub struct TwistStage {
    axis: Axis,
    shift: i64,
    spec: TwistSpec,
    charts: Vec<CylinderChart>,
    /// square -> (cylinder, row, position along row)
    chart_of: Vec<(u32, u32, u32)>,
}

impl TwistStage {
    pub fn new(o: &Origami, axis: Axis) -> Result<Self, RenormError> {
        let cyls = o.cylinders(axis);
        // smallest integer shift that is a whole number of turns in every cylinder
        let shift = cyls.iter().fold(1i64, |acc, c| {
            let w = c.width as i64;
            acc.lcm(&(w / w.gcd(&(c.height as i64))))
        });
        let mut chart_of = vec![(0, 0, 0); o.n_squares()];
        let mut charts = Vec::with_capacity(cyls.len());
        let mut k = Vec::with_capacity(cyls.len());
        for (ci, c) in cyls.iter().enumerate() {
            k.push(shift * c.height as i64 / c.width as i64);
            let mut prefix = Vec::with_capacity(c.height);
            for (j, row) in c.rows.iter().enumerate() {
                let mut acc = CoverIndex::ZERO;
                let mut pre = Vec::with_capacity(row.len());
                for (i, &sq) in row.iter().enumerate() {
                    chart_of[sq] = (ci as u32, j as u32, i as u32);
                    pre.push(acc);
                    acc += o.weight(axis, sq);
                }
                if !acc.is_zero() {
                    return Err(RenormError::NotLiftable { axis });
                }
                prefix.push(pre);
            }
            charts.push(CylinderChart {
                rows: c.rows.clone(),
                prefix,
                width: c.width,
                height: c.height,
                closed: c.closed,
            });
        }
        Ok(TwistStage {
            axis,
            shift,
            spec: TwistSpec {
                direction: axis,
                k,
                shift,
            },
            charts,
            chart_of,
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn spec(&self) -> &TwistSpec {
        &self.spec
    }

    pub fn matrix(&self) -> Matrix2 {
        match self.axis {
            Axis::Horizontal => [[1, self.shift], [0, 1]],
            Axis::Vertical => [[1, 0], [self.shift, 1]],
        }
    }

    fn inverted(&self) -> TwistStage {
        let mut s = self.clone();
        s.shift = -s.shift;
        s.spec.shift = -s.spec.shift;
        s.spec.k.iter_mut().for_each(|k| *k = -*k);
        s
    }

    pub fn apply(&self, p: CoverPoint) -> Result<CoverPoint, RenormError> {
        let (ci, j, i) = self.chart_of[p.square];
        let chart = &self.charts[ci as usize];
        let (j, i) = (j as usize, i as usize);
        let (along, across) = match self.axis {
            Axis::Horizontal => (p.u, p.v),
            Axis::Vertical => (p.v, p.u),
        };
        let y = j as f64 + across;
        if !chart.closed && (y < BOUNDARY_TOL || y > chart.height as f64 - BOUNDARY_TOL) {
            return Err(RenormError::Singular { square: p.square });
        }
        let w = chart.width as f64;
        let x = (i as f64 + along + self.shift as f64 * y).rem_euclid(w);
        let mut cell = x.floor() as usize;
        let mut frac = x - cell as f64;
        if cell >= chart.width {
            // rem_euclid may round up to exactly `w`
            cell = 0;
            frac = 0.0;
        }
        let mut q = p;
        q.square = chart.rows[j][cell];
        q.index += chart.prefix[j][cell] - chart.prefix[j][i];
        match self.axis {
            Axis::Horizontal => q.u = frac,
            Axis::Vertical => q.v = frac,
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenData {
    /// Eigenvalue of modulus < 1.
    pub lambda: f64,
    pub stable: Direction,
    pub unstable: Direction,
}

/// Composition of twist stages, applied in order, with its derivative.
#[derive(Debug, Clone)]
pub struct AffineAuto {
    stages: Vec<TwistStage>,
    derivative: Matrix2,
    eigen: Option<EigenData>,
    n_squares: usize,
    surface_key: String,
}

fn surface_key(o: &Origami) -> String {
    o.to_text()
}

impl AffineAuto {
    fn from_stages(stages: Vec<TwistStage>, n_squares: usize, surface_key: String) -> Self {
        let derivative = stages
            .iter()
            .fold(IDENTITY, |acc, s| mat_mul(&s.matrix(), &acc));
        AffineAuto {
            eigen: eigen_of(&derivative).ok(),
            stages,
            derivative,
            n_squares,
            surface_key,
        }
    }

    pub fn identity(o: &Origami) -> Self {
        AffineAuto::from_stages(Vec::new(), o.n_squares(), surface_key(o))
    }

    /// Multi-twist along all cylinders in direction `axis`.
    pub fn dehn_twist(o: &Origami, axis: Axis) -> Result<Self, RenormError> {
        Ok(AffineAuto::from_stages(
            vec![TwistStage::new(o, axis)?],
            o.n_squares(),
            surface_key(o),
        ))
    }

    /// Word over `{h, v}` read as a composition of maps: `"hv"` applies the
    /// vertical twist first, then the horizontal one.
    pub fn from_word(o: &Origami, word: &str) -> Result<Self, RenormError> {
        let h = TwistStage::new(o, Axis::Horizontal)?;
        let v = TwistStage::new(o, Axis::Vertical)?;
        let mut stages = Vec::with_capacity(word.len());
        for c in word.chars().rev() {
            match c {
                'h' => stages.push(h.clone()),
                'v' => stages.push(v.clone()),
                _ => return Err(RenormError::BadWord(word.to_string())),
            }
        }
        Ok(AffineAuto::from_stages(
            stages,
            o.n_squares(),
            surface_key(o),
        ))
    }

    /// `a.compose(b)` is the map `a ∘ b`.
    pub fn compose(&self, b: &AffineAuto) -> Result<Self, RenormError> {
        if self.surface_key != b.surface_key {
            return Err(RenormError::SurfaceMismatch);
        }
        let mut stages = b.stages.clone();
        stages.extend(self.stages.iter().cloned());
        Ok(AffineAuto::from_stages(
            stages,
            self.n_squares,
            self.surface_key.clone(),
        ))
    }

    pub fn inverse(&self) -> Self {
        let stages = self.stages.iter().rev().map(TwistStage::inverted).collect();
        AffineAuto::from_stages(stages, self.n_squares, self.surface_key.clone())
    }

    pub fn stages(&self) -> &[TwistStage] {
        &self.stages
    }

    pub fn n_squares(&self) -> usize {
        self.n_squares
    }

    pub fn derivative(&self) -> Matrix2 {
        self.derivative
    }

    pub fn trace(&self) -> i64 {
        self.derivative[0][0] + self.derivative[1][1]
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2
    }

    pub fn eigen(&self) -> Result<EigenData, RenormError> {
        self.eigen.ok_or(RenormError::NotHyperbolic {
            trace: self.trace(),
        })
    }

    pub fn apply(&self, p: CoverPoint) -> Result<CoverPoint, RenormError> {
        self.stages.iter().try_fold(p, |q, s| s.apply(q))
    }

    /// Cover index jump of the lift started at index zero.
    pub fn frobenius(&self, square: usize, u: f64, v: f64) -> Result<CoverIndex, RenormError> {
        Ok(self.apply(CoverPoint::new(square, u, v))?.index)
    }

    /// The base point map together with its Frobenius value.
    pub fn step_base(&self, p: CoverPoint) -> Result<(CoverPoint, CoverIndex), RenormError> {
        let q = self.apply(CoverPoint {
            index: CoverIndex::ZERO,
            ..p
        })?;
        let f = q.index;
        Ok((
            CoverPoint {
                index: CoverIndex::ZERO,
                ..q
            },
            f,
        ))
    }

    /// `sum_{j<k} F(psi^j x)` and the end point `psi^k x` on the base.
    pub fn frobenius_sums(&self, x: CoverPoint, k: usize) -> Result<FrobeniusSample, RenormError> {
        let mut p = CoverPoint {
            index: CoverIndex::ZERO,
            ..x
        };
        for _ in 0..k {
            p = self.apply(p)?;
        }
        Ok(FrobeniusSample {
            start: CoverPoint {
                index: CoverIndex::ZERO,
                ..x
            },
            k,
            fk: p.index,
            end: CoverPoint {
                index: CoverIndex::ZERO,
                ..p
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrobeniusSample {
    pub start: CoverPoint,
    pub k: usize,
    pub fk: CoverIndex,
    pub end: CoverPoint,
}

pub fn eigen_of(m: &Matrix2) -> Result<EigenData, RenormError> {
    let tr = m[0][0] + m[1][1];
    if tr.abs() <= 2 {
        return Err(RenormError::NotHyperbolic { trace: tr });
    }
    let t = tr as f64;
    let root = ((tr * tr - 4) as f64).sqrt();
    // small root without cancellation; det = 1
    let lambda = if tr > 0 {
        2.0 / (t + root)
    } else {
        2.0 / (t - root)
    };
    let mu = 1.0 / lambda;
    Ok(EigenData {
        lambda,
        stable: eigenvector(m, lambda),
        unstable: eigenvector(m, mu),
    })
}

fn eigenvector(m: &Matrix2, ev: f64) -> Direction {
    let (a, b, c, d) = (
        m[0][0] as f64,
        m[0][1] as f64,
        m[1][0] as f64,
        m[1][1] as f64,
    );
    // both rows of (M - ev I) annihilate the eigenvector; use the better conditioned one
    let (x, y) = if b.abs() + (a - ev).abs() >= c.abs() + (d - ev).abs() {
        (b, ev - a)
    } else {
        (ev - d, c)
    };
    let dir = Direction::new(x, y).expect("nonzero eigenvector");
    if dir.dx < 0.0 || (dir.dx == 0.0 && dir.dy < 0.0) {
        dir.reversed()
    } else {
        dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{staircase, windtree_plus};

    #[test]
    fn staircase_matrices() {
        for s in 2..8 {
            let o = staircase(s).unwrap();
            let h = AffineAuto::dehn_twist(&o, Axis::Horizontal).unwrap();
            let v = AffineAuto::dehn_twist(&o, Axis::Vertical).unwrap();
            assert_eq!(h.derivative(), [[1, s as i64], [0, 1]]);
            assert_eq!(v.derivative(), [[1, 0], [2, 1]]);
        }
        let o = staircase(5).unwrap();
        let v = TwistStage::new(&o, Axis::Vertical).unwrap();
        let mut k = v.spec().k.clone();
        k.sort();
        assert_eq!(k, vec![1, 6]);
    }

    #[test]
    fn windtree_matrices() {
        let o = windtree_plus();
        let h = AffineAuto::dehn_twist(&o, Axis::Horizontal).unwrap();
        let v = AffineAuto::dehn_twist(&o, Axis::Vertical).unwrap();
        assert_eq!(h.derivative(), [[1, 12], [0, 1]]);
        assert_eq!(v.derivative(), [[1, 0], [6, 1]]);
        assert_eq!(AffineAuto::from_word(&o, "hv").unwrap().trace(), 74);
    }

    #[test]
    fn word_order_and_eigen() {
        let o = staircase(2).unwrap();
        let a = AffineAuto::from_word(&o, "hv").unwrap();
        assert_eq!(a.derivative(), [[5, 2], [2, 1]]);
        let h = AffineAuto::dehn_twist(&o, Axis::Horizontal).unwrap();
        let v = AffineAuto::dehn_twist(&o, Axis::Vertical).unwrap();
        assert_eq!(h.compose(&v).unwrap().derivative(), a.derivative());
        let e = a.eigen().unwrap();
        assert!((e.lambda - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);
        let m = a.derivative();
        let s = e.stable;
        let img = (
            m[0][0] as f64 * s.dx + m[0][1] as f64 * s.dy,
            m[1][0] as f64 * s.dx + m[1][1] as f64 * s.dy,
        );
        assert!((img.0 - e.lambda * s.dx).abs() < 1e-12 && (img.1 - e.lambda * s.dy).abs() < 1e-12);
        assert!(matches!(
            AffineAuto::from_word(&o, "hx"),
            Err(RenormError::BadWord(_))
        ));
        let id = AffineAuto::identity(&o);
        assert_eq!(a.compose(&id).unwrap().derivative(), a.derivative());
        assert!(matches!(
            id.eigen(),
            Err(RenormError::NotHyperbolic { trace: 2 })
        ));
        let other = staircase(3).unwrap();
        let b = AffineAuto::identity(&other);
        assert!(matches!(a.compose(&b), Err(RenormError::SurfaceMismatch)));
    }

    #[test]
    fn synthetic_eigen() {
        let e = eigen_of(&[[2, 1], [1, 1]]).unwrap();
        assert!((e.lambda - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!(matches!(
            eigen_of(&[[1, 1], [0, 1]]),
            Err(RenormError::NotHyperbolic { trace: 2 })
        ));
        let neg = eigen_of(&[[-2, 1], [-1, 0]]);
        assert!(neg.is_err());
        let neg = eigen_of(&[[-3, 1], [-1, 0]]).unwrap();
        assert!(neg.lambda < 0.0 && neg.lambda > -1.0);
    }

    #[test]
    fn single_shear_hand_trace() {
        let o = staircase(2).unwrap();
        let h = AffineAuto::dehn_twist(&o, Axis::Horizontal).unwrap();
        let p = CoverPoint::new(0, 0.25, 0.5);
        let q = h.apply(p).unwrap();
        // X = 0.25 moves by 2 * 0.5 = 1.0 along the width-2 row
        assert_eq!(q.square, o.right(0));
        assert!((q.u - 0.25).abs() < 1e-15 && q.v == 0.5);
        assert_eq!(q.index, o.w_right(0));
    }

    #[test]
    fn boundary_points_are_singular() {
        let o = staircase(4).unwrap();
        let v = AffineAuto::dehn_twist(&o, Axis::Vertical).unwrap();
        assert_eq!(
            v.apply(CoverPoint::new(0, 0.0, 0.5)),
            Err(RenormError::Singular { square: 0 })
        );
    }

    #[test]
    fn identity_changes_nothing() {
        let o = windtree_plus();
        let id = AffineAuto::identity(&o);
        let p = CoverPoint::new(17, 0.3, 0.9).translated(CoverIndex::unit(1));
        assert_eq!(id.apply(p).unwrap(), p);
        assert!(id.frobenius(17, 0.3, 0.9).unwrap().is_zero());
    }
}
