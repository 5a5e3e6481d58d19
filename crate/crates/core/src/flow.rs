//! Event-driven straight-line flow on the cover, polynomial observables and
//! their ergodic integrals, and first-return maps to a horizontal edge.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::CoverIndex;
use crate::numerics::{binomial_row, Compensated};
use crate::surface::Origami;

/// Orbits passing within this distance of a square corner are rejected.
pub const CORNER_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("orbit hits a vertex of square {square} after time {time}")]
    Singular { square: usize, time: f64 },
    #[error("flow direction is zero or not finite")]
    BadDirection,
    #[error("no return to the transversal before time {cap}")]
    NoReturn { cap: f64 },
    #[error("transversal direction must not be horizontal")]
    HorizontalTransversal,
    #[error("induced map does not tile the transversal (defect {0:e})")]
    BadTiling(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverPoint {
    pub square: usize,
    pub u: f64,
    pub v: f64,
    pub index: CoverIndex,
}

impl CoverPoint {
    pub fn new(square: usize, u: f64, v: f64) -> Self {
        CoverPoint {
            square,
            u,
            v,
            index: CoverIndex::ZERO,
        }
    }

    pub fn with_index(mut self, index: CoverIndex) -> Self {
        self.index = index;
        self
    }

    /// Deck transformation by `shift`.
    pub fn translated(mut self, shift: CoverIndex) -> Self {
        self.index += shift;
        self
    }

    /// Same square and index, coordinates within `tol`.
    pub fn close_to(&self, other: &CoverPoint, tol: f64) -> bool {
        self.square == other.square
            && self.index == other.index
            && (self.u - other.u).abs() < tol
            && (self.v - other.v).abs() < tol
    }
}

/// Unit direction vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub dx: f64,
    pub dy: f64,
}

impl Direction {
    pub fn new(dx: f64, dy: f64) -> Result<Self, FlowError> {
        let norm = dx.hypot(dy);
        if !norm.is_finite() || norm == 0.0 {
            return Err(FlowError::BadDirection);
        }
        Ok(Direction {
            dx: dx / norm,
            dy: dy / norm,
        })
    }

    pub fn from_angle(theta: f64) -> Self {
        Direction {
            dx: theta.cos(),
            dy: theta.sin(),
        }
    }

    pub fn reversed(self) -> Self {
        Direction {
            dx: -self.dx,
            dy: -self.dy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
    Top,
    Bottom,
}

/// One edge crossing: the orbit left `from` through `side` and entered `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub side: Side,
    pub from: usize,
    pub to: usize,
    pub index_before: CoverIndex,
    pub index_after: CoverIndex,
    /// Coordinate along the crossed edge.
    pub position: f64,
    pub elapsed: f64,
}

/// Step-by-step flow state. Each call to [`FlowCursor::next_crossing`]
/// advances to the next edge crossing.
#[derive(Debug, Clone)]
pub struct FlowCursor<'a> {
    surface: &'a Origami,
    point: CoverPoint,
    dx: f64,
    dy: f64,
    elapsed: f64,
}

impl<'a> FlowCursor<'a> {
    pub fn new(surface: &'a Origami, point: CoverPoint, dir: Direction) -> Self {
        FlowCursor {
            surface,
            point,
            dx: dir.dx,
            dy: dir.dy,
            elapsed: 0.0,
        }
    }

    pub fn point(&self) -> CoverPoint {
        self.point
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    fn exit_times(&self) -> (f64, f64) {
        let p = &self.point;
        let tx = if self.dx > 0.0 {
            (1.0 - p.u) / self.dx
        } else if self.dx < 0.0 {
            p.u / -self.dx
        } else {
            f64::INFINITY
        };
        let ty = if self.dy > 0.0 {
            (1.0 - p.v) / self.dy
        } else if self.dy < 0.0 {
            p.v / -self.dy
        } else {
            f64::INFINITY
        };
        (tx, ty)
    }

    /// Time until the next crossing, or a `Singular` error if that crossing
    /// is at a corner.
    pub fn time_to_exit(&self) -> Result<f64, FlowError> {
        let (tx, ty) = self.exit_times();
        if (tx - ty).abs() < CORNER_TOL {
            return Err(FlowError::Singular {
                square: self.point.square,
                time: self.elapsed,
            });
        }
        Ok(tx.min(ty))
    }

    /// Move inside the current square without crossing.
    fn drift(&mut self, dt: f64) {
        self.point.u += self.dx * dt;
        self.point.v += self.dy * dt;
        self.elapsed += dt;
    }

    pub fn next_crossing(&mut self) -> Result<Crossing, FlowError> {
        let (tx, ty) = self.exit_times();
        if (tx - ty).abs() < CORNER_TOL {
            return Err(FlowError::Singular {
                square: self.point.square,
                time: self.elapsed,
            });
        }
        let o = self.surface;
        let from = self.point.square;
        let index_before = self.point.index;
        let p = &mut self.point;
        let (side, position) = if tx < ty {
            self.elapsed += tx;
            p.v = (p.v + self.dy * tx).clamp(0.0, 1.0);
            if self.dx > 0.0 {
                p.index += o.w_right(from);
                p.square = o.right(from);
                p.u = 0.0;
                (Side::Right, p.v)
            } else {
                p.square = o.left(from);
                p.index -= o.w_right(p.square);
                p.u = 1.0;
                (Side::Left, p.v)
            }
        } else {
            self.elapsed += ty;
            p.u = (p.u + self.dx * ty).clamp(0.0, 1.0);
            if self.dy > 0.0 {
                p.index += o.w_up(from);
                p.square = o.up(from);
                p.v = 0.0;
                (Side::Top, p.u)
            } else {
                p.square = o.down(from);
                p.index -= o.w_up(p.square);
                p.v = 1.0;
                (Side::Bottom, p.u)
            }
        };
        Ok(Crossing {
            side,
            from,
            to: p.square,
            index_before,
            index_after: p.index,
            position,
            elapsed: self.elapsed,
        })
    }

    /// Flow for `duration >= 0`, calling `segment(point, dt)` for each
    /// straight piece inside one square. Returns the number of crossings.
    pub fn run<F: FnMut(&CoverPoint, f64)>(
        &mut self,
        duration: f64,
        mut segment: F,
    ) -> Result<u64, FlowError> {
        let end = self.elapsed + duration;
        let mut crossings = 0;
        loop {
            let remaining = end - self.elapsed;
            let (tx, ty) = self.exit_times();
            let t_exit = tx.min(ty);
            if remaining < t_exit {
                if remaining > 0.0 {
                    segment(&self.point, remaining);
                    self.drift(remaining);
                }
                self.elapsed = end;
                break;
            }
            if t_exit > 0.0 {
                segment(&self.point, t_exit);
            }
            self.next_crossing()?;
            crossings += 1;
        }
        Ok(crossings + self.normalize())
    }

    /// Bring a point sitting on the far side of its square (`u == 1` or
    /// `v == 1`) into the neighbouring square.
    fn normalize(&mut self) -> u64 {
        let o = self.surface;
        let mut n = 0;
        let p = &mut self.point;
        if p.u >= 1.0 {
            p.index += o.w_right(p.square);
            p.square = o.right(p.square);
            p.u -= 1.0;
            n += 1;
        }
        if p.v >= 1.0 {
            p.index += o.w_up(p.square);
            p.square = o.up(p.square);
            p.v -= 1.0;
            n += 1;
        }
        p.u = p.u.max(0.0);
        p.v = p.v.max(0.0);
        n
    }
}

/// Flow `p` for time `t` in direction `dir` (negative `t` flows backwards).
/// Returns the end point and the number of edge crossings.
pub fn flow(
    o: &Origami,
    p: CoverPoint,
    dir: Direction,
    t: f64,
) -> Result<(CoverPoint, u64), FlowError> {
    let dir = if t < 0.0 { dir.reversed() } else { dir };
    let mut cur = FlowCursor::new(o, p, dir);
    let n = cur.run(t.abs(), |_, _| {})?;
    Ok((cur.point(), n))
}

/// Bivariate polynomial `sum c_jk u^j v^k` on the unit square.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    pub terms: Vec<(u32, u32, f64)>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly {
            terms: vec![(0, 0, c)],
        }
    }

    /// `36 u(1-u) v(1-v)`: vanishes on the square boundary, integral 1.
    pub fn unit_bump() -> Self {
        Poly {
            terms: vec![(1, 1, 36.0), (2, 1, -36.0), (1, 2, -36.0), (2, 2, 36.0)],
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(j, k, c)| c * u.powi(j as i32) * v.powi(k as i32))
            .sum()
    }

    pub fn square_integral(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(j, k, c)| c / ((j + 1) as f64 * (k + 1) as f64))
            .sum()
    }

    pub fn scaled(&self, a: f64) -> Poly {
        Poly {
            terms: self.terms.iter().map(|&(j, k, c)| (j, k, a * c)).collect(),
        }
    }

    /// Exact integral of the polynomial along `s -> (u0 + a s, v0 + b s)`, `s in [0, tau]`.
    pub fn segment_integral(&self, u0: f64, v0: f64, a: f64, b: f64, tau: f64) -> f64 {
        let mut acc = 0.0;
        for &(j, k, c) in &self.terms {
            let (j, k) = (j as usize, k as usize);
            let bj = binomial_row(j);
            let bk = binomial_row(k);
            // coefficients of (u0 + a s)^j and (v0 + b s)^k in powers of s
            let pu: Vec<f64> = (0..=j)
                .map(|p| bj[p] * u0.powi((j - p) as i32) * a.powi(p as i32))
                .collect();
            let pv: Vec<f64> = (0..=k)
                .map(|q| bk[q] * v0.powi((k - q) as i32) * b.powi(q as i32))
                .collect();
            let mut term = 0.0;
            for (p, cu) in pu.iter().enumerate() {
                for (q, cv) in pv.iter().enumerate() {
                    let m = (p + q + 1) as i32;
                    term += cu * cv * tau.powi(m) / m as f64;
                }
            }
            acc += c * term;
        }
        acc
    }

    fn render(&self) -> String {
        self.terms
            .iter()
            .map(|&(j, k, c)| {
                if j < 10 && k < 10 {
                    format!("c{j}{k}={c:?}")
                } else {
                    format!("c{j}_{k}={c:?}")
                }
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    fn parse(s: &str) -> Result<Poly, String> {
        let mut terms = Vec::new();
        for t in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, val) = t.split_once('=').ok_or_else(|| format!("bad term {t:?}"))?;
            let exps = key
                .strip_prefix('c')
                .ok_or_else(|| format!("bad term {t:?}"))?;
            let (j, k) = match exps.split_once('_') {
                Some((j, k)) => (j, k),
                None if exps.len() == 2 => exps.split_at(1),
                None => return Err(format!("bad exponent pair {exps:?}")),
            };
            let j = j.parse::<u32>().map_err(|e| format!("{t:?}: {e}"))?;
            let k = k.parse::<u32>().map_err(|e| format!("{t:?}: {e}"))?;
            let c = val.parse::<f64>().map_err(|e| format!("{t:?}: {e}"))?;
            terms.push((j, k, c));
        }
        Ok(Poly { terms })
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("observable line {line}: {msg}")]
pub struct ObservableParseError {
    pub line: usize,
    pub msg: String,
}

/// Compactly supported piecewise-polynomial function on the cover.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observable {
    pieces: HashMap<(usize, CoverIndex), Poly>,
    n_squares: usize,
    d: usize,
}

impl Observable {
    pub fn zero(o: &Origami) -> Self {
        Observable {
            pieces: HashMap::new(),
            n_squares: o.n_squares(),
            d: o.rank(),
        }
    }

    /// Same polynomial on every square of the cover cell at index `0`.
    pub fn on_base_cell(o: &Origami, poly: Poly) -> Self {
        let mut g = Observable::zero(o);
        for sq in 0..o.n_squares() {
            g.insert(sq, CoverIndex::ZERO, poly.clone());
        }
        g
    }

    pub fn unit_bump(o: &Origami) -> Self {
        Observable::on_base_cell(o, Poly::unit_bump())
    }

    pub fn insert(&mut self, square: usize, index: CoverIndex, poly: Poly) {
        assert!(square < self.n_squares, "square {square} out of range");
        self.pieces.insert((square, index), poly);
    }

    pub fn piece(&self, square: usize, index: CoverIndex) -> Option<&Poly> {
        self.pieces.get(&(square, index))
    }

    pub fn eval(&self, p: &CoverPoint) -> f64 {
        self.piece(p.square, p.index)
            .map_or(0.0, |q| q.eval(p.u, p.v))
    }

    pub fn is_zero(&self) -> bool {
        self.pieces
            .values()
            .all(|p| p.terms.iter().all(|t| t.2 == 0.0))
    }

    /// Integral over the cover with respect to unit-area squares.
    pub fn raw_integral(&self) -> f64 {
        let mut keys: Vec<_> = self.pieces.keys().collect();
        keys.sort();
        keys.into_iter()
            .map(|k| self.pieces[k].square_integral())
            .collect::<Compensated>()
            .value()
    }

    /// Integral against the invariant measure normalized to mass one on a
    /// fundamental domain.
    pub fn total_integral(&self) -> f64 {
        self.raw_integral() / self.n_squares as f64
    }

    /// `a * self + b * other`, piecewise.
    pub fn combine(&self, a: f64, other: &Observable, b: f64) -> Observable {
        let mut out = Observable {
            pieces: HashMap::new(),
            n_squares: self.n_squares,
            d: self.d,
        };
        for (k, p) in &self.pieces {
            out.pieces.insert(*k, p.scaled(a));
        }
        for (k, p) in &other.pieces {
            let entry = out.pieces.entry(*k).or_default();
            entry.terms.extend(p.scaled(b).terms);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut keys: Vec<_> = self.pieces.keys().copied().collect();
        keys.sort();
        let mut s = String::new();
        for (sq, idx) in keys {
            let _ = writeln!(
                s,
                "square={sq} index={} poly={}",
                idx.render(self.d),
                self.pieces[&(sq, idx)].render()
            );
        }
        s
    }

    pub fn from_text(o: &Origami, text: &str) -> Result<Self, ObservableParseError> {
        let mut g = Observable::zero(o);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| ObservableParseError { line: i + 1, msg };
            let (mut sq, mut idx, mut poly) = (None, None, None);
            for field in line.split_whitespace() {
                let (k, v) = field
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got {field:?}")))?;
                match k {
                    "square" => sq = Some(v.parse::<usize>().map_err(|e| err(e.to_string()))?),
                    "index" => idx = Some(CoverIndex::parse(v, g.d).map_err(err)?),
                    "poly" => poly = Some(Poly::parse(v).map_err(err)?),
                    other => return Err(err(format!("unknown key {other:?}"))),
                }
            }
            let sq = sq.ok_or_else(|| err("missing square=".into()))?;
            if sq >= g.n_squares {
                return Err(err(format!("square {sq} out of range")));
            }
            g.insert(
                sq,
                idx.ok_or_else(|| err("missing index=".into()))?,
                poly.ok_or_else(|| err("missing poly=".into()))?,
            );
        }
        Ok(g)
    }
}

/// `int_0^T G(phi_t p) dt`, integrating each straight segment in closed form.
pub fn ergodic_integral(
    o: &Origami,
    g: &Observable,
    p: CoverPoint,
    dir: Direction,
    t: f64,
) -> Result<f64, FlowError> {
    Ok(ergodic_integrals_at(o, g, p, dir, &[t])?[0])
}

/// Ergodic integrals up to each time in the increasing list `checkpoints`,
/// taken along one orbit.
pub fn ergodic_integrals_at(
    o: &Origami,
    g: &Observable,
    p: CoverPoint,
    dir: Direction,
    checkpoints: &[f64],
) -> Result<Vec<f64>, FlowError> {
    let mut cur = FlowCursor::new(o, p, dir);
    let mut acc = Compensated::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut last = 0.0;
    for &t in checkpoints {
        assert!(t >= last, "checkpoints must be increasing");
        cur.run(t - last, |q, dt| {
            if let Some(poly) = g.piece(q.square, q.index) {
                acc.add(poly.segment_integral(q.u, q.v, dir.dx, dir.dy, dt));
            }
        })?;
        out.push(acc.value());
        last = t;
    }
    Ok(out)
}

/// Induced map on the bottom edge of one square, with the cover index
/// accumulated along each return.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewIet {
    /// Left endpoints of the continuity intervals; starts at 0.
    pub break_points: Vec<f64>,
    pub translations: Vec<f64>,
    pub labels: Vec<CoverIndex>,
    pub return_times: Vec<f64>,
}

impl SkewIet {
    pub fn n_intervals(&self) -> usize {
        self.break_points.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        let n = self.break_points.len();
        (0..n)
            .map(|i| {
                let end = if i + 1 < n {
                    self.break_points[i + 1]
                } else {
                    1.0
                };
                end - self.break_points[i]
            })
            .collect()
    }

    pub fn interval_of(&self, x: f64) -> usize {
        self.break_points
            .partition_point(|&b| b <= x)
            .saturating_sub(1)
    }

    pub fn apply(&self, x: f64) -> (f64, CoverIndex) {
        let i = self.interval_of(x);
        (x + self.translations[i], self.labels[i])
    }

    /// Largest gap or overlap between consecutive image intervals.
    pub fn tiling_defect(&self) -> f64 {
        let mut images: Vec<(f64, f64)> = self
            .break_points
            .iter()
            .zip(self.lengths())
            .zip(&self.translations)
            .map(|((&b, len), &t)| (b + t, b + t + len))
            .collect();
        images.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut defect = images[0].0.abs();
        for w in images.windows(2) {
            defect = defect.max((w[1].0 - w[0].1).abs());
        }
        defect.max((images.last().unwrap().1 - 1.0).abs())
    }

    /// Lebesgue mean of the labels, per component.
    pub fn label_mean(&self, d: usize) -> Vec<f64> {
        let lens = self.lengths();
        (0..d)
            .map(|k| {
                lens.iter()
                    .zip(&self.labels)
                    .map(|(l, f)| l * f.0[k] as f64)
                    .collect::<Compensated>()
                    .value()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ReturnData {
    image: f64,
    label: CoverIndex,
    time: f64,
}

const TRANSLATION_TOL: f64 = 1e-9;

fn same_branch(a: &ReturnData, ax: f64, b: &ReturnData, bx: f64) -> bool {
    a.label == b.label && ((a.image - ax) - (b.image - bx)).abs() < TRANSLATION_TOL
}

fn first_return_point(
    o: &Origami,
    square: usize,
    x: f64,
    dir: Direction,
    cap: f64,
) -> Result<ReturnData, FlowError> {
    let start = CoverPoint::new(square, x, 0.0);
    let mut cur = FlowCursor::new(o, start, dir);
    let upward = dir.dy > 0.0;
    if !upward {
        // leave through the bottom edge first
        cur.next_crossing()?;
    }
    loop {
        let c = cur.next_crossing()?;
        if c.elapsed > cap {
            return Err(FlowError::NoReturn { cap });
        }
        if upward && c.side == Side::Top && c.to == square {
            return Ok(ReturnData {
                image: c.position,
                label: c.index_after,
                time: c.elapsed,
            });
        }
        if !upward && c.side == Side::Bottom && c.from == square {
            return Ok(ReturnData {
                image: c.position,
                label: c.index_before,
                time: c.elapsed,
            });
        }
    }
}

/// Number of equally spaced probes used to locate continuity intervals.
pub const RETURN_PROBES: usize = 2048;
pub const BREAK_TOL: f64 = 1e-12;

/// First-return map of the flow to the bottom edge of `square`.
pub fn first_return(
    o: &Origami,
    square: usize,
    dir: Direction,
    cap: f64,
) -> Result<SkewIet, FlowError> {
    if dir.dy.abs() < 1e-12 {
        return Err(FlowError::HorizontalTransversal);
    }
    let eval = |x: f64| first_return_point(o, square, x, dir, cap);
    let mut probes: Vec<(f64, ReturnData)> = Vec::with_capacity(RETURN_PROBES);
    for i in 0..RETURN_PROBES {
        let x = (i as f64 + 0.5) / RETURN_PROBES as f64;
        match eval(x) {
            Ok(r) => probes.push((x, r)),
            Err(FlowError::Singular { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let mut breaks = vec![0.0];
    for w in probes.windows(2) {
        let ((xa, ra), (xb, rb)) = (w[0], w[1]);
        if !same_branch(&ra, xa, &rb, xb) {
            bisect_breaks(&eval, xa, ra, xb, rb, &mut breaks)?;
        }
    }
    let mut translations = Vec::with_capacity(breaks.len());
    let mut labels = Vec::with_capacity(breaks.len());
    let mut return_times = Vec::with_capacity(breaks.len());
    for i in 0..breaks.len() {
        let hi = breaks.get(i + 1).copied().unwrap_or(1.0);
        let mid = 0.5 * (breaks[i] + hi);
        let r = eval_near(&eval, mid, breaks[i], hi)?;
        translations.push(r.1.image - r.0);
        labels.push(r.1.label);
        return_times.push(r.1.time);
    }
    let iet = SkewIet {
        break_points: breaks,
        translations,
        labels,
        return_times,
    };
    let defect = iet.tiling_defect();
    if defect > 1e-9 {
        return Err(FlowError::BadTiling(defect));
    }
    Ok(iet)
}

/// Evaluate at `x`, nudging inside `(lo, hi)` if `x` is singular.
fn eval_near<F>(eval: &F, x: f64, lo: f64, hi: f64) -> Result<(f64, ReturnData), FlowError>
where
    F: Fn(f64) -> Result<ReturnData, FlowError>,
{
    let mut last = None;
    for k in 0..8 {
        let y = x + (hi - lo) * 0.01 * k as f64 * if k % 2 == 0 { 1.0 } else { -1.0 };
        match eval(y) {
            Ok(r) => return Ok((y, r)),
            Err(e @ FlowError::Singular { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

fn bisect_breaks<F>(
    eval: &F,
    xa: f64,
    ra: ReturnData,
    xb: f64,
    rb: ReturnData,
    out: &mut Vec<f64>,
) -> Result<(), FlowError>
where
    F: Fn(f64) -> Result<ReturnData, FlowError>,
{
    if xb - xa < BREAK_TOL {
        out.push(0.5 * (xa + xb));
        return Ok(());
    }
    let xm = 0.5 * (xa + xb);
    let rm = match eval(xm) {
        Ok(r) => r,
        Err(FlowError::Singular { .. }) => {
            // the singular orbit is the discontinuity; further breaks on
            // either side are resolved separately
            out.push(xm);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let left = same_branch(&ra, xa, &rm, xm);
    let right = same_branch(&rm, xm, &rb, xb);
    if left {
        bisect_breaks(eval, xm, rm, xb, rb, out)
    } else if right {
        bisect_breaks(eval, xa, ra, xm, rm, out)
    } else {
        bisect_breaks(eval, xa, ra, xm, rm, out)?;
        bisect_breaks(eval, xm, rm, xb, rb, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{staircase, windtree_plus};
    use proptest::prelude::*;

    #[test]
    fn zero_time_is_identity() {
        let o = staircase(3).unwrap();
        let p = CoverPoint::new(1, 0.3, 0.7);
        let (q, n) = flow(&o, p, Direction::new(1.0, 0.4).unwrap(), 0.0).unwrap();
        assert_eq!((q, n), (p, 0));
    }

    #[test]
    fn single_vertical_step() {
        let o = staircase(2).unwrap();
        let p = CoverPoint::new(0, 0.5, 0.5);
        let (q, n) = flow(&o, p, Direction::new(0.0, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(n, 1);
        assert_eq!(q.square, o.up(0));
        assert_eq!(q.index, o.w_up(0));
        assert!((q.u - 0.5).abs() < 1e-15 && (q.v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn corner_hit_is_singular() {
        let o = Origami::torus();
        let p = CoverPoint::new(0, 0.5, 0.5);
        let r = flow(&o, p, Direction::new(1.0, 1.0).unwrap(), 3.0);
        assert!(matches!(r, Err(FlowError::Singular { .. })));
    }

    #[test]
    fn bad_direction() {
        assert_eq!(Direction::new(0.0, 0.0), Err(FlowError::BadDirection));
        assert_eq!(Direction::new(f64::NAN, 1.0), Err(FlowError::BadDirection));
    }

    #[test]
    fn constant_piece_integral() {
        let o = staircase(2).unwrap();
        let mut g = Observable::zero(&o);
        g.insert(0, CoverIndex::ZERO, Poly::constant(1.0));
        let p = CoverPoint::new(0, 0.2, 0.3);
        let dir = Direction::new(0.6, 0.8).unwrap();
        assert_eq!(ergodic_integral(&o, &g, p, dir, 0.25).unwrap(), 0.25);
        let zero = Observable::zero(&o);
        assert_eq!(ergodic_integral(&o, &zero, p, dir, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn segment_integral_matches_simpson() {
        let poly = Poly {
            terms: vec![(0, 0, 0.5), (3, 1, -2.0), (2, 2, 1.5), (0, 4, 0.25)],
        };
        let (u0, v0, a, b, tau) = (0.1, 0.2, 0.6, 0.8, 0.9);
        let n = 2000;
        let h = tau / n as f64;
        let f = |s: f64| poly.eval(u0 + a * s, v0 + b * s);
        let mut simpson = f(0.0) + f(tau);
        for i in 1..n {
            simpson += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        simpson *= h / 3.0;
        let exact = poly.segment_integral(u0, v0, a, b, tau);
        assert!((exact - simpson).abs() < 1e-12, "{exact} vs {simpson}");
    }

    #[test]
    fn bump_has_unit_mass() {
        let o = windtree_plus();
        let g = Observable::unit_bump(&o);
        assert!((g.raw_integral() - 56.0).abs() < 1e-12);
        assert!((g.total_integral() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn observable_text_round_trip() {
        let o = windtree_plus();
        let mut g = Observable::zero(&o);
        g.insert(
            3,
            CoverIndex::from_slice(&[1, -2]).unwrap(),
            Poly::unit_bump(),
        );
        g.insert(
            7,
            CoverIndex::ZERO,
            Poly {
                terms: vec![(12, 0, 0.125), (0, 0, 2.5)],
            },
        );
        let text = g.to_text();
        assert!(text.contains("square=3 index=1,-2 poly=c11=36.0;c21=-36.0"));
        let back = Observable::from_text(&o, &text).unwrap();
        assert_eq!(back, g);
        assert!(Observable::from_text(&o, "square=99 index=0,0 poly=c00=1").is_err());
        assert!(Observable::from_text(&o, "square=1 index=0 poly=c00=1").is_err());
        assert!(Observable::from_text(&o, "square=1 index=0,0 poly=x00=1").is_err());
    }

    #[test]
    fn torus_rotation_return() {
        let o = Origami::torus();
        let alpha = (5f64.sqrt() - 1.0) / 2.0;
        let iet = first_return(&o, 0, Direction::new(alpha, 1.0).unwrap(), 100.0).unwrap();
        assert_eq!(iet.n_intervals(), 2);
        assert!((iet.break_points[1] - (1.0 - alpha)).abs() < 1e-11);
        assert!((iet.translations[0] - alpha).abs() < 1e-11);
        assert!((iet.translations[1] - (alpha - 1.0)).abs() < 1e-11);
        assert!(iet.labels.iter().all(CoverIndex::is_zero));
    }

    #[test]
    fn horizontal_transversal_rejected() {
        let o = Origami::torus();
        let r = first_return(&o, 0, Direction::new(1.0, 0.0).unwrap(), 10.0);
        assert_eq!(r, Err(FlowError::HorizontalTransversal));
    }

    #[test]
    fn tiny_cap_gives_no_return() {
        let o = staircase(3).unwrap();
        let r = first_return(&o, 0, Direction::new(0.3, 1.0).unwrap(), 0.5);
        assert!(matches!(r, Err(FlowError::NoReturn { .. })));
    }

    fn arb_point(n: usize) -> impl Strategy<Value = CoverPoint> {
        (0..n, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(s, u, v)| CoverPoint::new(s, u, v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn reversibility(p in arb_point(56), theta in 0.0..std::f64::consts::TAU, t in 0.0..200.0f64) {
            let o = windtree_plus();
            let dir = Direction::from_angle(theta);
            if let Ok((q, _)) = flow(&o, p, dir, t) {
                if let Ok((back, _)) = flow(&o, q, dir, -t) {
                    prop_assert!(back.close_to(&p, 1e-9), "{:?} vs {:?}", back, p);
                }
            }
        }

        #[test]
        fn additivity(p in arb_point(3), theta in 0.0..std::f64::consts::TAU,
                      s in 0.0..1000.0f64, t in 0.0..1000.0f64) {
            let o = staircase(3).unwrap();
            let dir = Direction::from_angle(theta);
            let whole = flow(&o, p, dir, s + t);
            let split = flow(&o, p, dir, s).and_then(|(m, _)| flow(&o, m, dir, t));
            if let (Ok((a, _)), Ok((b, _))) = (whole, split) {
                prop_assert!(a.close_to(&b, 1e-9), "{:?} vs {:?}", a, b);
            }
        }

        #[test]
        fn deck_equivariance(p in arb_point(56), theta in 0.0..std::f64::consts::TAU,
                             t in 0.0..300.0f64, k in 0usize..2, sign in prop::bool::ANY) {
            let o = windtree_plus();
            let dir = Direction::from_angle(theta);
            let e = CoverIndex::unit(k).scale(if sign { 1 } else { -1 });
            let a = flow(&o, p.translated(e), dir, t);
            let b = flow(&o, p, dir, t).map(|(q, n)| (q.translated(e), n));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn linearity(p in arb_point(2), theta in 0.0..std::f64::consts::TAU,
                     a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let o = staircase(2).unwrap();
            let dir = Direction::from_angle(theta);
            let g1 = Observable::unit_bump(&o);
            let mut g2 = Observable::zero(&o);
            g2.insert(1, CoverIndex::ZERO, Poly { terms: vec![(0, 0, 1.0), (1, 3, -2.0)] });
            g2.insert(0, CoverIndex::unit(0), Poly::constant(0.5));
            let t = 300.0;
            let mix = g1.combine(a, &g2, b);
            if let (Ok(i1), Ok(i2), Ok(im)) = (
                ergodic_integral(&o, &g1, p, dir, t),
                ergodic_integral(&o, &g2, p, dir, t),
                ergodic_integral(&o, &mix, p, dir, t),
            ) {
                prop_assert!((im - a * i1 - b * i2).abs() < 1e-9 * (a.abs() + b.abs()) * t);
            }
        }
    }
}
