//! Square-tiled surfaces decorated with integer edge weights, which encode
//! a `Z^d` cover: crossing the right (top) edge of square `i` left-to-right
//! (bottom-to-top) shifts the cover index by `w_right[i]` (`w_up[i]`).

use std::fmt::Write as _;

use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{CoverIndex, MAX_RANK};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("{which} is not a permutation of 0..{n}")]
    NonPermutation { which: &'static str, n: usize },
    #[error("surface is disconnected: square 0 reaches {reached} of {n} squares")]
    Disconnected { reached: usize, n: usize },
    #[error("weight table mismatch: {0}")]
    DimensionMismatch(String),
    #[error("staircase needs at least 2 squares, got {0}")]
    StaircaseTooSmall(usize),
    #[error("surface file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Horizontal => Axis::Vertical,
            Axis::Vertical => Axis::Horizontal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origami {
    d: usize,
    right: Vec<usize>,
    up: Vec<usize>,
    right_inv: Vec<usize>,
    up_inv: Vec<usize>,
    w_right: Vec<CoverIndex>,
    w_up: Vec<CoverIndex>,
}

fn invert(p: &[usize], which: &'static str) -> Result<Vec<usize>, SurfaceError> {
    let n = p.len();
    let mut inv = vec![usize::MAX; n];
    for (i, &j) in p.iter().enumerate() {
        if j >= n || inv[j] != usize::MAX {
            return Err(SurfaceError::NonPermutation { which, n });
        }
        inv[j] = i;
    }
    Ok(inv)
}

impl Origami {
    /// Validating constructor. `w_right` and `w_up` hold one length-`d`
    /// vector per square.
    pub fn new(
        right: Vec<usize>,
        up: Vec<usize>,
        w_right: &[Vec<i64>],
        w_up: &[Vec<i64>],
        d: usize,
    ) -> Result<Self, SurfaceError> {
        let n = right.len();
        if n == 0 {
            return Err(SurfaceError::NonPermutation { which: "right", n });
        }
        if up.len() != n {
            return Err(SurfaceError::NonPermutation { which: "up", n });
        }
        if d == 0 || d > MAX_RANK {
            return Err(SurfaceError::DimensionMismatch(format!(
                "rank {d} outside 1..={MAX_RANK}"
            )));
        }
        let right_inv = invert(&right, "right")?;
        let up_inv = invert(&up, "up")?;
        let to_index = |table: &[Vec<i64>], name: &str| -> Result<Vec<CoverIndex>, SurfaceError> {
            if table.len() != n {
                return Err(SurfaceError::DimensionMismatch(format!(
                    "{name} has {} entries for {n} squares",
                    table.len()
                )));
            }
            table
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    if w.len() != d {
                        Err(SurfaceError::DimensionMismatch(format!(
                            "{name}[{i}] has length {} but d = {d}",
                            w.len()
                        )))
                    } else {
                        Ok(CoverIndex::from_slice(w).expect("rank checked"))
                    }
                })
                .collect()
        };
        let w_right = to_index(w_right, "w_right")?;
        let w_up = to_index(w_up, "w_up")?;

        let o = Origami {
            d,
            right,
            up,
            right_inv,
            up_inv,
            w_right,
            w_up,
        };
        let reached = o.orbit_size();
        if reached != n {
            return Err(SurfaceError::Disconnected { reached, n });
        }
        Ok(o)
    }

    fn orbit_size(&self) -> usize {
        let n = self.n_squares();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for y in [self.right[x], self.up[x], self.right_inv[x], self.up_inv[x]] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count
    }

    /// Single unit square with both pairs of sides glued.
    pub fn torus() -> Self {
        Origami::new(vec![0], vec![0], &[vec![0]], &[vec![0]], 1).expect("torus is valid")
    }

    pub fn n_squares(&self) -> usize {
        self.right.len()
    }

    pub fn rank(&self) -> usize {
        self.d
    }

    pub fn right(&self, i: usize) -> usize {
        self.right[i]
    }
    pub fn up(&self, i: usize) -> usize {
        self.up[i]
    }
    pub fn left(&self, i: usize) -> usize {
        self.right_inv[i]
    }
    pub fn down(&self, i: usize) -> usize {
        self.up_inv[i]
    }
    pub fn w_right(&self, i: usize) -> CoverIndex {
        self.w_right[i]
    }
    pub fn w_up(&self, i: usize) -> CoverIndex {
        self.w_up[i]
    }

    /// Neighbour in the positive direction of `axis`.
    pub fn step(&self, axis: Axis, i: usize) -> usize {
        match axis {
            Axis::Horizontal => self.right[i],
            Axis::Vertical => self.up[i],
        }
    }

    pub fn step_back(&self, axis: Axis, i: usize) -> usize {
        match axis {
            Axis::Horizontal => self.right_inv[i],
            Axis::Vertical => self.up_inv[i],
        }
    }

    /// Weight picked up when leaving square `i` in the positive direction of `axis`.
    pub fn weight(&self, axis: Axis, i: usize) -> CoverIndex {
        match axis {
            Axis::Horizontal => self.w_right[i],
            Axis::Vertical => self.w_up[i],
        }
    }

    /// Permutation sending a square to the square whose top-right corner is
    /// reached after one counterclockwise turn around its own top-right corner.
    pub fn corner_map(&self, i: usize) -> usize {
        self.up_inv[self.right_inv[self.up[self.right[i]]]]
    }

    /// Vertex classes: each cycle of [`Origami::corner_map`] lists the squares
    /// sharing one vertex as their top-right corner.
    pub fn vertex_cycles(&self) -> Vec<Vec<usize>> {
        let n = self.n_squares();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cyc.push(x);
                x = self.corner_map(x);
            }
            out.push(cyc);
        }
        out
    }

    /// Cover index accumulated by a small counterclockwise loop around each
    /// vertex. All zero iff the weights define a cover branched nowhere.
    pub fn vertex_monodromy(&self) -> Vec<CoverIndex> {
        self.vertex_cycles()
            .iter()
            .map(|cyc| {
                let mut total = CoverIndex::ZERO;
                for &x in cyc {
                    let a = self.right[x];
                    let b = self.up[a];
                    let c = self.right_inv[b];
                    let e = self.up_inv[c];
                    total += self.w_right[x];
                    total += self.w_up[a];
                    total -= self.w_right[c];
                    total -= self.w_up[e];
                }
                total
            })
            .collect()
    }

    /// Unit rows (or columns) of the surface: cycles of `right` (or `up`).
    pub fn unit_cycles(&self, axis: Axis) -> Vec<Vec<usize>> {
        let n = self.n_squares();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cyc.push(x);
                x = self.step(axis, x);
            }
            out.push(cyc);
        }
        out
    }

    /// Whether the row (column) through `x` continues across its top (right)
    /// side into an aligned row with no vertex in between.
    fn row_glued_above(&self, axis: Axis, x: usize) -> bool {
        let t = axis.other();
        let mut y = x;
        loop {
            if self.step(t, self.step(axis, y)) != self.step(axis, self.step(t, y)) {
                return false;
            }
            y = self.step(axis, y);
            if y == x {
                return true;
            }
        }
    }

    pub fn cylinders(&self, axis: Axis) -> Vec<Cylinder> {
        let t = axis.other();
        let n = self.n_squares();
        let mut row_of = vec![0usize; n];
        for (r, cyc) in self.unit_cycles(axis).iter().enumerate() {
            for &x in cyc {
                row_of[x] = r;
            }
        }
        let mut assigned = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if assigned[start] {
                continue;
            }
            // walk down to the bottom row of this cylinder
            let mut bottom = start;
            let mut wraps = false;
            loop {
                let below = self.step_back(t, bottom);
                if !self.row_glued_above(axis, below) {
                    break;
                }
                if row_of[below] == row_of[start] {
                    wraps = true;
                    bottom = start;
                    break;
                }
                bottom = below;
            }
            let mut rows: Vec<Vec<usize>> = Vec::new();
            let mut base = bottom;
            loop {
                let mut row = Vec::new();
                let mut x = base;
                loop {
                    row.push(x);
                    x = self.step(axis, x);
                    if x == base {
                        break;
                    }
                }
                rows.push(row);
                if !self.row_glued_above(axis, base) {
                    break;
                }
                base = self.step(t, base);
                if row_of[base] == row_of[bottom] {
                    break;
                }
            }
            for r in &rows {
                for &x in r {
                    assigned[x] = true;
                }
            }
            let width = rows[0].len();
            let height = rows.len();
            out.push(Cylinder {
                direction: axis,
                squares: rows.iter().flatten().copied().collect(),
                width,
                height,
                closed: wraps,
                rows,
            });
        }
        out
    }

    pub fn stratum(&self) -> StratumData {
        let cycles = self.vertex_cycles();
        let mut cone_angles: Vec<usize> = cycles.iter().map(Vec::len).collect();
        cone_angles.sort_unstable_by(|a, b| b.cmp(a));
        let excess: usize = cone_angles.iter().map(|k| k - 1).sum();
        StratumData {
            genus: excess / 2 + 1,
            cone_angles,
        }
    }

    /// Sum of all right-edge and up-edge weights.
    pub fn weight_totals(&self) -> (CoverIndex, CoverIndex) {
        let sum = |w: &[CoverIndex]| w.iter().fold(CoverIndex::ZERO, |acc, &x| acc + x);
        (sum(&self.w_right), sum(&self.w_up))
    }

    /// Text form: header `origami d=<d> n=<n>` then one line per square.
    pub fn to_text(&self) -> String {
        let mut s = format!("origami d={} n={}\n", self.d, self.n_squares());
        for i in 0..self.n_squares() {
            let _ = writeln!(
                s,
                "{i} r={} u={} wr={} wu={}",
                self.right[i],
                self.up[i],
                self.w_right[i].render(self.d),
                self.w_up[i].render(self.d)
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SurfaceError> {
        let perr = |line: usize, msg: String| SurfaceError::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines
            .next()
            .ok_or_else(|| perr(1, "empty surface file".into()))?;
        let mut hparts = header.split_whitespace();
        if hparts.next() != Some("origami") {
            return Err(perr(hl, "header must start with `origami`".into()));
        }
        let (mut d, mut n) = (None, None);
        for kv in hparts {
            match kv.split_once('=') {
                Some(("d", v)) => d = v.parse::<usize>().ok(),
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                _ => return Err(perr(hl, format!("unexpected header field {kv:?}"))),
            }
        }
        let d = d.ok_or_else(|| perr(hl, "missing or bad d=".into()))?;
        let n = n.ok_or_else(|| perr(hl, "missing or bad n=".into()))?;
        if d == 0 || d > MAX_RANK {
            return Err(perr(hl, format!("rank {d} outside 1..={MAX_RANK}")));
        }

        let mut right = vec![None; n];
        let mut up = vec![None; n];
        let mut wr = vec![Vec::new(); n];
        let mut wu = vec![Vec::new(); n];
        for (ln, line) in lines {
            let mut parts = line.split_whitespace();
            let id: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| perr(ln, "missing square id".into()))?;
            if id >= n {
                return Err(perr(ln, format!("square id {id} out of range")));
            }
            if right[id].is_some() {
                return Err(perr(ln, format!("square {id} listed twice")));
            }
            let (mut r, mut u, mut a, mut b) = (None, None, None, None);
            for kv in parts {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| perr(ln, format!("expected key=value, got {kv:?}")))?;
                match k {
                    "r" => r = Some(v.parse::<usize>().map_err(|e| perr(ln, e.to_string()))?),
                    "u" => u = Some(v.parse::<usize>().map_err(|e| perr(ln, e.to_string()))?),
                    "wr" => a = Some(CoverIndex::parse(v, d).map_err(|e| perr(ln, e))?),
                    "wu" => b = Some(CoverIndex::parse(v, d).map_err(|e| perr(ln, e))?),
                    other => return Err(perr(ln, format!("unknown key {other:?}"))),
                }
            }
            right[id] = Some(r.ok_or_else(|| perr(ln, "missing r=".into()))?);
            up[id] = Some(u.ok_or_else(|| perr(ln, "missing u=".into()))?);
            wr[id] = a
                .ok_or_else(|| perr(ln, "missing wr=".into()))?
                .components(d)
                .to_vec();
            wu[id] = b
                .ok_or_else(|| perr(ln, "missing wu=".into()))?
                .components(d)
                .to_vec();
        }
        let collect = |v: Vec<Option<usize>>| -> Result<Vec<usize>, SurfaceError> {
            v.into_iter()
                .enumerate()
                .map(|(i, x)| x.ok_or_else(|| perr(0, format!("square {i} missing"))))
                .collect()
        };
        Origami::new(collect(right)?, collect(up)?, &wr, &wu, d)
    }

    pub fn summary(&self) -> SurfaceSummary {
        SurfaceSummary {
            n_squares: self.n_squares(),
            d: self.d,
            stratum: self.stratum(),
            horizontal: self
                .cylinders(Axis::Horizontal)
                .iter()
                .map(Cylinder::info)
                .collect(),
            vertical: self
                .cylinders(Axis::Vertical)
                .iter()
                .map(Cylinder::info)
                .collect(),
            weights: (0..self.n_squares())
                .map(|i| WeightRow {
                    square: i,
                    right: self.right[i],
                    up: self.up[i],
                    w_right: self.w_right[i].components(self.d).to_vec(),
                    w_up: self.w_up[i].components(self.d).to_vec(),
                })
                .collect(),
        }
    }
}

/// Staircase with `s` squares in one horizontal row; the outer two squares
/// are swapped across their top sides and every interior square is glued
/// to itself vertically.
pub fn staircase(s: usize) -> Result<Origami, SurfaceError> {
    if s < 2 {
        return Err(SurfaceError::StaircaseTooSmall(s));
    }
    let right: Vec<usize> = (0..s).map(|i| (i + 1) % s).collect();
    let mut up: Vec<usize> = (0..s).collect();
    up.swap(0, s - 1);
    let w_right = vec![vec![0]; s];
    let mut w_up = vec![vec![0]; s];
    w_up[0][0] = 1;
    w_up[s - 1][0] = -1;
    Origami::new(right, up, &w_right, &w_up, 1)
}

/// Torus cell of the plus-shaped obstacle lattice, after shifting the
/// fundamental domain so that its seams lie on grid lines: a 6x4 block of
/// unit cells of which these ten are occupied by obstacle.
const WT_WIDTH: i64 = 6;
const WT_HEIGHT: i64 = 4;
const WT_BLOCKED: [(i64, i64); 10] = [
    (1, 2),
    (2, 2),
    (3, 2),
    (2, 1),
    (2, 3),
    (4, 0),
    (5, 0),
    (0, 0),
    (5, 3),
    (5, 1),
];

/// Unfolded plus-shaped wind-tree table: four reflected copies of the free
/// cells of one torus cell. Copy `(a, b)` runs the billiard with horizontal
/// sign `(-1)^a` and vertical sign `(-1)^b`; hitting an obstacle side
/// switches to the mirrored copy.
pub fn windtree_plus() -> Origami {
    let free: Vec<(i64, i64)> = (0..WT_HEIGHT)
        .flat_map(|y| (0..WT_WIDTH).map(move |x| (x, y)))
        .filter(|c| !WT_BLOCKED.contains(c))
        .collect();
    let m = free.len();
    let cell_id = |c: (i64, i64)| free.iter().position(|&f| f == c);
    let n = 4 * m;
    let id = |a: usize, b: usize, k: usize| (2 * b + a) * m + k;

    let mut right = vec![0; n];
    let mut up = vec![0; n];
    let mut w_right = vec![vec![0, 0]; n];
    let mut w_up = vec![vec![0, 0]; n];
    for b in 0..2 {
        for a in 0..2 {
            let sx = if a == 0 { 1 } else { -1 };
            let sy = if b == 0 { 1 } else { -1 };
            for (k, &(x, y)) in free.iter().enumerate() {
                let src = id(a, b, k);

                let nx = x + sx;
                match cell_id((nx.rem_euclid(WT_WIDTH), y)) {
                    Some(j) => {
                        right[src] = id(a, b, j);
                        if !(0..WT_WIDTH).contains(&nx) {
                            w_right[src][0] = sx;
                        }
                    }
                    None => right[src] = id(1 - a, b, k),
                }

                let ny = y + sy;
                match cell_id((x, ny.rem_euclid(WT_HEIGHT))) {
                    Some(j) => {
                        up[src] = id(a, b, j);
                        if !(0..WT_HEIGHT).contains(&ny) {
                            w_up[src][1] = sy;
                        }
                    }
                    None => up[src] = id(a, 1 - b, k),
                }
            }
        }
    }
    Origami::new(right, up, &w_right, &w_up, 2).expect("wind-tree gluing is valid")
}

/// A maximal family of parallel closed unit rows (horizontal) or columns
/// (vertical). `rows[0]` is the bottom (left) row; `rows[j][i]` is the
/// `i`-th square along the core direction in the `j`-th row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cylinder {
    pub direction: Axis,
    pub squares: Vec<usize>,
    pub width: usize,
    pub height: usize,
    /// The rows close up on themselves transversally (the whole surface is
    /// one cylinder with no singular boundary).
    pub closed: bool,
    pub rows: Vec<Vec<usize>>,
}

impl Cylinder {
    pub fn modulus(&self) -> Rational64 {
        Rational64::new(self.width as i64, self.height as i64)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn info(&self) -> CylinderInfo {
        let m = self.modulus();
        CylinderInfo {
            width: self.width,
            height: self.height,
            modulus: format!("{}/{}", m.numer(), m.denom()),
            squares: self.squares.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratumData {
    /// Cone angles in multiples of 2π, largest first.
    pub cone_angles: Vec<usize>,
    pub genus: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderInfo {
    pub width: usize,
    pub height: usize,
    pub modulus: String,
    pub squares: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightRow {
    pub square: usize,
    pub right: usize,
    pub up: usize,
    pub w_right: Vec<i64>,
    pub w_up: Vec<i64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub n_squares: usize,
    pub d: usize,
    pub stratum: StratumData,
    pub horizontal: Vec<CylinderInfo>,
    pub vertical: Vec<CylinderInfo>,
    pub weights: Vec<WeightRow>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zeros(n: usize) -> Vec<Vec<i64>> {
        vec![vec![0]; n]
    }

    #[test]
    fn construction_errors() {
        assert!(Origami::new(vec![1, 0], vec![1, 0], &zeros(2), &zeros(2), 1).is_ok());
        assert_eq!(
            Origami::new(vec![0, 1], vec![0, 1], &zeros(2), &zeros(2), 1),
            Err(SurfaceError::Disconnected { reached: 1, n: 2 })
        );
        assert!(matches!(
            Origami::new(vec![0, 0], vec![1, 0], &zeros(2), &zeros(2), 1),
            Err(SurfaceError::NonPermutation { which: "right", .. })
        ));
        assert!(matches!(
            Origami::new(vec![1, 0], vec![1, 0], &[vec![0], vec![0, 0]], &zeros(2), 1),
            Err(SurfaceError::DimensionMismatch(_))
        ));
        assert_eq!(staircase(1), Err(SurfaceError::StaircaseTooSmall(1)));
    }

    #[test]
    fn torus_data() {
        let t = Origami::torus();
        let h = t.cylinders(Axis::Horizontal);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].modulus(), Rational64::from_integer(1));
        assert_eq!(
            t.stratum(),
            StratumData {
                cone_angles: vec![1],
                genus: 1
            }
        );
    }

    #[test]
    fn staircase_cylinders() {
        let s4 = staircase(4).unwrap();
        let h = s4.cylinders(Axis::Horizontal);
        assert_eq!(h.len(), 1);
        assert_eq!((h[0].width, h[0].height), (4, 1));
        assert_eq!(h[0].modulus(), Rational64::from_integer(4));
        let mut v: Vec<_> = s4
            .cylinders(Axis::Vertical)
            .iter()
            .map(|c| (c.width, c.height))
            .collect();
        v.sort();
        assert_eq!(v, vec![(1, 2), (2, 1)]);

        let s2 = staircase(2).unwrap();
        let h = s2.cylinders(Axis::Horizontal);
        assert_eq!(h.len(), 1);
        assert_eq!((h[0].width, h[0].height), (2, 1));
        for s in 3..8 {
            let mut v: Vec<_> = staircase(s)
                .unwrap()
                .cylinders(Axis::Vertical)
                .iter()
                .map(|c| (c.width, c.height))
                .collect();
            v.sort();
            assert_eq!(v, vec![(1, s - 2), (2, 1)]);
        }
    }

    #[test]
    fn staircase_strata() {
        // two squares glued by the same permutation both ways: a torus with
        // two regular marked vertices
        let s2 = staircase(2).unwrap().stratum();
        assert_eq!(
            s2,
            StratumData {
                cone_angles: vec![1, 1],
                genus: 1
            }
        );
        let s3 = staircase(3).unwrap().stratum();
        assert_eq!(
            s3,
            StratumData {
                cone_angles: vec![3],
                genus: 2
            }
        );
        for s in 2..10 {
            let st = staircase(s).unwrap().stratum();
            let excess: usize = st.cone_angles.iter().map(|k| k - 1).sum();
            assert_eq!(excess, 2 * st.genus - 2);
        }
    }

    #[test]
    fn windtree_shape() {
        let w = windtree_plus();
        assert_eq!(w.n_squares(), 56);
        assert_eq!(w.rank(), 2);
        let (tr, tu) = w.weight_totals();
        assert!(tr.is_zero() && tu.is_zero());
        let mut h: Vec<_> = w
            .cylinders(Axis::Horizontal)
            .iter()
            .map(|c| c.width)
            .collect();
        h.sort();
        h.dedup();
        assert_eq!(h, vec![4, 6]);
        let mut v: Vec<_> = w
            .cylinders(Axis::Vertical)
            .iter()
            .map(|c| c.width)
            .collect();
        v.sort();
        v.dedup();
        assert_eq!(v, vec![2, 6]);
        assert!(w.vertex_monodromy().iter().all(CoverIndex::is_zero));
    }

    #[test]
    fn text_round_trip() {
        for o in [staircase(3).unwrap(), windtree_plus()] {
            let text = o.to_text();
            let back = Origami::from_text(&text).unwrap();
            assert_eq!(back, o);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn text_errors() {
        assert!(Origami::from_text("").is_err());
        assert!(Origami::from_text("origami d=1 n=1\n0 r=0 u=0 wr=0 wu=0 x=1\n").is_err());
        assert!(Origami::from_text("origami d=1 n=1\n0 r=0 u=0 wr=0,1 wu=0\n").is_err());
        assert!(Origami::from_text("origami d=1 n=2\n0 r=1 u=1 wr=0 wu=0\n").is_err());
    }

    fn check_invariants(o: &Origami) {
        let n = o.n_squares();
        for i in 0..n {
            assert_eq!(o.left(o.right(i)), i);
            assert_eq!(o.down(o.up(i)), i);
        }
        for axis in [Axis::Horizontal, Axis::Vertical] {
            let cyls = o.cylinders(axis);
            let mut all: Vec<usize> = cyls.iter().flat_map(|c| c.squares.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            assert_eq!(cyls.iter().map(Cylinder::area).sum::<usize>(), n);
            for c in &cyls {
                for row in &c.rows {
                    assert_eq!(o.step(axis, *row.last().unwrap()), row[0]);
                }
            }
        }
        let st = o.stratum();
        let excess: usize = st.cone_angles.iter().map(|k| k - 1).sum();
        assert_eq!(excess + 2, 2 * st.genus);
    }

    #[test]
    fn builder_invariants() {
        for s in 3..9 {
            let o = staircase(s).unwrap();
            check_invariants(&o);
            assert!(o.vertex_monodromy().iter().all(CoverIndex::is_zero));
        }
        // the two-square staircase is a cover of the torus punctured at its
        // two marked points, with monodromy -2 and +2 around them
        let o = staircase(2).unwrap();
        check_invariants(&o);
        let mono: Vec<i64> = o.vertex_monodromy().iter().map(|m| m.0[0]).collect();
        assert_eq!(mono, vec![-2, 2]);
        check_invariants(&windtree_plus());
    }

    fn arb_origami() -> impl Strategy<Value = Origami> {
        (2usize..9).prop_flat_map(|n| {
            let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
            (perm.clone(), perm).prop_filter_map("disconnected", move |(r, u)| {
                Origami::new(r, u, &vec![vec![0]; n], &vec![vec![0]; n], 1).ok()
            })
        })
    }

    proptest! {
        #[test]
        fn random_origamis_satisfy_invariants(o in arb_origami()) {
            check_invariants(&o);
            let t = o.to_text();
            prop_assert_eq!(Origami::from_text(&t).unwrap(), o);
        }
    }
}
