//! Small fixed-capacity integer vectors used for cover indices.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Largest cover rank supported by [`CoverIndex`].
pub const MAX_RANK: usize = 4;

/// An element of `Z^d` for `d <= MAX_RANK`. Components past `d` are kept at zero,
/// so equality and arithmetic do not need to know the rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CoverIndex(pub [i64; MAX_RANK]);

impl CoverIndex {
    pub const ZERO: CoverIndex = CoverIndex([0; MAX_RANK]);

    pub fn from_slice(v: &[i64]) -> Option<Self> {
        if v.len() > MAX_RANK {
            return None;
        }
        let mut out = [0; MAX_RANK];
        out[..v.len()].copy_from_slice(v);
        Some(CoverIndex(out))
    }

    /// Unit vector `e_k`.
    pub fn unit(k: usize) -> Self {
        let mut out = [0; MAX_RANK];
        out[k] = 1;
        CoverIndex(out)
    }

    pub fn components(&self, d: usize) -> &[i64] {
        &self.0[..d]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Max-norm.
    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn scale(&self, k: i64) -> Self {
        let mut out = self.0;
        out.iter_mut().for_each(|c| *c *= k);
        CoverIndex(out)
    }

    /// Comma-separated rendering of the first `d` components.
    pub fn render(&self, d: usize) -> String {
        self.0[..d]
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parse `v1,..,vd`; the number of components must equal `d`.
    pub fn parse(s: &str, d: usize) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != d {
            return Err(format!("expected {d} components, found {}", parts.len()));
        }
        let vals = parts
            .iter()
            .map(|p| {
                p.parse::<i64>()
                    .map_err(|e| format!("bad integer {p:?}: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        CoverIndex::from_slice(&vals).ok_or_else(|| format!("rank {d} exceeds {MAX_RANK}"))
    }
}

impl Add for CoverIndex {
    type Output = CoverIndex;
    fn add(mut self, rhs: CoverIndex) -> CoverIndex {
        self += rhs;
        self
    }
}

impl AddAssign for CoverIndex {
    fn add_assign(&mut self, rhs: CoverIndex) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a += *b;
        }
    }
}

impl Sub for CoverIndex {
    type Output = CoverIndex;
    fn sub(mut self, rhs: CoverIndex) -> CoverIndex {
        self -= rhs;
        self
    }
}

impl SubAssign for CoverIndex {
    fn sub_assign(&mut self, rhs: CoverIndex) {
        for (a, b) in self.0.iter_mut().zip(rhs.0.iter()) {
            *a -= *b;
        }
    }
}

impl Neg for CoverIndex {
    type Output = CoverIndex;
    fn neg(self) -> CoverIndex {
        self.scale(-1)
    }
}

impl fmt::Display for CoverIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Serialize for CoverIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoverIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        CoverIndex::from_slice(&v).ok_or_else(|| serde::de::Error::custom("rank too large"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let v = CoverIndex::parse("3,-1", 2).unwrap();
        assert_eq!(v.render(2), "3,-1");
        assert!(CoverIndex::parse("3", 2).is_err());
        assert!(CoverIndex::parse("a,b", 2).is_err());
    }

    #[test]
    fn arithmetic() {
        let a = CoverIndex::unit(0);
        let b = CoverIndex::unit(1).scale(3);
        assert_eq!((a + b - a).0[1], 3);
        assert_eq!((-b).norm_inf(), 3);
        assert!((a - a).is_zero());
    }
}
