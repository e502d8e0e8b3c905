use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A point of Z².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Site {
    pub x1: i64,
    pub x2: i64,
}

impl Site {
    pub const ORIGIN: Site = Site { x1: 0, x2: 0 };
    pub const E1: Site = Site { x1: 1, x2: 0 };
    pub const E2: Site = Site { x1: 0, x2: 1 };
    pub const DIAG: Site = Site { x1: 1, x2: 1 };

    pub const fn new(x1: i64, x2: i64) -> Self {
        Site { x1, x2 }
    }

    /// Coordinatewise order `self ≤ other`.
    pub fn le(self, other: Site) -> bool {
        self.x1 <= other.x1 && self.x2 <= other.x2
    }

    pub fn l1(self) -> i64 {
        self.x1.abs() + self.x2.abs()
    }

    /// Antidiagonal level `x1 + x2`.
    pub fn level(self) -> i64 {
        self.x1 + self.x2
    }

    pub fn min(self, other: Site) -> Site {
        Site::new(self.x1.min(other.x1), self.x2.min(other.x2))
    }

    pub fn max(self, other: Site) -> Site {
        Site::new(self.x1.max(other.x1), self.x2.max(other.x2))
    }

    pub fn step(self, s: Step) -> Site {
        self + s.vector()
    }

    pub fn step_back(self, s: Step) -> Site {
        self - s.vector()
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site::new(-self.x1, -self.x2)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

/// Unit step. For down-left objects the same tag means the negated vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    E1,
    E2,
}

impl Step {
    pub fn vector(self) -> Site {
        match self {
            Step::E1 => Site::E1,
            Step::E2 => Site::E2,
        }
    }

    pub fn other(self) -> Step {
        match self {
            Step::E1 => Step::E2,
            Step::E2 => Step::E1,
        }
    }
}

/// Inclusive rectangle `[lo, hi]`. Storage order is row-major with `x2` outer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub lo: Site,
    pub hi: Site,
}

impl LatticeWindow {
    pub fn new(lo: Site, hi: Site) -> Result<Self> {
        if !lo.le(hi) {
            return domain(format!("empty window: lo {lo} is not <= hi {hi}"));
        }
        Ok(LatticeWindow { lo, hi })
    }

    /// Square `[lo, lo + (side-1, side-1)]`.
    pub fn square(lo: Site, side: i64) -> Result<Self> {
        if side < 1 {
            return domain(format!("square side must be positive, got {side}"));
        }
        Self::new(lo, lo + Site::new(side - 1, side - 1))
    }

    pub fn width(&self) -> usize {
        (self.hi.x1 - self.lo.x1 + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.hi.x2 - self.lo.x2 + 1) as usize
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: Site) -> bool {
        self.lo.le(x) && x.le(self.hi)
    }

    pub fn contains_window(&self, other: &LatticeWindow) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    pub fn index(&self, x: Site) -> Option<usize> {
        if self.contains(x) {
            Some(self.index_unchecked(x))
        } else {
            None
        }
    }

    #[inline]
    pub fn index_unchecked(&self, x: Site) -> usize {
        (x.x2 - self.lo.x2) as usize * self.width() + (x.x1 - self.lo.x1) as usize
    }

    pub fn site(&self, idx: usize) -> Site {
        let w = self.width();
        Site::new(self.lo.x1 + (idx % w) as i64, self.lo.x2 + (idx / w) as i64)
    }

    pub fn intersect(&self, other: &LatticeWindow) -> Option<LatticeWindow> {
        LatticeWindow::new(self.lo.max(other.lo), self.hi.min(other.hi)).ok()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (self.lo.x2..=self.hi.x2)
            .flat_map(move |x2| (self.lo.x1..=self.hi.x1).map(move |x1| Site::new(x1, x2)))
    }

    pub fn translate(&self, z: Site) -> LatticeWindow {
        LatticeWindow { lo: self.lo + z, hi: self.hi + z }
    }
}

impl fmt::Display for LatticeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_window_is_rejected() {
        assert!(LatticeWindow::new(Site::new(1, 0), Site::new(0, 5)).is_err());
        let w = LatticeWindow::new(Site::new(0, 0), Site::new(0, 0)).unwrap();
        assert_eq!(w.area(), 1);
    }

    #[test]
    fn index_round_trip() {
        let w = LatticeWindow::new(Site::new(-3, 2), Site::new(4, 6)).unwrap();
        assert_eq!(w.area(), 8 * 5);
        for (k, x) in w.sites().enumerate() {
            assert_eq!(w.index(x), Some(k));
            assert_eq!(w.site(k), x);
        }
        assert_eq!(w.index(Site::new(5, 2)), None);
    }

    #[test]
    fn intersection() {
        let a = LatticeWindow::new(Site::new(0, 0), Site::new(5, 5)).unwrap();
        let b = LatticeWindow::new(Site::new(3, -2), Site::new(9, 4)).unwrap();
        let c = a.intersect(&b).unwrap();
        assert_eq!(c, LatticeWindow::new(Site::new(3, 0), Site::new(5, 4)).unwrap());
        let far = LatticeWindow::new(Site::new(10, 10), Site::new(11, 11)).unwrap();
        assert!(a.intersect(&far).is_none());
    }
}
