//! Exact addressing of Sierpinski-graph nodes and gasket cells.
//!
//! A node is a finite word over {0,1,2}; its geometric image is a lattice
//! point with dyadic coordinates in the oblique basis {(1,0), (1/2, sqrt3/2)}.
//! All point arithmetic is integer-exact so that identifications such as
//! `Phi(001) = Phi(010)` are decided without any floating-point comparison.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Longest representable word. 3^64 < 2^128, so a packed base-3 code fits
/// u128 with room to spare; walks routinely descend 40+ levels before their
/// convergence criterion fires.
pub const MAX_WORD_LEN: usize = 64;

pub(crate) const POW3: [u128; MAX_WORD_LEN + 1] = {
    let mut t = [1u128; MAX_WORD_LEN + 1];
    let mut i = 1;
    while i <= MAX_WORD_LEN {
        t[i] = t[i - 1] * 3;
        i += 1;
    }
    t
};

/// A finite address word over the alphabet {0,1,2}.
///
/// Stored as a packed base-3 code plus an explicit length, so `0`, `00` and
/// `000` are distinct addresses. The empty word is the tree root.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    len: u8,
    code: u128,
}

impl Word {
    pub const ROOT: Word = Word { len: 0, code: 0 };

    pub fn from_letters(letters: &[u8]) -> Result<Word> {
        if letters.len() > MAX_WORD_LEN {
            return Err(Error::WordTooLong(letters.len(), MAX_WORD_LEN));
        }
        let mut code = 0u128;
        for &l in letters {
            if l > 2 {
                return Err(Error::InvalidLetter((b'0' + l) as char));
            }
            code = code * 3 + l as u128;
        }
        Ok(Word { len: letters.len() as u8, code })
    }

    /// Reconstruct a word from its level and packed base-3 code.
    pub fn from_code(len: usize, code: u128) -> Word {
        debug_assert!(len <= MAX_WORD_LEN && code < POW3[len]);
        Word { len: len as u8, code }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_root(&self) -> bool {
        self.len == 0
    }

    pub fn is_empty(&self) -> bool {
        self.is_root()
    }

    pub fn code(&self) -> u128 {
        self.code
    }

    /// Letter at position `i`, counting from the first (coarsest) letter.
    pub fn letter(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.code / POW3[self.len() - 1 - i]) % 3) as u8
    }

    pub fn last_letter(&self) -> Option<u8> {
        if self.is_root() {
            None
        } else {
            Some((self.code % 3) as u8)
        }
    }

    pub fn letters(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.letter(i)).collect()
    }

    pub fn child(&self, letter: u8) -> Result<Word> {
        debug_assert!(letter <= 2);
        if self.len() >= MAX_WORD_LEN {
            return Err(Error::WordTooLong(self.len() + 1, MAX_WORD_LEN));
        }
        Ok(Word { len: self.len + 1, code: self.code * 3 + letter as u128 })
    }

    pub fn father(&self) -> Option<Word> {
        if self.is_root() {
            None
        } else {
            Some(Word { len: self.len - 1, code: self.code / 3 })
        }
    }

    /// Prefix of length `level` (the ancestor cell at that level).
    pub fn ancestor(&self, level: usize) -> Word {
        assert!(level <= self.len());
        Word { len: level as u8, code: self.code / POW3[self.len() - level] }
    }

    /// True when `self` is a prefix of `other`.
    pub fn is_ancestor_of(&self, other: &Word) -> bool {
        other.len() >= self.len() && other.ancestor(self.len()) == *self
    }

    /// Length of the trailing run of the last letter; 0 for the root.
    pub(crate) fn trailing_run(&self) -> usize {
        match self.last_letter() {
            None => 0,
            Some(b) => {
                let mut r = 1;
                while r < self.len() && self.letter(self.len() - 1 - r) == b {
                    r += 1;
                }
                r
            }
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", self.letter(i))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            write!(f, "Word(o)")
        } else {
            write!(f, "Word({})", self)
        }
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Word> {
        if s.len() > MAX_WORD_LEN {
            return Err(Error::WordTooLong(s.len(), MAX_WORD_LEN));
        }
        let mut code = 0u128;
        for ch in s.chars() {
            match ch {
                '0' | '1' | '2' => code = code * 3 + (ch as u128 - '0' as u128),
                other => return Err(Error::InvalidLetter(other)),
            }
        }
        Ok(Word { len: s.len() as u8, code })
    }
}

/// Exact dyadic lattice point: the plane point
/// `(a*(1,0) + b*(1/2, sqrt3/2)) / 2^level`.
///
/// Kept in canonical form (level 0, or at least one odd coordinate) so that
/// equality and hashing agree with geometric equality.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct LatticePoint {
    a: i64,
    b: i64,
    level: u8,
}

impl LatticePoint {
    pub fn new(mut a: i64, mut b: i64, mut level: u8) -> LatticePoint {
        while level > 0 && a % 2 == 0 && b % 2 == 0 {
            a /= 2;
            b /= 2;
            level -= 1;
        }
        LatticePoint { a, b, level }
    }

    pub fn coords(&self) -> (i64, i64, u8) {
        (self.a, self.b, self.level)
    }

    /// Plane coordinates (Euclidean embedding of the oblique basis).
    pub fn plane(&self) -> (f64, f64) {
        let denom = (1u64 << self.level) as f64;
        let x = (self.a as f64 + self.b as f64 / 2.0) / denom;
        let y = self.b as f64 * (3.0f64.sqrt() / 2.0) / denom;
        (x, y)
    }

    pub fn euclid_distance(&self, other: &LatticePoint) -> f64 {
        let (x0, y0) = self.plane();
        let (x1, y1) = other.plane();
        ((x0 - x1).powi(2) + (y0 - y1).powi(2)).sqrt()
    }

    /// Point lies inside the closed unit triangle.
    pub fn in_unit_triangle(&self) -> bool {
        self.a >= 0 && self.b >= 0 && self.a + self.b <= 1i64 << self.level
    }

    /// Coordinates rescaled to a common denominator `2^level`.
    pub fn at_level(&self, level: u8) -> (i64, i64) {
        assert!(level >= self.level);
        let shift = level - self.level;
        (self.a << shift, self.b << shift)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let denom = 1u64 << self.level;
        write!(f, "{}/{},{}/{}", self.a, denom, self.b, denom)
    }
}

/// Lattice coordinates of the three fixed points p0, p1, p2 at level 0.
const CORNER: [(i64, i64); 3] = [(0, 0), (1, 0), (0, 1)];

/// Apply `f_w` to the level-0 lattice point `(a, b)` exactly.
///
/// `f_w = f_{w_1} o ... o f_{w_n}` with `f_i(x) = (x + p_i)/2`, so letters act
/// innermost-first: the last letter of `w` is applied first.
fn apply_cell_map(w: &Word, start: (i64, i64)) -> (i64, i64, u8) {
    let (mut a, mut b) = start;
    let mut level: u8 = 0;
    for i in (0..w.len()).rev() {
        let (pa, pb) = CORNER[w.letter(i) as usize];
        a += pa << level;
        b += pb << level;
        level += 1;
    }
    (a, b, level)
}

/// The vertex image `Phi_n(w) = p_w = f_{w_1...w_{n-1}}(p_{w_n})`.
pub fn vertex_point(w: &Word) -> Result<LatticePoint> {
    let last = w.last_letter().ok_or(Error::EmptyWord)?;
    let prefix = w.ancestor(w.len() - 1);
    let (a, b, level) = apply_cell_map(&prefix, CORNER[last as usize]);
    Ok(LatticePoint::new(a, b, level))
}

/// The three exact corner points of the cell `K_w` (the root gives the
/// outer triangle).
pub fn cell_vertices(w: &Word) -> [LatticePoint; 3] {
    let mut out = [LatticePoint::new(0, 0, 0); 3];
    for (j, corner) in CORNER.iter().enumerate() {
        let (a, b, level) = apply_cell_map(w, *corner);
        out[j] = LatticePoint::new(a, b, level);
    }
    out
}

/// Barycenter of `K_w` in plane coordinates.
pub fn cell_barycenter(w: &Word) -> (f64, f64) {
    let corners = cell_vertices(w);
    let mut x = 0.0;
    let mut y = 0.0;
    for c in &corners {
        let (cx, cy) = c.plane();
        x += cx;
        y += cy;
    }
    (x / 3.0, y / 3.0)
}

/// Cell-corner approximation of the boundary point coded by an infinite word.
///
/// `prefix` is a truncation of the infinite word; the returned point is a
/// corner of `K_{prefix[..depth]}`, hence within `2^-depth` of the limit
/// (the gasket has diameter 1).
pub fn boundary_point(prefix: &Word, depth: usize) -> Result<LatticePoint> {
    if prefix.len() < depth || prefix.is_root() {
        return Err(Error::PrefixTooShort { prefix_len: prefix.len(), depth: depth.max(1) });
    }
    // Corner selected by the next letter when available; the deepest known
    // letter otherwise. Any corner of the depth-cell meets the error bound.
    let steer = if prefix.len() > depth { prefix.letter(depth) } else { prefix.letter(depth - 1) };
    let cell = prefix.ancestor(depth);
    let (a, b, level) = apply_cell_map(&cell, CORNER[steer as usize]);
    Ok(LatticePoint::new(a, b, level))
}
