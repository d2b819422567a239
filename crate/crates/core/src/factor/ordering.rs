//! Fill-reducing orderings and their supernode partitions.

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A symmetric permutation together with a partition of the permuted index
/// range into contiguous supernodes.
///
/// `perm[new] = old`. Supernode `s` covers new indices
/// `starts[s]..starts[s + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    perm: Vec<usize>,
    starts: Vec<usize>,
}

impl Ordering {
    pub fn new(perm: Vec<usize>, starts: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidSpec("ordering is not a permutation".into()));
            }
        }
        let valid =
            starts.first() == Some(&0) && starts.last() == Some(&n) && starts.windows(2).all(|w| w[0] < w[1] || n == 0);
        if !valid {
            return Err(Error::InvalidSpec("supernode boundaries must increase from 0 to n".into()));
        }
        Ok(Self { perm, starts })
    }

    /// Identity permutation split into blocks of `block` columns.
    pub fn natural(n: usize, block: usize) -> Self {
        let block = block.max(1);
        let mut starts: Vec<usize> = (0..n).step_by(block).collect();
        starts.push(n);
        if n == 0 {
            starts = vec![0, 0];
        }
        Self { perm: (0..n).collect(), starts }
    }

    /// Nested dissection of the periodic grid for operators whose stencil
    /// reaches two cells in each direction.
    ///
    /// The torus is first opened by removing a strip of two columns and then a
    /// strip of two rows; the remaining rectangle is bisected recursively
    /// across its longer side by two-cell-wide strips. Each leaf region and
    /// each separator becomes one supernode, ordered children first.
    pub fn nested_dissection(grid: &GridSpec) -> Self {
        let mut nd = Dissector { grid, perm: Vec::with_capacity(grid.num_cells()), starts: vec![0] };
        nd.region(Region { x0: 0, y0: 0, w: grid.cells_x(), h: grid.cells_y(), periodic_x: true, periodic_y: true });
        Self { perm: nd.perm, starts: nd.starts }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn supernode_starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn num_supernodes(&self) -> usize {
        self.starts.len() - 1
    }

    /// `inverse[old] = new`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            inv[old] = new;
        }
        inv
    }
}

const LEAF_CELLS: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Region {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    periodic_x: bool,
    periodic_y: bool,
}

struct Dissector<'a> {
    grid: &'a GridSpec,
    perm: Vec<usize>,
    starts: Vec<usize>,
}

impl Dissector<'_> {
    fn emit(&mut self, x0: usize, y0: usize, w: usize, h: usize) {
        if w == 0 || h == 0 {
            return;
        }
        let (m, n) = (self.grid.cells_x(), self.grid.cells_y());
        for j in 0..h {
            for i in 0..w {
                self.perm.push(((y0 + j) % n) * m + (x0 + i) % m);
            }
        }
        self.starts.push(self.perm.len());
    }

    fn region(&mut self, r: Region) {
        if r.w == 0 || r.h == 0 {
            return;
        }
        if r.w * r.h <= LEAF_CELLS || r.w.max(r.h) < 5 {
            self.emit(r.x0, r.y0, r.w, r.h);
            return;
        }
        if r.periodic_x && (r.w >= r.h || !r.periodic_y) {
            let rest = Region { x0: r.x0 + 2, w: r.w.saturating_sub(2), periodic_x: false, ..r };
            self.region(rest);
            self.emit(r.x0, r.y0, r.w.min(2), r.h);
            return;
        }
        if r.periodic_y {
            let rest = Region { y0: r.y0 + 2, h: r.h.saturating_sub(2), periodic_y: false, ..r };
            self.region(rest);
            self.emit(r.x0, r.y0, r.w, r.h.min(2));
            return;
        }
        if r.w >= r.h {
            let left = (r.w - 2) / 2;
            self.region(Region { w: left, ..r });
            self.region(Region { x0: r.x0 + left + 2, w: r.w - left - 2, ..r });
            self.emit(r.x0 + left, r.y0, 2, r.h);
        } else {
            let low = (r.h - 2) / 2;
            self.region(Region { h: low, ..r });
            self.region(Region { y0: r.y0 + low + 2, h: r.h - low - 2, ..r });
            self.emit(r.x0, r.y0 + low, r.w, 2);
        }
    }
}
