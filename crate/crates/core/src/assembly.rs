//! Finite-volume discretization of `(kappa^2 - div H grad) u = W` on the
//! periodic grid.
//!
//! Integrating over cell `E_ij` and applying the divergence theorem gives one
//! flux per face. The flux uses `H` at the face centre and a gradient estimate
//! that depends only on the face, so the two cells sharing a face see the same
//! value. Collecting coefficients yields the nine-point stencil matrix `A_H`,
//! the system `A u = V^{1/2} z` with `A = V * kappa^2 * I - A_H`, and the
//! precision `Q = A^T A / V`.

use std::sync::Arc;

use crate::coefficients::{AnisotropySpec, KappaSpec, SymMat2};
use crate::error::{Error, Result};
use crate::grid::{CellCoord, GridSpec};
use crate::sparse::{CsrMatrix, SparsityPattern};

/// `H` at every face centre. Each face is stored once.
///
/// `vertical[j * M + i]` is the face at `x = i h_x` in row `j` (left face of
/// cell `(i, j)`); `horizontal[j * M + i]` is the face at `y = j h_y` in
/// column `i` (bottom face of cell `(i, j)`).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceValues {
    grid: GridSpec,
    pub vertical: Vec<SymMat2>,
    pub horizontal: Vec<SymMat2>,
}

impl FaceValues {
    pub fn new(grid: GridSpec, vertical: Vec<SymMat2>, horizontal: Vec<SymMat2>) -> Result<Self> {
        let n = grid.num_cells();
        if vertical.len() != n || horizontal.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: vertical.len().min(horizontal.len()) });
        }
        Ok(Self { grid, vertical, horizontal })
    }

    pub fn constant(grid: GridSpec, h: SymMat2) -> Self {
        let n = grid.num_cells();
        Self { grid, vertical: vec![h; n], horizontal: vec![h; n] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_faces(&self) -> usize {
        self.vertical.len() + self.horizontal.len()
    }

    /// `(right, top, left, bottom)` face values of cell `(i, j)`.
    pub fn of_cell(&self, i: usize, j: usize) -> [SymMat2; 4] {
        let m = self.grid.cells_x();
        let n = self.grid.cells_y();
        [
            self.vertical[j * m + (i + 1) % m],
            self.horizontal[((j + 1) % n) * m + i],
            self.vertical[j * m + i],
            self.horizontal[j * m + i],
        ]
    }

    pub fn all_positive_definite(&self) -> bool {
        self.vertical.iter().chain(&self.horizontal).all(SymMat2::is_positive_definite)
    }
}

/// Evaluate `H` once per face of the grid.
pub fn sample_h_on_faces(grid: &GridSpec, spec: &AnisotropySpec) -> FaceValues {
    let m = grid.cells_x();
    let mut vertical = Vec::with_capacity(grid.num_cells());
    let mut horizontal = Vec::with_capacity(grid.num_cells());
    for j in 0..grid.cells_y() {
        for i in 0..m {
            vertical.push(spec.h_at(grid.vertical_face_center(i, j)));
            horizontal.push(spec.h_at(grid.horizontal_face_center(i, j)));
        }
    }
    FaceValues { grid: *grid, vertical, horizontal }
}

/// Neighbour offsets of the nine-point stencil, in storage order.
pub const STENCIL_OFFSETS: [(i64, i64); 9] = [
    (0, 0),   // self
    (-1, 0),  // left
    (1, 0),   // right
    (0, 1),   // up
    (0, -1),  // down
    (-1, -1), // down-left
    (1, -1),  // down-right
    (-1, 1),  // up-left
    (1, 1),   // up-right
];

/// The matrix `A_H`: nine coefficients per row, keyed by [`STENCIL_OFFSETS`].
#[derive(Debug, Clone, PartialEq)]
pub struct StencilMatrix {
    grid: GridSpec,
    rows: Vec<[f64; 9]>,
}

impl StencilMatrix {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rows(&self) -> &[[f64; 9]] {
        &self.rows
    }

    /// Column indices of the nine stencil entries of `row`.
    pub fn columns(&self, row: usize) -> [usize; 9] {
        stencil_columns(&self.grid, row)
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.num_cells();
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        Ok((0..n)
            .map(|r| {
                let cols = self.columns(r);
                self.rows[r].iter().zip(cols).map(|(a, c)| a * u[c]).sum()
            })
            .collect())
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(9 * self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, v) in self.columns(r).into_iter().zip(row) {
                triplets.push((r, c, *v));
            }
        }
        CsrMatrix::from_triplets(self.rows.len(), self.rows.len(), &triplets).expect("in range")
    }
}

fn stencil_columns(grid: &GridSpec, row: usize) -> [usize; 9] {
    let c = grid.coord_of(row);
    STENCIL_OFFSETS.map(|(di, dj)| grid.linear_index(CellCoord::new(c.i + di, c.j + dj)))
}

/// Build `A_H` from face values.
pub fn assemble_ah(faces: &FaceValues) -> StencilMatrix {
    let grid = faces.grid;
    let rx = grid.step_y() / grid.step_x();
    let ry = grid.step_x() / grid.step_y();
    let mut rows = Vec::with_capacity(grid.num_cells());
    for j in 0..grid.cells_y() {
        for i in 0..grid.cells_x() {
            let [r, t, l, b] = faces.of_cell(i, j);
            let dx12 = 0.25 * (t.xy - b.xy);
            let dy21 = 0.25 * (r.xy - l.xy);
            rows.push([
                -rx * (r.xx + l.xx) - ry * (t.yy + b.yy),
                rx * l.xx - dx12,
                rx * r.xx + dx12,
                ry * t.yy + dy21,
                ry * b.yy - dy21,
                0.25 * (b.xy + l.xy),
                -0.25 * (b.xy + r.xy),
                -0.25 * (t.xy + l.xy),
                0.25 * (t.xy + r.xy),
            ]);
        }
    }
    StencilMatrix { grid, rows }
}

/// Reusable sparsity structure of `Q` on a grid, with the map that scatters
/// products of stencil entries into it.
#[derive(Debug)]
pub struct PrecisionAssembler {
    grid: GridSpec,
    pattern: Arc<SparsityPattern>,
    columns: Vec<[usize; 9]>,
    scatter: Vec<u32>,
}

impl PrecisionAssembler {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.num_cells();
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|r| {
                let c = grid.coord_of(r);
                (-2..=2)
                    .flat_map(|dj| (-2..=2).map(move |di| (di, dj)))
                    .map(|(di, dj)| grid.linear_index(CellCoord::new(c.i + di, c.j + dj)))
                    .collect()
            })
            .collect();
        let pattern = Arc::new(SparsityPattern::from_rows(n, rows));
        let columns: Vec<[usize; 9]> = (0..n).map(|r| stencil_columns(grid, r)).collect();
        let mut scatter = Vec::with_capacity(81 * n);
        for cols in &columns {
            for &ca in cols {
                for &cb in cols {
                    scatter.push(pattern.position(ca, cb).expect("within 5x5 neighbourhood") as u32);
                }
            }
        }
        Self { grid: *grid, pattern, columns, scatter }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Rows of `A = V kappa^2 I - A_H`.
    pub fn a_rows(&self, stencil: &StencilMatrix, kappa: &KappaSpec) -> Vec<[f64; 9]> {
        let vk = self.grid.cell_area() * kappa.kappa_sq();
        stencil
            .rows
            .iter()
            .map(|row| {
                let mut a = row.map(|x| -x);
                a[0] += vk;
                a
            })
            .collect()
    }

    /// `Q = A^T A / V`.
    pub fn precision(&self, stencil: &StencilMatrix, kappa: &KappaSpec) -> CsrMatrix {
        let inv_v = 1.0 / self.grid.cell_area();
        let mut values = vec![0.0; self.pattern.nnz()];
        let vk = self.grid.cell_area() * kappa.kappa_sq();
        for (r, row) in stencil.rows.iter().enumerate() {
            let mut a = row.map(|x| -x);
            a[0] += vk;
            let scatter = &self.scatter[81 * r..81 * r + 81];
            for (ia, &va) in a.iter().enumerate() {
                let s = va * inv_v;
                for (ib, &vb) in a.iter().enumerate() {
                    values[scatter[9 * ia + ib] as usize] += s * vb;
                }
            }
        }
        CsrMatrix::new(Arc::clone(&self.pattern), values).expect("pattern length")
    }

    pub fn a_matrix(&self, stencil: &StencilMatrix, kappa: &KappaSpec) -> CsrMatrix {
        let rows = self.a_rows(stencil, kappa);
        let mut triplets = Vec::with_capacity(9 * rows.len());
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in self.columns[r].iter().zip(row) {
                triplets.push((r, *c, *v));
            }
        }
        let n = self.grid.num_cells();
        CsrMatrix::from_triplets(n, n, &triplets).expect("in range")
    }
}

/// Assembled operator for one coefficient set.
#[derive(Debug, Clone)]
pub struct PrecisionModel {
    grid: GridSpec,
    kappa: KappaSpec,
    stencil: StencilMatrix,
    q: CsrMatrix,
}

impl PrecisionModel {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kappa(&self) -> &KappaSpec {
        &self.kappa
    }

    /// Per-cell `kappa^2`; constant in this model.
    pub fn kappa_diag(&self) -> Vec<f64> {
        vec![self.kappa.kappa_sq(); self.grid.num_cells()]
    }

    pub fn stencil(&self) -> &StencilMatrix {
        &self.stencil
    }

    pub fn precision(&self) -> &CsrMatrix {
        &self.q
    }

    pub fn into_precision(self) -> CsrMatrix {
        self.q
    }

    /// `A = V kappa^2 I - A_H` as a sparse matrix.
    pub fn a_matrix(&self) -> CsrMatrix {
        PrecisionAssembler::new(&self.grid).a_matrix(&self.stencil, &self.kappa)
    }

    /// `A u = V kappa^2 u - A_H u`.
    pub fn apply_a(&self, u: &[f64]) -> Result<Vec<f64>> {
        let ahu = self.stencil.apply(u)?;
        let vk = self.grid.cell_area() * self.kappa.kappa_sq();
        Ok(u.iter().zip(ahu).map(|(x, y)| vk * x - y).collect())
    }
}

/// Assemble `A_H` and `Q` from face values with a prepared assembler.
pub fn assemble_from_faces(
    assembler: &PrecisionAssembler,
    kappa: &KappaSpec,
    faces: &FaceValues,
) -> Result<PrecisionModel> {
    if faces.grid != assembler.grid {
        return Err(Error::InvalidSpec("face values belong to a different grid".into()));
    }
    if !faces.all_positive_definite() {
        return Err(Error::InvalidSpec("H is not positive definite at some face".into()));
    }
    let stencil = assemble_ah(faces);
    let q = assembler.precision(&stencil, kappa);
    Ok(PrecisionModel { grid: assembler.grid, kappa: *kappa, stencil, q })
}

pub fn assemble_precision(grid: &GridSpec, kappa: &KappaSpec, spec: &AnisotropySpec) -> Result<PrecisionModel> {
    let faces = sample_h_on_faces(grid, spec);
    assemble_from_faces(&PrecisionAssembler::new(grid), kappa, &faces)
}
