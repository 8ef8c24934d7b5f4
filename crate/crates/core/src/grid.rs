//! Spatial grids, gridded field series and the discrete Laplacian used by the
//! phase-regularity criterion.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A regular 1-D or 2-D grid with a mask of active sites.
///
/// Active sites are numbered in row-major cell order; that numbering is the
/// row index of every per-site matrix in the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dims: Vec<usize>,
    mask: Vec<bool>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    #[serde(skip)]
    cell_of_row: Vec<usize>,
    #[serde(skip)]
    row_of_cell: Vec<Option<usize>>,
}

impl SpatialGrid {
    /// Builds a grid of shape `dims` (one or two axes) with the given row-major mask.
    pub fn new(dims: Vec<usize>, mask: Vec<bool>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(Error::invalid(format!(
                "grids must have one or two axes, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("grid axes must be non-empty"));
        }
        let cells: usize = dims.iter().product();
        if mask.len() != cells {
            return Err(Error::DimensionMismatch {
                what: "grid mask".into(),
                expected: cells,
                found: mask.len(),
            });
        }
        let d = dims.len();
        let mut grid = SpatialGrid {
            dims,
            mask,
            spacing: vec![1.0; d],
            origin: vec![0.0; d],
            cell_of_row: Vec::new(),
            row_of_cell: Vec::new(),
        };
        grid.index();
        if grid.cell_of_row.is_empty() {
            return Err(Error::invalid("grid has no active sites"));
        }
        Ok(grid)
    }

    /// A grid with every site active.
    pub fn full(dims: Vec<usize>) -> Result<Self> {
        let cells = dims.iter().product();
        Self::new(dims, vec![true; cells])
    }

    /// Sets per-axis spacing and the coordinate of cell (0, 0).
    pub fn with_geometry(mut self, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        if spacing.len() != self.dims.len() || origin.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                what: "grid geometry axes".into(),
                expected: self.dims.len(),
                found: spacing.len().min(origin.len()),
            });
        }
        if spacing.iter().chain(&origin).any(|x| !x.is_finite())
            || spacing.iter().any(|&s| s <= 0.0)
        {
            return Err(Error::invalid("grid spacing must be finite and positive"));
        }
        self.spacing = spacing;
        self.origin = origin;
        Ok(self)
    }

    fn index(&mut self) {
        self.row_of_cell = vec![None; self.mask.len()];
        self.cell_of_row.clear();
        for (cell, &on) in self.mask.iter().enumerate() {
            if on {
                self.row_of_cell[cell] = Some(self.cell_of_row.len());
                self.cell_of_row.push(cell);
            }
        }
    }

    /// Rebuilds the site lookup tables after deserialization.
    pub fn reindexed(mut self) -> Self {
        self.index();
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Number of active sites `N`.
    pub fn n_active(&self) -> usize {
        self.cell_of_row.len()
    }

    pub fn n_cells(&self) -> usize {
        self.mask.len()
    }

    pub fn cell_of_row(&self, row: usize) -> usize {
        self.cell_of_row[row]
    }

    pub fn row_of_cell(&self, cell: usize) -> Option<usize> {
        self.row_of_cell.get(cell).copied().flatten()
    }

    /// Zero-based (row, column) index of a cell; 1-D grids report column 0.
    pub fn cell_position(&self, cell: usize) -> (usize, usize) {
        match self.dims.len() {
            1 => (cell, 0),
            _ => (cell / self.dims[1], cell % self.dims[1]),
        }
    }

    /// Zero-based grid position of an active site.
    pub fn position(&self, row: usize) -> (usize, usize) {
        self.cell_position(self.cell_of_row[row])
    }

    /// Active-site row at a grid position, if inside the grid and active.
    pub fn row_at(&self, i: isize, j: isize) -> Option<usize> {
        let (ny, nx) = self.shape2();
        if i < 0 || j < 0 || i as usize >= ny || j as usize >= nx {
            return None;
        }
        self.row_of_cell(i as usize * nx + j as usize)
    }

    /// Shape viewed as two axes (`[n]` becomes `(n, 1)`).
    pub fn shape2(&self) -> (usize, usize) {
        match self.dims.len() {
            1 => (self.dims[0], 1),
            _ => (self.dims[0], self.dims[1]),
        }
    }

    /// Physical coordinates of an active site, one entry per axis.
    pub fn coords(&self, row: usize) -> Vec<f64> {
        let (i, j) = self.position(row);
        let idx = [i, j];
        (0..self.dims.len())
            .map(|a| self.origin[a] + self.spacing[a] * idx[a] as f64)
            .collect()
    }

    /// Active sites within the `(2r+1) x (2r+1)` box around `row`, including itself.
    pub fn neighborhood(&self, row: usize, radius: usize) -> Vec<usize> {
        let (i, j) = self.position(row);
        let r = radius as isize;
        let mut out = Vec::new();
        for di in -r..=r {
            for dj in -r..=r {
                if let Some(n) = self.row_at(i as isize + di, j as isize + dj) {
                    out.push(n);
                }
            }
        }
        out
    }
}

/// An `N x L` real data matrix on a grid: rows are active sites, columns time steps.
#[derive(Clone, Debug)]
pub struct FieldSeries<T: Real> {
    pub grid: SpatialGrid,
    pub data: Array2<T>,
    pub dt: f64,
    pub t0: String,
    pub units: String,
}

impl<T: Real> FieldSeries<T> {
    pub fn new(grid: SpatialGrid, data: Array2<T>, dt: f64) -> Result<Self> {
        if data.nrows() != grid.n_active() {
            return Err(Error::DimensionMismatch {
                what: "field rows vs active sites".into(),
                expected: grid.n_active(),
                found: data.nrows(),
            });
        }
        if data.ncols() < 2 {
            return Err(Error::InsufficientSamples(format!(
                "a field series needs at least 2 time steps, got {}",
                data.ncols()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!(
                "sampling interval must be positive, got {dt}"
            )));
        }
        for ((site, time), v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { site, time });
            }
        }
        Ok(FieldSeries {
            grid,
            data,
            dt,
            t0: String::new(),
            units: String::new(),
        })
    }

    pub fn with_metadata(mut self, t0: impl Into<String>, units: impl Into<String>) -> Self {
        self.t0 = t0.into();
        self.units = units.into();
        self
    }

    /// Number of sites `N`.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of time steps `L`.
    pub fn l(&self) -> usize {
        self.data.ncols()
    }

    /// Same grid and metadata, new data of identical shape.
    pub fn with_data(&self, data: Array2<T>) -> Result<Self> {
        let mut out = FieldSeries::new(self.grid.clone(), data, self.dt)?;
        out.t0 = self.t0.clone();
        out.units = self.units.clone();
        Ok(out)
    }
}

/// Result of seasonal-cycle removal.
#[derive(Clone, Debug)]
pub struct Deseasonalized<T: Real> {
    pub series: FieldSeries<T>,
    /// `(site, phase)` pairs whose variance was zero and were left unscaled.
    pub zero_variance: Vec<(usize, usize)>,
}

/// Removes the per-site, per-phase mean (time step `t` has phase `t mod period`)
/// and optionally scales each phase to unit population standard deviation.
pub fn deseasonalize<T: Real>(
    fs: &FieldSeries<T>,
    period: usize,
    normalize: bool,
) -> Result<Deseasonalized<T>> {
    if period == 0 {
        return Err(Error::invalid("seasonal period must be positive"));
    }
    let l = fs.l();
    if l < 2 * period {
        return Err(Error::InsufficientSamples(format!(
            "{l} time steps cannot cover two cycles of period {period}"
        )));
    }
    let mut out = fs.data.clone();
    let mut zero_variance = Vec::new();
    for (site, mut row) in out.rows_mut().into_iter().enumerate() {
        for phase in 0..period {
            let idx = (phase..l).step_by(period);
            let count = T::count(idx.len());
            let mean = idx.clone().map(|t| row[t]).sum::<T>() / count;
            for t in idx.clone() {
                row[t] -= mean;
            }
            if normalize {
                let var = idx.clone().map(|t| row[t] * row[t]).sum::<T>() / count;
                let scale = mean.abs().max(T::one());
                if var.sqrt() <= T::epsilon() * T::lit(16.0) * scale {
                    for t in idx {
                        row[t] = T::zero();
                    }
                    zero_variance.push((site, phase));
                    log::debug!("site {site} phase {phase} has zero variance; left unscaled");
                } else {
                    let sd = var.sqrt();
                    for t in idx {
                        row[t] /= sd;
                    }
                }
            }
        }
    }
    if !zero_variance.is_empty() {
        log::info!(
            "{} site/phase combinations had zero variance",
            zero_variance.len()
        );
    }
    Ok(Deseasonalized {
        series: fs.with_data(out)?,
        zero_variance,
    })
}

/// Discrete Laplacian on the active sites of a grid.
///
/// Neighbours outside the grid or masked out are dropped and the center
/// weight equals the number of remaining neighbours, so constants are always
/// annihilated.
#[derive(Clone, Debug)]
pub struct LaplacianStencil {
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub center: Vec<f64>,
}

impl LaplacianStencil {
    /// Number of sites the stencil is defined on.
    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    /// Applies the stencil to a per-site field.
    pub fn apply<T: Real>(&self, field: &[T]) -> Vec<T> {
        self.center
            .iter()
            .zip(&self.neighbors)
            .enumerate()
            .map(|(i, (&c, nb))| {
                nb.iter().fold(T::lit(c) * field[i], |acc, &(j, w)| {
                    acc + T::lit(w) * field[j]
                })
            })
            .collect()
    }
}

/// Builds the 5-point Laplacian (three-point second difference on lines).
pub fn build_laplacian(grid: &SpatialGrid) -> Result<LaplacianStencil> {
    let n = grid.n_active();
    let mut neighbors = Vec::with_capacity(n);
    let mut center = Vec::with_capacity(n);
    let mut has_interior = false;
    for row in 0..n {
        let (i, j) = grid.position(row);
        let (i, j) = (i as isize, j as isize);
        let axes = [((i - 1, j), (i + 1, j)), ((i, j - 1), (i, j + 1))];
        let mut nb = Vec::with_capacity(4);
        for (lo, hi) in axes {
            let a = grid.row_at(lo.0, lo.1);
            let b = grid.row_at(hi.0, hi.1);
            if a.is_some() && b.is_some() {
                has_interior = true;
            }
            nb.extend(a.into_iter().chain(b).map(|r| (r, -1.0)));
        }
        center.push(nb.len() as f64);
        neighbors.push(nb);
    }
    if !has_interior {
        return Err(Error::invalid(
            "grid has no site with active neighbours on both sides along any axis",
        ));
    }
    Ok(LaplacianStencil { neighbors, center })
}
