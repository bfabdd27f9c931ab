//! Conforming simplicial meshes of the unit box `[0,1]^n`, n ∈ {2, 3}.
//!
//! Cells store their vertex indices in ascending order, and every
//! sub-simplex is oriented by its ascending global vertex indices. All sign
//! bookkeeping elsewhere in the crate relies on this single convention.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinat::{binomial, factorial, subsets};
use crate::error::{FeecError, Result};

const MAX_RESAMPLE_ROUNDS: usize = 100;

/// Affine map from the reference simplex onto one cell: `x = origin + jac * X`.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub origin: Vec<f64>,
    pub jac: DMatrix<f64>,
    pub det: f64,
    pub inv: DMatrix<f64>,
    pub inv_t: DMatrix<f64>,
    pub measure: f64,
}

impl CellGeometry {
    pub fn from_vertices(verts: &[&[f64]]) -> Result<Self> {
        let n = verts.len() - 1;
        let origin = verts[0].to_vec();
        let jac = DMatrix::from_fn(n, n, |i, j| verts[j + 1][i] - verts[0][i]);
        let det = jac.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(FeecError::DegenerateMesh("zero-volume cell".into()));
        }
        let inv = jac.clone().try_inverse().ok_or(FeecError::SingularJacobian)?;
        let inv_t = inv.transpose();
        let measure = det.abs() / factorial(n) as f64;
        Ok(Self { origin, jac, det, inv, inv_t, measure })
    }

    /// Physical point of reference coordinates `xi`.
    pub fn map(&self, xi: &[f64], out: &mut [f64]) {
        let n = self.origin.len();
        for i in 0..n {
            let mut acc = self.origin[i];
            for j in 0..n {
                acc += self.jac[(i, j)] * xi[j];
            }
            out[i] = acc;
        }
    }

    /// Reference coordinates of physical point `x`.
    pub fn inverse_map(&self, x: &[f64]) -> Vec<f64> {
        let n = self.origin.len();
        let d = DVector::from_fn(n, |i, _| x[i] - self.origin[i]);
        (&self.inv * d).iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    n: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    /// `entities[d]`: flat sorted vertex tuples of all d-simplices (stride d+1).
    entities: Vec<Vec<usize>>,
    /// `cell_entities[d]`: per cell, global ids of its local d-subsimplices
    /// (local subsets of `0..=n` in lexicographic order).
    cell_entities: Vec<Vec<usize>>,
    boundary: Vec<Vec<bool>>,
    geometry: Vec<CellGeometry>,
    h: f64,
}

impl SimplicialMesh {
    /// Uniform `m^n` grid split into simplices, with interior nodes randomly
    /// displaced by up to `perturb / m` in each coordinate.
    pub fn build_box(n: usize, m: usize, perturb: f64, seed: u64) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(FeecError::InvalidArgument(format!("dimension must be 2 or 3, got {n}")));
        }
        if m == 0 {
            return Err(FeecError::InvalidArgument("m must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&perturb) {
            return Err(FeecError::InvalidArgument(format!("perturb must lie in [0, 0.5), got {perturb}")));
        }
        let side = m + 1;
        let nverts = side.pow(n as u32);
        let vid = |idx: &[usize]| -> usize {
            let mut id = 0;
            for d in (0..n).rev() {
                id = id * side + idx[d];
            }
            id
        };
        let mut coords = Vec::with_capacity(nverts * n);
        let mut grid_index = Vec::with_capacity(nverts);
        for id in 0..nverts {
            let mut rem = id;
            let mut idx = vec![0; n];
            for slot in idx.iter_mut() {
                *slot = rem % side;
                rem /= side;
            }
            for &i in &idx {
                coords.push(i as f64 / m as f64);
            }
            grid_index.push(idx);
        }

        // Freudenthal/Kuhn split: one simplex per axis permutation, walking
        // from the lower corner to the upper corner of each cube.
        let perms: Vec<Vec<usize>> = if n == 2 {
            vec![vec![0, 1], vec![1, 0]]
        } else {
            vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]
        };
        let mut cells = Vec::with_capacity(m.pow(n as u32) * perms.len() * (n + 1));
        for cube in 0..m.pow(n as u32) {
            let mut rem = cube;
            let mut base = vec![0; n];
            for slot in base.iter_mut() {
                *slot = rem % m;
                rem /= m;
            }
            for p in &perms {
                let mut cur = base.clone();
                let mut simplex = vec![vid(&cur)];
                for &axis in p {
                    cur[axis] += 1;
                    simplex.push(vid(&cur));
                }
                simplex.sort_unstable();
                cells.extend(simplex);
            }
        }

        if perturb > 0.0 {
            perturb_interior(n, m, perturb, seed, &grid_index, &mut coords, &cells)?;
        }
        Self::from_cells(n, coords, cells)
    }

    /// Build the entity tables for a given vertex/cell list. Cell vertex lists
    /// are sorted on entry.
    pub fn from_cells(n: usize, coords: Vec<f64>, mut cells: Vec<usize>) -> Result<Self> {
        let stride = n + 1;
        if !cells.len().is_multiple_of(stride) || !coords.len().is_multiple_of(n) {
            return Err(FeecError::InvalidArgument("ragged vertex or cell array".into()));
        }
        let nverts = coords.len() / n;
        for c in cells.chunks_mut(stride) {
            c.sort_unstable();
            if c.iter().any(|&v| v >= nverts) {
                return Err(FeecError::InvalidArgument("cell references a missing vertex".into()));
            }
        }
        let ncells = cells.len() / stride;
        let mut entities = Vec::with_capacity(n + 1);
        let mut cell_entities = Vec::with_capacity(n + 1);
        for d in 0..=n {
            let local = subsets(n + 1, d + 1);
            let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
            let mut flat = Vec::new();
            if d == 0 {
                // Vertex entities keep their vertex numbers.
                for v in 0..nverts {
                    lookup.insert(vec![v], v);
                    flat.push(v);
                }
            }
            let mut per_cell = Vec::with_capacity(ncells * local.len());
            for c in 0..ncells {
                let cv = &cells[c * stride..(c + 1) * stride];
                for sub in &local {
                    let key: Vec<usize> = sub.iter().map(|&i| cv[i]).collect();
                    let next = lookup.len();
                    let id = *lookup.entry(key.clone()).or_insert_with(|| {
                        flat.extend_from_slice(&key);
                        next
                    });
                    per_cell.push(id);
                }
            }
            entities.push(flat);
            cell_entities.push(per_cell);
        }

        let on_face = |verts: &[usize]| -> bool {
            (0..n).any(|axis| {
                [0.0, 1.0]
                    .iter()
                    .any(|&b| verts.iter().all(|&v| coords[v * n + axis] == b))
            })
        };
        let boundary = (0..=n)
            .map(|d| entities[d].chunks(d + 1).map(&on_face).collect())
            .collect();

        let mut geometry = Vec::with_capacity(ncells);
        let mut h: f64 = 0.0;
        for c in 0..ncells {
            let cv = &cells[c * stride..(c + 1) * stride];
            let verts: Vec<&[f64]> = cv.iter().map(|&v| &coords[v * n..(v + 1) * n]).collect();
            geometry.push(CellGeometry::from_vertices(&verts)?);
            for a in 0..stride {
                for b in a + 1..stride {
                    let dist: f64 = (0..n).map(|i| (verts[a][i] - verts[b][i]).powi(2)).sum::<f64>().sqrt();
                    h = h.max(dist);
                }
            }
        }
        Ok(Self { n, coords, cells, entities, cell_entities, boundary, geometry, h })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.n + 1)
    }

    pub fn num_entities(&self, d: usize) -> usize {
        self.entities[d].len() / (d + 1)
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.n..(v + 1) * self.n]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * (self.n + 1)..(c + 1) * (self.n + 1)]
    }

    pub fn entity(&self, d: usize, id: usize) -> &[usize] {
        &self.entities[d][id * (d + 1)..(id + 1) * (d + 1)]
    }

    /// Global ids of the d-subsimplices of `cell`, in local lexicographic order.
    pub fn cell_entities(&self, d: usize, cell: usize) -> &[usize] {
        let per = binomial(self.n + 1, d + 1);
        &self.cell_entities[d][cell * per..(cell + 1) * per]
    }

    pub fn is_boundary(&self, d: usize, id: usize) -> bool {
        self.boundary[d][id]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_geometry(&self, cell: usize) -> Result<&CellGeometry> {
        self.geometry
            .get(cell)
            .ok_or(FeecError::OutOfBounds { index: cell, len: self.num_cells() })
    }

    pub(crate) fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    /// Number of cells sharing each (n-1)-entity.
    pub fn facet_cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_entities(self.n - 1)];
        for &f in &self.cell_entities[self.n - 1] {
            counts[f] += 1;
        }
        counts
    }

    /// Locate the cell containing `x`, returning it with reference coordinates.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let tol = 1e-12;
        for (c, g) in self.geometry.iter().enumerate() {
            let xi = g.inverse_map(x);
            let sum: f64 = xi.iter().sum();
            if xi.iter().all(|&v| v >= -tol) && sum <= 1.0 + tol {
                return Some((c, xi));
            }
        }
        None
    }

    /// Same mesh with vertex `v` renamed to `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let nv = self.num_vertices();
        if perm.len() != nv {
            return Err(FeecError::InvalidArgument("permutation length mismatch".into()));
        }
        let mut coords = vec![0.0; self.coords.len()];
        for v in 0..nv {
            coords[perm[v] * self.n..(perm[v] + 1) * self.n].copy_from_slice(self.vertex(v));
        }
        let cells = self.cells.iter().map(|&v| perm[v]).collect();
        Self::from_cells(self.n, coords, cells)
    }

    /// Debug dump: one vertex per line, then one cell per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n, self.num_vertices(), self.num_cells())?;
        for v in 0..self.num_vertices() {
            let line: Vec<String> = self.vertex(v).iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for c in 0..self.num_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

fn signed_volume(n: usize, coords: &[f64], cell: &[usize]) -> f64 {
    let jac = DMatrix::from_fn(n, n, |i, j| coords[cell[j + 1] * n + i] - coords[cell[0] * n + i]);
    jac.determinant()
}

fn perturb_interior(
    n: usize,
    m: usize,
    perturb: f64,
    seed: u64,
    grid_index: &[Vec<usize>],
    coords: &mut [f64],
    cells: &[usize],
) -> Result<()> {
    let stride = n + 1;
    let amp = perturb / m as f64;
    let interior: Vec<bool> = grid_index.iter().map(|idx| idx.iter().all(|&i| i > 0 && i < m)).collect();
    let reference_sign: Vec<f64> = cells
        .chunks(stride)
        .map(|c| signed_volume(n, coords, c).signum())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = coords.to_vec();
    let draw = |v: usize, coords: &mut [f64], rng: &mut ChaCha8Rng| {
        for i in 0..n {
            coords[v * n + i] = base[v * n + i] + rng.random_range(-amp..=amp);
        }
    };
    for v in 0..grid_index.len() {
        if interior[v] {
            draw(v, coords, &mut rng);
        }
    }
    let min_vol = 1e-3 * (1.0 / m as f64).powi(n as i32) / factorial(n) as f64;
    for _ in 0..MAX_RESAMPLE_ROUNDS {
        let mut offenders = Vec::new();
        for (c, cv) in cells.chunks(stride).enumerate() {
            let vol = signed_volume(n, coords, cv) * reference_sign[c];
            if vol <= min_vol * factorial(n) as f64 {
                offenders.extend(cv.iter().copied().filter(|&v| interior[v]));
            }
        }
        if offenders.is_empty() {
            return Ok(());
        }
        offenders.sort_unstable();
        offenders.dedup();
        for v in offenders {
            draw(v, coords, &mut rng);
        }
    }
    Err(FeecError::DegenerateMesh(format!(
        "could not obtain positive cell volumes after {MAX_RESAMPLE_ROUNDS} resampling rounds"
    )))
}
