//! Ellipsoid weight model.
//!
//! Cell `j` belongs to link `i` when the center's distances to the reader and
//! to the tag sum to strictly less than `d_i + β`. Members carry weight
//! `1/√d_i`; everything else is zero and is not stored.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Grid, Link, Point3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    /// Ellipsoid excess path length, meters.
    pub beta_m: f64,
}

impl WeightParams {
    pub fn new(beta_m: f64) -> Result<Self> {
        if !(beta_m > 0.0) || !beta_m.is_finite() {
            return Err(Error::arg(format!("beta must be positive, got {beta_m}")));
        }
        Ok(Self { beta_m })
    }
}

impl Default for WeightParams {
    fn default() -> Self {
        Self { beta_m: 0.1 }
    }
}

pub fn is_member(link: &Link, cell: Point3, params: &WeightParams) -> bool {
    let excess = cell.distance(link.reader_pos) + cell.distance(link.tag_pos);
    excess < link.length_m + params.beta_m
}

pub fn link_weight(link: &Link, cell: Point3, params: &WeightParams) -> f64 {
    if is_member(link, cell, params) {
        1.0 / link.length_m.sqrt()
    } else {
        0.0
    }
}

/// Sparse `Q × N` weight matrix. Every row holds a single distinct value, so
/// each row is stored as its member cell indices plus that value.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    members: Vec<Vec<usize>>,
    row_values: Vec<f64>,
    link_ids: Vec<usize>,
    grid_fingerprint: u64,
}

pub fn build_weight_matrix(grid: &Grid, links: &[Link], params: &WeightParams) -> Result<WeightMatrix> {
    if links.is_empty() {
        return Err(Error::arg("weight matrix needs at least one link"));
    }
    WeightParams::new(params.beta_m)?;
    let centers = grid.centers();
    let members = links
        .iter()
        .map(|link| {
            centers
                .iter()
                .enumerate()
                .filter(|(_, c)| is_member(link, **c, params))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(WeightMatrix {
        n: grid.len(),
        members,
        row_values: links.iter().map(|l| 1.0 / l.length_m.sqrt()).collect(),
        link_ids: links.iter().map(|l| l.link_id).collect(),
        grid_fingerprint: grid.fingerprint(),
    })
}

/// Per-cell membership flags for one link.
pub fn link_membership_field(link: &Link, grid: &Grid, params: &WeightParams) -> Vec<bool> {
    grid.centers().into_iter().map(|c| is_member(link, c, params)).collect()
}

impl WeightMatrix {
    /// Number of links (rows).
    pub fn q(&self) -> usize {
        self.members.len()
    }

    /// Number of cells (columns).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn link_ids(&self) -> &[usize] {
        &self.link_ids
    }

    pub fn grid_fingerprint(&self) -> u64 {
        self.grid_fingerprint
    }

    /// Sorted member cells of row `i`.
    pub fn row_members(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    /// The value shared by every stored entry of row `i`.
    pub fn row_value(&self, i: usize) -> f64 {
        self.row_values[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.members.get(i) {
            Some(row) if row.binary_search(&j).is_ok() => self.row_values[i],
            _ => 0.0,
        }
    }

    /// Nonzero entries as `(i, j, w)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.members
            .iter()
            .enumerate()
            .flat_map(move |(i, row)| row.iter().map(move |&j| (i, j, self.row_values[i])))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.q(), self.n);
        for (i, j, w) in self.triplets() {
            m[(i, j)] = w;
        }
        m
    }

    /// `W·x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::arg(format!("expected {} cells, got {}", self.n, x.len())));
        }
        Ok(self
            .members
            .iter()
            .zip(&self.row_values)
            .map(|(row, w)| w * row.iter().map(|&j| x[j]).sum::<f64>())
            .collect())
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<WeightMatrix> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.q()) {
            return Err(Error::arg(format!("row {bad} out of range for {} links", self.q())));
        }
        if rows.is_empty() {
            return Err(Error::arg("cannot select zero rows"));
        }
        Ok(WeightMatrix {
            n: self.n,
            members: rows.iter().map(|&i| self.members[i].clone()).collect(),
            row_values: rows.iter().map(|&i| self.row_values[i]).collect(),
            link_ids: rows.iter().map(|&i| self.link_ids[i]).collect(),
            grid_fingerprint: self.grid_fingerprint,
        })
    }

    /// Writes `i,j,w` triplets with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,w")?;
        for (i, j, w) in self.triplets() {
            writeln!(out, "{i},{j},{w}")?;
        }
        Ok(())
    }
}
