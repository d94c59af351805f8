//! Monitored region, its planar grid of cells, and the reader-to-tag links.
//!
//! All lengths are meters. The grid is a rectangle in an arbitrary plane of
//! 3D space; cell centers keep full 3D coordinates so link membership can be
//! evaluated against the true reader and tag positions.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::link_budget::{Material, MaterialProfile};

/// Largest |cos| between the input axes that `build_grid` will straighten out.
const ORTHO_INPUT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, other: Point3, t: f64) -> Point3 {
        self + (other - self) * t
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.z)
    }
}

/// Planar rectangular grid of square cells, indexed row-major:
/// `j = row * n_u + col`, where `col` runs along `axis_u` and `row` along `axis_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Point3,
    axis_u: Point3,
    axis_v: Point3,
    n_u: usize,
    n_v: usize,
    cell_size: f64,
}

pub fn build_grid(
    origin: Point3,
    axis_u: Point3,
    axis_v: Point3,
    n_u: usize,
    n_v: usize,
    cell_size: f64,
) -> Result<Grid> {
    if n_u == 0 || n_v == 0 {
        return Err(Error::arg(format!("grid cell counts must be >= 1, got {n_u}x{n_v}")));
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::arg(format!("cell size must be positive, got {cell_size}")));
    }
    if !origin.is_finite() || !axis_u.is_finite() || !axis_v.is_finite() {
        return Err(Error::Geometry("grid origin and axes must be finite".into()));
    }
    let (nu, nv) = (axis_u.norm(), axis_v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Geometry("grid axis vectors must be nonzero".into()));
    }
    let u = axis_u * (1.0 / nu);
    let v = axis_v * (1.0 / nv);
    let cos = u.dot(v);
    if cos.abs() > ORTHO_INPUT_TOL {
        return Err(Error::Geometry(format!(
            "grid axes are not orthogonal (cos = {cos:.3e})"
        )));
    }
    // Gram-Schmidt the residual away.
    let v = v - u * cos;
    let v = v * (1.0 / v.norm());
    Ok(Grid {
        origin,
        axis_u: u,
        axis_v: v,
        n_u,
        n_v,
        cell_size,
    })
}

impl Grid {
    pub fn origin(&self) -> Point3 {
        self.origin
    }
    pub fn axis_u(&self) -> Point3 {
        self.axis_u
    }
    pub fn axis_v(&self) -> Point3 {
        self.axis_v
    }
    pub fn n_u(&self) -> usize {
        self.n_u
    }
    pub fn n_v(&self) -> usize {
        self.n_v
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(col, row)` of cell `j`.
    pub fn col_row(&self, j: usize) -> Result<(usize, usize)> {
        if j >= self.len() {
            return Err(Error::Index {
                index: j,
                len: self.len(),
            });
        }
        Ok((j % self.n_u, j / self.n_u))
    }

    pub fn index_of(&self, col: usize, row: usize) -> Option<usize> {
        (col < self.n_u && row < self.n_v).then_some(row * self.n_u + col)
    }

    pub fn cell_center(&self, j: usize) -> Result<Point3> {
        let (col, row) = self.col_row(j)?;
        Ok(self.center_unchecked(col, row))
    }

    fn center_unchecked(&self, col: usize, row: usize) -> Point3 {
        let s = self.cell_size;
        self.origin + self.axis_u * ((col as f64 + 0.5) * s) + self.axis_v * ((row as f64 + 0.5) * s)
    }

    /// All cell centers in index order.
    pub fn centers(&self) -> Vec<Point3> {
        (0..self.n_v)
            .flat_map(|row| (0..self.n_u).map(move |col| (col, row)))
            .map(|(col, row)| self.center_unchecked(col, row))
            .collect()
    }

    /// In-plane coordinates `(u, v)` in meters of the orthogonal projection of `p`.
    pub fn project(&self, p: Point3) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(self.axis_u), d.dot(self.axis_v))
    }

    /// Cell containing the projection of `p`, if it falls inside the grid.
    pub fn locate(&self, p: Point3) -> Option<usize> {
        let (u, v) = self.project(p);
        let col = (u / self.cell_size).floor();
        let row = (v / self.cell_size).floor();
        if col < 0.0 || row < 0.0 {
            return None;
        }
        self.index_of(col as usize, row as usize)
    }

    /// Stable-within-process fingerprint of the grid layout.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in [self.origin, self.axis_u, self.axis_v] {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
            p.z.to_bits().hash(&mut h);
        }
        self.n_u.hash(&mut h);
        self.n_v.hash(&mut h);
        self.cell_size.to_bits().hash(&mut h);
        h.finish()
    }
}

/// Free-function form of [`Grid::cell_center`].
pub fn cell_center(grid: &Grid, j: usize) -> Result<Point3> {
    grid.cell_center(j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub link_id: usize,
    pub reader_pos: Point3,
    pub tag_pos: Point3,
    pub length_m: f64,
}

impl Link {
    pub fn new(link_id: usize, reader_pos: Point3, tag_pos: Point3) -> Result<Self> {
        if !reader_pos.is_finite() || !tag_pos.is_finite() {
            return Err(Error::Geometry(format!("link {link_id} has non-finite endpoints")));
        }
        let length_m = reader_pos.distance(tag_pos);
        if length_m <= 0.0 {
            return Err(Error::Geometry(format!(
                "link {link_id}: tag coincides with reader at {reader_pos}"
            )));
        }
        Ok(Self {
            link_id,
            reader_pos,
            tag_pos,
            length_m,
        })
    }

    pub fn midpoint(&self) -> Point3 {
        self.reader_pos.lerp(self.tag_pos, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    pub id: String,
    pub pos: Point3,
    pub material: MaterialProfile,
}

impl Tag {
    pub fn new(id: impl Into<String>, pos: Point3) -> Self {
        Self {
            id: id.into(),
            pos,
            material: Material::None.into(),
        }
    }

    pub fn with_material(mut self, material: impl Into<MaterialProfile>) -> Self {
        self.material = material.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    reader_pos: Point3,
    tags: Vec<Tag>,
    grid: Grid,
}

impl Scene {
    pub fn new(reader_pos: Point3, tags: Vec<Tag>, grid: Grid) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::arg("scene needs at least one tag"));
        }
        if !reader_pos.is_finite() {
            return Err(Error::Geometry("reader position must be finite".into()));
        }
        let mut seen = HashSet::new();
        for t in &tags {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::arg(format!("duplicate tag id {:?}", t.id)));
            }
            if !t.pos.is_finite() {
                return Err(Error::Geometry(format!("tag {:?} position must be finite", t.id)));
            }
        }
        Ok(Self {
            reader_pos,
            tags,
            grid,
        })
    }

    pub fn reader_pos(&self) -> Point3 {
        self.reader_pos
    }
    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tag_ids(&self) -> Vec<&str> {
        self.tags.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn tag_index(&self, id: &str) -> Option<usize> {
        self.tags.iter().position(|t| t.id == id)
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }
}

/// One monostatic link per tag, in tag order.
pub fn make_links(scene: &Scene) -> Result<Vec<Link>> {
    scene
        .tags
        .iter()
        .enumerate()
        .map(|(i, t)| Link::new(i, scene.reader_pos, t.pos))
        .collect()
}
