//! Discrete flat tori.
//!
//! The base manifold is the flat n-torus `T = [0,L_1) x ... x [0,L_n)` with
//! n in {1,2,3}, discretized by a uniform cell-centered lattice: node `j`
//! along axis `i` sits at `(j + 1/2) h_i` with `h_i = L_i / N_i`. On this
//! lattice the rectangle rule integrates smooth periodic functions with
//! spectral accuracy and sums the quadrature weights to the exact volume,
//! the geodesic distance is the wrapped Euclidean distance, and the
//! exponential map is plain translation modulo the periods. Flatness keeps
//! the scalar curvature identically zero; variable-curvature extensions
//! enter only through the constant-coefficient hook in [`crate::field::EpsParams`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the torus, one coordinate per axis, kept in the fundamental
/// domain `[0, L_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Uniform cell-centered grid on a flat torus.
///
/// Immutable after construction; wrap it in an [`Arc`] and share it freely
/// across concurrent flow runs.
#[derive(Debug)]
pub struct TorusManifold {
    lengths: Vec<f64>,
    grid_sizes: Vec<usize>,
    spacings: Vec<f64>,
    strides: Vec<usize>,
    node_count: usize,
    quad_weight: f64,
    volume: f64,
    diameter: f64,
    injectivity_radius: f64,
    curvature: f64,
    /// Per axis, per node: linear indices of the [previous, next] neighbor.
    neighbors: Vec<Vec<[u32; 2]>>,
}

impl PartialEq for TorusManifold {
    fn eq(&self, other: &Self) -> bool {
        self.lengths == other.lengths && self.grid_sizes == other.grid_sizes
    }
}

impl TorusManifold {
    /// Builds the flat torus with the given periods and per-axis node counts.
    ///
    /// Requires 1 <= n <= 3, positive finite periods and at least 8 nodes per
    /// axis.
    pub fn new(lengths: Vec<f64>, grid_sizes: Vec<usize>) -> Result<Arc<Self>> {
        let dim = lengths.len();
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidManifold(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if grid_sizes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: grid_sizes.len(),
            });
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidManifold(format!(
                "periods must be positive and finite, got {lengths:?}"
            )));
        }
        if grid_sizes.iter().any(|&n| n < 8) {
            return Err(Error::InvalidManifold(format!(
                "need at least 8 nodes per axis, got {grid_sizes:?}"
            )));
        }
        let node_count: usize = grid_sizes.iter().product();
        if node_count > u32::MAX as usize {
            return Err(Error::InvalidManifold(format!(
                "grid too large: {node_count} nodes"
            )));
        }

        let spacings: Vec<f64> = lengths
            .iter()
            .zip(&grid_sizes)
            .map(|(&l, &n)| l / n as f64)
            .collect();
        // Row-major strides, last axis fastest.
        let mut strides = vec![1usize; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * grid_sizes[i + 1];
        }
        let quad_weight = spacings.iter().product();
        let volume = lengths.iter().product();
        let diameter = lengths.iter().map(|&l| (l / 2.0) * (l / 2.0)).sum::<f64>().sqrt();
        let injectivity_radius = lengths.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;

        let mut neighbors = Vec::with_capacity(dim);
        for axis in 0..dim {
            let n_axis = grid_sizes[axis];
            let stride = strides[axis];
            let mut table = vec![[0u32; 2]; node_count];
            for (idx, entry) in table.iter_mut().enumerate() {
                let j = (idx / stride) % n_axis;
                let base = idx - j * stride;
                let prev = base + ((j + n_axis - 1) % n_axis) * stride;
                let next = base + ((j + 1) % n_axis) * stride;
                *entry = [prev as u32, next as u32];
            }
            neighbors.push(table);
        }

        Ok(Arc::new(TorusManifold {
            lengths,
            grid_sizes,
            spacings,
            strides,
            node_count,
            quad_weight,
            volume,
            diameter,
            injectivity_radius,
            curvature: 0.0,
            neighbors,
        }))
    }

    /// Convenience constructor for the circle of circumference `length`.
    pub fn circle(length: f64, nodes: usize) -> Result<Arc<Self>> {
        Self::new(vec![length], vec![nodes])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn grid_sizes(&self) -> &[usize] {
        &self.grid_sizes
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacings.iter().cloned().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Quadrature weight of one cell, `prod_i h_i`.
    pub fn quad_weight(&self) -> f64 {
        self.quad_weight
    }

    /// Total volume `prod_i L_i`; the rectangle rule reproduces it exactly.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Diameter `R_0 = sqrt(sum (L_i/2)^2)`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Injectivity radius `r_0 = min_i L_i / 2`.
    pub fn injectivity_radius(&self) -> f64 {
        self.injectivity_radius
    }

    /// Scalar curvature; identically zero on flat tori.
    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub(crate) fn neighbor_table(&self) -> &[Vec<[u32; 2]>] {
        &self.neighbors
    }

    /// Cell-centered coordinates of a node.
    pub fn node_point(&self, idx: usize) -> Point {
        debug_assert!(idx < self.node_count);
        let coords = (0..self.dim())
            .map(|axis| {
                let j = (idx / self.strides[axis]) % self.grid_sizes[axis];
                (j as f64 + 0.5) * self.spacings[axis]
            })
            .collect();
        Point(coords)
    }

    /// Linear index of the node whose cell contains `p`.
    pub fn nearest_node(&self, p: &Point) -> Result<usize> {
        self.check_dim(p)?;
        let mut idx = 0usize;
        for axis in 0..self.dim() {
            let x = wrap(p.0[axis], self.lengths[axis]);
            let mut j = (x / self.spacings[axis]).floor() as isize;
            let n = self.grid_sizes[axis] as isize;
            j = j.rem_euclid(n);
            idx += (j as usize) * self.strides[axis];
        }
        Ok(idx)
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }

    /// Geodesic distance: per-axis wrapped difference
    /// `delta_i = min(|x_i - y_i|, L_i - |x_i - y_i|)`, combined Euclidean.
    pub fn dist(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let mut sum = 0.0;
        for axis in 0..self.dim() {
            let d = wrapped_abs_diff(x.0[axis], y.0[axis], self.lengths[axis]);
            sum += d * d;
        }
        Ok(sum.sqrt())
    }

    /// Distance between two grid nodes.
    pub fn dist_nodes(&self, i: usize, j: usize) -> f64 {
        let mut sum = 0.0;
        for axis in 0..self.dim() {
            let n = self.grid_sizes[axis];
            let a = (i / self.strides[axis]) % n;
            let b = (j / self.strides[axis]) % n;
            let k = a.abs_diff(b).min(n - a.abs_diff(b));
            let d = k as f64 * self.spacings[axis];
            sum += d * d;
        }
        sum.sqrt()
    }

    /// Exponential map: `exp_x(v) = x + v` reduced modulo the periods.
    pub fn exp_map(&self, x: &Point, v: &[f64]) -> Result<Point> {
        self.check_dim(x)?;
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let coords = (0..self.dim())
            .map(|axis| wrap(x.0[axis] + v[axis], self.lengths[axis]))
            .collect();
        Ok(Point(coords))
    }

    /// Inverse of the exponential chart at `x`: the wrapped signed difference
    /// vector, of norm `dist(x, y)`. Only defined inside the injectivity
    /// radius.
    pub fn log_map(&self, x: &Point, y: &Point) -> Result<Vec<f64>> {
        let dist = self.dist(x, y)?;
        if dist >= self.injectivity_radius {
            return Err(Error::InverseOutsideInjectivityRadius {
                dist,
                injectivity_radius: self.injectivity_radius,
            });
        }
        Ok((0..self.dim())
            .map(|axis| wrapped_signed_diff(y.0[axis], x.0[axis], self.lengths[axis]))
            .collect())
    }

    /// Greedy maximal set of grid nodes with pairwise distance >= 2 eps, so
    /// the open eps-balls around them are disjoint. Maximality makes the open
    /// 2 eps-balls cover every grid node. Always returns at least one node.
    pub fn separated_net(&self, eps: f64) -> Vec<usize> {
        assert!(eps > 0.0, "net radius must be positive");
        let mut centers: Vec<usize> = Vec::new();
        for idx in 0..self.node_count {
            if centers
                .iter()
                .all(|&c| self.dist_nodes(c, idx) >= 2.0 * eps)
            {
                centers.push(idx);
            }
        }
        centers
    }

    /// Largest number of 3 eps-balls around `centers` that share a grid node.
    pub fn net_overlap_constant(&self, centers: &[usize], eps: f64) -> usize {
        (0..self.node_count)
            .map(|idx| {
                centers
                    .iter()
                    .filter(|&&c| self.dist_nodes(c, idx) < 3.0 * eps)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    /// Visits every node with `dist_nodes(center, node) < r`, passing the
    /// node index and its distance from the center. Each node is visited at
    /// most once.
    pub fn visit_ball(&self, center: usize, r: f64, mut f: impl FnMut(usize, f64)) {
        let dim = self.dim();
        // Offset ranges per axis, clipped so each node appears once.
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for axis in 0..dim {
            let n = self.grid_sizes[axis] as isize;
            let b = (r / self.spacings[axis]).floor() as isize;
            lo[axis] = (-b).max(-(n / 2));
            hi[axis] = b.min((n - 1) / 2);
        }
        let mut offsets = lo;
        loop {
            let mut sum = 0.0;
            let mut idx = 0usize;
            for axis in 0..dim {
                let n = self.grid_sizes[axis] as isize;
                let c = ((center / self.strides[axis]) % self.grid_sizes[axis]) as isize;
                let j = (c + offsets[axis]).rem_euclid(n) as usize;
                idx += j * self.strides[axis];
                let d = offsets[axis].unsigned_abs() as f64 * self.spacings[axis];
                sum += d * d;
            }
            let dist = sum.sqrt();
            if dist < r {
                f(idx, dist);
            }
            // Advance the multi-offset, last axis fastest.
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                offsets[axis] += 1;
                if offsets[axis] <= hi[axis] {
                    break;
                }
                offsets[axis] = lo[axis];
            }
        }
    }
}

/// Reduce `x` into `[0, length)`.
pub(crate) fn wrap(x: f64, length: f64) -> f64 {
    let r = x.rem_euclid(length);
    if r == length {
        0.0
    } else {
        r
    }
}

fn wrapped_abs_diff(a: f64, b: f64, length: f64) -> f64 {
    let d = (wrap(a, length) - wrap(b, length)).abs();
    d.min(length - d)
}

/// Signed representative of `a - b` in `(-length/2, length/2]`.
fn wrapped_signed_diff(a: f64, b: f64, length: f64) -> f64 {
    let mut d = wrap(a, length) - wrap(b, length);
    if d > length / 2.0 {
        d -= length;
    } else if d <= -length / 2.0 {
        d += length;
    }
    d
}
