//! Clustering of nodal records modulo the torus symmetries.
//!
//! On a homogeneous torus every solution drags a continuum of translates with
//! it, and solutions come in `±u` pairs, so raw solution counts are
//! meaningless; the multiplicity count is of equivalence classes under
//! lattice translation and global sign flip. Two records are equivalent when
//! their energies agree within `energy_tol` and, after translating one by the
//! lattice-rounded vector that aligns the positive centers of mass (also
//! trying the sign-swapped alignment), the relative eps-norm distance of the
//! fields falls below `shape_tol`.

use crate::error::{Error, Result};
use crate::field::{norm_eps, Field};
use crate::lab::archive::SolutionArchive;
use crate::manifold::TorusManifold;
use std::sync::Arc;

/// Clusters the nodal records in `archive`, writing each one's cluster id,
/// and returns the number of equivalence classes.
pub fn cluster_solutions(
    archive: &mut SolutionArchive,
    energy_tol: f64,
    shape_tol: f64,
) -> Result<usize> {
    let eps = match archive.records.first() {
        Some(r) => r.eps,
        None => {
            archive.cluster_count = Some(0);
            return Ok(0);
        }
    };
    if archive.records.iter().any(|r| r.eps != eps) {
        return Err(Error::MixedEps);
    }
    let manifold = archive.config.build_manifold()?;
    let params = archive.config.eps_params(eps)?;

    let nodal: Vec<usize> = (0..archive.records.len())
        .filter(|&i| archive.records[i].nodal)
        .collect();
    let fields: Vec<Field> = nodal
        .iter()
        .map(|&i| archive.snapshot_field(archive.records[i].snapshot, &manifold))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = fields.iter().map(|f| norm_eps(f, &params)).collect();

    // Union-find over the nodal records.
    let mut parent: Vec<usize> = (0..nodal.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    for a in 0..nodal.len() {
        for b in (a + 1)..nodal.len() {
            if find(&mut parent, a) == find(&mut parent, b) {
                continue;
            }
            let ra = &archive.records[nodal[a]];
            let rb = &archive.records[nodal[b]];
            let j_gap = (ra.energy.total - rb.energy.total).abs();
            if j_gap > energy_tol * ra.energy.total.abs().max(1.0) {
                continue;
            }
            let (Some(cma), Some(cmb)) = (&ra.cm, &rb.cm) else {
                continue;
            };
            let scale = norms[a].max(norms[b]);
            if scale <= 0.0 {
                continue;
            }
            let mut equivalent = false;
            // Direct alignment and the sign-swapped one (centers exchanged):
            // translate b so its (possibly sign-swapped) positive center
            // lands on a's positive center.
            for (source, flip) in [(&cmb.c_plus, false), (&cmb.c_minus, true)] {
                let cells = lattice_cells(&manifold, cma.c_plus.coords(), source.coords());
                for shifted in nearby_shifts(&manifold, &cells) {
                    let mut moved = translate_by_cells(&fields[b], &shifted);
                    if flip {
                        moved.scale(-1.0);
                    }
                    let dist = norm_eps(&(&fields[a] - &moved), &params);
                    if dist <= shape_tol * scale {
                        equivalent = true;
                        break;
                    }
                }
                if equivalent {
                    break;
                }
            }
            if equivalent {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }

    // Stable cluster ids in first-appearance order.
    let mut ids: Vec<Option<usize>> = vec![None; nodal.len()];
    let mut next = 0usize;
    for i in 0..nodal.len() {
        let root = find(&mut parent, i);
        let id = match ids[root] {
            Some(id) => id,
            None => {
                ids[root] = Some(next);
                next += 1;
                next - 1
            }
        };
        archive.records[nodal[i]].cluster = Some(id);
    }
    archive.cluster_count = Some(next);
    Ok(next)
}

/// Integer cell counts of the wrapped vector moving `from` onto `to`.
fn lattice_cells(manifold: &Arc<TorusManifold>, to: &[f64], from: &[f64]) -> Vec<i64> {
    (0..manifold.dim())
        .map(|axis| {
            let length = manifold.lengths()[axis];
            let mut d = (to[axis] - from[axis]).rem_euclid(length);
            if d > length / 2.0 {
                d -= length;
            }
            (d / manifold.spacings()[axis]).round() as i64
        })
        .collect()
}

/// The rounded shift and its one-cell neighbors, to absorb sub-cell center
/// refinement.
fn nearby_shifts(manifold: &Arc<TorusManifold>, cells: &[i64]) -> Vec<Vec<i64>> {
    let mut shifts = vec![cells.to_vec()];
    for axis in 0..manifold.dim() {
        for delta in [-1i64, 1] {
            let mut s = cells.to_vec();
            s[axis] += delta;
            shifts.push(s);
        }
    }
    shifts
}

/// Translates a field by whole cells along each axis; exact (a permutation of
/// the values).
pub fn translate_by_cells(field: &Field, cells: &[i64]) -> Field {
    let m = field.manifold().clone();
    let dim = m.dim();
    let mut strides = vec![1usize; dim];
    for i in (0..dim.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * m.grid_sizes()[i + 1];
    }
    let mut out = vec![0.0; field.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        // Value transported to `idx` comes from `idx - cells`.
        let mut src = 0usize;
        for axis in 0..dim {
            let n = m.grid_sizes()[axis] as i64;
            let j = ((idx / strides[axis]) % m.grid_sizes()[axis]) as i64;
            let shifted = (j - cells[axis]).rem_euclid(n) as usize;
            src += shifted * strides[axis];
        }
        *slot = field[src];
    }
    Field::from_parts(m, out)
}
