//! Weighted projection of a volume onto albedo/depth maps and the
//! selective back-projection that rebuilds a single-layer volume.
//!
//! Per column the weights are `w_i = u_i^p / sum_j u_j^p` over the strictly
//! positive entries, so higher albedo contributes greater weight. A stored
//! depth of 0 is the EMPTY sentinel; value k >= 1 means voxel layer k - 1,
//! which keeps "no surface" distinct from a surface on the first layer.

use crate::error::{Error, Result};
use crate::grid::{AlbedoMap, DepthMap, SceneGrid, VoxelAlbedo};

/// Entries this far below the volume maximum (relative 1e-12) count as
/// zero: shrinkage produces exact zeros but the FFT-coupled updates can
/// leave dust.
const RELATIVE_ZERO: f64 = 1e-12;

/// Collapse a volume into a weighted albedo map and a depth map.
///
/// Negative entries are excluded from the weighting entirely; with even
/// powers they would otherwise dominate the weights.
pub fn project(u: &VoxelAlbedo, p: u32) -> Result<(AlbedoMap, DepthMap)> {
    if p < 1 {
        return Err(Error::invalid(format!("projection power must be >= 1, got {p}")));
    }
    let (ny, nx, nz) = u.data.dim();
    let vmax = u.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = RELATIVE_ZERO * vmax.max(0.0);

    let mut albedo = AlbedoMap::zeros(ny, nx);
    let mut depth = DepthMap::empty(ny, nx);
    if vmax <= 0.0 {
        return Ok((albedo, depth));
    }

    for iy in 0..ny {
        for ix in 0..nx {
            let mut count = 0usize;
            let mut last = (0usize, 0.0);
            let mut weight_sum = 0.0;
            let mut albedo_acc = 0.0;
            let mut depth_acc = 0.0;
            for iz in 0..nz {
                let v = u.data[[iy, ix, iz]];
                if v > cutoff {
                    count += 1;
                    last = (iz, v);
                    let w = v.powi(p as i32);
                    weight_sum += w;
                    albedo_acc += w * v;
                    depth_acc += w * iz as f64;
                }
            }
            match count {
                0 => {}
                // Single layer has weight exactly 1; bypass the quotient so
                // the projection/back-projection round trip is bit-exact.
                1 => {
                    albedo.val[[iy, ix]] = last.1;
                    depth.idx[[iy, ix]] = last.0 as u32 + 1;
                }
                _ => {
                    albedo.val[[iy, ix]] = albedo_acc / weight_sum;
                    depth.idx[[iy, ix]] = (depth_acc / weight_sum).round() as u32 + 1;
                }
            }
        }
    }
    Ok((albedo, depth))
}

/// Place each column's albedo at its stored depth; EMPTY columns stay zero.
pub fn back_project(albedo: &AlbedoMap, depth: &DepthMap, grid: SceneGrid) -> Result<VoxelAlbedo> {
    let (ny, nx) = depth.idx.dim();
    if (ny, nx) != (grid.ny, grid.nx) || albedo.val.dim() != (ny, nx) {
        return Err(Error::mismatch(format!(
            "map dims {:?}/{:?} do not match grid ({}, {})",
            depth.idx.dim(),
            albedo.val.dim(),
            grid.ny,
            grid.nx
        )));
    }
    let mut u = VoxelAlbedo::zeros(grid);
    for iy in 0..ny {
        for ix in 0..nx {
            let d = depth.idx[[iy, ix]];
            if d == 0 {
                continue;
            }
            if d as usize > grid.nz {
                return Err(Error::invalid(format!(
                    "depth index {d} at ({iy}, {ix}) exceeds nz = {}",
                    grid.nz
                )));
            }
            u.data[[iy, ix, d as usize - 1]] = albedo.val[[iy, ix]];
        }
    }
    Ok(u)
}
