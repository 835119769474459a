//! Reference confocal transport: a precomputed sparse application.
//!
//! Every voxel hits exactly one time bin per scan point, and the bin and
//! weight depend only on the absolute lateral index offset and the depth
//! layer. The operator precomputes one (bin, weight) profile per offset;
//! forward and adjoint walk the same tables, so they form an exact
//! transpose pair by construction.

use crate::error::{Error, Result};
use crate::grid::{SceneGrid, TransientCube, VoxelAlbedo};

use super::Transport;

pub struct ConfocalTransport {
    grid: SceneGrid,
    /// CSR-style profile start per lateral offset id `ady * nx + adx`.
    starts: Vec<usize>,
    /// Time bin per (offset, iz); in-range layers form a prefix of each
    /// profile because distance grows with depth.
    bins: Vec<u32>,
    /// Weight d^-4 per (offset, iz), matching `bins`.
    weights: Vec<f64>,
}

impl ConfocalTransport {
    pub fn new(grid: SceneGrid) -> Self {
        let (nx, ny, nz, nt) = (grid.nx, grid.ny, grid.nz, grid.nt);
        let px = grid.pitch_x();
        let py = grid.pitch_y();
        let mut starts = Vec::with_capacity(nx * ny + 1);
        let mut bins = Vec::new();
        let mut weights = Vec::new();
        starts.push(0);
        for ady in 0..ny {
            for adx in 0..nx {
                let dx = adx as f64 * px;
                let dy = ady as f64 * py;
                let rho2 = dx * dx + dy * dy;
                for iz in 0..nz {
                    let z = grid.depth_of(iz);
                    let d2 = rho2 + z * z;
                    let d = d2.sqrt();
                    let bin = (d / grid.bin_length).round();
                    if bin >= nt as f64 {
                        break; // distance only grows with iz
                    }
                    bins.push(bin as u32);
                    weights.push(1.0 / (d2 * d2));
                }
                starts.push(bins.len());
            }
        }
        ConfocalTransport {
            grid,
            starts,
            bins,
            weights,
        }
    }

    #[inline]
    fn profile(&self, ady: usize, adx: usize) -> (&[u32], &[f64]) {
        let id = ady * self.grid.nx + adx;
        let (s, e) = (self.starts[id], self.starts[id + 1]);
        (&self.bins[s..e], &self.weights[s..e])
    }
}

impl Transport for ConfocalTransport {
    fn grid(&self) -> SceneGrid {
        self.grid
    }

    fn forward(&self, u: &VoxelAlbedo) -> Result<TransientCube> {
        let g = self.grid;
        if u.grid != g {
            return Err(Error::invalid("volume grid does not match operator grid"));
        }
        let (nx, ny, nz, nt) = (g.nx, g.ny, g.nz, g.nt);
        let u_raw = u.data.as_slice().expect("standard layout");
        let mut tau = TransientCube::zeros(g);
        let tau_raw = tau.data.as_slice_mut().expect("standard layout");
        for sy in 0..ny {
            for sx in 0..nx {
                let tcol = &mut tau_raw[(sy * nx + sx) * nt..(sy * nx + sx + 1) * nt];
                for vy in 0..ny {
                    let ady = vy.abs_diff(sy);
                    for vx in 0..nx {
                        let (bins, ws) = self.profile(ady, vx.abs_diff(sx));
                        let ucol = &u_raw[(vy * nx + vx) * nz..];
                        for ((&b, &w), &uv) in bins.iter().zip(ws).zip(ucol) {
                            tcol[b as usize] += w * uv;
                        }
                    }
                }
            }
        }
        Ok(tau)
    }

    fn adjoint(&self, tau: &TransientCube) -> Result<VoxelAlbedo> {
        let g = self.grid;
        if tau.grid != g {
            return Err(Error::invalid("transient grid does not match operator grid"));
        }
        let (nx, ny, nz, nt) = (g.nx, g.ny, g.nz, g.nt);
        let tau_raw = tau.data.as_slice().expect("standard layout");
        let mut u = VoxelAlbedo::zeros(g);
        let u_raw = u.data.as_slice_mut().expect("standard layout");
        for vy in 0..ny {
            for vx in 0..nx {
                let ucol = &mut u_raw[(vy * nx + vx) * nz..(vy * nx + vx + 1) * nz];
                for sy in 0..ny {
                    let ady = vy.abs_diff(sy);
                    for sx in 0..nx {
                        let (bins, ws) = self.profile(ady, vx.abs_diff(sx));
                        let tcol = &tau_raw[(sy * nx + sx) * nt..];
                        for ((&b, &w), uv) in bins.iter().zip(ws).zip(ucol.iter_mut()) {
                            *uv += w * tcol[b as usize];
                        }
                    }
                }
            }
        }
        Ok(u)
    }
}
