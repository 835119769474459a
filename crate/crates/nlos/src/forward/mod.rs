//! The discrete confocal light-transport operator, its exact adjoint,
//! scan-position selection, measurement noise, synthetic scenes, and
//! operator-norm estimation.
//!
//! A voxel at one-way distance d from a scan point contributes with weight
//! exactly d^-4 into time bin `round(d / bin_length)`; contributions past
//! the recorded window are dropped. Voxels live strictly behind the wall,
//! so d > 0 always.

mod fft;
mod sparse;

pub use fft::FftTransport;
pub use sparse::ConfocalTransport;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::grid::{SceneGrid, ScanMask, TransientCube, VoxelAlbedo};

/// A linear volume -> transient operator with its exact adjoint.
pub trait Transport {
    fn grid(&self) -> SceneGrid;
    fn forward(&self, u: &VoxelAlbedo) -> Result<TransientCube>;
    fn adjoint(&self, tau: &TransientCube) -> Result<VoxelAlbedo>;
}

/// Render the transient response of a volume with the reference operator.
pub fn render_transient(u: &VoxelAlbedo) -> Result<TransientCube> {
    ConfocalTransport::new(u.grid).forward(u)
}

/// Apply the exact transpose of [`render_transient`].
pub fn adjoint_transient(tau: &TransientCube) -> Result<VoxelAlbedo> {
    ConfocalTransport::new(tau.grid).adjoint(tau)
}

/// Zero the transient at wall positions the mask does not select.
/// Idempotent by construction.
pub fn apply_selection(tau: &TransientCube, mask: &ScanMask) -> Result<TransientCube> {
    let g = tau.grid;
    if mask.dims() != (g.ny, g.nx) {
        return Err(Error::mismatch(format!(
            "mask dims {:?} do not match grid ({}, {})",
            mask.dims(),
            g.ny,
            g.nx
        )));
    }
    let mut out = tau.clone();
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            if !mask.mask[[iy, ix]] {
                out.data.slice_mut(ndarray::s![iy, ix, ..]).fill(0.0);
            }
        }
    }
    Ok(out)
}

/// Additive Gaussian noise plus an optional Poisson photon-count stage.
///
/// With `poisson_scale > 0` each positive value v is replaced by a draw
/// from Poisson(v * poisson_scale) / poisson_scale before the Gaussian
/// term is added. Both stages disabled returns the input unchanged;
/// output is fully determined by the seed.
pub fn add_noise(
    tau: &TransientCube,
    gauss_sigma: f64,
    poisson_scale: f64,
    seed: u64,
) -> Result<TransientCube> {
    if gauss_sigma < 0.0 || poisson_scale < 0.0 {
        return Err(Error::invalid("noise levels must be >= 0"));
    }
    let mut out = tau.clone();
    if gauss_sigma == 0.0 && poisson_scale == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, gauss_sigma).expect("sigma validated above");
    for v in out.data.iter_mut() {
        if poisson_scale > 0.0 && *v > 0.0 {
            let pois = Poisson::new(*v * poisson_scale)
                .map_err(|e| Error::invalid(format!("poisson rate: {e}")))?;
            *v = pois.sample(&mut rng) / poisson_scale;
        }
        if gauss_sigma > 0.0 {
            *v += gauss.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Built-in test scenes. Every scene is a single-valued depth surface:
/// at most one occupied voxel per lateral column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Constant-albedo fronto-parallel sheet at mid-depth.
    Plane,
    /// Spherical cap bulging toward the wall, constant albedo.
    SphereCap,
    /// Planar binary "T" glyph at mid-depth.
    LetterT,
}

impl std::str::FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(SceneKind::Plane),
            "sphere_cap" => Ok(SceneKind::SphereCap),
            "letter_t" => Ok(SceneKind::LetterT),
            other => Err(Error::invalid(format!(
                "unknown scene '{other}'; valid kinds: plane, sphere_cap, letter_t"
            ))),
        }
    }
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneKind::Plane => "plane",
            SceneKind::SphereCap => "sphere_cap",
            SceneKind::LetterT => "letter_t",
        })
    }
}

/// Build one of the synthetic ground-truth volumes.
pub fn synth_scene(kind: SceneKind, grid: SceneGrid) -> VoxelAlbedo {
    let mut u = VoxelAlbedo::zeros(grid);
    let (ny, nx, nz) = (grid.ny, grid.nx, grid.nz);
    match kind {
        SceneKind::Plane => {
            let iz = nz / 2;
            for iy in 0..ny {
                for ix in 0..nx {
                    u.data[[iy, ix, iz]] = 1.0;
                }
            }
        }
        SceneKind::SphereCap => {
            // Cap of a sphere with lateral radius 0.35 * min(nx, ny) and a
            // depth span of half that, apex centered at mid-depth.
            let cx = (nx as f64 - 1.0) / 2.0;
            let cy = (ny as f64 - 1.0) / 2.0;
            let r_lat = 0.35 * nx.min(ny) as f64;
            let r_cap = 1.25 * r_lat;
            let span = r_cap - (r_cap * r_cap - r_lat * r_lat).sqrt();
            let apex = nz as f64 / 2.0 - span / 2.0;
            for iy in 0..ny {
                for ix in 0..nx {
                    let rho2 = (ix as f64 - cx).powi(2) + (iy as f64 - cy).powi(2);
                    if rho2 <= r_lat * r_lat {
                        let depth = apex + r_cap - (r_cap * r_cap - rho2).sqrt();
                        let iz = depth.round().clamp(0.0, nz as f64 - 1.0) as usize;
                        u.data[[iy, ix, iz]] = 1.0;
                    }
                }
            }
        }
        SceneKind::LetterT => {
            let iz = nz / 2;
            let bar_rows = ny / 6..(ny / 3).max(ny / 6 + 1);
            let bar_cols = nx / 6..(5 * nx / 6).max(nx / 6 + 1);
            let stem_rows = ny / 3..(5 * ny / 6).max(ny / 3 + 1);
            let stem_cols = 5 * nx / 12..(7 * nx / 12).max(5 * nx / 12 + 1);
            for iy in bar_rows {
                for ix in bar_cols.clone() {
                    u.data[[iy, ix, iz]] = 1.0;
                }
            }
            for iy in stem_rows {
                for ix in stem_cols.clone() {
                    u.data[[iy, ix, iz]] = 1.0;
                }
            }
        }
    }
    u
}

/// Largest-singular-value estimate of an operator (optionally composed
/// with a scan selection) by power iteration on the normal operator.
///
/// The returned Rayleigh estimate is monotone nondecreasing in the
/// iteration count up to round-off.
pub fn operator_norm(op: &dyn Transport, mask: Option<&ScanMask>, iters: usize) -> Result<f64> {
    assert!(iters >= 1, "power iteration needs at least one step");
    let mut u = VoxelAlbedo::zeros(op.grid());
    u.data.fill(1.0);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let norm = u.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        u.data.mapv_inplace(|v| v / norm);
        let mut tau = op.forward(&u)?;
        if let Some(m) = mask {
            tau = apply_selection(&tau, m)?;
        }
        estimate = tau.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        u = op.adjoint(&tau)?;
    }
    Ok(estimate)
}

/// Spectral-norm estimate of the reference operator on a grid.
pub fn estimate_op_norm(grid: SceneGrid, iters: usize) -> f64 {
    let op = ConfocalTransport::new(grid);
    operator_norm(&op, None, iters).expect("grids match by construction")
}
