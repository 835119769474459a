//! Shared coordinate system, discretization, and the core array types.
//!
//! The hidden volume occupies the half-space z > 0 behind a planar relay
//! wall at z = 0. Scan positions coincide with the lateral voxel centers
//! on the wall, and one time bin corresponds to `bin_length` meters of
//! one-way travel, so a voxel at distance d from a scan point lands in
//! bin `round(d / bin_length)`.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Speed of light in m/s. Distances are carried in meters throughout, so
/// this constant is informational only.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Geometry of the hidden volume, the wall scan lattice, and time binning.
///
/// The depth pitch is fixed by construction so the full time window maps
/// exactly onto the nz depth voxels: `voxel_depth = nt * bin_length / (2 * nz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    /// Lateral extent of the scanned wall patch in meters.
    pub wall_size: f64,
    /// Meters of one-way light travel per time bin.
    pub bin_length: f64,
}

impl SceneGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        nt: usize,
        wall_size: f64,
        bin_length: f64,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 || nt == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be >= 1, got {nx}x{ny}x{nz} with {nt} bins"
            )));
        }
        if !(wall_size > 0.0) || !(bin_length > 0.0) {
            return Err(Error::invalid(format!(
                "wall_size and bin_length must be positive, got {wall_size} and {bin_length}"
            )));
        }
        Ok(SceneGrid {
            nx,
            ny,
            nz,
            nt,
            wall_size,
            bin_length,
        })
    }

    /// Depth extent of one voxel in meters.
    pub fn voxel_depth(&self) -> f64 {
        self.nt as f64 * self.bin_length / (2.0 * self.nz as f64)
    }

    /// Lateral voxel pitch along x in meters.
    pub fn pitch_x(&self) -> f64 {
        self.wall_size / self.nx as f64
    }

    /// Lateral voxel pitch along y in meters.
    pub fn pitch_y(&self) -> f64 {
        self.wall_size / self.ny as f64
    }

    /// Center depth of voxel layer `iz` in meters (strictly positive).
    pub fn depth_of(&self, iz: usize) -> f64 {
        (iz as f64 + 0.5) * self.voxel_depth()
    }

    /// Time bin hit by a direct (zero lateral offset) return from layer `iz`.
    ///
    /// Total on `0..nz` and always lands in `0..nt`: the deepest layer sits
    /// at just under `nt * bin_length / 2`, i.e. bin just under `nt / 2`.
    pub fn bin_of_depth(&self, iz: usize) -> usize {
        debug_assert!(iz < self.nz);
        (self.depth_of(iz) / self.bin_length).round() as usize
    }

    /// Time bin for a one-way distance `d` in meters, or None when the
    /// round trip falls outside the recorded window.
    pub fn bin_of_distance(&self, d: f64) -> Option<usize> {
        let b = (d / self.bin_length).round();
        if b >= 0.0 && b < self.nt as f64 {
            Some(b as usize)
        } else {
            None
        }
    }

    pub fn n_scan(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_vox(&self) -> usize {
        self.nx * self.ny * self.nz
    }
}

/// Time-resolved measurement on the wall, indexed `[iy][ix][it]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientCube {
    pub grid: SceneGrid,
    pub data: Array3<f64>,
}

impl TransientCube {
    pub fn zeros(grid: SceneGrid) -> Self {
        let data = Array3::zeros((grid.ny, grid.nx, grid.nt));
        TransientCube { grid, data }
    }

    pub fn from_data(grid: SceneGrid, data: Array3<f64>) -> Result<Self> {
        if data.dim() != (grid.ny, grid.nx, grid.nt) {
            return Err(Error::mismatch(format!(
                "transient data shape {:?} does not match grid ({}, {}, {})",
                data.dim(),
                grid.ny,
                grid.nx,
                grid.nt
            )));
        }
        Ok(TransientCube { grid, data })
    }

    pub fn sum(&self) -> f64 {
        self.data.sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reconstructed (or ground-truth) volumetric albedo, indexed `[iy][ix][iz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelAlbedo {
    pub grid: SceneGrid,
    pub data: Array3<f64>,
}

impl VoxelAlbedo {
    pub fn zeros(grid: SceneGrid) -> Self {
        let data = Array3::zeros((grid.ny, grid.nx, grid.nz));
        VoxelAlbedo { grid, data }
    }

    pub fn from_data(grid: SceneGrid, data: Array3<f64>) -> Result<Self> {
        if data.dim() != (grid.ny, grid.nx, grid.nz) {
            return Err(Error::mismatch(format!(
                "volume data shape {:?} does not match grid ({}, {}, {})",
                data.dim(),
                grid.ny,
                grid.nx,
                grid.nz
            )));
        }
        Ok(VoxelAlbedo { grid, data })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Which wall positions are illuminated/detected. Constant over time:
/// sparse scanning subsamples positions, never individual bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanMask {
    pub mask: Array2<bool>,
}

impl ScanMask {
    pub fn new(mask: Array2<bool>) -> Result<Self> {
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid(
                "scan mask must select at least one position",
            ));
        }
        Ok(ScanMask { mask })
    }

    /// Every position illuminated.
    pub fn full(ny: usize, nx: usize) -> Self {
        ScanMask {
            mask: Array2::from_elem((ny, nx), true),
        }
    }

    /// Keep every k-th position along both axes (uniform subsampling).
    pub fn every_k(ny: usize, nx: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("mask stride k must be >= 1"));
        }
        let mask = Array2::from_shape_fn((ny, nx), |(iy, ix)| iy % k == 0 && ix % k == 0);
        ScanMask::new(mask)
    }

    /// Exactly n positions chosen uniformly without replacement.
    pub fn random(ny: usize, nx: usize, n: usize, seed: u64) -> Result<Self> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        if n == 0 || n > ny * nx {
            return Err(Error::invalid(format!(
                "random mask count {n} out of range 1..={}",
                ny * nx
            )));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cells: Vec<usize> = (0..ny * nx).collect();
        cells.shuffle(&mut rng);
        let mut mask = Array2::from_elem((ny, nx), false);
        for &c in cells.iter().take(n) {
            mask[[c / nx, c % nx]] = true;
        }
        ScanMask::new(mask)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dim()
    }
}

/// Depth map with an EMPTY sentinel: 0 means no surface in the column,
/// a stored value k >= 1 means voxel depth index k - 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub idx: Array2<u32>,
}

impl DepthMap {
    pub fn empty(ny: usize, nx: usize) -> Self {
        DepthMap {
            idx: Array2::zeros((ny, nx)),
        }
    }
}

/// Nonnegative per-column albedo image paired with a [`DepthMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlbedoMap {
    pub val: Array2<f64>,
}

impl AlbedoMap {
    pub fn zeros(ny: usize, nx: usize) -> Self {
        AlbedoMap {
            val: Array2::zeros((ny, nx)),
        }
    }
}

/// Per-pixel 2-vector field (x and y components of a gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl GradField {
    pub fn zeros(ny: usize, nx: usize) -> Self {
        GradField {
            x: Array2::zeros((ny, nx)),
            y: Array2::zeros((ny, nx)),
        }
    }
}

/// Per-pixel symmetric 2x2 matrix field; only xx, xy, yy are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    pub xx: Array2<f64>,
    pub xy: Array2<f64>,
    pub yy: Array2<f64>,
}

impl HessianField {
    pub fn zeros(ny: usize, nx: usize) -> Self {
        HessianField {
            xx: Array2::zeros((ny, nx)),
            xy: Array2::zeros((ny, nx)),
            yy: Array2::zeros((ny, nx)),
        }
    }
}

/// Which discrete light-transport operator drives the solve.
///
/// `Reference` applies the exact per-voxel kernel; `Fft` is the factored
/// O(N^3 log N) path that trades a small (<5 percent on smooth volumes)
/// model error for asymptotically better scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    Reference,
    Fft,
}

/// All model and algorithm parameters.
///
/// `sigma` (sparsity weight factor) and `lambda` (volume/surface coupling)
/// are scene-dependent and must always be chosen by the caller; everything
/// else has serviceable defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Data-consistency weight on measured scan positions.
    pub rho: f64,
    /// Sparsity factor: the L1 weight is `gamma = sigma * sum(tau0)`.
    pub sigma: f64,
    /// Coupling between the volume and the back-projected surface.
    pub lambda: f64,
    /// Total-variation weight on the albedo map.
    pub eta: f64,
    /// Penalty parameter of the gradient split in the depth subproblem.
    pub r1: f64,
    /// Penalty parameter of the Hessian split in the depth subproblem.
    pub r2: f64,
    /// Penalty parameter of the gradient split in the albedo subproblem.
    pub r3: f64,
    /// Power of the albedo-weighted projection.
    pub p: u32,
    /// Outer iterations.
    pub k_max: usize,
    /// Proximal-gradient steps per volume update (and initialization length).
    pub fista_iters: usize,
    /// Splitting sweeps per depth-map update.
    pub admm_iters_d: usize,
    /// Splitting sweeps per albedo-map update.
    pub admm_iters_i: usize,
    /// Fixed step size; None picks 1/(||A||^2 + lambda) automatically.
    pub step_t: Option<f64>,
    /// Clamp the volume to be nonnegative after each shrinkage.
    pub nonneg_clamp: bool,
    /// Reset the splitting multipliers at the start of every outer
    /// iteration instead of warm-starting them.
    pub reset_multipliers: bool,
    pub operator: TransportKind,
}

impl SolverParams {
    /// Defaults with the two scene-dependent weights supplied by the caller.
    pub fn new(sigma: f64, lambda: f64) -> Self {
        SolverParams {
            rho: 25.0,
            sigma,
            lambda,
            eta: 1e-5,
            r1: 0.1,
            r2: 2.0,
            r3: 20.0,
            p: 4,
            k_max: 120,
            fista_iters: 4,
            admm_iters_d: 10,
            admm_iters_i: 10,
            step_t: None,
            nonneg_clamp: false,
            reset_multipliers: false,
            operator: TransportKind::Reference,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("eta", self.eta),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("r3", self.r3)] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.p < 1 {
            return Err(Error::invalid("projection power p must be >= 1"));
        }
        if let Some(t) = self.step_t {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("step_t must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Sparsity weight `gamma = sigma * sum(tau0)`, tying the L1 strength to
/// the total measured signal. Linear in both arguments.
pub fn gamma_from(sigma: f64, tau0: &TransientCube) -> f64 {
    sigma * tau0.sum()
}
