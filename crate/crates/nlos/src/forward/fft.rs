//! Fourier-factored confocal transport.
//!
//! In squared-distance coordinates the shell constraint d^2 = rho^2 + z^2
//! becomes a pure shift: resampling the volume onto a uniform grid in
//! w = z^2 turns the shell sum into a 3D correlation (lateral offsets x
//! shell shift), evaluated with zero-padded FFTs in O(N^3 log N). The
//! d^-4 falloff and the time binning are applied per squared-distance
//! bin afterwards, so this path is an approximation of the reference
//! operator (bin-center weights, interpolated depths) but is an exact
//! transpose pair with its own adjoint.
//!
//! Accuracy is set by `SHELL_OVERSAMPLE`; at the default it agrees with
//! the reference operator within a few percent relative L2 on smooth
//! volumes, which is what the solver needs it for.

use num_complex::Complex64;

use crate::diffprox::plan;
use crate::error::{Error, Result};
use crate::grid::{SceneGrid, TransientCube, VoxelAlbedo};

use super::Transport;

/// Squared-distance bins per time bin.
const SHELL_OVERSAMPLE: usize = 2;

pub struct FftTransport {
    grid: SceneGrid,
    /// Padded FFT dims (py, px, pz); shell axis is contiguous.
    pdims: (usize, usize, usize),
    /// Spectrum of the shell-shift kernel.
    khat: Vec<Complex64>,
    /// Linear splat of each depth layer onto the w = z^2 grid: (bin, frac).
    splat: Vec<(usize, f64)>,
    ns: usize,
    /// Time bin per squared-distance bin; u32::MAX drops the bin.
    tmap: Vec<u32>,
    /// d^-4 evaluated at each squared-distance bin center.
    wmap: Vec<f64>,
}

// Smallest 5-smooth FFT length >= n.
fn fft_len(n: usize) -> usize {
    let mut len = n.max(2);
    loop {
        let mut m = len;
        for f in [2, 3, 5] {
            while m % f == 0 {
                m /= f;
            }
        }
        if m == 1 {
            return len;
        }
        len += 1;
    }
}

impl FftTransport {
    pub fn new(grid: SceneGrid) -> Self {
        let (nx, ny, nz, nt) = (grid.nx, grid.ny, grid.nz, grid.nt);
        let bl = grid.bin_length;

        let ns = (SHELL_OVERSAMPLE * nt).max(4);
        let s_max = ((nt as f64 - 0.5) * bl).powi(2);
        let delta = s_max / ns as f64;

        // Uniform w = z^2 grid sharing the shell spacing.
        let w_top = grid.depth_of(nz - 1).powi(2);
        let nw = ((w_top / delta).ceil() as usize + 2).max(2);
        let splat: Vec<(usize, f64)> = (0..nz)
            .map(|iz| {
                let pos = grid.depth_of(iz).powi(2) / delta - 0.5;
                if pos <= 0.0 {
                    (0, 0.0)
                } else {
                    let j0 = (pos.floor() as usize).min(nw - 2);
                    (j0, pos - j0 as f64)
                }
            })
            .collect();

        let tmap: Vec<u32> = (0..ns)
            .map(|m| {
                let d = ((m as f64 + 0.5) * delta).sqrt();
                let t = (d / bl).round();
                if t < nt as f64 {
                    t as u32
                } else {
                    u32::MAX
                }
            })
            .collect();
        let wmap: Vec<f64> = (0..ns)
            .map(|m| {
                let s = (m as f64 + 0.5) * delta;
                1.0 / (s * s)
            })
            .collect();

        let py = fft_len(2 * ny - 1);
        let px = fft_len(2 * nx - 1);
        let pz = fft_len(nw + ns);

        // Shell-shift kernel: one unit impulse per lateral offset at shift
        // floor(rho^2/delta + 0.5); shifts past the output range never land.
        let mut kernel = vec![Complex64::new(0.0, 0.0); py * px * pz];
        let phx = grid.pitch_x();
        let phy = grid.pitch_y();
        for dy in -(ny as i64 - 1)..=(ny as i64 - 1) {
            for dx in -(nx as i64 - 1)..=(nx as i64 - 1) {
                let rho2 = (dx as f64 * phx).powi(2) + (dy as f64 * phy).powi(2);
                let g = (rho2 / delta + 0.5).floor() as usize;
                if g >= ns {
                    continue;
                }
                let iy = dy.rem_euclid(py as i64) as usize;
                let ix = dx.rem_euclid(px as i64) as usize;
                kernel[(iy * px + ix) * pz + g] += Complex64::new(1.0, 0.0);
            }
        }
        fft3_inplace(&mut kernel, (py, px, pz), false);

        FftTransport {
            grid,
            pdims: (py, px, pz),
            khat: kernel,
            splat,
            ns,
            tmap,
            wmap,
        }
    }

    // FFT -> pointwise symbol -> inverse FFT -> 1/N, shared by both
    // directions so they stay exact transposes of each other.
    fn convolve(&self, buf: &mut [Complex64], conjugate: bool) {
        let (py, px, pz) = self.pdims;
        fft3_inplace(buf, (py, px, pz), false);
        if conjugate {
            for (b, k) in buf.iter_mut().zip(&self.khat) {
                *b *= k.conj();
            }
        } else {
            for (b, k) in buf.iter_mut().zip(&self.khat) {
                *b *= k;
            }
        }
        fft3_inplace(buf, (py, px, pz), true);
        let scale = 1.0 / (py * px * pz) as f64;
        for b in buf.iter_mut() {
            *b *= scale;
        }
    }
}

fn fft3_inplace(buf: &mut [Complex64], dims: (usize, usize, usize), inverse: bool) {
    let (py, px, pz) = dims;
    debug_assert_eq!(buf.len(), py * px * pz);
    let fz = plan(pz, inverse);
    for row in buf.chunks_exact_mut(pz) {
        fz.process(row);
    }
    let fx = plan(px, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); px];
    for y in 0..py {
        for z in 0..pz {
            for x in 0..px {
                line[x] = buf[(y * px + x) * pz + z];
            }
            fx.process(&mut line);
            for x in 0..px {
                buf[(y * px + x) * pz + z] = line[x];
            }
        }
    }
    let fy = plan(py, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); py];
    for x in 0..px {
        for z in 0..pz {
            for y in 0..py {
                line[y] = buf[(y * px + x) * pz + z];
            }
            fy.process(&mut line);
            for y in 0..py {
                buf[(y * px + x) * pz + z] = line[y];
            }
        }
    }
}

impl Transport for FftTransport {
    fn grid(&self) -> SceneGrid {
        self.grid
    }

    fn forward(&self, u: &VoxelAlbedo) -> Result<TransientCube> {
        let g = self.grid;
        if u.grid != g {
            return Err(Error::invalid("volume grid does not match operator grid"));
        }
        let (py, px, pz) = self.pdims;
        let mut buf = vec![Complex64::new(0.0, 0.0); py * px * pz];
        for vy in 0..g.ny {
            for vx in 0..g.nx {
                let base = (vy * px + vx) * pz;
                for iz in 0..g.nz {
                    let v = u.data[[vy, vx, iz]];
                    let (j0, frac) = self.splat[iz];
                    buf[base + j0] += Complex64::new(v * (1.0 - frac), 0.0);
                    buf[base + j0 + 1] += Complex64::new(v * frac, 0.0);
                }
            }
        }
        self.convolve(&mut buf, false);
        eprintln!(
            "DEBUG forward: buf(4,8,22) = {:?}, buf(8,8,8) = {:?}",
            buf[(4 * px + 8) * pz + 22],
            buf[(8 * px + 8) * pz + 8]
        );
        let mut tau = TransientCube::zeros(g);
        for sy in 0..g.ny {
            for sx in 0..g.nx {
                let base = (sy * px + sx) * pz;
                for m in 0..self.ns {
                    let t = self.tmap[m];
                    if t != u32::MAX {
                        tau.data[[sy, sx, t as usize]] += buf[base + m].re * self.wmap[m];
                    }
                }
            }
        }
        eprintln!(
            "DEBUG scatter: tmap[22]={} wmap[22]={} tau(4,8,27)={}",
            self.tmap[22],
            self.wmap[22],
            tau.data[[4, 8, 27]]
        );
        Ok(tau)
    }

    fn adjoint(&self, tau: &TransientCube) -> Result<VoxelAlbedo> {
        let g = self.grid;
        if tau.grid != g {
            return Err(Error::invalid("transient grid does not match operator grid"));
        }
        let (py, px, pz) = self.pdims;
        let mut buf = vec![Complex64::new(0.0, 0.0); py * px * pz];
        for sy in 0..g.ny {
            for sx in 0..g.nx {
                let base = (sy * px + sx) * pz;
                for m in 0..self.ns {
                    let t = self.tmap[m];
                    if t != u32::MAX {
                        buf[base + m] =
                            Complex64::new(tau.data[[sy, sx, t as usize]] * self.wmap[m], 0.0);
                    }
                }
            }
        }
        self.convolve(&mut buf, true);
        let mut u = VoxelAlbedo::zeros(g);
        for vy in 0..g.ny {
            for vx in 0..g.nx {
                let base = (vy * px + vx) * pz;
                for iz in 0..g.nz {
                    let (j0, frac) = self.splat[iz];
                    u.data[[vy, vx, iz]] =
                        buf[base + j0].re * (1.0 - frac) + buf[base + j0 + 1].re * frac;
                }
            }
        }
        Ok(u)
    }
}
