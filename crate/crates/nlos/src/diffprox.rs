//! Finite-difference operators, shrinkage (proximal) operators, the
//! adaptive surface weights, FFT solvers for the screened Poisson and
//! screened biharmonic systems, and image post-processing.
//!
//! All stencils are forward differences with periodic boundary, and every
//! adjoint here is the exact discrete transpose of its partner so the FFT
//! solvers invert exactly the systems the splitting scheme assembles.
//! Symmetric 2x2 matrix fields store (xx, xy, yy) and use the Frobenius
//! inner product that counts the off-diagonal twice.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{GradField, HessianField};

/// Forward-difference gradient with periodic wrap.
pub fn grad2d(f: &Array2<f64>) -> GradField {
    let (ny, nx) = f.dim();
    let mut g = GradField::zeros(ny, nx);
    for y in 0..ny {
        for x in 0..nx {
            let xp = if x + 1 == nx { 0 } else { x + 1 };
            let yp = if y + 1 == ny { 0 } else { y + 1 };
            g.x[[y, x]] = f[[y, xp]] - f[[y, x]];
            g.y[[y, x]] = f[[yp, x]] - f[[y, x]];
        }
    }
    g
}

/// Backward-difference divergence; the exact negative adjoint of [`grad2d`]:
/// `<grad f, v> = -<f, div v>`.
pub fn div2d(v: &GradField) -> Array2<f64> {
    let (ny, nx) = v.x.dim();
    let mut out = Array2::zeros((ny, nx));
    for y in 0..ny {
        for x in 0..nx {
            let xm = if x == 0 { nx - 1 } else { x - 1 };
            let ym = if y == 0 { ny - 1 } else { y - 1 };
            out[[y, x]] = v.x[[y, x]] - v.x[[y, xm]] + v.y[[y, x]] - v.y[[ym, x]];
        }
    }
    out
}

/// Hessian from composed forward differences, symmetric by storage.
pub fn hessian2d(f: &Array2<f64>) -> HessianField {
    let (ny, nx) = f.dim();
    let mut h = HessianField::zeros(ny, nx);
    let at = |y: usize, x: usize| f[[y % ny, x % nx]];
    for y in 0..ny {
        for x in 0..nx {
            h.xx[[y, x]] = at(y, x + 2) - 2.0 * at(y, x + 1) + at(y, x);
            h.yy[[y, x]] = at(y + 2, x) - 2.0 * at(y + 1, x) + at(y, x);
            h.xy[[y, x]] = at(y + 1, x + 1) - at(y + 1, x) - at(y, x + 1) + at(y, x);
        }
    }
    h
}

// Adjoint of the forward x-difference: (Dx^T g)[y][x] = g[y][x-1] - g[y][x].
fn dx_adj(g: &Array2<f64>) -> Array2<f64> {
    let (ny, nx) = g.dim();
    Array2::from_shape_fn((ny, nx), |(y, x)| {
        let xm = if x == 0 { nx - 1 } else { x - 1 };
        g[[y, xm]] - g[[y, x]]
    })
}

fn dy_adj(g: &Array2<f64>) -> Array2<f64> {
    let (ny, nx) = g.dim();
    Array2::from_shape_fn((ny, nx), |(y, x)| {
        let ym = if y == 0 { ny - 1 } else { y - 1 };
        g[[ym, x]] - g[[y, x]]
    })
}

/// Exact adjoint of [`hessian2d`] under the symmetric Frobenius pairing:
/// `<hessian2d(f), w>_F = <f, div2_2d(w)>` with the xy component counted twice.
pub fn div2_2d(w: &HessianField) -> Array2<f64> {
    let mut out = dx_adj(&dx_adj(&w.xx));
    out += &dy_adj(&dy_adj(&w.yy));
    let cross = dx_adj(&dy_adj(&w.xy));
    out.scaled_add(2.0, &cross);
    out
}

/// Group soft-threshold: `max(|a| - xi, 0) * a / |a|`, zero at the origin.
pub fn shrink_vec(a: &[f64], xi: f64) -> Vec<f64> {
    debug_assert!(xi >= 0.0);
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= xi || norm == 0.0 {
        return vec![0.0; a.len()];
    }
    let scale = (norm - xi) / norm;
    a.iter().map(|v| v * scale).collect()
}

/// Two-component fast path of [`shrink_vec`] used by the splitting sweeps.
#[inline]
pub fn shrink_vec2(ax: f64, ay: f64, xi: f64) -> (f64, f64) {
    let norm = (ax * ax + ay * ay).sqrt();
    if norm <= xi || norm == 0.0 {
        return (0.0, 0.0);
    }
    let scale = (norm - xi) / norm;
    (ax * scale, ay * scale)
}

/// Frobenius-norm shrinkage of a symmetric 2x2 matrix stored as (xx, xy, yy).
#[inline]
pub fn shrink_frob(m: [f64; 3], xi: f64) -> [f64; 3] {
    let norm = (m[0] * m[0] + 2.0 * m[1] * m[1] + m[2] * m[2]).sqrt();
    if norm <= xi || norm == 0.0 {
        return [0.0; 3];
    }
    let scale = (norm - xi) / norm;
    [m[0] * scale, m[1] * scale, m[2] * scale]
}

/// Adaptive surface weights from a depth field:
/// `beta = 1/sqrt(1 + |grad D|^2)` and `alpha = |grad beta|` pointwise.
pub fn alpha_beta(d: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let g = grad2d(d);
    let (ny, nx) = d.dim();
    let beta = Array2::from_shape_fn((ny, nx), |(y, x)| {
        let gx = g.x[[y, x]];
        let gy = g.y[[y, x]];
        1.0 / (1.0 + gx * gx + gy * gy).sqrt()
    });
    let gb = grad2d(&beta);
    let alpha = Array2::from_shape_fn((ny, nx), |(y, x)| {
        let bx = gb.x[[y, x]];
        let by = gb.y[[y, x]];
        (bx * bx + by * by).sqrt()
    });
    (alpha, beta)
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

// Plans keyed by (length, inverse); rustfft plans are cheap to share.
pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<RwLock<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(p) = cache.read().unwrap().get(&(len, inverse)) {
        return p.clone();
    }
    let mut planner = planner().lock().unwrap();
    let p = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    cache.write().unwrap().insert((len, inverse), p.clone());
    p
}

/// In-place 2D FFT over the rows (x) and columns (y) of a standard-layout
/// array. The inverse is unnormalized; callers divide by nx*ny.
pub(crate) fn fft2_inplace(buf: &mut Array2<Complex64>, inverse: bool) {
    let (ny, nx) = buf.dim();
    let row_fft = plan(nx, inverse);
    for mut row in buf.rows_mut() {
        row_fft.process(row.as_slice_mut().expect("standard layout"));
    }
    let col_fft = plan(ny, inverse);
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for x in 0..nx {
        for y in 0..ny {
            col[y] = buf[[y, x]];
        }
        col_fft.process(&mut col);
        for y in 0..ny {
            buf[[y, x]] = col[y];
        }
    }
}

/// Eigenvalue of the periodic 5-point Laplacian at frequency (k, l):
/// `2cos(2 pi k / nx) + 2 cos(2 pi l / ny) - 4`, always <= 0.
fn laplace_symbol(k: usize, l: usize, nx: usize, ny: usize) -> f64 {
    use std::f64::consts::TAU;
    2.0 * (TAU * k as f64 / nx as f64).cos() + 2.0 * (TAU * l as f64 / ny as f64).cos() - 4.0
}

fn solve_spectral(rhs: &Array2<f64>, denom: impl Fn(f64) -> f64) -> Array2<f64> {
    let (ny, nx) = rhs.dim();
    let mut buf = rhs.mapv(|v| Complex64::new(v, 0.0));
    fft2_inplace(&mut buf, false);
    for l in 0..ny {
        for k in 0..nx {
            let lam = laplace_symbol(k, l, nx, ny);
            buf[[l, k]] /= denom(lam);
        }
    }
    fft2_inplace(&mut buf, true);
    let scale = 1.0 / (nx * ny) as f64;
    buf.mapv(|c| c.re * scale)
}

/// Exact periodic solve of `(I - r1 Laplacian + r2 Laplacian^2) out = rhs`.
/// The denominator `1 - r1 L + r2 L^2` is >= 1 since L <= 0.
pub fn solve_screened_biharmonic(rhs: &Array2<f64>, r1: f64, r2: f64) -> Array2<f64> {
    debug_assert!(r1 >= 0.0 && r2 >= 0.0);
    solve_spectral(rhs, |lam| 1.0 - r1 * lam + r2 * lam * lam)
}

/// Exact periodic solve of `(I - r3 Laplacian) out = rhs`.
pub fn solve_screened_poisson(rhs: &Array2<f64>, r3: f64) -> Array2<f64> {
    debug_assert!(r3 >= 0.0);
    solve_spectral(rhs, |lam| 1.0 - r3 * lam)
}

/// Explicit application of `I - r1 Laplacian + r2 Laplacian^2` with the same
/// stencils the spectral solver diagonalizes; used to verify solves.
pub fn apply_screened_biharmonic(f: &Array2<f64>, r1: f64, r2: f64) -> Array2<f64> {
    let lap = |g: &Array2<f64>| {
        let (ny, nx) = g.dim();
        Array2::from_shape_fn((ny, nx), |(y, x)| {
            let xp = if x + 1 == nx { 0 } else { x + 1 };
            let xm = if x == 0 { nx - 1 } else { x - 1 };
            let yp = if y + 1 == ny { 0 } else { y + 1 };
            let ym = if y == 0 { ny - 1 } else { y - 1 };
            g[[y, xp]] + g[[y, xm]] + g[[yp, x]] + g[[ym, x]] - 4.0 * g[[y, x]]
        })
    };
    let l1 = lap(f);
    let l2 = lap(&l1);
    let mut out = f.clone();
    out.scaled_add(-r1, &l1);
    out.scaled_add(r2, &l2);
    out
}

/// Circular convolution with a normalized Gaussian truncated at 4 sigma.
pub fn gaussian_smooth(img: &Array2<f64>, sigma: f64) -> Array2<f64> {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return img.clone();
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= total;
    }

    let (ny, nx) = img.dim();
    let mut tmp = Array2::zeros((ny, nx));
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let xx = (x as i64 + j as i64 - radius).rem_euclid(nx as i64) as usize;
                acc += k * img[[y, xx]];
            }
            tmp[[y, x]] = acc;
        }
    }
    let mut out = Array2::zeros((ny, nx));
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let yy = (y as i64 + j as i64 - radius).rem_euclid(ny as i64) as usize;
                acc += k * tmp[[yy, x]];
            }
            out[[y, x]] = acc;
        }
    }
    out
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Clip the image to its [lo_pct, hi_pct] percentile range.
pub fn truncate(img: &Array2<f64>, lo_pct: f64, hi_pct: f64) -> Array2<f64> {
    debug_assert!((0.0..=100.0).contains(&lo_pct) && lo_pct <= hi_pct && hi_pct <= 100.0);
    let mut sorted: Vec<f64> = img.iter().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let lo = percentile(&sorted, lo_pct);
    let hi = percentile(&sorted, hi_pct);
    img.mapv(|v| v.clamp(lo, hi))
}

/// Zero out values below `frac * max(img)`.
pub fn threshold(img: &Array2<f64>, frac: f64) -> Array2<f64> {
    debug_assert!((0.0..=1.0).contains(&frac));
    let max = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = frac * max;
    img.mapv(|v| if v < cut { 0.0 } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(ny: usize, nx: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((ny, nx), |_| rng.random_range(-1.0..1.0))
    }

    fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn constant_field_zero_gradient() {
        let f = Array2::from_elem((5, 7), 3.25);
        let g = grad2d(&f);
        assert!(g.x.iter().all(|&v| v == 0.0));
        assert!(g.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_gradient_is_one_except_wrap() {
        let f = Array2::from_shape_fn((4, 8), |(_, x)| x as f64);
        let g = grad2d(&f);
        for y in 0..4 {
            for x in 0..7 {
                assert_eq!(g.x[[y, x]], 1.0);
            }
            assert_eq!(g.x[[y, 7]], -7.0); // wrap column
        }
    }

    #[test]
    fn grad_div_adjoint_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_field(8, 8, &mut rng);
            let v = GradField {
                x: random_field(8, 8, &mut rng),
                y: random_field(8, 8, &mut rng),
            };
            let g = grad2d(&f);
            let lhs = dot(&g.x, &v.x) + dot(&g.y, &v.y);
            let rhs = -dot(&f, &div2d(&v));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn linear_field_zero_hessian() {
        let f = Array2::from_shape_fn((6, 6), |(y, x)| 2.0 * x as f64 - 3.0 * y as f64);
        let h = hessian2d(&f);
        // Rows/cols touching the wrap see the discontinuity; check interior.
        for y in 0..3 {
            for x in 0..3 {
                assert!(h.xx[[y, x]].abs() < 1e-12);
                assert!(h.xy[[y, x]].abs() < 1e-12);
                assert!(h.yy[[y, x]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_second_derivative() {
        let f = Array2::from_shape_fn((4, 10), |(_, x)| (x as f64) * (x as f64));
        let h = hessian2d(&f);
        for y in 0..4 {
            for x in 0..6 {
                assert!((h.xx[[y, x]] - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_div2_adjoint_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_field(8, 8, &mut rng);
            let w = HessianField {
                xx: random_field(8, 8, &mut rng),
                xy: random_field(8, 8, &mut rng),
                yy: random_field(8, 8, &mut rng),
            };
            let h = hessian2d(&f);
            let lhs = dot(&h.xx, &w.xx) + 2.0 * dot(&h.xy, &w.xy) + dot(&h.yy, &w.yy);
            let rhs = dot(&f, &div2_2d(&w));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn shrink_vec_at_threshold() {
        assert_eq!(shrink_vec(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
    }

    #[test]
    fn shrink_vec_partial() {
        let s = shrink_vec(&[3.0, 4.0], 2.5);
        assert!((s[0] - 1.5).abs() < 1e-15);
        assert!((s[1] - 2.0).abs() < 1e-15);
        let (sx, sy) = shrink_vec2(3.0, 4.0, 2.5);
        assert_eq!(s, vec![sx, sy]);
    }

    #[test]
    fn shrink_zero_input() {
        assert_eq!(shrink_vec(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
        assert_eq!(shrink_frob([0.0; 3], 1.0), [0.0; 3]);
    }

    #[test]
    fn shrink_frob_diag_cases() {
        // diag(3,4) stored as (3, 0, 4): Frobenius norm 5.
        assert_eq!(shrink_frob([3.0, 0.0, 4.0], 5.0), [0.0; 3]);
        let s = shrink_frob([3.0, 0.0, 4.0], 2.5);
        assert!((s[0] - 1.5).abs() < 1e-15 && (s[2] - 2.0).abs() < 1e-15);
    }

    // Brute-force prox search along the ray through `a`, which is where the
    // minimizer of xi*|v| + 0.5*|v - a|^2 must lie.
    fn ray_prox_norm(anorm: f64, xi: f64, steps: usize) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=steps {
            let s = anorm * 1.5 * i as f64 / steps as f64;
            let cost = xi * s + 0.5 * (s - anorm) * (s - anorm);
            if cost < best.0 {
                best = (cost, s);
            }
        }
        best.1
    }

    #[test]
    fn shrink_matches_ray_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let xi = rng.random_range(0.0..2.0);
            let anorm = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let s = shrink_vec(&a, xi);
            let snorm = (s[0] * s[0] + s[1] * s[1]).sqrt();
            let expect = ray_prox_norm(anorm, xi, 40_000);
            assert!(
                (snorm - expect).abs() < 1e-4,
                "|shrink|={snorm} brute={expect} a={a:?} xi={xi}"
            );
        }
    }

    #[test]
    fn alpha_beta_constant_depth() {
        let d = Array2::from_elem((6, 6), 4.0);
        let (alpha, beta) = alpha_beta(&d);
        assert!(beta.iter().all(|&b| (b - 1.0).abs() < 1e-15));
        assert!(alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn alpha_beta_unit_ramp() {
        let d = Array2::from_shape_fn((4, 16), |(_, x)| x as f64);
        let (alpha, beta) = alpha_beta(&d);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        for y in 0..4 {
            for x in 2..12 {
                assert!((beta[[y, x]] - inv_sqrt2).abs() < 1e-12);
                assert!(alpha[[y, x]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_beta_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_field(9, 9, &mut rng).mapv(|v| v * 10.0);
        let (alpha, beta) = alpha_beta(&d);
        assert!(beta.iter().all(|&b| b > 0.0 && b <= 1.0));
        assert!(alpha.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn biharmonic_identity_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rhs = random_field(8, 8, &mut rng);
        let out = solve_screened_biharmonic(&rhs, 0.0, 0.0);
        for (a, b) in out.iter().zip(rhs.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn solvers_preserve_constants() {
        let rhs = Array2::from_elem((8, 8), 2.5);
        let out = solve_screened_biharmonic(&rhs, 0.3, 1.7);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-12));
        let out = solve_screened_poisson(&rhs, 20.0);
        assert!(out.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn solve_then_apply_recovers_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let rhs = random_field(8, 8, &mut rng);
            let r1 = rng.random_range(0.0..2.0);
            let r2 = rng.random_range(0.0..3.0);
            let d = solve_screened_biharmonic(&rhs, r1, r2);
            let back = apply_screened_biharmonic(&d, r1, r2);
            for (a, b) in back.iter().zip(rhs.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn poisson_matches_biharmonic_special_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rhs = random_field(8, 8, &mut rng);
        let a = solve_screened_poisson(&rhs, 1.3);
        let b = solve_screened_biharmonic(&rhs, 1.3, 0.0);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn smoothing_identity_at_zero_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let img = random_field(6, 6, &mut rng);
        assert_eq!(gaussian_smooth(&img, 0.0), img);
    }

    #[test]
    fn smoothing_preserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let img = random_field(16, 16, &mut rng).mapv(f64::abs);
        let sm = gaussian_smooth(&img, 1.5);
        assert!((sm.sum() - img.sum()).abs() < 1e-10 * img.sum());
    }

    #[test]
    fn truncate_full_range_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let img = random_field(7, 7, &mut rng);
        assert_eq!(truncate(&img, 0.0, 100.0), img);
    }

    #[test]
    fn truncate_clips_percentiles() {
        let img = Array2::from_shape_fn((1, 101), |(_, x)| x as f64);
        let t = truncate(&img, 10.0, 90.0);
        assert_eq!(t.iter().copied().fold(f64::INFINITY, f64::min), 10.0);
        assert_eq!(t.iter().copied().fold(f64::NEG_INFINITY, f64::max), 90.0);
    }

    #[test]
    fn threshold_zero_frac_identity_on_nonneg() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let img = random_field(6, 6, &mut rng).mapv(f64::abs);
        assert_eq!(threshold(&img, 0.0), img);
    }

    #[test]
    fn threshold_cuts_small_values() {
        let img = Array2::from_shape_fn((1, 4), |(_, x)| x as f64); // 0 1 2 3
        let t = threshold(&img, 0.5);
        assert_eq!(t.as_slice().unwrap(), &[0.0, 0.0, 2.0, 3.0]);
    }
}
