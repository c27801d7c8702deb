//! Ellipse domains Ω_ε with foci ±1, uniform complex grids, the Wirtinger
//! `∂̄` operator and the Cauchy-transform solver for `∂̄v = w`.
//!
//! All reductions run in a fixed row-major order with compensated
//! summation, so results are bit-stable across runs and independent of the
//! worker partitioning.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logdom::KahanSum;
use crate::worker_pool;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Ellipse geometry
// ---------------------------------------------------------------------------

/// Open ellipse with vertices `±cosh ε` and co-vertices `±i sinh ε`
/// (confocal family: semiaxes satisfy `a² - b² = 1`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EllipseDomain {
    pub eps: f64,
}

impl EllipseDomain {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0);
        EllipseDomain { eps }
    }

    pub fn semi_major(&self) -> f64 {
        self.eps.cosh()
    }

    pub fn semi_minor(&self) -> f64 {
        self.eps.sinh()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let a = self.semi_major();
        let b = self.semi_minor();
        (z.re / a).powi(2) + (z.im / b).powi(2) < 1.0
    }

    /// Confocal coordinate: the `s >= 0` with `z ∈ ∂Ω_s`; zero on `[-1, 1]`.
    pub fn elliptic_radius(z: Complex64) -> f64 {
        let (x, y) = (z.re, z.im);
        let b = 1.0 - x * x - y * y;
        let disc = (b * b + 4.0 * y * y).sqrt();
        // w = sinh² s, the positive root of w² + w·b - y² = 0, in a
        // cancellation-free form.
        let w = if b >= 0.0 { 2.0 * y * y / (b + disc) } else { 0.5 * (disc - b) };
        w.max(0.0).sqrt().asinh()
    }
}

/// Distance from `z` to the interval `[-1, 1]`.
pub fn dist_to_interval(z: Complex64) -> f64 {
    if z.re.abs() <= 1.0 {
        z.im.abs()
    } else {
        let x = z.re.abs() - 1.0;
        (x * x + z.im * z.im).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Geometry constants
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GeometryConstants {
    /// `sup d(z, [-1,1]) / ε` over `z ∈ Ω_ε`, `ε <= eps_max`.
    pub c_geom: f64,
    /// Largest `E` such that the closed disk of radius `E (1-b) ε` around
    /// any `x ∈ [-b, b]` lies in `Ω_{ε/2}`, for all `b < 1`, `ε <= eps_max`.
    pub e_geom: f64,
}

/// Exact test: closed disk of radius `r` around the real point `x` inside
/// the open ellipse with parameter `s`. The sup over the disk boundary of
/// the ellipse quadratic form has the closed form `x² + r²/b²` when the
/// interior critical point is admissible, else it sits at `(|x|+r)/a`.
fn disk_inside(x: f64, r: f64, s: f64) -> bool {
    let a = s.cosh();
    let b = s.sinh();
    let x = x.abs();
    if x + r >= a {
        return false;
    }
    if r >= x * b * b && x * x + (r * r) / (b * b) >= 1.0 {
        return false;
    }
    true
}

/// Measures the two absolute constants of the ellipse family by dense
/// boundary sampling (for `C`) and binary search over the exact disk
/// inclusion test (for `E`).
pub fn geometry_constants(eps_max: f64) -> GeometryConstants {
    assert!(eps_max > 0.0 && eps_max <= 1.0);
    let eps_grid = crate::logdom::logspace(eps_max / 1024.0, eps_max, 64);

    let mut c_geom = 0.0f64;
    for &eps in &eps_grid {
        let dom = EllipseDomain::new(eps);
        let (a, b) = (dom.semi_major(), dom.semi_minor());
        for i in 0..=2048 {
            let th = std::f64::consts::PI * i as f64 / 2048.0;
            let z = Complex64::new(a * th.cos(), b * th.sin());
            c_geom = c_geom.max(dist_to_interval(z) / eps);
        }
    }

    let mut e_geom = f64::INFINITY;
    let bs: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
    for &eps in &eps_grid {
        for &b in &bs {
            for ix in 0..=16 {
                let x = b * ix as f64 / 16.0;
                // Largest admissible radius by bisection.
                let (mut lo, mut hi) = (0.0f64, 2.0f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if disk_inside(x, mid, eps / 2.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                e_geom = e_geom.min(lo / ((1.0 - b) * eps));
            }
        }
    }
    GeometryConstants { c_geom, e_geom }
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Uniform rectangular grid geometry; node `(ix, iy)` sits at
/// `x0 + ix·h + i(y0 + iy·h)`, flattened row-major (`iy` outer).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeom {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridGeom {
    /// Grid covering `[-x1, x1] × [-y1, y1]` with spacing `h`, node at the
    /// origin.
    pub fn centered(x1: f64, y1: f64, h: f64) -> Self {
        let mx = (x1 / h).ceil() as usize;
        let my = (y1 / h).ceil() as usize;
        GridGeom { x0: -(mx as f64) * h, y0: -(my as f64) * h, h, nx: 2 * mx + 1, ny: 2 * my + 1 }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn z(&self, idx: usize) -> Complex64 {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        Complex64::new(self.x0 + ix as f64 * self.h, self.y0 + iy as f64 * self.h)
    }

    /// Mask of nodes inside `Ω_eps`.
    pub fn ellipse_mask(&self, eps: f64) -> Vec<bool> {
        let dom = EllipseDomain::new(eps);
        (0..self.len()).map(|i| dom.contains(self.z(i))).collect()
    }

    /// Mask grown by the 4-neighbour stencil.
    pub fn dilate(&self, mask: &[bool]) -> Vec<bool> {
        let mut out = mask.to_vec();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                if mask[i] {
                    if ix > 0 {
                        out[i - 1] = true;
                    }
                    if ix + 1 < self.nx {
                        out[i + 1] = true;
                    }
                    if iy > 0 {
                        out[i - self.nx] = true;
                    }
                    if iy + 1 < self.ny {
                        out[i + self.nx] = true;
                    }
                }
            }
        }
        out
    }

    /// Nodes whose full 4-stencil stays inside the mask.
    pub fn erode(&self, mask: &[bool]) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                let ix = i % self.nx;
                let iy = i / self.nx;
                ix > 0
                    && ix + 1 < self.nx
                    && iy > 0
                    && iy + 1 < self.ny
                    && mask[i]
                    && mask[i - 1]
                    && mask[i + 1]
                    && mask[i - self.nx]
                    && mask[i + self.nx]
            })
            .collect()
    }
}

/// Complex samples on a uniform grid.
#[derive(Clone, Debug)]
pub struct GridFn {
    pub geom: GridGeom,
    pub vals: Vec<Complex64>,
}

impl GridFn {
    pub fn zeros(geom: GridGeom) -> Self {
        GridFn { geom, vals: vec![Complex64::default(); geom.len()] }
    }

    pub fn from_fn(geom: GridGeom, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        let vals = worker_pool().install(|| {
            (0..geom.len())
                .into_par_iter()
                .map(|i| f(geom.z(i)))
                .collect()
        });
        GridFn { geom, vals }
    }

    pub fn sup_on(&self, mask: &[bool]) -> f64 {
        self.vals
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Binary-free JSON dump: shape, box, flattened re/im arrays.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nx": self.geom.nx,
            "ny": self.geom.ny,
            "x0": self.geom.x0,
            "y0": self.geom.y0,
            "h": self.geom.h,
            "re": self.vals.iter().map(|v| v.re).collect::<Vec<_>>(),
            "im": self.vals.iter().map(|v| v.im).collect::<Vec<_>>(),
        })
    }

    /// CSV slice `x,y,re,im,abs` over a mask.
    pub fn to_csv(&self, mask: Option<&[bool]>) -> String {
        let mut out = String::from("x,y,re,im,abs\n");
        for i in 0..self.geom.len() {
            if let Some(m) = mask {
                if !m[i] {
                    continue;
                }
            }
            let z = self.geom.z(i);
            let v = self.vals[i];
            out.push_str(&format!("{},{},{},{},{}\n", z.re, z.im, v.re, v.im, v.norm()));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Wirtinger operator
// ---------------------------------------------------------------------------

/// `∂̄F = ½(∂_x + i ∂_y)F` by centered differences, one-sided at the box
/// edge.
pub fn dbar(f: &GridFn) -> GridFn {
    let g = f.geom;
    let mut out = GridFn::zeros(g);
    let h = g.h;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let i = iy * g.nx + ix;
            let fx = if ix == 0 {
                (f.vals[i + 1] - f.vals[i]) / h
            } else if ix == g.nx - 1 {
                (f.vals[i] - f.vals[i - 1]) / h
            } else {
                (f.vals[i + 1] - f.vals[i - 1]) / (2.0 * h)
            };
            let fy = if iy == 0 {
                (f.vals[i + g.nx] - f.vals[i]) / h
            } else if iy == g.ny - 1 {
                (f.vals[i] - f.vals[i - g.nx]) / h
            } else {
                (f.vals[i + g.nx] - f.vals[i - g.nx]) / (2.0 * h)
            };
            out.vals[i] = 0.5 * (fx + Complex64::i() * fy);
        }
    }
    out
}

/// `∂̄` at a subset of nodes only (centered stencil; the mask must have
/// been dilated so all needed neighbours carry values).
pub fn dbar_at(f_vals: &[Complex64], geom: &GridGeom, nodes: &[usize]) -> Vec<Complex64> {
    let h = geom.h;
    nodes
        .iter()
        .map(|&i| {
            let fx = (f_vals[i + 1] - f_vals[i - 1]) / (2.0 * h);
            let fy = (f_vals[i + geom.nx] - f_vals[i - geom.nx]) / (2.0 * h);
            0.5 * (fx + Complex64::i() * fy)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cutoff
// ---------------------------------------------------------------------------

/// Smooth bridge: 1 for `τ >= 1`, 0 for `τ <= 0`.
fn bridge(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    let e0 = (-1.0 / tau).exp();
    let e1 = (-1.0 / (1.0 - tau)).exp();
    e0 / (e0 + e1)
}

/// Cutoff `φ_ε = ψ(ρ(z))` in the confocal coordinate: 1 on `Ω_{ε/2}`, 0
/// outside `Ω_{0.9ε}`. `strict` enforces the resolution precondition
/// (transition band at least 8 cells across at the co-vertex); pipelines
/// that only consume the cutoff where it is identically 1 may relax it,
/// accepting that the sampled transition degrades toward a sharp mask.
pub fn cutoff_phi(eps: f64, geom: GridGeom, strict: bool) -> Result<GridFn> {
    let cells = 0.4 * eps / geom.h;
    if strict && cells < 8.0 {
        return Err(Error::GridTooCoarse { cells, need: 8 });
    }
    Ok(GridFn::from_fn(geom, |z| {
        let s = EllipseDomain::elliptic_radius(z);
        Complex64::new(bridge((0.9 * eps - s) / (0.4 * eps)), 0.0)
    }))
}

/// Max of `|∇φ|` measured by forward differences on the grid.
pub fn max_gradient(f: &GridFn) -> f64 {
    let g = f.geom;
    let mut worst = 0.0f64;
    for iy in 0..g.ny - 1 {
        for ix in 0..g.nx - 1 {
            let i = iy * g.nx + ix;
            let gx = (f.vals[i + 1] - f.vals[i]).norm() / g.h;
            let gy = (f.vals[i + g.nx] - f.vals[i]).norm() / g.h;
            worst = worst.max((gx * gx + gy * gy).sqrt());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Cauchy-transform solver
// ---------------------------------------------------------------------------

/// `v(z) = -(1/π) Σ_cells w(ζ) h² / (ζ - z)`, the midpoint-rule Cauchy
/// transform. The cell containing `z` itself contributes zero (its
/// equal-area disk model integrates to zero by symmetry). Summation is
/// row-major over the support with compensated accumulation; evaluation
/// points are independent, so the result does not depend on how targets
/// are partitioned across workers.
pub fn solve_dbar_at(w: &GridFn, support: &[usize], targets: &[Complex64]) -> Vec<Complex64> {
    let geom = w.geom;
    let h2_over_pi = geom.h * geom.h / std::f64::consts::PI;
    let cells: Vec<(Complex64, Complex64)> =
        support.iter().map(|&i| (geom.z(i), w.vals[i])).collect();
    let near = 1e-9 * geom.h;
    worker_pool().install(|| {
        targets
            .par_iter()
            .map(|&z| {
                let mut re = KahanSum::new();
                let mut im = KahanSum::new();
                for &(zeta, wv) in &cells {
                    let d = zeta - z;
                    if d.norm_sqr() < near * near {
                        continue; // singular cell: zero contribution
                    }
                    let q = wv / d;
                    re.add(q.re);
                    im.add(q.im);
                }
                Complex64::new(-h2_over_pi * re.value(), -h2_over_pi * im.value())
            })
            .collect()
    })
}

/// Indices of nonzero cells (row-major order).
pub fn support_of(w: &GridFn) -> Vec<usize> {
    (0..w.vals.len()).filter(|&i| w.vals[i] != Complex64::default()).collect()
}

/// Measured operator bound of the transform on the given data:
/// `(sup |v| / sup |w|, support radius)`. The a-priori scale is
/// `(2/π)·R·(1 + log term)`; the measured constant grows with the support
/// radius.
pub fn transform_bound(w: &GridFn, support: &[usize], v: &[Complex64]) -> (f64, f64) {
    let sup_w = support.iter().map(|&i| w.vals[i].norm()).fold(0.0, f64::max);
    let sup_v = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let radius = support
        .iter()
        .map(|&i| w.geom.z(i).norm())
        .fold(0.0, f64::max);
    (if sup_w > 0.0 { sup_v / sup_w } else { 0.0 }, radius)
}

/// Full-grid Cauchy transform with the compact-support precondition: the
/// data must vanish within four cells of the box edge.
pub fn solve_dbar(w: &GridFn) -> Result<GridFn> {
    let g = w.geom;
    let support = support_of(w);
    for &i in &support {
        let ix = i % g.nx;
        let iy = i / g.nx;
        if ix < 4 || iy < 4 || ix + 4 >= g.nx || iy + 4 >= g.ny {
            return Err(Error::SupportTouchesEdge);
        }
    }
    let targets: Vec<Complex64> = (0..g.len()).map(|i| g.z(i)).collect();
    let vals = solve_dbar_at(w, &support, &targets);
    Ok(GridFn { geom: g, vals })
}
