//! Fractional Sobolev seminorms, mollification and Hölder estimates.
//!
//! The seminorm is
//!
//! ```text
//! |u|_{alpha} = \int\int |u(x) - u(y)| / |x - y|^(1 + alpha) dx dy
//!             = 2 \int_0^inf omega(s) s^(-1-alpha) ds,   omega(s) = ||u(. + s) - u||_1.
//! ```
//!
//! For PL data `omega` is computed exactly for each `s`. Beyond the hull
//! width `W` the shifted copies are disjoint and `omega = 2 ||u||_1`. Below
//! `W` the linear part `TV s` is integrated in closed form, and the remainder
//! `omega(s) - TV s = O(s^2)` is integrated adaptively. Below the smallest
//! scale of the data the remainder is an exact multiple of `s^2`.
//!
//! The mollifier is the cosine bump `eta(s) = (1 + cos(pi s)) / 2` on
//! `[-1, 1]`. It is only C^1, but the estimates below use nothing beyond
//! symmetry, unit mass and `|eta'| <= pi/2`.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::pwl::PLFunction;

use std::f64::consts::PI;

/// Values above this are reported as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Grid refinement of [`mollify`]: samples per `h`.
pub const MOLLIFY_SAMPLES_PER_H: usize = 64;

/// `|eta'| <= pi / 2`.
pub const KERNEL_SLOPE: f64 = PI / 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mollifier {
    pub h: f64,
}

impl Mollifier {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return domain(format!("mollifier scale must be positive, got {h}"));
        }
        Ok(Mollifier { h })
    }

    /// Unscaled kernel.
    pub fn shape(s: f64) -> f64 {
        if s.abs() >= 1.0 {
            0.0
        } else {
            0.5 * (1.0 + (PI * s).cos())
        }
    }

    pub fn shape_deriv(s: f64) -> f64 {
        if s.abs() >= 1.0 {
            0.0
        } else {
            -0.5 * PI * (PI * s).sin()
        }
    }

    /// `eta_h(s) = eta(s / h) / h`.
    pub fn kernel(&self, s: f64) -> f64 {
        Self::shape(s / self.h) / self.h
    }

    /// Bound on `||u_h'||_1 / (|u|_alpha h^(alpha-1))` implied by `|eta'| <= pi/2`.
    pub fn derivative_constant(alpha: f64) -> f64 {
        KERNEL_SLOPE * 2f64.powf(alpha - 1.0)
    }

    // \int (c0 + c1 w) eta_h(w) dw, antiderivative in w.
    fn antiderivative(&self, c0: f64, c1: f64, w: f64) -> f64 {
        let h = self.h;
        let k = h / PI;
        let (sn, cs) = (w / k).sin_cos();
        (c0 * w + 0.5 * c1 * w * w + c0 * k * sn + c1 * (w * k * sn + k * k * cs)) / (2.0 * h)
    }

    /// `(u * eta_h)(x)`, exact.
    pub fn convolve_at(&self, u: &PLFunction, x: f64) -> f64 {
        let (lo, hi) = (x - self.h, x + self.h);
        let ns = u.nodes();
        let start = ns.partition_point(|n| n.x <= lo).saturating_sub(1);
        let mut acc = 0.0;
        for i in start..ns.len().saturating_sub(1) {
            let (a, b) = (&ns[i], &ns[i + 1]);
            if a.x >= hi {
                break;
            }
            let (ya, yb) = (a.x.max(lo), b.x.min(hi));
            if yb <= ya {
                continue;
            }
            let s = (b.left - a.right) / (b.x - a.x);
            // u(y) = c0 + s (y - x) on this piece
            let c0 = a.right + s * (x - a.x);
            acc += self.antiderivative(c0, s, yb - x) - self.antiderivative(c0, s, ya - x);
        }
        acc
    }
}

/// `omega(s) = ||u(. + s) - u||_1`.
pub fn l1_modulus(u: &PLFunction, s: f64) -> f64 {
    u.shift(-s).sub(u).l1_norm()
}

// Adaptive Simpson on [a, b].
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

// Largest s0 such that omega is exactly TV s + c s^2 on (0, s0): below the
// node spacing and below every s at which a jump is cancelled by a slope.
fn quadratic_scale(u: &PLFunction) -> f64 {
    let ns = u.nodes();
    let mut s0 = u.width();
    for w in ns.windows(2) {
        s0 = s0.min(w[1].x - w[0].x);
    }
    for (i, n) in ns.iter().enumerate() {
        let j = n.jump();
        if j == 0.0 {
            continue;
        }
        let slopes = [
            if i > 0 { (n.left - ns[i - 1].right) / (n.x - ns[i - 1].x) } else { 0.0 },
            if i + 1 < ns.len() { (ns[i + 1].left - n.right) / (ns[i + 1].x - n.x) } else { 0.0 },
        ];
        for sl in slopes {
            let r = -j / sl;
            if r > 0.0 && r.is_finite() {
                s0 = s0.min(r);
            }
        }
    }
    s0
}

/// `\int\int |u(x) - u(y)| / |x - y|^(1+alpha) dx dy` to relative accuracy `tol`.
/// Returns `+inf` when the value exceeds [`DIVERGENCE_LIMIT`].
pub fn w_alpha1_seminorm(u: &PLFunction, alpha: f64, tol: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    if u.is_zero() {
        return Ok(0.0);
    }
    let w = u.width();
    let tv = u.total_variation();
    let mass = u.l1_norm();
    let linear = tv * w.powf(1.0 - alpha) / (1.0 - alpha);
    let tail = 2.0 * mass * w.powf(-alpha) / alpha;
    let scale = linear + tail;

    let s0 = quadratic_scale(u);
    let rho = |s: f64| l1_modulus(u, s) - tv * s;
    let c2 = rho(0.5 * s0) / (0.25 * s0 * s0);
    let near = c2 * s0.powf(2.0 - alpha) / (2.0 - alpha);

    // dyadic pieces of [s0, W], from the top
    let mut pieces = Vec::new();
    let mut b = w;
    while b > s0 {
        let a = (0.5 * b).max(s0);
        pieces.push((a, b));
        b = a;
    }
    let budget = 0.1 * tol * scale / pieces.len().max(1) as f64;
    let mid: f64 = pieces
        .par_iter()
        .map(|&(a, b)| simpson(&|s: f64| rho(s) * s.powf(-1.0 - alpha), a, b, budget))
        .sum();
    let value = 2.0 * (linear + near + mid + tail);
    Ok(if value > DIVERGENCE_LIMIT { f64::INFINITY } else { value })
}

/// `u * eta_h` sampled with step `h / 64` over the `h`-enlarged hull and
/// interpolated linearly.
pub fn mollify(u: &PLFunction, h: f64) -> Result<PLFunction> {
    let m = Mollifier::new(h)?;
    let Some(hull) = u.hull() else {
        return Ok(PLFunction::zero());
    };
    let (lo, hi) = (hull.lo - h, hull.hi + h);
    let step = h / MOLLIFY_SAMPLES_PER_H as f64;
    let n = ((hi - lo) / step).ceil() as usize;
    let pts: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = if i == n { hi } else { lo + i as f64 * step };
            let v = if i == 0 || i == n { 0.0 } else { m.convolve_at(u, x) };
            (x, v)
        })
        .collect();
    Ok(PLFunction::from_points(&pts)?.normalize())
}

/// Lower estimate of `sup |u(x) - u(y)| / |x - y|^sigma`: node pairs and the
/// single-segment value `|s| len^(1-sigma)`. Infinite when `u` jumps.
pub fn holder_seminorm_estimate(u: &PLFunction, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return domain(format!("sigma must lie in (0, 1), got {sigma}"));
    }
    let ns = u.nodes();
    if ns.iter().any(|n| n.jump() != 0.0) {
        return Ok(f64::INFINITY);
    }
    let seg = u.segments().map(|s| s.slope().abs() * s.len().powf(1.0 - sigma)).fold(0.0, f64::max);
    let pairs = (0..ns.len())
        .into_par_iter()
        .map(|i| {
            let (xi, vi) = (ns[i].x, ns[i].left);
            ns[i + 1..]
                .iter()
                .map(|n| (n.left - vi).abs() / (n.x - xi).powf(sigma))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(seg.max(pairs))
}

/// Both mollifier estimates measured at one `h`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MollifierCheck {
    pub h: f64,
    pub seminorm: f64,
    /// `||u - u_h||_1`.
    pub approx_error: f64,
    /// `||u_h'||_1`.
    pub derivative_l1: f64,
    /// `||u_h'||_1 h^(1-alpha) / seminorm`.
    pub kernel_constant: f64,
}

impl MollifierCheck {
    pub fn approx_holds(&self, alpha: f64) -> bool {
        self.approx_error <= self.seminorm * self.h.powf(alpha) * (1.0 + 1e-6)
    }

    pub fn derivative_holds(&self, c: f64, alpha: f64) -> bool {
        self.derivative_l1 <= c * self.seminorm * self.h.powf(alpha - 1.0) * (1.0 + 1e-6)
    }
}

pub fn mollifier_check(u: &PLFunction, alpha: f64, h: f64, seminorm: f64) -> Result<MollifierCheck> {
    let uh = mollify(u, h)?;
    let approx_error = u.sub(&uh).l1_norm();
    let derivative_l1 = uh.total_variation();
    let kernel_constant = if seminorm > 0.0 { derivative_l1 * h.powf(1.0 - alpha) / seminorm } else { 0.0 };
    Ok(MollifierCheck { h, seminorm, approx_error, derivative_l1, kernel_constant })
}

/// `sup_t t^(-alpha) ||S_t u - u||_1` must not exceed
/// `(2 + C ||u||_inf) |u|_alpha` with `C` the kernel constant.
pub fn sobolev_decay_bound(u: &PLFunction, seminorm: f64, kernel_constant: f64) -> f64 {
    (2.0 + kernel_constant * u.linf_norm()) * seminorm
}

/// `||S_t u - u||_1 <= (4 ||u||_inf + ||u||_inf) C t^alpha` for a witness of
/// cost `C` at `lambda = t`.
pub fn palpha_decay_bound(u: &PLFunction, cost: f64, t: f64, alpha: f64) -> f64 {
    5.0 * u.linf_norm() * cost * t.powf(alpha)
}
