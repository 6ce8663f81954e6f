//! Splitting `u = sum_k v_k` into levels with
//!
//! ```text
//! TV(v_0) <= C,  TV(v_k) <= C 2^((1-alpha) k),  meas{v_k != 0} <= C 2^(-alpha k),
//! v_k(x2) - v_k(x1) <= 2^k (x2 - x1),
//! ```
//!
//! and each level further into bumps of width `ell` and height `2^k ell`.
//! The pipeline differences the witnesses of [`palpha_norm_upper`], peels
//! every difference with one-sided envelopes at rates `p_k^i` and regroups
//! the pieces along diagonals `k + i = q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelopes::{is_one_sided_lipschitz, lower_rate_envelope, upper_rate_envelope};
use crate::error::{domain, Error, Result};
use crate::palpha::{lean_witnesses, palpha_norm_upper, witness_cost, PAlphaEstimate};
use crate::pwl::{merge_intervals, Interval, PLFunction};

/// Relative tolerance used by the slope checks.
pub const SLOPE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub v: PLFunction,
    pub ell: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub k: u32,
    pub v: PLFunction,
    pub bumps: Vec<Bump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub alpha: f64,
    pub c: f64,
    pub levels: Vec<Level>,
    /// `||u - sum of levels||_1`.
    pub residual_l1: f64,
}

impl Decomposition {
    pub fn sum(&self) -> PLFunction {
        sum_all(self.levels.iter().map(|l| &l.v))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }
}

fn sum_all<'a>(fs: impl Iterator<Item = &'a PLFunction>) -> PLFunction {
    let mut parts: Vec<PLFunction> = fs.cloned().collect();
    // pairwise, so that node sets merge in balanced order
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|c| if c.len() == 2 { c[0].add(&c[1]) } else { c[0].clone() })
            .collect();
    }
    parts.pop().unwrap_or_default()
}

/// Witness functions `u_k` at `lambda = 2^-k`, `k <= K`, with bad sets renested
/// by union so that `{u != u_k}` shrinks with `k`. Returns `v_0 = u_0` and
/// `v_k = u_k - u_{k-1}`.
pub fn weak_decompose(estimate: &PAlphaEstimate, u: &PLFunction, k_max: u32) -> Result<Vec<PLFunction>> {
    let k_max = k_max as usize;
    if estimate.witnesses.len() <= k_max {
        return domain(format!(
            "estimate covers {} dyadic levels, {} requested",
            estimate.witnesses.len(),
            k_max + 1
        ));
    }
    let mut nested: Vec<Vec<Interval>> = vec![Vec::new(); k_max + 1];
    let mut acc: Vec<Interval> = Vec::new();
    for k in (0..=k_max).rev() {
        acc.extend_from_slice(&estimate.witnesses[k].bad_set);
        acc = merge_intervals(&acc);
        nested[k] = acc.clone();
    }
    let us: Vec<PLFunction> = nested.par_iter().map(|bad| u.bridge(bad)).collect();
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(us[0].clone());
    for k in 1..=k_max {
        out.push(us[k].sub(&us[k - 1]));
    }
    Ok(out)
}

/// `p_k^i = (6 / pi^2) 2^(k+i) / (i+2)^2`.
pub fn rate(k: u32, i: u32) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    6.0 / pi2 * 2f64.powi((k + i) as i32) / ((i + 2) * (i + 2)) as f64
}

/// Envelope chain of one level: pieces `v^i - w^i`, `i = 0..=i_max`, the
/// leftover `psi^+ - psi^-` and the roundoff chopped from the chain, so that
/// `v = sum pieces + leftover + dust`.
pub struct Peeled {
    pub pieces: Vec<PLFunction>,
    pub leftover: PLFunction,
    pub dust: PLFunction,
}

/// Relative size below which an envelope residual counts as roundoff.
pub const DUST: f64 = 1e-13;

/// Peels `v` with upper envelopes on its positive part and lower envelopes
/// on its negative part, at rates `p_k^0, ..., p_k^(i_max)`.
///
/// Residual values below `DUST * ||v||_inf` are set aside in `dust` so they
/// do not spread zero-height support over later pieces.
pub fn peel(v: &PLFunction, k: u32, i_max: u32) -> Peeled {
    let tol = DUST * v.linf_norm();
    let mut psi_pos = v.positive_part();
    let mut psi_neg = v.negative_part();
    let mut dust = PLFunction::zero();
    let mut pieces = Vec::with_capacity(i_max as usize + 1);
    for i in 0..=i_max {
        let p = rate(k, i);
        let up = upper_rate_envelope(&psi_pos, p).expect("rate is positive");
        let lo = lower_rate_envelope(&psi_neg, p).expect("rate is positive");
        pieces.push(up.envelope.sub(&lo.envelope));
        psi_pos = up.residual.chop(tol);
        psi_neg = lo.residual.chop(tol);
        dust = dust.add(&up.residual.sub(&psi_pos)).sub(&lo.residual.sub(&psi_neg));
    }
    Peeled { pieces, leftover: psi_pos.sub(&psi_neg), dust }
}

/// Regroups `v^i_k` into `tilde v_q = sum_{i+k=q} v^i_k`, `q = 0..=K+i_max`.
/// The second value is the total L1 mass left in the envelope chains.
pub fn strong_decompose(levels: &[PLFunction], alpha: f64, i_max: u32) -> Result<(Vec<PLFunction>, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if i_max < 1 {
        return domain("i_max must be at least 1");
    }
    let peeled: Vec<Peeled> = levels
        .par_iter()
        .enumerate()
        .map(|(k, v)| peel(v, k as u32, i_max))
        .collect();
    let leftover: f64 = peeled.iter().map(|p| p.leftover.l1_norm() + p.dust.l1_norm()).sum();
    let q_max = levels.len() - 1 + i_max as usize;
    let tilde: Vec<PLFunction> = (0..=q_max)
        .into_par_iter()
        .map(|q| {
            let terms = peeled
                .iter()
                .enumerate()
                .filter(|(k, _)| *k <= q && q - k <= i_max as usize)
                .map(|(k, p)| &p.pieces[q - k]);
            sum_all(terms)
        })
        .collect();
    Ok((tilde, leftover))
}

/// Restrictions of `v` to its nonzero components, each with `h = 2^k ell`.
/// With a constant `c`, the total width is also checked against `c 2^(-alpha k)`.
pub fn bump_split(v: &PLFunction, k: u32, c: Option<f64>, alpha: f64) -> Result<Vec<Bump>> {
    let p = 2f64.powi(k as i32);
    if !is_one_sided_lipschitz(v, p, SLOPE_TOL) {
        return Err(Error::Domain(format!(
            "level {k} is not one-sided {p}-Lipschitz (max slope {}, max upward jump {})",
            v.max_slope(),
            v.max_upward_jump()
        )));
    }
    let bumps: Vec<Bump> = v
        .nonzero_components()
        .into_iter()
        .map(|iv| {
            let ell = iv.len();
            Bump { v: v.restrict(iv), ell, h: p * ell }
        })
        .collect();
    debug_assert!(bumps.iter().all(|b| b.v.linf_norm() <= b.h * (1.0 + 1e-6) + 1e-12));
    if let Some(c) = c {
        let total: f64 = bumps.iter().map(|b| b.ell).sum();
        let cap = c * 2f64.powf(-alpha * k as f64);
        if total > cap * (1.0 + SLOPE_TOL) {
            return Err(Error::Domain(format!("level {k} bumps cover {total}, above {cap}")));
        }
    }
    Ok(bumps)
}

/// Per-level measurements and the constant each implies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub k: u32,
    pub tv: f64,
    pub support: f64,
    pub bump_length: f64,
    pub slope_ok: bool,
    pub heights_ok: bool,
    /// Smallest `C` making this level's bounds hold.
    pub c_needed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecReport {
    pub levels: Vec<LevelCheck>,
    pub smallest_c: f64,
    /// Levels whose bounds fail with the stored constant.
    pub violations: Vec<u32>,
    pub residual_measured: f64,
    pub residual_ok: bool,
}

impl DecReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.residual_ok
    }
}

/// Re-measures every level of `d` against `u`.
pub fn verify_theorem_dec(u: &PLFunction, d: &Decomposition) -> DecReport {
    let a = d.alpha;
    let levels: Vec<LevelCheck> = d
        .levels
        .par_iter()
        .map(|l| {
            let kf = l.k as f64;
            let p = 2f64.powf(kf);
            let tv = l.v.total_variation();
            let support = l.v.support_measure();
            let bump_length: f64 = l.bumps.iter().map(|b| b.ell).sum();
            let slope_ok = is_one_sided_lipschitz(&l.v, p, SLOPE_TOL)
                && l.bumps.iter().all(|b| is_one_sided_lipschitz(&b.v, p, SLOPE_TOL));
            let heights_ok = l
                .bumps
                .iter()
                .all(|b| (b.h - p * b.ell).abs() <= 1e-12 * b.h.max(1.0) && b.v.linf_norm() <= b.h * (1.0 + SLOPE_TOL));
            let c_needed = if l.k == 0 {
                tv
            } else {
                let scale = 2f64.powf(a * kf);
                (tv / 2f64.powf((1.0 - a) * kf)).max(support * scale).max(bump_length * scale)
            };
            LevelCheck { k: l.k, tv, support, bump_length, slope_ok, heights_ok, c_needed }
        })
        .collect();
    let smallest_c = levels.iter().map(|l| l.c_needed).fold(0.0, f64::max);
    let violations = levels
        .iter()
        .filter(|l| !l.slope_ok || !l.heights_ok || l.c_needed > d.c * (1.0 + 1e-9))
        .map(|l| l.k)
        .collect();
    let residual_measured = u.sub(&d.sum()).l1_norm();
    let residual_ok = residual_measured <= d.residual_l1 * (1.0 + 1e-9) + 1e-12;
    DecReport { levels, smallest_c, violations, residual_measured, residual_ok }
}

/// Full pipeline: witnesses up to `2^-K`, differencing, envelope peeling with
/// `i_max` layers, bump splitting. The stored constant is the smallest one the
/// produced levels satisfy.
pub fn decompose(u: &PLFunction, alpha: f64, k_max: u32, i_max: u32) -> Result<(Decomposition, PAlphaEstimate)> {
    let est = palpha_norm_upper(u, alpha, k_max)?;
    // any witness within the norm will do; smaller bad sets leave less behind at K
    let weak = weak_decompose(&lean_witnesses(&est, u), u, k_max)?;
    let (tilde, _) = strong_decompose(&weak, alpha, i_max)?;
    let levels = tilde
        .into_par_iter()
        .enumerate()
        .map(|(q, v)| {
            let bumps = bump_split(&v, q as u32, None, alpha)?;
            Ok(Level { k: q as u32, v, bumps })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut d = Decomposition { alpha, c: f64::INFINITY, levels, residual_l1: 0.0 };
    d.residual_l1 = u.sub(&d.sum()).l1_norm();
    d.c = verify_theorem_dec(u, &d).smallest_c;
    Ok((d, est))
}

/// Converse direction: at `lambda = 2^-q` keep the levels `k <= q` and
/// declare the supports of the others bad. Returns the largest cost over
/// `q = 0..=q_max`.
pub fn norm_from_decomposition(d: &Decomposition, q_max: u32) -> f64 {
    let a = d.alpha;
    let tvs: Vec<f64> = d.levels.iter().map(|l| l.v.total_variation()).collect();
    let supports: Vec<f64> = d.levels.iter().map(|l| l.v.support_measure()).collect();
    (0..=q_max)
        .map(|q| {
            let lambda = 0.5f64.powi(q as i32);
            let tv: f64 = tvs.iter().take(q as usize + 1).sum();
            let meas: f64 = supports.iter().skip(q as usize + 1).sum();
            witness_cost(tv, meas, lambda, a)
        })
        .fold(0.0, f64::max)
}

/// Geometric-sum constant bounding [`norm_from_decomposition`] by the level constant.
pub fn converse_factor(alpha: f64) -> f64 {
    8.0 / (1.0 - 2f64.powf(-alpha.min(1.0 - alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_schedule() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((rate(0, 0) - 6.0 / pi2 / 4.0).abs() < 1e-15);
        assert!((rate(3, 2) - 6.0 / pi2 * 32.0 / 16.0).abs() < 1e-14);
        // diagonal sums stay below 2^q
        for q in 0..30u32 {
            let s: f64 = (0..=q).map(|i| 2.0 * rate(q - i, i)).sum();
            assert!(s <= 2f64.powi(q as i32));
        }
    }

    #[test]
    fn bump_split_two_triangles() {
        let v = PLFunction::triangle(0.0, 1.0, 0.25).add(&PLFunction::triangle(2.0, 0.5, 0.1));
        let b = bump_split(&v, 0, Some(1.5), 0.5).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].ell, 1.0);
        assert_eq!(b[1].ell, 0.5);
        assert!(bump_split(&v, 0, Some(1.0), 0.5).is_err());
        let steep = PLFunction::triangle(0.0, 0.1, 1.0);
        assert!(matches!(bump_split(&steep, 2, None, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_decomposes_trivially() {
        let (d, _) = decompose(&PLFunction::zero(), 0.5, 4, 4).unwrap();
        assert_eq!(d.c, 0.0);
        assert!(verify_theorem_dec(&PLFunction::zero(), &d).passed());
    }
}
