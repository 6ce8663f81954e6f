//! Closed-form data whose entropy solutions are known exactly: the sawtooth,
//! single triangular blocks, packets of identical non-interacting blocks, the
//! packet superposition `hat_u` and the multiscale datum built from rescaled
//! copies of it.
//!
//! Packets hold `N_k = k^k` blocks, far too many to materialize beyond
//! `k = 7`, so their variation, support and decay are computed symbolically.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pwl::{Node, PLFunction};

/// Largest block count [`packet_materialize`] will expand.
pub const MATERIALIZE_LIMIT: f64 = 1e6;

/// `ceil(v)` that ignores representation error of about `1e-12` above an integer.
pub fn guarded_ceil(v: f64) -> i64 {
    (v - 1e-12 * v.abs().max(1.0)).ceil() as i64
}

/// Teeth on `(x_{n+1}, x_n)`, `x_n = n^-beta`, `n = 1..=n_max`, each rising
/// linearly from 0 to 1 and dropping back by a jump at `x_n`.
pub fn sawtooth(beta: f64, n_max: usize) -> Result<PLFunction> {
    if !(beta > 0.0) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    if n_max < 2 {
        return domain("n_max must be at least 2");
    }
    let x = |n: usize| (n as f64).powf(-beta);
    let mut nodes = Vec::with_capacity(n_max + 1);
    nodes.push(Node::new(x(n_max + 1), 0.0, 0.0));
    for n in (1..=n_max).rev() {
        nodes.push(Node::new(x(n), 1.0, 0.0));
    }
    PLFunction::new(nodes)
}

/// Predicted decay exponent of `TV(S_t u)` for the sawtooth.
pub fn sawtooth_decay_exponent(beta: f64) -> f64 {
    -(beta + 1.0) / (2.0 * beta + 1.0)
}

/// Intermediate-domain exponent of the sawtooth.
pub fn sawtooth_alpha(beta: f64) -> f64 {
    beta / (2.0 * beta + 1.0)
}

/// Symmetric triangle of width `ell`, height `h`, left end `x0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub ell: f64,
    pub h: f64,
    pub x0: f64,
}

impl Block {
    pub fn new(ell: f64, h: f64, x0: f64) -> Result<Self> {
        if !(ell > 0.0 && h > 0.0) {
            return domain(format!("block needs ell, h > 0, got ell={ell}, h={h}"));
        }
        Ok(Block { ell, h, x0 })
    }

    pub fn datum(&self) -> PLFunction {
        PLFunction::triangle(self.x0, self.ell, self.h)
    }

    /// Time at which the falling edge turns into a shock.
    pub fn shock_time(&self) -> f64 {
        self.ell / (2.0 * self.h)
    }

    /// Length of the right-triangle profile, `sqrt(ell (2 h t + ell) / 2)`.
    pub fn length(&self, t: f64) -> f64 {
        (self.ell * (2.0 * self.h * t + self.ell) / 2.0).sqrt()
    }

    /// Height of the profile, `h sqrt(2 ell / (2 h t + ell))`.
    pub fn peak(&self, t: f64) -> f64 {
        self.h * (2.0 * self.ell / (2.0 * self.h * t + self.ell)).sqrt()
    }

    /// `TV(S_t w)` for any `t >= 0`.
    pub fn tv(&self, t: f64) -> f64 {
        if t <= self.shock_time() {
            2.0 * self.h
        } else {
            2.0 * self.peak(t)
        }
    }
}

/// Post-shock solution of a block: profile, length and total variation.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSolution {
    pub profile: PLFunction,
    pub length: f64,
    pub tv: f64,
}

pub fn block_solution(b: &Block, t: f64) -> Result<BlockSolution> {
    if t < b.shock_time() {
        return domain(format!(
            "t = {t} precedes the shock time {}; use the exact solver",
            b.shock_time()
        ));
    }
    let length = b.length(t);
    let peak = b.peak(t);
    debug_assert!(peak >= (b.h * b.ell / (2.0 * t)).sqrt() * (1.0 - 1e-12));
    debug_assert!(length <= (2.0 * b.ell * b.h * t).sqrt() * (1.0 + 1e-12));
    let profile = PLFunction::new(vec![
        Node::new(b.x0, 0.0, 0.0),
        Node::new(b.x0 + length, peak, 0.0),
    ])?;
    Ok(BlockSolution { profile, length, tv: 2.0 * peak })
}

/// `N_k` identical blocks of width `ell_k` and height `h_k = 2^k ell_k`,
/// spaced `L_k` apart so that they do not interact before `t_design`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub k: u32,
    pub ell: f64,
    pub h: f64,
    /// Block count; a float because `k^k` overflows integers quickly.
    pub n: f64,
    pub spacing: f64,
    pub origin: f64,
    pub t_design: f64,
}

pub fn make_packet(k: u32, t_design: f64) -> Result<Packet> {
    if k < 1 {
        return domain("packet level must be at least 1");
    }
    let kf = k as f64;
    let ell = 0.5 * 2f64.powf(-kf / 2.0) * kf.powf(-kf);
    let h = 2f64.powi(k as i32) * ell;
    let shock = 0.5f64.powi(k as i32 + 1);
    if shock > t_design {
        return domain(format!("level {k} blocks need t_design >= {shock}, got {t_design}"));
    }
    Ok(Packet {
        k,
        ell,
        h,
        n: kf.powf(kf).round(),
        spacing: (2.0 * h * ell * t_design).sqrt(),
        origin: 0.0,
        t_design,
    })
}

// Packet totals in closed form: with h = 2^k ell and N ell = 2^(-k/2) / 2 none
// of them needs N or ell separately, which overflow and underflow past k ~ 140.
impl Packet {
    pub fn block(&self) -> Block {
        Block { ell: self.ell, h: self.h, x0: self.origin }
    }

    fn half_k(&self) -> f64 {
        2f64.powf(self.k as f64 / 2.0)
    }

    /// `TV(v_k) = 2 N_k h_k = 2^(k/2)`.
    pub fn tv0(&self) -> f64 {
        self.half_k()
    }

    /// `N_k ell_k = 2^(-k/2) / 2`.
    pub fn support_measure(&self) -> f64 {
        0.5 / self.half_k()
    }

    /// `N_k L_k = sqrt(t_design / 2)`, bounding the extent of the packet up to `t_design`.
    pub fn extent(&self) -> f64 {
        (0.5 * self.t_design).sqrt()
    }

    /// `TV(S_t v_k)` for `0 < t <= t_design`, where the blocks do not interact.
    pub fn tv_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= self.t_design * (1.0 + 1e-12)) {
            return domain(format!("t = {t} outside (0, t_design = {}]", self.t_design));
        }
        let shock = 0.5f64.powi(self.k as i32 + 1);
        Ok(if t <= shock {
            self.tv0()
        } else {
            self.tv0() * (2.0 / (2f64.powi(self.k as i32 + 1) * t + 1.0)).sqrt()
        })
    }

    /// Lower bound `sqrt(2) 2^(k/2) ell_k N_k / sqrt(t) = 1 / sqrt(2 t)` on the post-shock variation.
    pub fn tv_lower_bound(&self, t: f64) -> f64 {
        (0.5 / t).sqrt()
    }
}

/// `TV(S_t v_k) = 2 N_k p_k(t)` for `ell_k / (2 h_k) <= t <= t_design`.
pub fn packet_tv(pk: &Packet, t: f64) -> Result<f64> {
    let shock = 0.5f64.powi(pk.k as i32 + 1);
    if t < shock {
        return domain(format!("t = {t} precedes the blocks' shock time {shock}"));
    }
    pk.tv_at(t)
}

/// Explicit sum of the packet's translated blocks.
pub fn packet_materialize(pk: &Packet) -> Result<PLFunction> {
    if pk.n > MATERIALIZE_LIMIT {
        return Err(Error::Resource(format!(
            "packet k={} has {} blocks (limit {MATERIALIZE_LIMIT}); use the symbolic packet_tv / Packet::support_measure instead",
            pk.k, pk.n
        )));
    }
    let mut nodes = Vec::with_capacity(3 * pk.n as usize);
    append_packet_nodes(pk, &mut nodes);
    Ok(PLFunction::from_nodes_unchecked(nodes).normalize())
}

fn append_packet_nodes(pk: &Packet, nodes: &mut Vec<Node>) {
    for j in 0..pk.n as usize {
        let x0 = pk.origin + j as f64 * pk.spacing;
        let pts = [
            Node::new(x0, 0.0, 0.0),
            Node::new(x0 + 0.5 * pk.ell, pk.h, pk.h),
            Node::new(x0 + pk.ell, 0.0, 0.0),
        ];
        for p in pts {
            match nodes.last() {
                Some(last) if p.x <= last.x => {}
                _ => nodes.push(p),
            }
        }
    }
}

/// Packets `k1..=k2` laid side by side, built for the time horizon `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatU {
    pub t: f64,
    pub k1: u32,
    pub k2: u32,
    pub packets: Vec<Packet>,
}

pub fn hat_u(t: f64) -> Result<HatU> {
    if !(t > 0.0 && t < 1.0) {
        return domain(format!("t must lie in (0, 1), got {t}"));
    }
    let k1 = guarded_ceil((1.0 / t).log2()).max(1) as u32;
    let k2 = (k1 as i64 - 2 + guarded_ceil((2.0 / t).sqrt())).max(k1 as i64) as u32;
    let mut packets = Vec::with_capacity((k2 - k1 + 1) as usize);
    let mut origin = 0.0;
    for k in k1..=k2 {
        let mut pk = make_packet(k, t)?;
        pk.origin = origin;
        origin += pk.extent();
        packets.push(pk);
    }
    Ok(HatU { t, k1, k2, packets })
}

impl HatU {
    pub fn levels(&self) -> u32 {
        self.k2 - self.k1 + 1
    }

    /// Length of the interval holding the support, `sum N_k L_k`.
    pub fn support_length(&self) -> f64 {
        self.packets.iter().map(Packet::extent).sum()
    }

    /// `sqrt(t/2) (k2 - k1 + 1)`.
    pub fn support_bound(&self) -> f64 {
        (self.t / 2.0).sqrt() * self.levels() as f64
    }

    pub fn tv0(&self) -> f64 {
        self.packets.iter().map(Packet::tv0).sum()
    }

    pub fn support_measure(&self) -> f64 {
        self.packets.iter().map(Packet::support_measure).sum()
    }

    /// `TV(S_s hat_u)` for `0 < s <= t`.
    pub fn tv_at(&self, s: f64) -> Result<f64> {
        self.packets.iter().map(|p| p.tv_at(s)).sum()
    }

    /// `sqrt(1/(2t)) (k2 - k1 + 1)`.
    pub fn tv_lower_bound(&self) -> f64 {
        (0.5 / self.t).sqrt() * self.levels() as f64
    }

    /// Hölder constant bound `(e^(2^(1/(1-sigma))))^((1-sigma)/e)`.
    pub fn holder_bound(sigma: f64) -> f64 {
        let e = std::f64::consts::E;
        (2f64.powf(1.0 / (1.0 - sigma)) * (1.0 - sigma) / e).exp()
    }

    /// Largest Hölder quotient of one block of level `k`: a slope `2^(k+1)`
    /// edge of length `ell_k / 2`.
    pub fn block_holder(pk: &Packet, sigma: f64) -> f64 {
        let slope = 2.0 * pk.h / pk.ell;
        slope * (0.5 * pk.ell).powf(1.0 - sigma)
    }

    pub fn total_blocks(&self) -> f64 {
        self.packets.iter().map(|p| p.n).sum()
    }

    pub fn materialize(&self) -> Result<PLFunction> {
        if self.total_blocks() > MATERIALIZE_LIMIT {
            return Err(Error::Resource(format!(
                "hat_u at t={} has {} blocks (limit {MATERIALIZE_LIMIT}); use the symbolic methods",
                self.t,
                self.total_blocks()
            )));
        }
        let mut nodes = Vec::new();
        for pk in &self.packets {
            append_packet_nodes(pk, &mut nodes);
        }
        Ok(PLFunction::from_nodes_unchecked(nodes).normalize())
    }

    /// Witness for the interpolation norm with `alpha = 1/2` at `lambda`:
    /// drop every packet of level `>= kbar`, where
    /// `lambda` lies in `(2^-kbar, 2^(1-kbar)]`. Returns
    /// `(kbar, variation kept, measure removed)`.
    pub fn witness(&self, lambda: f64) -> (u32, f64, f64) {
        let kbar = ((1.0 / lambda).log2().floor() as i64 + 1).max(0) as u32;
        let mut tv = 0.0;
        let mut meas = 0.0;
        for pk in &self.packets {
            if pk.k < kbar {
                tv += pk.tv0();
            } else {
                meas += pk.support_measure();
            }
        }
        (kbar, tv, meas)
    }

    /// Smallest `C` certified by [`HatU::witness`] at `lambda`.
    pub fn witness_cost(&self, lambda: f64, alpha: f64) -> f64 {
        let (_, tv, meas) = self.witness(lambda);
        (tv / lambda.powf(alpha - 1.0)).max(meas / lambda.powf(alpha))
    }

    /// `max_q witness_cost(2^-q)` over `q = 0..=qmax`.
    pub fn norm_upper(&self, alpha: f64, qmax: u32) -> f64 {
        (0..=qmax)
            .map(|q| self.witness_cost(0.5f64.powi(q as i32), alpha))
            .fold(0.0, f64::max)
    }
}

/// One level `u_j(x) = 2^-j hat_u_j(2^j (x - x_j))` of the multiscale datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleLevel {
    pub j: u32,
    pub t: f64,
    pub x: f64,
    pub hat: HatU,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleDatum {
    pub levels: Vec<MultiscaleLevel>,
}

/// Default schedule `t_j = exp(-2^j)`.
pub fn default_schedule(levels: usize) -> Vec<f64> {
    (0..levels).map(|j| (-(2f64.powi(j as i32))).exp()).collect()
}

pub fn prop33_datum(levels: usize, t_schedule: &[f64]) -> Result<MultiscaleDatum> {
    if t_schedule.len() != levels {
        return domain(format!("schedule has {} times for {levels} levels", t_schedule.len()));
    }
    let mut out = Vec::with_capacity(levels);
    let mut x = 0.0;
    for (j, &t) in t_schedule.iter().enumerate() {
        let cap = 0.5f64.powi(j as i32);
        if !(t > 0.0 && t < cap) {
            return domain(format!("t_{j} = {t} must lie in (0, 2^-{j})"));
        }
        out.push(MultiscaleLevel { j: j as u32, t, x, hat: hat_u(t)? });
        x += 2.0 * cap;
    }
    Ok(MultiscaleDatum { levels: out })
}

impl MultiscaleDatum {
    /// `[x_j, x_j + 2^-j (1 + s)]`, holding the support of level `j` up to time `s`.
    pub fn level_window(&self, j: usize, s: f64) -> (f64, f64) {
        let lv = &self.levels[j];
        (lv.x, lv.x + 0.5f64.powi(lv.j as i32) * (1.0 + s))
    }

    /// `TV(S_{t_j} u_j) = 2^-j TV(S_{t_j} hat_u_j)`.
    pub fn level_tv(&self, j: usize) -> Result<f64> {
        let lv = &self.levels[j];
        Ok(0.5f64.powi(lv.j as i32) * lv.hat.tv_at(lv.t)?)
    }

    /// Lower bound on `TV(S_{t_j} u)`: levels `0..=j`, exact since they do not
    /// interact before `t_j`; finer levels are left out.
    pub fn tv_lower(&self, j: usize) -> Result<f64> {
        let tj = self.levels[j].t;
        let mut tv = 0.0;
        for lv in &self.levels[..=j] {
            tv += 0.5f64.powi(lv.j as i32) * lv.hat.tv_at(tj)?;
        }
        Ok(tv)
    }

    /// `t_j^beta TV(S_{t_j} u)` lower bounds along the schedule.
    pub fn blowup_series(&self, beta: f64) -> Result<Vec<f64>> {
        (0..self.levels.len())
            .map(|j| Ok(self.levels[j].t.powf(beta) * self.tv_lower(j)?))
            .collect()
    }

    /// Triangle-inequality bound `sum_j 2^-j ||hat_u_j||` on the interpolation
    /// norm, each term from the dyadic witnesses up to `2^-qmax`, inflated by
    /// the dyadic-to-continuum factor.
    pub fn norm_upper(&self, alpha: f64, qmax: u32) -> f64 {
        let factor = 2f64.powf(alpha.max(1.0 - alpha));
        self.levels
            .iter()
            .map(|lv| 0.5f64.powi(lv.j as i32) * factor * lv.hat.norm_upper(alpha, qmax))
            .sum()
    }

    /// Sum of the first levels that fit under the block limit, and their count.
    pub fn materialize_prefix(&self) -> (PLFunction, usize) {
        let mut acc = PLFunction::zero();
        let mut count = 0;
        for lv in &self.levels {
            let Ok(h) = lv.hat.materialize() else { break };
            let scale = 0.5f64.powi(lv.j as i32);
            acc = acc.add(&h.dilate(1.0 / scale, scale).shift(lv.x));
            count += 1;
        }
        (acc, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_small() {
        let f = sawtooth(1.0, 3).unwrap();
        let xs: Vec<f64> = f.nodes().iter().map(|n| n.x).collect();
        assert_eq!(xs, vec![0.25, 1.0 / 3.0, 0.5, 1.0]);
        assert_eq!(f.total_variation(), 6.0);
        assert_eq!(sawtooth_decay_exponent(1.0), -2.0 / 3.0);
        assert_eq!(sawtooth_alpha(1.0), 1.0 / 3.0);
    }

    #[test]
    fn block_closed_forms() {
        let b = Block::new(1.0, 1.0, 0.0).unwrap();
        let s = block_solution(&b, 1.0).unwrap();
        assert!((s.length - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((s.tv - 2.0 * (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let s = block_solution(&b, 0.5).unwrap();
        assert!((s.length - 1.0).abs() < 1e-15);
        assert!(block_solution(&b, 0.4).is_err());
    }

    #[test]
    fn packet_parameters() {
        let p = make_packet(3, 0.0625).unwrap();
        assert_eq!(p.n, 27.0);
        assert!((p.ell - 0.5 * 2f64.powf(-1.5) / 27.0).abs() < 1e-18);
        assert!((p.tv0() - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((p.support_measure() - 0.5 * 2f64.powf(-1.5)).abs() < 1e-15);
        assert!(p.spacing >= p.ell);
        assert!(make_packet(3, 0.01).is_err());
    }

    #[test]
    fn hat_u_indices() {
        let h = hat_u(2f64.powi(-6)).unwrap();
        assert_eq!((h.k1, h.k2), (6, 16));
        assert!(h.support_length() <= h.support_bound() * (1.0 + 1e-12));
        assert!(h.support_bound() <= 1.0);
    }

    #[test]
    fn materialize_guard() {
        let p = make_packet(8, 0.25).unwrap();
        assert!(matches!(packet_materialize(&p), Err(Error::Resource(_))));
    }

    #[test]
    fn schedule_validation() {
        assert!(prop33_datum(2, &[0.5, 0.6]).is_err());
        assert!(prop33_datum(3, &default_schedule(3)).is_ok());
    }
}
