//! Entropy solutions of Burgers' equation `u_t + (u^2/2)_x = 0` on
//! piecewise-linear data, by exact minimization of the Lax functional
//! `y -> U(y) + (x - y)^2 / (2t)`.
//!
//! Minimizing over `y` for every `x` is the same as taking the lower envelope,
//! in `x`, of the quadratics `U(y) + (x-y)^2/(2t)`. Subtracting `x^2/(2t)`
//! turns each of them into an affine function of `x` with slope `-y/t`, so the
//! envelope is dual to the lower convex hull of `G(y) = U(y) + y^2/(2t)`.
//! `G` is quadratic on each data segment, so its hull is a chain of node
//! points, convex arcs and straight bridges. A bridge over `[y_l, y_r]` is a
//! shock, a node point with a range of supporting slopes is a rarefaction fan,
//! and an arc is a region of smooth characteristics. The hull is built by a
//! single left-to-right stack sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{domain, Result};
use crate::pwl::{primitive, Node, PLFunction, PWQuadratic, Side, MERGE_TOL};

/// Relative minimizer jump (in units of the support width) above which a
/// discontinuity of the solution is reported as a shock.
pub const SHOCK_TOL: f64 = 1e-10;

/// A discontinuity of `S_t u` with the feet of its two extreme characteristics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub x: f64,
    pub left: f64,
    pub right: f64,
    pub foot_left: f64,
    pub foot_right: f64,
}

/// A breakpoint of the minimizer map `x -> y*(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub x: f64,
    pub y_left: f64,
    pub y_right: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub t: f64,
    pub solution: PLFunction,
    pub shocks: Vec<Shock>,
    /// `y*` is affine between consecutive entries and equals `x` outside them.
    pub minimizer_map: Vec<MapNode>,
}

impl SolveResult {
    /// Foot of the backward characteristic through `(t, x)`.
    pub fn minimizer(&self, x: f64, side: Side) -> f64 {
        x - self.t * self.solution.eval(x, side)
    }

    /// True when `x` lies within `tol` of a reported shock.
    pub fn near_shock(&self, x: f64, tol: f64) -> bool {
        self.shocks.iter().any(|s| (s.x - x).abs() <= tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("SolveResult serializes")
    }
}

/// `U(x) = \int_{-inf}^x u0`.
pub fn potential(u0: &PLFunction) -> PWQuadratic {
    primitive(u0)
}

// One affine piece of the datum, tails included:
// u0(y) = a + s (y - o),  U(y) = big + a (y - o) + s (y - o)^2 / 2 on [lo, hi].
// `b` is the exact value at the far end.
#[derive(Clone, Copy, Debug)]
struct Seg {
    lo: f64,
    hi: f64,
    o: f64,
    big: f64,
    a: f64,
    b: f64,
    s: f64,
}

impl Seg {
    fn u(&self, y: f64) -> f64 {
        if y == self.o {
            self.a
        } else if y == self.hi && self.o == self.lo {
            self.b
        } else {
            self.a + self.s * (y - self.o)
        }
    }

    fn big_u(&self, y: f64) -> f64 {
        let z = y - self.o;
        self.big + z * (self.a + 0.5 * self.s * z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Arc(usize),
    Point(usize),
}

#[derive(Clone, Copy, Debug)]
struct Bridge {
    yl: f64,
    yr: f64,
    ul: f64,
    ur: f64,
}

// A contact piece of the hull. `u_in` is the state just left of `ya`.
#[derive(Clone, Copy, Debug)]
struct Piece {
    kind: Kind,
    ya: f64,
    yb: f64,
    u_in: f64,
    bridge_in: Option<Bridge>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Contact {
    Lo,
    Hi,
    Inner(f64),
}

struct Hull<'a> {
    segs: &'a [Seg],
    ys: &'a [f64],
    big: &'a [f64],
    t: f64,
    stack: Vec<Piece>,
}

// Local quadratic of a piece in the frame `w = y - c`:
// G(c + w) - (const) = q0 + q1 w + q2 w^2 / 2 on [wa, wb].
#[derive(Clone, Copy)]
struct Local {
    q0: f64,
    q1: f64,
    q2: f64,
    wa: f64,
    wb: f64,
    point: bool,
}

impl Local {
    // Support function h(m) = min_w (q(w) - m w) and where it is attained.
    fn h(&self, m: f64) -> (f64, Contact) {
        if self.point {
            return (self.q0 - m * self.wa, Contact::Lo);
        }
        let w = (m - self.q1) / self.q2;
        let (w, c) = if w <= self.wa {
            (self.wa, Contact::Lo)
        } else if w >= self.wb {
            (self.wb, Contact::Hi)
        } else {
            (w, Contact::Inner(w))
        };
        (self.q0 + w * (self.q1 + 0.5 * self.q2 * w) - m * w, c)
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        if self.point {
            return;
        }
        for w in [self.wa, self.wb] {
            if w.is_finite() {
                out.push(self.q1 + self.q2 * w);
            }
        }
    }

    fn value_at(&self, w: f64) -> f64 {
        if self.point {
            self.q0
        } else {
            self.q0 + w * (self.q1 + 0.5 * self.q2 * w)
        }
    }
}

impl<'a> Hull<'a> {
    // `uref` is subtracted from every value so that contiguous pieces cancel exactly.
    fn local(&self, p: &Piece, c: f64, uref: f64) -> Local {
        if p.ya == p.yb {
            let w = p.ya - c;
            let q0 = (self.big_at(p, p.ya) - uref) + w * w / (2.0 * self.t);
            return Local { q0, q1: 0.0, q2: 0.0, wa: w, wb: w, point: true };
        }
        match p.kind {
            Kind::Point(_) => unreachable!("points have ya == yb"),
            Kind::Arc(k) => {
                let sg = &self.segs[k];
                Local {
                    q0: self.big_at(p, c) - uref,
                    q1: sg.u(c),
                    q2: sg.s + 1.0 / self.t,
                    wa: p.ya - c,
                    wb: p.yb - c,
                    point: false,
                }
            }
        }
    }

    fn big_at(&self, p: &Piece, y: f64) -> f64 {
        match p.kind {
            Kind::Point(j) => self.big[j],
            Kind::Arc(k) => {
                let sg = &self.segs[k];
                if y == sg.lo && k > 0 {
                    self.big[k - 1]
                } else if y == sg.hi && k < self.ys.len() {
                    self.big[k]
                } else {
                    sg.big_u(y)
                }
            }
        }
    }

    // Lower common supporting line of `l` (left) and `r` (right).
    fn bridge(&self, l: &Piece, r: &Piece) -> (Bridge, Contact) {
        let c = r.ya;
        let uref = self.big_at(r, c);
        let ll = self.local(l, c, uref);
        let lr = self.local(r, c, uref);
        let phi = |m: f64| ll.h(m).0 - lr.h(m).0;
        let mut pts = Vec::with_capacity(5);
        ll.breakpoints(&mut pts);
        lr.breakpoints(&mut pts);
        let (wl_end, wr_start) = (ll.wb, lr.wa);
        if wr_start > wl_end {
            pts.push((lr.value_at(wr_start) - ll.value_at(wl_end)) / (wr_start - wl_end));
        }
        if pts.is_empty() {
            pts.push(0.0);
        }
        let mut lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut span = (hi - lo).max(1e-3 * (lo.abs() + hi.abs())).max(1e-300);
        let mut guard = 0;
        while phi(lo) > 0.0 && guard < 2100 {
            lo -= span;
            span *= 2.0;
            guard += 1;
        }
        let mut span = (hi - lo).max(1e-300);
        while phi(hi) < 0.0 && guard < 4200 {
            hi += span;
            span *= 2.0;
            guard += 1;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let m = 0.5 * (lo + hi);
        let (_, cl) = ll.h(m);
        let (_, cr) = lr.h(m);
        let pick = |p: &Piece, ct: Contact| match ct {
            Contact::Lo => p.ya,
            Contact::Hi => p.yb,
            Contact::Inner(w) => (c + w).clamp(p.ya, p.yb),
        };
        let yl = pick(l, cl);
        let yr = pick(r, cr);
        let dy = yr - yl;
        let t = self.t;
        let arc_u = |p: &Piece, y: f64| match p.kind {
            Kind::Arc(k) => self.segs[k].u(y),
            Kind::Point(_) => unreachable!("points have no inner contact"),
        };
        let l_inner = matches!(cl, Contact::Inner(_));
        let r_inner = matches!(cr, Contact::Inner(_));
        let (ul, ur) = if dy <= 0.0 {
            // degenerate: the two contacts coincide
            let u = if l_inner { arc_u(l, yl) } else if r_inner { arc_u(r, yr) } else { l.u_in };
            (u, u)
        } else if l_inner && r_inner {
            (arc_u(l, yl), arc_u(r, yr))
        } else if r_inner {
            let ur = arc_u(r, yr);
            (ur + dy / t, ur)
        } else if l_inner {
            let ul = arc_u(l, yl);
            (ul, ul - dy / t)
        } else {
            let mean = (self.big_at(r, yr) - self.big_at(l, yl)) / dy;
            (mean + 0.5 * dy / t, mean - 0.5 * dy / t)
        };
        (Bridge { yl, yr, ul, ur }, cl)
    }

    // Pushes `r` after popping every piece that stops being a hull vertex.
    fn push_general(&mut self, mut r: Piece) {
        while let Some(top) = self.stack.last().copied() {
            let (b, cl) = self.bridge(&top, &r);
            let at_start = top.ya == top.yb || cl == Contact::Lo;
            if at_start && b.ul <= top.u_in && self.stack.len() > 1 {
                self.stack.pop();
                continue;
            }
            let last = self.stack.last_mut().unwrap();
            if let Kind::Arc(_) = last.kind {
                last.yb = b.yl;
            }
            r.ya = b.yr;
            if let Kind::Point(_) = r.kind {
                r.yb = b.yr;
            }
            r.u_in = b.ur;
            r.bridge_in = Some(b);
            self.stack.push(r);
            return;
        }
        self.stack.push(r);
    }

    fn push_point(&mut self, j: usize) {
        let y = self.ys[j];
        if let Some(top) = self.stack.last() {
            if matches!(top.kind, Kind::Arc(_)) && top.yb == y {
                return;
            }
        }
        self.push_general(Piece { kind: Kind::Point(j), ya: y, yb: y, u_in: f64::NEG_INFINITY, bridge_in: None });
    }

    fn push_arc(&mut self, k: usize) {
        let sg = self.segs[k];
        let piece = Piece { kind: Kind::Arc(k), ya: sg.lo, yb: sg.hi, u_in: f64::NEG_INFINITY, bridge_in: None };
        let Some(top) = self.stack.last().copied() else {
            self.stack.push(piece);
            return;
        };
        let start = sg.a;
        match top.kind {
            Kind::Point(_) if top.yb == sg.lo => {
                self.stack.pop();
                if top.u_in <= start || self.stack.is_empty() {
                    self.stack.push(Piece { u_in: top.u_in, bridge_in: top.bridge_in, ..piece });
                } else {
                    self.push_general(piece);
                }
            }
            Kind::Arc(kk) if top.yb == sg.lo => {
                let u_left = if top.ya < top.yb { self.segs[kk].u(sg.lo) } else { top.u_in };
                if u_left <= start {
                    self.stack.push(Piece { u_in: u_left, ..piece });
                } else {
                    self.push_general(piece);
                }
            }
            _ => self.push_general(piece),
        }
    }
}

/// Exact entropy solution at time `t > 0`.
pub fn solve_burgers(u0: &PLFunction, t: f64) -> Result<SolveResult> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("time must be positive and finite, got {t}"));
    }
    let u0 = u0.normalize();
    let nodes = u0.nodes();
    if nodes.is_empty() {
        return Ok(SolveResult { t, solution: PLFunction::zero(), shocks: vec![], minimizer_map: vec![] });
    }
    let pot = potential(&u0);
    let ys: Vec<f64> = nodes.iter().map(|n| n.x).collect();
    let big = pot.vals.clone();
    let n = ys.len();
    let mut segs = Vec::with_capacity(n + 1);
    segs.push(Seg { lo: f64::NEG_INFINITY, hi: ys[0], o: ys[0], big: 0.0, a: 0.0, b: 0.0, s: 0.0 });
    for (i, s) in u0.segments().enumerate() {
        segs.push(Seg { lo: s.x0, hi: s.x1, o: s.x0, big: big[i], a: s.v0, b: s.v1, s: s.slope() });
    }
    segs.push(Seg { lo: ys[n - 1], hi: f64::INFINITY, o: ys[n - 1], big: big[n - 1], a: 0.0, b: 0.0, s: 0.0 });

    let mut hull = Hull { segs: &segs, ys: &ys, big: &big, t, stack: Vec::with_capacity(2 * n + 2) };
    hull.push_arc(0);
    for j in 0..n {
        hull.push_point(j);
        let k = j + 1;
        if segs[k].s * t > -1.0 {
            hull.push_arc(k);
        }
    }
    let pieces = hull.stack;
    Ok(assemble(&pieces, &segs, t, u0.width()))
}

// Walks the hull and emits the solution, its shocks and the minimizer map.
fn assemble(pieces: &[Piece], segs: &[Seg], t: f64, width: f64) -> SolveResult {
    struct V {
        x: f64,
        v: f64,
        shock: Option<Bridge>,
    }
    let mut verts: Vec<V> = Vec::with_capacity(3 * pieces.len());
    for (i, p) in pieces.iter().enumerate() {
        let next = pieces.get(i + 1);
        let next_bridge = next.and_then(|q| q.bridge_in);
        let entry_shock = p.bridge_in;
        let point_like = match p.kind {
            Kind::Point(_) => true,
            Kind::Arc(_) => p.ya == p.yb,
        };
        if point_like {
            let u_out = match next {
                Some(q) => q.bridge_in.map_or(q.u_in, |b| b.ul),
                None => p.u_in,
            };
            verts.push(V { x: p.ya + t * p.u_in, v: p.u_in, shock: entry_shock });
            if u_out > p.u_in {
                verts.push(V { x: p.ya + t * u_out, v: u_out, shock: None });
            }
            continue;
        }
        let Kind::Arc(k) = p.kind else { unreachable!() };
        let sg = &segs[k];
        let mut pending = entry_shock;
        if p.ya.is_finite() {
            let ua = sg.u(p.ya);
            if p.u_in.is_finite() {
                verts.push(V { x: p.ya + t * p.u_in, v: p.u_in, shock: pending.take() });
            }
            if !p.u_in.is_finite() || ua != p.u_in {
                verts.push(V { x: p.ya + t * ua, v: ua, shock: pending.take() });
            }
        }
        if p.yb.is_finite() {
            let ub = sg.u(p.yb);
            verts.push(V { x: p.yb + t * ub, v: ub, shock: pending.take() });
            if let Some(b) = next_bridge {
                if b.ul > ub {
                    verts.push(V { x: p.yb + t * b.ul, v: b.ul, shock: None });
                }
            }
        }
    }

    let shock_tol = SHOCK_TOL * width;
    let mut out: Vec<Node> = Vec::with_capacity(verts.len());
    let mut shocks = Vec::new();
    for v in &verts {
        match (v.shock, out.last_mut()) {
            (Some(b), Some(last)) => {
                let xs = 0.5 * (last.x + v.x);
                let vl = last.right;
                last.x = xs;
                last.right = v.v;
                if b.yr - b.yl > shock_tol {
                    shocks.push(Shock { x: xs, left: vl, right: v.v, foot_left: b.yl, foot_right: b.yr });
                }
            }
            (_, Some(last)) if v.x <= last.x => {
                last.right = v.v;
            }
            _ => out.push(Node::new(v.x, v.v, v.v)),
        }
    }
    // the right tail contributes a final zero state
    let tol = MERGE_TOL * width.max(f64::MIN_POSITIVE);
    let mut clean: Vec<Node> = Vec::with_capacity(out.len());
    for nd in out {
        match clean.last_mut() {
            Some(last) if nd.x - last.x <= tol => last.right = nd.right,
            _ => clean.push(nd),
        }
    }
    let solution = PLFunction::from_nodes_unchecked(clean).normalize();
    let minimizer_map = solution
        .nodes()
        .iter()
        .map(|nd| MapNode { x: nd.x, y_left: nd.x - t * nd.left, y_right: nd.x - t * nd.right })
        .collect();
    SolveResult { t, solution, shocks, minimizer_map }
}

/// Whether the couple `(x0, v)` survives up to time `t`: `x0` minimizes the
/// Lax functional at `x = x0 + v t`, i.e.
/// `\int_{x0}^y [u0(z) - v + (z - x0)/t] dz >= 0` for every `y`.
pub fn survives(u0: &PLFunction, x0: f64, v: f64, t: f64) -> bool {
    survival_margin(u0, x0, v, t) >= 0.0
}

/// Smallest value of the survival integral over `y`, shifted by a rounding
/// allowance so that exact survivors give a nonnegative result.
pub fn survival_margin(u0: &PLFunction, x0: f64, v: f64, t: f64) -> f64 {
    let pot = potential(u0);
    let ux0 = pot.eval(x0);
    // potential values carry absolute rounding of order eps ||u0||_1
    let floor = 1e-13 * (1.0 + u0.l1_norm());
    let f = |y: f64, big_y: f64| {
        let d = y - x0;
        let val = big_y - ux0 - v * d + d * d / (2.0 * t);
        let scale = big_y.abs() + ux0.abs() + (v * d).abs() + d * d / (2.0 * t);
        val + 1e-11 * scale + floor
    };
    // tails: F = U_tail - U(x0) - v d + d^2/2t with vertex at d = v t
    let mut best = f(x0, ux0);
    let nodes = u0.nodes();
    let mass = pot.vals.last().copied().unwrap_or(0.0);
    let vertex = x0 + v * t;
    match (nodes.first(), nodes.last()) {
        (Some(first), Some(last)) => {
            if vertex < first.x {
                best = best.min(f(vertex, 0.0));
            }
            if vertex > last.x {
                best = best.min(f(vertex, mass));
            }
        }
        _ => best = best.min(f(vertex, 0.0)),
    }
    for (i, s) in u0.segments().enumerate() {
        let big0 = pot.vals[i];
        best = best.min(f(s.x0, big0));
        best = best.min(f(s.x1, pot.vals[i + 1]));
        let sl = s.slope();
        let curv = sl + 1.0 / t;
        if curv > 0.0 {
            let z = (v - s.v0 - (s.x0 - x0) / t) / curv;
            if z > 0.0 && z < s.len() {
                let big_y = big0 + z * (s.v0 + 0.5 * sl * z);
                best = best.min(f(s.x0 + z, big_y));
            }
        }
    }
    best
}

/// Variation of `S_t u0` rebuilt from the couples that survive up to `t`,
/// enumerated from the one-sided limits at the solution's nodes.
pub fn traceback_tv(u0: &PLFunction, t: f64) -> Result<f64> {
    let res = solve_burgers(u0, t)?;
    let mut couples: Vec<(f64, f64)> = Vec::new();
    let mut xs = vec![(res.solution.hull().map_or(0.0, |h| h.lo) - 1.0, 0.0)];
    for nd in res.solution.nodes() {
        xs.push((nd.x, nd.left));
        xs.push((nd.x, nd.right));
    }
    xs.push((res.solution.hull().map_or(0.0, |h| h.hi) + 1.0, 0.0));
    for (x, v) in xs {
        let x0 = x - t * v;
        if survives(u0, x0, v, t) {
            couples.push((x0, v));
        }
    }
    // order by foot; at a common foot the values must increase
    couples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = 1e-9 * (u0.width() + t * u0.linf_norm());
    let mut i = 0;
    while i < couples.len() {
        let mut j = i + 1;
        while j < couples.len() && couples[j].0 - couples[i].0 <= tol {
            j += 1;
        }
        couples[i..j].sort_by(|a, b| a.1.total_cmp(&b.1));
        i = j;
    }
    Ok(couples.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum())
}

/// Sampled total-variation decay with its fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub alpha: f64,
    /// `(t, tv, t^(1-alpha) tv)`.
    pub samples: Vec<(f64, f64, f64)>,
    /// Least-squares slope of `ln tv` against `ln t`; NaN with fewer than two
    /// positive samples.
    pub fitted_exponent: f64,
}

impl DecayCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,tv,scaled\n");
        for (t, tv, sc) in &self.samples {
            s.push_str(&format!("{t},{tv},{sc}\n"));
        }
        s
    }

    pub fn max_scaled(&self) -> f64 {
        self.samples.iter().map(|s| s.2).fold(0.0, f64::max)
    }
}

/// Least-squares slope of `ln y` against `ln x` over pairs with `y > 0`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let lp: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if lp.len() < 2 {
        return f64::NAN;
    }
    let n = lp.len() as f64;
    let mx = lp.iter().map(|p| p.0).sum::<f64>() / n;
    let my = lp.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = lp.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = lp.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// `TV(S_t u0)` at each time in `times`, all of which must lie in `(0, 1]`.
pub fn tv_decay_curve(u0: &PLFunction, times: &[f64], alpha: f64) -> Result<DecayCurve> {
    if times.is_empty() {
        return domain("empty time list");
    }
    if let Some(bad) = times.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
        return domain(format!("time {bad} outside (0, 1]"));
    }
    let tvs: Vec<Result<f64>> = times
        .par_iter()
        .map(|&t| Ok(solve_burgers(u0, t)?.solution.total_variation()))
        .collect();
    let mut samples = Vec::with_capacity(times.len());
    for (&t, tv) in times.iter().zip(tvs) {
        let tv = tv?;
        samples.push((t, tv, t.powf(1.0 - alpha) * tv));
    }
    let fitted_exponent = loglog_slope(&samples.iter().map(|s| (s.0, s.1)).collect::<Vec<_>>());
    Ok(DecayCurve { alpha, samples, fitted_exponent })
}

/// Dyadic grid `2^-qmax, ..., 2^-qmin`, increasing.
pub fn dyadic_times(qmin: u32, qmax: u32) -> Vec<f64> {
    (qmin..=qmax).rev().map(|q| 0.5f64.powi(q as i32)).collect()
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A flux `f` with `f'' >= c > 0` on `range`.
#[derive(Clone)]
pub struct ConvexFlux {
    pub value: RealFn,
    pub derivative: RealFn,
    pub c: f64,
    pub range: (f64, f64),
}

impl std::fmt::Debug for ConvexFlux {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexFlux").field("c", &self.c).field("range", &self.range).finish()
    }
}

impl ConvexFlux {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: f64,
        range: (f64, f64),
    ) -> Self {
        ConvexFlux { value: Arc::new(value), derivative: Arc::new(derivative), c, range }
    }

    /// `u^2 / 2`.
    pub fn burgers() -> Self {
        ConvexFlux::new(|u| 0.5 * u * u, |u| u, 1.0, (-1e6, 1e6))
    }

    /// `u^4`, convex with `f'` strictly increasing but `f''(0) = 0`.
    pub fn quartic() -> Self {
        ConvexFlux::new(|u| u.powi(4), |u| 4.0 * u.powi(3), 0.0, (-1e3, 1e3))
    }

    /// Checks that `f'` strictly increases over `n` samples of `[lo, hi]`.
    pub fn check_on(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        if lo < self.range.0 || hi > self.range.1 {
            return domain(format!("data range [{lo}, {hi}] exceeds the flux range {:?}", self.range));
        }
        let n = n.max(2);
        let mut prev = (self.derivative)(lo);
        for i in 1..=n {
            let u = lo + (hi - lo) * i as f64 / n as f64;
            let d = (self.derivative)(u);
            if !(d > prev) {
                return domain(format!("flux derivative not increasing near u = {u}: f'' <= 0"));
            }
            prev = d;
        }
        Ok(())
    }
}

/// Tabulated Legendre transform of a convex flux restricted to `[umin, umax]`.
#[derive(Clone, Debug)]
pub struct LegendreTable {
    flux: ConvexFlux,
    pmin: f64,
    pmax: f64,
    umin: f64,
    umax: f64,
    g: Vec<f64>,
}

impl LegendreTable {
    pub fn new(flux: &ConvexFlux, umin: f64, umax: f64, n: usize) -> Result<Self> {
        flux.check_on(umin, umax, n)?;
        let n = n.max(2);
        let pmin = (flux.derivative)(umin);
        let pmax = (flux.derivative)(umax);
        let g = (0..=n)
            .map(|i| {
                let p = pmin + (pmax - pmin) * i as f64 / n as f64;
                let (mut a, mut b) = (umin, umax);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if (flux.derivative)(m) < p {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            })
            .collect();
        Ok(LegendreTable { flux: flux.clone(), pmin, pmax, umin, umax, g })
    }

    /// `(f*)'(p)`, the inverse of `f'`, clamped to the data range.
    pub fn conj_deriv(&self, p: f64) -> f64 {
        if p <= self.pmin {
            return self.umin;
        }
        if p >= self.pmax {
            return self.umax;
        }
        let n = self.g.len() - 1;
        let s = (p - self.pmin) / (self.pmax - self.pmin) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let f = s - i as f64;
        self.g[i] + f * (self.g[i + 1] - self.g[i])
    }

    /// `f*(p) = sup_u (p u - f(u))` over the data range.
    pub fn conj(&self, p: f64) -> f64 {
        let u = self.conj_deriv(p);
        p * u - (self.flux.value)(u)
    }
}

/// Hopf-Lax solution for a convex flux, sampled on `grid_n + 1` points.
/// Accuracy is first order in `1/grid_n`.
pub fn solve_convex_flux(u0: &PLFunction, flux: &ConvexFlux, t: f64, grid_n: usize) -> Result<PLFunction> {
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    if grid_n < 2 {
        return domain("grid_n must be at least 2");
    }
    let Some(hull) = u0.hull() else {
        return Ok(PLFunction::zero());
    };
    let umin = u0.nodes().iter().map(|n| n.left.min(n.right)).fold(0.0, f64::min);
    let umax = u0.nodes().iter().map(|n| n.left.max(n.right)).fold(0.0, f64::max);
    if umax - umin <= 0.0 {
        return Ok(PLFunction::zero());
    }
    let table = LegendreTable::new(flux, umin, umax, 4 * grid_n)?;
    let pot = potential(u0);
    let (pmin, pmax) = (table.pmin, table.pmax);
    let span = hull.len() + t * (pmax - pmin);
    let xlo = hull.lo + t * pmin - 0.05 * span;
    let xhi = hull.hi + t * pmax + 0.05 * span;
    let lax = |x: f64, y: f64| pot.eval(y) + t * table.conj((x - y) / t);
    let pts: Vec<(f64, f64)> = (0..=grid_n)
        .into_par_iter()
        .map(|i| {
            let x = xlo + (xhi - xlo) * i as f64 / grid_n as f64;
            let (ya, yb) = (x - t * pmax, x - t * pmin);
            let m = grid_n.max(16);
            let dy = (yb - ya) / m as f64;
            let mut best = (f64::INFINITY, ya);
            for k in 0..=m {
                let y = ya + dy * k as f64;
                let v = lax(x, y);
                if v < best.0 {
                    best = (v, y);
                }
            }
            for nd in u0.nodes() {
                if nd.x >= ya && nd.x <= yb {
                    let v = lax(x, nd.x);
                    if v < best.0 {
                        best = (v, nd.x);
                    }
                }
            }
            let y = golden_min(|y| lax(x, y), (best.1 - dy).max(ya), (best.1 + dy).min(yb), best);
            (x, table.conj_deriv((x - y) / t))
        })
        .collect();
    Ok(PLFunction::from_points(&pts)?.normalize())
}

// Golden-section search on [a, b], never returning worse than `seed`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, seed: (f64, f64)) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let y = 0.5 * (a + b);
    if f(y) <= seed.0 {
        y
    } else {
        seed.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn block_at_unit_time() {
        let r = solve_burgers(&PLFunction::triangle(0.0, 1.0, 1.0), 1.0).unwrap();
        let s = &r.solution;
        assert!(close(s.total_variation(), 2.0 * (2.0f64 / 3.0).sqrt(), 1e-12));
        assert_eq!(r.shocks.len(), 1);
        assert!(close(r.shocks[0].x, 1.5f64.sqrt(), 1e-12));
        assert!(close(s.eval(0.6, Side::Left), 2.0 * 0.6 / 3.0, 1e-12));
    }

    #[test]
    fn decreasing_step_single_shock() {
        let u0 = PLFunction::boxcar(-4.0, 0.0, 1.0);
        let r = solve_burgers(&u0, 2.0).unwrap();
        assert_eq!(r.shocks.len(), 1);
        assert!(close(r.shocks[0].x, 1.0, 1e-12));
        assert_eq!(r.shocks[0].left, 1.0);
        assert_eq!(r.shocks[0].right, 0.0);
    }

    #[test]
    fn zero_and_bad_time() {
        assert!(solve_burgers(&PLFunction::zero(), 0.3).unwrap().solution.is_zero());
        assert!(solve_burgers(&PLFunction::zero(), 0.0).is_err());
        assert!(solve_burgers(&PLFunction::zero(), -1.0).is_err());
    }

    #[test]
    fn potential_examples() {
        let p = potential(&PLFunction::triangle(0.0, 1.0, 1.0));
        assert_eq!(p.eval(10.0), 0.5);
        assert!(potential(&PLFunction::zero()).xs.is_empty());
        let b = potential(&PLFunction::boxcar(0.0, 1.0, 1.0));
        assert_eq!(b.eval(0.25), 0.25);
        assert_eq!(b.eval(-3.0), 0.0);
        assert_eq!(b.eval(3.0), 1.0);
    }

    #[test]
    fn survival_of_step() {
        let u0 = PLFunction::boxcar(-4.0, 0.0, 1.0);
        assert!(!survives(&u0, 0.0, 1.0, 1.0));
        assert!(survives(&u0, -1.0, 1.0, 1.0));
        let blk = PLFunction::triangle(0.0, 1.0, 1.0);
        assert!(survives(&blk, 0.2, 0.4, 0.1));
    }

    #[test]
    fn legendre_identity_burgers() {
        let tab = LegendreTable::new(&ConvexFlux::burgers(), -2.0, 2.0, 4096).unwrap();
        for i in 0..100 {
            let u = -2.0 + 4.0 * i as f64 / 99.0;
            assert!((tab.conj_deriv(u) - u).abs() < 1e-6);
        }
    }

    #[test]
    fn nonconvex_flux_rejected() {
        let f = ConvexFlux::new(|u| u.powi(3), |u| 3.0 * u * u, 1.0, (-10.0, 10.0));
        let u0 = PLFunction::triangle(-1.0, 1.0, -1.0).add(&PLFunction::triangle(0.5, 1.0, 1.0));
        assert!(solve_convex_flux(&u0, &f, 0.1, 64).is_err());
    }

    #[test]
    fn loglog_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..8).map(|k| (k as f64, (k as f64).powf(-0.7))).collect();
        assert!((loglog_slope(&pts) + 0.7).abs() < 1e-12);
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 0.0)]).is_nan());
    }
}
