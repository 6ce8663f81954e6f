//! Compactly supported piecewise-linear functions with jumps.
//!
//! A [`PLFunction`] is a finite list of nodes `x_0 < ... < x_n`, each carrying
//! a left and a right limit. Between consecutive nodes the function is affine
//! and outside `[x_0, x_n]` it vanishes, so the left limit at `x_0` and the
//! right limit at `x_n` are always zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance below which abscissas are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// One breakpoint with its one-sided limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

impl Node {
    pub fn new(x: f64, left: f64, right: f64) -> Self {
        Node { x, left, right }
    }

    pub fn jump(&self) -> f64 {
        self.right - self.left
    }
}

/// Which one-sided limit to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Closed interval `[lo, hi]`, also used for the open interval with the same ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Total length of a family of intervals, overlaps counted once.
pub fn union_measure(ivs: &[Interval]) -> f64 {
    merge_intervals(ivs).iter().map(Interval::len).sum()
}

/// Sorts and merges overlapping or touching intervals.
pub fn merge_intervals(ivs: &[Interval]) -> Vec<Interval> {
    let mut v: Vec<Interval> = ivs.iter().copied().filter(|iv| !iv.is_empty()).collect();
    v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// A compactly supported piecewise-linear function with jump discontinuities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPL")]
pub struct PLFunction {
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
struct RawPL {
    nodes: Vec<Node>,
}

impl TryFrom<RawPL> for PLFunction {
    type Error = Error;
    fn try_from(raw: RawPL) -> Result<Self> {
        PLFunction::new(raw.nodes)
    }
}

/// One affine piece `(x0, v0) -> (x1, v1)` between consecutive nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub v0: f64,
    pub x1: f64,
    pub v1: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn slope(&self) -> f64 {
        (self.v1 - self.v0) / (self.x1 - self.x0)
    }

    pub fn at(&self, x: f64) -> f64 {
        let d = self.x1 - self.x0;
        if d <= 0.0 {
            return self.v0;
        }
        let s = (x - self.x0) / d;
        self.v0 + (self.v1 - self.v0) * s
    }

    /// Exact integral of `|v|` over the segment.
    pub fn abs_integral(&self) -> f64 {
        let (a, b, d) = (self.v0, self.v1, self.len());
        if a * b >= 0.0 {
            0.5 * d * (a.abs() + b.abs())
        } else {
            0.5 * d * (a * a + b * b) / (a.abs() + b.abs())
        }
    }
}

impl PLFunction {
    /// Validates and wraps a node list.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        for n in &nodes {
            if !(n.x.is_finite() && n.left.is_finite() && n.right.is_finite()) {
                return Err(Error::Invalid(format!("non-finite node {n:?}")));
            }
        }
        for w in nodes.windows(2) {
            if w[1].x <= w[0].x {
                return Err(Error::Invalid(format!(
                    "nodes not strictly increasing at {} -> {}",
                    w[0].x, w[1].x
                )));
            }
        }
        if let (Some(f), Some(l)) = (nodes.first(), nodes.last()) {
            if f.left != 0.0 || l.right != 0.0 {
                return Err(Error::Invalid(
                    "outer limits must vanish (compact support)".into(),
                ));
            }
        }
        Ok(PLFunction { nodes })
    }

    /// Builds from nodes known to be valid; tails are forced to zero.
    pub(crate) fn from_nodes_unchecked(mut nodes: Vec<Node>) -> Self {
        if let Some(f) = nodes.first_mut() {
            f.left = 0.0;
        }
        if let Some(l) = nodes.last_mut() {
            l.right = 0.0;
        }
        debug_assert!(nodes.windows(2).all(|w| w[0].x < w[1].x), "{nodes:?}");
        PLFunction { nodes }
    }

    pub fn zero() -> Self {
        PLFunction { nodes: Vec::new() }
    }

    /// Continuous interpolant of `pts` on `[x_first, x_last]`, zero outside.
    /// Nonzero end values become jumps from or to zero.
    pub fn from_points(pts: &[(f64, f64)]) -> Result<Self> {
        let nodes = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let left = if i == 0 { 0.0 } else { y };
                let right = if i + 1 == pts.len() { 0.0 } else { y };
                Node::new(x, left, right)
            })
            .collect();
        PLFunction::new(nodes)
    }

    /// Symmetric triangle of width `ell` and height `h` starting at `x0`.
    pub fn triangle(x0: f64, ell: f64, h: f64) -> Self {
        PLFunction::from_points(&[(x0, 0.0), (x0 + 0.5 * ell, h), (x0 + ell, 0.0)])
            .expect("triangle parameters must be finite with ell > 0")
    }

    /// `h` times the indicator of `[a, b]`.
    pub fn boxcar(a: f64, b: f64, h: f64) -> Self {
        PLFunction::from_points(&[(a, h), (b, h)]).expect("boxcar needs a < b")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Node> {
        self.nodes
    }

    pub fn is_zero(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.left == 0.0 && n.right == 0.0)
    }

    /// `[x_first, x_last]`, or `None` for the empty representation.
    pub fn hull(&self) -> Option<Interval> {
        Some(Interval::new(self.nodes.first()?.x, self.nodes.last()?.x))
    }

    pub fn width(&self) -> f64 {
        self.hull().map_or(0.0, |iv| iv.len())
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.nodes.windows(2).map(|w| Segment {
            x0: w[0].x,
            v0: w[0].right,
            x1: w[1].x,
            v1: w[1].left,
        })
    }

    /// One-sided limit at `x`.
    pub fn eval(&self, x: f64, side: Side) -> f64 {
        let n = &self.nodes;
        if n.is_empty() || x < n[0].x || x > n[n.len() - 1].x {
            return 0.0;
        }
        // first node with node.x >= x
        let i = n.partition_point(|nd| nd.x < x);
        if i < n.len() && n[i].x == x {
            return match side {
                Side::Left => n[i].left,
                Side::Right => n[i].right,
            };
        }
        let (a, b) = (&n[i - 1], &n[i]);
        Segment { x0: a.x, v0: a.right, x1: b.x, v1: b.left }.at(x)
    }

    /// Average of the one-sided limits.
    pub fn value(&self, x: f64) -> f64 {
        0.5 * (self.eval(x, Side::Left) + self.eval(x, Side::Right))
    }

    pub fn total_variation(&self) -> f64 {
        let jumps: f64 = self.nodes.iter().map(|n| n.jump().abs()).sum();
        let slopes: f64 = self.segments().map(|s| (s.v1 - s.v0).abs()).sum();
        jumps + slopes
    }

    /// Variation on the open window `(lo, hi)`.
    pub fn total_variation_on(&self, window: Interval) -> f64 {
        let mut tv = 0.0;
        for n in &self.nodes {
            if window.contains(n.x) {
                tv += n.jump().abs();
            }
        }
        for s in self.segments() {
            let a = s.x0.max(window.lo);
            let b = s.x1.min(window.hi);
            if b > a {
                tv += s.slope().abs() * (b - a);
            }
        }
        tv
    }

    /// Sum of all upward increments.
    pub fn positive_variation(&self) -> f64 {
        let jumps: f64 = self.nodes.iter().map(|n| n.jump().max(0.0)).sum();
        let rises: f64 = self.segments().map(|s| (s.v1 - s.v0).max(0.0)).sum();
        jumps + rises
    }

    /// Sum of all downward increments, as a positive number.
    pub fn negative_variation(&self) -> f64 {
        let jumps: f64 = self.nodes.iter().map(|n| (-n.jump()).max(0.0)).sum();
        let falls: f64 = self.segments().map(|s| (s.v0 - s.v1).max(0.0)).sum();
        jumps + falls
    }

    pub fn integral(&self) -> f64 {
        self.segments().map(|s| 0.5 * s.len() * (s.v0 + s.v1)).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.segments().map(|s| s.abs_integral()).sum()
    }

    pub fn linf_norm(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.left.abs().max(n.right.abs()))
            .fold(0.0, f64::max)
    }

    /// Lebesgue measure of `{f != 0}`.
    pub fn support_measure(&self) -> f64 {
        self.segments()
            .filter(|s| s.v0 != 0.0 || s.v1 != 0.0)
            .map(|s| s.len())
            .sum()
    }

    /// Largest segment slope, `-inf` when there are no segments.
    pub fn max_slope(&self) -> f64 {
        self.segments().map(|s| s.slope()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest upward jump (0 when all jumps go down).
    pub fn max_upward_jump(&self) -> f64 {
        self.nodes.iter().map(|n| n.jump()).fold(0.0, f64::max)
    }

    /// Maximal open intervals of `{f != 0}`, left to right. A node where a
    /// one-sided limit vanishes or the sign flips separates components.
    pub fn nonzero_components(&self) -> Vec<Interval> {
        let n = &self.nodes;
        let mut out = Vec::new();
        let mut start: Option<f64> = None;
        for i in 0..n.len() {
            let nd = n[i];
            let sep = nd.left == 0.0 || nd.right == 0.0 || (nd.left > 0.0) != (nd.right > 0.0);
            if sep {
                if let Some(s) = start.take() {
                    out.push(Interval::new(s, nd.x));
                }
            }
            if i + 1 == n.len() {
                break;
            }
            let (a, b) = (nd.x, n[i + 1].x);
            let (v0, v1) = (nd.right, n[i + 1].left);
            if v0 == 0.0 && v1 == 0.0 {
                if let Some(s) = start.take() {
                    out.push(Interval::new(s, a));
                }
                continue;
            }
            if start.is_none() {
                start = Some(a);
            }
            if v0 * v1 < 0.0 {
                let r = a + (b - a) * v0 / (v0 - v1);
                out.push(Interval::new(start.unwrap(), r));
                start = Some(r);
            }
        }
        out
    }

    /// `max(f, 0)`, with exact roots inserted where segments cross zero.
    pub fn positive_part(&self) -> PLFunction {
        let mut nodes = Vec::with_capacity(self.nodes.len() * 2);
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                let p = &self.nodes[i - 1];
                let (v0, v1) = (p.right, n.left);
                if v0 * v1 < 0.0 {
                    let r = p.x + (n.x - p.x) * v0 / (v0 - v1);
                    if r > p.x && r < n.x {
                        nodes.push(Node::new(r, 0.0, 0.0));
                    }
                }
            }
            nodes.push(Node::new(n.x, n.left.max(0.0), n.right.max(0.0)));
        }
        PLFunction::from_nodes_unchecked(nodes).normalize()
    }

    /// `max(-f, 0)`.
    pub fn negative_part(&self) -> PLFunction {
        self.neg().positive_part()
    }

    /// `(integral |f|^p)^(1/p)` for `p >= 1`, exact on each segment.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let piece = |a: f64, b: f64, len: f64| -> f64 {
            // |f| runs linearly from a to b, both >= 0
            if (b - a).abs() <= 1e-14 * a.max(b) {
                len * a.powf(p)
            } else {
                len * (b.powf(p + 1.0) - a.powf(p + 1.0)) / ((p + 1.0) * (b - a))
            }
        };
        let total: f64 = self
            .segments()
            .map(|s| {
                if s.v0 * s.v1 < 0.0 {
                    let r = s.len() * s.v0 / (s.v0 - s.v1);
                    piece(s.v0.abs(), 0.0, r) + piece(0.0, s.v1.abs(), s.len() - r)
                } else {
                    piece(s.v0.abs(), s.v1.abs(), s.len())
                }
            })
            .sum();
        total.powf(1.0 / p)
    }

    /// Replaces `f` on each interval `(a, b)` by the affine function joining
    /// the left limit at `a` to the right limit at `b`.
    pub fn bridge(&self, ivs: &[Interval]) -> PLFunction {
        let ivs = merge_intervals(ivs);
        if ivs.is_empty() {
            return self.clone();
        }
        let mut nodes = Vec::with_capacity(self.nodes.len() + 2 * ivs.len());
        let mut k = 0;
        for n in &self.nodes {
            while k < ivs.len() && ivs[k].hi < n.x {
                let iv = ivs[k];
                let (va, vb) = (self.eval(iv.lo, Side::Left), self.eval(iv.hi, Side::Right));
                nodes.push(Node::new(iv.lo, va, va));
                nodes.push(Node::new(iv.hi, vb, vb));
                k += 1;
            }
            if k < ivs.len() && n.x >= ivs[k].lo {
                continue;
            }
            nodes.push(*n);
        }
        for iv in &ivs[k..] {
            let (va, vb) = (self.eval(iv.lo, Side::Left), self.eval(iv.hi, Side::Right));
            nodes.push(Node::new(iv.lo, va, va));
            nodes.push(Node::new(iv.hi, vb, vb));
        }
        PLFunction::from_nodes_unchecked(nodes).normalize()
    }

    /// `f` on the open interval `(lo, hi)`, zero elsewhere.
    pub fn restrict(&self, iv: Interval) -> PLFunction {
        if iv.is_empty() {
            return PLFunction::zero();
        }
        let mut nodes = vec![Node::new(iv.lo, 0.0, self.eval(iv.lo, Side::Right))];
        for n in &self.nodes {
            if iv.contains(n.x) {
                nodes.push(*n);
            }
        }
        nodes.push(Node::new(iv.hi, self.eval(iv.hi, Side::Left), 0.0));
        PLFunction::from_nodes_unchecked(nodes).normalize()
    }

    /// Pointwise sum.
    pub fn add(&self, other: &PLFunction) -> PLFunction {
        self.combine(other, 1.0)
    }

    /// Pointwise difference.
    pub fn sub(&self, other: &PLFunction) -> PLFunction {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &PLFunction, c: f64) -> PLFunction {
        if other.nodes.is_empty() {
            return self.clone();
        }
        if self.nodes.is_empty() {
            return other.scale_values(c);
        }
        let mut xs: Vec<f64> = self.nodes.iter().chain(other.nodes.iter()).map(|n| n.x).collect();
        xs.sort_by(f64::total_cmp);
        let lo = xs[0];
        let hi = xs[xs.len() - 1];
        let tol = MERGE_TOL * (hi - lo);
        let mut nodes = Vec::with_capacity(xs.len());
        let mut i = 0;
        while i < xs.len() {
            let mut j = i;
            while j + 1 < xs.len() && xs[j + 1] - xs[i] <= tol {
                j += 1;
            }
            let (a, b) = (xs[i], xs[j]);
            let left = self.eval(a, Side::Left) + c * other.eval(a, Side::Left);
            let right = self.eval(b, Side::Right) + c * other.eval(b, Side::Right);
            nodes.push(Node::new(a, left, right));
            i = j + 1;
        }
        PLFunction::from_nodes_unchecked(nodes).normalize()
    }

    /// `c * f`.
    pub fn scale_values(&self, c: f64) -> PLFunction {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node::new(n.x, c * n.left, c * n.right))
            .collect();
        PLFunction::from_nodes_unchecked(nodes)
    }

    /// Sets every one-sided value with `|v| <= tol` to zero.
    pub fn chop(&self, tol: f64) -> PLFunction {
        let z = |v: f64| if v.abs() <= tol { 0.0 } else { v };
        let nodes = self.nodes.iter().map(|n| Node::new(n.x, z(n.left), z(n.right))).collect();
        PLFunction::from_nodes_unchecked(nodes).normalize()
    }

    pub fn neg(&self) -> PLFunction {
        self.scale_values(-1.0)
    }

    /// `x -> mu^((1-alpha)/alpha) f(mu x)`, the scaling that preserves the
    /// interpolation norm of exponent `alpha`.
    pub fn rescale(&self, mu: f64, alpha: f64) -> PLFunction {
        let amp = mu.powf((1.0 - alpha) / alpha);
        self.dilate(mu, amp)
    }

    /// `x -> amp * f(mu x)` for `mu > 0`.
    pub fn dilate(&self, mu: f64, amp: f64) -> PLFunction {
        assert!(mu > 0.0, "dilation factor must be positive");
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node::new(n.x / mu, amp * n.left, amp * n.right))
            .collect();
        PLFunction::from_nodes_unchecked(nodes)
    }

    /// `x -> f(x - dx)`.
    pub fn shift(&self, dx: f64) -> PLFunction {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node::new(n.x + dx, n.left, n.right))
            .collect();
        PLFunction::from_nodes_unchecked(nodes)
    }

    /// `x -> f(-x)`.
    pub fn reflect(&self) -> PLFunction {
        let nodes = self
            .nodes
            .iter()
            .rev()
            .map(|n| Node::new(-n.x, n.right, n.left))
            .collect();
        PLFunction::from_nodes_unchecked(nodes)
    }

    /// Merges nodes closer than the merge tolerance and drops redundant ones.
    /// Repeats until nothing changes, so the result is a fixed point.
    pub fn normalize(&self) -> PLFunction {
        let mut cur = self.normalize_pass();
        loop {
            let next = cur.normalize_pass();
            if next.nodes.len() == cur.nodes.len() {
                return next;
            }
            cur = next;
        }
    }

    fn normalize_pass(&self) -> PLFunction {
        let n = &self.nodes;
        if n.is_empty() {
            return PLFunction::zero();
        }
        let tol = MERGE_TOL * self.width();
        let mut merged: Vec<Node> = Vec::with_capacity(n.len());
        for nd in n {
            match merged.last_mut() {
                Some(last) if nd.x - last.x <= tol => last.right = nd.right,
                _ => merged.push(*nd),
            }
        }
        let scale = self.linf_norm();
        let vtol = 1e-14 * scale;
        let mut kept: Vec<Node> = Vec::with_capacity(merged.len());
        for i in 0..merged.len() {
            let nd = merged[i];
            let redundant = if (nd.left - nd.right).abs() > vtol {
                false
            } else {
                match (kept.last(), merged.get(i + 1)) {
                    (Some(p), Some(q)) => {
                        let seg = Segment { x0: p.x, v0: p.right, x1: q.x, v1: q.left };
                        (seg.at(nd.x) - nd.left).abs() <= vtol
                    }
                    // outer nodes: redundant only if the adjacent piece is zero
                    (None, Some(q)) => nd.right == 0.0 && q.left == 0.0,
                    (Some(p), None) => nd.left == 0.0 && p.right == 0.0,
                    (None, None) => true,
                }
            };
            if !redundant {
                kept.push(nd);
            }
        }
        if kept.iter().all(|k| k.left == 0.0 && k.right == 0.0) {
            kept.clear();
        }
        PLFunction::from_nodes_unchecked(kept)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("PLFunction serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Continuous piecewise-quadratic function, constant outside its nodes.
///
/// On `[x_i, x_{i+1}]` the value is `v_i + b_i z + c_i z^2` with `z = x - x_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PWQuadratic {
    pub xs: Vec<f64>,
    pub vals: Vec<f64>,
    pub lin: Vec<f64>,
    pub quad: Vec<f64>,
}

impl PWQuadratic {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 0 {
            return 0.0;
        }
        if x <= self.xs[0] {
            return self.vals[0];
        }
        if x >= self.xs[n - 1] {
            return self.vals[n - 1];
        }
        let i = self.xs.partition_point(|&a| a <= x) - 1;
        let z = x - self.xs[i];
        self.vals[i] + z * (self.lin[i] + z * self.quad[i])
    }

    /// Largest mismatch between a piece's right end and the next node value.
    pub fn continuity_defect(&self) -> f64 {
        (0..self.lin.len())
            .map(|i| {
                let z = self.xs[i + 1] - self.xs[i];
                (self.vals[i] + z * (self.lin[i] + z * self.quad[i]) - self.vals[i + 1]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `U(x) = \int_{-inf}^x f`.
pub fn primitive(f: &PLFunction) -> PWQuadratic {
    let n = f.nodes();
    let mut q = PWQuadratic {
        xs: n.iter().map(|nd| nd.x).collect(),
        vals: Vec::with_capacity(n.len()),
        lin: Vec::new(),
        quad: Vec::new(),
    };
    let mut acc = 0.0;
    if !n.is_empty() {
        q.vals.push(0.0);
    }
    for s in f.segments() {
        q.lin.push(s.v0);
        q.quad.push(0.5 * s.slope());
        acc += 0.5 * s.len() * (s.v0 + s.v1);
        q.vals.push(acc);
    }
    q
}
