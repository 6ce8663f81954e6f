//! One-sided Lipschitz envelopes.
//!
//! `upper_rate_envelope(f, p)` is the largest `g <= f` whose increments obey
//! `g(y') - g(y) <= p (y' - y)` for `y < y'`; decreases are free. On PL data it
//! equals `inf_{y <= x} f(y) + p (x - y)` and is computed in one left-to-right
//! sweep: the envelope either sits on the graph of `f` or runs along a ray of
//! slope `p` cast from the last point of contact.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::pwl::{Node, PLFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub envelope: PLFunction,
    /// `input - envelope`, nonnegative.
    pub residual: PLFunction,
    /// Measure of `{envelope < input}`.
    pub contact_set_measure: f64,
}

struct Sweep {
    p: f64,
    nodes: Vec<Node>,
    g: f64,
    on: bool,
    below: f64,
}

impl Sweep {
    // Advances across an affine piece of `f` from (a, fa) to (b, fb).
    fn piece(&mut self, a: f64, fa: f64, b: f64, fb: f64) {
        let len = b - a;
        let s = (fb - fa) / len;
        if self.on {
            if s <= self.p {
                self.g = fb;
            } else {
                self.on = false;
                self.g = fa + self.p * len;
                self.below += len;
            }
            return;
        }
        let gap = fa - self.g;
        if s < self.p && gap < (self.p - s) * len {
            let xm = a + gap / (self.p - s);
            if xm > a && xm < b {
                let ym = fa + s * (xm - a);
                self.nodes.push(Node::new(xm, ym, ym));
            }
            self.below += (xm - a).max(0.0);
            self.on = true;
            self.g = fb;
        } else {
            self.g += self.p * len;
            self.below += len;
        }
    }

    // Applies the node at x whose right limit is fr, with the current value as left limit.
    fn node(&mut self, x: f64, fr: f64) {
        let gl = self.g;
        if fr <= gl {
            self.g = fr;
            self.on = true;
        } else {
            self.on = false;
        }
        self.nodes.push(Node::new(x, gl, self.g));
    }
}

pub fn upper_rate_envelope(f: &PLFunction, p: f64) -> Result<EnvelopeResult> {
    if !(p > 0.0 && p.is_finite()) {
        return domain(format!("envelope rate must be positive, got {p}"));
    }
    let ns = f.nodes();
    let mut sw = Sweep { p, nodes: Vec::with_capacity(2 * ns.len() + 1), g: 0.0, on: true, below: 0.0 };
    for (i, n) in ns.iter().enumerate() {
        if i > 0 {
            let prev = &ns[i - 1];
            sw.piece(prev.x, prev.right, n.x, n.left);
        }
        if sw.on {
            // contact: the left limit is exact
            sw.g = n.left;
        }
        sw.node(n.x, n.right);
    }
    if let Some(last) = ns.last() {
        let xe = last.x - sw.g / p;
        if xe > last.x {
            sw.below += xe - last.x;
            sw.nodes.push(Node::new(xe, 0.0, 0.0));
        }
    }
    let envelope = PLFunction::from_nodes_unchecked(sw.nodes).normalize();
    let residual = f.sub(&envelope);
    Ok(EnvelopeResult { envelope, residual, contact_set_measure: sw.below })
}

/// Largest minorant with `g(y') - g(y) >= -p (y' - y)`, obtained by reflection.
pub fn lower_rate_envelope(f: &PLFunction, p: f64) -> Result<EnvelopeResult> {
    let r = upper_rate_envelope(&f.reflect(), p)?;
    Ok(EnvelopeResult {
        envelope: r.envelope.reflect(),
        residual: r.residual.reflect(),
        contact_set_measure: r.contact_set_measure,
    })
}

/// Whether all slopes are at most `p` and no jump goes up, up to `tol`.
pub fn is_one_sided_lipschitz(f: &PLFunction, p: f64, tol: f64) -> bool {
    let scale = tol * f.linf_norm().max(1.0);
    f.nodes().iter().all(|n| n.jump() <= scale)
        && f.segments().all(|s| s.v1 - s.v0 <= p * s.len() + scale)
}
