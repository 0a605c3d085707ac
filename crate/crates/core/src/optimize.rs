// SPDX-License-Identifier: Apache-2.0

//! One-dimensional bracketing search.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A probed point of a search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub x: f64,
    pub value: f64,
}

/// Golden-section maximization of `f` on `[lo, hi]` until the bracket is
/// narrower than `tol`. Returns the best probe seen, which may be an endpoint
/// of the original interval when `f` is monotone there.
pub fn golden_section(f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let (best, _) = golden_section_traced(f, lo, hi, tol, max_iter);
    (best.x, best.value)
}

/// As [`golden_section`], also returning every probe in evaluation order.
/// The two endpoints are probed first.
pub fn golden_section_traced(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> (Probe, Vec<Probe>) {
    let mut trace = Vec::new();
    let mut probe = |x: f64, trace: &mut Vec<Probe>| {
        let value = f(x);
        trace.push(Probe { x, value });
        value
    };
    probe(lo, &mut trace);
    probe(hi, &mut trace);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = probe(c, &mut trace);
    let mut fd = probe(d, &mut trace);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = probe(c, &mut trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = probe(d, &mut trace);
        }
    }
    let best = trace
        .iter()
        .copied()
        .filter(|p| p.value.is_finite())
        .max_by(|p, q| p.value.total_cmp(&q.value))
        .unwrap_or(Probe { x: 0.5 * (lo + hi), value: f64::NAN });
    (best, trace)
}
