//! Gauss rules from recurrence tables and composite rules for generalized
//! weights.
//!
//! A composite rule splits the interval at every singular point `c_j`. On each
//! piece a Gauss–Jacobi rule carries the endpoint factors `|x-c|^γ` in its
//! weight; the exponential factor and the singular factors sitting off the
//! piece are evaluated as part of the integrand. Unbounded intervals are cut at
//! a radius `R` chosen from the tail of the base family, and long pieces are
//! subdivided so the exponential varies by a bounded amount on each.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::linalg::{tridiag_eigen, SymTridiag};
use crate::orthopoly::{
    eval_orthonormal, recurrence_classical, Family, RecurrenceTable, WeightSpec,
};

/// Relative tail mass tolerated beyond the truncation radius.
pub const TAIL_TOLERANCE: f64 = 1e-17;
const MAX_RADIUS_DOUBLINGS: usize = 30;
/// Extra nodes per piece on top of the polynomial degree.
const PIECE_NODE_SLACK: usize = 16;
/// Largest change of the exponent `x` or `x²` allowed on one piece.
const EXPONENT_VARIATION: f64 = 4.0;

/// Positive quadrature rule for `∫ f w`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    exactness: i32,
    weight_id: String,
}

impl QuadRule {
    /// Checks that nodes increase strictly and weights are positive.
    pub fn new(
        nodes: Vec<f64>,
        weights: Vec<f64>,
        exactness: i32,
        weight_id: String,
    ) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "nodes must increase strictly".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-positive weight {w}")));
        }
        Ok(Self {
            nodes,
            weights,
            exactness,
            weight_id,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Polynomial degree integrated exactly, or -1 for tolerance-controlled rules.
    pub fn exactness(&self) -> i32 {
        self.exactness
    }

    pub fn weight_id(&self) -> &str {
        &self.weight_id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Multiplies every weight by `factor`; used by negative-control tests.
    pub fn perturbed(&self, factor: impl Fn(usize) -> f64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            weights: self
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * factor(i))
                .collect(),
            exactness: self.exactness,
            weight_id: self.weight_id.clone(),
        }
    }

    /// CSV export: two `#` header lines, a column header, one node per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# weight_id: {}\n", self.weight_id));
        out.push_str(&format!("# exactness: {}\n", self.exactness));
        out.push_str("node,weight\n");
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*w)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut weight_id = String::new();
        let mut exactness = None;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let bad = |line: &str| Error::InvalidArgument(format!("bad rule line `{line}`"));
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(id) = rest.strip_prefix("weight_id:") {
                    weight_id = id.trim().to_string();
                } else if let Some(e) = rest.strip_prefix("exactness:") {
                    exactness = Some(e.trim().parse::<i32>().map_err(|_| bad(line))?);
                }
                continue;
            }
            if line == "node,weight" {
                continue;
            }
            let (x, w) = line.split_once(',').ok_or_else(|| bad(line))?;
            nodes.push(x.trim().parse::<f64>().map_err(|_| bad(line))?);
            weights.push(w.trim().parse::<f64>().map_err(|_| bad(line))?);
        }
        let exactness =
            exactness.ok_or_else(|| Error::InvalidArgument("missing exactness header".into()))?;
        Self::new(nodes, weights, exactness, weight_id)
    }
}

/// `Σ w_i f(x_i)`.
pub fn integrate(rule: &QuadRule, f: impl Fn(f64) -> f64) -> f64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| w * f(x))
        .sum()
}

/// Golub–Welsch: the `m` nodes are the eigenvalues of the leading `m x m`
/// Jacobi matrix. Weights are the Christoffel numbers `1/Σ_{k<m} p_k(x_i)²`,
/// which equal `μ₀ z_i²` but keep full relative accuracy for the tiny
/// weights far out in the tails.
pub fn gauss_rule(rec: &RecurrenceTable, m: usize) -> Result<QuadRule> {
    gauss_rule_with_id(rec, m, String::new())
}

pub(crate) fn gauss_rule_with_id(rec: &RecurrenceTable, m: usize, id: String) -> Result<QuadRule> {
    if m == 0 || m > rec.n_max() {
        return Err(Error::InvalidArgument(format!(
            "Gauss rule with {m} nodes needs 1 <= m <= {}",
            rec.n_max()
        )));
    }
    let t = SymTridiag::new(rec.diag()[..m].to_vec(), rec.offdiag()[..m - 1].to_vec())?;
    let eig = tridiag_eigen(&t)?;
    let nodes = eig.values;
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let p = eval_orthonormal(rec, x, m - 1);
            1.0 / p.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    QuadRule::new(nodes, weights, (2 * m - 1) as i32, id)
}

/// Composite rule integrating `P·w` to rounding accuracy for polynomials `P`
/// of degree at most `degree`.
pub fn composite_rule(spec: &WeightSpec, degree: usize) -> Result<QuadRule> {
    composite_rule_refined(spec, degree, 0)
}

/// As [`composite_rule`], with `2^level` times the base node count per piece.
pub fn composite_rule_refined(spec: &WeightSpec, degree: usize, level: u32) -> Result<QuadRule> {
    if spec.classical_base().is_some() {
        let m = degree / 2 + 1;
        let rec = recurrence_classical(spec, m)?;
        return gauss_rule_with_id(&rec, m, spec.id());
    }

    let window = truncated_interval(spec, degree)?;
    composite_on_window(spec, degree, level, window)
}

/// Composite rule over an explicit finite window `[lo, hi]`.
pub(crate) fn composite_on_window(
    spec: &WeightSpec,
    degree: usize,
    level: u32,
    (lo, hi): (f64, f64),
) -> Result<QuadRule> {
    let factors = spec.factors();

    let mut breaks = vec![lo];
    breaks.extend(
        factors
            .iter()
            .map(|f| f.location)
            .filter(|&c| lo < c && c < hi),
    );
    breaks.push(hi);

    let per_piece = (degree + 1).div_ceil(2) + PIECE_NODE_SLACK;
    let m = per_piece
        .checked_shl(level)
        .filter(|m| *m <= 1 << 14)
        .ok_or_else(|| Error::QuadratureInsufficient("refinement level too deep".into()))?;

    let exponent_at = |x: f64| {
        factors
            .iter()
            .find(|f| f.location == x)
            .map_or(0.0, |f| f.exponent)
    };

    let mut cache = ReferenceRules::default();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for seg in breaks.windows(2) {
        let (l, r) = (seg[0], seg[1]);
        let pieces = subdivide(spec.family(), l, r);
        let last = pieces.len() - 1;
        for (i, &(u, v)) in pieces.iter().enumerate() {
            let left = if i == 0 { exponent_at(u) } else { 0.0 };
            let right = if i == last { exponent_at(v) } else { 0.0 };
            let (tnodes, tweights) = cache.get(right, left, m)?;
            let half = 0.5 * (v - u);
            let mid = 0.5 * (u + v);
            let jac = half.powf(left + right + 1.0);
            for (&t, &tw) in tnodes.iter().zip(tweights) {
                let x = mid + half * t;
                if !(x > u && x < v) {
                    continue;
                }
                let mut g = spec.scale() * spec.family().exponential(x);
                for f in &factors {
                    let absorbed = (i == 0 && f.location == u) || (i == last && f.location == v);
                    if !absorbed {
                        g *= (x - f.location).abs().powf(f.exponent);
                    }
                }
                let w = jac * tw * g;
                if w > 0.0 {
                    nodes.push(x);
                    weights.push(w);
                }
            }
        }
    }
    QuadRule::new(nodes, weights, -1, spec.id())
}

/// Nodes and weights of a cached rule.
type CachedRule = (Vec<f64>, Vec<f64>);

/// Gauss–Jacobi rules on `[-1,1]` keyed by exponents and node count.
#[derive(Default)]
struct ReferenceRules {
    rules: HashMap<(u64, u64, usize), CachedRule>,
}

impl ReferenceRules {
    fn get(&mut self, alpha: f64, beta: f64, m: usize) -> Result<(&[f64], &[f64])> {
        let key = (alpha.to_bits(), beta.to_bits(), m);
        if let Entry::Vacant(slot) = self.rules.entry(key) {
            let rec = recurrence_classical(&WeightSpec::jacobi(alpha, beta)?, m)?;
            let rule = gauss_rule(&rec, m)?;
            slot.insert((rule.nodes().to_vec(), rule.weights().to_vec()));
        }
        let (n, w) = &self.rules[&key];
        Ok((n, w))
    }
}

/// Finite integration window: the interval itself for Jacobi types, `[0,R]`
/// or `[-R,R]` otherwise with `R` doubled until the relative tail of the
/// highest moment falls below [`TAIL_TOLERANCE`].
pub fn truncated_interval(spec: &WeightSpec, degree: usize) -> Result<(f64, f64)> {
    let (a, b) = spec.interval();
    let factors = spec.factors();
    let growth: f64 = factors.iter().map(|f| f.exponent.max(0.0)).sum();
    let top = degree as f64 + growth;
    match spec.family() {
        Family::Jacobi | Family::GenJacobi => Ok((a, b)),
        Family::Laguerre | Family::GenLaguerre => {
            let last = factors.iter().map(|f| f.location.abs()).fold(0.0, f64::max);
            let mut radius = f64::max(10.0, 1.0 + last);
            for _ in 0..MAX_RADIUS_DOUBLINGS {
                if gamma_ur(top + 1.0, radius) < TAIL_TOLERANCE {
                    return Ok((0.0, radius));
                }
                radius *= 2.0;
            }
            Err(Error::QuadratureInsufficient(
                "tail mass beyond truncation radius too large".into(),
            ))
        }
        Family::Hermite | Family::GenHermite => {
            let far = factors.iter().map(|f| f.location.abs()).fold(0.0, f64::max);
            let mut radius = f64::max(6.0, 1.0 + far);
            for _ in 0..MAX_RADIUS_DOUBLINGS {
                if gamma_ur(0.5 * (top + 1.0), radius * radius) < TAIL_TOLERANCE {
                    return Ok((-radius, radius));
                }
                radius *= 2.0;
            }
            Err(Error::QuadratureInsufficient(
                "tail mass beyond truncation radius too large".into(),
            ))
        }
    }
}

/// Splits `[l,r]` so that the exponent of the base family changes by at most
/// [`EXPONENT_VARIATION`] on every piece.
fn subdivide(family: Family, l: f64, r: f64) -> Vec<(f64, f64)> {
    let variation = |u: f64, v: f64| -> f64 {
        match family {
            Family::Jacobi | Family::GenJacobi => 0.0,
            Family::Laguerre | Family::GenLaguerre => v - u,
            Family::Hermite | Family::GenHermite => {
                if u <= 0.0 && v >= 0.0 {
                    (u * u).max(v * v)
                } else {
                    (v * v - u * u).abs()
                }
            }
        }
    };
    let mut pieces = Vec::new();
    let mut u = l;
    let min_len = 1e-9 * (r - l);
    while u < r {
        let mut h = r - u;
        while variation(u, u + h) > EXPONENT_VARIATION && h > min_len {
            h *= 0.5;
        }
        let mut v = u + h;
        if r - v < 0.25 * h {
            v = r;
        }
        pieces.push((u, v));
        u = v;
    }
    pieces
}
