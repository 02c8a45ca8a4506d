//! Weights and their orthonormal polynomials.
//!
//! A [`WeightSpec`] describes a classical or generalized Jacobi, Laguerre or
//! Hermite weight. Its orthonormal polynomials `p_k` (positive leading
//! coefficient) satisfy
//!
//! ```text
//! x p_k = b_k p_{k+1} + a_k p_k + b_{k-1} p_{k-1},    p_0 = 1/√μ₀,
//! ```
//!
//! and a [`RecurrenceTable`] stores `a_k`, `b_k` and `μ₀ = ∫w`. Classical
//! families use closed forms; everything else goes through a discretized
//! Stieltjes procedure on a composite quadrature rule.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadRule};

/// Weight family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Jacobi,
    Laguerre,
    Hermite,
    GenJacobi,
    GenLaguerre,
    GenHermite,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Jacobi => "jacobi",
            Family::Laguerre => "laguerre",
            Family::Hermite => "hermite",
            Family::GenJacobi => "gen_jacobi",
            Family::GenLaguerre => "gen_laguerre",
            Family::GenHermite => "gen_hermite",
        }
    }

    pub fn is_generalized(self) -> bool {
        matches!(
            self,
            Family::GenJacobi | Family::GenLaguerre | Family::GenHermite
        )
    }

    /// Smooth factor multiplying the algebraic part of the weight.
    pub(crate) fn exponential(self, x: f64) -> f64 {
        match self {
            Family::Jacobi | Family::GenJacobi => 1.0,
            Family::Laguerre | Family::GenLaguerre => (-x).exp(),
            Family::Hermite | Family::GenHermite => (-x * x).exp(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A factor `|x - location|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    pub location: f64,
    pub exponent: f64,
}

impl Singularity {
    pub fn new(location: f64, exponent: f64) -> Self {
        Self { location, exponent }
    }
}

/// Interval endpoint as written in JSON: a number or `"inf"` / `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Text(String),
}

impl Bound {
    fn parse(&self) -> Result<f64> {
        match self {
            Bound::Number(x) => Ok(*x),
            Bound::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidWeight(format!("bad interval endpoint `{s}`"))),
            },
        }
    }

    fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            Bound::Text("inf".into())
        } else if x == f64::NEG_INFINITY {
            Bound::Text("-inf".into())
        } else {
            Bound::Number(x)
        }
    }
}

/// Weight description in its JSON form, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWeight {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[Bound; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singularities: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// Validated weight.
///
/// * `jacobi`: `(b-x)^alpha (x-a)^beta` on a finite `[a,b]`.
/// * `laguerre`: `x^alpha e^{-x}` on `[0,∞)`.
/// * `hermite`: `e^{-x²}` on ℝ.
/// * `gen_jacobi`: `(b-x)^alpha (x-a)^beta ∏|x-c_j|^{γ_j}` on a finite `[a,b]`.
/// * `gen_laguerre`: `x^alpha ∏|x-c_j|^{γ_j} e^{-x}` on `[0,∞)`.
/// * `gen_hermite`: `|x|^alpha ∏|x-c_j|^{γ_j} e^{-x²}` on ℝ.
///
/// Every weight is multiplied by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeight", into = "RawWeight")]
pub struct WeightSpec {
    family: Family,
    interval: (f64, f64),
    alpha: f64,
    beta: f64,
    singularities: Vec<Singularity>,
    scale: f64,
}

impl TryFrom<RawWeight> for WeightSpec {
    type Error = Error;

    fn try_from(raw: RawWeight) -> Result<Self> {
        make_weight(raw)
    }
}

impl From<WeightSpec> for RawWeight {
    fn from(w: WeightSpec) -> Self {
        RawWeight {
            family: w.family,
            interval: Some([Bound::from_f64(w.interval.0), Bound::from_f64(w.interval.1)]),
            alpha: Some(w.alpha),
            beta: Some(w.beta),
            singularities: Some(
                w.singularities
                    .iter()
                    .map(|s| (s.location, s.exponent))
                    .collect(),
            ),
            scale: Some(w.scale),
        }
    }
}

fn default_interval(family: Family) -> (f64, f64) {
    match family {
        Family::Jacobi | Family::GenJacobi => (-1.0, 1.0),
        Family::Laguerre | Family::GenLaguerre => (0.0, f64::INFINITY),
        Family::Hermite | Family::GenHermite => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// Validates a raw weight description.
pub fn make_weight(raw: RawWeight) -> Result<WeightSpec> {
    let family = raw.family;
    let interval = match &raw.interval {
        Some([lo, hi]) => (lo.parse()?, hi.parse()?),
        None => default_interval(family),
    };
    let (a, b) = interval;
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::InvalidWeight(format!("empty interval [{a}, {b}]")));
    }
    let alpha = raw.alpha.unwrap_or(0.0);
    let beta = raw.beta.unwrap_or(0.0);
    let scale = raw.scale.unwrap_or(1.0);
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidWeight("alpha and beta must be finite".into()));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidWeight(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let singularities: Vec<Singularity> = raw
        .singularities
        .unwrap_or_default()
        .into_iter()
        .map(|(c, g)| Singularity::new(c, g))
        .collect();

    match family {
        Family::Jacobi | Family::GenJacobi => {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidWeight(format!(
                    "{family} weight needs a finite interval"
                )));
            }
        }
        Family::Laguerre | Family::GenLaguerre => {
            if a != 0.0 || b != f64::INFINITY {
                return Err(Error::InvalidWeight(format!(
                    "{family} weight lives on [0, inf)"
                )));
            }
        }
        Family::Hermite | Family::GenHermite => {
            if a != f64::NEG_INFINITY || b != f64::INFINITY {
                return Err(Error::InvalidWeight(format!(
                    "{family} weight lives on (-inf, inf)"
                )));
            }
        }
    }

    match family {
        Family::Jacobi | Family::Laguerre | Family::GenJacobi | Family::GenLaguerre => {
            if alpha <= -1.0 || beta <= -1.0 {
                return Err(Error::InvalidWeight(
                    "non-integrable endpoint singularity".into(),
                ));
            }
        }
        Family::Hermite => {
            if alpha != 0.0 {
                return Err(Error::InvalidWeight(
                    "hermite takes no alpha; use gen_hermite".into(),
                ));
            }
        }
        Family::GenHermite => {
            if alpha < 0.0 {
                return Err(Error::InvalidWeight(format!(
                    "gen_hermite needs alpha >= 0, got {alpha}"
                )));
            }
        }
    }
    if matches!(
        family,
        Family::Laguerre | Family::Hermite | Family::GenHermite
    ) && beta != 0.0
    {
        return Err(Error::InvalidWeight(format!("{family} takes no beta")));
    }

    if !family.is_generalized() && !singularities.is_empty() {
        return Err(Error::InvalidWeight(format!(
            "{family} takes no singularities; use gen_{family}"
        )));
    }
    for s in &singularities {
        if !s.location.is_finite() || !s.exponent.is_finite() {
            return Err(Error::InvalidWeight("singularities must be finite".into()));
        }
        let inside = a <= s.location && s.location <= b;
        if inside && s.exponent <= -1.0 {
            return Err(Error::InvalidWeight(format!(
                "non-integrable singularity |x - {}|^{}",
                s.location, s.exponent
            )));
        }
    }
    if singularities
        .windows(2)
        .any(|w| w[0].location >= w[1].location)
    {
        return Err(Error::InvalidWeight(
            "singularity locations must be strictly increasing".into(),
        ));
    }

    let spec = WeightSpec {
        family,
        interval,
        alpha,
        beta,
        singularities,
        scale,
    };
    for f in spec.factors() {
        if f.exponent <= -1.0 && a <= f.location && f.location <= b {
            return Err(Error::InvalidWeight(format!(
                "non-integrable combined exponent {} at {}",
                f.exponent, f.location
            )));
        }
    }
    match family {
        Family::GenHermite => {
            let total: f64 = spec.factors().iter().map(|f| f.exponent).sum();
            if total < 0.0 {
                return Err(Error::InvalidWeight(format!(
                    "gen_hermite needs a nonnegative exponent sum, got {total}"
                )));
            }
        }
        Family::GenLaguerre => {
            let gammas: Vec<f64> = spec.singularities.iter().map(|s| s.exponent).collect();
            if let Some((_, head)) = gammas.split_last() {
                let head_sum: f64 = head.iter().sum();
                let total: f64 = gammas.iter().sum();
                if head_sum.abs() > 1e-12 && total <= -1.0 {
                    return Err(Error::InvalidWeight(format!(
                        "gen_laguerre needs either zero exponent sum before the last \
                         singularity or a total exponent sum above -1 (got {head_sum}, {total})"
                    )));
                }
            }
        }
        _ => {}
    }
    Ok(spec)
}

/// Closed-form families recognized after merging endpoint factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ClassicalBase {
    /// `(b-x)^alpha (x-a)^beta` on `[a,b]`.
    Jacobi {
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
    },
    /// `x^alpha e^{-x}`.
    Laguerre { alpha: f64 },
    /// `|x|^mu e^{-x²}`.
    GenHermite { mu: f64 },
}

impl WeightSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawWeight = serde_json::from_str(text)
            .map_err(|e| Error::InvalidWeight(format!("cannot parse weight JSON: {e}")))?;
        make_weight(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weight serialization cannot fail")
    }

    /// `(1-x)^alpha (1+x)^beta` on `[-1,1]`.
    pub fn jacobi(alpha: f64, beta: f64) -> Result<Self> {
        Self::jacobi_on(-1.0, 1.0, alpha, beta)
    }

    pub fn jacobi_on(a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        make_weight(RawWeight {
            family: Family::Jacobi,
            interval: Some([Bound::Number(a), Bound::Number(b)]),
            alpha: Some(alpha),
            beta: Some(beta),
            singularities: None,
            scale: None,
        })
    }

    pub fn legendre() -> Self {
        Self::jacobi(0.0, 0.0).expect("legendre is valid")
    }

    pub fn chebyshev1() -> Self {
        Self::jacobi(-0.5, -0.5).expect("chebyshev is valid")
    }

    pub fn laguerre(alpha: f64) -> Result<Self> {
        make_weight(RawWeight {
            family: Family::Laguerre,
            interval: None,
            alpha: Some(alpha),
            beta: None,
            singularities: None,
            scale: None,
        })
    }

    pub fn hermite() -> Self {
        make_weight(RawWeight {
            family: Family::Hermite,
            interval: None,
            alpha: None,
            beta: None,
            singularities: None,
            scale: None,
        })
        .expect("hermite is valid")
    }

    /// `|x|^alpha e^{-x²}`.
    pub fn gen_hermite(alpha: f64) -> Result<Self> {
        Self::generalized(Family::GenHermite, None, alpha, 0.0, &[])
    }

    /// Generalized weight with explicit singular factors `(c_j, γ_j)`.
    pub fn generalized(
        family: Family,
        interval: Option<(f64, f64)>,
        alpha: f64,
        beta: f64,
        singularities: &[(f64, f64)],
    ) -> Result<Self> {
        if !family.is_generalized() {
            return Err(Error::InvalidWeight(format!(
                "{family} is not a generalized family"
            )));
        }
        make_weight(RawWeight {
            family,
            interval: interval.map(|(a, b)| [Bound::from_f64(a), Bound::from_f64(b)]),
            alpha: Some(alpha),
            beta: Some(beta),
            singularities: Some(singularities.to_vec()),
            scale: None,
        })
    }

    /// Named presets: `legendre`, `chebyshev1`, `laguerre0`, `hermite`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "legendre" => Some(Self::legendre()),
            "chebyshev1" => Some(Self::chebyshev1()),
            "laguerre0" | "laguerre" => Some(Self::laguerre(0.0).expect("valid")),
            "hermite" => Some(Self::hermite()),
            _ => None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidWeight(format!(
                "scale must be positive, got {scale}"
            )));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Every algebraic factor `|x-c|^γ` of the weight, endpoint exponents
    /// included, merged by location, sorted, zero exponents dropped.
    pub fn factors(&self) -> Vec<Singularity> {
        let (a, b) = self.interval;
        let mut all = self.singularities.clone();
        match self.family {
            Family::Jacobi | Family::GenJacobi => {
                all.push(Singularity::new(b, self.alpha));
                all.push(Singularity::new(a, self.beta));
            }
            Family::Laguerre | Family::GenLaguerre | Family::GenHermite => {
                all.push(Singularity::new(0.0, self.alpha));
            }
            Family::Hermite => {}
        }
        all.sort_by(|x, y| x.location.total_cmp(&y.location));
        let mut merged: Vec<Singularity> = Vec::with_capacity(all.len());
        for s in all {
            match merged.last_mut() {
                Some(last) if last.location == s.location => last.exponent += s.exponent,
                _ => merged.push(s),
            }
        }
        merged.retain(|s| s.exponent != 0.0);
        merged
    }

    /// Weight density at `x` (zero outside the interval).
    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.interval;
        if x < a || x > b {
            return 0.0;
        }
        let algebraic: f64 = self
            .factors()
            .iter()
            .map(|f| (x - f.location).abs().powf(f.exponent))
            .product();
        self.scale * algebraic * self.family.exponential(x)
    }

    pub(crate) fn classical_base(&self) -> Option<ClassicalBase> {
        let (a, b) = self.interval;
        let factors = self.factors();
        let exponent_at = |c: f64| {
            factors
                .iter()
                .find(|f| f.location == c)
                .map_or(0.0, |f| f.exponent)
        };
        match self.family {
            Family::Jacobi | Family::GenJacobi => factors
                .iter()
                .all(|f| f.location == a || f.location == b)
                .then(|| ClassicalBase::Jacobi {
                    a,
                    b,
                    alpha: exponent_at(b),
                    beta: exponent_at(a),
                }),
            Family::Laguerre | Family::GenLaguerre => factors
                .iter()
                .all(|f| f.location == 0.0)
                .then(|| ClassicalBase::Laguerre {
                    alpha: exponent_at(0.0),
                }),
            Family::Hermite | Family::GenHermite => {
                factors
                    .iter()
                    .all(|f| f.location == 0.0)
                    .then(|| ClassicalBase::GenHermite {
                        mu: exponent_at(0.0),
                    })
            }
        }
    }

    /// True when the weight is symmetric about the origin.
    pub fn is_symmetric(&self) -> bool {
        let (a, b) = self.interval;
        if a != -b {
            return false;
        }
        let factors = self.factors();
        factors.iter().all(|f| {
            factors
                .iter()
                .any(|g| g.location == -f.location && g.exponent == f.exponent)
        })
    }

    /// Short human-readable identifier used in rule exports and reports.
    pub fn id(&self) -> String {
        self.to_json()
    }
}

/// Three-term recurrence of the orthonormal polynomials of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceTable {
    n_max: usize,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    mass: f64,
}

impl RecurrenceTable {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>, mass: f64) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "recurrence with {} diagonal and {} off-diagonal coefficients",
                diag.len(),
                offdiag.len()
            )));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if let Some(b) = offdiag.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "off-diagonal coefficient {b} is not positive"
            )));
        }
        Ok(Self {
            n_max: diag.len() - 1,
            diag,
            offdiag,
            mass,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `a_0 … a_{n_max}`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `b_0 … b_{n_max-1}`.
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Same polynomials' recurrence for the weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mass: self.mass * c,
            ..self.clone()
        }
    }

    /// Leading part up to degree `n`.
    pub fn truncated(&self, n: usize) -> Self {
        assert!(n <= self.n_max);
        Self {
            n_max: n,
            diag: self.diag[..=n].to_vec(),
            offdiag: self.offdiag[..n].to_vec(),
            mass: self.mass,
        }
    }
}

/// Closed-form recurrence for Jacobi, Laguerre, Hermite and `|x|^μ e^{-x²}`
/// weights (generalized specs whose factors all sit at the classical points
/// qualify as well).
pub fn recurrence_classical(spec: &WeightSpec, n: usize) -> Result<RecurrenceTable> {
    let base = spec
        .classical_base()
        .ok_or_else(|| Error::UnsupportedFamily(spec.family().to_string()))?;
    let mut diag = Vec::with_capacity(n + 1);
    let mut offdiag = Vec::with_capacity(n);
    let mass = match base {
        ClassicalBase::Jacobi { a, b, alpha, beta } => {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let ab = alpha + beta;
            for k in 0..=n {
                let kf = k as f64;
                let ak = if k == 0 {
                    (beta - alpha) / (ab + 2.0)
                } else {
                    (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
                };
                diag.push(mid + half * ak);
            }
            for k in 0..n {
                let kf = k as f64;
                let bk = if k == 0 {
                    2.0 / (ab + 2.0) * ((alpha + 1.0) * (beta + 1.0) / (ab + 3.0)).sqrt()
                } else {
                    let t = 2.0 * kf + ab;
                    2.0 / (t + 2.0)
                        * ((kf + 1.0) * (kf + alpha + 1.0) * (kf + beta + 1.0) * (kf + ab + 1.0)
                            / ((t + 1.0) * (t + 3.0)))
                            .sqrt()
                };
                offdiag.push(half * bk);
            }
            (2.0 * half).powf(ab + 1.0) * gamma_ratio(&[alpha + 1.0, beta + 1.0], &[ab + 2.0])
        }
        ClassicalBase::Laguerre { alpha } => {
            for k in 0..=n {
                diag.push(2.0 * k as f64 + alpha + 1.0);
            }
            for k in 0..n {
                let kf = k as f64;
                offdiag.push(((kf + 1.0) * (kf + alpha + 1.0)).sqrt());
            }
            gamma_ratio(&[alpha + 1.0], &[])
        }
        ClassicalBase::GenHermite { mu } => {
            diag.resize(n + 1, 0.0);
            for k in 0..n {
                // b_k² = (k+1)/2 when k+1 is even, (k+1+μ)/2 when odd
                let next = (k + 1) as f64;
                let b2 = if (k + 1) % 2 == 0 {
                    next / 2.0
                } else {
                    (next + mu) / 2.0
                };
                offdiag.push(b2.sqrt());
            }
            gamma_ratio(&[0.5 * (mu + 1.0)], &[])
        }
    };
    RecurrenceTable::new(diag, offdiag, mass * spec.scale())
}

/// `∏Γ(num) / ∏Γ(den)`, directly while the factors stay finite and through
/// log-Γ beyond that.
fn gamma_ratio(num: &[f64], den: &[f64]) -> f64 {
    if num.iter().chain(den).all(|&x| x < 170.0) {
        let top: f64 = num.iter().map(|&x| gamma_fn(x)).product();
        let bottom: f64 = den.iter().map(|&x| gamma_fn(x)).product();
        return top / bottom;
    }
    let log: f64 = num.iter().map(|&x| ln_gamma(x)).sum::<f64>()
        - den.iter().map(|&x| ln_gamma(x)).sum::<f64>();
    log.exp()
}

/// Γ exact to rounding at positive integers and half-integers, where the
/// library routine is off by a few ulps.
fn gamma_fn(x: f64) -> f64 {
    let twice = 2.0 * x;
    if x > 0.0 && twice.fract() == 0.0 && x < 170.0 {
        let (mut value, mut t) = if x.fract() == 0.0 {
            (1.0, 1.0)
        } else {
            (std::f64::consts::PI.sqrt(), 0.5)
        };
        while t < x {
            value *= t;
            t += 1.0;
        }
        return value;
    }
    gamma(x)
}

/// Discretized Stieltjes procedure: recurrence coefficients of the discrete
/// measure carried by `rule`.
pub fn recurrence_stieltjes(rule: &QuadRule, n: usize) -> Result<RecurrenceTable> {
    let nodes = rule.nodes();
    let weights = rule.weights();
    if nodes.len() < n + 1 {
        return Err(Error::QuadratureInsufficient(format!(
            "rule with {} nodes cannot resolve degree {n}",
            nodes.len()
        )));
    }
    let mass: f64 = weights.iter().sum();
    let spread = nodes
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let mut prev = vec![0.0; nodes.len()];
    let mut cur = vec![1.0 / mass.sqrt(); nodes.len()];
    let mut diag = Vec::with_capacity(n + 1);
    let mut offdiag = Vec::with_capacity(n);
    for k in 0..=n {
        let ak: f64 = (0..nodes.len())
            .map(|i| weights[i] * nodes[i] * cur[i] * cur[i])
            .sum();
        if k == n {
            diag.push(ak);
            break;
        }
        let bprev = if k > 0 { offdiag[k - 1] } else { 0.0 };
        let mut next: Vec<f64> = (0..nodes.len())
            .map(|i| (nodes[i] - ak) * cur[i] - bprev * prev[i])
            .collect();
        // one reorthogonalization pass against p_k and p_{k-1}
        let ck: f64 = (0..nodes.len())
            .map(|i| weights[i] * next[i] * cur[i])
            .sum();
        let cp: f64 = (0..nodes.len())
            .map(|i| weights[i] * next[i] * prev[i])
            .sum();
        for i in 0..nodes.len() {
            next[i] -= ck * cur[i] + cp * prev[i];
        }
        diag.push(ak + ck);
        let bk = (0..nodes.len())
            .map(|i| weights[i] * next[i] * next[i])
            .sum::<f64>()
            .sqrt();
        if !(bk > 1e-13 * spread) || !bk.is_finite() {
            return Err(Error::QuadratureInsufficient(format!(
                "off-diagonal coefficient b_{k} = {bk:e} lost positivity"
            )));
        }
        offdiag.push(bk);
        for x in next.iter_mut() {
            *x /= bk;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    RecurrenceTable::new(diag, offdiag, mass)
}

/// Tolerance of the Stieltjes stabilization loop.
pub const STIELTJES_TOLERANCE: f64 = 1e-12;
/// Refinements of the composite rule before the Stieltjes loop gives up.
pub const STIELTJES_MAX_REFINEMENTS: u32 = 6;

/// Largest componentwise change between two recurrence tables. Diagonal
/// entries are measured against `max(|a_k|, b_k)` so that coefficients that
/// vanish by symmetry do not blow up the relative error.
pub fn recurrence_change(old: &RecurrenceTable, new: &RecurrenceTable) -> f64 {
    let n = old.n_max().min(new.n_max());
    let spread = new.offdiag[..n]
        .iter()
        .fold(f64::MIN_POSITIVE, |m, b| m.max(*b));
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let scale = new.diag[k].abs().max(spread);
        worst = worst.max((new.diag[k] - old.diag[k]).abs() / scale);
    }
    for k in 0..n {
        worst = worst.max((new.offdiag[k] - old.offdiag[k]).abs() / new.offdiag[k]);
    }
    worst.max((new.mass - old.mass).abs() / new.mass)
}

/// Recurrence up to degree `n` for any valid weight: closed form when one
/// exists, otherwise the Stieltjes procedure on composite rules of doubling
/// density until two consecutive tables agree to [`STIELTJES_TOLERANCE`].
pub fn recurrence(spec: &WeightSpec, n: usize) -> Result<RecurrenceTable> {
    if spec.classical_base().is_some() {
        return recurrence_classical(spec, n);
    }
    // at least one off-diagonal entry is needed to give the diagonal a scale
    let len = n.max(1);
    let degree = 2 * len + 1;
    let mut previous =
        recurrence_stieltjes(&quadrature::composite_rule_refined(spec, degree, 0)?, len)?;
    for level in 1..=STIELTJES_MAX_REFINEMENTS {
        let rule = quadrature::composite_rule_refined(spec, degree, level)?;
        let current = recurrence_stieltjes(&rule, len)?;
        if recurrence_change(&previous, &current) <= STIELTJES_TOLERANCE {
            return Ok(current.truncated(n));
        }
        previous = current;
    }
    Err(Error::QuadratureInsufficient(format!(
        "Stieltjes recurrence did not stabilize after {STIELTJES_MAX_REFINEMENTS} refinements"
    )))
}

/// `p_0(x) … p_n(x)` by the forward recurrence.
pub fn eval_orthonormal(rec: &RecurrenceTable, x: f64, n: usize) -> Vec<f64> {
    assert!(
        n <= rec.n_max(),
        "degree {n} exceeds recurrence length {}",
        rec.n_max()
    );
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0 / rec.mass.sqrt());
    for k in 0..n {
        let prev = if k > 0 {
            rec.offdiag[k - 1] * out[k - 1]
        } else {
            0.0
        };
        out.push(((x - rec.diag[k]) * out[k] - prev) / rec.offdiag[k]);
    }
    out
}

/// `p'_0(x) … p'_n(x)` by the differentiated recurrence.
pub fn eval_derivatives(rec: &RecurrenceTable, x: f64, n: usize) -> Vec<f64> {
    eval_all_derivatives(rec, x, n, 1)
        .pop()
        .expect("order 1 present")
}

/// Rows `0..=order` of derivatives: row `m` holds `p_0^{(m)}(x) … p_n^{(m)}(x)`.
pub fn eval_all_derivatives(
    rec: &RecurrenceTable,
    x: f64,
    n: usize,
    order: usize,
) -> Vec<Vec<f64>> {
    let mut rows = vec![eval_orthonormal(rec, x, n)];
    for m in 1..=order {
        let lower = &rows[m - 1];
        let mut cur = vec![0.0; n + 1];
        for k in 0..n {
            let prev = if k > 0 {
                rec.offdiag[k - 1] * cur[k - 1]
            } else {
                0.0
            };
            cur[k + 1] = ((x - rec.diag[k]) * cur[k] + m as f64 * lower[k] - prev) / rec.offdiag[k];
        }
        rows.push(cur);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_rule;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn legendre_spec_is_valid() {
        let w = WeightSpec::jacobi(0.0, 0.0).unwrap();
        assert_eq!(w.family(), Family::Jacobi);
        assert_eq!(w.interval(), (-1.0, 1.0));
    }

    #[test]
    fn rejects_nonintegrable_alpha() {
        let err = WeightSpec::jacobi(-1.0, 0.0).unwrap_err();
        assert_eq!(
            err,
            Error::InvalidWeight("non-integrable endpoint singularity".into())
        );
        assert!(WeightSpec::laguerre(-1.5).is_err());
    }

    #[test]
    fn gen_jacobi_interior_singularity() {
        let w = WeightSpec::generalized(Family::GenJacobi, None, 0.0, 0.0, &[(0.0, -0.5)]).unwrap();
        assert_eq!(w.factors(), vec![Singularity::new(0.0, -0.5)]);
        assert!(w.classical_base().is_none());
    }

    #[test]
    fn rejects_bad_singularities() {
        assert!(
            WeightSpec::generalized(Family::GenJacobi, None, 0.0, 0.0, &[(0.0, -1.0)]).is_err()
        );
        assert!(WeightSpec::generalized(
            Family::GenJacobi,
            None,
            0.0,
            0.0,
            &[(0.5, 1.0), (0.1, 1.0)]
        )
        .is_err());
        // outside the interval any exponent is integrable
        assert!(WeightSpec::generalized(Family::GenJacobi, None, 0.0, 0.0, &[(2.0, -3.0)]).is_ok());
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(WeightSpec::jacobi_on(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(WeightSpec::from_json(r#"{"family":"jacobi","interval":[2,1]}"#).is_err());
    }

    #[test]
    fn gen_hermite_sum_condition() {
        assert!(WeightSpec::generalized(
            Family::GenHermite,
            None,
            0.0,
            0.0,
            &[(-1.0, -0.5), (1.0, 0.2)]
        )
        .is_err());
    }

    #[test]
    fn json_round_trip_with_infinite_interval() {
        let text = r#"{"family":"gen_laguerre","interval":[0,"inf"],"singularities":[[1.0,0.5]],"scale":2}"#;
        let w = WeightSpec::from_json(text).unwrap();
        assert_eq!(w.interval(), (0.0, f64::INFINITY));
        assert_eq!(w.scale(), 2.0);
        let back = WeightSpec::from_json(&w.to_json()).unwrap();
        assert_eq!(back, w);
        assert!(w.to_json().contains("\"inf\""));
    }

    #[test]
    fn json_rejects_unknown_family() {
        assert!(WeightSpec::from_json(r#"{"family":"chebyshev"}"#).is_err());
    }

    #[test]
    fn hermite_closed_form() {
        let rec = recurrence_classical(&WeightSpec::hermite(), 3).unwrap();
        assert_eq!(rec.diag(), &[0.0; 4]);
        for (k, b) in rec.offdiag().iter().enumerate() {
            assert_relative_eq!(*b, ((k + 1) as f64 / 2.0).sqrt(), epsilon = 1e-15);
        }
        assert_relative_eq!(rec.mass(), PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn legendre_closed_form() {
        let rec = recurrence_classical(&WeightSpec::legendre(), 2).unwrap();
        assert_eq!(rec.diag(), &[0.0; 3]);
        assert_relative_eq!(rec.offdiag()[0], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(rec.offdiag()[1], 2.0 / 15f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(rec.mass(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn laguerre_closed_form() {
        let rec = recurrence_classical(&WeightSpec::laguerre(0.0).unwrap(), 1).unwrap();
        assert_eq!(rec.diag(), &[1.0, 3.0]);
        assert_eq!(rec.offdiag(), &[1.0]);
        assert_relative_eq!(rec.mass(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn classical_rejects_generalized() {
        let w = WeightSpec::generalized(Family::GenJacobi, None, 0.0, 0.0, &[(0.0, 0.5)]).unwrap();
        assert!(matches!(
            recurrence_classical(&w, 3),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn stieltjes_matches_closed_form_on_gauss_rule() {
        let rec = recurrence_classical(&WeightSpec::legendre(), 8).unwrap();
        let rule = gauss_rule(&rec, 8).unwrap();
        let s = recurrence_stieltjes(&rule, 2).unwrap();
        for k in 0..=2 {
            assert!((s.diag()[k] - rec.diag()[k]).abs() < 1e-13);
        }
        for k in 0..2 {
            assert!((s.offdiag()[k] - rec.offdiag()[k]).abs() < 1e-13);
        }
        assert!((s.mass() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn stieltjes_rejects_short_rule() {
        let rec = recurrence_classical(&WeightSpec::legendre(), 4).unwrap();
        let rule = gauss_rule(&rec, 3).unwrap();
        assert!(matches!(
            recurrence_stieltjes(&rule, 3),
            Err(Error::QuadratureInsufficient(_))
        ));
    }

    #[test]
    fn stieltjes_abs_sqrt_weight_degree_zero() {
        let w = WeightSpec::generalized(Family::GenJacobi, None, 0.0, 0.0, &[(0.0, 0.5)]).unwrap();
        let rec = recurrence(&w, 0).unwrap();
        assert!(rec.diag()[0].abs() < 1e-13);
        assert_relative_eq!(rec.mass(), 4.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn stieltjes_symmetric_weight_has_zero_diagonal() {
        let w = WeightSpec::generalized(
            Family::GenJacobi,
            None,
            0.0,
            0.0,
            &[(-0.5, 0.3), (0.5, 0.3)],
        )
        .unwrap();
        assert!(w.is_symmetric());
        let rec = recurrence(&w, 10).unwrap();
        assert!(rec.diag().iter().all(|a| a.abs() <= 1e-13));
    }

    #[test]
    fn orthonormal_legendre_at_one() {
        let rec = recurrence_classical(&WeightSpec::legendre(), 2).unwrap();
        let p = eval_orthonormal(&rec, 1.0, 2);
        for (k, v) in p.iter().enumerate() {
            assert_relative_eq!(*v, ((2 * k + 1) as f64 / 2.0).sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn orthonormal_degree_zero_and_hermite_origin() {
        let rec = recurrence_classical(&WeightSpec::laguerre(1.5).unwrap(), 3).unwrap();
        assert_eq!(
            eval_orthonormal(&rec, 0.7, 0),
            vec![1.0 / rec.mass().sqrt()]
        );

        let rec = recurrence_classical(&WeightSpec::hermite(), 1).unwrap();
        let p = eval_orthonormal(&rec, 0.0, 1);
        assert_relative_eq!(p[0], PI.powf(-0.25), epsilon = 1e-15);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn derivatives_simple_cases() {
        let rec = recurrence_classical(&WeightSpec::legendre(), 2).unwrap();
        assert_eq!(eval_derivatives(&rec, 0.3, 0), vec![0.0]);
        let d = eval_derivatives(&rec, 0.0, 2);
        assert_eq!(d[0], 0.0);
        assert_relative_eq!(d[1], 1.5f64.sqrt(), epsilon = 1e-15);
        assert!(d[2].abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let rec = recurrence_classical(&WeightSpec::jacobi(0.7, -0.3).unwrap(), 12).unwrap();
        let x = 0.37;
        let d = eval_derivatives(&rec, x, 12);
        for h in [1e-3, 5e-4] {
            let plus = eval_orthonormal(&rec, x + h, 12);
            let minus = eval_orthonormal(&rec, x - h, 12);
            for k in 0..=12 {
                let fd = (plus[k] - minus[k]) / (2.0 * h);
                // O(h²) truncation with a generous constant for degree 12
                assert!(
                    (fd - d[k]).abs() <= 1e4 * h * h * (1.0 + d[k].abs()),
                    "k={k}"
                );
            }
        }
    }

    #[test]
    fn second_derivative_of_hermite() {
        // orthonormal Hermite: p_n'' = √(2n)√(2(n-1)) p_{n-2}
        let rec = recurrence_classical(&WeightSpec::hermite(), 6).unwrap();
        let rows = eval_all_derivatives(&rec, 0.8, 6, 2);
        for n in 2..=6 {
            let expect = ((2 * n) as f64).sqrt() * ((2 * (n - 1)) as f64).sqrt() * rows[0][n - 2];
            assert_relative_eq!(rows[2][n], expect, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn scale_multiplies_mass_only() {
        let w = WeightSpec::jacobi(0.5, 1.0).unwrap();
        let c = 7.5;
        let base = recurrence_classical(&w, 5).unwrap();
        let scaled = recurrence_classical(&w.clone().with_scale(c).unwrap(), 5).unwrap();
        assert_eq!(base.diag(), scaled.diag());
        assert_eq!(base.offdiag(), scaled.offdiag());
        assert_relative_eq!(scaled.mass(), c * base.mass(), max_relative = 1e-14);
        let p = eval_orthonormal(&base, 0.2, 5);
        let q = eval_orthonormal(&scaled, 0.2, 5);
        for k in 0..=5 {
            assert_relative_eq!(q[k], p[k] / c.sqrt(), max_relative = 1e-13);
        }
    }

    #[test]
    fn jacobi_on_shifted_interval() {
        let w = WeightSpec::jacobi_on(0.0, 4.0, 0.0, 0.0).unwrap();
        let rec = recurrence_classical(&w, 2).unwrap();
        assert_relative_eq!(rec.mass(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(rec.diag()[1], 2.0, max_relative = 1e-14);
        assert_relative_eq!(rec.offdiag()[0], 2.0 / 3f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn gen_hermite_classical_detection() {
        let w = WeightSpec::gen_hermite(2.0).unwrap();
        assert_eq!(
            w.classical_base(),
            Some(ClassicalBase::GenHermite { mu: 2.0 })
        );
        let rec = recurrence_classical(&w, 2).unwrap();
        assert_relative_eq!(rec.mass(), PI.sqrt() / 2.0, max_relative = 1e-14);
        // b_0² = (1+μ)/2, b_1² = 1
        assert_relative_eq!(rec.offdiag()[0], 1.5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(rec.offdiag()[1], 1.0, max_relative = 1e-14);
    }
}
