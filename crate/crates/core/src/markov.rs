//! Sharp Markov-type constants.
//!
//! In the orthonormal basis `p_0 … p_n` of a weight, differentiation acts on
//! coefficient vectors through the derivative matrix
//! `D[i][j] = ∫ p'_j p_i w` (`i < n`, `j ≤ n`), which is strictly upper
//! triangular because `p'_j` has degree `j-1`. For `P = Σ c_j p_j`,
//! `‖P‖ = |c|` and `‖P'‖ = |Dc|`, so the sharp constant
//! `γ_n* = sup ‖P'‖/‖P‖` is the largest singular value of `D`, and the
//! extremal polynomial is its top right singular vector.
//!
//! The weighted Sobolev norm `‖P‖²_W = ‖P‖² + Σ_j λ_j ‖P^{(j)}‖²` has Gram
//! matrix `B = I + Σ λ_j (D^j)ᵀ D^j`, and `‖P'‖²_W` has Gram matrix
//! `A = Σ_{j=0}^k λ'_j (D^{j+1})ᵀ D^{j+1}` with `λ'_0 = 1`; the Sobolev
//! constant is `√θ` for the top eigenvalue `θ` of the pencil `(A, B)`.
//!
//! `D` here is the transpose of the matrix usually written `B_n`; the
//! singular values are the same.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gen_sym_eigen_max, svd_largest, DenseMatrix};
use crate::orthopoly::{
    eval_all_derivatives, eval_orthonormal, recurrence, RecurrenceTable, WeightSpec,
};
use crate::quadrature::{gauss_rule, QuadRule};
use crate::{max_degree, DEFAULT_MAX_K};

/// Largest accepted `|achieved ratio - value| / value` for an extremal polynomial.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Relative size of the entries on and below the diagonal of the derivative
/// matrix tolerated before the quadrature is declared insufficient.
pub const VANISHING_TOLERANCE: f64 = 1e-11;

/// `D[i][j] = ∫ p'_j p_i w` for `0 ≤ i < n`, `0 ≤ j ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    pub n: usize,
    pub matrix: DenseMatrix,
}

impl DerivativeMatrix {
    /// `‖p'_j‖²` for `j = 0 … n` (column sums of squares).
    pub fn derivative_norms_sq(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|j| self.matrix.column(j).iter().map(|x| x * x).sum())
            .collect()
    }

    /// `(n+1) x (n+1)` version with a zero last row, so that powers give
    /// higher derivatives.
    pub fn square(&self) -> DenseMatrix {
        let n = self.n;
        let mut sq = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..=n {
                sq[(i, j)] = self.matrix[(i, j)];
            }
        }
        sq
    }
}

/// Assembles the derivative matrix with `rule`, which must integrate
/// polynomials of degree `2n - 1` against the weight.
pub fn derivative_matrix(
    rec: &RecurrenceTable,
    rule: &QuadRule,
    n: usize,
) -> Result<DerivativeMatrix> {
    if n > rec.n_max() {
        return Err(Error::InvalidArgument(format!(
            "degree {n} exceeds recurrence length {}",
            rec.n_max()
        )));
    }
    if rule.exactness() >= 0 && (rule.exactness() as usize) + 1 < 2 * n {
        return Err(Error::QuadratureInsufficient(format!(
            "rule exact to degree {} cannot assemble the degree-{n} derivative matrix",
            rule.exactness()
        )));
    }
    let mut m = DenseMatrix::zeros(n, n + 1);
    if n == 0 {
        return Ok(DerivativeMatrix { n, matrix: m });
    }
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let rows = eval_all_derivatives(rec, x, n, 1);
        let (p, dp) = (&rows[0], &rows[1]);
        for i in 0..n {
            let wp = w * p[i];
            for j in 0..=n {
                m[(i, j)] += wp * dp[j];
            }
        }
    }
    let scale = m.frobenius_norm();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max(m[(i, j)].abs());
            m[(i, j)] = 0.0;
        }
    }
    if worst > VANISHING_TOLERANCE * scale {
        return Err(Error::QuadratureInsufficient(format!(
            "derivative matrix has lower entry {worst:e} against norm {scale:e}"
        )));
    }
    Ok(DerivativeMatrix { n, matrix: m })
}

/// Derivative order and weights `λ_1 … λ_k` of a Sobolev norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    lambdas: Vec<f64>,
}

impl SobolevSpec {
    /// Order capped at [`DEFAULT_MAX_K`].
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        Self::with_max_order(lambdas, DEFAULT_MAX_K)
    }

    pub fn with_max_order(lambdas: Vec<f64>, max_k: usize) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("Sobolev norm needs k >= 1".into()));
        }
        if lambdas.len() > max_k {
            return Err(Error::InvalidArgument(format!(
                "derivative order {} exceeds the cap {max_k}",
                lambdas.len()
            )));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda {l} must be finite and >= 0"
            )));
        }
        Ok(Self { lambdas })
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `(1, λ_1, …, λ_k)`.
    fn weights(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.lambdas.iter().copied())
            .collect()
    }
}

/// Sharp constant with its extremal polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpResult {
    pub n: usize,
    pub value: f64,
    /// Extremal polynomial in the orthonormal basis, unit norm in the norm of
    /// the problem (`L²` or Sobolev).
    pub coeffs: Vec<f64>,
    /// `|achieved ratio - value| / value`.
    pub residual: f64,
    pub weight: WeightSpec,
    /// Empty for the plain `L²` problem.
    pub lambdas: Vec<f64>,
}

impl SharpResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sharp result serialization cannot fail")
    }
}

/// A weight prepared up to a maximal degree: recurrence, Gauss rule and the
/// full derivative matrix. Every degree `n ≤ n_max` reuses the leading block,
/// so sweeps over `n` cost one assembly.
#[derive(Debug, Clone)]
pub struct MarkovProblem {
    spec: WeightSpec,
    n_max: usize,
    rec: RecurrenceTable,
    rule: QuadRule,
    deriv: DerivativeMatrix,
}

impl MarkovProblem {
    pub fn new(spec: &WeightSpec, n_max: usize) -> Result<Self> {
        let cap = max_degree();
        if n_max > cap {
            return Err(Error::InvalidArgument(format!(
                "n = {n_max} exceeds the degree cap {cap} (set {} to raise it)",
                crate::MAX_N_ENV
            )));
        }
        let rec = recurrence(spec, n_max + 1)?;
        let rule = gauss_rule(&rec, n_max + 1)?;
        let deriv = derivative_matrix(&rec, &rule, n_max)?;
        Ok(Self {
            spec: spec.clone(),
            n_max,
            rec,
            rule,
            deriv,
        })
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn recurrence(&self) -> &RecurrenceTable {
        &self.rec
    }

    pub fn rule(&self) -> &QuadRule {
        &self.rule
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        if n > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "n = {n} exceeds the prepared degree {}",
                self.n_max
            )));
        }
        Ok(())
    }

    /// Derivative matrix for degree `n` (leading `n x (n+1)` block).
    pub fn derivative_matrix(&self, n: usize) -> Result<DerivativeMatrix> {
        if n > self.n_max {
            return Err(Error::InvalidArgument(format!(
                "n = {n} exceeds the prepared degree {}",
                self.n_max
            )));
        }
        Ok(DerivativeMatrix {
            n,
            matrix: self.deriv.matrix.leading_block(n, n + 1),
        })
    }

    pub fn sharp_l2(&self, n: usize) -> Result<SharpResult> {
        self.check_degree(n)?;
        let d = self.derivative_matrix(n)?;
        let top = svd_largest(&d.matrix)?;
        let mut res = SharpResult {
            n,
            value: top.sigma,
            coeffs: top.right_vector,
            residual: 0.0,
            weight: self.spec.clone(),
            lambdas: Vec::new(),
        };
        res.residual = self.verify_ratio(&res)?.1;
        Ok(res)
    }

    /// Gram matrices `(A, B)` of `‖P'‖²_W` and `‖P‖²_W` in the orthonormal basis.
    pub fn sobolev_forms(&self, sob: &SobolevSpec, n: usize) -> Result<(DenseMatrix, DenseMatrix)> {
        self.check_degree(n)?;
        let d = self.derivative_matrix(n)?.square();
        let weights = sob.weights();
        let size = n + 1;
        let mut a = DenseMatrix::zeros(size, size);
        let mut b = DenseMatrix::zeros(size, size);
        // power holds D^j while handling term j
        let mut power = DenseMatrix::identity(size);
        for (j, &lambda) in weights.iter().enumerate() {
            let next = d.matmul(&power)?;
            if lambda != 0.0 {
                b.add_scaled(
                    lambda,
                    &if j == 0 {
                        DenseMatrix::identity(size)
                    } else {
                        power.gram()
                    },
                );
                a.add_scaled(lambda, &next.gram());
            }
            power = next;
        }
        Ok((a, b))
    }

    pub fn sharp_sobolev(&self, sob: &SobolevSpec, n: usize) -> Result<SharpResult> {
        let (a, b) = self.sobolev_forms(sob, n)?;
        let top = gen_sym_eigen_max(&a, &b)?;
        let mut res = SharpResult {
            n,
            value: top.theta.max(0.0).sqrt(),
            coeffs: top.vector,
            residual: 0.0,
            weight: self.spec.clone(),
            lambdas: sob.lambdas().to_vec(),
        };
        res.residual = self.verify_ratio(&res)?.1;
        Ok(res)
    }

    /// `(Σ_{ν=1}^n ν ‖p'_ν‖²)^{1/2}`.
    pub fn mirsky_bound(&self, n: usize) -> Result<f64> {
        self.check_degree(n)?;
        let norms = self.derivative_matrix(n)?.derivative_norms_sq();
        Ok(norms
            .iter()
            .enumerate()
            .map(|(nu, s)| nu as f64 * s)
            .sum::<f64>()
            .sqrt())
    }

    /// Recomputes `‖P'‖/‖P‖` of the extremal polynomial by quadrature and
    /// returns it with the relative residual; fails above [`RESIDUAL_TOLERANCE`].
    fn verify_ratio(&self, res: &SharpResult) -> Result<(f64, f64)> {
        let (ratio, residual) = achieved_ratio(&self.rec, &self.rule, res)?;
        if !(residual <= RESIDUAL_TOLERANCE) {
            return Err(Error::NoConvergence(format!(
                "extremal polynomial reaches {ratio} against sharp value {} (residual {residual:e})",
                res.value
            )));
        }
        Ok((ratio, residual))
    }
}

/// `‖P'‖_W / ‖P‖_W` of `P = Σ coeffs_j p_j` by quadrature, with the relative
/// gap to `res.value`.
fn achieved_ratio(rec: &RecurrenceTable, rule: &QuadRule, res: &SharpResult) -> Result<(f64, f64)> {
    let n = res.n;
    let k = res.lambdas.len();
    let mut norms = vec![0.0; k + 2];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let rows = eval_all_derivatives(rec, x, n, k + 1);
        for (order, row) in rows.iter().enumerate() {
            let v: f64 = row.iter().zip(&res.coeffs).map(|(p, c)| p * c).sum();
            norms[order] += w * v * v;
        }
    }
    let weights: Vec<f64> = std::iter::once(1.0)
        .chain(res.lambdas.iter().copied())
        .collect();
    let den: f64 = weights.iter().zip(&norms).map(|(l, s)| l * s).sum();
    let num: f64 = weights.iter().zip(&norms[1..]).map(|(l, s)| l * s).sum();
    if !(den > 0.0) {
        return Err(Error::NoConvergence(
            "extremal polynomial has zero norm".into(),
        ));
    }
    let ratio = (num / den).sqrt();
    let residual = if res.value > 0.0 {
        (ratio - res.value).abs() / res.value
    } else {
        ratio
    };
    Ok((ratio, residual))
}

pub fn sharp_constant_l2(spec: &WeightSpec, n: usize) -> Result<SharpResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    MarkovProblem::new(spec, n)?.sharp_l2(n)
}

pub fn sobolev_forms(
    spec: &WeightSpec,
    sob: &SobolevSpec,
    n: usize,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    MarkovProblem::new(spec, n)?.sobolev_forms(sob, n)
}

pub fn sharp_constant_sobolev(
    spec: &WeightSpec,
    sob: &SobolevSpec,
    n: usize,
) -> Result<SharpResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    MarkovProblem::new(spec, n)?.sharp_sobolev(sob, n)
}

pub fn mirsky_bound(spec: &WeightSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    MarkovProblem::new(spec, n)?.mirsky_bound(n)
}

/// Extremal polynomial `P = Σ coeffs_j p_j` of a sharp result.
#[derive(Debug, Clone)]
pub struct ExtremalPolynomial {
    rec: RecurrenceTable,
    result: SharpResult,
    achieved_ratio: f64,
    residual: f64,
}

/// Summary of an extremal polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalReport {
    pub n: usize,
    pub value: f64,
    pub achieved_ratio: f64,
    pub residual: f64,
    pub coeffs: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl ExtremalPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let p = eval_orthonormal(&self.rec, x, self.result.n);
        p.iter().zip(&self.result.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let rows = eval_all_derivatives(&self.rec, x, self.result.n, 1);
        rows[1]
            .iter()
            .zip(&self.result.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn achieved_ratio(&self) -> f64 {
        self.achieved_ratio
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn report(&self) -> ExtremalReport {
        ExtremalReport {
            n: self.result.n,
            value: self.result.value,
            achieved_ratio: self.achieved_ratio,
            residual: self.residual,
            coeffs: self.result.coeffs.clone(),
            lambdas: self.result.lambdas.clone(),
        }
    }
}

/// Wraps a sharp result into an evaluator. `rec` must reach degree `n + 1`.
pub fn extremal_polynomial(res: &SharpResult, rec: &RecurrenceTable) -> Result<ExtremalPolynomial> {
    if res.coeffs.len() != res.n + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for degree {}",
            res.coeffs.len(),
            res.n
        )));
    }
    if rec.n_max() < res.n + 1 {
        return Err(Error::InvalidArgument(format!(
            "recurrence of length {} cannot integrate degree {}",
            rec.n_max(),
            2 * res.n
        )));
    }
    let rule = gauss_rule(rec, res.n + 1)?;
    let (achieved_ratio, residual) = achieved_ratio(rec, &rule, res)?;
    Ok(ExtremalPolynomial {
        rec: rec.clone(),
        result: res.clone(),
        achieved_ratio,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::{recurrence_classical, Family};
    use approx::assert_relative_eq;

    #[test]
    fn hermite_derivative_matrix_is_weighted_shift() {
        let p = MarkovProblem::new(&WeightSpec::hermite(), 3).unwrap();
        let d = p.derivative_matrix(3).unwrap();
        for i in 0..3 {
            for j in 0..=3 {
                let expect = if j == i + 1 {
                    ((2 * j) as f64).sqrt()
                } else {
                    0.0
                };
                assert!((d.matrix[(i, j)] - expect).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn degree_one_entry() {
        let p = MarkovProblem::new(&WeightSpec::legendre(), 1).unwrap();
        let d = p.derivative_matrix(1).unwrap();
        assert_relative_eq!(d.matrix[(0, 1)], 3f64.sqrt(), epsilon = 1e-14);
        // in general the entry is 1/b_0
        let w = WeightSpec::jacobi(0.3, 2.0).unwrap();
        let p = MarkovProblem::new(&w, 1).unwrap();
        let d = p.derivative_matrix(1).unwrap();
        assert_relative_eq!(
            d.matrix[(0, 1)],
            1.0 / p.recurrence().offdiag()[0],
            max_relative = 1e-13
        );
    }

    #[test]
    fn degree_zero_is_empty() {
        let rec = recurrence_classical(&WeightSpec::legendre(), 2).unwrap();
        let rule = gauss_rule(&rec, 2).unwrap();
        let d = derivative_matrix(&rec, &rule, 0).unwrap();
        assert_eq!((d.matrix.rows(), d.matrix.cols()), (0, 1));
    }

    #[test]
    fn short_rule_is_rejected() {
        let rec = recurrence_classical(&WeightSpec::laguerre(0.0).unwrap(), 12).unwrap();
        let rule = gauss_rule(&rec, 3).unwrap();
        assert!(matches!(
            derivative_matrix(&rec, &rule, 10),
            Err(Error::QuadratureInsufficient(_))
        ));
    }

    #[test]
    fn hermite_sharp_values() {
        let r = sharp_constant_l2(&WeightSpec::hermite(), 2).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-10);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn legendre_degree_one() {
        let r = sharp_constant_l2(&WeightSpec::legendre(), 1).unwrap();
        assert_relative_eq!(r.value, 3f64.sqrt(), epsilon = 1e-12);
        assert!(r.coeffs[0].abs() < 1e-14);
    }

    #[test]
    fn laguerre_degree_one() {
        let r = sharp_constant_l2(&WeightSpec::laguerre(0.0).unwrap(), 1).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn n_zero_is_rejected() {
        let err = sharp_constant_l2(&WeightSpec::hermite(), 0).unwrap_err();
        assert_eq!(err.to_string(), "invalid argument: n must be >= 1");
    }

    #[test]
    fn sobolev_forms_reduce_to_l2() {
        let w = WeightSpec::jacobi(0.5, 0.5).unwrap();
        let p = MarkovProblem::new(&w, 5).unwrap();
        let (a, b) = p
            .sobolev_forms(&SobolevSpec::new(vec![0.0, 0.0]).unwrap(), 5)
            .unwrap();
        let d = p.derivative_matrix(5).unwrap();
        assert_eq!(b, DenseMatrix::identity(6));
        let dtd = d.matrix.gram();
        for i in 0..6 {
            for j in 0..6 {
                assert!((a[(i, j)] - dtd[(i, j)]).abs() < 1e-12 * dtd.frobenius_norm());
            }
        }
    }

    #[test]
    fn hermite_sobolev_two_by_two() {
        let p = MarkovProblem::new(&WeightSpec::hermite(), 1).unwrap();
        let sob = SobolevSpec::new(vec![1.0]).unwrap();
        let (a, b) = p.sobolev_forms(&sob, 1).unwrap();
        assert!(a[(0, 0)].abs() < 1e-14 && a[(0, 1)].abs() < 1e-14);
        assert_relative_eq!(a[(1, 1)], 2.0, epsilon = 1e-13);
        assert_relative_eq!(b[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(b[(1, 1)], 3.0, epsilon = 1e-13);
        let r = p.sharp_sobolev(&sob, 1).unwrap();
        assert_relative_eq!(r.value, (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hermite_sobolev_monotone_in_lambda() {
        let p = MarkovProblem::new(&WeightSpec::hermite(), 1).unwrap();
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.1, 1.0, 10.0, 1e3] {
            let r = p
                .sharp_sobolev(&SobolevSpec::new(vec![lambda]).unwrap(), 1)
                .unwrap();
            // A = diag(0, 2), B = diag(1, 1 + 2λ)
            assert_relative_eq!(
                r.value,
                (2.0 / (1.0 + 2.0 * lambda)).sqrt(),
                max_relative = 1e-12
            );
            assert!(r.value <= last);
            last = r.value;
        }
    }

    #[test]
    fn sobolev_forms_are_symmetric() {
        let w = WeightSpec::laguerre(1.0).unwrap();
        let p = MarkovProblem::new(&w, 8).unwrap();
        let (a, b) = p
            .sobolev_forms(&SobolevSpec::new(vec![0.7, 0.2, 1.5]).unwrap(), 8)
            .unwrap();
        assert!(a.asymmetry() <= 1e-12 * a.frobenius_norm());
        assert!(b.asymmetry() <= 1e-12 * b.frobenius_norm());
    }

    #[test]
    fn sobolev_zero_lambda_equals_l2() {
        let w = WeightSpec::jacobi(1.0, -0.5).unwrap();
        let p = MarkovProblem::new(&w, 9).unwrap();
        let l2 = p.sharp_l2(9).unwrap();
        let sob = p
            .sharp_sobolev(&SobolevSpec::new(vec![0.0]).unwrap(), 9)
            .unwrap();
        assert_relative_eq!(l2.value, sob.value, max_relative = 1e-10);
    }

    #[test]
    fn sobolev_spec_validation() {
        assert!(SobolevSpec::new(vec![]).is_err());
        assert!(SobolevSpec::new(vec![-1.0]).is_err());
        assert!(SobolevSpec::new(vec![1.0; 5]).is_err());
        assert!(SobolevSpec::with_max_order(vec![1.0; 5], 6).is_ok());
    }

    #[test]
    fn mirsky_hermite() {
        let p = MarkovProblem::new(&WeightSpec::hermite(), 2).unwrap();
        assert_relative_eq!(
            p.mirsky_bound(2).unwrap(),
            10f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            p.mirsky_bound(1).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            p.sharp_l2(1).unwrap().value,
            2f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn extremal_hermite_is_top_basis_polynomial() {
        let w = WeightSpec::hermite();
        let r = sharp_constant_l2(&w, 2).unwrap();
        assert!(r.coeffs[0].abs() < 1e-12 && r.coeffs[1].abs() < 1e-12);
        assert_relative_eq!(r.coeffs[2], 1.0, epsilon = 1e-12);
        let rec = recurrence_classical(&w, 3).unwrap();
        let ext = extremal_polynomial(&r, &rec).unwrap();
        assert_relative_eq!(ext.achieved_ratio(), 2.0, epsilon = 1e-12);
        // p_2 = (2x² - 1)/(√2 π^{1/4})
        let x = 0.4;
        let expect = (2.0 * x * x - 1.0) / (2f64.sqrt() * std::f64::consts::PI.powf(0.25));
        assert_relative_eq!(ext.eval(x), expect, epsilon = 1e-13);
        assert_relative_eq!(
            ext.derivative(x),
            4.0 * x / (2f64.sqrt() * std::f64::consts::PI.powf(0.25)),
            epsilon = 1e-13
        );
    }

    #[test]
    fn extremal_legendre_is_odd() {
        let w = WeightSpec::legendre();
        let r = sharp_constant_l2(&w, 1).unwrap();
        let rec = recurrence_classical(&w, 2).unwrap();
        let ext = extremal_polynomial(&r, &rec).unwrap();
        assert!(ext.eval(0.0).abs() < 1e-14);
        assert_relative_eq!(ext.eval(0.5), -ext.eval(-0.5), epsilon = 1e-14);
        assert!(ext.report().residual < 1e-12);
    }

    #[test]
    fn extremal_needs_long_enough_recurrence() {
        let w = WeightSpec::legendre();
        let r = sharp_constant_l2(&w, 3).unwrap();
        let rec = recurrence_classical(&w, 3).unwrap();
        assert!(extremal_polynomial(&r, &rec).is_err());
    }

    #[test]
    fn generalized_weight_sharp_value_has_small_residual() {
        let w = WeightSpec::generalized(Family::GenJacobi, None, 0.0, 0.0, &[(0.0, 0.5)]).unwrap();
        let r = sharp_constant_l2(&w, 10).unwrap();
        assert!(r.residual < 1e-10);
        assert!(r.value > 0.0);
    }

    #[test]
    fn sharp_result_json_shape() {
        let r = sharp_constant_l2(&WeightSpec::hermite(), 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["n", "value", "coeffs", "residual", "weight", "lambdas"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["weight"]["family"], "hermite");
        assert_eq!(v["weight"]["interval"][0], "-inf");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn weight() -> impl Strategy<Value = WeightSpec> {
            prop_oneof![
                (-0.9f64..3.0, -0.9f64..3.0).prop_map(|(a, b)| WeightSpec::jacobi(a, b).unwrap()),
                (-0.9f64..3.0).prop_map(|a| WeightSpec::laguerre(a).unwrap()),
                (0.0f64..3.0).prop_map(|m| WeightSpec::gen_hermite(m).unwrap()),
                (-0.9f64..2.0, -0.9f64..2.0, -0.8f64..0.8, -0.9f64..2.0).prop_map(
                    |(a, b, c, g)| {
                        WeightSpec::generalized(Family::GenJacobi, None, a, b, &[(c, g)]).unwrap()
                    }
                ),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn monotone_in_degree(w in weight(), top in 2usize..20) {
                let p = MarkovProblem::new(&w, top).unwrap();
                let mut last = 0.0;
                for n in 1..=top {
                    let v = p.sharp_l2(n).unwrap().value;
                    prop_assert!(v >= last * (1.0 - 1e-12), "n={} {} < {}", n, v, last);
                    last = v;
                }
            }

            #[test]
            fn scale_invariant(w in weight(), n in 1usize..16) {
                let base = sharp_constant_l2(&w, n).unwrap().value;
                for c in [1e-3, 1.0, 1e3] {
                    let scaled = sharp_constant_l2(&w.clone().with_scale(c).unwrap(), n).unwrap().value;
                    prop_assert!((scaled - base).abs() <= 1e-12 * base);
                }
            }

            #[test]
            fn affine_covariance(a in -0.9f64..3.0, b in -0.9f64..3.0, stretch in 0.1f64..10.0, shift in -5.0f64..5.0, n in 1usize..20) {
                let reference = sharp_constant_l2(&WeightSpec::jacobi(a, b).unwrap(), n).unwrap().value;
                let mapped = WeightSpec::jacobi_on(shift - stretch, shift + stretch, a, b).unwrap();
                let v = sharp_constant_l2(&mapped, n).unwrap().value;
                prop_assert!((v - reference / stretch).abs() <= 1e-10 * v);
            }

            #[test]
            fn sobolev_below_l2(w in weight(), n in 1usize..20, lambdas in prop::collection::vec(0.0f64..50.0, 1..=4)) {
                let p = MarkovProblem::new(&w, n).unwrap();
                let l2 = p.sharp_l2(n).unwrap().value;
                let sob = p.sharp_sobolev(&SobolevSpec::new(lambdas).unwrap(), n).unwrap();
                prop_assert!(sob.value <= l2 * (1.0 + 1e-10));
                prop_assert!(sob.residual <= RESIDUAL_TOLERANCE);
            }

            #[test]
            fn mirsky_dominates(w in weight(), n in 1usize..20) {
                let p = MarkovProblem::new(&w, n).unwrap();
                prop_assert!(p.mirsky_bound(n).unwrap() >= p.sharp_l2(n).unwrap().value * (1.0 - 1e-12));
            }

            #[test]
            fn extremal_reaches_value(w in weight(), n in 1usize..16) {
                let p = MarkovProblem::new(&w, n + 1).unwrap();
                let r = p.sharp_l2(n).unwrap();
                let ext = extremal_polynomial(&r, p.recurrence()).unwrap();
                prop_assert!(ext.residual() <= 1e-8);
            }
        }

        #[test]
        fn hermite_exact_up_to_forty() {
            let p = MarkovProblem::new(&WeightSpec::hermite(), 40).unwrap();
            for n in 1..=40 {
                let expect = (2.0 * n as f64).sqrt();
                assert!(
                    (p.sharp_l2(n).unwrap().value - expect).abs() <= 1e-10 * expect,
                    "n={n}"
                );
            }
        }
    }
}
