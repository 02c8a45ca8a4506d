//! Kernel self-tests: quadrature exactness, orthonormality, eigen/SVD
//! residuals and the Γ-ratio limit.

use serde::{Deserialize, Serialize};

use crate::bounds::gamma_ratio_convergence;
use crate::error::Result;
use crate::linalg::{
    gen_sym_eigen_max, svd_largest, sym_eigen, tridiag_eigen_full, DenseMatrix, SymTridiag,
};
use crate::orthopoly::{eval_orthonormal, recurrence, Family, WeightSpec};
use crate::quadrature::{composite_rule, gauss_rule, integrate, QuadRule};

pub const EXACTNESS_TOLERANCE: f64 = 1e-11;
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Perturbs the weights of the rules used by the orthonormality suite,
    /// which must then fail.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed error, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    fn from_worst(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: worst <= tolerance,
            worst,
            tolerance,
            detail,
        }
    }

    fn from_error(name: &str, tolerance: f64, err: crate::Error) -> Self {
        Self {
            name: name.into(),
            passed: false,
            worst: f64::INFINITY,
            tolerance,
            detail: err.to_string(),
        }
    }
}

/// Deterministic pseudo-random stream (splitmix64) so runs are reproducible.
struct Stream(u64);

impl Stream {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

fn classical_weights() -> Vec<WeightSpec> {
    vec![
        WeightSpec::legendre(),
        WeightSpec::jacobi(0.5, -0.3).expect("valid"),
        WeightSpec::laguerre(1.5).expect("valid"),
        WeightSpec::hermite(),
        WeightSpec::gen_hermite(2.0).expect("valid"),
    ]
}

fn generalized_weights() -> Vec<WeightSpec> {
    vec![
        WeightSpec::generalized(Family::GenJacobi, None, 0.5, -0.5, &[(0.0, 0.5)]).expect("valid"),
        WeightSpec::generalized(
            Family::GenLaguerre,
            None,
            0.0,
            0.0,
            &[(-1.0, 5.0), (2.0, 1.0)],
        )
        .expect("valid"),
        WeightSpec::generalized(Family::GenHermite, None, 0.0, 0.0, &[(0.5, 1.0)]).expect("valid"),
    ]
}

/// An `m`-point Gauss rule integrates random polynomials of degree `2m-1`
/// exactly: compared with a `4m`-point rule and with `∫ Σ c_k p_k w = c_0 √mass`.
pub fn quadrature_exactness() -> SuiteResult {
    const NAME: &str = "quadrature_exactness";
    let mut stream = Stream(0x5eed_0001);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for spec in classical_weights() {
        for m in [1usize, 3, 8, 20] {
            let mut run = || -> Result<f64> {
                let rec = recurrence(&spec, 4 * m)?;
                let low = gauss_rule(&rec, m)?;
                let high = gauss_rule(&rec, 4 * m)?;
                let degree = 2 * m - 1;
                let coeffs: Vec<f64> = (0..=degree).map(|_| stream.next_f64()).collect();
                let poly = |x: f64| -> f64 {
                    eval_orthonormal(&rec, x, degree)
                        .iter()
                        .zip(&coeffs)
                        .map(|(p, c)| p * c)
                        .sum()
                };
                let exact = coeffs[0] * rec.mass().sqrt();
                let scale = rec.mass().sqrt() * coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
                let err_low = (integrate(&low, poly) - exact).abs();
                let err_high = (integrate(&high, poly) - exact).abs();
                Ok(err_low.max(err_high) / scale)
            };
            match run() {
                Ok(e) => worst = worst.max(e),
                Err(err) => return SuiteResult::from_error(NAME, EXACTNESS_TOLERANCE, err),
            }
            checked += 1;
        }
    }
    SuiteResult::from_worst(
        NAME,
        worst,
        EXACTNESS_TOLERANCE,
        format!("{checked} rules, relative error"),
    )
}

fn gram_defect(spec: &WeightSpec, n: usize, rule: &QuadRule) -> Result<f64> {
    let rec = recurrence(spec, n)?;
    let mut gram = DenseMatrix::zeros(n + 1, n + 1);
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let p = eval_orthonormal(&rec, x, n);
        for i in 0..=n {
            for j in 0..=n {
                gram[(i, j)] += w * p[i] * p[j];
            }
        }
    }
    gram.add_scaled(-1.0, &DenseMatrix::identity(n + 1));
    Ok(gram.max_abs())
}

/// `∫ p_i p_j w = δ_ij` up to degree 20, with Gauss rules for classical
/// weights and composite rules for generalized ones.
pub fn orthonormality(options: SelftestOptions) -> SuiteResult {
    const NAME: &str = "orthonormality";
    const N: usize = 20;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let specs = classical_weights().into_iter().chain(generalized_weights());
    for spec in specs {
        let run = || -> Result<f64> {
            let rule = if spec.family().is_generalized() {
                composite_rule(&spec, 2 * N)?
            } else {
                gauss_rule(&recurrence(&spec, N + 1)?, N + 1)?
            };
            let rule = if options.inject_fault {
                rule.perturbed(|i| 1.0 + if i % 2 == 0 { 1e-6 } else { -1e-6 })
            } else {
                rule
            };
            gram_defect(&spec, N, &rule)
        };
        match run() {
            Ok(e) => worst = worst.max(e),
            Err(err) => return SuiteResult::from_error(NAME, ORTHONORMALITY_TOLERANCE, err),
        }
        checked += 1;
    }
    let fault = if options.inject_fault {
        ", perturbed rules"
    } else {
        ""
    };
    SuiteResult::from_worst(
        NAME,
        worst,
        ORTHONORMALITY_TOLERANCE,
        format!("{checked} weights, max |G - I|{fault}"),
    )
}

fn random_matrix(stream: &mut Stream, rows: usize, cols: usize) -> DenseMatrix {
    let entries = (0..rows * cols).map(|_| stream.next_f64()).collect();
    DenseMatrix::from_row_major(rows, cols, entries).expect("shape matches")
}

fn residual_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residuals of the tridiagonal, symmetric, generalized and singular value
/// solvers, relative to the matrix norms.
pub fn eigen_residuals() -> SuiteResult {
    const NAME: &str = "eigen_residuals";
    let mut stream = Stream(0x5eed_0003);
    let run = |stream: &mut Stream| -> Result<f64> {
        let mut worst: f64 = 0.0;
        // Jacobi matrices of the sample weights
        for spec in classical_weights().into_iter().chain(generalized_weights()) {
            let rec = recurrence(&spec, 30)?;
            let t = SymTridiag::new(rec.diag()[..30].to_vec(), rec.offdiag()[..29].to_vec())?;
            let dense = t.to_dense();
            let (values, vectors) = tridiag_eigen_full(&t)?;
            for (j, &lambda) in values.iter().enumerate() {
                let v = vectors.column(j);
                let tv = dense.matvec(&v);
                let r: Vec<f64> = tv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
                worst = worst.max(residual_norm(&r) / t.norm_inf());
            }
        }
        for size in [2usize, 7, 25] {
            let m = random_matrix(stream, size, size);
            let sym = m.gram();
            let eig = sym_eigen(&sym)?;
            let norm = sym.frobenius_norm();
            for (j, &lambda) in eig.values.iter().enumerate() {
                let v = eig.vector(j);
                let r: Vec<f64> = sym
                    .matvec(&v)
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| a - lambda * b)
                    .collect();
                worst = worst.max(residual_norm(&r) / norm);
            }

            let rect = random_matrix(stream, size, size + 1);
            let top = svd_largest(&rect)?;
            let mtm = rect.gram();
            let r: Vec<f64> = mtm
                .matvec(&top.right_vector)
                .iter()
                .zip(&top.right_vector)
                .map(|(a, b)| a - top.sigma * top.sigma * b)
                .collect();
            worst = worst.max(residual_norm(&r) / mtm.frobenius_norm());
            // σ is the largest singular value: compare with the top eigenvalue of MᵀM
            let lam = sym_eigen(&mtm)?.values.last().copied().unwrap_or(0.0);
            worst = worst.max((top.sigma * top.sigma - lam).abs() / mtm.frobenius_norm());

            let mut b = random_matrix(stream, size, size).gram();
            b.add_scaled(1.0, &DenseMatrix::identity(size));
            let g = gen_sym_eigen_max(&sym, &b)?;
            let av = sym.matvec(&g.vector);
            let bv = b.matvec(&g.vector);
            let r: Vec<f64> = av.iter().zip(&bv).map(|(a, c)| a - g.theta * c).collect();
            worst = worst.max(residual_norm(&r) / (norm + g.theta.abs() * b.frobenius_norm()));
        }
        Ok(worst)
    };
    match run(&mut stream) {
        Ok(w) => SuiteResult::from_worst(
            NAME,
            w,
            RESIDUAL_TOLERANCE,
            "relative residual norms".into(),
        ),
        Err(err) => SuiteResult::from_error(NAME, RESIDUAL_TOLERANCE, err),
    }
}

/// `Γ(n+x)/(Γ(n+y) n^{x-y})` is exactly 1 for `x = y` and for `x = y + 1`,
/// and approaches 1 monotonically for `x = 1/2, y = 0`.
pub fn gamma_ratio() -> SuiteResult {
    const NAME: &str = "gamma_ratio";
    let run = || -> Result<(bool, f64, String)> {
        let same = gamma_ratio_convergence(0.25, 0.25, &[1, 10, 100])?;
        let shift = gamma_ratio_convergence(1.0, 0.0, &[100])?;
        let approach = gamma_ratio_convergence(0.5, 0.0, &[10, 100, 1000])?;
        let dev: Vec<f64> = approach.iter().map(|r| (r - 1.0).abs()).collect();
        let monotone = dev.windows(2).all(|p| p[1] < p[0]);
        let exact = same
            .iter()
            .chain(&shift)
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max);
        Ok((
            monotone,
            exact,
            format!("|ratio - 1| at n = 10, 100, 1000: {dev:?}"),
        ))
    };
    match run() {
        Ok((monotone, exact, detail)) => SuiteResult {
            name: NAME.into(),
            passed: monotone && exact == 0.0,
            worst: exact,
            tolerance: 0.0,
            detail,
        },
        Err(err) => SuiteResult::from_error(NAME, 0.0, err),
    }
}

pub fn run_selftest(options: SelftestOptions) -> Vec<SuiteResult> {
    vec![
        quadrature_exactness(),
        orthonormality(options),
        eigen_residuals(),
        gamma_ratio(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_is_green() {
        for suite in run_selftest(SelftestOptions::default()) {
            assert!(suite.passed, "{suite:?}");
        }
    }

    #[test]
    fn injected_fault_breaks_orthonormality_only() {
        let results = run_selftest(SelftestOptions { inject_fault: true });
        for suite in results {
            assert_eq!(suite.passed, suite.name != "orthonormality", "{suite:?}");
        }
    }
}
