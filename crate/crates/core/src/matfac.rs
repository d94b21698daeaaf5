//! Lower-triangular workloads and their factorizations `A = B·C`.
//!
//! The sensitivity of a factorization is the largest column L2 norm of `C`
//! (unsquared). Objectives are `‖B‖_F²`; they are only comparable between
//! factorizations normalised to unit sensitivity.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrix type used by the factorizations.
pub type Matrix = DMatrix<f64>;

/// Lower-triangular, full-rank query matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    a: DMatrix<f64>,
}

impl Workload {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::domain("workload must be a non-empty square matrix"));
        }
        if !is_lower_triangular(&a, 0.0) {
            return Err(Error::domain("workload must be lower-triangular"));
        }
        if a.diagonal().iter().any(|&x| x == 0.0) {
            return Err(Error::domain("workload must be full rank"));
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rounds(&self) -> usize {
        self.a.nrows()
    }
}

/// Ones on and below the diagonal.
pub fn prefix_sum_workload(rounds: usize) -> Result<Workload> {
    if rounds == 0 {
        return Err(Error::domain("prefix-sum workload needs T >= 1"));
    }
    Workload::new(DMatrix::from_fn(rounds, rounds, |i, j| {
        if j <= i {
            1.0
        } else {
            0.0
        }
    }))
}

pub fn is_lower_triangular(m: &DMatrix<f64>, tol: f64) -> bool {
    (0..m.nrows()).all(|i| ((i + 1)..m.ncols()).all(|j| m[(i, j)].abs() <= tol))
}

/// Largest absolute entry strictly above the diagonal.
pub fn upper_residual(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max(m[(i, j)].abs());
        }
    }
    worst
}

/// `max_t ‖C[:, t]‖₂`.
pub fn sensitivity(c: &DMatrix<f64>) -> f64 {
    c.column_iter().map(|col| col.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub sens_c: f64,
    pub objective: f64,
    /// False when an iterative solver stopped before reaching its tolerance.
    pub converged: bool,
    pub iterations: usize,
}

impl Factorization {
    pub fn new(b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if !b.is_square() || b.shape() != c.shape() {
            return Err(Error::domain("factors must be square and of equal size"));
        }
        let sens_c = sensitivity(&c);
        let objective = b.norm_squared();
        Ok(Self {
            b,
            c,
            sens_c,
            objective,
            converged: true,
            iterations: 0,
        })
    }

    pub fn rounds(&self) -> usize {
        self.b.nrows()
    }

    pub fn product(&self) -> DMatrix<f64> {
        &self.b * &self.c
    }

    /// `‖B·C − A‖_F / ‖A‖_F`.
    pub fn relative_residual(&self, a: &Workload) -> f64 {
        (self.product() - a.matrix()).norm() / a.matrix().norm()
    }

    /// Objective after rescaling to unit sensitivity.
    pub fn normalized_objective(&self) -> f64 {
        self.objective * self.sens_c * self.sens_c
    }

    pub fn to_json(&self) -> FactorizationJson {
        let t = self.rounds();
        let row_major = |m: &DMatrix<f64>| {
            (0..t)
                .flat_map(|i| (0..t).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)])
                .collect()
        };
        FactorizationJson {
            t,
            b: row_major(&self.b),
            c: row_major(&self.c),
            sens_c: self.sens_c,
            objective: self.objective,
            converged: self.converged,
        }
    }

    pub fn from_json(doc: &FactorizationJson) -> Result<Self> {
        let t = doc.t;
        if t == 0 || doc.b.len() != t * t || doc.c.len() != t * t {
            return Err(Error::domain("factorization document has inconsistent sizes"));
        }
        let b = DMatrix::from_row_slice(t, t, &doc.b);
        let c = DMatrix::from_row_slice(t, t, &doc.c);
        let mut f = Self::new(b, c)?;
        if (f.sens_c - doc.sens_c).abs() > 1e-9 * f.sens_c.max(1.0) {
            return Err(Error::domain(format!(
                "stored sens_c {} disagrees with recomputed {}",
                doc.sens_c, f.sens_c
            )));
        }
        f.converged = doc.converged;
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

/// On-disk form: square matrices stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationJson {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub sens_c: f64,
    pub objective: f64,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

/// `(B = A, C = I)` and `(B = I, C = A)`.
pub fn trivial_factorizations(a: &Workload) -> Vec<Factorization> {
    let t = a.rounds();
    let id = DMatrix::identity(t, t);
    vec![
        Factorization::new(a.matrix().clone(), id.clone()).expect("square"),
        Factorization::new(id, a.matrix().clone()).expect("square"),
    ]
}

/// Lower-triangular square root `C` with `C·C = A`, used as `B = C`.
///
/// Entries are filled by diagonals: `C_ii = √A_ii` and, for `i > j`,
/// `C_ij (C_ii + C_jj) = A_ij − Σ_{j<k<i} C_ik C_kj`.
pub fn sqrt_factorization(a: &Workload) -> Result<Factorization> {
    let m = a.matrix();
    let t = a.rounds();
    if m.diagonal().iter().any(|&x| !(x > 0.0)) {
        return Err(Error::domain("square root needs a strictly positive diagonal"));
    }
    let mut c = DMatrix::zeros(t, t);
    for i in 0..t {
        c[(i, i)] = m[(i, i)].sqrt();
    }
    for gap in 1..t {
        for j in 0..t - gap {
            let i = j + gap;
            let inner: f64 = ((j + 1)..i).map(|k| c[(i, k)] * c[(k, j)]).sum();
            c[(i, j)] = (m[(i, j)] - inner) / (c[(i, i)] + c[(j, j)]);
        }
    }
    Factorization::new(c.clone(), c)
}

/// `(B·s, C/s)` with `s = Δ(C)`.
pub fn normalize_sensitivity(f: &Factorization) -> Result<Factorization> {
    let s = f.sens_c;
    if !(s > 0.0) {
        return Err(Error::domain("cannot normalise a zero-sensitivity factorization"));
    }
    let mut out = Factorization::new(&f.b * s, &f.c / s)?;
    out.converged = f.converged;
    out.iterations = f.iterations;
    Ok(out)
}

/// Symmetric PSD square root through an eigendecomposition.
fn psd_sqrt(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `tr(S·X⁻¹)`, or `None` when `X` is not positive definite.
fn trace_objective(s: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<f64> {
    let chol = x.clone().cholesky()?;
    Some((s * chol.inverse()).trace())
}

/// Minimises `‖B‖_F²` subject to `A = B·C`, `Δ(C) = 1`.
///
/// Works on `X = CᵀC` with `diag(X) = 1`, minimising `tr(AᵀA·X⁻¹)`. The
/// stationarity condition `X·Λ·X = AᵀA` gives
/// `X = Λ^{-½}(Λ^{½} AᵀA Λ^{½})^{½} Λ^{-½}`, and the multipliers are
/// updated by the fixed point `λ ← diag((Λ^{½} AᵀA Λ^{½})^{½})`. Each
/// iterate is rescaled onto `diag(X) = 1` before scoring, and the best
/// feasible iterate is kept.
///
/// The returned `C` is the transposed Cholesky factor of `X` (upper
/// triangular); pair it with [`lq_reparameterize`] for streaming use.
pub fn optimize_factorization(a: &Workload, iters: usize, tol: f64) -> Result<Factorization> {
    let t = a.rounds();
    let am = a.matrix();
    let s = am.transpose() * am;
    let mut lambda = DVector::from_element(t, 1.0);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut prev = f64::INFINITY;
    let mut converged = false;
    let mut used = 0;
    for k in 0..iters.max(1) {
        used = k + 1;
        let root = lambda.map(f64::sqrt);
        let scaled = DMatrix::from_diagonal(&root) * &s * DMatrix::from_diagonal(&root);
        let m = psd_sqrt(scaled);
        let inv_root = root.map(|r| 1.0 / r);
        let x = DMatrix::from_diagonal(&inv_root) * &m * DMatrix::from_diagonal(&inv_root);
        let d = x.diagonal().map(|v| 1.0 / v.sqrt());
        let mut feasible = DMatrix::from_diagonal(&d) * x * DMatrix::from_diagonal(&d);
        feasible = (&feasible + feasible.transpose()) * 0.5;
        let Some(obj) = trace_objective(&s, &feasible) else {
            return Err(Error::Numerical {
                message: "factorization iterate lost positive definiteness".into(),
                diagnostics: format!("iteration={k}"),
            });
        };
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, feasible));
        }
        lambda = m.diagonal();
        if (prev - obj).abs() <= tol * obj {
            converged = true;
            break;
        }
        prev = obj;
    }
    let (_, x) = best.expect("at least one iterate");
    let chol = x.cholesky().ok_or_else(|| Error::Numerical {
        message: "optimised Gram matrix is not positive definite".into(),
        diagnostics: String::new(),
    })?;
    let lower = chol.l();
    let c = lower.transpose();
    // B = A·C⁻¹  ⇔  Cᵀ·Bᵀ = Aᵀ with Cᵀ lower-triangular
    let bt = lower
        .solve_lower_triangular(&am.transpose())
        .ok_or_else(|| Error::Numerical {
            message: "triangular solve failed".into(),
            diagnostics: String::new(),
        })?;
    let mut f = Factorization::new(bt.transpose(), c)?;
    f.converged = converged;
    f.iterations = used;
    Ok(f)
}

/// Rewrites `B = L·Q` and returns `(L, Q·C)`. `L` is lower-triangular with
/// a positive diagonal; `Q·C = L⁻¹·A` is lower-triangular whenever `A` is.
pub fn lq_reparameterize(f: &Factorization) -> Result<Factorization> {
    let t = f.rounds();
    let qr = f.b.transpose().qr();
    let r = qr.r();
    let q = qr.q();
    let diag = r.diagonal();
    let scale = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if diag.iter().any(|x| x.abs() <= 1e-12 * scale) || scale == 0.0 {
        return Err(Error::Numerical {
            message: "B is rank deficient".into(),
            diagnostics: format!("min |R_ii| / max |R_ii| <= 1e-12 at T = {t}"),
        });
    }
    let signs = DMatrix::from_diagonal(&diag.map(|x| x.signum()));
    let l = r.transpose() * &signs;
    let q_rows = &signs * q.transpose();
    let mut out = Factorization::new(l, q_rows * &f.c)?;
    out.converged = f.converged;
    out.iterations = f.iterations;
    Ok(out)
}

/// Factorization recipes addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TrivialB,
    TrivialC,
    Sqrt,
    Optimal,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TrivialB, Method::TrivialC, Method::Sqrt, Method::Optimal];

    pub fn name(self) -> &'static str {
        match self {
            Method::TrivialB => "trivial-b",
            Method::TrivialC => "trivial-c",
            Method::Sqrt => "sqrt",
            Method::Optimal => "optimal",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trivial-b" => Ok(Method::TrivialB),
            "trivial-c" => Ok(Method::TrivialC),
            "sqrt" => Ok(Method::Sqrt),
            "optimal" => Ok(Method::Optimal),
            other => Err(Error::domain(format!("unknown factorization method `{other}`"))),
        }
    }
}

pub const DEFAULT_ITERS: usize = 5000;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Builds a factorization of the prefix-sum workload. Iterative results are
/// returned as solved; closed forms are returned unnormalised.
pub fn build(method: Method, rounds: usize) -> Result<Factorization> {
    let a = prefix_sum_workload(rounds)?;
    match method {
        Method::TrivialB => Ok(trivial_factorizations(&a).swap_remove(0)),
        Method::TrivialC => Ok(trivial_factorizations(&a).swap_remove(1)),
        Method::Sqrt => sqrt_factorization(&a),
        Method::Optimal => optimize_factorization(&a, DEFAULT_ITERS, DEFAULT_TOL),
    }
}
