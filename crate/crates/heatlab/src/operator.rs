//! Dense-matrix realization of the integro-differential operators on the
//! discretized field space: the derivative `D`, its zero-mean
//! pseudo-inverse, heat-semigroup exponentials, multiplication by the
//! sawtooth coordinate `x`, integral kernels, and time-dependent operator
//! families.
//!
//! Representation convention: a valence-(1,1) object (an operator) is the
//! matrix `M` that acts on sample vectors, so continuum kernels relate to
//! it by `M = K·dx`. Adjoints with respect to `∫ dx` coincide with the
//! plain matrix transpose because the grid is uniform.

use crate::grid::{to_coeffs, to_field, Field, GridSpec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

/// Dense matrix acting on fields of one grid.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    grid: GridSpec,
    matrix: DMatrix<f64>,
    kernel_dim: usize,
}

impl LinearOperator {
    pub fn new(grid: GridSpec, matrix: DMatrix<f64>, kernel_dim: usize) -> Self {
        assert_eq!(matrix.nrows(), grid.n_points());
        assert_eq!(matrix.ncols(), grid.n_points());
        assert!(matrix.iter().all(|v| v.is_finite()), "operator entries must be finite");
        LinearOperator { grid, matrix, kernel_dim }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Known analytic kernel dimension (0 when the operator is injective).
    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    pub fn apply(&self, f: &Field) -> Field {
        assert_eq!(f.grid(), self.grid, "operator and field grids differ");
        let v = DVector::from_column_slice(f.values());
        let out = &self.matrix * v;
        Field::new(self.grid, out.iter().copied().collect()).expect("finite result")
    }
}

/// Build the matrix of a spectral multiplier `m ↦ g(m, k_m)` by pushing the
/// standard basis through mode space.
pub fn spectral_matrix(grid: GridSpec, mult: impl Fn(i64, f64) -> Complex64) -> DMatrix<f64> {
    let n = grid.n_points();
    let mut mat = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = Field::zeros(grid);
        e.values_mut()[j] = 1.0;
        let mut c = to_coeffs(&e);
        for bin in 0..n {
            let m = grid.bin_mode(bin);
            let k = grid.wavenumber(bin);
            c.modes_mut()[bin] *= mult(m, k);
        }
        let col = to_field(&c);
        for i in 0..n {
            mat[(i, j)] = col.values()[i];
        }
    }
    mat
}

/// Spectral differentiation matrix (antisymmetric; Nyquist mode zeroed).
pub fn make_d(grid: GridSpec) -> LinearOperator {
    let nyq = -(grid.n_points() as i64) / 2;
    let mat = spectral_matrix(grid, |m, k| {
        if m == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k)
        }
    });
    LinearOperator::new(grid, mat, 1)
}

/// `D^p` for any non-negative power, built spectrally (exact, no matrix
/// products). Odd powers zero the Nyquist mode like [`make_d`].
pub fn make_d_pow(grid: GridSpec, p: u32) -> LinearOperator {
    if p == 0 {
        return make_identity(grid);
    }
    let nyq = -(grid.n_points() as i64) / 2;
    let mat = spectral_matrix(grid, |m, k| {
        if p % 2 == 1 && m == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k).powi(p as i32)
        }
    });
    LinearOperator::new(grid, mat, if p % 2 == 1 { 1 } else { 0 })
}

/// Zero-mean antiderivative: the Moore-Penrose pseudo-inverse of `D`,
/// annihilating the constant mode.
pub fn make_dinv(grid: GridSpec) -> LinearOperator {
    let nyq = -(grid.n_points() as i64) / 2;
    let mat = spectral_matrix(grid, |m, k| {
        if m == 0 || m == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0) / Complex64::new(0.0, k)
        }
    });
    LinearOperator::new(grid, mat, 1)
}

/// Negative powers of `D` through the pseudo-inverse: `D^{-p}` zeroes the
/// constant (and Nyquist) modes and inverts the rest.
pub fn make_dinv_pow(grid: GridSpec, p: u32) -> LinearOperator {
    let nyq = -(grid.n_points() as i64) / 2;
    let mat = spectral_matrix(grid, |m, k| {
        if m == 0 || m == nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0) / Complex64::new(0.0, k).powi(p as i32)
        }
    });
    LinearOperator::new(grid, mat, 1)
}

/// Heat-exponential matrix with multiplier `e^{s k_m²}` on mode `m`.
///
/// For `s > 0` the multiplier grows without bound in `k`; the matrix is
/// therefore restricted to the mode block `|m| <= cutoff` (modes outside
/// the block map to zero). For `s <= 0` the full decaying matrix is built
/// and `cutoff` is ignored.
pub fn make_exp_d2(grid: GridSpec, s: f64, cutoff: Option<usize>) -> LinearOperator {
    let amplifying = s > 0.0;
    let kc = cutoff.unwrap_or(grid.n_points() / 8) as i64;
    let mat = spectral_matrix(grid, |m, k| {
        if amplifying && m.abs() > kc {
            Complex64::new(0.0, 0.0)
        } else {
            let e = s * k * k;
            // overflow guard; unreachable under the default cutoffs
            if e > 700.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(e.exp(), 0.0)
            }
        }
    });
    let kdim = if amplifying {
        grid.n_points() - block_dim(grid, kc as usize)
    } else {
        0
    };
    LinearOperator::new(grid, mat, kdim)
}

/// Number of modes inside the block `|m| <= kc` (counting the zero mode,
/// excluding the unpaired Nyquist mode).
pub fn block_dim(grid: GridSpec, kc: usize) -> usize {
    let half = grid.n_points() / 2 - 1;
    2 * kc.min(half) + 1
}

/// Projector onto the mode block `|m| <= kc`.
pub fn make_mode_block(grid: GridSpec, kc: usize) -> LinearOperator {
    let kc = kc as i64;
    let mat = spectral_matrix(grid, |m, _| {
        if m.abs() <= kc {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    LinearOperator::new(grid, mat, 0)
}

/// Projector onto the constant (zero) mode.
pub fn make_zero_mode_projector(grid: GridSpec) -> LinearOperator {
    let n = grid.n_points();
    let mat = DMatrix::from_element(n, n, 1.0 / n as f64);
    LinearOperator::new(grid, mat, 0)
}

/// Multiplication by the sawtooth coordinate `x ∈ [-a, a)`.
///
/// `x` is not a function on the circle; identities involving this operator
/// hold only on fields supported away from the seam `x = ±a`.
pub fn make_xmul(grid: GridSpec) -> LinearOperator {
    let n = grid.n_points();
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        mat[(i, i)] = grid.point(i);
    }
    LinearOperator::new(grid, mat, 0)
}

pub fn make_identity(grid: GridSpec) -> LinearOperator {
    LinearOperator::new(grid, DMatrix::identity(grid.n_points(), grid.n_points()), 0)
}

/// Cyclic translation by `steps` grid points.
pub fn make_translation(grid: GridSpec, steps: usize) -> LinearOperator {
    let n = grid.n_points();
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        mat[((i + steps) % n, i)] = 1.0;
    }
    LinearOperator::new(grid, mat, 0)
}

pub fn compose(a: &LinearOperator, b: &LinearOperator) -> LinearOperator {
    assert_eq!(a.grid, b.grid, "operator grids differ");
    LinearOperator::new(a.grid, a.matrix() * b.matrix(), 0)
}

/// Adjoint with respect to the `∫ dx` pairing; equal to the matrix
/// transpose on a uniform grid.
pub fn transpose_w(a: &LinearOperator) -> LinearOperator {
    LinearOperator::new(a.grid, a.matrix().transpose(), a.kernel_dim)
}

pub fn add(a: &LinearOperator, b: &LinearOperator) -> LinearOperator {
    assert_eq!(a.grid, b.grid, "operator grids differ");
    LinearOperator::new(a.grid, a.matrix() + b.matrix(), 0)
}

pub fn scale(c: f64, a: &LinearOperator) -> LinearOperator {
    LinearOperator::new(a.grid, a.matrix() * c, a.kernel_dim)
}

/// Moore-Penrose pseudo-inverse via SVD, zeroing singular values below
/// `rank_tol · σ_max`. The returned `kernel_dim` is `N - rank`.
pub fn pseudo_inverse(a: &LinearOperator, rank_tol: f64) -> LinearOperator {
    let (pinv, rank) = pinv_matrix(a.matrix(), rank_tol);
    LinearOperator::new(a.grid, pinv, a.grid.n_points() - rank)
}

pub fn pinv_matrix(m: &DMatrix<f64>, rank_tol: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let eps = rank_tol * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let pinv = svd.pseudo_inverse(eps).expect("svd computed with u/v");
    (pinv, rank)
}

pub fn numerical_rank_of(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Sampled two-point kernel `K(x_i, y_j)`; the induced operator applies
/// one quadrature weight: `(Kf)(x_i) = Σ_j K(x_i, y_j) f(y_j) dx`.
#[derive(Debug, Clone)]
pub struct IntegralKernel {
    grid: GridSpec,
    samples: DMatrix<f64>,
}

impl IntegralKernel {
    pub fn new(grid: GridSpec, samples: DMatrix<f64>) -> Self {
        assert_eq!(samples.nrows(), grid.n_points());
        assert_eq!(samples.ncols(), grid.n_points());
        assert!(samples.iter().all(|v| v.is_finite()), "kernel samples must be finite");
        IntegralKernel { grid, samples }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n_points();
        let samples =
            DMatrix::from_fn(n, n, |i, j| f(grid.point(i), grid.point(j)));
        IntegralKernel { grid, samples }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }
}

pub fn from_integral_kernel(k: &IntegralKernel) -> LinearOperator {
    LinearOperator::new(k.grid, k.samples() * k.grid.dx(), 0)
}

type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Time-dependent operator family `t ↦ matrix` on a declared interval,
/// with an analytic time derivative when available.
#[derive(Clone)]
pub struct OperatorFamily {
    grid: GridSpec,
    t_min: f64,
    t_max: f64,
    eval: MatrixFn,
    ddt: Option<MatrixFn>,
    /// Finite-difference step for the `ddt` fallback.
    pub dt_op: f64,
    time_independent: bool,
}

impl std::fmt::Debug for OperatorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorFamily")
            .field("grid", &self.grid)
            .field("t_min", &self.t_min)
            .field("t_max", &self.t_max)
            .field("analytic_ddt", &self.ddt.is_some())
            .field("time_independent", &self.time_independent)
            .finish()
    }
}

pub const DEFAULT_FAMILY_INTERVAL: (f64, f64) = (0.0, 1.0);
pub const DEFAULT_DT_OP: f64 = 1e-5;

impl OperatorFamily {
    pub fn new(
        grid: GridSpec,
        (t_min, t_max): (f64, f64),
        eval: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        ddt: Option<MatrixFn>,
    ) -> Self {
        OperatorFamily {
            grid,
            t_min,
            t_max,
            eval: Arc::new(eval),
            ddt,
            dt_op: DEFAULT_DT_OP,
            time_independent: false,
        }
    }

    pub fn with_analytic_ddt(
        grid: GridSpec,
        interval: (f64, f64),
        eval: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        ddt: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(grid, interval, eval, Some(Arc::new(ddt)))
    }

    /// Family that does not depend on time at all.
    pub fn constant(grid: GridSpec, m: DMatrix<f64>) -> Self {
        let n = grid.n_points();
        let zero = DMatrix::zeros(n, n);
        let m = Arc::new(m);
        let mc = m.clone();
        let mut fam = Self::new(
            grid,
            DEFAULT_FAMILY_INTERVAL,
            move |_| (*mc).clone(),
            Some(Arc::new(move |_| zero.clone())),
        );
        fam.time_independent = true;
        fam
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn time_independent(&self) -> bool {
        self.time_independent
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        (self.eval)(t)
    }

    pub fn has_analytic_ddt(&self) -> bool {
        self.ddt.is_some()
    }

    /// `∂F/∂t` at `t`: analytic when registered, else central differences
    /// with step `dt_op`.
    pub fn ddt(&self, t: f64) -> DMatrix<f64> {
        match &self.ddt {
            Some(d) => d(t),
            None => {
                let h = self.dt_op;
                ((self.eval)(t + h) - (self.eval)(t - h)) / (2.0 * h)
            }
        }
    }
}

pub fn family_ddt(f: &OperatorFamily, t: f64) -> DMatrix<f64> {
    f.ddt(t)
}

/// Entrywise sup difference relative to the larger matrix scale.
pub fn rel_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let diff = (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    diff / scale
}

/// Debug-only plain-text dump: grid header plus the dense matrix rows.
pub fn operator_to_string(op: &LinearOperator) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# a={:.16e} N={} kernel_dim={}",
        op.grid.half_width(),
        op.grid.n_points(),
        op.kernel_dim
    );
    for i in 0..op.grid.n_points() {
        let row: Vec<String> =
            (0..op.grid.n_points()).map(|j| format!("{:.16e}", op.matrix()[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{differentiate, Field};
    use crate::sampling::{band_limited, gaussian_bump};
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::default_desk()
    }

    #[test]
    fn d_annihilates_constants() {
        let d = make_d(grid());
        let out = d.apply(&Field::constant(grid(), 2.5));
        assert!(out.sup_norm() <= 1e-13);
    }

    #[test]
    fn d_matches_spectral_differentiation() {
        let g = grid();
        let d = make_d(g);
        let f = band_limited(g, 8, 1, false);
        let diff = d.apply(&f).sub(&differentiate(&f, 1));
        assert!(diff.sup_norm() <= 1e-11);
    }

    #[test]
    fn d_times_dinv_is_identity_minus_zero_mode() {
        let g = grid();
        let lhs = compose(&make_d(g), &make_dinv(g)).into_matrix();
        // D also zeroes the (unpaired) Nyquist mode, so compare on the
        // complement of {zero mode, Nyquist}.
        let p0 = make_zero_mode_projector(g).into_matrix();
        let nyq = make_mode_block(g, g.n_points() / 2 - 1).into_matrix();
        let expect = &nyq - &p0;
        let diff = rel_entry_diff(&lhs, &expect);
        assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn commutator_of_x_and_d2_is_minus_two_d_on_windowed_fields() {
        // Oracle: the analytic identity [D², x] = 2D, probed on Gaussian
        // bumps far from the seam where the sawtooth x is smooth.
        let g = grid();
        let x = make_xmul(g);
        let d = make_d(g);
        let d2 = make_d_pow(g, 2);
        let f = gaussian_bump(g, 0.3, 0.42);
        let lhs = compose(&x, &d2).apply(&f).sub(&compose(&d2, &x).apply(&f));
        let rhs = d.apply(&f).scale(-2.0);
        let err = lhs.sub(&rhs).sup_norm() / rhs.sup_norm();
        assert!(err <= 1e-8, "windowed commutator err {err}");
    }

    #[test]
    fn exp_d2_composition_consistency() {
        let g = grid();
        let d = make_d(g);
        let k = 3.0;
        let f = Field::from_fn(g, |x| (k * x).cos());
        let lhs = compose(&d, &d).apply(&f);
        let expect = f.scale(-k * k);
        assert!(lhs.sub(&expect).sup_norm() <= 1e-10);
    }

    #[test]
    fn transpose_properties() {
        let g = grid();
        let d = make_d(g);
        assert!(rel_entry_diff(&transpose_w(&d).into_matrix(), &scale(-1.0, &d).into_matrix()) <= 1e-12);
        let e = make_exp_d2(g, -0.3, None);
        assert!(rel_entry_diff(&transpose_w(&e).into_matrix(), &e.into_matrix()) <= 1e-12);
    }

    #[test]
    fn spectral_operators_commute_with_translation() {
        let g = grid();
        let t = make_translation(g, 5);
        for op in [make_d(g), make_dinv(g), make_exp_d2(g, -0.2, None)] {
            let lhs = compose(&t, &op).into_matrix();
            let rhs = compose(&op, &t).into_matrix();
            assert!(rel_entry_diff(&lhs, &rhs) <= 1e-12);
        }
    }

    #[test]
    fn spectral_operators_mutually_commute() {
        let g = grid();
        let ops = [make_d(g), make_dinv(g), make_exp_d2(g, -0.15, None)];
        for a in &ops {
            for b in &ops {
                let ab = compose(a, b).into_matrix();
                let ba = compose(b, a).into_matrix();
                assert!(rel_entry_diff(&ab, &ba) <= 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_inverse_of_d_is_dinv() {
        let g = grid();
        let p = pseudo_inverse(&make_d(g), 1e-10);
        assert_eq!(p.kernel_dim(), 2); // constants + Nyquist
        let diff = rel_entry_diff(p.matrix(), make_dinv(g).matrix());
        assert!(diff <= 1e-10, "diff {diff}");
    }

    #[test]
    fn pseudo_inverse_of_identity() {
        let g = grid();
        let p = pseudo_inverse(&make_identity(g), 1e-10);
        assert_eq!(p.kernel_dim(), 0);
        assert!(rel_entry_diff(p.matrix(), make_identity(g).matrix()) <= 1e-12);
    }

    #[test]
    fn pinv_compose_is_row_space_projector() {
        let g = grid();
        // Random low-rank-ish operator: band projector times a kernel.
        let k = IntegralKernel::from_fn(g, |x, y| (x - y).cos() + 0.5 * (2.0 * (x + y)).cos());
        let a = from_integral_kernel(&k);
        let p = pseudo_inverse(&a, 1e-10);
        let proj = p.matrix() * a.matrix();
        let idem = rel_entry_diff(&(&proj * &proj), &proj);
        let symm = rel_entry_diff(&proj.transpose(), &proj);
        assert!(idem <= 1e-10, "idempotency {idem}");
        assert!(symm <= 1e-10, "symmetry {symm}");
    }

    #[test]
    fn delta_kernel_gives_identity() {
        let g = grid();
        let dx = g.dx();
        let n = g.n_points();
        let samples = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / dx } else { 0.0 });
        let op = from_integral_kernel(&IntegralKernel::new(g, samples));
        assert!(rel_entry_diff(op.matrix(), make_identity(g).matrix()) <= 1e-12);
    }

    #[test]
    fn delta_prime_kernel_gives_d() {
        let g = grid();
        // Spectral δ'(x-y): kernel samples of the derivative operator.
        let d = make_d(g);
        let samples = d.matrix() / g.dx();
        let op = from_integral_kernel(&IntegralKernel::new(g, samples));
        assert!(rel_entry_diff(op.matrix(), d.matrix()) <= 1e-10);
    }

    #[test]
    fn separable_cos_kernel_has_rank_two() {
        let g = grid();
        let k = IntegralKernel::from_fn(g, |x, y| (x - y).cos() / (2.0 * g.half_width()) * 3.0);
        let op = from_integral_kernel(&k);
        assert_eq!(numerical_rank_of(op.matrix(), 1e-10), 2);
    }

    #[test]
    fn family_ddt_analytic_vs_structure() {
        let g = grid();
        let kc = Some(8);
        // F(t) = e^{2t k²}-multiplier times D^{-1} on the block; its time
        // derivative is -2D²·F(t) with the sign convention of make_exp_d2.
        let fam = OperatorFamily::with_analytic_ddt(
            g,
            (0.01, 1.0),
            move |t| {
                (make_exp_d2(g, 2.0 * t, kc).matrix() * make_dinv(g).matrix()).clone()
            },
            move |t| {
                let f = make_exp_d2(g, 2.0 * t, kc).matrix() * make_dinv(g).matrix();
                make_d_pow(g, 2).matrix() * f * -2.0
            },
        );
        let t = 0.12;
        let fd = {
            let h = 1e-6;
            (fam.eval(t + h) - fam.eval(t - h)) / (2.0 * h)
        };
        let diff = rel_entry_diff(&fam.ddt(t), &fd);
        assert!(diff <= 1e-8, "analytic vs fd {diff}");
    }

    #[test]
    fn constant_family_has_zero_ddt() {
        let g = grid();
        let fam = OperatorFamily::constant(g, make_d(g).into_matrix());
        assert!(fam.ddt(0.3).iter().all(|&v| v == 0.0));
        assert!(fam.time_independent());
    }

    #[test]
    fn linear_in_t_family_ddt() {
        let g = grid();
        // F(t) = 2tD + x, dF/dt = 2D.
        let fam = OperatorFamily::new(
            g,
            (0.0, 1.0),
            move |t| make_d(g).matrix() * (2.0 * t) + make_xmul(g).matrix(),
            None,
        );
        let diff = rel_entry_diff(&fam.ddt(0.4), &(make_d(g).matrix() * 2.0));
        assert!(diff <= 1e-6, "fd ddt of linear family {diff}");
    }

    #[test]
    fn xmul_is_sawtooth_diagonal() {
        let g = grid();
        let x = make_xmul(g);
        assert_eq!(x.matrix()[(0, 0)], -PI);
        let mid = g.n_points() / 2;
        assert_eq!(x.matrix()[(mid, mid)], 0.0);
    }
}
