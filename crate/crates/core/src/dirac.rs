//! Finite-dimensional Dirac structures.
//!
//! A Dirac structure on `ℝⁿ × ℝⁿ` is stored in kernel form `D = ker[F, G]`
//! with the column blocks of `F` and `G` partitioned as (state, resistive,
//! port). The bond space carries the indefinite pairing
//! `⟨⟨(f₁,e₁),(f₂,e₂)⟩⟩ = ⟨f₁,e₂⟩ + ⟨f₂,e₁⟩`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, PhsError, Result};
use crate::linalg::{self, RankInfo};

/// Default tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Block sizes of the flow (and effort) space: state, resistive and port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_s: usize,
    pub n_r: usize,
    pub n_p: usize,
}

impl Dims {
    pub fn new(n_s: usize, n_r: usize, n_p: usize) -> Self {
        Self { n_s, n_r, n_p }
    }

    pub fn n(&self) -> usize {
        self.n_s + self.n_r + self.n_p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub rank: usize,
    pub expected_rank: usize,
    /// `‖FGᵀ + GFᵀ‖_max` (or `‖KᵀL + LᵀK‖_max` for image representations).
    pub skew_defect: f64,
    /// Bound the skew defect was compared against (tol times matrix scale).
    pub skew_bound: f64,
    pub rank_threshold: f64,
    pub smallest_kept_singular_value: f64,
    pub largest_dropped_singular_value: f64,
}

impl ValidationReport {
    fn build(info: RankInfo, expected_rank: usize, skew_defect: f64, skew_bound: f64) -> Self {
        Self {
            passed: info.rank == expected_rank && skew_defect <= skew_bound,
            rank: info.rank,
            expected_rank,
            skew_defect,
            skew_bound,
            rank_threshold: info.threshold,
            smallest_kept_singular_value: info.smallest_kept,
            largest_dropped_singular_value: info.largest_dropped,
        }
    }
}

/// Kernel representation `D = ker[F, G]` with `F, G ∈ ℝⁿˣⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracKernelRep {
    dims: Dims,
    f: DMatrix<f64>,
    g: DMatrix<f64>,
}

impl DiracKernelRep {
    pub fn new(dims: Dims, f: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let n = dims.n();
        if n == 0 {
            return Err(dim_err("total dimension must be positive"));
        }
        if f.shape() != (n, n) || g.shape() != (n, n) {
            return Err(dim_err(format!(
                "F is {}x{}, G is {}x{}, expected {n}x{n}",
                f.nrows(),
                f.ncols(),
                g.nrows(),
                g.ncols()
            )));
        }
        Ok(Self { dims, f, g })
    }

    /// Interconnection form: `ẋ = J e_s + Σ b_c f_c + Σ a_c e_c`, with one
    /// output row per port channel. Channel `c` (resistive channels first,
    /// then external ports) is flow-driven when `flow_driven[c]` is true, in
    /// which case its effort is read out as `e_c = b_cᵀ e_s`; otherwise its
    /// flow is read out as `f_c = a_cᵀ e_s`. `coupling` holds the columns
    /// `b_c` / `a_c`. The result is a Dirac structure whenever `J` is skew.
    pub fn interconnection(
        dims: Dims,
        j: &DMatrix<f64>,
        coupling: &DMatrix<f64>,
        flow_driven: &[bool],
    ) -> Result<Self> {
        let (n_s, n) = (dims.n_s, dims.n());
        let n_q = n - n_s;
        if j.shape() != (n_s, n_s) || coupling.shape() != (n_s, n_q) || flow_driven.len() != n_q {
            return Err(dim_err("interconnection blocks do not match dimensions"));
        }
        let mut f = DMatrix::zeros(n, n);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n_s {
            f[(i, i)] = -1.0;
        }
        g.view_mut((0, 0), (n_s, n_s)).copy_from(&(-j));
        for c in 0..n_q {
            let col = coupling.column(c);
            let row = n_s + c;
            if flow_driven[c] {
                f.view_mut((0, n_s + c), (n_s, 1)).copy_from(&(-col));
                g[(row, n_s + c)] = 1.0;
            } else {
                g.view_mut((0, n_s + c), (n_s, 1)).copy_from(&(-col));
                f[(row, n_s + c)] = 1.0;
            }
            g.view_mut((row, 0), (1, n_s)).copy_from(&(-col.transpose()));
        }
        Self::new(dims, f, g)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n(&self) -> usize {
        self.dims.n()
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    fn block(m: &DMatrix<f64>, start: usize, width: usize) -> DMatrix<f64> {
        m.columns(start, width).into_owned()
    }

    pub fn f_s(&self) -> DMatrix<f64> {
        Self::block(&self.f, 0, self.dims.n_s)
    }
    pub fn f_r(&self) -> DMatrix<f64> {
        Self::block(&self.f, self.dims.n_s, self.dims.n_r)
    }
    pub fn f_p(&self) -> DMatrix<f64> {
        Self::block(&self.f, self.dims.n_s + self.dims.n_r, self.dims.n_p)
    }
    pub fn g_s(&self) -> DMatrix<f64> {
        Self::block(&self.g, 0, self.dims.n_s)
    }
    pub fn g_r(&self) -> DMatrix<f64> {
        Self::block(&self.g, self.dims.n_s, self.dims.n_r)
    }
    pub fn g_p(&self) -> DMatrix<f64> {
        Self::block(&self.g, self.dims.n_s + self.dims.n_r, self.dims.n_p)
    }

    /// The n×2n matrix `[F, G]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        linalg::hstack(&self.f, &self.g)
    }

    /// `F f + G e`; zero exactly on members of the structure.
    pub fn apply(&self, f: &DVector<f64>, e: &DVector<f64>) -> DVector<f64> {
        &self.f * f + &self.g * e
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let skew = &self.f * self.g.transpose() + &self.g * self.f.transpose();
        let defect = linalg::max_abs(&skew);
        let scale = (linalg::max_abs(&self.f) * linalg::max_abs(&self.g)).max(1.0);
        let info = linalg::numerical_rank(&self.stacked());
        ValidationReport::build(info, self.n(), defect, tol * scale)
    }

    /// Orthonormal basis (2n × n for a valid structure) of `ker[F, G]`,
    /// flows stacked above efforts.
    pub fn basis(&self) -> DMatrix<f64> {
        linalg::null_space(&self.stacked())
    }
}

/// Image representation `D = im[K; L]` (flows `K φ`, efforts `L φ`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiracImageRep {
    dims: Dims,
    k: DMatrix<f64>,
    l: DMatrix<f64>,
}

impl DiracImageRep {
    pub fn new(dims: Dims, k: DMatrix<f64>, l: DMatrix<f64>) -> Result<Self> {
        let n = dims.n();
        if n == 0 || k.shape() != (n, n) || l.shape() != (n, n) {
            return Err(dim_err(format!("K and L must both be {n}x{n}")));
        }
        Ok(Self { dims, k, l })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Checks rank of the stacked 2n×n matrix `[K; L]` and `KᵀL + LᵀK = 0`.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let skew = self.k.transpose() * &self.l + self.l.transpose() * &self.k;
        let defect = linalg::max_abs(&skew);
        let scale = (linalg::max_abs(&self.k) * linalg::max_abs(&self.l)).max(1.0);
        let info = linalg::numerical_rank(&linalg::vstack(&self.k, &self.l));
        ValidationReport::build(info, self.dims.n(), defect, tol * scale)
    }
}

/// A flow/effort pair in the bond space `ℝⁿ × ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondVector {
    pub f: DVector<f64>,
    pub e: DVector<f64>,
}

impl BondVector {
    pub fn new(f: DVector<f64>, e: DVector<f64>) -> Result<Self> {
        if f.len() != e.len() {
            return Err(dim_err(format!("flow has length {}, effort {}", f.len(), e.len())));
        }
        Ok(Self { f, e })
    }

    /// Splits a stacked `(f; e)` vector of length 2n.
    pub fn from_stacked(v: &DVector<f64>) -> Result<Self> {
        if !v.len().is_multiple_of(2) {
            return Err(dim_err("stacked bond vector must have even length"));
        }
        let n = v.len() / 2;
        Ok(Self {
            f: v.rows(0, n).into_owned(),
            e: v.rows(n, n).into_owned(),
        })
    }

    /// Assembles `(f_s; f_r; f_p)` and `(e_s; e_r; e_p)` from blocks.
    pub fn from_blocks(flows: [&DVector<f64>; 3], efforts: [&DVector<f64>; 3]) -> Result<Self> {
        Self::new(linalg::concat(&flows), linalg::concat(&efforts))
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn stacked(&self) -> DVector<f64> {
        linalg::concat(&[&self.f, &self.e])
    }
}

pub fn validate_kernel(rep: &DiracKernelRep, tol: f64) -> ValidationReport {
    rep.validate(tol)
}

/// `⟨f₁, e₂⟩ + ⟨f₂, e₁⟩`.
pub fn pairing(d1: &BondVector, d2: &BondVector) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(dim_err(format!("pairing of lengths {} and {}", d1.len(), d2.len())));
    }
    Ok(d1.f.dot(&d2.e) + d2.f.dot(&d1.e))
}

/// `ker[F, G] = im[Gᵀ; Fᵀ]`.
pub fn kernel_to_image(rep: &DiracKernelRep) -> DiracImageRep {
    DiracImageRep {
        dims: rep.dims,
        k: rep.g.transpose(),
        l: rep.f.transpose(),
    }
}

pub fn image_to_kernel(rep: &DiracImageRep) -> Result<DiracKernelRep> {
    let report = rep.validate(DEFAULT_TOL);
    if !report.passed {
        return Err(PhsError::Validation(format!(
            "image representation is not a Dirac structure (rank {} of {}, skew defect {:.3e})",
            report.rank, report.expected_rank, report.skew_defect
        )));
    }
    DiracKernelRep::new(rep.dims, rep.l.transpose(), rep.k.transpose())
}

/// Euclidean distance from `(f, e)` to `ker[F, G]`.
pub fn distance_to_structure(rep: &DiracKernelRep, d: &BondVector) -> Result<f64> {
    if d.len() != rep.n() {
        return Err(dim_err(format!("bond vector of length {} for n = {}", d.len(), rep.n())));
    }
    let q = rep.basis();
    let v = d.stacked();
    let proj = &q * (q.transpose() * &v);
    Ok((v - proj).norm())
}

/// Orthonormal basis of `D₀ = {(f, e) ∈ D : e_s = 0}` (columns of length 2n).
pub fn substructure_d0(rep: &DiracKernelRep) -> DMatrix<f64> {
    let n = rep.n();
    let n_s = rep.dims.n_s;
    let mut selector = DMatrix::zeros(n_s, 2 * n);
    for i in 0..n_s {
        selector[(i, n + i)] = 1.0;
    }
    linalg::null_space(&linalg::vstack(&rep.stacked(), &selector))
}

/// Orthogonal splitting of the state space into `ker(F_s) ⊕ im(F_sᵀ)`.
///
/// `im(F_sᵀ)` is the space of co-energy variables that actually occur in the
/// structure; its orthogonal complement `ker(F_s)` collects the state
/// directions whose derivatives the structure never sees.
#[derive(Debug, Clone)]
pub struct ExtrapolationSplit {
    pub kernel_basis: DMatrix<f64>,
    pub coenergy_basis: DMatrix<f64>,
    pub projector_kernel: DMatrix<f64>,
    pub projector_coenergy: DMatrix<f64>,
    pub rank: usize,
}

impl ExtrapolationSplit {
    /// Split for an arbitrary `rows × n_s` state-flow block.
    pub fn from_state_block(f_s: &DMatrix<f64>) -> Self {
        let n_s = f_s.ncols();
        if n_s == 0 {
            let empty = DMatrix::zeros(0, 0);
            return Self {
                kernel_basis: empty.clone(),
                coenergy_basis: empty.clone(),
                projector_kernel: empty.clone(),
                projector_coenergy: empty,
                rank: 0,
            };
        }
        let kernel_basis = linalg::null_space(f_s);
        let coenergy_basis = if kernel_basis.ncols() == 0 {
            DMatrix::identity(n_s, n_s)
        } else {
            linalg::null_space(&kernel_basis.transpose())
        };
        let projector_kernel = linalg::projector(&kernel_basis);
        let projector_coenergy = linalg::projector(&coenergy_basis);
        Self {
            rank: coenergy_basis.ncols(),
            kernel_basis,
            coenergy_basis,
            projector_kernel,
            projector_coenergy,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.projector_kernel.nrows()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_basis.ncols()
    }

    /// `(P_ker x, P_co x)`.
    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (&self.projector_kernel * x, &self.projector_coenergy * x)
    }

    /// Largest violation among `P_k + P_c = I`, symmetry, idempotence and
    /// `P_k P_c = 0`.
    pub fn projector_defect(&self) -> f64 {
        let n = self.state_dim();
        let pk = &self.projector_kernel;
        let pc = &self.projector_coenergy;
        let id = DMatrix::<f64>::identity(n, n);
        [
            linalg::max_abs(&(pk + pc - &id)),
            linalg::max_abs(&(pk - pk.transpose())),
            linalg::max_abs(&(pc - pc.transpose())),
            linalg::max_abs(&(pk * pk - pk)),
            linalg::max_abs(&(pc * pc - pc)),
            linalg::max_abs(&(pk * pc)),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn extrapolation_split(rep: &DiracKernelRep) -> ExtrapolationSplit {
    ExtrapolationSplit::from_state_block(&rep.f_s())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skew2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn degenerate_one_dimensional_structure() {
        let rep = DiracKernelRep::new(Dims::new(1, 0, 0), one(1.0), one(0.0)).unwrap();
        let r = validate_kernel(&rep, DEFAULT_TOL);
        assert!(r.passed);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn skew_graph_passes() {
        let rep = DiracKernelRep::new(Dims::new(2, 0, 0), DMatrix::identity(2, 2), skew2()).unwrap();
        assert!(validate_kernel(&rep, DEFAULT_TOL).passed);
    }

    #[test]
    fn symmetric_pair_fails_with_defect_two() {
        let rep = DiracKernelRep::new(Dims::new(1, 0, 0), one(1.0), one(1.0)).unwrap();
        let r = validate_kernel(&rep, DEFAULT_TOL);
        assert!(!r.passed);
        assert_eq!(r.skew_defect, 2.0);
    }

    #[test]
    fn shape_mismatch_is_structural_error() {
        let err = DiracKernelRep::new(Dims::new(2, 0, 0), DMatrix::identity(2, 2), one(0.0));
        assert!(matches!(err, Err(PhsError::Dimension(_))));
    }

    #[test]
    fn pairing_examples() {
        let d1 = BondVector::new(DVector::from_element(1, 1.0), DVector::from_element(1, 0.0)).unwrap();
        let d2 = BondVector::new(DVector::from_element(1, 0.0), DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(pairing(&d1, &d2).unwrap(), 1.0);
        let d = BondVector::new(DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![3.0, -1.0])).unwrap();
        assert_eq!(pairing(&d, &d).unwrap(), 2.0 * d.f.dot(&d.e));
        assert!(pairing(&d1, &d).is_err());
    }

    #[test]
    fn conversions_on_trivial_structure() {
        let rep = DiracKernelRep::new(Dims::new(1, 0, 0), one(1.0), one(0.0)).unwrap();
        let img = kernel_to_image(&rep);
        assert_eq!(img.k(), &one(0.0));
        assert_eq!(img.l(), &one(1.0));
        let back = image_to_kernel(&img).unwrap();
        assert_eq!(back.f(), &one(1.0));
        assert_eq!(back.g(), &one(0.0));
    }

    #[test]
    fn image_to_kernel_rejects_invalid_image() {
        let img = DiracImageRep::new(Dims::new(1, 0, 0), one(1.0), one(1.0)).unwrap();
        assert!(matches!(image_to_kernel(&img), Err(PhsError::Validation(_))));
    }

    #[test]
    fn distance_on_effort_axis() {
        let rep = DiracKernelRep::new(Dims::new(1, 0, 0), one(1.0), one(0.0)).unwrap();
        let d = BondVector::new(DVector::from_element(1, 1.0), DVector::from_element(1, 0.0)).unwrap();
        assert!((distance_to_structure(&rep, &d).unwrap() - 1.0).abs() < 1e-15);
        let member = BondVector::new(DVector::from_element(1, 0.0), DVector::from_element(1, 3.0)).unwrap();
        assert!(distance_to_structure(&rep, &member).unwrap() < 1e-15);
    }

    #[test]
    fn d0_trivial_for_invertible_state_block() {
        let rep = DiracKernelRep::new(Dims::new(2, 0, 0), DMatrix::identity(2, 2), skew2()).unwrap();
        assert_eq!(substructure_d0(&rep).ncols(), 0);
    }

    #[test]
    fn split_of_diagonal_block() {
        let fs = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let split = ExtrapolationSplit::from_state_block(&fs);
        assert_eq!(split.kernel_dim(), 1);
        assert_eq!(split.rank, 1);
        assert!((split.kernel_basis[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((split.coenergy_basis[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(split.projector_defect() < 1e-12);
    }

    #[test]
    fn split_of_invertible_block() {
        let fs = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let split = ExtrapolationSplit::from_state_block(&fs);
        assert_eq!(split.kernel_dim(), 0);
        assert!((&split.projector_coenergy - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn interconnection_builds_damped_oscillator() {
        let coupling = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let rep = DiracKernelRep::interconnection(Dims::new(2, 1, 0), &skew2(), &coupling, &[false]).unwrap();
        let f = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        let g = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0]);
        assert_eq!(rep.f(), &f);
        assert_eq!(rep.g(), &g);
        assert!(validate_kernel(&rep, DEFAULT_TOL).passed);
    }

    #[test]
    fn interconnection_with_mixed_channels_is_dirac() {
        let j = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0]);
        let coupling = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 2.0, -1.0, 1.0]);
        let rep = DiracKernelRep::interconnection(Dims::new(3, 1, 1), &j, &coupling, &[false, true]).unwrap();
        let r = validate_kernel(&rep, 1e-14);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.skew_defect, 0.0);
    }
}
