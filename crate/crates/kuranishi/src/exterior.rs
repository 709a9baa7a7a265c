//! Top exterior powers, determinant lines and the contraction maps between
//! them. Everything here is exact.
//!
//! An element of `Λ^max ker D ⊗ (Λ^max (W / im D))*` is stored as a
//! [`DetLineElement`]: a scale times the wedge of some kernel vectors times
//! the dual of the wedge of some cokernel representatives. Since
//! `Λ^max V ⊗ (Λ^max W)*` is the determinant line of the zero map `V → W`,
//! the same type also carries those elements.

use crate::linalg::{complete_with_standard, det_cols, rank_of, sign_of, RationalMatrix, Q};
use num::{One, Zero};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("degree mismatch: {0}")]
    Degree(String),
    #[error("singular map: {0}")]
    SingularMap(String),
    #[error("kernel mismatch: {0}")]
    KernelMismatch(String),
    #[error("stabilization is not surjective: {0}")]
    Stabilization(String),
    #[error("zero is not transverse: {0}")]
    NotTransverse(String),
}

type Result<T> = std::result::Result<T, ExteriorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrientationSign(i8);

impl OrientationSign {
    pub const PLUS: OrientationSign = OrientationSign(1);
    pub const MINUS: OrientationSign = OrientationSign(-1);

    pub fn value(self) -> i32 {
        self.0 as i32
    }

    pub fn from_sign(s: i32) -> Option<Self> {
        match s {
            1 => Some(Self::PLUS),
            -1 => Some(Self::MINUS),
            _ => None,
        }
    }
}

impl std::ops::Mul for OrientationSign {
    type Output = OrientationSign;
    fn mul(self, o: OrientationSign) -> OrientationSign {
        OrientationSign(self.0 * o.0)
    }
}

impl fmt::Display for OrientationSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0 > 0 { "+" } else { "-" })
    }
}

/// `scale · (k_1 ∧ … ∧ k_a) ⊗ ([c_1] ∧ … ∧ [c_b])*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetLineElement {
    pub kernel_part: Vec<Vec<Q>>,
    pub cokernel_part: Vec<Vec<Q>>,
    pub scale: Q,
}

fn std_basis(n: usize) -> Vec<Vec<Q>> {
    (0..n)
        .map(|i| {
            let mut e = vec![Q::zero(); n];
            e[i] = Q::one();
            e
        })
        .collect()
}

fn cols(m: &RationalMatrix) -> Vec<Vec<Q>> {
    m.cols_vec()
}

/// Coordinates of each vector of `vs` in terms of `basis` modulo `modulo`.
/// Returns the square coefficient matrix (basis.len() × vs.len()).
fn coords_mod(dim: usize, basis: &[Vec<Q>], modulo: &[Vec<Q>], vs: &[Vec<Q>]) -> Option<RationalMatrix> {
    if vs.is_empty() {
        return Some(RationalMatrix::zeros(basis.len(), 0));
    }
    let mut all = basis.to_vec();
    all.extend_from_slice(modulo);
    let a = RationalMatrix::from_cols(dim, &all);
    let mut m = RationalMatrix::zeros(basis.len(), vs.len());
    for (j, v) in vs.iter().enumerate() {
        let x = a.solve(v)?;
        for i in 0..basis.len() {
            m[(i, j)] = x[i].clone();
        }
    }
    Some(m)
}

fn det_sq(m: &RationalMatrix) -> Q {
    if m.rows == 0 {
        Q::one()
    } else {
        m.det()
    }
}

impl DetLineElement {
    /// `std_V ⊗ std_W*` for the zero map `R^n → R^m`.
    pub fn standard(n: usize, m: usize) -> Self {
        DetLineElement { kernel_part: std_basis(n), cokernel_part: std_basis(m), scale: Q::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.scale.is_zero()
    }

    pub fn scaled(&self, c: &Q) -> Self {
        DetLineElement { scale: &self.scale * c, ..self.clone() }
    }

    /// Coefficient of this element with respect to `std_V ⊗ std_W*`, when
    /// it lives in `Λ^max V ⊗ (Λ^max W)*` (full wedges).
    pub fn standard_coefficient(&self) -> Q {
        let n = self.kernel_part.len();
        let m = self.cokernel_part.len();
        let dv = det_cols(n, &self.kernel_part);
        let dw = det_cols(m, &self.cokernel_part);
        &self.scale * dv / dw
    }

    /// `self / other` as elements of the same line `Λ^max K ⊗ (Λ^max W/im)*`,
    /// where `image` spans the subspace the cokernel representatives are
    /// taken modulo. Both elements must have kernel vectors in the same
    /// ambient space and cokernel representatives in the same `W`.
    pub fn ratio(&self, other: &DetLineElement, image: &[Vec<Q>]) -> Option<Q> {
        if self.kernel_part.len() != other.kernel_part.len()
            || self.cokernel_part.len() != other.cokernel_part.len()
        {
            return None;
        }
        if other.scale.is_zero() {
            return None;
        }
        let kdim = self.kernel_part.first().or(other.kernel_part.first()).map_or(0, |v| v.len());
        let a = coords_mod(kdim, &other.kernel_part, &[], &self.kernel_part)?;
        let wdim = self.cokernel_part.first().or(other.cokernel_part.first()).map_or(0, |v| v.len());
        let b = coords_mod(wdim, &other.cokernel_part, image, &self.cokernel_part)?;
        let db = det_sq(&b);
        if db.is_zero() {
            return None;
        }
        Some(&self.scale * det_sq(&a) / (db * &other.scale))
    }
}

impl fmt::Display for DetLineElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = |vs: &[Vec<Q>]| {
            if vs.is_empty() {
                "1".to_string()
            } else {
                vs.iter()
                    .map(|v| format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
                    .collect::<Vec<_>>()
                    .join("^")
            }
        };
        write!(f, "{} * [{}] (x) [{}]*", self.scale, w(&self.kernel_part), w(&self.cokernel_part))
    }
}

/// Canonical kernel basis of `d` (free-column recipe).
pub fn canonical_kernel(d: &RationalMatrix) -> Vec<Vec<Q>> {
    d.kernel()
}

/// Canonical cokernel representatives: standard basis vectors of the
/// codomain, smallest index first, that are independent modulo `im d`.
pub fn canonical_cokernel(d: &RationalMatrix) -> Vec<Vec<Q>> {
    let im = cols(d);
    let r = rank_of(d.rows, &im);
    complete_with_standard(d.rows, &im, d.rows).into_iter().take(d.rows - r).collect()
}

/// Canonical generator of `det(d)`.
pub fn canonical_element(d: &RationalMatrix) -> DetLineElement {
    DetLineElement { kernel_part: canonical_kernel(d), cokernel_part: canonical_cokernel(d), scale: Q::one() }
}

/// Coefficient of `elem` with respect to [`canonical_element`].
pub fn canonical_scale(d: &RationalMatrix, elem: &DetLineElement) -> Option<Q> {
    elem.ratio(&canonical_element(d), &cols(d))
}

/// `η(F y_1 ∧ … ∧ F y_k)` for covectors `eta` of the codomain.
pub fn contract_full(f: &RationalMatrix, y: &[Vec<Q>], eta: &[Vec<Q>]) -> Result<Q> {
    if f.rows != f.cols {
        return Err(ExteriorError::Degree(format!("F is {}x{}, expected square", f.rows, f.cols)));
    }
    if y.len() != f.cols || y.iter().any(|v| v.len() != f.cols) {
        return Err(ExteriorError::Degree(format!("wedge has degree {} but domain has dimension {}", y.len(), f.cols)));
    }
    if eta.len() != f.rows || eta.iter().any(|v| v.len() != f.rows) {
        return Err(ExteriorError::Degree(format!("dual wedge has degree {} but codomain has dimension {}", eta.len(), f.rows)));
    }
    if f.rows > 0 && f.det().is_zero() {
        return Err(ExteriorError::SingularMap(format!("{f}")));
    }
    let n = f.rows;
    let fy: Vec<Vec<Q>> = y.iter().map(|v| f.apply(v)).collect();
    let mut m = RationalMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = Q::zero();
            for t in 0..n {
                s += &eta[i][t] * &fy[j][t];
            }
            m[(i, j)] = s;
        }
    }
    Ok(det_sq(&m))
}

/// The contraction `𝔊^φ_F : Λ^max V ⊗ (Λ^max W)* → Λ^max K ⊗ (Λ^max W/im F)*`
/// for `F: V → W` and an isomorphism `φ: K → ker F`.
///
/// The kernel part of the result is expressed in coordinates of `K`; the
/// cokernel representatives live in `W`.
pub fn contract_kernel(f: &RationalMatrix, phi: &RationalMatrix, elem: &DetLineElement) -> Result<DetLineElement> {
    let (m, n) = (f.rows, f.cols);
    if phi.rows != n {
        return Err(ExteriorError::Degree(format!("phi maps into R^{} but F has domain R^{}", phi.rows, n)));
    }
    if elem.kernel_part.len() != n || elem.cokernel_part.len() != m {
        return Err(ExteriorError::Degree(format!(
            "element has degrees ({}, {}) but F is {}x{}",
            elem.kernel_part.len(),
            elem.cokernel_part.len(),
            m,
            n
        )));
    }
    let k = phi.cols;
    let rank_f = f.rank();
    let phicols = cols(phi);
    if !f.mul(phi).is_zero() || rank_of(n, &phicols) != k || k != n - rank_f {
        return Err(ExteriorError::KernelMismatch(format!("phi = {phi} is not an isomorphism onto ker F, F = {f}")));
    }
    let c = elem.standard_coefficient();
    let mut vbar = phicols.clone();
    vbar.extend(complete_with_standard(n, &phicols, n));
    let tail: Vec<Vec<Q>> = vbar[k..].iter().map(|v| f.apply(v)).collect();
    let head = complete_with_standard(m, &tail, m);
    let mut wbar = head.clone();
    wbar.extend(tail);
    let scale = c * det_cols(m, &wbar) / det_cols(n, &vbar);
    Ok(DetLineElement { kernel_part: std_basis(k), cokernel_part: head, scale })
}

/// `𝔊_D` with the canonical kernel, returning kernel vectors in the domain
/// of `d` itself.
pub fn contract(d: &RationalMatrix, elem: &DetLineElement) -> Result<DetLineElement> {
    let kern = canonical_kernel(d);
    let phi = if kern.is_empty() { RationalMatrix::zeros(d.cols, 0) } else { RationalMatrix::from_cols(d.cols, &kern) };
    let mut out = contract_kernel(d, &phi, elem)?;
    out.kernel_part = out.kernel_part.iter().map(|v| phi.apply(v)).collect();
    Ok(out)
}

/// The trivialization `Λ^max ker(D ⊕ R) → det(D)` of the determinant line
/// by a stabilization `R: R^N → W` with `D ⊕ R` surjective, applied to the
/// wedge of `wedge` (vectors of `R^n × R^N` spanning `ker(D ⊕ R)`).
pub fn hat_t(d: &RationalMatrix, r: &RationalMatrix, wedge: &[Vec<Q>]) -> Result<DetLineElement> {
    let (m, n) = (d.rows, d.cols);
    if r.rows != m {
        return Err(ExteriorError::Degree(format!("R maps into R^{} but D into R^{}", r.rows, m)));
    }
    let big_n = r.cols;
    let dr = d.hstack(r);
    if dr.rank() != m {
        return Err(ExteriorError::Stabilization(format!("D (+) R has rank {} < {}", dr.rank(), m)));
    }
    let nk = n + big_n - m;
    if wedge.len() != nk || wedge.iter().any(|v| v.len() != n + big_n) {
        return Err(ExteriorError::Degree(format!("expected {} vectors of R^{}", nk, n + big_n)));
    }
    if wedge.iter().any(|v| !dr.apply(v).iter().all(|x| x.is_zero())) {
        return Err(ExteriorError::KernelMismatch("wedge vector outside ker(D (+) R)".into()));
    }
    let kd = canonical_kernel(d);
    let k = kd.len();
    let mut vbar: Vec<Vec<Q>> = kd
        .iter()
        .map(|v| {
            let mut x = v.clone();
            x.extend(std::iter::repeat(Q::zero()).take(big_n));
            x
        })
        .collect();
    for cand in dr.kernel() {
        if vbar.len() == nk {
            break;
        }
        vbar.push(cand);
        if rank_of(n + big_n, &vbar) < vbar.len() {
            vbar.pop();
        }
    }
    debug_assert_eq!(vbar.len(), nk);
    let basis = RationalMatrix::from_cols(n + big_n, &vbar);
    let coords: Option<Vec<Vec<Q>>> = wedge.iter().map(|w| basis.solve(w)).collect();
    let coords = coords.ok_or_else(|| ExteriorError::KernelMismatch("wedge not in kernel span".into()))?;
    let c = det_cols(nk, &coords);
    let tail: Vec<Vec<Q>> = vbar[k..].iter().map(|v| v[n..].iter().map(|x| -x.clone()).collect()).collect();
    let head = complete_with_standard(big_n, &tail, big_n);
    let mut e = head.clone();
    e.extend(tail);
    let de = det_cols(big_n, &e);
    Ok(DetLineElement {
        kernel_part: kd,
        cokernel_part: head.iter().map(|x| r.apply(x)).collect(),
        scale: c * de,
    })
}

#[derive(Debug, Clone)]
pub struct StabilizationReport {
    pub lambda: Vec<Q>,
    pub ratio: Vec<Q>,
    pub intertwined: bool,
    pub transcript: String,
}

/// Compares `HatT_{Ra}` with `HatT_{Rb} ∘ Ψ / λ` where `Ra = Rb ∘ ι`.
fn compare_through(d: &RationalMatrix, ra: &RationalMatrix, rb: &RationalMatrix, iota: &RationalMatrix, log: &mut String) -> Result<(Q, Q)> {
    let n = d.cols;
    let (na, nb) = (ra.cols, rb.cols);
    let ka = d.hstack(ra).kernel();
    let lhs = hat_t(d, ra, &ka)?;
    let mut psi: Vec<Vec<Q>> = ka
        .iter()
        .map(|v| {
            let mut x = v[..n].to_vec();
            x.extend(iota.apply(&v[n..]));
            x
        })
        .collect();
    let base = psi.len();
    for cand in d.hstack(rb).kernel() {
        psi.push(cand);
        if rank_of(n + nb, &psi) < psi.len() {
            psi.pop();
        }
    }
    let mut lam_cols: Vec<Vec<Q>> = (0..na)
        .map(|i| {
            let mut e = vec![Q::zero(); na];
            e[i] = Q::one();
            iota.apply(&e)
        })
        .collect();
    lam_cols.extend(psi[base..].iter().map(|v| v[n..].iter().map(|x| -x.clone()).collect()));
    let lambda = det_cols(nb, &lam_cols);
    let rhs = hat_t(d, rb, &psi)?.scaled(&lambda.recip());
    let ratio = lhs
        .ratio(&rhs, &cols(d))
        .ok_or_else(|| ExteriorError::KernelMismatch("trivializations land in different lines".into()))?;
    log.push_str(&format!("  HatT_a = {lhs}\n  HatT_b o Psi / lambda = {rhs}\n  lambda = {lambda}, ratio = {ratio}\n"));
    Ok((lambda, ratio))
}

fn factor_through(ra: &RationalMatrix, rb: &RationalMatrix) -> Option<RationalMatrix> {
    // Ra = Rb ∘ ι with ι injective
    if ra.cols > rb.cols {
        return None;
    }
    let iota = rb.solve_mat(ra)?;
    if iota.rank() == iota.cols {
        Some(iota)
    } else {
        None
    }
}

/// Checks that the trivializations of `det(D)` built from two
/// stabilizations agree after the comparison map.
pub fn verify_stabilization_independence(d: &RationalMatrix, r1: &RationalMatrix, r2: &RationalMatrix) -> Result<StabilizationReport> {
    for r in [r1, r2] {
        if d.hstack(r).rank() != d.rows {
            return Err(ExteriorError::Stabilization(format!("D (+) {r} is not surjective")));
        }
    }
    let mut log = format!("D = {d}, R1 = {r1}, R2 = {r2}\n");
    let mut lambda = Vec::new();
    let mut ratio = Vec::new();
    if let Some(iota) = factor_through(r2, r1) {
        log.push_str(&format!("R2 = R1 o iota, iota = {iota}\n"));
        let (l, q) = compare_through(d, r2, r1, &iota, &mut log)?;
        lambda.push(l);
        ratio.push(q);
    } else if let Some(iota) = factor_through(r1, r2) {
        log.push_str(&format!("R1 = R2 o iota, iota = {iota}\n"));
        let (l, q) = compare_through(d, r1, r2, &iota, &mut log)?;
        lambda.push(l);
        ratio.push(q);
    } else {
        let joint = r1.hstack(r2);
        log.push_str(&format!("comparing both through R'' = {joint}\n"));
        let i1 = RationalMatrix::identity(r1.cols).vstack(&RationalMatrix::zeros(r2.cols, r1.cols));
        let i2 = RationalMatrix::zeros(r1.cols, r2.cols).vstack(&RationalMatrix::identity(r2.cols));
        let (l1, q1) = compare_through(d, r1, &joint, &i1, &mut log)?;
        let (l2, q2) = compare_through(d, r2, &joint, &i2, &mut log)?;
        lambda.extend([l1, l2]);
        ratio.extend([q1, q2]);
    }
    let intertwined = ratio.iter().all(|x| x.is_one());
    log.push_str(if intertwined { "intertwined\n" } else { "NOT intertwined\n" });
    Ok(StabilizationReport { lambda, ratio, intertwined, transcript: log })
}

/// Both sides of the square relating `𝔊_D`, the stabilized trivialization
/// `T` and `Λ_G ⊗ id`, for an invertible stabilization `R`. Returns the
/// ratio of the two sides (1 when the square commutes).
pub fn ccord_ratio(d: &RationalMatrix, r: &RationalMatrix) -> Result<Q> {
    let (m, n) = (d.rows, d.cols);
    if r.rows != m || r.cols != m {
        return Err(ExteriorError::Degree("R must be square with the codomain dimension of D".into()));
    }
    let rinv = r.inverse().ok_or_else(|| ExteriorError::SingularMap(format!("R = {r}")))?;
    let lhs = contract(d, &DetLineElement::standard(n, m))?;
    let dr = d.hstack(r);
    let b = dr.kernel();
    let bm = RationalMatrix::from_cols(n + m, &b);
    // F on kernel coordinates: (v, r) -> D v
    let mut f = RationalMatrix::zeros(m, n);
    for (j, bj) in b.iter().enumerate() {
        let dv = d.apply(&bj[..n]);
        for i in 0..m {
            f[(i, j)] = dv[i].clone();
        }
    }
    let kd = canonical_kernel(d);
    let phi_cols: Vec<Vec<Q>> = kd
        .iter()
        .map(|v| {
            let mut x = v.clone();
            x.extend(std::iter::repeat(Q::zero()).take(m));
            bm.solve(&x).expect("kernel vector in span")
        })
        .collect();
    let phi = if phi_cols.is_empty() { RationalMatrix::zeros(n, 0) } else { RationalMatrix::from_cols(n, &phi_cols) };
    let g: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            let mut e = vec![Q::zero(); n];
            e[i] = Q::one();
            let de = d.apply(&e);
            let mut x = e;
            x.extend(rinv.apply(&de).into_iter().map(|t| -t));
            bm.solve(&x).expect("G maps into the kernel")
        })
        .collect();
    let elem = DetLineElement { kernel_part: g, cokernel_part: std_basis(m), scale: Q::one() };
    let mut rhs = contract_kernel(&f, &phi, &elem)?;
    let kdm = if kd.is_empty() { RationalMatrix::zeros(n, 0) } else { RationalMatrix::from_cols(n, &kd) };
    rhs.kernel_part = rhs.kernel_part.iter().map(|v| kdm.apply(v)).collect();
    lhs.ratio(&rhs, &cols(d)).ok_or_else(|| ExteriorError::KernelMismatch("sides in different lines".into()))
}

/// Linearized coordinate change: `dφ: R^{nI} → R^{nJ}`, `φ̂: R^{mI} → R^{mJ}`
/// with `D_J dφ = φ̂ D_I` and the index condition.
#[derive(Debug, Clone)]
pub struct LinearChange {
    pub d_i: RationalMatrix,
    pub d_j: RationalMatrix,
    pub dphi: RationalMatrix,
    pub dphihat: RationalMatrix,
}

impl LinearChange {
    pub fn check(&self) -> Result<()> {
        let (ni, mi) = (self.d_i.cols, self.d_i.rows);
        let (nj, mj) = (self.d_j.cols, self.d_j.rows);
        if self.dphi.rows != nj || self.dphi.cols != ni || self.dphihat.rows != mj || self.dphihat.cols != mi {
            return Err(ExteriorError::Degree("shapes of dphi / dphihat do not match".into()));
        }
        if self.d_j.mul(&self.dphi) != self.dphihat.mul(&self.d_i) {
            return Err(ExteriorError::KernelMismatch("D_J dphi != dphihat D_I".into()));
        }
        if self.dphi.rank() != ni || self.dphihat.rank() != mi {
            return Err(ExteriorError::KernelMismatch("dphi or dphihat not injective".into()));
        }
        // index condition: D_J induces an iso R^nJ / im dphi -> R^mJ / im dphihat
        if nj - ni != mj - mi {
            return Err(ExteriorError::KernelMismatch("index mismatch".into()));
        }
        let joint = self.dphihat.hstack(&self.d_j);
        if joint.rank() != mj {
            return Err(ExteriorError::KernelMismatch("index condition fails (not onto)".into()));
        }
        Ok(())
    }

    /// The transition map `𝔊_IJ : Λ^max R^{nJ} ⊗ (Λ^max R^{mJ})* → Λ^max R^{nI} ⊗ (Λ^max R^{mI})*`
    /// built with the normal complement spanned by standard vectors.
    pub fn gfrak_ij(&self, elem: &DetLineElement) -> Result<DetLineElement> {
        self.check()?;
        let (ni, mi) = (self.d_i.cols, self.d_i.rows);
        let (nj, mj) = (self.d_j.cols, self.d_j.rows);
        let im_phi = cols(&self.dphi);
        let normal = complete_with_standard(nj, &im_phi, nj);
        let dn: Vec<Vec<Q>> = normal.iter().map(|v| self.d_j.apply(v)).collect();
        let mut split = cols(&self.dphihat);
        split.extend(dn.iter().cloned());
        let sm = RationalMatrix::from_cols(mj, &split);
        let sinv = sm.inverse().ok_or_else(|| ExteriorError::SingularMap("dphihat(E_I) + D_J(N) is not a splitting".into()))?;
        // pr_N = DN · (lower block of S^{-1})
        let mut lower = RationalMatrix::zeros(nj - ni, mj);
        for i in 0..nj - ni {
            for j in 0..mj {
                lower[(i, j)] = sinv[(mi + i, j)].clone();
            }
        }
        let dnm = if dn.is_empty() { RationalMatrix::zeros(mj, 0) } else { RationalMatrix::from_cols(mj, &dn) };
        let f = dnm.mul(&lower).mul(&self.d_j);
        let g = contract_kernel(&f, &self.dphi, elem)?;
        let im_f = cols(&f);
        let targets: Vec<Vec<Q>> = cols(&self.dphihat);
        let mmat = coords_mod(mj, &g.cokernel_part, &im_f, &targets)
            .ok_or_else(|| ExteriorError::KernelMismatch("dphihat(E_I) does not span the cokernel of F".into()))?;
        let mu = det_sq(&mmat);
        Ok(DetLineElement { kernel_part: g.kernel_part, cokernel_part: std_basis(mi), scale: g.scale * mu })
    }

    /// `Λ_IJ : det(D_I) → det(D_J)`.
    pub fn lambda_ij(&self, elem: &DetLineElement) -> DetLineElement {
        DetLineElement {
            kernel_part: elem.kernel_part.iter().map(|v| self.dphi.apply(v)).collect(),
            cokernel_part: elem.cokernel_part.iter().map(|v| self.dphihat.apply(v)).collect(),
            scale: elem.scale.clone(),
        }
    }

    /// Ratio of `Λ_IJ 𝔊_{D_I} 𝔊_IJ (std_J ⊗ std_J*)` to `𝔊_{D_J}(std_J ⊗ std_J*)`;
    /// 1 when the transition square commutes.
    pub fn cclaim_ratio(&self) -> Result<Q> {
        let (nj, mj) = (self.d_j.cols, self.d_j.rows);
        let omega = DetLineElement::standard(nj, mj);
        let pulled = self.gfrak_ij(&omega)?;
        let a = self.lambda_ij(&contract(&self.d_i, &pulled)?);
        let b = contract(&self.d_j, &omega)?;
        a.ratio(&b, &cols(&self.d_j)).ok_or_else(|| ExteriorError::KernelMismatch("sides in different lines".into()))
    }

    /// `c_IJ` with `𝔊_IJ(std_J ⊗ std_J*) = c_IJ · std_I ⊗ std_I*`.
    pub fn orientation_factor(&self) -> Result<Q> {
        let (nj, mj) = (self.d_j.cols, self.d_j.rows);
        Ok(self.gfrak_ij(&DetLineElement::standard(nj, mj))?.standard_coefficient())
    }
}

/// Sign of a transverse zero: sign of (orientation coefficient × det J).
pub fn transverse_zero_sign(jacobian: &RationalMatrix, orientation: &DetLineElement) -> Result<OrientationSign> {
    if jacobian.rows != jacobian.cols {
        return Err(ExteriorError::Degree(format!("Jacobian is {}x{}", jacobian.rows, jacobian.cols)));
    }
    if orientation.kernel_part.len() != jacobian.cols || orientation.cokernel_part.len() != jacobian.rows {
        return Err(ExteriorError::Degree("orientation element has the wrong degrees".into()));
    }
    let dj = det_sq(jacobian);
    if dj.is_zero() {
        return Err(ExteriorError::NotTransverse(format!("singular Jacobian {jacobian}")));
    }
    let o = orientation.standard_coefficient();
    if o.is_zero() {
        return Err(ExteriorError::Degree("orientation element is zero".into()));
    }
    Ok(OrientationSign::from_sign(sign_of(&o) * sign_of(&dj)).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{q, qi};

    fn m(rows: &[&[i64]]) -> RationalMatrix {
        RationalMatrix::from_i64(rows)
    }

    #[test]
    fn contract_full_examples() {
        let e1 = vec![vec![qi(1)]];
        assert_eq!(contract_full(&m(&[&[1]]), &e1, &e1).unwrap(), qi(1));
        assert_eq!(contract_full(&m(&[&[2]]), &e1, &e1).unwrap(), qi(2));
        let std2 = std_basis(2);
        assert_eq!(contract_full(&m(&[&[0, 1], &[1, 0]]), &std2, &std2).unwrap(), qi(-1));
        assert!(matches!(contract_full(&m(&[&[1, 0], &[0, 0]]), &std2, &std2), Err(ExteriorError::SingularMap(_))));
        assert!(matches!(contract_full(&m(&[&[1]]), &std2, &e1), Err(ExteriorError::Degree(_))));
    }

    #[test]
    fn contract_kernel_examples() {
        // F = 0 on R^1
        let out = contract_kernel(&m(&[&[0]]), &m(&[&[1]]), &DetLineElement::standard(1, 1)).unwrap();
        assert_eq!(out.scale, qi(1));
        assert_eq!(out.cokernel_part, vec![vec![qi(1)]]);
        // F = id on R^1
        let out = contract_kernel(&m(&[&[1]]), &RationalMatrix::zeros(1, 0), &DetLineElement::standard(1, 1)).unwrap();
        assert_eq!(out.scale, qi(1));
        assert!(out.kernel_part.is_empty() && out.cokernel_part.is_empty());
        // F = diag(2,0), phi: R -> span(e2)
        let out = contract_kernel(&m(&[&[2, 0], &[0, 0]]), &m(&[&[0], &[1]]), &DetLineElement::standard(2, 2)).unwrap();
        assert_eq!(out.kernel_part, vec![vec![qi(1)]]);
        assert_eq!(out.cokernel_part, vec![vec![qi(0), qi(1)]]);
        assert_eq!(out.scale, qi(2));
    }

    #[test]
    fn kernel_mismatch_detected() {
        let r = contract_kernel(&m(&[&[2, 0], &[0, 0]]), &m(&[&[1], &[0]]), &DetLineElement::standard(2, 2));
        assert!(matches!(r, Err(ExteriorError::KernelMismatch(_))));
    }

    #[test]
    fn stabilization_examples() {
        let rep = verify_stabilization_independence(&m(&[&[0]]), &m(&[&[1]]), &m(&[&[2]])).unwrap();
        assert!(rep.intertwined);
        assert_eq!(rep.lambda, vec![qi(2)]);
        let rep = verify_stabilization_independence(&m(&[&[1]]), &m(&[&[1]]), &m(&[&[1, 1]])).unwrap();
        assert!(rep.intertwined, "{}", rep.transcript);
        let t = hat_t(&m(&[&[1, 0], &[0, 0]]), &m(&[&[0], &[1]]), &m(&[&[1, 0, 0], &[0, 0, 1]]).kernel());
        assert!(t.is_ok());
        let bad = verify_stabilization_independence(&m(&[&[1, 0], &[0, 0]]), &m(&[&[1], &[0]]), &m(&[&[0], &[1]]));
        assert!(matches!(bad, Err(ExteriorError::Stabilization(_))));
    }

    #[test]
    fn ccord_small() {
        assert_eq!(ccord_ratio(&m(&[&[2, 1], &[0, 0]]), &m(&[&[1, 0], &[3, 1]])).unwrap(), qi(1));
        assert_eq!(ccord_ratio(&m(&[&[0]]), &m(&[&[5]])).unwrap(), qi(1));
    }

    #[test]
    fn two_chart_orientation_factor_is_one() {
        for (phi, hat) in [(m(&[&[1], &[0]]), m(&[&[1], &[0]])), (m(&[&[0], &[1]]), m(&[&[0], &[1]]))] {
            let ch = LinearChange { d_i: m(&[&[1]]), d_j: RationalMatrix::identity(2), dphi: phi, dphihat: hat };
            assert_eq!(ch.orientation_factor().unwrap(), qi(1));
            assert_eq!(ch.cclaim_ratio().unwrap(), qi(1));
        }
    }

    #[test]
    fn transverse_sign_examples() {
        let o1 = DetLineElement::standard(1, 1);
        assert_eq!(transverse_zero_sign(&m(&[&[1]]), &o1).unwrap(), OrientationSign::PLUS);
        assert_eq!(transverse_zero_sign(&m(&[&[-2]]), &o1).unwrap(), OrientationSign::MINUS);
        let o2 = DetLineElement::standard(2, 2);
        assert_eq!(transverse_zero_sign(&m(&[&[0, 1], &[1, 0]]), &o2).unwrap(), OrientationSign::MINUS);
        assert!(matches!(transverse_zero_sign(&m(&[&[0]]), &o1), Err(ExteriorError::NotTransverse(_))));
        let _ = q(1, 2);
    }
}
