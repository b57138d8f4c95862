//! Projector-splitting (K, S, L) integrator for `Ṅ = G(t, N)` on the manifold
//! of rank-`r` matrices, with a pluggable nonlinearity `G`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matcore::{qr_thin, DenseMatrix, GenLowRank, SparseOperator, SymLowRank};

/// The rank-`r` argument `Y = left · rightᵀ` handed to a nonlinearity.
#[derive(Debug, Clone, Copy)]
pub struct Outer<'a> {
    pub left: &'a DenseMatrix,
    pub right: &'a DenseMatrix,
}

impl Outer<'_> {
    /// `Y·W`.
    pub fn apply(&self, w: &DenseMatrix) -> DenseMatrix {
        self.left * self.right.tr_mul(w)
    }

    /// `Yᵀ·W`.
    pub fn apply_transpose(&self, w: &DenseMatrix) -> DenseMatrix {
        self.right * self.left.tr_mul(w)
    }
}

/// Right-hand side `G(t, Y)` of the non-stiff substep, accessed only through
/// products with skinny matrices.
pub trait Nonlinearity: Send + Sync {
    fn dim(&self) -> usize;

    /// `G(t, Y)·W`.
    fn apply(&self, t: f64, y: &Outer<'_>, w: &DenseMatrix) -> DenseMatrix;

    /// `G(t, Y)ᵀ·W`.
    fn apply_transpose(&self, t: f64, y: &Outer<'_>, w: &DenseMatrix) -> DenseMatrix;

    /// True when `G` depends on neither `t` nor `Y`.
    fn is_constant(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub enum NonlinearityDescriptor {
    /// `G = Q`.
    Constant(GenLowRank),
    /// `G = Q − Y P Y`.
    Riccati {
        q: SymLowRank,
        p: SymLowRank,
    },
    /// `G = Q + Cᵀ Y C − Y B R⁻¹ Bᵀ Y`.
    Gdre {
        q: SymLowRank,
        c: SparseOperator,
        ct: SparseOperator,
        b: DenseMatrix,
        rinv: DenseMatrix,
    },
    Custom(Arc<dyn Nonlinearity>),
}

impl fmt::Debug for NonlinearityDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(q) => write!(f, "Constant(rank {})", q.rank()),
            Self::Riccati { q, p } => write!(f, "Riccati(rank Q {}, rank P {})", q.rank(), p.rank()),
            Self::Gdre { q, b, .. } => write!(f, "Gdre(rank Q {}, inputs {})", q.rank(), b.ncols()),
            Self::Custom(g) => write!(f, "Custom(dim {})", g.dim()),
        }
    }
}

impl NonlinearityDescriptor {
    pub fn gdre(q: SymLowRank, c: SparseOperator, b: DenseMatrix, rinv: DenseMatrix) -> Result<Self> {
        let d = q.dim();
        if c.dim() != d || b.nrows() != d || rinv.nrows() != b.ncols() || rinv.ncols() != b.ncols() {
            return Err(Error::contract("GDRE data dimensions are inconsistent"));
        }
        let ct = c.transpose();
        Ok(Self::Gdre { q, c, ct, b, rinv })
    }
}

impl Nonlinearity for NonlinearityDescriptor {
    fn dim(&self) -> usize {
        match self {
            Self::Constant(q) => q.nrows(),
            Self::Riccati { q, .. } | Self::Gdre { q, .. } => q.dim(),
            Self::Custom(g) => g.dim(),
        }
    }

    fn apply(&self, t: f64, y: &Outer<'_>, w: &DenseMatrix) -> DenseMatrix {
        match self {
            Self::Constant(q) => q.apply(w),
            Self::Riccati { q, p } => {
                let yw = y.apply(w);
                q.apply(w) - y.apply(&p.apply(&yw))
            }
            Self::Gdre { q, c, ct, b, rinv } => {
                let yw = y.apply(w);
                let quad = y.apply(&(b * (rinv * b.tr_mul(&yw))));
                q.apply(w) + ct.mul_dense(&y.apply(&c.mul_dense(w))) - quad
            }
            Self::Custom(g) => g.apply(t, y, w),
        }
    }

    fn apply_transpose(&self, t: f64, y: &Outer<'_>, w: &DenseMatrix) -> DenseMatrix {
        match self {
            Self::Constant(q) => q.apply_transpose(w),
            Self::Riccati { q, p } => {
                let yw = y.apply_transpose(w);
                q.apply_transpose(w) - y.apply_transpose(&p.apply_transpose(&yw))
            }
            Self::Gdre { q, c, ct, b, rinv } => {
                let yw = y.apply_transpose(w);
                let quad = y.apply_transpose(&(b * (rinv.tr_mul(&b.tr_mul(&yw)))));
                q.apply_transpose(w) + ct.mul_dense(&y.apply_transpose(&c.mul_dense(w))) - quad
            }
            Self::Custom(g) => g.apply_transpose(t, y, w),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Self::Constant(_) => true,
            Self::Custom(g) => g.is_constant(),
            _ => false,
        }
    }
}

/// Integrator for the K, S and L substeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerScheme {
    /// `M₀ + τ·rhs`; exact when the right-hand side is constant.
    ExactAffine,
    /// Classical fourth-order Runge-Kutta with this many equal substeps.
    Rk4 { substeps: usize },
}

impl InnerScheme {
    pub fn default_for(g: &dyn Nonlinearity) -> Self {
        if g.is_constant() {
            Self::ExactAffine
        } else {
            Self::Rk4 { substeps: 1 }
        }
    }
}

fn check_finite(m: &DenseMatrix, time: f64) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { time })
    }
}

/// Integrates `Ṁ = rhs(t, M)` from `t0` to `t0 + tau`.
pub fn inner_ode_solve(
    rhs: &dyn Fn(f64, &DenseMatrix) -> DenseMatrix,
    m0: &DenseMatrix,
    t0: f64,
    tau: f64,
    scheme: InnerScheme,
) -> Result<DenseMatrix> {
    match scheme {
        InnerScheme::ExactAffine => {
            let k = rhs(t0, m0);
            check_finite(&k, t0)?;
            Ok(m0 + k * tau)
        }
        InnerScheme::Rk4 { substeps } => {
            if substeps == 0 {
                return Err(Error::contract("RK4 needs at least one substep"));
            }
            let h = tau / substeps as f64;
            let mut m = m0.clone();
            for n in 0..substeps {
                let t = t0 + n as f64 * h;
                let k1 = rhs(t, &m);
                check_finite(&k1, t)?;
                let k2 = rhs(t + 0.5 * h, &(&m + &k1 * (0.5 * h)));
                check_finite(&k2, t + 0.5 * h)?;
                let k3 = rhs(t + 0.5 * h, &(&m + &k2 * (0.5 * h)));
                check_finite(&k3, t + 0.5 * h)?;
                let k4 = rhs(t + h, &(&m + &k3 * h));
                check_finite(&k4, t + h)?;
                m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                check_finite(&m, t + h)?;
            }
            Ok(m)
        }
    }
}

/// One step of the projector-splitting integrator from `Y0 = U₀S₀V₀ᵀ`.
pub fn ksl_step(g: &dyn Nonlinearity, y0: &GenLowRank, t0: f64, tau: f64, scheme: InnerScheme) -> Result<GenLowRank> {
    if !(tau > 0.0) {
        return Err(Error::contract("ksl_step needs tau > 0"));
    }
    if y0.nrows() != g.dim() || y0.ncols() != g.dim() {
        return Err(Error::contract("ksl_step: factor dimension differs from G"));
    }
    if scheme == InnerScheme::ExactAffine && !g.is_constant() {
        return Err(Error::contract("exact affine substeps need a constant G"));
    }
    let v0 = &y0.v;

    // K-step: K̇ = G(t, K V₀ᵀ) V₀.
    let k0 = &y0.u * &y0.s;
    let k_rhs = |t: f64, k: &DenseMatrix| g.apply(t, &Outer { left: k, right: v0 }, v0);
    let k1 = inner_ode_solve(&k_rhs, &k0, t0, tau, scheme)?;
    let (u1, s_hat) = qr_thin(&k1)?;

    // S-step: Ṡ = −U₁ᵀ G(t, U₁ S V₀ᵀ) V₀.
    let s_rhs = |t: f64, s: &DenseMatrix| {
        let us = &u1 * s;
        -u1.tr_mul(&g.apply(t, &Outer { left: &us, right: v0 }, v0))
    };
    let s_tilde = inner_ode_solve(&s_rhs, &s_hat, t0, tau, scheme)?;

    // L-step: L̇ = G(t, U₁ Lᵀ)ᵀ U₁.
    let l0 = v0 * s_tilde.transpose();
    let l_rhs = |t: f64, l: &DenseMatrix| g.apply_transpose(t, &Outer { left: &u1, right: l }, &u1);
    let l1 = inner_ode_solve(&l_rhs, &l0, t0, tau, scheme)?;
    let (v1, s1t) = qr_thin(&l1)?;

    Ok(GenLowRank {
        u: u1,
        s: s1t.transpose(),
        v: v1,
    })
}

/// Orthogonal projection of `W` onto the tangent space at `Y`:
/// `W V Vᵀ − U Uᵀ W V Vᵀ + U Uᵀ W`.
pub fn tangent_project(y: &GenLowRank, w: &DenseMatrix) -> Result<DenseMatrix> {
    if w.shape() != (y.nrows(), y.ncols()) {
        return Err(Error::contract("tangent_project: shape mismatch"));
    }
    let wv = w * &y.v;
    let utw = y.u.tr_mul(w);
    let utwv = &utw * &y.v;
    Ok(&wv * y.v.transpose() - &y.u * (utwv * y.v.transpose()) + &y.u * utw)
}

/// Symmetric K, S, L step used by the Lyapunov and Riccati split-step methods.
///
/// Starts from the linearly propagated factors `U^A S^A (U^A)ᵀ` and integrates
/// `G = Q − XPX` (or `G = Q` when `p` is `None`). The L-step keeps `U₁` as the
/// basis and returns `S₁ = L(t₁)U₁`, so the result is again of the form `U S Uᵀ`.
pub fn symmetric_ksl_step(
    q: &SymLowRank,
    p: Option<&SymLowRank>,
    ya: &SymLowRank,
    tau: f64,
    scheme: InnerScheme,
) -> Result<SymLowRank> {
    let ua = &ya.u;
    let sa = &ya.s;
    let qua = q.apply(ua);
    match (p, scheme) {
        (None, InnerScheme::ExactAffine) => {
            let k1 = ua * sa + &qua * tau;
            let (u1, s_hat) = qr_thin(&k1)?;
            let s_tilde = s_hat - u1.tr_mul(&qua) * tau;
            let qu1 = q.apply(&u1);
            let s1 = &s_tilde * ua.tr_mul(&u1) + u1.tr_mul(&qu1) * tau;
            Ok(SymLowRank { u: u1, s: s1 })
        }
        (Some(_), InnerScheme::ExactAffine) => Err(Error::contract("exact affine substeps need P = 0")),
        (p, rk4) => {
            // K̇ = Q U^A − K (U^A)ᵀ P K
            let k0 = ua * sa;
            let uta_p = p.map(|p| p.apply_transpose(ua));
            let k_rhs = |_: f64, k: &DenseMatrix| match &uta_p {
                Some(pua) => &qua - k * pua.tr_mul(k),
                None => qua.clone(),
            };
            let k1 = inner_ode_solve(&k_rhs, &k0, 0.0, tau, rk4)?;
            let (u1, s_hat) = qr_thin(&k1)?;

            // Ṡ = −U₁ᵀ Q U^A + S (U^A)ᵀ P U₁ S
            let c1 = u1.tr_mul(&qua);
            let pu1 = p.map(|p| p.apply(&u1));
            let c2 = pu1.as_ref().map(|pu1| ua.tr_mul(pu1));
            let s_rhs = |_: f64, s: &DenseMatrix| match &c2 {
                Some(c2) => s * c2 * s - &c1,
                None => -&c1,
            };
            let s_tilde = inner_ode_solve(&s_rhs, &s_hat, 0.0, tau, rk4)?;

            // L̇ = U₁ᵀ Q − L P U₁ L, carried as Lᵀ (d×r).
            let qu1 = q.apply(&u1);
            let lt0 = ua * s_tilde.transpose();
            let lt_rhs = |_: f64, lt: &DenseMatrix| match &pu1 {
                Some(pu1) => &qu1 - lt * (pu1.tr_mul(lt)),
                None => qu1.clone(),
            };
            let lt1 = inner_ode_solve(&lt_rhs, &lt0, 0.0, tau, rk4)?;
            let s1 = lt1.tr_mul(&u1);
            Ok(SymLowRank { u: u1, s: s1 })
        }
    }
}
