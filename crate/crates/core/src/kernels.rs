//! Interaction kernels of the guidance-by-repulsion model.
//!
//! Three radial kernels drive the evaders:
//!
//! * `a(r) = a_const` weights velocity alignment between evaders,
//! * `f(r) = f_amplitude * exp(-f_decay |r|^2)` is the repulsion felt from a driver,
//! * `g(r) = g_scale * (1 - g_core / |r|^2)` is the evader cohesion, negative inside
//!   the core `|r|^2 < g_core` and exactly zero at `r = 0`.
//!
//! The pairwise forces are `k(r) r`. Because each kernel is radial, the Jacobian of
//! the force has the closed form `k(r) I + s(r) r r^T`, where `s(r)` is the radial
//! slope with `grad k(r) = s(r) r`. [`RadialTerm`] carries the pair `(k, s)` so the
//! hot loops never materialise a `d x d` matrix.

use crate::error::{Error, Result};

/// Below this distance two evaders are considered to collide.
pub const COLLISION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    pub f_amplitude: f64,
    pub f_decay: f64,
    pub g_scale: f64,
    pub g_core: f64,
    pub a_const: f64,
}

impl KernelParams {
    /// The reference kernel constants for a herd of `n_evaders`.
    ///
    /// `g_core = 1 / (3 sqrt(N))` shrinks the repulsive core as the herd grows.
    pub fn reference(n_evaders: usize) -> Self {
        Self {
            f_amplitude: 4.0,
            f_decay: 8.0,
            g_scale: 2.0,
            g_core: 1.0 / (3.0 * (n_evaders as f64).sqrt()),
            a_const: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.f_amplitude > 0.0
            && self.f_decay > 0.0
            && self.g_scale >= 0.0
            && self.g_core > 0.0
            && self.a_const >= 0.0;
        let finite = [self.f_amplitude, self.f_decay, self.g_scale, self.g_core, self.a_const]
            .iter()
            .all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "kernel params must satisfy f_amplitude > 0, f_decay > 0, g_scale >= 0, \
                 g_core > 0, a_const >= 0 (got {self:?})"
            )))
        }
    }
}

/// Which pairwise force a Jacobian is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Driver repulsion.
    F,
    /// Evader cohesion with repulsive core.
    G,
}

#[inline]
pub(crate) fn norm_sq(r: &[f64]) -> f64 {
    r.iter().map(|c| c * c).sum()
}

/// Alignment kernel. Constant.
pub fn eval_a(_r: &[f64], kp: &KernelParams) -> f64 {
    kp.a_const
}

pub fn eval_f(r: &[f64], kp: &KernelParams) -> f64 {
    kp.f_amplitude * (-kp.f_decay * norm_sq(r)).exp()
}

/// Cohesion kernel; returns exactly 0 at the origin.
pub fn eval_g(r: &[f64], kp: &KernelParams) -> f64 {
    let r2 = norm_sq(r);
    if r2 == 0.0 {
        0.0
    } else {
        kp.g_scale * (1.0 - kp.g_core / r2)
    }
}

/// Kernel value `k` and radial slope `s` (with `grad k(r) = s r`) at one displacement.
///
/// The force is `k r` and its Jacobian is `k I + s r r^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTerm {
    pub value: f64,
    pub slope: f64,
}

impl RadialTerm {
    #[inline]
    pub(crate) fn f(r2: f64, kp: &KernelParams) -> Self {
        let value = kp.f_amplitude * (-kp.f_decay * r2).exp();
        Self {
            value,
            slope: -2.0 * kp.f_decay * value,
        }
    }

    /// Caller guarantees `r2 >= COLLISION_TOL^2`.
    #[inline]
    pub(crate) fn g(r2: f64, kp: &KernelParams) -> Self {
        let inv = 1.0 / r2;
        Self {
            value: kp.g_scale * (1.0 - kp.g_core * inv),
            slope: 2.0 * kp.g_scale * kp.g_core * inv * inv,
        }
    }

    /// `out += scale * J^T w` where `J = value I + slope r r^T` (symmetric).
    #[inline]
    pub(crate) fn add_jac_t_mul(&self, r: &[f64], w: &[f64], scale: f64, out: &mut [f64]) {
        let rw: f64 = r.iter().zip(w).map(|(a, b)| a * b).sum();
        let c = scale * self.slope * rw;
        for ((o, wi), ri) in out.iter_mut().zip(w).zip(r) {
            *o += scale * self.value * wi + c * ri;
        }
    }
}

/// Checked cohesion term for the displacement `r = x_k - x_i`.
#[inline]
pub(crate) fn g_term(r: &[f64], kp: &KernelParams, i: usize, k: usize) -> Result<(f64, RadialTerm)> {
    let r2 = norm_sq(r);
    if r2 < COLLISION_TOL * COLLISION_TOL {
        return Err(Error::Degenerate { i, k });
    }
    Ok((r2, RadialTerm::g(r2, kp)))
}

/// A pairwise force `k(r) r` together with its dense Jacobian (row-major, `d x d`).
#[derive(Debug, Clone, PartialEq)]
pub struct PairForce {
    pub force: Vec<f64>,
    pub jac: Vec<f64>,
}

/// Force `kernel(r) r` and its exact Jacobian with respect to `r`.
///
/// Fails with [`Error::Degenerate`] for the `g` kernel when `|r| < 1e-12`.
pub fn force_and_jacobian(kernel: Kernel, r: &[f64], kp: &KernelParams) -> Result<PairForce> {
    let d = r.len();
    let r2 = norm_sq(r);
    let term = match kernel {
        Kernel::F => RadialTerm::f(r2, kp),
        Kernel::G => {
            if r2.sqrt() < COLLISION_TOL {
                return Err(Error::Degenerate { i: 0, k: 0 });
            }
            RadialTerm::g(r2, kp)
        }
    };
    let force = r.iter().map(|c| term.value * c).collect();
    let mut jac = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            jac[a * d + b] = term.slope * r[a] * r[b] + if a == b { term.value } else { 0.0 };
        }
    }
    Ok(PairForce { force, jac })
}
