//! Delay-Doppler Cramér-Rao bound: closed form and full Fisher-matrix cross-check.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{inner, CVec, C64, J};
use crate::model::{CodeVector, ModelMatrices, RadarScenario};

/// Delay and Doppler CRB entries and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbPair {
    /// Delay bound (s^2).
    pub crb_tau: f64,
    /// Doppler bound (Hz^2).
    pub crb_fd: f64,
    /// `crb_tau * crb_fd` (s^2 Hz^2).
    pub det: f64,
}

/// Closed-form delay-Doppler CRB of `c`.
pub fn crb_pair(c: &CodeVector, mats: &ModelMatrices, scenario: &RadarScenario) -> Result<CrbPair> {
    let f = mats.quad_forms(c.entries());
    let b_max = mats.b.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let floor = 1e-12 * f.q0.abs() * b_max * mats.m0_eig_max;
    if f.q0 <= 0.0 {
        return Err(Error::Degenerate("c^H M0 c is not positive".into()));
    }
    if f.doppler_det <= floor {
        return Err(Error::Degenerate(format!(
            "Doppler information vanishes (determinant {:e})",
            f.doppler_det
        )));
    }
    let a2 = scenario.amplitude_power;
    let n = scenario.fast_samples as f64;
    let bw2 = scenario.bandwidth * scenario.bandwidth;
    let crb_tau = 3.0 / (2.0 * a2 * n * PI * PI * bw2) / f.q0;
    let crb_fd = f.q0 / (2.0 * a2 * n * f.doppler_det);
    Ok(CrbPair {
        crb_tau,
        crb_fd,
        det: 3.0 / (4.0 * a2 * a2 * n * n * PI * PI * bw2) / f.doppler_det,
    })
}

/// Sampled chirp and its analytic time derivative at `t = n dt`, `n = 0..N-1`.
#[derive(Debug, Clone)]
pub struct ChirpSamples {
    pub s: CVec,
    pub s_dot: CVec,
}

/// Fast-time contractions `||s||^2`, `||s_dot||^2` and `s_dot^H s`.
#[derive(Debug, Clone, Copy)]
pub struct FastTimeScalars {
    pub energy: f64,
    pub deriv_energy: f64,
    pub cross: C64,
}

impl ChirpSamples {
    pub fn scalars(&self) -> FastTimeScalars {
        FastTimeScalars {
            energy: self.s.norm_squared(),
            deriv_energy: self.s_dot.norm_squared(),
            cross: inner(&self.s_dot, &self.s),
        }
    }
}

/// Chirp `exp(j pi (B/Tp) (t - Tp/2)^2)` evaluated at time `t`, without the gating window.
pub fn chirp_at(scenario: &RadarScenario, t: f64) -> C64 {
    let k = scenario.bandwidth / scenario.pulse_width;
    let u = t - scenario.pulse_width / 2.0;
    C64::from_polar(1.0, PI * k * u * u)
}

pub fn sample_chirp(scenario: &RadarScenario) -> ChirpSamples {
    let k = scenario.bandwidth / scenario.pulse_width;
    let n = scenario.fast_samples;
    let t = |i: usize| i as f64 * scenario.sample_step;
    let s = CVec::from_fn(n, |i, _| chirp_at(scenario, t(i)));
    let s_dot = CVec::from_fn(n, |i, _| {
        J * (2.0 * PI * k * (t(i) - scenario.pulse_width / 2.0)) * s[i]
    });
    ChirpSamples { s, s_dot }
}

/// Fisher matrix over `(Re alpha, Im alpha, tau, f_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullFim(pub Matrix4<f64>);

/// Fisher matrix of the mean `alpha (conj(a) ⊙ c) ⊗ s` under `Sigma_t ⊗ I_N` noise.
///
/// The slow-time factor uses the conjugate steering vector so that its whitened Gram
/// is exactly `c^H M0 c` with `M0 = Sigma_t^-1 ⊙ (a a^H)`.
/// Slow-time and fast-time factors separate, so every entry is a slow-time Gram term
/// times one of `||s||^2`, `||s_dot||^2`, `s_dot^H s`.
pub fn full_fim(
    c: &CodeVector,
    alpha: C64,
    scenario: &RadarScenario,
    mats: &ModelMatrices,
) -> FullFim {
    let chirp = sample_chirp(scenario);
    let fast = chirp.scalars();
    let u = mats.steering.conjugate().component_mul(c.entries());
    let bu = mats.b.conjugate().component_mul(&u);
    let slow = [u.clone(), u.clone() * J, u.clone() * alpha, bu * alpha];
    let whitened: Vec<CVec> = slow.iter().map(|x| &mats.sigma_t_inv * x).collect();
    // Fast-time factor index: 0 -> s, 1 -> -s_dot (delay derivative).
    let kind = [0usize, 0, 1, 0];
    let fast_gram = |i: usize, j: usize| -> C64 {
        match (kind[i], kind[j]) {
            (0, 0) => C64::from(fast.energy),
            (1, 1) => C64::from(fast.deriv_energy),
            (1, 0) => -fast.cross,
            _ => -fast.cross.conj(),
        }
    };
    let mut fim = Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let v = 2.0 * (inner(&slow[i], &whitened[j]) * fast_gram(i, j)).re;
            fim[(i, j)] = v;
            fim[(j, i)] = v;
        }
    }
    FullFim(fim)
}

/// CRB after eliminating the amplitude block from a full Fisher matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurCrb {
    pub crb: CrbPair,
    /// Delay-Doppler information after amplitude elimination.
    pub information: Matrix2<f64>,
    /// `|I_ftau| / sqrt(I_tautau I_ff)`.
    pub coupling: f64,
}

pub fn crb_from_full_fim(fim: &FullFim) -> Result<SchurCrb> {
    let f = &fim.0;
    let aa = f.fixed_view::<2, 2>(0, 0).into_owned();
    let ap = f.fixed_view::<2, 2>(0, 2).into_owned();
    let pp = f.fixed_view::<2, 2>(2, 2).into_owned();
    let aa_inv = aa
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular amplitude block".into()))?;
    let info = pp - ap.transpose() * aa_inv * ap;
    let cov = info
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular delay-Doppler information".into()))?;
    let coupling = info[(0, 1)].abs() / (info[(0, 0)] * info[(1, 1)]).sqrt();
    Ok(SchurCrb {
        crb: CrbPair {
            crb_tau: cov[(0, 0)],
            crb_fd: cov[(1, 1)],
            det: cov[(0, 0)] * cov[(1, 1)],
        },
        information: info,
        coupling,
    })
}

/// Smallest and largest eigenvalue of a Fisher matrix.
pub fn fim_eigen_range(fim: &FullFim) -> (f64, f64) {
    let e = SymmetricEigen::new(fim.0).eigenvalues;
    (e.min(), e.max())
}
