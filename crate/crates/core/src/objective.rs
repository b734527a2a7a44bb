//! Scalarized and convexified objectives, the four-block multilinear relaxation,
//! per-block linear restrictions and the convexity constants.

use nalgebra::{Matrix4, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{inner, quad, real_part, CMat, CVec, C64};
use crate::model::ModelMatrices;

/// Weight, similarity radius and quartic/quadratic augmentation constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarizationParams {
    pub beta: f64,
    pub zeta: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl ScalarizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(
                "beta",
                format!("must lie in [0, 1], got {}", self.beta),
            ));
        }
        if !(0.0..=2.0).contains(&self.zeta) {
            return Err(Error::invalid(
                "zeta",
                format!("must lie in [0, 2], got {}", self.zeta),
            ));
        }
        if !(self.mu1 >= 0.0 && self.mu1.is_finite()) {
            return Err(Error::invalid(
                "mu1",
                format!("must be finite and nonnegative, got {}", self.mu1),
            ));
        }
        if !(self.mu2 >= 0.0 && self.mu2.is_finite()) {
            return Err(Error::invalid(
                "mu2",
                format!("must be finite and nonnegative, got {}", self.mu2),
            ));
        }
        Ok(())
    }
}

/// `(1 - beta)(q0 q2 - |q1|^2) + beta q0`.
pub fn scalarized_objective(c: &CVec, beta: f64, mats: &ModelMatrices) -> f64 {
    let f = mats.quad_forms(c);
    (1.0 - beta) * f.doppler_det + beta * f.q0
}

/// Scalarized objective plus `mu1 (c^H c)^2 + mu2 c^H c`.
pub fn augmented_objective(c: &CVec, params: &ScalarizationParams, mats: &ModelMatrices) -> f64 {
    let e = c.norm_squared();
    scalarized_objective(c, params.beta, mats) + params.mu1 * e * e + params.mu2 * e
}

/// Four code blocks of the relaxed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet(pub [CVec; 4]);

impl BlockSet {
    pub fn replicate(c: &CVec) -> Self {
        Self([c.clone(), c.clone(), c.clone(), c.clone()])
    }

    pub fn blocks(&self) -> &[CVec; 4] {
        &self.0
    }
}

/// A block and its images under the model matrices.
#[derive(Debug, Clone)]
pub(crate) struct BlockImages {
    pub x: CVec,
    pub m0: CVec,
    pub m2: CVec,
    pub m1: CVec,
    pub m1h: CVec,
}

impl BlockImages {
    pub fn new(x: &CVec, mats: &ModelMatrices) -> Self {
        Self {
            x: x.clone(),
            m0: &mats.m0 * x,
            m2: &mats.m2 * x,
            m1: &mats.m1 * x,
            m1h: mats.m1.ad_mul(x),
        }
    }
}

/// Pairwise forms `x_i^H A x_j` for the five operators the kernels use.
struct Grams {
    id: [[C64; 4]; 4],
    m0: [[C64; 4]; 4],
    m2: [[C64; 4]; 4],
    m1: [[C64; 4]; 4],
    m1h: [[C64; 4]; 4],
}

impl Grams {
    fn new(im: &[BlockImages; 4]) -> Self {
        let mut g = Grams {
            id: Default::default(),
            m0: Default::default(),
            m2: Default::default(),
            m1: Default::default(),
            m1h: Default::default(),
        };
        for i in 0..4 {
            for j in 0..4 {
                let xi = &im[i].x;
                g.id[i][j] = inner(xi, &im[j].x);
                g.m0[i][j] = inner(xi, &im[j].m0);
                g.m2[i][j] = inner(xi, &im[j].m2);
                g.m1[i][j] = inner(xi, &im[j].m1);
                g.m1h[i][j] = inner(xi, &im[j].m1h);
            }
        }
        g
    }
}

/// The twelve ordered pairs `(i, j)` of distinct indices with the complementary pair `(k, l)`.
fn pair_patterns() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..4).flat_map(|i| {
        (0..4).filter(move |&j| j != i).map(move |j| {
            let mut rest = (0..4).filter(move |&k| k != i && k != j);
            let k = rest.next().unwrap();
            let l = rest.next().unwrap();
            (i, j, k, l)
        })
    })
}

pub(crate) fn multilinear_from_images(im: &[BlockImages; 4], p: &ScalarizationParams) -> f64 {
    let g = Grams::new(im);
    let w = 1.0 - p.beta;
    // Each permutation is an ordered pair (i, j) followed by one of the two orders of (k, l).
    let mut quartic = C64::from(0.0);
    for (i, j, k, l) in pair_patterns() {
        let pair = |a: &[[C64; 4]; 4], b: &[[C64; 4]; 4]| a[i][j] * (b[k][l] + b[l][k]);
        quartic += pair(&g.id, &g.id) * p.mu1 + (pair(&g.m0, &g.m2) - pair(&g.m1, &g.m1h)) * w;
    }
    let mut quadratic = C64::from(0.0);
    for i in 0..4 {
        for j in (0..4).filter(|&j| j != i) {
            quadratic += g.id[i][j] * p.mu2 + g.m0[i][j] * p.beta;
        }
    }
    real_part(quartic / 24.0 + quadratic / 12.0)
}

/// Multilinear relaxation of the augmented objective evaluated on four blocks.
pub fn multilinear_form(
    blocks: &BlockSet,
    params: &ScalarizationParams,
    mats: &ModelMatrices,
) -> f64 {
    let im = blocks.0.clone().map(|x| BlockImages::new(&x, mats));
    multilinear_from_images(&im, params)
}

/// Affine model of the multilinear form in one block: `Re{d_vec^H x} + d_scalar`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRestriction {
    pub d_vec: CVec,
    pub d_scalar: f64,
}

impl BlockRestriction {
    pub fn evaluate(&self, x: &CVec) -> f64 {
        inner(&self.d_vec, x).re + self.d_scalar
    }
}

pub(crate) fn restriction_from_images(
    im: &[BlockImages; 4],
    p: usize,
    params: &ScalarizationParams,
) -> BlockRestriction {
    let others: Vec<usize> = (0..4).filter(|&q| q != p).collect();
    let m = im[0].x.len();
    let w = 1.0 - params.beta;
    let mut d = CVec::zeros(m);
    for &a in &others {
        for &bb in others.iter().filter(|&&q| q != a) {
            let c = *others.iter().find(|&&q| q != a && q != bb).unwrap();
            let (x1, x2, x3) = (&im[a], &im[bb], &im[c]);
            let s_id = inner(&x2.x, &x3.x);
            let s_m2 = inner(&x2.x, &x3.m2);
            let s_m0 = inner(&x2.x, &x3.m0);
            let s_m1 = inner(&x2.x, &x3.m1);
            let s_m1h = inner(&x2.x, &x3.m1h);
            d += &x1.x * (s_id * (2.0 * params.mu1));
            d += (&x1.m0 * s_m2 + &x1.m2 * s_m0 - &x1.m1h * s_m1 - &x1.m1 * s_m1h) * C64::from(w);
        }
    }
    d /= C64::from(12.0);
    let mut lin = CVec::zeros(m);
    for &a in &others {
        lin += &im[a].x * C64::from(params.mu2) + &im[a].m0 * C64::from(params.beta);
    }
    d += lin / C64::from(6.0);
    let mut s = C64::from(0.0);
    for &a in &others {
        for &bb in others.iter().filter(|&&q| q != a) {
            s +=
                inner(&im[a].x, &im[bb].x) * params.mu2 + inner(&im[a].x, &im[bb].m0) * params.beta;
        }
    }
    BlockRestriction {
        d_vec: d,
        d_scalar: real_part(s) / 12.0,
    }
}

/// Restriction of the multilinear form to block `p` (0-based) with the others fixed.
pub fn block_restriction(
    blocks: &BlockSet,
    p: usize,
    params: &ScalarizationParams,
    mats: &ModelMatrices,
) -> Result<BlockRestriction> {
    if p >= 4 {
        return Err(Error::invalid(
            "block",
            format!("index must be 0..=3, got {p}"),
        ));
    }
    let im = blocks.0.clone().map(|x| BlockImages::new(&x, mats));
    Ok(restriction_from_images(&im, p, params))
}

/// Block placements of `M1` in the `2M x 2M` matrices spanning the Doppler cross term.
pub fn m1_placements(m1: &CMat) -> [CMat; 4] {
    let m = m1.nrows();
    let place = |tl: bool, br: bool, off: bool| {
        let mut out = CMat::zeros(2 * m, 2 * m);
        if tl {
            out.view_mut((0, 0), (m, m)).copy_from(m1);
        }
        if br {
            out.view_mut((m, m), (m, m)).copy_from(m1);
        }
        if off {
            out.view_mut((0, m), (m, m)).copy_from(m1);
            out.view_mut((m, 0), (m, m)).copy_from(m1);
        }
        out
    };
    [
        place(true, true, false),
        place(true, false, false),
        place(false, true, false),
        place(false, false, true),
    ]
}

/// Signs attached to the four placements.
pub const PLACEMENT_WEIGHTS: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Largest eigenvalue of `gamma I + sum_q w_q vec(P_q) vec(P_q)^H`, through the 4x4 Gram reduction.
pub fn phi_lambda_max(gamma: f64, m1: &CMat) -> f64 {
    let placements = m1_placements(m1);
    let mut gram = nalgebra::Matrix4::<C64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            gram[(i, j)] = placements[i]
                .iter()
                .zip(placements[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
        }
    }
    // Nonzero spectrum of W G equals that of G^{1/2} W G^{1/2}.
    let eg = SymmetricEigen::new(gram);
    let root = eg.eigenvalues.map(|v| v.max(0.0).sqrt());
    let half =
        eg.eigenvectors * Matrix4::from_diagonal(&root.map(C64::from)) * eg.eigenvectors.adjoint();
    let w = Matrix4::from_diagonal(&nalgebra::Vector4::from(PLACEMENT_WEIGHTS).map(C64::from));
    let core = half * w * half;
    let core = (core + core.adjoint()) * C64::from(0.5);
    let top = SymmetricEigen::new(core).eigenvalues.max();
    gamma + top.max(0.0)
}

/// `2 (1 - beta) lambda_max(Phi)`, a quartic weight making the augmented objective convex.
pub fn mu1_bound(beta: f64, mats: &ModelMatrices) -> f64 {
    if beta >= 1.0 {
        return 0.0;
    }
    let gamma = mats.m0_eig_max * mats.m2_eig_max;
    2.0 * (1.0 - beta) * phi_lambda_max(gamma, &mats.m1)
}

/// `max(0, -lambda_min(beta M0))`.
pub fn mu2_bound(beta: f64, mats: &ModelMatrices) -> f64 {
    (-beta * mats.m0_eig_min).max(0.0)
}

/// Convexity constants for `beta` with `zeta` attached.
pub fn convexified_params(beta: f64, zeta: f64, mats: &ModelMatrices) -> ScalarizationParams {
    ScalarizationParams {
        beta,
        zeta,
        mu1: mu1_bound(beta, mats),
        mu2: mu2_bound(beta, mats),
    }
}

/// `c^H A c` projected onto the reals.
pub fn hermitian_form(c: &CVec, a: &CMat) -> f64 {
    real_part(quad(c, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_matrices, p3_code, RadarScenario};

    fn mats() -> ModelMatrices {
        model_matrices(&RadarScenario::default(), 0.15).unwrap()
    }

    fn det_vec(m: usize, seed: u64) -> CVec {
        CVec::from_fn(m, |i, _| {
            let t = (i as f64 + 1.0) * (seed as f64 + 0.37);
            C64::new(t.sin(), (1.7 * t).cos())
        })
    }

    #[test]
    fn beta_one_reduces_to_sinr_form() {
        let m = mats();
        let c = p3_code(32).into_inner();
        let v = scalarized_objective(&c, 1.0, &m);
        assert!((v - hermitian_form(&c, &m.m0)).abs() < 1e-12 * v);
    }

    #[test]
    fn single_entry_code_has_zero_doppler_term() {
        let m = mats();
        let mut c = CVec::zeros(32);
        c[0] = C64::from(1.0);
        assert!(scalarized_objective(&c, 0.0, &m).abs() < 1e-20);
    }

    #[test]
    fn augmentation_on_unit_sphere() {
        let m = mats();
        let c = p3_code(32).into_inner();
        let p = ScalarizationParams {
            beta: 0.3,
            zeta: 1.0,
            mu1: 2.5,
            mu2: 0.75,
        };
        let gap = augmented_objective(&c, &p, &m) - scalarized_objective(&c, 0.3, &m);
        assert!((gap - 3.25).abs() < 1e-9);
    }

    #[test]
    fn equal_blocks_collapse() {
        let m = mats();
        let c = det_vec(32, 3);
        let p = convexified_params(0.2, 1.0, &m);
        let ml = multilinear_form(&BlockSet::replicate(&c), &p, &m);
        let f = augmented_objective(&c, &p, &m);
        assert!((ml - f).abs() <= 1e-10 * f.abs());
    }

    #[test]
    fn zero_blocks_give_zero_restriction() {
        let m = mats();
        let z = CVec::zeros(32);
        let blocks = BlockSet([det_vec(32, 1), z.clone(), z.clone(), z]);
        let p = convexified_params(0.5, 1.0, &m);
        let r = block_restriction(&blocks, 0, &p, &m).unwrap();
        assert_eq!(r.d_vec.norm(), 0.0);
        assert_eq!(r.d_scalar, 0.0);
        assert!(block_restriction(&blocks, 4, &p, &m).is_err());
    }

    #[test]
    fn quadratic_only_restriction() {
        let m = mats();
        let blocks = BlockSet([
            det_vec(32, 1),
            det_vec(32, 2),
            det_vec(32, 3),
            det_vec(32, 4),
        ]);
        let p = ScalarizationParams {
            beta: 1.0,
            zeta: 1.0,
            mu1: 0.0,
            mu2: 0.0,
        };
        let r = block_restriction(&blocks, 2, &p, &m).unwrap();
        let want = (&m.m0 * (&blocks.0[0] + &blocks.0[1] + &blocks.0[3])) / C64::from(6.0);
        assert!((&r.d_vec - want).norm() <= 1e-12 * r.d_vec.norm());
    }

    #[test]
    fn mu_bounds_edge_cases() {
        let m = mats();
        assert_eq!(mu1_bound(1.0, &m), 0.0);
        assert_eq!(mu2_bound(0.0, &m), 0.0);
        assert_eq!(mu2_bound(0.01, &m), 0.0);
        assert!(mu1_bound(0.0, &m) > 0.0);
    }
}
