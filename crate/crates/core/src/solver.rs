//! Closed-form block update, maximum-block-improvement iteration, best-block selection
//! and the two benchmark codes.

use crate::analysis::detection_probability;
use crate::crb::{crb_pair, CrbPair};
use crate::error::{Error, Result};
use crate::linalg::{canonical_phase, hermitian_dominant, inner, CVec, C64};
use crate::model::{
    isl_db, model_matrices, p3_code, papr, sinr, to_db, CodeVector, ModelMatrices, RadarScenario,
};
use crate::objective::{
    augmented_objective, convexified_params, multilinear_from_images, restriction_from_images,
    BlockImages, BlockSet, ScalarizationParams,
};

/// Feasibility slack for unit energy and the similarity half-space.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Which branch of the closed-form update produced the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateCase {
    /// `d = 0`; the reference is returned.
    Zero,
    /// `d` anti-parallel to the reference; the output sits on the similarity boundary.
    AntiParallel,
    /// Similarity constraint inactive; `d / ||d||`.
    Unconstrained,
    /// Similarity constraint active with a positive multiplier.
    Boundary,
    /// `zeta = 0` leaves the reference as the only feasible point.
    Pinned,
}

/// Block maximizer with its Lagrange multipliers.
#[derive(Debug, Clone)]
pub struct BlockUpdate {
    pub code: CVec,
    /// Multiplier of the unit-energy constraint.
    pub lambda1: f64,
    /// Multiplier of the similarity constraint.
    pub lambda2: f64,
    pub case: UpdateCase,
}

/// Unit vector orthogonal to `c0`, from the first canonical basis vector not nearly parallel to it.
pub fn orthogonal_complement(c0: &CVec) -> CVec {
    let m = c0.len();
    for k in 0..m {
        let mut e = CVec::zeros(m);
        e[k] = C64::from(1.0);
        let v = &e - c0 * c0[k].conj();
        let n = v.norm();
        if n > 1e-3 {
            return v / C64::from(n);
        }
    }
    unreachable!("a unit vector in dimension >= 2 has a non-parallel basis vector")
}

/// Positive multiplier of the active similarity constraint.
///
/// Solves `lambda^2 + r lambda + c/a = 0` taking the larger root without cancellation.
pub fn similarity_multiplier(d_norm: f64, re_c0d: f64, zeta: f64) -> f64 {
    let kappa = (2.0 - zeta) * (2.0 - zeta);
    let a = 4.0 * (kappa - 4.0);
    let c = kappa * d_norm * d_norm - 4.0 * re_c0d * re_c0d;
    let r = re_c0d;
    let disc = (r * r - 4.0 * c / a).max(0.0);
    let sq = disc.sqrt();
    if r <= 0.0 {
        0.5 * (sq - r)
    } else {
        (-2.0 * c / a) / (r + sq)
    }
}

/// Maximize `Re{d^H c}` over `||c|| = 1`, `2 Re{c0^H c} >= 2 - zeta`.
pub fn block_update_detailed(d: &CVec, c0: &CVec, zeta: f64) -> BlockUpdate {
    let nd = d.norm();
    if nd == 0.0 {
        return BlockUpdate {
            code: c0.clone(),
            lambda1: 0.0,
            lambda2: 0.0,
            case: UpdateCase::Zero,
        };
    }
    let proj = inner(c0, d);
    let r = proj.re;
    let parallel_residual = (d - c0 * proj).norm();
    if r < 0.0 && parallel_residual <= 1e-12 * nd && proj.im.abs() <= 1e-12 * nd {
        let delta = (2.0 - zeta) / 2.0;
        let perp = orthogonal_complement(c0);
        let code = c0 * C64::from(delta) + perp * C64::from((1.0 - delta * delta).max(0.0).sqrt());
        return BlockUpdate {
            code,
            lambda1: 0.0,
            lambda2: -r / 2.0,
            case: UpdateCase::AntiParallel,
        };
    }
    if 2.0 * r + nd * (zeta - 2.0) >= 0.0 {
        return BlockUpdate {
            code: d / C64::from(nd),
            lambda1: nd / 2.0,
            lambda2: 0.0,
            case: UpdateCase::Unconstrained,
        };
    }
    if zeta <= 0.0 {
        return BlockUpdate {
            code: c0.clone(),
            lambda1: 0.0,
            lambda2: 0.0,
            case: UpdateCase::Pinned,
        };
    }
    let lambda2 = similarity_multiplier(nd, r, zeta);
    let v = d + c0 * C64::from(2.0 * lambda2);
    let nv = v.norm();
    BlockUpdate {
        code: v / C64::from(nv),
        lambda1: nv / 2.0,
        lambda2,
        case: UpdateCase::Boundary,
    }
}

pub fn block_update(d: &CVec, c0: &CVec, zeta: f64) -> CVec {
    block_update_detailed(d, c0, zeta).code
}

/// `true` when `c` has unit energy and satisfies the similarity constraint around `c0`.
pub fn is_feasible(c: &CVec, c0: &CVec, zeta: f64, tol: f64) -> bool {
    (c.norm_squared() - 1.0).abs() <= tol && 2.0 * inner(c0, c).re - (2.0 - zeta) >= -tol
}

/// Solver inputs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub params: ScalarizationParams,
    pub reference: CodeVector,
    /// Starting point for all four blocks; the reference when absent.
    pub init: Option<CodeVector>,
    pub epsilon: f64,
    pub n_iter_max: usize,
}

impl SolverConfig {
    /// Default tolerances with convexity constants computed from `mats`.
    pub fn new(beta: f64, zeta: f64, reference: CodeVector, mats: &ModelMatrices) -> Self {
        Self {
            params: convexified_params(beta, zeta, mats),
            reference,
            init: None,
            epsilon: 1e-7,
            n_iter_max: 6000,
        }
    }

    /// Configuration honoring the tolerance and convexity overrides in `options`.
    pub fn with_options(
        beta: f64,
        zeta: f64,
        reference: CodeVector,
        mats: &ModelMatrices,
        options: &SolverOptions,
    ) -> Result<Self> {
        let mut config = Self::new(beta, zeta, reference, mats);
        if let Some(mu1) = options.mu1 {
            config.params.mu1 = mu1;
        }
        if let Some(mu2) = options.mu2 {
            config.params.mu2 = mu2;
        }
        config.epsilon = options.epsilon;
        config.n_iter_max = options.n_iter_max;
        config.validate(mats.pulses())?;
        Ok(config)
    }

    fn validate(&self, m: usize) -> Result<()> {
        self.params.validate()?;
        if self.reference.len() != m {
            return Err(Error::invalid(
                "reference",
                format!("length {} does not match {m} pulses", self.reference.len()),
            ));
        }
        if !self.reference.is_unit(FEASIBILITY_TOL) {
            return Err(Error::invalid(
                "reference",
                "reference code must have unit energy",
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
        }
        if let Some(init) = &self.init {
            if init.len() != m {
                return Err(Error::invalid(
                    "init",
                    format!("length {} does not match {m} pulses", init.len()),
                ));
            }
            if !is_feasible(
                init.entries(),
                self.reference.entries(),
                self.params.zeta,
                FEASIBILITY_TOL,
            ) {
                return Err(Error::invalid(
                    "init",
                    "starting code violates the energy or similarity constraint",
                ));
            }
        }
        Ok(())
    }
}

/// Tolerances and optional convexity-constant overrides shared by batch runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub n_iter_max: usize,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            n_iter_max: 6000,
            mu1: None,
            mu2: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Epsilon,
    IterationCap,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Epsilon => "epsilon",
            Termination::IterationCap => "iteration_cap",
        }
    }
}

/// Multilinear objective history of one MBI run.
#[derive(Debug, Clone)]
pub struct SolveTrace {
    /// Objective before the first iteration followed by one value per iteration.
    pub upsilon: Vec<f64>,
    /// Block committed at each iteration (0-based).
    pub chosen_block: Vec<usize>,
    pub terminated_by: Termination,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.chosen_block.len()
    }

    pub fn final_value(&self) -> f64 {
        *self.upsilon.last().expect("trace holds the initial value")
    }
}

/// Maximum block improvement on the four-block relaxation.
pub fn mbi_solve(config: &SolverConfig, mats: &ModelMatrices) -> Result<(BlockSet, SolveTrace)> {
    config.validate(mats.pulses())?;
    let c0 = config.reference.entries();
    let zeta = config.params.zeta;
    let start = config.init.as_ref().unwrap_or(&config.reference).entries();
    let mut images: [BlockImages; 4] = std::array::from_fn(|_| BlockImages::new(start, mats));
    let mut current = multilinear_from_images(&images, &config.params);
    let mut trace = SolveTrace {
        upsilon: vec![current],
        chosen_block: Vec::new(),
        terminated_by: Termination::IterationCap,
    };
    while trace.iterations() < config.n_iter_max {
        let mut best: Option<(f64, usize, CVec)> = None;
        for p in 0..4 {
            let restriction = restriction_from_images(&images, p, &config.params);
            let cand = block_update(&restriction.d_vec, c0, zeta);
            let value = restriction.evaluate(&cand);
            if best.as_ref().map_or(true, |(v, _, _)| value > *v) {
                best = Some((value, p, cand));
            }
        }
        let (value, p, cand) = best.expect("four candidates");
        if !value.is_finite() {
            return Err(Error::Solver(format!(
                "non-finite objective at iteration {}",
                trace.iterations()
            )));
        }
        images[p] = BlockImages::new(&cand, mats);
        trace.upsilon.push(value);
        trace.chosen_block.push(p);
        let step = (value - current).abs();
        current = value;
        if step < config.epsilon {
            trace.terminated_by = Termination::Epsilon;
            break;
        }
    }
    Ok((BlockSet(images.map(|im| im.x)), trace))
}

/// Objective values are reported as `20 log10` of the linear value.
pub fn objective_db(v: f64) -> f64 {
    20.0 * v.log10()
}

/// Designed code with its detection and estimation figures.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub code: CodeVector,
    pub params: ScalarizationParams,
    pub blocks: BlockSet,
    /// Block (0-based) whose augmented objective is largest.
    pub selected_block: usize,
    /// Final multilinear objective.
    pub upsilon: f64,
    pub upsilon_db: f64,
    /// Augmented objective at the selected block.
    pub augmented: f64,
    pub augmented_db: f64,
    pub sinr: f64,
    pub sinr_db: f64,
    pub crb: CrbPair,
    pub pd: f64,
    pub papr: f64,
    pub isl_db: f64,
    pub trace: SolveTrace,
}

/// Run MBI, then keep the block with the largest augmented objective.
pub fn relax_and_select(
    config: &SolverConfig,
    scenario: &RadarScenario,
    mats: &ModelMatrices,
) -> Result<SynthesisResult> {
    let (blocks, trace) = mbi_solve(config, mats)?;
    let values: Vec<f64> = blocks
        .0
        .iter()
        .map(|c| augmented_objective(c, &config.params, mats))
        .collect();
    let mut selected = 0;
    for (p, v) in values.iter().enumerate() {
        if *v > values[selected] {
            selected = p;
        }
    }
    let augmented = values[selected];
    let upsilon = trace.final_value();
    if augmented < upsilon - 1e-9 {
        return Err(Error::Solver(format!(
            "selected block objective {augmented} falls below the relaxation value {upsilon}"
        )));
    }
    let code = CodeVector::new(blocks.0[selected].clone())?;
    let s = sinr(&code, mats, scenario);
    Ok(SynthesisResult {
        crb: crb_pair(&code, mats, scenario)?,
        pd: detection_probability(s, scenario.pfa),
        papr: papr(&code)?,
        isl_db: isl_db(&code)?,
        sinr: s,
        sinr_db: to_db(s),
        upsilon,
        upsilon_db: objective_db(upsilon),
        augmented,
        augmented_db: objective_db(augmented),
        selected_block: selected,
        params: config.params,
        blocks,
        code,
        trace,
    })
}

/// Build the scenario matrices at the target Doppler and solve for `(beta, zeta)`.
pub fn synthesize(
    scenario: &RadarScenario,
    beta: f64,
    zeta: f64,
    reference: &CodeVector,
    options: &SolverOptions,
) -> Result<SynthesisResult> {
    let mats = model_matrices(scenario, scenario.normalized_doppler)?;
    let config = SolverConfig::with_options(beta, zeta, reference.clone(), &mats, options)?;
    relax_and_select(&config, scenario, &mats)
}

/// Unit-energy dominant eigenvector of `M0`, the SINR-optimal code without similarity constraint.
pub fn benchmark_sinr_code(mats: &ModelMatrices) -> CodeVector {
    let (_, v) = hermitian_dominant(&mats.m0);
    let v = canonical_phase(&v);
    CodeVector::normalized(v).expect("eigenvector is nonzero")
}

/// Doppler-determinant benchmark: `beta = 0` with the similarity constraint switched off.
pub fn benchmark_crb_code(
    scenario: &RadarScenario,
    mats: &ModelMatrices,
) -> Result<SynthesisResult> {
    let config = SolverConfig::new(0.0, 2.0, p3_code(mats.pulses()), mats);
    relax_and_select(&config, scenario, mats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_part;

    fn vec_from(seed: u64, m: usize) -> CVec {
        CVec::from_fn(m, |i, _| {
            let t = (i as f64 + 0.5) * (seed as f64 * 0.731 + 1.3);
            C64::new(t.sin(), (2.3 * t).cos())
        })
    }

    #[test]
    fn zero_d_returns_reference() {
        let c0 = p3_code(8).into_inner();
        let u = block_update_detailed(&CVec::zeros(8), &c0, 0.7);
        assert_eq!(u.case, UpdateCase::Zero);
        assert_eq!(u.code, c0);
    }

    #[test]
    fn inactive_similarity_returns_direction() {
        let c0 = p3_code(8).into_inner();
        let d = vec_from(3, 8);
        let u = block_update(&d, &c0, 2.0);
        assert!((&u - &d / C64::from(d.norm())).norm() < 1e-15);
    }

    #[test]
    fn anti_parallel_lands_on_boundary() {
        let c0 = p3_code(8).into_inner();
        for zeta in [0.3, 1.0, 2.0] {
            let d = &c0 * C64::from(-2.5);
            let u = block_update_detailed(&d, &c0, zeta);
            assert_eq!(u.case, UpdateCase::AntiParallel);
            assert!((u.code.norm() - 1.0).abs() < 1e-12);
            assert!((2.0 * inner(&c0, &u.code).re - (2.0 - zeta)).abs() < 1e-12);
        }
    }

    #[test]
    fn stable_root_matches_textbook_form() {
        for (nd, r, zeta) in [
            (1.0, 0.3, 0.5),
            (2.0, -0.7, 1.2),
            (0.4, 0.39, 0.01),
            (3.0, -2.9, 1.9),
        ] {
            let kappa: f64 = (2.0 - zeta) * (2.0 - zeta);
            let a = 4.0 * (kappa - 4.0);
            let b = 4.0 * r * (kappa - 4.0);
            let c = kappa * nd * nd - 4.0 * r * r;
            let raw = 0.5 * (-b / a + ((b / a) * (b / a) - 4.0 * c / a).sqrt());
            let stable = similarity_multiplier(nd, r, zeta);
            assert!(
                (raw - stable).abs() <= 1e-12 * raw.abs().max(1.0),
                "{raw} vs {stable}"
            );
        }
    }

    #[test]
    fn zeta_zero_pins_reference() {
        let mats = model_matrices(&RadarScenario::default(), 0.15).unwrap();
        let c0 = p3_code(32);
        let config = SolverConfig::new(0.01, 0.0, c0.clone(), &mats);
        let (blocks, trace) = mbi_solve(&config, &mats).unwrap();
        assert_eq!(trace.iterations(), 1);
        for b in blocks.0.iter() {
            assert!((b - c0.entries()).norm() < 1e-12);
        }
        assert!((trace.upsilon[0] - trace.upsilon[1]).abs() <= 1e-12 * trace.upsilon[0].abs());
    }

    #[test]
    fn infeasible_init_rejected() {
        let mats = model_matrices(&RadarScenario::default(), 0.15).unwrap();
        let c0 = p3_code(32);
        let mut config = SolverConfig::new(0.01, 0.1, c0.clone(), &mats);
        config.init = Some(CodeVector::new(c0.entries() * C64::from(-1.0)).unwrap());
        assert!(mbi_solve(&config, &mats).is_err());
    }

    #[test]
    fn sinr_benchmark_is_dominant_eigenvector() {
        let mats = model_matrices(&RadarScenario::default(), 0.15).unwrap();
        let c = benchmark_sinr_code(&mats);
        let rq = real_part(crate::linalg::quad(c.entries(), &mats.m0));
        assert!((rq - mats.m0_eig_max).abs() <= 1e-10 * mats.m0_eig_max);
        assert!(c.is_unit(1e-12));
    }
}
