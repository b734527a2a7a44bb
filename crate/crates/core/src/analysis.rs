//! Detection probability, Pareto and Doppler-mismatch sweeps, Monte-Carlo detection checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::crb::crb_pair;
use crate::error::{Error, Result};
use crate::linalg::{inner, quad, real_part, CVec, C64};
use crate::model::{
    invert_covariance, isl_db, model_matrices, papr, sinr, sinr_scale, to_db, CodeVector,
    ModelMatrices, RadarScenario,
};
use crate::solver::{relax_and_select, SolverConfig, SolverOptions};

/// Two-sided 95% standard-normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Terms of a Poisson law kept on each side of its mean, in standard deviations.
const POISSON_SPAN: f64 = 40.0;

fn ln_factorial(k: usize) -> f64 {
    if k < 16 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln P(U + shift <= V)` for independent `U ~ Poisson(u)`, `V ~ Poisson(v)`, both means positive.
fn log_poisson_order(u: f64, v: f64, shift: usize) -> f64 {
    let top = u.max(v);
    let hi = (top + POISSON_SPAN * top.sqrt() + POISSON_SPAN).ceil() as usize + shift;
    let (lu, lv) = (u.ln(), v.ln());
    let mut log_cdf_u = f64::NEG_INFINITY;
    let mut log_p = f64::NEG_INFINITY;
    for k in 0..=hi - shift {
        log_cdf_u = ln_add(log_cdf_u, -u + k as f64 * lu - ln_factorial(k));
        let j = k + shift;
        log_p = ln_add(log_p, -v + j as f64 * lv - ln_factorial(j) + log_cdf_u);
    }
    log_p
}

/// Marcum Q function of order one.
///
/// Uses `Q1(a, b) = P(I <= J)` with independent `I ~ Poisson(b^2/2)`, `J ~ Poisson(a^2/2)`,
/// the Poisson-mixture form of the Bessel series. All terms are positive and summed in the
/// log domain. Whichever of `Q1` and `1 - Q1` is smaller is summed directly, so both tails
/// keep relative accuracy and the result is monotone in each argument.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) || a.is_infinite() || b.is_infinite() {
        return Err(Error::invalid(
            "marcum_q1",
            format!("arguments must be finite and nonnegative, got ({a}, {b})"),
        ));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let y = 0.5 * b * b;
    if a == 0.0 {
        return Ok((-y).exp());
    }
    let x = 0.5 * a * a;
    if y >= x {
        Ok(log_poisson_order(y, x, 0).exp().clamp(0.0, 1.0))
    } else {
        // 1 - Q1 = P(J + 1 <= I).
        Ok((1.0 - log_poisson_order(x, y, 1).exp()).clamp(0.0, 1.0))
    }
}

/// `Q1(sqrt(2 SINR), sqrt(-2 ln Pfa))`.
pub fn detection_probability(sinr: f64, pfa: f64) -> f64 {
    marcum_q1((2.0 * sinr.max(0.0)).sqrt(), (-2.0 * pfa.ln()).sqrt())
        .expect("arguments are nonnegative")
}

/// Detection probability of code `c` in `scenario`.
pub fn code_detection_probability(
    c: &CodeVector,
    mats: &ModelMatrices,
    scenario: &RadarScenario,
) -> f64 {
    detection_probability(sinr(c, mats, scenario), scenario.pfa)
}

/// One point of a detection/estimation trade-off.
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub label: String,
    pub beta: Option<f64>,
    pub zeta: Option<f64>,
    pub sinr_db: f64,
    /// `1 / det(CRB)` (1/(s^2 Hz^2)).
    pub inv_det_crb: f64,
    pub pd: f64,
    pub papr: f64,
    pub isl_db: f64,
    pub code: CodeVector,
}

impl ParetoPoint {
    /// Evaluate a fixed code as a trade-off point.
    pub fn from_code(
        label: &str,
        code: &CodeVector,
        mats: &ModelMatrices,
        scenario: &RadarScenario,
    ) -> Result<Self> {
        let s = sinr(code, mats, scenario);
        let crb = crb_pair(code, mats, scenario)?;
        Ok(Self {
            label: label.to_string(),
            beta: None,
            zeta: None,
            sinr_db: to_db(s),
            inv_det_crb: 1.0 / crb.det,
            pd: detection_probability(s, scenario.pfa),
            papr: papr(code)?,
            isl_db: isl_db(code)?,
            code: code.clone(),
        })
    }

    /// `true` if some point of `frontier` is at least as good on both axes.
    pub fn weakly_dominated_by(&self, frontier: &[ParetoPoint]) -> bool {
        frontier
            .iter()
            .any(|f| f.sinr_db >= self.sinr_db && f.inv_det_crb >= self.inv_det_crb)
    }
}

/// Per-weight outcome of a sweep; failures are kept alongside successes.
#[derive(Debug, Clone)]
pub struct ParetoOutcome {
    pub beta: f64,
    pub zeta: f64,
    pub point: std::result::Result<ParetoPoint, String>,
}

/// One solve per weight in `betas` at similarity radius `zeta`, in input order.
pub fn pareto_sweep(
    betas: &[f64],
    zeta: f64,
    scenario: &RadarScenario,
    reference: &CodeVector,
    options: &SolverOptions,
) -> Result<Vec<ParetoOutcome>> {
    let mats = model_matrices(scenario, scenario.normalized_doppler)?;
    Ok(betas
        .par_iter()
        .map(|&beta| {
            let point = SolverConfig::with_options(beta, zeta, reference.clone(), &mats, options)
                .and_then(|config| relax_and_select(&config, scenario, &mats))
                .map(|r| ParetoPoint {
                    label: "designed".into(),
                    beta: Some(beta),
                    zeta: Some(zeta),
                    sinr_db: r.sinr_db,
                    inv_det_crb: 1.0 / r.crb.det,
                    pd: r.pd,
                    papr: r.papr,
                    isl_db: r.isl_db,
                    code: r.code,
                })
                .map_err(|e| e.to_string());
            ParetoOutcome { beta, zeta, point }
        })
        .collect())
}

/// `points` values evenly spaced over `[start, stop]`.
pub fn uniform_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Doppler grid used when none is configured.
pub fn default_nu_grid() -> Vec<f64> {
    uniform_grid(-0.5, 0.5, 1001)
}

/// Mismatch ratios of one code along a Doppler grid.
///
/// Each ratio is normalized by the designed code at the design Doppler:
/// `tau` is `c^H M0(nu) c` over its design value, `fd` the Doppler determinant ratio
/// and `pd` the detection probability ratio. Values below one are losses.
#[derive(Debug, Clone, Default)]
pub struct RatioCurves {
    pub tau: Vec<f64>,
    pub fd: Vec<f64>,
    pub pd: Vec<f64>,
    /// Grid points where the Doppler determinant is not positive.
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct DopplerSweep {
    pub nu_grid: Vec<f64>,
    pub designed: RatioCurves,
    pub reference: RatioCurves,
}

/// Evaluate the designed and reference codes across `nu_grid`, normalized by the designed code at
/// the scenario Doppler.
pub fn doppler_sweep(
    c_star: &CodeVector,
    c_ref: &CodeVector,
    scenario: &RadarScenario,
    nu_grid: &[f64],
) -> Result<DopplerSweep> {
    if let Some(nu) = nu_grid.iter().find(|nu| !(-0.5..=0.5).contains(*nu)) {
        return Err(Error::invalid(
            "nu_grid",
            format!("grid point {nu} outside [-0.5, 0.5]"),
        ));
    }
    scenario.validate()?;
    let inv = invert_covariance(&scenario.covariance()?)?;
    let design = crate::model::ModelMatrices::from_inverse(
        inv.clone(),
        scenario.normalized_doppler,
        scenario.pri,
    );
    let base = design.quad_forms(c_star.entries());
    let scale = sinr_scale(scenario);
    let base_pd = detection_probability(scale * base.q0, scenario.pfa);
    let rows: Vec<[(f64, f64, f64, bool); 2]> = nu_grid
        .par_iter()
        .map(|&nu| {
            let mats = crate::model::ModelMatrices::from_inverse(inv.clone(), nu, scenario.pri);
            [c_star, c_ref].map(|c| {
                let f = mats.quad_forms(c.entries());
                (
                    f.q0 / base.q0,
                    f.doppler_det / base.doppler_det,
                    detection_probability(scale * f.q0, scenario.pfa) / base_pd,
                    f.doppler_det <= 0.0,
                )
            })
        })
        .collect();
    let unzip = |k: usize| {
        let mut out = RatioCurves::default();
        for row in &rows {
            let (t, f, p, d) = row[k];
            out.tau.push(t);
            out.fd.push(f);
            out.pd.push(p);
            out.degenerate.push(d);
        }
        out
    };
    Ok(DopplerSweep {
        nu_grid: nu_grid.to_vec(),
        designed: unzip(0),
        reference: unzip(1),
    })
}

/// Acceptable mismatch: both CRBs grow by at most `max_crb_factor` and Pd keeps `min_pd_ratio`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRule {
    pub max_crb_factor: f64,
    pub min_pd_ratio: f64,
}

impl Default for LossRule {
    fn default() -> Self {
        Self {
            max_crb_factor: 1.1,
            min_pd_ratio: 0.9,
        }
    }
}

impl LossRule {
    pub fn accepts(&self, tau: f64, fd: f64, pd: f64) -> bool {
        tau > 0.0
            && fd > 0.0
            && 1.0 / tau <= self.max_crb_factor
            && 1.0 / fd <= self.max_crb_factor
            && pd >= self.min_pd_ratio
    }
}

/// Contiguous grid span around the point nearest `nu_center` where `rule` accepts every ratio.
pub fn loss_interval(
    curves: &RatioCurves,
    nu_grid: &[f64],
    nu_center: f64,
    rule: &LossRule,
) -> Option<(f64, f64)> {
    let ok = |k: usize| rule.accepts(curves.tau[k], curves.fd[k], curves.pd[k]);
    let center = nu_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - nu_center).abs().total_cmp(&(b.1 - nu_center).abs()))?
        .0;
    if !ok(center) {
        return None;
    }
    let mut lo = center;
    while lo > 0 && ok(lo - 1) {
        lo -= 1;
    }
    let mut hi = center;
    while hi + 1 < nu_grid.len() && ok(hi + 1) {
        hi += 1;
    }
    Some((nu_grid[lo], nu_grid[hi]))
}

/// Empirical detection rate with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub pd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub detections: u64,
}

/// Wilson score interval for `k` successes in `n` trials at `z` standard deviations.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

const BATCH: u64 = 8192;

/// Whitened statistic generator: `T = |h^H n + s|^2 / q` with `n ~ CN(0, I)`.
struct StatisticModel {
    h: CVec,
    signal: C64,
    q: f64,
}

impl StatisticModel {
    fn new(c: &CodeVector, scenario: &RadarScenario, amplitude_power: f64) -> Result<Self> {
        if !(amplitude_power >= 0.0 && amplitude_power.is_finite()) {
            return Err(Error::invalid(
                "amplitude_power",
                "must be finite and nonnegative",
            ));
        }
        scenario.validate()?;
        let sigma = scenario.covariance()?;
        let inv = invert_covariance(&sigma)?;
        let chol = sigma.cholesky().ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        let a = crate::model::steering_vector(scenario.normalized_doppler, scenario.pulses);
        if c.len() != scenario.pulses {
            return Err(Error::invalid("code", "length does not match pulse count"));
        }
        // Conjugate steering keeps the noncentrality equal to the SINR built from M0.
        let u = a.conjugate().component_mul(c.entries());
        let g = &inv * &u;
        let q = real_part(inner(&u, &g));
        let h = chol.l().ad_mul(&g);
        let signal = C64::from(amplitude_power.sqrt() * (scenario.fast_samples as f64).sqrt() * q);
        Ok(Self { h, signal, q })
    }

    fn batch(&self, seed: u64, index: u64, count: u64, mut visit: impl FnMut(f64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let m = self.h.len();
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..count {
            let mut acc = self.signal;
            for k in 0..m {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                acc += self.h[k].conj() * C64::new(re * scale, im * scale);
            }
            visit(acc.norm_sqr() / self.q);
        }
    }
}

fn batches(trials: u64) -> Vec<(u64, u64)> {
    (0..trials.div_ceil(BATCH))
        .map(|b| (b, BATCH.min(trials - b * BATCH)))
        .collect()
}

/// Normalized detector statistics, unit-exponential under noise only.
pub fn detection_statistics(
    c: &CodeVector,
    scenario: &RadarScenario,
    amplitude_power: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let model = StatisticModel::new(c, scenario, amplitude_power)?;
    let parts: Vec<Vec<f64>> = batches(trials)
        .into_par_iter()
        .map(|(b, n)| {
            let mut out = Vec::with_capacity(n as usize);
            model.batch(seed, b, n, |t| out.push(t));
            out
        })
        .collect();
    Ok(parts.concat())
}

/// Monte-Carlo detection rate of the slow-time detector at `amplitude_power`.
pub fn monte_carlo_pd(
    c: &CodeVector,
    scenario: &RadarScenario,
    amplitude_power: f64,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials < 10_000 {
        return Err(Error::invalid(
            "trials",
            format!("at least 10000 trials are required, got {trials}"),
        ));
    }
    let model = StatisticModel::new(c, scenario, amplitude_power)?;
    let threshold = -scenario.pfa.ln();
    let detections: u64 = batches(trials)
        .into_par_iter()
        .map(|(b, n)| {
            let mut hits = 0u64;
            model.batch(seed, b, n, |t| hits += u64::from(t > threshold));
            hits
        })
        .sum();
    let (ci_low, ci_high) = wilson_interval(detections, trials, Z95);
    Ok(MonteCarloEstimate {
        pd: detections as f64 / trials as f64,
        ci_low,
        ci_high,
        trials,
        detections,
    })
}

/// `c^H M0 c` scaled to SINR for an arbitrary amplitude power.
pub fn sinr_at_power(
    c: &CodeVector,
    mats: &ModelMatrices,
    scenario: &RadarScenario,
    amplitude_power: f64,
) -> f64 {
    amplitude_power * scenario.fast_samples as f64 * real_part(quad(c.entries(), &mats.m0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::p3_code;

    #[test]
    fn marcum_edges() {
        assert_eq!(marcum_q1(3.0, 0.0).unwrap(), 1.0);
        for b in [0.1, 1.0, 4.0, 9.0] {
            let q = marcum_q1(0.0, b).unwrap();
            assert!((q - (-b * b / 2.0).exp()).abs() <= 1e-15 * q);
        }
        assert!(marcum_q1(-1.0, 1.0).is_err());
        assert!(marcum_q1(1.0, -1.0).is_err());
    }

    #[test]
    fn marcum_known_value() {
        // Q1(1, 2) from the noncentral chi-square survival function.
        let q = marcum_q1(1.0, 2.0).unwrap();
        assert!((q - 0.269_012_060_035_909_7).abs() < 1e-12, "{q}");
    }

    #[test]
    fn ln_factorial_matches_product() {
        let mut acc = 0.0;
        for k in 1..200usize {
            acc += (k as f64).ln();
            assert!(
                (ln_factorial(k) - acc).abs() <= 1e-13 * acc.max(1.0),
                "k = {k}"
            );
        }
    }

    #[test]
    fn pd_edges() {
        let pfa = 1e-6;
        assert!((detection_probability(0.0, pfa) - pfa).abs() <= 1e-15);
        assert!(detection_probability(3.0, 1.0 - 1e-15) > 1.0 - 1e-9);
        assert!(detection_probability(5.0, pfa) > detection_probability(4.0, pfa));
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(50, 100, Z95);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((lo + hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_endpoints() {
        let g = default_nu_grid();
        assert_eq!(g.len(), 1001);
        assert_eq!(g[0], -0.5);
        assert_eq!(g[1000], 0.5);
        assert!((g[650] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn self_normalized_sweep() {
        let sc = RadarScenario::default();
        let c = p3_code(32);
        let sweep = doppler_sweep(&c, &c, &sc, &[sc.normalized_doppler]).unwrap();
        for v in [
            sweep.designed.tau[0],
            sweep.designed.fd[0],
            sweep.designed.pd[0],
        ] {
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(doppler_sweep(&c, &c, &sc, &[0.7]).is_err());
    }

    #[test]
    fn too_few_trials_rejected() {
        let sc = RadarScenario::default();
        assert!(monte_carlo_pd(&p3_code(32), &sc, 0.01, 100, 1).is_err());
    }
}
