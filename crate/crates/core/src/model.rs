//! Scenario description, reference codes, slow-time model matrices and waveform metrics.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_part, quad, real_part, CMat, CVec, C64, J};

/// Condition number above which the interference covariance is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Interference model across the pulse train.
#[derive(Debug, Clone, PartialEq)]
pub enum Interference {
    /// Exponentially correlated, `Sigma(i, j) = rho^|i - j|`.
    Exponential { rho: f64 },
    /// Explicit Hermitian positive-definite matrix.
    Explicit(CMat),
}

/// Physical and system parameters of one detection/estimation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScenario {
    pub pulses: usize,
    /// Pulse repetition interval (s).
    pub pri: f64,
    /// Chirp bandwidth (Hz).
    pub bandwidth: f64,
    /// Pulse width (s).
    pub pulse_width: f64,
    /// Fast-time sampling step (s).
    pub sample_step: f64,
    pub fast_samples: usize,
    /// Target amplitude power `|alpha|^2` (linear).
    pub amplitude_power: f64,
    /// Doppler normalized by the PRF, `f_d * T_r`.
    pub normalized_doppler: f64,
    pub pfa: f64,
    pub interference: Interference,
}

impl Default for RadarScenario {
    fn default() -> Self {
        Self {
            pulses: 32,
            pri: 250e-6,
            bandwidth: 5e6,
            pulse_width: 1e-5,
            sample_step: 1e-7,
            fast_samples: 100,
            amplitude_power: 1e-2,
            normalized_doppler: 0.15,
            pfa: 1e-6,
            interference: Interference::Exponential { rho: 0.8 },
        }
    }
}

impl RadarScenario {
    pub fn validate(&self) -> Result<()> {
        if self.pulses < 2 {
            return Err(Error::invalid("pulses", "at least 2 pulses are required"));
        }
        if self.fast_samples == 0 {
            return Err(Error::invalid("fast_samples", "must be positive"));
        }
        for (field, v) in [
            ("pri", self.pri),
            ("bandwidth", self.bandwidth),
            ("pulse_width", self.pulse_width),
            ("sample_step", self.sample_step),
            ("amplitude_power", self.amplitude_power),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and positive, got {v}"),
                ));
            }
        }
        let span = self.fast_samples as f64 * self.sample_step;
        if (span - self.pulse_width).abs() > 1e-9 * self.pulse_width {
            return Err(Error::invalid(
                "sample_step",
                format!(
                    "fast_samples * sample_step = {span:e} s must equal pulse_width = {:e} s",
                    self.pulse_width
                ),
            ));
        }
        if !(-0.5..0.5).contains(&self.normalized_doppler) {
            return Err(Error::invalid(
                "normalized_doppler",
                format!("must lie in [-0.5, 0.5), got {}", self.normalized_doppler),
            ));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::invalid(
                "pfa",
                format!("must lie in (0, 1), got {}", self.pfa),
            ));
        }
        match &self.interference {
            Interference::Exponential { rho } => {
                if !(0.0..1.0).contains(rho) {
                    return Err(Error::invalid(
                        "rho",
                        format!("must lie in [0, 1), got {rho}"),
                    ));
                }
            }
            Interference::Explicit(s) => {
                if s.nrows() != self.pulses || s.ncols() != self.pulses {
                    return Err(Error::invalid(
                        "covariance",
                        format!(
                            "expected {0}x{0}, got {1}x{2}",
                            self.pulses,
                            s.nrows(),
                            s.ncols()
                        ),
                    ));
                }
                let asym = (s - s.adjoint())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                let scale = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if asym > 1e-12 * scale.max(1.0) {
                    return Err(Error::invalid("covariance", "matrix is not Hermitian"));
                }
            }
        }
        Ok(())
    }

    /// Interference covariance across pulses.
    pub fn covariance(&self) -> Result<CMat> {
        match &self.interference {
            Interference::Exponential { rho } => exp_covariance(*rho, self.pulses),
            Interference::Explicit(s) => Ok(s.clone()),
        }
    }

    /// Target Doppler shift in Hz.
    pub fn doppler_hz(&self) -> f64 {
        self.normalized_doppler / self.pri
    }
}

/// `Sigma(i, j) = rho^|i - j|`.
pub fn exp_covariance(rho: f64, m: usize) -> Result<CMat> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(
            "rho",
            format!("must lie in [0, 1), got {rho}"),
        ));
    }
    Ok(CMat::from_fn(m, m, |i, j| {
        C64::from(rho.powi(i.abs_diff(j) as i32))
    }))
}

/// Temporal steering vector, entry `m` equal to `exp(j 2 pi nu m)`.
pub fn steering_vector(nu: f64, m: usize) -> CVec {
    CVec::from_fn(m, |k, _| C64::from_polar(1.0, 2.0 * PI * nu * k as f64))
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky, with a conditioning guard.
pub fn invert_covariance(sigma: &CMat) -> Result<CMat> {
    let eig = hermitian_eigenvalues(sigma);
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        let condition = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
        return Err(Error::IllConditioned { condition });
    }
    let chol = sigma.clone().cholesky().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Matrices of the slow-time model at one normalized Doppler.
#[derive(Debug, Clone)]
pub struct ModelMatrices {
    pub m0: CMat,
    pub m1: CMat,
    pub m2: CMat,
    /// `b(m) = j 2 pi m T_r`.
    pub b: CVec,
    pub sigma_t_inv: CMat,
    pub steering: CVec,
    pub nu: f64,
    pub m0_eig_min: f64,
    pub m0_eig_max: f64,
    pub m2_eig_max: f64,
}

impl ModelMatrices {
    pub fn pulses(&self) -> usize {
        self.m0.nrows()
    }

    /// Assemble from an already inverted covariance.
    pub fn from_inverse(sigma_t_inv: CMat, nu: f64, pri: f64) -> Self {
        let m = sigma_t_inv.nrows();
        let a = steering_vector(nu, m);
        let m0 = hermitian_part(&sigma_t_inv.component_mul(&(&a * a.adjoint())));
        let b = CVec::from_fn(m, |k, _| J * (2.0 * PI * k as f64 * pri));
        let m1 = CMat::from_fn(m, m, |i, q| b[i].conj() * m0[(i, q)]);
        let m2 = hermitian_part(&CMat::from_fn(m, m, |i, q| b[i] * b[q].conj() * m0[(i, q)]));
        let e0 = hermitian_eigenvalues(&m0);
        let e2 = hermitian_eigenvalues(&m2);
        Self {
            m0_eig_min: e0[0],
            m0_eig_max: e0[m - 1],
            m2_eig_max: e2[m - 1],
            m0,
            m1,
            m2,
            b,
            sigma_t_inv,
            steering: a,
            nu,
        }
    }

    /// Quadratic forms of `c` entering SINR and the CRB.
    pub fn quad_forms(&self, c: &CVec) -> QuadForms {
        let q0 = real_part(quad(c, &self.m0));
        let q1 = quad(c, &self.m1);
        let q2 = real_part(quad(c, &self.m2));
        QuadForms {
            q0,
            q1,
            q2,
            doppler_det: q0 * q2 - q1.norm_sqr(),
        }
    }
}

/// `c^H M0 c`, `c^H M1 c`, `c^H M2 c` and the Doppler determinant `q0 q2 - |q1|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForms {
    pub q0: f64,
    pub q1: C64,
    pub q2: f64,
    pub doppler_det: f64,
}

/// Build the model matrices for `scenario` at normalized Doppler `nu`.
pub fn model_matrices(scenario: &RadarScenario, nu: f64) -> Result<ModelMatrices> {
    scenario.validate()?;
    if !nu.is_finite() {
        return Err(Error::invalid("normalized_doppler", "must be finite"));
    }
    let inv = invert_covariance(&scenario.covariance()?)?;
    Ok(ModelMatrices::from_inverse(inv, nu, scenario.pri))
}

/// Complex slow-time code with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeVector(CVec);

impl CodeVector {
    pub fn new(entries: CVec) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("code", "empty code"));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invalid("code", "non-finite entry"));
        }
        Ok(Self(entries))
    }

    /// Scale to unit energy.
    pub fn normalized(entries: CVec) -> Result<Self> {
        let n = entries.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Self::new(entries / C64::from(n))
    }

    pub fn from_slice(entries: &[C64]) -> Result<Self> {
        Self::new(CVec::from_column_slice(entries))
    }

    pub fn entries(&self) -> &CVec {
        &self.0
    }

    pub fn into_inner(self) -> CVec {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.energy() - 1.0).abs() <= tol
    }
}

/// Unit-energy P3 code, phases `pi m^2 / M` for `m = 0..M-1`.
pub fn p3_code(m: usize) -> CodeVector {
    let amp = 1.0 / (m as f64).sqrt();
    let entries = CVec::from_fn(m, |k, _| {
        let k = k as f64;
        C64::from_polar(amp, PI * k * k / m as f64)
    });
    CodeVector(entries)
}

/// A reference code read from disk together with its energy before normalization.
#[derive(Debug, Clone)]
pub struct ReferenceCode {
    pub code: CodeVector,
    pub original_energy: f64,
}

/// Parse the `re im` per-line format; `#` lines and blank lines are skipped.
pub fn parse_reference_code(text: &str, origin: &Path) -> Result<ReferenceCode> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(perr(format!(
                "expected \"re im\", found {} fields",
                fields.len()
            )));
        }
        let re: f64 = fields[0]
            .parse()
            .map_err(|e| perr(format!("real part: {e}")))?;
        let im: f64 = fields[1]
            .parse()
            .map_err(|e| perr(format!("imaginary part: {e}")))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(perr("non-finite entry".into()));
        }
        entries.push(C64::new(re, im));
    }
    if entries.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "no code entries".into(),
        });
    }
    let raw = CVec::from_vec(entries);
    let original_energy = raw.norm_squared();
    Ok(ReferenceCode {
        code: CodeVector::normalized(raw)?,
        original_energy,
    })
}

pub fn load_reference_code(path: impl AsRef<Path>) -> Result<ReferenceCode> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_reference_code(&text, path)
}

const GENERALIZED_BARKER_32: &str = include_str!("../assets/generalized_barker_32.txt");

/// Length-32 low-sidelobe polyphase code shipped in `assets/`.
pub fn generalized_barker_32() -> CodeVector {
    parse_reference_code(
        GENERALIZED_BARKER_32,
        &PathBuf::from("assets/generalized_barker_32.txt"),
    )
    .expect("bundled asset parses")
    .code
}

/// `|alpha|^2 N c^H M0 c`.
pub fn sinr(c: &CodeVector, mats: &ModelMatrices, scenario: &RadarScenario) -> f64 {
    sinr_scale(scenario) * real_part(quad(c.entries(), &mats.m0))
}

/// `|alpha|^2 N`, the factor mapping `c^H M0 c` to SINR.
pub fn sinr_scale(scenario: &RadarScenario) -> f64 {
    scenario.amplitude_power * scenario.fast_samples as f64
}

/// `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Peak-to-average power ratio `M max|c|^2 / ||c||^2`.
pub fn papr(c: &CodeVector) -> Result<f64> {
    let e = c.energy();
    if e == 0.0 {
        return Err(Error::ZeroVector);
    }
    let power = c.entries().iter().map(|z| z.norm_sqr());
    let peak = power.clone().fold(0.0, f64::max);
    let floor = power.fold(f64::INFINITY, f64::min);
    // Constant-modulus codes differ from 1 only by rounding in |z|^2; report them as exactly 1.
    if peak - floor <= 8.0 * f64::EPSILON * peak {
        return Ok(1.0);
    }
    Ok(c.len() as f64 * peak / e)
}

/// Aperiodic autocorrelation `r(k) = sum_m c(m + k) conj(c(m))` for `k = 0..M-1`.
pub fn autocorrelation(c: &CVec) -> Vec<C64> {
    let m = c.len();
    (0..m)
        .map(|k| (0..m - k).map(|i| c[i + k] * c[i].conj()).sum())
        .collect()
}

/// Integrated sidelobe level in dB over both lag signs; `-inf` for a delta autocorrelation.
pub fn isl_db(c: &CodeVector) -> Result<f64> {
    if c.energy() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let r = autocorrelation(c.entries());
    let side: f64 = 2.0 * r[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(if side == 0.0 {
        f64::NEG_INFINITY
    } else {
        to_db(side / r[0].norm_sqr())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exp_covariance_identity_and_two_by_two() {
        let s = exp_covariance(0.0, 4).unwrap();
        assert_eq!(s, CMat::identity(4, 4));
        let s = exp_covariance(0.8, 2).unwrap();
        assert_eq!(s[(0, 1)], C64::from(0.8));
        assert_eq!(s[(1, 0)], C64::from(0.8));
        assert!(exp_covariance(1.0, 3).is_err());
        assert!(exp_covariance(-0.1, 3).is_err());
    }

    #[test]
    fn exp_covariance_positive_definite_at_32() {
        let s = exp_covariance(0.8, 32).unwrap();
        assert!(hermitian_eigenvalues(&s)[0] > 0.0);
    }

    #[test]
    fn steering_entries() {
        assert!(steering_vector(0.0, 8).iter().all(|z| *z == C64::from(1.0)));
        let a = steering_vector(0.5, 2);
        assert!((a[1] - C64::from(-1.0)).norm() < 1e-15);
        let a = steering_vector(0.15, 32);
        assert!((a[3] - C64::from_polar(1.0, 2.0 * PI * 0.45)).norm() < 1e-15);
    }

    #[test]
    fn identity_covariance_gives_identity_m0() {
        let sc = RadarScenario {
            interference: Interference::Exponential { rho: 0.0 },
            ..Default::default()
        };
        let mats = model_matrices(&sc, 0.23).unwrap();
        let diff = (&mats.m0 - CMat::identity(32, 32))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn two_pulse_m0_by_hand() {
        let sc = RadarScenario {
            pulses: 2,
            ..Default::default()
        };
        let mats = model_matrices(&sc, 0.0).unwrap();
        let d = 1.0 - 0.64;
        let want = [[1.0 / d, -0.8 / d], [-0.8 / d, 1.0 / d]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((mats.m0[(i, j)] - C64::from(want[i][j])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn m1_and_m2_definitions() {
        let mats = model_matrices(&RadarScenario::default(), 0.15).unwrap();
        for i in 0..32 {
            for q in 0..32 {
                let m1 = mats.b[i].conj() * mats.m0[(i, q)];
                assert!((mats.m1[(i, q)] - m1).norm() <= 1e-12 * m1.norm().max(1.0));
                let m2 = mats.b[i] * mats.b[q].conj() * mats.m0[(i, q)];
                assert!((mats.m2[(i, q)] - m2).norm() <= 1e-12 * m2.norm().max(1.0));
            }
        }
    }

    #[test]
    fn ill_conditioned_covariance_rejected() {
        let mut s = CMat::identity(3, 3);
        s[(2, 2)] = C64::from(1e-14);
        let sc = RadarScenario {
            pulses: 3,
            interference: Interference::Explicit(s),
            ..Default::default()
        };
        assert!(matches!(
            model_matrices(&sc, 0.1),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn scenario_validation() {
        assert!(RadarScenario::default().validate().is_ok());
        let bad = RadarScenario {
            fast_samples: 99,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RadarScenario {
            normalized_doppler: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn p3_phases_and_metrics() {
        let c = p3_code(4);
        let want = [0.0, PI / 4.0, PI, 9.0 * PI / 4.0];
        for (z, ph) in c.entries().iter().zip(want) {
            assert!((z - C64::from_polar(0.5, ph)).norm() < 1e-15);
        }
        let c = p3_code(32);
        assert!(c.is_unit(1e-12));
        assert_eq!(papr(&c).unwrap(), 1.0);
        assert!(close(isl_db(&c).unwrap(), -9.62, 0.02));
    }

    #[test]
    fn delta_code_metrics() {
        let mut v = CVec::zeros(8);
        v[3] = C64::new(0.0, 2.0);
        let c = CodeVector::new(v).unwrap();
        assert!(close(papr(&c).unwrap(), 8.0, 1e-12));
        assert_eq!(isl_db(&c).unwrap(), f64::NEG_INFINITY);
        let z = CodeVector::new(CVec::zeros(4)).unwrap();
        assert!(papr(&z).is_err());
        assert!(isl_db(&z).is_err());
    }

    #[test]
    fn reference_code_parsing() {
        let p3 = p3_code(32);
        let mut text = String::from("# p3\n");
        for z in p3.entries().iter() {
            text.push_str(&format!("{:e} {:e}\n", z.re * 3.0, z.im * 3.0));
        }
        let r = parse_reference_code(&text, Path::new("mem")).unwrap();
        assert!(close(r.original_energy, 9.0, 1e-12));
        assert!(close(isl_db(&r.code).unwrap(), -9.62, 0.02));
        assert!(parse_reference_code("", Path::new("mem")).is_err());
        assert!(parse_reference_code("# only comments\n", Path::new("mem")).is_err());
        let err = parse_reference_code("1 0\n1 x\n", Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(
            parse_reference_code("0 0\n0 0\n", Path::new("mem")),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn bundled_barker_is_constant_modulus() {
        let g = generalized_barker_32();
        assert_eq!(g.len(), 32);
        assert!(close(papr(&g).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn sinr_identity_covariance() {
        let sc = RadarScenario {
            interference: Interference::Exponential { rho: 0.0 },
            ..Default::default()
        };
        let mats = model_matrices(&sc, 0.15).unwrap();
        let c = p3_code(32);
        assert!(close(sinr(&c, &mats, &sc), 1.0, 1e-12));
        let c2 = CodeVector::new(c.entries() * C64::from(2.0)).unwrap();
        assert!(close(sinr(&c2, &mats, &sc), 4.0, 1e-12));
    }
}
