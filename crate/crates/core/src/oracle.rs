//! Independent reference computations used to cross-check the fast paths, plus the
//! battery behind `radcode validate`.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::marcum_q1;
use crate::crb::{chirp_at, crb_from_full_fim, crb_pair, full_fim, FullFim};
use crate::linalg::{hermitian_eigenvalues, inner, CMat, CVec, C64};
use crate::model::{model_matrices, CodeVector, ModelMatrices, RadarScenario};
use crate::objective::{
    augmented_objective, block_restriction, convexified_params, m1_placements, multilinear_form,
    phi_lambda_max, BlockSet, ScalarizationParams, PLACEMENT_WEIGHTS,
};
use crate::solver::{block_update_detailed, BlockUpdate, UpdateCase};

/// Complex vector with i.i.d. `CN(0, 1)` entries.
pub fn random_vector<R: Rng>(rng: &mut R, m: usize) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Uniformly distributed unit-energy code.
pub fn random_unit_code<R: Rng>(rng: &mut R, m: usize) -> CodeVector {
    CodeVector::normalized(random_vector(rng, m)).expect("Gaussian draw is nonzero")
}

/// Exponentially scaled modified Bessel function `exp(-z) I0(z)` for `z >= 0`.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    if z <= 30.0 {
        let q = 0.25 * z * z;
        let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0f64);
        loop {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-z).exp()
    } else {
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..200 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (kf * 8.0 * z);
            if next >= term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * PI * z).sqrt()
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        kronrod += GK_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gauss_kronrod(f, lo, hi);
    // Below ~50 ulp the error estimate is roundoff, so splitting further cannot help.
    if err <= tol || err <= 50.0 * f64::EPSILON * val.abs() || depth == 0 {
        return val;
    }
    let mid = 0.5 * (lo + hi);
    adaptive(f, lo, mid, 0.5 * tol, depth - 1) + adaptive(f, mid, hi, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[lo, hi]` to relative accuracy `rel`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel: f64) -> f64 {
    const PANELS: usize = 64;
    let w = (hi - lo) / PANELS as f64;
    let coarse: f64 = (0..PANELS)
        .map(|k| {
            gauss_kronrod(&f, lo + k as f64 * w, lo + (k + 1) as f64 * w)
                .0
                .abs()
        })
        .sum();
    let tol = rel * coarse / PANELS as f64;
    (0..PANELS)
        .map(|k| adaptive(&f, lo + k as f64 * w, lo + (k + 1) as f64 * w, tol, 20))
        .sum()
}

/// `Q1(a, b)` by quadrature of `int_b^inf t exp(-(t^2 + a^2)/2) I0(a t) dt`.
pub fn marcum_q1_quadrature(a: f64, b: f64) -> f64 {
    let upper = a.max(b) + 40.0;
    integrate(
        |t| t * (-0.5 * (t - a) * (t - a)).exp() * bessel_i0_scaled(a * t),
        b,
        upper,
        1e-14,
    )
}

/// Multilinear form summed literally over all 24 block orderings.
pub fn multilinear_form_literal(
    blocks: &BlockSet,
    p: &ScalarizationParams,
    mats: &ModelMatrices,
) -> f64 {
    let x = &blocks.0;
    let m1h = mats.m1.adjoint();
    let form = |u: &CVec, a: &CMat, v: &CVec| inner(u, &(a * v));
    let mut quartic = C64::from(0.0);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let mut seen = [false; 4];
                    for q in [i, j, k, l] {
                        seen[q] = true;
                    }
                    if !seen.iter().all(|s| *s) {
                        continue;
                    }
                    quartic += inner(&x[i], &x[j]) * inner(&x[k], &x[l]) * p.mu1
                        + (form(&x[i], &mats.m0, &x[j]) * form(&x[k], &mats.m2, &x[l])
                            - form(&x[i], &mats.m1, &x[j]) * form(&x[k], &m1h, &x[l]))
                            * (1.0 - p.beta);
                }
            }
        }
    }
    let mut quadratic = C64::from(0.0);
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                quadratic += inner(&x[i], &x[j]) * p.mu2 + form(&x[i], &mats.m0, &x[j]) * p.beta;
            }
        }
    }
    (quartic / 24.0 + quadratic / 12.0).re
}

/// `lambda_max` of the explicit `4M^2 x 4M^2` matrix `gamma I + sum_q w_q vec(P_q) vec(P_q)^H`.
pub fn phi_lambda_max_dense(gamma: f64, m1: &CMat) -> f64 {
    let placements = m1_placements(m1);
    let n = placements[0].len();
    let mut phi = CMat::identity(n, n) * C64::from(gamma);
    for (p, w) in placements.iter().zip(PLACEMENT_WEIGHTS) {
        let v = CVec::from_column_slice(p.as_slice());
        phi += (&v * v.adjoint()) * C64::from(w);
    }
    let e = hermitian_eigenvalues(&phi);
    e[e.len() - 1]
}

/// Fisher matrix from central differences of the explicit `M x N` mean.
///
/// Parameters are differenced in natural units `(Re alpha, Im alpha, B tau, T_r f_d)` with
/// step `1e-6 (1 + |theta|)` and mapped back to `(Re alpha, Im alpha, tau, f_d)`.
/// The chirp is evaluated without its gating window, matching the analytic derivative.
pub fn finite_difference_fim(
    c: &CodeVector,
    alpha: C64,
    scenario: &RadarScenario,
    mats: &ModelMatrices,
) -> FullFim {
    let m = c.len();
    let n = scenario.fast_samples;
    let bw = scenario.bandwidth;
    let pri = scenario.pri;
    let theta0 = [alpha.re, alpha.im, 0.0, mats.nu];
    let mean = |th: &[f64; 4]| -> CMat {
        let amp = C64::new(th[0], th[1]);
        let tau = th[2] / bw;
        let nu = th[3];
        CMat::from_fn(m, n, |i, k| {
            let t = k as f64 * scenario.sample_step - tau;
            amp * C64::from_polar(1.0, -2.0 * PI * nu * i as f64)
                * c.entries()[i]
                * chirp_at(scenario, t)
        })
    };
    let derivs: Vec<CMat> = (0..4)
        .map(|k| {
            let h = 1e-6 * (1.0 + theta0[k].abs());
            let mut up = theta0;
            let mut dn = theta0;
            up[k] += h;
            dn[k] -= h;
            (mean(&up) - mean(&dn)) / C64::from(2.0 * h)
        })
        .collect();
    let whitened: Vec<CMat> = derivs.iter().map(|d| &mats.sigma_t_inv * d).collect();
    let unit = [1.0, 1.0, bw, pri];
    let mut fim = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let g: C64 = derivs[i]
                .iter()
                .zip(whitened[j].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            fim[(i, j)] = 2.0 * g.re * unit[i] * unit[j];
        }
    }
    FullFim(fim)
}

/// Largest entry-wise discrepancy normalized by `sqrt(F_ii F_jj)`.
pub fn fim_discrepancy(a: &FullFim, b: &FullFim) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let scale = (b.0[(i, i)] * b.0[(j, j)]).sqrt();
            worst = worst.max((a.0[(i, j)] - b.0[(i, j)]).abs() / scale);
        }
    }
    worst
}

/// Residuals of the block subproblem's KKT system at a returned update.
#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// `||d - 2 lambda1 c + 2 lambda2 c0||`.
    pub stationarity: f64,
    /// `|lambda2 (2 Re{c0^H c} - (2 - zeta))|`.
    pub complementarity: f64,
    /// Violation of the energy and similarity constraints.
    pub primal: f64,
    pub min_multiplier: f64,
}

pub fn kkt_residuals(d: &CVec, c0: &CVec, zeta: f64, u: &BlockUpdate) -> KktResiduals {
    let c = &u.code;
    let slack = 2.0 * inner(c0, c).re - (2.0 - zeta);
    KktResiduals {
        stationarity: (d - c * C64::from(2.0 * u.lambda1) + c0 * C64::from(2.0 * u.lambda2)).norm(),
        complementarity: (u.lambda2 * slack).abs(),
        primal: (c.norm_squared() - 1.0).abs().max((-slack).max(0.0)),
        min_multiplier: u.lambda1.min(u.lambda2),
    }
}

/// Best value of `Re{d^H c}` found by random feasible sampling plus projected ascent.
pub fn sampled_block_optimum<R: Rng>(
    rng: &mut R,
    d: &CVec,
    c0: &CVec,
    zeta: f64,
    samples: usize,
    refinements: usize,
) -> f64 {
    let m = d.len();
    let delta = 1.0 - zeta / 2.0;
    let perp_basis = |v: &CVec| -> CVec { v - c0 * inner(c0, v) };
    let objective = |c: &CVec| inner(d, c).re;
    // Feasible points: c = t c0 e^{j phi} component along c0 plus an orthogonal remainder.
    let draw = |rng: &mut R| -> CVec {
        let w = perp_basis(&random_vector(rng, m));
        let w = &w / C64::from(w.norm());
        let along: f64 = rng.gen_range(delta.max(-1.0)..=1.0);
        let imag_room = (1.0 - along * along).max(0.0).sqrt();
        let im: f64 = rng.gen_range(-imag_room..=imag_room);
        let rest = (1.0 - along * along - im * im).max(0.0).sqrt();
        c0 * C64::new(along, im) + w * C64::from(rest)
    };
    let project = |v: &CVec| -> CVec {
        let mut c = v / C64::from(v.norm());
        let re = inner(c0, &c).re;
        if re < delta {
            let tang = &c - c0 * C64::from(re);
            let nt = tang.norm();
            c = if nt > 0.0 {
                c0 * C64::from(delta) + tang * C64::from((1.0 - delta * delta).max(0.0).sqrt() / nt)
            } else {
                c0.clone()
            };
        }
        c
    };
    let mut best = c0.clone();
    let mut best_val = objective(&best);
    for _ in 0..samples {
        let c = draw(rng);
        let v = objective(&c);
        if v > best_val {
            best_val = v;
            best = c;
        }
    }
    let mut step = 0.1;
    for _ in 0..refinements {
        let cand = project(&(&best + d * C64::from(step)));
        let v = objective(&cand);
        if v > best_val {
            best_val = v;
            best = cand;
        } else {
            step *= 0.5;
        }
    }
    best_val
}

/// One named check of the validation battery.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast battery of cross-checks run by `radcode validate`.
pub fn validation_battery(scenario: &RadarScenario, seed: u64) -> crate::Result<Vec<CheckOutcome>> {
    let mats = model_matrices(scenario, scenario.normalized_doppler)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = scenario.pulses;
    let alpha = C64::from(scenario.amplitude_power.sqrt());
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..3 {
        let c = random_unit_code(&mut rng, m);
        let fd = finite_difference_fim(&c, alpha, scenario, &mats);
        worst = worst.max(fim_discrepancy(&fd, &full_fim(&c, alpha, scenario, &mats)));
    }
    out.push(CheckOutcome {
        name: "fim_finite_difference",
        passed: worst <= 1e-4,
        detail: format!("max normalized discrepancy {worst:.3e} (limit 1e-4)"),
    });

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let c = random_unit_code(&mut rng, m);
        let closed = crb_pair(&c, &mats, scenario)?;
        let schur = crb_from_full_fim(&full_fim(&c, alpha, scenario, &mats))?.crb;
        worst = worst
            .max((schur.crb_tau / closed.crb_tau - 1.0).abs())
            .max((schur.crb_fd / closed.crb_fd - 1.0).abs());
    }
    out.push(CheckOutcome {
        name: "crb_closed_form_vs_fim",
        passed: worst <= 0.02,
        detail: format!("max relative gap {worst:.3e} (limit 2e-2)"),
    });

    let params = convexified_params(0.3, 1.0, &mats);
    let (mut collapse, mut literal, mut affine) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let c = random_vector(&mut rng, m);
        let f = augmented_objective(&c, &params, &mats);
        collapse = collapse
            .max((multilinear_form(&BlockSet::replicate(&c), &params, &mats) - f).abs() / f.abs());
        let blocks = BlockSet(std::array::from_fn(|_| random_vector(&mut rng, m)));
        let v = multilinear_form(&blocks, &params, &mats);
        literal = literal
            .max((v - multilinear_form_literal(&blocks, &params, &mats)).abs() / v.abs().max(1.0));
        let p = rng.gen_range(0..4);
        let r = block_restriction(&blocks, p, &params, &mats)?;
        for _ in 0..5 {
            let x = random_vector(&mut rng, m);
            let mut probe = blocks.clone();
            probe.0[p] = x.clone();
            let exact = multilinear_form(&probe, &params, &mats);
            affine = affine.max((exact - r.evaluate(&x)).abs() / exact.abs().max(1.0));
        }
    }
    out.push(CheckOutcome {
        name: "multilinear_consistency",
        passed: collapse <= 1e-10 && literal <= 1e-10 && affine <= 1e-9,
        detail: format!("collapse {collapse:.2e}, literal {literal:.2e}, restriction {affine:.2e}"),
    });

    let (mut stat, mut comp, mut primal, mut dual) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let c0 = random_unit_code(&mut rng, m).into_inner();
        let d = random_vector(&mut rng, m) * C64::from(rng.gen_range(0.1..10.0));
        let zeta = rng.gen_range(1e-3..=2.0);
        let u = block_update_detailed(&d, &c0, zeta);
        if u.case == UpdateCase::Pinned {
            continue;
        }
        let k = kkt_residuals(&d, &c0, zeta, &u);
        stat = stat.max(k.stationarity);
        comp = comp.max(k.complementarity);
        primal = primal.max(k.primal);
        dual = dual.min(k.min_multiplier);
    }
    out.push(CheckOutcome {
        name: "block_update_kkt",
        passed: stat <= 1e-8 && comp <= 1e-8 && primal <= 1e-12 && dual >= -1e-10,
        detail: format!("stationarity {stat:.2e}, complementarity {comp:.2e}, primal {primal:.2e}"),
    });

    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let (a, b) = (i as f64 * 1.2, j as f64 * 1.2);
            let q = marcum_q1(a, b)?;
            let r = marcum_q1_quadrature(a, b);
            worst = worst.max((q - r).abs() / r);
        }
    }
    out.push(CheckOutcome {
        name: "marcum_q1_quadrature",
        passed: worst <= 1e-10,
        detail: format!("max relative gap {worst:.2e} (limit 1e-10)"),
    });

    let small = CMat::from_fn(4, 4, |_, _| random_vector(&mut rng, 1)[0]);
    let gamma = rng.gen_range(0.5..2.0);
    let lr = phi_lambda_max(gamma, &small);
    let dense = phi_lambda_max_dense(gamma, &small);
    let gap = (lr - dense).abs() / dense;
    out.push(CheckOutcome {
        name: "phi_low_rank_vs_dense",
        passed: gap <= 1e-8,
        detail: format!("relative gap {gap:.2e} (limit 1e-8)"),
    });

    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let h = random_vector(&mut rng, m);
        let y = random_vector(&mut rng, m);
        worst = worst.min(convexity_probe(&h, &y, &params, &mats));
    }
    out.push(CheckOutcome {
        name: "convexity_probe",
        passed: worst >= -1e-6,
        detail: format!("min scaled second difference {worst:.3e} (limit -1e-6)"),
    });
    Ok(out)
}

/// Second central difference of `t -> f~(h + t y)` at zero, step `1e-3`, scaled by
/// `1 + ||h||^4 + ||y||^4`.
pub fn convexity_probe(
    h: &CVec,
    y: &CVec,
    params: &ScalarizationParams,
    mats: &ModelMatrices,
) -> f64 {
    let step = 1e-3;
    let f = |t: f64| augmented_objective(&(h + y * C64::from(t)), params, mats);
    let second = (f(step) - 2.0 * f(0.0) + f(-step)) / (step * step);
    second / (1.0 + h.norm().powi(4) + y.norm().powi(4))
}
