use radcode::analysis::{pareto_sweep, ParetoPoint};
use radcode::model::{generalized_barker_32, model_matrices, p3_code, RadarScenario};
use radcode::solver::SolverOptions;

const BETAS: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0];

fn sweep(zeta: f64) -> Vec<ParetoPoint> {
    let sc = RadarScenario::default();
    pareto_sweep(&BETAS, zeta, &sc, &p3_code(32), &SolverOptions::default())
        .unwrap()
        .into_iter()
        .map(|o| o.point.unwrap())
        .collect()
}

#[test]
fn sinr_rises_with_its_weight() {
    for zeta in [0.1, 0.4, 1.0] {
        let pts = sweep(zeta);
        for w in pts.windows(2) {
            assert!(
                w[1].sinr_db >= w[0].sinr_db - 1e-6 * w[0].sinr_db.abs(),
                "zeta {zeta}: {} then {}",
                w[0].sinr_db,
                w[1].sinr_db
            );
        }
        let (first, last) = (&pts[0], &pts[pts.len() - 1]);
        assert!(first.inv_det_crb >= last.inv_det_crb, "zeta {zeta}");
    }
}

#[test]
fn reference_codes_are_weakly_dominated() {
    let sc = RadarScenario::default();
    let mats = model_matrices(&sc, sc.normalized_doppler).unwrap();
    let designed = sweep(0.4);
    for (label, code) in [
        ("p3", p3_code(32)),
        ("generalized_barker", generalized_barker_32()),
    ] {
        let r = ParetoPoint::from_code(label, &code, &mats, &sc).unwrap();
        assert!(
            designed
                .iter()
                .any(|d| d.sinr_db >= r.sinr_db && d.inv_det_crb >= r.inv_det_crb),
            "{label} not dominated"
        );
    }
}

#[test]
fn looser_similarity_helps_at_both_extremes() {
    let (tight, loose) = (sweep(0.1), sweep(1.0));
    let last = BETAS.len() - 1;
    assert!(loose[0].inv_det_crb >= tight[0].inv_det_crb * (1.0 - 1e-9));
    assert!(loose[last].sinr_db >= tight[last].sinr_db - 1e-9);
}
