use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use radcode_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        rc_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn synthesize_round_trip() {
    unsafe {
        let params = rc_scenario_params_default();
        assert_eq!(params.pulses, 32);
        let mut scenario = ptr::null_mut();
        assert_eq!(rc_scenario_new(&params, &mut scenario), RcStatus::Ok);
        let mut reference = ptr::null_mut();
        assert_eq!(rc_code_p3(32, &mut reference), RcStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(
            rc_synthesize(scenario, reference, 0.01, 0.4, &mut result),
            RcStatus::Ok
        );

        let mut m = RcMetrics::default();
        assert_eq!(rc_result_metrics(result, &mut m), RcStatus::Ok);
        assert!((m.papr - 2.71).abs() <= 0.05, "papr {}", m.papr);
        assert!((m.isl_db - 3.34).abs() <= 0.1, "isl {}", m.isl_db);
        assert!(m.det_crb > 0.0 && m.pd > 0.0 && m.pd < 1.0);
        assert!((m.det_crb - m.crb_tau * m.crb_fd).abs() <= 1e-12 * m.det_crb);

        let mut code = ptr::null_mut();
        assert_eq!(rc_result_code(result, &mut code), RcStatus::Ok);
        assert_eq!(rc_code_len(code), 32);
        let (mut re, mut im) = (vec![0.0; 32], vec![0.0; 32]);
        assert_eq!(
            rc_code_copy(code, re.as_mut_ptr(), im.as_mut_ptr(), 32),
            RcStatus::Ok
        );
        let energy: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum();
        assert!((energy - 1.0).abs() < 1e-10);

        rc_code_free(code);
        rc_result_free(result);
        rc_code_free(reference);
        rc_scenario_free(scenario);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut params = rc_scenario_params_default();
        params.rho = 1.0;
        let mut scenario = ptr::null_mut();
        let s = rc_scenario_new(&params, &mut scenario);
        assert!(
            matches!(s, RcStatus::InvalidArgument | RcStatus::IllConditioned),
            "{s:?}"
        );
        assert!(scenario.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            rc_scenario_new(ptr::null(), &mut scenario),
            RcStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let mut code = ptr::null_mut();
        let zeros = [0.0; 4];
        assert_eq!(
            rc_code_from_parts(zeros.as_ptr(), zeros.as_ptr(), 4, &mut code),
            RcStatus::InvalidArgument
        );

        let mut q = 0.0;
        assert_eq!(rc_marcum_q1(-1.0, 1.0, &mut q), RcStatus::InvalidArgument);
        assert_eq!(rc_marcum_q1(1.0, 2.0, &mut q), RcStatus::Ok);
        assert!((q - 0.269_012_060_035_91).abs() < 1e-12);
        assert_eq!(last_error(), "");
    }
}

#[test]
fn mismatched_reference_length_is_rejected() {
    unsafe {
        let params = rc_scenario_params_default();
        let mut scenario = ptr::null_mut();
        assert_eq!(rc_scenario_new(&params, &mut scenario), RcStatus::Ok);
        let mut reference = ptr::null_mut();
        assert_eq!(rc_code_p3(8, &mut reference), RcStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(
            rc_synthesize(scenario, reference, 0.01, 0.4, &mut result),
            RcStatus::InvalidArgument
        );
        assert!(result.is_null());
        rc_code_free(reference);
        rc_scenario_free(scenario);
    }
}

#[test]
fn error_message_truncates_and_reports_size() {
    unsafe {
        let mut q = 0.0;
        rc_marcum_q1(f64::NAN, 1.0, &mut q);
        let needed = rc_last_error_message(ptr::null_mut(), 0);
        assert!(needed > 1);
        let mut small = [0x7f as std::ffi::c_char; 4];
        assert_eq!(
            rc_last_error_message(small.as_mut_ptr(), small.len()),
            needed
        );
        assert_eq!(small[3], 0);
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("radcode.h")
}

#[test]
fn header_declares_every_entry_point() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "RC_STATUS_OK",
        "RC_STATUS_INTERNAL",
        "typedef struct RcScenario RcScenario",
        "RcScenarioParams rc_scenario_params_default(void)",
        "rc_scenario_new",
        "rc_scenario_free",
        "rc_code_p3",
        "rc_code_generalized_barker",
        "rc_code_from_parts",
        "rc_code_copy",
        "rc_synthesize",
        "rc_result_metrics",
        "rc_result_code",
        "rc_result_free",
        "rc_marcum_q1",
        "rc_last_error_message",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let probe = "#include \"radcode.h\"\nint main(void) {\n  RcScenarioParams p = rc_scenario_params_default();\n  \
                 RcScenario *s = 0;\n  RcStatus st = rc_scenario_new(&p, &s);\n  rc_scenario_free(s);\n  return (int)st;\n}\n";
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(&src, probe).unwrap();
    let inc = header().parent().unwrap().to_path_buf();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&inc)
        .arg(&src)
        .output()
        .expect("a C compiler on PATH");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_api");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
