//! Exercises the C interface from Rust and, when a C compiler is
//! around, through an actual C program against the generated header
//! and static library.

use evolin_ffi::{
    evolin_last_error_message, evolin_scenario_free, evolin_scenario_kind, evolin_scenario_load,
    evolin_scenario_name, evolin_solution_data, evolin_solution_dim, evolin_solution_free,
    evolin_solution_len, evolin_solution_report_json, evolin_solution_times, evolin_solve,
    evolin_version, EvolinKind, EvolinRoute, EvolinScenario, EvolinStatus,
};
use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

const ODE: &str = r#"{
    "kind": "generic",
    "name": "ffi ode",
    "time": {"t0": 0.0, "n": 101, "h": 0.01},
    "rho": 1.0,
    "law": {"m": {"kind": "const", "value": 1.0}},
    "relation": {"kind": "linear", "slope": 1.0},
    "source": {"kind": "step", "height": 1.0, "onset": 0.0}
}"#;

fn load(text: &str) -> (EvolinStatus, *mut EvolinScenario) {
    let json = CString::new(text).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { evolin_scenario_load(json.as_ptr(), &mut handle) };
    (status, handle)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(evolin_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn solves_a_scenario_end_to_end() {
    let (status, scenario) = load(ODE);
    assert_eq!(status, EvolinStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { evolin_scenario_kind(scenario) }, EvolinKind::Generic);
    let name = unsafe { CStr::from_ptr(evolin_scenario_name(scenario)) };
    assert_eq!(name.to_str().unwrap(), "ffi ode");

    let mut solution = ptr::null_mut();
    let status =
        unsafe { evolin_solve(scenario, EvolinRoute::Stepper, 1e-8, 0, &mut solution) };
    assert_eq!(status, EvolinStatus::Ok, "{}", last_error());

    let len = unsafe { evolin_solution_len(solution) };
    let dim = unsafe { evolin_solution_dim(solution) };
    assert_eq!((len, dim), (101, 1));

    let times = unsafe { std::slice::from_raw_parts(evolin_solution_times(solution), len) };
    let data = unsafe { std::slice::from_raw_parts(evolin_solution_data(solution), len * dim) };
    assert_eq!(times[0], 0.0);
    assert!((times[len - 1] - 1.0).abs() < 1e-12);
    // The step response of u' + u = 1 approaches 1 - e^{-t}.
    let expected = 1.0 - (-1.0f64).exp();
    assert!(
        (data[len - 1] - expected).abs() < 5e-3,
        "endpoint {} vs {expected}",
        data[len - 1]
    );

    let report = unsafe { CStr::from_ptr(evolin_solution_report_json(solution)) };
    let report: serde_json::Value = serde_json::from_str(report.to_str().unwrap()).unwrap();
    assert_eq!(report["kind"], "generic");
    assert!(report["c_est"].as_f64().unwrap() > 0.0);

    unsafe {
        evolin_solution_free(solution);
        evolin_scenario_free(scenario);
    }
}

#[test]
fn both_routes_agree_through_the_interface() {
    let (status, scenario) = load(ODE);
    assert_eq!(status, EvolinStatus::Ok, "{}", last_error());
    let mut endpoints = Vec::new();
    for route in [EvolinRoute::Schedule, EvolinRoute::Stepper] {
        let mut solution = ptr::null_mut();
        let status = unsafe { evolin_solve(scenario, route, 1e-10, 0, &mut solution) };
        assert_eq!(status, EvolinStatus::Ok, "{}", last_error());
        let len = unsafe { evolin_solution_len(solution) };
        let data = unsafe { std::slice::from_raw_parts(evolin_solution_data(solution), len) };
        endpoints.push(data[len - 1]);
        unsafe { evolin_solution_free(solution) };
    }
    assert!(
        (endpoints[0] - endpoints[1]).abs() < 1e-8,
        "schedule endpoint {} vs stepper endpoint {}",
        endpoints[0],
        endpoints[1]
    );
    unsafe { evolin_scenario_free(scenario) };
}

#[test]
fn statuses_classify_failures() {
    let (status, handle) = load("not json at all");
    assert_eq!(status, EvolinStatus::Schema);
    assert!(handle.is_null());
    assert!(!last_error().is_empty());

    let negative = ODE.replace(
        r#""m": {"kind": "const", "value": 1.0}"#,
        r#""m": {"kind": "const", "value": 1.0}, "n": {"kind": "const", "value": -3.0}"#,
    );
    let negative = negative.replace(r#""slope": 1.0"#, r#""slope": 0.1"#);
    let (status, scenario) = load(&negative);
    assert_eq!(status, EvolinStatus::Ok, "{}", last_error());
    let mut solution = ptr::null_mut();
    let status = unsafe { evolin_solve(scenario, EvolinRoute::Stepper, 1e-8, 0, &mut solution) };
    assert_eq!(status, EvolinStatus::Hypothesis, "{}", last_error());
    assert!(solution.is_null());
    assert!(last_error().contains("positivity"));
    unsafe { evolin_scenario_free(scenario) };
}

#[test]
fn null_arguments_are_rejected_not_crashed() {
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { evolin_scenario_load(ptr::null(), &mut handle) },
        EvolinStatus::Error
    );
    assert!(handle.is_null());

    let mut solution = ptr::null_mut();
    assert_eq!(
        unsafe { evolin_solve(ptr::null(), EvolinRoute::Stepper, 1e-8, 0, &mut solution) },
        EvolinStatus::Error
    );
    assert!(solution.is_null());

    assert_eq!(unsafe { evolin_solution_len(ptr::null()) }, 0);
    assert!(unsafe { evolin_solution_times(ptr::null()) }.is_null());
    assert!(unsafe { evolin_scenario_name(ptr::null()) }.is_null());
    unsafe {
        evolin_scenario_free(ptr::null_mut());
        evolin_solution_free(ptr::null_mut());
    }

    let version = unsafe { CStr::from_ptr(evolin_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("evolin.h").exists(), "build script writes the header");

    let cc = match Command::new("cc").arg("--version").output() {
        Ok(out) if out.status.success() => "cc",
        _ => {
            eprintln!("no C compiler on PATH; skipping the link check");
            return;
        }
    };

    let staticlib = manifest
        .parent()
        .and_then(Path::parent)
        .map(|ws| ws.join("target/debug/libevolin_ffi.a"))
        .filter(|p| p.exists());
    let Some(staticlib) = staticlib else {
        eprintln!("static library not in the default target dir; skipping the link check");
        return;
    };

    let dir = tempfile::tempdir().unwrap();
    let program = dir.path().join("smoke.c");
    std::fs::write(
        &program,
        r#"
#include "evolin.h"
#include <string.h>
#include <stdio.h>

int main(void) {
    const char *doc =
        "{\"kind\":\"generic\",\"time\":{\"t0\":0.0,\"n\":51,\"h\":0.02},"
        "\"rho\":1.0,\"law\":{\"m\":{\"kind\":\"const\",\"value\":1.0}},"
        "\"relation\":{\"kind\":\"linear\",\"slope\":1.0},"
        "\"source\":{\"kind\":\"step\",\"height\":1.0,\"onset\":0.0}}";
    EvolinScenario *scenario = NULL;
    if (evolin_scenario_load(doc, &scenario) != EVOLIN_STATUS_OK) {
        fprintf(stderr, "load: %s\n", evolin_last_error_message());
        return 1;
    }
    if (evolin_scenario_kind(scenario) != EVOLIN_KIND_GENERIC) return 2;
    EvolinSolution *solution = NULL;
    if (evolin_solve(scenario, EVOLIN_ROUTE_STEPPER, 1e-8, 0, &solution) != EVOLIN_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", evolin_last_error_message());
        return 3;
    }
    if (evolin_solution_len(solution) != 51) return 4;
    if (evolin_solution_dim(solution) != 1) return 5;
    const double *data = evolin_solution_data(solution);
    if (!(data[50] > 0.5 && data[50] < 0.7)) return 6;
    if (strlen(evolin_solution_report_json(solution)) == 0) return 7;
    evolin_solution_free(solution);
    evolin_scenario_free(scenario);
    return 0;
}
"#,
    )
    .unwrap();

    let binary = dir.path().join("smoke");
    let compile = Command::new(cc)
        .arg(&program)
        .arg(&staticlib)
        .arg("-I")
        .arg(&header_dir)
        .args(["-std=c99", "-Wall", "-Werror", "-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&binary)
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "C compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary).output().unwrap();
    assert!(
        run.status.success(),
        "C smoke test exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
}
