#![allow(dead_code)]

use std::path::PathBuf;

use acp_opf::acp::AcpConfig;
use acp_opf::case::{parse_case, NetworkCase};
use acp_opf::pipeline::RunSpec;
use acp_opf::relaxation::ObjectiveKind;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(format!("{name}.m"))
}

pub fn load(name: &str) -> NetworkCase {
    let text = std::fs::read_to_string(data_path(name)).expect("bundled case");
    parse_case(&text).expect("bundled case parses").0
}

/// Congested 9-bus cost run: 120 MVA limits, 10 degrees, pinned reference.
pub fn congested_nine_bus() -> RunSpec {
    RunSpec {
        case: data_path("case9"),
        objective: ObjectiveKind::Cost,
        theta_max_deg: 10.0,
        smax_mva: Some(120.0),
        pin_ref_voltage: Some(1.0),
        voltage_bounds: Some((0.9, 1.1)),
        drop_line_charging: true,
        ..Default::default()
    }
}

/// 9-bus cost run with the 1-4 reactance raised tenfold.
pub fn large_angle_nine_bus() -> (RunSpec, NetworkCase) {
    let spec = RunSpec {
        case: data_path("case9"),
        objective: ObjectiveKind::Cost,
        theta_max_deg: 40.0,
        pin_ref_voltage: Some(1.0),
        voltage_bounds: Some((0.9, 1.1)),
        drop_line_charging: true,
        ..Default::default()
    };
    let mut case = load("case9");
    case.branches[0].set_impedance(0.0, 0.576);
    let case = spec.prepare(&case).unwrap();
    (spec, case)
}

/// Loss-minimization run on a bundled case with the benchmark settings.
pub fn loss_run(name: &str, reference: f64) -> RunSpec {
    RunSpec {
        case: data_path(name),
        objective: ObjectiveKind::Loss,
        theta_max_deg: 10.0,
        pin_ref_voltage: Some(1.0),
        drop_line_charging: true,
        drop_branch_ratings: true,
        reference_objective: Some(reference),
        acp: AcpConfig {
            tau0: 1.0,
            ..AcpConfig::default()
        },
        ..Default::default()
    }
}
