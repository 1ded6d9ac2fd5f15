//! Configuration ingestion through real files: parse errors, strictness,
//! preset expansion, and lossless round-trips.

use std::io::Write;

use kpde_cli::config::{load_config, parse_config, preset_config, PRESET_NAMES};

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

#[test]
fn minimal_preset_file_loads_fully_defaulted() {
    let f = write_temp(r#"{"preset": "example-sec4"}"#);
    let c = load_config(f.path()).unwrap();
    assert_eq!(c, preset_config("example-sec4").unwrap());
}

#[test]
fn parse_error_reports_line_and_column() {
    let f = write_temp("{\n  \"preset\": \"example-sec4\",\n  oops\n}");
    let err = load_config(f.path()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let f = write_temp(r#"{"preset": "example-sec4", "potental": 1}"#);
    let err = load_config(f.path()).unwrap_err();
    assert!(err.to_string().contains("potental"));
    assert_eq!(err.exit_code(), 2);

    // nested unknown keys too
    let err = parse_config(
        r#"{"preset": "example-sec4",
            "truncation": {"max_order": 1, "max_dim": 2, "extra": 3}}"#,
    )
    .unwrap_err();
    assert!(err.to_string().contains("extra"));
}

#[test]
fn file_roundtrip_is_identical() {
    for name in PRESET_NAMES {
        let c = preset_config(name).unwrap();
        let json = serde_json::to_string_pretty(&c).unwrap();
        let f = write_temp(&json);
        let back = load_config(f.path()).unwrap();
        assert_eq!(c, back, "{name} did not round-trip");
    }
}

#[test]
fn semantic_validation_runs_on_load() {
    let mut c = preset_config("example-sec4").unwrap();
    c.discretization.dt = 0.3; // does not divide 0.5
    let f = write_temp(&serde_json::to_string(&c).unwrap());
    let err = load_config(f.path()).unwrap_err();
    assert!(err.to_string().contains("dt"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn missing_file_is_a_config_error() {
    let err = load_config(std::path::Path::new("/nonexistent/config.json")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
