use std::path::PathBuf;
use std::process::Command;

const SMALL: &str = r#"
[geometry]
omega = [1.0, 1.0]
L = 1.0
eps = 0.5
inclusions = [[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]]

[loads]
f = [0.0, 0.0, -1.0]

[contact]
mode = "holes"

[mesh]
n_cell = 4
n_block = 2

[experiment]
eps_sequence = [0.5, 0.25]
korn_eps = [0.5, 0.25]
"#;

/// Validates `text` against one definition of the documented report schema.
fn assert_schema(kind: &str, text: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let mut schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    schema["$ref"] = serde_json::Value::String(format!("#/$defs/{kind}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: serde_json::Value = serde_json::from_str(text).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{kind}: {errors:#?}");
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("layerhom-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn layerhom(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_layerhom")).args(args).env("LAYERHOM_THREADS", "2").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cell_writes_h_as_json_and_csv() {
    let dir = scratch("cell");
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.join("cell.json");
    let (code, stdout) = layerhom(&["cell", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0, "{stdout}");
    assert_schema("cell", &stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["H"][2][2].as_f64().unwrap() < 3.0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().trim(), stdout.trim());
    assert_eq!(std::fs::read_to_string(dir.join("cell.csv")).unwrap().lines().count(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn solve_eps_report_has_documented_fields() {
    let dir = scratch("eps");
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let vtk = dir.join("u.vtk");
    let mesh = dir.join("mesh.vtk");
    let (code, stdout) =
        layerhom(&["solve-eps", "--config", cfg.to_str().unwrap(), "--json", "--vtk", vtk.to_str().unwrap(), "--dump-mesh", mesh.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_schema("solve_eps", &stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    for key in ["eps", "dofs", "iterations", "m_eps", "residuals", "bound_ratio", "energy_breakdown"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for key in ["vi", "feas", "comp_n", "comp_t"] {
        assert!(v["residuals"].get(key).is_some(), "{key}");
    }
    assert!(std::fs::read_to_string(&vtk).unwrap().contains("VECTORS displacement double"));
    assert!(std::fs::read_to_string(&mesh).unwrap().starts_with("# vtk DataFile"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn converge_exit_code_follows_checks() {
    let dir = scratch("conv");
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let json = dir.join("r.json");
    let csv = dir.join("r.csv");
    let (code, stdout) = layerhom(&["converge", "--config", cfg.to_str().unwrap(), "--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("[pass] gap_decreasing"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
    assert_schema("converge", &std::fs::read_to_string(&json).unwrap());
    // an unreachable glued tolerance makes a check fail
    std::fs::write(&cfg, SMALL.replace("[experiment]", "[experiment]\ncompare_glued = true\nglued_tol = -1.0")).unwrap();
    let (code, _) = layerhom(&["converge", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_config_exits_with_error() {
    let dir = scratch("bad");
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, SMALL.replace("[0.5, 0.25]\nkorn", "[0.25, 0.5]\nkorn")).unwrap();
    let (code, _) = layerhom(&["converge", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    let (code, _) = layerhom(&["cell", "--config", dir.join("missing.toml").to_str().unwrap()]);
    assert_eq!(code, 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn korn_and_unfold_check_pass() {
    let dir = scratch("korn");
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let (code, stdout) = layerhom(&["korn", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0, "{stdout}");
    assert_schema("korn", &stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["estimates"].as_array().unwrap().len(), 2);
    let (code, _) = layerhom(&["korn", "--config", cfg.to_str().unwrap(), "--unclamped"]);
    assert_eq!(code, 0);
    let (code, stdout) = layerhom(&["unfold-check", "--config", cfg.to_str().unwrap(), "--samples", "2"]);
    assert_eq!(code, 0, "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_schema("unfold_check", &stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn limit_reports_match_schema() {
    let dir = scratch("limit");
    let cfg = dir.join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let (code, stdout) = layerhom(&["solve-limit", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0, "{stdout}");
    assert_schema("solve_limit", &stdout);
    // an open crack switches the limit to the unfolded contact problem
    let cracked = SMALL
        .replace(
            "inclusions = [[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]]",
            "open_cracks = [{ axis = 2, level = 0.5, lo = [0.25, 0.25], hi = [0.75, 0.75] }]",
        )
        .replace("\"holes\"", "\"contact\"");
    std::fs::write(&cfg, cracked).unwrap();
    let (code, stdout) = layerhom(&["solve-limit", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0, "{stdout}");
    assert_schema("solve_limit", &stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["method"], "unfolded");
    // empty sequence and an aborted run still give schema-valid reports
    std::fs::write(&cfg, SMALL.replace("eps_sequence = [0.5, 0.25]", "eps_sequence = []")).unwrap();
    let (code, stdout) = layerhom(&["converge", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0, "{stdout}");
    assert_schema("converge", &stdout);
    std::fs::write(&cfg, format!("{SMALL}\n[solver]\nmax_iter = 0\n").replace("\"holes\"", "\"contact\"")).unwrap();
    let (code, stdout) = layerhom(&["converge", "--config", cfg.to_str().unwrap(), "--json"]);
    assert_eq!(code, 1, "{stdout}");
    assert_schema("converge", &stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}
