use std::f64::consts::PI;
use std::process::{Command, Output};

fn qecw(args: &[&str]) -> Output {
    qecw_env(args, &[])
}

fn qecw_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qecw"));
    cmd.args(args).env_remove("QECW_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn wigner_of_first_fock_state_is_negative_at_origin() {
    let (header, rows) = csv(&stdout(&qecw(&["wigner", "--state", "fock:1", "--grid", "3"])));
    assert_eq!(header, ["x", "p", "w"]);
    assert_eq!(rows.len(), 9);
    let origin = rows.iter().find(|r| r[0] == 0.0 && r[1] == 0.0).unwrap();
    assert!((origin[2] + 1.0 / PI).abs() < 1e-12, "{}", origin[2]);
    // x is the outer loop
    assert!(rows[0][0] == rows[2][0] && rows[0][1] < rows[1][1]);
}

#[test]
fn wigner_state_specs() {
    for spec in ["vacuum", "coherent:0.5,-0.3", "cat:1.2", "cat:1.2,odd"] {
        let (_, rows) = csv(&stdout(&qecw(&["wigner", "--state", spec, "--grid", "5", "--extent", "2"])));
        assert_eq!(rows.len(), 25, "{spec}");
    }
    let (_, rows) = csv(&stdout(&qecw(&["wigner", "--state", "vacuum", "--grid", "3"])));
    assert!((rows[4][2] - 1.0 / PI).abs() < 1e-12);

    let path = std::env::temp_dir().join(format!("qecw-state-{}.json", std::process::id()));
    std::fs::write(&path, r#"{"dim": 3, "re": [0.0, 1.0, 0.0]}"#).unwrap();
    let spec = format!("file:{}", path.display());
    let (_, rows) = csv(&stdout(&qecw(&["wigner", "--state", &spec, "--grid", "3"])));
    assert!((rows[4][2] + 1.0 / PI).abs() < 1e-12);
    std::fs::remove_file(path).ok();
}

#[test]
fn toric_runs_are_byte_identical() {
    let args = ["toric", "--L", "4", "--p", "0.05", "--trials", "1000", "--seed", "7"];
    let a = qecw(&args);
    let b = qecw(&args);
    assert_eq!(stdout(&a), stdout(&b));
    let single = qecw_env(&args, &[("RAYON_NUM_THREADS", "1")]);
    let many = qecw_env(&args, &[("RAYON_NUM_THREADS", "5")]);
    assert_eq!(stdout(&a), stdout(&single));
    assert_eq!(stdout(&a), stdout(&many));
    let v = json(&stdout(&a));
    assert_eq!(v["provenance"]["seed"], 7);
    assert_eq!(v["provenance"]["parameters"]["L"], 4);
    assert_eq!(v["structure"]["degeneracy"], 4);
}

#[test]
fn seed_falls_back_to_environment_then_zero() {
    let base = ["toric", "--trials", "300"];
    let env = stdout(&qecw_env(&base, &[("QECW_SEED", "7")]));
    let flag = stdout(&qecw(&["toric", "--trials", "300", "--seed", "7"]));
    assert_eq!(env, flag);
    assert_eq!(json(&stdout(&qecw(&base)))["provenance"]["seed"], 0);
    let bad = qecw_env(&base, &[("QECW_SEED", "seven")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn kl_check_repetition_bitflip_is_exact() {
    let v = json(&stdout(&qecw(&["kl-check", "--code", "repetition3", "--channel", "bitflip", "--param", "0.01"])));
    assert_eq!(v["verdict"]["kind"], "exact");
    let re = &v["alpha_down"]["re"];
    let expected = [0.97, 0.01, 0.01, 0.01];
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { expected[i] } else { 0.0 };
            assert!((re[i][j].as_f64().unwrap() - want).abs() < 1e-12);
        }
    }
    let v = json(&stdout(&qecw(&["kl-check", "--code", "repetition3", "--channel", "amplitude-damping", "--param", "0.02"])));
    assert_eq!(v["verdict"]["kind"], "fail");
    let v = json(&stdout(&qecw(&["kl-check", "--code", "kitten", "--channel", "photon-loss", "--param", "0.02"])));
    assert_eq!(v["verdict"]["kind"], "approximate");
    let mismatched = qecw(&["kl-check", "--code", "kitten", "--channel", "bitflip", "--param", "0.02"]);
    assert_eq!(mismatched.status.code(), Some(2));
}

#[test]
fn repetition_curves() {
    let one = csv(&stdout(&qecw(&["repetition", "--m", "1", "--points", "101"]))).1;
    let ten = csv(&stdout(&qecw(&["repetition", "--m", "10", "--points", "101"]))).1;
    assert_eq!(one[0], vec![0.0, 0.0]);
    assert!((one[50][0] - 0.5).abs() < 1e-15 && (one[50][1] - 0.5).abs() < 1e-15);
    let slope = |rows: &Vec<Vec<f64>>| (rows[51][1] - rows[49][1]) / (rows[51][0] - rows[49][0]);
    assert!(slope(&ten) > slope(&one));
}

#[test]
fn ftmem_curves() {
    let (header, rows) = csv(&stdout(&qecw(&["ftmem", "--rm", "0.925", "--kt-max", "1", "--points", "11"])));
    assert_eq!(header, ["kappa_t0", "eps", "r_tmr", "r_single"]);
    let r = 0.925f64;
    assert!((rows[0][2] - (r.powi(3) + 3.0 * r * r * (1.0 - r))).abs() < 1e-15);

    // with perfect voters 1 - R grows like (kappa t0)^2
    let rows = csv(&stdout(&qecw(&["ftmem", "--rm", "1.0", "--kt-max", "0.002", "--points", "5"]))).1;
    let (a, b) = (&rows[2], &rows[4]);
    let k = ((1.0 - b[2]) / (1.0 - a[2])).ln() / (b[0] / a[0]).ln();
    assert!((k - 2.0).abs() < 0.1, "{k}");
}

#[test]
fn ftmem_opt_minimum() {
    let rows = csv(&stdout(&qecw(&["ftmem-opt", "--eps-m", "0.01"]))).1;
    let best = rows.iter().min_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert_eq!(best[0], 0.01);
    assert!((best[1] - 0.12).abs() < 1e-12);
    let v = json(&stdout(&qecw(&["ftmem-opt", "--eps-m", "0.01", "--format", "json"])));
    assert!((v["optimum"]["kappa_eff_ratio"].as_f64().unwrap() - 0.12).abs() < 1e-12);
}

#[test]
fn kitten_and_gkp_reports() {
    let v = json(&stdout(&qecw(&["kitten", "--kappa-t", "0.02", "--cycles", "3"])));
    let rounds = v["rounds"].as_array().unwrap();
    assert_eq!(rounds.len(), 3);
    let first = &rounds[0];
    assert!(first["corrected_fidelity"].as_f64().unwrap() > first["fock01_fidelity"].as_f64().unwrap());
    assert!((v["photon_loss_ratio"].as_f64().unwrap() - 4.0).abs() < 1e-9);

    let v = json(&stdout(&qecw(&["gkp"])));
    for w in v["codewords"].as_array().unwrap() {
        assert!(w["s_x"][0].as_f64().unwrap() > 0.9 && w["s_p"][0].as_f64().unwrap() > 0.9);
    }
    assert!(v["round_trip"]["fidelity_after"].as_f64().unwrap() > 0.98);
}

#[test]
fn exit_codes_and_diagnostics() {
    let bad_flag = qecw(&["toric", "--p", "1.5"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&bad_flag.stderr).lines().count(), 1);
    assert_eq!(qecw(&["toric", "--nonsense"]).status.code(), Some(2));
    assert_eq!(qecw(&["wigner", "--state", "squeezed:1"]).status.code(), Some(2));

    let leak = qecw(&["wigner", "--state", "fock:39", "--dim", "40", "--grid", "3"]);
    assert_eq!(leak.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&leak.stderr).to_string();
    assert_eq!(msg.lines().count(), 1, "{msg}");
    assert!(leak.stdout.is_empty());

    let gkp_leak = qecw(&["gkp", "--lambda", "0.0", "--dim", "60", "--work-dim", "60"]);
    assert_eq!(gkp_leak.status.code(), Some(3));
}

#[test]
fn output_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("qecw-out-{}.csv", std::process::id()));
    let p = path.to_string_lossy().to_string();
    let out = qecw(&["repetition", "--points", "3", "--output", &p]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("eps,eps_logical\n"));
    std::fs::remove_file(path).ok();
}
