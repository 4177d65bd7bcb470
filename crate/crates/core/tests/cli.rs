use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hfield::cli::check_csv_hash;
use hfield::config::RunConfig;
use hfield::sampler::FieldSample;

fn hfield(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfield"))
        .args(args)
        .current_dir(dir)
        .env_remove("HF_THREADS")
        .output()
        .expect("run hfield")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn sample_is_deterministic_and_writes_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "c.toml", "[grid]\nside = 24\n[sample]\nkind = \"gff_env\"\n");
    for out in ["a", "b"] {
        let o = hfield(&["sample", "--config", &cfg, "--out", out, "--heatmap", "--seed", "5"], dir);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["field.hffld", "environment.hfenv", "field.ppm", "field.json", "field.ppm.json"] {
        assert_eq!(fs::read(dir.join("a").join(f)).unwrap(), fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    let s = FieldSample::read_from(fs::File::open(dir.join("a/field.hffld")).unwrap()).unwrap();
    assert_eq!(s.field.len(), 576);
    let side: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("a/field.ppm.json")).unwrap()).unwrap();
    assert!(side["min"].as_f64().unwrap() < 0.0 && side["max"].as_f64().unwrap() > 0.0);
    assert!(side["noise_seed"].is_u64());

    let ppm = fs::read(dir.join("a/field.ppm")).unwrap();
    let hash = RunConfig::load(&dir.join("a/config.toml")).unwrap().hash().unwrap();
    assert!(ppm.starts_with(format!("P6\n# config_hash {hash}\n24 24\n255\n").as_bytes()));

    let log = fs::read_to_string(dir.join("a/run.jsonl")).unwrap();
    let events: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.first().unwrap()["event"], "start");
    assert_eq!(events.last().unwrap()["event"], "end");
    assert!(events.iter().all(|e| e["config_hash"] == hash.as_str()));
    assert!(events.iter().any(|e| e["event"] == "solve"));
}

#[test]
fn grayscale_heatmap_matches_linear_map() {
    // every pixel of a 2x2 field follows the linear min-max map
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "c.toml", "[grid]\nside = 2\n[sample]\nkind = \"bilap_hom\"\npalette = \"grayscale\"\n");
    let o = hfield(&["sample", "--config", &cfg, "--out", "o", "--heatmap"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ppm = fs::read(dir.join("o/field.ppm")).unwrap();
    let body = &ppm[ppm.len() - 12..];
    let s = FieldSample::read_from(fs::File::open(dir.join("o/field.hffld")).unwrap()).unwrap();
    let v = s.field.values();
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    for (i, x) in v.iter().enumerate() {
        let want = (255.0 * (x - lo) / (hi - lo)).round() as u8;
        assert_eq!(body[3 * i], want);
    }
}

#[test]
fn mixing_configs_in_one_directory_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let o = hfield(&["sample", "--out", "o", "--seed", "1"], dir);
    assert_eq!(o.status.code(), Some(0));
    let o = hfield(&["sample", "--out", "o", "--seed", "1"], dir);
    assert_eq!(o.status.code(), Some(0), "same config may reuse the directory");
    let o = hfield(&["sample", "--out", "o", "--seed", "2"], dir);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("holds outputs of config"));
}

#[test]
fn ahom_of_constant_law_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "c.toml",
        "[grid]\nside = 16\n[environment]\nlaw = \"constant(1.5)\"\n[ahom]\nreplicates = 4\n",
    );
    let o = hfield(&["ahom", "--config", &cfg, "--out", "o"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let mut r = csv::Reader::from_path(dir.join("o/ahom.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    let get = |name: &str| row.get(h.iter().position(|c| c == name).unwrap()).unwrap().to_string();
    assert_eq!(get("ahom_mean").parse::<f64>().unwrap(), 1.5);
    assert_eq!(get("ahom_stderr").parse::<f64>().unwrap(), 0.0);
    let hash = RunConfig::load(&dir.join("o/config.toml")).unwrap().hash().unwrap();
    check_csv_hash(&dir.join("o/ahom.csv"), &hash).unwrap();
    assert!(check_csv_hash(&dir.join("o/ahom.csv"), "other").is_err());

    let log = fs::read_to_string(dir.join("o/run.jsonl")).unwrap();
    assert_eq!(log.lines().filter(|l| l.contains("\"event\":\"replicate\"")).count(), 4);
}

#[test]
fn synthetic_rates_recover_the_injected_slope_and_rerun_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "c.toml", "[experiment]\nname = \"synthetic\"\nsynthetic_exponent = -2.0\n");
    let o = hfield(&["rates", "--config", &cfg, "--out", "a"], dir);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS synthetic_slope: slope -2.0000"));
    let echoed = dir.join("a/config.toml");
    let o = hfield(&["rates", "--config", echoed.to_str().unwrap(), "--out", "b"], dir);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(dir.join("a/rates.csv")).unwrap(), fs::read(dir.join("b/rates.csv")).unwrap());
    assert_eq!(fs::read(dir.join("a/config.toml")).unwrap(), fs::read(dir.join("b/config.toml")).unwrap());
}

#[test]
fn failed_checks_exit_with_code_4_and_are_logged() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "d.toml", "[experiment]\nname = \"discretization\"\n[grid]\nsides = [8, 16, 32]\n");
    let o = hfield(&["rates", "--config", &cfg, "--out", "b"], dir);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    let log = fs::read_to_string(dir.join("b/run.jsonl")).unwrap();
    let failure = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|e| e["event"] == "failure")
        .unwrap();
    assert_eq!(failure["code"], 4);
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "bad.toml", "[grid]\nsied = 3\n");
    assert_eq!(hfield(&["sample", "--config", &cfg], dir).status.code(), Some(2));
    let cfg = write_config(dir, "law.toml", "[environment]\nlaw = \"uniform(2,1)\"\n");
    assert_eq!(hfield(&["ahom", "--config", &cfg, "--out", "l"], dir).status.code(), Some(2));
    let cfg = write_config(dir, "beta.toml", "[experiment]\nname = \"bilap_error\"\nbeta = 0.0\n");
    assert_eq!(hfield(&["rates", "--config", &cfg, "--out", "b"], dir).status.code(), Some(2));
    assert_eq!(hfield(&["sample", "--backend", "magic"], dir).status.code(), Some(2));
    assert_eq!(hfield(&["frobnicate"], dir).status.code(), Some(2));
    assert_eq!(hfield(&["--help"], dir).status.code(), Some(0));
    let cfg = write_config(dir, "spec.toml", "[sample]\nkind = \"gff_env\"\nbackend = \"spectral\"\n");
    assert_eq!(hfield(&["sample", "--config", &cfg, "--out", "s"], dir).status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "c.toml",
        "[grid]\nside = 32\n[solver]\nmax_iter = 2\npreconditioner = \"none\"\n[sample]\nkind = \"bilap_env\"\n",
    );
    let o = hfield(&["sample", "--config", &cfg, "--out", "o"], dir);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(dir.join("o/run.jsonl")).unwrap();
    assert!(log.contains("\"event\":\"failure\"") && log.contains("\"report\""));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "c.toml",
        "[grid]\nside = 16\n[ahom]\nreplicates = 6\n[environment]\nlaw = \"uniform(1,2)\"\n",
    );
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let o = hfield(&["ahom", "--config", &cfg, "--out", out, "--threads", threads], dir);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(dir.join("a/ahom.csv")).unwrap(), fs::read(dir.join("b/ahom.csv")).unwrap());
}
