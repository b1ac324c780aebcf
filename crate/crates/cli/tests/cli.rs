use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybrid_cst::config::ExperimentConfig;
use hybrid_cst::meshing::Scheme;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn demo_config() -> PathBuf {
    workspace_root().join("configs/demo.toml")
}

fn hcst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcst")).args(args).output().expect("binary runs")
}

fn hcst_in(out: &Path, args: &[&str]) -> Output {
    let config = demo_config();
    let mut all = args.to_vec();
    all.extend(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    hcst(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_parse_and_build() {
    for name in ["demo.toml", "octagon.toml"] {
        let cfg = ExperimentConfig::load(&workspace_root().join("configs").join(name)).unwrap();
        let (layout, ros) = cfg.layout.build().unwrap();
        assert_eq!(layout.len(), 32, "{name}");
        for m in &cfg.meshes {
            let mesh = m.build(&ros).unwrap();
            // cells are kept by centre, so coverage only approximates the region
            assert!((mesh.covered_area() / ros.area() - 1.0).abs() < 0.1, "{name} {}", m.name);
        }
        let study = cfg.study().unwrap();
        for p in &study.phantoms {
            assert!(!cfg.frames(p, &ros).unwrap().is_empty());
        }
        assert_eq!(cfg.comparison_plan().unwrap().solvers.len(), 3);
    }
    let octagon = ExperimentConfig::load(&workspace_root().join("configs/octagon.toml")).unwrap();
    let (_, ros) = octagon.layout.build().unwrap();
    let hybrid = octagon.meshes.iter().find(|m| m.scheme == Scheme::Hybrid).unwrap().build(&ros).unwrap();
    assert_eq!((hybrid.len(), hybrid.n_in), (196, 144));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hcst(&["--help"])), 0);
    assert_eq!(code(&hcst(&["--version"])), 0);
    assert_eq!(code(&hcst(&["frobnicate"])), 1);
    assert_eq!(code(&hcst(&["mesh"])), 1, "missing --config");
    assert_eq!(code(&hcst_in(dir.path(), &["reconstruct", "--mesh", "hybrid", "--solver", "xyz"])), 1);
    assert_eq!(code(&hcst_in(dir.path(), &["sense", "--mesh", "nope"])), 1);
    assert_eq!(code(&hcst_in(dir.path(), &["phantom", "--frame", "999"])), 1);
    assert_eq!(code(&hcst_in(dir.path(), &["mesh", "--jobs", "0"])), 1);

    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "seed = \"seven\"\n").unwrap();
    assert_eq!(code(&hcst(&["mesh", "--config", broken.to_str().unwrap()])), 1);
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&hcst(&["mesh", "--config", missing.to_str().unwrap()])), 1);

    // output directory path is an existing regular file
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    assert_eq!(code(&hcst_in(&blocker, &["mesh"])), 2);
    let nested = blocker.join("sub");
    assert_eq!(code(&hcst_in(&nested, &["mesh"])), 2);

    let ok = hcst_in(dir.path(), &["sense"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn every_artifact_carries_config_hash_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&demo_config()).unwrap();
    cfg.seed = 77;
    let tag = format!("config={} seed=77", cfg.hash());
    for args in [
        vec!["mesh", "--size", "64"],
        vec!["sense"],
        vec!["svd"],
        vec!["phantom"],
        vec!["project", "--snr", "30"],
        vec!["reconstruct", "--mesh", "uniform", "--solver", "tk"],
        vec!["sweep", "--mesh", "hybrid", "--solver", "art", "--reps", "2"],
    ] {
        let mut a = args.clone();
        a.extend(["--seed", "77"]);
        let o = hcst_in(dir.path(), &a);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let all = files(dir.path());
    assert!(all.len() >= 25, "{} files", all.len());
    for path in all {
        let bytes = fs::read(&path).unwrap();
        let head = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).into_owned();
        assert!(head.contains(&tag), "{} lacks `{tag}`", path.display());
    }
}

#[test]
fn csv_outputs_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hcst_in(dir.path(), &["sense", "--mesh", "hybrid"])), 0);
    let text = fs::read_to_string(dir.path().join("triplets_hybrid.csv")).unwrap();
    let (provenance, table) = text.split_once("\r\n").unwrap();
    assert!(provenance.starts_with("# hcst config="));
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let width = reader.headers().unwrap().len();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 320);
    assert!(rows.iter().all(|r| r.len() == width));
    assert_eq!(text.matches("\r\n").count(), text.matches('\n').count());
}

#[test]
fn pgm_has_header_payload_and_range_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hcst_in(dir.path(), &["phantom", "--frame", "19"])), 0);
    let pgm = fs::read(dir.path().join("phantom_jet_f19.pgm")).unwrap();
    let text = String::from_utf8_lossy(&pgm);
    let mut header = text.splitn(5, '\n');
    assert_eq!(header.next(), Some("P5"));
    assert!(header.next().unwrap().starts_with("# hcst config="));
    let dims: Vec<usize> = header.next().unwrap().split(' ').map(|v| v.parse().unwrap()).collect();
    assert_eq!(header.next(), Some("255"));
    let header_len = pgm.len() - dims[0] * dims[1];
    assert_eq!(&pgm[header_len - 4..header_len], b"255\n");
    let payload = &pgm[header_len..];
    assert_eq!(payload.iter().max(), Some(&255));
    assert_eq!(payload.iter().min(), Some(&0));

    let range = fs::read_to_string(dir.path().join("phantom_jet_f19.pgm.range")).unwrap();
    let value = |key: &str| -> f64 { range.lines().find_map(|l| l.strip_prefix(key)).unwrap().parse().unwrap() };
    // background and the full-grown peak on top of it
    assert!((value("min=") - 0.005).abs() < 1e-6, "{range}");
    assert!((value("max=") - 0.055).abs() < 1e-3, "{range}");
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sweep = ["sweep", "--mesh", "hybrid", "--solver", "tv", "--reps", "3"];
    assert_eq!(code(&hcst_in(a.path(), &[&sweep[..], &["--jobs", "1"]].concat())), 0);
    assert_eq!(code(&hcst_in(b.path(), &[&sweep[..], &["--jobs", "2"]].concat())), 0);
    for name in ["sweep_hybrid_tv.csv", "sweep_hybrid_tv.txt"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    assert_eq!(code(&hcst_in(c.path(), &[&sweep[..], &["--seed", "1"]].concat())), 0);
    assert_ne!(
        fs::read(a.path().join("sweep_hybrid_tv.csv")).unwrap(),
        fs::read(c.path().join("sweep_hybrid_tv.csv")).unwrap()
    );
}

#[test]
fn full_run_writes_the_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = hcst_in(dir.path(), &["run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("hybrid vs uniform"));
    let comparison = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    // provenance line, header, 2 meshes x 3 solvers x 5 SNRs
    assert_eq!(comparison.lines().count(), 2 + 30);
    for s in ["tk", "art", "tv"] {
        for m in ["hybrid", "uniform"] {
            assert!(dir.path().join(format!("sweep_{m}_{s}.csv")).exists());
        }
    }
    let echoed = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    let back = ExperimentConfig::from_toml_str(&echoed).unwrap();
    assert_eq!(back, ExperimentConfig::load(&demo_config()).unwrap());
}
