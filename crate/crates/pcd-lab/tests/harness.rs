//! Configuration handling, the verification battery and the experiment drivers.

use pcd_lab::harness::config::{ExperimentConfig, NoiseStart};
use pcd_lab::harness::experiments::{run_convergence, run_divergence_demo};
use pcd_lab::harness::manifest::sha256_hex;
use pcd_lab::harness::verify::run_empty;
use pcd_lab::harness::{run_verify, ManifestBuilder};
use pcd_lab::Error;
use std::path::Path;
use std::time::Instant;

fn shipped(name: &str) -> ExperimentConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&p).unwrap()
}

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.lattice.dim = 2;
    c.lattice.n = 8;
    c.grid.t_end = 0.05;
    c.grid.dt = 0.005;
    c.noise.seeds = vec![1, 2];
    c
}

#[test]
fn shipped_configs_parse() {
    for name in ["converge.toml", "diverge.toml", "solve.toml", "verify.toml"] {
        let c = shipped(name);
        let again = ExperimentConfig::parse(&c.canonical()).unwrap();
        assert_eq!(again, c, "{name}");
    }
}

#[test]
fn empty_text_gives_the_defaults() {
    assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    let c = ExperimentConfig::parse("[lattice]\ndim = 2\nn = 8\n").unwrap();
    assert_eq!((c.lattice.dim, c.lattice.n), (2, 8));
    assert_eq!(c.grid, ExperimentConfig::default().grid);
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = [
        "[lattice]\nunknown = 1\n",
        "[lattice]\nn = 7\n",
        "[lattice]\ndim = 4\n",
        "[lattice]\ndealias = 1.25\n",
        "[grid]\nt_end = 0.1\ndt = 0.03\n",
        "[grid]\ndt = 0.0\n",
        "[controlled]\nz = 0.7\n",
        "[controlled]\nd = 0.08\n",
        "[controlled]\nb = 0.06\n",
        "[exponents]\ndelta_prime = 0.05\n",
        "[mollifier]\nplateau = 1.0\n",
        "[noise]\nseeds = []\n",
        "[noise]\nepsilons = [-0.1]\n",
        "[noise]\nstart = \"sometimes\"\n",
        "[solver]\nb_sign = \"up\"\n",
        "[solver]\nquadrature = \"simpson\"\n",
        "[solver]\nc2_variant = \"other\"\n",
        "[solver]\nprobe_every = 0\n",
        "lattice = 3\n",
        "[lattice\n",
    ];
    for text in bad {
        assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text:?}");
    }
}

#[test]
fn config_accessors() {
    let c = ExperimentConfig::parse("[solver]\nb_sign = \"plus\"\nquadrature = \"left_point\"\n[noise]\nstart = \"zero_start\"\n").unwrap();
    assert_eq!(c.noise.start, NoiseStart::ZeroStart);
    let s = c.solve_config().unwrap();
    assert_eq!(s.b_sign, pcd_lab::solver::BSign::Plus);
    assert_eq!(s.quadrature, pcd_lab::paracalc::Quadrature::LeftPoint);
    assert_eq!(c.n_steps(), 50);
    assert_eq!(c.profile().unwrap(), pcd_lab::ou::MollifierProfile::new(1.0).unwrap());
}

#[test]
fn empty_battery_passes() {
    let rep = run_empty(&ExperimentConfig::default()).unwrap();
    assert!(rep.checks.is_empty() && rep.pass());
    assert_eq!(rep.csv(), "check,pass,detail\n");
}

#[test]
fn default_battery_passes_and_negative_control_fails() {
    let mut c = ExperimentConfig::default();
    c.lattice.dim = 1;
    c.lattice.n = 16;
    let t = Instant::now();
    let rep = run_verify(&c, false).unwrap();
    assert!(rep.pass(), "{}", rep.csv());
    assert!(t.elapsed().as_secs() < 120);
    let bad = run_verify(&c, true).unwrap();
    assert!(!bad.pass());
    assert!(!bad.failures().is_empty());
}

#[test]
fn single_level_schedule_has_no_rows() {
    let mut c = small();
    c.noise.epsilons = vec![0.5];
    let rep = run_convergence(&c, true, true).unwrap();
    assert!(rep.rough.is_empty() && rep.solution.is_empty());
    assert!(rep.pass());
}

#[test]
fn two_levels_give_one_unjudged_row() {
    let mut c = small();
    c.noise.epsilons = vec![0.5, 0.25];
    c.noise.seeds = vec![3];
    let rep = run_convergence(&c, true, true).unwrap();
    assert_eq!((rep.rough.len(), rep.solution.len()), (1, 1));
    assert!(rep.rough_monotone.is_empty() && rep.solution_monotone.is_empty());
}

#[test]
fn levels_beyond_the_support_give_zero_distances() {
    let mut c = small();
    c.noise.epsilons = vec![4.0, 2.0, 1.0];
    let rep = run_convergence(&c, true, true).unwrap();
    assert!(rep.rough.iter().all(|r| r.distance == 0.0));
    assert!(rep.solution.iter().all(|r| r.distance == 0.0));
}

#[test]
fn tables_are_byte_identical_across_runs() {
    let mut c = small();
    c.noise.epsilons = vec![0.8, 0.4, 0.2, 0.1];
    let a = run_convergence(&c, true, true).unwrap();
    let b = run_convergence(&c, true, true).unwrap();
    assert_eq!(a.rough_csv(), b.rough_csv());
    assert_eq!(a.solution_csv(), b.solution_csv());
    assert_eq!(a.rough.len(), 6);
    assert_eq!(a.rough_monotone.len(), 2);
    let mut dc = shipped("diverge.toml");
    dc.noise.epsilons = vec![0.5, 0.25, 0.125];
    let d = run_divergence_demo(&dc).unwrap();
    assert_eq!(d.rows.len(), 3);
    assert_eq!(d.csv(), run_divergence_demo(&dc).unwrap().csv());
}

#[test]
fn divergence_demo_needs_positive_levels() {
    let mut c = small();
    c.noise.epsilons = vec![0.5, 0.0];
    assert!(matches!(run_divergence_demo(&c), Err(Error::Config(_))));
}

#[test]
fn manifest_records_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let mut m = ManifestBuilder::new("test", &cfg.canonical(), &cfg.noise.seeds);
    m.write(dir.path(), "a.csv", b"x,y\n1,2\n").unwrap();
    let man = m.finish();
    man.write(dir.path()).unwrap();
    assert_eq!(man.config_sha256, sha256_hex(cfg.canonical().as_bytes()));
    assert_eq!(man.outputs[0].sha256, sha256_hex(b"x,y\n1,2\n"));
    assert_eq!(man.outputs[0].bytes, 8);
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let back: pcd_lab::harness::RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back, man);
    assert_eq!(
        sha256_hex(b"abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}
