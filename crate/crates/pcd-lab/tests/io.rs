use pcd_lab::io::{decode_trajectory, encode_trajectory, fmt_f, parse_sidecar, Csv, SidecarRecord};
use pcd_lab::lattice::{LatticeSpec, TrajectoryField};
use pcd_lab::ou::{sample_ou, MollifierProfile, OuMode, OuSampler};
use pcd_lab::Error;

fn traj() -> TrajectoryField {
    let spec = LatticeSpec::new(2, 8).unwrap();
    let s = OuSampler::new(spec, OuMode::Stationary, 0.3, MollifierProfile::new(1.0).unwrap(), 2, 0).unwrap();
    sample_ou(&s, 0.5, 0.9, 4).unwrap()
}

#[test]
fn trajectory_round_trip() {
    let u = traj();
    let (bin, side) = encode_trajectory(&u, 9, 1, 0.3);
    assert_eq!(side.lines().count(), 5);
    let back = decode_trajectory(&bin, &side).unwrap();
    assert_eq!(back, u);
    let recs = parse_sidecar(&side).unwrap();
    assert_eq!(recs[0], SidecarRecord { t: 0.5, seed: 9, stream_id: 1, epsilon: 0.3 });
}

#[test]
fn sidecar_must_match_the_dumps() {
    let u = traj();
    let (bin, side) = encode_trajectory(&u, 9, 1, 0.3);
    let short: String = side.lines().take(4).map(|l| format!("{l}\n")).collect();
    assert!(matches!(decode_trajectory(&bin, &short), Err(Error::Decode(_))));
    let skewed = side.replacen("\"t\":0.6", "\"t\":0.65", 1);
    assert_ne!(skewed, side);
    assert!(matches!(decode_trajectory(&bin, &skewed), Err(Error::Decode(_))));
    assert!(matches!(decode_trajectory(&bin[..bin.len() - 3], &side), Err(Error::Decode(_))));
    let one = side.lines().next().unwrap().to_string();
    let first_dump = bin.len() / 5;
    assert!(matches!(decode_trajectory(&bin[..first_dump], &one), Err(Error::Decode(_))));
}

#[test]
fn malformed_sidecar_lines() {
    for bad in [
        "{\"t\":0.0}",
        "not json",
        "{\"t\":0.0,\"seed\":1,\"stream_id\":0,\"epsilon\":-1.0}",
        "{\"t\":0.0,\"seed\":-1,\"stream_id\":0,\"epsilon\":0.1}",
    ] {
        assert!(matches!(parse_sidecar(bad), Err(Error::Decode(_))), "{bad}");
    }
    assert!(parse_sidecar("\n\n").unwrap().is_empty());
}

#[test]
fn csv_rendering() {
    let mut c = Csv::new(&["a", "b"]);
    assert!(c.is_empty());
    c.push(vec!["1".into(), fmt_f(0.25)]);
    assert_eq!(c.len(), 1);
    let text = c.render();
    assert!(text.starts_with("a,b\n1,"));
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse::<f64>().unwrap(), 0.25);
    assert_eq!(fmt_f(0.1).parse::<f64>().unwrap(), 0.1);
}

fn seed(target: &str, name: &str) -> Vec<u8> {
    std::fs::read(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target).join(name)).unwrap()
}

#[test]
fn fuzz_seeds_decode_as_labelled() {
    use pcd_lab::io::decode_field;
    for good in ["zero_d1_n8.bin", "cos_d1_n8.bin", "mode_d2_n8.bin", "two_dumps.bin"] {
        assert!(decode_field(&seed("field_dump", good)).is_ok(), "{good}");
    }
    for bad in ["truncated.bin", "bad_magic.bin"] {
        assert!(decode_field(&seed("field_dump", bad)).is_err(), "{bad}");
    }
    // same split as the trajectory fuzz target
    let split = |data: &[u8]| {
        let (&cut, rest) = data.split_first().unwrap();
        let (bin, text) = rest.split_at(cut as usize * rest.len() / 255);
        decode_trajectory(bin, std::str::from_utf8(text).unwrap())
    };
    assert_eq!(split(&seed("trajectory_sidecar", "three_snapshots")).unwrap().n_steps(), 2);
    for bad in ["count_mismatch", "uneven_times", "sidecar_only"] {
        assert!(split(&seed("trajectory_sidecar", bad)).is_err(), "{bad}");
    }
}
