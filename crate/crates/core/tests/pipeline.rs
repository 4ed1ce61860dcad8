use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use evlink::codec::Scheme;
use evlink::framing::restrict;
use evlink::harness::config::{PacketConfig, PacketSource};
use evlink::harness::experiment::receive;
use evlink::harness::{run_experiment, run_seed, sweep, ExperimentConfig, RoiMode, SweepParameter};
use evlink::io::{read_annotations, read_events, read_packets};

fn small(scheme: Scheme, preset: &str, ambient: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { scheme, ..Default::default() };
    cfg.scene.width = 32;
    cfg.scene.height = 24;
    cfg.scene.radius = 6.0;
    cfg.scene.preset = preset.into();
    cfg.ambient.preset = ambient.into();
    cfg.packets = PacketConfig { source: PacketSource::Random, count: Some(10), ..Default::default() };
    cfg
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Scheme::Adaptive, "ball", "room");
    cfg.seeds = vec![3, 4];
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        cfg.out_dir = Some(dir.path().join(name));
        run_experiment(&cfg).unwrap();
        trees.push(tree(&dir.path().join(name)));
    }
    let [mut a, mut b] = [trees.remove(0), trees.remove(0)];
    let strip = |t: &mut BTreeMap<PathBuf, Vec<u8>>| {
        let c = String::from_utf8(t.remove(Path::new("config.toml")).unwrap()).unwrap();
        c.lines().filter(|l| !l.starts_with("out_dir")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&mut a), strip(&mut b));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(b[k] == *v, "{} differs", k.display());
    }
    for f in ["summary.json", "seed_3/events.csv", "seed_3/report.json", "seed_4/frames/busiest.pgm"] {
        assert!(a.contains_key(Path::new(f)), "{f}");
    }
    assert!(!a.keys().any(|k| k.extension().is_some_and(|e| e == "tmp")));
}

#[test]
fn decoder_consumes_exactly_the_written_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Scheme::Npulse4, "ball", "dark");
    cfg.out_dir = Some(dir.path().to_path_buf());
    let result = run_experiment(&cfg).unwrap();
    let outcome = &result.outcomes[0];
    let seed_dir = dir.path().join("seed_0");

    let events = read_events(&seed_dir.join("events.csv")).unwrap();
    assert_eq!(events.len(), outcome.roi_event_count);
    let roi = read_annotations(&seed_dir.join("annotations.csv")).unwrap()[0].bbox().unwrap();
    assert_eq!(roi, outcome.roi);
    assert_eq!(restrict(&events, Some(roi)), events);

    let rx = receive(&events, None, cfg.scheme, &cfg.codec, 64).unwrap();
    assert_eq!(rx.hot_pixel, outcome.hot_pixel);
    assert_eq!(rx.packets.len(), outcome.packets_decoded);
    assert_eq!(read_packets(&seed_dir.join("sent.txt")).unwrap().len(), 10);
}

#[test]
fn hardware_roi_matches_filtering() {
    let mut cfg = small(Scheme::Adaptive, "flask", "dark");
    let (a, _) = run_seed(&cfg, 2).unwrap();
    cfg.roi_mode = RoiMode::Hardware;
    let (b, _) = run_seed(&cfg, 2).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.roi_event_count, b.roi_event_count);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
            n += 1;
        }
    }
    assert!(n >= 2);
}

fn column(table: &evlink::harness::SweepTable, name: &str) -> Vec<f64> {
    let i = table.header.iter().position(|h| h == name).unwrap();
    table.rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn ambient_noise_does_not_help() {
    let mut cfg = small(Scheme::Adaptive, "ball", "room");
    cfg.seeds = (0..20).collect();
    let values: Vec<String> = ["0.0", "0.05", "0.1"].map(String::from).to_vec();
    let table = sweep(&cfg, SweepParameter::AmbientSigma, &values).unwrap();
    let per = column(&table, "mean_packet_error_rate");
    assert!(per.windows(2).all(|w| w[1] >= w[0]), "{per:?}");
    assert!(per[2] > per[0]);
}

#[test]
fn adaptive_wins_on_ones_heavy_packets() {
    let mut cfg = small(Scheme::Npulse4, "mirror", "dark");
    cfg.packets = PacketConfig {
        source: PacketSource::Fixed,
        bits: Some("1111011111101111110111111111011111110110111111111101111011111111".into()),
        count: Some(10),
        ..Default::default()
    };
    cfg.seeds = (0..5).collect();
    let table = sweep(&cfg, SweepParameter::Scheme, &["npulse4".into(), "adaptive".into()]).unwrap();
    let rate = column(&table, "mean_achieved_rate_bps");
    let per = column(&table, "mean_packet_error_rate");
    assert!(rate[1] > rate[0], "{rate:?}");
    assert!(per[1] <= per[0], "{per:?}");
}

#[test]
fn surface_sweep_orders_tape_last() {
    let mut cfg = small(Scheme::Adaptive, "mirror", "dark");
    cfg.seeds = vec![0, 1];
    let table = sweep(&cfg, SweepParameter::SurfacePreset, &["mirror".into(), "tape".into(), "foam".into()]).unwrap();
    let per = column(&table, "mean_packet_error_rate");
    let lost = column(&table, "mean_lost_count");
    assert!(per[0] < per[1]);
    assert_eq!((per[2], lost[2]), (1.0, 10.0));
    assert!(table.to_csv().unwrap().starts_with("surface_preset,mean_packet_error_rate,"));
}
