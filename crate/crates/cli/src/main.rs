use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use evlink::bits::{from_hex, parse_bits, to_hex, Bits};
use evlink::channel::{compose_scene, waveform_to_signal, TransmitterWaveform};
use evlink::codec::{airtime, encode, PulseString, Scheme};
use evlink::detect::BoundingBox;
use evlink::framing::{periodic_frames, restrict, CountMode};
use evlink::harness::experiment::{build_transmission, locate_roi, receive};
use evlink::harness::{run_experiment, sweep, ExperimentConfig, SweepParameter};
use evlink::io::{
    frame_to_pgm, packets_to_text, pulse_to_text, read_annotations, read_events, read_packets, read_pulse_file,
    write_annotations, write_atomic, write_events, Annotation,
};
use evlink::metrics::{evaluate_link, LinkReport};
use evlink::sensor::simulate_sensor;

#[derive(Parser)]
#[command(name = "evlink", version, about = "Event-camera optical link simulator")]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seeds with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config scheme.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Encode packets into a pulse string file.
    Encode {
        /// Packet as `0`/`1` digits or `hex/len`.
        #[arg(long, conflicts_with = "packets")]
        bits: Option<String>,
        /// Packet file, one packet per line.
        #[arg(long)]
        packets: Option<PathBuf>,
    },
    /// Preview the transmitter waveform of a pulse string.
    Modulate {
        #[arg(long)]
        pulse: PathBuf,
    },
    /// Simulate the configured scene and write the event stream.
    Simulate,
    /// Accumulate an event file into periodic frames.
    Frames {
        #[arg(long)]
        events: PathBuf,
        /// Recording length; defaults to the last event time.
        #[arg(long)]
        duration_us: Option<u64>,
    },
    /// Locate the region of interest in an event file.
    Roi {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        duration_us: Option<u64>,
    },
    /// Decode packets from an event file.
    Decode {
        #[arg(long)]
        events: PathBuf,
        /// Restrict to a box `x,y,w,h`, or an annotation CSV (first row).
        #[arg(long)]
        roi: Option<String>,
    },
    /// Score decoded packets against sent ones.
    Evaluate {
        #[arg(long)]
        sent: PathBuf,
        #[arg(long)]
        decoded: PathBuf,
        /// Elapsed time; defaults to the encoded airtime of the sent packets.
        #[arg(long)]
        elapsed_us: Option<u64>,
    },
    /// Run the whole chain for every seed.
    Run,
    /// Repeat a run over the values of one parameter.
    Sweep {
        #[arg(long)]
        param: SweepParameter,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(s) = cli.scheme {
        cfg.scheme = s;
    }
    cfg.out_dir = cli.out.clone();
    cfg.validate()?;
    let out = Output { dir: cli.out.clone(), format: cli.format };

    match cli.command {
        Command::Encode { bits, packets } => {
            let packets = match (bits, packets) {
                (Some(b), None) => vec![parse_packet(&b)?],
                (None, Some(p)) => read_packets(&p)?,
                _ => bail!("pass --bits or --packets"),
            };
            let mut pulse = PulseString::new(Vec::new(), cfg.codec.slot_us)?;
            for p in &packets {
                pulse.extend(&encode(cfg.scheme, p, &cfg.codec)?);
            }
            info!("{} packets, {} slots, {} µs", packets.len(), pulse.len(), airtime(&pulse));
            out.text("pulse.txt", &pulse_to_text(&pulse))
        }
        Command::Modulate { pulse } => {
            let pulse = read_pulse_file(&pulse)?;
            let wave = TransmitterWaveform::new(pulse, cfg.transmitter.on, cfg.transmitter.off)?;
            let signal = waveform_to_signal(&wave)?;
            let rows: Vec<(u64, f64)> = signal.samples().iter().enumerate().map(|(i, &v)| (signal.time_of(i), v)).collect();
            match out.format {
                Format::Csv => {
                    let mut s = String::from("t_us,intensity\n");
                    for (t, v) in rows {
                        s.push_str(&format!("{t},{v}\n"));
                    }
                    out.text("waveform.csv", &s)
                }
                Format::Json => out.json("waveform.json", &rows),
            }
        }
        Command::Simulate => {
            let seed = cfg.seeds[0];
            let tx = build_transmission(&cfg, seed)?;
            let scene = cfg.scene_spec(tx.pulse.clone())?;
            let field = compose_scene(&scene, tx.duration_us, seed)?;
            let stream = simulate_sensor(&field, &cfg.sensor, scene.geometry, None, seed)?;
            info!("{} events over {} µs", stream.len(), tx.duration_us);
            match &out.dir {
                Some(dir) => {
                    write_events(&dir.join("events.csv"), &stream)?;
                    write_atomic(&dir.join("sent.txt"), packets_to_text(&tx.packets).as_bytes())?;
                    write_atomic(&dir.join("pulse.txt"), pulse_to_text(&tx.pulse).as_bytes())?;
                    Ok(())
                }
                None => out.text("events.csv", &String::from_utf8(evlink::io::events_to_csv(&stream)?)?),
            }
        }
        Command::Frames { events, duration_us } => {
            let stream = read_events(&events)?;
            let geometry = cfg.scene.geometry()?;
            let duration = duration_us.unwrap_or_else(|| stream.last().map_or(0, |e| e.t + 1));
            let frames = periodic_frames(&stream, geometry, duration, cfg.frames.accumulation_us, cfg.frames.rate()?, CountMode::All)?;
            if let Some(dir) = &out.dir {
                for (k, f) in frames.iter().enumerate() {
                    write_atomic(&dir.join(format!("frame_{:05}.pgm", k + 1)), frame_to_pgm(f, cfg.frames.cap)?.as_bytes())?;
                }
            }
            let rows: Vec<(u64, u64)> = frames.iter().map(|f| (f.t_frame_us, f.total())).collect();
            match out.format {
                Format::Csv => {
                    let mut s = String::from("frame,t_frame_us,events\n");
                    for (k, (t, n)) in rows.iter().enumerate() {
                        s.push_str(&format!("{},{t},{n}\n", k + 1));
                    }
                    out.text("frames.csv", &s)
                }
                Format::Json => out.json("frames.json", &rows),
            }
        }
        Command::Roi { events, duration_us } => {
            let stream = read_events(&events)?;
            let geometry = cfg.scene.geometry()?;
            let duration = duration_us.unwrap_or_else(|| stream.last().map_or(0, |e| e.t + 1));
            let search = locate_roi(&stream, geometry, duration, &cfg.frames)?;
            let Some(bbox) = search.bbox else {
                bail!("no region of interest found");
            };
            if let (Some(dir), Some(frame)) = (&out.dir, &search.frame) {
                write_atomic(&dir.join("busiest.pgm"), frame_to_pgm(frame, cfg.frames.cap)?.as_bytes())?;
                write_annotations(&dir.join("roi.csv"), &[Annotation::new("roi", bbox)])?;
            }
            match out.format {
                Format::Csv => out.text("roi.txt", &format!("x,y,w,h\n{},{},{},{}\n", bbox.x, bbox.y, bbox.w, bbox.h)),
                Format::Json => out.json("roi.json", &bbox),
            }
        }
        Command::Decode { events, roi } => {
            let stream = read_events(&events)?;
            let roi = roi.as_deref().map(parse_roi).transpose()?;
            let stream = restrict(&stream, roi);
            let payload_length = cfg.packets.packet(0, 0)?.len();
            let rx = receive(&stream, None, cfg.scheme, &cfg.codec, payload_length)?;
            if let Some(dir) = &out.dir {
                write_atomic(&dir.join("decode_log.json"), &serde_json::to_vec_pretty(&rx.log)?)?;
            }
            match out.format {
                Format::Csv => out.text("decoded.txt", &packets_to_text(&rx.packets)),
                Format::Json => {
                    let hex: Vec<String> = rx.packets.iter().map(|p| to_hex(p)).collect();
                    let body = serde_json::json!({ "hot_pixel": rx.hot_pixel, "packets": hex, "log": rx.log });
                    out.json("decoded.json", &body)
                }
            }
        }
        Command::Evaluate { sent, decoded, elapsed_us } => {
            let sent = read_packets(&sent)?;
            let decoded = read_packets(&decoded)?;
            let elapsed = match elapsed_us {
                Some(e) => e,
                None => sent.iter().map(|p| encode(cfg.scheme, p, &cfg.codec).map(|s| airtime(&s))).sum::<evlink::Result<u64>>()?,
            };
            let report = evaluate_link(&sent, &decoded, elapsed)?;
            out.report("report", &report)
        }
        Command::Run => {
            let result = run_experiment(&cfg)?;
            for o in &result.outcomes {
                for w in &o.warnings {
                    log::warn!("{w}");
                }
            }
            match out.format {
                Format::Csv => {
                    let rows: Vec<(String, LinkReport)> =
                        result.outcomes.iter().map(|o| (o.seed.to_string(), o.report.clone())).collect();
                    out.reports_named("seed", "runs", &rows)
                }
                Format::Json => {
                    let body = serde_json::json!({ "summary": result.summary, "runs": result.outcomes });
                    out.json("result.json", &body)
                }
            }
        }
        Command::Sweep { param, values } => {
            let table = sweep(&cfg, param, &values)?;
            match out.format {
                Format::Csv => out.text("sweep.csv", &table.to_csv()?),
                Format::Json => out.json("sweep.json", &table),
            }
        }
    }
}

fn parse_packet(s: &str) -> Result<Bits> {
    Ok(if s.contains('/') { from_hex(s)? } else { parse_bits(s)? })
}

fn parse_roi(s: &str) -> Result<BoundingBox> {
    let path = Path::new(s);
    if path.exists() {
        let rows = read_annotations(path)?;
        let first = rows.first().with_context(|| format!("{s} has no annotation rows"))?;
        return Ok(first.bbox()?);
    }
    let v: Vec<u32> = s.split(',').map(|p| p.trim().parse()).collect::<std::result::Result<_, _>>().context("roi must be x,y,w,h")?;
    let [x, y, w, h] = v[..] else {
        bail!("roi must be x,y,w,h");
    };
    Ok(BoundingBox::new(x, y, w, h)?)
}

struct Output {
    dir: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn text(&self, name: &str, body: &str) -> Result<()> {
        match &self.dir {
            Some(d) => Ok(write_atomic(&d.join(name), body.as_bytes())?),
            None => {
                print!("{body}");
                Ok(())
            }
        }
    }

    fn json<T: serde::Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    fn report(&self, stem: &str, report: &LinkReport) -> Result<()> {
        match self.format {
            Format::Json => self.json(&format!("{stem}.json"), report),
            Format::Csv => {
                let s = format!("{}\n{}\n", LinkReport::CSV_HEADER.join(","), report.csv_row().join(","));
                self.text(&format!("{stem}.csv"), &s)
            }
        }
    }

    fn reports_named(&self, key: &str, stem: &str, rows: &[(String, LinkReport)]) -> Result<()> {
        let mut s = format!("{key},{}\n", LinkReport::CSV_HEADER.join(","));
        for (k, r) in rows {
            s.push_str(&format!("{k},{}\n", r.csv_row().join(",")));
        }
        self.text(&format!("{stem}.csv"), &s)
    }
}
