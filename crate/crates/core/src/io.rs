//! File formats: event CSV, plain PGM frames, RoI annotations, pulse and
//! packet files. Writers go through a temporary file and a rename so a run
//! never leaves half-written artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::{bits_to_string, from_hex, parse_bits, to_hex, Bits};
use crate::codec::PulseString;
use crate::detect::{gray_level, BoundingBox};
use crate::error::{Error, Result};
use crate::event::{Event, Polarity};
use crate::framing::EventFrame;

/// Writes `bytes` to `path` via a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), msg: msg.into() }
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    t_us: u64,
    x: u32,
    y: u32,
    p: u8,
}

/// Event stream as CSV with header `t_us,x,y,p`.
pub fn events_to_csv(stream: &[Event]) -> Result<Vec<u8>> {
    // header written by hand so an empty stream still gets one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["t_us", "x", "y", "p"])?;
    for e in stream {
        w.serialize(EventRow { t_us: e.t, x: e.x, y: e.y, p: e.polarity.bit() })?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn events_from_csv(data: &[u8]) -> Result<Vec<Event>> {
    let mut r = csv::Reader::from_reader(data);
    r.deserialize::<EventRow>()
        .map(|row| {
            let row = row?;
            Ok(Event::new(row.t_us, row.x, row.y, Polarity::from_bit(row.p)?))
        })
        .collect()
}

pub fn write_events(path: &Path, stream: &[Event]) -> Result<()> {
    write_atomic(path, &events_to_csv(stream)?)
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    events_from_csv(&fs::read(path)?).map_err(|e| match e {
        Error::Csv(c) => parse_err(path, c.to_string()),
        other => other,
    })
}

/// Plain (P2) PGM of a frame's grayscale levels.
pub fn frame_to_pgm(frame: &EventFrame, cap: u32) -> Result<String> {
    if cap == 0 {
        return Err(Error::InvalidConfig("grayscale cap must be > 0".into()));
    }
    let mut s = format!("P2\n# t_frame_us={}\n{} {}\n255\n", frame.t_frame_us, frame.width, frame.height);
    for row in frame.counts.chunks(frame.width as usize) {
        let line: Vec<String> = row.iter().map(|&c| gray_level(c, cap).to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    Ok(s)
}

/// Grayscale image read back from a plain PGM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub max: u32,
    pub data: Vec<u32>,
}

pub fn parse_pgm(text: &str) -> std::result::Result<GrayImage, String> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err("missing P2 magic".into());
    }
    let mut num = |what: &str| -> std::result::Result<u32, String> {
        tokens
            .next()
            .ok_or_else(|| format!("missing {what}"))?
            .parse()
            .map_err(|e| format!("bad {what}: {e}"))
    };
    let (width, height, max) = (num("width")?, num("height")?, num("maxval")?);
    let data = (0..width as usize * height as usize)
        .map(|_| num("pixel"))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if data.iter().any(|&v| v > max) {
        return Err("pixel above maxval".into());
    }
    Ok(GrayImage { width, height, max, data })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&fs::read_to_string(path)?).map_err(|m| parse_err(path, m))
}

/// Labelled box, as stored in annotation CSVs (`label,x,y,w,h`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: String,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Annotation {
    pub fn new(label: &str, b: BoundingBox) -> Self {
        Self { label: label.into(), x: b.x, y: b.y, w: b.w, h: b.h }
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        BoundingBox::new(self.x, self.y, self.w, self.h)
    }
}

pub fn write_annotations(path: &Path, rows: &[Annotation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let data = fs::read(path)?;
    csv::Reader::from_reader(data.as_slice())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, e.to_string()))
}

/// Pulse file: a `# slot_us=N` header line, then the slot string.
pub fn pulse_to_text(p: &PulseString) -> String {
    format!("# slot_us={}\n{}\n", p.slot_us, bits_to_string(&p.slots))
}

pub fn pulse_from_text(text: &str) -> std::result::Result<PulseString, String> {
    let mut slot_us = None;
    let mut slots = Bits::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(v) = line.strip_prefix("# slot_us=") {
            slot_us = Some(v.trim().parse::<u64>().map_err(|e| format!("bad slot_us: {e}"))?);
        } else if !line.starts_with('#') {
            slots.extend(parse_bits(line).map_err(|e| e.to_string())?);
        }
    }
    PulseString::new(slots, slot_us.ok_or("missing `# slot_us=` header")?).map_err(|e| e.to_string())
}

pub fn read_pulse_file(path: &Path) -> Result<PulseString> {
    pulse_from_text(&fs::read_to_string(path)?).map_err(|m| parse_err(path, m))
}

/// One packet per line, as hex with a `/len` suffix.
pub fn packets_to_text(packets: &[Bits]) -> String {
    packets
        .iter()
        .map(|p| {
            let hex = to_hex(p);
            match hex.contains('/') {
                true => hex + "\n",
                false => format!("{hex}/{}\n", p.len()),
            }
        })
        .collect()
}

/// Accepts hex (`/len` suffixed) or plain `0`/`1` lines; `#` starts a comment.
pub fn packets_from_text(text: &str) -> std::result::Result<Vec<Bits>, String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| if l.contains('/') { from_hex(l) } else { parse_bits(l) }.map_err(|e| e.to_string()))
        .collect()
}

pub fn read_packets(path: &Path) -> Result<Vec<Bits>> {
    packets_from_text(&fs::read_to_string(path)?).map_err(|m| parse_err(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::SensorGeometry;

    #[test]
    fn event_csv_round_trip() {
        let stream = vec![Event::new(5, 1, 2, Polarity::On), Event::new(9, 0, 0, Polarity::Off)];
        let bytes = events_to_csv(&stream).unwrap();
        assert!(String::from_utf8_lossy(&bytes).starts_with("t_us,x,y,p\n5,1,2,1\n"));
        assert_eq!(events_from_csv(&bytes).unwrap(), stream);
        assert!(events_from_csv(b"t_us,x,y,p\n1,1,1,2\n").is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let mut f = EventFrame::zeros(SensorGeometry::new(3, 2).unwrap(), 100);
        f.counts = vec![0, 1, 2, 5, 9, 0];
        let img = parse_pgm(&frame_to_pgm(&f, 5).unwrap()).unwrap();
        assert_eq!((img.width, img.height, img.max), (3, 2, 255));
        assert_eq!(img.data, vec![0, 51, 102, 255, 255, 0]);
        assert!(parse_pgm("P5 1 1 255 0").is_err());
        assert!(parse_pgm("P2 2 1 255 0").is_err());
    }

    #[test]
    fn pulse_and_packet_text() {
        let p = PulseString::new(parse_bits("1010000").unwrap(), 100).unwrap();
        assert_eq!(pulse_from_text(&pulse_to_text(&p)).unwrap(), p);
        assert!(pulse_from_text("1010").is_err());

        let pk = vec![parse_bits("1011").unwrap(), parse_bits("0000000011").unwrap()];
        assert_eq!(packets_from_text(&packets_to_text(&pk)).unwrap(), pk);
        assert_eq!(packets_from_text("0110 # bits\n\n").unwrap(), vec![parse_bits("0110").unwrap()]);
    }

    #[test]
    fn files_are_written_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/ann.csv");
        let rows = vec![Annotation::new("roi", BoundingBox::new(1, 2, 3, 4).unwrap())];
        write_annotations(&path, &rows).unwrap();
        assert_eq!(read_annotations(&path).unwrap(), rows);
        assert!(!dir.path().join("sub/ann.csv.tmp").exists());
        let ev = dir.path().join("e.csv");
        write_events(&ev, &[]).unwrap();
        assert_eq!(fs::read_to_string(&ev).unwrap(), "t_us,x,y,p\n");
        assert!(read_events(&ev).unwrap().is_empty());
    }
}
