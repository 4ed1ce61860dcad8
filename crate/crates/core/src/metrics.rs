//! Link accounting: Hamming distance, packet and bit error rates.
//!
//! Decoded packets are matched to sent packets by position. A matched packet
//! with any differing bit, or a different length, is a packet error; sent
//! packets with no decoded counterpart are lost. Lost packets count towards
//! the packet error rate but not the bit error rate. Length mismatches are
//! compared over the common prefix.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};

/// Number of differing positions between equal-length sequences.
pub fn hamming(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(prefix_hamming(a, b))
}

fn prefix_hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Summary of one link run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub packet_error_rate: f64,
    /// Packets sent.
    pub total_packets: usize,
    pub avg_hamming: f64,
    pub max_hamming: usize,
    pub bit_error_rate: f64,
    pub achieved_rate_bps: f64,
    /// Sent packets with no decoded counterpart.
    pub lost_count: usize,
    /// Matched packets whose decoded length differs from the sent one.
    pub mismatched_length: usize,
}

impl LinkReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "packet_error_rate",
        "total_packets",
        "avg_hamming",
        "max_hamming",
        "bit_error_rate",
        "achieved_rate_bps",
        "lost_count",
        "mismatched_length",
    ];

    pub fn csv_row(&self) -> [String; 8] {
        [
            self.packet_error_rate.to_string(),
            self.total_packets.to_string(),
            self.avg_hamming.to_string(),
            self.max_hamming.to_string(),
            self.bit_error_rate.to_string(),
            self.achieved_rate_bps.to_string(),
            self.lost_count.to_string(),
            self.mismatched_length.to_string(),
        ]
    }

    /// Metric values by name, for aggregation.
    pub fn metrics(&self) -> [(&'static str, f64); 8] {
        [
            ("packet_error_rate", self.packet_error_rate),
            ("total_packets", self.total_packets as f64),
            ("avg_hamming", self.avg_hamming),
            ("max_hamming", self.max_hamming as f64),
            ("bit_error_rate", self.bit_error_rate),
            ("achieved_rate_bps", self.achieved_rate_bps),
            ("lost_count", self.lost_count as f64),
            ("mismatched_length", self.mismatched_length as f64),
        ]
    }
}

/// Compares decoded packets against the sent ones, in order.
pub fn evaluate_link(sent: &[Bits], received: &[Bits], elapsed_us: u64) -> Result<LinkReport> {
    if sent.is_empty() {
        return Err(Error::InvalidPacket("no packets were sent".into()));
    }
    if elapsed_us == 0 {
        return Err(Error::InvalidConfig("elapsed_us must be > 0".into()));
    }
    let matched = sent.len().min(received.len());
    let mut wrong = 0;
    let mut mismatched_length = 0;
    let mut total_hamming = 0;
    let mut max_hamming = 0;
    let mut matched_bits = 0;
    for (s, r) in sent.iter().zip(received) {
        let d = prefix_hamming(s, r);
        if s.len() != r.len() {
            mismatched_length += 1;
        }
        if d > 0 || s.len() != r.len() {
            wrong += 1;
        }
        total_hamming += d;
        max_hamming = max_hamming.max(d);
        matched_bits += s.len();
    }
    let lost_count = sent.len() - matched;
    let sent_bits: usize = sent.iter().map(Vec::len).sum();
    Ok(LinkReport {
        packet_error_rate: (wrong + lost_count) as f64 / sent.len() as f64,
        total_packets: sent.len(),
        avg_hamming: if matched > 0 { total_hamming as f64 / matched as f64 } else { 0.0 },
        max_hamming,
        bit_error_rate: if matched_bits > 0 { total_hamming as f64 / matched_bits as f64 } else { 0.0 },
        achieved_rate_bps: crate::sensor::event_rate(sent_bits, elapsed_us),
        lost_count,
        mismatched_length,
    })
}

/// Report for a looping ID link. `detected` frames were found in the slot
/// bits and `wrong` of them carried another ID; the rate is `wrong /
/// detected` (1 when nothing was detected).
pub fn id_link_report(sent: usize, detected: usize, wrong: usize, payload_length: usize, elapsed_us: u64) -> LinkReport {
    LinkReport {
        packet_error_rate: if detected > 0 { wrong as f64 / detected as f64 } else { 1.0 },
        total_packets: sent,
        avg_hamming: 0.0,
        max_hamming: 0,
        bit_error_rate: 0.0,
        achieved_rate_bps: if elapsed_us > 0 {
            crate::sensor::event_rate(sent * payload_length, elapsed_us)
        } else {
            0.0
        },
        lost_count: sent.saturating_sub(detected),
        mismatched_length: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pkt(seed: u64) -> Bits {
        (0..64).map(|i| crate::sensor::mix64(seed * 64 + i) & 1 == 1).collect()
    }

    #[test]
    fn hamming_examples() {
        let a = pkt(1);
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        let mut b = a.clone();
        b[10] = !b[10];
        assert_eq!(hamming(&a, &b).unwrap(), 1);
        let c: Bits = a.iter().map(|x| !x).collect();
        assert_eq!(hamming(&a, &c).unwrap(), 64);
        assert!(matches!(hamming(&a, &a[..3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn perfect_link() {
        let sent: Vec<Bits> = (0..10).map(pkt).collect();
        let r = evaluate_link(&sent, &sent, 1_000_000).unwrap();
        assert_eq!((r.packet_error_rate, r.bit_error_rate, r.max_hamming), (0.0, 0.0, 0));
        assert_relative_eq!(r.achieved_rate_bps, 640.0);
    }

    #[test]
    fn lost_packets_hit_per_only() {
        let sent: Vec<Bits> = (0..100).map(pkt).collect();
        let r = evaluate_link(&sent, &sent[..98], 1_000_000).unwrap();
        assert_relative_eq!(r.packet_error_rate, 0.02);
        assert_eq!(r.bit_error_rate, 0.0);
        assert_eq!(r.avg_hamming, 0.0);
        assert_eq!(r.lost_count, 2);
    }

    #[test]
    fn one_flip() {
        let sent = vec![pkt(3)];
        let mut got = sent.clone();
        got[0][0] = !got[0][0];
        let r = evaluate_link(&sent, &got, 1000).unwrap();
        assert_eq!(r.packet_error_rate, 1.0);
        assert_relative_eq!(r.bit_error_rate, 1.0 / 64.0);
    }

    #[test]
    fn short_packets_are_flagged() {
        let sent = vec![pkt(4)];
        let got = vec![sent[0][..60].to_vec()];
        let r = evaluate_link(&sent, &got, 1000).unwrap();
        assert_eq!((r.packet_error_rate, r.mismatched_length, r.max_hamming), (1.0, 1, 0));
        assert!(evaluate_link(&[], &got, 1000).is_err());
    }

    #[test]
    fn json_field_names() {
        let r = evaluate_link(&[pkt(0)], &[], 1000).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for k in LinkReport::CSV_HEADER {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(r.lost_count, 1);
    }

    proptest! {
        #[test]
        fn report_bounds(n in 1usize..12, m in 0usize..14, flips in proptest::collection::vec(0usize..64, 0..30), cut in proptest::option::of(1usize..64)) {
            let sent: Vec<Bits> = (0..n as u64).map(pkt).collect();
            let mut got: Vec<Bits> = (0..m as u64).map(pkt).collect();
            for (k, f) in flips.iter().enumerate() {
                if let Some(p) = got.get_mut(k % m.max(1)) {
                    p[*f] = !p[*f];
                }
            }
            if let (Some(c), Some(p)) = (cut, got.first_mut()) {
                p.truncate(c);
            }
            let r = evaluate_link(&sent, &got, 5000).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.packet_error_rate));
            prop_assert!((0.0..=1.0).contains(&r.bit_error_rate));
            prop_assert!(r.max_hamming as f64 >= r.avg_hamming && r.avg_hamming >= 0.0);
            prop_assert!(r.bit_error_rate <= r.max_hamming as f64 / 64.0 + 1e-12);
            if r.packet_error_rate == 0.0 {
                prop_assert!(r.bit_error_rate == 0.0 && r.max_hamming == 0);
            }
        }
    }
}
