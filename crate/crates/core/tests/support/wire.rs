//! Status wire format checks.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use supervisor_core::bus::{decode_status, encode_status, DecodeError, StatusMessage};
use supervisor_core::status::SensorReading;
use supervisor_core::RobotStatus;

use super::gen::{rng, status};

fn text(rng: &mut ChaCha8Rng, min: usize) -> String {
    const ALPHABET: &[&str] = &[
        "a", "z", "_", "-", "0", "9", " ", "\"", "\\", "\n", "é", "ß", "漢", "🤖", "\u{7f}", "\t",
    ];
    let n = rng.random_range(min..=12);
    (0..n).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

/// A valid status with adversarial strings and extreme numbers.
pub fn message(rng: &mut ChaCha8Rng) -> StatusMessage {
    let mut s: RobotStatus = status(rng, "x", 0);
    s.robot_id = text(rng, 1);
    s.timestamp_ms = match rng.random_range(0..3) {
        0 => u64::MAX - rng.random_range(0..1000),
        _ => rng.random(),
    };
    s.battery_pct = *[
        0.0,
        100.0,
        1e-300,
        99.999_999_999_999,
        rng.random_range(0.0..=100.0),
    ]
    .choose(rng)
    .unwrap();
    s.heading_deg = *[0.0, 359.999_999_999, rng.random_range(0.0..360.0)]
        .choose(rng)
        .unwrap();
    s.errors = (0..rng.random_range(0..4)).map(|_| text(rng, 0)).collect();
    if s.current_task.is_some() {
        s.current_task = Some(text(rng, 0));
    }
    if rng.random_bool(0.3) {
        s.sensors.insert(
            text(rng, 0),
            SensorReading {
                value: *[f64::MAX, f64::MIN_POSITIVE, -0.0, 1e-7]
                    .choose(rng)
                    .unwrap(),
                unit: text(rng, 0),
            },
        );
    }
    StatusMessage::new(s)
}

/// decode(encode(m)) == m for `count` generated messages; encoding is also a
/// fixed point of decode-then-encode.
pub fn round_trip(count: u64) -> Result<(), String> {
    let mut rng = rng(0x5eed);
    for i in 0..count {
        let m = message(&mut rng);
        let bytes = encode_status(&m);
        if bytes.last() != Some(&b'\n') || bytes[..bytes.len() - 1].contains(&b'\n') {
            return Err(format!("message {i}: frame is not a single line"));
        }
        let back = decode_status(&bytes).map_err(|e| format!("message {i}: {e}"))?;
        if back != m {
            return Err(format!("message {i}: {m:?} decoded as {back:?}"));
        }
        if encode_status(&back) != bytes {
            return Err(format!("message {i}: encoding is not canonical"));
        }
    }
    Ok(())
}

fn mutate(rng: &mut ChaCha8Rng, mut line: Vec<u8>) -> Vec<u8> {
    match rng.random_range(0..7) {
        0 => {
            let n = rng.random_range(0..=line.len());
            line.truncate(n);
        }
        1 => {
            for _ in 0..rng.random_range(1..4) {
                let i = rng.random_range(0..line.len());
                line[i] = rng.random();
            }
        }
        2 => {
            let i = rng.random_range(0..line.len());
            let junk: Vec<u8> = (0..rng.random_range(1..8)).map(|_| rng.random()).collect();
            line.splice(i..i, junk);
        }
        3 => {
            let text = String::from_utf8_lossy(&line).into_owned();
            let field = *[
                "robot_id",
                "timestamp_ms",
                "battery_pct",
                "estop_enabled",
                "errors",
                "current_task",
                "idle",
                "sensors",
                "position",
                "heading_deg",
                "lights_on",
                "payload",
                "schema_version",
            ]
            .choose(rng)
            .unwrap();
            line = text
                .replacen(&format!("\"{field}\""), "\"renamed\"", 1)
                .into_bytes();
        }
        4 => {
            let text = String::from_utf8_lossy(&line).into_owned();
            let v = *[
                "0",
                "2",
                "-1",
                "1.5",
                "\"1\"",
                "null",
                "99999999999999999999",
            ]
            .choose(rng)
            .unwrap();
            line = text
                .replacen(
                    "\"schema_version\":1",
                    &format!("\"schema_version\":{v}"),
                    1,
                )
                .into_bytes();
        }
        5 => {
            let text = String::from_utf8_lossy(&line).into_owned();
            let v = *["-1", "100.5", "1e400", "\"full\"", "null", "[]"]
                .choose(rng)
                .unwrap();
            let start = text.find("\"battery_pct\":").map(|i| i + 14).unwrap_or(0);
            let end = text[start..].find(',').map(|j| start + j).unwrap_or(start);
            line = format!("{}{v}{}", &text[..start], &text[end..]).into_bytes();
        }
        _ => {
            line = (0..rng.random_range(0..200))
                .map(|_| rng.random())
                .collect();
        }
    }
    line
}

/// Decodes `count` random and corrupted lines. Returns how many were
/// rejected. Every accepted line must satisfy the payload invariants.
pub fn decoder_fuzz(count: u64) -> Result<u64, String> {
    let mut rng = rng(0xf022);
    let mut rejected = 0;
    for i in 0..count {
        let valid = encode_status(&message(&mut rng));
        let line = mutate(&mut rng, valid);
        let outcome = std::panic::catch_unwind(|| decode_status(&line));
        match outcome {
            Err(_) => {
                return Err(format!(
                    "line {i} panicked: {:?}",
                    String::from_utf8_lossy(&line)
                ))
            }
            Ok(Ok(msg)) => {
                if let Err(e) = msg.payload.check_invariants() {
                    return Err(format!("line {i} accepted with broken invariant: {e}"));
                }
            }
            Ok(Err(
                DecodeError::Malformed(_)
                | DecodeError::MissingField(_)
                | DecodeError::Version(_)
                | DecodeError::Invariant(_),
            )) => rejected += 1,
        }
    }
    Ok(rejected)
}
