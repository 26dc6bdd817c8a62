//! Offline rule-based utterance parser.
//!
//! Utterances are lower-cased and tokenized; a small lexicon maps synonyms to
//! intents ("sit down" -> sit, "go"/"walk"/"move" -> move), number words and
//! digits to values, and unit words to metres or seconds. A trailing or
//! leading "in/after N <time unit>" wraps the rest of the utterance in a
//! schedule.

use crate::intent::{Direction, Intent, StatusTopic, MAX_MOVE_M};

/// Why the grammar could not produce an intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoMatch;

const MOTION_VERBS: &[&str] = &[
    "move", "go", "walk", "step", "head", "drive", "run", "come", "travel", "proceed", "back",
];
const SIT_WORDS: &[&str] = &["sit", "seat", "crouch"];
const STAND_WORDS: &[&str] = &["stand", "rise", "getup"];
const LIGHT_WORDS: &[&str] = &[
    "light",
    "lights",
    "lamp",
    "lamps",
    "flashlight",
    "torch",
    "headlights",
];
const ON_WORDS: &[&str] = &["on", "enable", "activate"];
const OFF_WORDS: &[&str] = &["off", "disable", "deactivate", "kill"];
const RECORD_VERBS: &[&str] = &[
    "remember", "save", "record", "mark", "store", "memorize", "bookmark",
];
const PLACE_WORDS: &[&str] = &["location", "position", "spot", "place", "point", "here"];
const RETURN_VERBS: &[&str] = &[
    "return", "go", "head", "navigate", "walk", "move", "come", "travel",
];
const FILLER: &[&str] = &[
    "the", "a", "an", "my", "our", "your", "this", "that", "please", "now", "to", "by", "of",
];

pub(crate) const BATTERY_WORDS: &[&str] = &[
    "battery",
    "charge",
    "charged",
    "power",
    "percent",
    "percentage",
];
pub(crate) const SENSOR_WORDS: &[&str] = &[
    "sensor",
    "sensors",
    "temperature",
    "temp",
    "gas",
    "signal",
    "reading",
    "readings",
    "ppm",
];
pub(crate) const TASK_WORDS: &[&str] = &[
    "task", "tasks", "doing", "working", "job", "busy", "mission", "idle",
];
pub(crate) const ERROR_WORDS: &[&str] = &[
    "error", "errors", "fault", "faults", "problem", "problems", "wrong", "issue", "issues",
    "estop",
];
const OVERALL_WORDS: &[&str] = &["status", "report", "state", "update", "summary", "overview"];

/// Splits an utterance into lowercase word and number tokens. Apostrophes
/// are dropped ("what's" -> "whats"); digits glued to units are separated
/// ("2m" -> "2", "m").
pub fn tokenize(utterance: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let cleaned: String = utterance
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .flat_map(char::to_lowercase)
        .collect();
    for raw in cleaned.split(|c: char| !(c.is_alphanumeric() || c == '.')) {
        let word = raw.trim_matches('.');
        if word.is_empty() {
            continue;
        }
        let split = word
            .find(|c: char| !(c.is_ascii_digit() || c == '.'))
            .filter(|&i| i > 0 && word[..i].parse::<f64>().is_ok());
        match split {
            Some(i) => {
                tokens.push(word[..i].to_string());
                tokens.push(word[i..].replace('.', ""));
            }
            None if word.parse::<f64>().is_ok() => tokens.push(word.to_string()),
            None => tokens.push(word.replace('.', "")),
        }
    }
    // "get up" -> one token so it cannot read as a direction-less move
    let mut merged = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "get" && tokens.get(i + 1).is_some_and(|t| t == "up") {
            merged.push("getup".to_string());
            i += 2;
        } else {
            merged.push(std::mem::take(&mut tokens[i]));
            i += 1;
        }
    }
    merged
}

fn small_number(word: &str) -> Option<f64> {
    const UNITS: [&str; 20] = [
        "zero",
        "one",
        "two",
        "three",
        "four",
        "five",
        "six",
        "seven",
        "eight",
        "nine",
        "ten",
        "eleven",
        "twelve",
        "thirteen",
        "fourteen",
        "fifteen",
        "sixteen",
        "seventeen",
        "eighteen",
        "nineteen",
    ];
    const TENS: [&str; 8] = [
        "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    ];
    if let Some(i) = UNITS.iter().position(|u| *u == word) {
        return Some(i as f64);
    }
    TENS.iter()
        .position(|t| *t == word)
        .map(|i| (i as f64 + 2.0) * 10.0)
}

/// Reads a number starting at `i`: digits, number words ("twenty five"),
/// "a"/"an" (one), "half", "a hundred". Returns the value and tokens used.
fn number_at(tokens: &[String], i: usize) -> Option<(f64, usize)> {
    let tok = tokens.get(i)?.as_str();
    if let Ok(v) = tok.parse::<f64>() {
        return v.is_finite().then_some((v, 1));
    }
    let next = tokens.get(i + 1).map(String::as_str);
    match tok {
        "a" | "an" => {
            if next == Some("hundred") {
                return Some((100.0, 2));
            }
            if next == Some("half") {
                return Some((0.5, 2));
            }
            return Some((1.0, 1));
        }
        "half" => {
            let used = if matches!(next, Some("a" | "an")) {
                2
            } else {
                1
            };
            return Some((0.5, used));
        }
        _ => {}
    }
    let mut value = small_number(tok)?;
    let mut used = 1;
    if value >= 20.0 && value % 10.0 == 0.0 {
        if let Some(unit) = next
            .and_then(small_number)
            .filter(|u| *u > 0.0 && *u < 10.0)
        {
            value += unit;
            used += 1;
        }
    }
    if tokens.get(i + used).is_some_and(|t| t == "hundred") {
        value *= 100.0;
        used += 1;
    }
    Some((value, used))
}

fn distance_unit(word: &str) -> Option<f64> {
    match word {
        "m" | "meter" | "meters" | "metre" | "metres" | "mtr" | "mtrs" => Some(1.0),
        "cm" | "centimeter" | "centimeters" | "centimetre" | "centimetres" => Some(0.01),
        _ => None,
    }
}

fn time_unit(word: &str) -> Option<f64> {
    match word {
        "s" | "sec" | "secs" | "second" | "seconds" => Some(1.0),
        "min" | "mins" | "minute" | "minutes" => Some(60.0),
        "h" | "hr" | "hrs" | "hour" | "hours" => Some(3600.0),
        _ => None,
    }
}

fn direction(word: &str) -> Option<Direction> {
    match word {
        "forward" | "forwards" | "ahead" | "straight" | "front" | "onward" => {
            Some(Direction::Forward)
        }
        "back" | "backward" | "backwards" | "reverse" | "behind" => Some(Direction::Backward),
        "left" => Some(Direction::Left),
        "right" => Some(Direction::Right),
        _ => None,
    }
}

fn has_any(tokens: &[String], words: &[&str]) -> bool {
    tokens.iter().any(|t| words.contains(&t.as_str()))
}

fn has_seq(tokens: &[String], seq: &[&str]) -> bool {
    tokens
        .windows(seq.len())
        .any(|w| w.iter().zip(seq).all(|(a, b)| a == b))
}

fn label_from(tokens: &[String]) -> Option<String> {
    let words: Vec<&str> = tokens
        .iter()
        .map(String::as_str)
        .skip_while(|t| FILLER.contains(t))
        .filter(|t| *t != "please")
        .collect();
    let label = words.join(" ");
    (!label.is_empty()).then_some(label)
}

/// Finds "in/after N <time unit>" (optionally "from now") and returns the
/// delay in seconds along with the remaining tokens.
fn split_schedule(tokens: &[String]) -> Option<(f64, Vec<String>)> {
    for i in 0..tokens.len() {
        let lead = tokens[i].as_str();
        let starts = matches!(lead, "in" | "after");
        let start = if starts { i + 1 } else { i };
        let Some((n, used)) = number_at(tokens, start) else {
            continue;
        };
        let Some(unit) = tokens.get(start + used).and_then(|t| time_unit(t)) else {
            continue;
        };
        let mut end = start + used + 1;
        let from_now = tokens.get(end).is_some_and(|t| t == "from")
            && tokens.get(end + 1).is_some_and(|t| t == "now");
        if !starts && !from_now {
            continue;
        }
        if from_now {
            end += 2;
        }
        let mut rest: Vec<String> = tokens[..i].to_vec();
        rest.extend_from_slice(&tokens[end..]);
        rest.retain(|t| !matches!(t.as_str(), "schedule" | "then" | "and" | "wait"));
        return Some((n * unit, rest));
    }
    None
}

fn parse_capabilities(tokens: &[String]) -> Option<Intent> {
    let asks = has_any(
        tokens,
        &[
            "capabilities",
            "capability",
            "help",
            "commands",
            "abilities",
        ],
    ) || has_seq(tokens, &["what", "can", "you", "do"])
        || has_seq(tokens, &["what", "can", "i", "say"])
        || has_seq(tokens, &["what", "can", "i", "ask"])
        || has_seq(tokens, &["what", "are", "you", "able"]);
    asks.then_some(Intent::QueryCapabilities)
}

fn parse_record(tokens: &[String]) -> Option<Intent> {
    if !has_any(tokens, RECORD_VERBS) || !has_any(tokens, PLACE_WORDS) {
        return None;
    }
    let after = tokens
        .iter()
        .position(|t| matches!(t.as_str(), "as" | "called" | "named"))
        .or_else(|| {
            tokens
                .iter()
                .rposition(|t| PLACE_WORDS.contains(&t.as_str()))
        })?;
    let label = label_from(&tokens[after + 1..])?;
    Some(Intent::RecordLocation { label })
}

fn parse_move(tokens: &[String]) -> Option<Intent> {
    let verb = has_any(tokens, MOTION_VERBS);
    let dir = tokens.iter().find_map(|t| direction(t));
    if !verb && dir.is_none() {
        return None;
    }
    let mut distance = None;
    let mut i = 0;
    while i < tokens.len() {
        // "a"/"an" alone only counts as a number before a unit ("a meter")
        if let Some((n, used)) = number_at(tokens, i) {
            let unit = tokens.get(i + used).and_then(|t| distance_unit(t));
            // a bare number needs an explicit direction: "move forward 2"
            let bare_ok = dir.is_some() && !matches!(tokens[i].as_str(), "a" | "an" | "half");
            match unit {
                Some(u) => {
                    distance = Some(n * u);
                    break;
                }
                None if bare_ok && tokens.get(i + used).is_none_or(|t| time_unit(t).is_none()) => {
                    distance = Some(n);
                    break;
                }
                None => {}
            }
            i += used;
        } else {
            i += 1;
        }
    }
    let distance_m = distance?;
    if !(distance_m > 0.0 && distance_m <= MAX_MOVE_M) {
        return None;
    }
    Some(Intent::Move {
        distance_m,
        direction: dir.unwrap_or(Direction::Forward),
    })
}

fn parse_return(tokens: &[String]) -> Option<Intent> {
    let to = tokens.iter().position(|t| t == "to")?;
    let verb_before = tokens[..to]
        .iter()
        .any(|t| RETURN_VERBS.contains(&t.as_str()) || t == "back");
    if !verb_before {
        return None;
    }
    let label = label_from(&tokens[to + 1..])?;
    if direction(&label).is_some() {
        return None;
    }
    Some(Intent::ReturnTo { label })
}

fn parse_lights(tokens: &[String]) -> Option<Intent> {
    if !has_any(tokens, LIGHT_WORDS) {
        return None;
    }
    let on = has_any(tokens, ON_WORDS);
    let off = has_any(tokens, OFF_WORDS);
    match (on, off) {
        (true, false) => Some(Intent::Lights { on: true }),
        (false, true) => Some(Intent::Lights { on: false }),
        _ => None,
    }
}

fn parse_posture(tokens: &[String]) -> Option<Intent> {
    let sit = has_any(tokens, SIT_WORDS);
    let stand = has_any(tokens, STAND_WORDS);
    match (sit, stand) {
        (true, false) => Some(Intent::Sit),
        (false, true) => Some(Intent::Stand),
        _ => None,
    }
}

fn parse_query(tokens: &[String]) -> Option<Intent> {
    let topics = [
        (StatusTopic::Battery, BATTERY_WORDS),
        (StatusTopic::Sensors, SENSOR_WORDS),
        (StatusTopic::Tasks, TASK_WORDS),
        (StatusTopic::Errors, ERROR_WORDS),
    ];
    let hits: Vec<StatusTopic> = topics
        .iter()
        .filter(|(_, words)| has_any(tokens, words))
        .map(|(t, _)| *t)
        .collect();
    let topic = match hits.as_slice() {
        [] if has_any(tokens, OVERALL_WORDS) || has_seq(tokens, &["how", "are", "you"]) => {
            StatusTopic::All
        }
        [] => return None,
        [one] => *one,
        _ => StatusTopic::All,
    };
    Some(Intent::QueryStatus { topic })
}

fn parse_plain(tokens: &[String]) -> Option<Intent> {
    parse_capabilities(tokens)
        .or_else(|| parse_record(tokens))
        .or_else(|| parse_lights(tokens))
        .or_else(|| parse_return(tokens))
        .or_else(|| parse_move(tokens))
        .or_else(|| parse_posture(tokens))
        .or_else(|| parse_query(tokens))
}

/// Parses an utterance into an intent. Pure and total.
pub fn parse_intent_grammar(utterance: &str) -> Result<Intent, NoMatch> {
    let tokens = tokenize(utterance);
    if tokens.is_empty() {
        return Err(NoMatch);
    }
    if let Some((delay, rest)) = split_schedule(&tokens) {
        if delay.fract() != 0.0 || delay < 1.0 || delay > f64::from(u32::MAX) {
            return Err(NoMatch);
        }
        let inner = parse_plain(&rest).ok_or(NoMatch)?;
        let intent = Intent::Schedule {
            inner: Box::new(inner),
            delay_s: delay as u32,
        };
        return intent.validate().map(|_| intent).map_err(|_| NoMatch);
    }
    let intent = parse_plain(&tokens).ok_or(NoMatch)?;
    intent.validate().map(|_| intent).map_err(|_| NoMatch)
}
