//! Corpus file formats.
//!
//! JSON: `{"dialogs": [{"id": str, "segments": [{"speaker": "user"|"system",
//! "text": str, "l1": str, "l2": [str...], "l3": [str...]}]}]}`. Label
//! strings are canonical Spanish names (English aliases accepted on input);
//! empty arrays denote Nil.
//!
//! TSV: one segment per line with columns dialog_id, position, speaker, l1,
//! l2 (comma-joined or `-` for Nil), l3 (same), text. UTF-8, tab-separated,
//! `#`-prefixed comment lines ignored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::labels::{LabelSpace, Level};
use crate::corpus::{validate, Corpus, CorpusError, Dialog, Segment, Speaker};
use crate::text::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum CorpusFormat {
    Json,
    Tsv,
}

#[derive(Serialize, Deserialize)]
struct JsonCorpus {
    dialogs: Vec<JsonDialog>,
}

#[derive(Serialize, Deserialize)]
struct JsonDialog {
    id: String,
    segments: Vec<JsonSegment>,
}

#[derive(Serialize, Deserialize)]
struct JsonSegment {
    speaker: String,
    text: String,
    l1: String,
    l2: Vec<String>,
    l3: Vec<String>,
}

fn parse_speaker(raw: &str, location: &str) -> Result<Speaker, CorpusError> {
    match raw.trim().to_lowercase().as_str() {
        "user" => Ok(Speaker::User),
        "system" => Ok(Speaker::System),
        other => Err(CorpusError::Parse {
            location: location.to_string(),
            message: format!("unknown speaker {other:?}"),
        }),
    }
}

fn resolve_label(
    space: &LabelSpace,
    level: Level,
    name: &str,
    location: &str,
) -> Result<usize, CorpusError> {
    space
        .resolve(level, name)
        .ok_or_else(|| CorpusError::UnknownLabel {
            level,
            name: name.to_string(),
            location: location.to_string(),
        })
}

/// Resolves a label-name list into sorted unique indices. Repeated names
/// denote the same set member and collapse silently.
fn resolve_set(
    space: &LabelSpace,
    level: Level,
    names: &[String],
    location: &str,
) -> Result<Vec<usize>, CorpusError> {
    let mut indices = Vec::with_capacity(names.len());
    for name in names {
        indices.push(resolve_label(space, level, name, location)?);
    }
    indices.sort_unstable();
    indices.dedup();
    Ok(indices)
}

fn check_segment(seg: &Segment, space: &LabelSpace, location: &str) -> Result<(), CorpusError> {
    if space.is_gate(seg.l1) && (!seg.l2.is_empty() || !seg.l3.is_empty()) {
        return Err(CorpusError::GateViolation {
            location: location.to_string(),
            l1: space.name(Level::L1, seg.l1).to_string(),
        });
    }
    if tokenize(&seg.text).is_empty() {
        return Err(CorpusError::EmptyText {
            location: location.to_string(),
        });
    }
    Ok(())
}

pub fn parse_json(content: &str) -> Result<Corpus, CorpusError> {
    let space = LabelSpace::canonical();
    let raw: JsonCorpus = serde_json::from_str(content).map_err(|e| CorpusError::Parse {
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    let mut dialogs = Vec::with_capacity(raw.dialogs.len());
    for d in raw.dialogs {
        let mut segments = Vec::with_capacity(d.segments.len());
        for (position, s) in d.segments.into_iter().enumerate() {
            let location = format!("dialog {} segment {position}", d.id);
            let seg = Segment {
                dialog_id: d.id.clone(),
                position,
                speaker: parse_speaker(&s.speaker, &location)?,
                text: s.text,
                l1: resolve_label(space, Level::L1, &s.l1, &location)?,
                l2: resolve_set(space, Level::L2, &s.l2, &location)?,
                l3: resolve_set(space, Level::L3, &s.l3, &location)?,
            };
            check_segment(&seg, space, &location)?;
            segments.push(seg);
        }
        dialogs.push(Dialog { id: d.id, segments });
    }
    finish(Corpus::new(dialogs))
}

pub fn to_json(corpus: &Corpus) -> String {
    let space = corpus.label_space;
    let raw = JsonCorpus {
        dialogs: corpus
            .dialogs
            .iter()
            .map(|d| JsonDialog {
                id: d.id.clone(),
                segments: d
                    .segments
                    .iter()
                    .map(|s| JsonSegment {
                        speaker: match s.speaker {
                            Speaker::User => "user".into(),
                            Speaker::System => "system".into(),
                        },
                        text: s.text.clone(),
                        l1: space.name(Level::L1, s.l1).to_string(),
                        l2: s.l2.iter().map(|&i| space.name(Level::L2, i).to_string()).collect(),
                        l3: s.l3.iter().map(|&i| space.name(Level::L3, i).to_string()).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("corpus serialization")
}

const NIL_FIELD: &str = "-";

pub fn parse_tsv(content: &str) -> Result<Corpus, CorpusError> {
    let space = LabelSpace::canonical();
    // dialog order follows first appearance; segments sorted by position
    let mut dialogs: Vec<Dialog> = Vec::new();
    for (line_no, line) in content.lines().enumerate() {
        let location = format!("line {}", line_no + 1);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(CorpusError::Parse {
                location,
                message: format!("expected 7 tab-separated columns, found {}", fields.len()),
            });
        }
        let dialog_id = fields[0].to_string();
        let position: usize = fields[1].parse().map_err(|_| CorpusError::Parse {
            location: location.clone(),
            message: format!("bad position {:?}", fields[1]),
        })?;
        let parse_set = |field: &str, level: Level| -> Result<Vec<usize>, CorpusError> {
            let trimmed = field.trim();
            if trimmed == NIL_FIELD
                || trimmed.eq_ignore_ascii_case("nulo")
                || trimmed.eq_ignore_ascii_case("nil")
            {
                return Ok(Vec::new());
            }
            let names: Vec<String> = trimmed.split(',').map(|s| s.trim().to_string()).collect();
            resolve_set(space, level, &names, &location)
        };
        let seg = Segment {
            dialog_id: dialog_id.clone(),
            position,
            speaker: parse_speaker(fields[2], &location)?,
            text: fields[6].to_string(),
            l1: resolve_label(space, Level::L1, fields[3], &location)?,
            l2: parse_set(fields[4], Level::L2)?,
            l3: parse_set(fields[5], Level::L3)?,
        };
        check_segment(&seg, space, &location)?;
        match dialogs.iter_mut().find(|d| d.id == dialog_id) {
            Some(d) => d.segments.push(seg),
            None => dialogs.push(Dialog {
                id: dialog_id,
                segments: vec![seg],
            }),
        }
    }
    for d in &mut dialogs {
        d.segments.sort_by_key(|s| s.position);
    }
    finish(Corpus::new(dialogs))
}

pub fn to_tsv(corpus: &Corpus) -> String {
    let space = corpus.label_space;
    let mut out = String::from("# dialog_id\tposition\tspeaker\tl1\tl2\tl3\ttext\n");
    for seg in corpus.segments() {
        let join = |level: Level, set: &[usize]| -> String {
            if set.is_empty() {
                NIL_FIELD.to_string()
            } else {
                set.iter()
                    .map(|&i| space.name(level, i))
                    .collect::<Vec<_>>()
                    .join(",")
            }
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            seg.dialog_id,
            seg.position,
            match seg.speaker {
                Speaker::User => "user",
                Speaker::System => "system",
            },
            space.name(Level::L1, seg.l1),
            join(Level::L2, &seg.l2),
            join(Level::L3, &seg.l3),
            seg.text,
        ));
    }
    out
}

/// Runs the full validator over a freshly parsed corpus so loaders only ever
/// hand out well-formed data.
fn finish(corpus: Corpus) -> Result<Corpus, CorpusError> {
    let violations = validate(&corpus);
    if let Some(first) = violations.first() {
        return Err(CorpusError::Invalid(
            violations.len(),
            format!("{} at {}", first.message, first.location),
        ));
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        CorpusFormat::Json => parse_json(&content),
        CorpusFormat::Tsv => parse_tsv(&content),
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let content = match format {
        CorpusFormat::Json => to_json(corpus),
        CorpusFormat::Tsv => to_tsv(corpus),
    };
    fs::write(path, content).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_JSON: &str = r#"{
      "dialogs": [
        {
          "id": "d1",
          "segments": [
            {"speaker": "system", "text": "Bienvenido al servicio", "l1": "Apertura", "l2": [], "l3": []},
            {"speaker": "user", "text": "Quería ir a La Coruña", "l1": "Pregunta", "l2": ["Hora Salida"], "l3": ["Destino"]}
          ]
        }
      ]
    }"#;

    #[test]
    fn json_load_resolves_labels() {
        let corpus = parse_json(SAMPLE_JSON).unwrap();
        assert_eq!(corpus.dialogs.len(), 1);
        assert_eq!(corpus.segment_count(), 2);
        let seg = &corpus.dialogs[0].segments[0];
        assert_eq!(seg.speaker, Speaker::System);
        assert_eq!(corpus.label_space.name(Level::L1, seg.l1), "Apertura");
        assert!(seg.l2.is_empty() && seg.l3.is_empty());
        let seg = &corpus.dialogs[0].segments[1];
        assert_eq!(corpus.label_space.name(Level::L2, seg.l2[0]), "Hora Salida");
    }

    #[test]
    fn json_accepts_english_aliases() {
        let aliased = SAMPLE_JSON
            .replace("Apertura", "Opening")
            .replace("Hora Salida", "Departure Time")
            .replace("\"Destino\"", "\"Destination\"");
        let corpus = parse_json(&aliased).unwrap();
        let seg = &corpus.dialogs[0].segments[0];
        assert_eq!(corpus.label_space.name(Level::L1, seg.l1), "Apertura");
    }

    #[test]
    fn empty_dialog_list_is_valid() {
        let corpus = parse_json(r#"{"dialogs": []}"#).unwrap();
        assert_eq!(corpus.dialogs.len(), 0);
    }

    #[test]
    fn unknown_label_is_reported_with_location() {
        let bad = SAMPLE_JSON.replace("Pregunta", "Preguntón");
        match parse_json(&bad) {
            Err(CorpusError::UnknownLabel { name, location, .. }) => {
                assert_eq!(name, "Preguntón");
                assert!(location.contains("segment 1"), "{location}");
            }
            other => panic!("expected UnknownLabel, got {other:?}"),
        }
    }

    #[test]
    fn gate_violation_is_rejected_at_load() {
        let bad = r#"{"dialogs": [{"id": "d", "segments": [
            {"speaker": "system", "text": "un momento", "l1": "Espera", "l2": ["Precio"], "l3": []}
        ]}]}"#;
        assert!(matches!(
            parse_json(bad),
            Err(CorpusError::GateViolation { .. })
        ));
    }

    #[test]
    fn malformed_json_reports_parse_error() {
        assert!(matches!(
            parse_json("{\"dialogs\": ["),
            Err(CorpusError::Parse { .. })
        ));
    }

    #[test]
    fn tsv_round_trip_preserves_corpus() {
        let corpus = parse_json(SAMPLE_JSON).unwrap();
        let tsv = to_tsv(&corpus);
        let back = parse_tsv(&tsv).unwrap();
        assert_eq!(corpus.dialogs, back.dialogs);
    }

    #[test]
    fn json_round_trip_preserves_corpus() {
        let corpus = parse_json(SAMPLE_JSON).unwrap();
        let back = parse_json(&to_json(&corpus)).unwrap();
        assert_eq!(corpus.dialogs, back.dialogs);
    }

    #[test]
    fn tsv_parses_comments_nil_and_multi_labels() {
        let tsv = "# comment\nd1\t0\tuser\tPregunta\tHora Salida,Precio\t-\t¿cuánto vale el tren?\n";
        let corpus = parse_tsv(tsv).unwrap();
        let seg = &corpus.dialogs[0].segments[0];
        assert_eq!(seg.l2.len(), 2);
        assert!(seg.l3.is_empty());
    }

    #[test]
    fn tsv_wrong_column_count_reports_line() {
        let tsv = "d1\t0\tuser\tPregunta\t-\t-\n";
        match parse_tsv(tsv) {
            Err(CorpusError::Parse { location, .. }) => assert_eq!(location, "line 1"),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_labels_in_record_collapse_to_a_set() {
        let tsv = "d1\t0\tuser\tPregunta\tPrecio,Precio\t-\tvale cuánto es\n";
        let corpus = parse_tsv(tsv).unwrap();
        assert_eq!(corpus.dialogs[0].segments[0].l2.len(), 1);
    }

    #[test]
    fn position_gap_in_tsv_fails_validation() {
        let tsv = "d1\t0\tuser\tPregunta\t-\t-\thola tren\nd1\t2\tuser\tPregunta\t-\t-\totra cosa\n";
        assert!(matches!(parse_tsv(tsv), Err(CorpusError::Invalid(..))));
    }
}
