//! Seeded synthetic corpus generator.
//!
//! Desk-scale stand-in data with deterministic lexical triggers: every L1
//! label carries a distinct multi-word template, and every non-Nil L2/L3
//! label plants at least one trigger word, so a correct learner can recover
//! the labels from the surface tokens. Two optional constructions break that
//! per-segment recoverability to make dialog context matter instead:
//!
//! - `ambiguous_l1_fraction` makes a share of Question/Answer segments use a
//!   shared template; their true L1 is a function of the previous segment's
//!   L1 (an answer follows a question, otherwise a question).
//! - `copy_l2_to_answers` forces the segment after every Question to be an
//!   Answer whose L2 set is copied from the question and whose own text
//!   carries no L2 triggers, mirroring the question-answer pairing that
//!   makes preceding-segment labels an important cue.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::labels::{LabelSpace, Level};
use crate::corpus::{Corpus, CorpusError, Dialog, Segment, Speaker};
use crate::neural::RandomSource;

/// Keyword-to-label lexicon. Each L1 label maps to a distinct segment
/// template; each non-Nil L2/L3 label maps to at least one trigger word.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lexicon {
    pub l1_templates: BTreeMap<String, Vec<String>>,
    pub l2_triggers: BTreeMap<String, Vec<String>>,
    pub l3_triggers: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub fillers: Vec<String>,
    /// Template shared by ambiguous Question/Answer segments.
    #[serde(default = "default_ambiguous_template")]
    pub ambiguous_template: Vec<String>,
}

fn default_ambiguous_template() -> Vec<String> {
    ["acerca", "del", "tema"].iter().map(|w| w.to_string()).collect()
}

impl Default for Lexicon {
    fn default() -> Lexicon {
        let words = |list: &[&str]| list.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        let mut l1_templates = BTreeMap::new();
        for (label, template) in [
            ("Pregunta", vec!["quería", "consultar"]),
            ("Respuesta", vec!["resulta", "lo", "siguiente"]),
            ("Confirmación", vec!["confirma", "usted"]),
            ("Nueva Consulta", vec!["desea", "algo", "más"]),
            ("Espera", vec!["momento", "espere"]),
            ("Cierre", vec!["gracias", "adiós"]),
            ("Afirmación", vec!["sí", "exacto"]),
            ("Apertura", vec!["bienvenido", "al", "servicio"]),
            ("No Entendido", vec!["disculpe", "repita"]),
            ("Negación", vec!["no", "negativo"]),
            ("Indefinida", vec!["mmm", "esto"]),
        ] {
            l1_templates.insert(label.to_string(), words(&template));
        }
        let mut l2_triggers = BTreeMap::new();
        for (label, trigger) in [
            ("Hora Salida", "salida"),
            ("Precio", "cuesta"),
            ("Día", "fecha"),
            ("Origen", "procedencia"),
            ("Destino", "rumbo"),
            ("Tipo Tren", "modelo"),
            ("Hora Llegada", "llegada"),
            ("Tiempo Recorrido", "duración"),
            ("Clase Billete", "clase"),
            ("Servicio", "prestación"),
        ] {
            l2_triggers.insert(label.to_string(), vec![trigger.to_string()]);
        }
        let mut l3_triggers = BTreeMap::new();
        for (label, trigger) in [
            ("Destino", "coruña"),
            ("Día", "lunes"),
            ("Origen", "bilbao"),
            ("Hora Salida", "madrugada"),
            ("Número Trenes", "cuántos"),
            ("Tipo Tren", "diurno"),
            ("Número Orden", "primero"),
            ("Clase Billete", "turista"),
            ("Precio", "euros"),
            ("Hora Llegada", "tarde"),
            ("Tipo Viaje", "vuelta"),
            ("Servicio", "cafetería"),
            ("Tiempo Recorrido", "horas"),
        ] {
            l3_triggers.insert(label.to_string(), vec![trigger.to_string()]);
        }
        Lexicon {
            l1_templates,
            l2_triggers,
            l3_triggers,
            fillers: words(&["eh", "pues", "vale", "bien", "mire", "oiga"]),
            ambiguous_template: words(&["acerca", "del", "tema"]),
        }
    }
}

/// Generator parameters. Label marginals default to the corpus distribution
/// reported for the real data; weights need not be normalized.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub dialogs: usize,
    pub mean_segments: f64,
    /// L1 marginal weights keyed by label name; `None` uses the defaults.
    pub l1_marginals: Option<BTreeMap<String, f64>>,
    pub l2_marginals: Option<BTreeMap<String, f64>>,
    pub l3_marginals: Option<BTreeMap<String, f64>>,
    /// Probability that a non-gate segment has an empty L2 set.
    pub l2_nil_rate: f64,
    /// Probability that a non-gate segment has an empty L3 set.
    pub l3_nil_rate: f64,
    /// Fraction of Question/Answer segments rendered with the shared
    /// template, their L1 decidable only from the previous segment.
    pub ambiguous_l1_fraction: f64,
    /// Force an Answer with the copied L2 set after every Question.
    pub copy_l2_to_answers: bool,
    /// Probability that an individual L2/L3 trigger word is omitted from
    /// the surface text. Zero keeps every label lexically recoverable;
    /// positive values cap the attainable per-level scores.
    pub trigger_dropout: f64,
    pub lexicon: Option<Lexicon>,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            dialogs: 200,
            mean_segments: 10.0,
            l1_marginals: None,
            l2_marginals: None,
            l3_marginals: None,
            l2_nil_rate: 0.05,
            l3_nil_rate: 0.20,
            ambiguous_l1_fraction: 0.0,
            copy_l2_to_answers: false,
            trigger_dropout: 0.0,
            lexicon: None,
        }
    }
}

// Real-corpus L1 counts (user, system) in inventory order, used for default
// marginals and speaker weights.
const L1_COUNTS: [(f64, f64); 11] = [
    (5474.0, 864.0),  // Pregunta
    (1839.0, 2446.0), // Respuesta
    (0.0, 3629.0),    // Confirmación
    (0.0, 2474.0),    // Nueva Consulta
    (0.0, 1948.0),    // Espera
    (927.0, 900.0),   // Cierre
    (990.0, 0.0),     // Afirmación
    (0.0, 900.0),     // Apertura
    (4.0, 653.0),     // No Entendido
    (340.0, 0.0),     // Negación
    (141.0, 18.0),    // Indefinida
];

const L2_COUNTS: [f64; 10] = [
    7432.0, 3338.0, 1949.0, 957.0, 852.0, 543.0, 178.0, 29.0, 27.0, 8.0,
];

const L3_COUNTS: [f64; 13] = [
    3710.0, 3659.0, 2981.0, 2325.0, 1863.0, 1797.0, 1034.0, 895.0, 778.0, 689.0, 643.0, 19.0, 14.0,
];

// set-size weights for multi-label draws: 1, 2, or 3 labels
const SET_SIZE_WEIGHTS: [f64; 3] = [0.78, 0.18, 0.04];

fn marginal_weights(
    space: &LabelSpace,
    level: Level,
    overrides: &Option<BTreeMap<String, f64>>,
    defaults: &[f64],
) -> Result<Vec<f64>, CorpusError> {
    match overrides {
        None => Ok(defaults.to_vec()),
        Some(map) => {
            let mut weights = vec![0.0; space.size(level)];
            for (name, &w) in map {
                let idx = space.resolve(level, name).ok_or_else(|| {
                    CorpusError::UnknownLabel {
                        level,
                        name: name.clone(),
                        location: "synthetic config".into(),
                    }
                })?;
                weights[idx] = w;
            }
            Ok(weights)
        }
    }
}

struct Generator<'a> {
    space: &'static LabelSpace,
    lexicon: &'a Lexicon,
    config: &'a SynthConfig,
    l1_weights: Vec<f64>,
    l2_weights: Vec<f64>,
    l3_weights: Vec<f64>,
}

impl<'a> Generator<'a> {
    fn sample_set(
        &self,
        weights: &[f64],
        nil_rate: f64,
        rng: &mut RandomSource,
    ) -> Vec<usize> {
        if rng.bernoulli(nil_rate) {
            return Vec::new();
        }
        let positive = weights.iter().filter(|w| **w > 0.0).count();
        if positive == 0 {
            return Vec::new();
        }
        let size = (rng.weighted_index(&SET_SIZE_WEIGHTS) + 1).min(positive);
        let mut remaining = weights.to_vec();
        let mut set = Vec::with_capacity(size);
        for _ in 0..size {
            let idx = rng.weighted_index(&remaining);
            remaining[idx] = 0.0;
            set.push(idx);
        }
        set.sort_unstable();
        set
    }

    fn speaker_for(&self, l1: usize, rng: &mut RandomSource) -> Speaker {
        let (user, system) = L1_COUNTS[l1];
        let total = user + system;
        if total == 0.0 || rng.uniform() * total < user {
            Speaker::User
        } else {
            Speaker::System
        }
    }

    fn trigger_word<'b>(
        &self,
        triggers: &'b BTreeMap<String, Vec<String>>,
        name: &str,
        rng: &mut RandomSource,
    ) -> &'b str {
        let options = &triggers[name];
        &options[rng.below(options.len())]
    }

    /// Assembles the surface text: the L1 template as a prefix, then the
    /// trigger words and a few fillers in shuffled order.
    fn render(
        &self,
        template: &[String],
        l2: &[usize],
        l3: &[usize],
        include_l2_triggers: bool,
        rng: &mut RandomSource,
    ) -> String {
        let mut tail: Vec<&str> = Vec::new();
        let keep = |rng: &mut RandomSource| {
            self.config.trigger_dropout <= 0.0 || !rng.bernoulli(self.config.trigger_dropout)
        };
        if include_l2_triggers {
            for &idx in l2 {
                let name = self.space.name(Level::L2, idx);
                let word = self.trigger_word(&self.lexicon.l2_triggers, name, rng);
                if keep(rng) {
                    tail.push(word);
                }
            }
        }
        for &idx in l3 {
            let name = self.space.name(Level::L3, idx);
            let word = self.trigger_word(&self.lexicon.l3_triggers, name, rng);
            if keep(rng) {
                tail.push(word);
            }
        }
        if !self.lexicon.fillers.is_empty() {
            for _ in 0..rng.below(3) {
                tail.push(&self.lexicon.fillers[rng.below(self.lexicon.fillers.len())]);
            }
        }
        rng.shuffle(&mut tail);
        let mut words: Vec<&str> = template.iter().map(String::as_str).collect();
        words.extend(tail);
        words.join(" ")
    }

    fn dialog(&self, id: String, rng: &mut RandomSource) -> Dialog {
        let mean = self.config.mean_segments.max(3.0);
        let spread = (mean / 3.0).max(1.0);
        let n_segments = (mean + rng.uniform_in(-spread, spread)).round().max(3.0) as usize;
        let question = self.space.resolve(Level::L1, "Pregunta").expect("inventory");
        let answer = self.space.resolve(Level::L1, "Respuesta").expect("inventory");
        let mut segments: Vec<Segment> = Vec::with_capacity(n_segments);
        for position in 0..n_segments {
            let prev = segments.last();
            let forced_answer = self.config.copy_l2_to_answers
                && prev.map(|p: &Segment| p.l1 == question).unwrap_or(false);
            let ambiguous = !forced_answer
                && self.config.ambiguous_l1_fraction > 0.0
                && rng.bernoulli(self.config.ambiguous_l1_fraction);

            let (l1, l2, l3, text) = if forced_answer {
                let copied = prev.map(|p| p.l2.clone()).unwrap_or_default();
                let l3 = self.sample_set(&self.l3_weights, self.config.l3_nil_rate, rng);
                let template = &self.lexicon.l1_templates[self.space.name(Level::L1, answer)];
                let text = self.render(template, &copied, &l3, false, rng);
                (answer, copied, l3, text)
            } else if ambiguous {
                // the answer-follows-question rule is the only way to
                // recover the label of these segments
                let l1 = if prev.map(|p| p.l1 == question).unwrap_or(false) {
                    answer
                } else {
                    question
                };
                let l2 = self.sample_set(&self.l2_weights, self.config.l2_nil_rate, rng);
                let l3 = self.sample_set(&self.l3_weights, self.config.l3_nil_rate, rng);
                let text = self.render(&self.lexicon.ambiguous_template, &l2, &l3, true, rng);
                (l1, l2, l3, text)
            } else {
                let l1 = rng.weighted_index(&self.l1_weights);
                let template = &self.lexicon.l1_templates[self.space.name(Level::L1, l1)];
                if self.space.is_gate(l1) {
                    let text = self.render(template, &[], &[], true, rng);
                    (l1, Vec::new(), Vec::new(), text)
                } else {
                    let l2 = self.sample_set(&self.l2_weights, self.config.l2_nil_rate, rng);
                    let l3 = self.sample_set(&self.l3_weights, self.config.l3_nil_rate, rng);
                    let text = self.render(template, &l2, &l3, true, rng);
                    (l1, l2, l3, text)
                }
            };
            segments.push(Segment {
                dialog_id: id.clone(),
                position,
                speaker: self.speaker_for(l1, rng),
                text,
                l1,
                l2,
                l3,
            });
        }
        Dialog { id, segments }
    }
}

/// Generates a corpus from the configuration, deterministically per seed.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Corpus, CorpusError> {
    if config.dialogs == 0 {
        return Err(CorpusError::ZeroDialogs);
    }
    let space = LabelSpace::canonical();
    let default_lexicon;
    let lexicon = match &config.lexicon {
        Some(lex) => lex,
        None => {
            default_lexicon = Lexicon::default();
            &default_lexicon
        }
    };
    for label in space.labels(Level::L1) {
        match lexicon.l1_templates.get(&label.name) {
            Some(words) if !words.is_empty() => {}
            _ => {
                return Err(CorpusError::MissingLexicon {
                    level: Level::L1,
                    label: label.name.clone(),
                })
            }
        }
    }
    for (level, triggers) in [
        (Level::L2, &lexicon.l2_triggers),
        (Level::L3, &lexicon.l3_triggers),
    ] {
        for label in space.labels(level) {
            match triggers.get(&label.name) {
                Some(words) if !words.is_empty() => {}
                _ => {
                    return Err(CorpusError::MissingLexicon {
                        level,
                        label: label.name.clone(),
                    })
                }
            }
        }
    }

    let l1_defaults: Vec<f64> = L1_COUNTS.iter().map(|(u, s)| u + s).collect();
    let generator = Generator {
        space,
        lexicon,
        config,
        l1_weights: marginal_weights(space, Level::L1, &config.l1_marginals, &l1_defaults)?,
        l2_weights: marginal_weights(space, Level::L2, &config.l2_marginals, &L2_COUNTS)?,
        l3_weights: marginal_weights(space, Level::L3, &config.l3_marginals, &L3_COUNTS)?,
    };
    let mut rng = RandomSource::new(seed).derive(0x7379_6e74); // "synt"
    let width = config.dialogs.to_string().len().max(4);
    let dialogs = (0..config.dialogs)
        .map(|i| generator.dialog(format!("synth-{i:0width$}"), &mut rng))
        .collect();
    Ok(Corpus::new(dialogs))
}
