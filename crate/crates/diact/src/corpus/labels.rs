//! Canonical label inventories for the three annotation levels.
//!
//! Canonical names are the Spanish ones; the English translations are
//! accepted as aliases on input and normalized on load. Six structuring L1
//! labels (the gate set) force the absence of labels on the lower levels.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    L3,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::L1 => write!(f, "L1"),
            Level::L2 => write!(f, "L2"),
            Level::L3 => write!(f, "L3"),
        }
    }
}

/// One inventory entry: its level, canonical name, and index within the
/// level's inventory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub level: Level,
    pub name: String,
    pub index: usize,
}

const L1_NAMES: [(&str, &str); 11] = [
    ("Pregunta", "Question"),
    ("Respuesta", "Answer"),
    ("Confirmación", "Confirmation"),
    ("Nueva Consulta", "New Consult"),
    ("Espera", "Waiting"),
    ("Cierre", "Closing"),
    ("Afirmación", "Acceptance"),
    ("Apertura", "Opening"),
    ("No Entendido", "Not Understood"),
    ("Negación", "Rejection"),
    ("Indefinida", "Undefined"),
];

const L2_NAMES: [(&str, &str); 10] = [
    ("Hora Salida", "Departure Time"),
    ("Precio", "Fare"),
    ("Día", "Day"),
    ("Origen", "Origin"),
    ("Destino", "Destination"),
    ("Tipo Tren", "Train Type"),
    ("Hora Llegada", "Arrival Time"),
    ("Tiempo Recorrido", "Duration"),
    ("Clase Billete", "Ticket Class"),
    ("Servicio", "Service"),
];

const L3_NAMES: [(&str, &str); 13] = [
    ("Destino", "Destination"),
    ("Día", "Day"),
    ("Origen", "Origin"),
    ("Hora Salida", "Departure Time"),
    ("Número Trenes", "Number of Trains"),
    ("Tipo Tren", "Train Type"),
    ("Número Orden", "Order Number"),
    ("Clase Billete", "Ticket Class"),
    ("Precio", "Fare"),
    ("Hora Llegada", "Arrival Time"),
    ("Tipo Viaje", "Trip Type"),
    ("Servicio", "Service"),
    ("Tiempo Recorrido", "Duration"),
];

const GATE_NAMES: [&str; 6] = [
    "Apertura",
    "Cierre",
    "Indefinida",
    "No Entendido",
    "Espera",
    "Nueva Consulta",
];

/// The per-level label inventories and the gate set. Nil is represented as
/// the empty set on segments, never as an inventory member.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSpace {
    l1: Vec<Label>,
    l2: Vec<Label>,
    l3: Vec<Label>,
    gate: BTreeSet<usize>,
}

impl LabelSpace {
    pub fn canonical() -> &'static LabelSpace {
        use std::sync::OnceLock;
        static SPACE: OnceLock<LabelSpace> = OnceLock::new();
        SPACE.get_or_init(|| {
            let build = |level: Level, names: &[(&str, &str)]| {
                names
                    .iter()
                    .enumerate()
                    .map(|(index, (name, _))| Label {
                        level,
                        name: (*name).to_string(),
                        index,
                    })
                    .collect()
            };
            let l1: Vec<Label> = build(Level::L1, &L1_NAMES);
            let gate = GATE_NAMES
                .iter()
                .map(|g| l1.iter().position(|l| l.name == *g).expect("gate label"))
                .collect();
            LabelSpace {
                l1,
                l2: build(Level::L2, &L2_NAMES),
                l3: build(Level::L3, &L3_NAMES),
                gate,
            }
        })
    }

    pub fn labels(&self, level: Level) -> &[Label] {
        match level {
            Level::L1 => &self.l1,
            Level::L2 => &self.l2,
            Level::L3 => &self.l3,
        }
    }

    /// Inventory size excluding Nil.
    pub fn size(&self, level: Level) -> usize {
        self.labels(level).len()
    }

    /// Evaluation-time label count: the inventory plus Nil for the
    /// multi-label levels.
    pub fn size_with_nil(&self, level: Level) -> usize {
        match level {
            Level::L1 => self.size(Level::L1),
            Level::L2 | Level::L3 => self.size(level) + 1,
        }
    }

    pub fn name(&self, level: Level, index: usize) -> &str {
        &self.labels(level)[index].name
    }

    /// Resolves a canonical Spanish name or its English alias,
    /// case-insensitively.
    pub fn resolve(&self, level: Level, name: &str) -> Option<usize> {
        let aliases: &[(&str, &str)] = match level {
            Level::L1 => &L1_NAMES,
            Level::L2 => &L2_NAMES,
            Level::L3 => &L3_NAMES,
        };
        let wanted = name.trim().to_lowercase();
        aliases
            .iter()
            .position(|(es, en)| es.to_lowercase() == wanted || en.to_lowercase() == wanted)
    }

    pub fn gate_indices(&self) -> &BTreeSet<usize> {
        &self.gate
    }

    pub fn is_gate(&self, l1_index: usize) -> bool {
        self.gate.contains(&l1_index)
    }
}
