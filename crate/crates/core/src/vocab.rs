//! Closed token vocabularies.
//!
//! Every token a plan, constraint, or tool call can carry comes from one
//! of the small closed categories below. The planner's model vocabulary
//! is the union of all categories plus structural markers.

use std::collections::BTreeMap;
use std::sync::OnceLock;

pub const COLORS: &[&str] = &[
    "red", "blue", "green", "gold", "white", "black", "orange", "purple", "teal", "pink",
    "brown", "silver", "crimson", "navy", "ivory", "drab",
];

pub const MOTIFS: &[&str] = &[
    "plain", "stripes", "dots", "fireworks", "lanterns", "snowflakes", "leaves", "waves",
    "stars", "blossoms", "gradient", "confetti",
];

pub const LABELS: &[&str] = &[
    "soda", "phone", "sneaker", "watch", "burger", "laptop", "car", "bicycle", "sofa", "lamp",
    "badge", "ribbon", "wreath", "lantern", "pumpkin", "gift", "flag", "drone", "jacket", "mug",
];

pub const CONTENT_WORDS: &[&str] = &[
    "big", "sale", "now", "new", "fresh", "deal", "save", "today", "festival", "harvest",
    "lunar", "solstice", "family", "business", "travel", "sport", "garden", "city", "winter",
    "summer", "classic", "premium", "free", "more", "garbled",
];

pub const RELATIONS: &[&str] = &["above", "below", "left_of", "right_of", "inside"];

/// Pool of element id tokens. Each generated document draws a subset.
pub const ELEMENT_IDS: &[&str] = &[
    "ea", "eb", "ec", "ed", "ee", "ef", "eg", "eh", "ei", "ej", "ek", "el", "em", "en", "eo",
    "ep",
];

pub const VERBS: &[&str] = &[
    "replace_text",
    "recolor",
    "recolor_background",
    "swap_motif",
    "add_object",
    "remove_element",
];

/// Selector token for whole-background targets.
pub const SEL_BACKGROUND: &str = "sel_background";

/// Structural markers in plan token streams.
pub const TOK_SUB: &str = "<sub>";
pub const TOK_EOP: &str = "<eop>";
pub const TOK_PAD: &str = "<pad>";

/// Attribute token used for collateral color drift.
pub const DRAB: &str = "drab";
/// Content token left behind by collateral text damage.
pub const GARBLED: &str = "garbled";

pub const INSTRUCTION_CATEGORIES: &[&str] =
    &["festival-adapt", "audience-retarget", "product-swap"];

/// The full model vocabulary with stable token ids.
#[derive(Debug)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: BTreeMap<String, u16>,
}

impl Vocab {
    fn build() -> Self {
        let mut tokens: Vec<String> = Vec::new();
        let push = |t: &str, tokens: &mut Vec<String>| {
            tokens.push(t.to_string());
        };
        for t in VERBS {
            push(t, &mut tokens);
        }
        push(SEL_BACKGROUND, &mut tokens);
        for t in ELEMENT_IDS {
            push(t, &mut tokens);
        }
        for t in COLORS {
            push(t, &mut tokens);
        }
        for t in MOTIFS {
            push(t, &mut tokens);
        }
        for t in LABELS {
            push(t, &mut tokens);
        }
        for t in CONTENT_WORDS {
            push(t, &mut tokens);
        }
        for t in RELATIONS {
            push(t, &mut tokens);
        }
        push(TOK_SUB, &mut tokens);
        push(TOK_EOP, &mut tokens);
        push(TOK_PAD, &mut tokens);
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u16))
            .collect();
        Vocab { tokens, ids }
    }

    pub fn global() -> &'static Vocab {
        static VOCAB: OnceLock<Vocab> = OnceLock::new();
        VOCAB.get_or_init(Vocab::build)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u16> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u16) -> &str {
        &self.tokens[id as usize]
    }

    /// Ids of tokens the model may emit (everything except padding).
    pub fn emittable(&self) -> impl Iterator<Item = u16> + '_ {
        (0..self.tokens.len() as u16).filter(|&i| self.token(i) != TOK_PAD)
    }

    pub fn pad_id(&self) -> u16 {
        self.id(TOK_PAD).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_stay_closed() {
        assert!(COLORS.len() <= 64);
        assert!(MOTIFS.len() <= 64);
        assert!(LABELS.len() <= 64);
        assert!(CONTENT_WORDS.len() <= 64);
        assert!(RELATIONS.len() <= 64);
        assert!(ELEMENT_IDS.len() <= 64);
        assert!(VERBS.len() <= 64);
    }

    #[test]
    fn vocab_ids_round_trip() {
        let v = Vocab::global();
        for i in 0..v.len() as u16 {
            assert_eq!(v.id(v.token(i)), Some(i));
        }
        // No duplicate spellings across categories.
        assert_eq!(v.len(), {
            let mut all: Vec<&str> = Vec::new();
            all.extend(VERBS);
            all.push(SEL_BACKGROUND);
            all.extend(ELEMENT_IDS);
            all.extend(COLORS);
            all.extend(MOTIFS);
            all.extend(LABELS);
            all.extend(CONTENT_WORDS);
            all.extend(RELATIONS);
            all.extend([TOK_SUB, TOK_EOP, TOK_PAD]);
            let n = all.len();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), n, "duplicate token spelling across categories");
            n
        });
    }
}
